//! Monte Carlo tests for the measure-change claims.
//!
//! Every threshold is derived from a reported standard error: two-sided
//! 3-s.e. rules, Bonferroni across probes and chi-square at 1%. Exact
//! discrete oracles (zero standard error) use an absolute tolerance of 1e-9.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete as _, DiscreteCDF, Normal, Poisson};

use crate::error::{Error, Result};
use crate::par::{map_paths, PathRng};
use crate::stats::Moments;

/// Tolerance used when the standard error is exactly zero.
pub const EXACT_TOL: f64 = 1e-9;
/// Two-sided level of a single 3-s.e. rule.
pub const THREE_SE_LEVEL: f64 = 0.0026997960632601866;
pub const CHI2_LEVEL: f64 = 0.01;
pub const MIN_BIN_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Diverging,
    Inconclusive,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StatReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub verdict: Verdict,
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<StatReport>,
}

impl StatReport {
    fn new(name: &str, estimate: f64, std_error: f64, n: usize, verdict: Verdict, rule: String) -> Self {
        StatReport {
            name: name.to_string(),
            estimate,
            std_error,
            n_samples: n,
            verdict,
            rule,
            seed: None,
            probes: Vec::new(),
        }
    }

    /// A test that was not run because an earlier one settled the verdict.
    pub fn skipped(name: &str, why: &str) -> Self {
        StatReport::new(name, f64::NAN, f64::NAN, 0, Verdict::Inconclusive, format!("skipped: {why}"))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// `|estimate - target| <= z se`, or the exact tolerance when `se = 0`.
pub fn within(estimate: f64, target: f64, se: f64, z: f64) -> bool {
    let d = (estimate - target).abs();
    if se == 0.0 {
        d <= EXACT_TOL
    } else {
        d <= z * se
    }
}

/// Critical `z` for `m` two-sided tests sharing the level of one 3-s.e. rule.
pub fn bonferroni_z(m: usize) -> f64 {
    if m <= 1 {
        return 3.0;
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(1.0 - THREE_SE_LEVEL / (2.0 * m as f64))
}

/// `E[Z_T] = 1`.
pub fn mean_density_test(z: &[f64]) -> StatReport {
    let m: Moments = z.iter().collect();
    let se = m.std_error();
    let verdict = if within(m.mean, 1.0, se, 3.0) { Verdict::Pass } else { Verdict::Fail };
    StatReport::new("mean_density", m.mean, se, z.len(), verdict, "|mean - 1| <= 3 se".into())
}

/// One path's contribution to the weighted martingale test.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleSample {
    pub z: f64,
    pub x0: f64,
    /// `X_t` at the probe times.
    pub x: Vec<f64>,
    /// Bounded `F_0`-measurable test function values, e.g. `1` and the sign
    /// of the initial drift.
    pub g: Vec<f64>,
}

/// `E[Z_T (X_t - X_0) g] = 0` for every probe `t` and test function `g`.
pub fn q_martingale_test(samples: &[MartingaleSample], probe_times: &[f64]) -> StatReport {
    let n_g = samples.first().map_or(0, |s| s.g.len());
    let m = probe_times.len() * n_g;
    let z = bonferroni_z(m);
    let mut probes = Vec::new();
    for (p, t) in probe_times.iter().enumerate() {
        for gi in 0..n_g {
            let acc: Moments = samples.iter().map(|s| s.z * (s.x[p] - s.x0) * s.g[gi]).collect();
            let se = acc.std_error();
            let v = if within(acc.mean, 0.0, se, z) { Verdict::Pass } else { Verdict::Fail };
            probes.push(StatReport::new(
                &format!("t={t}, g{gi}"),
                acc.mean,
                se,
                samples.len(),
                v,
                format!("|mean| <= {z:.3} se"),
            ));
        }
    }
    aggregate("q_martingale", probes, samples.len(), format!("all {m} probes within Bonferroni z = {z:.3}"))
}

fn aggregate(name: &str, probes: Vec<StatReport>, n: usize, rule: String) -> StatReport {
    let worst = probes
        .iter()
        .max_by(|a, b| {
            let ra = if a.std_error > 0.0 { a.estimate.abs() / a.std_error } else { 0.0 };
            let rb = if b.std_error > 0.0 { b.estimate.abs() / b.std_error } else { 0.0 };
            ra.total_cmp(&rb)
        })
        .map(|p| (p.estimate, p.std_error))
        .unwrap_or((0.0, 0.0));
    let verdict = if probes.iter().all(|p| p.verdict.passed()) {
        Verdict::Pass
    } else if probes.iter().any(|p| p.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    let mut r = StatReport::new(name, worst.0, worst.1, n, verdict, rule);
    r.probes = probes;
    r
}

/// Poisson bins `0..k_max` and a merged upper tail, with every expected
/// count at least 5.
fn poisson_bins(mean: f64, n: f64) -> Vec<(usize, usize, f64)> {
    let d = Poisson::new(mean).expect("positive mean");
    let mut bins = Vec::new();
    let mut k = 0usize;
    let mut lo = 0usize;
    let mut acc = 0.0;
    loop {
        acc += d.pmf(k as u64);
        let rest = d.sf(k as u64);
        if acc * n >= 5.0 && rest * n >= 5.0 {
            bins.push((lo, k, acc));
            lo = k + 1;
            acc = 0.0;
        } else if rest * n < 5.0 {
            bins.push((lo, usize::MAX, acc + rest));
            break;
        }
        k += 1;
    }
    bins
}

/// Mean-count test and Poisson goodness of fit. With `weights` (a
/// reweighted P-ensemble) the fit uses per-bin z-tests under Bonferroni
/// since weighted counts are not multinomial.
pub fn jump_intensity_test(counts: &[usize], weights: Option<&[f64]>, lambda_t: f64) -> StatReport {
    let n = counts.len();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mean: Moments = (0..n).map(|i| w(i) * counts[i] as f64).collect();
    let se = mean.std_error();
    let mean_ok = within(mean.mean / lambda_t, 1.0, se / lambda_t, 3.0);
    let mean_report = StatReport::new(
        "mean_count",
        mean.mean,
        se,
        n,
        if mean_ok { Verdict::Pass } else { Verdict::Fail },
        "|mean / (lambda T) - 1| <= 3 se / (lambda T)".into(),
    );
    let bins = poisson_bins(lambda_t, n as f64);
    let fit = match weights {
        None => {
            let mut stat = 0.0;
            for &(lo, hi, p) in &bins {
                let obs = counts.iter().filter(|&&c| c >= lo && c <= hi).count() as f64;
                let exp = p * n as f64;
                stat += (obs - exp).powi(2) / exp;
            }
            let df = (bins.len() - 1).max(1) as f64;
            let p_value = 1.0 - ChiSquared::new(df).expect("df > 0").cdf(stat);
            StatReport::new(
                "poisson_chi2",
                stat,
                0.0,
                n,
                if p_value >= CHI2_LEVEL { Verdict::Pass } else { Verdict::Fail },
                format!("chi2 p-value {p_value:.4} >= {CHI2_LEVEL} (df {df})"),
            )
        }
        Some(_) => {
            let z = bonferroni_z(bins.len());
            let probes: Vec<StatReport> = bins
                .iter()
                .map(|&(lo, hi, p)| {
                    let m: Moments = (0..n)
                        .map(|i| if counts[i] >= lo && counts[i] <= hi { w(i) } else { 0.0 })
                        .collect();
                    let se = m.std_error();
                    StatReport::new(
                        &format!("P(N in [{lo}, {}])", if hi == usize::MAX { "inf".into() } else { hi.to_string() }),
                        m.mean,
                        se,
                        n,
                        if within(m.mean, p, se, z) { Verdict::Pass } else { Verdict::Fail },
                        format!("|p_hat - {p:.5}| <= {z:.3} se"),
                    )
                })
                .collect();
            aggregate("poisson_bins_weighted", probes, n, format!("per-bin z <= {z:.3}"))
        }
    };
    aggregate("jump_intensity", vec![mean_report, fit], n, "mean test and Poisson fit".into())
}

/// Per-bin comparison of the count law of a direct-Q ensemble with a
/// reweighted P-ensemble.
pub fn count_law_comparison(q_counts: &[usize], p_counts: &[usize], p_weights: &[f64], lambda_t: f64) -> StatReport {
    let bins = poisson_bins(lambda_t, q_counts.len().min(p_counts.len()) as f64);
    let z = bonferroni_z(bins.len());
    let probes = bins
        .iter()
        .map(|&(lo, hi, _)| {
            let q: Moments = q_counts.iter().map(|&c| f64::from(u8::from(c >= lo && c <= hi))).collect();
            let p: Moments = p_counts
                .iter()
                .zip(p_weights)
                .map(|(&c, &w)| if c >= lo && c <= hi { w } else { 0.0 })
                .collect();
            let se = (q.std_error().powi(2) + p.std_error().powi(2)).sqrt();
            StatReport::new(
                &format!("bin [{lo}, {}]", if hi == usize::MAX { "inf".into() } else { hi.to_string() }),
                q.mean - p.mean,
                se,
                q_counts.len() + p_counts.len(),
                if within(q.mean - p.mean, 0.0, se, z) { Verdict::Pass } else { Verdict::Fail },
                format!("|diff| <= {z:.3} se"),
            )
        })
        .collect();
    aggregate("count_law_comparison", probes, q_counts.len() + p_counts.len(), "two-sample per-bin z".into())
}

/// `|mean_a - mean_b| <= z sqrt(se_a^2 + se_b^2)`.
pub fn two_sample_mean_test(name: &str, a: &Moments, b: &Moments, z: f64) -> StatReport {
    let d = a.mean - b.mean;
    let se = (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
    StatReport::new(
        name,
        d,
        se,
        (a.n + b.n) as usize,
        if within(d, 0.0, se, z) { Verdict::Pass } else { Verdict::Fail },
        format!("|difference| <= {z} joint se"),
    )
}

/// One jump of the conditional-law test: the predictable state, the
/// category of the observed mark and the model probabilities of every
/// category given that state.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkRecord {
    pub state: f64,
    pub category: usize,
    pub probs: Vec<f64>,
}

/// Within each state bin, compares the observed category counts with the
/// expected counts summed over the bin's records (chi-square at 1%,
/// Bonferroni over bins).
pub fn conditional_jump_law_test(records: &[MarkRecord], bin_edges: &[f64]) -> Result<StatReport> {
    let n_bins = bin_edges.len().saturating_sub(1).max(1);
    let bin_of = |s: f64| -> usize {
        if bin_edges.len() < 2 {
            return 0;
        }
        let k = bin_edges.partition_point(|&e| e <= s);
        k.saturating_sub(1).min(n_bins - 1)
    };
    let n_cat = records.first().map_or(0, |r| r.probs.len());
    let mut obs = vec![vec![0.0; n_cat]; n_bins];
    let mut exp = vec![vec![0.0; n_cat]; n_bins];
    let mut count = vec![0usize; n_bins];
    for r in records {
        let b = bin_of(r.state);
        count[b] += 1;
        obs[b][r.category] += 1.0;
        for (e, p) in exp[b].iter_mut().zip(&r.probs) {
            *e += p;
        }
    }
    for (b, &c) in count.iter().enumerate() {
        if c < MIN_BIN_SAMPLES {
            return Err(Error::InsufficientSamples { bin: b, count: c, floor: MIN_BIN_SAMPLES });
        }
    }
    let level = CHI2_LEVEL / n_bins as f64;
    let mut probes = Vec::new();
    for b in 0..n_bins {
        let mut stat = 0.0;
        let mut cells = 0;
        for k in 0..n_cat {
            if exp[b][k] > 0.0 {
                stat += (obs[b][k] - exp[b][k]).powi(2) / exp[b][k];
                cells += 1;
            } else if obs[b][k] > 0.0 {
                stat = f64::INFINITY;
            }
        }
        let df = (cells.max(2) - 1) as f64;
        let p_value = if stat.is_finite() { 1.0 - ChiSquared::new(df).expect("df > 0").cdf(stat) } else { 0.0 };
        let r = StatReport::new(
            &format!("state bin {b}"),
            stat,
            0.0,
            count[b],
            if p_value >= level { Verdict::Pass } else { Verdict::Fail },
            format!("chi2 p-value {p_value:.4} >= {level:.4} (df {df})"),
        );
        probes.push(r);
    }
    Ok(aggregate("conditional_jump_law", probes, records.len(), format!("chi2 at {CHI2_LEVEL} / {n_bins} per bin")))
}

/// Settings of the doubling study behind `finite_expect`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingConfig {
    pub n0: usize,
    pub doublings: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for DoublingConfig {
    fn default() -> Self {
        DoublingConfig { n0: 1000, doublings: 4, replicates: 16, seed: 0 }
    }
}

/// Median-of-replicate-means of each quantity at each sample size.
#[derive(Debug, Clone, Serialize)]
pub struct DoublingLevel {
    pub n: usize,
    pub centers: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Median and its standard error of the log replicate means, used by the
    /// classifier when every mean is positive.
    #[serde(skip)]
    pub log_scale: Vec<Option<(f64, f64)>>,
}

/// Estimates `E[V_j]` for the vector `V` returned by `sample` at sizes
/// `n0 2^k`, `k = 0..=doublings`, each from `replicates` independent runs.
///
/// For an infinite expectation the typical sample mean keeps growing with
/// `n`, so the median over replicates trends upward across levels; a finite
/// one settles within its standard error. Positive quantities are compared
/// on the log scale, where heavy-tailed replicate means stay well behaved.
pub fn doubling_study<S>(cfg: &DoublingConfig, sample: S) -> Vec<DoublingLevel>
where
    S: Fn(&mut PathRng) -> Vec<f64> + Sync + Send,
{
    let mut levels = Vec::new();
    for k in 0..=cfg.doublings {
        let n = cfg.n0 << k;
        let level_seed = cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1));
        let draws = map_paths(n * cfg.replicates, level_seed, |_, rng| sample(rng));
        let dim = draws.first().map_or(0, |d| d.len());
        let mut centers = Vec::with_capacity(dim);
        let mut ses = Vec::with_capacity(dim);
        let mut log_scale = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut means: Vec<f64> = (0..cfg.replicates)
                .map(|r| draws[r * n..(r + 1) * n].iter().map(|d| d[j]).sum::<f64>() / n as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            centers.push(median(&means));
            ses.push(median_std_error(&means));
            log_scale.push(if means[0] > 0.0 {
                let logs: Vec<f64> = means.iter().map(|m| m.ln()).collect();
                Some((median(&logs), median_std_error(&logs)))
            } else {
                None
            });
        }
        levels.push(DoublingLevel { n, centers, std_errors: ses, log_scale });
    }
    pool_std_errors(&mut levels);
    levels
}

/// An IQR from a handful of replicates is a noisy scale. For a finite
/// quantity `se * sqrt(n)` is the same at every level, so each level gets
/// at least the median of that product across levels.
fn pool_std_errors(levels: &mut [DoublingLevel]) {
    let dim = levels.first().map_or(0, |l| l.std_errors.len());
    let pooled = |vals: Vec<f64>| {
        let mut v: Vec<f64> = vals.into_iter().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        if v.is_empty() { f64::NAN } else { median(&v) }
    };
    for j in 0..dim {
        let raw = pooled(levels.iter().map(|l| l.std_errors[j] * (l.n as f64).sqrt()).collect());
        let log = pooled(levels.iter().filter_map(|l| l.log_scale[j].map(|(_, s)| s * (l.n as f64).sqrt())).collect());
        for l in levels.iter_mut() {
            let root = (l.n as f64).sqrt();
            if raw.is_finite() {
                l.std_errors[j] = l.std_errors[j].max(raw / root);
            }
            if let (Some((_, s)), true) = (l.log_scale[j].as_mut(), log.is_finite()) {
                *s = s.max(log / root);
            }
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

/// Standard error of a median from the interquartile range, which stays
/// meaningful when the replicate means are heavy tailed. The span between
/// the chosen order statistics is scaled by its expected normal-score span
/// (Blom positions), which removes the small-sample bias of `IQR / 1.349`.
fn median_std_error(sorted: &[f64]) -> f64 {
    let r = sorted.len();
    if r < 4 {
        return f64::NAN;
    }
    let lo = ((r - 1) as f64 * 0.25).round() as usize;
    let hi = r - 1 - lo;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let score = |i: usize| normal.inverse_cdf((i as f64 + 1.0 - 0.375) / (r as f64 + 0.25));
    let sigma = (sorted[hi] - sorted[lo]) / (score(hi) - score(lo));
    1.2533 * sigma / (r as f64).sqrt()
}

/// Classifies quantity `j` of a doubling study.
pub fn classify_doubling(levels: &[DoublingLevel], j: usize) -> Verdict {
    let logs: Option<Vec<(f64, f64)>> = levels.iter().map(|l| l.log_scale.get(j).copied().flatten()).collect();
    let (c, s): (Vec<f64>, Vec<f64>) = match logs {
        Some(v) => v.into_iter().unzip(),
        None => levels.iter().map(|l| (l.centers[j], l.std_errors[j])).unzip(),
    };
    if c.iter().any(|v| !v.is_finite()) {
        return Verdict::Diverging;
    }
    let k = c.len();
    if k < 2 {
        return Verdict::Inconclusive;
    }
    // weighted trend of the centers against the doubling index
    let kbar = (k - 1) as f64 / 2.0;
    let sxx: f64 = (0..k).map(|i| (i as f64 - kbar).powi(2)).sum();
    let slope = (0..k).map(|i| (i as f64 - kbar) * c[i]).sum::<f64>() / sxx;
    let slope_se = (0..k).map(|i| ((i as f64 - kbar) * s[i]).powi(2)).sum::<f64>().sqrt() / sxx;
    let stable = |i: usize| within(c[i + 1], c[i], (s[i].powi(2) + s[i + 1].powi(2)).sqrt(), 3.0);
    if slope > 3.0 * slope_se && !(slope_se == 0.0 && slope <= EXACT_TOL) {
        Verdict::Diverging
    } else if stable(k - 2) && (k < 3 || stable(k - 3)) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    }
}

/// `sup_t E[exp(eps |P_t| log(1 + |P_t|))]` over the probe times returned by
/// `sample`.
pub fn finite_expect<S>(cfg: &DoublingConfig, eps: f64, sample: S) -> StatReport
where
    S: Fn(&mut PathRng) -> Vec<f64> + Sync + Send,
{
    let levels = doubling_study(cfg, |rng| {
        sample(rng)
            .into_iter()
            .map(|p| (eps * p.abs() * p.abs().ln_1p()).exp())
            .collect()
    });
    doubling_report("finite_expect", &levels, cfg)
}

pub fn doubling_report(name: &str, levels: &[DoublingLevel], cfg: &DoublingConfig) -> StatReport {
    let last = levels.last().expect("at least one level");
    let dim = last.centers.len();
    let verdicts: Vec<Verdict> = (0..dim).map(|j| classify_doubling(levels, j)).collect();
    let verdict = if verdicts.iter().all(|v| v.passed()) {
        Verdict::Pass
    } else if verdicts.contains(&Verdict::Diverging) {
        Verdict::Diverging
    } else if verdicts.contains(&Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    let (j, est) = last
        .centers
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    let mut r = StatReport::new(
        name,
        est,
        last.std_errors.get(j).copied().unwrap_or(f64::NAN),
        last.n * cfg.replicates,
        verdict,
        format!(
            "median of {} replicate means over {} doublings from n = {}: trend above 3 se = diverging, else settled within 3 se = pass",
            cfg.replicates, cfg.doublings, cfg.n0
        ),
    )
    .with_seed(cfg.seed);
    r.probes = levels
        .iter()
        .map(|l| {
            let (jj, v) = l
                .centers
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
            StatReport::new(&format!("n = {}", l.n), v, l.std_errors[jj], l.n * cfg.replicates, verdict, "sup over probes".into())
        })
        .collect();
    r
}

/// One path of the Gaussian-case check: `Z_T` and `X_{t+Delta} - X_t` at
/// each probe pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    pub z: f64,
    pub dx: Vec<f64>,
}

/// `E_Q[Delta X] = 0` and `E_Q[Delta X^2] = phi(0)^2 c Delta` at every probe.
pub fn brownian_invariance_test(samples: &[IncrementSample], deltas: &[f64], phi0: f64, c: f64) -> StatReport {
    let m = 2 * deltas.len();
    let z = bonferroni_z(m);
    let mut probes = Vec::new();
    for (p, &delta) in deltas.iter().enumerate() {
        let mean: Moments = samples.iter().map(|s| s.z * s.dx[p]).collect();
        let sq: Moments = samples.iter().map(|s| s.z * s.dx[p] * s.dx[p]).collect();
        let target = phi0 * phi0 * c * delta;
        probes.push(StatReport::new(
            &format!("mean, probe {p}"),
            mean.mean,
            mean.std_error(),
            samples.len(),
            if within(mean.mean, 0.0, mean.std_error(), z) { Verdict::Pass } else { Verdict::Fail },
            format!("|E_Q dX| <= {z:.3} se"),
        ));
        probes.push(StatReport::new(
            &format!("variance, probe {p}"),
            sq.mean,
            sq.std_error(),
            samples.len(),
            if within(sq.mean, target, sq.std_error(), z) { Verdict::Pass } else { Verdict::Fail },
            format!("|E_Q dX^2 - {target:.6}| <= {z:.3} se"),
        ));
    }
    aggregate("brownian_invariance", probes, samples.len(), format!("{m} probes, Bonferroni z = {z:.3}"))
}

/// Fraction of independent replications in which `run` fails; used to
/// measure the power of negative controls.
pub fn rejection_rate<F>(n_rep: usize, seed: u64, run: F) -> f64
where
    F: Fn(u64) -> Verdict + Sync + Send,
{
    let v = map_paths(n_rep, seed, |i, _| run(seed.wrapping_mul(1_000_003).wrapping_add(i)));
    v.iter().filter(|v| !v.passed()).count() as f64 / n_rep as f64
}
