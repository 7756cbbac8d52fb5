//! Scenario pipelines behind the command-line subcommands.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::emm::{validate_h1, validate_h2, NormalizedTail, ValidationReport};
use crate::error::{Error, Result};
use crate::girsanov::{
    density_process, gaussian_density, lm_criterion_check, write_density_csv, LmReport, LmSetup, MarkLaw, PathState,
    QSimulator,
};
use crate::kernel::{absolute_continuity_witness, density_condition, emm_classify, EmmVerdict, IntegralVerdict, Kernel, TailRegime};
use crate::levy::{LevyTriplet, Region, TruncationFunction};
use crate::par::{try_map_paths, PathRng};
use crate::scenario::{AlphaKind, EmmHypothesis, LmSpec, Scenario, TestKind};
use crate::sim::{moving_average, write_jumps_csv, write_paths_csv, Jump, LevySimulator, MovingAveragePath};
use crate::stats::Moments;
use crate::verify::{
    brownian_invariance_test, conditional_jump_law_test, count_law_comparison, finite_expect, jump_intensity_test,
    mean_density_test, q_martingale_test, DoublingConfig, IncrementSample, MartingaleSample, MarkRecord, StatReport,
    Verdict,
};

/// Version of every JSON document written by the pipelines.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct KernelCheck {
    pub schema_version: u32,
    pub scenario: String,
    pub kernel: String,
    pub phi0: f64,
    pub tail_regime: TailRegime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_condition: Option<IntegralVerdict>,
    pub verdict: EmmVerdict,
}

pub fn check_kernel(s: &Scenario) -> Result<KernelCheck> {
    let triplet = s.build_triplet()?;
    let kernel = s.build_kernel()?;
    let regime = s.triplet.tail_regime();
    Ok(KernelCheck {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        kernel: kernel.label(),
        phi0: kernel.phi0()?,
        tail_regime: regime,
        witness_deviation: absolute_continuity_witness(&kernel).ok(),
        density_condition: density_condition(&kernel, &triplet).ok(),
        verdict: emm_classify(&kernel, &triplet, regime),
    })
}

/// `b^h` in the declared convention and in the two conventions the
/// Girsanov kernels use.
#[derive(Debug, Clone, Serialize)]
pub struct DriftConventions {
    pub declared: f64,
    pub xi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inside_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructReport {
    pub schema_version: u32,
    pub scenario: String,
    pub hypothesis: EmmHypothesis,
    pub y_range: (f64, f64),
    pub drift: DriftConventions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn sample_p_path(sim: &LevySimulator, kernel: &Kernel, rng: &mut PathRng) -> Result<MovingAveragePath> {
    moving_average(kernel, &sim.simulate_for(kernel, rng))
}

/// Range of `Y` over a pilot ensemble, widened by 10%.
fn pilot_y_range(s: &Scenario, triplet: &LevyTriplet, kernel: &Kernel) -> Result<(f64, f64)> {
    let sim = LevySimulator::new(triplet, &s.sim)?;
    let n = s.verify.n_paths.min(500);
    let ranges = try_map_paths(n, s.sim.seed ^ 0x9170, |_, rng| {
        let ma = sample_p_path(&sim, kernel, rng)?;
        let lo = ma.y.iter().chain(&ma.y_pre).copied().fold(f64::INFINITY, f64::min);
        let hi = ma.y.iter().chain(&ma.y_pre).copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    })?;
    let lo = ranges.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let hi = ranges.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo).max(1e-6);
    Ok((lo - pad, hi + pad))
}

pub fn construct(s: &Scenario) -> Result<ConstructReport> {
    let triplet = s.build_triplet()?;
    let kernel = s.build_kernel()?;
    let alpha = s.build_alpha(&triplet, &kernel)?;
    let y_range = match s.emm.y_range {
        Some(r) => r,
        None => pilot_y_range(s, &triplet, &kernel)?,
    };
    let inside_a = match s.emm.a {
        Some(a) => Some(triplet.retriplet(TruncationFunction::inside(a)?)?.b_h),
        None => None,
    };
    let band = match (s.emm.a, s.emm.b) {
        (Some(a), Some(b)) if triplet.integrable => Some(triplet.retriplet(TruncationFunction::outside_band(a, b)?)?.b_h),
        _ => None,
    };
    let drift = DriftConventions { declared: triplet.b_h, xi: triplet.drift_xi()?, inside_a, band };
    let n_y = 201;
    let ys: Vec<f64> = (0..n_y)
        .map(|i| y_range.0 + (y_range.1 - y_range.0) * i as f64 / (n_y - 1) as f64)
        .collect();
    let validation = match &alpha {
        AlphaKind::H1(k) => Some(validate_h1(k, &triplet.measure, &ys)?),
        AlphaKind::H2(k) => {
            k.check_y_range(y_range.0, y_range.1)?;
            Some(validate_h2(k, &triplet.measure, &ys)?)
        }
        AlphaKind::Identity | AlphaKind::Gaussian { .. } => None,
    };
    let passed = validation.as_ref().is_none_or(|v| v.positive && v.max_violation <= s.emm.tolerance);
    Ok(ConstructReport {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        hypothesis: s.emm.hypothesis,
        y_range,
        drift,
        validation,
        tolerance: s.emm.tolerance,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub n_paths: usize,
    pub seed: u64,
    pub files: Vec<PathBuf>,
}

/// Writes P-paths, their jumps and density processes as CSV.
pub fn simulate(s: &Scenario, out: &Path) -> Result<SimulateSummary> {
    let triplet = s.build_triplet()?;
    let kernel = s.build_kernel()?;
    let alpha = s.build_alpha(&triplet, &kernel)?;
    let sim = LevySimulator::new(&triplet, &s.sim)?;
    let paths = try_map_paths(s.sim.n_paths, s.sim.seed, |_, rng| sample_p_path(&sim, &kernel, rng))?;
    let densities: Vec<Vec<f64>> = paths
        .iter()
        .map(|ma| match &alpha {
            AlphaKind::Gaussian { phi0, c, xi } => gaussian_density(ma, *phi0, *c, *xi),
            _ => density_process(&alpha.jump_function(None), ma).map(|d| d.z),
        })
        .collect::<Result<_>>()?;
    std::fs::create_dir_all(out)?;
    let files = vec![out.join("paths.csv"), out.join("jumps.csv"), out.join("density.csv")];
    let indexed: Vec<(u64, &MovingAveragePath)> = paths.iter().enumerate().map(|(i, p)| (i as u64, p)).collect();
    write_paths_csv(BufWriter::new(File::create(&files[0])?), &indexed)?;
    let jumps: Vec<(u64, &[Jump])> = paths.iter().enumerate().map(|(i, p)| (i as u64, p.jumps.as_slice())).collect();
    write_jumps_csv(BufWriter::new(File::create(&files[1])?), &jumps)?;
    let dz: Vec<(u64, &[f64])> = densities.iter().enumerate().map(|(i, z)| (i as u64, z.as_slice())).collect();
    write_density_csv(BufWriter::new(File::create(&files[2])?), s.sim.dt, &dz)?;
    Ok(SimulateSummary {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        n_paths: s.sim.n_paths,
        seed: s.sim.seed,
        files,
    })
}

/// `E_Q[X_t - X_0]` with a 3-s.e. band.
#[derive(Debug, Clone, Serialize)]
pub struct PlotRow {
    pub t: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationDocument {
    pub schema_version: u32,
    pub scenario: String,
    pub hypothesis: EmmHypothesis,
    pub seed: u64,
    pub n_paths: usize,
    pub reports: Vec<StatReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lm: Option<LmReport>,
    pub verdict: Verdict,
    pub elapsed_seconds: f64,
    #[serde(skip)]
    pub plot: Vec<PlotRow>,
}

impl VerificationDocument {
    pub fn write_plot_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "weighted_mean", "lower", "upper"])?;
        for r in &self.plot {
            w.write_record(&[r.t.to_string(), r.mean.to_string(), r.lower.to_string(), r.upper.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What the P-ensemble keeps from each path.
struct PRecord {
    z: f64,
    martingale: MartingaleSample,
    dx: Vec<f64>,
    tail_count: usize,
    plot: Vec<f64>,
}

fn overall(reports: &[StatReport]) -> Verdict {
    if reports.iter().all(|r| r.verdict.passed()) {
        Verdict::Pass
    } else if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if reports.iter().any(|r| r.verdict == Verdict::Diverging) {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    }
}

fn renamed(mut r: StatReport, name: &str) -> StatReport {
    r.name = name.to_string();
    r
}

/// Equal-count state bins.
fn quantile_edges(states: &[f64], n_bins: usize) -> Vec<f64> {
    if n_bins <= 1 || states.is_empty() {
        return vec![];
    }
    let mut s = states.to_vec();
    s.sort_by(f64::total_cmp);
    (0..=n_bins).map(|i| s[((s.len() - 1) * i) / n_bins]).collect()
}

pub fn lm_setup(spec: &LmSpec, triplet: &LevyTriplet, eps: f64) -> Result<LmSetup> {
    Ok(match *spec {
        LmSpec::Bremaud { k1, k2, gamma } => {
            let lambda = triplet.measure.mass(&Region::everywhere())?;
            let inv = 1.0 / gamma;
            LmSetup {
                label: format!("bremaud(K1={k1}, K2={k2}, gamma={gamma})"),
                w: Arc::new(move |s: &PathState, _| (k1 + k2 * (s.l + lambda * s.t)).powf(inv) - 1.0),
                p: Arc::new(move |s: &PathState| 2.0 + k1 + k2 * (s.l + lambda * s.t)),
                g: Arc::new(|_| 1.0),
                eps,
            }
        }
        LmSpec::LmRelax => LmSetup {
            label: "lm-relax".into(),
            w: Arc::new(|s: &PathState, x| (s.l * x).abs()),
            p: Arc::new(|s: &PathState| s.l),
            g: Arc::new(|x: f64| x.abs()),
            eps,
        },
    })
}

pub fn verify(s: &Scenario) -> Result<VerificationDocument> {
    let started = Instant::now();
    let triplet = s.build_triplet()?;
    let kernel = s.build_kernel()?;
    let alpha = s.build_alpha(&triplet, &kernel)?;
    let controls = s.controls();
    let sim = LevySimulator::new(&triplet, &s.sim)?;
    let jump_fn = alpha.jump_function(controls.alpha_factor);
    let tests = &s.verify.tests;
    let wants = |t: TestKind| tests.contains(&t);
    let n = s.verify.n_paths;
    let seed = s.sim.seed;
    let horizon = s.sim.horizon;
    let probes = s.verify.probe_times.clone();
    let xi = triplet.drift_xi()?;
    let phi0 = kernel.phi0()?;
    let tail_a = s.emm.a.unwrap_or(f64::INFINITY);
    let n_grid = s.sim.n_future();
    let plot_idx: Vec<usize> = (0..=n_grid.min(100)).map(|i| i * n_grid / n_grid.clamp(1, 100)).collect();
    let mut bm_times = vec![0.0];
    bm_times.extend(probes.iter().copied());

    let needs_p = [TestKind::MeanDensity, TestKind::QMartingale, TestKind::JumpIntensity, TestKind::CountLawComparison, TestKind::BrownianInvariance]
        .iter()
        .any(|&t| wants(t));
    let records: Vec<PRecord> = if needs_p {
        try_map_paths(n, seed, |_, rng| {
            let ma = sample_p_path(&sim, &kernel, rng)?;
            let z = match &alpha {
                AlphaKind::Gaussian { phi0, c, xi } => gaussian_density(&ma, *phi0, *c, *xi)?,
                _ => density_process(&jump_fn, &ma)?.z,
            };
            let zt = *z.last().expect("grid");
            let x0 = ma.x0();
            let at = |t: f64| ma.x[ma.index_of(t)];
            let drift_sign = (ma.y[0] + phi0 * xi).signum();
            Ok(PRecord {
                z: zt,
                martingale: MartingaleSample {
                    z: zt,
                    x0,
                    x: probes.iter().map(|&t| at(t)).collect(),
                    g: vec![1.0, drift_sign],
                },
                dx: bm_times.windows(2).map(|w| at(w[1]) - at(w[0])).collect(),
                tail_count: ma.jumps.iter().filter(|j| j.size.abs() > tail_a).count(),
                plot: plot_idx.iter().map(|&k| ma.x[k] - x0).collect(),
            })
        })?
    } else {
        vec![]
    };

    let mut reports = Vec::new();
    if wants(TestKind::MeanDensity) {
        let z: Vec<f64> = records.iter().map(|r| r.z).collect();
        reports.push(mean_density_test(&z).with_seed(seed));
    }
    if wants(TestKind::QMartingale) {
        let m: Vec<MartingaleSample> = records.iter().map(|r| r.martingale.clone()).collect();
        reports.push(q_martingale_test(&m, &probes).with_seed(seed));
    }
    if wants(TestKind::BrownianInvariance) {
        let samples: Vec<IncrementSample> = records.iter().map(|r| IncrementSample { z: r.z, dx: r.dx.clone() }).collect();
        let deltas: Vec<f64> = bm_times.windows(2).map(|w| w[1] - w[0]).collect();
        let declared = phi0 * controls.phi0_factor.unwrap_or(1.0);
        reports.push(brownian_invariance_test(&samples, &deltas, declared, triplet.c).with_seed(seed));
    }

    let direct_q = [TestKind::JumpIntensity, TestKind::CountLawComparison, TestKind::ConditionalJumpLaw]
        .iter()
        .any(|&t| wants(t));
    if direct_q {
        let AlphaKind::H2(k2) = &alpha else {
            return Err(Error::InvalidConfig("direct Q-simulation needs hypothesis h2".into()));
        };
        let lambda_t = k2.fa_mass * horizon;
        let mut qs = QSimulator::new(k2, &triplet, &kernel, &s.sim)?;
        qs.intensity_factor = controls.intensity_factor.unwrap_or(1.0);
        if controls.untilted_marks == Some(true) {
            qs.mark_law = MarkLaw::Untilted;
        }
        let qpaths = qs.ensemble(n, seed ^ 0x51_6d)?;
        let q_counts: Vec<usize> = qpaths.iter().map(|q| q.arrivals.len()).collect();
        let p_counts: Vec<usize> = records.iter().map(|r| r.tail_count).collect();
        let p_weights: Vec<f64> = records.iter().map(|r| r.z).collect();
        if wants(TestKind::JumpIntensity) {
            reports.push(renamed(jump_intensity_test(&q_counts, None, lambda_t), "jump_intensity_direct").with_seed(seed));
            reports.push(
                renamed(jump_intensity_test(&p_counts, Some(&p_weights), lambda_t), "jump_intensity_weighted").with_seed(seed),
            );
        }
        if wants(TestKind::CountLawComparison) {
            reports.push(count_law_comparison(&q_counts, &p_counts, &p_weights, lambda_t).with_seed(seed));
        }
        if wants(TestKind::ConditionalJumpLaw) {
            let mut marks = Vec::new();
            for q in &qpaths {
                for (j, &y) in q.arrivals.iter().zip(&q.states) {
                    let w = k2.weights(y)?;
                    let rec = match &k2.tail {
                        NormalizedTail::Discrete { xs, ws, .. } => MarkRecord {
                            state: y,
                            category: xs.iter().position(|&x| x == j.size).expect("tail atom"),
                            probs: xs.iter().zip(ws).map(|(&x, &wi)| wi * w.eval(x) / k2.fa_mass).collect(),
                        },
                        NormalizedTail::Continuous(_) => MarkRecord {
                            state: y,
                            category: usize::from(j.size >= w.zeta),
                            probs: vec![1.0 - w.lambda, w.lambda],
                        },
                    };
                    marks.push(rec);
                }
            }
            let states: Vec<f64> = marks.iter().map(|m| m.state).collect();
            let edges = quantile_edges(&states, s.verify.state_bins.unwrap_or(1));
            reports.push(conditional_jump_law_test(&marks, &edges)?.with_seed(seed));
        }
    }

    let mut lm = None;
    if let Some(spec) = &s.verify.finite_expect {
        let cfg = DoublingConfig { n0: spec.n0, doublings: spec.doublings, replicates: spec.replicates, seed };
        if wants(TestKind::FiniteExpect) {
            let probe_t = probes.clone();
            let r = finite_expect(&cfg, spec.eps, |rng| match sample_p_path(&sim, &kernel, rng) {
                Ok(ma) => probe_t.iter().map(|&t| ma.y[ma.index_of(t)]).collect(),
                Err(_) => vec![f64::NAN; probe_t.len()],
            });
            reports.push(r);
        }
        if let (true, Some(lspec)) = (wants(TestKind::LmCriterion), &s.verify.lm) {
            let setup = lm_setup(lspec, &triplet, spec.eps)?;
            let report = lm_criterion_check(&setup, &triplet.measure, horizon, &cfg, probes.len().max(4), |rng| {
                sample_p_path(&sim, &kernel, rng)
            })?;
            reports.push(renamed(report.finite_expect.clone(), "lm_finite_expect"));
            reports.push(renamed(report.cells.clone(), "lm_partition_cells"));
            lm = Some(report);
        }
    }

    let plot = if records.is_empty() {
        vec![]
    } else {
        plot_idx
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let m: Moments = records.iter().map(|r| r.z * r.plot[i]).collect();
                let se = m.std_error();
                PlotRow { t: k as f64 * s.sim.dt, mean: m.mean, lower: m.mean - 3.0 * se, upper: m.mean + 3.0 * se }
            })
            .collect()
    };

    Ok(VerificationDocument {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        hypothesis: s.emm.hypothesis,
        seed,
        n_paths: n,
        verdict: overall(&reports),
        reports,
        lm,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        plot,
    })
}

/// Serializes any report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value).map_err(|e| Error::Config(e.to_string()))
}
