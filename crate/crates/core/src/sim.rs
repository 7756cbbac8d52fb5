//! Two-sided Lévy paths on a lattice and the moving averages they drive.
//!
//! A path lives on `[-M, T]` with cells `(t_i, t_{i+1}]`. Each cell carries
//! its diffusive increment (Gaussian part, small jumps and drift) and the
//! jumps with `|x| >= eps_jump` are kept as an explicit marked list, so the
//! total cell increment is `diffusive[i] + sum of jumps in the cell`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::levy::{JumpSampler, LevyMeasure, LevyTriplet, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmallJumpMode {
    /// Compensated jumps below the cutoff replaced by a Gaussian with the
    /// same variance.
    GaussianApprox,
    /// Compensated small jumps dropped; only their drift is kept.
    DriftOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// `T`.
    pub horizon: f64,
    /// `M`: the past is simulated on `[-M, 0]`.
    pub past: f64,
    pub dt: f64,
    pub eps_jump: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub small_jump_mode: SmallJumpMode,
}

fn steps(span: f64, dt: f64, what: &str) -> Result<usize> {
    let r = span / dt;
    let n = r.round();
    if (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidConfig(format!("dt = {dt} does not divide {what} = {span}")));
    }
    Ok(n as usize)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.past >= 0.0 && self.past.is_finite()) {
            return bad(format!("past depth must be >= 0, got {}", self.past));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.eps_jump > 0.0) {
            return bad(format!("eps_jump must be positive, got {}", self.eps_jump));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be positive".into());
        }
        steps(self.horizon, self.dt, "horizon")?;
        steps(self.past, self.dt, "past")?;
        Ok(())
    }

    pub fn n_past(&self) -> usize {
        steps(self.past, self.dt, "past").unwrap_or(0)
    }

    pub fn n_future(&self) -> usize {
        steps(self.horizon, self.dt, "horizon").unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePath {
    /// `t_0 = -M`.
    pub start: f64,
    pub dt: f64,
    /// Number of cells in `[-M, 0]`; grid index `n_past` is time 0.
    pub n_past: usize,
    /// Non-explicit part of each cell increment.
    pub diffusive: Vec<f64>,
    /// Explicit jumps, strictly increasing in time.
    pub jumps: Vec<Jump>,
    /// Exponential-kernel state carried in from a past that was summed out
    /// (see [`LevySimulator::simulate_for`]); zero for a full lattice.
    pub initial: f64,
}

impl LatticePath {
    pub fn n_cells(&self) -> usize {
        self.diffusive.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        // grid times are exact multiples of dt relative to 0
        (i as f64 - self.n_past as f64) * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_cells())
    }

    /// Index `i` of the cell `(t_i, t_{i+1}]` holding time `t`.
    pub fn cell_of(&self, t: f64) -> usize {
        let r = (t - self.start) / self.dt;
        let i = r.ceil() as i64 - 1;
        i.clamp(0, self.n_cells() as i64 - 1) as usize
    }

    /// Total `Delta L` per cell.
    pub fn increments(&self) -> Vec<f64> {
        let mut inc = self.diffusive.clone();
        for j in &self.jumps {
            inc[self.cell_of(j.time)] += j.size;
        }
        inc
    }

    /// Replaces the explicit jump list, keeping it sorted.
    pub fn set_jumps(&mut self, mut jumps: Vec<Jump>) {
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        self.jumps = jumps;
    }
}

/// Explicit jumps with times in `(lo, hi]`.
pub fn extract_jump_measure(path: &LatticePath, lo: f64, hi: f64) -> Vec<Jump> {
    path.jumps
        .iter()
        .copied()
        .filter(|j| j.time > lo && j.time <= hi)
        .collect()
}

/// Everything needed to draw paths of one triplet, computed once.
#[derive(Debug, Clone)]
pub struct LevySimulator {
    pub config: SimConfig,
    /// Deterministic drift per unit time of the diffusive part.
    pub drift_rate: f64,
    /// `int_{|x| < eps} x^2 dF`.
    pub small_jump_variance: f64,
    pub gaussian_variance: f64,
    pub jumps: JumpSampler,
}

impl LevySimulator {
    pub fn new(triplet: &LevyTriplet, config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let eps = config.eps_jump;
        let f = &triplet.measure;
        let h = &triplet.h;
        let cuts = h.breakpoints();
        // b^h + int_{|x|<eps} (x - h) dF - int_{|x|>=eps} h dF
        let inner_dev = if eps > h.identity_radius() {
            let region = Region::within_open(eps).split_at(&cuts);
            let r = Region(
                region
                    .0
                    .into_iter()
                    .filter(|iv| iv.lo.abs().max(iv.hi.abs()) > h.identity_radius())
                    .collect(),
            );
            f.integrate(|x| x - h.eval(x), false, &r)?
        } else {
            0.0
        };
        let outer_h = f.integrate(|x| h.eval(x), false, &Region::outside_inclusive(eps).split_at(&cuts))?;
        let small_jump_variance = f.second_moment(&Region::within_open(eps))?;
        let jumps = f.jump_sampler(eps)?;
        Ok(LevySimulator {
            config: config.clone(),
            drift_rate: triplet.b_h + inner_dev - outer_h,
            small_jump_variance,
            gaussian_variance: triplet.c,
            jumps,
        })
    }

    /// Draws one path on `[-M, T]`.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePath {
        let cfg = &self.config;
        let n_past = cfg.n_past();
        let n = n_past + cfg.n_future();
        let dt = cfg.dt;
        let sd = (self.cell_variance() * dt).sqrt();
        let mu = self.drift_rate * dt;
        let diffusive: Vec<f64> = if sd > 0.0 {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    mu + sd * z
                })
                .collect()
        } else {
            vec![mu; n]
        };
        let start = -cfg.past;
        let jumps = self.sample_jumps(start, cfg.horizon, rng);
        LatticePath { start, dt, n_past, diffusive, jumps, initial: 0.0 }
    }

    /// Like [`simulate`](Self::simulate), but for an exponential kernel the
    /// past cells are summed out: the lattice state at 0 is the discounted
    /// sum of i.i.d. Gaussian cells, drawn in closed form, plus the past
    /// jumps. Same law as the full lattice at a fraction of the cost.
    pub fn simulate_for<R: Rng + ?Sized>(&self, kernel: &Kernel, rng: &mut R) -> LatticePath {
        let Kernel::Exponential { kappa, scale } = *kernel else {
            return self.simulate(rng);
        };
        let cfg = &self.config;
        let (np, nf, dt) = (cfg.n_past(), cfg.n_future(), cfg.dt);
        let var = self.cell_variance();
        let sd = (var * dt).sqrt();
        let mu = self.drift_rate * dt;
        let q = (-kappa * dt).exp();
        let (g1, g2) = if kappa * dt > 0.0 {
            ((1.0 - q.powi(np as i32)) / (1.0 - q), (1.0 - q.powi(2 * np as i32)) / (1.0 - q * q))
        } else {
            (np as f64, np as f64)
        };
        let z: f64 = StandardNormal.sample(rng);
        let mut initial = scale * (mu * g1 + sd * g2.sqrt() * z);
        for j in self.sample_jumps(-cfg.past, 0.0, rng) {
            initial += scale * (kappa * j.time).exp() * j.size;
        }
        let diffusive: Vec<f64> = if sd > 0.0 {
            (0..nf)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    mu + sd * z
                })
                .collect()
        } else {
            vec![mu; nf]
        };
        let jumps = self.sample_jumps(0.0, cfg.horizon, rng);
        LatticePath { start: 0.0, dt, n_past: 0, diffusive, jumps, initial }
    }

    fn cell_variance(&self) -> f64 {
        self.gaussian_variance
            + match self.config.small_jump_mode {
                SmallJumpMode::GaussianApprox => self.small_jump_variance,
                SmallJumpMode::DriftOnly => 0.0,
            }
    }

    /// Marked Poisson jumps on `(lo, hi]`, sorted by time.
    pub fn sample_jumps<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Vec<Jump> {
        sample_compound_poisson(&self.jumps, lo, hi, rng)
    }
}

pub fn sample_compound_poisson<R: Rng + ?Sized>(s: &JumpSampler, lo: f64, hi: f64, rng: &mut R) -> Vec<Jump> {
    if s.is_empty() || hi <= lo {
        return Vec::new();
    }
    let count = poisson(s.rate * (hi - lo), rng);
    let mut times: Vec<f64> = (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            // (lo, hi]
            hi - u * (hi - lo)
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times.into_iter().map(|time| Jump { time, size: s.sample(rng) }).collect()
}

pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    let v: f64 = d.sample(rng);
    v as usize
}

pub fn simulate_levy<R: Rng + ?Sized>(triplet: &LevyTriplet, config: &SimConfig, rng: &mut R) -> Result<LatticePath> {
    Ok(LevySimulator::new(triplet, config)?.simulate(rng))
}

/// Standard symmetric stable variate with `E e^{iuS} = e^{-|u|^alpha}`
/// (Chambers-Mallows-Stuck).
pub fn sample_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = std::f64::consts::PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// `sigma` with `E e^{iu L_1} = e^{-sigma^alpha |u|^alpha}` for the Lévy
/// measure `eta |x|^{-alpha-1} dx`.
pub fn stable_scale(alpha: f64, eta: f64) -> f64 {
    let c = if (alpha - 1.0).abs() < 1e-12 {
        std::f64::consts::FRAC_PI_2
    } else {
        statrs::function::gamma::gamma(1.0 - alpha) * (std::f64::consts::FRAC_PI_2 * alpha).cos() / alpha
    };
    (2.0 * eta * c).powf(1.0 / alpha)
}

/// Exact symmetric stable increments over `n` cells of width `dt`; no
/// explicit jump list.
pub fn simulate_stable_increments<R: Rng + ?Sized>(alpha: f64, eta: f64, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let s = stable_scale(alpha, eta) * dt.powf(1.0 / alpha);
    (0..n).map(|_| s * sample_symmetric_stable(alpha, rng)).collect()
}

/// `X`, `Y` and `L - L_0` on the grid of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingAveragePath {
    pub dt: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    /// Jumps in `(0, T]`.
    pub jumps: Vec<Jump>,
    /// `Y_{T_n-}` for each entry of `jumps`.
    pub y_pre: Vec<f64>,
}

impl MovingAveragePath {
    pub fn x0(&self) -> f64 {
        self.x[0]
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round() as usize).min(self.x.len() - 1)
    }

    /// `max_k |X_k - X_0 - phi(0) L_k - sum_{j<k} Y_j dt|`, optionally
    /// skipping grid points whose preceding cell holds a jump.
    pub fn decomposition_residual(&self, phi0: f64, skip_jump_cells: bool) -> f64 {
        let mut integral = 0.0;
        let mut worst: f64 = 0.0;
        let mut jump_cells = vec![false; self.x.len()];
        for j in &self.jumps {
            let k = (j.time / self.dt).ceil() as usize;
            if k < jump_cells.len() {
                jump_cells[k] = true;
            }
        }
        for k in 1..self.x.len() {
            integral += self.y[k - 1] * self.dt;
            if skip_jump_cells && jump_cells[k] {
                continue;
            }
            let r = self.x[k] - self.x[0] - phi0 * self.l[k] - integral;
            worst = worst.max(r.abs());
        }
        worst
    }
}

/// Moving average on the grid of `[0, T]`.
///
/// The increment of cell `(t_i, t_{i+1}]` enters `X_{t_k}` with weight
/// `phi(t_k - t_{i+1})`, so `X_{t_{k+1}} - X_{t_k} - phi(0) Delta L_k` only
/// depends on cells before `k`. Jumps get their exact weight
/// `phi(t_k - T_n)`.
pub fn moving_average(kernel: &Kernel, path: &LatticePath) -> Result<MovingAveragePath> {
    match kernel {
        Kernel::Exponential { kappa, scale } => Ok(exponential_ma(*kappa, *scale, path)),
        _ => direct_ma(kernel, path),
    }
}

fn future_l(path: &LatticePath) -> Vec<f64> {
    let inc = path.increments();
    let mut l = Vec::with_capacity(inc.len() - path.n_past + 1);
    let mut acc = 0.0;
    l.push(0.0);
    for d in &inc[path.n_past..] {
        acc += d;
        l.push(acc);
    }
    l
}

/// Direct double sums; the reference implementation.
pub fn direct_ma(kernel: &Kernel, path: &LatticePath) -> Result<MovingAveragePath> {
    if path.initial != 0.0 {
        return Err(Error::UnsupportedModel("a summed-out past needs the exponential kernel".into()));
    }
    let n = path.n_cells();
    let np = path.n_past;
    let dt = path.dt;
    let mut phi_tab = Vec::with_capacity(n + 1);
    let mut dphi_tab = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let lag = m as f64 * dt;
        phi_tab.push(kernel.phi(lag)?);
        dphi_tab.push(kernel.phi_prime(lag).unwrap_or(f64::NAN));
    }
    let has_density = kernel.has_density();
    let cells: Vec<usize> = path.jumps.iter().map(|j| path.cell_of(j.time)).collect();
    let mut x = Vec::with_capacity(n - np + 1);
    let mut y = Vec::with_capacity(n - np + 1);
    for k in np..=n {
        let tk = path.time(k);
        let mut xs = 0.0;
        let mut ys = 0.0;
        for i in 0..k {
            xs += phi_tab[k - i - 1] * path.diffusive[i];
            if has_density {
                ys += dphi_tab[k - i - 1] * path.diffusive[i];
            }
        }
        for (j, &c) in path.jumps.iter().zip(&cells) {
            if c >= k {
                break;
            }
            let lag = (tk - j.time).max(0.0);
            xs += kernel.phi(lag)? * j.size;
            if has_density {
                ys += kernel.phi_prime(lag)? * j.size;
            }
        }
        x.push(xs);
        y.push(if has_density { ys } else { f64::NAN });
    }
    let jumps = extract_jump_measure(path, 0.0, path.horizon());
    let mut y_pre = Vec::with_capacity(jumps.len());
    if has_density {
        for jn in &jumps {
            y_pre.push(y_before(kernel, path, jn.time)?);
        }
    }
    Ok(MovingAveragePath { dt, x, y, l: future_l(path), jumps, y_pre })
}

/// `Y_{t-}` from completed cells and jumps strictly before `t`.
pub fn y_before(kernel: &Kernel, path: &LatticePath, t: f64) -> Result<f64> {
    if path.initial != 0.0 {
        return Err(Error::UnsupportedModel("a summed-out past needs the exponential kernel".into()));
    }
    let j = path.cell_of(t);
    let mut ys = 0.0;
    for i in 0..j {
        ys += kernel.phi_prime(t - path.time(i + 1))? * path.diffusive[i];
    }
    for jm in &path.jumps {
        if jm.time >= t {
            break;
        }
        ys += kernel.phi_prime(t - jm.time)? * jm.size;
    }
    Ok(ys)
}

fn exponential_ma(kappa: f64, scale: f64, path: &LatticePath) -> MovingAveragePath {
    let n = path.n_cells();
    let np = path.n_past;
    let dt = path.dt;
    let decay = (-kappa * dt).exp();
    let mut s = path.initial;
    let mut next_jump = 0;
    let mut x = Vec::with_capacity(n - np + 1);
    let mut jumps = Vec::new();
    let mut y_pre = Vec::new();
    let js = &path.jumps;
    for k in 0..=n {
        if k >= np {
            x.push(s);
        }
        if k == n {
            break;
        }
        // advance from t_k to t_{k+1}
        let tk = path.time(k);
        let t1 = path.time(k + 1);
        let mut inner = s;
        let mut t_inner = tk;
        while next_jump < js.len() && path.cell_of(js[next_jump].time) == k {
            let jn = js[next_jump];
            let state = inner * (-kappa * (jn.time - t_inner)).exp();
            if k >= np {
                jumps.push(jn);
                // X_{T-} from completed cells and earlier jumps; Y = -kappa X
                y_pre.push(-kappa * state);
            }
            inner = state + scale * jn.size;
            t_inner = jn.time;
            next_jump += 1;
        }
        let jump_part = inner * (-kappa * (t1 - t_inner)).exp() - s * (-kappa * (t1 - tk)).exp();
        s = decay * s + scale * path.diffusive[k] + jump_part;
    }
    let y = x.iter().map(|v| -kappa * v).collect();
    MovingAveragePath { dt, x, y, l: future_l(path), jumps, y_pre }
}

/// Bound on the effect of truncating the past at `-M`: the standard
/// deviation scale of the omitted part plus its mean.
pub fn truncation_bias_bound(kernel: &Kernel, triplet: &LevyTriplet, past: f64) -> Option<f64> {
    let l2 = kernel.tail_l2(past)?;
    let l1 = kernel.tail_l1(past)?;
    let m2 = triplet.c + triplet.measure.second_moment(&Region::everywhere()).ok()?;
    let xi = triplet.drift_xi().ok()?;
    let b = (l2 * m2).sqrt() + xi.abs() * l1;
    Some(if b.is_nan() { f64::INFINITY } else { b })
}

/// Columnar export: `path_id,time,L,X,Y`.
pub fn write_paths_csv<W: Write>(w: W, paths: &[(u64, &MovingAveragePath)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["path_id", "time", "L", "X", "Y"])?;
    for (id, p) in paths {
        for k in 0..p.x.len() {
            out.write_record(&[
                id.to_string(),
                p.time(k).to_string(),
                p.l[k].to_string(),
                p.x[k].to_string(),
                p.y[k].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Jump-list export: `path_id,T_n,Z_n`.
pub fn write_jumps_csv<W: Write>(w: W, paths: &[(u64, &[Jump])]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["path_id", "T_n", "Z_n"])?;
    for (id, js) in paths {
        for j in js.iter() {
            out.write_record(&[id.to_string(), j.time.to_string(), j.size.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a jump-list CSV back.
pub fn read_jumps_csv<R: std::io::Read>(r: R) -> Result<Vec<(u64, Jump)>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Io(format!("bad jump record {rec:?}")))
        };
        out.push((parse(0)? as u64, Jump { time: parse(1)?, size: parse(2)? }));
    }
    Ok(out)
}

/// Second moment of the explicit-jump-free part per unit time, used for the
/// small-jump refinement budget.
pub fn small_jump_budget(measure: &LevyMeasure, eps: f64, horizon: f64, n_paths: usize) -> Result<f64> {
    let v = measure.second_moment(&Region::within_open(eps))?;
    Ok(3.0 * (v * horizon).sqrt() / (n_paths as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevyMeasure, TruncationFunction};
    use crate::par::path_rng;

    fn cfg(past: f64, dt: f64) -> SimConfig {
        SimConfig {
            horizon: 1.0,
            past,
            dt,
            eps_jump: 0.1,
            n_paths: 1,
            seed: 1,
            small_jump_mode: SmallJumpMode::GaussianApprox,
        }
    }

    fn jump_only(jumps: Vec<Jump>, past: f64, dt: f64) -> LatticePath {
        let c = cfg(past, dt);
        let n = c.n_past() + c.n_future();
        LatticePath { start: -past, dt, n_past: c.n_past(), diffusive: vec![0.0; n], jumps, initial: 0.0 }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2.0, 0.01).validate().is_ok());
        assert!(cfg(2.0, 0.3).validate().is_err());
        let mut c = cfg(1.0, 0.1);
        c.eps_jump = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_jump_exponential_response() {
        let p = jump_only(vec![Jump { time: 0.25, size: 1.7 }], 0.0, 0.1);
        let k = Kernel::exponential(1.0).unwrap();
        let ma = moving_average(&k, &p).unwrap();
        for i in 0..ma.x.len() {
            let t = ma.time(i);
            let want = if t >= 0.25 { 1.7 * (-(t - 0.25f64)).exp() } else { 0.0 };
            assert!((ma.x[i] - want).abs() < 1e-12, "t={t}: {} vs {want}", ma.x[i]);
        }
    }

    #[test]
    fn exponential_fast_path_matches_direct_sum() {
        let trip = LevyTriplet::new(
            0.7,
            LevyMeasure::discrete(&[(-1.0, 2.0), (0.5, 3.0)]).unwrap(),
            0.2,
            TruncationFunction::inside(1.0).unwrap(),
            true,
        )
        .unwrap();
        let c = cfg(3.0, 0.01);
        let p = simulate_levy(&trip, &c, &mut path_rng(5, 0)).unwrap();
        let k = Kernel::exponential_scaled(0.8, 1.3).unwrap();
        let fast = moving_average(&k, &p).unwrap();
        let slow = direct_ma(&k, &p).unwrap();
        for (a, b) in fast.x.iter().zip(&slow.x) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for (a, b) in fast.y.iter().zip(&slow.y) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(fast.jumps, slow.jumps);
        for (a, b) in fast.y_pre.iter().zip(&slow.y_pre) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_kernel_telescopes() {
        let trip = LevyTriplet::new(1.0, LevyMeasure::Zero, 0.0, TruncationFunction::inside(1.0).unwrap(), true).unwrap();
        let p = simulate_levy(&trip, &cfg(1.0, 0.01), &mut path_rng(2, 0)).unwrap();
        let ma = moving_average(&Kernel::Constant { value: 1.0 }, &p).unwrap();
        for k in 0..ma.x.len() {
            assert!((ma.x[k] - ma.x[0] - ma.l[k]).abs() < 1e-12);
        }
        assert_eq!(ma.decomposition_residual(1.0, false), ma.decomposition_residual(1.0, false));
        assert!(ma.decomposition_residual(1.0, false) < 1e-12);
    }

    #[test]
    fn injected_jumps_are_extracted_verbatim() {
        let js = vec![Jump { time: 0.3, size: 1.0 }, Jump { time: 0.7, size: -2.0 }];
        let p = jump_only(js.clone(), 0.5, 0.1);
        assert_eq!(extract_jump_measure(&p, 0.0, 1.0), js);
        let bm = jump_only(vec![], 0.5, 0.1);
        assert!(extract_jump_measure(&bm, 0.0, 1.0).is_empty());
    }

    #[test]
    fn jumps_land_in_exactly_one_cell() {
        let js = vec![Jump { time: 0.3, size: 1.0 }, Jump { time: 0.35, size: -2.0 }];
        let p = jump_only(js, 0.0, 0.1);
        let inc = p.increments();
        assert_eq!(inc.iter().sum::<f64>(), -1.0);
        assert_eq!(inc[2], 1.0);
        assert_eq!(inc[3], -2.0);
    }

    #[test]
    fn compound_poisson_drift_gives_zero_mean() {
        // F = 2 delta_1 with h = inside(2): the atom is compensated, xi = b^h = 0
        let trip = LevyTriplet::new(
            0.0,
            LevyMeasure::discrete(&[(1.0, 2.0)]).unwrap(),
            0.0,
            TruncationFunction::inside(2.0).unwrap(),
            true,
        )
        .unwrap();
        assert_eq!(trip.drift_xi().unwrap(), 0.0);
        let sim = LevySimulator::new(&trip, &cfg(0.0, 0.01)).unwrap();
        let p = sim.simulate(&mut path_rng(3, 0));
        let l_t: f64 = p.increments().iter().sum();
        assert!((l_t - (p.jumps.len() as f64 - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn summed_out_past_has_the_lattice_law() {
        let trip = LevyTriplet::new(
            0.5,
            LevyMeasure::discrete(&[(-1.0, 0.5), (2.0, 1.0)]).unwrap(),
            0.3,
            TruncationFunction::inside(1.5).unwrap(),
            true,
        )
        .unwrap();
        let kernel = Kernel::Exponential { kappa: 0.5, scale: 2.0 };
        let sim = LevySimulator::new(&trip, &cfg(20.0, 0.05)).unwrap();
        let n = 20_000;
        let stats = |collapse: bool| {
            let xs: Vec<f64> = (0..n as u64)
                .map(|i| {
                    let mut rng = path_rng(if collapse { 1 } else { 2 }, i);
                    let p = if collapse { sim.simulate_for(&kernel, &mut rng) } else { sim.simulate(&mut rng) };
                    moving_average(&kernel, &p).unwrap().x[0]
                })
                .collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            (m, v)
        };
        let (m1, v1) = stats(true);
        let (m2, v2) = stats(false);
        let se = ((v1 + v2) / n as f64).sqrt();
        assert!((m1 - m2).abs() < 4.0 * se, "{m1} vs {m2}");
        assert!((v1 / v2 - 1.0).abs() < 0.06, "{v1} vs {v2}");
    }

    #[test]
    fn stable_scale_matches_characteristic_function() {
        // E cos(u L_1) = exp(-(sigma u)^alpha), check at u = 1 by quadrature of
        // the Levy-Khintchine exponent
        let alpha = 1.5;
        let f = LevyMeasure::symmetric_stable(alpha, 1.0).unwrap();
        let psi = f
            .integrate(|x| 1.0 - x.cos(), true, &Region::everywhere())
            .unwrap();
        let s = stable_scale(alpha, 1.0);
        assert!((s.powf(alpha) - psi).abs() < 1e-6, "{} vs {psi}", s.powf(alpha));
    }

    #[test]
    fn csv_round_trip() {
        let js = vec![Jump { time: 0.3, size: 1.0 }, Jump { time: 0.7, size: -2.0 }];
        let mut buf = Vec::new();
        write_jumps_csv(&mut buf, &[(4, &js[..])]).unwrap();
        let back = read_jumps_csv(&buf[..]).unwrap();
        assert_eq!(back, vec![(4, js[0]), (4, js[1])]);
    }
}
