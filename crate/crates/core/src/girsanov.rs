//! Density processes of the measure change and direct simulation under Q.

use std::cell::Cell;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::emm::{GirsanovKernelH1, GirsanovKernelH2, ZetaWeights};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::levy::{JumpSampler, LevyMeasure, LevyTriplet, Region};
use crate::par::{try_map_paths, PathRng};
use crate::sim::{moving_average, poisson, y_before, Jump, LatticePath, LevySimulator, MovingAveragePath, SimConfig};
use crate::verify::{doubling_report, doubling_study, finite_expect, DoublingConfig, StatReport, Verdict};

/// A path of a semimartingale `M` on a grid, with its jumps listed
/// separately and the quadratic variation of its continuous part.
#[derive(Debug, Clone, PartialEq)]
pub struct SemimartingalePath {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    /// `<M^c>` on the grid; empty for purely discontinuous `M`.
    pub qv: Vec<f64>,
    pub jumps: Vec<Jump>,
}

/// Doléans-Dade exponential
/// `E(M)_t = exp(M_t - M_0 - <M^c>_t / 2) prod_{s <= t} (1 + dM_s) exp(-dM_s)`.
///
/// Once a jump of `-1` occurs the product stays at 0; jumps below `-1` make
/// it negative.
pub fn stoch_exp(path: &SemimartingalePath) -> Vec<f64> {
    let m0 = path.m.first().copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(path.times.len());
    let mut prod = 1.0;
    let mut next = 0;
    for (k, &t) in path.times.iter().enumerate() {
        while next < path.jumps.len() && path.jumps[next].time <= t {
            let d = path.jumps[next].size;
            prod *= (1.0 + d) * (-d).exp();
            next += 1;
        }
        let qv = path.qv.get(k).copied().unwrap_or(0.0);
        out.push((path.m[k] - m0 - 0.5 * qv).exp() * prod);
    }
    out
}

/// `alpha(y, .)` frozen at one state.
pub struct AlphaSlice<'a> {
    f: Box<dyn Fn(f64) -> f64 + 'a>,
    /// Points where the slice may jump.
    pub breakpoints: Vec<f64>,
}

impl AlphaSlice<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// A Girsanov function `alpha(t, x) = alpha(Y_{t-}, x)` with its
/// compensator rate `int (alpha - 1) dF`.
pub trait GirsanovFunction: Send + Sync {
    fn slice(&self, y: f64) -> Result<AlphaSlice<'_>>;

    fn compensator_rate(&self, y: f64) -> Result<f64>;

    /// Where `alpha` may differ from 1.
    fn region(&self) -> Region;

    fn alpha(&self, y: f64, x: f64) -> Result<f64> {
        Ok(self.slice(y)?.eval(x))
    }
}

impl<G: GirsanovFunction + ?Sized> GirsanovFunction for Box<G> {
    fn slice(&self, y: f64) -> Result<AlphaSlice<'_>> {
        (**self).slice(y)
    }

    fn compensator_rate(&self, y: f64) -> Result<f64> {
        (**self).compensator_rate(y)
    }

    fn region(&self) -> Region {
        (**self).region()
    }
}

impl<G: GirsanovFunction + ?Sized> GirsanovFunction for &G {
    fn slice(&self, y: f64) -> Result<AlphaSlice<'_>> {
        (**self).slice(y)
    }

    fn compensator_rate(&self, y: f64) -> Result<f64> {
        (**self).compensator_rate(y)
    }

    fn region(&self) -> Region {
        (**self).region()
    }
}

/// `alpha = 1`: no measure change.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl GirsanovFunction for Identity {
    fn slice(&self, _y: f64) -> Result<AlphaSlice<'_>> {
        Ok(AlphaSlice { f: Box::new(|_| 1.0), breakpoints: vec![] })
    }

    fn compensator_rate(&self, _y: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn region(&self) -> Region {
        Region(vec![])
    }
}

impl GirsanovFunction for GirsanovKernelH1 {
    fn slice(&self, y: f64) -> Result<AlphaSlice<'_>> {
        let (neg, pos) = self.split(y);
        Ok(AlphaSlice {
            f: Box::new(move |x| self.alpha_split(neg, pos, x)),
            breakpoints: vec![],
        })
    }

    fn compensator_rate(&self, y: f64) -> Result<f64> {
        Ok(GirsanovKernelH1::compensator_rate(self, y))
    }

    fn region(&self) -> Region {
        Region::band(self.a, self.b)
    }
}

impl GirsanovFunction for GirsanovKernelH2 {
    fn slice(&self, y: f64) -> Result<AlphaSlice<'_>> {
        let w: ZetaWeights = self.weights(y)?;
        let a = self.a;
        Ok(AlphaSlice {
            f: Box::new(move |x| if x.abs() <= a { 1.0 } else { w.eval(x) }),
            breakpoints: vec![w.zeta],
        })
    }

    /// `f_zeta` is a probability density for the normalized tail, so the
    /// compensator vanishes.
    fn compensator_rate(&self, y: f64) -> Result<f64> {
        self.weights(y)?;
        Ok(0.0)
    }

    fn region(&self) -> Region {
        Region::outside(self.a)
    }
}

/// Multiplies `alpha` by `factor` wherever the inner function reweights,
/// but keeps the inner compensator. A deliberately broken kernel for
/// negative controls.
pub struct Perturbed<G> {
    pub inner: G,
    pub factor: f64,
}

impl<G: GirsanovFunction> GirsanovFunction for Perturbed<G> {
    fn slice(&self, y: f64) -> Result<AlphaSlice<'_>> {
        let inner = self.inner.slice(y)?;
        let region = self.inner.region();
        let factor = self.factor;
        let breakpoints = inner.breakpoints.clone();
        Ok(AlphaSlice {
            f: Box::new(move |x| if region.contains(x) { factor * inner.eval(x) } else { inner.eval(x) }),
            breakpoints,
        })
    }

    fn compensator_rate(&self, y: f64) -> Result<f64> {
        self.inner.compensator_rate(y)
    }

    fn region(&self) -> Region {
        self.inner.region()
    }
}

/// `Z` on the grid of `[0, T]` with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProcess {
    pub z: Vec<f64>,
    /// `alpha(T_n, Z_n)` for every jump in `(0, T]`.
    pub jump_factors: Vec<f64>,
    /// `int_0^t int (alpha - 1) dF ds` on the grid.
    pub compensator_drift: Vec<f64>,
}

impl DensityProcess {
    pub fn terminal(&self) -> f64 {
        *self.z.last().expect("nonempty grid")
    }

    /// `log Z` rebuilt from the factors and the compensator.
    pub fn log_terminal(&self) -> f64 {
        self.jump_factors.iter().map(|a| a.ln()).sum::<f64>() - self.compensator_drift.last().copied().unwrap_or(0.0)
    }

    /// The raw `(alpha - 1) * (mu - nu)` path, for `stoch_exp`.
    pub fn martingale_path(&self, ma: &MovingAveragePath) -> SemimartingalePath {
        let times: Vec<f64> = (0..self.z.len()).map(|k| ma.time(k)).collect();
        let jumps: Vec<Jump> = ma
            .jumps
            .iter()
            .zip(&self.jump_factors)
            .map(|(j, a)| Jump { time: j.time, size: a - 1.0 })
            .collect();
        let mut m = Vec::with_capacity(times.len());
        let mut next = 0;
        let mut sum = 0.0;
        for (k, &t) in times.iter().enumerate() {
            while next < jumps.len() && jumps[next].time <= t {
                sum += jumps[next].size;
                next += 1;
            }
            m.push(sum - self.compensator_drift[k]);
        }
        SemimartingalePath { times, m, qv: vec![], jumps }
    }
}

/// `Z = E((alpha - 1) * (mu - nu))` along one path.
///
/// The compensator integrates `int (alpha(Y_t, x) - 1) F(dx)` with the
/// left-point rule on the grid; jump factors use the exact pre-jump state.
pub fn density_process<G: GirsanovFunction + ?Sized>(alpha: &G, ma: &MovingAveragePath) -> Result<DensityProcess> {
    let n = ma.x.len();
    let mut compensator = Vec::with_capacity(n);
    let mut acc = 0.0;
    compensator.push(0.0);
    for k in 1..n {
        acc += alpha.compensator_rate(ma.y[k - 1])? * ma.dt;
        compensator.push(acc);
    }
    let mut factors = Vec::with_capacity(ma.jumps.len());
    for (j, &y) in ma.jumps.iter().zip(&ma.y_pre) {
        let v = alpha.alpha(y, j.size)?;
        if !(v > 0.0) {
            return Err(Error::NonPositiveAlpha { time: j.time, size: j.size, value: v });
        }
        factors.push(v);
    }
    let mut z = Vec::with_capacity(n);
    let mut prod = 1.0;
    let mut next = 0;
    for (k, c) in compensator.iter().enumerate() {
        let t = ma.time(k);
        while next < factors.len() && ma.jumps[next].time <= t + 1e-12 * ma.dt {
            prod *= factors[next];
            next += 1;
        }
        z.push(prod * (-c).exp());
    }
    Ok(DensityProcess { z, jump_factors: factors, compensator_drift: compensator })
}

/// The Q-triplet at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QCharacteristics {
    pub c: f64,
    /// `b^h + y + int (alpha - 1) h dF`.
    pub drift: f64,
    /// `drift + int (x - h) alpha dF`, the total Q-drift of `X`; zero for a
    /// valid kernel.
    pub q_drift_x: f64,
    /// `int (alpha - 1) dF`.
    pub mass_change: f64,
}

pub fn q_characteristics<G: GirsanovFunction + ?Sized>(alpha: &G, triplet: &LevyTriplet, y: f64) -> Result<QCharacteristics> {
    let slice = alpha.slice(y)?;
    let mut cuts = slice.breakpoints.clone();
    cuts.extend(triplet.h.breakpoints());
    let region = alpha.region().split_at(&cuts);
    let f = &triplet.measure;
    let h = &triplet.h;
    let dh = f.integrate(|x| (slice.eval(x) - 1.0) * h.eval(x), false, &region)?;
    let dxh = f.integrate(|x| (slice.eval(x) - 1.0) * (x - h.eval(x)), false, &region)?;
    let mass_change = f.integrate(|x| slice.eval(x) - 1.0, false, &region)?;
    let drift = triplet.b_h + y + dh;
    let xi = triplet.drift_xi()?;
    Ok(QCharacteristics {
        c: triplet.c,
        drift,
        q_drift_x: drift + (xi - triplet.b_h) + dxh,
        mass_change,
    })
}

/// `f(x) = (1 + x) log(1 + x) - x`.
pub fn f_lm(x: f64) -> Result<f64> {
    if !(x > -1.0) {
        return Err(Error::DomainError(x));
    }
    Ok((1.0 + x) * x.ln_1p() - x)
}

/// State of a path at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub l: f64,
}

impl PathState {
    pub fn at(ma: &MovingAveragePath, k: usize) -> Self {
        PathState { t: ma.time(k), x: ma.x[k], y: ma.y[k], l: ma.l[k] }
    }
}

pub type WFn = Arc<dyn Fn(&PathState, f64) -> f64 + Send + Sync>;
pub type StateFn = Arc<dyn Fn(&PathState) -> f64 + Send + Sync>;
pub type MarkFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `int f(W(s, x)) F(dx)` at one state.
fn lm_rate(w: &WFn, f: &LevyMeasure, s: &PathState) -> Result<f64> {
    let bad = Cell::new(None);
    let v = f.integrate(
        |x| {
            let wx = w(s, x);
            f_lm(wx).unwrap_or_else(|_| {
                bad.set(Some(wx));
                0.0
            })
        },
        true,
        &Region::everywhere(),
    )?;
    if let Some(wx) = bad.get() {
        return Err(Error::DomainError(wx));
    }
    if !v.is_finite() {
        return Err(Error::NonIntegrable(format!("int f(W) dF at t = {}", s.t)));
    }
    Ok(v)
}

/// `A~_t - A~_s = int_s^t int f(W(u, x)) F(dx) du`, left-point rule on the
/// path grid.
pub fn lm_compensator(w: &WFn, f: &LevyMeasure, ma: &MovingAveragePath, window: (f64, f64)) -> Result<f64> {
    let k0 = ma.index_of(window.0);
    let k1 = ma.index_of(window.1);
    let mut total = 0.0;
    for k in k0..k1 {
        total += lm_rate(w, f, &PathState::at(ma, k))? * ma.dt;
    }
    Ok(total)
}

/// A dominated Lépingle-Mémin setup: `W(t, x) <= |P_t| g(x)`.
#[derive(Clone)]
pub struct LmSetup {
    pub label: String,
    pub w: WFn,
    pub p: StateFn,
    pub g: MarkFn,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeFit {
    pub gamma1: f64,
    pub gamma2: f64,
    pub n_grid: usize,
}

/// Fits `h(y) = int f(y g) dF <= gamma1 y log(1 + y) + gamma2` on a log grid
/// of `y` in `[1e-3, 1e6]`: `gamma1` is the largest ratio for `y >= 1` and
/// `gamma2` the largest remaining excess.
pub fn fit_envelope(g: &MarkFn, f: &LevyMeasure) -> Result<EnvelopeFit> {
    let n = 91;
    let ys: Vec<f64> = (0..n).map(|i| 10f64.powf(-3.0 + 9.0 * i as f64 / (n - 1) as f64)).collect();
    let mut hs = Vec::with_capacity(n);
    for &y in &ys {
        let v = f.integrate(|x| f_lm(y * g(x)).unwrap_or(f64::INFINITY), true, &Region::everywhere())?;
        if !v.is_finite() {
            return Err(Error::NonIntegrable(format!("int f(y g) dF at y = {y}")));
        }
        hs.push(v);
    }
    let env = |y: f64| y * y.ln_1p();
    let gamma1 = ys
        .iter()
        .zip(&hs)
        .filter(|(y, _)| **y >= 1.0)
        .map(|(y, h)| h / env(*y))
        .fold(0.0, f64::max);
    let gamma2 = ys.iter().zip(&hs).map(|(y, h)| h - gamma1 * env(*y)).fold(0.0, f64::max);
    Ok(EnvelopeFit { gamma1, gamma2, n_grid: n })
}

#[derive(Debug, Clone, Serialize)]
pub struct LmReport {
    pub label: String,
    /// `int g (1 + log(1 + g)) dF`.
    pub condition_b: f64,
    pub dominance_checked: usize,
    pub envelope: EnvelopeFit,
    pub mesh: f64,
    pub partition: Vec<f64>,
    pub finite_expect: StatReport,
    pub cells: StatReport,
    pub verdict: Verdict,
}

/// Marks at which dominance is probed.
fn probe_marks(f: &LevyMeasure) -> Vec<f64> {
    if let LevyMeasure::Discrete(atoms) = f {
        return atoms.iter().map(|a| a.x).collect();
    }
    let s = f.support();
    let mut xs = Vec::new();
    for i in 0..=40 {
        let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 40.0);
        if r <= s.positive.limit() {
            xs.push(r);
        }
        if r <= s.negative.limit() {
            xs.push(-r);
        }
    }
    xs
}

/// Checks the dominated criterion: dominance on sampled paths, integrability
/// of `g (1 + log(1 + g))`, `sup_t E[exp(eps |P_t| log(1 + |P_t|))]` and the
/// exponential moments of the compensator over a partition with mesh at
/// most `eps / gamma1`.
pub fn lm_criterion_check<S>(
    setup: &LmSetup,
    f: &LevyMeasure,
    horizon: f64,
    cfg: &DoublingConfig,
    n_probe_times: usize,
    sample_path: S,
) -> Result<LmReport>
where
    S: Fn(&mut PathRng) -> Result<MovingAveragePath> + Sync + Send,
{
    let g = setup.g.clone();
    let condition_b = f.integrate(|x| g(x) * (1.0 + g(x).ln_1p()), true, &Region::everywhere())?;
    if !condition_b.is_finite() {
        return Err(Error::NonIntegrable("int g (1 + log(1 + g)) dF".into()));
    }

    // dominance on a batch of paths, every grid point
    let marks = probe_marks(f);
    let paths = try_map_paths(cfg.n0.min(200), cfg.seed ^ 0xd0_4a7e, |_, rng| sample_path(rng))?;
    let mut checked = 0;
    for ma in &paths {
        for k in 0..ma.x.len() {
            let s = PathState::at(ma, k);
            let bound = setup.p.as_ref()(&s).abs();
            for &x in &marks {
                let w = (setup.w)(&s, x);
                let b = bound * g(x);
                if w > b * (1.0 + 1e-12) + 1e-12 {
                    return Err(Error::DominanceViolated { time: s.t, x, w, bound: b });
                }
                checked += 1;
            }
        }
    }

    let envelope = fit_envelope(&g, f)?;
    let mesh = if envelope.gamma1 > 0.0 { setup.eps / envelope.gamma1 } else { horizon };
    let n_cells = ((horizon / mesh).ceil() as usize).max(1);
    let partition: Vec<f64> = (0..=n_cells).map(|i| horizon * i as f64 / n_cells as f64).collect();

    let sample = |rng: &mut PathRng| sample_path(rng);
    let probe_times: Vec<f64> = (0..=n_probe_times).map(|i| horizon * i as f64 / n_probe_times.max(1) as f64).collect();
    let p = setup.p.clone();
    let fe = finite_expect(cfg, setup.eps, |rng| match sample(rng) {
        Ok(ma) => probe_times.iter().map(|&t| p(&PathState::at(&ma, ma.index_of(t)))).collect(),
        Err(_) => vec![f64::NAN; probe_times.len()],
    });

    let cells = if fe.verdict == Verdict::Diverging {
        StatReport::skipped("partition_cells", "the moment condition already diverges")
    } else {
        let w = setup.w.clone();
        let levels = doubling_study(cfg, |rng| match sample(rng) {
            Ok(ma) => partition
                .windows(2)
                .map(|c| lm_compensator(&w, f, &ma, (c[0], c[1])).map_or(f64::INFINITY, f64::exp))
                .collect(),
            Err(_) => vec![f64::NAN; n_cells],
        });
        doubling_report("partition_cells", &levels, cfg)
    };

    let verdict = match (fe.verdict, cells.verdict) {
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        (Verdict::Diverging, _) | (_, Verdict::Diverging) => Verdict::Diverging,
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    Ok(LmReport {
        label: setup.label.clone(),
        condition_b,
        dominance_checked: checked,
        envelope,
        mesh,
        partition,
        finite_expect: fe,
        cells,
        verdict,
    })
}

/// Which law the under-Q sampler draws tail marks from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MarkLaw {
    /// `f_zeta F^a / lambda`, the Q-law.
    Tilted,
    /// `F^a / lambda`, the P-law (a negative control).
    Untilted,
}

/// One path simulated directly under Q.
#[derive(Debug, Clone, PartialEq)]
pub struct QPath {
    pub ma: MovingAveragePath,
    /// Tail arrivals `|x| > a` on `(0, T]`.
    pub arrivals: Vec<Jump>,
    /// `Y_{T_n-}` used to draw each arrival's mark.
    pub states: Vec<f64>,
}

/// Direct Q-simulation under (h2): small jumps, Gaussian part and drift as
/// under P; tail jumps arrive at Poisson rate `F^a(R)` with marks drawn from
/// `f_zeta(Y_{T-}) F^a / F^a(R)`.
pub struct QSimulator<'a> {
    pub kernel_h2: &'a GirsanovKernelH2,
    pub kernel: &'a Kernel,
    pub sim: LevySimulator,
    pub tail: JumpSampler,
    pub mark_law: MarkLaw,
    /// Multiplies the arrival rate; 1 except in negative controls.
    pub intensity_factor: f64,
    /// Sum out the past for an exponential kernel (same law, much cheaper).
    pub collapse_past: bool,
}

impl<'a> QSimulator<'a> {
    pub fn new(kernel_h2: &'a GirsanovKernelH2, triplet: &LevyTriplet, kernel: &'a Kernel, config: &SimConfig) -> Result<Self> {
        if config.eps_jump > kernel_h2.a {
            return Err(Error::InvalidConfig(format!(
                "eps_jump = {} must not exceed a = {} so tail jumps are explicit",
                config.eps_jump, kernel_h2.a
            )));
        }
        if !kernel.has_density() {
            return Err(Error::MissingDensity);
        }
        let tail = triplet.measure.restricted_sampler(kernel_h2.a, f64::INFINITY, false)?;
        Ok(QSimulator {
            kernel_h2,
            kernel,
            sim: LevySimulator::new(triplet, config)?,
            tail,
            mark_law: MarkLaw::Tilted,
            intensity_factor: 1.0,
            collapse_past: true,
        })
    }

    fn draw_mark<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> Result<f64> {
        if self.mark_law == MarkLaw::Untilted {
            return Ok(self.tail.sample(rng));
        }
        let w = self.kernel_h2.weights(y)?;
        let high = rng.random::<f64>() < w.lambda;
        // rejection from the tail law onto the chosen side of zeta
        loop {
            let x = self.tail.sample(rng);
            if (x >= w.zeta) == high {
                return Ok(x);
            }
        }
    }

    /// `Y_{t-}` of the base path from completed cells and explicit jumps.
    fn base_y_before(&self, lattice: &LatticePath, base: &MovingAveragePath, t: f64) -> Result<f64> {
        match self.kernel {
            Kernel::Exponential { kappa, scale } => {
                let j = lattice.cell_of(t);
                let tj = lattice.time(j);
                let mut x = base.x[j - lattice.n_past] * (-kappa * (t - tj)).exp();
                for jm in &lattice.jumps {
                    if jm.time <= tj {
                        continue;
                    }
                    if jm.time >= t {
                        break;
                    }
                    x += scale * (-kappa * (t - jm.time)).exp() * jm.size;
                }
                Ok(-kappa * x)
            }
            _ => y_before(self.kernel, lattice, t),
        }
    }

    pub fn simulate(&self, rng: &mut PathRng) -> Result<QPath> {
        let a = self.kernel_h2.a;
        let mut lattice = if self.collapse_past { self.sim.simulate_for(self.kernel, rng) } else { self.sim.simulate(rng) };
        let base_jumps: Vec<Jump> = lattice
            .jumps
            .iter()
            .copied()
            .filter(|j| !(j.time > 0.0 && j.size.abs() > a))
            .collect();
        lattice.set_jumps(base_jumps);
        let base = moving_average(self.kernel, &lattice)?;

        let horizon = lattice.horizon();
        let rate = self.kernel_h2.fa_mass * self.intensity_factor;
        let n = poisson(rate * horizon, rng);
        let mut times: Vec<f64> = (0..n).map(|_| horizon * (1.0 - rng.random::<f64>())).collect();
        times.sort_by(f64::total_cmp);

        let mut arrivals: Vec<Jump> = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for t in times {
            let mut y = self.base_y_before(&lattice, &base, t)?;
            for m in &arrivals {
                y += self.kernel.phi_prime(t - m.time)? * m.size;
            }
            let size = self.draw_mark(y, rng)?;
            arrivals.push(Jump { time: t, size });
            states.push(y);
        }
        let mut all = lattice.jumps.clone();
        all.extend_from_slice(&arrivals);
        lattice.set_jumps(all);
        let ma = moving_average(self.kernel, &lattice)?;
        Ok(QPath { ma, arrivals, states })
    }

    pub fn ensemble(&self, n_paths: usize, seed: u64) -> Result<Vec<QPath>> {
        try_map_paths(n_paths, seed, |_, rng| self.simulate(rng))
    }
}

/// Ensemble of paths simulated directly under Q.
pub fn simulate_under_q(kernel_h2: &GirsanovKernelH2, triplet: &LevyTriplet, kernel: &Kernel, config: &SimConfig) -> Result<Vec<QPath>> {
    QSimulator::new(kernel_h2, triplet, kernel, config)?.ensemble(config.n_paths, config.seed)
}

/// Classical Girsanov density for `F = 0`, `c > 0`: removes the drift
/// `D_k = (X_{k+1} - X_k - phi(0) dL_k) / dt` (predictable on the lattice)
/// plus `phi(0) xi` from each increment, so that under Q
/// `dX = phi(0) sqrt(c) dB^Q` exactly.
pub fn gaussian_density(ma: &MovingAveragePath, phi0: f64, c: f64, xi: f64) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(Error::InvalidConfig("gaussian density needs c > 0".into()));
    }
    if phi0 == 0.0 {
        return Err(Error::InvalidConfig("gaussian density needs phi(0) != 0".into()));
    }
    let dt = ma.dt;
    let sc = c.sqrt();
    let mut z = Vec::with_capacity(ma.x.len());
    let mut log_z = 0.0;
    z.push(1.0);
    for k in 0..ma.x.len() - 1 {
        let dl = ma.l[k + 1] - ma.l[k];
        let drift = (ma.x[k + 1] - ma.x[k] - phi0 * dl) / dt;
        let theta = -(drift / phi0 + xi) / sc;
        let db = (dl - xi * dt) / sc;
        log_z += theta * db - 0.5 * theta * theta * dt;
        z.push(log_z.exp());
    }
    Ok(z)
}

/// Columnar export: `path_id,time,Z`.
pub fn write_density_csv<W: Write>(w: W, dt: f64, paths: &[(u64, &[f64])]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["path_id", "time", "Z"])?;
    for (id, z) in paths {
        for (k, v) in z.iter().enumerate() {
            out.write_record(&[id.to_string(), (k as f64 * dt).to_string(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
