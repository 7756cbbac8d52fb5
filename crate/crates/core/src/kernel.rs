//! Moving-average kernels `phi` and the admissibility classification for
//! explicit EMMs.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::{LevyMeasure, LevyTriplet};
use crate::quad::{self, Tolerance};

/// Integration horizon for the `[0, T_int]` part of kernel integrals.
pub const T_INT: f64 = 50.0;
const WITNESS_POINTS: usize = 256;
const WITNESS_HORIZON: f64 = 10.0;
const WITNESS_TOL: f64 = 1e-6;

pub type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CustomKernel {
    pub label: String,
    pub phi: KernelFn,
    pub phi_prime: Option<KernelFn>,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("label", &self.label)
            .field("has_density", &self.phi_prime.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Kernel {
    /// `phi(t) = scale e^{-kappa t}`.
    Exponential { kappa: f64, scale: f64 },
    /// `phi(t) = (1 + t)^{-gamma}`.
    Gamma { gamma: f64 },
    /// `phi'(t) = (1 + t)^{-p}`, `phi(0) = phi0`.
    PowerDensity { phi0: f64, p: f64 },
    /// `phi(t) = t e^{-kappa t}`; `phi(0) = 0`.
    TimesExponential { kappa: f64 },
    /// `phi(t) = (1 - t / length)^power` on `[0, length]`, zero afterwards.
    CompactPolynomial { length: f64, power: f64 },
    /// `phi = value` on `[0, inf)`; a pseudo-kernel, `phi' = 0`.
    Constant { value: f64 },
    Custom(CustomKernel),
}

impl Kernel {
    pub fn exponential(kappa: f64) -> Result<Self> {
        Self::exponential_scaled(kappa, 1.0)
    }

    pub fn exponential_scaled(kappa: f64, scale: f64) -> Result<Self> {
        if !(kappa > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidConfig(format!("exponential kernel needs kappa > 0, got {kappa}")));
        }
        Ok(Kernel::Exponential { kappa, scale })
    }

    pub fn gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("gamma kernel needs gamma > 0, got {gamma}")));
        }
        Ok(Kernel::Gamma { gamma })
    }

    pub fn power_density(phi0: f64, p: f64) -> Result<Self> {
        if !(p > 0.0) || !phi0.is_finite() {
            return Err(Error::InvalidConfig(format!("power-density kernel needs p > 0, got {p}")));
        }
        Ok(Kernel::PowerDensity { phi0, p })
    }

    pub fn compact_polynomial(length: f64, power: f64) -> Result<Self> {
        if !(length > 0.0) || !(power >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "compact polynomial kernel needs length > 0 and power >= 1, got {length}, {power}"
            )));
        }
        Ok(Kernel::CompactPolynomial { length, power })
    }

    pub fn label(&self) -> String {
        match self {
            Kernel::Exponential { kappa, scale } => format!("exponential(kappa={kappa}, scale={scale})"),
            Kernel::Gamma { gamma } => format!("gamma({gamma})"),
            Kernel::PowerDensity { phi0, p } => format!("power-density(phi0={phi0}, p={p})"),
            Kernel::TimesExponential { kappa } => format!("t-exponential({kappa})"),
            Kernel::CompactPolynomial { length, power } => format!("compact-polynomial(L={length}, k={power})"),
            Kernel::Constant { value } => format!("constant({value})"),
            Kernel::Custom(c) => c.label.clone(),
        }
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::KernelDomain { lag: t });
        }
        let v = match self {
            Kernel::Exponential { kappa, scale } => scale * (-kappa * t).exp(),
            Kernel::Gamma { gamma } => (1.0 + t).powf(-gamma),
            Kernel::PowerDensity { phi0, p } => {
                if (*p - 1.0).abs() < 1e-12 {
                    phi0 + t.ln_1p()
                } else {
                    phi0 + ((1.0 + t).powf(1.0 - p) - 1.0) / (1.0 - p)
                }
            }
            Kernel::TimesExponential { kappa } => t * (-kappa * t).exp(),
            Kernel::CompactPolynomial { length, power } => {
                if t >= *length {
                    0.0
                } else {
                    (1.0 - t / length).powf(*power)
                }
            }
            Kernel::Constant { value } => *value,
            Kernel::Custom(c) => (c.phi)(t),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::KernelDomain { lag: t })
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, Kernel::Custom(CustomKernel { phi_prime: None, .. }))
    }

    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::KernelDomain { lag: t });
        }
        let v = match self {
            Kernel::Exponential { kappa, scale } => -kappa * scale * (-kappa * t).exp(),
            Kernel::Gamma { gamma } => -gamma * (1.0 + t).powf(-gamma - 1.0),
            Kernel::PowerDensity { p, .. } => (1.0 + t).powf(-p),
            Kernel::TimesExponential { kappa } => (1.0 - kappa * t) * (-kappa * t).exp(),
            Kernel::CompactPolynomial { length, power } => {
                if t >= *length {
                    0.0
                } else {
                    -(power / length) * (1.0 - t / length).powf(power - 1.0)
                }
            }
            Kernel::Constant { .. } => 0.0,
            Kernel::Custom(c) => match &c.phi_prime {
                Some(d) => d(t),
                None => return Err(Error::MissingDensity),
            },
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::KernelDomain { lag: t })
        }
    }

    pub fn phi0(&self) -> Result<f64> {
        self.phi(0.0)
    }

    /// Polynomial decay rate `q` with `|phi'(t)| ~ t^{-q}`; `None` when the
    /// derivative decays exponentially or vanishes beyond a finite lag.
    fn derivative_decay(&self) -> Option<Decay> {
        match self {
            Kernel::Exponential { .. } | Kernel::TimesExponential { .. } => Some(Decay::Fast),
            Kernel::CompactPolynomial { .. } | Kernel::Constant { .. } => Some(Decay::Fast),
            Kernel::Gamma { gamma } => Some(Decay::Power(gamma + 1.0)),
            Kernel::PowerDensity { p, .. } => Some(Decay::Power(*p)),
            Kernel::Custom(_) => None,
        }
    }

    /// Whether `phi'` is bounded on `[0, inf)`; custom kernels are probed
    /// on the witness grid.
    pub fn derivative_bounded(&self) -> bool {
        match self {
            Kernel::Custom(_) => witness_grid()
                .iter()
                .all(|&t| self.phi_prime(t).map(f64::is_finite).unwrap_or(false)),
            _ => true,
        }
    }

    /// `int_M^inf phi(s)^2 ds`, the variance scale of the part of `X`
    /// driven by `(-inf, -M]`. `None` for custom kernels.
    pub fn tail_l2(&self, m: f64) -> Option<f64> {
        match self {
            Kernel::Exponential { kappa, scale } => Some(scale * scale * (-2.0 * kappa * m).exp() / (2.0 * kappa)),
            Kernel::Gamma { gamma } => Some(if 2.0 * gamma > 1.0 {
                (1.0 + m).powf(1.0 - 2.0 * gamma) / (2.0 * gamma - 1.0)
            } else {
                f64::INFINITY
            }),
            Kernel::CompactPolynomial { length, power } => Some(if m >= *length {
                0.0
            } else {
                length * (1.0 - m / length).powf(2.0 * power + 1.0) / (2.0 * power + 1.0)
            }),
            Kernel::TimesExponential { kappa } => {
                // int_M^inf s^2 e^{-2 kappa s} ds
                let k = 2.0 * kappa;
                Some((-k * m).exp() * (m * m / k + 2.0 * m / (k * k) + 2.0 / (k * k * k)))
            }
            Kernel::Constant { value } => Some(if *value == 0.0 { 0.0 } else { f64::INFINITY }),
            Kernel::PowerDensity { .. } => Some(f64::INFINITY),
            Kernel::Custom(_) => None,
        }
    }

    /// `int_M^inf |phi(s)| ds`. `None` for custom kernels.
    pub fn tail_l1(&self, m: f64) -> Option<f64> {
        match self {
            Kernel::Exponential { kappa, scale } => Some(scale.abs() * (-kappa * m).exp() / kappa),
            Kernel::Gamma { gamma } => Some(if *gamma > 1.0 {
                (1.0 + m).powf(1.0 - gamma) / (gamma - 1.0)
            } else {
                f64::INFINITY
            }),
            Kernel::CompactPolynomial { length, power } => Some(if m >= *length {
                0.0
            } else {
                length * (1.0 - m / length).powf(power + 1.0) / (power + 1.0)
            }),
            Kernel::TimesExponential { kappa } => Some((-kappa * m).exp() * (m / kappa + 1.0 / (kappa * kappa))),
            Kernel::Constant { value } => Some(if *value == 0.0 { 0.0 } else { f64::INFINITY }),
            Kernel::PowerDensity { .. } => Some(f64::INFINITY),
            Kernel::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Decay {
    Fast,
    Power(f64),
}

/// Outcome of an infinite-horizon kernel integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finiteness {
    Finite,
    Infinite,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralVerdict {
    pub finiteness: Finiteness,
    /// Estimate of the integral; `+inf` when divergent.
    pub value: f64,
}

impl IntegralVerdict {
    pub fn finite(value: f64) -> Self {
        IntegralVerdict { finiteness: Finiteness::Finite, value }
    }

    pub fn infinite() -> Self {
        IntegralVerdict { finiteness: Finiteness::Infinite, value: f64::INFINITY }
    }

    pub fn is_finite(&self) -> bool {
        self.finiteness == Finiteness::Finite
    }
}

fn tol() -> Tolerance {
    Tolerance::new(1e-10, 1e-8)
}

/// Integrates `f` over `[0, inf)` for a kernel-derived integrand: exactly
/// on `[0, T_INT]` and with a tail decided by `decay`.
///
/// With `Decay::Power(s)` the integrand behaves like `t^{-s}` and the tail
/// is finite iff `s > 1`. Custom integrands get a doubling probe on
/// `[0, T]`, `[0, 2T]`, `[0, 4T]`.
fn half_line<F: Fn(f64) -> f64>(f: F, decay: Option<Decay>) -> Result<IntegralVerdict> {
    match decay {
        Some(Decay::Fast) => {
            let head = quad::integrate(&f, 0.0, T_INT, tol())?;
            let tail = quad::integrate(&f, T_INT, f64::INFINITY, tol()).unwrap_or(0.0);
            Ok(IntegralVerdict::finite(head + tail))
        }
        Some(Decay::Power(s)) => {
            if s <= 1.0 {
                return Ok(IntegralVerdict::infinite());
            }
            let head = quad::integrate(&f, 0.0, T_INT, tol())?;
            // substitute t = T_INT e^u to tame the algebraic decay
            let tail = quad::integrate(
                |u: f64| {
                    let t = T_INT * u.exp();
                    let v = f(t) * t;
                    if v.is_finite() {
                        v
                    } else {
                        0.0
                    }
                },
                0.0,
                f64::INFINITY,
                tol(),
            )?;
            Ok(IntegralVerdict::finite(head + tail))
        }
        None => {
            let i1 = quad::integrate(&f, 0.0, T_INT, tol())?;
            let d1 = quad::integrate(&f, T_INT, 2.0 * T_INT, tol())?;
            let d2 = quad::integrate(&f, 2.0 * T_INT, 4.0 * T_INT, tol())?;
            let i4 = i1 + d1 + d2;
            if d2.abs() <= 1e-10_f64.max(1e-8 * i4.abs()) {
                return Ok(IntegralVerdict::finite(i4));
            }
            let ratio = d2 / d1;
            if ratio > 0.0 && ratio < 0.9 {
                // geometric tail of doubling increments
                Ok(IntegralVerdict::finite(i4 + d2 * ratio / (1.0 - ratio)))
            } else {
                Ok(IntegralVerdict { finiteness: Finiteness::Indeterminate, value: i4 })
            }
        }
    }
}

/// `int_0^inf |phi'(t)|^p dt`.
pub fn lp_norm(kernel: &Kernel, p: f64) -> Result<IntegralVerdict> {
    if !(p > 0.0) {
        return Err(Error::InvalidConfig(format!("L^p exponent must be positive, got {p}")));
    }
    if !kernel.has_density() {
        return Err(Error::MissingDensity);
    }
    match kernel {
        Kernel::Exponential { kappa, scale } => Ok(IntegralVerdict::finite((scale.abs() * kappa).powf(p) / (p * kappa))),
        Kernel::Gamma { gamma } => {
            let s = p * (gamma + 1.0);
            Ok(if s > 1.0 {
                IntegralVerdict::finite(gamma.powf(p) / (s - 1.0))
            } else {
                IntegralVerdict::infinite()
            })
        }
        Kernel::PowerDensity { p: q, .. } => {
            let s = p * q;
            Ok(if s > 1.0 {
                IntegralVerdict::finite(1.0 / (s - 1.0))
            } else {
                IntegralVerdict::infinite()
            })
        }
        Kernel::CompactPolynomial { length, power } => {
            Ok(IntegralVerdict::finite((power / length).powf(p) * length / ((power - 1.0) * p + 1.0)))
        }
        Kernel::Constant { .. } => Ok(IntegralVerdict::finite(0.0)),
        _ => {
            let err = std::cell::Cell::new(None);
            let f = |t: f64| match kernel.phi_prime(t) {
                Ok(v) => v.abs().powf(p),
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            };
            let v = half_line(f, kernel.derivative_decay().map(|d| scale_decay(d, p)))?;
            match err.take() {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
    }
}

fn scale_decay(d: Decay, r: f64) -> Decay {
    match d {
        Decay::Fast => Decay::Fast,
        Decay::Power(q) => Decay::Power(q * r),
    }
}

/// Small-`u` growth exponent `r` with `G(u) ~ u^r`, measured at `u`.
fn profile_exponent(f: &LevyMeasure, u: f64) -> Result<f64> {
    let g1 = f.small_jump_profile(u)?;
    let g2 = f.small_jump_profile(u / 2.0)?;
    if g1 <= 0.0 || g2 <= 0.0 {
        return Ok(2.0);
    }
    Ok((g1 / g2).ln() / 2f64.ln())
}

/// `c int phi'^2 dt + int int |x phi'(t)| ^ (x phi'(t))^2 F(dx) dt`.
pub fn density_condition(kernel: &Kernel, triplet: &LevyTriplet) -> Result<IntegralVerdict> {
    if !kernel.has_density() {
        return Err(Error::MissingDensity);
    }
    let c = triplet.c;
    let f = &triplet.measure;
    let decay = match kernel.derivative_decay() {
        Some(Decay::Power(q)) => {
            let u = kernel.phi_prime(T_INT)?.abs().min(1e-3);
            let mut r: f64 = if matches!(f, LevyMeasure::Zero) { 2.0 } else { profile_exponent(f, u)? };
            if c > 0.0 {
                r = r.min(2.0);
            }
            // G(u) ~ u^r is bounded between 1 and 2 for Levy measures
            Some(Decay::Power(q * r.clamp(0.0, 2.0)))
        }
        other => other,
    };
    let err = std::cell::Cell::new(None);
    let integrand = |t: f64| {
        let d = match kernel.phi_prime(t) {
            Ok(d) => d,
            Err(e) => {
                err.set(Some(e));
                return 0.0;
            }
        };
        let jump = match f.small_jump_profile(d) {
            Ok(g) => g,
            Err(e) => {
                err.set(Some(e));
                return 0.0;
            }
        };
        c * d * d + jump
    };
    let v = half_line(integrand, decay)?;
    match err.take() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn witness_grid() -> Vec<f64> {
    (0..WITNESS_POINTS)
        .map(|i| WITNESS_HORIZON * i as f64 / (WITNESS_POINTS - 1) as f64)
        .collect()
}

/// Checks `phi(t) = phi(0) + int_0^t phi'` on the probe grid; returns the
/// largest deviation.
pub fn absolute_continuity_witness(kernel: &Kernel) -> Result<f64> {
    if !kernel.has_density() {
        return Err(Error::MissingDensity);
    }
    let grid = witness_grid();
    let phi0 = kernel.phi0()?;
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    let err = std::cell::Cell::new(None);
    let d = |t: f64| match kernel.phi_prime(t) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e));
            0.0
        }
    };
    for w in grid.windows(2) {
        acc += quad::integrate(&d, w[0], w[1], Tolerance::new(1e-12, 1e-10))?;
        worst = worst.max((kernel.phi(w[1])? - phi0 - acc).abs());
    }
    match err.take() {
        Some(e) => Err(e),
        None => Ok(worst),
    }
}

/// `{t : phi(t) != 0}` meets the probe grid.
pub fn non_null(kernel: &Kernel) -> bool {
    witness_grid().iter().any(|&t| kernel.phi(t).map(|v| v != 0.0).unwrap_or(false))
}

/// User-asserted tail behaviour of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TailRegime {
    SecondMomentFinite,
    /// `x -> F((-x, x)^c)` regularly varying with index `beta in [-2, -1)`.
    RegularlyVarying { beta: f64 },
    Other,
}

impl TailRegime {
    fn meets_hypothesis(&self) -> bool {
        match self {
            TailRegime::SecondMomentFinite => true,
            TailRegime::RegularlyVarying { beta } => (-2.0..-1.0).contains(beta),
            TailRegime::Other => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "verdict", content = "reason")]
pub enum EmmVerdict {
    Admissible,
    NotAdmissible(String),
    Indeterminate(String),
}

/// Decides whether the moving average admits an EMM.
pub fn emm_classify(kernel: &Kernel, triplet: &LevyTriplet, tail_regime: TailRegime) -> EmmVerdict {
    use EmmVerdict::*;
    let phi0 = match kernel.phi0() {
        Ok(v) => v,
        Err(e) => return Indeterminate(format!("phi(0) not evaluable: {e}")),
    };
    if phi0 == 0.0 {
        return NotAdmissible("phi0=0".into());
    }
    if !kernel.has_density() {
        return Indeterminate("no density phi' supplied; absolute continuity cannot be witnessed".into());
    }
    match absolute_continuity_witness(kernel) {
        Ok(dev) if dev <= WITNESS_TOL => {}
        Ok(dev) => return Indeterminate(format!("absolute-continuity witness failed (deviation {dev:e})")),
        Err(e) => return Indeterminate(format!("absolute-continuity witness not evaluable: {e}")),
    }
    let dc = match density_condition(kernel, triplet) {
        Ok(v) => v,
        Err(e) => return Indeterminate(format!("density condition not evaluable: {e}")),
    };
    let gaussian = matches!(triplet.measure, LevyMeasure::Zero);
    if gaussian {
        if triplet.c == 0.0 {
            return Indeterminate("degenerate driver: c = 0 and F = 0".into());
        }
        return match dc.finiteness {
            Finiteness::Finite => Admissible,
            Finiteness::Infinite => NotAdmissible("phi' not in L^2 (Brownian driver)".into()),
            Finiteness::Indeterminate => Indeterminate("L^2 norm of phi' did not converge".into()),
        };
    }
    if !triplet.unbounded_variation() {
        return Indeterminate("L has paths of locally bounded variation".into());
    }
    if !tail_regime.meets_hypothesis() {
        return Indeterminate("tail regime outside the classification's hypotheses".into());
    }
    let support = triplet.measure.support();
    if support.is_unbounded_both_sides() {
        match dc.finiteness {
            Finiteness::Finite => Admissible,
            Finiteness::Infinite => NotAdmissible("density condition diverges".into()),
            Finiteness::Indeterminate => Indeterminate("density condition tail did not converge".into()),
        }
    } else if support.is_bounded() && support.is_two_sided() {
        if dc.is_finite() && kernel.derivative_bounded() {
            Admissible
        } else if !kernel.derivative_bounded() {
            Indeterminate("compact support clause needs bounded phi'".into())
        } else {
            Indeterminate("compact support clause needs a finite density condition".into())
        }
    } else {
        Indeterminate("support of F is one-sided or unbounded on one side only".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevyMeasure, TruncationFunction};

    fn triplet(c: f64, f: LevyMeasure) -> LevyTriplet {
        LevyTriplet::new(c, f, 0.0, TruncationFunction::inside(1.0).unwrap(), true).unwrap()
    }

    #[test]
    fn density_condition_two_atoms_exponential() {
        let t = triplet(0.0, LevyMeasure::discrete(&[(1.0, 1.0), (-1.0, 1.0)]).unwrap());
        let v = density_condition(&Kernel::exponential(1.0).unwrap(), &t).unwrap();
        assert!(v.is_finite());
        assert!((v.value - 1.0).abs() < 1e-8, "{}", v.value);
    }

    #[test]
    fn density_condition_zero_derivative() {
        let t = triplet(1.0, LevyMeasure::Zero);
        let v = density_condition(&Kernel::Constant { value: 1.0 }, &t).unwrap();
        assert_eq!(v, IntegralVerdict::finite(0.0));
    }

    #[test]
    fn density_condition_brownian_slow_decay_diverges() {
        let t = triplet(1.0, LevyMeasure::Zero);
        let v = density_condition(&Kernel::power_density(1.0, 0.4).unwrap(), &t).unwrap();
        assert_eq!(v.finiteness, Finiteness::Infinite);
        assert!(v.value.is_infinite());
    }

    #[test]
    fn density_condition_missing_density() {
        let k = Kernel::Custom(CustomKernel {
            label: "no-density".into(),
            phi: Arc::new(|t| (-t).exp()),
            phi_prime: None,
        });
        let t = triplet(1.0, LevyMeasure::Zero);
        assert_eq!(density_condition(&k, &t), Err(Error::MissingDensity));
        assert_eq!(lp_norm(&k, 2.0), Err(Error::MissingDensity));
    }

    #[test]
    fn lp_norm_examples() {
        let v = lp_norm(&Kernel::exponential(1.0).unwrap(), 1.5).unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(lp_norm(&Kernel::Constant { value: 2.0 }, 1.5).unwrap().value, 0.0);
        let k = Kernel::power_density(1.0, 0.9).unwrap();
        assert!(lp_norm(&k, 1.5).unwrap().is_finite());
        assert_eq!(lp_norm(&k, 1.0).unwrap().finiteness, Finiteness::Infinite);
    }

    #[test]
    fn lp_norm_numeric_matches_closed_form() {
        // t e^{-t}: phi' = (1 - t) e^{-t}, int |phi'|^2 = 1/4 + 1/4 - ... computed against a fine sum
        let k = Kernel::TimesExponential { kappa: 1.0 };
        let v = lp_norm(&k, 2.0).unwrap();
        // int_0^inf (1-t)^2 e^{-2t} dt = 1/2 - 2/4 + 2/8 = 1/4
        assert!((v.value - 0.25).abs() < 1e-9, "{}", v.value);
        let custom = Kernel::Custom(CustomKernel {
            label: "exp".into(),
            phi: Arc::new(|t| (-t).exp()),
            phi_prime: Some(Arc::new(|t| -(-t).exp())),
        });
        let v = lp_norm(&custom, 1.5).unwrap();
        assert!(v.is_finite());
        assert!((v.value - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn custom_heavy_tail_is_indeterminate() {
        let custom = Kernel::Custom(CustomKernel {
            label: "slow".into(),
            phi: Arc::new(|t: f64| 1.0 + t.ln_1p()),
            phi_prime: Some(Arc::new(|t: f64| 1.0 / (1.0 + t))),
        });
        let v = lp_norm(&custom, 1.0).unwrap();
        assert_eq!(v.finiteness, Finiteness::Indeterminate);
    }

    #[test]
    fn classify_stable_exponential_admissible() {
        let t = triplet(0.0, LevyMeasure::symmetric_stable(1.5, 1.0).unwrap());
        let v = emm_classify(
            &Kernel::exponential(1.0).unwrap(),
            &t,
            TailRegime::RegularlyVarying { beta: -1.5 },
        );
        assert_eq!(v, EmmVerdict::Admissible);
    }

    #[test]
    fn classify_phi0_zero() {
        let t = triplet(0.0, LevyMeasure::symmetric_stable(1.5, 1.0).unwrap());
        let v = emm_classify(
            &Kernel::TimesExponential { kappa: 1.0 },
            &t,
            TailRegime::RegularlyVarying { beta: -1.5 },
        );
        assert_eq!(v, EmmVerdict::NotAdmissible("phi0=0".into()));
    }

    #[test]
    fn classify_compact_clause() {
        let t = triplet(0.5, LevyMeasure::uniform_band(0.0, 2.0, 1.0).unwrap());
        let v = emm_classify(&Kernel::exponential(1.0).unwrap(), &t, TailRegime::SecondMomentFinite);
        assert_eq!(v, EmmVerdict::Admissible);
    }

    #[test]
    fn classify_one_sided_is_indeterminate() {
        let t = triplet(0.5, LevyMeasure::discrete(&[(1.0, 1.0)]).unwrap());
        let v = emm_classify(&Kernel::exponential(1.0).unwrap(), &t, TailRegime::SecondMomentFinite);
        assert!(matches!(v, EmmVerdict::Indeterminate(_)));
    }

    #[test]
    fn classify_density_failure() {
        // alpha = 1.5 and phi' = (1+t)^{-0.6}: 0.9 <= 1, not in L^1.5
        let t = triplet(0.0, LevyMeasure::symmetric_stable(1.5, 1.0).unwrap());
        let k = Kernel::power_density(1.0, 0.6).unwrap();
        let dc = density_condition(&k, &t).unwrap();
        assert_eq!(dc.finiteness, Finiteness::Infinite);
        let v = emm_classify(&k, &t, TailRegime::RegularlyVarying { beta: -1.5 });
        assert_eq!(v, EmmVerdict::NotAdmissible("density condition diverges".into()));
    }

    #[test]
    fn classify_brownian() {
        let t = triplet(1.0, LevyMeasure::Zero);
        assert_eq!(
            emm_classify(&Kernel::exponential(1.0).unwrap(), &t, TailRegime::SecondMomentFinite),
            EmmVerdict::Admissible
        );
        assert!(matches!(
            emm_classify(&Kernel::power_density(1.0, 0.4).unwrap(), &t, TailRegime::SecondMomentFinite),
            EmmVerdict::NotAdmissible(_)
        ));
    }

    #[test]
    fn stable_density_condition_matches_lp_norm() {
        for alpha in [1.2, 1.5, 1.8] {
            let t = triplet(0.0, LevyMeasure::symmetric_stable(alpha, 1.0).unwrap());
            let kernels = [
                Kernel::exponential(1.0).unwrap(),
                Kernel::power_density(1.0, 0.5).unwrap(),
                Kernel::power_density(1.0, 0.9).unwrap(),
                Kernel::gamma(0.3).unwrap(),
                Kernel::gamma(0.1).unwrap(),
            ];
            for k in &kernels {
                let dc = density_condition(k, &t).unwrap();
                let lp = lp_norm(k, alpha).unwrap();
                assert_eq!(dc.is_finite(), lp.is_finite(), "alpha {alpha}, {}", k.label());
                if dc.is_finite() {
                    // G(u) = 2 (1/(2-a) + 1/(a-1)) u^a for scale 1
                    let kk = 2.0 * (1.0 / (2.0 - alpha) + 1.0 / (alpha - 1.0));
                    assert!((dc.value - kk * lp.value).abs() < 1e-6 * dc.value, "{} vs {}", dc.value, kk * lp.value);
                }
            }
        }
    }

    #[test]
    fn density_condition_sign_and_mirror_invariance() {
        let f = LevyMeasure::discrete(&[(0.5, 1.0), (-2.0, 0.3), (3.0, 0.2)]).unwrap();
        let mirror = LevyMeasure::discrete(&[(-0.5, 1.0), (2.0, 0.3), (-3.0, 0.2)]).unwrap();
        let k = Kernel::exponential_scaled(0.7, 1.0).unwrap();
        let neg = Kernel::exponential_scaled(0.7, -1.0).unwrap();
        let a = density_condition(&k, &triplet(0.2, f.clone())).unwrap().value;
        let b = density_condition(&neg, &triplet(0.2, f)).unwrap().value;
        let m = density_condition(&k, &triplet(0.2, mirror)).unwrap().value;
        assert_eq!(a, b);
        assert_eq!(a, m);
    }

    #[test]
    fn witness_detects_wrong_derivative() {
        let ok = absolute_continuity_witness(&Kernel::gamma(0.5).unwrap()).unwrap();
        assert!(ok < 1e-8);
        let bad = Kernel::Custom(CustomKernel {
            label: "bad".into(),
            phi: Arc::new(|t| (-t).exp()),
            phi_prime: Some(Arc::new(|t| -2.0 * (-2.0 * t).exp())),
        });
        assert!(absolute_continuity_witness(&bad).unwrap() > 1e-3);
        assert!(matches!(
            emm_classify(&bad, &triplet(1.0, LevyMeasure::Zero), TailRegime::SecondMomentFinite),
            EmmVerdict::Indeterminate(_)
        ));
    }

    #[test]
    fn tail_bounds_match_quadrature() {
        let ks = [
            Kernel::exponential(0.5).unwrap(),
            Kernel::gamma(1.7).unwrap(),
            Kernel::TimesExponential { kappa: 0.8 },
            Kernel::compact_polynomial(3.0, 2.0).unwrap(),
        ];
        for k in &ks {
            let m = 2.0;
            let l2 = quad::integrate(|s| k.phi(s).unwrap().powi(2), m, f64::INFINITY, tol()).unwrap();
            let l1 = quad::integrate(|s| k.phi(s).unwrap().abs(), m, f64::INFINITY, tol()).unwrap();
            assert!((k.tail_l2(m).unwrap() - l2).abs() < 1e-8, "{}", k.label());
            assert!((k.tail_l1(m).unwrap() - l1).abs() < 1e-8, "{}", k.label());
        }
    }
}
