//! TOML scenario files.
//!
//! Parameters that change the science (`a`, `b`, `eps`, `eps_jump`) have no
//! defaults: a scenario that omits them fails to load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::emm::{GirsanovKernelH1, GirsanovKernelH2};
use crate::error::{Error, Result};
use crate::girsanov::{GirsanovFunction, Identity, Perturbed};
use crate::kernel::{Kernel, TailRegime};
use crate::levy::{band_masses, tail_mass, LevyMeasure, LevyTriplet, TruncationFunction};
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Zero,
    Discrete { atoms: Vec<(f64, f64)> },
    SymmetricStable { alpha: f64, scale: f64 },
    TemperedStable { eta: f64, lambda: f64, alpha: f64 },
    UniformBand { inner: f64, outer: f64, density: f64 },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<LevyMeasure> {
        match self {
            MeasureSpec::Zero => Ok(LevyMeasure::Zero),
            MeasureSpec::Discrete { atoms } => LevyMeasure::discrete(atoms),
            MeasureSpec::SymmetricStable { alpha, scale } => LevyMeasure::symmetric_stable(*alpha, *scale),
            MeasureSpec::TemperedStable { eta, lambda, alpha } => LevyMeasure::tempered_stable(*eta, *lambda, *alpha),
            MeasureSpec::UniformBand { inner, outer, density } => LevyMeasure::uniform_band(*inner, *outer, *density),
        }
    }

    /// Tail regime implied by the model family.
    pub fn implied_tail_regime(&self) -> TailRegime {
        match self {
            MeasureSpec::SymmetricStable { alpha, .. } => TailRegime::RegularlyVarying { beta: -alpha },
            _ => TailRegime::SecondMomentFinite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TruncationSpec {
    Inside { a: f64 },
    OutsideBand { a: f64, b: f64 },
}

impl TruncationSpec {
    pub fn build(&self) -> Result<TruncationFunction> {
        match self {
            TruncationSpec::Inside { a } => TruncationFunction::inside(*a),
            TruncationSpec::OutsideBand { a, b } => TruncationFunction::outside_band(*a, *b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSpec {
    pub c: f64,
    pub b_h: f64,
    pub integrable: bool,
    pub truncation: TruncationSpec,
    pub measure: MeasureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_regime: Option<TailRegime>,
}

impl TripletSpec {
    pub fn build(&self) -> Result<LevyTriplet> {
        LevyTriplet::new(self.c, self.measure.build()?, self.b_h, self.truncation.build()?, self.integrable)
    }

    pub fn tail_regime(&self) -> TailRegime {
        self.tail_regime.unwrap_or_else(|| self.measure.implied_tail_regime())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Exponential { kappa: f64, scale: f64 },
    Gamma { gamma: f64 },
    PowerDensity { phi0: f64, p: f64 },
    TimesExponential { kappa: f64 },
    CompactPolynomial { length: f64, power: f64 },
    Constant { value: f64 },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        match *self {
            KernelSpec::Exponential { kappa, scale } => Kernel::exponential_scaled(kappa, scale),
            KernelSpec::Gamma { gamma } => Kernel::gamma(gamma),
            KernelSpec::PowerDensity { phi0, p } => Kernel::power_density(phi0, p),
            KernelSpec::TimesExponential { kappa } => {
                if !(kappa > 0.0) {
                    return Err(Error::InvalidConfig(format!("kappa must be positive, got {kappa}")));
                }
                Ok(Kernel::TimesExponential { kappa })
            }
            KernelSpec::CompactPolynomial { length, power } => Kernel::compact_polynomial(length, power),
            KernelSpec::Constant { value } => Ok(Kernel::Constant { value }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmmHypothesis {
    H1,
    H2,
    Gaussian,
    /// No measure change; for criteria that only need P-paths.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmmSpec {
    pub hypothesis: EmmHypothesis,
    /// Required under h1 and h2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Required under h1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Largest admissible violation of the kernel identities.
    pub tolerance: f64,
    /// State grid for kernel validation; taken from a pilot simulation when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    MeanDensity,
    QMartingale,
    JumpIntensity,
    CountLawComparison,
    ConditionalJumpLaw,
    BrownianInvariance,
    FiniteExpect,
    LmCriterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingSpec {
    pub eps: f64,
    pub n0: usize,
    pub doublings: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setup", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LmSpec {
    /// `alpha_t = (K1 + K2 (L_t + lambda t))^{1/gamma}` for a Poisson `L`.
    Bremaud { k1: f64, k2: f64, gamma: f64 },
    /// `W = |L_t x|`, dominated by `P = L_t`, `g = |x|`.
    LmRelax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub tests: Vec<TestKind>,
    pub probe_times: Vec<f64>,
    pub n_paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_expect: Option<DoublingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<LmSpec>,
}

/// Deliberate misconfigurations for negative controls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Controls {
    /// Multiplies `alpha` on reweighted jumps, keeping the compensator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_factor: Option<f64>,
    /// Multiplies the direct-Q arrival rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_factor: Option<f64>,
    /// Draws direct-Q marks from the P-law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub untilted_marks: Option<bool>,
    /// Multiplies the `phi(0)` used by the Gaussian-case tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub triplet: TripletSpec,
    pub kernel: KernelSpec,
    pub sim: SimConfig,
    pub emm: EmmSpec,
    pub verify: VerifySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<Controls>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// The Girsanov function a scenario asks for.
pub enum AlphaKind {
    Identity,
    H1(GirsanovKernelH1),
    H2(GirsanovKernelH2),
    /// Continuous Girsanov drift removal for `F = 0`.
    Gaussian { phi0: f64, c: f64, xi: f64 },
}

impl AlphaKind {
    /// The jump reweighting, with the control factor applied.
    pub fn jump_function(&self, alpha_factor: Option<f64>) -> Box<dyn GirsanovFunction + '_> {
        let base: Box<dyn GirsanovFunction + '_> = match self {
            AlphaKind::H1(k) => Box::new(k),
            AlphaKind::H2(k) => Box::new(k),
            AlphaKind::Identity | AlphaKind::Gaussian { .. } => Box::new(Identity),
        };
        match alpha_factor {
            Some(f) if f != 1.0 => Box::new(Perturbed { inner: base, factor: f }),
            _ => base,
        }
    }
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let scn: Scenario = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn controls(&self) -> Controls {
        self.controls.clone().unwrap_or_default()
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.sim.validate().map_err(|e| Error::Config(e.to_string()))?;
        let triplet = self.triplet.build().map_err(|e| Error::Config(e.to_string()))?;
        self.kernel.build().map_err(|e| Error::Config(e.to_string()))?;
        let e = &self.emm;
        match e.hypothesis {
            EmmHypothesis::H1 => {
                let (Some(a), Some(b)) = (e.a, e.b) else {
                    return cfg("hypothesis h1 needs both a and b".into());
                };
                if !(0.0 < a && a < b) {
                    return cfg(format!("h1 needs 0 < a < b, got a = {a}, b = {b}"));
                }
                if self.sim.eps_jump > a {
                    return cfg(format!("eps_jump = {} must not exceed a = {a}", self.sim.eps_jump));
                }
                let _ = band_masses(&triplet.measure, a, b).map_err(|e| Error::Config(e.to_string()))?;
            }
            EmmHypothesis::H2 => {
                let Some(a) = e.a else {
                    return cfg("hypothesis h2 needs a".into());
                };
                if e.b.is_some() {
                    return cfg("b is only meaningful under h1".into());
                }
                if !(a > 0.0) {
                    return cfg(format!("a must be positive, got {a}"));
                }
                if self.sim.eps_jump > a {
                    return cfg(format!("eps_jump = {} must not exceed a = {a}", self.sim.eps_jump));
                }
                let neg = triplet
                    .measure
                    .mass(&crate::levy::Region::interval(crate::levy::Interval::open(f64::NEG_INFINITY, -a)))
                    .map_err(|e| Error::Config(e.to_string()))?;
                let total = tail_mass(&triplet.measure, a).map_err(|e| Error::Config(e.to_string()))?;
                if !(neg > 0.0 && total - neg > 0.0) {
                    return cfg(format!("h2 needs tail mass on both sides of [-{a}, {a}]"));
                }
            }
            EmmHypothesis::None => {}
            EmmHypothesis::Gaussian => {
                if !matches!(self.triplet.measure, MeasureSpec::Zero) || !(self.triplet.c > 0.0) {
                    return cfg("the gaussian hypothesis needs F = 0 and c > 0".into());
                }
                if e.a.is_some() || e.b.is_some() {
                    return cfg("a and b are not used by the gaussian hypothesis".into());
                }
            }
        }
        if !(e.tolerance >= 0.0) {
            return cfg("tolerance must be >= 0".into());
        }
        let v = &self.verify;
        if v.n_paths == 0 {
            return cfg("verify.n_paths must be positive".into());
        }
        for &t in &v.probe_times {
            let k = t / self.sim.dt;
            if !(t > 0.0 && t <= self.sim.horizon + 1e-12) || (k - k.round()).abs() > 1e-9 {
                return cfg(format!("probe time {t} is not a grid point of (0, T]"));
            }
        }
        for t in &v.tests {
            let h = e.hypothesis;
            match t {
                TestKind::JumpIntensity | TestKind::CountLawComparison | TestKind::ConditionalJumpLaw
                    if h != EmmHypothesis::H2 =>
                {
                    return cfg(format!("{t:?} needs Poisson tail arrivals under Q (hypothesis h2)"));
                }
                TestKind::BrownianInvariance if h != EmmHypothesis::Gaussian => {
                    return cfg("brownian-invariance needs the gaussian hypothesis".into());
                }
                TestKind::FiniteExpect if v.finite_expect.is_none() => {
                    return cfg("finite-expect needs a [verify.finite_expect] table".into());
                }
                TestKind::LmCriterion if v.lm.is_none() || v.finite_expect.is_none() => {
                    return cfg("lm-criterion needs [verify.lm] and [verify.finite_expect]".into());
                }
                _ => {}
            }
        }
        if let Some(fe) = &v.finite_expect {
            if !(fe.eps > 0.0) || fe.n0 == 0 || fe.replicates < 4 || fe.doublings == 0 {
                return cfg("finite_expect needs eps > 0, n0 > 0, replicates >= 4, doublings >= 1".into());
            }
        }
        Ok(())
    }

    pub fn build_triplet(&self) -> Result<LevyTriplet> {
        self.triplet.build()
    }

    pub fn build_kernel(&self) -> Result<Kernel> {
        self.kernel.build()
    }

    pub fn build_alpha(&self, triplet: &LevyTriplet, kernel: &Kernel) -> Result<AlphaKind> {
        match self.emm.hypothesis {
            EmmHypothesis::H1 => Ok(AlphaKind::H1(GirsanovKernelH1::new(
                triplet,
                self.emm.a.expect("validated"),
                self.emm.b.expect("validated"),
            )?)),
            EmmHypothesis::H2 => Ok(AlphaKind::H2(GirsanovKernelH2::new(triplet, self.emm.a.expect("validated"))?)),
            EmmHypothesis::None => Ok(AlphaKind::Identity),
            EmmHypothesis::Gaussian => Ok(AlphaKind::Gaussian {
                phi0: kernel.phi0()?,
                c: triplet.c,
                xi: triplet.drift_xi()?,
            }),
        }
    }

    /// Overrides from the command line.
    pub fn apply_overrides(&mut self, seed: Option<u64>, n_paths: Option<usize>) {
        if let Some(s) = seed {
            self.sim.seed = s;
        }
        if let Some(n) = n_paths {
            self.sim.n_paths = n;
            self.verify.n_paths = n;
        }
    }

    /// Shrinks sample sizes for a quick run.
    pub fn smoke(&mut self) {
        self.sim.n_paths = self.sim.n_paths.min(200);
        self.verify.n_paths = self.verify.n_paths.min(5_000);
        if let Some(fe) = &mut self.verify.finite_expect {
            fe.n0 = fe.n0.min(50);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const H2_TWO_ATOM: &str = r#"
name = "h2-two-atom"

[triplet]
c = 0.0
b_h = 0.0
integrable = true
truncation = { kind = "inside", a = 0.5 }
measure = { kind = "discrete", atoms = [[-1.0, 1.0], [1.0, 1.0]] }

[kernel]
kind = "exponential"
kappa = 0.1
scale = 1.0

[sim]
horizon = 1.0
past = 300.0
dt = 0.01
eps_jump = 0.5
n_paths = 100
seed = 7
small_jump_mode = "drift-only"

[emm]
hypothesis = "h2"
a = 0.5
tolerance = 1e-12

[verify]
tests = ["mean-density", "q-martingale"]
probe_times = [0.25, 0.5, 1.0]
n_paths = 1000
"#;

    #[test]
    fn loads_and_round_trips() {
        let s = Scenario::from_toml_str(H2_TWO_ATOM).unwrap();
        assert_eq!(s.emm.a, Some(0.5));
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn missing_a_is_rejected() {
        let t = H2_TWO_ATOM.replace("a = 0.5\ntolerance", "tolerance");
        assert!(matches!(Scenario::from_toml_str(&t), Err(Error::Config(_))));
    }

    #[test]
    fn missing_eps_jump_is_rejected() {
        let t = H2_TWO_ATOM.replace("eps_jump = 0.5\n", "");
        assert!(matches!(Scenario::from_toml_str(&t), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let t = H2_TWO_ATOM.replace("tolerance = 1e-12", "tolerance = 1e-12\nfoo = 1");
        assert!(Scenario::from_toml_str(&t).is_err());
    }

    #[test]
    fn h2_needs_two_sided_tail() {
        let t = H2_TWO_ATOM.replace("[[-1.0, 1.0], [1.0, 1.0]]", "[[-0.2, 1.0], [1.0, 1.0]]");
        assert!(matches!(Scenario::from_toml_str(&t), Err(Error::Config(_))));
    }

    #[test]
    fn tests_must_match_hypothesis() {
        let t = H2_TWO_ATOM.replace("\"q-martingale\"]", "\"q-martingale\", \"brownian-invariance\"]");
        assert!(Scenario::from_toml_str(&t).is_err());
    }

    #[test]
    fn probe_times_on_grid() {
        let t = H2_TWO_ATOM.replace("[0.25, 0.5, 1.0]", "[0.255]");
        assert!(Scenario::from_toml_str(&t).is_err());
    }
}
