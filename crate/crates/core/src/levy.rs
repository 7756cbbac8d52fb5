//! Lévy triplets `(c, F, b^h)`, Lévy measures and truncation functions.
//!
//! Discrete measures are integrated by exact atom sums. Density measures go
//! through adaptive quadrature; when the density is singular at the origin
//! like `C |x|^{-beta-1}` the innermost piece `(0, eps_q]` is replaced by the
//! analytic integral of that power law, which is exact for `g(x) = x^2`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Radius of the innermost piece handled by the power-law correction.
const EPS_QUAD: f64 = 1e-6;

/// A point mass `w * delta_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

impl Atom {
    pub fn new(x: f64, w: f64) -> Self {
        Atom { x, w }
    }
}

/// Extent of the support on one side of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extent {
    Empty,
    Bounded(f64),
    Unbounded,
}

impl Extent {
    /// Distance from 0 to the far end of the support on this side.
    pub fn limit(self) -> f64 {
        match self {
            Extent::Empty => 0.0,
            Extent::Bounded(k) => k,
            Extent::Unbounded => f64::INFINITY,
        }
    }
}

/// Shape of `supp F` on the negative and positive half lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportDescriptor {
    pub negative: Extent,
    pub positive: Extent,
}

impl SupportDescriptor {
    pub fn unbounded_both_sides() -> Self {
        SupportDescriptor {
            negative: Extent::Unbounded,
            positive: Extent::Unbounded,
        }
    }

    pub fn compact(k: f64) -> Self {
        SupportDescriptor {
            negative: Extent::Bounded(k),
            positive: Extent::Bounded(k),
        }
    }

    pub fn empty() -> Self {
        SupportDescriptor {
            negative: Extent::Empty,
            positive: Extent::Empty,
        }
    }

    pub fn is_unbounded_both_sides(&self) -> bool {
        self.negative == Extent::Unbounded && self.positive == Extent::Unbounded
    }

    /// Support meets both `(-inf, 0)` and `(0, inf)`.
    pub fn is_two_sided(&self) -> bool {
        self.negative != Extent::Empty && self.positive != Extent::Empty
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.negative, Extent::Unbounded) && !matches!(self.positive, Extent::Unbounded)
    }

    pub fn is_empty(&self) -> bool {
        self.negative == Extent::Empty && self.positive == Extent::Empty
    }

    /// Smallest `K` with `supp F` inside `[-K, K]`.
    pub fn bound(&self) -> f64 {
        self.negative.limit().max(self.positive.limit())
    }
}

/// One interval with open/closed endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

/// Finite union of intervals; the origin is never part of a region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region(pub Vec<Interval>);

impl Region {
    /// `R \ {0}`.
    pub fn everywhere() -> Self {
        Region(vec![
            Interval::open(f64::NEG_INFINITY, 0.0),
            Interval::open(0.0, f64::INFINITY),
        ])
    }

    /// `[-a, a]^c`, i.e. `|x| > a`.
    pub fn outside(a: f64) -> Self {
        Region(vec![
            Interval::open(f64::NEG_INFINITY, -a),
            Interval::open(a, f64::INFINITY),
        ])
    }

    /// `|x| >= a`.
    pub fn outside_inclusive(a: f64) -> Self {
        Region(vec![
            Interval { lo: f64::NEG_INFINITY, hi: -a, lo_closed: false, hi_closed: true },
            Interval { lo: a, hi: f64::INFINITY, lo_closed: true, hi_closed: false },
        ])
    }

    /// `0 < |x| <= a`.
    pub fn within(a: f64) -> Self {
        Region(vec![
            Interval { lo: -a, hi: 0.0, lo_closed: true, hi_closed: false },
            Interval { lo: 0.0, hi: a, lo_closed: false, hi_closed: true },
        ])
    }

    /// `0 < |x| < a`.
    pub fn within_open(a: f64) -> Self {
        Region(vec![Interval::open(-a, 0.0), Interval::open(0.0, a)])
    }

    /// `(-b, -a) u (a, b)`.
    pub fn band(a: f64, b: f64) -> Self {
        Region(vec![Interval::open(-b, -a), Interval::open(a, b)])
    }

    pub fn interval(iv: Interval) -> Self {
        Region(vec![iv])
    }

    pub fn contains(&self, x: f64) -> bool {
        x != 0.0 && self.0.iter().any(|iv| iv.contains(x))
    }

    /// The closure of the region contains the origin.
    pub fn touches_zero(&self) -> bool {
        self.0.iter().any(|iv| iv.lo <= 0.0 && iv.hi >= 0.0)
    }

    /// Splits every interval at the given points (used at discontinuities of
    /// the integrand so quadrature panels never straddle a jump).
    pub fn split_at(&self, points: &[f64]) -> Region {
        let mut out = Vec::new();
        for iv in &self.0 {
            let mut cuts: Vec<f64> = points
                .iter()
                .copied()
                .filter(|p| *p > iv.lo && *p < iv.hi)
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut lo = iv.lo;
            let mut lo_closed = iv.lo_closed;
            for c in cuts {
                out.push(Interval { lo, hi: c, lo_closed, hi_closed: false });
                lo = c;
                lo_closed = true;
            }
            out.push(Interval { lo, hi: iv.hi, lo_closed, hi_closed: iv.hi_closed });
        }
        Region(out)
    }
}

/// Power-law behaviour `coef_{neg,pos} |x|^{-beta-1}` of a density at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub coef_neg: f64,
    pub coef_pos: f64,
    pub beta: f64,
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied Lévy density.
#[derive(Clone)]
pub struct CustomDensity {
    pub label: String,
    pub pdf: DensityFn,
    pub singularity: Option<Singularity>,
    pub support: SupportDescriptor,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("label", &self.label)
            .field("singularity", &self.singularity)
            .field("support", &self.support)
            .finish()
    }
}

/// A Lévy measure `F` on `R \ {0}`.
#[derive(Debug, Clone)]
pub enum LevyMeasure {
    /// `F = 0`: pure Brownian motion with drift.
    Zero,
    Discrete(Vec<Atom>),
    /// `F(dx) = scale |x|^{-alpha-1} dx`.
    SymmetricStable { alpha: f64, scale: f64 },
    /// `F(dx) = eta |x|^{-alpha-1} e^{-lambda |x|} dx`.
    TemperedStable { eta: f64, lambda: f64, alpha: f64 },
    /// `F(dx) = density dx` on `inner <= |x| <= outer`.
    UniformBand { inner: f64, outer: f64, density: f64 },
    Density(CustomDensity),
}

impl LevyMeasure {
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        let atoms: Vec<Atom> = atoms.iter().map(|&(x, w)| Atom::new(x, w)).collect();
        for a in &atoms {
            if a.x == 0.0 || !a.x.is_finite() {
                return Err(Error::InvalidConfig(format!("atom location {} must be finite and nonzero", a.x)));
            }
            if !(a.w > 0.0) || !a.w.is_finite() {
                return Err(Error::InvalidConfig(format!("atom weight {} must be positive", a.w)));
            }
        }
        Ok(LevyMeasure::Discrete(atoms))
    }

    pub fn symmetric_stable(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) || !(scale > 0.0) {
            return Err(Error::InvalidConfig(format!("stable needs alpha in (0,2), scale > 0; got {alpha}, {scale}")));
        }
        Ok(LevyMeasure::SymmetricStable { alpha, scale })
    }

    pub fn tempered_stable(eta: f64, lambda: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) || !(eta > 0.0) || !(lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tempered stable needs eta, lambda > 0, alpha in (0,2); got {eta}, {lambda}, {alpha}"
            )));
        }
        Ok(LevyMeasure::TemperedStable { eta, lambda, alpha })
    }

    pub fn uniform_band(inner: f64, outer: f64, density: f64) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner && density > 0.0 && outer.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "uniform band needs 0 <= inner < outer < inf, density > 0; got {inner}, {outer}, {density}"
            )));
        }
        Ok(LevyMeasure::UniformBand { inner, outer, density })
    }

    /// Support shape derived from the representation.
    pub fn support(&self) -> SupportDescriptor {
        match self {
            LevyMeasure::Zero => SupportDescriptor::empty(),
            LevyMeasure::Discrete(atoms) => {
                let side = |pos: bool| {
                    atoms
                        .iter()
                        .filter(|a| (a.x > 0.0) == pos)
                        .map(|a| a.x.abs())
                        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
                        .map_or(Extent::Empty, Extent::Bounded)
                };
                SupportDescriptor { negative: side(false), positive: side(true) }
            }
            LevyMeasure::SymmetricStable { .. } | LevyMeasure::TemperedStable { .. } => {
                SupportDescriptor::unbounded_both_sides()
            }
            LevyMeasure::UniformBand { outer, .. } => SupportDescriptor::compact(*outer),
            LevyMeasure::Density(d) => d.support,
        }
    }

    /// Near-zero power law, if the density has infinite mass at the origin.
    pub fn singularity(&self) -> Option<Singularity> {
        match self {
            LevyMeasure::SymmetricStable { alpha, scale } => Some(Singularity {
                coef_neg: *scale,
                coef_pos: *scale,
                beta: *alpha,
            }),
            LevyMeasure::TemperedStable { eta, alpha, .. } => Some(Singularity {
                coef_neg: *eta,
                coef_pos: *eta,
                beta: *alpha,
            }),
            LevyMeasure::Density(d) => d.singularity,
            _ => None,
        }
    }

    /// Density value at `x`, for absolutely continuous measures.
    pub fn density(&self, x: f64) -> Option<f64> {
        let ax = x.abs();
        match self {
            LevyMeasure::Zero => Some(0.0),
            LevyMeasure::Discrete(_) => None,
            LevyMeasure::SymmetricStable { alpha, scale } => Some(scale * ax.powf(-alpha - 1.0)),
            LevyMeasure::TemperedStable { eta, lambda, alpha } => {
                Some(eta * ax.powf(-alpha - 1.0) * (-lambda * ax).exp())
            }
            LevyMeasure::UniformBand { inner, outer, density } => {
                Some(if ax >= *inner && ax <= *outer { *density } else { 0.0 })
            }
            LevyMeasure::Density(d) => Some((d.pdf)(x)),
        }
    }

    /// Smooth pieces of a density's support, each on one side of 0.
    fn pieces(&self) -> Vec<(f64, f64)> {
        match self {
            LevyMeasure::UniformBand { inner, outer, .. } => vec![(-outer, -inner), (*inner, *outer)],
            _ => {
                let s = self.support();
                let mut out = Vec::new();
                if s.negative != Extent::Empty {
                    out.push((-s.negative.limit(), 0.0));
                }
                if s.positive != Extent::Empty {
                    out.push((0.0, s.positive.limit()));
                }
                out
            }
        }
    }

    /// `int_region g dF`. `quadratic_at_zero` declares `g(x) = O(x^2)` at 0,
    /// which is required when the region reaches the origin and `F` has
    /// infinite mass there.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, quadratic_at_zero: bool, region: &Region) -> Result<f64> {
        self.integrate_tol(g, quadratic_at_zero, region, Tolerance::default())
    }

    pub fn integrate_tol<G: Fn(f64) -> f64>(
        &self,
        g: G,
        quadratic_at_zero: bool,
        region: &Region,
        tol: Tolerance,
    ) -> Result<f64> {
        match self {
            LevyMeasure::Zero => Ok(0.0),
            LevyMeasure::Discrete(atoms) => Ok(atoms
                .iter()
                .filter(|a| region.contains(a.x))
                .map(|a| a.w * g(a.x))
                .sum()),
            _ => {
                let sing = self.singularity();
                if sing.is_some() && region.touches_zero() && !quadratic_at_zero {
                    return Err(Error::InvalidRegion(
                        "region reaches 0 where F has infinite mass; integrand must be O(x^2)".into(),
                    ));
                }
                let mut total = 0.0;
                for iv in &region.0 {
                    for (plo, phi) in self.pieces() {
                        let lo = iv.lo.max(plo);
                        let hi = iv.hi.min(phi);
                        if !(lo < hi) {
                            continue;
                        }
                        total += self.integrate_piece(&g, lo, hi, sing, tol)?;
                    }
                }
                Ok(total)
            }
        }
    }

    fn integrate_piece<G: Fn(f64) -> f64>(
        &self,
        g: &G,
        lo: f64,
        hi: f64,
        sing: Option<Singularity>,
        tol: Tolerance,
    ) -> Result<f64> {
        let integrand = |x: f64| {
            let d = self.density(x).unwrap_or(0.0);
            if d == 0.0 {
                0.0
            } else {
                g(x) * d
            }
        };
        match sing {
            Some(s) if hi == 0.0 || lo == 0.0 => {
                let positive = lo == 0.0;
                let eps = EPS_QUAD.min(if positive { hi } else { -lo });
                let (coef, edge) = if positive { (s.coef_pos, eps) } else { (s.coef_neg, -eps) };
                // int_0^eps g(x) c x^{-beta-1} dx with g(x) ~ g(eps) (x/eps)^2
                let inner = if s.beta < 2.0 {
                    g(edge) / (eps * eps) * coef * eps.powf(2.0 - s.beta) / (2.0 - s.beta)
                } else {
                    return Err(Error::NonIntegrable(format!("singularity exponent {} >= 2", s.beta)));
                };
                let outer = if positive {
                    quad::integrate(integrand, eps, hi, tol)?
                } else {
                    quad::integrate(integrand, lo, -eps, tol)?
                };
                Ok(inner + outer)
            }
            _ => quad::integrate(integrand, lo, hi, tol),
        }
    }

    /// `int_region |x|^k dF`, in closed form where the model allows.
    pub fn abs_moment(&self, k: f64, region: &Region) -> Result<f64> {
        match self {
            LevyMeasure::SymmetricStable { alpha, scale } => {
                let mut total = 0.0;
                for iv in &region.0 {
                    for (plo, phi) in [(f64::NEG_INFINITY, 0.0), (0.0, f64::INFINITY)] {
                        let lo = iv.lo.max(plo);
                        let hi = iv.hi.min(phi);
                        if !(lo < hi) {
                            continue;
                        }
                        let (u, v) = if lo >= 0.0 { (lo, hi) } else { (-hi, -lo) };
                        total += stable_power_integral(*scale, *alpha, k, u, v)?;
                    }
                }
                Ok(total)
            }
            LevyMeasure::UniformBand { inner, outer, density } => {
                let mut total = 0.0;
                for iv in &region.0 {
                    for (plo, phi) in [(-outer, -inner), (*inner, *outer)] {
                        let lo = iv.lo.max(plo);
                        let hi = iv.hi.min(phi);
                        if !(lo < hi) {
                            continue;
                        }
                        let (u, v) = if lo >= 0.0 { (lo, hi) } else { (-hi, -lo) };
                        total += density * (v.powf(k + 1.0) - u.powf(k + 1.0)) / (k + 1.0);
                    }
                }
                Ok(total)
            }
            _ => self.integrate(|x| x.abs().powf(k), k >= 2.0, region),
        }
    }

    /// `F(region)`.
    pub fn mass(&self, region: &Region) -> Result<f64> {
        match self {
            LevyMeasure::Discrete(atoms) => Ok(atoms.iter().filter(|a| region.contains(a.x)).map(|a| a.w).sum()),
            _ => self.abs_moment(0.0, region),
        }
    }

    /// `int_region x dF` (signed).
    pub fn first_moment(&self, region: &Region) -> Result<f64> {
        match self {
            LevyMeasure::SymmetricStable { .. } | LevyMeasure::UniformBand { .. } => {
                let mut total = 0.0;
                for iv in &region.0 {
                    let neg = Region::interval(Interval { hi: iv.hi.min(0.0), ..*iv });
                    let pos = Region::interval(Interval { lo: iv.lo.max(0.0), ..*iv });
                    if iv.hi > 0.0 {
                        total += self.abs_moment(1.0, &pos)?;
                    }
                    if iv.lo < 0.0 {
                        total -= self.abs_moment(1.0, &neg)?;
                    }
                }
                Ok(total)
            }
            _ => self.integrate(|x| x, false, region),
        }
    }

    /// `int_region x^2 dF`.
    pub fn second_moment(&self, region: &Region) -> Result<f64> {
        self.abs_moment(2.0, region)
    }

    /// `G(u) = int (|xu| ^ (xu)^2) F(dx)`, the jump part of the kernel
    /// admissibility integrand evaluated at `u = |phi'(t)|`.
    pub fn small_jump_profile(&self, u: f64) -> Result<f64> {
        let u = u.abs();
        if u == 0.0 {
            return Ok(0.0);
        }
        let r = 1.0 / u;
        let inner = self.second_moment(&Region::within(r))?;
        let outer = self.abs_moment(1.0, &Region::outside(r))?;
        Ok(u * u * inner + u * outer)
    }

    /// Cross-checks a user-asserted support shape with mass probes at
    /// `+-K`, `+-2K`.
    pub fn check_support(&self, declared: &SupportDescriptor) -> Result<()> {
        let probe = |lo: f64, hi: f64| -> Result<f64> {
            match self.mass(&Region::interval(Interval::open(lo, hi))) {
                Err(Error::NonIntegrable(_)) => Ok(f64::INFINITY),
                other => other,
            }
        };
        for (side, ext) in [(-1.0, declared.negative), (1.0, declared.positive)] {
            let (lo_far, hi_far) = |k: f64| -> (f64, f64) {
                if side > 0.0 {
                    (k, f64::INFINITY)
                } else {
                    (f64::NEG_INFINITY, -k)
                }
            }(0.0);
            let whole = probe(lo_far, hi_far)?;
            match ext {
                Extent::Empty => {
                    if whole > 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "support declared empty on side {side} but carries mass {whole}"
                        )));
                    }
                }
                Extent::Bounded(k) => {
                    let (l1, h1) = if side > 0.0 { (k, 2.0 * k) } else { (-2.0 * k, -k) };
                    let (l2, h2) = if side > 0.0 { (k, f64::INFINITY) } else { (f64::NEG_INFINITY, -k) };
                    let near = probe(l1, h1)?;
                    let far = probe(l2, h2)?;
                    if near > 0.0 || far > 0.0 || whole == 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "support declared within {k} on side {side}: probe masses near {near}, beyond {far}, total {whole}"
                        )));
                    }
                }
                Extent::Unbounded => {
                    for k in [1.0, 10.0, 100.0] {
                        let (l, h) = if side > 0.0 { (k, f64::INFINITY) } else { (f64::NEG_INFINITY, -k) };
                        let (l2, h2) = if side > 0.0 { (2.0 * k, f64::INFINITY) } else { (f64::NEG_INFINITY, -2.0 * k) };
                        if !(probe(l, h)? > 0.0 && probe(l2, h2)? > 0.0) {
                            return Err(Error::InvalidConfig(format!(
                                "support declared unbounded on side {side} but carries no mass beyond {k}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `int (x^2 ^ 1) dF < inf`.
    pub fn check_integrability(&self) -> Result<f64> {
        let near = self.second_moment(&Region::within(1.0))?;
        let far = self.mass(&Region::outside(1.0))?;
        let v = near + far;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonIntegrable("int (x^2 ^ 1) dF".into()))
        }
    }

    /// Sampler for the jumps with `|x| >= eps` (an explicit compound Poisson
    /// stream with rate `F(|x| >= eps)`).
    pub fn jump_sampler(&self, eps: f64) -> Result<JumpSampler> {
        self.restricted_sampler(eps, f64::INFINITY, true)
    }

    /// Sampler for jumps with `lo <= |x| < hi` (or `lo < |x| < hi` when
    /// `lo_closed` is false).
    pub fn restricted_sampler(&self, lo: f64, hi: f64, lo_closed: bool) -> Result<JumpSampler> {
        let region = Region(vec![
            Interval { lo: -hi, hi: -lo, lo_closed: false, hi_closed: lo_closed },
            Interval { lo, hi, lo_closed, hi_closed: false },
        ]);
        let rate = self.mass(&region)?;
        let kind = if rate == 0.0 {
            SamplerKind::Empty
        } else {
            match self {
                LevyMeasure::Zero => SamplerKind::Empty,
                LevyMeasure::Discrete(atoms) => {
                    let mut xs = Vec::new();
                    let mut cum = Vec::new();
                    let mut acc = 0.0;
                    for a in atoms.iter().filter(|a| region.contains(a.x)) {
                        acc += a.w;
                        xs.push(a.x);
                        cum.push(acc);
                    }
                    SamplerKind::Categorical { xs, cum }
                }
                LevyMeasure::SymmetricStable { alpha, .. } => SamplerKind::Pareto { lo, hi, alpha: *alpha, temper: 0.0 },
                LevyMeasure::TemperedStable { alpha, lambda, .. } => SamplerKind::Pareto {
                    lo,
                    hi,
                    alpha: *alpha,
                    temper: *lambda,
                },
                LevyMeasure::UniformBand { inner, outer, .. } => SamplerKind::Uniform {
                    lo: lo.max(*inner),
                    hi: hi.min(*outer),
                },
                LevyMeasure::Density(d) => {
                    return Err(Error::UnsupportedModel(format!("no jump sampler for custom density '{}'", d.label)))
                }
            }
        };
        Ok(JumpSampler { rate, kind })
    }
}

fn stable_power_integral(scale: f64, alpha: f64, k: f64, u: f64, v: f64) -> Result<f64> {
    // scale * int_u^v x^{k - alpha - 1} dx on 0 <= u < v <= inf
    let p = k - alpha;
    if p == 0.0 {
        if u == 0.0 || v.is_infinite() {
            return Err(Error::NonIntegrable(format!("int x^{k} dF with alpha = {alpha}")));
        }
        return Ok(scale * (v / u).ln());
    }
    if (u == 0.0 && p < 0.0) || (v.is_infinite() && p > 0.0) {
        return Err(Error::NonIntegrable(format!("int |x|^{k} dF diverges for alpha = {alpha}")));
    }
    let vp = if v.is_infinite() { 0.0 } else { v.powf(p) };
    let up = if u == 0.0 { 0.0 } else { u.powf(p) };
    Ok(scale * (vp - up) / p)
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Empty,
    Categorical { xs: Vec<f64>, cum: Vec<f64> },
    /// Symmetric `|x|^{-alpha-1} e^{-temper |x|}` on `lo <= |x| < hi`.
    Pareto { lo: f64, hi: f64, alpha: f64, temper: f64 },
    /// Symmetric uniform on `lo <= |x| <= hi`.
    Uniform { lo: f64, hi: f64 },
}

/// Compound Poisson jump stream: arrival rate and mark law.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    pub rate: f64,
    kind: SamplerKind,
}

impl JumpSampler {
    pub fn is_empty(&self) -> bool {
        matches!(self.kind, SamplerKind::Empty) || self.rate == 0.0
    }

    /// Draws one mark from the normalized restricted measure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Empty => 0.0,
            SamplerKind::Categorical { xs, cum } => {
                let total = *cum.last().expect("nonempty");
                let u = rng.random::<f64>() * total;
                let i = cum.partition_point(|&c| c <= u).min(xs.len() - 1);
                xs[i]
            }
            SamplerKind::Pareto { lo, hi, alpha, temper } => loop {
                // |x| with density prop. to x^{-alpha-1} on [lo, hi), by inversion
                let u: f64 = rng.random();
                let r = if hi.is_infinite() {
                    lo * (1.0 - u).powf(-1.0 / alpha)
                } else {
                    let a = lo.powf(-alpha);
                    let b = hi.powf(-alpha);
                    (a - u * (a - b)).powf(-1.0 / alpha)
                };
                let accept = *temper == 0.0 || rng.random::<f64>() < (-temper * (r - lo)).exp();
                if accept {
                    return if rng.random::<bool>() { r } else { -r };
                }
            },
            SamplerKind::Uniform { lo, hi } => {
                let r = lo + (hi - lo) * rng.random::<f64>();
                if rng.random::<bool>() {
                    r
                } else {
                    -r
                }
            }
        }
    }
}

pub type TruncationFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Bounded `h` with `h(x) = x` on `|x| <= identity_radius`.
#[derive(Clone)]
pub struct CustomTruncation {
    pub label: String,
    pub h: TruncationFn,
    pub identity_radius: f64,
    /// Points where `h` may be discontinuous.
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for CustomTruncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTruncation")
            .field("label", &self.label)
            .field("identity_radius", &self.identity_radius)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum TruncationFunction {
    /// `h(x) = x 1_{[-a, a]}(x)`.
    IndicatorInside { a: f64 },
    /// `h(x) = x 1_{(a, b)^c}(|x|)`; a pseudo-truncation (unbounded) that is
    /// only admissible for integrable `L`.
    IndicatorOutsideBand { a: f64, b: f64 },
    Custom(CustomTruncation),
}

impl TruncationFunction {
    pub fn inside(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidConfig(format!("truncation radius must be positive, got {a}")));
        }
        Ok(TruncationFunction::IndicatorInside { a })
    }

    pub fn outside_band(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > a) {
            return Err(Error::InvalidConfig(format!("band truncation needs 0 < a < b, got ({a}, {b})")));
        }
        Ok(TruncationFunction::IndicatorOutsideBand { a, b })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TruncationFunction::IndicatorInside { a } => {
                if x.abs() <= *a {
                    x
                } else {
                    0.0
                }
            }
            TruncationFunction::IndicatorOutsideBand { a, b } => {
                let ax = x.abs();
                if ax > *a && ax < *b {
                    0.0
                } else {
                    x
                }
            }
            TruncationFunction::Custom(c) => (c.h)(x),
        }
    }

    pub fn is_pseudo(&self) -> bool {
        matches!(self, TruncationFunction::IndicatorOutsideBand { .. })
    }

    /// `h(x) = x` for `|x| <= identity_radius`.
    pub fn identity_radius(&self) -> f64 {
        match self {
            TruncationFunction::IndicatorInside { a } => *a,
            TruncationFunction::IndicatorOutsideBand { a, .. } => *a,
            TruncationFunction::Custom(c) => c.identity_radius,
        }
    }

    /// Region outside of which `x - h(x) = 0`.
    pub fn deviation_region(&self) -> Region {
        match self {
            TruncationFunction::IndicatorInside { a } => Region::outside(*a),
            TruncationFunction::IndicatorOutsideBand { a, b } => Region::band(*a, *b),
            TruncationFunction::Custom(c) => Region::outside(c.identity_radius),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TruncationFunction::IndicatorInside { a } => vec![-a, *a],
            TruncationFunction::IndicatorOutsideBand { a, b } => vec![-b, -a, *a, *b],
            TruncationFunction::Custom(c) => c.breakpoints.clone(),
        }
    }
}

/// Lévy triplet `(c, F, b^h)` relative to a declared truncation function.
#[derive(Debug, Clone)]
pub struct LevyTriplet {
    pub c: f64,
    pub measure: LevyMeasure,
    pub b_h: f64,
    pub h: TruncationFunction,
    /// `int_{|x|>1} |x| F(dx) < inf` has been asserted and checked.
    pub integrable: bool,
}

impl LevyTriplet {
    pub fn new(c: f64, measure: LevyMeasure, b_h: f64, h: TruncationFunction, integrable: bool) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidConfig(format!("Gaussian variance rate must be >= 0, got {c}")));
        }
        if !b_h.is_finite() {
            return Err(Error::InvalidConfig("drift must be finite".into()));
        }
        measure.check_integrability()?;
        if integrable {
            let tail = measure.abs_moment(1.0, &Region::outside(1.0))?;
            if !tail.is_finite() {
                return Err(Error::NonIntegrable("int_{|x|>1} |x| dF".into()));
            }
        } else if h.is_pseudo() {
            return Err(Error::InvalidConfig(
                "band pseudo-truncation requires an integrable Levy process".into(),
            ));
        }
        Ok(LevyTriplet { c, measure, b_h, h, integrable })
    }

    /// `xi = int (x - h(x)) F(dx) + b^h`, so that `E[L_t] = xi t`.
    pub fn drift_xi(&self) -> Result<f64> {
        if !self.integrable {
            return Err(Error::NonIntegrable("drift xi needs an integrable Levy process".into()));
        }
        let region = self.h.deviation_region().split_at(&self.h.breakpoints());
        let h = &self.h;
        let dev = match (&self.h, &self.measure) {
            (TruncationFunction::Custom(_), _) | (_, LevyMeasure::Discrete(_)) => {
                self.measure.integrate(|x| x - h.eval(x), false, &region)?
            }
            // x - h(x) = x on the deviation region of both indicator families
            _ => self.measure.first_moment(&region)?,
        };
        Ok(dev + self.b_h)
    }

    /// Same law under truncation `h_new`: `b' = b^h + int (h' - h) dF`.
    pub fn retriplet(&self, h_new: TruncationFunction) -> Result<LevyTriplet> {
        if h_new.is_pseudo() && !self.integrable {
            return Err(Error::InvalidConfig(
                "band pseudo-truncation requires an integrable Levy process".into(),
            ));
        }
        let r = self.h.identity_radius().min(h_new.identity_radius());
        let mut cuts = self.h.breakpoints();
        cuts.extend(h_new.breakpoints());
        let region = Region::outside(r).split_at(&cuts);
        let old = &self.h;
        let correction = self
            .measure
            .integrate(|x| h_new.eval(x) - old.eval(x), false, &region)?;
        Ok(LevyTriplet {
            c: self.c,
            measure: self.measure.clone(),
            b_h: self.b_h + correction,
            h: h_new,
            integrable: self.integrable,
        })
    }

    /// `L` has paths of locally unbounded variation.
    pub fn unbounded_variation(&self) -> bool {
        if self.c > 0.0 {
            return true;
        }
        match self.measure.abs_moment(1.0, &Region::within(1.0)) {
            Ok(v) => !v.is_finite(),
            Err(_) => true,
        }
    }
}

/// `int_region g dF`.
pub fn levy_integrate<G: Fn(f64) -> f64>(f: &LevyMeasure, g: G, quadratic_at_zero: bool, region: &Region) -> Result<f64> {
    f.integrate(g, quadratic_at_zero, region)
}

/// `F([-a, a]^c)`.
pub fn tail_mass(f: &LevyMeasure, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidConfig(format!("tail threshold must be positive, got {a}")));
    }
    f.mass(&Region::outside(a))
}

/// `(F((-b, -a)), F((a, b)))`.
pub fn band_masses(f: &LevyMeasure, a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidConfig(format!("band needs 0 < a < b, got ({a}, {b})")));
    }
    let neg = f.mass(&Region::interval(Interval::open(-b, -a)))?;
    let pos = f.mass(&Region::interval(Interval::open(a, b)))?;
    Ok((neg, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_atoms() -> LevyMeasure {
        LevyMeasure::discrete(&[(-1.0, 1.0), (2.0, 2.0)]).unwrap()
    }

    #[test]
    fn discrete_integral_is_atom_sum() {
        let v = levy_integrate(&two_atoms(), |_| 1.0, false, &Region::outside(0.5)).unwrap();
        assert_eq!(v, 3.0);
    }

    #[test]
    fn zero_measure_integrates_to_zero() {
        let v = levy_integrate(&LevyMeasure::Zero, |x| x.exp(), false, &Region::everywhere()).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(tail_mass(&LevyMeasure::Zero, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn stable_second_moment_closed_form_and_quadrature() {
        let f = LevyMeasure::symmetric_stable(1.5, 1.0).unwrap();
        let closed = f.second_moment(&Region::within(1.0)).unwrap();
        assert!((closed - 4.0).abs() < 1e-12, "{closed}");
        let quad = levy_integrate(&f, |x| x * x, true, &Region::within(1.0)).unwrap();
        assert!((quad - 4.0).abs() < 1e-7, "{quad}");
    }

    #[test]
    fn region_at_zero_needs_quadratic_integrand() {
        let f = LevyMeasure::symmetric_stable(1.5, 1.0).unwrap();
        let r = levy_integrate(&f, |x| x.abs(), false, &Region::within(1.0));
        assert!(matches!(r, Err(Error::InvalidRegion(_))));
    }

    #[test]
    fn tempered_tail_mass_quadrature_vs_riemann() {
        let f = LevyMeasure::tempered_stable(1.0, 1.0, 1.2).unwrap();
        let q = tail_mass(&f, 1.0).unwrap();
        // coarse midpoint Riemann sum on (1, 60), both sides
        let n = 2_000_000;
        let h = 59.0 / n as f64;
        let riemann: f64 = 2.0
            * (0..n)
                .map(|i| {
                    let x = 1.0 + (i as f64 + 0.5) * h;
                    x.powf(-2.2) * (-x).exp() * h
                })
                .sum::<f64>();
        assert!((q - riemann).abs() < 1e-6, "{q} vs {riemann}");
    }

    #[test]
    fn band_masses_cases() {
        let sym = LevyMeasure::discrete(&[(-1.0, 1.0), (1.0, 1.0)]).unwrap();
        assert_eq!(band_masses(&sym, 0.5, 2.0).unwrap(), (1.0, 1.0));
        let one = LevyMeasure::discrete(&[(1.0, 1.0)]).unwrap();
        let (n, p) = band_masses(&one, 0.5, 2.0).unwrap();
        assert_eq!((n, p), (0.0, 1.0));
        assert!(n.min(p) == 0.0);
        let st = LevyMeasure::symmetric_stable(1.5, 1.0).unwrap();
        let (n, p) = band_masses(&st, 1.0, 2.0).unwrap();
        assert!(n > 0.0 && (n - p).abs() < 1e-9);
        let via_quad = levy_integrate(&st, |_| 1.0, false, &Region::interval(Interval::open(1.0, 2.0))).unwrap();
        assert!((via_quad - p).abs() < 1e-9);
    }

    #[test]
    fn xi_examples() {
        let t = LevyTriplet::new(
            0.0,
            LevyMeasure::discrete(&[(1.0, 1.0)]).unwrap(),
            0.0,
            TruncationFunction::inside(1.0).unwrap(),
            true,
        )
        .unwrap();
        assert_eq!(t.drift_xi().unwrap(), 0.0);
        let t = LevyTriplet::new(
            0.0,
            LevyMeasure::discrete(&[(2.0, 1.0)]).unwrap(),
            0.0,
            TruncationFunction::inside(1.0).unwrap(),
            true,
        )
        .unwrap();
        assert_eq!(t.drift_xi().unwrap(), 2.0);
        let t = LevyTriplet::new(
            0.0,
            LevyMeasure::discrete(&[(1.0, 1.0), (-1.0, 1.0)]).unwrap(),
            3.0,
            TruncationFunction::outside_band(0.5, 2.0).unwrap(),
            true,
        )
        .unwrap();
        assert_eq!(t.drift_xi().unwrap(), 3.0);
    }

    #[test]
    fn xi_requires_integrability() {
        let t = LevyTriplet::new(
            0.0,
            LevyMeasure::symmetric_stable(0.8, 1.0).unwrap(),
            0.0,
            TruncationFunction::inside(1.0).unwrap(),
            false,
        )
        .unwrap();
        assert!(matches!(t.drift_xi(), Err(Error::NonIntegrable(_))));
        let r = LevyTriplet::new(
            0.0,
            LevyMeasure::symmetric_stable(0.8, 1.0).unwrap(),
            0.0,
            TruncationFunction::inside(1.0).unwrap(),
            true,
        );
        assert!(matches!(r, Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn retriplet_examples() {
        let t = LevyTriplet::new(
            0.0,
            LevyMeasure::discrete(&[(2.0, 1.0)]).unwrap(),
            0.0,
            TruncationFunction::inside(1.0).unwrap(),
            true,
        )
        .unwrap();
        let same = t.retriplet(TruncationFunction::inside(1.0).unwrap()).unwrap();
        assert_eq!(same.b_h, t.b_h);
        let wide = t.retriplet(TruncationFunction::inside(3.0).unwrap()).unwrap();
        assert_eq!(wide.b_h, 2.0);
        let back = wide.retriplet(TruncationFunction::inside(1.0).unwrap()).unwrap();
        assert_eq!(back.b_h, 0.0);
    }

    #[test]
    fn xi_invariant_under_retriplet_for_density() {
        let t = LevyTriplet::new(
            0.5,
            LevyMeasure::tempered_stable(1.0, 2.0, 1.4).unwrap(),
            0.3,
            TruncationFunction::inside(1.0).unwrap(),
            true,
        )
        .unwrap();
        let xi = t.drift_xi().unwrap();
        let band = t.retriplet(TruncationFunction::outside_band(0.5, 2.0).unwrap()).unwrap();
        assert!((band.drift_xi().unwrap() - xi).abs() < 1e-8);
        // symmetric F, odd h: xi = b^h
        assert!((xi - 0.3).abs() < 1e-9);
    }

    #[test]
    fn support_probes() {
        let st = LevyMeasure::symmetric_stable(1.5, 1.0).unwrap();
        assert!(st.check_support(&SupportDescriptor::unbounded_both_sides()).is_ok());
        assert!(st.check_support(&SupportDescriptor::compact(5.0)).is_err());
        let ub = LevyMeasure::uniform_band(0.0, 2.0, 1.0).unwrap();
        assert!(ub.check_support(&SupportDescriptor::compact(2.0)).is_ok());
        assert!(ub.check_support(&SupportDescriptor::unbounded_both_sides()).is_err());
        let one = LevyMeasure::discrete(&[(1.0, 1.0)]).unwrap();
        assert!(!one.support().is_two_sided());
        assert!(one
            .check_support(&SupportDescriptor { negative: Extent::Empty, positive: Extent::Bounded(1.0) })
            .is_ok());
    }

    #[test]
    fn small_jump_profile_stable_scaling() {
        let alpha = 1.5;
        let f = LevyMeasure::symmetric_stable(alpha, 1.0).unwrap();
        let k = 2.0 * (1.0 / (2.0 - alpha) + 1.0 / (alpha - 1.0));
        for u in [0.1, 0.5, 1.0, 3.0] {
            let g = f.small_jump_profile(u).unwrap();
            assert!((g - k * u.powf(alpha)).abs() < 1e-10 * g.max(1.0));
        }
    }

    #[test]
    fn jump_sampler_rates() {
        let f = LevyMeasure::discrete(&[(-1.0, 1.0), (0.1, 5.0), (2.0, 2.0)]).unwrap();
        assert_eq!(f.jump_sampler(0.5).unwrap().rate, 3.0);
        let st = LevyMeasure::symmetric_stable(1.5, 1.0).unwrap();
        let s = st.jump_sampler(0.5).unwrap();
        assert!((s.rate - 2.0 * 0.5f64.powf(-1.5) / 1.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn band_masses_monotone_in_width(a in 0.05f64..1.0, w1 in 0.01f64..2.0, w2 in 0.01f64..2.0) {
            let f = LevyMeasure::tempered_stable(1.0, 1.0, 1.3).unwrap();
            let (n1, p1) = band_masses(&f, a, a + w1.min(w2)).unwrap();
            let (n2, p2) = band_masses(&f, a, a + w1.max(w2)).unwrap();
            prop_assert!(n1 >= 0.0 && p1 >= 0.0);
            prop_assert!(n1 + p1 <= n2 + p2 + 1e-12);
        }

        #[test]
        fn discrete_integral_linear_and_additive(
            xs in proptest::collection::vec((-5.0f64..5.0, 0.01f64..3.0), 1..8),
            s in -3.0f64..3.0, cut in 0.1f64..4.0,
        ) {
            let atoms: Vec<(f64, f64)> = xs.into_iter().filter(|(x, _)| *x != 0.0).collect();
            prop_assume!(!atoms.is_empty());
            let f = LevyMeasure::discrete(&atoms).unwrap();
            let all = Region::everywhere();
            let g1 = f.integrate(|x| x, false, &all).unwrap();
            let g2 = f.integrate(|x| x * x, false, &all).unwrap();
            let lin = f.integrate(|x| x + s * x * x, false, &all).unwrap();
            prop_assert!((lin - (g1 + s * g2)).abs() < 1e-9);
            let inner = f.integrate(|x| x, false, &Region::within(cut)).unwrap();
            let outer = f.integrate(|x| x, false, &Region::outside(cut)).unwrap();
            prop_assert!((inner + outer - g1).abs() < 1e-9);
        }
    }
}
