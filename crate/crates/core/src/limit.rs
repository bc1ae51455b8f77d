//! Limiting distributions of the average magnetization and of the marginal ML
//! estimates, with CDFs that handle atoms (including atoms at `-inf`).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use libm::{cbrt, erfc, exp, fabs, pow, sqrt};

use crate::error::{Error, Result};
use crate::hfunc::{beta_tilde, HAnalysis, PointClass};
use crate::quad::gk15;
use crate::rng::StreamRng;
use crate::special::{double_factorial, normal_cdf, normal_two_sided, signed_pow};

const QUARTIC_CELLS: usize = 512;
/// Log-density drop that bounds the tabulated range of a quartic law.
const QUARTIC_LOG_RANGE: f64 = 50.0;

/// Law with density proportional to `exp(c4 x^4 + drift x)`, `c4 < 0`.
///
/// The density is tabulated as exact Gauss-Kronrod cell masses over the range
/// where it is within `exp(-50)` of its peak; the CDF inside a cell adds one
/// more Kronrod rule, so it is accurate to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticLaw {
    c4: f64,
    drift: f64,
    peak: f64,
    lo: f64,
    width: f64,
    cumulative: Vec<f64>,
    mass: f64,
    mean: f64,
}

impl QuarticLaw {
    /// `h4` is the fourth derivative `H''''(m*)`, so `c4 = h4 / 24`.
    pub fn new(h4: f64, drift: f64) -> Result<Self> {
        if !(h4 < 0.0) || !h4.is_finite() {
            return Err(Error::InvalidParameter("quartic law needs a negative fourth derivative"));
        }
        if !drift.is_finite() {
            return Err(Error::InvalidParameter("quartic law needs a finite drift"));
        }
        let c4 = h4 / 24.0;
        let mode = cbrt(drift / (-4.0 * c4));
        let phi = |x: f64| c4 * x * x * x * x + drift * x;
        let peak = phi(mode);
        let edge = |dir: f64| {
            let mut step = 1.0;
            while phi(mode + dir * step) > peak - QUARTIC_LOG_RANGE {
                step *= 2.0;
            }
            let (mut a, mut b) = (0.0, step);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if phi(mode + dir * mid) > peak - QUARTIC_LOG_RANGE {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            mode + dir * b
        };
        let lo = edge(-1.0);
        let hi = edge(1.0);
        let width = (hi - lo) / QUARTIC_CELLS as f64;
        let f = |x: f64| exp(phi(x) - peak);
        let mut cumulative = Vec::with_capacity(QUARTIC_CELLS + 1);
        cumulative.push(0.0);
        let mut total = 0.0;
        let mut first = 0.0;
        for i in 0..QUARTIC_CELLS {
            let a = lo + width * i as f64;
            total += gk15(&f, a, a + width).0;
            first += gk15(&|x: f64| x * f(x), a, a + width).0;
            cumulative.push(total);
        }
        for c in cumulative.iter_mut() {
            *c /= total;
        }
        let mean = if drift == 0.0 { 0.0 } else { first / total };
        Ok(Self { c4, drift, peak, lo, width, cumulative, mass: total, mean })
    }

    pub fn c4(&self) -> f64 {
        self.c4
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// `integral of exp(c4 x^4 + drift x)` over the real line.
    pub fn normalizer(&self) -> f64 {
        exp(self.peak) * self.mass
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    fn unnormalized(&self, x: f64) -> f64 {
        exp(self.c4 * x * x * x * x + self.drift * x - self.peak)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.unnormalized(x) / self.mass
    }

    fn hi(&self) -> f64 {
        self.lo + self.width * QUARTIC_CELLS as f64
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi() {
            return 1.0;
        }
        let i = (((x - self.lo) / self.width) as usize).min(QUARTIC_CELLS - 1);
        let a = self.lo + self.width * i as f64;
        let partial = gk15(&|y: f64| self.unnormalized(y), a, x).0 / self.mass;
        (self.cumulative[i] + partial).min(1.0)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.lo;
        }
        if u >= 1.0 {
            return self.hi();
        }
        let i = self.cumulative.partition_point(|&c| c <= u).clamp(1, QUARTIC_CELLS) - 1;
        let a = self.lo + self.width * i as f64;
        let (mut lo, mut hi) = (a, a + self.width);
        let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
        let target = (u - c0) * self.mass;
        let mut x = a + self.width * ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let g = gk15(&|y: f64| self.unnormalized(y), a, x).0 - target;
            if fabs(g) <= 1e-16 * self.mass {
                break;
            }
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.unnormalized(x);
            let mut next = if d > 0.0 { x - g / d } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == x {
                break;
            }
            x = next;
        }
        x
    }
}

/// Mean of the quartic law with the given fourth derivative and drift, by
/// adaptive quadrature (no tabulation).
pub fn quartic_mean(h4: f64, drift: f64) -> Result<f64> {
    if !(h4 < 0.0) {
        return Err(Error::InvalidParameter("quartic law needs a negative fourth derivative"));
    }
    if drift == 0.0 {
        return Ok(0.0);
    }
    let c4 = h4 / 24.0;
    let mode = cbrt(drift / (-4.0 * c4));
    let peak = c4 * mode * mode * mode * mode + drift * mode;
    // exp(-50) below the peak, using the quartic term alone for the half-width
    let half = pow(QUARTIC_LOG_RANGE / -c4, 0.25) + fabs(mode);
    let f = |x: f64| exp(c4 * x * x * x * x + drift * x - peak);
    let (a, b) = (mode - 2.0 * half, mode + 2.0 * half);
    let mass = crate::quad::integrate(&f, a, b, 1e-13);
    let first = crate::quad::integrate(&|x: f64| x * f(x), a, b, 1e-13);
    Ok(first / mass)
}

/// Which superefficient law: `G1` for the field estimate, `G2` for the
/// inverse-temperature estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GKind {
    G1,
    G2,
}

/// Distribution `G(t) = F00(mean of F(drift(t)))` of a rescaled ML estimate at
/// a special point.
#[derive(Debug, Clone, PartialEq)]
pub struct GLaw {
    kind: GKind,
    h4: f64,
    slope: f64,
    base: QuarticLaw,
}

impl GLaw {
    pub fn kind(&self) -> GKind {
        self.kind
    }

    /// Drift of the perturbed quartic law per unit `t`.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 1.0;
        }
        if t == f64::NEG_INFINITY {
            return 0.0;
        }
        if t == 0.0 {
            return 0.5;
        }
        // G(-t) = 1 - G(t) because the base law is symmetric
        let mu = quartic_mean(self.h4, self.slope * fabs(t)).unwrap_or(f64::NAN);
        let upper = self.base.cdf(mu);
        if t > 0.0 {
            upper
        } else {
            1.0 - upper
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.cdf(lo) > u {
            lo *= 2.0;
        }
        while self.cdf(hi) < u {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A limiting distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitLaw {
    Gaussian { mean: f64, variance: f64 },
    /// Law of `|Z|`, `Z ~ N(0, variance)`.
    HalfNormalPos { variance: f64 },
    /// Law of `-|Z|`, `Z ~ N(0, variance)`.
    HalfNormalNeg { variance: f64 },
    Quartic(QuarticLaw),
    G(GLaw),
    /// Unit mass at `location`, which may be infinite.
    PointMass { location: f64 },
    Mixture(Vec<(f64, LimitLaw)>),
}

impl LimitLaw {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidParameter("gaussian needs finite mean and positive variance"));
        }
        Ok(LimitLaw::Gaussian { mean, variance })
    }

    pub fn half_normal(positive: bool, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter("half-normal needs a positive variance"));
        }
        Ok(if positive { LimitLaw::HalfNormalPos { variance } } else { LimitLaw::HalfNormalNeg { variance } })
    }

    pub fn point(location: f64) -> Self {
        LimitLaw::PointMass { location }
    }

    /// Mixture with positive weights summing to one; zero-weight components
    /// are dropped.
    pub fn mixture(components: Vec<(f64, LimitLaw)>) -> Result<Self> {
        let components: Vec<(f64, LimitLaw)> = components.into_iter().filter(|(w, _)| *w != 0.0).collect();
        if components.iter().any(|(w, _)| !(*w > 0.0 && *w <= 1.0)) {
            return Err(Error::InvalidParameter("mixture weights must lie in (0, 1]"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if fabs(total - 1.0) > 1e-12 {
            return Err(Error::InvalidParameter("mixture weights must sum to one"));
        }
        Ok(LimitLaw::Mixture(components))
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Gaussian { mean, variance } => normal_cdf((x - mean) / sqrt(*variance)),
            LimitLaw::HalfNormalPos { variance } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal_two_sided(x / sqrt(*variance))
                }
            }
            LimitLaw::HalfNormalNeg { variance } => {
                if x >= 0.0 {
                    1.0
                } else {
                    erfc(-x / sqrt(2.0 * variance))
                }
            }
            LimitLaw::Quartic(q) => q.cdf(x),
            LimitLaw::G(g) => g.cdf(x),
            LimitLaw::PointMass { location } => {
                if x >= *location {
                    1.0
                } else {
                    0.0
                }
            }
            LimitLaw::Mixture(parts) => parts.iter().map(|(w, law)| w * law.cdf(x)).sum::<f64>().min(1.0),
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            LimitLaw::PointMass { location } => {
                if x > *location {
                    1.0
                } else {
                    0.0
                }
            }
            LimitLaw::Mixture(parts) => parts.iter().map(|(w, law)| w * law.cdf_left(x)).sum::<f64>().min(1.0),
            other => other.cdf(x),
        }
    }

    /// Density of the absolutely continuous part (atoms excluded).
    pub fn pdf(&self, x: f64) -> f64 {
        let gauss = |v: f64, x: f64| exp(-0.5 * x * x / v) / sqrt(2.0 * core::f64::consts::PI * v);
        match self {
            LimitLaw::Gaussian { mean, variance } => gauss(*variance, x - mean),
            LimitLaw::HalfNormalPos { variance } => {
                if x < 0.0 {
                    0.0
                } else {
                    2.0 * gauss(*variance, x)
                }
            }
            LimitLaw::HalfNormalNeg { variance } => {
                if x > 0.0 {
                    0.0
                } else {
                    2.0 * gauss(*variance, x)
                }
            }
            LimitLaw::Quartic(q) => q.pdf(x),
            LimitLaw::G(g) => {
                let step = 1e-4 * (1.0 + fabs(x));
                (g.cdf(x + step) - g.cdf(x - step)) / (2.0 * step)
            }
            LimitLaw::PointMass { .. } => 0.0,
            LimitLaw::Mixture(parts) => parts.iter().map(|(w, law)| w * law.pdf(x)).sum(),
        }
    }

    /// Mean; infinite when an atom sits at infinity.
    pub fn mean(&self) -> f64 {
        match self {
            LimitLaw::Gaussian { mean, .. } => *mean,
            LimitLaw::HalfNormalPos { variance } => sqrt(2.0 * variance / core::f64::consts::PI),
            LimitLaw::HalfNormalNeg { variance } => -sqrt(2.0 * variance / core::f64::consts::PI),
            LimitLaw::Quartic(q) => q.mean(),
            LimitLaw::G(_) => 0.0,
            LimitLaw::PointMass { location } => *location,
            LimitLaw::Mixture(parts) => parts.iter().map(|(w, law)| w * law.mean()).sum(),
        }
    }

    /// Atoms as `(location, mass)`, merged by location and sorted.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        self.collect_atoms(1.0, &mut out);
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (loc, w) in out {
            match merged.last_mut() {
                Some(last) if last.0 == loc => last.1 += w,
                _ => merged.push((loc, w)),
            }
        }
        merged
    }

    fn collect_atoms(&self, scale: f64, out: &mut Vec<(f64, f64)>) {
        match self {
            LimitLaw::PointMass { location } => out.push((*location, scale)),
            LimitLaw::Mixture(parts) => {
                for (w, law) in parts {
                    law.collect_atoms(scale * w, out);
                }
            }
            _ => {}
        }
    }

    /// Total mass of the continuous components.
    pub fn continuous_mass(&self) -> f64 {
        1.0 - self.atoms().iter().map(|a| a.1).sum::<f64>()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            LimitLaw::Gaussian { mean, variance } => mean + sqrt(*variance) * rng.standard_normal(),
            LimitLaw::HalfNormalPos { variance } => fabs(sqrt(*variance) * rng.standard_normal()),
            LimitLaw::HalfNormalNeg { variance } => -fabs(sqrt(*variance) * rng.standard_normal()),
            LimitLaw::Quartic(q) => q.quantile(rng.uniform_open()),
            LimitLaw::G(g) => g.quantile(rng.uniform_open()),
            LimitLaw::PointMass { location } => *location,
            LimitLaw::Mixture(parts) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for (w, law) in parts {
                    acc += w;
                    if u < acc {
                        return law.sample(rng);
                    }
                }
                parts.last().map(|(_, law)| law.sample(rng)).unwrap_or(f64::NAN)
            }
        }
    }

    /// Short human-readable identifier.
    pub fn id(&self) -> String {
        match self {
            LimitLaw::Gaussian { mean, variance } => format!("N({mean:.6},{variance:.6})"),
            LimitLaw::HalfNormalPos { variance } => format!("N+(0,{variance:.6})"),
            LimitLaw::HalfNormalNeg { variance } => format!("N-(0,{variance:.6})"),
            LimitLaw::Quartic(q) => format!("quartic({:.6},{:.6})", q.c4() * 24.0, q.drift()),
            LimitLaw::G(g) => format!("{}(slope {:.6})", if g.kind == GKind::G1 { "G1" } else { "G2" }, g.slope),
            LimitLaw::PointMass { location } => format!("delta({location})"),
            LimitLaw::Mixture(parts) => {
                let inner: Vec<String> = parts.iter().map(|(w, l)| format!("{w:.6}*{}", l.id())).collect();
                inner.join(" + ")
            }
        }
    }
}

/// Convergence rate attached to a limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// The statistic itself, unscaled.
    None,
    /// `N^(1/4)`.
    QuarterN,
    /// `N^(1/2)`.
    SqrtN,
    /// `N^(3/4)`.
    ThreeQuarterN,
}

impl Scale {
    pub fn factor(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Scale::None => 1.0,
            Scale::QuarterN => pow(n, 0.25),
            Scale::SqrtN => sqrt(n),
            Scale::ThreeQuarterN => pow(n, 0.75),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Scale::None => "none",
            Scale::QuarterN => "n^1/4",
            Scale::SqrtN => "n^1/2",
            Scale::ThreeQuarterN => "n^3/4",
        }
    }
}

/// Limit of `scale(N) * (statistic - center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLaw {
    pub law: LimitLaw,
    pub scale: Scale,
    pub center: f64,
}

impl ScaledLaw {
    /// Applies the scaling to a raw statistic; infinite values pass through.
    pub fn transform(&self, value: f64, n: usize) -> f64 {
        if value.is_infinite() {
            return value;
        }
        self.scale.factor(n) * (value - self.center)
    }
}

/// The quartic law with density proportional to `exp((h4/24) x^4 + drift x)`.
pub fn quartic_law(h4: f64, drift: f64) -> Result<LimitLaw> {
    Ok(LimitLaw::Quartic(QuarticLaw::new(h4, drift)?))
}

/// `P(Z^p <= E Z^p)` for standard normal `Z`.
pub fn gamma_p(p: u32) -> f64 {
    if p % 2 == 1 {
        return 0.5;
    }
    let moment = double_factorial(p as i64 - 1);
    normal_two_sided(pow(moment, 1.0 / p as f64))
}

fn require_theory_range(a: &HAnalysis) -> Result<()> {
    if a.p < 3 {
        return Err(Error::InvalidParameter("estimator limit laws are stated for p >= 3"));
    }
    Ok(())
}

fn reject_special(a: &HAnalysis) -> Result<()> {
    if a.classification == PointClass::Special {
        return Err(Error::Classification { expected: "non-special", found: a.classification.tag() });
    }
    Ok(())
}

fn symmetric_pair(a: &HAnalysis) -> bool {
    a.p % 2 == 0 && a.maximizers.len() == 2 && fabs(a.maximizers[0] + a.maximizers[1]) <= 1e-8
}

const ZERO_MAXIMIZER: f64 = 1e-8;

/// Limit law of the average magnetization at an analyzed point.
pub fn sigma_limit(a: &HAnalysis) -> Result<ScaledLaw> {
    match a.classification {
        PointClass::Regular => Ok(ScaledLaw {
            law: LimitLaw::gaussian(0.0, -1.0 / a.second_derivs[0])?,
            scale: Scale::SqrtN,
            center: a.maximizers[0],
        }),
        PointClass::Special => Ok(ScaledLaw {
            law: quartic_law(a.fourth_derivs[0], 0.0)?,
            scale: Scale::QuarterN,
            center: a.maximizers[0],
        }),
        PointClass::WeaklyCritical | PointClass::StronglyCritical => {
            let parts = a.maximizers.iter().zip(&a.weights).map(|(&m, &w)| (w, LimitLaw::point(m))).collect();
            Ok(ScaledLaw { law: LimitLaw::mixture(parts)?, scale: Scale::None, center: 0.0 })
        }
    }
}

/// Limit law of the field estimate `sqrt(N) (h_hat - h)` (non-special points).
pub fn h_mle_limit(a: &HAnalysis) -> Result<ScaledLaw> {
    require_theory_range(a)?;
    reject_special(a)?;
    let v = |i: usize| -a.second_derivs[i];
    let law = match a.classification {
        PointClass::Regular => LimitLaw::gaussian(0.0, v(0))?,
        PointClass::WeaklyCritical if symmetric_pair(a) => {
            LimitLaw::mixture(alloc::vec![(0.5, LimitLaw::gaussian(0.0, v(1))?), (0.5, LimitLaw::point(0.0))])?
        }
        PointClass::WeaklyCritical => {
            let p1 = a.weights[0];
            LimitLaw::mixture(alloc::vec![
                (p1 / 2.0, LimitLaw::half_normal(false, v(0))?),
                ((1.0 - p1) / 2.0, LimitLaw::half_normal(true, v(1))?),
                (0.5, LimitLaw::point(0.0)),
            ])?
        }
        PointClass::StronglyCritical => {
            let p1 = a.weights[0];
            LimitLaw::mixture(alloc::vec![(p1, LimitLaw::gaussian(0.0, v(0))?), (1.0 - p1, LimitLaw::point(0.0))])?
        }
        PointClass::Special => unreachable!(),
    };
    Ok(ScaledLaw { law, scale: Scale::SqrtN, center: a.h })
}

/// Limit law of the inverse-temperature estimate (non-special points).
///
/// Scaled by `sqrt(N)` around `beta` except when the unique maximizer is zero,
/// where the estimate itself converges to atoms.
pub fn beta_mle_limit(a: &HAnalysis) -> Result<ScaledLaw> {
    require_theory_range(a)?;
    reject_special(a)?;
    let p = a.p;
    let pf = p as f64;
    let v = |i: usize| {
        let m = a.maximizers[i];
        -a.second_derivs[i] / (pf * pf * signed_pow(m, 2 * p - 2))
    };
    let sqrt_n = |law: LimitLaw| ScaledLaw { law, scale: Scale::SqrtN, center: a.beta };
    let gamma = gamma_p(p);
    let mix = |parts| LimitLaw::mixture(parts);
    match a.classification {
        PointClass::Regular if fabs(a.maximizers[0]) > ZERO_MAXIMIZER => Ok(sqrt_n(LimitLaw::gaussian(0.0, v(0))?)),
        PointClass::Regular => {
            let bt = beta_tilde(p);
            let law = if p % 2 == 1 {
                mix(alloc::vec![(0.5, LimitLaw::point(bt)), (0.5, LimitLaw::point(-bt))])?
            } else {
                mix(alloc::vec![(gamma, LimitLaw::point(f64::NEG_INFINITY)), (1.0 - gamma, LimitLaw::point(bt))])?
            };
            Ok(ScaledLaw { law, scale: Scale::None, center: 0.0 })
        }
        PointClass::WeaklyCritical if symmetric_pair(a) => Ok(sqrt_n(LimitLaw::gaussian(0.0, v(1))?)),
        PointClass::WeaklyCritical => {
            let p1 = a.weights[0];
            let law = if p % 2 == 1 && fabs(a.maximizers[0]) <= ZERO_MAXIMIZER {
                mix(alloc::vec![
                    (p1 / 2.0, LimitLaw::point(f64::NEG_INFINITY)),
                    ((1.0 - p1) / 2.0, LimitLaw::half_normal(true, v(1))?),
                    (0.5, LimitLaw::point(0.0)),
                ])?
            } else {
                let flip = p % 2 == 0 && a.h < 0.0;
                mix(alloc::vec![
                    (p1 / 2.0, LimitLaw::half_normal(flip, v(0))?),
                    ((1.0 - p1) / 2.0, LimitLaw::half_normal(!flip, v(1))?),
                    (0.5, LimitLaw::point(0.0)),
                ])?
            };
            Ok(sqrt_n(law))
        }
        PointClass::StronglyCritical => {
            let (p1, p2) = (a.weights[0], a.weights[1]);
            let law = mix(alloc::vec![
                (p2 * gamma, LimitLaw::point(f64::NEG_INFINITY)),
                (p1, LimitLaw::half_normal(true, v(2))?),
                (1.0 - p1 - p2 * gamma, LimitLaw::point(0.0)),
            ])?;
            Ok(sqrt_n(law))
        }
        PointClass::Special => unreachable!(),
    }
}

/// `G1` or `G2` at a special point, as the limit of `N^(3/4)` times the
/// estimation error.
///
/// The `G2` drift uses `|m*|^(p-1)`: at the negative special point of even `p`
/// the spin-flip symmetry maps the problem onto the positive one.
pub fn g_law(kind: GKind, a: &HAnalysis) -> Result<ScaledLaw> {
    if a.classification != PointClass::Special {
        return Err(Error::Classification { expected: "special", found: a.classification.tag() });
    }
    let m = a.maximizers[0];
    let h4 = a.fourth_derivs[0];
    let (slope, center) = match kind {
        GKind::G1 => (1.0, a.h),
        GKind::G2 => (a.p as f64 * pow(fabs(m), a.p as f64 - 1.0), a.beta),
    };
    let g = GLaw { kind, h4, slope, base: QuarticLaw::new(h4, 0.0)? };
    Ok(ScaledLaw { law: LimitLaw::G(g), scale: Scale::ThreeQuarterN, center })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hfunc::{analyze, special_point, AnalysisConfig};
    use crate::rng::RngStream;
    use crate::special::ln_gamma;

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn quartic_normalizer_closed_form() {
        let q = QuarticLaw::new(-24.0, 0.0).unwrap();
        let expected = exp(ln_gamma(0.25)) / 2.0;
        assert!((q.normalizer() - expected).abs() < 1e-12 * expected);
        for h4 in [-1.0, -7.5, -300.0] {
            let q = QuarticLaw::new(h4, 0.0).unwrap();
            let expected = exp(ln_gamma(0.25)) / (2.0 * pow(-h4 / 24.0, 0.25));
            assert!((q.normalizer() - expected).abs() < 1e-11 * expected);
        }
    }

    #[test]
    fn quartic_symmetric_without_drift() {
        let q = QuarticLaw::new(-24.0, 0.0).unwrap();
        assert_eq!(q.mean(), 0.0);
        for &x in &[0.1, 0.5, 1.3] {
            assert_eq!(q.pdf(x), q.pdf(-x));
            assert!((q.cdf(x) + q.cdf(-x) - 1.0).abs() < 1e-13);
        }
        assert!((q.cdf(0.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn quartic_drift_mean_trapezoid_oracle() {
        let q = QuarticLaw::new(-24.0, 1.0).unwrap();
        let trap = |n: usize| {
            let (a, b) = (-4.0f64, 4.0f64);
            let h = (b - a) / n as f64;
            let (mut m0, mut m1) = (0.0, 0.0);
            for i in 0..=n {
                let x = a + h * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let f = exp(-x * x * x * x + x);
                m0 += w * f;
                m1 += w * x * f;
            }
            m1 / m0
        };
        let (coarse, fine) = (trap(4000), trap(8000));
        assert!((coarse - fine).abs() < 1e-12);
        assert!(q.mean() > 0.0);
        assert!((q.mean() - fine).abs() < 1e-10);
        assert!((quartic_mean(-24.0, 1.0).unwrap() - fine).abs() < 1e-10);
    }

    #[test]
    fn quartic_quantile_inverts_cdf() {
        let q = QuarticLaw::new(-3.0, 0.7).unwrap();
        for i in 1..100 {
            let u = i as f64 / 100.0;
            assert!((q.cdf(q.quantile(u)) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn quartic_rejects_nonnegative_h4() {
        assert!(QuarticLaw::new(0.0, 0.0).is_err());
        assert!(QuarticLaw::new(1.0, 0.0).is_err());
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_p(3), 0.5);
        assert!((gamma_p(2) - (2.0 * normal_cdf(1.0) - 1.0)).abs() < 1e-15);
        // 2 Phi(3^(1/4)) - 1
        assert!((gamma_p(4) - 0.811_850_797_748_135).abs() < 1e-12);
    }

    #[test]
    fn point_mass_at_minus_infinity() {
        let law = LimitLaw::mixture(alloc::vec![
            (0.3, LimitLaw::point(f64::NEG_INFINITY)),
            (0.7, LimitLaw::point(1.0)),
        ])
        .unwrap();
        assert_eq!(law.cdf(-1e300), 0.3);
        assert_eq!(law.cdf(1.0), 1.0);
        assert_eq!(law.cdf_left(1.0), 0.3);
        assert_eq!(law.mean(), f64::NEG_INFINITY);
    }

    #[test]
    fn mixture_weight_validation() {
        assert!(LimitLaw::mixture(alloc::vec![(0.5, LimitLaw::point(0.0))]).is_err());
        assert!(LimitLaw::mixture(alloc::vec![(1.5, LimitLaw::point(0.0)), (-0.5, LimitLaw::point(1.0))]).is_err());
    }

    #[test]
    fn sigma_limits_by_class() {
        let reg = sigma_limit(&analyze(0.2, 0.1, 4, &cfg()).unwrap()).unwrap();
        assert_eq!(reg.scale, Scale::SqrtN);
        match reg.law {
            LimitLaw::Gaussian { variance, .. } => assert!(variance > 0.0),
            _ => panic!("expected gaussian"),
        }
        let free = sigma_limit(&analyze(0.0, 0.0, 3, &cfg()).unwrap()).unwrap();
        assert_eq!(free.law, LimitLaw::Gaussian { mean: 0.0, variance: 1.0 });

        let strong = sigma_limit(&analyze(beta_tilde(4), 0.0, 4, &cfg()).unwrap()).unwrap();
        let atoms = strong.law.atoms();
        assert_eq!(atoms.len(), 3);
        assert!((atoms[0].1 - atoms[2].1).abs() < 1e-10);

        let (b, h) = special_point(4, 1).unwrap();
        let sp = sigma_limit(&analyze(b, h, 4, &cfg()).unwrap()).unwrap();
        assert_eq!(sp.scale, Scale::QuarterN);
    }

    #[test]
    fn h_limits_by_class() {
        let a = analyze(0.57, crate::hfunc::critical_curve(4, 0.57).unwrap().unwrap(), 4, &cfg()).unwrap();
        let law = h_mle_limit(&a).unwrap().law;
        assert!((law.atoms()[0].1 - 0.5).abs() < 1e-15);
        assert!(matches!(&law, LimitLaw::Mixture(parts) if parts.len() == 3));

        let a = analyze(beta_tilde(4), 0.0, 4, &cfg()).unwrap();
        match h_mle_limit(&a).unwrap().law {
            LimitLaw::Mixture(parts) => {
                assert_eq!(parts.len(), 2);
                assert!((parts[0].0 - a.weights[0]).abs() < 1e-15);
            }
            _ => panic!("expected mixture"),
        }

        let (b, h) = special_point(4, 1).unwrap();
        assert!(h_mle_limit(&analyze(b, h, 4, &cfg()).unwrap()).is_err());
        let sym = analyze(0.8, 0.0, 4, &cfg()).unwrap();
        assert_eq!(sym.classification, PointClass::WeaklyCritical);
        assert!(matches!(h_mle_limit(&sym).unwrap().law, LimitLaw::Mixture(ref p) if p.len() == 2));
    }

    #[test]
    fn beta_limits_by_class() {
        let a = analyze(0.5, 0.2, 3, &cfg()).unwrap();
        let m = a.maximizers[0];
        match beta_mle_limit(&a).unwrap().law {
            LimitLaw::Gaussian { variance, .. } => {
                let expected = -a.second_derivs[0] / (9.0 * pow(m, 4.0));
                assert!((variance - expected).abs() < 1e-14 * expected);
            }
            _ => panic!("expected gaussian"),
        }

        let below = beta_mle_limit(&analyze(0.3, 0.0, 4, &cfg()).unwrap()).unwrap();
        assert_eq!(below.scale, Scale::None);
        let atoms = below.law.atoms();
        assert_eq!(atoms[0].0, f64::NEG_INFINITY);
        assert!((atoms[0].1 - gamma_p(4)).abs() < 1e-15);
        assert!((atoms[1].0 - beta_tilde(4)).abs() < 1e-12);

        let odd = beta_mle_limit(&analyze(0.3, 0.0, 3, &cfg()).unwrap()).unwrap();
        assert_eq!(odd.law.atoms().len(), 2);

        let strong = analyze(beta_tilde(4), 0.0, 4, &cfg()).unwrap();
        let law = beta_mle_limit(&strong).unwrap().law;
        let atoms = law.atoms();
        assert_eq!(atoms[0].0, f64::NEG_INFINITY);
        assert!((atoms[0].1 - strong.weights[1] * gamma_p(4)).abs() < 1e-14);

        let odd_thr = analyze(beta_tilde(3), 0.0, 3, &cfg()).unwrap();
        let law = beta_mle_limit(&odd_thr).unwrap().law;
        assert!((law.atoms()[0].1 - odd_thr.weights[0] / 2.0).abs() < 1e-14);
    }

    #[test]
    fn g_laws_are_cdfs() {
        let (b, h) = special_point(4, 1).unwrap();
        let a = analyze(b, h, 4, &cfg()).unwrap();
        for kind in [GKind::G1, GKind::G2] {
            let g = g_law(kind, &a).unwrap();
            assert_eq!(g.law.cdf(0.0), 0.5);
            let mut prev = 0.0;
            for i in -30..=30 {
                let t = i as f64 / 10.0;
                let c = g.law.cdf(t);
                assert!(c >= prev);
                prev = c;
            }
            assert!(g.law.cdf(-50.0) < 1e-6 && g.law.cdf(50.0) > 1.0 - 1e-6);
        }
        assert!(g_law(GKind::G1, &analyze(0.2, 0.1, 4, &cfg()).unwrap()).is_err());
        let neg = analyze(b, -h, 4, &cfg()).unwrap();
        let (gp, gn) = (g_law(GKind::G2, &a).unwrap(), g_law(GKind::G2, &neg).unwrap());
        assert!((gp.law.cdf(1.0) - gn.law.cdf(1.0)).abs() < 1e-6);
    }

    #[test]
    fn half_normal_sampler_matches_folded_gaussian() {
        let law = LimitLaw::half_normal(true, 2.0).unwrap();
        let mut rng = RngStream::new(11, 0).open();
        let n = 20_000;
        let below = (0..n).filter(|_| law.sample(&mut rng) <= 1.0).count() as f64 / n as f64;
        assert!((below - law.cdf(1.0)).abs() < 0.015);
    }
}
