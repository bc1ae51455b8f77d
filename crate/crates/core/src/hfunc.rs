//! The variational function `H(x) = beta x^p + h x - I(x)` and the structure of
//! its maximizers.
//!
//! Stationary points are isolated exactly rather than by a blind scan: the sign
//! of `H''` on `(0, 1)` is the sign of `beta p (p-1) x^(p-2) (1-x^2) - 1`, a
//! unimodal function with its peak at `sqrt((p-2)/p)`. Its (at most two) roots on
//! each side split `(-1, 1)` into pieces on which `H'` is monotone, and each
//! piece holds at most one root of `H'`.

use alloc::vec::Vec;
use libm::{atanh, log1p, sqrt};

use crate::error::{Error, Result};
use crate::special::{signed_pow, LN_2};

/// Binary entropy `I(x) = ((1+x) log(1+x) + (1-x) log(1-x)) / 2` with `0 log 0 = 0`.
pub fn entropy(x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain { function: "entropy", value: x });
    }
    Ok(entropy_unchecked(x))
}

#[inline]
fn entropy_unchecked(x: f64) -> f64 {
    let ax = x.abs();
    if ax == 1.0 {
        return LN_2;
    }
    if ax < 1e-2 {
        // sum_k x^(2k) / (2k (2k - 1)); the closed form cancels to zero here
        let x2 = x * x;
        let mut term = x2;
        let mut acc = 0.0;
        for k in 1..=7 {
            let kk = 2.0 * k as f64;
            acc += term / (kk * (kk - 1.0));
            term *= x2;
        }
        return acc;
    }
    0.5 * ((1.0 + x) * log1p(x) + (1.0 - x) * log1p(-x))
}

#[inline]
pub(crate) fn h_value(beta: f64, h: f64, p: u32, x: f64) -> f64 {
    beta * signed_pow(x, p) + h * x - entropy_unchecked(x)
}

#[inline]
pub(crate) fn h_prime(beta: f64, h: f64, p: u32, x: f64) -> f64 {
    beta * p as f64 * signed_pow(x, p - 1) + h - atanh(x)
}

#[inline]
pub(crate) fn h_second(beta: f64, p: u32, x: f64) -> f64 {
    let pf = p as f64;
    beta * pf * (pf - 1.0) * signed_pow(x, p - 2) - 1.0 / (1.0 - x * x)
}

#[inline]
fn h_third(beta: f64, p: u32, x: f64) -> f64 {
    let pf = p as f64;
    let poly = if p >= 3 { beta * pf * (pf - 1.0) * (pf - 2.0) * signed_pow(x, p - 3) } else { 0.0 };
    let d = 1.0 - x * x;
    poly - 2.0 * x / (d * d)
}

#[inline]
fn h_fourth(beta: f64, p: u32, x: f64) -> f64 {
    let pf = p as f64;
    let poly = if p >= 4 {
        beta * pf * (pf - 1.0) * (pf - 2.0) * (pf - 3.0) * signed_pow(x, p - 4)
    } else {
        0.0
    };
    let d = 1.0 - x * x;
    poly - (2.0 + 6.0 * x * x) / (d * d * d)
}

/// `[H, H', H'', H''', H'''']` truncated after `max_order`.
pub fn h_derivatives(beta: f64, h: f64, p: u32, x: f64, max_order: usize) -> Result<Vec<f64>> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain { function: "h_derivatives", value: x });
    }
    if max_order > 4 {
        return Err(Error::InvalidParameter("derivative order must be in 0..=4"));
    }
    if p < 2 {
        return Err(Error::InvalidParameter("p must be at least 2"));
    }
    let all = [
        h_value(beta, h, p, x),
        h_prime(beta, h, p, x),
        h_second(beta, p, x),
        h_third(beta, p, x),
        h_fourth(beta, p, x),
    ];
    Ok(all[..=max_order].to_vec())
}

/// Classification of a parameter point by the maximizers of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointClass {
    /// Unique maximizer with `H'' < 0`.
    Regular,
    /// Unique maximizer with `H'' = 0`.
    Special,
    /// Exactly two global maximizers.
    WeaklyCritical,
    /// Three global maximizers (even `p`, `h = 0`, `beta = beta_tilde`).
    StronglyCritical,
}

impl PointClass {
    pub fn tag(self) -> &'static str {
        match self {
            PointClass::Regular => "regular",
            PointClass::Special => "special",
            PointClass::WeaklyCritical => "weakly-critical",
            PointClass::StronglyCritical => "strongly-critical",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "regular" => Some(PointClass::Regular),
            "special" => Some(PointClass::Special),
            "weakly-critical" => Some(PointClass::WeaklyCritical),
            "strongly-critical" => Some(PointClass::StronglyCritical),
            _ => None,
        }
    }

    pub fn is_critical(self) -> bool {
        matches!(self, PointClass::WeaklyCritical | PointClass::StronglyCritical)
    }
}

/// Tolerances used by [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    /// Two maximizer values closer than this count as equal.
    pub eps_h: f64,
    /// `|H''(m*)|` at or below this counts as zero.
    pub eps_class: f64,
    /// Base resolution of the verification scan.
    pub grid: usize,
    /// Cross-check the root count against sign-change scans at `grid` and
    /// `4 * grid` points.
    pub verify_with_grid: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { eps_h: 1e-9, eps_class: 1e-7, grid: 4096, verify_with_grid: false }
    }
}

/// Global maximizers of `H` and the resulting classification.
#[derive(Debug, Clone, PartialEq)]
pub struct HAnalysis {
    pub beta: f64,
    pub h: f64,
    pub p: u32,
    /// Global maximizers in increasing order.
    pub maximizers: Vec<f64>,
    pub values: Vec<f64>,
    pub second_derivs: Vec<f64>,
    pub fourth_derivs: Vec<f64>,
    pub classification: PointClass,
    /// Limiting masses `p_k` of the maximizers; empty unless critical.
    pub weights: Vec<f64>,
}

impl HAnalysis {
    /// The unique maximizer, if there is exactly one.
    pub fn m_star(&self) -> Option<f64> {
        (self.maximizers.len() == 1).then(|| self.maximizers[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stationary {
    x: f64,
    is_max: bool,
}

/// Roots of `H''` in `(-1, 1)`, increasing.
fn curvature_breakpoints(beta: f64, p: u32) -> Vec<f64> {
    let mut out = Vec::new();
    if beta <= 0.0 {
        return out;
    }
    let pf = p as f64;
    let g = |x: f64| beta * pf * (pf - 1.0) * signed_pow(x, p - 2) * (1.0 - x * x) - 1.0;
    let peak = sqrt((pf - 2.0) / pf);
    if g(peak) <= 0.0 {
        return out;
    }
    let mut positive = Vec::new();
    if p > 2 {
        positive.push(bisect_sign(&g, 0.0, peak));
    }
    positive.push(bisect_sign(&g, peak, 1.0));
    if p % 2 == 0 {
        for &r in positive.iter().rev() {
            if r > 0.0 {
                out.push(-r);
            }
        }
    }
    out.extend(positive);
    out
}

/// Bisection for a sign change of `f` on `[a, b]`, run to adjacent floats.
fn bisect_sign(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    if flo <= fhi {
        lo
    } else {
        hi
    }
}

fn stationary_points(beta: f64, h: f64, p: u32) -> Vec<Stationary> {
    let mut edges = Vec::with_capacity(6);
    edges.push(-1.0);
    edges.extend(curvature_breakpoints(beta, p));
    edges.push(1.0);
    let hp = |x: f64| h_prime(beta, h, p, x);
    let mut out: Vec<Stationary> = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (fa, fb) = (hp(a), hp(b));
        // H' is monotone on the piece; compare its ends rather than sampling H''
        // (which vanishes at the midpoint in degenerate cases such as p = 2, beta = 1/2)
        let decreasing = if fa != fb { fa > fb } else { h_second(beta, p, 0.5 * (a + b)) < 0.0 };
        let x = if fa == 0.0 {
            a
        } else if fb == 0.0 {
            b
        } else if (fa > 0.0) != (fb > 0.0) {
            bisect_sign(&hp, a, b)
        } else {
            continue;
        };
        if x.abs() >= 1.0 {
            continue;
        }
        if out.last().map_or(false, |s| s.x == x) {
            continue;
        }
        out.push(Stationary { x, is_max: decreasing });
    }
    out
}

/// All local maximizers of `H_{beta,h,p}` in `(-1, 1)`, increasing.
pub fn local_maxima(beta: f64, h: f64, p: u32) -> Vec<f64> {
    stationary_points(beta, h, p).into_iter().filter(|s| s.is_max).map(|s| s.x).collect()
}

/// Number of sign changes of `H'` on a uniform grid of `grid` points over
/// `(-1 + 1e-9, 1 - 1e-9)`.
pub fn scan_root_count(beta: f64, h: f64, p: u32, grid: usize) -> usize {
    let grid = grid.max(2);
    let (lo, hi) = (-1.0 + 1e-9, 1.0 - 1e-9);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut count = 0;
    let mut prev = h_prime(beta, h, p, lo);
    for i in 1..grid {
        let cur = h_prime(beta, h, p, lo + step * i as f64);
        if (prev > 0.0 && cur <= 0.0) || (prev < 0.0 && cur >= 0.0) {
            count += 1;
        }
        if cur != 0.0 {
            prev = cur;
        }
    }
    count
}

fn validate_point(beta: f64, h: f64, p: u32) -> Result<()> {
    if !beta.is_finite() || !h.is_finite() {
        return Err(Error::InvalidParameter("beta and h must be finite"));
    }
    if beta < 0.0 {
        return Err(Error::InvalidParameter("beta must be non-negative"));
    }
    if p < 2 {
        return Err(Error::InvalidParameter("p must be at least 2"));
    }
    Ok(())
}

/// Locates the global maximizers of `H_{beta,h,p}` and classifies the point.
pub fn analyze(beta: f64, h: f64, p: u32, config: &AnalysisConfig) -> Result<HAnalysis> {
    validate_point(beta, h, p)?;
    let points = stationary_points(beta, h, p);
    if config.verify_with_grid {
        let coarse = scan_root_count(beta, h, p, config.grid);
        let fine = scan_root_count(beta, h, p, 4 * config.grid);
        if coarse != fine || fine != points.len() {
            return Err(Error::UnstableRootCount { coarse, fine });
        }
    }

    let value = |x: f64| h_value(beta, h, p, x);
    let best = points
        .iter()
        .filter(|s| s.is_max)
        .map(|s| value(s.x))
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::NoConvergence("maximizer search"));
    }

    // Near-ties separated by a valley shallower than eps_h are one flat maximum.
    let mut global: Vec<f64> = Vec::new();
    let mut valley = f64::INFINITY;
    for s in &points {
        if !s.is_max {
            valley = valley.min(value(s.x));
            continue;
        }
        let v = value(s.x);
        if best - v > config.eps_h {
            valley = f64::NEG_INFINITY;
            continue;
        }
        match global.last_mut() {
            Some(prev) if best - valley <= config.eps_h => {
                if v > value(*prev) {
                    *prev = s.x;
                }
            }
            _ => global.push(s.x),
        }
        valley = f64::INFINITY;
    }

    let values: Vec<f64> = global.iter().map(|&x| value(x)).collect();
    let second_derivs: Vec<f64> = global.iter().map(|&x| h_second(beta, p, x)).collect();
    let fourth_derivs: Vec<f64> = global.iter().map(|&x| h_fourth(beta, p, x)).collect();

    let classification = match global.len() {
        1 if second_derivs[0].abs() <= config.eps_class => PointClass::Special,
        1 => PointClass::Regular,
        2 => PointClass::WeaklyCritical,
        _ => PointClass::StronglyCritical,
    };

    let weights = if classification.is_critical() {
        let raw: Vec<f64> = global
            .iter()
            .zip(&second_derivs)
            .map(|(&m, &h2)| 1.0 / sqrt((m * m - 1.0) * h2))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    } else {
        Vec::new()
    };

    Ok(HAnalysis {
        beta,
        h,
        p,
        maximizers: global,
        values,
        second_derivs,
        fourth_derivs,
        classification,
        weights,
    })
}

/// `sup_{x in (0,1)} H_{beta,0,p}(x) > 0`.
fn positive_branch_wins(beta: f64, p: u32) -> bool {
    let maxima = local_maxima(beta, 0.0, p);
    if p == 2 {
        // the positive maximum exists exactly when H''(0) = 2 beta - 1 > 0
        return maxima.iter().any(|&x| x > 0.0);
    }
    maxima.iter().any(|&x| x > 0.0 && h_value(beta, 0.0, p, x) > 0.0)
}

/// Thermodynamic threshold: the smallest `beta >= 0` at which `(beta, 0)` is
/// critical.
pub fn beta_tilde(p: u32) -> f64 {
    assert!(p >= 2, "p must be at least 2");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if positive_branch_wins(mid, p) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `beta_check_p`, the inverse temperature of the special point(s).
pub fn beta_check(p: u32) -> f64 {
    let pf = p as f64;
    libm::pow(pf / (pf - 2.0), (pf - 2.0) / 2.0) / (2.0 * (pf - 1.0))
}

/// `(beta_check_p, sign * h_check_p)`.
pub fn special_point(p: u32, sign: i32) -> Result<(f64, f64)> {
    if p < 3 {
        return Err(Error::InvalidParameter("special points are defined for p >= 3"));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidParameter("sign must be +1 or -1"));
    }
    if sign == -1 && p % 2 == 1 {
        return Err(Error::InvalidParameter("odd p has a single special point"));
    }
    let pf = p as f64;
    let beta = beta_check(p);
    let ratio = (pf - 2.0) / pf;
    let h = atanh(sqrt(ratio)) - beta * pf * libm::pow(ratio, (pf - 1.0) / 2.0);
    Ok((beta, sign as f64 * h))
}

/// Supremum of `H` over `[a, b]` where `H` is concave.
fn concave_sup(beta: f64, h: f64, p: u32, a: f64, b: f64) -> f64 {
    let hp = |x: f64| h_prime(beta, h, p, x);
    let x = if hp(a) <= 0.0 {
        a
    } else if hp(b) >= 0.0 {
        b
    } else {
        bisect_sign(&hp, a, b)
    };
    h_value(beta, h, p, x)
}

/// Critical curve `phi_p(beta)`: the field at which `H_{beta,h,p}` has two
/// global maximizers.
///
/// For even `p` this is the non-negative branch (the mirror `-phi_p` is also
/// critical); for odd `p` the value is signed. Returns `None` at the strongly
/// critical `beta = beta_tilde_p` of even `p`.
pub fn critical_curve(p: u32, beta: f64) -> Result<Option<f64>> {
    if p == 2 {
        if !(beta > 0.5) {
            return Err(Error::InvalidParameter("critical curve needs beta > 0.5 for p = 2"));
        }
        return Ok(Some(0.0));
    }
    if p < 2 {
        return Err(Error::InvalidParameter("p must be at least 2"));
    }
    let b_check = beta_check(p);
    if !(beta > b_check) || !beta.is_finite() {
        return Err(Error::InvalidParameter("critical curve needs beta > beta_check_p"));
    }
    let even = p % 2 == 0;
    if even {
        let bt = beta_tilde(p);
        if (beta - bt).abs() <= 1e-10 {
            return Ok(None);
        }
        if beta > bt {
            return Ok(Some(0.0));
        }
    }
    let breaks: Vec<f64> = curvature_breakpoints(beta, p).into_iter().filter(|&x| x > 0.0).collect();
    if breaks.len() != 2 {
        return Err(Error::Bracketing("critical curve"));
    }
    let (r1, r2) = (breaks[0], breaks[1]);
    let left_lo = if even { 0.0 } else { -1.0 };
    let gap = |h: f64| concave_sup(beta, h, p, r2, 1.0) - concave_sup(beta, h, p, left_lo, r1);

    let (_, h_check) = special_point(p, 1)?;
    let mut hi = h_check;
    let mut lo = if even { 0.0 } else { -1.0 };
    let mut expansions = 0;
    while gap(lo) >= 0.0 {
        if even || expansions > 60 {
            return Err(Error::Bracketing("critical curve"));
        }
        lo *= 2.0;
        expansions += 1;
    }
    if gap(hi) <= 0.0 {
        return Err(Error::Bracketing("critical curve"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = gap(mid);
        if g.abs() < 1e-11 && hi - lo < 1e-13 {
            lo = mid;
            hi = mid;
            break;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    if gap(phi).abs() >= 1e-11 {
        return Err(Error::NoConvergence("critical curve"));
    }
    // both competing maxima must be global; near beta_check they are too close
    // for analyze to separate, so compare the local maxima directly
    let values: Vec<f64> = local_maxima(beta, phi, p).iter().map(|&x| h_value(beta, phi, p, x)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.iter().filter(|&&v| best - v <= 1e-9).count() < 2 {
        return Err(Error::NoConvergence("critical curve verification"));
    }
    Ok(Some(phi))
}

/// The `beta` at which the closure of the critical set meets the horizontal
/// line of field `h` (`h != 0`); `None` when it does not.
pub fn critical_beta(p: u32, h: f64) -> Result<Option<f64>> {
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidParameter("critical_beta needs a finite non-zero field"));
    }
    if p == 2 {
        return Ok(None);
    }
    let even = p % 2 == 0;
    let (b_check, h_check) = special_point(p, 1)?;
    let target = if even { h.abs() } else { h };
    if (target - h_check).abs() <= 1e-12 {
        return Ok(Some(b_check));
    }
    if target > h_check {
        return Ok(None);
    }
    let phi = |b: f64| -> Result<f64> { Ok(critical_curve(p, b)?.unwrap_or(0.0)) };
    let mut lo = b_check;
    let mut hi = if even { beta_tilde(p) } else { beta_tilde(p) + 1.0 };
    if !even {
        let mut expansions = 0;
        while phi(hi)? > target {
            hi = b_check + 2.0 * (hi - b_check);
            expansions += 1;
            if expansions > 60 {
                return Err(Error::Bracketing("critical_beta"));
            }
        }
    }
    // phi is strictly decreasing on (lo, hi)
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-14 {
            break;
        }
        if phi(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// `S_p(beta)`: fields `h` with `(beta, h)` in the closure of the critical set.
pub fn critical_fields(p: u32, beta: f64) -> Result<Vec<f64>> {
    if p == 2 {
        return Ok(if beta >= 0.5 { alloc::vec![0.0] } else { Vec::new() });
    }
    let b_check = beta_check(p);
    if (beta - b_check).abs() <= 1e-12 {
        let (_, hc) = special_point(p, 1)?;
        return Ok(if p % 2 == 0 { alloc::vec![-hc, hc] } else { alloc::vec![hc] });
    }
    if beta < b_check {
        return Ok(Vec::new());
    }
    match critical_curve(p, beta)? {
        None => Ok(alloc::vec![0.0]),
        Some(phi) if p % 2 == 0 && phi > 0.0 => Ok(alloc::vec![-phi, phi]),
        Some(phi) => Ok(alloc::vec![phi]),
    }
}

/// Result of classifying a rounded parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnappedPoint {
    pub class: PointClass,
    pub beta: f64,
    pub h: f64,
}

/// Classifies `(beta, h)` up to the stated rounding half-widths.
///
/// A point is reported special, strongly critical or critical when the box
/// `[beta +- d_beta] x [h +- d_h]` meets the corresponding structural set (in
/// that order of precedence); otherwise the exact point is analyzed. The
/// returned coordinates are the structural point that was matched.
pub fn classify_at_precision(beta: f64, h: f64, p: u32, d_beta: f64, d_h: f64) -> Result<SnappedPoint> {
    validate_point(beta, h, p)?;
    let within = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;
    if p >= 3 {
        let signs: &[i32] = if p % 2 == 0 { &[1, -1] } else { &[1] };
        for &s in signs {
            let (bc, hc) = special_point(p, s)?;
            if within(beta, bc, d_beta) && within(h, hc, d_h) {
                return Ok(SnappedPoint { class: PointClass::Special, beta: bc, h: hc });
            }
        }
        if p % 2 == 0 {
            let bt = beta_tilde(p);
            if within(beta, bt, d_beta) && h.abs() <= d_h {
                return Ok(SnappedPoint { class: PointClass::StronglyCritical, beta: bt, h: 0.0 });
            }
        }
        let b_lo = (beta - d_beta).max(beta_check(p) * (1.0 + 1e-12) + 1e-12);
        let b_hi = beta + d_beta;
        if b_lo < b_hi {
            let branch = |b: f64| -> Result<f64> { Ok(critical_curve(p, b)?.unwrap_or(0.0)) };
            let target = if p % 2 == 0 { h.abs() } else { h };
            let sign = if p % 2 == 0 && h < 0.0 { -1.0 } else { 1.0 };
            let (phi_hi, phi_lo) = (branch(b_hi)?, branch(b_lo)?);
            if phi_hi <= target + d_h && phi_lo >= target - d_h {
                let b_in = beta.clamp(b_lo, b_hi);
                let phi_b = branch(b_in)?;
                let snapped = if within(phi_b, target, d_h) {
                    (b_in, phi_b)
                } else {
                    let t = if phi_b > target { target + d_h } else { target - d_h };
                    let b = if t != 0.0 { critical_beta(p, sign * t)?.unwrap_or(b_in) } else { b_in };
                    (b, branch(b)?)
                };
                return Ok(SnappedPoint { class: PointClass::WeaklyCritical, beta: snapped.0, h: sign * snapped.1 });
            }
        }
    }
    let a = analyze(beta, h, p, &AnalysisConfig::default())?;
    Ok(SnappedPoint { class: a.classification, beta, h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(1.0).unwrap(), LN_2);
        assert_eq!(entropy(-1.0).unwrap(), LN_2);
        // 0.5 (1.5 ln 1.5 + 0.5 ln 0.5), via the series sum_k x^(2k) / (2k (2k-1))
        let series: f64 = (1..200).map(|k| libm::pow(0.5, 2.0 * k as f64) / ((2 * k) as f64 * (2 * k - 1) as f64)).sum();
        assert!((entropy(0.5).unwrap() - series).abs() < 1e-15);
        assert!(entropy(1.0 + 1e-12).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (beta, h, p, x) = (0.5, 0.2, 3, 0.3);
        let d = h_derivatives(beta, h, p, x, 4).unwrap();
        let step = 1e-4;
        let f = |k: usize, y: f64| h_derivatives(beta, h, p, y, 4).unwrap()[k];
        for k in 0..4 {
            let fd = (f(k, x + step) - f(k, x - step)) / (2.0 * step);
            assert!((fd - d[k + 1]).abs() < 1e-6, "order {}: {} vs {}", k + 1, fd, d[k + 1]);
        }
        // independent of the closed forms: fourth-order stencil on H itself
        let hh = |y: f64| f(0, y);
        let fd1 = (-hh(x + 2.0 * step) + 8.0 * hh(x + step) - 8.0 * hh(x - step) + hh(x - 2.0 * step)) / (12.0 * step);
        assert!((fd1 - d[1]).abs() < 1e-9);
    }

    #[test]
    fn second_derivative_at_origin() {
        for p in 3..8 {
            let d = h_derivatives(0.7, -0.3, p, 0.0, 2).unwrap();
            assert_eq!(d[2], -1.0);
        }
        assert!(h_derivatives(0.1, 0.0, 3, 1.0, 2).is_err());
    }

    #[test]
    fn special_point_is_double_root() {
        let (b, hc) = special_point(4, 1).unwrap();
        let d = h_derivatives(b, hc, 4, sqrt(0.5), 2).unwrap();
        assert!(d[1].abs() < 1e-8 && d[2].abs() < 1e-8);
        assert!((b - 1.0 / 3.0).abs() < 1e-12);
        assert!((hc - 0.40997).abs() < 5e-6);
        let (b3, _) = special_point(3, 1).unwrap();
        assert!((b3 - sqrt(3.0) / 4.0).abs() < 1e-12);
        assert!(special_point(3, -1).is_err());
        assert!(special_point(2, 1).is_err());
    }

    #[test]
    fn special_points_classify_special() {
        for p in 3..8 {
            let signs: &[i32] = if p % 2 == 0 { &[1, -1] } else { &[1] };
            for &s in signs {
                let (b, hc) = special_point(p, s).unwrap();
                let a = analyze(b, hc, p, &cfg()).unwrap();
                assert_eq!(a.classification, PointClass::Special, "p={p} s={s}");
                assert!(a.fourth_derivs[0] < 0.0);
                let m = sqrt(1.0 - 2.0 / p as f64);
                assert!((a.maximizers[0] - s as f64 * m).abs() < 1e-3);
            }
        }
        let a = analyze(0.5, 0.0, 2, &cfg()).unwrap();
        assert_eq!(a.classification, PointClass::Special);
    }

    #[test]
    fn regular_point_from_first_figure() {
        let a = analyze(0.2, 0.1, 4, &cfg()).unwrap();
        assert_eq!(a.classification, PointClass::Regular);
        assert_eq!(a.maximizers.len(), 1);
        assert!(a.second_derivs[0] < 0.0);
        assert!(a.weights.is_empty());
    }

    #[test]
    fn free_spins_regular_at_zero() {
        let a = analyze(0.0, 0.0, 3, &cfg()).unwrap();
        assert_eq!(a.maximizers, alloc::vec![0.0]);
        assert_eq!(a.second_derivs, alloc::vec![-1.0]);
    }

    #[test]
    fn beta_tilde_values() {
        assert!((beta_tilde(2) - 0.5).abs() < 1e-8);
        let b4 = beta_tilde(4);
        // mpmath, 40 digits: 0.688801373948790991539801069868924294194
        assert!((b4 - 0.688_801_373_948_791).abs() < 1e-10, "{b4}");
        let b5 = beta_tilde(5);
        assert!((b5 - 0.692_132_736_808_969_6).abs() < 1e-10, "{b5}");
        assert!(beta_tilde(3) <= beta_tilde(4));
        for p in 3..8 {
            assert!(beta_check(p) < beta_tilde(p));
        }
    }

    #[test]
    fn strongly_critical_and_odd_threshold() {
        let bt = beta_tilde(4);
        let a = analyze(bt, 0.0, 4, &cfg()).unwrap();
        assert_eq!(a.classification, PointClass::StronglyCritical);
        assert_eq!(a.maximizers.len(), 3);
        assert!(a.maximizers[1].abs() < 1e-12);
        assert!((a.maximizers[0] + a.maximizers[2]).abs() < 1e-12);
        assert!((a.weights[0] - a.weights[2]).abs() < 1e-10);
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        for p in [3, 5, 7] {
            let bt = beta_tilde(p);
            let a = analyze(bt, 0.0, p, &cfg()).unwrap();
            assert_eq!(a.classification, PointClass::WeaklyCritical, "p={p}");
            assert!(a.maximizers[0].abs() < 1e-12);
        }
    }

    #[test]
    fn critical_curve_values() {
        let phi = critical_curve(4, 0.57).unwrap().unwrap();
        // mpmath root of the equal-maxima condition at beta = 0.57
        assert!((phi - 0.121_258_895_319_883_8).abs() < 1e-9, "{phi}");
        let a = analyze(0.57, phi, 4, &cfg()).unwrap();
        assert_eq!(a.classification, PointClass::WeaklyCritical);
        assert_eq!(critical_curve(4, 0.75).unwrap(), Some(0.0));
        assert_eq!(critical_curve(4, beta_tilde(4)).unwrap(), None);
        assert!(critical_curve(4, 0.3).is_err());
        let phi3 = critical_curve(3, beta_tilde(3)).unwrap().unwrap();
        assert!(phi3.abs() < 1e-9);
        assert!(critical_curve(3, 2.0).unwrap().unwrap() < 0.0);
    }

    #[test]
    fn critical_curve_limit_at_special_beta() {
        for p in [3u32, 4, 5] {
            let (bc, hc) = special_point(p, 1).unwrap();
            let m = sqrt((p as f64 - 2.0) / p as f64);
            let limit = atanh(m) - p as f64 * bc * libm::pow(m, p as f64 - 1.0);
            assert!((limit - hc).abs() < 1e-12);
            let near = critical_curve(p, bc + 1e-6).unwrap().unwrap();
            assert!((near - limit).abs() < 1e-3, "p={p}: {near} vs {limit}");
        }
    }

    #[test]
    fn critical_curve_decreasing() {
        let (bc, _) = special_point(4, 1).unwrap();
        let bt = beta_tilde(4);
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let b = bc + (bt - bc) * i as f64 / 50.0;
            let phi = critical_curve(4, b).unwrap().unwrap();
            assert!(phi < prev);
            prev = phi;
        }
    }

    #[test]
    fn critical_beta_inverts_curve() {
        let phi = critical_curve(4, 0.6).unwrap().unwrap();
        let b = critical_beta(4, phi).unwrap().unwrap();
        assert!((b - 0.6).abs() < 1e-9);
        let b = critical_beta(4, -phi).unwrap().unwrap();
        assert!((b - 0.6).abs() < 1e-9);
        let phi3 = critical_curve(3, 1.3).unwrap().unwrap();
        let b3 = critical_beta(3, phi3).unwrap().unwrap();
        assert!((b3 - 1.3).abs() < 1e-9);
        assert_eq!(critical_beta(4, 0.5).unwrap(), None);
    }

    #[test]
    fn critical_fields_sets() {
        assert!(critical_fields(4, 0.2).unwrap().is_empty());
        let s = critical_fields(4, 0.57).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[1] - 0.121_258_895).abs() < 1e-8 && s[0] == -s[1]);
        assert_eq!(critical_fields(4, 0.9).unwrap(), alloc::vec![0.0]);
        assert_eq!(critical_fields(3, 0.9).unwrap().len(), 1);
        assert_eq!(critical_fields(4, 1.0 / 3.0).unwrap().len(), 2);
    }

    #[test]
    fn grid_scan_agrees_at_generic_points() {
        for &(b, h, p) in &[(0.2, 0.1, 4), (0.57, 0.1, 4), (0.9, -0.2, 3), (1.1, 0.05, 5), (0.8, 0.0, 2)] {
            let exact = stationary_points(b, h, p).len();
            assert_eq!(scan_root_count(b, h, p, 4096), exact, "({b},{h},{p})");
            assert_eq!(scan_root_count(b, h, p, 4 * 4096), exact);
            let verified = AnalysisConfig { verify_with_grid: true, ..cfg() };
            assert!(analyze(b, h, p, &verified).is_ok());
        }
    }

    #[test]
    fn rounded_caption_points() {
        let s = classify_at_precision(0.57, 0.12159, 4, 5e-3, 5e-6).unwrap();
        assert_eq!(s.class, PointClass::WeaklyCritical);
        let s = classify_at_precision(0.3333, 0.40997, 4, 5e-5, 5e-6).unwrap();
        assert_eq!(s.class, PointClass::Special);
        let s = classify_at_precision(0.6888, 0.0, 4, 5e-5, 0.0).unwrap();
        assert_eq!(s.class, PointClass::StronglyCritical);
        let s = classify_at_precision(0.2, 0.1, 4, 0.05, 0.05).unwrap();
        assert_eq!(s.class, PointClass::Regular);
    }
}
