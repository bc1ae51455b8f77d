//! Marginal maximum-likelihood estimates of `h` (with `beta` known) and of
//! `beta` (with `h` known), and their confidence intervals.
//!
//! Both estimating equations are strictly monotone: `d/dh E[m] = N Var(m)` and
//! `d/dbeta E[m^p] = N Var(m^p)`. The solver brackets the root by doubling and
//! then runs Newton steps guarded by bisection.

use alloc::vec::Vec;
use libm::{fabs, sqrt};

use crate::error::{Error, Result};
use crate::hfunc::{critical_beta, critical_fields, h_second};
use crate::model::Lattice;
use crate::special::{normal_quantile, powi, signed_pow};

const MAX_DOUBLINGS: usize = 60;
const MAX_ITERATIONS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;

/// Whether the ML estimate is a real number or escapes to an infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Existence {
    Finite,
    PlusInfinity,
    MinusInfinity,
}

impl Existence {
    pub fn tag(self) -> &'static str {
        match self {
            Existence::Finite => "finite",
            Existence::PlusInfinity => "+inf",
            Existence::MinusInfinity => "-inf",
        }
    }
}

/// Outcome of one ML solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    /// The estimate, or `+-inf` matching `existence`.
    pub estimate: f64,
    pub existence: Existence,
    /// `|E[statistic] - observed|` at the returned root (0 for sentinels).
    pub residual: f64,
    pub iterations: usize,
}

impl EstimateReport {
    fn sentinel(existence: Existence) -> Self {
        let estimate = if existence == Existence::PlusInfinity { f64::INFINITY } else { f64::NEG_INFINITY };
        Self { estimate, existence, residual: 0.0, iterations: 0 }
    }

    pub fn is_finite(&self) -> bool {
        self.existence == Existence::Finite
    }
}

/// Confidence set: an interval united with finitely many isolated points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Critical-set points added to the interval, increasing.
    pub augmentation: Vec<f64>,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains_regular(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Membership in the augmented set.
    pub fn contains(&self, x: f64) -> bool {
        self.contains_regular(x) || self.augmentation.iter().any(|&a| fabs(a - x) <= 1e-12 * (1.0 + fabs(a)))
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Reusable solver for one `(N, p)`.
#[derive(Debug, Clone)]
pub struct MleSolver {
    lattice: Lattice,
    min_pow: f64,
    max_pow: f64,
}

fn check_sigma(sigma_bar: f64) -> Result<()> {
    if !(fabs(sigma_bar) <= 1.0) {
        return Err(Error::Domain { function: "ML estimate", value: sigma_bar });
    }
    Ok(())
}

impl MleSolver {
    pub fn new(n: usize, p: u32) -> Result<Self> {
        Self::from_lattice(Lattice::new(n, p)?)
    }

    pub fn from_lattice(lattice: Lattice) -> Result<Self> {
        let pows = lattice.support_pow();
        let min_pow = pows.iter().copied().fold(f64::INFINITY, f64::min);
        let max_pow = pows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { lattice, min_pow, max_pow })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Existence of the field estimate for an observed magnetization.
    pub fn h_existence(&self, sigma_bar: f64) -> Existence {
        if sigma_bar >= 1.0 {
            Existence::PlusInfinity
        } else if sigma_bar <= -1.0 {
            Existence::MinusInfinity
        } else {
            Existence::Finite
        }
    }

    /// Existence of the inverse-temperature estimate: finite exactly when
    /// `sigma_bar^p` lies strictly inside the range of `m^p` over the support.
    pub fn beta_existence(&self, sigma_bar: f64) -> Existence {
        let t = signed_pow(sigma_bar, self.lattice.p());
        if t >= self.max_pow {
            Existence::PlusInfinity
        } else if t <= self.min_pow {
            Existence::MinusInfinity
        } else {
            Existence::Finite
        }
    }

    pub fn mle_h(&self, sigma_bar: f64, beta: f64) -> Result<EstimateReport> {
        self.mle_h_from(sigma_bar, beta, None)
    }

    /// As [`mle_h`](Self::mle_h), starting Newton from `start` when given.
    pub fn mle_h_from(&self, sigma_bar: f64, beta: f64, start: Option<f64>) -> Result<EstimateReport> {
        check_sigma(sigma_bar)?;
        if !beta.is_finite() {
            return Err(Error::InvalidParameter("beta must be finite"));
        }
        match self.h_existence(sigma_bar) {
            Existence::Finite => {}
            e => return Ok(EstimateReport::sentinel(e)),
        }
        let eval = |h: f64| {
            let s = self.lattice.stats(beta, h);
            (s.mean - sigma_bar, self.lattice.n() as f64 * s.var)
        };
        solve_increasing(eval, -1.0, 1.0, start, "field estimate")
    }

    pub fn mle_beta(&self, sigma_bar: f64, h: f64) -> Result<EstimateReport> {
        self.mle_beta_from(sigma_bar, h, None)
    }

    pub fn mle_beta_from(&self, sigma_bar: f64, h: f64, start: Option<f64>) -> Result<EstimateReport> {
        check_sigma(sigma_bar)?;
        if !h.is_finite() {
            return Err(Error::InvalidParameter("h must be finite"));
        }
        match self.beta_existence(sigma_bar) {
            Existence::Finite => {}
            e => return Ok(EstimateReport::sentinel(e)),
        }
        let target = signed_pow(sigma_bar, self.lattice.p());
        let eval = |b: f64| {
            let s = self.lattice.stats(b, h);
            (s.mean_pow - target, self.lattice.n() as f64 * s.var_pow)
        };
        solve_increasing(eval, -1.0, 4.0, start, "inverse-temperature estimate")
    }

    /// Field estimates at every support atom `k` in `range`, warm-starting
    /// each solve from its neighbour.
    pub fn mle_h_atoms(&self, beta: f64, range: core::ops::Range<usize>) -> Result<Vec<EstimateReport>> {
        let mut out = Vec::with_capacity(range.len());
        let mut prev: Option<f64> = None;
        for k in range {
            let r = self.mle_h_from(self.lattice.support()[k], beta, prev)?;
            prev = if r.is_finite() { Some(r.estimate) } else { prev };
            out.push(r);
        }
        Ok(out)
    }

    /// Inverse-temperature estimates at every support atom `k` in `range`.
    pub fn mle_beta_atoms(&self, h: f64, range: core::ops::Range<usize>) -> Result<Vec<EstimateReport>> {
        let mut out = Vec::with_capacity(range.len());
        let mut prev: Option<f64> = None;
        for k in range {
            let r = self.mle_beta_from(self.lattice.support()[k], h, prev)?;
            prev = if r.is_finite() { Some(r.estimate) } else { prev };
            out.push(r);
        }
        Ok(out)
    }
}

/// Root of an increasing function given as `x -> (f(x), f'(x))`.
fn solve_increasing(
    eval: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: Option<f64>,
    what: &'static str,
) -> Result<EstimateReport> {
    let mut iterations = 0;
    if let Some(s) = start.filter(|s| s.is_finite()) {
        // tighten the default bracket around the warm start
        let (f, _) = eval(s);
        iterations += 1;
        if f == 0.0 {
            return Ok(EstimateReport { estimate: s, existence: Existence::Finite, residual: 0.0, iterations });
        }
        let mut step = 1e-3 * (1.0 + fabs(s));
        let dir = if f > 0.0 { -1.0 } else { 1.0 };
        let mut other = s + dir * step;
        let mut doublings = 0;
        loop {
            let (g, _) = eval(other);
            iterations += 1;
            if (g > 0.0) != (f > 0.0) || g == 0.0 {
                break;
            }
            step *= 2.0;
            other = s + dir * step;
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::Bracketing(what));
            }
        }
        if dir < 0.0 {
            lo = other;
            hi = s;
        } else {
            lo = s;
            hi = other;
        }
    } else {
        let mut doublings = 0;
        while eval(lo).0 > 0.0 {
            lo *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::Bracketing(what));
            }
        }
        doublings = 0;
        while eval(hi).0 < 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::Bracketing(what));
            }
        }
    }

    let mut x = start.filter(|s| *s > lo && *s < hi).unwrap_or(0.5 * (lo + hi));
    let mut best = (f64::INFINITY, x);
    for _ in 0..MAX_ITERATIONS {
        let (f, df) = eval(x);
        iterations += 1;
        if fabs(f) < best.0 {
            best = (fabs(f), x);
        }
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - f / df;
        let next = if df > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == x || hi - lo <= 4.0 * f64::EPSILON * (1.0 + fabs(x)) {
            if fabs(f) < 1e-14 || next == x {
                break;
            }
        }
        if fabs(next - x) <= 1e-15 * (1.0 + fabs(x)) && fabs(f) < 1e-13 {
            x = next;
            let (f2, _) = eval(x);
            iterations += 1;
            if fabs(f2) < best.0 {
                best = (fabs(f2), x);
            }
            break;
        }
        x = next;
    }
    let (residual, estimate) = best;
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::NoConvergence(what));
    }
    Ok(EstimateReport { estimate, existence: Existence::Finite, residual, iterations })
}

/// ML estimate of `h` from an observed magnetization with `beta` known.
pub fn mle_h(sigma_bar: f64, beta: f64, p: u32, n: usize) -> Result<EstimateReport> {
    MleSolver::new(n, p)?.mle_h(sigma_bar, beta)
}

/// ML estimate of `beta` (over the whole real line) with `h` known.
pub fn mle_beta(sigma_bar: f64, h: f64, p: u32, n: usize) -> Result<EstimateReport> {
    MleSolver::new(n, p)?.mle_beta(sigma_bar, h)
}

fn z_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1]"));
    }
    Ok(normal_quantile(1.0 - alpha / 2.0))
}

/// Plug-in standard error `sqrt(-H''(sigma_bar) / N)`; `H''` does not depend
/// on `h`.
fn plug_in_scale(sigma_bar: f64, beta: f64, p: u32, n: usize) -> Result<f64> {
    if fabs(sigma_bar) >= 1.0 {
        return Err(Error::Domain { function: "plug-in variance", value: sigma_bar });
    }
    let h2 = h_second(beta, p, sigma_bar);
    if !(h2 < 0.0) {
        return Err(Error::PlugInVariance(h2));
    }
    Ok(sqrt(-h2 / n as f64))
}

/// Regular interval for `h` around a finite estimate.
pub fn regular_interval_h(estimate: f64, sigma_bar: f64, beta: f64, p: u32, n: usize, alpha: f64) -> Result<(f64, f64)> {
    let half = z_value(alpha)? * plug_in_scale(sigma_bar, beta, p, n)?;
    Ok((estimate - half, estimate + half))
}

/// Regular interval for `beta` around a finite estimate, with the plug-in
/// curvature evaluated at the estimate.
pub fn regular_interval_beta(estimate: f64, sigma_bar: f64, p: u32, n: usize, alpha: f64) -> Result<(f64, f64)> {
    if sigma_bar == 0.0 {
        return Err(Error::InvalidParameter("the interval for beta needs sigma_bar != 0"));
    }
    let factor = powi(1.0 / fabs(sigma_bar), p - 1) / p as f64;
    let half = z_value(alpha)? * factor * plug_in_scale(sigma_bar, estimate, p, n)?;
    Ok((estimate - half, estimate + half))
}

/// Confidence set for `h`: the plug-in interval united with the fields at
/// which `(beta, h)` is critical or special.
pub fn ci_h(sigma_bar: f64, beta: f64, p: u32, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    let est = mle_h(sigma_bar, beta, p, n)?;
    if !est.is_finite() {
        return Err(Error::InvalidParameter("the interval for h needs a finite estimate"));
    }
    let (lower, upper) = regular_interval_h(est.estimate, sigma_bar, beta, p, n, alpha)?;
    Ok(ConfidenceInterval { lower, upper, augmentation: critical_fields(p, beta)?, level: 1.0 - alpha })
}

/// Confidence set for `beta` (`h != 0`): the plug-in interval united with the
/// inverse temperature at which the line of field `h` meets the critical set.
pub fn ci_beta(sigma_bar: f64, h: f64, p: u32, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    if h == 0.0 {
        return Err(Error::InvalidParameter("the interval for beta needs h != 0"));
    }
    if sigma_bar == 0.0 {
        return Err(Error::InvalidParameter("the interval for beta needs sigma_bar != 0"));
    }
    let est = mle_beta(sigma_bar, h, p, n)?;
    if !est.is_finite() {
        return Err(Error::InvalidParameter("the interval for beta needs a finite estimate"));
    }
    let (lower, upper) = regular_interval_beta(est.estimate, sigma_bar, p, n, alpha)?;
    let augmentation = critical_beta(p, h)?.into_iter().collect();
    Ok(ConfidenceInterval { lower, upper, augmentation, level: 1.0 - alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{moment, ModelParams};

    #[test]
    fn symmetric_zero_field() {
        let r = mle_h(0.0, 0.4, 4, 100).unwrap();
        assert!(r.estimate.abs() < 1e-12);
    }

    #[test]
    fn boundary_sentinels() {
        assert_eq!(mle_h(1.0, 0.2, 4, 500).unwrap().existence, Existence::PlusInfinity);
        assert_eq!(mle_h(-1.0, 0.2, 4, 500).unwrap().existence, Existence::MinusInfinity);
        assert_eq!(mle_beta(1.0, 0.1, 4, 500).unwrap().existence, Existence::PlusInfinity);
        assert_eq!(mle_beta(-1.0, 0.1, 4, 500).unwrap().existence, Existence::PlusInfinity);
        assert_eq!(mle_beta(-1.0, 0.1, 3, 500).unwrap().existence, Existence::MinusInfinity);
        assert_eq!(mle_beta(0.0, 0.1, 4, 500).unwrap().existence, Existence::MinusInfinity);
        assert!(mle_h(1.5, 0.2, 4, 10).is_err());
    }

    #[test]
    fn odd_n_even_p_smallest_atoms_escape() {
        let solver = MleSolver::new(7, 4).unwrap();
        assert_eq!(solver.beta_existence(1.0 / 7.0), Existence::MinusInfinity);
        assert_eq!(solver.beta_existence(-1.0 / 7.0), Existence::MinusInfinity);
        assert_eq!(solver.beta_existence(3.0 / 7.0), Existence::Finite);
    }

    #[test]
    fn round_trips() {
        let params = ModelParams::new(0.2, 0.1, 4, 500).unwrap();
        let u1 = moment(&params, 1).unwrap();
        let r = mle_h(u1, 0.2, 4, 500).unwrap();
        assert!((r.estimate - 0.1).abs() < 1e-9, "{}", r.estimate);
        assert!(r.residual < 1e-10);

        let params = ModelParams::new(0.5, 0.2, 3, 500).unwrap();
        let u3 = moment(&params, 3).unwrap();
        let sigma = libm::cbrt(u3);
        let r = mle_beta(sigma, 0.2, 3, 500).unwrap();
        assert!((r.estimate - 0.5).abs() < 1e-9, "{}", r.estimate);
    }

    #[test]
    fn warm_start_agrees() {
        let solver = MleSolver::new(300, 4).unwrap();
        let cold = solver.mle_h(0.31, 0.5).unwrap();
        let warm = solver.mle_h_from(0.31, 0.5, Some(cold.estimate + 0.2)).unwrap();
        assert!((cold.estimate - warm.estimate).abs() < 1e-10);
        let atoms = solver.mle_h_atoms(0.5, 1..300).unwrap();
        for w in atoms.windows(2) {
            assert!(w[0].estimate < w[1].estimate);
        }
    }

    #[test]
    fn intervals() {
        let ci = ci_h(0.3, 0.2, 4, 1000, 0.05).unwrap();
        assert!(ci.augmentation.is_empty());
        let est = mle_h(0.3, 0.2, 4, 1000).unwrap().estimate;
        assert!(ci.contains(est));
        let expected = 1.959_963_984_540_054 * sqrt(-h_second(0.2, 4, 0.3) / 1000.0);
        assert!((ci.width() - 2.0 * expected).abs() < 1e-12);

        let ci = ci_h(0.1, 0.57, 4, 1000, 0.05).unwrap();
        assert_eq!(ci.augmentation.len(), 2);

        let j = ci_beta(0.87, 0.2, 3, 10_000, 0.05).unwrap();
        let bh = mle_beta(0.87, 0.2, 3, 10_000).unwrap().estimate;
        let expected = 2.0 * 1.959_963_984_540_054 * powi(1.0 / 0.87, 2) / 3.0 * sqrt(-h_second(bh, 3, 0.87) / 10_000.0);
        assert!((j.width() - expected).abs() < 1e-12);
        assert!(ci_beta(0.6, 0.0, 3, 100, 0.05).is_err());
        assert!(ci_beta(0.0, 0.2, 3, 100, 0.05).is_err());

        let degenerate = ci_h(0.3, 0.2, 4, 1000, 1.0).unwrap();
        assert_eq!(degenerate.width(), 0.0);
    }

    #[test]
    fn plug_in_variance_flagged() {
        // between the two maximizers at a critical point H'' is positive
        assert!(matches!(ci_h(0.45, 0.57, 4, 1000, 0.05), Err(Error::PlugInVariance(_))));
    }
}
