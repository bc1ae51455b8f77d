//! Kolmogorov-Smirnov distances between step distributions (samples or exact
//! discrete laws) and reference laws that may carry atoms.
//!
//! Between consecutive evaluation points the step CDF is constant and the
//! reference CDF is monotone, so the supremum is attained at a point or as a
//! left limit there. Evaluating both `F(x)` and `F(x-)` at every step location
//! and every reference atom therefore gives the exact supremum.

use alloc::vec::Vec;

use crate::limit::LimitLaw;

/// KS distance between a step law given as `(location, mass)` pairs and a
/// reference law described by its CDF, left-limit CDF and atom locations.
///
/// Locations may be infinite; masses must sum to one.
pub fn ks_weighted_with(
    points: &[(f64, f64)],
    cdf: impl Fn(f64) -> f64,
    cdf_left: impl Fn(f64) -> f64,
    reference_atoms: &[f64],
) -> f64 {
    let mut steps: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0).collect();
    steps.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("locations are not NaN"));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(steps.len());
    for (x, w) in steps {
        match merged.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => merged.push((x, w)),
        }
    }
    let locations: Vec<f64> = merged.iter().map(|p| p.0).collect();
    let mut below = Vec::with_capacity(merged.len() + 1);
    below.push(0.0);
    let mut acc = 0.0;
    for (_, w) in &merged {
        acc += w;
        below.push(acc);
    }
    // step CDF at x and just below x
    let step_at = |x: f64| below[locations.partition_point(|&l| l <= x)];
    let step_left = |x: f64| below[locations.partition_point(|&l| l < x)];

    let mut d: f64 = 0.0;
    let mut probe = |x: f64| {
        d = d.max((step_at(x) - cdf(x)).abs());
        d = d.max((step_left(x) - cdf_left(x)).abs());
    };
    for &x in &locations {
        probe(x);
    }
    for &x in reference_atoms {
        probe(x);
    }
    d.min(1.0)
}

/// KS distance between a step law and a [`LimitLaw`].
pub fn ks_weighted(points: &[(f64, f64)], law: &LimitLaw) -> f64 {
    let atoms: Vec<f64> = law.atoms().iter().map(|a| a.0).collect();
    ks_weighted_with(points, |x| law.cdf(x), |x| law.cdf_left(x), &atoms)
}

/// KS distance between the empirical law of `samples` and a [`LimitLaw`].
pub fn ks_sample(samples: &[f64], law: &LimitLaw) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let w = 1.0 / samples.len() as f64;
    let points: Vec<(f64, f64)> = samples.iter().map(|&x| (x, w)).collect();
    ks_weighted(&points, law)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_is_zero() {
        let law = LimitLaw::mixture(alloc::vec![(0.25, LimitLaw::point(-1.0)), (0.75, LimitLaw::point(2.0))]).unwrap();
        assert_eq!(ks_weighted(&[(-1.0, 0.25), (2.0, 0.75)], &law), 0.0);
    }

    #[test]
    fn jump_discrepancy_counted() {
        let law = LimitLaw::point(0.0);
        // all mass slightly right of the atom: sup is 1
        assert_eq!(ks_weighted(&[(1e-9, 1.0)], &law), 1.0);
        let law = LimitLaw::mixture(alloc::vec![(0.5, LimitLaw::point(0.0)), (0.5, LimitLaw::gaussian(0.0, 1.0).unwrap())]).unwrap();
        let d = ks_weighted(&[(0.0, 0.5), (0.0, 0.5)], &law);
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn minus_infinity_atoms() {
        let law = LimitLaw::mixture(alloc::vec![
            (0.4, LimitLaw::point(f64::NEG_INFINITY)),
            (0.6, LimitLaw::point(0.5)),
        ])
        .unwrap();
        let d = ks_weighted(&[(f64::NEG_INFINITY, 0.5), (0.5, 0.5)], &law);
        assert!((d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_sample_against_gaussian() {
        let law = LimitLaw::gaussian(0.0, 1.0).unwrap();
        let d = ks_sample(&[0.0], &law);
        assert!((d - 0.5).abs() < 1e-15);
    }
}
