//! Exact finite-N quantities: partition function, magnetization law, moments.
//!
//! All sums run over the `N + 1` values `m_k = -1 + 2k/N` of the average
//! magnetization, with the binomial coefficient carrying the degeneracy. Every
//! probability lives in log space until the final weighted sums.

use alloc::vec::Vec;
use libm::{exp, log};

use crate::error::{Error, Result};
use crate::hfunc::{HAnalysis, PointClass};
use crate::special::{log_binomial, log_sum_exp, signed_pow, LN_2};

/// Parameters of the p-spin Curie-Weiss model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub h: f64,
    pub p: u32,
    pub n: usize,
}

impl ModelParams {
    pub fn new(beta: f64, h: f64, p: u32, n: usize) -> Result<Self> {
        let params = Self { beta, h, p, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || !self.h.is_finite() {
            return Err(Error::InvalidParameter("beta and h must be finite"));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidParameter("beta must be non-negative"));
        }
        if self.p < 2 {
            return Err(Error::InvalidParameter("p must be at least 2"));
        }
        if self.n < 1 {
            return Err(Error::InvalidParameter("N must be at least 1"));
        }
        Ok(())
    }
}

/// Support points, their `p`-th powers and log-binomial weights for a fixed
/// `(N, p)`.
///
/// Building a lattice costs `N + 1` log-gamma evaluations; evaluating a law on
/// it afterwards is a single exponential per atom. The estimators reuse one
/// lattice across many `(beta, h)` evaluations.
#[derive(Debug, Clone)]
pub struct Lattice {
    n: usize,
    p: u32,
    m: Vec<f64>,
    m_pow: Vec<f64>,
    log_binom: Vec<f64>,
}

/// First two moments of `sigma_bar` and of `sigma_bar^p` under one law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawStats {
    pub log_partition: f64,
    pub mean: f64,
    pub var: f64,
    pub mean_pow: f64,
    pub var_pow: f64,
}

impl Lattice {
    pub fn new(n: usize, p: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("N must be at least 1"));
        }
        if p < 2 {
            return Err(Error::InvalidParameter("p must be at least 2"));
        }
        let nf = n as f64;
        let m: Vec<f64> = (0..=n).map(|k| (2.0 * k as f64 - nf) / nf).collect();
        let m_pow = m.iter().map(|&x| signed_pow(x, p)).collect();
        // evaluate each pair (k, N-k) once so the two entries agree bit for bit
        let mut log_binom = alloc::vec![0.0; n + 1];
        for k in 0..=n / 2 {
            let v = log_binomial(nf, k as f64).expect("0 <= k <= n");
            log_binom[k] = v;
            log_binom[n - k] = v;
        }
        Ok(Self { n, p, m, m_pow, log_binom })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn support(&self) -> &[f64] {
        &self.m
    }

    /// `p`-th powers of the support points.
    pub fn support_pow(&self) -> &[f64] {
        &self.m_pow
    }

    /// Unnormalized log-weights `log C(N, k) + N (beta m^p + h m) - N log 2`.
    ///
    /// `beta` may be negative here: the estimating equation for `beta` is
    /// solved on the whole real line.
    pub fn log_terms(&self, beta: f64, h: f64) -> Vec<f64> {
        let nf = self.n as f64;
        let shift = nf * LN_2;
        self.log_binom
            .iter()
            .zip(self.m.iter().zip(&self.m_pow))
            .map(|(&lb, (&m, &mp))| lb + nf * (beta * mp + h * m) - shift)
            .collect()
    }

    pub fn log_partition(&self, beta: f64, h: f64) -> f64 {
        log_sum_exp(&self.log_terms(beta, h))
    }

    pub fn law(&self, beta: f64, h: f64) -> MagnetizationLaw {
        let mut log_prob = self.log_terms(beta, h);
        let log_partition = log_sum_exp(&log_prob);
        for lp in log_prob.iter_mut() {
            *lp -= log_partition;
        }
        // F_N is only representable to ulp(F_N); a second pass removes that offset
        let residue = log_sum_exp(&log_prob);
        for lp in log_prob.iter_mut() {
            *lp -= residue;
        }
        MagnetizationLaw { p: self.p, support: self.m.clone(), log_prob, log_partition }
    }

    /// Mean and variance of `sigma_bar` and `sigma_bar^p` in one sweep.
    pub fn stats(&self, beta: f64, h: f64) -> LawStats {
        let terms = self.log_terms(beta, h);
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = terms.iter().map(|&t| exp(t - max)).collect();
        let total = pair_sum(&weights, |_, w| w);
        let mean = pair_sum(&weights, |k, w| w * self.m[k]) / total;
        let mean_pow = pair_sum(&weights, |k, w| w * self.m_pow[k]) / total;
        let var = pair_sum(&weights, |k, w| {
            let d = self.m[k] - mean;
            w * d * d
        }) / total;
        let var_pow = pair_sum(&weights, |k, w| {
            let d = self.m_pow[k] - mean_pow;
            w * d * d
        }) / total;
        LawStats { log_partition: max + log(total), mean, var, mean_pow, var_pow }
    }
}

/// Sums `f(k, w[k])` pairing atom `k` with its mirror `N - k`.
///
/// For a law symmetric under `m -> -m` every pair of an odd function cancels
/// exactly, so odd moments come out as exact zeros.
fn pair_sum(weights: &[f64], f: impl Fn(usize, f64) -> f64) -> f64 {
    let n = weights.len() - 1;
    let mut acc = 0.0;
    for k in 0..=n / 2 {
        let mirror = n - k;
        if mirror == k {
            acc += f(k, weights[k]);
        } else {
            acc += f(k, weights[k]) + f(mirror, weights[mirror]);
        }
    }
    acc
}

/// Exact law of the average magnetization.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationLaw {
    p: u32,
    support: Vec<f64>,
    log_prob: Vec<f64>,
    log_partition: f64,
}

impl MagnetizationLaw {
    /// System size `N`.
    pub fn n(&self) -> usize {
        self.support.len() - 1
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Atoms `m_k = -1 + 2k/N`, strictly increasing.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn log_prob(&self) -> &[f64] {
        &self.log_prob
    }

    /// `F_N = log Z_N`.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_prob.iter().map(|&lp| exp(lp)).collect()
    }

    /// `E[sigma_bar^order]`.
    pub fn moment(&self, order: u32) -> f64 {
        let probs = self.probs();
        pair_sum(&probs, |k, w| w * signed_pow(self.support[k], order))
    }

    /// `E[f(sigma_bar)]`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let probs = self.probs();
        pair_sum(&probs, |k, w| w * f(self.support[k]))
    }

    /// `P(sigma_bar in [lo, hi])`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.log_prob)
            .filter(|(&m, _)| m >= lo && m <= hi)
            .map(|(_, &lp)| exp(lp))
            .sum()
    }

    /// Index of the atom equal to `m` (to within a quarter lattice spacing).
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let n = self.n() as f64;
        let k = (m + 1.0) * n / 2.0;
        let r = libm::round(k);
        if (k - r).abs() < 0.25 && r >= 0.0 && r <= n {
            Some(r as usize)
        } else {
            None
        }
    }
}

pub fn magnetization_law(params: &ModelParams) -> Result<MagnetizationLaw> {
    params.validate()?;
    Ok(Lattice::new(params.n, params.p)?.law(params.beta, params.h))
}

pub fn log_partition(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    Ok(Lattice::new(params.n, params.p)?.log_partition(params.beta, params.h))
}

/// `u_{N,order} = E[sigma_bar^order]`.
pub fn moment(params: &ModelParams, order: u32) -> Result<f64> {
    if order < 1 {
        return Err(Error::InvalidParameter("moment order must be at least 1"));
    }
    Ok(magnetization_law(params)?.moment(order))
}

/// Two-term saddle-point expansion `N H(m*) - log[(m*^2 - 1) H''(m*)] / 2` of
/// the log-partition function at a regular point.
pub fn log_partition_expansion(params: &ModelParams, analysis: &HAnalysis) -> Result<f64> {
    params.validate()?;
    if analysis.classification != PointClass::Regular {
        return Err(Error::Classification {
            expected: PointClass::Regular.tag(),
            found: analysis.classification.tag(),
        });
    }
    let m = analysis.maximizers[0];
    let h2 = analysis.second_derivs[0];
    Ok(params.n as f64 * analysis.values[0] - 0.5 * log((m * m - 1.0) * h2))
}
