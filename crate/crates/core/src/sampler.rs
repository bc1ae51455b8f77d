//! Exact sampling from the model through the law of the average magnetization.
//!
//! The Gibbs weight depends on a configuration only through its magnetization,
//! so drawing `m` from its exact law and then placing the `+1` spins uniformly
//! at random gives an exact draw of the full configuration.

use alloc::vec::Vec;
use libm::exp;

use crate::error::{Error, Result};
use crate::model::{MagnetizationLaw, ModelParams};
use crate::rng::StreamRng;
use crate::special::log_add_exp;

/// Default cap on `N` for [`sample_spins`].
pub const DEFAULT_SPIN_CAP: usize = 1_000_000;

/// Inverse-CDF sampler over the atoms of a [`MagnetizationLaw`].
#[derive(Debug, Clone)]
pub struct MagnetizationSampler {
    support: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MagnetizationSampler {
    pub fn new(law: &MagnetizationLaw) -> Self {
        let mut acc = f64::NEG_INFINITY;
        let mut cumulative: Vec<f64> = law
            .log_prob()
            .iter()
            .map(|&lp| {
                acc = log_add_exp(acc, lp);
                exp(acc)
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { support: law.support().to_vec(), cumulative }
    }

    /// Index of one draw in the support.
    pub fn sample_index(&self, rng: &mut StreamRng) -> usize {
        let u = rng.uniform();
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.cumulative.len() - 1)
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.support[self.sample_index(rng)]
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }
}

/// One exact draw of the average magnetization.
pub fn sample_mean(law: &MagnetizationLaw, rng: &mut StreamRng) -> f64 {
    MagnetizationSampler::new(law).sample(rng)
}

/// One exact draw of a full spin configuration (entries `+1`/`-1`).
pub fn sample_spins(params: &ModelParams, rng: &mut StreamRng, cap: usize) -> Result<Vec<i8>> {
    params.validate()?;
    if params.n > cap {
        return Err(Error::SizeCap { n: params.n, cap });
    }
    let law = crate::model::magnetization_law(params)?;
    let k = MagnetizationSampler::new(&law).sample_index(rng);
    Ok(spins_with_plus_count(params.n, k, rng))
}

/// Uniformly random configuration of length `n` with exactly `plus` entries `+1`.
pub fn spins_with_plus_count(n: usize, plus: usize, rng: &mut StreamRng) -> Vec<i8> {
    // partial Fisher-Yates over the minority sign
    let (minority, sign, background) = if plus <= n - plus { (plus, 1i8, -1i8) } else { (n - plus, -1i8, 1i8) };
    let mut spins = alloc::vec![background; n];
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..minority {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
        spins[idx[i]] = sign;
    }
    spins
}
