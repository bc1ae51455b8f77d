//! Scalar special functions used throughout the crate.

use crate::error::{Error, Result};
use libm::{erf, erfc, exp, log, log1p, sqrt};

pub const LN_2: f64 = core::f64::consts::LN_2;

/// Natural log of the gamma function for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Continuous log-binomial coefficient `log Gamma(n+1) - log Gamma(k+1) - log Gamma(n-k+1)`.
pub fn log_binomial(n: f64, k: f64) -> Result<f64> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::Domain { function: "log_binomial", value: n });
    }
    if !(k >= 0.0 && k <= n) {
        return Err(Error::Domain { function: "log_binomial", value: k });
    }
    if k == 0.0 || k == n {
        return Ok(0.0);
    }
    Ok(ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// Numerically stable `log(sum(exp(x_i)))`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + log(sum)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

/// `P(|Z| <= x)` for standard normal `Z`.
pub fn normal_two_sided(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erf(x / core::f64::consts::SQRT_2)
    }
}

/// Standard normal quantile (Wichura's AS 241, about 1e-16 relative accuracy).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = sqrt(-log(r));
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// `(n)!!` as a float; `(-1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> f64 {
    let mut acc: u128 = 1;
    let mut k = n;
    while k > 1 {
        acc *= k as u128;
        k -= 2;
    }
    acc as f64
}

/// `x^n` for a non-negative integer exponent by repeated squaring.
#[inline]
pub fn powi(x: f64, n: u32) -> f64 {
    let mut base = x;
    let mut e = n;
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Sign-aware power: `|x|^n` with the sign of `x` restored for odd `n`.
///
/// Guarantees `signed_pow(-x, n) == -signed_pow(x, n)` (odd `n`) and
/// `signed_pow(-x, n) == signed_pow(x, n)` (even `n`) bit for bit.
#[inline]
pub fn signed_pow(x: f64, n: u32) -> f64 {
    let mag = powi(x.abs(), n);
    if n % 2 == 1 && x < 0.0 {
        -mag
    } else {
        mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_binomial_integer_cases() {
        assert!((log_binomial(4.0, 2.0).unwrap() - log(6.0)).abs() < 1e-14);
        assert_eq!(log_binomial(7.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_binomial(7.0, 7.0).unwrap(), 0.0);
        // factorial ratios up to n = 30
        for n in 0u32..=30 {
            let mut c: u128 = 1;
            for k in 0..=n {
                let lb = log_binomial(n as f64, k as f64).unwrap();
                assert!((lb - log(c as f64)).abs() < 1e-12, "n={n} k={k}");
                c = c * (n - k) as u128 / (k + 1) as u128;
            }
        }
    }

    #[test]
    fn log_binomial_fractional_matches_high_precision() {
        // mpmath: loggamma(11) - loggamma(4.5) - loggamma(7.5)
        let expected = 5.116_311_765_474_340_119_563;
        assert!((log_binomial(10.0, 3.5).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn log_binomial_domain_errors() {
        assert!(log_binomial(-1.0, 0.0).is_err());
        assert!(log_binomial(3.0, 3.5).is_err());
        assert!(log_binomial(3.0, -0.1).is_err());
    }

    #[test]
    fn quantile_reference_values() {
        // scipy.special.ndtri
        let cases = [
            (0.5, 0.0),
            (0.975, 1.959_963_984_540_054),
            (0.995, 2.575_829_303_548_900_4),
            (0.9, 1.281_551_565_544_600_4),
            (1e-10, -6.361_340_902_404_056),
            (0.02, -2.053_748_910_631_823),
            (1.0 - 1e-12, 7.034_486_910_047_835_6),
            (0.3, -0.524_400_512_708_040_9),
        ];
        for (p, z) in cases {
            let got = normal_quantile(p);
            assert!((got - z).abs() <= 1e-12 * (1.0 + z.abs()), "p={p}: {got} vs {z}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-14);
        }
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let xs = [1000.0, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_add_exp(-1000.0, -1000.0) - (-1000.0 + LN_2)).abs() < 1e-12);
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial(-1), 1.0);
        assert_eq!(double_factorial(0), 1.0);
        assert_eq!(double_factorial(3), 3.0);
        assert_eq!(double_factorial(5), 15.0);
        assert_eq!(double_factorial(7), 105.0);
    }

    #[test]
    fn signed_pow_symmetry() {
        for &x in &[0.3, 0.7, 1.0 / 3.0, 0.999] {
            for n in 0..9 {
                let a = signed_pow(x, n);
                let b = signed_pow(-x, n);
                if n % 2 == 1 {
                    assert_eq!(a, -b);
                } else {
                    assert_eq!(a, b);
                }
            }
        }
    }
}
