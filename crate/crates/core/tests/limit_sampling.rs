use pspin_cw_core::hfunc::special_point;
use pspin_cw_core::ks::{ks_sample, ks_weighted_with};
use pspin_cw_core::limit::{beta_mle_limit, g_law, gamma_p, h_mle_limit, quartic_law, sigma_limit, GKind};
use pspin_cw_core::sampler::MagnetizationSampler;
use pspin_cw_core::{analyze, beta_tilde, magnetization_law, AnalysisConfig, LimitLaw, ModelParams, RngStream};

fn draws(law: &LimitLaw, n: usize, stream: u64) -> Vec<f64> {
    let mut rng = RngStream::new(99, stream).open();
    (0..n).map(|_| law.sample(&mut rng)).collect()
}

#[test]
fn continuous_samplers_match_their_cdfs() {
    let laws = [
        LimitLaw::gaussian(0.3, 2.0).unwrap(),
        LimitLaw::half_normal(true, 0.7).unwrap(),
        LimitLaw::half_normal(false, 1.3).unwrap(),
        quartic_law(-24.0, 0.0).unwrap(),
        quartic_law(-5.0, 1.0).unwrap(),
    ];
    for (i, law) in laws.iter().enumerate() {
        let d = ks_sample(&draws(law, 1_000_000, i as u64), law);
        assert!(d < 0.01, "{}: KS {d}", law.id());
    }
}

#[test]
fn half_normal_is_folded_gaussian() {
    let folded: Vec<f64> = draws(&LimitLaw::gaussian(0.0, 1.7).unwrap(), 1_000_000, 10).iter().map(|x| x.abs()).collect();
    let d = ks_sample(&folded, &LimitLaw::half_normal(true, 1.7).unwrap());
    assert!(d < 0.01, "KS {d}");
}

#[test]
fn mixture_sampler_matches_cdf_with_atoms() {
    let a = analyze(0.57, pspin_cw_core::critical_curve(4, 0.57).unwrap().unwrap(), 4, &AnalysisConfig::default()).unwrap();
    let law = h_mle_limit(&a).unwrap().law;
    let d = ks_sample(&draws(&law, 200_000, 20), &law);
    assert!(d < 0.01, "KS {d}");
    let strong = beta_mle_limit(&analyze(beta_tilde(4), 0.0, 4, &AnalysisConfig::default()).unwrap()).unwrap().law;
    let d = ks_sample(&draws(&strong, 200_000, 21), &strong);
    assert!(d < 0.01, "KS {d}");
}

#[test]
fn cdfs_are_monotone_and_proper() {
    let cfg = AnalysisConfig::default();
    let (bs, hs) = special_point(4, 1).unwrap();
    let special = analyze(bs, hs, 4, &cfg).unwrap();
    let laws = vec![
        sigma_limit(&analyze(0.2, 0.1, 4, &cfg).unwrap()).unwrap().law,
        sigma_limit(&special).unwrap().law,
        h_mle_limit(&analyze(beta_tilde(4), 0.0, 4, &cfg).unwrap()).unwrap().law,
        beta_mle_limit(&analyze(0.3, 0.0, 4, &cfg).unwrap()).unwrap().law,
        beta_mle_limit(&analyze(beta_tilde(3), 0.0, 3, &cfg).unwrap()).unwrap().law,
        g_law(GKind::G1, &special).unwrap().law,
        g_law(GKind::G2, &special).unwrap().law,
    ];
    for law in &laws {
        let mut prev = 0.0;
        for i in 0..1000 {
            let x = -10.0 + 20.0 * i as f64 / 999.0;
            let c = law.cdf(x);
            assert!(c >= prev - 1e-15, "{} at {x}", law.id());
            assert!(law.cdf_left(x) <= c + 1e-15);
            prev = c;
        }
        assert!(law.cdf(1e6) > 1.0 - 1e-12, "{}", law.id());
    }
}

#[test]
fn quartic_fourth_moment_positive() {
    let law = quartic_law(-24.0, 0.0).unwrap();
    let xs = draws(&law, 200_000, 30);
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / xs.len() as f64;
    // exact value Gamma(5/4) / Gamma(1/4) = 1/4 for exp(-x^4)
    assert!((m4 - 0.25).abs() < 0.01, "{m4}");
}

#[test]
fn gamma_four_by_simulation() {
    let mut rng = RngStream::new(1, 1).open();
    let n = 10_000_000;
    let hits = (0..n).filter(|_| rng.standard_normal().powi(4) <= 3.0).count() as f64 / n as f64;
    let g = gamma_p(4);
    let se = (g * (1.0 - g) / n as f64).sqrt();
    assert!((hits - g).abs() < 3.0 * se, "{hits} vs {g}");
}

#[test]
fn sampled_magnetization_fair_coins() {
    let law = magnetization_law(&ModelParams::new(0.0, 0.0, 2, 10_000).unwrap()).unwrap();
    let sampler = MagnetizationSampler::new(&law);
    let mut rng = RngStream::new(4, 4).open();
    let n = 100_000;
    let mean = (0..n).map(|_| sampler.sample(&mut rng)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 3.0 * 4.0 / ((n * 10_000) as f64).sqrt());
}

#[test]
fn sampled_clt_at_regular_point() {
    let n = 20_000;
    let law = magnetization_law(&ModelParams::new(0.2, 0.1, 4, n).unwrap()).unwrap();
    let limit = sigma_limit(&analyze(0.2, 0.1, 4, &AnalysisConfig::default()).unwrap()).unwrap();
    let sampler = MagnetizationSampler::new(&law);
    let mut rng = RngStream::new(6, 0).open();
    let xs: Vec<f64> = (0..100_000).map(|_| limit.transform(sampler.sample(&mut rng), n)).collect();
    let d = ks_sample(&xs, &limit.law);
    assert!(d < 0.02, "KS {d}");
}

#[test]
fn weighted_ks_with_custom_reference() {
    // a uniform reference on [0, 1] against a two-point law
    let d = ks_weighted_with(&[(0.25, 0.5), (0.75, 0.5)], |x: f64| x.clamp(0.0, 1.0), |x: f64| x.clamp(0.0, 1.0), &[]);
    assert!((d - 0.25).abs() < 1e-15);
}
