use censcov::onesample::sample_loglik;
use censcov::simulate::{generate_trial, SimConfig};
use censcov::{
    convert_weibull, fit_censored_sample, fit_weibull_l1, normal_mean_diff, CensoredValue, CovariateDensity,
    ExactObservation, Family, FitOptions, WeibullPH,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn normal_draws(n: usize, mu: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mu, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn left_censor(x: &[f64], share: f64) -> Vec<CensoredValue> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let c = sorted[(share * x.len() as f64) as usize];
    x.iter().map(|&v| if v < c { CensoredValue::left(c) } else { CensoredValue::exact(v) }).collect()
}

#[test]
fn normal_fit_without_censoring_is_closed_form() {
    let x = normal_draws(300, 1.2, 0.7, 1);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let data: Vec<_> = x.iter().copied().map(CensoredValue::exact).collect();
    let fit = fit_censored_sample(&data, Family::Normal, &FitOptions::default()).unwrap();
    let [m, s] = fit.estimates();
    assert!((m - mean).abs() < 1e-6 && (s - sd).abs() < 1e-6, "{m} {s} vs {mean} {sd}");
}

#[test]
fn censoring_costs_information() {
    let x = normal_draws(500, -2.467, 1.712, 2);
    let opts = FitOptions::default();
    let exact: Vec<_> = x.iter().copied().map(CensoredValue::exact).collect();
    let full = fit_censored_sample(&exact, Family::Normal, &opts).unwrap();
    let cens = fit_censored_sample(&left_censor(&x, 0.3), Family::Normal, &opts).unwrap();
    for (a, b) in full.std_errors().iter().zip(cens.std_errors()) {
        assert!(b.unwrap() > a.unwrap());
    }
    assert_eq!(cens.n(), 500);
    assert!(cens.n_left > 100);
}

#[test]
fn fit_beats_the_truth() {
    let data = left_censor(&normal_draws(400, 0.5, 2.0, 3), 0.25);
    for family in [Family::Normal, Family::Logistic] {
        let fit = fit_censored_sample(&data, family, &FitOptions::default()).unwrap();
        let truth = match family {
            Family::Normal => CovariateDensity::normal(0.5, 2.0).unwrap(),
            _ => CovariateDensity::new(Family::Logistic, &[0.5, 2.0 * 3f64.sqrt() / std::f64::consts::PI]).unwrap(),
        };
        assert!(fit.loglik >= sample_loglik(&data, &truth) - 1e-6);
        for c in &fit.coefficients {
            assert!(c.ci_low.unwrap() <= c.estimate && c.estimate <= c.ci_high.unwrap());
        }
    }
}

#[test]
fn positive_families_recover_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gamma = rand_distr::Gamma::new(2.5, 1.0 / 1.5).unwrap();
    let x: Vec<f64> = (0..1500).map(|_| gamma.sample(&mut rng)).collect();
    let data = left_censor(&x, 0.2);
    let fit = fit_censored_sample(&data, Family::Gamma, &FitOptions::default()).unwrap();
    for (est, (truth, se)) in fit.estimates().iter().zip([2.5, 1.5].iter().zip(fit.std_errors())) {
        assert!((est - truth).abs() < 3.0 * se.unwrap(), "{est} vs {truth}");
    }
}

#[test]
fn mean_difference_is_translation_equivariant() {
    let s1 = left_censor(&normal_draws(120, -1.5, 1.5, 5), 0.1);
    let s2 = left_censor(&normal_draws(150, -3.5, 1.5, 6), 0.3);
    let opts = FitOptions::default();
    let base = normal_mean_diff(&s1, &s2, &opts).unwrap();
    let moved: Vec<_> = s1.iter().map(|v| v.shifted(0.8)).collect();
    let shifted = normal_mean_diff(&moved, &s2, &opts).unwrap();
    assert!((shifted.mu1.estimate - base.mu1.estimate - 0.8).abs() < 1e-6);
    assert!((shifted.delta.estimate - base.delta.estimate - 0.8).abs() < 1e-6);
    assert!((shifted.sigma1.estimate - base.sigma1.estimate).abs() < 1e-6);
}

fn reference_rows(seed: u64) -> Vec<ExactObservation> {
    let cfg = SimConfig { cens_prop_r: 0.0, cens_prop_o: 0.0, n_per_arm: 150, seed, ..Default::default() };
    generate_trial(&cfg, &mut cfg.replication_rng(0)).unwrap().imputed()
}

fn names() -> Vec<String> {
    vec!["mrd".into(), "tmt".into()]
}

#[test]
fn weibull_regression_recovers_truth() {
    let data = reference_rows(11);
    let fit = fit_weibull_l1(&data, &names(), &FitOptions::default()).unwrap();
    let ph = convert_weibull(&fit, 0.95).unwrap();
    for (c, truth) in [(&ph.lambda, 0.75), (&ph.gamma, 3.1), (&ph.beta[0], 0.7), (&ph.beta[1], 0.0)] {
        assert!((c.estimate - truth).abs() < 3.0 * c.std_error.unwrap(), "{} {}", c.name, c.estimate);
    }
    for (hr, b) in ph.hazard_ratios.iter().zip(&ph.beta) {
        assert_eq!(hr.ci_low.unwrap(), b.ci_low.unwrap().exp());
        assert_eq!(hr.ci_high.unwrap(), b.ci_high.unwrap().exp());
    }
}

#[test]
fn duplicated_rows_scale_standard_errors() {
    let data = reference_rows(12);
    let twice: Vec<_> = data.iter().chain(&data).cloned().collect();
    let opts = FitOptions::default();
    let a = fit_weibull_l1(&data, &names(), &opts).unwrap();
    let b = fit_weibull_l1(&twice, &names(), &opts).unwrap();
    for (x, y) in a.parameter_vector().iter().zip(b.parameter_vector()) {
        assert!((x - y).abs() < 1e-6);
    }
    for (x, y) in a.std_errors().unwrap().iter().zip(b.std_errors().unwrap()) {
        assert!((y / x - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{x} {y}");
    }
}

#[test]
fn no_covariate_regression_matches_one_sample_weibull() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let truth = WeibullPH::new(0.75, 3.1).unwrap();
    let times: Vec<f64> = (0..300)
        .map(|_| {
            let u: f64 = 1.0 - rng.random::<f64>();
            (-u.ln() / truth.lambda()).powf(1.0 / truth.gamma())
        })
        .collect();
    let rows: Vec<_> = times.iter().map(|&t| ExactObservation { time: t, event: true, covariates: vec![] }).collect();
    let opts = FitOptions::default();
    let reg = convert_weibull(&fit_weibull_l1(&rows, &[], &opts).unwrap(), 0.95).unwrap();
    let sample: Vec<_> = times.iter().copied().map(CensoredValue::exact).collect();
    let one = fit_censored_sample(&sample, Family::Weibull, &opts).unwrap();
    let ph = match one.density {
        CovariateDensity::Weibull { shape, scale } => censcov::WeibullShapeScale::new(shape, scale).unwrap().to_ph(),
        _ => unreachable!(),
    };
    assert!((reg.lambda.estimate - ph.lambda()).abs() < 1e-4);
    assert!((reg.gamma.estimate - ph.gamma()).abs() < 1e-4);
}

#[test]
fn delta_method_gamma_se_agrees_with_bootstrap() {
    let data = reference_rows(14);
    let opts = FitOptions::default();
    let fit = fit_weibull_l1(&data, &names(), &opts).unwrap();
    let ph = convert_weibull(&fit, 0.95).unwrap();
    let horizon = SimConfig::default().horizon;
    let (lambda, gamma) = (ph.lambda.estimate, ph.gamma.estimate);
    let beta: Vec<f64> = ph.beta.iter().map(|c| c.estimate).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let boot: Vec<f64> = (0..200)
        .map(|_| {
            let resample: Vec<_> = data
                .iter()
                .map(|o| {
                    let rate = lambda * o.covariates.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>().exp();
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let z = (-u.ln() / rate).powf(1.0 / gamma);
                    let (time, event) = if z <= horizon { (z, true) } else { (horizon, false) };
                    ExactObservation { time, event, covariates: o.covariates.clone() }
                })
                .collect();
            let f = fit_weibull_l1(&resample, &names(), &opts).unwrap();
            convert_weibull(&f, 0.95).unwrap().gamma.estimate
        })
        .collect();
    let m = boot.iter().sum::<f64>() / 200.0;
    let sd = (boot.iter().map(|g| (g - m).powi(2)).sum::<f64>() / 199.0).sqrt();
    let se = ph.gamma.std_error.unwrap();
    assert!((se / sd - 1.0).abs() < 0.15, "delta {se} vs bootstrap {sd}");
}
