use censcov::simulate::{aggregate, generate_trial, run_replication, Method, SimConfig};
use censcov::{run_study, FitOptions};

#[test]
fn same_seed_same_report() {
    let cfg = SimConfig { replications: 4, n_per_arm: 60, ..Default::default() };
    let opts = FitOptions::default();
    let a = run_study(&cfg, &opts).unwrap();
    let b = run_study(&cfg, &opts).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let other = run_study(&SimConfig { seed: 7, ..cfg }, &opts).unwrap();
    assert_ne!(a, other);
}

#[test]
fn mse_identity_holds_for_every_summary() {
    let cfg = SimConfig { replications: 5, n_per_arm: 60, ..Default::default() };
    let report = run_study(&cfg, &FitOptions::default()).unwrap();
    for m in &report.methods {
        assert_eq!(m.n_used + m.n_failed, 5);
        for p in &m.parameters {
            assert!((p.mse - (p.bias * p.bias + p.variance)).abs() < 1e-14, "{p:?}");
            assert_eq!(p.bias, p.mean_estimate - p.truth);
        }
    }
    assert!(report.method(Method::CoxImputed).parameter("lambda").is_none());
}

#[test]
fn single_replication_report_is_the_fit() {
    let cfg = SimConfig { replications: 1, n_per_arm: 60, ..Default::default() };
    let opts = FitOptions::default();
    let rep = run_replication(&cfg, 0, &opts).unwrap();
    let report = aggregate(&cfg, std::slice::from_ref(&rep));
    let est = rep.estimates[0].as_ref().unwrap();
    let p = report.method(Method::CensoredCovariate).parameter("beta_mrd").unwrap();
    assert_eq!(p.bias, est.beta_mrd - 0.7);
    assert_eq!(p.variance, 0.0);
}

#[test]
fn left_censoring_shares_match_configuration() {
    let cfg = SimConfig::default();
    let n = cfg.n_per_arm as f64;
    let reps = 40;
    let mut shares = [0.0; 2];
    for r in 0..reps {
        let trial = generate_trial(&cfg, &mut cfg.replication_rng(r)).unwrap();
        for (i, o) in trial.observations.iter().enumerate() {
            if !o.x_cens.is_exact() {
                shares[trial.arm(i) as usize] += 1.0 / (n * reps as f64);
            }
        }
    }
    for (share, p) in shares.iter().zip([cfg.cens_prop_r, cfg.cens_prop_o]) {
        assert!((share - p).abs() < 2.0 * (p * (1.0 - p) / n).sqrt(), "{share} vs {p}");
    }
}

#[test]
fn endpoint_censoring_is_about_a_fifth() {
    let cfg = SimConfig::default();
    let mut censored = 0usize;
    for r in 0..20 {
        let trial = generate_trial(&cfg, &mut cfg.replication_rng(r)).unwrap();
        censored += trial.observations.iter().filter(|o| !o.event).count();
    }
    let share = censored as f64 / (20.0 * 400.0);
    assert!((share - 0.2).abs() < 0.03, "{share}");
}
