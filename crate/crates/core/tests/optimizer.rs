use rfiqkd::channel::ChannelParams;
use rfiqkd::finite_key::{KeyMode, SecurityParams};
use rfiqkd::optimizer::{optimize_rate, OptimizerSettings, ParameterVector, RateProblem};
use rfiqkd::rfi::ProtocolVariant;
use rfiqkd::sdp::DEFAULT_RELAXATION;

fn problem(km: f64) -> RateProblem {
    RateProblem {
        variant: ProtocolVariant::ThreeState,
        channel: ChannelParams::default().at_distance(km),
        security: SecurityParams::default(),
        n_pulses: 1e10,
        mode: KeyMode::Finite,
    }
}

#[test]
fn short_distance_optimum() {
    let p = problem(15.0);
    let settings = OptimizerSettings::default();
    let best = optimize_rate(&p, &settings).unwrap();
    let x = best.params;
    assert!(x.is_feasible());
    assert!(x.mu > x.nu && x.nu > 0.0 && x.p_mu + x.p_nu <= 1.0);
    assert!((1e-3..=1e-2).contains(&best.rate), "{}", best.rate);
    assert!(best.rate >= best.best_start_rate);
    // Loose check against the implemented operating point.
    assert!((x.mu - 0.58).abs() <= 0.15 && (x.nu - 0.25).abs() <= 0.15 && (x.pr_z - 0.90).abs() <= 0.15, "{x:?}");
    let table = ParameterVector { pr_z: 0.90, p_mu: 0.60, p_nu: 0.31, mu: 0.58, nu: 0.25 };
    let table_rate = p.rate(&table, DEFAULT_RELAXATION);
    assert!(best.rate >= 0.99 * table_rate, "{} < {}", best.rate, table_rate);
    // Identical inputs give bit-identical results.
    assert_eq!(optimize_rate(&p, &settings).unwrap(), best);
}

#[test]
fn beyond_cutoff_is_zero() {
    let settings = OptimizerSettings { iterations: 20, ..OptimizerSettings::default() };
    let best = optimize_rate(&problem(250.0), &settings).unwrap();
    assert_eq!(best.rate, 0.0);
    assert!(best.params.is_feasible());
}

#[test]
fn bb84_finite_is_rejected() {
    let p = RateProblem { variant: ProtocolVariant::Bb84ThreeState, ..problem(10.0) };
    assert!(optimize_rate(&p, &OptimizerSettings::default()).is_err());
}
