//! Dual solvers on sampled ensembles through the public API.

use swipt::duality::{self, CsitCorners, SolverOptions, SplitCsit, SplitNoCsit, SwitchCsit, SwitchNoCsit};
use swipt::fading::{sample_rician, FadingEnsemble, RicianConfig};
use swipt::siso::LinkParams;
use swipt::Error;

fn ensemble(n: usize) -> FadingEnsemble {
    sample_rician(&RicianConfig::default(), n, 4).unwrap()
}

#[test]
fn constant_power_rate_falls_as_energy_target_rises() {
    let e = ensemble(3000);
    let prm = LinkParams::default();
    let q_max = duality::q_max_no_csit(&e, &prm);
    let mut last = f64::INFINITY;
    for k in 0..8 {
        let q = q_max * k as f64 / 8.0;
        let sol = duality::solve_p1(&SplitNoCsit(prm), &e, q, 1e-7 * q_max).unwrap();
        assert!(sol.summary.avg_energy >= q - 1e-7 * q_max);
        assert!(sol.summary.avg_rate <= last + 1e-12);
        last = sol.summary.avg_rate;
    }
}

#[test]
fn time_switching_meets_the_target_from_above() {
    let e = ensemble(3000);
    let prm = LinkParams::default();
    let q = 0.6 * duality::q_max_no_csit(&e, &prm);
    let sol = duality::solve_p1(&SwitchNoCsit(prm), &e, q, 1e-9).unwrap();
    assert!(sol.summary.avg_energy >= q);
}

#[test]
fn targets_above_the_maximum_are_rejected() {
    let e = ensemble(500);
    let prm = LinkParams::default();
    let q_max = duality::q_max_no_csit(&e, &prm);
    let err = duality::solve_p1(&SplitNoCsit(prm), &e, 1.01 * q_max, 1e-9).unwrap_err();
    assert!(matches!(err, Error::InfeasibleTarget { .. }), "{err}");
    let corners = CsitCorners::new(&e, &prm);
    let err = duality::solve_p2(&SplitCsit(prm), &e, &corners, 1.01 * corners.q_max, &SolverOptions::default())
        .unwrap_err();
    assert!(matches!(err, Error::InfeasibleTarget { .. }), "{err}");
    assert!(duality::solve_p1(&SplitNoCsit(prm), &e, -1.0, 1e-9).is_err());
}

#[test]
fn power_control_policies_respect_both_constraints() {
    let e = ensemble(3000);
    let prm = LinkParams::default();
    let opts = SolverOptions::default();
    let corners = CsitCorners::new(&e, &prm);
    for u in [0.2, 0.5, 0.8] {
        let q = u * corners.q_max;
        let dps = duality::solve_p2(&SplitCsit(prm), &e, &corners, q, &opts).unwrap();
        let ts = duality::solve_p2(&SwitchCsit(prm), &e, &corners, q, &opts).unwrap();
        for sol in [&dps, &ts] {
            assert!(sol.summary.avg_energy >= q * (1.0 - opts.residual_tol), "{u}");
            assert!(sol.summary.avg_power <= prm.tx_power_avg * (1.0 + opts.residual_tol), "{u}");
            assert!(sol.summary.per_state.iter().all(|d| d.power <= prm.tx_power_peak * (1.0 + 1e-12)));
        }
        assert!(dps.summary.avg_rate >= ts.summary.avg_rate * (1.0 - 1e-3));
    }
}

#[test]
fn transmitter_knowledge_never_hurts() {
    let e = ensemble(3000);
    let prm = LinkParams::default();
    let corners = CsitCorners::new(&e, &prm);
    let q_max = duality::q_max_no_csit(&e, &prm);
    assert!(corners.q_max >= q_max);
    for u in [0.1, 0.5, 0.9] {
        let q = u * q_max;
        let no = duality::solve_p1(&SplitNoCsit(prm), &e, q, 1e-7 * q_max).unwrap();
        let yes = duality::solve_p2(&SplitCsit(prm), &e, &corners, q, &SolverOptions::default()).unwrap();
        assert!(yes.summary.avg_rate >= no.summary.avg_rate * (1.0 - 1e-3), "{u}");
    }
}
