//! Boundary tracing on small ensembles.

use swipt::fading::{sample_rician, RicianConfig};
use swipt::region::{self, Scheme, SchemeKind, TraceOptions};
use swipt::siso::LinkParams;
use swipt::Error;

#[test]
fn boundaries_start_and_end_at_the_corners() {
    let e = sample_rician(&RicianConfig::default(), 2000, 8).unwrap();
    let prm = LinkParams::default();
    for s in Scheme::siso_all() {
        let b = region::trace_boundary(&e, &prm, s, 6, &TraceOptions::default()).unwrap();
        let (r_max, q_max) = region::corner_points(&e, &prm, s).unwrap();
        assert_eq!(b.points.len(), 6);
        assert!((b.points[0].rate - r_max).abs() <= 1e-3 * r_max, "{s}");
        assert!((b.q_max() - q_max).abs() <= 1e-12 * q_max, "{s}");
        let last = b.points.last().unwrap();
        assert!(last.energy >= q_max * (1.0 - 1e-3), "{s}: {} vs {q_max}", last.energy);
        if s.kind != SchemeKind::UpperBound {
            assert!(last.rate <= 1e-3 * r_max, "{s}: {}", last.rate);
        }
        assert!(b.monotonicity_violations().is_empty(), "{s}");
        assert!(b.points.iter().all(|p| p.rate >= 0.0 && p.energy >= 0.0));
    }
}

#[test]
fn upper_bound_without_csit_is_a_box() {
    let e = sample_rician(&RicianConfig::default(), 1000, 2).unwrap();
    let prm = LinkParams::default();
    let s = Scheme::new(SchemeKind::UpperBound, false);
    let b = region::trace_boundary(&e, &prm, s, 5, &TraceOptions::default()).unwrap();
    assert!(b.points.iter().all(|p| p.rate == b.r_max() && p.energy == b.q_max()));
}

#[test]
fn simo_schemes_nest() {
    let cfg = RicianConfig {
        num_antennas: 3,
        ..RicianConfig::default()
    };
    let e = sample_rician(&cfg, 800, 6).unwrap();
    let prm = LinkParams::default();
    let opts = TraceOptions::default();
    for csit in [false, true] {
        let trace = |k| region::trace_boundary(&e, &prm, Scheme::new(k, csit), 6, &opts).unwrap();
        let ups = trace(SchemeKind::Ups);
        let exh = trace(SchemeKind::AntennaSwitchingExhaustive);
        let apx = trace(SchemeKind::AntennaSwitchingApprox);
        assert!(region::region_dominates(&ups, &exh, 5e-3).unwrap().holds, "csit={csit}");
        assert!(region::region_dominates(&exh, &apx, 5e-3).unwrap().holds, "csit={csit}");
        assert!(apx.selection.is_some());
        assert_eq!(apx.selection.unwrap().size_bound_violations, 0);
    }
}

#[test]
fn exhaustive_switching_refuses_large_arrays() {
    let cfg = RicianConfig {
        num_antennas: 21,
        ..RicianConfig::default()
    };
    let e = sample_rician(&cfg, 4, 1).unwrap();
    let s = Scheme::new(SchemeKind::AntennaSwitchingExhaustive, false);
    let err = region::trace_boundary(&e, &LinkParams::default(), s, 3, &TraceOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Capacity { antennas: 21, limit: 20 }), "{err}");
}

#[test]
fn solver_failures_name_the_target() {
    let e = sample_rician(&RicianConfig::default(), 200, 1).unwrap();
    let opts = TraceOptions {
        solver: swipt::duality::SolverOptions {
            max_iterations: 1,
            residual_tol: 1e-12,
            ..Default::default()
        },
        ..TraceOptions::default()
    };
    let s = Scheme::new(SchemeKind::TimeSwitching, true);
    match region::trace_boundary(&e, &LinkParams::default(), s, 4, &opts) {
        Err(Error::AtTarget { target, .. }) => assert!(target > 0.0),
        other => panic!("expected a tagged failure, got {other:?}"),
    }
}
