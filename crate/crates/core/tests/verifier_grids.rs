use harq_core::verifier::{
    closed_form_duality, convexity_probe, monotonicity_sweep, oracle_equivalence, psi_agreement, stationarity_sweep,
    CheckGrid, ChordSpace, OracleConfig,
};
use harq_core::{IrThreshold, ProtocolKind, Rate};

#[test]
fn duality_grid_is_clean() {
    for rep in closed_form_duality(&CheckGrid::duality()).unwrap() {
        assert!(rep.passed, "{rep:#?}");
        assert_eq!(rep.evaluated, 3 * 8 * 4 * 4);
    }
}

#[test]
fn stationarity_grid_and_control() {
    let reps = stationarity_sweep(&CheckGrid::duality()).unwrap();
    assert!(reps[0].passed, "{:#?}", reps[0]);
    assert!(reps[1].passed, "{:#?}", reps[1]);
}

#[test]
fn oracle_grid_matches() {
    let rep = oracle_equivalence(&CheckGrid::oracle(), &OracleConfig::default()).unwrap();
    assert!(rep.passed, "{rep:#?}");
    assert!(rep.worst_deviation < 1e-3);
}

#[test]
fn psi_full_suite() {
    let rep = psi_agreement(5, &[0.5, 1.0, 2.0, 3.0]).unwrap();
    assert!(rep.passed, "{rep:#?}");
}

#[test]
fn arq_schedules_increase() {
    let grid = CheckGrid::monotonicity().with_protocols(&[ProtocolKind::Arq]);
    let reps = monotonicity_sweep(&grid).unwrap();
    assert!(reps[0].passed, "{:#?}", reps[0]);
}

// The optimum itself decreases between the last two rounds here; the check
// has to report it rather than pass.
#[test]
fn ir_monotonicity_violation_is_reported() {
    let mut grid = CheckGrid::monotonicity().with_protocols(&[ProtocolKind::Ir]);
    grid.rounds = vec![4];
    grid.rates = vec![2.0];
    grid.targets = vec![1e-5];
    let rep = &monotonicity_sweep(&grid).unwrap()[0];
    assert!(!rep.passed);
    assert!(rep.worst_deviation > 1.0);
}

#[test]
fn linear_chords_expose_objective_non_convexity() {
    let rate = Rate::new(1.0).unwrap();
    let [objective, pdp] = convexity_probe(
        ProtocolKind::Arq,
        2,
        rate,
        IrThreshold::default(),
        10_000,
        11,
        ChordSpace::Linear,
    )
    .unwrap();
    assert!(objective.violations > 0);
    assert!(pdp.passed, "{pdp:#?}");
    for rep in convexity_probe(
        ProtocolKind::Arq,
        2,
        rate,
        IrThreshold::default(),
        10_000,
        11,
        ChordSpace::Log,
    )
    .unwrap()
    {
        assert!(rep.passed, "{rep:#?}");
    }
}
