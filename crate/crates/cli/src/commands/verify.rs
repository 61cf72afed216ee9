use std::io::Write;

use serde::Serialize;

use harq_core::verifier::{
    closed_form_duality, convexity_probe, monotonicity_sweep, oracle_equivalence, psi_agreement, stationarity_sweep,
    CheckGrid, ChordSpace, OracleConfig, VerificationReport,
};
use harq_core::{IrThreshold, ProtocolKind, Rate};

use crate::args::{Coords, Suite, VerifyArgs};
use crate::{CliError, EXIT_FAILED, EXIT_OK};

/// Round counts probed for convexity.
pub const CONVEXITY_ROUNDS: [usize; 2] = [2, 4];
pub const PSI_MAX_ROUND: usize = 5;
pub const PSI_RATES: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

#[derive(Debug, Serialize)]
pub struct VerifyOutput {
    pub passed: bool,
    pub checks: Vec<VerificationReport>,
}

fn convexity(args: &VerifyArgs) -> Result<Vec<VerificationReport>, CliError> {
    let spaces: &[ChordSpace] = match args.convexity_coords {
        Coords::Linear => &[ChordSpace::Linear],
        Coords::Log => &[ChordSpace::Log],
        Coords::Both => &[ChordSpace::Linear, ChordSpace::Log],
    };
    let rate = Rate::new(1.0)?;
    let mut out = Vec::new();
    for &space in spaces {
        for p in ProtocolKind::ALL {
            for m in CONVEXITY_ROUNDS {
                out.extend(convexity_probe(
                    p,
                    m,
                    rate,
                    IrThreshold::default(),
                    args.samples,
                    args.seed,
                    space,
                )?);
            }
        }
    }
    Ok(out)
}

pub fn checks(args: &VerifyArgs) -> Result<Vec<VerificationReport>, CliError> {
    let want = |s: Suite| args.suite == s || args.suite == Suite::All;
    let mut out = Vec::new();
    if want(Suite::Kkt) {
        out.extend(closed_form_duality(&CheckGrid::duality())?);
        out.extend(stationarity_sweep(&CheckGrid::duality())?);
    }
    if want(Suite::Psi) {
        out.push(psi_agreement(PSI_MAX_ROUND, &PSI_RATES)?);
    }
    if want(Suite::Oracle) {
        let config = OracleConfig {
            seed: args.seed,
            ..OracleConfig::default()
        };
        out.push(oracle_equivalence(&CheckGrid::oracle(), &config)?);
    }
    if want(Suite::Monotonic) {
        out.extend(monotonicity_sweep(&CheckGrid::monotonicity())?);
    }
    if want(Suite::Convexity) {
        out.extend(convexity(args)?);
    }
    Ok(out)
}

pub fn run(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let checks = checks(args)?;
    for c in &checks {
        writeln!(
            err,
            "{} {}: worst {:e} (tolerance {:e}) over {} points, {} violation(s)",
            if c.passed { "PASS" } else { "FAIL" },
            c.check,
            c.worst_deviation,
            c.tolerance,
            c.evaluated,
            c.violations
        )?;
    }
    let output = VerifyOutput {
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let mut json = serde_json::to_vec_pretty(&output)?;
    json.push(b'\n');
    match &args.out {
        Some(path) => {
            std::fs::write(path, &json).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?
        }
        None => out.write_all(&json)?,
    }
    Ok(if output.passed { EXIT_OK } else { EXIT_FAILED })
}
