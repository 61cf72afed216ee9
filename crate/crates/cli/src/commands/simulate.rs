use std::io::Write;

use serde::Serialize;

use harq_core::outage::{exact_rayleigh_pdp, PdpLaw};
use harq_core::simulator::{empirical_power_metrics, PowerComparison};
use harq_core::{
    allocate, run_monte_carlo, AllocationRequest, DecisionMode, IrThreshold, PowerSchedule, ProtocolKind,
    SimulationConfig, SimulationReport,
};

use super::rate_spec;
use crate::args::{Decision, ReportFormat, SimulateArgs};
use crate::format::sig6;
use crate::{CliError, EXIT_OK};

/// Exact-Rayleigh comparisons use nested quadrature; beyond this many rounds
/// they are skipped.
pub const EXACT_ANALYTIC_MAX_ROUNDS: usize = 3;

#[derive(Debug, Serialize)]
pub struct SimulationRecord {
    pub rate: f64,
    pub n: Option<u32>,
    pub ir_threshold: IrThreshold,
    pub powers: Vec<f64>,
    pub report: SimulationReport,
    pub asymptotic_pdp: f64,
    pub exact_pdp: Option<f64>,
    /// `|empirical - exact| / sigma(exact)`.
    pub sigmas_from_exact: Option<f64>,
    pub power: Option<PowerComparison>,
}

fn mode(d: Decision) -> DecisionMode {
    match d {
        Decision::Exact => DecisionMode::Exact,
        Decision::Asymptotic => DecisionMode::Asymptotic,
        Decision::Fbl => DecisionMode::Fbl,
    }
}

pub fn record(args: &SimulateArgs) -> Result<SimulationRecord, CliError> {
    let spec = rate_spec(&args.rate)?;
    let rate = spec.rate();
    let protocol: ProtocolKind = args.protocol.into();
    let threshold: IrThreshold = args.ir_threshold.into();
    let schedule = if args.from_allocation {
        let (Some(m), Some(eps)) = (args.rounds, args.target) else {
            return Err(CliError::Usage("--from-allocation needs --rounds and --target".into()));
        };
        allocate(&AllocationRequest::new(protocol, m, spec, eps).with_ir_threshold(threshold))?.schedule
    } else {
        PowerSchedule::new(args.powers.clone())?
    };
    let config = SimulationConfig::new(args.trials, args.seed, mode(args.decision)).with_ir_threshold(threshold);
    let report = run_monte_carlo(protocol, &schedule, spec, &config)?;

    let m = schedule.rounds();
    let asymptotic_pdp = PdpLaw::new(protocol, m, rate, threshold)?.pdp(schedule.powers())?;
    let exact_pdp = if m <= EXACT_ANALYTIC_MAX_ROUNDS {
        Some(exact_rayleigh_pdp(protocol, schedule.powers(), rate, threshold)?)
    } else {
        None
    };
    let sigmas_from_exact = match (exact_pdp, report.mode) {
        (Some(e), DecisionMode::Exact) if e > 0.0 && e < 1.0 => Some(report.sigmas_from(e)),
        _ => None,
    };
    let power = match report.mode {
        DecisionMode::Exact if m > EXACT_ANALYTIC_MAX_ROUNDS => None,
        DecisionMode::Fbl => None,
        _ => Some(empirical_power_metrics(&report, &schedule, rate, threshold)?),
    };
    Ok(SimulationRecord {
        rate: rate.nats(),
        n: spec.blocklength().map(|b| b.channel_uses()),
        ir_threshold: threshold,
        powers: schedule.powers().to_vec(),
        report,
        asymptotic_pdp,
        exact_pdp,
        sigmas_from_exact,
        power,
    })
}

fn write_text(r: &SimulationRecord, w: &mut dyn Write) -> std::io::Result<()> {
    let rep = &r.report;
    writeln!(w, "protocol        {}", rep.protocol)?;
    writeln!(w, "decision        {}", rep.mode)?;
    writeln!(
        w,
        "powers          {}",
        r.powers.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    )?;
    writeln!(w, "rate            {} nats/use", r.rate)?;
    writeln!(w, "trials          {}", rep.trials)?;
    writeln!(w, "seed            {}", rep.seed)?;
    writeln!(w, "failures        {}", rep.failures)?;
    writeln!(
        w,
        "empirical pdp   {:e} +/- {:e} (95%)",
        rep.empirical_pdp, rep.ci_half_width
    )?;
    writeln!(w, "asymptotic pdp  {:e}", r.asymptotic_pdp)?;
    if let Some(e) = r.exact_pdp {
        writeln!(w, "exact pdp       {e:e}")?;
    }
    if let Some(s) = r.sigmas_from_exact {
        writeln!(w, "deviation       {} sigma", sig6(s))?;
    }
    writeln!(w, "mean rounds     {}", sig6(rep.mean_rounds))?;
    writeln!(w, "mean power      {}", sig6(rep.mean_consumed_power))?;
    if let Some(PowerComparison {
        analytic: Some(a),
        relative_gap: Some(g),
        ..
    }) = &r.power
    {
        writeln!(w, "analytic power  {} (gap {})", sig6(*a), sig6(*g))?;
    }
    Ok(())
}

pub fn run(args: &SimulateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = record(args)?;
    match args.format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &r)?;
            writeln!(out)?;
        }
        ReportFormat::Text => write_text(&r, out)?,
    }
    Ok(EXIT_OK)
}
