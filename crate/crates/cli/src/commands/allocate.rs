use std::io::Write;

use serde::Serialize;

use harq_core::rate::to_db;
use harq_core::{allocate, power_metrics, AllocationRequest, IrThreshold, ProtocolKind, ValidityWarning};

use super::{as_printed, rate_spec};
use crate::args::{AllocateArgs, RecordFormat};
use crate::commands::sweep::{write_csv, SweepRow};
use crate::format::{db2, sig6};
use crate::{CliError, EXIT_OK, EXIT_STRICT};

#[derive(Debug, Serialize)]
pub struct AllocationRecord {
    pub protocol: ProtocolKind,
    pub rounds: usize,
    pub rate: f64,
    pub n: Option<u32>,
    pub k: Option<f64>,
    pub eps_target: f64,
    pub ir_threshold: IrThreshold,
    pub powers: Vec<f64>,
    pub powers_db: Vec<f64>,
    pub lambda: Option<f64>,
    /// `expected_total` or `per_transmission`.
    pub avg_convention: &'static str,
    pub avg_power: f64,
    pub avg_power_db: f64,
    pub total_power: f64,
    pub total_power_db: f64,
    /// Recomputed from `powers` as printed.
    pub achieved_pdp: f64,
    pub warnings: Vec<ValidityWarning>,
}

pub fn record(args: &AllocateArgs) -> Result<AllocationRecord, CliError> {
    let spec = rate_spec(&args.rate)?;
    let protocol: ProtocolKind = args.protocol.into();
    let threshold: IrThreshold = args.ir_threshold.into();
    let request = AllocationRequest::new(protocol, args.rounds, spec, args.target).with_ir_threshold(threshold);
    let alloc = allocate(&request)?;
    let rate = spec.rate();
    let metrics = power_metrics(&alloc.schedule, rate, protocol, threshold)?;
    let powers: Vec<f64> = alloc.schedule.powers().iter().map(|&p| as_printed(p)).collect();
    let achieved_pdp = request.law()?.pdp(&powers)?;
    let avg = metrics.average(args.normalize_per_transmission);
    let bl = spec.blocklength();
    Ok(AllocationRecord {
        protocol,
        rounds: args.rounds,
        rate: rate.nats(),
        n: bl.map(|b| b.channel_uses()),
        k: bl.map(|b| b.nats()),
        eps_target: args.target,
        ir_threshold: threshold,
        powers_db: metrics.per_round_db.clone(),
        powers,
        lambda: alloc.schedule.lagrange(),
        avg_convention: if args.normalize_per_transmission {
            "per_transmission"
        } else {
            "expected_total"
        },
        avg_power: avg,
        avg_power_db: to_db(avg),
        total_power: metrics.total_power,
        total_power_db: metrics.total_power_db,
        achieved_pdp,
        warnings: alloc.warnings,
    })
}

fn write_text(r: &AllocationRecord, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "protocol      {}", r.protocol)?;
    writeln!(w, "rounds        {}", r.rounds)?;
    match (r.n, r.k) {
        (Some(n), Some(k)) => writeln!(w, "rate          {} nats/use (K={k} nats over n={n})", r.rate)?,
        _ => writeln!(w, "rate          {} nats/use", r.rate)?,
    }
    writeln!(w, "target        {:e}", r.eps_target)?;
    if r.protocol == ProtocolKind::Ir {
        writeln!(w, "ir threshold  {}", r.ir_threshold)?;
    }
    for (i, (p, db)) in r.powers.iter().zip(&r.powers_db).enumerate() {
        writeln!(w, "rho_{:<9} {p} ({} dB)", i + 1, db2(*db))?;
    }
    if let Some(l) = r.lambda {
        writeln!(w, "lambda        {l:e}")?;
    }
    let label = if r.avg_convention == "per_transmission" {
        " per transmission"
    } else {
        ""
    };
    writeln!(
        w,
        "avg power     {} ({} dB){label}",
        sig6(r.avg_power),
        db2(r.avg_power_db)
    )?;
    writeln!(
        w,
        "total power   {} ({} dB)",
        sig6(r.total_power),
        db2(r.total_power_db)
    )?;
    writeln!(w, "achieved pdp  {:e}", r.achieved_pdp)?;
    for wn in &r.warnings {
        writeln!(
            w,
            "warning: rho_{} = {} <= phi = {}; asymptotic law outside its high-SNR region",
            wn.round, wn.power, wn.phi
        )?;
    }
    Ok(())
}

pub fn run(args: &AllocateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let r = record(args)?;
    match args.format {
        RecordFormat::Text => write_text(&r, out)?,
        RecordFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &r)?;
            writeln!(out)?;
        }
        RecordFormat::Csv => {
            let row = SweepRow {
                protocol: r.protocol.name().into(),
                rounds: r.rounds,
                rate: r.rate,
                n: r.n,
                k: r.k,
                eps_target: Some(r.eps_target),
                rho_db: r.powers_db.clone(),
                avg_power_db: r.avg_power_db,
                total_power_db: r.total_power_db,
                model: "asymptotic".into(),
                achieved_pdp: r.achieved_pdp,
            };
            write_csv(&[row], out)?;
        }
    }
    if args.strict && !r.warnings.is_empty() {
        writeln!(
            err,
            "error: {} round(s) outside the high-SNR region (--strict)",
            r.warnings.len()
        )?;
        return Ok(EXIT_STRICT);
    }
    Ok(EXIT_OK)
}
