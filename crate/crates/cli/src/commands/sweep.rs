use std::io::Write;

use rayon::prelude::*;

use harq_core::outage::{outage_single_round, OutageModel};
use harq_core::rate::{from_db, to_db};
use harq_core::{
    allocate, power_metrics, AllocationRequest, BlocklengthSpec, IrThreshold, ProtocolKind, Rate, RateSpec,
};

use super::as_printed;
use crate::args::{Figure, SweepArgs, TableFormat};
use crate::format::sig6;
use crate::CliError;

/// Columns before the per-round powers.
pub const COLUMNS_PREFIX: [&str; 6] = ["protocol", "M", "R", "n", "K", "eps_target"];
const COLUMNS_SUFFIX: [&str; 4] = ["avg_power_db", "total_power_db", "model", "achieved_pdp"];

/// Label used for single-shot transmission without feedback.
pub const OPEN_LOOP: &str = "open_loop";

/// One output row. `rho_db` has `M` entries; the table pads to the largest `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub protocol: String,
    pub rounds: usize,
    pub rate: f64,
    pub n: Option<u32>,
    pub k: Option<f64>,
    pub eps_target: Option<f64>,
    pub rho_db: Vec<f64>,
    pub avg_power_db: f64,
    pub total_power_db: f64,
    pub model: String,
    pub achieved_pdp: f64,
}

impl SweepRow {
    fn json(&self, max_rounds: usize) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("protocol".into(), self.protocol.clone().into());
        map.insert("m".into(), self.rounds.into());
        map.insert("r".into(), self.rate.into());
        map.insert("n".into(), self.n.into());
        map.insert("k".into(), self.k.into());
        map.insert("eps_target".into(), self.eps_target.into());
        for i in 0..max_rounds {
            map.insert(format!("rho_{}", i + 1), self.rho_db.get(i).copied().into());
        }
        map.insert("avg_power_db".into(), self.avg_power_db.into());
        map.insert("total_power_db".into(), self.total_power_db.into());
        map.insert("model".into(), self.model.clone().into());
        map.insert("achieved_pdp".into(), self.achieved_pdp.into());
        serde_json::Value::Object(map)
    }

    fn csv_fields(&self, max_rounds: usize) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(sig6).unwrap_or_default();
        let mut f = vec![
            self.protocol.clone(),
            self.rounds.to_string(),
            sig6(self.rate),
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            opt(self.k),
            opt(self.eps_target),
        ];
        f.extend((0..max_rounds).map(|i| opt(self.rho_db.get(i).copied())));
        f.push(sig6(self.avg_power_db));
        f.push(sig6(self.total_power_db));
        f.push(self.model.clone());
        f.push(sig6(self.achieved_pdp));
        f
    }
}

/// Writes rows as CSV behind a `# harq <version>` line.
pub fn write_csv(rows: &[SweepRow], w: &mut dyn Write) -> Result<(), CliError> {
    let max_rounds = rows.iter().map(|r| r.rho_db.len()).max().unwrap_or(0);
    writeln!(w, "# harq {}", env!("CARGO_PKG_VERSION"))?;
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<String> = COLUMNS_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((1..=max_rounds).map(|i| format!("rho_{i}")));
    header.extend(COLUMNS_SUFFIX.iter().map(|s| s.to_string()));
    csv.write_record(&header)?;
    for r in rows {
        csv.write_record(r.csv_fields(max_rounds))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json(rows: &[SweepRow], w: &mut dyn Write) -> Result<(), CliError> {
    let max_rounds = rows.iter().map(|r| r.rho_db.len()).max().unwrap_or(0);
    let values: Vec<_> = rows.iter().map(|r| r.json(max_rounds)).collect();
    serde_json::to_writer_pretty(&mut *w, &values)?;
    writeln!(w)?;
    Ok(())
}

/// Allocation row for one grid point under the asymptotic law.
pub(crate) fn allocation_row(
    protocol: ProtocolKind,
    rounds: usize,
    rate: RateSpec,
    eps: f64,
    threshold: IrThreshold,
    per_transmission: bool,
) -> Result<SweepRow, CliError> {
    let request = AllocationRequest::new(protocol, rounds, rate, eps).with_ir_threshold(threshold);
    let alloc = allocate(&request)?;
    let r = rate.rate();
    let printed: Vec<f64> = alloc.schedule.powers().iter().map(|&p| as_printed(p)).collect();
    let achieved = request.law()?.pdp(&printed)?;
    let metrics = power_metrics(&alloc.schedule, r, protocol, threshold)?;
    let bl = rate.blocklength();
    Ok(SweepRow {
        protocol: protocol.name().into(),
        rounds,
        rate: r.nats(),
        n: bl.map(|b| b.channel_uses()),
        k: bl.map(|b| b.nats()),
        eps_target: Some(eps),
        rho_db: metrics.per_round_db.clone(),
        avg_power_db: to_db(metrics.average(per_transmission)),
        total_power_db: metrics.total_power_db,
        model: "asymptotic".into(),
        achieved_pdp: achieved,
    })
}

/// Open-loop (single transmission) row at a target: `rho = phi / eps`.
fn open_loop_row(rate: RateSpec, eps: f64) -> Result<SweepRow, CliError> {
    let mut row = allocation_row(ProtocolKind::Arq, 1, rate, eps, IrThreshold::default(), false)?;
    row.protocol = OPEN_LOOP.into();
    Ok(row)
}

/// Open-loop outage at a fixed power under one model.
fn outage_row(rho_db: f64, bl: BlocklengthSpec, model: OutageModel) -> Result<SweepRow, CliError> {
    let rate = bl.rate();
    let value = outage_single_round(from_db(rho_db), rate, model)?;
    Ok(SweepRow {
        protocol: OPEN_LOOP.into(),
        rounds: 1,
        rate: rate.nats(),
        n: Some(bl.channel_uses()),
        k: Some(bl.nats()),
        eps_target: None,
        rho_db: vec![rho_db],
        avg_power_db: rho_db,
        total_power_db: rho_db,
        model: model.kind().name().into(),
        // the asymptotic law exceeds one at low SNR
        achieved_pdp: value.probability.min(1.0),
    })
}

fn decades(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|e| 10f64.powi(-e)).collect()
}

/// Power grid of the outage preset, in dB.
pub const FIG1_POWER_DB: (i32, i32) = (-10, 60);

enum Point {
    Allocation {
        protocol: ProtocolKind,
        rounds: usize,
        rate: RateSpec,
        eps: f64,
    },
    OpenLoop {
        rate: RateSpec,
        eps: f64,
    },
    Outage {
        rho_db: f64,
        bl: BlocklengthSpec,
        model: OutageModel,
    },
}

fn rate_points(
    args: &SweepArgs,
    default_rates: &[f64],
    default_n: &[u32],
    default_k: &[f64],
) -> Result<Vec<RateSpec>, CliError> {
    if !args.rate.is_empty() && (!args.blocklength.is_empty() || !args.nats.is_empty()) {
        return Err(CliError::Usage(
            "--rate cannot be combined with --blocklength/--nats".into(),
        ));
    }
    if !args.rate.is_empty() {
        return args.rate.iter().map(|&r| Ok(Rate::new(r)?.into())).collect();
    }
    let ns = if args.blocklength.is_empty() {
        default_n
    } else {
        &args.blocklength
    };
    let ks = if args.nats.is_empty() { default_k } else { &args.nats };
    if ns.is_empty() != ks.is_empty() {
        return Err(CliError::Usage("--blocklength and --nats go together".into()));
    }
    if ns.is_empty() {
        return default_rates.iter().map(|&r| Ok(Rate::new(r)?.into())).collect();
    }
    let mut out = Vec::new();
    for &n in ns {
        for &k in ks {
            out.push(BlocklengthSpec::new(n, k)?.into());
        }
    }
    Ok(out)
}

fn grid(args: &SweepArgs) -> Result<Vec<Point>, CliError> {
    let pick_protocols = || -> Vec<ProtocolKind> {
        if args.protocols.is_empty() {
            ProtocolKind::ALL.to_vec()
        } else {
            args.protocols.iter().map(|&p| p.into()).collect()
        }
    };
    let pick_rounds = || {
        if args.rounds.is_empty() {
            vec![2, 3]
        } else {
            args.rounds.clone()
        }
    };
    let pick_targets = |default: Vec<f64>| {
        if args.targets.is_empty() {
            default
        } else {
            args.targets.clone()
        }
    };

    let mut points = Vec::new();
    match args.figure {
        Figure::Fig1 => {
            let models = |bl| {
                [
                    OutageModel::AsymptoticTaylor,
                    OutageModel::FblClosedForm(bl),
                    OutageModel::FblIntegral(bl),
                ]
            };
            for rate in rate_points(args, &[], &[200], &[200.0, 400.0, 600.0])? {
                let bl = rate
                    .blocklength()
                    .ok_or_else(|| CliError::Usage("fig1 needs --blocklength/--nats".into()))?;
                for model in models(bl) {
                    for db in FIG1_POWER_DB.0..=FIG1_POWER_DB.1 {
                        points.push(Point::Outage {
                            rho_db: db as f64,
                            bl,
                            model,
                        });
                    }
                }
            }
        }
        Figure::Fig3 | Figure::Fig6 | Figure::Fig8 | Figure::Custom | Figure::Fig4 => {
            let (rates, targets) = if args.figure == Figure::Fig4 {
                let ns: Vec<u32> = (100..=1000).step_by(50).collect();
                (rate_points(args, &[], &ns, &[200.0, 300.0])?, pick_targets(vec![1e-5]))
            } else {
                (rate_points(args, &[1.0], &[], &[])?, pick_targets(decades(1, 9)))
            };
            let with_open_loop = matches!(args.figure, Figure::Fig3 | Figure::Fig6 | Figure::Fig8);
            if with_open_loop {
                for &rate in &rates {
                    for &eps in &targets {
                        points.push(Point::OpenLoop { rate, eps });
                    }
                }
            }
            for protocol in pick_protocols() {
                for m in pick_rounds() {
                    for &rate in &rates {
                        for &eps in &targets {
                            points.push(Point::Allocation {
                                protocol,
                                rounds: m,
                                rate,
                                eps,
                            });
                        }
                    }
                }
            }
        }
    }
    if points.is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    for &eps in &args.targets {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CliError::Usage(format!("target {eps} is not in (0, 1)")));
        }
    }
    Ok(points)
}

/// Evaluates the sweep and returns its rows in grid order.
pub fn rows(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let threshold: IrThreshold = args.ir_threshold.into();
    grid(args)?
        .into_par_iter()
        .map(|p| match p {
            Point::Allocation {
                protocol,
                rounds,
                rate,
                eps,
            } => allocation_row(protocol, rounds, rate, eps, threshold, args.normalize_per_transmission),
            Point::OpenLoop { rate, eps } => open_loop_row(rate, eps),
            Point::Outage { rho_db, bl, model } => outage_row(rho_db, bl, model),
        })
        .collect()
}

pub fn run(args: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let rows = rows(args)?;
    let mut buf = Vec::new();
    match args.format {
        TableFormat::Csv => write_csv(&rows, &mut buf)?,
        TableFormat::Json => write_json(&rows, &mut buf)?,
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &buf).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?
        }
        None => out.write_all(&buf)?,
    }
    Ok(crate::EXIT_OK)
}
