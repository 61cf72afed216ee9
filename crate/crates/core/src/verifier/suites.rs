//! Grid-level suites built from the single-point checks in the parent module.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    lagrangian_gradient, monotonicity_check, numeric_allocation_oracle, stationarity_check, OracleConfig,
    VerificationReport, STATIONARITY_TOLERANCE,
};
use crate::allocator::{allocate, allocate_closed_form, power_metrics, AllocationRequest, PowerSchedule};
use crate::error::Result;
use crate::protocol::{IrThreshold, ProtocolKind};
use crate::psi::{psi_convolution_oracle, psi_series};
use crate::rate::Rate;

/// Cartesian grid of protocols, round counts, rates and targets. Points are
/// visited in lexicographic order of (protocol, M, R, eps).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckGrid {
    pub protocols: Vec<ProtocolKind>,
    pub rounds: Vec<usize>,
    pub rates: Vec<f64>,
    pub targets: Vec<f64>,
    pub threshold: IrThreshold,
}

impl CheckGrid {
    /// All protocols, M in 1..=8, R in {0.5, 1, 2, 3}, eps in {1e-2, 1e-4, 1e-6, 1e-8}.
    pub fn duality() -> Self {
        CheckGrid {
            protocols: ProtocolKind::ALL.to_vec(),
            rounds: (1..=8).collect(),
            rates: vec![0.5, 1.0, 2.0, 3.0],
            targets: vec![1e-2, 1e-4, 1e-6, 1e-8],
            threshold: IrThreshold::default(),
        }
    }

    /// All protocols, M in {2, 3, 4}, R in {1, 2}, eps in {1e-3, 1e-5, 1e-7}.
    pub fn oracle() -> Self {
        CheckGrid {
            protocols: ProtocolKind::ALL.to_vec(),
            rounds: vec![2, 3, 4],
            rates: vec![1.0, 2.0],
            targets: vec![1e-3, 1e-5, 1e-7],
            threshold: IrThreshold::default(),
        }
    }

    /// All protocols, M in 2..=6, R from 0.5 to 3 in steps of 0.5, eps from 1e-5 to 1e-9.
    pub fn monotonicity() -> Self {
        CheckGrid {
            protocols: ProtocolKind::ALL.to_vec(),
            rounds: (2..=6).collect(),
            rates: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            targets: vec![1e-5, 1e-6, 1e-7, 1e-8, 1e-9],
            threshold: IrThreshold::default(),
        }
    }

    pub fn with_protocols(mut self, protocols: &[ProtocolKind]) -> Self {
        self.protocols = protocols.to_vec();
        self
    }

    pub fn points(&self) -> Vec<(ProtocolKind, usize, f64, f64)> {
        let mut out = Vec::new();
        for &p in &self.protocols {
            for &m in &self.rounds {
                for &r in &self.rates {
                    for &eps in &self.targets {
                        out.push((p, m, r, eps));
                    }
                }
            }
        }
        out
    }

    fn request(&self, p: ProtocolKind, m: usize, r: f64, eps: f64) -> Result<AllocationRequest> {
        Ok(AllocationRequest::new(p, m, Rate::new(r)?, eps).with_ir_threshold(self.threshold))
    }
}

fn label(p: ProtocolKind, m: usize, r: f64, eps: f64) -> String {
    format!("{p} M={m} R={r} eps={eps:e}")
}

/// Relative tolerance on the achieved packet-drop probability.
pub const ACTIVITY_TOLERANCE: f64 = 1e-9;
/// Relative tolerance between the recursive and exponent-table schedules.
pub const FORM_TOLERANCE: f64 = 1e-12;

/// Returns `[constraint activity, recursion vs exponent table]`.
pub fn closed_form_duality(grid: &CheckGrid) -> Result<Vec<VerificationReport>> {
    let mut activity = VerificationReport::new("constraint-activity", ACTIVITY_TOLERANCE);
    let mut forms = VerificationReport::new("recursion-vs-table", FORM_TOLERANCE);
    for (p, m, r, eps) in grid.points() {
        let request = grid.request(p, m, r, eps)?;
        let recursive = allocate(&request)?;
        let table = allocate_closed_form(&request)?;
        let law = request.law()?;
        let achieved = law.pdp(recursive.schedule.powers())?;
        activity.measure(((achieved - eps) / eps).abs(), || {
            format!("{} achieved={achieved:e}", label(p, m, r, eps))
        });
        let gap = recursive
            .schedule
            .powers()
            .iter()
            .zip(table.powers())
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        forms.measure(gap, || label(p, m, r, eps));
    }
    Ok(vec![activity, forms])
}

/// Relative tolerance on the average power found by the numeric oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

/// Closed-form average power against the brute-force oracle, grid points in parallel.
pub fn oracle_equivalence(grid: &CheckGrid, config: &OracleConfig) -> Result<VerificationReport> {
    config.validate()?;
    let rows: Vec<Result<(f64, String)>> = grid
        .points()
        .into_par_iter()
        .map(|(p, m, r, eps)| {
            let request = grid.request(p, m, r, eps)?;
            let rate = request.rate.rate();
            let closed = allocate(&request)?;
            let numeric = numeric_allocation_oracle(p, m, rate, eps, grid.threshold, config)?;
            let a = power_metrics(&closed.schedule, rate, p, grid.threshold)?.avg_power;
            let b = power_metrics(&numeric, rate, p, grid.threshold)?.avg_power;
            Ok((
                (a - b).abs() / b,
                format!("{} closed={a} oracle={b}", label(p, m, r, eps)),
            ))
        })
        .collect();
    let mut report = VerificationReport::new("oracle-equivalence", ORACLE_TOLERANCE);
    for row in rows {
        let (dev, loc) = row?;
        report.measure(dev, || loc);
    }
    Ok(report)
}

pub const PSI_TOLERANCE: f64 = 1e-8;

/// Series against the convolution oracle for `1 <= m <= max_round` at each
/// rate, plus the anchors `psi_2(1) = 1` and `psi_3(1) = e/2 - 1`.
pub fn psi_agreement(max_round: usize, rates: &[f64]) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("psi-agreement", PSI_TOLERANCE);
    for &r in rates {
        let rate = Rate::new(r)?;
        for m in 1..=max_round {
            let series = psi_series(m, rate);
            let oracle = psi_convolution_oracle(m, rate)?;
            report.measure((series - oracle).abs(), || {
                format!("m={m} R={r} series={series} oracle={oracle}")
            });
        }
    }
    let one = Rate::new(1.0)?;
    for (m, expected) in [(2, 1.0), (3, std::f64::consts::E / 2.0 - 1.0)] {
        let got = psi_series(m, one);
        report.measure((got - expected).abs(), || format!("anchor m={m} R=1 got={got}"));
    }
    Ok(report)
}

/// Relative size of the perturbation used as the negative control.
pub const PERTURBATION: f64 = 0.05;

/// Returns `[stationarity, negative control]`.
///
/// The negative control scales one round at a time by `1 + PERTURBATION`
/// and records `tolerance / largest relative gradient`; it passes when every
/// perturbed schedule is flagged, i.e. the ratio stays below one.
pub fn stationarity_sweep(grid: &CheckGrid) -> Result<Vec<VerificationReport>> {
    let mut stationary = VerificationReport::new("stationarity", STATIONARITY_TOLERANCE);
    let mut control = VerificationReport::new("stationarity-negative-control", 1.0);
    for (p, m, r, eps) in grid.points() {
        let request = grid.request(p, m, r, eps)?;
        let rate = request.rate.rate();
        let alloc = allocate(&request)?;
        let here = stationarity_check(&alloc.schedule, p, rate, grid.threshold)?;
        stationary.measure(here.worst_deviation, || {
            format!("{} {}", label(p, m, r, eps), here.worst_location)
        });

        let lambda = alloc.schedule.lagrange().unwrap_or_default();
        for k in 0..m {
            let mut powers = alloc.schedule.powers().to_vec();
            powers[k] *= 1.0 + PERTURBATION;
            let bent = PowerSchedule::new(powers)?;
            let g = lagrangian_gradient(&bent, lambda, p, rate, grid.threshold)?;
            let largest = g.relative.iter().copied().fold(0.0, f64::max);
            let ratio = STATIONARITY_TOLERANCE / largest;
            control.record(ratio, !(ratio < 1.0), || {
                format!(
                    "{} round {} perturbed, largest gradient {largest:e}",
                    label(p, m, r, eps),
                    k + 1
                )
            });
        }
    }
    Ok(vec![stationary, control])
}

/// Monotonicity of every protocol in the grid, one report per protocol.
pub fn monotonicity_sweep(grid: &CheckGrid) -> Result<Vec<VerificationReport>> {
    grid.protocols
        .iter()
        .map(|&p| {
            let tuples: Vec<(usize, f64, f64)> = grid
                .points()
                .into_iter()
                .filter(|t| t.0 == p)
                .map(|(_, m, r, eps)| (m, r, eps))
                .collect();
            monotonicity_check(p, &tuples, grid.threshold)
        })
        .collect()
}
