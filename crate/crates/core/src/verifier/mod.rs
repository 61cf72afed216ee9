//! Independent numeric certification of the closed-form schedules.
//!
//! Nothing here calls the allocator's formulas to produce a reference value:
//! the oracle minimises the objective directly, the stationarity check
//! differentiates the Lagrangian by finite differences, and the convexity
//! probe samples random chords.

// negated comparisons are deliberate: a NaN must count as a violation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod nelder_mead;
mod suites;

pub use suites::{
    closed_form_duality, monotonicity_sweep, oracle_equivalence, psi_agreement, stationarity_sweep, CheckGrid,
    ACTIVITY_TOLERANCE, FORM_TOLERANCE, ORACLE_TOLERANCE, PERTURBATION, PSI_TOLERANCE,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::allocator::{allocate, AllocationRequest, PowerSchedule};
use crate::error::{Error, Result};
use crate::outage::PdpLaw;
use crate::protocol::{IrThreshold, ProtocolKind};
use crate::rate::Rate;

/// Outcome of one named check. The worst deviation is kept even on success.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub passed: bool,
    pub worst_deviation: f64,
    pub tolerance: f64,
    pub worst_location: String,
    pub evaluated: usize,
    pub violations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn new(check: impl Into<String>, tolerance: f64) -> Self {
        VerificationReport {
            check: check.into(),
            passed: true,
            worst_deviation: f64::NEG_INFINITY,
            tolerance,
            worst_location: String::new(),
            evaluated: 0,
            violations: 0,
            notes: Vec::new(),
        }
    }

    /// Records one measured deviation; `violated` decides pass/fail so that
    /// checks with their own criterion can reuse this.
    fn record(&mut self, deviation: f64, violated: bool, location: impl FnOnce() -> String) {
        self.evaluated += 1;
        if violated {
            self.violations += 1;
            self.passed = false;
        }
        if deviation > self.worst_deviation || (deviation.is_nan() && !self.worst_deviation.is_nan()) {
            self.worst_deviation = deviation;
            self.worst_location = location();
        }
    }

    /// Records `deviation` against this report's tolerance.
    fn measure(&mut self, deviation: f64, location: impl FnOnce() -> String) {
        let violated = !(deviation <= self.tolerance);
        self.record(deviation, violated, location);
    }

    pub fn merge(mut self, other: VerificationReport) -> VerificationReport {
        self.evaluated += other.evaluated;
        self.violations += other.violations;
        self.passed &= other.passed;
        if other.worst_deviation > self.worst_deviation {
            self.worst_deviation = other.worst_deviation;
            self.worst_location = other.worst_location;
        }
        self.notes.extend(other.notes);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub max_iterations: usize,
    /// Relative spread of simplex objective values at which a descent stops.
    pub tolerance: f64,
    pub starts: usize,
    /// Half-width of the random start perturbation around the equal-power point, in dB.
    pub spread_db: f64,
    /// Initial simplex edge in natural-log power units.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_iterations: 20_000,
            tolerance: 1e-10,
            starts: 5,
            spread_db: 20.0,
            initial_step: 0.5,
            seed: 0x5eed,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || self.starts == 0 {
            return Err(Error::Config(
                "oracle needs tolerance > 0, iterations >= 1 and at least one start".into(),
            ));
        }
        Ok(())
    }
}

/// Largest round count the brute-force oracle accepts.
pub const ORACLE_MAX_ROUNDS: usize = 6;

/// Minimises `sum rho_m E_{m-1}` subject to `E_M = eps` without using any
/// closed form: `rho_M` is eliminated through the active constraint and the
/// remaining log-powers are searched by multi-start Nelder-Mead.
pub fn numeric_allocation_oracle(
    protocol: ProtocolKind,
    rounds: usize,
    rate: Rate,
    target: f64,
    threshold: IrThreshold,
    config: &OracleConfig,
) -> Result<PowerSchedule> {
    config.validate()?;
    let request = AllocationRequest::new(protocol, rounds, rate, target).with_ir_threshold(threshold);
    request.validate()?;
    if rounds > ORACLE_MAX_ROUNDS {
        return Err(Error::InvalidRounds(rounds));
    }
    let law = PdpLaw::new(protocol, rounds, rate, threshold)?;
    let log_last_budget = law.log_coefficient(rounds) - target.ln();
    let complete = |x: &[f64]| -> Vec<f64> {
        let mut logs = x.to_vec();
        logs.push(log_last_budget - x.iter().sum::<f64>());
        logs.into_iter().map(f64::exp).collect()
    };
    if rounds == 1 {
        return PowerSchedule::new(complete(&[]));
    }
    let objective = |x: &[f64]| law.average_power(&complete(x));

    let dim = rounds - 1;
    let equal_log = log_last_budget / rounds as f64;
    let spread = config.spread_db / 10.0 * std::f64::consts::LN_10;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<nelder_mead::Minimum> = None;
    for start in 0..config.starts {
        let x0: Vec<f64> = (0..dim)
            .map(|_| {
                if start == 0 {
                    equal_log
                } else {
                    equal_log + rng.random_range(-spread..=spread)
                }
            })
            .collect();
        let found = nelder_mead::minimize(
            &objective,
            &x0,
            config.initial_step,
            config.tolerance,
            config.max_iterations,
        );
        if best.as_ref().is_none_or(|b| found.value < b.value) {
            best = Some(found);
        }
    }
    let best = best.expect("at least one start");
    if !best.converged {
        return Err(Error::NoConvergence(config.max_iterations));
    }
    PowerSchedule::new(complete(&best.point))
}

/// Which coordinates chords are drawn in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChordSpace {
    /// `theta rho + (1 - theta) rho'` in linear SNR.
    Linear,
    /// `theta log rho + (1 - theta) log rho'`.
    Log,
}

/// Relative chord gap `(f(mid) - (theta f(a) + (1 - theta) f(b))) / scale`;
/// positive values mean the chord lies below the function.
pub fn chord_gap<F: Fn(&[f64]) -> f64>(f: &F, a: &[f64], b: &[f64], theta: f64, space: ChordSpace) -> f64 {
    let mid: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| match space {
            ChordSpace::Linear => theta * x + (1.0 - theta) * y,
            ChordSpace::Log => (theta * x.ln() + (1.0 - theta) * y.ln()).exp(),
        })
        .collect();
    let (fa, fb) = (f(a), f(b));
    let scale = fa.abs().max(fb.abs()).max(f64::MIN_POSITIVE);
    (f(&mid) - (theta * fa + (1.0 - theta) * fb)) / scale
}

/// Minimum sample count accepted by [`convexity_probe`].
pub const MIN_CONVEXITY_SAMPLES: usize = 1000;
/// Slack allowed above the chord, relative to the larger endpoint value.
pub const CONVEXITY_SLACK: f64 = 1e-12;

/// Samples random chords between log-uniform power vectors in [0, 80] dB and
/// checks that the average-power objective and the packet-drop constraint
/// each lie on or below them. Returns `[objective, pdp]`.
pub fn convexity_probe(
    protocol: ProtocolKind,
    rounds: usize,
    rate: Rate,
    threshold: IrThreshold,
    samples: usize,
    seed: u64,
    space: ChordSpace,
) -> Result<[VerificationReport; 2]> {
    if samples < MIN_CONVEXITY_SAMPLES {
        return Err(Error::Config(format!(
            "convexity probe needs at least {MIN_CONVEXITY_SAMPLES} samples, got {samples}"
        )));
    }
    let law = PdpLaw::new(protocol, rounds, rate, threshold)?;
    let objective = |p: &[f64]| law.average_power(p);
    let constraint = |p: &[f64]| law.log_prefix_pdp(p, rounds).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..rounds).map(|_| 10f64.powf(rng.random_range(0.0..=8.0))).collect() };
    let coords = match space {
        ChordSpace::Linear => "linear",
        ChordSpace::Log => "log",
    };
    let mut reports = ["objective", "pdp"].map(|name| {
        VerificationReport::new(
            format!("convexity-{name}[{protocol},M={rounds},{coords}]"),
            CONVEXITY_SLACK,
        )
    });
    for _ in 0..samples {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let theta: f64 = rng.random_range(0.0..1.0);
        let location = || format!("rho={a:?} rho'={b:?} theta={theta}");
        reports[0].measure(chord_gap(&objective, &a, &b, theta, space), location);
        reports[1].measure(chord_gap(&constraint, &a, &b, theta, space), location);
    }
    Ok(reports)
}

/// Finite-difference step in log-power.
pub const STATIONARITY_STEP: f64 = 1e-6;
/// Largest admissible `|rho_m dL/drho_m|` relative to the objective value.
pub const STATIONARITY_TOLERANCE: f64 = 1e-6;

/// Components of the Lagrangian gradient at a schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianGradient {
    /// `dL/drho_m`.
    pub gradient: Vec<f64>,
    /// `|rho_m dL/drho_m| / ((1/M) sum rho_m E_{m-1})`.
    pub relative: Vec<f64>,
}

/// Central differences of `L = (1/M) sum rho_m E_{m-1} + lambda (E_M - eps)`
/// in log-power coordinates. The inequality multipliers are zero.
pub fn lagrangian_gradient(
    schedule: &PowerSchedule,
    lambda: f64,
    protocol: ProtocolKind,
    rate: Rate,
    threshold: IrThreshold,
) -> Result<LagrangianGradient> {
    let powers = schedule.powers();
    let m = powers.len();
    let law = PdpLaw::new(protocol, m, rate, threshold)?;
    let lagrangian = |p: &[f64]| law.average_power(p) / m as f64 + lambda * law.log_prefix_pdp(p, m).exp();
    let scale = law.average_power(powers) / m as f64;
    let mut gradient = Vec::with_capacity(m);
    let mut relative = Vec::with_capacity(m);
    let mut probe = powers.to_vec();
    for k in 0..m {
        probe[k] = powers[k] * STATIONARITY_STEP.exp();
        let up = lagrangian(&probe);
        probe[k] = powers[k] * (-STATIONARITY_STEP).exp();
        let down = lagrangian(&probe);
        probe[k] = powers[k];
        let log_derivative = (up - down) / (2.0 * STATIONARITY_STEP);
        gradient.push(log_derivative / powers[k]);
        relative.push(log_derivative.abs() / scale);
    }
    Ok(LagrangianGradient { gradient, relative })
}

/// KKT stationarity of an allocator output; needs the schedule's multiplier.
pub fn stationarity_check(
    schedule: &PowerSchedule,
    protocol: ProtocolKind,
    rate: Rate,
    threshold: IrThreshold,
) -> Result<VerificationReport> {
    let lambda = schedule
        .lagrange()
        .ok_or_else(|| Error::Config("schedule carries no Lagrange multiplier".into()))?;
    let grad = lagrangian_gradient(schedule, lambda, protocol, rate, threshold)?;
    let mut report = VerificationReport::new(
        format!("stationarity[{protocol},M={}]", schedule.rounds()),
        STATIONARITY_TOLERANCE,
    );
    for (k, (&rel, &g)) in grad.relative.iter().zip(&grad.gradient).enumerate() {
        report.measure(rel, || format!("round {} dL/drho={g:e}", k + 1));
    }
    Ok(report)
}

/// Targets above this are outside the ultra-reliable region and are skipped.
pub const MONOTONICITY_MAX_TARGET: f64 = 1e-4;

/// Strictly increasing powers across rounds on every grid point
/// `(M, R, eps)` with `eps <= 1e-4`.
///
/// The recorded deviation is the largest ratio `rho_m / rho_{m+1}`; the check
/// passes iff it stays below one.
pub fn monotonicity_check(
    protocol: ProtocolKind,
    grid: &[(usize, f64, f64)],
    threshold: IrThreshold,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("monotonicity[{protocol}]"), 1.0);
    for &(m, r, eps) in grid {
        if eps > MONOTONICITY_MAX_TARGET {
            report
                .notes
                .push(format!("M={m} R={r} eps={eps:e}: out of region, skipped"));
            continue;
        }
        let request = AllocationRequest::new(protocol, m, Rate::new(r)?, eps).with_ir_threshold(threshold);
        let alloc = allocate(&request)?;
        let p = alloc.schedule.powers();
        let (worst_idx, worst_ratio) = p
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, w[0] / w[1]))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        report.record(worst_ratio, worst_ratio >= 1.0, || {
            format!(
                "M={m} R={r} eps={eps:e}: rho_{}={} vs rho_{}={}",
                worst_idx + 1,
                p.get(worst_idx).copied().unwrap_or(f64::NAN),
                worst_idx + 2,
                p.get(worst_idx + 1).copied().unwrap_or(f64::NAN)
            )
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn r(v: f64) -> Rate {
        Rate::new(v).unwrap()
    }

    #[test]
    fn oracle_reproduces_two_round_arq() {
        let s = numeric_allocation_oracle(
            ProtocolKind::Arq,
            2,
            r(1.0),
            1e-5,
            IrThreshold::default(),
            &OracleConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(s.powers()[0], 100.48, max_relative = 1e-3);
        assert_relative_eq!(s.powers()[1], 2938.2, max_relative = 1e-3);
    }

    #[test]
    fn oracle_reproduces_two_round_cc() {
        let s = numeric_allocation_oracle(
            ProtocolKind::Cc,
            2,
            r(1.0),
            1e-3,
            IrThreshold::default(),
            &OracleConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(s.powers()[0], 17.183, max_relative = 1e-3);
        assert_relative_eq!(s.powers()[1], 85.914, max_relative = 1e-3);
    }

    #[test]
    fn oracle_rejects_large_round_counts() {
        let e = numeric_allocation_oracle(
            ProtocolKind::Arq,
            7,
            r(1.0),
            1e-5,
            IrThreshold::default(),
            &OracleConfig::default(),
        );
        assert!(matches!(e, Err(Error::InvalidRounds(7))));
    }

    #[test]
    fn chord_endpoints_are_exact() {
        let law = PdpLaw::new(ProtocolKind::Arq, 2, r(1.0), IrThreshold::default()).unwrap();
        let f = |p: &[f64]| law.average_power(p);
        let a = [3.0, 700.0];
        let b = [4000.0, 12.0];
        for space in [ChordSpace::Linear, ChordSpace::Log] {
            assert!(chord_gap(&f, &a, &b, 1.0, space).abs() < 1e-14);
            assert!(chord_gap(&f, &a, &b, 0.0, space).abs() < 1e-14);
        }
    }

    #[test]
    fn convexity_probe_needs_enough_samples() {
        let e = convexity_probe(
            ProtocolKind::Arq,
            2,
            r(1.0),
            IrThreshold::default(),
            10,
            1,
            ChordSpace::Log,
        );
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn log_chords_never_violate() {
        for p in ProtocolKind::ALL {
            for rep in convexity_probe(p, 3, r(1.0), IrThreshold::default(), 2000, 7, ChordSpace::Log).unwrap() {
                assert!(rep.passed, "{rep:?}");
                assert_eq!(rep.evaluated, 2000);
            }
        }
    }

    #[test]
    fn stationarity_holds_and_detects_perturbation() {
        let req = AllocationRequest::new(ProtocolKind::Arq, 2, r(1.0), 1e-5);
        let a = allocate(&req).unwrap();
        let ok = stationarity_check(&a.schedule, ProtocolKind::Arq, r(1.0), IrThreshold::default()).unwrap();
        assert!(ok.passed, "{ok:?}");

        let mut p = a.schedule.powers().to_vec();
        p[0] *= 1.1;
        let lambda = a.schedule.lagrange().unwrap();
        let perturbed = PowerSchedule::new(p).unwrap();
        let g = lagrangian_gradient(&perturbed, lambda, ProtocolKind::Arq, r(1.0), IrThreshold::default()).unwrap();
        assert!(g.gradient[0] > 0.0);
        assert!(g.relative[0] > STATIONARITY_TOLERANCE);
    }

    #[test]
    fn stationarity_needs_multiplier() {
        let s = PowerSchedule::new(vec![10.0, 20.0]).unwrap();
        assert!(stationarity_check(&s, ProtocolKind::Arq, r(1.0), IrThreshold::default()).is_err());
    }

    #[test]
    fn monotonicity_skips_loose_targets() {
        let rep = monotonicity_check(
            ProtocolKind::Arq,
            &[(2, 1.0, 0.5), (2, 1.0, 1e-5)],
            IrThreshold::default(),
        )
        .unwrap();
        assert!(rep.passed);
        assert_eq!(rep.evaluated, 1);
        assert_eq!(rep.notes.len(), 1);
        assert!(rep.notes[0].contains("out of region"));
    }
}
