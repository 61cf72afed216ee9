//! Monte Carlo over i.i.d. Rayleigh block fading.
//!
//! Every trial draws the same number of variates whatever its outcome, so
//! trial `t` owns a fixed window of the ChaCha8 keystream seeded with the run
//! seed. A worker seeks to the window of the first trial of its chunk and
//! reads on from there. Results are therefore a function of (seed, trial
//! index) alone and never depend on the worker count, and two runs with the
//! same seed see common random numbers, so paired comparisons are meaningful.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocator::PowerSchedule;
use crate::error::{Error, Result};
use crate::outage::{dispersion, exact_rayleigh_prefix_pdps, q_function, PdpLaw};
use crate::protocol::{IrThreshold, ProtocolKind};
use crate::rate::{phi, Rate, RateSpec};

pub const MIN_TRIALS: u64 = 1000;
/// Trials handed to a worker at a time.
const CHUNK_TRIALS: u64 = 1 << 14;

/// How a round's decoding outcome is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionMode {
    /// Conditional failure `min(1, C_m / (C_{m-1} rho_m))` from the asymptotic law.
    Asymptotic,
    /// Information-outage test on the drawn gains.
    Exact,
    /// Normal-approximation block error on the drawn gains.
    Fbl,
}

impl DecisionMode {
    pub fn name(self) -> &'static str {
        match self {
            DecisionMode::Asymptotic => "asymptotic",
            DecisionMode::Exact => "exact",
            DecisionMode::Fbl => "fbl",
        }
    }
}

impl std::fmt::Display for DecisionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DecisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asymptotic" => Ok(DecisionMode::Asymptotic),
            "exact" => Ok(DecisionMode::Exact),
            "fbl" => Ok(DecisionMode::Fbl),
            other => Err(Error::Config(format!("unknown decision mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub trials: u64,
    pub seed: u64,
    pub mode: DecisionMode,
    pub ir_threshold: IrThreshold,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl SimulationConfig {
    pub fn new(trials: u64, seed: u64, mode: DecisionMode) -> Self {
        SimulationConfig {
            trials,
            seed,
            mode,
            ir_threshold: IrThreshold::default(),
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_ir_threshold(mut self, threshold: IrThreshold) -> Self {
        self.ir_threshold = threshold;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub protocol: ProtocolKind,
    pub mode: DecisionMode,
    pub trials: u64,
    pub seed: u64,
    /// Packets still undecoded after the last round.
    pub failures: u64,
    pub empirical_pdp: f64,
    /// Binomial standard error of `empirical_pdp`.
    pub std_error: f64,
    /// Half-width of the normal 95% interval, `1.96 * std_error`.
    pub ci_half_width: f64,
    /// `prefix_failures[m]` counts packets undecoded after `m` rounds; entry 0 is `trials`.
    pub prefix_failures: Vec<u64>,
    pub mean_consumed_power: f64,
    pub mean_rounds: f64,
}

impl SimulationReport {
    /// Empirical `E_0 ..= E_M`.
    pub fn empirical_prefix_pdps(&self) -> Vec<f64> {
        self.prefix_failures
            .iter()
            .map(|&f| f as f64 / self.trials as f64)
            .collect()
    }

    /// Distance of `reference` from the estimate in binomial standard
    /// errors of `reference` itself.
    pub fn sigmas_from(&self, reference: f64) -> f64 {
        let sd = (reference * (1.0 - reference) / self.trials as f64).sqrt();
        (self.empirical_pdp - reference).abs() / sd
    }
}

#[derive(Default)]
struct Tally {
    prefix_failures: Vec<u64>,
    consumed_power: f64,
    rounds: u64,
}

/// Per-round decision rule with everything precomputed.
struct Decider {
    protocol: ProtocolKind,
    mode: DecisionMode,
    powers: Vec<f64>,
    phi: f64,
    rate: f64,
    /// IR threshold in nats.
    ir_threshold: f64,
    /// Conditional failure probabilities for the asymptotic rule.
    conditional: Vec<f64>,
    blocklength: u32,
}

impl Decider {
    fn variates_per_round(&self) -> usize {
        match self.mode {
            DecisionMode::Exact => 1,
            _ => 2,
        }
    }

    /// Keystream words consumed by one trial; each `f64` takes two.
    fn words_per_trial(&self) -> u128 {
        2 * (self.variates_per_round() * self.powers.len()) as u128
    }

    /// Runs one packet; returns the number of rounds used and whether it failed.
    fn trial(&self, rng: &mut ChaCha8Rng) -> (usize, bool) {
        let m = self.powers.len();
        let per = self.variates_per_round();
        let mut draws = [0.0f64; 2 * crate::allocator::MAX_ROUNDS];
        for d in draws.iter_mut().take(per * m) {
            *d = rng.random::<f64>();
        }
        let mut snr_sum = 0.0;
        let mut info_sum = 0.0;
        let mut disp_sum = 0.0;
        for k in 0..m {
            let u = draws[per * k];
            let z = -(-u).ln_1p();
            let snr = self.powers[k] * z;
            let failed = match self.mode {
                DecisionMode::Exact => match self.protocol {
                    ProtocolKind::Arq => snr < self.phi,
                    ProtocolKind::Cc => {
                        snr_sum += snr;
                        snr_sum < self.phi
                    }
                    ProtocolKind::Ir => {
                        info_sum += snr.ln_1p();
                        info_sum < self.ir_threshold
                    }
                },
                DecisionMode::Asymptotic => draws[per * k + 1] < self.conditional[k],
                DecisionMode::Fbl => {
                    let n = self.blocklength as f64;
                    let error = match self.protocol {
                        ProtocolKind::Arq => block_error(snr.ln_1p(), dispersion(snr), self.rate, n),
                        ProtocolKind::Cc => {
                            snr_sum += snr;
                            block_error(snr_sum.ln_1p(), dispersion(snr_sum), self.rate, n)
                        }
                        ProtocolKind::Ir => {
                            info_sum += snr.ln_1p();
                            disp_sum += dispersion(snr);
                            block_error(info_sum, disp_sum, self.ir_threshold, n)
                        }
                    };
                    draws[per * k + 1] < error
                }
            };
            if !failed {
                return (k + 1, false);
            }
        }
        (m, true)
    }

    fn run_chunk(&self, base: &ChaCha8Rng, first: u64, trials: u64) -> Tally {
        let mut rng = base.clone();
        rng.set_word_pos(first as u128 * self.words_per_trial());
        let m = self.powers.len();
        let mut tally = Tally {
            prefix_failures: vec![0; m + 1],
            ..Tally::default()
        };
        for _ in 0..trials {
            let (used, failed) = self.trial(&mut rng);
            tally.rounds += used as u64;
            tally.consumed_power += self.powers[..used].iter().sum::<f64>();
            // rounds before `used` all failed
            for f in tally.prefix_failures.iter_mut().take(used) {
                *f += 1;
            }
            if failed {
                tally.prefix_failures[m] += 1;
            }
        }
        tally
    }
}

/// `Q((info - threshold) sqrt(n / V))`; a vanishing dispersion degenerates to a step.
fn block_error(info: f64, disp: f64, threshold: f64, n: f64) -> f64 {
    let margin = info - threshold;
    if disp <= 0.0 {
        return if margin < 0.0 { 1.0 } else { 0.0 };
    }
    q_function(margin * (n / disp).sqrt())
}

/// Simulates `config.trials` packets sent with `schedule`.
///
/// Fbl decisions need `rate` to carry a blocklength.
pub fn run_monte_carlo(
    protocol: ProtocolKind,
    schedule: &PowerSchedule,
    rate: RateSpec,
    config: &SimulationConfig,
) -> Result<SimulationReport> {
    if config.trials < MIN_TRIALS {
        return Err(Error::Config(format!(
            "at least {MIN_TRIALS} trials are required, got {}",
            config.trials
        )));
    }
    if config.threads == Some(0) {
        return Err(Error::Config("thread count must be positive".into()));
    }
    let powers = schedule.powers().to_vec();
    let m = powers.len();
    if m > crate::allocator::MAX_ROUNDS {
        return Err(Error::InvalidRounds(m));
    }
    let r = rate.rate();
    let blocklength = match config.mode {
        DecisionMode::Fbl => rate
            .blocklength()
            .ok_or(Error::MissingBlocklength("fbl decisions"))?
            .channel_uses(),
        _ => 0,
    };
    let conditional = match config.mode {
        DecisionMode::Asymptotic => {
            let law = PdpLaw::new(protocol, m, r, config.ir_threshold)?;
            (1..=m)
                .map(|k| {
                    (law.log_coefficient(k) - law.log_coefficient(k - 1) - powers[k - 1].ln())
                        .exp()
                        .min(1.0)
                })
                .collect()
        }
        _ => Vec::new(),
    };
    let decider = Decider {
        protocol,
        mode: config.mode,
        phi: phi(r).value(),
        rate: r.nats(),
        ir_threshold: r.nats() * config.ir_threshold.rate_multiplier(m),
        conditional,
        blocklength,
        powers,
    };

    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let chunks = config.trials.div_ceil(CHUNK_TRIALS);
    let work = || -> Vec<Tally> {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let n = CHUNK_TRIALS.min(config.trials - c * CHUNK_TRIALS);
                decider.run_chunk(&base, c * CHUNK_TRIALS, n)
            })
            .collect()
    };
    let tallies = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    // reduce in chunk order so floating sums do not depend on scheduling
    let mut prefix_failures = vec![0u64; m + 1];
    let mut consumed = 0.0;
    let mut rounds = 0u64;
    for t in &tallies {
        for (acc, x) in prefix_failures.iter_mut().zip(&t.prefix_failures) {
            *acc += x;
        }
        consumed += t.consumed_power;
        rounds += t.rounds;
    }
    let n = config.trials as f64;
    let failures = prefix_failures[m];
    let p = failures as f64 / n;
    let std_error = (p * (1.0 - p) / n).sqrt();
    Ok(SimulationReport {
        protocol,
        mode: config.mode,
        trials: config.trials,
        seed: config.seed,
        failures,
        empirical_pdp: p,
        std_error,
        ci_half_width: 1.96 * std_error,
        prefix_failures,
        mean_consumed_power: consumed / n,
        mean_rounds: rounds as f64 / n,
    })
}

/// Simulated against analytic average power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerComparison {
    pub empirical: f64,
    /// `sum rho_m E_{m-1}` with `E` from the model matching the decision
    /// mode; `None` for Fbl, which has no tractable prefix law here.
    pub analytic: Option<f64>,
    pub relative_gap: Option<f64>,
}

pub fn empirical_power_metrics(
    report: &SimulationReport,
    schedule: &PowerSchedule,
    rate: Rate,
    threshold: IrThreshold,
) -> Result<PowerComparison> {
    let powers = schedule.powers();
    let prefix = match report.mode {
        DecisionMode::Exact => Some(exact_rayleigh_prefix_pdps(report.protocol, powers, rate, threshold)?),
        DecisionMode::Asymptotic => {
            let law = PdpLaw::new(report.protocol, powers.len(), rate, threshold)?;
            // the simulated rule caps each conditional probability at one
            let mut e = vec![1.0];
            for k in 1..=powers.len() {
                let c = (law.log_coefficient(k) - law.log_coefficient(k - 1) - powers[k - 1].ln()).exp();
                e.push(e[k - 1] * c.min(1.0));
            }
            Some(e)
        }
        DecisionMode::Fbl => None,
    };
    let analytic = prefix.map(|e| powers.iter().zip(&e).map(|(p, e)| p * e).sum::<f64>());
    Ok(PowerComparison {
        empirical: report.mean_consumed_power,
        analytic,
        relative_gap: analytic.map(|a| (report.mean_consumed_power - a).abs() / a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::BlocklengthSpec;

    fn sched(p: &[f64]) -> PowerSchedule {
        PowerSchedule::new(p.to_vec()).unwrap()
    }

    fn rate1() -> RateSpec {
        RateSpec::from(Rate::new(1.0).unwrap())
    }

    #[test]
    fn rejects_too_few_trials() {
        let cfg = SimulationConfig::new(999, 1, DecisionMode::Exact);
        assert!(run_monte_carlo(ProtocolKind::Arq, &sched(&[10.0]), rate1(), &cfg).is_err());
    }

    #[test]
    fn huge_power_never_fails() {
        let cfg = SimulationConfig::new(1000, 3, DecisionMode::Exact);
        let rep = run_monte_carlo(ProtocolKind::Arq, &sched(&[1e12, 1e12]), rate1(), &cfg).unwrap();
        assert_eq!(rep.failures, 0);
        assert_eq!(rep.empirical_pdp, 0.0);
        assert_eq!(rep.mean_rounds, 1.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = sched(&[10.0, 30.0]);
        let base = SimulationConfig::new(100_003, 42, DecisionMode::Exact);
        let one = run_monte_carlo(ProtocolKind::Cc, &s, rate1(), &base.clone().with_threads(Some(1))).unwrap();
        let four = run_monte_carlo(ProtocolKind::Cc, &s, rate1(), &base.with_threads(Some(4))).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn single_round_arq_matches_outage() {
        let cfg = SimulationConfig::new(200_000, 9, DecisionMode::Exact);
        let rep = run_monte_carlo(ProtocolKind::Arq, &sched(&[20.0]), rate1(), &cfg).unwrap();
        let p = -(-(std::f64::consts::E - 1.0) / 20.0).exp_m1();
        assert!(rep.sigmas_from(p) < 4.0, "{} vs {p}", rep.empirical_pdp);
    }

    #[test]
    fn asymptotic_mode_follows_law() {
        let cfg = SimulationConfig::new(400_000, 5, DecisionMode::Asymptotic);
        let s = sched(&[20.0, 40.0]);
        let rep = run_monte_carlo(ProtocolKind::Arq, &s, rate1(), &cfg).unwrap();
        let phi = std::f64::consts::E - 1.0;
        let expected = phi * phi / 800.0;
        assert!(rep.sigmas_from(expected) < 4.0);
        let cmp = empirical_power_metrics(&rep, &s, Rate::new(1.0).unwrap(), IrThreshold::default()).unwrap();
        assert!(cmp.relative_gap.unwrap() < 0.01);
    }

    #[test]
    fn fbl_needs_blocklength() {
        let cfg = SimulationConfig::new(1000, 5, DecisionMode::Fbl);
        let e = run_monte_carlo(ProtocolKind::Ir, &sched(&[20.0]), rate1(), &cfg);
        assert!(matches!(e, Err(Error::MissingBlocklength(_))));
        let spec = RateSpec::from(BlocklengthSpec::new(200, 200.0).unwrap());
        let rep = run_monte_carlo(ProtocolKind::Ir, &sched(&[20.0, 40.0]), spec, &cfg).unwrap();
        assert!(rep.empirical_pdp < 0.1);
    }

    #[test]
    fn prefix_counts_are_nested() {
        let cfg = SimulationConfig::new(50_000, 8, DecisionMode::Exact);
        let rep = run_monte_carlo(ProtocolKind::Ir, &sched(&[3.0, 5.0, 9.0]), rate1(), &cfg).unwrap();
        assert_eq!(rep.prefix_failures[0], 50_000);
        assert!(rep.prefix_failures.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(rep.failures, rep.prefix_failures[3]);
    }

    #[test]
    fn trial_windows_do_not_depend_on_chunking() {
        // a lone trial read at its own window matches the same trial inside a run
        let decider = Decider {
            protocol: ProtocolKind::Arq,
            mode: DecisionMode::Asymptotic,
            powers: vec![3.0, 4.0, 5.0],
            phi: 1.0,
            rate: 1.0,
            ir_threshold: 1.0,
            conditional: vec![0.5, 0.5, 0.5],
            blocklength: 0,
        };
        let base = ChaCha8Rng::seed_from_u64(77);
        let whole = decider.run_chunk(&base, 0, 500);
        let mut parts = vec![0u64; 4];
        for t in 0..500 {
            let one = decider.run_chunk(&base, t, 1);
            for (a, b) in parts.iter_mut().zip(&one.prefix_failures) {
                *a += b;
            }
        }
        assert_eq!(parts, whole.prefix_failures);
    }

    #[test]
    fn mode_round_trips() {
        for m in [DecisionMode::Asymptotic, DecisionMode::Exact, DecisionMode::Fbl] {
            assert_eq!(m.to_string().parse::<DecisionMode>().unwrap(), m);
        }
    }
}
