//! Globally optimal per-round power schedules.
//!
//! Minimising the expected transmitted power `sum rho_m E_{m-1}` subject to
//! `E_M = eps` under the asymptotic laws has a closed-form KKT solution for all
//! three protocols: a last-round power fixed by the multiplier `lambda`, then a
//! backward recursion `rho_m = sqrt(2 g_m rho_{m+1})` that does not involve
//! `lambda` at all.
//!
//! `lambda` follows the convention of the per-transmission objective
//! `(1/M) sum rho_m E_{m-1} + lambda (E_M - eps)`.

mod exponents;
mod metrics;

pub use exponents::ExponentTable;
pub use metrics::{equal_power_baseline, power_metrics, PowerMetrics};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outage::PdpLaw;
use crate::protocol::{IrThreshold, ProtocolKind};
use crate::psi::PsiTable;
use crate::rate::{phi, Rate, RateSpec};

/// Largest supported number of rounds.
pub const MAX_ROUNDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationRequest {
    pub protocol: ProtocolKind,
    pub rounds: usize,
    pub rate: RateSpec,
    pub target: f64,
    #[serde(default)]
    pub ir_threshold: IrThreshold,
}

impl AllocationRequest {
    pub fn new(protocol: ProtocolKind, rounds: usize, rate: impl Into<RateSpec>, target: f64) -> Self {
        AllocationRequest {
            protocol,
            rounds,
            rate: rate.into(),
            target,
            ir_threshold: IrThreshold::default(),
        }
    }

    pub fn with_ir_threshold(mut self, threshold: IrThreshold) -> Self {
        self.ir_threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.rounds > MAX_ROUNDS {
            return Err(Error::InvalidRounds(self.rounds));
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::InvalidTarget(self.target));
        }
        Ok(())
    }

    /// Asymptotic packet-drop law matching this request.
    pub fn law(&self) -> Result<PdpLaw> {
        PdpLaw::new(self.protocol, self.rounds, self.rate.rate(), self.ir_threshold)
    }
}

/// Ordered per-round SNRs (noise power normalised to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSchedule {
    powers: Vec<f64>,
    /// Multiplier of the reliability constraint when produced by an allocator.
    lagrange: Option<f64>,
}

impl PowerSchedule {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::EmptySchedule);
        }
        if let Some((i, &v)) = powers.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositivePower { round: i + 1, value: v });
        }
        Ok(PowerSchedule { powers, lagrange: None })
    }

    fn with_lagrange(powers: Vec<f64>, lagrange: f64) -> Result<Self> {
        let mut s = PowerSchedule::new(powers)?;
        s.lagrange = Some(lagrange);
        Ok(s)
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn lagrange(&self) -> Option<f64> {
        self.lagrange
    }

    pub fn rounds(&self) -> usize {
        self.powers.len()
    }

    pub fn powers_db(&self) -> Vec<f64> {
        self.powers.iter().map(|p| crate::rate::to_db(*p)).collect()
    }

    /// Every power multiplied by `factor`; drops the multiplier.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        PowerSchedule::new(self.powers.iter().map(|p| p * factor).collect())
    }
}

/// A round whose power is at or below `phi`, where the first-order outage
/// `phi / rho` is no longer a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityWarning {
    pub round: usize,
    pub power: f64,
    pub phi: f64,
}

impl std::fmt::Display for ValidityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "round {}: power {:.6} <= phi {:.6}; first-order outage model out of range",
            self.round, self.power, self.phi
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub protocol: ProtocolKind,
    pub rate: Rate,
    pub target: f64,
    pub ir_threshold: IrThreshold,
    pub schedule: PowerSchedule,
    pub warnings: Vec<ValidityWarning>,
}

fn validity_warnings(powers: &[f64], rate: Rate) -> Vec<ValidityWarning> {
    let phi = phi(rate).value();
    powers
        .iter()
        .enumerate()
        .filter(|(_, p)| **p <= phi)
        .map(|(i, p)| ValidityWarning {
            round: i + 1,
            power: *p,
            phi,
        })
        .collect()
}

fn expect_protocol(request: &AllocationRequest, expected: ProtocolKind) -> Result<()> {
    if request.protocol != expected {
        return Err(Error::ProtocolMismatch {
            expected: expected.name(),
            found: request.protocol.name(),
        });
    }
    Ok(())
}

/// Per-round quantities shared by the recursive and closed-form routes.
struct Ingredients {
    m: usize,
    log_phi: f64,
    log_eps: f64,
    psi: Option<PsiTable>,
}

impl Ingredients {
    fn new(request: &AllocationRequest) -> Result<Self> {
        request.validate()?;
        let rate = request.rate.rate();
        let psi = match request.protocol {
            ProtocolKind::Ir => {
                let arg = rate.scaled(request.ir_threshold.rate_multiplier(request.rounds))?;
                Some(PsiTable::build(request.rounds, arg)?)
            }
            _ => None,
        };
        Ok(Ingredients {
            m: request.rounds,
            log_phi: phi(rate).value().ln(),
            log_eps: request.target.ln(),
            psi,
        })
    }

    fn log_psi(&self, k: usize) -> f64 {
        self.psi.as_ref().expect("IR ingredients").get(k).ln()
    }
}

/// `log lambda` from the active constraint `E_M = eps`.
fn log_lagrange(protocol: ProtocolKind, ing: &Ingredients) -> f64 {
    let m = ing.m;
    let t = ExponentTable::new(m);
    let (o, p, q) = (t.o(), t.p(), t.q());
    let ln2 = std::f64::consts::LN_2;
    let log_m = (m as f64).ln();
    match protocol {
        // (phi^o / (M^o eps^p 2^q))^(1/o)
        ProtocolKind::Arq => (o * ing.log_phi - o * log_m - p * ing.log_eps - q * ln2) / o,
        // (phi^o / ((M! eps)^p prod_{k<M} (2/(M-k))^(p(M)-p(k))))^(1/o)
        ProtocolKind::Cc => {
            let log_fact: f64 = (1..=m).map(|k| (k as f64).ln()).sum();
            let product: f64 = (1..m)
                .map(|k| (p - exponents::p(k)) * (2.0 / (m - k) as f64).ln())
                .sum();
            (o * ing.log_phi - p * (log_fact + ing.log_eps) - product) / o
        }
        // (psi_M prod_{k<=M} psi_{k-1}^(2^(M-k)) / (M^o eps^p 2^q))^(1/o)
        ProtocolKind::Ir => {
            let product: f64 = (1..=m).map(|k| exponents::p(m - k) * ing.log_psi(k - 1)).sum();
            (ing.log_psi(m) + product - o * log_m - p * ing.log_eps - q * ln2) / o
        }
    }
}

/// `log rho_M` as a function of `log lambda`.
fn log_last_power(protocol: ProtocolKind, ing: &Ingredients, log_lambda: f64) -> f64 {
    let log_m = (ing.m as f64).ln();
    0.5 * match protocol {
        ProtocolKind::Arq => log_m + log_lambda + ing.log_phi,
        ProtocolKind::Cc => ing.log_phi + log_lambda,
        ProtocolKind::Ir => log_lambda + log_m + ing.log_psi(ing.m) - ing.log_psi(ing.m - 1),
    }
}

/// `log g_k` in `rho_k = sqrt(2 g_k rho_{k+1})`.
fn log_recursion_gain(protocol: ProtocolKind, ing: &Ingredients, k: usize) -> f64 {
    match protocol {
        ProtocolKind::Arq => ing.log_phi,
        ProtocolKind::Cc => ing.log_phi - (k as f64).ln(),
        ProtocolKind::Ir => ing.log_psi(k) - ing.log_psi(k - 1),
    }
}

/// Algorithm route: lambda, then rho_M, then the backward recursion.
fn recursive_log_powers(protocol: ProtocolKind, ing: &Ingredients, log_lambda: f64) -> Vec<f64> {
    let m = ing.m;
    let mut logs = vec![0.0; m];
    logs[m - 1] = log_last_power(protocol, ing, log_lambda);
    for k in (1..m).rev() {
        logs[k - 1] = 0.5 * (std::f64::consts::LN_2 + log_recursion_gain(protocol, ing, k) + logs[k]);
    }
    logs
}

/// Exponent-table route: each round directly from lambda.
fn closed_form_log_powers(protocol: ProtocolKind, ing: &Ingredients, log_lambda: f64) -> Vec<f64> {
    let m = ing.m;
    let t = ExponentTable::new(m);
    let ln2 = std::f64::consts::LN_2;
    let log_m = (m as f64).ln();
    (1..=m)
        .map(|r| match protocol {
            // sqrt(2^a phi^b (M lambda)^c)
            ProtocolKind::Arq => 0.5 * (t.a(r) * ln2 + t.b(r) * ing.log_phi + t.c(r) * (log_m + log_lambda)),
            // sqrt(2^a phi^b lambda^c) prod_{k=r}^{M-1} k^(-d(k-r+1))
            ProtocolKind::Cc => {
                let tail: f64 = (r..m).map(|k| t.d(k - r + 1) * (k as f64).ln()).sum();
                0.5 * (t.a(r) * ln2 + t.b(r) * ing.log_phi + t.c(r) * log_lambda) - tail
            }
            // 2^(a/2) (M lambda)^(c/2) prod_{k=r}^{M} (psi_k/psi_{k-1})^d(k-r+1)
            ProtocolKind::Ir => {
                let ratios: f64 = (r..=m)
                    .map(|k| t.d(k - r + 1) * (ing.log_psi(k) - ing.log_psi(k - 1)))
                    .sum();
                0.5 * t.a(r) * ln2 + 0.5 * t.c(r) * (log_m + log_lambda) + ratios
            }
        })
        .collect()
}

fn allocate_with(request: &AllocationRequest, expected: ProtocolKind) -> Result<Allocation> {
    expect_protocol(request, expected)?;
    let ing = Ingredients::new(request)?;
    let log_lambda = log_lagrange(expected, &ing);
    let powers: Vec<f64> = recursive_log_powers(expected, &ing, log_lambda)
        .into_iter()
        .map(f64::exp)
        .collect();
    let rate = request.rate.rate();
    Ok(Allocation {
        protocol: expected,
        rate,
        target: request.target,
        ir_threshold: request.ir_threshold,
        warnings: validity_warnings(&powers, rate),
        schedule: PowerSchedule::with_lagrange(powers, log_lambda.exp())?,
    })
}

/// Optimal ARQ schedule.
pub fn allocate_arq(request: &AllocationRequest) -> Result<Allocation> {
    allocate_with(request, ProtocolKind::Arq)
}

/// Optimal CC-HARQ schedule.
pub fn allocate_cc(request: &AllocationRequest) -> Result<Allocation> {
    allocate_with(request, ProtocolKind::Cc)
}

/// Optimal IR-HARQ schedule at the request's threshold mode.
pub fn allocate_ir(request: &AllocationRequest) -> Result<Allocation> {
    allocate_with(request, ProtocolKind::Ir)
}

/// Dispatches on `request.protocol`.
pub fn allocate(request: &AllocationRequest) -> Result<Allocation> {
    allocate_with(request, request.protocol)
}

/// The same optimum evaluated through the per-round exponent table instead
/// of the backward recursion. Powers only; used to cross-check the two routes.
pub fn allocate_closed_form(request: &AllocationRequest) -> Result<PowerSchedule> {
    let ing = Ingredients::new(request)?;
    let log_lambda = log_lagrange(request.protocol, &ing);
    let powers = closed_form_log_powers(request.protocol, &ing, log_lambda)
        .into_iter()
        .map(f64::exp)
        .collect();
    PowerSchedule::with_lagrange(powers, log_lambda.exp())
}

/// Two-round optimum by eliminating `rho_2` through the active constraint.
///
/// With `E_1 = C_1 / rho_1` and `E_2 = C_2 / (rho_1 rho_2)`, the objective
/// `rho_1 + C_1 C_2 / (eps rho_1^2)` is stationary at
/// `rho_1 = (2 C_1 C_2 / eps)^(1/3)`, `rho_2 = C_2 / (eps rho_1)`.
pub fn allocate_two_shot(request: &AllocationRequest) -> Result<Allocation> {
    if request.rounds != 2 {
        return Err(Error::InvalidRounds(request.rounds));
    }
    request.validate()?;
    let rate = request.rate.rate();
    let eps = request.target;
    let phi = phi(rate).value();
    let (rho1, rho2) = match request.protocol {
        ProtocolKind::Arq => (phi * (2.0 / eps).cbrt(), phi / eps * (eps / 2.0).cbrt()),
        ProtocolKind::Cc => (phi * eps.powf(-1.0 / 3.0), 0.5 * phi * eps.powf(-2.0 / 3.0)),
        ProtocolKind::Ir => {
            let arg = rate.scaled(request.ir_threshold.rate_multiplier(2))?;
            let psi = PsiTable::build(2, arg)?;
            let rho1 = (2.0 * psi.get(1) * psi.get(2) / eps).cbrt();
            (rho1, psi.get(2) / (eps * rho1))
        }
    };
    let powers = vec![rho1, rho2];
    Ok(Allocation {
        protocol: request.protocol,
        rate,
        target: eps,
        ir_threshold: request.ir_threshold,
        warnings: validity_warnings(&powers, rate),
        schedule: PowerSchedule::new(powers)?,
    })
}
