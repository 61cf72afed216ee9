//! Outage and packet-drop probability laws.
//!
//! Every asymptotic packet-drop law here has the form
//! `E_m = C_m / prod_{i<=m} rho_i`, with
//!
//! | protocol | `C_m`             |
//! |----------|-------------------|
//! | ARQ      | `phi^m`           |
//! | CC-HARQ  | `phi^m / m!`      |
//! | IR-HARQ  | `psi_m(R*)`       |
//!
//! All of them are evaluated in the log domain so that schedules reaching
//! 80 dB per round do not overflow.

use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::protocol::{IrThreshold, ProtocolKind};
use crate::psi::PsiTable;
use crate::quadrature;
use crate::rate::{phi, BlocklengthSpec, Rate};

/// Absolute tolerance of the finite-blocklength integral.
pub const FBL_TOLERANCE: f64 = 1e-10;
/// Upper truncation of the channel-gain integral; `e^-40` is below 5e-18.
pub const FBL_Z_MAX: f64 = 40.0;
/// Absolute tolerance of the exact Rayleigh packet-drop quadrature.
pub const EXACT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    AsymptoticTaylor,
    ExactRayleigh,
    FblClosedForm,
    FblIntegral,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::AsymptoticTaylor => "asymptotic",
            ModelKind::ExactRayleigh => "exact",
            ModelKind::FblClosedForm => "fbl_closed_form",
            ModelKind::FblIntegral => "fbl_integral",
        }
    }

    pub fn needs_blocklength(self) -> bool {
        matches!(self, ModelKind::FblClosedForm | ModelKind::FblIntegral)
    }
}

/// Single-round outage law; the finite-blocklength laws carry their `(n, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageModel {
    AsymptoticTaylor,
    ExactRayleigh,
    FblClosedForm(BlocklengthSpec),
    FblIntegral(BlocklengthSpec),
}

impl OutageModel {
    pub fn from_parts(kind: ModelKind, blocklength: Option<BlocklengthSpec>) -> Result<Self> {
        match (kind, blocklength) {
            (ModelKind::AsymptoticTaylor, _) => Ok(OutageModel::AsymptoticTaylor),
            (ModelKind::ExactRayleigh, _) => Ok(OutageModel::ExactRayleigh),
            (ModelKind::FblClosedForm, Some(b)) => Ok(OutageModel::FblClosedForm(b)),
            (ModelKind::FblIntegral, Some(b)) => Ok(OutageModel::FblIntegral(b)),
            (k, None) => Err(Error::MissingBlocklength(k.name())),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            OutageModel::AsymptoticTaylor => ModelKind::AsymptoticTaylor,
            OutageModel::ExactRayleigh => ModelKind::ExactRayleigh,
            OutageModel::FblClosedForm(_) => ModelKind::FblClosedForm,
            OutageModel::FblIntegral(_) => ModelKind::FblIntegral,
        }
    }

    pub fn blocklength(&self) -> Option<BlocklengthSpec> {
        match self {
            OutageModel::FblClosedForm(b) | OutageModel::FblIntegral(b) => Some(*b),
            _ => None,
        }
    }
}

/// A single-round outage value.
///
/// The first-order Taylor law `phi / rho` exceeds one whenever `rho < phi`;
/// such values are returned unclamped with `outside_validity` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageValue {
    pub probability: f64,
    pub outside_validity: bool,
}

/// Gaussian tail `Q(x) = Pr[N(0,1) > x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Channel dispersion `V(x) = 1 - (1 + x)^-2`.
pub fn dispersion(snr: f64) -> f64 {
    1.0 - (1.0 + snr).powi(-2)
}

/// Conditional block-error probability given an instantaneous SNR, under the
/// normal approximation with `n` channel uses.
pub fn normal_approx_error(snr: f64, rate: f64, n: u32) -> f64 {
    let margin = snr.ln_1p() - rate;
    let v = dispersion(snr);
    if v <= 0.0 {
        return if margin < 0.0 { 1.0 } else { 0.0 };
    }
    q_function(margin * (n as f64 / v).sqrt())
}

fn check_power(rho: f64, round: usize) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositivePower { round, value: rho })
    }
}

fn check_schedule(powers: &[f64]) -> Result<()> {
    if powers.is_empty() {
        return Err(Error::EmptySchedule);
    }
    powers.iter().enumerate().try_for_each(|(i, &p)| check_power(p, i + 1))
}

/// Outage probability of one transmission at SNR `rho` under `model`.
pub fn outage_single_round(rho: f64, rate: Rate, model: OutageModel) -> Result<OutageValue> {
    check_power(rho, 1)?;
    let phi = phi(rate).value();
    let probability = match model {
        OutageModel::AsymptoticTaylor => phi / rho,
        OutageModel::ExactRayleigh => -(-phi / rho).exp_m1(),
        OutageModel::FblClosedForm(b) => fbl_closed_form(rho, rate, b),
        OutageModel::FblIntegral(b) => fbl_integral(rho, rate, b)?,
    };
    Ok(OutageValue {
        probability,
        outside_validity: probability > 1.0,
    })
}

/// Linearised-Q closed form of the finite-blocklength outage.
///
/// The Q-function is replaced by a ramp of slope `delta` around
/// `kappa = (e^R - 1) / rho`; the result is clamped to `[0, 1]` because the
/// ramp can leave the unit interval at very low SNR.
fn fbl_closed_form(rho: f64, rate: Rate, b: BlocklengthSpec) -> f64 {
    let r = rate.nats();
    let kappa = r.exp_m1() / rho;
    let delta = (b.channel_uses() as f64 * rho * rho / (2.0 * r).exp_m1()).sqrt();
    let half_width = (PI / (2.0 * delta * delta)).sqrt();
    // e^c - e^-c = 2 sinh(c)
    let eps = 1.0 - delta / (2.0 * PI).sqrt() * (-kappa).exp() * 2.0 * half_width.sinh();
    eps.clamp(0.0, 1.0)
}

/// Expectation of the normal-approximation error over a unit-mean exponential gain.
fn fbl_integral(rho: f64, rate: Rate, b: BlocklengthSpec) -> Result<f64> {
    let r = rate.nats();
    let n = b.channel_uses();
    let integrand = |z: f64| (-z).exp() * normal_approx_error(rho * z, r, n);
    // the error probability drops from ~1 to ~0 within a few 1/delta of kappa
    let kappa = r.exp_m1() / rho;
    let delta = (n as f64 * rho * rho / (2.0 * r).exp_m1()).sqrt();
    let spread = 1.0 / delta;
    let breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|k| kappa + k * spread)
        .collect();
    let v = quadrature::integrate(integrand, 0.0, FBL_Z_MAX, FBL_TOLERANCE, &breaks)?;
    Ok(v.clamp(0.0, 1.0))
}

/// Coefficients `C_0 ..= C_M` of an asymptotic packet-drop law, stored as logs.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpLaw {
    protocol: ProtocolKind,
    log_coefficients: Vec<f64>,
}

impl PdpLaw {
    /// Law for a schedule of `rounds` transmissions.
    ///
    /// For IR-HARQ the psi table is evaluated at `R` or `M * R` depending on
    /// `threshold`; the same argument serves every prefix of the schedule.
    pub fn new(protocol: ProtocolKind, rounds: usize, rate: Rate, threshold: IrThreshold) -> Result<Self> {
        let log_phi = phi(rate).value().ln();
        let log_coefficients = match protocol {
            ProtocolKind::Arq => (0..=rounds).map(|m| m as f64 * log_phi).collect(),
            ProtocolKind::Cc => {
                let mut log_fact = 0.0;
                (0..=rounds)
                    .map(|m| {
                        if m > 0 {
                            log_fact += (m as f64).ln();
                        }
                        m as f64 * log_phi - log_fact
                    })
                    .collect()
            }
            ProtocolKind::Ir => {
                let argument = rate.scaled(threshold.rate_multiplier(rounds))?;
                PsiTable::build(rounds, argument)?
                    .values()
                    .iter()
                    .map(|v| v.ln())
                    .collect()
            }
        };
        Ok(PdpLaw {
            protocol,
            log_coefficients,
        })
    }

    pub fn protocol(&self) -> ProtocolKind {
        self.protocol
    }

    pub fn rounds(&self) -> usize {
        self.log_coefficients.len() - 1
    }

    pub fn log_coefficient(&self, m: usize) -> f64 {
        self.log_coefficients[m]
    }

    pub fn coefficient(&self, m: usize) -> f64 {
        self.log_coefficients[m].exp()
    }

    /// `log E_m` for the first `m` rounds of `powers`.
    pub fn log_prefix_pdp(&self, powers: &[f64], m: usize) -> f64 {
        let log_product: f64 = powers[..m].iter().map(|p| p.ln()).sum();
        self.log_coefficients[m] - log_product
    }

    /// `E_0 ..= E_M`; `E_0 = 1`.
    pub fn prefix_pdps(&self, powers: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(powers.len() + 1);
        let mut log_product = 0.0;
        out.push(1.0);
        for (m, p) in powers.iter().enumerate() {
            log_product += p.ln();
            out.push((self.log_coefficients[m + 1] - log_product).exp());
        }
        out
    }

    /// Packet-drop probability after all rounds of `powers`.
    pub fn pdp(&self, powers: &[f64]) -> Result<f64> {
        check_schedule(powers)?;
        debug_assert_eq!(powers.len(), self.rounds());
        Ok(self.log_prefix_pdp(powers, powers.len()).exp())
    }

    /// Expected transmitted power `sum_m rho_m E_{m-1}`.
    pub fn average_power(&self, powers: &[f64]) -> f64 {
        let pdps = self.prefix_pdps(powers);
        powers.iter().zip(&pdps).map(|(p, e)| p * e).sum()
    }
}

/// `phi^M / prod(rho_m)`.
pub fn pdp_arq(powers: &[f64], rate: Rate) -> Result<f64> {
    check_schedule(powers)?;
    PdpLaw::new(ProtocolKind::Arq, powers.len(), rate, IrThreshold::default())?.pdp(powers)
}

/// `phi^M / (M! prod(rho_m))`.
pub fn pdp_cc(powers: &[f64], rate: Rate) -> Result<f64> {
    check_schedule(powers)?;
    PdpLaw::new(ProtocolKind::Cc, powers.len(), rate, IrThreshold::default())?.pdp(powers)
}

/// `psi_M(R*) / prod(rho_m)`.
pub fn pdp_ir(powers: &[f64], rate: Rate, threshold: IrThreshold) -> Result<f64> {
    check_schedule(powers)?;
    PdpLaw::new(ProtocolKind::Ir, powers.len(), rate, threshold)?.pdp(powers)
}

/// Asymptotic packet-drop probability for any protocol.
pub fn pdp(protocol: ProtocolKind, powers: &[f64], rate: Rate, threshold: IrThreshold) -> Result<f64> {
    match protocol {
        ProtocolKind::Arq => pdp_arq(powers, rate),
        ProtocolKind::Cc => pdp_cc(powers, rate),
        ProtocolKind::Ir => pdp_ir(powers, rate, threshold),
    }
}

/// Exact Rayleigh failure probabilities `E_0 ..= E_M` (no Taylor step).
///
/// ARQ is a product of per-round outages. CC fails through round `m` iff
/// `sum_{i<=m} rho_i z_i < e^R - 1`, IR iff `sum_{i<=m} log(1 + rho_i z_i) < R*`;
/// both sums are monotone in `m`, so the prefix event is a single CDF,
/// evaluated by nested quadrature over the gains.
pub fn exact_rayleigh_prefix_pdps(
    protocol: ProtocolKind,
    powers: &[f64],
    rate: Rate,
    threshold: IrThreshold,
) -> Result<Vec<f64>> {
    check_schedule(powers)?;
    let phi = phi(rate).value();
    let mut out = vec![1.0];
    match protocol {
        ProtocolKind::Arq => {
            let mut acc = 1.0;
            for p in powers {
                acc *= -(-phi / p).exp_m1();
                out.push(acc);
            }
        }
        ProtocolKind::Cc => {
            for m in 1..=powers.len() {
                out.push(nested_cdf(&powers[..m], phi, CombiningLaw::Snr)?);
            }
        }
        ProtocolKind::Ir => {
            let threshold_nats = rate.nats() * threshold.rate_multiplier(powers.len());
            for m in 1..=powers.len() {
                out.push(nested_cdf(
                    &powers[..m],
                    threshold_nats,
                    CombiningLaw::MutualInformation,
                )?);
            }
        }
    }
    Ok(out)
}

/// Exact Rayleigh packet-drop probability after every round of `powers`.
pub fn exact_rayleigh_pdp(protocol: ProtocolKind, powers: &[f64], rate: Rate, threshold: IrThreshold) -> Result<f64> {
    Ok(*exact_rayleigh_prefix_pdps(protocol, powers, rate, threshold)?
        .last()
        .expect("non-empty"))
}

#[derive(Clone, Copy)]
enum CombiningLaw {
    /// `sum rho_i z_i < t`
    Snr,
    /// `sum log(1 + rho_i z_i) < t`
    MutualInformation,
}

impl CombiningLaw {
    /// Largest gain `z` with the last round's contribution still below `t`.
    fn gain_limit(self, rho: f64, t: f64) -> f64 {
        match self {
            CombiningLaw::Snr => t / rho,
            CombiningLaw::MutualInformation => t.exp_m1() / rho,
        }
    }

    fn contribution(self, rho: f64, z: f64) -> f64 {
        match self {
            CombiningLaw::Snr => rho * z,
            CombiningLaw::MutualInformation => (rho * z).ln_1p(),
        }
    }
}

fn nested_cdf(powers: &[f64], t: f64, law: CombiningLaw) -> Result<f64> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let v = cdf_rec(powers, t, law, &failure);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn cdf_rec(powers: &[f64], t: f64, law: CombiningLaw, failure: &RefCell<Option<Error>>) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (&last, rest) = powers.split_last().expect("non-empty prefix");
    let limit = law.gain_limit(last, t);
    if rest.is_empty() {
        return -(-limit).exp_m1();
    }
    let integrand = |z: f64| (-z).exp() * cdf_rec(rest, t - law.contribution(last, z), law, failure);
    match quadrature::integrate(integrand, 0.0, limit, EXACT_TOLERANCE, &[]) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn r1() -> Rate {
        Rate::new(1.0).unwrap()
    }

    #[test]
    fn single_round_examples() {
        let a = outage_single_round(100.0, r1(), OutageModel::AsymptoticTaylor).unwrap();
        assert_relative_eq!(a.probability, 0.01718281828459045, max_relative = 1e-14);
        assert!(!a.outside_validity);
        let e = outage_single_round(100.0, r1(), OutageModel::ExactRayleigh).unwrap();
        assert_relative_eq!(
            e.probability,
            1.0 - (-0.01718281828459045f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn taylor_above_one_is_flagged_not_clamped() {
        let v = outage_single_round(1.0, r1(), OutageModel::AsymptoticTaylor).unwrap();
        assert!(v.outside_validity);
        assert_relative_eq!(v.probability, std::f64::consts::E - 1.0);
    }

    #[test]
    fn rejects_non_positive_power() {
        for bad in [0.0, -3.0, f64::NAN] {
            assert!(matches!(
                outage_single_round(bad, r1(), OutageModel::ExactRayleigh),
                Err(Error::NonPositivePower { .. })
            ));
        }
        assert!(matches!(
            pdp_arq(&[10.0, 0.0], r1()),
            Err(Error::NonPositivePower { round: 2, .. })
        ));
        assert!(matches!(pdp_cc(&[], r1()), Err(Error::EmptySchedule)));
    }

    #[test]
    fn fbl_kinds_need_blocklength() {
        assert!(matches!(
            OutageModel::from_parts(ModelKind::FblIntegral, None),
            Err(Error::MissingBlocklength(_))
        ));
        let b = BlocklengthSpec::new(200, 200.0).unwrap();
        assert_eq!(
            OutageModel::from_parts(ModelKind::FblClosedForm, Some(b)).unwrap(),
            OutageModel::FblClosedForm(b)
        );
    }

    #[test]
    fn inverting_taylor_law_at_1e5_needs_over_50_db() {
        let rho = phi(r1()).value() / 1e-5;
        assert_relative_eq!(rho, 171828.1828459045, max_relative = 1e-12);
        assert!(crate::rate::to_db(rho) > 50.0);
        assert_relative_eq!(crate::rate::to_db(rho), 52.3509, epsilon = 1e-4);
    }

    #[test]
    fn pdp_examples() {
        assert_relative_eq!(pdp_arq(&[10.048, 29.382], r1()).unwrap(), 1.0e-2, max_relative = 1e-4);
        let phi = phi(r1()).value();
        let rho = phi * (1.0f64 / (2.0 * 1e-4)).sqrt();
        assert_relative_eq!(pdp_cc(&[rho, rho], r1()).unwrap(), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(pdp_cc(&[50.0], r1()).unwrap(), phi / 50.0, max_relative = 1e-15);
        assert_relative_eq!(
            pdp_ir(&[50.0], r1(), IrThreshold::PerRoundRate).unwrap(),
            phi / 50.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            pdp_ir(&[100.0, 100.0], r1(), IrThreshold::ParentRate).unwrap(),
            8.38905609893065e-4,
            max_relative = 1e-12
        );
    }

    #[test]
    fn arq_prefix_pdps_and_average() {
        let law = PdpLaw::new(ProtocolKind::Arq, 2, r1(), IrThreshold::default()).unwrap();
        let p = [100.0, 3000.0];
        let e = law.prefix_pdps(&p);
        assert_eq!(e[0], 1.0);
        let phi = phi(r1()).value();
        assert_relative_eq!(e[1], phi / 100.0, max_relative = 1e-14);
        assert_relative_eq!(
            law.average_power(&p),
            100.0 + 3000.0 * phi / 100.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn exact_cc_single_round_matches_closed_form() {
        let e = exact_rayleigh_pdp(ProtocolKind::Cc, &[20.0], r1(), IrThreshold::default()).unwrap();
        assert_relative_eq!(e, 1.0 - (-phi(r1()).value() / 20.0).exp(), max_relative = 1e-14);
    }

    #[test]
    fn exact_cc_two_rounds_matches_hypoexponential_cdf() {
        // Pr[a X + b Y < t] for distinct a, b
        let (a, b) = (17.0, 85.0);
        let t = phi(r1()).value();
        let reference = 1.0 - (a * (-t / a).exp() - b * (-t / b).exp()) / (a - b);
        let e = exact_rayleigh_pdp(ProtocolKind::Cc, &[a, b], r1(), IrThreshold::default()).unwrap();
        assert_relative_eq!(e, reference, max_relative = 1e-9);
    }
}
