use serde::Serialize;

use super::{AllocationRequest, PowerSchedule};
use crate::error::Result;
use crate::outage::PdpLaw;
use crate::protocol::{IrThreshold, ProtocolKind};
use crate::rate::{to_db, Rate};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerMetrics {
    /// `sum rho_m E_{m-1}` with `E_0 = 1`.
    pub avg_power: f64,
    /// `avg_power / M`.
    pub avg_power_per_transmission: f64,
    /// `sum rho_m`, spent when every round is used.
    pub total_power: f64,
    pub per_round_db: Vec<f64>,
    pub avg_power_db: f64,
    pub avg_power_per_transmission_db: f64,
    pub total_power_db: f64,
}

impl PowerMetrics {
    /// Average in the requested convention.
    pub fn average(&self, per_transmission: bool) -> f64 {
        if per_transmission {
            self.avg_power_per_transmission
        } else {
            self.avg_power
        }
    }
}

/// Average, total and per-round dB figures of a schedule under the
/// protocol's asymptotic law.
pub fn power_metrics(
    schedule: &PowerSchedule,
    rate: Rate,
    protocol: ProtocolKind,
    threshold: IrThreshold,
) -> Result<PowerMetrics> {
    let powers = schedule.powers();
    let law = PdpLaw::new(protocol, powers.len(), rate, threshold)?;
    let avg_power = law.average_power(powers);
    let total_power: f64 = powers.iter().sum();
    let per_tx = avg_power / powers.len() as f64;
    Ok(PowerMetrics {
        avg_power,
        avg_power_per_transmission: per_tx,
        total_power,
        per_round_db: schedule.powers_db(),
        avg_power_db: to_db(avg_power),
        avg_power_per_transmission_db: to_db(per_tx),
        total_power_db: to_db(total_power),
    })
}

/// The single power that, repeated every round, meets the target exactly:
/// `rho = (C_M / eps)^(1/M)`.
pub fn equal_power_baseline(request: &AllocationRequest) -> Result<PowerSchedule> {
    request.validate()?;
    let law = request.law()?;
    let m = request.rounds;
    let log_rho = (law.log_coefficient(m) - request.target.ln()) / m as f64;
    PowerSchedule::new(vec![log_rho.exp(); m])
}
