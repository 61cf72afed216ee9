//! Optimal transmit-power schedules for ARQ, Chase-combining HARQ and
//! incremental-redundancy HARQ over Rayleigh block fading, with the numeric
//! machinery used to certify them.
//!
//! - [`outage`]: single-round outage laws and packet-drop probabilities.
//! - [`psi`]: IR-HARQ outage coefficients.
//! - [`allocator`]: closed-form optimal schedules, baselines and power metrics.
//! - [`verifier`]: brute-force oracle, KKT, convexity and monotonicity checks.
//! - [`simulator`]: Monte Carlo over i.i.d. block fading.

pub mod allocator;
pub mod error;
pub mod outage;
pub mod protocol;
pub mod psi;
pub mod quadrature;
pub mod rate;
pub mod simulator;
pub mod verifier;

pub use allocator::{
    allocate, allocate_arq, allocate_cc, allocate_closed_form, allocate_ir, allocate_two_shot, equal_power_baseline,
    power_metrics, Allocation, AllocationRequest, PowerMetrics, PowerSchedule, ValidityWarning,
};
pub use error::{Error, Result};
pub use outage::{outage_single_round, pdp, pdp_arq, pdp_cc, pdp_ir, ModelKind, OutageModel};
pub use protocol::{IrThreshold, ProtocolKind};
pub use psi::{psi_convolution_oracle, psi_series, PsiTable};
pub use rate::{phi, BlocklengthSpec, Phi, Rate, RateSpec};
pub use simulator::{run_monte_carlo, DecisionMode, SimulationConfig, SimulationReport};
