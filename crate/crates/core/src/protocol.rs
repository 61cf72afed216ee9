use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Retransmission protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// Plain ARQ: failed copies are discarded.
    Arq,
    /// Chase combining: copies are maximal-ratio combined.
    Cc,
    /// Incremental redundancy: mutual information accumulates across rounds.
    Ir,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::Arq, ProtocolKind::Cc, ProtocolKind::Ir];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Arq => "arq",
            ProtocolKind::Cc => "cc",
            ProtocolKind::Ir => "ir",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "arq" => Ok(ProtocolKind::Arq),
            "cc" | "cc-harq" | "ccharq" => Ok(ProtocolKind::Cc),
            "ir" | "ir-harq" | "irharq" => Ok(ProtocolKind::Ir),
            other => Err(Error::Config(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Decoding threshold used by the IR-HARQ law.
///
/// `PerRoundRate` compares the accumulated mutual information against `R`;
/// `ParentRate` compares it against `M * R`, the rate of the parent codeword
/// split over `M` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrThreshold {
    #[default]
    PerRoundRate,
    ParentRate,
}

impl IrThreshold {
    /// Multiplier applied to `R` for a schedule of `rounds` transmissions.
    pub fn rate_multiplier(self, rounds: usize) -> f64 {
        match self {
            IrThreshold::PerRoundRate => 1.0,
            IrThreshold::ParentRate => rounds as f64,
        }
    }
}

impl FromStr for IrThreshold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "per-round" | "per-round-rate" => Ok(IrThreshold::PerRoundRate),
            "parent" | "parent-rate" => Ok(IrThreshold::ParentRate),
            other => Err(Error::Config(format!("unknown IR threshold mode '{other}'"))),
        }
    }
}

impl fmt::Display for IrThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IrThreshold::PerRoundRate => "per-round",
            IrThreshold::ParentRate => "parent",
        })
    }
}
