use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coding rate in nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Rate(f64);

impl Rate {
    pub fn new(nats: f64) -> Result<Self> {
        if nats.is_finite() && nats > 0.0 {
            Ok(Rate(nats))
        } else {
            Err(Error::InvalidRate(nats))
        }
    }

    #[inline]
    pub fn nats(self) -> f64 {
        self.0
    }

    /// Rate scaled by a positive factor, e.g. the parent-code rate `M * R`.
    pub fn scaled(self, factor: f64) -> Result<Self> {
        Rate::new(self.0 * factor)
    }
}

impl TryFrom<f64> for Rate {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Rate::new(v)
    }
}

impl From<Rate> for f64 {
    fn from(r: Rate) -> f64 {
        r.0
    }
}

/// Smallest blocklength for which the normal approximation is used.
pub const MIN_BLOCKLENGTH: u32 = 100;

/// `n` channel uses carrying `k` information nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlocklengthSpec {
    n: u32,
    k: f64,
}

impl BlocklengthSpec {
    pub fn new(n: u32, k: f64) -> Result<Self> {
        if n < MIN_BLOCKLENGTH || !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidBlocklength { n, k });
        }
        Ok(BlocklengthSpec { n, k })
    }

    pub fn channel_uses(&self) -> u32 {
        self.n
    }

    pub fn nats(&self) -> f64 {
        self.k
    }

    pub fn rate(&self) -> Rate {
        Rate(self.k / self.n as f64)
    }
}

/// Either a bare rate or a blocklength pair that implies one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSpec {
    Rate(Rate),
    Blocklength(BlocklengthSpec),
}

impl RateSpec {
    pub fn rate(&self) -> Rate {
        match self {
            RateSpec::Rate(r) => *r,
            RateSpec::Blocklength(b) => b.rate(),
        }
    }

    pub fn blocklength(&self) -> Option<BlocklengthSpec> {
        match self {
            RateSpec::Rate(_) => None,
            RateSpec::Blocklength(b) => Some(*b),
        }
    }
}

impl From<Rate> for RateSpec {
    fn from(r: Rate) -> Self {
        RateSpec::Rate(r)
    }
}

impl From<BlocklengthSpec> for RateSpec {
    fn from(b: BlocklengthSpec) -> Self {
        RateSpec::Blocklength(b)
    }
}

/// Rayleigh outage coefficient `e^R - 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Phi(f64);

impl Phi {
    /// Accepts any non-negative rate, including the degenerate `R = 0`.
    pub fn from_nats(nats: f64) -> Phi {
        Phi(nats.exp_m1())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn phi(rate: Rate) -> Phi {
    Phi::from_nats(rate.nats())
}

/// Linear SNR to dB.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dB to linear SNR.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
