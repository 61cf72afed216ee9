//! Exponent bookkeeping for the non-recursive ("closed") form of each optimal schedule.
//!
//! Unrolling `rho_m = sqrt(2 g_m rho_{m+1})` from `rho_M` down gives, in logs,
//!
//! ```text
//! log rho_m = a(m)/2 log 2 + sum_{k=m}^{M-1} d(k-m+1) log g_k + c(m)/2 log h
//! ```
//!
//! with `rho_M = sqrt(h)`. For ARQ (`g = phi`, `h = M lambda phi`) the `g` sum
//! folds into `phi^(b(m)/2)`; for CC (`g_k = phi / k`) a factorial-like product
//! remains; for IR (`g_k = psi_k / psi_{k-1}`) the psi ratios carry weights `d(i)`.

use serde::Serialize;

/// Per-round exponents for an `M`-round schedule. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentTable {
    rounds: usize,
}

impl ExponentTable {
    pub fn new(rounds: usize) -> Self {
        ExponentTable { rounds }
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    fn gap(&self, m: usize) -> i32 {
        debug_assert!(m >= 1 && m <= self.rounds);
        (self.rounds - m) as i32
    }

    /// `2 - 2^-(M-m-1)`
    pub fn a(&self, m: usize) -> f64 {
        2.0 - 2f64.powi(-(self.gap(m) - 1))
    }

    /// `2 - 2^-(M-m)`
    pub fn b(&self, m: usize) -> f64 {
        2.0 - 2f64.powi(-self.gap(m))
    }

    /// `2^-(M-m)`
    pub fn c(&self, m: usize) -> f64 {
        2f64.powi(-self.gap(m))
    }

    /// `2^-i`
    pub fn d(&self, i: usize) -> f64 {
        2f64.powi(-(i as i32))
    }

    /// `2^M - 1`
    pub fn o(&self) -> f64 {
        o(self.rounds)
    }

    /// `2^M`
    pub fn p(&self) -> f64 {
        p(self.rounds)
    }

    /// `(M - 2) 2^M + 2`
    pub fn q(&self) -> f64 {
        q(self.rounds)
    }
}

pub fn o(m: usize) -> f64 {
    2f64.powi(m as i32) - 1.0
}

pub fn p(m: usize) -> f64 {
    2f64.powi(m as i32)
}

pub fn q(m: usize) -> f64 {
    (m as f64 - 2.0) * 2f64.powi(m as i32) + 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_round_exponents() {
        for m in 1..=12 {
            let t = ExponentTable::new(m);
            assert_eq!(t.a(m), 0.0);
            assert_eq!(t.b(m), 1.0);
            assert_eq!(t.c(m), 1.0);
        }
    }

    #[test]
    fn aggregate_identities() {
        // sum c/2 = o/p and sum a/2 = q/p
        for m in 1..=15 {
            let t = ExponentTable::new(m);
            let sc: f64 = (1..=m).map(|k| t.c(k) / 2.0).sum();
            assert!((sc - t.o() / t.p()).abs() < 1e-15);
            let sa: f64 = (1..=m).map(|k| t.a(k) / 2.0).sum();
            assert!((sa - t.q() / t.p()).abs() < 1e-12);
        }
    }

    #[test]
    fn small_values() {
        assert_eq!((o(2), p(2), q(2)), (3.0, 4.0, 2.0));
        assert_eq!((o(3), p(3), q(3)), (7.0, 8.0, 10.0));
        let t = ExponentTable::new(3);
        assert_eq!(t.a(1), 1.5);
        assert_eq!(t.b(1), 1.75);
        assert_eq!(t.c(1), 0.25);
        assert_eq!(t.d(3), 0.125);
    }
}
