//! IR-HARQ outage coefficients.
//!
//! `psi_m(R)` is the high-SNR limit of `prod(rho_i) * Pr[sum_{i<=m} log(1 + rho_i z_i) < R]`
//! for i.i.d. unit-mean exponential gains. It obeys the convolution recursion
//! `psi_m(R) = int_0^R psi_{m-1}(R - x) e^x dx` with `psi_0 = 1`, whose solution is
//! the finite series
//!
//! ```text
//! psi_m(R) = (-1)^m (1 - e^R sum_{k=0}^{m-1} (-R)^k / k!)
//! ```
//!
//! (the i = 0 term of the textbook form carries `1/(-1)! = 0`).

use std::cell::RefCell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rate::Rate;

/// Absolute tolerance used at every nesting level of the convolution oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Evaluates `psi_m(R)`.
///
/// The finite series cancels catastrophically once `R^m / m!` is small next to
/// one, so it is summed as the equivalent alternating tail
/// `e^R sum_{j>=m} (-1)^(j-m) R^j / j!`, whose terms shrink monotonically past
/// `j = R`.
pub fn psi_series(m: usize, rate_argument: Rate) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let r = rate_argument.nats();
    // R^m / m!
    let mut term = (1..=m).fold(1.0, |acc, i| acc * r / i as f64);
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut j = m;
    loop {
        sum += sign * term;
        j += 1;
        term *= r / j as f64;
        sign = -sign;
        if j as f64 > r && term <= f64::EPSILON * 1e-3 * sum.abs() {
            break;
        }
    }
    r.exp() * sum
}

/// Direct evaluation of the finite series; only well conditioned for small `m`.
pub fn psi_finite_sum(m: usize, rate_argument: Rate) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let r = rate_argument.nats();
    let mut partial = 0.0;
    let mut term = 1.0;
    for k in 0..m {
        if k > 0 {
            term *= -r / k as f64;
        }
        partial += term;
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (1.0 - r.exp() * partial)
}

/// Evaluates `psi_m(R)` from the convolution recursion by nested adaptive quadrature.
///
/// Used only to certify [`psi_series`]; cost grows geometrically in `m`.
pub fn psi_convolution_oracle(m: usize, rate_argument: Rate) -> Result<f64> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let value = convolve(m, rate_argument.nats(), &failure);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

fn convolve(m: usize, t: f64, failure: &RefCell<Option<Error>>) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if t <= 0.0 {
        return 0.0;
    }
    let integrand = |x: f64| convolve(m - 1, t - x, failure) * x.exp();
    match quadrature::integrate(integrand, 0.0, t, ORACLE_TOLERANCE, &[]) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    }
}

/// `psi_0 ..= psi_M` at one rate argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiTable {
    rate_argument: Rate,
    values: Vec<f64>,
}

impl PsiTable {
    /// Builds the table for rounds `0..=max_round`, rejecting any non-positive entry.
    pub fn build(max_round: usize, rate_argument: Rate) -> Result<Self> {
        let values: Vec<f64> = (0..=max_round).map(|m| psi_series(m, rate_argument)).collect();
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositivePsi {
                index,
                rate: rate_argument.nats(),
                value,
            });
        }
        Ok(PsiTable { rate_argument, values })
    }

    pub fn rate_argument(&self) -> Rate {
        self.rate_argument
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, m: usize) -> f64 {
        self.values[m]
    }

    pub fn max_round(&self) -> usize {
        self.values.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn rate(r: f64) -> Rate {
        Rate::new(r).unwrap()
    }

    #[test]
    fn low_order_values() {
        assert_eq!(psi_series(0, rate(1.0)), 1.0);
        assert_abs_diff_eq!(psi_series(1, rate(1.0)), E - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_series(2, rate(1.0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_series(3, rate(1.0)), E / 2.0 - 1.0, epsilon = 1e-15);
        // e^R (R - 1) + 1 at R = 2
        assert_abs_diff_eq!(psi_series(2, rate(2.0)), E * E + 1.0, epsilon = 1e-14);
    }

    #[test]
    fn tail_matches_finite_sum_where_well_conditioned() {
        for &r in &[0.5, 1.0, 2.0, 3.0] {
            for m in 0..=6 {
                let a = psi_series(m, rate(r));
                let b = psi_finite_sum(m, rate(r));
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tail_stays_positive_for_deep_tables() {
        let t = PsiTable::build(20, rate(0.5)).unwrap();
        assert!(t.values().iter().all(|v| *v > 0.0));
        // leading behaviour e^R R^m / m! within a factor of two
        let lead = 0.5f64.exp() * 0.5f64.powi(20) / (1..=20).map(|i| i as f64).product::<f64>();
        assert!(t.get(20) > 0.5 * lead && t.get(20) < lead);
    }

    #[test]
    fn oracle_base_cases() {
        assert_abs_diff_eq!(psi_convolution_oracle(1, rate(1.0)).unwrap(), E - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            psi_convolution_oracle(2, rate(2.0)).unwrap(),
            E * E + 1.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn oracle_agrees_with_series() {
        let oracle = psi_convolution_oracle(4, rate(0.5)).unwrap();
        assert_abs_diff_eq!(oracle, psi_series(4, rate(0.5)), epsilon = 1e-8);
    }

    #[test]
    fn table_invariants() {
        let t = PsiTable::build(5, rate(1.0)).unwrap();
        assert_eq!(t.get(0), 1.0);
        assert_abs_diff_eq!(t.get(1), E - 1.0, epsilon = 1e-15);
        assert_eq!(t.max_round(), 5);
    }
}
