//! First-order linear recurrences with exponential inhomogeneities.
//!
//! Solves `K_t = (1+i) K_{t-1} + sum_j c_j (1+n_j)^(t-1)` from `K_{t0}` in
//! closed form, and hosts four worked reference models built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Checks, Result};
use crate::numeric::power_divided_difference;

/// Relative size of the shift applied to a resonant rate.
pub const RESONANCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialTerm {
    pub coefficient: f64,
    pub rate: f64,
}

impl ExponentialTerm {
    pub fn new(coefficient: f64, rate: f64) -> Self {
        Self { coefficient, rate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceSpec {
    /// Homogeneous rate i.
    pub rate: f64,
    pub initial: f64,
    pub start: usize,
    pub terms: Vec<ExponentialTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub value: f64,
    /// Set when a resonant rate was shifted by epsilon.
    pub regularized: bool,
}

impl RecurrenceSpec {
    fn checks(&self) -> Checks {
        let mut c = Checks::default();
        c.finite(self.rate, "rate").finite(self.initial, "initial");
        c.require(self.rate > -1.0, "rate", "must exceed -1");
        for (k, term) in self.terms.iter().enumerate() {
            c.finite(term.coefficient, &format!("terms[{k}].coefficient"));
            c.finite(term.rate, &format!("terms[{k}].rate"));
            c.require(
                term.rate > -1.0,
                &format!("terms[{k}].rate"),
                "must exceed -1",
            );
        }
        c
    }

    /// Rates of the inhomogeneities after resonance shifting.
    fn shifted_rates(&self) -> (Vec<f64>, bool) {
        let eps = RESONANCE_EPS * self.rate.abs().max(1.0);
        let mut flagged = false;
        let rates = self
            .terms
            .iter()
            .map(|term| {
                if (term.rate - self.rate).abs() < eps {
                    flagged = true;
                    self.rate + eps
                } else {
                    term.rate
                }
            })
            .collect();
        (rates, flagged)
    }

    /// Closed form evaluated at a real offset; used by the critical-time code.
    pub(crate) fn eval(&self, t: f64) -> (f64, bool) {
        let (rates, flagged) = self.shifted_rates();
        let m = t - self.start as f64;
        let t0 = self.start as f64;
        let mut value = self.initial * (1.0 + self.rate).powf(m);
        for (term, n) in self.terms.iter().zip(rates) {
            value +=
                term.coefficient * (1.0 + n).powf(t0) * power_divided_difference(n, self.rate, m);
        }
        (value, flagged)
    }
}

/// Closed-form solution at `t >= start`.
///
/// Evaluated as `K_{t0}(1+i)^m + sum_j c_j (1+n_j)^{t0} ((1+n_j)^m - (1+i)^m)/(n_j - i)`
/// with `m = t - t0`, using a cancellation-free divided difference.
pub fn solve_linear_recurrence(spec: &RecurrenceSpec, t: usize) -> Result<Solution> {
    spec.checks().finish()?;
    if t < spec.start {
        return Err(crate::ModelError::InvalidArgument(format!(
            "t = {t} precedes the initial index {}",
            spec.start
        )));
    }
    let (value, regularized) = spec.eval(t as f64);
    Ok(Solution { value, regularized })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AticiParams {
    /// Nominal interest rate on capital.
    pub r_n: f64,
    /// Deposit growth rate.
    pub r_i: f64,
    /// Withdrawal fraction.
    pub r_w: f64,
    /// Promised rate.
    pub r_p: f64,
    pub d0: f64,
    pub k0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StylisticParams {
    pub i0: f64,
    pub g: f64,
    pub r: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadsheetParams {
    pub k0: f64,
    /// Per-period new deposits N0*I0.
    pub deposits: f64,
    pub i: f64,
    pub r: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParlarParams {
    pub c0: f64,
    pub u0: f64,
    pub r_hat: f64,
    pub r: f64,
    pub s0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ReferenceModel {
    Atici(AticiParams),
    Stylistic(StylisticParams),
    Spreadsheet(SpreadsheetParams),
    Parlar(ParlarParams),
}

fn finite_all(xs: &[(f64, &str)]) -> Result<()> {
    let mut c = Checks::default();
    for (x, f) in xs {
        c.finite(*x, f);
    }
    c.finish()
}

/// Shifts `x` away from `y` if they coincide within epsilon.
fn separate(x: f64, y: f64) -> (f64, bool) {
    let eps = RESONANCE_EPS * y.abs().max(1.0);
    if (x - y).abs() < eps {
        (y + eps, true)
    } else {
        (x, false)
    }
}

/// Explicit capital of a reference model at period `t`.
pub fn reference_model_capital(model: &ReferenceModel, t: usize) -> Result<Solution> {
    let tf = t as f64;
    match *model {
        ReferenceModel::Atici(p) => {
            finite_all(&[
                (p.r_n, "r_n"),
                (p.r_i, "r_i"),
                (p.r_w, "r_w"),
                (p.r_p, "r_p"),
                (p.d0, "d0"),
                (p.k0, "k0"),
            ])?;
            let alpha = (1.0 + p.r_p) * (1.0 - p.r_w) - 1.0;
            let beta = p.r_w * (1.0 + p.r_p) * p.d0;
            let (alpha, f1) = separate(alpha, p.r_i);
            let (alpha, f2) = separate(alpha, p.r_n);
            let (r_i, f3) = separate(p.r_i, p.r_n);
            let w = beta / (alpha - r_i);
            let t1 = w / (p.r_n - alpha);
            let t2 = (p.d0 + w) / (p.r_n - r_i);
            let value = (p.k0 - t1 + t2) * (1.0 + p.r_n).powf(tf) + t1 * (1.0 + alpha).powf(tf)
                - t2 * (1.0 + r_i).powf(tf);
            Ok(Solution {
                value,
                regularized: f1 || f2 || f3,
            })
        }
        ReferenceModel::Stylistic(p) => {
            finite_all(&[(p.i0, "i0"), (p.g, "g"), (p.r, "r"), (p.c, "c")])?;
            // I0(g-r)/g (1+g)^t + I0 r/g, rearranged to stay finite at g = 0.
            let growth = (1.0 + p.g).powf(tf);
            let value =
                p.i0 * growth - p.i0 * p.r * power_divided_difference(p.g, 0.0, tf) - p.c * tf;
            Ok(Solution {
                value,
                regularized: false,
            })
        }
        ReferenceModel::Spreadsheet(p) => {
            finite_all(&[
                (p.k0, "k0"),
                (p.deposits, "deposits"),
                (p.i, "i"),
                (p.r, "r"),
                (p.w, "w"),
            ])?;
            let lambda = (1.0 - p.w) * (1.0 + p.r);
            let (lambda, flagged) = separate(lambda, 1.0);
            let scale = (1.0 + p.i) * p.deposits / (lambda - 1.0);
            let spec = RecurrenceSpec {
                rate: p.i,
                initial: p.k0,
                start: 0,
                terms: vec![
                    ExponentialTerm::new(-scale * p.w * lambda, lambda - 1.0),
                    ExponentialTerm::new(scale * p.r * (1.0 - p.w), 0.0),
                ],
            };
            let s = solve_linear_recurrence(&spec, t)?;
            Ok(Solution {
                value: s.value,
                regularized: s.regularized || flagged,
            })
        }
        ReferenceModel::Parlar(p) => {
            finite_all(&[
                (p.c0, "c0"),
                (p.u0, "u0"),
                (p.r_hat, "r_hat"),
                (p.r, "r"),
                (p.s0, "s0"),
            ])?;
            let grown = power_divided_difference(p.r_hat, 0.0, tf);
            // (grown - t)/r_hat, summed directly when r_hat is too small to divide by.
            let excess = if p.r_hat.abs() > 1e-4 {
                (grown - tf) / p.r_hat
            } else {
                (0..t)
                    .map(|k| power_divided_difference(p.r_hat, 0.0, k as f64))
                    .sum()
            };
            let value = p.c0 + p.u0 * grown - p.r * p.s0 * tf - p.r * p.u0 * excess;
            Ok(Solution {
                value,
                regularized: false,
            })
        }
    }
}

/// Liabilities of the spreadsheet model, `N0 I0 (lambda^{t+1}-1)/(lambda-1)`.
pub fn spreadsheet_liabilities(p: &SpreadsheetParams, t: usize) -> f64 {
    let lambda = (1.0 - p.w) * (1.0 + p.r);
    p.deposits * power_divided_difference(lambda - 1.0, 0.0, t as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_hand_value() {
        let spec = RecurrenceSpec {
            rate: 0.0,
            initial: 0.0,
            start: 0,
            terms: vec![ExponentialTerm::new(1.0, 0.1)],
        };
        let s = solve_linear_recurrence(&spec, 2).unwrap();
        assert!((s.value - 2.1).abs() < 1e-14);
        assert!(!s.regularized);
    }

    #[test]
    fn homogeneous_case() {
        let spec = RecurrenceSpec {
            rate: 0.04,
            initial: 7.0,
            start: 3,
            terms: vec![ExponentialTerm::new(0.0, 0.2)],
        };
        let s = solve_linear_recurrence(&spec, 13).unwrap();
        assert!((s.value - 7.0 * 1.04f64.powi(10)).abs() < 1e-12);
    }

    #[test]
    fn resonance_sets_flag() {
        let spec = RecurrenceSpec {
            rate: 0.05,
            initial: 1.0,
            start: 0,
            terms: vec![ExponentialTerm::new(2.0, 0.05)],
        };
        let s = solve_linear_recurrence(&spec, 10).unwrap();
        assert!(s.regularized);
        // K_t = 1.05^t + 2 t 1.05^{t-1}
        let exact = 1.05f64.powi(10) + 20.0 * 1.05f64.powi(9);
        assert!((s.value - exact).abs() < 1e-6);
    }

    #[test]
    fn start_after_t_is_rejected() {
        let spec = RecurrenceSpec {
            rate: 0.0,
            initial: 0.0,
            start: 5,
            terms: vec![],
        };
        assert!(solve_linear_recurrence(&spec, 4).is_err());
    }

    #[test]
    fn stylistic_initial_value() {
        let m = ReferenceModel::Stylistic(StylisticParams {
            i0: 50.0,
            g: 0.08,
            r: 0.05,
            c: 1.5,
        });
        assert_eq!(reference_model_capital(&m, 0).unwrap().value, 50.0);
    }

    #[test]
    fn spreadsheet_liabilities_at_unit_lambda() {
        let p = SpreadsheetParams {
            k0: 0.0,
            deposits: 30.0,
            i: 0.01,
            r: 0.25,
            w: 0.2,
        };
        assert!((spreadsheet_liabilities(&p, 4) - 150.0).abs() < 1e-12);
    }
}
