//! Gauss hypergeometric function for real parameters and real z <= 0 or |z| < 1.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{ModelError, Result};
use crate::numeric::CompensatedSum;

pub const TERM_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Pfaff,
    /// Connection formula in 1/z.
    Inversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyp2F1 {
    pub value: f64,
    pub terms_used: usize,
    pub method: Method,
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

fn near_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-6
}

/// Reciprocal gamma, zero at the poles.
fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Plain Gauss series with compensated accumulation.
fn series(a: f64, b: f64, c: f64, z: f64) -> Result<(f64, usize)> {
    let mut sum = CompensatedSum::new();
    let mut term = 1.0;
    sum.add(term);
    let mut quiet = 0;
    for k in 0..TERM_CAP {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum.add(term);
        if term == 0.0 {
            return Ok((sum.value(), k + 2));
        }
        if term.abs() <= 1e-17 * sum.value().abs() {
            quiet += 1;
            if quiet == 2 {
                return Ok((sum.value(), k + 2));
            }
        } else {
            quiet = 0;
        }
    }
    Err(ModelError::NumericFailure {
        routine: "hyp2f1",
        detail: format!(
            "series did not converge in {TERM_CAP} terms for a={a}, b={b}, c={c}, z={z} (last term {term:e})"
        ),
    })
}

/// `(1-z)^{-a} F(a, c-b; c; z/(z-1))`, or the same with a and b swapped
/// when that makes the transformed series terminate.
fn pfaff(a: f64, b: f64, c: f64, z: f64) -> Result<(f64, usize)> {
    let w = z / (z - 1.0);
    let (keep, other) = if is_nonpositive_integer(c - a) && !is_nonpositive_integer(c - b) {
        (b, a)
    } else {
        (a, b)
    };
    let (v, n) = series(keep, c - other, c, w)?;
    Ok(((1.0 - z).powf(-keep) * v, n))
}

fn inversion(a: f64, b: f64, c: f64, z: f64) -> Result<(f64, usize)> {
    let y = 1.0 / z;
    let mz = -z;
    let gc = gamma(c);
    let (f1, n1) = series(a, a - c + 1.0, a - b + 1.0, y)?;
    let (f2, n2) = series(b, b - c + 1.0, b - a + 1.0, y)?;
    let c1 = gc * gamma(b - a) * rgamma(b) * rgamma(c - a);
    let c2 = gc * gamma(a - b) * rgamma(a) * rgamma(c - b);
    Ok((c1 * mz.powf(-a) * f1 + c2 * mz.powf(-b) * f2, n1 + n2))
}

/// Evaluates ₂F₁(a, b; c; z).
///
/// Routing: direct series for |z| <= 0.5, Pfaff for -2 <= z < -0.5, and the
/// 1/z connection formula below -2 unless a-b is (nearly) an integer, where
/// Pfaff is used throughout.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<Hyp2F1> {
    if [a, b, c, z].iter().any(|x| !x.is_finite()) {
        return Err(ModelError::InvalidArgument(
            "hyp2f1 arguments must be finite".into(),
        ));
    }
    if is_nonpositive_integer(c) {
        return Err(ModelError::invalid(
            "c",
            "must not be a non-positive integer",
        ));
    }
    if z >= 1.0 {
        return Err(ModelError::InvalidArgument(format!(
            "z = {z} is outside the supported domain (z < 1)"
        )));
    }
    if z == 0.0 {
        return Ok(Hyp2F1 {
            value: 1.0,
            terms_used: 0,
            method: Method::Series,
        });
    }
    let (value, terms_used, method) = if z.abs() <= 0.5 || z > 0.0 {
        let (v, n) = series(a, b, c, z)?;
        (v, n, Method::Series)
    } else if z >= -2.0 || near_integer(a - b) {
        let (v, n) = pfaff(a, b, c, z)?;
        (v, n, Method::Pfaff)
    } else {
        let (v, n) = inversion(a, b, c, z)?;
        (v, n, Method::Inversion)
    };
    if !value.is_finite() {
        return Err(ModelError::NumericFailure {
            routine: "hyp2f1",
            detail: format!("non-finite result for a={a}, b={b}, c={c}, z={z}"),
        });
    }
    Ok(Hyp2F1 {
        value,
        terms_used,
        method,
    })
}
