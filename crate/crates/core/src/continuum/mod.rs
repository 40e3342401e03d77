//! Continuous-time quasi-logistic model.
//!
//! Inflow `s q N0 e^{qt} / (1 + a e^{qt})^2` with `a = N0/(N-N0)`; exits repeat
//! the inflow after the lock-up T, and the initial cohort leaves as a point
//! mass at T. Capital obeys `K' = pK + I0 (N'_in - N'_out) - r I0 N(t)` and
//! is written in terms of
//! `F2(z) = 2F1(2, 1-p/q; 2-p/q; z)` and `F1(z) = 2F1(1, -p/q; 1-p/q; z)`.

pub mod hyp2f1;

use serde::{Deserialize, Serialize};

use crate::capital::CapitalParams;
use crate::criticality::{Light, TrafficLight};
use crate::demography::QuasiLogisticParams;
use crate::error::{Checks, ModelError, Result};
use crate::linrec::RESONANCE_EPS;

pub use hyp2f1::{hyp2f1, Hyp2F1, Method};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumParams {
    pub n0: f64,
    pub pool: f64,
    /// Continuous growth rate, ln(1+n).
    pub q: f64,
    /// Lock-up in (real) time units; `None` means no withdrawals.
    pub lock_up: Option<f64>,
    pub deposit: f64,
    pub coupon_rate: f64,
    /// p, realized nominal return rate.
    pub market_rate: f64,
    pub promoter_endowment: f64,
}

/// How the inflow prefactor is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowPrefactor {
    /// `q`, the simplified form.
    #[default]
    Approximate,
    /// `(e^q - 1)/(1 - N0/N)`.
    Exact,
}

/// Which closed form of K(t) to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapitalForm {
    /// Solution of the capital ODE.
    #[default]
    Integrated,
    /// Deposits, profits and withdrawals summed term by term without
    /// compounding the lower limits. Does not satisfy the ODE.
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContinuumOptions {
    #[serde(default)]
    pub prefactor: FlowPrefactor,
    #[serde(default)]
    pub form: CapitalForm,
}

impl ContinuumParams {
    /// Continuous analogue of a discrete quasi-logistic setup, with p = i.
    pub fn from_discrete(q: &QuasiLogisticParams, cap: &CapitalParams) -> Self {
        Self {
            n0: q.n0,
            pool: q.pool,
            q: q.growth.ln_1p(),
            lock_up: q.lock_up.periods().map(|t| t as f64),
            deposit: cap.deposit,
            coupon_rate: cap.coupon_rate,
            market_rate: cap.market_rate,
            promoter_endowment: cap.promoter_endowment,
        }
    }

    pub(crate) fn checks(&self) -> Checks {
        let mut c = Checks::default();
        for (x, f) in [
            (self.n0, "n0"),
            (self.pool, "pool"),
            (self.q, "q"),
            (self.deposit, "deposit"),
            (self.coupon_rate, "coupon_rate"),
            (self.market_rate, "market_rate"),
            (self.promoter_endowment, "promoter_endowment"),
        ] {
            c.finite(x, f);
        }
        c.require(self.n0 > 0.0, "n0", "must be positive");
        c.require(self.pool > self.n0, "pool", "must exceed n0");
        c.require(self.q > 0.0, "q", "must be positive");
        c.require(
            self.market_rate != 0.0,
            "market_rate",
            "must be non-zero in continuous time",
        );
        if let Some(t) = self.lock_up {
            c.require(t.is_finite() && t > 0.0, "lock_up", "must be positive");
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.checks().finish()
    }

    /// a = N0/(N-N0).
    pub fn a(&self) -> f64 {
        self.n0 / (self.pool - self.n0)
    }

    pub fn initial_capital(&self) -> f64 {
        self.promoter_endowment + self.deposit * self.n0
    }

    fn scale(&self, prefactor: FlowPrefactor) -> f64 {
        match prefactor {
            FlowPrefactor::Approximate => 1.0,
            FlowPrefactor::Exact => self.q.exp_m1() / ((1.0 - self.n0 / self.pool) * self.q),
        }
    }

    /// p, moved off q by epsilon if the two coincide.
    fn p(&self) -> f64 {
        let eps = RESONANCE_EPS * self.q.abs().max(1.0);
        if (self.market_rate - self.q).abs() < eps {
            self.q + eps
        } else {
            self.market_rate
        }
    }
}

/// Inflow rate N'_in(t).
pub fn continuous_inflow(params: &ContinuumParams, opts: ContinuumOptions, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let e = (params.q * t).exp();
    let d = 1.0 + params.a() * e;
    params.scale(opts.prefactor) * params.q * params.n0 * e / (d * d)
}

/// Outflow rate N'_out(t), excluding the point mass of the initial cohort at T.
pub fn continuous_outflow(params: &ContinuumParams, opts: ContinuumOptions, t: f64) -> f64 {
    match params.lock_up {
        Some(lock) if t >= lock => continuous_inflow(params, opts, t - lock),
        _ => 0.0,
    }
}

/// `N0/a (1/(1+a) - 1/(1+a e^{qt}))`, the integrated unit inflow.
fn joined(params: &ContinuumParams, t: f64) -> f64 {
    let a = params.a();
    params.n0 / a * (1.0 / (1.0 + a) - 1.0 / (1.0 + a * (params.q * t).exp()))
}

/// Active count N(t).
pub fn continuous_population(
    params: &ContinuumParams,
    opts: ContinuumOptions,
    t: f64,
) -> Result<f64> {
    params.validate()?;
    if t.is_nan() || t < 0.0 {
        return Err(ModelError::InvalidArgument("t must be non-negative".into()));
    }
    let s = params.scale(opts.prefactor);
    Ok(match params.lock_up {
        Some(lock) if t >= lock => s * (joined(params, t) - joined(params, t - lock)),
        _ => params.n0 + s * joined(params, t),
    })
}

/// Time of the hump maximum, T/2 + ln(N/N0 - 1)/q.
pub fn continuous_peak_time(params: &ContinuumParams) -> Option<f64> {
    params
        .lock_up
        .map(|lock| lock / 2.0 + (params.pool / params.n0 - 1.0).ln() / params.q)
}

/// Post-peak time at which N(t) falls to `n_star`.
pub fn continuous_inverse_time(
    params: &ContinuumParams,
    opts: ContinuumOptions,
    n_star: f64,
) -> Result<f64> {
    params.validate()?;
    let lock = params
        .lock_up
        .ok_or_else(|| ModelError::invalid("lock_up", "inverse time needs a finite lock-up"))?;
    if !(n_star > 0.0 && n_star.is_finite()) {
        return Err(ModelError::invalid("n_star", "must be positive and finite"));
    }
    let s = params.scale(opts.prefactor);
    let nu = params.n0 / params.pool;
    let nu_star = n_star / (s * params.pool);
    let lambda = (-params.q * lock).exp();
    let w = 1.0 - nu;
    let a = nu_star * nu * nu / (w * w * w) * lambda;
    let b = nu / w * ((nu_star / w + 1.0) * (1.0 + lambda) - 2.0);
    let c = nu_star / w;
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 && disc > -1e-12 * b * b {
        disc = 0.0;
    }
    if disc < 0.0 || b >= 0.0 {
        let peak = continuous_peak_time(params).unwrap_or(lock).max(lock);
        return Err(ModelError::UnreachableThreshold {
            threshold: n_star,
            maximum: continuous_population(params, opts, peak)?,
        });
    }
    let u = (-b + disc.sqrt()) / (2.0 * a);
    Ok(u.ln() / params.q)
}

struct Kernel {
    p: f64,
    q: f64,
    a: f64,
    ratio: f64,
}

impl Kernel {
    fn f1(&self, z: f64) -> Result<f64> {
        Ok(hyp2f1(1.0, -self.ratio, 1.0 - self.ratio, z)?.value)
    }

    fn f2(&self, z: f64) -> Result<f64> {
        Ok(hyp2f1(2.0, 1.0 - self.ratio, 2.0 - self.ratio, z)?.value)
    }

    /// `e^{qt} F2(-a e^{qt})`.
    fn g2(&self, t: f64) -> Result<f64> {
        let e = (self.q * t).exp();
        Ok(e * self.f2(-self.a * e)?)
    }

    fn f1_at(&self, t: f64) -> Result<f64> {
        self.f1(-self.a * (self.q * t).exp())
    }
}

/// Aggregated flows of the closed-form solution at time t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumAggregates {
    pub deposits: f64,
    pub profits: f64,
    pub withdrawals: f64,
    pub capital: f64,
}

/// Closed-form K(t) with its deposit, profit and withdrawal aggregates.
pub fn continuous_aggregates(
    params: &ContinuumParams,
    opts: ContinuumOptions,
    t: f64,
) -> Result<ContinuumAggregates> {
    params.validate()?;
    if t.is_nan() || t < 0.0 {
        return Err(ModelError::InvalidArgument("t must be non-negative".into()));
    }
    let p = params.p();
    let k = Kernel {
        p,
        q: params.q,
        a: params.a(),
        ratio: p / params.q,
    };
    let s = params.scale(opts.prefactor);
    let flow = params.n0 * params.deposit;
    let a = k.a;
    let ept = (p * t).exp();
    let aggregate = opts.form == CapitalForm::Aggregate;

    let f2a = k.f2(-a)?;
    let lower = if aggregate { f2a } else { ept * f2a };
    let deposits = s * flow * k.q / (k.q - k.p) * (k.g2(t)? - lower);

    let f1a = k.f1(-a)?;
    let profit_before = |t: f64| -> Result<f64> {
        let e = (p * t).exp();
        Ok(flow * params.coupon_rate / p
            * ((1.0 + s / (a * (1.0 + a))) * (e - 1.0) + s / a * (k.f1_at(t)? - e * f1a)))
    };

    let (profits, withdrawals) = match params.lock_up {
        Some(lock) if t >= lock => {
            let since = t - lock;
            let carry = (p * since).exp();
            let increment = s * flow * params.coupon_rate / (p * a)
                * (carry * f1a - k.f1_at(since)? - carry * k.f1_at(lock)? + k.f1_at(t)?);
            let base = profit_before(lock)?;
            let profits = if aggregate {
                base + increment
            } else {
                carry * base + increment
            };
            let cohort = if aggregate { flow } else { flow * carry };
            let tail_lower = if aggregate { f2a } else { carry * f2a };
            let withdrawals = cohort + s * flow * k.q / (k.q - k.p) * (k.g2(since)? - tail_lower);
            (profits, withdrawals)
        }
        _ => (profit_before(t)?, 0.0),
    };
    let capital = params.initial_capital() * ept + deposits - profits - withdrawals;
    Ok(ContinuumAggregates {
        deposits,
        profits,
        withdrawals,
        capital,
    })
}

/// Closed-form capital K(t).
pub fn continuous_capital(params: &ContinuumParams, opts: ContinuumOptions, t: f64) -> Result<f64> {
    Ok(continuous_aggregates(params, opts, t)?.capital)
}

/// Right-hand side `pK + I0 (N'_in - N'_out) - r I0 N` of the capital ODE.
pub fn capital_rhs(
    params: &ContinuumParams,
    opts: ContinuumOptions,
    t: f64,
    k: f64,
) -> Result<f64> {
    let n = continuous_population(params, opts, t)?;
    let flows = continuous_inflow(params, opts, t) - continuous_outflow(params, opts, t);
    Ok(params.market_rate * k + params.deposit * flows - params.coupon_rate * params.deposit * n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSample {
    pub t: f64,
    pub active: f64,
    pub capital: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumRun {
    pub samples: Vec<ContinuumSample>,
    pub t_star: f64,
    pub light: TrafficLight,
}

/// Samples the model on `[0, t*]` with spacing `step` and labels the outcome.
///
/// A sampled negative capital before t* counts as a collapse.
pub fn continuum_run(
    params: &ContinuumParams,
    opts: ContinuumOptions,
    n_star: f64,
    step: f64,
) -> Result<ContinuumRun> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(ModelError::invalid("step", "must be positive"));
    }
    let t_star = continuous_inverse_time(params, opts, n_star)?;
    let count = (t_star / step).floor() as usize;
    let mut samples = Vec::with_capacity(count + 2);
    for k in 0..=count {
        let t = k as f64 * step;
        samples.push(sample(params, opts, t)?);
    }
    if samples.last().is_none_or(|s| s.t < t_star) {
        samples.push(sample(params, opts, t_star)?);
    }
    let end = samples
        .iter()
        .find(|s| s.capital < 0.0)
        .copied()
        .unwrap_or(*samples.last().unwrap());
    let bound_upper = params.promoter_endowment * (params.market_rate * end.t).exp();
    let label = if end.capital < 0.0 {
        Light::Red
    } else if end.capital <= params.promoter_endowment {
        Light::Yellow
    } else {
        Light::Green
    };
    Ok(ContinuumRun {
        samples,
        t_star,
        light: TrafficLight {
            label,
            k_end: end.capital,
            bound_upper,
            t_end: end.t,
            within_bound: label != Light::Green || end.capital < bound_upper,
        },
    })
}

fn sample(params: &ContinuumParams, opts: ContinuumOptions, t: f64) -> Result<ContinuumSample> {
    Ok(ContinuumSample {
        t,
        active: continuous_population(params, opts, t)?,
        capital: continuous_capital(params, opts, t)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ContinuumParams {
        ContinuumParams {
            n0: 10.0,
            pool: 1000.0,
            q: 1.1f64.ln(),
            lock_up: Some(7.0),
            deposit: 3.0,
            coupon_rate: 0.061,
            market_rate: 0.03,
            promoter_endowment: 100.0,
        }
    }

    #[test]
    fn starts_at_initial_values() {
        let p = base();
        let o = ContinuumOptions::default();
        assert_eq!(continuous_population(&p, o, 0.0).unwrap(), 10.0);
        let k = continuous_capital(&p, o, 0.0).unwrap();
        assert!((k - 130.0).abs() < 1e-9);
    }

    #[test]
    fn cohort_leaves_at_lock_up() {
        let p = base();
        let o = ContinuumOptions::default();
        let before = continuous_population(&p, o, 7.0 - 1e-9).unwrap();
        let after = continuous_population(&p, o, 7.0).unwrap();
        assert!((before - after - 10.0).abs() < 1e-6);
    }

    #[test]
    fn zero_market_rate_is_rejected() {
        let p = ContinuumParams {
            market_rate: 0.0,
            ..base()
        };
        assert!(continuous_capital(&p, ContinuumOptions::default(), 1.0).is_err());
    }
}
