//! Capital evolution under each demographic law.
//!
//! [`budget_recursion_oracle`] iterates the budget equation on any
//! [`PopulationPath`]; the closed forms below must reproduce it.

use serde::{Deserialize, Serialize};

use crate::demography::{
    nssir_series, GeometricParams, PopulationPath, QuasiLogisticParams, SirParams,
};
use crate::error::{Checks, ModelError, Result};
use crate::linrec::{ExponentialTerm, RecurrenceSpec, Solution};
use crate::numeric::CompensatedSum;
use crate::timing::Timing;

/// Default termination threshold: fewer than one investor left.
pub const DEFAULT_N_STAR: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapitalParams {
    /// K0_pro.
    pub promoter_endowment: f64,
    /// I0, the deposit per investor.
    pub deposit: f64,
    /// r, promised coupon rate per period.
    pub coupon_rate: f64,
    /// i, effective market rate per period.
    pub market_rate: f64,
}

impl CapitalParams {
    pub fn new(
        promoter_endowment: f64,
        deposit: f64,
        coupon_rate: f64,
        market_rate: f64,
    ) -> Result<Self> {
        let c = Self {
            promoter_endowment,
            deposit,
            coupon_rate,
            market_rate,
        };
        c.validate()?;
        Ok(c)
    }

    pub(crate) fn checks(&self) -> Checks {
        let mut c = Checks::default();
        c.finite(self.promoter_endowment, "promoter_endowment")
            .finite(self.deposit, "deposit")
            .finite(self.coupon_rate, "coupon_rate")
            .finite(self.market_rate, "market_rate");
        c.require(self.deposit > 0.0, "deposit", "must be positive");
        c.require(self.market_rate > -1.0, "market_rate", "must exceed -1");
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.checks().finish()
    }

    /// K0 = K0_pro + I0 N0.
    pub fn initial_capital(&self, n0: f64) -> f64 {
        self.promoter_endowment + self.deposit * n0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalPath {
    pub capital: Vec<f64>,
    pub agg_interest: Vec<f64>,
    pub agg_deposits: Vec<f64>,
    pub agg_coupons: Vec<f64>,
    pub agg_withdrawals: Vec<f64>,
    pub termination_index: usize,
    /// Whether the active count actually fell below the threshold.
    pub terminated: bool,
}

impl CapitalPath {
    pub fn horizon(&self) -> usize {
        self.capital.len() - 1
    }

    pub fn initial(&self) -> f64 {
        self.capital[0]
    }

    /// Recomputes the termination index for a different threshold.
    pub fn terminate_at(&mut self, pop: &PopulationPath, n_star: f64) {
        let found = pop.termination_index(n_star);
        self.terminated = found.is_some();
        self.termination_index = found.unwrap_or(self.horizon());
    }

    /// `K_0 + interest + deposits - coupons - withdrawals` at `t`.
    pub fn telescoped(&self, t: usize) -> f64 {
        self.capital[0] + self.agg_interest[t] + self.agg_deposits[t]
            - self.agg_coupons[t]
            - self.agg_withdrawals[t]
    }
}

/// Iterates `K_t = (1+i)K_{t-1} + (in_t - out_t - r N_{t-1}) I0` along `pop`.
pub fn budget_recursion_oracle(pop: &PopulationPath, cap: &CapitalParams) -> Result<CapitalPath> {
    cap.validate()?;
    let len = pop.horizon + 1;
    if [&pop.active, &pop.entering, &pop.exiting]
        .iter()
        .any(|s| s.len() != len)
    {
        return Err(ModelError::InvalidArgument(
            "population series do not cover the stated horizon".into(),
        ));
    }
    let (i, r, d) = (cap.market_rate, cap.coupon_rate, cap.deposit);
    let mut k = cap.initial_capital(pop.active[0]);
    let mut sums = [CompensatedSum::new(); 4];
    let mut path = CapitalPath {
        capital: Vec::with_capacity(len),
        agg_interest: Vec::with_capacity(len),
        agg_deposits: Vec::with_capacity(len),
        agg_coupons: Vec::with_capacity(len),
        agg_withdrawals: Vec::with_capacity(len),
        termination_index: 0,
        terminated: false,
    };
    let push = |path: &mut CapitalPath, k: f64, s: &[CompensatedSum; 4]| {
        path.capital.push(k);
        path.agg_interest.push(s[0].value());
        path.agg_deposits.push(s[1].value());
        path.agg_coupons.push(s[2].value());
        path.agg_withdrawals.push(s[3].value());
    };
    push(&mut path, k, &sums);
    for t in 1..len {
        let interest = i * k;
        let deposits = pop.entering[t] * d;
        let coupons = r * pop.active[t - 1] * d;
        let withdrawals = pop.exiting[t] * d;
        k = (1.0 + i) * k + (pop.entering[t] - pop.exiting[t] - r * pop.active[t - 1]) * d;
        for (s, x) in sums
            .iter_mut()
            .zip([interest, deposits, coupons, withdrawals])
        {
            s.add(x);
        }
        push(&mut path, k, &sums);
    }
    path.terminate_at(pop, DEFAULT_N_STAR);
    Ok(path)
}

/// Recurrences describing geometric capital in its two regimes.
pub(crate) struct GeometricRegimes {
    pub before: RecurrenceSpec,
    /// Present for finite lock-up; starts at T with the post-repayment K_T.
    pub after: Option<RecurrenceSpec>,
}

pub(crate) fn geometric_regimes(g: &GeometricParams, cap: &CapitalParams) -> GeometricRegimes {
    let flow = g.n0 * cap.deposit;
    let c = flow * (g.growth - cap.coupon_rate);
    let before = RecurrenceSpec {
        rate: cap.market_rate,
        initial: cap.initial_capital(g.n0),
        start: 0,
        terms: vec![ExponentialTerm::new(c, g.growth)],
    };
    let after = g.lock_up.periods().map(|lock| {
        let eta = 1.0 - (1.0 + g.growth).powf(-(lock as f64));
        let k_lock = before.eval(lock as f64).0 - flow;
        RecurrenceSpec {
            rate: cap.market_rate,
            initial: k_lock,
            start: lock,
            terms: vec![ExponentialTerm::new(c * eta, g.growth)],
        }
    });
    GeometricRegimes { before, after }
}

/// Closed-form geometric capital at period `t`.
pub fn geometric_capital(g: &GeometricParams, cap: &CapitalParams, t: usize) -> Result<Solution> {
    g.validate()?;
    cap.validate()?;
    let regimes = geometric_regimes(g, cap);
    let spec = match (&regimes.after, g.lock_up.periods()) {
        (Some(after), Some(lock)) if t >= lock => after,
        _ => &regimes.before,
    };
    let (value, regularized) = spec.eval(t as f64);
    Ok(Solution { value, regularized })
}

pub fn geometric_capital_series(
    g: &GeometricParams,
    cap: &CapitalParams,
    horizon: usize,
) -> Result<Vec<f64>> {
    (0..=horizon)
        .map(|t| geometric_capital(g, cap, t).map(|s| s.value))
        .collect()
}

/// Running sum S_t^{QL}, t = 0..=horizon.
fn ql_sums(q: &QuasiLogisticParams, i: f64, r: f64, horizon: usize) -> Vec<f64> {
    let nu = q.ratio();
    let n = q.growth;
    let sigma = 1.0 / ((1.0 - nu) * n * (1.0 + i));
    let ratio = (1.0 + n) / (1.0 + i);
    let rate = |t: f64| n * (1.0 - nu) / (1.0 + nu * ((t * n.ln_1p()).exp() - 1.0));
    let mut acc = CompensatedSum::new();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(0.0);
    let mut prev_rate = rate(0.0);
    for k in 1..=horizon {
        let nk = rate(k as f64);
        acc.add(ratio.powi(k as i32 - 1) * prev_rate * (nk - r));
        out.push(sigma * acc.value());
        prev_rate = nk;
    }
    out
}

/// Closed-form quasi-logistic capital, `t = 0..=horizon`.
pub fn ql_capital_series(
    q: &QuasiLogisticParams,
    cap: &CapitalParams,
    horizon: usize,
) -> Result<Vec<f64>> {
    q.validate()?;
    cap.validate()?;
    let i = cap.market_rate;
    let s = ql_sums(q, i, cap.coupon_rate, horizon);
    let k0 = cap.initial_capital(q.n0);
    let flow = cap.deposit * q.n0;
    let lock = q.lock_up.periods();
    Ok((0..=horizon)
        .map(|t| {
            let grow = (1.0 + i).powi(t as i32);
            match lock {
                Some(l) if t >= l => {
                    let back = (1.0 + i).powi(-(l as i32));
                    grow * (k0 + flow * (s[t] - back * (1.0 + s[t - l])))
                }
                _ => grow * (k0 + flow * s[t]),
            }
        })
        .collect())
}

/// Closed-form quasi-logistic capital at period `t`.
pub fn ql_capital(q: &QuasiLogisticParams, cap: &CapitalParams, t: usize) -> Result<f64> {
    Ok(ql_capital_series(q, cap, t)?[t])
}

/// Time of maximal capitalization for i = 0 before any withdrawal.
pub fn ql_capital_peak_no_market(q: &QuasiLogisticParams, cap: &CapitalParams) -> Result<Timing> {
    q.validate()?;
    cap.validate()?;
    if cap.market_rate != 0.0 {
        return Err(ModelError::Unsupported(
            "the closed-form peak needs market_rate = 0; take the argmax of the path instead"
                .into(),
        ));
    }
    let (n, r) = (q.growth, cap.coupon_rate);
    if n <= r {
        return Ok(Timing::NoPeak);
    }
    let arg = (q.pool / q.n0 - 1.0) * (n / r - 1.0);
    Ok(Timing::At(arg.ln() / n.ln_1p()))
}

/// Closed-form non-standard SIR capital, `t = 0..=horizon`.
pub fn nssir_capital_series(
    s: &SirParams,
    cap: &CapitalParams,
    horizon: usize,
) -> Result<Vec<f64>> {
    s.nonstandard_checks().finish()?;
    cap.validate()?;
    let (beta, gamma, r, i) = (s.beta, s.gamma, cap.coupon_rate, cap.market_rate);
    let g = 1.0 + beta;
    let delay = s.recovery_delay as usize;
    let x0 = s.i0 / s.s0;
    let mut out = Vec::with_capacity(horizon + 1);
    let k0 = cap.initial_capital(s.i0);
    out.push(k0);

    // Withdrawal-free regime, closed rational product.
    let head = delay.min(horizon);
    let mut acc = CompensatedSum::new();
    for k in 1..=head {
        let x = x0 * g.powi(k as i32 - 1);
        let b = g.powi(k as i32 - 1) * (beta - r * (1.0 + g * x)) / (1.0 + x);
        let p = (1.0 + x0) / (1.0 + x0 * g.powi(k as i32));
        acc.add(b * p / (1.0 + i).powi(k as i32));
        out.push((1.0 + i).powi(k as i32) * (k0 + cap.deposit * s.i0 * acc.value()));
    }
    if horizon <= delay {
        return Ok(out);
    }

    // Regime with exits, seeded at the onset.
    let p_on = (1.0 + x0) / (1.0 + x0 * g.powi(delay as i32));
    let i_on = s.i0 * g.powi(delay as i32) * p_on;
    let x_on = x0 * g.powi(delay as i32);
    let k_on = out[delay];
    let rho = g / (1.0 + gamma);
    let mut acc = CompensatedSum::new();
    let mut p = 1.0;
    for t in delay + 1..=horizon {
        let m = (t - delay) as i32;
        let x = x_on * rho.powi(m - 1);
        p *= (1.0 + x) / (1.0 + g * x);
        let b = rho.powi(m - 1) * ((beta - r * (1.0 + g * x)) / (1.0 + x) - gamma * rho);
        acc.add(b * p / (1.0 + i).powi(m));
        out.push((1.0 + i).powi(m) * (k_on + cap.deposit * i_on * acc.value()));
    }
    Ok(out)
}

/// Closed-form non-standard SIR capital at period `t`.
pub fn nssir_capital(s: &SirParams, cap: &CapitalParams, t: usize) -> Result<f64> {
    Ok(nssir_capital_series(s, cap, t)?[t])
}

/// Closed-form capital peak for i = 0, in whichever regime it falls.
pub fn nssir_capital_peak_no_market(s: &SirParams, cap: &CapitalParams) -> Result<Timing> {
    s.nonstandard_checks().finish()?;
    cap.validate()?;
    if cap.market_rate != 0.0 {
        return Err(ModelError::Unsupported(
            "the closed-form peak needs market_rate = 0; take the argmax of the path instead"
                .into(),
        ));
    }
    let (beta, gamma, r) = (s.beta, s.gamma, cap.coupon_rate);
    let delay = s.recovery_delay as f64;
    let perpetual = gamma == 0.0;

    if perpetual || s.recovery_delay > 0 {
        if beta <= r {
            return Ok(Timing::NoPeak);
        }
        let t = ((beta - r) / r * s.s0 / s.i0).ln() / beta.ln_1p();
        if perpetual || t <= delay {
            return Ok(if t < 0.0 {
                Timing::NoPeak
            } else {
                Timing::At(t)
            });
        }
    }

    // Peak after the onset of exits.
    let series = nssir_series(s, s.recovery_delay as usize);
    let (s_on, i_on) = (
        series.s[s.recovery_delay as usize],
        series.i[s.recovery_delay as usize],
    );
    let drain = r * (1.0 + gamma) + gamma;
    if beta <= drain {
        return Ok(Timing::NoPeak);
    }
    let arg = (beta - drain) / (drain * (1.0 + gamma)) * s_on / i_on;
    let rho = (1.0 + beta) / (1.0 + gamma);
    if arg > 1.0 {
        Ok(Timing::At(delay + arg.ln() / rho.ln()))
    } else if arg == 1.0 || s.recovery_delay > 0 {
        Ok(Timing::At(delay))
    } else {
        Ok(Timing::NoPeak)
    }
}
