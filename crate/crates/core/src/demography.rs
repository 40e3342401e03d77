//! Population paths for the geometric, quasi-logistic and SIR-type laws.
//!
//! Every path carries four aligned series indexed `0..=horizon`: active
//! investors, entering and exiting flows, and the cumulative count of those
//! who have left. Bounded-pool models also report the untouched pool.

use serde::{Deserialize, Serialize};

use crate::error::{Checks, ModelError, Result};
use crate::timing::Timing;

/// Lock-up horizon: a number of periods, or no withdrawals at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "Option<u32>", into = "Option<u32>")]
pub enum LockUp {
    Periods(u32),
    #[default]
    Unbounded,
}

impl LockUp {
    pub fn periods(self) -> Option<usize> {
        match self {
            LockUp::Periods(t) => Some(t as usize),
            LockUp::Unbounded => None,
        }
    }

    /// True while `t` lies in the pre-withdrawal regime.
    pub fn before(self, t: usize) -> bool {
        match self {
            LockUp::Periods(lock) => t < lock as usize,
            LockUp::Unbounded => true,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, LockUp::Unbounded)
    }
}

impl From<Option<u32>> for LockUp {
    fn from(v: Option<u32>) -> Self {
        v.map_or(LockUp::Unbounded, LockUp::Periods)
    }
}

impl From<LockUp> for Option<u32> {
    fn from(v: LockUp) -> Self {
        match v {
            LockUp::Periods(t) => Some(t),
            LockUp::Unbounded => None,
        }
    }
}

fn check_lock(c: &mut Checks, lock: LockUp) {
    c.require(
        lock != LockUp::Periods(0),
        "lock_up",
        "must be at least 1 period",
    );
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    pub n0: f64,
    pub growth: f64,
    #[serde(default, skip_serializing_if = "LockUp::is_unbounded")]
    pub lock_up: LockUp,
}

impl GeometricParams {
    pub fn new(n0: f64, growth: f64, lock_up: LockUp) -> Result<Self> {
        let p = Self {
            n0,
            growth,
            lock_up,
        };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn checks(&self) -> Checks {
        let mut c = Checks::default();
        c.finite(self.n0, "n0").finite(self.growth, "growth");
        c.require(self.n0 > 0.0, "n0", "must be positive");
        c.require(self.growth > -1.0, "growth", "must exceed -1");
        check_lock(&mut c, self.lock_up);
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.checks().finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiLogisticParams {
    pub n0: f64,
    /// Pool supremum N. `f64::INFINITY` reduces to geometric growth.
    pub pool: f64,
    pub growth: f64,
    #[serde(default, skip_serializing_if = "LockUp::is_unbounded")]
    pub lock_up: LockUp,
}

impl QuasiLogisticParams {
    pub fn new(n0: f64, pool: f64, growth: f64, lock_up: LockUp) -> Result<Self> {
        let p = Self {
            n0,
            pool,
            growth,
            lock_up,
        };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn checks(&self) -> Checks {
        let mut c = Checks::default();
        c.finite(self.n0, "n0").finite(self.growth, "growth");
        c.require(!self.pool.is_nan(), "pool", "must be a number");
        c.require(self.n0 > 0.0, "n0", "must be positive");
        c.require(self.pool > self.n0, "pool", "must exceed n0");
        c.require(self.growth > 0.0, "growth", "must be positive");
        check_lock(&mut c, self.lock_up);
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.checks().finish()
    }

    /// The ratio N0/N.
    pub fn ratio(&self) -> f64 {
        self.n0 / self.pool
    }

    /// Sigmoid count N^<_t, valid for real t.
    pub fn sigmoid(&self, t: f64) -> f64 {
        let nu = self.ratio();
        let decay = (-t * self.growth.ln_1p()).exp();
        self.n0 / ((1.0 - nu) * decay + nu)
    }

    /// N - N^<_t, evaluated without cancellation.
    pub fn untouched(&self, t: f64) -> f64 {
        if self.pool.is_infinite() {
            return f64::INFINITY;
        }
        let nu = self.ratio();
        let x = (t * self.growth.ln_1p()).exp();
        self.pool * (1.0 - nu) / (1.0 - nu + nu * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub s0: f64,
    pub i0: f64,
    #[serde(default)]
    pub r0: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub recovery_delay: u32,
}

impl SirParams {
    pub(crate) fn checks(&self) -> Checks {
        let mut c = Checks::default();
        for (x, f) in [
            (self.s0, "s0"),
            (self.i0, "i0"),
            (self.r0, "r0"),
            (self.beta, "beta"),
            (self.gamma, "gamma"),
        ] {
            c.finite(x, f);
            c.require(x >= 0.0, f, "must be non-negative");
        }
        c.require(self.total() > 0.0, "s0", "population must be positive");
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.checks().finish()
    }

    /// Stricter checks for the product solution, which divides by S0 and I0.
    pub(crate) fn nonstandard_checks(&self) -> Checks {
        let mut c = self.checks();
        c.require(self.s0 > 0.0, "s0", "must be positive");
        c.require(self.i0 > 0.0, "i0", "must be positive");
        c
    }

    pub fn total(&self) -> f64 {
        self.s0 + self.i0 + self.r0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMethod {
    ClosedForm,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationPath {
    pub horizon: usize,
    pub active: Vec<f64>,
    pub entering: Vec<f64>,
    pub exiting: Vec<f64>,
    /// Former participants, cumulative (R_t for SIR models).
    pub removed: Vec<f64>,
    /// Not-yet-joined pool; absent for the unbounded geometric law.
    pub pool_remaining: Option<Vec<f64>>,
    pub method: PathMethod,
}

impl PopulationPath {
    fn with_capacity(horizon: usize, method: PathMethod, pool: bool) -> Self {
        let n = horizon + 1;
        Self {
            horizon,
            active: Vec::with_capacity(n),
            entering: Vec::with_capacity(n),
            exiting: Vec::with_capacity(n),
            removed: Vec::with_capacity(n),
            pool_remaining: pool.then(|| Vec::with_capacity(n)),
            method,
        }
    }

    /// First index with fewer than `threshold` active participants, after the
    /// peak has been passed.
    pub fn termination_index(&self, threshold: f64) -> Option<usize> {
        // Counts before the first exit are cumulative; skip that spike.
        let from = self.exiting.iter().position(|x| *x > 0.0).unwrap_or(0);
        let peak = self.active[from..]
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |m, (k, v)| if *v > m.1 { (k, *v) } else { m },
            )
            .0
            + from;
        (peak..self.active.len()).find(|&k| self.active[k] < threshold)
    }

    /// Per-step growth rate of the active series.
    pub fn effective_rate(&self, t: usize) -> f64 {
        self.active[t] / self.active[t - 1] - 1.0
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(ModelError::InvalidArgument(
            "horizon must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Closed-form geometric path.
pub fn geometric_path(p: &GeometricParams, horizon: usize) -> Result<PopulationPath> {
    p.validate()?;
    check_horizon(horizon)?;
    let g = 1.0 + p.growth;
    let mut out = PopulationPath::with_capacity(horizon, PathMethod::ClosedForm, false);
    for t in 0..=horizon {
        let tf = t as f64;
        let grown = p.n0 * g.powf(tf);
        let (active, exiting, removed) = match p.lock_up.periods() {
            Some(lock) if t >= lock => {
                let lf = lock as f64;
                let out_t = if t == lock {
                    p.n0
                } else {
                    p.n0 * g.powf(tf - lf - 1.0) * p.growth
                };
                (
                    grown - p.n0 * g.powf(tf - lf),
                    out_t,
                    p.n0 * g.powf(tf - lf),
                )
            }
            _ => (grown, 0.0, 0.0),
        };
        let entering = if t == 0 {
            p.n0
        } else {
            p.n0 * g.powf(tf - 1.0) * p.growth
        };
        out.active.push(active);
        out.entering.push(entering);
        out.exiting.push(exiting);
        out.removed.push(removed);
    }
    Ok(out)
}

/// Declining rate n_t = n(1-N0/N) / (1 + N0/N((1+n)^t - 1)).
pub fn quasi_logistic_rate(p: &QuasiLogisticParams, t: f64) -> Result<f64> {
    p.validate()?;
    if t.is_nan() || t < 0.0 {
        return Err(ModelError::InvalidArgument("t must be non-negative".into()));
    }
    Ok(rate_at(p, t))
}

fn rate_at(p: &QuasiLogisticParams, t: f64) -> f64 {
    let nu = p.ratio();
    let x = (t * p.growth.ln_1p()).exp();
    p.growth * (1.0 - nu) / (1.0 + nu * (x - 1.0))
}

/// Inflection of the sigmoid, where n_t = n/2.
pub fn quasi_logistic_turning_point(p: &QuasiLogisticParams) -> Result<f64> {
    p.validate()?;
    if p.pool.is_infinite() {
        return Err(ModelError::invalid(
            "pool",
            "turning point needs a finite pool",
        ));
    }
    Ok((p.pool / p.n0 - 1.0).ln() / p.growth.ln_1p())
}

/// Closed-form quasi-logistic path.
pub fn quasi_logistic_path(p: &QuasiLogisticParams, horizon: usize) -> Result<PopulationPath> {
    p.validate()?;
    check_horizon(horizon)?;
    let finite_pool = p.pool.is_finite();
    let mut out = PopulationPath::with_capacity(horizon, PathMethod::ClosedForm, finite_pool);
    let lock = p.lock_up.periods();
    for t in 0..=horizon {
        let tf = t as f64;
        let below = p.sigmoid(tf);
        let entering = if t == 0 {
            p.n0
        } else {
            p.sigmoid(tf - 1.0) * rate_at(p, tf)
        };
        let (active, exiting, removed) = match lock {
            Some(l) if t >= l => {
                let lag = (t - l) as f64;
                (below - p.sigmoid(lag), out.entering[t - l], p.sigmoid(lag))
            }
            _ => (below, 0.0, 0.0),
        };
        out.active.push(active);
        out.entering.push(entering);
        out.exiting.push(exiting);
        out.removed.push(removed);
        if let Some(pool) = out.pool_remaining.as_mut() {
            pool.push(p.untouched(tf));
        }
    }
    Ok(out)
}

/// Active count at a real time: N^<_t, minus N^<_{t-T} once withdrawals start.
pub fn quasi_logistic_active(p: &QuasiLogisticParams, t: f64) -> f64 {
    match p.lock_up.periods() {
        Some(lock) if t >= lock as f64 => p.sigmoid(t) - p.sigmoid(t - lock as f64),
        _ => p.sigmoid(t),
    }
}

/// Period of the hump maximum, (T+1)/2 + t_TP.
pub fn quasi_logistic_population_peak(p: &QuasiLogisticParams) -> Result<Timing> {
    let tp = quasi_logistic_turning_point(p)?;
    Ok(match p.lock_up.periods() {
        Some(lock) => Timing::At((lock as f64 + 1.0) / 2.0 + tp),
        None => Timing::NoPeak,
    })
}

/// Spacing of the binary grid that N occupies; values on it add exactly.
fn grid_step(total: f64) -> f64 {
    let exp = total.log2().floor() as i32;
    2f64.powi(exp - 52)
}

fn snap(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Iterated standard SIR model (no closed form exists).
///
/// S and I are kept on the ulp grid of N and R is their complement, so
/// `s + i + r == N` holds bit-exactly in any summation order.
pub fn sir_standard_path(p: &SirParams, horizon: usize) -> Result<PopulationPath> {
    p.validate()?;
    check_horizon(horizon)?;
    if p.recovery_delay != 0 {
        return Err(ModelError::Unsupported(
            "recovery delay is only available for the non-standard SIR model".into(),
        ));
    }
    let n = p.total();
    let step = grid_step(n);
    let mut s = snap(p.s0, step);
    let mut i = snap(p.i0, step);
    let mut r = n - s - i;
    let mut out = PopulationPath::with_capacity(horizon, PathMethod::Iterative, true);
    out.active.push(i);
    out.entering.push(i);
    out.exiting.push(0.0);
    out.removed.push(r);
    out.pool_remaining.as_mut().unwrap().push(s);
    for _ in 1..=horizon {
        let infections = p.beta * s * i / n;
        let recoveries = p.gamma * i;
        let s_next = snap(s - infections, step);
        let i_next = snap(i + infections - recoveries, step);
        let r_next = n - s_next - i_next;
        out.entering.push(s - s_next);
        out.exiting.push(r_next - r);
        (s, i, r) = (s_next, i_next, r_next);
        out.active.push(i);
        out.removed.push(r);
        out.pool_remaining.as_mut().unwrap().push(s);
    }
    Ok(out)
}

/// Internal state of the product solution.
pub(crate) struct NsSirSeries {
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    /// Product function relative to its regime start (p^< then p^>).
    pub product: Vec<f64>,
}

pub(crate) fn nssir_series(p: &SirParams, horizon: usize) -> NsSirSeries {
    let delay = p.recovery_delay as usize;
    let g = 1.0 + p.beta;
    let x0 = p.i0 / p.s0;
    let mut s = Vec::with_capacity(horizon + 1);
    let mut i = Vec::with_capacity(horizon + 1);
    let mut product = Vec::with_capacity(horizon + 1);

    if delay == 0 {
        let rho = g / (1.0 + p.gamma);
        let mut prod = 1.0;
        for t in 0..=horizon {
            if t > 0 {
                let xk = x0 * rho.powi(t as i32 - 1);
                prod *= (1.0 + xk) / (1.0 + g * xk);
            }
            s.push(p.s0 * prod);
            i.push(p.i0 * rho.powi(t as i32) * prod);
            product.push(prod);
        }
        return NsSirSeries { s, i, product };
    }

    // Before onset gamma is zero and the product telescopes.
    let mut running = 1.0;
    let head = delay.min(horizon);
    for t in 0..=head {
        if t > 0 {
            let xk = x0 * g.powi(t as i32 - 1);
            running *= (1.0 + xk) / (1.0 + g * xk);
        }
        let prod = (1.0 + x0) / (1.0 + x0 * g.powi(t as i32));
        debug_assert!((prod - running).abs() <= 1e-9 * prod.max(1e-300));
        s.push(p.s0 * prod);
        i.push(p.i0 * g.powi(t as i32) * prod);
        product.push(prod);
    }
    if horizon > delay {
        let rho = g / (1.0 + p.gamma);
        let (s_on, i_on) = (s[delay], i[delay]);
        let x_on = i_on / s_on;
        let mut prod = 1.0;
        for t in delay + 1..=horizon {
            let m = (t - delay) as i32;
            let xk = x_on * rho.powi(m - 1);
            prod *= (1.0 + xk) / (1.0 + g * xk);
            s.push(s_on * prod);
            i.push(i_on * rho.powi(m) * prod);
            product.push(prod);
        }
    }
    NsSirSeries { s, i, product }
}

/// Exact product solution of the non-standard SIR model, with optional
/// recovery-onset delay.
pub fn nssir_path(p: &SirParams, horizon: usize) -> Result<PopulationPath> {
    p.nonstandard_checks().finish()?;
    check_horizon(horizon)?;
    let series = nssir_series(p, horizon);
    let n = p.total();
    let delay = p.recovery_delay as usize;
    let mut out = PopulationPath::with_capacity(horizon, PathMethod::ClosedForm, true);
    for t in 0..=horizon {
        let (s, i) = (series.s[t], series.i[t]);
        let (entering, exiting) = if t == 0 {
            (i, 0.0)
        } else {
            let gamma = if t > delay { p.gamma } else { 0.0 };
            (series.s[t - 1] - s, gamma * i)
        };
        out.active.push(i);
        out.entering.push(entering);
        out.exiting.push(exiting);
        out.removed.push(n - s - i);
        out.pool_remaining.as_mut().unwrap().push(s);
    }
    Ok(out)
}

/// Product function p_t for immediate recovery.
pub fn nssir_product(p: &SirParams, t: usize) -> Result<f64> {
    p.nonstandard_checks().finish()?;
    let q = SirParams {
        recovery_delay: 0,
        ..*p
    };
    Ok(*nssir_series(&q, t).product.last().unwrap())
}

/// Peak of the infected series for immediate recovery.
pub fn nssir_infection_peak(p: &SirParams) -> Result<Timing> {
    p.nonstandard_checks().finish()?;
    let (b, g) = (p.beta, p.gamma);
    if !(b > g && g > 0.0) {
        return Ok(Timing::NoPeak);
    }
    let arg = g * (1.0 + g) / (b - g) * p.i0 / p.s0;
    if !(arg > 0.0 && arg < 1.0) {
        return Ok(Timing::NoPeak);
    }
    Ok(Timing::At(arg.ln() / ((1.0 + g) / (1.0 + b)).ln()))
}
