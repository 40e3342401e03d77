//! Critical times, traffic-light classification, termination time and the
//! no-Ponzi viability scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capital::{geometric_regimes, ql_capital_series, CapitalParams, CapitalPath};
use crate::demography::{quasi_logistic_active, GeometricParams, LockUp, QuasiLogisticParams};
use crate::error::{Checks, ModelError, Result};
use crate::linrec::RecurrenceSpec;
use crate::numeric::{first_negative, interpolate_crossing, sample_linear};
use crate::timing::Timing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSource {
    Formula,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalTimes {
    pub t_peak: Timing,
    pub t_collapse: Timing,
    /// Period of precipice, t_collapse - t_peak.
    pub precipice: Timing,
    pub source: TimeSource,
}

/// `K(t) = a (1+i)^{t-s} + b (1+n)^{t-s}` on one regime.
struct TwoExp {
    a: f64,
    b: f64,
    s: f64,
    i: f64,
    n: f64,
}

impl TwoExp {
    fn from_spec(spec: &RecurrenceSpec) -> Self {
        let term = spec.terms[0];
        let i = spec.rate;
        let eps = crate::linrec::RESONANCE_EPS * i.abs().max(1.0);
        let n = if (term.rate - i).abs() < eps {
            i + eps
        } else {
            term.rate
        };
        let b = term.coefficient * (1.0 + n).powf(spec.start as f64) / (n - i);
        Self {
            a: spec.initial - b,
            b,
            s: spec.start as f64,
            i,
            n,
        }
    }

    fn log_ratio(&self) -> f64 {
        ((1.0 + self.n) / (1.0 + self.i)).ln()
    }

    fn collapse(&self) -> Option<f64> {
        let x = -self.a / self.b;
        let t = self.s + x.ln() / self.log_ratio();
        (x > 0.0 && t.is_finite() && t >= self.s).then_some(t)
    }

    /// Continuous solution of K_t - K_{t-1} = 0, if the capital first rises.
    fn peak(&self) -> Option<f64> {
        let rising = self.a * self.i + self.b * self.n > 0.0;
        let x = -self.a * self.i / (self.b * self.n);
        let t = self.s + 1.0 + x.ln() / self.log_ratio();
        (rising && x > 0.0 && t.is_finite()).then_some(t)
    }
}

/// Largest value of the discrete series next to a continuous extremum.
fn top(spec: &RecurrenceSpec, t: f64, end: f64) -> f64 {
    [t.floor() - 1.0, t.floor(), t.ceil()]
        .into_iter()
        .filter(|u| *u >= spec.start as f64 && *u < end)
        .map(|u| spec.eval(u).0)
        .fold(f64::MIN, f64::max)
}

/// Closed-form peak, collapse and precipice for geometric demography.
pub fn geometric_critical_times(g: &GeometricParams, cap: &CapitalParams) -> Result<CriticalTimes> {
    g.validate()?;
    cap.validate()?;
    let (n, r, i) = (g.growth, cap.coupon_rate, cap.market_rate);
    let k0 = cap.initial_capital(g.n0);
    let mut out = CriticalTimes {
        t_peak: Timing::NoPeak,
        t_collapse: Timing::NoCollapse,
        precipice: Timing::Undefined,
        source: TimeSource::Formula,
    };
    if n >= r {
        return Ok(out);
    }
    if n == 0.0 && i == 0.0 {
        // Linear decline; only the pre-withdrawal regime is meaningful here.
        let t = k0 / (g.n0 * cap.deposit * r);
        if g.lock_up.before(t.ceil() as usize) {
            out.t_collapse = Timing::At(t);
        }
        return Ok(out);
    }

    let regimes = geometric_regimes(g, cap);
    let before = TwoExp::from_spec(&regimes.before);
    let lock = g
        .lock_up
        .periods()
        .map(|l| l as f64)
        .unwrap_or(f64::INFINITY);

    let mut peak = before.peak().filter(|t| *t <= lock);
    let mut collapse = before.collapse().filter(|t| *t < lock);
    if collapse.is_none() {
        if let Some(spec) = &regimes.after {
            let after = TwoExp::from_spec(spec);
            // Still rising when the first cohort is repaid: the drop at T makes T-1 a peak.
            let edge = (peak.is_none() && lock >= 2.0)
                .then_some(lock - 1.0)
                .filter(|e| regimes.before.eval(*e).0 > regimes.before.eval(e - 1.0).0);
            if after.a + after.b < 0.0 {
                // Repaying the first cohort at T empties the fund.
                collapse = Some(lock);
                peak = peak.or(edge);
            } else {
                collapse = after.collapse();
                let inner = after.peak().filter(|t| *t >= lock);
                let early = peak
                    .or(edge)
                    .filter(|_| inner.is_some() || collapse.is_some());
                peak = match (early, inner) {
                    (Some(e), Some(p)) => Some(
                        if top(&regimes.before, e, lock) >= top(spec, p, f64::INFINITY) {
                            e
                        } else {
                            p
                        },
                    ),
                    (e, p) => e.or(p),
                };
            }
        }
    }
    if let Some(t) = peak {
        out.t_peak = Timing::At(t);
    }
    if let Some(t) = collapse {
        out.t_collapse = Timing::At(t);
    }
    if i != 0.0 {
        if let (Some(p), Some(c)) = (peak, collapse) {
            out.precipice = Timing::At(c - p);
        }
    }
    Ok(out)
}

/// `log(n/i)/log((1+n)/(1+i)) - 1`, undefined for i = 0.
pub fn precipice_formula(n: f64, i: f64) -> Timing {
    if i == 0.0 || n / i <= 0.0 {
        return Timing::Undefined;
    }
    Timing::At((n / i).ln() / ((1.0 + n) / (1.0 + i)).ln() - 1.0)
}

/// Peak (discrete argmax) and interpolated zero crossing of a capital series.
pub fn numeric_critical_times(capital: &[f64]) -> CriticalTimes {
    let crossing = first_negative(capital);
    let end = crossing.unwrap_or(capital.len());
    let (arg, _) = capital[..end]
        .iter()
        .enumerate()
        .fold(
            (0usize, f64::MIN),
            |m, (k, v)| if *v > m.1 { (k, *v) } else { m },
        );
    let t_peak = if arg == 0 || (crossing.is_none() && arg + 1 == capital.len()) {
        Timing::NoPeak
    } else {
        Timing::At(arg as f64)
    };
    let t_collapse = match crossing {
        Some(k) => Timing::At(interpolate_crossing(capital, k)),
        None => Timing::NoCollapse,
    };
    let precipice = match (t_peak, t_collapse) {
        (Timing::At(p), Timing::At(c)) => Timing::At(c - p),
        _ => Timing::Undefined,
    };
    CriticalTimes {
        t_peak,
        t_collapse,
        precipice,
        source: TimeSource::Numeric,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Light {
    Red,
    Yellow,
    Green,
}

impl Light {
    pub fn as_str(self) -> &'static str {
        match self {
            Light::Red => "Red",
            Light::Yellow => "Yellow",
            Light::Green => "Green",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficLight {
    pub label: Light,
    pub k_end: f64,
    /// K0_pro (1+i)^{t_end}.
    pub bound_upper: f64,
    pub t_end: f64,
    /// False for a Green run that beat the market bound.
    pub within_bound: bool,
}

/// Labels a terminal capital `k_end` reached at (possibly fractional) `t_end`.
pub fn classify_terminal(k_end: f64, t_end: f64, cap: &CapitalParams) -> TrafficLight {
    let bound_upper = cap.promoter_endowment * (1.0 + cap.market_rate).powf(t_end);
    let label = if k_end < 0.0 {
        Light::Red
    } else if k_end <= cap.promoter_endowment {
        Light::Yellow
    } else {
        Light::Green
    };
    TrafficLight {
        label,
        k_end,
        bound_upper,
        t_end,
        within_bound: label != Light::Green || k_end < bound_upper,
    }
}

/// Classification at the termination index; a collapse before it forces Red.
pub fn classify(path: &CapitalPath, cap: &CapitalParams) -> Result<TrafficLight> {
    let end = path.termination_index;
    if let Some(k) = first_negative(&path.capital[..=end.min(path.horizon())]) {
        return Ok(classify_terminal(path.capital[k], k as f64, cap));
    }
    if !path.terminated {
        return Err(ModelError::InvalidArgument(
            "path has not terminated: the active count never fell below the threshold".into(),
        ));
    }
    Ok(classify_terminal(path.capital[end], end as f64, cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootBranch {
    PrePeak,
    #[default]
    PostPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimePrefactor {
    /// `log(u) / log(1+n)`, consistent with the path.
    #[default]
    Log,
    /// `log(u) / (1+n)`.
    Linear,
}

/// Time at which the active count reaches `n_star` (continuous index).
pub fn termination_time(
    q: &QuasiLogisticParams,
    n_star: f64,
    branch: RootBranch,
    prefactor: TimePrefactor,
) -> Result<f64> {
    q.validate()?;
    let lock = q
        .lock_up
        .periods()
        .ok_or_else(|| ModelError::invalid("lock_up", "termination time needs a finite lock-up"))?;
    if !(n_star > 0.0 && n_star.is_finite()) {
        return Err(ModelError::invalid("n_star", "must be positive and finite"));
    }
    if !q.pool.is_finite() {
        return Err(ModelError::invalid(
            "pool",
            "termination time needs a finite pool",
        ));
    }
    let nu = q.ratio();
    let nu_star = n_star / q.pool;
    let lambda = (1.0 + q.growth).powf(-(lock as f64));
    let a = nu_star * nu * lambda;
    let b = -(1.0 - nu) * (1.0 - lambda - nu_star * (1.0 + lambda));
    let c = n_star / q.n0 * (1.0 - nu).powi(2);
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 && disc > -1e-12 * b * b {
        disc = 0.0;
    }
    let maximum = hump_maximum(q);
    if disc < 0.0 || b >= 0.0 {
        return Err(ModelError::UnreachableThreshold {
            threshold: n_star,
            maximum,
        });
    }
    let root = match branch {
        RootBranch::PrePeak => (-b - disc.sqrt()) / (2.0 * a),
        RootBranch::PostPeak => (-b + disc.sqrt()) / (2.0 * a),
    };
    let scale = match prefactor {
        TimePrefactor::Log => q.growth.ln_1p(),
        TimePrefactor::Linear => 1.0 + q.growth,
    };
    let t = root.ln() / scale;
    if branch == RootBranch::PrePeak && prefactor == TimePrefactor::Log && t < lock as f64 {
        // The crossing happens on the sigmoid, before any withdrawal.
        let x = n_star * (1.0 - nu) / (q.n0 - nu * n_star);
        return Ok(x.ln() / scale);
    }
    Ok(t)
}

/// Height of the active-count hump, at its continuous maximum T/2 + t_TP.
pub fn hump_maximum(q: &QuasiLogisticParams) -> f64 {
    match q.lock_up.periods() {
        Some(lock) => {
            let tp = (q.pool / q.n0 - 1.0).ln() / q.growth.ln_1p();
            let t = (lock as f64 / 2.0 + tp).max(lock as f64);
            quasi_logistic_active(q, t)
        }
        None => q.pool,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRequest {
    pub n0: f64,
    pub pool: f64,
    pub growth: f64,
    pub promoter_endowment: f64,
    pub deposit: f64,
    pub coupon_rate: f64,
    pub market_rates: Vec<f64>,
    pub lock_ups: Vec<u32>,
    #[serde(default = "default_n_star")]
    pub n_star: f64,
}

fn default_n_star() -> f64 {
    crate::capital::DEFAULT_N_STAR
}

impl ScanRequest {
    pub fn validate(&self) -> Result<()> {
        let mut c = Checks::default();
        c.require(
            !self.market_rates.is_empty(),
            "market_rates",
            "must not be empty",
        );
        c.require(!self.lock_ups.is_empty(), "lock_ups", "must not be empty");
        c.require(
            self.lock_ups.iter().all(|t| *t >= 1),
            "lock_ups",
            "every lock-up must be at least 1",
        );
        c.require(
            self.market_rates.iter().all(|i| i.is_finite() && *i > -1.0),
            "market_rates",
            "every rate must be finite and exceed -1",
        );
        c.require(
            self.n_star > 0.0 && self.n_star.is_finite(),
            "n_star",
            "must be positive",
        );
        let mut all = c.prefixed("scan");
        let q = QuasiLogisticParams {
            n0: self.n0,
            pool: self.pool,
            growth: self.growth,
            lock_up: LockUp::Unbounded,
        };
        all.extend(q.checks().prefixed("demography"));
        let cap = CapitalParams {
            promoter_endowment: self.promoter_endowment,
            deposit: self.deposit,
            coupon_rate: self.coupon_rate,
            market_rate: 0.0,
        };
        all.extend(cap.checks().prefixed("capital"));
        if all.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter(all))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub market_rate: f64,
    pub lock_up: u32,
    pub viable: bool,
    /// None when the threshold cannot be reached.
    pub t_star: Option<f64>,
    pub k_end: Option<f64>,
    pub min_capital: Option<f64>,
    pub label: Option<Light>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpgSurface {
    pub axis_i: Vec<f64>,
    pub axis_t: Vec<u32>,
    /// `viable[row][col]` for `axis_i[row]`, `axis_t[col]`.
    pub viable: Vec<Vec<bool>>,
    pub cells: Vec<Vec<ScanCell>>,
}

/// Evaluates one (i, T) cell: simulate to t* and require K > 0 throughout.
pub fn scan_cell(req: &ScanRequest, market_rate: f64, lock_up: u32) -> Result<ScanCell> {
    let q = QuasiLogisticParams::new(req.n0, req.pool, req.growth, LockUp::Periods(lock_up))?;
    let cap = CapitalParams::new(
        req.promoter_endowment,
        req.deposit,
        req.coupon_rate,
        market_rate,
    )?;
    let mut cell = ScanCell {
        market_rate,
        lock_up,
        viable: false,
        t_star: None,
        k_end: None,
        min_capital: None,
        label: None,
    };
    let t_star = match termination_time(&q, req.n_star, RootBranch::PostPeak, TimePrefactor::Log) {
        Ok(t) => t,
        Err(ModelError::UnreachableThreshold { .. }) => return Ok(cell),
        Err(e) => return Err(e),
    };
    let end = t_star.ceil().max(1.0) as usize;
    let capital = ql_capital_series(&q, &cap, end)?;
    let min = capital.iter().copied().fold(f64::INFINITY, f64::min);
    cell.t_star = Some(t_star);
    cell.k_end = Some(capital[end]);
    cell.min_capital = Some(min);
    cell.viable = min > 0.0;
    let light = match first_negative(&capital) {
        Some(k) => classify_terminal(capital[k], k as f64, &cap),
        None => classify_terminal(capital[end], end as f64, &cap),
    };
    cell.label = Some(light.label);
    Ok(cell)
}

/// Viability over an (i, T) grid; cells are evaluated in parallel.
pub fn npg_scan(req: &ScanRequest) -> Result<NpgSurface> {
    req.validate()?;
    let cells: Vec<Vec<ScanCell>> = req
        .market_rates
        .par_iter()
        .map(|&i| {
            req.lock_ups
                .par_iter()
                .map(|&t| scan_cell(req, i, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let viable = cells
        .iter()
        .map(|row| row.iter().map(|c| c.viable).collect())
        .collect();
    Ok(NpgSurface {
        axis_i: req.market_rates.clone(),
        axis_t: req.lock_ups.clone(),
        viable,
        cells,
    })
}

/// Capital at a fractional time by linear interpolation.
pub fn capital_at(capital: &[f64], t: f64) -> f64 {
    sample_linear(capital, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(k0_pro: f64, i: f64) -> CapitalParams {
        CapitalParams::new(k0_pro, 3.0, 0.05, i).unwrap()
    }

    #[test]
    fn traffic_examples() {
        assert_eq!(
            classify_terminal(-5.0, 10.0, &cap(100.0, 0.03)).label,
            Light::Red
        );
        assert_eq!(
            classify_terminal(50.0, 10.0, &cap(100.0, 0.03)).label,
            Light::Yellow
        );
        let g = classify_terminal(120.0, 10.0, &cap(100.0, 0.03));
        assert_eq!(g.label, Light::Green);
        assert!((g.bound_upper - 134.39).abs() < 0.01);
        assert!(g.within_bound);
    }

    #[test]
    fn endowment_boundary_is_yellow() {
        assert_eq!(
            classify_terminal(100.0, 3.0, &cap(100.0, 0.03)).label,
            Light::Yellow
        );
        assert_eq!(
            classify_terminal(0.0, 3.0, &cap(100.0, 0.03)).label,
            Light::Yellow
        );
    }

    #[test]
    fn no_collapse_when_growth_covers_coupon() {
        let g = GeometricParams::new(10.0, 0.12, LockUp::Unbounded).unwrap();
        let c = CapitalParams::new(100.0, 3.0, 0.1, 0.02).unwrap();
        let ct = geometric_critical_times(&g, &c).unwrap();
        assert_eq!(ct.t_collapse, Timing::NoCollapse);
    }

    #[test]
    fn zero_rates_linear_collapse() {
        let g = GeometricParams::new(10.0, 0.0, LockUp::Unbounded).unwrap();
        let c = CapitalParams::new(100.0, 3.0, 0.1, 0.0).unwrap();
        let ct = geometric_critical_times(&g, &c).unwrap();
        assert_eq!(ct.t_collapse, Timing::At(130.0 / 3.0));
        assert_eq!(ct.precipice, Timing::Undefined);
    }

    #[test]
    fn unreachable_threshold() {
        let q = QuasiLogisticParams::new(10.0, 1000.0, 0.1, LockUp::Periods(30)).unwrap();
        let top = hump_maximum(&q);
        let err = termination_time(&q, top * 1.01, RootBranch::PostPeak, TimePrefactor::Log);
        assert!(matches!(err, Err(ModelError::UnreachableThreshold { .. })));
    }

    #[test]
    fn numeric_times_of_a_hump() {
        let k = [1.0, 3.0, 4.0, 2.0, -2.0];
        let ct = numeric_critical_times(&k);
        assert_eq!(ct.t_peak, Timing::At(2.0));
        assert_eq!(ct.t_collapse, Timing::At(3.5));
        assert_eq!(ct.precipice, Timing::At(1.5));
    }
}
