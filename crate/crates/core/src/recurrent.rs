//! Chains of successive runs, each seeded with the previous run's terminal capital.

use serde::{Deserialize, Serialize};

use crate::capital::{
    budget_recursion_oracle, ql_capital_series, CapitalParams, CapitalPath, DEFAULT_N_STAR,
};
use crate::criticality::{
    classify_terminal, termination_time, Light, RootBranch, TimePrefactor, TrafficLight,
};
use crate::demography::{quasi_logistic_path, LockUp, QuasiLogisticParams};
use crate::error::{Checks, ModelError, Result, Violation};
use crate::numeric::{first_negative, interpolate_crossing, sample_linear};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub demography: QuasiLogisticParams,
    pub capital: CapitalParams,
    #[serde(default = "default_n_star")]
    pub n_star: f64,
    #[serde(default)]
    pub label: String,
}

fn default_n_star() -> f64 {
    DEFAULT_N_STAR
}

/// A run with any subset of parameters; missing ones come from the previous run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDraft {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_up: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub promoter_endowment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupon_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl From<&RunSpec> for RunDraft {
    fn from(s: &RunSpec) -> Self {
        RunDraft {
            n0: Some(s.demography.n0),
            pool: Some(s.demography.pool),
            growth: Some(s.demography.growth),
            lock_up: s.demography.lock_up.into(),
            promoter_endowment: Some(s.capital.promoter_endowment),
            deposit: Some(s.capital.deposit),
            coupon_rate: Some(s.capital.coupon_rate),
            market_rate: Some(s.capital.market_rate),
            n_star: Some(s.n_star),
            label: Some(s.label.clone()),
        }
    }
}

impl RunDraft {
    /// Fills gaps from `prev`; a first run must be complete.
    pub fn resolve(&self, prev: Option<&RunSpec>) -> Result<RunSpec> {
        let mut missing = Vec::new();
        let mut pick = |own: Option<f64>, from: Option<f64>, field: &str| {
            own.or(from).unwrap_or_else(|| {
                missing.push(Violation::new(field, "required for the first run"));
                f64::NAN
            })
        };
        let d = prev.map(|p| p.demography);
        let c = prev.map(|p| p.capital);
        let n0 = pick(self.n0, d.map(|d| d.n0), "n0");
        let pool = pick(self.pool, d.map(|d| d.pool), "pool");
        let growth = pick(self.growth, d.map(|d| d.growth), "growth");
        let promoter_endowment = pick(
            self.promoter_endowment,
            c.map(|c| c.promoter_endowment),
            "promoter_endowment",
        );
        let deposit = pick(self.deposit, c.map(|c| c.deposit), "deposit");
        let coupon_rate = pick(self.coupon_rate, c.map(|c| c.coupon_rate), "coupon_rate");
        let market_rate = pick(self.market_rate, c.map(|c| c.market_rate), "market_rate");
        let lock_up = match (self.lock_up, d) {
            (Some(t), _) => LockUp::Periods(t),
            (None, Some(d)) => d.lock_up,
            (None, None) => {
                missing.push(Violation::new("lock_up", "required for the first run"));
                LockUp::Unbounded
            }
        };
        if !missing.is_empty() {
            return Err(ModelError::InvalidParameter(missing));
        }
        let spec = RunSpec {
            demography: QuasiLogisticParams {
                n0,
                pool,
                growth,
                lock_up,
            },
            capital: CapitalParams {
                promoter_endowment,
                deposit,
                coupon_rate,
                market_rate,
            },
            n_star: self
                .n_star
                .or(prev.map(|p| p.n_star))
                .unwrap_or(DEFAULT_N_STAR),
            label: self.label.clone().unwrap_or_default(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        let mut all = self.demography.checks().prefixed("demography");
        all.extend(self.capital.checks().prefixed("capital"));
        let mut c = Checks::default();
        c.require(
            !self.demography.lock_up.is_unbounded(),
            "lock_up",
            "a chained run needs a finite lock-up",
        );
        c.require(
            self.n_star > 0.0 && self.n_star.is_finite(),
            "n_star",
            "must be positive",
        );
        all.extend(c.prefixed("run"));
        if all.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter(all))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub path: CapitalPath,
    pub light: TrafficLight,
    pub t_star: f64,
    /// Start of this run on the global time axis.
    pub offset: f64,
    /// Interpolated zero crossing for a Red run.
    pub collapse_time: Option<f64>,
}

impl RunRecord {
    /// Local duration: t* for a completed run, the collapse time otherwise.
    pub fn duration(&self) -> f64 {
        self.collapse_time.unwrap_or(self.t_star)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalPoint {
    pub t: f64,
    pub run: usize,
    pub capital: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub runs: Vec<RunRecord>,
    pub global_time_offsets: Vec<f64>,
    pub global_capital: Vec<GlobalPoint>,
    pub halted: bool,
}

/// Simulates one run to its termination time.
pub fn simulate_run(spec: &RunSpec, offset: f64) -> Result<RunRecord> {
    spec.validate()?;
    let q = &spec.demography;
    let t_star = termination_time(q, spec.n_star, RootBranch::PostPeak, TimePrefactor::Log)?;
    let horizon = t_star.ceil() as usize + 1;
    let pop = quasi_logistic_path(q, horizon)?;
    let mut path = budget_recursion_oracle(&pop, &spec.capital)?;
    path.capital = ql_capital_series(q, &spec.capital, horizon)?;
    let last = t_star.ceil() as usize;
    let (light, collapse_time) = match first_negative(&path.capital[..=last]) {
        Some(k) => {
            path.termination_index = k;
            path.terminated = true;
            let crossing = interpolate_crossing(&path.capital, k);
            (
                classify_terminal(path.capital[k], k as f64, &spec.capital),
                Some(crossing),
            )
        }
        None => {
            path.termination_index = last;
            path.terminated = true;
            let k_end = sample_linear(&path.capital, t_star);
            (classify_terminal(k_end, t_star, &spec.capital), None)
        }
    };
    Ok(RunRecord {
        spec: spec.clone(),
        path,
        light,
        t_star,
        offset,
        collapse_time,
    })
}

/// Incrementally built chain, used for interactive stepping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub inherit: bool,
    pub runs: Vec<RunRecord>,
}

impl Chain {
    pub fn new(inherit: bool) -> Self {
        Chain {
            inherit,
            runs: Vec::new(),
        }
    }

    pub fn is_halted(&self) -> bool {
        self.runs
            .last()
            .is_some_and(|r| r.light.label == Light::Red)
    }

    /// Endowment the next run would inherit.
    pub fn next_endowment(&self) -> Option<f64> {
        match self.runs.last() {
            Some(r) if self.inherit && r.light.label != Light::Red => Some(r.light.k_end),
            _ => None,
        }
    }

    fn next_offset(&self) -> f64 {
        self.runs.last().map_or(0.0, |r| r.offset + r.duration())
    }

    /// Resolves `draft` against the previous run and simulates it.
    ///
    /// With inheritance on, the endowment of every run after the first is
    /// the previous terminal capital whatever the draft says.
    pub fn step(&mut self, draft: &RunDraft) -> Result<&RunRecord> {
        if self.is_halted() {
            return Err(ModelError::InvalidArgument(
                "chain halted after a collapse".into(),
            ));
        }
        let mut spec = draft.resolve(self.runs.last().map(|r| &r.spec))?;
        if let Some(k) = self.next_endowment() {
            spec.capital.promoter_endowment = k;
        }
        let record = simulate_run(&spec, self.next_offset())?;
        self.runs.push(record);
        Ok(self.runs.last().unwrap())
    }

    pub fn result(&self) -> ChainResult {
        let mut global = Vec::new();
        for (j, run) in self.runs.iter().enumerate() {
            let end = run.path.termination_index;
            let stop = run.duration();
            for (t, k) in run.path.capital[..=end].iter().enumerate() {
                if (t as f64) < stop || run.collapse_time.is_some() {
                    global.push(GlobalPoint {
                        t: run.offset + t as f64,
                        run: j,
                        capital: *k,
                    });
                }
            }
            if run.collapse_time.is_none() {
                global.push(GlobalPoint {
                    t: run.offset + run.t_star,
                    run: j,
                    capital: run.light.k_end,
                });
            }
        }
        ChainResult {
            runs: self.runs.clone(),
            global_time_offsets: self.runs.iter().map(|r| r.offset).collect(),
            global_capital: global,
            halted: self.is_halted(),
        }
    }
}

/// Runs `specs` in order; a Red run ends the chain early.
pub fn chain_runs(specs: &[RunSpec], inherit: bool) -> Result<ChainResult> {
    if specs.is_empty() {
        return Err(ModelError::invalid("runs", "at least one run is required"));
    }
    let mut chain = Chain::new(inherit);
    for spec in specs {
        if chain.is_halted() {
            break;
        }
        chain.step(&RunDraft::from(spec))?;
    }
    Ok(chain.result())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lock: u32, endowment: f64) -> RunSpec {
        RunSpec {
            demography: QuasiLogisticParams::new(10.0, 1000.0, 0.1, LockUp::Periods(lock)).unwrap(),
            capital: CapitalParams::new(endowment, 3.0, 0.052, 0.03).unwrap(),
            n_star: DEFAULT_N_STAR,
            label: String::new(),
        }
    }

    #[test]
    fn endowment_is_inherited_exactly() {
        let r = chain_runs(&[spec(5, 100.0), spec(5, 1.0)], true).unwrap();
        assert_eq!(
            r.runs[1].spec.capital.promoter_endowment,
            r.runs[0].light.k_end
        );
        assert!(r.global_time_offsets[1] > r.global_time_offsets[0]);
    }

    #[test]
    fn red_run_halts() {
        let r = chain_runs(&[spec(7, 100.0), spec(5, 100.0)], true).unwrap();
        assert_eq!(r.runs.len(), 1);
        assert!(r.halted);
    }

    #[test]
    fn first_draft_must_be_complete() {
        let err = RunDraft::default().resolve(None).unwrap_err();
        assert!(err.violations().iter().any(|v| v.field == "pool"));
    }
}
