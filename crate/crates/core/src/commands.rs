//! Operations shared by the command-line tool and the HTTP service.
//!
//! Each function takes a validated scenario and returns a value whose
//! rendering is deterministic, so both front ends emit identical bytes.

use serde::{Deserialize, Serialize};

use crate::capital::{
    budget_recursion_oracle, geometric_capital_series, nssir_capital_peak_no_market,
    nssir_capital_series, ql_capital_peak_no_market, ql_capital_series, CapitalPath,
};
use crate::continuum::{
    continuous_inverse_time, continuous_peak_time, continuum_run, ContinuumRun,
};
use crate::criticality::{
    classify_terminal, geometric_critical_times, npg_scan, numeric_critical_times,
    termination_time, CriticalTimes, NpgSurface, RootBranch, ScanRequest, TimePrefactor,
};
use crate::demography::{
    geometric_path, nssir_infection_peak, nssir_path, quasi_logistic_path,
    quasi_logistic_population_peak, quasi_logistic_turning_point, sir_standard_path,
    PopulationPath,
};
use crate::error::{ModelError, Result};
use crate::export::SeriesExport;
use crate::numeric::first_negative;
use crate::recurrent::{chain_runs, ChainResult};
use crate::scenario::{ModelKind, ScenarioConfig};
use crate::timing::Timing;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub model: ModelKind,
    /// Whether the active count fell below N* within the horizon.
    pub terminated: bool,
    pub export: SeriesExport,
    pub csv: String,
}

fn discrete_paths(cfg: &ScenarioConfig) -> Result<(PopulationPath, CapitalPath)> {
    let h = cfg.horizon;
    let cap = &cfg.capital;
    let (pop, closed) = match cfg.model {
        ModelKind::Geometric => {
            let g = cfg.geometric()?;
            (
                geometric_path(&g, h)?,
                Some(geometric_capital_series(&g, cap, h)?),
            )
        }
        ModelKind::QuasiLogistic => {
            let q = cfg.quasi_logistic()?;
            (
                quasi_logistic_path(&q, h)?,
                Some(ql_capital_series(&q, cap, h)?),
            )
        }
        ModelKind::SirStandard => (sir_standard_path(&cfg.sir()?, h)?, None),
        ModelKind::Nssir => {
            let s = cfg.sir()?;
            (nssir_path(&s, h)?, Some(nssir_capital_series(&s, cap, h)?))
        }
        ModelKind::Continuum => {
            return Err(ModelError::Unsupported(
                "the continuum model is sampled by the continuum command".into(),
            ))
        }
    };
    let mut path = budget_recursion_oracle(&pop, cap)?;
    if let Some(k) = closed {
        path.capital = k;
    }
    path.terminate_at(&pop, cfg.n_star);
    Ok((pop, path))
}

/// Runs a discrete model to termination, collapse or the horizon.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulateOutput> {
    cfg.validate()?;
    let (pop, path) = discrete_paths(cfg)?;
    let stop = path.termination_index;
    let end = first_negative(&path.capital[..=stop]).unwrap_or(stop);
    let light = classify_terminal(path.capital[end], end as f64, &cfg.capital);
    let export = SeriesExport::build(&pop, &path, end, light);
    let csv = export.to_csv();
    Ok(SimulateOutput {
        model: cfg.model,
        terminated: path.terminated,
        export,
        csv,
    })
}

pub fn scan(req: &ScanRequest) -> Result<NpgSurface> {
    npg_scan(req)
}

pub fn chain(cfg: &ScenarioConfig) -> Result<ChainResult> {
    cfg.validate()?;
    let (specs, inherit) = cfg.chain_specs()?;
    chain_runs(&specs, inherit)
}

pub fn continuum(cfg: &ScenarioConfig) -> Result<ContinuumRun> {
    cfg.validate()?;
    let p = cfg.continuum_params()?;
    continuum_run(
        &p,
        cfg.continuum_options(),
        cfg.n_star,
        cfg.continuum_step(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<CriticalTimes>,
    /// From the simulated capital series over the scenario horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric: Option<CriticalTimes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population_peak: Option<Timing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turning_point: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capital_peak_no_market: Option<Timing>,
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(ModelError::Unsupported(_) | ModelError::UnreachableThreshold { .. }) => Ok(None),
        Err(ModelError::InvalidParameter(v)) if v.iter().all(|x| x.field == "lock_up") => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn critical(cfg: &ScenarioConfig) -> Result<CriticalReport> {
    cfg.validate()?;
    let mut report = CriticalReport {
        model: cfg.model,
        formula: None,
        numeric: None,
        population_peak: None,
        turning_point: None,
        termination_time: None,
        capital_peak_no_market: None,
    };
    if cfg.model != ModelKind::Continuum {
        let (_, path) = discrete_paths(cfg)?;
        report.numeric = Some(numeric_critical_times(&path.capital));
    }
    match cfg.model {
        ModelKind::Geometric => {
            report.formula = Some(geometric_critical_times(&cfg.geometric()?, &cfg.capital)?);
        }
        ModelKind::QuasiLogistic => {
            let q = cfg.quasi_logistic()?;
            report.population_peak = Some(quasi_logistic_population_peak(&q)?);
            report.turning_point = Some(quasi_logistic_turning_point(&q)?);
            report.termination_time = optional(termination_time(
                &q,
                cfg.n_star,
                RootBranch::PostPeak,
                TimePrefactor::Log,
            ))?;
            report.capital_peak_no_market = optional(ql_capital_peak_no_market(&q, &cfg.capital))?;
        }
        ModelKind::SirStandard => {}
        ModelKind::Nssir => {
            let s = cfg.sir()?;
            report.population_peak = Some(nssir_infection_peak(&s)?);
            report.capital_peak_no_market =
                optional(nssir_capital_peak_no_market(&s, &cfg.capital))?;
        }
        ModelKind::Continuum => {
            let p = cfg.continuum_params()?;
            report.population_peak =
                Some(continuous_peak_time(&p).map_or(Timing::NoPeak, Timing::At));
            report.termination_time = optional(continuous_inverse_time(
                &p,
                cfg.continuum_options(),
                cfg.n_star,
            ))?;
        }
    }
    Ok(report)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}
