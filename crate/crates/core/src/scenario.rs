//! Scenario files: a versioned TOML document naming a model and its parameters.
//!
//! ```toml
//! schema_version = 1
//! model = "quasi_logistic"
//!
//! [demography]
//! n0 = 10.0
//! pool = 1000.0
//! growth = 0.1
//! lock_up = 6
//!
//! [capital]
//! promoter_endowment = 100.0
//! deposit = 3.0
//! coupon_rate = 0.052
//! market_rate = 0.03
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capital::{CapitalParams, DEFAULT_N_STAR};
use crate::continuum::{CapitalForm, ContinuumOptions, ContinuumParams, FlowPrefactor};
use crate::criticality::ScanRequest;
use crate::demography::{GeometricParams, LockUp, QuasiLogisticParams, SirParams};
use crate::error::{Checks, ModelError, Result, Violation};
use crate::recurrent::{RunDraft, RunSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Geometric,
    QuasiLogistic,
    SirStandard,
    Nssir,
    Continuum,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Geometric => "geometric",
            ModelKind::QuasiLogistic => "quasi_logistic",
            ModelKind::SirStandard => "sir_standard",
            ModelKind::Nssir => "nssir",
            ModelKind::Continuum => "continuum",
        }
    }
}

/// Union of all demographic fields; which ones are required depends on the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographyBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_up: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_delay: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub market_rates: Vec<f64>,
    pub lock_ups: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainBlock {
    #[serde(default = "yes")]
    pub inherit: bool,
    /// Overrides per run, each relative to the run before it.
    #[serde(default)]
    pub runs: Vec<RunDraft>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumBlock {
    /// Real-valued lock-up; defaults to `demography.lock_up`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_up: Option<f64>,
    #[serde(default)]
    pub prefactor: FlowPrefactor,
    #[serde(default)]
    pub form: CapitalForm,
    #[serde(default = "default_step")]
    pub step: f64,
}

impl Default for ContinuumBlock {
    fn default() -> Self {
        ContinuumBlock {
            lock_up: None,
            prefactor: FlowPrefactor::default(),
            form: CapitalForm::default(),
            step: default_step(),
        }
    }
}

fn default_step() -> f64 {
    0.5
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_n_star() -> f64 {
    DEFAULT_N_STAR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub model: ModelKind,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_n_star")]
    pub n_star: f64,
    pub demography: DemographyBlock,
    pub capital: CapitalParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuum: Option<ContinuumBlock>,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        ModelError::Parse(m) => ModelError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string().trim_end().to_owned()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn need(c: &mut Vec<Violation>, v: Option<f64>, field: &str) -> f64 {
    v.unwrap_or_else(|| {
        c.push(Violation::new(
            format!("demography.{field}"),
            "required for this model",
        ));
        f64::NAN
    })
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks every block and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut all = Vec::new();
        let mut top = Checks::default();
        top.require(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            "unsupported schema version",
        );
        top.require(self.horizon >= 1, "horizon", "must be at least 1");
        top.require(
            self.n_star > 0.0 && self.n_star.is_finite(),
            "n_star",
            "must be positive",
        );
        if let Err(e) = top.finish() {
            all.extend(e.violations().iter().cloned());
        }
        all.extend(self.capital.checks().prefixed("capital"));
        let demography = match self.model {
            ModelKind::Geometric => self.geometric().map(|_| ()),
            ModelKind::QuasiLogistic => self.quasi_logistic().map(|_| ()),
            ModelKind::SirStandard | ModelKind::Nssir => self.sir().map(|_| ()),
            ModelKind::Continuum => self.continuum_params().map(|_| ()),
        };
        if let Err(e) = demography {
            all.extend(e.violations().iter().cloned());
        }
        if let Some(scan) = &self.scan {
            if let Err(e) = self.scan_request_with(scan) {
                all.extend(
                    e.violations()
                        .iter()
                        .filter(|v| v.field.starts_with("scan."))
                        .cloned(),
                );
            }
        }
        if let Some(c) = &self.continuum {
            if !(c.step > 0.0 && c.step.is_finite()) {
                all.push(Violation::new("continuum.step", "must be positive"));
            }
        }
        let mut seen = std::collections::HashSet::new();
        all.retain(|v| seen.insert((v.field.clone(), v.message.clone())));
        if all.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter(all))
        }
    }

    fn lock_up(&self) -> LockUp {
        self.demography.lock_up.into()
    }

    pub fn geometric(&self) -> Result<GeometricParams> {
        let mut missing = Vec::new();
        let d = &self.demography;
        let p = GeometricParams {
            n0: need(&mut missing, d.n0, "n0"),
            growth: need(&mut missing, d.growth, "growth"),
            lock_up: self.lock_up(),
        };
        finish(missing, p.checks(), p)
    }

    pub fn quasi_logistic(&self) -> Result<QuasiLogisticParams> {
        let mut missing = Vec::new();
        let d = &self.demography;
        let p = QuasiLogisticParams {
            n0: need(&mut missing, d.n0, "n0"),
            pool: need(&mut missing, d.pool, "pool"),
            growth: need(&mut missing, d.growth, "growth"),
            lock_up: self.lock_up(),
        };
        finish(missing, p.checks(), p)
    }

    pub fn sir(&self) -> Result<SirParams> {
        let mut missing = Vec::new();
        let d = &self.demography;
        let p = SirParams {
            s0: need(&mut missing, d.s0, "s0"),
            i0: need(&mut missing, d.i0, "i0"),
            r0: d.r0.unwrap_or(0.0),
            beta: need(&mut missing, d.beta, "beta"),
            gamma: need(&mut missing, d.gamma, "gamma"),
            recovery_delay: d.recovery_delay.unwrap_or(0),
        };
        let checks = if self.model == ModelKind::Nssir {
            p.nonstandard_checks()
        } else {
            p.checks()
        };
        finish(missing, checks, p)
    }

    pub fn continuum_options(&self) -> ContinuumOptions {
        let block = self.continuum.clone().unwrap_or_default();
        ContinuumOptions {
            prefactor: block.prefactor,
            form: block.form,
        }
    }

    pub fn continuum_step(&self) -> f64 {
        self.continuum.as_ref().map_or(default_step(), |c| c.step)
    }

    pub fn continuum_params(&self) -> Result<ContinuumParams> {
        let q = self.quasi_logistic()?;
        let mut p = ContinuumParams::from_discrete(&q, &self.capital);
        if let Some(lock) = self.continuum.as_ref().and_then(|c| c.lock_up) {
            p.lock_up = Some(lock);
        }
        let capital_fields = [
            "deposit",
            "coupon_rate",
            "market_rate",
            "promoter_endowment",
        ];
        let v: Vec<Violation> = p
            .checks()
            .prefixed("demography")
            .into_iter()
            .map(|x| {
                let name = x.field.trim_start_matches("demography.");
                if capital_fields.contains(&name) {
                    Violation::new(format!("capital.{name}"), x.message)
                } else {
                    x
                }
            })
            .collect();
        if v.is_empty() {
            Ok(p)
        } else {
            Err(ModelError::InvalidParameter(v))
        }
    }

    /// Scan request from the `[scan]` block and the base parameters.
    pub fn scan_request(&self) -> Result<ScanRequest> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| ModelError::invalid("scan", "a [scan] block is required"))?;
        self.scan_request_with(scan)
    }

    fn scan_request_with(&self, scan: &ScanBlock) -> Result<ScanRequest> {
        let d = &self.demography;
        let req = ScanRequest {
            n0: d.n0.unwrap_or(f64::NAN),
            pool: d.pool.unwrap_or(f64::NAN),
            growth: d.growth.unwrap_or(f64::NAN),
            promoter_endowment: self.capital.promoter_endowment,
            deposit: self.capital.deposit,
            coupon_rate: self.capital.coupon_rate,
            market_rates: scan.market_rates.clone(),
            lock_ups: scan.lock_ups.clone(),
            n_star: self.n_star,
        };
        req.validate()?;
        Ok(req)
    }

    /// Base run of a chain, built from the scenario's own parameters.
    pub fn base_run(&self) -> Result<RunSpec> {
        let spec = RunSpec {
            demography: self.quasi_logistic()?,
            capital: self.capital,
            n_star: self.n_star,
            label: String::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fully resolved chain runs; the first override applies to the base run.
    pub fn chain_specs(&self) -> Result<(Vec<RunSpec>, bool)> {
        let block = self
            .chain
            .as_ref()
            .ok_or_else(|| ModelError::invalid("chain", "a [chain] block is required"))?;
        let base = self.base_run()?;
        if block.runs.is_empty() {
            return Ok((vec![base], block.inherit));
        }
        let mut specs: Vec<RunSpec> = Vec::with_capacity(block.runs.len());
        for (k, draft) in block.runs.iter().enumerate() {
            let prev = specs.last().unwrap_or(&base);
            let spec = draft.resolve(Some(prev)).map_err(|e| match e {
                ModelError::InvalidParameter(v) => ModelError::InvalidParameter(
                    v.into_iter()
                        .map(|x| Violation::new(format!("chain.runs[{k}].{}", x.field), x.message))
                        .collect(),
                ),
                other => other,
            })?;
            specs.push(spec);
        }
        Ok((specs, block.inherit))
    }
}

fn finish<T>(mut missing: Vec<Violation>, checks: Checks, value: T) -> Result<T> {
    if missing.is_empty() {
        missing.extend(checks.prefixed("demography"));
    }
    if missing.is_empty() {
        Ok(value)
    } else {
        Err(ModelError::InvalidParameter(missing))
    }
}
