//! CSV renderings with fixed column order and 12 significant digits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::capital::CapitalPath;
use crate::continuum::ContinuumRun;
use crate::criticality::{Light, NpgSurface, TrafficLight};
use crate::demography::PopulationPath;
use crate::recurrent::ChainResult;

pub const SERIES_HEADER: &str =
    "t,N_t,dN_in,dN_out,K_t,agg_interest,agg_deposits,agg_coupons,agg_withdrawals,traffic_label";

/// Formats like C's `%.12g`.
pub fn g12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..DIGITS).contains(&exp) {
        let fixed = format!("{:.*}", (DIGITS - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_owned()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: usize,
    pub active: f64,
    pub entering: f64,
    pub exiting: f64,
    pub capital: f64,
    pub agg_interest: f64,
    pub agg_deposits: f64,
    pub agg_coupons: f64,
    pub agg_withdrawals: f64,
    pub label: Option<Light>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesExport {
    pub rows: Vec<SeriesRow>,
    pub termination_index: usize,
    pub light: TrafficLight,
}

impl SeriesExport {
    /// Rows `0..=end`; the label goes on the last one.
    pub fn build(
        pop: &PopulationPath,
        path: &CapitalPath,
        end: usize,
        light: TrafficLight,
    ) -> Self {
        let rows = (0..=end)
            .map(|t| SeriesRow {
                t,
                active: pop.active[t],
                entering: pop.entering[t],
                exiting: pop.exiting[t],
                capital: path.capital[t],
                agg_interest: path.agg_interest[t],
                agg_deposits: path.agg_deposits[t],
                agg_coupons: path.agg_coupons[t],
                agg_withdrawals: path.agg_withdrawals[t],
                label: (t == end).then_some(light.label),
            })
            .collect();
        SeriesExport {
            rows,
            termination_index: end,
            light,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(SERIES_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t,
                g12(r.active),
                g12(r.entering),
                g12(r.exiting),
                g12(r.capital),
                g12(r.agg_interest),
                g12(r.agg_deposits),
                g12(r.agg_coupons),
                g12(r.agg_withdrawals),
                r.label.map_or("", Light::as_str)
            );
        }
        out
    }
}

pub fn surface_csv(s: &NpgSurface) -> String {
    let mut out =
        String::from("market_rate,lock_up,viable,t_star,k_end,min_capital,traffic_label\n");
    let opt = |x: Option<f64>| x.map(g12).unwrap_or_default();
    for row in &s.cells {
        for c in row {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                g12(c.market_rate),
                c.lock_up,
                c.viable,
                opt(c.t_star),
                opt(c.k_end),
                opt(c.min_capital),
                c.label.map_or("", Light::as_str)
            );
        }
    }
    out
}

/// Global capital trajectory of a chain.
pub fn chain_csv(c: &ChainResult) -> String {
    let mut out = String::from("run,t_global,K_t,traffic_label\n");
    let points = &c.global_capital;
    for (k, p) in points.iter().enumerate() {
        let last = points.get(k + 1).is_none_or(|q| q.run != p.run);
        let label = if last {
            c.runs[p.run].light.label.as_str()
        } else {
            ""
        };
        let _ = writeln!(out, "{},{},{},{}", p.run, g12(p.t), g12(p.capital), label);
    }
    out
}

pub fn continuum_csv(run: &ContinuumRun) -> String {
    let mut out = String::from("t,N_t,K_t,traffic_label\n");
    let n = run.samples.len();
    for (k, s) in run.samples.iter().enumerate() {
        let label = if k + 1 == n {
            run.light.label.as_str()
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            g12(s.t),
            g12(s.active),
            g12(s.capital),
            label
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::g12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(12.1), "12.1");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(-2.5e-7), "-2.5e-07");
        assert_eq!(g12(1.5e15), "1.5e+15");
        assert_eq!(g12(123456789012.4), "123456789012");
        assert_eq!(g12(999999999999.9), "1e+12");
        assert_eq!(g12(0.0001), "0.0001");
    }
}
