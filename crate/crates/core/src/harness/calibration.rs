use serde::{Deserialize, Serialize};

use crate::bounds::{self, bound_report, BoundParams, BoundReport};
use crate::error::{Error, Result};

/// A scenario with its own operational sample size (`params.t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationScenario {
    pub name: String,
    #[serde(flatten)]
    pub params: BoundParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub scenario: CalibrationScenario,
    pub report: BoundReport,
}

/// Named preset families: `baseline`, `signal`, `noise` or `all`.
pub fn preset(name: &str) -> Result<Vec<CalibrationScenario>> {
    let wrap = |v: Vec<bounds::Scenario>| {
        v.into_iter()
            .map(|s| CalibrationScenario {
                name: s.name,
                params: s.params,
            })
            .collect::<Vec<_>>()
    };
    Ok(match name {
        "baseline" => wrap(bounds::baseline_scenarios()),
        "signal" => wrap(bounds::signal_scenarios()),
        "noise" => wrap(bounds::noise_scenarios()),
        "all" => {
            let mut v = wrap(bounds::baseline_scenarios());
            v.extend(wrap(bounds::signal_scenarios()));
            v.extend(wrap(bounds::noise_scenarios()));
            v
        }
        other => {
            return Err(Error::Config {
                key: "preset".into(),
                reason: format!("unknown preset `{other}` (baseline, signal, noise, all)"),
            })
        }
    })
}

pub fn run_calibration(scenarios: &[CalibrationScenario]) -> Result<Vec<CalibrationRow>> {
    if scenarios.is_empty() {
        return Err(Error::param("scenarios", "need at least one scenario"));
    }
    scenarios
        .iter()
        .map(|s| {
            Ok(CalibrationRow {
                scenario: s.clone(),
                report: bound_report(&s.params).map_err(|e| match e {
                    Error::Parameter { name, reason } => Error::Config {
                        key: format!("{}.{name}", s.name),
                        reason,
                    },
                    e => e,
                })?,
            })
        })
        .collect()
}


#[cfg(test)]
mod serde_tests {
    use super::*;

    #[test]
    fn scenario_json_roundtrip() {
        let s: CalibrationScenario = serde_json::from_value(serde_json::json!({
            "name": "x", "B2": 5e-5, "sigma2": 2.2e-3, "T": 12, "P": 12000, "c_z": 1, "C_z": 1.1
        }))
        .unwrap();
        assert_eq!(s.params, BoundParams::baseline(12_000.0));
        let back: CalibrationScenario = serde_json::from_value(serde_json::to_value(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::from_value::<CalibrationScenario>(serde_json::json!({
            "name": "x", "B2": 5e-5, "sigma2": 2.2e-3, "T": 12, "P": 12000, "c_z": 1, "C_z": 1.1, "extra": 1
        }));
        assert!(bad.is_err());
    }
}
