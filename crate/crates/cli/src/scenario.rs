//! Scenario files: versioned JSON describing an environment, its welfare,
//! an optional cost sweep and the analyses to run.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use robustinfo::{Environment, StateParams, WelfareSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Design,
    Check,
    Lp,
    Baselines,
    PublicCounterfactual,
    Sweep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("mode serializes");
        f.write_str(s.as_str().expect("mode is a string"))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: u32,
    name: String,
    n_agents: usize,
    states: Value,
    cost: f64,
    beta: f64,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    modes: Option<Vec<Mode>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRow {
    pub label: String,
    pub prob: f64,
    pub b: f64,
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridWrapper {
    grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    count: usize,
    theta_start: f64,
    theta_step: f64,
    b: [f64; 2],
    lambda: [f64; 2],
    alpha: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// Validated scenario with grids expanded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n_agents: usize,
    pub states: Vec<StateRow>,
    pub cost: f64,
    pub beta: f64,
    pub sweep: Option<SweepSpec>,
    pub modes: BTreeSet<Mode>,
}

const ALL_MODES: [Mode; 6] = [
    Mode::Design,
    Mode::Check,
    Mode::Lp,
    Mode::Baselines,
    Mode::PublicCounterfactual,
    Mode::Sweep,
];

const CASE1: &str = r#"{
  "schema": 1,
  "name": "case1",
  "n_agents": 3,
  "states": [
    {"label": "L", "prob": 0.5, "b": 1.0, "lambda": 0.1, "alpha": 6.0},
    {"label": "H", "prob": 0.5, "b": 2.4, "lambda": 0.5, "alpha": 12.0}
  ],
  "cost": 2.0,
  "beta": 1.5,
  "modes": ["design", "check", "lp", "baselines", "public-counterfactual"]
}
"#;

const CASE2: &str = r#"{
  "schema": 1,
  "name": "case2",
  "n_agents": 10,
  "states": {"grid": {"count": 100, "theta_start": 0.01, "theta_step": 0.01,
                      "b": [0.5, 2.0], "lambda": [0.1, 0.8], "alpha": [6.0, 12.0]}},
  "cost": 2.0,
  "beta": 1.5,
  "sweep": {"start": 1.0, "stop": 3.2, "step": 0.05},
  "modes": ["design", "check", "baselines", "public-counterfactual", "sweep"]
}
"#;

/// Source text of a built-in preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    match name {
        "case1" => Some(CASE1),
        "case2" => Some(CASE2),
        _ => None,
    }
}

/// Loads a preset by name, otherwise reads `spec` as a file path.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig, CliError> {
    if let Some(src) = preset_source(spec) {
        return parse_scenario(src);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_with_path<'de, T: Deserialize<'de>>(de: impl serde::Deserializer<'de>, context: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let field = if at == "." { context.to_owned() } else { format!("{context}{at}") };
        CliError::Input(format!("field `{field}`: {}", e.inner()))
    })
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawScenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        // the inner message already carries line and column
        match e.path().to_string().as_str() {
            "." => CliError::Input(e.inner().to_string()),
            at => CliError::Input(format!("field `{at}`: {}", e.inner())),
        }
    })?;
    de.end().map_err(|e| CliError::Input(e.to_string()))?;

    if raw.schema != SCHEMA_VERSION {
        return Err(CliError::Input(format!(
            "field `schema`: unsupported version {}, expected {SCHEMA_VERSION}",
            raw.schema
        )));
    }
    let states = match &raw.states {
        Value::Array(_) => parse_with_path::<Vec<StateRow>>(raw.states.clone(), "states")?,
        Value::Object(_) => {
            let wrapper: GridWrapper = parse_with_path(raw.states.clone(), "states")?;
            expand_grid(&wrapper.grid)?
        }
        _ => {
            return Err(CliError::Input(
                "field `states`: expected a list of states or {\"grid\": {...}}".into(),
            ))
        }
    };
    if let Some(s) = &raw.sweep {
        if !(s.step > 0.0) {
            return Err(CliError::Input("field `sweep.step`: must be positive".into()));
        }
        if !(s.stop >= s.start) {
            return Err(CliError::Input("field `sweep.stop`: must not be below `sweep.start`".into()));
        }
    }
    let modes = raw.modes.map_or_else(|| ALL_MODES.into_iter().collect(), |m| m.into_iter().collect());
    let config = ScenarioConfig {
        name: raw.name,
        n_agents: raw.n_agents,
        states,
        cost: raw.cost,
        beta: raw.beta,
        sweep: raw.sweep,
        modes,
    };
    // surface environment and welfare invariant violations at load time
    config.environment(config.cost)?;
    config.welfare()?;
    Ok(config)
}

/// Decimal places needed to print `x` exactly as written.
fn decimals(x: f64) -> usize {
    let s = format!("{x}");
    s.split_once('.').map_or(0, |(_, frac)| frac.len())
}

/// Grid points `start + k·step` computed in scaled integers so labels and
/// values are the decimal numbers the user wrote.
pub fn decimal_grid(start: f64, step: f64, count: usize) -> Result<Vec<(String, f64)>, CliError> {
    let d = decimals(start).max(decimals(step));
    if d > 12 {
        return Err(CliError::Input(format!("grid step {step} has more than 12 decimals")));
    }
    let scale = 10f64.powi(d as i32);
    let start_i = (start * scale).round() as i64;
    let step_i = (step * scale).round() as i64;
    let pow = 10i64.pow(d as u32);
    Ok((0..count as i64)
        .map(|k| {
            let v = start_i + k * step_i;
            let label = if d == 0 {
                v.to_string()
            } else {
                let sign = if v < 0 { "-" } else { "" };
                format!("{sign}{}.{:0d$}", v.abs() / pow, v.abs() % pow)
            };
            (label, v as f64 / scale)
        })
        .collect())
}

fn expand_grid(g: &GridSpec) -> Result<Vec<StateRow>, CliError> {
    if g.count == 0 {
        return Err(CliError::Input("field `states.grid.count`: must be at least 1".into()));
    }
    if !(g.theta_step > 0.0) {
        return Err(CliError::Input("field `states.grid.theta_step`: must be positive".into()));
    }
    let ramp = |r: [f64; 2], theta: f64| r[0] + (r[1] - r[0]) * theta;
    let prob = 1.0 / g.count as f64;
    Ok(decimal_grid(g.theta_start, g.theta_step, g.count)?
        .into_iter()
        .map(|(label, theta)| StateRow {
            label,
            prob,
            b: ramp(g.b, theta),
            lambda: ramp(g.lambda, theta),
            alpha: ramp(g.alpha, theta),
        })
        .collect())
}

impl ScenarioConfig {
    pub fn environment(&self, cost: f64) -> Result<Environment, CliError> {
        let states = self
            .states
            .iter()
            .map(|s| StateParams::new(s.label.clone(), s.prob, s.b, s.lambda))
            .collect();
        Environment::new(self.n_agents, states, cost).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn welfare(&self) -> Result<WelfareSpec, CliError> {
        let alpha = self.states.iter().map(|s| s.alpha).collect();
        WelfareSpec::power(self.n_agents, alpha, self.beta).map_err(|e| CliError::Input(e.to_string()))
    }

    /// Sweep costs, decimal-exact; empty without a sweep.
    pub fn sweep_costs(&self) -> Result<Vec<f64>, CliError> {
        let Some(s) = self.sweep else {
            return Ok(Vec::new());
        };
        let count = ((s.stop - s.start) / s.step + 1e-9).floor() as usize + 1;
        Ok(decimal_grid(s.start, s.step, count)?.into_iter().map(|(_, c)| c).collect())
    }

    pub fn has(&self, mode: Mode) -> bool {
        self.modes.contains(&mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case1_preset() {
        let c = load_scenario("case1").unwrap();
        assert_eq!(c.n_agents, 3);
        assert_eq!(c.states.len(), 2);
        assert_eq!((c.states[1].b, c.states[1].lambda, c.states[1].alpha), (2.4, 0.5, 12.0));
        assert_eq!(c.environment(c.cost).unwrap(), robustinfo::fixtures::case1_env());
        assert_eq!(c.welfare().unwrap(), robustinfo::fixtures::case1_welfare());
    }

    #[test]
    fn case2_preset_matches_ramps() {
        let c = load_scenario("case2").unwrap();
        assert_eq!(c.states.len(), 100);
        assert_eq!(c.states[0].label, "0.01");
        assert_eq!(c.states[99].label, "1.00");
        assert_eq!(c.states[55].label, "0.56");
        let env = c.environment(2.0).unwrap();
        let fixture = robustinfo::fixtures::case2_env(2.0);
        for s in 0..100 {
            assert!((env.benefit()[s] - fixture.benefit()[s]).abs() <= 1e-12);
            assert!((env.complementarity()[s] - fixture.complementarity()[s]).abs() <= 1e-12);
        }
        let costs = c.sweep_costs().unwrap();
        assert_eq!(costs.len(), 45);
        assert_eq!(costs[0], 1.0);
        assert_eq!(costs[3], 1.15);
        assert_eq!(*costs.last().unwrap(), 3.2);
        assert!(!c.has(Mode::Lp));
    }

    #[test]
    fn grid_labels_are_decimal_exact() {
        let g = decimal_grid(0.1, 0.05, 4).unwrap();
        let labels: Vec<_> = g.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["0.10", "0.15", "0.20", "0.25"]);
        assert_eq!(g[2].1, 0.2);
        assert_eq!(decimal_grid(-1.0, 0.5, 3).unwrap()[0].0, "-1.0");
        assert_eq!(decimal_grid(2.0, 1.0, 2).unwrap()[1].0, "3");
    }

    #[test]
    fn rejects_bad_prior_naming_it() {
        let text = CASE1.replace("\"prob\": 0.5, \"b\": 2.4", "\"prob\": 0.4, \"b\": 2.4");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("prior"), "{err}");
    }

    #[test]
    fn rejects_unknown_fields_with_path() {
        let text = CASE1.replace("\"lambda\": 0.1,", "\"lambda\": 0.1, \"gamma\": 1,");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("states[0]") && err.contains("gamma"), "{err}");

        let err = parse_scenario(&CASE1.replace("\"beta\"", "\"betta\"")).unwrap_err().to_string();
        assert!(err.contains("betta"), "{err}");
    }

    #[test]
    fn rejects_bad_versions_and_sweeps() {
        assert!(parse_scenario(&CASE1.replace("\"schema\": 1", "\"schema\": 2")).is_err());
        let bad = CASE2.replace("\"step\": 0.05", "\"step\": 0.0");
        assert!(parse_scenario(&bad).unwrap_err().to_string().contains("sweep.step"));
        let err = parse_scenario("{\"schema\": 1,").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn empty_modes_are_allowed() {
        let c = parse_scenario(&CASE1.replace(
            "[\"design\", \"check\", \"lp\", \"baselines\", \"public-counterfactual\"]",
            "[]",
        ))
        .unwrap();
        assert!(c.modes.is_empty());
    }
}
