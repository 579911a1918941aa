//! Scenario configuration: a TOML document naming a catalog entry, the kind
//! of run, and the entry's parameters.
//!
//! Validation is whole-document: every problem found is reported, with the
//! offending field named (and, for syntax errors, the line and column from
//! the TOML parser). A validated scenario has all defaults filled in, so
//! dumping it and validating the dump reproduces the scenario exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::catalog::{self, ParamKind};

/// What a scenario runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Solve,
    Impulsive,
    Timescale,
    Horizon,
    Sap,
    Dependence,
    Certificate,
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solve" => Self::Solve,
            "impulsive" => Self::Impulsive,
            "timescale" => Self::Timescale,
            "horizon" => Self::Horizon,
            "sap" => Self::Sap,
            "dependence" => Self::Dependence,
            "certificate" => Self::Certificate,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Impulsive => "impulsive",
            Self::Timescale => "timescale",
            Self::Horizon => "horizon",
            Self::Sap => "sap",
            Self::Dependence => "dependence",
            Self::Certificate => "certificate",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parameter value from the `[params]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    FloatList(Vec<f64>),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Float(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(v) if *v >= 0 => Some(*v as usize),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[f64]> {
        match self {
            ParamValue::FloatList(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(v) => Some(v),
            _ => None,
        }
    }
}

/// Grid options shared by every kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Maximum cell width of the solve grid.
    pub step: Option<f64>,
}

/// Solver tolerance overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TolOptions {
    /// Pointwise fixed-point tolerance.
    pub point: Option<f64>,
    /// Whole-path residual tolerance.
    pub sweep: Option<f64>,
}

/// A fully validated scenario. All catalog defaults are filled into
/// `params`, so the struct serializes to a complete, reproducible document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub catalog: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridOptions,
    #[serde(default)]
    pub tolerances: TolOptions,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

/// One validation problem, naming the field it concerns.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn err(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

fn toml_float(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(x) => Some(*x as f64),
        _ => None,
    }
}

/// Parses and validates a configuration document. On success the returned
/// scenario has every catalog default filled in; on failure every detected
/// problem is returned (the TOML syntax error, when there is one, carries
/// the parser's line and column).
pub fn validate_config(text: &str) -> Result<Scenario, Vec<ConfigError>> {
    let table: toml::Table = toml::from_str(text)
        .map_err(|e| vec![err("document", e.to_string().replace('\n', " "))])?;

    let mut errors = Vec::new();

    for key in table.keys() {
        if !matches!(
            key.as_str(),
            "kind" | "catalog" | "seed" | "out_dir" | "grid" | "tolerances" | "params"
        ) {
            errors.push(err(key, "unknown top-level field"));
        }
    }

    let kind = match table.get("kind") {
        Some(toml::Value::String(s)) => match ScenarioKind::parse(s) {
            Some(kind) => Some(kind),
            None => {
                errors.push(err(
                    "kind",
                    format!(
                        "unknown kind {s:?}; expected one of solve, impulsive, timescale, \
                         horizon, sap, dependence, certificate"
                    ),
                ));
                None
            }
        },
        Some(_) => {
            errors.push(err("kind", "must be a string"));
            None
        }
        None => {
            errors.push(err("kind", "missing required field"));
            None
        }
    };

    let entry = match table.get("catalog") {
        Some(toml::Value::String(s)) => match catalog::find(s) {
            Some(entry) => Some(entry),
            None => {
                errors.push(err(
                    "catalog",
                    format!(
                        "unknown catalog id {s:?}; run the catalog command for the list"
                    ),
                ));
                None
            }
        },
        Some(_) => {
            errors.push(err("catalog", "must be a string"));
            None
        }
        None => {
            errors.push(err("catalog", "missing required field"));
            None
        }
    };

    if let (Some(kind), Some(entry)) = (kind, entry) {
        if !entry.kinds.contains(&kind) {
            errors.push(err(
                "kind",
                format!(
                    "catalog entry {:?} does not support kind {kind}; supported: {}",
                    entry.id,
                    entry
                        .kinds
                        .iter()
                        .map(|k| k.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ));
        }
    }

    let seed = match table.get("seed") {
        None => 0,
        Some(toml::Value::Integer(v)) if *v >= 0 => *v as u64,
        Some(_) => {
            errors.push(err("seed", "must be a nonnegative integer"));
            0
        }
    };

    let out_dir = match table.get("out_dir") {
        None => None,
        Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => {
            errors.push(err("out_dir", "must be a string path"));
            None
        }
    };

    let mut grid = GridOptions::default();
    if let Some(v) = table.get("grid") {
        match v {
            toml::Value::Table(t) => {
                for key in t.keys() {
                    if key != "step" {
                        errors.push(err(format!("grid.{key}"), "unknown field"));
                    }
                }
                if let Some(step) = t.get("step") {
                    match toml_float(step) {
                        Some(s) if s.is_finite() && s > 0.0 => grid.step = Some(s),
                        _ => errors.push(err("grid.step", "must be a positive finite number")),
                    }
                }
            }
            _ => errors.push(err("grid", "must be a table")),
        }
    }

    let mut tolerances = TolOptions::default();
    if let Some(v) = table.get("tolerances") {
        match v {
            toml::Value::Table(t) => {
                for key in t.keys() {
                    if key != "point" && key != "sweep" {
                        errors.push(err(format!("tolerances.{key}"), "unknown field"));
                    }
                }
                for (name, slot) in [
                    ("point", &mut tolerances.point),
                    ("sweep", &mut tolerances.sweep),
                ] {
                    if let Some(value) = t.get(name) {
                        match toml_float(value) {
                            Some(s) if s.is_finite() && s > 0.0 => *slot = Some(s),
                            _ => errors.push(err(
                                format!("tolerances.{name}"),
                                "must be a positive finite number",
                            )),
                        }
                    }
                }
            }
            _ => errors.push(err("tolerances", "must be a table")),
        }
    }

    let mut params: BTreeMap<String, ParamValue> = BTreeMap::new();
    let raw_params = match table.get("params") {
        None => toml::Table::new(),
        Some(toml::Value::Table(t)) => t.clone(),
        Some(_) => {
            errors.push(err("params", "must be a table"));
            toml::Table::new()
        }
    };
    if let Some(entry) = entry {
        for key in raw_params.keys() {
            if !entry.params.iter().any(|p| p.name == key) {
                errors.push(err(
                    format!("params.{key}"),
                    format!("unknown parameter for catalog entry {:?}", entry.id),
                ));
            }
        }
        for spec in &entry.params {
            let field = format!("params.{}", spec.name);
            match raw_params.get(spec.name) {
                None => {
                    params.insert(spec.name.to_string(), spec.default.clone());
                }
                Some(value) => match (spec.kind, value) {
                    (ParamKind::Float, v) => match toml_float(v) {
                        Some(x) if x.is_finite() => {
                            params.insert(spec.name.to_string(), ParamValue::Float(x));
                        }
                        _ => errors.push(err(field, "must be a finite number")),
                    },
                    (ParamKind::Int, toml::Value::Integer(x)) => {
                        params.insert(spec.name.to_string(), ParamValue::Int(*x));
                    }
                    (ParamKind::Int, _) => errors.push(err(field, "must be an integer")),
                    (ParamKind::FloatList, toml::Value::Array(items)) => {
                        let mut list = Vec::with_capacity(items.len());
                        let mut ok = true;
                        for item in items {
                            match toml_float(item) {
                                Some(x) if x.is_finite() => list.push(x),
                                _ => {
                                    errors.push(err(
                                        field.clone(),
                                        "every element must be a finite number",
                                    ));
                                    ok = false;
                                    break;
                                }
                            }
                        }
                        if ok {
                            params.insert(spec.name.to_string(), ParamValue::FloatList(list));
                        }
                    }
                    (ParamKind::FloatList, _) => {
                        errors.push(err(field, "must be an array of numbers"))
                    }
                    (ParamKind::Text, toml::Value::String(s)) => {
                        params.insert(spec.name.to_string(), ParamValue::Text(s.clone()));
                    }
                    (ParamKind::Text, _) => errors.push(err(field, "must be a string")),
                },
            }
        }
        // Entry-specific cross-field rules.
        if errors.is_empty() {
            for problem in (entry.validate)(&params) {
                errors.push(problem);
            }
        }
    }

    match (kind, errors.is_empty()) {
        (Some(kind), true) => Ok(Scenario {
            kind,
            catalog: entry.map(|e| e.id.to_string()).unwrap_or_default(),
            seed,
            out_dir,
            grid,
            tolerances,
            params,
        }),
        _ => Err(errors),
    }
}

/// Serializes a scenario back into a TOML document whose re-validation
/// reproduces the scenario exactly.
pub fn dump_config(scenario: &Scenario) -> String {
    toml::to_string(scenario).expect("scenarios always serialize")
}
