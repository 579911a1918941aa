//! The built-in problem catalog.
//!
//! Scenarios never parse user formulas; every runnable problem family lives
//! here with a typed parameter schema, and library users who need arbitrary
//! nonlinearities pass closures to the library directly.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use crate::config::{ConfigError, ParamValue, ScenarioKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Float,
    Int,
    FloatList,
    Text,
}

impl ParamKind {
    fn name(&self) -> &'static str {
        match self {
            ParamKind::Float => "float",
            ParamKind::Int => "int",
            ParamKind::FloatList => "float list",
            ParamKind::Text => "string",
        }
    }
}

pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: ParamValue,
    pub doc: &'static str,
}

pub struct CatalogEntry {
    pub id: &'static str,
    pub summary: &'static str,
    pub kinds: Vec<ScenarioKind>,
    pub params: Vec<ParamSpec>,
    /// Default maximum cell width of the solve grid.
    pub default_step: f64,
    /// Cross-field rules, run after the per-field checks pass.
    pub validate: fn(&BTreeMap<String, ParamValue>) -> Vec<ConfigError>,
}

fn no_rules(_: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    Vec::new()
}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

fn require_positive(
    params: &BTreeMap<String, ParamValue>,
    names: &[&str],
    out: &mut Vec<ConfigError>,
) {
    for name in names {
        if let Some(v) = params[*name].as_f64() {
            if !(v > 0.0) {
                out.push(err(
                    &format!("params.{name}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
    }
}

fn validate_impulsive_linear(params: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    let mut out = Vec::new();
    require_positive(params, &["duration"], &mut out);
    let duration = params["duration"].as_f64().unwrap_or(1.0);
    let times = params["impulse_times"].as_list().unwrap_or(&[]);
    let mut prev = 0.0;
    for &t in times {
        if !(t > 0.0 && t < duration) {
            out.push(err(
                "params.impulse_times",
                format!("impulse time {t} must lie strictly inside (0, {duration})"),
            ));
        } else if t <= prev {
            out.push(err(
                "params.impulse_times",
                "impulse times must be strictly increasing",
            ));
        }
        prev = t;
    }
    out
}

fn validate_timescale(params: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    let mut out = Vec::new();
    let points = params["points"].as_list().unwrap_or(&[]);
    if points.len() < 2 {
        out.push(err("params.points", "need at least two scale points"));
    }
    for w in points.windows(2) {
        if w[1] <= w[0] {
            out.push(err(
                "params.points",
                "scale points must be strictly increasing",
            ));
            break;
        }
    }
    out
}

fn validate_sap_common(params: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    let mut out = Vec::new();
    require_positive(params, &["omega", "horizon", "tol"], &mut out);
    let omega = params["omega"].as_f64().unwrap_or(1.0);
    let horizon = params["horizon"].as_f64().unwrap_or(32.0);
    if horizon <= omega {
        out.push(err(
            "params.horizon",
            format!("horizon {horizon} must exceed omega {omega}"),
        ));
    }
    if params["windows"].as_usize().is_none_or(|w| w == 0) {
        out.push(err("params.windows", "must be a positive integer"));
    }
    out
}

fn validate_sine_sap(params: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    let mut out = validate_sap_common(params);
    require_positive(params, &["sample_step"], &mut out);
    out
}

fn validate_example_4x(params: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    let mut out = validate_sap_common(params);
    let sequence = params["sequence"].as_text().unwrap_or("");
    if !matches!(sequence, "reciprocal" | "alternating") {
        out.push(err(
            "params.sequence",
            format!("unknown sequence {sequence:?}; expected reciprocal or alternating"),
        ));
    }
    if let Some(h) = params["horizon"].as_f64() {
        if h <= 1.0 {
            out.push(err("params.horizon", "horizon must exceed one"));
        }
    }
    out
}

fn validate_dependence(params: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    let mut out = Vec::new();
    if params["k_max"].as_usize().is_none_or(|k| k == 0) {
        out.push(err("params.k_max", "must be a positive integer"));
    }
    out
}

fn validate_horizon_decay(params: &BTreeMap<String, ParamValue>) -> Vec<ConfigError> {
    let mut out = Vec::new();
    require_positive(params, &["horizon", "chain", "rate"], &mut out);
    let horizon = params["horizon"].as_f64().unwrap_or(8.0);
    let chain = params["chain"].as_f64().unwrap_or(1.0);
    if chain > 0.0 {
        let chains = horizon / chain;
        if (chains - chains.round()).abs() > 1e-9 || chains < 1.0 {
            out.push(err(
                "params.horizon",
                format!("horizon {horizon} must be a positive multiple of the chain length {chain}"),
            ));
        }
    }
    let radii = params["radii"].as_list().unwrap_or(&[]);
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        out.push(err("params.radii", "must be a nonempty list of positive radii"));
    }
    out
}

fn float(name: &'static str, default: f64, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Float,
        default: ParamValue::Float(default),
        doc,
    }
}

fn int(name: &'static str, default: i64, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Int,
        default: ParamValue::Int(default),
        doc,
    }
}

fn list(name: &'static str, default: &[f64], doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::FloatList,
        default: ParamValue::FloatList(default.to_vec()),
        doc,
    }
}

fn text(name: &'static str, default: &'static str, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Text,
        default: ParamValue::Text(default.into()),
        doc,
    }
}

static ENTRIES: LazyLock<Vec<CatalogEntry>> = LazyLock::new(|| {
    vec![
        CatalogEntry {
            id: "example_3x",
            summary: "scalar hybrid integral equation on [0, 1]: sin^2 log perturbation, \
                      exponential-of-cosine integrand, identity integrator; certifiable \
                      existence ball",
            kinds: vec![ScenarioKind::Solve, ScenarioKind::Certificate],
            params: vec![
                float("gamma", 1.0, "exponent scale of the integrand"),
                float("eta", 1.0, "constant forcing level (nonnegative)"),
                float("x0", 0.0, "initial state"),
            ],
            default_step: 1e-3,
            validate: no_rules,
        },
        CatalogEntry {
            id: "impulsive_linear",
            summary: "linear growth with multiplicative impulses; closed-form product \
                      solution is emitted alongside for comparison",
            kinds: vec![ScenarioKind::Impulsive],
            params: vec![
                float("lambda", 1.0, "linear growth rate"),
                float("beta", 0.5, "impulse magnitude: the state jumps by beta times itself"),
                float("x0", 1.0, "initial state"),
                float("duration", 1.0, "span length from t = 0"),
                list(
                    "impulse_times",
                    &[0.25, 0.5, 0.75],
                    "strictly increasing times inside (0, duration)",
                ),
            ],
            default_step: 1e-3,
            validate: validate_impulsive_linear,
        },
        CatalogEntry {
            id: "timescale_discrete",
            summary: "linear dynamic equation on a discrete time scale; solved through \
                      the measure encoding and restricted back to the scale points",
            kinds: vec![ScenarioKind::Timescale],
            params: vec![
                list("points", &[0.0, 0.5, 1.0], "strictly increasing scale points"),
                float("rate", 1.0, "coefficient of the linear dynamic equation"),
                float("x0", 1.0, "initial state"),
            ],
            default_step: 0.125,
            validate: validate_timescale,
        },
        CatalogEntry {
            id: "example_4x_sap",
            summary: "piecewise-linear left-continuous path generated from a real \
                      sequence, profiled for S-asymptotic periodicity",
            kinds: vec![ScenarioKind::Sap],
            params: vec![
                text(
                    "sequence",
                    "reciprocal",
                    "generator sequence: reciprocal (vanishing differences) or \
                     alternating (non-vanishing)",
                ),
                float("omega", 1.0, "shift tested by the detector"),
                float("horizon", 32.0, "finite horizon the path is generated on"),
                int("windows", 8, "number of analysis windows"),
                float("tol", 1e-3, "final-window classification tolerance"),
            ],
            default_step: 1.0,
            validate: validate_example_4x,
        },
        CatalogEntry {
            id: "sine_sap",
            summary: "densely sampled sine path, profiled for S-asymptotic periodicity \
                      at an incommensurate shift",
            kinds: vec![ScenarioKind::Sap],
            params: vec![
                float("omega", 1.0, "shift tested by the detector"),
                float("horizon", 32.0, "finite horizon of the sampled path"),
                int("windows", 8, "number of analysis windows"),
                float("tol", 1e-3, "final-window classification tolerance"),
                float("sample_step", 0.01, "sampling step of the path"),
            ],
            default_step: 0.01,
            validate: validate_sine_sap,
        },
        CatalogEntry {
            id: "dependence_forcing",
            summary: "perturbed-integrand family: vanishing sinusoidal forcing added to \
                      a cosine field; measures sup-norm convergence of the solutions",
            kinds: vec![ScenarioKind::Dependence],
            params: vec![
                int("k_max", 32, "number of perturbed instances"),
                float("amplitude", 1.0, "forcing amplitude decays like amplitude / k"),
            ],
            default_step: 1e-2,
            validate: validate_dependence,
        },
        CatalogEntry {
            id: "dependence_initial",
            summary: "shifted-initial-value family with trivial dynamics; solution gaps \
                      are exactly the initial-value gaps",
            kinds: vec![ScenarioKind::Dependence],
            params: vec![int("k_max", 16, "number of perturbed instances")],
            default_step: 0.0625,
            validate: validate_dependence,
        },
        CatalogEntry {
            id: "horizon_decay",
            summary: "decaying forced linear problem solved by interval chaining over a \
                      long horizon, with the boundedness ratio diagnostic",
            kinds: vec![ScenarioKind::Horizon],
            params: vec![
                float("horizon", 8.0, "total horizon (a multiple of the chain length)"),
                float("chain", 1.0, "chain link length"),
                // rate * horizon below one keeps the boundedness ratio able
                // to dip under one at large radii.
                float("rate", 0.1, "decay rate of the linear part"),
                float("x0", 1.0, "initial state"),
                list("radii", &[1.0, 2.0, 4.0, 8.0, 16.0], "radii for the boundedness ratio"),
            ],
            default_step: 1e-2,
            validate: validate_horizon_decay,
        },
    ]
});

pub fn entries() -> &'static [CatalogEntry] {
    &ENTRIES
}

pub fn find(id: &str) -> Option<&'static CatalogEntry> {
    ENTRIES.iter().find(|e| e.id == id)
}

/// Human-readable catalog listing: ids, supported kinds, parameter schemas.
pub fn describe() -> String {
    let mut out = String::new();
    for entry in entries() {
        out.push_str(&format!(
            "{}\n  {}\n  kinds: {}\n",
            entry.id,
            entry.summary,
            entry
                .kinds
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        for p in &entry.params {
            out.push_str(&format!(
                "  {} ({}, default {}): {}\n",
                p.name,
                p.kind.name(),
                match &p.default {
                    ParamValue::Float(v) => format!("{v}"),
                    ParamValue::Int(v) => format!("{v}"),
                    ParamValue::FloatList(v) => format!("{v:?}"),
                    ParamValue::Text(v) => format!("{v:?}"),
                },
                p.doc
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_contains_the_standing_entries() {
        let listing = describe();
        for id in [
            "example_3x",
            "impulsive_linear",
            "example_4x_sap",
            "timescale_discrete",
        ] {
            assert!(listing.contains(id), "catalog listing missing {id}");
            assert!(find(id).is_some());
        }
    }

    #[test]
    fn ids_are_unique() {
        let mut seen = std::collections::BTreeSet::new();
        for e in entries() {
            assert!(seen.insert(e.id), "duplicate id {}", e.id);
        }
    }
}
