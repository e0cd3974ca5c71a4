//! Scenario files: JSON description of a domain, a metric, named fields and
//! the checks to run on them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::curvature::Named;
use crate::fields::{BoxDomain, ScalarField, VectorField};
use crate::metric::{TwoMetric, TABLE3_NAMES};
use crate::twoinner::DEFAULT_SEED;

pub const SEED_ENV: &str = "TWORIEM_SEED";
pub const DEFAULT_RANDOM_POINTS: usize = 20;

/// Input problems; all map to exit code 2.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed scenario JSON at line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    Standard,
    Simple {
        h: Vec<Vec<String>>,
    },
    Conformal {
        lambda: String,
        base: Box<MetricSpec>,
    },
    /// `g112` alone in dimension 2, all nine entries in dimension 3.
    Table {
        g112: String,
        g113: Option<String>,
        g221: Option<String>,
        g223: Option<String>,
        g331: Option<String>,
        g332: Option<String>,
        g123: Option<String>,
        g132: Option<String>,
        g231: Option<String>,
    },
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub abs: Option<f64>,
    pub rel: Option<f64>,
    pub quad_tol: Option<f64>,
    pub fit_tol: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub check: String,
    /// Report name; defaults to `check`.
    #[serde(default)]
    pub label: Option<String>,
    /// Field names to use; empty means all scenario fields.
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default)]
    pub scalars: Vec<String>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl CheckSpec {
    pub fn name(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.check)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub dimension: usize,
    pub coords: Vec<String>,
    #[serde(rename = "box")]
    pub domain: Vec<[f64; 2]>,
    pub metric: MetricSpec,
    #[serde(default)]
    pub fields: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub scalars: BTreeMap<String, String>,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub random_points: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

pub const CHECK_NAMES: [&str; 19] = [
    "torsion-free",
    "compatibility",
    "symmetry",
    "adapted",
    "computa-split",
    "r2-explicit",
    "module-rules",
    "curvature-props",
    "ch-flat",
    "never-vanish",
    "koszul-obstruction",
    "invariance",
    "koszul-comparison",
    "stationary",
    "thCC-equivalence",
    "s2",
    "axioms",
    "flatten-2d",
    "conformal-3d",
];

/// Raw bytes plus parsed scenario.
pub struct Loaded {
    pub scenario: Scenario,
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_scenario(bytes: &[u8]) -> Result<Loaded, ScenarioError> {
    let scenario: Scenario = serde_json::from_slice(bytes)
        .map_err(|e| ScenarioError::Json { line: e.line(), column: e.column(), msg: e.to_string() })?;
    Ok(Loaded { scenario, hash: sha256_hex(bytes) })
}

pub fn load(path: &Path) -> Result<Loaded, ScenarioError> {
    let bytes = std::fs::read(path).map_err(|e| ScenarioError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    parse_scenario(&bytes)
}

/// Seed precedence: explicit flag, then the scenario, then `TWORIEM_SEED`, then 42.
pub fn resolve_seed(flag: Option<u64>, scenario: Option<u64>) -> Result<u64, ScenarioError> {
    if let Some(s) = flag.or(scenario) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// A validated scenario with every expression parsed.
pub struct Context {
    pub name: String,
    pub dim: usize,
    pub coords: Vec<String>,
    pub domain: BoxDomain,
    pub metric: TwoMetric,
    pub metric_spec: MetricSpec,
    pub fields: Vec<Named>,
    pub scalars: Vec<(String, ScalarField)>,
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub checks: Vec<CheckSpec>,
}

impl Context {
    pub fn parse_scalar(&self, text: &str) -> Result<ScalarField, ScenarioError> {
        ScalarField::parse(text, &self.coords).map_err(|e| invalid(format!("{text:?}: {e}")))
    }

    pub fn build_metric(&self, spec: &MetricSpec) -> Result<TwoMetric, ScenarioError> {
        build_metric(spec, self.dim, &self.coords)
    }

    pub fn field(&self, name: &str) -> Option<&Named> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn scalar(&self, name: &str) -> Option<&ScalarField> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

fn parse_in(text: &str, coords: &[String]) -> Result<ScalarField, ScenarioError> {
    ScalarField::parse(text, coords).map_err(|e| invalid(format!("{text:?}: {e}")))
}

pub fn build_metric(spec: &MetricSpec, dim: usize, coords: &[String]) -> Result<TwoMetric, ScenarioError> {
    if !(2..=3).contains(&dim) {
        return Err(invalid(format!("metrics need dimension 2 or 3, got {dim}")));
    }
    Ok(match spec {
        MetricSpec::Standard => TwoMetric::standard(dim),
        MetricSpec::Simple { h } => {
            if h.len() != dim || h.iter().any(|r| r.len() != dim) {
                return Err(invalid(format!("h must be {dim}x{dim}")));
            }
            let h = h
                .iter()
                .map(|r| r.iter().map(|e| parse_in(e, coords)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            TwoMetric::simple(h).map_err(|e| invalid(e.to_string()))?
        }
        MetricSpec::Conformal { lambda, base } => {
            TwoMetric::conformal(parse_in(lambda, coords)?, build_metric(base, dim, coords)?)
        }
        MetricSpec::Table { g112, g113, g221, g223, g331, g332, g123, g132, g231 } => {
            let rest = [g113, g221, g223, g331, g332, g123, g132, g231];
            if dim == 2 {
                if rest.iter().any(|e| e.is_some()) {
                    return Err(invalid("a 2-dimensional table takes g112 only"));
                }
                TwoMetric::table2(parse_in(g112, coords)?)
            } else {
                let mut entries = vec![parse_in(g112, coords)?];
                for (name, e) in TABLE3_NAMES[1..].iter().zip(rest) {
                    let e = e.as_ref().ok_or_else(|| invalid(format!("table entry {name} is missing")))?;
                    entries.push(parse_in(e, coords)?);
                }
                TwoMetric::table3(entries.try_into().expect("nine entries"))
            }
        }
    })
}

fn check_names(what: &str, names: &[String], known: &dyn Fn(&str) -> bool) -> Result<(), ScenarioError> {
    for n in names {
        if !known(n) {
            return Err(invalid(format!("unknown {what} {n:?}")));
        }
    }
    Ok(())
}

/// Validate and parse; `seed` is the already-resolved seed.
pub fn compile(s: &Scenario, seed: u64) -> Result<Context, ScenarioError> {
    let dim = s.dimension;
    if !(1..=3).contains(&dim) {
        return Err(invalid(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if s.coords.len() != dim {
        return Err(invalid(format!("{} coordinate names for dimension {dim}", s.coords.len())));
    }
    for (i, c) in s.coords.iter().enumerate() {
        if s.coords[..i].contains(c) {
            return Err(invalid(format!("coordinate {c:?} declared twice")));
        }
    }
    if s.domain.len() != dim {
        return Err(invalid(format!("box has {} intervals for dimension {dim}", s.domain.len())));
    }
    let domain = BoxDomain::new(s.domain.iter().map(|i| i[0]).collect(), s.domain.iter().map(|i| i[1]).collect())
        .map_err(|e| invalid(e.to_string()))?;
    let metric = build_metric(&s.metric, dim, &s.coords)?;

    let mut fields = Vec::new();
    for (name, comps) in &s.fields {
        if comps.len() != dim {
            return Err(invalid(format!("field {name} has {} components for dimension {dim}", comps.len())));
        }
        let f = VectorField::parse(comps, &s.coords).map_err(|e| invalid(format!("field {name}: {e}")))?;
        fields.push(Named::new(name.clone(), f));
    }
    let mut scalars = Vec::new();
    for (name, text) in &s.scalars {
        scalars.push((name.clone(), parse_in(text, &s.coords).map_err(|e| invalid(format!("scalar {name}: {e}")))?));
    }

    let mut points = Vec::new();
    for p in &s.points {
        if p.len() != dim || !domain.contains(p) {
            return Err(invalid(format!("point {p:?} is not inside the box")));
        }
        points.push(p.clone());
    }
    points.extend(domain.random_points(s.random_points.unwrap_or(DEFAULT_RANDOM_POINTS), seed));
    if points.is_empty() {
        return Err(invalid("no evaluation points"));
    }

    for c in &s.checks {
        if !CHECK_NAMES.contains(&c.check.as_str()) {
            return Err(invalid(format!("unknown check {:?}", c.check)));
        }
        check_names("field", &c.fields, &|n| s.fields.contains_key(n))?;
        check_names("scalar", &c.scalars, &|n| s.scalars.contains_key(n))?;
        for (k, v) in &c.params {
            let refs: Vec<String> = match v {
                serde_json::Value::String(t) if k == "field" => vec![t.clone()],
                serde_json::Value::String(t) if ["shift", "lambda", "G"].contains(&k.as_str()) => {
                    check_names("scalar", std::slice::from_ref(t), &|n| s.scalars.contains_key(n))?;
                    vec![]
                }
                serde_json::Value::Array(a) if k == "generators" => {
                    let names: Vec<String> = a.iter().filter_map(|x| x.as_str().map(String::from)).collect();
                    check_names("scalar", &names, &|n| s.scalars.contains_key(n))?;
                    vec![]
                }
                _ => vec![],
            };
            check_names("field", &refs, &|n| s.fields.contains_key(n))?;
        }
    }

    Ok(Context {
        name: s.name.clone().unwrap_or_else(|| "scenario".into()),
        dim,
        coords: s.coords.clone(),
        domain,
        metric,
        metric_spec: s.metric.clone(),
        fields,
        scalars,
        points,
        seed,
        tolerances: s.tolerances.clone(),
        checks: s.checks.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"dimension":2,"coords":["x","y"],"box":[[-1,1],[-1,1]],
        "metric":{"kind":"standard"},"fields":{"X":["1","y"]},"checks":[{"check":"symmetry"}]}"#;

    #[test]
    fn parses_and_compiles() {
        let l = parse_scenario(MINIMAL.as_bytes()).unwrap();
        let c = compile(&l.scenario, 42).unwrap();
        assert_eq!(c.points.len(), DEFAULT_RANDOM_POINTS);
        assert_eq!(l.hash.len(), 64);
    }

    #[test]
    fn reports_json_offset() {
        match parse_scenario(b"{\"dimension\": 2,\n  \"coords\": [}") {
            Err(ScenarioError::Json { line, column, .. }) => assert_eq!((line, column), (2, 14)),
            _ => panic!("expected a JSON error"),
        }
    }

    #[test]
    fn rejects_bad_references() {
        let bad = MINIMAL.replace(r#"{"check":"symmetry"}"#, r#"{"check":"symmetry","fields":["Q"]}"#);
        let l = parse_scenario(bad.as_bytes()).unwrap();
        assert!(matches!(compile(&l.scenario, 42), Err(ScenarioError::Invalid(_))));
        let bad = MINIMAL.replace("\"symmetry\"", "\"nonsense\"");
        assert!(compile(&parse_scenario(bad.as_bytes()).unwrap().scenario, 42).is_err());
        let bad = MINIMAL.replace("[\"1\",\"y\"]", "[\"1\",\"q\"]");
        assert!(compile(&parse_scenario(bad.as_bytes()).unwrap().scenario, 42).is_err());
    }

    #[test]
    fn table_metric_needs_all_entries_in_3d() {
        let c = ["x".to_string(), "y".into(), "z".into()];
        let spec: MetricSpec = serde_json::from_str(r#"{"kind":"table","g112":"1"}"#).unwrap();
        assert!(build_metric(&spec, 3, &c).is_err());
        assert!(build_metric(&spec, 2, &c[..2]).is_ok());
    }
}
