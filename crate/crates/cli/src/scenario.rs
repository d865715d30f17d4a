//! Scenario files: a TOML description of a chart, named metrics and
//! families, a compact exhaustion and a task list. The schema is documented
//! in `scenarios/SCHEMA.md`.
//!
//! Loading resolves every name and checks every expression, so a
//! [`Scenario`] that loads can be run without lookup failures. Names not
//! declared in the file fall back to the built-in catalog of
//! [`crate::geroch`] when the chart is `(t, x, y, z)`.

use crate::geroch::{builtin_geroch, linear_values, Builtin, GerochError, MetricFamily};
use lorentz_topology::expr::{parse_scalar_expr, ParamBinding, ScalarExpr};
use lorentz_topology::geometry::{Chart, MetricField, Signature, TensorField};
use lorentz_topology::norms::{CompactExhaustion, Domain, NormError};
use lorentz_topology::topology::{Family, TopologyKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("task '{task}' ({path}): {message}")]
    Task { task: String, path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Schema {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    seed: u64,
    chart: RawChart,
    #[serde(default)]
    exhaustion: RawExhaustion,
    #[serde(default)]
    metrics: BTreeMap<String, RawMetric>,
    #[serde(default)]
    families: BTreeMap<String, RawFamily>,
    #[serde(default)]
    tasks: Vec<TaskSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    coords: Vec<String>,
    dim: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExhaustion {
    r0: Option<f64>,
    levels: Option<usize>,
    grid: Option<usize>,
    schedule: Option<Vec<usize>>,
    #[serde(default)]
    probes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum IndexPosition {
    #[default]
    Covariant,
    Contravariant,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    builtin: Option<String>,
    components: Option<Vec<Vec<String>>>,
    diagonal: Option<Vec<String>>,
    signature: Option<Signature>,
    #[serde(default)]
    index: IndexPosition,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Spacing {
    #[default]
    Linear,
    Geometric,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    from: f64,
    to: f64,
    count: usize,
    #[serde(default)]
    spacing: Spacing,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    builtin: Option<String>,
    components: Option<Vec<Vec<String>>>,
    diagonal: Option<Vec<String>>,
    signature: Option<Signature>,
    param: Option<String>,
    values: Option<Vec<f64>>,
    range: Option<RawRange>,
    probes: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExpect {
    verdict: Option<String>,
    value: Option<f64>,
    formula: Option<String>,
    count: Option<usize>,
    tol: Option<f64>,
    anchor: String,
}

/// A task as written in a scenario file, before names are resolved. The
/// subcommands build these directly.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub op: String,
    pub a: Option<String>,
    pub b: Option<String>,
    pub center: Option<String>,
    pub candidate: Option<String>,
    pub family: Option<String>,
    pub limit: Option<String>,
    pub reference: Option<String>,
    pub references: Option<Vec<String>>,
    pub topology: Option<String>,
    pub order: Option<usize>,
    pub level: Option<usize>,
    pub radius: Option<f64>,
    pub interval: Option<[f64; 2]>,
    pub at: Option<Vec<Vec<f64>>>,
    pub random_points: Option<usize>,
    pub values: Option<Vec<f64>>,
    pub extra: Option<Vec<String>>,
    pub random: Option<usize>,
    pub expect: Option<RawExpect>,
}

/// Exhaustion settings before they are turned into a [`CompactExhaustion`].
/// An explicit schedule wins over `levels` and `grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionConfig {
    pub r0: f64,
    pub levels: usize,
    pub grid: usize,
    pub schedule: Option<Vec<usize>>,
    pub probes: Vec<Vec<f64>>,
}

impl Default for ExhaustionConfig {
    fn default() -> Self {
        ExhaustionConfig {
            r0: 1.0,
            levels: 8,
            grid: 17,
            schedule: None,
            probes: Vec::new(),
        }
    }
}

impl ExhaustionConfig {
    pub fn build(&self, dim: usize) -> Result<CompactExhaustion, NormError> {
        let ex = match &self.schedule {
            Some(s) => CompactExhaustion::with_schedule(dim, self.r0, s.clone())?,
            None => CompactExhaustion::new(dim, self.r0, self.levels, self.grid)?,
        };
        ex.with_probes(self.probes.clone())
    }
}

/// What a task's result is compared against. Exactly one of `verdict`,
/// `value`, `formula` and `count` is set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Expected value as an expression in the family parameter.
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "display_opt")]
    pub formula: Option<ScalarExpr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Absolute tolerance for `value` and `formula`.
    pub tol: f64,
    /// The formula statement the expected value comes from.
    pub anchor: String,
}

fn display_opt<S: serde::Serializer>(e: &Option<ScalarExpr>, s: S) -> Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.serialize_str(&e.to_string()),
        None => s.serialize_none(),
    }
}

pub const DEFAULT_TOL: f64 = 1e-9;

/// A Riemannian reference: a named metric, or the canonical reference
/// `h*^{ab} = h0^{ab}/|g|_{h0}` of a metric `g`, built when the task runs.
#[derive(Debug, Clone)]
pub enum Reference {
    Metric(MetricField),
    Canonical { of: MetricField, base: MetricField },
}

#[derive(Debug, Clone)]
pub struct NamedReference {
    pub label: String,
    pub reference: Reference,
}

#[derive(Debug, Clone)]
pub enum Operand {
    Metric(MetricField),
    Family(MetricFamily),
}

/// Sample points for a norm task.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSampling {
    /// Uniform norm over all of ℝⁿ, or over one level box.
    Uniform { level: Option<usize> },
    /// Fiber norms at the given points.
    Points(Vec<Vec<f64>>),
    /// Fiber norms at this many seeded random points.
    Random(usize),
}

#[derive(Debug, Clone)]
pub enum Op {
    Norm {
        a: Operand,
        b: Option<MetricField>,
        reference: NamedReference,
        sampling: NormSampling,
        order: usize,
    },
    Ball {
        center: MetricField,
        candidate: MetricField,
        radius: f64,
        reference: NamedReference,
        topology: TopologyKind,
        level: Option<usize>,
        order: usize,
    },
    Converge {
        family: MetricFamily,
        limit: MetricField,
        topology: TopologyKind,
        order: usize,
        references: Vec<NamedReference>,
    },
    Continuity {
        family: MetricFamily,
        interval: (f64, f64),
        topology: TopologyKind,
        order: usize,
        reference: NamedReference,
    },
    Equiv {
        a: MetricField,
        b: MetricField,
        extra: Vec<(String, TensorField)>,
        level: Option<usize>,
    },
    Component {
        a: MetricField,
        b: MetricField,
    },
    Chain {
        a: MetricField,
        b: MetricField,
        radius: f64,
        reference: NamedReference,
    },
    /// Runs all three convergence checks and tests
    /// `Open ⇒ Global ⇒ CompactOpen`, on a named family or on seeded random
    /// families.
    Monotonicity {
        subject: MonotonicitySubject,
        references: Vec<NamedReference>,
    },
}

#[derive(Debug, Clone)]
pub enum MonotonicitySubject {
    Named { family: MetricFamily, limit: MetricField },
    Random(usize),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Norm { .. } => "norm",
            Op::Ball { .. } => "ball",
            Op::Converge { .. } => "converge",
            Op::Continuity { .. } => "continuity",
            Op::Equiv { .. } => "equiv",
            Op::Component { .. } => "component",
            Op::Chain { .. } => "chain",
            Op::Monotonicity { .. } => "monotonicity",
        }
    }

    /// Verdicts an expectation may name; empty for numeric-only ops.
    pub fn verdicts(&self) -> &'static [&'static str] {
        match self {
            Op::Norm { .. } => &[],
            Op::Ball { .. } => &["Holds", "Fails"],
            Op::Converge { .. } => &["Converges", "Diverges"],
            Op::Continuity { .. } => &["Continuous", "Discontinuous"],
            Op::Equiv { .. } => &["Equivalent", "NotEquivalent"],
            Op::Component { .. } => &["Same", "Different"],
            Op::Chain { .. } => &["Certified", "NotCertified"],
            Op::Monotonicity { .. } => &["Consistent", "Violated"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub op: Op,
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub chart: Chart,
    pub exhaustion: ExhaustionConfig,
    pub metrics: BTreeMap<String, MetricField>,
    pub families: BTreeMap<String, MetricFamily>,
    pub tasks: Vec<Task>,
}

impl Scenario {
    /// The domain for the current exhaustion settings and seed.
    pub fn domain(&self) -> Result<Domain, NormError> {
        Ok(Domain::new(self.chart.clone(), self.exhaustion.build(self.chart.dim())?, self.seed))
    }

    /// Resolves a metric name as a scenario would: declared metrics, then
    /// built-ins.
    pub fn metric(&self, name: &str) -> Result<MetricField, String> {
        let resolver = Resolver {
            chart: &self.chart,
            metrics: &self.metrics,
            families: &self.families,
        };
        resolver.metric(name)
    }

    pub fn family(&self, name: &str) -> Result<MetricFamily, String> {
        let resolver = Resolver {
            chart: &self.chart,
            metrics: &self.metrics,
            families: &self.families,
        };
        resolver.family(name)
    }

    /// Resolves and validates a task against this scenario's names.
    pub fn resolve_task(&self, spec: TaskSpec) -> Result<Task, String> {
        let resolver = Resolver {
            chart: &self.chart,
            metrics: &self.metrics,
            families: &self.families,
        };
        task(spec, &resolver)
    }

    /// Parses a reference string (`name` or `canonical(g, h0)`).
    pub fn reference(&self, spec: &str) -> Result<NamedReference, String> {
        let resolver = Resolver {
            chart: &self.chart,
            metrics: &self.metrics,
            families: &self.families,
        };
        resolver.reference(spec)
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

/// Validates a scenario given as TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = toml::Deserializer::new(text);
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let location = inner
            .span()
            .map(|s| {
                let before = &text[..s.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                format!(" (line {line}, column {column})")
            })
            .unwrap_or_default();
        let path = if path == "." { "<document>".to_string() } else { path };
        schema(format!("{path}{location}"), inner.message())
    })?;
    build(raw)
}

fn build(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let chart = Chart::new(&raw.chart.coords).map_err(|e| schema("chart.coords", e))?;
    if let Some(d) = raw.chart.dim {
        if d != chart.dim() {
            return Err(schema("chart.dim", format!("dim = {d} but {} coordinates are listed", chart.dim())));
        }
    }
    let exhaustion = exhaustion_config(raw.exhaustion)?;
    let ex = exhaustion.build(chart.dim()).map_err(|e| schema("exhaustion", e))?;
    let samples = Domain::new(chart.clone(), ex, raw.seed).samples;

    let mut metrics = BTreeMap::new();
    for (name, m) in raw.metrics {
        check_name(&format!("metrics.{name}"), &name)?;
        let path = format!("metrics.{name}");
        let field = metric(&path, m, &chart)?;
        field
            .verify(&chart, &ParamBinding::new(), &samples)
            .map_err(|e| schema(&path, e))?;
        metrics.insert(name, field);
    }
    let mut families = BTreeMap::new();
    for (name, f) in raw.families {
        let path = format!("families.{name}");
        check_name(&path, &name)?;
        if metrics.contains_key(&name) {
            return Err(schema(&path, "name is already used by a metric"));
        }
        let fam = family(&path, &name, f, &chart)?;
        for &v in &fam.family.values {
            let m = fam.member_metric(v).map_err(|e| schema(&path, e))?;
            m.verify(&chart, &ParamBinding::new(), &samples)
                .map_err(|e| schema(&path, format!("member at {} = {v}: {e}", fam.family.param)))?;
        }
        families.insert(name, fam);
    }

    let resolver = Resolver {
        chart: &chart,
        metrics: &metrics,
        families: &families,
    };
    let mut tasks = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, t) in raw.tasks.into_iter().enumerate() {
        let path = format!("tasks[{i}]");
        let name = t.name.clone();
        let err = |message: String| ScenarioError::Task {
            task: name.clone(),
            path: path.clone(),
            message,
        };
        check_name(&path, &t.name).map_err(|e| err(e.to_string()))?;
        if !seen.insert(t.name.clone()) {
            return Err(err("duplicate task name".into()));
        }
        tasks.push(task(t, &resolver).map_err(err)?);
    }
    Ok(Scenario {
        name: raw.name,
        description: raw.description,
        seed: raw.seed,
        chart,
        exhaustion,
        metrics,
        families,
        tasks,
    })
}

/// Names become file names in trace output, so they are restricted.
fn check_name(path: &str, name: &str) -> Result<(), ScenarioError> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(schema(path, format!("'{name}' must be nonempty and use only ASCII letters, digits, '_' and '-'")))
    }
}

fn exhaustion_config(raw: RawExhaustion) -> Result<ExhaustionConfig, ScenarioError> {
    let mut out = ExhaustionConfig::default();
    if let Some(r0) = raw.r0 {
        out.r0 = r0;
    }
    if let Some(s) = raw.schedule {
        if raw.levels.is_some() || raw.grid.is_some() {
            return Err(schema("exhaustion.schedule", "give either schedule or levels/grid, not both"));
        }
        if s.is_empty() {
            return Err(schema("exhaustion.schedule", "at least one level is required"));
        }
        out.levels = s.len() - 1;
        out.schedule = Some(s);
    }
    if let Some(l) = raw.levels {
        out.levels = l;
    }
    if let Some(g) = raw.grid {
        out.grid = g;
    }
    out.probes = raw.probes;
    Ok(out)
}

/// Parses an expression and checks that it only mentions `allowed` symbols.
fn expression(path: &str, src: &str, allowed: &[&str]) -> Result<ScalarExpr, ScenarioError> {
    let e = parse_scalar_expr(src).map_err(|err| schema(path, format!("in \"{src}\": {err}")))?;
    if let Some(s) = e.symbols().into_iter().find(|s| !allowed.contains(&s.as_str())) {
        return Err(schema(path, format!("unknown symbol '{s}' in \"{src}\" (allowed: {})", allowed.join(", "))));
    }
    Ok(e)
}

/// Square symmetric matrix of expressions from `components` or `diagonal`.
fn matrix(
    path: &str,
    components: Option<Vec<Vec<String>>>,
    diagonal: Option<Vec<String>>,
    chart: &Chart,
    allowed: &[&str],
) -> Result<Vec<Vec<ScalarExpr>>, ScenarioError> {
    let n = chart.dim();
    match (components, diagonal) {
        (Some(rows), None) => {
            if rows.len() != n {
                return Err(schema(format!("{path}.components"), format!("expected {n} rows, found {}", rows.len())));
            }
            let mut out = Vec::with_capacity(n);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(schema(
                        format!("{path}.components[{i}]"),
                        format!("expected {n} entries, found {}", row.len()),
                    ));
                }
                let parsed = row
                    .iter()
                    .enumerate()
                    .map(|(j, s)| expression(&format!("{path}.components[{i}][{j}]"), s, allowed))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(parsed);
            }
            for i in 0..n {
                for j in i + 1..n {
                    if out[i][j] != out[j][i] {
                        return Err(schema(
                            format!("{path}.components[{i}][{j}]"),
                            format!("matrix is not symmetric: \"{}\" vs \"{}\"", rows[i][j], rows[j][i]),
                        ));
                    }
                }
            }
            Ok(out)
        }
        (None, Some(diag)) => {
            if diag.len() != n {
                return Err(schema(format!("{path}.diagonal"), format!("expected {n} entries, found {}", diag.len())));
            }
            let mut out = vec![vec![ScalarExpr::zero(); n]; n];
            for (i, s) in diag.iter().enumerate() {
                out[i][i] = expression(&format!("{path}.diagonal[{i}]"), s, allowed)?;
            }
            Ok(out)
        }
        (Some(_), Some(_)) => Err(schema(path, "give either components or diagonal, not both")),
        (None, None) => Err(schema(path, "one of builtin, components or diagonal is required")),
    }
}

fn builtin_for(path: &str, name: &str, chart: &Chart) -> Result<Builtin, ScenarioError> {
    if *chart != Chart::spacetime() {
        return Err(schema(path, format!("built-in '{name}' needs the chart (t, x, y, z)")));
    }
    builtin_geroch(name).map_err(|e| schema(path, e))
}

fn metric(path: &str, m: RawMetric, chart: &Chart) -> Result<MetricField, ScenarioError> {
    if let Some(b) = m.builtin {
        if m.components.is_some() || m.diagonal.is_some() || m.signature.is_some() || m.index != IndexPosition::Covariant {
            return Err(schema(path, "a built-in metric takes no other fields"));
        }
        return match builtin_for(&format!("{path}.builtin"), &b, chart)? {
            Builtin::Metric(m) => Ok(m),
            Builtin::Family(_) => Err(schema(
                format!("{path}.builtin"),
                format!("'{b}' is a family; bind its parameter, e.g. '{b}(1)'"),
            )),
        };
    }
    let coords: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
    let rows = matrix(path, m.components, m.diagonal, chart, &coords)?;
    let signature = m
        .signature
        .ok_or_else(|| schema(format!("{path}.signature"), "missing field (lorentzian or riemannian)"))?;
    let built = match m.index {
        IndexPosition::Covariant => TensorField::from_matrix(0, 2, rows).and_then(|t| MetricField::from_covariant(t, signature)),
        IndexPosition::Contravariant => {
            TensorField::from_matrix(2, 0, rows).and_then(|t| MetricField::from_contravariant(t, signature))
        }
    };
    built.map_err(|e| schema(path, e))
}

fn family_values(path: &str, values: Option<Vec<f64>>, range: Option<RawRange>) -> Result<Option<Vec<f64>>, ScenarioError> {
    let out = match (values, range) {
        (Some(_), Some(_)) => return Err(schema(path, "give either values or range, not both")),
        (Some(v), None) => v,
        (None, Some(r)) => {
            let rpath = format!("{path}.range");
            if r.count == 0 {
                return Err(schema(format!("{rpath}.count"), "parameter range is empty"));
            }
            if !(r.from.is_finite() && r.to.is_finite()) {
                return Err(schema(&rpath, "endpoints must be finite"));
            }
            match r.spacing {
                Spacing::Linear => linear_values(r.from, r.to, r.count),
                Spacing::Geometric => {
                    if !(r.from > 0.0 && r.to > 0.0) {
                        return Err(schema(&rpath, "geometric spacing needs positive endpoints"));
                    }
                    linear_values(r.from.ln(), r.to.ln(), r.count).into_iter().map(f64::exp).collect()
                }
            }
        }
        (None, None) => return Ok(None),
    };
    if out.is_empty() {
        return Err(schema(format!("{path}.values"), "parameter range is empty"));
    }
    if let Some(v) = out.iter().find(|v| !v.is_finite()) {
        return Err(schema(format!("{path}.values"), format!("{v} is not finite")));
    }
    Ok(Some(out))
}

fn family(path: &str, name: &str, f: RawFamily, chart: &Chart) -> Result<MetricFamily, ScenarioError> {
    let values = family_values(path, f.values, f.range)?;
    let coords: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
    if let Some(b) = f.builtin {
        if f.components.is_some() || f.diagonal.is_some() || f.signature.is_some() {
            return Err(schema(path, "a built-in family takes only param, values, range and probes"));
        }
        let mut fam = match builtin_for(&format!("{path}.builtin"), &b, chart)? {
            Builtin::Family(fam) => fam,
            Builtin::Metric(_) => return Err(schema(format!("{path}.builtin"), format!("'{b}' is not a family"))),
        };
        if let Some(p) = f.param {
            if p != fam.family.param {
                return Err(schema(
                    format!("{path}.param"),
                    format!("built-in '{b}' has parameter '{}'", fam.family.param),
                ));
            }
        }
        if let Some(v) = values {
            fam.family.values = v;
        }
        if let Some(probes) = f.probes {
            fam.family.probes = probes_of(path, &probes, chart, &fam.family.param)?;
        }
        fam.family.name = name.into();
        return Ok(fam);
    }
    let param = f
        .param
        .ok_or_else(|| schema(format!("{path}.param"), "missing field (the family parameter name)"))?;
    if coords.contains(&param.as_str()) {
        return Err(schema(format!("{path}.param"), format!("'{param}' is a coordinate")));
    }
    if parse_scalar_expr(&param).map(|e| e.to_string() != param).unwrap_or(true) {
        return Err(schema(format!("{path}.param"), format!("'{param}' is not an identifier")));
    }
    let mut allowed = coords.clone();
    allowed.push(&param);
    let rows = matrix(path, f.components, f.diagonal, chart, &allowed)?;
    let signature = f
        .signature
        .ok_or_else(|| schema(format!("{path}.signature"), "missing field (lorentzian or riemannian)"))?;
    let values = values.ok_or_else(|| schema(path, "one of values or range is required"))?;
    let field = TensorField::from_matrix(0, 2, rows).map_err(|e| schema(path, e))?;
    let probes = match f.probes {
        Some(p) => probes_of(path, &p, chart, &param)?,
        None => Vec::new(),
    };
    Ok(MetricFamily {
        family: Family::new(name, &param, field, values).with_probes(probes),
        signature,
    })
}

/// Family probes are expressions in the parameter only.
fn probes_of(path: &str, probes: &[Vec<String>], chart: &Chart, param: &str) -> Result<Vec<Vec<ScalarExpr>>, ScenarioError> {
    let mut out = Vec::new();
    for (i, p) in probes.iter().enumerate() {
        if p.len() != chart.dim() {
            return Err(schema(
                format!("{path}.probes[{i}]"),
                format!("expected {} coordinates, found {}", chart.dim(), p.len()),
            ));
        }
        out.push(
            p.iter()
                .enumerate()
                .map(|(j, s)| expression(&format!("{path}.probes[{i}][{j}]"), s, &[param]))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(out)
}

struct Resolver<'a> {
    chart: &'a Chart,
    metrics: &'a BTreeMap<String, MetricField>,
    families: &'a BTreeMap<String, MetricFamily>,
}

impl Resolver<'_> {
    fn builtin(&self, name: &str) -> Result<Builtin, String> {
        match builtin_geroch(name) {
            Ok(b) if *self.chart == Chart::spacetime() => Ok(b),
            Ok(_) => Err(format!("built-in '{name}' needs the chart (t, x, y, z)")),
            Err(GerochError::Unknown(_)) => Err(format!("unknown metric or family '{name}'")),
            Err(e) => Err(e.to_string()),
        }
    }

    fn metric(&self, name: &str) -> Result<MetricField, String> {
        if let Some(m) = self.metrics.get(name) {
            return Ok(m.clone());
        }
        if let Some((base, arg)) = name.split_once('(') {
            if let Some(f) = self.families.get(base.trim()) {
                let v: f64 = arg
                    .strip_suffix(')')
                    .and_then(|a| a.trim().parse().ok())
                    .ok_or_else(|| format!("malformed argument in '{name}'"))?;
                return f.member_metric(v).map_err(|e| format!("'{name}': {e}"));
            }
        }
        if self.families.contains_key(name) {
            return Err(format!("'{name}' is a family, not a metric; bind its parameter, e.g. '{name}(1)'"));
        }
        match self.builtin(name)? {
            Builtin::Metric(m) => Ok(m),
            Builtin::Family(_) => Err(format!("'{name}' is a family, not a metric; bind its parameter, e.g. '{name}(1)'")),
        }
    }

    fn family(&self, name: &str) -> Result<MetricFamily, String> {
        if let Some(f) = self.families.get(name) {
            return Ok(f.clone());
        }
        if self.metrics.contains_key(name) {
            return Err(format!("'{name}' is a metric, not a family"));
        }
        match self.builtin(name)? {
            Builtin::Family(f) => Ok(f),
            Builtin::Metric(_) => Err(format!("'{name}' is a metric, not a family")),
        }
    }

    fn operand(&self, name: &str) -> Result<Operand, String> {
        match self.family(name) {
            Ok(f) => Ok(Operand::Family(f)),
            Err(_) => self.metric(name).map(Operand::Metric),
        }
    }

    fn riemannian(&self, name: &str) -> Result<MetricField, String> {
        let m = self.metric(name)?;
        if m.signature() != Signature::Riemannian {
            return Err(format!("reference '{name}' is not Riemannian"));
        }
        Ok(m)
    }

    /// `name` or `canonical(g, h0)`.
    fn reference(&self, spec: &str) -> Result<NamedReference, String> {
        let spec = spec.trim();
        let reference = match spec.strip_prefix("canonical(").and_then(|s| s.strip_suffix(')')) {
            Some(args) => {
                let (g, h0) = split_top_level(args).ok_or_else(|| format!("'{spec}' must read canonical(g, h0)"))?;
                let of = self.metric(g)?;
                if of.signature() != Signature::Lorentzian {
                    return Err(format!("canonical reference of '{g}' needs a Lorentzian metric"));
                }
                Reference::Canonical {
                    of,
                    base: self.riemannian(h0)?,
                }
            }
            None => Reference::Metric(self.riemannian(spec)?),
        };
        Ok(NamedReference {
            label: spec.into(),
            reference,
        })
    }
}

/// Splits `a, b` at the first comma outside parentheses.
fn split_top_level(s: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => return Some((s[..i].trim(), s[i + 1..].trim())),
            _ => {}
        }
    }
    None
}

/// Fields each op accepts besides `name`, `op` and `expect`.
fn accepted(op: &str) -> Option<&'static [&'static str]> {
    Some(match op {
        "norm" => &["a", "b", "reference", "level", "at", "random_points", "values", "order"],
        "ball" => &["center", "candidate", "radius", "reference", "topology", "level", "order"],
        "converge" => &["family", "limit", "topology", "order", "references"],
        "continuity" => &["family", "interval", "topology", "order", "reference"],
        "equiv" => &["a", "b", "extra", "level"],
        "component" => &["a", "b"],
        "chain" => &["a", "b", "radius", "reference"],
        "monotonicity" => &["family", "limit", "random", "references"],
        _ => return None,
    })
}

fn present_fields(t: &TaskSpec) -> Vec<&'static str> {
    let mut out = Vec::new();
    let mut mark = |set: bool, name: &'static str| {
        if set {
            out.push(name)
        }
    };
    mark(t.a.is_some(), "a");
    mark(t.b.is_some(), "b");
    mark(t.center.is_some(), "center");
    mark(t.candidate.is_some(), "candidate");
    mark(t.family.is_some(), "family");
    mark(t.limit.is_some(), "limit");
    mark(t.reference.is_some(), "reference");
    mark(t.references.is_some(), "references");
    mark(t.topology.is_some(), "topology");
    mark(t.order.is_some(), "order");
    mark(t.level.is_some(), "level");
    mark(t.radius.is_some(), "radius");
    mark(t.interval.is_some(), "interval");
    mark(t.at.is_some(), "at");
    mark(t.random_points.is_some(), "random_points");
    mark(t.values.is_some(), "values");
    mark(t.extra.is_some(), "extra");
    mark(t.random.is_some(), "random");
    out
}

fn required<T: Clone>(v: &Option<T>, field: &str, op: &str) -> Result<T, String> {
    v.clone().ok_or_else(|| format!("op '{op}' requires field '{field}'"))
}

fn topology(t: &TaskSpec, op: &str) -> Result<TopologyKind, String> {
    required(&t.topology, "topology", op)?.parse()
}

fn default_reference(r: &Resolver) -> Result<NamedReference, String> {
    Ok(NamedReference {
        label: "euclidean".into(),
        reference: Reference::Metric(MetricField::euclidean(r.chart.dim())),
    })
}

fn reference_or_default(t: &TaskSpec, r: &Resolver) -> Result<NamedReference, String> {
    match &t.reference {
        Some(spec) => r.reference(spec),
        None => default_reference(r),
    }
}

fn references_or_default(t: &TaskSpec, r: &Resolver) -> Result<Vec<NamedReference>, String> {
    match &t.references {
        Some(list) if list.is_empty() => Err("references must not be empty".into()),
        Some(list) => list.iter().map(|s| r.reference(s)).collect(),
        None => Ok(vec![default_reference(r)?]),
    }
}

fn positive(v: f64, field: &str) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{field} must be positive, got {v}"))
    }
}

fn task(t: TaskSpec, r: &Resolver) -> Result<Task, String> {
    let op_name = t.op.as_str();
    let fields = accepted(op_name).ok_or_else(|| {
        format!("unknown op '{op_name}' (expected norm, ball, converge, continuity, equiv, component, chain or monotonicity)")
    })?;
    if let Some(f) = present_fields(&t).into_iter().find(|f| !fields.contains(f)) {
        return Err(format!("field '{f}' is not used by op '{op_name}'"));
    }
    let order = t.order.unwrap_or(0);
    let op = match op_name {
        "norm" => {
            let a = r.operand(&required(&t.a, "a", op_name)?)?;
            let b = t.b.as_deref().map(|b| r.metric(b)).transpose()?;
            let sampling = match (&t.at, t.random_points, t.level) {
                (Some(_), Some(_), _) | (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
                    return Err("give at most one of at, random_points and level".into())
                }
                (Some(points), None, None) => {
                    if let Some(p) = points.iter().find(|p| p.len() != r.chart.dim()) {
                        return Err(format!("point {p:?} does not have {} coordinates", r.chart.dim()));
                    }
                    NormSampling::Points(points.clone())
                }
                (None, Some(n), None) => NormSampling::Random(n),
                (None, None, level) => NormSampling::Uniform { level },
            };
            let a = match (a, &t.values) {
                (Operand::Family(mut f), Some(values)) => {
                    if values.is_empty() {
                        return Err("values must not be empty".into());
                    }
                    f.family.values = values.clone();
                    Operand::Family(f)
                }
                (Operand::Metric(_), Some(_)) => return Err("values needs a family in field 'a'".into()),
                (a, None) => a,
            };
            if matches!(a, Operand::Family(_)) && !matches!(sampling, NormSampling::Uniform { .. }) {
                return Err("a family norm is a uniform norm; at and random_points apply to metrics".into());
            }
            Op::Norm {
                a,
                b,
                reference: reference_or_default(&t, r)?,
                sampling,
                order,
            }
        }
        "ball" => {
            let kind = topology(&t, op_name)?;
            let level = t.level;
            match (kind, level) {
                (TopologyKind::CompactOpen, None) => return Err("a compact-open ball needs field 'level'".into()),
                (TopologyKind::Open | TopologyKind::Global, Some(_)) => {
                    return Err("only compact-open balls take field 'level'".into())
                }
                _ => {}
            }
            let reference = match (&t.reference, kind) {
                (Some(spec), _) => r.reference(spec)?,
                (None, TopologyKind::Global) => {
                    return Err("a global ball needs field 'reference' (e.g. canonical(center, h0))".into())
                }
                (None, _) => default_reference(r)?,
            };
            Op::Ball {
                center: r.metric(&required(&t.center, "center", op_name)?)?,
                candidate: r.metric(&required(&t.candidate, "candidate", op_name)?)?,
                radius: positive(required(&t.radius, "radius", op_name)?, "radius")?,
                reference,
                topology: kind,
                level,
                order,
            }
        }
        "converge" => Op::Converge {
            family: r.family(&required(&t.family, "family", op_name)?)?,
            limit: r.metric(&required(&t.limit, "limit", op_name)?)?,
            topology: topology(&t, op_name)?,
            order,
            references: references_or_default(&t, r)?,
        },
        "continuity" => {
            let [lo, hi] = required(&t.interval, "interval", op_name)?;
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(format!("interval [{lo}, {hi}] must satisfy 0 < lo < hi"));
            }
            Op::Continuity {
                family: r.family(&required(&t.family, "family", op_name)?)?,
                interval: (lo, hi),
                topology: topology(&t, op_name)?,
                order,
                reference: reference_or_default(&t, r)?,
            }
        }
        "equiv" => {
            let extra = t
                .extra
                .iter()
                .flatten()
                .map(|n| r.metric(n).map(|m| (n.clone(), m.covariant().clone())))
                .collect::<Result<Vec<_>, _>>()?;
            Op::Equiv {
                a: r.metric(&required(&t.a, "a", op_name)?)?,
                b: r.metric(&required(&t.b, "b", op_name)?)?,
                extra,
                level: t.level,
            }
        }
        "component" => Op::Component {
            a: r.metric(&required(&t.a, "a", op_name)?)?,
            b: r.metric(&required(&t.b, "b", op_name)?)?,
        },
        "chain" => {
            let a = r.metric(&required(&t.a, "a", op_name)?)?;
            let reference = r.reference(&required(&t.reference, "reference", op_name)?)?;
            Op::Chain {
                a,
                b: r.metric(&required(&t.b, "b", op_name)?)?,
                radius: positive(required(&t.radius, "radius", op_name)?, "radius")?,
                reference,
            }
        }
        "monotonicity" => {
            let subject = match (&t.family, &t.limit, t.random) {
                (Some(f), Some(l), None) => MonotonicitySubject::Named {
                    family: r.family(f)?,
                    limit: r.metric(l)?,
                },
                (None, None, Some(n)) => MonotonicitySubject::Random(n),
                _ => return Err("op 'monotonicity' needs either family and limit, or random".into()),
            };
            Op::Monotonicity {
                subject,
                references: references_or_default(&t, r)?,
            }
        }
        _ => unreachable!("accepted() lists every op"),
    };
    let expect = t.expect.map(|e| expectation(e, &op)).transpose()?;
    Ok(Task { name: t.name, op, expect })
}

fn expectation(e: RawExpect, op: &Op) -> Result<Expectation, String> {
    let set = [e.verdict.is_some(), e.value.is_some(), e.formula.is_some(), e.count.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if set != 1 {
        return Err("expect needs exactly one of verdict, value, formula and count".into());
    }
    if e.anchor.trim().is_empty() {
        return Err("expect.anchor must state where the expected value comes from".into());
    }
    if let Some(v) = &e.verdict {
        if !op.verdicts().contains(&v.as_str()) {
            return Err(format!(
                "expect.verdict '{v}' is not a verdict of op '{}' (expected one of: {})",
                op.name(),
                op.verdicts().join(", ")
            ));
        }
    }
    if (e.value.is_some() || e.formula.is_some()) && !matches!(op, Op::Norm { .. }) {
        return Err(format!("op '{}' has no numeric result to compare", op.name()));
    }
    if e.count.is_some() && !matches!(op, Op::Chain { .. }) {
        return Err("expect.count applies to op 'chain' only".into());
    }
    if e.tol.is_some() && e.value.is_none() && e.formula.is_none() {
        return Err("expect.tol applies to value and formula only".into());
    }
    let tol = e.tol.unwrap_or(DEFAULT_TOL);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(format!("expect.tol must be a nonnegative number, got {tol}"));
    }
    let formula = match &e.formula {
        Some(src) => {
            let Op::Norm {
                a: Operand::Family(f), ..
            } = op
            else {
                return Err("expect.formula needs a norm task over a family".into());
            };
            Some(expression("expect.formula", src, &[f.family.param.as_str()]).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    Ok(Expectation {
        verdict: e.verdict,
        value: e.value,
        formula,
        count: e.count,
        tol,
        anchor: e.anchor,
    })
}
