//! Runs scenario tasks and judges them against their expectations.
//!
//! A task passes when its verdict or values match the expectation, fails
//! when they do not or when the task errors, and is skipped when the
//! computation could not decide (an inconclusive verdict or sup status).
//! Tasks without an expectation are reported as done.

use crate::random::{random_chart, random_families};
use crate::scenario::{
    Expectation, MonotonicitySubject, NamedReference, NormSampling, Op, Operand, Reference, Scenario, Task,
};
use lorentz_topology::geometry::{christoffel, covariant_derivative, Connection, MetricField, TensorField};
use lorentz_topology::norms::{fiber_norm_at, uniform_norm, CompactExhaustion, Domain, NormError, Scope, SupStatus};
use lorentz_topology::sampling::random_points;
use lorentz_topology::serde_ext::Extended;
use lorentz_topology::topology::{
    ball_contains, canonical_equivalent_riemannian, continuity_check, converge_check, norm_equivalent_on,
    same_component, uniform_chain, BallSpec, ContinuityConfig, ConvergeConfig, ConvergenceVerdict, EquivalenceReport, TopologyError,
    TopologyKind, Trace,
};
use serde::Serialize;

/// Command-line adjustments applied on top of a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Derivative order for every task that takes one.
    pub order: Option<usize>,
    pub levels: Option<usize>,
    pub grid: Option<usize>,
    pub r0: Option<f64>,
    /// Tolerance for every numeric expectation.
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    /// Applies the exhaustion and seed settings. Setting `levels` or `grid`
    /// replaces an explicit schedule.
    pub fn apply(&self, scenario: &mut Scenario) {
        let ex = &mut scenario.exhaustion;
        if self.levels.is_some() || self.grid.is_some() {
            ex.schedule = None;
        }
        if let Some(l) = self.levels {
            ex.levels = l;
        }
        if let Some(g) = self.grid {
            ex.grid = g;
        }
        if let Some(r) = self.r0 {
            ex.r0 = r;
        }
        if let Some(s) = self.seed {
            scenario.seed = s;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
    Done,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
            Outcome::Done => "DONE",
        }
    }
}

/// One computed number: a sup (with its status) or a pointwise norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub value: Extended,
    pub status: SupStatus,
}

/// A sup trace along a family, written to CSV as `param, sup, status`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub label: String,
    pub param: String,
    pub points: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub index: usize,
    pub name: String,
    pub op: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<Sample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expectation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<TraceRecord>,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
    pub done: usize,
}

/// An expected value and the formula statement it comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub task: String,
    pub expected: String,
    pub anchor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionSummary {
    pub r0: f64,
    pub schedule: Vec<usize>,
    pub probes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub scenario: String,
    pub description: String,
    pub seed: u64,
    pub exhaustion: ExhaustionSummary,
    pub summary: Summary,
    pub tasks: Vec<TaskRecord>,
    pub provenance: Vec<Provenance>,
}

impl SuiteReport {
    pub fn failed(&self) -> bool {
        self.summary.fail > 0
    }
}

/// What an op computed, before it is judged.
#[derive(Debug, Default)]
struct Observation {
    verdict: Option<String>,
    samples: Vec<Sample>,
    count: Option<usize>,
    traces: Vec<TraceRecord>,
    details: serde_json::Value,
}

fn details<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn verdict_name<T: std::fmt::Debug>(v: T) -> String {
    format!("{v:?}")
}

/// Runs every task of `scenario` in order. Task errors are recorded as
/// failures; only an unusable exhaustion aborts the run.
pub fn run_suite(scenario: &Scenario, overrides: &Overrides) -> Result<SuiteReport, NormError> {
    run_suite_with(scenario, overrides, |_, _| {})
}

/// [`run_suite`] calling `progress` after each task.
pub fn run_suite_with(
    scenario: &Scenario,
    overrides: &Overrides,
    mut progress: impl FnMut(&TaskRecord, std::time::Duration),
) -> Result<SuiteReport, NormError> {
    let mut scenario = scenario.clone();
    overrides.apply(&mut scenario);
    let domain = scenario.domain()?;
    let mut tasks = Vec::new();
    let mut summary = Summary::default();
    let mut provenance = Vec::new();
    for (i, task) in scenario.tasks.iter().enumerate() {
        let start = std::time::Instant::now();
        let record = run_task(i, task, &scenario, &domain, overrides);
        progress(&record, start.elapsed());
        match record.outcome {
            Outcome::Pass => summary.pass += 1,
            Outcome::Fail => summary.fail += 1,
            Outcome::Skip => summary.skip += 1,
            Outcome::Done => summary.done += 1,
        }
        if let Some(e) = &record.expected {
            provenance.push(Provenance {
                task: record.name.clone(),
                expected: describe(e),
                anchor: e.anchor.clone(),
            });
        }
        tasks.push(record);
    }
    Ok(SuiteReport {
        scenario: scenario.name.clone(),
        description: scenario.description.clone(),
        seed: scenario.seed,
        exhaustion: ExhaustionSummary {
            r0: domain.exhaustion.r0(),
            schedule: domain.exhaustion.schedule().to_vec(),
            probes: domain.exhaustion.probes().to_vec(),
        },
        summary,
        tasks,
        provenance,
    })
}

fn describe(e: &Expectation) -> String {
    if let Some(v) = &e.verdict {
        v.clone()
    } else if let Some(v) = e.value {
        format!("{v} ± {}", e.tol)
    } else if let Some(f) = &e.formula {
        format!("{f} ± {}", e.tol)
    } else if let Some(c) = e.count {
        format!("{c} centers")
    } else {
        String::new()
    }
}

/// Runs one task against `domain` (built from `scenario` after overrides).
pub fn run_task(index: usize, task: &Task, scenario: &Scenario, domain: &Domain, overrides: &Overrides) -> TaskRecord {
    let mut expected = task.expect.clone();
    if let (Some(e), Some(tol)) = (&mut expected, overrides.tol) {
        if e.value.is_some() || e.formula.is_some() {
            e.tol = tol;
        }
    }
    let result = execute(index, &task.op, scenario, domain, overrides.order);
    let (outcome, message, obs) = match result {
        Ok(obs) => {
            let (outcome, message) = judge(&obs, expected.as_ref(), task);
            (outcome, message, obs)
        }
        Err(msg) => (Outcome::Fail, Some(msg), Observation::default()),
    };
    TaskRecord {
        index,
        name: task.name.clone(),
        op: task.op.name().into(),
        outcome,
        verdict: obs.verdict,
        samples: obs.samples,
        count: obs.count,
        expected,
        message,
        traces: obs.traces,
        details: obs.details,
    }
}

fn judge(obs: &Observation, expected: Option<&Expectation>, task: &Task) -> (Outcome, Option<String>) {
    let statuses = obs
        .samples
        .iter()
        .chain(obs.traces.iter().flat_map(|t| &t.points))
        .map(|s| s.status);
    let inconclusive_status = statuses.clone().any(|s| s == SupStatus::Inconclusive);
    let Some(e) = expected else {
        return (Outcome::Done, None);
    };
    if let Some(want) = &e.verdict {
        let got = obs.verdict.as_deref().unwrap_or("none");
        return if got == "Inconclusive" {
            (Outcome::Skip, Some(format!("verdict is Inconclusive (expected {want})")))
        } else if got != want {
            (Outcome::Fail, Some(format!("verdict {got}, expected {want}")))
        } else if inconclusive_status {
            (Outcome::Skip, Some(format!("verdict {got} rests on an Inconclusive sup estimate")))
        } else {
            (Outcome::Pass, None)
        };
    }
    if let Some(want) = e.count {
        return match obs.count {
            Some(c) if c == want => (Outcome::Pass, None),
            other => (Outcome::Fail, Some(format!("count {other:?}, expected {want}"))),
        };
    }
    let points: Vec<&Sample> = obs
        .samples
        .iter()
        .chain(obs.traces.iter().flat_map(|t| &t.points))
        .collect();
    if points.is_empty() {
        return (Outcome::Fail, Some("no values were computed".into()));
    }
    if let Some(p) = points.iter().find(|s| s.status == SupStatus::Unbounded) {
        return (Outcome::Fail, Some(format!("unbounded sup at {}", locate(p))));
    }
    if inconclusive_status {
        return (Outcome::Skip, Some("a sup estimate is Inconclusive".into()));
    }
    let param = match &task.op {
        Op::Norm {
            a: Operand::Family(f), ..
        } => Some(f.family.param.clone()),
        _ => None,
    };
    let mut worst = 0.0f64;
    for s in points {
        let want = match (&e.formula, s.param, &param) {
            (Some(f), Some(v), Some(name)) => {
                let binding = lorentz_topology::expr::ParamBinding::new().with(name, v);
                match f.evaluate(&[], &[], &binding) {
                    Ok(x) => x,
                    Err(err) => return (Outcome::Fail, Some(format!("expected formula at {v}: {err}"))),
                }
            }
            _ => e.value.unwrap_or(f64::NAN),
        };
        let dev = (s.value.0 - want).abs();
        if !(dev <= e.tol) {
            return (
                Outcome::Fail,
                Some(format!("value {} at {} differs from {want} by {dev:e} (tol {:e})", s.value.0, locate(s), e.tol)),
            );
        }
        worst = worst.max(dev);
    }
    (Outcome::Pass, Some(format!("largest deviation {worst:e}")))
}

fn locate(s: &Sample) -> String {
    match (s.param, &s.point) {
        (Some(v), _) => format!("parameter {v}"),
        (None, Some(p)) => format!("{p:?}"),
        (None, None) => "the uniform norm".into(),
    }
}

fn resolve(r: &NamedReference, domain: &Domain) -> Result<MetricField, TopologyError> {
    match &r.reference {
        Reference::Metric(m) => Ok(m.clone()),
        Reference::Canonical { of, base } => canonical_equivalent_riemannian(of, base, domain),
    }
}

/// `max_j` uniform norm of `∇^j k` under `h` for `j ≤ order`, with the worst
/// status.
fn ck_sup(
    k: &TensorField,
    h: &MetricField,
    domain: &Domain,
    scope: Scope,
    order: usize,
    probes: &[Vec<f64>],
) -> Result<(f64, SupStatus), TopologyError> {
    let conn = if order > 0 {
        christoffel(h, &domain.chart)
    } else {
        Connection::flat(h.dim())
    };
    let mut d = k.clone();
    let (mut value, mut status) = (0.0f64, SupStatus::Bounded);
    for j in 0..=order {
        if j > 0 {
            d = covariant_derivative(&d, &conn, &domain.chart);
        }
        let est = uniform_norm(&d, h, domain, scope, probes)?;
        value = value.max(est.value);
        status = match (status, est.status) {
            (SupStatus::Unbounded, _) | (_, SupStatus::Unbounded) => SupStatus::Unbounded,
            (SupStatus::Inconclusive, _) | (_, SupStatus::Inconclusive) => SupStatus::Inconclusive,
            _ => SupStatus::Bounded,
        };
    }
    Ok((value, status))
}

fn trace_record(t: &Trace, param: &str) -> TraceRecord {
    TraceRecord {
        label: t.label.clone(),
        param: param.into(),
        points: t
            .points
            .iter()
            .map(|p| Sample {
                label: None,
                param: Some(p.param),
                point: None,
                value: Extended(p.value),
                status: p.status,
            })
            .collect(),
    }
}

/// Seed for per-task random points, mixed from the scenario seed and the
/// task index.
fn task_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn execute(index: usize, op: &Op, scenario: &Scenario, domain: &Domain, order_override: Option<usize>) -> Result<Observation, String> {
    let order_of = |o: usize| order_override.unwrap_or(o);
    let err = |e: TopologyError| e.to_string();
    let mut obs = Observation::default();
    match op {
        Op::Norm {
            a,
            b,
            reference,
            sampling,
            order,
        } => {
            let order = order_of(*order);
            let h = resolve(reference, domain).map_err(err)?;
            let scope = match sampling {
                NormSampling::Uniform { level: Some(l) } => Scope::Level(*l),
                _ => Scope::Full,
            };
            let diff = |k: TensorField| -> Result<TensorField, String> {
                match b {
                    Some(b) => k.sub(b.covariant()).map_err(|e| e.to_string()),
                    None => Ok(k),
                }
            };
            match a {
                Operand::Metric(m) => {
                    let k = diff(m.covariant().clone())?;
                    let points = match sampling {
                        NormSampling::Uniform { .. } => None,
                        NormSampling::Points(p) => Some(p.clone()),
                        NormSampling::Random(n) => Some(random_points(
                            domain.dim(),
                            4.0 * domain.exhaustion.r0(),
                            *n,
                            task_seed(scenario.seed, index),
                        )),
                    };
                    match points {
                        None => {
                            let (value, status) = ck_sup(&k, &h, domain, scope, order, &[]).map_err(err)?;
                            obs.samples.push(Sample {
                label: None,
                                param: None,
                                point: None,
                                value: Extended(value),
                                status,
                            });
                        }
                        Some(points) => {
                            let conn = if order > 0 {
                                christoffel(&h, &domain.chart)
                            } else {
                                Connection::flat(h.dim())
                            };
                            let mut tower = vec![k];
                            for j in 0..order {
                                let next = covariant_derivative(&tower[j], &conn, &domain.chart);
                                tower.push(next);
                            }
                            for p in points {
                                let mut value = 0.0f64;
                                for t in &tower {
                                    let v = fiber_norm_at(t, &h, &domain.chart, &p, &domain.binding)
                                        .map_err(|e| e.to_string())?;
                                    value = value.max(v);
                                }
                                obs.samples.push(Sample {
                label: None,
                                    param: None,
                                    point: Some(p),
                                    value: Extended(value),
                                    status: SupStatus::Bounded,
                                });
                            }
                        }
                    }
                }
                Operand::Family(f) => {
                    let mut points = Vec::new();
                    for &v in &f.family.values {
                        let k = diff(f.family.member(v))?;
                        let probes = f.family.member_probes(v, domain).map_err(err)?;
                        let (value, status) = ck_sup(&k, &h, domain, scope, order, &probes).map_err(err)?;
                        points.push(Sample {
                label: None,
                            param: Some(v),
                            point: None,
                            value: Extended(value),
                            status,
                        });
                    }
                    obs.traces.push(TraceRecord {
                        label: "sup".into(),
                        param: f.family.param.clone(),
                        points,
                    });
                }
            }
            obs.details = serde_json::json!({ "reference": reference.label, "order": order });
        }
        Op::Ball {
            center,
            candidate,
            radius,
            reference,
            topology,
            level,
            order,
        } => {
            let order = order_of(*order);
            let h = resolve(reference, domain).map_err(err)?;
            let ball = match topology {
                TopologyKind::CompactOpen => {
                    BallSpec::compact_open(center.covariant().clone(), *radius, h, level.unwrap_or(0), order)
                }
                TopologyKind::Open => BallSpec::open(center.covariant().clone(), *radius, h, order),
                TopologyKind::Global => BallSpec::global(center, *radius, h, order),
            }
            .map_err(err)?;
            let m = ball_contains(&ball, candidate.covariant(), domain).map_err(err)?;
            obs.verdict = Some(verdict_name(m.verdict));
            obs.samples = m
                .estimates
                .iter()
                .map(|e| Sample {
                label: None,
                    param: None,
                    point: None,
                    value: Extended(e.value),
                    status: e.status,
                })
                .collect();
            obs.details = details(&m);
        }
        Op::Converge {
            family,
            limit,
            topology,
            order,
            references,
        } => {
            let refs = references
                .iter()
                .map(|r| resolve(r, domain))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            let cfg = ConvergeConfig {
                order: order_of(*order),
                references: refs,
            };
            let r = converge_check(&family.family, limit.covariant(), *topology, &cfg, domain).map_err(err)?;
            obs.verdict = Some(verdict_name(r.verdict));
            obs.traces = r.traces.iter().map(|t| trace_record(t, &family.family.param)).collect();
            obs.details = serde_json::json!({
                "family": r.family,
                "kind": r.kind,
                "order": r.order,
                "witness": r.witness,
                "references": references.iter().map(|r| r.label.clone()).collect::<Vec<_>>(),
            });
        }
        Op::Continuity {
            family,
            interval,
            topology,
            order,
            reference,
        } => {
            let mut cfg = ContinuityConfig::new(domain.dim());
            cfg.converge = ConvergeConfig {
                order: order_of(*order),
                references: vec![resolve(reference, domain).map_err(err)?],
            };
            let r = continuity_check(&family.family, *interval, *topology, &cfg, domain).map_err(err)?;
            obs.verdict = Some(verdict_name(r.verdict));
            obs.samples = r
                .rounds
                .iter()
                .map(|round| Sample {
                label: None,
                    param: Some(round.points as f64),
                    point: None,
                    value: Extended(round.max_distance),
                    status: round.status,
                })
                .collect();
            obs.details = details(&r);
        }
        Op::Equiv { a, b, extra, level } => {
            let scope = level.map_or(Scope::Full, Scope::Level);
            let r = norm_equivalent_on(a, b, domain, scope, extra).map_err(err)?;
            obs.verdict = Some(verdict_name(r.verdict));
            obs.samples = evidence_samples(&r);
            obs.details = details(&r);
        }
        Op::Component { a, b } => {
            let (v, r) = same_component(a, b, domain).map_err(err)?;
            obs.verdict = Some(verdict_name(v));
            obs.samples = evidence_samples(&r);
            obs.details = details(&r);
        }
        Op::Chain { a, b, radius, reference } => {
            let h = resolve(reference, domain).map_err(err)?;
            let r = uniform_chain(a.covariant(), b.covariant(), *radius, &h, domain).map_err(err)?;
            obs.verdict = Some(if r.certified { "Certified" } else { "NotCertified" }.into());
            obs.count = Some(r.centers.len());
            obs.samples = r
                .links
                .iter()
                .map(|e| Sample {
                label: None,
                    param: None,
                    point: None,
                    value: Extended(e.value),
                    status: e.status,
                })
                .collect();
            obs.details = details(&r);
        }
        Op::Monotonicity { subject, references } => {
            let order = order_of(0);
            let cases = match subject {
                MonotonicitySubject::Named { family, limit } => {
                    let refs = references
                        .iter()
                        .map(|r| resolve(r, domain))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(err)?;
                    vec![(family.family.clone(), limit.covariant().clone(), refs, domain.clone())]
                }
                MonotonicitySubject::Random(n) => {
                    let ex = random_exhaustion(domain).map_err(|e| e.to_string())?;
                    let d = Domain::new(random_chart(), ex, scenario.seed);
                    random_families(*n, task_seed(scenario.seed, index))
                        .into_iter()
                        .map(|c| (c.family.family, c.limit.covariant().clone(), vec![MetricField::euclidean(2)], d.clone()))
                        .collect()
                }
            };
            let mut rows = Vec::new();
            let mut verdict = Implication::Consistent;
            for (family, limit, refs, d) in cases {
                let cfg = ConvergeConfig {
                    order,
                    references: refs,
                };
                let mut v = [ConvergenceVerdict::Inconclusive; 3];
                for (slot, kind) in [TopologyKind::Open, TopologyKind::Global, TopologyKind::CompactOpen]
                    .into_iter()
                    .enumerate()
                {
                    v[slot] = converge_check(&family, &limit, kind, &cfg, &d).map_err(err)?.verdict;
                }
                let row = monotone(v);
                verdict = verdict.max(row);
                rows.push(serde_json::json!({
                    "family": family.name,
                    "open": v[0],
                    "global": v[1],
                    "compact_open": v[2],
                    "implication": row,
                }));
            }
            obs.verdict = Some(verdict_name(verdict));
            obs.count = Some(rows.len());
            obs.details = serde_json::Value::Array(rows);
        }
    }
    Ok(obs)
}

fn evidence_samples(r: &EquivalenceReport) -> Vec<Sample> {
    r.evidence
        .iter()
        .map(|e| Sample {
            label: Some(e.label.clone()),
            param: None,
            point: None,
            value: Extended(e.estimate.value),
            status: e.estimate.status,
        })
        .collect()
}

/// The exhaustion settings of `domain` carried over to the 2D chart of the
/// random families.
fn random_exhaustion(domain: &Domain) -> Result<CompactExhaustion, NormError> {
    let ex = &domain.exhaustion;
    CompactExhaustion::with_schedule(2, ex.r0(), ex.schedule().to_vec())
}

/// Outcome of checking `Open ⇒ Global ⇒ CompactOpen` on one family, in
/// increasing severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Implication {
    Consistent,
    Inconclusive,
    Violated,
}

/// A premise that converges with a conclusion that diverges violates the
/// chain; an inconclusive conclusion leaves it undecided.
pub fn monotone(v: [ConvergenceVerdict; 3]) -> Implication {
    let mut out = Implication::Consistent;
    for (premise, conclusion) in [(v[0], v[1]), (v[1], v[2])] {
        if premise == ConvergenceVerdict::Converges {
            match conclusion {
                ConvergenceVerdict::Diverges => return Implication::Violated,
                ConvergenceVerdict::Inconclusive => out = Implication::Inconclusive,
                ConvergenceVerdict::Converges => {}
            }
        }
    }
    out
}
