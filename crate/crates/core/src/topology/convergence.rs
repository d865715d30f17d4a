use super::bounding::canonical_for;
use super::{ck_norms, combine, derivative_tower, worst, TopologyError, TopologyKind};
use crate::expr::{ParamBinding, ScalarExpr};
use crate::geometry::{christoffel, Connection, MetricField, TensorField};
use crate::norms::{estimate_sup, Domain, FiberNorm, NormError, Scope, SupStatus, BLOWUP_THRESHOLD};
use serde::Serialize;

/// Differences smaller than this count as exactly zero in support tests.
const SUPPORT_TOL: f64 = 1e-14;
/// A trace vanishes if its final value is below this.
const VANISH_ABS: f64 = 1e-9;
/// Or if it decays below this fraction of its first value.
const VANISH_REL: f64 = 1e-3;
const SHRINK_RATIO: f64 = 0.75;
const STALL_RATIO: f64 = 0.95;

/// A one-parameter family `λ ↦ K(λ)` sampled at `values`.
#[derive(Debug, Clone)]
pub struct Family {
    pub name: String,
    pub param: String,
    pub field: TensorField,
    pub values: Vec<f64>,
    /// Probe points that may depend on the parameter.
    pub probes: Vec<Vec<ScalarExpr>>,
}

impl Family {
    pub fn new(name: &str, param: &str, field: TensorField, values: Vec<f64>) -> Self {
        Family {
            name: name.into(),
            param: param.into(),
            field,
            values,
            probes: Vec::new(),
        }
    }

    pub fn with_probes(mut self, probes: Vec<Vec<ScalarExpr>>) -> Self {
        self.probes = probes;
        self
    }

    pub fn member(&self, value: f64) -> TensorField {
        self.field.bind_params(&ParamBinding::new().with(&self.param, value))
    }

    pub fn member_probes(&self, value: f64, domain: &Domain) -> Result<Vec<Vec<f64>>, TopologyError> {
        let mut binding = domain.binding.clone();
        binding.set(&self.param, value);
        self.probes
            .iter()
            .map(|p| {
                p.iter()
                    .map(|c| {
                        c.evaluate(&[], &[], &binding)
                            .map_err(|e| TopologyError::Norm(NormError::eval(&[], e)))
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ConvergeConfig {
    /// Highest derivative order compared.
    pub order: usize,
    /// Riemannian references. The global check needs convergence under
    /// each; the other checks use the first.
    pub references: Vec<MetricField>,
}

impl ConvergeConfig {
    pub fn new(dim: usize) -> Self {
        ConvergeConfig {
            order: 0,
            references: vec![MetricField::euclidean(dim)],
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_reference(mut self, h: MetricField) -> Self {
        self.references.push(h);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub param: f64,
    #[serde(serialize_with = "crate::serde_ext::extended")]
    pub value: f64,
    pub status: SupStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub label: String,
    pub points: Vec<TracePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvergenceVerdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub family: String,
    pub kind: TopologyKind,
    pub order: usize,
    pub verdict: ConvergenceVerdict,
    pub witness: Option<String>,
    pub traces: Vec<Trace>,
}

/// The last three values strictly decrease and the final one is below
/// `1e-3` of the first, or the final value is below `1e-9`.
pub fn vanishes(values: &[f64]) -> bool {
    let Some(&last) = values.last() else {
        return false;
    };
    if last < VANISH_ABS {
        return true;
    }
    if values.len() < 3 {
        return false;
    }
    let tail = &values[values.len() - 3..];
    tail[0] > tail[1] && tail[1] > tail[2] && last < VANISH_REL * values[0]
}

/// Verdict on a distance trace. Diverges if the tail (last three points)
/// has an unbounded estimate, or if bounded values do not decrease from
/// first to last. Converges if the tail is bounded and the trace vanishes.
pub fn judge_trace(points: &[TracePoint]) -> (ConvergenceVerdict, Option<String>) {
    let tail = &points[points.len().saturating_sub(3)..];
    if let Some(p) = tail.iter().find(|p| p.status == SupStatus::Unbounded) {
        return (
            ConvergenceVerdict::Diverges,
            Some(format!("distance unbounded at parameter {}", p.param)),
        );
    }
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    if tail.iter().all(|p| p.status == SupStatus::Bounded) && vanishes(&values) {
        return (ConvergenceVerdict::Converges, None);
    }
    let bounded: Vec<&TracePoint> = points.iter().filter(|p| p.status == SupStatus::Bounded).collect();
    if let (Some(first), Some(last)) = (bounded.first(), bounded.last()) {
        if bounded.len() >= 2 && last.value >= first.value && last.value > VANISH_ABS {
            return (
                ConvergenceVerdict::Diverges,
                Some(format!(
                    "distance {} at parameter {} does not fall below {} at parameter {}",
                    last.value, last.param, first.value, first.param
                )),
            );
        }
    }
    (ConvergenceVerdict::Inconclusive, None)
}

fn merge(verdicts: impl IntoIterator<Item = (ConvergenceVerdict, Option<String>)>) -> (ConvergenceVerdict, Option<String>) {
    let mut all_converge = true;
    for (v, w) in verdicts {
        match v {
            ConvergenceVerdict::Diverges => return (v, w),
            ConvergenceVerdict::Inconclusive => all_converge = false,
            ConvergenceVerdict::Converges => {}
        }
    }
    if all_converge {
        (ConvergenceVerdict::Converges, None)
    } else {
        (ConvergenceVerdict::Inconclusive, None)
    }
}

/// Result of looking for a compact set outside of which a difference
/// vanishes identically.
struct Support {
    /// Smallest level `i <= L - 2` beyond whose box every sampled component
    /// is zero.
    level: Option<usize>,
    /// Largest component outside the level `L - 2` box, and where.
    witness: Option<(f64, Vec<f64>)>,
}

/// Samples the components of `d` on the shell of each level (points of its
/// grid outside the previous box).
fn support_test(d: &TensorField, domain: &Domain) -> Result<Support, TopologyError> {
    let ex = &domain.exhaustion;
    let last = ex.levels();
    if d.is_structurally_zero() {
        return Ok(Support {
            level: Some(0),
            witness: None,
        });
    }
    let prog = d.compile(&domain.chart, &domain.binding).map_err(|e| NormError::eval(&[], e))?;
    let mut scratch = prog.scratch();
    let mut out = vec![0.0; prog.output_count()];
    let mut shell_max = vec![(0.0f64, Vec::new()); last + 1];
    let mut failure = None;
    for j in 1..=last {
        let best = &mut shell_max[j];
        ex.grid_points(j, |p| {
            if failure.is_some() || ex.contains(j - 1, p) {
                return;
            }
            match prog.eval_into(p, &mut scratch, &mut out) {
                Ok(()) => {
                    let m = out.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                    if m > best.0 {
                        *best = (m, p.to_vec());
                    }
                }
                Err(crate::expr::EvalError::Overflow) => *best = (f64::INFINITY, p.to_vec()),
                Err(e) => failure = Some(NormError::eval(p, e)),
            }
        });
        if let Some(e) = failure.take() {
            return Err(e.into());
        }
    }
    let mut level = None;
    for i in (0..=last.saturating_sub(2)).rev() {
        if shell_max[i + 1..].iter().all(|(m, _)| *m < SUPPORT_TOL) {
            level = Some(i);
        } else {
            break;
        }
    }
    let witness = shell_max[last.saturating_sub(1).max(1)..]
        .iter()
        .filter(|(m, _)| *m >= SUPPORT_TOL)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .cloned();
    Ok(Support { level, witness })
}

/// `sup exp(Σx²) max_j |∇^j D|_h`, the adversarial weight for the open
/// topology.
fn weighted_distance(
    d: &TensorField,
    h: &MetricField,
    conn: &Connection,
    domain: &Domain,
    order: usize,
    probes: &[Vec<f64>],
) -> Result<(f64, SupStatus), TopologyError> {
    let tower = derivative_tower(d, conn, domain, order);
    if tower.iter().all(TensorField::is_structurally_zero) {
        return Ok((0.0, SupStatus::Bounded));
    }
    let mut norms = tower
        .iter()
        .map(|t| FiberNorm::new(t, h, &domain.chart, &domain.binding))
        .collect::<Result<Vec<_>, _>>()?;
    let est = estimate_sup(&domain.exhaustion, Scope::Full, probes, |p| {
        let mut v = 0.0f64;
        for n in norms.iter_mut() {
            v = v.max(n.value(p)?);
        }
        if v == 0.0 {
            return Ok(Some(0.0));
        }
        let w = p.iter().map(|x| x * x).sum::<f64>().exp();
        Ok(Some(w * v))
    })?;
    Ok((est.value, est.status))
}

fn connection_for(h: &MetricField, domain: &Domain, order: usize) -> Connection {
    if order > 0 {
        christoffel(h, &domain.chart)
    } else {
        Connection::flat(h.dim())
    }
}

/// Whether `family` converges to `limit` in the given topology.
///
/// * Compact-open: for each level box, the sup distance under the first
///   reference must vanish along the family.
/// * Global: the sup distance over ℝⁿ must vanish under every reference,
///   each first made canonical for the limit (`h*^{ab} = h0^{ab}/|limit|_{h0}`)
///   when the limit is a (0,2) field.
/// * Open: the tail of the family must differ from the limit only inside
///   some compact level, and the distance weighted by `exp(Σx²)` must
///   vanish.
pub fn converge_check(
    family: &Family,
    limit: &TensorField,
    kind: TopologyKind,
    config: &ConvergeConfig,
    domain: &Domain,
) -> Result<ConvergenceReport, TopologyError> {
    if family.values.is_empty() {
        return Err(TopologyError::InvalidArgument("family has no parameter values".into()));
    }
    if config.references.is_empty() {
        return Err(TopologyError::InvalidArgument("no reference metric".into()));
    }
    let order = config.order;
    let diffs = family
        .values
        .iter()
        .map(|&v| family.member(v).sub(limit))
        .collect::<Result<Vec<_>, _>>()?;
    let probes = family
        .values
        .iter()
        .map(|&v| family.member_probes(v, domain))
        .collect::<Result<Vec<_>, _>>()?;
    let mut traces = Vec::new();
    let (verdict, witness) = match kind {
        TopologyKind::Global => {
            let mut verdicts = Vec::new();
            for (r, h0) in config.references.iter().enumerate() {
                let h = &if limit.rank() == (0, 2) {
                    canonical_for(limit, h0, domain)?
                } else {
                    h0.clone()
                };
                let mut points = Vec::new();
                for ((d, v), pr) in diffs.iter().zip(&family.values).zip(&probes) {
                    let (value, status) = combine(&ck_norms(d, h, domain, Scope::Full, order, pr)?);
                    points.push(TracePoint {
                        param: *v,
                        value,
                        status,
                    });
                }
                let (v, w) = judge_trace(&points);
                verdicts.push((v, w.map(|w| format!("reference {r}: {w}"))));
                traces.push(Trace {
                    label: format!("global/reference {r}"),
                    points,
                });
                if v == ConvergenceVerdict::Diverges {
                    break;
                }
            }
            merge(verdicts)
        }
        TopologyKind::CompactOpen => {
            let h = &config.references[0];
            let levels = domain.exhaustion.levels();
            let mut per_level: Vec<Vec<TracePoint>> = vec![Vec::new(); levels + 1];
            for ((d, v), pr) in diffs.iter().zip(&family.values).zip(&probes) {
                let ests = ck_norms(d, h, domain, Scope::Level(levels), order, pr)?;
                for (i, pts) in per_level.iter_mut().enumerate() {
                    let value = ests.iter().map(|e| e.levels[i]).fold(0.0, f64::max);
                    let status = if value < BLOWUP_THRESHOLD {
                        SupStatus::Bounded
                    } else {
                        SupStatus::Unbounded
                    };
                    pts.push(TracePoint {
                        param: *v,
                        value,
                        status,
                    });
                }
            }
            let mut verdicts = Vec::new();
            for (i, points) in per_level.into_iter().enumerate() {
                let (v, w) = judge_trace(&points);
                verdicts.push((v, w.map(|w| format!("level {i}: {w}"))));
                traces.push(Trace {
                    label: format!("compact_open/level {i}"),
                    points,
                });
            }
            merge(verdicts)
        }
        TopologyKind::Open => {
            let h = &config.references[0];
            let tail = diffs.len().saturating_sub(3);
            let mut support_failure = None;
            for (d, v) in diffs[tail..].iter().zip(&family.values[tail..]) {
                let s = support_test(d, domain)?;
                if s.level.is_none() {
                    let detail = match s.witness {
                        Some((m, p)) => format!("component {m:e} at {p:?}"),
                        None => "nonzero difference on an outer shell".into(),
                    };
                    support_failure = Some(format!(
                        "difference at parameter {v} does not vanish outside any compact level: {detail}"
                    ));
                    break;
                }
            }
            if let Some(w) = support_failure {
                (ConvergenceVerdict::Diverges, Some(w))
            } else {
                let conn = connection_for(h, domain, order);
                let mut points = Vec::new();
                for ((d, v), pr) in diffs.iter().zip(&family.values).zip(&probes) {
                    let (value, status) = weighted_distance(d, h, &conn, domain, order, pr)?;
                    points.push(TracePoint {
                        param: *v,
                        value,
                        status,
                    });
                }
                let (v, w) = judge_trace(&points);
                traces.push(Trace {
                    label: "open/weighted exp(|x|^2)".into(),
                    points,
                });
                (v, w.map(|w| format!("weighted distance: {w}")))
            }
        }
    };
    Ok(ConvergenceReport {
        family: family.name.clone(),
        kind,
        order,
        verdict,
        witness,
        traces,
    })
}

#[derive(Debug, Clone)]
pub struct ContinuityConfig {
    pub converge: ConvergeConfig,
    /// Points in the first parameter grid; each later round doubles the
    /// number of intervals.
    pub base_points: usize,
    pub rounds: usize,
}

impl ContinuityConfig {
    pub fn new(dim: usize) -> Self {
        ContinuityConfig {
            converge: ConvergeConfig::new(dim),
            base_points: 11,
            rounds: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContinuityVerdict {
    Continuous,
    Discontinuous,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRound {
    pub points: usize,
    /// Largest distance between consecutive family members.
    #[serde(serialize_with = "crate::serde_ext::extended")]
    pub max_distance: f64,
    pub status: SupStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub family: String,
    pub kind: TopologyKind,
    pub verdict: ContinuityVerdict,
    pub witness: Option<String>,
    pub rounds: Vec<ContinuityRound>,
}

/// Whether `λ ↦ family(λ)` is continuous on `[lo, hi]` (with `lo > 0`).
///
/// The largest distance between neighbors on successively refined grids
/// must shrink by a factor `0.75` per round, or fall below `1e-9`. It is
/// discontinuous if a distance is unbounded, the open-topology support
/// test fails, or the distances stall (each round keeps `≥ 0.95` of the
/// previous). Global distances are taken under the canonical reference of
/// the left member of each pair.
pub fn continuity_check(
    family: &Family,
    interval: (f64, f64),
    kind: TopologyKind,
    config: &ContinuityConfig,
    domain: &Domain,
) -> Result<ContinuityReport, TopologyError> {
    let (lo, hi) = interval;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(TopologyError::InvalidArgument(format!(
            "parameter interval [{lo}, {hi}] must satisfy 0 < lo < hi"
        )));
    }
    if config.base_points < 2 || config.rounds == 0 {
        return Err(TopologyError::InvalidArgument("continuity grid needs at least two points and one round".into()));
    }
    let order = config.converge.order;
    let h0 = config
        .converge
        .references
        .first()
        .ok_or_else(|| TopologyError::InvalidArgument("no reference metric".into()))?;
    let mut rounds = Vec::new();
    let mut witness = None;
    for r in 0..config.rounds {
        let count = (config.base_points - 1) * (1 << r) + 1;
        let grid: Vec<f64> = (0..count)
            .map(|i| lo + (hi - lo) * (i as f64 / (count - 1) as f64))
            .collect();
        let members: Vec<TensorField> = grid.iter().map(|&v| family.member(v)).collect();
        let mut max_distance = 0.0f64;
        let mut statuses = Vec::new();
        for i in 0..count - 1 {
            let d = members[i + 1].sub(&members[i])?;
            let probes = family.member_probes(grid[i], domain)?;
            let (value, status) = match kind {
                TopologyKind::Global => {
                    let h = canonical_for(&members[i], h0, domain)?;
                    combine(&ck_norms(&d, &h, domain, Scope::Full, order, &probes)?)
                }
                TopologyKind::CompactOpen => {
                    let level = domain.exhaustion.levels();
                    combine(&ck_norms(&d, h0, domain, Scope::Level(level), order, &probes)?)
                }
                TopologyKind::Open => {
                    let s = support_test(&d, domain)?;
                    if s.level.is_none() {
                        witness = Some(format!(
                            "members at {} and {} differ outside every compact level{}",
                            grid[i],
                            grid[i + 1],
                            s.witness.map(|(m, p)| format!(" ({m:e} at {p:?})")).unwrap_or_default()
                        ));
                        (f64::INFINITY, SupStatus::Unbounded)
                    } else {
                        let conn = connection_for(h0, domain, order);
                        weighted_distance(&d, h0, &conn, domain, order, &probes)?
                    }
                }
            };
            if status == SupStatus::Unbounded && witness.is_none() {
                witness = Some(format!("distance between members at {} and {} is unbounded", grid[i], grid[i + 1]));
            }
            max_distance = max_distance.max(value);
            statuses.push(status);
            if status == SupStatus::Unbounded {
                break;
            }
        }
        let status = worst(statuses);
        rounds.push(ContinuityRound {
            points: count,
            max_distance,
            status,
        });
        if status == SupStatus::Unbounded {
            break;
        }
    }
    let verdict = continuity_verdict(&rounds);
    if verdict == ContinuityVerdict::Discontinuous && witness.is_none() {
        witness = Some(format!(
            "neighbor distances stall at {:?}",
            rounds.iter().map(|r| r.max_distance).collect::<Vec<_>>()
        ));
    }
    Ok(ContinuityReport {
        family: family.name.clone(),
        kind,
        verdict,
        witness,
        rounds,
    })
}

fn continuity_verdict(rounds: &[ContinuityRound]) -> ContinuityVerdict {
    if rounds.iter().any(|r| r.status == SupStatus::Unbounded) {
        return ContinuityVerdict::Discontinuous;
    }
    let d: Vec<f64> = rounds.iter().map(|r| r.max_distance).collect();
    let last = *d.last().expect("at least one round");
    let all_bounded = rounds.iter().all(|r| r.status == SupStatus::Bounded);
    let shrinking = d.windows(2).all(|w| w[1] <= SHRINK_RATIO * w[0]);
    if all_bounded && (shrinking || last < VANISH_ABS) {
        return ContinuityVerdict::Continuous;
    }
    let stalled = d.len() >= 2 && d.windows(2).all(|w| w[1] >= STALL_RATIO * w[0]);
    if stalled && last >= VANISH_ABS {
        return ContinuityVerdict::Discontinuous;
    }
    ContinuityVerdict::Inconclusive
}
