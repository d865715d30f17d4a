use super::{Domain, FiberNorm, NormError};
use crate::expr::EvalError;
use crate::geometry::{MetricField, TensorField};
use serde::{Deserialize, Serialize};

/// Values at or above this are treated as infinite.
pub const BLOWUP_THRESHOLD: f64 = 1e12;
const PLATEAU_TOL: f64 = 1e-3;
/// Level maxima at or below this are roundoff and never count as growth.
const NOISE_FLOOR: f64 = 1e-12;
const REFINE_POINTS: usize = 11;

/// Grid points per axis for each level `0..=levels`: `base` through level 3,
/// then two fewer per level down to `min(base, 7)`.
pub fn grid_schedule(base: usize, levels: usize) -> Vec<usize> {
    let floor = base.min(7);
    (0..=levels)
        .map(|i| if i <= 3 { base } else { base.saturating_sub(2 * (i - 3)).max(floor) })
        .collect()
}

/// Nested boxes `[-R0 2^i, R0 2^i]^n` for `i = 0..=L`, each sampled on a
/// uniform grid, plus optional probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactExhaustion {
    dim: usize,
    r0: f64,
    grid: Vec<usize>,
    probes: Vec<Vec<f64>>,
}

impl CompactExhaustion {
    pub fn new(dim: usize, r0: f64, levels: usize, base_grid: usize) -> Result<Self, NormError> {
        Self::with_schedule(dim, r0, grid_schedule(base_grid, levels))
    }

    /// Explicit per-level grid sizes; `grid.len() - 1` is the last level.
    pub fn with_schedule(dim: usize, r0: f64, grid: Vec<usize>) -> Result<Self, NormError> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(NormError::InvalidExhaustion(format!("R0 must be positive, got {r0}")));
        }
        if grid.is_empty() {
            return Err(NormError::InvalidExhaustion("at least one level is required".into()));
        }
        if let Some(n) = grid.iter().find(|&&n| n < 3) {
            return Err(NormError::InvalidExhaustion(format!("grid size {n} is below 3")));
        }
        Ok(CompactExhaustion {
            dim,
            r0,
            grid,
            probes: Vec::new(),
        })
    }

    /// `R0 = 1`, levels `0..=8`, base grid 17.
    pub fn standard(dim: usize) -> Self {
        Self::new(dim, 1.0, 8, 17).expect("static exhaustion")
    }

    pub fn with_probes(mut self, probes: Vec<Vec<f64>>) -> Result<Self, NormError> {
        if let Some(p) = probes.iter().find(|p| p.len() != self.dim) {
            return Err(NormError::InvalidExhaustion(format!("probe {p:?} has the wrong dimension")));
        }
        let last = self.levels();
        if let Some(p) = probes.iter().find(|p| !self.contains(last, p)) {
            return Err(NormError::InvalidExhaustion(format!("probe {p:?} lies outside every level")));
        }
        self.probes = probes;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Index of the last level.
    pub fn levels(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn grid(&self, level: usize) -> usize {
        self.grid[level]
    }

    pub fn schedule(&self) -> &[usize] {
        &self.grid
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn half_width(&self, level: usize) -> f64 {
        self.r0 * 2f64.powi(level as i32)
    }

    pub fn contains(&self, level: usize, p: &[f64]) -> bool {
        let w = self.half_width(level) * (1.0 + 1e-12);
        p.iter().all(|x| x.abs() <= w)
    }

    /// Visits every grid point of `level` in lexicographic order.
    pub fn grid_points(&self, level: usize, mut visit: impl FnMut(&[f64])) {
        let w = self.half_width(level);
        let lo = vec![-w; self.dim];
        let hi = vec![w; self.dim];
        let _ = scan_box(&lo, &hi, self.grid[level], &mut |p| {
            visit(p);
            Ok(false)
        });
    }
}

/// Visits a `count^n` grid over `[lo, hi]`; the visitor returns `true` to
/// stop early.
fn scan_box(
    lo: &[f64],
    hi: &[f64],
    count: usize,
    visit: &mut dyn FnMut(&[f64]) -> Result<bool, NormError>,
) -> Result<(), NormError> {
    let n = lo.len();
    let denom = (count - 1) as f64;
    let axis: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..count).map(|k| lo[j] + (hi[j] - lo[j]) * (k as f64 / denom)).collect())
        .collect();
    let mut idx = vec![0usize; n];
    let mut p: Vec<f64> = axis.iter().map(|a| a[0]).collect();
    loop {
        if visit(&p)? {
            return Ok(());
        }
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(());
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < count {
                p[j] = axis[j][idx[j]];
                break;
            }
            idx[j] = 0;
            p[j] = axis[j][0];
        }
    }
}

/// Where a sup is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// The box of one level.
    Level(usize),
    /// All of ℝⁿ, approached through every level.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupStatus {
    Bounded,
    Unbounded,
    Inconclusive,
}

/// A sampled supremum with its per-level running maxima.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupEstimate {
    #[serde(serialize_with = "crate::serde_ext::extended")]
    pub value: f64,
    pub status: SupStatus,
    /// Running maximum after each level, so `levels[i]` estimates the sup
    /// over the level-`i` box.
    #[serde(serialize_with = "crate::serde_ext::extended_vec")]
    pub levels: Vec<f64>,
    pub argmax: Option<Vec<f64>>,
}

impl SupEstimate {
    pub fn is_bounded(&self) -> bool {
        self.status == SupStatus::Bounded
    }

    pub fn is_unbounded(&self) -> bool {
        self.status == SupStatus::Unbounded
    }
}

/// Status of a sup over all of ℝⁿ from its level trace. Unbounded: the
/// threshold is reached, or the last two level pairs at least double from a
/// start above roundoff. Bounded: the last two levels agree within
/// `1e-3·(1+s_L)`. Growth is tested first because the plateau tolerance has
/// an absolute floor that would accept a doubling trace of small values.
pub fn judge_full(levels: &[f64]) -> SupStatus {
    let l = levels.len() - 1;
    let s_l = levels[l];
    if !(s_l < BLOWUP_THRESHOLD) {
        return SupStatus::Unbounded;
    }
    if l >= 2 {
        let (a, b) = (levels[l - 2], levels[l - 1]);
        if a > NOISE_FLOOR && b >= 2.0 * a && s_l >= 2.0 * b {
            return SupStatus::Unbounded;
        }
    }
    if l >= 1 {
        let prev = levels[l - 1];
        if (s_l - prev).abs() <= PLATEAU_TOL * (1.0 + s_l.abs()) {
            return SupStatus::Bounded;
        }
    }
    SupStatus::Inconclusive
}

/// A sup over a compact box is finite, so only the threshold matters.
fn judge_level(v: f64) -> SupStatus {
    if v < BLOWUP_THRESHOLD {
        SupStatus::Bounded
    } else {
        SupStatus::Unbounded
    }
}

struct Tracker {
    best: f64,
    argmax: Option<Vec<f64>>,
}

impl Tracker {
    fn offer<F>(&mut self, p: &[f64], field: &mut F) -> Result<bool, NormError>
    where
        F: FnMut(&[f64]) -> Result<Option<f64>, EvalError>,
    {
        let v = match field(p) {
            Ok(Some(v)) if v.is_nan() => f64::INFINITY,
            Ok(Some(v)) => v,
            Ok(None) => return Ok(false),
            Err(EvalError::Overflow) => f64::INFINITY,
            Err(e) => return Err(NormError::eval(p, e)),
        };
        if v > self.best || self.argmax.is_none() {
            self.best = v;
            self.argmax = Some(p.to_vec());
        }
        Ok(self.best == f64::INFINITY)
    }
}

/// Samples `field` over the exhaustion and reports the running maximum per
/// level. `Ok(None)` from the field skips a point; an overflow counts as
/// `+∞`; any other evaluation error is returned with its point.
///
/// Each level visits its grid, the probes, then an 11-per-axis grid one
/// spacing wide around the running argmax when that lies in the box. A
/// level scope only takes probes inside its box; the full scope takes
/// every probe at every level, since each is a point of the manifold.
pub fn estimate_sup<F>(
    ex: &CompactExhaustion,
    scope: Scope,
    extra_probes: &[Vec<f64>],
    mut field: F,
) -> Result<SupEstimate, NormError>
where
    F: FnMut(&[f64]) -> Result<Option<f64>, EvalError>,
{
    let last = match scope {
        Scope::Full => ex.levels(),
        Scope::Level(i) if i <= ex.levels() => i,
        Scope::Level(i) => {
            return Err(NormError::InvalidExhaustion(format!(
                "level {i} exceeds the last level {}",
                ex.levels()
            )))
        }
    };
    let mut t = Tracker {
        best: f64::NEG_INFINITY,
        argmax: None,
    };
    let mut levels = Vec::with_capacity(last + 1);
    let n = ex.dim();
    for i in 0..=last {
        if t.best < f64::INFINITY {
            let w = ex.half_width(i);
            let lo = vec![-w; n];
            let hi = vec![w; n];
            scan_box(&lo, &hi, ex.grid(i), &mut |p| t.offer(p, &mut field))?;
            for p in ex.probes().iter().chain(extra_probes) {
                if t.best < f64::INFINITY && (scope == Scope::Full || ex.contains(i, p)) {
                    t.offer(p, &mut field)?;
                }
            }
            let argmax = t.argmax.clone().filter(|c| ex.contains(i, c));
            if let (Some(c), true) = (argmax, t.best < f64::INFINITY) {
                let half = w / (ex.grid(i) - 1) as f64;
                let rlo: Vec<f64> = c.iter().map(|x| (x - half).max(-w)).collect();
                let rhi: Vec<f64> = c.iter().map(|x| (x + half).min(w)).collect();
                scan_box(&rlo, &rhi, REFINE_POINTS, &mut |p| t.offer(p, &mut field))?;
            }
        }
        levels.push(if t.argmax.is_some() { t.best } else { 0.0 });
    }
    let value = *levels.last().expect("at least one level");
    let status = match scope {
        Scope::Full => judge_full(&levels),
        Scope::Level(_) => judge_level(value),
    };
    Ok(SupEstimate {
        value,
        status,
        levels,
        argmax: t.argmax,
    })
}

/// `‖K‖_{f,scope}`: the sup of the fiber norm `|K|_f`.
pub fn uniform_norm(
    k: &TensorField,
    f: &MetricField,
    domain: &Domain,
    scope: Scope,
    extra_probes: &[Vec<f64>],
) -> Result<SupEstimate, NormError> {
    let mut fnorm = FiberNorm::new(k, f, &domain.chart, &domain.binding)?;
    if k.is_structurally_zero() {
        let levels = match scope {
            Scope::Full => domain.exhaustion.levels() + 1,
            Scope::Level(i) => i + 1,
        };
        return Ok(SupEstimate {
            value: 0.0,
            status: SupStatus::Bounded,
            levels: vec![0.0; levels],
            argmax: None,
        });
    }
    estimate_sup(&domain.exhaustion, scope, extra_probes, |p| fnorm.value(p).map(Some))
}
