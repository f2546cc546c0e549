//! Subgradient runs and their recorded trajectories: the exact recurrence
//! x_{k+1} = x_k − α_k v_k, window diameters, tail diameters, convergence
//! verdicts, and the criticality check.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::schedule::StepSchedule;
use crate::minnorm::{min_norm_point, select_subgradient, SelectionPolicy, MINNORM_TOL};
use crate::piecewise::{PiecewiseError, PiecewiseFunction};

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub points: Vec<DVector<f64>>,
    pub subgradients: Vec<DVector<f64>>,
    pub steps: Vec<f64>,
    pub values: Vec<f64>,
    pub policy: SelectionPolicy,
    pub seed: u64,
    pub activity_tol: f64,
    /// set when the run left the stated box and was truncated
    pub left_domain: bool,
}

impl Trajectory {
    /// number of recorded steps (points.len() − 1)
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn last_point(&self) -> &DVector<f64> {
        self.points.last().expect("nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    ConvergedTo { point: Vec<f64>, tail_diameter: f64 },
    Oscillating { amplitude: f64 },
    Truncated,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum EngineError {
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("x0 lies outside the stated box of '{0}'")]
    X0OutsideBox(String),
    #[error(transparent)]
    Schedule(#[from] crate::engine::schedule::ScheduleError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
}

/// Run a subgradient sequence for `horizon` steps. Truncates (flagged, not an
/// error) as soon as an iterate leaves the stated box.
pub fn run(
    f: &PiecewiseFunction,
    x0: &DVector<f64>,
    schedule: &StepSchedule,
    policy: SelectionPolicy,
    horizon: usize,
    seed: u64,
    activity_tol: f64,
) -> Result<Trajectory, EngineError> {
    if horizon < 1 {
        return Err(EngineError::EmptyHorizon);
    }
    if !f.in_box(x0) {
        return Err(EngineError::X0OutsideBox(f.name.clone()));
    }
    schedule.validate(horizon)?;

    let mut rng = crate::seeded_rng(seed);
    let mut points = Vec::with_capacity(horizon + 1);
    let mut subgradients = Vec::with_capacity(horizon);
    let mut steps = Vec::with_capacity(horizon);
    let mut values = Vec::with_capacity(horizon + 1);
    let mut left_domain = false;

    let mut x = x0.clone();
    points.push(x.clone());
    values.push(f.evaluate(&x));
    for k in 0..horizon {
        let alpha = schedule.alpha(k);
        let sd = f.clarke_subdifferential(&x, activity_tol)?;
        let v = select_subgradient(&sd, policy, &mut rng);
        let next = &x - &v * alpha;
        if !f.in_box(&next) {
            left_domain = true;
            break;
        }
        subgradients.push(v);
        steps.push(alpha);
        values.push(f.evaluate(&next));
        points.push(next.clone());
        x = next;
    }

    Ok(Trajectory {
        points,
        subgradients,
        steps,
        values,
        policy,
        seed,
        activity_tol,
        left_domain,
    })
}

/// Exact maximum pairwise distance over the index window [a, b].
pub fn diameter(traj: &Trajectory, a: usize, b: usize) -> f64 {
    assert!(a <= b && b < traj.points.len());
    window_diameter(&traj.points[a..=b])
}

fn dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Quadratic reference implementation on a point slice.
pub fn window_diameter(points: &[DVector<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max(dist(&points[i], &points[j]));
        }
    }
    best
}

/// Same value with a bounding-box prefilter: a point whose farthest bbox
/// corner is within the current best cannot improve it and is skipped.
pub fn window_diameter_prefiltered(points: &[DVector<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points[0].len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut best = 0.0f64;
    // scan back to front so the box covers already-seen points
    for (idx, p) in points.iter().enumerate().rev() {
        let mut corner = 0.0;
        for d in 0..n {
            let gap = (p[d] - lo[d]).abs().max((p[d] - hi[d]).abs());
            corner += gap * gap;
        }
        if idx + 1 < points.len() && corner.sqrt() > best {
            for q in &points[idx + 1..] {
                best = best.max(dist(p, q));
            }
        }
        for d in 0..n {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    best
}

/// d_k = diam(x_{[k, K]}) for every k, nonincreasing in k. Computed back to
/// front with the bbox prefilter so long convergent tails stay cheap.
pub fn tail_diameters(traj: &Trajectory) -> Vec<f64> {
    let points = &traj.points;
    let total = points.len();
    let mut out = vec![0.0f64; total];
    if total == 0 {
        return out;
    }
    let n = points[0].len();
    let mut lo: Vec<f64> = (0..n).map(|d| points[total - 1][d]).collect();
    let mut hi = lo.clone();
    let mut best = 0.0f64;
    for k in (0..total - 1).rev() {
        let p = &points[k];
        let mut corner = 0.0;
        for d in 0..n {
            let gap = (p[d] - lo[d]).abs().max((p[d] - hi[d]).abs());
            corner += gap * gap;
        }
        if corner.sqrt() > best {
            for q in &points[k + 1..] {
                best = best.max(dist(p, q));
            }
        }
        for d in 0..n {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
        out[k] = best;
    }
    out
}

/// Verdict from the diameter of the last 10% of indices (a pragmatic Cauchy
/// proxy; the theory gives no finite-horizon convergence test).
pub fn detect_convergence(traj: &Trajectory, tol: f64) -> Verdict {
    if traj.left_domain {
        return Verdict::Truncated;
    }
    let total = traj.points.len();
    let start = total - (total / 10).max(1);
    let d = window_diameter_prefiltered(&traj.points[start..]);
    if d < tol {
        Verdict::ConvergedTo {
            point: traj.last_point().iter().copied().collect(),
            tail_diameter: d,
        }
    } else {
        Verdict::Oscillating { amplitude: d }
    }
}

/// 0 ∈ ∂f(x) up to `tol`, via the min-norm subgradient.
pub fn critical_point_check(
    f: &PiecewiseFunction,
    x: &DVector<f64>,
    tol: f64,
    activity_tol: f64,
) -> Result<bool, PiecewiseError> {
    let sd = f.clarke_subdifferential(x, activity_tol)?;
    Ok(min_norm_point(&sd.generators, MINNORM_TOL).norm() <= tol)
}
