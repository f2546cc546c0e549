//! Projected traces and their Lyapunov bookkeeping: y_k = P_M(x_k), the tail
//! sums g_k, the sequence z_k = f(y_k) + g_k, the per-step descent inequality,
//! and the projected-length bound.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::kl::KLFit;
use crate::diagnostics::{psi, DiagnosticsError, ProofConstants};
use crate::engine::Trajectory;
use crate::piecewise::PiecewiseFunction;
use crate::strata::Stratum;

#[derive(Clone, Debug)]
pub struct ProjectedTrace {
    pub stratum_id: usize,
    /// None marks indices where the projection left the single-valued tube
    pub y: Vec<Option<DVector<f64>>>,
    pub d: Vec<f64>,
    pub g: Vec<f64>,
    pub z: Vec<f64>,
    pub outside_tube: Vec<usize>,
    pub steps: Vec<f64>,
}

/// Project every iterate onto the stratum and assemble d, g, z. The tail sums
/// are built by the suffix recursion g_k = g_{k+1} + c·α_k^{1+β}, so the
/// telescoping identity g_k − g_{k+1} = c·α_k^{1+β} is exact.
pub fn projected_trace(
    f: &PiecewiseFunction,
    traj: &Trajectory,
    stratum: &Stratum,
    pc: &ProofConstants,
) -> ProjectedTrace {
    let total = traj.points.len();
    let mut g = vec![0.0f64; total];
    for k in (0..traj.horizon()).rev() {
        g[k] = g[k + 1] + pc.c * traj.steps[k].powf(1.0 + pc.beta);
    }
    let mut y = Vec::with_capacity(total);
    let mut d = Vec::with_capacity(total);
    let mut z = Vec::with_capacity(total);
    let mut outside = Vec::new();
    for (k, x) in traj.points.iter().enumerate() {
        match stratum.project(x) {
            Ok(p) => {
                d.push((x - &p).norm());
                z.push(f.evaluate(&p) + g[k]);
                y.push(Some(p));
            }
            Err(_) => {
                outside.push(k);
                d.push(f64::NAN);
                z.push(f64::NAN);
                y.push(None);
            }
        }
    }
    ProjectedTrace {
        stratum_id: stratum.id,
        y,
        d,
        g,
        z,
        outside_tube: outside,
        steps: traj.steps.clone(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescentReport {
    /// indices where ½·α_k·|∇_M f(y_k)|² ≤ z_k − z_{k+1} fails, with deficits
    pub violations: Vec<(usize, f64)>,
    pub worst_deficit: f64,
    /// indices where z_{k+1} > z_k
    pub z_monotonicity_violations: Vec<usize>,
    pub checked_steps: usize,
}

impl DescentReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty() && self.z_monotonicity_violations.is_empty()
    }
}

/// Check the per-step descent inequality and z-monotonicity along a complete
/// projected trace.
pub fn check_descent(
    pt: &ProjectedTrace,
    f: &PiecewiseFunction,
    stratum: &Stratum,
    activity_tol: f64,
) -> Result<DescentReport, DiagnosticsError> {
    if !pt.outside_tube.is_empty() {
        return Err(DiagnosticsError::IncompleteTrace(pt.outside_tube.clone()));
    }
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    let mut z_viol = Vec::new();
    let horizon = pt.steps.len();
    for k in 0..horizon {
        let y = pt.y[k].as_ref().expect("complete trace");
        let grad = f.riemannian_gradient(stratum, y, activity_tol)?;
        let lhs = 0.5 * pt.steps[k] * grad.norm_squared();
        let drop = pt.z[k] - pt.z[k + 1];
        let slack = 1e-12 * (1.0 + pt.z[k].abs());
        if lhs > drop + slack {
            violations.push((k, lhs - drop));
            worst = worst.max(lhs - drop);
        }
        if pt.z[k + 1] > pt.z[k] + slack {
            z_viol.push(k);
        }
    }
    Ok(DescentReport {
        violations,
        worst_deficit: worst,
        z_monotonicity_violations: z_viol,
        checked_steps: horizon,
    })
}

/// Per-run Lipschitz-scale constants of the projected-length bound; corpus
/// entries ship values consistent with their stated boxes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LipschitzScales {
    /// joint Lipschitz constant L ≥ 1 of f and P_M on the window
    pub l: f64,
    /// Riemannian-gradient Lipschitz constant on the stratum
    pub l_f: f64,
    /// subdifferential-to-tangent alignment constant
    pub l_v: f64,
    /// projection-derivative Lipschitz constant
    pub l_p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LengthReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub psi_term: f64,
    pub curvature_term: f64,
    pub alignment_term: f64,
    pub tail_term: f64,
    pub max_step_term: f64,
}

/// The projected-length inequality
/// Σ|y_{k+1}−y_k| ≤ 2L(ψ(z₀)−ψ(z_K)) + Σ(L³L_f α² + Lα L_v d + Lα/ψ'(g)) + L² max α
/// with ψ the desingularizing function normalized by the fitted (θ, η).
pub fn projected_length_check(
    pt: &ProjectedTrace,
    klfit: &KLFit,
    consts: &LipschitzScales,
) -> Result<LengthReport, DiagnosticsError> {
    if !pt.outside_tube.is_empty() {
        return Err(DiagnosticsError::IncompleteTrace(pt.outside_tube.clone()));
    }
    let theta = klfit.theta;
    let eta = klfit.eta;
    let desing = |t: f64| psi(t, theta) / ((1.0 - theta) * eta);
    let horizon = pt.steps.len();

    let mut lhs = 0.0;
    for k in 0..horizon {
        let a = pt.y[k].as_ref().unwrap();
        let b = pt.y[k + 1].as_ref().unwrap();
        lhs += (b - a).norm();
    }

    let l = consts.l;
    let psi_term = 2.0 * l * (desing(pt.z[0]) - desing(pt.z[horizon]));
    let mut curvature_term = 0.0;
    let mut alignment_term = 0.0;
    let mut tail_term = 0.0;
    for k in 0..horizon {
        let alpha = pt.steps[k];
        curvature_term += l.powi(3) * consts.l_f * alpha * alpha;
        alignment_term += l * alpha * consts.l_v * pt.d[k];
        // 1/ψ'(g) = η·g^θ
        tail_term += l * alpha * eta * pt.g[k].powf(theta);
    }
    let max_step_term = l * l * pt.steps.iter().cloned().fold(0.0, f64::max);
    let rhs = psi_term + curvature_term + alignment_term + tail_term + max_step_term;
    Ok(LengthReport {
        lhs,
        rhs,
        satisfied: lhs <= rhs,
        psi_term,
        curvature_term,
        alignment_term,
        tail_term,
        max_step_term,
    })
}
