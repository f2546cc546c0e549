//! Proof-quantity instrumentation over recorded trajectories: the
//! desingularizing reparametrization and its fits, stratum-neighborhood
//! membership, the crossing-index bookkeeping, projected-iterate Lyapunov
//! sequences, and the diameter bound with its fitted witnesses.

pub mod bound;
pub mod indices;
pub mod kl;
pub mod projected;

pub use bound::{
    cauchy_rate_probe, check_diameter_bound, fit_sigma, diameter_bound_rhs, BoundComponents, BoundReport,
    CauchyReport, FitInput,
};
pub use indices::{extract_indices, in_neighborhood, neighborhood_membership, IndexTrace};
pub use kl::{estimate_kl, KLFit};
pub use projected::{
    check_descent, projected_length_check, projected_trace, DescentReport, LipschitzScales,
    LengthReport, ProjectedTrace,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::strata::{ExponentAssignment, Stratification};

/// The sign-odd desingularizing power ψ(t) = sgn(t)·|t|^{1−θ}.
pub fn psi(t: f64, theta: f64) -> f64 {
    t.signum() * t.abs().powf(1.0 - theta)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StratumConstants {
    /// ball radius coefficient c_i
    pub c: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
}

/// Every constant the diameter bound and its index machinery consume. The
/// theory only asserts these exist; here they are configured or fitted, and
/// the inequalities are what get verified.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProofConstants {
    pub theta: f64,
    /// global step exponent β
    pub beta: f64,
    /// level-band half-width ε around f*
    pub epsilon: f64,
    pub alpha_bar: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Lyapunov tail-sum coefficient c in g_k = c·Σ α_j^{1+β}
    pub c: f64,
    /// critical value the level band is centered on
    pub f_star: f64,
    pub per_stratum: BTreeMap<usize, StratumConstants>,
}

impl ProofConstants {
    pub fn from_assignment(
        assignment: &ExponentAssignment,
        ball_c: f64,
        epsilon: f64,
        c: f64,
        f_star: f64,
    ) -> Self {
        let per_stratum = assignment
            .per_stratum
            .iter()
            .map(|(&id, e)| {
                (
                    id,
                    StratumConstants {
                        c: ball_c,
                        beta: e.beta,
                        gamma: e.gamma,
                        omega: e.omega,
                    },
                )
            })
            .collect();
        ProofConstants {
            theta: assignment.theta,
            beta: assignment.beta,
            epsilon,
            alpha_bar: 1.0,
            sigma1: 1.0,
            sigma2: 1.0,
            c,
            f_star,
            per_stratum,
        }
    }

    pub fn stratum(&self, id: usize) -> Result<&StratumConstants, DiagnosticsError> {
        self.per_stratum
            .get(&id)
            .ok_or(DiagnosticsError::ConstantsMissing(id))
    }

    /// Literal re-check of the order system β < β_i < γ_i(1−θ) < 1 and
    /// β_i > γ_j across declared frontier pairs. Negated comparisons are
    /// deliberate: a NaN anywhere must read as a violation.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self, strat: &Stratification) -> Vec<String> {
        let mut out = Vec::new();
        let r = 1.0 - self.theta;
        for s in &strat.strata {
            let e = match self.per_stratum.get(&s.id) {
                Some(e) => e,
                None => {
                    out.push(format!("stratum {} missing constants", s.id));
                    continue;
                }
            };
            if !(self.beta < e.beta && e.beta < e.gamma * r && e.gamma * r < 1.0) {
                out.push(format!(
                    "stratum {}: β = {} β_i = {} γ_i(1−θ) = {} violate the order",
                    s.id,
                    self.beta,
                    e.beta,
                    e.gamma * r
                ));
            }
            for &j in &s.frontier_ids {
                if let Some(ej) = self.per_stratum.get(&j) {
                    if !(e.beta > ej.gamma) {
                        out.push(format!(
                            "frontier pair ({}, {j}): β_i = {} not above γ_j = {}",
                            s.id, e.beta, ej.gamma
                        ));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("per-stratum constants missing for stratum {0}")]
    ConstantsMissing(usize),
    #[error("schedule is not nonincreasing on the analyzed window")]
    NonDecreasingSchedule,
    #[error("all sampled values coincide with the critical value")]
    DegenerateSamples,
    #[error("trajectory too short for a rate probe (need K ≥ 1000, got {0})")]
    InsufficientDecades(usize),
    #[error("no grid point satisfies every report; tightest trajectory index {tightest}")]
    Infeasible { tightest: usize },
    #[error("projected trace has out-of-tube markers in the window: indices {0:?}")]
    IncompleteTrace(Vec<usize>),
    #[error(transparent)]
    Piecewise(#[from] crate::piecewise::PiecewiseError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.0, 0.5), 0.0);
        assert_eq!(psi(4.0, 0.5), 2.0);
        assert_eq!(psi(-4.0, 0.5), -2.0);
    }

    #[test]
    fn psi_is_odd_and_increasing() {
        let mut rng = crate::seeded_rng(42);
        let mut prev = f64::NEG_INFINITY;
        let mut ts: Vec<f64> = (0..1000)
            .map(|_| rand::Rng::gen_range(&mut rng, -10.0..10.0))
            .collect();
        for &t in &ts {
            assert_eq!(psi(-t, 0.3), -psi(t, 0.3));
        }
        ts.sort_by(f64::total_cmp);
        for &t in &ts {
            let v = psi(t, 0.7);
            assert!(v >= prev);
            prev = v;
        }
    }
}
