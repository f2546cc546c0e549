//! Per-stratum exponent assignment.
//!
//! Walks strata in increasing dimension and picks (β_i, γ_i) so that the full
//! order system holds: β < β_i < γ_i(1−θ) < 1 for every stratum, β_i > γ_j and
//! η_i·γ_j ≤ β_i across every declared frontier pair, with ω_i = η_i·sup γ_j.
//! All exponents are kept in (0, 1); chains multiply the available window by
//! (1−θ) per level, so a window thinner than the resolution floor reports the
//! blocking chain instead of silently degrading.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::strata::stratification::Stratification;
use crate::strata::StrataError;

/// Windows thinner than this raise InfeasibleExponents.
const RESOLUTION_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StratumExponents {
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentAssignment {
    pub theta: f64,
    /// global β, strictly below every β_i
    pub beta: f64,
    pub per_stratum: BTreeMap<usize, StratumExponents>,
}

/// Assign per-stratum exponents for a given desingularizing exponent θ.
/// `eta` overrides the per-stratum η_i (default 1).
pub fn assign_exponents(
    strat: &Stratification,
    theta: f64,
    eta: &BTreeMap<usize, f64>,
) -> Result<ExponentAssignment, StrataError> {
    if !(0.0 < theta && theta < 1.0) {
        return Err(StrataError::InvalidInput(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let r = 1.0 - theta;
    let t = strat.strata.len();

    // frontier must point strictly down in dimension
    for s in &strat.strata {
        for &j in &s.frontier_ids {
            if strat.strata[j].dim >= s.dim {
                return Err(StrataError::InvalidInput(format!(
                    "frontier of stratum {} contains {} of dimension ≥ its own",
                    s.id, j
                )));
            }
        }
    }

    // children[i] = strata having i on their frontier; up[i] = longest chain above
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); t];
    for s in &strat.strata {
        for &j in &s.frontier_ids {
            children[j].push(s.id);
        }
    }
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by_key(|&i| (strat.strata[i].dim, i));
    let mut up = vec![0usize; t];
    for &i in order.iter().rev() {
        up[i] = children[i].iter().map(|&c| up[c] + 1).max().unwrap_or(0);
    }

    // the worst frontier multiplier shrinks the usable window per chain level
    let eta_max = (0..t)
        .map(|i| eta.get(&i).copied().unwrap_or(1.0).max(1.0))
        .fold(1.0f64, f64::max);

    let mut per: BTreeMap<usize, StratumExponents> = BTreeMap::new();
    for &i in &order {
        let s = &strat.strata[i];
        let eta_i = eta.get(&i).copied().unwrap_or(1.0).max(1.0);
        let gamma_max = s
            .frontier_ids
            .iter()
            .map(|j| per[j].gamma)
            .fold(0.0f64, f64::max);
        let floor = eta_i * gamma_max;
        let lower = floor / r;
        let upper = (r / eta_max).powi(up[i] as i32);
        if upper - lower <= RESOLUTION_FLOOR {
            return Err(StrataError::InfeasibleExponents {
                theta,
                chain: blocking_chain(strat, &per, i),
            });
        }
        let gamma = lower + 0.75 * (upper - lower);
        let cap = gamma * r;
        let beta = 0.5 * (floor + cap);
        per.insert(
            i,
            StratumExponents {
                beta,
                gamma,
                omega: floor,
                eta: eta_i,
            },
        );
    }

    let beta_global = 0.5
        * per
            .values()
            .map(|e| (e.beta - e.omega).min(2.0 - e.omega))
            .fold(f64::INFINITY, f64::min);
    let assignment = ExponentAssignment {
        theta,
        beta: beta_global,
        per_stratum: per,
    };
    let violations = check_exponents(strat, &assignment);
    if !violations.is_empty() {
        return Err(StrataError::InfeasibleExponents {
            theta,
            chain: violations,
        });
    }
    Ok(assignment)
}

/// Walk the argmax-γ frontier path downward from the blocked stratum.
fn blocking_chain(
    strat: &Stratification,
    per: &BTreeMap<usize, StratumExponents>,
    from: usize,
) -> Vec<String> {
    let mut chain = vec![format!("stratum {from} (blocked)")];
    let mut cur = from;
    loop {
        let next = strat.strata[cur]
            .frontier_ids
            .iter()
            .max_by(|a, b| per[a].gamma.total_cmp(&per[b].gamma));
        match next {
            Some(&j) => {
                chain.push(format!("stratum {j} (γ = {:.6})", per[&j].gamma));
                cur = j;
            }
            None => break,
        }
    }
    chain
}

/// Exhaustive literal re-evaluation of every inequality in the order system.
/// Returns a human-readable violation per failed inequality (empty = pass).
/// Negated comparisons are deliberate: a NaN anywhere must read as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_exponents(strat: &Stratification, a: &ExponentAssignment) -> Vec<String> {
    let mut out = Vec::new();
    let r = 1.0 - a.theta;
    if !(a.beta > 0.0) {
        out.push(format!("global β = {} not positive", a.beta));
    }
    for s in &strat.strata {
        let e = match a.per_stratum.get(&s.id) {
            Some(e) => e,
            None => {
                out.push(format!("stratum {} missing exponents", s.id));
                continue;
            }
        };
        if !(a.beta < e.beta) {
            out.push(format!("β = {} not below β_{} = {}", a.beta, s.id, e.beta));
        }
        if !(e.beta < e.gamma * r) {
            out.push(format!(
                "β_{} = {} not below γ_{}·(1−θ) = {}",
                s.id,
                e.beta,
                s.id,
                e.gamma * r
            ));
        }
        if !(e.gamma * r < 1.0) {
            out.push(format!("γ_{}·(1−θ) = {} not below 1", s.id, e.gamma * r));
        }
        let gamma_max = s
            .frontier_ids
            .iter()
            .map(|j| a.per_stratum[j].gamma)
            .fold(0.0f64, f64::max);
        if (e.omega - e.eta * gamma_max).abs() > 1e-12 {
            out.push(format!(
                "ω_{} = {} differs from η_i·sup γ_j = {}",
                s.id,
                e.omega,
                e.eta * gamma_max
            ));
        }
        for &j in &s.frontier_ids {
            let ej = &a.per_stratum[&j];
            if !(e.beta > ej.gamma) {
                out.push(format!(
                    "β_{} = {} not above γ_{} = {} (frontier pair)",
                    s.id, e.beta, j, ej.gamma
                ));
            }
            if !(e.eta * ej.gamma <= e.beta) {
                out.push(format!(
                    "η_{}·γ_{} = {} exceeds β_{} = {}",
                    s.id,
                    j,
                    e.eta * ej.gamma,
                    s.id,
                    e.beta
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::stratum::Stratum;

    /// chain: point ⊂ ∂(line) ⊂ ∂(plane patch) in ℝ³, extended to `depth`
    fn chain_stratification(depth: usize) -> Stratification {
        let n = 3;
        let mut strata = Vec::new();
        for d in 0..depth {
            let frontier: Vec<usize> = (0..d).collect();
            if d == 0 {
                strata.push(Stratum::point(0, vec![0.0; n], frontier));
            } else {
                let mut basis = Vec::new();
                for k in 0..d.min(n) {
                    let mut col = vec![0.0; n];
                    col[k] = 1.0;
                    basis.push(col);
                }
                strata.push(Stratum::affine(
                    d,
                    vec![0.0; n],
                    basis,
                    vec![(0.0, 1.0); d.min(n)],
                    frontier,
                ));
            }
        }
        Stratification {
            strata,
            ambient_box: vec![(-1.0, 1.0); n],
        }
    }

    #[test]
    fn single_open_stratum() {
        let strat = chain_stratification(1);
        let a = assign_exponents(&strat, 0.5, &BTreeMap::new()).unwrap();
        assert!(check_exponents(&strat, &a).is_empty());
        let e = &a.per_stratum[&0];
        assert!(e.beta > 0.0 && e.beta < e.gamma * 0.5 && e.gamma * 0.5 < 1.0);
        assert_eq!(e.omega, 0.0);
    }

    #[test]
    fn depth_three_chain_at_half() {
        let strat = chain_stratification(3);
        let a = assign_exponents(&strat, 0.5, &BTreeMap::new()).unwrap();
        let violations = check_exponents(&strat, &a);
        assert!(violations.is_empty(), "{violations:?}");
        // β strictly increasing along the chain, each above the frontier γ
        assert!(a.per_stratum[&1].beta > a.per_stratum[&0].gamma);
        assert!(a.per_stratum[&2].beta > a.per_stratum[&1].gamma);
    }

    #[test]
    fn depth_four_chain_infeasible_near_one() {
        let strat = chain_stratification(4);
        match assign_exponents(&strat, 0.999, &BTreeMap::new()) {
            Err(StrataError::InfeasibleExponents { chain, .. }) => {
                assert!(!chain.is_empty());
            }
            other => panic!("expected InfeasibleExponents, got {other:?}"),
        }
    }

    #[test]
    fn eta_overrides_raise_floors() {
        let strat = chain_stratification(2);
        let mut eta = BTreeMap::new();
        eta.insert(1usize, 1.5f64);
        let a = assign_exponents(&strat, 0.5, &eta).unwrap();
        assert!(check_exponents(&strat, &a).is_empty());
        let e1 = &a.per_stratum[&1];
        assert!((e1.omega - 1.5 * a.per_stratum[&0].gamma).abs() < 1e-12);
    }
}
