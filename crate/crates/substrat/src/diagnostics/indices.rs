//! Stratum-crossing index bookkeeping over a trajectory: the crossing set I_C,
//! the stratum selection G, the recursive index lists l/s/q, the lookahead H,
//! and the crossing-count U that drives the diameter bound's telescoping.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsError, ProofConstants};
use crate::engine::Trajectory;
use crate::piecewise::PiecewiseFunction;
use crate::strata::cell::point_segment_distance;
use crate::strata::{Stratification, Stratum, StratumShape};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IndexTrace {
    /// sorted crossing indices
    pub i_c: Vec<usize>,
    /// k → selected stratum id, for k ∈ I_C
    pub g: BTreeMap<usize, usize>,
    /// l_0 < l_1 < … per the recursive definition
    pub l: Vec<usize>,
    pub s: BTreeMap<usize, usize>,
    pub q: BTreeMap<usize, usize>,
    /// None encodes the +∞ sentinel (sequence never re-approaches the strata)
    pub h: BTreeMap<usize, Option<usize>>,
    /// distinct-strata crossing count; entries with infinite H are omitted
    pub u: BTreeMap<usize, usize>,
    /// how many crossing indices needed the relative-distance fallback for G
    pub g_fallbacks: usize,
}

impl IndexTrace {
    /// Run-length encoding of I_C as (start, len) blocks, for compact reports.
    pub fn i_c_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut iter = self.i_c.iter().copied();
        if let Some(first) = iter.next() {
            let mut start = first;
            let mut len = 1usize;
            let mut prev = first;
            for k in iter {
                if k == prev + 1 {
                    len += 1;
                } else {
                    runs.push((start, len));
                    start = k;
                    len = 1;
                }
                prev = k;
            }
            runs.push((start, len));
        }
        runs
    }

    /// The ordering invariants of the recursive definitions; empty = pass.
    pub fn check_invariants(&self, non_open_count: usize) -> Vec<String> {
        let mut out = Vec::new();
        for (m, &lm) in self.l.iter().enumerate() {
            if self.i_c.binary_search(&lm).is_err() {
                out.push(format!("l_{m} = {lm} not in I_C"));
            }
            let (q, s) = (self.q[&lm], self.s[&lm]);
            if !(lm <= q && q <= s) {
                out.push(format!("ordering l_{m} = {lm} ≤ q = {q} ≤ s = {s} fails"));
            }
            if m + 1 < self.l.len() && self.l[m + 1] <= q {
                out.push(format!(
                    "l_{} = {} not above q(l_{m}) = {q}",
                    m + 1,
                    self.l[m + 1]
                ));
            }
        }
        for (&lm, &u) in &self.u {
            if u > non_open_count {
                out.push(format!(
                    "U({lm}) = {u} exceeds stratum count {non_open_count}"
                ));
            }
            if u < 1 {
                out.push(format!("U({lm}) = {u} below 1"));
            }
        }
        out
    }
}

/// Distance from the segment [a, b] to a stratum. Closed-form for points and
/// affine patches; 64-point segment subdivision for graph strata.
pub fn segment_distance(stratum: &Stratum, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    match &stratum.shape {
        StratumShape::Point { p } => point_segment_distance(&DVector::from_vec(p.clone()), a, b),
        StratumShape::AffinePatch {
            base,
            basis,
            local_box,
        } => affine_segment_distance(base, basis, local_box, a, b),
        StratumShape::Graph { .. } => {
            let mut best = f64::INFINITY;
            for s in 0..=64 {
                let p = a + (b - a) * (s as f64 / 64.0);
                best = best.min(stratum.distance(&p));
            }
            best
        }
    }
}

/// Exact minimization of the piecewise-quadratic t ↦ d²(a + t(b−a), patch).
fn affine_segment_distance(
    base: &[f64],
    basis: &[Vec<f64>],
    local_box: &[(f64, f64)],
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> f64 {
    let n = base.len();
    let d = basis.len();
    let bm = nalgebra::DMatrix::from_fn(n, d, |i, j| basis[j][i]);
    let rel0 = a - DVector::from_vec(base.to_vec());
    let dir = b - a;
    // local coordinates are affine in t: u(t) = u0 + t·ud
    let u0 = bm.transpose() * &rel0;
    let ud = bm.transpose() * &dir;
    // normal component: n(t) = n0 + t·nd
    let n0 = &rel0 - &bm * &u0;
    let nd = &dir - &bm * &ud;

    // breakpoints where a local coordinate crosses its box bound
    let mut ts = vec![0.0, 1.0];
    for i in 0..d {
        for bound in [local_box[i].0, local_box[i].1] {
            if ud[i] != 0.0 {
                let t = (bound - u0[i]) / ud[i];
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let dist_sq_at = |t: f64| -> f64 {
        let mut acc = (&n0 + &nd * t).norm_squared();
        for i in 0..d {
            let u = u0[i] + t * ud[i];
            let gap = (local_box[i].0 - u).max(0.0).max(u - local_box[i].1);
            acc += gap * gap;
        }
        acc
    };

    let mut best = f64::INFINITY;
    for &t in &ts {
        best = best.min(dist_sq_at(t));
    }
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = 0.5 * (t0 + t1);
        // active clamp pattern is constant on (t0, t1): assemble the quadratic
        // q(t) = |n0 + t nd|² + Σ_active (g0_i + t gd_i)²
        let mut qa = nd.norm_squared();
        let mut qb = 2.0 * n0.dot(&nd);
        for i in 0..d {
            let u_mid = u0[i] + mid * ud[i];
            let (g0, gd) = if u_mid < local_box[i].0 {
                (local_box[i].0 - u0[i], -ud[i])
            } else if u_mid > local_box[i].1 {
                (u0[i] - local_box[i].1, ud[i])
            } else {
                continue;
            };
            qa += gd * gd;
            qb += 2.0 * g0 * gd;
        }
        if qa > 0.0 {
            let t_star = (-qb / (2.0 * qa)).clamp(t0, t1);
            best = best.min(dist_sq_at(t_star));
        }
        best = best.min(dist_sq_at(mid));
    }
    best.max(0.0).sqrt()
}

/// Geometric membership in the non-uniform neighborhood of stratum i at step
/// size α: within c_i·α^{β_i} of M_i and outside every frontier exclusion ball
/// c_j·α^{γ_j}. The level-band condition is the caller's responsibility here.
pub fn neighborhood_membership(
    x: &DVector<f64>,
    alpha: f64,
    pc: &ProofConstants,
    strat: &Stratification,
) -> Vec<usize> {
    let mut out = Vec::new();
    for s in &strat.strata {
        if let Ok(e) = pc.stratum(s.id) {
            if s.distance(x) > e.c * alpha.powf(e.beta) {
                continue;
            }
            let excluded = s.frontier_ids.iter().any(|&j| {
                pc.stratum(j)
                    .map(|ej| strat.stratum(j).distance(x) <= ej.c * alpha.powf(ej.gamma))
                    .unwrap_or(false)
            });
            if !excluded {
                out.push(s.id);
            }
        }
    }
    out
}

/// Full membership x ∈ N(i, α): the geometric conditions plus the ambient box
/// and the level band |f − f*| ≤ ε.
pub fn in_neighborhood(
    x: &DVector<f64>,
    alpha: f64,
    i: usize,
    f: &PiecewiseFunction,
    pc: &ProofConstants,
    strat: &Stratification,
) -> Result<bool, DiagnosticsError> {
    if !strat.in_box(x) || (f.evaluate(x) - pc.f_star).abs() > pc.epsilon {
        return Ok(false);
    }
    let e = pc.stratum(i)?;
    let s = strat.stratum(i);
    if s.distance(x) > e.c * alpha.powf(e.beta) {
        return Ok(false);
    }
    for &j in &s.frontier_ids {
        let ej = pc.stratum(j)?;
        if strat.stratum(j).distance(x) <= ej.c * alpha.powf(ej.gamma) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Transcribe the crossing-index machinery for one trajectory.
///
/// I_C collects k with [x_k, x_{k+1}] meeting some exclusion ball of a
/// non-open stratum (k ranges over recorded steps). G picks the
/// minimal-dimension stratum within 2c_i·α_k^{γ_i}, lowest id on ties; when no
/// stratum passes the 2c test (large steps), the relative-distance fallback is
/// used and counted.
pub fn extract_indices(
    traj: &Trajectory,
    f: &PiecewiseFunction,
    pc: &ProofConstants,
    strat: &Stratification,
) -> Result<IndexTrace, DiagnosticsError> {
    let non_open = strat.non_open_ids();
    for &i in &non_open {
        pc.stratum(i)?;
    }
    let horizon = traj.horizon();
    let alpha_at = |k: usize| -> f64 {
        // the finite recording ends at K; index K reuses the last step size
        traj.steps[k.min(horizon.saturating_sub(1))]
    };

    let mut i_c: Vec<usize> = Vec::new();
    for k in 0..horizon {
        let (a, b) = (&traj.points[k], &traj.points[k + 1]);
        let hit = non_open.iter().any(|&i| {
            let e = &pc.per_stratum[&i];
            segment_distance(strat.stratum(i), a, b) <= e.c * alpha_at(k).powf(e.gamma)
        });
        if hit {
            i_c.push(k);
        }
    }

    let mut g: BTreeMap<usize, usize> = BTreeMap::new();
    let mut g_fallbacks = 0usize;
    for &k in &i_c {
        let x = &traj.points[k];
        let alpha = alpha_at(k);
        let mut candidates: Vec<usize> = non_open
            .iter()
            .copied()
            .filter(|&i| {
                let e = &pc.per_stratum[&i];
                strat.stratum(i).distance(x) <= 2.0 * e.c * alpha.powf(e.gamma)
            })
            .collect();
        if candidates.is_empty() {
            g_fallbacks += 1;
            let pick = non_open
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let ra = strat.stratum(a).distance(x)
                        / (2.0 * pc.per_stratum[&a].c * alpha.powf(pc.per_stratum[&a].gamma));
                    let rb = strat.stratum(b).distance(x)
                        / (2.0 * pc.per_stratum[&b].c * alpha.powf(pc.per_stratum[&b].gamma));
                    ra.total_cmp(&rb).then(a.cmp(&b))
                })
                .expect("non-open strata exist when I_C is nonempty");
            candidates.push(pick);
        }
        let pick = candidates
            .into_iter()
            .min_by_key(|&i| (strat.stratum(i).dim, i))
            .unwrap();
        g.insert(k, pick);
    }

    // the recursion for l, s, q
    let mut l: Vec<usize> = Vec::new();
    let mut s_map = BTreeMap::new();
    let mut q_map = BTreeMap::new();
    let last = traj.points.len() - 1; // index K
    let mut cursor = i_c.first().copied();
    while let Some(lm) = cursor {
        l.push(lm);
        let gi = g[&lm];
        let mut s_val = lm;
        for k in lm..=last {
            if in_neighborhood(&traj.points[k], alpha_at(k), gi, f, pc, strat)? {
                s_val = k;
            } else {
                break;
            }
        }
        let e = &pc.per_stratum[&gi];
        let mut q_val = lm;
        for k in lm..=s_val {
            if strat.stratum(gi).distance(&traj.points[k]) <= 2.0 * e.c * alpha_at(k).powf(e.gamma)
            {
                q_val = k;
            }
        }
        s_map.insert(lm, s_val);
        q_map.insert(lm, q_val);
        cursor = i_c.iter().copied().find(|&k| k > q_val);
    }

    // H: first later entry of the l-list at or past s(l); U counts distinct
    // strata crossed strictly between q(l) and H(l)
    let mut h_map: BTreeMap<usize, Option<usize>> = BTreeMap::new();
    let mut u_map: BTreeMap<usize, usize> = BTreeMap::new();
    for &lm in &l {
        let s_val = s_map[&lm];
        let h = l.iter().copied().find(|&lp| lp >= s_val);
        h_map.insert(lm, h);
        if let Some(hv) = h {
            let q_val = q_map[&lm];
            let mut seen: Vec<usize> = i_c
                .iter()
                .copied()
                .filter(|&k| k > q_val && k < hv)
                .map(|k| g[&k])
                .collect();
            seen.sort_unstable();
            seen.dedup();
            u_map.insert(lm, seen.len() + 1);
        }
    }

    Ok(IndexTrace {
        i_c,
        g,
        l,
        s: s_map,
        q: q_map,
        h: h_map,
        u: u_map,
        g_fallbacks,
    })
}
