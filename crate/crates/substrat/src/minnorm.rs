//! Minimum-norm point in a convex hull (Wolfe's active-set iteration) and the
//! subgradient selection policies built on it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::piecewise::SubdifferentialSet;

pub const MINNORM_TOL: f64 = 1e-10;

/// Nearest point to the origin in conv(generators).
///
/// Wolfe's algorithm: grow a corral of generators, solve the affine minimizer
/// over it by least squares, and step to the boundary whenever the minimizer
/// leaves the simplex. Generator counts here are tiny, so the dense solves are
/// exact and cheap.
pub fn min_norm_point(generators: &[DVector<f64>], tol: f64) -> DVector<f64> {
    assert!(!generators.is_empty(), "subdifferential set is nonempty");
    let n = generators[0].len();
    if generators.len() == 1 {
        return generators[0].clone();
    }
    if generators.len() == 2 {
        // closed form on the segment g1 + t (g0 - g1)
        let diff = &generators[0] - &generators[1];
        let denom = diff.norm_squared();
        if denom > 0.0 {
            let t = (-generators[1].dot(&diff) / denom).clamp(0.0, 1.0);
            return &generators[1] + diff * t;
        }
        return generators[0].clone();
    }

    // start from the smallest generator (lowest index on ties)
    let start = (0..generators.len())
        .min_by(|&a, &b| {
            generators[a]
                .norm()
                .total_cmp(&generators[b].norm())
                .then(a.cmp(&b))
        })
        .unwrap();
    let mut corral: Vec<usize> = vec![start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut x = generators[start].clone();

    let scale = generators.iter().map(|g| g.norm()).fold(1.0f64, f64::max);

    for _ in 0..200 {
        // optimality: min_i <x, g_i> >= |x|^2 - tol
        let (p, best) = (0..generators.len())
            .map(|i| (i, x.dot(&generators[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        if best >= x.norm_squared() - tol * scale * scale {
            return x;
        }
        if !corral.contains(&p) {
            corral.push(p);
            lambda.push(0.0);
        }

        // minor cycle: pull x to the affine minimizer, clipping at the simplex
        loop {
            let mu = affine_minimizer(generators, &corral);
            if mu.iter().all(|&m| m > 1e-12) {
                lambda = mu;
                x = combine(generators, &corral, &lambda, n);
                break;
            }
            // largest feasible step from lambda toward mu
            let mut t = 1.0f64;
            for (l, m) in lambda.iter().zip(&mu) {
                if m < &1e-12 && (l - m) > 0.0 {
                    t = t.min(l / (l - m));
                }
            }
            lambda = lambda
                .iter()
                .zip(&mu)
                .map(|(l, m)| l + t * (m - l))
                .collect();
            // drop vanished coordinates
            let keep: Vec<usize> = (0..corral.len()).filter(|&k| lambda[k] > 1e-12).collect();
            if keep.len() == corral.len() {
                // numerical stall: accept the clipped point
                x = combine(generators, &corral, &lambda, n);
                break;
            }
            corral = keep.iter().map(|&k| corral[k]).collect();
            lambda = keep.iter().map(|&k| lambda[k]).collect();
            let total: f64 = lambda.iter().sum();
            for l in &mut lambda {
                *l /= total;
            }
            if corral.len() == 1 {
                x = generators[corral[0]].clone();
                break;
            }
        }
    }
    x
}

/// min |Σ μ_i g_i|² subject to Σ μ = 1 over the corral, by the KKT system.
fn affine_minimizer(generators: &[DVector<f64>], corral: &[usize]) -> Vec<f64> {
    let m = corral.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    for a in 0..m {
        for b in 0..m {
            kkt[(a, b)] = generators[corral[a]].dot(&generators[corral[b]]);
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    // LU on the well-posed path; SVD tolerates affinely dependent corrals
    let sol = match kkt.clone().lu().solve(&rhs) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => sol,
        _ => kkt.svd(true, true).solve(&rhs, 1e-14).expect("kkt solve"),
    };
    sol.iter().take(m).copied().collect()
}

fn combine(
    generators: &[DVector<f64>],
    corral: &[usize],
    lambda: &[f64],
    n: usize,
) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for (k, &i) in corral.iter().enumerate() {
        x += &generators[i] * lambda[k];
    }
    x
}

/// Check v ∈ conv(generators) by min-norm on the translated set.
pub fn hull_membership(generators: &[DVector<f64>], v: &DVector<f64>, tol: f64) -> bool {
    let translated: Vec<DVector<f64>> = generators.iter().map(|g| g - v).collect();
    min_norm_point(&translated, MINNORM_TOL).norm() <= tol
}

/// Subgradient selection policies realizing the inclusion v ∈ ∂f(x).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    MinNorm,
    FirstActive,
    RandomVertex,
    RandomConvexCombination,
}

impl SelectionPolicy {
    pub fn tag(&self) -> &'static str {
        match self {
            SelectionPolicy::MinNorm => "min_norm",
            SelectionPolicy::FirstActive => "first_active",
            SelectionPolicy::RandomVertex => "random_vertex",
            SelectionPolicy::RandomConvexCombination => "random_convex",
        }
    }
}

impl std::str::FromStr for SelectionPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min_norm" => Ok(SelectionPolicy::MinNorm),
            "first_active" => Ok(SelectionPolicy::FirstActive),
            "random_vertex" => Ok(SelectionPolicy::RandomVertex),
            "random_convex" => Ok(SelectionPolicy::RandomConvexCombination),
            other => Err(format!("unknown policy '{other}'")),
        }
    }
}

/// Pick a subgradient from the set under the given policy; deterministic for
/// a given rng state.
pub fn select_subgradient(
    sd: &SubdifferentialSet,
    policy: SelectionPolicy,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    match policy {
        SelectionPolicy::MinNorm => min_norm_point(&sd.generators, MINNORM_TOL),
        SelectionPolicy::FirstActive => sd.generators[0].clone(),
        SelectionPolicy::RandomVertex => {
            let i = rng.gen_range(0..sd.generators.len());
            sd.generators[i].clone()
        }
        SelectionPolicy::RandomConvexCombination => {
            let mut w: Vec<f64> = (0..sd.generators.len())
                .map(|_| -rng.gen_range(0.0f64..1.0).max(f64::MIN_POSITIVE).ln())
                .collect();
            let total: f64 = w.iter().sum();
            for wi in &mut w {
                *wi /= total;
            }
            let n = sd.generators[0].len();
            let mut v = DVector::zeros(n);
            for (g, wi) in sd.generators.iter().zip(&w) {
                v += g * *wi;
            }
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(data: &[&[f64]]) -> Vec<DVector<f64>> {
        data.iter().map(|v| DVector::from_vec(v.to_vec())).collect()
    }

    /// Brute-force simplex grid oracle (step 1e-3, up to 3 generators).
    pub fn grid_oracle(generators: &[DVector<f64>], step: f64) -> DVector<f64> {
        let n = generators[0].len();
        let m = generators.len();
        assert!(m <= 3);
        let ticks = (1.0 / step).round() as usize;
        let mut best = f64::INFINITY;
        let mut best_x = DVector::zeros(n);
        match m {
            1 => generators[0].clone(),
            2 => {
                for a in 0..=ticks {
                    let l = a as f64 * step;
                    let x = &generators[0] * l + &generators[1] * (1.0 - l);
                    if x.norm_squared() < best {
                        best = x.norm_squared();
                        best_x = x;
                    }
                }
                best_x
            }
            _ => {
                for a in 0..=ticks {
                    let l0 = a as f64 * step;
                    for b in 0..=(ticks - a) {
                        let l1 = b as f64 * step;
                        let l2 = 1.0 - l0 - l1;
                        let x = &generators[0] * l0 + &generators[1] * l1 + &generators[2] * l2;
                        if x.norm_squared() < best {
                            best = x.norm_squared();
                            best_x = x;
                        }
                    }
                }
                best_x
            }
        }
    }

    #[test]
    fn textbook_cases() {
        let g = vecs(&[&[1.0], &[-1.0]]);
        assert!(min_norm_point(&g, MINNORM_TOL).norm() < 1e-10);

        let g = vecs(&[&[1.0], &[2.0]]);
        assert!((min_norm_point(&g, MINNORM_TOL)[0] - 1.0).abs() < 1e-10);

        let g = vecs(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let x = min_norm_point(&g, MINNORM_TOL);
        assert!((x - DVector::from_vec(vec![0.5, 0.5])).norm() < 1e-10);
    }

    #[test]
    fn matches_grid_oracle_on_random_sets() {
        let mut rng = crate::seeded_rng(42);
        for trial in 0..100 {
            let m = 1 + (trial % 3);
            let n = 1 + (trial % 2);
            let gens: Vec<DVector<f64>> = (0..m)
                .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            let fast = min_norm_point(&gens, MINNORM_TOL);
            let slow = grid_oracle(&gens, 1e-3);
            assert!(
                (fast.norm() - slow.norm()).abs() <= 1e-3,
                "trial {trial}: |fast| = {}, |grid| = {}",
                fast.norm(),
                slow.norm()
            );
        }
    }

    #[test]
    fn handles_duplicates_and_degenerate_sets() {
        let g = vecs(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let x = min_norm_point(&g, MINNORM_TOL);
        assert!((x - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-9);

        // collinear set straddling the origin
        let g = vecs(&[&[2.0, 2.0], &[-1.0, -1.0]]);
        assert!(min_norm_point(&g, MINNORM_TOL).norm() < 1e-9);
    }

    #[test]
    fn selection_policies() {
        let sd = SubdifferentialSet {
            base_point: DVector::zeros(1),
            generators: vecs(&[&[1.0], &[-1.0]]),
        };
        let mut rng = crate::seeded_rng(1);
        assert!(select_subgradient(&sd, SelectionPolicy::MinNorm, &mut rng).norm() < 1e-10);
        assert_eq!(
            select_subgradient(&sd, SelectionPolicy::FirstActive, &mut rng)[0],
            1.0
        );
        let v = select_subgradient(&sd, SelectionPolicy::RandomVertex, &mut rng);
        assert!(v[0] == 1.0 || v[0] == -1.0);
    }

    #[test]
    fn selections_stay_in_hull() {
        let mut rng = crate::seeded_rng(5);
        let sd = SubdifferentialSet {
            base_point: DVector::zeros(2),
            generators: vecs(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, -1.0]]),
        };
        for policy in [
            SelectionPolicy::MinNorm,
            SelectionPolicy::FirstActive,
            SelectionPolicy::RandomVertex,
            SelectionPolicy::RandomConvexCombination,
        ] {
            for _ in 0..20 {
                let v = select_subgradient(&sd, policy, &mut rng);
                assert!(
                    hull_membership(&sd.generators, &v, 1e-12),
                    "{policy:?} selection left the hull"
                );
            }
        }
    }

    #[test]
    fn deterministic_given_rng_state() {
        let sd = SubdifferentialSet {
            base_point: DVector::zeros(2),
            generators: vecs(&[&[1.0, 0.0], &[0.0, 1.0], &[0.3, 0.3]]),
        };
        let mut r1 = crate::seeded_rng(9);
        let mut r2 = crate::seeded_rng(9);
        for _ in 0..50 {
            let a = select_subgradient(&sd, SelectionPolicy::RandomConvexCombination, &mut r1);
            let b = select_subgradient(&sd, SelectionPolicy::RandomConvexCombination, &mut r2);
            assert_eq!(a, b);
        }
    }
}
