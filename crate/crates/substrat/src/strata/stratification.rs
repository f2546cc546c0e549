//! Finite stratifications with declared frontier relations: sampling-based
//! validation of the frontier condition, pairwise disjointness, shape
//! invariants, and the frontier-distance estimate for tangent alignment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::strata::stratum::{Stratum, StratumShape};
use crate::strata::StrataError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stratification {
    pub strata: Vec<Stratum>,
    /// bounds of the compact ambient window U
    pub ambient_box: Vec<(f64, f64)>,
}

/// One validator check with its worst observed margin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Fitted constants of the tangent-alignment estimate between an adjacent pair
/// of strata: |P_N(x) P_T(y)| ≤ C / d(y, ∂M_j)^η · |x − y|.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WConditionFit {
    pub pair: (usize, usize),
    pub c: f64,
    pub eta: f64,
    pub sample_count: usize,
    pub max_violation: f64,
}

impl Stratification {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_box.len()
    }

    pub fn stratum(&self, id: usize) -> &Stratum {
        &self.strata[id]
    }

    /// ids of strata of dimension < n, in increasing id order
    pub fn non_open_ids(&self) -> Vec<usize> {
        let n = self.ambient_dim();
        self.strata
            .iter()
            .filter(|s| s.dim < n)
            .map(|s| s.id)
            .collect()
    }

    pub fn in_box(&self, x: &DVector<f64>) -> bool {
        self.ambient_box
            .iter()
            .zip(x.iter())
            .all(|((lo, hi), xi)| *xi >= *lo && *xi <= *hi)
    }

    /// Distance to the union of declared frontier strata; returns 1 for a
    /// frontier-free stratum (the d(y, ∅) = 1 convention).
    pub fn distance_to_frontier(&self, y: &DVector<f64>, id: usize) -> f64 {
        let fr = &self.strata[id].frontier_ids;
        if fr.is_empty() {
            return 1.0;
        }
        fr.iter()
            .map(|&j| self.strata[j].distance(y))
            .fold(f64::INFINITY, f64::min)
    }

    /// The lowest-id stratum containing x within tol, if any.
    pub fn containing_stratum(&self, x: &DVector<f64>, tol: f64) -> Option<usize> {
        self.strata
            .iter()
            .find(|s| s.contains(x, tol))
            .map(|s| s.id)
    }

    /// Run every sampling validator. `samples` is the budget of the bigger
    /// Monte-Carlo checks; per-stratum draws are capped for pairwise work.
    pub fn validate(&self, samples: usize, seed: u64) -> ValidationReport {
        let checks = vec![
            self.check_ids(),
            self.check_shapes(samples.min(10_000), seed),
            self.check_projectors(seed),
            self.check_frontier_condition(seed),
            self.check_disjointness(samples, seed),
        ];
        ValidationReport {
            seed,
            samples,
            checks,
        }
    }

    fn check_ids(&self) -> CheckResult {
        let ok = self.strata.iter().enumerate().all(|(i, s)| {
            s.id == i
                && s.frontier_ids
                    .iter()
                    .all(|&j| j < self.strata.len() && self.strata[j].dim < s.dim)
        });
        CheckResult {
            name: "ids_and_frontier_dims".into(),
            pass: ok,
            worst: 0.0,
            detail: "ids positional; frontier strata strictly lower-dimensional".into(),
        }
    }

    fn check_shapes(&self, pairs: usize, seed: u64) -> CheckResult {
        let mut worst = 0.0f64;
        let mut detail = String::new();
        let mut pass = true;
        for s in &self.strata {
            match &s.shape {
                StratumShape::Point { .. } => {}
                StratumShape::AffinePatch { basis, base, .. } => {
                    let n = base.len();
                    let d = basis.len();
                    let b = DMatrix::from_fn(n, d, |i, j| basis[j][i]);
                    let err = (b.transpose() * &b - DMatrix::identity(d, d)).abs().max();
                    worst = worst.max(err);
                    if err > 1e-12 {
                        pass = false;
                        detail = format!("stratum {} basis not orthonormal ({err:.2e})", s.id);
                    }
                }
                StratumShape::Graph {
                    rotation,
                    domain,
                    map,
                    lipschitz,
                    ..
                } => {
                    let n = rotation.len();
                    let q = DMatrix::from_fn(n, n, |i, j| rotation[i][j]);
                    let err = (q.transpose() * &q - DMatrix::identity(n, n)).abs().max();
                    worst = worst.max(err);
                    if err > 1e-12 {
                        pass = false;
                        detail = format!("stratum {} rotation not orthogonal ({err:.2e})", s.id);
                    }
                    if !map.is_empty() {
                        let mut rng = crate::seeded_rng(seed ^ s.id as u64);
                        for _ in 0..pairs {
                            let a = domain.sample_interior(&mut rng);
                            let b = domain.sample_interior(&mut rng);
                            let da: Vec<f64> =
                                map.iter().map(|f| f.eval(&a) - f.eval(&b)).collect();
                            let num = da.iter().map(|v| v * v).sum::<f64>().sqrt();
                            let den = a
                                .iter()
                                .zip(&b)
                                .map(|(x, y)| (x - y) * (x - y))
                                .sum::<f64>()
                                .sqrt();
                            if den > 0.0 && num > lipschitz * den {
                                pass = false;
                                worst = worst.max(num / den - lipschitz);
                                detail = format!(
                                    "stratum {} map exceeds declared Lipschitz {} (ratio {:.3})",
                                    s.id,
                                    lipschitz,
                                    num / den
                                );
                            }
                        }
                    }
                }
            }
        }
        CheckResult {
            name: "shape_invariants".into(),
            pass,
            worst,
            detail,
        }
    }

    fn check_projectors(&self, seed: u64) -> CheckResult {
        let n = self.ambient_dim();
        let mut worst = 0.0f64;
        for s in &self.strata {
            let mut rng = crate::seeded_rng(seed ^ (s.id as u64) << 8);
            for _ in 0..20 {
                let y = s.sample(&mut rng);
                let p = s.tangent_projector(&y);
                let q = s.normal_projector(&y);
                worst = worst.max((&p * &p - &p).abs().max());
                worst = worst.max((&p + &q - DMatrix::identity(n, n)).abs().max());
                worst = worst.max((&p - p.transpose()).abs().max());
            }
        }
        CheckResult {
            name: "projector_identities".into(),
            pass: worst <= 1e-10,
            worst,
            detail: "P² = P, P + N = I, symmetry".into(),
        }
    }

    /// Def-2.1-style frontier condition on samples: for each ordered pair
    /// (i, j), if some sample of M_j touches closure(M_i) then every sample of
    /// M_j must lie in closure(M_i) within 1e−6; declared frontier pairs are
    /// held to the containment check unconditionally.
    fn check_frontier_condition(&self, seed: u64) -> CheckResult {
        let per = 200usize;
        let mut worst = 0.0f64;
        let mut pass = true;
        let mut detail = String::new();
        let sample_sets: Vec<Vec<DVector<f64>>> = self
            .strata
            .iter()
            .map(|s| {
                let mut rng = crate::seeded_rng(seed ^ (0x5f0f << 16) ^ s.id as u64);
                (0..per).map(|_| s.sample(&mut rng)).collect()
            })
            .collect();
        for mi in &self.strata {
            for mj in &self.strata {
                if mi.id == mj.id {
                    continue;
                }
                let dists: Vec<f64> = sample_sets[mj.id].iter().map(|y| mi.distance(y)).collect();
                let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = dists.iter().cloned().fold(0.0, f64::max);
                let declared =
                    mi.frontier_ids.contains(&mj.id) || mj.frontier_ids.contains(&mi.id) && false;
                let touching = min <= 1e-6;
                let must_contain = (touching && mj.dim < mi.dim)
                    || (declared && mj.dim < mi.dim && mi.frontier_ids.contains(&mj.id));
                if must_contain && max > 1e-6 {
                    pass = false;
                    worst = worst.max(max);
                    detail = format!(
                        "pair ({}, {}): closure(M_{}) meets M_{} but containment fails (max d {max:.2e})",
                        mi.id, mj.id, mi.id, mj.id
                    );
                }
            }
        }
        CheckResult {
            name: "frontier_condition".into(),
            pass,
            worst,
            detail,
        }
    }

    fn check_disjointness(&self, samples: usize, seed: u64) -> CheckResult {
        let mut rng = crate::seeded_rng(seed ^ 0xd15);
        let n = self.ambient_dim();
        let mut worst = 0usize;
        let mut pass = true;
        let mut detail = String::new();
        for _ in 0..samples {
            let x = DVector::from_fn(n, |i, _| {
                let (lo, hi) = self.ambient_box[i];
                rand::Rng::gen_range(&mut rng, lo..hi)
            });
            let mut by_dim: std::collections::BTreeMap<usize, usize> = Default::default();
            for s in &self.strata {
                if s.distance(&x) <= 1e-9 {
                    *by_dim.entry(s.dim).or_insert(0) += 1;
                }
            }
            for (&d, &count) in &by_dim {
                if count > 1 {
                    pass = false;
                    worst = worst.max(count);
                    detail =
                        format!("ambient sample within 1e-9 of {count} strata of dimension {d}");
                }
            }
        }
        CheckResult {
            name: "pairwise_disjointness".into(),
            pass,
            worst: worst as f64,
            detail,
        }
    }

    /// Fit minimal (C, η) of the tangent-alignment inequality for a declared
    /// adjacent pair by sampling and taking the log-log envelope. η is chosen
    /// minimal among grid values whose envelope constant is within a factor 2
    /// of the best achievable, then C is the envelope constant itself.
    pub fn estimate_w_constants(
        &self,
        i: usize,
        j: usize,
        samples: usize,
        seed: u64,
    ) -> Result<WConditionFit, StrataError> {
        if !self.strata[i].frontier_ids.contains(&j) {
            return Err(StrataError::PairNotDeclared { i, j });
        }
        let mi = &self.strata[i];
        let mj = &self.strata[j];
        let mut rng = crate::seeded_rng(seed);
        // (ratio, frontier distance of y) per retained pair
        let mut data: Vec<(f64, f64)> = Vec::new();
        for _ in 0..samples {
            let x = mi.sample(&mut rng);
            let y = mj.sample(&mut rng);
            let sep = (&x - &y).norm();
            if sep < 1e-9 {
                continue;
            }
            let prod = mi.normal_projector(&x) * mj.tangent_projector(&y);
            let norm = operator_norm(&prod);
            let d = self.distance_to_frontier(&y, j).clamp(1e-12, 1.0);
            data.push((norm / sep, d));
        }
        if data.len() < 10 {
            return Err(StrataError::NoSamplePairs);
        }

        let c_of = |eta: f64| -> f64 {
            data.iter()
                .map(|(r, d)| r * d.powf(eta))
                .fold(0.0, f64::max)
        };
        let coarse: Vec<f64> = (0..=16).map(|k| k as f64 * 0.25).collect();
        let eta0 = pick_eta(&coarse, &c_of);
        let fine: Vec<f64> = (-10..=10)
            .map(|k| (eta0 + k as f64 * 0.025).clamp(0.0, 4.0))
            .collect();
        let eta = pick_eta(&fine, &c_of);
        let c = c_of(eta);
        let max_violation = data
            .iter()
            .map(|(r, d)| r - c / d.powf(eta))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(WConditionFit {
            pair: (i, j),
            c,
            eta,
            sample_count: data.len(),
            max_violation,
        })
    }
}

fn pick_eta(grid: &[f64], c_of: &dyn Fn(f64) -> f64) -> f64 {
    let cs: Vec<f64> = grid.iter().map(|&e| c_of(e)).collect();
    let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    for (k, &e) in grid.iter().enumerate() {
        if cs[k] <= 2.0 * cmin + f64::MIN_POSITIVE {
            return e;
        }
    }
    grid[0]
}

fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}
