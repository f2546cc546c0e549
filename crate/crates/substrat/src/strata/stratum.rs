//! Strata: points, affine patches, and (rotated) graphs of smooth maps over
//! L-regular domain cells. Provides nearest-point projection, distances,
//! tangent/normal projectors, and parametric samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::poly::Field;
use crate::strata::cell::LRegularCell;
use crate::strata::StrataError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StratumShape {
    /// A single point.
    Point { p: Vec<f64> },
    /// base + basis·u for u in the local box; basis columns orthonormal.
    AffinePatch {
        base: Vec<f64>,
        /// n×d, stored column-major as d columns of length n
        basis: Vec<Vec<f64>>,
        local_box: Vec<(f64, f64)>,
    },
    /// offset + rotation·(u, ξ(u)) for u in the domain cell ⊂ ℝᵏ.
    ///
    /// `map` has n−k components of arity k; with no components the stratum is
    /// the embedded domain cell itself (a full-dimensional stratum).
    Graph {
        offset: Vec<f64>,
        /// n×n orthogonal, stored as n rows
        rotation: Vec<Vec<f64>>,
        domain: LRegularCell,
        map: Vec<Field>,
        lipschitz: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stratum {
    pub id: usize,
    pub dim: usize,
    pub shape: StratumShape,
    pub frontier_ids: Vec<usize>,
    /// lazily discretized domain boundary for full-dimensional graph strata
    #[serde(skip)]
    boundary_cache: std::sync::OnceLock<Vec<crate::strata::cell::Polyline>>,
}

const GN_MAX_STEPS: usize = 100;
const GN_STATIONARITY: f64 = 1e-10;
const GN_RESTART_AGREEMENT: f64 = 1e-6;

impl Stratum {
    pub fn point(id: usize, p: Vec<f64>, frontier_ids: Vec<usize>) -> Self {
        Stratum {
            id,
            dim: 0,
            shape: StratumShape::Point { p },
            frontier_ids,
            boundary_cache: Default::default(),
        }
    }

    pub fn affine(
        id: usize,
        base: Vec<f64>,
        basis: Vec<Vec<f64>>,
        local_box: Vec<(f64, f64)>,
        frontier_ids: Vec<usize>,
    ) -> Self {
        let dim = basis.len();
        Stratum {
            id,
            dim,
            shape: StratumShape::AffinePatch {
                base,
                basis,
                local_box,
            },
            frontier_ids,
            boundary_cache: Default::default(),
        }
    }

    pub fn graph(
        id: usize,
        offset: Vec<f64>,
        rotation: Vec<Vec<f64>>,
        domain: LRegularCell,
        map: Vec<Field>,
        lipschitz: f64,
        frontier_ids: Vec<usize>,
    ) -> Self {
        let dim = domain.dim();
        Stratum {
            id,
            dim,
            shape: StratumShape::Graph {
                offset,
                rotation,
                domain,
                map,
                lipschitz,
            },
            frontier_ids,
            boundary_cache: Default::default(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.shape {
            StratumShape::Point { p } => p.len(),
            StratumShape::AffinePatch { base, .. } => base.len(),
            StratumShape::Graph { offset, .. } => offset.len(),
        }
    }

    fn rotation_matrix(rotation: &[Vec<f64>]) -> DMatrix<f64> {
        let n = rotation.len();
        DMatrix::from_fn(n, n, |i, j| rotation[i][j])
    }

    fn basis_matrix(basis: &[Vec<f64>], n: usize) -> DMatrix<f64> {
        let d = basis.len();
        DMatrix::from_fn(n, d, |i, j| basis[j][i])
    }

    /// Embed graph parameters u ∈ ℝᵏ into ambient space.
    fn graph_embed(offset: &[f64], rot: &DMatrix<f64>, map: &[Field], u: &[f64]) -> DVector<f64> {
        let n = offset.len();
        let k = u.len();
        let mut w = DVector::zeros(n);
        for (i, ui) in u.iter().enumerate() {
            w[i] = *ui;
        }
        for (i, f) in map.iter().enumerate() {
            w[k + i] = f.eval(u);
        }
        DVector::from_vec(offset.to_vec()) + rot * w
    }

    /// Ambient Jacobian of the embedding, n×k.
    fn graph_jacobian(rot: &DMatrix<f64>, map: &[Field], k: usize, u: &[f64]) -> DMatrix<f64> {
        let n = rot.nrows();
        let mut j = DMatrix::zeros(n, k);
        for c in 0..k {
            j[(c, c)] = 1.0;
        }
        for (i, f) in map.iter().enumerate() {
            let g = f.gradient(u);
            for c in 0..k {
                j[(k + i, c)] = g[c];
            }
        }
        rot * j
    }

    /// Membership within `tol`.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match &self.shape {
            StratumShape::Point { p } => (x - DVector::from_vec(p.clone())).norm() <= tol,
            StratumShape::AffinePatch {
                base,
                basis,
                local_box,
            } => {
                let n = base.len();
                let b = Self::basis_matrix(basis, n);
                let rel = x - DVector::from_vec(base.clone());
                let u = b.transpose() * &rel;
                let resid = (&rel - &b * &u).norm();
                resid <= tol
                    && local_box
                        .iter()
                        .zip(u.iter())
                        .all(|((lo, hi), ui)| *ui >= lo - tol && *ui <= hi + tol)
            }
            StratumShape::Graph {
                offset,
                rotation,
                domain,
                map,
                ..
            } => {
                let rot = Self::rotation_matrix(rotation);
                let local = rot.transpose() * (x - DVector::from_vec(offset.clone()));
                let k = domain.ambient_dim();
                let u: Vec<f64> = local.iter().take(k).copied().collect();
                if !domain.contains(&u, tol, false) && !domain.contains(&u, tol, true) {
                    return false;
                }
                map.iter()
                    .enumerate()
                    .all(|(i, f)| (local[k + i] - f.eval(&u)).abs() <= tol)
            }
        }
    }

    /// Nearest point of the stratum. Closed-form for points and affine
    /// patches; damped Gauss-Newton with two grid-seeded restarts for graphs.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>, StrataError> {
        match &self.shape {
            StratumShape::Point { p } => Ok(DVector::from_vec(p.clone())),
            StratumShape::AffinePatch {
                base,
                basis,
                local_box,
            } => {
                let n = base.len();
                let b = Self::basis_matrix(basis, n);
                let rel = x - DVector::from_vec(base.clone());
                let mut u = b.transpose() * &rel;
                for (i, (lo, hi)) in local_box.iter().enumerate() {
                    u[i] = u[i].clamp(*lo, *hi);
                }
                Ok(DVector::from_vec(base.clone()) + b * u)
            }
            StratumShape::Graph {
                offset,
                rotation,
                domain,
                map,
                ..
            } => {
                let rot = Self::rotation_matrix(rotation);
                let k = domain.ambient_dim();
                let seeds = self.graph_seed_params(x, &rot, offset, map, domain, k);
                let mut results: Vec<(Vec<f64>, f64)> = Vec::new();
                for seed in seeds {
                    if let Some(r) = gauss_newton(x, offset, &rot, map, domain, k, seed) {
                        results.push(r);
                    }
                }
                if results.is_empty() {
                    return Err(StrataError::OutsideTube(
                        "Gauss-Newton failed to converge from both restarts".into(),
                    ));
                }
                if results.len() == 2 {
                    let pa = Self::graph_embed(offset, &rot, map, &results[0].0);
                    let pb = Self::graph_embed(offset, &rot, map, &results[1].0);
                    if (pa - pb).norm() > GN_RESTART_AGREEMENT
                        && (results[0].1 - results[1].1).abs() > GN_RESTART_AGREEMENT
                    {
                        return Err(StrataError::OutsideTube(format!(
                            "restarts disagree: d {} vs {}",
                            results[0].1, results[1].1
                        )));
                    }
                }
                results.sort_by(|a, b| a.1.total_cmp(&b.1));
                Ok(Self::graph_embed(offset, &rot, map, &results[0].0))
            }
        }
    }

    /// Two restart seeds: the best and second-best (well-separated) points of a
    /// deterministic parameter grid.
    fn graph_seed_params(
        &self,
        x: &DVector<f64>,
        rot: &DMatrix<f64>,
        offset: &[f64],
        map: &[Field],
        domain: &LRegularCell,
        k: usize,
    ) -> Vec<Vec<f64>> {
        let grid = param_grid(domain, if k == 1 { 129 } else { 17 });
        let mut scored: Vec<(Vec<f64>, f64)> = grid
            .into_iter()
            .map(|u| {
                let p = Self::graph_embed(offset, rot, map, &u);
                let d = (x - p).norm();
                (u, d)
            })
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = scored[0].clone();
        let sep = 0.05 * domain_extent(domain);
        let second = scored
            .iter()
            .find(|(u, _)| param_dist(u, &best.0) > sep)
            .cloned()
            .unwrap_or_else(|| best.clone());
        vec![best.0, second.0]
    }

    /// Euclidean distance to the stratum. Exact for points/affine patches;
    /// grid minimum refined by Gauss-Newton for graphs.
    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        match &self.shape {
            StratumShape::Point { p } => (x - DVector::from_vec(p.clone())).norm(),
            StratumShape::AffinePatch { .. } => {
                let y = self.project(x).expect("affine projection is total");
                (x - y).norm()
            }
            StratumShape::Graph {
                offset,
                rotation,
                domain,
                map,
                ..
            } => {
                let rot = Self::rotation_matrix(rotation);
                let k = domain.ambient_dim();
                if map.is_empty() {
                    // full-dimensional: distance to the embedded closed cell,
                    // against a boundary discretized once per stratum
                    let local = rot.transpose() * (x - DVector::from_vec(offset.clone()));
                    let u = DVector::from_iterator(k, local.iter().take(k).copied());
                    let uv: Vec<f64> = u.iter().copied().collect();
                    if domain.contains(&uv, 1e-12, true) {
                        return 0.0;
                    }
                    let boundary = self
                        .boundary_cache
                        .get_or_init(|| domain.frontier_polylines());
                    if boundary.is_empty() {
                        return domain.distance(&uv);
                    }
                    return crate::strata::cell::polyline_distance(boundary, &u);
                }
                let grid = param_grid(domain, if k == 1 { 257 } else { 33 });
                let mut best = f64::INFINITY;
                let mut best_u = vec![0.0; k];
                for u in grid {
                    let p = Self::graph_embed(offset, &rot, map, &u);
                    let d = (x - p).norm();
                    if d < best {
                        best = d;
                        best_u = u;
                    }
                }
                if let Some((_, d)) = gauss_newton(x, offset, &rot, map, domain, k, best_u) {
                    best = best.min(d);
                }
                best
            }
        }
    }

    /// Orthogonal projector onto the tangent space at y ∈ M.
    pub fn tangent_projector(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.ambient_dim();
        match &self.shape {
            StratumShape::Point { .. } => DMatrix::zeros(n, n),
            StratumShape::AffinePatch { basis, .. } => {
                let b = Self::basis_matrix(basis, n);
                &b * b.transpose()
            }
            StratumShape::Graph {
                offset,
                rotation,
                domain,
                map,
                ..
            } => {
                let rot = Self::rotation_matrix(rotation);
                let k = domain.ambient_dim();
                let local = rot.transpose() * (y - DVector::from_vec(offset.clone()));
                let u: Vec<f64> = local.iter().take(k).copied().collect();
                let j = Self::graph_jacobian(&rot, map, k, &u);
                // orthonormalize the k tangent columns
                let qr = j.qr();
                let q = qr.q();
                let q = q.columns(0, k).into_owned();
                &q * q.transpose()
            }
        }
    }

    pub fn normal_projector(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.ambient_dim();
        DMatrix::identity(n, n) - self.tangent_projector(y)
    }

    /// Draw a point of the stratum from its parametrization.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match &self.shape {
            StratumShape::Point { p } => DVector::from_vec(p.clone()),
            StratumShape::AffinePatch {
                base,
                basis,
                local_box,
            } => {
                let n = base.len();
                let b = Self::basis_matrix(basis, n);
                let u = DVector::from_vec(
                    local_box
                        .iter()
                        .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                        .collect(),
                );
                DVector::from_vec(base.clone()) + b * u
            }
            StratumShape::Graph {
                offset,
                rotation,
                domain,
                map,
                ..
            } => {
                let rot = Self::rotation_matrix(rotation);
                let u = domain.sample_interior(rng);
                let k = domain.ambient_dim();
                Self::graph_embed(offset, &rot, map, &u[..k])
            }
        }
    }

    /// Local parameter coordinates of an ambient point (for graph strata).
    pub fn graph_params(&self, x: &DVector<f64>) -> Option<Vec<f64>> {
        match &self.shape {
            StratumShape::Graph {
                offset,
                rotation,
                domain,
                ..
            } => {
                let rot = Self::rotation_matrix(rotation);
                let local = rot.transpose() * (x - DVector::from_vec(offset.clone()));
                Some(local.iter().take(domain.ambient_dim()).copied().collect())
            }
            _ => None,
        }
    }
}

fn param_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn domain_extent(domain: &LRegularCell) -> f64 {
    domain
        .bbox()
        .iter()
        .map(|(l, h)| (h - l) * (h - l))
        .sum::<f64>()
        .sqrt()
}

/// Deterministic grid over the closure of the domain cell.
fn param_grid(domain: &LRegularCell, per_dim: usize) -> Vec<Vec<f64>> {
    let bb = domain.bbox();
    let k = bb.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let u: Vec<f64> = (0..k)
            .map(|d| {
                let (lo, hi) = bb[d];
                lo + (hi - lo) * idx[d] as f64 / (per_dim - 1) as f64
            })
            .collect();
        if domain.contains(&u, 1e-9, true) {
            out.push(u);
        }
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < per_dim {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == k {
                return out;
            }
        }
    }
}

/// Damped Gauss-Newton for min_u |γ(u) − x|², u clamped to the domain bbox.
/// Returns the parameter and its distance, or None on non-convergence.
fn gauss_newton(
    x: &DVector<f64>,
    offset: &[f64],
    rot: &DMatrix<f64>,
    map: &[Field],
    domain: &LRegularCell,
    k: usize,
    mut u: Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    let bb = domain.bbox();
    let mut resid = Stratum::graph_embed(offset, rot, map, &u) - x;
    for _ in 0..GN_MAX_STEPS {
        let j = Stratum::graph_jacobian(rot, map, k, &u);
        let grad = j.transpose() * &resid;
        if grad.norm() <= GN_STATIONARITY * (1.0 + resid.norm()) {
            return Some((u, resid.norm()));
        }
        let jtj = j.transpose() * &j;
        let step = jtj.lu().solve(&(-&grad))?;
        let mut damp = 1.0;
        let cur = resid.norm_squared();
        let mut moved = false;
        for _ in 0..30 {
            let mut cand = u.clone();
            for i in 0..k {
                cand[i] = (cand[i] + damp * step[i]).clamp(bb[i].0, bb[i].1);
            }
            let r2 = Stratum::graph_embed(offset, rot, map, &cand) - x;
            if r2.norm_squared() < cur || param_dist(&cand, &u) == 0.0 {
                // accept strictly improving steps; clamped no-ops end the search
                if r2.norm_squared() < cur {
                    u = cand;
                    resid = r2;
                    moved = true;
                }
                break;
            }
            damp *= 0.5;
        }
        if !moved {
            // stuck on the boundary or at a flat spot: report the current point
            return Some((u, resid.norm()));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;

    fn line_x1_zero() -> Stratum {
        // {x₁ = 0} in ℝ², spanned by e₂
        Stratum::affine(
            0,
            vec![0.0, 0.0],
            vec![vec![0.0, 1.0]],
            vec![(-10.0, 10.0)],
            vec![],
        )
    }

    #[test]
    fn affine_projection_drops_orthogonally() {
        let m = line_x1_zero();
        let y = m.project(&DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((y - DVector::from_vec(vec![0.0, 4.0])).norm() < 1e-14);
    }

    #[test]
    fn point_projection_and_distance() {
        let m = Stratum::point(0, vec![0.0], vec![]);
        let y = m.project(&DVector::from_vec(vec![7.0])).unwrap();
        assert_eq!(y[0], 0.0);
        assert_eq!(m.distance(&DVector::from_vec(vec![1.0])), 1.0);
    }

    #[test]
    fn distance_examples() {
        let m = line_x1_zero();
        assert!((m.distance(&DVector::from_vec(vec![1.0, 1.0])) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tangent_projector_affine_and_point() {
        let m = line_x1_zero();
        let p = m.tangent_projector(&DVector::from_vec(vec![0.0, 0.5]));
        assert!((p[(0, 0)]).abs() < 1e-14 && (p[(1, 1)] - 1.0).abs() < 1e-14);

        let pt = Stratum::point(1, vec![0.0, 0.0], vec![]);
        let t = pt.tangent_projector(&DVector::from_vec(vec![0.0, 0.0]));
        assert_eq!(t.norm(), 0.0);
        let n = pt.normal_projector(&DVector::from_vec(vec![0.0, 0.0]));
        assert!((n - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    fn parabola() -> Stratum {
        // graph of ξ(t) = t² over (-1, 1)
        Stratum::graph(
            0,
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            LRegularCell::interval(-1.0, 1.0),
            vec![Field::Poly(Polynomial::new(1, [(vec![2], 1.0)]))],
            2.0,
            vec![],
        )
    }

    #[test]
    fn graph_tangent_projector() {
        let m = parabola();
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let p = m.tangent_projector(&y);
        let u = DVector::from_vec(vec![1.0, 2.0]) / 5.0f64.sqrt();
        let expect = &u * u.transpose();
        assert!((p - expect).norm() < 1e-10);
    }

    #[test]
    fn graph_projection_matches_dense_grid_argmin() {
        let m = parabola();
        let x = DVector::from_vec(vec![0.0, 0.5]);
        let y = m.project(&x).unwrap();

        // brute-force oracle: grid over t with step 1e-5
        let mut best = f64::INFINITY;
        let mut best_t = 0.0;
        let mut t = -1.0;
        while t <= 1.0 {
            let d = (t - x[0]).powi(2) + (t * t - x[1]).powi(2);
            if d < best {
                best = d;
                best_t = t;
            }
            t += 1e-5;
        }
        let oracle = DVector::from_vec(vec![best_t, best_t * best_t]);
        assert!(
            (&y - &oracle).norm() < 1e-4,
            "projection {:?} vs oracle {:?}",
            y.as_slice(),
            oracle.as_slice()
        );
    }

    #[test]
    fn graph_projection_off_vertex() {
        let m = parabola();
        // a point clearly inside the tube with a unique nearest point
        let x = DVector::from_vec(vec![0.5, 0.1]);
        let y = m.project(&x).unwrap();
        let mut best = f64::INFINITY;
        let mut best_t = 0.0;
        let mut t = -1.0;
        while t <= 1.0 {
            let d = (t - x[0]).powi(2) + (t * t - x[1]).powi(2);
            if d < best {
                best = d;
                best_t = t;
            }
            t += 1e-5;
        }
        assert!((y[0] - best_t).abs() < 1e-5);
        // optimality against random on-stratum points
        let mut rng = crate::seeded_rng(7);
        let dproj = (&x - &y).norm();
        for _ in 0..1000 {
            let s = m.sample(&mut rng);
            assert!(dproj <= (&x - s).norm() + 1e-12);
        }
    }

    #[test]
    fn projection_is_lipschitz_near_the_stratum() {
        // pairs within r of M∖B(∂M, t) project L-Lipschitz-ly; the parabola
        // over (−1, 1) with t = 0.3, r = 0.05 tolerates L = 2
        let m = parabola();
        let (t, r, l) = (0.3, 0.05, 2.0);
        let mut rng = crate::seeded_rng(42);
        for _ in 0..10_000 {
            let u = rand::Rng::gen_range(&mut rng, -1.0 + t..1.0 - t);
            let base = DVector::from_vec(vec![u, u * u]);
            let off = DVector::from_vec(vec![
                rand::Rng::gen_range(&mut rng, -r..r),
                rand::Rng::gen_range(&mut rng, -r..r),
            ]);
            let x = &base + &off * 0.70;
            let y = &base + &off * -0.70;
            let px = m.project(&x).unwrap();
            let py = m.project(&y).unwrap();
            let (num, den) = ((&px - &py).norm(), (&x - &y).norm());
            assert!(num <= l * den + 1e-12, "ratio {} at u = {u}", num / den);
        }
    }

    #[test]
    fn projector_identities_hold() {
        let m = parabola();
        let mut rng = crate::seeded_rng(3);
        for _ in 0..50 {
            let y = m.sample(&mut rng);
            let p = m.tangent_projector(&y);
            let n = m.normal_projector(&y);
            assert!((&p * &p - &p).norm() < 1e-10);
            assert!((&p + &n - DMatrix::identity(2, 2)).norm() < 1e-12);
            assert!((&p - p.transpose()).norm() < 1e-12);
        }
    }
}
