//! L-regular cells: intervals, singletons, graphs and bands of Lipschitz maps,
//! the constructive cell-shrinking that realizes the two-sided frontier
//! inclusions, and sampling-based checks (inclusion verification and a
//! quasiconvexity estimator).

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::poly::Field;
use crate::strata::StrataError;

/// Subdivisions used when turning curved frontier pieces into polylines.
const CURVE_SUBDIV: usize = 512;

/// A cell built recursively from Lipschitz scalar fields. Dimension cap is 3.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LRegularCell {
    /// Open interval (a, b) in ℝ.
    Interval { a: f64, b: f64 },
    /// A single point in ℝ.
    Singleton { p: f64 },
    /// Γ(ξ) = {(x, ξ(x)) : x ∈ base}.
    GraphCell {
        base: Box<LRegularCell>,
        map: Field,
        lipschitz: f64,
    },
    /// (ξ₁, ξ₂)_base = {(x, y) : x ∈ base, ξ₁(x) < y < ξ₂(x)}.
    BandCell {
        base: Box<LRegularCell>,
        lower: Field,
        upper: Field,
        lipschitz: f64,
    },
}

/// Piecewise-linear frontier piece; a single vertex stands for an isolated point.
#[derive(Clone, Debug)]
pub struct Polyline(pub Vec<DVector<f64>>);

impl Polyline {
    pub fn distance(&self, p: &DVector<f64>) -> f64 {
        if self.0.len() == 1 {
            return point_distance(p, &self.0[0]);
        }
        let mut best = f64::INFINITY;
        for w in self.0.windows(2) {
            best = best.min(point_segment_distance(p, &w[0], &w[1]));
        }
        best
    }
}

fn point_distance(p: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.len() {
        let d = p[i] - a[i];
        acc += d * d;
    }
    acc.sqrt()
}

pub fn point_segment_distance(p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = p.len();
    let mut denom = 0.0;
    let mut dot = 0.0;
    for i in 0..n {
        let ab = b[i] - a[i];
        denom += ab * ab;
        dot += (p[i] - a[i]) * ab;
    }
    if denom == 0.0 {
        return point_distance(p, a);
    }
    let t = (dot / denom).clamp(0.0, 1.0);
    let mut acc = 0.0;
    for i in 0..n {
        let d = p[i] - (a[i] + (b[i] - a[i]) * t);
        acc += d * d;
    }
    acc.sqrt()
}

/// Distance to the union of precomputed frontier polylines.
pub fn polyline_distance(pls: &[Polyline], p: &DVector<f64>) -> f64 {
    pls.iter()
        .map(|pl| pl.distance(p))
        .fold(f64::INFINITY, f64::min)
}

impl LRegularCell {
    pub fn interval(a: f64, b: f64) -> Self {
        LRegularCell::Interval { a, b }
    }

    pub fn band(base: LRegularCell, lower: Field, upper: Field, lipschitz: f64) -> Self {
        LRegularCell::BandCell {
            base: Box::new(base),
            lower,
            upper,
            lipschitz,
        }
    }

    pub fn graph(base: LRegularCell, map: Field, lipschitz: f64) -> Self {
        LRegularCell::GraphCell {
            base: Box::new(base),
            map,
            lipschitz,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            LRegularCell::Interval { .. } | LRegularCell::Singleton { .. } => 1,
            LRegularCell::GraphCell { base, .. } | LRegularCell::BandCell { base, .. } => {
                base.ambient_dim() + 1
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LRegularCell::Interval { .. } => 1,
            LRegularCell::Singleton { .. } => 0,
            LRegularCell::GraphCell { base, .. } => base.dim(),
            LRegularCell::BandCell { base, .. } => base.dim() + 1,
        }
    }

    /// Membership test. `closed` relaxes strict inequalities by `tol`; the open
    /// test is strict in the band/interval coordinates and `tol`-tolerant in
    /// the graph equality.
    pub fn contains(&self, x: &[f64], tol: f64, closed: bool) -> bool {
        match self {
            LRegularCell::Interval { a, b } => {
                if closed {
                    x[0] >= a - tol && x[0] <= b + tol
                } else {
                    x[0] > *a && x[0] < *b
                }
            }
            LRegularCell::Singleton { p } => (x[0] - p).abs() <= tol,
            LRegularCell::GraphCell { base, map, .. } => {
                let k = base.ambient_dim();
                base.contains(&x[..k], tol, closed) && (x[k] - map.eval(&x[..k])).abs() <= tol
            }
            LRegularCell::BandCell {
                base, lower, upper, ..
            } => {
                let k = base.ambient_dim();
                if !base.contains(&x[..k], tol, closed) {
                    return false;
                }
                let (lo, hi) = (lower.eval(&x[..k]), upper.eval(&x[..k]));
                if closed {
                    x[k] >= lo - tol && x[k] <= hi + tol
                } else {
                    x[k] > lo && x[k] < hi
                }
            }
        }
    }

    /// Uniform-ish interior sample (uniform in each recursive coordinate).
    pub fn sample_interior(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            LRegularCell::Interval { a, b } => vec![rng.gen_range(*a..*b)],
            LRegularCell::Singleton { p } => vec![*p],
            LRegularCell::GraphCell { base, map, .. } => {
                let mut x = base.sample_interior(rng);
                let y = map.eval(&x);
                x.push(y);
                x
            }
            LRegularCell::BandCell {
                base, lower, upper, ..
            } => {
                let mut x = base.sample_interior(rng);
                let (lo, hi) = (lower.eval(&x), upper.eval(&x));
                let u: f64 = rng.gen_range(0.0..1.0);
                x.push(lo + u * (hi - lo));
                x
            }
        }
    }

    /// Grid over the closure, used for frontier discretization and bounding boxes.
    fn closure_grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        match self {
            LRegularCell::Interval { a, b } => (0..per_dim)
                .map(|i| vec![a + (b - a) * i as f64 / (per_dim - 1) as f64])
                .collect(),
            LRegularCell::Singleton { p } => vec![vec![*p]],
            LRegularCell::GraphCell { base, map, .. } => base
                .closure_grid(per_dim)
                .into_iter()
                .map(|mut x| {
                    let y = map.eval(&x);
                    x.push(y);
                    x
                })
                .collect(),
            LRegularCell::BandCell {
                base, lower, upper, ..
            } => {
                let mut out = Vec::new();
                for x in base.closure_grid(per_dim) {
                    let (lo, hi) = (lower.eval(&x), upper.eval(&x));
                    for i in 0..per_dim {
                        let mut p = x.clone();
                        p.push(lo + (hi - lo) * i as f64 / (per_dim - 1) as f64);
                        out.push(p);
                    }
                }
                out
            }
        }
    }

    pub fn bbox(&self) -> Vec<(f64, f64)> {
        let pts = self.closure_grid(33);
        let n = self.ambient_dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in &pts {
            for i in 0..n {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        lo.into_iter().zip(hi).collect()
    }

    /// Frontier ∂M = closure(M) ∖ M as polylines (exact for straight pieces,
    /// densely subdivided for curved ones).
    pub fn frontier_polylines(&self) -> Vec<Polyline> {
        match self {
            LRegularCell::Interval { a, b } => vec![
                Polyline(vec![DVector::from_vec(vec![*a])]),
                Polyline(vec![DVector::from_vec(vec![*b])]),
            ],
            LRegularCell::Singleton { .. } => vec![],
            LRegularCell::GraphCell { base, map, .. } => base
                .frontier_polylines()
                .into_iter()
                .map(|pl| {
                    Polyline(
                        densify(&pl.0)
                            .into_iter()
                            .map(|v| {
                                let x: Vec<f64> = v.iter().copied().collect();
                                let y = map.eval(&x);
                                let mut w = x;
                                w.push(y);
                                DVector::from_vec(w)
                            })
                            .collect(),
                    )
                })
                .collect(),
            LRegularCell::BandCell {
                base, lower, upper, ..
            } => {
                let mut out = Vec::new();
                // Γ(ξ₁) and Γ(ξ₂) over the closure of the base.
                if base.ambient_dim() == 1 {
                    let grid = base.closure_grid(CURVE_SUBDIV);
                    for f in [lower, upper] {
                        let pts: Vec<DVector<f64>> = grid
                            .iter()
                            .map(|x| {
                                let mut w = x.clone();
                                w.push(f.eval(x));
                                DVector::from_vec(w)
                            })
                            .collect();
                        out.push(Polyline(pts));
                    }
                } else {
                    // surface caps discretized as a point cloud
                    let grid = base.closure_grid(48);
                    for f in [lower, upper] {
                        for x in &grid {
                            let mut w = x.clone();
                            w.push(f.eval(x));
                            out.push(Polyline(vec![DVector::from_vec(w)]));
                        }
                    }
                }
                // side walls: vertical segments over the base frontier
                for pl in base.frontier_polylines() {
                    for v in densify(&pl.0) {
                        let x: Vec<f64> = v.iter().copied().collect();
                        let (lo, hi) = (lower.eval(&x), upper.eval(&x));
                        let mut wl = x.clone();
                        wl.push(lo);
                        let mut wh = x;
                        wh.push(hi);
                        out.push(Polyline(vec![DVector::from_vec(wl), DVector::from_vec(wh)]));
                    }
                }
                out
            }
        }
    }

    /// Distance from `y` to the frontier; +∞ when the frontier is empty
    /// (singletons).
    pub fn frontier_distance(&self, y: &DVector<f64>) -> f64 {
        let pls = self.frontier_polylines();
        if pls.is_empty() {
            return f64::INFINITY;
        }
        pls.iter()
            .map(|pl| pl.distance(y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance to the closed cell: 0 inside, otherwise distance to the boundary.
    pub fn distance(&self, y: &[f64]) -> f64 {
        if self.contains(y, 1e-12, true) {
            return 0.0;
        }
        let v = DVector::from_vec(y.to_vec());
        match self {
            LRegularCell::Singleton { p } => (y[0] - p).abs(),
            _ => self.frontier_distance(&v),
        }
    }

    fn max_lipschitz(&self) -> f64 {
        match self {
            LRegularCell::Interval { .. } | LRegularCell::Singleton { .. } => 0.0,
            LRegularCell::GraphCell {
                base, lipschitz, ..
            }
            | LRegularCell::BandCell {
                base, lipschitz, ..
            } => lipschitz.max(base.max_lipschitz()),
        }
    }
}

fn densify(pts: &[DVector<f64>]) -> Vec<DVector<f64>> {
    if pts.len() < 2 {
        return pts.to_vec();
    }
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let steps = 8usize;
        for s in 0..steps {
            out.push(&w[0] + (&w[1] - &w[0]) * (s as f64 / steps as f64));
        }
    }
    out.push(pts.last().unwrap().clone());
    out
}

/// Band-level parameters for the shrink construction: the gap condition
/// ξ₂ − ξ₁ > c·d(·, ∂T)^κ that the caller asserts for every band level.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ShrinkParams {
    pub c: f64,
    pub kappa: f64,
}

impl Default for ShrinkParams {
    fn default() -> Self {
        ShrinkParams { c: 1.0, kappa: 1.0 }
    }
}

/// The inset cell M(t) together with the constants of its two-sided inclusion
/// M∖B(∂M, t) ⊂ M(t) ⊂ M∖B(∂M, ϱ·t^θ).
#[derive(Clone, Debug)]
pub struct ShrunkenCell {
    pub parent: LRegularCell,
    pub t: f64,
    pub rho: f64,
    pub theta: f64,
    pub kappa: f64,
    pub c: f64,
    /// band inset β(t) at the outermost band level; 0 for graphs and intervals
    pub beta_t: f64,
    pub cell: LRegularCell,
}

struct ShrinkOut {
    cell: LRegularCell,
    rho: f64,
    theta: f64,
    beta_t: f64,
}

/// Shrink a cell by `t ∈ (0, 1]`.
///
/// Intervals shrink by t at both ends; a graph shrinks its base by
/// t/√(2+L0²); a band additionally insets its maps by
/// β(t) = (c/2)·(ϱ')^κ·(t/√(2+L0²))^{θ'κ}, with (ϱ', θ') the base's own
/// inclusion constants.
pub fn shrink_cell(
    cell: &LRegularCell,
    t: f64,
    params: &ShrinkParams,
) -> Result<ShrunkenCell, StrataError> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(StrataError::DegenerateCell(format!(
            "shrink parameter t={t} outside (0, 1]"
        )));
    }
    check_band_gap(cell, params)?;
    let out = shrink_rec(cell, t, params)?;
    Ok(ShrunkenCell {
        parent: cell.clone(),
        t,
        rho: out.rho,
        theta: out.theta,
        kappa: params.kappa,
        c: params.c,
        beta_t: out.beta_t,
        cell: out.cell,
    })
}

/// Sampled verification of the gap precondition ξ₂ − ξ₁ > c·d(·, ∂T)^κ.
fn check_band_gap(cell: &LRegularCell, params: &ShrinkParams) -> Result<(), StrataError> {
    match cell {
        LRegularCell::Interval { .. } | LRegularCell::Singleton { .. } => Ok(()),
        LRegularCell::GraphCell { base, .. } => check_band_gap(base, params),
        LRegularCell::BandCell {
            base, lower, upper, ..
        } => {
            check_band_gap(base, params)?;
            let mut rng = crate::seeded_rng(42);
            for _ in 0..1000 {
                let x = base.sample_interior(&mut rng);
                let d = base.frontier_distance(&DVector::from_vec(x.clone()));
                let gap = upper.eval(&x) - lower.eval(&x);
                let bound = if d.is_finite() {
                    params.c * d.powf(params.kappa)
                } else {
                    0.0
                };
                // interval frontiers make the comparison tight, so equality passes
                if gap < bound * (1.0 - 1e-12) {
                    return Err(StrataError::DegenerateCell(format!(
                        "band gap {gap:.3e} fails c·d^κ = {bound:.3e} at a sample; (c, κ) invalid"
                    )));
                }
            }
            Ok(())
        }
    }
}

fn shrink_rec(
    cell: &LRegularCell,
    t: f64,
    params: &ShrinkParams,
) -> Result<ShrinkOut, StrataError> {
    match cell {
        LRegularCell::Interval { a, b } => {
            let (a2, b2) = (a + t, b - t);
            if a2 >= b2 {
                return Err(StrataError::DegenerateCell(format!(
                    "interval ({a}, {b}) empties under t={t}"
                )));
            }
            Ok(ShrinkOut {
                cell: LRegularCell::Interval { a: a2, b: b2 },
                rho: 1.0,
                theta: 1.0,
                beta_t: 0.0,
            })
        }
        LRegularCell::Singleton { p } => Ok(ShrinkOut {
            cell: LRegularCell::Singleton { p: *p },
            rho: 1.0,
            theta: 1.0,
            beta_t: 0.0,
        }),
        LRegularCell::GraphCell {
            base,
            map,
            lipschitz,
        } => {
            let s = (2.0 + lipschitz * lipschitz).sqrt();
            let inner = shrink_rec(base, t / s, params)?;
            Ok(ShrinkOut {
                cell: LRegularCell::GraphCell {
                    base: Box::new(inner.cell),
                    map: map.clone(),
                    lipschitz: *lipschitz,
                },
                rho: inner.rho / s.powf(inner.theta),
                theta: inner.theta,
                beta_t: 0.0,
            })
        }
        LRegularCell::BandCell {
            base,
            lower,
            upper,
            lipschitz,
        } => {
            let s = (2.0 + lipschitz * lipschitz).sqrt();
            let inner = shrink_rec(base, t / s, params)?;
            let (rho_b, theta_b) = (inner.rho, inner.theta);
            let theta = theta_b * params.kappa;
            let beta_t = 0.5 * params.c * rho_b.powf(params.kappa) * (t / s).powf(theta);
            if beta_t >= t {
                return Err(StrataError::DegenerateCell(format!(
                    "band inset β(t)={beta_t:.3e} not below t={t}; (c, κ) invalid"
                )));
            }
            let arity = lower.arity();
            let lower2 = add_const(lower, arity, beta_t);
            let upper2 = add_const(upper, arity, -beta_t);
            // nonempty check on base' samples
            let mut rng = crate::seeded_rng(42);
            for _ in 0..1000 {
                let x = inner.cell.sample_interior(&mut rng);
                if lower2.eval(&x) >= upper2.eval(&x) {
                    return Err(StrataError::DegenerateCell(
                        "shrunken band is empty: ξ₁+β ≥ ξ₂−β at a sample".into(),
                    ));
                }
            }
            let lbar = lipschitz.max(1.0);
            let rho = (params.c * rho_b.powf(params.kappa) / (4.0 * lbar * s.powf(theta)))
                .min(rho_b / s.powf(theta_b));
            Ok(ShrinkOut {
                cell: LRegularCell::BandCell {
                    base: Box::new(inner.cell),
                    lower: lower2,
                    upper: upper2,
                    lipschitz: *lipschitz,
                },
                rho,
                theta,
                beta_t,
            })
        }
    }
}

fn add_const(f: &Field, arity: usize, c: f64) -> Field {
    use crate::poly::Polynomial;
    match f {
        Field::Poly(p) => Field::Poly(p.add(&Polynomial::constant(arity, c))),
        Field::Sqrt { .. } if c == 0.0 => f.clone(),
        // offset sqrt has no closed Field form; bands shipped for shrinking
        // use polynomial maps
        Field::Sqrt { .. } => unimplemented!("band shrinking over sqrt maps is not supported"),
    }
}

/// Rebuild a shrunken band with its inset β(t) scaled by `factor`, keeping the
/// recorded inclusion constants. Factors below 1 loosen the inset and serve as
/// the negative control for the right inclusion.
pub fn with_scaled_inset(
    shrunken: &ShrunkenCell,
    factor: f64,
) -> Result<ShrunkenCell, StrataError> {
    let delta = shrunken.beta_t - shrunken.beta_t * factor;
    let mut out = shrunken.clone();
    match &mut out.cell {
        LRegularCell::BandCell { lower, upper, .. } => {
            let arity = lower.arity();
            *lower = add_const(lower, arity, -delta);
            *upper = add_const(upper, arity, delta);
        }
        _ => {
            return Err(StrataError::DegenerateCell(
                "inset scaling applies to band cells only".into(),
            ))
        }
    }
    out.beta_t *= factor;
    Ok(out)
}

/// Monte-Carlo check of both inclusions of a shrunken cell.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InclusionReport {
    pub samples_left: usize,
    pub samples_right: usize,
    pub violations_left: usize,
    pub violations_right: usize,
    /// most negative (d(y,∂M) − t) over left violations, 0 if none
    pub worst_left: f64,
    /// most negative (d(y,∂M) − ϱt^θ) over right violations, 0 if none
    pub worst_right: f64,
}

/// Samples the parent for the left inclusion M∖B(∂M,t) ⊂ M(t) and the
/// shrunken cell for the right inclusion M(t) ⊂ M∖B(∂M, ϱt^θ).
pub fn verify_inclusions(shrunken: &ShrunkenCell, samples: usize, seed: u64) -> InclusionReport {
    let mut rng = crate::seeded_rng(seed);
    let mut report = InclusionReport::default();
    let parent = &shrunken.parent;
    let t = shrunken.t;
    let floor = shrunken.rho * t.powf(shrunken.theta);
    // the frontier discretization is query-independent: build it once
    let frontier = parent.frontier_polylines();

    let parent_pts: Vec<Vec<f64>> = (0..samples)
        .map(|_| parent.sample_interior(&mut rng))
        .collect();
    let shrunk_pts: Vec<Vec<f64>> = (0..samples)
        .map(|_| shrunken.cell.sample_interior(&mut rng))
        .collect();

    let left = crate::parallel::par_map(parent_pts, |x| {
        let v = DVector::from_vec(x.clone());
        let d = if frontier.is_empty() {
            f64::INFINITY
        } else {
            polyline_distance(&frontier, &v)
        };
        if d > t {
            if shrunken.cell.contains(&x, 1e-9, false) {
                Some(0.0)
            } else {
                Some(d - t)
            }
        } else {
            None
        }
    });
    for r in left.into_iter().flatten() {
        report.samples_left += 1;
        if r > 0.0 {
            report.violations_left += 1;
            report.worst_left = report.worst_left.max(r);
        }
    }

    let right = crate::parallel::par_map(shrunk_pts, |x| {
        let v = DVector::from_vec(x);
        if frontier.is_empty() {
            f64::INFINITY
        } else {
            polyline_distance(&frontier, &v) - floor
        }
    });
    for m in right {
        report.samples_right += 1;
        if m < 0.0 {
            report.violations_right += 1;
            report.worst_right = report.worst_right.min(m);
        }
    }
    report
}

/// Upper estimate of the quasiconvexity constant: max over sampled pairs of
/// (in-cell path length) / (Euclidean distance), built on a k-nearest-neighbor
/// graph over interior samples. Paths are shortcut through segments that stay
/// inside the cell, so convex cells report exactly 1.
pub fn quasiconvexity_estimate(
    cell: &LRegularCell,
    samples: usize,
    seed: u64,
) -> Result<f64, StrataError> {
    let mut rng = crate::seeded_rng(seed);
    let n_nodes = samples.clamp(16, 900);
    let nodes: Vec<DVector<f64>> = (0..n_nodes)
        .map(|_| DVector::from_vec(cell.sample_interior(&mut rng)))
        .collect();

    let k = 14.min(n_nodes - 1);
    let tol = 1e-7 * (1.0 + cell.max_lipschitz());
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
    for i in 0..n_nodes {
        let mut dists: Vec<(usize, f64)> = (0..n_nodes)
            .filter(|&j| j != i)
            .map(|j| (j, (&nodes[i] - &nodes[j]).norm()))
            .collect();
        dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for &(j, d) in dists.iter().take(k) {
            if segment_in_cell(cell, &nodes[i], &nodes[j], tol) {
                adj[i].push((j, d));
                adj[j].push((i, d));
            }
        }
    }

    // connectivity
    let mut seen = vec![false; n_nodes];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(StrataError::DisconnectedSample);
    }

    // farthest-point hubs for coverage
    let n_hubs = 16.min(n_nodes);
    let mut hubs = vec![0usize];
    let mut mind: Vec<f64> = nodes.iter().map(|p| (p - &nodes[0]).norm()).collect();
    while hubs.len() < n_hubs {
        let (next, _) = mind
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        hubs.push(next);
        for (i, p) in nodes.iter().enumerate() {
            mind[i] = mind[i].min((p - &nodes[next]).norm());
        }
    }

    let diag = {
        let bb = cell.bbox();
        bb.iter()
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    };
    let min_sep = 0.05 * diag;

    let mut cmax: f64 = 1.0;
    for &h in &hubs {
        let (dist, prev) = dijkstra(&adj, h);
        for j in 0..n_nodes {
            let euclid = (&nodes[j] - &nodes[h]).norm();
            if euclid < min_sep || !dist[j].is_finite() {
                continue;
            }
            // reconstruct and shortcut the path
            let mut path = vec![j];
            let mut cur = j;
            while cur != h {
                cur = prev[cur];
                path.push(cur);
            }
            let len = shortcut_length(cell, &nodes, &path, tol);
            cmax = cmax.max(len / euclid);
        }
    }
    Ok(cmax)
}

fn segment_in_cell(cell: &LRegularCell, a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    let checks = 24;
    for s in 1..checks {
        let p = a + (b - a) * (s as f64 / checks as f64);
        let pv: Vec<f64> = p.iter().copied().collect();
        if !cell.contains(&pv, tol, false) && !cell.contains(&pv, tol, true) {
            return false;
        }
    }
    true
}

fn shortcut_length(cell: &LRegularCell, nodes: &[DVector<f64>], path: &[usize], tol: f64) -> f64 {
    let mut len = 0.0;
    let mut i = 0;
    while i + 1 < path.len() {
        // greedily jump to the farthest path node visible through the cell
        let mut j = path.len() - 1;
        while j > i + 1 {
            if segment_in_cell(cell, &nodes[path[i]], &nodes[path[j]], tol) {
                break;
            }
            j -= 1;
        }
        len += (&nodes[path[i]] - &nodes[path[j]]).norm();
        i = j;
    }
    len
}

fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> (Vec<f64>, Vec<usize>) {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }

    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    prev[src] = src;
    heap.push(Reverse(Entry(0.0, src)));
    while let Some(Reverse(Entry(d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse(Entry(nd, v)));
            }
        }
    }
    (dist, prev)
}
