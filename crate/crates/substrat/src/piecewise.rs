//! Locally Lipschitz piecewise-smooth functions as max/min/sum trees over
//! polynomial pieces, with exact values, Clarke subdifferentials on the
//! regular max/min/sum class, and Riemannian gradients on declared strata.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::poly::Polynomial;
use crate::strata::Stratum;

/// Cross-combination cap for sum nodes; beyond this the model is too coupled
/// for exact hull bookkeeping and must be restructured.
pub const GENERATOR_CAP: usize = 64;

/// Default absolute activity tolerance.
pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, thiserror::Error)]
pub enum PiecewiseError {
    #[error(
        "generator cross-combinations exceed the cap of {GENERATOR_CAP}; restructure the model"
    )]
    GeneratorOverflow,
    #[error(
        "generator projections onto the stratum tangent disagree by {spread:.3e} (> 1e-6): \
         the declared stratum is not one on which the function is smooth"
    )]
    InconsistentStratification { spread: f64 },
    #[error("point has dimension {got}, function expects {expect}")]
    DimensionMismatch { got: usize, expect: usize },
}

/// A smooth polynomial piece with exact gradient and Hessian. The gradient
/// polynomials are differentiated once and cached.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothPiece {
    pub id: usize,
    pub value: Polynomial,
    #[serde(skip)]
    grad: std::sync::OnceLock<Vec<Polynomial>>,
}

impl SmoothPiece {
    pub fn new(id: usize, value: Polynomial) -> Self {
        SmoothPiece {
            id,
            value,
            grad: std::sync::OnceLock::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    fn grad_polys(&self) -> &Vec<Polynomial> {
        self.grad.get_or_init(|| {
            (0..self.value.arity())
                .map(|i| self.value.partial(i))
                .collect()
        })
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.value.arity(),
            self.grad_polys().iter().map(|p| p.eval(x)),
        )
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.value.hessian(x)
    }
}

/// Combinator tree over smooth pieces.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Node {
    Piece(SmoothPiece),
    Max {
        children: Vec<Node>,
    },
    Min {
        children: Vec<Node>,
    },
    Sum {
        children: Vec<Node>,
    },
    Scale {
        c: f64,
        child: Box<Node>,
    },
    /// h(x) = g(A x + b)
    AffineCompose {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        child: Box<Node>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiecewiseFunction {
    pub name: String,
    pub root: Node,
    pub lipschitz_bound: f64,
    /// the stated box X on which the model and its bound are valid
    pub domain_box: Vec<(f64, f64)>,
    /// known critical value, when the model has one
    pub f_star: Option<f64>,
}

/// Generators of ∂f(x): the convex hull of `generators` equals the Clarke
/// subdifferential for max/min/sum trees of C¹ pieces.
#[derive(Clone, Debug)]
pub struct SubdifferentialSet {
    pub base_point: DVector<f64>,
    pub generators: Vec<DVector<f64>>,
}

impl PiecewiseFunction {
    pub fn dim(&self) -> usize {
        self.domain_box.len()
    }

    pub fn in_box(&self, x: &DVector<f64>) -> bool {
        self.domain_box
            .iter()
            .zip(x.iter())
            .all(|((lo, hi), xi)| *xi >= *lo && *xi <= *hi)
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> f64 {
        let xs: Vec<f64> = x.iter().copied().collect();
        eval_node(&self.root, &xs)
    }

    /// Leaf ids within `tol` of the resolved value along the max/min path.
    pub fn active_pieces(&self, x: &DVector<f64>, tol: f64) -> Vec<usize> {
        let xs: Vec<f64> = x.iter().copied().collect();
        let mut out = Vec::new();
        collect_active(&self.root, &xs, tol, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Clarke subdifferential generators: gradients of active leaves propagated
    /// through the tree (max/min union active branches, sum cross-combines).
    pub fn clarke_subdifferential(
        &self,
        x: &DVector<f64>,
        tol: f64,
    ) -> Result<SubdifferentialSet, PiecewiseError> {
        if x.len() != self.dim() {
            return Err(PiecewiseError::DimensionMismatch {
                got: x.len(),
                expect: self.dim(),
            });
        }
        let xs: Vec<f64> = x.iter().copied().collect();
        let gens = node_generators(&self.root, &xs, tol)?;
        Ok(SubdifferentialSet {
            base_point: x.clone(),
            generators: dedup_generators(gens),
        })
    }

    /// Riemannian gradient on a declared stratum: the tangent projection of
    /// any subgradient, checked to be selection-independent.
    pub fn riemannian_gradient(
        &self,
        stratum: &Stratum,
        y: &DVector<f64>,
        tol: f64,
    ) -> Result<DVector<f64>, PiecewiseError> {
        let sd = self.clarke_subdifferential(y, tol)?;
        let pt = stratum.tangent_projector(y);
        let projections: Vec<DVector<f64>> = sd.generators.iter().map(|g| &pt * g).collect();
        let mut spread = 0.0f64;
        for a in &projections {
            for b in &projections {
                spread = spread.max((a - b).norm());
            }
        }
        if spread > 1e-6 {
            return Err(PiecewiseError::InconsistentStratification { spread });
        }
        Ok(projections.into_iter().next().expect("nonempty"))
    }
}

fn eval_node(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Piece(p) => p.eval(x),
        Node::Max { children } => children
            .iter()
            .map(|c| eval_node(c, x))
            .fold(f64::NEG_INFINITY, f64::max),
        Node::Min { children } => children
            .iter()
            .map(|c| eval_node(c, x))
            .fold(f64::INFINITY, f64::min),
        Node::Sum { children } => children.iter().map(|c| eval_node(c, x)).sum(),
        Node::Scale { c, child } => c * eval_node(child, x),
        Node::AffineCompose { a, b, child } => {
            let y = affine_apply(a, b, x);
            eval_node(child, &y)
        }
    }
}

fn affine_apply(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(row, bi)| row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>() + bi)
        .collect()
}

fn collect_active(node: &Node, x: &[f64], tol: f64, out: &mut Vec<usize>) {
    match node {
        Node::Piece(p) => out.push(p.id),
        Node::Max { children } => {
            let vals: Vec<f64> = children.iter().map(|c| eval_node(c, x)).collect();
            let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (c, v) in children.iter().zip(&vals) {
                if best - v <= tol {
                    collect_active(c, x, tol, out);
                }
            }
        }
        Node::Min { children } => {
            let vals: Vec<f64> = children.iter().map(|c| eval_node(c, x)).collect();
            let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            for (c, v) in children.iter().zip(&vals) {
                if v - best <= tol {
                    collect_active(c, x, tol, out);
                }
            }
        }
        Node::Sum { children } => {
            for c in children {
                collect_active(c, x, tol, out);
            }
        }
        Node::Scale { child, .. } => collect_active(child, x, tol, out),
        Node::AffineCompose { a, b, child } => {
            let y = affine_apply(a, b, x);
            collect_active(child, &y, tol, out);
        }
    }
}

fn node_generators(node: &Node, x: &[f64], tol: f64) -> Result<Vec<DVector<f64>>, PiecewiseError> {
    match node {
        Node::Piece(p) => Ok(vec![p.gradient(x)]),
        Node::Max { children } | Node::Min { children } => {
            let vals: Vec<f64> = children.iter().map(|c| eval_node(c, x)).collect();
            let is_max = matches!(node, Node::Max { .. });
            let best = if is_max {
                vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            } else {
                vals.iter().cloned().fold(f64::INFINITY, f64::min)
            };
            let mut gens = Vec::new();
            for (c, v) in children.iter().zip(&vals) {
                let active = if is_max {
                    best - v <= tol
                } else {
                    v - best <= tol
                };
                if active {
                    gens.extend(node_generators(c, x, tol)?);
                }
            }
            if gens.len() > GENERATOR_CAP {
                return Err(PiecewiseError::GeneratorOverflow);
            }
            Ok(gens)
        }
        Node::Sum { children } => {
            let mut acc: Vec<DVector<f64>> = vec![];
            for (k, c) in children.iter().enumerate() {
                let gens = node_generators(c, x, tol)?;
                if k == 0 {
                    acc = gens;
                } else {
                    let mut next = Vec::with_capacity(acc.len() * gens.len());
                    for a in &acc {
                        for g in &gens {
                            next.push(a + g);
                            if next.len() > GENERATOR_CAP {
                                return Err(PiecewiseError::GeneratorOverflow);
                            }
                        }
                    }
                    acc = next;
                }
            }
            Ok(acc)
        }
        Node::Scale { c, child } => Ok(node_generators(child, x, tol)?
            .into_iter()
            .map(|g| g * *c)
            .collect()),
        Node::AffineCompose { a, b, child } => {
            let y = affine_apply(a, b, x);
            let inner = node_generators(child, &y, tol)?;
            let m = a.len();
            let n = x.len();
            let amat = DMatrix::from_fn(m, n, |i, j| a[i][j]);
            Ok(inner.into_iter().map(|g| amat.transpose() * g).collect())
        }
    }
}

fn dedup_generators(gens: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(gens.len());
    for g in gens {
        if !out.iter().any(|h| (h - &g).norm() <= 1e-14) {
            out.push(g);
        }
    }
    out
}

/// Convenience builders used by the corpus and tests.
pub mod build {
    use super::*;

    pub fn piece(id: usize, value: Polynomial) -> Node {
        Node::Piece(SmoothPiece::new(id, value))
    }

    pub fn max(children: Vec<Node>) -> Node {
        Node::Max { children }
    }

    pub fn sum(children: Vec<Node>) -> Node {
        Node::Sum { children }
    }

    /// |x_i| in ℝⁿ as max(x_i, −x_i) with pieces (id, id+1)
    pub fn abs_coord(n: usize, i: usize, id: usize) -> Node {
        let xi = Polynomial::coord(n, i);
        max(vec![piece(id, xi.clone()), piece(id + 1, xi.scale(-1.0))])
    }
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;
    use crate::poly::Polynomial;

    fn abs1() -> PiecewiseFunction {
        PiecewiseFunction {
            name: "abs".into(),
            root: abs_coord(1, 0, 0),
            lipschitz_bound: 1.0,
            domain_box: vec![(-2.0, 2.0)],
            f_star: Some(0.0),
        }
    }

    fn quad1() -> PiecewiseFunction {
        PiecewiseFunction {
            name: "quad".into(),
            root: piece(0, Polynomial::new(1, [(vec![2], 1.0)])),
            lipschitz_bound: 4.0,
            domain_box: vec![(-2.0, 2.0)],
            f_star: Some(0.0),
        }
    }

    #[test]
    fn evaluate_examples() {
        let f = abs1();
        assert_eq!(f.evaluate(&DVector::from_vec(vec![-2.0])), 2.0);
        let q = quad1();
        assert_eq!(q.evaluate(&DVector::from_vec(vec![3.0])), 9.0);
        // max(x₁+x₂, 2x₁) at (1, 0): both leaves evaluate, max wins
        let g = PiecewiseFunction {
            name: "maxlin".into(),
            root: max(vec![
                piece(
                    0,
                    Polynomial::new(2, [(vec![1, 0], 1.0), (vec![0, 1], 1.0)]),
                ),
                piece(1, Polynomial::new(2, [(vec![1, 0], 2.0)])),
            ]),
            lipschitz_bound: 3.0,
            domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            f_star: None,
        };
        assert_eq!(g.evaluate(&DVector::from_vec(vec![1.0, 0.0])), 2.0);
    }

    #[test]
    fn active_pieces_examples() {
        let f = abs1();
        assert_eq!(
            f.active_pieces(&DVector::from_vec(vec![0.0]), 1e-9),
            vec![0, 1]
        );
        assert_eq!(
            f.active_pieces(&DVector::from_vec(vec![1.0]), 1e-9),
            vec![0]
        );
        // max(x², x − 0.25) ties at 0.5
        let g = PiecewiseFunction {
            name: "tie".into(),
            root: max(vec![
                piece(0, Polynomial::new(1, [(vec![2], 1.0)])),
                piece(1, Polynomial::new(1, [(vec![1], 1.0), (vec![0], -0.25)])),
            ]),
            lipschitz_bound: 4.0,
            domain_box: vec![(-2.0, 2.0)],
            f_star: None,
        };
        assert_eq!(
            g.active_pieces(&DVector::from_vec(vec![0.5]), 1e-9),
            vec![0, 1]
        );
    }

    #[test]
    fn clarke_examples() {
        let f = abs1();
        let sd = f
            .clarke_subdifferential(&DVector::from_vec(vec![0.0]), 1e-9)
            .unwrap();
        let mut vals: Vec<f64> = sd.generators.iter().map(|g| g[0]).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![-1.0, 1.0]);

        let q = quad1();
        let sd = q
            .clarke_subdifferential(&DVector::from_vec(vec![1.0]), 1e-9)
            .unwrap();
        assert_eq!(sd.generators.len(), 1);
        assert_eq!(sd.generators[0][0], 2.0);

        let g = PiecewiseFunction {
            name: "max2".into(),
            root: max(vec![
                piece(0, Polynomial::coord(2, 0)),
                piece(1, Polynomial::coord(2, 1)),
            ]),
            lipschitz_bound: 1.5,
            domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            f_star: None,
        };
        let sd = g
            .clarke_subdifferential(&DVector::from_vec(vec![0.0, 0.0]), 1e-9)
            .unwrap();
        assert_eq!(sd.generators.len(), 2);
    }

    #[test]
    fn sum_cross_combines_and_caps() {
        // Σ of 7 |x_i|-like kinks at 0 gives 2^7 = 128 > 64 combinations
        let n = 7;
        let children: Vec<Node> = (0..n).map(|i| abs_coord(n, i, 2 * i)).collect();
        let f = PiecewiseFunction {
            name: "too_coupled".into(),
            root: sum(children),
            lipschitz_bound: n as f64,
            domain_box: vec![(-1.0, 1.0); n],
            f_star: None,
        };
        let r = f.clarke_subdifferential(&DVector::zeros(n), 1e-9);
        assert!(matches!(r, Err(PiecewiseError::GeneratorOverflow)));
    }

    #[test]
    fn riemannian_gradient_examples() {
        use crate::strata::Stratum;
        // f = |x₁| + x₂² on {x₁ = 0}: both generators project to (0, 2x₂)
        let f = PiecewiseFunction {
            name: "ridge".into(),
            root: sum(vec![
                abs_coord(2, 0, 0),
                piece(2, Polynomial::new(2, [(vec![0, 2], 1.0)])),
            ]),
            lipschitz_bound: 5.0,
            domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            f_star: Some(0.0),
        };
        let line = Stratum::affine(
            0,
            vec![0.0, 0.0],
            vec![vec![0.0, 1.0]],
            vec![(-2.0, 2.0)],
            vec![],
        );
        let y = DVector::from_vec(vec![0.0, 0.5]);
        let g = f.riemannian_gradient(&line, &y, 1e-9).unwrap();
        assert!((g - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-12);

        // smooth full-dimensional case: x² on ℝ at 1 → 2
        let q = quad1();
        let full = Stratum::affine(0, vec![0.0], vec![vec![1.0]], vec![(-2.0, 2.0)], vec![]);
        let g = q
            .riemannian_gradient(&full, &DVector::from_vec(vec![1.0]), 1e-9)
            .unwrap();
        assert!((g[0] - 2.0).abs() < 1e-14);

        // max(x₁, x₂) on the diagonal: project (1,0) onto span{(1,1)/√2}
        let m = PiecewiseFunction {
            name: "max2".into(),
            root: max(vec![
                piece(0, Polynomial::coord(2, 0)),
                piece(1, Polynomial::coord(2, 1)),
            ]),
            lipschitz_bound: 1.5,
            domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            f_star: None,
        };
        let s = 0.5f64.sqrt();
        let diag = Stratum::affine(
            0,
            vec![0.0, 0.0],
            vec![vec![s, s]],
            vec![(-1.0, 1.0)],
            vec![],
        );
        let g = m
            .riemannian_gradient(&diag, &DVector::from_vec(vec![0.0, 0.0]), 1e-9)
            .unwrap();
        assert!((g - DVector::from_vec(vec![0.5, 0.5])).norm() < 1e-12);
    }

    #[test]
    fn riemannian_gradient_rejects_bad_stratum() {
        // |x₁| is not smooth on the line {x₂ = 0}: projections of (±1, 0) differ
        let f = PiecewiseFunction {
            name: "abs_x1".into(),
            root: abs_coord(2, 0, 0),
            lipschitz_bound: 1.0,
            domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            f_star: Some(0.0),
        };
        let bad = Stratum::affine(
            0,
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0]],
            vec![(-2.0, 2.0)],
            vec![],
        );
        let r = f.riemannian_gradient(&bad, &DVector::from_vec(vec![0.0, 0.0]), 1e-9);
        assert!(matches!(
            r,
            Err(PiecewiseError::InconsistentStratification { .. })
        ));
    }

    #[test]
    fn gradient_consistency_finite_differences() {
        let f = PiecewiseFunction {
            name: "mix".into(),
            root: sum(vec![
                piece(
                    0,
                    Polynomial::new(2, [(vec![2, 0], 1.0), (vec![1, 1], -0.5)]),
                ),
                piece(1, Polynomial::new(2, [(vec![0, 3], 0.25)])),
            ]),
            lipschitz_bound: 20.0,
            domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            f_star: None,
        };
        let mut rng = crate::seeded_rng(42);
        for _ in 0..1000 {
            let x = DVector::from_fn(2, |_, _| rand::Rng::gen_range(&mut rng, -1.9..1.9));
            let sd = f.clarke_subdifferential(&x, 1e-9).unwrap();
            assert_eq!(sd.generators.len(), 1);
            let g = &sd.generators[0];
            let h = 1e-5;
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (f.evaluate(&xp) - f.evaluate(&xm)) / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "coordinate {i}: {} vs {}",
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn directional_derivative_matches_generator_max() {
        // subdifferential soundness on the max class: f'(x; d) = max_g <g, d>
        let g = PiecewiseFunction {
            name: "max3".into(),
            root: max(vec![
                piece(0, Polynomial::coord(2, 0)),
                piece(1, Polynomial::coord(2, 1)),
                piece(
                    2,
                    Polynomial::new(2, [(vec![1, 0], -1.0), (vec![0, 1], -1.0)]),
                ),
            ]),
            lipschitz_bound: 2.0,
            domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            f_star: None,
        };
        let mut rng = crate::seeded_rng(7);
        for _ in 0..1000 {
            let x = DVector::from_fn(2, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
            let d = DVector::from_fn(2, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
            let sd = g.clarke_subdifferential(&x, 1e-9).unwrap();
            let t = 1e-6;
            let dd = (g.evaluate(&(&x + &d * t)) - g.evaluate(&x)) / t;
            let gmax = sd
                .generators
                .iter()
                .map(|gen| gen.dot(&d))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((dd - gmax).abs() <= 1e-4, "{dd} vs {gmax}");
        }
    }

    #[test]
    fn lipschitz_bound_holds_on_sampled_pairs() {
        let f = abs1();
        let mut rng = crate::seeded_rng(11);
        for _ in 0..10_000 {
            let a = DVector::from_vec(vec![rand::Rng::gen_range(&mut rng, -2.0..2.0)]);
            let b = DVector::from_vec(vec![rand::Rng::gen_range(&mut rng, -2.0..2.0)]);
            assert!(
                (f.evaluate(&a) - f.evaluate(&b)).abs()
                    <= f.lipschitz_bound * (&a - &b).norm() + 1e-12
            );
        }
    }

    #[test]
    fn json_round_trip() {
        let f = abs1();
        let s = serde_json::to_string(&f).unwrap();
        let g: PiecewiseFunction = serde_json::from_str(&s).unwrap();
        let x = DVector::from_vec(vec![0.73]);
        assert_eq!(f.evaluate(&x), g.evaluate(&x));
        let s2 = serde_json::to_string(&g).unwrap();
        assert_eq!(s, s2);
    }
}
