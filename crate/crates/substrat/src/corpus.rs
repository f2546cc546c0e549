//! Benchmark registry: piecewise functions with declared stratifications,
//! known critical values and exponents, tested level bands, and default
//! proof constants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::ProofConstants;
use crate::piecewise::{build, PiecewiseFunction};
use crate::poly::{Field, Polynomial};
use crate::strata::{assign_exponents, LRegularCell, Stratification, Stratum};

#[derive(Clone, Debug)]
pub struct BenchmarkEntry {
    pub name: String,
    pub description: String,
    pub function: PiecewiseFunction,
    pub stratification: Stratification,
    /// analytic desingularizing exponents per stratum, where known
    pub known_theta: BTreeMap<usize, f64>,
    /// representative critical points and a description of the critical set
    pub critical_points: Vec<Vec<f64>>,
    pub critical_set: String,
    /// tested level-band half-width around f*
    pub epsilon: f64,
    pub default_x0: Vec<f64>,
    /// activity tolerance runs on this benchmark should use
    pub activity_tol: f64,
    pub constants: ProofConstants,
}

#[derive(Clone, Debug, thiserror::Error, Serialize, Deserialize)]
pub enum CorpusError {
    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),
}

pub fn list() -> Vec<&'static str> {
    vec![
        "abs1d",
        "quad1d",
        "maxlin2d",
        "ridge2d",
        "vee_pow",
        "nonconvex_ring",
    ]
}

pub fn get(name: &str) -> Result<BenchmarkEntry, CorpusError> {
    match name {
        "abs1d" => Ok(abs1d()),
        "quad1d" => Ok(quad1d()),
        "maxlin2d" => Ok(maxlin2d()),
        "ridge2d" => Ok(ridge2d()),
        "vee_pow" => Ok(vee_pow()),
        "nonconvex_ring" => Ok(nonconvex_ring()),
        other => Err(CorpusError::UnknownBenchmark(other.into())),
    }
}

fn constants_for(
    strat: &Stratification,
    theta: f64,
    ball_c: f64,
    epsilon: f64,
    c: f64,
    sigma: (f64, f64),
) -> ProofConstants {
    let assignment =
        assign_exponents(strat, theta, &BTreeMap::new()).expect("corpus exponents are feasible");
    let mut pc = ProofConstants::from_assignment(&assignment, ball_c, epsilon, c, 0.0);
    pc.sigma1 = sigma.0;
    pc.sigma2 = sigma.1;
    pc
}

/// identity rotation in ℝ²
fn rot_id() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

/// coordinate swap (x, y) ↦ (y, x)
fn rot_swap() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![1.0, 0.0]]
}

/// a full-dimensional planar stratum over a band cell, embedded by `rot`
fn cell2d(
    id: usize,
    rot: Vec<Vec<f64>>,
    base: (f64, f64),
    lower: Field,
    upper: Field,
    l0: f64,
    frontier: Vec<usize>,
) -> Stratum {
    Stratum::graph(
        id,
        vec![0.0, 0.0],
        rot,
        LRegularCell::band(LRegularCell::interval(base.0, base.1), lower, upper, l0),
        vec![],
        0.0,
        frontier,
    )
}

fn lin2(cx: f64, cy: f64) -> Polynomial {
    Polynomial::new(2, [(vec![1, 0], cx), (vec![0, 1], cy)])
}

/// |x| on [−2, 2]: kink stratum at the origin, two open half-lines.
fn abs1d() -> BenchmarkEntry {
    let function = PiecewiseFunction {
        name: "abs1d".into(),
        root: build::abs_coord(1, 0, 0),
        lipschitz_bound: 1.0,
        domain_box: vec![(-2.0, 2.0)],
        f_star: Some(0.0),
    };
    let strata = vec![
        Stratum::point(0, vec![0.0], vec![]),
        Stratum::affine(1, vec![-1.0], vec![vec![1.0]], vec![(-1.0, 1.0)], vec![0]),
        Stratum::affine(2, vec![1.0], vec![vec![1.0]], vec![(-1.0, 1.0)], vec![0]),
    ];
    let stratification = Stratification {
        strata,
        ambient_box: vec![(-2.0, 2.0)],
    };
    let constants = constants_for(&stratification, 0.5, 0.25, 0.5, 2.0, (6.0, 6.0));
    BenchmarkEntry {
        name: "abs1d".into(),
        description: "sharp vee: oscillates under constant steps, absorbed under 1/k".into(),
        function,
        stratification,
        known_theta: BTreeMap::from([(1, 0.0), (2, 0.0)]),
        critical_points: vec![vec![0.0]],
        critical_set: "the kink at the origin".into(),
        epsilon: 0.5,
        default_x0: vec![0.35],
        activity_tol: 1e-9,
        constants,
    }
}

/// x² on [−2, 2]: one open stratum, the smooth sanity case.
fn quad1d() -> BenchmarkEntry {
    let function = PiecewiseFunction {
        name: "quad1d".into(),
        root: build::piece(0, Polynomial::new(1, [(vec![2], 1.0)])),
        lipschitz_bound: 4.0,
        domain_box: vec![(-2.0, 2.0)],
        f_star: Some(0.0),
    };
    let stratification = Stratification {
        strata: vec![Stratum::affine(
            0,
            vec![0.0],
            vec![vec![1.0]],
            vec![(-2.0, 2.0)],
            vec![],
        )],
        ambient_box: vec![(-2.0, 2.0)],
    };
    // c covers the Lyapunov condition c ≥ L⁴(L_f + L_P)/2 with L = 4, L_f = 2
    let constants = constants_for(&stratification, 0.5, 0.25, 0.5, 256.0, (6.0, 6.0));
    BenchmarkEntry {
        name: "quad1d".into(),
        description: "smooth quadratic with exact desingularizing exponent 1/2".into(),
        function,
        stratification,
        known_theta: BTreeMap::from([(0, 0.5)]),
        critical_points: vec![vec![0.0]],
        critical_set: "the origin".into(),
        epsilon: 0.5,
        default_x0: vec![1.0],
        activity_tol: 1e-9,
        constants,
    }
}

/// max(x₁, x₂, −x₁−x₂) on [−2, 2]²: triple point at the origin, three ridge
/// rays (plus one artificial splitting ray so every cell is a band of affine
/// maps), three activity cells with the third split in two.
fn maxlin2d() -> BenchmarkEntry {
    let function = PiecewiseFunction {
        name: "maxlin2d".into(),
        root: build::max(vec![
            build::piece(0, lin2(1.0, 0.0)),
            build::piece(1, lin2(0.0, 1.0)),
            build::piece(2, lin2(-1.0, -1.0)),
        ]),
        lipschitz_bound: 1.5,
        domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
        f_star: Some(0.0),
    };
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let s5 = 1.0 / 5.0f64.sqrt();
    let strata = vec![
        Stratum::point(0, vec![0.0, 0.0], vec![]),
        // ridge12 along (1,1), ridge13 along (1,−2), ridge23 along (−2,1)
        Stratum::affine(
            1,
            vec![0.0, 0.0],
            vec![vec![s2, s2]],
            vec![(0.0, 2.0 * 2.0f64.sqrt())],
            vec![0],
        ),
        Stratum::affine(
            2,
            vec![0.0, 0.0],
            vec![vec![s5, -2.0 * s5]],
            vec![(0.0, 5.0f64.sqrt())],
            vec![0],
        ),
        Stratum::affine(
            3,
            vec![0.0, 0.0],
            vec![vec![-2.0 * s5, s5]],
            vec![(0.0, 5.0f64.sqrt())],
            vec![0],
        ),
        // artificial split ray along −(1,1) inside the third cell
        Stratum::affine(
            4,
            vec![0.0, 0.0],
            vec![vec![-s2, -s2]],
            vec![(0.0, 2.0 * 2.0f64.sqrt())],
            vec![0],
        ),
        // cell of piece 0: {x₁ ∈ (0,2), −2x₁ < x₂ < x₁}
        cell2d(
            5,
            rot_id(),
            (0.0, 2.0),
            Field::Poly(lin2(-2.0, 0.0).into_arity1()),
            Field::Poly(lin2(1.0, 0.0).into_arity1()),
            2.0,
            vec![0, 1, 2],
        ),
        // cell of piece 1: mirror through the swap
        cell2d(
            6,
            rot_swap(),
            (0.0, 2.0),
            Field::Poly(lin2(-2.0, 0.0).into_arity1()),
            Field::Poly(lin2(1.0, 0.0).into_arity1()),
            2.0,
            vec![0, 1, 3],
        ),
        // cell of piece 2, above the split ray: {x₁ ∈ (−2,0), x₁ < x₂ < −x₁/2}
        cell2d(
            7,
            rot_id(),
            (-2.0, 0.0),
            Field::Poly(lin2(1.0, 0.0).into_arity1()),
            Field::Poly(lin2(-0.5, 0.0).into_arity1()),
            1.0,
            vec![0, 3, 4],
        ),
        // cell of piece 2, below the split ray
        cell2d(
            8,
            rot_swap(),
            (-2.0, 0.0),
            Field::Poly(lin2(1.0, 0.0).into_arity1()),
            Field::Poly(lin2(-0.5, 0.0).into_arity1()),
            1.0,
            vec![0, 2, 4],
        ),
    ];
    let stratification = Stratification {
        strata,
        ambient_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
    };
    let constants = constants_for(&stratification, 0.5, 0.25, 2.0, 1.0, (6.0, 6.0));
    BenchmarkEntry {
        name: "maxlin2d".into(),
        description: "generic max of three affine pieces: 3 ridge rays, 1 triple point; \
                      sharp corner with exponent 0 on the ridges"
            .into(),
        function,
        stratification,
        known_theta: BTreeMap::from([(1, 0.0), (2, 0.0), (3, 0.0)]),
        critical_points: vec![vec![0.0, 0.0]],
        critical_set: "the triple point at the origin".into(),
        epsilon: 2.0,
        default_x0: vec![1.2, 0.7],
        activity_tol: 1e-4,
        constants,
    }
}

/// |x₁| + x₂² on [−2, 2]²: a smooth valley along the kink line.
fn ridge2d() -> BenchmarkEntry {
    let function = PiecewiseFunction {
        name: "ridge2d".into(),
        root: build::sum(vec![
            build::abs_coord(2, 0, 0),
            build::piece(2, Polynomial::new(2, [(vec![0, 2], 1.0)])),
        ]),
        lipschitz_bound: 5.0,
        domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
        f_star: Some(0.0),
    };
    let strata = vec![
        Stratum::affine(
            0,
            vec![0.0, 0.0],
            vec![vec![0.0, 1.0]],
            vec![(-2.0, 2.0)],
            vec![],
        ),
        cell2d(
            1,
            rot_swap(),
            (-2.0, 2.0),
            Field::constant(1, -2.0),
            Field::constant(1, 0.0),
            0.0,
            vec![0],
        ),
        cell2d(
            2,
            rot_swap(),
            (-2.0, 2.0),
            Field::constant(1, 0.0),
            Field::constant(1, 2.0),
            0.0,
            vec![0],
        ),
    ];
    let stratification = Stratification {
        strata,
        ambient_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
    };
    // c covers c ≥ L⁴(L_f + L_P)/2 with L ≈ 4.2, L_f = 2 on the valley line
    let constants = constants_for(&stratification, 0.5, 0.25, 0.5, 312.0, (6.0, 6.0));
    BenchmarkEntry {
        name: "ridge2d".into(),
        description: "smooth valley along a kink line; projection target for descent checks".into(),
        function,
        stratification,
        known_theta: BTreeMap::from([(0, 0.5)]),
        critical_points: vec![vec![0.0, 0.0]],
        critical_set: "the origin (bottom of the valley line)".into(),
        epsilon: 0.5,
        default_x0: vec![1.0, 1.0],
        activity_tol: 1e-9,
        constants,
    }
}

/// |x|³ built piecewise from x³ and −x³: degenerate kink with exponent 2/3.
fn vee_pow() -> BenchmarkEntry {
    let cubic = Polynomial::new(1, [(vec![3], 1.0)]);
    let function = PiecewiseFunction {
        name: "vee_pow".into(),
        root: build::max(vec![
            build::piece(0, cubic.clone()),
            build::piece(1, cubic.scale(-1.0)),
        ]),
        lipschitz_bound: 12.0,
        domain_box: vec![(-2.0, 2.0)],
        f_star: Some(0.0),
    };
    let strata = vec![
        Stratum::point(0, vec![0.0], vec![]),
        Stratum::affine(1, vec![-1.0], vec![vec![1.0]], vec![(-1.0, 1.0)], vec![0]),
        Stratum::affine(2, vec![1.0], vec![vec![1.0]], vec![(-1.0, 1.0)], vec![0]),
    ];
    let stratification = Stratification {
        strata,
        ambient_box: vec![(-2.0, 2.0)],
    };
    let constants = constants_for(&stratification, 2.0 / 3.0, 0.25, 0.5, 6.0, (6.0, 6.0));
    BenchmarkEntry {
        name: "vee_pow".into(),
        description: "cubic vee |x|³: analytic desingularizing exponent 2/3".into(),
        function,
        stratification,
        known_theta: BTreeMap::from([(1, 2.0 / 3.0), (2, 2.0 / 3.0)]),
        critical_points: vec![vec![0.0]],
        critical_set: "the origin".into(),
        epsilon: 0.5,
        default_x0: vec![1.0],
        activity_tol: 1e-9,
        constants,
    }
}

/// ||x|² − 1| on [−2, 2]²: the unit circle is the critical level set. The
/// circle splits into four arcs and four diagonal points so every piece is a
/// bona fide Lipschitz graph; the inside and outside cells are decomposed the
/// same way.
fn nonconvex_ring() -> BenchmarkEntry {
    let r2 = Polynomial::new(
        2,
        [(vec![2, 0], 1.0), (vec![0, 2], 1.0), (vec![0, 0], -1.0)],
    );
    let function = PiecewiseFunction {
        name: "nonconvex_ring".into(),
        root: build::max(vec![
            build::piece(0, r2.clone()),
            build::piece(1, r2.scale(-1.0)),
        ]),
        lipschitz_bound: 5.7,
        domain_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
        f_star: Some(0.0),
    };

    let s = std::f64::consts::FRAC_1_SQRT_2;
    // chart maps on (−s, s)
    let one_minus_t2 = Polynomial::new(1, [(vec![0], 1.0), (vec![2], -1.0)]);
    let arc_up = Field::sqrt(one_minus_t2.clone());
    let arc_dn = Field::Sqrt {
        coeff: -1.0,
        inner: one_minus_t2.clone(),
    };
    // secant slopes stay below 1 on the open chart; tiny headroom for rounding
    let arc_l0 = 1.0 + 1e-9;
    let rot90 = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
    let rot180 = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
    let rot270 = vec![vec![0.0, 1.0], vec![-1.0, 0.0]];
    let arc = |id: usize, rot: Vec<Vec<f64>>, frontier: Vec<usize>| {
        Stratum::graph(
            id,
            vec![0.0, 0.0],
            rot,
            LRegularCell::interval(-s, s),
            vec![arc_up.clone()],
            arc_l0,
            frontier,
        )
    };
    let vseg = |id: usize, x: f64, lo: f64, hi: f64, frontier: Vec<usize>| {
        Stratum::affine(
            id,
            vec![x, 0.5 * (lo + hi)],
            vec![vec![0.0, 1.0]],
            vec![(-(hi - lo) / 2.0, (hi - lo) / 2.0)],
            frontier,
        )
    };
    let hseg = |id: usize, y: f64, lo: f64, hi: f64, frontier: Vec<usize>| {
        Stratum::affine(
            id,
            vec![0.5 * (lo + hi), y],
            vec![vec![1.0, 0.0]],
            vec![(-(hi - lo) / 2.0, (hi - lo) / 2.0)],
            frontier,
        )
    };

    let strata = vec![
        // 0–3: the four diagonal circle points
        Stratum::point(0, vec![s, s], vec![]),
        Stratum::point(1, vec![-s, s], vec![]),
        Stratum::point(2, vec![-s, -s], vec![]),
        Stratum::point(3, vec![s, -s], vec![]),
        // 4–7: arcs top, left, bottom, right
        arc(4, rot_id(), vec![0, 1]),
        arc(5, rot90, vec![1, 2]),
        arc(6, rot180, vec![2, 3]),
        arc(7, rot270, vec![0, 3]),
        // 8–9: inner vertical chords at x = ±s
        vseg(8, s, -s, s, vec![0, 3]),
        vseg(9, -s, -s, s, vec![1, 2]),
        // 10: the lens between the top and bottom arcs
        cell2d(
            10,
            rot_id(),
            (-s, s),
            arc_dn.clone(),
            arc_up.clone(),
            arc_l0,
            vec![0, 1, 2, 3, 4, 6, 8, 9],
        ),
        // 11–12: right and left caps of the disk
        cell2d(
            11,
            rot_swap(),
            (-s, s),
            Field::constant(1, s),
            arc_up.clone(),
            arc_l0,
            vec![0, 3, 7, 8],
        ),
        cell2d(
            12,
            rot_swap(),
            (-s, s),
            arc_dn.clone(),
            Field::constant(1, -s),
            arc_l0,
            vec![1, 2, 5, 9],
        ),
        // 13–16: outer radial segments, vertical then continuing clockwise
        vseg(13, s, s, 2.0, vec![0]),
        vseg(14, -s, s, 2.0, vec![1]),
        vseg(15, -s, -2.0, -s, vec![2]),
        vseg(16, s, -2.0, -s, vec![3]),
        // 17–20: outer horizontal segments
        hseg(17, s, s, 2.0, vec![0]),
        hseg(18, s, -2.0, -s, vec![1]),
        hseg(19, -s, -2.0, -s, vec![2]),
        hseg(20, -s, s, 2.0, vec![3]),
        // 21–24: the four outer bands hugging the circle
        cell2d(
            21,
            rot_id(),
            (-s, s),
            arc_up.clone(),
            Field::constant(1, 2.0),
            arc_l0,
            vec![0, 1, 4, 13, 14],
        ),
        cell2d(
            22,
            rot_swap(),
            (-s, s),
            Field::constant(1, -2.0),
            arc_dn.clone(),
            arc_l0,
            vec![1, 2, 5, 18, 19],
        ),
        cell2d(
            23,
            rot_id(),
            (-s, s),
            Field::constant(1, -2.0),
            arc_dn.clone(),
            arc_l0,
            vec![2, 3, 6, 15, 16],
        ),
        cell2d(
            24,
            rot_swap(),
            (-s, s),
            arc_up.clone(),
            Field::constant(1, 2.0),
            arc_l0,
            vec![0, 3, 7, 17, 20],
        ),
        // 25–28: the corner boxes
        cell2d(
            25,
            rot_id(),
            (s, 2.0),
            Field::constant(1, s),
            Field::constant(1, 2.0),
            0.0,
            vec![0, 13, 17],
        ),
        cell2d(
            26,
            rot_id(),
            (-2.0, -s),
            Field::constant(1, s),
            Field::constant(1, 2.0),
            0.0,
            vec![1, 14, 18],
        ),
        cell2d(
            27,
            rot_id(),
            (-2.0, -s),
            Field::constant(1, -2.0),
            Field::constant(1, -s),
            0.0,
            vec![2, 15, 19],
        ),
        cell2d(
            28,
            rot_id(),
            (s, 2.0),
            Field::constant(1, -2.0),
            Field::constant(1, -s),
            0.0,
            vec![3, 16, 20],
        ),
    ];
    let stratification = Stratification {
        strata,
        ambient_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
    };
    let constants = constants_for(&stratification, 0.5, 0.25, 0.5, 2.0, (6.0, 6.0));
    BenchmarkEntry {
        name: "nonconvex_ring".into(),
        description: "distance-squared to the unit circle level set; iterates hover near a \
                      whole critical curve"
            .into(),
        function,
        stratification,
        known_theta: BTreeMap::from([(10, 0.0), (11, 0.0), (12, 0.0)]),
        critical_points: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s], vec![0.0, 0.0]],
        critical_set: "the unit circle (minimum level) and the origin (smooth local max)".into(),
        epsilon: 0.5,
        default_x0: vec![1.5, 0.3],
        activity_tol: 1e-9,
        constants,
    }
}

impl Polynomial {
    /// reinterpret c·x₁ + d·x₂ as the 1-ary map t ↦ c·t (helper for band maps
    /// that only read the base coordinate)
    fn into_arity1(self) -> Polynomial {
        let terms: Vec<(Vec<u32>, f64)> = self.terms().map(|(e, c)| (vec![e[0]], c)).collect();
        Polynomial::new(1, terms)
    }
}
