//! Every shipped benchmark must pass the full stratification validator and the
//! piecewise-model invariants at load.

use nalgebra::DVector;
use rand::Rng;
use substrat::corpus;

#[test]
fn all_entries_pass_stratification_validators() {
    for name in corpus::list() {
        let e = corpus::get(name).unwrap();
        let report = e.stratification.validate(10_000, 42);
        assert!(
            report.all_pass(),
            "{name}: {:#?}",
            report.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>()
        );
    }
}

#[test]
fn all_entries_satisfy_lipschitz_bound_on_sampled_pairs() {
    for name in corpus::list() {
        let e = corpus::get(name).unwrap();
        let f = &e.function;
        let n = f.dim();
        let mut rng = substrat::seeded_rng(42);
        for _ in 0..10_000 {
            let a = DVector::from_fn(n, |i, _| {
                let (lo, hi) = f.domain_box[i];
                rng.gen_range(lo..hi)
            });
            let b = DVector::from_fn(n, |i, _| {
                let (lo, hi) = f.domain_box[i];
                rng.gen_range(lo..hi)
            });
            let lhs = (f.evaluate(&a) - f.evaluate(&b)).abs();
            let rhs = f.lipschitz_bound * (&a - &b).norm();
            assert!(lhs <= rhs + 1e-12, "{name}: |Δf| = {lhs} > L·|Δx| = {rhs}");
        }
    }
}

#[test]
fn every_box_point_has_an_active_leaf() {
    for name in corpus::list() {
        let e = corpus::get(name).unwrap();
        let f = &e.function;
        let n = f.dim();
        let mut rng = substrat::seeded_rng(7);
        for _ in 0..1000 {
            let x = DVector::from_fn(n, |i, _| {
                let (lo, hi) = f.domain_box[i];
                rng.gen_range(lo..hi)
            });
            assert!(
                !f.active_pieces(&x, 1e-9).is_empty(),
                "{name}: no active leaf at {:?}",
                x.as_slice()
            );
        }
    }
}

#[test]
fn analytic_thetas_match_the_estimator() {
    for name in corpus::list() {
        let e = corpus::get(name).unwrap();
        for (&sid, &theta) in &e.known_theta {
            let fit = substrat::diagnostics::estimate_kl(
                &e.function,
                e.stratification.stratum(sid),
                0.0,
                e.epsilon,
                10_000,
                42,
            )
            .unwrap_or_else(|err| panic!("{name}/{sid}: {err}"));
            assert!(
                (fit.theta - theta).abs() <= 0.02,
                "{name}/{sid}: fitted {} vs analytic {theta}",
                fit.theta
            );
        }
    }
}
