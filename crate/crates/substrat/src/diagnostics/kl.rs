//! Desingularizing-exponent fits: sample a stratum inside the level band and
//! fit the lower envelope |∇_M f| ≥ η·|f − f*|^θ in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsError;
use crate::piecewise::PiecewiseFunction;
use crate::strata::Stratum;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KLFit {
    pub stratum_id: usize,
    pub theta: f64,
    pub eta: f64,
    pub f_star: f64,
    pub sample_count: usize,
    /// violations of the fitted envelope over its own samples (0 by construction)
    pub envelope_violations: usize,
    pub seed: u64,
}

impl KLFit {
    /// |∇_M f| ≥ η·|f − f*|^θ at a given (gradient norm, value) pair.
    pub fn holds(&self, grad_norm: f64, value: f64) -> bool {
        grad_norm + 1e-12 * (1.0 + grad_norm)
            >= self.eta * (value - self.f_star).abs().powf(self.theta)
    }
}

/// Fit (θ, η) on `stratum ∩ [|f − f*| ≤ epsilon]`.
///
/// θ is the least-squares slope through per-bin minima of log|∇_M f| against
/// log|f − f*| (the lower envelope), clamped to [0, 1); η is then the largest
/// intercept that leaves zero violations.
pub fn estimate_kl(
    f: &PiecewiseFunction,
    stratum: &Stratum,
    f_star: f64,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<KLFit, DiagnosticsError> {
    let mut rng = crate::seeded_rng(seed);
    let mut data: Vec<(f64, f64)> = Vec::new(); // (log u, log g)
    let mut in_band = 0usize;
    for _ in 0..samples {
        let y = stratum.sample(&mut rng);
        let u = (f.evaluate(&y) - f_star).abs();
        if u > epsilon {
            continue;
        }
        in_band += 1;
        if u < 1e-12 {
            continue;
        }
        // tight activity tolerance: samples sit on the stratum, and blurring in
        // pieces active across a nearby kink would corrupt the gradients
        let g = f.riemannian_gradient(stratum, &y, 1e-12)?.norm();
        if g <= 1e-300 {
            continue;
        }
        data.push((u.ln(), g.ln()));
    }
    if data.len() < 8 {
        return Err(DiagnosticsError::DegenerateSamples);
    }
    let _ = in_band;

    // lower envelope by binning log u
    let lo = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let hi = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let bins = 16usize;
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut env: Vec<Option<(f64, f64)>> = vec![None; bins];
    for &(lu, lg) in &data {
        let b = (((lu - lo) / width) as usize).min(bins - 1);
        if env[b].is_none_or(|(_, cur)| lg < cur) {
            env[b] = Some((lu, lg));
        }
    }
    let pts: Vec<(f64, f64)> = env.into_iter().flatten().collect();
    let theta = least_squares_slope(&pts).clamp(0.0, 1.0 - 1e-9);

    // intercept: zero violations by construction
    let log_eta = data
        .iter()
        .map(|&(lu, lg)| lg - theta * lu)
        .fold(f64::INFINITY, f64::min);
    let eta = log_eta.exp();

    let envelope_violations = data
        .iter()
        .filter(|&&(lu, lg)| lg + 1e-12 < log_eta + theta * lu)
        .count();

    Ok(KLFit {
        stratum_id: stratum.id,
        theta,
        eta,
        f_star,
        sample_count: data.len(),
        envelope_violations,
        seed,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn quadratic_has_half_exponent() {
        let e = corpus::get("quad1d").unwrap();
        let fit = estimate_kl(
            &e.function,
            e.stratification.stratum(0),
            0.0,
            e.epsilon,
            10_000,
            42,
        )
        .unwrap();
        assert!((fit.theta - 0.5).abs() <= 0.02, "theta = {}", fit.theta);
        assert!((fit.eta - 2.0).abs() <= 0.05, "eta = {}", fit.eta);
        assert_eq!(fit.envelope_violations, 0);
    }

    #[test]
    fn cubic_vee_has_two_thirds() {
        let e = corpus::get("vee_pow").unwrap();
        // fit on the right open stratum (0, 2)
        let fit = estimate_kl(
            &e.function,
            e.stratification.stratum(2),
            0.0,
            e.epsilon,
            10_000,
            42,
        )
        .unwrap();
        assert!(
            (fit.theta - 2.0 / 3.0).abs() <= 0.02,
            "theta = {}",
            fit.theta
        );
        assert!((fit.eta - 3.0).abs() <= 0.1, "eta = {}", fit.eta);
    }

    #[test]
    fn sharp_vee_has_zero_exponent() {
        let e = corpus::get("abs1d").unwrap();
        let fit = estimate_kl(
            &e.function,
            e.stratification.stratum(2),
            0.0,
            e.epsilon,
            5_000,
            42,
        )
        .unwrap();
        assert!(fit.theta.abs() <= 1e-9, "theta = {}", fit.theta);
        assert!((fit.eta - 1.0).abs() <= 1e-9, "eta = {}", fit.eta);
    }

    #[test]
    fn point_stratum_degenerates() {
        let e = corpus::get("abs1d").unwrap();
        let r = estimate_kl(
            &e.function,
            e.stratification.stratum(0),
            0.0,
            e.epsilon,
            100,
            42,
        );
        assert!(matches!(r, Err(DiagnosticsError::DegenerateSamples)));
    }

    #[test]
    fn fresh_resample_generalizes() {
        let e = corpus::get("quad1d").unwrap();
        let m = e.stratification.stratum(0);
        let fit = estimate_kl(&e.function, m, 0.0, e.epsilon, 10_000, 42).unwrap();
        let mut rng = crate::seeded_rng(4242);
        let mut total = 0usize;
        let mut violations = 0usize;
        for _ in 0..10_000 {
            let y = m.sample(&mut rng);
            let u = e.function.evaluate(&y).abs();
            if u > e.epsilon || u < 1e-14 {
                continue;
            }
            total += 1;
            let g = e.function.riemannian_gradient(m, &y, 1e-9).unwrap().norm();
            if !fit.holds(g, e.function.evaluate(&y)) {
                violations += 1;
            }
        }
        assert!(total > 1000);
        assert!(
            (violations as f64) <= 0.01 * total as f64,
            "{violations}/{total} violations on fresh seed"
        );
    }
}
