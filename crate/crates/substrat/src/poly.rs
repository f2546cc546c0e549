//! Multivariate polynomials and the closed-form scalar fields built from them.
//!
//! Polynomials are stored sparsely as exponent-tuple → coefficient maps, which
//! is also the wire format used by the JSON schema. Differentiation is exact,
//! so analytic gradients and Hessians of smooth pieces come for free.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A sparse multivariate polynomial on ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    arity: usize,
    /// exponent tuple (length = arity) → coefficient; zero coefficients are dropped
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new(arity: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (expo, coef) in terms {
            assert_eq!(expo.len(), arity, "exponent tuple length must match arity");
            if coef != 0.0 {
                *map.entry(expo).or_insert(0.0) += coef;
            }
        }
        map.retain(|_, c| *c != 0.0);
        Polynomial { arity, terms: map }
    }

    pub fn zero(arity: usize) -> Self {
        Polynomial {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, c: f64) -> Self {
        Polynomial::new(arity, [(vec![0; arity], c)])
    }

    /// The coordinate monomial x_i.
    pub fn coord(arity: usize, i: usize) -> Self {
        let mut e = vec![0; arity];
        e[i] = 1;
        Polynomial::new(arity, [(e, 1.0)])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.arity);
        let mut acc = 0.0;
        for (expo, coef) in &self.terms {
            let mut m = *coef;
            for (xi, &e) in x.iter().zip(expo.iter()) {
                m *= xi.powi(e as i32);
            }
            acc += m;
        }
        acc
    }

    /// Exact partial derivative with respect to coordinate `i`.
    pub fn partial(&self, i: usize) -> Polynomial {
        let mut terms = BTreeMap::new();
        for (expo, coef) in &self.terms {
            let e = expo[i];
            if e == 0 {
                continue;
            }
            let mut de = expo.clone();
            de[i] = e - 1;
            *terms.entry(de).or_insert(0.0) += coef * e as f64;
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial {
            arity: self.arity,
            terms,
        }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.arity, |i, _| self.partial(i).eval(x))
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.arity, self.arity, |i, j| {
            self.partial(i).partial(j).eval(x)
        })
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial::new(
            self.arity,
            self.terms.iter().map(|(e, v)| (e.clone(), c * v)),
        )
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, other.arity);
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            *terms.entry(e.clone()).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial {
            arity: self.arity,
            terms,
        }
    }
}

/// Serde representation: exponent tuples as comma-joined keys ("2,0" → x₁²).
impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = ser.serialize_struct("Polynomial", 2)?;
        s.serialize_field("arity", &self.arity)?;
        let coeffs: BTreeMap<String, f64> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let key = e
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                (key, *c)
            })
            .collect();
        s.serialize_field("coeffs", &coeffs)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            arity: usize,
            coeffs: BTreeMap<String, f64>,
        }
        let raw = Raw::deserialize(de)?;
        let mut terms = BTreeMap::new();
        for (key, coef) in raw.coeffs {
            let expo: Result<Vec<u32>, _> = if key.is_empty() {
                Ok(vec![])
            } else {
                key.split(',').map(|t| t.trim().parse()).collect()
            };
            let expo = expo.map_err(serde::de::Error::custom)?;
            if expo.len() != raw.arity {
                return Err(serde::de::Error::custom(format!(
                    "exponent tuple '{key}' does not match arity {}",
                    raw.arity
                )));
            }
            terms.insert(expo, coef);
        }
        terms.retain(|_, c| *c != 0.0);
        Ok(Polynomial {
            arity: raw.arity,
            terms,
        })
    }
}

/// A closed-form scalar field: a polynomial, or coeff·√(polynomial).
///
/// Square roots are needed for curved chart maps (circle arcs and caps); the
/// inner polynomial must be positive on the chart domain. The coefficient
/// covers lower band maps like −√(1−t²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Field {
    Poly(Polynomial),
    Sqrt { coeff: f64, inner: Polynomial },
}

impl Field {
    pub fn sqrt(inner: Polynomial) -> Self {
        Field::Sqrt { coeff: 1.0, inner }
    }

    pub fn arity(&self) -> usize {
        match self {
            Field::Poly(p) => p.arity(),
            Field::Sqrt { inner, .. } => inner.arity(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Field::Poly(p) => p.eval(x),
            Field::Sqrt { coeff, inner } => coeff * inner.eval(x).max(0.0).sqrt(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Field::Poly(p) => p.gradient(x),
            Field::Sqrt { coeff, inner } => {
                let v = inner.eval(x).max(0.0).sqrt();
                // d/dx c·sqrt(p) = c·p' / (2 sqrt(p)); domains keep p away from 0
                inner.gradient(x) * (coeff / (2.0 * v))
            }
        }
    }

    pub fn constant(arity: usize, c: f64) -> Self {
        Field::Poly(Polynomial::constant(arity, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(p: &Polynomial, x: &[f64], i: usize) -> f64 {
        let h = 1e-5;
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        (p.eval(&xp) - p.eval(&xm)) / (2.0 * h)
    }

    #[test]
    fn eval_and_partials() {
        // p = 3 x² y + y³ - 2
        let p = Polynomial::new(
            2,
            [(vec![2, 1], 3.0), (vec![0, 3], 1.0), (vec![0, 0], -2.0)],
        );
        assert_eq!(p.eval(&[1.0, 2.0]), 3.0 * 2.0 + 8.0 - 2.0);
        let g = p.gradient(&[1.0, 2.0]);
        assert_eq!(g[0], 12.0);
        assert_eq!(g[1], 3.0 + 12.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = Polynomial::new(
            3,
            [
                (vec![2, 0, 1], 1.5),
                (vec![1, 1, 1], -0.7),
                (vec![0, 4, 0], 0.25),
            ],
        );
        let x = [0.3, -1.2, 0.9];
        for i in 0..3 {
            let a = p.partial(i).eval(&x);
            let fd = central_diff(&p, &x, i);
            assert!(
                (a - fd).abs() <= 1e-6 * (1.0 + a.abs()),
                "i={i}: {a} vs {fd}"
            );
        }
    }

    #[test]
    fn sqrt_field_gradient() {
        // sqrt(1 - t²) on (-0.7, 0.7)
        let inner = Polynomial::new(1, [(vec![0], 1.0), (vec![2], -1.0)]);
        let f = Field::sqrt(inner);
        let t = [0.5];
        let g = f.gradient(&t)[0];
        let expect = -0.5 / (1.0f64 - 0.25).sqrt();
        assert!((g - expect).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = Polynomial::new(2, [(vec![2, 0], 0.1 + 0.2), (vec![0, 1], -1.0 / 3.0)]);
        let s = serde_json::to_string(&p).unwrap();
        let q: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
