//! Step-size schedules.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        c: f64,
    },
    /// α_k = c / (k + k0); k0 defaults to 1 so α_0 is finite
    Harmonic {
        c: f64,
        k0: f64,
    },
    /// α_k = c / (k + k0)^p
    Power {
        c: f64,
        p: f64,
        k0: f64,
    },
    Table {
        alphas: Vec<f64>,
    },
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("step sizes must be positive: {0}")]
    NonPositive(String),
    #[error("table schedule exhausted at k = {0}")]
    TableExhausted(usize),
}

impl StepSchedule {
    pub fn harmonic(c: f64) -> Self {
        StepSchedule::Harmonic { c, k0: 1.0 }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        match self {
            StepSchedule::Constant { c } => *c,
            StepSchedule::Harmonic { c, k0 } => c / (k as f64 + k0),
            StepSchedule::Power { c, p, k0 } => c / (k as f64 + k0).powf(*p),
            StepSchedule::Table { alphas } => alphas[k],
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<(), ScheduleError> {
        match self {
            StepSchedule::Constant { c } => {
                if *c <= 0.0 {
                    return Err(ScheduleError::NonPositive(format!("constant {c}")));
                }
            }
            StepSchedule::Harmonic { c, k0 } | StepSchedule::Power { c, k0, .. } => {
                if *c <= 0.0 || *k0 <= 0.0 {
                    return Err(ScheduleError::NonPositive(format!("c={c}, k0={k0}")));
                }
            }
            StepSchedule::Table { alphas } => {
                if alphas.len() < horizon {
                    return Err(ScheduleError::TableExhausted(alphas.len()));
                }
                if let Some(a) = alphas.iter().find(|a| **a <= 0.0) {
                    return Err(ScheduleError::NonPositive(format!("table entry {a}")));
                }
            }
        }
        Ok(())
    }

    /// Monotone nonincreasing over the first `horizon` steps (the hypothesis
    /// of the diameter bound).
    pub fn is_decreasing(&self, horizon: usize) -> bool {
        match self {
            StepSchedule::Constant { .. } => true,
            StepSchedule::Harmonic { .. } => true,
            StepSchedule::Power { p, .. } => *p >= 0.0,
            StepSchedule::Table { alphas } => alphas
                .windows(2)
                .take(horizon.saturating_sub(1))
                .all(|w| w[1] <= w[0]),
        }
    }

    /// Compact human/config tag, e.g. `harmonic:1:1`.
    pub fn tag(&self) -> String {
        match self {
            StepSchedule::Constant { c } => format!("constant:{c}"),
            StepSchedule::Harmonic { c, k0 } => format!("harmonic:{c}:{k0}"),
            StepSchedule::Power { c, p, k0 } => format!("power:{c}:{p}:{k0}"),
            StepSchedule::Table { alphas } => format!("table[{}]", alphas.len()),
        }
    }

    pub fn parse_tag(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<f64, String> {
            t.parse()
                .map_err(|_| format!("bad number '{t}' in schedule '{s}'"))
        };
        match parts.as_slice() {
            ["constant", c] => Ok(StepSchedule::Constant { c: num(c)? }),
            ["harmonic", c] => Ok(StepSchedule::Harmonic {
                c: num(c)?,
                k0: 1.0,
            }),
            ["harmonic", c, k0] => Ok(StepSchedule::Harmonic {
                c: num(c)?,
                k0: num(k0)?,
            }),
            ["power", c, p] => Ok(StepSchedule::Power {
                c: num(c)?,
                p: num(p)?,
                k0: 1.0,
            }),
            ["power", c, p, k0] => Ok(StepSchedule::Power {
                c: num(c)?,
                p: num(p)?,
                k0: num(k0)?,
            }),
            _ => Err(format!("unknown schedule '{s}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_partial_sums_grow_logarithmically() {
        // Σ_{k<K} c/(k+k0) ≥ c·ln(K/k0) − 1 certifies nonsummability
        let s = StepSchedule::harmonic(1.0);
        for big_k in [10usize, 100, 1000, 100_000] {
            let sum: f64 = (0..big_k).map(|k| s.alpha(k)).sum();
            assert!(sum >= (big_k as f64).ln() - 1.0, "K={big_k}: sum {sum}");
        }
        // and square-summability: partial sums of α² stay bounded
        let sq: f64 = (0..100_000).map(|k| s.alpha(k).powi(2)).sum();
        assert!(sq < std::f64::consts::PI * std::f64::consts::PI / 6.0 + 1e-9);
    }

    #[test]
    fn positivity_and_monotonicity() {
        assert!(StepSchedule::harmonic(1.0).validate(10).is_ok());
        assert!(StepSchedule::Constant { c: 0.0 }.validate(10).is_err());
        assert!(StepSchedule::harmonic(1.0).is_decreasing(1000));
        let t = StepSchedule::Table {
            alphas: vec![0.1, 0.2, 0.05],
        };
        assert!(!t.is_decreasing(3));
        assert!(t.validate(3).is_ok());
        assert!(t.validate(4).is_err());
    }

    #[test]
    fn tags_round_trip() {
        for s in [
            StepSchedule::Constant { c: 0.1 },
            StepSchedule::harmonic(1.0),
            StepSchedule::Power {
                c: 1.0,
                p: 0.7,
                k0: 1.0,
            },
        ] {
            assert_eq!(StepSchedule::parse_tag(&s.tag()).unwrap(), s);
        }
    }
}
