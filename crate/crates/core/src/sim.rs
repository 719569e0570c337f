//! Registered path models, deterministic seeded samplers, and closed-form
//! pricing references.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{lift, DiscretePath, LiftedPath, TimeGrid};

/// Deterministic generator stream for a seed.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// A registered path model. Smooth models ignore the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PathModel {
    /// Arithmetic Brownian motion from `s0`.
    Brownian { sigma: f64, s0: f64 },
    /// Driftless geometric Brownian motion from `s0`, sampled by exact
    /// lognormal increments (a martingale at every grid resolution).
    GeometricBrownian { sigma: f64, s0: f64 },
    /// `omega(t) = t`.
    Linear,
    /// `omega(t) = t^2`.
    Quadratic,
    /// `omega(t) = sin t`.
    Sine,
}

impl PathModel {
    pub fn by_name(name: &str, sigma: f64, s0: f64) -> Result<PathModel> {
        match name {
            "brownian" => Ok(PathModel::Brownian { sigma, s0 }),
            "gbm" => Ok(PathModel::GeometricBrownian { sigma, s0 }),
            "linear" => Ok(PathModel::Linear),
            "quadratic" => Ok(PathModel::Quadratic),
            "sine" => Ok(PathModel::Sine),
            other => Err(Error::UnknownName(format!("path model '{other}'"))),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(
            self,
            PathModel::Linear | PathModel::Quadratic | PathModel::Sine
        )
    }

    /// Sample one price path on the grid.
    pub fn sample(&self, grid: &Arc<TimeGrid>, rng: &mut ChaCha12Rng) -> DiscretePath {
        self.sample_lifted(grid, rng).price
    }

    /// Sample a price path together with the model's own integrated-variance
    /// curve (zero for smooth models).
    pub fn sample_lifted(&self, grid: &Arc<TimeGrid>, rng: &mut ChaCha12Rng) -> LiftedPath {
        let pts = grid.points();
        match *self {
            PathModel::Brownian { sigma, s0 } => {
                let mut price = Vec::with_capacity(pts.len());
                let mut qv = Vec::with_capacity(pts.len());
                price.push(s0);
                qv.push(0.0);
                for w in pts.windows(2) {
                    let dt = w[1] - w[0];
                    let z: f64 = StandardNormal.sample(rng);
                    price.push(price.last().unwrap() + sigma * dt.sqrt() * z);
                    qv.push(qv.last().unwrap() + sigma * sigma * dt);
                }
                lift(
                    DiscretePath::new(Arc::clone(grid), price).expect("grid sized"),
                    DiscretePath::new(Arc::clone(grid), qv).expect("grid sized"),
                )
                .expect("shared grid")
            }
            PathModel::GeometricBrownian { sigma, s0 } => {
                let mut price = Vec::with_capacity(pts.len());
                let mut qv = Vec::with_capacity(pts.len());
                price.push(s0);
                qv.push(0.0);
                for (i, w) in pts.windows(2).enumerate() {
                    let dt = w[1] - w[0];
                    let z: f64 = StandardNormal.sample(rng);
                    let prev = price[i];
                    price.push(prev * (sigma * dt.sqrt() * z - 0.5 * sigma * sigma * dt).exp());
                    qv.push(qv[i] + sigma * sigma * prev * prev * dt);
                }
                lift(
                    DiscretePath::new(Arc::clone(grid), price).expect("grid sized"),
                    DiscretePath::new(Arc::clone(grid), qv).expect("grid sized"),
                )
                .expect("shared grid")
            }
            PathModel::Linear => smooth_lift(grid, |t| t),
            PathModel::Quadratic => smooth_lift(grid, |t| t * t),
            PathModel::Sine => smooth_lift(grid, f64::sin),
        }
    }
}

fn smooth_lift(grid: &Arc<TimeGrid>, f: impl Fn(f64) -> f64) -> LiftedPath {
    lift(
        DiscretePath::from_fn(Arc::clone(grid), f),
        DiscretePath::constant(Arc::clone(grid), 0.0),
    )
    .expect("shared grid")
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Zero-rate Black-Scholes call price.
pub fn bs_call(s0: f64, strike: f64, sigma: f64, t: f64) -> f64 {
    if sigma <= 0.0 || t <= 0.0 {
        return (s0 - strike).max(0.0);
    }
    let sig_rt = sigma * t.sqrt();
    let d1 = ((s0 / strike).ln() + 0.5 * sigma * sigma * t) / sig_rt;
    let d2 = d1 - sig_rt;
    s0 * norm_cdf(d1) - strike * norm_cdf(d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bs_call_reference_values() {
        // frozen from an independent high-precision evaluation
        assert!((bs_call(1.0, 1.0, 0.3, 1.0) - 0.119235384740485).abs() < 1e-12);
        assert!((bs_call(1.0, 1.0, 0.2, 1.0) - 0.079655674554058).abs() < 1e-12);
        assert_eq!(bs_call(2.0, 1.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn norm_cdf_symmetry() {
        for x in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 64).unwrap());
        let model = PathModel::Brownian {
            sigma: 0.2,
            s0: 0.0,
        };
        let a = model.sample(&grid, &mut rng(9));
        let b = model.sample(&grid, &mut rng(9));
        assert_eq!(a.values(), b.values());
        let c = model.sample(&grid, &mut rng(10));
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn gbm_terminal_is_lognormal_martingale() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 16).unwrap());
        let model = PathModel::GeometricBrownian {
            sigma: 0.2,
            s0: 1.0,
        };
        let mut r = rng(123);
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| model.sample(&grid, &mut r).last())
            .sum::<f64>()
            / n as f64;
        // standard error about 0.2 / sqrt(n)
        assert!((mean - 1.0).abs() < 4.0 * 0.2 / (n as f64).sqrt());
    }

    #[test]
    fn model_registry() {
        assert!(PathModel::by_name("brownian", 0.2, 0.0).is_ok());
        assert!(PathModel::by_name("sine", 0.0, 0.0).is_ok());
        assert!(matches!(
            PathModel::by_name("heston", 0.2, 1.0),
            Err(Error::UnknownName(_))
        ));
    }
}
