//! Discretized continuous paths on a shared time grid.
//!
//! A path is the piecewise-linear interpolant of its samples, so every
//! construction downstream (stopping, integration, norms) is exactly
//! computable from the node values. Stopping is restricted to grid times.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Strictly increasing grid of times covering `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// Build a grid from explicit points. The first point must be 0 and the
    /// points strictly increasing; the last point is the horizon `T`.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least two points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "first point must be 0, got {}",
                points[0]
            )));
        }
        for w in points.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "points must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if !points[points.len() - 1].is_finite() {
            return Err(Error::InvalidGrid("horizon must be finite".into()));
        }
        Ok(Self { points })
    }

    /// Uniform grid with `steps` cells on `[0, horizon]` (`steps + 1` points).
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::InvalidGrid(format!(
                "uniform grid needs horizon > 0 and steps >= 1, got T={horizon}, steps={steps}"
            )));
        }
        let points = (0..=steps)
            .map(|i| horizon * i as f64 / steps as f64)
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of the largest grid point `<= t`.
    pub fn cell_left(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(match self.points.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => i,
            Err(i) => i - 1,
        })
    }

    /// Smallest grid step.
    pub fn min_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// A continuous path sampled on a grid, evaluated by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl DiscretePath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                values: values.len(),
                grid: grid.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Path constant at `c` on the given grid.
    pub fn constant(grid: Arc<TimeGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Sample a function of time on the grid.
    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn same_grid(&self, other: &DiscretePath) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.points() == other.grid.points()
    }

    /// Piecewise-linear evaluation; exact at grid points.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = self.grid.cell_left(t)?;
        let pts = self.grid.points();
        if t == pts[i] || i + 1 == pts.len() {
            return Ok(self.values[i]);
        }
        let w = (t - pts[i]) / (pts[i + 1] - pts[i]);
        Ok(self.values[i] + w * (self.values[i + 1] - self.values[i]))
    }

    /// Stopped path `omega^t(s) = omega(t ^ s)` on the same grid.
    pub fn stop_at(&self, t: f64) -> Result<DiscretePath> {
        let frozen = self.eval(t)?;
        let values = self
            .grid
            .points()
            .iter()
            .zip(&self.values)
            .map(|(&s, &v)| if s <= t { v } else { frozen })
            .collect();
        Ok(DiscretePath {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    /// Sup norm over grid nodes. Linear interpolation never exceeds node
    /// extremes in absolute value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute slope over grid cells.
    pub fn max_slope(&self) -> f64 {
        let pts = self.grid.points();
        self.values
            .windows(2)
            .zip(pts.windows(2))
            .map(|(v, t)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    }

    /// alpha-Hoelder norm estimate; all grid pairs up to `EXACT_PAIR_LIMIT`
    /// nodes, dyadic-separation pairs beyond (documented approximation from
    /// below, exact for piecewise-linear paths at alpha = 1).
    pub fn holder_norm(&self, alpha: f64) -> Result<HolderEstimate> {
        if self.len() <= EXACT_PAIR_LIMIT {
            self.holder_norm_exact(alpha)
        } else {
            self.holder_norm_dyadic(alpha)
        }
    }

    /// alpha-Hoelder norm over all O(n^2) grid pairs.
    pub fn holder_norm_exact(&self, alpha: f64) -> Result<HolderEstimate> {
        check_alpha(alpha)?;
        let pts = self.grid.points();
        let mut worst: f64 = 0.0;
        for i in 0..self.values.len() {
            for j in (i + 1)..self.values.len() {
                let r = (self.values[j] - self.values[i]).abs() / (pts[j] - pts[i]).powf(alpha);
                worst = worst.max(r);
            }
        }
        Ok(HolderEstimate {
            alpha,
            value: self.values[0].abs() + worst,
        })
    }

    /// alpha-Hoelder norm restricted to pairs at dyadic index separation.
    pub fn holder_norm_dyadic(&self, alpha: f64) -> Result<HolderEstimate> {
        check_alpha(alpha)?;
        let pts = self.grid.points();
        let n = self.values.len();
        let mut worst: f64 = 0.0;
        let mut gap = 1usize;
        while gap < n {
            for i in 0..(n - gap) {
                let j = i + gap;
                let r = (self.values[j] - self.values[i]).abs() / (pts[j] - pts[i]).powf(alpha);
                worst = worst.max(r);
            }
            gap *= 2;
        }
        Ok(HolderEstimate {
            alpha,
            value: self.values[0].abs() + worst,
        })
    }

    /// Write the path in the `t,value` CSV interchange format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.grid.points().iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }

    /// Read a path from the `t,value` CSV interchange format, validating the
    /// grid invariants.
    pub fn from_csv(text: &str) -> Result<DiscretePath> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "t,value" => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header 't,value', got {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (t, v) = match (fields.next(), fields.next(), fields.next()) {
                (Some(t), Some(v), None) => (t, v),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two comma-separated fields",
                        lineno + 2
                    )))
                }
            };
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            points.push(parse(t)?);
            values.push(parse(v)?);
        }
        let grid = Arc::new(TimeGrid::new(points)?);
        DiscretePath::new(grid, values)
    }
}

/// Pair-count threshold above which Hoelder norms switch to dyadic pairs.
pub const EXACT_PAIR_LIMIT: usize = 2048;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Result of a Hoelder norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub value: f64,
}

/// A point of the product space: price path paired with a candidate
/// quadratic-variation path on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPath {
    pub price: DiscretePath,
    pub qv: DiscretePath,
}

impl LiftedPath {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.price.grid()
    }

    /// Stop both coordinates at `t`.
    pub fn stop_at(&self, t: f64) -> Result<LiftedPath> {
        Ok(LiftedPath {
            price: self.price.stop_at(t)?,
            qv: self.qv.stop_at(t)?,
        })
    }
}

/// Pair a price path with a quadratic-variation path sharing its grid.
pub fn lift(price: DiscretePath, qv: DiscretePath) -> Result<LiftedPath> {
    if !price.same_grid(&qv) {
        return Err(Error::GridMismatch);
    }
    Ok(LiftedPath { price, qv })
}
