//! Threshold-crossing partitions and the pathwise quadratic variation.
//!
//! For level `m`, partition times are the successive first grid times at
//! which the path has moved by at least `2^-m` since the previous partition
//! time. The discrete iterated integral along that partition converges (on
//! nice paths) to the pathwise integral of `S dS`, and
//! `qv = S^2 - S_0^2 - 2 S` is the associated quadratic variation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::paths::DiscretePath;

/// Stopping partition of a path at movement threshold `2^-m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KarandikarPartition {
    pub level: u32,
    pub threshold: f64,
    /// Grid times of the partition, starting at 0.
    pub times: Vec<f64>,
    /// Grid indices of the partition times.
    pub indices: Vec<usize>,
}

/// First grid times at which the path moves by `2^-m` from the previous
/// partition point. A path that never moves yields the single time 0.
pub fn karandikar_times(path: &DiscretePath, m: u32) -> Result<KarandikarPartition> {
    if m == 0 {
        return Err(Error::Contract("karandikar level must satisfy m >= 1".into()));
    }
    let threshold = 0.5f64.powi(m as i32);
    let values = path.values();
    let mut indices = vec![0usize];
    let mut anchor = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if (v - anchor).abs() >= threshold {
            indices.push(i);
            anchor = v;
        }
    }
    let times = indices.iter().map(|&i| path.grid().points()[i]).collect();
    Ok(KarandikarPartition {
        level: m,
        threshold,
        times,
        indices,
    })
}

/// Discrete iterated integral along a level-`m` partition, evaluated at
/// every grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratedIntegralCurve {
    pub level: u32,
    pub curve: DiscretePath,
}

/// Exact evaluation of the level-`m` iterated integral at all grid times.
pub fn iterated_integral(path: &DiscretePath, m: u32) -> Result<IteratedIntegralCurve> {
    let partition = karandikar_times(path, m)?;
    Ok(iterated_integral_along(path, &partition))
}

fn iterated_integral_along(
    path: &DiscretePath,
    partition: &KarandikarPartition,
) -> IteratedIntegralCurve {
    let values = path.values();
    let mut out = Vec::with_capacity(values.len());
    let mut completed = 0.0; // sum over fully elapsed partition intervals
    let mut anchor = values[0];
    let mut next = 1usize; // next partition index to elapse
    for (i, &v) in values.iter().enumerate() {
        let s = completed + anchor * (v - anchor);
        out.push(s);
        if next < partition.indices.len() && partition.indices[next] == i {
            completed = s;
            anchor = v;
            next += 1;
        }
    }
    IteratedIntegralCurve {
        level: partition.level,
        curve: DiscretePath::new(Arc::clone(path.grid()), out).expect("same grid"),
    }
}

/// Configuration for [`pathwise_qv`].
#[derive(Debug, Clone, Copy)]
pub struct QvConfig {
    pub m_min: u32,
    pub m_max: u32,
    /// Sup-norm tolerance certifying convergence of the level curves, also
    /// the scale of the monotonicity slack.
    pub tol: f64,
}

/// Level curves, limit candidate, quadratic variation, and membership
/// diagnostics for one path.
#[derive(Debug, Clone)]
pub struct QvResult {
    pub s_curves: Vec<IteratedIntegralCurve>,
    /// Limit candidate: the last informative level curve.
    pub s_limit: DiscretePath,
    /// `qv = S^2 - S_0^2 - 2 * s_limit`, node by node.
    pub qv: DiscretePath,
    pub in_omega: bool,
    pub diagnostics: QvDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct QvDiagnostics {
    /// Sup-norm gaps between consecutive retained level curves.
    pub gaps: Vec<f64>,
    /// Largest single-step decrease of the qv curve.
    pub max_decrease: f64,
    /// Levels dropped because their threshold falls below the largest
    /// single-cell move of the path.
    pub excluded_levels: Vec<u32>,
    /// Largest single-cell move of the path.
    pub max_cell_increment: f64,
    /// Tolerance the verdict was computed with.
    pub tol: f64,
    pub warnings: Vec<String>,
}

/// Compute level curves for `m = m_min..=m_max`, the limit candidate, the
/// quadratic variation and the membership verdict.
///
/// Levels whose threshold `2^-m` falls below the largest single-cell move of
/// the path are excluded with a warning: there the partition degenerates to
/// (a subset of) the full grid and certifies nothing. Non-membership is a
/// verdict, not an error.
pub fn pathwise_qv(path: &DiscretePath, cfg: QvConfig) -> Result<QvResult> {
    if cfg.m_min == 0 || cfg.m_min > cfg.m_max {
        return Err(Error::Contract(format!(
            "need 1 <= m_min <= m_max, got {}..{}",
            cfg.m_min, cfg.m_max
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Contract(format!("tol must be positive, got {}", cfg.tol)));
    }

    let max_inc = path
        .values()
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);

    let mut warnings = Vec::new();
    let mut excluded = Vec::new();
    let mut curves = Vec::new();
    for m in cfg.m_min..=cfg.m_max {
        let threshold = 0.5f64.powi(m as i32);
        if threshold < max_inc {
            excluded.push(m);
            continue;
        }
        curves.push(iterated_integral(path, m)?);
    }
    if !excluded.is_empty() {
        warnings.push(format!(
            "levels {:?} excluded: threshold below max cell move {max_inc:.3e}",
            excluded
        ));
    }

    // Fall back to the coarsest requested level so the result stays total;
    // the verdict below is then necessarily negative.
    let degenerate = curves.is_empty();
    if degenerate {
        warnings.push("no informative levels on this grid".into());
        curves.push(iterated_integral(path, cfg.m_min)?);
    }

    let gaps: Vec<f64> = curves
        .windows(2)
        .map(|w| {
            w[0].curve
                .values()
                .iter()
                .zip(w[1].curve.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();

    let s_limit = curves[curves.len() - 1].curve.clone();
    let v = path.values();
    let qv_values: Vec<f64> = v
        .iter()
        .zip(s_limit.values())
        .map(|(&x, &s)| x * x - v[0] * v[0] - 2.0 * s)
        .collect();
    let qv = DiscretePath::new(Arc::clone(path.grid()), qv_values)?;

    let max_decrease = qv
        .values()
        .windows(2)
        .map(|w| (w[0] - w[1]).max(0.0))
        .fold(0.0, f64::max);

    // Scale-aware slack for the floating-point telescoping.
    let slack = cfg.tol * (1.0 + path.sup_norm().powi(2));
    let monotone = max_decrease <= slack;
    let cauchy = gaps.last().map_or(true, |&g| g <= cfg.tol);
    let in_omega = !degenerate && monotone && cauchy;

    Ok(QvResult {
        s_curves: curves,
        s_limit,
        qv,
        in_omega,
        diagnostics: QvDiagnostics {
            gaps,
            max_decrease,
            excluded_levels: excluded,
            max_cell_increment: max_inc,
            tol: cfg.tol,
            warnings,
        },
    })
}

impl QvResult {
    /// JSON export: levels, per-level sup-norm gaps, qv curve, verdict,
    /// tolerance used.
    pub fn export(&self) -> serde_json::Value {
        serde_json::json!({
            "levels": self.s_curves.iter().map(|c| c.level).collect::<Vec<_>>(),
            "gaps": self.diagnostics.gaps,
            "qv": self.qv.values(),
            "in_omega": self.in_omega,
            "tol": self.diagnostics.tol,
            "excluded_levels": self.diagnostics.excluded_levels,
            "max_decrease": self.diagnostics.max_decrease,
        })
    }

    /// Quadratic variation accumulated over a level partition directly as a
    /// sum of squared increments. Algebraically identical to the stored `qv`
    /// at every node; kept as an independent summation route for consistency
    /// checks.
    pub fn qv_by_squared_increments(&self, path: &DiscretePath) -> Result<DiscretePath> {
        let level = self.s_curves.last().expect("at least one curve").level;
        let partition = karandikar_times(path, level)?;
        let values = path.values();
        let mut out = Vec::with_capacity(values.len());
        let mut completed = 0.0;
        let mut anchor = values[0];
        let mut next = 1usize;
        for (i, &v) in values.iter().enumerate() {
            let q = completed + (v - anchor) * (v - anchor);
            out.push(q);
            if next < partition.indices.len() && partition.indices[next] == i {
                completed = q;
                anchor = v;
                next += 1;
            }
        }
        DiscretePath::new(Arc::clone(path.grid()), out)
    }
}
