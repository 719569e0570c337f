//! Declarative prediction sets over lifted paths, membership checking with
//! per-condition tolerances, stopping-closure, and the coercive growth
//! function built from tabulated Hoelder thresholds.
//!
//! Every variant enforces that the second coordinate starts at zero and is
//! nondecreasing. Density conditions are checked cell by cell as forward
//! difference quotients; this is exact when the qv coordinate is piecewise
//! linear at grid resolution (tree compensators, constructed members).
//! Hoelder-regularity clauses that are vacuous for sampled paths (every
//! piecewise-linear path is Hoelder) are not re-checked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{DiscretePath, LiftedPath};

/// A volatility bound as a function of time and the stopped path prefix.
/// Custom functions are referenced by registered name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolSpec {
    Const { value: f64 },
    Registered { name: String, params: Vec<f64> },
}

impl VolSpec {
    pub fn constant(value: f64) -> Self {
        VolSpec::Const { value }
    }

    /// Evaluate at time `t`; `prefix` is the lifted path stopped at `t`, so
    /// registered functions are adapted by construction.
    pub fn eval(&self, t: f64, prefix: &LiftedPath) -> Result<f64> {
        match self {
            VolSpec::Const { value } => Ok(*value),
            VolSpec::Registered { name, params } => match name.as_str() {
                // sigma(t) = a + b t
                "affine_time" => match params[..] {
                    [a, b] => Ok(a + b * t),
                    _ => Err(Error::Contract("affine_time takes params [a, b]".into())),
                },
                // sigma(t) = c |omega(t)|
                "price_prop" => match params[..] {
                    [c] => Ok(c * prefix.price.eval(t)?.abs()),
                    _ => Err(Error::Contract("price_prop takes params [c]".into())),
                },
                other => Err(Error::UnknownName(other.into())),
            },
        }
    }

    fn needs_prefix(&self) -> bool {
        matches!(self, VolSpec::Registered { name, .. } if name == "price_prop")
    }
}

/// Declarative description of a prediction set on the product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PredictionSetSpec {
    /// Volatility band on the qv density: `d nu / dt` in
    /// `[sigma_lo^2, sigma_hi^2]` cell by cell.
    GExpectation {
        sigma_lo: VolSpec,
        sigma_hi: VolSpec,
        holder_alpha: f64,
        /// Hoelder-ball restriction on both coordinates; `None` leaves the
        /// regularity clause unconstrained.
        holder_bound: Option<f64>,
    },
    /// `nu = int sigma_t^2 omega(t)^2 dt` with `sigma` in a band and
    /// `omega(0) = s0`.
    BlackScholesUncertain {
        sigma_lo: VolSpec,
        sigma_hi: VolSpec,
        s0: f64,
    },
    /// Average future price fluctuation controlled by past average
    /// volatility: `(sup - inf over [t,T]) / (T - t) <= c nu(t) / t` at
    /// every interior grid time.
    AvgFluctuation { c: f64 },
    /// Nonnegative paths from 0 with values in `[0, 1]`.
    DualityGap,
    /// `|omega(0)| + sup |d omega| / |dt|^alpha <= bound` on the price.
    HolderBall { alpha: f64, bound: f64 },
    Intersection { specs: Vec<PredictionSetSpec> },
}

impl PredictionSetSpec {
    pub fn g_expectation_const(sigma_lo: f64, sigma_hi: f64) -> Self {
        PredictionSetSpec::GExpectation {
            sigma_lo: VolSpec::constant(sigma_lo),
            sigma_hi: VolSpec::constant(sigma_hi),
            holder_alpha: 0.2,
            holder_bound: None,
        }
    }

    pub fn black_scholes_const(sigma_lo: f64, sigma_hi: f64, s0: f64) -> Self {
        PredictionSetSpec::BlackScholesUncertain {
            sigma_lo: VolSpec::constant(sigma_lo),
            sigma_hi: VolSpec::constant(sigma_hi),
            s0,
        }
    }

    /// Structural well-formedness of the declared parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            PredictionSetSpec::GExpectation {
                sigma_lo,
                sigma_hi,
                holder_alpha,
                holder_bound,
            } => {
                check_band(sigma_lo, sigma_hi)?;
                if !(*holder_alpha > 0.0 && *holder_alpha <= 1.0) {
                    return Err(Error::InvalidAlpha(*holder_alpha));
                }
                if let Some(b) = holder_bound {
                    if !(*b > 0.0) {
                        return Err(Error::Contract(format!(
                            "holder bound must be positive, got {b}"
                        )));
                    }
                }
                Ok(())
            }
            PredictionSetSpec::BlackScholesUncertain {
                sigma_lo, sigma_hi, ..
            } => check_band(sigma_lo, sigma_hi),
            PredictionSetSpec::AvgFluctuation { c } => {
                if !(*c > 0.0) {
                    return Err(Error::Contract(format!("c must be positive, got {c}")));
                }
                Ok(())
            }
            PredictionSetSpec::DualityGap => Ok(()),
            PredictionSetSpec::HolderBall { alpha, bound } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::InvalidAlpha(*alpha));
                }
                if !(*bound >= 0.0) {
                    return Err(Error::Contract(format!(
                        "ball radius must be nonnegative, got {bound}"
                    )));
                }
                Ok(())
            }
            PredictionSetSpec::Intersection { specs } => {
                specs.iter().try_for_each(|s| s.validate())
            }
        }
    }
}

fn check_band(lo: &VolSpec, hi: &VolSpec) -> Result<()> {
    if let (VolSpec::Const { value: a }, VolSpec::Const { value: b }) = (lo, hi) {
        if !(0.0 <= *a && a <= b) {
            return Err(Error::Contract(format!(
                "need 0 <= sigma_lo <= sigma_hi, got [{a}, {b}]"
            )));
        }
    }
    Ok(())
}

/// One violated condition with its worst location and excess.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    /// Grid time of the worst excess.
    pub at: f64,
    /// Amount by which the condition is exceeded beyond its slack.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionTolerance {
    pub condition: String,
    pub slack: f64,
}

/// Tolerance-annotated membership verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipReport {
    pub member: bool,
    pub violated_conditions: Vec<Violation>,
    pub tolerances: Vec<ConditionTolerance>,
}

struct Checker {
    violations: Vec<Violation>,
    tolerances: Vec<ConditionTolerance>,
}

impl Checker {
    fn new() -> Self {
        Self {
            violations: Vec::new(),
            tolerances: Vec::new(),
        }
    }

    /// Record a condition checked with `slack`; `worst` is the largest raw
    /// excess found and its location. Violated iff the excess exceeds slack.
    fn condition(&mut self, name: &str, slack: f64, worst: Option<(f64, f64)>) {
        self.tolerances.push(ConditionTolerance {
            condition: name.into(),
            slack,
        });
        if let Some((at, excess)) = worst {
            if excess > slack {
                self.violations.push(Violation {
                    condition: name.into(),
                    at,
                    margin: excess - slack,
                });
            }
        }
    }

    fn report(self) -> MembershipReport {
        MembershipReport {
            member: self.violations.is_empty(),
            violated_conditions: self.violations,
            tolerances: self.tolerances,
        }
    }
}

/// Largest raw excess of `f` over the given node indices.
fn worst_over<I: Iterator<Item = usize>>(
    times: &[f64],
    idx: I,
    f: impl Fn(usize) -> f64,
) -> Option<(f64, f64)> {
    let mut worst: Option<(f64, f64)> = None;
    for i in idx {
        let e = f(i);
        if worst.map_or(true, |(_, w)| e > w) {
            worst = Some((times[i], e));
        }
    }
    worst
}

/// Membership of a lifted path, checked condition by condition. Failure is a
/// verdict, never an error.
pub fn contains(spec: &PredictionSetSpec, lp: &LiftedPath, tol: f64) -> Result<MembershipReport> {
    if !(tol > 0.0) {
        return Err(Error::Contract(format!("tol must be positive, got {tol}")));
    }
    spec.validate()?;
    let mut checker = Checker::new();
    check_into(spec, lp, tol, &mut checker)?;
    Ok(checker.report())
}

fn check_into(
    spec: &PredictionSetSpec,
    lp: &LiftedPath,
    tol: f64,
    out: &mut Checker,
) -> Result<()> {
    let times = lp.grid().points();
    let price = lp.price.values();
    let qv = lp.qv.values();
    let n = times.len();

    // (A2): nu(0) = 0 and nu nondecreasing, shared by every variant.
    out.condition("qv_starts_at_zero", tol, Some((0.0, qv[0].abs())));
    out.condition(
        "qv_nondecreasing",
        tol,
        worst_over(times, 0..n - 1, |i| qv[i] - qv[i + 1]),
    );

    match spec {
        PredictionSetSpec::GExpectation {
            sigma_lo,
            sigma_hi,
            holder_alpha,
            holder_bound,
        } => {
            density_band_check(lp, sigma_lo, sigma_hi, DensityScale::Unit, tol, out)?;
            if let Some(bound) = holder_bound {
                let hp = lp.price.holder_norm(*holder_alpha)?.value;
                let hq = lp.qv.holder_norm(*holder_alpha)?.value;
                out.condition("price_holder_bound", tol, Some((0.0, hp - bound)));
                out.condition("qv_holder_bound", tol, Some((0.0, hq - bound)));
            }
        }
        PredictionSetSpec::BlackScholesUncertain {
            sigma_lo,
            sigma_hi,
            s0,
        } => {
            out.condition("initial_price", tol, Some((0.0, (price[0] - s0).abs())));
            density_band_check(lp, sigma_lo, sigma_hi, DensityScale::PriceSquared, tol, out)?;
        }
        PredictionSetSpec::AvgFluctuation { c } => {
            out.condition("initial_price", tol, Some((0.0, (price[0] - 1.0).abs())));
            out.condition(
                "price_nonnegative",
                tol,
                worst_over(times, 0..n, |i| -price[i]),
            );
            // suffix extremes over [t_i, T]
            let mut sup = vec![f64::NEG_INFINITY; n];
            let mut inf = vec![f64::INFINITY; n];
            sup[n - 1] = price[n - 1];
            inf[n - 1] = price[n - 1];
            for i in (0..n - 1).rev() {
                sup[i] = sup[i + 1].max(price[i]);
                inf[i] = inf[i + 1].min(price[i]);
            }
            let horizon = lp.price.horizon();
            out.condition(
                "fluctuation_controlled_by_past_volatility",
                tol,
                worst_over(times, 1..n - 1, |i| {
                    (sup[i] - inf[i]) / (horizon - times[i]) - c * qv[i] / times[i]
                }),
            );
        }
        PredictionSetSpec::DualityGap => {
            out.condition("initial_price", tol, Some((0.0, price[0].abs())));
            out.condition(
                "price_in_unit_interval",
                tol,
                worst_over(times, 0..n, |i| (-price[i]).max(price[i] - 1.0)),
            );
        }
        PredictionSetSpec::HolderBall { alpha, bound } => {
            let h = lp.price.holder_norm(*alpha)?.value;
            out.condition("holder_ball", tol, Some((0.0, h - bound)));
        }
        PredictionSetSpec::Intersection { specs } => {
            for s in specs {
                check_into(s, lp, tol, out)?;
            }
        }
    }
    Ok(())
}

enum DensityScale {
    Unit,
    /// Black-Scholes scaling: bounds multiplied by `omega(t_i)^2`.
    PriceSquared,
}

/// Cell-wise density band check with per-cell slack
/// `tol * (1 + upper density bound)`.
fn density_band_check(
    lp: &LiftedPath,
    sigma_lo: &VolSpec,
    sigma_hi: &VolSpec,
    scale: DensityScale,
    tol: f64,
    out: &mut Checker,
) -> Result<()> {
    let times = lp.grid().points();
    let price = lp.price.values();
    let qv = lp.qv.values();
    let needs_prefix = sigma_lo.needs_prefix() || sigma_hi.needs_prefix();

    // track the worst violation measured against each cell's own slack
    let mut worst: Option<(f64, f64, f64)> = None; // (t, excess, slack)
    for i in 0..times.len() - 1 {
        let t = times[i];
        let prefix;
        let prefix_ref = if needs_prefix {
            prefix = lp.stop_at(t)?;
            &prefix
        } else {
            lp
        };
        let lo = sigma_lo.eval(t, prefix_ref)?;
        let hi = sigma_hi.eval(t, prefix_ref)?;
        if lo > hi {
            return Err(Error::Contract(format!(
                "sigma band inverted at t={t}: lo={lo} > hi={hi}"
            )));
        }
        let cell_scale = match scale {
            DensityScale::Unit => 1.0,
            DensityScale::PriceSquared => price[i] * price[i],
        };
        let lo2 = lo * lo * cell_scale;
        let hi2 = hi * hi * cell_scale;
        let d = (qv[i + 1] - qv[i]) / (times[i + 1] - t);
        let slack = tol * (1.0 + hi2);
        let excess = (lo2 - d).max(d - hi2);
        if worst.map_or(true, |(_, e, s)| excess - slack > e - s) {
            worst = Some((t, excess, slack));
        }
    }
    match worst {
        Some((t, excess, slack)) => out.condition("density_in_band", slack, Some((t, excess))),
        None => out.condition("density_in_band", tol, None),
    }
    Ok(())
}

/// Stopping-closure: does the stopped lift stay a member at every grid time?
/// Requires the unstopped path to be a member.
pub fn stop_closure_check(spec: &PredictionSetSpec, lp: &LiftedPath, tol: f64) -> Result<bool> {
    let base = contains(spec, lp, tol)?;
    if !base.member {
        return Err(Error::Contract(
            "stop_closure_check requires a member path".into(),
        ));
    }
    for &t in lp.grid().points() {
        let stopped = lp.stop_at(t)?;
        if !contains(spec, &stopped, tol)?.member {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Coercive growth function: tabulated thresholds on the Hoelder sum plus
/// the sup norms, infinite off the base set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthFunction {
    pub alpha: f64,
    /// `a_n`, strictly increasing; `thresholds[n-1]` is `a_n`.
    pub thresholds: Vec<f64>,
    pub base_spec: PredictionSetSpec,
    /// Tolerance used for the base-set membership check.
    pub membership_tol: f64,
}

/// Value of the growth function, with the reason when infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GrowthValue {
    Finite(f64),
    /// The lifted path fails base-set membership.
    OutsideBaseSet,
    /// The Hoelder sum exceeds every tabulated threshold.
    TabulationExhausted,
}

impl GrowthValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            GrowthValue::Finite(v) => *v,
            _ => f64::INFINITY,
        }
    }
}

impl GrowthFunction {
    pub fn new(
        alpha: f64,
        thresholds: Vec<f64>,
        base_spec: PredictionSetSpec,
        membership_tol: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.25) {
            return Err(Error::Contract(format!(
                "growth alpha must lie in (0, 1/4], got {alpha}"
            )));
        }
        if thresholds.is_empty() {
            return Err(Error::Contract("threshold table must be nonempty".into()));
        }
        if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract(
                "thresholds must be strictly increasing".into(),
            ));
        }
        base_spec.validate()?;
        Ok(Self {
            alpha,
            thresholds,
            base_spec,
            membership_tol,
        })
    }

    /// Default table `a_n = n * scale`, with `scale` calibrated so `a_1`
    /// exceeds the median Hoelder sum of the calibration paths.
    pub fn calibrated(
        base_spec: PredictionSetSpec,
        alpha: f64,
        calibration: &[LiftedPath],
        table_len: usize,
        membership_tol: f64,
    ) -> Result<Self> {
        let mut sums: Vec<f64> = calibration
            .iter()
            .map(|lp| holder_sum(lp, alpha))
            .collect::<Result<_>>()?;
        sums.sort_by(f64::total_cmp);
        let median = if sums.is_empty() {
            0.0
        } else {
            sums[sums.len() / 2]
        };
        let scale = if median > 0.0 { 1.05 * median } else { 1.0 };
        let thresholds = (1..=table_len.max(1)).map(|n| n as f64 * scale).collect();
        Self::new(alpha, thresholds, base_spec, membership_tol)
    }

    /// `inf { n >= 1/alpha : holder_sum <= a_{n+1} }` plus the sup norms when
    /// the path is a member of the base set; infinite otherwise.
    pub fn growth_value(&self, lp: &LiftedPath) -> Result<GrowthValue> {
        if !contains(&self.base_spec, lp, self.membership_tol)?.member {
            return Ok(GrowthValue::OutsideBaseSet);
        }
        let sum = holder_sum(lp, self.alpha)?;
        let n0 = (1.0 / self.alpha).ceil() as usize;
        // a_{n+1} lives at index n in the table
        for n in n0..self.thresholds.len() {
            if sum <= self.thresholds[n] {
                return Ok(GrowthValue::Finite(
                    n as f64 + lp.price.sup_norm() + lp.qv.sup_norm(),
                ));
            }
        }
        Ok(GrowthValue::TabulationExhausted)
    }
}

fn holder_sum(lp: &LiftedPath, alpha: f64) -> Result<f64> {
    Ok(lp.price.holder_norm(alpha)?.value + lp.qv.holder_norm(alpha)?.value)
}

/// Compute the quadratic variation of a price path, lift, and check
/// membership of the lift. A failed Omega certificate is prepended as a
/// violation and forces non-membership.
pub fn build_qv_and_check(
    spec: &PredictionSetSpec,
    path: &DiscretePath,
    qv_cfg: crate::calculus::QvConfig,
    tol: f64,
) -> Result<(LiftedPath, MembershipReport)> {
    let qv = crate::calculus::pathwise_qv(path, qv_cfg)?;
    let lp = crate::paths::lift(path.clone(), qv.qv.clone())?;
    let mut report = contains(spec, &lp, tol)?;
    if !qv.in_omega {
        let gap = qv.diagnostics.gaps.last().copied().unwrap_or(f64::INFINITY);
        report.member = false;
        report.violated_conditions.insert(
            0,
            Violation {
                condition: "omega_membership".into(),
                at: path.horizon(),
                margin: (gap - qv_cfg.tol).max(qv.diagnostics.max_decrease),
            },
        );
    }
    Ok((lp, report))
}
