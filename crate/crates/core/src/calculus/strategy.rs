//! Simple trading strategies and their pathwise integrals.
//!
//! A strategy is a finite list of legs `(entry rule, exit rule, holding)`.
//! Stopping rules return the first grid time at which a threshold predicate
//! holds (or the horizon), and holdings only ever see the path stopped at
//! the entry time, so adaptedness holds by construction.

use std::sync::Arc;

use crate::calculus::qv::QvResult;
use crate::error::{Error, Result};
use crate::paths::{DiscretePath, LiftedPath};

/// First grid time at which a threshold predicate holds, or the horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum StoppingRule {
    /// First grid time `>= t0`.
    AtTime(f64),
    /// First grid time with `omega(t) >= level`.
    PriceAbove(f64),
    /// First grid time with `omega(t) <= level`.
    PriceBelow(f64),
    /// First grid time with `|omega(t) - omega(0)| >= delta`.
    MovedBy(f64),
}

impl StoppingRule {
    /// Grid index of the first time the predicate holds; the last grid index
    /// when it never does.
    pub fn first_index(&self, path: &DiscretePath) -> usize {
        let v = path.values();
        let last = v.len() - 1;
        match *self {
            StoppingRule::AtTime(t0) => path
                .grid()
                .points()
                .iter()
                .position(|&t| t >= t0)
                .unwrap_or(last),
            StoppingRule::PriceAbove(level) => {
                v.iter().position(|&x| x >= level).unwrap_or(last)
            }
            StoppingRule::PriceBelow(level) => {
                v.iter().position(|&x| x <= level).unwrap_or(last)
            }
            StoppingRule::MovedBy(delta) => v
                .iter()
                .position(|&x| (x - v[0]).abs() >= delta)
                .unwrap_or(last),
        }
    }

    pub fn first_time(&self, path: &DiscretePath) -> f64 {
        path.grid().points()[self.first_index(path)]
    }
}

/// Bounded holding decided at the entry time from the stopped path prefix.
#[derive(Debug, Clone, PartialEq)]
pub enum AdaptedFunctional {
    Const(f64),
    /// `intercept + slope * omega(tau_entry)`.
    AffineInEntryPrice { intercept: f64, slope: f64 },
}

impl AdaptedFunctional {
    /// Evaluate on the path stopped at the entry time.
    fn eval_on_stopped(&self, stopped: &DiscretePath) -> f64 {
        match *self {
            AdaptedFunctional::Const(c) => c,
            AdaptedFunctional::AffineInEntryPrice { intercept, slope } => {
                intercept + slope * stopped.last()
            }
        }
    }

    fn scaled(&self, a: f64) -> AdaptedFunctional {
        match *self {
            AdaptedFunctional::Const(c) => AdaptedFunctional::Const(a * c),
            AdaptedFunctional::AffineInEntryPrice { intercept, slope } => {
                AdaptedFunctional::AffineInEntryPrice {
                    intercept: a * intercept,
                    slope: a * slope,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub entry: StoppingRule,
    pub exit: StoppingRule,
    pub holding: AdaptedFunctional,
}

/// A finite list of legs; the position on `(entry, exit]` is the holding.
/// Legs whose exit rule fires at or before entry contribute nothing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimpleStrategy {
    pub legs: Vec<Leg>,
}

impl SimpleStrategy {
    pub fn zero() -> Self {
        Self { legs: Vec::new() }
    }

    /// Hold `h` on `(0, T]`.
    pub fn buy_and_hold(h: f64) -> Self {
        Self {
            legs: vec![Leg {
                entry: StoppingRule::AtTime(0.0),
                exit: StoppingRule::AtTime(f64::INFINITY),
                holding: AdaptedFunctional::Const(h),
            }],
        }
    }

    /// Hold a constant `h` on `(from, until]`.
    pub fn hold_between(h: f64, from: f64, until: f64) -> Self {
        Self {
            legs: vec![Leg {
                entry: StoppingRule::AtTime(from),
                exit: StoppingRule::AtTime(until),
                holding: AdaptedFunctional::Const(h),
            }],
        }
    }

    /// Leg-wise linear combination `a * ha + b * hb`.
    pub fn linear_combination(a: f64, ha: &Self, b: f64, hb: &Self) -> Self {
        let mut legs = Vec::with_capacity(ha.legs.len() + hb.legs.len());
        for leg in &ha.legs {
            legs.push(Leg {
                entry: leg.entry.clone(),
                exit: leg.exit.clone(),
                holding: leg.holding.scaled(a),
            });
        }
        for leg in &hb.legs {
            legs.push(Leg {
                entry: leg.entry.clone(),
                exit: leg.exit.clone(),
                holding: leg.holding.scaled(b),
            });
        }
        Self { legs }
    }

    /// Per-cell value of the process `H_t` on `(t_i, t_{i+1}]`, for every
    /// grid cell. Rules are evaluated on `rule_path`.
    fn cell_values(&self, rule_path: &DiscretePath) -> Vec<f64> {
        let n = rule_path.len() - 1;
        let mut cells = vec![0.0; n];
        for leg in &self.legs {
            let ei = leg.entry.first_index(rule_path);
            let xi = leg.exit.first_index(rule_path).max(ei);
            if xi == ei {
                continue;
            }
            let entry_time = rule_path.grid().points()[ei];
            let stopped = rule_path.stop_at(entry_time).expect("grid time");
            let h = leg.holding.eval_on_stopped(&stopped);
            for cell in cells.iter_mut().take(xi).skip(ei) {
                *cell += h;
            }
        }
        cells
    }
}

/// Telescoping integral of a strategy against an integrator curve, with the
/// stopping rules and holdings evaluated on `rule_path`. Exact at every grid
/// node; starts at 0.
fn integral_against(
    strategy: &SimpleStrategy,
    rule_path: &DiscretePath,
    integrator: &DiscretePath,
) -> DiscretePath {
    let w = integrator.values();
    let mut out = vec![0.0; w.len()];
    for leg in &strategy.legs {
        let ei = leg.entry.first_index(rule_path);
        let xi = leg.exit.first_index(rule_path).max(ei);
        if xi == ei {
            continue;
        }
        let entry_time = rule_path.grid().points()[ei];
        let stopped = rule_path.stop_at(entry_time).expect("grid time");
        let h = leg.holding.eval_on_stopped(&stopped);
        for (i, o) in out.iter_mut().enumerate() {
            *o += h * (w[i.min(xi)] - w[i.min(ei)]);
        }
    }
    DiscretePath::new(Arc::clone(integrator.grid()), out).expect("same grid")
}

/// Pathwise stochastic integral `(H . S)` evaluated at every grid time.
pub fn integral_s(strategy: &SimpleStrategy, path: &DiscretePath) -> DiscretePath {
    integral_against(strategy, path, path)
}

/// Integral `(G . S)` against the iterated-integral limit curve of
/// `qv_input`. Refuses when the path was not certified in Omega, where the
/// integrator is undefined.
pub fn integral_ss(
    strategy: &SimpleStrategy,
    path: &DiscretePath,
    qv_input: &QvResult,
) -> Result<DiscretePath> {
    if !qv_input.in_omega {
        return Err(Error::NotInOmega(
            "iterated integral undefined: level curves did not converge".into(),
        ));
    }
    if !qv_input.s_limit.same_grid(path) {
        return Err(Error::GridMismatch);
    }
    Ok(integral_against(strategy, path, &qv_input.s_limit))
}

/// `(H . S) + (G . S)` together with the approximating curves
/// `((H + G S^m) . S)` for each retained level `m`, where `S^m` holds the
/// path value at the last level-`m` partition time.
#[derive(Debug, Clone)]
pub struct GeneralizedIntegral {
    pub total: DiscretePath,
    /// `(level, curve)` pairs, coarsest level first.
    pub approximations: Vec<(u32, DiscretePath)>,
}

pub fn generalized_integral(
    h: &SimpleStrategy,
    g: &SimpleStrategy,
    path: &DiscretePath,
    qv_input: &QvResult,
) -> Result<GeneralizedIntegral> {
    let hs = integral_s(h, path);
    let gss = integral_ss(g, path, qv_input)?;
    let total_values: Vec<f64> = hs
        .values()
        .iter()
        .zip(gss.values())
        .map(|(a, b)| a + b)
        .collect();
    let total = DiscretePath::new(Arc::clone(path.grid()), total_values)?;

    let h_cells = h.cell_values(path);
    let g_cells = g.cell_values(path);
    let v = path.values();
    let mut approximations = Vec::with_capacity(qv_input.s_curves.len());
    for curve in &qv_input.s_curves {
        let partition = super::qv::karandikar_times(path, curve.level)?;
        let mut anchor = v[0];
        let mut next = 1usize;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(v.len());
        out.push(0.0);
        for i in 0..v.len() - 1 {
            // integrand on (t_i, t_{i+1}] is H + G * S at the partition anchor
            acc += (h_cells[i] + g_cells[i] * anchor) * (v[i + 1] - v[i]);
            out.push(acc);
            if next < partition.indices.len() && partition.indices[next] == i + 1 {
                anchor = v[i + 1];
                next += 1;
            }
        }
        approximations.push((
            curve.level,
            DiscretePath::new(Arc::clone(path.grid()), out)?,
        ));
    }
    Ok(GeneralizedIntegral {
        total,
        approximations,
    })
}

/// A strategy on the product space acting through the price coordinate.
///
/// Its iterated-integral leg integrates `(S^2 - S_0^2 - V) / 2`, the
/// iterated integral reconstructed from the lifted path itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedStrategy {
    base: SimpleStrategy,
}

impl LiftedStrategy {
    /// Integral against the price coordinate.
    pub fn integral_price(&self, lp: &LiftedPath) -> DiscretePath {
        integral_against(&self.base, &lp.price, &lp.price)
    }

    /// Integral against the reconstructed iterated integral of the lifted
    /// path.
    pub fn integral_iterated(&self, lp: &LiftedPath) -> DiscretePath {
        let p = lp.price.values();
        let q = lp.qv.values();
        let s_bar: Vec<f64> = p
            .iter()
            .zip(q)
            .map(|(&x, &v)| (x * x - p[0] * p[0] - v) / 2.0)
            .collect();
        let integrator =
            DiscretePath::new(Arc::clone(lp.price.grid()), s_bar).expect("same grid");
        integral_against(&self.base, &lp.price, &integrator)
    }

    /// Compose back with the lift: recover the strategy on the original
    /// space.
    pub fn lower(&self) -> SimpleStrategy {
        self.base.clone()
    }
}

/// Lift a strategy pair to the product space by composing every rule and
/// holding with the price coordinate. Evaluating the lifted integrals on
/// `(omega, <omega>)` reproduces the originals at every grid node.
pub fn transfer_strategy_up(
    h: &SimpleStrategy,
    g: &SimpleStrategy,
) -> (LiftedStrategy, LiftedStrategy) {
    (
        LiftedStrategy { base: h.clone() },
        LiftedStrategy { base: g.clone() },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::qv::{pathwise_qv, QvConfig};
    use crate::paths::{lift, TimeGrid};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn linear_path(steps: usize) -> DiscretePath {
        let grid = Arc::new(TimeGrid::uniform(1.0, steps).unwrap());
        DiscretePath::from_fn(grid, |t| t)
    }

    fn brownian(seed: u64, sigma: f64, steps: usize) -> DiscretePath {
        let grid = Arc::new(TimeGrid::uniform(1.0, steps).unwrap());
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let sd = sigma / (steps as f64).sqrt();
        let mut v = vec![0.0];
        for i in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            v.push(v[i] + sd * z);
        }
        DiscretePath::new(grid, v).unwrap()
    }

    #[test]
    fn hold_one_telescopes() {
        let p = brownian(3, 0.4, 256);
        let h = SimpleStrategy::buy_and_hold(1.0);
        let curve = integral_s(&h, &p);
        assert_eq!(curve.first(), 0.0);
        assert!((curve.last() - (p.last() - p.first())).abs() < 1e-14);
    }

    #[test]
    fn empty_interval_gives_zero_curve() {
        let p = linear_path(8);
        let h = SimpleStrategy::hold_between(5.0, 1.0, 1.0);
        let curve = integral_s(&h, &p);
        assert!(curve.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hold_two_on_first_half_of_linear_path() {
        let p = linear_path(8);
        let h = SimpleStrategy::hold_between(2.0, 0.0, 0.5);
        let curve = integral_s(&h, &p);
        assert!((curve.last() - 1.0).abs() < 1e-15);
        assert!((curve.eval(0.25).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linearity_legwise() {
        let p = brownian(9, 0.3, 128);
        let h1 = SimpleStrategy::hold_between(1.5, 0.0, 0.7);
        let h2 = SimpleStrategy {
            legs: vec![Leg {
                entry: StoppingRule::PriceAbove(0.05),
                exit: StoppingRule::AtTime(f64::INFINITY),
                holding: AdaptedFunctional::AffineInEntryPrice {
                    intercept: 0.5,
                    slope: -2.0,
                },
            }],
        };
        let combo = SimpleStrategy::linear_combination(2.0, &h1, -3.0, &h2);
        let lhs = integral_s(&combo, &p);
        let a = integral_s(&h1, &p);
        let b = integral_s(&h2, &p);
        for i in 0..p.len() {
            let rhs = 2.0 * a.values()[i] - 3.0 * b.values()[i];
            assert!((lhs.values()[i] - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn stop_integral_commutation() {
        let p = brownian(21, 0.5, 64);
        let h = SimpleStrategy {
            legs: vec![
                Leg {
                    entry: StoppingRule::MovedBy(0.1),
                    exit: StoppingRule::AtTime(f64::INFINITY),
                    holding: AdaptedFunctional::Const(2.0),
                },
                Leg {
                    entry: StoppingRule::AtTime(0.25),
                    exit: StoppingRule::PriceBelow(-0.2),
                    holding: AdaptedFunctional::AffineInEntryPrice {
                        intercept: 0.0,
                        slope: 1.0,
                    },
                },
            ],
        };
        let full = integral_s(&h, &p);
        for &t in p.grid().points().iter().step_by(7) {
            let stopped = p.stop_at(t).unwrap();
            let at_t = full.eval(t).unwrap();
            let on_stopped = integral_s(&h, &stopped).last();
            assert!(
                (at_t - on_stopped).abs() <= 1e-12,
                "t={t}: {at_t} vs {on_stopped}"
            );
        }
    }

    fn qv_of(path: &DiscretePath) -> QvResult {
        pathwise_qv(
            path,
            QvConfig {
                m_min: 3,
                m_max: 8,
                tol: 0.05,
            },
        )
        .unwrap()
    }

    #[test]
    fn integral_ss_hold_one_recovers_limit_curve() {
        let p = linear_path(1 << 10);
        let qv = qv_of(&p);
        let g = SimpleStrategy::buy_and_hold(1.0);
        let curve = integral_ss(&g, &p, &qv).unwrap();
        assert!((curve.last() - qv.s_limit.last()).abs() < 1e-14);
        let zero = integral_ss(&SimpleStrategy::zero(), &p, &qv).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn integral_ss_approximates_riemann_stieltjes() {
        // oracle: int_0^1 t dt = 1/2 for the linear path
        let p = linear_path(1 << 12);
        let qv = pathwise_qv(
            &p,
            QvConfig {
                m_min: 6,
                m_max: 10,
                tol: 1e-2,
            },
        )
        .unwrap();
        let g = SimpleStrategy::buy_and_hold(1.0);
        let curve = integral_ss(&g, &p, &qv).unwrap();
        assert!((curve.last() - 0.5).abs() < 0.5f64.powi(10));
    }

    #[test]
    fn integral_ss_refuses_off_omega() {
        let grid = Arc::new(TimeGrid::new(vec![0.0, 1.0]).unwrap());
        let p = DiscretePath::new(grid, vec![0.0, 1.0]).unwrap();
        let qv = pathwise_qv(
            &p,
            QvConfig {
                m_min: 1,
                m_max: 2,
                tol: 1e-9,
            },
        )
        .unwrap();
        assert!(!qv.in_omega);
        let g = SimpleStrategy::buy_and_hold(1.0);
        assert!(matches!(
            integral_ss(&g, &p, &qv),
            Err(Error::NotInOmega(_))
        ));
    }

    #[test]
    fn generalized_integral_degenerate_cases() {
        let p = brownian(2, 0.2, 1 << 10);
        let qv = qv_of(&p);
        let h = SimpleStrategy::hold_between(1.0, 0.0, 0.5);
        let g = SimpleStrategy::buy_and_hold(0.7);

        let only_h = generalized_integral(&h, &SimpleStrategy::zero(), &p, &qv).unwrap();
        let hs = integral_s(&h, &p);
        for i in 0..p.len() {
            assert!((only_h.total.values()[i] - hs.values()[i]).abs() <= 1e-13);
        }

        let only_g = generalized_integral(&SimpleStrategy::zero(), &g, &p, &qv).unwrap();
        let gss = integral_ss(&g, &p, &qv).unwrap();
        for i in 0..p.len() {
            assert!((only_g.total.values()[i] - gss.values()[i]).abs() <= 1e-13);
        }
    }

    #[test]
    fn generalized_integral_approximations_converge() {
        let p = brownian(17, 0.2, 1 << 13);
        let qv = pathwise_qv(
            &p,
            QvConfig {
                m_min: 2,
                m_max: 6,
                tol: 0.05,
            },
        )
        .unwrap();
        let g = SimpleStrategy::buy_and_hold(1.0);
        let gen = generalized_integral(&SimpleStrategy::zero(), &g, &p, &qv).unwrap();
        let gaps: Vec<f64> = gen
            .approximations
            .iter()
            .map(|(_, curve)| {
                curve
                    .values()
                    .iter()
                    .zip(gen.total.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(gaps.len() >= 3);
        assert!(
            gaps.last().unwrap() < &gaps[0],
            "approximation gaps not shrinking: {gaps:?}"
        );
    }

    #[test]
    fn transfer_reproduces_integrals_on_the_lift() {
        let p = brownian(31, 0.25, 1 << 11);
        let qv = qv_of(&p);
        assert!(qv.in_omega);
        let h = SimpleStrategy::hold_between(1.2, 0.0, 0.6);
        let g = SimpleStrategy::buy_and_hold(-0.8);
        let original: Vec<f64> = {
            let a = integral_s(&h, &p);
            let b = integral_ss(&g, &p, &qv).unwrap();
            a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect()
        };
        let lifted_path = lift(p.clone(), qv.qv.clone()).unwrap();
        let (hb, gb) = transfer_strategy_up(&h, &g);
        let lifted: Vec<f64> = {
            let a = hb.integral_price(&lifted_path);
            let b = gb.integral_iterated(&lifted_path);
            a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect()
        };
        for i in 0..p.len() {
            assert!(
                (original[i] - lifted[i]).abs() <= 1e-12,
                "node {i}: {} vs {}",
                original[i],
                lifted[i]
            );
        }
        // round trip: lowering gives back integrals on the original space
        let lowered = gb.lower();
        let back = integral_ss(&lowered, &p, &qv).unwrap();
        let direct = integral_ss(&g, &p, &qv).unwrap();
        assert_eq!(back.values(), direct.values());
    }

    #[test]
    fn transfer_trivial_cases() {
        let p = linear_path(64);
        let qv = qv_of(&p);
        let lifted_path = lift(p.clone(), qv.qv.clone()).unwrap();
        let (zh, zg) = transfer_strategy_up(&SimpleStrategy::zero(), &SimpleStrategy::zero());
        assert!(zh
            .integral_price(&lifted_path)
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert!(zg
            .integral_iterated(&lifted_path)
            .values()
            .iter()
            .all(|&v| v == 0.0));

        let (one, _) = transfer_strategy_up(&SimpleStrategy::buy_and_hold(1.0), &SimpleStrategy::zero());
        let lifted = one.integral_price(&lifted_path).last();
        assert!((lifted - (p.last() - p.first())).abs() <= 1e-13);
    }
}
