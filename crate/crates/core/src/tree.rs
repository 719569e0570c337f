//! Finite recombining trinomial trees, martingale transition measures on
//! them, and projection of tree paths into lifted-path form.
//!
//! The tree stores increment geometry only; conditional variances (and with
//! them the qv coordinate of projected paths) belong to the measure. The qv
//! of a projected path is the predictable compensator: the running sum of
//! conditional variances of the visited nodes.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::{lift, DiscretePath, LiftedPath, TimeGrid};
use crate::prediction::{contains, PredictionSetSpec};

/// One tree node: a price and the child edges `(child index, increment)`.
#[derive(Debug, Clone, Serialize)]
pub struct TreeNode {
    pub price: f64,
    /// Children in price-ascending order; empty at the last level.
    pub children: Vec<(usize, f64)>,
}

/// Recombining trinomial lattice over a uniform grid on `[0, T]`.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioTree {
    pub depth: usize,
    pub dt: f64,
    pub horizon: f64,
    pub s0: f64,
    pub multiplicative: bool,
    /// `levels[i]` holds the nodes at time `i * dt`, price-ascending.
    pub levels: Vec<Vec<TreeNode>>,
    #[serde(skip)]
    grid: Arc<TimeGrid>,
}

/// Enumeration guard for path sets (`3^depth` paths on a trinomial).
pub const PATH_ENUM_GUARD: u128 = 1_000_000;
/// Enumeration guard for gridded measure families.
pub const MEASURE_ENUM_GUARD: u128 = 100_000;
/// Tolerance on the martingale identity of a measure.
pub const MARTINGALE_EPS: f64 = 1e-12;

/// Build a recombining trinomial whose achievable per-node conditional
/// variances span `[0, sigma_hi^2 * dt * scale]`, `scale = 1` (additive with
/// increments `{-u, 0, +u}`) or `price^2` (multiplicative with factors
/// `{1/u, 1, u}`). With `sigma_hi = 0` the geometry falls back to unit
/// volatility; only the lazy measure is then admissible for the band.
pub fn build_trinomial(
    s0: f64,
    sigma_lo: f64,
    sigma_hi: f64,
    depth: usize,
    horizon: f64,
    multiplicative: bool,
) -> Result<ScenarioTree> {
    if !(0.0 <= sigma_lo && sigma_lo <= sigma_hi && sigma_hi.is_finite()) {
        return Err(Error::TreeConstruction(format!(
            "need 0 <= sigma_lo <= sigma_hi < inf, got [{sigma_lo}, {sigma_hi}]"
        )));
    }
    if depth == 0 || !(horizon > 0.0) {
        return Err(Error::TreeConstruction(format!(
            "need depth >= 1 and horizon > 0, got depth={depth}, T={horizon}"
        )));
    }
    if multiplicative && !(s0 > 0.0) {
        return Err(Error::TreeConstruction(format!(
            "multiplicative tree needs s0 > 0, got {s0}"
        )));
    }
    let dt = horizon / depth as f64;
    let sigma_geom = if sigma_hi > 0.0 { sigma_hi } else { 1.0 };

    let up_step = if multiplicative {
        // up factor solving (u - 1)(1 - 1/u) = sigma^2 dt, so the top of the
        // variance band is exactly achievable
        let v = sigma_geom * sigma_geom * dt;
        (2.0 + v + (v * v + 4.0 * v).sqrt()) / 2.0
    } else {
        sigma_geom * dt.sqrt()
    };
    let price_at = |j: i64| -> f64 {
        if multiplicative {
            s0 * up_step.powi(j as i32)
        } else {
            s0 + j as f64 * up_step
        }
    };

    let mut levels = Vec::with_capacity(depth + 1);
    for i in 0..=depth {
        let width = 2 * i + 1;
        let mut nodes = Vec::with_capacity(width);
        for k in 0..width {
            let j = k as i64 - i as i64;
            let price = price_at(j);
            let children = if i < depth {
                // price-ascending children shifted by the level offset
                (0..3)
                    .map(|b| {
                        let child_idx = k + b;
                        let child_j = j + b as i64 - 1;
                        (child_idx, price_at(child_j) - price)
                    })
                    .collect()
            } else {
                Vec::new()
            };
            nodes.push(TreeNode { price, children });
        }
        levels.push(nodes);
    }
    let grid = Arc::new(TimeGrid::uniform(horizon, depth)?);
    Ok(ScenarioTree {
        depth,
        dt,
        horizon,
        s0,
        multiplicative,
        levels,
        grid,
    })
}

impl ScenarioTree {
    pub fn node(&self, level: usize, idx: usize) -> &TreeNode {
        &self.levels[level][idx]
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn num_paths(&self) -> u128 {
        3u128.saturating_pow(self.depth as u32)
    }

    /// Largest conditional variance any martingale measure can realize at a
    /// node: `delta_up * |delta_down|` (zero-mid trinomial).
    pub fn max_variance(&self, level: usize, idx: usize) -> f64 {
        let ch = &self.levels[level][idx].children;
        if ch.is_empty() {
            return 0.0;
        }
        let down = ch[0].1;
        let up = ch[ch.len() - 1].1;
        up * (-down)
    }

    /// Band of admissible conditional variances at a node for a volatility
    /// band `[sigma_lo, sigma_hi]`; errors when the band is unachievable.
    pub fn variance_band(
        &self,
        level: usize,
        idx: usize,
        sigma_lo: f64,
        sigma_hi: f64,
    ) -> Result<(f64, f64)> {
        let scale = if self.multiplicative {
            let s = self.levels[level][idx].price;
            s * s
        } else {
            1.0
        };
        let lo = sigma_lo * sigma_lo * self.dt * scale;
        let hi = sigma_hi * sigma_hi * self.dt * scale;
        let max = self.max_variance(level, idx);
        if lo > max * (1.0 + 1e-9) {
            return Err(Error::TreeConstruction(format!(
                "variance band [{lo:.6e}, {hi:.6e}] unachievable at node ({level}, {idx}); \
                 feasible band is [0, {max:.6e}]"
            )));
        }
        Ok((lo.min(max), hi.min(max)))
    }

    /// Enumerate every root-to-leaf child-choice sequence in lexicographic
    /// order, with a guard on the path count.
    pub fn all_paths(&self) -> Result<Vec<TreePathIndex>> {
        if self.num_paths() > PATH_ENUM_GUARD {
            return Err(Error::GuardExceeded(format!(
                "3^{} paths exceed the enumeration guard {PATH_ENUM_GUARD}",
                self.depth
            )));
        }
        let mut out = Vec::with_capacity(self.num_paths() as usize);
        let mut choices = vec![0usize; self.depth];
        loop {
            out.push(TreePathIndex(choices.clone()));
            let mut k = self.depth;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                if choices[k] < 2 {
                    choices[k] += 1;
                    choices[k + 1..].iter_mut().for_each(|c| *c = 0);
                    break;
                }
            }
        }
    }

    /// Tree and node layout as JSON (level-major, price-ascending).
    pub fn export(&self) -> serde_json::Value {
        serde_json::json!({
            "depth": self.depth,
            "dt": self.dt,
            "horizon": self.horizon,
            "s0": self.s0,
            "multiplicative": self.multiplicative,
            "levels": self.levels.iter().map(|nodes| {
                nodes.iter().map(|n| serde_json::json!({
                    "price": n.price,
                    "children": n.children,
                })).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }
}

/// Child choices from the root to a leaf (0 = down, 1 = mid, 2 = up).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreePathIndex(pub Vec<usize>);

impl TreePathIndex {
    fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        if self.0.len() != tree.depth {
            return Err(Error::InvalidPathIndex(format!(
                "expected {} choices, got {}",
                tree.depth,
                self.0.len()
            )));
        }
        if let Some(&c) = self.0.iter().find(|&&c| c > 2) {
            return Err(Error::InvalidPathIndex(format!(
                "child choice {c} out of range on a trinomial"
            )));
        }
        Ok(())
    }

    /// Node indices visited per level, root included.
    pub fn node_indices(&self, tree: &ScenarioTree) -> Result<Vec<usize>> {
        self.validate(tree)?;
        let mut idx = 0usize;
        let mut out = vec![0usize];
        for (level, &c) in self.0.iter().enumerate() {
            idx = tree.levels[level][idx].children[c].0;
            out.push(idx);
        }
        Ok(out)
    }
}

/// Per-node transition probabilities over the children of every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMeasure {
    /// `probs[level][node][child]`, aligned with the tree's child order.
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl TreeMeasure {
    /// Closed-form martingale trinomial solve hitting a target conditional
    /// variance at every node.
    pub fn from_node_variances(
        tree: &ScenarioTree,
        variance: impl Fn(usize, usize) -> f64,
    ) -> Result<TreeMeasure> {
        let mut probs = Vec::with_capacity(tree.depth);
        for (level, nodes) in tree.levels.iter().enumerate().take(tree.depth) {
            let mut level_probs = Vec::with_capacity(nodes.len());
            for (idx, node) in nodes.iter().enumerate() {
                let v = variance(level, idx);
                let max = tree.max_variance(level, idx);
                if !(v >= 0.0) || v > max * (1.0 + 1e-9) {
                    return Err(Error::TreeConstruction(format!(
                        "target variance {v:.6e} infeasible at node ({level}, {idx}); \
                         feasible band is [0, {max:.6e}]"
                    )));
                }
                let down = node.children[0].1;
                let up = node.children[2].1;
                // martingale: p_up * up + p_down * down = 0 with variance v
                let a = v / (up - down);
                let p_up = a / up;
                let p_down = a / (-down);
                let p_mid = (1.0 - p_up - p_down).max(0.0);
                level_probs.push(vec![p_down, p_mid, p_up]);
            }
            probs.push(level_probs);
        }
        Ok(TreeMeasure { probs })
    }

    /// All mass on the zero increment at every node.
    pub fn lazy(tree: &ScenarioTree) -> TreeMeasure {
        TreeMeasure {
            probs: tree
                .levels
                .iter()
                .take(tree.depth)
                .map(|nodes| nodes.iter().map(|_| vec![0.0, 1.0, 0.0]).collect())
                .collect(),
        }
    }

    pub fn node_probs(&self, level: usize, idx: usize) -> &[f64] {
        &self.probs[level][idx]
    }

    /// Conditional variance realized at a node.
    pub fn node_variance(&self, tree: &ScenarioTree, level: usize, idx: usize) -> f64 {
        tree.levels[level][idx]
            .children
            .iter()
            .zip(&self.probs[level][idx])
            .map(|(&(_, inc), &p)| p * inc * inc)
            .sum()
    }

    /// Probability of the full path under the measure.
    pub fn path_probability(&self, tree: &ScenarioTree, path: &TreePathIndex) -> Result<f64> {
        path.validate(tree)?;
        let mut idx = 0usize;
        let mut p = 1.0;
        for (level, &c) in path.0.iter().enumerate() {
            p *= self.probs[level][idx][c];
            idx = tree.levels[level][idx].children[c].0;
        }
        Ok(p)
    }

    /// Check normalization and the martingale identity at every node.
    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        for (level, nodes) in tree.levels.iter().enumerate().take(tree.depth) {
            for (idx, node) in nodes.iter().enumerate() {
                let p = &self.probs[level][idx];
                if p.len() != node.children.len() {
                    return Err(Error::TreeConstruction(format!(
                        "probability arity mismatch at node ({level}, {idx})"
                    )));
                }
                if p.iter().any(|&x| !(-MARTINGALE_EPS..=1.0 + MARTINGALE_EPS).contains(&x)) {
                    return Err(Error::TreeConstruction(format!(
                        "probabilities out of [0,1] at node ({level}, {idx}): {p:?}"
                    )));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::TreeConstruction(format!(
                        "probabilities sum to {total} at node ({level}, {idx})"
                    )));
                }
                let drift: f64 = node
                    .children
                    .iter()
                    .zip(p)
                    .map(|(&(_, inc), &q)| q * inc)
                    .sum();
                if drift.abs() > MARTINGALE_EPS {
                    return Err(Error::TreeConstruction(format!(
                        "martingale identity violated at node ({level}, {idx}): drift {drift:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn export(&self) -> serde_json::Value {
        serde_json::json!({ "probs": self.probs })
    }
}

/// Grid each node's conditional variance over the admissible band with
/// `grid_count` points and return one measure per assignment
/// (`grid_count^(nodes with children)` measures; `grid_count = 1` uses the
/// band midpoint).
pub fn measures_for_band(
    tree: &ScenarioTree,
    sigma_lo: f64,
    sigma_hi: f64,
    grid_count: usize,
) -> Result<Vec<TreeMeasure>> {
    if grid_count == 0 {
        return Err(Error::Contract("grid_count must be at least 1".into()));
    }
    // per-node variance levels, node-major in (level, price) order
    let mut node_levels: Vec<Vec<f64>> = Vec::new();
    for level in 0..tree.depth {
        for idx in 0..tree.levels[level].len() {
            let (lo, hi) = tree.variance_band(level, idx, sigma_lo, sigma_hi)?;
            let vs = if grid_count == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..grid_count)
                    .map(|k| lo + (hi - lo) * k as f64 / (grid_count - 1) as f64)
                    .collect()
            };
            node_levels.push(vs);
        }
    }
    let count = node_levels
        .iter()
        .try_fold(1u128, |acc, vs| acc.checked_mul(vs.len() as u128))
        .unwrap_or(u128::MAX);
    if count > MEASURE_ENUM_GUARD {
        return Err(Error::GuardExceeded(format!(
            "{count} measures exceed the enumeration guard {MEASURE_ENUM_GUARD}"
        )));
    }

    let mut flat_offsets = Vec::with_capacity(tree.depth);
    let mut offset = 0usize;
    for level in 0..tree.depth {
        flat_offsets.push(offset);
        offset += tree.levels[level].len();
    }

    let mut measures = Vec::with_capacity(count as usize);
    let mut pick = vec![0usize; node_levels.len()];
    loop {
        let measure = TreeMeasure::from_node_variances(tree, |level, idx| {
            let flat = flat_offsets[level] + idx;
            node_levels[flat][pick[flat]]
        })?;
        measures.push(measure);
        let mut k = node_levels.len();
        loop {
            if k == 0 {
                return Ok(measures);
            }
            k -= 1;
            if pick[k] + 1 < node_levels[k].len() {
                pick[k] += 1;
                pick[k + 1..].iter_mut().for_each(|c| *c = 0);
                break;
            }
        }
    }
}

/// Project a tree path under a measure: piecewise-linear prices on the
/// uniform grid, qv the running sum of conditional variances of the visited
/// nodes.
pub fn project_path(
    tree: &ScenarioTree,
    path: &TreePathIndex,
    measure: &TreeMeasure,
) -> Result<LiftedPath> {
    let nodes = path.node_indices(tree)?;
    let mut prices = Vec::with_capacity(tree.depth + 1);
    let mut qv = Vec::with_capacity(tree.depth + 1);
    qv.push(0.0);
    for (level, &idx) in nodes.iter().enumerate() {
        prices.push(tree.levels[level][idx].price);
        if level < tree.depth {
            qv.push(qv[level] + measure.node_variance(tree, level, idx));
        }
    }
    let price = DiscretePath::new(Arc::clone(&tree.grid), prices)?;
    let qv = DiscretePath::new(Arc::clone(&tree.grid), qv)?;
    lift(price, qv)
}

/// Indices of all tree paths whose projected lift passes membership.
pub fn filter_paths(
    tree: &ScenarioTree,
    measure: &TreeMeasure,
    spec: &PredictionSetSpec,
    tol: f64,
) -> Result<Vec<TreePathIndex>> {
    let mut retained = Vec::new();
    for path in tree.all_paths()? {
        let lp = project_path(tree, &path, measure)?;
        if contains(spec, &lp, tol)?.member {
            retained.push(path);
        }
    }
    Ok(retained)
}

/// Claim evaluated on a projected lifted path, capped where the variant
/// carries a cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PayoffSpec {
    EuropeanCall { strike: f64 },
    EuropeanPut { strike: f64 },
    /// Pays 1 when the terminal price is at or above the strike.
    Digital { strike: f64 },
    /// Pays `cap` off the prediction set, 0 on it: the capped stand-in for
    /// indicator claims with an infinite payoff outside the set.
    IndicatorOfSet {
        spec: PredictionSetSpec,
        cap: f64,
        tol: f64,
    },
    /// Registered path functional by name.
    Custom { name: String },
}

/// Terminal-node payoffs admit lattice recursion without unrolling.
#[derive(Debug, Clone, Copy)]
pub enum TerminalPayoff {
    Call(f64),
    Put(f64),
    Digital(f64),
    /// `S_T`
    TerminalPrice,
    /// `|S_T - S_0|`
    AbsDeviation,
    /// `-|S_T - S_0|`
    NegAbsDeviation,
    ConstantOne,
}

impl TerminalPayoff {
    pub fn eval(&self, s0: f64, s_terminal: f64) -> f64 {
        match *self {
            TerminalPayoff::Call(k) => (s_terminal - k).max(0.0),
            TerminalPayoff::Put(k) => (k - s_terminal).max(0.0),
            TerminalPayoff::Digital(k) => {
                if s_terminal >= k {
                    1.0
                } else {
                    0.0
                }
            }
            TerminalPayoff::TerminalPrice => s_terminal,
            TerminalPayoff::AbsDeviation => (s_terminal - s0).abs(),
            TerminalPayoff::NegAbsDeviation => -(s_terminal - s0).abs(),
            TerminalPayoff::ConstantOne => 1.0,
        }
    }
}

impl PayoffSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PayoffSpec::EuropeanCall { strike }
            | PayoffSpec::EuropeanPut { strike }
            | PayoffSpec::Digital { strike } => {
                if !(*strike >= 0.0) {
                    return Err(Error::Contract(format!(
                        "strike must be nonnegative, got {strike}"
                    )));
                }
                Ok(())
            }
            PayoffSpec::IndicatorOfSet { spec, cap, tol } => {
                if !(*cap > 0.0 && cap.is_finite()) {
                    return Err(Error::Contract(format!(
                        "cap must be positive and finite, got {cap}"
                    )));
                }
                if !(*tol > 0.0) {
                    return Err(Error::Contract(format!("tol must be positive, got {tol}")));
                }
                spec.validate()
            }
            PayoffSpec::Custom { name } => {
                self.terminal().map(|_| ()).ok_or_else(|| {
                    Error::UnknownName(format!("custom payoff '{name}' is not registered"))
                })
            }
        }
    }

    /// Terminal-node form when the payoff depends on `(S_0, S_T)` alone.
    pub fn terminal(&self) -> Option<TerminalPayoff> {
        match self {
            PayoffSpec::EuropeanCall { strike } => Some(TerminalPayoff::Call(*strike)),
            PayoffSpec::EuropeanPut { strike } => Some(TerminalPayoff::Put(*strike)),
            PayoffSpec::Digital { strike } => Some(TerminalPayoff::Digital(*strike)),
            PayoffSpec::IndicatorOfSet { .. } => None,
            PayoffSpec::Custom { name } => match name.as_str() {
                "terminal_price" => Some(TerminalPayoff::TerminalPrice),
                "abs_deviation" => Some(TerminalPayoff::AbsDeviation),
                "neg_abs_deviation" => Some(TerminalPayoff::NegAbsDeviation),
                "constant_one" => Some(TerminalPayoff::ConstantOne),
                _ => None,
            },
        }
    }

    /// Evaluate on a projected lifted path.
    pub fn eval(&self, lp: &LiftedPath) -> Result<f64> {
        if let Some(t) = self.terminal() {
            return Ok(t.eval(lp.price.first(), lp.price.last()));
        }
        match self {
            PayoffSpec::IndicatorOfSet { spec, cap, tol } => {
                if contains(spec, lp, *tol)?.member {
                    Ok(0.0)
                } else {
                    Ok(*cap)
                }
            }
            PayoffSpec::Custom { name } => Err(Error::UnknownName(format!(
                "custom payoff '{name}' is not registered"
            ))),
            _ => unreachable!("terminal payoffs handled above"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_tree(depth: usize, multiplicative: bool) -> ScenarioTree {
        build_trinomial(1.0, 0.1, 0.3, depth, 1.0, multiplicative).unwrap()
    }

    #[test]
    fn construction_validates_inputs() {
        assert!(build_trinomial(1.0, 0.3, 0.1, 2, 1.0, false).is_err());
        assert!(build_trinomial(1.0, 0.0, 0.2, 0, 1.0, false).is_err());
        assert!(build_trinomial(-1.0, 0.0, 0.2, 2, 1.0, true).is_err());
        assert!(build_trinomial(1.0, 0.0, 0.2, 2, 0.0, false).is_err());
    }

    #[test]
    fn level_sizes_and_child_geometry() {
        let tree = band_tree(3, false);
        for (i, nodes) in tree.levels.iter().enumerate() {
            assert_eq!(nodes.len(), 2 * i + 1);
        }
        // children carry distinct, price-ascending increments
        for level in 0..tree.depth {
            for node in &tree.levels[level] {
                assert_eq!(node.children.len(), 3);
                assert!(node.children[0].1 < node.children[1].1);
                assert!(node.children[1].1 < node.children[2].1);
                assert_eq!(node.children[1].1, 0.0);
            }
        }
    }

    #[test]
    fn multiplicative_tree_prices_stay_positive() {
        let tree = band_tree(6, true);
        assert!(tree
            .levels
            .iter()
            .all(|nodes| nodes.iter().all(|n| n.price > 0.0)));
    }

    #[test]
    fn variance_band_top_is_exactly_achievable() {
        for multiplicative in [false, true] {
            let tree = band_tree(4, multiplicative);
            for level in 0..tree.depth {
                for idx in 0..tree.levels[level].len() {
                    let (_, hi) = tree.variance_band(level, idx, 0.1, 0.3).unwrap();
                    let max = tree.max_variance(level, idx);
                    assert!(
                        ((hi - max) / max).abs() < 1e-12,
                        "band top {hi} vs max {max}"
                    );
                }
            }
        }
    }

    #[test]
    fn unique_variance_measure_when_band_collapses() {
        // sigma_lo = sigma_hi: one martingale trinomial measure per node,
        // from the three linear equations (sum, mean, variance)
        let tree = build_trinomial(1.0, 0.2, 0.2, 3, 1.0, false).unwrap();
        let ms = measures_for_band(&tree, 0.2, 0.2, 5).unwrap();
        assert_eq!(ms.len(), 1);
        let m = &ms[0];
        m.validate(&tree).unwrap();
        let dt = tree.dt;
        for level in 0..tree.depth {
            for idx in 0..tree.levels[level].len() {
                let v = m.node_variance(&tree, level, idx);
                assert!((v - 0.04 * dt).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_volatility_forces_lazy_measure() {
        let tree = build_trinomial(1.0, 0.0, 0.0, 2, 1.0, false).unwrap();
        let ms = measures_for_band(&tree, 0.0, 0.0, 3).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0], TreeMeasure::lazy(&tree));
    }

    #[test]
    fn one_step_band_measures_parametrized_by_variance() {
        // depth 1, additive, u = 1 (sigma_hi = 1, T = 1): variance q in [0, 1]
        let tree = build_trinomial(0.0, 0.0, 1.0, 1, 1.0, false).unwrap();
        let ms = measures_for_band(&tree, 0.0, 1.0, 3).unwrap();
        assert_eq!(ms.len(), 3);
        for (k, m) in ms.iter().enumerate() {
            let q = k as f64 / 2.0;
            let p = m.node_probs(0, 0);
            assert!((p[0] - q / 2.0).abs() < 1e-12);
            assert!((p[1] - (1.0 - q)).abs() < 1e-12);
            assert!((p[2] - q / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measure_family_counts_assignments() {
        let tree = band_tree(2, false);
        // nodes with children: 1 + 3
        let ms = measures_for_band(&tree, 0.1, 0.3, 2).unwrap();
        assert_eq!(ms.len(), 16);
        for m in &ms {
            m.validate(&tree).unwrap();
        }
    }

    #[test]
    fn martingale_identity_holds_everywhere() {
        let tree = band_tree(3, true);
        for m in measures_for_band(&tree, 0.1, 0.3, 2).unwrap() {
            for level in 0..tree.depth {
                for (idx, node) in tree.levels[level].iter().enumerate() {
                    let drift: f64 = node
                        .children
                        .iter()
                        .zip(m.node_probs(level, idx))
                        .map(|(&(_, inc), &p)| p * inc)
                        .sum();
                    assert!(drift.abs() <= MARTINGALE_EPS);
                }
            }
        }
    }

    #[test]
    fn project_path_compensator_examples() {
        // depth 1, up move under the (1/2, 0, 1/2) measure with u = 1
        let tree = build_trinomial(0.0, 0.0, 1.0, 1, 1.0, false).unwrap();
        let m = TreeMeasure::from_node_variances(&tree, |_, _| 1.0).unwrap();
        let up = project_path(&tree, &TreePathIndex(vec![2]), &m).unwrap();
        assert_eq!(up.price.values(), &[0.0, 1.0]);
        assert_eq!(up.qv.values(), &[0.0, 1.0]);

        // any path under the lazy measure carries zero qv
        let lazy = TreeMeasure::lazy(&tree);
        let path = project_path(&tree, &TreePathIndex(vec![0]), &lazy).unwrap();
        assert_eq!(path.qv.values(), &[0.0, 0.0]);

        // all-mid path: constant price, qv accumulates visited variances
        let mid = project_path(&tree, &TreePathIndex(vec![1]), &m).unwrap();
        assert_eq!(mid.price.values(), &[0.0, 0.0]);
        assert_eq!(mid.qv.values(), &[0.0, 1.0]);
    }

    #[test]
    fn compensator_consistency_exhaustive() {
        // E[S_N^2 - S_0^2] = E[qv_N] by martingale telescoping
        for multiplicative in [false, true] {
            let tree = band_tree(3, multiplicative);
            for m in measures_for_band(&tree, 0.1, 0.3, 2).unwrap().iter().take(8) {
                let mut lhs = 0.0;
                let mut rhs = 0.0;
                for path in tree.all_paths().unwrap() {
                    let p = m.path_probability(&tree, &path).unwrap();
                    if p == 0.0 {
                        continue;
                    }
                    let lp = project_path(&tree, &path, m).unwrap();
                    lhs += p * (lp.price.last().powi(2) - lp.price.first().powi(2));
                    rhs += p * lp.qv.last();
                }
                assert!(
                    (lhs - rhs).abs() <= 1e-10,
                    "compensator mismatch: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn measure_transfer_round_trip_exhaustive() {
        // push the path distribution through projection, keep only the price
        // component, re-derive qv from the conditional variances of the nodes
        // the price path visits: the lifted distribution is unchanged
        let tree = band_tree(3, false);
        let ms = measures_for_band(&tree, 0.1, 0.3, 2).unwrap();
        let m = &ms[7];
        for path in tree.all_paths().unwrap() {
            let direct = project_path(&tree, &path, m).unwrap();
            // recover child choices from the price component alone
            let nodes = path.node_indices(&tree).unwrap();
            let mut rederived = vec![0.0];
            for (level, &idx) in nodes.iter().take(tree.depth).enumerate() {
                rederived.push(rederived[level] + m.node_variance(&tree, level, idx));
            }
            assert_eq!(direct.qv.values(), &rederived[..]);
        }
    }

    #[test]
    fn filter_paths_band_spec_retains_everything() {
        let tree = band_tree(3, false);
        let ms = measures_for_band(&tree, 0.1, 0.3, 2).unwrap();
        let spec = PredictionSetSpec::g_expectation_const(0.1, 0.3);
        for m in ms.iter().take(4) {
            let retained = filter_paths(&tree, m, &spec, 1e-9).unwrap();
            assert_eq!(retained.len(), 27);
        }
    }

    #[test]
    fn filter_paths_range_constraint_excludes() {
        // additive tree from 0 with u = 0.6: any down move leaves [0, 1]
        let tree = build_trinomial(0.0, 0.0, 0.6, 2, 1.0, false).unwrap();
        let m = TreeMeasure::from_node_variances(&tree, |l, i| {
            0.5 * tree.max_variance(l, i)
        })
        .unwrap();
        let retained = filter_paths(&tree, &m, &PredictionSetSpec::DualityGap, 1e-9).unwrap();
        // member price paths: sequences staying in [0,1]
        for path in &retained {
            let lp = project_path(&tree, path, &m).unwrap();
            assert!(lp.price.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert!(retained.len() < 9);
        assert!(retained.contains(&TreePathIndex(vec![1, 1])));
        assert!(!retained.contains(&TreePathIndex(vec![0, 1])));
    }

    #[test]
    fn filter_paths_holder_ball_below_tree_slope_is_empty() {
        let tree = band_tree(2, false);
        let m = measures_for_band(&tree, 0.1, 0.3, 1).unwrap().remove(0);
        let spec = PredictionSetSpec::HolderBall {
            alpha: 1.0,
            bound: 1e-6,
        };
        // even the constant path fails: |omega(0)| = 1 exceeds the ball
        let retained = filter_paths(&tree, &m, &spec, 1e-9).unwrap();
        assert!(retained.is_empty());
    }

    #[test]
    fn payoff_evaluation() {
        let tree = band_tree(2, true);
        let m = measures_for_band(&tree, 0.1, 0.3, 1).unwrap().remove(0);
        let up_up = TreePathIndex(vec![2, 2]);
        let lp = project_path(&tree, &up_up, &m).unwrap();
        let s_t = lp.price.last();
        let call = PayoffSpec::EuropeanCall { strike: 1.0 };
        assert!((call.eval(&lp).unwrap() - (s_t - 1.0).max(0.0)).abs() < 1e-15);
        let put = PayoffSpec::EuropeanPut { strike: 1.0 };
        assert_eq!(put.eval(&lp).unwrap(), 0.0);
        let digital = PayoffSpec::Digital { strike: 1.0 };
        assert_eq!(digital.eval(&lp).unwrap(), 1.0);
    }

    #[test]
    fn indicator_payoff_realizes_capped_nonzero_indicator() {
        // cap * 1{omega != 0} via a degenerate Hoelder ball around 0
        let tree = build_trinomial(0.0, 0.0, 0.6, 2, 1.0, false).unwrap();
        let m = TreeMeasure::lazy(&tree);
        let payoff = PayoffSpec::IndicatorOfSet {
            spec: PredictionSetSpec::HolderBall {
                alpha: 1.0,
                bound: 0.0,
            },
            cap: 100.0,
            tol: 1e-9,
        };
        let zero = project_path(&tree, &TreePathIndex(vec![1, 1]), &m).unwrap();
        assert_eq!(payoff.eval(&zero).unwrap(), 0.0);
        let moved = project_path(&tree, &TreePathIndex(vec![2, 1]), &m).unwrap();
        assert_eq!(payoff.eval(&moved).unwrap(), 100.0);
    }

    #[test]
    fn path_index_validation() {
        let tree = band_tree(2, false);
        assert!(TreePathIndex(vec![0]).node_indices(&tree).is_err());
        assert!(TreePathIndex(vec![0, 3]).node_indices(&tree).is_err());
        let idx = TreePathIndex(vec![2, 2]).node_indices(&tree).unwrap();
        assert_eq!(idx, vec![0, 2, 4]);
    }

    #[test]
    fn enumeration_guard_fires() {
        let tree = band_tree(14, false);
        assert!(matches!(tree.all_paths(), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn tree_export_is_level_major() {
        let tree = band_tree(1, false);
        let j = tree.export();
        assert_eq!(j["levels"].as_array().unwrap().len(), 2);
        assert_eq!(j["levels"][0].as_array().unwrap().len(), 1);
        assert_eq!(j["levels"][1].as_array().unwrap().len(), 3);
    }
}
