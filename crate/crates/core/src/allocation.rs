//! Allocation rules between a source and a target cumulative measure: the
//! forward balancing scan, a bulk evaluator for querying many start points,
//! inverse local time, and the structural checks (balancing, shift
//! equivariance, right stability, minimality).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::CumulativeMeasure;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BalanceResult {
    /// Matched at grid index `at`.
    Matched { at: i64 },
    /// No match inside the available window; `horizon` is the last index
    /// inspected.
    Censored { horizon: i64 },
}

impl BalanceResult {
    pub fn matched_at(&self) -> Option<i64> {
        match self {
            BalanceResult::Matched { at } => Some(*at),
            BalanceResult::Censored { .. } => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, BalanceResult::Censored { .. })
    }
}

fn check_same_grid(xi: &CumulativeMeasure, eta: &CumulativeMeasure) -> Result<()> {
    if xi.same_grid(eta) {
        Ok(())
    } else {
        Err(Error::GridMismatch("source and target live on different grids".into()))
    }
}

/// Forward balancing scan from start index `s`: the first `j > s` at which
/// the source mass on `(s, j]` is covered by target mass, up to `tol`.
///
/// With `tol = 0` the match point is the first `j` where
/// `xi(s, j] - eta(s, j] <= 0`, except that when the discrepancy never went
/// positive some target mass must have accrued first; this keeps a start
/// point carrying no source mass from matching trivially at `s + 1`.
pub fn balance_forward(
    xi: &CumulativeMeasure,
    eta: &CumulativeMeasure,
    s: i64,
    tol: f64,
) -> Result<BalanceResult> {
    check_same_grid(xi, eta)?;
    if tol < 0.0 {
        return Err(Error::InvalidParameter("tol must be nonnegative".into()));
    }
    let (lo, hi) = xi.window();
    if s < lo || s > hi {
        return Err(Error::OutOfWindow { index: s, lo, hi });
    }
    let xi_s = xi.cum_at(s);
    let eta_s = eta.cum_at(s);
    let mut went_positive = false;
    for j in (s + 1)..=hi {
        let g = (xi.cum_at(j) - xi_s) - (eta.cum_at(j) - eta_s);
        if g > tol {
            went_positive = true;
        } else if went_positive || eta.cum_at(j) - eta_s > tol {
            return Ok(BalanceResult::Matched { at: j });
        }
    }
    Ok(BalanceResult::Censored { horizon: hi })
}

/// Signed running discrepancy `g(j) = xi(s, j] - eta(s, j]` of a balance scan,
/// exposed for diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct ImbalanceFunction {
    pub start: i64,
    pub values: Vec<f64>,
}

impl ImbalanceFunction {
    pub fn compute(xi: &CumulativeMeasure, eta: &CumulativeMeasure, s: i64) -> Result<Self> {
        check_same_grid(xi, eta)?;
        let (lo, hi) = xi.window();
        if s < lo || s > hi {
            return Err(Error::OutOfWindow { index: s, lo, hi });
        }
        let xi_s = xi.cum_at(s);
        let eta_s = eta.cum_at(s);
        let values = ((s + 1)..=hi)
            .map(|j| (xi.cum_at(j) - xi_s) - (eta.cum_at(j) - eta_s))
            .collect();
        Ok(ImbalanceFunction { start: s, values })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Iterative segment tree over f64 values supporting "first index >= from
/// whose value passes a predicate on the node aggregate" in O(log n).
struct RangeTree {
    n: usize,
    tree: Vec<f64>,
    /// True for a max tree (queries use `>`), false for a min tree (`<=`).
    is_max: bool,
}

impl RangeTree {
    fn build(values: &[f64], is_max: bool) -> RangeTree {
        let n = values.len();
        let pad = if is_max { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut tree = vec![pad; 2 * n.max(1)];
        tree[n..n + values.len()].copy_from_slice(values);
        for i in (1..n).rev() {
            tree[i] = if is_max {
                tree[2 * i].max(tree[2 * i + 1])
            } else {
                tree[2 * i].min(tree[2 * i + 1])
            };
        }
        RangeTree { n, tree, is_max }
    }

    fn hit(&self, node: usize, threshold: f64) -> bool {
        if self.is_max {
            self.tree[node] > threshold
        } else {
            self.tree[node] <= threshold
        }
    }

    /// First position `>= from` whose value satisfies the tree's predicate
    /// against `threshold` (`> threshold` for max trees, `<= threshold` for
    /// min trees).
    fn first_hit(&self, from: usize, threshold: f64) -> Option<usize> {
        if from >= self.n {
            return None;
        }
        // Decompose [from, n) into canonical nodes ordered left to right,
        // then descend into the first qualifying one.
        let mut lo = from + self.n;
        let mut hi = self.n + self.n; // exclusive
        let mut left_side = Vec::new();
        let mut right_side = Vec::new();
        while lo < hi {
            if lo & 1 == 1 {
                left_side.push(lo);
                lo += 1;
            }
            if hi & 1 == 1 {
                hi -= 1;
                right_side.push(hi);
            }
            lo /= 2;
            hi /= 2;
        }
        left_side.extend(right_side.into_iter().rev());
        let mut node = *left_side.iter().find(|&&c| self.hit(c, threshold))?;
        while node < self.n {
            node = if self.hit(2 * node, threshold) { 2 * node } else { 2 * node + 1 };
        }
        Some(node - self.n)
    }
}

/// Bulk evaluator answering the `tol = 0` forward balance query for many
/// start indices against one pair of measures in O(log n) per query.
///
/// For start `k` with `F = cum_xi - cum_eta`, the match point is the first
/// `j >= m` with `F(j) <= F(k)`, where `m` is the smaller of the first index
/// after `k` where `F` exceeds `F(k)` and the first index after `k` where
/// `cum_eta` exceeds `cum_eta(k)`.
pub struct BalanceEvaluator {
    window_lo: i64,
    diff: Vec<f64>,
    eta_cum: Vec<f64>,
    diff_max_tree: RangeTree,
    eta_max_tree: RangeTree,
    diff_min_tree: RangeTree,
}

impl BalanceEvaluator {
    pub fn new(xi: &CumulativeMeasure, eta: &CumulativeMeasure) -> Result<BalanceEvaluator> {
        check_same_grid(xi, eta)?;
        let diff: Vec<f64> = xi
            .cum()
            .iter()
            .zip(eta.cum())
            .map(|(a, b)| a - b)
            .collect();
        let eta_cum = eta.cum().to_vec();
        Ok(BalanceEvaluator {
            window_lo: xi.window().0,
            diff_max_tree: RangeTree::build(&diff, true),
            eta_max_tree: RangeTree::build(&eta_cum, true),
            diff_min_tree: RangeTree::build(&diff, false),
            diff,
            eta_cum,
        })
    }

    fn idx(&self, k: i64) -> usize {
        (k - self.window_lo) as usize
    }

    pub fn window(&self) -> (i64, i64) {
        (self.window_lo, self.window_lo + self.diff.len() as i64 - 1)
    }

    /// Equivalent to `balance_forward(xi, eta, s, 0.0)`.
    pub fn query(&self, s: i64) -> Result<BalanceResult> {
        let (lo, hi) = self.window();
        if s < lo || s > hi {
            return Err(Error::OutOfWindow { index: s, lo, hi });
        }
        let i = self.idx(s);
        let f_s = self.diff[i];
        let eta_s = self.eta_cum[i];
        let exceed = self.diff_max_tree.first_hit(i + 1, f_s);
        let eta_grow = self.eta_max_tree.first_hit(i + 1, eta_s);
        let gate = match (exceed, eta_grow) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => return Ok(BalanceResult::Censored { horizon: hi }),
        };
        match self.diff_min_tree.first_hit(gate, f_s) {
            Some(j) => Ok(BalanceResult::Matched { at: j as i64 + self.window_lo }),
            None => Ok(BalanceResult::Censored { horizon: hi }),
        }
    }
}

/// Inverse local time: smallest grid index `> s` at which `ell` has
/// accumulated strictly more than `r` beyond `cum(s)` (the right endpoint of
/// the `r`-level set when `r >= 0`); for `r < 0` the largest index `< s`
/// whose cumulative does not exceed `cum(s) + r`.
pub fn inverse_from(ell: &CumulativeMeasure, s: i64, r: f64) -> Result<BalanceResult> {
    let (lo, hi) = ell.window();
    if s < lo || s > hi {
        return Err(Error::OutOfWindow { index: s, lo, hi });
    }
    let level = ell.cum_at(s) + r;
    if r >= 0.0 {
        // First strict exceedance; the level-set right endpoint is one before.
        for j in (s + 1)..=hi {
            if ell.cum_at(j) > level {
                return Ok(BalanceResult::Matched { at: j });
            }
        }
        Ok(BalanceResult::Censored { horizon: hi })
    } else {
        for j in (lo..s).rev() {
            if ell.cum_at(j) <= level {
                return Ok(BalanceResult::Matched { at: j });
            }
        }
        Ok(BalanceResult::Censored { horizon: lo })
    }
}

/// Inverse local time from the origin.
pub fn inverse_local_time(ell: &CumulativeMeasure, r: f64) -> Result<BalanceResult> {
    inverse_from(ell, 0, r)
}

#[derive(Clone, Debug, Serialize)]
pub struct AllocationCheck {
    pub queried: usize,
    pub matched: usize,
    pub censored: usize,
    pub max_discrepancy: f64,
}

/// Check the balancing property: for matched start cells, the mass moved onto
/// each target cell should reproduce the target measure. Each source cell is
/// queried at its left edge; the report aggregates the per-cell discrepancy
/// between transported and target mass over the probe range.
pub fn check_balancing(
    xi: &CumulativeMeasure,
    eta: &CumulativeMeasure,
    probe_range: (i64, i64),
) -> Result<AllocationCheck> {
    check_same_grid(xi, eta)?;
    let (lo, hi) = xi.window();
    let (plo, phi) = probe_range;
    if plo < lo || phi > hi || plo > phi {
        return Err(Error::InvalidParameter("probe range outside window".into()));
    }
    let eval = BalanceEvaluator::new(xi, eta)?;
    let mut transported = vec![0.0; (hi - lo) as usize + 1];
    let mut queried = 0;
    let mut matched = 0;
    let mut censored = 0;
    for k in plo..phi {
        let mass = xi.mass(k, k + 1);
        if mass <= 0.0 {
            continue;
        }
        queried += 1;
        match eval.query(k)? {
            BalanceResult::Matched { at } => {
                matched += 1;
                transported[(at - lo) as usize] += mass;
            }
            BalanceResult::Censored { .. } => censored += 1,
        }
    }
    let mut max_disc: f64 = 0.0;
    if censored == 0 && matched > 0 {
        for j in plo..phi {
            let got = transported[(j + 1 - lo) as usize];
            let want = eta.mass(j, j + 1);
            max_disc = max_disc.max((got - want).abs());
        }
    } else {
        max_disc = f64::NAN;
    }
    Ok(AllocationCheck { queried, matched, censored, max_discrepancy: max_disc })
}

/// Relative error between the target mass of the interval
/// `(target.0, target.1]` and the source mass transported into it by the
/// balance rule. Sources anywhere in the window are queried; a censored query
/// would land beyond the window, hence beyond the target interval, and is
/// counted as transporting nowhere. `fault_offset` displaces every landing by
/// that many cells and exists to prove the check can fail.
pub fn balancing_discrepancy(
    xi: &CumulativeMeasure,
    eta: &CumulativeMeasure,
    target: (i64, i64),
    fault_offset: i64,
) -> Result<f64> {
    check_same_grid(xi, eta)?;
    let (lo, hi) = xi.window();
    let (tlo, thi) = target;
    if tlo < lo || thi > hi || tlo >= thi {
        return Err(Error::InvalidParameter("target interval outside window".into()));
    }
    let eval = BalanceEvaluator::new(xi, eta)?;
    let mut transported = 0.0;
    for k in lo..thi {
        let mass = xi.mass(k, k + 1);
        if mass <= 0.0 {
            continue;
        }
        if let BalanceResult::Matched { at } = eval.query(k)? {
            let at = at + fault_offset;
            if at > tlo && at <= thi {
                transported += mass;
            }
        }
    }
    let want = eta.mass(tlo, thi);
    let denom = want.max(transported);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((transported - want).abs() / denom)
}

/// Cell-level transport error: L1 distance between the per-cell transported
/// mass and the per-cell target mass over `(target.0, target.1]`, relative to
/// the target mass of the interval. Far more sensitive than the interval
/// total; in particular a systematic one-cell landing displacement
/// (`fault_offset = 1`) moves every quantum into the wrong cell.
pub fn cellwise_balancing_l1(
    xi: &CumulativeMeasure,
    eta: &CumulativeMeasure,
    target: (i64, i64),
    fault_offset: i64,
) -> Result<f64> {
    check_same_grid(xi, eta)?;
    let (lo, hi) = xi.window();
    let (tlo, thi) = target;
    if tlo < lo || thi > hi || tlo >= thi {
        return Err(Error::InvalidParameter("target interval outside window".into()));
    }
    let eval = BalanceEvaluator::new(xi, eta)?;
    let mut transported = vec![0.0; (thi - tlo) as usize];
    for k in lo..thi {
        let mass = xi.mass(k, k + 1);
        if mass <= 0.0 {
            continue;
        }
        if let BalanceResult::Matched { at } = eval.query(k)? {
            let at = at + fault_offset;
            if at > tlo && at <= thi {
                transported[(at - 1 - tlo) as usize] += mass;
            }
        }
    }
    let want = eta.mass(tlo, thi);
    if want == 0.0 {
        return Ok(0.0);
    }
    let l1: f64 = transported
        .iter()
        .enumerate()
        .map(|(i, got)| {
            let j = tlo + i as i64;
            (got - eta.mass(j, j + 1)).abs()
        })
        .sum();
    Ok(l1 / want)
}

/// Shift equivariance of a matching functional: compare `tau(s) - k` computed
/// on the original window with `tau(s - k)` computed on the window
/// re-indexed by `k`. The functional receives the measures and a start index
/// and must not look outside the window it is given.
pub fn check_equivariance<F>(
    xi: &CumulativeMeasure,
    eta: &CumulativeMeasure,
    offsets: &[i64],
    starts: &[i64],
    tau: F,
) -> Result<bool>
where
    F: Fn(&CumulativeMeasure, &CumulativeMeasure, i64) -> Result<BalanceResult>,
{
    check_same_grid(xi, eta)?;
    let (lo, hi) = xi.window();
    for &k in offsets {
        // Re-index both measures around the new origin k.
        let shift = |m: &CumulativeMeasure| -> Result<CumulativeMeasure> {
            let pivot = m.cum_at(k);
            let cum: Vec<f64> = (lo..=hi).map(|j| m.cum_at(j) - pivot).collect();
            CumulativeMeasure::from_cum(
                m.dt(),
                (k - lo) as usize,
                (hi - k) as usize,
                cum,
            )
        };
        let xi_k = shift(xi)?;
        let eta_k = shift(eta)?;
        for &s in starts {
            if s < lo || s > hi || s - k < lo - k || s - k > hi - k {
                continue;
            }
            let plain = tau(xi, eta, s)?;
            let moved = tau(&xi_k, &eta_k, s - k)?;
            let agree = match (plain, moved) {
                (BalanceResult::Matched { at: a }, BalanceResult::Matched { at: b }) => a - k == b,
                (BalanceResult::Censored { .. }, BalanceResult::Censored { .. }) => true,
                _ => false,
            };
            if !agree {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Right stability: no pair `t < s <= tau(t) < tau(s)` may occur among
/// matched starts, i.e. whenever `s` falls inside the matched interval of an
/// earlier `t`, its own interval must nest inside (`tau(s) <= tau(t)`).
/// The property concerns source-weighted pairs, so starts whose right cell
/// carries no source mass are skipped.
pub fn check_right_stable(
    xi: &CumulativeMeasure,
    eta: &CumulativeMeasure,
    starts: &[i64],
) -> Result<bool> {
    let eval = BalanceEvaluator::new(xi, eta)?;
    let (_, hi) = xi.window();
    let mut matched: Vec<(i64, i64)> = Vec::new();
    for &s in starts {
        if s >= hi || xi.mass(s, s + 1) <= 0.0 {
            continue;
        }
        if let BalanceResult::Matched { at } = eval.query(s)? {
            matched.push((s, at));
        }
    }
    matched.sort_unstable();
    for (i, &(t, tau_t)) in matched.iter().enumerate() {
        for &(s, tau_s) in &matched[i + 1..] {
            // Whenever the cell (s, s+1] sits inside (t, tau(t)], right
            // stability demands tau(s) <= tau(t). The start index stands for
            // its right cell, hence the strict comparison with tau(t).
            if t < s && s < tau_t && tau_s > tau_t {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Minimality probe: no earlier index `j` in `(s, tau(s))` may satisfy the
/// match condition, i.e. the running discrepancy stays positive (or the
/// target has accrued nothing yet) strictly before the match point.
pub fn check_minimal(
    xi: &CumulativeMeasure,
    eta: &CumulativeMeasure,
    starts: &[i64],
) -> Result<bool> {
    for &s in starts {
        if let BalanceResult::Matched { at } = balance_forward(xi, eta, s, 0.0)? {
            let xi_s = xi.cum_at(s);
            let eta_s = eta.cum_at(s);
            let mut went_positive = false;
            for j in (s + 1)..at {
                let g = (xi.cum_at(j) - xi_s) - (eta.cum_at(j) - eta_s);
                if g > 0.0 {
                    went_positive = true;
                } else if went_positive || eta.cum_at(j) - eta_s > 0.0 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn measure(neg: usize, masses: &[f64]) -> CumulativeMeasure {
        CumulativeMeasure::from_cell_masses(1.0, neg, masses.len() - neg, masses).unwrap()
    }

    #[test]
    fn simple_forward_match() {
        // One unit of source mass in cell (0,1], one unit of target in (2,3].
        let xi = measure(0, &[1.0, 0.0, 0.0, 0.0]);
        let eta = measure(0, &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(balance_forward(&xi, &eta, 0, 0.0).unwrap(), BalanceResult::Matched { at: 3 });
    }

    #[test]
    fn identical_measures_match_at_first_mass() {
        let xi = measure(0, &[0.0, 2.0, 0.0, 1.0]);
        assert_eq!(balance_forward(&xi, &xi, 0, 0.0).unwrap(), BalanceResult::Matched { at: 2 });
        assert_eq!(balance_forward(&xi, &xi, 1, 0.0).unwrap(), BalanceResult::Matched { at: 2 });
        // From index 2 the next mass is in cell (3,4].
        assert_eq!(balance_forward(&xi, &xi, 2, 0.0).unwrap(), BalanceResult::Matched { at: 4 });
    }

    #[test]
    fn censored_when_target_lags() {
        let xi = measure(0, &[1.0, 1.0, 1.0]);
        let eta = measure(0, &[0.0, 0.0, 0.5]);
        assert!(balance_forward(&xi, &eta, 0, 0.0).unwrap().is_censored());
    }

    #[test]
    fn no_trivial_match_without_target_mass() {
        // Start point carries no source mass and no target arrives: censored,
        // not an immediate match at s + 1.
        let xi = measure(0, &[0.0, 0.0, 1.0, 0.0]);
        let eta = measure(0, &[0.0, 0.0, 0.0, 0.0]);
        assert!(balance_forward(&xi, &eta, 0, 0.0).unwrap().is_censored());
    }

    #[test]
    fn degenerate_start_matches_once_target_arrives() {
        let xi = measure(0, &[0.0, 0.0, 0.0, 0.0]);
        let eta = measure(0, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(balance_forward(&xi, &eta, 0, 0.0).unwrap(), BalanceResult::Matched { at: 2 });
    }

    #[test]
    fn lifo_nesting_of_two_units() {
        // Source in cells (0,1] and (1,2]; target in (2,3] and (3,4].
        // The later source unit matches first (nested intervals).
        let xi = measure(0, &[1.0, 1.0, 0.0, 0.0]);
        let eta = measure(0, &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(balance_forward(&xi, &eta, 0, 0.0).unwrap(), BalanceResult::Matched { at: 4 });
        assert_eq!(balance_forward(&xi, &eta, 1, 0.0).unwrap(), BalanceResult::Matched { at: 3 });
    }

    #[test]
    fn tolerance_loosens_the_match() {
        let xi = measure(0, &[1.0, 0.0, 0.0]);
        let eta = measure(0, &[0.0, 0.9, 0.1]);
        assert_eq!(balance_forward(&xi, &eta, 0, 0.0).unwrap(), BalanceResult::Matched { at: 3 });
        assert_eq!(balance_forward(&xi, &eta, 0, 0.2).unwrap(), BalanceResult::Matched { at: 2 });
    }

    #[test]
    fn window_errors() {
        let xi = measure(1, &[1.0, 1.0]);
        assert!(balance_forward(&xi, &xi, 5, 0.0).is_err());
        assert!(balance_forward(&xi, &xi, 0, -0.1).is_err());
        let other = measure(0, &[1.0, 1.0]);
        assert!(balance_forward(&xi, &other, 0, 0.0).is_err());
    }

    #[test]
    fn imbalance_function_values() {
        let xi = measure(0, &[1.0, 0.0, 0.0]);
        let eta = measure(0, &[0.0, 0.5, 0.5]);
        let g = ImbalanceFunction::compute(&xi, &eta, 0).unwrap();
        assert_eq!(g.values, vec![1.0, 0.5, 0.0]);
        assert_eq!(g.max(), 1.0);
    }

    #[test]
    fn evaluator_agrees_on_hand_cases() {
        let xi = measure(0, &[1.0, 1.0, 0.0, 0.0]);
        let eta = measure(0, &[0.0, 0.0, 1.0, 1.0]);
        let eval = BalanceEvaluator::new(&xi, &eta).unwrap();
        for s in 0..=4 {
            assert_eq!(
                eval.query(s).unwrap(),
                balance_forward(&xi, &eta, s, 0.0).unwrap(),
                "s = {s}"
            );
        }
    }

    #[test]
    fn inverse_local_time_forward_and_backward() {
        // cum: -2, -1, 0, 0, 1, 1, 2 on indices -2..=4 (dt = 1).
        let ell = measure(2, &[1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        // r = 0.5: first index with cum > 0.5 is 2.
        assert_eq!(inverse_local_time(&ell, 0.5).unwrap(), BalanceResult::Matched { at: 2 });
        // r = 1.0: first strict exceedance of 1 is index 4 (ties at 2, 3 skipped).
        assert_eq!(inverse_local_time(&ell, 1.0).unwrap(), BalanceResult::Matched { at: 4 });
        // r = -0.5: largest t < 0 with cum <= -0.5 is -1.
        assert_eq!(inverse_local_time(&ell, -0.5).unwrap(), BalanceResult::Matched { at: -1 });
        // Unreachable level: censored.
        assert!(inverse_local_time(&ell, 10.0).unwrap().is_censored());
        assert!(inverse_local_time(&ell, -10.0).unwrap().is_censored());
    }

    #[test]
    fn inverse_from_other_start() {
        let ell = measure(0, &[1.0, 0.0, 1.0, 1.0]);
        assert_eq!(inverse_from(&ell, 1, 0.5).unwrap(), BalanceResult::Matched { at: 3 });
        assert_eq!(inverse_from(&ell, 3, -1.5).unwrap(), BalanceResult::Matched { at: 0 });
    }

    #[test]
    fn balancing_check_identity() {
        let xi = measure(2, &[1.0, 0.5, 0.0, 1.0]);
        let report = check_balancing(&xi, &xi, (-2, 2)).unwrap();
        assert_eq!(report.censored, 0);
        assert!(report.max_discrepancy < 1e-12);
    }

    #[test]
    fn balancing_check_shifted_target() {
        // Unit masses shifted by one cell: transport is exact.
        let xi = measure(0, &[1.0, 1.0, 1.0, 0.0]);
        let eta = measure(0, &[0.0, 1.0, 1.0, 1.0]);
        let report = check_balancing(&xi, &eta, (0, 3)).unwrap();
        assert_eq!(report.censored, 0);
        assert!(report.max_discrepancy < 1e-12);
    }

    #[test]
    fn discrepancy_zero_on_exact_transport_and_positive_under_fault() {
        let xi = measure(2, &[1.0, 1.0, 1.0, 1.0, 0.0]);
        let eta = measure(2, &[0.0, 1.0, 1.0, 1.0, 1.0]);
        let clean = balancing_discrepancy(&xi, &eta, (-1, 3), 0).unwrap();
        assert!(clean < 1e-12, "{clean}");
        let faulty = balancing_discrepancy(&xi, &eta, (-1, 3), 1).unwrap();
        assert!(faulty > 0.1, "{faulty}");
    }

    #[test]
    fn equivariance_of_balance_forward() {
        let xi = measure(3, &[1.0, 0.0, 1.0, 0.5, 0.0, 1.0]);
        let eta = measure(3, &[0.0, 1.0, 0.0, 0.0, 1.5, 0.0]);
        let ok = check_equivariance(&xi, &eta, &[-2, 1], &[-1, 0, 1], |a, b, s| {
            balance_forward(a, b, s, 0.0)
        })
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn equivariance_detects_anchored_rule() {
        let xi = measure(3, &[1.0, 0.0, 1.0, 0.5, 0.0, 1.0]);
        let eta = measure(3, &[0.0, 1.0, 0.0, 0.0, 1.5, 0.0]);
        // A rule that keys off the absolute origin is not equivariant.
        let ok = check_equivariance(&xi, &eta, &[1], &[0], |_, _, s| {
            Ok(BalanceResult::Matched { at: if s >= 0 { s + 1 } else { s + 2 } })
        })
        .unwrap();
        assert!(!ok);
    }

    #[test]
    fn right_stability_and_minimality_on_hand_case() {
        let xi = measure(0, &[1.0, 1.0, 0.0, 0.0]);
        let eta = measure(0, &[0.0, 0.0, 1.0, 1.0]);
        assert!(check_right_stable(&xi, &eta, &[0, 1]).unwrap());
        assert!(check_minimal(&xi, &eta, &[0, 1]).unwrap());
    }

    fn masses_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(
            prop_oneof![3 => Just(0.0), 2 => (1u32..5).prop_map(|k| k as f64 * 0.25)],
            4..24,
        )
    }

    proptest! {
        #[test]
        fn evaluator_matches_direct_scan(
            xi_m in masses_strategy(),
            eta_m in masses_strategy(),
            neg_frac in 0.0f64..1.0,
        ) {
            let n = xi_m.len().min(eta_m.len());
            let neg = (neg_frac * n as f64) as usize;
            let xi = measure(neg, &xi_m[..n]);
            let eta = measure(neg, &eta_m[..n]);
            let eval = BalanceEvaluator::new(&xi, &eta).unwrap();
            let (lo, hi) = xi.window();
            for s in lo..=hi {
                prop_assert_eq!(
                    eval.query(s).unwrap(),
                    balance_forward(&xi, &eta, s, 0.0).unwrap(),
                    "s = {}", s
                );
            }
        }

        #[test]
        fn matched_intervals_balance_and_nest(
            xi_m in masses_strategy(),
            eta_m in masses_strategy(),
        ) {
            let n = xi_m.len().min(eta_m.len());
            let xi = measure(0, &xi_m[..n]);
            let eta = measure(0, &eta_m[..n]);
            let starts: Vec<i64> = (0..n as i64).collect();
            prop_assert!(check_right_stable(&xi, &eta, &starts).unwrap());
            prop_assert!(check_minimal(&xi, &eta, &starts).unwrap());
        }

        #[test]
        fn inverse_local_time_brackets_the_level(
            masses in masses_strategy(),
            r in 0.01f64..3.0,
        ) {
            let ell = measure(0, &masses);
            match inverse_local_time(&ell, r).unwrap() {
                BalanceResult::Matched { at } => {
                    prop_assert!(ell.cum_at(at) > r);
                    prop_assert!(ell.cum_at(at - 1) <= r);
                }
                BalanceResult::Censored { horizon } => {
                    prop_assert!(ell.cum_at(horizon) <= r);
                }
            }
        }
    }
}
