//! Exact matching between two locally finite integer point patterns: the
//! forward rule pairs each source point `s` with the smallest `t >= s` at
//! which the closed interval `[s, t]` holds as many target points as source
//! points, with that common count positive. Everything here is integer
//! arithmetic, so results are exact and usable as an oracle for the
//! continuum pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::CumulativeMeasure;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointConfig {
    /// Source points, strictly increasing.
    pub xi: Vec<i64>,
    /// Target points, strictly increasing.
    pub eta: Vec<i64>,
}

impl PointConfig {
    pub fn new(mut xi: Vec<i64>, mut eta: Vec<i64>) -> Result<PointConfig> {
        xi.sort_unstable();
        eta.sort_unstable();
        if xi.windows(2).any(|w| w[0] == w[1]) || eta.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("point patterns must be simple".into()));
        }
        Ok(PointConfig { xi, eta })
    }

    /// Sample a random configuration: point counts and positions drawn from
    /// the given ranges, deduplicated.
    pub fn random(seed: u64, max_points: usize, span: i64) -> PointConfig {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let n = rng.random_range(0..=max_points);
            let mut pts: Vec<i64> = (0..n).map(|_| rng.random_range(-span..=span)).collect();
            pts.sort_unstable();
            pts.dedup();
            pts
        };
        let xi = draw(&mut rng);
        let eta = draw(&mut rng);
        PointConfig { xi, eta }
    }

    fn count_in(points: &[i64], lo: i64, hi: i64) -> usize {
        points.partition_point(|&p| p <= hi) - points.partition_point(|&p| p < lo)
    }

    /// Number of source points in the closed interval `[lo, hi]`.
    pub fn xi_count(&self, lo: i64, hi: i64) -> usize {
        Self::count_in(&self.xi, lo, hi)
    }

    /// Number of target points in the closed interval `[lo, hi]`.
    pub fn eta_count(&self, lo: i64, hi: i64) -> usize {
        Self::count_in(&self.eta, lo, hi)
    }
}

/// Match a single source point `s`: the smallest `t >= s` with
/// `#xi[s, t] = #eta[s, t] > 0`, or `None` when no such `t` exists up to the
/// largest relevant coordinate (the pattern is finite, so the counts are
/// constant beyond it). A non-source `s` matches itself trivially when the
/// counts start equal, which only happens when both are zero, so such an `s`
/// returns `Some(s)` only if `s` carries a target point too.
pub fn match_forward(cfg: &PointConfig, s: i64) -> Option<i64> {
    let hi = cfg
        .xi
        .last()
        .copied()
        .into_iter()
        .chain(cfg.eta.last().copied())
        .max()
        .unwrap_or(s);
    for t in s..=hi.max(s) {
        let a = cfg.xi_count(s, t);
        let b = cfg.eta_count(s, t);
        if a == b && a > 0 {
            return Some(t);
        }
    }
    None
}

/// Outcome of checking a full configuration.
#[derive(Clone, Debug, Serialize)]
pub struct MatchingReport {
    pub pairs: Vec<(i64, i64)>,
    pub unmatched: Vec<i64>,
    /// True when the matching is a bijection onto a subset of the target and
    /// respects the defining property at every source point.
    pub exact: bool,
}

/// Verify the matching over every source point of the configuration: each
/// matched pair must satisfy the count identity, distinct source points must
/// go to distinct target points, and any unmatched source point must really
/// have no admissible partner. An optional alternative assignment can be
/// checked against the canonical one.
pub fn verify_exact(cfg: &PointConfig, alternative: Option<&[(i64, i64)]>) -> Result<MatchingReport> {
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for &s in &cfg.xi {
        match match_forward(cfg, s) {
            Some(t) => pairs.push((s, t)),
            None => unmatched.push(s),
        }
    }
    let mut exact = true;
    // The count identity at the match point.
    for &(s, t) in &pairs {
        if cfg.xi_count(s, t) != cfg.eta_count(s, t) || cfg.xi_count(s, t) == 0 {
            exact = false;
        }
        // Minimality: no earlier admissible point.
        for u in s..t {
            let a = cfg.xi_count(s, u);
            if a == cfg.eta_count(s, u) && a > 0 {
                exact = false;
            }
        }
    }
    // Matched target points must be target points and pairwise distinct.
    let mut targets: Vec<i64> = pairs.iter().map(|&(_, t)| t).collect();
    targets.sort_unstable();
    if targets.windows(2).any(|w| w[0] == w[1]) {
        exact = false;
    }
    for &t in &targets {
        if cfg.eta.binary_search(&t).is_err() {
            exact = false;
        }
    }
    if let Some(alt) = alternative {
        let mut canon = pairs.clone();
        canon.sort_unstable();
        let mut alt = alt.to_vec();
        alt.sort_unstable();
        if canon != alt {
            exact = false;
        }
    }
    Ok(MatchingReport { pairs, unmatched, exact })
}

/// Embed a configuration as unit atoms on the integer grid (`dt = 1`), so
/// the continuum balancing scan can be compared against the exact oracle.
/// Points must fit strictly inside the returned window.
pub fn to_cumulative(cfg: &PointConfig) -> Result<(CumulativeMeasure, CumulativeMeasure)> {
    let all_min = cfg.xi.iter().chain(&cfg.eta).min().copied().unwrap_or(0);
    let all_max = cfg.xi.iter().chain(&cfg.eta).max().copied().unwrap_or(0);
    let lo = all_min.min(0) - 2;
    let hi = all_max.max(0) + 2;
    let neg = (-lo) as usize;
    let n = (hi - lo) as usize;
    let embed = |points: &[i64]| -> Result<CumulativeMeasure> {
        let mut masses = vec![0.0; n];
        for &p in points {
            // The point p becomes a unit atom on the cell (p - 1, p].
            masses[(p - 1 - lo) as usize] = 1.0;
        }
        CumulativeMeasure::from_cell_masses(1.0, neg, n - neg, &masses)
    };
    Ok((embed(&cfg.xi)?, embed(&cfg.eta)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{balance_forward, BalanceResult};

    #[test]
    fn single_pair_matches() {
        let cfg = PointConfig::new(vec![0], vec![3]).unwrap();
        assert_eq!(match_forward(&cfg, 0), Some(3));
    }

    #[test]
    fn coincident_points_match_immediately() {
        let cfg = PointConfig::new(vec![2], vec![2]).unwrap();
        assert_eq!(match_forward(&cfg, 2), Some(2));
    }

    #[test]
    fn interleaved_counts() {
        // xi = {0, 3}, eta = {1, 2}: from 0 the interval [0, 1] already has
        // one point each.
        let cfg = PointConfig::new(vec![0, 3], vec![1, 2]).unwrap();
        assert_eq!(match_forward(&cfg, 0), Some(1));
        // From 3 no interval ever balances: [3, t] has one xi point and no
        // eta points.
        assert_eq!(match_forward(&cfg, 3), None);
    }

    #[test]
    fn nested_lifo_order() {
        // xi = {0, 1}, eta = {2, 3}: [0, t] balances first at t = 3
        // (two and two), while [1, t] balances at t = 2.
        let cfg = PointConfig::new(vec![0, 1], vec![2, 3]).unwrap();
        assert_eq!(match_forward(&cfg, 0), Some(3));
        assert_eq!(match_forward(&cfg, 1), Some(2));
    }

    #[test]
    fn non_source_start_behaviour() {
        let cfg = PointConfig::new(vec![2], vec![5]).unwrap();
        // s = 0 is not a source point; counts first balance positively on
        // [0, 5].
        assert_eq!(match_forward(&cfg, 0), Some(5));
        // s = 3 sees no source points ever: [3, 5] holds 0 xi and 1 eta.
        assert_eq!(match_forward(&cfg, 3), None);
    }

    #[test]
    fn verify_reports_unmatched() {
        let cfg = PointConfig::new(vec![0, 10], vec![1]).unwrap();
        let report = verify_exact(&cfg, None).unwrap();
        assert_eq!(report.pairs, vec![(0, 1)]);
        assert_eq!(report.unmatched, vec![10]);
        assert!(report.exact);
    }

    #[test]
    fn verify_rejects_wrong_alternative() {
        let cfg = PointConfig::new(vec![0, 1], vec![2, 3]).unwrap();
        let good = verify_exact(&cfg, Some(&[(0, 3), (1, 2)])).unwrap();
        assert!(good.exact);
        let bad = verify_exact(&cfg, Some(&[(0, 2), (1, 3)])).unwrap();
        assert!(!bad.exact);
    }

    #[test]
    fn rejects_duplicate_points() {
        assert!(PointConfig::new(vec![1, 1], vec![]).is_err());
    }

    /// The continuum balancing scan, queried at the cell left edge of each
    /// source point, must reproduce the exact oracle.
    fn agree_with_continuum(cfg: &PointConfig) {
        let (xi, eta) = to_cumulative(cfg).unwrap();
        for &s in &cfg.xi {
            let oracle = match_forward(cfg, s);
            let got = balance_forward(&xi, &eta, s - 1, 0.0).unwrap();
            match (oracle, got) {
                (Some(t), BalanceResult::Matched { at }) => {
                    assert_eq!(t, at, "source {s} in {cfg:?}")
                }
                (None, BalanceResult::Censored { .. }) => {}
                other => panic!("disagreement at source {s} in {cfg:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn continuum_agrees_on_hand_cases() {
        agree_with_continuum(&PointConfig::new(vec![0, 3], vec![1, 2]).unwrap());
        agree_with_continuum(&PointConfig::new(vec![0, 1], vec![2, 3]).unwrap());
        agree_with_continuum(&PointConfig::new(vec![2], vec![2]).unwrap());
        agree_with_continuum(&PointConfig::new(vec![-3, 0, 4], vec![-2, 1, 6]).unwrap());
    }

    #[test]
    fn continuum_agrees_on_random_configs() {
        for seed in 0..1000 {
            let cfg = PointConfig::random(seed, 12, 30);
            agree_with_continuum(&cfg);
        }
    }

    #[test]
    fn matched_pairs_nest_on_random_configs() {
        for seed in 0..300 {
            let cfg = PointConfig::random(seed, 10, 25);
            let report = verify_exact(&cfg, None).unwrap();
            assert!(report.exact, "cfg {cfg:?}");
            for (i, &(s1, t1)) in report.pairs.iter().enumerate() {
                for &(s2, t2) in &report.pairs[i + 1..] {
                    let (a, b) = if s1 < s2 { ((s1, t1), (s2, t2)) } else { ((s2, t2), (s1, t1)) };
                    // No strict crossing: an inner start may not match past
                    // an enclosing pair's end.
                    assert!(
                        !(a.0 < b.0 && b.0 <= a.1 && b.1 > a.1),
                        "crossing pairs {a:?} {b:?} in {cfg:?}"
                    );
                }
            }
        }
    }
}
