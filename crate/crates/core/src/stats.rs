//! Statistical checks used by the verification harness: distribution-free
//! goodness of fit, the embedding test for shift outcomes, independence and
//! Gaussianity of the re-rooted path, tail-exponent estimation from censored
//! samples, and divergence detection for running moments.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One named check with its statistic, decision threshold, point estimate,
/// sample size and verdict; composite tests keep their components in `parts`.
#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub estimate: f64,
    pub n: usize,
    pub verdict: Verdict,
    pub parts: Vec<TestReport>,
}

impl TestReport {
    fn leaf(name: &str, statistic: f64, threshold: f64, estimate: f64, n: usize) -> TestReport {
        TestReport {
            name: name.to_string(),
            statistic,
            threshold,
            estimate,
            n,
            verdict: if statistic <= threshold { Verdict::Pass } else { Verdict::Fail },
            parts: Vec::new(),
        }
    }

    fn composite(name: &str, parts: Vec<TestReport>, n: usize) -> TestReport {
        let worst = parts
            .iter()
            .map(|p| p.statistic / p.threshold)
            .fold(0.0_f64, f64::max);
        TestReport {
            name: name.to_string(),
            statistic: worst,
            threshold: 1.0,
            estimate: worst,
            n,
            verdict: if parts.iter().all(|p| p.verdict == Verdict::Pass) {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            parts,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Kolmogorov-Smirnov critical value `c(alpha) / sqrt(n)` from the
/// distribution-free bound `P(D_n > x) <= 2 exp(-2 n x^2)`.
pub fn ks_threshold(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// One-sample KS test of `sample` against the CDF `f`.
pub fn ks_test<F>(name: &str, sample: &[f64], f: F, alpha: f64) -> Result<TestReport>
where
    F: Fn(f64) -> f64,
{
    if sample.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len();
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let cdf = f(v);
        d = d.max((cdf - i as f64 / n as f64).abs());
        d = d.max(((i as f64 + 1.0) / n as f64 - cdf).abs());
    }
    Ok(TestReport::leaf(name, d, ks_threshold(n, alpha), d, n))
}

/// Does the empirical law of the landing values match the target measure?
/// Atom masses are compared by a chi-square test on the band bins around
/// each atom location (plus a remainder bin), and the density component, if
/// present, by a KS test on the landing values falling outside all bands,
/// conditioned on the density part.
pub fn embedding_test(
    name: &str,
    landings: &[f64],
    nu: &crate::measures::TargetMeasure,
    bandwidth: f64,
    alpha: f64,
) -> Result<TestReport> {
    if landings.is_empty() {
        return Err(Error::InvalidParameter("no landings to test".into()));
    }
    let n = landings.len();
    let atoms = nu.atoms();
    let total = nu.total();
    let mut parts = Vec::new();

    // Chi-square over atom bands and the remainder.
    let mut observed = vec![0.0_f64; atoms.len() + 1];
    for &v in landings {
        let mut hit = false;
        for (i, (loc, _)) in atoms.iter().enumerate() {
            if (v - loc).abs() <= 2.0 * bandwidth {
                observed[i] += 1.0;
                hit = true;
                break;
            }
        }
        if !hit {
            observed[atoms.len()] += 1.0;
        }
    }
    let mut expected: Vec<f64> = atoms.iter().map(|(_, w)| w / total * n as f64).collect();
    let dens_weight = nu.density().map_or(0.0, |d| d.weight);
    expected.push(dens_weight / total * n as f64);
    let (chi2, df) = chi_square(&observed, &expected);
    if df > 0 {
        let crit = ChiSquared::new(df as f64)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .inverse_cdf(1.0 - alpha);
        parts.push(TestReport::leaf(&format!("{name}/atoms_chi2"), chi2, crit, chi2, n));
    }

    // KS on the density component.
    if let Some(d) = nu.density() {
        let outside: Vec<f64> = landings
            .iter()
            .copied()
            .filter(|v| atoms.iter().all(|(loc, _)| (v - loc).abs() > 2.0 * bandwidth))
            .collect();
        if outside.len() >= 20 {
            parts.push(ks_test(
                &format!("{name}/density_ks"),
                &outside,
                |x| d.kind.cdf(x),
                alpha,
            )?);
        }
    }
    Ok(TestReport::composite(name, parts, n))
}

fn chi_square(observed: &[f64], expected: &[f64]) -> (f64, usize) {
    let mut chi2 = 0.0;
    let mut df = 0usize;
    for (o, e) in observed.iter().zip(expected) {
        if *e > 0.0 {
            chi2 += (o - e).powi(2) / e;
            df += 1;
        }
    }
    (chi2, df.saturating_sub(1))
}

/// Is the path re-rooted at the shift still a Brownian motion independent of
/// its landing value? Probes the marginal at several times (KS against the
/// exact Gaussian law), the standardized increments between probes, and the
/// dependence between the landing value and each probe (correlation bound
/// plus a quantile-bin chi-square). All component tests run at the
/// Bonferroni-corrected level.
pub fn unbiasedness_test(
    name: &str,
    landings: &[f64],
    probes: &[(f64, Vec<f64>)],
    alpha: f64,
) -> Result<TestReport> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter("no probes supplied".into()));
    }
    let n = landings.len();
    let m = (2 * probes.len() + probes.len().saturating_sub(1)).max(1);
    let a = alpha / m as f64;
    let mut parts = Vec::new();
    for (t, values) in probes {
        if values.len() != n {
            return Err(Error::InvalidParameter("probe length mismatch".into()));
        }
        if *t == 0.0 {
            continue;
        }
        let sd = t.abs().sqrt();
        let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        parts.push(ks_test(
            &format!("{name}/marginal_t={t}"),
            values,
            |x| normal.cdf(x),
            a,
        )?);
        parts.push(independence_part(
            &format!("{name}/independence_t={t}"),
            landings,
            values,
            a,
        )?);
    }
    // Standardized consecutive increments between probe times.
    for w in probes.windows(2) {
        let (t1, v1) = &w[0];
        let (t2, v2) = &w[1];
        let gap = t2 - t1;
        if gap <= 0.0 {
            return Err(Error::InvalidParameter("probe times must increase".into()));
        }
        let inc: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| (b - a) / gap.sqrt()).collect();
        let std_normal = Normal::standard();
        parts.push(ks_test(
            &format!("{name}/increment_{t1}_{t2}"),
            &inc,
            |x| std_normal.cdf(x),
            a,
        )?);
    }
    Ok(TestReport::composite(name, parts, n))
}

/// Dependence check between two equal-length samples: absolute correlation
/// against `3 / sqrt(n)`, and a 4 x 4 quantile-bin chi-square when both
/// margins are non-degenerate. A degenerate margin (for example a landing
/// value that is almost surely constant) makes independence trivial.
fn independence_part(name: &str, x: &[f64], y: &[f64], alpha: f64) -> Result<TestReport> {
    let n = x.len();
    let var = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64, mean)
    };
    let (vx, mx) = var(x);
    let (vy, my) = var(y);
    if vx < 1e-12 || vy < 1e-12 {
        return Ok(TestReport::leaf(name, 0.0, 1.0, 0.0, n));
    }
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n as f64;
    let corr = (cov / (vx * vy).sqrt()).abs();
    let corr_part = TestReport::leaf(&format!("{name}/corr"), corr, 3.0 / (n as f64).sqrt(), corr, n);

    // 4 x 4 quantile bins.
    let quartile_edges = |v: &[f64]| -> Vec<f64> {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.total_cmp(b));
        (1..4).map(|q| s[q * n / 4]).collect()
    };
    let ex = quartile_edges(x);
    let ey = quartile_edges(y);
    let bin = |v: f64, edges: &[f64]| edges.iter().take_while(|&&e| v > e).count();
    let mut counts = [[0.0_f64; 4]; 4];
    for (a, b) in x.iter().zip(y) {
        counts[bin(*a, &ex)][bin(*b, &ey)] += 1.0;
    }
    let mut chi2 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let row: f64 = counts[i].iter().sum();
            let col: f64 = counts.iter().map(|r| r[j]).sum();
            let e = row * col / n as f64;
            if e > 0.0 {
                chi2 += (counts[i][j] - e).powi(2) / e;
            }
        }
    }
    let crit = ChiSquared::new(9.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .inverse_cdf(1.0 - alpha);
    let chi_part = TestReport::leaf(&format!("{name}/bins_chi2"), chi2, crit, chi2, n);
    Ok(TestReport::composite(name, vec![corr_part, chi_part], n))
}

/// A sample value that may only be known as a lower bound (a censored run).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailValue {
    pub value: f64,
    pub censored: bool,
}

impl TailValue {
    pub fn observed(value: f64) -> TailValue {
        TailValue { value, censored: false }
    }

    pub fn lower_bound(value: f64) -> TailValue {
        TailValue { value, censored: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub slope: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub n: usize,
    pub censored_frac: f64,
    /// Set when the log-log curvature suggests the tail is not a power law.
    pub non_power_law: bool,
}

/// Log-log fit points for the Kaplan-Meier survival estimate: each
/// uncensored value contributes `(ln x, ln S(x))` when its cumulative
/// probability `1 - S(x)` falls in the quantile window. Censored values
/// stay in the at-risk set up to their lower bound, which is exactly how a
/// horizon-capped replicate should inform the tail. Returns the points and
/// the cumulative probability reached by the last one.
fn km_fit_points(sample: &mut [TailValue], q_lo: f64, q_hi: f64) -> (Vec<(f64, f64)>, f64) {
    // At ties, uncensored observations are processed before censored ones
    // (the standard product-limit convention).
    sample.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.censored.cmp(&b.censored)));
    let n = sample.len();
    let mut surv = 1.0_f64;
    let mut pts = Vec::new();
    let mut reached = 0.0;
    for (i, v) in sample.iter().enumerate() {
        if v.censored {
            continue;
        }
        let at_risk = (n - i) as f64;
        surv *= 1.0 - 1.0 / at_risk;
        let q = 1.0 - surv;
        if q >= q_lo && q <= q_hi && v.value > 0.0 && surv > 0.0 {
            pts.push((v.value.ln(), surv.ln()));
            reached = q;
        }
    }
    (pts, reached)
}

/// Estimate the tail exponent of `P(X > x) ~ x^s` (`s < 0`) by least squares
/// on the log Kaplan-Meier survival estimate over a quantile window.
/// Censored values are right-censored observations: they hold their place in
/// the at-risk set up to their lower bound. The confidence interval comes
/// from a seeded bootstrap.
pub fn tail_slope(
    sample: &[TailValue],
    q_window: (f64, f64),
    bootstrap: usize,
    seed: u64,
) -> Result<TailReport> {
    use rand::{Rng, SeedableRng};
    let n = sample.len();
    if n < 50 {
        return Err(Error::InvalidParameter("need at least 50 observations".into()));
    }
    let (q_lo, q_hi) = q_window;
    if !(0.0 < q_lo && q_lo < q_hi && q_hi < 1.0) {
        return Err(Error::InvalidParameter("bad quantile window".into()));
    }
    let censored_frac = sample.iter().filter(|v| v.censored).count() as f64 / n as f64;

    let mut work: Vec<TailValue> = sample.to_vec();
    let (pts, q_reached) = km_fit_points(&mut work, q_lo, q_hi);
    let slope = least_squares_slope(&pts).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "censoring fraction {censored_frac:.3} leaves no usable quantile window"
        ))
    })?;

    // Curvature probe: compare the slopes of the lower and upper halves of
    // the window.
    let mid = pts.len() / 2;
    let non_power_law =
        match (least_squares_slope(&pts[..mid]), least_squares_slope(&pts[mid..])) {
            (Some(s1), Some(s2)) => (s1 - s2).abs() > 0.35 * slope.abs().max(0.25),
            _ => true,
        };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut boots: Vec<f64> = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        let mut resample: Vec<TailValue> =
            (0..n).map(|_| work[rng.random_range(0..n)]).collect();
        let (pts, _) = km_fit_points(&mut resample, q_lo, q_hi);
        if let Some(s) = least_squares_slope(&pts) {
            boots.push(s);
        }
    }
    boots.sort_by(|a, b| a.total_cmp(b));
    let (ci_lo, ci_hi) = if boots.len() >= 20 {
        (boots[boots.len() / 40], boots[boots.len() - 1 - boots.len() / 40])
    } else {
        (slope, slope)
    };
    Ok(TailReport {
        slope,
        ci_lo,
        ci_hi,
        q_lo,
        q_hi: q_reached,
        n,
        censored_frac,
        non_power_law,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 5 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    Flattening,
    Growing,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub beta: f64,
    /// Local log-log derivative of the truncated moment `E min(X, u)^beta`
    /// at the sample ceiling `u = max X`.
    pub slope: f64,
    pub verdict: GrowthVerdict,
    /// `(truncation level u, empirical E min(X, u)^beta)` on a geometric grid.
    pub grid: Vec<(f64, f64)>,
}

/// Does `E X^beta` look finite? An infinite moment shows up as persistent
/// growth of the truncated moment `m(u) = E min(X, u)^beta` in the truncation
/// level `u`: for a survival tail `t^(-alpha)`, `m(u)` grows like
/// `u^(beta - alpha)` when `beta > alpha` and converges when `beta < alpha`.
/// The verdict keys on the local log-log derivative at the sample ceiling,
/// `beta * u^beta * P{X >= u} / m(u)`, against the threshold 0.1.
///
/// Censored observations should enter at their lower bound: the tied mass at
/// the cap then carries the growth signal that a running mean of the capped
/// (or conditioned-on-observed, hence bounded) sample cannot see. With no
/// ties at the ceiling the probe is conservative — a moment that is only
/// barely infinite can read as flattening.
pub fn moment_growth(sample: &[f64], beta: f64) -> Result<GrowthReport> {
    if sample.len() < 100 {
        return Err(Error::InvalidParameter("need at least 100 observations".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    let mut xs: Vec<f64> = sample.iter().map(|x| x.abs()).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let hi = xs[n - 1];
    if !(hi > 0.0) {
        return Err(Error::InvalidParameter("sample is identically zero".into()));
    }
    // Prefix sums of x^beta over the sorted sample make each truncated
    // moment m(u) an O(log n) query.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for x in &xs {
        prefix.push(prefix.last().unwrap() + x.powf(beta));
    }
    let m_at = |u: f64| -> f64 {
        let k = xs.partition_point(|&x| x <= u);
        (prefix[k] + (n - k) as f64 * u.powf(beta)) / n as f64
    };
    // Grid for inspection/plotting, geometric from the median to the ceiling.
    let lo = xs[n / 2].max(hi * 1e-6);
    let points = 40usize;
    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let u = lo * (hi / lo).powf(i as f64 / (points - 1) as f64);
            (u, m_at(u))
        })
        .collect();
    // Mass at the ceiling: censored bounds tie at the cap, while an
    // uncensored sample has only its maximum there.
    let at_ceiling = n - xs.partition_point(|&x| x < hi);
    let tail_frac = at_ceiling as f64 / n as f64;
    let slope = beta * hi.powf(beta) * tail_frac / m_at(hi);
    let verdict = if slope > 0.1 { GrowthVerdict::Growing } else { GrowthVerdict::Flattening };
    Ok(GrowthReport { beta, slope, verdict, grid })
}
