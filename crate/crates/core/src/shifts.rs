//! Random-shift constructions: embed a target distribution as the law of
//! `B_T` by finding a time `T` where the balance between the local time at
//! zero and the target additive functional first closes. Every construction
//! reports censoring explicitly instead of silently truncating.

use serde::{Deserialize, Serialize};

use crate::allocation::{balance_forward, inverse_from, BalanceResult};
use crate::error::{Error, Result};
use crate::measures::{additive_functional, local_time_at, local_time_zero, TargetMeasure};
use crate::path_engine::{Direction, ForwardIncrements, GridPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionTag {
    BertoinLeJan,
    InverseLocalTime,
    AtomSplitting,
    AtomProbability,
    NonStopping,
    ExcursionReflection,
}

impl ConstructionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstructionTag::BertoinLeJan => "bertoin_le_jan",
            ConstructionTag::InverseLocalTime => "inverse_local_time",
            ConstructionTag::AtomSplitting => "atom_splitting",
            ConstructionTag::AtomProbability => "atom_probability",
            ConstructionTag::NonStopping => "non_stopping",
            ConstructionTag::ExcursionReflection => "excursion_reflection",
        }
    }
}

impl std::str::FromStr for ConstructionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bertoin_le_jan" | "blj" => Ok(ConstructionTag::BertoinLeJan),
            "inverse_local_time" | "ilt" => Ok(ConstructionTag::InverseLocalTime),
            "atom_splitting" => Ok(ConstructionTag::AtomSplitting),
            "atom_probability" => Ok(ConstructionTag::AtomProbability),
            "non_stopping" => Ok(ConstructionTag::NonStopping),
            "excursion_reflection" => Ok(ConstructionTag::ExcursionReflection),
            other => Err(Error::InvalidParameter(format!("unknown construction: {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftStatus {
    Matched,
    Censored,
}

/// Result of running one shift construction on one path.
#[derive(Clone, Debug, Serialize)]
pub struct ShiftOutcome {
    pub construction: ConstructionTag,
    pub status: ShiftStatus,
    /// Grid index of `T` (multiply by `dt` for time), when matched.
    pub t_index: Option<i64>,
    /// Path value at `T`, when matched.
    pub b_t: Option<f64>,
    /// Local time at zero accumulated over `[0, T]` (signed for `T < 0`),
    /// when matched.
    pub ell0_to_t: Option<f64>,
    /// The path re-centered at `T`, when matched and requested.
    #[serde(skip)]
    pub shifted: Option<GridPath>,
    /// Forward horizon (grid index) of the final window searched.
    pub horizon: i64,
    /// How many times the window was doubled before matching or giving up.
    pub extensions_used: u32,
}

impl ShiftOutcome {
    pub fn t_time(&self, dt: f64) -> Option<f64> {
        self.t_index.map(|k| k as f64 * dt)
    }

    fn censored(construction: ConstructionTag, horizon: i64, extensions: u32) -> ShiftOutcome {
        ShiftOutcome {
            construction,
            status: ShiftStatus::Censored,
            t_index: None,
            b_t: None,
            ell0_to_t: None,
            shifted: None,
            horizon,
            extensions_used: extensions,
        }
    }
}

/// Parameters shared by all constructions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub dt: f64,
    pub bandwidth: f64,
    /// Initial forward horizon in time units.
    pub base_horizon: f64,
    /// Hard cap on the forward horizon; the search censors beyond it.
    pub max_horizon: f64,
    /// Whether to materialize the re-centered path in the outcome.
    pub keep_shifted: bool,
}

impl ShiftConfig {
    pub fn new(dt: f64, bandwidth: f64, base_horizon: f64, max_horizon: f64) -> Result<ShiftConfig> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidParameter("bandwidth must be positive".into()));
        }
        if !(base_horizon > 0.0) || max_horizon < base_horizon {
            return Err(Error::InvalidParameter(
                "horizons must satisfy 0 < base <= max".into(),
            ));
        }
        Ok(ShiftConfig { dt, bandwidth, base_horizon, max_horizon, keep_shifted: false })
    }

    pub fn with_shifted(mut self) -> ShiftConfig {
        self.keep_shifted = true;
        self
    }
}

fn finish(
    construction: ConstructionTag,
    path: &GridPath,
    t: i64,
    cfg: &ShiftConfig,
    extensions: u32,
) -> Result<ShiftOutcome> {
    let ell0 = local_time_zero(path, cfg.bandwidth)?;
    let shifted = if cfg.keep_shifted { Some(path.shift_recenter(t)?) } else { None };
    Ok(ShiftOutcome {
        construction,
        status: ShiftStatus::Matched,
        t_index: Some(t),
        b_t: Some(path.value(t)),
        ell0_to_t: Some(ell0.cum_at(t)),
        shifted,
        horizon: path.window().1,
        extensions_used: extensions,
    })
}

/// Run `step` on successively doubled forward windows of the path until it
/// produces a match or the horizon cap is reached. The negative side grows
/// with the positive side so backward-looking constructions have room.
fn with_doubling<F>(
    path: GridPath,
    cfg: &ShiftConfig,
    mut step: F,
) -> Result<(GridPath, std::result::Result<i64, i64>, u32)>
where
    F: FnMut(&GridPath) -> Result<std::result::Result<i64, i64>>,
{
    let mut path = path;
    let mut horizon = cfg.base_horizon;
    let mut extensions = 0;
    loop {
        match step(&path)? {
            Ok(t) => return Ok((path, Ok(t), extensions)),
            Err(_) if horizon * 2.0 <= cfg.max_horizon => {
                path = path.extend(Direction::Forward, horizon)?;
                path = path.extend(Direction::Backward, horizon)?;
                horizon *= 2.0;
                extensions += 1;
            }
            Err(h) => return Ok((path, Err(h), extensions)),
        }
    }
}

fn base_path(cfg: &ShiftConfig, seed: u64, replicate: u64) -> Result<GridPath> {
    crate::path_engine::simulate_two_sided(cfg.dt, cfg.base_horizon, cfg.base_horizon, seed, replicate)
}

/// The first-crossing embedding: `T` is the first time the target additive
/// functional catches up with the local time at zero. A stopping time; `T >= 0`.
pub fn bertoin_le_jan(
    nu: &TargetMeasure,
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<ShiftOutcome> {
    let path = base_path(cfg, seed, replicate)?;
    let (path, res, ext) = with_doubling(path, cfg, |p| {
        let xi = local_time_zero(p, cfg.bandwidth)?;
        let eta = additive_functional(p, nu, cfg.bandwidth)?;
        Ok(match balance_forward(&xi, &eta, 0, 0.0)? {
            BalanceResult::Matched { at } => Ok(at),
            BalanceResult::Censored { horizon } => Err(horizon),
        })
    })?;
    match res {
        Ok(t) => finish(ConstructionTag::BertoinLeJan, &path, t, cfg, ext),
        Err(h) => Ok(ShiftOutcome::censored(ConstructionTag::BertoinLeJan, h, ext)),
    }
}

/// Shift to the inverse local time at level `r` (negative `r` walks the
/// backward side). `B_T = 0` up to the bandwidth; used for the additive
/// structure of local time, not for embedding a distribution.
pub fn inverse_local_time_shift(
    r: f64,
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<ShiftOutcome> {
    let path = base_path(cfg, seed, replicate)?;
    let (path, res, ext) = with_doubling(path, cfg, |p| {
        let ell = local_time_zero(p, cfg.bandwidth)?;
        // The forward inverse returns the first strict exceedance index,
        // the grid point that produced the final quantum of mass, so the
        // landing lies in the band on either side.
        Ok(match inverse_from(&ell, 0, r)? {
            BalanceResult::Matched { at } => Ok(at),
            BalanceResult::Censored { horizon } => Err(horizon),
        })
    })?;
    match res {
        Ok(t) => finish(ConstructionTag::InverseLocalTime, &path, t, cfg, ext),
        Err(h) => Ok(ShiftOutcome::censored(ConstructionTag::InverseLocalTime, h, ext)),
    }
}

/// Two-stage construction for a target with an atom at zero: the atom mass is
/// rerouted through an auxiliary level `y`, then balanced back to zero.
/// Stage one runs the first-crossing rule against
/// `mu = nu - nu{0} delta_0 + nu{0} delta_y`; if it lands within the band of
/// `y`, stage two balances the local time at `y` against the local time at
/// zero from there.
pub fn atom_splitting(
    nu: &TargetMeasure,
    y: f64,
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<ShiftOutcome> {
    let p0 = nu.mass_at(0.0);
    if p0 <= 0.0 {
        return Err(Error::ConstructionMismatch(
            "atom splitting requires an atom at zero".into(),
        ));
    }
    if y == 0.0 || nu.mass_at(y) > 0.0 {
        return Err(Error::InvalidParameter(
            "auxiliary level must be nonzero and free of target mass".into(),
        ));
    }
    let mut atoms: Vec<(f64, f64)> = nu
        .atoms()
        .iter()
        .filter(|(loc, _)| *loc != 0.0)
        .cloned()
        .collect();
    atoms.push((y, p0));
    let mu = TargetMeasure::new(atoms, nu.density().cloned())?;

    let path = base_path(cfg, seed, replicate)?;
    // Stage one: balance local time at zero against mu.
    let (path, res, ext1) = with_doubling(path, cfg, |p| {
        let xi = local_time_zero(p, cfg.bandwidth)?;
        let eta = additive_functional(p, &mu, cfg.bandwidth)?;
        Ok(match balance_forward(&xi, &eta, 0, 0.0)? {
            BalanceResult::Matched { at } => Ok(at),
            BalanceResult::Censored { horizon } => Err(horizon),
        })
    })?;
    let t1 = match res {
        Ok(t) => t,
        Err(h) => return Ok(ShiftOutcome::censored(ConstructionTag::AtomSplitting, h, ext1)),
    };
    if (path.value(t1) - y).abs() > cfg.bandwidth {
        // Landed on the genuine part of nu; done.
        return finish(ConstructionTag::AtomSplitting, &path, t1, cfg, ext1);
    }
    // Stage two: from t1 balance the local time at y against local time at
    // zero, sending the rerouted mass back to the origin level.
    let (path, res, ext2) = with_doubling(path, cfg, |p| {
        let xi = local_time_at(p, y, cfg.bandwidth)?;
        let eta = local_time_zero(p, cfg.bandwidth)?;
        Ok(match balance_forward(&xi, &eta, t1, 0.0)? {
            BalanceResult::Matched { at } => Ok(at),
            BalanceResult::Censored { horizon } => Err(horizon),
        })
    })?;
    match res {
        Ok(t2) => finish(ConstructionTag::AtomSplitting, &path, t2, cfg, ext1 + ext2),
        Err(h) => Ok(ShiftOutcome::censored(ConstructionTag::AtomSplitting, h, ext1 + ext2)),
    }
}

/// Unbiased shift with a prescribed probability of `T = 0`: run the
/// first-crossing rule against `nu' = p delta_1 + (1 - p) delta_2`; when it
/// lands at level 1, take `T = 0`. Otherwise thin the local time at zero to
/// the moments whose first crossing lands at level 2 and move forward one
/// unit of the thinned measure.
pub fn atom_probability(
    p: f64,
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<ShiftOutcome> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidParameter("p must lie strictly in (0, 1)".into()));
    }
    let nu_prime = TargetMeasure::new(vec![(1.0, p), (2.0, 1.0 - p)], None)?;
    let path = base_path(cfg, seed, replicate)?;
    // First crossing from the origin.
    let (path, res, ext1) = with_doubling(path, cfg, |pa| {
        let xi = local_time_zero(pa, cfg.bandwidth)?;
        let eta = additive_functional(pa, &nu_prime, cfg.bandwidth)?;
        Ok(match balance_forward(&xi, &eta, 0, 0.0)? {
            BalanceResult::Matched { at } => Ok(at),
            BalanceResult::Censored { horizon } => Err(horizon),
        })
    })?;
    let tau0 = match res {
        Ok(t) => t,
        Err(h) => return Ok(ShiftOutcome::censored(ConstructionTag::AtomProbability, h, ext1)),
    };
    if (path.value(tau0) - 1.0).abs() < (path.value(tau0) - 2.0).abs() {
        return finish(ConstructionTag::AtomProbability, &path, 0, cfg, ext1);
    }
    // Thin the local time at zero to the band moments whose own first
    // crossing lands at level 2, then step one unit of thinned mass forward.
    let (path, res, ext2) = with_doubling(path, cfg, |pa| {
        let xi_full = local_time_zero(pa, cfg.bandwidth)?;
        let eta = additive_functional(pa, &nu_prime, cfg.bandwidth)?;
        let eval = crate::allocation::BalanceEvaluator::new(&xi_full, &eta)?;
        let (lo, hi) = pa.window();
        let quantum = pa.dt() / (2.0 * cfg.bandwidth);
        // Build the thinned cumulative, then invert it from the origin. A
        // forward band moment whose own crossing is unresolved makes every
        // later landing unreliable, so such a landing forces an extension.
        let mut masses = vec![0.0; (hi - lo) as usize];
        let mut first_unresolved = i64::MAX;
        for k in (lo + 1)..=hi {
            if pa.value(k).abs() <= cfg.bandwidth {
                match eval.query(k - 1)? {
                    BalanceResult::Matched { at } => {
                        if (pa.value(at) - 2.0).abs() < (pa.value(at) - 1.0).abs() {
                            masses[(k - 1 - lo) as usize] = quantum;
                        }
                    }
                    BalanceResult::Censored { .. } => {
                        if k > 0 {
                            first_unresolved = first_unresolved.min(k);
                        }
                    }
                }
            }
        }
        let thinned = crate::measures::CumulativeMeasure::from_cell_masses(
            pa.dt(),
            (-lo) as usize,
            hi as usize,
            &masses,
        )?;
        match inverse_from(&thinned, 0, 1.0)? {
            BalanceResult::Matched { at } if at < first_unresolved => Ok(Ok(at)),
            _ => Ok(Err(hi)),
        }
    })?;
    match res {
        Ok(t) => finish(ConstructionTag::AtomProbability, &path, t, cfg, ext1 + ext2),
        Err(h) => Ok(ShiftOutcome::censored(ConstructionTag::AtomProbability, h, ext1 + ext2)),
    }
}

/// Five-stage composition producing an unbiased shift that is not a stopping
/// time: go to the inverse local time at level `x`, then onward one unit of
/// local time at `x`, back two units, onward one unit, and finally balance
/// the remaining discrepancy at zero. Requires `x != 0`.
pub fn non_stopping(
    x: f64,
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<ShiftOutcome> {
    if x == 0.0 {
        return Err(Error::InvalidParameter("level must be nonzero".into()));
    }
    let path = base_path(cfg, seed, replicate)?;
    // Stage one: first crossing sending one unit of local time at zero to x.
    let (path, res, ext1) = with_doubling(path, cfg, |p| {
        let xi = local_time_zero(p, cfg.bandwidth)?;
        let eta = local_time_at(p, x, cfg.bandwidth)?;
        Ok(match balance_forward(&xi, &eta, 0, 0.0)? {
            BalanceResult::Matched { at } => Ok(at),
            BalanceResult::Censored { horizon } => Err(horizon),
        })
    })?;
    let t1 = match res {
        Ok(t) => t,
        Err(h) => return Ok(ShiftOutcome::censored(ConstructionTag::NonStopping, h, ext1)),
    };
    // Stages two to four: fixed excursions along the local time at x, which
    // depend on path information after t1 (hence not a stopping time).
    let mut total_ext = ext1;
    let mut cur = t1;
    let mut path = path;
    for r in [1.0_f64, -2.0, 1.0] {
        let (p2, res, e) = with_doubling(path, cfg, |p| {
            let ell_x = local_time_at(p, x, cfg.bandwidth)?;
            Ok(match inverse_from(&ell_x, cur, r)? {
                BalanceResult::Matched { at } => Ok(at),
                BalanceResult::Censored { horizon } => Err(horizon),
            })
        })?;
        path = p2;
        total_ext += e;
        cur = match res {
            Ok(t) => t,
            Err(h) => {
                return Ok(ShiftOutcome::censored(ConstructionTag::NonStopping, h, total_ext))
            }
        };
    }
    // Stage five: balance the local time at x back to zero from the current
    // position.
    let (path, res, e5) = with_doubling(path, cfg, |p| {
        let xi = local_time_at(p, x, cfg.bandwidth)?;
        let eta = local_time_zero(p, cfg.bandwidth)?;
        Ok(match balance_forward(&xi, &eta, cur, 0.0)? {
            BalanceResult::Matched { at } => Ok(at),
            BalanceResult::Censored { horizon } => Err(horizon),
        })
    })?;
    total_ext += e5;
    match res {
        Ok(t) => finish(ConstructionTag::NonStopping, &path, t, cfg, total_ext),
        Err(h) => Ok(ShiftOutcome::censored(ConstructionTag::NonStopping, h, total_ext)),
    }
}

/// Two-sided shift that balances the local time at zero with itself: locate
/// the zero-free stretches on either side of the origin that reach absolute
/// height one, and reflect the origin through the local time of the gap
/// between them. With `b <= 0 <= a` the gap endpoints and `c` the cumulative
/// local time, the reflected position carries cumulative value
/// `c(a) + c(b)`; when that level is ahead of the origin the right end of its
/// level set is taken, otherwise the left end. `T` may be negative and
/// `|T|` is bounded by the two enclosing stretch times.
pub fn excursion_reflection(
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<ShiftOutcome> {
    let path = base_path(cfg, seed, replicate)?;
    let (path, res, ext) = with_doubling(path, cfg, |p| {
        let (lo, hi) = p.window();
        let fwd = scan_excursion(p, cfg.bandwidth, hi, 1);
        let bwd = scan_excursion(p, cfg.bandwidth, lo, -1);
        match (fwd, bwd) {
            (Some(a_fwd), Some(b_bwd)) => {
                let ell = local_time_zero(p, cfg.bandwidth)?;
                let target = ell.cum_at(a_fwd) + ell.cum_at(b_bwd);
                let t = if target >= 0.0 {
                    // Right end of the level set within the gap; the jump
                    // past it happens at the next band visit, so nudge
                    // forward when the endpoint itself is out of band.
                    (b_bwd..=a_fwd)
                        .rev()
                        .find(|&j| ell.cum_at(j) <= target)
                        .map(|j| if p.value(j).abs() <= cfg.bandwidth { j } else { j + 1 })
                } else {
                    // Left end of the level set; the jump into it came from
                    // the previous band visit.
                    (b_bwd..=a_fwd)
                        .find(|&j| ell.cum_at(j) >= target)
                        .map(|j| if p.value(j).abs() <= cfg.bandwidth { j } else { j - 1 })
                };
                match t {
                    Some(t) if t >= b_bwd && t <= a_fwd => Ok(Ok(t)),
                    _ => Ok(Err(hi)),
                }
            }
            _ => Ok(Err(hi)),
        }
    })?;
    match res {
        Ok(t) => finish(ConstructionTag::ExcursionReflection, &path, t, cfg, ext),
        Err(h) => Ok(ShiftOutcome::censored(ConstructionTag::ExcursionReflection, h, ext)),
    }
}

/// Find the near-side endpoint of the first zero-free stretch in direction
/// `dir` (`1` forward, `-1` backward) from the origin that reaches
/// `|B| >= 1`. Returns the last band visit before the stretch.
pub fn scan_excursion(p: &GridPath, bandwidth: f64, limit: i64, dir: i64) -> Option<i64> {
    let mut last_zero = 0;
    let mut k = 0;
    loop {
        k += dir;
        if (dir > 0 && k > limit) || (dir < 0 && k < limit) {
            return None;
        }
        let v = p.value(k);
        if v.abs() <= bandwidth {
            last_zero = k;
        } else if v.abs() >= 1.0 {
            return Some(last_zero);
        }
    }
}

/// One replicate from the streaming sampler: the matched index (or `None`
/// when censored at the horizon) and the local time at zero accumulated up
/// to the match or the horizon. The censored local time is a usable lower
/// bound for the tail of `2 * ell0[0, T]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailSample {
    pub t_index: Option<i64>,
    pub ell0: f64,
    /// Path value at the match, or at the horizon when censored.
    pub b_t: f64,
}

/// Streaming sampler for the first-crossing construction: walks a single
/// forward trajectory without materializing it, tracking only the running
/// band counts. Arithmetic matches the array pipeline step for step so the
/// two routes agree exactly.
pub fn bertoin_le_jan_tail_sample(
    nu: &TargetMeasure,
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<TailSample> {
    let quantum = cfg.dt / (2.0 * cfg.bandwidth);
    let max_steps = (cfg.max_horizon / cfg.dt).round() as i64;
    let mut inc = ForwardIncrements::new(cfg.dt, seed, replicate);
    let atoms = nu.atoms();
    let mut b = 0.0_f64;
    let mut zero_count: u64 = 0;
    let mut atom_counts = vec![0u64; atoms.len()];
    let mut dens = 0.0_f64;
    let mut went_positive = false;
    for k in 1..=max_steps {
        b += inc.next_increment();
        if b.abs() <= cfg.bandwidth {
            zero_count += 1;
        }
        for (i, (loc, _)) in atoms.iter().enumerate() {
            if (b - loc).abs() <= cfg.bandwidth {
                atom_counts[i] += 1;
            }
        }
        dens += nu.density_value(b) * cfg.dt;
        let xi = zero_count as f64 * quantum;
        let weighted: f64 = atoms
            .iter()
            .zip(&atom_counts)
            .map(|((_, w), c)| w * *c as f64)
            .sum();
        let eta = weighted * quantum + dens;
        let g = xi - eta;
        if g > 0.0 {
            went_positive = true;
        } else if went_positive || eta > 0.0 {
            return Ok(TailSample { t_index: Some(k), ell0: xi, b_t: b });
        }
    }
    Ok(TailSample { t_index: None, ell0: zero_count as f64 * quantum, b_t: b })
}

/// Streaming replicate of the two-stage atom-splitting construction: the
/// first-crossing stage runs against `mu = nu - nu{0} delta_0 + nu{0}
/// delta_y`; a landing in the band of `y` starts a second crossing that
/// balances the local time at `y` against the local time at zero. Arithmetic
/// matches the array pipeline step for step.
pub fn atom_splitting_tail_sample(
    nu: &TargetMeasure,
    y: f64,
    cfg: &ShiftConfig,
    seed: u64,
    replicate: u64,
) -> Result<TailSample> {
    let p0 = nu.mass_at(0.0);
    if p0 <= 0.0 {
        return Err(Error::ConstructionMismatch(
            "atom splitting requires an atom at zero".into(),
        ));
    }
    if y == 0.0 || nu.mass_at(y) > 0.0 {
        return Err(Error::InvalidParameter(
            "auxiliary level must be nonzero and free of target mass".into(),
        ));
    }
    let mut atoms: Vec<(f64, f64)> = nu
        .atoms()
        .iter()
        .filter(|(loc, _)| *loc != 0.0)
        .cloned()
        .collect();
    atoms.push((y, p0));
    let mu = TargetMeasure::new(atoms, nu.density().cloned())?;
    let atoms = mu.atoms();

    let quantum = cfg.dt / (2.0 * cfg.bandwidth);
    let max_steps = (cfg.max_horizon / cfg.dt).round() as i64;
    let mut inc = ForwardIncrements::new(cfg.dt, seed, replicate);
    let mut b = 0.0_f64;
    let mut zero_count: u64 = 0;
    let mut atom_counts = vec![0u64; atoms.len()];
    let mut dens = 0.0_f64;
    let mut went_positive = false;
    // Stage-two state: band counts since the stage-one match.
    let mut stage2 = false;
    let mut y_count: u64 = 0;
    let mut zero2_count: u64 = 0;
    let mut went_positive2 = false;
    for k in 1..=max_steps {
        b += inc.next_increment();
        let in_zero = b.abs() <= cfg.bandwidth;
        let in_y = (b - y).abs() <= cfg.bandwidth;
        if in_zero {
            zero_count += 1;
        }
        if stage2 {
            if in_y {
                y_count += 1;
            }
            if in_zero {
                zero2_count += 1;
            }
            let g = y_count as f64 * quantum - zero2_count as f64 * quantum;
            if g > 0.0 {
                went_positive2 = true;
            } else if went_positive2 || zero2_count > 0 {
                return Ok(TailSample {
                    t_index: Some(k),
                    ell0: zero_count as f64 * quantum,
                    b_t: b,
                });
            }
            continue;
        }
        for (i, (loc, _)) in atoms.iter().enumerate() {
            if (b - loc).abs() <= cfg.bandwidth {
                atom_counts[i] += 1;
            }
        }
        dens += mu.density_value(b) * cfg.dt;
        let xi = zero_count as f64 * quantum;
        let weighted: f64 = atoms
            .iter()
            .zip(&atom_counts)
            .map(|((_, w), c)| w * *c as f64)
            .sum();
        let eta = weighted * quantum + dens;
        let g = xi - eta;
        if g > 0.0 {
            went_positive = true;
        } else if went_positive || eta > 0.0 {
            if (b - y).abs() > cfg.bandwidth {
                // Landed on the genuine part of nu; done.
                return Ok(TailSample { t_index: Some(k), ell0: xi, b_t: b });
            }
            stage2 = true;
        }
    }
    Ok(TailSample { t_index: None, ell0: zero_count as f64 * quantum, b_t: b })
}
