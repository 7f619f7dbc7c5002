//! Grid-aligned cumulative random measures: local time at a level, the
//! additive functional driven by a target measure, and the occupation-identity
//! cross-check.
//!
//! Sign convention: `cum(t)` is the mass on `(0, t]` for `t >= 0` and minus
//! the mass on `[t, 0)` for `t < 0`, so `mass(s, t) = cum(t) - cum(s)` works
//! across the origin without special cases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path_engine::GridPath;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulativeMeasure {
    dt: f64,
    neg_steps: usize,
    pos_steps: usize,
    /// `cum[neg_steps]` is the origin entry and equals zero.
    cum: Vec<f64>,
}

impl CumulativeMeasure {
    /// Build from a raw cumulative sequence, validating the invariants.
    pub fn from_cum(dt: f64, neg_steps: usize, pos_steps: usize, cum: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if cum.len() != neg_steps + pos_steps + 1 {
            return Err(Error::InvalidParameter(format!(
                "cumulative length {} does not match window {}+{}+1",
                cum.len(),
                neg_steps,
                pos_steps
            )));
        }
        if cum[neg_steps] != 0.0 {
            return Err(Error::InvalidParameter("cumulative must vanish at the origin".into()));
        }
        if cum.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("cumulative must be nondecreasing".into()));
        }
        Ok(CumulativeMeasure { dt, neg_steps, pos_steps, cum })
    }

    /// Build from per-cell masses; `masses[i]` is the mass of the `i`-th grid
    /// cell, with the origin between cells `neg_steps - 1` and `neg_steps`.
    pub fn from_cell_masses(dt: f64, neg_steps: usize, pos_steps: usize, masses: &[f64]) -> Result<Self> {
        if masses.len() != neg_steps + pos_steps {
            return Err(Error::InvalidParameter("cell count does not match window".into()));
        }
        let mut cum = vec![0.0; masses.len() + 1];
        let mut acc = 0.0;
        for k in neg_steps..masses.len() {
            acc += masses[k];
            cum[k + 1] = acc;
        }
        let mut acc = 0.0;
        for k in (0..neg_steps).rev() {
            acc -= masses[k];
            cum[k] = acc;
        }
        Self::from_cum(dt, neg_steps, pos_steps, cum)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn window(&self) -> (i64, i64) {
        (-(self.neg_steps as i64), self.pos_steps as i64)
    }

    pub fn contains(&self, k: i64) -> bool {
        let (lo, hi) = self.window();
        k >= lo && k <= hi
    }

    /// Signed cumulative value at grid index `k`.
    pub fn cum_at(&self, k: i64) -> f64 {
        self.cum[(k + self.neg_steps as i64) as usize]
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    /// Mass of `(s, t]` for grid indices `s <= t`.
    pub fn mass(&self, s: i64, t: i64) -> f64 {
        self.cum_at(t) - self.cum_at(s)
    }

    pub fn same_grid(&self, other: &CumulativeMeasure) -> bool {
        self.dt == other.dt
            && self.neg_steps == other.neg_steps
            && self.pos_steps == other.pos_steps
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,cum")?;
        let (lo, hi) = self.window();
        for k in lo..=hi {
            writeln!(w, "{},{}", k as f64 * self.dt, self.cum_at(k))?;
        }
        Ok(())
    }
}

/// Piecewise-constant or named analytic density component of a target measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DensityKind {
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Piecewise constant: disjoint `(lo, hi, height)` segments, normalized.
    Piecewise(Vec<(f64, f64, f64)>),
}

impl DensityKind {
    /// Normalizing constant of the un-scaled density.
    fn raw_total(&self) -> f64 {
        match self {
            DensityKind::Uniform { lo, hi } => hi - lo,
            DensityKind::Piecewise(segs) => segs.iter().map(|(lo, hi, h)| (hi - lo) * h).sum(),
        }
    }

    /// Normalized density value at `x` (integrates to one).
    pub fn pdf(&self, x: f64) -> f64 {
        let z = self.raw_total();
        match self {
            DensityKind::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / z
                } else {
                    0.0
                }
            }
            DensityKind::Piecewise(segs) => segs
                .iter()
                .find(|(lo, hi, _)| x >= *lo && x <= *hi)
                .map_or(0.0, |(_, _, h)| h / z),
        }
    }

    /// Normalized CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = self.raw_total();
        match self {
            DensityKind::Uniform { lo, hi } => ((x - lo).clamp(0.0, hi - lo)) / z,
            DensityKind::Piecewise(segs) => {
                let mut acc = 0.0;
                for (lo, hi, h) in segs {
                    acc += (x - lo).clamp(0.0, hi - lo) * h;
                }
                acc / z
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            DensityKind::Uniform { lo, hi } => hi > lo,
            DensityKind::Piecewise(segs) => {
                !segs.is_empty()
                    && segs.iter().all(|(lo, hi, h)| hi > lo && *h >= 0.0)
                    && self.raw_total() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("degenerate density component".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityComponent {
    pub kind: DensityKind,
    pub weight: f64,
}

/// A probability (or sub-probability) target measure: atoms plus an optional
/// density component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMeasure {
    atoms: Vec<(f64, f64)>,
    density: Option<DensityComponent>,
}

impl TargetMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, density: Option<DensityComponent>) -> Result<Self> {
        let m = TargetMeasure { atoms, density };
        m.validate()?;
        Ok(m)
    }

    pub fn dirac(x: f64) -> Self {
        TargetMeasure { atoms: vec![(x, 1.0)], density: None }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&DensityComponent> {
        self.density.as_ref()
    }

    pub fn total(&self) -> f64 {
        let atom_mass: f64 = self.atoms.iter().map(|(_, w)| w).sum();
        atom_mass + self.density.as_ref().map_or(0.0, |d| d.weight)
    }

    pub fn is_sub_probability(&self) -> bool {
        self.total() < 1.0 - 1e-12
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(loc, _)| *loc == x)
            .map(|(_, w)| w)
            .sum()
    }

    /// Weight times normalized density at `x`.
    pub fn density_value(&self, x: f64) -> f64 {
        self.density
            .as_ref()
            .map_or(0.0, |d| d.weight * d.kind.pdf(x))
    }

    fn validate(&self) -> Result<()> {
        for (i, (loc, w)) in self.atoms.iter().enumerate() {
            if !(*w > 0.0) {
                return Err(Error::InvalidParameter("atom weights must be positive".into()));
            }
            if self.atoms[..i].iter().any(|(l, _)| l == loc) {
                return Err(Error::InvalidParameter(format!("duplicate atom location {loc}")));
            }
        }
        if let Some(d) = &self.density {
            if !(d.weight > 0.0) {
                return Err(Error::InvalidParameter("density weight must be positive".into()));
            }
            d.kind.validate()?;
        }
        let total = self.total();
        if !(total > 0.0 && total <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "total mass must lie in (0, 1], got {total}"
            )));
        }
        Ok(())
    }

    /// Parse the inline CLI syntax
    /// `atoms:LOC=W,LOC=W;density:uniform,LO,HI,WEIGHT`.
    /// Either section may be omitted.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut density = None;
        for section in spec.split(';').filter(|s| !s.trim().is_empty()) {
            let (head, body) = section
                .split_once(':')
                .ok_or_else(|| Error::InvalidParameter(format!("bad measure section: {section}")))?;
            match head.trim() {
                "atoms" => {
                    for part in body.split(',').filter(|s| !s.trim().is_empty()) {
                        let (loc, w) = part.split_once('=').ok_or_else(|| {
                            Error::InvalidParameter(format!("bad atom spec: {part}"))
                        })?;
                        let loc: f64 = loc.trim().parse().map_err(|_| {
                            Error::InvalidParameter(format!("bad atom location: {loc}"))
                        })?;
                        let w: f64 = w.trim().parse().map_err(|_| {
                            Error::InvalidParameter(format!("bad atom weight: {w}"))
                        })?;
                        atoms.push((loc, w));
                    }
                }
                "density" => {
                    let fields: Vec<&str> = body.split(',').map(str::trim).collect();
                    match fields.first() {
                        Some(&"uniform") if fields.len() == 4 => {
                            let lo: f64 = fields[1].parse().map_err(|_| {
                                Error::InvalidParameter("bad density lo".into())
                            })?;
                            let hi: f64 = fields[2].parse().map_err(|_| {
                                Error::InvalidParameter("bad density hi".into())
                            })?;
                            let weight: f64 = fields[3].parse().map_err(|_| {
                                Error::InvalidParameter("bad density weight".into())
                            })?;
                            density = Some(DensityComponent {
                                kind: DensityKind::Uniform { lo, hi },
                                weight,
                            });
                        }
                        _ => {
                            return Err(Error::InvalidParameter(format!(
                                "unsupported density spec: {body}"
                            )))
                        }
                    }
                }
                other => {
                    return Err(Error::InvalidParameter(format!("unknown measure section: {other}")))
                }
            }
        }
        Self::new(atoms, density)
    }
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if bandwidth > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )))
    }
}

/// Box-kernel local time at level `x`: the cumulative value at `t > 0` is
/// `(2 eps)^-1 * dt * #{grid s in (0, t] : |B_s - x| <= eps}`, mirrored for
/// `t < 0`.
pub fn local_time_at(path: &GridPath, x: f64, bandwidth: f64) -> Result<CumulativeMeasure> {
    check_bandwidth(bandwidth)?;
    let quantum = path.dt() / (2.0 * bandwidth);
    let (lo, hi) = path.window();
    let neg = (-lo) as usize;
    let pos = hi as usize;
    let mut cum = vec![0.0; neg + pos + 1];
    let mut count: u64 = 0;
    for k in 1..=hi {
        if (path.value(k) - x).abs() <= bandwidth {
            count += 1;
        }
        cum[(k + neg as i64) as usize] = count as f64 * quantum;
    }
    let mut count: u64 = 0;
    for k in (lo..0).rev() {
        if (path.value(k) - x).abs() <= bandwidth {
            count += 1;
        }
        cum[(k + neg as i64) as usize] = -(count as f64) * quantum;
    }
    CumulativeMeasure::from_cum(path.dt(), neg, pos, cum)
}

/// Local time at zero.
pub fn local_time_zero(path: &GridPath, bandwidth: f64) -> Result<CumulativeMeasure> {
    local_time_at(path, 0.0, bandwidth)
}

/// The additive functional `l^nu`: atoms use the box-kernel estimator, the
/// density part accumulates `w_d * h(B_s) * dt` along the path.
pub fn additive_functional(
    path: &GridPath,
    nu: &TargetMeasure,
    bandwidth: f64,
) -> Result<CumulativeMeasure> {
    check_bandwidth(bandwidth)?;
    if !(nu.total() > 0.0) {
        return Err(Error::InvalidParameter("target measure has zero total mass".into()));
    }
    let quantum = path.dt() / (2.0 * bandwidth);
    let (lo, hi) = path.window();
    let neg = (-lo) as usize;
    let pos = hi as usize;
    let mut cum = vec![0.0; neg + pos + 1];
    let atoms = nu.atoms();
    let mut counts = vec![0u64; atoms.len()];
    let mut dens = 0.0;
    for k in 1..=hi {
        let b = path.value(k);
        for (i, (loc, _)) in atoms.iter().enumerate() {
            if (b - loc).abs() <= bandwidth {
                counts[i] += 1;
            }
        }
        dens += nu.density_value(b) * path.dt();
        let weighted: f64 = atoms
            .iter()
            .zip(&counts)
            .map(|((_, w), c)| w * *c as f64)
            .sum();
        cum[(k + neg as i64) as usize] = weighted * quantum + dens;
    }
    let mut counts = vec![0u64; atoms.len()];
    let mut dens = 0.0;
    for k in (lo..0).rev() {
        let b = path.value(k);
        for (i, (loc, _)) in atoms.iter().enumerate() {
            if (b - loc).abs() <= bandwidth {
                counts[i] += 1;
            }
        }
        dens += nu.density_value(b) * path.dt();
        let weighted: f64 = atoms
            .iter()
            .zip(&counts)
            .map(|((_, w), c)| w * *c as f64)
            .sum();
        cum[(k + neg as i64) as usize] = -(weighted * quantum + dens);
    }
    CumulativeMeasure::from_cum(path.dt(), neg, pos, cum)
}

#[derive(Clone, Debug, Serialize)]
pub struct OccupationReport {
    pub max_rel_residual: f64,
    pub per_bin: Vec<BinResidual>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BinResidual {
    pub lo: f64,
    pub hi: f64,
    pub occupation: f64,
    pub level_sum: f64,
    pub rel_residual: f64,
}

/// Occupation-identity check: for each bin, compare the direct occupation
/// time of the path with the level-summed local-time estimate, the bin being
/// subdivided into cells of width `2 * bandwidth`.
pub fn occupation_check(
    path: &GridPath,
    bins: &[(f64, f64)],
    bandwidth: f64,
) -> Result<OccupationReport> {
    check_bandwidth(bandwidth)?;
    if bins.is_empty() {
        return Err(Error::InvalidParameter("bins must be non-empty".into()));
    }
    let (lo_k, hi_k) = path.window();
    let mut per_bin = Vec::with_capacity(bins.len());
    let mut max_rel: f64 = 0.0;
    for &(lo, hi) in bins {
        if !(hi > lo) {
            return Err(Error::InvalidParameter("empty bin".into()));
        }
        let mut occupation = 0.0;
        for k in lo_k..=hi_k {
            if k == 0 {
                continue;
            }
            let b = path.value(k);
            if b > lo && b <= hi {
                occupation += path.dt();
            }
        }
        let cells = ((hi - lo) / (2.0 * bandwidth)).ceil().max(1.0) as usize;
        let width = (hi - lo) / cells as f64;
        let mut level_sum = 0.0;
        for j in 0..cells {
            let center = lo + (j as f64 + 0.5) * width;
            let ell = local_time_at(path, center, bandwidth)?;
            level_sum += (ell.cum_at(hi_k) - ell.cum_at(lo_k)) * width;
        }
        let denom = occupation.max(level_sum);
        let rel = if denom == 0.0 {
            0.0
        } else {
            (occupation - level_sum).abs() / denom
        };
        max_rel = max_rel.max(rel);
        per_bin.push(BinResidual { lo, hi, occupation, level_sum, rel_residual: rel });
    }
    Ok(OccupationReport { max_rel_residual: max_rel, per_bin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_engine::simulate_two_sided;

    fn build_path(dt: f64, neg: usize, values: Vec<f64>) -> GridPath {
        GridPath::from_values(dt, neg, values).unwrap()
    }

    fn ramp_path(dt: f64, t_max: f64) -> GridPath {
        let n = (t_max / dt).round() as usize;
        let values: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        build_path(dt, 0, values)
    }

    #[test]
    fn constant_path_far_from_zero_has_zero_local_time() {
        let p = build_path(0.01, 0, vec![5.0; 101]);
        let ell = local_time_zero(&p, 0.1).unwrap();
        assert_eq!(ell.cum_at(100), 0.0);
    }

    #[test]
    fn ramp_occupation_matches_closed_form() {
        // B_t = t on [0,1], eps = 0.25: time within [-eps, eps] is 0.25,
        // so the estimate at t = 1 is 0.25 / (2 * 0.25) = 0.5.
        let dt = 1e-4;
        let p = ramp_path(dt, 1.0);
        let ell = local_time_zero(&p, 0.25).unwrap();
        let end = p.window().1;
        assert!((ell.cum_at(end) - 0.5).abs() < 2.0 * dt / 0.5);
    }

    #[test]
    fn ramp_level_occupation_window() {
        // Level x = 0.5, eps = 0.25: mass accrues only for t in [0.25, 0.75].
        let dt = 1e-4;
        let p = ramp_path(dt, 1.0);
        let ell = local_time_at(&p, 0.5, 0.25).unwrap();
        let idx = |t: f64| (t / dt).round() as i64;
        assert_eq!(ell.cum_at(idx(0.2)), 0.0);
        assert!(ell.cum_at(idx(0.3)) > 0.0);
        let total = ell.cum_at(idx(1.0));
        assert!((total - 1.0).abs() < 3.0 * dt / 0.5, "total {total}");
        assert_eq!(ell.cum_at(idx(1.0)), ell.cum_at(idx(0.8)));
    }

    #[test]
    fn local_time_at_zero_matches_local_time_zero() {
        let p = simulate_two_sided(0.001, 1.0, 1.0, 21, 0).unwrap();
        let a = local_time_zero(&p, 0.03).unwrap();
        let b = local_time_at(&p, 0.0, 0.03).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn translation_covariance_is_exact() {
        let p = simulate_two_sided(0.001, 1.0, 1.0, 22, 5).unwrap();
        for x in [0.5, -1.25, 2.0] {
            let lhs = local_time_at(&p.start_at(x), x, 0.03).unwrap();
            let rhs = local_time_zero(&p, 0.03).unwrap();
            assert_eq!(lhs, rhs, "x = {x}");
        }
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let p = simulate_two_sided(0.01, 0.1, 0.0, 1, 0).unwrap();
        assert!(local_time_zero(&p, 0.0).is_err());
        assert!(local_time_zero(&p, -1.0).is_err());
    }

    #[test]
    fn single_atom_functional_equals_local_time_at() {
        let p = simulate_two_sided(0.001, 1.0, 0.5, 23, 0).unwrap();
        let nu = TargetMeasure::dirac(1.0);
        let a = additive_functional(&p, &nu, 0.03).unwrap();
        let b = local_time_at(&p, 1.0, 0.03).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_atom_functional_on_ramp() {
        // nu = 1/2 delta_{-1} + 1/2 delta_{0.5} on the ramp B_t = t over [0, 1]:
        // only the second atom accrues, half a unit of occupation each side.
        let dt = 1e-4;
        let p = ramp_path(dt, 1.0);
        let nu = TargetMeasure::new(vec![(-1.0, 0.5), (0.5, 0.5)], None).unwrap();
        let got = additive_functional(&p, &nu, 0.25).unwrap();
        let want = local_time_at(&p, 0.5, 0.25).unwrap();
        let end = p.window().1;
        assert!((got.cum_at(end) - 0.5 * want.cum_at(end)).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_on_ramp_integrates_exactly() {
        // nu = Uniform[1, 2] density on B_t = t over [0, 2]:
        // integral of h(B_s) ds over [0, 2] is 1.
        let dt = 1e-4;
        let p = ramp_path(dt, 2.0);
        let nu = TargetMeasure::new(
            vec![],
            Some(DensityComponent { kind: DensityKind::Uniform { lo: 1.0, hi: 2.0 }, weight: 1.0 }),
        )
        .unwrap();
        let ell = additive_functional(&p, &nu, 0.1).unwrap();
        let end = p.window().1;
        assert!((ell.cum_at(end) - 1.0).abs() < 3.0 * dt, "{}", ell.cum_at(end));
    }

    #[test]
    fn linearity_of_additive_functional() {
        let p = simulate_two_sided(0.001, 1.0, 1.0, 31, 2).unwrap();
        let eps = 0.03;
        let alpha = 0.25;
        let nu1 = TargetMeasure::dirac(1.0);
        let nu2 = TargetMeasure::dirac(-0.5);
        let mix = TargetMeasure::new(vec![(1.0, alpha), (-0.5, 1.0 - alpha)], None).unwrap();
        let a = additive_functional(&p, &nu1, eps).unwrap();
        let b = additive_functional(&p, &nu2, eps).unwrap();
        let m = additive_functional(&p, &mix, eps).unwrap();
        let (lo, hi) = p.window();
        for k in [lo, -5, 0, 5, hi] {
            let combined = alpha * a.cum_at(k) + (1.0 - alpha) * b.cum_at(k);
            assert!((m.cum_at(k) - combined).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_target() {
        assert!(TargetMeasure::new(vec![], None).is_err());
        assert!(TargetMeasure::new(vec![(1.0, 0.7), (1.0, 0.3)], None).is_err());
        assert!(TargetMeasure::new(vec![(1.0, 1.5)], None).is_err());
    }

    #[test]
    fn sub_probability_flagged() {
        let nu = TargetMeasure::new(vec![(1.0, 0.5)], None).unwrap();
        assert!(nu.is_sub_probability());
        assert!(!TargetMeasure::dirac(1.0).is_sub_probability());
    }

    #[test]
    fn parse_inline_measure_spec() {
        let nu = TargetMeasure::parse("atoms:-1=0.25,2=0.25;density:uniform,0,1,0.5").unwrap();
        assert_eq!(nu.atoms(), &[(-1.0, 0.25), (2.0, 0.25)]);
        assert!((nu.total() - 1.0).abs() < 1e-12);
        assert!(TargetMeasure::parse("atoms:1=2.0").is_err());
        assert!(TargetMeasure::parse("garbage").is_err());
    }

    #[test]
    fn occupation_check_constant_path_is_exact() {
        // 0.45 sits in the interior of one level cell, so the direct
        // occupation and the level sum agree to rounding.
        let p = build_path(0.01, 0, vec![0.45; 200]);
        let report = occupation_check(&p, &[(0.0, 1.0)], 0.1).unwrap();
        assert!(report.max_rel_residual < 1e-12);
    }

    #[test]
    fn occupation_check_ramp_residual_shrinks() {
        let bins = [(0.0, 0.5), (0.5, 1.0)];
        let coarse = occupation_check(&ramp_path(1e-2, 1.0), &bins, 0.1).unwrap();
        let fine = occupation_check(&ramp_path(1e-4, 1.0), &bins, 0.01).unwrap();
        assert!(fine.max_rel_residual < coarse.max_rel_residual);
        assert!(fine.max_rel_residual < 0.03, "{}", fine.max_rel_residual);
    }

    #[test]
    fn monotone_and_zero_at_origin() {
        let p = simulate_two_sided(0.001, 1.0, 1.0, 77, 0).unwrap();
        let ell = local_time_zero(&p, 0.03).unwrap();
        assert_eq!(ell.cum_at(0), 0.0);
        let c = ell.cum();
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn cumulative_validation_rejects_bad_input() {
        assert!(CumulativeMeasure::from_cum(0.1, 1, 1, vec![0.0, 0.1, 0.2]).is_err());
        assert!(CumulativeMeasure::from_cum(0.1, 1, 1, vec![-0.1, 0.0, -0.2]).is_err());
        assert!(CumulativeMeasure::from_cum(0.1, 1, 1, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn brownian_mean_local_time_near_closed_form() {
        // For Brownian motion the box-kernel estimate over [0, 1] has mean
        // about sqrt(2/pi) - eps/2; check it with a fixed-seed Monte Carlo
        // average against a 3-sigma band.
        let dt = 1e-3_f64;
        let eps = dt.sqrt();
        let n = 300;
        let mut sum = 0.0;
        for r in 0..n {
            let p = simulate_two_sided(dt, 1.0, 0.0, 404, r).unwrap();
            let ell = local_time_zero(&p, eps).unwrap();
            sum += ell.cum_at(p.window().1);
        }
        let mean = sum / n as f64;
        let expected = (2.0 / std::f64::consts::PI).sqrt() - eps / 2.0;
        let sd = (1.0 - 2.0 / std::f64::consts::PI).sqrt();
        let band = 3.0 * sd / (n as f64).sqrt();
        assert!((mean - expected).abs() < band, "mean {mean}, expected {expected}, band {band}");
    }

    #[test]
    fn fixture_path_builder_round_trips() {
        let p = build_path(0.5, 1, vec![3.0, 0.0, -1.0]);
        assert_eq!(p.window(), (-1, 1));
        assert_eq!(p.value(-1), 3.0);
        assert_eq!(p.value(1), -1.0);
    }
}
