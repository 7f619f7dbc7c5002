//! `tails`: sample the matching time `T` and the local time `S = 2 l0[0,T]`
//! over many replicates with the streaming sampler, estimate their tail
//! exponents, and probe moment divergence. A synthetic self-test mode checks
//! the estimator against exact power laws without any simulation.

use std::io::Write;

use brownshift::measures::TargetMeasure;
use brownshift::shifts::bertoin_le_jan_tail_sample;
use brownshift::stats::{moment_growth, tail_slope, GrowthVerdict, TailValue};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_hash, out_dir, write_summary, CliError, CliResult, SimArgs};

#[derive(clap::Args, Debug, Serialize)]
pub struct TailsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// Target measure for the first-crossing construction.
    #[arg(long, default_value = "atoms:1=1")]
    pub nu: String,
    /// Expected slope window for T, as "lo,hi".
    #[arg(long, default_value = "-0.35,-0.15")]
    pub t_slope_range: String,
    /// Expected slope window for S, as "lo,hi".
    #[arg(long, default_value = "-0.62,-0.38")]
    pub s_slope_range: String,
    /// Skip simulation and validate the estimator on exact Pareto samples.
    #[arg(long, default_value_t = false)]
    pub pareto_self_test: bool,
}

#[derive(Serialize)]
struct Record {
    config_hash: String,
    replicate: u64,
    censored: bool,
    t: f64,
    s: f64,
}

#[derive(Serialize)]
struct Summary {
    config_hash: String,
    n: u64,
    censored_frac: f64,
    t_tail: brownshift::stats::TailReport,
    s_tail: brownshift::stats::TailReport,
    t_moment_low: brownshift::stats::GrowthReport,
    t_moment_high: brownshift::stats::GrowthReport,
    pass: bool,
}

fn parse_range(s: &str) -> CliResult<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| CliError::Config(format!("bad range: {s}")))?;
    let lo: f64 = a.trim().parse().map_err(|_| CliError::Config(format!("bad range: {s}")))?;
    let hi: f64 = b.trim().parse().map_err(|_| CliError::Config(format!("bad range: {s}")))?;
    if lo >= hi {
        return Err(CliError::Config(format!("empty range: {s}")));
    }
    Ok((lo, hi))
}

pub fn run(args: &TailsArgs) -> CliResult<bool> {
    if args.pareto_self_test {
        return self_test(args);
    }
    let nu = TargetMeasure::parse(&args.nu).map_err(|e| CliError::Config(e.to_string()))?;
    let t_range = parse_range(&args.t_slope_range)?;
    let s_range = parse_range(&args.s_slope_range)?;
    let cfg = args.sim.shift_config()?;
    let hash = config_hash(args)?;
    let dir = out_dir(&args.sim.out)?;

    let samples: Vec<brownshift::shifts::TailSample> = (0..args.sim.n)
        .into_par_iter()
        .map(|r| bertoin_le_jan_tail_sample(&nu, &cfg, args.sim.seed, r))
        .collect::<std::result::Result<Vec<_>, brownshift::Error>>()
        .map_err(CliError::from)?;

    let jsonl_path = dir.join(format!("tails-{hash}.jsonl"));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&jsonl_path)?);
    for (r, s) in samples.iter().enumerate() {
        let rec = Record {
            config_hash: hash.clone(),
            replicate: r as u64,
            censored: s.t_index.is_none(),
            t: s.t_index.map_or(cfg.max_horizon, |k| k as f64 * cfg.dt),
            s: 2.0 * s.ell0,
        };
        serde_json::to_writer(&mut w, &rec)
            .map_err(|e| CliError::Runtime(format!("record write: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let t_sample: Vec<TailValue> = samples
        .iter()
        .map(|s| match s.t_index {
            Some(k) => TailValue::observed(k as f64 * cfg.dt),
            None => TailValue::lower_bound(cfg.max_horizon),
        })
        .collect();
    let s_sample: Vec<TailValue> = samples
        .iter()
        .map(|s| {
            let v = 2.0 * s.ell0;
            if s.t_index.is_some() {
                TailValue::observed(v)
            } else {
                TailValue::lower_bound(v)
            }
        })
        .collect();
    let censored_frac =
        samples.iter().filter(|s| s.t_index.is_none()).count() as f64 / samples.len() as f64;

    let t_tail = tail_slope(&t_sample, (0.8, 0.99), 200, args.sim.seed ^ 0x7a11)?;
    let s_tail = tail_slope(&s_sample, (0.8, 0.99), 200, args.sim.seed ^ 0x5711)?;
    // Moment probes use censored values at their lower bounds, which only
    // understates growth.
    let t_values: Vec<f64> = t_sample.iter().map(|v| v.value).collect();
    let t_moment_low = moment_growth(&t_values, 0.125)?;
    let t_moment_high = moment_growth(&t_values, 0.3)?;

    write_survival_csv(&dir.join(format!("tails-{hash}-survival-t.csv")), &t_values)?;
    let s_values: Vec<f64> = s_sample.iter().map(|v| v.value).collect();
    write_survival_csv(&dir.join(format!("tails-{hash}-survival-s.csv")), &s_values)?;

    let t_ok = t_range.0 <= t_tail.slope && t_tail.slope <= t_range.1;
    let s_ok = s_range.0 <= s_tail.slope && s_tail.slope <= s_range.1;
    let m_ok = t_moment_low.verdict == GrowthVerdict::Flattening
        && t_moment_high.verdict == GrowthVerdict::Growing;
    let pass = t_ok && s_ok && m_ok;

    println!(
        "tails/T_slope: {} (slope {:.3}, range [{:.2}, {:.2}], censored {:.3})",
        if t_ok { "pass" } else { "FAIL" },
        t_tail.slope,
        t_range.0,
        t_range.1,
        censored_frac
    );
    println!(
        "tails/S_slope: {} (slope {:.3}, range [{:.2}, {:.2}])",
        if s_ok { "pass" } else { "FAIL" },
        s_tail.slope,
        s_range.0,
        s_range.1
    );
    println!(
        "tails/T_moments: {} (beta 0.125 {:?}, beta 0.3 {:?})",
        if m_ok { "pass" } else { "FAIL" },
        t_moment_low.verdict,
        t_moment_high.verdict
    );

    let summary = Summary {
        config_hash: hash.clone(),
        n: args.sim.n,
        censored_frac,
        t_tail,
        s_tail,
        t_moment_low,
        t_moment_high,
        pass,
    };
    write_summary(&dir.join(format!("tails-{hash}-summary.json")), &summary)?;
    Ok(pass)
}

fn write_survival_csv(path: &std::path::Path, values: &[f64]) -> CliResult<()> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,survival")?;
    for (i, v) in sorted.iter().enumerate() {
        writeln!(w, "{},{}", v, (n - i) as f64 / n as f64)?;
    }
    Ok(())
}

/// Validate the slope estimator on exact Pareto laws: `1/U^2` has survival
/// exponent -1/2 and `1/U^4` has -1/4.
fn self_test(args: &TailsArgs) -> CliResult<bool> {
    use rand::{Rng, SeedableRng};
    let n = (args.sim.n as usize).max(5000);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.sim.seed);
    let us: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let half: Vec<TailValue> =
        us.iter().map(|u| TailValue::observed(1.0 / (u * u))).collect();
    let quarter: Vec<TailValue> =
        us.iter().map(|u| TailValue::observed(1.0 / u.powi(4))).collect();
    let r_half = tail_slope(&half, (0.8, 0.99), 200, args.sim.seed)?;
    let r_quarter = tail_slope(&quarter, (0.8, 0.99), 200, args.sim.seed)?;
    let ok_half = (r_half.slope + 0.5).abs() < 0.05;
    let ok_quarter = (r_quarter.slope + 0.25).abs() < 0.03;
    println!(
        "tails/self_test_half: {} (slope {:.3})",
        if ok_half { "pass" } else { "FAIL" },
        r_half.slope
    );
    println!(
        "tails/self_test_quarter: {} (slope {:.3})",
        if ok_quarter { "pass" } else { "FAIL" },
        r_quarter.slope
    );
    Ok(ok_half && ok_quarter)
}
