//! `match-oracle`: exhaustive exact checks of the discrete matching rule on
//! seeded random point configurations, plus agreement between the integer
//! oracle and the continuum balancing scan on embedded measures.

use brownshift::allocation::{balance_forward, BalanceResult};
use brownshift::point_matching::{match_forward, to_cumulative, verify_exact, PointConfig};
use serde::Serialize;

use crate::config::{config_hash, out_dir, write_summary, CliError, CliResult};

#[derive(clap::Args, Debug, Serialize)]
pub struct OracleArgs {
    /// Number of random configurations.
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum points per side.
    #[arg(long, default_value_t = 20)]
    pub max_points: usize,
    /// Positions are drawn from [-span, span].
    #[arg(long, default_value_t = 50)]
    pub span: i64,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Additionally check that a deliberately wrong matching is rejected.
    #[arg(long, default_value_t = false)]
    pub adversarial: bool,
}

#[derive(Serialize)]
struct Summary {
    config_hash: String,
    configs: u64,
    exact_failures: u64,
    continuum_disagreements: u64,
    adversarial_checked: bool,
    pass: bool,
}

pub fn run(args: &OracleArgs) -> CliResult<bool> {
    let hash = config_hash(args)?;
    let dir = out_dir(&args.out)?;
    let mut exact_failures = 0u64;
    let mut continuum_disagreements = 0u64;
    for i in 0..args.n {
        let cfg = PointConfig::random(args.seed.wrapping_add(i), args.max_points, args.span);
        let report = verify_exact(&cfg, None)?;
        if !report.exact {
            exact_failures += 1;
            continue;
        }
        if cfg.xi.is_empty() && cfg.eta.is_empty() {
            continue;
        }
        let (xi, eta) = to_cumulative(&cfg)?;
        for &s in &cfg.xi {
            let oracle = match_forward(&cfg, s);
            let scan = balance_forward(&xi, &eta, s - 1, 0.0)?;
            let agree = match (oracle, scan) {
                (Some(t), BalanceResult::Matched { at }) => t == at,
                (None, BalanceResult::Censored { .. }) => true,
                _ => false,
            };
            if !agree {
                continuum_disagreements += 1;
            }
        }
    }

    let mut pass = exact_failures == 0 && continuum_disagreements == 0;
    if args.adversarial {
        // A crossing assignment on a nested configuration must be rejected.
        let cfg = PointConfig::new(vec![0, 1], vec![2, 3])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let rejected = !verify_exact(&cfg, Some(&[(0, 2), (1, 3)]))?.exact;
        if !rejected {
            pass = false;
        }
        println!(
            "match-oracle/adversarial: {}",
            if rejected { "pass" } else { "FAIL" }
        );
    }
    println!(
        "match-oracle: {} ({} configs, {} exact failures, {} continuum disagreements)",
        if pass { "pass" } else { "FAIL" },
        args.n,
        exact_failures,
        continuum_disagreements
    );
    let summary = Summary {
        config_hash: hash.clone(),
        configs: args.n,
        exact_failures,
        continuum_disagreements,
        adversarial_checked: args.adversarial,
        pass,
    };
    write_summary(&dir.join(format!("match-oracle-{hash}-summary.json")), &summary)?;
    Ok(pass)
}
