//! Command-line harness for the simulation library: run shift constructions
//! at scale, verify allocation invariants, estimate tail exponents, and
//! exercise the exact matching oracle.
//!
//! Exit codes: 0 all selected tests pass, 1 a test failed, 2 configuration
//! error, 3 runtime error.

mod config;
mod embed;
mod oracle;
mod tails;
mod verify;

use clap::Parser;

use config::{CliResult, EXIT_PASS, EXIT_TEST_FAILURE};

#[derive(Parser, Debug)]
#[command(name = "brownshift", version, about = "Balancing-allocation shift simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand, Debug)]
enum Command {
    /// Run a shift construction and test the landing law.
    Embed(embed::EmbedArgs),
    /// Check structural invariants of the balance rule on simulated paths.
    Verify(verify::VerifyArgs),
    /// Estimate tail exponents of the matching time and its local time.
    Tails(tails::TailsArgs),
    /// Exact checks of the discrete matching oracle.
    MatchOracle(oracle::OracleArgs),
}

fn main() {
    let cli = Cli::parse();
    let result: CliResult<bool> = match &cli.command {
        Command::Embed(args) => embed::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Tails(args) => tails::run(args),
        Command::MatchOracle(args) => oracle::run(args),
    };
    let code = match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_TEST_FAILURE,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
