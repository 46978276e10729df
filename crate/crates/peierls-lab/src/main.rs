use clap::Parser;
use peierls_lab::cli::{list, run, RunOptions};
use std::path::PathBuf;

/// Run verification suites described by a TOML experiment file.
#[derive(Parser, Debug)]
#[command(name = "peierls-lab", version)]
struct Args {
    /// Experiment configuration (TOML).
    #[arg(required_unless_present = "list")]
    config: Option<PathBuf>,
    /// Suite to run; repeat to select several. Defaults to the config selection, then all.
    #[arg(long = "suite", value_name = "NAME")]
    suites: Vec<String>,
    /// Output directory for result envelopes.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// List the suites and exit.
    #[arg(long)]
    list: bool,
}

fn main() {
    let args = Args::parse();
    if args.list {
        print!("{}", list());
        return;
    }
    let opts = RunOptions {
        config: args.config.expect("clap enforces the config path"),
        suites: args.suites,
        out: args.out,
        seed: args.seed,
    };
    std::process::exit(run(&opts));
}
