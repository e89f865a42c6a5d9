use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mlmi::bench::{run_benchmark, write_report, BenchConfig, LPolicy, OutputFormat, TableKind};
use mlmi::fast_eval::CorrectionStrategy;
use mlmi::transfer_params::ParamConfig;

#[derive(Debug, Parser)]
#[command(name = "mlmi-bench", about = "Error and work tables of the fast evaluation")]
struct Args {
    #[arg(long, default_value_t = 5)]
    kmin: u32,
    #[arg(long, default_value_t = 8)]
    kmax: u32,
    /// Coarse levels to run: `all` or `half`.
    #[arg(long, default_value = "all")]
    lpolicy: LPolicy,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    ca: f64,
    #[arg(long, default_value = "multilevel")]
    strategy: CorrectionStrategy,
    /// `csv` or `md`.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// `params`, `err`, `inc`, `work` or `all`.
    #[arg(long, default_value = "all")]
    table: String,
}

fn tables(name: &str) -> Result<Vec<TableKind>, mlmi::Error> {
    if name == "all" {
        return Ok(TableKind::ALL.to_vec());
    }
    Ok(vec![name.parse()?])
}

fn run(args: Args) -> mlmi::Result<()> {
    let cfg = BenchConfig {
        k_min: args.kmin,
        k_max: args.kmax,
        l_policy: args.lpolicy,
        params: ParamConfig { c_a: args.ca },
        strategy: args.strategy,
        format: args.format,
        out_dir: args.out,
        tables: tables(&args.table)?,
    };
    let report = run_benchmark(&cfg)?;
    for s in &report.skipped {
        eprintln!("skipped K={} L={}: {}", s.k, s.l, s.reason);
    }
    for path in write_report(&report, &cfg.out_dir, cfg.format)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlmi-bench: {e}");
            ExitCode::FAILURE
        }
    }
}
