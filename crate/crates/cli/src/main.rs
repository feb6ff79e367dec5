use std::path::PathBuf;
use std::process::ExitCode;

use appsentry::{parse_rules, run_corpus, run_scan, ScanConfig, EXIT_ERROR};
use appsentry_core::catalog::Severity;
use appsentry_core::report::Format;
use appsentry_core::rules::RuleId;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "appsentry", version, about = "Static security checks for packaged HTML5/JS apps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Scan one package (directory or zip archive).
    Scan { path: PathBuf },
    /// Scan every package in a directory and print findings and statistics.
    Corpus { dir: PathBuf },
    /// Like `corpus`, but print statistics only.
    Stats { dir: PathBuf },
}

#[derive(Args)]
struct Opts {
    /// Output format: text or json.
    #[arg(long, global = true, env = "SENTRY_FORMAT", default_value = "text")]
    format: Format,
    /// Comma-separated rules to run; empty runs none.
    #[arg(long, global = true, env = "SENTRY_RULES")]
    rules: Option<String>,
    /// Catalog file merged over the built-in sources, sinks and filters.
    #[arg(long, global = true, env = "SENTRY_CATALOG")]
    catalog: Option<PathBuf>,
    /// Permission-to-API map replacing the built-in one.
    #[arg(long, global = true, env = "SENTRY_PERMISSION_MAP")]
    permission_map: Option<PathBuf>,
    /// Lowest severity that makes the exit code 1.
    #[arg(long, global = true, env = "SENTRY_THRESHOLD", default_value = "warning")]
    threshold: Severity,
    /// Worker threads for corpus scans.
    #[arg(long, global = true, env = "SENTRY_PARALLELISM", value_parser = clap::value_parser!(u32).range(1..))]
    parallelism: Option<u32>,
    /// Only count literal `addEventListener("message", ...)` registrations.
    #[arg(long, global = true, env = "SENTRY_PAPER_STRICT")]
    paper_strict: bool,
    /// Call-string depth of the interprocedural analysis.
    #[arg(long, global = true, env = "SENTRY_CONTEXT_DEPTH", default_value_t = 1)]
    context_depth: usize,
}

fn config(o: Opts) -> anyhow::Result<ScanConfig> {
    let rules = match &o.rules {
        Some(s) => parse_rules(s)?,
        None => RuleId::ALL.to_vec(),
    };
    let parallelism = match o.parallelism {
        Some(p) => p as usize,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(ScanConfig {
        rules,
        catalog: o.catalog,
        permission_map: o.permission_map,
        format: o.format,
        threshold: o.threshold,
        parallelism,
        paper_strict: o.paper_strict,
        context_depth: o.context_depth,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let result = config(cli.opts).and_then(|cfg| match &cli.command {
        Command::Scan { path } => run_scan(path, &cfg),
        Command::Corpus { dir } => run_corpus(dir, &cfg, false),
        Command::Stats { dir } => run_corpus(dir, &cfg, true),
    });
    match result {
        Ok(out) => {
            print!("{}", out.output);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
