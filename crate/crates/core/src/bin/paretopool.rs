use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paretopool::experiments::{resolve_threads, run, Command, Params, RunConfig, THREADS_ENV};

/// Monte Carlo experiments on pooled Pareto losses.
#[derive(Debug, Parser)]
#[command(name = "paretopool", version)]
struct Cli {
    /// Flat key=value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// DKW confidence level.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: PARETOPOOL_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Model parameter, e.g. `--set alpha=0.8`. Repeatable.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// VaR of averages of n Pareto losses.
    Figure1,
    /// VaR of a sum of GPD lines against the sum of their VaRs.
    Figure4,
    /// Dominance check for model A, B, collective or tail.
    Dominance {
        #[arg(long)]
        model: Option<String>,
    },
    /// Solve a market described by a key=value spec file.
    Equilibrium { spec: PathBuf },
    /// Comonotonic against independent sums of two loss files.
    Empirics {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long)]
        scale1: Option<f64>,
    },
    /// Hill plot of one loss file.
    Hill {
        file: PathBuf,
        #[arg(long)]
        column: Option<String>,
        #[arg(long)]
        scale: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> paretopool::Result<i32> {
    let mut params = match &cli.config {
        Some(path) => Params::from_file(path)?,
        None => Params::new(),
    };
    for s in &cli.set {
        params.insert_assignment(s)?;
    }
    let command = match cli.command {
        Cmd::Figure1 => Command::Figure1,
        Cmd::Figure4 => Command::Figure4,
        Cmd::Dominance { model } => {
            if let Some(m) = model {
                params.insert("model", m);
            }
            Command::Dominance
        }
        Cmd::Equilibrium { spec } => Command::Equilibrium { spec },
        Cmd::Empirics { file1, file2, scale1 } => {
            if let Some(s) = scale1 {
                params.insert("scale1", s);
            }
            Command::Empirics { file1, file2 }
        }
        Cmd::Hill { file, column, scale } => {
            if let Some(c) = column {
                params.insert("column", c);
            }
            if let Some(s) = scale {
                params.insert("scale", s);
            }
            Command::Hill { file }
        }
    };

    let mut cfg = RunConfig::default();
    cfg.apply(&params)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.paths {
        cfg.paths = p;
    }
    if let Some(d) = cli.delta {
        cfg.delta = d;
    }
    if let Some(o) = cli.out {
        cfg.output_dir = o;
    }
    let config_threads = params
        .remove("threads")
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| paretopool::Error::Invalid(format!("key `threads`: cannot parse `{v}`")))
        })
        .transpose()?;
    for key in ["seed", "paths", "delta", "out"] {
        params.remove(key);
    }

    let env = std::env::var(THREADS_ENV).ok();
    if let Some(n) = resolve_threads(cli.threads.or(config_threads), env.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| paretopool::Error::Invalid(format!("thread pool: {e}")))?;
    }
    run(&command, &cfg, &params, &mut std::io::stdout())
}
