use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heston_american_cli::commands::{self, Output};
use heston_american_cli::{exit, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(name = "heston-american", version, about = "American options under Heston stochastic volatility")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `section.key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.path`; stdout when neither is set.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and print the price.
    Price,
    /// Price a grid of maturities and spots.
    Benchmark {
        /// Comma-separated maturities; empty for none.
        #[arg(long, value_parser = parse_list)]
        maturities: Option<List>,
        /// Comma-separated spots; empty for none.
        #[arg(long, value_parser = parse_list)]
        spots: Option<List>,
    },
    /// Estimate and write the exercise boundary as JSON.
    Boundary {
        /// Also write the per-date point cloud as CSV.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Dump simulated paths as CSV.
    Simulate {
        /// Allow dumps above the default size limit.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone)]
struct List(Vec<f64>);

fn parse_list(s: &str) -> Result<List, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

fn emit(out: &Output, path: Option<&PathBuf>) -> std::io::Result<()> {
    for d in &out.diagnostics {
        eprintln!("{d}");
    }
    for (p, text) in &out.side_files {
        std::fs::write(p, text)?;
    }
    match path {
        Some(p) => std::fs::write(p, &out.body),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(out.body.as_bytes())?;
            stdout.flush()
        }
    }
}

fn run(cli: Cli) -> i32 {
    let g = cli.global;
    let Some(config_path) = g.config else {
        eprintln!("error: --config PATH is required");
        return exit::CONFIG;
    };
    let mut cfg = match RunConfig::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return exit::CONFIG;
        }
    };
    if let Some(seed) = g.seed {
        cfg.sim.seed = seed;
    }
    if let Some(f) = g.format {
        cfg.format = f;
    }
    if g.output.is_some() {
        cfg.output = g.output;
    }
    if let Some(n) = g.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }

    let kind = cfg.params.option.kind();
    let result = match cli.command {
        Command::Price => commands::cmd_price(&cfg),
        Command::Benchmark { maturities, spots } => {
            let ts = maturities.map_or_else(|| commands::DEFAULT_MATURITIES.to_vec(), |l| l.0);
            let ss = spots.map_or_else(|| commands::DEFAULT_SPOTS.to_vec(), |l| l.0);
            let grid: Vec<(f64, f64)> = ts.iter().flat_map(|&t| ss.iter().map(move |&s| (t, s))).collect();
            commands::cmd_benchmark(&cfg, &grid)
        }
        Command::Boundary { cloud } => commands::cmd_boundary(&cfg, cloud.as_deref()),
        Command::Simulate { force } => commands::cmd_simulate(&cfg, force),
    };
    match result {
        Ok(out) => match emit(&out, cfg.output.as_ref()) {
            Ok(()) => exit::OK,
            Err(e) => {
                eprintln!("error: writing output: {e}");
                exit::NUMERICAL
            }
        },
        Err(e) => {
            eprintln!("error: {}", commands::describe(&e, kind));
            commands::exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    let code = run(Cli::parse());
    ExitCode::from(code as u8)
}
