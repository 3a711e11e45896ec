//! Subcommand bodies. Each returns its primary output as a string so the
//! caller decides where it goes; nothing here touches stdout.

use std::fmt::Write as _;

use serde::Serialize;

use heston_american::{
    binomial_american, simulate_paths, BoundaryPointCloud, CriticalPrice, Error, Measure, OptionKind,
    PriceResult, SimGrid,
};

use crate::config::{OutputFormat, RunConfig};
use crate::pipeline::{self, Inputs};

/// Lattice depth for the constant-volatility oracle column.
pub const ORACLE_LEVELS: usize = 2000;
pub const DEFAULT_MATURITIES: [f64; 3] = [0.02, 0.08, 0.15];
pub const DEFAULT_SPOTS: [f64; 4] = [80.0, 90.0, 100.0, 120.0];
pub const BENCH_HEADER: &str = "T,S,lsm_price,lsm_stderr,semi_analytic_price,oracle_price,abs_diff";

/// Outcome of a subcommand: the primary document and any diagnostics that
/// belong on stderr.
#[derive(Debug, Default)]
pub struct Output {
    pub body: String,
    pub side_files: Vec<(std::path::PathBuf, String)>,
    pub diagnostics: Vec<String>,
}

fn inputs(cfg: &RunConfig) -> Inputs<'_> {
    Inputs {
        model: &cfg.params.model,
        market: &cfg.params.market,
        option: &cfg.params.option,
        spot: cfg.spot,
        sim: cfg.sim,
        quad: &cfg.quad,
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceReport {
    /// Semi-analytic price for calls, least-squares price for puts.
    pub price: f64,
    pub european: Option<f64>,
    pub premium: Option<f64>,
    pub lsm_price: f64,
    pub lsm_stderr: f64,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn price_report(cfg: &RunConfig) -> Result<PriceReport, Error> {
    let run = pipeline::run(&inputs(cfg))?;
    let mut notes = Vec::new();
    let report = match run.price {
        Some(PriceResult {
            price,
            european_part,
            premium_part,
            ..
        }) => {
            if cfg.params.market.q() == 0.0 {
                notes.push("European-equivalent: no early exercise for a call without dividends".into());
            }
            PriceReport {
                price,
                european: Some(european_part),
                premium: Some(premium_part),
                lsm_price: run.lsm.price,
                lsm_stderr: run.lsm.stderr,
                notes,
                warnings: run.warnings,
            }
        }
        None => {
            notes.push("semi-analytic: unavailable for puts".into());
            PriceReport {
                price: run.lsm.price,
                european: None,
                premium: None,
                lsm_price: run.lsm.price,
                lsm_stderr: run.lsm.stderr,
                notes,
                warnings: run.warnings,
            }
        }
    };
    Ok(report)
}

pub fn cmd_price(cfg: &RunConfig) -> Result<Output, Error> {
    let r = price_report(cfg)?;
    let body = match cfg.format {
        OutputFormat::Json => json(&r)?,
        OutputFormat::Csv => format!(
            "price,european,premium,lsm_price,lsm_stderr,notes,warnings\n{},{},{},{},{},{},{}\n",
            r.price,
            fmt_opt(r.european),
            fmt_opt(r.premium),
            r.lsm_price,
            r.lsm_stderr,
            csv_escape(&r.notes.join("; ")),
            csv_escape(&r.warnings.join("; ")),
        ),
    };
    Ok(Output {
        body,
        ..Default::default()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    #[serde(rename = "T")]
    pub maturity: f64,
    #[serde(rename = "S")]
    pub spot: f64,
    pub lsm_price: Option<f64>,
    pub lsm_stderr: Option<f64>,
    pub semi_analytic_price: Option<f64>,
    pub oracle_price: Option<f64>,
    pub abs_diff: Option<f64>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    /// Paths in thousands and time steps, e.g. `100k x 50`.
    pub label: String,
    pub rows: Vec<BenchRow>,
}

pub fn default_grid() -> Vec<(f64, f64)> {
    DEFAULT_MATURITIES
        .iter()
        .flat_map(|&t| DEFAULT_SPOTS.iter().map(move |&s| (t, s)))
        .collect()
}

pub fn sim_label(n_paths: usize, n_steps: usize) -> String {
    if n_paths.is_multiple_of(1000) {
        format!("{}k x {}", n_paths / 1000, n_steps)
    } else {
        format!("{n_paths} x {n_steps}")
    }
}

fn bench_row(cfg: &RunConfig, maturity: f64, spot: f64) -> Result<BenchRow, Error> {
    let option = cfg.params.option.with_maturity(maturity)?;
    let mut inp = inputs(cfg);
    inp.option = &option;
    inp.spot = spot;
    let run = pipeline::run(&inp)?;
    let m = &cfg.params.model;
    let oracle_price = if m.xi() == 0.0 && m.v0() == m.theta() {
        Some(binomial_american(spot, m.theta().sqrt(), &option, &cfg.params.market, ORACLE_LEVELS)?)
    } else {
        None
    };
    let semi = run.price.as_ref().map(|p| p.price);
    Ok(BenchRow {
        maturity,
        spot,
        lsm_price: Some(run.lsm.price),
        lsm_stderr: Some(run.lsm.stderr),
        semi_analytic_price: semi,
        oracle_price,
        abs_diff: semi.map(|p| (run.lsm.price - p).abs()),
        error: None,
        warnings: run.warnings,
    })
}

/// One row per `(T, S)`; a failing row keeps its coordinates, leaves the
/// price fields empty and records the error.
pub fn benchmark_table(cfg: &RunConfig, grid: &[(f64, f64)]) -> BenchTable {
    let rows = grid
        .iter()
        .map(|&(t, s)| {
            bench_row(cfg, t, s).unwrap_or_else(|e| BenchRow {
                maturity: t,
                spot: s,
                lsm_price: None,
                lsm_stderr: None,
                semi_analytic_price: None,
                oracle_price: None,
                abs_diff: None,
                error: Some(e.to_string()),
                warnings: Vec::new(),
            })
        })
        .collect();
    BenchTable {
        label: sim_label(cfg.sim.n_paths, cfg.sim.n_steps),
        rows,
    }
}

pub fn bench_csv(table: &BenchTable) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.maturity,
            r.spot,
            fmt_opt(r.lsm_price),
            fmt_opt(r.lsm_stderr),
            fmt_opt(r.semi_analytic_price),
            fmt_opt(r.oracle_price),
            fmt_opt(r.abs_diff),
        );
    }
    out
}

pub fn cmd_benchmark(cfg: &RunConfig, grid: &[(f64, f64)]) -> Result<Output, Error> {
    let table = benchmark_table(cfg, grid);
    let mut diagnostics = vec![format!("paths x steps: {}", table.label)];
    for r in &table.rows {
        if let Some(e) = &r.error {
            diagnostics.push(format!("row T={} S={}: {e}", r.maturity, r.spot));
        }
        for w in &r.warnings {
            diagnostics.push(format!("row T={} S={}: warning: {w}", r.maturity, r.spot));
        }
    }
    let body = match cfg.format {
        OutputFormat::Csv => bench_csv(&table),
        OutputFormat::Json => json(&table)?,
    };
    Ok(Output {
        body,
        side_files: Vec::new(),
        diagnostics,
    })
}

pub fn cloud_csv(clouds: &[BoundaryPointCloud<f64>]) -> String {
    let mut out = String::from("step,tau,v_level,critical_price\n");
    for c in clouds {
        let mut rows: Vec<(f64, CriticalPrice<f64>)> =
            c.points.iter().map(|&(v, s)| (v, CriticalPrice::Bounded(s))).collect();
        rows.extend(c.unbounded_levels.iter().map(|&v| (v, CriticalPrice::Unbounded)));
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (v, cp) in rows {
            let s = match cp {
                CriticalPrice::Bounded(s) => s.to_string(),
                CriticalPrice::Unbounded => "unbounded".to_string(),
            };
            let _ = writeln!(out, "{},{},{},{}", c.step_index, c.tau, v, s);
        }
    }
    out
}

pub fn cmd_boundary(cfg: &RunConfig, cloud_path: Option<&std::path::Path>) -> Result<Output, Error> {
    let run = pipeline::run(&inputs(cfg))?;
    let boundary = run.boundary.ok_or(Error::NoExerciseRegion)?;
    let mut body = boundary.to_json()?;
    body.push('\n');
    let side_files = cloud_path
        .map(|p| vec![(p.to_path_buf(), cloud_csv(&run.clouds))])
        .unwrap_or_default();
    let diagnostics = run.warnings.iter().map(|w| format!("warning: {w}")).collect();
    Ok(Output {
        body,
        side_files,
        diagnostics,
    })
}

/// Largest path dump written without `--force`, in `(path, step)` rows.
pub const MAX_DUMP_ROWS: usize = 1_000_000;

pub fn cmd_simulate(cfg: &RunConfig, force: bool) -> Result<Output, Error> {
    let rows = cfg.sim.n_paths.saturating_mul(cfg.sim.n_steps + 1);
    if rows > MAX_DUMP_ROWS && !force {
        return Err(Error::Unsupported(format!(
            "path dump would have {rows} rows; pass --force to write more than {MAX_DUMP_ROWS}"
        )));
    }
    let grid = SimGrid::new(cfg.sim.n_paths, cfg.sim.n_steps, cfg.params.option.maturity(), cfg.sim.seed)?
        .with_antithetic(cfg.sim.antithetic);
    let paths = simulate_paths(&cfg.params.model, &cfg.params.market, cfg.spot, &grid, Measure::RiskNeutral)?;
    let mut buf = Vec::new();
    paths.write_csv(&mut buf)?;
    Ok(Output {
        body: String::from_utf8(buf).expect("csv is ascii"),
        ..Default::default()
    })
}

/// Exit code for a pipeline error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) => crate::exit::CONFIG,
        Error::NoExerciseRegion => crate::exit::NO_EXERCISE_REGION,
        _ => crate::exit::NUMERICAL,
    }
}

/// Message for a failed run, with a hint where one helps.
pub fn describe(e: &Error, kind: OptionKind) -> String {
    match e {
        Error::NoExerciseRegion => format!(
            "{e}: early exercise of a {kind} is never optimal for these rates \
             (a call needs q > 0, a put needs r > 0); use `price` for its European value"
        ),
        _ => e.to_string(),
    }
}
