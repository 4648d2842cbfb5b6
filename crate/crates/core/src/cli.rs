//! Command-line front end. Every subcommand writes CSV (default) or JSON to
//! `--output` or stdout and returns a process exit code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::csvfmt::fmt_num;
use crate::error::{Error, Result};
use crate::extremes::{g_c_quantile_for, theta_c, write_theta_csv, GumbelModel, DEFAULT_THETA_TOL};
use crate::montecarlo::{
    run_experiment, single_row, sweep_columns, sweep_ratios, write_summary_csv, ExperimentConfig, Statistic,
    SweepRow,
};
use crate::norm::{scaled_norm, spectral_norm_dense, spectral_norm_fast, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::{Distribution, SymbolSource};
use crate::sinekernel::{k_estimate, k_table, write_k_table_csv, KOptions};
use crate::structured::{build_symbol, dense_materialize, Family, MatrixSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_NONCONVERGED: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Relative disagreement tolerated by `norm --dense-check`.
pub const DENSE_CHECK_TOL: f64 = 1e-8;

const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "specnorm", version, about = "Spectral norms of random structured matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Base seed.
    #[arg(long, global = true, env = "SPECNORM_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Progress on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of the sine-kernel constant over aspect ratios.
    Ktable {
        /// Ratios as start:step:stop (step 0 gives the single point start).
        #[arg(long, default_value = "0.01:0.01:1", value_parser = parse_grid)]
        grid: Grid,
        /// Column count n; each row uses p = ratio · p_base.
        #[arg(long, default_value_t = 1000)]
        p_base: usize,
    },
    /// Gumbel shift θ_c over aspect ratios.
    Theta {
        #[arg(long, default_value = "0.1:0.1:1", value_parser = parse_grid)]
        grid: Grid,
    },
    /// Spectral norm of a single instance.
    Norm(NormArgs),
    /// Monte Carlo experiment or ratio sweep from a config file.
    Mc {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical quantiles next to their Gumbel predictions.
    GumbelCompare {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct NormArgs {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "gaussian")]
    pub dist: Distribution,
    /// Symbol draws in draw order, replacing the random ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub symbol: Option<Vec<f64>>,
    /// Compare with a dense eigensolver.
    #[arg(long)]
    pub dense_check: bool,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Column count of the discrete problem behind the Toeplitz reference.
    #[arg(long, default_value_t = 1000)]
    pub reference_n: usize,
}

/// Ratios parsed from `start:step:stop`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("bad number `{t}` in grid `{s}`"))
    };
    let (start, step, stop) = match parts.as_slice() {
        [one] => {
            let x = num(one)?;
            (x, 0.0, x)
        }
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(format!("grid `{s}` is not start:step:stop")),
    };
    if step < 0.0 || stop < start {
        return Err(format!("grid `{s}` must ascend"));
    }
    if step == 0.0 {
        if start != stop {
            return Err(format!("grid `{s}` has zero step but start ≠ stop"));
        }
        return Ok(Grid(vec![start]));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(format!("grid `{s}` has more than {MAX_GRID_POINTS} points"));
    }
    // rounded so that 0.1 + 2·0.1 prints and compares as 0.3
    Ok(Grid(
        (0..count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect(),
    ))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let mut out = open_output(cli.output.as_deref())?;
    let code = match &cli.command {
        Command::Ktable { grid, p_base } => cmd_ktable(cli, grid, *p_base, &mut out)?,
        Command::Theta { grid } => cmd_theta(cli, grid, &mut out)?,
        Command::Norm(args) => cmd_norm(cli, args, &mut out)?,
        Command::Mc { config } => cmd_mc(cli, config, &mut out)?,
        Command::GumbelCompare { config } => cmd_gumbel_compare(cli, config, &mut out)?,
    };
    out.flush()?;
    Ok(code)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn log(cli: &Cli, level: u8, msg: impl FnOnce() -> String) {
    if cli.verbose >= level {
        eprintln!("{}", msg());
    }
}

fn cmd_ktable(cli: &Cli, grid: &Grid, p_base: usize, out: &mut dyn Write) -> Result<i32> {
    let mut desc = grid.0.clone();
    desc.sort_by(|a, b| b.total_cmp(a));
    desc.dedup();
    log(cli, 1, || format!("ktable: {} ratios, p_base {p_base}", desc.len()));
    let mut rows = k_table(&desc, p_base, &KOptions::default())?;
    rows.reverse();
    match cli.format {
        Format::Csv => write_k_table_csv(out, &rows)?,
        Format::Json => write_json(out, &rows)?,
    }
    Ok(if rows.iter().all(|r| r.converged) { EXIT_OK } else { EXIT_NONCONVERGED })
}

fn cmd_theta(cli: &Cli, grid: &Grid, out: &mut dyn Write) -> Result<i32> {
    let rows = grid
        .0
        .iter()
        .map(|&c| theta_c(c, DEFAULT_THETA_TOL).map(|t| (c, t)))
        .collect::<Result<Vec<_>>>()?;
    log(cli, 1, || format!("theta: {} ratios", rows.len()));
    match cli.format {
        Format::Csv => write_theta_csv(out, &rows)?,
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                c: f64,
                theta: f64,
            }
            let rows: Vec<Row> = rows.into_iter().map(|(c, theta)| Row { c, theta }).collect();
            write_json(out, &rows)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct NormReport {
    family: Family,
    symmetric: bool,
    p: usize,
    n: usize,
    seed: u64,
    sigma_max: f64,
    scaled_norm: f64,
    reference: f64,
    iterations: usize,
    converged: bool,
    dense_sigma_max: Option<f64>,
    dense_rel_diff: Option<f64>,
}

struct FixedSymbol<'a>(&'a [f64]);

impl SymbolSource for FixedSymbol<'_> {
    fn sample(&self, index: u64) -> f64 {
        self.0[index as usize]
    }
}

fn symbol_draws(spec: &MatrixSpec) -> usize {
    match (spec.family.is_toeplitz_like(), spec.symmetric) {
        (_, false) => spec.embedding_size(),
        (true, true) => spec.n + 1,
        (false, true) => spec.n / 2 + 1,
    }
}

/// Asymptotic value of the scaled norm: `K_{1,n/p}` for Toeplitz and Hankel,
/// 1 for circulant and reverse circulant.
fn norm_reference(spec: &MatrixSpec, reference_n: usize) -> Result<f64> {
    if !spec.family.is_toeplitz_like() {
        return Ok(1.0);
    }
    if reference_n == 0 {
        return Err(Error::InvalidArgument("reference-n must be at least 1".into()));
    }
    let p_ref = ((spec.p as f64 / spec.n as f64) * reference_n as f64).round() as usize;
    Ok(k_estimate(p_ref.clamp(1, reference_n), reference_n, None, &KOptions::default())?
        .0
        .k_value)
}

fn cmd_norm(cli: &Cli, args: &NormArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = MatrixSpec::new(args.family, args.symmetric, args.p, args.n)
        .with_dist(args.dist)
        .with_seed(cli.seed.unwrap_or(0));
    spec.validate()?;
    let sym = match &args.symbol {
        Some(values) => {
            let need = symbol_draws(&spec);
            if values.len() != need {
                return Err(Error::InvalidArgument(format!(
                    "--symbol needs {need} values for this shape, got {}",
                    values.len()
                )));
            }
            build_symbol(&spec, &FixedSymbol(values))?
        }
        None => build_symbol(&spec, &spec.stream())?,
    };
    let res = spectral_norm_fast(&sym, &spec, args.tol, args.max_iter)?;
    log(cli, 1, || format!("norm: {} iterations, residual {:e}", res.iterations, res.residual));
    let (dense_sigma_max, dense_rel_diff) = if args.dense_check {
        let dense = spectral_norm_dense(&dense_materialize(&sym, &spec)?, args.tol, args.max_iter)?;
        let scale = dense.sigma_max.abs().max(f64::MIN_POSITIVE);
        (Some(dense.sigma_max), Some((res.sigma_max - dense.sigma_max).abs() / scale))
    } else {
        (None, None)
    };
    let report = NormReport {
        family: spec.family,
        symmetric: spec.symmetric,
        p: spec.p,
        n: spec.n,
        seed: spec.seed,
        sigma_max: res.sigma_max,
        scaled_norm: if spec.n >= 2 { scaled_norm(&res, &spec, spec.n)? } else { f64::NAN },
        reference: norm_reference(&spec, args.reference_n)?,
        iterations: res.iterations,
        converged: res.converged,
        dense_sigma_max,
        dense_rel_diff,
    };
    match cli.format {
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
            writeln!(
                out,
                "family,symmetric,p,n,seed,sigma_max,scaled_norm,reference,iterations,converged,dense_sigma_max,dense_rel_diff"
            )?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                report.family,
                report.symmetric,
                report.p,
                report.n,
                report.seed,
                fmt_num(report.sigma_max),
                fmt_num(report.scaled_norm),
                fmt_num(report.reference),
                report.iterations,
                report.converged,
                opt(report.dense_sigma_max),
                opt(report.dense_rel_diff)
            )?;
        }
        Format::Json => write_json(out, &report)?,
    }
    if dense_rel_diff.is_some_and(|d| d.is_nan() || d > DENSE_CHECK_TOL) {
        eprintln!("dense check failed: relative difference {}", fmt_num(dense_rel_diff.unwrap_or(f64::NAN)));
        return Ok(EXIT_ORACLE);
    }
    Ok(if res.converged { EXIT_OK } else { EXIT_NONCONVERGED })
}

fn load_config(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t as usize);
    }
    Ok(cfg)
}

fn write_raw(path: &Path, res: &crate::montecarlo::ExperimentResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    res.write_raw_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_mc(cli: &Cli, path: &Path, out: &mut dyn Write) -> Result<i32> {
    let cfg = load_config(cli, path)?;
    let rows: Vec<SweepRow> = if cfg.ratios.is_empty() {
        log(cli, 1, || format!("mc: {} replicates, p {}, n {}", cfg.replicates, cfg.p, cfg.n));
        let res = run_experiment(&cfg)?;
        if let Some(raw) = &cfg.raw_samples {
            write_raw(raw, &res)?;
        }
        vec![single_row(&res)?]
    } else {
        log(cli, 1, || format!("mc: sweep over {} ratios, p {}", cfg.ratios.len(), cfg.p));
        sweep_ratios(&cfg, &cfg.ratios, cfg.p)?
    };
    match cli.format {
        Format::Csv => write_summary_csv(out, &rows)?,
        Format::Json => write_json(out, &rows)?,
    }
    Ok(if rows.iter().any(|r| r.failed) { EXIT_NONCONVERGED } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct CompareRow {
    ratio: f64,
    p: usize,
    n: usize,
    q: f64,
    empirical_scaled: f64,
    analytic_scaled: f64,
    empirical_centered: f64,
    analytic_centered: f64,
}

fn cmd_gumbel_compare(cli: &Cli, path: &Path, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = load_config(cli, path)?;
    if cfg.family != Family::Circulant || cfg.symmetric {
        return Err(Error::Config("gumbel-compare needs a non-symmetric circulant family".into()));
    }
    cfg.statistics = vec![Statistic::ScaledNorm, Statistic::CenteredNormSq];
    let points: Vec<(usize, usize)> = if cfg.ratios.is_empty() {
        vec![(cfg.p, cfg.n)]
    } else {
        cfg.ratios.iter().map(|&r| (cfg.p, sweep_columns(cfg.p, r))).collect()
    };
    let mut rows = Vec::new();
    let mut failed = false;
    for (p, n) in points {
        let mut run = cfg.clone();
        run.ratios.clear();
        run.p = p;
        run.n = n;
        log(cli, 1, || format!("gumbel-compare: p {p}, n {n}"));
        let res = run_experiment(&run)?;
        failed |= res.failed;
        let (Some(scaled), Some(centered)) =
            (res.summary(Statistic::ScaledNorm), res.summary(Statistic::CenteredNormSq))
        else {
            continue;
        };
        let ratio = p as f64 / n as f64;
        let model = GumbelModel::for_ratio(ratio)?;
        for &q in &cfg.quantile_probes {
            rows.push(CompareRow {
                ratio,
                p,
                n,
                q,
                empirical_scaled: scaled.quantile(q),
                analytic_scaled: g_c_quantile_for(q, &model, n)?,
                empirical_centered: centered.quantile(q),
                analytic_centered: model.quantile(q)?,
            });
        }
    }
    match cli.format {
        Format::Csv => {
            writeln!(
                out,
                "ratio,p,n,q,empirical_scaled,analytic_scaled,empirical_centered,analytic_centered"
            )?;
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    fmt_num(r.ratio),
                    r.p,
                    r.n,
                    fmt_num(r.q),
                    fmt_num(r.empirical_scaled),
                    fmt_num(r.analytic_scaled),
                    fmt_num(r.empirical_centered),
                    fmt_num(r.analytic_centered)
                )?;
            }
        }
        Format::Json => write_json(out, &rows)?,
    }
    Ok(if failed { EXIT_NONCONVERGED } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1:0:1").unwrap(), Grid(vec![1.0]));
        assert_eq!(parse_grid("0.5").unwrap(), Grid(vec![0.5]));
        let g = parse_grid("0.1:0.1:1").unwrap();
        assert_eq!(g.0.len(), 10);
        assert_eq!(g.0[2], 0.3);
        assert_eq!(g.0[9], 1.0);
        assert_eq!(parse_grid("0.01:0.01:1").unwrap().0.len(), 100);
        for bad in ["a:b:c", "1:0:2", "1:0.1", "0.5:-0.1:0.1", "1:0.1:0.5"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn usage_errors_map_to_64() {
        assert_eq!(run(["specnorm", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["specnorm", "ktable", "--grid", "a:b:c"]), EXIT_USAGE);
        assert_eq!(run(["specnorm", "--help"]), EXIT_OK);
    }

    #[test]
    fn draw_counts() {
        let s = |f, sym, p, n| symbol_draws(&MatrixSpec::new(f, sym, p, n));
        assert_eq!(s(Family::Toeplitz, false, 2, 3), 5);
        assert_eq!(s(Family::Hankel, true, 2, 3), 4);
        assert_eq!(s(Family::Circulant, false, 2, 3), 3);
        assert_eq!(s(Family::ReverseCirculant, true, 4, 8), 5);
    }
}
