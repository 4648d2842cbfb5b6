//! Seeded Monte Carlo replication.
//!
//! Replicate `r` draws its symbol from `SeededStream(base_seed, r)`, so each
//! replicate is a pure function of the configuration and its index. Results
//! are gathered in replicate order and summarised from sorted samples, which
//! makes every summary independent of the worker count.

mod config;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csvfmt::fmt_num;
use crate::dft::DftPlan;
use crate::error::{Error, Result};
use crate::extremes::{b_statistic_with, dominance_check, DominanceReport, GumbelModel, DEFAULT_SE_MULTIPLIER};
use crate::norm::{scaled_norm, spectral_norm_fast};
use crate::rng::{Distribution, SeededStream};
use crate::sinekernel::{k_estimate, k_table, KOptions};
use crate::structured::{build_symbol_with_plan, Family};

pub use config::{ExperimentConfig, DEFAULT_PROBES, DEFAULT_REFERENCE_P_BASE};

/// Maximum excluded fraction before an experiment is marked failed.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.001;

/// Slack allowed in `σ² ≥ B_{p,n}`.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `σ/√(p log n)` (or `σ/√(2p log n)` for symmetric families).
    ScaledNorm,
    /// `σ²/p` minus the centering offset.
    CenteredNormSq,
    /// `B_{p,n}/p` minus the centering offset.
    BStatistic,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::ScaledNorm => "scaled_norm",
            Statistic::CenteredNormSq => "centered_norm_sq",
            Statistic::BStatistic => "b_statistic",
        }
    }

    fn needs_norm(self) -> bool {
        !matches!(self, Statistic::BStatistic)
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "scaled_norm" => Ok(Self::ScaledNorm),
            "centered_norm_sq" => Ok(Self::CenteredNormSq),
            "b_statistic" => Ok(Self::BStatistic),
            other => Err(Error::InvalidArgument(format!("unknown statistic `{other}`"))),
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    /// One value per configured statistic, in configuration order.
    pub values: Vec<f64>,
    pub sigma_sq: Option<f64>,
    /// `B_{p,n}` (not divided by `p`).
    pub b_bound: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub statistic: Statistic,
    pub count: usize,
    pub excluded: usize,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub probes: Vec<f64>,
    pub quantiles: Vec<f64>,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl McSummary {
    /// Summarises raw samples; `excluded` counts replicates left out upstream.
    pub fn from_samples(statistic: Statistic, samples: &[f64], excluded: usize, probes: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples to summarise".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let q = |p: f64| quantile_sorted(&sorted, p);
        let quantiles: Vec<f64> = probes.iter().map(|&p| q(p)).collect();
        Ok(Self {
            statistic,
            count: sorted.len(),
            excluded,
            mean,
            median: q(0.5),
            q05: q(0.05),
            q95: q(0.95),
            probes: probes.to_vec(),
            quantiles,
            sorted,
        })
    }

    /// Exact quantile at any probability in `[0, 1]`.
    pub fn quantile(&self, prob: f64) -> f64 {
        quantile_sorted(&self.sorted, prob)
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// Linear interpolation between order statistics (`h = (m − 1) q`).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<McSummary>,
    pub excluded: usize,
    pub failed: bool,
}

impl ExperimentResult {
    pub fn summary(&self, stat: Statistic) -> Option<&McSummary> {
        self.summaries.iter().find(|s| s.statistic == stat)
    }

    /// Writes `replicate,statistic,value,flag`.
    pub fn write_raw_csv<W: Write + ?Sized>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "replicate,statistic,value,flag")?;
        for r in &self.records {
            let flag = if r.converged { "ok" } else { "nonconverged" };
            for (stat, v) in self.config.statistics.iter().zip(&r.values) {
                writeln!(out, "{},{},{},{}", r.replicate, stat, fmt_num(*v), flag)?;
            }
        }
        Ok(())
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    builder
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))
}

fn check_b_applicable(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.family.is_toeplitz_like() || cfg.symmetric {
        return Err(Error::InvalidArgument(
            "b_statistic needs a non-symmetric circulant family".into(),
        ));
    }
    if !cfg.n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("b_statistic needs even n, got {}", cfg.n)));
    }
    Ok(())
}

/// Computes one replicate.
pub fn run_replicate(cfg: &ExperimentConfig, replicate: u64, plan: &Arc<DftPlan>) -> Result<ReplicateRecord> {
    let spec = cfg.spec();
    let source = SeededStream::new(cfg.base_seed, replicate, cfg.dist);
    let sym = build_symbol_with_plan(&spec, &source, Arc::clone(plan))?;
    let want_norm = cfg.statistics.iter().any(|s| s.needs_norm());
    let want_b = cfg.statistics.contains(&Statistic::BStatistic);

    let norm = if want_norm {
        Some(spectral_norm_fast(&sym, &spec, cfg.tol, cfg.max_iter)?)
    } else {
        None
    };
    let b = if want_b {
        Some(b_statistic_with(sym.d(), spec.p, cfg.centering)?)
    } else {
        None
    };
    let offset = cfg.centering.offset(spec.n);
    let pf = spec.p as f64;
    let values = cfg
        .statistics
        .iter()
        .map(|stat| match stat {
            Statistic::ScaledNorm => scaled_norm(norm.as_ref().expect("norm computed"), &spec, spec.n),
            Statistic::CenteredNormSq => {
                let s = norm.as_ref().expect("norm computed").sigma_max;
                Ok(s * s / pf - offset.as_ref().map_err(clone_err)?)
            }
            Statistic::BStatistic => Ok(b.expect("b computed").centered),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ReplicateRecord {
        replicate,
        values,
        sigma_sq: norm.map(|r| r.sigma_max * r.sigma_max),
        b_bound: b.map(|b| b.value * pf),
        converged: norm.is_none_or(|r| r.converged),
    })
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::Domain(s) => Error::Domain(s.clone()),
        other => Error::InvalidArgument(other.to_string()),
    }
}

/// Runs every replicate of a single (non-sweep) configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.statistics.contains(&Statistic::BStatistic) {
        check_b_applicable(cfg)?;
    }
    let spec = cfg.spec();
    let plan = Arc::new(DftPlan::new(spec.embedding_size())?);
    let pool = thread_pool(cfg.threads)?;
    let records: Vec<ReplicateRecord> = pool.install(|| {
        (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| run_replicate(cfg, r, &plan))
            .collect::<Result<Vec<_>>>()
    })?;

    let excluded = records.iter().filter(|r| !r.converged).count();
    let failed = excluded as f64 > MAX_EXCLUDED_FRACTION * cfg.replicates as f64;
    let summaries = if excluded == records.len() {
        Vec::new()
    } else {
        cfg.statistics
            .iter()
            .enumerate()
            .map(|(k, &stat)| {
                let samples: Vec<f64> = records
                    .iter()
                    .filter(|r| r.converged)
                    .map(|r| r.values[k])
                    .collect();
                McSummary::from_samples(stat, &samples, excluded, &cfg.quantile_probes)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        summaries,
        excluded,
        failed: failed || excluded == cfg.replicates,
    })
}

/// Asymptotic reference for a statistic: `K_{1,n/p}` or 1 for scaled norms,
/// the `Gumbel(θ_c, 1)` median for centered circulant statistics, NaN otherwise.
pub fn references(cfg: &ExperimentConfig, stat: Statistic, ratios: &[f64]) -> Result<Vec<f64>> {
    match stat {
        Statistic::ScaledNorm if cfg.family.is_toeplitz_like() => toeplitz_references(ratios, cfg.reference_p_base),
        Statistic::ScaledNorm => Ok(vec![1.0; ratios.len()]),
        _ if cfg.family.is_toeplitz_like() || cfg.symmetric => Ok(vec![f64::NAN; ratios.len()]),
        _ => ratios
            .iter()
            .map(|&c| GumbelModel::for_ratio(c).map(|m| m.median()))
            .collect(),
    }
}

// k_table on the descending grid when every ratio hits an integer p, else
// independent cold starts at the nearest p.
fn toeplitz_references(ratios: &[f64], p_base: usize) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]));
    let desc: Vec<f64> = order.iter().map(|&i| ratios[i]).collect();
    let opts = KOptions::default();
    let mut out = vec![f64::NAN; ratios.len()];
    let strictly_desc = desc.windows(2).all(|w| w[0] > w[1]);
    if let (true, Ok(rows)) = (strictly_desc, k_table(&desc, p_base, &opts)) {
        for (&i, row) in order.iter().zip(rows) {
            out[i] = row.k_value;
        }
        return Ok(out);
    }
    for (i, &r) in ratios.iter().enumerate() {
        let p = ((r * p_base as f64).round() as usize).clamp(1, p_base);
        out[i] = k_estimate(p, p_base, None, &opts)?.0.k_value;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub p: usize,
    pub n: usize,
    pub summaries: Vec<McSummary>,
    /// One reference per configured statistic.
    pub references: Vec<f64>,
    pub excluded: usize,
    pub failed: bool,
}

/// `n = ⌊p / ratio⌋`.
pub fn sweep_columns(p: usize, ratio: f64) -> usize {
    (p as f64 / ratio + 1e-9).floor() as usize
}

/// One experiment per aspect ratio with `p` fixed.
pub fn sweep_ratios(template: &ExperimentConfig, ratios: &[f64], p: usize) -> Result<Vec<SweepRow>> {
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("no ratios to sweep".into()));
    }
    let refs = template
        .statistics
        .iter()
        .map(|&s| references(template, s, ratios))
        .collect::<Result<Vec<_>>>()?;
    ratios
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let mut cfg = template.clone();
            cfg.ratios.clear();
            cfg.p = p;
            cfg.n = sweep_columns(p, ratio);
            let res = run_experiment(&cfg)?;
            Ok(SweepRow {
                ratio,
                p,
                n: cfg.n,
                summaries: res.summaries,
                references: refs.iter().map(|r| r[i]).collect(),
                excluded: res.excluded,
                failed: res.failed,
            })
        })
        .collect()
}

/// Writes `ratio,p,n,count,mean,q05,median,q95,reference,statistic`.
pub fn write_summary_csv<W: Write + ?Sized>(out: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "ratio,p,n,count,mean,q05,median,q95,reference,statistic")?;
    for row in rows {
        for (s, r) in row.summaries.iter().zip(&row.references) {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_num(row.ratio),
                row.p,
                row.n,
                s.count,
                fmt_num(s.mean),
                fmt_num(s.q05),
                fmt_num(s.median),
                fmt_num(s.q95),
                fmt_num(*r),
                s.statistic
            )?;
        }
    }
    Ok(())
}

/// Wraps a single experiment as a one-row sweep table.
pub fn single_row(res: &ExperimentResult) -> Result<SweepRow> {
    let cfg = &res.config;
    let ratio = cfg.p as f64 / cfg.n as f64;
    let references = cfg
        .statistics
        .iter()
        .map(|&s| references(cfg, s, &[ratio]).map(|v| v[0]))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRow {
        ratio,
        p: cfg.p,
        n: cfg.n,
        summaries: res.summaries.clone(),
        references,
        excluded: res.excluded,
        failed: res.failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedReport {
    pub p: usize,
    pub n: usize,
    /// `(σ², B_{p,n})` per replicate.
    pub pairs: Vec<(f64, f64)>,
    pub violations: usize,
    pub excluded: usize,
    pub centered_b: McSummary,
    pub model: GumbelModel,
    pub dominance: DominanceReport,
    /// Least-squares slope of sorted centered `B` against Gumbel quantiles.
    pub qq_slope: f64,
}

/// Paired `σ²` and `B_{p,n}` from the same draw of a Gaussian circulant.
pub fn paired_bound_experiment(cfg: &ExperimentConfig) -> Result<PairedReport> {
    if cfg.family != Family::Circulant || cfg.symmetric || cfg.dist != Distribution::Gaussian {
        return Err(Error::InvalidArgument(
            "paired bound experiment needs a Gaussian non-symmetric circulant".into(),
        ));
    }
    let mut run_cfg = cfg.clone();
    run_cfg.statistics = vec![Statistic::CenteredNormSq, Statistic::BStatistic];
    let res = run_experiment(&run_cfg)?;
    let kept: Vec<&ReplicateRecord> = res.records.iter().filter(|r| r.converged).collect();
    let pairs: Vec<(f64, f64)> = kept
        .iter()
        .map(|r| (r.sigma_sq.expect("norm computed"), r.b_bound.expect("b computed")))
        .collect();
    let violations = pairs.iter().filter(|(s, b)| *s < *b - BOUND_SLACK).count();
    let centered: Vec<f64> = kept.iter().map(|r| r.values[1]).collect();
    let centered_b = McSummary::from_samples(Statistic::BStatistic, &centered, res.excluded, &cfg.quantile_probes)?;
    let model = GumbelModel::for_ratio(cfg.p as f64 / cfg.n as f64)?;
    let probes: Vec<f64> = [0.05, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|&q| model.quantile(q))
        .collect::<Result<_>>()?;
    let dominance = dominance_check(&centered, &model, &probes, DEFAULT_SE_MULTIPLIER)?;
    let qq_slope = qq_slope(centered_b.sorted_samples(), &model)?;
    Ok(PairedReport {
        p: cfg.p,
        n: cfg.n,
        pairs,
        violations,
        excluded: res.excluded,
        centered_b,
        model,
        dominance,
        qq_slope,
    })
}

/// Slope of the ordinary least-squares fit of sorted samples on the model's
/// quantiles at plotting positions `(i + ½)/m`.
pub fn qq_slope(sorted: &[f64], model: &GumbelModel) -> Result<f64> {
    let m = sorted.len();
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let theo: Vec<f64> = (0..m)
        .map(|i| model.quantile((i as f64 + 0.5) / m as f64))
        .collect::<Result<_>>()?;
    let mx = theo.iter().sum::<f64>() / m as f64;
    let my = sorted.iter().sum::<f64>() / m as f64;
    let sxy: f64 = theo.iter().zip(sorted).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = theo.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
