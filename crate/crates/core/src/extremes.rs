//! Extreme-value side of Gaussian circulant norms: the Gumbel shift `θ_c`,
//! shifted-Gumbel laws, and the computable lower bound `B_{p,n} ≤ ‖C‖²`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csvfmt::fmt_num;
use crate::dft::DftPlan;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_THETA_TOL: f64 = 1e-12;

/// `θ_c = −2 Σ_{j≥1} log(1 − sinc²(cπj))`, with `|error| ≤ tol`.
///
/// The first-order part of the series sums in closed form,
/// `Σ_j sin²(cπj)/(cπj)² = (1 − c)/(2c)`, so only the remainder
/// `g(x) = −2 log(1 − x) − 2x ≤ 2x²` (for `x ≤ ½`) is summed numerically.
/// With `x_j ≤ 1/(cπj)²` its tail past `J` is at most `2/(3 c⁴π⁴ J³)`.
pub fn theta_c(c: f64, tol: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return invalid(format!("ratio c = {c} outside (0, 1]"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return invalid("tolerance must be positive");
    }
    let cpi = c * PI;
    let j_min = (10.0 / c).ceil() as u64;
    let tail = |j: u64| 2.0 / (3.0 * cpi.powi(4) * (j as f64).powi(3));
    let mut sum = 0.0;
    let mut j = 1u64;
    loop {
        let arg = cpi * j as f64;
        let s = arg.sin() / arg;
        let x = s * s;
        let term = -2.0 * (-x).ln_1p() - 2.0 * x;
        sum += term;
        if j >= j_min && term < tol / 10.0 && tail(j) < tol / 2.0 {
            break;
        }
        j += 1;
    }
    Ok((1.0 - c) / c + sum)
}

/// Location of the limiting law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Centering {
    /// `log(n/2)`.
    HalfN,
    /// `log m` with `m = n/2 − 2⌈log n⌉ + 1`.
    ProofM,
}

impl Centering {
    pub fn offset(self, n: usize) -> Result<f64> {
        match self {
            Centering::HalfN => {
                if n < 3 {
                    return invalid("centering needs n ≥ 3");
                }
                Ok((n as f64 / 2.0).ln())
            }
            Centering::ProofM => {
                let m = (n / 2) as f64 - 2.0 * (n as f64).ln().ceil() + 1.0;
                if m < 1.0 {
                    return Err(Error::Domain(format!("n = {n} too small for log m centering")));
                }
                Ok(m.ln())
            }
        }
    }
}

impl std::str::FromStr for Centering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "half_n" | "log_n_half" | "n/2" => Ok(Self::HalfN),
            "proof_m" | "log_m" | "m" => Ok(Self::ProofM),
            other => Err(Error::InvalidArgument(format!("unknown centering `{other}`"))),
        }
    }
}

/// `Gumbel(θ, 1)` with `θ = θ_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GumbelModel {
    pub theta: f64,
    pub c: f64,
}

impl GumbelModel {
    pub fn for_ratio(c: f64) -> Result<Self> {
        Ok(Self {
            theta: theta_c(c, DEFAULT_THETA_TOL)?,
            c,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gumbel_cdf(x, self)
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        gumbel_quantile(q, self)
    }

    pub fn median(&self) -> f64 {
        self.theta - std::f64::consts::LN_2.ln()
    }
}

pub fn gumbel_cdf(x: f64, model: &GumbelModel) -> f64 {
    (-(-(x - model.theta)).exp()).exp()
}

pub fn gumbel_quantile(q: f64, model: &GumbelModel) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("probability {q} outside (0, 1)"));
    }
    Ok(model.theta - (-q.ln()).ln())
}

/// Quantile `q` of `√((Gumbel(θ_c, 1) + log(n/2)) / log n)`.
pub fn g_c_quantile(q: f64, c: f64, n: usize) -> Result<f64> {
    g_c_quantile_for(q, &GumbelModel::for_ratio(c)?, n)
}

pub fn g_c_quantile_for(q: f64, model: &GumbelModel, n: usize) -> Result<f64> {
    if n < 3 {
        return invalid("n must be at least 3");
    }
    let radicand = (gumbel_quantile(q, model)? + (n as f64 / 2.0).ln()) / (n as f64).ln();
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "negative radicand {radicand} at q = {q}, n = {n}"
        )));
    }
    Ok(radicand.sqrt())
}

/// Weights `w_0 = p`, `w_k = sin²(πkp/n) / (p sin²(πk/n))` of the moving average.
pub fn b_kernel(n: usize, p: usize) -> Vec<f64> {
    let (nf, pf) = (n as f64, p as f64);
    (0..n)
        .map(|k| {
            if k == 0 {
                pf
            } else {
                let den = (PI * k as f64 / nf).sin();
                debug_assert!(den.abs() > 0.0);
                let num = (PI * (k as f64) * pf / nf).sin();
                num * num / (pf * den * den)
            }
        })
        .collect()
}

/// All `n` quadratic forms `n·v̄_jᵀ D D̄ v_j` as one circular convolution.
pub fn quadratic_forms(d: &[Complex64], p: usize) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 || p == 0 || p > n {
        return invalid(format!("need 1 ≤ p ≤ n, got p = {p}, n = {n}"));
    }
    let plan = DftPlan::new(n)?;
    let mut e: Vec<Complex64> = d.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    let mut k: Vec<Complex64> = b_kernel(n, p).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    plan.inverse_in_place(&mut e);
    plan.inverse_in_place(&mut k);
    let root = (n as f64).sqrt();
    for (a, b) in e.iter_mut().zip(&k) {
        *a *= b * root;
    }
    plan.forward_in_place(&mut e);
    Ok(e.into_iter().map(|z| z.re).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BStatistic {
    /// `B_{p,n} / p`.
    pub value: f64,
    pub argmax_j: usize,
    /// `value` minus the centering offset.
    pub centered: f64,
}

/// `B_{p,n}/p` for the diagonal `d` of an `n`-point circulant, `n` even.
pub fn b_statistic(d: &[Complex64], p: usize) -> Result<BStatistic> {
    b_statistic_with(d, p, Centering::HalfN)
}

pub fn b_statistic_with(d: &[Complex64], p: usize, centering: Centering) -> Result<BStatistic> {
    let n = d.len();
    if !n.is_multiple_of(2) {
        return invalid(format!("n = {n} must be even"));
    }
    let forms = quadratic_forms(d, p)?;
    let (argmax_j, best) = forms[..=n / 2]
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    let value = best / p as f64;
    Ok(BStatistic {
        value,
        argmax_j,
        centered: value - centering.offset(n)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceRow {
    pub x: f64,
    pub empirical_cdf: f64,
    pub gumbel_cdf: f64,
    pub diff: f64,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub samples: usize,
    pub se_multiplier: f64,
    pub rows: Vec<DominanceRow>,
}

impl DominanceReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.flag).count()
    }

    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x,empirical_cdf,gumbel_cdf,diff,flag")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_num(r.x),
                fmt_num(r.empirical_cdf),
                fmt_num(r.gumbel_cdf),
                fmt_num(r.diff),
                r.flag
            )?;
        }
        Ok(())
    }
}

pub const MIN_DOMINANCE_SAMPLES: usize = 500;
pub const DEFAULT_SE_MULTIPLIER: f64 = 3.0;

/// One-sided check that the empirical CDF does not exceed the shifted Gumbel
/// CDF by more than `se_multiplier` binomial standard errors at any probe.
pub fn dominance_check(
    samples: &[f64],
    model: &GumbelModel,
    probes: &[f64],
    se_multiplier: f64,
) -> Result<DominanceReport> {
    if samples.len() < MIN_DOMINANCE_SAMPLES {
        return invalid(format!(
            "{} samples, need at least {MIN_DOMINANCE_SAMPLES}",
            samples.len()
        ));
    }
    let m = samples.len() as f64;
    let rows = probes
        .iter()
        .map(|&x| {
            let empirical_cdf = samples.iter().filter(|&&s| s <= x).count() as f64 / m;
            let f = gumbel_cdf(x, model);
            let se = (f * (1.0 - f) / m).sqrt();
            let diff = empirical_cdf - f;
            DominanceRow {
                x,
                empirical_cdf,
                gumbel_cdf: f,
                diff,
                flag: diff > se_multiplier * se,
            }
        })
        .collect();
    Ok(DominanceReport {
        samples: samples.len(),
        se_multiplier,
        rows,
    })
}

/// Writes `c,theta`.
pub fn write_theta_csv<W: Write + ?Sized>(out: &mut W, rows: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "c,theta")?;
    for (c, t) in rows {
        writeln!(out, "{},{}", fmt_num(*c), fmt_num(*t))?;
    }
    Ok(())
}
