//! The limiting constant `K_{1,n/p}` of scaled Toeplitz norms.
//!
//! `K_{1,n/p}` is approximated through `I_{p,n}`, the largest `ℓ²` norm of a
//! product of two unit-norm polynomials of degrees `p - 1` and `n - 1`:
//!
//! ```text
//! √(I²/p − 1/(3p)) ≤ K_{1,n/p} ≤ I/√p
//! ```
//!
//! `I_{p,n}` is found by alternating principal right singular vectors of the
//! banded convolution matrices `M_v` and `M_w` (each `(p+n−1)`-row, built from
//! the other polynomial's coefficients). Neither matrix is ever formed: `M_w x`
//! is a linear convolution and `M_wᵀ M_w` is applied as one FFT multiplier.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::csvfmt::fmt_num;
use crate::dft::{convolve_full_real, DftPlan};
use crate::error::{invalid, Result};
use crate::norm::{norm2, power_iteration};

pub const DEFAULT_OUTER_TOL: f64 = 1e-13;
pub const DEFAULT_OUTER_MAX: usize = 5000;
pub const DEFAULT_INNER_MAX: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KOptions {
    /// Absolute tolerance on successive `‖M_w‖` values.
    pub outer_tol: f64,
    pub outer_max: usize,
    /// Power-iteration cap for each singular-vector solve.
    pub inner_max: usize,
}

impl Default for KOptions {
    fn default() -> Self {
        Self {
            outer_tol: DEFAULT_OUTER_TOL,
            outer_max: DEFAULT_OUTER_MAX,
            inner_max: DEFAULT_INNER_MAX,
        }
    }
}

impl KOptions {
    /// Inner solves run ten times tighter than the outer loop.
    pub fn inner_tol(&self) -> f64 {
        self.outer_tol / 10.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KEstimate {
    pub p: usize,
    pub n: usize,
    pub ratio: f64,
    pub i_value: f64,
    pub k_value: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl KEstimate {
    fn from_i(p: usize, n: usize, i_value: f64, outer_iterations: usize, converged: bool) -> Self {
        let pf = p as f64;
        let hi = i_value / pf.sqrt();
        let lo = (i_value * i_value / pf - 1.0 / (3.0 * pf)).max(0.0).sqrt();
        Self {
            p,
            n,
            ratio: pf / n as f64,
            i_value,
            k_value: hi,
            bracket_lo: lo,
            bracket_hi: hi,
            outer_iterations,
            converged,
        }
    }
}

/// Coefficient vectors of the two extremal polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalPair {
    /// Length `n`.
    pub w: Vec<f64>,
    /// Length `p`.
    pub v: Vec<f64>,
}

/// `M_w x`, i.e. the full convolution `w ∗ x`.
pub fn banded_matvec(w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    convolve_full_real(w, x)
}

/// `M_wᵀ y` for `y` of length `|w| + cols − 1`: `(M_wᵀ y)_j = Σ_i w_i y_{i+j}`.
pub fn banded_matvec_adjoint(w: &[f64], y: &[f64], cols: usize) -> Result<Vec<f64>> {
    if w.is_empty() || cols == 0 {
        return invalid("adjoint needs nonempty w and cols ≥ 1");
    }
    if y.len() != w.len() + cols - 1 {
        return invalid(format!(
            "y has length {}, expected {}",
            y.len(),
            w.len() + cols - 1
        ));
    }
    let reversed: Vec<f64> = w.iter().rev().copied().collect();
    let full = convolve_full_real(&reversed, y)?;
    Ok(full[w.len() - 1..w.len() - 1 + cols].to_vec())
}

/// `M_wᵀ M_w` for a fixed `w` as a single FFT multiplier.
struct GramOperator {
    cols: usize,
    plan: DftPlan,
    multiplier: Vec<f64>,
}

impl GramOperator {
    fn new(w: &[f64], cols: usize) -> Result<Self> {
        let len = (w.len() + cols - 1).next_power_of_two();
        let plan = DftPlan::new(len)?;
        let mut buf: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(len, Complex64::new(0.0, 0.0));
        plan.inverse_in_place(&mut buf);
        let lf = len as f64;
        let multiplier = buf.iter().map(|z| lf * z.norm_sqr()).collect();
        Ok(Self {
            cols,
            plan,
            multiplier,
        })
    }

    fn apply(&self, x: &[f64], z: &mut [f64], buf: &mut Vec<Complex64>) -> f64 {
        buf.clear();
        buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        buf.resize(self.plan.len(), Complex64::new(0.0, 0.0));
        self.plan.inverse_in_place(buf);
        for (b, m) in buf.iter_mut().zip(&self.multiplier) {
            *b *= *m;
        }
        self.plan.forward_in_place(buf);
        for (dst, src) in z.iter_mut().zip(buf[..self.cols].iter()) {
            *dst = src.re;
        }
        x.iter().zip(z.iter()).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularVector {
    pub vector: Vec<f64>,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Principal right singular vector of `M_w` with `cols` columns, started from
/// the normalised all-ones vector.
pub fn principal_right_singular(w: &[f64], cols: usize, tol: f64, max_iter: usize) -> Result<SingularVector> {
    if cols == 0 {
        return invalid("cols must be at least 1");
    }
    let start = vec![1.0 / (cols as f64).sqrt(); cols];
    principal_right_singular_from(w, start, tol, max_iter)
}

/// As [`principal_right_singular`] with an explicit start vector.
pub fn principal_right_singular_from(
    w: &[f64],
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SingularVector> {
    if w.is_empty() || start.is_empty() {
        return invalid("w and start vector must be nonempty");
    }
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return invalid("need tol > 0 and max_iter ≥ 1");
    }
    let op = GramOperator::new(w, start.len())?;
    let mut buf = Vec::with_capacity(op.plan.len());
    let out = power_iteration(start, |x, z| op.apply(x, z, &mut buf), tol, max_iter);
    let mut vector = out.vector;
    fix_sign(&mut vector);
    Ok(SingularVector {
        vector,
        sigma: out.lambda.max(0.0).sqrt(),
        iterations: out.iterations,
        converged: out.converged,
    })
}

// First nonzero coordinate made positive.
fn fix_sign(x: &mut [f64]) {
    if let Some(first) = x.iter().find(|v| **v != 0.0) {
        if *first < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// `√(1 − p/(3n))`, the value of the product norm at constant coefficients.
pub fn k_lower_bound(p: usize, n: usize) -> Result<f64> {
    check_dims(p, n)?;
    Ok((1.0 - p as f64 / (3.0 * n as f64)).sqrt())
}

fn check_dims(p: usize, n: usize) -> Result<()> {
    if p == 0 || p > n {
        return invalid(format!("need 1 ≤ p ≤ n, got p = {p}, n = {n}"));
    }
    Ok(())
}

/// `‖v ∗ w‖₂` for a unit-norm pair.
pub fn i_value_direct(pair: &ExtremalPair) -> Result<f64> {
    for (name, x) in [("w", &pair.w), ("v", &pair.v)] {
        if x.is_empty() || (norm2(x) - 1.0).abs() > 1e-9 {
            return invalid(format!("{name} is not a unit vector"));
        }
    }
    Ok(norm2(&convolve_full_real(&pair.v, &pair.w)?))
}

/// Alternating maximisation of `‖v ∗ w‖` over unit `v ∈ ℝ^p`, `w ∈ ℝ^n`.
///
/// Without `init` both vectors start proportional to all-ones. With `init`,
/// `w` is taken as given and `v` is reused when its length is `p`; otherwise
/// `v` restarts from the principal right singular vector of `M_w`.
pub fn k_estimate(
    p: usize,
    n: usize,
    init: Option<&ExtremalPair>,
    opts: &KOptions,
) -> Result<(KEstimate, ExtremalPair)> {
    check_dims(p, n)?;
    if opts.outer_tol.is_nan() || opts.outer_tol <= 0.0 || opts.outer_max == 0 || opts.inner_max == 0 {
        return invalid("need outer_tol > 0, outer_max ≥ 1 and inner_max ≥ 1");
    }
    let inner_tol = opts.inner_tol();
    let ones = |len: usize| vec![1.0 / (len as f64).sqrt(); len];

    let mut w = match init {
        Some(pair) if pair.w.len() == n => {
            let mut w = pair.w.clone();
            crate::norm::normalize(&mut w);
            w
        }
        _ => ones(n),
    };
    let mut v = match init {
        Some(pair) if pair.v.len() == p => {
            let mut v = pair.v.clone();
            crate::norm::normalize(&mut v);
            v
        }
        Some(_) => principal_right_singular(&w, p, inner_tol, opts.inner_max)?.vector,
        None => ones(p),
    };

    let mut sigma_prev = norm2(&convolve_full_real(&v, &w)?);
    let mut sigma = sigma_prev;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.outer_max {
        iterations += 1;
        let wr = principal_right_singular_from(&v, w, inner_tol, opts.inner_max)?;
        w = wr.vector;
        let vr = principal_right_singular_from(&w, v, inner_tol, opts.inner_max)?;
        v = vr.vector;
        sigma = vr.sigma;
        if (sigma - sigma_prev).abs() <= opts.outer_tol {
            converged = wr.converged && vr.converged;
            break;
        }
        sigma_prev = sigma;
    }
    Ok((
        KEstimate::from_i(p, n, sigma, iterations, converged),
        ExtremalPair { w, v },
    ))
}

/// One `KEstimate` per ratio of a descending grid, with `n = p_base` and
/// `p = ratio · p_base`.
///
/// The first ratio starts cold; afterwards `p` walks down in steps of
/// `max(1, p_base/100)` through every intermediate value, each solve
/// warm-started from the previous converged `w`.
pub fn k_table(grid: &[f64], p_base: usize, opts: &KOptions) -> Result<Vec<KEstimate>> {
    if grid.is_empty() {
        return invalid("empty ratio grid");
    }
    if p_base == 0 {
        return invalid("p_base must be at least 1");
    }
    let mut targets = Vec::with_capacity(grid.len());
    for (i, &r) in grid.iter().enumerate() {
        if !(r > 0.0 && r <= 1.0) {
            return invalid(format!("ratio {r} outside (0, 1]"));
        }
        if i > 0 && r >= grid[i - 1] {
            return invalid("ratio grid must be strictly descending");
        }
        let exact = r * p_base as f64;
        let p = exact.round();
        if (exact - p).abs() > 1e-6 || p < 1.0 {
            return invalid(format!("ratio {r} × p_base {p_base} is not a positive integer"));
        }
        targets.push(p as usize);
    }

    let n = p_base;
    let step = (p_base / 100).max(1);
    let mut rows = Vec::with_capacity(targets.len());
    let (first, pair) = k_estimate(targets[0], n, None, opts)?;
    rows.push(first);
    let mut pair = pair;
    let mut p = targets[0];
    for &target in &targets[1..] {
        while p > target {
            p = p.saturating_sub(step).max(target);
            let (est, next) = k_estimate(p, n, Some(&ExtremalPair { w: pair.w, v: Vec::new() }), opts)?;
            pair = next;
            if p == target {
                rows.push(est);
            }
        }
    }
    Ok(rows)
}

/// Writes `ratio,k_value,bracket_lo,bracket_hi,iterations,converged`.
pub fn write_k_table_csv<W: Write + ?Sized>(out: &mut W, rows: &[KEstimate]) -> std::io::Result<()> {
    writeln!(out, "ratio,k_value,bracket_lo,bracket_hi,iterations,converged")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.ratio),
            fmt_num(r.k_value),
            fmt_num(r.bracket_lo),
            fmt_num(r.bracket_hi),
            r.outer_iterations,
            r.converged
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::autocorrelate_real;

    fn lcg(len: usize, salt: u64) -> Vec<f64> {
        let mut s = salt.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1;
        (0..len)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    fn dense_m(w: &[f64], cols: usize) -> Vec<Vec<f64>> {
        let rows = w.len() + cols - 1;
        (0..rows)
            .map(|i| {
                (0..cols)
                    .map(|j| if i >= j && i - j < w.len() { w[i - j] } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn banded_products() {
        let y = banded_matvec(&[1.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
        for (a, b) in y.iter().zip([1.0, 1.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let (w, x, yv) = (lcg(11, 1), lcg(7, 2), lcg(17, 3));
        let m = dense_m(&w, 7);
        let mx = banded_matvec(&w, &x).unwrap();
        for (row, got) in m.iter().zip(&mx) {
            let expect: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((expect - got).abs() < 1e-12);
        }
        let mty = banded_matvec_adjoint(&w, &yv, 7).unwrap();
        let lhs: f64 = mx.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&mty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-11);
        assert!(banded_matvec_adjoint(&w, &yv[..16], 7).is_err());
    }

    #[test]
    fn trivial_singular_vectors() {
        let r = principal_right_singular(&[1.0], 5, 1e-14, 100).unwrap();
        assert!((r.sigma - 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = principal_right_singular(&[h, h], 1, 1e-14, 100).unwrap();
        assert!((r.sigma - 1.0).abs() < 1e-12);
        assert_eq!(r.vector, vec![1.0]);
    }

    #[test]
    fn lower_bounds() {
        assert!((k_lower_bound(10, 10).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((k_lower_bound(1, 3).unwrap() - (8.0f64 / 9.0).sqrt()).abs() < 1e-15);
        assert!(k_lower_bound(1, 1_000_000).unwrap() > 0.9999998);
        assert!(k_lower_bound(4, 3).is_err());
        assert!(k_lower_bound(0, 3).is_err());
    }

    #[test]
    fn direct_i_value() {
        let one = ExtremalPair { w: vec![1.0], v: vec![1.0] };
        assert!((i_value_direct(&one).unwrap() - 1.0).abs() < 1e-15);
        let mono = ExtremalPair { w: vec![0.0, 1.0], v: vec![1.0, 0.0] };
        assert!((i_value_direct(&mono).unwrap() - 1.0).abs() < 1e-15);
        let bad = ExtremalPair { w: vec![2.0], v: vec![1.0] };
        assert!(i_value_direct(&bad).is_err());
    }

    #[test]
    fn small_estimate_is_consistent() {
        let opts = KOptions::default();
        let (est, pair) = k_estimate(12, 30, None, &opts).unwrap();
        assert!(est.converged);
        assert!(est.bracket_lo <= est.k_value && est.k_value == est.bracket_hi);
        assert!(est.k_value >= k_lower_bound(12, 30).unwrap() - 1e-6);
        assert!(est.k_value <= 1.0 + 1e-9);
        assert!((i_value_direct(&pair).unwrap() - est.i_value).abs() < 1e-9);
        // ‖M_w v‖² through autocorrelations
        let lhs = banded_matvec(&pair.w, &pair.v).unwrap().iter().map(|x| x * x).sum::<f64>();
        let rhs = autocorrelate_real(&pair.v)
            .unwrap()
            .inner(&autocorrelate_real(&pair.w).unwrap())
            .re;
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn table_grid_validation() {
        let opts = KOptions::default();
        assert!(k_table(&[0.5, 0.75], 100, &opts).is_err());
        assert!(k_table(&[0.333], 100, &opts).is_err());
        assert!(k_table(&[1.2], 100, &opts).is_err());
        assert!(k_table(&[], 100, &opts).is_err());
    }

    #[test]
    fn rejects_wide_dimensions() {
        assert!(k_estimate(5, 4, None, &KOptions::default()).is_err());
    }
}
