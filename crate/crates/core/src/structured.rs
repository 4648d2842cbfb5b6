//! Random structured matrices and their circulant embeddings.
//!
//! Every family is stored as the first row `a` of an `N × N` circulant whose
//! upper-left `p × n` block is the matrix (after an optional column reversal).
//! With `A = √N F diag(d) F̄ᵀ` and `d = F a`, a product with the block costs
//! three length-`N` transforms.
//!
//! | family                  | entry `(i, j)`                   | `N`     |
//! |-------------------------|----------------------------------|---------|
//! | Toeplitz                | `a_{j-i}`                        | `p + n` |
//! | symmetric Toeplitz      | `a_{|i-j|}`                      | `2n`    |
//! | circulant               | `a_{(j-i) mod n}`                | `n`     |
//! | symmetric circulant     | `a_{n/2 - |n/2 - |j-i||}`        | `n`     |
//!
//! Hankel and reverse-circulant variants replace column `j` by `n - 1 - j`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::DftPlan;
use crate::error::{invalid, Error, Result};
use crate::rng::{Distribution, SeededStream, SymbolSource};

/// Largest `p · n` accepted by [`dense_materialize`].
pub const DENSE_ENTRY_LIMIT: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Toeplitz,
    Circulant,
    Hankel,
    ReverseCirculant,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Toeplitz,
        Family::Circulant,
        Family::Hankel,
        Family::ReverseCirculant,
    ];

    /// Column-reversed variants.
    pub fn is_reversed(self) -> bool {
        matches!(self, Family::Hankel | Family::ReverseCirculant)
    }

    /// Toeplitz and Hankel share the Toeplitz symbol and limit constant.
    pub fn is_toeplitz_like(self) -> bool {
        matches!(self, Family::Toeplitz | Family::Hankel)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "toeplitz" => Ok(Self::Toeplitz),
            "circulant" => Ok(Self::Circulant),
            "hankel" => Ok(Self::Hankel),
            "reverse_circulant" => Ok(Self::ReverseCirculant),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Toeplitz => "toeplitz",
            Self::Circulant => "circulant",
            Self::Hankel => "hankel",
            Self::ReverseCirculant => "reverse_circulant",
        })
    }
}

/// One random `p × n` structured matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub family: Family,
    pub symmetric: bool,
    pub p: usize,
    pub n: usize,
    pub dist: Distribution,
    pub seed: u64,
}

impl MatrixSpec {
    pub fn new(family: Family, symmetric: bool, p: usize, n: usize) -> Self {
        Self {
            family,
            symmetric,
            p,
            n,
            dist: Distribution::Gaussian,
            seed: 0,
        }
    }

    pub fn with_dist(mut self, dist: Distribution) -> Self {
        self.dist = dist;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return invalid("p must be at least 1");
        }
        if self.p > self.n {
            return invalid(format!("p = {} exceeds n = {}", self.p, self.n));
        }
        Ok(())
    }

    /// Size `N` of the embedding circulant.
    pub fn embedding_size(&self) -> usize {
        match (self.family.is_toeplitz_like(), self.symmetric) {
            (true, false) => self.p + self.n,
            (true, true) => 2 * self.n,
            (false, _) => self.n,
        }
    }

    /// The seeded stream of replicate 0 for this spec.
    pub fn stream(&self) -> SeededStream {
        SeededStream::new(self.seed, 0, self.dist)
    }
}

/// First row `a` of the embedding circulant and its diagonal `d = F a`.
#[derive(Debug, Clone)]
pub struct SymbolVector {
    a: Vec<f64>,
    d: Vec<Complex64>,
    plan: Arc<DftPlan>,
}

impl SymbolVector {
    /// Wraps an explicit length-`N` first row.
    pub fn from_row(a: Vec<f64>) -> Result<Self> {
        let plan = Arc::new(DftPlan::new(a.len())?);
        Self::from_row_with_plan(a, plan)
    }

    pub fn from_row_with_plan(a: Vec<f64>, plan: Arc<DftPlan>) -> Result<Self> {
        if a.len() != plan.len() {
            return invalid(format!(
                "symbol length {} does not match plan length {}",
                a.len(),
                plan.len()
            ));
        }
        let mut d: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan.forward_in_place(&mut d);
        Ok(Self { a, d, plan })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn d(&self) -> &[Complex64] {
        &self.d
    }

    pub fn embedding_size(&self) -> usize {
        self.a.len()
    }

    pub fn plan(&self) -> &Arc<DftPlan> {
        &self.plan
    }

    /// `√N · max_j |d_j|`, the spectral norm of the full embedding circulant.
    pub fn circulant_norm(&self) -> f64 {
        let root = (self.a.len() as f64).sqrt();
        root * self.d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Lays out the random symbol for `spec`, drawing entry `k` from `source.sample(k)`.
pub fn build_symbol(spec: &MatrixSpec, source: &impl SymbolSource) -> Result<SymbolVector> {
    spec.validate()?;
    let plan = Arc::new(DftPlan::new(spec.embedding_size())?);
    build_symbol_with_plan(spec, source, plan)
}

/// As [`build_symbol`], reusing a transform plan of length `spec.embedding_size()`.
pub fn build_symbol_with_plan(
    spec: &MatrixSpec,
    source: &impl SymbolSource,
    plan: Arc<DftPlan>,
) -> Result<SymbolVector> {
    spec.validate()?;
    let big_n = spec.embedding_size();
    let n = spec.n;
    let a = match (spec.family.is_toeplitz_like(), spec.symmetric) {
        // (a_0, …, a_{n-1}, a_{-p}, …, a_{-1}), every position an independent draw
        (true, false) | (false, false) => (0..big_n as u64).map(|k| source.sample(k)).collect(),
        // a_0, …, a_n drawn, wrapped symmetrically into length 2n
        (true, true) => {
            let base: Vec<f64> = (0..=n as u64).map(|k| source.sample(k)).collect();
            (0..big_n).map(|k| base[k.min(big_n - k)]).collect()
        }
        // a_0, …, a_{⌊n/2⌋}, row a_{min(k, n-k)}
        (false, true) => {
            let base: Vec<f64> = (0..=(n / 2) as u64).map(|k| source.sample(k)).collect();
            (0..n).map(|k| base[k.min(n - k)]).collect()
        }
    };
    SymbolVector::from_row_with_plan(a, plan)
}

fn check_symbol(sym: &SymbolVector, spec: &MatrixSpec) -> Result<()> {
    spec.validate()?;
    if sym.embedding_size() != spec.embedding_size() {
        return invalid(format!(
            "symbol has embedding size {}, spec needs {}",
            sym.embedding_size(),
            spec.embedding_size()
        ));
    }
    Ok(())
}

/// Reusable fast product with one random matrix.
#[derive(Debug, Clone, Copy)]
pub struct StructuredOperator<'a> {
    sym: &'a SymbolVector,
    p: usize,
    n: usize,
    reversed: bool,
}

impl<'a> StructuredOperator<'a> {
    pub fn new(sym: &'a SymbolVector, spec: &MatrixSpec) -> Result<Self> {
        check_symbol(sym, spec)?;
        Ok(Self {
            sym,
            p: spec.p,
            n: spec.n,
            reversed: spec.family.is_reversed(),
        })
    }

    pub fn rows(&self) -> usize {
        self.p
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// `y = A x`; `buf` is length-`N` workspace.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64], buf: &mut Vec<Complex64>) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.p);
        let big_n = self.sym.embedding_size();
        buf.clear();
        if self.reversed {
            buf.extend(x.iter().rev().map(|&v| Complex64::new(v, 0.0)));
        } else {
            buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        }
        buf.resize(big_n, Complex64::new(0.0, 0.0));
        self.circulant_in_place(buf, false);
        for (dst, z) in y.iter_mut().zip(buf.iter()) {
            *dst = z.re;
        }
    }

    /// `x = Aᵀ y`; `buf` is length-`N` workspace.
    pub fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64], buf: &mut Vec<Complex64>) {
        debug_assert_eq!(y.len(), self.p);
        debug_assert_eq!(x.len(), self.n);
        let big_n = self.sym.embedding_size();
        buf.clear();
        buf.extend(y.iter().map(|&v| Complex64::new(v, 0.0)));
        buf.resize(big_n, Complex64::new(0.0, 0.0));
        self.circulant_in_place(buf, true);
        if self.reversed {
            for (dst, z) in x.iter_mut().zip(buf[..self.n].iter().rev()) {
                *dst = z.re;
            }
        } else {
            for (dst, z) in x.iter_mut().zip(buf.iter()) {
                *dst = z.re;
            }
        }
    }

    // z ← √N F diag(d) F̄ᵀ z, or with conj(d) for the transpose
    fn circulant_in_place(&self, z: &mut [Complex64], transpose: bool) {
        let plan = self.sym.plan();
        plan.inverse_in_place(z);
        let root = (self.sym.embedding_size() as f64).sqrt();
        for (v, d) in z.iter_mut().zip(self.sym.d()) {
            let dd = if transpose { d.conj() } else { *d };
            *v *= dd * root;
        }
        plan.forward_in_place(z);
    }
}

/// Fast `y = A x` through the embedding circulant.
pub fn matvec(sym: &SymbolVector, spec: &MatrixSpec, x: &[f64]) -> Result<Vec<f64>> {
    let op = StructuredOperator::new(sym, spec)?;
    if x.len() != spec.n {
        return invalid(format!("x has length {}, expected n = {}", x.len(), spec.n));
    }
    let mut y = vec![0.0; spec.p];
    op.apply_into(x, &mut y, &mut Vec::new());
    Ok(y)
}

/// Fast `x = Aᵀ y`.
pub fn rmatvec(sym: &SymbolVector, spec: &MatrixSpec, y: &[f64]) -> Result<Vec<f64>> {
    let op = StructuredOperator::new(sym, spec)?;
    if y.len() != spec.p {
        return invalid(format!("y has length {}, expected p = {}", y.len(), spec.p));
    }
    let mut x = vec![0.0; spec.n];
    op.apply_adjoint_into(y, &mut x, &mut Vec::new());
    Ok(x)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "{} entries do not fill a {rows}×{cols} matrix",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Fills the `p × n` matrix entry by entry from its defining formula.
pub fn dense_materialize(sym: &SymbolVector, spec: &MatrixSpec) -> Result<DenseMatrix> {
    check_symbol(sym, spec)?;
    let (p, n) = (spec.p, spec.n);
    if p.saturating_mul(n) > DENSE_ENTRY_LIMIT {
        return Err(Error::Resource(format!(
            "{p}×{n} dense matrix exceeds {DENSE_ENTRY_LIMIT} entries"
        )));
    }
    let a = sym.a();
    let big_n = a.len();
    let mut data = Vec::with_capacity(p * n);
    for i in 0..p {
        for col in 0..n {
            let j = if spec.family.is_reversed() { n - 1 - col } else { col };
            let v = match (spec.family.is_toeplitz_like(), spec.symmetric) {
                (true, false) => {
                    let t = j as isize - i as isize;
                    if t >= 0 {
                        a[t as usize]
                    } else {
                        a[(big_n as isize + t) as usize]
                    }
                }
                (true, true) => a[i.abs_diff(j)],
                (false, false) => a[(j + n - i) % n],
                (false, true) => {
                    // n/2 - |n/2 - k| evaluated in half-units
                    let k = i.abs_diff(j);
                    a[(n - n.abs_diff(2 * k)) / 2]
                }
            };
            data.push(v);
        }
    }
    DenseMatrix::new(p, n, data)
}

/// Entry `(k, l)` of the projection `P_{r,N}` onto the first `r` Fourier columns.
pub fn projection_entry(r: usize, big_n: usize, k: usize, l: usize) -> Result<Complex64> {
    if r == 0 || r > big_n {
        return invalid(format!("r = {r} outside 1..={big_n}"));
    }
    if k >= big_n || l >= big_n {
        return invalid(format!("index ({k}, {l}) outside 0..{big_n}"));
    }
    let nf = big_n as f64;
    if k == l {
        return Ok(Complex64::new(r as f64 / nf, 0.0));
    }
    let delta = ((l + big_n - k) % big_n) as f64;
    let num = Complex64::new(0.0, 2.0 * PI * delta * (r as f64) / nf).exp();
    let den = Complex64::new(0.0, 2.0 * PI * delta / nf).exp();
    Ok((Complex64::new(1.0, 0.0) - num) / (Complex64::new(1.0, 0.0) - den) / nf)
}
