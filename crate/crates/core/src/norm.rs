//! Largest singular values.
//!
//! The fast path iterates on `AᵀA` with both products going through the
//! circulant embedding, so a `p × n` instance costs `O(N log N)` per step. The dense path forms the smaller Gram matrix and
//! diagonalises it; it shares no code with the fast path and serves as its
//! oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution as _, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng::keyed_generator;
use crate::structured::{DenseMatrix, MatrixSpec, StructuredOperator, SymbolVector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Largest `p · n` accepted by [`spectral_norm_dense`].
pub const DENSE_NORM_LIMIT: usize = 10_000_000;

// Stagnation window for the degeneracy guard.
const STALL_WINDOW: usize = 50;
// Power steps before handing over to Lanczos.
const POWER_BUDGET: usize = 300;
// Krylov basis size per Lanczos cycle.
const LANCZOS_BASIS: usize = 32;
// Replicate slot reserved for power-iteration start vectors.
const START_VECTOR_SLOT: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormResult {
    pub sigma_max: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative Ritz residual of the `σ²` estimate (the relative change of the
    /// Rayleigh quotient if the budget ran out during power iteration).
    pub residual: f64,
}

/// Outcome of one power-iteration run on a symmetric PSD operator.
#[derive(Debug, Clone)]
pub(crate) struct PowerOutcome {
    pub vector: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Power iteration. `gram(x, z)` writes `z = G x` for unit `x` and returns the
/// Rayleigh quotient `⟨x, G x⟩`. Stops when its relative change is `≤ tol`.
pub(crate) fn power_iteration<G>(mut x: Vec<f64>, mut gram: G, tol: f64, max_iter: usize) -> PowerOutcome
where
    G: FnMut(&[f64], &mut [f64]) -> f64,
{
    normalize(&mut x);
    let mut z = vec![0.0; x.len()];
    let mut prev: Option<f64> = None;
    let mut last_delta = 0.0f64;
    let mut stall = 0usize;
    let mut residual = f64::INFINITY;
    let mut lambda = 0.0;

    for it in 1..=max_iter {
        lambda = gram(&x, &mut z);
        let znorm = norm2(&z);
        if znorm == 0.0 || !znorm.is_finite() {
            // x lies in the null space (or the operator is zero)
            return PowerOutcome {
                vector: x,
                lambda: lambda.max(0.0),
                iterations: it,
                converged: znorm == 0.0,
                residual: 0.0,
            };
        }
        if let Some(p) = prev {
            let delta = lambda - p;
            residual = if lambda != 0.0 { delta.abs() / lambda.abs() } else { 0.0 };
            if residual <= tol {
                return PowerOutcome {
                    vector: x,
                    lambda,
                    iterations: it,
                    converged: true,
                    residual,
                };
            }
            if residual <= 10.0 * tol && delta.signum() != last_delta.signum() {
                stall += 1;
            } else if residual > 10.0 * tol {
                stall = 0;
            }
            last_delta = delta;
            if stall >= STALL_WINDOW {
                return PowerOutcome {
                    vector: x,
                    lambda,
                    iterations: it,
                    converged: false,
                    residual,
                };
            }
        }
        prev = Some(lambda);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = zi / znorm;
        }
    }
    PowerOutcome {
        vector: x,
        lambda,
        iterations: max_iter,
        converged: false,
        residual,
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn normalize(x: &mut [f64]) {
    let s = norm2(x);
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

/// Deterministic pseudo-random unit start vector of length `n` for `seed`.
pub fn start_vector(seed: u64, attempt: u64, n: usize) -> Vec<f64> {
    let mut rng = keyed_generator(seed, START_VECTOR_SLOT, attempt);
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut x);
    x
}

/// `‖A‖₂` by matrix-free iteration on `AᵀA`.
///
/// Power iteration runs first, until its Rayleigh quotient settles to `tol`
/// or `POWER_BUDGET` steps pass. Restarted Lanczos then refines from that
/// iterate until the Ritz residual is below `tol` relative: with nearly tied
/// top singular values the Rayleigh quotient can settle long before it is
/// accurate. `max_iter` bounds the total number of `AᵀA` applications.
pub fn spectral_norm_fast(
    sym: &SymbolVector,
    spec: &MatrixSpec,
    tol: f64,
    max_iter: usize,
) -> Result<NormResult> {
    if tol.is_nan() || tol <= 0.0 {
        return invalid("tolerance must be positive");
    }
    if max_iter == 0 {
        return invalid("max_iter must be at least 1");
    }
    let op = StructuredOperator::new(sym, spec)?;
    let mut y = vec![0.0; spec.p];
    let mut buf: Vec<Complex64> = Vec::with_capacity(sym.embedding_size());
    let mut gram = |x: &[f64], z: &mut [f64]| {
        op.apply_into(x, &mut y, &mut buf);
        op.apply_adjoint_into(&y, z, &mut buf);
        y.iter().map(|v| v * v).sum::<f64>()
    };

    let x0 = start_vector(spec.seed, 0, spec.n);
    let power = power_iteration(x0, &mut gram, tol, max_iter.min(POWER_BUDGET));
    if power.iterations >= max_iter {
        return Ok(NormResult {
            sigma_max: power.lambda.max(0.0).sqrt(),
            iterations: power.iterations,
            converged: power.converged,
            residual: power.residual,
        });
    }
    let krylov = lanczos(power.vector, &mut gram, tol, max_iter - power.iterations);
    Ok(NormResult {
        sigma_max: krylov.lambda.max(0.0).sqrt(),
        iterations: power.iterations + krylov.iterations,
        converged: krylov.converged,
        residual: krylov.residual,
    })
}

/// Explicitly restarted Lanczos with full reorthogonalisation for the top
/// eigenpair of a symmetric PSD operator. Each cycle builds a Krylov basis of
/// size `LANCZOS_BASIS` from the current Ritz vector and stops once the
/// relative Ritz residual `β_k |s_k| / θ` is `≤ tol`.
pub(crate) fn lanczos<G>(mut x: Vec<f64>, mut gram: G, tol: f64, max_apply: usize) -> PowerOutcome
where
    G: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = x.len();
    let m = LANCZOS_BASIS.min(dim).max(1);
    normalize(&mut x);
    let mut applied = 0usize;
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut w = vec![0.0; dim];

    while applied < max_apply {
        basis.clear();
        basis.push(x.clone());
        let (mut alpha, mut beta) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let mut exhausted = false;
        for j in 0..m {
            if applied == max_apply {
                break;
            }
            alpha.push(gram(&basis[j], &mut w));
            applied += 1;
            // two passes of Gram–Schmidt against the whole basis
            for _ in 0..2 {
                for v in &basis {
                    let c: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let b = norm2(&w);
            beta.push(b);
            if b <= 1e-14 * alpha[0].abs().max(f64::MIN_POSITIVE) {
                exhausted = true;
                break;
            }
            if j + 1 < m {
                basis.push(w.iter().map(|v| v / b).collect());
            }
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let top = eig.eigenvalues.imax();
        theta = eig.eigenvalues[top];
        let s = eig.eigenvectors.column(top);
        let mut next = vec![0.0; dim];
        for (v, &c) in basis.iter().zip(s.iter()) {
            next.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
        }
        normalize(&mut next);
        x = next;
        let ritz = if exhausted { 0.0 } else { beta[k - 1] * s[k - 1].abs() };
        let scale = theta.abs().max(f64::MIN_POSITIVE);
        residual = ritz / scale;
        if exhausted || residual <= tol {
            return PowerOutcome {
                vector: x,
                lambda: theta,
                iterations: applied,
                converged: true,
                residual,
            };
        }
    }
    PowerOutcome {
        vector: x,
        lambda: theta,
        iterations: applied,
        converged: false,
        residual,
    }
}

/// `‖M‖₂` from a symmetric eigendecomposition of the smaller Gram matrix.
pub fn spectral_norm_dense(m: &DenseMatrix, tol: f64, max_iter: usize) -> Result<NormResult> {
    if tol.is_nan() || tol <= 0.0 {
        return invalid("tolerance must be positive");
    }
    if m.rows.saturating_mul(m.cols) > DENSE_NORM_LIMIT {
        return Err(Error::Resource(format!(
            "{}×{} exceeds the dense norm limit of {DENSE_NORM_LIMIT} entries",
            m.rows, m.cols
        )));
    }
    if m.rows == 0 || m.cols == 0 {
        return Ok(NormResult {
            sigma_max: 0.0,
            iterations: 0,
            converged: true,
            residual: 0.0,
        });
    }
    let a = DMatrix::from_row_slice(m.rows, m.cols, &m.data);
    let gram = if m.rows <= m.cols {
        &a * a.transpose()
    } else {
        a.transpose() * &a
    };
    match SymmetricEigen::try_new(gram, f64::EPSILON, max_iter) {
        Some(eig) => Ok(NormResult {
            sigma_max: eig.eigenvalues.max().max(0.0).sqrt(),
            iterations: 1,
            converged: true,
            residual: 0.0,
        }),
        None => Ok(NormResult {
            sigma_max: f64::NAN,
            iterations: max_iter,
            converged: false,
            residual: f64::INFINITY,
        }),
    }
}

/// `σ/√(p log n)`, or `σ/√(2 p log n)` for symmetric families.
pub fn scaled_norm(result: &NormResult, spec: &MatrixSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return invalid("scaled norm needs n ≥ 2");
    }
    let factor = if spec.symmetric { 2.0 } else { 1.0 };
    Ok(result.sigma_max / (factor * spec.p as f64 * (n as f64).ln()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Distribution, SeededStream};
    use crate::structured::{build_symbol, dense_materialize, Family};

    #[test]
    fn all_ones_toeplitz() {
        let spec = MatrixSpec::new(Family::Toeplitz, false, 3, 5);
        let sym = build_symbol(&spec, &|_k: u64| 1.0).unwrap();
        let r = spectral_norm_fast(&sym, &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(r.converged);
        assert!((r.sigma_max - 15f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn single_row_norm() {
        let spec = MatrixSpec::new(Family::Circulant, false, 1, 9).with_seed(4);
        let sym = build_symbol(&spec, &spec.stream()).unwrap();
        let row = norm2(sym.a());
        let r = spectral_norm_fast(&sym, &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((r.sigma_max - row).abs() < 1e-10 * row);
    }

    #[test]
    fn dense_known_values() {
        let m = DenseMatrix::new(2, 3, vec![3.0, 0.0, 0.0, 0.0, 4.0, 0.0]).unwrap();
        let r = spectral_norm_dense(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((r.sigma_max - 4.0).abs() < 1e-12);
        let (u, v) = ([1.0, 2.0], [2.0, 1.0, 2.0]);
        let data: Vec<f64> = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        let r = spectral_norm_dense(&DenseMatrix::new(2, 3, data).unwrap(), 1e-12, 1000).unwrap();
        assert!((r.sigma_max - 5f64.sqrt() * 3.0).abs() < 1e-12);
    }

    #[test]
    fn scaling() {
        let (p, n) = (10usize, 50usize);
        let spec = MatrixSpec::new(Family::Circulant, false, p, n);
        let res = NormResult {
            sigma_max: (p as f64 * (n as f64).ln()).sqrt(),
            iterations: 1,
            converged: true,
            residual: 0.0,
        };
        assert!((scaled_norm(&res, &spec, n).unwrap() - 1.0).abs() < 1e-15);
        let sym_spec = MatrixSpec::new(Family::Circulant, true, p, n);
        let res2 = NormResult {
            sigma_max: (2.0 * p as f64 * (n as f64).ln()).sqrt(),
            ..res
        };
        assert!((scaled_norm(&res2, &sym_spec, n).unwrap() - 1.0).abs() < 1e-15);
        assert!(scaled_norm(&res, &spec, 1).is_err());
    }

    #[test]
    fn bad_parameters() {
        let spec = MatrixSpec::new(Family::Circulant, false, 2, 4);
        let sym = build_symbol(&spec, &spec.stream()).unwrap();
        assert!(spectral_norm_fast(&sym, &spec, 0.0, 10).is_err());
        assert!(spectral_norm_fast(&sym, &spec, 1e-10, 0).is_err());
    }

    #[test]
    fn lower_envelope_rows_and_columns() {
        for seed in 0..20u64 {
            let spec = MatrixSpec::new(Family::ALL[seed as usize % 4], seed % 3 == 0, 9, 21)
                .with_seed(seed);
            let sym = build_symbol(&spec, &SeededStream::new(seed, 0, Distribution::Rademacher)).unwrap();
            let dense = dense_materialize(&sym, &spec).unwrap();
            let sigma = spectral_norm_dense(&dense, 1e-12, 1000).unwrap().sigma_max;
            let max_row = (0..9).map(|i| norm2(dense.row(i))).fold(0.0, f64::max);
            let max_col = (0..21)
                .map(|j| (0..9).map(|i| dense.get(i, j).powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            assert!(sigma >= max_row - 1e-12 && sigma >= max_col - 1e-12);
        }
    }

    #[test]
    fn nonconvergence_is_reported() {
        let spec = MatrixSpec::new(Family::Toeplitz, false, 30, 60).with_seed(3);
        let sym = build_symbol(&spec, &spec.stream()).unwrap();
        let r = spectral_norm_fast(&sym, &spec, 1e-15, 2).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }
}
