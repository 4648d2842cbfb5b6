//! Unitary discrete Fourier transforms of arbitrary length.
//!
//! Conventions: the forward transform is
//!
//! ```text
//! y_s = N^{-1/2} Σ_t exp(+2πi st/N) x_t
//! ```
//!
//! and the inverse uses the conjugate kernel with the same `N^{-1/2}` factor,
//! so both directions are unitary. Lengths need not be powers of two; the
//! backing `rustfft` planner handles prime and awkward lengths with
//! Bluestein/Rader reductions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// A reusable pair of unitary transforms for one length.
///
/// Plans are immutable once built and can be shared across threads.
#[derive(Clone)]
pub struct DftPlan {
    len: usize,
    scale: f64,
    // rustfft's "inverse" carries the +i kernel, which is our forward direction.
    plus: Arc<dyn Fft<f64>>,
    minus: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftPlan").field("len", &self.len).finish()
    }
}

impl DftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return invalid("transform length must be at least 1");
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            scale: (len as f64).sqrt().recip(),
            plus: planner.plan_fft_inverse(len),
            minus: planner.plan_fft_forward(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Forward transform in place. Panics if `buf.len() != self.len()`.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        self.plus.process(buf);
        let s = self.scale;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Inverse transform in place. Panics if `buf.len() != self.len()`.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        self.minus.process(buf);
        let s = self.scale;
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

/// Unitary forward DFT with the `exp(+2πi st/N)` kernel.
pub fn dft_forward(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = DftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward_in_place(&mut out);
    Ok(out)
}

/// Inverse of [`dft_forward`].
pub fn dft_inverse(y: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = DftPlan::new(y.len())?;
    let mut out = y.to_vec();
    plan.inverse_in_place(&mut out);
    Ok(out)
}

/// Full linear convolution, `c_k = Σ_j a_j b_{k-j}`, of length `|a| + |b| - 1`.
pub fn convolve_full(a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.is_empty() || b.is_empty() {
        return invalid("convolution inputs must be nonempty");
    }
    let out_len = a.len() + b.len() - 1;
    let plan = DftPlan::new(out_len.next_power_of_two())?;
    let mut fa = pad(a, plan.len());
    let mut fb = pad(b, plan.len());
    plan.inverse_in_place(&mut fa);
    plan.inverse_in_place(&mut fb);
    // Unitary scaling: inverse(a ⊛ b) = √L · inverse(a) · inverse(b).
    let root = (plan.len() as f64).sqrt();
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y * root;
    }
    plan.forward_in_place(&mut fa);
    fa.truncate(out_len);
    Ok(fa)
}

/// Real-valued [`convolve_full`].
pub fn convolve_full_real(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let ca: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let cb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(convolve_full(&ca, &cb)?.into_iter().map(|z| z.re).collect())
}

/// Two-sided autocorrelation `α_j = Σ_ν a_{j+ν} conj(a_ν)` for lags `-(L-1)..=(L-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    values: Vec<Complex64>,
    max_lag: usize,
}

impl Autocorrelation {
    /// Largest absolute lag, `L - 1`.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Value at lag `j`; zero outside the support.
    pub fn lag(&self, j: isize) -> Complex64 {
        let idx = j + self.max_lag as isize;
        if idx < 0 || idx as usize >= self.values.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[idx as usize]
        }
    }

    /// Values ordered from lag `-(L-1)` to `L-1`.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `Σ_j conj(α_j) γ_j` over the lags both sequences share.
    pub fn inner(&self, other: &Autocorrelation) -> Complex64 {
        let m = self.max_lag.min(other.max_lag) as isize;
        (-m..=m).map(|j| self.lag(j).conj() * other.lag(j)).sum()
    }
}

pub fn autocorrelate(a: &[Complex64]) -> Result<Autocorrelation> {
    if a.is_empty() {
        return invalid("autocorrelation input must be nonempty");
    }
    let reversed: Vec<Complex64> = a.iter().rev().map(|z| z.conj()).collect();
    let values = convolve_full(a, &reversed)?;
    Ok(Autocorrelation {
        values,
        max_lag: a.len() - 1,
    })
}

pub fn autocorrelate_real(a: &[f64]) -> Result<Autocorrelation> {
    let ca: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    autocorrelate(&ca)
}

fn pad(x: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(x);
    out.resize(len, Complex64::new(0.0, 0.0));
    out
}
