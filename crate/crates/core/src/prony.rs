//! Prony fitting and extrapolation.
//!
//! A signal made of `N` (damped) complex exponentials satisfies the linear
//! recursion `sum_{n<N} p_n y(n + m) = -y(N + m)`, where `p_n` are the
//! coefficients of the monic polynomial whose roots are the poles. Fitting
//! the `p_n` by least squares and running the recursion forward predicts
//! future samples. The vector form shares one coefficient set across all
//! entries of a sample vector.
//!
//! All windows and sample lists are oldest-first.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::SampleTrack;
use crate::denoise::{tk_solve, TruncationPolicy};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, Svd};

/// Relative singular-value cutoff used by the default pseudoinverse.
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

/// Least-squares system `Y p = -h` for the Prony coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelSystem {
    pub matrix: CMatrix,
    pub rhs: CVector,
}

impl HankelSystem {
    /// Hankel system from a scalar series: row `k` is `y(k..k+N)` and the
    /// right-hand side is `y(k + N)`, for every `k` the samples allow.
    /// With exactly `2N` samples this is the square `N x N` layout.
    pub fn scalar(samples: &[Complex64], order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("order", "must be at least 1"));
        }
        if samples.len() < 2 * order {
            return Err(Error::InsufficientSamples {
                needed: 2 * order,
                got: samples.len(),
            });
        }
        let rows = samples.len() - order;
        Ok(Self {
            matrix: CMatrix::from_fn(rows, order, |k, j| samples[k + j]),
            rhs: CVector::from_fn(rows, |k, _| samples[k + order]),
        })
    }

    /// Stacked vector system. For each shift `m` the block
    /// `[y(m) .. y(m+N-1)] p = -y(m+N)` is appended; with `N + 1` samples
    /// this is the single block whose columns are the samples themselves.
    pub fn vector(samples: &[&[Complex64]], order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("order", "must be at least 1"));
        }
        if samples.len() < order + 1 {
            return Err(Error::InsufficientSamples {
                needed: order + 1,
                got: samples.len(),
            });
        }
        let len = samples[0].len();
        if let Some(bad) = samples.iter().position(|s| s.len() != len) {
            return Err(Error::DimensionMismatch(format!(
                "sample vector {bad} has length {}, expected {len}",
                samples[bad].len()
            )));
        }
        let blocks = samples.len() - order;
        let mut matrix = CMatrix::zeros(blocks * len, order);
        let mut rhs = CVector::zeros(blocks * len);
        for m in 0..blocks {
            for j in 0..order {
                for (r, &v) in samples[m + j].iter().enumerate() {
                    matrix[(m * len + r, j)] = v;
                }
            }
            for (r, &v) in samples[m + order].iter().enumerate() {
                rhs[m * len + r] = v;
            }
        }
        Ok(Self { matrix, rhs })
    }

    /// `Y p + h`, the recursion residual for a coefficient set.
    pub fn residual(&self, coeffs: &PronyCoefficients) -> CVector {
        let p = CVector::from_column_slice(coeffs.as_slice());
        &self.matrix * p + &self.rhs
    }
}

/// Prony coefficients `p_0 .. p_{N-1}`; `p_N = 1` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct PronyCoefficients(Vec<Complex64>);

impl PronyCoefficients {
    pub fn new(p: Vec<Complex64>) -> Self {
        Self(p)
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// Evaluates `z^N + sum_n p_n z^n`.
    pub fn characteristic(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for &p in self.0.iter().rev() {
            acc = acc * z + p;
        }
        acc
    }

    /// One recursion step: `-sum_n p_n window[n]`.
    pub fn next_value(&self, window: &[Complex64]) -> Complex64 {
        -self.0.iter().zip(window).map(|(p, y)| p * y).sum::<Complex64>()
    }
}

/// How the least-squares system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolverStrategy {
    /// Minimum-norm least squares via the pseudoinverse.
    Pinv { rel_tol: f64 },
    /// Truncated SVD keeping the dominant singular values.
    TuftsKumaresan(TruncationPolicy),
}

impl Default for SolverStrategy {
    fn default() -> Self {
        SolverStrategy::Pinv {
            rel_tol: DEFAULT_PINV_TOL,
        }
    }
}

impl SolverStrategy {
    /// Returns `-Y^+ h` (or its truncated-SVD counterpart).
    pub fn coefficients(&self, system: &HankelSystem) -> PronyCoefficients {
        let p = match *self {
            SolverStrategy::Pinv { rel_tol } => -pinv_solve(&system.matrix, &system.rhs, rel_tol),
            SolverStrategy::TuftsKumaresan(policy) => tk_solve(&system.matrix, &system.rhs, &policy),
        };
        PronyCoefficients(p.iter().copied().collect())
    }
}

/// Minimum-norm least-squares solution `A^+ b`; singular values below
/// `rel_tol * sigma_max` are treated as zero.
pub fn pinv_solve(a: &CMatrix, b: &CVector, rel_tol: f64) -> CVector {
    assert_eq!(a.nrows(), b.len(), "pinv_solve: rhs length must equal row count");
    let svd = Svd::new(a);
    let s_max = svd.singular_values.first().copied().unwrap_or(0.0);
    if s_max == 0.0 {
        return CVector::zeros(a.ncols());
    }
    let keep = svd.singular_values.iter().take_while(|&&s| s > rel_tol * s_max).count();
    svd.solve_truncated(b, keep)
}

pub fn scalar_prony_fit(samples: &[Complex64], order: usize) -> Result<PronyCoefficients> {
    scalar_prony_fit_with(samples, order, &SolverStrategy::default())
}

pub fn scalar_prony_fit_with(
    samples: &[Complex64],
    order: usize,
    solver: &SolverStrategy,
) -> Result<PronyCoefficients> {
    Ok(solver.coefficients(&HankelSystem::scalar(samples, order)?))
}

/// Runs the recursion `steps` times from `window` (the `N` most recent
/// values, oldest first) and returns the final value.
pub fn scalar_prony_predict(coeffs: &PronyCoefficients, window: &[Complex64], steps: usize) -> Result<Complex64> {
    if steps < 1 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    if window.len() != coeffs.order() {
        return Err(Error::DimensionMismatch(format!(
            "window holds {} values, order is {}",
            window.len(),
            coeffs.order()
        )));
    }
    let mut buf: VecDeque<Complex64> = window.iter().copied().collect();
    let mut next = Complex64::new(0.0, 0.0);
    for _ in 0..steps {
        next = coeffs.next_value(buf.make_contiguous());
        buf.pop_front();
        buf.push_back(next);
    }
    Ok(next)
}

/// Sliding-window vector recursion. The window always holds the `N` most
/// recent vectors; each step appends the new prediction and drops the
/// oldest entry.
#[derive(Debug, Clone)]
pub struct PronyRecursion {
    coeffs: PronyCoefficients,
    window: VecDeque<Vec<Complex64>>,
    predicted: usize,
}

impl PronyRecursion {
    pub fn new(coeffs: PronyCoefficients, window: Vec<Vec<Complex64>>) -> Result<Self> {
        if window.len() != coeffs.order() {
            return Err(Error::DimensionMismatch(format!(
                "window holds {} vectors, order is {}",
                window.len(),
                coeffs.order()
            )));
        }
        Ok(Self {
            coeffs,
            window: window.into(),
            predicted: 0,
        })
    }

    pub fn coefficients(&self) -> &PronyCoefficients {
        &self.coeffs
    }

    pub fn window(&self) -> &VecDeque<Vec<Complex64>> {
        &self.window
    }

    /// Number of window entries that are predictions.
    pub fn predictions_in_window(&self) -> usize {
        self.predicted.min(self.window.len())
    }

    pub fn step(&mut self) -> Vec<Complex64> {
        let len = self.window.front().map_or(0, Vec::len);
        let mut next = vec![Complex64::new(0.0, 0.0); len];
        for (p, column) in self.coeffs.as_slice().iter().zip(&self.window) {
            for (acc, &y) in next.iter_mut().zip(column) {
                *acc -= p * y;
            }
        }
        self.window.pop_front();
        self.window.push_back(next.clone());
        self.predicted += 1;
        next
    }
}

/// Fits `p = -Y^+ y(N)` from `N + 1` (or more) equal-length sample vectors.
pub fn vector_prony_fit(samples: &[&[Complex64]], order: usize) -> Result<PronyCoefficients> {
    vector_prony_fit_with(samples, order, &SolverStrategy::default())
}

pub fn vector_prony_fit_with(
    samples: &[&[Complex64]],
    order: usize,
    solver: &SolverStrategy,
) -> Result<PronyCoefficients> {
    Ok(solver.coefficients(&HankelSystem::vector(samples, order)?))
}

/// Vector Prony channel prediction over the whole stacked channel vector.
///
/// With `L + 1` samples and order `N` (default `N = L`) the coefficients
/// are fitted on the track, the window is seeded with the `N` most recent
/// samples and the recursion is run `n_d` times. Returns the predicted
/// stacked vector `n_d` periods after the last sample.
pub fn vector_prony_predict(
    track: &SampleTrack,
    n_d: usize,
    order: Option<usize>,
    solver: &SolverStrategy,
) -> Result<Vec<Complex64>> {
    if track.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: track.len(),
        });
    }
    if n_d < 1 {
        return Err(Error::invalid("n_d", "must be at least 1"));
    }
    let l = track.len() - 1;
    let order = order.unwrap_or(l);
    if order == 0 || order > l {
        return Err(Error::invalid("order", format!("must be in 1..={l}, got {order}")));
    }
    let vectors: Vec<&[Complex64]> = track.snapshots().iter().map(|s| s.as_slice()).collect();
    let coeffs = vector_prony_fit_with(&vectors, order, solver)?;
    let window = vectors[vectors.len() - order..].iter().map(|v| v.to_vec()).collect();
    let mut rec = PronyRecursion::new(coeffs, window)?;
    let mut out = Vec::new();
    for _ in 0..n_d {
        out = rec.step();
    }
    Ok(out)
}
