//! Noise-robust solving and covariance-based sample denoising.
//!
//! * [`tk_solve`] is a Tufts-Kumaresan least-squares solve: keep the
//!   shortest prefix of singular values whose sum reaches `gamma_tk` of the
//!   total, and invert only that part.
//! * [`estimate_covariance`], [`estimate_noise_power`] and
//!   [`build_lmmse_filter`] produce the eigen-domain shrinkage filter
//!   `W = U diag(d) U^H`, `d_i = max(0, (s_i - n_r sigma^2) / s_i)`, applied
//!   to every `n_r x n_t` frequency slice as `H W`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSnapshot;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, CVector, Svd};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub gamma_tk: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { gamma_tk: 0.99 }
    }
}

impl TruncationPolicy {
    pub fn new(gamma_tk: f64) -> Result<Self> {
        if !(gamma_tk > 0.0 && gamma_tk <= 1.0) {
            return Err(Error::invalid("gamma_tk", format!("must be in (0, 1], got {gamma_tk}")));
        }
        Ok(Self { gamma_tk })
    }

    /// Smallest `k` with `sum(s[..k]) >= gamma_tk * sum(s)`; `s` descending.
    pub fn retained(&self, singular_values: &[f64]) -> usize {
        let total: f64 = singular_values.iter().sum();
        if total <= 0.0 {
            return 0;
        }
        if self.gamma_tk >= 1.0 {
            return singular_values.iter().filter(|&&s| s > 0.0).count();
        }
        let target = self.gamma_tk * total;
        let mut acc = 0.0;
        for (k, &s) in singular_values.iter().enumerate() {
            acc += s;
            if acc >= target {
                return k + 1;
            }
        }
        singular_values.len()
    }
}

/// `x = -V_s diag(1/s_s) U_s^H b`. The sign is included so the result drops
/// in wherever `-A^+ b` is expected.
pub fn tk_solve(a: &CMatrix, b: &CVector, policy: &TruncationPolicy) -> CVector {
    assert_eq!(a.nrows(), b.len(), "tk_solve: rhs length must equal row count");
    let svd = Svd::new(a);
    let keep = policy.retained(&svd.singular_values);
    -svd.solve_truncated(b, keep)
}

/// Sample covariance `E{H^H H}` over time and frequency, with its
/// eigen-decomposition (eigenvalues descending, clamped at zero).
#[derive(Debug, Clone)]
pub struct SpatialCovariance {
    pub matrix: CMatrix,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    /// Receive antennas contributing to each `H` slice.
    pub n_r: usize,
}

impl SpatialCovariance {
    pub fn from_matrix(matrix: CMatrix, n_r: usize) -> Self {
        let hermitian = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let (mut eigenvalues, eigenvectors) = hermitian_eigen(&hermitian);
        eigenvalues.iter_mut().for_each(|s| *s = s.max(0.0));
        Self {
            matrix: hermitian,
            eigenvalues,
            eigenvectors,
            n_r,
        }
    }

    pub fn n_t(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Averages `H(f, t)^H H(f, t)` over every snapshot and frequency bin.
pub fn estimate_covariance(samples: &[ChannelSnapshot]) -> Result<SpatialCovariance> {
    let first = samples.first().ok_or(Error::Empty("covariance samples"))?;
    let (n_r, n_t, n_f) = first.dims();
    let mut acc = CMatrix::zeros(n_t, n_t);
    for snap in samples {
        if snap.dims() != (n_r, n_t, n_f) {
            return Err(Error::DimensionMismatch(format!(
                "snapshot dims {:?} differ from {:?}",
                snap.dims(),
                (n_r, n_t, n_f)
            )));
        }
        for i in 0..n_f {
            let h = snap.frequency_slice(i);
            acc += h.adjoint() * h;
        }
    }
    let count = (samples.len() * n_f) as f64;
    Ok(SpatialCovariance::from_matrix(acc / Complex64::new(count, 0.0), n_r))
}

/// Mean of the smallest `ceil(tail_fraction * n_t)` eigenvalues over `n_r`.
pub fn estimate_noise_power(cov: &SpatialCovariance, tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::invalid(
            "tail_fraction",
            format!("must be in (0, 1), got {tail_fraction}"),
        ));
    }
    let n_t = cov.eigenvalues.len();
    if n_t == 0 {
        return Err(Error::Empty("covariance"));
    }
    let count = ((tail_fraction * n_t as f64).ceil() as usize).clamp(1, n_t);
    let tail = &cov.eigenvalues[n_t - count..];
    Ok(tail.iter().sum::<f64>() / count as f64 / cov.n_r.max(1) as f64)
}

/// Linear denoising filter applied as `H W`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseFilter {
    pub w: CMatrix,
    /// Shrinkage gains, aligned with the covariance eigenvalues.
    pub gains: Vec<f64>,
}

impl DenoiseFilter {
    pub fn identity(n_t: usize) -> Self {
        Self {
            w: CMatrix::identity(n_t, n_t),
            gains: vec![1.0; n_t],
        }
    }
}

pub fn build_lmmse_filter(cov: &SpatialCovariance, sigma_n2: f64, n_r: usize) -> Result<DenoiseFilter> {
    if !(sigma_n2.is_finite() && sigma_n2 >= 0.0) {
        return Err(Error::invalid("sigma_n2", format!("must be >= 0, got {sigma_n2}")));
    }
    let floor = n_r as f64 * sigma_n2;
    let gains: Vec<f64> = cov
        .eigenvalues
        .iter()
        .map(|&s| {
            if floor == 0.0 {
                1.0
            } else if s <= floor {
                0.0
            } else {
                (s - floor) / s
            }
        })
        .collect();
    let u = &cov.eigenvectors;
    let mut scaled = u.clone();
    for (k, &g) in gains.iter().enumerate() {
        scaled.column_mut(k).scale_mut(g);
    }
    Ok(DenoiseFilter {
        w: scaled * u.adjoint(),
        gains,
    })
}

/// Right-multiplies every frequency slice by `W`.
pub fn apply_filter(snap: &ChannelSnapshot, filter: &DenoiseFilter) -> Result<ChannelSnapshot> {
    let (n_r, n_t, n_f) = snap.dims();
    if filter.w.nrows() != n_t || filter.w.ncols() != n_t {
        return Err(Error::DimensionMismatch(format!(
            "filter is {}x{}, snapshot has n_t = {n_t}",
            filter.w.nrows(),
            filter.w.ncols()
        )));
    }
    let mut out = ChannelSnapshot::zeros(n_r, n_t, n_f, snap.t);
    for i in 0..n_f {
        out.set_frequency_slice(i, &(snap.frequency_slice(i) * &filter.w));
    }
    Ok(out)
}
