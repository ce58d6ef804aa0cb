//! Downlink chain: EZF precoding on (predicted) CSI and MMSE-IRC reception
//! on the true channel.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, Svd};

/// Singular values below this fraction of the largest count as zero when
/// inverting the effective channel.
pub const ZF_REL_TOL: f64 = 1e-10;

/// Interference-plus-noise covariance is loaded with at least this
/// fraction of the desired signal power, which caps the SINR at `1e12`
/// when noise and interference both vanish.
pub const IRC_REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// `n_t x K`, column `k` serves UE `k`.
    pub w: CMatrix,
    /// The effective channel lost rank and was pseudo-inverted.
    pub rank_deficient: bool,
}

impl Precoder {
    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Effective row `u_1^H H_k`, with `u_1` the dominant left singular vector
/// of `H_k`. The phase of `u_1` is fixed so its largest entry is real.
pub fn effective_row(h: &CMatrix) -> CVector {
    let svd = Svd::new(h);
    if svd.singular_values.is_empty() {
        return CVector::zeros(h.ncols());
    }
    let mut u1 = svd.u.column(0).clone_owned();
    let pivot = u1.iter().copied().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()));
    if let Some(p) = pivot.filter(|p| p.norm() > 0.0) {
        u1 *= p.conj() / p.norm();
    }
    // (u1^H H)^T as a column
    (u1.adjoint() * h).transpose()
}

/// `channels[k]` is the `n_r x n_t` estimate for UE `k` at one frequency.
/// Columns of the zero-forcing solution on the stacked effective rows get
/// equal power, `power / K` each.
pub fn ezf_precoder(channels: &[CMatrix], power: f64) -> Result<Precoder> {
    let k = channels.len();
    if k == 0 {
        return Err(Error::Empty("UE channel list"));
    }
    let n_t = channels[0].ncols();
    if k > n_t {
        return Err(Error::invalid("n_ues", format!("{k} UEs exceed {n_t} BS antennas")));
    }
    if let Some(bad) = channels.iter().find(|h| h.ncols() != n_t) {
        return Err(Error::DimensionMismatch(format!(
            "UE channel has {} columns, expected {n_t}",
            bad.ncols()
        )));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::invalid("power", format!("must be positive, got {power}")));
    }
    let mut h_eff = CMatrix::zeros(k, n_t);
    for (row, h) in channels.iter().enumerate() {
        h_eff.set_row(row, &effective_row(h).transpose());
    }
    let svd = Svd::new(&h_eff);
    let s_max = svd.singular_values.first().copied().unwrap_or(0.0);
    let keep = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > ZF_REL_TOL * s_max)
        .count();
    let rank_deficient = keep < k;
    // pinv = V_k diag(1/s) U_k^H
    let mut v = svd.v.columns(0, keep).clone_owned();
    for (j, &s) in svd.singular_values[..keep].iter().enumerate() {
        v.column_mut(j).unscale_mut(s);
    }
    let mut w = v * svd.u.columns(0, keep).adjoint();

    let per_ue = (power / k as f64).sqrt();
    for mut col in w.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.scale_mut(per_ue / norm);
        }
    }
    // a UE whose column vanished gets nothing; keep the total on the others
    let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if total > 0.0 && (total - power).abs() > 1e-12 * power {
        w.scale_mut((power / total).sqrt());
    }
    Ok(Precoder { w, rank_deficient })
}

/// Per-UE output SINR of the MMSE-IRC combiner with genie knowledge of the
/// interference covariance: `g_k^H Q_k^{-1} g_k`,
/// `Q_k = sum_{j != k} g_j g_j^H + noise I`, `g_j = H_k w_j`.
pub fn mmse_irc_sinr(true_channels: &[CMatrix], precoder: &CMatrix, noise_power: f64) -> Result<Vec<f64>> {
    if true_channels.len() != precoder.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} UE channels, precoder has {} columns",
            true_channels.len(),
            precoder.ncols()
        )));
    }
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::invalid(
            "noise_power",
            format!("must be >= 0, got {noise_power}"),
        ));
    }
    true_channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            if h.ncols() != precoder.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "UE {k} channel has {} columns, precoder has {} rows",
                    h.ncols(),
                    precoder.nrows()
                )));
            }
            let g = h * precoder;
            let g_k = g.column(k).clone_owned();
            let signal = g_k.norm_squared();
            if signal == 0.0 {
                return Ok(0.0);
            }
            let n_r = h.nrows();
            let load = noise_power.max(IRC_REGULARIZATION * signal);
            let mut q = CMatrix::identity(n_r, n_r) * Complex64::new(load, 0.0);
            for (j, g_j) in g.column_iter().enumerate() {
                if j != k {
                    q += g_j * g_j.adjoint();
                }
            }
            let x = match q.clone().cholesky() {
                Some(chol) => chol.solve(&g_k),
                None => {
                    q.pseudo_inverse(0.0)
                        .map_err(|e| Error::invalid("interference covariance", e.to_string()))?
                        * &g_k
                }
            };
            Ok(g_k.dotc(&x).re.max(0.0))
        })
        .collect()
}
