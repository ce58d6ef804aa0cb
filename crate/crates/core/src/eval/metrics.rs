use serde::{Deserialize, Serialize};

use crate::channel::ChannelSnapshot;
use crate::error::{Error, Result};
use crate::linalg::diff_norm_sqr;

/// Reported in place of `-inf` for exact predictions.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `10 log10(r)`, floored at [`NMSE_FLOOR_DB`].
pub fn ratio_to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        return NMSE_FLOOR_DB;
    }
    (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
}

/// Squared prediction error over squared truth norm.
pub fn nmse_ratio(predicted: &ChannelSnapshot, truth: &ChannelSnapshot) -> Result<f64> {
    if predicted.dims() != truth.dims() {
        return Err(Error::DimensionMismatch(format!(
            "prediction dims {:?} differ from truth dims {:?}",
            predicted.dims(),
            truth.dims()
        )));
    }
    let energy = truth.norm_sqr();
    if energy == 0.0 {
        return Err(Error::ZeroNormTruth);
    }
    Ok(diff_norm_sqr(predicted.as_slice(), truth.as_slice()) / energy)
}

pub fn nmse_db(predicted: &ChannelSnapshot, truth: &ChannelSnapshot) -> Result<f64> {
    nmse_ratio(predicted, truth).map(ratio_to_db)
}

/// Spectral efficiency of one channel use, bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEfficiency {
    pub per_ue: Vec<f64>,
    pub sum: f64,
}

/// `sinr[k][i]` is UE `k` on frequency bin `i`. Each UE gets the mean of
/// `log2(1 + sinr)` over its bins.
pub fn spectral_efficiency(sinr: &[Vec<f64>]) -> Result<SpectralEfficiency> {
    let per_ue = sinr
        .iter()
        .map(|bins| {
            if bins.is_empty() {
                return Err(Error::Empty("sinr bins"));
            }
            if let Some(bad) = bins.iter().find(|s| s.is_nan() || **s < 0.0) {
                return Err(Error::invalid("sinr", format!("must be >= 0, got {bad}")));
            }
            Ok(bins.iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).sum::<f64>() / bins.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let sum = per_ue.iter().sum();
    Ok(SpectralEfficiency { per_ue, sum })
}

/// Sample mean and standard deviation (`n - 1` denominator, zero for a
/// single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
