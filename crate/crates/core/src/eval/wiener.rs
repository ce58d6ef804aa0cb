//! FIR Wiener baseline: an `order`-tap linear predictor of the sample
//! `n_d` periods ahead, designed from the empirical autocorrelation.
//!
//! The autocorrelation `r(k) = E{x(l + k) x*(l)}` is estimated per UE
//! antenna, pooled over all of its BS-antenna/frequency series (they share
//! one Doppler spectrum), with the unbiased `1 / count` normalisation per
//! lag. The Wiener-Hopf system `R w = p`, `R[i][j] = r(j - i)`,
//! `p[i] = conj(r(n_d + i))`, is solved in the minimum-norm least-squares
//! sense and `x_hat = w^H [x_L, x_{L-1}, ...]`.

use num_complex::Complex64;

use crate::channel::{ChannelSnapshot, SampleTrack};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::prony::pinv_solve;

pub const WIENER_PINV_TOL: f64 = 1e-10;

/// Default tap count: half the track, capped by the available lags.
pub fn default_fir_order(samples: usize, n_d: usize) -> usize {
    (samples / 2).min(samples.saturating_sub(n_d)).max(1)
}

/// Unbiased lag estimates `r(0..=max_lag)` pooled over `series`.
pub fn pooled_autocorrelation(series: &[Vec<Complex64>], max_lag: usize) -> Vec<Complex64> {
    (0..=max_lag)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut count = 0usize;
            for x in series {
                for l in 0..x.len().saturating_sub(k) {
                    acc += x[l + k] * x[l].conj();
                    count += 1;
                }
            }
            if count == 0 {
                acc
            } else {
                acc / count as f64
            }
        })
        .collect()
}

/// Prediction taps `w` for autocorrelation `r`.
pub fn wiener_taps(r: &[Complex64], order: usize, n_d: usize) -> Result<CVector> {
    if r.len() < order + n_d {
        return Err(Error::InsufficientSamples {
            needed: order + n_d,
            got: r.len(),
        });
    }
    let lag = |k: isize| if k >= 0 { r[k as usize] } else { r[(-k) as usize].conj() };
    let big_r = CMatrix::from_fn(order, order, |i, j| lag(j as isize - i as isize));
    let p = CVector::from_fn(order, |i, _| r[n_d + i].conj());
    Ok(pinv_solve(&big_r, &p, WIENER_PINV_TOL))
}

pub fn fir_wiener_predict(track: &SampleTrack, order: usize, n_d: usize) -> Result<ChannelSnapshot> {
    if order == 0 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    if n_d == 0 {
        return Err(Error::invalid("n_d", "must be at least 1"));
    }
    // lags up to order - 1 + n_d must be observable at least once
    let needed = order + n_d;
    if track.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: track.len(),
        });
    }
    let (n_r, n_t, n_f) = track.dims();
    let len = n_t * n_f;
    let mut out = ChannelSnapshot::zeros(n_r, n_t, n_f, track.time_after(n_d));
    for u in 0..n_r {
        let series: Vec<Vec<Complex64>> = (0..len)
            .map(|e| track.snapshots().iter().map(|s| s.ue_vector(u)[e]).collect())
            .collect();
        let r = pooled_autocorrelation(&series, order + n_d - 1);
        let w = wiener_taps(&r, order, n_d)?;
        for (dst, x) in out.ue_vector_mut(u).iter_mut().zip(&series) {
            let last = x.len() - 1;
            *dst = (0..order).map(|i| w[i].conj() * x[last - i]).sum();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diff_norm_sqr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn track_from(series: &[Vec<Complex64>], dt: f64) -> SampleTrack {
        let n = series[0].len();
        let snaps = (0..n)
            .map(|l| {
                let data = series.iter().map(|x| x[l]).collect();
                ChannelSnapshot::from_stacked(1, series.len(), 1, l as f64 * dt, data).unwrap()
            })
            .collect();
        SampleTrack::new(dt, snaps).unwrap()
    }

    #[test]
    fn stationary_series_predicts_constant() {
        let values = [
            Complex64::new(1.0, -0.5),
            Complex64::new(-0.3, 2.0),
            Complex64::new(0.1, 0.1),
        ];
        let series: Vec<_> = values.iter().map(|&v| vec![v; 16]).collect();
        let track = track_from(&series, 5e-4);
        let pred = fir_wiener_predict(&track, 8, 8).unwrap();
        for (p, v) in pred.as_slice().iter().zip(values) {
            assert!((p - v).norm() < 1e-6);
        }
    }

    #[test]
    fn single_exponential_long_training() {
        let w = 0.41;
        let amps = [Complex64::new(1.0, 0.3), Complex64::new(-0.2, 0.7)];
        let series: Vec<_> = amps
            .iter()
            .map(|&a| (0..200).map(|l| a * Complex64::from_polar(1.0, w * l as f64)).collect())
            .collect();
        let track = track_from(&series, 1.0);
        let n_d = 5;
        let pred = fir_wiener_predict(&track, 4, n_d).unwrap();
        let truth: Vec<_> = amps
            .iter()
            .map(|&a| a * Complex64::from_polar(1.0, w * (199 + n_d) as f64))
            .collect();
        let err = diff_norm_sqr(pred.as_slice(), &truth) / crate::linalg::norm_sqr(&truth);
        assert!(10.0 * err.log10() < -40.0, "{err}");
    }

    #[test]
    fn white_noise_predicts_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let series: Vec<Vec<Complex64>> = (0..64)
            .map(|_| {
                (0..400)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                    })
                    .collect()
            })
            .collect();
        let track = track_from(&series, 1.0);
        let pred = fir_wiener_predict(&track, 4, 2).unwrap();
        let power = crate::linalg::norm_sqr(pred.as_slice()) / 64.0;
        assert!(power < 0.01, "{power}");
    }

    #[test]
    fn autocorrelation_oracle() {
        let x = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
        ];
        let r = pooled_autocorrelation(&[x], 2);
        // r(1) = (x1 x0* + x2 x1*) / 2 = (j + j) / 2
        assert!((r[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((r[2] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_short_tracks() {
        let series = vec![vec![Complex64::new(1.0, 0.0); 5]];
        let track = track_from(&series, 1.0);
        assert!(matches!(
            fir_wiener_predict(&track, 3, 3),
            Err(Error::InsufficientSamples { needed: 6, got: 5 })
        ));
        assert!(fir_wiener_predict(&track, 0, 1).is_err());
        assert!(fir_wiener_predict(&track, 1, 0).is_err());
        assert_eq!(default_fir_order(16, 8), 8);
        assert_eq!(default_fir_order(4, 8), 1);
    }
}
