//! Prony-based prediction in the angular-delay domain.
//!
//! Each per-UE-antenna channel vector `hbar_u` (length `n_t * n_f`, the
//! vertical antenna index fastest, then horizontal, then frequency) is
//! projected onto the unitary basis `S = W(n_f) (x) W(n_h) (x) W(n_v)`,
//! `W(K)[m, n] = exp(-j 2 pi m n / K) / sqrt(K)`. Because `S` is a
//! Kronecker product of DFT matrices, `S^H x` is a normalized inverse FFT
//! along each of the three axes and `S g` a normalized forward FFT.
//!
//! The positions that carry a `gamma` fraction of the energy (aggregated
//! over UE antennas and samples) form one support shared by all UE
//! antennas. Every retained tap is then predicted on its own with scalar
//! Prony of order `N = (L + 1) / 2` (`floor` for even `L`), and the
//! prediction is mapped back through `S`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSnapshot, SampleTrack};
use crate::error::{Error, Result};
use crate::prony::{scalar_prony_fit_with, scalar_prony_predict, PronyCoefficients, SolverStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AngularDelayDims {
    pub n_v: usize,
    pub n_h: usize,
    pub n_f: usize,
}

impl AngularDelayDims {
    pub fn new(n_v: usize, n_h: usize, n_f: usize) -> Self {
        Self { n_v, n_h, n_f }
    }

    pub fn len(&self) -> usize {
        self.n_v * self.n_h * self.n_f
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct AxisPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl AxisPlans {
    fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Self {
            forward: planner.plan_fft(len, FftDirection::Forward),
            inverse: planner.plan_fft(len, FftDirection::Inverse),
        }
    }
}

/// Cached FFT plans for one set of dimensions.
pub struct AngularDelayTransform {
    dims: AngularDelayDims,
    axes: [AxisPlans; 3],
}

impl std::fmt::Debug for AngularDelayTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AngularDelayTransform")
            .field("dims", &self.dims)
            .finish()
    }
}

impl AngularDelayTransform {
    pub fn new(dims: AngularDelayDims) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("dims", "all dimensions must be positive"));
        }
        let mut planner = FftPlanner::new();
        let axes = [
            AxisPlans::new(&mut planner, dims.n_v),
            AxisPlans::new(&mut planner, dims.n_h),
            AxisPlans::new(&mut planner, dims.n_f),
        ];
        Ok(Self { dims, axes })
    }

    pub fn dims(&self) -> AngularDelayDims {
        self.dims
    }

    fn check(&self, x: &[Complex64]) -> Result<()> {
        if x.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "vector has length {}, dims {:?} need {}",
                x.len(),
                self.dims,
                self.dims.len()
            )));
        }
        Ok(())
    }

    fn transform(&self, x: &[Complex64], direction: FftDirection) -> Vec<Complex64> {
        let AngularDelayDims { n_v, n_h, n_f } = self.dims;
        let mut data = x.to_vec();
        let strides = [1, n_v, n_v * n_h];
        let lens = [n_v, n_h, n_f];
        let mut line = Vec::new();
        for axis in 0..3 {
            let (len, stride) = (lens[axis], strides[axis]);
            if len == 1 {
                continue;
            }
            let plan = match direction {
                FftDirection::Forward => &self.axes[axis].forward,
                FftDirection::Inverse => &self.axes[axis].inverse,
            };
            let scale = (len as f64).sqrt().recip();
            let block = len * stride;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    line.clear();
                    line.extend((0..len).map(|k| data[base + k * stride]));
                    plan.process(&mut line);
                    for (k, &z) in line.iter().enumerate() {
                        data[base + k * stride] = z * scale;
                    }
                }
            }
        }
        data
    }

    /// `g = S^H hbar`.
    pub fn project(&self, hbar: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(hbar)?;
        Ok(self.transform(hbar, FftDirection::Inverse))
    }

    /// `hbar = S g`.
    pub fn reconstruct(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(g)?;
        Ok(self.transform(g, FftDirection::Forward))
    }
}

pub fn project_to_angular_delay(hbar: &[Complex64], dims: AngularDelayDims) -> Result<Vec<Complex64>> {
    AngularDelayTransform::new(dims)?.project(hbar)
}

pub fn inverse_project(g: &[Complex64], dims: AngularDelayDims) -> Result<Vec<Complex64>> {
    AngularDelayTransform::new(dims)?.reconstruct(g)
}

/// Selected angular-delay positions, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    pub indices: Vec<usize>,
    pub gamma: f64,
    /// Energy fraction actually captured over the selection window.
    pub captured: f64,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Ranks positions by energy summed over all projected vectors and keeps
/// the shortest prefix reaching `gamma` of the total. Ties go to the lower
/// index. With `gamma = 1` every nonzero position is kept.
pub fn select_support(projected: &[Vec<Complex64>], gamma: f64) -> Result<SupportSet> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma", format!("must be in (0, 1], got {gamma}")));
    }
    let first = projected.first().ok_or(Error::Empty("projected track"))?;
    let len = first.len();
    let mut energy = vec![0.0; len];
    for g in projected {
        if g.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "projected vectors have lengths {len} and {}",
                g.len()
            )));
        }
        for (e, z) in energy.iter_mut().zip(g) {
            *e += z.norm_sqr();
        }
    }
    let total: f64 = energy.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptySupport);
    }
    let mut order: Vec<usize> = (0..len).filter(|&k| energy[k] > 0.0).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));

    let mut indices = Vec::new();
    let mut acc = 0.0;
    if gamma >= 1.0 {
        acc = order.iter().map(|&k| energy[k]).sum();
        indices = order;
    } else {
        let target = gamma * total;
        for k in order {
            indices.push(k);
            acc += energy[k];
            if acc >= target {
                break;
            }
        }
    }
    Ok(SupportSet {
        indices,
        gamma,
        captured: acc / total,
    })
}

/// Support-restricted angular-delay coefficients: `taps[u][n][l]` is
/// `g_{u,n}(t_l)` for support position `support.indices[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDelayTrack {
    pub support: SupportSet,
    pub taps: Vec<Vec<Vec<Complex64>>>,
}

impl AngularDelayTrack {
    /// `projected[l][u]` holds `g_u(t_l)`.
    pub fn gather(projected: &[Vec<Vec<Complex64>>], support: SupportSet) -> Self {
        let n_r = projected.first().map_or(0, Vec::len);
        let taps = (0..n_r)
            .map(|u| {
                support
                    .indices
                    .iter()
                    .map(|&k| projected.iter().map(|sample| sample[u][k]).collect())
                    .collect()
            })
            .collect();
        Self { support, taps }
    }

    pub fn samples(&self) -> usize {
        self.taps.first().and_then(|rows| rows.first()).map_or(0, Vec::len)
    }
}

/// Default predictor order for `L + 1` samples.
pub fn default_order(samples: usize) -> usize {
    (samples / 2).max(1)
}

/// Fits the Prony coefficients of a single tap series.
pub fn pad_fit_tap(row: &[Complex64], order: usize, solver: &SolverStrategy) -> Result<PronyCoefficients> {
    scalar_prony_fit_with(row, order, solver)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadParams {
    pub gamma: f64,
    pub n_d: usize,
    /// Per-tap order; `None` picks `floor((L + 1) / 2)`.
    pub order: Option<usize>,
    pub solver: SolverStrategy,
}

impl Default for PadParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_d: 1,
            order: None,
            solver: SolverStrategy::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PadPrediction {
    pub snapshot: ChannelSnapshot,
    pub support: SupportSet,
}

/// Predicts the channel `n_d` sample periods after the last sample.
pub fn pad_predict(track: &SampleTrack, dims: AngularDelayDims, params: &PadParams) -> Result<PadPrediction> {
    let transform = AngularDelayTransform::new(dims)?;
    pad_predict_with(track, &transform, params)
}

pub fn pad_predict_with(
    track: &SampleTrack,
    transform: &AngularDelayTransform,
    params: &PadParams,
) -> Result<PadPrediction> {
    if track.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: track.len(),
        });
    }
    if params.n_d < 1 {
        return Err(Error::invalid("n_d", "must be at least 1"));
    }
    let (n_r, n_t, n_f) = track.dims();
    let dims = transform.dims();
    if dims.len() != n_t * n_f {
        return Err(Error::DimensionMismatch(format!(
            "angular-delay dims {dims:?} do not cover n_t * n_f = {}",
            n_t * n_f
        )));
    }
    let order = params.order.unwrap_or_else(|| default_order(track.len()));
    if order == 0 || 2 * order > track.len() {
        return Err(Error::InsufficientSamples {
            needed: 2 * order.max(1),
            got: track.len(),
        });
    }

    // step 1: project every sample of every UE antenna
    let projected: Vec<Vec<Vec<Complex64>>> = track
        .snapshots()
        .iter()
        .map(|snap| {
            (0..n_r)
                .map(|u| transform.project(snap.ue_vector(u)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    // step 2: shared support over all u and l
    let flat: Vec<Vec<Complex64>> = projected.iter().flatten().cloned().collect();
    let support = select_support(&flat, params.gamma)?;
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let ad_track = AngularDelayTrack::gather(&projected, support);

    // steps 3-8: per-tap fit and recursion, then reconstruction
    let mut snapshot = ChannelSnapshot::zeros(n_r, n_t, n_f, track.time_after(params.n_d));
    for (u, rows) in ad_track.taps.iter().enumerate() {
        let mut g_hat = vec![Complex64::new(0.0, 0.0); dims.len()];
        for (row, &pos) in rows.iter().zip(&ad_track.support.indices) {
            let coeffs = pad_fit_tap(row, order, &params.solver)?;
            let window = &row[row.len() - order..];
            g_hat[pos] = scalar_prony_predict(&coeffs, window, params.n_d)?;
        }
        snapshot
            .ue_vector_mut(u)
            .copy_from_slice(&transform.reconstruct(&g_hat)?);
    }
    Ok(PadPrediction {
        snapshot,
        support: ad_track.support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ArrayGeometry, ChannelModel, PathParams, SubcarrierGrid, UeKinematics};
    use crate::linalg::{diff_norm_sqr, norm_sqr, CMatrix, CVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `W(K)` built entry by entry.
    fn dft(k: usize) -> CMatrix {
        let s = (k as f64).sqrt().recip();
        CMatrix::from_fn(k, k, |m, n| {
            Complex64::from_polar(s, -2.0 * PI * (m * n) as f64 / k as f64)
        })
    }

    fn kron_mat(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.kronecker(b)
    }

    fn explicit_basis(dims: AngularDelayDims) -> CMatrix {
        kron_mat(&kron_mat(&dft(dims.n_f), &dft(dims.n_h)), &dft(dims.n_v))
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn projection_matches_explicit_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dims in [
            AngularDelayDims::new(2, 2, 2),
            AngularDelayDims::new(3, 2, 4),
            AngularDelayDims::new(1, 5, 3),
        ] {
            let s = explicit_basis(dims);
            let h = random_vec(&mut rng, dims.len());
            let g = project_to_angular_delay(&h, dims).unwrap();
            let expected = s.adjoint() * CVector::from_column_slice(&h);
            for (a, b) in g.iter().zip(expected.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
            // basis columns project to unit vectors
            for k in 0..dims.len() {
                let col: Vec<_> = s.column(k).iter().copied().collect();
                let e = project_to_angular_delay(&col, dims).unwrap();
                for (j, z) in e.iter().enumerate() {
                    let target = if j == k { 1.0 } else { 0.0 };
                    assert!((z - c(target, 0.0)).norm() < 1e-12);
                }
                let mut one_hot = vec![c(0.0, 0.0); dims.len()];
                one_hot[k] = c(1.0, 0.0);
                let back = inverse_project(&one_hot, dims).unwrap();
                assert!(diff_norm_sqr(&back, &col).sqrt() < 1e-12);
            }
        }
    }

    #[test]
    fn sparse_reconstruction_is_column_sum() {
        let dims = AngularDelayDims::new(2, 3, 2);
        let s = explicit_basis(dims);
        let mut g = vec![c(0.0, 0.0); dims.len()];
        g[1] = c(0.5, -1.0);
        g[7] = c(2.0, 0.3);
        g[10] = c(0.0, 1.0);
        let direct: Vec<_> = (0..dims.len())
            .map(|r| [1usize, 7, 10].iter().map(|&k| g[k] * s[(r, k)]).sum())
            .collect();
        let rec = inverse_project(&g, dims).unwrap();
        assert!(diff_norm_sqr(&rec, &direct).sqrt() < 1e-12);
    }

    #[test]
    fn projection_length_mismatch() {
        assert!(matches!(
            project_to_angular_delay(&[c(1.0, 0.0); 5], AngularDelayDims::new(2, 2, 2)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(inverse_project(&[c(1.0, 0.0); 7], AngularDelayDims::new(2, 2, 2)).is_err());
    }

    #[test]
    fn unitarity_up_to_large_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dims = AngularDelayDims::new(16, 16, 64);
        let h = random_vec(&mut rng, dims.len());
        let t = AngularDelayTransform::new(dims).unwrap();
        let g = t.project(&h).unwrap();
        assert!((norm_sqr(&g) / norm_sqr(&h) - 1.0).abs() < 1e-12);
        let back = t.reconstruct(&g).unwrap();
        assert!(diff_norm_sqr(&back, &h).sqrt() / norm_sqr(&h).sqrt() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(n_v in 1usize..6, n_h in 1usize..6, n_f in 1usize..9, seed in 0u64..1000) {
            let dims = AngularDelayDims::new(n_v, n_h, n_f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_vec(&mut rng, dims.len());
            let t = AngularDelayTransform::new(dims).unwrap();
            let g = t.project(&h).unwrap();
            prop_assert!((norm_sqr(&g) - norm_sqr(&h)).abs() <= 1e-12 * norm_sqr(&h));
            let back = t.reconstruct(&g).unwrap();
            prop_assert!(diff_norm_sqr(&back, &h).sqrt() <= 1e-12 * norm_sqr(&h).sqrt());
        }
    }

    // On-grid channel construction: a path whose angle and delay sit exactly
    // on DFT bins. With d = lambda/2 (vertical and horizontal) the vertical
    // phase step is pi cos(theta) and must equal 2 pi k_v / n_v (mod 2 pi).
    const LAMBDA: f64 = 0.1;

    struct OnGrid {
        model: ChannelModel,
        dims: AngularDelayDims,
    }

    impl OnGrid {
        fn new(n_v: usize, n_h: usize, n_f: usize) -> Self {
            let geom = ArrayGeometry::new(n_v, n_h, LAMBDA / 2.0, LAMBDA / 2.0, LAMBDA).unwrap();
            let grid = SubcarrierGrid::new(n_f, 1e5, 0.0).unwrap();
            Self {
                model: ChannelModel::new(geom, grid, 1),
                dims: AngularDelayDims::new(n_v, n_h, n_f),
            }
        }

        /// Path landing on bin (k_v, k_h, k_f); `k_v`, `k_h` as signed bins.
        fn path(&self, k_v: i32, k_h: i32, k_f: usize, theta_zoa: f64, phi_aoa: f64, beta: Complex64) -> PathParams {
            let cos_t = 2.0 * k_v as f64 / self.dims.n_v as f64;
            let theta = cos_t.acos();
            let sin_phi = 2.0 * k_h as f64 / (self.dims.n_h as f64 * theta.sin());
            let phi = sin_phi.asin();
            // b(tau) entry i = exp(-j 2 pi i df tau) lands on bin n_f - k_f
            let tau = k_f as f64 / (self.dims.n_f as f64 * self.model.grid.delta_f);
            PathParams::new(theta, phi, theta_zoa, phi_aoa, tau, beta).unwrap()
        }
    }

    fn kin(speed: f64) -> UeKinematics {
        UeKinematics::new(speed, 0.0, PI / 2.0, vec![[0.0; 3]]).unwrap()
    }

    fn nmse(pred: &ChannelSnapshot, truth: &ChannelSnapshot) -> f64 {
        diff_norm_sqr(pred.as_slice(), truth.as_slice()) / truth.norm_sqr()
    }

    #[test]
    fn single_on_grid_path_has_unit_support_and_exact_prediction() {
        let og = OnGrid::new(4, 4, 4);
        let path = og.path(1, -1, 2, 1.2, 0.4, c(0.8, 0.6));
        let track = og.model.track(&[path], &kin(20.0), 0.0, 5e-4, 2).unwrap();
        let params = PadParams {
            n_d: 7,
            ..PadParams::default()
        };
        let pred = pad_predict(&track, og.dims, &params).unwrap();
        assert_eq!(pred.support.len(), 1);
        let truth = og.model.snapshot(&[path], &kin(20.0), track.time_after(7)).unwrap();
        let err = nmse(&pred.snapshot, &truth);
        assert!(10.0 * err.log10() < -160.0, "{err}");
    }

    #[test]
    fn two_on_grid_paths_have_disjoint_supports() {
        let og = OnGrid::new(4, 4, 4);
        let p = og.path(1, 0, 0, 1.0, 0.2, c(1.0, 0.0));
        let q = og.path(-1, 1, 3, 2.0, -1.0, c(0.0, 1.0));
        let project = |path: &PathParams| {
            let snap = og.model.snapshot(std::slice::from_ref(path), &kin(0.0), 0.0).unwrap();
            vec![project_to_angular_delay(snap.ue_vector(0), og.dims).unwrap()]
        };
        let sp = select_support(&project(&p), 0.99).unwrap();
        let sq = select_support(&project(&q), 0.99).unwrap();
        assert_eq!((sp.len(), sq.len()), (1, 1));
        assert!(sp.indices.iter().all(|k| !sq.indices.contains(k)));

        let both = og.model.snapshot(&[p, q], &kin(0.0), 0.0).unwrap();
        let g = vec![project_to_angular_delay(both.ue_vector(0), og.dims).unwrap()];
        let s = select_support(&g, 0.99).unwrap();
        assert_eq!(s.len(), 2);
        let mut expected = vec![sp.indices[0], sq.indices[0]];
        expected.sort();
        let mut got = s.indices.clone();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn support_gamma_one_and_ties() {
        let g = vec![vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.1, 0.0)]];
        let s = select_support(&g, 1.0).unwrap();
        // equal energies at 0 and 2: lower index first
        assert_eq!(s.indices, vec![0, 2, 3]);
        assert!((s.captured - 1.0).abs() < 1e-15);
        let s = select_support(&g, 0.45).unwrap();
        assert_eq!(s.indices, vec![0]);
        assert!(matches!(
            select_support(&[vec![c(0.0, 0.0); 3]], 0.9),
            Err(Error::EmptySupport)
        ));
        assert!(select_support(&[], 0.9).is_err());
        assert!(select_support(&g, 0.0).is_err());
    }

    #[test]
    fn truncation_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = AngularDelayDims::new(4, 4, 8);
        let t = AngularDelayTransform::new(dims).unwrap();
        for gamma in [0.5, 0.9, 0.99] {
            let samples: Vec<Vec<Complex64>> = (0..3).map(|_| random_vec(&mut rng, dims.len())).collect();
            let projected: Vec<_> = samples.iter().map(|h| t.project(h).unwrap()).collect();
            let support = select_support(&projected, gamma).unwrap();
            assert!(support.captured >= gamma);
            let (mut err, mut total) = (0.0, 0.0);
            for (h, g) in samples.iter().zip(&projected) {
                let mut sparse = vec![c(0.0, 0.0); dims.len()];
                for &k in &support.indices {
                    sparse[k] = g[k];
                }
                err += diff_norm_sqr(&t.reconstruct(&sparse).unwrap(), h);
                total += norm_sqr(h);
            }
            assert!(err / total <= 1.0 - gamma + 1e-12);
        }
    }

    #[test]
    fn tap_fits() {
        let w = 0.37;
        let z = Complex64::from_polar(1.0, w);
        let p = pad_fit_tap(&[c(0.3, 0.1), c(0.3, 0.1) * z], 1, &SolverStrategy::default()).unwrap();
        assert!((p.as_slice()[0] + z).norm() < 1e-14);

        let (z1, z2) = (Complex64::from_polar(1.0, 0.2), Complex64::from_polar(1.0, -0.9));
        let row: Vec<_> = (0..4).map(|k| z1.powu(k) + c(0.5, 0.5) * z2.powu(k)).collect();
        let p = pad_fit_tap(&row, 2, &SolverStrategy::default()).unwrap();
        assert!(p.characteristic(z1).norm() < 1e-10 && p.characteristic(z2).norm() < 1e-10);

        let p = pad_fit_tap(&[c(2.0, 1.0); 4], 2, &SolverStrategy::default()).unwrap();
        assert!(p.characteristic(c(1.0, 0.0)).norm() < 1e-10);
        assert!(pad_fit_tap(&[c(1.0, 0.0); 3], 2, &SolverStrategy::default()).is_err());
    }

    #[test]
    fn stationary_channel_predicts_last_sample() {
        let og = OnGrid::new(4, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let paths: Vec<_> = (0..6)
            .map(|_| {
                PathParams::new(
                    rng.random_range(0.3..2.8),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.3..2.8),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(0.0..2e-6),
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
                .unwrap()
            })
            .collect();
        let track = og.model.track(&paths, &kin(0.0), 0.0, 5e-4, 4).unwrap();
        for gamma in [0.99, 1.0] {
            let pred = pad_predict(
                &track,
                og.dims,
                &PadParams {
                    gamma,
                    n_d: 3,
                    ..PadParams::default()
                },
            )
            .unwrap();
            let rel = diff_norm_sqr(pred.snapshot.as_slice(), track.last().as_slice()) / track.last().norm_sqr();
            assert!(rel <= 1.0 - gamma + 1e-10, "gamma {gamma}: {rel}");
        }
    }

    #[test]
    fn shared_tuple_needs_four_samples() {
        let og = OnGrid::new(4, 4, 4);
        // same departure tuple, arrival angles with distinct Doppler
        let p = og.path(1, 1, 1, PI / 2.0, 0.0, c(1.0, 0.0));
        let q = og.path(1, 1, 1, PI / 2.0, 2.0, c(0.0, 0.8));
        let k = kin(30.0);
        let n_d = 8;
        let run = |samples: usize| {
            let track = og.model.track(&[p, q], &k, 0.0, 5e-4, samples).unwrap();
            let truth = og.model.snapshot(&[p, q], &k, track.time_after(n_d)).unwrap();
            let pred = pad_predict(
                &track,
                og.dims,
                &PadParams {
                    n_d,
                    ..PadParams::default()
                },
            )
            .unwrap();
            10.0 * nmse(&pred.snapshot, &truth).log10()
        };
        assert!(run(2) > -20.0);
        assert!(run(4) < -120.0);
    }

    #[test]
    fn single_path_taps_share_one_pole() {
        let geom = ArrayGeometry::new(4, 4, 0.08, 0.05, LAMBDA).unwrap();
        let grid = SubcarrierGrid::new(8, 3e5, 3.5e9).unwrap();
        let model = ChannelModel::new(geom, grid, 1);
        let path = PathParams::new(1.3, 0.4, 1.0, 0.7, 3.3e-7, c(1.0, 0.0)).unwrap();
        let k = kin(25.0);
        let dt = 5e-4;
        let track = model.track(&[path], &k, 0.0, dt, 2).unwrap();
        let pole = Complex64::from_polar(1.0, model.doppler_rate(&path, &k) * dt);
        let t = AngularDelayTransform::new(AngularDelayDims::new(4, 4, 8)).unwrap();
        let projected: Vec<_> = track
            .snapshots()
            .iter()
            .map(|s| vec![t.project(s.ue_vector(0)).unwrap()])
            .collect();
        let flat: Vec<_> = projected.iter().flatten().cloned().collect();
        let support = select_support(&flat, 0.99).unwrap();
        assert!(support.len() > 1, "off-grid path should leak");
        let ad = AngularDelayTrack::gather(&projected, support);
        for row in &ad.taps[0] {
            let p = pad_fit_tap(row, 1, &SolverStrategy::default()).unwrap();
            assert!((-p.as_slice()[0] - pole).norm() < 1e-8);
        }
    }

    #[test]
    fn deterministic_output() {
        let og = OnGrid::new(4, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let paths: Vec<_> = (0..5)
            .map(|_| {
                og.path(
                    rng.random_range(-1..2),
                    rng.random_range(-1..2),
                    rng.random_range(0..4),
                    1.0,
                    rng.random_range(-3.0..3.0),
                    c(1.0, 0.2),
                )
            })
            .collect();
        let track = og.model.track(&paths, &kin(16.0), 0.0, 5e-4, 6).unwrap();
        let a = pad_predict(
            &track,
            og.dims,
            &PadParams {
                n_d: 4,
                ..PadParams::default()
            },
        )
        .unwrap();
        let b = pad_predict(
            &track,
            og.dims,
            &PadParams {
                n_d: 4,
                ..PadParams::default()
            },
        )
        .unwrap();
        assert_eq!(a.support, b.support);
        assert_eq!(a.snapshot, b.snapshot);
    }

    #[test]
    fn rejects_bad_tracks() {
        let og = OnGrid::new(2, 2, 2);
        let p = og.path(0, 0, 0, 1.0, 0.0, c(1.0, 0.0));
        let one = og.model.track(&[p], &kin(1.0), 0.0, 5e-4, 1).unwrap();
        assert!(pad_predict(&one, og.dims, &PadParams::default()).is_err());
        let two = og.model.track(&[p], &kin(1.0), 0.0, 5e-4, 2).unwrap();
        assert!(matches!(
            pad_predict(&two, AngularDelayDims::new(3, 2, 2), &PadParams::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
