//! Multipath channel synthesis over a uniform planar array (UPA) and an
//! OFDM subcarrier grid.
//!
//! Coordinate conventions: the BS panel lies on the YZ plane with its first
//! element at the origin (lower-left corner). Antenna indices run along Z
//! (vertical) first, then move to the next column along Y. With those
//! positions the transmit phase `r_tx . d_tx,s / lambda0` reduces exactly to
//! the entries of [`steering_3d`].
//!
//! A snapshot stores, for every UE antenna `u`, the vector
//! `hbar_u = vec(H_u)` where `H_u` is `n_t x n_f`; the BS-antenna index
//! varies fastest, matching `b(tau) (x) a(theta, phi)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, norm_sqr, CMatrix};

fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % TAU;
    if y <= -PI {
        y += TAU;
    } else if y > PI {
        y -= TAU;
    }
    y
}

/// Unit vector with elevation `theta` (from +Z) and azimuth `phi` (from +X).
pub fn spherical_unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// BS uniform planar array: `n_v` rows by `n_h` columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_v: usize,
    pub n_h: usize,
    /// Vertical element spacing, meters.
    pub d_v: f64,
    /// Horizontal element spacing, meters.
    pub d_h: f64,
    /// Carrier wavelength, meters.
    pub lambda0: f64,
}

impl ArrayGeometry {
    pub fn new(n_v: usize, n_h: usize, d_v: f64, d_h: f64, lambda0: f64) -> Result<Self> {
        if n_v == 0 || n_h == 0 {
            return Err(Error::invalid("n_v/n_h", "array needs at least one row and column"));
        }
        for (name, value) in [("d_v", d_v), ("d_h", d_h), ("lambda0", lambda0)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {value}")));
            }
        }
        Ok(Self {
            n_v,
            n_h,
            d_v,
            d_h,
            lambda0,
        })
    }

    /// Geometry with spacings given in carrier wavelengths.
    pub fn with_spacing_in_wavelengths(
        n_v: usize,
        n_h: usize,
        d_v_lambda: f64,
        d_h_lambda: f64,
        carrier_hz: f64,
    ) -> Result<Self> {
        let lambda0 = crate::SPEED_OF_LIGHT / carrier_hz;
        Self::new(n_v, n_h, d_v_lambda * lambda0, d_h_lambda * lambda0, lambda0)
    }

    pub fn n_t(&self) -> usize {
        self.n_v * self.n_h
    }

    /// Cartesian position of BS element `s`.
    pub fn element_position(&self, s: usize) -> [f64; 3] {
        let row = s % self.n_v;
        let col = s / self.n_v;
        [0.0, col as f64 * self.d_h, row as f64 * self.d_v]
    }
}

/// Uniform subcarrier grid `f_i = f1 + i * delta_f`, `i = 0..n_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierGrid {
    pub n_f: usize,
    pub delta_f: f64,
    pub f1: f64,
}

impl SubcarrierGrid {
    pub fn new(n_f: usize, delta_f: f64, f1: f64) -> Result<Self> {
        if n_f == 0 {
            return Err(Error::invalid("n_f", "need at least one frequency bin"));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(Error::invalid("delta_f", format!("must be positive, got {delta_f}")));
        }
        if !f1.is_finite() {
            return Err(Error::invalid("f1", "must be finite"));
        }
        Ok(Self { n_f, delta_f, f1 })
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.f1 + i as f64 * self.delta_f
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub theta_zod: f64,
    pub phi_aod: f64,
    pub theta_zoa: f64,
    pub phi_aoa: f64,
    /// Delay, seconds.
    pub tau: f64,
    pub beta: Complex64,
}

impl PathParams {
    /// Builds a path, wrapping azimuths into `(-pi, pi]` and zeroing the
    /// azimuth of any direction that points along the Z axis.
    pub fn new(theta_zod: f64, phi_aod: f64, theta_zoa: f64, phi_aoa: f64, tau: f64, beta: Complex64) -> Result<Self> {
        let path = Self {
            theta_zod,
            phi_aod: wrap_angle(phi_aod),
            theta_zoa,
            phi_aoa: wrap_angle(phi_aoa),
            tau,
            beta,
        }
        .with_pole_convention();
        path.validate()?;
        Ok(path)
    }

    fn with_pole_convention(mut self) -> Self {
        if self.theta_zod == 0.0 || self.theta_zod == PI {
            self.phi_aod = 0.0;
        }
        if self.theta_zoa == 0.0 || self.theta_zoa == PI {
            self.phi_aoa = 0.0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, theta) in [("theta_zod", self.theta_zod), ("theta_zoa", self.theta_zoa)] {
            if !(0.0..=PI).contains(&theta) {
                return Err(Error::invalid(name, format!("{theta} outside [0, pi]")));
            }
        }
        for (name, phi) in [("phi_aod", self.phi_aod), ("phi_aoa", self.phi_aoa)] {
            if !(phi > -PI && phi <= PI) {
                return Err(Error::invalid(name, format!("{phi} outside (-pi, pi]")));
            }
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::invalid("tau", format!("must be >= 0, got {}", self.tau)));
        }
        if !(self.beta.re.is_finite() && self.beta.im.is_finite()) {
            return Err(Error::invalid("beta", "must be finite"));
        }
        if (self.theta_zod == 0.0 || self.theta_zod == PI) && self.phi_aod != 0.0 {
            return Err(Error::invalid("phi_aod", "must be zero when theta_zod is 0 or pi"));
        }
        if (self.theta_zoa == 0.0 || self.theta_zoa == PI) && self.phi_aoa != 0.0 {
            return Err(Error::invalid("phi_aoa", "must be zero when theta_zoa is 0 or pi"));
        }
        Ok(())
    }

    pub fn tx_direction(&self) -> [f64; 3] {
        spherical_unit(self.theta_zod, self.phi_aod)
    }

    pub fn rx_direction(&self) -> [f64; 3] {
        spherical_unit(self.theta_zoa, self.phi_aoa)
    }
}

/// UE motion and receive-antenna layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeKinematics {
    /// Speed, m/s.
    pub speed: f64,
    pub phi_v: f64,
    pub theta_v: f64,
    pub rx_antenna_positions: Vec<[f64; 3]>,
}

impl UeKinematics {
    pub fn new(speed: f64, phi_v: f64, theta_v: f64, rx_antenna_positions: Vec<[f64; 3]>) -> Result<Self> {
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(Error::invalid("speed", format!("must be >= 0, got {speed}")));
        }
        if rx_antenna_positions.is_empty() {
            return Err(Error::Empty("rx_antenna_positions"));
        }
        Ok(Self {
            speed,
            phi_v,
            theta_v,
            rx_antenna_positions,
        })
    }

    /// `n_r` antennas spaced `lambda0 / 2` along Y, the first at the origin.
    pub fn default_rx_positions(n_r: usize, lambda0: f64) -> Vec<[f64; 3]> {
        (0..n_r).map(|u| [0.0, u as f64 * lambda0 / 2.0, 0.0]).collect()
    }

    pub fn velocity(&self) -> [f64; 3] {
        let dir = spherical_unit(self.theta_v, self.phi_v);
        [self.speed * dir[0], self.speed * dir[1], self.speed * dir[2]]
    }

    pub fn n_r(&self) -> usize {
        self.rx_antenna_positions.len()
    }
}

/// Channel at one instant: `h[u, s, i]` over UE antenna, BS antenna and
/// frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    pub t: f64,
    n_r: usize,
    n_t: usize,
    n_f: usize,
    data: Vec<Complex64>,
}

impl ChannelSnapshot {
    pub fn zeros(n_r: usize, n_t: usize, n_f: usize, t: f64) -> Self {
        Self {
            t,
            n_r,
            n_t,
            n_f,
            data: vec![Complex64::new(0.0, 0.0); n_r * n_t * n_f],
        }
    }

    /// Wraps the stacked vector `[hbar_1; ...; hbar_{n_r}]`.
    pub fn from_stacked(n_r: usize, n_t: usize, n_f: usize, t: f64, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n_r * n_t * n_f {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for ({n_r}, {n_t}, {n_f}), got {}",
                n_r * n_t * n_f,
                data.len()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("h", "entries must be finite"));
        }
        Ok(Self { t, n_r, n_t, n_f, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_r, self.n_t, self.n_f)
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    #[inline]
    fn offset(&self, u: usize, s: usize, i: usize) -> usize {
        u * self.n_t * self.n_f + i * self.n_t + s
    }

    pub fn get(&self, u: usize, s: usize, i: usize) -> Complex64 {
        self.data[self.offset(u, s, i)]
    }

    pub fn set(&mut self, u: usize, s: usize, i: usize, value: Complex64) {
        let k = self.offset(u, s, i);
        self.data[k] = value;
    }

    /// `hbar_u(t)`, length `n_t * n_f`.
    pub fn ue_vector(&self, u: usize) -> &[Complex64] {
        let len = self.n_t * self.n_f;
        &self.data[u * len..(u + 1) * len]
    }

    pub fn ue_vector_mut(&mut self, u: usize) -> &mut [Complex64] {
        let len = self.n_t * self.n_f;
        &mut self.data[u * len..(u + 1) * len]
    }

    /// `H_u(t)` as an `n_t x n_f` matrix (column `i` is `h_u(f_i)^T`).
    pub fn ue_matrix(&self, u: usize) -> CMatrix {
        CMatrix::from_column_slice(self.n_t, self.n_f, self.ue_vector(u))
    }

    /// The full stacked vector over all UE antennas.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// `H(f_i, t)`, the `n_r x n_t` matrix at one frequency bin.
    pub fn frequency_slice(&self, i: usize) -> CMatrix {
        CMatrix::from_fn(self.n_r, self.n_t, |u, s| self.get(u, s, i))
    }

    pub fn set_frequency_slice(&mut self, i: usize, slice: &CMatrix) {
        for u in 0..self.n_r {
            for s in 0..self.n_t {
                self.set(u, s, i, slice[(u, s)]);
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.norm_sqr() / self.data.len() as f64
        }
    }
}

/// Uniformly spaced sequence of snapshots, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrack {
    pub delta_t: f64,
    snapshots: Vec<ChannelSnapshot>,
}

impl SampleTrack {
    pub fn new(delta_t: f64, snapshots: Vec<ChannelSnapshot>) -> Result<Self> {
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(Error::invalid("delta_t", format!("must be positive, got {delta_t}")));
        }
        if snapshots.is_empty() {
            return Err(Error::Empty("sample track"));
        }
        let dims = snapshots[0].dims();
        let t0 = snapshots[0].t;
        for (l, snap) in snapshots.iter().enumerate() {
            if snap.dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "sample {l} has dims {:?}, expected {dims:?}",
                    snap.dims()
                )));
            }
            let expected = t0 + l as f64 * delta_t;
            if (snap.t - expected).abs() > 1e-9 * delta_t.max(expected.abs()) {
                return Err(Error::NonUniformSpacing { index: l });
            }
        }
        Ok(Self { delta_t, snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[ChannelSnapshot] {
        &self.snapshots
    }

    pub fn last(&self) -> &ChannelSnapshot {
        self.snapshots.last().expect("track is never empty")
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.snapshots[0].dims()
    }

    /// Time of the sample `steps` periods after the last one.
    pub fn time_after(&self, steps: usize) -> f64 {
        self.last().t + steps as f64 * self.delta_t
    }

    pub fn map<F>(&self, f: F) -> Result<Self>
    where
        F: FnMut(&ChannelSnapshot) -> Result<ChannelSnapshot>,
    {
        let snaps = self.snapshots.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.delta_t, snaps)
    }
}

/// `a_v(theta)`: entry `n` is `exp(j 2 pi n d_v cos(theta) / lambda0)`.
pub fn steering_vertical(theta: f64, geom: &ArrayGeometry) -> Vec<Complex64> {
    let step = TAU * geom.d_v * theta.cos() / geom.lambda0;
    (0..geom.n_v).map(|n| cis(n as f64 * step)).collect()
}

/// `a_h(theta, phi)`: entry `n` is `exp(j 2 pi n d_h sin(theta) sin(phi) / lambda0)`.
pub fn steering_horizontal(theta: f64, phi: f64, geom: &ArrayGeometry) -> Vec<Complex64> {
    let step = TAU * geom.d_h * theta.sin() * phi.sin() / geom.lambda0;
    (0..geom.n_h).map(|n| cis(n as f64 * step)).collect()
}

/// `a(theta, phi) = a_h (x) a_v`, vertical index fastest.
pub fn steering_3d(theta: f64, phi: f64, geom: &ArrayGeometry) -> Vec<Complex64> {
    kron(&steering_horizontal(theta, phi, geom), &steering_vertical(theta, geom))
}

/// `b(tau)`: entry `i` is `exp(-j 2 pi f_i tau)`.
pub fn delay_response(tau: f64, grid: &SubcarrierGrid) -> Vec<Complex64> {
    (0..grid.n_f).map(|i| cis(-TAU * grid.frequency(i) * tau)).collect()
}

/// Generalized steering vector `v_p = b(tau_p) (x) a(theta_zod, phi_aod)`.
pub fn generalized_steering(path: &PathParams, geom: &ArrayGeometry, grid: &SubcarrierGrid) -> Vec<Complex64> {
    kron(
        &delay_response(path.tau, grid),
        &steering_3d(path.theta_zod, path.phi_aod, geom),
    )
}

/// Per-path Doppler rate in rad/s. With `two_pi` the rate is
/// `2 pi (r_rx . v) / lambda0`, otherwise `(r_rx . v) / lambda0`.
pub fn doppler_rate(path: &PathParams, kin: &UeKinematics, lambda0: f64, two_pi: bool) -> f64 {
    let base = dot(&path.rx_direction(), &kin.velocity()) / lambda0;
    if two_pi {
        TAU * base
    } else {
        base
    }
}

/// `sum_{n=0}^{count-1} exp(j n step)` in the numerically stable
/// `exp(j (N-1) x / 2) sin(N x / 2) / sin(x / 2)` form.
fn geometric_sum(step: f64, count: usize) -> Complex64 {
    let x = wrap_angle(step);
    let n = count as f64;
    if x == 0.0 {
        return Complex64::new(n, 0.0);
    }
    let half = 0.5 * x;
    cis((n - 1.0) * half) * ((n * half).sin() / half.sin())
}

/// `v_p^H v_q` as the product of three finite geometric series.
pub fn closed_form_inner_product(
    p: &PathParams,
    q: &PathParams,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
) -> Complex64 {
    let k = TAU / geom.lambda0;
    let step_v = k * geom.d_v * (q.theta_zod.cos() - p.theta_zod.cos());
    let step_h = k * geom.d_h * (q.theta_zod.sin() * q.phi_aod.sin() - p.theta_zod.sin() * p.phi_aod.sin());
    let d_tau = p.tau - q.tau;
    // b_p^H b_q = sum_i exp(j 2 pi f_i (tau_p - tau_q))
    let delay_factor = cis(wrap_angle(TAU * grid.f1 * d_tau)) * geometric_sum(TAU * grid.delta_f * d_tau, grid.n_f);
    geometric_sum(step_v, geom.n_v) * geometric_sum(step_h, geom.n_h) * delay_factor
}

/// Bundles array, grid and receive-array size with the Doppler convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub geometry: ArrayGeometry,
    pub grid: SubcarrierGrid,
    pub n_r: usize,
    pub doppler_two_pi: bool,
}

impl ChannelModel {
    pub fn new(geometry: ArrayGeometry, grid: SubcarrierGrid, n_r: usize) -> Self {
        Self {
            geometry,
            grid,
            n_r,
            doppler_two_pi: true,
        }
    }

    pub fn doppler_rate(&self, path: &PathParams, kin: &UeKinematics) -> f64 {
        doppler_rate(path, kin, self.geometry.lambda0, self.doppler_two_pi)
    }

    /// Precomputes every time-invariant factor of the channel.
    pub fn prepare(&self, paths: &[PathParams], kin: &UeKinematics) -> Result<PreparedChannel> {
        if paths.is_empty() {
            return Err(Error::Empty("path list"));
        }
        if kin.n_r() != self.n_r {
            return Err(Error::DimensionMismatch(format!(
                "kinematics carry {} rx antenna positions, model declares n_r = {}",
                kin.n_r(),
                self.n_r
            )));
        }
        let lambda0 = self.geometry.lambda0;
        let mut steering = Vec::with_capacity(paths.len());
        let mut gains = Vec::with_capacity(paths.len());
        let mut omegas = Vec::with_capacity(paths.len());
        for path in paths {
            path.validate()?;
            steering.push(generalized_steering(path, &self.geometry, &self.grid));
            let r_rx = path.rx_direction();
            gains.push(
                kin.rx_antenna_positions
                    .iter()
                    .map(|d| path.beta * cis(TAU * dot(&r_rx, d) / lambda0))
                    .collect::<Vec<_>>(),
            );
            omegas.push(self.doppler_rate(path, kin));
        }
        Ok(PreparedChannel {
            n_r: self.n_r,
            n_t: self.geometry.n_t(),
            n_f: self.grid.n_f,
            steering,
            gains,
            omegas,
        })
    }

    pub fn snapshot(&self, paths: &[PathParams], kin: &UeKinematics, t: f64) -> Result<ChannelSnapshot> {
        Ok(self.prepare(paths, kin)?.snapshot(t))
    }

    /// `count` snapshots at `t0, t0 + delta_t, ...`.
    pub fn track(
        &self,
        paths: &[PathParams],
        kin: &UeKinematics,
        t0: f64,
        delta_t: f64,
        count: usize,
    ) -> Result<SampleTrack> {
        let prepared = self.prepare(paths, kin)?;
        SampleTrack::new(
            delta_t,
            (0..count).map(|l| prepared.snapshot(t0 + l as f64 * delta_t)).collect(),
        )
    }
}

/// Channel with steering vectors, receive phases and Doppler rates cached;
/// evaluates `hbar_u(t) = sum_p c_{u,p}(t) v_p`.
#[derive(Debug, Clone)]
pub struct PreparedChannel {
    n_r: usize,
    n_t: usize,
    n_f: usize,
    steering: Vec<Vec<Complex64>>,
    /// `beta_p exp(j 2 pi r_rx,p . d_rx,u / lambda0)` indexed `[p][u]`.
    gains: Vec<Vec<Complex64>>,
    omegas: Vec<f64>,
}

impl PreparedChannel {
    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn snapshot(&self, t: f64) -> ChannelSnapshot {
        let mut snap = ChannelSnapshot::zeros(self.n_r, self.n_t, self.n_f, t);
        for ((v, gains), &omega) in self.steering.iter().zip(&self.gains).zip(&self.omegas) {
            let doppler = cis(omega * t);
            for (u, &g) in gains.iter().enumerate() {
                let c = g * doppler;
                for (h, &vp) in snap.ue_vector_mut(u).iter_mut().zip(v) {
                    *h += c * vp;
                }
            }
        }
        snap
    }
}

/// Clustered multipath scenario description (angles in radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScenario {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    pub zod_range: (f64, f64),
    pub aod_range: (f64, f64),
    pub zoa_range: (f64, f64),
    pub aoa_range: (f64, f64),
    /// Half-width of the uniform per-ray offset around each cluster center.
    pub ray_spread: f64,
    /// Mean of the exponential cluster-delay distribution, seconds.
    pub delay_spread: f64,
    /// Power decay between consecutive clusters (ordered by delay), dB.
    pub power_decay_db: f64,
    pub seed: u64,
}

impl ClusterScenario {
    pub fn n_paths(&self) -> usize {
        self.n_clusters * self.rays_per_cluster
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::invalid("n_clusters", "must be at least 1"));
        }
        if self.rays_per_cluster == 0 {
            return Err(Error::invalid("rays_per_cluster", "must be at least 1"));
        }
        for (name, (lo, hi)) in [
            ("zod_range", self.zod_range),
            ("aod_range", self.aod_range),
            ("zoa_range", self.zoa_range),
            ("aoa_range", self.aoa_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(name, format!("invalid range ({lo}, {hi})")));
            }
        }
        for (name, (lo, hi)) in [("zod_range", self.zod_range), ("zoa_range", self.zoa_range)] {
            if lo < 0.0 || hi > PI {
                return Err(Error::invalid(name, "elevation range must lie in [0, pi]"));
            }
        }
        if !(self.ray_spread.is_finite() && self.ray_spread >= 0.0) {
            return Err(Error::invalid("ray_spread", "must be >= 0"));
        }
        if !(self.delay_spread.is_finite() && self.delay_spread >= 0.0) {
            return Err(Error::invalid("delay_spread", "must be >= 0"));
        }
        if !self.power_decay_db.is_finite() {
            return Err(Error::invalid("power_decay_db", "must be finite"));
        }
        Ok(())
    }
}

/// Reflect an elevation back into `[0, pi]`.
fn fold_elevation(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t = TAU - t;
    }
    t.clamp(0.0, PI)
}

fn uniform_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn ray_offset<R: Rng>(rng: &mut R, spread: f64) -> f64 {
    if spread > 0.0 {
        rng.random_range(-spread..=spread)
    } else {
        0.0
    }
}

/// Draws `n_clusters * rays_per_cluster` paths. Rays in a cluster share the
/// cluster delay and power share; angles are offset uniformly within
/// `+-ray_spread` of the cluster center; each ray gets an independent
/// uniform phase. Total power is normalized to one.
pub fn synthesize_cluster_paths(scenario: &ClusterScenario) -> Result<Vec<PathParams>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut delays: Vec<f64> = (0..scenario.n_clusters)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            -scenario.delay_spread * u.ln()
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    let first = delays[0];
    delays.iter_mut().for_each(|d| *d -= first);

    let mut paths = Vec::with_capacity(scenario.n_paths());
    for (c, &tau) in delays.iter().enumerate() {
        let zod = uniform_in(&mut rng, scenario.zod_range);
        let aod = uniform_in(&mut rng, scenario.aod_range);
        let zoa = uniform_in(&mut rng, scenario.zoa_range);
        let aoa = uniform_in(&mut rng, scenario.aoa_range);
        let ray_power = 10f64.powf(-scenario.power_decay_db * c as f64 / 10.0) / scenario.rays_per_cluster as f64;
        for _ in 0..scenario.rays_per_cluster {
            let theta_zod = fold_elevation(zod + ray_offset(&mut rng, scenario.ray_spread));
            let phi_aod = aod + ray_offset(&mut rng, scenario.ray_spread);
            let theta_zoa = fold_elevation(zoa + ray_offset(&mut rng, scenario.ray_spread));
            let phi_aoa = aoa + ray_offset(&mut rng, scenario.ray_spread);
            let phase = rng.random_range(0.0..TAU);
            let beta = Complex64::from_polar(ray_power.sqrt(), phase);
            paths.push(PathParams::new(theta_zod, phi_aod, theta_zoa, phi_aoa, tau, beta)?);
        }
    }

    let total: f64 = paths.iter().map(|p| p.beta.norm_sqr()).sum();
    let scale = total.sqrt().recip();
    for p in &mut paths {
        p.beta *= scale;
    }
    Ok(paths)
}

/// Per-entry noise variance giving `mean|h|^2 / sigma^2 = 10^(snr_db / 10)`.
pub fn noise_variance_for(snap: &ChannelSnapshot, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        snap.mean_power() / 10f64.powf(snr_db / 10.0)
    }
}

/// Adds i.i.d. circular complex Gaussian noise of variance `sigma2`.
pub fn add_noise_with_variance<R: Rng>(snap: &ChannelSnapshot, sigma2: f64, rng: &mut R) -> ChannelSnapshot {
    let mut out = snap.clone();
    if sigma2 > 0.0 {
        let scale = (sigma2 / 2.0).sqrt();
        for h in out.as_mut_slice() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *h += Complex64::new(re * scale, im * scale);
        }
    }
    out
}

/// Noisy observation at sample SNR `snr_db`; `f64::INFINITY` returns the
/// snapshot unchanged.
pub fn add_sample_noise(snap: &ChannelSnapshot, snr_db: f64, seed: u64) -> ChannelSnapshot {
    let sigma2 = noise_variance_for(snap, snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_noise_with_variance(snap, sigma2, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;
    use proptest::prelude::{prop_assert, proptest};

    const LAMBDA: f64 = 0.085_655;

    fn geom(n_v: usize, n_h: usize, dv: f64, dh: f64) -> ArrayGeometry {
        ArrayGeometry::new(n_v, n_h, dv * LAMBDA, dh * LAMBDA, LAMBDA).unwrap()
    }

    fn grid(n_f: usize) -> SubcarrierGrid {
        SubcarrierGrid::new(n_f, 30e3, 3.5e9).unwrap()
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() <= tol, "{x} vs {y}");
        }
    }

    fn random_path(rng: &mut ChaCha8Rng) -> PathParams {
        PathParams::new(
            rng.random_range(0.0..PI),
            rng.random_range(-PI..PI),
            rng.random_range(0.0..PI),
            rng.random_range(-PI..PI),
            rng.random_range(0.0..1e-6),
            Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..TAU)),
        )
        .unwrap()
    }

    #[test]
    fn vertical_broadside_and_endfire() {
        let g = geom(4, 1, 0.5, 0.5);
        let one = Complex64::new(1.0, 0.0);
        assert_close(&steering_vertical(PI / 2.0, &g), &[one; 4], 1e-14);
        assert_close(&steering_vertical(0.0, &g), &[one, -one, one, -one], 1e-14);
    }

    #[test]
    fn vertical_matches_scalar_oracle() {
        let g = geom(8, 1, 0.8, 0.5);
        let a = steering_vertical(1.1, &g);
        for (n, z) in a.iter().enumerate() {
            let phase = 2.0 * PI * n as f64 * 0.8 * LAMBDA * 1.1f64.cos() / LAMBDA;
            assert!((z - Complex64::new(phase.cos(), phase.sin())).norm() < 1e-13);
        }
    }

    #[test]
    fn horizontal_special_cases() {
        let g = geom(1, 2, 0.5, 0.5);
        let one = Complex64::new(1.0, 0.0);
        assert_close(&steering_horizontal(0.7, 0.0, &g), &[one, one], 1e-14);
        assert_close(&steering_horizontal(PI / 2.0, PI / 2.0, &g), &[one, -one], 1e-14);
        let g = geom(1, 7, 0.5, 0.6);
        let (theta, phi) = (0.4, -2.1);
        for (n, z) in steering_horizontal(theta, phi, &g).iter().enumerate() {
            let phase = 2.0 * PI * n as f64 * 0.6 * theta.sin() * phi.sin();
            assert!((z - Complex64::from_polar(1.0, phase)).norm() < 1e-13);
        }
    }

    #[test]
    fn steering_3d_double_loop_oracle() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(steering_3d(0.3, 0.2, &geom(1, 1, 0.5, 0.5)), vec![one]);
        assert_close(&steering_3d(PI / 2.0, 0.0, &geom(3, 4, 0.8, 0.5)), &[one; 12], 1e-14);

        let g = geom(3, 5, 0.8, 0.5);
        let (theta, phi) = (1.2, 0.6);
        let a = steering_3d(theta, phi, &g);
        for col in 0..g.n_h {
            for row in 0..g.n_v {
                let phase = 2.0 * PI * (col as f64 * 0.5 * theta.sin() * phi.sin() + row as f64 * 0.8 * theta.cos());
                let z = a[col * g.n_v + row];
                assert!((z - Complex64::from_polar(1.0, phase)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delay_response_cases() {
        let gr = SubcarrierGrid::new(2, 30e3, 1e9).unwrap();
        assert_close(&delay_response(0.0, &gr), &[Complex64::new(1.0, 0.0); 2], 1e-14);
        let b = delay_response(1.0 / (2.0 * 30e3), &gr);
        assert!((b[1] / b[0] + 1.0).norm() < 1e-9);

        let gr = grid(9);
        let tau = 2.3e-7;
        for (i, z) in delay_response(tau, &gr).iter().enumerate() {
            let phase = -2.0 * PI * (3.5e9 + i as f64 * 30e3) * tau;
            assert!((z - Complex64::from_polar(1.0, phase)).norm() < 1e-9);
        }
    }

    #[test]
    fn generalized_steering_triple_loop_oracle() {
        let g = geom(2, 3, 0.8, 0.5);
        let gr = grid(4);
        let p = PathParams::new(1.0, 0.4, 1.5, 0.1, 1.7e-7, Complex64::new(1.0, 0.0)).unwrap();
        let v = generalized_steering(&p, &g, &gr);
        assert!((norm_sqr(&v) - (g.n_t() * gr.n_f) as f64).abs() < 1e-10);
        let r = p.tx_direction();
        for i in 0..gr.n_f {
            for s in 0..g.n_t() {
                let d = g.element_position(s);
                let phase = 2.0 * PI * dot(&r, &d) / LAMBDA - 2.0 * PI * gr.frequency(i) * p.tau;
                let z = v[i * g.n_t() + s];
                assert!((z - Complex64::from_polar(1.0, phase)).norm() < 1e-8);
            }
        }
        let unit = generalized_steering(&p, &geom(1, 1, 0.5, 0.5), &SubcarrierGrid::new(1, 1.0, 0.0).unwrap());
        assert_close(&unit, &[Complex64::new(1.0, 0.0)], 1e-14);
    }

    #[test]
    fn doppler_rate_cases() {
        let path = PathParams::new(PI / 2.0, 0.0, PI / 2.0, 0.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        let still = UeKinematics::new(0.0, 0.0, PI / 2.0, vec![[0.0; 3]]).unwrap();
        assert_eq!(doppler_rate(&path, &still, LAMBDA, true), 0.0);
        let sideways = UeKinematics::new(10.0, PI / 2.0, PI / 2.0, vec![[0.0; 3]]).unwrap();
        assert!(doppler_rate(&path, &sideways, LAMBDA, true).abs() < 1e-9);

        let lambda = crate::SPEED_OF_LIGHT / 3.5e9;
        let kin = UeKinematics::new(8.3333, 0.0, PI / 2.0, vec![[0.0; 3]]).unwrap();
        let w = doppler_rate(&path, &kin, lambda, true);
        // 8.3333 / 0.085655 = 97.29 Hz
        assert!((w - 2.0 * PI * 8.3333 / lambda).abs() < 1e-9);
        assert!((w - 611.3).abs() < 0.5, "{w}");
        assert!((doppler_rate(&path, &kin, lambda, false) - w / TAU).abs() < 1e-12);
    }

    /// Direct evaluation of the per-entry sum over paths using antenna
    /// positions, independent of the steering-vector code path.
    fn direct_sum(model: &ChannelModel, paths: &[PathParams], kin: &UeKinematics, t: f64) -> ChannelSnapshot {
        let g = &model.geometry;
        let mut snap = ChannelSnapshot::zeros(model.n_r, g.n_t(), model.grid.n_f, t);
        let v = kin.velocity();
        for u in 0..model.n_r {
            for s in 0..g.n_t() {
                for i in 0..model.grid.n_f {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for p in paths {
                        let r_rx = p.rx_direction();
                        let r_tx = p.tx_direction();
                        let omega = 2.0 * PI * dot(&r_rx, &v) / g.lambda0;
                        let phase = 2.0 * PI * dot(&r_rx, &kin.rx_antenna_positions[u]) / g.lambda0
                            + 2.0 * PI * dot(&r_tx, &g.element_position(s)) / g.lambda0
                            - 2.0 * PI * model.grid.frequency(i) * p.tau
                            + omega * t;
                        acc += p.beta * Complex64::from_polar(1.0, phase);
                    }
                    snap.set(u, s, i, acc);
                }
            }
        }
        snap
    }

    /// `H_u(t) = A C_u(t) B` built from explicit matrices.
    fn factored(model: &ChannelModel, paths: &[PathParams], kin: &UeKinematics, u: usize, t: f64) -> CMatrix {
        let g = &model.geometry;
        let n_p = paths.len();
        let a = CMatrix::from_fn(g.n_t(), n_p, |s, p| {
            steering_3d(paths[p].theta_zod, paths[p].phi_aod, g)[s]
        });
        let b = CMatrix::from_fn(n_p, model.grid.n_f, |p, i| delay_response(paths[p].tau, &model.grid)[i]);
        let c = CMatrix::from_fn(n_p, n_p, |p, q| {
            if p != q {
                return Complex64::new(0.0, 0.0);
            }
            let path = &paths[p];
            let rx = 2.0 * PI * dot(&path.rx_direction(), &kin.rx_antenna_positions[u]) / g.lambda0;
            path.beta * Complex64::from_polar(1.0, rx + model.doppler_rate(path, kin) * t)
        });
        a * c * b
    }

    fn random_scene(seed: u64, n_paths: usize) -> (ChannelModel, Vec<PathParams>, UeKinematics) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ChannelModel::new(geom(4, 4, 0.8, 0.5), grid(8), 2);
        let paths = (0..n_paths).map(|_| random_path(&mut rng)).collect();
        let kin = UeKinematics::new(16.7, 0.3, 1.4, UeKinematics::default_rx_positions(2, LAMBDA)).unwrap();
        (model, paths, kin)
    }

    #[test]
    fn snapshot_matches_direct_sum_and_factored_form() {
        for seed in 0..5 {
            let (model, paths, kin) = random_scene(seed, 32);
            let t = 0.0037;
            let snap = model.snapshot(&paths, &kin, t).unwrap();
            let direct = direct_sum(&model, &paths, &kin, t);
            let rel =
                crate::linalg::diff_norm_sqr(snap.as_slice(), direct.as_slice()).sqrt() / direct.norm_sqr().sqrt();
            assert!(rel < 1e-9, "direct-sum mismatch {rel}");
            for u in 0..model.n_r {
                let h = factored(&model, &paths, &kin, u, t);
                let rel = (snap.ue_matrix(u) - &h).norm() / h.norm();
                assert!(rel < 1e-12, "factored mismatch {rel}");
            }
        }
    }

    #[test]
    fn kronecker_ordering_reshape() {
        let (model, paths, kin) = random_scene(9, 5);
        let snap = model.snapshot(&paths, &kin, 0.0).unwrap();
        let h = snap.ue_matrix(1);
        for i in 0..model.grid.n_f {
            for s in 0..model.geometry.n_t() {
                assert_eq!(h[(s, i)], snap.get(1, s, i));
            }
        }
    }

    #[test]
    fn single_broadside_path_is_flat() {
        let model = ChannelModel::new(geom(2, 2, 0.8, 0.5), grid(3), 1);
        let path = PathParams::new(PI / 2.0, 0.0, 0.9, 0.2, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        let kin = UeKinematics::new(0.0, 0.0, PI / 2.0, vec![[0.0; 3]]).unwrap();
        let snap = model.snapshot(&[path], &kin, 0.01).unwrap();
        assert_close(snap.as_slice(), &[Complex64::new(1.0, 0.0); 12], 1e-14);
    }

    #[test]
    fn time_shift_is_per_path_rotation() {
        let (model, paths, kin) = random_scene(3, 6);
        let (t, delta) = (0.002, 0.0005);
        let later = model.snapshot(&paths, &kin, t + delta).unwrap();
        let mut rotated = ChannelSnapshot::zeros(2, 16, 8, t + delta);
        for p in &paths {
            let single = model.snapshot(std::slice::from_ref(p), &kin, t).unwrap();
            let rot = Complex64::from_polar(1.0, model.doppler_rate(p, &kin) * delta);
            for (acc, h) in rotated.as_mut_slice().iter_mut().zip(single.as_slice()) {
                *acc += h * rot;
            }
        }
        assert_close(later.as_slice(), rotated.as_slice(), 1e-11);
    }

    #[test]
    fn snapshot_rejects_rx_count_mismatch() {
        let (model, paths, _) = random_scene(1, 2);
        let kin = UeKinematics::new(1.0, 0.0, 1.0, vec![[0.0; 3]; 3]).unwrap();
        assert!(matches!(
            model.snapshot(&paths, &kin, 0.0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(model
            .snapshot(&[], &UeKinematics::new(1.0, 0.0, 1.0, vec![[0.0; 3]; 2]).unwrap(), 0.0)
            .is_err());
    }

    #[test]
    fn pole_convention_zeroes_azimuth() {
        let p = PathParams::new(0.0, 1.0, PI, -2.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(p.phi_aod, 0.0);
        assert_eq!(p.phi_aoa, 0.0);
        assert!(PathParams::new(-0.1, 0.0, 0.0, 0.0, 0.0, Complex64::new(1.0, 0.0)).is_err());
        assert!(PathParams::new(0.1, 0.0, 0.3, 0.0, -1e-9, Complex64::new(1.0, 0.0)).is_err());
    }

    fn cdl_like(seed: u64) -> ClusterScenario {
        ClusterScenario {
            n_clusters: 23,
            rays_per_cluster: 20,
            zod_range: (1.2, 1.9),
            aod_range: (-1.0, 1.0),
            zoa_range: (1.1, 2.0),
            aoa_range: (-PI, PI),
            ray_spread: 0.09,
            delay_spread: 300e-9,
            power_decay_db: 1.0,
            seed,
        }
    }

    #[test]
    fn cluster_synthesis_contract() {
        let paths = synthesize_cluster_paths(&cdl_like(5)).unwrap();
        assert_eq!(paths.len(), 460);
        let power: f64 = paths.iter().map(|p| p.beta.norm_sqr()).sum();
        assert!((power - 1.0).abs() < 1e-12);
        assert_eq!(paths, synthesize_cluster_paths(&cdl_like(5)).unwrap());
        assert_ne!(paths, synthesize_cluster_paths(&cdl_like(6)).unwrap());
        for p in &paths {
            p.validate().unwrap();
        }

        let single = ClusterScenario {
            n_clusters: 1,
            rays_per_cluster: 1,
            zod_range: (1.0, 1.0),
            aod_range: (0.5, 0.5),
            zoa_range: (2.0, 2.0),
            aoa_range: (-0.3, -0.3),
            ray_spread: 0.0,
            delay_spread: 300e-9,
            power_decay_db: 0.0,
            seed: 1,
        };
        let paths = synthesize_cluster_paths(&single).unwrap();
        assert_eq!(paths.len(), 1);
        let p = paths[0];
        assert_eq!(
            (p.theta_zod, p.phi_aod, p.theta_zoa, p.phi_aoa, p.tau),
            (1.0, 0.5, 2.0, -0.3, 0.0)
        );
        assert!((p.beta.norm() - 1.0).abs() < 1e-14);

        let mut bad = single.clone();
        bad.n_clusters = 0;
        assert!(synthesize_cluster_paths(&bad).is_err());
        bad.n_clusters = 1;
        bad.rays_per_cluster = 0;
        assert!(synthesize_cluster_paths(&bad).is_err());
    }

    #[test]
    fn rays_stay_within_spread() {
        let mut sc = cdl_like(2);
        sc.n_clusters = 1;
        sc.zod_range = (1.5, 1.5);
        sc.aod_range = (0.2, 0.2);
        let paths = synthesize_cluster_paths(&sc).unwrap();
        for p in &paths {
            assert!((p.theta_zod - 1.5).abs() <= sc.ray_spread + 1e-12);
            assert!((p.phi_aod - 0.2).abs() <= sc.ray_spread + 1e-12);
            assert_eq!(p.tau, 0.0);
        }
    }

    #[test]
    fn sample_noise_contract() {
        let (model, paths, kin) = random_scene(4, 8);
        let snap = model.snapshot(&paths, &kin, 0.0).unwrap();
        assert_eq!(add_sample_noise(&snap, f64::INFINITY, 3), snap);
        assert_eq!(add_sample_noise(&snap, 10.0, 3), add_sample_noise(&snap, 10.0, 3));
        assert_ne!(add_sample_noise(&snap, 10.0, 3), add_sample_noise(&snap, 10.0, 4));

        // law of large numbers on 10^5 entries
        let big = ChannelSnapshot::from_stacked(1, 100, 1000, 0.0, vec![Complex64::new(1.0, 0.0); 100_000]).unwrap();
        let noisy = add_sample_noise(&big, 7.0, 11);
        let sigma2 = 10f64.powf(-0.7);
        let measured = crate::linalg::diff_norm_sqr(noisy.as_slice(), big.as_slice()) / 1e5;
        assert!((measured / sigma2 - 1.0).abs() < 0.02, "{measured} vs {sigma2}");
    }

    #[test]
    fn closed_form_self_product() {
        let g = geom(4, 8, 0.8, 0.5);
        let gr = grid(16);
        let p = PathParams::new(1.1, 0.3, 1.0, 0.0, 2e-7, Complex64::new(1.0, 0.0)).unwrap();
        let ip = closed_form_inner_product(&p, &p, &g, &gr);
        assert!((ip - Complex64::new((4 * 8 * 16) as f64, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn closed_form_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let g = geom(rng.random_range(1..9), rng.random_range(1..17), 0.8, 0.5);
            let gr = SubcarrierGrid::new(rng.random_range(1..65), 30e3, 3.5e9).unwrap();
            let p = random_path(&mut rng);
            let q = random_path(&mut rng);
            let direct = inner(&generalized_steering(&p, &g, &gr), &generalized_steering(&q, &g, &gr));
            let closed = closed_form_inner_product(&p, &q, &g, &gr);
            let scale = direct.norm().max(1.0);
            assert!((closed - direct).norm() / scale < 1e-10, "{closed} vs {direct}");
        }
    }

    proptest! {
        #[test]
        fn steering_entries_are_unit_modulus(theta in 0.0..PI, phi in -PI..PI, tau in 0.0..2e-6) {
            let g = geom(5, 6, 0.8, 0.5);
            for z in steering_3d(theta, phi, &g).iter().chain(delay_response(tau, &grid(12)).iter()) {
                prop_assert!((z.norm() - 1.0).abs() < 1e-14);
            }
        }

        #[test]
        fn wrap_angle_range(x in -50.0f64..50.0) {
            let y = wrap_angle(x);
            prop_assert!(y > -PI && y <= PI);
            prop_assert!(((x - y) / TAU - ((x - y) / TAU).round()).abs() < 1e-9);
        }
    }
}
