//! Quick oracle checks behind the `selftest` subcommand.

use std::f64::consts::{PI, TAU};

use mobipred::channel::{closed_form_inner_product, generalized_steering, UeKinematics};
use mobipred::denoise::{build_lmmse_filter, estimate_covariance, tk_solve};
use mobipred::eval::{ezf_precoder, nmse_db};
use mobipred::linalg::{inner, CMatrix, CVector};
use mobipred::pad::{inverse_project, project_to_angular_delay};
use mobipred::prony::{pinv_solve, scalar_prony_fit, scalar_prony_predict, vector_prony_predict};
use mobipred::{
    AngularDelayDims, ArrayGeometry, ChannelModel, ChannelSnapshot, Complex64, PathParams, SolverStrategy,
    SubcarrierGrid, TruncationPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_path(rng: &mut ChaCha8Rng, max_tau: f64) -> PathParams {
    PathParams::new(
        rng.random_range(0.2..PI - 0.2),
        rng.random_range(-PI..PI),
        rng.random_range(0.2..PI - 0.2),
        rng.random_range(-PI..PI),
        rng.random_range(0.0..max_tau),
        Complex64::from_polar(rng.random_range(0.3..1.0), rng.random_range(0.0..TAU)),
    )
    .expect("valid random path")
}

/// A single exponential predicted from two samples.
fn two_sample_exactness() -> Check {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let c = random_complex(&mut rng);
        let w = rng.random_range(-PI..PI);
        let x = |l: usize| c * Complex64::from_polar(1.0, w * l as f64);
        let window = [x(0), x(1)];
        for n_d in [1, 4, 16] {
            let coeffs = scalar_prony_fit(&window, 1).expect("fit");
            let pred = scalar_prony_predict(&coeffs, &window[1..], n_d).expect("predict");
            worst = worst.max((pred - x(1 + n_d)).norm() / x(1 + n_d).norm());
        }
    }
    check(
        "two-sample prediction is exact",
        worst < 1e-10,
        format!("max relative error {worst:.2e}"),
    )
}

fn vector_prony_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lambda0 = 0.1;
    let geom = ArrayGeometry::new(2, 4, lambda0 / 2.0, lambda0 / 2.0, lambda0).expect("geometry");
    let grid = SubcarrierGrid::new(8, 360e3, 0.0).expect("grid");
    let model = ChannelModel::new(geom, grid, 2);
    let paths: Vec<PathParams> = (0..4).map(|_| random_path(&mut rng, 1e-6)).collect();
    let kin =
        UeKinematics::new(16.7, 0.4, PI / 2.0, UeKinematics::default_rx_positions(2, lambda0)).expect("kinematics");
    let dt = 5e-4;
    let (l, n_d) = (4, 8);
    let track = model.track(&paths, &kin, 0.0, dt, l + 1).expect("track");
    let truth = model.snapshot(&paths, &kin, (l + n_d) as f64 * dt).expect("truth");
    let pred = vector_prony_predict(&track, n_d, None, &SolverStrategy::default()).expect("predict");
    let (n_r, n_t, n_f) = truth.dims();
    let pred = ChannelSnapshot::from_stacked(n_r, n_t, n_f, truth.t, pred).expect("snapshot");
    let err = nmse_db(&pred, &truth).expect("nmse");
    check(
        "vector recursion is exact on four paths",
        err < -150.0,
        format!("NMSE {err:.1} dB"),
    )
}

fn projection_unitary() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dims = AngularDelayDims::new(4, 8, 16);
    let x: Vec<Complex64> = (0..dims.len()).map(|_| random_complex(&mut rng)).collect();
    let g = project_to_angular_delay(&x, dims).expect("project");
    let back = inverse_project(&g, dims).expect("reconstruct");
    let energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let parseval = (g.iter().map(|v| v.norm_sqr()).sum::<f64>() - energy).abs() / energy;
    let round: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / energy.sqrt();
    check(
        "angular-delay projection is unitary",
        parseval < 1e-12 && round < 1e-12,
        format!("energy error {parseval:.1e}, round trip {round:.1e}"),
    )
}

fn closed_form_steering() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let lambda0 = 0.085;
    let geom = ArrayGeometry::new(4, 8, 0.8 * lambda0, 0.5 * lambda0, lambda0).expect("geometry");
    let grid = SubcarrierGrid::new(16, 360e3, 3.5e9).expect("grid");
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = random_path(&mut rng, 2e-6);
        let q = random_path(&mut rng, 2e-6);
        let direct = inner(
            &generalized_steering(&p, &geom, &grid),
            &generalized_steering(&q, &geom, &grid),
        );
        let closed = closed_form_inner_product(&p, &q, &geom, &grid);
        // |v_p| |v_q| = n_t n_f bounds the inner product
        worst = worst.max((direct - closed).norm() / (geom.n_t() * grid.n_f) as f64);
    }
    check(
        "closed-form steering inner products",
        worst < 1e-10,
        format!("max relative error {worst:.1e}"),
    )
}

fn lmmse_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let snaps: Vec<ChannelSnapshot> = (0..3)
        .map(|l| {
            let data = (0..2 * 8 * 4).map(|_| random_complex(&mut rng)).collect();
            ChannelSnapshot::from_stacked(2, 8, 4, l as f64, data).expect("snapshot")
        })
        .collect();
    let cov = estimate_covariance(&snaps).expect("covariance");
    let filter = build_lmmse_filter(&cov, 0.0, 2).expect("filter");
    let dev = (&filter.w - CMatrix::identity(8, 8)).norm();
    check(
        "zero-noise LMMSE filter is the identity",
        dev < 1e-12,
        format!("|W - I| = {dev:.1e}"),
    )
}

fn ezf_nulls_interference() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let channels: Vec<CMatrix> = (0..4)
        .map(|_| CMatrix::from_fn(2, 16, |_, _| random_complex(&mut rng)))
        .collect();
    let precoder = ezf_precoder(&channels, 1.0).expect("precoder");
    let rows: Vec<_> = channels.iter().map(mobipred::eval::precoding::effective_row).collect();
    let mut worst: f64 = 0.0;
    for (k, row) in rows.iter().enumerate() {
        let signal = (row.transpose() * precoder.w.column(k))[(0, 0)].norm_sqr();
        for j in (0..rows.len()).filter(|&j| j != k) {
            let leak = (row.transpose() * precoder.w.column(j))[(0, 0)].norm_sqr();
            worst = worst.max(leak / signal);
        }
    }
    let power = (precoder.total_power() - 1.0).abs();
    check(
        "EZF nulls inter-user interference",
        worst < 1e-10 && power < 1e-12,
        format!("max leakage ratio {worst:.1e}, power error {power:.1e}"),
    )
}

fn tk_full_rank() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a = CMatrix::from_fn(10, 4, |_, _| random_complex(&mut rng));
    let b = CVector::from_fn(10, |_, _| random_complex(&mut rng));
    let tk = tk_solve(&a, &b, &TruncationPolicy::new(1.0).expect("policy"));
    let ls = -pinv_solve(&a, &b, 1e-12);
    let rel = (&tk - &ls).norm() / ls.norm();
    check(
        "truncated SVD at gamma 1 is least squares",
        rel < 1e-10,
        format!("relative difference {rel:.1e}"),
    )
}

pub fn run_selftest() -> Vec<Check> {
    vec![
        two_sample_exactness(),
        vector_prony_exactness(),
        projection_unitary(),
        closed_form_steering(),
        lmmse_identity(),
        ezf_nulls_interference(),
        tk_full_rank(),
    ]
}
