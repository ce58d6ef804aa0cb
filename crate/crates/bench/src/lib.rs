//! Fixtures shared by the benchmarks: the desk-scale scenario with one UE.

use mobipred::channel::{synthesize_cluster_paths, PreparedChannel, UeKinematics};
use mobipred::{AngularDelayDims, ExperimentConfig, Result, SampleTrack};

pub struct Fixture {
    pub config: ExperimentConfig,
    pub channel: PreparedChannel,
    pub track: SampleTrack,
    pub dims: AngularDelayDims,
}

/// 4 x 8 array, 16 bins, 60 rays, 60 km/h, 16 samples.
pub fn desk_fixture() -> Result<Fixture> {
    let mut config = ExperimentConfig::default();
    config.array.n_v = 4;
    config.array.n_h = 8;
    config.grid.n_f = 16;
    config.grid.delta_f_hz = 360e3;
    config.scenario.n_clusters = 3;
    config.scenario.rays_per_cluster = 20;
    config.scenario.ray_spread_deg = 5.0;
    config.n_ues = 4;
    config.drops = 2;
    config.validate()?;

    let model = config.model()?;
    let paths = synthesize_cluster_paths(&config.scenario.to_cluster_scenario(config.seed))?;
    let kin = UeKinematics::new(
        60.0 / 3.6,
        0.7,
        std::f64::consts::FRAC_PI_2,
        UeKinematics::default_rx_positions(config.array.n_r, config.lambda0()),
    )?;
    let channel = model.prepare(&paths, &kin)?;
    let dt = config.delta_t();
    let snaps = (0..=config.history_len)
        .map(|l| channel.snapshot(l as f64 * dt))
        .collect();
    let track = SampleTrack::new(dt, snaps)?;
    let dims = AngularDelayDims::new(config.array.n_v, config.array.n_h, config.grid.n_f);
    Ok(Fixture {
        config,
        channel,
        track,
        dims,
    })
}
