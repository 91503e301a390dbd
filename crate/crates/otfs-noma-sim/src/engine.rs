//! Monte Carlo engine: scenario geometry, per-trial link realizations,
//! outage estimation, the orthogonal-access baseline and parameter sweeps.
//!
//! Reproducibility contract: every random quantity of trial `t` is drawn
//! from its own ChaCha stream derived from `(seed, t, purpose, index)`, so
//! results are bit-identical whether trials run serially or in parallel and
//! sweeps share channel realizations across axis values (common random
//! numbers). Aggregation collects per-trial summaries into an indexed
//! vector and folds them in trial order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use otfs_noma_core::channel::{
    sample_paths, ChannelEigenSystem, ChannelError, Mobility, PathProfile, PathSet, UniformLaw,
    UpaGeometry, SPEED_OF_LIGHT,
};
use otfs_noma_core::detection::{
    hm_sinr_from_effective, lm_sinr_from_gains, DetectionError, SinrComponents,
};
use otfs_noma_core::grid::{GridError, OtfsGrid};
use otfs_noma_core::precoding::{
    allocate_power, allocate_power_with_split, db_to_linear, Precoder, PrecodingError,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("clusters must be at least 1")]
    NoClusters,
    #[error("users_per_cluster needs one entry per cluster ({clusters}), got {got}")]
    UsersVectorLength { got: usize, clusters: usize },
    #[error(
        "users_per_cluster violates U_q ≤ M: cluster {cluster} has {users} users but M = {subchannels}"
    )]
    UserCountExceedsSubchannels {
        cluster: usize,
        users: usize,
        subchannels: usize,
    },
    #[error("cluster radius must be nonnegative")]
    NegativeRadius,
    #[error("base-station distance must be positive")]
    NonPositiveDistance,
    #[error("sector half-width must be positive and the separation nonnegative")]
    InvalidSector,
    #[error("rate threshold must be positive")]
    NonPositiveThreshold,
    #[error("singular-channel epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("OMA time share must lie in (0, 1]")]
    InvalidTimeShare,
    #[error("could not place {clusters} clusters with separation {separation} rad after {attempts} attempts")]
    PlacementFailed {
        clusters: usize,
        separation: f64,
        attempts: usize,
    },
    #[error("invalid {axis} sweep value {value}: {reason}")]
    InvalidAxisValue {
        axis: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Precoding(#[from] PrecodingError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

/// How many low-mobility users each cluster serves.
#[derive(Debug, Clone, PartialEq)]
pub enum UserCount {
    /// Explicit per-cluster counts.
    Explicit(Vec<usize>),
    /// Redrawn per trial, uniform on `[1, M]`.
    RandomUniform,
}

/// Time split of the TDMA baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmaTimeShare {
    /// Every user (high- or low-mobility) gets an equal slice,
    /// `β = 1/(U+1)`.
    EqualPerUser,
    /// `β = α`, mirroring the NOMA power split.
    MirrorAlpha,
    /// Fixed fraction in (0, 1].
    Fixed(f64),
}

/// Fully resolved scenario: grid, array, cluster geometry, channel
/// statistics, power split and run controls. All quantities in SI units and
/// linear power ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: OtfsGrid,
    pub carrier_frequency: f64,
    pub geometry: UpaGeometry,
    pub clusters: usize,
    pub users_per_cluster: UserCount,
    pub paths_per_user: usize,
    pub max_delay_tap: usize,
    /// m/s
    pub max_speed: f64,
    pub elevation_law: UniformLaw,
    pub azimuth_law: UniformLaw,
    /// Linear transmit SNR ρ_T.
    pub transmit_snr: f64,
    pub hm_fraction: f64,
    pub cluster_split: Option<Vec<f64>>,
    pub bs_distance: f64,
    pub cluster_radius: f64,
    pub sector_halfwidth: f64,
    pub min_separation: f64,
    /// b/s/Hz
    pub rate_threshold: f64,
    pub trials: u64,
    pub seed: u64,
    pub oma_time_share: OmaTimeShare,
    pub singular_epsilon: f64,
    /// Evaluate every cluster instead of only cluster 1.
    pub report_all_clusters: bool,
}

impl ScenarioConfig {
    /// The reference parameter set: N = M = 16, Δf = 15 kHz, f_c = 60 GHz,
    /// 8×8 half-wavelength array, Q = 3, ρ_T = 30 dB, α = 3/4, P = 4,
    /// l_max = 4, 200 km/h, R_Q = 10 m, R_th = 0.5 b/s/Hz.
    pub fn reference() -> Self {
        let carrier_frequency = 60e9;
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        Self {
            grid: OtfsGrid::from_spacing(16, 16, 15e3).expect("valid reference grid"),
            carrier_frequency,
            geometry: UpaGeometry::half_wavelength(8, wavelength)
                .expect("valid reference array"),
            clusters: 3,
            users_per_cluster: UserCount::RandomUniform,
            paths_per_user: 4,
            max_delay_tap: 4,
            max_speed: 200.0 / 3.6,
            elevation_law: UniformLaw::new(std::f64::consts::FRAC_PI_4, std::f64::consts::PI / 10.0),
            azimuth_law: UniformLaw::new(0.0, std::f64::consts::PI),
            transmit_snr: db_to_linear(30.0),
            hm_fraction: 0.75,
            cluster_split: None,
            bs_distance: 100.0,
            cluster_radius: 10.0,
            sector_halfwidth: std::f64::consts::FRAC_PI_3,
            min_separation: std::f64::consts::PI / 9.0,
            rate_threshold: 0.5,
            trials: 10_000,
            seed: 1,
            oma_time_share: OmaTimeShare::EqualPerUser,
            singular_epsilon: 1e-12,
            report_all_clusters: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.trials == 0 {
            return Err(EngineError::NoTrials);
        }
        if self.clusters == 0 {
            return Err(EngineError::NoClusters);
        }
        if let UserCount::Explicit(counts) = &self.users_per_cluster {
            if counts.len() != self.clusters {
                return Err(EngineError::UsersVectorLength {
                    got: counts.len(),
                    clusters: self.clusters,
                });
            }
            for (cluster, &users) in counts.iter().enumerate() {
                if users > self.grid.n_delay() {
                    return Err(EngineError::UserCountExceedsSubchannels {
                        cluster,
                        users,
                        subchannels: self.grid.n_delay(),
                    });
                }
            }
        }
        if self.cluster_radius < 0.0 {
            return Err(EngineError::NegativeRadius);
        }
        if !(self.bs_distance > 0.0) {
            return Err(EngineError::NonPositiveDistance);
        }
        if !(self.sector_halfwidth > 0.0) || self.min_separation < 0.0 {
            return Err(EngineError::InvalidSector);
        }
        if !(self.rate_threshold > 0.0) {
            return Err(EngineError::NonPositiveThreshold);
        }
        if !(self.singular_epsilon > 0.0) {
            return Err(EngineError::NonPositiveEpsilon);
        }
        if let OmaTimeShare::Fixed(beta) = self.oma_time_share {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(EngineError::InvalidTimeShare);
            }
        }
        if let Some(split) = &self.cluster_split {
            if split.len() != self.clusters || split.iter().any(|&w| !(w >= 0.0)) {
                return Err(PrecodingError::InvalidSplit {
                    clusters: self.clusters,
                }
                .into());
            }
        }
        // channel statistics, including the Doppler-tap bound
        otfs_noma_core::channel::validate_profile(self.grid, &self.hm_profile(0.0))?;
        allocate_power(self.transmit_snr, &vec![1; self.clusters], self.hm_fraction)?;
        Ok(())
    }

    fn hm_profile(&self, mean_azimuth: f64) -> PathProfile {
        PathProfile {
            path_count: self.paths_per_user,
            max_delay_tap: self.max_delay_tap,
            mobility: Mobility::High {
                max_speed: self.max_speed,
                carrier_frequency: self.carrier_frequency,
            },
            elevation: self.elevation_law,
            azimuth: self.azimuth_law.with_mean(mean_azimuth),
        }
    }

    fn lm_profile(&self, mean_elevation: f64, mean_azimuth: f64) -> PathProfile {
        PathProfile {
            path_count: self.paths_per_user,
            max_delay_tap: self.max_delay_tap,
            mobility: Mobility::Low,
            elevation: self.elevation_law.with_mean(mean_elevation),
            azimuth: self.azimuth_law.with_mean(mean_azimuth),
        }
    }

    fn allocation(
        &self,
        cluster_sizes: &[usize],
    ) -> Result<otfs_noma_core::precoding::PowerAllocation, PrecodingError> {
        match &self.cluster_split {
            Some(split) => {
                allocate_power_with_split(self.transmit_snr, split, cluster_sizes, self.hm_fraction)
            }
            None => allocate_power(self.transmit_snr, cluster_sizes, self.hm_fraction),
        }
    }
}

// Stream purposes for per-trial substream derivation.
const STREAM_GEOMETRY: u64 = 1;
const STREAM_CLUSTER_SIZE: u64 = 2;
const STREAM_HM_PATHS: u64 = 3;
const STREAM_LM_PLACEMENT: u64 = 4;
const STREAM_LM_PATHS: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent substream for one purpose inside one trial.
fn stream_rng(seed: u64, trial: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ trial);
    h = splitmix64(h ^ purpose);
    h = splitmix64(h ^ index);
    ChaCha8Rng::seed_from_u64(h)
}

/// Position of one low-mobility user, uniform on the disk of radius `R_Q`
/// around its cluster's high-mobility user, mapped to small-angle offsets
/// seen from the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmPosition {
    /// Distance from the cluster center in meters.
    pub radial: f64,
    /// Polar angle inside the disk.
    pub polar: f64,
    /// Mean elevation fed to the path sampler.
    pub elevation: f64,
    /// Mean azimuth fed to the path sampler.
    pub azimuth: f64,
}

/// Per-trial geometry: one direction per cluster plus the low-mobility user
/// positions of every evaluated cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub hm_directions: Vec<(f64, f64)>,
    pub lm_positions: Vec<Vec<LmPosition>>,
}

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Draw the trial geometry: cluster azimuths uniform on the sector with the
/// minimum angular separation enforced by joint rejection, then low-mobility
/// users uniform on the disk around their cluster head.
pub fn place_users(
    cfg: &ScenarioConfig,
    trial: u64,
    cluster_sizes: &[usize],
    evaluated: &[usize],
) -> Result<Placement, EngineError> {
    let mut rng = stream_rng(cfg.seed, trial, STREAM_GEOMETRY, 0);
    let q = cfg.clusters;
    let mut azimuths = vec![0.0_f64; q];
    let mut placed = false;
    'attempts: for _ in 0..PLACEMENT_ATTEMPTS {
        for a in azimuths.iter_mut() {
            *a = rng.random_range(-cfg.sector_halfwidth..cfg.sector_halfwidth);
        }
        for i in 0..q {
            for j in i + 1..q {
                if (azimuths[i] - azimuths[j]).abs() < cfg.min_separation {
                    continue 'attempts;
                }
            }
        }
        placed = true;
        break;
    }
    if !placed {
        return Err(EngineError::PlacementFailed {
            clusters: q,
            separation: cfg.min_separation,
            attempts: PLACEMENT_ATTEMPTS,
        });
    }
    let hm_directions: Vec<(f64, f64)> = azimuths
        .iter()
        .map(|&a| (cfg.elevation_law.mean, a))
        .collect();

    let mut lm_positions = vec![Vec::new(); q];
    for &c in evaluated {
        let (center_elevation, center_azimuth) = hm_directions[c];
        let users = cluster_sizes[c];
        let mut positions = Vec::with_capacity(users);
        for u in 1..=users {
            let key = ((c as u64) << 32) | u as u64;
            let mut rng = stream_rng(cfg.seed, trial, STREAM_LM_PLACEMENT, key);
            let radial = cfg.cluster_radius * rng.random_range(0.0..1.0_f64).sqrt();
            let polar = rng.random_range(0.0..std::f64::consts::TAU);
            // small-angle mapping of the transverse disk offset
            let d_azimuth = radial * polar.cos() / cfg.bs_distance;
            let d_elevation = radial * polar.sin() / cfg.bs_distance;
            positions.push(LmPosition {
                radial,
                polar,
                elevation: center_elevation + d_elevation,
                azimuth: center_azimuth + d_azimuth,
            });
        }
        lm_positions[c] = positions;
    }
    Ok(Placement {
        hm_directions,
        lm_positions,
    })
}

fn draw_cluster_sizes(cfg: &ScenarioConfig, trial: u64) -> Vec<usize> {
    match &cfg.users_per_cluster {
        UserCount::Explicit(counts) => counts.clone(),
        UserCount::RandomUniform => (0..cfg.clusters)
            .map(|c| {
                let mut rng = stream_rng(cfg.seed, trial, STREAM_CLUSTER_SIZE, c as u64);
                rng.random_range(1..=cfg.grid.n_delay())
            })
            .collect(),
    }
}

/// Achievable rate in b/s/Hz.
fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Outcome of one low-mobility user in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LmUserOutcome {
    /// Rate of the high-mobility signal detected at this user.
    pub hm_rate_at_user: f64,
    /// Rate of the user's own signal after cancellation.
    pub own_rate: f64,
    /// Coupled outage: failing to decode either the high-mobility signal or
    /// one's own signal counts.
    pub outage: bool,
    pub oma_rate: f64,
    pub oma_outage: bool,
}

/// Outcome of one evaluated cluster in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub cluster: usize,
    pub hm_rate: f64,
    pub hm_outage: bool,
    pub oma_hm_rate: f64,
    pub oma_hm_outage: bool,
    /// Denominator pieces of the high-mobility SINR at the cluster head;
    /// absent when the channel was singular.
    pub hm_components: Option<SinrComponents>,
    pub lm: Vec<LmUserOutcome>,
}

/// One end-to-end channel/geometry realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub cluster_sizes: Vec<usize>,
    pub clusters: Vec<ClusterOutcome>,
}

fn oma_time_fraction(cfg: &ScenarioConfig, users: usize) -> f64 {
    match cfg.oma_time_share {
        OmaTimeShare::EqualPerUser => 1.0 / (users as f64 + 1.0),
        OmaTimeShare::MirrorAlpha => cfg.hm_fraction,
        OmaTimeShare::Fixed(beta) => beta,
    }
}

/// Run one trial: draw geometry and path sets, build the per-cluster beams
/// and the power split, then evaluate the closed-form SINRs, rates and
/// outage flags for every user of the evaluated cluster(s). Singular
/// channels surface as outage flags, never as errors.
pub fn run_trial(cfg: &ScenarioConfig, trial: u64) -> Result<TrialResult, EngineError> {
    let cluster_sizes = draw_cluster_sizes(cfg, trial);
    let evaluated: Vec<usize> = if cfg.report_all_clusters {
        (0..cfg.clusters).collect()
    } else {
        vec![0]
    };
    let placement = place_users(cfg, trial, &cluster_sizes, &evaluated)?;

    let hm_paths: Vec<PathSet> = (0..cfg.clusters)
        .map(|c| {
            let mut rng = stream_rng(cfg.seed, trial, STREAM_HM_PATHS, c as u64);
            let profile = cfg.hm_profile(placement.hm_directions[c].1);
            sample_paths(&mut rng, cfg.grid, &profile)
        })
        .collect::<Result<_, _>>()?;
    let precoder = Precoder::conjugate_beam(&cfg.geometry, &hm_paths)?;
    let power = cfg.allocation(&cluster_sizes)?;

    let threshold = cfg.rate_threshold;
    let eps = cfg.singular_epsilon;
    let mut clusters = Vec::with_capacity(evaluated.len());
    for &c in &evaluated {
        let users = cluster_sizes[c];
        let beta = oma_time_fraction(cfg, users);

        // ---- high-mobility user of cluster c
        let hm_eval = evaluate_hm_at(cfg, &hm_paths[c], &precoder, &power, c, eps)?;
        let (hm_rate, hm_components) = hm_eval;
        let hm_outage = hm_rate < threshold;
        // baseline: cluster head alone with the full cluster share
        let (oma_hm_rate, oma_hm_outage) = match &hm_components {
            Some(comp) => {
                let sinr =
                    power.cluster_snr(c) / (comp.inter_cluster + comp.noise_enhancement);
                let r = beta * rate(sinr);
                (r, r < threshold)
            }
            None => (0.0, true),
        };

        // ---- low-mobility users of cluster c
        let mut lm = Vec::with_capacity(users);
        for u in 1..=users {
            let position = placement.lm_positions[c][u - 1];
            let key = ((c as u64) << 32) | u as u64;
            let mut rng = stream_rng(cfg.seed, trial, STREAM_LM_PATHS, key);
            let profile = cfg.lm_profile(position.elevation, position.azimuth);
            let paths = sample_paths(&mut rng, cfg.grid, &profile)?;

            let steering = paths.steering_responses(&cfg.geometry)?;
            // high-mobility signal detected at this user
            let (hm_rate_at_user, _) =
                evaluate_hm_with_steering(cfg, &paths, &steering, &precoder, &power, c, eps)?;

            // own one-tap detection on subchannel u − 1
            let subchannel = u - 1;
            let gains: Vec<Complex64> = (0..cfg.clusters)
                .map(|q| {
                    let beams =
                        paths.beam_responses_from_steering(&steering, precoder.column(q))?;
                    otfs_noma_core::channel::tf_gain_from_responses(
                        cfg.grid, &paths, &beams, subchannel,
                    )
                })
                .collect::<Result<_, ChannelError>>()?;
            let own = lm_sinr_from_gains(&gains, c, &power, subchannel, eps);
            let (own_rate, own_singular) = match own {
                Ok(report) => (rate(report.sinr), false),
                Err(DetectionError::SingularSubchannel { .. }) => (0.0, true),
                Err(other) => return Err(other.into()),
            };
            let outage = hm_rate_at_user < threshold || own_rate < threshold || own_singular;

            // baseline: alone on the subchannel with the full cluster share
            let (oma_rate, oma_outage) = if own_singular {
                (0.0, true)
            } else {
                let serving = gains[c].norm_sqr();
                let mut interference = 0.0;
                for (q, gain) in gains.iter().enumerate() {
                    if q != c {
                        interference += power.cluster_snr(q) * gain.norm_sqr();
                    }
                }
                let sinr = power.cluster_snr(c) * serving / (interference + 1.0);
                let r = (1.0 - beta) / users as f64 * rate(sinr);
                (r, r < threshold)
            };

            lm.push(LmUserOutcome {
                hm_rate_at_user,
                own_rate,
                outage,
                oma_rate,
                oma_outage,
            });
        }

        clusters.push(ClusterOutcome {
            cluster: c,
            hm_rate,
            hm_outage,
            oma_hm_rate,
            oma_hm_outage,
            hm_components,
            lm,
        });
    }

    Ok(TrialResult {
        trial,
        cluster_sizes,
        clusters,
    })
}

fn evaluate_hm_at(
    cfg: &ScenarioConfig,
    paths: &PathSet,
    precoder: &Precoder,
    power: &otfs_noma_core::precoding::PowerAllocation,
    serving: usize,
    eps: f64,
) -> Result<(f64, Option<SinrComponents>), EngineError> {
    let steering = paths.steering_responses(&cfg.geometry)?;
    evaluate_hm_with_steering(cfg, paths, &steering, precoder, power, serving, eps)
}

/// Closed-form high-mobility SINR of `paths` under every cluster beam;
/// singular channels map to a zero rate instead of an error.
fn evaluate_hm_with_steering(
    cfg: &ScenarioConfig,
    paths: &PathSet,
    steering: &[Complex64],
    precoder: &Precoder,
    power: &otfs_noma_core::precoding::PowerAllocation,
    serving: usize,
    eps: f64,
) -> Result<(f64, Option<SinrComponents>), EngineError> {
    let effective: Vec<Vec<Complex64>> = (0..cfg.clusters)
        .map(|q| {
            let beams = paths.beam_responses_from_steering(steering, precoder.column(q))?;
            Ok(
                ChannelEigenSystem::from_beam_responses(cfg.grid, paths, &beams)?
                    .eigenvalues()
                    .to_vec(),
            )
        })
        .collect::<Result<_, ChannelError>>()?;
    match hm_sinr_from_effective(&effective, serving, power, eps) {
        Ok(report) => Ok((rate(report.sinr), Some(report.components))),
        Err(DetectionError::SingularChannel { .. }) => Ok((0.0, None)),
        Err(other) => Err(other.into()),
    }
}

/// Point estimate with its normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub probability: f64,
    pub half_width: f64,
}

fn estimate(sum: f64, trials: u64) -> OutageEstimate {
    let p = sum / trials as f64;
    OutageEstimate {
        probability: p,
        half_width: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
    }
}

/// Empirical outage probabilities per role.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageStats {
    pub hm: OutageEstimate,
    /// Absent when no trial carried a low-mobility user.
    pub lm: Option<OutageEstimate>,
    pub trials: u64,
}

/// Matched NOMA and baseline statistics from one batch of common trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub noma: OutageStats,
    pub oma: OutageStats,
}

#[derive(Clone, Copy)]
struct TrialAggregate {
    hm_out: f64,
    oma_hm_out: f64,
    lm_frac: Option<f64>,
    oma_lm_frac: Option<f64>,
}

fn aggregate_trial(result: &TrialResult) -> TrialAggregate {
    let n = result.clusters.len() as f64;
    let hm_out = result.clusters.iter().filter(|c| c.hm_outage).count() as f64 / n;
    let oma_hm_out = result.clusters.iter().filter(|c| c.oma_hm_outage).count() as f64 / n;
    let lm_total: usize = result.clusters.iter().map(|c| c.lm.len()).sum();
    let (lm_frac, oma_lm_frac) = if lm_total == 0 {
        (None, None)
    } else {
        let lm_out: usize = result
            .clusters
            .iter()
            .flat_map(|c| &c.lm)
            .filter(|u| u.outage)
            .count();
        let oma_out: usize = result
            .clusters
            .iter()
            .flat_map(|c| &c.lm)
            .filter(|u| u.oma_outage)
            .count();
        (
            Some(lm_out as f64 / lm_total as f64),
            Some(oma_out as f64 / lm_total as f64),
        )
    };
    TrialAggregate {
        hm_out,
        oma_hm_out,
        lm_frac,
        oma_lm_frac,
    }
}

/// Run the configured number of trials in parallel and fold the per-trial
/// outage indicators in trial order.
pub fn run_batch(cfg: &ScenarioConfig) -> Result<BatchStats, EngineError> {
    cfg.validate()?;
    let aggregates: Vec<TrialAggregate> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t).map(|r| aggregate_trial(&r)))
        .collect::<Result<_, _>>()?;

    let trials = cfg.trials;
    let mut hm = 0.0;
    let mut oma_hm = 0.0;
    let mut lm = 0.0;
    let mut oma_lm = 0.0;
    let mut lm_trials = 0u64;
    for agg in &aggregates {
        hm += agg.hm_out;
        oma_hm += agg.oma_hm_out;
        if let (Some(f), Some(of)) = (agg.lm_frac, agg.oma_lm_frac) {
            lm += f;
            oma_lm += of;
            lm_trials += 1;
        }
    }
    let lm_stats = |sum: f64| {
        if lm_trials == 0 {
            None
        } else {
            Some(estimate(sum, lm_trials))
        }
    };
    Ok(BatchStats {
        noma: OutageStats {
            hm: estimate(hm, trials),
            lm: lm_stats(lm),
            trials,
        },
        oma: OutageStats {
            hm: estimate(oma_hm, trials),
            lm: lm_stats(oma_lm),
            trials,
        },
    })
}

/// Empirical NOMA outage probabilities for one scenario.
pub fn outage_probability(cfg: &ScenarioConfig) -> Result<OutageStats, EngineError> {
    Ok(run_batch(cfg)?.noma)
}

/// The TDMA baseline on the same channel draws.
pub fn oma_baseline(cfg: &ScenarioConfig) -> Result<OutageStats, EngineError> {
    Ok(run_batch(cfg)?.oma)
}

/// Sweepable scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    TransmitSnr,
    LmCount,
    Alpha,
    Clusters,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::TransmitSnr => "transmit_snr",
            SweepAxis::LmCount => "lm_count",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Clusters => "clusters",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "transmit_snr" => Some(SweepAxis::TransmitSnr),
            "lm_count" => Some(SweepAxis::LmCount),
            "alpha" => Some(SweepAxis::Alpha),
            "clusters" => Some(SweepAxis::Clusters),
            _ => None,
        }
    }
}

/// Apply one axis value to a scenario. SNR values are in dB; count axes
/// must hold integers.
pub fn apply_axis(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<ScenarioConfig, EngineError> {
    let mut out = cfg.clone();
    match axis {
        SweepAxis::TransmitSnr => {
            out.transmit_snr = db_to_linear(value);
        }
        SweepAxis::LmCount => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(EngineError::InvalidAxisValue {
                    axis: axis.name(),
                    value,
                    reason: "must be a nonnegative integer",
                });
            }
            let users = value as usize;
            if users > cfg.grid.n_delay() {
                return Err(EngineError::InvalidAxisValue {
                    axis: axis.name(),
                    value,
                    reason: "violates U_q ≤ M",
                });
            }
            out.users_per_cluster = UserCount::Explicit(vec![users; cfg.clusters]);
        }
        SweepAxis::Alpha => {
            if !(value > 0.0 && value < 1.0) {
                return Err(EngineError::InvalidAxisValue {
                    axis: axis.name(),
                    value,
                    reason: "must lie strictly inside (0, 1)",
                });
            }
            out.hm_fraction = value;
        }
        SweepAxis::Clusters => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(EngineError::InvalidAxisValue {
                    axis: axis.name(),
                    value,
                    reason: "must be a positive integer",
                });
            }
            let clusters = value as usize;
            match &cfg.users_per_cluster {
                UserCount::Explicit(counts) if counts.len() != clusters => {
                    return Err(EngineError::InvalidAxisValue {
                        axis: axis.name(),
                        value,
                        reason: "explicit users_per_cluster length disagrees",
                    });
                }
                _ => {}
            }
            out.clusters = clusters;
            if let Some(split) = &cfg.cluster_split {
                if split.len() != clusters {
                    return Err(EngineError::InvalidAxisValue {
                        axis: axis.name(),
                        value,
                        reason: "cluster_split length disagrees",
                    });
                }
            }
        }
    }
    Ok(out)
}

/// One sweep point: matched NOMA/baseline statistics at an axis value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub stats: BatchStats,
}

/// Evaluate the scenario at each axis value with common random numbers
/// (identical seed-derived streams at every value).
pub fn sweep(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepPoint>, EngineError> {
    values
        .iter()
        .map(|&value| {
            let point_cfg = apply_axis(cfg, axis, value)?;
            Ok(SweepPoint {
                value,
                stats: run_batch(&point_cfg)?,
            })
        })
        .collect()
}
