//! Experiment configuration: a TOML file of optional sections whose
//! defaults reproduce the reference scenario (an empty file is a valid
//! experiment). See the repository README for the full grammar.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use otfs_noma_core::channel::{UniformLaw, UpaGeometry, SPEED_OF_LIGHT};
use otfs_noma_core::grid::OtfsGrid;
use otfs_noma_core::precoding::db_to_linear;

use crate::engine::{EngineError, OmaTimeShare, ScenarioConfig, SweepAxis, UserCount};
use crate::output::OutputFormat;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    MissingFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field {field}: {constraint}")]
    Invalid {
        field: &'static str,
        constraint: String,
    },
    #[error(transparent)]
    Scenario(#[from] EngineError),
}

fn invalid(field: &'static str, constraint: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field,
        constraint: constraint.to_string(),
    }
}

/// A linear SNR written either as a number of dB or as a string like
/// `"30 dB"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SnrValue {
    Db(f64),
    Text(String),
}

impl SnrValue {
    fn decibels(&self) -> Result<f64, ConfigError> {
        match self {
            SnrValue::Db(v) => Ok(*v),
            SnrValue::Text(s) => {
                let trimmed = s.trim();
                let number = trimmed
                    .strip_suffix("dB")
                    .or_else(|| trimmed.strip_suffix("db"))
                    .unwrap_or(trimmed)
                    .trim();
                number.parse::<f64>().map_err(|_| {
                    invalid(
                        "power.transmit_snr_db",
                        format!("expected a number of dB, got {s:?}"),
                    )
                })
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum UsersValue {
    Keyword(String),
    Fixed(u64),
    PerCluster(Vec<u64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TimeShareValue {
    Keyword(String),
    Fraction(f64),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<RawGrid>,
    array: Option<RawArray>,
    clusters: Option<RawClusters>,
    channel: Option<RawChannel>,
    power: Option<RawPower>,
    outage: Option<RawOutage>,
    run: Option<RawRun>,
    oma: Option<RawOma>,
    sweep: Option<RawSweep>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    doppler_bins: Option<usize>,
    delay_bins: Option<usize>,
    subcarrier_spacing_hz: Option<f64>,
    carrier_frequency_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArray {
    side: Option<usize>,
    spacing_wavelengths: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClusters {
    count: Option<usize>,
    users: Option<UsersValue>,
    bs_distance_m: Option<f64>,
    radius_m: Option<f64>,
    sector_halfwidth_rad: Option<f64>,
    min_separation_rad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    paths: Option<usize>,
    max_delay_tap: Option<usize>,
    max_speed_kmh: Option<f64>,
    elevation_mean_rad: Option<f64>,
    elevation_variance: Option<f64>,
    azimuth_mean_rad: Option<f64>,
    azimuth_variance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPower {
    transmit_snr_db: Option<SnrValue>,
    hm_fraction: Option<f64>,
    cluster_split: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutage {
    rate_threshold_bps_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    trials: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    measure_time: Option<bool>,
    singular_epsilon: Option<f64>,
    report_all_clusters: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOma {
    time_share: Option<TimeShareValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    values: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<String>,
    format: Option<String>,
    baseline: Option<bool>,
}

/// Where and how results are written.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub path: PathBuf,
    pub format: OutputFormat,
    pub baseline: bool,
    /// Record wall-clock seconds in the result rows. Off by default so
    /// repeated runs of the same experiment are byte-identical.
    pub measure_time: bool,
}

/// Fully validated experiment: scenario, sweep, output options and an
/// optional worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub output: OutputOptions,
    pub workers: Option<usize>,
}

/// Read and validate an experiment file, applying the reference defaults to
/// every omitted field. An empty file is the reference experiment.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Same as [`parse_config`] from an in-memory string.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    let mut scenario = ScenarioConfig::reference();

    let grid = raw.grid.unwrap_or_default();
    let n = grid.doppler_bins.unwrap_or(16);
    let m = grid.delay_bins.unwrap_or(16);
    let spacing = grid.subcarrier_spacing_hz.unwrap_or(15e3);
    scenario.grid = OtfsGrid::from_spacing(n, m, spacing).map_err(|e| invalid("grid", e))?;
    scenario.carrier_frequency = grid.carrier_frequency_hz.unwrap_or(60e9);
    if !(scenario.carrier_frequency > 0.0) {
        return Err(invalid(
            "grid.carrier_frequency_hz",
            "must be positive",
        ));
    }

    let array = raw.array.unwrap_or_default();
    let side = array.side.unwrap_or(8);
    let ratio = array.spacing_wavelengths.unwrap_or(0.5);
    let wavelength = SPEED_OF_LIGHT / scenario.carrier_frequency;
    scenario.geometry = UpaGeometry::new(side, ratio * wavelength, wavelength)
        .map_err(|e| invalid("array", e))?;

    let clusters = raw.clusters.unwrap_or_default();
    scenario.clusters = clusters.count.unwrap_or(3);
    scenario.users_per_cluster = match clusters.users {
        None => UserCount::RandomUniform,
        Some(UsersValue::Keyword(word)) if word == "random" => UserCount::RandomUniform,
        Some(UsersValue::Keyword(word)) => {
            return Err(invalid(
                "clusters.users",
                format!("expected \"random\", an integer or a list, got {word:?}"),
            ));
        }
        Some(UsersValue::Fixed(u)) => {
            UserCount::Explicit(vec![u as usize; scenario.clusters])
        }
        Some(UsersValue::PerCluster(counts)) => {
            UserCount::Explicit(counts.into_iter().map(|u| u as usize).collect())
        }
    };
    scenario.bs_distance = clusters.bs_distance_m.unwrap_or(100.0);
    scenario.cluster_radius = clusters.radius_m.unwrap_or(10.0);
    scenario.sector_halfwidth = clusters
        .sector_halfwidth_rad
        .unwrap_or(std::f64::consts::FRAC_PI_3);
    scenario.min_separation = clusters
        .min_separation_rad
        .unwrap_or(std::f64::consts::PI / 9.0);

    let channel = raw.channel.unwrap_or_default();
    scenario.paths_per_user = channel.paths.unwrap_or(4);
    scenario.max_delay_tap = channel.max_delay_tap.unwrap_or(4);
    scenario.max_speed = channel.max_speed_kmh.unwrap_or(200.0) / 3.6;
    scenario.elevation_law = UniformLaw::new(
        channel
            .elevation_mean_rad
            .unwrap_or(std::f64::consts::FRAC_PI_4),
        channel
            .elevation_variance
            .unwrap_or(std::f64::consts::PI / 10.0),
    );
    scenario.azimuth_law = UniformLaw::new(
        channel.azimuth_mean_rad.unwrap_or(0.0),
        channel.azimuth_variance.unwrap_or(std::f64::consts::PI),
    );

    let power = raw.power.unwrap_or_default();
    let snr_db = match &power.transmit_snr_db {
        Some(v) => v.decibels()?,
        None => 30.0,
    };
    scenario.transmit_snr = db_to_linear(snr_db);
    scenario.hm_fraction = power.hm_fraction.unwrap_or(0.75);
    scenario.cluster_split = power.cluster_split;

    let outage = raw.outage.unwrap_or_default();
    scenario.rate_threshold = outage.rate_threshold_bps_hz.unwrap_or(0.5);

    let run = raw.run.unwrap_or_default();
    scenario.trials = run.trials.unwrap_or(10_000);
    scenario.seed = run.seed.unwrap_or(1);
    scenario.singular_epsilon = run.singular_epsilon.unwrap_or(1e-12);
    scenario.report_all_clusters = run.report_all_clusters.unwrap_or(false);

    let oma = raw.oma.unwrap_or_default();
    scenario.oma_time_share = match oma.time_share {
        None => OmaTimeShare::EqualPerUser,
        Some(TimeShareValue::Keyword(word)) if word == "equal" => OmaTimeShare::EqualPerUser,
        Some(TimeShareValue::Keyword(word)) if word == "alpha" => OmaTimeShare::MirrorAlpha,
        Some(TimeShareValue::Keyword(word)) => {
            return Err(invalid(
                "oma.time_share",
                format!("expected \"equal\", \"alpha\" or a fraction, got {word:?}"),
            ));
        }
        Some(TimeShareValue::Fraction(beta)) => OmaTimeShare::Fixed(beta),
    };

    let (axis, values) = match raw.sweep {
        Some(sweep) => {
            let axis = SweepAxis::parse(&sweep.axis).ok_or_else(|| {
                invalid(
                    "sweep.axis",
                    format!(
                        "expected one of transmit_snr, lm_count, alpha, clusters; got {:?}",
                        sweep.axis
                    ),
                )
            })?;
            (axis, sweep.values)
        }
        // a single point at the configured SNR
        None => (SweepAxis::TransmitSnr, vec![snr_db]),
    };

    let output_raw = raw.output.unwrap_or_default();
    let format = match output_raw.format {
        None => OutputFormat::Csv,
        Some(name) => OutputFormat::parse(&name).ok_or_else(|| {
            invalid(
                "output.format",
                format!("expected csv or json, got {name:?}"),
            )
        })?,
    };
    let output = OutputOptions {
        path: PathBuf::from(output_raw.path.unwrap_or_else(|| "results.csv".to_string())),
        format,
        baseline: output_raw.baseline.unwrap_or(false),
        measure_time: run.measure_time.unwrap_or(false),
    };

    scenario.validate()?;
    Ok(ExperimentSpec {
        scenario,
        axis,
        values,
        output,
        workers: run.workers,
    })
}
