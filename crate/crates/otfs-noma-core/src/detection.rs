//! User detection: eigenvalue-domain zero-forcing of the high-mobility
//! signal, one-tap time-frequency detection of low-mobility users,
//! closed-form SINRs and the explicit-matrix oracle they are validated
//! against.
//!
//! The zero-forcing equalizer never materializes a matrix: with the
//! eigenvalues `η_{u,i} = Σ_a p_{a,1} λ_{a,u,i}` of the beam-combined
//! channel, the equalizer diagonal is `δ_{u,i} = η*_{u,i} / |η_{u,i}|²` and
//! the receiver applies `Ψᴴ diag(δ) Ψ`. Channels with an eigenvalue below
//! the singularity threshold are reported as errors so callers can record
//! the trial as an outage instead of silently regularizing.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{
    tf_gain_beamformed, ChannelEigenSystem, ChannelError, DdChannelMatrix, PathSet, UpaGeometry,
};
use crate::grid::{self, DdFrame, GridError, OtfsGrid, TfFrame};
use crate::linalg::{CMatrix, LinalgError};
use crate::precoding::{PowerAllocation, Precoder};

/// Default threshold below which an effective eigenvalue magnitude counts as
/// a singular channel.
pub const DEFAULT_SINGULAR_EPSILON: f64 = 1e-12;

/// Dense-oracle size guard.
pub const ORACLE_MAX_NM: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("{systems} eigen-systems do not match {weights} beam weights")]
    AntennaMismatch { systems: usize, weights: usize },
    #[error("eigen-systems must share one grid")]
    GridMismatch,
    #[error("at least one antenna is required")]
    EmptyAntennaSet,
    #[error("precoder has {precoder} clusters but the power allocation has {power}")]
    ClusterMismatch { precoder: usize, power: usize },
    #[error("singular channel: effective eigenvalue {index} is below the threshold")]
    SingularChannel { index: usize },
    #[error("singular subchannel {subchannel}: effective gain below the threshold")]
    SingularSubchannel { subchannel: usize },
    #[error("low-mobility user index {user} outside 1..={max}")]
    UserIndexOutOfRange { user: usize, max: usize },
    #[error("oracle guard exceeded: NM = {nm} > {max}")]
    OracleGuardExceeded { nm: usize, max: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Combine per-antenna eigen-systems with beam weights:
/// `η_i = Σ_a w_a λ_{a,i}`.
pub fn effective_eigenvalues(
    systems: &[ChannelEigenSystem],
    weights: &[Complex64],
) -> Result<Vec<Complex64>, DetectionError> {
    if systems.is_empty() {
        return Err(DetectionError::EmptyAntennaSet);
    }
    if systems.len() != weights.len() {
        return Err(DetectionError::AntennaMismatch {
            systems: systems.len(),
            weights: weights.len(),
        });
    }
    let grid = systems[0].grid();
    if systems.iter().any(|s| s.grid() != grid) {
        return Err(DetectionError::GridMismatch);
    }
    let mut out = vec![Complex64::ZERO; grid.nm()];
    for (system, &w) in systems.iter().zip(weights) {
        for (o, &v) in out.iter_mut().zip(system.eigenvalues()) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Eigenvalue-domain zero-forcing equalizer `G = Ψᴴ diag(δ) Ψ` with
/// `δ_i = η*_i / |η_i|² = 1/η_i`, keeping the effective channel eigenvalues
/// it was built from for interference reconstruction.
///
/// ```
/// use otfs_noma_core::detection::{build_zf, DEFAULT_SINGULAR_EPSILON};
/// use otfs_noma_core::grid::OtfsGrid;
/// use otfs_noma_core::Complex64;
///
/// let grid = OtfsGrid::from_spacing(2, 2, 15e3).unwrap();
/// let effective = vec![Complex64::new(0.0, 2.0); 4];
/// let zf = build_zf(grid, effective, DEFAULT_SINGULAR_EPSILON).unwrap();
/// // 1/(2j) = -0.5j on every eigenvalue
/// assert!((zf.delta()[0] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ZfEqualizer {
    grid: OtfsGrid,
    delta: Vec<Complex64>,
    effective: Vec<Complex64>,
}

/// Build the equalizer, rejecting channels with any `|η_i|` below `epsilon`.
pub fn build_zf(
    grid: OtfsGrid,
    effective: Vec<Complex64>,
    epsilon: f64,
) -> Result<ZfEqualizer, DetectionError> {
    if effective.len() != grid.nm() {
        return Err(GridError::LengthMismatch {
            expected: grid.nm(),
            actual: effective.len(),
        }
        .into());
    }
    let eps_sqr = epsilon * epsilon;
    let mut delta = Vec::with_capacity(effective.len());
    for (index, eta) in effective.iter().enumerate() {
        let mag = eta.norm_sqr();
        if mag < eps_sqr {
            return Err(DetectionError::SingularChannel { index });
        }
        delta.push(eta.conj() / mag);
    }
    Ok(ZfEqualizer {
        grid,
        delta,
        effective,
    })
}

impl ZfEqualizer {
    pub fn grid(&self) -> OtfsGrid {
        self.grid
    }

    pub fn delta(&self) -> &[Complex64] {
        &self.delta
    }

    pub fn effective_eigenvalues(&self) -> &[Complex64] {
        &self.effective
    }

    /// Apply `Ψᴴ diag(δ) Ψ` to a received delay-Doppler vector, matrix-free.
    pub fn equalize_hm(&self, received: &[Complex64]) -> Result<Vec<Complex64>, DetectionError> {
        Ok(grid::apply_in_eigenbasis(self.grid, &self.delta, received)?)
    }

    /// Reconstruct the high-mobility contribution through this user's
    /// effective channel, subtract it from the received vector and return
    /// the residual on the time-frequency grid.
    pub fn detect_and_cancel(
        &self,
        received: &[Complex64],
        hm_estimate: &DdFrame,
    ) -> Result<TfFrame, DetectionError> {
        if hm_estimate.grid() != self.grid {
            return Err(DetectionError::GridMismatch);
        }
        if received.len() != self.grid.nm() {
            return Err(GridError::LengthMismatch {
                expected: self.grid.nm(),
                actual: received.len(),
            }
            .into());
        }
        let contribution =
            grid::apply_in_eigenbasis(self.grid, &self.effective, hm_estimate.data())?;
        let residual: Vec<Complex64> = received
            .iter()
            .zip(&contribution)
            .map(|(y, h)| y - h)
            .collect();
        let residual_dd = grid::devectorize(self.grid, &residual)?;
        Ok(grid::isfft(&residual_dd))
    }
}

/// Named pieces of the high-mobility SINR denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrComponents {
    /// Serving-cluster high-mobility SNR `ρ_0`.
    pub signal: f64,
    /// Total low-mobility SNR of the serving cluster, `Σ_u ρ_u`.
    pub intra_cluster: f64,
    /// `Σ_{q≠serving} ρ_{c,q} ω_q`.
    pub inter_cluster: f64,
    /// Noise enhancement `η_u = (1/NM) Σ_i 1/|η_{u,i}|²`.
    pub noise_enhancement: f64,
    /// Per-cluster interference ratios `ω_q`; the serving entry is zero.
    pub omegas: Vec<f64>,
}

impl SinrComponents {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.intra_cluster + self.inter_cluster + self.noise_enhancement)
    }
}

/// Closed-form SINR of the high-mobility signal at one user.
#[derive(Debug, Clone, PartialEq)]
pub struct HmSinr {
    pub sinr: f64,
    pub components: SinrComponents,
}

/// Closed-form high-mobility SINR from per-antenna eigen-systems, serving
/// cluster first in the precoder (the reporting convention used throughout).
pub fn hm_sinr_closed_form(
    systems: &[ChannelEigenSystem],
    precoder: &Precoder,
    power: &PowerAllocation,
    epsilon: f64,
) -> Result<HmSinr, DetectionError> {
    if precoder.clusters() != power.clusters() {
        return Err(DetectionError::ClusterMismatch {
            precoder: precoder.clusters(),
            power: power.clusters(),
        });
    }
    let effective: Vec<Vec<Complex64>> = (0..precoder.clusters())
        .map(|q| effective_eigenvalues(systems, precoder.column(q)))
        .collect::<Result<_, _>>()?;
    hm_sinr_from_effective(&effective, 0, power, epsilon)
}

/// Same computation from already beam-combined eigenvalues, one vector per
/// cluster beam; `serving` selects which cluster the user belongs to.
pub fn hm_sinr_from_effective(
    effective: &[Vec<Complex64>],
    serving: usize,
    power: &PowerAllocation,
    epsilon: f64,
) -> Result<HmSinr, DetectionError> {
    let clusters = effective.len();
    if clusters != power.clusters() {
        return Err(DetectionError::ClusterMismatch {
            precoder: clusters,
            power: power.clusters(),
        });
    }
    assert!(serving < clusters, "serving cluster out of range");
    let nm = effective[serving].len();
    if effective.iter().any(|e| e.len() != nm) {
        return Err(DetectionError::GridMismatch);
    }

    let eps_sqr = epsilon * epsilon;
    let mut eta = 0.0;
    let mut omegas = vec![0.0; clusters];
    for i in 0..nm {
        let denom = effective[serving][i].norm_sqr();
        if denom < eps_sqr {
            return Err(DetectionError::SingularChannel { index: i });
        }
        eta += 1.0 / denom;
        for (q, omega) in omegas.iter_mut().enumerate() {
            if q != serving {
                *omega += effective[q][i].norm_sqr() / denom;
            }
        }
    }
    let scale = 1.0 / nm as f64;
    eta *= scale;
    for omega in &mut omegas {
        *omega *= scale;
    }

    let inter_cluster = omegas
        .iter()
        .enumerate()
        .filter(|(q, _)| *q != serving)
        .map(|(q, omega)| power.cluster_snr(q) * omega)
        .sum();
    let components = SinrComponents {
        signal: power.hm_snr(serving),
        intra_cluster: power.lm_snr_total(serving),
        inter_cluster,
        noise_enhancement: eta,
        omegas,
    };
    Ok(HmSinr {
        sinr: components.sinr(),
        components,
    })
}

/// Closed-form SINR of one low-mobility user's own signal.
#[derive(Debug, Clone, PartialEq)]
pub struct LmSinr {
    pub sinr: f64,
    pub signal_power: f64,
    pub interference_power: f64,
    /// Unit by normalization.
    pub noise_power: f64,
    /// Beam-combined serving gain `H_u[u−1]`.
    pub effective_gain: Complex64,
}

/// One-tap SINR of low-mobility user `u ≥ 1` of cluster 1 on its subchannel
/// `m = u − 1`, assuming the high-mobility signal has been cancelled:
/// `γ_u = ρ_u |H_u[m]|² / (Σ_{q≠1} ρ_{c,q} |Σ_a p_{a,q} H_{a,u}[m]|² + 1)`.
pub fn lm_sinr(
    otfs: OtfsGrid,
    paths: &PathSet,
    geom: &UpaGeometry,
    precoder: &Precoder,
    power: &PowerAllocation,
    user_index: usize,
    epsilon: f64,
) -> Result<LmSinr, DetectionError> {
    lm_sinr_at_cluster(otfs, paths, geom, precoder, power, 0, user_index, epsilon)
}

/// [`lm_sinr`] generalized to an arbitrary serving cluster.
#[allow(clippy::too_many_arguments)]
pub fn lm_sinr_at_cluster(
    otfs: OtfsGrid,
    paths: &PathSet,
    geom: &UpaGeometry,
    precoder: &Precoder,
    power: &PowerAllocation,
    serving: usize,
    user_index: usize,
    epsilon: f64,
) -> Result<LmSinr, DetectionError> {
    if precoder.clusters() != power.clusters() {
        return Err(DetectionError::ClusterMismatch {
            precoder: precoder.clusters(),
            power: power.clusters(),
        });
    }
    let max_users = power.lm_users(serving);
    if user_index == 0 || user_index > max_users {
        return Err(DetectionError::UserIndexOutOfRange {
            user: user_index,
            max: max_users,
        });
    }
    let subchannel = user_index - 1;
    let gains: Vec<Complex64> = (0..precoder.clusters())
        .map(|q| tf_gain_beamformed(otfs, paths, geom, precoder.column(q), subchannel))
        .collect::<Result<_, _>>()?;
    lm_sinr_from_gains(&gains, serving, power, subchannel, epsilon)
}

/// Assemble the one-tap SINR from already beam-combined subchannel gains,
/// one per cluster beam.
pub fn lm_sinr_from_gains(
    gains: &[Complex64],
    serving: usize,
    power: &PowerAllocation,
    subchannel: usize,
    epsilon: f64,
) -> Result<LmSinr, DetectionError> {
    if gains.len() != power.clusters() {
        return Err(DetectionError::ClusterMismatch {
            precoder: gains.len(),
            power: power.clusters(),
        });
    }
    let serving_gain = gains[serving];
    if serving_gain.norm_sqr() < epsilon * epsilon {
        return Err(DetectionError::SingularSubchannel { subchannel });
    }
    let mut interference = 0.0;
    for (q, gain) in gains.iter().enumerate() {
        if q != serving {
            interference += power.cluster_snr(q) * gain.norm_sqr();
        }
    }
    let signal = power.lm_snr_each(serving) * serving_gain.norm_sqr();
    Ok(LmSinr {
        sinr: signal / (interference + 1.0),
        signal_power: signal,
        interference_power: interference,
        noise_power: 1.0,
        effective_gain: serving_gain,
    })
}

/// Explicit-matrix oracle for the high-mobility SINR: builds the dense
/// beam-combined channel, its pseudo-inverse equalizer and the inter-cluster
/// leakage matrices, then evaluates the per-symbol SINR for every diagonal
/// index. Per-antenna channels of the observing user go in `channels`.
pub fn hm_interference_oracle(
    channels: &[DdChannelMatrix],
    precoder: &Precoder,
    power: &PowerAllocation,
) -> Result<Vec<f64>, DetectionError> {
    if channels.is_empty() {
        return Err(DetectionError::EmptyAntennaSet);
    }
    if channels.len() != precoder.antenna_count() {
        return Err(DetectionError::AntennaMismatch {
            systems: channels.len(),
            weights: precoder.antenna_count(),
        });
    }
    if precoder.clusters() != power.clusters() {
        return Err(DetectionError::ClusterMismatch {
            precoder: precoder.clusters(),
            power: power.clusters(),
        });
    }
    let otfs = channels[0].grid();
    if channels.iter().any(|c| c.grid() != otfs) {
        return Err(DetectionError::GridMismatch);
    }
    let nm = otfs.nm();
    if nm > ORACLE_MAX_NM {
        return Err(DetectionError::OracleGuardExceeded {
            nm,
            max: ORACLE_MAX_NM,
        });
    }

    // Beam-combined dense channels, one per cluster beam.
    let combine = |q: usize| -> CMatrix {
        CMatrix::from_fn(nm, nm, |r, c| {
            let mut acc = Complex64::ZERO;
            for (a, ch) in channels.iter().enumerate() {
                acc += precoder.column(q)[a] * ch.matrix().get(r, c);
            }
            acc
        })
    };
    let serving = combine(0);
    let gram = serving.adjoint().mul(&serving)?;
    let gram_inv = gram.inverse().map_err(|e| match e {
        LinalgError::Singular { pivot } => DetectionError::SingularChannel { index: pivot },
        other => DetectionError::Linalg(other),
    })?;
    let equalizer = gram_inv.mul(&serving.adjoint())?;

    let intra = power.lm_snr_total(0);
    let signal = power.hm_snr(0);
    let mut denominators = vec![intra; nm];
    for q in 1..precoder.clusters() {
        let leakage = equalizer.mul(&combine(q))?;
        for k in 0..nm {
            let row_power: f64 = leakage.row(k).iter().map(|v| v.norm_sqr()).sum();
            denominators[k] += power.cluster_snr(q) * row_power;
        }
    }
    Ok((0..nm)
        .map(|k| signal / (denominators[k] + gram_inv.get(k, k).re))
        .collect())
}
