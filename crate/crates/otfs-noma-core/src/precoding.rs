//! Per-cluster beamforming and the NOMA power split.
//!
//! Each cluster gets a conjugate (matched-filter) beam steered at the
//! strongest path of its high-mobility user, normalized to unit norm so all
//! power bookkeeping lives in the SNR terms. The transmit SNR budget is
//! divided equally across clusters (a configurable split), and inside each
//! cluster a fraction `α` goes to the high-mobility user with the remainder
//! shared equally by the low-mobility users.

use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{ChannelError, PathSet, UpaGeometry};
use crate::fmath;

#[derive(Debug, Error, PartialEq)]
pub enum PrecodingError {
    #[error("at least one cluster is required")]
    NoClusters,
    #[error("precoder columns must share the antenna count")]
    RaggedColumns,
    #[error("high-mobility power fraction must lie strictly inside (0, 1), got {fraction}")]
    InvalidFraction { fraction: f64 },
    #[error("total transmit SNR must be positive, got {total}")]
    NonPositiveTotal { total: f64 },
    #[error("cluster split needs {clusters} nonnegative weights with a positive sum")]
    InvalidSplit { clusters: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Per-cluster beamforming coefficients `p_{a,q}`, one unit-norm column of
/// length `A` per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    antenna_count: usize,
    columns: Vec<Vec<Complex64>>,
}

impl Precoder {
    pub fn from_columns(columns: Vec<Vec<Complex64>>) -> Result<Self, PrecodingError> {
        let antenna_count = columns.first().map(Vec::len).ok_or(PrecodingError::NoClusters)?;
        if antenna_count == 0 || columns.iter().any(|c| c.len() != antenna_count) {
            return Err(PrecodingError::RaggedColumns);
        }
        Ok(Self {
            antenna_count,
            columns,
        })
    }

    /// Conjugate beam toward the strongest-gain path of each cluster's
    /// high-mobility user: `p_{a,q} = v_a(θ*, φ*)* / √A`.
    pub fn conjugate_beam(
        geom: &UpaGeometry,
        hm_paths: &[PathSet],
    ) -> Result<Self, PrecodingError> {
        if hm_paths.is_empty() {
            return Err(PrecodingError::NoClusters);
        }
        let a = geom.antenna_count();
        let norm = 1.0 / fmath::sqrt(a as f64);
        let mut columns = Vec::with_capacity(hm_paths.len());
        for paths in hm_paths {
            let star = paths.strongest_path();
            let elevation = paths.elevations()[star];
            let azimuth = paths.azimuths()[star];
            let mut column = Vec::with_capacity(a);
            for antenna in 0..a {
                let v = geom.steering(antenna, elevation, azimuth)?;
                column.push(v.conj() * norm);
            }
            columns.push(column);
        }
        Ok(Self {
            antenna_count: a,
            columns,
        })
    }

    pub fn antenna_count(&self) -> usize {
        self.antenna_count
    }

    pub fn clusters(&self) -> usize {
        self.columns.len()
    }

    /// Beam column for cluster `q` (0-based).
    pub fn column(&self, q: usize) -> &[Complex64] {
        &self.columns[q]
    }

    pub fn column_norm_sqr(&self, q: usize) -> f64 {
        self.columns[q].iter().map(|p| p.norm_sqr()).sum()
    }

    /// Beam-pattern power toward a probe direction.
    pub fn beam_power(
        &self,
        geom: &UpaGeometry,
        q: usize,
        elevation: f64,
        azimuth: f64,
    ) -> Result<f64, PrecodingError> {
        let mut acc = Complex64::ZERO;
        for (a, &w) in self.columns[q].iter().enumerate() {
            acc += w * geom.steering(a, elevation, azimuth)?;
        }
        Ok(acc.norm_sqr())
    }
}

/// The NOMA SNR split: total budget `ρ_T`, per-cluster shares `ρ_{c,q}`, the
/// high-mobility share `ρ_0 = α·ρ_{c,q}` and the equal low-mobility share
/// `ρ_u = (1−α)·ρ_{c,q}/U_q`. All values are linear SNRs with unit-variance
/// noise. A cluster with no low-mobility users hands its whole share to the
/// high-mobility user.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    total_snr: f64,
    hm_fraction: f64,
    cluster_snr: Vec<f64>,
    hm_snr: Vec<f64>,
    lm_snr_each: Vec<f64>,
    users_per_cluster: Vec<usize>,
}

impl PowerAllocation {
    pub fn total_snr(&self) -> f64 {
        self.total_snr
    }

    pub fn hm_fraction(&self) -> f64 {
        self.hm_fraction
    }

    pub fn clusters(&self) -> usize {
        self.cluster_snr.len()
    }

    pub fn cluster_snr(&self, q: usize) -> f64 {
        self.cluster_snr[q]
    }

    pub fn hm_snr(&self, q: usize) -> f64 {
        self.hm_snr[q]
    }

    pub fn lm_snr_each(&self, q: usize) -> f64 {
        self.lm_snr_each[q]
    }

    pub fn lm_users(&self, q: usize) -> usize {
        self.users_per_cluster[q]
    }

    /// Total SNR handed to the low-mobility users of cluster `q`.
    pub fn lm_snr_total(&self, q: usize) -> f64 {
        self.lm_snr_each[q] * self.users_per_cluster[q] as f64
    }
}

/// Equal-split allocation: `ρ_{c,q} = ρ_T / Q`.
pub fn allocate_power(
    total_snr: f64,
    users_per_cluster: &[usize],
    hm_fraction: f64,
) -> Result<PowerAllocation, PrecodingError> {
    let weights = alloc::vec![1.0; users_per_cluster.len()];
    allocate_power_with_split(total_snr, &weights, users_per_cluster, hm_fraction)
}

/// Allocation with explicit per-cluster weights, normalized so the cluster
/// shares sum to `ρ_T`.
pub fn allocate_power_with_split(
    total_snr: f64,
    split: &[f64],
    users_per_cluster: &[usize],
    hm_fraction: f64,
) -> Result<PowerAllocation, PrecodingError> {
    let q = users_per_cluster.len();
    if q == 0 {
        return Err(PrecodingError::NoClusters);
    }
    if !(total_snr > 0.0) {
        return Err(PrecodingError::NonPositiveTotal { total: total_snr });
    }
    if !(hm_fraction > 0.0 && hm_fraction < 1.0) {
        return Err(PrecodingError::InvalidFraction {
            fraction: hm_fraction,
        });
    }
    if split.len() != q || split.iter().any(|&w| !(w >= 0.0)) {
        return Err(PrecodingError::InvalidSplit { clusters: q });
    }
    let weight_sum: f64 = split.iter().sum();
    if !(weight_sum > 0.0) {
        return Err(PrecodingError::InvalidSplit { clusters: q });
    }

    let mut cluster_snr = Vec::with_capacity(q);
    let mut hm_snr = Vec::with_capacity(q);
    let mut lm_snr_each = Vec::with_capacity(q);
    for (c, &users) in users_per_cluster.iter().enumerate() {
        let share = total_snr * split[c] / weight_sum;
        cluster_snr.push(share);
        if users == 0 {
            hm_snr.push(share);
            lm_snr_each.push(0.0);
        } else {
            hm_snr.push(hm_fraction * share);
            lm_snr_each.push((1.0 - hm_fraction) * share / users as f64);
        }
    }
    Ok(PowerAllocation {
        total_snr,
        hm_fraction,
        cluster_snr,
        hm_snr,
        lm_snr_each,
        users_per_cluster: users_per_cluster.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_paths, Mobility, PathProfile, UniformLaw};
    use crate::grid::OtfsGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hm_profile() -> PathProfile {
        PathProfile {
            path_count: 4,
            max_delay_tap: 4,
            mobility: Mobility::High {
                max_speed: 200.0 / 3.6,
                carrier_frequency: 60e9,
            },
            elevation: UniformLaw::new(core::f64::consts::FRAC_PI_4, core::f64::consts::PI / 10.0),
            azimuth: UniformLaw::new(0.0, core::f64::consts::PI),
        }
    }

    fn draw_paths(seed: u64) -> PathSet {
        let grid = OtfsGrid::from_spacing(16, 16, 15e3).unwrap();
        sample_paths(&mut ChaCha8Rng::seed_from_u64(seed), grid, &hm_profile()).unwrap()
    }

    #[test]
    fn single_antenna_beam_is_unity() {
        let geom = UpaGeometry::half_wavelength(1, 5e-3).unwrap();
        let precoder = Precoder::conjugate_beam(&geom, &[draw_paths(1), draw_paths(2)]).unwrap();
        for q in 0..2 {
            assert_eq!(precoder.column(q).len(), 1);
            assert!((precoder.column(q)[0] - Complex64::ONE).norm() < 1e-15);
        }
    }

    #[test]
    fn beams_are_unit_norm() {
        let geom = UpaGeometry::half_wavelength(8, 5e-3).unwrap();
        let precoder =
            Precoder::conjugate_beam(&geom, &[draw_paths(3), draw_paths(4), draw_paths(5)])
                .unwrap();
        for q in 0..3 {
            assert!((precoder.column_norm_sqr(q) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beam_peaks_at_the_steered_direction() {
        let geom = UpaGeometry::half_wavelength(8, 5e-3).unwrap();
        let paths = draw_paths(6);
        let star = paths.strongest_path();
        let (elev, azim) = (paths.elevations()[star], paths.azimuths()[star]);
        let precoder = Precoder::conjugate_beam(&geom, core::slice::from_ref(&paths)).unwrap();

        let on_beam = precoder.beam_power(&geom, 0, elev, azim).unwrap();
        assert!((on_beam - 64.0).abs() < 1e-9, "array gain {on_beam}");

        // scan a dense angular grid; nothing may exceed the steered direction
        let mut best_off = 0.0_f64;
        for ei in 0..60 {
            for ai in 0..120 {
                let e = ei as f64 * core::f64::consts::PI / 60.0;
                let a = -core::f64::consts::PI + ai as f64 * core::f64::consts::PI / 60.0;
                let p = precoder.beam_power(&geom, 0, e, a).unwrap();
                assert!(p <= on_beam + 1e-9);
                let far = (e - elev).abs() > 0.3 && (a - azim).abs() > 0.3;
                if far {
                    best_off = best_off.max(p);
                }
            }
        }
        assert!(best_off < on_beam, "off-beam gain must stay below the peak");
    }

    #[test]
    fn paper_default_allocation_numbers() {
        // ρ_T = 1000, Q = 3, α = 3/4, U_1 = 4
        let power = allocate_power(1000.0, &[4, 4, 4], 0.75).unwrap();
        assert!((power.cluster_snr(0) - 1000.0 / 3.0).abs() < 1e-9);
        assert!((power.hm_snr(0) - 250.0).abs() < 1e-9);
        assert!((power.lm_snr_each(0) - 250.0 / 12.0).abs() < 1e-9);
    }

    #[test]
    fn split_identity_holds_per_cluster() {
        let power = allocate_power(123.4, &[3, 7, 1], 0.6).unwrap();
        for q in 0..3 {
            let total = power.hm_snr(q) + power.lm_snr_total(q);
            assert!((total - power.cluster_snr(q)).abs() < 1e-12 * power.cluster_snr(q));
        }
    }

    #[test]
    fn symmetric_two_user_split() {
        // α = 1/2 with a single LM user splits the cluster share evenly
        let power = allocate_power(2.0, &[1], 0.5).unwrap();
        assert_eq!(power.hm_snr(0), power.lm_snr_each(0));
        assert!((power.hm_snr(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_is_conserved_across_all_users() {
        let power = allocate_power(31.7, &[5, 2, 9, 1], 0.8).unwrap();
        let mut sum = 0.0;
        for q in 0..4 {
            sum += power.hm_snr(q) + power.lm_snr_total(q);
        }
        assert!((sum - 31.7).abs() < 1e-12 * 31.7);
    }

    #[test]
    fn empty_cluster_gets_everything_at_the_hm_user() {
        let power = allocate_power(10.0, &[0], 0.75).unwrap();
        assert_eq!(power.hm_snr(0), 10.0);
        assert_eq!(power.lm_snr_each(0), 0.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(
            allocate_power(10.0, &[1], 1.0),
            Err(PrecodingError::InvalidFraction { .. })
        ));
        assert!(matches!(
            allocate_power(10.0, &[1], 0.0),
            Err(PrecodingError::InvalidFraction { .. })
        ));
        assert!(matches!(
            allocate_power(-5.0, &[1], 0.5),
            Err(PrecodingError::NonPositiveTotal { .. })
        ));
        assert!(matches!(
            allocate_power(10.0, &[], 0.5),
            Err(PrecodingError::NoClusters)
        ));
        assert!(matches!(
            allocate_power_with_split(10.0, &[1.0, -1.0], &[1, 1], 0.5),
            Err(PrecodingError::InvalidSplit { .. })
        ));
    }

    #[test]
    fn custom_split_weights_are_normalized() {
        let power = allocate_power_with_split(100.0, &[3.0, 1.0], &[2, 2], 0.5).unwrap();
        assert!((power.cluster_snr(0) - 75.0).abs() < 1e-12);
        assert!((power.cluster_snr(1) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_linear(30.0) - 1000.0).abs() < 1e-9);
        assert!((db_to_linear(0.0) - 1.0).abs() < 1e-15);
        assert!((db_to_linear(-30.0) - 1e-3).abs() < 1e-12);
    }
}
