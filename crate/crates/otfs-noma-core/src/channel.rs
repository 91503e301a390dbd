//! Random multipath delay-Doppler channels per user and antenna.
//!
//! A user-to-antenna link is a sparse sum of paths, each with a complex
//! gain, integer delay/Doppler taps and a departure direction seen by the
//! uniform planar array. The induced `NM × NM` channel matrix is
//! block-circulant with circulant blocks, so its eigenvalues come from
//! per-block DFTs instead of a dense eigensolver; the same eigenvalues are
//! also available straight from the path list without materializing the
//! matrix, which is what the Monte Carlo engine uses.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::fmath;
use crate::grid::{self, GridError, OtfsGrid};
use crate::linalg::CMatrix;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const TAU: f64 = core::f64::consts::TAU;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("array side, element spacing and wavelength must be positive")]
    InvalidGeometry,
    #[error("element index ({i}, {i_prime}) outside the {side}x{side} array")]
    ElementOutOfRange { i: usize, i_prime: usize, side: usize },
    #[error("antenna index {antenna} outside the array of {count} elements")]
    AntennaOutOfRange { antenna: usize, count: usize },
    #[error("path vectors must share one positive length")]
    MismatchedPathVectors,
    #[error("path count must be positive")]
    NonPositivePathCount,
    #[error("maximum delay tap {max_delay_tap} must be below the delay-bin count {n_delay}")]
    DelaySpanExceedsGrid { max_delay_tap: usize, n_delay: usize },
    #[error("{paths} paths need {required} distinct nonzero delay taps but only {available} exist")]
    TooFewDelayTaps {
        paths: usize,
        required: usize,
        available: usize,
    },
    #[error("maximum speed must be nonnegative")]
    NegativeSpeed,
    #[error("carrier frequency must be positive")]
    NonPositiveCarrier,
    #[error("angle variance must be nonnegative")]
    NegativeVariance,
    #[error("maximum Doppler tap {max_tap} would wrap the {n_doppler}-bin Doppler axis")]
    DopplerExceedsGrid { max_tap: i64, n_doppler: usize },
    #[error("path tap (delay {delay_tap}, Doppler {doppler_tap}) outside the grid")]
    TapOutOfBounds { delay_tap: usize, doppler_tap: i64 },
    #[error("matrix is not block-circulant with circulant blocks")]
    NotBlockCirculant,
    #[error("time-frequency gain requires zero Doppler on every path, found tap {doppler_tap}")]
    NonZeroDoppler { doppler_tap: i64 },
    #[error("subchannel {subchannel} outside the {n_delay} available subchannels")]
    SubchannelOutOfRange { subchannel: usize, n_delay: usize },
    #[error("beam weight count {weights} does not match the {antennas}-element array")]
    WeightCountMismatch { weights: usize, antennas: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `W × W` square uniform planar array on the (x, z) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry {
    side: usize,
    element_spacing: f64,
    wavelength: f64,
}

impl UpaGeometry {
    pub fn new(side: usize, element_spacing: f64, wavelength: f64) -> Result<Self, ChannelError> {
        if side == 0 || !(element_spacing > 0.0) || !(wavelength > 0.0) {
            return Err(ChannelError::InvalidGeometry);
        }
        Ok(Self {
            side,
            element_spacing,
            wavelength,
        })
    }

    /// Half-wavelength spacing for a given array side.
    pub fn half_wavelength(side: usize, wavelength: f64) -> Result<Self, ChannelError> {
        Self::new(side, 0.5 * wavelength, wavelength)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `A = W²`.
    pub fn antenna_count(&self) -> usize {
        self.side * self.side
    }

    pub fn element_spacing(&self) -> f64 {
        self.element_spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.element_spacing / self.wavelength
    }

    /// Phase response of element `(i, i')`:
    /// `exp(j2π (d/λ)(i sinθ cosφ + i' cosθ))`. Unit modulus.
    pub fn steering_element(
        &self,
        i: usize,
        i_prime: usize,
        elevation: f64,
        azimuth: f64,
    ) -> Result<Complex64, ChannelError> {
        if i >= self.side || i_prime >= self.side {
            return Err(ChannelError::ElementOutOfRange {
                i,
                i_prime,
                side: self.side,
            });
        }
        let direction = i as f64 * fmath::sin(elevation) * fmath::cos(azimuth)
            + i_prime as f64 * fmath::cos(elevation);
        Ok(fmath::expi(TAU * self.spacing_ratio() * direction))
    }

    /// Steering response under the flat antenna index `a = i + W·i'`.
    pub fn steering(
        &self,
        antenna: usize,
        elevation: f64,
        azimuth: f64,
    ) -> Result<Complex64, ChannelError> {
        if antenna >= self.antenna_count() {
            return Err(ChannelError::AntennaOutOfRange {
                antenna,
                count: self.antenna_count(),
            });
        }
        self.steering_element(antenna % self.side, antenna / self.side, elevation, azimuth)
    }
}

/// Uniform distribution given by its mean and variance, realized as the
/// interval `[mean − √(3·var), mean + √(3·var)]` (the unique uniform law
/// with those two moments).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformLaw {
    pub mean: f64,
    pub variance: f64,
}

impl UniformLaw {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    pub fn with_mean(&self, mean: f64) -> Self {
        Self {
            mean,
            variance: self.variance,
        }
    }

    pub fn half_width(&self) -> f64 {
        fmath::sqrt(3.0 * self.variance)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let h = self.half_width();
        if h == 0.0 {
            self.mean
        } else {
            rng.random_range(self.mean - h..self.mean + h)
        }
    }
}

/// Mobility class of a user: high-mobility links carry Jakes-model Doppler
/// taps, low-mobility links have all Doppler taps pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mobility {
    High {
        /// Maximum speed in m/s.
        max_speed: f64,
        /// Carrier frequency in Hz.
        carrier_frequency: f64,
    },
    Low,
}

/// Statistics from which a user's [`PathSet`] is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProfile {
    pub path_count: usize,
    pub max_delay_tap: usize,
    pub mobility: Mobility,
    pub elevation: UniformLaw,
    pub azimuth: UniformLaw,
}

/// One user-to-array link: `P` paths with complex gains, integer delay and
/// Doppler taps and per-path departure angles. Taps and angles are shared by
/// every antenna element; only the steering phase differs across the array.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    gains: Vec<Complex64>,
    delay_taps: Vec<usize>,
    doppler_taps: Vec<i64>,
    elevations: Vec<f64>,
    azimuths: Vec<f64>,
}

impl PathSet {
    pub fn new(
        gains: Vec<Complex64>,
        delay_taps: Vec<usize>,
        doppler_taps: Vec<i64>,
        elevations: Vec<f64>,
        azimuths: Vec<f64>,
    ) -> Result<Self, ChannelError> {
        let p = gains.len();
        if p == 0 {
            return Err(ChannelError::NonPositivePathCount);
        }
        if delay_taps.len() != p
            || doppler_taps.len() != p
            || elevations.len() != p
            || azimuths.len() != p
        {
            return Err(ChannelError::MismatchedPathVectors);
        }
        Ok(Self {
            gains,
            delay_taps,
            doppler_taps,
            elevations,
            azimuths,
        })
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn delay_taps(&self) -> &[usize] {
        &self.delay_taps
    }

    pub fn doppler_taps(&self) -> &[i64] {
        &self.doppler_taps
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    /// True when every Doppler tap is zero (low-mobility link).
    pub fn is_zero_doppler(&self) -> bool {
        self.doppler_taps.iter().all(|&k| k == 0)
    }

    /// Index of the strongest-gain path.
    pub fn strongest_path(&self) -> usize {
        let mut best = 0;
        let mut best_mag = self.gains[0].norm_sqr();
        for (p, g) in self.gains.iter().enumerate().skip(1) {
            let mag = g.norm_sqr();
            if mag > best_mag {
                best = p;
                best_mag = mag;
            }
        }
        best
    }

    pub fn total_gain_power(&self) -> f64 {
        self.gains.iter().map(|g| g.norm_sqr()).sum()
    }

    fn validate_against_grid(&self, grid: OtfsGrid) -> Result<(), ChannelError> {
        let n = grid.n_doppler() as i64;
        for p in 0..self.len() {
            if self.delay_taps[p] >= grid.n_delay() || self.doppler_taps[p].abs() >= n {
                return Err(ChannelError::TapOutOfBounds {
                    delay_tap: self.delay_taps[p],
                    doppler_tap: self.doppler_taps[p],
                });
            }
        }
        Ok(())
    }

    /// Per-path gain seen by one antenna: `h_p · e^{−j2π τ_p ν_p} · v_a(θ_p, φ_p)`
    /// with `τ_p ν_p = k_p l_p / (NM)`.
    fn antenna_gain(
        &self,
        grid: OtfsGrid,
        geom: &UpaGeometry,
        antenna: usize,
        path: usize,
    ) -> Result<Complex64, ChannelError> {
        let steer = geom.steering(antenna, self.elevations[path], self.azimuths[path])?;
        Ok(self.gains[path] * self.delay_doppler_phase(grid, path) * steer)
    }

    fn delay_doppler_phase(&self, grid: OtfsGrid, path: usize) -> Complex64 {
        let cross = (self.doppler_taps[path] * self.delay_taps[path] as i64) as f64;
        fmath::expi(-TAU * cross / grid.nm() as f64)
    }

    /// Steering responses of every (path, antenna) pair, laid out
    /// `[p·A + a]`. Computing these once lets several beams share the
    /// trigonometry.
    pub fn steering_responses(&self, geom: &UpaGeometry) -> Result<Vec<Complex64>, ChannelError> {
        let a_count = geom.antenna_count();
        let mut out = Vec::with_capacity(self.len() * a_count);
        for p in 0..self.len() {
            for a in 0..a_count {
                out.push(geom.steering(a, self.elevations[p], self.azimuths[p])?);
            }
        }
        Ok(out)
    }

    /// Beam response `Σ_a w_a v_a(θ_p, φ_p)` per path from precomputed
    /// steering responses.
    pub fn beam_responses_from_steering(
        &self,
        steering: &[Complex64],
        weights: &[Complex64],
    ) -> Result<Vec<Complex64>, ChannelError> {
        let a_count = weights.len();
        if steering.len() != self.len() * a_count {
            return Err(ChannelError::WeightCountMismatch {
                weights: a_count,
                antennas: steering.len() / self.len().max(1),
            });
        }
        Ok((0..self.len())
            .map(|p| {
                let row = &steering[p * a_count..(p + 1) * a_count];
                let mut acc = Complex64::ZERO;
                for (&v, &w) in row.iter().zip(weights) {
                    acc += w * v;
                }
                acc
            })
            .collect())
    }

    /// Beam response `Σ_a w_a v_a(θ_p, φ_p)` for every path.
    fn beam_responses(
        &self,
        geom: &UpaGeometry,
        weights: &[Complex64],
    ) -> Result<Vec<Complex64>, ChannelError> {
        if weights.len() != geom.antenna_count() {
            return Err(ChannelError::WeightCountMismatch {
                weights: weights.len(),
                antennas: geom.antenna_count(),
            });
        }
        let steering = self.steering_responses(geom)?;
        self.beam_responses_from_steering(&steering, weights)
    }
}

/// Draw a [`PathSet`] from the given statistics.
///
/// Gains are i.i.d. `CN(0, 1/P)` (uniform scattering). The first delay tap
/// sits at zero and the remaining taps are drawn uniformly without
/// replacement from `{1..l_max}`. High-mobility Doppler follows Jakes'
/// model, `ν_p = ν_max cos(ψ_p)` with `ψ_p ~ U[0, 2π)` and
/// `ν_max = f_c·v_max/c`, quantized to the nearest integer tap
/// `k_p = round(ν_p·NT)` with exact halves rounded toward zero. Angles come
/// from the profile's uniform laws. Draw order is fixed (gains, delays,
/// Doppler, elevations, azimuths), so a seeded source reproduces bit-equal
/// path sets.
pub fn sample_paths<R: Rng + ?Sized>(
    rng: &mut R,
    grid: OtfsGrid,
    profile: &PathProfile,
) -> Result<PathSet, ChannelError> {
    let max_doppler = validate_profile(grid, profile)?;
    let p = profile.path_count;
    let sigma = fmath::sqrt(1.0 / (2.0 * p as f64));
    let gains: Vec<Complex64> = (0..p)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect();

    let mut delay_taps = Vec::with_capacity(p);
    delay_taps.push(0);
    let mut pool: Vec<usize> = (1..=profile.max_delay_tap).collect();
    for _ in 1..p {
        let idx = rng.random_range(0..pool.len());
        delay_taps.push(pool.swap_remove(idx));
    }

    let doppler_taps: Vec<i64> = match profile.mobility {
        Mobility::High { .. } => (0..p)
            .map(|_| {
                let psi = rng.random_range(0.0..TAU);
                let doppler = max_doppler * fmath::cos(psi);
                fmath::round_ties_to_zero(doppler * grid.frame_duration()) as i64
            })
            .collect(),
        Mobility::Low => vec![0; p],
    };

    let elevations: Vec<f64> = (0..p).map(|_| profile.elevation.sample(rng)).collect();
    let azimuths: Vec<f64> = (0..p).map(|_| profile.azimuth.sample(rng)).collect();

    PathSet::new(gains, delay_taps, doppler_taps, elevations, azimuths)
}

/// Check the statistics a [`PathProfile`] will be sampled with; returns the
/// maximum Doppler shift in Hz.
pub fn validate_profile(grid: OtfsGrid, profile: &PathProfile) -> Result<f64, ChannelError> {
    let p = profile.path_count;
    if p == 0 {
        return Err(ChannelError::NonPositivePathCount);
    }
    if profile.max_delay_tap >= grid.n_delay() {
        return Err(ChannelError::DelaySpanExceedsGrid {
            max_delay_tap: profile.max_delay_tap,
            n_delay: grid.n_delay(),
        });
    }
    if p - 1 > profile.max_delay_tap {
        return Err(ChannelError::TooFewDelayTaps {
            paths: p,
            required: p - 1,
            available: profile.max_delay_tap,
        });
    }
    if profile.elevation.variance < 0.0 || profile.azimuth.variance < 0.0 {
        return Err(ChannelError::NegativeVariance);
    }
    match profile.mobility {
        Mobility::High {
            max_speed,
            carrier_frequency,
        } => {
            if max_speed < 0.0 {
                return Err(ChannelError::NegativeSpeed);
            }
            if !(carrier_frequency > 0.0) {
                return Err(ChannelError::NonPositiveCarrier);
            }
            let max_doppler = carrier_frequency * max_speed / SPEED_OF_LIGHT;
            let max_tap = fmath::round_ties_to_zero(max_doppler * grid.frame_duration()) as i64;
            if max_tap.abs() >= grid.n_doppler() as i64 {
                return Err(ChannelError::DopplerExceedsGrid {
                    max_tap,
                    n_doppler: grid.n_doppler(),
                });
            }
            Ok(max_doppler)
        }
        Mobility::Low => Ok(0.0),
    }
}

/// Dense `NM × NM` delay-Doppler channel matrix for one (user, antenna) link.
///
/// Block-circulant with circulant blocks: under the Doppler-first
/// vectorization the `M × M` block at (r, c) depends only on `(r − c) mod M`
/// and every `N × N` block is circulant. Holds exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DdChannelMatrix {
    grid: OtfsGrid,
    matrix: CMatrix,
}

impl DdChannelMatrix {
    /// Wrap an externally assembled matrix; the block-circulant invariant is
    /// checked when eigenvalues are requested.
    pub fn from_parts(grid: OtfsGrid, matrix: CMatrix) -> Result<Self, ChannelError> {
        if matrix.rows() != grid.nm() || matrix.cols() != grid.nm() {
            return Err(GridError::LengthMismatch {
                expected: grid.nm(),
                actual: matrix.rows(),
            }
            .into());
        }
        Ok(Self { grid, matrix })
    }

    pub fn grid(&self) -> OtfsGrid {
        self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Exact structural check of the block-circulant invariant.
    pub fn is_block_circulant(&self) -> bool {
        let n = self.grid.n_doppler();
        let nm = self.grid.nm();
        for r in 0..nm {
            for c in 0..nm {
                let v = self.matrix.get(r, c);
                // shifting one block down and right must reproduce the entry
                if v != self.matrix.get((r + n) % nm, (c + n) % nm) {
                    return false;
                }
                // within-block circulant shift
                let (br, ir) = (r / n, r % n);
                let (bc, ic) = (c / n, c % n);
                if v != self.matrix.get(br * n + (ir + 1) % n, bc * n + (ic + 1) % n) {
                    return false;
                }
            }
        }
        true
    }
}

/// Build the dense channel matrix of one link: each path contributes its
/// antenna gain on the cyclic shift `[k − k_p]_N, [l − l_p]_M`.
pub fn build_channel_matrix(
    grid: OtfsGrid,
    paths: &PathSet,
    geom: &UpaGeometry,
    antenna: usize,
) -> Result<DdChannelMatrix, ChannelError> {
    paths.validate_against_grid(grid)?;
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let mut matrix = CMatrix::zeros(grid.nm(), grid.nm());
    for p in 0..paths.len() {
        let gain = paths.antenna_gain(grid, geom, antenna, p)?;
        let kp = paths.doppler_taps[p];
        let lp = paths.delay_taps[p];
        for l in 0..m {
            let src_l = (l as i64 - lp as i64).rem_euclid(m as i64) as usize;
            for k in 0..n {
                let src_k = (k as i64 - kp).rem_euclid(n as i64) as usize;
                matrix.add_assign_at(k + n * l, src_k + n * src_l, gain);
            }
        }
    }
    Ok(DdChannelMatrix { grid, matrix })
}

/// Direct evaluation of the path input-output relation on a vectorized frame,
/// independent of both the matrix and the eigenvalue routes.
pub fn apply_paths(
    grid: OtfsGrid,
    paths: &PathSet,
    geom: &UpaGeometry,
    antenna: usize,
    input: &[Complex64],
) -> Result<Vec<Complex64>, ChannelError> {
    paths.validate_against_grid(grid)?;
    if input.len() != grid.nm() {
        return Err(GridError::LengthMismatch {
            expected: grid.nm(),
            actual: input.len(),
        }
        .into());
    }
    let gains: Vec<Complex64> = (0..paths.len())
        .map(|p| paths.antenna_gain(grid, geom, antenna, p))
        .collect::<Result<_, _>>()?;
    Ok(shift_accumulate(grid, paths, &gains, input))
}

/// Beam-weighted variant: evaluates `Σ_a w_a H_a x` using the fact that only
/// the steering phase depends on the antenna.
pub fn apply_paths_beamformed(
    grid: OtfsGrid,
    paths: &PathSet,
    geom: &UpaGeometry,
    weights: &[Complex64],
    input: &[Complex64],
) -> Result<Vec<Complex64>, ChannelError> {
    paths.validate_against_grid(grid)?;
    if input.len() != grid.nm() {
        return Err(GridError::LengthMismatch {
            expected: grid.nm(),
            actual: input.len(),
        }
        .into());
    }
    let beams = paths.beam_responses(geom, weights)?;
    let gains: Vec<Complex64> = (0..paths.len())
        .map(|p| paths.gains[p] * paths.delay_doppler_phase(grid, p) * beams[p])
        .collect();
    Ok(shift_accumulate(grid, paths, &gains, input))
}

fn shift_accumulate(
    grid: OtfsGrid,
    paths: &PathSet,
    gains: &[Complex64],
    input: &[Complex64],
) -> Vec<Complex64> {
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let mut out = vec![Complex64::ZERO; grid.nm()];
    for (p, &gain) in gains.iter().enumerate() {
        let kp = paths.doppler_taps[p];
        let lp = paths.delay_taps[p];
        for l in 0..m {
            let src_l = (l as i64 - lp as i64).rem_euclid(m as i64) as usize;
            for k in 0..n {
                let src_k = (k as i64 - kp).rem_euclid(n as i64) as usize;
                out[k + n * l] += gain * input[src_k + n * src_l];
            }
        }
    }
    out
}

/// The `NM` eigenvalues of one link's block-circulant channel matrix,
/// ordered like the Ψ spectrum (`i = n + N·m`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEigenSystem {
    grid: OtfsGrid,
    eigenvalues: Vec<Complex64>,
}

impl ChannelEigenSystem {
    pub fn grid(&self) -> OtfsGrid {
        self.grid
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn from_raw(grid: OtfsGrid, eigenvalues: Vec<Complex64>) -> Result<Self, ChannelError> {
        if eigenvalues.len() != grid.nm() {
            return Err(GridError::LengthMismatch {
                expected: grid.nm(),
                actual: eigenvalues.len(),
            }
            .into());
        }
        Ok(Self { grid, eigenvalues })
    }

    /// Eigenvalues straight from the path list, bypassing the dense matrix:
    /// `λ[n + N·m] = Σ_p g_{a,p} · e^{−j2π n k_p / N} · e^{−j2π m l_p / M}`.
    pub fn from_paths(
        grid: OtfsGrid,
        paths: &PathSet,
        geom: &UpaGeometry,
        antenna: usize,
    ) -> Result<Self, ChannelError> {
        paths.validate_against_grid(grid)?;
        let gains: Vec<Complex64> = (0..paths.len())
            .map(|p| paths.antenna_gain(grid, geom, antenna, p))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            grid,
            eigenvalues: spectrum_from_taps(grid, paths, &gains),
        })
    }

    /// Eigenvalues of the beam-combined link `Σ_a w_a H_a`.
    pub fn beamformed(
        grid: OtfsGrid,
        paths: &PathSet,
        geom: &UpaGeometry,
        weights: &[Complex64],
    ) -> Result<Self, ChannelError> {
        let beams = paths.beam_responses(geom, weights)?;
        Self::from_beam_responses(grid, paths, &beams)
    }

    /// Same as [`Self::beamformed`] with the per-path beam responses already
    /// in hand.
    pub fn from_beam_responses(
        grid: OtfsGrid,
        paths: &PathSet,
        beams: &[Complex64],
    ) -> Result<Self, ChannelError> {
        paths.validate_against_grid(grid)?;
        if beams.len() != paths.len() {
            return Err(ChannelError::MismatchedPathVectors);
        }
        let gains: Vec<Complex64> = (0..paths.len())
            .map(|p| paths.gains[p] * paths.delay_doppler_phase(grid, p) * beams[p])
            .collect();
        Ok(Self {
            grid,
            eigenvalues: spectrum_from_taps(grid, paths, &gains),
        })
    }

    /// Matrix-free application of `Ψᴴ diag(λ) Ψ` to a vectorized frame.
    pub fn apply(&self, input: &[Complex64]) -> Result<Vec<Complex64>, ChannelError> {
        Ok(grid::apply_in_eigenbasis(self.grid, &self.eigenvalues, input)?)
    }
}

fn spectrum_from_taps(grid: OtfsGrid, paths: &PathSet, gains: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let table_n: Vec<Complex64> = (0..n)
        .map(|t| fmath::expi(-TAU * t as f64 / n as f64))
        .collect();
    let table_m: Vec<Complex64> = (0..m)
        .map(|t| fmath::expi(-TAU * t as f64 / m as f64))
        .collect();
    let mut out = vec![Complex64::ZERO; grid.nm()];
    for (p, &gain) in gains.iter().enumerate() {
        let kp = paths.doppler_taps[p].rem_euclid(n as i64) as usize;
        let lp = paths.delay_taps[p];
        for mm in 0..m {
            let w = gain * table_m[(mm * lp) % m];
            let row = &mut out[mm * n..(mm + 1) * n];
            for (nn, o) in row.iter_mut().enumerate() {
                *o += w * table_n[(nn * kp) % n];
            }
        }
    }
    out
}

/// Eigenvalues of a block-circulant channel via the fast block-DFT route:
/// an N-point DFT of each circulant block's first column followed by an
/// M-point DFT across the block index. Never touches a dense eigensolver.
pub fn eigen_decompose(channel: &DdChannelMatrix) -> Result<ChannelEigenSystem, ChannelError> {
    if !channel.is_block_circulant() {
        return Err(ChannelError::NotBlockCirculant);
    }
    let grid = channel.grid;
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let table_n: Vec<Complex64> = (0..n)
        .map(|t| fmath::expi(-TAU * t as f64 / n as f64))
        .collect();
    let table_m: Vec<Complex64> = (0..m)
        .map(|t| fmath::expi(-TAU * t as f64 / m as f64))
        .collect();

    // Per-block spectra of the first block-column, block b at rows b·N..(b+1)·N.
    let mut block_spectra = vec![Complex64::ZERO; grid.nm()];
    for b in 0..m {
        for nn in 0..n {
            let mut acc = Complex64::ZERO;
            for j in 0..n {
                acc += channel.matrix.get(b * n + j, 0) * table_n[(nn * j) % n];
            }
            block_spectra[nn + n * b] = acc;
        }
    }
    // Assemble across blocks with the M-th roots of unity.
    let mut eigenvalues = vec![Complex64::ZERO; grid.nm()];
    for mm in 0..m {
        for nn in 0..n {
            let mut acc = Complex64::ZERO;
            for b in 0..m {
                acc += block_spectra[nn + n * b] * table_m[(mm * b) % m];
            }
            eigenvalues[nn + n * mm] = acc;
        }
    }
    Ok(ChannelEigenSystem { grid, eigenvalues })
}

/// Time-independent time-frequency gain of a zero-Doppler link at one
/// antenna and subchannel: `Σ_p h_p e^{j2π l_p m / M} v_a(θ_p, φ_p)`.
pub fn tf_gain(
    grid: OtfsGrid,
    paths: &PathSet,
    geom: &UpaGeometry,
    antenna: usize,
    subchannel: usize,
) -> Result<Complex64, ChannelError> {
    let weights = one_hot(geom, antenna)?;
    tf_gain_beamformed(grid, paths, geom, &weights, subchannel)
}

/// Beam-combined time-frequency gain `Σ_a w_a H_{a}[m]`.
pub fn tf_gain_beamformed(
    grid: OtfsGrid,
    paths: &PathSet,
    geom: &UpaGeometry,
    weights: &[Complex64],
    subchannel: usize,
) -> Result<Complex64, ChannelError> {
    let beams = paths.beam_responses(geom, weights)?;
    tf_gain_from_responses(grid, paths, &beams, subchannel)
}

/// Time-frequency gain with the per-path beam responses already in hand.
pub fn tf_gain_from_responses(
    grid: OtfsGrid,
    paths: &PathSet,
    beams: &[Complex64],
    subchannel: usize,
) -> Result<Complex64, ChannelError> {
    if let Some(&bad) = paths.doppler_taps.iter().find(|&&k| k != 0) {
        return Err(ChannelError::NonZeroDoppler { doppler_tap: bad });
    }
    if beams.len() != paths.len() {
        return Err(ChannelError::MismatchedPathVectors);
    }
    let m = grid.n_delay();
    if subchannel >= m {
        return Err(ChannelError::SubchannelOutOfRange {
            subchannel,
            n_delay: m,
        });
    }
    let mut acc = Complex64::ZERO;
    for p in 0..paths.len() {
        let phase = fmath::expi(TAU * (paths.delay_taps[p] * subchannel) as f64 / m as f64);
        acc += paths.gains[p] * phase * beams[p];
    }
    Ok(acc)
}

fn one_hot(geom: &UpaGeometry, antenna: usize) -> Result<Vec<Complex64>, ChannelError> {
    if antenna >= geom.antenna_count() {
        return Err(ChannelError::AntennaOutOfRange {
            antenna,
            count: geom.antenna_count(),
        });
    }
    let mut weights = vec![Complex64::ZERO; geom.antenna_count()];
    weights[antenna] = Complex64::ONE;
    Ok(weights)
}
