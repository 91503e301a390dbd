//! OTFS grid arithmetic: frame geometry, the ISFFT/SFFT pair linking the
//! delay-Doppler and time-frequency grids, the Doppler-first vectorization
//! and the unitary Kronecker-DFT matrix Ψ.
//!
//! Two transform conventions coexist on purpose and differ only by a scalar:
//!
//! - the frame-level [`isfft`]/[`sfft`] pair keeps the `1/(NM)` factor on the
//!   ISFFT, with the SFFT scaled so the two are mutually inverse;
//! - the matrix-level [`psi_matrix`] (and [`apply_psi`]) is unitary,
//!   `Ψ Ψᴴ = I`, which is what the detection math relies on.
//!
//! Vectors and frames are stored Doppler-first: element `k + N·l` of a
//! vectorized frame is the symbol at Doppler bin `k` and delay bin `l`. With
//! that layout Ψ applies the N-point DFT along the Doppler axis and the
//! M-point DFT along the delay axis (as a Kronecker product: `F_M ⊗ F_N`).
//!
//! # Example
//!
//! ```
//! use otfs_noma_core::grid::{isfft, sfft, DdFrame, OtfsGrid};
//! use otfs_noma_core::Complex64;
//!
//! let grid = OtfsGrid::from_spacing(16, 16, 15e3).unwrap();
//! let mut frame = DdFrame::zeros(grid);
//! frame.set(3, 5, Complex64::ONE);
//!
//! let tf = isfft(&frame);
//! let back = sfft(&tf);
//! assert!((back.get(3, 5) - Complex64::ONE).norm() < 1e-12);
//! ```

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::fmath;
use crate::linalg::CMatrix;

/// Largest NM for which Ψ may be materialized as a dense matrix.
pub const PSI_MAX_NM: usize = 1 << 16;

/// Relative tolerance on the `symbol_duration * subcarrier_spacing == 1` invariant.
const TIME_FREQUENCY_TOLERANCE: f64 = 1e-12;

const TAU: f64 = core::f64::consts::TAU;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimensions must be positive, got N = {n_doppler}, M = {n_delay}")]
    EmptyGrid { n_doppler: usize, n_delay: usize },
    #[error("subcarrier spacing and symbol duration must be positive and finite")]
    NonPositiveTiming,
    #[error(
        "symbol duration times subcarrier spacing must equal 1, got {product} (T = {symbol_duration}, Δf = {subcarrier_spacing})"
    )]
    TimeFrequencyMismatch {
        symbol_duration: f64,
        subcarrier_spacing: f64,
        product: f64,
    },
    #[error("vector length {actual} does not match the grid size {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("NM = {nm} exceeds the dense-Ψ guard of {max}")]
    DimensionOverflow { nm: usize, max: usize },
}

/// OTFS frame geometry: `N` Doppler bins by `M` delay bins, subcarrier
/// spacing `Δf` and symbol duration `T` with `T·Δf = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtfsGrid {
    n_doppler: usize,
    n_delay: usize,
    subcarrier_spacing: f64,
    symbol_duration: f64,
}

impl OtfsGrid {
    pub fn new(
        n_doppler: usize,
        n_delay: usize,
        subcarrier_spacing: f64,
        symbol_duration: f64,
    ) -> Result<Self, GridError> {
        if n_doppler == 0 || n_delay == 0 {
            return Err(GridError::EmptyGrid { n_doppler, n_delay });
        }
        if !(subcarrier_spacing > 0.0) || !(symbol_duration > 0.0) {
            return Err(GridError::NonPositiveTiming);
        }
        let product = subcarrier_spacing * symbol_duration;
        if (product - 1.0).abs() > TIME_FREQUENCY_TOLERANCE {
            return Err(GridError::TimeFrequencyMismatch {
                symbol_duration,
                subcarrier_spacing,
                product,
            });
        }
        Ok(Self {
            n_doppler,
            n_delay,
            subcarrier_spacing,
            symbol_duration,
        })
    }

    /// Build a grid from `Δf` alone, deriving `T = 1/Δf`.
    pub fn from_spacing(
        n_doppler: usize,
        n_delay: usize,
        subcarrier_spacing: f64,
    ) -> Result<Self, GridError> {
        if !(subcarrier_spacing > 0.0) {
            return Err(GridError::NonPositiveTiming);
        }
        Self::new(
            n_doppler,
            n_delay,
            subcarrier_spacing,
            1.0 / subcarrier_spacing,
        )
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler
    }

    pub fn n_delay(&self) -> usize {
        self.n_delay
    }

    pub fn nm(&self) -> usize {
        self.n_doppler * self.n_delay
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    /// Frame duration `N·T` (derived, never stored).
    pub fn frame_duration(&self) -> f64 {
        self.n_doppler as f64 * self.symbol_duration
    }

    /// Occupied bandwidth `M·Δf` (derived, never stored).
    pub fn bandwidth(&self) -> f64 {
        self.n_delay as f64 * self.subcarrier_spacing
    }
}

/// Delay-Doppler frame, `symbols[k, l]` for Doppler bin `k` and delay bin `l`.
///
/// Storage already follows the vectorization order: entry `k + N·l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdFrame {
    grid: OtfsGrid,
    data: Vec<Complex64>,
}

/// Time-frequency frame, `symbols[n, m]` for time slot `n` and subchannel `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfFrame {
    grid: OtfsGrid,
    data: Vec<Complex64>,
}

macro_rules! frame_impl {
    ($name:ident, $fast:ident, $slow:ident) => {
        impl $name {
            pub fn zeros(grid: OtfsGrid) -> Self {
                Self {
                    grid,
                    data: vec![Complex64::ZERO; grid.nm()],
                }
            }

            pub fn from_fn(grid: OtfsGrid, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
                let mut data = vec![Complex64::ZERO; grid.nm()];
                let n = grid.n_doppler();
                for slow in 0..grid.n_delay() {
                    for fast in 0..n {
                        data[fast + n * slow] = f(fast, slow);
                    }
                }
                Self { grid, data }
            }

            pub fn from_data(grid: OtfsGrid, data: Vec<Complex64>) -> Result<Self, GridError> {
                if data.len() != grid.nm() {
                    return Err(GridError::LengthMismatch {
                        expected: grid.nm(),
                        actual: data.len(),
                    });
                }
                Ok(Self { grid, data })
            }

            pub fn grid(&self) -> OtfsGrid {
                self.grid
            }

            #[inline]
            pub fn get(&self, $fast: usize, $slow: usize) -> Complex64 {
                self.data[$fast + self.grid.n_doppler() * $slow]
            }

            #[inline]
            pub fn set(&mut self, $fast: usize, $slow: usize, value: Complex64) {
                let n = self.grid.n_doppler();
                self.data[$fast + n * $slow] = value;
            }

            pub fn data(&self) -> &[Complex64] {
                &self.data
            }

            pub fn energy(&self) -> f64 {
                self.data.iter().map(|v| v.norm_sqr()).sum()
            }
        }
    };
}

frame_impl!(DdFrame, k, l);
frame_impl!(TfFrame, n, m);

/// DFT along the fast (Doppler-like) axis of a `k + N·l` packed vector.
///
/// `out[a + N·b] = scale · Σ_k in[k + N·b] · e^{sign·j·2π·a·k/N}`
fn transform_fast_axis(
    n: usize,
    m: usize,
    input: &[Complex64],
    sign: f64,
    scale: f64,
) -> Vec<Complex64> {
    let table: Vec<Complex64> = (0..n).map(|t| fmath::expi(sign * TAU * t as f64 / n as f64)).collect();
    let mut out = vec![Complex64::ZERO; n * m];
    for b in 0..m {
        let col = &input[b * n..(b + 1) * n];
        for a in 0..n {
            let mut acc = Complex64::ZERO;
            for (k, &v) in col.iter().enumerate() {
                acc += v * table[(a * k) % n];
            }
            out[a + n * b] = acc * scale;
        }
    }
    out
}

/// DFT along the slow (delay-like) axis of a `k + N·l` packed vector.
fn transform_slow_axis(
    n: usize,
    m: usize,
    input: &[Complex64],
    sign: f64,
    scale: f64,
) -> Vec<Complex64> {
    let table: Vec<Complex64> = (0..m).map(|t| fmath::expi(sign * TAU * t as f64 / m as f64)).collect();
    let mut out = vec![Complex64::ZERO; n * m];
    for b in 0..m {
        let out_col = &mut out[b * n..(b + 1) * n];
        for l in 0..m {
            let w = table[(b * l) % m] * scale;
            let in_col = &input[l * n..(l + 1) * n];
            for (o, &v) in out_col.iter_mut().zip(in_col) {
                *o += v * w;
            }
        }
    }
    out
}

/// Inverse symplectic finite Fourier transform, delay-Doppler → time-frequency:
///
/// `TF[n,m] = (1/NM) Σ_k Σ_l DD[k,l] e^{j2π(kn/N − ml/M)}`
pub fn isfft(frame: &DdFrame) -> TfFrame {
    let grid = frame.grid;
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let stage = transform_fast_axis(n, m, frame.data(), 1.0, 1.0);
    let data = transform_slow_axis(n, m, &stage, -1.0, 1.0 / grid.nm() as f64);
    TfFrame { grid, data }
}

/// Symplectic finite Fourier transform, time-frequency → delay-Doppler.
///
/// Exact inverse of [`isfft`]: the scaling absorbs the `1/(NM)` carried by
/// the forward direction, so `sfft(isfft(x)) == x`.
pub fn sfft(frame: &TfFrame) -> DdFrame {
    let grid = frame.grid;
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let stage = transform_fast_axis(n, m, frame.data(), -1.0, 1.0);
    let data = transform_slow_axis(n, m, &stage, 1.0, 1.0);
    DdFrame { grid, data }
}

/// Doppler-first vectorization: `out[k + N·l] = frame[k, l]`.
pub fn vectorize(frame: &DdFrame) -> Vec<Complex64> {
    frame.data.clone()
}

/// Inverse of [`vectorize`].
pub fn devectorize(grid: OtfsGrid, data: &[Complex64]) -> Result<DdFrame, GridError> {
    DdFrame::from_data(grid, data.to_vec())
}

/// The unitary `NM × NM` Kronecker-DFT matrix Ψ.
///
/// Entry `Ψ[(n + N·m), (k + N·l)] = e^{−j2π(nk/N + ml/M)} / √(NM)`, i.e. the
/// Kronecker product of the N-point and M-point unitary DFT matrices laid out
/// for the Doppler-first vectorization. Satisfies `Ψ Ψᴴ = Ψᴴ Ψ = I`.
pub fn psi_matrix(grid: OtfsGrid) -> Result<CMatrix, GridError> {
    let nm = grid.nm();
    if nm > PSI_MAX_NM {
        return Err(GridError::DimensionOverflow {
            nm,
            max: PSI_MAX_NM,
        });
    }
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let norm = 1.0 / fmath::sqrt(nm as f64);
    // One table per axis; exponents are exact modulo the axis length.
    let table_n: Vec<Complex64> = (0..n).map(|t| fmath::expi(-TAU * t as f64 / n as f64)).collect();
    let table_m: Vec<Complex64> = (0..m).map(|t| fmath::expi(-TAU * t as f64 / m as f64)).collect();
    Ok(CMatrix::from_fn(nm, nm, |row, col| {
        let (rn, rm) = (row % n, row / n);
        let (ck, cl) = (col % n, col / n);
        table_n[(rn * ck) % n] * table_m[(rm * cl) % m] * norm
    }))
}

fn check_len(grid: OtfsGrid, x: &[Complex64]) -> Result<(), GridError> {
    if x.len() != grid.nm() {
        return Err(GridError::LengthMismatch {
            expected: grid.nm(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// Apply the unitary Ψ to a vectorized frame without materializing it.
pub fn apply_psi(grid: OtfsGrid, x: &[Complex64]) -> Result<Vec<Complex64>, GridError> {
    check_len(grid, x)?;
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let stage = transform_fast_axis(n, m, x, -1.0, 1.0 / fmath::sqrt(n as f64));
    Ok(transform_slow_axis(n, m, &stage, -1.0, 1.0 / fmath::sqrt(m as f64)))
}

/// Apply Ψᴴ (the inverse of [`apply_psi`]).
pub fn apply_psi_adjoint(grid: OtfsGrid, x: &[Complex64]) -> Result<Vec<Complex64>, GridError> {
    check_len(grid, x)?;
    let n = grid.n_doppler();
    let m = grid.n_delay();
    let stage = transform_fast_axis(n, m, x, 1.0, 1.0 / fmath::sqrt(n as f64));
    Ok(transform_slow_axis(n, m, &stage, 1.0, 1.0 / fmath::sqrt(m as f64)))
}

/// Matrix-free evaluation of `Ψᴴ · diag(d) · Ψ · x`.
pub fn apply_in_eigenbasis(
    grid: OtfsGrid,
    diagonal: &[Complex64],
    x: &[Complex64],
) -> Result<Vec<Complex64>, GridError> {
    check_len(grid, diagonal)?;
    let mut spectrum = apply_psi(grid, x)?;
    for (s, &d) in spectrum.iter_mut().zip(diagonal) {
        *s *= d;
    }
    apply_psi_adjoint(grid, &spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize, m: usize) -> OtfsGrid {
        OtfsGrid::from_spacing(n, m, 15e3).unwrap()
    }

    fn random_frame(g: OtfsGrid, seed: u64) -> DdFrame {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DdFrame::from_fn(g, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn grid_rejects_mismatched_timing() {
        let err = OtfsGrid::new(16, 16, 15e3, 1.0 / 14.9e3).unwrap_err();
        assert!(matches!(err, GridError::TimeFrequencyMismatch { .. }));
        // exact reciprocal is accepted
        OtfsGrid::new(16, 16, 15e3, 1.0 / 15e3).unwrap();
    }

    #[test]
    fn grid_rejects_degenerate_dimensions() {
        assert!(matches!(
            OtfsGrid::from_spacing(0, 16, 15e3),
            Err(GridError::EmptyGrid { .. })
        ));
        assert!(matches!(
            OtfsGrid::from_spacing(16, 16, 0.0),
            Err(GridError::NonPositiveTiming)
        ));
    }

    #[test]
    fn grid_derives_duration_and_bandwidth() {
        let g = grid(16, 16);
        assert!((g.frame_duration() - 16.0 / 15e3).abs() < 1e-15);
        assert!((g.bandwidth() - 16.0 * 15e3).abs() < 1e-9);
    }

    #[test]
    fn isfft_of_all_ones_concentrates_at_origin() {
        let g = grid(2, 2);
        let dd = DdFrame::from_fn(g, |_, _| Complex64::ONE);
        let tf = isfft(&dd);
        assert!((tf.get(0, 0) - Complex64::ONE).norm() < 1e-12);
        for (n, m) in [(0, 1), (1, 0), (1, 1)] {
            assert!(tf.get(n, m).norm() < 1e-12, "expected 0 at [{n},{m}]");
        }
    }

    #[test]
    fn isfft_of_delta_is_constant() {
        let g = grid(4, 8);
        let mut dd = DdFrame::zeros(g);
        dd.set(0, 0, Complex64::ONE);
        let tf = isfft(&dd);
        let expected = 1.0 / g.nm() as f64;
        for v in tf.data() {
            assert!((v - c(expected, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn sfft_inverts_isfft() {
        let g = grid(4, 4);
        let dd = random_frame(g, 7);
        let back = sfft(&isfft(&dd));
        let err = dd
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "round-trip error {err}");
    }

    #[test]
    fn isfft_inverts_sfft() {
        let g = grid(3, 5);
        let tf = {
            let dd = random_frame(g, 9);
            TfFrame::from_data(g, dd.data().to_vec()).unwrap()
        };
        let back = isfft(&sfft(&tf));
        let err = tf
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn constant_tf_frame_is_dd_delta() {
        let g = grid(4, 4);
        let tf = TfFrame::from_fn(g, |_, _| c(1.0 / g.nm() as f64, 0.0));
        let dd = sfft(&tf);
        assert!((dd.get(0, 0) - Complex64::ONE).norm() < 1e-12);
        let off_energy: f64 = dd.data().iter().skip(1).map(|v| v.norm_sqr()).sum();
        assert!(off_energy < 1e-24);
    }

    #[test]
    fn zero_frame_transforms_to_zero() {
        let g = grid(2, 3);
        let tf = isfft(&DdFrame::zeros(g));
        assert!(tf.energy() == 0.0);
        let dd = sfft(&TfFrame::zeros(g));
        assert!(dd.energy() == 0.0);
    }

    #[test]
    fn parseval_with_paper_scaling() {
        let g = grid(8, 4);
        let dd = random_frame(g, 3);
        let tf = isfft(&dd);
        let lhs = tf.energy();
        let rhs = dd.energy() / g.nm() as f64;
        assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn vectorize_is_doppler_first() {
        let g = grid(2, 2);
        // frame[0,0]=a, frame[0,1]=b, frame[1,0]=c, frame[1,1]=d
        let mut dd = DdFrame::zeros(g);
        dd.set(0, 0, c(1.0, 0.0)); // a
        dd.set(0, 1, c(2.0, 0.0)); // b
        dd.set(1, 0, c(3.0, 0.0)); // c
        dd.set(1, 1, c(4.0, 0.0)); // d
        let v = vectorize(&dd);
        assert_eq!(v, vec![c(1.0, 0.0), c(3.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
    }

    #[test]
    fn vectorize_places_doppler_delta_at_its_index() {
        let g = grid(16, 4);
        let mut dd = DdFrame::zeros(g);
        dd.set(1, 0, Complex64::ONE);
        let v = vectorize(&dd);
        assert_eq!(v[1], Complex64::ONE);
        assert_eq!(v.iter().filter(|x| **x != Complex64::ZERO).count(), 1);
    }

    #[test]
    fn devectorize_round_trips() {
        let g = grid(4, 4);
        let dd = random_frame(g, 11);
        let back = devectorize(g, &vectorize(&dd)).unwrap();
        assert_eq!(dd, back);
        assert!(matches!(
            devectorize(g, &[Complex64::ZERO; 3]),
            Err(GridError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn psi_of_trivial_grid_is_one() {
        let g = OtfsGrid::from_spacing(1, 1, 15e3).unwrap();
        let psi = psi_matrix(g).unwrap();
        assert_eq!(psi.rows(), 1);
        assert!((psi.get(0, 0) - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn psi_is_unitary() {
        let g = grid(2, 2);
        let psi = psi_matrix(g).unwrap();
        let gram = psi.mul(&psi.adjoint()).unwrap();
        let err = gram.sub(&CMatrix::identity(4)).unwrap().frobenius_norm();
        assert!(err < 1e-12, "‖ΨΨᴴ − I‖ = {err}");
    }

    #[test]
    fn psi_matches_elementwise_kronecker_oracle() {
        // Independently constructed DFT matrices, combined entry by entry.
        let n = 4;
        let m = 2;
        let g = grid(n, m);
        let psi = psi_matrix(g).unwrap();
        let dft = |size: usize, j: usize, k: usize| -> Complex64 {
            let angle = -TAU * (j * k) as f64 / size as f64;
            c(angle.cos(), angle.sin()) / c((size as f64).sqrt(), 0.0)
        };
        for row in 0..n * m {
            for col in 0..n * m {
                let expected = dft(n, row % n, col % n) * dft(m, row / n, col / n);
                assert!(
                    (psi.get(row, col) - expected).norm() < 1e-13,
                    "mismatch at ({row},{col})"
                );
            }
        }
    }

    #[test]
    fn psi_guard_rejects_oversized_grids() {
        let g = OtfsGrid::from_spacing(1 << 9, 1 << 8, 15e3).unwrap();
        assert!(matches!(
            psi_matrix(g),
            Err(GridError::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn matrix_free_psi_matches_dense() {
        let g = grid(4, 3);
        let psi = psi_matrix(g).unwrap();
        let x = vectorize(&random_frame(g, 21));
        let dense = psi.apply(&x).unwrap();
        let fast = apply_psi(g, &x).unwrap();
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = apply_psi_adjoint(g, &fast).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenbasis_application_matches_dense_similarity() {
        let g = grid(3, 4);
        let psi = psi_matrix(g).unwrap();
        let x = vectorize(&random_frame(g, 33));
        let diag: Vec<Complex64> = (0..g.nm()).map(|i| c(1.0 + i as f64 * 0.1, -0.2)).collect();
        let mut d = CMatrix::zeros(g.nm(), g.nm());
        for (i, &v) in diag.iter().enumerate() {
            d.set(i, i, v);
        }
        let dense = psi
            .adjoint()
            .mul(&d)
            .unwrap()
            .mul(&psi)
            .unwrap()
            .apply(&x)
            .unwrap();
        let fast = apply_in_eigenbasis(g, &diag, &x).unwrap();
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn isfft_is_linear() {
        let g = grid(4, 4);
        let x = random_frame(g, 1);
        let y = random_frame(g, 2);
        let alpha = c(0.7, -1.3);
        let beta = c(-0.4, 0.9);
        let combined = DdFrame::from_fn(g, |k, l| alpha * x.get(k, l) + beta * y.get(k, l));
        let lhs = isfft(&combined);
        let tx = isfft(&x);
        let ty = isfft(&y);
        for n in 0..4 {
            for m in 0..4 {
                let rhs = alpha * tx.get(n, m) + beta * ty.get(n, m);
                assert!((lhs.get(n, m) - rhs).norm() < 1e-12);
            }
        }
    }
}
