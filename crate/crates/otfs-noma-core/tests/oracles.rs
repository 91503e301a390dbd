#![allow(clippy::needless_range_loop)]

//! Dense-matrix oracles cross-checking the eigenvalue-domain fast paths.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otfs_noma_core::channel::{
    build_channel_matrix, eigen_decompose, sample_paths, ChannelEigenSystem, Mobility,
    PathProfile, PathSet, UniformLaw, UpaGeometry,
};
use otfs_noma_core::detection::{build_zf, effective_eigenvalues, DEFAULT_SINGULAR_EPSILON};
use otfs_noma_core::grid::{psi_matrix, vectorize, DdFrame, OtfsGrid};
use otfs_noma_core::linalg::CMatrix;
use otfs_noma_core::precoding::Precoder;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn grid(n: usize, m: usize) -> OtfsGrid {
    OtfsGrid::from_spacing(n, m, 15e3).unwrap()
}

fn hm_profile(max_delay: usize) -> PathProfile {
    PathProfile {
        path_count: 4,
        max_delay_tap: max_delay,
        mobility: Mobility::High {
            max_speed: 200.0 / 3.6,
            carrier_frequency: 60e9,
        },
        elevation: UniformLaw::new(std::f64::consts::FRAC_PI_4, std::f64::consts::PI / 10.0),
        azimuth: UniformLaw::new(0.0, std::f64::consts::PI),
    }
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Dense beam combination `Σ_a p_a H_a`.
fn combine_dense(channels: &[&CMatrix], weights: &[Complex64]) -> CMatrix {
    let nm = channels[0].rows();
    CMatrix::from_fn(nm, nm, |r, col| {
        let mut acc = Complex64::ZERO;
        for (a, ch) in channels.iter().enumerate() {
            acc += weights[a] * ch.get(r, col);
        }
        acc
    })
}

#[test]
fn effective_eigenvalues_match_dense_similarity_diagonal() {
    let g = grid(4, 4);
    let geom = UpaGeometry::half_wavelength(2, 5e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let psi = psi_matrix(g).unwrap();
    for _ in 0..5 {
        let paths = sample_paths(&mut rng, g, &hm_profile(3)).unwrap();
        let weights = random_vector(&mut rng, 4);

        let systems: Vec<ChannelEigenSystem> = (0..4)
            .map(|a| ChannelEigenSystem::from_paths(g, &paths, &geom, a).unwrap())
            .collect();
        let eff = effective_eigenvalues(&systems, &weights).unwrap();

        let dense: Vec<CMatrix> = (0..4)
            .map(|a| build_channel_matrix(g, &paths, &geom, a).unwrap().matrix().clone())
            .collect();
        let combined = combine_dense(&dense.iter().collect::<Vec<_>>(), &weights);
        let similar = psi.mul(&combined).unwrap().mul(&psi.adjoint()).unwrap();

        let mut max_err = 0.0_f64;
        let mut off_diag = 0.0_f64;
        for r in 0..g.nm() {
            for col in 0..g.nm() {
                if r == col {
                    max_err = max_err.max((similar.get(r, r) - eff[r]).norm());
                } else {
                    off_diag += similar.get(r, col).norm_sqr();
                }
            }
        }
        assert!(max_err < 1e-9, "diagonal mismatch {max_err}");
        assert!(off_diag.sqrt() < 1e-9, "Ψ H Ψᴴ must be diagonal");
    }
}

#[test]
fn pseudo_inverse_equalizer_equals_eigen_domain_form() {
    // dense (HᴴH)⁻¹Hᴴ against Ψᴴ diag(δ) Ψ, and both applied to a vector
    let g = grid(4, 4);
    let geom = UpaGeometry::half_wavelength(2, 5e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let psi = psi_matrix(g).unwrap();
    for _ in 0..5 {
        let paths = sample_paths(&mut rng, g, &hm_profile(3)).unwrap();
        let precoder = Precoder::conjugate_beam(&geom, std::slice::from_ref(&paths)).unwrap();
        let weights = precoder.column(0);

        let dense: Vec<CMatrix> = (0..4)
            .map(|a| build_channel_matrix(g, &paths, &geom, a).unwrap().matrix().clone())
            .collect();
        let h = combine_dense(&dense.iter().collect::<Vec<_>>(), weights);
        let gram = h.adjoint().mul(&h).unwrap();
        let g_dense = gram.inverse().unwrap().mul(&h.adjoint()).unwrap();

        let systems: Vec<ChannelEigenSystem> = (0..4)
            .map(|a| ChannelEigenSystem::from_paths(g, &paths, &geom, a).unwrap())
            .collect();
        let eff = effective_eigenvalues(&systems, weights).unwrap();
        let zf = build_zf(g, eff, DEFAULT_SINGULAR_EPSILON).unwrap();
        let mut delta_diag = CMatrix::zeros(g.nm(), g.nm());
        for (i, &d) in zf.delta().iter().enumerate() {
            delta_diag.set(i, i, d);
        }
        let g_eigen = psi.adjoint().mul(&delta_diag).unwrap().mul(&psi).unwrap();

        let diff = g_dense.sub(&g_eigen).unwrap().frobenius_norm();
        let rel = diff / g_dense.frobenius_norm();
        assert!(rel < 1e-9, "equalizer forms disagree: rel {rel}");

        let y = random_vector(&mut rng, g.nm());
        let via_dense = g_dense.apply(&y).unwrap();
        let via_fast = zf.equalize_hm(&y).unwrap();
        let err = via_dense
            .iter()
            .zip(&via_fast)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "applied equalizers disagree: {err}");
    }
}

#[test]
fn block_dft_reconstruction_identity() {
    let g = grid(8, 8);
    let geom = UpaGeometry::half_wavelength(2, 5e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let psi = psi_matrix(g).unwrap();
    for _ in 0..3 {
        let paths = sample_paths(&mut rng, g, &hm_profile(4)).unwrap();
        let ch = build_channel_matrix(g, &paths, &geom, 1).unwrap();
        let eig = eigen_decompose(&ch).unwrap();
        let mut d = CMatrix::zeros(g.nm(), g.nm());
        for (i, &v) in eig.eigenvalues().iter().enumerate() {
            d.set(i, i, v);
        }
        let rebuilt = psi.adjoint().mul(&d).unwrap().mul(&psi).unwrap();
        let rel = ch.matrix().sub(&rebuilt).unwrap().frobenius_norm()
            / ch.matrix().frobenius_norm();
        assert!(rel < 1e-10, "reconstruction error {rel}");
    }
}

#[test]
fn eigen_application_matches_dense_product() {
    let g = grid(8, 8);
    let geom = UpaGeometry::half_wavelength(2, 5e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let paths = sample_paths(&mut rng, g, &hm_profile(4)).unwrap();
    let ch = build_channel_matrix(g, &paths, &geom, 3).unwrap();
    let eig = eigen_decompose(&ch).unwrap();
    for _ in 0..5 {
        let x = random_vector(&mut rng, g.nm());
        let dense = ch.matrix().apply(&x).unwrap();
        let fast = eig.apply(&x).unwrap();
        let err = dense
            .iter()
            .zip(&fast)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "matrix-free product differs: {err}");
    }
}

#[test]
fn zero_forcing_is_exact_on_the_signal_component() {
    // channel apply via the independent path-domain route, then equalize
    let g = grid(8, 8);
    let geom = UpaGeometry::half_wavelength(4, 5e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let paths = sample_paths(&mut rng, g, &hm_profile(4)).unwrap();
    let precoder = Precoder::conjugate_beam(&geom, std::slice::from_ref(&paths)).unwrap();
    let eff = ChannelEigenSystem::beamformed(g, &paths, &geom, precoder.column(0)).unwrap();
    let zf = build_zf(g, eff.eigenvalues().to_vec(), DEFAULT_SINGULAR_EPSILON).unwrap();

    let frame = DdFrame::from_fn(g, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let sent = vectorize(&frame);
    let received = otfs_noma_core::channel::apply_paths_beamformed(
        g,
        &paths,
        &geom,
        precoder.column(0),
        &sent,
    )
    .unwrap();
    let estimate = zf.equalize_hm(&received).unwrap();
    let err = sent
        .iter()
        .zip(&estimate)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-9, "noiseless ZF identity violated: {err}");
}

#[test]
fn explicit_permutation_channel_sanity() {
    // one path with unit gain at (delay 1, Doppler 0) on a 2x2 grid:
    // the dense similarity diagonal carries {1, −1, 1, −1}
    let g = grid(2, 2);
    let geom = UpaGeometry::half_wavelength(1, 5e-3).unwrap();
    let paths = PathSet::new(vec![Complex64::ONE], vec![1], vec![0], vec![0.5], vec![0.0]).unwrap();
    let ch = build_channel_matrix(g, &paths, &geom, 0).unwrap();
    let psi = psi_matrix(g).unwrap();
    let similar = psi.mul(ch.matrix()).unwrap().mul(&psi.adjoint()).unwrap();
    let eig = eigen_decompose(&ch).unwrap();
    for i in 0..4 {
        assert!((similar.get(i, i) - eig.eigenvalues()[i]).norm() < 1e-12);
        assert!((eig.eigenvalues()[i].norm() - 1.0).abs() < 1e-12);
    }
}
