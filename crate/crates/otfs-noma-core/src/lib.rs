//! Link-level kernels for a downlink MIMO OTFS-NOMA network.
//!
//! The crate covers the signal-processing core of the simulator:
//!
//! - [`grid`]: OTFS frame geometry, the ISFFT/SFFT pair between the
//!   delay-Doppler and time-frequency grids, the Doppler-first
//!   vectorization convention and the unitary Kronecker-DFT matrix Ψ.
//! - [`channel`]: random multipath delay-Doppler channels per user and
//!   antenna, block-circulant channel matrices, their eigenvalues via the
//!   block-DFT route, and time-frequency gains for zero-Doppler users.
//! - [`precoding`]: conjugate beams steered at the high-mobility user of
//!   each cluster and the NOMA power split between user classes.
//! - [`detection`]: eigenvalue-domain zero-forcing, one-tap detection of
//!   low-mobility users, closed-form SINRs and the dense-matrix oracle
//!   they are checked against.
//!
//! Everything is `no_std` + `alloc`; all types are immutable after
//! construction and operations are pure functions, so values can be shared
//! freely across threads.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` validation deliberately rejects NaN; indexed loops walk
// several arrays in lockstep in the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod channel;
pub mod detection;
pub mod grid;
pub mod linalg;
pub mod precoding;

mod fmath;

pub use num_complex::Complex64;
