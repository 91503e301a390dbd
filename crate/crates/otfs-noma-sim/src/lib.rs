//! Monte Carlo outage experiments for the downlink MIMO OTFS-NOMA link.
//!
//! [`engine`] realizes scenarios trial by trial on top of the
//! `otfs-noma-core` kernels; [`config`] reads TOML experiment files with
//! reference defaults; [`output`] holds the row schema and writers;
//! [`experiment`] runs a validated spec end to end. The `simulate` binary
//! is a thin CLI over [`experiment::run_experiment`].

// `!(x > 0.0)` validation deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod engine;
pub mod experiment;
pub mod output;
