//! Link-level simulation toolkit for multi-user MIMO-OFDM.
//!
//! `mulink` models one cell of a multi-user MIMO system on an OFDM resource
//! grid: `K` single-antenna users and a base station with `L` antennas,
//! time-division duplexing with an uplink slot followed by an optional
//! downlink slot. The crate covers the full link-level chain:
//!
//! * [`grid`] — resource-grid bookkeeping, Gray-mapped square QAM
//!   constellations, and per-user pilot lattices (1P/2P comb layouts).
//! * [`channel`] — correlated channel synthesis: local-scattering spatial
//!   covariance, Jakes time selectivity, exponential-delay-profile frequency
//!   selectivity, slot-energy normalization.
//! * [`chanest`] — LMMSE pilot-based channel estimation with error-covariance
//!   bookkeeping, nearest-pilot fill and linear interpolation.
//! * [`equalize`] — grouped LMMSE uplink equalization with diagonal rescaling
//!   and per-RE post-equalization noise variance.
//! * [`downlink`] — uplink–downlink duality precoding, equivalent-channel
//!   estimation at the user side, and downlink post-equalization variance.
//! * [`detect`] — flat MIMO detectors: LMMSE, exact maximum likelihood, and
//!   an unfolded iterative detector with a Gaussian-posterior denoiser.
//! * [`demap`] — max-log-free exact bit LLRs, hard decisions, and a
//!   binary-cross-entropy rate metric.
//! * [`waveform`] — oversampled OFDM time-domain synthesis, PAPR/CCDF and
//!   ACLR metrics, and tone-reservation peak reduction.
//! * [`harness`] — Monte Carlo sweeps (uplink, downlink, detector bench,
//!   waveform report, statistics estimation) with deterministic seeding and
//!   CSV/JSON reporting.
//!
//! # Examples
//!
//! Each major capability has a runnable example; start with these:
//!
//! ```text
//! cargo run --release --example gray_mapping        # constellations + LLRs
//! cargo run --release --example pilot_patterns      # 1P/2P pilot lattices
//! cargo run --release --example channel_synthesis   # correlated grid channels
//! cargo run --release --example channel_estimation  # pilot LMMSE + interpolation
//! cargo run --release --example grouped_equalization
//! cargo run --release --example downlink_precoding
//! cargo run --release --example mimo_detectors      # LMMSE vs ML vs iterative
//! cargo run --release --example papr_ccdf           # PAPR, CCDF, ACLR
//! cargo run --release --example tone_reservation
//! cargo run --release --example uplink_sweep        # end-to-end Monte Carlo
//! ```
//!
//! A thin `mulink` binary exposes the same flows as subcommands
//! (`uplink`, `downlink`, `detect-bench`, `waveform`, `estimate-stats`)
//! driven by a TOML config; see the README for the file formats.

pub mod channel;
pub mod chanest;
pub mod demap;
pub mod detect;
pub mod downlink;
pub mod equalize;
mod error;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod util;
pub mod waveform;

pub use error::{Error, Result};
