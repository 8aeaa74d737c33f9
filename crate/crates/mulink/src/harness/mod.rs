//! Monte Carlo harness: config files, scenario runners, and report
//! writers behind the `mulink` command-line tool.
//!
//! Every random quantity in a run is drawn from a ChaCha stream derived
//! from the master seed and a tag path `[scenario, point, trial, purpose]`
//! (see [`crate::util::derive_rng`]). Trials therefore commute with the
//! thread schedule: runs are byte-identical across repeats and across
//! worker counts, and any trial can be replayed in isolation.

pub mod config;
mod detect_bench;
mod link;
pub mod report;
mod stats;
mod waveform_report;

pub use config::{CsiMode, Scenario, SimConfig, load_config};
pub use detect_bench::run_detector_bench;
pub use link::{run_downlink_sweep, run_uplink_sweep};
pub use report::{AbortedPoint, DetectRow, LinkRow, MetricRow, SimReport};
pub use stats::{StatsManifest, load_matrix_file, run_estimate_stats, save_matrix_file};
pub use waveform_report::run_waveform_report;

// Scenario tags: the first entry of every RNG tag path.
pub(crate) const TAG_UPLINK: u64 = 1;
pub(crate) const TAG_DOWNLINK: u64 = 2;
pub(crate) const TAG_DETECT: u64 = 3;
pub(crate) const TAG_WAVEFORM: u64 = 4;
pub(crate) const TAG_STATS: u64 = 5;

// Purpose slots: the last entry, naming what the stream feeds.
pub(crate) const STREAM_CHANNEL: u64 = 0;
pub(crate) const STREAM_DATA: u64 = 1;
pub(crate) const STREAM_NOISE: u64 = 2;
pub(crate) const STREAM_DL_NOISE: u64 = 3;
pub(crate) const STREAM_PLACEMENT: u64 = 4;

/// Run whichever scenario the config selects and return its report.
///
/// The config must carry a `scenario`; the CLI sets it from the
/// subcommand. `estimate-stats` writes covariance files instead of a
/// report and has its own entry point, [`run_estimate_stats`].
pub fn run_scenario(cfg: &SimConfig) -> crate::Result<SimReport> {
    match cfg.scenario {
        Some(Scenario::Uplink) => run_uplink_sweep(cfg),
        Some(Scenario::Downlink) => run_downlink_sweep(cfg),
        Some(Scenario::DetectBench) => run_detector_bench(cfg),
        Some(Scenario::Waveform) => run_waveform_report(cfg),
        None => Err(crate::Error::InvalidConfig(
            "no scenario selected; pass one as the subcommand".into(),
        )),
    }
}
