//! Simulation configuration: TOML on disk, validated structs in memory.
//!
//! Unknown keys are hard errors — a typo must never silently fall back to a
//! default. Validation collects every violation before reporting, so one
//! round of fixes suffices. The canonical serialization (defaults filled
//! in, struct field order) doubles as the provenance record: its FNV-1a
//! hash is stamped on every CSV row a run emits.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, Normalization, ScatteringModel, TemporalSpectralModel};
use crate::chanest::{InterpolationMode, PowerDecayParams};
use crate::detect::VarianceRule;
use crate::grid::{Constellation, Duplex, GridConfig};
use crate::util::fnv1a64;
use crate::waveform::WaveformConfig;
use crate::{Error, Result};

/// Which end-to-end flow a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Uplink,
    Downlink,
    DetectBench,
    Waveform,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Uplink => "uplink",
            Scenario::Downlink => "downlink",
            Scenario::DetectBench => "detect-bench",
            Scenario::Waveform => "waveform",
        };
        f.write_str(s)
    }
}

/// What the equalizer knows about the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsiMode {
    /// Genie: the true channel, zero error covariance.
    Perfect,
    /// LMMSE estimates with the exact estimation-error covariance.
    Exact,
    /// LMMSE estimates, error covariance ignored (nearest-interpolated
    /// estimates only).
    Nire,
    /// LMMSE estimates with the parametric power-decay error model.
    Decay,
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(CsiMode::Perfect),
            "exact" => Ok(CsiMode::Exact),
            "nire" => Ok(CsiMode::Nire),
            "decay" => Ok(CsiMode::Decay),
            other => Err(Error::InvalidConfig(format!(
                "unknown CSI mode {other:?}; expected perfect, exact, nire, or decay"
            ))),
        }
    }
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Exact => "exact",
            CsiMode::Nire => "nire",
            CsiMode::Decay => "decay",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct GridSection {
    pub symbols: usize,
    pub subcarriers: usize,
    pub users: usize,
    pub antennas: usize,
    pub bits_per_symbol: usize,
    pub duplex: DuplexChoice,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            symbols: 14,
            subcarriers: 12,
            users: 4,
            antennas: 16,
            bits_per_symbol: 2,
            duplex: DuplexChoice::Uplink,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplexChoice {
    Uplink,
    UplinkDownlink,
}

impl From<DuplexChoice> for Duplex {
    fn from(d: DuplexChoice) -> Duplex {
        match d {
            DuplexChoice::Uplink => Duplex::UplinkOnly,
            DuplexChoice::UplinkDownlink => Duplex::UplinkDownlink,
        }
    }
}

impl GridSection {
    /// The grid at a concrete noise operating point.
    pub fn to_grid(&self, sigma2: f64) -> GridConfig {
        GridConfig {
            symbols: self.symbols,
            subcarriers: self.subcarriers,
            users: self.users,
            antennas: self.antennas,
            bits_per_symbol: self.bits_per_symbol,
            sigma2,
            duplex: self.duplex.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Separable correlated fading: local scattering across antennas,
    /// Jakes across symbols, exponential delay profile across subcarriers.
    Kronecker,
    /// Static identity channel (parallel AWGN links); calibration only.
    Awgn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationChoice {
    SlotEnergy,
    ExpectationOnly,
}

impl From<NormalizationChoice> for Normalization {
    fn from(n: NormalizationChoice) -> Normalization {
        match n {
            NormalizationChoice::SlotEnergy => Normalization::SlotEnergy,
            NormalizationChoice::ExpectationOnly => Normalization::ExpectationOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ChannelSection {
    pub model: ChannelKind,
    /// Mean azimuth per user, degrees. One entry broadcasts to every user;
    /// an empty list spreads the users evenly across `[-60, 60]`.
    pub azimuth_deg: Vec<f64>,
    pub angle_spread_deg: f64,
    /// Antenna spacing in wavelengths.
    pub spacing: f64,
    /// Doppler frequency normalized to the symbol rate.
    pub doppler: f64,
    /// RMS delay spread normalized to the symbol duration.
    pub delay_spread: f64,
    pub normalization: NormalizationChoice,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            model: ChannelKind::Kronecker,
            azimuth_deg: Vec::new(),
            angle_spread_deg: 10.0,
            spacing: 0.5,
            doppler: 0.01,
            delay_spread: 0.05,
            normalization: NormalizationChoice::SlotEnergy,
        }
    }
}

impl ChannelSection {
    /// Per-user azimuths after broadcasting / auto-spreading.
    pub fn resolved_azimuths(&self, users: usize) -> Vec<f64> {
        match self.azimuth_deg.len() {
            0 => (0..users)
                .map(|k| -60.0 + 120.0 * (k as f64 + 0.5) / users as f64)
                .collect(),
            1 => vec![self.azimuth_deg[0]; users],
            _ => self.azimuth_deg.clone(),
        }
    }

    /// Build the synthesis model for a grid (`Kronecker` only).
    pub fn to_model(&self, users: usize, antennas: usize) -> Result<ChannelModel> {
        let scattering = self
            .resolved_azimuths(users)
            .into_iter()
            .map(|az| ScatteringModel::new(antennas, az.to_radians(), self.angle_spread_deg.to_radians(), self.spacing))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelModel {
            scattering,
            selectivity: self.selectivity(),
            normalization: self.normalization.into(),
        })
    }

    pub fn selectivity(&self) -> TemporalSpectralModel {
        TemporalSpectralModel {
            doppler: self.doppler,
            delay_spread: self.delay_spread,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotLayoutChoice {
    /// One pilot pair per slot (adjacent symbols, shared comb).
    OnePilot,
    /// Two pilot pairs per slot, the second offset by half the slot.
    TwoPilot,
    /// Explicit `(user, symbol, subcarrier)` triples, 1-based.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct PilotSection {
    pub layout: PilotLayoutChoice,
    /// 1-based `(user, symbol, subcarrier)` triples; only read when
    /// `layout = "custom"`.
    pub custom: Vec<[usize; 3]>,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self {
            layout: PilotLayoutChoice::OnePilot,
            custom: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct SweepSection {
    /// SNR operating points, dB (`SNR = 10 log10(1 / sigma2)`).
    pub snr_db: Vec<f64>,
    /// Monte Carlo trials per SNR point.
    pub trials: usize,
    /// Extra seeded trials for empirical covariance estimation (downlink
    /// equivalent-channel statistics, `estimate-stats`).
    pub stats_trials: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: vec![0.0, 5.0, 10.0, 15.0],
            trials: 100,
            stats_trials: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationChoice {
    Spectral,
    SpectralTemporal,
}

impl From<InterpolationChoice> for InterpolationMode {
    fn from(i: InterpolationChoice) -> InterpolationMode {
        match i {
            InterpolationChoice::Spectral => InterpolationMode::Spectral,
            InterpolationChoice::SpectralTemporal => InterpolationMode::SpectralTemporal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct DecaySection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.9, gamma: 0.3 }
    }
}

impl DecaySection {
    pub fn to_params(self) -> PowerDecayParams {
        PowerDecayParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct EqualizerSection {
    pub group_symbols: usize,
    pub group_subcarriers: usize,
    pub csi_mode: CsiMode,
    pub interpolation: InterpolationChoice,
    pub llr_max: f64,
    /// Per-user pilot covariance files (as written by `estimate-stats`);
    /// when non-empty they replace the analytic model covariance in the
    /// `exact`, `nire`, and `decay` modes. One file per user.
    pub sigma_files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySection>,
}

impl Default for EqualizerSection {
    fn default() -> Self {
        Self {
            group_symbols: 2,
            group_subcarriers: 6,
            csi_mode: CsiMode::Exact,
            interpolation: InterpolationChoice::SpectralTemporal,
            llr_max: crate::demap::DEFAULT_LLR_MAX,
            sigma_files: Vec::new(),
            decay: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceRuleChoice {
    VerbatimL,
    ReducedK,
}

impl From<VarianceRuleChoice> for VarianceRule {
    fn from(v: VarianceRuleChoice) -> VarianceRule {
        match v {
            VarianceRuleChoice::VerbatimL => VarianceRule::VerbatimL,
            VarianceRuleChoice::ReducedK => VarianceRule::ReducedK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct DetectorSection {
    /// Detector parameter file; when absent the iterative detector runs a
    /// single LMMSE-equivalent iteration built from each draw.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params_file: Option<String>,
    pub variance_rule: VarianceRuleChoice,
    pub enable_ml: bool,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            params_file: None,
            variance_rule: VarianceRuleChoice::VerbatimL,
            enable_ml: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct WaveformSection {
    pub subcarriers: usize,
    pub oversampling: usize,
    pub symbol_duration: f64,
    pub cp_duration: f64,
    pub bits_per_symbol: usize,
    /// OFDM symbols in the measurement batch.
    pub symbols: usize,
    /// Quantile levels for the PAPR rows.
    pub epsilons: Vec<f64>,
    pub ccdf_points: usize,
    /// Reserved-tone counts for the tone-reservation comparison; `0` rows
    /// report the unreduced batch.
    pub tr_tones: Vec<usize>,
    pub tr_budget: usize,
}

impl Default for WaveformSection {
    fn default() -> Self {
        Self {
            subcarriers: 75,
            oversampling: 5,
            symbol_duration: 1.0,
            cp_duration: 0.0,
            bits_per_symbol: 4,
            symbols: 2000,
            epsilons: vec![0.0, 1e-2, 1e-3],
            ccdf_points: 100,
            tr_tones: vec![0, 4, 16],
            tr_budget: 100,
        }
    }
}

impl WaveformSection {
    pub fn to_waveform(&self) -> WaveformConfig {
        WaveformConfig {
            subcarriers: self.subcarriers,
            oversampling: self.oversampling,
            symbol_duration: self.symbol_duration,
            cp_duration: self.cp_duration,
        }
    }
}

/// One complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct SimConfig {
    /// Normally implied by the CLI subcommand; a value here must agree
    /// with it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub seed: u64,
    /// Output stem: reports land at `<out>.csv`, `<out>.summary.json`, ...
    pub out: String,
    pub grid: GridSection,
    pub channel: ChannelSection,
    pub pilots: PilotSection,
    pub sweep: SweepSection,
    pub equalizer: EqualizerSection,
    pub detector: DetectorSection,
    pub waveform: WaveformSection,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 0,
            out: "mulink-report".into(),
            grid: GridSection::default(),
            channel: ChannelSection::default(),
            pilots: PilotSection::default(),
            sweep: SweepSection::default(),
            equalizer: EqualizerSection::default(),
            detector: DetectorSection::default(),
            waveform: WaveformSection::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical serialization with all defaults filled in. Stable across
    /// reruns; the basis of the config hash and of round-tripping.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    /// FNV-1a hash of the canonical serialization, as 16 hex digits.
    pub fn hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.to_canonical_toml().as_bytes()))
    }

    /// Check every rule; the error lists all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if let Err(Error::InvalidConfig(msg)) = self.grid.to_grid(1.0).validate() {
            faults.push(format!("grid: {msg}"));
        }
        if self.sweep.snr_db.is_empty() {
            faults.push("sweep.snr-db: SNR list must be non-empty".into());
        }
        for (i, s) in self.sweep.snr_db.iter().enumerate() {
            if !s.is_finite() {
                faults.push(format!("sweep.snr-db[{i}]: {s} is not finite"));
            }
        }
        if self.sweep.trials == 0 {
            faults.push("sweep.trials: must be at least 1".into());
        }
        if self.sweep.stats_trials == 0 {
            faults.push("sweep.stats-trials: must be at least 1".into());
        }
        let users = self.grid.users;
        let az = self.channel.azimuth_deg.len();
        if az > 1 && az != users {
            faults.push(format!(
                "channel.azimuth-deg: {az} entries for {users} users (use 0, 1, or exactly K)"
            ));
        }
        if !(self.channel.angle_spread_deg > 0.0) {
            faults.push(format!(
                "channel.angle-spread-deg: {} must be positive",
                self.channel.angle_spread_deg
            ));
        }
        if !(self.channel.spacing > 0.0) {
            faults.push(format!("channel.spacing: {} must be positive", self.channel.spacing));
        }
        if !(self.channel.doppler >= 0.0) {
            faults.push(format!("channel.doppler: {} must be non-negative", self.channel.doppler));
        }
        if !(self.channel.delay_spread >= 0.0) {
            faults.push(format!(
                "channel.delay-spread: {} must be non-negative",
                self.channel.delay_spread
            ));
        }
        let link_scenario = matches!(
            self.scenario,
            None | Some(Scenario::Uplink) | Some(Scenario::Downlink)
        );
        if link_scenario
            && self.channel.model == ChannelKind::Awgn
            && self.equalizer.csi_mode != CsiMode::Perfect
        {
            faults.push(
                "equalizer.csi-mode: the static identity channel is for calibration and supports \
                 csi-mode = \"perfect\" only"
                    .into(),
            );
        }
        if self.pilots.layout == PilotLayoutChoice::Custom && self.pilots.custom.is_empty() {
            faults.push("pilots.custom: custom layout selected but no triples given".into());
        }
        for (i, t) in self.pilots.custom.iter().enumerate() {
            if t.iter().any(|&v| v == 0) {
                faults.push(format!(
                    "pilots.custom[{i}]: indices are 1-based; {t:?} contains a zero"
                ));
            }
        }
        if self.equalizer.group_symbols == 0 {
            faults.push("equalizer.group-symbols: must be at least 1".into());
        }
        if self.equalizer.group_subcarriers == 0 {
            faults.push("equalizer.group-subcarriers: must be at least 1".into());
        }
        if !(self.equalizer.llr_max > 0.0) {
            faults.push(format!("equalizer.llr-max: {} must be positive", self.equalizer.llr_max));
        }
        if !self.equalizer.sigma_files.is_empty() && self.equalizer.sigma_files.len() != users {
            faults.push(format!(
                "equalizer.sigma-files: {} files for {users} users (one per user)",
                self.equalizer.sigma_files.len()
            ));
        }
        if self.equalizer.csi_mode == CsiMode::Decay {
            match &self.equalizer.decay {
                None => faults.push(
                    "equalizer.decay: power-decay CSI mode needs an [equalizer.decay] section".into(),
                ),
                Some(d) => {
                    if let Err(Error::InvalidConfig(msg)) = d.to_params().validate() {
                        faults.push(format!("equalizer.decay: {msg}"));
                    }
                }
            }
        }
        let scenario = self.scenario;
        if scenario == Some(Scenario::Downlink) {
            if self.grid.duplex != DuplexChoice::UplinkDownlink {
                faults.push(
                    "grid.duplex: the downlink scenario needs duplex = \"uplink-downlink\"".into(),
                );
            }
            if self.equalizer.csi_mode == CsiMode::Decay {
                faults.push(
                    "equalizer.csi-mode: the power-decay model applies to the uplink sweep only"
                        .into(),
                );
            }
        }
        if scenario == Some(Scenario::Waveform) {
            if let Err(Error::InvalidConfig(msg)) = self.waveform.to_waveform().validate() {
                faults.push(format!("waveform: {msg}"));
            }
            if self.waveform.symbols == 0 {
                faults.push("waveform.symbols: must be at least 1".into());
            }
            if self.waveform.ccdf_points < 2 {
                faults.push("waveform.ccdf-points: need at least 2 points".into());
            }
            for (i, e) in self.waveform.epsilons.iter().enumerate() {
                if !(0.0..1.0).contains(e) {
                    faults.push(format!("waveform.epsilons[{i}]: {e} must lie in [0, 1)"));
                }
            }
            match Constellation::gray(self.waveform.bits_per_symbol) {
                Ok(_) => {}
                Err(e) => faults.push(format!("waveform.bits-per-symbol: {e}")),
            }
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(faults.join("; ")))
        }
    }

    /// Custom pilot triples converted to the crate's 0-based convention.
    pub fn custom_pilots_zero_based(&self) -> Vec<(usize, usize, usize)> {
        self.pilots
            .custom
            .iter()
            .map(|&[u, m, n]| (u - 1, m - 1, n - 1))
            .collect()
    }
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    SimConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg = SimConfig::from_toml_str("seed = 7\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.grid.symbols, 14);
        assert_eq!(cfg.sweep.trials, 100);
        assert_eq!(cfg.equalizer.csi_mode, CsiMode::Exact);
        // The canonical echo carries the filled defaults.
        let echo = cfg.to_canonical_toml();
        assert!(echo.contains("trials = 100"));
        assert!(echo.contains("csi-mode = \"exact\""));
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let err = SimConfig::from_toml_str("seed = 1\nspeed = 9\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let err = SimConfig::from_toml_str("[sweep]\ntrails = 10\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("trails"), "{msg}");
    }

    #[test]
    fn negative_trials_error_names_the_key() {
        let err = SimConfig::from_toml_str("[sweep]\ntrials = -5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("trials"), "{msg}");
    }

    #[test]
    fn validation_lists_every_violation_at_once() {
        let mut cfg = SimConfig::default();
        cfg.sweep.snr_db.clear();
        cfg.sweep.trials = 0;
        cfg.equalizer.llr_max = -1.0;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("snr-db"), "{msg}");
        assert!(msg.contains("trials"), "{msg}");
        assert!(msg.contains("llr-max"), "{msg}");
    }

    #[test]
    fn round_trip_reparses_to_an_equal_config() {
        let text = r#"
            seed = 42
            out = "runs/demo"

            [grid]
            symbols = 8
            subcarriers = 24
            users = 2
            antennas = 8
            bits-per-symbol = 4
            duplex = "uplink-downlink"

            [channel]
            azimuth-deg = [20.0, -35.0]
            doppler = 0.03

            [pilots]
            layout = "two-pilot"

            [sweep]
            snr-db = [0.0, 10.0]
            trials = 17

            [equalizer]
            csi-mode = "decay"
            [equalizer.decay]
            alpha = 0.4
        "#;
        let cfg = SimConfig::from_toml_str(text).unwrap();
        let echoed = SimConfig::from_toml_str(&cfg.to_canonical_toml()).unwrap();
        assert_eq!(cfg, echoed);
        assert_eq!(cfg.hash(), echoed.hash());
    }

    #[test]
    fn hash_tracks_semantic_changes_not_formatting() {
        let a = SimConfig::from_toml_str("seed = 1\n# comment\n").unwrap();
        let b = SimConfig::from_toml_str("\n\nseed   =   1\n").unwrap();
        let c = SimConfig::from_toml_str("seed = 2\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn downlink_scenario_requires_a_downlink_slot() {
        let mut cfg = SimConfig::default();
        cfg.scenario = Some(Scenario::Downlink);
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("duplex"), "{msg}");
        cfg.grid.duplex = DuplexChoice::UplinkDownlink;
        cfg.validate().unwrap();
    }

    #[test]
    fn custom_pilot_triples_are_one_based() {
        let mut cfg = SimConfig::default();
        cfg.pilots.layout = PilotLayoutChoice::Custom;
        cfg.pilots.custom = vec![[1, 3, 1], [1, 3, 2]];
        cfg.validate().unwrap();
        assert_eq!(cfg.custom_pilots_zero_based(), vec![(0, 2, 0), (0, 2, 1)]);
        cfg.pilots.custom.push([0, 1, 1]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn azimuth_broadcast_rules() {
        let mut ch = ChannelSection::default();
        assert_eq!(ch.resolved_azimuths(2).len(), 2);
        assert!(ch.resolved_azimuths(4)[0] < ch.resolved_azimuths(4)[3]);
        ch.azimuth_deg = vec![12.0];
        assert_eq!(ch.resolved_azimuths(3), vec![12.0; 3]);
    }

    #[test]
    fn csi_mode_parses_from_cli_strings() {
        assert_eq!("perfect".parse::<CsiMode>().unwrap(), CsiMode::Perfect);
        assert_eq!("nire".parse::<CsiMode>().unwrap(), CsiMode::Nire);
        assert!("genie".parse::<CsiMode>().is_err());
    }
}
