//! Run results and their on-disk forms.
//!
//! CSV is the primary output — one schema per scenario, every row prefixed
//! with the config hash so detached files keep their provenance. A JSON
//! summary mirrors the same rows plus the canonical config echo. All
//! floats use a fixed `{:.17e}` rendering, which makes "same config, same
//! seed, same bytes" checkable with `cmp`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Scenario;
use crate::{Error, Result};

/// One (SNR point, user) row of a link sweep.
#[derive(Debug, Clone, Serialize)]
pub struct LinkRow {
    pub snr_db: f64,
    /// 0-based internally; rendered 1-based in files.
    pub user: usize,
    pub trials: usize,
    /// Data REs carried by one slot for this user.
    pub data_res: usize,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub total_symbols: u64,
    pub symbol_errors: u64,
    pub ser: f64,
    /// Mean post-equalization variance (`rho^2` uplink, `tau^2` downlink).
    pub mean_noise_var: f64,
    /// Mean per-slot achievable rate `C_k`, bits.
    pub rate_bits: f64,
    /// `C_k / (Card(D) * Q)`.
    pub rate_fraction: f64,
    /// Data-RE fraction of the slot.
    pub data_re_fraction: f64,
    /// `rho * Q * (1 - BER)` with unit code rate.
    pub goodput: f64,
}

/// One (SNR point, detector) row of a detector benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct DetectRow {
    pub snr_db: f64,
    pub detector: String,
    pub trials: usize,
    pub total_symbols: u64,
    pub symbol_errors: u64,
    pub ser: f64,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

/// One scalar metric of a waveform report.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub metric: String,
    /// Free-form qualifier: the quantile level for PAPR rows, the reserved
    /// tone count for TR rows, empty otherwise.
    pub param: String,
    pub value: f64,
}

/// A point that failed: the sweep aborts the point and reports why.
#[derive(Debug, Clone, Serialize)]
pub struct AbortedPoint {
    pub snr_db: f64,
    pub kind: String,
    pub message: String,
}

/// Everything one run produced.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub scenario: Scenario,
    pub config_hash: String,
    pub seed: u64,
    /// Canonical config with defaults filled in.
    pub config_echo: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub link_rows: Vec<LinkRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub detect_rows: Vec<DetectRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub waveform_rows: Vec<MetricRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub aborted: Vec<AbortedPoint>,
    /// `(threshold, P(power ratio > threshold))` pairs.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ccdf: Vec<(f64, f64)>,
    /// `(subcarrier offset, power density)` pairs.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub psd: Vec<(f64, f64)>,
}

impl SimReport {
    pub fn new(scenario: Scenario, config_hash: String, seed: u64, config_echo: String) -> Self {
        Self {
            scenario,
            config_hash,
            seed,
            config_echo,
            link_rows: Vec::new(),
            detect_rows: Vec::new(),
            waveform_rows: Vec::new(),
            aborted: Vec::new(),
            ccdf: Vec::new(),
            psd: Vec::new(),
        }
    }

    /// Render the primary CSV for this scenario.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let hash = &self.config_hash;
        match self.scenario {
            Scenario::Uplink | Scenario::Downlink => {
                s.push_str(
                    "config_hash,seed,snr_db,user,trials,data_res,total_bits,bit_errors,ber,\
                     total_symbols,symbol_errors,ser,mean_noise_var,rate_bits,rate_fraction,\
                     data_re_fraction,goodput,status\n",
                );
                for r in &self.link_rows {
                    s.push_str(&format!(
                        "{hash},{},{:.17e},{},{},{},{},{},{:.17e},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},ok\n",
                        self.seed,
                        r.snr_db,
                        r.user + 1,
                        r.trials,
                        r.data_res,
                        r.total_bits,
                        r.bit_errors,
                        r.ber,
                        r.total_symbols,
                        r.symbol_errors,
                        r.ser,
                        r.mean_noise_var,
                        r.rate_bits,
                        r.rate_fraction,
                        r.data_re_fraction,
                        r.goodput,
                    ));
                }
                for a in &self.aborted {
                    s.push_str(&format!(
                        "{hash},{},{:.17e},,,,,,,,,,,,,,,error:{}\n",
                        self.seed, a.snr_db, a.kind
                    ));
                }
            }
            Scenario::DetectBench => {
                s.push_str(
                    "config_hash,seed,snr_db,detector,trials,total_symbols,symbol_errors,ser,\
                     total_bits,bit_errors,ber,status\n",
                );
                for r in &self.detect_rows {
                    s.push_str(&format!(
                        "{hash},{},{:.17e},{},{},{},{},{:.17e},{},{},{:.17e},ok\n",
                        self.seed,
                        r.snr_db,
                        r.detector,
                        r.trials,
                        r.total_symbols,
                        r.symbol_errors,
                        r.ser,
                        r.total_bits,
                        r.bit_errors,
                        r.ber,
                    ));
                }
                for a in &self.aborted {
                    s.push_str(&format!(
                        "{hash},{},{:.17e},,,,,,,,,error:{}\n",
                        self.seed, a.snr_db, a.kind
                    ));
                }
            }
            Scenario::Waveform => {
                s.push_str("config_hash,seed,metric,param,value\n");
                for r in &self.waveform_rows {
                    s.push_str(&format!(
                        "{hash},{},{},{},{:.17e}\n",
                        self.seed, r.metric, r.param, r.value
                    ));
                }
                for a in &self.aborted {
                    s.push_str(&format!("{hash},{},error:{},,0\n", self.seed, a.kind));
                }
            }
        }
        s
    }

    /// Two-column CSV of `(value, probability)` / `(value, density)` pairs.
    fn two_column_csv(header: (&str, &str), rows: &[(f64, f64)]) -> String {
        let mut s = format!("{},{}\n", header.0, header.1);
        for (a, b) in rows {
            s.push_str(&format!("{a:.17e},{b:.17e}\n"));
        }
        s
    }

    /// The JSON summary: the full report, config echo included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Write every output file for this report under the given stem.
    /// Returns the paths written.
    pub fn write_files(&self, out_stem: &str) -> Result<Vec<PathBuf>> {
        let stem = Path::new(out_stem);
        if let Some(dir) = stem.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut written = Vec::new();
        let mut emit = |suffix: &str, content: &str| -> Result<()> {
            let path = PathBuf::from(format!("{out_stem}{suffix}"));
            let mut f = std::fs::File::create(&path)?;
            f.write_all(content.as_bytes())?;
            written.push(path);
            Ok(())
        };
        emit(".csv", &self.to_csv())?;
        emit(".summary.json", &self.to_json())?;
        if !self.ccdf.is_empty() {
            emit(".ccdf.csv", &Self::two_column_csv(("threshold", "probability"), &self.ccdf))?;
        }
        if !self.psd.is_empty() {
            emit(".psd.csv", &Self::two_column_csv(("subcarrier_offset", "power_density"), &self.psd))?;
        }
        Ok(written)
    }
}

/// Standard formatting helper shared by the matrix-file writer.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

impl From<&Error> for AbortedPoint {
    fn from(e: &Error) -> Self {
        AbortedPoint {
            snr_db: f64::NAN,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> SimReport {
        let mut r = SimReport::new(Scenario::Uplink, "00ff".into(), 9, "seed = 9".into());
        r.link_rows.push(LinkRow {
            snr_db: 5.0,
            user: 0,
            trials: 10,
            data_res: 144,
            total_bits: 2880,
            bit_errors: 12,
            ber: 12.0 / 2880.0,
            total_symbols: 1440,
            symbol_errors: 12,
            ser: 12.0 / 1440.0,
            mean_noise_var: 0.3,
            rate_bits: 280.0,
            rate_fraction: 280.0 / 288.0,
            data_re_fraction: 144.0 / 168.0,
            goodput: 1.7,
        });
        r
    }

    #[test]
    fn csv_rows_carry_hash_and_one_based_users() {
        let r = sample_report();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("config_hash,seed,snr_db,user"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("00ff,9,"));
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[3], "1"); // user 0 renders as 1
        assert_eq!(cols.last().unwrap(), &"ok");
    }

    #[test]
    fn aborted_points_become_tagged_rows() {
        let mut r = sample_report();
        r.aborted.push(AbortedPoint {
            snr_db: 99.0,
            kind: "singular".into(),
            message: "boom".into(),
        });
        let csv = r.to_csv();
        let tagged: Vec<&str> = csv.lines().filter(|l| l.ends_with("error:singular")).collect();
        assert_eq!(tagged.len(), 1);
        // Same column count as regular rows, so parsers stay happy.
        assert_eq!(
            tagged[0].split(',').count(),
            csv.lines().next().unwrap().split(',').count()
        );
    }

    #[test]
    fn json_summary_echoes_the_config() {
        let r = sample_report();
        let json = r.to_json();
        assert!(json.contains("\"config_echo\": \"seed = 9\""));
        assert!(json.contains("\"link_rows\""));
    }

    #[test]
    fn files_land_under_the_stem() {
        let dir = std::env::temp_dir().join(format!("mulink-report-test-{}", std::process::id()));
        let stem = dir.join("run1").to_string_lossy().into_owned();
        let mut r = sample_report();
        r.ccdf = vec![(0.0, 1.0), (2.0, 0.25)];
        let files = r.write_files(&stem).unwrap();
        assert_eq!(files.len(), 3);
        for f in &files {
            assert!(f.exists(), "{f:?}");
        }
        let ccdf = std::fs::read_to_string(&files[2]).unwrap();
        assert!(ccdf.starts_with("threshold,probability\n"));
        std::fs::remove_dir_all(dir).ok();
    }
}
