//! Empirical covariance estimation and the matrix file format.
//!
//! `estimate-stats` draws seeded frames and writes the second-moment
//! matrices the estimators consume: the per-user pilot covariance of the
//! raw channel (`Sigma`), and — when the frame has a downlink slot — the
//! equivalent-channel statistics over the mirrored pilot lattices
//! (`Omega` for a user's own coefficient, `Psi` per interferer).
//!
//! The file format is plain text: `#` comment lines, then one header line
//! `rows cols vectorization-order`, then `rows x cols` lines of
//! `re im` in row-major order. The order token records how the random
//! vector behind the matrix was stacked, so a file is interpretable
//! without the config that produced it.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{DuplexChoice, Scenario, SimConfig};
use super::link::{LinkContext, PointPre};
use super::report::fmt_f64;
use super::{STREAM_CHANNEL, TAG_STATS};
use crate::chanest::empirical_covariance;
use crate::grid::GridConfig;
use crate::linalg::{C64, CMat, CVec};
use crate::util::derive_rng;
use crate::{Error, Result};

/// Vectorization-order token for channel pilot covariances: pilot REs in
/// lattice order (symbol slowest), antennas fastest.
pub const ORDER_PILOT_SPATIAL: &str = "symbol-subcarrier-antenna";
/// Order token for scalar per-RE series (equivalent-channel coefficients).
pub const ORDER_PILOT_SCALAR: &str = "symbol-subcarrier";

/// Write a complex matrix with a dimension/order header.
pub fn save_matrix_file(path: &Path, m: &CMat, order: &str, comment: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# {comment}")?;
    writeln!(f, "# rows cols vectorization")?;
    writeln!(f, "{} {} {}", m.nrows(), m.ncols(), order)?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            writeln!(f, "{} {}", fmt_f64(m[(r, c)].re), fmt_f64(m[(r, c)].im))?;
        }
    }
    Ok(())
}

/// Read a matrix file back: `(matrix, vectorization order)`.
pub fn load_matrix_file(path: &Path) -> Result<(CMat, String)> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut lines = std::io::BufReader::new(f).lines();
    let header = loop {
        match lines.next() {
            None => return Err(Error::Parse(format!("{}: no header line", path.display()))),
            Some(line) => {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                break t.to_string();
            }
        }
    };
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: header must start with row count", path.display())))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: header missing column count", path.display())))?;
    let order = parts
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: header missing vectorization order", path.display())))?
        .to_string();
    if let Some(extra) = parts.next() {
        return Err(Error::Parse(format!("{}: unexpected header token {extra:?}", path.display())));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut nums = t.split_whitespace();
        let re: f64 = nums
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("{}: bad entry line {t:?}", path.display())))?;
        let im: f64 = nums
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("{}: entry line {t:?} lacks an imaginary part", path.display())))?;
        if let Some(extra) = nums.next() {
            return Err(Error::Parse(format!(
                "{}: trailing token {extra:?} on entry line",
                path.display()
            )));
        }
        values.push(C64::new(re, im));
        if values.len() > rows * cols {
            break;
        }
    }
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "{}: expected {} entries for a {rows}x{cols} matrix, found {}",
            path.display(),
            rows * cols,
            values.len()
        )));
    }
    Ok((CMat::from_fn(rows, cols, |r, c| values[r * cols + c]), order))
}

#[derive(Debug, Serialize)]
pub struct StatsManifest {
    pub config_hash: String,
    pub seed: u64,
    pub stats_trials: usize,
    /// SNR point the downlink statistics were estimated at, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dl_snr_db: Option<f64>,
    pub files: Vec<String>,
}

/// Build empirical `Sigma` (always) and `Omega`/`Psi` (when the frame has
/// a downlink slot) from seeded channel draws, and write them under the
/// config's output stem. Returns the files written, manifest last.
pub fn run_estimate_stats(cfg: &SimConfig) -> Result<Vec<PathBuf>> {
    // The pipeline pieces are scenario-agnostic; validate as uplink, the
    // least demanding scenario, unless the config insists otherwise.
    let scenario = cfg.scenario.unwrap_or(Scenario::Uplink);
    let ctx = LinkContext::build(cfg, scenario)?;
    let grid = &ctx.grid;
    let trials = ctx.cfg.sweep.stats_trials;
    let k_users = grid.users;

    // Empirical pilot covariance of the true channel, per user.
    let draws: Vec<Vec<CVec>> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = derive_rng(ctx.cfg.seed, &[TAG_STATS, 0, j as u64, STREAM_CHANNEL]);
            let h = ctx.draw_channel(&mut rng);
            (0..k_users)
                .map(|k| {
                    let positions = ctx.pattern.user_positions(k);
                    let mut v = CVec::zeros(positions.len() * grid.antennas);
                    for (p, &(m, n)) in positions.iter().enumerate() {
                        for a in 0..grid.antennas {
                            v[p * grid.antennas + a] = h.get(m, n, a, k);
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();

    let out = &ctx.cfg.out;
    let mut files = Vec::new();
    for k in 0..k_users {
        let samples: Vec<CVec> = draws.iter().map(|d| d[k].clone()).collect();
        let sigma = empirical_covariance(&samples)?;
        let path = PathBuf::from(format!("{out}.sigma.user{}.cov", k + 1));
        save_matrix_file(
            &path,
            &sigma,
            ORDER_PILOT_SPATIAL,
            &format!("empirical pilot covariance, user {} of {k_users}, {trials} draws", k + 1),
        )?;
        files.push(path);
    }

    // Downlink equivalent-channel statistics at the first SNR point.
    let mut dl_snr_db = None;
    if ctx.cfg.grid.duplex == DuplexChoice::UplinkDownlink && ctx.csi != super::config::CsiMode::Perfect {
        let snr_db = ctx.cfg.sweep.snr_db[0];
        dl_snr_db = Some(snr_db);
        let pre = PointPre::build(&ctx, GridConfig::sigma2_from_snr_db(snr_db))?;
        let dl = super::link::dl_stats_pass(&ctx, &pre, 0)?;
        for k in 0..k_users {
            let path = PathBuf::from(format!("{out}.omega.user{}.cov", k + 1));
            save_matrix_file(
                &path,
                &dl.omega[k],
                ORDER_PILOT_SCALAR,
                &format!(
                    "empirical equivalent-channel second moment, user {} own coefficient, {trials} draws at {snr_db} dB",
                    k + 1
                ),
            )?;
            files.push(path);
            for i in 0..k_users {
                if let Some(psi) = &dl.psi[k][i] {
                    let path = PathBuf::from(format!("{out}.psi.user{}.from{}.cov", k + 1, i + 1));
                    save_matrix_file(
                        &path,
                        psi,
                        ORDER_PILOT_SCALAR,
                        &format!(
                            "empirical equivalent-channel second moment, user {} observing interferer {}, {trials} draws at {snr_db} dB",
                            k + 1,
                            i + 1
                        ),
                    )?;
                    files.push(path);
                }
            }
        }
    }

    let manifest = StatsManifest {
        config_hash: ctx.cfg.hash(),
        seed: ctx.cfg.seed,
        stats_trials: trials,
        dl_snr_db,
        files: files.iter().map(|p| p.to_string_lossy().into_owned()).collect(),
    };
    let manifest_path = PathBuf::from(format!("{out}.stats.json"));
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail"),
    )?;
    files.push(manifest_path);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cn01_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn temp_path(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("mulink-stats-{}-{name}", std::process::id()))
    }

    #[test]
    fn matrix_file_round_trips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = cn01_matrix(5, 3, &mut rng);
        let path = temp_path("roundtrip.cov");
        save_matrix_file(&path, &m, ORDER_PILOT_SPATIAL, "test matrix").unwrap();
        let (back, order) = load_matrix_file(&path).unwrap();
        assert_eq!(order, ORDER_PILOT_SPATIAL);
        assert_eq!(back, m); // {:.17e} preserves f64 exactly
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn matrix_file_rejects_malformed_input() {
        let path = temp_path("bad.cov");
        // Truncated: claims 2x2 but carries 3 entries.
        std::fs::write(&path, "2 2 symbol-subcarrier\n1 0\n2 0\n3 0\n").unwrap();
        assert!(matches!(load_matrix_file(&path), Err(Error::Parse(_))));
        // Trailing token on an entry line.
        std::fs::write(&path, "1 1 order\n1 0 extra\n").unwrap();
        assert!(matches!(load_matrix_file(&path), Err(Error::Parse(_))));
        // Missing order token.
        std::fs::write(&path, "1 1\n1 0\n").unwrap();
        assert!(matches!(load_matrix_file(&path), Err(Error::Parse(_))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn estimate_stats_writes_sigma_files_matching_the_model() {
        use crate::chanest::model_pilot_covariance;
        use crate::harness::config::NormalizationChoice;
        use crate::linalg::rel_frobenius;

        let mut cfg = SimConfig::default();
        cfg.seed = 3;
        cfg.grid.symbols = 4;
        cfg.grid.subcarriers = 4;
        cfg.grid.users = 2;
        cfg.grid.antennas = 2;
        cfg.sweep.stats_trials = 4000;
        cfg.channel.normalization = NormalizationChoice::ExpectationOnly;
        cfg.out = temp_path("run").to_string_lossy().into_owned();
        let files = run_estimate_stats(&cfg).unwrap();
        // 2 sigma files + manifest.
        assert_eq!(files.len(), 3);
        let (sigma, order) = load_matrix_file(&files[0]).unwrap();
        assert_eq!(order, ORDER_PILOT_SPATIAL);

        let grid = cfg.grid.to_grid(1.0);
        let pattern = crate::grid::PilotPattern::comb(&grid, crate::grid::CombLayout::OneP).unwrap();
        let model = cfg.channel.to_model(2, 2).unwrap();
        let truth = model_pilot_covariance(&model.scattering[0], &cfg.channel.selectivity(), &pattern, 0);
        assert_eq!(sigma.nrows(), truth.nrows());
        let err = rel_frobenius(&sigma, &truth);
        assert!(err < 0.15, "empirical vs model covariance: {err}");
        for f in files {
            std::fs::remove_file(f).ok();
        }
    }
}
