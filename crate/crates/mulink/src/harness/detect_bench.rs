//! Flat-fading detector benchmark: LMMSE vs exact ML vs the iterative
//! detector, on shared channel and noise draws.
//!
//! Every trial draws one `L x K` channel (per-user local-scattering
//! columns), one symbol vector, and one noise vector; all detectors then
//! see exactly the same `y`. That makes the SER comparison paired, which
//! is what the dominance claims need.

use rand::Rng;
use rayon::prelude::*;

use super::config::{ChannelKind, Scenario, SimConfig};
use super::report::{AbortedPoint, DetectRow, SimReport};
use super::{STREAM_CHANNEL, STREAM_DATA, STREAM_NOISE, TAG_DETECT};
use crate::channel::ScatteringModel;
use crate::detect::{
    DetectorParams, ML_SEARCH_LIMIT_BITS, VarianceRule, detect_iterative, hard_decision,
    lmmse_detect, ml_detect, qr_reduce,
};
use crate::grid::{Constellation, GridConfig};
use crate::linalg::{C64, CMat, CVec, cn01};
use crate::util::derive_rng;
use crate::{Error, Result};

const DETECTOR_NAMES: [&str; 3] = ["lmmse", "ml", "iterative"];

struct BenchContext {
    cfg: SimConfig,
    users: usize,
    antennas: usize,
    constellation: Constellation,
    scattering: Option<Vec<ScatteringModel>>,
    params: Option<DetectorParams>,
    rule: VarianceRule,
    ml_enabled: bool,
}

impl BenchContext {
    fn build(cfg: &SimConfig) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.scenario = Some(Scenario::DetectBench);
        cfg.validate()?;
        let (users, antennas, q) = (cfg.grid.users, cfg.grid.antennas, cfg.grid.bits_per_symbol);
        let constellation = Constellation::gray(q)?;
        let ml_enabled = cfg.detector.enable_ml;
        if ml_enabled && q * users > ML_SEARCH_LIMIT_BITS {
            return Err(Error::SearchSpaceTooLarge {
                bits: q * users,
                limit: ML_SEARCH_LIMIT_BITS,
            });
        }
        let scattering = match cfg.channel.model {
            ChannelKind::Awgn => None,
            ChannelKind::Kronecker => Some(
                cfg.channel
                    .resolved_azimuths(users)
                    .into_iter()
                    .map(|az| {
                        ScatteringModel::new(
                            antennas,
                            az.to_radians(),
                            cfg.channel.angle_spread_deg.to_radians(),
                            cfg.channel.spacing,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let params = match &cfg.detector.params_file {
            None => None,
            Some(path) => {
                let f = std::fs::File::open(path).map_err(|e| {
                    Error::Io(std::io::Error::new(e.kind(), format!("{path}: {e}")))
                })?;
                let p = DetectorParams::load(std::io::BufReader::new(f))?;
                p.validate()?;
                if p.streams() != users {
                    return Err(Error::DimensionMismatch(format!(
                        "{path}: parameter file is for K={} streams, config has K={users}",
                        p.streams()
                    )));
                }
                Some(p)
            }
        };
        let rule = cfg.detector.variance_rule.into();
        Ok(Self {
            cfg,
            users,
            antennas,
            constellation,
            scattering,
            params,
            rule,
            ml_enabled,
        })
    }

    fn draw_channel<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        match &self.scattering {
            Some(models) => {
                let mut h = CMat::zeros(self.antennas, self.users);
                for (k, model) in models.iter().enumerate() {
                    h.set_column(k, &model.sample(rng));
                }
                h
            }
            None => CMat::from_fn(self.antennas, self.users, |a, k| {
                if a == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
            }),
        }
    }
}

#[derive(Clone, Default)]
struct DetectorCounts {
    symbol_errors: u64,
    bit_errors: u64,
}

fn count_errors(
    c: &Constellation,
    truth: &[usize],
    decided: &[usize],
    counts: &mut DetectorCounts,
) {
    for (&t, &d) in truth.iter().zip(decided) {
        if t != d {
            counts.symbol_errors += 1;
        }
        for q in 0..c.bits_per_symbol() {
            if c.bit(t, q) != c.bit(d, q) {
                counts.bit_errors += 1;
            }
        }
    }
}

fn bench_trial(
    ctx: &BenchContext,
    sigma2: f64,
    point: usize,
    trial: usize,
) -> Result<[DetectorCounts; 3]> {
    let (k_users, l) = (ctx.users, ctx.antennas);
    let order = ctx.constellation.size();
    let tags = |purpose: u64| [TAG_DETECT, point as u64, trial as u64, purpose];
    let mut rng_ch = derive_rng(ctx.cfg.seed, &tags(STREAM_CHANNEL));
    let mut rng_data = derive_rng(ctx.cfg.seed, &tags(STREAM_DATA));
    let mut rng_noise = derive_rng(ctx.cfg.seed, &tags(STREAM_NOISE));

    let h = ctx.draw_channel(&mut rng_ch);
    let truth: Vec<usize> = (0..k_users).map(|_| rng_data.random_range(0..order)).collect();
    let x = CVec::from_fn(k_users, |k, _| ctx.constellation.point(truth[k]));
    let mut y = &h * x;
    let sigma = sigma2.sqrt();
    for a in 0..l {
        y[a] += cn01(&mut rng_noise) * C64::new(sigma, 0.0);
    }

    let mut out: [DetectorCounts; 3] = Default::default();
    let lmmse = hard_decision(&lmmse_detect(&h, &y, sigma2)?, &ctx.constellation);
    count_errors(&ctx.constellation, &truth, &lmmse, &mut out[0]);
    if ctx.ml_enabled {
        let ml = ml_detect(&h, &y, &ctx.constellation)?;
        count_errors(&ctx.constellation, &truth, &ml, &mut out[1]);
    }
    let iterative = match &ctx.params {
        Some(p) => detect_iterative(&h, &y, p, sigma2, ctx.rule, &ctx.constellation)?,
        None => {
            // No parameter file: run the single LMMSE-equivalent iteration
            // built from this draw's reduced channel.
            let qr = qr_reduce(&h, &y)?;
            let p = DetectorParams::lmmse_equivalent(&qr.r, sigma2)?;
            detect_iterative(&h, &y, &p, sigma2, ctx.rule, &ctx.constellation)?
        }
    };
    count_errors(&ctx.constellation, &truth, &iterative, &mut out[2]);
    Ok(out)
}

/// SER/BER vs SNR for the three detectors on shared draws.
pub fn run_detector_bench(cfg: &SimConfig) -> Result<SimReport> {
    let ctx = BenchContext::build(cfg)?;
    let mut report = SimReport::new(
        Scenario::DetectBench,
        ctx.cfg.hash(),
        ctx.cfg.seed,
        ctx.cfg.to_canonical_toml(),
    );
    let trials = ctx.cfg.sweep.trials;
    for (p, &snr_db) in ctx.cfg.sweep.snr_db.iter().enumerate() {
        let sigma2 = GridConfig::sigma2_from_snr_db(snr_db);
        let results: Vec<Result<[DetectorCounts; 3]>> = (0..trials)
            .into_par_iter()
            .map(|t| bench_trial(&ctx, sigma2, p, t))
            .collect();
        let mut agg: [DetectorCounts; 3] = Default::default();
        let mut failure = None;
        for r in results {
            match r {
                Ok(counts) => {
                    for (a, c) in agg.iter_mut().zip(&counts) {
                        a.symbol_errors += c.symbol_errors;
                        a.bit_errors += c.bit_errors;
                    }
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failure {
            let mut a = AbortedPoint::from(&e);
            a.snr_db = snr_db;
            report.aborted.push(a);
            continue;
        }
        let total_symbols = (trials * ctx.users) as u64;
        let total_bits = total_symbols * ctx.constellation.bits_per_symbol() as u64;
        for (d, name) in DETECTOR_NAMES.iter().enumerate() {
            if d == 1 && !ctx.ml_enabled {
                continue;
            }
            report.detect_rows.push(DetectRow {
                snr_db,
                detector: (*name).into(),
                trials,
                total_symbols,
                symbol_errors: agg[d].symbol_errors,
                ser: agg[d].symbol_errors as f64 / total_symbols as f64,
                total_bits,
                bit_errors: agg[d].bit_errors,
                ber: agg[d].bit_errors as f64 / total_bits as f64,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench_cfg() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.seed = 21;
        cfg.grid.users = 2;
        cfg.grid.antennas = 4;
        cfg.grid.bits_per_symbol = 2;
        cfg.channel.angle_spread_deg = 10.0;
        cfg.sweep.snr_db = vec![5.0];
        cfg.sweep.trials = 200;
        cfg
    }

    #[test]
    fn noiseless_bench_has_zero_errors_everywhere() {
        let mut cfg = bench_cfg();
        cfg.sweep.snr_db = vec![300.0];
        cfg.sweep.trials = 50;
        let report = run_detector_bench(&cfg).unwrap();
        assert!(report.aborted.is_empty(), "{:?}", report.aborted);
        assert_eq!(report.detect_rows.len(), 3);
        for row in &report.detect_rows {
            assert_eq!(row.symbol_errors, 0, "{}", row.detector);
        }
    }

    #[test]
    fn ml_never_does_worse_than_lmmse_on_shared_draws() {
        let report = run_detector_bench(&bench_cfg()).unwrap();
        let ser = |name: &str| {
            report
                .detect_rows
                .iter()
                .find(|r| r.detector == name)
                .unwrap()
                .ser
        };
        assert!(ser("ml") <= ser("lmmse") + 1e-12, "ml {} lmmse {}", ser("ml"), ser("lmmse"));
    }

    #[test]
    fn default_iterative_detector_equals_lmmse_rows() {
        // Without a parameter file the iterative path is the
        // LMMSE-equivalent single iteration: identical decisions.
        let report = run_detector_bench(&bench_cfg()).unwrap();
        let find = |name: &str| report.detect_rows.iter().find(|r| r.detector == name).unwrap();
        assert_eq!(find("iterative").symbol_errors, find("lmmse").symbol_errors);
        assert_eq!(find("iterative").bit_errors, find("lmmse").bit_errors);
    }

    #[test]
    fn ml_search_guard_applies_at_build() {
        let mut cfg = bench_cfg();
        cfg.grid.users = 4;
        cfg.grid.bits_per_symbol = 6; // 24 bits > 20
        assert!(matches!(
            run_detector_bench(&cfg),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
        cfg.detector.enable_ml = false;
        cfg.sweep.trials = 5;
        let report = run_detector_bench(&cfg).unwrap();
        assert!(report.detect_rows.iter().all(|r| r.detector != "ml"));
    }

    #[test]
    fn parameter_file_stream_mismatch_is_an_error() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("mulink-bench-params-{}.txt", std::process::id()));
        // A valid 3-stream, 1-iteration file; bench wants K=2.
        let mut text = String::from("3 1\n");
        for _ in 0..3 {
            for _ in 0..3 {
                text.push_str("1 0 ");
            }
            text.push('\n');
        }
        text.push_str("0 0 0\n");
        text.push_str("1 1 1\n");
        std::fs::write(&path, text).unwrap();
        let mut cfg = bench_cfg();
        cfg.detector.params_file = Some(path.to_string_lossy().into_owned());
        let err = run_detector_bench(&cfg).unwrap_err().to_string();
        assert!(err.contains("K=3"), "{err}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn bench_is_deterministic() {
        let cfg = bench_cfg();
        let a = run_detector_bench(&cfg).unwrap();
        let b = run_detector_bench(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
