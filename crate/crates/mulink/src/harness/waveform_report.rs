//! Waveform scenario: PAPR quantiles and CCDF, analytic ACLR, a sampled
//! power-spectral-density curve, and the tone-reservation comparison at
//! several reserved-tone counts on shared data draws.

use rand::Rng;
use rayon::prelude::*;

use super::config::{Scenario, SimConfig};
use super::report::{MetricRow, SimReport};
use super::{STREAM_DATA, STREAM_PLACEMENT, TAG_WAVEFORM};
use crate::grid::Constellation;
use crate::linalg::CVec;
use crate::util::derive_rng;
use crate::waveform::{
    ToneReservationPlan, WaveformConfig, aclr, ccdf, inband_energy_matrix, oversampled_time_signal,
    papr_epsilon, random_prt_placement, sinc, tone_reservation, total_energy_matrix,
};
use crate::{Error, Result};

/// Quantile level used for the tone-reservation before/after rows.
const TR_EPSILON: f64 = 1e-3;
/// Symbols entering the (quadratic-cost) sampled PSD curve.
const PSD_SYMBOL_CAP: usize = 256;
/// PSD frequency grid step, in subcarrier spacings.
const PSD_STEP: f64 = 0.25;

/// Mean squared spectrum of the batch on a frequency grid in subcarrier
/// units: each tone contributes a `sinc` pulse widened by the cyclic
/// prefix ratio, and symbols are averaged incoherently.
fn sampled_psd(xs: &[CVec], wf: &WaveformConfig) -> Vec<(f64, f64)> {
    let n = wf.subcarriers;
    let r = wf.cp_ratio();
    let half = (n - 1) as f64 / 2.0;
    let take = xs.len().min(PSD_SYMBOL_CAP);
    let points = (2.0 * n as f64 / PSD_STEP) as usize + 1;
    (0..points)
        .into_par_iter()
        .map(|i| {
            let u = -(n as f64) + i as f64 * PSD_STEP;
            let mean = xs[..take]
                .iter()
                .map(|x| {
                    let mut amp = crate::linalg::C64::new(0.0, 0.0);
                    for (k, &xk) in x.iter().enumerate() {
                        let off = k as f64 - half;
                        amp += xk * crate::linalg::C64::new(sinc(r * (u - off)), 0.0);
                    }
                    amp.norm_sqr()
                })
                .sum::<f64>()
                / take as f64;
            (u, mean)
        })
        .collect()
}

/// PAPR, ACLR, CCDF, PSD, and tone-reservation metrics for one batch of
/// random constellation symbols.
pub fn run_waveform_report(cfg: &SimConfig) -> Result<SimReport> {
    let mut cfg = cfg.clone();
    cfg.scenario = Some(Scenario::Waveform);
    cfg.validate()?;
    let wf = cfg.waveform.to_waveform();
    let constellation = Constellation::gray(cfg.waveform.bits_per_symbol)?;
    let order = constellation.size();
    let n = wf.subcarriers;
    let batch = cfg.waveform.symbols;
    let mut report = SimReport::new(
        Scenario::Waveform,
        cfg.hash(),
        cfg.seed,
        cfg.to_canonical_toml(),
    );

    // One label vector per symbol; tone reservation reuses the same draws.
    let labels: Vec<Vec<usize>> = (0..batch)
        .map(|s| {
            let mut rng = derive_rng(cfg.seed, &[TAG_WAVEFORM, s as u64, STREAM_DATA, 0]);
            (0..n).map(|_| rng.random_range(0..order)).collect()
        })
        .collect();
    let xs: Vec<CVec> = labels
        .iter()
        .map(|row| CVec::from_fn(n, |i, _| constellation.point(row[i])))
        .collect();
    let zs: Vec<CVec> = xs
        .par_iter()
        .map(|x| oversampled_time_signal(x, wf.oversampling))
        .collect::<Result<_>>()?;

    for &eps in &cfg.waveform.epsilons {
        report.waveform_rows.push(MetricRow {
            metric: "papr-db".into(),
            param: format!("{eps:e}"),
            value: papr_epsilon(&zs, eps)?,
        });
    }
    report.ccdf = ccdf(&zs, cfg.waveform.ccdf_points)?;

    let j = inband_energy_matrix(&wf)?;
    let k = total_energy_matrix(&wf)?;
    let a = aclr(&xs, &j, &k)?;
    for (metric, value) in [
        ("aclr-db", a.db),
        ("aclr-linear", a.linear),
        ("mean-inband-energy", a.mean_inband),
        ("mean-total-energy", a.mean_total),
    ] {
        report.waveform_rows.push(MetricRow {
            metric: metric.into(),
            param: String::new(),
            value,
        });
    }

    report.psd = sampled_psd(&xs, &wf);

    for &r_tones in &cfg.waveform.tr_tones {
        if r_tones >= n {
            return Err(Error::InvalidConfig(format!(
                "waveform.tr-tones: {r_tones} reserved tones leave no data on {n} subcarriers"
            )));
        }
        let (plain_db, reduced_db) = if r_tones == 0 {
            let base = papr_epsilon(&zs, TR_EPSILON)?;
            (base, base)
        } else {
            let pairs: Vec<(CVec, CVec)> = (0..batch)
                .into_par_iter()
                .map(|s| -> Result<(CVec, CVec)> {
                    let mut rng = derive_rng(
                        cfg.seed,
                        &[TAG_WAVEFORM, s as u64, STREAM_PLACEMENT, r_tones as u64],
                    );
                    let prt = random_prt_placement(n, r_tones, &mut rng)?;
                    let plan = ToneReservationPlan::new(n, &prt)?;
                    let data: Vec<_> = labels[s][..n - r_tones]
                        .iter()
                        .map(|&lab| constellation.point(lab))
                        .collect();
                    let d = plan.embed_data(&data)?;
                    let outcome =
                        tone_reservation(&d, &plan, wf.oversampling, cfg.waveform.tr_budget)?;
                    debug_assert!(outcome.best_peak <= outcome.initial_peak);
                    let plain = oversampled_time_signal(&d, wf.oversampling)?;
                    let reduced = oversampled_time_signal(&(&d + &outcome.r), wf.oversampling)?;
                    Ok((plain, reduced))
                })
                .collect::<Result<_>>()?;
            let (plain_batch, reduced_batch): (Vec<CVec>, Vec<CVec>) = pairs.into_iter().unzip();
            (
                papr_epsilon(&plain_batch, TR_EPSILON)?,
                papr_epsilon(&reduced_batch, TR_EPSILON)?,
            )
        };
        for (metric, value) in [
            ("tr-plain-db", plain_db),
            ("tr-papr-db", reduced_db),
            ("tr-gain-db", plain_db - reduced_db),
        ] {
            report.waveform_rows.push(MetricRow {
                metric: metric.into(),
                param: r_tones.to_string(),
                value,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.seed = 5;
        cfg.waveform.subcarriers = 31;
        cfg.waveform.oversampling = 4;
        cfg.waveform.symbols = 40;
        cfg.waveform.epsilons = vec![0.0, 1e-2];
        cfg.waveform.ccdf_points = 20;
        cfg.waveform.tr_tones = vec![0, 4];
        cfg.waveform.tr_budget = 30;
        cfg
    }

    #[test]
    fn report_covers_every_metric_family() {
        let report = run_waveform_report(&small_cfg()).unwrap();
        let metrics: Vec<&str> =
            report.waveform_rows.iter().map(|r| r.metric.as_str()).collect();
        for want in [
            "papr-db",
            "aclr-db",
            "aclr-linear",
            "mean-inband-energy",
            "mean-total-energy",
            "tr-plain-db",
            "tr-papr-db",
            "tr-gain-db",
        ] {
            assert!(metrics.contains(&want), "missing {want}");
        }
        assert_eq!(report.ccdf.len(), 20);
        assert!(!report.psd.is_empty());
        // CCDF starts at probability 1 and ends at the max with ~0 mass above.
        assert!((report.ccdf[0].1 - 1.0).abs() < 1e-12);
        assert!(report.ccdf.last().unwrap().1 < 0.05);
    }

    #[test]
    fn reserving_tones_does_not_raise_the_quantile() {
        let report = run_waveform_report(&small_cfg()).unwrap();
        let gain = report
            .waveform_rows
            .iter()
            .find(|r| r.metric == "tr-gain-db" && r.param == "4")
            .unwrap()
            .value;
        assert!(gain >= 0.0, "gain {gain}");
    }

    #[test]
    fn psd_is_high_in_band_and_low_far_out() {
        let report = run_waveform_report(&small_cfg()).unwrap();
        let at = |u: f64| {
            report
                .psd
                .iter()
                .min_by(|a, b| {
                    (a.0 - u).abs().partial_cmp(&(b.0 - u).abs()).unwrap()
                })
                .unwrap()
                .1
        };
        assert!(at(0.0) > 10.0 * at(30.0), "center {} edge {}", at(0.0), at(30.0));
    }

    #[test]
    fn waveform_report_is_deterministic() {
        let cfg = small_cfg();
        let a = run_waveform_report(&cfg).unwrap();
        let b = run_waveform_report(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
    }
}
