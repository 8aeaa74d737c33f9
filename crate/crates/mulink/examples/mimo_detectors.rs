//! Flat-channel MIMO detection: LMMSE, exact ML, and the iterative
//! detector run on identical draws.
//!
//! Prints a small SER-vs-SNR table. The iterative detector runs with its
//! single-iteration LMMSE-equivalent parameterization, so its column
//! reproduces the LMMSE one exactly — the point of that parameterization
//! is to make one iteration of the unfolded detector coincide with the
//! classic filter. ML pays an exhaustive search and sets the floor.
//!
//! Run with: `cargo run --release --example mimo_detectors`

use mulink::channel::ScatteringModel;
use mulink::detect::{
    DetectorParams, ML_SEARCH_LIMIT_BITS, VarianceRule, detect_iterative, hard_decision,
    lmmse_detect, ml_detect, qr_reduce,
};
use mulink::grid::{Constellation, GridConfig};
use mulink::linalg::{CMat, CVec, cn01};
use mulink::util::derive_rng;
use rand::Rng;

fn main() -> mulink::Result<()> {
    let (users, antennas) = (2usize, 4usize);
    let constellation = Constellation::gray(2)?;
    let models: Vec<ScatteringModel> = (0..users)
        .map(|k| {
            ScatteringModel::new(
                antennas,
                (-40.0 + 80.0 * k as f64).to_radians(),
                10f64.to_radians(),
                0.5,
            )
        })
        .collect::<mulink::Result<_>>()?;

    let trials = 20_000;
    println!("QPSK, K = {users}, L = {antennas}, {trials} draws per point\n");
    println!("{:>7} {:>10} {:>10} {:>10}", "SNR dB", "LMMSE", "iterative", "ML");
    for snr_db in [0.0, 5.0, 10.0] {
        let sigma2 = GridConfig::sigma2_from_snr_db(snr_db);
        let mut errs = [0u64; 3];
        let mut rng = derive_rng(1234, &[snr_db as u64]);
        for _ in 0..trials {
            let mut h = CMat::zeros(antennas, users);
            for (k, m) in models.iter().enumerate() {
                h.set_column(k, &m.sample(&mut rng));
            }
            let truth: Vec<usize> =
                (0..users).map(|_| rng.random_range(0..constellation.size())).collect();
            let x = CVec::from_fn(users, |k, _| constellation.point(truth[k]));
            let mut y = &h * x;
            for l in 0..antennas {
                y[l] += cn01(&mut rng) * sigma2.sqrt();
            }

            let lmmse = hard_decision(&lmmse_detect(&h, &y, sigma2)?, &constellation);
            // The same decision, phrased as one unfolded iteration on the
            // QR-reduced instance.
            let qr = qr_reduce(&h, &y)?;
            let params = DetectorParams::lmmse_equivalent(&qr.r, sigma2)?;
            let iterative =
                detect_iterative(&h, &y, &params, sigma2, VarianceRule::VerbatimL, &constellation)?;
            let ml = ml_detect(&h, &y, &constellation)?;

            for (e, decided) in errs.iter_mut().zip([&lmmse, &iterative, &ml]) {
                *e += truth.iter().zip(decided.iter()).filter(|(t, d)| t != d).count() as u64;
            }
        }
        let total = (trials * users) as f64;
        println!(
            "{:>7.0} {:>10.5} {:>10.5} {:>10.5}",
            snr_db,
            errs[0] as f64 / total,
            errs[1] as f64 / total,
            errs[2] as f64 / total,
        );
    }

    // The exhaustive search is guarded: 64-QAM with four streams needs
    // 2^24 hypotheses and is refused up front.
    let big = Constellation::gray(6)?;
    let h = CMat::identity(4, 4);
    let y = CVec::zeros(4);
    match ml_detect(&h, &y, &big) {
        Err(e) => println!(
            "\n4 streams x 64-QAM = 24 bits > limit of {ML_SEARCH_LIMIT_BITS}: {e}"
        ),
        Ok(_) => unreachable!("the guard admits at most {ML_SEARCH_LIMIT_BITS} bits"),
    }
    Ok(())
}
