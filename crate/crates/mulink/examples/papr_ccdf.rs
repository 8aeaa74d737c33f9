//! Peak-to-average power ratio of OFDM, with its CCDF and the analytic
//! adjacent-channel leakage ratio.
//!
//! Synthesizes a batch of oversampled 16-QAM OFDM symbols, reports the
//! PAPR at several exceedance levels, sketches the CCDF, and evaluates
//! the ACLR from the closed-form in-band/total energy matrices.
//!
//! Run with: `cargo run --release --example papr_ccdf`

use mulink::grid::Constellation;
use mulink::linalg::CVec;
use mulink::util::derive_rng;
use mulink::waveform::{
    WaveformConfig, aclr, ccdf, inband_energy_matrix, oversampled_time_signal, papr_epsilon,
    total_energy_matrix,
};
use rand::Rng;

fn main() -> mulink::Result<()> {
    let wf = WaveformConfig {
        subcarriers: 75,
        oversampling: 5,
        symbol_duration: 1.0,
        cp_duration: 0.0625,
    };
    wf.validate()?;
    let constellation = Constellation::gray(4)?;
    let symbols = 20_000;

    let mut rng = derive_rng(2024, &[0]);
    let mut xs = Vec::with_capacity(symbols);
    let mut zs = Vec::with_capacity(symbols);
    for _ in 0..symbols {
        let x = CVec::from_fn(wf.subcarriers, |_, _| {
            constellation.point(rng.random_range(0..constellation.size()))
        });
        zs.push(oversampled_time_signal(&x, wf.oversampling)?);
        xs.push(x);
    }

    println!(
        "{} symbols, N = {} tones, {}x oversampling:\n",
        symbols, wf.subcarriers, wf.oversampling
    );
    for eps in [1e-1, 1e-2, 1e-3, 1e-4, 0.0] {
        let label = if eps == 0.0 { "0 (max)".into() } else { format!("{eps}") };
        println!("  PAPR exceeded with prob {label:>7}: {:6.2} dB", papr_epsilon(&zs, eps)?);
    }

    println!("\nCCDF of the normalized instantaneous power:");
    let curve = ccdf(&zs, 200)?;
    for target in [0.5, 0.1, 1e-2, 1e-3, 1e-4] {
        // First grid threshold whose exceedance probability drops below
        // the target; the curve is non-increasing.
        if let Some((e, p)) = curve.iter().find(|(_, p)| *p <= target) {
            let bar = "#".repeat((10.0 * e.log10().max(0.0) * 2.0) as usize);
            println!("  P(nu > {:5.2} dB) = {p:.1e}  {bar}", 10.0 * e.log10());
        }
    }

    // ACLR needs no Monte Carlo: both energies are quadratic forms in the
    // frequency-domain symbol, and their matrices have closed forms.
    let j = inband_energy_matrix(&wf)?;
    let k = total_energy_matrix(&wf)?;
    let report = aclr(&xs, &j, &k)?;
    println!("\nACLR with a cyclic prefix of {} T:", wf.cp_duration);
    println!("  mean in-band energy: {:.4}", report.mean_inband);
    println!("  mean total energy:   {:.4}", report.mean_total);
    println!("  ACLR: {:.3e} ({:.1} dB)", report.linear, report.db);
    Ok(())
}
