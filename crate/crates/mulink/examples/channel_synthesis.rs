//! Correlated MIMO-OFDM channel synthesis.
//!
//! Builds a two-user channel over a full frame and verifies, from
//! samples, the three separable correlation structures the synthesizer
//! imposes: local-scattering spatial covariance across the array, Jakes
//! autocorrelation across OFDM symbols, and exponential-delay-profile
//! correlation across subcarriers.
//!
//! Run with: `cargo run --release --example channel_synthesis`

use mulink::channel::{
    ChannelModel, ChannelSynthesizer, Normalization, ScatteringModel, TemporalSpectralModel,
};
use mulink::grid::{Duplex, GridConfig};
use mulink::linalg::C64;
use mulink::util::derive_rng;

fn main() -> mulink::Result<()> {
    let cfg = GridConfig {
        symbols: 14,
        subcarriers: 12,
        users: 2,
        antennas: 16,
        bits_per_symbol: 2,
        sigma2: 0.1,
        duplex: Duplex::UplinkOnly,
    };
    let selectivity = TemporalSpectralModel { doppler: 0.02, delay_spread: 0.05 };
    let model = ChannelModel {
        scattering: vec![
            ScatteringModel::new(cfg.antennas, (-30f64).to_radians(), 10f64.to_radians(), 0.5)?,
            ScatteringModel::new(cfg.antennas, 45f64.to_radians(), 10f64.to_radians(), 0.5)?,
        ],
        selectivity,
        // Expectation-only normalization keeps samples independent of one
        // another, so the empirical moments below match the model.
        normalization: Normalization::ExpectationOnly,
    };
    let synth = ChannelSynthesizer::new(&cfg, &model)?;

    let frames = 3000;
    let mut rng = derive_rng(424242, &[0]);

    // Accumulate the three empirical correlations for user 0.
    let mut spatial = C64::new(0.0, 0.0); // antennas 0 and 1, same RE
    let mut temporal = C64::new(0.0, 0.0); // symbols 0 and 3, same subcarrier
    let mut spectral = C64::new(0.0, 0.0); // subcarriers 0 and 4, same symbol
    let mut energy = 0.0;
    for _ in 0..frames {
        let h = synth.synthesize(&mut rng);
        spatial += h.get(0, 0, 1, 0) * h.get(0, 0, 0, 0).conj();
        temporal += h.get(3, 0, 0, 0) * h.get(0, 0, 0, 0).conj();
        spectral += h.get(0, 4, 0, 0) * h.get(0, 0, 0, 0).conj();
        energy += h.user_energy(0);
    }
    let scale = 1.0 / frames as f64;
    let res = cfg.symbols * cfg.subcarriers * cfg.antennas;

    println!("{frames} synthesized frames, {} antennas:", cfg.antennas);
    println!(
        "  spatial   E[h1 h0*]      = {:+.4}{:+.4}i   model {:+.4}{:+.4}i",
        spatial.re * scale,
        spatial.im * scale,
        model.scattering[0].covariance()[(1, 0)].re,
        model.scattering[0].covariance()[(1, 0)].im,
    );
    println!(
        "  temporal  E[h(m=3) h(0)*] = {:+.4}           Jakes rho(3) {:+.4}",
        temporal.re * scale,
        selectivity.time_correlation(3),
    );
    let model_freq = selectivity.freq_correlation(4);
    println!(
        "  spectral  E[h(n=4) h(0)*] = {:+.4}{:+.4}i   delay model {:+.4}{:+.4}i",
        spectral.re * scale,
        spectral.im * scale,
        model_freq.re,
        model_freq.im,
    );
    println!(
        "  mean energy per RE-antenna = {:.4} (unit in expectation)",
        energy * scale / res as f64
    );

    // Slot-energy normalization instead pins the frame energy exactly.
    let pinned = ChannelModel { normalization: Normalization::SlotEnergy, ..model };
    let h = ChannelSynthesizer::new(&cfg, &pinned)?.synthesize(&mut rng);
    println!(
        "\nslot-energy normalization: user-0 frame energy = {:.6} (target {})",
        h.user_energy(0),
        res
    );
    Ok(())
}
