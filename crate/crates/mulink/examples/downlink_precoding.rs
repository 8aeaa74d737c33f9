//! Downlink precoding by uplink-downlink duality.
//!
//! The base station reuses its uplink LMMSE receive filter, column-scaled
//! so the transmit power is K regardless of the channel draw, and each
//! user sees a scalar equivalent channel. The example checks the exact
//! per-RE power identity, the K-in-expectation transmit energy, and the
//! diagonal dominance of the equivalent channel, then pushes QAM through
//! the whole chain.
//!
//! Run with: `cargo run --release --example downlink_precoding`

use mulink::channel::ScatteringModel;
use mulink::downlink::{dl_equalize, equivalent_channel, normalization_diagonal, precode};
use mulink::equalize::grouped_lmmse_matrix;
use mulink::grid::Constellation;
use mulink::linalg::{CMat, CVec, cn01};
use mulink::util::derive_rng;
use rand::Rng;

fn main() -> mulink::Result<()> {
    let (users, antennas) = (4usize, 16usize);
    let sigma2 = 0.1; // 10 dB
    let models: Vec<ScatteringModel> = (0..users)
        .map(|k| {
            let az = (-60.0 + 120.0 * (k as f64 + 0.5) / users as f64).to_radians();
            ScatteringModel::new(antennas, az, 10f64.to_radians(), 0.5)
        })
        .collect::<mulink::Result<_>>()?;
    let constellation = Constellation::gray(4)?;
    let mut rng = derive_rng(31, &[0]);
    let no_error = CMat::zeros(antennas, antennas);

    let draw = |rng: &mut _| -> CMat {
        let mut h = CMat::zeros(antennas, users);
        for (k, m) in models.iter().enumerate() {
            h.set_column(k, &m.sample(rng));
        }
        h
    };

    // Power identities on one draw.
    let h = draw(&mut rng);
    let w = grouped_lmmse_matrix(&[h.clone()], &[no_error.clone()], sigma2)?;
    let c = normalization_diagonal(&w)?;
    let mut constraint = 0.0;
    for k in 0..users {
        constraint += c[k] * c[k] * w.row(k).iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    println!("per-RE power constraint tr(W^H C^2 W) = {constraint:.12} (exactly {users})");

    let mut mean_power = 0.0;
    let draws = 20_000;
    for _ in 0..draws {
        let s = CVec::from_fn(users, |_, _| {
            constellation.point(rng.random_range(0..constellation.size()))
        });
        mean_power += precode(&s, &w, &c)?.norm_squared();
    }
    println!(
        "mean ||t||^2 over {draws} random symbol vectors = {:.4} (K = {users})",
        mean_power / draws as f64
    );

    // Equivalent channel: strong diagonal, weak leakage.
    let g = equivalent_channel(&h, &w, &c)?;
    println!("\nequivalent channel magnitudes |G| (rows = users):");
    for k in 0..users {
        let row: Vec<String> = (0..users).map(|i| format!("{:6.3}", g[(k, i)].norm())).collect();
        println!("  {}", row.join(" "));
    }

    // End-to-end symbol error rate with genie knowledge of G's diagonal.
    let mut errors = 0u64;
    let mut sent_total = 0u64;
    let slots = 4000;
    for _ in 0..slots {
        let h = draw(&mut rng);
        let w = grouped_lmmse_matrix(&[h.clone()], &[no_error.clone()], sigma2)?;
        let c = normalization_diagonal(&w)?;
        let g = equivalent_channel(&h, &w, &c)?;
        let labels: Vec<usize> =
            (0..users).map(|_| rng.random_range(0..constellation.size())).collect();
        let s = CVec::from_fn(users, |k, _| constellation.point(labels[k]));
        let t = precode(&s, &w, &c)?;
        for k in 0..users {
            // User k physically hears h_k^H t; that equals row k of G s.
            let u = h.column(k).dotc(&t) + cn01(&mut rng) * sigma2.sqrt();
            let xhat = dl_equalize(u, g[(k, k)])?;
            if constellation.hard_nearest(xhat) != labels[k] {
                errors += 1;
            }
            sent_total += 1;
        }
    }
    println!(
        "\n16-QAM downlink SER over {slots} draws at 10 dB: {:.5}",
        errors as f64 / sent_total as f64
    );
    Ok(())
}
