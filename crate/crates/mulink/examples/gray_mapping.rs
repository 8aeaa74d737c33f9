//! Gray-mapped QAM constellations and exact bit LLRs.
//!
//! Prints the 16-QAM mapping table, checks the defining conventions
//! (unit mean energy, bit 0 steering the sign of the real part), and
//! shows how the soft demapper's LLR for one bit moves as a received
//! point slides across the decision boundary.
//!
//! Run with: `cargo run --release --example gray_mapping`

use mulink::demap::{awgn_llr, llr_to_bits};
use mulink::grid::Constellation;

fn main() -> mulink::Result<()> {
    let c = Constellation::gray(4)?;
    println!("16-QAM Gray map (bits b0 b1 b2 b3 -> point):");
    for label in 0..c.size() {
        let bits: Vec<u8> = (0..4).map(|q| c.bit(label, q)).collect();
        let p = c.point(label);
        print!(
            "  {}{}{}{} -> {:+.3}{:+.3}i ",
            bits[0], bits[1], bits[2], bits[3], p.re, p.im
        );
        if label % 4 == 3 {
            println!();
        }
    }

    let mean_energy: f64 =
        c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
    println!("\nmean symbol energy: {mean_energy:.12} (should be 1)");

    // Convention check: bit 0 clear means the real part is positive.
    let all_positive = c
        .subset(0, 0)
        .iter()
        .all(|&label| c.point(label).re > 0.0);
    println!("bit 0 = 0  =>  Re > 0 on every point: {all_positive}");

    // Slide a noiseless observation across the real axis. Bit 0 signs
    // the real part, so its LLR flips at Re = 0; bit 1 picks the inner
    // or outer column, so its LLR turns around at the +-2/sqrt(10)
    // boundary instead.
    let rho2 = 0.2;
    println!("\nLLRs along the real axis at post-eq variance {rho2}:");
    println!("{:>8} {:>9} {:>9}", "Re(x)", "LLR(b0)", "LLR(b1)");
    for step in -6..=6 {
        let x = num_complex::Complex64::new(step as f64 * 0.25, 0.35);
        let llr = awgn_llr(x, rho2, &c, 40.0)?;
        println!("{:>8.2} {:>9.3} {:>9.3}", x.re, llr[0], llr[1]);
    }

    // Hard decisions from the sign of the LLRs recover the sent label
    // when the noise is off.
    let sent = 11;
    let llr = awgn_llr(c.point(sent), 1e-3, &c, 40.0)?;
    let bits = llr_to_bits(&llr);
    println!(
        "\nnoiseless round trip for label {sent}: bits {:?} -> label {}",
        bits,
        c.label_of(&bits)?
    );
    Ok(())
}
