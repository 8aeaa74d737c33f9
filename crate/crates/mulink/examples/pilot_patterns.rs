//! Per-user pilot lattices on the resource grid.
//!
//! Draws the 1P and 2P comb layouts for four users as ASCII grids
//! (digits mark the owning user, dots are data), then builds a custom
//! lattice from explicit positions.
//!
//! Run with: `cargo run --release --example pilot_patterns`

use mulink::grid::{CombLayout, Duplex, GridConfig, PilotPattern};

fn render(cfg: &GridConfig, pattern: &PilotPattern) {
    for m in 0..cfg.symbols {
        print!("  sym {m:>2}  ");
        for n in 0..cfg.subcarriers {
            match pattern.owner(m, n) {
                Some(k) => print!("{k}"),
                None => print!("."),
            }
        }
        println!();
    }
}

fn main() -> mulink::Result<()> {
    let cfg = GridConfig {
        symbols: 14,
        subcarriers: 12,
        users: 4,
        antennas: 16,
        bits_per_symbol: 2,
        sigma2: 0.1,
        duplex: Duplex::UplinkOnly,
    };
    cfg.validate()?;

    for (name, layout) in [("1P", CombLayout::OneP), ("2P", CombLayout::TwoP)] {
        let pattern = PilotPattern::comb(&cfg, layout)?;
        println!("{name} layout, K = {} users on {}x{}:", cfg.users, cfg.symbols, cfg.subcarriers);
        render(&cfg, &pattern);
        for k in 0..cfg.users {
            println!(
                "  user {k}: {} pilots on symbols {:?} x subcarriers {:?}",
                pattern.num_pilots(k),
                pattern.user_symbols(k),
                pattern.user_subcarriers(k),
            );
        }
        let data = pattern.data_res().len();
        let total = cfg.symbols * cfg.subcarriers;
        println!(
            "  {} of {} REs carry data ({:.1}%)\n",
            data,
            total,
            100.0 * data as f64 / total as f64
        );
    }

    // A custom lattice: user 0 on the four corners of a small block,
    // user 1 on a single RE. Each user's set must stay rectangular.
    let small = GridConfig { users: 2, ..cfg };
    let custom = PilotPattern::custom(
        &small,
        &[(0, 1, 2), (0, 1, 6), (0, 5, 2), (0, 5, 6), (1, 8, 4)],
    )?;
    println!("custom layout:");
    render(&small, &custom);

    // Overlapping users are rejected.
    let clash = PilotPattern::custom(&small, &[(0, 1, 2), (1, 1, 2)]);
    println!("\noverlapping custom pilots -> {:?}", clash.err().map(|e| e.to_string()));
    Ok(())
}
