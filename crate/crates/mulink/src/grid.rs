//! Resource-grid bookkeeping: dimensions, Gray-mapped QAM constellations,
//! and per-user pilot lattices.
//!
//! The grid covers one uplink slot of `M` OFDM symbols by `N` subcarriers
//! (plus a second, downlink slot of another `M` symbols when duplexing is
//! on), shared by `K` single-antenna users facing an `L`-antenna base
//! station. Indices are 0-based throughout the crate; external files use
//! 1-based indices and are converted at the parsing boundary.

use crate::linalg::C64;
use crate::{Error, Result};

/// Which slots of the frame are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duplex {
    /// Only the uplink slot: `M` symbols total.
    UplinkOnly,
    /// Uplink slot followed by a downlink slot: `2M` symbols total.
    UplinkDownlink,
}

/// Dimensions and operating point of the simulated cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// OFDM symbols per slot, `M`.
    pub symbols: usize,
    /// Subcarriers, `N`.
    pub subcarriers: usize,
    /// Single-antenna users, `K`.
    pub users: usize,
    /// Base-station antennas, `L`.
    pub antennas: usize,
    /// Bits per QAM symbol, `Q`.
    pub bits_per_symbol: usize,
    /// Noise variance per receive antenna (noise is CN(0, sigma2)).
    pub sigma2: f64,
    pub duplex: Duplex,
}

impl GridConfig {
    /// Total symbols in the frame: `M` uplink-only, `2M` with a downlink slot.
    pub fn total_symbols(&self) -> usize {
        match self.duplex {
            Duplex::UplinkOnly => self.symbols,
            Duplex::UplinkDownlink => 2 * self.symbols,
        }
    }

    /// SNR in dB for this noise variance under unit signal power:
    /// `SNR = 10 log10(1 / sigma2)`.
    pub fn snr_db(&self) -> f64 {
        -10.0 * self.sigma2.log10()
    }

    /// Noise variance realizing a given SNR in dB under unit signal power.
    pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
        10f64.powf(-snr_db / 10.0)
    }

    /// Check every structural rule; the error lists all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if self.symbols == 0 {
            faults.push("symbols: must be at least 1".to_string());
        }
        if self.subcarriers == 0 {
            faults.push("subcarriers: must be at least 1".to_string());
        }
        if self.users == 0 {
            faults.push("users: must be at least 1".to_string());
        }
        if self.users > self.antennas {
            faults.push(format!(
                "users: K={} exceeds antenna count L={}",
                self.users, self.antennas
            ));
        }
        if ![1, 2, 4, 6, 8].contains(&self.bits_per_symbol) {
            faults.push(format!(
                "bits_per_symbol: Q={} not in {{1, 2, 4, 6, 8}}",
                self.bits_per_symbol
            ));
        }
        if !(self.sigma2 > 0.0) {
            faults.push(format!("sigma2: {} must be positive", self.sigma2));
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(faults.join("\n")))
        }
    }
}

/// Gray-mapped square QAM with unit average energy.
///
/// The label of a point is a `Q`-bit vector `[b_0, ..., b_{Q-1}]`; the first
/// `Q/2` bits select the real amplitude and the rest the imaginary
/// amplitude, each axis Gray-coded so neighboring amplitudes differ in one
/// bit. `b = 0` selects positive amplitudes, with the all-zero axis label on
/// the outermost positive level: `[0,0]` maps to `(1+j)/sqrt(2)` for QPSK
/// and `[0,0,0,0]` to `(3+3j)/sqrt(10)` for 16-QAM.
///
/// Points are stored indexed by the label read as an integer with `b_0` as
/// the most significant bit, so label arithmetic and lookup agree.
#[derive(Debug, Clone)]
pub struct Constellation {
    bits: usize,
    points: Vec<C64>,
    /// `subsets[q][b]` lists the labels whose bit `q` equals `b`.
    subsets: Vec<[Vec<usize>; 2]>,
}

/// Inverse of the binary-reflected Gray code `i -> i ^ (i >> 1)`.
#[inline]
fn gray_inverse(mut g: usize) -> usize {
    let mut i = 0;
    while g != 0 {
        i ^= g;
        g >>= 1;
    }
    i
}

impl Constellation {
    /// Build the Gray-mapped `2^Q`-QAM constellation. Supported orders are
    /// QPSK, 16-QAM and 64-QAM (`Q` in {2, 4, 6}).
    pub fn gray(bits: usize) -> Result<Self> {
        if ![2, 4, 6].contains(&bits) {
            return Err(Error::UnsupportedModulation(bits));
        }
        let axis_bits = bits / 2;
        let levels = 1usize << axis_bits;
        // Average energy of the unnormalized square grid is 2(4^q - 1)/3.
        let scale = (3.0 / (2.0 * ((1usize << (2 * axis_bits)) as f64 - 1.0))).sqrt();
        let amplitude = |axis_label: usize| -> f64 {
            // Position of this Gray label in the descending amplitude order
            // +(2^q - 1), +(2^q - 3), ..., -(2^q - 1).
            let pos = gray_inverse(axis_label);
            ((levels - 1) as f64 - 2.0 * pos as f64) * scale
        };
        let size = 1usize << bits;
        let mut points = Vec::with_capacity(size);
        for label in 0..size {
            let re_label = label >> axis_bits;
            let im_label = label & (levels - 1);
            points.push(C64::new(amplitude(re_label), amplitude(im_label)));
        }
        let mut subsets = vec![[Vec::new(), Vec::new()]; bits];
        for label in 0..size {
            for q in 0..bits {
                let b = (label >> (bits - 1 - q)) & 1;
                subsets[q][b].push(label);
            }
        }
        Ok(Self { bits, points, subsets })
    }

    /// Bits per symbol `Q`.
    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    /// Number of constellation points, `2^Q`.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// All points, indexed by integer label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// The point carrying an integer label.
    pub fn point(&self, label: usize) -> C64 {
        self.points[label]
    }

    /// Bit `q` (0-based, `b_0` first) of an integer label.
    #[inline]
    pub fn bit(&self, label: usize, q: usize) -> u8 {
        ((label >> (self.bits - 1 - q)) & 1) as u8
    }

    /// Labels whose bit `q` equals `b`; each subset has `2^{Q-1}` members.
    pub fn subset(&self, q: usize, b: u8) -> &[usize] {
        &self.subsets[q][b as usize]
    }

    /// Map a `Q`-bit vector (values 0/1, `b_0` first) to its point.
    pub fn map_bits(&self, bits: &[u8]) -> Result<C64> {
        Ok(self.point(self.label_of(bits)?))
    }

    /// Integer label of a `Q`-bit vector.
    pub fn label_of(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits {
            return Err(Error::DimensionMismatch(format!(
                "label has {} bits, constellation expects {}",
                bits.len(),
                self.bits
            )));
        }
        let mut label = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidInput(format!("bit value {b} is not 0/1")));
            }
            label = (label << 1) | b as usize;
        }
        Ok(label)
    }

    /// Nearest constellation point in Euclidean distance; exact ties resolve
    /// to the lowest label value.
    pub fn hard_nearest(&self, x: C64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (label, &c) in self.points.iter().enumerate() {
            let d = (x - c).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }
}

/// Comb-type pilot layouts: how many pilot-bearing symbols a slot carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombLayout {
    /// Two pilot-bearing symbols per slot (symbols 2 and 3).
    OneP,
    /// Four pilot-bearing symbols per slot: the 1P pair repeated half a
    /// slot later (symbols 2, 3, 2 + M/2 and 3 + M/2).
    TwoP,
}

/// Per-user pilot lattices on one slot.
///
/// Every user `k` owns a rectangular lattice `P_M^(k) x P_N^(k)` of
/// resource elements, disjoint from every other user's; on a user's pilot
/// RE the other users stay silent, and the pilot value itself is the
/// constant 1 (so received pilots observe the channel directly).
#[derive(Debug, Clone)]
pub struct PilotPattern {
    symbols_per_slot: usize,
    subcarriers: usize,
    /// Per user: sorted distinct pilot symbol indices within the slot.
    user_symbols: Vec<Vec<usize>>,
    /// Per user: sorted distinct pilot subcarrier indices.
    user_subcarriers: Vec<Vec<usize>>,
    /// Flattened ownership map, `owner[m * N + n] = Some(user)`.
    owner: Vec<Option<usize>>,
}

impl PilotPattern {
    /// Build one of the standard comb layouts.
    ///
    /// Both combs place pilots starting at symbol 2. With `K >= 2` users the
    /// users split evenly over the pilot symbols of each pair (first half of
    /// the users on the earlier symbol) and share each symbol through
    /// interleaved combs: user `k` takes every `(K/2)`-th subcarrier starting
    /// at offset `k mod K/2`, so user 0 sits on subcarriers 0, 2, 4, ... when
    /// four users share twelve subcarriers. A single user takes every pilot
    /// symbol in full. `K` odd (above 1) cannot form equal combs and is
    /// rejected, as is a comb spacing that does not divide `N`.
    pub fn comb(cfg: &GridConfig, layout: CombLayout) -> Result<Self> {
        let (m, n, k) = (cfg.symbols, cfg.subcarriers, cfg.users);
        let pairs: Vec<usize> = match layout {
            CombLayout::OneP => vec![2],
            CombLayout::TwoP => vec![2, 2 + m / 2],
        };
        let last = pairs.last().unwrap() + 1;
        if last >= m {
            return Err(Error::PilotLayout(format!(
                "slot of {m} symbols too short for pilot symbols up to index {last}",
            )));
        }
        if k > 1 && k % 2 != 0 {
            return Err(Error::PilotLayout(format!(
                "comb layouts need an even user count to split over symbol pairs; got K={k}"
            )));
        }
        let per_symbol = if k == 1 { 1 } else { k / 2 };
        if n % per_symbol != 0 {
            return Err(Error::PilotLayout(format!(
                "comb spacing {per_symbol} does not divide N={n}"
            )));
        }
        let mut user_symbols = vec![Vec::new(); k];
        let mut user_subcarriers = vec![Vec::new(); k];
        for user in 0..k {
            let (half, offset) = if k == 1 { (None, 0) } else { (Some(user / per_symbol), user % per_symbol) };
            for &base in &pairs {
                match half {
                    None => user_symbols[user].extend([base, base + 1]),
                    Some(h) => user_symbols[user].push(base + h),
                }
            }
            user_subcarriers[user] = (0..n / per_symbol).map(|i| offset + i * per_symbol).collect();
        }
        Self::assemble(m, n, user_symbols, user_subcarriers)
    }

    /// Build a pattern from explicit per-user positions `(user, symbol,
    /// subcarrier)`, all 0-based. The positions of each user must form a
    /// full rectangular lattice and no RE may belong to two users.
    pub fn custom(cfg: &GridConfig, positions: &[(usize, usize, usize)]) -> Result<Self> {
        let mut user_symbols = vec![Vec::new(); cfg.users];
        let mut user_subcarriers = vec![Vec::new(); cfg.users];
        let mut per_user: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cfg.users];
        for &(user, sym, sc) in positions {
            if user >= cfg.users {
                return Err(Error::PilotLayout(format!(
                    "position references user {user}, but K={}",
                    cfg.users
                )));
            }
            per_user[user].push((sym, sc));
        }
        for (user, list) in per_user.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::PilotLayout(format!("user {user} has no pilot REs")));
            }
            let mut syms: Vec<usize> = list.iter().map(|p| p.0).collect();
            let mut scs: Vec<usize> = list.iter().map(|p| p.1).collect();
            syms.sort_unstable();
            syms.dedup();
            scs.sort_unstable();
            scs.dedup();
            if syms.len() * scs.len() != list.len() {
                return Err(Error::PilotLayout(format!(
                    "user {user}: {} positions do not fill the {}x{} lattice of their symbols and subcarriers",
                    list.len(),
                    syms.len(),
                    scs.len()
                )));
            }
            let mut sorted: Vec<(usize, usize)> = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::PilotLayout(format!("user {user}: duplicate pilot position")));
            }
            for &s in &syms {
                for &c in &scs {
                    if sorted.binary_search(&(s, c)).is_err() {
                        return Err(Error::PilotLayout(format!(
                            "user {user}: lattice hole at symbol {s}, subcarrier {c}"
                        )));
                    }
                }
            }
            user_symbols[user] = syms;
            user_subcarriers[user] = scs;
        }
        Self::assemble(cfg.symbols, cfg.subcarriers, user_symbols, user_subcarriers)
    }

    fn assemble(
        m: usize,
        n: usize,
        user_symbols: Vec<Vec<usize>>,
        user_subcarriers: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let mut owner: Vec<Option<usize>> = vec![None; m * n];
        for user in 0..user_symbols.len() {
            for &sym in &user_symbols[user] {
                if sym >= m {
                    return Err(Error::PilotLayout(format!(
                        "user {user}: pilot symbol {sym} outside slot of {m} symbols"
                    )));
                }
                for &sc in &user_subcarriers[user] {
                    if sc >= n {
                        return Err(Error::PilotLayout(format!(
                            "user {user}: pilot subcarrier {sc} outside {n} subcarriers"
                        )));
                    }
                    let cell = &mut owner[sym * n + sc];
                    if let Some(prev) = *cell {
                        return Err(Error::PilotLayout(format!(
                            "users {prev} and {user} both claim symbol {sym}, subcarrier {sc}"
                        )));
                    }
                    *cell = Some(user);
                }
            }
        }
        Ok(Self {
            symbols_per_slot: m,
            subcarriers: n,
            user_symbols,
            user_subcarriers,
            owner,
        })
    }

    pub fn users(&self) -> usize {
        self.user_symbols.len()
    }

    /// Sorted pilot symbol indices of one user (the set `P_M`).
    pub fn user_symbols(&self, user: usize) -> &[usize] {
        &self.user_symbols[user]
    }

    /// Sorted pilot subcarrier indices of one user (the set `P_N`).
    pub fn user_subcarriers(&self, user: usize) -> &[usize] {
        &self.user_subcarriers[user]
    }

    /// All pilot REs of one user in vectorization order: symbol-major,
    /// subcarrier within symbol.
    pub fn user_positions(&self, user: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_pilots(user));
        for &s in &self.user_symbols[user] {
            for &c in &self.user_subcarriers[user] {
                out.push((s, c));
            }
        }
        out
    }

    /// `|P_M| * |P_N|` for one user.
    pub fn num_pilots(&self, user: usize) -> usize {
        self.user_symbols[user].len() * self.user_subcarriers[user].len()
    }

    /// Which user (if any) owns a slot RE as a pilot.
    #[inline]
    pub fn owner(&self, symbol: usize, subcarrier: usize) -> Option<usize> {
        self.owner[symbol * self.subcarriers + subcarrier]
    }

    /// Total pilot REs over all users.
    pub fn total_pilot_res(&self) -> usize {
        self.owner.iter().filter(|o| o.is_some()).count()
    }

    /// Data REs of the slot in row-major order: every RE not owned by any
    /// user as a pilot. On pilot REs no user transmits data, so the data
    /// set is shared by all users.
    pub fn data_res(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.symbols_per_slot * self.subcarriers - self.total_pilot_res());
        for m in 0..self.symbols_per_slot {
            for n in 0..self.subcarriers {
                if self.owner(m, n).is_none() {
                    out.push((m, n));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(symbols: usize, subcarriers: usize, users: usize) -> GridConfig {
        GridConfig {
            symbols,
            subcarriers,
            users,
            antennas: users.max(4),
            bits_per_symbol: 2,
            sigma2: 0.1,
            duplex: Duplex::UplinkOnly,
        }
    }

    #[test]
    fn constellations_have_unit_mean_energy() {
        for q in [2, 4, 6] {
            let c = Constellation::gray(q).unwrap();
            let mean: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert!((mean - 1.0).abs() < 1e-12, "Q={q}: mean energy {mean}");
        }
    }

    #[test]
    fn qpsk_reference_points() {
        let c = Constellation::gray(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(c.map_bits(&[0, 0]).unwrap(), C64::new(s, s));
        assert_eq!(c.map_bits(&[0, 1]).unwrap(), C64::new(s, -s));
        assert_eq!(c.map_bits(&[1, 0]).unwrap(), C64::new(-s, s));
        assert_eq!(c.map_bits(&[1, 1]).unwrap(), C64::new(-s, -s));
    }

    #[test]
    fn qam16_reference_points() {
        let c = Constellation::gray(4).unwrap();
        let s = 10f64.sqrt().recip();
        let p = c.map_bits(&[0, 0, 0, 0]).unwrap();
        assert!((p - C64::new(3.0 * s, 3.0 * s)).norm() < 1e-15);
        // First two bits steer the real axis: flipping b_0 negates the side.
        let q = c.map_bits(&[1, 0, 0, 0]).unwrap();
        assert!((q - C64::new(-3.0 * s, 3.0 * s)).norm() < 1e-15);
        // [0,1] is the inner positive level.
        let r = c.map_bits(&[0, 1, 0, 1]).unwrap();
        assert!((r - C64::new(s, s)).norm() < 1e-15);
    }

    #[test]
    fn qam64_outermost_corner() {
        let c = Constellation::gray(6).unwrap();
        let s = 42f64.sqrt().recip();
        let p = c.map_bits(&[0, 0, 0, 0, 0, 0]).unwrap();
        assert!((p - C64::new(7.0 * s, 7.0 * s)).norm() < 1e-15);
    }

    #[test]
    fn gray_inverse_inverts_the_reflected_code() {
        for i in 0..256usize {
            assert_eq!(gray_inverse(i ^ (i >> 1)), i);
        }
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for q in [2usize, 4, 6] {
            let c = Constellation::gray(q).unwrap();
            let mut min_d = f64::INFINITY;
            for a in 0..c.size() {
                for b in 0..a {
                    min_d = min_d.min((c.point(a) - c.point(b)).norm());
                }
            }
            for a in 0..c.size() {
                for b in 0..a {
                    if (c.point(a) - c.point(b)).norm() < min_d * 1.001 {
                        assert_eq!((a ^ b).count_ones(), 1, "Q={q}: labels {a:#b} and {b:#b}");
                    }
                }
            }
        }
    }

    #[test]
    fn subsets_split_labels_evenly() {
        let c = Constellation::gray(4).unwrap();
        for q in 0..4 {
            assert_eq!(c.subset(q, 0).len(), 8);
            assert_eq!(c.subset(q, 1).len(), 8);
            for &l in c.subset(q, 1) {
                assert_eq!(c.bit(l, q), 1);
            }
        }
    }

    #[test]
    fn unsupported_orders_are_rejected() {
        for q in [0, 1, 3, 5, 8] {
            assert!(matches!(Constellation::gray(q), Err(Error::UnsupportedModulation(_))));
        }
    }

    #[test]
    fn hard_nearest_breaks_ties_toward_lowest_label() {
        let c = Constellation::gray(2).unwrap();
        // The origin is equidistant from all four points; label 0 wins.
        assert_eq!(c.hard_nearest(C64::new(0.0, 0.0)), 0);
        // On the positive real axis the tie is between labels 00 and 01.
        assert_eq!(c.hard_nearest(C64::new(1.0, 0.0)), 0);
    }

    #[test]
    fn one_p_comb_matches_reference_layout() {
        // Four users on twelve subcarriers: user 0 takes the odd 1-based
        // (even 0-based) subcarriers of the first pilot symbol.
        let p = PilotPattern::comb(&cfg(14, 12, 4), CombLayout::OneP).unwrap();
        assert_eq!(p.user_symbols(0), &[2]);
        assert_eq!(p.user_subcarriers(0), &[0, 2, 4, 6, 8, 10]);
        assert_eq!(p.user_symbols(1), &[2]);
        assert_eq!(p.user_subcarriers(1), &[1, 3, 5, 7, 9, 11]);
        assert_eq!(p.user_symbols(2), &[3]);
        assert_eq!(p.user_symbols(3), &[3]);
        assert_eq!(p.num_pilots(0), 6);
        assert_eq!(p.total_pilot_res(), 24);
    }

    #[test]
    fn two_p_comb_repeats_half_a_slot_later() {
        let p = PilotPattern::comb(&cfg(14, 24, 4), CombLayout::TwoP).unwrap();
        assert_eq!(p.user_symbols(0), &[2, 9]);
        assert_eq!(p.user_subcarriers(0).len(), 12);
        assert_eq!(p.num_pilots(0), 24);
    }

    #[test]
    fn single_user_takes_full_pilot_symbols() {
        let p = PilotPattern::comb(&cfg(14, 12, 1), CombLayout::OneP).unwrap();
        assert_eq!(p.user_symbols(0), &[2, 3]);
        assert_eq!(p.user_subcarriers(0).len(), 12);
    }

    #[test]
    fn comb_capacity_violations_are_rejected() {
        // Odd user counts cannot split over a symbol pair.
        assert!(matches!(
            PilotPattern::comb(&cfg(14, 12, 3), CombLayout::OneP),
            Err(Error::PilotLayout(_))
        ));
        // Comb spacing 2 does not divide 11 subcarriers.
        assert!(matches!(
            PilotPattern::comb(&cfg(14, 11, 4), CombLayout::OneP),
            Err(Error::PilotLayout(_))
        ));
        // A three-symbol slot cannot hold pilot symbols 2 and 3.
        assert!(matches!(
            PilotPattern::comb(&cfg(3, 12, 2), CombLayout::OneP),
            Err(Error::PilotLayout(_))
        ));
    }

    #[test]
    fn custom_patterns_enforce_disjoint_rectangles() {
        let c = cfg(6, 8, 2);
        // Valid: user 0 on {1} x {0, 4}, user 1 on {1} x {1, 5}.
        let ok = PilotPattern::custom(&c, &[(0, 1, 0), (0, 1, 4), (1, 1, 1), (1, 1, 5)]).unwrap();
        assert_eq!(ok.num_pilots(0), 2);
        // Overlap: both users claim (1, 0).
        assert!(matches!(
            PilotPattern::custom(&c, &[(0, 1, 0), (1, 1, 0)]),
            Err(Error::PilotLayout(_))
        ));
        // Hole: user 0 claims a 2x2 lattice minus one corner.
        assert!(matches!(
            PilotPattern::custom(&c, &[(0, 1, 0), (0, 1, 4), (0, 2, 0), (1, 3, 1)]),
            Err(Error::PilotLayout(_))
        ));
    }

    #[test]
    fn data_res_exclude_every_users_pilots() {
        let c = cfg(6, 12, 4);
        let p = PilotPattern::comb(&c, CombLayout::OneP).unwrap();
        let data = p.data_res();
        assert_eq!(data.len(), 6 * 12 - 24);
        for &(m, n) in &data {
            assert!(p.owner(m, n).is_none());
        }
    }

    #[test]
    fn config_validation_lists_all_faults() {
        let bad = GridConfig {
            symbols: 0,
            subcarriers: 12,
            users: 8,
            antennas: 4,
            bits_per_symbol: 3,
            sigma2: -1.0,
            duplex: Duplex::UplinkOnly,
        };
        match bad.validate() {
            Err(Error::InvalidConfig(msg)) => {
                assert!(msg.contains("symbols"));
                assert!(msg.contains("exceeds antenna count"));
                assert!(msg.contains("bits_per_symbol"));
                assert!(msg.contains("sigma2"));
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn snr_conversion_round_trips() {
        let s = GridConfig::sigma2_from_snr_db(10.0);
        assert!((s - 0.1).abs() < 1e-15);
        let c = GridConfig { sigma2: s, ..cfg(4, 4, 1) };
        assert!((c.snr_db() - 10.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn comb_patterns_keep_their_invariants(
            users in prop_oneof![Just(1usize), Just(2), Just(4), Just(6)],
            n_mult in 1usize..5,
            m in 8usize..20,
        ) {
            let per_symbol = if users == 1 { 1 } else { users / 2 };
            let n = per_symbol * 2 * n_mult;
            let c = cfg(m, n, users);
            for layout in [CombLayout::OneP, CombLayout::TwoP] {
                let p = PilotPattern::comb(&c, layout).unwrap();
                let mut seen = std::collections::HashSet::new();
                for u in 0..users {
                    let pos = p.user_positions(u);
                    prop_assert_eq!(pos.len(), p.num_pilots(u));
                    for &(s, sc) in &pos {
                        prop_assert!(s < m && sc < n);
                        prop_assert!(seen.insert((s, sc)), "overlap at {:?}", (s, sc));
                        prop_assert_eq!(p.owner(s, sc), Some(u));
                    }
                }
                prop_assert_eq!(seen.len(), p.total_pilot_res());
            }
        }

        #[test]
        fn every_label_round_trips(q in prop_oneof![Just(2usize), Just(4), Just(6)], label_seed in 0usize..64) {
            let c = Constellation::gray(q).unwrap();
            let label = label_seed % c.size();
            let bits: Vec<u8> = (0..q).map(|i| c.bit(label, i)).collect();
            prop_assert_eq!(c.label_of(&bits).unwrap(), label);
            prop_assert_eq!(c.hard_nearest(c.point(label)), label);
        }
    }
}
