//! Pilot-based LMMSE channel estimation and error-covariance bookkeeping.
//!
//! All statistics follow one fixed vectorization: a user's pilot
//! observations are stacked **symbol-major, then subcarrier, then antenna**
//! (antenna index fastest). With `P = |P_M| * |P_N|` pilot REs the stacked
//! vector has `P * L` entries and the pilot covariance `Sigma` is
//! `PL x PL`; entry `(p*L + a, p'*L + b)` relates antenna `a` at pilot RE
//! `p` to antenna `b` at pilot RE `p'`.
//!
//! Because pilot values are the constant 1 and users stay silent on each
//! other's pilots, the pilot observation is `y = h + noise` and the LMMSE
//! estimate is `Sigma (Sigma + sigma2 I)^{-1} y`, with error covariance
//! `E_P = Sigma - Sigma (Sigma + sigma2 I)^{-1} Sigma`. Spatial `L x L`
//! diagonal blocks of `E_P` feed the equalizer; every grid RE receives the
//! block of its nearest pilot RE.

use crate::channel::{ChannelTensor, ScatteringModel, TemporalSpectralModel};
use crate::grid::PilotPattern;
use crate::linalg::{hermitian_solve, hermitize, C64, CMat, CVec};
use crate::{Error, Result};

/// Second-order statistics of a cell, as used by the receivers.
///
/// `sigma` drives uplink pilot estimation. `omega` and `psi` are the
/// covariances of the *equivalent* downlink channel coefficients across one
/// user's pilot lattice: `omega` for the main (own-stream) coefficient,
/// `psi` shared by all interfering coefficients.
#[derive(Debug, Clone)]
pub struct CovarianceStats {
    pub sigma: CMat,
    pub omega: CMat,
    pub psi: CMat,
}

/// LMMSE estimate of the stacked pilot channel from stacked observations.
pub fn lmmse_pilot_estimate(y_pilots: &CVec, sigma: &CMat, sigma2: f64) -> Result<CVec> {
    let d = sigma.nrows();
    if sigma.ncols() != d || y_pilots.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "pilot covariance is {}x{}, observation has {} entries",
            sigma.nrows(),
            sigma.ncols(),
            y_pilots.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!("noise variance {sigma2} must be positive")));
    }
    let mut regularized = sigma.clone();
    for i in 0..d {
        regularized[(i, i)] += C64::new(sigma2, 0.0);
    }
    let z = hermitian_solve(&regularized, &CMat::from_column_slice(d, 1, y_pilots.as_slice()))?;
    let est = sigma * z;
    Ok(CVec::from_column_slice(est.as_slice()))
}

/// Error covariance of the pilot-RE LMMSE estimate:
/// `E_P = Sigma - Sigma (Sigma + sigma2 I)^{-1} Sigma`.
pub fn pilot_error_covariance(sigma: &CMat, sigma2: f64) -> Result<CMat> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::DimensionMismatch(format!("covariance is {}x{}", d, sigma.ncols())));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!("noise variance {sigma2} must be positive")));
    }
    let mut regularized = sigma.clone();
    for i in 0..d {
        regularized[(i, i)] += C64::new(sigma2, 0.0);
    }
    let x = hermitian_solve(&regularized, sigma)?;
    Ok(hermitize(&(sigma - sigma * x)))
}

/// The `L x L` spatial diagonal blocks of a stacked pilot covariance, one
/// per pilot RE in vectorization order.
pub fn spatial_error_blocks(e_pilot: &CMat, antennas: usize) -> Result<Vec<CMat>> {
    let d = e_pilot.nrows();
    if d % antennas != 0 || e_pilot.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} covariance does not tile into {antennas}x{antennas} blocks",
            d,
            e_pilot.ncols()
        )));
    }
    let p = d / antennas;
    let mut blocks = Vec::with_capacity(p);
    for i in 0..p {
        blocks.push(CMat::from_fn(antennas, antennas, |a, b| e_pilot[(i * antennas + a, i * antennas + b)]));
    }
    Ok(blocks)
}

/// Parameters of the power-decay error-covariance model
/// `e_{a,b} = alpha * beta^{|b-a|} * exp(j*gamma*(b-a))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDecayParams {
    /// Error power on the diagonal; must be positive.
    pub alpha: f64,
    /// Geometric decay across the array, in `(0, 1]`.
    pub beta: f64,
    /// Phase progression per antenna, radians.
    pub gamma: f64,
}

impl PowerDecayParams {
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if !(self.alpha > 0.0) {
            faults.push(format!("alpha: {} must be positive", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            faults.push(format!("beta: {} must lie in (0, 1]", self.beta));
        }
        if !self.gamma.is_finite() {
            faults.push(format!("gamma: {} must be finite", self.gamma));
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(faults.join("\n")))
        }
    }
}

/// Build the `L x L` power-decay error covariance.
pub fn power_decay_covariance(params: &PowerDecayParams, antennas: usize) -> Result<CMat> {
    params.validate()?;
    Ok(CMat::from_fn(antennas, antennas, |a, b| {
        let lag = b as f64 - a as f64;
        C64::from_polar(params.alpha * params.beta.powf(lag.abs()), params.gamma * lag)
    }))
}

/// Empirical covariance `(1/S) sum_s v_s v_s^H` of stacked samples.
pub fn empirical_covariance(samples: &[CVec]) -> Result<CMat> {
    let s = samples.len();
    if s == 0 {
        return Err(Error::InvalidInput("empirical covariance of an empty sample set".into()));
    }
    let d = samples[0].len();
    let mut acc = CMat::zeros(d, d);
    for v in samples {
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "sample length {} differs from first sample's {}",
                v.len(),
                d
            )));
        }
        acc += v * v.adjoint();
    }
    Ok(acc / C64::new(s as f64, 0.0))
}

/// The analytic pilot covariance of the separable synthesis model for one
/// user: `C_time(P_M) (x) C_freq(P_N) (x) C_space`, matching the fixed
/// vectorization order (symbol slowest, antenna fastest).
///
/// Exact under expectation-only normalization; the frame-energy rescale
/// perturbs it at `O(1/sqrt(grid size))`.
pub fn model_pilot_covariance(
    scattering: &ScatteringModel,
    selectivity: &TemporalSpectralModel,
    pattern: &PilotPattern,
    user: usize,
) -> CMat {
    let c_t = selectivity.time_correlation_matrix(pattern.user_symbols(user));
    let c_f = selectivity.freq_correlation_matrix(pattern.user_subcarriers(user));
    c_t.kronecker(&c_f).kronecker(scattering.covariance())
}

/// How pilot-RE estimates extend to the rest of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationMode {
    /// Linear interpolation across frequency on pilot-bearing symbols,
    /// then nearest-interpolated-RE fill everywhere else.
    Spectral,
    /// As `Spectral`, plus linear interpolation across time between
    /// pilot-bearing symbols (useful when a user's lattice spans several
    /// symbols, as in the 2P layout).
    SpectralTemporal,
}

/// Interpolate one user's pilot estimates over a full slot.
///
/// `pilot_est` is the stacked estimate in vectorization order for the
/// lattice `symbols x subcarriers`. The result is a slot-sized `[m][n][l]`
/// grid (antenna fastest). Values on pilot REs are passed through exactly;
/// frequency gaps between pilot subcarriers are linear; outside the pilot
/// span (in either dimension) the nearest interpolated value is copied, so
/// the fill never extrapolates.
pub fn interpolate_user_grid(
    pilot_est: &CVec,
    symbols: &[usize],
    subcarriers: &[usize],
    antennas: usize,
    slot_symbols: usize,
    slot_subcarriers: usize,
    mode: InterpolationMode,
) -> Result<Vec<C64>> {
    let (ns, nf) = (symbols.len(), subcarriers.len());
    if ns == 0 || nf == 0 {
        return Err(Error::InvalidInput("empty pilot lattice".into()));
    }
    if pilot_est.len() != ns * nf * antennas {
        return Err(Error::DimensionMismatch(format!(
            "{} stacked estimates for a {}x{}x{} lattice",
            pilot_est.len(),
            ns,
            nf,
            antennas
        )));
    }
    if !symbols.windows(2).all(|w| w[0] < w[1]) || !subcarriers.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput("pilot symbols and subcarriers must be sorted and distinct".into()));
    }
    if symbols[ns - 1] >= slot_symbols || subcarriers[nf - 1] >= slot_subcarriers {
        return Err(Error::DimensionMismatch("pilot lattice exceeds slot".into()));
    }

    // Pass 1: frequency interpolation on each pilot-bearing symbol.
    let mut rows = vec![C64::new(0.0, 0.0); ns * slot_subcarriers * antennas];
    for si in 0..ns {
        for n in 0..slot_subcarriers {
            // Position of n relative to the pilot subcarriers.
            let (j0, j1, w) = if n <= subcarriers[0] {
                (0, 0, 0.0)
            } else if n >= subcarriers[nf - 1] {
                (nf - 1, nf - 1, 0.0)
            } else {
                let j1 = subcarriers.partition_point(|&f| f < n);
                let (f0, f1) = (subcarriers[j1 - 1], subcarriers[j1]);
                if f1 == n {
                    (j1, j1, 0.0)
                } else {
                    (j1 - 1, j1, (n - f0) as f64 / (f1 - f0) as f64)
                }
            };
            for a in 0..antennas {
                let v0 = pilot_est[(si * nf + j0) * antennas + a];
                let v1 = pilot_est[(si * nf + j1) * antennas + a];
                rows[(si * slot_subcarriers + n) * antennas + a] = v0 + (v1 - v0) * C64::new(w, 0.0);
            }
        }
    }

    // Pass 2: extend across symbols.
    let mut grid = vec![C64::new(0.0, 0.0); slot_symbols * slot_subcarriers * antennas];
    for m in 0..slot_symbols {
        let (s0, s1, w) = match mode {
            InterpolationMode::Spectral => {
                // Nearest pilot symbol; ties resolve to the lower index.
                let mut best = 0usize;
                let mut best_d = usize::MAX;
                for (i, &s) in symbols.iter().enumerate() {
                    let d = m.abs_diff(s);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                (best, best, 0.0)
            }
            InterpolationMode::SpectralTemporal => {
                if m <= symbols[0] {
                    (0, 0, 0.0)
                } else if m >= symbols[ns - 1] {
                    (ns - 1, ns - 1, 0.0)
                } else {
                    let i1 = symbols.partition_point(|&s| s < m);
                    let (t0, t1) = (symbols[i1 - 1], symbols[i1]);
                    if t1 == m {
                        (i1, i1, 0.0)
                    } else {
                        (i1 - 1, i1, (m - t0) as f64 / (t1 - t0) as f64)
                    }
                }
            }
        };
        for n in 0..slot_subcarriers {
            for a in 0..antennas {
                let v0 = rows[(s0 * slot_subcarriers + n) * antennas + a];
                let v1 = rows[(s1 * slot_subcarriers + n) * antennas + a];
                grid[(m * slot_subcarriers + n) * antennas + a] = v0 + (v1 - v0) * C64::new(w, 0.0);
            }
        }
    }
    Ok(grid)
}

/// Run estimation and interpolation for every user, producing a frame-sized
/// estimate tensor. Only the uplink slot (the first `slot_symbols` symbols)
/// is filled; any downlink half of the frame stays null, since no uplink
/// pilots exist there — downlink processing extends the estimate by
/// reciprocity where it needs one.
#[allow(clippy::too_many_arguments)]
pub fn interpolate_all_users(
    per_user_estimates: &[CVec],
    pattern: &PilotPattern,
    antennas: usize,
    slot_symbols: usize,
    total_symbols: usize,
    slot_subcarriers: usize,
    mode: InterpolationMode,
) -> Result<ChannelTensor> {
    let users = pattern.users();
    if per_user_estimates.len() != users {
        return Err(Error::DimensionMismatch(format!(
            "{} estimate vectors for {} users",
            per_user_estimates.len(),
            users
        )));
    }
    let mut out = ChannelTensor::zeros(total_symbols, slot_subcarriers, antennas, users);
    for k in 0..users {
        let grid = interpolate_user_grid(
            &per_user_estimates[k],
            pattern.user_symbols(k),
            pattern.user_subcarriers(k),
            antennas,
            slot_symbols,
            slot_subcarriers,
            mode,
        )?;
        for m in 0..slot_symbols {
            for n in 0..slot_subcarriers {
                for a in 0..antennas {
                    out.set(m, n, a, k, grid[(m * slot_subcarriers + n) * antennas + a]);
                }
            }
        }
    }
    Ok(out)
}

/// Per-RE aggregated estimation-error covariance `E_{m,n} = sum_k E^(k)_{m,n}`.
#[derive(Debug, Clone)]
pub struct ErrorCovarianceGrid {
    symbols: usize,
    subcarriers: usize,
    antennas: usize,
    blocks: Vec<CMat>,
}

impl ErrorCovarianceGrid {
    /// An all-zero grid (perfect CSI, or estimators that ignore their error).
    pub fn zeros(symbols: usize, subcarriers: usize, antennas: usize) -> Self {
        Self {
            symbols,
            subcarriers,
            antennas,
            blocks: vec![CMat::zeros(antennas, antennas); symbols * subcarriers],
        }
    }

    /// The same `L x L` block on every RE (power-decay model with constant
    /// parameters, for instance).
    pub fn uniform(symbols: usize, subcarriers: usize, block: CMat) -> Self {
        let antennas = block.nrows();
        Self { symbols, subcarriers, antennas, blocks: vec![block; symbols * subcarriers] }
    }

    /// Assemble from per-user pilot error blocks by nearest-pilot fill.
    ///
    /// `per_user_blocks[k]` holds user `k`'s spatial blocks in vectorization
    /// order. Each RE `(m, n)` takes, per user, the block of the pilot RE
    /// minimizing the Euclidean distance in the `(symbol, subcarrier)`
    /// plane — ties resolve to the lower symbol index, then the lower
    /// subcarrier — and sums the chosen blocks over users.
    pub fn assemble(
        per_user_blocks: &[Vec<CMat>],
        pattern: &PilotPattern,
        symbols: usize,
        subcarriers: usize,
    ) -> Result<Self> {
        let users = pattern.users();
        if per_user_blocks.len() != users {
            return Err(Error::DimensionMismatch(format!(
                "{} block lists for {} users",
                per_user_blocks.len(),
                users
            )));
        }
        let mut antennas = 0;
        for (k, blocks) in per_user_blocks.iter().enumerate() {
            if blocks.len() != pattern.num_pilots(k) {
                return Err(Error::DimensionMismatch(format!(
                    "user {k}: {} blocks for {} pilot REs",
                    blocks.len(),
                    pattern.num_pilots(k)
                )));
            }
            antennas = blocks[0].nrows();
        }
        let mut grid = Self::zeros(symbols, subcarriers, antennas);
        for k in 0..users {
            let positions = pattern.user_positions(k);
            for m in 0..symbols {
                for n in 0..subcarriers {
                    let mut best = 0usize;
                    let mut best_key = (usize::MAX, usize::MAX, usize::MAX);
                    for (p, &(pm, pn)) in positions.iter().enumerate() {
                        let d2 = pm.abs_diff(m).pow(2) + pn.abs_diff(n).pow(2);
                        let key = (d2, pm, pn);
                        if key < best_key {
                            best_key = key;
                            best = p;
                        }
                    }
                    grid.blocks[m * subcarriers + n] += &per_user_blocks[k][best];
                }
            }
        }
        Ok(grid)
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn block(&self, m: usize, n: usize) -> &CMat {
        &self.blocks[m * self.subcarriers + n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CombLayout, Duplex, GridConfig};
    use crate::linalg::{cn01_matrix, psd_eigen, psd_sqrt, rel_frobenius};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(d: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = cn01_matrix(d, d, &mut rng);
        hermitize(&(&g * g.adjoint() / C64::new(d as f64, 0.0)))
    }

    #[test]
    fn scalar_wiener_reference() {
        // Sigma = 1, sigma2 = 1: the estimate halves the observation and
        // the error variance is 1/2.
        let sigma = CMat::identity(1, 1);
        let y = CVec::from_element(1, C64::new(0.8, -0.2));
        let est = lmmse_pilot_estimate(&y, &sigma, 1.0).unwrap();
        assert!((est[0] - C64::new(0.4, -0.1)).norm() < 1e-14);
        let e = pilot_error_covariance(&sigma, 1.0).unwrap();
        assert!((e[(0, 0)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn error_covariance_forms_agree() {
        // Sigma - Sigma (Sigma + s I)^{-1} Sigma == s (Sigma + s I)^{-1} Sigma.
        for seed in 0..5u64 {
            let sigma = random_psd(6, seed);
            let s2 = 0.25;
            let e1 = pilot_error_covariance(&sigma, s2).unwrap();
            let mut reg = sigma.clone();
            for i in 0..6 {
                reg[(i, i)] += C64::new(s2, 0.0);
            }
            let e2 = hermitian_solve(&reg, &sigma).unwrap() * C64::new(s2, 0.0);
            assert!(rel_frobenius(&e1, &hermitize(&e2)) < 1e-12);
        }
    }

    #[test]
    fn error_covariance_is_psd_and_below_sigma() {
        for seed in 10..15u64 {
            let sigma = random_psd(8, seed);
            let e = pilot_error_covariance(&sigma, 0.1).unwrap();
            assert!(psd_eigen(&e, "E_P").is_ok());
            assert!(psd_eigen(&hermitize(&(&sigma - &e)), "Sigma - E_P").is_ok());
        }
    }

    #[test]
    fn monte_carlo_error_covariance_matches_formula() {
        let d = 6;
        let sigma = random_psd(d, 99);
        let s2: f64 = 0.2;
        let sqrt_sigma = psd_sqrt(&sigma, "Sigma").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 6000;
        let mut samples = Vec::with_capacity(trials);
        for _ in 0..trials {
            let h = &sqrt_sigma * CVec::from_fn(d, |_, _| crate::linalg::cn01(&mut rng));
            let noise = CVec::from_fn(d, |_, _| crate::linalg::cn01(&mut rng)) * C64::new(s2.sqrt(), 0.0);
            let est = lmmse_pilot_estimate(&(&h + noise), &sigma, s2).unwrap();
            samples.push(est - h);
        }
        let emp = empirical_covariance(&samples).unwrap();
        let e_p = pilot_error_covariance(&sigma, s2).unwrap();
        assert!(rel_frobenius(&emp, &e_p) < 0.10, "relative error {}", rel_frobenius(&emp, &e_p));
    }

    #[test]
    fn spatial_blocks_tile_the_stacked_covariance() {
        let sigma = random_psd(6, 3);
        let blocks = spatial_error_blocks(&sigma, 2).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[1][(0, 1)], sigma[(2, 3)]);
        assert!(spatial_error_blocks(&sigma, 4).is_err());
    }

    #[test]
    fn frequency_interpolation_matches_hand_values() {
        // One pilot symbol, pilots on subcarriers 1 and 5, one antenna.
        let (v, w) = (C64::new(1.0, 1.0), C64::new(3.0, -1.0));
        let est = CVec::from_vec(vec![v, w]);
        let g = interpolate_user_grid(&est, &[2], &[1, 5], 1, 6, 8, InterpolationMode::Spectral).unwrap();
        let at = |m: usize, n: usize| g[m * 8 + n];
        assert_eq!(at(2, 1), v);
        assert_eq!(at(2, 5), w);
        // Midpoint: v + (2/4)(w - v).
        assert!((at(2, 3) - (v + (w - v) * C64::new(0.5, 0.0))).norm() < 1e-15);
        // Quarter point.
        assert!((at(2, 2) - (v + (w - v) * C64::new(0.25, 0.0))).norm() < 1e-15);
        // Outside the span: nearest value, never extrapolated.
        assert_eq!(at(2, 0), v);
        assert_eq!(at(2, 6), w);
        assert_eq!(at(2, 7), w);
        // Other symbols copy the single pilot symbol.
        assert_eq!(at(0, 3), at(2, 3));
        assert_eq!(at(5, 0), v);
    }

    #[test]
    fn temporal_interpolation_matches_hand_values() {
        // Pilot symbols 3 and 10: symbol 7 gets v + (4/7)(w - v).
        let (v, w) = (C64::new(2.0, 0.0), C64::new(0.0, 2.0));
        let est = CVec::from_vec(vec![v, w]);
        let g = interpolate_user_grid(&est, &[3, 10], &[0], 1, 14, 1, InterpolationMode::SpectralTemporal).unwrap();
        let expected = v + (w - v) * C64::new(4.0 / 7.0, 0.0);
        assert!((g[7] - expected).norm() < 1e-15);
        // Outside the span the fill is constant.
        assert_eq!(g[0], v);
        assert_eq!(g[13], w);
        // Spectral-only mode snaps to the nearest pilot symbol instead:
        // symbol 6 is 3 away from pilot 3 and 4 away from pilot 10.
        let s = interpolate_user_grid(&est, &[3, 10], &[0], 1, 14, 1, InterpolationMode::Spectral).unwrap();
        assert_eq!(s[6], v);
        assert_eq!(s[8], w);
    }

    #[test]
    fn nearest_symbol_tie_breaks_to_lower_index() {
        let (v, w) = (C64::new(1.0, 0.0), C64::new(-1.0, 0.0));
        let est = CVec::from_vec(vec![v, w]);
        // Pilot symbols 2 and 4: symbol 3 is equidistant, takes symbol 2.
        let g = interpolate_user_grid(&est, &[2, 4], &[0], 1, 6, 1, InterpolationMode::Spectral).unwrap();
        assert_eq!(g[3], v);
    }

    #[test]
    fn assembly_picks_nearest_pilot_blocks_and_sums_users() {
        let cfg = GridConfig {
            symbols: 4,
            subcarriers: 4,
            users: 2,
            antennas: 2,
            bits_per_symbol: 2,
            sigma2: 0.1,
            duplex: Duplex::UplinkOnly,
        };
        // User 0 pilots: (1, 0) and (1, 2); user 1 pilots: (2, 1) and (2, 3).
        let pattern = PilotPattern::custom(&cfg, &[(0, 1, 0), (0, 1, 2), (1, 2, 1), (1, 2, 3)]).unwrap();
        let b = |v: f64| CMat::identity(2, 2) * C64::new(v, 0.0);
        let blocks = vec![vec![b(1.0), b(2.0)], vec![b(10.0), b(20.0)]];
        let grid = ErrorCovarianceGrid::assemble(&blocks, &pattern, 4, 4).unwrap();
        // RE (0, 0): user 0's nearest pilot is (1,0) -> 1; user 1's is (2,1) -> 10.
        assert!((grid.block(0, 0)[(0, 0)].re - 11.0).abs() < 1e-14);
        // RE (3, 3): user 0 nearest (1,2) -> 2; user 1 nearest (2,3) -> 20.
        assert!((grid.block(3, 3)[(0, 0)].re - 22.0).abs() < 1e-14);
        // RE (1, 1) ties user 0's pilots (1,0) and (1,2) at distance 1;
        // the lower subcarrier wins -> 1. User 1 nearest is (2,1) -> 10.
        assert!((grid.block(1, 1)[(0, 0)].re - 11.0).abs() < 1e-14);
    }

    #[test]
    fn power_decay_covariance_reference() {
        let p = PowerDecayParams { alpha: 0.5, beta: 0.8, gamma: 0.3 };
        let c = power_decay_covariance(&p, 3).unwrap();
        assert!((c[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-15);
        let expect = C64::from_polar(0.5 * 0.8, 0.3);
        assert!((c[(0, 1)] - expect).norm() < 1e-15);
        assert!((c[(1, 0)] - expect.conj()).norm() < 1e-15);
        let expect2 = C64::from_polar(0.5 * 0.64, 0.6);
        assert!((c[(0, 2)] - expect2).norm() < 1e-15);
        assert!(psd_eigen(&c, "power decay").is_ok());
        // Parameter validation.
        assert!(power_decay_covariance(&PowerDecayParams { alpha: 0.0, ..p }, 3).is_err());
        assert!(power_decay_covariance(&PowerDecayParams { beta: 1.5, ..p }, 3).is_err());
    }

    #[test]
    fn empirical_covariance_matches_direct_sum() {
        let v1 = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let v2 = CVec::from_vec(vec![C64::new(0.0, -1.0), C64::new(2.0, 0.0)]);
        let c = empirical_covariance(&[v1.clone(), v2.clone()]).unwrap();
        let direct = (&v1 * v1.adjoint() + &v2 * v2.adjoint()) / C64::new(2.0, 0.0);
        assert!(rel_frobenius(&c, &direct) < 1e-15);
        assert!(empirical_covariance(&[]).is_err());
    }

    #[test]
    fn model_pilot_covariance_has_kronecker_structure() {
        let cfg = GridConfig {
            symbols: 14,
            subcarriers: 12,
            users: 4,
            antennas: 4,
            bits_per_symbol: 2,
            sigma2: 0.1,
            duplex: Duplex::UplinkOnly,
        };
        let pattern = PilotPattern::comb(&cfg, CombLayout::OneP).unwrap();
        let scat = ScatteringModel::new(4, 0.5, 0.15, 0.5).unwrap();
        let sel = TemporalSpectralModel { doppler: 0.05, delay_spread: 0.03 };
        let sigma = model_pilot_covariance(&scat, &sel, &pattern, 0);
        let p = pattern.num_pilots(0);
        assert_eq!(sigma.nrows(), p * 4);
        // The first diagonal L x L block is the spatial covariance itself
        // (unit time/frequency correlation at lag zero).
        for a in 0..4 {
            for b in 0..4 {
                assert!((sigma[(a, b)] - scat.covariance()[(a, b)]).norm() < 1e-12);
            }
        }
        // Block (0, 1) scales the spatial covariance by the frequency
        // correlation across one comb step (lag -2 here).
        let rf = sel.freq_correlation(-2);
        assert!((sigma[(0, 4)] - rf * scat.covariance()[(0, 0)]).norm() < 1e-12);
        assert!(psd_eigen(&sigma, "model Sigma").is_ok());
    }

    #[test]
    fn pilot_re_estimates_pass_through_interpolation() {
        // Estimates at pilot REs survive interpolation bit-exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (syms, subs, l) = (vec![2usize, 9], vec![1usize, 4, 7], 2usize);
        let est = CVec::from_fn(syms.len() * subs.len() * l, |_, _| crate::linalg::cn01(&mut rng));
        for mode in [InterpolationMode::Spectral, InterpolationMode::SpectralTemporal] {
            let g = interpolate_user_grid(&est, &syms, &subs, l, 14, 12, mode).unwrap();
            for (si, &s) in syms.iter().enumerate() {
                for (fi, &f) in subs.iter().enumerate() {
                    for a in 0..l {
                        assert_eq!(g[(s * 12 + f) * l + a], est[(si * subs.len() + fi) * l + a]);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn error_covariance_stays_psd(seed in 0u64..40, s2 in 0.01f64..2.0) {
            let sigma = random_psd(5, seed);
            let e = pilot_error_covariance(&sigma, s2).unwrap();
            prop_assert!(psd_eigen(&e, "prop E_P").is_ok());
            // Trace shrinks monotonically with SNR: tr E_P <= tr Sigma.
            let tr = |m: &CMat| (0..5).map(|i| m[(i, i)].re).sum::<f64>();
            prop_assert!(tr(&e) <= tr(&sigma) + 1e-12);
        }

        #[test]
        fn interpolation_is_exact_for_linear_fields(slope_re in -1.0f64..1.0, offset in -1.0f64..1.0) {
            // A field linear in the subcarrier index is reproduced exactly
            // inside the pilot span, whatever the pilot spacing.
            let subs = vec![0usize, 3, 9];
            let est = CVec::from_fn(3, |i, _| C64::new(slope_re * subs[i] as f64 + offset, 0.0));
            let g = interpolate_user_grid(&est, &[0], &subs, 1, 1, 10, InterpolationMode::Spectral).unwrap();
            for n in 0..=9 {
                let expect = slope_re * n as f64 + offset;
                prop_assert!((g[n].re - expect).abs() < 1e-12);
            }
        }
    }
}
