//! Grouped LMMSE uplink equalization.
//!
//! Inverting an `L x L` system on every resource element is wasteful when
//! the channel is strongly correlated across neighboring REs, so the slot
//! is tiled into small groups (2 symbols x 7 subcarriers by default) that
//! share one equalization matrix:
//!
//! ```text
//! W = (sum_G Hhat^H) * (sum_G (Hhat Hhat^H + Ehat + sigma2 I))^{-1}
//! ```
//!
//! where the sums run over the group's REs, `Hhat` is the estimated `L x K`
//! channel and `Ehat` the aggregated estimation-error covariance of that
//! RE. Treating the estimate as exact would make the equalizer
//! overconfident; the `Ehat` term keeps it honest about estimation error.
//!
//! `W` is shared across the group, but the diagonal rescaling
//! `D = ((W Hhat) o I)^{-1}` and the post-equalization variance are per RE,
//! so every RE still gets an unbiased symbol estimate and a matched noise
//! variance for soft demapping.

use std::ops::Range;

use crate::linalg::{hermitian_solve, C64, CMat, CVec};
use crate::{Error, Result};

/// Group tiling of a slot, in REs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupShape {
    pub symbols: usize,
    pub subcarriers: usize,
}

impl Default for GroupShape {
    /// Two symbols by seven subcarriers.
    fn default() -> Self {
        Self { symbols: 2, subcarriers: 7 }
    }
}

impl GroupShape {
    pub fn validate(&self) -> Result<()> {
        if self.symbols == 0 || self.subcarriers == 0 {
            return Err(Error::InvalidConfig(format!(
                "group shape {}x{}: both sides must be positive",
                self.symbols, self.subcarriers
            )));
        }
        Ok(())
    }
}

/// Tile a `symbols x subcarriers` slot into groups of at most
/// `shape.symbols x shape.subcarriers` REs; border groups may be smaller.
/// Every RE lands in exactly one group.
pub fn partition_slot(symbols: usize, subcarriers: usize, shape: GroupShape) -> Vec<(Range<usize>, Range<usize>)> {
    let mut out = Vec::new();
    let mut m = 0;
    while m < symbols {
        let m_end = (m + shape.symbols).min(symbols);
        let mut n = 0;
        while n < subcarriers {
            let n_end = (n + shape.subcarriers).min(subcarriers);
            out.push((m..m_end, n..n_end));
            n = n_end;
        }
        m = m_end;
    }
    out
}

/// The shared LMMSE matrix of one group.
///
/// `channels[i]` is the `L x K` estimate and `errors[i]` the `L x L`
/// aggregated error covariance of the group's i-th RE. The noise term
/// `sigma2 I` enters once per RE, so the summed Gram matrix gets
/// `|G| * sigma2 I`.
pub fn grouped_lmmse_matrix(channels: &[CMat], errors: &[CMat], sigma2: f64) -> Result<CMat> {
    if channels.is_empty() || channels.len() != errors.len() {
        return Err(Error::DimensionMismatch(format!(
            "group has {} channel matrices and {} error covariances",
            channels.len(),
            errors.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!("noise variance {sigma2} must be positive")));
    }
    let (l, k) = (channels[0].nrows(), channels[0].ncols());
    let mut num = CMat::zeros(k, l);
    let mut gram = CMat::zeros(l, l);
    for (h, e) in channels.iter().zip(errors) {
        if h.nrows() != l || h.ncols() != k || e.nrows() != l || e.ncols() != l {
            return Err(Error::DimensionMismatch(
                "inconsistent channel/error dimensions inside a group".into(),
            ));
        }
        num += h.adjoint();
        gram += h * h.adjoint() + e;
    }
    let g = channels.len() as f64;
    for i in 0..l {
        gram[(i, i)] += C64::new(g * sigma2, 0.0);
    }
    // W = num * gram^{-1}; with gram Hermitian this is (gram^{-1} num^H)^H.
    Ok(hermitian_solve(&gram, &num.adjoint())?.adjoint())
}

/// Per-RE diagonal rescaling `D = ((W Hhat) o I)^{-1}`, returned as the
/// diagonal. Fails with the stream index if a diagonal entry vanishes
/// (numerically zero or non-finite), which means that stream cannot be
/// recovered on this RE.
pub fn rescale_diagonal(w: &CMat, h: &CMat) -> Result<CVec> {
    let k = w.nrows();
    if h.ncols() != k || h.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "W is {}x{}, Hhat is {}x{}",
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let mut d = CVec::zeros(k);
    for s in 0..k {
        let mut diag = C64::new(0.0, 0.0);
        for l in 0..w.ncols() {
            diag += w[(s, l)] * h[(l, s)];
        }
        if !diag.norm().is_normal() {
            return Err(Error::StreamDegenerate {
                stream: s,
                reason: format!("(W Hhat) diagonal entry {diag} is numerically zero"),
            });
        }
        d[s] = C64::new(1.0, 0.0) / diag;
    }
    Ok(d)
}

/// Equalize one RE: `xhat = D W y`.
pub fn equalize_re(y: &CVec, w: &CMat, d: &CVec) -> Result<CVec> {
    if y.len() != w.ncols() || d.len() != w.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "W is {}x{}, y has {}, D has {}",
            w.nrows(),
            w.ncols(),
            y.len(),
            d.len()
        )));
    }
    let mut x = w * y;
    for s in 0..x.len() {
        x[s] *= d[s];
    }
    Ok(x)
}

/// Post-equalization noise-plus-interference variance of stream `k` on one
/// RE:
///
/// ```text
/// rho2_k = w (Hhat_-k Hhat_-k^H + Ehat + sigma2 I) w^H / |w hhat_k|^2
/// ```
///
/// with `w` the k-th row of the (group) `W` and `Hhat_-k` the estimate with
/// user `k`'s column removed. The expression has degree zero in `w`, so any
/// rescaling of the equalization matrix leaves it unchanged; the rescaled
/// estimate `xhat_k = x_k + error` then has exactly this error variance
/// under the estimated-channel model.
pub fn post_eq_variance(w: &CMat, h: &CMat, e: &CMat, sigma2: f64, k: usize) -> Result<f64> {
    let (streams, l) = (w.nrows(), w.ncols());
    if k >= streams {
        return Err(Error::InvalidInput(format!("stream {k} out of {streams}")));
    }
    if h.nrows() != l || h.ncols() != streams || e.nrows() != l || e.ncols() != l {
        return Err(Error::DimensionMismatch(format!(
            "W {}x{}, Hhat {}x{}, Ehat {}x{}",
            streams,
            l,
            h.nrows(),
            h.ncols(),
            e.nrows(),
            e.ncols()
        )));
    }
    let row = w.row(k);
    // numerator: w (H H^H - h_k h_k^H + E + sigma2 I) w^H, computed via
    // the row-vector images to stay O(K L) + O(L^2).
    let mut wh = vec![C64::new(0.0, 0.0); streams]; // (w * H)_i = w hhat_i
    for i in 0..streams {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..l {
            acc += row[a] * h[(a, i)];
        }
        wh[i] = acc;
    }
    let mut num = 0.0;
    for (i, &v) in wh.iter().enumerate() {
        if i != k {
            num += v.norm_sqr();
        }
    }
    let mut we = C64::new(0.0, 0.0);
    for a in 0..l {
        for b in 0..l {
            we += row[a] * e[(a, b)] * row[b].conj();
        }
    }
    num += we.re;
    let mut w2 = 0.0;
    for a in 0..l {
        w2 += row[a].norm_sqr();
    }
    num += sigma2 * w2;
    let den = wh[k].norm_sqr();
    if !den.is_normal() {
        return Err(Error::StreamDegenerate {
            stream: k,
            reason: "effective channel w * hhat_k vanishes".into(),
        });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cn01, cn01_matrix, cn01_vector, rel_frobenius};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Closed-form Wiener filter in its `K x K` form: `(H^H H + s I)^{-1} H^H`.
    fn wiener_kform(h: &CMat, sigma2: f64) -> CMat {
        let k = h.ncols();
        let mut gram = h.adjoint() * h;
        for i in 0..k {
            gram[(i, i)] += C64::new(sigma2, 0.0);
        }
        hermitian_solve(&gram, &h.adjoint()).unwrap()
    }

    #[test]
    fn singleton_group_matches_wiener_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let h = cn01_matrix(4, 2, &mut rng);
            let e = CMat::zeros(4, 4);
            let w = grouped_lmmse_matrix(&[h.clone()], &[e], 0.3).unwrap();
            let reference = wiener_kform(&h, 0.3);
            assert!(rel_frobenius(&w, &reference) < 1e-12);
        }
    }

    #[test]
    fn rescaled_diagonal_is_exactly_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = cn01_matrix(6, 3, &mut rng);
        let e = cn01_matrix(6, 6, &mut rng);
        let e = &e * e.adjoint() * C64::new(0.05, 0.0);
        let w = grouped_lmmse_matrix(&[h.clone()], &[e], 0.2).unwrap();
        let d = rescale_diagonal(&w, &h).unwrap();
        for s in 0..3 {
            let mut diag = C64::new(0.0, 0.0);
            for l in 0..6 {
                diag += d[s] * w[(s, l)] * h[(l, s)];
            }
            assert!((diag - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_channel_reports_the_dead_stream() {
        let h = CMat::zeros(4, 2);
        let w = CMat::from_fn(2, 4, |i, j| C64::new((i + j) as f64, 0.0));
        match rescale_diagonal(&w, &h) {
            Err(Error::StreamDegenerate { stream, .. }) => assert_eq!(stream, 0),
            other => panic!("expected StreamDegenerate, got {other:?}"),
        }
    }

    #[test]
    fn scalar_awgn_variance_is_sigma2() {
        // K = L = 1, h = 1, E = 0, any nonzero w: rho2 = sigma2.
        let h = CMat::identity(1, 1);
        let e = CMat::zeros(1, 1);
        let w = CMat::from_element(1, 1, C64::new(0.7, -0.3));
        let rho2 = post_eq_variance(&w, &h, &e, 0.17, 0).unwrap();
        assert!((rho2 - 0.17).abs() < 1e-14);
    }

    #[test]
    fn variance_is_invariant_to_row_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = cn01_matrix(4, 2, &mut rng);
        let e = {
            let g = cn01_matrix(4, 4, &mut rng);
            &g * g.adjoint() * C64::new(0.1, 0.0)
        };
        let w = grouped_lmmse_matrix(&[h.clone()], &[e.clone()], 0.25).unwrap();
        let base = post_eq_variance(&w, &h, &e, 0.25, 1).unwrap();
        let scaled = &w * C64::new(-2.3, 4.1);
        let after = post_eq_variance(&scaled, &h, &e, 0.25, 1).unwrap();
        assert!((base - after).abs() / base < 1e-12);
    }

    #[test]
    fn variance_predicts_monte_carlo_mse() {
        // Perfect CSI on a fixed channel: the analytic rho2 must match the
        // empirical per-stream error variance of D W y.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = cn01_matrix(4, 2, &mut rng);
        let e = CMat::zeros(4, 4);
        let sigma2 = 0.2;
        let w = grouped_lmmse_matrix(&[h.clone()], &[e.clone()], sigma2).unwrap();
        let d = rescale_diagonal(&w, &h).unwrap();
        let trials = 40_000;
        let mut mse = [0.0f64; 2];
        for _ in 0..trials {
            let x = cn01_vector(2, &mut rng); // unit-power Gaussian symbols
            let noise = cn01_vector(4, &mut rng) * C64::new(sigma2.sqrt(), 0.0);
            let y = &h * &x + noise;
            let xhat = equalize_re(&y, &w, &d).unwrap();
            for s in 0..2 {
                mse[s] += (xhat[s] - x[s]).norm_sqr();
            }
        }
        for s in 0..2 {
            let empirical = mse[s] / trials as f64;
            let predicted = post_eq_variance(&w, &h, &e, sigma2, s).unwrap();
            assert!(
                (empirical / predicted - 1.0).abs() < 0.05,
                "stream {s}: MC {empirical:.5} vs analytic {predicted:.5}"
            );
        }
    }

    #[test]
    fn error_covariance_term_raises_the_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = cn01_matrix(4, 2, &mut rng);
        let w = wiener_kform(&h, 0.1);
        let clean = post_eq_variance(&w, &h, &CMat::zeros(4, 4), 0.1, 0).unwrap();
        let e = CMat::identity(4, 4) * C64::new(0.3, 0.0);
        let noisy = post_eq_variance(&w, &h, &e, 0.1, 0).unwrap();
        assert!(noisy > clean);
    }

    #[test]
    fn partition_covers_slot_without_overlap() {
        let shape = GroupShape::default();
        let parts = partition_slot(14, 12, shape);
        // 14 symbols -> 7 row bands; 12 subcarriers -> groups of 7 and 5.
        assert_eq!(parts.len(), 14);
        let mut seen = vec![false; 14 * 12];
        for (ms, ns) in &parts {
            assert!(ms.len() <= 2 && ns.len() <= 7);
            for m in ms.clone() {
                for n in ns.clone() {
                    assert!(!seen[m * 12 + n], "RE ({m},{n}) covered twice");
                    seen[m * 12 + n] = true;
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn group_matrix_uses_every_member_re() {
        // Two REs with different channels: the group matrix differs from
        // each singleton's, confirming the sums actually aggregate.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h1 = cn01_matrix(4, 2, &mut rng);
        let h2 = cn01_matrix(4, 2, &mut rng);
        let e = CMat::zeros(4, 4);
        let w12 = grouped_lmmse_matrix(&[h1.clone(), h2.clone()], &[e.clone(), e.clone()], 0.2).unwrap();
        let w1 = grouped_lmmse_matrix(&[h1], &[e.clone()], 0.2).unwrap();
        let w2 = grouped_lmmse_matrix(&[h2], &[e], 0.2).unwrap();
        assert!(rel_frobenius(&w12, &w1) > 1e-3);
        assert!(rel_frobenius(&w12, &w2) > 1e-3);
    }

    proptest! {
        #[test]
        fn wiener_forms_agree_for_random_channels(seed in 0u64..50, s2 in 0.01f64..1.0) {
            // Transposed Wiener identity:
            // H^H (H H^H + s I_L)^{-1} == (H^H H + s I_K)^{-1} H^H.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = cn01_matrix(4, 2, &mut rng);
            let mut gram_l = &h * h.adjoint();
            for i in 0..4 {
                gram_l[(i, i)] += C64::new(s2, 0.0);
            }
            let lform = hermitian_solve(&gram_l, &CMat::identity(4, 4)).unwrap();
            let lform = h.adjoint() * lform;
            prop_assert!(rel_frobenius(&lform, &wiener_kform(&h, s2)) < 1e-9);
        }

        #[test]
        fn variance_is_positive_and_scales_with_noise(seed in 0u64..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = cn01_matrix(4, 2, &mut rng);
            let e = CMat::zeros(4, 4);
            let w = wiener_kform(&h, 0.1);
            let lo = post_eq_variance(&w, &h, &e, 0.05, 0).unwrap();
            let hi = post_eq_variance(&w, &h, &e, 0.5, 0).unwrap();
            prop_assert!(lo > 0.0);
            prop_assert!(hi > lo);
        }
    }

    #[test]
    fn scaled_equalizer_preserves_symbol_estimates() {
        // D compensates any left scaling of W: the end-to-end estimate is
        // unchanged (up to rounding) when W is multiplied by a constant.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h = cn01_matrix(4, 2, &mut rng);
        let w = wiener_kform(&h, 0.2);
        let y = cn01_vector(4, &mut rng);
        let d = rescale_diagonal(&w, &h).unwrap();
        let x1 = equalize_re(&y, &w, &d).unwrap();
        let ws = &w * cn01(&mut rng);
        let ds = rescale_diagonal(&ws, &h).unwrap();
        let x2 = equalize_re(&y, &ws, &ds).unwrap();
        assert!((&x1 - &x2).norm() < 1e-12 * x1.norm());
    }
}
