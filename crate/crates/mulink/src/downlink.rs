//! Downlink precoding by uplink–downlink duality and the matching
//! single-antenna receiver.
//!
//! The base station reuses the uplink equalization matrix `W` as a
//! precoder. A diagonal normalization `C = ((W W^H) o I)^{-1/2}` fixes the
//! transmit power budget: with `t = W^H (C s)` and unit-energy independent
//! symbols, `E[||t||^2] = tr(W^H C^2 W) = K` exactly, one unit per user.
//!
//! Each user `k` sees the scalar chain `u = g_k^T s + q` with the
//! equivalent channel row `g_k^T = h_k^H W^H C`, i.e. `G = H^H W^H C`
//! stacked over users. Users estimate their own row from precoded downlink
//! pilots — the main coefficient `g_kk` on their own pilot REs and each
//! interfering coefficient `g_ki` on user `i`'s pilot REs — via per-RE
//! scalar LMMSE driven by the cell-wide covariances `Omega` (main) and
//! `Psi` (interfering, shared across interferers), then divide: `shat =
//! u / ghat_kk`, with the post-equalization variance
//!
//! ```text
//! tau2 = (v_kk + ||ghat_-k||^2 + sum_{i != k} v_i + sigma2) / |ghat_kk|^2
//! ```
//!
//! where `v` are the coefficient estimation-error variances on that RE.

use crate::chanest;
use crate::linalg::{C64, CMat, CVec};
use crate::{Error, Result};

/// Diagonal of the power normalization `C = ((W W^H) o I)^{-1/2}`:
/// `c_k = 1 / ||k-th row of W||`. A zero row means stream `k` has no
/// precoding direction at all.
pub fn normalization_diagonal(w: &CMat) -> Result<Vec<f64>> {
    let mut c = Vec::with_capacity(w.nrows());
    for k in 0..w.nrows() {
        let norm2: f64 = (0..w.ncols()).map(|l| w[(k, l)].norm_sqr()).sum();
        if !norm2.is_normal() {
            return Err(Error::StreamDegenerate {
                stream: k,
                reason: format!("precoder row norm^2 = {norm2}"),
            });
        }
        c.push(norm2.sqrt().recip());
    }
    Ok(c)
}

/// Precode one RE's symbol vector: `t = W^H (C s)`.
pub fn precode(s: &CVec, w: &CMat, c: &[f64]) -> Result<CVec> {
    let k = w.nrows();
    if s.len() != k || c.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "W has {k} rows, s has {} entries, C has {}",
            s.len(),
            c.len()
        )));
    }
    let scaled = CVec::from_fn(k, |i, _| s[i] * C64::new(c[i], 0.0));
    Ok(w.adjoint() * scaled)
}

/// Equivalent downlink channel `G = H^H W^H C` (`K x K`): row `k` is what
/// user `k` receives per transmitted stream.
pub fn equivalent_channel(h: &CMat, w: &CMat, c: &[f64]) -> Result<CMat> {
    let k = w.nrows();
    if h.nrows() != w.ncols() || h.ncols() != k || c.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "H {}x{}, W {}x{}, C diag {}",
            h.nrows(),
            h.ncols(),
            k,
            w.ncols(),
            c.len()
        )));
    }
    let mut g = h.adjoint() * w.adjoint();
    for j in 0..k {
        let cj = C64::new(c[j], 0.0);
        for i in 0..k {
            g[(i, j)] *= cj;
        }
    }
    Ok(g)
}

/// Scalar LMMSE estimation of equivalent-channel coefficients over one
/// pilot lattice: returns the stacked estimates together with the per-RE
/// estimation-error variances (the diagonal of the scalar error
/// covariance). `cov` is `Omega` for a user's own coefficient, `Psi` for an
/// interfering one.
pub fn estimate_coefficients(u_pilots: &CVec, cov: &CMat, sigma2: f64) -> Result<(CVec, Vec<f64>)> {
    let est = chanest::lmmse_pilot_estimate(u_pilots, cov, sigma2)?;
    let e = chanest::pilot_error_covariance(cov, sigma2)?;
    let v = (0..e.nrows()).map(|i| e[(i, i)].re.max(0.0)).collect();
    Ok((est, v))
}

/// Nearest-pilot fill of scalar values over a slot grid.
///
/// `positions` lists the pilot REs in vectorization order with slot-local
/// symbol indices; each grid RE copies the value of its nearest pilot in
/// Euclidean `(symbol, subcarrier)` distance, ties resolved toward the
/// lower symbol then the lower subcarrier. Returned row-major
/// `[m * subcarriers + n]`.
pub fn nearest_fill_scalar(
    values: &[f64],
    positions: &[(usize, usize)],
    symbols: usize,
    subcarriers: usize,
) -> Result<Vec<f64>> {
    if values.len() != positions.len() || values.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} pilot positions",
            values.len(),
            positions.len()
        )));
    }
    let mut out = vec![0.0; symbols * subcarriers];
    for m in 0..symbols {
        for n in 0..subcarriers {
            let mut best = 0usize;
            let mut best_key = (usize::MAX, usize::MAX, usize::MAX);
            for (p, &(pm, pn)) in positions.iter().enumerate() {
                let key = (pm.abs_diff(m).pow(2) + pn.abs_diff(n).pow(2), pm, pn);
                if key < best_key {
                    best_key = key;
                    best = p;
                }
            }
            out[m * subcarriers + n] = values[best];
        }
    }
    Ok(out)
}

/// Downlink symbol estimate on one RE: `shat = u / ghat_kk`.
pub fn dl_equalize(u: C64, g_main: C64) -> Result<C64> {
    if !g_main.norm().is_normal() {
        return Err(Error::StreamDegenerate {
            stream: 0,
            reason: format!("main equivalent-channel coefficient {g_main} vanishes"),
        });
    }
    Ok(u / g_main)
}

/// Post-equalization variance of the downlink symbol estimate for user `k`.
///
/// `g_row` holds the user's estimated coefficients `ghat_{k,.}` on this RE
/// and `v_row` the matching estimation-error variances; entry `k` is the
/// main coefficient.
pub fn dl_post_eq_variance(g_row: &CVec, v_row: &[f64], sigma2: f64, k: usize) -> Result<f64> {
    let users = g_row.len();
    if v_row.len() != users || k >= users {
        return Err(Error::DimensionMismatch(format!(
            "{users} coefficients, {} variances, stream {k}",
            v_row.len()
        )));
    }
    let den = g_row[k].norm_sqr();
    if !den.is_normal() {
        return Err(Error::StreamDegenerate {
            stream: k,
            reason: "main equivalent-channel coefficient vanishes".into(),
        });
    }
    let mut num = sigma2;
    for i in 0..users {
        num += v_row[i];
        if i != k {
            num += g_row[i].norm_sqr();
        }
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cn01, cn01_matrix, cn01_vector, hermitize, rel_frobenius};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalization_gives_unit_trace_per_stream() {
        // tr(W^H C^2 W) = sum_k c_k^2 ||row_k||^2 = K, exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let w = cn01_matrix(3, 6, &mut rng);
            let c = normalization_diagonal(&w).unwrap();
            let mut tr = 0.0;
            for k in 0..3 {
                let row2: f64 = (0..6).map(|l| w[(k, l)].norm_sqr()).sum();
                tr += c[k] * c[k] * row2;
            }
            assert!((tr - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_transmit_energy_is_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = cn01_matrix(4, 8, &mut rng);
        let c = normalization_diagonal(&w).unwrap();
        let trials = 20_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let s = cn01_vector(4, &mut rng); // unit-energy symbols
            acc += precode(&s, &w, &c).unwrap().norm_squared();
        }
        let mean = acc / trials as f64;
        assert!((mean / 4.0 - 1.0).abs() < 0.02, "mean energy {mean}");
    }

    #[test]
    fn pipeline_matches_equivalent_channel_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = cn01_matrix(6, 3, &mut rng);
        let w = cn01_matrix(3, 6, &mut rng);
        let c = normalization_diagonal(&w).unwrap();
        let g = equivalent_channel(&h, &w, &c).unwrap();
        for _ in 0..20 {
            let s = cn01_vector(3, &mut rng);
            let direct = h.adjoint() * precode(&s, &w, &c).unwrap();
            let via_g = &g * &s;
            assert!((&direct - &via_g).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn zero_precoder_row_is_rejected() {
        let mut w = cn01_matrix(2, 4, &mut ChaCha8Rng::seed_from_u64(1));
        for l in 0..4 {
            w[(1, l)] = C64::new(0.0, 0.0);
        }
        match normalization_diagonal(&w) {
            Err(Error::StreamDegenerate { stream, .. }) => assert_eq!(stream, 1),
            other => panic!("expected StreamDegenerate, got {other:?}"),
        }
    }

    #[test]
    fn scalar_variance_reference() {
        // Single user: tau2 = (v + sigma2) / |g|^2.
        let g = CVec::from_vec(vec![C64::new(0.0, 2.0)]);
        let tau2 = dl_post_eq_variance(&g, &[0.3], 0.1, 0).unwrap();
        assert!((tau2 - 0.4 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn variance_predicts_scalar_receiver_mse() {
        // Receiver model: u = sum_i (ghat_i + err_i) s_i + q, shat = u / ghat_k.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let users = 3;
        let k = 1usize;
        let ghat = cn01_vector(users, &mut rng);
        let v = [0.05f64, 0.12, 0.02];
        let sigma2: f64 = 0.15;
        let trials = 60_000;
        let mut mse = 0.0;
        for _ in 0..trials {
            let s = cn01_vector(users, &mut rng);
            let mut u = C64::new(0.0, 0.0);
            for i in 0..users {
                let err = cn01(&mut rng) * C64::new(v[i].sqrt(), 0.0);
                u += (ghat[i] + err) * s[i];
            }
            u += cn01(&mut rng) * C64::new(sigma2.sqrt(), 0.0);
            let shat = dl_equalize(u, ghat[k]).unwrap();
            mse += (shat - s[k]).norm_sqr();
        }
        let empirical = mse / trials as f64;
        let predicted = dl_post_eq_variance(&ghat, &v, sigma2, k).unwrap();
        assert!(
            (empirical / predicted - 1.0).abs() < 0.05,
            "MC {empirical:.4} vs analytic {predicted:.4}"
        );
    }

    #[test]
    fn coefficient_estimation_matches_scalar_wiener() {
        // Diagonal covariance decouples the REs: each estimate collapses to
        // the scalar Wiener rule omega/(omega + sigma2) * u.
        let omega = CMat::identity(4, 4) * C64::new(2.0, 0.0);
        let u = CVec::from_fn(4, |i, _| C64::new(i as f64, -1.0));
        let (est, v) = estimate_coefficients(&u, &omega, 0.5).unwrap();
        for i in 0..4 {
            assert!((est[i] - u[i] * C64::new(0.8, 0.0)).norm() < 1e-12);
            assert!((v[i] - 2.0 * 0.5 / 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_fill_respects_tie_breaks() {
        // Pilots at (0, 0) and (0, 2): subcarrier 1 ties, lower wins.
        let filled = nearest_fill_scalar(&[1.0, 2.0], &[(0, 0), (0, 2)], 2, 4).unwrap();
        assert_eq!(filled[0 * 4 + 1], 1.0);
        assert_eq!(filled[0 * 4 + 3], 2.0);
        assert_eq!(filled[1 * 4 + 0], 1.0);
    }

    #[test]
    fn equivalent_channel_shape_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = cn01_matrix(4, 2, &mut rng);
        let w = cn01_matrix(2, 4, &mut rng);
        let c = normalization_diagonal(&w).unwrap();
        let g = equivalent_channel(&h, &w, &c).unwrap();
        assert_eq!((g.nrows(), g.ncols()), (2, 2));
        // Doubling W halves C and leaves G unchanged.
        let w2 = &w * C64::new(2.0, 0.0);
        let c2 = normalization_diagonal(&w2).unwrap();
        let g2 = equivalent_channel(&h, &w2, &c2).unwrap();
        assert!(rel_frobenius(&hermitize(&(&g2 * g2.adjoint())), &hermitize(&(&g * g.adjoint()))) < 1e-12);
    }
}
