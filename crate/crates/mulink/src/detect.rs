//! Flat MIMO detection: LMMSE, exact maximum likelihood, and an unfolded
//! iterative detector.
//!
//! Detectors operate on a single `y = H x + n` instance with `x` drawn
//! entrywise from a QAM constellation. The iterative detector works in the
//! QR-reduced domain `ybar = Q_A^H y = R_A x + nbar` (thin `H = Q_A R_A`,
//! which preserves both the ML metric and the noise statistics) and
//! alternates a linear correction with a Gaussian-posterior denoiser:
//!
//! ```text
//! kappa    = xhat + Theta_i (ybar - R_A xhat)
//! tau_i    = (psi_i / K) * ( ||I - Theta_i R_A||_F^2 / ||R_A||_F^2
//!              * [ ||ybar - R_A xhat||^2 - L sigma2 ]_+
//!              + ||Theta_i||_F^2 sigma2 )          (per stream, psi_i > 0)
//! xhat_new = E[x | kappa, tau]                     (per stream)
//! ```
//!
//! The `L sigma2` deflation term is kept verbatim even though the reduced
//! observation has only `K` noise dimensions; [`VarianceRule::ReducedK`]
//! switches to `K sigma2` for comparison. Per-iteration parameters are
//! expanded from one shared matrix: `Theta_i = Theta (I + diag(theta_i))`.

use crate::grid::Constellation;
use crate::linalg::{hermitian_solve, C64, CMat, CVec};
use crate::{Error, Result};

/// Exhaustive-search guard: the ML detector refuses more than this many
/// label bits (`K * Q`), i.e. 2^20 hypotheses.
pub const ML_SEARCH_LIMIT_BITS: usize = 20;

/// Denoiser variances at or below this floor collapse to a hard nearest-
/// point decision; it also floors the exponent scale for numerical safety.
pub const TAU_FLOOR: f64 = 1e-12;

/// Thin QR reduction of a detection instance.
#[derive(Debug, Clone)]
pub struct QrReduction {
    /// `L x K` orthonormal columns.
    pub q: CMat,
    /// `K x K` upper triangular, diagonal real and strictly positive.
    pub r: CMat,
    /// `ybar = Q^H y`.
    pub y_reduced: CVec,
}

/// Thin QR `H = Q_A R_A` with phases canonicalized so that `diag(R_A)` is
/// real and positive; `H = I` therefore reduces to `R_A = I`, `ybar = y`.
/// A diagonal entry below `1e-10 * ||H||_F` reports the channel as
/// rank-deficient (the detectors cannot separate that stream).
pub fn qr_reduce(h: &CMat, y: &CVec) -> Result<QrReduction> {
    let (l, k) = (h.nrows(), h.ncols());
    if y.len() != l {
        return Err(Error::DimensionMismatch(format!("H is {l}x{k} but y has {} entries", y.len())));
    }
    if l < k {
        return Err(Error::RankDeficient(format!("{l} observations for {k} streams")));
    }
    let qr = h.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let tol = 1e-10 * h.norm().max(f64::MIN_POSITIVE);
    for j in 0..k {
        let d = r[(j, j)];
        if d.norm() <= tol {
            return Err(Error::RankDeficient(format!(
                "pivot {j} has magnitude {:.3e} (tolerance {tol:.3e})",
                d.norm()
            )));
        }
        let phase = d / C64::new(d.norm(), 0.0);
        // Rotate row j of R and column j of Q by conjugate phases so the
        // product Q R is untouched while diag(R) becomes real positive.
        for c in j..k {
            r[(j, c)] *= phase.conj();
        }
        for a in 0..l {
            q[(a, j)] *= phase;
        }
        r[(j, j)] = C64::new(r[(j, j)].re.abs(), 0.0);
    }
    let y_reduced = q.adjoint() * y;
    Ok(QrReduction { q, r, y_reduced })
}

/// The LMMSE combining matrix `(A^H A + sigma2 I)^{-1} A^H`.
pub fn lmmse_matrix(a: &CMat, sigma2: f64) -> Result<CMat> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!("noise variance {sigma2} must be positive")));
    }
    let k = a.ncols();
    let mut gram = a.adjoint() * a;
    for i in 0..k {
        gram[(i, i)] += C64::new(sigma2, 0.0);
    }
    hermitian_solve(&gram, &a.adjoint())
}

/// Soft LMMSE detection `xhat = (H^H H + sigma2 I)^{-1} H^H y`.
pub fn lmmse_detect(h: &CMat, y: &CVec, sigma2: f64) -> Result<CVec> {
    if y.len() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{} but y has {} entries",
            h.nrows(),
            h.ncols(),
            y.len()
        )));
    }
    Ok(lmmse_matrix(h, sigma2)? * y)
}

/// Exact maximum-likelihood detection: the label vector minimizing
/// `||y - H x||^2` over the full constellation product.
///
/// Candidates are scanned in lexicographic label order (user 0 most
/// significant) and only a strictly smaller metric replaces the incumbent,
/// so exact ties resolve to the lexicographically smallest label vector.
pub fn ml_detect(h: &CMat, y: &CVec, c: &Constellation) -> Result<Vec<usize>> {
    let (l, k) = (h.nrows(), h.ncols());
    if y.len() != l {
        return Err(Error::DimensionMismatch(format!("H is {l}x{k} but y has {} entries", y.len())));
    }
    let q = c.bits_per_symbol();
    let bits = k * q;
    if bits > ML_SEARCH_LIMIT_BITS {
        return Err(Error::SearchSpaceTooLarge { bits, limit: ML_SEARCH_LIMIT_BITS });
    }
    let order = c.size();
    let total = order.pow(k as u32);
    let mut best = vec![0usize; k];
    let mut best_metric = f64::INFINITY;
    let mut labels = vec![0usize; k];
    let mut x = CVec::zeros(k);
    for combo in 0..total {
        let mut rest = combo;
        for u in (0..k).rev() {
            labels[u] = rest % order;
            rest /= order;
        }
        for u in 0..k {
            x[u] = c.point(labels[u]);
        }
        let mut metric = 0.0;
        for a in 0..l {
            let mut acc = y[a];
            for u in 0..k {
                acc -= h[(a, u)] * x[u];
            }
            metric += acc.norm_sqr();
            if metric >= best_metric {
                break;
            }
        }
        if metric < best_metric {
            best_metric = metric;
            best.copy_from_slice(&labels);
        }
    }
    Ok(best)
}

/// Per-stream hard decisions: nearest constellation point, ties toward the
/// lowest label.
pub fn hard_decision(x: &CVec, c: &Constellation) -> Vec<usize> {
    (0..x.len()).map(|i| c.hard_nearest(x[i])).collect()
}

/// Posterior mean of a constellation symbol under a complex Gaussian
/// perturbation: `E[x | kappa]` with likelihood `exp(-|kappa - x|^2 / tau)`
/// and a uniform prior.
///
/// Exponents are max-shifted before exponentiation, so far-away `kappa`
/// cannot underflow to 0/0. At `tau <= TAU_FLOOR` the posterior collapses
/// and the nearest point (lowest label on ties) is returned; `tau` going
/// large washes the posterior out toward the constellation mean.
pub fn gaussian_denoiser(kappa: C64, tau: f64, c: &Constellation) -> Result<C64> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidInput(format!("denoiser variance tau = {tau}")));
    }
    if tau <= TAU_FLOOR {
        return Ok(c.point(c.hard_nearest(kappa)));
    }
    let mut exponents = Vec::with_capacity(c.size());
    let mut max_e = f64::NEG_INFINITY;
    for &p in c.points() {
        let e = -(kappa - p).norm_sqr() / tau;
        max_e = max_e.max(e);
        exponents.push(e);
    }
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for (&p, &e) in c.points().iter().zip(&exponents) {
        let w = (e - max_e).exp();
        num += p * w;
        den += w;
    }
    Ok(num / den)
}

/// Which dimension count deflates the residual energy in the variance
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceRule {
    /// Subtract `L sigma2` (the receive-antenna count), the form used to
    /// train the original parameters; kept verbatim as the default.
    #[default]
    VerbatimL,
    /// Subtract `K sigma2`, matching the reduced observation's actual
    /// noise dimensionality after the QR projection.
    ReducedK,
}

/// Shared iterative-detector parameters.
///
/// One dense `K x K` matrix `Theta` is shared by all iterations; iteration
/// `i` derives its own matrix by per-column scaling,
/// `Theta_i = Theta (I + diag(theta_scale[i]))`, and carries a positive
/// per-stream variance gain `psi[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub theta: CMat,
    pub theta_scale: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

impl DetectorParams {
    pub fn iterations(&self) -> usize {
        self.theta_scale.len()
    }

    pub fn streams(&self) -> usize {
        self.theta.nrows()
    }

    /// Parameters that make a single iteration from `xhat = 0` reproduce
    /// the LMMSE estimate of the reduced instance: `Theta` is the LMMSE
    /// matrix of `(r, sigma2)`, no per-iteration scaling, and a `psi` small
    /// enough to drive the denoiser into its hard-decision regime.
    pub fn lmmse_equivalent(r: &CMat, sigma2: f64) -> Result<Self> {
        let k = r.ncols();
        Ok(Self {
            theta: lmmse_matrix(r, sigma2)?,
            theta_scale: vec![vec![0.0; k]],
            psi: vec![vec![1e-300; k]],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.streams();
        let mut faults = Vec::new();
        if self.theta.ncols() != k {
            faults.push(format!("theta: {}x{} is not square", k, self.theta.ncols()));
        }
        if self.theta_scale.is_empty() {
            faults.push("theta_scale: at least one iteration required".into());
        }
        if self.theta_scale.len() != self.psi.len() {
            faults.push(format!(
                "theta_scale has {} iterations, psi has {}",
                self.theta_scale.len(),
                self.psi.len()
            ));
        }
        for (i, row) in self.theta_scale.iter().enumerate() {
            if row.len() != k {
                faults.push(format!("theta_scale[{i}]: {} entries for {k} streams", row.len()));
            }
        }
        for (i, row) in self.psi.iter().enumerate() {
            if row.len() != k {
                faults.push(format!("psi[{i}]: {} entries for {k} streams", row.len()));
            }
            if let Some(bad) = row.iter().find(|v| !(**v > 0.0)) {
                faults.push(format!("psi[{i}]: value {bad} must be strictly positive"));
            }
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(faults.join("\n")))
        }
    }

    /// Expanded matrix of iteration `i`: columns of `Theta` scaled by
    /// `1 + theta_scale[i]`.
    pub fn expanded_theta(&self, i: usize) -> CMat {
        let k = self.streams();
        let mut t = self.theta.clone();
        for j in 0..k {
            let s = C64::new(1.0 + self.theta_scale[i][j], 0.0);
            for row in 0..k {
                t[(row, j)] *= s;
            }
        }
        t
    }

    /// Serialize as the plain-text exchange format (see [`Self::load`]).
    pub fn save<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        self.validate()?;
        let k = self.streams();
        writeln!(w, "{} {}", k, self.iterations())?;
        for row in 0..k {
            let mut fields = Vec::with_capacity(2 * k);
            for col in 0..k {
                let v = self.theta[(row, col)];
                fields.push(format!("{:.17e}", v.re));
                fields.push(format!("{:.17e}", v.im));
            }
            writeln!(w, "{}", fields.join(" "))?;
        }
        for row in &self.theta_scale {
            writeln!(w, "{}", row.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" "))?;
        }
        for row in &self.psi {
            writeln!(w, "{}", row.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" "))?;
        }
        Ok(())
    }

    /// Parse the plain-text format: a `K I` header; `K` rows of `Theta`
    /// (row-major, `re im` token pairs); `I` rows of per-iteration column
    /// scales; `I` rows of strictly positive per-stream `psi`. Lines
    /// starting with `#` are comments.
    pub fn load<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut tokens: Vec<(usize, String)> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            for t in trimmed.split_whitespace() {
                tokens.push((lineno + 1, t.to_string()));
            }
        }
        let mut pos = 0usize;
        let mut next = |what: &str| -> Result<(usize, String)> {
            let t = tokens
                .get(pos)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("unexpected end of file: expected {what}")))?;
            pos += 1;
            Ok(t)
        };
        let usize_tok = |t: (usize, String), what: &str| -> Result<usize> {
            t.1.parse()
                .map_err(|_| Error::Parse(format!("line {}: bad {what} '{}'", t.0, t.1)))
        };
        let f64_tok = |t: (usize, String), what: &str| -> Result<f64> {
            t.1.parse()
                .map_err(|_| Error::Parse(format!("line {}: bad {what} '{}'", t.0, t.1)))
        };
        let k = usize_tok(next("stream count K")?, "stream count K")?;
        let iters = usize_tok(next("iteration count I")?, "iteration count I")?;
        if k == 0 || iters == 0 {
            return Err(Error::Parse(format!("header K={k}, I={iters}: both must be positive")));
        }
        let mut theta = CMat::zeros(k, k);
        for row in 0..k {
            for col in 0..k {
                let re = f64_tok(next("theta entry")?, "theta entry")?;
                let im = f64_tok(next("theta entry")?, "theta entry")?;
                theta[(row, col)] = C64::new(re, im);
            }
        }
        let mut read_rows = |what: &str| -> Result<Vec<Vec<f64>>> {
            let mut rows = Vec::with_capacity(iters);
            for _ in 0..iters {
                let mut row = Vec::with_capacity(k);
                for _ in 0..k {
                    row.push(f64_tok(next(what)?, what)?);
                }
                rows.push(row);
            }
            Ok(rows)
        };
        let theta_scale = read_rows("theta scale")?;
        let psi = read_rows("psi")?;
        if pos != tokens.len() {
            let (line, tok) = &tokens[pos];
            return Err(Error::Parse(format!("line {line}: trailing token '{tok}'")));
        }
        let params = Self { theta, theta_scale, psi };
        params.validate()?;
        Ok(params)
    }
}

/// One iterative-detection step, with its intermediates exposed for
/// inspection.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// Denoiser input `kappa`.
    pub kappa: CVec,
    /// Per-stream denoiser variance `tau`.
    pub tau: Vec<f64>,
    /// Denoised estimate.
    pub x: CVec,
}

/// Run one iteration of the unfolded detector on a reduced instance.
#[allow(clippy::too_many_arguments)]
pub fn mmnet_iterate(
    x: &CVec,
    r: &CMat,
    y_reduced: &CVec,
    theta_i: &CMat,
    psi_i: &[f64],
    sigma2: f64,
    antennas: usize,
    rule: VarianceRule,
    c: &Constellation,
) -> Result<IterationTrace> {
    let k = r.ncols();
    if x.len() != k || y_reduced.len() != k || theta_i.nrows() != k || theta_i.ncols() != k || psi_i.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "reduced instance has {k} streams; got x:{}, ybar:{}, theta:{}x{}, psi:{}",
            x.len(),
            y_reduced.len(),
            theta_i.nrows(),
            theta_i.ncols(),
            psi_i.len()
        )));
    }
    let residual = y_reduced - r * x;
    let kappa = x + theta_i * &residual;
    // Residual-energy deflation: the verbatim rule subtracts L sigma2.
    let noise_dims = match rule {
        VarianceRule::VerbatimL => antennas,
        VarianceRule::ReducedK => k,
    } as f64;
    let excess = (residual.norm_squared() - noise_dims * sigma2).max(0.0);
    let id_minus = CMat::identity(k, k) - theta_i * r;
    let shape_term = id_minus.norm_squared() / r.norm_squared();
    let scalar = shape_term * excess + theta_i.norm_squared() * sigma2;
    let mut tau = Vec::with_capacity(k);
    let mut x_new = CVec::zeros(k);
    for s in 0..k {
        if !(psi_i[s] > 0.0) {
            return Err(Error::InvalidInput(format!("psi[{s}] = {} must be positive", psi_i[s])));
        }
        let t = psi_i[s] / k as f64 * scalar;
        x_new[s] = gaussian_denoiser(kappa[s], t, c)?;
        tau.push(t);
    }
    Ok(IterationTrace { kappa, tau, x: x_new })
}

/// Full iterative detection of one instance: QR-reduce, run every
/// configured iteration from `xhat = 0`, and hard-decide.
pub fn detect_iterative(
    h: &CMat,
    y: &CVec,
    params: &DetectorParams,
    sigma2: f64,
    rule: VarianceRule,
    c: &Constellation,
) -> Result<Vec<usize>> {
    params.validate()?;
    if params.streams() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "parameters are for {} streams, channel has {}",
            params.streams(),
            h.ncols()
        )));
    }
    let red = qr_reduce(h, y)?;
    let mut x = CVec::zeros(h.ncols());
    for i in 0..params.iterations() {
        let theta_i = params.expanded_theta(i);
        x = mmnet_iterate(&x, &red.r, &red.y_reduced, &theta_i, &params.psi[i], sigma2, h.nrows(), rule, c)?.x;
    }
    Ok(hard_decision(&x, c))
}
