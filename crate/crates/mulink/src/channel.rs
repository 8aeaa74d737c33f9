//! Correlated MU-MIMO channel synthesis on the OFDM resource grid.
//!
//! Each user's channel toward the `L`-antenna array follows a separable
//! (Kronecker) correlation model:
//!
//! * **space** — a local-scattering covariance for a uniform linear array:
//!   a nominal azimuth `phi`, Gaussian angular spread `sigma_phi`, and
//!   antenna spacing `d` in wavelengths give
//!   `[C]_{a,b} = exp(2*pi*j*d*(a-b)*sin(phi)) * exp(-(sigma_phi^2/2) * (2*pi*d*(a-b)*cos(phi))^2)`;
//! * **time** — Jakes autocorrelation `J_0(2*pi*nu*dm)` for a Doppler `nu`
//!   normalized to the OFDM symbol rate;
//! * **frequency** — the correlation of an exponential power delay profile,
//!   `1 / (1 + 2*pi*j*dn*ds)` for an rms delay spread `ds` normalized to
//!   the OFDM symbol duration.
//!
//! Entries are unit-variance in expectation; by default each user's frame
//! is additionally rescaled so its total energy over the `M_total x N`
//! grid is exactly `M_total * N * L` (perfect long-term power control).

use rand::Rng;

use crate::grid::GridConfig;
use crate::linalg::{cn01, psd_sqrt, C64, CMat, CVec};
use crate::{Error, Result};

/// Bessel function of the first kind, order zero.
///
/// Maclaurin series below `|x| = 12`, Hankel asymptotic expansion above;
/// absolute error stays under ~1e-11 everywhere. That headroom matters:
/// Jakes correlation matrices built from these values go through a PSD
/// factorization whose negativity floor sits near 1e-9, so a J0 with
/// 1e-8-level error (the classic 8-digit polynomial fits) makes
/// legitimate models look indefinite.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 12.0 {
        // sum_k (-1)^k (x^2/4)^k / (k!)^2; worst-case cancellation near
        // the branch point keeps ~5 spare digits.
        let q = ax * ax / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..80 {
            term *= -q / ((k * k) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1.0) {
                break;
            }
        }
        sum
    } else {
        // J0 = sqrt(2/(pi x)) [P cos(x - pi/4) + S sin(x - pi/4)] with
        // P and S the even/odd halves of the divergent Hankel series,
        // summed to the smallest term.
        let (mut p, mut s) = (1.0, 0.0);
        let mut a = 1.0; // A_j / x^j
        let mut prev = f64::INFINITY;
        for j in 1..40 {
            let odd = (2 * j - 1) as f64;
            a *= odd * odd / (8.0 * j as f64 * ax);
            if a >= prev || a < 1e-17 {
                break;
            }
            prev = a;
            let signed = if j % 4 >= 2 { -a } else { a };
            if j % 2 == 0 {
                p += signed;
            } else {
                s += signed;
            }
        }
        let xi = ax - std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * ax)).sqrt() * (p * xi.cos() + s * xi.sin())
    }
}

/// Local-scattering covariance of a uniform linear array.
///
/// `azimuth` and `angle_spread` are in radians, `spacing` in wavelengths.
pub fn local_scattering_covariance(
    antennas: usize,
    azimuth: f64,
    angle_spread: f64,
    spacing: f64,
) -> CMat {
    let two_pi_d = 2.0 * std::f64::consts::PI * spacing;
    CMat::from_fn(antennas, antennas, |a, b| {
        let delta = a as f64 - b as f64;
        let phase = two_pi_d * delta * azimuth.sin();
        let damp = angle_spread * angle_spread / 2.0 * (two_pi_d * delta * azimuth.cos()).powi(2);
        C64::from_polar((-damp).exp(), phase)
    })
}

/// One user's spatial channel statistics, with the covariance square root
/// precomputed for sampling.
#[derive(Debug, Clone)]
pub struct ScatteringModel {
    pub azimuth: f64,
    pub angle_spread: f64,
    pub spacing: f64,
    covariance: CMat,
    sqrt_cov: CMat,
}

impl ScatteringModel {
    pub fn new(antennas: usize, azimuth: f64, angle_spread: f64, spacing: f64) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::InvalidInput("antenna count must be positive".into()));
        }
        if angle_spread < 0.0 || spacing <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "angle spread {angle_spread} must be nonnegative and spacing {spacing} positive"
            )));
        }
        let covariance = local_scattering_covariance(antennas, azimuth, angle_spread, spacing);
        let sqrt_cov = psd_sqrt(&covariance, "local-scattering covariance")?;
        Ok(Self { azimuth, angle_spread, spacing, covariance, sqrt_cov })
    }

    pub fn antennas(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &CMat {
        &self.covariance
    }

    /// Draw `h = C^{1/2} e` with `e ~ CN(0, I)`, so `E[h h^H] = C`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let e = CVec::from_fn(self.antennas(), |_, _| cn01(rng));
        &self.sqrt_cov * e
    }
}

/// Time and frequency selectivity of the cell.
#[derive(Debug, Clone, Copy)]
pub struct TemporalSpectralModel {
    /// Doppler frequency normalized to the OFDM symbol rate (`f_D * T_sym`).
    pub doppler: f64,
    /// RMS delay spread normalized to the OFDM symbol duration.
    pub delay_spread: f64,
}

impl TemporalSpectralModel {
    /// Jakes autocorrelation across a symbol lag.
    pub fn time_correlation(&self, lag: isize) -> f64 {
        bessel_j0(2.0 * std::f64::consts::PI * self.doppler * lag as f64)
    }

    /// Exponential-delay-profile correlation across a subcarrier lag.
    pub fn freq_correlation(&self, lag: isize) -> C64 {
        let x = 2.0 * std::f64::consts::PI * lag as f64 * self.delay_spread;
        C64::new(1.0, 0.0) / C64::new(1.0, x)
    }

    /// Correlation matrix of the time process at arbitrary symbol indices.
    pub fn time_correlation_matrix(&self, symbols: &[usize]) -> CMat {
        CMat::from_fn(symbols.len(), symbols.len(), |i, j| {
            C64::new(self.time_correlation(symbols[i] as isize - symbols[j] as isize), 0.0)
        })
    }

    /// Correlation matrix of the frequency process at arbitrary subcarriers.
    pub fn freq_correlation_matrix(&self, subcarriers: &[usize]) -> CMat {
        CMat::from_fn(subcarriers.len(), subcarriers.len(), |i, j| {
            self.freq_correlation(subcarriers[i] as isize - subcarriers[j] as isize)
        })
    }
}

/// How synthesized frames are power-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Rescale each user's frame so its energy is exactly
    /// `M_total * N * L` (the default; matches perfect power control).
    #[default]
    SlotEnergy,
    /// Leave samples untouched: unit energy per entry holds in expectation
    /// only. Statistical tests that compare against the analytic Kronecker
    /// covariance use this mode, since the exact rescale ties entries
    /// together across the frame.
    ExpectationOnly,
}

/// Full synthesis model: per-user scattering plus shared selectivity.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub scattering: Vec<ScatteringModel>,
    pub selectivity: TemporalSpectralModel,
    pub normalization: Normalization,
}

/// The synthesized channel over a frame: `h[m][n][l][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    symbols: usize,
    subcarriers: usize,
    antennas: usize,
    users: usize,
    data: Vec<C64>,
}

impl ChannelTensor {
    pub fn zeros(symbols: usize, subcarriers: usize, antennas: usize, users: usize) -> Self {
        Self {
            symbols,
            subcarriers,
            antennas,
            users,
            data: vec![C64::new(0.0, 0.0); symbols * subcarriers * antennas * users],
        }
    }

    /// Deterministic unit channel: `H_{m,n}[l][k] = 1` if `l == k`, else 0.
    /// Degenerate by design; it turns the link into parallel AWGN channels
    /// for calibration against closed-form error rates.
    pub fn static_identity(cfg: &GridConfig) -> Self {
        let mut t = Self::zeros(cfg.total_symbols(), cfg.subcarriers, cfg.antennas, cfg.users);
        for m in 0..t.symbols {
            for n in 0..t.subcarriers {
                for k in 0..t.users {
                    t.set(m, n, k, k, C64::new(1.0, 0.0));
                }
            }
        }
        t
    }

    #[inline]
    fn idx(&self, m: usize, n: usize, l: usize, k: usize) -> usize {
        ((m * self.subcarriers + n) * self.antennas + l) * self.users + k
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, l: usize, k: usize) -> C64 {
        self.data[self.idx(m, n, l, k)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, l: usize, k: usize, v: C64) {
        let i = self.idx(m, n, l, k);
        self.data[i] = v;
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

    pub fn users(&self) -> usize {
        self.users
    }

    /// The `L x K` channel matrix of one resource element.
    pub fn matrix(&self, m: usize, n: usize) -> CMat {
        CMat::from_fn(self.antennas, self.users, |l, k| self.get(m, n, l, k))
    }

    /// One user's `L`-vector at one resource element.
    pub fn user_vector(&self, m: usize, n: usize, k: usize) -> CVec {
        CVec::from_fn(self.antennas, |l, _| self.get(m, n, l, k))
    }

    /// Total energy of one user's channel over the whole frame.
    pub fn user_energy(&self, k: usize) -> f64 {
        let mut e = 0.0;
        for m in 0..self.symbols {
            for n in 0..self.subcarriers {
                for l in 0..self.antennas {
                    e += self.get(m, n, l, k).norm_sqr();
                }
            }
        }
        e
    }

    /// Write as CSV: header then one `m,n,l,k,re,im` row per entry, indices
    /// 1-based as in every external file of this crate.
    pub fn export_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "m,n,l,k,re,im")?;
        for m in 0..self.symbols {
            for n in 0..self.subcarriers {
                for l in 0..self.antennas {
                    for k in 0..self.users {
                        let v = self.get(m, n, l, k);
                        writeln!(w, "{},{},{},{},{:.17e},{:.17e}", m + 1, n + 1, l + 1, k + 1, v.re, v.im)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Read a tensor written by [`export_csv`](Self::export_csv). Dimensions
    /// are taken from the largest index seen; every entry must be present
    /// exactly once.
    pub fn import_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<(usize, usize, usize, usize, C64)> = Vec::new();
        let (mut mm, mut nn, mut ll, mut kk) = (0usize, 0usize, 0usize, 0usize);
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('m')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 fields, got {}", lineno + 1, fields.len())));
            }
            let parse_idx = |s: &str| -> Result<usize> {
                let v: usize = s.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad index '{s}'", lineno + 1)))?;
                if v == 0 {
                    return Err(Error::Parse(format!("line {}: indices are 1-based", lineno + 1)));
                }
                Ok(v - 1)
            };
            let parse_f = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad value '{s}'", lineno + 1)))
            };
            let (m, n, l, k) = (parse_idx(fields[0])?, parse_idx(fields[1])?, parse_idx(fields[2])?, parse_idx(fields[3])?);
            mm = mm.max(m + 1);
            nn = nn.max(n + 1);
            ll = ll.max(l + 1);
            kk = kk.max(k + 1);
            rows.push((m, n, l, k, C64::new(parse_f(fields[4])?, parse_f(fields[5])?)));
        }
        let mut t = Self::zeros(mm, nn, ll, kk);
        let mut seen = vec![false; t.data.len()];
        for (m, n, l, k, v) in rows {
            let i = t.idx(m, n, l, k);
            if seen[i] {
                return Err(Error::Parse(format!("duplicate entry for ({},{},{},{})", m + 1, n + 1, l + 1, k + 1)));
            }
            seen[i] = true;
            t.data[i] = v;
        }
        if let Some(miss) = seen.iter().position(|s| !s) {
            return Err(Error::Parse(format!(
                "incomplete tensor: {} of {} entries missing (first missing flat index {miss})",
                seen.iter().filter(|s| !**s).count(),
                seen.len()
            )));
        }
        Ok(t)
    }
}

/// Precomputed correlation square roots for repeated frame synthesis.
pub struct ChannelSynthesizer {
    symbols: usize,
    subcarriers: usize,
    antennas: usize,
    users: usize,
    normalization: Normalization,
    sqrt_time: CMat,
    sqrt_freq: CMat,
    sqrt_space: Vec<CMat>,
}

impl ChannelSynthesizer {
    pub fn new(cfg: &GridConfig, model: &ChannelModel) -> Result<Self> {
        if model.scattering.len() != cfg.users {
            return Err(Error::DimensionMismatch(format!(
                "{} scattering models for {} users",
                model.scattering.len(),
                cfg.users
            )));
        }
        for (k, s) in model.scattering.iter().enumerate() {
            if s.antennas() != cfg.antennas {
                return Err(Error::DimensionMismatch(format!(
                    "user {k}: scattering model has {} antennas, grid has {}",
                    s.antennas(),
                    cfg.antennas
                )));
            }
        }
        let m_total = cfg.total_symbols();
        let syms: Vec<usize> = (0..m_total).collect();
        let subs: Vec<usize> = (0..cfg.subcarriers).collect();
        let sqrt_time = psd_sqrt(&model.selectivity.time_correlation_matrix(&syms), "Jakes time correlation")?;
        let sqrt_freq = psd_sqrt(&model.selectivity.freq_correlation_matrix(&subs), "delay-profile frequency correlation")?;
        let sqrt_space = model.scattering.iter().map(|s| s.sqrt_cov.clone()).collect();
        Ok(Self {
            symbols: m_total,
            subcarriers: cfg.subcarriers,
            antennas: cfg.antennas,
            users: cfg.users,
            normalization: model.normalization,
            sqrt_time,
            sqrt_freq,
            sqrt_space,
        })
    }

    /// Draw one frame. White CN(0,1) noise is colored along each tensor
    /// mode in turn (space, then frequency, then time); separability makes
    /// the order irrelevant.
    pub fn synthesize<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelTensor {
        let (mt, n, l) = (self.symbols, self.subcarriers, self.antennas);
        let mut out = ChannelTensor::zeros(mt, n, l, self.users);
        // Scratch for one user's [m][n][l] slab.
        let mut slab = vec![C64::new(0.0, 0.0); mt * n * l];
        for k in 0..self.users {
            for v in slab.iter_mut() {
                *v = cn01(rng);
            }
            let a_s = &self.sqrt_space[k];
            let mut tmp = vec![C64::new(0.0, 0.0); l.max(n).max(mt)];
            // Space: each (m, n) fiber through C_s^{1/2}.
            for mn in 0..mt * n {
                let base = mn * l;
                for (a, t) in tmp[..l].iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..l {
                        acc += a_s[(a, b)] * slab[base + b];
                    }
                    *t = acc;
                }
                slab[base..base + l].copy_from_slice(&tmp[..l]);
            }
            // Frequency: each (m, l) fiber through C_f^{1/2}.
            for m in 0..mt {
                for a in 0..l {
                    for (i, t) in tmp[..n].iter_mut().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..n {
                            acc += self.sqrt_freq[(i, j)] * slab[(m * n + j) * l + a];
                        }
                        *t = acc;
                    }
                    for i in 0..n {
                        slab[(m * n + i) * l + a] = tmp[i];
                    }
                }
            }
            // Time: each (n, l) fiber through C_t^{1/2}.
            for j in 0..n {
                for a in 0..l {
                    for (i, t) in tmp[..mt].iter_mut().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for mp in 0..mt {
                            acc += self.sqrt_time[(i, mp)] * slab[(mp * n + j) * l + a];
                        }
                        *t = acc;
                    }
                    for i in 0..mt {
                        slab[(i * n + j) * l + a] = tmp[i];
                    }
                }
            }
            let scale = match self.normalization {
                Normalization::SlotEnergy => {
                    let energy: f64 = slab.iter().map(|v| v.norm_sqr()).sum();
                    ((mt * n * l) as f64 / energy).sqrt()
                }
                Normalization::ExpectationOnly => 1.0,
            };
            for m in 0..mt {
                for j in 0..n {
                    for a in 0..l {
                        out.set(m, j, a, k, slab[(m * n + j) * l + a] * scale);
                    }
                }
            }
        }
        out
    }
}
