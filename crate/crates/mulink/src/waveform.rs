//! OFDM time-domain synthesis and waveform quality metrics: PAPR/CCDF,
//! in-band and total energy quadratic forms, ACLR, and tone-reservation
//! peak reduction.
//!
//! One OFDM symbol places `N` (odd) frequency-domain symbols on
//! subcarriers `-(N-1)/2 ..= (N-1)/2` and synthesizes the oversampled
//! time-domain signal through a zero-padded IDFT,
//! `z[a] = (1/(sqrt(N) O_S)) sum_b x_b e^{j 2 pi a b / (N O_S)}`, which is
//! what a power amplifier actually sees: critically sampled signals miss
//! the analog peaks. With this scaling, `||z||^2 = ||x||^2 / O_S` exactly.
//!
//! Spectral containment is captured by two quadratic forms on the
//! frequency-domain symbol. The in-band energy is `x^H J x`, with `J`
//! built from pairwise integrals of the subcarriers' sinc spectra over the
//! allocated band (numerical quadrature; the cyclic prefix widens each
//! sinc by `(T + T_cp)/T`). The total energy `x^H K x` collapses to
//! `K = I` for rectangular pulses, and
//! `ACLR = E[x^H K x] / E[x^H J x] - 1`.
//!
//! Tone reservation sacrifices `R` subcarriers (the PRTs) to carry a peak
//! cancelling signal `r` with `r^H r <= R`. The exact minimizer of the
//! oversampled peak is a convex program; this implementation iterates
//! clipping (in time) and projection (onto the PRT support and the energy
//! ball), tracking the best iterate so the reported peak never increases.

use nalgebra::DMatrix;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::linalg::{C64, CVec};
use crate::{Error, Result};

/// Amplitude clip level as a fraction of the best peak amplitude seen so
/// far, used by the tone-reservation iteration.
pub const TR_CLIP_SCALE: f64 = 0.8;

/// Over-relaxation step on the frequency-domain projection of the
/// clipping correction. Only a fraction of the clip energy falls on the
/// reserved tones, so a plain unit step converges needlessly slowly.
pub const TR_STEP: f64 = 2.0;

/// One OFDM symbol's dimensioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformConfig {
    /// Subcarrier count `N`, odd, centered on DC.
    pub subcarriers: usize,
    /// Oversampling factor `O_S >= 1`.
    pub oversampling: usize,
    /// Useful symbol duration `T` (also fixes the subcarrier spacing
    /// `delta_f = 1/T`).
    pub symbol_duration: f64,
    /// Cyclic prefix duration `T_cp >= 0`.
    pub cp_duration: f64,
}

impl WaveformConfig {
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if self.subcarriers == 0 || self.subcarriers % 2 == 0 {
            faults.push(format!("subcarriers: {} must be odd and positive", self.subcarriers));
        }
        if self.oversampling == 0 {
            faults.push("oversampling: must be at least 1".into());
        }
        if !(self.symbol_duration > 0.0) {
            faults.push(format!("symbol_duration: {} must be positive", self.symbol_duration));
        }
        if !(self.cp_duration >= 0.0) {
            faults.push(format!("cp_duration: {} must be nonnegative", self.cp_duration));
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(faults.join("\n")))
        }
    }

    pub fn delta_f(&self) -> f64 {
        1.0 / self.symbol_duration
    }

    /// Sinc widening factor `delta_f / delta_f_cp = (T + T_cp) / T`: the
    /// cyclic prefix stretches each subcarrier's effective pulse.
    pub fn cp_ratio(&self) -> f64 {
        (self.symbol_duration + self.cp_duration) / self.symbol_duration
    }
}

/// Repeated-use synthesizer holding a planned FFT of length `N * O_S`.
pub struct TimeSynthesizer {
    n: usize,
    oversampling: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl TimeSynthesizer {
    pub fn new(n: usize, oversampling: usize) -> Result<Self> {
        if n == 0 || oversampling == 0 {
            return Err(Error::InvalidInput(format!(
                "need at least one subcarrier and O_S >= 1 (got N={n}, O_S={oversampling})"
            )));
        }
        let fft = FftPlanner::new().plan_fft_inverse(n * oversampling);
        Ok(Self { n, oversampling, fft })
    }

    /// Oversampled time signal of one frequency-domain symbol. Entry `i`
    /// of `x` sits on subcarrier `i - (N-1)/2` (integer division, so even
    /// lengths are tolerated with an asymmetric band).
    pub fn synthesize(&self, x: &CVec) -> Result<CVec> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "synthesizer is for {} subcarriers, symbol has {}",
                self.n,
                x.len()
            )));
        }
        let l = self.n * self.oversampling;
        let half = (self.n - 1) / 2;
        let mut buf = vec![C64::new(0.0, 0.0); l];
        for (i, &v) in x.iter().enumerate() {
            let freq = i as isize - half as isize;
            let bin = freq.rem_euclid(l as isize) as usize;
            buf[bin] = v;
        }
        self.fft.process(&mut buf);
        let scale = 1.0 / ((self.n as f64).sqrt() * self.oversampling as f64);
        Ok(CVec::from_iterator(l, buf.into_iter().map(|v| v * scale)))
    }
}

/// One-shot convenience wrapper around [`TimeSynthesizer`].
pub fn oversampled_time_signal(x: &CVec, oversampling: usize) -> Result<CVec> {
    TimeSynthesizer::new(x.len(), oversampling)?.synthesize(x)
}

/// Pooled normalized instantaneous powers `nu = |z|^2 / mean(|z|^2)`
/// across every sample of every signal in the batch.
pub fn power_ratios(batch: &[CVec]) -> Result<Vec<f64>> {
    let samples: usize = batch.iter().map(|z| z.len()).sum();
    if samples == 0 {
        return Err(Error::InvalidInput("empty signal batch".into()));
    }
    let mean: f64 = batch.iter().map(|z| z.norm_squared()).sum::<f64>() / samples as f64;
    if !(mean > 0.0) {
        return Err(Error::InvalidInput("batch has zero mean power".into()));
    }
    let mut nu = Vec::with_capacity(samples);
    for z in batch {
        nu.extend(z.iter().map(|v| v.norm_sqr() / mean));
    }
    Ok(nu)
}

/// `PAPR_eps` in dB: the empirical `(1 - eps)`-quantile of the pooled
/// normalized power, i.e. the smallest level exceeded with probability at
/// most `eps`. `eps = 0` returns the maximum.
pub fn papr_epsilon(batch: &[CVec], epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} must lie in [0, 1)")));
    }
    let mut nu = power_ratios(batch)?;
    nu.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let idx = ((epsilon * nu.len() as f64).floor() as usize).min(nu.len() - 1);
    Ok(10.0 * nu[idx].max(f64::MIN_POSITIVE).log10())
}

/// Empirical CCDF of the pooled normalized power on a uniform grid of
/// `points` thresholds from 0 to the observed maximum: pairs
/// `(e, P(nu > e))`, non-increasing in `e`.
pub fn ccdf(batch: &[CVec], points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(Error::InvalidInput("CCDF needs at least two grid points".into()));
    }
    let mut nu = power_ratios(batch)?;
    nu.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let max = *nu.last().unwrap();
    let n = nu.len() as f64;
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let e = max * i as f64 / (points - 1) as f64;
        // Exceedance count by binary search in the ascending sample.
        let above = nu.len() - nu.partition_point(|&v| v <= e);
        out.push((e, above as f64 / n));
    }
    Ok(out)
}

/// Normalized `sinc(x) = sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    let px = std::f64::consts::PI * x;
    if px.abs() < 1e-8 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "adaptive quadrature hit the recursion limit on [{a}, {b}]"
        )));
    }
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let l = adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)?;
        let r = adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)?;
        Ok(l + r)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. The interval is pre-split into unit-width segments so an
/// oscillatory integrand cannot fool the first error estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::InvalidInput(format!("bad integration interval [{a}, {b}]")));
    }
    let segments = (b - a).ceil().max(1.0) as usize;
    let seg_tol = tol / segments as f64;
    let h = (b - a) / segments as f64;
    let mut total = 0.0;
    for s in 0..segments {
        let sa = a + s as f64 * h;
        let sb = sa + h;
        let sm = 0.5 * (sa + sb);
        let (fa, fm, fb) = (f(sa), f(sm), f(sb));
        let whole = simpson(fa, fm, fb, h);
        total += adaptive_simpson_rec(&f, sa, fa, sb, fb, sm, fm, whole, seg_tol, 40)?;
    }
    Ok(total)
}

/// In-band energy matrix `J`: `x^H J x` is the energy the symbol `x`
/// radiates inside the allocated band `[-N delta_f / 2, N delta_f / 2]`.
///
/// In units of the subcarrier spacing, with `r = (T + T_cp)/T`,
/// `j_{a,b} = r * integral over [-N/2, N/2] of
/// sinc(r (u - a)) sinc(r (u - b)) du` for centered subcarrier indices
/// `a, b`. Each entry is integrated adaptively to 1e-8 absolute.
pub fn inband_energy_matrix(cfg: &WaveformConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let n = cfg.subcarriers;
    let half = (n as isize - 1) / 2;
    let r = cfg.cp_ratio();
    let span = n as f64 / 2.0;
    let mut j = DMatrix::zeros(n, n);
    for row in 0..n {
        for col in row..n {
            // Mirror symmetry j_{a,b} = j_{-b,-a}: the reflected entry has
            // already been integrated once row + col passes the center.
            if row + col > n - 1 {
                j[(row, col)] = j[(n - 1 - col, n - 1 - row)];
            } else {
                let a = (row as isize - half) as f64;
                let b = (col as isize - half) as f64;
                j[(row, col)] =
                    r * adaptive_simpson(|u| sinc(r * (u - a)) * sinc(r * (u - b)), -span, span, 1e-8)?;
            }
            j[(col, row)] = j[(row, col)];
        }
    }
    Ok(j)
}

/// Total energy matrix `K`: `(1/T) integral of e^{j 2 pi (a-b) t / T}`
/// over one symbol period, which is exactly the identity for the
/// rectangular pulse — subcarriers are orthogonal over `T`.
pub fn total_energy_matrix(cfg: &WaveformConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    Ok(DMatrix::identity(cfg.subcarriers, cfg.subcarriers))
}

/// Real quadratic form `x^H M x` for real symmetric `M`.
pub fn quadratic_form(x: &CVec, m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != x.len() || m.ncols() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, vector has {} entries",
            m.nrows(),
            m.ncols(),
            x.len()
        )));
    }
    let mut acc = 0.0;
    for a in 0..x.len() {
        for b in 0..x.len() {
            acc += (x[a].conj() * x[b]).re * m[(a, b)];
        }
    }
    Ok(acc)
}

/// Adjacent-channel leakage summary of a symbol batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AclrReport {
    pub linear: f64,
    pub db: f64,
    pub mean_inband: f64,
    pub mean_total: f64,
}

/// `ACLR = E[x^H K x] / E[x^H J x] - 1`, the out-of-band to in-band
/// energy ratio, with expectations taken as batch means.
pub fn aclr(batch: &[CVec], j: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<AclrReport> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty symbol batch".into()));
    }
    let mut mean_inband = 0.0;
    let mut mean_total = 0.0;
    for x in batch {
        mean_inband += quadratic_form(x, j)?;
        mean_total += quadratic_form(x, k)?;
    }
    mean_inband /= batch.len() as f64;
    mean_total /= batch.len() as f64;
    if !(mean_inband > 0.0) {
        return Err(Error::InvalidInput(format!("mean in-band energy {mean_inband} is not positive")));
    }
    let linear = mean_total / mean_inband - 1.0;
    Ok(AclrReport {
        linear,
        db: 10.0 * linear.max(f64::MIN_POSITIVE).log10(),
        mean_inband,
        mean_total,
    })
}

/// Waveform metrics bundle produced by the harness's waveform scenario.
#[derive(Debug, Clone)]
pub struct WaveformMetrics {
    pub epsilon: f64,
    pub papr_db: f64,
    pub aclr: AclrReport,
    pub ccdf: Vec<(f64, f64)>,
    pub inband_matrix: DMatrix<f64>,
    pub total_matrix: DMatrix<f64>,
}

/// Split of the subcarriers into peak-reduction tones and data tones.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneReservationPlan {
    n: usize,
    prt: Vec<usize>,
    data: Vec<usize>,
}

impl ToneReservationPlan {
    /// `prt` holds 0-based positions in the length-`n` symbol vector;
    /// everything else carries data.
    pub fn new(n: usize, prt: &[usize]) -> Result<Self> {
        let mut sorted = prt.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != prt.len() {
            return Err(Error::InvalidInput("duplicate PRT positions".into()));
        }
        if let Some(&bad) = sorted.iter().find(|&&p| p >= n) {
            return Err(Error::InvalidInput(format!("PRT position {bad} outside 0..{n}")));
        }
        let mut mask = vec![false; n];
        for &p in &sorted {
            mask[p] = true;
        }
        let data = (0..n).filter(|&i| !mask[i]).collect();
        Ok(Self { n, prt: sorted, data })
    }

    pub fn subcarriers(&self) -> usize {
        self.n
    }

    pub fn prt(&self) -> &[usize] {
        &self.prt
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }

    /// Peak-reduction energy cap `R = |PRT set|`.
    pub fn energy_cap(&self) -> f64 {
        self.prt.len() as f64
    }

    /// Scatter data symbols into a full symbol vector (zeros on the PRTs).
    pub fn embed_data(&self, symbols: &[C64]) -> Result<CVec> {
        if symbols.len() != self.data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} data symbols for {} data tones",
                symbols.len(),
                self.data.len()
            )));
        }
        let mut x = CVec::zeros(self.n);
        for (&pos, &s) in self.data.iter().zip(symbols) {
            x[pos] = s;
        }
        Ok(x)
    }
}

/// Outcome of the clipping–projection iteration. Peaks are maximum
/// instantaneous powers (`||.||_inf` of `|z|^2`) of the oversampled
/// signal.
#[derive(Debug, Clone)]
pub struct ToneReservationOutcome {
    /// Best reduction vector found (supported on the PRT set,
    /// `||r||^2 <= R`).
    pub r: CVec,
    /// Peak power of the uncompensated signal.
    pub initial_peak: f64,
    /// Peak power with the returned `r` applied.
    pub best_peak: f64,
    /// Best-so-far peak after each iteration; non-increasing.
    pub trace: Vec<f64>,
}

fn peak_power(z: &CVec) -> f64 {
    z.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
}

/// Approximately minimize the oversampled peak power of `d + r` over
/// reduction vectors `r` supported on the plan's PRT set with
/// `r^H r <= R`.
///
/// Each iteration clips the time-domain signal at `TR_CLIP_SCALE` times
/// the best peak amplitude so far, projects the clipping correction onto
/// the PRT support in frequency, renormalizes onto the energy ball, and
/// keeps the best iterate — so the reported best peak never increases and
/// the method degrades gracefully to `r = 0` when no tone helps.
pub fn tone_reservation(
    d: &CVec,
    plan: &ToneReservationPlan,
    oversampling: usize,
    budget: usize,
) -> Result<ToneReservationOutcome> {
    if d.len() != plan.subcarriers() {
        return Err(Error::DimensionMismatch(format!(
            "data vector has {} entries, plan covers {}",
            d.len(),
            plan.subcarriers()
        )));
    }
    if let Some(&p) = plan.prt().iter().find(|&&p| d[p].norm_sqr() > 0.0) {
        return Err(Error::InvalidInput(format!("data vector is nonzero on PRT {p}")));
    }
    let n = plan.subcarriers();
    let l = n * oversampling;
    let synth = TimeSynthesizer::new(n, oversampling)?;
    let z0 = synth.synthesize(d)?;
    let initial_peak = peak_power(&z0);
    let cap = plan.energy_cap();
    let mut outcome = ToneReservationOutcome {
        r: CVec::zeros(n),
        initial_peak,
        best_peak: initial_peak,
        trace: Vec::with_capacity(budget),
    };
    if plan.prt().is_empty() || budget == 0 {
        return Ok(outcome);
    }
    let forward = FftPlanner::new().plan_fft_forward(l);
    let half = (n - 1) / 2;
    let mut r = CVec::zeros(n);
    let mut z = z0;
    for _ in 0..budget {
        // Clip amplitudes above a fraction of the best peak amplitude.
        let threshold = TR_CLIP_SCALE * outcome.best_peak.sqrt();
        let mut correction = vec![C64::new(0.0, 0.0); l];
        let mut clipped_any = false;
        for (t, c) in correction.iter_mut().enumerate() {
            let amp = z[t].norm();
            if amp > threshold {
                *c = z[t] * C64::new(threshold / amp - 1.0, 0.0);
                clipped_any = true;
            }
        }
        if !clipped_any {
            outcome.trace.push(outcome.best_peak);
            continue;
        }
        // Least-squares frequency representation of the correction,
        // restricted to the PRT support.
        forward.process(&mut correction);
        for &p in plan.prt() {
            let freq = p as isize - half as isize;
            let bin = freq.rem_euclid(l as isize) as usize;
            r[p] += correction[bin] * C64::new(TR_STEP / (n as f64).sqrt(), 0.0);
        }
        // Project onto the energy ball.
        let energy = r.norm_squared();
        if energy > cap {
            r *= C64::new((cap / energy).sqrt(), 0.0);
        }
        z = synth.synthesize(&(d + &r))?;
        let peak = peak_power(&z);
        if peak < outcome.best_peak {
            outcome.best_peak = peak;
            outcome.r.copy_from(&r);
        }
        outcome.trace.push(outcome.best_peak);
    }
    Ok(outcome)
}

/// Uniform random `R`-subset of the `N` subcarrier positions (sorted).
pub fn random_prt_placement<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<Vec<usize>> {
    random_prt_placement_excluding(n, r, &[], rng)
}

/// Uniform random `R`-subset avoiding the excluded positions — the
/// pilot-bearing symbol draws `R/2` tones from the non-pilot subcarriers.
pub fn random_prt_placement_excluding<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    excluded: &[usize],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut banned = vec![false; n];
    for &e in excluded {
        if e >= n {
            return Err(Error::InvalidInput(format!("excluded position {e} outside 0..{n}")));
        }
        banned[e] = true;
    }
    let pool: Vec<usize> = (0..n).filter(|&i| !banned[i]).collect();
    if r > pool.len() {
        return Err(Error::InvalidInput(format!(
            "cannot place {r} PRTs on {} available subcarriers",
            pool.len()
        )));
    }
    let mut picked: Vec<usize> =
        rand::seq::index::sample(rng, pool.len(), r).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Pilot positions of the pilot-bearing OFDM symbol: every other
/// subcarrier starting from the band edge, `(N+1)/2` tones for odd `N`.
pub fn alternate_pilot_subcarriers(n: usize) -> Vec<usize> {
    (0..n).step_by(2).collect()
}

/// Random unit-circle pilot values.
pub fn unit_circle_pilots<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<C64> {
    (0..count)
        .map(|_| {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            C64::new(phase.cos(), phase.sin())
        })
        .collect()
}
