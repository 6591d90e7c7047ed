//! Complex Gaussian noise η_q(t), ν_q(t) with the covariance
//!
//! ⟨η(s)ηᵀ(t')⟩ = ½L̄(t' − s),  ⟨η(s)νᵀ(t')⟩ = iM̄(t' − s)Θ(s − t'),  ⟨ν(s)νᵀ(t')⟩ = 0,
//!
//! synthesized by circulant embedding: for z = (η, ν) the lag sequence of
//! 4×4 blocks is Fourier transformed, each frequency block receives its
//! principal square root, and real white noise is filtered through it.
//! The transformed blocks are complex symmetric rather than Hermitian, so
//! the square root comes from a complex Schur form and the noise is complex
//! even though the white input is real. Only the products ⟨z zᵀ⟩ are
//! prescribed; ⟨z z*⟩ is whatever the completion implies.

use std::io::{Read, Write};

use nalgebra::{Matrix4, Schur};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::bath::ModeSet;
use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

type C64 = Complex<f64>;
/// 4×4 covariance block, row-major, ordering (η_x, η_y, ν_x, ν_y).
pub type Block = [[C64; 4]; 4];

const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Rotation kernel L̄(τ) and M̄(τ) = diag(sin ωτ, −sin ωτ).
pub fn kernel_eval(omega: f64, lag: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let (s, c) = (omega * lag).sin_cos();
    ([[c, -s], [s, c]], [[s, 0.0], [0.0, -s]])
}

/// Heaviside step with Θ(0) = ½.
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Which covariance the synthesizer targets. `Corrupted` runs the kernel at
/// twice the mode frequency and exists as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Physical,
    Corrupted,
}

impl Kernel {
    fn frequency(self, omega: f64) -> f64 {
        match self {
            Kernel::Physical => omega,
            Kernel::Corrupted => 2.0 * omega,
        }
    }
}

/// C(τ)_ab = ⟨z_a(s) z_b(s + τ)⟩.
pub fn cov_block(omega: f64, tau: f64) -> Block {
    let (l, m) = kernel_eval(omega, tau);
    let zero = C64::new(0.0, 0.0);
    let mut b = [[zero; 4]; 4];
    for a in 0..2 {
        for c in 0..2 {
            b[a][c] = C64::new(0.5 * l[a][c], 0.0);
            // ⟨η_a(s) ν_c(s+τ)⟩ = i M̄(τ) Θ(−τ)
            b[a][c + 2] = C64::new(0.0, m[a][c] * heaviside(-tau));
            // ⟨ν_a(s) η_c(s+τ)⟩ = i M̄(−τ)ᵀ Θ(τ)
            b[a + 2][c] = C64::new(0.0, -m[c][a] * heaviside(tau));
        }
    }
    b
}

/// Blocks C(j·dt) for j = −(n−1) ..= n−1; entry `j + n − 1`.
pub fn build_cov_sequence(omega: f64, dt: f64, n_steps: usize) -> Vec<Block> {
    let n = n_steps as i64;
    (-(n - 1)..n).map(|j| cov_block(omega, j as f64 * dt)).collect()
}

fn transpose(b: &Block) -> Block {
    let mut t = *b;
    for (i, row) in b.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

fn to_matrix(b: &Block) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| b[i][j])
}

fn from_matrix(m: &Matrix4<C64>) -> Block {
    let mut b = [[C64::new(0.0, 0.0); 4]; 4];
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    b
}

/// Principal square root of a complex 4×4 matrix through its Schur form.
pub fn principal_sqrt(m: &Matrix4<C64>) -> Result<Matrix4<C64>> {
    let schur = Schur::try_new(*m, 1e-15, 10_000)
        .ok_or_else(|| Error::Factorization { index: 0, residual: f64::INFINITY })?;
    let (q, t) = schur.unpack();
    let mut r = Matrix4::<C64>::zeros();
    for i in 0..4 {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for d in 1..4 {
        for i in 0..4 - d {
            let j = i + d;
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            let den = r[(i, i)] + r[(j, j)];
            r[(i, j)] = if den.norm() > 0.0 { s / den } else { C64::new(0.0, 0.0) };
        }
    }
    Ok(q * r * q.adjoint())
}

/// Frequency-domain filter for one mode frequency.
#[derive(Debug, Clone)]
pub struct NoiseFactor {
    pub n_steps: usize,
    /// Circulant length: the smallest power of two ≥ 2·n_steps.
    pub period: usize,
    filter: Vec<Block>,
    /// Largest relative reconstruction residual ‖S² − Ĉ‖/‖Ĉ‖ over frequencies.
    pub residual: f64,
}

impl NoiseFactor {
    pub fn new(omega: f64, dt: f64, n_steps: usize) -> Result<Self> {
        Self::with_kernel(omega, dt, n_steps, Kernel::Physical)
    }

    pub fn with_kernel(omega: f64, dt: f64, n_steps: usize, kernel: Kernel) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Config("noise needs at least one step".into()));
        }
        let omega = kernel.frequency(omega);
        let n = n_steps;
        let p = (2 * n).next_power_of_two();
        let zero = C64::new(0.0, 0.0);
        // lag sequence of C(τ)ᵀ; lags beyond ±(n−1) are zero
        let mut seq = vec![[[zero; 4]; 4]; p];
        for (j, slot) in seq.iter_mut().enumerate() {
            let lag = if j < n {
                j as i64
            } else if j > p - n {
                j as i64 - p as i64
            } else {
                continue;
            };
            *slot = transpose(&cov_block(omega, lag as f64 * dt));
        }
        let fft = FftPlanner::<f64>::new().plan_fft_forward(p);
        let mut spec = vec![[[zero; 4]; 4]; p];
        let mut line = vec![zero; p];
        for a in 0..4 {
            for b in 0..4 {
                for (x, s) in line.iter_mut().zip(&seq) {
                    *x = s[a][b];
                }
                fft.process(&mut line);
                for (s, x) in spec.iter_mut().zip(&line) {
                    s[a][b] = *x;
                }
            }
        }
        let mut filter = vec![[[zero; 4]; 4]; p];
        let mut worst = 0.0f64;
        for f in 0..=p / 2 {
            let c = to_matrix(&spec[f]);
            let mut s = principal_sqrt(&c).map_err(|_| Error::Factorization { index: f, residual: f64::INFINITY })?;
            if f == 0 || f == p / 2 {
                s = (s + s.transpose()) * C64::new(0.5, 0.0);
            }
            let scale = c.norm().max(f64::MIN_POSITIVE);
            let res = (s * s - c).norm() / scale;
            if !(res <= RECONSTRUCTION_TOL) {
                return Err(Error::Factorization { index: f, residual: res });
            }
            worst = worst.max(res);
            filter[f] = from_matrix(&s);
            if f > 0 && f < p / 2 {
                filter[p - f] = from_matrix(&s.transpose());
            }
        }
        Ok(Self { n_steps: n, period: p, filter, residual: worst })
    }

    /// Filters fresh white noise from `rng`; returns `n_steps` samples.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<[C64; 4]> {
        let p = self.period;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(p);
        let inv = planner.plan_fft_inverse(p);
        let mut w: Vec<Vec<C64>> = (0..4).map(|_| vec![C64::new(0.0, 0.0); p]).collect();
        for t in 0..p {
            for comp in w.iter_mut() {
                let x: f64 = StandardNormal.sample(rng);
                comp[t] = C64::new(x, 0.0);
            }
        }
        for comp in w.iter_mut() {
            fwd.process(comp);
        }
        let mut z: Vec<Vec<C64>> = (0..4).map(|_| vec![C64::new(0.0, 0.0); p]).collect();
        for f in 0..p {
            let h = &self.filter[f];
            for a in 0..4 {
                z[a][f] = (0..4).map(|b| h[a][b] * w[b][f]).sum();
            }
        }
        for comp in z.iter_mut() {
            inv.process(comp);
        }
        let inv_p = 1.0 / p as f64;
        (0..self.n_steps).map(|t| [z[0][t] * inv_p, z[1][t] * inv_p, z[2][t] * inv_p, z[3][t] * inv_p]).collect()
    }
}

/// Per-mode noise samples on the uniform grid t_j = j·dt.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectory<T> {
    pub n_modes: usize,
    pub n_steps: usize,
    pub dt: T,
    pub seed: u64,
    /// Row-major `[step][mode]` of (η_x, η_y, ν_x, ν_y).
    pub data: Vec<[Cplx<T>; 4]>,
}

impl<T: Real> NoiseTrajectory<T> {
    pub fn zeros(n_modes: usize, n_steps: usize, dt: T) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self { n_modes, n_steps, dt, seed: 0, data: vec![[z; 4]; n_modes * n_steps] }
    }

    #[inline]
    pub fn at(&self, step: usize, mode: usize) -> &[Cplx<T>; 4] {
        &self.data[step * self.n_modes + mode]
    }

    pub fn eta(&self, step: usize, mode: usize) -> [Cplx<T>; 2] {
        let z = self.at(step, mode);
        [z[0], z[1]]
    }

    pub fn nu(&self, step: usize, mode: usize) -> [Cplx<T>; 2] {
        let z = self.at(step, mode);
        [z[2], z[3]]
    }

    pub fn duration(&self) -> T {
        self.dt * T::lit((self.n_steps.max(1) - 1) as f64)
    }

    /// Linear interpolation in time; clamps to the last sample.
    pub fn interpolate(&self, mode: usize, t: T) -> [Cplx<T>; 4] {
        let x = (t / self.dt).max(T::zero());
        let j = x.floor().to_usize().unwrap_or(0).min(self.n_steps - 1);
        if j + 1 >= self.n_steps {
            return *self.at(self.n_steps - 1, mode);
        }
        let w = x - T::lit(j as f64);
        let a = self.at(j, mode);
        let b = self.at(j + 1, mode);
        let mut out = *a;
        for c in 0..4 {
            out[c] = a[c] + (b[c] - a[c]) * w;
        }
        out
    }

    /// Little-endian dump: u64 modes, u64 steps, f64 dt, then for each step
    /// and mode the four components as (re, im) f64 pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_modes as u64).to_le_bytes())?;
        w.write_all(&(self.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.dt.as_f64().to_le_bytes())?;
        for z in &self.data {
            for c in z {
                w.write_all(&c.re.as_f64().to_le_bytes())?;
                w.write_all(&c.im.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let n_modes = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let dt = f64::from_le_bytes(next(&mut r)?);
        let mut data = Vec::with_capacity(n_modes * n_steps);
        for _ in 0..n_modes * n_steps {
            let mut z = [Complex::new(T::zero(), T::zero()); 4];
            for c in z.iter_mut() {
                let re = f64::from_le_bytes(next(&mut r)?);
                let im = f64::from_le_bytes(next(&mut r)?);
                *c = Complex::new(T::lit(re), T::lit(im));
            }
            data.push(z);
        }
        Ok(Self { n_modes, n_steps, dt: T::lit(dt), seed: 0, data })
    }
}

/// Independent RNG stream for one mode of one realization.
pub fn mode_rng(seed: u64, mode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mode as u64 + 1);
    rng
}

/// Filters for every distinct mode frequency, reusable across realizations.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    pub dt: f64,
    pub n_steps: usize,
    factors: Vec<NoiseFactor>,
    class: Vec<usize>,
}

impl NoiseBank {
    pub fn new<T: Real>(modes: &ModeSet<T>, dt: f64, n_steps: usize) -> Result<Self> {
        let (freqs, class) = modes.frequency_classes();
        let factors = freqs
            .par_iter()
            .map(|w| NoiseFactor::new(w.as_f64(), dt, n_steps))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dt, n_steps, factors, class })
    }

    pub fn n_modes(&self) -> usize {
        self.class.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.factors.iter().map(|f| f.residual).fold(0.0, f64::max)
    }

    pub fn generate<T: Real>(&self, seed: u64) -> NoiseTrajectory<T> {
        let per_mode: Vec<Vec<[C64; 4]>> = (0..self.n_modes())
            .into_par_iter()
            .map(|m| self.factors[self.class[m]].sample(&mut mode_rng(seed, m)))
            .collect();
        let n_modes = self.n_modes();
        let mut data = Vec::with_capacity(n_modes * self.n_steps);
        for t in 0..self.n_steps {
            for series in &per_mode {
                let z = series[t];
                data.push([0, 1, 2, 3].map(|c| Complex::new(T::lit(z[c].re), T::lit(z[c].im))));
            }
        }
        NoiseTrajectory { n_modes, n_steps: self.n_steps, dt: T::lit(self.dt), seed, data }
    }
}

/// One-shot generation for a mode set.
pub fn generate<T: Real>(modes: &ModeSet<T>, dt: f64, n_steps: usize, seed: u64) -> Result<NoiseTrajectory<T>> {
    Ok(NoiseBank::new(modes, dt, n_steps)?.generate(seed))
}

/// Uncorrelated real white noise of variance ½ per component, for negative
/// controls.
pub fn white_noise(n_modes: usize, n_steps: usize, dt: f64, seed: u64) -> NoiseTrajectory<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..n_modes * n_steps)
        .map(|_| {
            [0; 4].map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                C64::new(s * x, 0.0)
            })
        })
        .collect();
    NoiseTrajectory { n_modes, n_steps, dt, seed, data }
}

/// Deviation of one lag from its target.
#[derive(Debug, Clone, PartialEq)]
pub struct LagStats {
    pub lag: usize,
    /// Largest |empirical − target| over the checked entries.
    pub max_abs_deviation: f64,
    /// Largest deviation measured in standard errors.
    pub max_sigmas: f64,
    /// Entry (a, b) of the 4×4 block with the largest `max_sigmas`.
    pub worst_entry: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub n_realizations: usize,
    pub rows: Vec<LagStats>,
    pub max_abs_deviation: f64,
    pub max_sigmas: f64,
}

impl StatsReport {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.max_sigmas < sigmas
    }
}

/// All sixteen entries of the block.
pub const ALL_ENTRIES: [(usize, usize); 16] = {
    let mut e = [(0, 0); 16];
    let mut k = 0;
    while k < 16 {
        e[k] = (k / 4, k % 4);
        k += 1;
    }
    e
};

/// Compares ⟨z_a(0) z_b(lag·dt)⟩ over realizations with C_ab(lag·dt) for
/// lags 0 ..= max_lag. The error bar of each complex entry is the combined
/// standard error of its real and imaginary parts.
pub fn validate_statistics<T: Real>(
    trajectories: &[NoiseTrajectory<T>],
    mode: usize,
    omega: f64,
    max_lag: usize,
    entries: &[(usize, usize)],
) -> Result<StatsReport> {
    let n = trajectories.len();
    if n < 100 {
        return Err(Error::InsufficientSamples { needed: 100, got: n });
    }
    let steps = trajectories.iter().map(|t| t.n_steps).min().unwrap_or(0);
    if max_lag >= steps {
        return Err(Error::Config(format!("max lag {max_lag} needs more than {steps} steps")));
    }
    let dt = trajectories[0].dt.as_f64();
    let nf = n as f64;
    let mut rows = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let target = cov_block(omega, lag as f64 * dt);
        let mut row = LagStats { lag, max_abs_deviation: 0.0, max_sigmas: 0.0, worst_entry: entries[0] };
        for &(a, b) in entries {
            let (mut sr, mut si, mut qr, mut qi) = (0.0, 0.0, 0.0, 0.0);
            for tr in trajectories {
                let x = tr.at(0, mode)[a];
                let y = tr.at(lag, mode)[b];
                let p = Complex::new(x.re.as_f64(), x.im.as_f64()) * Complex::new(y.re.as_f64(), y.im.as_f64());
                sr += p.re;
                si += p.im;
                qr += p.re * p.re;
                qi += p.im * p.im;
            }
            let mean = C64::new(sr / nf, si / nf);
            let var_r = (qr / nf - mean.re * mean.re).max(0.0);
            let var_i = (qi / nf - mean.im * mean.im).max(0.0);
            let err = ((var_r + var_i) / (nf - 1.0)).sqrt();
            let dev = (mean - target[a][b]).norm();
            let sig = if err > 0.0 {
                dev / err
            } else if dev > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            row.max_abs_deviation = row.max_abs_deviation.max(dev);
            if sig > row.max_sigmas || (sig == row.max_sigmas && row.max_sigmas == 0.0) {
                row.max_sigmas = sig;
                row.worst_entry = (a, b);
            }
        }
        rows.push(row);
    }
    let max_abs_deviation = rows.iter().map(|r| r.max_abs_deviation).fold(0.0, f64::max);
    let max_sigmas = rows.iter().map(|r| r.max_sigmas).fold(0.0, f64::max);
    Ok(StatsReport { n_realizations: n, rows, max_abs_deviation, max_sigmas })
}

/// Noise for a single isolated mode of frequency `omega`, one trajectory per
/// seed; used for statistical validation.
pub fn single_mode_ensemble(
    omega: f64,
    dt: f64,
    n_steps: usize,
    seeds: impl IntoIterator<Item = u64>,
    kernel: Kernel,
) -> Result<Vec<NoiseTrajectory<f64>>> {
    let factor = NoiseFactor::with_kernel(omega, dt, n_steps, kernel)?;
    let seeds: Vec<u64> = seeds.into_iter().collect();
    Ok(seeds
        .par_iter()
        .map(|&s| {
            let data = factor.sample(&mut mode_rng(s, 0));
            NoiseTrajectory { n_modes: 1, n_steps, dt, seed: s, data }
        })
        .collect())
}
