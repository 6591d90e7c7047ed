//! Bilinear expectations ⟨ψ₋|Ô|ψ₊⟩, momentum-relaxation fits and the
//! time-averaged spread ξ.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Fft2, Grid2D};
use crate::scalar::{Cplx, Real};
use crate::units::UnitSystem;

type C64 = Complex<f64>;

/// Operators evaluated by [`Observer::expect`].
#[derive(Clone, Copy)]
pub enum Operator<'a, T> {
    /// x measured as the minimum-image displacement from `origin`.
    X { origin: [T; 2] },
    Y { origin: [T; 2] },
    /// x² + y² about `origin`.
    R2 { origin: [T; 2] },
    /// −i∂ₓ, applied spectrally.
    Px,
    Py,
    Identity,
    /// Arbitrary multiplier m(k_x, k_y) in Fourier space.
    Fourier(&'a dyn Fn(T, T) -> Cplx<T>),
}

/// Owns the FFT workspace needed for spectral operators.
pub struct Observer<T: Real> {
    grid: Grid2D<T>,
    fft: Fft2<T>,
    a: Vec<Cplx<T>>,
    b: Vec<Cplx<T>>,
    spectral_valid: bool,
}

/// Values recorded at one time point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub px: C64,
    pub x: C64,
    pub y: C64,
    pub r2: C64,
    pub overlap: C64,
}

impl<T: Real> Observer<T> {
    pub fn new(grid: Grid2D<T>) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self { grid, fft: Fft2::new(grid.n), a: vec![z; grid.len()], b: vec![z; grid.len()], spectral_valid: false }
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    /// ⟨minus|Ô|plus⟩, not divided by the overlap.
    pub fn expect(&mut self, minus: &[Cplx<T>], plus: &[Cplx<T>], op: Operator<'_, T>) -> Cplx<T> {
        self.spectral_valid = false;
        self.eval(minus, plus, op)
    }

    fn eval(&mut self, minus: &[Cplx<T>], plus: &[Cplx<T>], op: Operator<'_, T>) -> Cplx<T> {
        let g = self.grid;
        let da = g.cell_area();
        let zero = Complex::new(T::zero(), T::zero());
        let pointwise = |w: &dyn Fn(usize, usize) -> T| -> Cplx<T> {
            let mut acc = zero;
            for i in 0..g.n {
                for j in 0..g.n {
                    let k = g.index(i, j);
                    acc += minus[k].conj() * plus[k] * w(i, j);
                }
            }
            acc * da
        };
        match op {
            Operator::Identity => pointwise(&|_, _| T::one()),
            Operator::X { origin } => pointwise(&|i, _| g.wrap_displacement(g.coord(i), origin[0])),
            Operator::Y { origin } => pointwise(&|_, j| g.wrap_displacement(g.coord(j), origin[1])),
            Operator::R2 { origin } => pointwise(&|i, j| {
                let dx = g.wrap_displacement(g.coord(i), origin[0]);
                let dy = g.wrap_displacement(g.coord(j), origin[1]);
                dx * dx + dy * dy
            }),
            Operator::Px => self.spectral(minus, plus, &|kx, _| Complex::new(kx, T::zero())),
            Operator::Py => self.spectral(minus, plus, &|_, ky| Complex::new(ky, T::zero())),
            Operator::Fourier(m) => self.spectral(minus, plus, m),
        }
    }

    fn spectral(&mut self, minus: &[Cplx<T>], plus: &[Cplx<T>], m: &dyn Fn(T, T) -> Cplx<T>) -> Cplx<T> {
        if !self.spectral_valid {
            self.a.copy_from_slice(minus);
            self.b.copy_from_slice(plus);
            self.fft.forward(&mut self.a);
            self.fft.forward(&mut self.b);
            self.spectral_valid = true;
        }
        let g = self.grid;
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..g.n {
            let kx = g.wavenumber(i);
            for j in 0..g.n {
                let k = g.index(i, j);
                acc += self.a[k].conj() * self.b[k] * m(kx, g.wavenumber(j));
            }
        }
        // Parseval: Σ_r a*b = N⁻² Σ_k â*b̂
        let n2 = T::lit(g.len() as f64);
        acc * (g.cell_area() / n2)
    }

    /// Momentum, position moments about `origin` and overlap in one pass.
    pub fn snapshot(&mut self, minus: &[Cplx<T>], plus: &[Cplx<T>], origin: [T; 2]) -> Snapshot {
        self.spectral_valid = false;
        let c = |z: Cplx<T>| C64::new(z.re.as_f64(), z.im.as_f64());
        let px = c(self.eval(minus, plus, Operator::Px));
        let g = self.grid;
        let da = g.cell_area();
        let zero = Complex::new(T::zero(), T::zero());
        let (mut s0, mut sx, mut sy, mut sr) = (zero, zero, zero, zero);
        for i in 0..g.n {
            let dx = g.wrap_displacement(g.coord(i), origin[0]);
            for j in 0..g.n {
                let dy = g.wrap_displacement(g.coord(j), origin[1]);
                let k = g.index(i, j);
                let w = minus[k].conj() * plus[k];
                s0 += w;
                sx += w * dx;
                sy += w * dy;
                sr += w * (dx * dx + dy * dy);
            }
        }
        Snapshot { px, x: c(sx * da), y: c(sy * da), r2: c(sr * da), overlap: c(s0 * da) }
    }
}

/// Observable time series of one realization or an ensemble average.
/// Times are internal units; values are raw complex bilinears.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub px: Vec<C64>,
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub r2: Vec<C64>,
    pub overlap: Vec<C64>,
    /// Standard error of Re⟨p_x⟩ across realizations; zero for a single run.
    pub stderr_px: Vec<f64>,
    /// ⟨g_q⟩ per record and mode, populated only with Ehrenfest feedback.
    pub g_expect: Vec<Vec<[C64; 2]>>,
    pub n_realizations: usize,
    pub n_divergent: usize,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, s: Snapshot) {
        self.times.push(t);
        self.px.push(s.px);
        self.x.push(s.x);
        self.y.push(s.y);
        self.r2.push(s.r2);
        self.overlap.push(s.overlap);
        self.stderr_px.push(0.0);
    }

    pub fn times_fs(&self) -> Vec<f64> {
        self.times.iter().map(|&t| UnitSystem::time_to_fs(t)).collect()
    }

    /// Position variance ⟨x²+y²⟩ − ⟨x⟩² − ⟨y⟩² from the real parts.
    pub fn variance(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.r2[i].re - self.x[i].re.powi(2) - self.y[i].re.powi(2)).collect()
    }

    /// Largest |Im| relative to |Re| of ⟨p_x⟩, a convergence diagnostic.
    pub fn max_imag_residual(&self) -> f64 {
        self.px.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// CSV with columns t_fs, px_re, px_im, x_re, y_re, r2_re, overlap_re,
    /// overlap_im, stderr_px, preceded by a `# config_hash=` comment.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\n");
        s.push_str("t_fs,px_re,px_im,x_re,y_re,r2_re,overlap_re,overlap_im,stderr_px\n");
        for i in 0..self.len() {
            s.push_str(&format!(
                "{:.6},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                UnitSystem::time_to_fs(self.times[i]),
                self.px[i].re,
                self.px[i].im,
                self.x[i].re,
                self.y[i].re,
                self.r2[i].re,
                self.overlap[i].re,
                self.overlap[i].im,
                self.stderr_px[i]
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    /// Relaxation time in fs; `f64::INFINITY` when no decay is found.
    pub tau_fs: f64,
    pub window_fs: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
    pub method: String,
    pub status: FitStatus,
}

impl RelaxationFit {
    pub fn is_ok(&self) -> bool {
        self.status == FitStatus::Ok
    }

    /// 1/τ in fs⁻¹; zero for a failed or non-decaying fit.
    pub fn rate_per_fs(&self) -> f64 {
        if self.tau_fs.is_finite() && self.tau_fs > 0.0 {
            1.0 / self.tau_fs
        } else {
            0.0
        }
    }

    fn failed(reason: impl Into<String>, window_fs: (f64, f64), n_points: usize) -> Self {
        Self {
            tau_fs: f64::INFINITY,
            window_fs,
            r_squared: 0.0,
            n_points,
            method: "log-linear".into(),
            status: FitStatus::Failed(reason.into()),
        }
    }
}

/// Least-squares fit of ln Re⟨p_x⟩ against t.
///
/// With `window = None` the fit runs from t = 0 up to the first sample at or
/// below 0.2 of the initial value, or the last sample before the signal turns
/// non-positive, whichever comes first. An explicit window is in fs.
pub fn fit_relaxation(series: &ObservableSeries, window: Option<(f64, f64)>) -> RelaxationFit {
    let t = series.times_fs();
    let p: Vec<f64> = series.px.iter().map(|z| z.re).collect();
    fit_decay(&t, &p, window)
}

/// [`fit_relaxation`] on plain arrays (times in fs).
pub fn fit_decay(t: &[f64], p: &[f64], window: Option<(f64, f64)>) -> RelaxationFit {
    let n = t.len().min(p.len());
    if n == 0 {
        return RelaxationFit::failed("empty series", (0.0, 0.0), 0);
    }
    let idx: Vec<usize> = match window {
        Some((a, b)) => (0..n).filter(|&i| t[i] >= a && t[i] <= b).collect(),
        None => {
            let mut v = Vec::new();
            let p0 = p[0];
            for i in 0..n {
                if !(p[i] > 0.0) {
                    break;
                }
                v.push(i);
                if p0 > 0.0 && p[i] <= 0.2 * p0 {
                    break;
                }
            }
            v
        }
    };
    let win = match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) => (t[a], t[b]),
        _ => window.unwrap_or((t[0], t[0])),
    };
    if idx.len() < 10 {
        return RelaxationFit::failed(format!("{} usable points, need 10", idx.len()), win, idx.len());
    }
    if idx.iter().any(|&i| !(p[i] > 0.0)) {
        return RelaxationFit::failed("non-positive momentum inside window", win, idx.len());
    }
    let m = idx.len() as f64;
    let xs: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| p[i].ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return RelaxationFit::failed("window has zero time extent", win, idx.len());
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 0.0 };
    if !(slope < 0.0) {
        let mut f = RelaxationFit::failed("no decay (non-negative slope)", win, idx.len());
        f.r_squared = r_squared;
        return f;
    }
    RelaxationFit {
        tau_fs: -1.0 / slope,
        window_fs: win,
        r_squared,
        n_points: idx.len(),
        method: "log-linear".into(),
        status: FitStatus::Ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub xi_nm: f64,
    /// Time points whose variance came out negative and was clamped to zero.
    pub clamped: usize,
}

/// ξ = √((1/T)∫₀ᵀ [⟨x²+y²⟩ − ⟨x⟩² − ⟨y⟩²] dt) by the trapezoid rule over
/// the recorded samples, with the integrand interpolated at T.
pub fn spread_xi(series: &ObservableSeries, t_window_fs: f64) -> Result<Spread> {
    let t = series.times_fs();
    let v = series.variance();
    spread_from_variance(&t, &v, t_window_fs)
}

pub fn spread_from_variance(t: &[f64], var: &[f64], t_window_fs: f64) -> Result<Spread> {
    if t.len() < 2 || !(t_window_fs > 0.0) {
        return Err(Error::InsufficientSamples { needed: 2, got: t.len() });
    }
    let last = *t.last().expect("nonempty");
    if t[0] > 1e-9 || last < t_window_fs * (1.0 - 1e-9) {
        return Err(Error::Config(format!(
            "series covers [{:.3}, {:.3}] fs, window needs [0, {t_window_fs}]",
            t[0], last
        )));
    }
    let mut clamped = 0;
    let val = |x: f64, c: &mut usize| {
        if x < 0.0 {
            *c += 1;
            0.0
        } else {
            x
        }
    };
    let mut acc = 0.0;
    for i in 1..t.len() {
        let (t0, t1) = (t[i - 1], t[i]);
        if t0 >= t_window_fs {
            break;
        }
        let v0 = val(var[i - 1], &mut clamped);
        let mut v1 = val(var[i], &mut clamped);
        let mut hi = t1;
        if t1 > t_window_fs {
            v1 = v0 + (v1 - v0) * (t_window_fs - t0) / (t1 - t0);
            hi = t_window_fs;
        }
        acc += 0.5 * (v0 + v1) * (hi - t0);
    }
    if clamped > 0 {
        log::warn!("spread: clamped {clamped} negative variance samples");
    }
    Ok(Spread { xi_nm: (acc / t_window_fs).sqrt(), clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(grid: &Grid2D<f64>, c: [f64; 2], k0: [f64; 2], sigma: f64) -> Vec<Cplx<f64>> {
        let mut v = vec![Complex::new(0.0, 0.0); grid.len()];
        let mut norm = 0.0;
        for i in 0..grid.n {
            for j in 0..grid.n {
                let dx = grid.wrap_displacement(grid.coord(i), c[0]);
                let dy = grid.wrap_displacement(grid.coord(j), c[1]);
                let z = Complex::from_polar((-(dx * dx + dy * dy) / (4.0 * sigma * sigma)).exp(), k0[0] * dx + k0[1] * dy);
                norm += z.norm_sqr();
                v[grid.index(i, j)] = z;
            }
        }
        let s = 1.0 / (norm * grid.cell_area()).sqrt();
        v.iter_mut().for_each(|z| *z *= s);
        v
    }

    #[test]
    fn gaussian_at_rest_has_zero_momentum() {
        let g = Grid2D::new(64, 10.0).unwrap();
        let psi = gaussian(&g, [5.0, 5.0], [0.0, 0.0], 0.6);
        let mut o = Observer::new(g);
        assert!(o.expect(&psi, &psi, Operator::Px).norm() < 1e-10);
        assert!((o.expect(&psi, &psi, Operator::Identity).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boosted_gaussian_momentum() {
        let g = Grid2D::new(128, 20.0).unwrap();
        let k0 = 4.92;
        let psi = gaussian(&g, [10.0, 10.0], [k0, 0.0], 1.0);
        let mut o = Observer::new(g);
        let p = o.expect(&psi, &psi, Operator::Px);
        assert!((p.re - k0).abs() < 1e-6 * k0 && p.im.abs() < 1e-10);
    }

    #[test]
    fn spectral_momentum_matches_finite_difference() {
        let g = Grid2D::new(256, 20.0).unwrap();
        let psi = gaussian(&g, [9.0, 11.0], [1.3, -0.4], 1.5);
        let phi = gaussian(&g, [10.0, 10.5], [1.0, 0.2], 1.7);
        let mut o = Observer::new(g);
        let spec = o.expect(&phi, &psi, Operator::Px);
        // eighth-order central difference of ψ along x
        let h = g.spacing();
        let n = g.n;
        let mut fd = Complex::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let at = |di: isize| psi[g.index(((i as isize + di).rem_euclid(n as isize)) as usize, j)];
                let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
                let d = (1..=4).map(|m| (at(m as isize) - at(-(m as isize))) * c[m - 1]).sum::<Cplx<f64>>() / h;
                fd += phi[g.index(i, j)].conj() * d * Complex::new(0.0, -1.0);
            }
        }
        fd *= g.cell_area();
        assert!((spec - fd).norm() < 1e-6 * spec.norm(), "{spec} vs {fd}");
    }

    #[test]
    fn momentum_squared_is_composition() {
        let g = Grid2D::new(64, 10.0).unwrap();
        let psi = gaussian(&g, [5.0, 5.0], [2.0, 1.0], 0.8);
        let mut o = Observer::new(g);
        let k2 = o.expect(&psi, &psi, Operator::Fourier(&|kx: f64, _| Complex::new(kx * kx, 0.0)));
        // ⟨ψ|p²|ψ⟩ = ‖pψ‖²
        let mut fft = Fft2::new(64);
        let mut a = psi.clone();
        fft.forward(&mut a);
        for i in 0..64 {
            for j in 0..64 {
                a[g.index(i, j)] *= g.wavenumber(i);
            }
        }
        fft.inverse(&mut a);
        let scale = 1.0 / (64.0 * 64.0);
        let pp: f64 = a.iter().map(|z| (z * scale).norm_sqr()).sum::<f64>() * g.cell_area();
        assert!((k2.re - pp).abs() < 1e-10 * pp);
    }

    #[test]
    fn position_moments_of_gaussian() {
        let g = Grid2D::new(128, 12.0).unwrap();
        let sigma = 0.7;
        let psi = gaussian(&g, [6.0, 6.0], [1.0, 0.0], sigma);
        let mut o = Observer::new(g);
        let s = o.snapshot(&psi, &psi, [6.0, 6.0]);
        assert!(s.x.norm() < 1e-12 && s.y.norm() < 1e-12);
        assert!((s.r2.re - 2.0 * sigma * sigma).abs() < 1e-6 * sigma * sigma);
        // translating by L leaves the moments unchanged
        let s2 = o.snapshot(&psi, &psi, [18.0, -6.0]);
        assert!((s.r2 - s2.r2).norm() < 1e-12);
    }

    fn synthetic(tau: f64, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, noise).unwrap();
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let p = t.iter().map(|&x| 2.0 * (-x / tau).exp() * (1.0 + d.sample(&mut rng))).collect();
        (t, p)
    }

    #[test]
    fn exact_exponential_fit() {
        let (t, p) = synthetic(10.0, 0.0, 0);
        let f = fit_decay(&t, &p, None);
        assert!(f.is_ok());
        assert!((f.tau_fs - 10.0).abs() < 1e-6 * 10.0);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        // default window stops at 0.2 of the initial value
        assert!(f.window_fs.1 <= 10.0 * 5f64.ln() + 0.1 + 1e-9);
    }

    #[test]
    fn noisy_exponential_fit() {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let (t, p) = synthetic(10.0, 0.05, seed);
            let f = fit_decay(&t, &p, None);
            worst = worst.max((f.tau_fs - 10.0).abs() / 10.0);
        }
        assert!(worst < 0.1, "{worst}");
    }

    #[test]
    fn constant_series_fails() {
        let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let f = fit_decay(&t, &vec![1.0; 50], None);
        assert!(!f.is_ok());
        assert!(f.tau_fs.is_infinite());
        assert_eq!(f.rate_per_fs(), 0.0);
        let f = fit_decay(&t[..5], &[1.0, 0.9, 0.8, 0.7, 0.6], None);
        assert!(!f.is_ok());
    }

    #[test]
    fn frozen_spread() {
        let t: Vec<f64> = (0..=40).map(|i| i as f64).collect();
        let sigma = 0.8;
        let v = vec![2.0 * sigma * sigma; t.len()];
        let s = spread_from_variance(&t, &v, 40.0).unwrap();
        assert!((s.xi_nm - sigma * 2f64.sqrt()).abs() < 1e-12);
        assert!(spread_from_variance(&t, &v, 50.0).is_err());
    }

    #[test]
    fn spread_of_free_law() {
        // variance 2σ²(1 + (t/τ)²) integrates to 2σ²(T + T³/(3τ²))
        let sigma: f64 = 0.5;
        let tau: f64 = 7.0;
        let big_t = 40.0;
        let t: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|x| 2.0 * sigma * sigma * (1.0 + (x / tau).powi(2))).collect();
        let xi = spread_from_variance(&t, &v, big_t).unwrap().xi_nm;
        let exact = (2.0 * sigma * sigma * (1.0 + big_t * big_t / (3.0 * tau * tau))).sqrt();
        assert!((xi - exact).abs() < 1e-4 * exact);
        let half = spread_from_variance(&t, &v, big_t / 2.0).unwrap().xi_nm;
        assert!(half < xi);
    }

    #[test]
    fn negative_variance_is_clamped() {
        let t = [0.0, 1.0, 2.0];
        let s = spread_from_variance(&t, &[1.0, -1.0, 1.0], 2.0).unwrap();
        assert_eq!(s.clamped, 2);
        assert!((s.xi_nm - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
