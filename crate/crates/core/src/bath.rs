//! Discretized lattice bath: Fröhlich modes on the reciprocal grid of the
//! box, thermal coherent-state sampling, the mean-field deformation potential
//! and the Ehrenfest update of the mode coordinates.
//!
//! Phase-space convention: a mode with coherent amplitude α = √n̄·e^{iφ} has
//! coordinates X = (x, p) = −√2·(Re α, Im α). Free evolution is the clockwise
//! rotation X(t) = R(−ωt)·X(0), and with g_q(r) = G_q·(cos(q·r + π), sin(q·r))
//! the mean field X(t)·g_q(r) equals 2 g_q √n̄ cos(q·r − ωt + φ) where
//! g_q = G_q/√2 is the usual Fröhlich matrix element.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Fft2, Grid2D};
use crate::material::{bose, derive_parameters, MaterialParams};
use crate::scalar::{Cplx, Real};
use crate::units::UnitSystem;

/// One lattice normal mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode<T> {
    /// Integer reciprocal-lattice coordinates: q = (2π/L)·index.
    pub index: [i64; 2],
    /// Wave vector, nm⁻¹.
    pub q: [T; 2],
    /// ω = v_s|q| in eV.
    pub omega: T,
    /// |g_q(r)| = E_d|q| / √(ρ₂D·A·ω_q), eV.
    pub g_amp: T,
}

impl<T: Real> Mode<T> {
    pub fn q_norm(&self) -> T {
        self.q[0].hypot(self.q[1])
    }

    pub fn phase(&self, r: [T; 2]) -> T {
        self.q[0] * r[0] + self.q[1] * r[1]
    }

    /// Fröhlich matrix element g_q = E_d √(ħq / 2ρA v_s) = G_q/√2.
    pub fn frohlich_g(&self) -> T {
        self.g_amp / T::SQRT_2()
    }
}

/// Modes of the simulated box; closed under q → −q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet<T> {
    pub material: String,
    pub modes: Vec<Mode<T>>,
    pub box_length: T,
    pub q_cut: T,
}

impl<T: Real> ModeSet<T> {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn area(&self) -> T {
        self.box_length * self.box_length
    }

    /// Distinct frequencies (bitwise), in first-occurrence order, and the
    /// position of each mode's frequency in that list.
    pub fn frequency_classes(&self) -> (Vec<T>, Vec<usize>) {
        let mut distinct: Vec<T> = Vec::new();
        let mut lookup = std::collections::HashMap::new();
        let mut class = Vec::with_capacity(self.len());
        for m in &self.modes {
            let key = m.index[0] * m.index[0] + m.index[1] * m.index[1];
            let id = *lookup.entry(key).or_insert_with(|| {
                distinct.push(m.omega);
                distinct.len() - 1
            });
            class.push(id);
        }
        (distinct, class)
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}

/// All reciprocal-lattice points 2π/L·(n_x, n_y) with 0 < |q| ≤ q_cut, ordered
/// by n_x then n_y.
pub fn enumerate_modes<T: Real>(mat: &MaterialParams, box_length: f64, q_cut: f64) -> Result<ModeSet<T>> {
    let d = derive_parameters(mat)?;
    if !(box_length > 0.0) {
        return Err(Error::Config(format!("box length must be positive, got {box_length}")));
    }
    if !(q_cut > 0.0) || q_cut > d.q_d * (1.0 + 1e-12) {
        return Err(Error::Config(format!("q_cut {q_cut} must lie in (0, q_D = {}]", d.q_d)));
    }
    let dq = 2.0 * std::f64::consts::PI / box_length;
    let n_max = (q_cut / dq).floor() as i64;
    let v = mat.sound_speed();
    let rho_area = mat.areal_density() * box_length * box_length;
    let cut2 = (q_cut / dq) * (q_cut / dq);
    let mut modes = Vec::new();
    for nx in -n_max..=n_max {
        for ny in -n_max..=n_max {
            let r2 = (nx * nx + ny * ny) as f64;
            if r2 == 0.0 || r2 > cut2 {
                continue;
            }
            let q = [nx as f64 * dq, ny as f64 * dq];
            let qn = q[0].hypot(q[1]);
            let omega = v * qn;
            let g_amp = mat.e_d * qn / (rho_area * omega).sqrt();
            modes.push(Mode { index: [nx, ny], q: [T::lit(q[0]), T::lit(q[1])], omega: T::lit(omega), g_amp: T::lit(g_amp) });
        }
    }
    if modes.is_empty() {
        return Err(Error::EmptyBath { box_length, q_cut });
    }
    Ok(ModeSet { material: mat.name.clone(), modes, box_length: T::lit(box_length), q_cut: T::lit(q_cut) })
}

/// g_q(r) = G_q·[cos(q·r + π), sin(q·r)].
pub fn coupling_vector<T: Real>(mode: &Mode<T>, r: [T; 2]) -> [T; 2] {
    let th = mode.phase(r);
    [mode.g_amp * (th + T::PI()).cos(), mode.g_amp * th.sin()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SamplingScheme {
    /// |α|² = n̄ exactly, uniformly random phase.
    #[default]
    RandomPhase,
    /// α drawn from the Glauber P distribution, a complex Gaussian with ⟨|α|²⟩ = n̄.
    FullGaussian,
}

/// Mode coordinates X_q = (x_q, p_q) at a reference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentAmplitudes<T> {
    pub coords: Vec<[T; 2]>,
    /// Time at which `coords` hold, internal units.
    pub time: T,
    pub temperature: f64,
    pub scheme: SamplingScheme,
}

impl<T: Real> CoherentAmplitudes<T> {
    pub fn zeros(n: usize) -> Self {
        Self { coords: vec![[T::zero(); 2]; n], time: T::zero(), temperature: 0.0, scheme: SamplingScheme::RandomPhase }
    }

    pub fn from_alpha(alpha: &[Cplx<T>], temperature: f64, scheme: SamplingScheme) -> Self {
        let s = -T::SQRT_2();
        let coords = alpha.iter().map(|a| [s * a.re, s * a.im]).collect();
        Self { coords, time: T::zero(), temperature, scheme }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Complex amplitude α at the reference time.
    pub fn alpha(&self, i: usize) -> Cplx<T> {
        let s = -T::FRAC_1_SQRT_2();
        Complex::new(s * self.coords[i][0], s * self.coords[i][1])
    }

    /// Freely evolved X_q(t) = R(−ω(t − t₀))·X_q(t₀).
    pub fn evolved(&self, mode: &Mode<T>, i: usize, t: T) -> [T; 2] {
        rotate(self.coords[i], -(mode.omega * (t - self.time)))
    }
}

#[inline]
fn rotate<T: Real>(x: [T; 2], angle: T) -> [T; 2] {
    let (s, c) = angle.sin_cos();
    [c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

/// Thermal coherent amplitudes at `t_kelvin`.
pub fn sample_thermal<T: Real, R: Rng + ?Sized>(
    modes: &ModeSet<T>,
    t_kelvin: f64,
    scheme: SamplingScheme,
    rng: &mut R,
) -> CoherentAmplitudes<T> {
    let kt = UnitSystem::thermal_energy(t_kelvin);
    let phase = Uniform::new(0.0, 2.0 * std::f64::consts::PI);
    let alpha: Vec<Cplx<T>> = modes
        .modes
        .iter()
        .map(|m| {
            let nbar = if kt > 0.0 { bose(m.omega.as_f64() / kt) } else { 0.0 };
            let a = match scheme {
                SamplingScheme::RandomPhase => {
                    let phi: f64 = phase.sample(rng);
                    Complex::from_polar(nbar.sqrt(), phi)
                }
                SamplingScheme::FullGaussian => {
                    let s = (nbar / 2.0).sqrt();
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex::new(s * re, s * im)
                }
            };
            Complex::new(T::lit(a.re), T::lit(a.im))
        })
        .collect();
    CoherentAmplitudes::from_alpha(&alpha, t_kelvin, scheme)
}

/// Synthesizes Σ_q Y_q·g_q(r) on a grid from per-mode complex 2-vectors Y_q,
/// and the reverse projection ⟨a|g_q|b⟩. Each g_q component is a pair of
/// Fourier harmonics e^{±iq·r}, so one inverse FFT covers every mode.
pub struct ModeProjector<T: Real> {
    grid: Grid2D<T>,
    fft: Fft2<T>,
    plus_bin: Vec<usize>,
    minus_bin: Vec<usize>,
    g_amp: Vec<T>,
    buf: Vec<Cplx<T>>,
}

impl<T: Real> ModeProjector<T> {
    pub fn new(modes: &ModeSet<T>, grid: Grid2D<T>) -> Result<Self> {
        let tol = T::lit(1e-9) * grid.length;
        if (modes.box_length - grid.length).abs() > tol {
            return Err(Error::Consistency(format!(
                "mode set box {} nm differs from grid box {} nm",
                modes.box_length, grid.length
            )));
        }
        let mut plus_bin = Vec::with_capacity(modes.len());
        let mut minus_bin = Vec::with_capacity(modes.len());
        for m in &modes.modes {
            let bin = |a: i64, b: i64| -> Result<usize> {
                match (grid.bin_of(a), grid.bin_of(b)) {
                    (Some(i), Some(j)) => Ok(grid.index(i, j)),
                    _ => Err(Error::Consistency(format!("mode {:?} is off the {}-point reciprocal grid", m.index, grid.n))),
                }
            };
            plus_bin.push(bin(m.index[0], m.index[1])?);
            minus_bin.push(bin(-m.index[0], -m.index[1])?);
        }
        Ok(Self {
            grid,
            fft: Fft2::new(grid.n),
            plus_bin,
            minus_bin,
            g_amp: modes.modes.iter().map(|m| m.g_amp).collect(),
            buf: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        })
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.g_amp.len()
    }

    /// out(r) = Σ_q Y_q·g_q(r) for complex Y_q produced by `coeff(q_index)`.
    pub fn synthesize<F: FnMut(usize) -> [Cplx<T>; 2]>(&mut self, mut coeff: F, out: &mut [Cplx<T>]) {
        let zero = Complex::new(T::zero(), T::zero());
        out.iter_mut().for_each(|z| *z = zero);
        let half = T::lit(0.5);
        let i = Complex::new(T::zero(), T::one());
        for k in 0..self.g_amp.len() {
            let y = coeff(k);
            let g = self.g_amp[k] * half;
            // −Y0 cos θ + Y1 sin θ = c₊ e^{iθ} + c₋ e^{−iθ}
            out[self.plus_bin[k]] += (-y[0] - i * y[1]) * g;
            out[self.minus_bin[k]] += (-y[0] + i * y[1]) * g;
        }
        self.fft.inverse(out);
    }

    /// ⟨a|g_q|b⟩ for every mode, using the grid cell area as measure.
    pub fn expectations(&mut self, a: &[Cplx<T>], b: &[Cplx<T>]) -> Vec<[Cplx<T>; 2]> {
        let da = self.grid.cell_area();
        for ((z, x), y) in self.buf.iter_mut().zip(a).zip(b) {
            *z = x.conj() * y * da;
        }
        self.fft.forward(&mut self.buf);
        let half = T::lit(0.5);
        let i = Complex::new(T::zero(), T::one());
        (0..self.g_amp.len())
            .map(|k| {
                // forward FFT carries e^{-ik·r}: Σρ e^{+iq·r} sits in the −q bin
                let e_plus = self.buf[self.minus_bin[k]];
                let e_minus = self.buf[self.plus_bin[k]];
                let g = self.g_amp[k];
                [-(e_plus + e_minus) * (g * half), (e_plus - e_minus) * (g * half) / i]
            })
            .collect()
    }
}

/// Mean-field deformation potential V(r, t) = Σ_q X_q(t)·g_q(r) with freely
/// evolved coordinates.
pub fn deformation_potential<T: Real>(
    modes: &ModeSet<T>,
    amps: &CoherentAmplitudes<T>,
    grid: &Grid2D<T>,
    t: T,
) -> Result<Vec<T>> {
    if amps.len() != modes.len() {
        return Err(Error::Consistency(format!("{} amplitudes for {} modes", amps.len(), modes.len())));
    }
    let mut proj = ModeProjector::new(modes, *grid)?;
    let mut field = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    proj.synthesize(
        |k| {
            let x = amps.evolved(&modes.modes[k], k, t);
            [Complex::new(x[0], T::zero()), Complex::new(x[1], T::zero())]
        },
        &mut field,
    );
    Ok(field.into_iter().map(|z| z.re).collect())
}

/// One step of dX_q/dt = J·(ω_q X_q + ½⟨g_q⟩), J = [[0, 1], [−1, 0]]: exact
/// rotation for the free part, midpoint rule for the drive.
pub fn ehrenfest_step<T: Real>(
    modes: &ModeSet<T>,
    amps: &CoherentAmplitudes<T>,
    expectation_g: &[[T; 2]],
    dt: T,
) -> Result<CoherentAmplitudes<T>> {
    if expectation_g.len() != amps.len() || amps.len() != modes.len() {
        return Err(Error::Consistency("ehrenfest_step: mode, amplitude and drive counts differ".into()));
    }
    let half = T::lit(0.5);
    let coords = modes
        .modes
        .iter()
        .zip(&amps.coords)
        .zip(expectation_g)
        .map(|((m, x), g)| {
            let free = rotate(*x, -(m.omega * dt));
            // J·½g = ½(g1, −g0)
            let drive = rotate([half * g[1], -half * g[0]], -(m.omega * dt * half));
            [free[0] + dt * drive[0], free[1] + dt * drive[1]]
        })
        .collect();
    Ok(CoherentAmplitudes { coords, time: amps.time + dt, temperature: amps.temperature, scheme: amps.scheme })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn copper_modes(l: f64) -> ModeSet<f64> {
        let m = MaterialParams::copper();
        let qd = derive_parameters(&m).unwrap().q_d;
        enumerate_modes(&m, l, qd).unwrap()
    }

    #[test]
    fn smallest_shell_has_four_modes() {
        let m = MaterialParams::copper();
        let q_cut = 0.01;
        let l = 2.0 * std::f64::consts::PI / q_cut + 1e-6;
        let set: ModeSet<f64> = enumerate_modes(&m, l, q_cut).unwrap();
        let mut idx: Vec<_> = set.modes.iter().map(|m| m.index).collect();
        idx.sort();
        assert_eq!(idx, vec![[-1, 0], [0, -1], [0, 1], [1, 0]]);
    }

    #[test]
    fn too_small_box_is_empty() {
        let m = MaterialParams::copper();
        assert!(matches!(enumerate_modes::<f64>(&m, 0.1, 1.0), Err(Error::EmptyBath { .. })));
    }

    #[test]
    fn cut_above_debye_rejected() {
        let m = MaterialParams::copper();
        assert!(enumerate_modes::<f64>(&m, 10.0, 50.0).is_err());
    }

    #[test]
    fn count_matches_disk_area() {
        let set = copper_modes(40.0);
        let dq = 2.0 * std::f64::consts::PI / 40.0;
        let est = std::f64::consts::PI * set.q_cut * set.q_cut / (dq * dq);
        let rel = (set.len() as f64 - est).abs() / est;
        assert!(rel < 0.05, "{} vs {est}", set.len());
    }

    #[test]
    fn mode_invariants() {
        let set = copper_modes(6.0);
        let dq = 2.0 * std::f64::consts::PI / 6.0;
        let v = MaterialParams::copper().sound_speed();
        let mut keys = std::collections::HashSet::new();
        for m in &set.modes {
            assert!(m.index != [0, 0]);
            assert!(m.q_norm() <= set.q_cut + 1e-12 && m.q_norm() > 0.0);
            assert!((m.q[0] - dq * m.index[0] as f64).abs() < 1e-12);
            assert!((m.omega - v * m.q_norm()).abs() < 1e-15);
            keys.insert(m.index);
        }
        for m in &set.modes {
            assert!(keys.contains(&[-m.index[0], -m.index[1]]));
        }
    }

    #[test]
    fn coupling_vector_phases() {
        let m: Mode<f64> = Mode { index: [1, 0], q: [2.0, 0.0], omega: 1.0, g_amp: 0.7 };
        let g = coupling_vector(&m, [0.0, 0.0]);
        assert!((g[0] + 0.7).abs() < 1e-15 && g[1].abs() < 1e-15);
        let g = coupling_vector(&m, [std::f64::consts::PI / 4.0, 3.0]);
        assert!(g[0].abs() < 1e-15 && (g[1] - 0.7).abs() < 1e-15);
        for x in [0.1, 1.3, -7.2] {
            let g = coupling_vector(&m, [x, 0.2]);
            assert!((g[0].hypot(g[1]) - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_temperature_amplitudes_vanish() {
        let set = copper_modes(6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scheme in [SamplingScheme::RandomPhase, SamplingScheme::FullGaussian] {
            let a = sample_thermal(&set, 0.0, scheme, &mut rng);
            assert!(a.coords.iter().all(|x| x[0] == 0.0 && x[1] == 0.0));
        }
    }

    #[test]
    fn random_phase_occupation_at_kt_equal_omega() {
        let set = copper_modes(6.0);
        let m = set.modes[0];
        let t = UnitSystem::temperature_from_energy(m.omega);
        let one = ModeSet { modes: vec![m], ..set.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = sample_thermal(&one, t, SamplingScheme::RandomPhase, &mut rng);
        let expected = 1.0 / (std::f64::consts::E - 1.0);
        assert!((a.alpha(0).norm_sqr() - expected).abs() < 1e-12);
        assert!((expected - 0.581_98).abs() < 1e-5);
    }

    #[test]
    fn full_gaussian_mean_occupation() {
        let set = copper_modes(6.0);
        let m = set.modes[0];
        let one = ModeSet { modes: vec![m], ..set.clone() };
        let t = 300.0;
        let nbar = bose(m.omega / UnitSystem::thermal_energy(t));
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_thermal(&one, t, SamplingScheme::FullGaussian, &mut rng).alpha(0).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean / nbar - 1.0).abs() < 0.02, "{mean} vs {nbar}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let set = copper_modes(6.0);
        let a = sample_thermal(&set, 300.0, SamplingScheme::RandomPhase, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_thermal(&set, 300.0, SamplingScheme::RandomPhase, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    fn direct_potential(set: &ModeSet<f64>, amps: &CoherentAmplitudes<f64>, r: [f64; 2], t: f64) -> f64 {
        set.modes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let a = amps.alpha(k);
                2.0 * m.frohlich_g() * a.norm() * (m.phase(r) - m.omega * t + a.arg()).cos()
            })
            .sum()
    }

    #[test]
    fn fft_potential_matches_direct_sum() {
        let set = copper_modes(6.0);
        let grid = Grid2D::new(64, 6.0).unwrap();
        let amps = sample_thermal(&set, 353.0, SamplingScheme::RandomPhase, &mut ChaCha8Rng::seed_from_u64(3));
        let t = 17.0;
        let v = deformation_potential(&set, &amps, &grid, t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..16 {
            let (i, j) = (rng.gen_range(0..64), rng.gen_range(0..64));
            let d = direct_potential(&set, &amps, [grid.coord(i), grid.coord(j)], t);
            assert!((v[grid.index(i, j)] - d).abs() <= 1e-9 * d.abs().max(1e-3), "{} vs {d}", v[grid.index(i, j)]);
        }
    }

    #[test]
    fn potential_zero_mean_periodic_and_zero_for_zero_amps() {
        let set = copper_modes(6.0);
        let grid = Grid2D::new(64, 6.0).unwrap();
        let zero = CoherentAmplitudes::zeros(set.len());
        assert!(deformation_potential(&set, &zero, &grid, 0.0).unwrap().iter().all(|&v| v == 0.0));
        let amps = sample_thermal(&set, 353.0, SamplingScheme::RandomPhase, &mut ChaCha8Rng::seed_from_u64(3));
        let v = deformation_potential(&set, &amps, &grid, 0.0).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 1e-12);
        // periodic images evaluate identically through the direct sum
        let r = [grid.coord(5), grid.coord(9)];
        let a = direct_potential(&set, &amps, r, 0.0);
        let b = direct_potential(&set, &amps, [r[0] + 6.0, r[1]], 0.0);
        let c = direct_potential(&set, &amps, [r[0], r[1] + 6.0], 0.0);
        assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9);
    }

    #[test]
    fn off_grid_mode_is_rejected() {
        let set = copper_modes(6.0);
        let grid = Grid2D::new(8, 6.0).unwrap();
        assert!(matches!(ModeProjector::new(&set, grid), Err(Error::Consistency(_))));
        let grid = Grid2D::new(64, 7.0).unwrap();
        assert!(ModeProjector::new(&set, grid).is_err());
    }

    #[test]
    fn expectations_match_direct_integral() {
        let set = copper_modes(6.0);
        let grid = Grid2D::new(32, 6.0).unwrap();
        let mut proj = ModeProjector::new(&set, grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<Cplx<f64>> = (0..grid.len()).map(|_| Complex::new(rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let b: Vec<Cplx<f64>> = (0..grid.len()).map(|_| Complex::new(rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let e = proj.expectations(&a, &b);
        for k in [0usize, 7, set.len() - 1] {
            let m = &set.modes[k];
            let mut acc = [Complex::new(0.0, 0.0); 2];
            for i in 0..32 {
                for j in 0..32 {
                    let g = coupling_vector(m, [grid.coord(i), grid.coord(j)]);
                    let w = a[grid.index(i, j)].conj() * b[grid.index(i, j)] * grid.cell_area();
                    acc[0] += w * g[0];
                    acc[1] += w * g[1];
                }
            }
            for c in 0..2 {
                assert!((acc[c] - e[k][c]).norm() < 1e-10 * acc[c].norm().max(1e-6));
            }
        }
    }

    fn driven_closed_form(omega: f64, x0: [f64; 2], g: [f64; 2], t: f64) -> [f64; 2] {
        // fixed point ωX* + ½g = 0; deviation rotates freely
        let xs = [-g[0] / (2.0 * omega), -g[1] / (2.0 * omega)];
        let d = rotate([x0[0] - xs[0], x0[1] - xs[1]], -omega * t);
        [d[0] + xs[0], d[1] + xs[1]]
    }

    fn one_mode(omega: f64) -> ModeSet<f64> {
        ModeSet { material: "test".into(), modes: vec![Mode { index: [1, 0], q: [1.0, 0.0], omega, g_amp: 1.0 }], box_length: 1.0, q_cut: 1.0 }
    }

    #[test]
    fn free_rotation_conserves_norm() {
        let set = one_mode(0.3);
        let mut a: CoherentAmplitudes<f64> = CoherentAmplitudes { coords: vec![[1.2, -0.4]], time: 0.0, temperature: 0.0, scheme: SamplingScheme::RandomPhase };
        let r0 = a.coords[0][0].hypot(a.coords[0][1]);
        let dt = 0.05;
        for _ in 0..1000 {
            a = ehrenfest_step(&set, &a, &[[0.0, 0.0]], dt).unwrap();
        }
        let r = a.coords[0][0].hypot(a.coords[0][1]);
        assert!((r - r0).abs() < 1e-10);
        let expect = rotate([1.2, -0.4], -0.3 * 1000.0 * dt);
        assert!((a.coords[0][0] - expect[0]).abs() < 1e-10 && (a.coords[0][1] - expect[1]).abs() < 1e-10);
    }

    fn driven_error(dt: f64, steps: usize) -> f64 {
        let set = one_mode(0.3);
        let g = [0.2, -0.5];
        let mut a = CoherentAmplitudes { coords: vec![[1.0, 0.5]], time: 0.0, temperature: 0.0, scheme: SamplingScheme::RandomPhase };
        for _ in 0..steps {
            a = ehrenfest_step(&set, &a, &[g], dt).unwrap();
        }
        let exact = driven_closed_form(0.3, [1.0, 0.5], g, dt * steps as f64);
        (a.coords[0][0] - exact[0]).hypot(a.coords[0][1] - exact[1])
    }

    #[test]
    fn driven_mode_matches_closed_form() {
        assert!(driven_error(1e-3, 10_000) < 1e-6);
        let e1 = driven_error(0.02, 500);
        let e2 = driven_error(0.01, 1000);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn json_round_trip() {
        let set = copper_modes(3.0);
        let back: ModeSet<f64> = ModeSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
    }
}
