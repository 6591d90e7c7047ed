//! Strang-split propagation of the ψ± pair on the periodic grid.
//!
//! ψ₊ evolves under H_S + H⁺ and the ket ψ₋ under H_S + (H⁻)†, so that the
//! bra ⟨ψ₋| carries H⁻ and ρ = |ψ₊⟩⟨ψ₋| follows the stochastic master
//! equation. With complex noise (H⁻)† differs from H⁻; on the grid it is the
//! pointwise complex conjugate of the potential.

use num_complex::Complex;

use crate::bath::{CoherentAmplitudes, ModeProjector, ModeSet};
use crate::error::{Error, Result};
use crate::grid::{Fft2, Grid2D};
use crate::noise::NoiseTrajectory;
use crate::scalar::{cis, exp_minus_i, Cplx, Real};

/// The two branch states and the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketPair<T> {
    pub plus: Vec<Cplx<T>>,
    pub minus: Vec<Cplx<T>>,
    pub step: usize,
}

/// Normalized Gaussian 𝒩 exp(−|r − c|²/(4σ²) + i k₀·(r − c)), with r − c the
/// minimum-image displacement, copied into both branches.
pub fn init_gaussian<T: Real>(grid: &Grid2D<T>, center: [T; 2], k0: [T; 2], sigma: T) -> Result<WavepacketPair<T>> {
    if !(sigma >= T::lit(2.0) * grid.spacing()) {
        return Err(Error::Config(format!(
            "packet width {sigma} nm is under-resolved by grid spacing {} nm",
            grid.spacing()
        )));
    }
    if sigma > grid.length / T::lit(8.0) {
        return Err(Error::Config(format!("packet width {sigma} nm too large for a {} nm box", grid.length)));
    }
    let four_s2 = T::lit(4.0) * sigma * sigma;
    let mut psi = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut norm = T::zero();
    for i in 0..grid.n {
        let dx = grid.wrap_displacement(grid.coord(i), center[0]);
        for j in 0..grid.n {
            let dy = grid.wrap_displacement(grid.coord(j), center[1]);
            let amp = (-(dx * dx + dy * dy) / four_s2).exp();
            let z = cis(k0[0] * dx + k0[1] * dy) * amp;
            norm += z.norm_sqr();
            psi[grid.index(i, j)] = z;
        }
    }
    let s = T::one() / (norm * grid.cell_area()).sqrt();
    psi.iter_mut().for_each(|z| *z = *z * s);
    Ok(WavepacketPair { minus: psi.clone(), plus: psi, step: 0 })
}

/// Time step, step count and the kinetic propagator on the reciprocal grid.
#[derive(Debug, Clone)]
pub struct StepPlan<T> {
    pub dt: T,
    pub n_steps: usize,
    pub feedback: bool,
    /// exp(−i k²/(2m) dt), row-major like the fields.
    pub kinetic: Vec<Cplx<T>>,
}

impl<T: Real> StepPlan<T> {
    pub fn new(grid: &Grid2D<T>, mass: T, dt: T, n_steps: usize, feedback: bool) -> Self {
        let mut kinetic = Vec::with_capacity(grid.len());
        let two_m = T::lit(2.0) * mass;
        for i in 0..grid.n {
            let kx = grid.wavenumber(i);
            for j in 0..grid.n {
                let ky = grid.wavenumber(j);
                kinetic.push(cis(-(kx * kx + ky * ky) / two_m * dt));
            }
        }
        Self { dt, n_steps, feedback, kinetic }
    }
}

/// FFT workspace for the kinetic step.
pub struct Stepper<T: Real> {
    fft: Fft2<T>,
    inv_n2: T,
}

impl<T: Real> Stepper<T> {
    pub fn new(grid: &Grid2D<T>) -> Self {
        Self { fft: Fft2::new(grid.n), inv_n2: T::one() / T::lit(grid.len() as f64) }
    }

    /// ψ ← ℱ⁻¹[e^{−iK dt} ℱψ].
    pub fn kinetic(&mut self, psi: &mut [Cplx<T>], plan: &StepPlan<T>) {
        self.fft.forward(psi);
        for (z, k) in psi.iter_mut().zip(&plan.kinetic) {
            *z = *z * *k * self.inv_n2;
        }
        self.fft.inverse(psi);
    }

    /// One Strang step with potentials `v_plus` (acting on ψ₊) and
    /// `v_minus` (acting on the ket ψ₋), both held fixed over the step.
    pub fn strang_step(&mut self, pair: &mut WavepacketPair<T>, plan: &StepPlan<T>, v_plus: &[Cplx<T>], v_minus: &[Cplx<T>]) {
        let h = plan.dt * T::lit(0.5);
        for (psi, v) in [(&mut pair.plus, v_plus), (&mut pair.minus, v_minus)] {
            potential_kick(psi, v, h);
            self.kinetic(psi, plan);
            potential_kick(psi, v, h);
        }
        pair.step += 1;
    }
}

/// ψ ← e^{−iV h} ψ pointwise.
pub fn potential_kick<T: Real>(psi: &mut [Cplx<T>], v: &[Cplx<T>], h: T) {
    for (z, v) in psi.iter_mut().zip(v) {
        *z = *z * exp_minus_i(*v, h);
    }
}

/// Mode-space source of the mean field: free rotation of fixed initial
/// coordinates or the current Ehrenfest state.
pub enum MeanField<'a, T> {
    Free(&'a CoherentAmplitudes<T>),
    Evolving(&'a CoherentAmplitudes<T>),
}

/// Builds H±(r, t) = Σ_q (X_q(t) − η_q(t) ± ½ν_q(t))·g_q(r) through one
/// inverse FFT per branch.
pub struct PseudopotentialAssembler<T: Real> {
    modes: ModeSet<T>,
    projector: ModeProjector<T>,
}

/// Noise values for one step: either a stored sample or an interpolation
/// between two stored samples.
#[derive(Debug, Clone, Copy)]
pub struct NoiseCursor {
    pub step: usize,
    pub stride: usize,
}

fn noise_at<T: Real>(noise: &NoiseTrajectory<T>, cur: NoiseCursor, mode: usize) -> [Cplx<T>; 4] {
    let j = cur.step / cur.stride;
    let r = cur.step % cur.stride;
    if r == 0 || j + 1 >= noise.n_steps {
        return *noise.at(j.min(noise.n_steps - 1), mode);
    }
    let w = T::lit(r as f64 / cur.stride as f64);
    let a = noise.at(j, mode);
    let b = noise.at(j + 1, mode);
    [0, 1, 2, 3].map(|c| a[c] + (b[c] - a[c]) * w)
}

impl<T: Real> PseudopotentialAssembler<T> {
    pub fn new(modes: &ModeSet<T>, grid: Grid2D<T>) -> Result<Self> {
        Ok(Self { modes: modes.clone(), projector: ModeProjector::new(modes, grid)? })
    }

    pub fn modes(&self) -> &ModeSet<T> {
        &self.modes
    }

    pub fn projector(&mut self) -> &mut ModeProjector<T> {
        &mut self.projector
    }

    fn check_noise(&self, noise: Option<&NoiseTrajectory<T>>) -> Result<()> {
        if let Some(n) = noise {
            if n.n_modes != self.modes.len() {
                return Err(Error::Consistency(format!(
                    "noise carries {} modes, bath has {}",
                    n.n_modes,
                    self.modes.len()
                )));
            }
        }
        Ok(())
    }

    fn mean_field(&self, mf: &MeanField<'_, T>, k: usize, t: T) -> [T; 2] {
        match mf {
            MeanField::Free(a) => a.evolved(&self.modes.modes[k], k, t),
            MeanField::Evolving(a) => a.coords[k],
        }
    }

    /// H^{branch}(r, t) written into `out`; `branch` is +1 or −1.
    pub fn assemble(
        &mut self,
        mf: &MeanField<'_, T>,
        noise: Option<(&NoiseTrajectory<T>, NoiseCursor)>,
        t: T,
        branch: i32,
        out: &mut [Cplx<T>],
    ) -> Result<()> {
        self.check_noise(noise.map(|n| n.0))?;
        let sign = if branch >= 0 { T::lit(0.5) } else { T::lit(-0.5) };
        let zero = Complex::new(T::zero(), T::zero());
        let xs: Vec<[T; 2]> = (0..self.modes.len()).map(|k| self.mean_field(mf, k, t)).collect();
        self.projector.synthesize(
            |k| {
                let x = xs[k];
                let z = noise.map(|(n, c)| noise_at(n, c, k)).unwrap_or([zero; 4]);
                [
                    Complex::new(x[0], T::zero()) - z[0] + z[2] * sign,
                    Complex::new(x[1], T::zero()) - z[1] + z[3] * sign,
                ]
            },
            out,
        );
        Ok(())
    }

    /// Potentials for one step: H⁺ for ψ₊ and (H⁻)* for the ket ψ₋.
    pub fn assemble_pair(
        &mut self,
        mf: &MeanField<'_, T>,
        noise: Option<(&NoiseTrajectory<T>, NoiseCursor)>,
        t: T,
        v_plus: &mut [Cplx<T>],
        v_minus: &mut [Cplx<T>],
    ) -> Result<()> {
        match noise {
            None => {
                self.assemble(mf, None, t, 1, v_plus)?;
                v_minus.copy_from_slice(v_plus);
            }
            Some(n) => {
                self.assemble(mf, Some(n), t, 1, v_plus)?;
                self.assemble(mf, Some(n), t, -1, v_minus)?;
                v_minus.iter_mut().for_each(|z| *z = z.conj());
            }
        }
        Ok(())
    }
}
