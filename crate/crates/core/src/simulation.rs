//! Single-trajectory and ensemble drivers.

use num_complex::Complex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{ehrenfest_step, enumerate_modes, sample_thermal, CoherentAmplitudes, ModeSet, SamplingScheme};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::material::{derive_parameters, rms_deformation, DerivedParams, MaterialParams};
use crate::noise::{NoiseBank, NoiseTrajectory};
use crate::observables::{ObservableSeries, Observer};
use crate::propagator::{init_gaussian, MeanField, NoiseCursor, PseudopotentialAssembler, StepPlan, Stepper, WavepacketPair};
use crate::scalar::{exp_minus_i, Cplx, Real};
use crate::units::UnitSystem;

/// Physical and numerical parameters of one simulated setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub material: MaterialParams,
    pub grid_n: usize,
    /// Box side, nm.
    pub box_length: f64,
    /// Mode cutoff as a fraction of q_D.
    pub q_cut_fraction: f64,
    pub temperature: f64,
    pub scheme: SamplingScheme,
    pub feedback: bool,
    pub noise_enabled: bool,
    pub dt_fs: f64,
    pub n_steps: usize,
    pub record_stride: usize,
    /// Noise is synthesized every `noise_stride` steps and interpolated
    /// linearly in between.
    pub noise_stride: usize,
    /// Packet width, nm; `None` means 0.02·L.
    pub sigma: Option<f64>,
    /// Initial wave vector, nm⁻¹; `None` means (k_F, 0).
    pub k0: Option<[f64; 2]>,
    /// |⟨ψ₋|ψ₊⟩| above this marks a trajectory divergent.
    pub blowup_bound: f64,
    /// Prefactor of the time-step bound.
    pub dt_safety: f64,
}

impl SimConfig {
    pub fn new(material: MaterialParams) -> Self {
        Self {
            material,
            grid_n: 256,
            box_length: 20.0,
            q_cut_fraction: 1.0,
            temperature: 300.0,
            scheme: SamplingScheme::RandomPhase,
            feedback: false,
            noise_enabled: true,
            dt_fs: 0.01,
            n_steps: 1000,
            record_stride: 10,
            noise_stride: 1,
            sigma: None,
            k0: None,
            blowup_bound: 1e3,
            dt_safety: 0.1,
        }
    }

    pub fn derived(&self) -> Result<DerivedParams> {
        derive_parameters(&self.material)
    }

    pub fn q_cut(&self) -> Result<f64> {
        Ok(self.q_cut_fraction * self.derived()?.q_d)
    }

    pub fn sigma_nm(&self) -> f64 {
        self.sigma.unwrap_or(0.02 * self.box_length)
    }

    pub fn k0_vec(&self) -> Result<[f64; 2]> {
        Ok(self.k0.unwrap_or([self.derived()?.k_f, 0.0]))
    }

    pub fn dt(&self) -> f64 {
        UnitSystem::time_from_fs(self.dt_fs)
    }

    pub fn duration_fs(&self) -> f64 {
        self.dt_fs * self.n_steps as f64
    }

    /// Largest admissible step in fs: dt_safety·min(1/V_scale, 2m/k²) with
    /// V_scale = ΔV_def + 3·(noise field scale) and k = |k₀| + q_cut, the
    /// largest momentum the packet reaches by single scattering.
    pub fn dt_bound_fs(&self, modes: &ModeSet<f64>) -> Result<f64> {
        let k0 = self.k0_vec()?;
        let k = k0[0].hypot(k0[1]) + self.q_cut()?;
        let m = self.material.mass();
        let noise_rms = if self.noise_enabled { modes.modes.iter().map(|m| m.g_amp * m.g_amp).sum::<f64>().sqrt() } else { 0.0 };
        let v_scale = rms_deformation(&self.material, self.temperature)? + 3.0 * noise_rms;
        let kin = 2.0 * m / (k * k).max(f64::MIN_POSITIVE);
        let pot = if v_scale > 0.0 { 1.0 / v_scale } else { f64::INFINITY };
        Ok(UnitSystem::time_to_fs(self.dt_safety * kin.min(pot)))
    }

    /// Checks every invariant that can be checked before running.
    pub fn validate(&self) -> Result<ModeSet<f64>> {
        self.material.validate()?;
        if !(self.temperature >= 0.0) {
            return Err(Error::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if !(self.q_cut_fraction > 0.0 && self.q_cut_fraction <= 1.0) {
            return Err(Error::Config(format!("q_cut_fraction must lie in (0, 1], got {}", self.q_cut_fraction)));
        }
        if self.n_steps == 0 || self.record_stride == 0 || self.noise_stride == 0 {
            return Err(Error::Config("n_steps, record_stride and noise_stride must be positive".into()));
        }
        if !(self.dt_fs > 0.0) {
            return Err(Error::Config("dt_fs must be positive".into()));
        }
        let grid = Grid2D::new(self.grid_n, self.box_length)?;
        let sigma = self.sigma_nm();
        if !(sigma >= 2.0 * grid.spacing() && sigma <= self.box_length / 8.0) {
            return Err(Error::Config(format!(
                "packet width {sigma} nm must lie in [2dx, L/8] = [{:.3}, {:.3}] nm",
                2.0 * grid.spacing(),
                self.box_length / 8.0
            )));
        }
        let d = self.derived()?;
        let q_cut = self.q_cut()?;
        if !(grid.k_max() > d.k_f + q_cut) {
            return Err(Error::Config(format!(
                "grid resolves |k| <= {:.3} nm^-1 but k_F + q_cut = {:.3} nm^-1; raise N or shrink L",
                grid.k_max(),
                d.k_f + q_cut
            )));
        }
        let modes = enumerate_modes(&self.material, self.box_length, q_cut)?;
        let bound = self.dt_bound_fs(&modes)?;
        if self.dt_fs > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!("dt = {} fs exceeds the stability bound {:.5} fs", self.dt_fs, bound)));
        }
        Ok(modes)
    }
}

/// Seed of realization `index` under `master`.
pub fn realization_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// One realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub series: ObservableSeries,
    pub divergent: bool,
}

/// Ensemble average plus the per-realization runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub mean: ObservableSeries,
    pub seeds: Vec<u64>,
    pub trajectories: Vec<Trajectory>,
}

/// Precomputed bath, grid and noise filters shared by all realizations.
pub struct Simulation<T: Real> {
    pub config: SimConfig,
    pub modes: ModeSet<T>,
    pub grid: Grid2D<T>,
    bank: Option<NoiseBank>,
}

impl<T: Real> Simulation<T> {
    pub fn new(config: SimConfig) -> Result<Self> {
        let modes64 = config.validate()?;
        Self::build(config, modes64)
    }

    /// Skips the time-step bound; for convergence studies that need
    /// deliberately coarse steps.
    pub fn new_unchecked(config: SimConfig) -> Result<Self> {
        let modes64 = enumerate_modes(&config.material, config.box_length, config.q_cut()?)?;
        Self::build(config, modes64)
    }

    fn build(config: SimConfig, modes64: ModeSet<f64>) -> Result<Self> {
        let modes: ModeSet<T> = enumerate_modes(&config.material, config.box_length, config.q_cut()?)?;
        debug_assert_eq!(modes.len(), modes64.len());
        let grid = Grid2D::new(config.grid_n, T::lit(config.box_length))?;
        let bank = if config.noise_enabled {
            let n_noise = config.n_steps / config.noise_stride + 2;
            Some(NoiseBank::new(&modes, config.dt() * config.noise_stride as f64, n_noise)?)
        } else {
            None
        };
        Ok(Self { config, modes, grid, bank })
    }

    pub fn initial_pair(&self) -> Result<WavepacketPair<T>> {
        let l = self.grid.length;
        let half = T::lit(0.5);
        let k0 = self.config.k0_vec()?;
        init_gaussian(&self.grid, [l * half, l * half], [T::lit(k0[0]), T::lit(k0[1])], T::lit(self.config.sigma_nm()))
    }

    pub fn noise(&self, seed: u64) -> Option<NoiseTrajectory<T>> {
        self.bank.as_ref().map(|b| b.generate(seed))
    }

    pub fn thermal_amplitudes(&self, seed: u64) -> CoherentAmplitudes<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        sample_thermal(&self.modes, self.config.temperature, self.config.scheme, &mut rng)
    }

    /// Samples amplitudes and noise for `seed`, then propagates.
    pub fn run_trajectory(&self, seed: u64) -> Result<Trajectory> {
        let amps = self.thermal_amplitudes(seed);
        let noise = self.noise(seed);
        self.propagate(seed, amps, noise.as_ref())
    }

    /// Propagates from given amplitudes and noise.
    pub fn propagate(&self, seed: u64, amps: CoherentAmplitudes<T>, noise: Option<&NoiseTrajectory<T>>) -> Result<Trajectory> {
        if self.config.feedback {
            self.propagate_feedback(seed, amps, noise)
        } else {
            self.propagate_fixed(seed, &amps, noise)
        }
    }

    fn origin(&self, t: T) -> [T; 2] {
        let k0 = self.config.k0_vec().unwrap_or([0.0, 0.0]);
        let v = T::lit(1.0 / self.config.material.mass());
        let c = self.grid.length * T::lit(0.5);
        [c + T::lit(k0[0]) * v * t, c + T::lit(k0[1]) * v * t]
    }

    fn record(&self, obs: &mut Observer<T>, series: &mut ObservableSeries, pair: &WavepacketPair<T>, t: T) -> bool {
        let s = obs.snapshot(&pair.minus, &pair.plus, self.origin(t));
        series.push(t.as_f64(), s);
        let m = s.overlap.norm();
        !(m.is_finite() && m <= self.config.blowup_bound)
    }

    fn finish(&self, seed: u64, mut series: ObservableSeries, divergent: bool) -> Trajectory {
        series.n_realizations = 1;
        series.n_divergent = usize::from(divergent);
        Trajectory { seed, series, divergent }
    }

    fn propagate_fixed(&self, seed: u64, amps: &CoherentAmplitudes<T>, noise: Option<&NoiseTrajectory<T>>) -> Result<Trajectory> {
        let cfg = &self.config;
        let dt = T::lit(cfg.dt());
        let plan = StepPlan::new(&self.grid, T::lit(cfg.material.mass()), dt, cfg.n_steps, false);
        let mut stepper = Stepper::new(&self.grid);
        let mut asm = PseudopotentialAssembler::new(&self.modes, self.grid)?;
        let mut obs = Observer::new(self.grid);
        let mut pair = self.initial_pair()?;
        let mut series = ObservableSeries::default();
        let identical = noise.is_none();
        let zero = Complex::new(T::zero(), T::zero());
        let len = self.grid.len();
        let (mut vp, mut vm) = (vec![zero; len], vec![zero; len]);
        let (mut np, mut nm) = (vec![zero; len], vec![zero; len]);
        let mf = MeanField::Free(amps);
        let cursor = |step: usize| noise.map(|n| (n, NoiseCursor { step, stride: cfg.noise_stride }));
        let time = |step: usize| dt * T::lit(step as f64);
        let h = dt * T::lit(0.5);

        asm.assemble_pair(&mf, cursor(0), T::zero(), &mut vp, &mut vm)?;
        if self.record(&mut obs, &mut series, &pair, T::zero()) {
            return Ok(self.finish(seed, series, true));
        }
        // The state is carried half-kicked: after the kinetic step it still
        // owes e^{−iV_j dt/2}, which merges with the next step's leading
        // half-kick unless the state must be observed.
        kick(&mut pair.plus, &vp, h);
        if !identical {
            kick(&mut pair.minus, &vm, h);
        }
        for j in 0..cfg.n_steps {
            stepper.kinetic(&mut pair.plus, &plan);
            if !identical {
                stepper.kinetic(&mut pair.minus, &plan);
            }
            let next = j + 1;
            let observe = next % cfg.record_stride == 0 || next == cfg.n_steps;
            let last = next == cfg.n_steps;
            if !last {
                asm.assemble_pair(&mf, cursor(next), time(next), &mut np, &mut nm)?;
            }
            if observe || last {
                kick(&mut pair.plus, &vp, h);
                if !identical {
                    kick(&mut pair.minus, &vm, h);
                } else {
                    pair.minus.copy_from_slice(&pair.plus);
                }
                pair.step = next;
                if self.record(&mut obs, &mut series, &pair, time(next)) {
                    return Ok(self.finish(seed, series, true));
                }
                if !last {
                    kick(&mut pair.plus, &np, h);
                    if !identical {
                        kick(&mut pair.minus, &nm, h);
                    }
                }
            } else {
                kick_merged(&mut pair.plus, &vp, &np, h);
                if !identical {
                    kick_merged(&mut pair.minus, &vm, &nm, h);
                }
            }
            std::mem::swap(&mut vp, &mut np);
            std::mem::swap(&mut vm, &mut nm);
        }
        Ok(self.finish(seed, series, false))
    }

    fn propagate_feedback(&self, seed: u64, mut amps: CoherentAmplitudes<T>, noise: Option<&NoiseTrajectory<T>>) -> Result<Trajectory> {
        let cfg = &self.config;
        let dt = T::lit(cfg.dt());
        let plan = StepPlan::new(&self.grid, T::lit(cfg.material.mass()), dt, cfg.n_steps, true);
        let mut stepper = Stepper::new(&self.grid);
        let mut asm = PseudopotentialAssembler::new(&self.modes, self.grid)?;
        let mut obs = Observer::new(self.grid);
        let mut pair = self.initial_pair()?;
        let mut series = ObservableSeries::default();
        let zero = Complex::new(T::zero(), T::zero());
        let len = self.grid.len();
        let (mut vp, mut vm) = (vec![zero; len], vec![zero; len]);
        amps.time = T::zero();
        let to64 = |z: Cplx<T>| Complex::new(z.re.as_f64(), z.im.as_f64());
        for j in 0..=cfg.n_steps {
            let t = dt * T::lit(j as f64);
            let g = asm.projector().expectations(&pair.minus, &pair.plus);
            if j % cfg.record_stride == 0 || j == cfg.n_steps {
                if self.record(&mut obs, &mut series, &pair, t) {
                    return Ok(self.finish(seed, series, true));
                }
                series.g_expect.push(g.iter().map(|v| [to64(v[0]), to64(v[1])]).collect());
            }
            if j == cfg.n_steps {
                break;
            }
            let cursor = noise.map(|n| (n, NoiseCursor { step: j, stride: cfg.noise_stride }));
            asm.assemble_pair(&MeanField::Evolving(&amps), cursor, t, &mut vp, &mut vm)?;
            stepper.strang_step(&mut pair, &plan, &vp, &vm);
            // the bath coordinates are real: drive them with Re⟨g_q⟩
            let drive: Vec<[T; 2]> = g.iter().map(|v| [v[0].re, v[1].re]).collect();
            amps = ehrenfest_step(&self.modes, &amps, &drive, dt)?;
        }
        Ok(self.finish(seed, series, false))
    }

    /// Runs `n` realizations seeded from `master_seed` and averages them in
    /// seed order; divergent realizations are excluded and counted.
    pub fn run_ensemble(&self, master_seed: u64, n: usize) -> Result<EnsembleResult> {
        if n == 0 {
            return Err(Error::Config("ensemble needs at least one realization".into()));
        }
        let seeds: Vec<u64> = (0..n).map(|i| realization_seed(master_seed, i)).collect();
        let trajectories = seeds.par_iter().map(|&s| self.run_trajectory(s)).collect::<Result<Vec<_>>>()?;
        let mean = average(&trajectories)?;
        Ok(EnsembleResult { mean, seeds, trajectories })
    }
}

fn kick<T: Real>(psi: &mut [Cplx<T>], v: &[Cplx<T>], h: T) {
    for (z, v) in psi.iter_mut().zip(v) {
        *z = *z * exp_minus_i(*v, h);
    }
}

fn kick_merged<T: Real>(psi: &mut [Cplx<T>], a: &[Cplx<T>], b: &[Cplx<T>], h: T) {
    for ((z, a), b) in psi.iter_mut().zip(a).zip(b) {
        *z = *z * exp_minus_i(*a + *b, h);
    }
}

/// Average over non-divergent trajectories, in the given order.
pub fn average(trajectories: &[Trajectory]) -> Result<ObservableSeries> {
    let good: Vec<&ObservableSeries> = trajectories.iter().filter(|t| !t.divergent).map(|t| &t.series).collect();
    let n_div = trajectories.len() - good.len();
    if good.is_empty() {
        return Err(Error::EnsembleDiverged(n_div));
    }
    if n_div > 0 {
        log::warn!("{n_div} of {} trajectories diverged and were excluded", trajectories.len());
    }
    let len = good[0].len();
    let nf = good.len() as f64;
    let zero = Complex::new(0.0, 0.0);
    let mut mean = ObservableSeries {
        times: good[0].times.clone(),
        px: vec![zero; len],
        x: vec![zero; len],
        y: vec![zero; len],
        r2: vec![zero; len],
        overlap: vec![zero; len],
        stderr_px: vec![0.0; len],
        g_expect: Vec::new(),
        n_realizations: trajectories.len(),
        n_divergent: n_div,
    };
    let mut sq = vec![0.0; len];
    for s in &good {
        for i in 0..len {
            mean.px[i] += s.px[i];
            mean.x[i] += s.x[i];
            mean.y[i] += s.y[i];
            mean.r2[i] += s.r2[i];
            mean.overlap[i] += s.overlap[i];
            sq[i] += s.px[i].re * s.px[i].re;
        }
    }
    for i in 0..len {
        mean.px[i] /= nf;
        mean.x[i] /= nf;
        mean.y[i] /= nf;
        mean.r2[i] /= nf;
        mean.overlap[i] /= nf;
        if good.len() > 1 {
            let var = (sq[i] / nf - mean.px[i].re.powi(2)).max(0.0) * nf / (nf - 1.0);
            mean.stderr_px[i] = (var / nf).sqrt();
        }
    }
    if good.iter().all(|s| !s.g_expect.is_empty()) {
        let recs = good[0].g_expect.len();
        mean.g_expect = (0..recs)
            .map(|r| {
                let modes = good[0].g_expect[r].len();
                (0..modes)
                    .map(|k| {
                        let mut acc = [zero; 2];
                        for s in &good {
                            acc[0] += s.g_expect[r][k][0];
                            acc[1] += s.g_expect[r][k][1];
                        }
                        [acc[0] / nf, acc[1] / nf]
                    })
                    .collect()
            })
            .collect();
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(material: MaterialParams) -> SimConfig {
        let mut c = SimConfig::new(material);
        c.grid_n = 32;
        c.box_length = 6.0;
        c.q_cut_fraction = 0.5;
        c.temperature = 353.0;
        c.dt_fs = 0.01;
        c.n_steps = 40;
        c.record_stride = 5;
        c.sigma = Some(0.6);
        c.dt_safety = 10.0;
        c
    }

    #[test]
    fn anti_aliasing_enforced() {
        let mut c = small(MaterialParams::copper());
        c.grid_n = 16;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn dt_bound_enforced() {
        let mut c = small(MaterialParams::copper());
        c.dt_safety = 0.1;
        c.dt_fs = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_coupling_conserves_momentum() {
        let mut mat = MaterialParams::copper();
        mat.e_d = 0.0;
        let sim: Simulation<f64> = Simulation::new(small(mat)).unwrap();
        let tr = sim.run_trajectory(1).unwrap();
        let p0 = tr.series.px[0].re;
        assert!(tr.series.px.iter().all(|p| (p.re - p0).abs() < 1e-10 && p.im.abs() < 1e-10));
    }

    #[test]
    fn trajectory_is_deterministic() {
        let sim: Simulation<f64> = Simulation::new(small(MaterialParams::copper())).unwrap();
        assert_eq!(sim.run_trajectory(5).unwrap(), sim.run_trajectory(5).unwrap());
        assert_ne!(sim.run_trajectory(5).unwrap().series, sim.run_trajectory(6).unwrap().series);
    }

    #[test]
    fn single_realization_ensemble_equals_trajectory() {
        let sim: Simulation<f64> = Simulation::new(small(MaterialParams::copper())).unwrap();
        let e = sim.run_ensemble(9, 1).unwrap();
        let t = sim.run_trajectory(e.seeds[0]).unwrap();
        assert_eq!(e.mean.px, t.series.px);
        assert_eq!(e.mean.overlap, t.series.overlap);
    }

    #[test]
    fn merged_kicks_match_plain_strang_steps() {
        let sim: Simulation<f64> = Simulation::new(small(MaterialParams::copper())).unwrap();
        let seed = 3;
        let amps = sim.thermal_amplitudes(seed);
        let noise = sim.noise(seed).unwrap();
        let fast = sim.propagate(seed, amps.clone(), Some(&noise)).unwrap();
        // reference: plain Strang steps with per-step potentials
        let cfg = &sim.config;
        let dt = cfg.dt();
        let plan = StepPlan::new(&sim.grid, cfg.material.mass(), dt, cfg.n_steps, false);
        let mut st = Stepper::new(&sim.grid);
        let mut asm = PseudopotentialAssembler::new(&sim.modes, sim.grid).unwrap();
        let mut pair = sim.initial_pair().unwrap();
        let z = Complex::new(0.0, 0.0);
        let (mut vp, mut vm) = (vec![z; sim.grid.len()], vec![z; sim.grid.len()]);
        for j in 0..cfg.n_steps {
            let cur = Some((&noise, NoiseCursor { step: j, stride: 1 }));
            asm.assemble_pair(&MeanField::Free(&amps), cur, dt * j as f64, &mut vp, &mut vm).unwrap();
            st.strang_step(&mut pair, &plan, &vp, &vm);
        }
        let mut obs = Observer::new(sim.grid);
        let s = obs.snapshot(&pair.minus, &pair.plus, sim.origin(dt * cfg.n_steps as f64));
        let last = fast.series.len() - 1;
        assert!((s.px - fast.series.px[last]).norm() < 1e-10);
        assert!((s.overlap - fast.series.overlap[last]).norm() < 1e-10);
    }

    #[test]
    fn mean_field_branches_identical_and_hermitian() {
        let mut c = small(MaterialParams::copper());
        c.noise_enabled = false;
        let sim: Simulation<f64> = Simulation::new(c.clone()).unwrap();
        let tr = sim.run_trajectory(2).unwrap();
        for (o, p) in tr.series.overlap.iter().zip(&tr.series.px) {
            assert!((o.re - 1.0).abs() < 1e-10 && o.im.abs() < 1e-12);
            assert!(p.im.abs() < 1e-10);
        }
        // the feedback path propagates both branches explicitly
        c.feedback = true;
        let sim: Simulation<f64> = Simulation::new(c).unwrap();
        let tr = sim.run_trajectory(2).unwrap();
        assert!(tr.series.overlap.iter().all(|o| (o - 1.0).norm() < 1e-10));
        assert!(!tr.series.g_expect.is_empty());
    }

    #[test]
    fn feedback_without_coupling_matches_fixed() {
        let mut mat = MaterialParams::copper();
        mat.e_d = 0.0;
        let mut c = small(mat);
        let a = Simulation::<f64>::new(c.clone()).unwrap().run_trajectory(4).unwrap();
        c.feedback = true;
        let b = Simulation::<f64>::new(c).unwrap().run_trajectory(4).unwrap();
        for (x, y) in a.series.r2.iter().zip(&b.series.r2) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn divergence_is_flagged() {
        let mut c = small(MaterialParams::copper());
        c.blowup_bound = 0.5;
        let sim: Simulation<f64> = Simulation::new(c).unwrap();
        let tr = sim.run_trajectory(1).unwrap();
        assert!(tr.divergent);
        assert!(matches!(sim.run_ensemble(1, 2), Err(Error::EnsembleDiverged(2))));
    }

    #[test]
    fn seeds_are_distinct() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| realization_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
