//! Experiment families behind the command-line driver. Each returns a typed
//! table that renders to CSV with the config hash in its first line; running
//! the same config twice gives byte-identical tables.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bath::{deformation_potential, enumerate_modes, sample_thermal};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::material::{bose, derive_parameters, disorder_scaling_exponent, rms_deformation, MaterialParams};
use crate::noise::{single_mode_ensemble, validate_statistics, Kernel, StatsReport, ALL_ENTRIES};
use crate::observables::{fit_relaxation, spread_xi, ObservableSeries, RelaxationFit};
use crate::perturbation::{rate_sweep, rates, RateSweep};
use crate::simulation::{realization_seed, Simulation};
use crate::units::UnitSystem;

/// Stochastic and mean-field ensembles for one (material, T) point.
pub struct PairedRun {
    pub stochastic: ObservableSeries,
    pub mean_field: ObservableSeries,
    pub seeds: Vec<u64>,
}

/// Runs the configured ensemble twice: once as configured, once with the noise
/// switched off. Both share the master seed, so the thermal draws coincide.
pub fn paired_ensembles(cfg: &RunConfig, mat: &MaterialParams, t_kelvin: f64) -> Result<PairedRun> {
    let st_cfg = cfg.sim_config(mat, t_kelvin);
    let mut mf_cfg = st_cfg.clone();
    mf_cfg.noise_enabled = false;
    let n = cfg.ensemble.n_realizations;
    let seed = cfg.ensemble.master_seed;
    let st = Simulation::<f64>::new(st_cfg)?.run_ensemble(seed, n)?;
    let mf = Simulation::<f64>::new(mf_cfg)?.run_ensemble(seed, n)?;
    Ok(PairedRun { stochastic: st.mean, mean_field: mf.mean, seeds: st.seeds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxRow {
    pub t_k: f64,
    pub t_over_td: f64,
    pub inv_tau_st: f64,
    pub inv_tau_mf: f64,
    pub fit_st: RelaxationFit,
    pub fit_mf: RelaxationFit,
    pub inv_tau_pt_full: f64,
    pub inv_tau_pt_mf: f64,
    /// τ_st/τ_mf from the simulations.
    pub ratio_sim: f64,
    /// τ_full/τ_mf from perturbation theory.
    pub ratio_pt: f64,
    pub divergent_st: usize,
    pub divergent_mf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxSweep {
    pub material: String,
    pub config_hash: String,
    pub rows: Vec<RelaxRow>,
    pub seeds: Vec<u64>,
    /// Set when a temperature failed; rows hold every point finished before it.
    pub failure: Option<String>,
}

impl RelaxSweep {
    pub fn n_divergent(&self) -> usize {
        self.rows.iter().map(|r| r.divergent_st + r.divergent_mf).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# config_hash={}\n# material={}\n", self.config_hash, self.material);
        if let Some(f) = &self.failure {
            s.push_str(&format!("# INCOMPLETE: {f}\n"));
        }
        s.push_str("T_K,T_over_TD,inv_tau_st_per_fs,inv_tau_mf_per_fs,inv_tau_pt_full_per_fs,inv_tau_pt_mf_per_fs,R_sim,R_pt,fit_st_ok,fit_mf_ok,divergent_st,divergent_mf\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.6},{:.6},{:.8e},{:.8e},{:.8e},{:.8e},{:.6e},{:.6e},{},{},{},{}\n",
                r.t_k,
                r.t_over_td,
                r.inv_tau_st,
                r.inv_tau_mf,
                r.inv_tau_pt_full,
                r.inv_tau_pt_mf,
                r.ratio_sim,
                r.ratio_pt,
                r.fit_st.is_ok(),
                r.fit_mf.is_ok(),
                r.divergent_st,
                r.divergent_mf
            ));
        }
        s
    }
}

/// Fitted relaxation rates of both ensembles next to the perturbative rates,
/// one row per configured temperature of the configured material.
pub fn relax_sweep(cfg: &RunConfig) -> Result<RelaxSweep> {
    let mat = cfg.material.resolve()?;
    cfg.validate_runs(std::slice::from_ref(&mat))?;
    let t_d = derive_parameters(&mat)?.t_d;
    let window = cfg.analysis.fit_window_fs.map(|[a, b]| (a, b));
    let mut out = RelaxSweep {
        material: mat.name.clone(),
        config_hash: cfg.hash(),
        rows: Vec::new(),
        seeds: Vec::new(),
        failure: None,
    };
    for t in cfg.temperatures(&mat)? {
        log::info!("relax-sweep {} T = {t:.2} K", mat.name);
        let point = || -> Result<(RelaxRow, Vec<u64>)> {
            let run = paired_ensembles(cfg, &mat, t)?;
            let fit_st = fit_relaxation(&run.stochastic, window);
            let fit_mf = fit_relaxation(&run.mean_field, window);
            let (pt_full, pt_mf) = if t > 0.0 && mat.e_d > 0.0 {
                let (f, m) = rates(&mat, t)?;
                (f.inv_tau_per_fs, m.inv_tau_per_fs)
            } else {
                (0.0, 0.0)
            };
            let row = RelaxRow {
                t_k: t,
                t_over_td: t / t_d,
                inv_tau_st: fit_st.rate_per_fs(),
                inv_tau_mf: fit_mf.rate_per_fs(),
                ratio_sim: fit_mf.rate_per_fs() / fit_st.rate_per_fs(),
                ratio_pt: pt_mf / pt_full,
                fit_st,
                fit_mf,
                inv_tau_pt_full: pt_full,
                inv_tau_pt_mf: pt_mf,
                divergent_st: run.stochastic.n_divergent,
                divergent_mf: run.mean_field.n_divergent,
            };
            Ok((row, run.seeds))
        };
        match point() {
            Ok((row, seeds)) => {
                if out.seeds.is_empty() {
                    out.seeds = seeds;
                }
                out.rows.push(row);
            }
            Err(e) => {
                out.failure = Some(format!("T = {t} K: {e}"));
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub material: String,
    pub t_d_k: f64,
    pub t_k: f64,
    pub t_over_td: f64,
    pub xi_st_nm: f64,
    pub xi_mf_nm: f64,
    pub clamped_st: usize,
    pub clamped_mf: usize,
    pub divergent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSweep {
    pub config_hash: String,
    pub window_fs: f64,
    pub rows: Vec<SpreadRow>,
    pub seeds: Vec<u64>,
    pub failure: Option<String>,
}

impl SpreadSweep {
    pub fn n_divergent(&self) -> usize {
        self.rows.iter().map(|r| r.divergent).sum()
    }

    /// Per material: does ξ_st fall with T over the rows at or above T_D?
    /// A qualitative flag only.
    pub fn high_t_trend(&self) -> Vec<(String, bool)> {
        let mut names: Vec<String> = self.rows.iter().map(|r| r.material.clone()).collect();
        names.dedup();
        names
            .into_iter()
            .map(|n| {
                let mut hot: Vec<&SpreadRow> = self.rows.iter().filter(|r| r.material == n && r.t_over_td >= 1.0 - 1e-12).collect();
                hot.sort_by(|a, b| a.t_k.partial_cmp(&b.t_k).expect("finite"));
                let dec = hot.windows(2).all(|w| w[1].xi_st_nm <= w[0].xi_st_nm);
                (n, dec)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# config_hash={}\n# window_fs={}\n", self.config_hash, self.window_fs);
        if let Some(f) = &self.failure {
            s.push_str(&format!("# INCOMPLETE: {f}\n"));
        }
        s.push_str("material,T_D_K,T_K,T_over_TD,xi_st_nm,xi_mf_nm,clamped_st,clamped_mf,divergent\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.8e},{:.8e},{},{},{}\n",
                r.material, r.t_d_k, r.t_k, r.t_over_td, r.xi_st_nm, r.xi_mf_nm, r.clamped_st, r.clamped_mf, r.divergent
            ));
        }
        s
    }
}

/// ξ of the stochastic and mean-field ensembles for every configured
/// spread material and temperature.
pub fn spread_sweep(cfg: &RunConfig) -> Result<SpreadSweep> {
    let mats = cfg.spread_materials()?;
    cfg.validate_spread_window()?;
    cfg.validate_runs(&mats)?;
    let window = cfg.analysis.spread_window_fs.unwrap_or(cfg.time.dt_fs * cfg.time.n_steps as f64);
    let mut out = SpreadSweep { config_hash: cfg.hash(), window_fs: window, rows: Vec::new(), seeds: Vec::new(), failure: None };
    'outer: for mat in &mats {
        let t_d = derive_parameters(mat)?.t_d;
        for t in cfg.temperatures(mat)? {
            log::info!("spread-sweep {} T = {t:.2} K", mat.name);
            let point = || -> Result<(SpreadRow, Vec<u64>)> {
                let run = paired_ensembles(cfg, mat, t)?;
                let st = spread_xi(&run.stochastic, window)?;
                let mf = spread_xi(&run.mean_field, window)?;
                Ok((
                    SpreadRow {
                        material: mat.name.clone(),
                        t_d_k: t_d,
                        t_k: t,
                        t_over_td: t / t_d,
                        xi_st_nm: st.xi_nm,
                        xi_mf_nm: mf.xi_nm,
                        clamped_st: st.clamped,
                        clamped_mf: mf.clamped,
                        divergent: run.stochastic.n_divergent + run.mean_field.n_divergent,
                    },
                    run.seeds,
                ))
            };
            match point() {
                Ok((row, seeds)) => {
                    if out.seeds.is_empty() {
                        out.seeds = seeds;
                    }
                    out.rows.push(row);
                }
                Err(e) => {
                    out.failure = Some(format!("{} at T = {t} K: {e}", mat.name));
                    break 'outer;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseValidation {
    pub config_hash: String,
    pub omega: f64,
    pub dt_fs: f64,
    pub kernel: Kernel,
    pub report: StatsReport,
    pub sigmas: f64,
}

impl NoiseValidation {
    pub fn passes(&self) -> bool {
        self.report.passes(self.sigmas)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# config_hash={}\n# omega_eV={:.10e} dt_fs={} kernel={:?} realizations={} max_sigmas={:.4} threshold={} pass={}\n",
            self.config_hash,
            self.omega,
            self.dt_fs,
            self.kernel,
            self.report.n_realizations,
            self.report.max_sigmas,
            self.sigmas,
            self.passes()
        );
        s.push_str("lag,max_abs_deviation,max_sigmas,worst_a,worst_b\n");
        for r in &self.report.rows {
            s.push_str(&format!("{},{:.6e},{:.4},{},{}\n", r.lag, r.max_abs_deviation, r.max_sigmas, r.worst_entry.0, r.worst_entry.1));
        }
        s
    }
}

/// Single-mode covariance check of the noise generator. `corrupt` swaps in a
/// kernel at twice the mode frequency, which must fail.
pub fn noise_validate(cfg: &RunConfig, corrupt: bool) -> Result<NoiseValidation> {
    let a = &cfg.analysis;
    if !(a.noise_dt_fs > 0.0) || a.noise_steps == 0 {
        return Err(Error::Config("noise check needs dt > 0 and at least one step".into()));
    }
    let omega = UnitSystem::thermal_energy(a.noise_mode_temperature_k);
    let kernel = if corrupt { Kernel::Corrupted } else { Kernel::Physical };
    let seeds = (0..a.noise_realizations).map(|i| realization_seed(cfg.ensemble.master_seed, i));
    let dt = UnitSystem::time_from_fs(a.noise_dt_fs);
    let trajs = single_mode_ensemble(omega, dt, a.noise_steps, seeds, kernel)?;
    let report = validate_statistics(&trajs, 0, omega, a.noise_max_lag, &ALL_ENTRIES)?;
    Ok(NoiseValidation { config_hash: cfg.hash(), omega, dt_fs: a.noise_dt_fs, kernel, report, sigmas: a.noise_sigmas })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtBenchmark {
    pub config_hash: String,
    pub material: String,
    pub sweep: RateSweep,
}

impl PtBenchmark {
    pub fn to_csv(&self) -> String {
        let body = self.sweep.to_csv(&self.config_hash);
        let (first, rest) = body.split_once('\n').expect("header line");
        format!("{first}\n# material={}\n{rest}", self.material)
    }
}

pub fn pt_benchmark(cfg: &RunConfig) -> Result<PtBenchmark> {
    let mat = cfg.material.resolve()?;
    let temps = cfg.temperatures(&mat)?;
    let sweep = rate_sweep(&mat, &temps)?;
    Ok(PtBenchmark { config_hash: cfg.hash(), material: mat.name.clone(), sweep })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefpotRow {
    pub t_k: f64,
    pub n_modes: usize,
    pub draws: usize,
    /// RMS of the sampled field over grid points and draws, eV.
    pub rms_grid: f64,
    /// √(Σ G_q² n̄_q): the ensemble RMS of the discrete mode sum, eV.
    pub rms_mode_sum: f64,
    /// ΔV_def from the disorder integral, eV.
    pub dv_quadrature: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefpotStats {
    pub config_hash: String,
    pub material: String,
    pub rows: Vec<DefpotRow>,
    /// Fitted p in ΔV_def² ∝ T^p well below T_D.
    pub low_t_exponent: f64,
    pub exponent_range_k: (f64, f64),
}

impl DefpotStats {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# config_hash={}\n# material={}\n# low_T_exponent={:.6} over [{:.4}, {:.4}] K\n",
            self.config_hash, self.material, self.low_t_exponent, self.exponent_range_k.0, self.exponent_range_k.1
        );
        s.push_str("T_K,n_modes,draws,rms_grid_eV,rms_mode_sum_eV,dv_quadrature_eV,ratio_grid_over_quadrature\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.6},{},{},{:.8e},{:.8e},{:.8e},{:.6}\n",
                r.t_k, r.n_modes, r.draws, r.rms_grid, r.rms_mode_sum, r.dv_quadrature, r.ratio
            ));
        }
        s
    }
}

/// RMS of one thermal deformation field sample set on the configured grid.
pub fn sampled_field_rms(cfg: &RunConfig, mat: &MaterialParams, t_kelvin: f64, draws: usize) -> Result<DefpotRow> {
    if draws == 0 {
        return Err(Error::Config("need at least one thermal draw".into()));
    }
    let q_cut = cfg.physics.q_cut_fraction * derive_parameters(mat)?.q_d;
    let modes = enumerate_modes::<f64>(mat, cfg.grid.length_nm, q_cut)?;
    let grid = Grid2D::<f64>::new(cfg.grid.n, cfg.grid.length_nm)?;
    let kt = UnitSystem::thermal_energy(t_kelvin);
    let mode_sum: f64 = modes
        .modes
        .iter()
        .map(|m| if kt > 0.0 { m.g_amp * m.g_amp * bose(m.omega / kt) } else { 0.0 })
        .sum();
    let mut acc = 0.0;
    for i in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(cfg.ensemble.master_seed, i));
        let amps = sample_thermal(&modes, t_kelvin, cfg.physics.scheme, &mut rng);
        let v = deformation_potential(&modes, &amps, &grid, 0.0)?;
        acc += v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    }
    let rms_grid = (acc / draws as f64).sqrt();
    let dv = rms_deformation(mat, t_kelvin)?;
    Ok(DefpotRow {
        t_k: t_kelvin,
        n_modes: modes.len(),
        draws,
        rms_grid,
        rms_mode_sum: mode_sum.sqrt(),
        dv_quadrature: dv,
        ratio: if dv > 0.0 { rms_grid / dv } else { f64::NAN },
    })
}

pub fn defpot_stats(cfg: &RunConfig) -> Result<DefpotStats> {
    let mat = cfg.material.resolve()?;
    let t_d = derive_parameters(&mat)?.t_d;
    let mut rows = Vec::new();
    for t in cfg.temperatures(&mat)? {
        rows.push(sampled_field_rms(cfg, &mat, t, cfg.analysis.defpot_draws)?);
    }
    let range = (0.005 * t_d, 0.02 * t_d);
    let low_t_exponent = disorder_scaling_exponent(&mat, range.0, range.1, 9)?;
    Ok(DefpotStats { config_hash: cfg.hash(), material: mat.name.clone(), rows, low_t_exponent, exponent_range_k: range })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let mut c = RunConfig::desk();
        c.ensemble.n_realizations = 4;
        c.time.n_steps = 60;
        c.time.record_stride = 4;
        c.analysis.spread_window_fs = Some(2.0);
        c.physics.t_list_td = vec![1.0];
        c
    }

    #[test]
    fn relax_sweep_without_coupling_fails_every_fit() {
        let mut c = tiny();
        c.material.e_d = Some(0.0);
        c.physics.noise_enabled = false;
        c.physics.t_list_td = vec![0.5, 1.0];
        let r = relax_sweep(&c).unwrap();
        assert!(r.failure.is_none());
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert!(!row.fit_st.is_ok() && !row.fit_mf.is_ok());
            assert_eq!(row.inv_tau_st, 0.0);
        }
    }

    #[test]
    fn spread_without_coupling_is_free_spreading() {
        let mut c = tiny();
        c.material.e_d = Some(0.0);
        let r = spread_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            let mat = MaterialParams::by_name(&row.material).unwrap();
            let s = c.grid.sigma_nm.unwrap();
            // per-axis variance s²(1 + (t/τ)²) with τ = 2ms², averaged over [0, w]
            let tau = UnitSystem::time_to_fs(2.0 * mat.mass() * s * s);
            let w = r.window_fs;
            let mean_var = 2.0 * s * s * (1.0 + w * w / (3.0 * tau * tau));
            let want = mean_var.sqrt();
            assert!((row.xi_st_nm / want - 1.0).abs() < 1e-3, "{} vs {want}", row.xi_st_nm);
            assert!((row.xi_mf_nm / want - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn csv_is_reproducible_and_hash_stamped() {
        let c = tiny();
        let a = spread_sweep(&c).unwrap().to_csv();
        let b = spread_sweep(&c).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with(&format!("# config_hash={}", c.hash())));
    }

    #[test]
    fn unstable_temperature_is_rejected_before_running() {
        let mut c = tiny();
        // the disorder at 1e9 K pushes the step bound far below dt
        c.physics.t_list_k = vec![1e9];
        assert!(relax_sweep(&c).is_err());
    }

    #[test]
    fn noise_check_and_negative_control() {
        let mut c = RunConfig::desk();
        c.analysis.noise_realizations = 3000;
        c.analysis.noise_steps = 64;
        c.analysis.noise_max_lag = 32;
        let good = noise_validate(&c, false).unwrap();
        assert!(good.passes(), "{}", good.report.max_sigmas);
        assert_eq!(good.report.rows.len(), 33);
        assert!(good.to_csv().contains("lag,max_abs_deviation"));
        let bad = noise_validate(&c, true).unwrap();
        assert!(!bad.passes());
    }

    #[test]
    fn pt_benchmark_matches_scalar_rates() {
        let mut c = RunConfig::desk();
        c.physics.t_list_td = vec![1.0];
        let b = pt_benchmark(&c).unwrap();
        let mat = c.material.resolve().unwrap();
        let (f, m) = rates(&mat, derive_parameters(&mat).unwrap().t_d).unwrap();
        assert_eq!(b.sweep.rows[0].inv_tau_full_per_fs, f.inv_tau_per_fs);
        assert_eq!(b.sweep.rows[0].inv_tau_mf_per_fs, m.inv_tau_per_fs);
        assert_eq!(b.to_csv(), pt_benchmark(&c).unwrap().to_csv());
    }

    #[test]
    fn defpot_rms_vanishes_at_zero_temperature() {
        let mut c = RunConfig::desk();
        c.physics.t_list_td = vec![];
        c.physics.t_list_k = vec![0.0];
        c.analysis.defpot_draws = 3;
        let s = defpot_stats(&c).unwrap();
        assert_eq!(s.rows[0].rms_grid, 0.0);
        assert!((s.low_t_exponent - 3.0).abs() < 0.05, "{}", s.low_t_exponent);
        assert!(s.to_csv().contains("low_T_exponent"));
    }

    #[test]
    fn sampled_rms_matches_mode_sum() {
        let c = RunConfig::desk();
        let mat = c.material.resolve().unwrap();
        let t = derive_parameters(&mat).unwrap().t_d;
        let r = sampled_field_rms(&c, &mat, t, 50).unwrap();
        assert!((r.rms_grid / r.rms_mode_sum - 1.0).abs() < 0.03, "{} vs {}", r.rms_grid, r.rms_mode_sum);
    }
}
