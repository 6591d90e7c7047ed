//! Run configuration: a sectioned TOML file with documented defaults, named
//! presets and a stable content hash.
//!
//! ```toml
//! [material]
//! name = "copper"        # registry entry; the optional keys below override it
//! # e_d = 0.0
//!
//! [grid]
//! n = 64                 # points per axis
//! length_nm = 12.0
//! sigma_nm = 1.0         # initial packet width; omit for 0.02·L
//!
//! [time]
//! dt_fs = 0.039
//! n_steps = 513
//! record_stride = 5
//! noise_stride = 1
//! dt_safety = 0.5
//!
//! [ensemble]
//! n_realizations = 64
//! master_seed = 1
//! max_parallel = 0       # 0 uses every core
//!
//! [physics]
//! t_list_td = [0.5, 1.0, 2.0]   # temperatures in units of T_D ...
//! t_list_k = []                 # ... and/or in kelvin
//! scheme = "RandomPhase"
//! feedback = false
//! noise_enabled = true
//! q_cut_fraction = 1.0
//!
//! [analysis]
//! spread_window_fs = 10.0
//! spread_materials = ["copper", "bi2212"]
//!
//! [output]
//! directory = "out"
//! formats = ["csv", "json"]
//! ```
//!
//! Only the output directory (`QACOUSTIC_OUT`) and the worker count
//! (`QACOUSTIC_THREADS`) can be overridden from the environment.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::SamplingScheme;
use crate::error::{Error, Result};
use crate::material::{derive_parameters, MaterialParams};
use crate::simulation::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    pub name: String,
    pub m_eff: Option<f64>,
    pub v_s: Option<f64>,
    pub a: Option<f64>,
    pub e_d: Option<f64>,
    pub rho: Option<f64>,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self { name: "copper".into(), m_eff: None, v_s: None, a: None, e_d: None, rho: None }
    }
}

impl MaterialSection {
    /// Registry entry `name` with this section's overrides applied.
    pub fn resolve_named(&self, name: &str) -> Result<MaterialParams> {
        let mut m = MaterialParams::by_name(name)?;
        if let Some(v) = self.m_eff {
            m.m_eff = v;
        }
        if let Some(v) = self.v_s {
            m.v_s = v;
        }
        if let Some(v) = self.a {
            m.a = v;
        }
        if let Some(v) = self.e_d {
            m.e_d = v;
        }
        if let Some(v) = self.rho {
            m.rho = v;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn resolve(&self) -> Result<MaterialParams> {
        self.resolve_named(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length_nm: f64,
    pub sigma_nm: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 256, length_nm: 20.0, sigma_nm: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt_fs: f64,
    pub n_steps: usize,
    pub record_stride: usize,
    pub noise_stride: usize,
    pub dt_safety: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { dt_fs: 0.01, n_steps: 2000, record_stride: 10, noise_stride: 1, dt_safety: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Worker threads; 0 means one per core.
    pub max_parallel: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { n_realizations: 256, master_seed: 1, max_parallel: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    /// Temperatures as multiples of the material's Debye temperature.
    pub t_list_td: Vec<f64>,
    /// Temperatures in kelvin, appended after `t_list_td`.
    pub t_list_k: Vec<f64>,
    pub scheme: SamplingScheme,
    pub feedback: bool,
    pub noise_enabled: bool,
    pub q_cut_fraction: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            t_list_td: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
            t_list_k: Vec::new(),
            scheme: SamplingScheme::RandomPhase,
            feedback: false,
            noise_enabled: true,
            q_cut_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Averaging window of the spread ξ, fs; `None` uses the whole run.
    pub spread_window_fs: Option<f64>,
    pub spread_materials: Vec<String>,
    /// Fixed momentum-fit window (t0, t1) in fs; `None` picks it from the data.
    pub fit_window_fs: Option<[f64; 2]>,
    /// Thermal draws for the deformation-field statistics.
    pub defpot_draws: usize,
    /// Single-mode noise check: realizations, steps, largest lag, and the
    /// mode energy expressed as a temperature.
    pub noise_realizations: usize,
    pub noise_steps: usize,
    pub noise_max_lag: usize,
    pub noise_mode_temperature_k: f64,
    pub noise_dt_fs: f64,
    /// Error bars allowed before the noise check fails.
    pub noise_sigmas: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            spread_window_fs: None,
            spread_materials: vec!["copper".into(), "bi2212".into()],
            fit_window_fs: None,
            defpot_draws: 200,
            noise_realizations: 20_000,
            noise_steps: 256,
            noise_max_lag: 64,
            noise_mode_temperature_k: 300.0,
            noise_dt_fs: 1.0,
            noise_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "out".into(), formats: vec!["csv".into(), "json".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub ensemble: EnsembleSection,
    pub physics: PhysicsSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

pub const PRESETS: [&str; 2] = ["default", "desk"];

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")))),
        }
    }

    /// Laptop-scale settings: a 64² grid on a 12 nm box, a 1 nm packet, and a
    /// 0.039 fs step. The step sits just inside copper's kinetic bound and is
    /// converged for the mean-field dynamics of both materials at this
    /// resolution.
    pub fn desk() -> Self {
        Self {
            grid: GridSection { n: 64, length_nm: 12.0, sigma_nm: Some(1.0) },
            time: TimeSection { dt_fs: 0.039, n_steps: 513, record_stride: 5, noise_stride: 1, dt_safety: 0.5 },
            ensemble: EnsembleSection { n_realizations: 64, master_seed: 1, max_parallel: 0 },
            physics: PhysicsSection { t_list_td: vec![0.1, 0.5, 1.0, 2.0], ..PhysicsSection::default() },
            analysis: AnalysisSection {
                spread_window_fs: Some(10.0),
                ..AnalysisSection::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    /// Parses `text` on top of a preset: keys present in the file replace the
    /// preset's values, everything else keeps them.
    pub fn from_toml_over(base: &Self, text: &str) -> Result<Self> {
        let mut merged = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        let patch: toml::Value = toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        merge(&mut merged, patch);
        merged.try_into().map_err(|e: toml::de::Error| Error::Config(format!("config error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded. The output section is
    /// excluded so that moving the output directory keeps the hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Applies `QACOUSTIC_OUT` and `QACOUSTIC_THREADS` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_env_from(|k| std::env::var(k).ok())
    }

    pub fn apply_env_from(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(dir) = get("QACOUSTIC_OUT") {
            self.output.directory = dir;
        }
        if let Some(n) = get("QACOUSTIC_THREADS") {
            self.ensemble.max_parallel =
                n.trim().parse().map_err(|_| Error::Config(format!("QACOUSTIC_THREADS must be an integer, got `{n}`")))?;
        }
        Ok(())
    }

    /// Temperatures in kelvin for `mat`, in list order.
    pub fn temperatures(&self, mat: &MaterialParams) -> Result<Vec<f64>> {
        let t_d = derive_parameters(mat)?.t_d;
        let mut out: Vec<f64> = self.physics.t_list_td.iter().map(|x| x * t_d).collect();
        out.extend(self.physics.t_list_k.iter().copied());
        if let Some(bad) = out.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Config(format!("temperatures must be finite and >= 0, got {bad}")));
        }
        Ok(out)
    }

    /// Simulation settings for one material and temperature.
    pub fn sim_config(&self, mat: &MaterialParams, t_kelvin: f64) -> SimConfig {
        SimConfig {
            grid_n: self.grid.n,
            box_length: self.grid.length_nm,
            q_cut_fraction: self.physics.q_cut_fraction,
            temperature: t_kelvin,
            scheme: self.physics.scheme,
            feedback: self.physics.feedback,
            noise_enabled: self.physics.noise_enabled,
            dt_fs: self.time.dt_fs,
            n_steps: self.time.n_steps,
            record_stride: self.time.record_stride,
            noise_stride: self.time.noise_stride,
            sigma: self.grid.sigma_nm,
            dt_safety: self.time.dt_safety,
            ..SimConfig::new(mat.clone())
        }
    }

    /// Checks the settings shared by every command.
    pub fn validate_common(&self) -> Result<()> {
        if self.ensemble.n_realizations == 0 {
            return Err(Error::Config("ensemble.n_realizations must be positive".into()));
        }
        if let Some([a, b]) = self.analysis.fit_window_fs {
            if !(a >= 0.0 && b > a) {
                return Err(Error::Config(format!("fit window [{a}, {b}] fs is empty")));
            }
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(Error::Config(format!("unknown output format `{f}`")));
            }
        }
        Ok(())
    }

    /// Full pre-run validation of every (material, temperature) pair a
    /// simulation command will visit: grid anti-aliasing and the step bound.
    pub fn validate_runs(&self, materials: &[MaterialParams]) -> Result<()> {
        self.validate_common()?;
        for mat in materials {
            let temps = self.temperatures(mat)?;
            if temps.is_empty() {
                return Err(Error::Config("no temperatures configured".into()));
            }
            for t in temps {
                self.sim_config(mat, t).validate()?;
            }
        }
        Ok(())
    }

    /// The spread window must fit inside the run.
    pub fn validate_spread_window(&self) -> Result<()> {
        if let Some(w) = self.analysis.spread_window_fs {
            let run = self.time.dt_fs * self.time.n_steps as f64;
            if !(w > 0.0) || w > run * (1.0 + 1e-12) {
                return Err(Error::Config(format!("spread window {w} fs must lie in (0, {run}] fs")));
            }
        }
        Ok(())
    }

    /// Materials visited by the spread sweep.
    pub fn spread_materials(&self) -> Result<Vec<MaterialParams>> {
        if self.analysis.spread_materials.is_empty() {
            return Err(Error::Config("analysis.spread_materials is empty".into()));
        }
        self.analysis.spread_materials.iter().map(|n| self.material.resolve_named(n)).collect()
    }
}

fn merge(base: &mut toml::Value, patch: toml::Value) {
    match (base, patch) {
        (toml::Value::Table(b), toml::Value::Table(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
