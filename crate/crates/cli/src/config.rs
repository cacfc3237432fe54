//! Run configuration: defaults, TOML files, flag overrides, validation.
//!
//! Precedence is flags over file values over defaults. Unknown keys in a
//! config file are rejected. `parse(serialize(cfg)) == cfg` holds for every
//! representable configuration and backs the reproducibility manifest every
//! run writes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Ising,
    Rate,
    Spiking,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IsingMode {
    #[default]
    Local,
    Global,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormScopeCfg {
    IncomingPerCell,
    OutgoingPerCell,
    #[default]
    GlobalPerType,
}

impl From<NormScopeCfg> for aca_core::kernels::NormScope {
    fn from(v: NormScopeCfg) -> Self {
        match v {
            NormScopeCfg::IncomingPerCell => Self::IncomingPerCell,
            NormScopeCfg::OutgoingPerCell => Self::OutgoingPerCell,
            NormScopeCfg::GlobalPerType => Self::GlobalPerType,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpinInit {
    #[default]
    Random,
    /// All spins up; the right start for equilibrium measurements below the
    /// transition, where a random start is coarsening-limited.
    Ordered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsingCfg {
    pub size: usize,
    pub steps: u64,
    pub mode: IsingMode,
    pub temp_init: f64,
    pub spin_init: SpinInit,
    pub alpha: f64,
    pub epsilon: f64,
    pub diffusion: f64,
    pub eta: f64,
    pub update_fraction: f64,
    pub adapt_every: u64,
}

impl Default for IsingCfg {
    fn default() -> Self {
        Self {
            size: 64,
            steps: 2000,
            mode: IsingMode::Local,
            temp_init: 2.0,
            spin_init: SpinInit::Random,
            alpha: 1e-1,
            epsilon: 2e-2,
            diffusion: 1.0,
            eta: 0.5,
            update_fraction: 0.5,
            adapt_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateCfg {
    pub size: usize,
    pub steps: u64,
    pub radius: usize,
    pub p_e: f64,
    pub g: f64,
    pub dt: f64,
    pub tau: f64,
    pub c0: f64,
    pub beta: f64,
    pub lr_e: f64,
    pub lr_i: f64,
    pub k_e: f64,
    pub k_i: f64,
    pub plasticity: bool,
    pub norm_scope: NormScopeCfg,
    /// Optional PGM image projected as the input current.
    pub image: Option<PathBuf>,
    /// Run the (p_e, g) sweep instead of a single simulation.
    pub sweep: bool,
    /// Sweep grid resolution per axis.
    pub sweep_n: usize,
    /// Lattice side used for each sweep point.
    pub sweep_size: usize,
}

impl Default for RateCfg {
    fn default() -> Self {
        Self {
            size: 64,
            steps: 2000,
            radius: 2,
            p_e: 0.8,
            g: 4.0,
            dt: 1.0,
            tau: 10.0,
            c0: 1.0,
            beta: 0.1,
            lr_e: 1e-3,
            lr_i: 1e-3,
            k_e: 1.0,
            k_i: 1.0,
            plasticity: true,
            norm_scope: NormScopeCfg::GlobalPerType,
            image: None,
            sweep: false,
            sweep_n: 8,
            sweep_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpikingCfg {
    pub size: usize,
    pub steps: u64,
    pub radius: usize,
    pub p_e: f64,
    pub g: f64,
    pub dt: f64,
    pub tau: f64,
    pub tau_e: f64,
    pub tau_a: f64,
    pub tau_th: f64,
    pub e0: f64,
    pub e_min: f64,
    pub s_c: f64,
    pub eps_e: f64,
    pub rho0: f64,
    pub eta_th: f64,
    pub v_th0: f64,
    pub v_reset: f64,
    pub c_mean: f64,
    pub c_jitter: f64,
    pub v_noise: f64,
    pub k_e: f64,
    pub k_i: f64,
    pub lr_e: f64,
    pub lr_i: f64,
    pub plasticity: bool,
    pub plasticity_every: u64,
    pub image: Option<PathBuf>,
    pub stim_on: u64,
    pub stim_off: u64,
    pub stim_amp: f64,
}

impl Default for SpikingCfg {
    fn default() -> Self {
        let p = aca_core::spiking::SpikingParams::<f64>::default();
        Self {
            size: 64,
            steps: 5000,
            radius: p.radius,
            p_e: p.p_e,
            g: p.g,
            dt: p.dt,
            tau: p.tau,
            tau_e: p.tau_e,
            tau_a: p.tau_a,
            tau_th: p.tau_th,
            e0: p.e0,
            e_min: p.e_min,
            s_c: p.s_c,
            eps_e: p.eps_e,
            rho0: p.rho0,
            eta_th: p.eta_th,
            v_th0: p.v_th0,
            v_reset: p.v_reset,
            c_mean: p.c_mean,
            c_jitter: p.c_jitter,
            v_noise: p.v_noise,
            k_e: p.k_e,
            k_i: p.k_i,
            lr_e: p.lr_e,
            lr_i: p.lr_i,
            plasticity: false,
            plasticity_every: p.plasticity_every,
            image: None,
            stim_on: 0,
            stim_off: 0,
            stim_amp: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchCfg {
    /// Lattice sides, ascending.
    pub sizes: Vec<usize>,
    /// Measured steps per point (median-timed).
    pub steps: usize,
    /// Warm-up steps excluded from timing.
    pub warmup: usize,
    /// Variants to run (subset of homogeneous|heterogeneous|plastic).
    pub variants: Vec<String>,
}

impl Default for BenchCfg {
    fn default() -> Self {
        Self {
            sizes: vec![64, 128, 256, 512],
            steps: 10,
            warmup: 3,
            variants: vec![
                "homogeneous".to_string(),
                "heterogeneous".to_string(),
                "plastic".to_string(),
            ],
        }
    }
}

/// Full resolved configuration for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: Model,
    pub seed: u64,
    /// Worker threads (0 = library default).
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Snapshot cadence in steps (0 disables periodic snapshots).
    pub snapshot_every: u64,
    pub ising: IsingCfg,
    pub rate: RateCfg,
    pub spiking: SpikingCfg,
    pub bench: BenchCfg,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks with key-path error messages.
    pub fn validate(&self) -> Result<(), CliError> {
        fn fail(key: &str, msg: &str) -> Result<(), CliError> {
            Err(CliError::Config(format!("{key}: {msg}")))
        }
        if self.ising.size == 0 {
            return fail("ising.size", "must be positive");
        }
        if !(self.ising.update_fraction > 0.0 && self.ising.update_fraction <= 1.0) {
            return fail("ising.update_fraction", "must be in (0, 1]");
        }
        if self.ising.adapt_every == 0 {
            return fail("ising.adapt_every", "must be positive");
        }
        if self.ising.temp_init <= 0.0 {
            return fail("ising.temp_init", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.ising.eta) {
            return fail("ising.eta", "must be in [0, 1]");
        }
        if self.ising.alpha < 0.0 || self.ising.epsilon < 0.0 || self.ising.diffusion < 0.0 {
            return fail("ising", "alpha, epsilon and diffusion must be non-negative");
        }
        if self.rate.size == 0 {
            return fail("rate.size", "must be positive");
        }
        if self.rate.radius == 0 {
            return fail("rate.radius", "must be positive");
        }
        if 2 * self.rate.radius + 1 > self.rate.size {
            return fail("rate.radius", "kernel side exceeds the lattice");
        }
        if !(0.0..=1.0).contains(&self.rate.p_e) {
            return fail("rate.p_e", "must be in [0, 1]");
        }
        if self.rate.dt <= 0.0 {
            return fail("rate.dt", "must be positive");
        }
        if self.rate.sweep_n < 2 {
            return fail("rate.sweep_n", "must be at least 2");
        }
        if self.spiking.size == 0 {
            return fail("spiking.size", "must be positive");
        }
        if self.spiking.radius == 0 {
            return fail("spiking.radius", "must be positive");
        }
        if 2 * self.spiking.radius + 1 > self.spiking.size {
            return fail("spiking.radius", "kernel side exceeds the lattice");
        }
        if !(0.0..=1.0).contains(&self.spiking.p_e) {
            return fail("spiking.p_e", "must be in [0, 1]");
        }
        if self.spiking.dt <= 0.0 {
            return fail("spiking.dt", "must be positive");
        }
        if self.spiking.plasticity_every == 0 {
            return fail("spiking.plasticity_every", "must be positive");
        }
        if self.spiking.stim_on > self.spiking.stim_off {
            return fail("spiking.stim_on", "must not exceed spiking.stim_off");
        }
        if self.bench.sizes.is_empty() {
            return fail("bench.sizes", "must name at least one size");
        }
        if !self.bench.sizes.windows(2).all(|w| w[0] < w[1]) {
            return fail("bench.sizes", "must be strictly ascending");
        }
        if self.bench.steps < 10 {
            return fail("bench.steps", "needs at least 10 measured steps");
        }
        if self.bench.warmup < 3 {
            return fail("bench.warmup", "needs at least 3 warm-up steps");
        }
        for v in &self.bench.variants {
            crate::bench::KernelVariant::parse(v)
                .ok_or_else(|| CliError::Config(format!("bench.variants: unknown variant {v:?}")))?;
        }
        Ok(())
    }

    /// Write the resolved configuration as the run manifest.
    pub fn write_manifest(&self, out_dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
        std::fs::write(out_dir.join("manifest.toml"), self.to_toml())
            .map_err(|e| CliError::Runtime(format!("cannot write manifest: {e}")))?;
        Ok(())
    }
}

impl RateCfg {
    pub fn to_params(&self) -> aca_core::rate::RateParams<f32> {
        aca_core::rate::RateParams {
            radius: self.radius,
            p_e: self.p_e,
            g: self.g as f32,
            tau: self.tau as f32,
            dt: self.dt as f32,
            c0: self.c0 as f32,
            beta: self.beta as f32,
            lr_e: self.lr_e as f32,
            lr_i: self.lr_i as f32,
            k_e: self.k_e as f32,
            k_i: self.k_i as f32,
            norm_scope: self.norm_scope.into(),
            hebbian_on: self.plasticity,
            inhibitory_on: self.plasticity,
            normalize_on: self.plasticity,
            ..aca_core::rate::RateParams::default()
        }
    }
}

impl SpikingCfg {
    pub fn to_params(&self) -> aca_core::spiking::SpikingParams<f32> {
        aca_core::spiking::SpikingParams {
            radius: self.radius,
            p_e: self.p_e,
            g: self.g as f32,
            tau: self.tau as f32,
            tau_e: self.tau_e as f32,
            tau_a: self.tau_a as f32,
            tau_th: self.tau_th as f32,
            dt: self.dt as f32,
            e0: self.e0 as f32,
            e_min: self.e_min as f32,
            s_c: self.s_c as f32,
            eps_e: self.eps_e as f32,
            rho0: self.rho0 as f32,
            eta_th: self.eta_th as f32,
            v_th0: self.v_th0 as f32,
            v_reset: self.v_reset as f32,
            c_mean: self.c_mean as f32,
            c_jitter: self.c_jitter as f32,
            v_noise: self.v_noise as f32,
            k_e: self.k_e as f32,
            k_i: self.k_i as f32,
            w_init: 1.0,
            norm_scope: aca_core::kernels::NormScope::GlobalPerType,
            plasticity_on: self.plasticity,
            plasticity_every: self.plasticity_every,
            lr_e: self.lr_e as f32,
            lr_i: self.lr_i as f32,
        }
    }
}

impl IsingCfg {
    pub fn to_params(&self) -> aca_core::ising::IsingParams<f32> {
        aca_core::ising::IsingParams {
            mode: match self.mode {
                IsingMode::Local => aca_core::ising::TempMode::Local,
                IsingMode::Global => aca_core::ising::TempMode::Global,
                IsingMode::Fixed => aca_core::ising::TempMode::Fixed,
            },
            j: 1.0,
            temp_init: self.temp_init as f32,
            update_fraction: self.update_fraction,
            adapt_every: self.adapt_every,
            soc: aca_core::ising::SocParams {
                alpha: self.alpha as f32,
                epsilon: self.epsilon as f32,
                diffusion: self.diffusion as f32,
                eta: self.eta as f32,
            },
        }
    }
}
