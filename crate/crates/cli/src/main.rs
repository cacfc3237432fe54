use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aca_cli::config::{IsingMode, Model, RunConfig};
use aca_cli::{configure_threads, run, CliError};

#[derive(Parser)]
#[command(
    name = "aca",
    version,
    about = "Adaptive cellular automata: Ising with temperature feedback, plastic rate and spiking neural CAs, scaling benchmark"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Default)]
struct Common {
    /// TOML config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = library default).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Snapshot cadence in steps (0 disables).
    #[arg(long)]
    snapshot_every: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ising model with feedback-controlled temperature.
    Ising {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
        /// local | global | fixed
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        temp_init: Option<f64>,
        /// random | ordered
        #[arg(long)]
        spin_init: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        diffusion: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        update_fraction: Option<f64>,
        #[arg(long)]
        adapt_every: Option<u64>,
    },
    /// Wilson-Cowan rate network with plasticity.
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long)]
        p_e: Option<f64>,
        #[arg(long)]
        g: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// on | off
        #[arg(long)]
        plasticity: Option<String>,
        /// PGM image projected as input current.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Run the (p_e, g) phase sweep.
        #[arg(long)]
        sweep: bool,
        /// Sweep resolution per axis.
        #[arg(long)]
        sweep_n: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        lr_e: Option<f64>,
        #[arg(long)]
        lr_i: Option<f64>,
    },
    /// Energy-gated LIF spiking network.
    Spiking {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long)]
        p_e: Option<f64>,
        #[arg(long)]
        g: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// on | off
        #[arg(long)]
        plasticity: Option<String>,
        /// PGM stimulus image.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        stim_on: Option<u64>,
        #[arg(long)]
        stim_off: Option<u64>,
        #[arg(long)]
        stim_amp: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        tau_e: Option<f64>,
        #[arg(long)]
        tau_a: Option<f64>,
        #[arg(long)]
        tau_th: Option<f64>,
        #[arg(long)]
        e0: Option<f64>,
        #[arg(long)]
        e_min: Option<f64>,
        #[arg(long)]
        s_c: Option<f64>,
        #[arg(long)]
        eps_e: Option<f64>,
        #[arg(long)]
        rho0: Option<f64>,
        #[arg(long)]
        eta_th: Option<f64>,
        #[arg(long)]
        v_th0: Option<f64>,
        #[arg(long)]
        v_reset: Option<f64>,
        #[arg(long)]
        c_mean: Option<f64>,
        #[arg(long)]
        c_jitter: Option<f64>,
        #[arg(long)]
        v_noise: Option<f64>,
        #[arg(long)]
        k_e: Option<f64>,
        #[arg(long)]
        k_i: Option<f64>,
        #[arg(long)]
        lr_e: Option<f64>,
        #[arg(long)]
        lr_i: Option<f64>,
        #[arg(long)]
        plasticity_every: Option<u64>,
    },
    /// Kernel-variant scaling benchmark.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending lattice sides.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Comma-separated variants: homogeneous,heterogeneous,plastic.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
        /// Measured steps per point.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
    },
}

fn base_config(common: &Common, model: Model) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.model = model;
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.threads {
        cfg.threads = v;
    }
    if let Some(v) = &common.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = common.snapshot_every {
        cfg.snapshot_every = v;
    }
    Ok(cfg)
}

fn parse_on_off(v: &str) -> Result<bool, CliError> {
    match v {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(CliError::Config(format!(
            "plasticity: expected on|off, got {other:?}"
        ))),
    }
}

macro_rules! apply {
    ($cfg:expr, $($field:ident: $val:expr),* $(,)?) => {
        $(if let Some(v) = $val { $cfg.$field = v; })*
    };
}

fn build_config(cmd: &Cmd) -> Result<RunConfig, CliError> {
    match cmd {
        Cmd::Ising {
            common,
            size,
            steps,
            mode,
            temp_init,
            spin_init,
            alpha,
            epsilon,
            diffusion,
            eta,
            update_fraction,
            adapt_every,
        } => {
            let mut cfg = base_config(common, Model::Ising)?;
            apply!(cfg.ising,
                size: *size, steps: *steps, temp_init: *temp_init, alpha: *alpha,
                epsilon: *epsilon, diffusion: *diffusion, eta: *eta,
                update_fraction: *update_fraction, adapt_every: *adapt_every);
            if let Some(m) = mode {
                cfg.ising.mode = match m.as_str() {
                    "local" => IsingMode::Local,
                    "global" => IsingMode::Global,
                    "fixed" => IsingMode::Fixed,
                    other => {
                        return Err(CliError::Config(format!(
                            "ising.mode: expected local|global|fixed, got {other:?}"
                        )))
                    }
                };
            }
            if let Some(s) = spin_init {
                cfg.ising.spin_init = match s.as_str() {
                    "random" => aca_cli::config::SpinInit::Random,
                    "ordered" => aca_cli::config::SpinInit::Ordered,
                    other => {
                        return Err(CliError::Config(format!(
                            "ising.spin_init: expected random|ordered, got {other:?}"
                        )))
                    }
                };
            }
            Ok(cfg)
        }
        Cmd::Rate {
            common,
            size,
            steps,
            radius,
            p_e,
            g,
            dt,
            plasticity,
            image,
            sweep,
            sweep_n,
            beta,
            lr_e,
            lr_i,
        } => {
            let mut cfg = base_config(common, Model::Rate)?;
            apply!(cfg.rate,
                size: *size, steps: *steps, radius: *radius, p_e: *p_e, g: *g, dt: *dt,
                sweep_n: *sweep_n, beta: *beta, lr_e: *lr_e, lr_i: *lr_i);
            if let Some(p) = plasticity {
                cfg.rate.plasticity = parse_on_off(p)?;
            }
            if let Some(img) = image {
                cfg.rate.image = Some(img.clone());
            }
            if *sweep {
                cfg.rate.sweep = true;
            }
            Ok(cfg)
        }
        Cmd::Spiking {
            common,
            size,
            steps,
            radius,
            p_e,
            g,
            dt,
            plasticity,
            image,
            stim_on,
            stim_off,
            stim_amp,
            tau,
            tau_e,
            tau_a,
            tau_th,
            e0,
            e_min,
            s_c,
            eps_e,
            rho0,
            eta_th,
            v_th0,
            v_reset,
            c_mean,
            c_jitter,
            v_noise,
            k_e,
            k_i,
            lr_e,
            lr_i,
            plasticity_every,
        } => {
            let mut cfg = base_config(common, Model::Spiking)?;
            apply!(cfg.spiking,
                size: *size, steps: *steps, radius: *radius, p_e: *p_e, g: *g, dt: *dt,
                stim_on: *stim_on, stim_off: *stim_off, stim_amp: *stim_amp,
                tau: *tau, tau_e: *tau_e, tau_a: *tau_a, tau_th: *tau_th,
                e0: *e0, e_min: *e_min, s_c: *s_c, eps_e: *eps_e, rho0: *rho0,
                eta_th: *eta_th, v_th0: *v_th0, v_reset: *v_reset,
                c_mean: *c_mean, c_jitter: *c_jitter, v_noise: *v_noise,
                k_e: *k_e, k_i: *k_i, lr_e: *lr_e, lr_i: *lr_i,
                plasticity_every: *plasticity_every);
            if let Some(p) = plasticity {
                cfg.spiking.plasticity = parse_on_off(p)?;
            }
            if let Some(img) = image {
                cfg.spiking.image = Some(img.clone());
            }
            Ok(cfg)
        }
        Cmd::Bench {
            common,
            sizes,
            variants,
            steps,
            warmup,
        } => {
            let mut cfg = base_config(common, Model::Bench)?;
            apply!(cfg.bench, steps: *steps, warmup: *warmup);
            if let Some(s) = sizes {
                cfg.bench.sizes = s.clone();
            }
            if let Some(v) = variants {
                cfg.bench.variants = v.clone();
            }
            Ok(cfg)
        }
    }
}

fn dispatch(cmd: &Cmd) -> Result<(), CliError> {
    let cfg = build_config(cmd)?;
    cfg.validate()?;
    configure_threads(cfg.threads)?;
    match cfg.model {
        Model::Ising => run::run_ising(&cfg),
        Model::Rate => run::run_rate(&cfg),
        Model::Spiking => run::run_spiking(&cfg),
        Model::Bench => run::run_bench(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
