//! Kernel-variant scaling benchmark.
//!
//! Runs the spiking model with (a) one shared kernel, (b) per-cell kernels
//! and (c) per-cell kernels with plasticity applied every step, over an
//! ascending list of lattice sides. Each point reports the median wall time
//! per step over the measured steps (warm-up excluded, no snapshot I/O
//! inside the timed region). A point whose weight allocation is refused is
//! recorded as failed and the sweep continues.

use std::time::Instant;

use aca_core::rng::RandomField;
use aca_core::spiking::{SpikingModel, SpikingParams};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    /// One shared signed kernel (classic fixed-rule CA).
    Homogeneous,
    /// Per-cell kernels, fixed weights.
    Heterogeneous,
    /// Per-cell kernels with plasticity every step.
    HeterogeneousPlastic,
}

impl KernelVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "homogeneous" => Some(Self::Homogeneous),
            "heterogeneous" => Some(Self::Heterogeneous),
            "plastic" | "heterogeneous-plastic" => Some(Self::HeterogeneousPlastic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Homogeneous => "homogeneous",
            Self::Heterogeneous => "heterogeneous",
            Self::HeterogeneousPlastic => "heterogeneous-plastic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchPoint {
    pub variant: KernelVariant,
    pub size: usize,
    pub ok: bool,
    pub error: Option<String>,
    pub median_step_secs: f64,
    pub cells_per_sec: f64,
    /// Analytic estimate of the state plus weight storage.
    pub mem_bytes: u64,
    pub steps_measured: usize,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    pub threads: usize,
}

impl BenchReport {
    pub fn point(&self, variant: KernelVariant, size: usize) -> Option<&BenchPoint> {
        self.points
            .iter()
            .find(|p| p.variant == variant && p.size == size && p.ok)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn run_point(
    variant: KernelVariant,
    size: usize,
    steps: usize,
    warmup: usize,
    seed: u64,
) -> Result<BenchPoint, String> {
    let params = SpikingParams::<f32> {
        plasticity_on: variant == KernelVariant::HeterogeneousPlastic,
        plasticity_every: 1,
        ..SpikingParams::default()
    };
    let rng = RandomField::new(seed);
    let shared = variant == KernelVariant::Homogeneous;
    let mut model = SpikingModel::with_kernel_mode(size, size, params, &rng, shared)
        .map_err(|e| e.to_string())?;

    for _ in 0..warmup {
        model.tick(&rng).map_err(|e| e.to_string())?;
    }
    let mut times = Vec::with_capacity(steps);
    for _ in 0..steps {
        let t0 = Instant::now();
        model.tick(&rng).map_err(|e| e.to_string())?;
        times.push(t0.elapsed().as_secs_f64());
    }
    let med = median(times);
    let cells = (size * size) as f64;
    // five channels + input buffer + baseline current, then the weights
    let state_bytes = (6 * size * size + size * size) * std::mem::size_of::<f32>();
    let mem_bytes = (state_bytes + model.kernels().weight_bytes()) as u64;
    Ok(BenchPoint {
        variant,
        size,
        ok: true,
        error: None,
        median_step_secs: med,
        cells_per_sec: if med > 0.0 { cells / med } else { f64::INFINITY },
        mem_bytes,
        steps_measured: steps,
    })
}

/// Sweep `variants x sizes`. Sizes must be ascending; at least 10 measured
/// and 3 warm-up steps are required.
pub fn run_benchmark(
    sizes: &[usize],
    variants: &[KernelVariant],
    steps: usize,
    warmup: usize,
    seed: u64,
) -> Result<BenchReport, CliError> {
    if sizes.is_empty() || !sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(CliError::Config(
            "bench.sizes: must be non-empty and strictly ascending".to_string(),
        ));
    }
    if steps < 10 {
        return Err(CliError::Config(
            "bench.steps: needs at least 10 measured steps".to_string(),
        ));
    }
    if warmup < 3 {
        return Err(CliError::Config(
            "bench.warmup: needs at least 3 warm-up steps".to_string(),
        ));
    }
    let mut points = Vec::new();
    for &variant in variants {
        for &size in sizes {
            match run_point(variant, size, steps, warmup, seed) {
                Ok(p) => points.push(p),
                Err(e) => points.push(BenchPoint {
                    variant,
                    size,
                    ok: false,
                    error: Some(e),
                    median_step_secs: 0.0,
                    cells_per_sec: 0.0,
                    mem_bytes: 0,
                    steps_measured: 0,
                }),
            }
        }
    }
    Ok(BenchReport {
        points,
        threads: rayon::current_num_threads(),
    })
}

pub fn write_report(report: &BenchReport, path: &std::path::Path) -> Result<(), CliError> {
    use aca_core::analysis::CsvWriter;
    let mut csv = CsvWriter::create(
        path,
        &[
            "variant",
            "size",
            "cells",
            "ok",
            "median_step_seconds",
            "cells_per_second",
            "mem_bytes",
            "steps_measured",
            "threads",
            "error",
        ],
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    for p in &report.points {
        csv.write_raw_row(&[
            p.variant.name().to_string(),
            p.size.to_string(),
            (p.size * p.size).to_string(),
            p.ok.to_string(),
            CsvWriter::format_value(p.median_step_secs),
            CsvWriter::format_value(p.cells_per_sec),
            p.mem_bytes.to_string(),
            p.steps_measured.to_string(),
            report.threads.to_string(),
            p.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    csv.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}
