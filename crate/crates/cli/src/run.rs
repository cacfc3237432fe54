//! Model runners: wire configurations to the core models and emit the run
//! artifacts (manifest, CSV time series, binary snapshots, PGM renders).

use std::path::Path;

use aca_core::analysis::{histogram, mean_std, CsvWriter};
use aca_core::grid::Grid;
use aca_core::io::{read_pgm, write_pgm, write_snapshot};
use aca_core::ising::{IsingModel, CH_SPIN, CH_TEMP};
use aca_core::rate::{imprint_image, kernel_mosaic, phase_sweep, RateModel, SweepResult};
use aca_core::rng::RandomField;
use aca_core::spiking::{
    present_stimulus_recorded, spike_statistics, SpikeRecorder, SpikingModel, StimulusProtocol,
};

use crate::config::RunConfig;
use crate::CliError;

fn csv(path: &Path, header: &[&str]) -> Result<CsvWriter, CliError> {
    CsvWriter::create(path, header).map_err(CliError::from)
}

pub fn run_ising(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = cfg.out_dir.as_path();
    cfg.write_manifest(out)?;
    let rng = RandomField::new(cfg.seed);
    let size = cfg.ising.size;
    let mut model = IsingModel::new(size, size, cfg.ising.to_params(), &rng)?;
    if cfg.ising.spin_init == crate::config::SpinInit::Ordered {
        model.set_spins_uniform(true);
    }

    let mut ts = csv(
        &out.join("timeseries.csv"),
        &["step", "mean_temp", "abs_magnetization", "energy_per_spin"],
    )?;
    for step in 0..cfg.ising.steps {
        model.advance(&rng)?;
        ts.write_row(&[
            step as f64,
            model.mean_temp(),
            model.magnetization_abs(),
            model.energy_per_spin(),
        ])?;
        if cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0 {
            model.sync_temp_channel();
            let tag = format!("{:08}", step + 1);
            write_snapshot(out.join(format!("state_{tag}.aca")), model.grid(), (step + 1) as u32)?;
            write_pgm(out.join(format!("spins_{tag}.pgm")), model.grid(), CH_SPIN)?;
            write_pgm(out.join(format!("temps_{tag}.pgm")), model.grid(), CH_TEMP)?;
        }
    }
    ts.flush()?;

    model.sync_temp_channel();
    write_snapshot(out.join("state_final.aca"), model.grid(), cfg.ising.steps as u32)?;
    write_pgm(out.join("spins_final.pgm"), model.grid(), CH_SPIN)?;
    write_pgm(out.join("temps_final.pgm"), model.grid(), CH_TEMP)?;

    if cfg.ising.mode == crate::config::IsingMode::Local {
        let hist = histogram(model.temps(), 60);
        let mut hcsv = csv(&out.join("temps_histogram.csv"), &["bin_center", "count"])?;
        let width = (hist.hi - hist.lo) / hist.counts.len() as f64;
        for (i, &c) in hist.counts.iter().enumerate() {
            hcsv.write_row(&[hist.lo + (i as f64 + 0.5) * width, c as f64])?;
        }
        hcsv.flush()?;
    }
    println!(
        "ising: {} steps, mean T {:.4}, |M| {:.4}, E/spin {:.4}",
        cfg.ising.steps,
        model.mean_temp(),
        model.magnetization_abs(),
        model.energy_per_spin()
    );
    Ok(())
}

fn write_sweep(out: &Path, sweep: &SweepResult, k_e: f64, k_i: f64) -> Result<(), CliError> {
    let mut s = csv(
        &out.join("sweep.csv"),
        &["p_e", "g", "mean_activity", "cv", "degenerate"],
    )?;
    let n_g = sweep.g_values.len();
    for (i, &p_e) in sweep.p_e_values.iter().enumerate() {
        for (j, &g) in sweep.g_values.iter().enumerate() {
            let idx = i * n_g + j;
            s.write_raw_row(&[
                CsvWriter::format_value(p_e),
                CsvWriter::format_value(g),
                CsvWriter::format_value(sweep.mean_activity[idx]),
                CsvWriter::format_value(sweep.cv[idx]),
                sweep.degenerate[idx].to_string(),
            ])?;
        }
    }
    s.flush()?;
    let mut b = csv(&out.join("balance_curve.csv"), &["p_e", "g_balance"])?;
    for &p_e in &sweep.p_e_values {
        let g = SweepResult::balance_g(p_e, k_e, k_i);
        b.write_raw_row(&[
            CsvWriter::format_value(p_e),
            if g.is_finite() {
                CsvWriter::format_value(g)
            } else {
                "inf".to_string()
            },
        ])?;
    }
    b.flush()?;
    Ok(())
}

fn write_rate_maps(out: &Path, model: &RateModel<f32>) -> Result<(), CliError> {
    let in_map = model.kernels().incoming_sum_map()?;
    let out_map = model.kernels().outgoing_sum_map()?;
    write_snapshot(out.join("incoming_weights.aca"), &in_map, model.step_index() as u32)?;
    write_snapshot(out.join("outgoing_weights.aca"), &out_map, model.step_index() as u32)?;
    write_pgm(out.join("incoming_weights.pgm"), &in_map, 0)?;
    write_pgm(out.join("outgoing_weights.pgm"), &out_map, 0)?;
    let tiles = model.width().min(15);
    let mosaic = kernel_mosaic(
        model.kernels(),
        model.ei(),
        model.width() / 2,
        model.height() / 2,
        tiles,
        tiles,
    )?;
    write_pgm(out.join("kernel_mosaic.pgm"), &mosaic, 0)?;
    Ok(())
}

pub fn run_rate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = cfg.out_dir.as_path();
    cfg.write_manifest(out)?;
    let rng = RandomField::new(cfg.seed);

    if cfg.rate.sweep {
        let n = cfg.rate.sweep_n;
        let p_e: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let g: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
        let sweep = phase_sweep::<f32>(
            cfg.rate.sweep_size,
            cfg.rate.to_params(),
            &p_e,
            &g,
            cfg.rate.steps.max(100) as usize,
            (cfg.rate.steps / 5).max(20) as usize,
            cfg.seed,
        )?;
        write_sweep(out, &sweep, cfg.rate.k_e, cfg.rate.k_i)?;
        println!("rate sweep: {} points written", sweep.mean_activity.len());
        return Ok(());
    }

    let size = cfg.rate.size;
    let mut model = RateModel::new(size, size, cfg.rate.to_params(), &rng)?;

    if let Some(image_path) = &cfg.rate.image {
        let image: Grid<f32> = read_pgm(image_path)?;
        let res = imprint_image(&mut model, &image, 1e-5, cfg.rate.steps as usize)?;
        write_rate_maps(out, &model)?;
        let mut c = csv(
            &out.join("imprint.csv"),
            &["steps_run", "converged", "corr_incoming", "corr_outgoing"],
        )?;
        c.write_raw_row(&[
            res.steps_run.to_string(),
            res.converged.to_string(),
            res.correlation_in
                .map(CsvWriter::format_value)
                .unwrap_or_else(|| "undefined".to_string()),
            res.correlation_out
                .map(CsvWriter::format_value)
                .unwrap_or_else(|| "undefined".to_string()),
        ])?;
        c.flush()?;
        println!(
            "rate imprint: {} steps (converged: {}), corr(in)={:?}",
            res.steps_run, res.converged, res.correlation_in
        );
        return Ok(());
    }

    let mut ts = csv(&out.join("timeseries.csv"), &["step", "mean_rate", "rate_cv"])?;
    for step in 0..cfg.rate.steps {
        model.tick();
        let (mean, std) = mean_std(model.rates());
        ts.write_row(&[
            step as f64,
            mean,
            if mean > 0.0 { std / mean } else { 0.0 },
        ])?;
        if cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0 {
            write_snapshot(
                out.join(format!("rates_{:08}.aca", step + 1)),
                model.rate_grid(),
                (step + 1) as u32,
            )?;
        }
    }
    ts.flush()?;
    write_snapshot(out.join("rates_final.aca"), model.rate_grid(), cfg.rate.steps as u32)?;
    write_pgm(out.join("rates_final.pgm"), model.rate_grid(), 0)?;
    write_rate_maps(out, &model)?;
    let (mean, _) = mean_std(model.rates());
    println!("rate: {} steps, mean rate {mean:.4}", cfg.rate.steps);
    Ok(())
}

pub fn run_spiking(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = cfg.out_dir.as_path();
    cfg.write_manifest(out)?;
    let rng = RandomField::new(cfg.seed);
    let size = cfg.spiking.size;
    let mut model = SpikingModel::new(size, size, cfg.spiking.to_params(), &rng)?;
    let mut recorder = SpikeRecorder::new(size * size);

    if let Some(image_path) = &cfg.spiking.image {
        let image: Grid<f32> = read_pgm(image_path)?;
        let proto = StimulusProtocol {
            t_on: cfg.spiking.stim_on,
            t_off: cfg.spiking.stim_off,
            amplitude: cfg.spiking.stim_amp,
            total_ticks: cfg.spiking.steps,
            window: cfg.spiking.tau_th as u64,
        };
        let probe = present_stimulus_recorded(&mut model, &image, proto, &rng, Some(&mut recorder))?;
        let mut c = csv(&out.join("threshold_correlation.csv"), &["tick", "corr"])?;
        for (t, v) in probe.threshold_corr.iter().enumerate() {
            c.write_raw_row(&[
                t.to_string(),
                if v.is_nan() {
                    "undefined".to_string()
                } else {
                    CsvWriter::format_value(*v)
                },
            ])?;
        }
        c.flush()?;
    } else {
        for step in 0..cfg.spiking.steps {
            model.tick(&rng).map_err(CliError::from)?;
            recorder.record(model.spikes());
            if cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0 {
                write_snapshot(
                    out.join(format!("channels_{:08}.aca", step + 1)),
                    &model.to_grid(),
                    (step + 1) as u32,
                )?;
            }
        }
    }

    // sparse raster
    let mut raster = csv(&out.join("raster.csv"), &["tick", "x", "y"])?;
    for (t, cell) in recorder.iter_events() {
        raster.write_raw_row(&[
            t.to_string(),
            (cell % size).to_string(),
            (cell / size).to_string(),
        ])?;
    }
    raster.flush()?;

    // statistics
    let stats = spike_statistics(&recorder, 5);
    let mut cells = csv(&out.join("stats_cells.csv"), &["cell", "x", "y", "rate"])?;
    for (i, &r) in stats.rates.iter().enumerate() {
        cells.write_raw_row(&[
            i.to_string(),
            (i % size).to_string(),
            (i / size).to_string(),
            CsvWriter::format_value(r),
        ])?;
    }
    cells.flush()?;
    let mut summary = csv(
        &out.join("stats_summary.csv"),
        &[
            "mean_rate",
            "rate_dispersion",
            "mean_isi_cv",
            "cv_cells",
            "synchrony",
            "empty",
        ],
    )?;
    summary.write_raw_row(&[
        CsvWriter::format_value(stats.mean_rate),
        CsvWriter::format_value(stats.rate_dispersion),
        CsvWriter::format_value(stats.mean_isi_cv),
        stats.isi_cvs.len().to_string(),
        CsvWriter::format_value(stats.synchrony),
        stats.empty.to_string(),
    ])?;
    summary.flush()?;

    // final channel snapshot and per-channel renders
    let packed = model.to_grid();
    write_snapshot(out.join("channels_final.aca"), &packed, cfg.spiking.steps as u32)?;
    for (ch, name) in ["v", "s", "e", "v_th", "a"].iter().enumerate() {
        write_pgm(out.join(format!("channel_{name}.pgm")), &packed, ch)?;
    }
    println!(
        "spiking: {} ticks, rate {:.4}, ISI CV {:.3}, synchrony {:.2}",
        cfg.spiking.steps, stats.mean_rate, stats.mean_isi_cv, stats.synchrony
    );
    Ok(())
}

pub fn run_bench(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = cfg.out_dir.as_path();
    cfg.write_manifest(out)?;
    let variants: Vec<crate::bench::KernelVariant> = cfg
        .bench
        .variants
        .iter()
        .map(|v| crate::bench::KernelVariant::parse(v).expect("validated"))
        .collect();
    let report = crate::bench::run_benchmark(
        &cfg.bench.sizes,
        &variants,
        cfg.bench.steps,
        cfg.bench.warmup,
        cfg.seed,
    )?;
    crate::bench::write_report(&report, &out.join("bench.csv"))?;
    for p in &report.points {
        if p.ok {
            println!(
                "bench {} {:>5}: {:.3} ms/step, {:.2e} cells/s, {} MB",
                p.variant.name(),
                p.size,
                p.median_step_secs * 1e3,
                p.cells_per_sec,
                p.mem_bytes / (1024 * 1024)
            );
        } else {
            println!(
                "bench {} {:>5}: FAILED ({})",
                p.variant.name(),
                p.size,
                p.error.as_deref().unwrap_or("unknown")
            );
        }
    }
    Ok(())
}
