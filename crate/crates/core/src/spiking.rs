//! Energy-gated leaky integrate-and-fire CA with five coupled channels.
//!
//! Channels: membrane voltage `V`, binary spikes `S`, energy `E`, adaptive
//! threshold offset `V_th` and spike trace `A`. Each linear channel is
//! advanced with its exact per-tick exponential solution (impulses applied
//! discretely), so single-cell trajectories reproduce the closed forms to
//! rounding error. Pass order within a tick is fixed:
//! input/integrate -> spike/reset -> energy -> trace -> threshold ->
//! (every N ticks) plasticity.
//!
//! A spike requires both `V >= v_th0 + V_th` and `E >= e_min`. The membrane
//! optionally receives per-tick white noise (`v_noise`), which together with
//! the quenched spread of the baseline current puts the default network in
//! an asynchronous irregular regime.

use rayon::prelude::*;

use crate::analysis::pearson;
use crate::error::{Error, Result};
use crate::float::Real;
use crate::grid::Grid;
use crate::kernels::{
    weighted_input_per_cell, weighted_input_shared, EiField, KernelGrid, Kernels, NormScope,
    SharedKernel,
};
use crate::rng::{RandomField, INIT_STEP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikingParams<T> {
    pub radius: usize,
    pub p_e: f64,
    /// Relative inhibitory weight scale.
    pub g: T,
    /// Membrane time constant.
    pub tau: T,
    /// Energy time constant.
    pub tau_e: T,
    /// Trace time constant.
    pub tau_a: T,
    /// Threshold-adaptation time constant.
    pub tau_th: T,
    pub dt: T,
    /// Target energy.
    pub e0: T,
    /// Minimum energy required to spike.
    pub e_min: T,
    /// Energy cost of one spike.
    pub s_c: T,
    /// Energy replenishment rate.
    pub eps_e: T,
    /// Target firing rate for threshold adaptation.
    pub rho0: T,
    /// Threshold adaptation gain.
    pub eta_th: T,
    /// Baseline threshold added to the adaptive offset.
    pub v_th0: T,
    pub v_reset: T,
    /// Mean baseline current; per-cell values are quenched uniform draws in
    /// `[c_mean - c_jitter, c_mean + c_jitter]`.
    pub c_mean: T,
    pub c_jitter: T,
    /// Per-tick membrane noise amplitude (0 disables the noise draws).
    pub v_noise: T,
    /// Per-cell outgoing weight budgets (see `norm_scope`).
    pub k_e: T,
    pub k_i: T,
    pub w_init: T,
    pub norm_scope: NormScope,
    pub plasticity_on: bool,
    /// Plasticity cadence in ticks.
    pub plasticity_every: u64,
    pub lr_e: T,
    pub lr_i: T,
}

impl<T: Real> Default for SpikingParams<T> {
    fn default() -> Self {
        Self {
            radius: 2,
            p_e: 0.8,
            g: T::of(5.0),
            tau: T::of(10.0),
            tau_e: T::of(200.0),
            tau_a: T::of(20.0),
            tau_th: T::of(500.0),
            dt: T::one(),
            e0: T::one(),
            e_min: T::of(0.2),
            s_c: T::of(0.1),
            eps_e: T::one(),
            rho0: T::of(0.02),
            eta_th: T::of(5.0),
            v_th0: T::one(),
            v_reset: T::zero(),
            c_mean: T::of(2.2),
            c_jitter: T::of(1.8),
            v_noise: T::of(0.6),
            k_e: T::of(60.0),
            k_i: T::of(60.0),
            w_init: T::one(),
            norm_scope: NormScope::GlobalPerType,
            plasticity_on: false,
            plasticity_every: 10,
            lr_e: T::of(1e-3),
            lr_i: T::of(1e-3),
        }
    }
}

/// Draw index of the per-tick membrane noise (consumes two draws).
const NOISE_DRAW: u32 = 0;
/// Initialization draw indices (on top of the kernel-slot draws).
const INIT_DRAW_V: u32 = 1;
const INIT_DRAW_C: u32 = 2;

pub struct SpikingModel<T> {
    pub params: SpikingParams<T>,
    v: Grid<T>,
    s: Grid<T>,
    e: Grid<T>,
    v_th: Grid<T>,
    a: Grid<T>,
    kernels: Kernels<T>,
    ei: EiField,
    /// Quenched baseline current.
    c: Vec<T>,
    /// Additive stimulus current (empty when unused).
    stimulus: Vec<T>,
    input_buf: Vec<T>,
    step: u64,
}

impl<T: Real> SpikingModel<T> {
    pub fn new(width: usize, height: usize, params: SpikingParams<T>, rng: &RandomField) -> Result<Self> {
        Self::with_kernel_mode(width, height, params, rng, false)
    }

    /// `shared_kernel = true` builds the homogeneous-rule baseline: one
    /// signed kernel applied at every cell (plasticity unavailable).
    pub fn with_kernel_mode(
        width: usize,
        height: usize,
        params: SpikingParams<T>,
        rng: &RandomField,
        shared_kernel: bool,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&params.p_e) {
            return Err(Error::config(format!("p_e must be in [0,1], got {}", params.p_e)));
        }
        if params.dt <= T::zero() {
            return Err(Error::config("dt must be positive".to_string()));
        }
        if params.plasticity_every == 0 {
            return Err(Error::config("plasticity_every must be positive".to_string()));
        }
        if params.plasticity_on && shared_kernel {
            return Err(Error::config(
                "plasticity requires per-cell kernels".to_string(),
            ));
        }
        let kernels = if shared_kernel {
            // scale the shared kernel so total drive matches the per-cell
            // budget on average
            let k2 = (2 * params.radius + 1) * (2 * params.radius + 1);
            let w0 = params.k_e / T::of((k2 - 1) as f64 / 2.0);
            Kernels::Shared {
                width,
                height,
                kernel: SharedKernel::random(params.radius, w0, params.p_e, rng),
            }
        } else {
            let mut kg = KernelGrid::try_new(width, height, params.radius)?;
            kg.init_uniform(params.w_init, rng);
            Kernels::PerCell(kg)
        };
        let k2 = (2 * params.radius + 1) * (2 * params.radius + 1);
        let ei = EiField::random(width, height, params.p_e, rng, k2 as u32);
        if let Kernels::PerCell(kg) = &kernels {
            let mut kg = kg.clone();
            kg.normalize(&ei, params.norm_scope, params.k_e, params.k_i);
            return Self::assemble(width, height, params, rng, Kernels::PerCell(kg), ei);
        }
        Self::assemble(width, height, params, rng, kernels, ei)
    }

    fn assemble(
        width: usize,
        height: usize,
        params: SpikingParams<T>,
        rng: &RandomField,
        kernels: Kernels<T>,
        ei: EiField,
    ) -> Result<Self> {
        let n = width * height;
        let k2 = (2 * params.radius + 1) * (2 * params.radius + 1);
        let v = Grid::from_fn(width, height, 1, |x, y, _| {
            rng.uniform_as::<T>(INIT_STEP, (y * width + x) as u64, k2 as u32 + INIT_DRAW_V)
                * params.v_th0
        })?;
        let c = (0..n)
            .map(|cell| {
                let u = rng.uniform_as::<T>(INIT_STEP, cell as u64, k2 as u32 + INIT_DRAW_C);
                params.c_mean + (u + u - T::one()) * params.c_jitter
            })
            .collect();
        Ok(Self {
            v,
            s: Grid::new(width, height, 1)?,
            e: Grid::filled(width, height, 1, params.e0)?,
            v_th: Grid::new(width, height, 1)?,
            a: Grid::new(width, height, 1)?,
            kernels,
            ei,
            c,
            stimulus: Vec::new(),
            input_buf: vec![T::zero(); n],
            params,
            step: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.v.width()
    }

    pub fn height(&self) -> usize {
        self.v.height()
    }

    pub fn cells(&self) -> usize {
        self.v.cells()
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn voltages(&self) -> &[T] {
        self.v.channel(0)
    }

    pub fn spikes(&self) -> &[T] {
        self.s.channel(0)
    }

    pub fn energies(&self) -> &[T] {
        self.e.channel(0)
    }

    pub fn thresholds(&self) -> &[T] {
        self.v_th.channel(0)
    }

    pub fn traces(&self) -> &[T] {
        self.a.channel(0)
    }

    pub fn ei(&self) -> &EiField {
        &self.ei
    }

    pub fn kernels(&self) -> &Kernels<T> {
        &self.kernels
    }

    /// Overwrite the voltage channel (trajectory tests, custom protocols).
    pub fn fill_voltage(&mut self, v: T) {
        self.v.channel_mut(0).fill(v);
    }

    pub fn fill_energy(&mut self, e: T) {
        self.e.channel_mut(0).fill(e);
    }

    pub fn fill_trace(&mut self, a: T) {
        self.a.channel_mut(0).fill(a);
    }

    pub fn fill_threshold(&mut self, th: T) {
        self.v_th.channel_mut(0).fill(th);
    }

    /// Overwrite the spike channel (1 where true).
    pub fn force_spikes(&mut self, spikes: &[bool]) {
        for (slot, &b) in self.s.channel_mut(0).iter_mut().zip(spikes) {
            *slot = if b { T::one() } else { T::zero() };
        }
    }

    /// Additive stimulus current, active until cleared.
    pub fn set_stimulus(&mut self, stim: &Grid<T>, amplitude: T) -> Result<()> {
        if stim.width() != self.width() || stim.height() != self.height() || stim.channels() != 1 {
            return Err(Error::config(format!(
                "stimulus {}x{} does not match grid {}x{}",
                stim.width(),
                stim.height(),
                self.width(),
                self.height()
            )));
        }
        self.stimulus = stim.channel(0).iter().map(|&p| p * amplitude).collect();
        Ok(())
    }

    pub fn clear_stimulus(&mut self) {
        self.stimulus.clear();
    }

    /// Pack the five channels into one grid (snapshot layout:
    /// V, S, E, V_th, A).
    pub fn to_grid(&self) -> Grid<T> {
        let (w, h) = (self.width(), self.height());
        let mut g = Grid::new(w, h, 5).unwrap();
        for (ch, src) in [&self.v, &self.s, &self.e, &self.v_th, &self.a].iter().enumerate() {
            g.channel_mut(ch).copy_from_slice(src.channel(0));
        }
        g
    }

    /// Recurrent input plus exact leaky integration; cells that spiked last
    /// tick were already reset there.
    pub fn integrate_voltage(&mut self, rng: &RandomField) {
        let p = &self.params;
        match &self.kernels {
            Kernels::PerCell(kg) => {
                weighted_input_per_cell(kg, &self.ei, p.g, self.s.channel(0), &mut self.input_buf)
            }
            Kernels::Shared {
                width,
                height,
                kernel,
            } => weighted_input_shared(kernel, *width, *height, self.s.channel(0), &mut self.input_buf),
        }
        let decay = (-p.dt / p.tau).exp();
        let noise = p.v_noise;
        let step = self.step;
        let c = &self.c;
        let stim = &self.stimulus;
        let input = &self.input_buf;
        let w = self.width();
        self.v
            .channel_mut(0)
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, v) in row.iter_mut().enumerate() {
                    let cell = y * w + x;
                    let mut v_inf = input[cell] + c[cell];
                    if !stim.is_empty() {
                        v_inf += stim[cell];
                    }
                    let mut next = v_inf + (*v - v_inf) * decay;
                    if noise > T::zero() {
                        next += noise * T::of(rng.normal(step, cell as u64, NOISE_DRAW));
                    }
                    *v = next;
                }
            });
    }

    /// Threshold crossing gated by the energy floor; spiking cells reset.
    pub fn spike_and_reset(&mut self) {
        let p = &self.params;
        let v_th0 = p.v_th0;
        let e_min = p.e_min;
        let v_reset = p.v_reset;
        let th = self.v_th.channel(0);
        let e = self.e.channel(0);
        let v = self.v.channel_mut(0);
        self.s
            .channel_mut(0)
            .par_iter_mut()
            .zip(v.par_iter_mut())
            .enumerate()
            .for_each(|(i, (s, v))| {
                if *v >= v_th0 + th[i] && e[i] >= e_min {
                    *s = T::one();
                    *v = v_reset;
                } else {
                    *s = T::zero();
                }
            });
    }

    /// Exact relaxation toward the target energy minus the per-spike cost.
    pub fn energy_update(&mut self) {
        let p = &self.params;
        let decay = (-p.eps_e * p.dt / p.tau_e).exp();
        let e0 = p.e0;
        let s_c = p.s_c;
        let s = self.s.channel(0);
        self.e
            .channel_mut(0)
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, e)| {
                *e = (e0 + (*e - e0) * decay - s_c * s[i]).max(T::zero());
            });
    }

    /// Exact trace decay plus a unit impulse per spike.
    pub fn trace_update(&mut self) {
        let p = &self.params;
        let decay = (-p.dt / p.tau_a).exp();
        let s = self.s.channel(0);
        self.a
            .channel_mut(0)
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, a)| {
                *a = *a * decay + s[i];
            });
    }

    /// Exact relaxation of the threshold offset toward
    /// `eta_th * (A - rho0)`.
    pub fn threshold_update(&mut self) {
        let p = &self.params;
        let decay = (-p.dt / p.tau_th).exp();
        let eta = p.eta_th;
        let rho0 = p.rho0;
        let a = self.a.channel(0);
        self.v_th
            .channel_mut(0)
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, th)| {
                let tgt = eta * (a[i] - rho0);
                *th = tgt + (*th - tgt) * decay;
            });
    }

    /// The raw trace-based weight update, without normalization. Excitatory
    /// presynaptic connections grow with the symmetric Hebbian term
    /// `A_pre S_post + S_pre A_post`; inhibitory ones follow the homeostatic
    /// rule `A_pre (A_post - rho0 tau_a)`. Weights stay non-negative.
    pub fn plasticity_deltas(&mut self) -> Result<()> {
        let p = self.params;
        let (w, h) = (self.width(), self.height());
        let kg = match &mut self.kernels {
            Kernels::PerCell(kg) => kg,
            Kernels::Shared { .. } => {
                return Err(Error::config(
                    "plasticity requires per-cell kernels".to_string(),
                ))
            }
        };
        let k2 = kg.k2();
        let offsets: Vec<(isize, isize)> = (0..k2).map(|s| kg.slot_offset(s)).collect();
        let a = self.a.channel(0);
        let s = self.s.channel(0);
        let ei = &self.ei;
        let a_target = p.rho0 * p.tau_a;
        kg.weights_mut()
            .par_chunks_exact_mut(k2)
            .enumerate()
            .for_each(|(cell, kw)| {
                let (x, y) = (cell % w, cell / w);
                let (a_post, s_post) = (a[cell], s[cell]);
                for (slot, wt) in kw.iter_mut().enumerate() {
                    if slot == k2 / 2 {
                        continue;
                    }
                    let (dx, dy) = offsets[slot];
                    let pre = crate::grid::wrap(y as isize + dy, h) * w
                        + crate::grid::wrap(x as isize + dx, w);
                    let d = if ei.is_excitatory(pre) {
                        p.lr_e * (a[pre] * s_post + s[pre] * a_post)
                    } else {
                        p.lr_i * a[pre] * (a_post - a_target)
                    };
                    *wt = (*wt + d).max(T::zero());
                }
            });
        Ok(())
    }

    /// Weight update followed by synapse-type normalization.
    pub fn synaptic_plasticity(&mut self) -> Result<()> {
        self.plasticity_deltas()?;
        let p = self.params;
        if let Kernels::PerCell(kg) = &mut self.kernels {
            kg.normalize(&self.ei, p.norm_scope, p.k_e, p.k_i);
        }
        Ok(())
    }

    /// One tick in the fixed pass order.
    pub fn tick(&mut self, rng: &RandomField) -> Result<()> {
        self.integrate_voltage(rng);
        self.spike_and_reset();
        self.energy_update();
        self.trace_update();
        self.threshold_update();
        if self.params.plasticity_on && self.step % self.params.plasticity_every == 0 {
            self.synaptic_plasticity()?;
        }
        self.step += 1;
        Ok(())
    }
}

/// Spike raster accumulated tick by tick.
#[derive(Debug, Clone)]
pub struct SpikeRecorder {
    n_cells: usize,
    ticks: u32,
    /// Spike ticks per cell.
    times: Vec<Vec<u32>>,
    /// Population spike count per tick.
    pop_counts: Vec<u32>,
}

impl SpikeRecorder {
    pub fn new(n_cells: usize) -> Self {
        Self {
            n_cells,
            ticks: 0,
            times: vec![Vec::new(); n_cells],
            pop_counts: Vec::new(),
        }
    }

    pub fn record<T: Real>(&mut self, spikes: &[T]) {
        debug_assert_eq!(spikes.len(), self.n_cells);
        let t = self.ticks;
        let mut count = 0u32;
        for (i, s) in spikes.iter().enumerate() {
            if *s > T::zero() {
                self.times[i].push(t);
                count += 1;
            }
        }
        self.pop_counts.push(count);
        self.ticks += 1;
    }

    /// Record a synthetic spike train (tests and oracles).
    pub fn record_bools(&mut self, spikes: &[bool]) {
        let as_t: Vec<f32> = spikes.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        self.record(&as_t);
    }

    pub fn ticks(&self) -> u32 {
        self.ticks
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn times(&self) -> &[Vec<u32>] {
        &self.times
    }

    pub fn iter_events(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.times
            .iter()
            .enumerate()
            .flat_map(|(cell, ts)| ts.iter().map(move |&t| (t, cell)))
    }
}

/// Raster statistics: per-cell rates, inter-spike-interval CVs and a
/// population synchrony index.
#[derive(Debug, Clone)]
pub struct SpikeStats {
    /// Per-cell firing rate (spikes per tick).
    pub rates: Vec<f64>,
    pub mean_rate: f64,
    /// std/mean of the per-cell rates.
    pub rate_dispersion: f64,
    /// ISI coefficient of variation per cell with at least `min_isis`
    /// intervals.
    pub isi_cvs: Vec<f64>,
    pub mean_isi_cv: f64,
    /// Variance of the population-mean signal relative to independence:
    /// ~1 for independent cells, ~N for full synchrony.
    pub synchrony: f64,
    /// No cell spiked.
    pub empty: bool,
}

pub fn spike_statistics(rec: &SpikeRecorder, min_isis: usize) -> SpikeStats {
    let t = rec.ticks() as f64;
    let n = rec.n_cells() as f64;
    let rates: Vec<f64> = rec.times().iter().map(|ts| ts.len() as f64 / t).collect();
    let total_spikes: usize = rec.times().iter().map(|v| v.len()).sum();
    if total_spikes == 0 {
        return SpikeStats {
            rates,
            mean_rate: 0.0,
            rate_dispersion: 0.0,
            isi_cvs: Vec::new(),
            mean_isi_cv: 0.0,
            synchrony: 0.0,
            empty: true,
        };
    }
    let (rate_mean, rate_std) = crate::analysis::mean_std(&rates);

    let mut isi_cvs = Vec::new();
    for ts in rec.times() {
        if ts.len() < min_isis + 1 {
            continue;
        }
        let isis: Vec<f64> = ts.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let (m, s) = crate::analysis::mean_std(&isis);
        if m > 0.0 {
            isi_cvs.push(s / m);
        }
    }
    let mean_isi_cv = if isi_cvs.is_empty() {
        0.0
    } else {
        isi_cvs.iter().sum::<f64>() / isi_cvs.len() as f64
    };

    // population-mean variance over ticks vs the independent-cell prediction
    let pop: Vec<f64> = rec.pop_counts.iter().map(|&c| c as f64 / n).collect();
    let (_, pop_std) = crate::analysis::mean_std(&pop);
    let mean_cell_var = rates.iter().map(|&p| p * (1.0 - p)).sum::<f64>() / n;
    let synchrony = if mean_cell_var > 0.0 {
        n * pop_std * pop_std / mean_cell_var
    } else {
        0.0
    };

    SpikeStats {
        rates,
        mean_rate: rate_mean,
        rate_dispersion: if rate_mean > 0.0 { rate_std / rate_mean } else { 0.0 },
        isi_cvs,
        mean_isi_cv,
        synchrony,
        empty: false,
    }
}

/// Stimulus-presentation protocol for the short-term-memory probe.
#[derive(Debug, Clone, Copy)]
pub struct StimulusProtocol {
    pub t_on: u64,
    pub t_off: u64,
    pub amplitude: f64,
    pub total_ticks: u64,
    /// Window length for the before/during/after rate maps.
    pub window: u64,
}

/// Memory-probe outcome: per-tick correlation of the threshold map with the
/// image, plus rate maps around the stimulus.
#[derive(Debug, Clone)]
pub struct MemoryProbe {
    /// Signed corr(V_th map, image) per tick (NaN where undefined).
    pub threshold_corr: Vec<f64>,
    /// True when the image itself has zero variance (correlation undefined).
    pub degenerate_image: bool,
    pub rate_before: Vec<f64>,
    pub rate_during: Vec<f64>,
    pub rate_after: Vec<f64>,
}

/// Drive the network with `image` during `[t_on, t_off)` and record how the
/// adaptive-threshold map tracks it.
pub fn present_stimulus<T: Real>(
    model: &mut SpikingModel<T>,
    image: &Grid<T>,
    proto: StimulusProtocol,
    rng: &RandomField,
) -> Result<MemoryProbe> {
    present_stimulus_recorded(model, image, proto, rng, None)
}

/// [`present_stimulus`] variant that also appends every tick's spikes to a
/// raster recorder.
pub fn present_stimulus_recorded<T: Real>(
    model: &mut SpikingModel<T>,
    image: &Grid<T>,
    proto: StimulusProtocol,
    rng: &RandomField,
    mut recorder: Option<&mut SpikeRecorder>,
) -> Result<MemoryProbe> {
    if image.width() != model.width() || image.height() != model.height() || image.channels() != 1 {
        return Err(Error::config(format!(
            "image {}x{} does not match grid {}x{}",
            image.width(),
            image.height(),
            model.width(),
            model.height()
        )));
    }
    if proto.t_on > proto.t_off || proto.t_off > proto.total_ticks {
        return Err(Error::config(
            "stimulus window must satisfy t_on <= t_off <= total_ticks".to_string(),
        ));
    }
    let n = model.cells();
    let (img_mean, img_std) = crate::analysis::mean_std(image.channel(0));
    let _ = img_mean;
    let degenerate_image = !(img_std > 0.0);

    let mut threshold_corr = Vec::with_capacity(proto.total_ticks as usize);
    let mut rate_before = vec![0.0f64; n];
    let mut rate_during = vec![0.0f64; n];
    let mut rate_after = vec![0.0f64; n];
    for t in 0..proto.total_ticks {
        if t == proto.t_on && proto.t_on < proto.t_off {
            model.set_stimulus(image, T::of(proto.amplitude))?;
        }
        if t == proto.t_off {
            model.clear_stimulus();
        }
        model.tick(rng)?;
        if let Some(rec) = recorder.as_deref_mut() {
            rec.record(model.spikes());
        }
        let corr = if degenerate_image {
            f64::NAN
        } else {
            pearson(model.thresholds(), image.channel(0))?.unwrap_or(f64::NAN)
        };
        threshold_corr.push(corr);

        let w = proto.window;
        let in_before = proto.t_on >= w && t >= proto.t_on - w && t < proto.t_on;
        let in_during = proto.t_off >= w && t >= proto.t_off - w && t < proto.t_off;
        let in_after = t >= proto.t_off && t < proto.t_off + w;
        if in_before || in_during || in_after {
            for (i, s) in model.spikes().iter().enumerate() {
                let v = s.f64();
                if in_before {
                    rate_before[i] += v;
                }
                if in_during {
                    rate_during[i] += v;
                }
                if in_after {
                    rate_after[i] += v;
                }
            }
        }
    }
    let w = proto.window.max(1) as f64;
    for v in rate_before.iter_mut().chain(&mut rate_during).chain(&mut rate_after) {
        *v /= w;
    }
    Ok(MemoryProbe {
        threshold_corr,
        degenerate_image,
        rate_before,
        rate_during,
        rate_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Decoupled, noise-free network for single-cell channel checks.
    fn isolated(side: usize) -> SpikingModel<f64> {
        let params = SpikingParams::<f64> {
            w_init: 0.0,
            v_noise: 0.0,
            c_mean: 0.0,
            c_jitter: 0.0,
            v_th0: 1e9, // never spike unless a test lowers it
            ..SpikingParams::default()
        };
        let mut m = SpikingModel::new(side, side, params, &RandomField::new(1)).unwrap();
        m.v.channel_mut(0).fill(0.0);
        m
    }

    #[test]
    fn voltage_decay_matches_closed_form() {
        let mut m = isolated(5);
        m.v.channel_mut(0).fill(2.0);
        let rng = RandomField::new(0);
        let tau = m.params.tau;
        for t in 1..=50u32 {
            m.integrate_voltage(&rng);
            let expect = 2.0 * (-(t as f64) * m.params.dt / tau).exp();
            let got = m.voltages()[7];
            assert!(
                ((got - expect) / expect).abs() < 0.01,
                "t={t}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn voltage_approaches_constant_input() {
        let mut m = isolated(5);
        m.c.fill(3.0);
        let rng = RandomField::new(0);
        for _ in 0..200 {
            m.integrate_voltage(&rng);
        }
        for &v in m.voltages() {
            assert_relative_eq!(v, 3.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn presynaptic_spike_kicks_voltage() {
        // one presynaptic spike with weight w moves V by (1 - e^{-dt/tau}) w
        let params = SpikingParams::<f64> {
            w_init: 0.0,
            v_noise: 0.0,
            c_mean: 0.0,
            c_jitter: 0.0,
            v_th0: 1e9,
            p_e: 1.0,
            norm_scope: NormScope::IncomingPerCell,
            k_e: 0.0, // zero targets leave manual weights intact? no: set below
            ..SpikingParams::default()
        };
        let mut m = SpikingModel::new(6, 6, params, &RandomField::new(2)).unwrap();
        m.v.channel_mut(0).fill(0.0);
        let post = 2 * 6 + 2;
        let w = 1.5f64;
        if let Kernels::PerCell(kg) = &mut m.kernels {
            // slot with offset (-1, 0): presynaptic cell (1, 2)
            let slot = (0..kg.k2()).find(|&s| kg.slot_offset(s) == (-1, 0)).unwrap();
            kg.cell_weights_mut(post)[slot] = w;
        }
        m.s.channel_mut(0)[2 * 6 + 1] = 1.0;
        let rng = RandomField::new(0);
        m.integrate_voltage(&rng);
        let expect = (1.0 - (-0.1f64).exp()) * w;
        assert_relative_eq!(m.voltages()[post], expect, epsilon = 1e-12);
    }

    #[test]
    fn spike_requires_energy() {
        let mut m = isolated(5);
        m.params.v_th0 = 1.0;
        m.v.channel_mut(0).fill(2.0); // above threshold
        m.e.channel_mut(0).fill(0.1); // below e_min = 0.2
        m.spike_and_reset();
        assert!(m.spikes().iter().all(|&s| s == 0.0));
        // boundary case: V == threshold and E == e_min both inclusive
        m.v.channel_mut(0).fill(1.0);
        m.e.channel_mut(0).fill(0.2);
        m.spike_and_reset();
        assert!(m.spikes().iter().all(|&s| s == 1.0));
        assert!(m.voltages().iter().all(|&v| v == m.params.v_reset));
    }

    #[test]
    fn subthreshold_cells_do_not_spike_or_reset() {
        let mut m = isolated(5);
        m.params.v_th0 = 5.0;
        m.v.channel_mut(0).fill(1.0);
        m.spike_and_reset();
        assert!(m.spikes().iter().all(|&s| s == 0.0));
        assert!(m.voltages().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn energy_fixed_point_and_spike_cost() {
        let mut m = isolated(5);
        // no spikes: E stays at target
        m.energy_update();
        assert!(m.energies().iter().all(|&e| (e - 1.0).abs() < 1e-12));
        // one spike drops exactly s_c
        m.s.channel_mut(0)[0] = 1.0;
        m.energy_update();
        assert_relative_eq!(m.energies()[0], 1.0 - 0.1, epsilon = 1e-12);
        assert_relative_eq!(m.energies()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_relaxation_matches_closed_form() {
        let mut m = isolated(5);
        m.e.channel_mut(0).fill(0.0);
        for t in 1..=400u32 {
            m.energy_update();
            let expect = 1.0 - (-(t as f64) * 1.0 * 1.0 / 200.0).exp();
            let got = m.energies()[3];
            assert!(
                (got - expect).abs() / expect.max(1e-9) < 0.01,
                "t={t}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn trace_decays_and_jumps() {
        let mut m = isolated(5);
        m.a.channel_mut(0).fill(1.0);
        m.trace_update();
        let decay = (-1.0f64 / 20.0).exp();
        assert_relative_eq!(m.traces()[0], decay, epsilon = 1e-12);
        // one spike adds exactly one
        m.s.channel_mut(0)[0] = 1.0;
        m.trace_update();
        assert_relative_eq!(m.traces()[0], decay * decay + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_mean_tracks_rate_times_tau() {
        // Bernoulli spiking at rho: time-averaged A ~= rho * tau_a within 5%
        let mut m = isolated(5);
        let rho = 0.05f64;
        let rf = RandomField::new(33);
        let mut sum = 0.0;
        let ticks = 100_000u32;
        for t in 0..ticks {
            for (cell, s) in m.s.channel_mut(0).iter_mut().enumerate() {
                *s = if rf.uniform(t as u64, cell as u64, 9) < rho {
                    1.0
                } else {
                    0.0
                };
            }
            m.trace_update();
            sum += m.traces()[12];
        }
        let mean_a = sum / ticks as f64;
        let expect = rho * 20.0;
        assert!(
            ((mean_a - expect) / expect).abs() < 0.05,
            "mean A {mean_a} vs {expect}"
        );
    }

    #[test]
    fn threshold_relaxes_to_zero_at_target_trace() {
        let mut m = isolated(5);
        m.a.channel_mut(0).fill(0.02); // A == rho0
        m.v_th.channel_mut(0).fill(3.0);
        for _ in 0..6000 {
            m.threshold_update();
        }
        assert!(m.thresholds().iter().all(|&t| t.abs() < 1e-4));
    }

    #[test]
    fn threshold_step_response_matches_closed_form() {
        let mut m = isolated(5);
        m.a.channel_mut(0).fill(0.5);
        let tgt = 5.0 * (0.5 - 0.02);
        for t in 1..=1000u32 {
            m.threshold_update();
            let expect = tgt * (1.0 - (-(t as f64) / 500.0).exp());
            let got = m.thresholds()[6];
            assert!(
                (got - expect).abs() / tgt < 0.01,
                "t={t}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn silent_network_has_no_plasticity() {
        let params = SpikingParams::<f64> {
            plasticity_on: true,
            plasticity_every: 1,
            v_noise: 0.0,
            c_mean: 0.0,
            c_jitter: 0.0,
            v_th0: 1e9,
            ..SpikingParams::default()
        };
        let mut m = SpikingModel::new(6, 6, params, &RandomField::new(3)).unwrap();
        let before = match &m.kernels {
            Kernels::PerCell(kg) => kg.weights().to_vec(),
            _ => unreachable!(),
        };
        // the raw update is exactly a no-op on a silent network
        m.plasticity_deltas().unwrap();
        let after_deltas = match &m.kernels {
            Kernels::PerCell(kg) => kg.weights().to_vec(),
            _ => unreachable!(),
        };
        assert_eq!(before, after_deltas);
        // full ticks include the (idempotent) normalization
        let rng = RandomField::new(4);
        for _ in 0..20 {
            m.tick(&rng).unwrap();
        }
        let after = match &m.kernels {
            Kernels::PerCell(kg) => kg.weights().to_vec(),
            _ => unreachable!(),
        };
        for (a, b) in before.iter().zip(&after) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn homeostatic_plasticity_zero_at_target_trace() {
        // inhibitory presyn with postsynaptic trace at rho0 * tau_a
        let params = SpikingParams::<f64> {
            p_e: 0.0,
            v_noise: 0.0,
            norm_scope: NormScope::IncomingPerCell,
            ..SpikingParams::default()
        };
        let mut m = SpikingModel::new(6, 6, params, &RandomField::new(5)).unwrap();
        m.a.channel_mut(0).fill(0.02 * 20.0);
        let before = match &m.kernels {
            Kernels::PerCell(kg) => kg.weights().to_vec(),
            _ => unreachable!(),
        };
        m.synaptic_plasticity().unwrap();
        let after = match &m.kernels {
            Kernels::PerCell(kg) => kg.weights().to_vec(),
            _ => unreachable!(),
        };
        for (a, b) in before.iter().zip(&after) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn plasticity_matches_dense_oracle() {
        let side = 5usize;
        let n = side * side;
        let params = SpikingParams::<f64> {
            radius: 1,
            plasticity_on: true,
            ..SpikingParams::default()
        };
        let mut m = SpikingModel::new(side, side, params, &RandomField::new(6)).unwrap();
        for (i, (s, a)) in m
            .s
            .channel_mut(0)
            .iter_mut()
            .zip(m.a.channel_mut(0).iter_mut())
            .enumerate()
        {
            *s = if i % 3 == 0 { 1.0 } else { 0.0 };
            *a = (i % 7) as f64 / 7.0;
        }
        let spikes: Vec<f64> = m.spikes().to_vec();
        let traces: Vec<f64> = m.traces().to_vec();

        // dense N x N reference restricted to the kernel windows
        let kg = match &m.kernels {
            Kernels::PerCell(kg) => kg.clone(),
            _ => unreachable!(),
        };
        let mut dense = vec![vec![0.0f64; n]; n];
        for y in 0..side {
            for x in 0..side {
                let post = y * side + x;
                for (slot, &wt) in kg.cell_weights(post).iter().enumerate() {
                    if slot == kg.k2() / 2 {
                        continue;
                    }
                    let pre = kg.presyn_index(x, y, slot);
                    let d = if m.ei.is_excitatory(pre) {
                        1e-3 * (traces[pre] * spikes[post] + spikes[pre] * traces[post])
                    } else {
                        1e-3 * traces[pre] * (traces[post] - 0.02 * 20.0)
                    };
                    dense[pre][post] = (wt + d).max(0.0);
                }
            }
        }

        m.plasticity_deltas().unwrap();
        let updated = match &m.kernels {
            Kernels::PerCell(kg) => kg.clone(),
            _ => unreachable!(),
        };
        for y in 0..side {
            for x in 0..side {
                let post = y * side + x;
                for slot in 0..updated.k2() {
                    if slot == updated.k2() / 2 {
                        continue;
                    }
                    let pre = updated.presyn_index(x, y, slot);
                    assert_relative_eq!(
                        updated.cell_weights(post)[slot],
                        dense[pre][post],
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn empty_stimulus_window_is_bitwise_identical() {
        let run = |with_stim: bool| {
            let rng = RandomField::new(7);
            let mut m =
                SpikingModel::<f32>::new(8, 8, SpikingParams::default(), &rng).unwrap();
            let img = Grid::from_fn(8, 8, 1, |x, _, _| if x < 4 { 0.0f32 } else { 1.0 }).unwrap();
            if with_stim {
                let proto = StimulusProtocol {
                    t_on: 10,
                    t_off: 10,
                    amplitude: 4.0,
                    total_ticks: 50,
                    window: 5,
                };
                present_stimulus(&mut m, &img, proto, &rng).unwrap();
            } else {
                for _ in 0..50 {
                    m.tick(&rng).unwrap();
                }
            }
            m.voltages().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(true), run(false));
    }

    #[test]
    fn zero_contrast_image_flags_degenerate() {
        let rng = RandomField::new(8);
        let mut m = SpikingModel::<f32>::new(8, 8, SpikingParams::default(), &rng).unwrap();
        let img = Grid::<f32>::filled(8, 8, 1, 0.7).unwrap();
        let proto = StimulusProtocol {
            t_on: 5,
            t_off: 10,
            amplitude: 1.0,
            total_ticks: 20,
            window: 5,
        };
        let probe = present_stimulus(&mut m, &img, proto, &rng).unwrap();
        assert!(probe.degenerate_image);
        assert!(probe.threshold_corr.iter().all(|c| c.is_nan()));
    }

    #[test]
    fn statistics_periodic_train_has_zero_cv() {
        let mut rec = SpikeRecorder::new(2);
        for t in 0..100u32 {
            rec.record_bools(&[t % 10 == 0, false]);
        }
        let stats = spike_statistics(&rec, 5);
        assert_eq!(stats.isi_cvs.len(), 1);
        assert_eq!(stats.isi_cvs[0], 0.0);
    }

    #[test]
    fn statistics_poisson_cv_near_one() {
        // Bernoulli(0.05) per tick: geometric ISIs, CV = sqrt(1 - p) ~ 0.975
        let rf = RandomField::new(9);
        let n = 1000usize;
        let mut rec = SpikeRecorder::new(n);
        for t in 0..20_000u32 {
            let spikes: Vec<bool> = (0..n)
                .map(|c| rf.uniform(t as u64, c as u64, 0) < 0.05)
                .collect();
            rec.record_bools(&spikes);
        }
        let stats = spike_statistics(&rec, 5);
        assert!(
            (0.95..=1.05).contains(&stats.mean_isi_cv),
            "mean CV {}",
            stats.mean_isi_cv
        );
        // independent cells: synchrony index near 1
        assert!(stats.synchrony < 1.3, "synchrony {}", stats.synchrony);
    }

    #[test]
    fn statistics_synchronized_raster_is_flagged() {
        let rf = RandomField::new(10);
        let n = 200usize;
        let mut rec = SpikeRecorder::new(n);
        for t in 0..5000u32 {
            let all = rf.uniform(t as u64, 0, 0) < 0.05;
            rec.record_bools(&vec![all; n]);
        }
        let stats = spike_statistics(&rec, 5);
        assert!(stats.synchrony > 50.0, "synchrony {}", stats.synchrony);
    }

    #[test]
    fn statistics_empty_raster_flagged() {
        let mut rec = SpikeRecorder::new(4);
        for _ in 0..100 {
            rec.record_bools(&[false; 4]);
        }
        assert!(spike_statistics(&rec, 5).empty);
    }

    #[test]
    fn energy_gate_never_violated_in_closed_loop() {
        // raster-level assertion: no spike ever coincides with E below the
        // floor at spike time (checked against pre-update energy)
        let rng = RandomField::new(11);
        let mut m = SpikingModel::<f32>::new(16, 16, SpikingParams::default(), &rng).unwrap();
        for _ in 0..500 {
            let e_before: Vec<f32> = m.energies().to_vec();
            m.integrate_voltage(&rng);
            m.spike_and_reset();
            for (i, &s) in m.spikes().iter().enumerate() {
                if s > 0.0 {
                    assert!(e_before[i] >= m.params.e_min);
                }
            }
            m.energy_update();
            m.trace_update();
            m.threshold_update();
            m.step += 1;
        }
    }
}
