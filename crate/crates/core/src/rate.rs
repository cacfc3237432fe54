//! Wilson-Cowan rate network on a 2D grid with local connectivity.
//!
//! Each cell carries an activity `r` in `[0, 1]` driven by a sigmoidal gain
//! with saturation, a per-cell incoming kernel, an excitatory/inhibitory
//! type, and a constant input current. Excitatory synapses learn with a
//! Hebbian product rule; inhibitory synapses with a homeostatic rule pulling
//! postsynaptic rates toward a target. Weight normalization is
//! synapse-type-specific (see [`NormScope`]).

use rayon::prelude::*;

use crate::analysis::{mean_std, pearson};
use crate::error::{Error, Result};
use crate::float::Real;
use crate::grid::Grid;
use crate::kernels::{weighted_input_per_cell, EiField, KernelGrid, NormScope};
use crate::rng::{RandomField, INIT_STEP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams<T> {
    /// Connectivity radius (kernel side 2R+1).
    pub radius: usize,
    /// Probability that a cell is excitatory.
    pub p_e: f64,
    /// Relative inhibitory weight scale.
    pub g: T,
    /// Time constant (unitless).
    pub tau: T,
    /// Euler step.
    pub dt: T,
    /// Sigmoid slope.
    pub sigmoid_a: T,
    /// Sigmoid threshold.
    pub sigmoid_theta: T,
    /// Constant input current (uniform; image input replaces it per cell).
    pub c0: T,
    /// Homeostatic target rate for inhibitory plasticity.
    pub beta: T,
    pub lr_e: T,
    pub lr_i: T,
    /// Per-cell weight budgets for normalization.
    pub k_e: T,
    pub k_i: T,
    /// Initial weight scale (i.i.d. uniform `[0, w_init]`).
    pub w_init: T,
    pub norm_scope: NormScope,
    pub hebbian_on: bool,
    pub inhibitory_on: bool,
    pub normalize_on: bool,
}

impl<T: Real> Default for RateParams<T> {
    fn default() -> Self {
        Self {
            radius: 2,
            p_e: 0.8,
            g: T::of(4.0),
            tau: T::of(10.0),
            dt: T::one(),
            sigmoid_a: T::of(4.0),
            sigmoid_theta: T::one(),
            c0: T::one(),
            beta: T::of(0.1),
            lr_e: T::of(1e-3),
            lr_i: T::of(1e-3),
            k_e: T::one(),
            k_i: T::one(),
            w_init: T::of(0.2),
            norm_scope: NormScope::GlobalPerType,
            hebbian_on: true,
            inhibitory_on: true,
            normalize_on: true,
        }
    }
}

pub struct RateModel<T> {
    pub params: RateParams<T>,
    r: Grid<T>,
    kernels: KernelGrid<T>,
    ei: EiField,
    /// Per-cell input current.
    c: Grid<T>,
    input_buf: Vec<T>,
    step: u64,
}

impl<T: Real> RateModel<T> {
    pub fn new(width: usize, height: usize, params: RateParams<T>, rng: &RandomField) -> Result<Self> {
        if !(0.0..=1.0).contains(&params.p_e) {
            return Err(Error::config(format!("p_e must be in [0,1], got {}", params.p_e)));
        }
        if params.dt <= T::zero() {
            return Err(Error::config("dt must be positive".to_string()));
        }
        let mut kernels = KernelGrid::try_new(width, height, params.radius)?;
        kernels.init_uniform(params.w_init, rng);
        let ei = EiField::random(width, height, params.p_e, rng, kernels.k2() as u32);
        kernels.normalize(&ei, params.norm_scope, params.k_e, params.k_i);
        // small random initial activity
        let r = Grid::from_fn(width, height, 1, |x, y, _| {
            rng.uniform_as::<T>(INIT_STEP, (y * width + x) as u64, (kernels.k2() + 1) as u32)
                * T::of(0.1)
        })?;
        let c = Grid::filled(width, height, 1, params.c0)?;
        let input_buf = vec![T::zero(); width * height];
        Ok(Self {
            params,
            r,
            kernels,
            ei,
            c,
            input_buf,
            step: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn rates(&self) -> &[T] {
        self.r.channel(0)
    }

    pub fn rate_grid(&self) -> &Grid<T> {
        &self.r
    }

    pub fn kernels(&self) -> &KernelGrid<T> {
        &self.kernels
    }

    pub fn ei(&self) -> &EiField {
        &self.ei
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Replace the input current field (shape-checked).
    pub fn set_input(&mut self, c: Grid<T>) -> Result<()> {
        if !c.same_shape(&self.c) {
            return Err(Error::shape(format!(
                "input {}x{} does not match grid {}x{}",
                c.width(),
                c.height(),
                self.width(),
                self.height()
            )));
        }
        self.c = c;
        Ok(())
    }

    /// One forward-Euler step of the rate dynamics; activity stays in [0, 1].
    pub fn advance_rates(&mut self) {
        let p = &self.params;
        // input pass reads r, writes input_buf
        weighted_input_per_cell(&self.kernels, &self.ei, p.g, self.r.channel(0), &mut self.input_buf);
        let a = p.sigmoid_a;
        let theta = p.sigmoid_theta;
        let dt_over_tau = p.dt / p.tau;
        let c = self.c.channel(0);
        let input = &self.input_buf;
        self.r
            .channel_mut(0)
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, r)| {
                let u = input[i] + c[i];
                let s = T::one() / (T::one() + (-a * (u - theta)).exp());
                let next = *r + dt_over_tau * (-*r + (T::one() - *r) * s);
                *r = next.max(T::zero()).min(T::one());
            });
        self.step += 1;
    }

    /// Hebbian growth on connections with excitatory presynaptic cells.
    pub fn hebbian_update(&mut self) {
        let (w, h) = (self.width(), self.height());
        let k2 = self.kernels.k2();
        let lr = self.params.lr_e;
        let rates = self.r.channel(0);
        let ei = &self.ei;
        let offsets: Vec<(isize, isize)> = (0..k2).map(|s| self.kernels.slot_offset(s)).collect();
        self.kernels
            .weights_mut()
            .par_chunks_exact_mut(k2)
            .enumerate()
            .for_each(|(cell, kw)| {
                let (x, y) = (cell % w, cell / w);
                let r_post = rates[cell];
                for (slot, wt) in kw.iter_mut().enumerate() {
                    if slot == k2 / 2 {
                        continue;
                    }
                    let (dx, dy) = offsets[slot];
                    let pre = crate::grid::wrap(y as isize + dy, h) * w
                        + crate::grid::wrap(x as isize + dx, w);
                    if ei.is_excitatory(pre) {
                        *wt = (*wt + lr * rates[pre] * r_post).max(T::zero());
                    }
                }
            });
    }

    /// Homeostatic update on connections with inhibitory presynaptic cells:
    /// `dW = lr * r_pre * (r_post - beta)`, clamped at zero from below.
    pub fn inhibitory_update(&mut self) {
        let (w, h) = (self.width(), self.height());
        let k2 = self.kernels.k2();
        let lr = self.params.lr_i;
        let beta = self.params.beta;
        let rates = self.r.channel(0);
        let ei = &self.ei;
        let offsets: Vec<(isize, isize)> = (0..k2).map(|s| self.kernels.slot_offset(s)).collect();
        self.kernels
            .weights_mut()
            .par_chunks_exact_mut(k2)
            .enumerate()
            .for_each(|(cell, kw)| {
                let (x, y) = (cell % w, cell / w);
                let r_post = rates[cell];
                for (slot, wt) in kw.iter_mut().enumerate() {
                    if slot == k2 / 2 {
                        continue;
                    }
                    let (dx, dy) = offsets[slot];
                    let pre = crate::grid::wrap(y as isize + dy, h) * w
                        + crate::grid::wrap(x as isize + dx, w);
                    if !ei.is_excitatory(pre) {
                        *wt = (*wt + lr * rates[pre] * (r_post - beta)).max(T::zero());
                    }
                }
            });
    }

    pub fn normalize_weights(&mut self) {
        let p = &self.params;
        self.kernels.normalize(&self.ei, p.norm_scope, p.k_e, p.k_i);
    }

    /// One full tick: dynamics, then the enabled plasticity passes.
    pub fn tick(&mut self) {
        self.advance_rates();
        let p = self.params;
        if p.hebbian_on {
            self.hebbian_update();
        }
        if p.inhibitory_on {
            self.inhibitory_update();
        }
        if (p.hebbian_on || p.inhibitory_on) && p.normalize_on {
            self.normalize_weights();
        }
    }

    /// Mean rate over cells that receive at least one inhibitory connection.
    pub fn mean_rate_of_inhibited_cells(&self) -> f64 {
        let (w, h) = (self.width(), self.height());
        let rates = self.r.channel(0);
        let mut sum = 0.0f64;
        let mut n = 0usize;
        for y in 0..h {
            for x in 0..w {
                let cell = y * w + x;
                let has_inh = (0..self.kernels.k2()).any(|slot| {
                    slot != self.kernels.k2() / 2
                        && !self.ei.is_excitatory(self.kernels.presyn_index(x, y, slot))
                });
                if has_inh {
                    sum += rates[cell].f64();
                    n += 1;
                }
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }
}

/// Tile the incoming kernels of an `nx x ny` block of cells (top-left at
/// `(x0, y0)`) into one image, one (2R+1)-sided tile per cell, with
/// presynaptic signs applied so inhibitory afferents render negative.
pub fn kernel_mosaic<T: Real>(
    kernels: &KernelGrid<T>,
    ei: &EiField,
    x0: usize,
    y0: usize,
    nx: usize,
    ny: usize,
) -> Result<Grid<T>> {
    let k = kernels.k();
    let mut out = Grid::new(nx * k, ny * k, 1)?;
    for ty in 0..ny {
        for tx in 0..nx {
            let x = (x0 + tx) % kernels.width();
            let y = (y0 + ty) % kernels.height();
            let cell = y * kernels.width() + x;
            for (slot, &w) in kernels.cell_weights(cell).iter().enumerate() {
                let pre = kernels.presyn_index(x, y, slot);
                let v = if ei.is_excitatory(pre) { w } else { -w };
                out.set(tx * k + slot % k, ty * k + slot / k, 0, v);
            }
        }
    }
    Ok(out)
}

/// Outcome of a phase-diagram sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub p_e_values: Vec<f64>,
    pub g_values: Vec<f64>,
    /// Row-major `[p_e][g]` mean activity.
    pub mean_activity: Vec<f64>,
    /// Row-major `[p_e][g]` coefficient of variation over cells (0 when the
    /// mean vanishes, with the flag below).
    pub cv: Vec<f64>,
    /// Points where the mean was zero and the CV is reported as 0.
    pub degenerate: Vec<bool>,
}

impl SweepResult {
    /// g value balancing mean incoming excitation and inhibition at `p_e`.
    pub fn balance_g(p_e: f64, k_e: f64, k_i: f64) -> f64 {
        if p_e >= 1.0 {
            f64::INFINITY
        } else {
            p_e * k_e / ((1.0 - p_e) * k_i)
        }
    }
}

/// Mean-activity / CV phase diagram over (p_e, g), fixed connectivity
/// (plasticity off).
pub fn phase_sweep<T: Real>(
    side: usize,
    base: RateParams<T>,
    p_e_values: &[f64],
    g_values: &[f64],
    settle_steps: usize,
    measure_steps: usize,
    seed: u64,
) -> Result<SweepResult> {
    let rf = RandomField::new(seed);
    let mut mean_activity = Vec::with_capacity(p_e_values.len() * g_values.len());
    let mut cv = Vec::with_capacity(p_e_values.len() * g_values.len());
    let mut degenerate = Vec::with_capacity(p_e_values.len() * g_values.len());
    for (i, &p_e) in p_e_values.iter().enumerate() {
        for (j, &g) in g_values.iter().enumerate() {
            let params = RateParams {
                p_e,
                g: T::of(g),
                hebbian_on: false,
                inhibitory_on: false,
                normalize_on: false,
                ..base
            };
            let sub = rf.derive((i * g_values.len() + j) as u64);
            let mut model = RateModel::new(side, side, params, &sub)?;
            for _ in 0..settle_steps {
                model.advance_rates();
            }
            // time-averaged per-cell rates over the measurement window
            let mut acc = vec![0.0f64; side * side];
            for _ in 0..measure_steps {
                model.advance_rates();
                for (a, r) in acc.iter_mut().zip(model.rates()) {
                    *a += r.f64();
                }
            }
            for a in acc.iter_mut() {
                *a /= measure_steps as f64;
            }
            let (m, s) = mean_std(&acc);
            mean_activity.push(m);
            if m > 0.0 {
                cv.push(s / m);
                degenerate.push(false);
            } else {
                cv.push(0.0);
                degenerate.push(true);
            }
        }
    }
    Ok(SweepResult {
        p_e_values: p_e_values.to_vec(),
        g_values: g_values.to_vec(),
        mean_activity,
        cv,
        degenerate,
    })
}

/// Result of driving the network with an image until plasticity converges.
#[derive(Debug, Clone)]
pub struct ImprintResult<T> {
    pub incoming_map: Grid<T>,
    pub outgoing_map: Grid<T>,
    /// Pearson correlation of the summed-incoming-weight map with the image
    /// (`None` for zero-variance inputs).
    pub correlation_in: Option<f64>,
    pub correlation_out: Option<f64>,
    pub steps_run: usize,
    pub converged: bool,
}

/// Project an image as the per-cell input current, run the dynamics with the
/// enabled plasticity until the per-step weight change drops below `tol`
/// (max-norm, post-normalization) or the step budget is exhausted.
pub fn imprint_image<T: Real>(
    model: &mut RateModel<T>,
    image: &Grid<T>,
    tol: f64,
    max_steps: usize,
) -> Result<ImprintResult<T>> {
    if image.width() != model.width() || image.height() != model.height() || image.channels() != 1 {
        return Err(Error::config(format!(
            "image {}x{} does not match grid {}x{}",
            image.width(),
            image.height(),
            model.width(),
            model.height()
        )));
    }
    model.set_input(image.clone())?;
    let mut prev = model.kernels.weights().to_vec();
    let mut steps_run = 0;
    let mut converged = false;
    for _ in 0..max_steps {
        model.tick();
        steps_run += 1;
        let mut delta = 0.0f64;
        for (a, b) in prev.iter().zip(model.kernels.weights()) {
            delta = delta.max((a.f64() - b.f64()).abs());
        }
        if delta < tol {
            converged = true;
            break;
        }
        prev.copy_from_slice(model.kernels.weights());
    }
    let incoming_map = model.kernels.incoming_sum_map()?;
    let outgoing_map = model.kernels.outgoing_sum_map()?;
    let correlation_in = pearson(incoming_map.channel(0), image.channel(0))?;
    let correlation_out = pearson(outgoing_map.channel(0), image.channel(0))?;
    Ok(ImprintResult {
        incoming_map,
        outgoing_map,
        correlation_in,
        correlation_out,
        steps_run,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet_params() -> RateParams<f32> {
        RateParams {
            hebbian_on: false,
            inhibitory_on: false,
            normalize_on: false,
            ..RateParams::default()
        }
    }

    #[test]
    fn decoupled_fixed_point_is_one_third() {
        // zero weights and s(c) = 0.5 (c = theta): r* solves r = (1-r)/2
        let params = RateParams {
            w_init: 0.0,
            c0: 1.0,
            ..quiet_params()
        };
        let rng = RandomField::new(1);
        let mut m = RateModel::new(8, 8, params, &rng).unwrap();
        for _ in 0..2000 {
            m.advance_rates();
        }
        for &r in m.rates() {
            assert_relative_eq!(r, 1.0 / 3.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn saturated_activity_decays() {
        let params = quiet_params();
        let rng = RandomField::new(2);
        let mut m = RateModel::new(8, 8, params, &rng).unwrap();
        m.r.channel_mut(0).fill(1.0);
        m.advance_rates();
        assert!(m.rates().iter().all(|&r| r < 1.0));
    }

    #[test]
    fn uniform_field_stays_uniform() {
        // all-zero weights, uniform input: perfect symmetry is preserved
        let params = RateParams {
            w_init: 0.0,
            ..quiet_params()
        };
        let rng = RandomField::new(3);
        let mut m = RateModel::new(6, 6, params, &rng).unwrap();
        m.r.channel_mut(0).fill(0.25);
        for _ in 0..50 {
            m.advance_rates();
        }
        let first = m.rates()[0];
        assert!(m.rates().iter().all(|&r| r == first));
    }

    #[test]
    fn activity_bounded_for_any_input() {
        let params = RateParams {
            c0: 100.0,
            g: 50.0,
            ..quiet_params()
        };
        let rng = RandomField::new(4);
        let mut m = RateModel::new(8, 8, params, &rng).unwrap();
        for _ in 0..100 {
            m.advance_rates();
            assert!(m.rates().iter().all(|&r| (0.0..=1.0).contains(&r)));
        }
    }

    /// Dense-matrix oracle: full N x N weight matrix with explicit signs,
    /// one plasticity step, compared against the kernel-windowed update.
    #[test]
    fn plasticity_matches_dense_oracle() {
        let side = 5usize;
        let n = side * side;
        let rng = RandomField::new(5);
        let params = RateParams {
            hebbian_on: true,
            inhibitory_on: true,
            normalize_on: false,
            ..RateParams::<f32>::default()
        };
        let mut m = RateModel::new(side, side, params, &rng).unwrap();
        // arbitrary rates
        for (i, r) in m.r.channel_mut(0).iter_mut().enumerate() {
            *r = ((i * 7 + 3) % 11) as f32 / 11.0;
        }
        let rates: Vec<f32> = m.rates().to_vec();

        // dense reference: W[pre][post] restricted to kernel windows
        let mut dense = vec![vec![0.0f32; n]; n];
        for y in 0..side {
            for x in 0..side {
                let post = y * side + x;
                for (slot, &wt) in m.kernels.cell_weights(post).iter().enumerate() {
                    let pre = m.kernels.presyn_index(x, y, slot);
                    if slot != m.kernels.k2() / 2 {
                        dense[pre][post] = wt;
                    }
                }
            }
        }
        let lr = 1e-3f32;
        let beta = m.params.beta;
        for pre in 0..n {
            for post in 0..n {
                if dense[pre][post] == 0.0 {
                    continue;
                }
                let d = if m.ei.is_excitatory(pre) {
                    lr * rates[pre] * rates[post]
                } else {
                    lr * rates[pre] * (rates[post] - beta)
                };
                dense[pre][post] = (dense[pre][post] + d).max(0.0);
            }
        }

        m.hebbian_update();
        m.inhibitory_update();
        for y in 0..side {
            for x in 0..side {
                let post = y * side + x;
                for (slot, &wt) in m.kernels.cell_weights(post).iter().enumerate() {
                    if slot == m.kernels.k2() / 2 {
                        continue;
                    }
                    let pre = m.kernels.presyn_index(x, y, slot);
                    if dense[pre][post] > 0.0 || wt > 0.0 {
                        assert_relative_eq!(wt, dense[pre][post], epsilon = 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn hebbian_zero_rate_leaves_weight() {
        let rng = RandomField::new(6);
        let mut m = RateModel::new(5, 5, RateParams::default(), &rng).unwrap();
        m.r.channel_mut(0).fill(0.0);
        let before = m.kernels.weights().to_vec();
        m.hebbian_update();
        assert_eq!(before, m.kernels.weights());
    }

    #[test]
    fn hebbian_unit_rates_add_learning_rate() {
        let rng = RandomField::new(7);
        let params = RateParams {
            p_e: 1.0,
            lr_e: 0.01,
            ..RateParams::default()
        };
        let mut m = RateModel::new(5, 5, params, &rng).unwrap();
        m.r.channel_mut(0).fill(1.0);
        let before = m.kernels.cell_weights(12)[0];
        m.hebbian_update();
        assert_relative_eq!(m.kernels.cell_weights(12)[0], before + 0.01, epsilon = 1e-6);
    }

    #[test]
    fn inhibitory_rule_is_zero_at_target() {
        let rng = RandomField::new(8);
        let params = RateParams::<f32> {
            p_e: 0.0,
            ..RateParams::default()
        };
        let mut m = RateModel::new(5, 5, params, &rng).unwrap();
        m.r.channel_mut(0).fill(m.params.beta);
        let before = m.kernels.weights().to_vec();
        m.inhibitory_update();
        for (a, b) in before.iter().zip(m.kernels.weights()) {
            assert_relative_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn inhibitory_rule_increases_on_overactive_targets() {
        let rng = RandomField::new(9);
        let params = RateParams {
            p_e: 0.0,
            ..RateParams::default()
        };
        let mut m = RateModel::new(5, 5, params, &rng).unwrap();
        m.r.channel_mut(0).fill(0.9); // far above beta
        let before: f32 = m.kernels.cell_weights(6).iter().sum();
        m.inhibitory_update();
        let after: f32 = m.kernels.cell_weights(6).iter().sum();
        assert!(after > before);
    }

    #[test]
    fn zero_learning_rates_leave_weights_bitwise() {
        let rng = RandomField::new(10);
        let params = RateParams::<f32> {
            lr_e: 0.0,
            lr_i: 0.0,
            normalize_on: false,
            ..RateParams::default()
        };
        let mut m = RateModel::new(6, 6, params, &rng).unwrap();
        let before: Vec<u32> = m.kernels.weights().iter().map(|w| w.to_bits()).collect();
        for _ in 0..5 {
            m.tick();
        }
        let after: Vec<u32> = m.kernels.weights().iter().map(|w| w.to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn sweep_cv_of_constant_field_is_zero() {
        // decoupled limit: p_e = 0 with g = 0 receives only c
        let r = phase_sweep::<f32>(8, quiet_params(), &[0.0], &[0.0], 300, 50, 3).unwrap();
        assert!(r.mean_activity[0] > 0.0);
        assert!(r.cv[0] < 0.05, "cv {}", r.cv[0]);
        // and equals the isolated-neuron fixed point (r* = 1/3 at c = 1)
        assert_relative_eq!(r.mean_activity[0], 1.0 / 3.0, epsilon = 1e-3);
    }

    #[test]
    fn imprint_rejects_shape_mismatch() {
        let rng = RandomField::new(11);
        let mut m = RateModel::new(8, 8, RateParams::default(), &rng).unwrap();
        let img = Grid::<f32>::filled(4, 4, 1, 0.5).unwrap();
        assert!(imprint_image(&mut m, &img, 1e-5, 5).is_err());
    }

    #[test]
    fn imprint_constant_image_flags_undefined_correlation() {
        let rng = RandomField::new(12);
        let mut m = RateModel::new(8, 8, RateParams::default(), &rng).unwrap();
        let img = Grid::<f32>::filled(8, 8, 1, 0.5).unwrap();
        let res = imprint_image(&mut m, &img, 1e-9, 10).unwrap();
        assert_eq!(res.correlation_in, None);
    }

    #[test]
    fn balance_curve_formula() {
        assert_relative_eq!(SweepResult::balance_g(0.5, 1.0, 1.0), 1.0);
        assert_relative_eq!(SweepResult::balance_g(0.8, 1.0, 1.0), 4.0, epsilon = 1e-12);
        assert!(SweepResult::balance_g(1.0, 1.0, 1.0).is_infinite());
    }
}
