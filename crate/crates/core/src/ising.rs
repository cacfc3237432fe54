//! Ising model with feedback-controlled temperature.
//!
//! Spins live in channel 0 and the per-cell temperature in channel 1 of one
//! two-channel grid, so the temperature is rule state in the same sense as
//! the spins. Metropolis updates run on alternating checkerboard
//! sub-lattices (no interacting pairs update together, which keeps detailed
//! balance under parallel updates). Three temperature modes:
//!
//! - `Local`: each cell integrates growth (local-order measurement squared),
//!   decay and diffusion, driving the field toward the critical region.
//! - `Global`: one scalar temperature driven by global magnetization with
//!   folded-normal decay noise.
//! - `Fixed`: constant temperature (plain Metropolis sampling).

use std::sync::atomic::{AtomicU64, Ordering};

use crate::engine::{self, AdaptiveRule, ChannelPartition, Mask};
use crate::error::{Error, Result};
use crate::float::Real;
use crate::grid::{Grid, Patch};
use crate::rng::{CellDraws, RandomField, GLOBAL_CELL, INIT_STEP};

pub mod exact;

/// Spin channel index.
pub const CH_SPIN: usize = 0;
/// Temperature channel index.
pub const CH_TEMP: usize = 1;

/// Temperature floor; keeps the inverse temperature finite.
pub const T_MIN: f64 = 1e-3;
/// Temperature ceiling.
pub const T_MAX: f64 = 1e3;

/// Feedback-rule coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocParams<T> {
    /// Growth rate on the squared local order measurement.
    pub alpha: T,
    /// Linear decay rate (also the global-mode noise scale).
    pub epsilon: T,
    /// Diffusion coefficient. The rule applies the five-point Laplacian
    /// scaled by 1/8 so the default is inside the linear-stability region
    /// of the update (|eta - epsilon - d| <= 1 at the fastest mode).
    pub diffusion: T,
    /// Blend weight on the previous temperature.
    pub eta: T,
}

impl<T: Real> Default for SocParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::of(1e-1),
            epsilon: T::of(2e-2),
            diffusion: T::of(1.0),
            eta: T::of(0.5),
        }
    }
}

/// How the temperature evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TempMode {
    #[default]
    Local,
    Global,
    Fixed,
}

/// Full model configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingParams<T> {
    pub mode: TempMode,
    /// Coupling constant (k_B fixed to 1).
    pub j: T,
    pub temp_init: T,
    /// Probability that a cell of the active sub-lattice updates.
    pub update_fraction: f64,
    /// Temperature update cadence in Metropolis steps.
    pub adapt_every: u64,
    pub soc: SocParams<T>,
}

impl<T: Real> Default for IsingParams<T> {
    fn default() -> Self {
        Self {
            mode: TempMode::Local,
            j: T::one(),
            temp_init: T::of(2.0),
            update_fraction: 0.5,
            adapt_every: 1,
            soc: SocParams::default(),
        }
    }
}

/// Counters accumulated during one update pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Cells selected by the mask.
    pub attempted: u64,
    /// Spins flipped.
    pub flipped: u64,
    /// Below-floor temperatures clamped while evaluating acceptance.
    pub temp_clamps: u64,
}

/// Change in total energy if the spin at `(x, y)` flips:
/// `2 J s_i * (sum of the four orthogonal neighbor spins)`.
pub fn delta_energy<T: Real>(spins: &Grid<T>, x: usize, y: usize, j: T) -> T {
    let p = spins.patch(x, y, 3);
    let nn = p.get(-1, 0, CH_SPIN) + p.get(1, 0, CH_SPIN) + p.get(0, -1, CH_SPIN)
        + p.get(0, 1, CH_SPIN);
    T::of(2.0) * j * p.center(CH_SPIN) * nn
}

/// Where a spin-flip pass reads its temperature.
enum TempSource<T> {
    /// Per-cell temperature channel.
    Channel,
    /// One scalar for every cell.
    Uniform(T),
}

struct SpinFlipRule<T> {
    j: T,
    t_min: T,
    temp: TempSource<T>,
    attempted: AtomicU64,
    flipped: AtomicU64,
    clamped: AtomicU64,
}

impl<T: Real> AdaptiveRule<T> for SpinFlipRule<T> {
    fn patch_size(&self) -> usize {
        3
    }

    fn partition(&self) -> ChannelPartition {
        ChannelPartition::new(1, 1)
    }

    fn apply(&self, patch: &Patch<'_, T>, draws: &mut CellDraws<'_>, out: &mut [T]) {
        let s = patch.center(CH_SPIN);
        let nn = patch.get(-1, 0, CH_SPIN)
            + patch.get(1, 0, CH_SPIN)
            + patch.get(0, -1, CH_SPIN)
            + patch.get(0, 1, CH_SPIN);
        let de = T::of(2.0) * self.j * s * nn;
        self.attempted.fetch_add(1, Ordering::Relaxed);

        let accept = if de <= T::zero() {
            true
        } else {
            let mut t = match self.temp {
                TempSource::Channel => patch.center(CH_TEMP),
                TempSource::Uniform(t) => t,
            };
            if t < self.t_min {
                t = self.t_min;
                self.clamped.fetch_add(1, Ordering::Relaxed);
            }
            let u: T = draws.uniform();
            u < (-de / t).exp()
        };
        if accept {
            self.flipped.fetch_add(1, Ordering::Relaxed);
            out[CH_SPIN] = -s;
        } else {
            out[CH_SPIN] = s;
        }
        out[CH_TEMP] = patch.center(CH_TEMP);
    }
}

/// Local temperature feedback: growth by the squared four-neighbor spin sum,
/// linear decay, scaled diffusion, blended with the previous value.
struct TempFeedbackRule<T> {
    soc: SocParams<T>,
    t_min: T,
    t_max: T,
}

impl<T: Real> AdaptiveRule<T> for TempFeedbackRule<T> {
    fn patch_size(&self) -> usize {
        3
    }

    fn partition(&self) -> ChannelPartition {
        ChannelPartition::new(1, 1)
    }

    fn apply(&self, patch: &Patch<'_, T>, _draws: &mut CellDraws<'_>, out: &mut [T]) {
        let m = patch.get(-1, 0, CH_SPIN)
            + patch.get(1, 0, CH_SPIN)
            + patch.get(0, -1, CH_SPIN)
            + patch.get(0, 1, CH_SPIN);
        let t = patch.center(CH_TEMP);
        let lap = patch.get(-1, 0, CH_TEMP)
            + patch.get(1, 0, CH_TEMP)
            + patch.get(0, -1, CH_TEMP)
            + patch.get(0, 1, CH_TEMP)
            - T::of(4.0) * t;
        let delta = self.soc.alpha * m * m - self.soc.epsilon * t
            + self.soc.diffusion * lap / T::of(8.0);
        let new_t = (self.soc.eta * t + delta).max(self.t_min).min(self.t_max);
        out[CH_SPIN] = patch.center(CH_SPIN);
        out[CH_TEMP] = new_t;
    }
}

/// Ising lattice plus its temperature state and update schedule.
pub struct IsingModel<T> {
    grid: Grid<T>,
    scratch: Grid<T>,
    params: IsingParams<T>,
    /// Scalar temperature used in `Global` and `Fixed` modes.
    global_temp: T,
    step: u64,
}

impl<T: Real> IsingModel<T> {
    /// Random +-1 spins, uniform initial temperature.
    pub fn new(width: usize, height: usize, params: IsingParams<T>, rng: &RandomField) -> Result<Self> {
        if !(params.update_fraction > 0.0 && params.update_fraction <= 1.0) {
            return Err(Error::config(format!(
                "update fraction must be in (0, 1], got {}",
                params.update_fraction
            )));
        }
        if params.adapt_every == 0 {
            return Err(Error::config("adapt_every must be positive".to_string()));
        }
        let grid = Grid::from_fn(width, height, 2, |x, y, c| {
            if c == CH_SPIN {
                if rng.uniform(INIT_STEP, (y * width + x) as u64, 0) < 0.5 {
                    T::one()
                } else {
                    -T::one()
                }
            } else {
                params.temp_init
            }
        })?;
        let scratch = grid.clone();
        Ok(Self {
            grid,
            scratch,
            global_temp: params.temp_init,
            params,
            step: 0,
        })
    }

    /// Uniform spins (ground state), for equilibrium measurements below the
    /// transition where a random start would be coarsening-limited.
    pub fn set_spins_uniform(&mut self, up: bool) {
        let v = if up { T::one() } else { -T::one() };
        self.grid.channel_mut(CH_SPIN).fill(v);
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn params(&self) -> &IsingParams<T> {
        &self.params
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    /// Scalar temperature (Global/Fixed modes).
    pub fn global_temp(&self) -> T {
        self.global_temp
    }

    /// |M|: absolute mean spin. Integer-accumulated, so the result does not
    /// depend on summation order.
    pub fn magnetization_abs(&self) -> f64 {
        let sum: i64 = self
            .grid
            .channel(CH_SPIN)
            .iter()
            .map(|&s| if s > T::zero() { 1i64 } else { -1i64 })
            .sum();
        sum.unsigned_abs() as f64 / self.grid.cells() as f64
    }

    /// Mean energy per spin, `-J * sum over right+down bonds / N`.
    pub fn energy_per_spin(&self) -> f64 {
        let (w, h) = (self.grid.width(), self.grid.height());
        let spins = self.grid.channel(CH_SPIN);
        let sign = |v: T| if v > T::zero() { 1i64 } else { -1i64 };
        let mut bonds: i64 = 0;
        for y in 0..h {
            for x in 0..w {
                let s = sign(spins[y * w + x]);
                let right = sign(spins[y * w + (x + 1) % w]);
                let down = sign(spins[((y + 1) % h) * w + x]);
                bonds += s * right + s * down;
            }
        }
        -self.params.j.f64() * bonds as f64 / self.grid.cells() as f64
    }

    /// Mean temperature over cells (Local mode) or the scalar (otherwise).
    pub fn mean_temp(&self) -> f64 {
        match self.params.mode {
            TempMode::Local => {
                let temps = self.grid.channel(CH_TEMP);
                temps.iter().map(|t| t.f64()).sum::<f64>() / temps.len() as f64
            }
            _ => self.global_temp.f64(),
        }
    }

    pub fn temps(&self) -> &[T] {
        self.grid.channel(CH_TEMP)
    }

    /// Copy the scalar temperature into the temperature channel so snapshots
    /// carry it (no-op in Local mode, where the channel is authoritative).
    pub fn sync_temp_channel(&mut self) {
        if self.params.mode != TempMode::Local {
            self.grid.channel_mut(CH_TEMP).fill(self.global_temp);
        }
    }

    /// One Metropolis pass over the current checkerboard sub-lattice.
    pub fn metropolis_pass(&mut self, rng: &RandomField) -> Result<StepStats> {
        let parity = (self.step % 2) as u8;
        let mask = Mask::checkerboard(
            self.grid.width(),
            self.grid.height(),
            parity,
            self.params.update_fraction,
            rng,
            self.step,
        )?;
        let temp = match self.params.mode {
            TempMode::Local => TempSource::Channel,
            _ => TempSource::Uniform(self.global_temp),
        };
        let rule = SpinFlipRule {
            j: self.params.j,
            t_min: T::of(T_MIN),
            temp,
            attempted: AtomicU64::new(0),
            flipped: AtomicU64::new(0),
            clamped: AtomicU64::new(0),
        };
        engine::step_into(&self.grid, &rule, &mask, rng, self.step, &mut self.scratch)?;
        std::mem::swap(&mut self.grid, &mut self.scratch);
        Ok(StepStats {
            attempted: rule.attempted.into_inner(),
            flipped: rule.flipped.into_inner(),
            temp_clamps: rule.clamped.into_inner(),
        })
    }

    /// One local temperature-feedback pass over every cell.
    pub fn local_temperature_pass(&mut self, rng: &RandomField) -> Result<()> {
        let rule = TempFeedbackRule {
            soc: self.params.soc,
            t_min: T::of(T_MIN),
            t_max: T::of(T_MAX),
        };
        let mask = Mask::all(self.grid.width(), self.grid.height(), true);
        engine::step_into(&self.grid, &rule, &mask, rng, self.step, &mut self.scratch)?;
        std::mem::swap(&mut self.grid, &mut self.scratch);
        Ok(())
    }

    /// Global temperature update: growth by |M|, folded-normal decay scaled
    /// by T^2, the whole step applied at rate 1/(linear size).
    pub fn global_temperature_pass(&mut self, rng: &RandomField) {
        let m = T::of(self.magnetization_abs());
        let xi = T::of(rng.normal(self.step, GLOBAL_CELL, 0).abs()) * self.params.soc.epsilon;
        let linear_size = T::of((self.grid.cells() as f64).sqrt());
        let t = self.global_temp;
        let new_t = t + (self.params.soc.alpha * m - xi * t * t) / linear_size;
        self.global_temp = new_t.max(T::of(T_MIN)).min(T::of(T_MAX));
    }

    /// One full model step: Metropolis sub-lattice pass, then the mode's
    /// temperature update at the configured cadence.
    pub fn advance(&mut self, rng: &RandomField) -> Result<StepStats> {
        let stats = self.metropolis_pass(rng)?;
        if self.step % self.params.adapt_every == 0 {
            match self.params.mode {
                TempMode::Local => self.local_temperature_pass(rng)?,
                TempMode::Global => self.global_temperature_pass(rng),
                TempMode::Fixed => {}
            }
        }
        self.step += 1;
        Ok(stats)
    }
}
