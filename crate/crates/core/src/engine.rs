//! Generic adaptive-update machinery.
//!
//! A cell's channels are split into a dynamical part (sigma) and a rule-
//! parameter part (theta); an [`AdaptiveRule`] maps the local window of both
//! onto new center values. [`step`] applies a rule synchronously: every
//! output is computed from the previous grid (double buffering), masked
//! cells only, data-parallel over rows. Combined with the counter RNG this
//! makes results independent of the worker-thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::float::Real;
use crate::grid::{Grid, Patch};
use crate::rng::{CellDraws, RandomField, MASK_DRAW};

/// Split of the channel axis into leading sigma and trailing theta channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelPartition {
    sigma: usize,
    theta: usize,
}

impl ChannelPartition {
    pub fn new(sigma: usize, theta: usize) -> Self {
        Self { sigma, theta }
    }

    pub fn sigma_channels(&self) -> usize {
        self.sigma
    }

    pub fn theta_channels(&self) -> usize {
        self.theta
    }

    pub fn channels(&self) -> usize {
        self.sigma + self.theta
    }
}

/// Borrowed view of one cell's channel values, split per the partition.
#[derive(Debug)]
pub struct CellState<'a, T> {
    pub sigma: &'a [T],
    pub theta: &'a [T],
}

impl<'a, T> CellState<'a, T> {
    /// Split a contiguous per-cell channel buffer.
    pub fn split(values: &'a [T], partition: &ChannelPartition) -> Self {
        debug_assert_eq!(values.len(), partition.channels());
        let (sigma, theta) = values.split_at(partition.sigma);
        Self { sigma, theta }
    }
}

/// A local update: new center channel values from the window and the cell's
/// random draws. Implementations must be pure functions of their inputs.
pub trait AdaptiveRule<T: Real>: Sync {
    fn patch_size(&self) -> usize;

    fn partition(&self) -> ChannelPartition;

    /// Write the center cell's new channel values (sigma then theta) into
    /// `out`, which has one slot per grid channel.
    fn apply(&self, patch: &Patch<'_, T>, draws: &mut CellDraws<'_>, out: &mut [T]);
}

/// Per-cell boolean update schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn all(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Cells with `(x + y) % 2 == parity`, each kept independently with
    /// probability `fraction`.
    pub fn checkerboard(
        width: usize,
        height: usize,
        parity: u8,
        fraction: f64,
        rng: &RandomField,
        step: u64,
    ) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!(
                "update fraction must be in (0, 1], got {fraction}"
            )));
        }
        let mut data = vec![false; width * height];
        for y in 0..height {
            for x in 0..width {
                if (x + y) % 2 == parity as usize {
                    let cell = (y * width + x) as u64;
                    data[y * width + x] =
                        fraction >= 1.0 || rng.uniform(step, cell, MASK_DRAW) < fraction;
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline(always)]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Cell-wise OR.
    pub fn union(&self, other: &Mask) -> Mask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Mask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a || b)
                .collect(),
        }
    }
}

fn validate<T: Real, R: AdaptiveRule<T>>(grid: &Grid<T>, rule: &R, mask: &Mask) -> Result<()> {
    let part = rule.partition();
    if part.channels() != grid.channels() {
        return Err(Error::config(format!(
            "rule expects {} channels ({} sigma + {} theta) but grid has {}",
            part.channels(),
            part.sigma_channels(),
            part.theta_channels(),
            grid.channels()
        )));
    }
    let k = rule.patch_size();
    if k % 2 == 0 || k > grid.width() || k > grid.height() {
        return Err(Error::config(format!(
            "rule patch size {k} invalid for {}x{} grid",
            grid.width(),
            grid.height()
        )));
    }
    if mask.width() != grid.width() || mask.height() != grid.height() {
        return Err(Error::shape(format!(
            "mask {}x{} does not match grid {}x{}",
            mask.width(),
            mask.height(),
            grid.width(),
            grid.height()
        )));
    }
    Ok(())
}

/// Synchronous masked update into a fresh grid.
pub fn step<T: Real, R: AdaptiveRule<T>>(
    grid: &Grid<T>,
    rule: &R,
    mask: &Mask,
    rng: &RandomField,
    step_index: u64,
) -> Result<Grid<T>> {
    let mut out = grid.clone();
    step_into(grid, rule, mask, rng, step_index, &mut out)?;
    Ok(out)
}

/// Synchronous masked update writing into an existing buffer (which must have
/// the same shape). Unmasked cells are copied from the input bitwise.
pub fn step_into<T: Real, R: AdaptiveRule<T>>(
    grid: &Grid<T>,
    rule: &R,
    mask: &Mask,
    rng: &RandomField,
    step_index: u64,
    out: &mut Grid<T>,
) -> Result<()> {
    validate(grid, rule, mask)?;
    if !grid.same_shape(out) {
        return Err(Error::shape("output buffer shape differs from input".to_string()));
    }
    let (w, h, c) = (grid.width(), grid.height(), grid.channels());
    let plane = w * h;
    out.data_mut().copy_from_slice(grid.data());

    // Group mutable row slices of every channel plane by row index so each
    // parallel task owns a disjoint set of output cells.
    let mut rows: Vec<Vec<&mut [T]>> = (0..h).map(|_| Vec::with_capacity(c)).collect();
    for ch_plane in out.data_mut().chunks_exact_mut(plane) {
        for (y, row) in ch_plane.chunks_exact_mut(w).enumerate() {
            rows[y].push(row);
        }
    }

    let k = rule.patch_size();
    rows.into_par_iter().enumerate().for_each(|(y, mut ch_rows)| {
        let mut buf = vec![T::zero(); c];
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let patch = grid.patch(x, y, k);
            let mut draws = CellDraws::new(rng, step_index, (y * w + x) as u64);
            rule.apply(&patch, &mut draws, &mut buf);
            for (ch, row) in ch_rows.iter_mut().enumerate() {
                row[x] = buf[ch];
            }
        }
    });
    Ok(())
}
