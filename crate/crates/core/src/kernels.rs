//! Per-cell incoming connection kernels and cell-type machinery shared by
//! the rate and spiking models.
//!
//! Each cell owns a (2R+1)^2 window of non-negative incoming weights with
//! the center pinned to zero (no self-connection). Connection signs are not
//! stored in the weights: they come from the presynaptic cell's type, so a
//! cell's outgoing connections are all excitatory or all inhibitory by
//! construction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::float::Real;
use crate::grid::{wrap, Grid};
use crate::rng::{RandomField, INIT_STEP};

/// Excitatory/inhibitory cell-type map. Signs are drawn once at
/// initialization with P(excitatory) = `p_e`.
#[derive(Debug, Clone)]
pub struct EiField {
    width: usize,
    height: usize,
    signs: Vec<i8>,
}

impl EiField {
    pub fn random(width: usize, height: usize, p_e: f64, rng: &RandomField, sign_draw: u32) -> Self {
        let signs = (0..width * height)
            .map(|cell| {
                if rng.uniform(INIT_STEP, cell as u64, sign_draw) < p_e {
                    1i8
                } else {
                    -1i8
                }
            })
            .collect();
        Self {
            width,
            height,
            signs,
        }
    }

    pub fn uniform(width: usize, height: usize, excitatory: bool) -> Self {
        Self {
            width,
            height,
            signs: vec![if excitatory { 1 } else { -1 }; width * height],
        }
    }

    #[inline(always)]
    pub fn is_excitatory(&self, cell: usize) -> bool {
        self.signs[cell] > 0
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn count_excitatory(&self) -> usize {
        self.signs.iter().filter(|&&s| s > 0).count()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Which group of weights a normalization pass rescales to its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormScope {
    /// Each cell's incoming weights, per presynaptic type (targets K_E, K_I).
    IncomingPerCell,
    /// Each cell's outgoing weights (target picked by the cell's own type).
    OutgoingPerCell,
    /// All weights of one presynaptic type network-wide; the target is
    /// `n_type * K_type`, i.e. K is a per-cell outgoing budget on average.
    #[default]
    GlobalPerType,
}

/// Dense per-cell incoming kernels, cell-major storage.
#[derive(Debug, Clone)]
pub struct KernelGrid<T> {
    width: usize,
    height: usize,
    radius: usize,
    /// `width * height * (2R+1)^2` weights; slot `(dy+R)*(2R+1) + (dx+R)`.
    weights: Vec<T>,
}

impl<T: Real> KernelGrid<T> {
    /// Allocate zeroed kernels; fails gracefully when the reservation is
    /// refused (used by the scaling benchmark to record failed points).
    pub fn try_new(width: usize, height: usize, radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::config("connectivity radius must be positive".to_string()));
        }
        let k = 2 * radius + 1;
        if k > width || k > height {
            return Err(Error::config(format!(
                "kernel side {k} exceeds grid {width}x{height}"
            )));
        }
        let n = width
            .checked_mul(height)
            .and_then(|c| c.checked_mul(k * k))
            .ok_or_else(|| Error::config("kernel storage size overflows".to_string()))?;
        let mut weights = Vec::new();
        weights
            .try_reserve_exact(n)
            .map_err(|e| Error::config(format!("kernel allocation failed: {e}")))?;
        weights.resize(n, T::zero());
        Ok(Self {
            width,
            height,
            radius,
            weights,
        })
    }

    /// i.i.d. uniform `[0, w0]` weights (center stays zero).
    pub fn init_uniform(&mut self, w0: T, rng: &RandomField) {
        let k2 = self.k2();
        let center = k2 / 2;
        for cell in 0..self.cells() {
            let base = cell * k2;
            for slot in 0..k2 {
                self.weights[base + slot] = if slot == center {
                    T::zero()
                } else {
                    rng.uniform_as::<T>(INIT_STEP, cell as u64, slot as u32) * w0
                };
            }
        }
    }

    #[inline(always)]
    pub fn k(&self) -> usize {
        2 * self.radius + 1
    }

    #[inline(always)]
    pub fn k2(&self) -> usize {
        self.k() * self.k()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn cell_weights(&self, cell: usize) -> &[T] {
        let k2 = self.k2();
        &self.weights[cell * k2..(cell + 1) * k2]
    }

    pub fn cell_weights_mut(&mut self, cell: usize) -> &mut [T] {
        let k2 = self.k2();
        &mut self.weights[cell * k2..(cell + 1) * k2]
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    /// Offset of a kernel slot relative to the center.
    #[inline(always)]
    pub fn slot_offset(&self, slot: usize) -> (isize, isize) {
        let k = self.k();
        let r = self.radius as isize;
        ((slot % k) as isize - r, (slot / k) as isize - r)
    }

    /// Presynaptic cell index for a slot of the cell at `(x, y)`.
    #[inline(always)]
    pub fn presyn_index(&self, x: usize, y: usize, slot: usize) -> usize {
        let (dx, dy) = self.slot_offset(slot);
        let px = wrap(x as isize + dx, self.width);
        let py = wrap(y as isize + dy, self.height);
        py * self.width + px
    }

    /// Slot seen from the presynaptic side (offset negated).
    #[inline(always)]
    pub fn mirror_slot(&self, slot: usize) -> usize {
        self.k2() - 1 - slot
    }

    /// Per-cell sum of all incoming weights (both types, unsigned).
    pub fn incoming_sum_map(&self) -> Result<Grid<T>> {
        let k2 = self.k2();
        let mut out = Grid::new(self.width, self.height, 1)?;
        for (cell, chunk) in self.weights.chunks_exact(k2).enumerate() {
            let mut acc = T::zero();
            for &w in chunk {
                acc += w;
            }
            out.data_mut()[cell] = acc;
        }
        Ok(out)
    }

    /// Per-cell sum of all outgoing weights (weights stored at the
    /// postsynaptic side, gathered via the mirror slot).
    pub fn outgoing_sum_map(&self) -> Result<Grid<T>> {
        let k2 = self.k2();
        let mut out = Grid::new(self.width, self.height, 1)?;
        for y in 0..self.height {
            for x in 0..self.width {
                let cell = y * self.width + x;
                let mut acc = T::zero();
                for slot in 0..k2 {
                    let post = self.presyn_index(x, y, slot);
                    acc += self.weights[post * k2 + self.mirror_slot(slot)];
                }
                out.data_mut()[cell] = acc;
            }
        }
        Ok(out)
    }

    /// Incoming sums of one cell split by presynaptic type.
    pub fn incoming_type_sums(&self, ei: &EiField, x: usize, y: usize) -> (T, T) {
        let cell = y * self.width + x;
        let (mut e, mut i) = (T::zero(), T::zero());
        for (slot, &w) in self.cell_weights(cell).iter().enumerate() {
            if ei.is_excitatory(self.presyn_index(x, y, slot)) {
                e += w;
            } else {
                i += w;
            }
        }
        (e, i)
    }

    /// Rescale weight groups multiplicatively to their targets. Groups whose
    /// current sum is zero are left unchanged.
    pub fn normalize(&mut self, ei: &EiField, scope: NormScope, k_e: T, k_i: T) {
        let k2 = self.k2();
        let (w, h) = (self.width, self.height);
        match scope {
            NormScope::IncomingPerCell => {
                let offsets: Vec<(isize, isize)> = (0..k2).map(|s| self.slot_offset(s)).collect();
                self.weights
                    .par_chunks_exact_mut(k2)
                    .enumerate()
                    .for_each(|(cell, kw)| {
                        let (x, y) = (cell % w, cell / w);
                        let mut sums = [0.0f64; 2];
                        for (slot, wt) in kw.iter().enumerate() {
                            let (dx, dy) = offsets[slot];
                            let pre = wrap(y as isize + dy, h) * w + wrap(x as isize + dx, w);
                            sums[usize::from(ei.is_excitatory(pre))] += wt.f64();
                        }
                        let scale_i = if sums[0] > 0.0 { k_i.f64() / sums[0] } else { 1.0 };
                        let scale_e = if sums[1] > 0.0 { k_e.f64() / sums[1] } else { 1.0 };
                        for (slot, wt) in kw.iter_mut().enumerate() {
                            let (dx, dy) = offsets[slot];
                            let pre = wrap(y as isize + dy, h) * w + wrap(x as isize + dx, w);
                            let s = if ei.is_excitatory(pre) { scale_e } else { scale_i };
                            *wt = T::of(wt.f64() * s);
                        }
                    });
            }
            NormScope::OutgoingPerCell => {
                // pass 1: per-cell outgoing sums (gather, no races)
                let mut scale = vec![1.0f64; self.cells()];
                for y in 0..h {
                    for x in 0..w {
                        let cell = y * w + x;
                        let mut acc = 0.0f64;
                        for slot in 0..k2 {
                            let post = self.presyn_index(x, y, slot);
                            acc += self.weights[post * k2 + self.mirror_slot(slot)].f64();
                        }
                        let target = if ei.is_excitatory(cell) { k_e } else { k_i };
                        if acc > 0.0 {
                            scale[cell] = target.f64() / acc;
                        }
                    }
                }
                // pass 2: apply the presynaptic cell's factor to each weight
                let offsets: Vec<(isize, isize)> = (0..k2).map(|s| self.slot_offset(s)).collect();
                self.weights
                    .par_chunks_exact_mut(k2)
                    .enumerate()
                    .for_each(|(cell, kw)| {
                        let (x, y) = (cell % w, cell / w);
                        for (slot, wt) in kw.iter_mut().enumerate() {
                            let (dx, dy) = offsets[slot];
                            let pre = wrap(y as isize + dy, h) * w + wrap(x as isize + dx, w);
                            *wt = T::of(wt.f64() * scale[pre]);
                        }
                    });
            }
            NormScope::GlobalPerType => {
                let offsets: Vec<(isize, isize)> = (0..k2).map(|s| self.slot_offset(s)).collect();
                let mut totals = [0.0f64; 2];
                for (cell, kw) in self.weights.chunks_exact(k2).enumerate() {
                    let (x, y) = (cell % w, cell / w);
                    for (slot, wt) in kw.iter().enumerate() {
                        let (dx, dy) = offsets[slot];
                        let pre = wrap(y as isize + dy, h) * w + wrap(x as isize + dx, w);
                        totals[usize::from(ei.is_excitatory(pre))] += wt.f64();
                    }
                }
                let n_e = ei.count_excitatory();
                let n_i = ei.signs().len() - n_e;
                let scale_e = if totals[1] > 0.0 { n_e as f64 * k_e.f64() / totals[1] } else { 1.0 };
                let scale_i = if totals[0] > 0.0 { n_i as f64 * k_i.f64() / totals[0] } else { 1.0 };
                self.weights
                    .par_chunks_exact_mut(k2)
                    .enumerate()
                    .for_each(|(cell, kw)| {
                        let (x, y) = (cell % w, cell / w);
                        for (slot, wt) in kw.iter_mut().enumerate() {
                            let (dx, dy) = offsets[slot];
                            let pre = wrap(y as isize + dy, h) * w + wrap(x as isize + dx, w);
                            let s = if ei.is_excitatory(pre) { scale_e } else { scale_i };
                            *wt = T::of(wt.f64() * s);
                        }
                    });
            }
        }
    }
}

/// One signed kernel shared by every cell (the classic fixed-rule CA case;
/// baseline of the scaling benchmark).
#[derive(Debug, Clone)]
pub struct SharedKernel<T> {
    radius: usize,
    /// Signed weights, slot layout as in [`KernelGrid`].
    weights: Vec<T>,
}

impl<T: Real> SharedKernel<T> {
    /// Random signed kernel: magnitudes uniform `[0, w0]`, each slot
    /// excitatory with probability `p_e`, center zero.
    pub fn random(radius: usize, w0: T, p_e: f64, rng: &RandomField) -> Self {
        let k = 2 * radius + 1;
        let k2 = k * k;
        let weights = (0..k2)
            .map(|slot| {
                if slot == k2 / 2 {
                    T::zero()
                } else {
                    let mag = rng.uniform_as::<T>(INIT_STEP, GLOBAL_SHARED_CELL, slot as u32) * w0;
                    if rng.uniform(INIT_STEP, GLOBAL_SHARED_CELL, (k2 + slot) as u32) < p_e {
                        mag
                    } else {
                        -mag
                    }
                }
            })
            .collect();
        Self { radius, weights }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

const GLOBAL_SHARED_CELL: u64 = u64::MAX - 1;

/// Kernel storage used by a model: heterogeneous per-cell windows or one
/// shared window.
#[derive(Debug, Clone)]
pub enum Kernels<T> {
    PerCell(KernelGrid<T>),
    Shared {
        width: usize,
        height: usize,
        kernel: SharedKernel<T>,
    },
}

impl<T: Real> Kernels<T> {
    pub fn radius(&self) -> usize {
        match self {
            Kernels::PerCell(k) => k.radius(),
            Kernels::Shared { kernel, .. } => kernel.radius(),
        }
    }

    /// Bytes of weight storage (used for benchmark memory estimates).
    pub fn weight_bytes(&self) -> usize {
        let per = std::mem::size_of::<T>();
        match self {
            Kernels::PerCell(k) => k.weights().len() * per,
            Kernels::Shared { kernel, .. } => kernel.weights().len() * per,
        }
    }
}

/// Weighted sum of presynaptic activity into every cell over per-cell
/// kernels: `out[i] = sum_j sign(j) * (g if inhibitory else 1) * W_ij *
/// act[j]` over the window.
pub fn weighted_input_per_cell<T: Real>(
    kg: &KernelGrid<T>,
    ei: &EiField,
    g: T,
    activity: &[T],
    out: &mut [T],
) {
    let (w, h, r) = (kg.width(), kg.height(), kg.radius());
    let k2 = kg.k2();
    assert_eq!(activity.len(), w * h);
    assert_eq!(out.len(), w * h);
    let offsets: Vec<(isize, isize)> = (0..k2).map(|s| kg.slot_offset(s)).collect();
    let lin_offsets: Vec<isize> = offsets.iter().map(|&(dx, dy)| dy * w as isize + dx).collect();
    let weights = kg.weights();
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        let interior_y = y >= r && y + r < h;
        for (x, slot_out) in out_row.iter_mut().enumerate() {
            let cell = y * w + x;
            let kw = &weights[cell * k2..(cell + 1) * k2];
            let mut acc = T::zero();
            if interior_y && x >= r && x + r < w {
                for slot in 0..k2 {
                    let pre = (cell as isize + lin_offsets[slot]) as usize;
                    let a = activity[pre];
                    let wgt = kw[slot];
                    acc += if ei.is_excitatory(pre) { wgt * a } else { -g * wgt * a };
                }
            } else {
                for slot in 0..k2 {
                    let (dx, dy) = offsets[slot];
                    let pre = wrap(y as isize + dy, h) * w + wrap(x as isize + dx, w);
                    let a = activity[pre];
                    let wgt = kw[slot];
                    acc += if ei.is_excitatory(pre) { wgt * a } else { -g * wgt * a };
                }
            }
            *slot_out = acc;
        }
    });
}

/// Weighted input with one signed kernel shared by every cell (signs live in
/// the kernel values; no type map is consulted).
pub fn weighted_input_shared<T: Real>(
    kernel: &SharedKernel<T>,
    width: usize,
    height: usize,
    activity: &[T],
    out: &mut [T],
) {
    let (w, h) = (width, height);
    let r = kernel.radius();
    let k = 2 * r + 1;
    let k2 = k * k;
    assert_eq!(activity.len(), w * h);
    assert_eq!(out.len(), w * h);
    let offsets: Vec<(isize, isize)> = (0..k2)
        .map(|s| ((s % k) as isize - r as isize, (s / k) as isize - r as isize))
        .collect();
    let lin_offsets: Vec<isize> = offsets.iter().map(|&(dx, dy)| dy * w as isize + dx).collect();
    let kw = kernel.weights();
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        let interior_y = y >= r && y + r < h;
        for (x, slot_out) in out_row.iter_mut().enumerate() {
            let cell = y * w + x;
            let mut acc = T::zero();
            if interior_y && x >= r && x + r < w {
                for slot in 0..k2 {
                    acc += kw[slot] * activity[(cell as isize + lin_offsets[slot]) as usize];
                }
            } else {
                for slot in 0..k2 {
                    let (dx, dy) = offsets[slot];
                    let pre = wrap(y as isize + dy, h) * w + wrap(x as isize + dx, w);
                    acc += kw[slot] * activity[pre];
                }
            }
            *slot_out = acc;
        }
    });
}

/// Dispatching wrapper over [`weighted_input_per_cell`] /
/// [`weighted_input_shared`].
pub fn weighted_input<T: Real>(
    kernels: &Kernels<T>,
    ei: &EiField,
    g: T,
    activity: &[T],
    out: &mut [T],
) {
    match kernels {
        Kernels::PerCell(kg) => weighted_input_per_cell(kg, ei, g, activity, out),
        Kernels::Shared {
            width,
            height,
            kernel,
        } => weighted_input_shared(kernel, *width, *height, activity, out),
    }
}
