//! Multi-channel 2D grid with toroidal boundaries.
//!
//! Data is stored channel-outermost (one dense plane per channel, row-major
//! inside a plane) so stencil kernels stream one channel at a time. All
//! coordinate access wraps periodically; no out-of-bounds state exists.

use crate::error::{Error, Result};
use crate::float::Real;

/// Boundary policy. Only toroidal wrapping is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Periodic,
}

/// Wrap an index onto `[0, n)`.
#[inline(always)]
pub fn wrap(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i % n;
    (if m < 0 { m + n } else { m }) as usize
}

/// Dense width x height x channels field of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    channels: usize,
    boundary: Boundary,
    data: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::config(format!(
                "grid dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            boundary: Boundary::Periodic,
            data: vec![T::zero(); width * height * channels],
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        let mut g = Self::new(width, height, channels)?;
        g.data.fill(value);
        Ok(g)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut g = Self::new(width, height, channels)?;
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    let i = g.index(x, y, c);
                    g.data[i] = f(x, y, c);
                }
            }
        }
        Ok(g)
    }

    /// Single-channel grid wrapping an existing plane.
    pub fn from_plane(width: usize, height: usize, plane: Vec<T>) -> Result<Self> {
        if plane.len() != width * height {
            return Err(Error::shape(format!(
                "plane length {} != {width}x{height}",
                plane.len()
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::config("grid dimensions must be positive".to_string()));
        }
        Ok(Self {
            width,
            height,
            channels: 1,
            boundary: Boundary::Periodic,
            data: plane,
        })
    }

    #[inline(always)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline(always)]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline(always)]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of cells (not scalars).
    #[inline(always)]
    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    #[inline(always)]
    pub fn index(&self, x: usize, y: usize, channel: usize) -> usize {
        debug_assert!(x < self.width && y < self.height && channel < self.channels);
        channel * self.width * self.height + y * self.width + x
    }

    #[inline(always)]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> T {
        self.data[self.index(x, y, channel)]
    }

    #[inline(always)]
    pub fn set(&mut self, x: usize, y: usize, channel: usize, v: T) {
        let i = self.index(x, y, channel);
        self.data[i] = v;
    }

    /// Read at a possibly out-of-range coordinate, wrapping periodically.
    #[inline(always)]
    pub fn get_wrapped(&self, x: isize, y: isize, channel: usize) -> T {
        let xi = wrap(x, self.width);
        let yi = wrap(y, self.height);
        self.get(xi, yi, channel)
    }

    pub fn channel(&self, channel: usize) -> &[T] {
        let n = self.width * self.height;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn channel_mut(&mut self, channel: usize) -> &mut [T] {
        let n = self.width * self.height;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_shape<U: Real>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Patch view centered at `(cx, cy)` with odd side `size`.
    pub fn patch(&self, cx: usize, cy: usize, size: usize) -> Patch<'_, T> {
        debug_assert!(size % 2 == 1);
        let r = size / 2;
        let interior =
            cx >= r && cy >= r && cx + r < self.width && cy + r < self.height;
        Patch {
            grid: self,
            cx,
            cy,
            size,
            interior,
        }
    }
}

/// Logical k x k x channels window into a [`Grid`], periodic at the edges.
///
/// No data is copied; edge windows resolve wrapped coordinates on access.
#[derive(Clone, Copy)]
pub struct Patch<'a, T> {
    grid: &'a Grid<T>,
    cx: usize,
    cy: usize,
    size: usize,
    interior: bool,
}

impl<'a, T: Real> Patch<'a, T> {
    #[inline(always)]
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn center_xy(&self) -> (usize, usize) {
        (self.cx, self.cy)
    }

    /// Value at offset `(dx, dy)` from the center, `|dx|,|dy| <= size/2`.
    #[inline(always)]
    pub fn get(&self, dx: isize, dy: isize, channel: usize) -> T {
        debug_assert!(dx.unsigned_abs() <= self.size / 2 && dy.unsigned_abs() <= self.size / 2);
        if self.interior {
            let x = (self.cx as isize + dx) as usize;
            let y = (self.cy as isize + dy) as usize;
            self.grid.get(x, y, channel)
        } else {
            self.grid
                .get_wrapped(self.cx as isize + dx, self.cy as isize + dy, channel)
        }
    }

    /// Center-cell value.
    #[inline(always)]
    pub fn center(&self, channel: usize) -> T {
        self.grid.get(self.cx, self.cy, channel)
    }

    /// Materialize the window, channel-outermost then row-major (same layout
    /// convention as the grid itself).
    pub fn values(&self) -> Vec<T> {
        let r = self.size as isize / 2;
        let mut out = Vec::with_capacity(self.size * self.size * self.grid.channels);
        for c in 0..self.grid.channels {
            for dy in -r..=r {
                for dx in -r..=r {
                    out.push(self.get(dx, dy, c));
                }
            }
        }
        out
    }
}

fn check_patch_size<T: Real>(grid: &Grid<T>, patch_size: usize) -> Result<()> {
    if patch_size % 2 == 0 || patch_size == 0 {
        return Err(Error::config(format!(
            "patch size must be odd and positive, got {patch_size}"
        )));
    }
    if patch_size > grid.width() || patch_size > grid.height() {
        return Err(Error::config(format!(
            "patch size {patch_size} exceeds grid {}x{}",
            grid.width(),
            grid.height()
        )));
    }
    Ok(())
}

/// One patch per cell, row-major over centers.
pub fn unfold<T: Real>(
    grid: &Grid<T>,
    patch_size: usize,
) -> Result<impl Iterator<Item = Patch<'_, T>>> {
    check_patch_size(grid, patch_size)?;
    let (w, h) = (grid.width(), grid.height());
    Ok((0..w * h).map(move |i| grid.patch(i % w, i / w, patch_size)))
}

/// Square odd-sided stencil weights, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    size: usize,
    weights: Vec<T>,
}

impl<T: Real> Kernel<T> {
    pub fn new(size: usize, weights: Vec<T>) -> Result<Self> {
        if size % 2 == 0 || size == 0 {
            return Err(Error::config(format!("kernel side must be odd, got {size}")));
        }
        if weights.len() != size * size {
            return Err(Error::shape(format!(
                "kernel expects {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        Ok(Self { size, weights })
    }

    /// 1 at the center, 0 elsewhere.
    pub fn delta(size: usize) -> Result<Self> {
        let mut w = vec![T::zero(); size * size];
        w[size * size / 2] = T::one();
        Self::new(size, w)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline(always)]
    fn at(&self, dx: isize, dy: isize) -> T {
        let r = self.size as isize / 2;
        self.weights[((dy + r) * self.size as isize + (dx + r)) as usize]
    }
}

/// Sliding-window weighted sum (cross-correlation convention: the kernel is
/// not flipped). Single-channel input, periodic boundaries.
///
/// Exact-zero kernel entries are skipped, so e.g. the delta kernel returns
/// the input bitwise.
pub fn conv2d<T: Real>(grid: &Grid<T>, kernel: &Kernel<T>) -> Result<Grid<T>> {
    if grid.channels() != 1 {
        return Err(Error::config(format!(
            "conv2d expects a single-channel grid, got {} channels",
            grid.channels()
        )));
    }
    check_patch_size(grid, kernel.size())?;
    let r = kernel.size() as isize / 2;
    let mut out = Grid::new(grid.width(), grid.height(), 1)?;
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let patch = grid.patch(x, y, kernel.size());
            let mut acc = T::zero();
            for dy in -r..=r {
                for dx in -r..=r {
                    let w = kernel.at(dx, dy);
                    if w != T::zero() {
                        acc = acc + w * patch.get(dx, dy, 0);
                    }
                }
            }
            out.set(x, y, 0, acc);
        }
    }
    Ok(out)
}

/// Five-point discrete Laplacian: sum of the four orthogonal neighbors minus
/// four times the center, periodic.
pub fn laplacian<T: Real>(field: &Grid<T>) -> Result<Grid<T>> {
    if field.channels() != 1 {
        return Err(Error::config(format!(
            "laplacian expects a single-channel grid, got {} channels",
            field.channels()
        )));
    }
    let four = T::of(4.0);
    let mut out = Grid::new(field.width(), field.height(), 1)?;
    for y in 0..field.height() {
        for x in 0..field.width() {
            let p = field.patch(x, y, 3);
            let v = p.get(-1, 0, 0) + p.get(1, 0, 0) + p.get(0, -1, 0) + p.get(0, 1, 0)
                - four * p.center(0);
            out.set(x, y, 0, v);
        }
    }
    Ok(out)
}

/// Which cells of the window participate in [`neighborhood_mean`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodShape {
    /// Full square window.
    Square,
    /// Orthogonal cross (the four nearest neighbors); requires patch size 3.
    VonNeumann,
}

/// Per-cell mean over the window, optionally excluding the center.
pub fn neighborhood_mean<T: Real>(
    field: &Grid<T>,
    patch_size: usize,
    shape: NeighborhoodShape,
    exclude_center: bool,
) -> Result<Grid<T>> {
    if field.channels() != 1 {
        return Err(Error::config("neighborhood_mean expects a single channel".to_string()));
    }
    check_patch_size(field, patch_size)?;
    if shape == NeighborhoodShape::VonNeumann && patch_size != 3 {
        return Err(Error::config(format!(
            "Von Neumann neighborhood requires patch size 3, got {patch_size}"
        )));
    }
    let r = patch_size as isize / 2;
    let mut out = Grid::new(field.width(), field.height(), 1)?;
    for y in 0..field.height() {
        for x in 0..field.width() {
            let p = field.patch(x, y, patch_size);
            let mut acc = T::zero();
            let mut n = 0usize;
            match shape {
                NeighborhoodShape::Square => {
                    for dy in -r..=r {
                        for dx in -r..=r {
                            if exclude_center && dx == 0 && dy == 0 {
                                continue;
                            }
                            acc = acc + p.get(dx, dy, 0);
                            n += 1;
                        }
                    }
                }
                NeighborhoodShape::VonNeumann => {
                    for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                        acc = acc + p.get(dx, dy, 0);
                        n += 1;
                    }
                    if !exclude_center {
                        acc = acc + p.center(0);
                        n += 1;
                    }
                }
            }
            out.set(x, y, 0, acc / T::of(n as f64));
        }
    }
    Ok(out)
}
