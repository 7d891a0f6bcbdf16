//! Cell-centered rectangular grids, scalar fields, discrete operators and norms.
//!
//! Cells are indexed `i + nx * j`. A 1D grid is stored as an `nx × 1` grid whose
//! second axis has unit width, so cell volumes are lengths and boundary faces
//! have unit area.

pub mod flux;
pub mod snapshot;

use crate::error::{domain, Result};
use crate::scalar::Real;

/// Default fraction of each axis excluded from the interior subdomain `U′`.
pub const DEFAULT_INTERIOR_MARGIN: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Full,
    /// The interior subdomain `U′`.
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    /// Outward normal along the face axis: `-1` for west/south, `+1` for east/north.
    pub fn outward_sign(self) -> i8 {
        match self {
            Side::West | Side::South => -1,
            Side::East | Side::North => 1,
        }
    }

    pub fn axis(self) -> usize {
        match self {
            Side::West | Side::East => 0,
            Side::South | Side::North => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    extents: [T; 2],
    cells: [usize; 2],
    spacing: [T; 2],
    margin: T,
}

impl<T: Real> Grid<T> {
    pub fn new_1d(length: T, cells: usize) -> Result<Self> {
        Self::build(1, [length, T::one()], [cells, 1])
    }

    pub fn new_2d(extents: [T; 2], cells: [usize; 2]) -> Result<Self> {
        Self::build(2, extents, cells)
    }

    /// `[0, L]` or `[0, Lx] × [0, Ly]` depending on `dim`.
    pub fn new(dim: usize, extents: &[T], cells: &[usize]) -> Result<Self> {
        match (dim, extents, cells) {
            (1, [l], [n]) => Self::new_1d(*l, *n),
            (2, [lx, ly], [nx, ny]) => Self::new_2d([*lx, *ly], [*nx, *ny]),
            (1 | 2, _, _) => domain("extents and cells must have one entry per axis"),
            _ => domain(format!("dimension must be 1 or 2, got {dim}")),
        }
    }

    fn build(dim: usize, extents: [T; 2], cells: [usize; 2]) -> Result<Self> {
        if cells.iter().any(|&c| c == 0) {
            return domain("every axis needs at least one cell");
        }
        if extents.iter().any(|&e| !(e > T::zero()) || !e.is_finite()) {
            return domain("extents must be positive and finite");
        }
        let spacing = [
            extents[0] / T::from_usize_lossy(cells[0]),
            extents[1] / T::from_usize_lossy(cells[1]),
        ];
        Ok(Self {
            dim,
            extents,
            cells,
            spacing,
            margin: T::lit(DEFAULT_INTERIOR_MARGIN),
        })
    }

    /// Sets the interior margin; `U′` must stay nonempty.
    pub fn with_margin(mut self, margin: T) -> Result<Self> {
        if !(margin >= T::zero() && margin < T::lit(0.5)) {
            return domain("interior margin must lie in [0, 0.5)");
        }
        self.margin = margin;
        self.interior_bounds()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Extents of the active axes.
    pub fn extents(&self) -> &[T] {
        &self.extents[..self.dim]
    }

    /// Cell counts of the active axes.
    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing[..self.dim]
    }

    pub fn margin(&self) -> T {
        self.margin
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn hx(&self) -> T {
        self.spacing[0]
    }

    pub fn hy(&self) -> T {
        self.spacing[1]
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn cell_volume(&self) -> T {
        self.spacing[0] * self.spacing[1]
    }

    /// `|U|`.
    pub fn volume(&self) -> T {
        self.extents[0] * self.extents[1]
    }

    /// `|Γ|`: two points in 1D, the perimeter in 2D.
    pub fn boundary_measure(&self) -> T {
        if self.dim == 1 {
            T::lit(2.0)
        } else {
            T::lit(2.0) * (self.extents[0] + self.extents[1])
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    /// Center of cell `idx`; the second coordinate is `0.5` in 1D.
    pub fn cell_center(&self, idx: usize) -> [T; 2] {
        let (i, j) = self.coords(idx);
        let half = T::lit(0.5);
        [
            (T::from_usize_lossy(i) + half) * self.spacing[0],
            (T::from_usize_lossy(j) + half) * self.spacing[1],
        ]
    }

    /// Half-open index ranges `[i0, i1) × [j0, j1)` of `U′`.
    pub fn interior_bounds(&self) -> Result<([usize; 2], [usize; 2])> {
        let mut lo = [0, 0];
        let mut hi = [self.cells[0], self.cells[1]];
        for axis in 0..self.dim {
            let n = self.cells[axis];
            let m = (self.margin * T::from_usize_lossy(n)).ceil().to_usize().unwrap_or(n);
            if 2 * m >= n {
                return domain(format!("interior subdomain is empty on axis {axis} ({n} cells, margin {m})"));
            }
            lo[axis] = m;
            hi[axis] = n - m;
        }
        Ok((lo, hi))
    }

    /// Cell indices of a region, in index order.
    pub fn region_cells(&self, region: Region) -> Result<Vec<usize>> {
        let (lo, hi) = match region {
            Region::Full => ([0, 0], [self.cells[0], self.cells[1]]),
            Region::Interior => self.interior_bounds()?,
        };
        let mut out = Vec::with_capacity((hi[0] - lo[0]) * (hi[1] - lo[1]));
        for j in lo[1]..hi[1] {
            for i in lo[0]..hi[0] {
                out.push(self.index(i, j));
            }
        }
        Ok(out)
    }

    /// Number of interior faces per axis: `(nx−1)·ny` and `nx·(ny−1)`.
    pub fn interior_face_count(&self) -> usize {
        let [nx, ny] = self.cells;
        let mut n = (nx - 1) * ny;
        if self.dim == 2 {
            n += nx * (ny - 1);
        }
        n
    }

    /// Interior face stencils, x-faces first then y-faces.
    pub fn face_stencils(&self) -> Vec<FaceStencil<T>> {
        let [nx, ny] = self.cells;
        let mut out = Vec::with_capacity(self.interior_face_count());
        for j in 0..ny {
            for i in 1..nx {
                out.push(self.stencil(0, self.index(i - 1, j), self.index(i, j)));
            }
        }
        if self.dim == 2 {
            for j in 1..ny {
                for i in 0..nx {
                    out.push(self.stencil(1, self.index(i, j - 1), self.index(i, j)));
                }
            }
        }
        out
    }

    fn stencil(&self, axis: usize, left: usize, right: usize) -> FaceStencil<T> {
        let inv_h = self.spacing[axis].recip();
        let (area, dual_volume) = if axis == 0 {
            (self.spacing[1], self.cell_volume())
        } else {
            (self.spacing[0], self.cell_volume())
        };
        let mut tangential = Vec::new();
        if self.dim == 2 {
            let t_axis = 1 - axis;
            let n_t = self.cells[t_axis];
            let mut entries: Vec<(usize, T)> = Vec::new();
            let mut count = 0usize;
            for &cell in &[left, right] {
                let (i, j) = self.coords(cell);
                let pos = if t_axis == 0 { i } else { j };
                let shift = |p: usize| {
                    if t_axis == 0 {
                        self.index(p, j)
                    } else {
                        self.index(i, p)
                    }
                };
                if pos + 1 < n_t {
                    entries.push((shift(pos + 1), T::one()));
                    entries.push((cell, -T::one()));
                    count += 1;
                }
                if pos > 0 {
                    entries.push((cell, T::one()));
                    entries.push((shift(pos - 1), -T::one()));
                    count += 1;
                }
            }
            if count > 0 {
                let scale = (T::from_usize_lossy(count) * self.spacing[t_axis]).recip();
                for (cell, w) in entries {
                    match tangential.iter_mut().find(|(c, _): &&mut (usize, T)| *c == cell) {
                        Some((_, acc)) => *acc = *acc + w * scale,
                        None => tangential.push((cell, w * scale)),
                    }
                }
                tangential.retain(|(_, w)| *w != T::zero());
            }
        }
        FaceStencil {
            axis,
            left,
            right,
            inv_h,
            area,
            dual_volume,
            tangential,
        }
    }

    /// Boundary faces in the order west, east, south, north.
    pub fn boundary_faces(&self) -> Vec<BoundaryFace<T>> {
        let [nx, ny] = self.cells;
        let half = T::lit(0.5);
        let mut out = Vec::new();
        for (side, i) in [(Side::West, 0), (Side::East, nx - 1)] {
            let x = if side == Side::West { T::zero() } else { self.extents[0] };
            for j in 0..ny {
                out.push(BoundaryFace {
                    side,
                    cell: self.index(i, j),
                    center: [x, (T::from_usize_lossy(j) + half) * self.spacing[1]],
                    area: self.spacing[1],
                });
            }
        }
        if self.dim == 2 {
            for (side, j) in [(Side::South, 0), (Side::North, ny - 1)] {
                let y = if side == Side::South { T::zero() } else { self.extents[1] };
                for i in 0..nx {
                    out.push(BoundaryFace {
                        side,
                        cell: self.index(i, j),
                        center: [(T::from_usize_lossy(i) + half) * self.spacing[0], y],
                        area: self.spacing[0],
                    });
                }
            }
        }
        out
    }
}

/// Reconstruction of the gradient on one interior face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceStencil<T> {
    /// Axis of the face normal.
    pub axis: usize,
    /// Cell on the low side.
    pub left: usize,
    /// Cell on the high side.
    pub right: usize,
    /// Reciprocal distance between the two cell centers.
    pub inv_h: T,
    pub area: T,
    /// Volume of the diamond cell attached to the face, `area / inv_h`.
    pub dual_volume: T,
    /// Weights of the tangential derivative, `∂_t p = Σ w p[cell]`.
    pub tangential: Vec<(usize, T)>,
}

impl<T: Real> FaceStencil<T> {
    #[inline]
    pub fn normal(&self, v: &[T]) -> T {
        (v[self.right] - v[self.left]) * self.inv_h
    }

    #[inline]
    pub fn tangent(&self, v: &[T]) -> T {
        self.tangential.iter().map(|&(c, w)| w * v[c]).sum()
    }

    /// Gradient in global axes `[∂x, ∂y]`.
    #[inline]
    pub fn gradient(&self, v: &[T]) -> [T; 2] {
        let n = self.normal(v);
        let t = self.tangent(v);
        if self.axis == 0 {
            [n, t]
        } else {
            [t, n]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace<T> {
    pub side: Side,
    /// Adjacent cell.
    pub cell: usize,
    /// Face midpoint; the second coordinate is `0.5` in 1D.
    pub center: [T; 2],
    pub area: T,
}

/// Face-normal fluxes in the positive axis direction on every face, boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxes<T> {
    /// `(nx+1)·ny` values indexed `i + (nx+1) j`.
    pub x: Vec<T>,
    /// `nx·(ny+1)` values indexed `i + nx j`; empty in 1D.
    pub y: Vec<T>,
}

impl<T: Real> FaceFluxes<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        let [nx, ny] = grid.cells;
        let y = if grid.dim == 2 { vec![T::zero(); nx * (ny + 1)] } else { Vec::new() };
        Self {
            x: vec![T::zero(); (nx + 1) * ny],
            y,
        }
    }

    /// Cellwise `∇·F`.
    pub fn divergence(&self, grid: &Grid<T>) -> Vec<T> {
        let [nx, ny] = grid.cells;
        let [hx, hy] = grid.spacing;
        let mut div = vec![T::zero(); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let xi = i + (nx + 1) * j;
                let mut d = (self.x[xi + 1] - self.x[xi]) / hx;
                if grid.dim == 2 {
                    d = d + (self.y[i + nx * (j + 1)] - self.y[i + nx * j]) / hy;
                }
                div[grid.index(i, j)] = d;
            }
        }
        div
    }

    /// `∫_Γ F·ν`.
    pub fn boundary_outflow(&self, grid: &Grid<T>) -> T {
        let [nx, ny] = grid.cells;
        let [hx, hy] = grid.spacing;
        let mut total = T::zero();
        for j in 0..ny {
            total = total + (self.x[nx + (nx + 1) * j] - self.x[(nx + 1) * j]) * hy;
        }
        if grid.dim == 2 {
            for i in 0..nx {
                total = total + (self.y[i + nx * ny] - self.y[i]) * hx;
            }
        }
        total
    }
}

/// Per-cell values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return domain(format!("field has {} values for {} cells", values.len(), grid.n_cells()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("field values must be finite");
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Grid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        Self::new_unchecked(grid, vec![c; grid.n_cells()])
    }

    /// Samples `f(x, y)` at cell centers (`y = 0.5` in 1D).
    pub fn from_fn(grid: Grid<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let values = (0..grid.n_cells())
            .map(|c| {
                let [x, y] = grid.cell_center(c);
                f(x, y)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Midpoint-rule `∫_U v`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_usize_lossy(self.values.len())
    }

    pub fn zero_mean_shift(&self) -> Self {
        let m = self.mean();
        let values = self.values.iter().map(|&v| v - m).collect();
        Self::new_unchecked(self.grid, values)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return domain("fields live on different grids");
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        Ok(Self::new_unchecked(self.grid, values))
    }

    pub fn scale(&self, c: T) -> Self {
        Self::new_unchecked(self.grid, self.values.iter().map(|&v| v * c).collect())
    }

    /// `‖v‖_{L^s}` over a region; `s = ∞` gives the max norm.
    pub fn norm_ls(&self, s: T, region: Region) -> Result<T> {
        let cells = self.grid.region_cells(region)?;
        lebesgue_norm(cells.iter().map(|&c| self.values[c]), s, self.grid.cell_volume())
    }

    /// Gradient at interior faces.
    pub fn face_gradient(&self) -> Vec<[T; 2]> {
        self.grid
            .face_stencils()
            .iter()
            .map(|st| st.gradient(&self.values))
            .collect()
    }

    /// Cell gradients: each component averages the normal differences of the
    /// adjacent interior faces along that axis.
    pub fn cell_gradients(&self) -> Vec<[T; 2]> {
        let g = &self.grid;
        let [nx, ny] = g.cells;
        let v = &self.values;
        let half = T::lit(0.5);
        let axis_component = |c: usize, lo: Option<usize>, hi: Option<usize>, h: T| match (lo, hi) {
            (Some(l), Some(r)) => (v[r] - v[l]) * half / h,
            (Some(l), None) => (v[c] - v[l]) / h,
            (None, Some(r)) => (v[r] - v[c]) / h,
            (None, None) => T::zero(),
        };
        let mut out = Vec::with_capacity(g.n_cells());
        for j in 0..ny {
            for i in 0..nx {
                let c = g.index(i, j);
                let gx = axis_component(
                    c,
                    (i > 0).then(|| c - 1),
                    (i + 1 < nx).then(|| c + 1),
                    g.spacing[0],
                );
                let gy = if g.dim == 2 {
                    axis_component(
                        c,
                        (j > 0).then(|| c - nx),
                        (j + 1 < ny).then(|| c + nx),
                        g.spacing[1],
                    )
                } else {
                    T::zero()
                };
                out.push([gx, gy]);
            }
        }
        out
    }

    /// `‖∇v‖_{L^s}` from the cell gradients.
    pub fn gradient_norm_ls(&self, s: T, region: Region) -> Result<T> {
        let cells = self.grid.region_cells(region)?;
        let grads = self.cell_gradients();
        lebesgue_norm(
            cells.iter().map(|&c| grads[c][0].hypot(grads[c][1])),
            s,
            self.grid.cell_volume(),
        )
    }

    /// Frobenius magnitude of the central-difference Hessian at cells whose
    /// neighbours all exist, paired with the cell index.
    pub fn hessian_magnitudes(&self, region: Region) -> Result<Vec<(usize, T)>> {
        let g = &self.grid;
        let [nx, ny] = g.cells;
        if nx < 3 || (g.dim == 2 && ny < 3) {
            return domain("Hessian needs at least 3 cells per axis");
        }
        let v = &self.values;
        let [hx, hy] = g.spacing;
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let mut out = Vec::new();
        for c in g.region_cells(region)? {
            let (i, j) = g.coords(c);
            if i == 0 || i + 1 == nx || (g.dim == 2 && (j == 0 || j + 1 == ny)) {
                continue;
            }
            let pxx = (v[c + 1] - two * v[c] + v[c - 1]) / (hx * hx);
            let mag = if g.dim == 2 {
                let pyy = (v[c + nx] - two * v[c] + v[c - nx]) / (hy * hy);
                let pxy = (v[c + nx + 1] - v[c + nx - 1] - v[c - nx + 1] + v[c - nx - 1]) / (four * hx * hy);
                (pxx * pxx + pyy * pyy + two * pxy * pxy).sqrt()
            } else {
                pxx.abs()
            };
            out.push((c, mag));
        }
        if out.is_empty() {
            return domain("region contains no cell with a full Hessian stencil");
        }
        Ok(out)
    }

    /// `‖∇²v‖_{L^{2−δ}}` over a region.
    pub fn hessian_norm(&self, delta: T, region: Region) -> Result<T> {
        if !(delta > T::zero() && delta < T::one()) {
            return domain("δ must lie in (0, 1)");
        }
        let mags = self.hessian_magnitudes(region)?;
        lebesgue_norm(mags.into_iter().map(|(_, m)| m), T::lit(2.0) - delta, self.grid.cell_volume())
    }
}

/// `(Σ |v|^s vol)^{1/s}`, or `max |v|` for `s = ∞`.
pub fn lebesgue_norm<T: Real>(values: impl Iterator<Item = T>, s: T, cell_volume: T) -> Result<T> {
    if s.is_nan() || s < T::one() {
        return domain(format!("Lebesgue exponent must be at least 1, got {s}"));
    }
    if s.is_infinite() {
        return Ok(values.map(|v| v.abs()).fold(T::zero(), T::max));
    }
    if s == T::lit(2.0) {
        return Ok((values.map(|v| v * v).sum::<T>() * cell_volume).sqrt());
    }
    let total: T = values.map(|v| v.abs().powf(s)).sum();
    Ok((total * cell_volume).powf(s.recip()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_1d(n: usize) -> Grid<f64> {
        Grid::<f64>::new_1d(1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::<f64>::new_1d(1.0, 0).is_err());
        assert!(Grid::<f64>::new_1d(-1.0, 4).is_err());
        assert!(Grid::<f64>::new(3, &[1.0; 3], &[2; 3]).is_err());
        assert!(Grid::<f64>::new(2, &[1.0], &[2]).is_err());
        assert!(unit_1d(4).with_margin(0.5).is_err());
        assert!(unit_1d(2).with_margin(0.25).is_err());
        let g = unit_1d(8);
        assert_eq!(g.interior_bounds().unwrap(), ([1, 0], [7, 1]));
        let g2 = Grid::<f64>::new_2d([2.0, 1.0], [16, 8]).unwrap();
        assert_eq!(g2.interior_bounds().unwrap(), ([2, 1], [14, 7]));
        assert_eq!(g2.hx(), 0.125);
        assert_eq!(g2.boundary_measure(), 6.0);
        assert_eq!(g2.region_cells(Region::Interior).unwrap().len(), 12 * 6);
    }

    #[test]
    fn face_gradient_exact_on_linears() {
        let g = unit_1d(7);
        let f = ScalarField::from_fn(g, |x, _| x).unwrap();
        for grad in f.face_gradient() {
            assert!((grad[0] - 1.0).abs() < 1e-12);
            assert_eq!(grad[1], 0.0);
        }
        let g2 = Grid::<f64>::new_2d([1.0, 2.0], [5, 6]).unwrap();
        let f = ScalarField::from_fn(g2, |x, y| 3.0 * x - 2.0 * y + 1.0).unwrap();
        for grad in f.face_gradient() {
            assert!((grad[0] - 3.0).abs() < 1e-12 && (grad[1] + 2.0).abs() < 1e-12, "{grad:?}");
        }
        let c = ScalarField::constant(g2, 4.0);
        assert!(c.face_gradient().iter().all(|g| g == &[0.0, 0.0]));
    }

    #[test]
    fn face_gradient_of_quadratic_at_midpoint() {
        let g = unit_1d(10);
        let f = ScalarField::from_fn(g, |x, _| x * x).unwrap();
        // face between cells 4 and 5 sits at x = 0.5
        let grad = f.face_gradient()[4];
        assert!((grad[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norms() {
        let g = Grid::<f64>::new_2d([1.0, 1.0], [4, 4]).unwrap();
        let c = ScalarField::constant(g, -3.0);
        assert!((c.norm_ls(2.0, Region::Full).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(c.norm_ls(f64::INFINITY, Region::Interior).unwrap(), 3.0);
        let half = ScalarField::from_fn(g, |x, _| if x < 0.5 { 2.0 } else { 0.0 }).unwrap();
        assert!((half.norm_ls(2.0, Region::Full).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!(c.norm_ls(0.5, Region::Full).is_err());
        let s = ScalarField::from_fn(unit_1d(512), |x, _| (PI * x).sin()).unwrap();
        assert!((s.norm_ls(2.0, Region::Full).unwrap() - 0.5f64.sqrt()).abs() < 1e-4);
        assert!((s.norm_ls(3.0, Region::Full).unwrap() - (4.0 / (3.0 * PI)).cbrt()).abs() < 1e-4);
    }

    #[test]
    fn gradient_and_hessian_norms() {
        let lin = ScalarField::from_fn(unit_1d(32), |x, _| x).unwrap();
        assert!((lin.gradient_norm_ls(2.0, Region::Full).unwrap() - 1.0).abs() < 1e-12);
        assert!(lin.hessian_norm(0.3, Region::Full).unwrap() < 1e-9);
        let q = ScalarField::from_fn(Grid::<f64>::new_2d([1.0, 1.0], [10, 10]).unwrap(), |x, _| 0.5 * x * x).unwrap();
        for (_, m) in q.hessian_magnitudes(Region::Full).unwrap() {
            assert!((m - 1.0).abs() < 1e-9);
        }
        let xy = ScalarField::from_fn(Grid::<f64>::new_2d([1.0, 1.0], [10, 10]).unwrap(), |x, y| x * y).unwrap();
        for (_, m) in xy.hessian_magnitudes(Region::Interior).unwrap() {
            assert!((m - 2f64.sqrt()).abs() < 1e-9);
        }
        let s = ScalarField::from_fn(unit_1d(512), |x, _| (PI * x).sin()).unwrap();
        let n = s.gradient_norm_ls(2.0, Region::Full).unwrap();
        assert!((n - PI / 2f64.sqrt()).abs() < 1e-3, "{n}");
        assert!(ScalarField::constant(unit_1d(2), 0.0).hessian_norm(0.5, Region::Full).is_err());
    }

    #[test]
    fn zero_mean_shift_examples() {
        let c = ScalarField::constant(unit_1d(5), 7.0);
        assert!(c.zero_mean_shift().values().iter().all(|&v| v == 0.0));
        let lin = ScalarField::from_fn(unit_1d(4), |x, _| x).unwrap();
        let shifted = lin.zero_mean_shift();
        for (a, b) in shifted.values().iter().zip(lin.values()) {
            assert!((a - (b - 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_telescopes() {
        let g = Grid::<f64>::new_2d([1.5, 0.5], [6, 3]).unwrap();
        let mut f = FaceFluxes::zeros(&g);
        for (k, v) in f.x.iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        for (k, v) in f.y.iter_mut().enumerate() {
            *v = (k as f64 * 1.3).cos();
        }
        let total: f64 = f.divergence(&g).iter().sum::<f64>() * g.cell_volume();
        let out = f.boundary_outflow(&g);
        assert!((total - out).abs() <= 1e-12 * out.abs().max(1.0));
    }

    #[test]
    fn stencil_tangential_weights_sum_to_zero() {
        let g = Grid::<f64>::new_2d([1.0, 1.0], [4, 3]).unwrap();
        let st = g.face_stencils();
        assert_eq!(st.len(), g.interior_face_count());
        for s in &st {
            let total: f64 = s.tangential.iter().map(|(_, w)| w).sum();
            assert!(total.abs() < 1e-12);
            assert!(!s.tangential.is_empty());
        }
        assert!(unit_1d(4).face_stencils().iter().all(|s| s.tangential.is_empty()));
    }

    #[test]
    fn boundary_faces_cover_perimeter() {
        let g = Grid::<f64>::new_2d([2.0, 1.0], [4, 3]).unwrap();
        let faces = g.boundary_faces();
        assert_eq!(faces.len(), 2 * 3 + 2 * 4);
        let perimeter: f64 = faces.iter().map(|f| f.area).sum();
        assert!((perimeter - g.boundary_measure()).abs() < 1e-14);
        let one = unit_1d(3).boundary_faces();
        assert_eq!(one.len(), 2);
        assert_eq!(one[1].cell, 2);
        assert_eq!(one[1].center[0], 1.0);
    }
}
