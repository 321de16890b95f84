//! Uniform 2-D cell-centered mesh and finite-difference operators.
//!
//! Fields live at cell centers `((i+1/2)hx, (j+1/2)hy)`. Boundary conditions
//! are realized through ghost cells: mirror reflection for homogeneous
//! Neumann (exact zero normal flux, M-matrix Laplacian) and linear reflection
//! through the boundary value for constant Dirichlet data. Vector quantities
//! (velocities, fluxes) live on cell faces: x-components on the `(nx+1) x ny`
//! vertical faces, y-components on the `nx x (ny+1)` horizontal faces.
//!
//! Reductions use compensated (Neumaier) summation in a fixed order so that
//! telescoping flux sums cancel to round-off and results are reproducible.

use std::io::Write;
use std::path::Path;

use crate::error::{ChdError, Result};

/// Uniform rectangular mesh over `[0,lx] x [0,ly]` with `nx x ny` cells.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(ChdError::config(format!(
                "grid must have at least 4 cells per direction, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0) || !(ly > 0.0) {
            return Err(ChdError::config(format!(
                "domain side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Grid2D { nx, ny, lx, ly })
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Smallest cell spacing, used for CFL-type guards and default mollification.
    #[inline]
    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    #[inline]
    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Center coordinates of cell `(i, j)`.
    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }
}

/// Boundary condition tag determining the ghost-cell extension of a field.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Bc {
    /// Mirror ghost: `ghost = inner`, so the normal derivative vanishes.
    NeumannZero,
    /// Linear reflection through the boundary value: `ghost = 2c - inner`.
    DirichletConst(f64),
}

impl Bc {
    #[inline]
    pub(crate) fn ghost(&self, inner: f64) -> f64 {
        match self {
            Bc::NeumannZero => inner,
            Bc::DirichletConst(c) => 2.0 * c - inner,
        }
    }
}

/// Scalar grid function on cell centers with a boundary-condition tag.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub bc: Bc,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, bc: Bc, fill: f64) -> Self {
        ScalarField {
            grid,
            bc,
            values: vec![fill; grid.ncells()],
        }
    }

    pub fn from_values(grid: Grid2D, bc: Bc, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.ncells());
        ScalarField { grid, bc, values }
    }

    pub fn from_fn(grid: Grid2D, bc: Bc, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.ncells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField { grid, bc, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Value at logical index `(i, j)` where indices one step outside the
    /// mesh resolve to the ghost value dictated by the boundary tag.
    #[inline]
    fn at_ghost(&self, i: isize, j: isize) -> f64 {
        let nx = self.grid.nx as isize;
        let ny = self.grid.ny as isize;
        debug_assert!(i >= -1 && i <= nx && j >= -1 && j <= ny);
        let ii = i.clamp(0, nx - 1) as usize;
        let jj = j.clamp(0, ny - 1) as usize;
        let inner = self.values[self.grid.idx(ii, jj)];
        if i < 0 || i >= nx || j < 0 || j >= ny {
            self.bc.ghost(inner)
        } else {
            inner
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Compensated (Neumaier) summation over a slice, fixed left-to-right order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic cell average of a field.
pub fn mean(f: &ScalarField) -> f64 {
    compensated_sum(&f.values) / f.values.len() as f64
}

/// Cell average of raw cell values on a grid.
pub fn mean_values(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

/// `sum(f) * cell_area`, the discrete integral over the rectangle.
pub fn integral(f: &ScalarField) -> f64 {
    compensated_sum(&f.values) * f.grid.cell_area()
}

/// Allocation-free 5-point Laplacian on raw cell values with the given
/// boundary tag. The ghost of a boundary cell reflects that cell itself, so
/// only the center value is needed at the boundary.
pub fn laplacian_values(grid: Grid2D, bc: Bc, x: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let ihx2 = 1.0 / (grid.hx() * grid.hx());
    let ihy2 = 1.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = x[k];
            let w = if i > 0 { x[k - 1] } else { bc.ghost(c) };
            let e = if i + 1 < nx { x[k + 1] } else { bc.ghost(c) };
            let s = if j > 0 { x[k - nx] } else { bc.ghost(c) };
            let n = if j + 1 < ny { x[k + nx] } else { bc.ghost(c) };
            out[k] = (w - 2.0 * c + e) * ihx2 + (s - 2.0 * c + n) * ihy2;
        }
    }
}

/// 5-point Laplacian with ghost cells per the field's boundary tag.
/// The output is a plain cell-value vector and carries no boundary tag.
pub fn laplacian(f: &ScalarField) -> Vec<f64> {
    let mut out = vec![0.0; f.grid.ncells()];
    laplacian_values(f.grid, f.bc, &f.values, &mut out);
    out
}

/// Face-centered vector field: x-components on vertical faces
/// (`(nx+1) x ny`), y-components on horizontal faces (`nx x (ny+1)`).
/// Also used for face-averaged scalar coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid2D,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        VectorField {
            grid,
            x: vec![0.0; (grid.nx + 1) * grid.ny],
            y: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    #[inline]
    pub fn xi(&self, i: usize, j: usize) -> usize {
        j * (self.grid.nx + 1) + i
    }

    #[inline]
    pub fn yi(&self, i: usize, j: usize) -> usize {
        j * self.grid.nx + i
    }

    /// Set the normal components on the outer boundary to zero.
    pub fn zero_boundary_normals(&mut self) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for j in 0..ny {
            let a = self.xi(0, j);
            let b = self.xi(nx, j);
            self.x[a] = 0.0;
            self.x[b] = 0.0;
        }
        for i in 0..nx {
            let a = self.yi(i, 0);
            let b = self.yi(i, ny);
            self.y[a] = 0.0;
            self.y[b] = 0.0;
        }
    }

    pub fn boundary_normals_are_zero(&self) -> bool {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        (0..ny).all(|j| self.x[self.xi(0, j)] == 0.0 && self.x[self.xi(nx, j)] == 0.0)
            && (0..nx).all(|i| self.y[self.yi(i, 0)] == 0.0 && self.y[self.yi(i, ny)] == 0.0)
    }

    /// Largest face-component magnitude.
    pub fn max_abs(&self) -> f64 {
        let mx = self.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let my = self.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        mx.max(my)
    }

    /// Discrete L2 norm with boundary faces carrying half weight (each
    /// boundary face owns half a cell of quadrature area). With this weight
    /// the discrete energy identity of the stepper closes exactly.
    pub fn l2_norm(&self) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut terms = Vec::with_capacity(self.x.len() + self.y.len());
        for j in 0..ny {
            for i in 0..=nx {
                let w = if i == 0 || i == nx { 0.5 } else { 1.0 };
                let v = self.x[self.xi(i, j)];
                terms.push(w * v * v);
            }
        }
        for j in 0..=ny {
            let w = if j == 0 || j == ny { 0.5 } else { 1.0 };
            for i in 0..nx {
                let v = self.y[self.yi(i, j)];
                terms.push(w * v * v);
            }
        }
        (compensated_sum(&terms) * self.grid.cell_area()).sqrt()
    }

    /// Componentwise `a*x + b*y` accumulation: `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &VectorField) {
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += c * b;
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += c * b;
        }
    }
}

/// Centered differences of a cell field onto faces, using ghost extension at
/// the boundary. For `NeumannZero` fields every boundary normal component is
/// exactly zero (mirror ghost).
pub fn grad_faces(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let ihx = 1.0 / g.hx();
    let ihy = 1.0 / g.hy();
    let mut out = VectorField::zeros(g);
    for j in 0..ny {
        for i in 0..=nx {
            let right = f.at_ghost(i as isize, j as isize);
            let left = f.at_ghost(i as isize - 1, j as isize);
            out.x[out.xi(i, j)] = (right - left) * ihx;
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let top = f.at_ghost(i as isize, j as isize);
            let bot = f.at_ghost(i as isize, j as isize - 1);
            out.y[out.yi(i, j)] = (top - bot) * ihy;
        }
    }
    out
}

/// Arithmetic face average of cell values (ghost extension at the boundary),
/// for variable transport coefficients. Harmonic averaging is unsuitable
/// because the cutoff coefficient can be exactly zero.
pub fn face_average(grid: Grid2D, bc: Bc, cell_values: &[f64]) -> VectorField {
    let f = ScalarField {
        grid,
        bc,
        values: cell_values.to_vec(),
    };
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = VectorField::zeros(grid);
    for j in 0..ny {
        for i in 0..=nx {
            let right = f.at_ghost(i as isize, j as isize);
            let left = f.at_ghost(i as isize - 1, j as isize);
            out.x[out.xi(i, j)] = 0.5 * (right + left);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let top = f.at_ghost(i as isize, j as isize);
            let bot = f.at_ghost(i as isize, j as isize - 1);
            out.y[out.yi(i, j)] = 0.5 * (top + bot);
        }
    }
    out
}

/// Conservative divergence of the face flux `F = a .* g`:
/// `(F_{i+1/2} - F_{i-1/2})/hx + (G_{j+1/2} - G_{j-1/2})/hy` per cell.
/// Boundary normal fluxes are taken exactly as given by `a .* g`.
pub fn div_flux(a: &VectorField, g: &VectorField) -> Vec<f64> {
    let grid = a.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let ihx = 1.0 / grid.hx();
    let ihy = 1.0 / grid.hy();
    let mut out = vec![0.0; grid.ncells()];
    for j in 0..ny {
        for i in 0..nx {
            let fe = a.x[a.xi(i + 1, j)] * g.x[g.xi(i + 1, j)];
            let fw = a.x[a.xi(i, j)] * g.x[g.xi(i, j)];
            let fn_ = a.y[a.yi(i, j + 1)] * g.y[g.yi(i, j + 1)];
            let fs = a.y[a.yi(i, j)] * g.y[g.yi(i, j)];
            out[grid.idx(i, j)] = (fe - fw) * ihx + (fn_ - fs) * ihy;
        }
    }
    out
}

/// Divergence of a face field (unit coefficient).
pub fn divergence(g: &VectorField) -> Vec<f64> {
    let ones = VectorField {
        grid: g.grid,
        x: vec![1.0; g.x.len()],
        y: vec![1.0; g.y.len()],
    };
    div_flux(&ones, g)
}

/// `sum_faces (u .* v)` with the half-weight boundary quadrature of
/// [`VectorField::l2_norm`], times the cell area.
pub fn face_inner(u: &VectorField, v: &VectorField) -> f64 {
    let (nx, ny) = (u.grid.nx, u.grid.ny);
    let mut terms = Vec::with_capacity(u.x.len() + u.y.len());
    for j in 0..ny {
        for i in 0..=nx {
            let w = if i == 0 || i == nx { 0.5 } else { 1.0 };
            terms.push(w * u.x[u.xi(i, j)] * v.x[v.xi(i, j)]);
        }
    }
    for j in 0..=ny {
        let w = if j == 0 || j == ny { 0.5 } else { 1.0 };
        for i in 0..nx {
            terms.push(w * u.y[u.yi(i, j)] * v.y[v.yi(i, j)]);
        }
    }
    compensated_sum(&terms) * u.grid.cell_area()
}

/// `sum_cells (a .* b) * cell_area`, the discrete L2 pairing of cell fields.
pub fn cell_inner(grid: Grid2D, a: &[f64], b: &[f64]) -> f64 {
    let terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    compensated_sum(&terms) * grid.cell_area()
}

// ---------------------------------------------------------------------------
// Serialization: CSV matrix (row-major, ny rows) and 8-bit PGM snapshots.
// ---------------------------------------------------------------------------

/// Write the field as a CSV matrix: `ny` rows of `nx` comma-separated values,
/// row `j = 0` first. Uses exponential notation with full precision so that
/// round-trips are exact and output is bit-reproducible.
pub fn write_csv_matrix(f: &ScalarField, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for j in 0..f.grid.ny {
        let row: Vec<String> = (0..f.grid.nx)
            .map(|i| format!("{:.17e}", f.at(i, j)))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a CSV matrix written by [`write_csv_matrix`]; the grid must match.
pub fn read_csv_matrix(grid: Grid2D, bc: Bc, path: &Path) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(grid.ncells());
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|e| {
                ChdError::config(format!(
                    "{}: line {}: bad number {tok:?}: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.push(v);
        }
    }
    if values.len() != grid.ncells() {
        return Err(ChdError::config(format!(
            "{}: expected {} values for a {} x {} grid, found {}",
            path.display(),
            grid.ncells(),
            grid.nx,
            grid.ny,
            values.len()
        )));
    }
    Ok(ScalarField::from_values(grid, bc, values))
}

/// Write an 8-bit binary PGM snapshot after affine rescale of the field's
/// range to `[0, 255]`. A constant field maps to 0.
pub fn write_pgm(f: &ScalarField, path: &Path) -> Result<()> {
    let (lo, hi) = (f.min(), f.max());
    let span = hi - lo;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "P5")?;
    writeln!(w, "{} {}", f.grid.nx, f.grid.ny)?;
    writeln!(w, "255")?;
    let mut bytes = Vec::with_capacity(f.grid.ncells());
    for j in 0..f.grid.ny {
        for i in 0..f.grid.nx {
            let v = if span > 0.0 {
                ((f.at(i, j) - lo) / span * 255.0).round().clamp(0.0, 255.0)
            } else {
                0.0
            };
            bytes.push(v as u8);
        }
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid2D {
        Grid2D::new(n, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_rejects_tiny_meshes() {
        assert!(Grid2D::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
    }

    #[test]
    fn laplacian_of_constant_neumann_is_zero() {
        let f = ScalarField::new(unit_grid(8), Bc::NeumannZero, 3.7);
        let lap = laplacian(&f);
        assert!(lap.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn laplacian_exact_on_quadratics_in_the_interior() {
        // f = x^2 + y^2 has Laplacian 4; the 5-point stencil is exact on
        // quadratics away from ghost cells.
        let g = unit_grid(16);
        let f = ScalarField::from_fn(g, Bc::NeumannZero, |x, y| x * x + y * y);
        let lap = laplacian(&f);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert!((lap[g.idx(i, j)] - 4.0).abs() < 1e-9, "at ({i},{j})");
            }
        }
    }

    #[test]
    fn dirichlet_ghost_reflects_boundary_value() {
        // f = 0 with Dirichlet value 1: edge cells see ghost = 2, giving
        // 2/h^2 per adjacent boundary face; interior cells stay zero.
        let g = unit_grid(8);
        let f = ScalarField::new(g, Bc::DirichletConst(1.0), 0.0);
        let lap = laplacian(&f);
        let h2 = g.hx() * g.hx();
        assert!((lap[g.idx(0, 3)] - 2.0 / h2).abs() < 1e-9);
        assert!((lap[g.idx(0, 0)] - 4.0 / h2).abs() < 1e-9);
        assert!(lap[g.idx(3, 3)].abs() < 1e-12);
    }

    #[test]
    fn grad_faces_linear_field() {
        let g = unit_grid(8);
        let f = ScalarField::from_fn(g, Bc::DirichletConst(0.0), |x, _| x);
        let gr = grad_faces(&f);
        // interior x-faces carry slope 1 exactly
        for j in 0..g.ny {
            for i in 1..g.nx {
                assert!((gr.x[gr.xi(i, j)] - 1.0).abs() < 1e-12);
            }
        }
        // y-faces vanish
        assert!(gr.y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn neumann_fields_have_zero_boundary_gradient() {
        let g = unit_grid(8);
        let f = ScalarField::from_fn(g, Bc::NeumannZero, |x, y| (x * 7.0).sin() + y * y);
        let gr = grad_faces(&f);
        assert!(gr.boundary_normals_are_zero());
    }

    #[test]
    fn div_flux_reduces_to_laplacian_for_unit_coefficient() {
        let g = unit_grid(12);
        let f = ScalarField::from_fn(g, Bc::NeumannZero, |x, y| (3.0 * x).cos() * (2.0 * y).sin());
        let lap = laplacian(&f);
        let dv = divergence(&grad_faces(&f));
        for (a, b) in lap.iter().zip(&dv) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn discrete_divergence_theorem() {
        // Zero boundary normal flux => total divergence integrates to zero.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = unit_grid(16);
        let mut a = VectorField::zeros(g);
        let mut flux = VectorField::zeros(g);
        for v in a.x.iter_mut().chain(a.y.iter_mut()) {
            *v = rng.gen_range(0.0..2.0);
        }
        for v in flux.x.iter_mut().chain(flux.y.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        flux.zero_boundary_normals();
        let dv = div_flux(&a, &flux);
        let total = compensated_sum(&dv) * g.cell_area();
        assert!(total.abs() < 1e-12, "total divergence {total}");
    }

    #[test]
    fn mean_and_integral_basics() {
        let g = unit_grid(32);
        let c = ScalarField::new(g, Bc::NeumannZero, 2.5);
        assert!((mean(&c) - 2.5).abs() < 1e-14);
        // f = x on the unit square: cell-center sum is exactly 1/2.
        let f = ScalarField::from_fn(g, Bc::NeumannZero, |x, _| x);
        assert!((mean(&f) - 0.5).abs() < 1e-13);
        assert!((integral(&f) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn mean_is_linear_on_random_pairs() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = unit_grid(8);
        for _ in 0..20 {
            let f = ScalarField::from_fn(g, Bc::NeumannZero, |_, _| rng.gen_range(-1.0..1.0));
            let h = ScalarField::from_fn(g, Bc::NeumannZero, |_, _| rng.gen_range(-1.0..1.0));
            let a: f64 = rng.gen_range(-2.0..2.0);
            let combo = ScalarField::from_values(
                g,
                Bc::NeumannZero,
                f.values.iter().zip(&h.values).map(|(x, y)| a * x + y).collect(),
            );
            assert!((mean(&combo) - (a * mean(&f) + mean(&h))).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_symmetry_for_neumann_fields() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = unit_grid(12);
        for _ in 0..5 {
            let u = ScalarField::from_fn(g, Bc::NeumannZero, |_, _| rng.gen_range(-1.0..1.0));
            let v = ScalarField::from_fn(g, Bc::NeumannZero, |_, _| rng.gen_range(-1.0..1.0));
            let lu = laplacian(&u);
            let lv = laplacian(&v);
            let a = cell_inner(g, &lu, &v.values);
            let b = cell_inner(g, &u.values, &lv);
            assert!((a - b).abs() < 1e-10, "asymmetry {}", a - b);
        }
    }

    #[test]
    fn laplacian_second_order_consistency() {
        // Dirichlet-0 Laplacian on sin(pi x) sin(pi y): halving h divides the
        // max-norm error by ~4.
        let err = |n: usize| -> f64 {
            let g = unit_grid(n);
            let f = ScalarField::from_fn(g, Bc::DirichletConst(0.0), |x, y| {
                (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
            });
            let lap = laplacian(&f);
            let pi2 = std::f64::consts::PI * std::f64::consts::PI;
            let mut worst = 0.0f64;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let exact = -2.0 * pi2 * f.at(i, j);
                    worst = worst.max((lap[g.idx(i, j)] - exact).abs());
                }
            }
            worst
        };
        let e1 = err(32);
        let e2 = err(64);
        let ratio = e1 / e2;
        assert!(
            (3.5..4.5).contains(&ratio),
            "expected second-order ratio ~4, got {ratio} ({e1} -> {e2})"
        );
    }

    #[test]
    fn csv_matrix_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = unit_grid(8);
        let f = ScalarField::from_fn(g, Bc::NeumannZero, |x, y| (x * 17.0).sin() + y / 3.0);
        let path = dir.path().join("f.csv");
        write_csv_matrix(&f, &path).unwrap();
        let back = read_csv_matrix(g, Bc::NeumannZero, &path).unwrap();
        assert_eq!(f.values, back.values);
    }

    #[test]
    fn pgm_has_correct_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let g = unit_grid(8);
        let f = ScalarField::from_fn(g, Bc::NeumannZero, |x, y| x + y);
        let path = dir.path().join("f.pgm");
        write_pgm(&f, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n8 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 64);
    }
}
