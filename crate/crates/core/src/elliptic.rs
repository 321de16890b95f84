//! Symmetric positive-definite linear solves: preconditioned conjugate
//! gradients, the quasi-static nutrient equation, the pressure Poisson
//! equation, the implicit Cahn--Hilliard update operator, and the Helmholtz
//! smoothing of initial data.
//!
//! The constant-coefficient operators on the uniform cell-centered grid are
//! diagonalized exactly by cosine (mirror-ghost Neumann) and sine
//! (linear-reflection Dirichlet) bases. That exact inverse is used as a CG
//! preconditioner for the stiff implicit Cahn--Hilliard operator
//! `I + dt M lap^2`, whose diagonal is nearly constant (so Jacobi cannot
//! help) and whose condition number at 64x64 and dt = 1e-3 is ~1e6.

use crate::error::{ChdError, Result};
use crate::grid::{self, Bc, Grid2D, ScalarField, VectorField};
use crate::potential::cutoff;

/// Default relative CG tolerance.
pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Default iteration cap: `10 * nx * ny`.
pub fn default_max_iters(grid: Grid2D) -> usize {
    10 * grid.ncells()
}

/// Abstract symmetric positive-definite operator on cell values.
pub trait LinearOp {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// Operator diagonal, for Jacobi preconditioning.
    fn diagonal(&self) -> Vec<f64>;
}

/// Preconditioner: application of an approximate inverse.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Identity preconditioner (plain CG).
pub struct NoPrecond;

impl Preconditioner for NoPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal (Jacobi) preconditioner.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn of(op: &dyn LinearOp) -> Self {
        Jacobi {
            inv_diag: op.diagonal().iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

/// Convergence report of a linear solve.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients. Returns the solution and a report;
/// non-convergence within `max_iter` is reported through `converged = false`
/// as an error by callers that require convergence. NaN anywhere aborts.
pub fn cg_solve(
    op: &dyn LinearOp,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    precond: &dyn Preconditioner,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.len();
    assert_eq!(rhs.len(), n);
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }

    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut iterations = 0;
    let mut resid = dot(&r, &r).sqrt();
    while resid > tol * bnorm && iterations < max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(ChdError::numerical(
                "cg",
                format!("indefinite or non-finite curvature p.Ap = {pap}"),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        resid = dot(&r, &r).sqrt();
        if !resid.is_finite() {
            return Err(ChdError::numerical("cg", "residual became non-finite"));
        }
        iterations += 1;
    }

    // certify with the true residual, not the recurrence
    op.apply(&x, &mut ap);
    let mut true_res = 0.0;
    for i in 0..n {
        let d = rhs[i] - ap[i];
        true_res += d * d;
    }
    let relative_residual = true_res.sqrt() / bnorm;
    Ok((
        x,
        SolveReport {
            iterations,
            relative_residual,
            converged: relative_residual <= tol,
        },
    ))
}

fn require_converged(report: &SolveReport, what: &str) -> Result<()> {
    if !report.converged {
        return Err(ChdError::numerical(
            what,
            format!(
                "CG failed to converge: {} iterations, relative residual {:.3e}",
                report.iterations, report.relative_residual
            ),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Concrete operators
// ---------------------------------------------------------------------------

fn apply_laplacian_into(grid: Grid2D, bc: Bc, x: &[f64], out: &mut [f64]) {
    grid::laplacian_values(grid, bc, x, out);
}

/// `-lap` with homogeneous Dirichlet ghosts.
pub struct DirichletLaplacian {
    pub grid: Grid2D,
}

impl LinearOp for DirichletLaplacian {
    fn len(&self) -> usize {
        self.grid.ncells()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        apply_laplacian_into(self.grid, Bc::DirichletConst(0.0), x, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let mut d = Vec::with_capacity(g.ncells());
        // linear-reflection ghosts add 1/h^2 per boundary face
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut v = 2.0 * ihx2 + 2.0 * ihy2;
                if i == 0 || i == g.nx - 1 {
                    v += ihx2;
                }
                if j == 0 || j == g.ny - 1 {
                    v += ihy2;
                }
                d.push(v);
            }
        }
        d
    }
}

/// `-lap + diag(c)` with homogeneous Dirichlet ghosts; `c >= 0` keeps the
/// operator an M-matrix, which yields the discrete maximum principle for the
/// nutrient.
pub struct ShiftedDirichletLaplacian {
    pub grid: Grid2D,
    pub coeff: Vec<f64>,
}

impl LinearOp for ShiftedDirichletLaplacian {
    fn len(&self) -> usize {
        self.grid.ncells()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        apply_laplacian_into(self.grid, Bc::DirichletConst(0.0), x, out);
        for (i, v) in out.iter_mut().enumerate() {
            *v = -*v + self.coeff[i] * x[i];
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let base = DirichletLaplacian { grid: self.grid }.diagonal();
        base.iter().zip(&self.coeff).map(|(d, c)| d + c).collect()
    }
}

/// Implicit Cahn--Hilliard update operator `I + dt*M*lap_N^2` (mirror-ghost
/// Neumann Laplacian applied twice). Symmetric positive definite; constant
/// column sums 1, so CG preserves the mean up to the solve residual.
pub struct ChImplicitOp {
    pub grid: Grid2D,
    pub dt_mobility: f64,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl ChImplicitOp {
    pub fn new(grid: Grid2D, dt_mobility: f64) -> Self {
        ChImplicitOp {
            grid,
            dt_mobility,
            scratch: std::cell::RefCell::new(vec![0.0; grid.ncells()]),
        }
    }
}

impl LinearOp for ChImplicitOp {
    fn len(&self) -> usize {
        self.grid.ncells()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = self.scratch.borrow_mut();
        apply_laplacian_into(self.grid, Bc::NeumannZero, x, &mut tmp);
        apply_laplacian_into(self.grid, Bc::NeumannZero, &tmp, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + self.dt_mobility * *o;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        // interior 13-point biharmonic diagonal; boundary corrections are
        // immaterial for a nearly-constant diagonal
        let g = self.grid;
        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let d = (2.0 * ihx2 + 2.0 * ihy2).powi(2) + 2.0 * ihx2 * ihx2 + 2.0 * ihy2 * ihy2;
        vec![1.0 + self.dt_mobility * d; g.ncells()]
    }
}

/// `I - delta*lap_N`, the Helmholtz operator of the initial-data smoothing.
pub struct HelmholtzNeumann {
    pub grid: Grid2D,
    pub delta: f64,
}

impl LinearOp for HelmholtzNeumann {
    fn len(&self) -> usize {
        self.grid.ncells()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        apply_laplacian_into(self.grid, Bc::NeumannZero, x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - self.delta * *o;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let mut d = Vec::with_capacity(g.ncells());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut c = 2.0 * ihx2 + 2.0 * ihy2;
                if i == 0 || i == g.nx - 1 {
                    c -= ihx2;
                }
                if j == 0 || j == g.ny - 1 {
                    c -= ihy2;
                }
                d.push(1.0 + self.delta * c);
            }
        }
        d
    }
}

// ---------------------------------------------------------------------------
// Exact spectral preconditioner for constant-coefficient operators
// ---------------------------------------------------------------------------

/// One-dimensional orthonormal eigenbasis of the discrete second-difference
/// operator with mirror (Neumann) or linear-reflection (Dirichlet) ghosts.
struct EigenBasis {
    n: usize,
    /// column-major `n x n`: `mat[k*n + i]` is component `i` of basis vector `k`
    mat: Vec<f64>,
    /// eigenvalues of `-d^2/dx^2` (nonnegative)
    eigs: Vec<f64>,
}

impl EigenBasis {
    /// Cosine modes `cos(pi k (i+1/2)/n)`: exact eigenvectors of the
    /// mirror-ghost Neumann Laplacian, eigenvalues `(4/h^2) sin^2(pi k/2n)`.
    fn neumann(n: usize, h: f64) -> Self {
        let mut mat = vec![0.0; n * n];
        let mut eigs = vec![0.0; n];
        for k in 0..n {
            let norm = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for i in 0..n {
                mat[k * n + i] =
                    norm * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
            }
            let s = (std::f64::consts::PI * k as f64 / (2.0 * n as f64)).sin();
            eigs[k] = 4.0 / (h * h) * s * s;
        }
        EigenBasis { n, mat, eigs }
    }

    /// Sine modes `sin(pi (k+1) (i+1/2)/n)`: exact eigenvectors of the
    /// linear-reflection homogeneous Dirichlet Laplacian.
    fn dirichlet(n: usize, h: f64) -> Self {
        let mut mat = vec![0.0; n * n];
        let mut eigs = vec![0.0; n];
        for k in 0..n {
            let kk = k + 1;
            let norm = if kk == n {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for i in 0..n {
                mat[k * n + i] =
                    norm * (std::f64::consts::PI * kk as f64 * (i as f64 + 0.5) / n as f64).sin();
            }
            let s = (std::f64::consts::PI * kk as f64 / (2.0 * n as f64)).sin();
            eigs[k] = 4.0 / (h * h) * s * s;
        }
        EigenBasis { n, mat, eigs }
    }

    /// `out[k] = sum_i mat[k,i] v[i]` for every row of a 2-D layout.
    fn forward_rows(&self, grid: Grid2D, v: &[f64], out: &mut [f64]) {
        let (nx, ny) = (grid.nx, grid.ny);
        debug_assert_eq!(self.n, nx);
        for j in 0..ny {
            let row = &v[j * nx..(j + 1) * nx];
            for k in 0..nx {
                let col = &self.mat[k * nx..(k + 1) * nx];
                let mut acc = 0.0;
                for i in 0..nx {
                    acc += col[i] * row[i];
                }
                out[j * nx + k] = acc;
            }
        }
    }

    fn inverse_rows(&self, grid: Grid2D, v: &[f64], out: &mut [f64]) {
        let (nx, ny) = (grid.nx, grid.ny);
        for j in 0..ny {
            let row = &v[j * nx..(j + 1) * nx];
            let dst = &mut out[j * nx..(j + 1) * nx];
            dst.fill(0.0);
            for k in 0..nx {
                let col = &self.mat[k * nx..(k + 1) * nx];
                let c = row[k];
                for i in 0..nx {
                    dst[i] += c * col[i];
                }
            }
        }
    }

    fn forward_cols(&self, grid: Grid2D, v: &[f64], out: &mut [f64]) {
        let (nx, ny) = (grid.nx, grid.ny);
        debug_assert_eq!(self.n, ny);
        for i in 0..nx {
            for k in 0..ny {
                let col = &self.mat[k * ny..(k + 1) * ny];
                let mut acc = 0.0;
                for j in 0..ny {
                    acc += col[j] * v[j * nx + i];
                }
                out[k * nx + i] = acc;
            }
        }
    }

    fn inverse_cols(&self, grid: Grid2D, v: &[f64], out: &mut [f64]) {
        let (nx, ny) = (grid.nx, grid.ny);
        for i in 0..nx {
            for j in 0..ny {
                let mut acc = 0.0;
                for k in 0..ny {
                    acc += self.mat[k * ny + j] * v[k * nx + i];
                }
                out[j * nx + i] = acc;
            }
        }
    }
}

/// Exact inverse of a constant-coefficient operator `sigma(lx + ly)` in the
/// separable eigenbasis, used as a CG preconditioner.
pub struct SpectralPrecond {
    grid: Grid2D,
    bx: EigenBasis,
    by: EigenBasis,
    inv_sigma: Vec<f64>,
    scratch: std::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl SpectralPrecond {
    /// For the implicit Cahn--Hilliard operator `I + dt M lap_N^2`.
    pub fn ch_neumann(grid: Grid2D, dt_mobility: f64) -> Self {
        Self::build(
            grid,
            EigenBasis::neumann(grid.nx, grid.hx()),
            EigenBasis::neumann(grid.ny, grid.hy()),
            |l| 1.0 + dt_mobility * l * l,
        )
    }

    /// For the Helmholtz smoothing operator `I - delta lap_N`.
    pub fn helmholtz_neumann(grid: Grid2D, delta: f64) -> Self {
        Self::build(
            grid,
            EigenBasis::neumann(grid.nx, grid.hx()),
            EigenBasis::neumann(grid.ny, grid.hy()),
            |l| 1.0 + delta * l,
        )
    }

    /// For the Dirichlet Poisson operator `-lap_D`.
    pub fn poisson_dirichlet(grid: Grid2D) -> Self {
        Self::build(
            grid,
            EigenBasis::dirichlet(grid.nx, grid.hx()),
            EigenBasis::dirichlet(grid.ny, grid.hy()),
            |l| l,
        )
    }

    fn build(grid: Grid2D, bx: EigenBasis, by: EigenBasis, sigma: impl Fn(f64) -> f64) -> Self {
        let mut inv_sigma = vec![0.0; grid.ncells()];
        for ky in 0..grid.ny {
            for kx in 0..grid.nx {
                let s = sigma(bx.eigs[kx] + by.eigs[ky]);
                inv_sigma[ky * grid.nx + kx] = if s != 0.0 { 1.0 / s } else { 0.0 };
            }
        }
        SpectralPrecond {
            grid,
            bx,
            by,
            inv_sigma,
            scratch: std::cell::RefCell::new((vec![0.0; grid.ncells()], vec![0.0; grid.ncells()])),
        }
    }
}

impl Preconditioner for SpectralPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (ref mut a, ref mut b) = *self.scratch.borrow_mut();
        self.bx.forward_rows(self.grid, r, a);
        self.by.forward_cols(self.grid, a, b);
        for (v, s) in b.iter_mut().zip(&self.inv_sigma) {
            *v *= s;
        }
        self.by.inverse_cols(self.grid, b, a);
        self.bx.inverse_rows(self.grid, a, z);
    }
}

// ---------------------------------------------------------------------------
// Nutrient and pressure solves
// ---------------------------------------------------------------------------

/// Relative tolerance used for the nutrient solve; tight enough that the
/// maximum principle holds to 1e-10 pointwise.
pub const NUTRIENT_TOL: f64 = 1e-12;

/// Quasi-static nutrient: `(-lap + T(phi_p)) n = 0`, `n = 1` on the
/// boundary, via the shifted unknown `m = n - 1` with homogeneous Dirichlet
/// data: `(-lap + T(phi_p)) m = -T(phi_p)`. The M-matrix structure gives
/// `0 <= n <= 1` at every cell.
pub fn solve_nutrient(
    phi_p: &ScalarField,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, SolveReport)> {
    let g = phi_p.grid;
    let coeff: Vec<f64> = phi_p.values.iter().map(|&v| cutoff(v)).collect();
    let rhs: Vec<f64> = coeff.iter().map(|c| -c).collect();
    let op = ShiftedDirichletLaplacian {
        grid: g,
        coeff,
    };
    let x0: Option<Vec<f64>> = guess.map(|n| n.values.iter().map(|v| v - 1.0).collect());
    let jac = Jacobi::of(&op);
    let (m, report) = cg_solve(
        &op,
        &rhs,
        x0.as_deref(),
        NUTRIENT_TOL,
        default_max_iters(g),
        &jac,
    )?;
    require_converged(&report, "nutrient")?;
    let values: Vec<f64> = m.iter().map(|v| v + 1.0).collect();
    let n = ScalarField::from_values(g, Bc::DirichletConst(1.0), values);
    Ok((n, report))
}

/// Relative tolerance of the pressure solve; tight enough that the weak
/// divergence identity holds to 1e-6 against unit-norm test functions.
pub const PRESSURE_TOL: f64 = 1e-11;

/// Result of the pressure solve: pressure, velocity, Korteweg flux, report.
pub struct PressureSolution {
    pub q: ScalarField,
    /// `u = -grad q - T(phi_p) grad mu_p - T(phi_d) grad mu_d` on faces;
    /// boundary faces carry the ghost-based `-grad q` (the mu parts vanish
    /// there), so `div u = S_p + S_d` holds discretely.
    pub u: VectorField,
    /// The combined Korteweg face flux `T(phi_p) grad mu_p + T(phi_d) grad mu_d`.
    pub korteweg: VectorField,
    pub report: SolveReport,
}

/// Pressure Poisson equation of the quasi-static Darcy coupling:
/// `-lap q = div(T(phi_p) grad mu_p + T(phi_d) grad mu_d) + S_p + S_d` with
/// `q = 0` on the boundary. The chemical potentials carry mirror ghosts, so
/// the combined flux has zero normal boundary components, realizing the
/// coupled boundary condition of the model.
pub fn solve_pressure(
    phi_p: &ScalarField,
    phi_d: &ScalarField,
    mu_p: &ScalarField,
    mu_d: &ScalarField,
    s_total: &[f64],
    guess: Option<&ScalarField>,
) -> Result<PressureSolution> {
    let g = phi_p.grid;
    debug_assert_eq!(mu_p.bc, Bc::NeumannZero);
    debug_assert_eq!(mu_d.bc, Bc::NeumannZero);

    let tp: Vec<f64> = phi_p.values.iter().map(|&v| cutoff(v)).collect();
    let td: Vec<f64> = phi_d.values.iter().map(|&v| cutoff(v)).collect();
    let ap = grid::face_average(g, Bc::NeumannZero, &tp);
    let ad = grid::face_average(g, Bc::NeumannZero, &td);
    let gp = grid::grad_faces(mu_p);
    let gd = grid::grad_faces(mu_d);

    let mut korteweg = VectorField::zeros(g);
    for i in 0..korteweg.x.len() {
        korteweg.x[i] = ap.x[i] * gp.x[i] + ad.x[i] * gd.x[i];
    }
    for i in 0..korteweg.y.len() {
        korteweg.y[i] = ap.y[i] * gp.y[i] + ad.y[i] * gd.y[i];
    }
    debug_assert!(korteweg.boundary_normals_are_zero());

    let div_k = grid::divergence(&korteweg);
    let rhs: Vec<f64> = div_k.iter().zip(s_total).map(|(d, s)| d + s).collect();

    let op = DirichletLaplacian { grid: g };
    let x0: Option<&[f64]> = guess.map(|q| q.values.as_slice());
    let (qv, report) = cg_solve(
        &op,
        &rhs,
        x0,
        PRESSURE_TOL,
        default_max_iters(g),
        &NoPrecond,
    )?;
    require_converged(&report, "pressure")?;
    let q = ScalarField::from_values(g, Bc::DirichletConst(0.0), qv);

    let mut u = grid::grad_faces(&q);
    for v in u.x.iter_mut() {
        *v = -*v;
    }
    for v in u.y.iter_mut() {
        *v = -*v;
    }
    u.axpy(-1.0, &korteweg);

    Ok(PressureSolution {
        q,
        u,
        korteweg,
        report,
    })
}
