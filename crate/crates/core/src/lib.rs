//! Finite-difference solver for a two-species Cahn--Hilliard--Darcy tumor
//! growth system on a rectangle.
//!
//! The model tracks the volume fractions of proliferating and dead tumor
//! cells, `phi_p` and `phi_d`, constrained to the simplex
//! `{s >= 0, r >= 0, s + r <= 1}` by a singular logarithmic potential. The
//! singular part is replaced by its Moreau--Yosida regularization `F_eps`
//! (evaluated through a pointwise proximal solve), the cell velocity obeys a
//! Darcy law driven by the cell-to-cell pressure and Korteweg forces, and the
//! nutrient solves a quasi-static diffusion-consumption equation.
//!
//! Module layout:
//! - [`grid`]: uniform cell-centered mesh, ghost-cell boundary handling,
//!   finite-difference operators and conservative flux divergences.
//! - [`potential`]: the logarithmic potential, its smooth perturbation,
//!   the cutoff operator and the Moreau--Yosida proximal machinery.
//! - [`sources`]: source-term structure `S = Sigma + M*phi`, admissible
//!   regions with inward-pointing checks, and the mean-value ODE.
//! - [`elliptic`]: conjugate-gradient solves for the nutrient, pressure and
//!   implicit Cahn--Hilliard operators.
//! - [`stepper`]: the IMEX time integrator, diagnostics (energy identity,
//!   mass bookkeeping), full runs and the epsilon-continuation study.
//! - [`config`]: TOML run configuration with strict validation.
//!
//! All types are plain values without interior mutability; operations are
//! pure and safe to call concurrently. A simulation instance owns its state
//! exclusively and steps sequentially.

pub mod config;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod potential;
pub mod sources;
pub mod stepper;

pub use error::{ChdError, Result};
