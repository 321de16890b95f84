//! The multi-phase logarithmic potential and its Moreau--Yosida
//! regularization.
//!
//! The singular convex part on the simplex `{s >= 0, r >= 0, s + r <= 1}` is
//!
//! ```text
//! F0(s, r) = s log s + r log r + (1 - s - r) log(1 - s - r)   (+ log 3)
//! ```
//!
//! with `x log x -> 0` at `x = 0` and `+inf` outside the closed simplex. The
//! optional `log 3` offset makes `F0 >= 0` on its domain without changing any
//! gradient. The smooth perturbation is
//!
//! ```text
//! F1(s, r) = (chi/2) (r(1-r) + s(1-s) + (1-r-s)(r+s)).
//! ```
//!
//! `F_eps` is the Moreau envelope of `F0` with parameter `eps`; its value and
//! gradient are computed from the proximal point, which is found by a damped
//! Newton iteration on the interior optimality system
//! `(p - x)/eps + grad F0(p) = 0`. The log barrier keeps the minimizer
//! strictly inside the simplex and makes Newton quadratically convergent once
//! close.

use crate::error::{ChdError, Result};

/// Parameters of the configuration potential.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PotentialSpec {
    /// Interfacial coefficient of the smooth perturbation, `chi >= 0`.
    pub chi: f64,
    /// Moreau--Yosida parameter, `eps > 0`.
    pub epsilon: f64,
    /// Add `log 3` to the singular part so it is nonnegative on the simplex.
    pub offset_log3: bool,
}

impl PotentialSpec {
    pub fn new(chi: f64, epsilon: f64, offset_log3: bool) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(ChdError::config(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(chi >= 0.0) {
            return Err(ChdError::config(format!("chi must be >= 0, got {chi}")));
        }
        Ok(PotentialSpec {
            chi,
            epsilon,
            offset_log3,
        })
    }

    fn offset(&self) -> f64 {
        if self.offset_log3 {
            3.0f64.ln()
        } else {
            0.0
        }
    }
}

/// A point in the `(phi_p, phi_d)` plane. The host fraction `1 - s - r` is
/// implied, never stored.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimplexPoint {
    pub s: f64,
    pub r: f64,
}

impl SimplexPoint {
    pub fn new(s: f64, r: f64) -> Self {
        SimplexPoint { s, r }
    }

    /// Implied host fraction `1 - s - r`.
    #[inline]
    pub fn host(&self) -> f64 {
        1.0 - self.s - self.r
    }

    /// Membership in the closed simplex.
    #[inline]
    pub fn inside_closed(&self) -> bool {
        self.s >= 0.0 && self.r >= 0.0 && self.s + self.r <= 1.0
    }

    /// Membership in the open simplex.
    #[inline]
    pub fn inside_open(&self) -> bool {
        self.s > 0.0 && self.r > 0.0 && self.s + self.r < 1.0
    }
}

impl From<[f64; 2]> for SimplexPoint {
    fn from(v: [f64; 2]) -> Self {
        SimplexPoint { s: v[0], r: v[1] }
    }
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Singular part `F0`. Total on the plane with extended-real codomain:
/// `+inf` strictly outside the closed simplex.
pub fn f0_value(p: SimplexPoint, spec: &PotentialSpec) -> f64 {
    if !p.inside_closed() {
        return f64::INFINITY;
    }
    xlogx(p.s) + xlogx(p.r) + xlogx(p.host()) + spec.offset()
}

/// Gradient of `F0`, defined strictly inside the simplex:
/// `(log s - log(1-s-r), log r - log(1-s-r))`.
pub fn f0_grad(p: SimplexPoint) -> Result<[f64; 2]> {
    if !p.inside_open() {
        return Err(ChdError::config(format!(
            "f0_grad needs a point strictly inside the simplex, got ({}, {})",
            p.s, p.r
        )));
    }
    let lh = p.host().ln();
    Ok([p.s.ln() - lh, p.r.ln() - lh])
}

/// Smooth perturbation `F1 = (chi/2)(r(1-r) + s(1-s) + (1-r-s)(r+s))`.
pub fn f1_value(p: SimplexPoint, spec: &PotentialSpec) -> f64 {
    let (s, r) = (p.s, p.r);
    0.5 * spec.chi * (r * (1.0 - r) + s * (1.0 - s) + (1.0 - r - s) * (r + s))
}

/// Gradient of `F1`: `chi (1 - 2s - r, 1 - s - 2r)`.
pub fn f1_grad(p: SimplexPoint, spec: &PotentialSpec) -> [f64; 2] {
    let (s, r) = (p.s, p.r);
    [
        spec.chi * (1.0 - 2.0 * s - r),
        spec.chi * (1.0 - s - 2.0 * r),
    ]
}

/// Cutoff operator `T(r) = max(0, min(1, r))`, applied to the phase fields
/// wherever they act as transport or mobility coefficients.
#[inline]
pub fn cutoff(r: f64) -> f64 {
    r.clamp(0.0, 1.0)
}

/// Result of a proximal solve.
#[derive(Clone, Copy, Debug)]
pub struct ProxResult {
    /// The minimizer, strictly inside the simplex.
    pub point: SimplexPoint,
    pub newton_iters: u32,
    /// Final norm of the optimality residual `(p - x)/eps + grad F0(p)`.
    pub residual: f64,
}

/// Residual-norm tolerance of the proximal Newton solve.
pub const PROX_TOL: f64 = 1e-12;
/// Iteration cap; exceeding it is reported as an error, never silently.
pub const PROX_MAX_ITERS: u32 = 200;

/// Euclidean projection onto the closed simplex.
fn project_simplex(x: [f64; 2]) -> [f64; 2] {
    let (s, r) = (x[0], x[1]);
    if s >= 0.0 && r >= 0.0 && s + r <= 1.0 {
        return [s, r];
    }
    // Closest point among the three edges/vertices of the triangle
    // (0,0)-(1,0)-(0,1).
    let clamp01 = |v: f64| v.clamp(0.0, 1.0);
    let mut best = [0.0, 0.0];
    let mut best_d = f64::INFINITY;
    // edge r = 0, s in [0,1]
    for cand in [
        [clamp01(s), 0.0],
        [0.0, clamp01(r)],
        {
            // edge s + r = 1: project onto the line then clamp the parameter
            let t = clamp01(0.5 * (1.0 + s - r));
            [t, 1.0 - t]
        },
    ] {
        let d = (cand[0] - s).powi(2) + (cand[1] - r).powi(2);
        if d < best_d {
            best_d = d;
            best = cand;
        }
    }
    best
}

/// Warm start: clamp into the simplex shrunk by a factor 0.9 toward the
/// centroid, safely away from the log singularities.
fn warm_start(x: [f64; 2]) -> [f64; 2] {
    let p = project_simplex(x);
    let c = 1.0 / 3.0;
    [c + 0.9 * (p[0] - c), c + 0.9 * (p[1] - c)]
}

/// Proximal point of `F0`:
/// `argmin_p |p - x|^2 / (2 eps) + F0(p)`, by damped Newton on the interior
/// first-order condition with step halving until the iterate is strictly
/// interior.
pub fn prox(x: SimplexPoint, spec: &PotentialSpec) -> Result<ProxResult> {
    let xv = [x.s, x.r];
    prox_from(xv, spec.epsilon, warm_start(xv))
}

/// Moreau envelope value `|x - prox(x)|^2 / (2 eps) + F0(prox(x))`.
pub fn feps_value(x: SimplexPoint, spec: &PotentialSpec) -> Result<f64> {
    let pr = prox(x, spec)?;
    let ds = x.s - pr.point.s;
    let dr = x.r - pr.point.r;
    Ok((ds * ds + dr * dr) / (2.0 * spec.epsilon) + f0_value(pr.point, spec))
}

/// Gradient of the Moreau envelope, `(x - prox(x)) / eps`. Globally
/// Lipschitz with constant `1/eps`.
pub fn feps_grad(x: SimplexPoint, spec: &PotentialSpec) -> Result<[f64; 2]> {
    let pr = prox(x, spec)?;
    Ok([
        (x.s - pr.point.s) / spec.epsilon,
        (x.r - pr.point.r) / spec.epsilon,
    ])
}

/// One proximal solve returning envelope value and gradient together, with an
/// optional warm start (used by the stepper, which sweeps whole fields every
/// step and reuses the previous step's proximal points).
pub fn feps_eval_with_guess(
    x: [f64; 2],
    spec: &PotentialSpec,
    guess: Option<[f64; 2]>,
) -> Result<(f64, [f64; 2], [f64; 2])> {
    let eps = spec.epsilon;
    let start = match guess {
        Some(g) if g[0] > 0.0 && g[1] > 0.0 && g[0] + g[1] < 1.0 => g,
        _ => warm_start(x),
    };
    let pr = prox_from(x, eps, start)?;
    let ds = x[0] - pr.point.s;
    let dr = x[1] - pr.point.r;
    let value = (ds * ds + dr * dr) / (2.0 * eps) + f0_value(pr.point, spec);
    Ok((value, [ds / eps, dr / eps], [pr.point.s, pr.point.r]))
}

/// Damped Newton on `(p - x)/eps + grad F0(p) = 0` from a strictly interior
/// starting point. Step halving keeps iterates inside the simplex and
/// enforces residual decrease.
fn prox_from(xv: [f64; 2], eps: f64, start: [f64; 2]) -> Result<ProxResult> {
    let residual = |p: &[f64; 2]| -> [f64; 2] {
        let h = 1.0 - p[0] - p[1];
        let lh = h.ln();
        [
            (p[0] - xv[0]) / eps + p[0].ln() - lh,
            (p[1] - xv[1]) / eps + p[1].ln() - lh,
        ]
    };
    let norm = |g: &[f64; 2]| (g[0] * g[0] + g[1] * g[1]).sqrt();

    let mut p = start;
    let mut g = residual(&p);
    let mut gn = norm(&g);
    let mut iters = 0;
    while gn > PROX_TOL {
        if iters >= PROX_MAX_ITERS {
            return Err(ChdError::numerical(
                "prox",
                format!(
                    "Newton did not converge after {PROX_MAX_ITERS} iterations \
                     (x = ({}, {}), eps = {eps}, residual = {gn:.3e})",
                    xv[0], xv[1]
                ),
            ));
        }
        // Hessian of the objective: I/eps + diag(1/s, 1/r) + (1/h) * ones.
        let h = 1.0 - p[0] - p[1];
        let ih = 1.0 / h;
        let a = 1.0 / eps + 1.0 / p[0] + ih;
        let b = ih;
        let d = 1.0 / eps + 1.0 / p[1] + ih;
        let det = a * d - b * b;
        let ds = -(d * g[0] - b * g[1]) / det;
        let dr = -(a * g[1] - b * g[0]) / det;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = [p[0] + alpha * ds, p[1] + alpha * dr];
            if cand[0] > 0.0 && cand[1] > 0.0 && cand[0] + cand[1] < 1.0 {
                let gc = residual(&cand);
                let gcn = norm(&gc);
                if gcn <= gn * (1.0 - 0.25 * alpha) || gcn <= PROX_TOL {
                    p = cand;
                    g = gc;
                    gn = gcn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(ChdError::numerical(
                "prox",
                format!(
                    "line search stalled (x = ({}, {}), eps = {eps}, residual = {gn:.3e})",
                    xv[0], xv[1]
                ),
            ));
        }
        iters += 1;
    }
    Ok(ProxResult {
        point: SimplexPoint::new(p[0], p[1]),
        newton_iters: iters,
        residual: gn,
    })
}
