//! Source-term structure `S_i = Sigma_i + (M phi)_i`, admissible regions for
//! the mean values, the inward-pointing boundary check, and the mean-value
//! ODE `dy/dt = (Sigma)_mean + M y`.
//!
//! Two concrete model families are provided. `LinearGrowth` couples nutrient
//! consumption at rate `lambda_m` to proliferating-cell growth, apoptosis at
//! rate `lambda_a` feeding the dead fraction, and lysis at rate `lambda_l`:
//!
//! ```text
//! S_p = lambda_m * g(n) - lambda_a * phi_p
//! S_d = lambda_a * phi_p - lambda_l * phi_d,    g(n) = max(n_c, min(n, 1)).
//! ```
//!
//! `CenteredDecay` relaxes both fractions toward the simplex center at rate
//! `lambda`, perturbed by a bounded term: `M = -lambda I`,
//! `Sigma = (lambda/3, lambda/3) + Sigma0` with `|Sigma0| <= K` per
//! component.

use serde::{Deserialize, Serialize};

use crate::error::{ChdError, Result};
use crate::potential::SimplexPoint;

/// Componentwise bounds `[p_lo, p_hi] x [d_lo, d_hi]` on the `Sigma` range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KBounds {
    pub p_lo: f64,
    pub p_hi: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl KBounds {
    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.p_lo, self.d_lo],
            [self.p_lo, self.d_hi],
            [self.p_hi, self.d_lo],
            [self.p_hi, self.d_hi],
        ]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] >= self.p_lo && x[0] <= self.p_hi && x[1] >= self.d_lo && x[1] <= self.d_hi
    }
}

/// Bounded smooth perturbation used by [`SourceModel::CenteredDecay`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sigma0 {
    Zero,
    /// `amp * (sin(pi(n + phi_p)), cos(pi(n - phi_d)))`; bounded by `amp`
    /// per component and globally Lipschitz.
    Sine { amp: f64 },
}

impl Sigma0 {
    fn eval(&self, n: f64, p: SimplexPoint) -> [f64; 2] {
        match *self {
            Sigma0::Zero => [0.0, 0.0],
            Sigma0::Sine { amp } => {
                let pi = std::f64::consts::PI;
                [(pi * (n + p.s)).sin() * amp, (pi * (n - p.r)).cos() * amp]
            }
        }
    }

    fn bound(&self) -> f64 {
        match *self {
            Sigma0::Zero => 0.0,
            Sigma0::Sine { amp } => amp.abs(),
        }
    }
}

/// Source model: the matrix `M`, the bounded Lipschitz part `Sigma`, and the
/// declared bounds on its range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourceModel {
    LinearGrowth {
        lambda_m: f64,
        lambda_a: f64,
        lambda_l: f64,
        n_c: f64,
        /// Reference nutrient mean `g_ref = (g(n))_mean` at which the
        /// inward-pointing condition is checked; the drift and its fixed
        /// point depend on the realized nutrient only through this mean.
        #[serde(default = "default_g_ref")]
        g_ref: f64,
    },
    CenteredDecay {
        lambda: f64,
        /// Componentwise bound on the perturbation `Sigma0`.
        k: f64,
        sigma0: Sigma0,
    },
    Custom {
        m: [[f64; 2]; 2],
        sigma: [f64; 2],
        k_bounds: KBounds,
    },
}

fn default_g_ref() -> f64 {
    1.0
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceModel::LinearGrowth {
                lambda_m,
                lambda_a,
                lambda_l,
                n_c,
                g_ref,
            } => {
                if !(lambda_m > 0.0 && lambda_a > 0.0 && lambda_l > 0.0) {
                    return Err(ChdError::config(
                        "linear_growth rates lambda_m, lambda_a, lambda_l must be positive",
                    ));
                }
                if !(n_c > 0.0 && n_c < 1.0) {
                    return Err(ChdError::config(format!(
                        "linear_growth n_c must lie in (0,1), got {n_c}"
                    )));
                }
                if !(g_ref >= n_c && g_ref <= 1.0) {
                    return Err(ChdError::config(format!(
                        "linear_growth g_ref must lie in [n_c, 1], got {g_ref}"
                    )));
                }
                Ok(())
            }
            SourceModel::CenteredDecay { lambda, k, sigma0 } => {
                if !(lambda > 0.0) {
                    return Err(ChdError::config("centered_decay lambda must be positive"));
                }
                if !(k >= 0.0) {
                    return Err(ChdError::config("centered_decay k must be nonnegative"));
                }
                if sigma0.bound() > k + 1e-15 {
                    return Err(ChdError::config(format!(
                        "centered_decay perturbation bound {} exceeds declared k = {k}",
                        sigma0.bound()
                    )));
                }
                Ok(())
            }
            SourceModel::Custom { k_bounds, sigma, .. } => {
                if k_bounds.p_lo > k_bounds.p_hi || k_bounds.d_lo > k_bounds.d_hi {
                    return Err(ChdError::config("custom k_bounds must be ordered"));
                }
                if !k_bounds.contains(sigma) {
                    return Err(ChdError::config(
                        "custom sigma value lies outside its declared k_bounds",
                    ));
                }
                Ok(())
            }
        }
    }

    /// The constant matrix `M = (m_ij)`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        match *self {
            SourceModel::LinearGrowth {
                lambda_a, lambda_l, ..
            } => [[-lambda_a, 0.0], [lambda_a, -lambda_l]],
            SourceModel::CenteredDecay { lambda, .. } => [[-lambda, 0.0], [0.0, -lambda]],
            SourceModel::Custom { m, .. } => m,
        }
    }

    /// `Sigma(n, phi_p, phi_d)`; bounded and globally Lipschitz in all
    /// arguments, accepting any real nutrient value.
    pub fn sigma(&self, n: f64, p: SimplexPoint) -> [f64; 2] {
        match *self {
            SourceModel::LinearGrowth {
                lambda_m, n_c, ..
            } => {
                let g = n.min(1.0).max(n_c);
                [lambda_m * g, 0.0]
            }
            SourceModel::CenteredDecay { lambda, sigma0, .. } => {
                let s0 = sigma0.eval(n, p);
                [lambda / 3.0 + s0[0], lambda / 3.0 + s0[1]]
            }
            SourceModel::Custom { sigma, .. } => sigma,
        }
    }

    /// Full source `S = Sigma + M (phi_p, phi_d)`.
    pub fn source(&self, n: f64, p: SimplexPoint) -> [f64; 2] {
        let s = self.sigma(n, p);
        let m = self.matrix();
        [
            s[0] + m[0][0] * p.s + m[0][1] * p.r,
            s[1] + m[1][0] * p.s + m[1][1] * p.r,
        ]
    }

    /// Declared componentwise bounds on the range of `Sigma`.
    pub fn sigma_range(&self) -> KBounds {
        match *self {
            SourceModel::LinearGrowth { lambda_m, .. } => KBounds {
                p_lo: 0.0,
                p_hi: lambda_m,
                d_lo: 0.0,
                d_hi: 0.0,
            },
            SourceModel::CenteredDecay { lambda, k, .. } => KBounds {
                p_lo: lambda / 3.0 - k,
                p_hi: lambda / 3.0 + k,
                d_lo: lambda / 3.0 - k,
                d_hi: lambda / 3.0 + k,
            },
            SourceModel::Custom { k_bounds, .. } => k_bounds,
        }
    }

    /// The box of `Sigma`-mean values over which the inward-pointing
    /// condition is verified. For the decay and custom families this is the
    /// full declared range. For `LinearGrowth` the drift of the mean values
    /// depends on the nutrient only through `(g(n))_mean`, which in operation
    /// stays pinned near a reference level; the admissible disk is built
    /// around the fixed point of that reference drift, so the check is
    /// performed at `(lambda_m * g_ref, 0)`.
    pub fn inward_check_box(&self) -> KBounds {
        match *self {
            SourceModel::LinearGrowth {
                lambda_m, g_ref, ..
            } => KBounds {
                p_lo: lambda_m * g_ref,
                p_hi: lambda_m * g_ref,
                d_lo: 0.0,
                d_hi: 0.0,
            },
            _ => self.sigma_range(),
        }
    }

    /// Stable fixed point of the reference mean drift for `LinearGrowth`:
    /// `(lambda_m/lambda_a * g_mean, lambda_m/lambda_l * g_mean)`.
    pub fn fixed_point(&self, g_mean: f64) -> Result<[f64; 2]> {
        match *self {
            SourceModel::LinearGrowth {
                lambda_m,
                lambda_a,
                lambda_l,
                ..
            } => {
                if lambda_a == 0.0 || lambda_l == 0.0 {
                    return Err(ChdError::config(
                        "fixed point undefined: zero rate makes the drift matrix singular",
                    ));
                }
                Ok([
                    lambda_m / lambda_a * g_mean,
                    lambda_m / lambda_l * g_mean,
                ])
            }
            _ => Err(ChdError::config(
                "fixed_point is defined for the linear_growth model only",
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Admissible regions
// ---------------------------------------------------------------------------

/// Closed region strictly inside the open simplex with a C1 boundary, on
/// which the mean dynamics is checked to point inward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AdmissibleRegion {
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// `{s >= margin, r >= margin, s + r <= 1 - margin}` with the three
    /// corners rounded by circular arcs so the outer normal exists
    /// everywhere. `rounding` defaults to `margin / 2`.
    ShrunkenSimplex {
        margin: f64,
        #[serde(default)]
        rounding: Option<f64>,
    },
}

/// A boundary sample: point and outward unit normal.
#[derive(Clone, Copy, Debug)]
pub struct BoundarySample {
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Closest point on the segment `[a, b]` to `p`.
fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let denom = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if denom > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

impl AdmissibleRegion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AdmissibleRegion::Disk { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(ChdError::config("disk radius must be positive"));
                }
                Ok(())
            }
            AdmissibleRegion::ShrunkenSimplex { margin, rounding } => {
                if !(margin > 0.0 && margin < 1.0 / 3.0) {
                    return Err(ChdError::config(format!(
                        "shrunken_simplex margin must lie in (0, 1/3), got {margin}"
                    )));
                }
                let rho = rounding.unwrap_or(margin / 2.0);
                if !(rho > 0.0 && rho <= margin) {
                    return Err(ChdError::config(format!(
                        "corner rounding must lie in (0, margin], got {rho}"
                    )));
                }
                // inset triangle must be nonempty
                if 1.0 - 3.0 * margin - rho * (2.0 + std::f64::consts::SQRT_2) <= 0.0 {
                    return Err(ChdError::config(
                        "margin/rounding leave no room for the rounded region",
                    ));
                }
                Ok(())
            }
        }
    }

    fn rounding(&self) -> f64 {
        match *self {
            AdmissibleRegion::ShrunkenSimplex { margin, rounding } => {
                rounding.unwrap_or(margin / 2.0)
            }
            _ => 0.0,
        }
    }

    /// Vertices of the inset triangle whose `rho`-neighborhood is the
    /// rounded region: edges of the margin triangle moved inward by `rho`.
    fn inset_vertices(&self) -> [[f64; 2]; 3] {
        match *self {
            AdmissibleRegion::ShrunkenSimplex { margin, .. } => {
                let rho = self.rounding();
                let m = margin;
                let sq2 = std::f64::consts::SQRT_2;
                // constraints: s >= m + rho, r >= m + rho, s + r <= 1 - m - rho*sqrt(2)
                let a = [m + rho, m + rho];
                let b = [1.0 - m - rho * sq2 - (m + rho), m + rho];
                let c = [m + rho, 1.0 - m - rho * sq2 - (m + rho)];
                [a, [b[0], b[1]], c]
            }
            _ => unreachable!(),
        }
    }

    /// Signed distance to the region: negative inside, zero on the boundary.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            AdmissibleRegion::Disk { center, radius } => dist_sq(p, center).sqrt() - radius,
            AdmissibleRegion::ShrunkenSimplex { .. } => {
                let v = self.inset_vertices();
                let rho = self.rounding();
                // signed distance to the inset triangle, exact for the
                // convex hull: Euclidean outside, max of edge-line values
                // inside.
                // vertices are counterclockwise, so (dy, -dx) points outward
                let edges = [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])];
                let mut inside = true;
                let mut interior_sd = f64::NEG_INFINITY;
                let mut min_seg = f64::INFINITY;
                for (a, b) in edges {
                    let n = [b[1] - a[1], -(b[0] - a[0])];
                    let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
                    let n = [n[0] / len, n[1] / len];
                    let d = (p[0] - a[0]) * n[0] + (p[1] - a[1]) * n[1];
                    if d > 0.0 {
                        inside = false;
                    }
                    interior_sd = interior_sd.max(d);
                    min_seg = min_seg.min(dist_sq(p, closest_on_segment(p, a, b)).sqrt());
                }
                let tri_sd = if inside { interior_sd } else { min_seg };
                tri_sd - rho
            }
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.signed_distance(p) <= 0.0
    }

    pub fn contains_strictly(&self, p: [f64; 2]) -> bool {
        self.signed_distance(p) < 0.0
    }

    /// The region must be a subset of the open simplex.
    pub fn subset_of_open_simplex(&self) -> bool {
        match *self {
            AdmissibleRegion::Disk { center, radius } => {
                let c = SimplexPoint::new(center[0], center[1]);
                if !c.inside_open() {
                    return false;
                }
                // distances from the center to the three simplex edges
                let d_s = center[0];
                let d_r = center[1];
                let d_h = (1.0 - center[0] - center[1]) / std::f64::consts::SQRT_2;
                d_s > radius && d_r > radius && d_h > radius
            }
            // by construction for a valid margin
            AdmissibleRegion::ShrunkenSimplex { .. } => self.validate().is_ok(),
        }
    }

    /// Evenly spaced boundary samples with outward unit normals. Corners of
    /// the shrunken simplex are rounded, so the normal is defined everywhere.
    pub fn boundary_samples(&self, count: usize) -> Vec<BoundarySample> {
        let n = count.max(8);
        match *self {
            AdmissibleRegion::Disk { center, radius } => (0..n)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    let dir = [th.cos(), th.sin()];
                    BoundarySample {
                        point: [center[0] + radius * dir[0], center[1] + radius * dir[1]],
                        normal: dir,
                    }
                })
                .collect(),
            AdmissibleRegion::ShrunkenSimplex { .. } => {
                let v = self.inset_vertices();
                let rho = self.rounding();
                // outward edge normals of the triangle (s >= .., r >= ..,
                // s + r <= ..) in vertex order a (bottom-left), b (bottom-
                // right), c (top-left):
                let sq2 = std::f64::consts::SQRT_2;
                let segs: [([f64; 2], [f64; 2], [f64; 2]); 3] = [
                    (v[0], v[1], [0.0, -1.0]),            // bottom edge r = margin
                    (v[1], v[2], [1.0 / sq2, 1.0 / sq2]), // hypotenuse
                    (v[2], v[0], [-1.0, 0.0]),            // left edge s = margin
                ];
                // boundary = 3 straight runs offset by rho plus 3 corner arcs
                let mut pieces: Vec<(f64, Box<dyn Fn(f64) -> BoundarySample>)> = Vec::new();
                for k in 0..3 {
                    let (a, b, nrm) = segs[k];
                    let pa = [a[0] + rho * nrm[0], a[1] + rho * nrm[1]];
                    let pb = [b[0] + rho * nrm[0], b[1] + rho * nrm[1]];
                    let len = dist_sq(pa, pb).sqrt();
                    pieces.push((
                        len,
                        Box::new(move |t| BoundarySample {
                            point: [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])],
                            normal: nrm,
                        }),
                    ));
                    // arc at vertex b between this edge normal and the next
                    let (_, _, nrm_next) = segs[(k + 1) % 3];
                    let th0 = nrm[1].atan2(nrm[0]);
                    let mut th1 = nrm_next[1].atan2(nrm_next[0]);
                    while th1 < th0 {
                        th1 += 2.0 * std::f64::consts::PI;
                    }
                    let center = b;
                    let arc_len = rho * (th1 - th0);
                    pieces.push((
                        arc_len,
                        Box::new(move |t| {
                            let th = th0 + t * (th1 - th0);
                            let dir = [th.cos(), th.sin()];
                            BoundarySample {
                                point: [center[0] + rho * dir[0], center[1] + rho * dir[1]],
                                normal: dir,
                            }
                        }),
                    ));
                }
                let total: f64 = pieces.iter().map(|(l, _)| l).sum();
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let mut s = total * k as f64 / n as f64;
                    let mut placed = false;
                    for (len, f) in &pieces {
                        if s <= *len {
                            out.push(f((s / len).clamp(0.0, 1.0)));
                            placed = true;
                            break;
                        }
                        s -= len;
                    }
                    if !placed {
                        // round-off pushed s past the last piece
                        let (_, f) = pieces.last().unwrap();
                        out.push(f(1.0));
                    }
                }
                out
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Inward-pointing verification
// ---------------------------------------------------------------------------

/// Outcome of the inward-pointing check on the region boundary.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InwardVerdict {
    pub holds: bool,
    /// `max (M y + x) . n` over boundary samples `y` and the corners of the
    /// `Sigma`-bound box; strictly negative when the condition holds.
    pub worst_margin: f64,
    /// Boundary point attaining the worst margin.
    pub witness: [f64; 2],
}

/// Default number of boundary samples.
pub const INWARD_SAMPLES: usize = 720;

/// Verify `(M y + x) . n < 0` for all boundary points `y` of the region and
/// all `x` in the model's check box (corners suffice: the expression is
/// linear in `x`). The region must sit inside the open simplex.
pub fn check_inward(
    model: &SourceModel,
    region: &AdmissibleRegion,
    n_boundary_samples: usize,
) -> Result<InwardVerdict> {
    region.validate()?;
    if !region.subset_of_open_simplex() {
        return Err(ChdError::hypothesis(
            "admissible region is not contained in the open simplex",
        ));
    }
    let m = model.matrix();
    let corners = model.inward_check_box().corners();
    let mut worst = f64::NEG_INFINITY;
    let mut witness = [0.0, 0.0];
    for s in region.boundary_samples(n_boundary_samples) {
        let my = [
            m[0][0] * s.point[0] + m[0][1] * s.point[1],
            m[1][0] * s.point[0] + m[1][1] * s.point[1],
        ];
        for x in corners {
            let dot = (my[0] + x[0]) * s.normal[0] + (my[1] + x[1]) * s.normal[1];
            if dot > worst {
                worst = dot;
                witness = s.point;
            }
        }
    }
    Ok(InwardVerdict {
        holds: worst < 0.0,
        worst_margin: worst,
        witness,
    })
}

// ---------------------------------------------------------------------------
// Mean-value ODE
// ---------------------------------------------------------------------------

/// Mean values `(y_p, y_d)` at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanState {
    pub y: [f64; 2],
    pub t: f64,
}

fn drift(model: &SourceModel, sigma_mean: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    let m = model.matrix();
    [
        sigma_mean[0] + m[0][0] * y[0] + m[0][1] * y[1],
        sigma_mean[1] + m[1][0] * y[0] + m[1][1] * y[1],
    ]
}

/// Classical fourth-order one-step advance of `dy/dt = sigma_mean + M y`
/// with `sigma_mean` held constant over the step.
pub fn mean_ode_step(state: MeanState, model: &SourceModel, sigma_mean: [f64; 2], dt: f64) -> MeanState {
    let y = state.y;
    let k1 = drift(model, sigma_mean, y);
    let y2 = [y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]];
    let k2 = drift(model, sigma_mean, y2);
    let y3 = [y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]];
    let k3 = drift(model, sigma_mean, y3);
    let y4 = [y[0] + dt * k3[0], y[1] + dt * k3[1]];
    let k4 = drift(model, sigma_mean, y4);
    MeanState {
        y: [
            y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ],
        t: state.t + dt,
    }
}

/// Forward-Euler advance of the mean ODE. This is the exact discrete
/// counterpart of the time stepper's mass bookkeeping: integrating the
/// species updates over the domain gives `y_new = y + dt (sigma_mean + M y)`
/// because the discrete fluxes are conservative and boundary-flux-free.
pub fn mean_euler_step(state: MeanState, model: &SourceModel, sigma_mean: [f64; 2], dt: f64) -> MeanState {
    let k = drift(model, sigma_mean, state.y);
    MeanState {
        y: [state.y[0] + dt * k[0], state.y[1] + dt * k[1]],
        t: state.t + dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_growth() -> SourceModel {
        SourceModel::LinearGrowth {
            lambda_m: 0.1,
            lambda_a: 0.5,
            lambda_l: 0.5,
            n_c: 0.05,
            g_ref: 1.0,
        }
    }

    #[test]
    fn sigma_linear_growth_examples() {
        let m = linear_growth();
        let p = SimplexPoint::new(0.2, 0.1);
        assert_eq!(m.sigma(1.0, p), [0.1, 0.0]);
        // g floors at n_c when the nutrient is depleted
        let s = m.sigma(0.0, p);
        assert!((s[0] - 0.1 * 0.05).abs() < 1e-15);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn sigma_centered_decay_constant_part() {
        let m = SourceModel::CenteredDecay {
            lambda: 3.0,
            k: 0.0,
            sigma0: Sigma0::Zero,
        };
        assert_eq!(m.sigma(0.3, SimplexPoint::new(0.1, 0.1)), [1.0, 1.0]);
    }

    #[test]
    fn source_examples() {
        let m = linear_growth();
        let s = m.source(0.7, SimplexPoint::new(0.2, 0.1));
        // S_d = lambda_a * phi_p - lambda_l * phi_d
        assert!((s[1] - 0.05).abs() < 1e-15);

        let zero = SourceModel::Custom {
            m: [[0.0; 2]; 2],
            sigma: [0.0, 0.0],
            k_bounds: KBounds {
                p_lo: 0.0,
                p_hi: 0.0,
                d_lo: 0.0,
                d_hi: 0.0,
            },
        };
        assert_eq!(zero.source(0.5, SimplexPoint::new(0.0, 0.0)), [0.0, 0.0]);

        // the simplex center is a fixed point of the centered-decay source
        let cd = SourceModel::CenteredDecay {
            lambda: 2.0,
            k: 0.0,
            sigma0: Sigma0::Zero,
        };
        let s = cd.source(0.5, SimplexPoint::new(1.0 / 3.0, 1.0 / 3.0));
        assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14);
    }

    #[test]
    fn sigma_stays_in_declared_box_under_fuzzing() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let models = [
            linear_growth(),
            SourceModel::CenteredDecay {
                lambda: 2.0,
                k: 0.3,
                sigma0: Sigma0::Sine { amp: 0.3 },
            },
        ];
        for m in models {
            let kb = m.sigma_range();
            for _ in 0..5000 {
                let n = rng.gen_range(-10.0..10.0);
                let p = SimplexPoint::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let s = m.sigma(n, p);
                assert!(
                    kb.contains(s) || {
                        // allow round-off at the box faces
                        s[0] >= kb.p_lo - 1e-12
                            && s[0] <= kb.p_hi + 1e-12
                            && s[1] >= kb.d_lo - 1e-12
                            && s[1] <= kb.d_hi + 1e-12
                    },
                    "sigma {s:?} escapes box {kb:?}"
                );
            }
        }
    }

    #[test]
    fn fixed_point_closed_form() {
        let m = linear_growth();
        assert_eq!(m.fixed_point(1.0).unwrap(), [0.2, 0.2]);
        assert_eq!(m.fixed_point(0.0).unwrap(), [0.0, 0.0]);

        let m2 = SourceModel::LinearGrowth {
            lambda_m: 0.1,
            lambda_a: 0.4,
            lambda_l: 0.8,
            n_c: 0.05,
            g_ref: 1.0,
        };
        let fp = m2.fixed_point(1.0).unwrap();
        assert!((fp[0] - 0.25).abs() < 1e-15 && (fp[1] - 0.125).abs() < 1e-15);
        // consistent with Y*_p + Y*_d <= lambda_m (1/lambda_a + 1/lambda_l) < 1
        assert!(fp[0] + fp[1] < 1.0);
    }

    #[test]
    fn inward_check_paper_disk() {
        let m = linear_growth();
        let region = AdmissibleRegion::Disk {
            center: [0.2, 0.2],
            radius: 0.05,
        };
        let v = check_inward(&m, &region, INWARD_SAMPLES).unwrap();
        assert!(v.holds, "margin {}", v.worst_margin);
        // worst margin <= -(1/2) min(lambda_a, 2 lambda_l - lambda_a) * radius
        assert!(
            v.worst_margin <= -0.0125 + 1e-9,
            "margin {} not below the analytic bound",
            v.worst_margin
        );
    }

    #[test]
    fn inward_check_degenerate_zero_drift_fails() {
        let zero = SourceModel::Custom {
            m: [[0.0; 2]; 2],
            sigma: [0.0, 0.0],
            k_bounds: KBounds {
                p_lo: 0.0,
                p_hi: 0.0,
                d_lo: 0.0,
                d_hi: 0.0,
            },
        };
        let region = AdmissibleRegion::Disk {
            center: [0.3, 0.3],
            radius: 0.1,
        };
        let v = check_inward(&zero, &region, 128).unwrap();
        assert!(!v.holds);
        assert!(v.worst_margin.abs() < 1e-12);
    }

    #[test]
    fn inward_check_rejects_region_leaving_simplex() {
        // lambda_m (lambda_a + lambda_l) = 0.5 > lambda_a lambda_l = 0.25:
        // the nominal fixed point (1, 1) sits outside the simplex.
        let m = SourceModel::LinearGrowth {
            lambda_m: 0.5,
            lambda_a: 0.5,
            lambda_l: 0.5,
            n_c: 0.05,
            g_ref: 1.0,
        };
        let fp = m.fixed_point(1.0).unwrap();
        let region = AdmissibleRegion::Disk {
            center: fp,
            radius: 0.05,
        };
        match check_inward(&m, &region, 64) {
            Err(crate::error::ChdError::Hypothesis(_)) => {}
            Ok(v) => assert!(!v.holds, "must fail, got margin {}", v.worst_margin),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn shrunken_simplex_geometry() {
        let r = AdmissibleRegion::ShrunkenSimplex {
            margin: 0.15,
            rounding: None,
        };
        r.validate().unwrap();
        assert!(r.subset_of_open_simplex());
        assert!(r.contains([0.3, 0.3]));
        assert!(!r.contains([0.05, 0.3]));
        assert!(!r.contains([0.5, 0.45]));
        // straight-edge points sit on the boundary
        assert!(r.signed_distance([0.15, 0.4]).abs() < 1e-12);
        // boundary samples lie on the zero level set with unit normals
        for s in r.boundary_samples(256) {
            assert!(r.signed_distance(s.point).abs() < 1e-9, "sample off boundary");
            let n2 = s.normal[0] * s.normal[0] + s.normal[1] * s.normal[1];
            assert!((n2 - 1.0).abs() < 1e-12);
            // simplex membership
            assert!(SimplexPoint::new(s.point[0], s.point[1]).inside_open());
        }
    }

    #[test]
    fn centered_decay_with_shrunken_simplex_holds() {
        let m = SourceModel::CenteredDecay {
            lambda: 1.0,
            k: 0.05,
            sigma0: Sigma0::Zero,
        };
        let region = AdmissibleRegion::ShrunkenSimplex {
            margin: 0.15,
            rounding: None,
        };
        let v = check_inward(&m, &region, INWARD_SAMPLES).unwrap();
        assert!(v.holds, "margin {}", v.worst_margin);
    }

    #[test]
    fn mean_ode_equilibrium_and_decay() {
        let m = linear_growth();
        let fp = m.fixed_point(1.0).unwrap();
        let sigma = [0.1, 0.0]; // lambda_m * g_mean with g_mean = 1
        let mut st = MeanState { y: fp, t: 0.0 };
        for _ in 0..100 {
            st = mean_ode_step(st, &m, sigma, 0.01);
        }
        assert!((st.y[0] - fp[0]).abs() < 1e-12 && (st.y[1] - fp[1]).abs() < 1e-12);

        // from (0.3, 0.3) the trajectory approaches the fixed point; compare
        // against the closed-form solution of the 2x2 linear system at t=20.
        let mut st = MeanState {
            y: [0.3, 0.3],
            t: 0.0,
        };
        let dt = 0.01;
        for _ in 0..2000 {
            st = mean_ode_step(st, &m, sigma, dt);
        }
        // defective eigenvalue -1/2: y_p - y*_p = dp e^{-t/2},
        // y_d - y*_d = (dd + lambda_a dp t) e^{-t/2}
        let t = 20.0;
        let e = (-0.5 * t).exp();
        let exact_p = 0.2 + 0.1 * e;
        let exact_d = 0.2 + (0.1 + 0.5 * 0.1 * t) * e;
        assert!((st.y[0] - exact_p).abs() < 1e-4, "{} vs {exact_p}", st.y[0]);
        assert!((st.y[1] - exact_d).abs() < 1e-4, "{} vs {exact_d}", st.y[1]);

        // zero drift keeps the state constant
        let zero = SourceModel::Custom {
            m: [[0.0; 2]; 2],
            sigma: [0.0, 0.0],
            k_bounds: KBounds {
                p_lo: 0.0,
                p_hi: 0.0,
                d_lo: 0.0,
                d_hi: 0.0,
            },
        };
        let st0 = MeanState {
            y: [0.4, 0.2],
            t: 0.0,
        };
        let st1 = mean_ode_step(st0, &zero, [0.0, 0.0], 0.1);
        assert_eq!(st0.y, st1.y);
    }

    #[test]
    fn forward_invariance_under_adversarial_sigma() {
        use rand::prelude::*;
        // check_inward holds for this pair, so the mean trajectory must stay
        // in the region for any per-step sigma_mean inside the bound box.
        let m = SourceModel::CenteredDecay {
            lambda: 1.0,
            k: 0.05,
            sigma0: Sigma0::Zero,
        };
        let region = AdmissibleRegion::ShrunkenSimplex {
            margin: 0.15,
            rounding: None,
        };
        assert!(check_inward(&m, &region, INWARD_SAMPLES).unwrap().holds);
        let kb = m.sigma_range();
        let corners = kb.corners();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let dt = 0.01;
        // start near the boundary, margin edge
        let mut st = MeanState {
            y: [0.16, 0.4],
            t: 0.0,
        };
        assert!(region.contains_strictly(st.y));
        let (c1, c2) = (0.15, 0.85);
        for step in 0..100_000u32 {
            let sigma = if rng.gen_bool(0.5) {
                corners[rng.gen_range(0..4)]
            } else {
                [
                    rng.gen_range(kb.p_lo..=kb.p_hi),
                    rng.gen_range(kb.d_lo..=kb.d_hi),
                ]
            };
            st = mean_ode_step(st, &m, sigma, dt);
            let sd = region.signed_distance(st.y);
            assert!(sd <= 1e-9, "exited region at step {step}: sd = {sd}");
            // confinement constants induced by the region geometry
            assert!(st.y[0] >= c1 - 1e-9 && st.y[1] >= c1 - 1e-9);
            let sum = st.y[0] + st.y[1];
            assert!(sum >= c1 - 1e-9 && sum <= c2 + 1e-9);
        }
    }
}
