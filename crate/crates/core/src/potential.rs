//! The attractive coupling -Delta c = rho in radial symmetry.
//!
//! Two routes:
//!
//! * epsilon = 0: the cumulative-mass ODE. Gauss's law gives
//!   c'(r) = -m(r) / (n alpha(n) r^{n-1}) with m(r) the mass enclosed in
//!   radius r, which is a piecewise polynomial of the cell data. Both c and
//!   the pairing integral of rho against c are then integrated in closed
//!   form per cell, so the interaction energy of the piecewise-constant
//!   field is exact: the discrete sharp-inequality checks carry no
//!   quadrature slack and the bilinear pairing is symmetric to roundoff.
//!
//! * epsilon > 0: the smoothed kernel (|x-y|^2 + eps^2)^{-(n-2)/2} paired
//!   against the sphere-averaged source, with the closed-form angular
//!   average for n = 3 and 32-point Gauss-Legendre in the polar angle for
//!   n >= 4.

use std::sync::Arc;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::radial::{DensityField, RadialGrid};
use crate::special::gamma;

/// Radial potential on the same grid as its source density.
#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: Arc<RadialGrid>,
    /// c at cell centers.
    c_values: Vec<f64>,
    /// dc/dr at every face (zero at r = 0 by symmetry); <= 0 for
    /// nonnegative sources, attraction points inward.
    c_prime_faces: Vec<f64>,
    /// Exact per-cell integral of c over the shell volume, used by the
    /// pairing so that energy identities hold at machine precision.
    c_cell_integrals: Vec<f64>,
    epsilon: f64,
}

impl PotentialField {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn c_values(&self) -> &[f64] {
        &self.c_values
    }

    /// dc/dr at faces, indexed like `grid.edges()`.
    pub fn c_prime_faces(&self) -> &[f64] {
        &self.c_prime_faces
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Exact Newtonian solve of -Delta c = rho for the piecewise-constant field.
///
/// The exterior boundary value is the pure Newtonian tail of the enclosed
/// mass, m(r_max) / ((n-2) n alpha(n) r_max^{n-2}); fields are compactly
/// supported inside the domain so this is the full-space potential.
pub fn solve_poisson_radial(rho: &DensityField) -> Result<PotentialField> {
    let grid = rho.grid();
    let n = grid.n();
    if n < 3 {
        return Err(Error::domain("the Newtonian potential requires n >= 3"));
    }
    let nf = n as f64;
    let alpha = grid.alpha_n();
    let cells = grid.cells();
    let edges = grid.edges();
    let values = rho.values();

    // cumulative mass at faces (exact shell sums)
    let mut mass_at_face = vec![0.0; cells + 1];
    for i in 0..cells {
        mass_at_face[i + 1] = mass_at_face[i] + values[i] * grid.volumes()[i];
    }

    let mut c_prime_faces = vec![0.0; cells + 1];
    for j in 1..=cells {
        c_prime_faces[j] = -mass_at_face[j] / grid.face_areas()[j];
    }

    // Inside cell i, -c'(s) = b_i s^{1-n} + rho_i s / n with
    // b_i = (m(r_i) - rho_i alpha r_i^n) / (n alpha); its antiderivative is
    // p_i(s) = b_i s^{2-n}/(2-n) + rho_i s^2/(2n).
    let b_coef: Vec<f64> = (0..cells)
        .map(|i| (mass_at_face[i] - values[i] * alpha * edges[i].powi(n as i32)) / (nf * alpha))
        .collect();
    let p_at = |i: usize, s: f64| -> f64 {
        let sing = if i == 0 {
            // first cell: b_0 = 0 exactly, avoid 0^{2-n}
            0.0
        } else {
            b_coef[i] * s.powi(2 - n as i32) / (2.0 - nf)
        };
        sing + values[i] * s * s / (2.0 * nf)
    };

    let r_max = grid.r_max();
    let c_tail = mass_at_face[cells] / ((nf - 2.0) * nf * alpha * r_max.powi(n as i32 - 2));
    let mut c_at_edge = vec![0.0; cells + 1];
    c_at_edge[cells] = c_tail;
    for i in (0..cells).rev() {
        c_at_edge[i] = c_at_edge[i + 1] + p_at(i, edges[i + 1]) - p_at(i, edges[i]);
    }

    let mut c_values = Vec::with_capacity(cells);
    let mut c_cell_integrals = Vec::with_capacity(cells);
    for i in 0..cells {
        let (a, b) = (edges[i], edges[i + 1]);
        let top = c_at_edge[i + 1] + p_at(i, b);
        c_values.push(top - p_at(i, grid.centers()[i]));
        // integral of p_i(s) n alpha s^{n-1} ds over the cell, closed form
        let sing = if i == 0 {
            0.0
        } else {
            nf * alpha * b_coef[i] / (2.0 - nf) * (b * b - a * a) / 2.0
        };
        let reg =
            alpha * values[i] / 2.0 * (b.powi(n as i32 + 2) - a.powi(n as i32 + 2)) / (nf + 2.0);
        c_cell_integrals.push(top * grid.volumes()[i] - (sing + reg));
    }

    Ok(PotentialField {
        grid: Arc::clone(grid),
        c_values,
        c_prime_faces,
        c_cell_integrals,
        epsilon: 0.0,
    })
}

/// Sphere-averaged smoothed kernel: the mean of
/// (|x-y|^2 + eps^2)^{-(n-2)/2} over all directions of y at radius s, seen
/// from radius r. Symmetric in (r, s).
fn angular_kernel(n: u32, r: f64, s: f64, eps: f64) -> f64 {
    if n == 3 {
        // (1/(2rs)) [ sqrt((r+s)^2+e^2) - sqrt((r-s)^2+e^2) ], rationalized
        // so it stays finite as r s -> 0.
        let u = ((r + s) * (r + s) + eps * eps).sqrt();
        let v = ((r - s) * (r - s) + eps * eps).sqrt();
        2.0 / (u + v)
    } else {
        let nf = n as f64;
        let raw = panel_integrate(|th| {
            let d2 = r * r + s * s - 2.0 * r * s * th.cos() + eps * eps;
            d2.powf(-(nf - 2.0) / 2.0) * th.sin().powf(nf - 2.0)
        });
        raw / sin_power_integral(n)
    }
}

/// Angular quadrature over [0, pi]: 32-point Gauss-Legendre on geometric
/// panels refined toward theta = 0, where the kernel peaks when the source
/// and target radii are close.
fn panel_integrate(f: impl Fn(f64) -> f64) -> f64 {
    const SPLITS: [f64; 5] = [0.0, 1.0 / 512.0, 1.0 / 64.0, 1.0 / 8.0, 1.0];
    let rule = angle_rule();
    let mut acc = 0.0;
    for w in SPLITS.windows(2) {
        acc += rule.integrate(w[0] * std::f64::consts::PI, w[1] * std::f64::consts::PI, &f);
    }
    acc
}

/// d/dr of the sphere-averaged kernel.
fn angular_kernel_dr(n: u32, r: f64, s: f64, eps: f64) -> f64 {
    if n == 3 {
        let u = ((r + s) * (r + s) + eps * eps).sqrt();
        let v = ((r - s) * (r - s) + eps * eps).sqrt();
        let du = (r + s) / u;
        let dv = (r - s) / v;
        -2.0 * (du + dv) / ((u + v) * (u + v))
    } else {
        let nf = n as f64;
        let raw = panel_integrate(|th| {
            let cos = th.cos();
            let d2 = r * r + s * s - 2.0 * r * s * cos + eps * eps;
            -(nf - 2.0) * (r - s * cos) * d2.powf(-nf / 2.0) * th.sin().powf(nf - 2.0)
        });
        raw / sin_power_integral(n)
    }
}

fn angle_rule() -> &'static GaussLegendre {
    use std::sync::OnceLock;
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32).expect("degree 32 rule"))
}

/// Integral of sin^{n-2} over [0, pi]: sqrt(pi) Gamma((n-1)/2) / Gamma(n/2).
fn sin_power_integral(n: u32) -> f64 {
    let nf = n as f64;
    std::f64::consts::PI.sqrt() * gamma((nf - 1.0) / 2.0) / gamma(nf / 2.0)
}

/// Smoothed potential c_eps(x) =
/// (1/(n(n-2)alpha)) integral of rho(y) (|x-y|^2+eps^2)^{-(n-2)/2} dy.
/// Delegates to the exact solve at eps = 0.
pub fn regularized_potential(rho: &DensityField, epsilon: f64) -> Result<PotentialField> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::domain(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        return solve_poisson_radial(rho);
    }
    let grid = rho.grid();
    let n = grid.n();
    if n < 3 {
        return Err(Error::domain("the smoothed kernel requires n >= 3"));
    }
    let nf = n as f64;
    let alpha = grid.alpha_n();
    let norm = 1.0 / (nf * (nf - 2.0) * alpha);
    let cells = grid.cells();
    let centers = grid.centers();
    let values = rho.values();
    let volumes = grid.volumes();

    // source strengths rho_j V_j against the center-to-center kernel; the
    // symmetric kernel makes the discrete pairing self-adjoint exactly
    let strengths: Vec<f64> = values.iter().zip(volumes).map(|(v, w)| v * w).collect();

    let mut c_values = vec![0.0; cells];
    for i in 0..cells {
        let mut acc = 0.0;
        for j in 0..cells {
            acc += strengths[j] * angular_kernel(n, centers[i], centers[j], epsilon);
        }
        c_values[i] = norm * acc;
    }

    let mut c_prime_faces = vec![0.0; cells + 1];
    for (f, cp) in c_prime_faces.iter_mut().enumerate().skip(1) {
        let r = grid.edges()[f];
        let mut acc = 0.0;
        for j in 0..cells {
            acc += strengths[j] * angular_kernel_dr(n, r, centers[j], epsilon);
        }
        *cp = norm * acc;
    }

    let c_cell_integrals = c_values.iter().zip(volumes).map(|(c, w)| c * w).collect();

    Ok(PotentialField {
        grid: Arc::clone(grid),
        c_values,
        c_prime_faces,
        c_cell_integrals,
        epsilon,
    })
}

/// Mollification J_eps * rho with the smoothing kernel whose Newtonian
/// potential is the eps-regularized interaction kernel:
/// J_eps(d) = (eps^2 / alpha(n)) (eps^2 + d^2)^{-(n+2)/2}.
///
/// The drift velocity of the regularized flow is computed by feeding this
/// nonnegative density to the exact cumulative-mass solve; the discrete
/// velocity divergence then equals -(J_eps * rho) cell by cell, which is
/// what keeps the upwind scheme positivity-preserving for eps > 0.
pub fn mollified_density(rho: &DensityField, epsilon: f64) -> Result<DensityField> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::domain(format!(
            "mollifier requires epsilon > 0, got {epsilon}"
        )));
    }
    let grid = rho.grid();
    let n = grid.n();
    let alpha = grid.alpha_n();
    let centers = grid.centers();
    let strengths: Vec<f64> = rho
        .values()
        .iter()
        .zip(grid.volumes())
        .map(|(v, w)| v * w)
        .collect();
    let e2 = epsilon * epsilon;
    let kernel = |r: f64, s: f64| -> f64 {
        if n == 3 {
            // angular average of (e^2 + |x-y|^2)^{-5/2}, rationalized so the
            // r s -> 0 limit is finite
            let x = (r - s) * (r - s) + e2;
            let y = (r + s) * (r + s) + e2;
            let sx = x.sqrt();
            let sy = y.sqrt();
            // (2/3) (x + y + sqrt(xy)) / ((xy)^{3/2} (sqrt(x) + sqrt(y)))
            2.0 / 3.0 * (x + y + sx * sy) / (x * y * sx * sy * (sx + sy))
        } else {
            let nf = n as f64;
            panel_integrate(|th| {
                let d2 = r * r + s * s - 2.0 * r * s * th.cos() + e2;
                d2.powf(-(nf + 2.0) / 2.0) * th.sin().powf(nf - 2.0)
            }) / sin_power_integral(n)
        }
    };
    let values: Vec<f64> = centers
        .iter()
        .map(|&r| {
            let acc: f64 = strengths
                .iter()
                .zip(centers)
                .map(|(q, &s)| q * kernel(r, s))
                .sum();
            (e2 / alpha * acc).max(0.0)
        })
        .collect();
    DensityField::new(Arc::clone(grid), values)
}

/// Pairing integral of a density against a potential on the same grid.
pub fn pairing(rho: &DensityField, pot: &PotentialField) -> Result<f64> {
    if rho.grid().cells() != pot.grid.cells() || rho.grid().n() != pot.grid.n() {
        return Err(Error::domain(
            "density and potential live on different grids",
        ));
    }
    Ok(rho
        .values()
        .iter()
        .zip(&pot.c_cell_integrals)
        .map(|(v, i)| v * i)
        .sum())
}

/// Interaction double integral
/// W = integral of rho(x) rho(y) (|x-y|^2+eps^2)^{-(n-2)/2} dx dy,
/// evaluated through the potential pairing identity W = n(n-2)alpha <rho, c>.
pub fn interaction_energy(rho: &DensityField, epsilon: f64) -> Result<f64> {
    let grid = rho.grid();
    let nf = grid.n() as f64;
    let pot = regularized_potential(rho, epsilon)?;
    Ok(nf * (nf - 2.0) * grid.alpha_n() * pairing(rho, &pot)?)
}
