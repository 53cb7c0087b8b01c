//! Free energy, its two-part decomposition, and the second-moment identity.
//!
//! The free energy of the flow is
//!
//! ```text
//! F(rho) = 1/(m-1) int rho^m - 1/2 int rho c,    -Delta c = rho,
//! ```
//!
//! non-increasing in time. Splitting it with the sharp interaction bound,
//!
//! ```text
//! F1 = 1/(m-1) int rho^m - C(n)/(2(n-2) n alpha) ||rho||^2,
//! F2 = C(n)/(2(n-2) n alpha) ||rho||^2 - W/(2(n-2) n alpha),
//! ```
//!
//! where the norm is L^(2n/(n+2)) and W the interaction double integral,
//! gives F = F1 + F2 exactly at the quadrature level (both sides reuse the
//! same shell sums) with F2 >= 0 in the continuum. Interpolating F1 below by
//! the comparison function f closes the chain f(s) <= F1 <= F that drives
//! both sides of the dichotomy.
//!
//! For epsilon > 0 the internal term becomes (rho+eps)^m - eps^m and the
//! interaction uses the smoothed kernel; the split is applied at the same
//! epsilon so the decomposition identity stays exact.

use crate::criterion::{f_eval, hls_constant, ProblemParams};
use crate::error::{Error, Result};
use crate::potential::{pairing, regularized_potential, PotentialField};
use crate::radial::{lcrit_norm, lp_norm, second_moment, DensityField};

/// Snapshot of every scalar diagnostic at one instant.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub free_energy: f64,
    pub f1: f64,
    pub f2: f64,
    pub lm_norm: f64,
    pub lcrit_norm: f64,
    pub mass: f64,
    pub m2: f64,
    /// Right-hand side of the second-moment identity (see [`dm2dt_formula`]).
    pub dm2dt_formula: f64,
    pub epsilon: f64,
}

/// Internal term: 1/(m-1) int ((rho+eps)^m - eps^m), which reduces to
/// 1/(m-1) int rho^m at eps = 0.
fn internal_energy(rho: &DensityField, m: f64, epsilon: f64) -> f64 {
    let em = epsilon.powf(m);
    let sum: f64 = rho
        .values()
        .iter()
        .zip(rho.grid().volumes())
        .map(|(v, vol)| {
            let t = if epsilon == 0.0 {
                v.powf(m)
            } else {
                (v + epsilon).powf(m) - em
            };
            t * vol
        })
        .sum();
    sum / (m - 1.0)
}

fn check_exponent(rho: &DensityField, m: f64) -> Result<()> {
    // reuse the admissibility window validation
    ProblemParams::new(rho.grid().n(), m, 1.0).map(|_| ())
}

/// Free energy at regularization level `epsilon` (0 = exact Newtonian).
pub fn free_energy(rho: &DensityField, m: f64, epsilon: f64) -> Result<f64> {
    check_exponent(rho, m)?;
    let pot = regularized_potential(rho, epsilon)?;
    Ok(internal_energy(rho, m, epsilon) - 0.5 * pairing(rho, &pot)?)
}

/// The (F1, F2) split at eps = 0; F1 + F2 equals [`free_energy`] exactly.
pub fn energy_split(rho: &DensityField, m: f64) -> Result<(f64, f64)> {
    energy_split_eps(rho, m, 0.0)
}

/// The split at an arbitrary regularization level.
pub fn energy_split_eps(rho: &DensityField, m: f64, epsilon: f64) -> Result<(f64, f64)> {
    let pot = regularized_potential(rho, epsilon)?;
    energy_split_with(rho, m, epsilon, &pot)
}

/// The split against an already-solved potential. The run loop passes its
/// own coupling here so the reported free energy is the exact quantity the
/// dissipation guard monitors.
pub fn energy_split_with(
    rho: &DensityField,
    m: f64,
    epsilon: f64,
    pot: &PotentialField,
) -> Result<(f64, f64)> {
    check_exponent(rho, m)?;
    let grid = rho.grid();
    let nf = grid.n() as f64;
    let c_n = hls_constant(grid.n())?;
    let pivot = c_n / (2.0 * (nf - 2.0) * nf * grid.alpha_n()) * lcrit_norm(rho).powi(2);
    let f1 = internal_energy(rho, m, epsilon) - pivot;
    let f2 = pivot - 0.5 * pairing(rho, pot)?;
    Ok((f1, f2))
}

/// Lower bound of F1 by the comparison function: returns
/// (F1, f(||rho||^(2n(m-1)/(n-2)))) with the field's own mass as M0.
/// The contract is lhs >= rhs up to quadrature slack.
pub fn f1_lower_bound_check(rho: &DensityField, m: f64) -> Result<(f64, f64)> {
    let mass = rho.mass();
    if !(mass > 0.0) {
        return Err(Error::domain(
            "the interpolation exponent is undefined for zero-mass fields",
        ));
    }
    let (f1, _) = energy_split(rho, m)?;
    let nf = rho.grid().n() as f64;
    let params = ProblemParams::new(rho.grid().n(), m, mass)?;
    let s = lcrit_norm(rho).powf(2.0 * nf * (m - 1.0) / (nf - 2.0));
    Ok((f1, f_eval(&params, s)?))
}

/// Second-moment derivative along the flow, by the identity
/// dm2/dt = (2n - 2(n-2)/(m-1)) int rho^m + 2(n-2) F(rho).
/// With the attraction switched off the same computation collapses to the
/// porous-medium virial identity dm2/dt = 2n int rho^m.
pub fn dm2dt_formula(rho: &DensityField, m: f64, attraction: bool) -> Result<f64> {
    check_exponent(rho, m)?;
    let nf = rho.grid().n() as f64;
    let int_m = (m - 1.0) * internal_energy(rho, m, 0.0); // int rho^m
    if !attraction {
        return Ok(2.0 * nf * int_m);
    }
    let coeff = 2.0 * nf - 2.0 * (nf - 2.0) / (m - 1.0);
    assert!(
        coeff < 0.0,
        "admissible m < 2 - 2/n forces a negative rho^m coefficient"
    );
    Ok(coeff * int_m + 2.0 * (nf - 2.0) * free_energy(rho, m, 0.0)?)
}

/// Quantitative form of the mass/second-moment/L^m relation: returns
/// (mass, 2 alpha(n)^(2(m-1)/q) ||rho||_m^(2m/q) m2^(n(m-1)/q)) with
/// q = n(m-1) + 2m; the contract is lhs <= rhs.
///
/// The constant comes from splitting the mass over a ball of radius R,
/// bounding the inner part by Hoelder against |B_R| = alpha(n) R^n and the
/// outer part by m2 / R^2, then choosing the R at which both terms are
/// equal. A violated bound (e.g. m2 = 0 with positive mass) signals
/// concentration beyond grid resolution.
pub fn mass_lower_bound_check(rho: &DensityField, m: f64) -> Result<(f64, f64)> {
    check_exponent(rho, m)?;
    let mass = rho.mass();
    if !(mass > 0.0) {
        return Err(Error::domain("mass bound requires positive mass"));
    }
    let nf = rho.grid().n() as f64;
    let alpha = rho.grid().alpha_n();
    let q = nf * (m - 1.0) + 2.0 * m;
    let lm = lp_norm(rho, m)?;
    let m2 = second_moment(rho);
    let rhs =
        2.0 * alpha.powf(2.0 * (m - 1.0) / q) * lm.powf(2.0 * m / q) * m2.powf(nf * (m - 1.0) / q);
    Ok((mass, rhs))
}

/// Assembles the full scalar diagnostic set for one field.
pub fn energy_report(
    rho: &DensityField,
    m: f64,
    epsilon: f64,
    attraction: bool,
) -> Result<EnergyReport> {
    let pot = regularized_potential(rho, epsilon)?;
    energy_report_with(rho, m, epsilon, attraction, &pot)
}

/// Like [`energy_report`] but reusing a potential solved by the caller.
pub fn energy_report_with(
    rho: &DensityField,
    m: f64,
    epsilon: f64,
    attraction: bool,
    pot: &PotentialField,
) -> Result<EnergyReport> {
    let (f1, f2) = energy_split_with(rho, m, epsilon, pot)?;
    Ok(EnergyReport {
        free_energy: f1 + f2,
        f1,
        f2,
        lm_norm: lp_norm(rho, m)?,
        lcrit_norm: lcrit_norm(rho),
        mass: rho.mass(),
        m2: second_moment(rho),
        dm2dt_formula: dm2dt_formula(rho, m, attraction)?,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{extremal_profile, project_profile, RadialGrid, Spacing};
    use std::sync::Arc;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn grid(n: u32, r_max: f64, cells: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(n, r_max, cells, Spacing::Uniform).unwrap())
    }

    fn ball(g: &Arc<RadialGrid>, radius: f64, amplitude: f64) -> DensityField {
        let k = g.aligned_edge(radius).expect("aligned radius");
        let mut v = vec![0.0; g.cells()];
        for cell in v.iter_mut().take(k) {
            *cell = amplitude;
        }
        DensityField::new(Arc::clone(g), v).unwrap()
    }

    fn random_field(g: &Arc<RadialGrid>, seed: u64) -> DensityField {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..g.cells()).map(|_| rng.random::<f64>()).collect();
        DensityField::new(Arc::clone(g), values).unwrap()
    }

    #[test]
    fn uniform_ball_free_energy_closed_form() {
        // F = rho0^m (4 pi / 3) a^3 / (m-1) - 3 M^2 / (20 pi a) for n = 3
        let g = grid(3, 2.0, 256);
        let (rho0, a, m) = (1.6, 0.5, 1.25);
        let rho = ball(&g, a, rho0);
        let mass = rho.mass();
        let expect = rho0.powf(m) * 4.0 * std::f64::consts::PI / 3.0 * a * a * a / (m - 1.0)
            - 3.0 * mass * mass / (20.0 * std::f64::consts::PI * a);
        assert!(rel(free_energy(&rho, m, 0.0).unwrap(), expect) < 1e-12);
    }

    #[test]
    fn zero_field_energies_vanish() {
        let g = grid(3, 1.0, 16);
        let zero = DensityField::zero(Arc::clone(&g));
        assert_eq!(free_energy(&zero, 1.25, 0.0).unwrap(), 0.0);
        assert_eq!(dm2dt_formula(&zero, 1.25, true).unwrap(), 0.0);
        assert_eq!(dm2dt_formula(&zero, 1.25, false).unwrap(), 0.0);
    }

    #[test]
    fn regularization_raises_the_free_energy() {
        // (rho+eps)^m - eps^m >= rho^m and the smoothed kernel is pointwise
        // smaller, so F_eps >= F_0 for the same field
        let g = grid(3, 2.0, 96);
        let rho = project_profile(&g, |r| (-2.0 * r * r).exp()).unwrap();
        let f0 = free_energy(&rho, 1.25, 0.0).unwrap();
        for eps in [1e-3, 1e-2, 0.1] {
            let fe = free_energy(&rho, 1.25, eps).unwrap();
            assert!(fe >= f0, "F_eps = {fe} < F_0 = {f0} at eps = {eps}");
        }
    }

    #[test]
    fn split_identity_is_exact_and_f2_nonnegative() {
        let g = grid(3, 3.0, 128);
        for seed in 0..30 {
            let rho = random_field(&g, seed);
            let m = 1.27;
            let (f1, f2) = energy_split(&rho, m).unwrap();
            let f = free_energy(&rho, m, 0.0).unwrap();
            assert!(
                rel(f1 + f2, f) < 1e-12,
                "split identity broke: {}",
                f1 + f2 - f
            );
            // exact pairing: the continuum inequality survives discretization
            assert!(f2 >= -1e-3 * f.abs(), "f2 = {f2}");
        }
        // and for eps > 0 the split still sums to the eps free energy
        let rho = random_field(&g, 99);
        let (f1, f2) = energy_split_eps(&rho, 1.25, 0.05).unwrap();
        let f = free_energy(&rho, 1.25, 0.05).unwrap();
        assert!(rel(f1 + f2, f) < 1e-12);
    }

    #[test]
    fn extremal_profile_nearly_annihilates_f2() {
        let g =
            Arc::new(RadialGrid::new(3, 150.0, 4096, Spacing::Geometric { ratio: 1.003 }).unwrap());
        let u = extremal_profile(&g, 1.0).unwrap();
        let (f1, f2) = energy_split(&u, 1.25).unwrap();
        let f = f1 + f2;
        assert!(f2 >= 0.0);
        assert!(f2 < 0.02 * f.abs(), "f2 = {f2} vs |F| = {}", f.abs());
    }

    #[test]
    fn lower_bound_chain_on_assorted_fields() {
        // f(s) <= F1 <= F with the field's own mass as M0
        let g = grid(3, 3.0, 128);
        let m = 1.25;
        for seed in 0..20 {
            let rho = random_field(&g, seed);
            let (f1, fs) = f1_lower_bound_check(&rho, m).unwrap();
            let f = free_energy(&rho, m, 0.0).unwrap();
            let scale = f.abs().max(f1.abs()).max(1.0);
            assert!(f1 >= fs - 1e-8 * scale, "field {seed} chain: {fs} > {f1}");
            assert!(f >= f1 - 1e-8 * scale);
        }
        // named fixtures
        let ball_field = ball(&grid(3, 1.0, 64), 0.5, 2.0);
        let (lhs, rhs) = f1_lower_bound_check(&ball_field, m).unwrap();
        assert!(lhs >= rhs - 1e-10 * lhs.abs().max(1.0));
        let zero = DensityField::zero(Arc::clone(&g));
        assert!(f1_lower_bound_check(&zero, m).is_err());
    }

    #[test]
    fn dm2dt_collapses_to_porous_medium_virial_without_attraction() {
        let g = grid(3, 2.0, 128);
        let rho = project_profile(&g, |r| (-3.0 * r * r).exp()).unwrap();
        let m = 1.25;
        let int_m: f64 = rho
            .values()
            .iter()
            .zip(g.volumes())
            .map(|(v, vol)| v.powf(m) * vol)
            .sum();
        let pm = dm2dt_formula(&rho, m, false).unwrap();
        assert!(rel(pm, 6.0 * int_m) < 1e-13);
        assert!(pm > 0.0);
        // with attraction the identity couples to the free energy
        let full = dm2dt_formula(&rho, m, true).unwrap();
        let f = free_energy(&rho, m, 0.0).unwrap();
        let coeff = 6.0 - 2.0 / (m - 1.0);
        assert!(rel(full, coeff * int_m + 2.0 * f) < 1e-12);
    }

    #[test]
    fn negative_free_energy_forces_a_supercritical_norm() {
        // the chain f(s) <= F pins any negative-energy field beyond the
        // norm threshold, since f is positive up to a root past s*
        use crate::criterion::{compute_constants, ProblemParams};
        let m = 1.25;
        for (mass, width) in [(150.0, 0.1), (250.0, 0.3), (400.0, 0.5)] {
            let g = grid(3, 8.0 * width, 256);
            let amp = mass / (std::f64::consts::PI.powf(1.5) * width.powi(3));
            let rho =
                project_profile(&g, move |r| amp * (-(r / width) * (r / width)).exp()).unwrap();
            let f = free_energy(&rho, m, 0.0).unwrap();
            assert!(
                f < 0.0,
                "fixture with mass {mass} width {width} has F = {f} >= 0"
            );
            let params = ProblemParams::new(3, m, rho.mass()).unwrap();
            let threshold = compute_constants(&params).unwrap().threshold_norm;
            assert!(
                lcrit_norm(&rho) > threshold,
                "negative energy but norm {} <= threshold {threshold}",
                lcrit_norm(&rho)
            );
        }
    }

    #[test]
    fn dm2dt_internal_coefficient_is_negative_across_admissible_grid() {
        for n in [3u32, 4, 5, 6] {
            let (lo, hi) = crate::criterion::critical_exponents(n).unwrap();
            for k in 1..10 {
                let m = lo + (hi - lo) * k as f64 / 10.0;
                let nf = n as f64;
                let coeff = 2.0 * nf - 2.0 * (nf - 2.0) / (m - 1.0);
                assert!(coeff < 0.0, "n={n} m={m}: coefficient {coeff}");
            }
        }
    }

    #[test]
    fn mass_bound_holds_and_degenerates_as_balls_shrink() {
        let m = 1.25;
        // fixed mass, shrinking radius: the bound stays valid while the
        // L^m norm is forced to diverge as m2 -> 0
        let mut last_lm = 0.0;
        for k in [1usize, 2, 4, 8] {
            let g = grid(3, 2.0 / k as f64, 64);
            let radius = 1.0 / k as f64;
            let amp = 1.0 / (g.alpha_n() * radius.powi(3));
            let rho = ball(&g, radius, amp);
            let (lhs, rhs) = mass_lower_bound_check(&rho, m).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "ball {k}: {lhs} > {rhs}");
            let lm = lp_norm(&rho, m).unwrap();
            assert!(lm > last_lm);
            last_lm = lm;
        }
        let g = grid(3, 1.0, 16);
        assert!(mass_lower_bound_check(&DensityField::zero(Arc::clone(&g)), m).is_err());
    }

    #[test]
    fn rescaled_density_preserves_mass_and_scales_internal_energy() {
        // rho_lambda(r) = lambda^n rho(lambda r) keeps the mass and
        // multiplies int rho^m by lambda^(n(m-1))
        let m = 1.25;
        let lambda = 1.7f64;
        let g1 = grid(3, 6.0, 1024);
        let g2 = grid(3, 6.0 / lambda, 1024);
        let profile = |r: f64| (-1.3 * r * r).exp() * (1.0 + r);
        let rho = project_profile(&g1, profile).unwrap();
        let scaled = project_profile(&g2, |r| lambda.powi(3) * profile(lambda * r)).unwrap();
        assert!(rel(scaled.mass(), rho.mass()) < 1e-6);
        let int_m = |f: &DensityField| (m - 1.0) * internal_energy(f, m, 0.0);
        assert!(rel(int_m(&scaled), lambda.powf(3.0 * (m - 1.0)) * int_m(&rho)) < 1e-6);
    }

    #[test]
    fn report_is_internally_consistent() {
        let g = grid(3, 2.0, 96);
        let rho = project_profile(&g, |r| (-r * r).exp()).unwrap();
        let rep = energy_report(&rho, 1.25, 0.0, true).unwrap();
        assert!(rel(rep.free_energy, rep.f1 + rep.f2) < 1e-12);
        assert!(rel(rep.mass, rho.mass()) < 1e-15);
        assert!(rel(rep.m2, second_moment(&rho)) < 1e-15);
        assert!(rel(rep.dm2dt_formula, dm2dt_formula(&rho, 1.25, true).unwrap()) < 1e-15);
    }
}
