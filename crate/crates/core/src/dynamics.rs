//! Time integration of the (optionally regularized) radial system
//!
//! ```text
//! d rho/dt = Delta[(rho+eps)^m - eps^m] - div((rho+eps) grad c),
//! ```
//!
//! by explicit Euler on the finite-volume grid. Face fluxes combine a
//! centered gradient with an arithmetic-mean diffusion coefficient
//! m (rho+eps)^(m-1) and an upwinded drift density, so accepted steps
//! conserve mass to roundoff (telescoping fluxes, zero flux at r = 0 and
//! r = r_max) and stay nonnegative under the CFL bound rather than by
//! clipping.
//!
//! Steps that produce a negative cell are rejected and retried at half the
//! step; needing dt below `dt_min` is one blow-up symptom. The free energy
//! is evaluated on every candidate state and an increasing step is likewise
//! rejected while dt can still shrink, which realizes the gradient-flow
//! dissipation discretely. Blow-up is declared only on the conjunction of
//! a sustained dt collapse and L^m growth past `blowup_lm_factor`;
//! anything weaker stays `Inconclusive`.

use std::sync::Arc;

use crate::criterion::ProblemParams;
use crate::energy::{energy_report_with, EnergyReport};
use crate::error::{Error, Result};
use crate::potential::{mollified_density, pairing, solve_poisson_radial, PotentialField};
use crate::radial::{lp_norm, DensityField, RadialGrid, Spacing};

/// Relative tolerance for the per-step free-energy monotonicity guard.
pub const ENERGY_STEP_TOL: f64 = 1e-10;

/// Consecutive collapsed steps required before blow-up may be declared.
pub const COLLAPSE_PERSISTENCE: u64 = 100;

/// Grid geometry as configuration data (echoed into config files).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub r_max: f64,
    pub cells: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn build(&self, n: u32) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(
            n,
            self.r_max,
            self.cells,
            self.spacing,
        )?))
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ProblemParams,
    /// Regularization level; 0 selects the exact Newtonian coupling.
    pub epsilon: f64,
    pub grid: GridSpec,
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    /// Safety factor in (0, 1] on the stability bound.
    pub cfl: f64,
    /// Diagnostics are recorded every this many accepted steps.
    pub output_every: u64,
    /// Disable the chemotactic drift for porous-medium control runs.
    pub attraction_enabled: bool,
    /// L^m growth factor that, together with dt collapse, declares blow-up.
    pub blowup_lm_factor: f64,
    /// Run abort threshold on (outermost cell mass) / (initial mass).
    pub tail_mass_tol: f64,
    /// Hard cap on accepted steps; exceeding it ends the run as inconclusive.
    pub max_steps: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::domain("t_end must be positive"));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init) {
            return Err(Error::domain("need 0 < dt_min < dt_init"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::domain("cfl must lie in (0, 1]"));
        }
        if self.output_every == 0 {
            return Err(Error::domain("output_every must be >= 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::domain("epsilon must be >= 0"));
        }
        if !(self.blowup_lm_factor > 1.0) {
            return Err(Error::domain("blowup_lm_factor must exceed 1"));
        }
        if !(self.tail_mass_tol > 0.0) {
            return Err(Error::domain("tail_mass_tol must be positive"));
        }
        Ok(())
    }
}

/// Instantaneous simulation state; the potential is kept consistent with
/// the density and the free energy is cached for the dissipation guard.
#[derive(Debug, Clone)]
pub struct RunState {
    pub t: f64,
    pub dt: f64,
    pub rho: DensityField,
    pub c: PotentialField,
    pub step_count: u64,
    pub free_energy: f64,
}

/// Potential driving the drift. For eps > 0 the smoothed coupling is solved
/// as the exact Newtonian potential of the mollified density (they are the
/// same continuum object); the discrete velocity divergence then equals
/// -(J_eps * rho) <= 0 cell by cell, which the positivity of the upwind
/// update relies on.
fn drift_potential(rho: &DensityField, epsilon: f64) -> Result<PotentialField> {
    if epsilon == 0.0 {
        solve_poisson_radial(rho)
    } else {
        solve_poisson_radial(&mollified_density(rho, epsilon)?)
    }
}

impl RunState {
    pub fn init(initial: DensityField, config: &RunConfig) -> Result<Self> {
        if initial.grid().n() != config.params.n() {
            return Err(Error::domain("initial data dimension differs from params"));
        }
        let c = drift_potential(&initial, config.epsilon)?;
        let free_energy = free_energy_with(&initial, &c, config)?;
        Ok(Self {
            t: 0.0,
            dt: config.dt_init,
            rho: initial,
            c,
            step_count: 0,
            free_energy,
        })
    }
}

/// What happened while producing one accepted step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    pub rejections: u32,
    /// The stability bound (or a rejection) pushed dt to/below dt_min.
    pub dt_collapsed: bool,
    /// Relative free-energy increase of the accepted step (0 when it fell).
    pub energy_increase_rel: f64,
}

/// Outcome classification of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    GlobalLooking,
    BlowUpDetected,
    Inconclusive,
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VerdictKind::GlobalLooking => "GlobalLooking",
            VerdictKind::BlowUpDetected => "BlowUpDetected",
            VerdictKind::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlowUpVerdict {
    pub kind: VerdictKind,
    pub t_detect: Option<f64>,
    /// Final L^m norm over its initial value.
    pub lm_growth: f64,
    /// (initial, final, mean slope) of the second moment.
    pub m2_summary: (f64, f64, f64),
}

/// One diagnostics row, recorded every `output_every` accepted steps.
#[derive(Debug, Clone, Copy)]
pub struct SeriesRow {
    pub t: f64,
    pub dt: f64,
    pub energy: EnergyReport,
    pub entropy_production: f64,
    /// Centered difference of m2 over neighboring outputs (one-sided at the
    /// ends); measured counterpart of `energy.dm2dt_formula`.
    pub dm2dt_measured: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub verdict: BlowUpVerdict,
    pub series: Vec<SeriesRow>,
    pub config: RunConfig,
    /// Free energy never rose beyond the per-step tolerance.
    pub energy_monotone: bool,
    pub max_energy_increase_rel: f64,
    pub total_steps: u64,
    pub total_rejections: u64,
    pub mass_drift_rel: f64,
}

/// Free energy evaluated against an already-solved potential, so the guard
/// and the flux assembly share one solve per candidate state.
fn free_energy_with(rho: &DensityField, c: &PotentialField, config: &RunConfig) -> Result<f64> {
    let m = config.params.m();
    let eps = config.epsilon;
    let em = eps.powf(m);
    let internal: f64 = rho
        .values()
        .iter()
        .zip(rho.grid().volumes())
        .map(|(v, vol)| {
            let t = if eps == 0.0 {
                v.powf(m)
            } else {
                (v + eps).powf(m) - em
            };
            t * vol
        })
        .sum::<f64>()
        / (m - 1.0);
    Ok(internal - 0.5 * pairing(rho, c)?)
}

/// Cell rates d rho_i / dt from the conservative face fluxes.
fn flux_divergence(rho: &DensityField, c: &PotentialField, config: &RunConfig) -> Vec<f64> {
    let grid = rho.grid();
    let cells = grid.cells();
    let m = config.params.m();
    let eps = config.epsilon;
    let centers = grid.centers();
    let values = rho.values();

    // per-cell diffusion coefficients m (rho+eps)^(m-1)
    let dcoef: Vec<f64> = values.iter().map(|v| m * (v + eps).powf(m - 1.0)).collect();

    // interior face fluxes; both boundary fluxes stay zero
    let mut flux = vec![0.0; cells + 1];
    for j in 1..cells {
        let dl = centers[j] - centers[j - 1];
        let grad = (values[j] - values[j - 1]) / dl;
        let mut f = -0.5 * (dcoef[j - 1] + dcoef[j]) * grad;
        if config.attraction_enabled {
            let v = c.c_prime_faces()[j];
            let upwind = if v > 0.0 { values[j - 1] } else { values[j] };
            // The advected density is rho + eps wherever rho >= eps. Capping
            // the eps share by the upwind content keeps outflow proportional
            // to what a cell holds: on the truncated no-flux domain the raw
            // eps background would drain near-vacuum boundary cells negative
            // at a rate no step size can compensate.
            f += (upwind + eps.min(upwind)) * v;
        }
        flux[j] = f;
    }

    let areas = grid.face_areas();
    (0..cells)
        .map(|i| -(areas[i + 1] * flux[i + 1] - areas[i] * flux[i]) / grid.volumes()[i])
        .collect()
}

fn adapt_dt_unclamped(state: &RunState, config: &RunConfig) -> f64 {
    let grid = state.rho.grid();
    let m = config.params.m();
    let eps = config.epsilon;
    let centers = grid.centers();
    let values = state.rho.values();
    let mut bound = f64::INFINITY;
    for j in 1..grid.cells() {
        let dl = centers[j] - centers[j - 1];
        let dmax = m * (values[j - 1].max(values[j]) + eps).powf(m - 1.0);
        if dmax > 0.0 {
            bound = bound.min(dl * dl / (2.0 * dmax));
        }
        if config.attraction_enabled {
            let v = state.c.c_prime_faces()[j].abs();
            if v > 0.0 {
                bound = bound.min(dl / v);
            }
        }
    }
    config.cfl * bound
}

/// Stability-limited step size: cfl times the face minimum of the diffusive
/// bound dr^2 / (2 m (rho+eps)^(m-1)) and the drift bound dr / |c'|,
/// clamped into [dt_min, dt_init].
pub fn adapt_dt(state: &RunState, config: &RunConfig) -> f64 {
    adapt_dt_unclamped(state, config).clamp(config.dt_min, config.dt_init)
}

/// Entropy production integral
/// int (rho+eps) |grad((m/(m-1))(rho+eps)^(m-1) - c)|^2, evaluated at faces;
/// nonnegative by construction and approximately -dF/dt along the run.
pub fn entropy_production(state: &RunState, config: &RunConfig) -> f64 {
    let grid = state.rho.grid();
    let m = config.params.m();
    let eps = config.epsilon;
    let centers = grid.centers();
    let values = state.rho.values();
    let potentials: Vec<f64> = values
        .iter()
        .zip(state.c.c_values())
        .map(|(v, c)| {
            let p = m / (m - 1.0) * (v + eps).powf(m - 1.0);
            if config.attraction_enabled {
                p - c
            } else {
                p
            }
        })
        .collect();
    let mut acc = 0.0;
    for j in 1..grid.cells() {
        let dl = centers[j] - centers[j - 1];
        let g = (potentials[j] - potentials[j - 1]) / dl;
        let density = 0.5 * (values[j - 1] + values[j]) + eps;
        acc += density * g * g * grid.face_areas()[j] * dl;
    }
    acc
}

/// Advances one accepted step starting from the stability-limited dt.
///
/// Negative candidate cells halve dt indefinitely (dipping below dt_min is
/// recorded as a collapse symptom); an energy-increasing candidate halves dt
/// only down to dt_min, after which the increase is accepted and reported.
pub fn step(state: &RunState, config: &RunConfig) -> Result<(RunState, StepInfo)> {
    let unclamped = adapt_dt_unclamped(state, config);
    let mut dt = unclamped.clamp(config.dt_min, config.dt_init);
    let mut info = StepInfo {
        dt_collapsed: unclamped <= config.dt_min,
        ..StepInfo::default()
    };
    let rate = flux_divergence(&state.rho, &state.c, config);
    let grid = state.rho.grid();

    loop {
        if info.rejections > 80 {
            return Err(Error::Run(format!(
                "step rejected {} times at t = {}; step size collapsed to zero",
                info.rejections, state.t
            )));
        }
        let candidate: Vec<f64> = state
            .rho
            .values()
            .iter()
            .zip(&rate)
            .map(|(v, r)| v + dt * r)
            .collect();
        if candidate.iter().any(|v| *v < 0.0) {
            dt *= 0.5;
            info.rejections += 1;
            if dt < config.dt_min {
                info.dt_collapsed = true;
            }
            continue;
        }
        let rho = DensityField::new(Arc::clone(grid), candidate)?;
        let c = drift_potential(&rho, config.epsilon)?;
        let free_energy = free_energy_with(&rho, &c, config)?;
        let allowed = state.free_energy + ENERGY_STEP_TOL * state.free_energy.abs();
        if free_energy > allowed && dt * 0.5 >= config.dt_min {
            dt *= 0.5;
            info.rejections += 1;
            continue;
        }
        if free_energy > allowed {
            info.energy_increase_rel = (free_energy - state.free_energy).abs()
                / state.free_energy.abs().max(f64::MIN_POSITIVE);
        }
        return Ok((
            RunState {
                t: state.t + dt,
                dt,
                rho,
                c,
                step_count: state.step_count + 1,
                free_energy,
            },
            info,
        ));
    }
}

/// Integrates to `t_end` or until blow-up is detected, recording the
/// diagnostic series. Aborts with a truncation error if the outermost cell
/// ever holds more than `tail_mass_tol` of the initial mass, and with a
/// conservation error if the mass drifts beyond 1e-6 relative.
pub fn run(config: &RunConfig, initial: DensityField) -> Result<RunReport> {
    config.validate()?;
    let mass0 = initial.mass();
    if !(mass0 > 0.0) {
        return Err(Error::domain("initial data must carry positive mass"));
    }
    if initial.tail_mass() > config.tail_mass_tol * mass0 {
        return Err(Error::Run(format!(
            "initial tail mass fraction {:.3e} exceeds tolerance {:.3e}: domain too small",
            initial.tail_mass() / mass0,
            config.tail_mass_tol
        )));
    }
    let m = config.params.m();
    let mut state = RunState::init(initial, config)?;
    let lm0 = lp_norm(&state.rho, m)?;

    fn record(
        rows: &mut Vec<(f64, f64, EnergyReport, f64)>,
        state: &RunState,
        config: &RunConfig,
    ) -> Result<()> {
        // reuse the run's own potential so the reported free energy is the
        // value the dissipation guard monitors
        let energy = energy_report_with(
            &state.rho,
            config.params.m(),
            config.epsilon,
            config.attraction_enabled,
            &state.c,
        )?;
        rows.push((state.t, state.dt, energy, entropy_production(state, config)));
        Ok(())
    }
    let mut rows: Vec<(f64, f64, EnergyReport, f64)> = Vec::new();
    record(&mut rows, &state, config)?;

    let mut collapsed_streak = 0u64;
    let mut total_rejections = 0u64;
    let mut max_energy_increase_rel = 0.0f64;
    let mut t_detect = None;

    while state.t < config.t_end && state.step_count < config.max_steps {
        let (next, info) = step(&state, config)?;
        state = next;
        total_rejections += info.rejections as u64;
        max_energy_increase_rel = max_energy_increase_rel.max(info.energy_increase_rel);
        collapsed_streak = if info.dt_collapsed {
            collapsed_streak + 1
        } else {
            0
        };

        if state.step_count % config.output_every == 0 {
            record(&mut rows, &state, config)?;
            let mass = state.rho.mass();
            if (mass - mass0).abs() > 1e-6 * mass0 {
                return Err(Error::Run(format!(
                    "mass drifted by {:.3e} relative at t = {}",
                    (mass - mass0).abs() / mass0,
                    state.t
                )));
            }
            if state.rho.tail_mass() > config.tail_mass_tol * mass0 {
                return Err(Error::Run(format!(
                    "tail mass fraction {:.3e} exceeds tolerance {:.3e} at t = {}: domain too small",
                    state.rho.tail_mass() / mass0,
                    config.tail_mass_tol,
                    state.t
                )));
            }
        }

        if collapsed_streak >= COLLAPSE_PERSISTENCE {
            let growth = lp_norm(&state.rho, m)? / lm0;
            if growth >= config.blowup_lm_factor {
                t_detect = Some(state.t);
                break;
            }
        }
    }

    if rows.last().map(|r| r.0) != Some(state.t) {
        record(&mut rows, &state, config)?;
    }

    let lm_growth = lp_norm(&state.rho, m)? / lm0;
    let kind = if t_detect.is_some() {
        VerdictKind::BlowUpDetected
    } else if state.t >= config.t_end
        && collapsed_streak < COLLAPSE_PERSISTENCE
        && lm_growth < config.blowup_lm_factor
    {
        VerdictKind::GlobalLooking
    } else {
        VerdictKind::Inconclusive
    };

    // centered differences of m2 over the recorded outputs
    let mut series = Vec::with_capacity(rows.len());
    for (k, &(t, dt, energy, ep)) in rows.iter().enumerate() {
        let (lo, hi) = match (k.checked_sub(1), k + 1 < rows.len()) {
            (Some(prev), true) => (prev, k + 1),
            (None, true) => (k, k + 1),
            (Some(prev), false) => (prev, k),
            (None, false) => (k, k),
        };
        let dm2dt_measured = if hi > lo {
            (rows[hi].2.m2 - rows[lo].2.m2) / (rows[hi].0 - rows[lo].0)
        } else {
            0.0
        };
        series.push(SeriesRow {
            t,
            dt,
            energy,
            entropy_production: ep,
            dm2dt_measured,
        });
    }

    let m2_initial = series.first().map(|r| r.energy.m2).unwrap_or(0.0);
    let m2_final = series.last().map(|r| r.energy.m2).unwrap_or(0.0);
    let elapsed = state.t.max(f64::MIN_POSITIVE);
    let verdict = BlowUpVerdict {
        kind,
        t_detect,
        lm_growth,
        m2_summary: (m2_initial, m2_final, (m2_final - m2_initial) / elapsed),
    };
    let mass_drift_rel = (state.rho.mass() - mass0).abs() / mass0;
    Ok(RunReport {
        verdict,
        series,
        config: config.clone(),
        energy_monotone: max_energy_increase_rel == 0.0,
        max_energy_increase_rel,
        total_steps: state.step_count,
        total_rejections,
        mass_drift_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::project_profile;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn base_config(grid: GridSpec) -> RunConfig {
        RunConfig {
            params: ProblemParams::new(3, 1.25, 1.0).unwrap(),
            epsilon: 0.0,
            grid,
            t_end: 1e-3,
            dt_init: 1e-3,
            dt_min: 1e-12,
            cfl: 0.4,
            output_every: 10,
            attraction_enabled: true,
            blowup_lm_factor: 10.0,
            tail_mass_tol: 1e-8,
            max_steps: 200_000,
        }
    }

    fn gaussian(g: &Arc<RadialGrid>, amp: f64, width: f64) -> DensityField {
        project_profile(g, move |r| amp * (-(r / width).powi(2)).exp()).unwrap()
    }

    #[test]
    fn zero_density_stays_zero_and_uses_dt_init() {
        let spec = GridSpec {
            r_max: 4.0,
            cells: 32,
            spacing: Spacing::Uniform,
        };
        let config = base_config(spec);
        let g = spec.build(3).unwrap();
        let state = RunState::init(DensityField::zero(g), &config).unwrap();
        assert_eq!(adapt_dt(&state, &config), config.dt_init);
        let (next, info) = step(&state, &config).unwrap();
        assert!(next.rho.values().iter().all(|v| *v == 0.0));
        assert_eq!(info.rejections, 0);
        assert_eq!(entropy_production(&state, &config), 0.0);
    }

    #[test]
    fn single_step_conserves_mass_to_roundoff() {
        let spec = GridSpec {
            r_max: 6.0,
            cells: 128,
            spacing: Spacing::Uniform,
        };
        let config = base_config(spec);
        let g = spec.build(3).unwrap();
        let rho = gaussian(&g, 0.5, 1.5);
        let mass0 = rho.mass();
        let state = RunState::init(rho, &config).unwrap();
        let (next, _) = step(&state, &config).unwrap();
        assert!(rel(next.rho.mass(), mass0) < 1e-14);
        assert!(next.rho.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn porous_medium_internal_energy_decreases() {
        let spec = GridSpec {
            r_max: 6.0,
            cells: 128,
            spacing: Spacing::Uniform,
        };
        let mut config = base_config(spec);
        config.attraction_enabled = false;
        let g = spec.build(3).unwrap();
        let rho = gaussian(&g, 1.0, 1.0);
        let m = config.params.m();
        let int_m = |f: &DensityField| -> f64 {
            f.values()
                .iter()
                .zip(f.grid().volumes())
                .map(|(v, vol)| v.powf(m) * vol)
                .sum()
        };
        let before = int_m(&rho);
        let state = RunState::init(rho, &config).unwrap();
        let (next, _) = step(&state, &config).unwrap();
        assert!(int_m(&next.rho) < before);
    }

    #[test]
    fn diffusive_dt_bound_scales_with_amplitude() {
        // doubling the density shrinks the diffusive bound by 2^(m-1)
        let spec = GridSpec {
            r_max: 6.0,
            cells: 128,
            spacing: Spacing::Uniform,
        };
        let mut config = base_config(spec);
        config.attraction_enabled = false;
        config.dt_init = 1e3; // keep the clamp out of the way
        let g = spec.build(3).unwrap();
        let rho = gaussian(&g, 1.0, 1.5);
        let twice = DensityField::new(
            Arc::clone(&g),
            rho.values().iter().map(|v| 2.0 * v).collect(),
        )
        .unwrap();
        let s1 = RunState::init(rho, &config).unwrap();
        let s2 = RunState::init(twice, &config).unwrap();
        let ratio = adapt_dt(&s2, &config) / adapt_dt(&s1, &config);
        let m = config.params.m();
        assert!(rel(ratio, 2.0_f64.powf(1.0 - m)) < 1e-12, "ratio {ratio}");
    }

    #[test]
    fn concentrating_state_tightens_dt() {
        let spec = GridSpec {
            r_max: 4.0,
            cells: 64,
            spacing: Spacing::Uniform,
        };
        let config = base_config(spec);
        let g = spec.build(3).unwrap();
        let wide = RunState::init(gaussian(&g, 1.0, 1.5), &config).unwrap();
        let narrow = RunState::init(gaussian(&g, 50.0, 0.3), &config).unwrap();
        assert!(adapt_dt(&narrow, &config) < adapt_dt(&wide, &config));
    }

    #[test]
    fn entropy_production_nonnegative_and_matches_energy_slope() {
        let spec = GridSpec {
            r_max: 8.0,
            cells: 256,
            spacing: Spacing::Uniform,
        };
        let config = base_config(spec);
        let g = spec.build(3).unwrap();
        let rho = gaussian(&g, 0.8, 1.2);
        let mut state = RunState::init(rho, &config).unwrap();
        // settle a few steps away from the projected initial kink
        for _ in 0..20 {
            state = step(&state, &config).unwrap().0;
        }
        let ep = entropy_production(&state, &config);
        assert!(ep >= 0.0);
        let f_before = state.free_energy;
        let (next, _) = step(&state, &config).unwrap();
        let slope = -(next.free_energy - f_before) / next.dt;
        assert!(
            rel(ep, slope) < 0.05,
            "entropy production {ep} vs -dF/dt {slope}"
        );
    }

    #[test]
    fn short_run_produces_monotone_energy_series() {
        let spec = GridSpec {
            r_max: 8.0,
            cells: 128,
            spacing: Spacing::Uniform,
        };
        let mut config = base_config(spec);
        config.t_end = 2e-3;
        let g = spec.build(3).unwrap();
        let report = run(&config, gaussian(&g, 0.5, 1.5)).unwrap();
        assert!(report.energy_monotone);
        assert!(report.mass_drift_rel < 1e-6);
        assert_eq!(report.verdict.kind, VerdictKind::GlobalLooking);
        for w in report.series.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].energy.free_energy <= w[0].energy.free_energy * (1.0 + 1e-10));
        }
    }

    #[test]
    fn regularized_run_dissipates_too() {
        let spec = GridSpec {
            r_max: 6.0,
            cells: 48,
            spacing: Spacing::Uniform,
        };
        let mut config = base_config(spec);
        config.epsilon = 1e-3;
        config.t_end = 2e-2;
        config.dt_init = 5e-4;
        let g = spec.build(3).unwrap();
        let report = run(&config, gaussian(&g, 0.8, 1.2)).unwrap();
        assert!(report.total_steps >= 40);
        assert!(report.energy_monotone);
        assert_eq!(report.verdict.kind, VerdictKind::GlobalLooking);
        for w in report.series.windows(2) {
            assert!(w[1].energy.free_energy <= w[0].energy.free_energy * (1.0 + 1e-9));
        }
    }

    #[test]
    fn truncation_abort_when_mass_reaches_boundary() {
        // a wide profile on a deliberately small domain: spreading mass hits
        // the outer cell and the run must abort with a truncation error
        let spec = GridSpec {
            r_max: 1.5,
            cells: 32,
            spacing: Spacing::Uniform,
        };
        let mut config = base_config(spec);
        config.attraction_enabled = false;
        config.t_end = 0.5;
        config.tail_mass_tol = 1e-10;
        let g = spec.build(3).unwrap();
        let rho = project_profile(&g, |r| (-(r / 0.45).powi(2)).exp()).unwrap();
        match run(&config, rho) {
            Err(Error::Run(msg)) => assert!(msg.contains("domain too small"), "{msg}"),
            other => panic!("expected truncation abort, got {other:?}"),
        }
    }

    #[test]
    fn initial_tail_violation_rejected_upfront() {
        let spec = GridSpec {
            r_max: 2.0,
            cells: 32,
            spacing: Spacing::Uniform,
        };
        let config = base_config(spec);
        let g = spec.build(3).unwrap();
        let rho = project_profile(&g, |_| 1.0).unwrap();
        assert!(run(&config, rho).is_err());
    }

    #[test]
    fn detector_needs_both_symptoms() {
        // a collapsing state whose norm growth requirement is unreachable
        // must end inconclusive, never a false blow-up call
        let spec = GridSpec {
            r_max: 4.0,
            cells: 96,
            spacing: Spacing::Geometric { ratio: 1.03 },
        };
        let mut config = base_config(spec);
        config.t_end = 2e-3;
        config.dt_min = 1e-7;
        config.blowup_lm_factor = 1e12;
        config.max_steps = 30_000;
        let g = spec.build(3).unwrap();
        // concentrated enough that the step size collapses quickly
        let rho = project_profile(&g, |r| {
            if r < 0.45 {
                let u: f64 = r / 0.45;
                2300.0 * (1.0 - u * u) * (1.0 - u * u)
            } else {
                0.0
            }
        })
        .unwrap();
        let report = run(&config, rho).unwrap();
        assert_eq!(report.verdict.kind, VerdictKind::Inconclusive);
        assert!(report.verdict.lm_growth < config.blowup_lm_factor);
    }
}
