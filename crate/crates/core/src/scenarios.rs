//! Constructed initial data with known classification.
//!
//! The centerpiece is the small-mass indicator ball: amplitude
//! eps0 K^n / alpha(n) on [0, 1/K], zero outside. Two explicit inequalities
//! in K decide when it falls in the blow-up regime:
//!
//! * the norm condition compares
//!   eps0^(1 + (m(n+2)-2n)/(2(2n-2-mn))) K^((n-2)/2) against
//!   alpha^((n-2)/(2n)) (2 n^2 alpha / C)^((n-2)/(2(2n-2-mn))) and is
//!   solvable for K in closed form (threshold K1);
//!
//! * the energy condition, which compares K^(n(m-1)) against
//!   c1 K^(n-2) + c2 and is solved by bisection for its largest root
//!   (threshold K2), since n(m-1) < n-2 makes it hold for all large K.
//!
//! Any K above K0 = max(K1, K2) blows up. The library also carries smooth
//! bump scenarios spanning all three regimes, including a heavy wide profile
//! that exists globally despite much more mass than a blowing-up spike,
//! plus a probe constructed to sit on the norm threshold itself.

use std::sync::Arc;

use crate::criterion::{
    classify_initial_data, compute_constants, hls_constant, unit_ball_volume, Classification,
    ProblemParams, Regime,
};
use crate::dynamics::GridSpec;
use crate::energy::free_energy;
use crate::error::{Error, Result};
use crate::radial::{lcrit_norm, project_profile, DensityField, RadialGrid, Spacing};

/// The indicator-ball construction with its decision thresholds.
#[derive(Debug, Clone, Copy)]
pub struct Example1Params {
    pub params: ProblemParams,
    /// Total mass of the ball (arbitrarily small in the construction).
    pub eps0: f64,
    /// Chosen inverse radius; defaults to 2 K0.
    pub k: f64,
    /// Infimum K for the norm condition (closed form).
    pub k1: f64,
    /// Infimum K above which the energy condition holds for all larger K
    /// (bisection; 0 when it holds for every K).
    pub k2: f64,
    /// max(K1, K2): every K above it satisfies both conditions.
    pub k0: f64,
}

/// Direct substitution of the norm condition at a given K.
pub fn relation_norm_holds(params: &ProblemParams, eps0: f64, k: f64) -> Result<bool> {
    let n = params.n() as f64;
    let m = params.m();
    let alpha = unit_ball_volume(params.n())?;
    let c = hls_constant(params.n())?;
    let gap = 2.0 * n - 2.0 - m * n;
    let e = 1.0 + (m * (n + 2.0) - 2.0 * n) / (2.0 * gap);
    let lhs = eps0.powf(e) * k.powf((n - 2.0) / 2.0);
    let rhs =
        alpha.powf((n - 2.0) / (2.0 * n)) * (2.0 * n * n * alpha / c).powf((n - 2.0) / (2.0 * gap));
    Ok(lhs > rhs)
}

/// Coefficients of the energy condition: holds iff
/// c3 K^(n(m-1)) < c1 K^(n-2) + c2.
fn energy_relation_coeffs(params: &ProblemParams, eps0: f64) -> Result<(f64, f64, f64)> {
    let n = params.n() as f64;
    let m = params.m();
    let alpha = unit_ball_volume(params.n())?;
    let c = hls_constant(params.n())?;
    let gap = 2.0 * n - 2.0 - m * n;
    let x = (m * (n + 2.0) - 2.0 * n) / gap;
    let c1 = (m - 1.0) * 2.0_f64.powf(2.0 - n) / (2.0 * (n - 2.0) * n * alpha) * eps0.powf(2.0 + x);
    let c2 =
        (2.0 - 2.0 / n - m) / (1.0 - 2.0 / n) * (2.0 * n * n * alpha / c).powf(n * (m - 1.0) / gap);
    let c3 = eps0.powf(m + x) * alpha.powf(1.0 - m);
    Ok((c1, c2, c3))
}

/// Direct substitution of the energy condition at a given K.
pub fn relation_energy_holds(params: &ProblemParams, eps0: f64, k: f64) -> Result<bool> {
    let n = params.n() as f64;
    let m = params.m();
    let (c1, c2, c3) = energy_relation_coeffs(params, eps0)?;
    Ok(c3 * k.powf(n * (m - 1.0)) < c1 * k.powf(n - 2.0) + c2)
}

/// Closed-form upper bound on the free energy of the indicator ball,
/// obtained by bounding |x - y| <= 2/K inside the interaction integral:
/// eps0^m K^(n(m-1)) alpha^(1-m) / (m-1)
///   - 2^(2-n) eps0^2 K^(n-2) / (2 (n-2) n alpha).
pub fn example1_energy_upper_bound(params: &ProblemParams, eps0: f64, k: f64) -> Result<f64> {
    let n = params.n() as f64;
    let m = params.m();
    let alpha = unit_ball_volume(params.n())?;
    Ok(
        eps0.powf(m) * k.powf(n * (m - 1.0)) * alpha.powf(1.0 - m) / (m - 1.0)
            - 2.0_f64.powf(2.0 - n) / (2.0 * (n - 2.0) * n * alpha) * eps0 * eps0 * k.powf(n - 2.0),
    )
}

/// Computes K1 (closed form), K2 (bisection to 1e-10 relative bracket
/// width) and K0 = max(K1, K2), with K preset to 2 K0.
pub fn example1_thresholds(params: &ProblemParams, eps0: f64) -> Result<Example1Params> {
    if !(eps0 > 0.0) || !eps0.is_finite() {
        return Err(Error::domain(format!("eps0 must be positive, got {eps0}")));
    }
    let n = params.n() as f64;
    let m = params.m();
    let alpha = unit_ball_volume(params.n())?;
    let c = hls_constant(params.n())?;
    let gap = 2.0 * n - 2.0 - m * n;

    // norm condition: monotone increasing in K, so invert directly
    let e = 1.0 + (m * (n + 2.0) - 2.0 * n) / (2.0 * gap);
    let rhs =
        alpha.powf((n - 2.0) / (2.0 * n)) * (2.0 * n * n * alpha / c).powf((n - 2.0) / (2.0 * gap));
    let k1 = (rhs / eps0.powf(e)).powf(2.0 / (n - 2.0));
    if !k1.is_finite() {
        return Err(Error::domain("norm-condition threshold overflowed"));
    }

    // energy condition: g(K) = c1 K^(n-2) + c2 - c3 K^(n(m-1)) is positive
    // at 0 and at infinity; if its minimum dips below zero the condition
    // fails on a middle K-interval and K2 is the upper root.
    let (c1, c2, c3) = energy_relation_coeffs(params, eps0)?;
    let g = |k: f64| c1 * k.powf(n - 2.0) + c2 - c3 * k.powf(n * (m - 1.0));
    let k_min = (n * (m - 1.0) * c3 / ((n - 2.0) * c1)).powf(1.0 / gap);
    let k2 = if !k_min.is_finite() {
        return Err(Error::domain(
            "energy-condition stationary point overflowed",
        ));
    } else if g(k_min) >= 0.0 {
        0.0
    } else {
        let mut hi = k_min * 2.0;
        while g(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::domain("energy condition never recovers: no root"));
            }
        }
        // bisection in log space down to 1e-10 relative width
        let (mut llo, mut lhi) = (k_min.ln(), hi.ln());
        while lhi - llo > 1e-10 {
            let mid = 0.5 * (llo + lhi);
            if g(mid.exp()) < 0.0 {
                llo = mid;
            } else {
                lhi = mid;
            }
        }
        (0.5 * (llo + lhi)).exp()
    };

    let k0 = k1.max(k2);
    Ok(Example1Params {
        params: *params,
        eps0,
        k: 2.0 * k0,
        k1,
        k2,
        k0,
    })
}

impl Example1Params {
    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }
}

/// Uniform grid on [0, 2/K] whose middle edge sits exactly at 1/K.
pub fn example1_grid(n: u32, k: f64, cells: usize) -> Result<Arc<RadialGrid>> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::domain(format!("K must be positive, got {k}")));
    }
    let cells = cells.max(8);
    let cells = cells + cells % 2; // even count puts an edge on 1/K
    Ok(Arc::new(RadialGrid::new(
        n,
        2.0 / k,
        cells,
        Spacing::Uniform,
    )?))
}

/// The indicator ball itself: amplitude eps0 K^n / alpha(n) on [0, 1/K].
/// Requires a grid with an edge exactly at 1/K so that the mass and norms
/// come out exact.
pub fn example1_density(grid: &Arc<RadialGrid>, e: &Example1Params) -> Result<DensityField> {
    let radius = 1.0 / e.k;
    let edge = grid.aligned_edge(radius).ok_or_else(|| {
        Error::domain(format!(
            "grid has no edge at the ball radius {radius}; build it with example1_grid"
        ))
    })?;
    let n = grid.n();
    let amp = e.eps0 * e.k.powi(n as i32) / grid.alpha_n();
    let mut values = vec![0.0; grid.cells()];
    for v in values.iter_mut().take(edge) {
        *v = amp;
    }
    DensityField::new(Arc::clone(grid), values)
}

/// Runs the full classification pipeline on a field: the field's own mass
/// becomes M0, the critical norm and initial free energy are measured by
/// quadrature, and the strict-inequality classifier decides the regime.
pub fn classify_field(rho: &DensityField, m: f64) -> Result<Classification> {
    let mass = rho.mass();
    if !(mass > 0.0) {
        return Err(Error::domain("cannot classify a zero-mass field"));
    }
    let params = ProblemParams::new(rho.grid().n(), m, mass)?;
    let f0 = free_energy(rho, m, 0.0)?;
    classify_initial_data(&params, lcrit_norm(rho), f0)
}

/// A named initial-data builder with its expected classification.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioEntry {
    pub name: &'static str,
    pub expected: Regime,
    pub summary: &'static str,
}

/// Stable CLI-addressable scenario names.
pub fn scenario_library() -> Vec<ScenarioEntry> {
    vec![
        ScenarioEntry {
            name: "wide-subcritical",
            expected: Regime::GlobalExistence,
            summary: "unit-mass wide bump, both margins large",
        },
        ScenarioEntry {
            name: "heavy-subcritical",
            expected: Regime::GlobalExistence,
            summary: "mass far above the blow-up examples yet globally existing",
        },
        ScenarioEntry {
            name: "moderate-supercritical",
            expected: Regime::BlowUp,
            summary: "resolvable concentrated bump in the blow-up regime",
        },
        ScenarioEntry {
            name: "near-threshold",
            expected: Regime::OutsideTheoremScope,
            summary: "norm pinned onto the threshold, energy above f(s*)",
        },
        ScenarioEntry {
            name: "example1",
            expected: Regime::BlowUp,
            summary: "small-mass indicator ball with K = k_mult K0",
        },
    ]
}

/// Knobs for scenario construction.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioOptions {
    /// Cell count override (each scenario has its own default).
    pub cells: Option<usize>,
    /// Full grid override; must stay compatible with the scenario shape.
    pub grid: Option<GridSpec>,
    /// Ball mass for `example1`.
    pub eps0: f64,
    /// K = k_mult * K0 for `example1`.
    pub k_mult: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            cells: None,
            grid: None,
            eps0: 1.0,
            k_mult: 2.0,
        }
    }
}

/// A constructed scenario ready for classification or simulation.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub name: String,
    pub rho: DensityField,
    /// (n, m) with M0 equal to the constructed field's mass.
    pub params: ProblemParams,
    pub expected: Regime,
    /// Geometry actually used, for configuration echoes.
    pub grid: GridSpec,
}

fn gaussian_profile(mass: f64, width: f64, n: u32) -> impl Fn(f64) -> f64 {
    let nf = n as f64;
    let amp = mass / (std::f64::consts::PI.powf(nf / 2.0) * width.powf(nf));
    move |r: f64| amp * (-(r / width) * (r / width)).exp()
}

fn scenario_grid(
    n: u32,
    default: GridSpec,
    opts: &ScenarioOptions,
) -> Result<(Arc<RadialGrid>, GridSpec)> {
    let mut spec = opts.grid.unwrap_or(default);
    if opts.grid.is_none() {
        if let Some(cells) = opts.cells {
            spec.cells = cells;
        }
    }
    Ok((spec.build(n)?, spec))
}

/// Builds a library scenario for the given (n, m).
///
/// The default shapes are tuned for n = 3; the classification pipeline is
/// what certifies the regime, so tests compare against `expected` rather
/// than trusting the construction.
pub fn build_scenario(name: &str, n: u32, m: f64, opts: &ScenarioOptions) -> Result<BuiltScenario> {
    let entry = scenario_library()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| {
            Error::domain(format!(
                "unknown scenario `{name}`; known: {}",
                scenario_library()
                    .iter()
                    .map(|e| e.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
    let probe = ProblemParams::new(n, m, 1.0)?;

    let (rho, expected, grid) = match name {
        "wide-subcritical" => {
            let default = GridSpec {
                r_max: 12.0,
                cells: 512,
                spacing: Spacing::Uniform,
            };
            let (grid, spec) = scenario_grid(n, default, opts)?;
            let rho = project_profile(&grid, gaussian_profile(1.0, 2.0, n))?;
            (rho, entry.expected, spec)
        }
        "heavy-subcritical" => {
            let default = GridSpec {
                r_max: 60.0,
                cells: 1024,
                spacing: Spacing::Uniform,
            };
            let (grid, spec) = scenario_grid(n, default, opts)?;
            let rho = project_profile(&grid, gaussian_profile(150.0, 10.0, n))?;
            (rho, entry.expected, spec)
        }
        "moderate-supercritical" => {
            // the geometric grid concentrates cells at the origin where the
            // collapse ends up; the ratio trades innermost resolution
            // against the step-size floor of the post-detection regime
            let default = GridSpec {
                r_max: 4.0,
                cells: 256,
                spacing: Spacing::Geometric { ratio: 1.02 },
            };
            let (grid, spec) = scenario_grid(n, default, opts)?;
            // compactly supported quartic bump of mass 200 and radius 0.45
            let a = 0.45f64;
            let mass = 200.0;
            let nf = n as f64;
            // integral of (1 - u^2)^2 u^(n-1) du over [0, 1]
            let shape = 1.0 / nf - 2.0 / (nf + 2.0) + 1.0 / (nf + 4.0);
            let amp = mass / (nf * unit_ball_volume(n)? * a.powf(nf) * shape);
            let rho = project_profile(&grid, move |r| {
                if r < a {
                    let u = r / a;
                    amp * (1.0 - u * u) * (1.0 - u * u)
                } else {
                    0.0
                }
            })?;
            (rho, entry.expected, spec)
        }
        "near-threshold" => {
            let default = GridSpec {
                r_max: 3.0,
                cells: 1024,
                spacing: Spacing::Uniform,
            };
            let (grid, spec) = scenario_grid(n, default, opts)?;
            // Solve for the amplitude putting the critical norm exactly on
            // the threshold. Norm and mass are both linear in the
            // amplitude, the threshold scales like mass^em, so the fixed
            // point is closed-form.
            let width = 0.2;
            let unit = project_profile(&grid, gaussian_profile(1.0, width, n))?;
            let unit_norm = lcrit_norm(&unit);
            let unit_mass = unit.mass();
            let nf = n as f64;
            let gap = 2.0 * nf - 2.0 - m * nf;
            let em = (2.0 * nf - m * (nf + 2.0)) / (nf - 2.0)
                * (nf * (m - 1.0) / gap)
                * ((nf - 2.0) / (2.0 * nf * (m - 1.0)));
            let thr_unit_mass =
                compute_constants(&ProblemParams::new(n, m, unit_mass)?)?.threshold_norm;
            // norm(A)/threshold(A) = (A unit_norm) / (thr_unit_mass A^em)
            let scale = (thr_unit_mass / unit_norm).powf(1.0 / (1.0 - em));
            let rho = DensityField::new(
                Arc::clone(&grid),
                unit.values().iter().map(|v| v * scale).collect(),
            )?;
            (rho, entry.expected, spec)
        }
        "example1" => {
            let e = example1_thresholds(&ProblemParams::new(n, m, opts.eps0)?, opts.eps0)?;
            let e = e.with_k(opts.k_mult * e.k0);
            let grid = match opts.grid {
                Some(spec) => spec.build(n)?,
                None => example1_grid(n, e.k, opts.cells.unwrap_or(64))?,
            };
            let rho = example1_density(&grid, &e)?;
            let spec = opts.grid.unwrap_or(GridSpec {
                r_max: grid.r_max(),
                cells: grid.cells(),
                spacing: Spacing::Uniform,
            });
            let expected = if opts.k_mult > 1.0 {
                Regime::BlowUp
            } else {
                entry.expected
            };
            (rho, expected, spec)
        }
        _ => unreachable!("filtered above"),
    };

    let params = probe.with_mass(rho.mass())?;
    Ok(BuiltScenario {
        name: name.to_string(),
        rho,
        params,
        expected,
        grid,
    })
}
