//! Closed-form threshold constants and the initial-data classifier.
//!
//! For dimension n >= 3 and diffusion exponent m strictly between
//! m_c = 2n/(n+2) and m* = 2 - 2/n, the concave comparison function
//!
//! ```text
//! f(s) = M0^((2n - m(n+2))/(n-2)) s / (m-1)
//!        - C(n) / (2 (n-2) n alpha(n)) * s^((n-2)/(n(m-1)))
//! ```
//!
//! has a unique maximum at s*, and the pair (f(s*), (s*)^((n-2)/(2n(m-1))))
//! splits initial data with free energy below f(s*) into a globally existing
//! regime and a finite-time blow-up regime by the size of the L^(2n/(n+2))
//! norm. Everything here is a pure function of (n, m, M0).

use crate::error::{Error, Result};
use crate::special::gamma;

/// The admissible parameter triple every constant depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    n: u32,
    m: f64,
    m0: f64,
}

impl ProblemParams {
    /// Validates n >= 3, m strictly inside (2n/(n+2), 2 - 2/n), M0 > 0.
    ///
    /// The endpoints are rejected rather than special-cased: every exponent
    /// in the threshold formulas divides by 2n - 2 - mn, which vanishes at
    /// m = m* and changes sign across the interval.
    pub fn new(n: u32, m: f64, m0: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain(format!("dimension n must be >= 3, got {n}")));
        }
        let (m_c, m_star) = critical_exponents(n)?;
        if !(m > m_c && m < m_star) {
            return Err(Error::domain(format!(
                "diffusion exponent m = {m} outside the open admissible interval ({m_c}, {m_star}) for n = {n}"
            )));
        }
        if !(m0 > 0.0) || !m0.is_finite() {
            return Err(Error::domain(format!(
                "total mass must be positive, got {m0}"
            )));
        }
        Ok(Self { n, m, m0 })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Total mass M0 = ||rho_0||_L1.
    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// Same (n, m) with a different total mass.
    pub fn with_mass(&self, m0: f64) -> Result<Self> {
        Self::new(self.n, self.m, m0)
    }
}

/// Volume of the unit ball in R^n: pi^(n/2) / Gamma(n/2 + 1).
pub fn unit_ball_volume(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("unit ball volume requires n >= 1"));
    }
    let nh = n as f64 / 2.0;
    Ok(std::f64::consts::PI.powf(nh) / gamma(nh + 1.0))
}

/// Sharp constant of the Hardy-Littlewood-Sobolev inequality for the
/// |x-y|^(2-n) kernel acting on L^(2n/(n+2)):
/// pi^((n-2)/2) * (1/Gamma(n/2+1)) * (Gamma(n/2)/Gamma(n))^(-2/n).
pub fn hls_constant(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::domain(
            "HLS constant requires n >= 3 (the |x-y|^(n-2) kernel degenerates below)",
        ));
    }
    let nf = n as f64;
    let ratio = gamma(nf / 2.0) / gamma(nf);
    Ok(std::f64::consts::PI.powf((nf - 2.0) / 2.0) / gamma(nf / 2.0 + 1.0) * ratio.powf(-2.0 / nf))
}

/// The two critical diffusion exponents (m_c, m*) = (2n/(n+2), 2 - 2/n).
pub fn critical_exponents(n: u32) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::domain("critical exponents require n >= 3"));
    }
    let nf = n as f64;
    // single divisions so that e.g. the n = 3 endpoint is exactly fl(4/3)
    // and feeding that value back in is rejected by the strict comparison
    Ok((2.0 * nf / (nf + 2.0), (2.0 * nf - 2.0) / nf))
}

/// Every closed-form constant of the threshold layer.
#[derive(Debug, Clone, Copy)]
pub struct CriterionConstants {
    /// Volume of the unit ball, alpha(n).
    pub alpha_n: f64,
    /// Sharp HLS constant C(n).
    pub c_hls: f64,
    /// Lower critical exponent 2n/(n+2).
    pub m_c: f64,
    /// Upper critical exponent 2 - 2/n.
    pub m_star: f64,
    /// Interpolation exponent m(n-2)/(2n(m-1)).
    pub theta: f64,
    /// Maximizer of the comparison function f.
    pub s_star: f64,
    /// Maximum value f(s*).
    pub f_star: f64,
    /// (s*)^((n-2)/(2n(m-1))): the critical-norm threshold.
    pub threshold_norm: f64,
}

/// Evaluates the comparison function f at s >= 0.
pub fn f_eval(params: &ProblemParams, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!(
            "f is only defined for s >= 0, got {s}"
        )));
    }
    let n = params.n() as f64;
    let m = params.m();
    let alpha = unit_ball_volume(params.n())?;
    let c = hls_constant(params.n())?;
    let mass_pow = params.m0().powf((2.0 * n - m * (n + 2.0)) / (n - 2.0));
    let lin = mass_pow * s / (m - 1.0);
    let conc = c / (2.0 * (n - 2.0) * n * alpha) * s.powf((n - 2.0) / (n * (m - 1.0)));
    Ok(lin - conc)
}

/// First derivative of f, used by the internal stationarity check.
fn f_prime(params: &ProblemParams, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain("f' requires s > 0"));
    }
    let n = params.n() as f64;
    let m = params.m();
    let alpha = unit_ball_volume(params.n())?;
    let c = hls_constant(params.n())?;
    let mass_pow = params.m0().powf((2.0 * n - m * (n + 2.0)) / (n - 2.0));
    let expo = (n - 2.0) / (n * (m - 1.0));
    Ok(mass_pow / (m - 1.0) - c / (2.0 * (n - 2.0) * n * alpha) * expo * s.powf(expo - 1.0))
}

/// Computes s*, f(s*), the norm threshold and the supporting constants.
///
/// Internally verifies that f'(s*) = 0 and that the closed form of f(s*)
/// agrees with a direct evaluation of f at s*, both to 1e-10 relative.
pub fn compute_constants(params: &ProblemParams) -> Result<CriterionConstants> {
    let n = params.n() as f64;
    let m = params.m();
    let m0 = params.m0();
    let alpha_n = unit_ball_volume(params.n())?;
    let c_hls = hls_constant(params.n())?;
    let (m_c, m_star) = critical_exponents(params.n())?;

    let theta = m * (n - 2.0) / (2.0 * n * (m - 1.0));
    debug_assert!(theta > 0.0 && theta < 1.0);

    // gap = 2n - 2 - mn > 0 on the admissible interval
    let gap = 2.0 * n - 2.0 - m * n;
    let nu = n * (m - 1.0) / gap;
    let base = 2.0 * n * n * alpha_n / c_hls;
    let mass_exp_s = (2.0 * n - m * (n + 2.0)) / (n - 2.0);
    let s_star = (base * m0.powf(mass_exp_s)).powf(nu);
    let coeff = (2.0 - 2.0 / n - m) / ((m - 1.0) * (1.0 - 2.0 / n));
    let f_star = coeff * base.powf(nu) * m0.powf((2.0 * n - m * (n + 2.0)) / gap);
    let threshold_norm = s_star.powf((n - 2.0) / (2.0 * n * (m - 1.0)));

    let consts = CriterionConstants {
        alpha_n,
        c_hls,
        m_c,
        m_star,
        theta,
        s_star,
        f_star,
        threshold_norm,
    };

    // m arbitrarily close to an endpoint makes the exponents blow up in
    // double precision; catch the overflow before the consistency checks.
    for v in [
        alpha_n,
        c_hls,
        m_c,
        m_star,
        theta,
        s_star,
        f_star,
        threshold_norm,
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::domain(format!(
                "criterion constant {v} is not a positive finite number (m too close to an endpoint?)"
            )));
        }
    }

    // Stationarity and consistency of the two routes to f(s*).
    let direct = f_eval(params, s_star)?;
    if (direct - f_star).abs() > 1e-10 * f_star.abs() {
        return Err(Error::domain(format!(
            "closed form f(s*) = {f_star} disagrees with direct evaluation {direct}"
        )));
    }
    let slope = f_prime(params, s_star)?;
    let slope_scale = m0.powf(mass_exp_s) / (m - 1.0);
    if slope.abs() > 1e-10 * slope_scale {
        return Err(Error::domain(format!(
            "f'(s*) = {slope} not stationary relative to scale {slope_scale}"
        )));
    }
    Ok(consts)
}

/// Which side of the dichotomy the initial data falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    GlobalExistence,
    BlowUp,
    /// Free energy at or above f(s*), or the norm exactly on the threshold:
    /// the theorem makes no claim, so neither do we.
    OutsideTheoremScope,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::GlobalExistence => "GlobalExistence",
            Regime::BlowUp => "BlowUp",
            Regime::OutsideTheoremScope => "OutsideTheoremScope",
        };
        f.write_str(s)
    }
}

/// Classifier verdict with the margins that produced it.
#[derive(Debug, Clone, Copy)]
pub struct Classification {
    /// L^(2n/(n+2)) norm of the initial data.
    pub lcrit_norm: f64,
    pub free_energy0: f64,
    pub regime: Regime,
    /// threshold_norm - lcrit_norm (positive on the global-existence side).
    pub norm_margin: f64,
    /// f(s*) - free_energy0 (positive when the theorem applies).
    pub energy_margin: f64,
    pub constants: CriterionConstants,
}

/// Applies the dichotomy to a measured (norm, free energy) pair.
///
/// Strict inequalities only: equality in either comparison lands in
/// `OutsideTheoremScope` with the margins reported, never in a guessed
/// regime.
pub fn classify_initial_data(
    params: &ProblemParams,
    lcrit_norm: f64,
    free_energy0: f64,
) -> Result<Classification> {
    if !(lcrit_norm >= 0.0) {
        return Err(Error::domain(format!(
            "norm must be nonnegative, got {lcrit_norm}"
        )));
    }
    let constants = compute_constants(params)?;
    let regime = if free_energy0 < constants.f_star {
        if lcrit_norm < constants.threshold_norm {
            Regime::GlobalExistence
        } else if lcrit_norm > constants.threshold_norm {
            Regime::BlowUp
        } else {
            Regime::OutsideTheoremScope
        }
    } else {
        Regime::OutsideTheoremScope
    };
    Ok(Classification {
        lcrit_norm,
        free_energy0,
        regime,
        norm_margin: constants.threshold_norm - lcrit_norm,
        energy_margin: constants.f_star - free_energy0,
        constants,
    })
}
