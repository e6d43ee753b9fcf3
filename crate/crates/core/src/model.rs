//! Plant, specification and filter types, plus exact frequency-domain
//! evaluation of the loop transfer functions.
//!
//! With an exact process model `G(s) = k e^{-θs} / (τs + 1)` and the
//! fractional filter `Θ(s) = 1 / (λ s^β + 1)`, the IMC loop reduces to
//!
//! ```text
//! L(s) = e^{-θs} / (λ s^β + 1 - e^{-θs})
//! η(s) = e^{-θs} / (λ s^β + 1)
//! ε(s) = 1 / (1 + L(s))
//! ```
//!
//! The delay is never approximated. Frequencies are strictly positive and
//! `(jω)^β` always uses the principal branch `ω^β e^{jβπ/2}`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// First-order-plus-dead-time process `k e^{-θs} / (τs + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessModel {
    pub k: f64,
    /// Time constant in seconds.
    pub tau: f64,
    /// Dead time in seconds.
    pub theta: f64,
}

impl ProcessModel {
    pub fn new(k: f64, tau: f64, theta: f64) -> Result<Self> {
        let model = Self { k, tau, theta };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.k.is_finite() || self.k == 0.0 {
            return Err(Error::Domain(format!("process gain must be finite and non-zero, got {}", self.k)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Domain(format!("time constant must be positive, got {}", self.tau)));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::Domain(format!("dead time must be positive, got {}", self.theta)));
        }
        Ok(())
    }

    /// The IMC controller `Q(jω) = (τjω + 1) / (k (λ (jω)^β + 1))`.
    pub fn imc_controller(&self, filter: &FoFilter, omega: f64) -> Result<Complex64> {
        self.validate()?;
        let theta_f = eval_filter(filter, omega)?;
        Ok(Complex64::new(1.0, self.tau * omega) * theta_f / self.k)
    }

    /// Human-readable form of the IMC controller for reports.
    pub fn describe_imc_controller(&self, filter: &FoFilter) -> String {
        format!(
            "Q(s) = ({} s + 1) / ({} * ({} s^{} + 1))",
            self.tau, self.k, filter.lambda, filter.beta
        )
    }
}

/// Desired gain margin (absolute ratio) and phase margin (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessSpec {
    pub gain_margin: f64,
    pub phase_margin: f64,
}

impl RobustnessSpec {
    pub fn new(gain_margin: f64, phase_margin: f64) -> Result<Self> {
        let spec = Self { gain_margin, phase_margin };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_gain_margin(self.gain_margin)?;
        validate_phase_margin(self.phase_margin)
    }
}

pub(crate) fn validate_gain_margin(gain_margin: f64) -> Result<()> {
    if !gain_margin.is_finite() {
        return Err(Error::InfeasibleSpec(format!("gain margin must be finite, got {gain_margin}")));
    }
    if gain_margin == 1.0 {
        return Err(Error::InfeasibleSpec(
            "gain margin A_m = 1 cannot be chosen: sin(beta*pi/2)/(A_m - 1) is unbounded".into(),
        ));
    }
    if gain_margin < 2.0 {
        return Err(Error::InfeasibleSpec(format!(
            "gain margin must satisfy A_m >= 2 for a real phase crossover, got {gain_margin}"
        )));
    }
    Ok(())
}

pub(crate) fn validate_phase_margin(phase_margin: f64) -> Result<()> {
    if !(phase_margin > 0.0 && phase_margin < PI) {
        return Err(Error::InfeasibleSpec(format!(
            "phase margin must lie in (0, pi) rad, got {phase_margin}"
        )));
    }
    Ok(())
}

/// Fractional filter `Θ(s) = 1 / (λ s^β + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoFilter {
    pub lambda: f64,
    pub beta: f64,
}

impl FoFilter {
    pub fn new(lambda: f64, beta: f64) -> Result<Self> {
        let filter = Self { lambda, beta };
        filter.validate()?;
        Ok(filter)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Domain(format!("filter constant must be positive, got {}", self.lambda)));
        }
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::Domain(format!("fractional order must lie in (0, 2), got {}", self.beta)));
        }
        Ok(())
    }

    /// `λ (jω)^β` split into real and imaginary parts.
    #[inline]
    fn fractional_term(&self, omega: f64) -> Complex64 {
        let scale = self.lambda * omega.powf(self.beta);
        let angle = self.beta * FRAC_PI_2;
        Complex64::new(scale * angle.cos(), scale * angle.sin())
    }
}

impl fmt::Display for FoFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/({} s^{} + 1)", self.lambda, self.beta)
    }
}

/// A single sample of a frequency response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexResponse {
    pub omega: f64,
    pub value: Complex64,
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("frequency must be positive and finite, got {omega}")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("dead time must be positive, got {theta}")))
    }
}

/// `Θ(jω) = 1 / (λ (jω)^β + 1)`.
pub fn eval_filter(filter: &FoFilter, omega: f64) -> Result<Complex64> {
    filter.validate()?;
    check_omega(omega)?;
    Ok((filter.fractional_term(omega) + 1.0).inv())
}

/// The open-loop denominator `(1 + λω^β cos(βπ/2) - cos θω) + j(λω^β sin(βπ/2) + sin θω)`.
#[inline]
pub(crate) fn open_loop_denominator(filter: &FoFilter, theta: f64, omega: f64) -> Complex64 {
    let frac = filter.fractional_term(omega);
    let (s, c) = (theta * omega).sin_cos();
    Complex64::new(1.0 + frac.re - c, frac.im + s)
}

/// `L(jω) = e^{-jθω} / (λ (jω)^β + 1 - e^{-jθω})`, evaluated through the
/// real/imaginary split of its denominator.
pub fn eval_open_loop(filter: &FoFilter, theta: f64, omega: f64) -> Result<Complex64> {
    filter.validate()?;
    check_theta(theta)?;
    check_omega(omega)?;
    let den = open_loop_denominator(filter, theta, omega);
    if den.norm() < 1e-300 {
        return Err(Error::Singularity { omega });
    }
    Ok(Complex64::from_polar(1.0, -theta * omega) / den)
}

/// Complementary sensitivity `η(jω) = e^{-jθω} Θ(jω)`.
pub fn eval_complementary(filter: &FoFilter, theta: f64, omega: f64) -> Result<Complex64> {
    check_theta(theta)?;
    let theta_f = eval_filter(filter, omega)?;
    Ok(Complex64::from_polar(1.0, -theta * omega) * theta_f)
}

/// Sensitivity `ε(jω) = 1 / (1 + L(jω))`.
pub fn eval_sensitivity(filter: &FoFilter, theta: f64, omega: f64) -> Result<Complex64> {
    let open = eval_open_loop(filter, theta, omega)?;
    Ok((open + 1.0).inv())
}

/// Open-loop response on a list of frequencies.
pub fn open_loop_response(filter: &FoFilter, theta: f64, omegas: &[f64]) -> Result<Vec<ComplexResponse>> {
    omegas
        .iter()
        .map(|&omega| Ok(ComplexResponse { omega, value: eval_open_loop(filter, theta, omega)? }))
        .collect()
}

/// `n` logarithmically spaced points on `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == n => hi,
            _ => (a + step * i as f64).exp(),
        })
        .collect()
}
