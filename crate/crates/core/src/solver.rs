//! Closed-form crossover frequencies, the two filter-constant curves and the
//! intersection search that yields the tuned `(λ*, β*)`.
//!
//! For a fixed order `β` the phase-margin condition pins the gain crossover
//! `ω_g(β)` and a filter constant `λ_a(β)`; the gain-margin condition pins the
//! phase crossover `ω_p(β)` and `λ_b(β)`. A design satisfying both margins is a
//! root of `g(β) = λ_a(β) - λ_b(β)` inside the feasible order set. Roots are
//! bracketed on a uniform grid and refined by bisection.
//!
//! The gain-crossover condition reduces to `cos(α₁ - θω_g) = c₁/r₁`, which has
//! two roots per period. The principal root `θω_g = α₁ - acos(c₁/r₁)` defines
//! the feasible order set. The complementary root `α₁ + acos(c₁/r₁)` yields a
//! second `λ_a` curve over the same feasible intervals; it is sampled as well
//! because some specifications are met only there.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result, NO_INTERSECTION_GUIDANCE};
use crate::feasibility::{beta_x1, feasible_beta_set, BetaFeasibleSet, BetaInterval};
use crate::model::{validate_gain_margin, validate_phase_margin, FoFilter, ProcessModel, RobustnessSpec};
use crate::verification::{measure_margins, FrequencySweep, MarginReport};

/// Which of the two closed-form gain-crossover expressions to evaluate.
///
/// `Low` covers `β < β_x1` and is never positive there; the tuner only ever
/// uses `High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverBranch {
    Low,
    High,
}

/// Which root of the gain-crossover equation a sample follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverRoot {
    /// `θω_g = α₁ - acos(c₁/r₁)`
    Principal,
    /// `θω_g = α₁ + acos(c₁/r₁)`
    Complementary,
}

impl std::fmt::Display for CrossoverRoot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CrossoverRoot::Principal => "principal",
            CrossoverRoot::Complementary => "complementary",
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("fractional order must lie in (0, 2), got {beta}")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("dead time must be positive, got {theta}")))
    }
}

/// Gain crossover frequency from the phase-margin condition, choosing the
/// branch by comparing `β` with `β_x1`. May be non-positive outside the
/// feasible set.
pub fn omega_g(beta: f64, phi_m: f64, theta: f64) -> Result<f64> {
    let branch = if beta < beta_x1(phi_m)? { CrossoverBranch::Low } else { CrossoverBranch::High };
    omega_g_on_branch(beta, phi_m, theta, branch)
}

pub fn omega_g_on_branch(beta: f64, phi_m: f64, theta: f64, branch: CrossoverBranch) -> Result<f64> {
    crossover_root(beta, phi_m, theta, branch, CrossoverRoot::Principal)
}

/// Gain crossover on the complementary root, branch chosen as in [`omega_g`].
pub fn omega_g_complementary(beta: f64, phi_m: f64, theta: f64) -> Result<f64> {
    let branch = if beta < beta_x1(phi_m)? { CrossoverBranch::Low } else { CrossoverBranch::High };
    crossover_root(beta, phi_m, theta, branch, CrossoverRoot::Complementary)
}

fn crossover_root(beta: f64, phi_m: f64, theta: f64, branch: CrossoverBranch, root: CrossoverRoot) -> Result<f64> {
    check_beta(beta)?;
    validate_phase_margin(phi_m)?;
    check_theta(theta)?;
    let ratio = (beta * FRAC_PI_2).sin() / (2.0 * (0.5 * phi_m).sin());
    if ratio > 1.0 + 1e-12 {
        return Err(Error::NotReal { beta, ratio });
    }
    let omega_term = ratio.min(1.0).acos();
    let eta = beta * FRAC_PI_2 + 0.5 * phi_m;
    let alpha = match branch {
        CrossoverBranch::Low => -eta,
        CrossoverBranch::High => PI - eta,
    };
    Ok(match root {
        CrossoverRoot::Principal => (alpha - omega_term) / theta,
        CrossoverRoot::Complementary => (alpha + omega_term) / theta,
    })
}

/// Phase crossover frequency from the gain-margin condition. Real and
/// positive for every `β ∈ (0, 2)` once `A_m ≥ 2`.
pub fn omega_p(beta: f64, gain_margin: f64, theta: f64) -> Result<f64> {
    check_beta(beta)?;
    validate_gain_margin(gain_margin)?;
    check_theta(theta)?;
    let ratio = (beta * FRAC_PI_2).sin() / (gain_margin - 1.0);
    Ok((PI - ratio.acos() + FRAC_PI_2 - beta * FRAC_PI_2) / theta)
}

/// Filter constant solving one margin condition, with the residual of the
/// companion (real-part) equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    pub lambda: f64,
    pub residual: f64,
}

/// Numerators of the `λ` formulas are differences of unit-scale sines; below
/// this they are rounding noise around zero.
const NUMERATOR_FLOOR: f64 = 1e-12;

/// `λ_a` from the imaginary part of the phase-margin condition. The residual
/// is that of the real part.
pub fn lambda_from_pm(beta: f64, omega_g: f64, phi_m: f64, theta: f64) -> Result<LambdaEstimate> {
    check_beta(beta)?;
    validate_phase_margin(phi_m)?;
    check_theta(theta)?;
    if !(omega_g > 0.0) {
        return Err(Error::Domain(format!("gain crossover must be positive, got {omega_g}")));
    }
    let (sb, cb) = (beta * FRAC_PI_2).sin_cos();
    let x = theta * omega_g;
    let wb = omega_g.powf(beta);
    let numerator = (phi_m + x).sin() - x.sin();
    let lambda = numerator / (wb * sb);
    if !(numerator > NUMERATOR_FLOOR && lambda > 0.0) {
        return Err(Error::InfeasibleSample { beta, lambda });
    }
    let residual = (1.0 + lambda * wb * cb - x.cos() + (phi_m + x).cos()).abs();
    Ok(LambdaEstimate { lambda, residual })
}

/// `λ_b` from the imaginary part of the gain-margin condition. The residual
/// is that of the real part.
pub fn lambda_from_gm(beta: f64, omega_p: f64, gain_margin: f64, theta: f64) -> Result<LambdaEstimate> {
    check_beta(beta)?;
    validate_gain_margin(gain_margin)?;
    check_theta(theta)?;
    if !(omega_p > 0.0) {
        return Err(Error::Domain(format!("phase crossover must be positive, got {omega_p}")));
    }
    let (sb, cb) = (beta * FRAC_PI_2).sin_cos();
    let x = theta * omega_p;
    let wb = omega_p.powf(beta);
    let numerator = (gain_margin - 1.0) * x.sin();
    let lambda = numerator / (wb * sb);
    if !(numerator > NUMERATOR_FLOOR && lambda > 0.0) {
        return Err(Error::InfeasibleSample { beta, lambda });
    }
    let residual = (1.0 + lambda * wb * cb - x.cos() + gain_margin * x.cos()).abs();
    Ok(LambdaEstimate { lambda, residual })
}

/// One point of the `β → (λ_a, λ_b)` curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    /// Position on the concatenated grid of all feasible intervals.
    pub index: usize,
    /// Which sampled interval the sample belongs to.
    pub interval: usize,
    pub root: CrossoverRoot,
    pub beta: f64,
    pub omega_g: f64,
    pub omega_p: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub residual_a: f64,
    pub residual_b: f64,
}

impl CurveSample {
    pub fn gap(&self) -> f64 {
        self.lambda_a - self.lambda_b
    }

    fn relative_gap(&self) -> f64 {
        self.gap() / self.lambda_a.max(self.lambda_b)
    }
}

/// Evaluate both curves at one order on the principal root. Fails when either
/// filter constant is not positive or the gain crossover is not real and
/// positive.
pub fn curve_point(beta: f64, spec: &RobustnessSpec, theta: f64) -> Result<CurveSample> {
    curve_point_on(beta, spec, theta, CrossoverRoot::Principal)
}

pub fn curve_point_on(beta: f64, spec: &RobustnessSpec, theta: f64, root: CrossoverRoot) -> Result<CurveSample> {
    let wg = match root {
        CrossoverRoot::Principal => omega_g_on_branch(beta, spec.phase_margin, theta, CrossoverBranch::High)?,
        CrossoverRoot::Complementary => omega_g_complementary(beta, spec.phase_margin, theta)?,
    };
    if !(wg > 0.0) {
        return Err(Error::InfeasibleSample { beta, lambda: f64::NAN });
    }
    let wp = omega_p(beta, spec.gain_margin, theta)?;
    let a = lambda_from_pm(beta, wg, spec.phase_margin, theta)?;
    let b = lambda_from_gm(beta, wp, spec.gain_margin, theta)?;
    Ok(CurveSample {
        index: 0,
        interval: 0,
        root,
        beta,
        omega_g: wg,
        omega_p: wp,
        lambda_a: a.lambda,
        lambda_b: b.lambda,
        residual_a: a.residual,
        residual_b: b.residual,
    })
}

/// Sample both curves on `points` interior orders of every feasible interval.
/// Infeasible samples are dropped, leaving gaps in `index`.
pub fn sample_curves(
    spec: &RobustnessSpec,
    theta: f64,
    set: &BetaFeasibleSet,
    points: usize,
) -> Vec<CurveSample> {
    sample_curves_on(spec, theta, set, points, CrossoverRoot::Principal)
}

/// As [`sample_curves`] on the chosen gain-crossover root.
pub fn sample_curves_on(
    spec: &RobustnessSpec,
    theta: f64,
    set: &BetaFeasibleSet,
    points: usize,
    root: CrossoverRoot,
) -> Vec<CurveSample> {
    sample_intervals(spec, theta, &set.intervals, points, root)
}

fn sample_intervals(
    spec: &RobustnessSpec,
    theta: f64,
    intervals: &[BetaInterval],
    points: usize,
    root: CrossoverRoot,
) -> Vec<CurveSample> {
    let mut out = Vec::with_capacity(points * intervals.len());
    for (i, iv) in intervals.iter().enumerate() {
        for (j, beta) in iv.interior_grid(points).into_iter().enumerate() {
            if let Ok(mut s) = curve_point_on(beta, spec, theta, root) {
                s.index = i * points + j;
                s.interval = i;
                out.push(s);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Samples per feasible interval.
    pub grid_points: usize,
    /// Stop refining once `|λ_a - λ_b| / max(λ_a, λ_b)` drops below this.
    pub refine_tol: f64,
    pub max_bisections: usize,
    /// Also search the complementary gain-crossover root on the feasible set.
    pub complementary_root: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { grid_points: 2000, refine_tol: 1e-10, max_bisections: 200, complementary_root: true }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 100 {
            return Err(Error::Domain(format!("grid_points must be >= 100, got {}", self.grid_points)));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol <= 1e-3) {
            return Err(Error::Domain(format!("refine_tol must lie in (0, 1e-3], got {}", self.refine_tol)));
        }
        if self.max_bisections < 20 {
            return Err(Error::Domain(format!(
                "max_bisections must be >= 20, got {}",
                self.max_bisections
            )));
        }
        Ok(())
    }
}

/// A refined root of `λ_a - λ_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub params: FoFilter,
    pub root: CrossoverRoot,
    pub omega_g: f64,
    pub omega_p: f64,
    /// Grid sample immediately left of the root.
    pub grid_index: usize,
    pub relative_gap: f64,
    pub bisections: usize,
    pub margins: Option<MarginReport>,
}

impl Intersection {
    /// Combined relative margin error, infinite when unmeasured.
    pub fn margin_error(&self, spec: &RobustnessSpec) -> f64 {
        match &self.margins {
            Some(m) => {
                (m.gain_margin / spec.gain_margin - 1.0).abs()
                    + ((m.phase_margin - spec.phase_margin) / spec.phase_margin).abs()
            }
            None => f64::INFINITY,
        }
    }

    /// Measured margins within tolerance and gain crossover before phase
    /// crossover.
    pub fn accepted(&self, spec: &RobustnessSpec) -> bool {
        self.margins.as_ref().is_some_and(|m| {
            margins_within_tolerance(m.gain_margin, m.phase_margin, spec) && m.omega_g < m.omega_p
        })
    }
}

fn margins_within_tolerance(gm: f64, pm: f64, spec: &RobustnessSpec) -> bool {
    (gm - spec.gain_margin).abs() <= GAIN_MARGIN_REL_TOL * spec.gain_margin
        && (pm - spec.phase_margin).abs() <= PHASE_MARGIN_ABS_TOL
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub params: FoFilter,
    pub root: CrossoverRoot,
    pub omega_g: f64,
    pub omega_p: f64,
    pub achieved_gm: f64,
    pub achieved_pm: f64,
    pub grid_index: usize,
    pub margins: MarginReport,
    pub feasible_set: BetaFeasibleSet,
    /// Other refined roots, if the curves cross more than once.
    pub alternatives: Vec<Intersection>,
    pub diagnostics: Vec<String>,
}

/// Tolerances used to accept measured margins: 2 % of `A_m` and 0.01 rad.
pub const GAIN_MARGIN_REL_TOL: f64 = 0.02;
pub const PHASE_MARGIN_ABS_TOL: f64 = 0.01;

impl TuningResult {
    /// Describe any disagreement between measured and requested margins.
    pub fn margin_mismatch(&self, spec: &RobustnessSpec) -> Option<String> {
        let mut problems = Vec::new();
        if !((self.achieved_gm - spec.gain_margin).abs() <= GAIN_MARGIN_REL_TOL * spec.gain_margin) {
            problems.push(format!("gain margin {} vs requested {}", self.achieved_gm, spec.gain_margin));
        }
        if !((self.achieved_pm - spec.phase_margin).abs() <= PHASE_MARGIN_ABS_TOL) {
            problems.push(format!(
                "phase margin {} rad vs requested {} rad",
                self.achieved_pm, spec.phase_margin
            ));
        }
        if self.omega_g >= self.omega_p {
            problems.push(format!(
                "gain crossover {} does not precede phase crossover {}",
                self.omega_g, self.omega_p
            ));
        }
        (!problems.is_empty()).then(|| problems.join("; "))
    }

    pub fn imc_controller(&self, model: &ProcessModel) -> String {
        model.describe_imc_controller(&self.params)
    }
}

fn refine(
    left: &CurveSample,
    right: &CurveSample,
    spec: &RobustnessSpec,
    theta: f64,
    opts: &SolverOptions,
) -> Result<(CurveSample, usize)> {
    let (mut lo, mut hi) = (*left, *right);
    let mut best = if lo.relative_gap().abs() < hi.relative_gap().abs() { lo } else { hi };
    let mut iterations = 0;
    while iterations < opts.max_bisections && best.relative_gap().abs() > opts.refine_tol {
        let mid_beta = 0.5 * (lo.beta + hi.beta);
        if mid_beta <= lo.beta || mid_beta >= hi.beta {
            break;
        }
        let mid = curve_point_on(mid_beta, spec, theta, left.root)?;
        iterations += 1;
        if (mid.gap() > 0.0) == (lo.gap() > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid.relative_gap().abs() < best.relative_gap().abs() {
            best = mid;
        }
    }
    best.index = left.index;
    best.interval = left.interval;
    Ok((best, iterations))
}

/// Tune `(λ, β)` so the IMC loop meets both margins.
///
/// The process gain and time constant do not enter the loop transfer
/// function; they only shape the realised IMC controller.
pub fn tune(model: &ProcessModel, spec: &RobustnessSpec, opts: &SolverOptions) -> Result<TuningResult> {
    model.validate()?;
    spec.validate()?;
    opts.validate()?;
    let theta = model.theta;
    let set = feasible_beta_set(spec.phase_margin)?;
    let samples = sample_curves(spec, theta, &set, opts.grid_points);
    let mut diagnostics = set.notes.clone();
    let dropped = opts.grid_points * set.intervals.len() - samples.len();
    if dropped > 0 {
        diagnostics.push(format!("{dropped} grid samples dropped for non-positive lambda"));
    }
    let complementary = if opts.complementary_root {
        sample_curves_on(spec, theta, &set, opts.grid_points, CrossoverRoot::Complementary)
    } else {
        Vec::new()
    };

    let mut found = Vec::new();
    let pairs = samples.windows(2).chain(complementary.windows(2));
    for pair in pairs {
        let (a, b) = (&pair[0], &pair[1]);
        if b.index != a.index + 1 || a.interval != b.interval {
            continue;
        }
        let root_here = a.gap() == 0.0 || (a.gap() > 0.0) != (b.gap() > 0.0);
        if !root_here {
            continue;
        }
        let (root, bisections) = refine(a, b, spec, theta, opts)?;
        let params = FoFilter { lambda: 0.5 * (root.lambda_a + root.lambda_b), beta: root.beta };
        let margins = measure_margins(&params, theta, &FrequencySweep::for_delay(theta)).ok();
        found.push(Intersection {
            params,
            root: root.root,
            omega_g: root.omega_g,
            omega_p: root.omega_p,
            grid_index: root.index,
            relative_gap: root.relative_gap(),
            bisections,
            margins,
        });
    }

    if found.is_empty() {
        return Err(no_intersection(&samples));
    }

    // Accepted designs first, then the principal root, then smallest error.
    found.sort_by(|x, y| {
        y.accepted(spec)
            .cmp(&x.accepted(spec))
            .then((x.root != CrossoverRoot::Principal).cmp(&(y.root != CrossoverRoot::Principal)))
            .then(x.margin_error(spec).total_cmp(&y.margin_error(spec)))
    });
    let best = found.remove(0);
    let Some(margins) = best.margins else {
        return Err(Error::VerificationMismatch(format!(
            "no crossover could be measured for beta = {}, lambda = {}",
            best.params.beta, best.params.lambda
        )));
    };
    if best.relative_gap.abs() > opts.refine_tol {
        diagnostics.push(format!(
            "bisection stopped at relative gap {:.3e} after {} steps",
            best.relative_gap, best.bisections
        ));
    }
    for alt in &found {
        diagnostics.push(format!(
            "additional intersection on the {} root at beta = {:.6}, lambda = {:.6} (margin error {:.3e})",
            alt.root,
            alt.params.beta,
            alt.params.lambda,
            alt.margin_error(spec)
        ));
    }
    if best.omega_g >= best.omega_p {
        diagnostics.push(format!(
            "closed-form gain crossover {} is not below phase crossover {}",
            best.omega_g, best.omega_p
        ));
    }
    if best.root == CrossoverRoot::Complementary {
        diagnostics.push("solution lies on the complementary gain-crossover root".to_string());
    }
    Ok(TuningResult {
        params: best.params,
        root: best.root,
        omega_g: best.omega_g,
        omega_p: best.omega_p,
        achieved_gm: margins.gain_margin,
        achieved_pm: margins.phase_margin,
        grid_index: best.grid_index,
        margins,
        feasible_set: set,
        alternatives: found,
        diagnostics,
    })
}

fn no_intersection(samples: &[CurveSample]) -> Error {
    let detail = if samples.is_empty() {
        "no grid sample gave positive lambda_a and lambda_b".to_string()
    } else if samples.iter().all(|s| s.gap() > 0.0) {
        "lambda_a > lambda_b over the whole feasible set".to_string()
    } else if samples.iter().all(|s| s.gap() < 0.0) {
        "lambda_a < lambda_b over the whole feasible set".to_string()
    } else {
        "the sign change of lambda_a - lambda_b falls in a gap of infeasible samples".to_string()
    };
    Error::NoIntersection { detail, guidance: NO_INTERSECTION_GUIDANCE }
}

/// How `β*` moves when each margin is increased.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTrend {
    pub beta: f64,
    pub beta_higher_pm: Option<f64>,
    pub beta_higher_gm: Option<f64>,
}

impl BetaTrend {
    /// True when `β*` drops as either margin grows (missing neighbours are ignored).
    pub fn inversely_related(&self) -> bool {
        self.beta_higher_pm.is_none_or(|b| b < self.beta) && self.beta_higher_gm.is_none_or(|b| b < self.beta)
    }
}

/// Re-tune with each margin nudged upwards and report the resulting orders.
pub fn beta_trend(
    model: &ProcessModel,
    spec: &RobustnessSpec,
    opts: &SolverOptions,
    d_phase: f64,
    d_gain: f64,
) -> Result<BetaTrend> {
    let base = tune(model, spec, opts)?;
    let higher_pm = RobustnessSpec { phase_margin: spec.phase_margin + d_phase, ..*spec };
    let higher_gm = RobustnessSpec { gain_margin: spec.gain_margin + d_gain, ..*spec };
    Ok(BetaTrend {
        beta: base.params.beta,
        beta_higher_pm: tune(model, &higher_pm, opts).ok().map(|r| r.params.beta),
        beta_higher_gm: tune(model, &higher_gm, opts).ok().map(|r| r.params.beta),
    })
}
