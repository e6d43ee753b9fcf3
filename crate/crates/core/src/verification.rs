//! Independent checks of a tuned loop: margins measured from a frequency
//! sweep, a brute-force grid oracle, the low-frequency sensitivity limit and
//! step responses synthesised from the frequency response.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feasibility::feasible_beta_set;
use crate::model::{eval_complementary, eval_filter, eval_sensitivity, FoFilter, ProcessModel, RobustnessSpec};

/// Logarithmic frequency grid used to locate crossovers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySweep {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl FrequencySweep {
    pub const MIN_POINTS: usize = 2000;

    /// `[1e-4/θ, 1e2/θ]` with 2000 points.
    pub fn for_delay(theta: f64) -> Self {
        Self { omega_min: 1e-4 / theta, omega_max: 1e2 / theta, points: Self::MIN_POINTS }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min && self.omega_max.is_finite()) {
            return Err(Error::Domain(format!(
                "sweep must satisfy 0 < omega_min < omega_max, got [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        if self.points < Self::MIN_POINTS {
            return Err(Error::Domain(format!(
                "sweep needs at least {} points, got {}",
                Self::MIN_POINTS,
                self.points
            )));
        }
        Ok(())
    }

    pub fn omegas(&self) -> Vec<f64> {
        crate::model::log_space(self.omega_min, self.omega_max, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginResiduals {
    /// `| |L(jω_g)| - 1 |`
    pub gain_crossover: f64,
    /// `| arg L(jω_p) + π |` on the unwrapped phase.
    pub phase_crossover: f64,
}

/// Margins measured on the actual loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginReport {
    pub gain_margin: f64,
    pub phase_margin: f64,
    pub omega_g: f64,
    pub omega_p: f64,
    pub residuals: MarginResiduals,
}

const ROOT_REL_TOL: f64 = 1e-12;

fn wrap(angle: f64) -> f64 {
    angle - 2.0 * PI * (angle / (2.0 * PI)).round()
}

/// Loop quantities that depend on `β` and `θ` but not on `λ`, tabulated on a
/// sweep so that many filter constants can be measured cheaply.
#[derive(Debug, Clone)]
pub(crate) struct LoopTable {
    beta: f64,
    theta: f64,
    omegas: Vec<f64>,
    // ω^β cos(βπ/2), ω^β sin(βπ/2), cos θω, sin θω
    frac_re: Vec<f64>,
    frac_im: Vec<f64>,
    delay_cos: Vec<f64>,
    delay_sin: Vec<f64>,
}

impl LoopTable {
    pub(crate) fn new(beta: f64, theta: f64, sweep: &FrequencySweep) -> Self {
        let omegas = sweep.omegas();
        let (sb, cb) = (beta * FRAC_PI_2).sin_cos();
        let n = omegas.len();
        let mut t = Self {
            beta,
            theta,
            frac_re: Vec::with_capacity(n),
            frac_im: Vec::with_capacity(n),
            delay_cos: Vec::with_capacity(n),
            delay_sin: Vec::with_capacity(n),
            omegas,
        };
        for &w in &t.omegas {
            let wb = w.powf(beta);
            let (s, c) = (theta * w).sin_cos();
            t.frac_re.push(wb * cb);
            t.frac_im.push(wb * sb);
            t.delay_cos.push(c);
            t.delay_sin.push(s);
        }
        t
    }

    #[inline]
    fn denominator_at(&self, lambda: f64, k: usize) -> (f64, f64) {
        (1.0 + lambda * self.frac_re[k] - self.delay_cos[k], lambda * self.frac_im[k] + self.delay_sin[k])
    }

    #[inline]
    fn denominator(&self, lambda: f64, omega: f64) -> (f64, f64) {
        let wb = omega.powf(self.beta);
        let (sb, cb) = (self.beta * FRAC_PI_2).sin_cos();
        let (s, c) = (self.theta * omega).sin_cos();
        (1.0 + lambda * wb * cb - c, lambda * wb * sb + s)
    }

    /// Principal `arg L = -θω - arg(den)`, wrapped to `(-π, π]`.
    #[inline]
    fn principal_phase(&self, omega: f64, den: (f64, f64)) -> f64 {
        wrap(-self.theta * omega - den.1.atan2(den.0))
    }

    /// Unwrapped phase at `omega`, continued from a known unwrapped value.
    fn phase_near(&self, lambda: f64, omega: f64, reference: f64) -> f64 {
        let p = self.principal_phase(omega, self.denominator(lambda, omega));
        p + 2.0 * PI * ((reference - p) / (2.0 * PI)).round()
    }

    /// Bisection in `ln ω` on a bracket where `f` changes sign.
    fn bisect<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        let f_lo_positive = f(lo) > 0.0;
        while (hi - lo) > ROOT_REL_TOL * lo {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) > 0.0) == f_lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    pub(crate) fn measure(&self, lambda: f64) -> Result<MarginReport> {
        let n = self.omegas.len();
        let mut gain_bracket = None;
        let mut phase_bracket = None;

        let den0 = self.denominator_at(lambda, 0);
        let mut prev_mag2 = den0.0 * den0.0 + den0.1 * den0.1;
        let mut prev_raw = -self.theta * self.omegas[0] - den0.1.atan2(den0.0);
        let mut prev_unwrapped = wrap(prev_raw);
        // Unwrapped phase at the left end of each bracket.
        let mut gain_phase_ref = 0.0;
        let mut phase_ref = 0.0;

        for k in 1..n {
            let den = self.denominator_at(lambda, k);
            let mag2 = den.0 * den.0 + den.1 * den.1;
            let raw = -self.theta * self.omegas[k] - den.1.atan2(den.0);
            let mut step = raw - prev_raw;
            if step > PI {
                step -= 2.0 * PI;
            } else if step < -PI {
                step += 2.0 * PI;
            }
            let unwrapped = prev_unwrapped + step;

            // |L| > 1 <=> |den| < 1.
            if gain_bracket.is_none() && prev_mag2 < 1.0 && mag2 >= 1.0 {
                gain_bracket = Some(k - 1);
                gain_phase_ref = prev_unwrapped;
            }
            if phase_bracket.is_none() && prev_unwrapped > -PI && unwrapped <= -PI {
                phase_bracket = Some(k - 1);
                phase_ref = prev_unwrapped;
            }
            if gain_bracket.is_some() && phase_bracket.is_some() {
                break;
            }
            prev_mag2 = mag2;
            prev_raw = raw;
            prev_unwrapped = unwrapped;
        }

        let gk = gain_bracket.ok_or(Error::NoGainCrossover)?;
        let pk = phase_bracket.ok_or(Error::NoPhaseCrossover)?;

        let omega_g = Self::bisect(self.omegas[gk], self.omegas[gk + 1], |w| {
            let d = self.denominator(lambda, w);
            d.0 * d.0 + d.1 * d.1 - 1.0
        });
        let omega_p = Self::bisect(self.omegas[pk], self.omegas[pk + 1], |w| {
            self.phase_near(lambda, w, phase_ref) + PI
        });

        let dg = self.denominator(lambda, omega_g);
        let dp = self.denominator(lambda, omega_p);
        let mag_g = 1.0 / dg.0.hypot(dg.1);
        let mag_p = 1.0 / dp.0.hypot(dp.1);
        let phase_g = self.phase_near(lambda, omega_g, gain_phase_ref);
        let phase_p = self.phase_near(lambda, omega_p, phase_ref);

        Ok(MarginReport {
            gain_margin: 1.0 / mag_p,
            phase_margin: PI + phase_g,
            omega_g,
            omega_p,
            residuals: MarginResiduals { gain_crossover: (mag_g - 1.0).abs(), phase_crossover: (phase_p + PI).abs() },
        })
    }
}

/// Measure gain and phase margins of the IMC loop from a frequency sweep.
///
/// The gain crossover is the first point where `|L|` falls through 1; the
/// phase crossover the first point where the unwrapped `arg L` falls through
/// `-π`. Both are refined by bisection.
pub fn measure_margins(params: &FoFilter, theta: f64, sweep: &FrequencySweep) -> Result<MarginReport> {
    params.validate()?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("dead time must be positive, got {theta}")));
    }
    sweep.validate()?;
    LoopTable::new(params.beta, theta, sweep).measure(params.lambda)
}

/// Best design found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Minimiser after local zooming.
    pub params: FoFilter,
    pub objective: f64,
    pub margins: MarginReport,
    /// Best node of the initial grid.
    pub grid_params: FoFilter,
    pub grid_objective: f64,
    /// Largest spacing between neighbouring `β` grid points.
    pub beta_step: f64,
    /// Ratio between neighbouring `λ` grid points.
    pub lambda_ratio: f64,
    /// Margin measurements spent polishing the best node.
    pub evaluations: usize,
}

impl OracleResult {
    /// Offset of `other` from the minimiser in initial-grid cells along `β`
    /// and `ln λ`.
    pub fn cell_offset(&self, other: &FoFilter) -> (f64, f64) {
        (
            (other.beta - self.params.beta).abs() / self.beta_step,
            (other.lambda / self.params.lambda).ln().abs() / self.lambda_ratio.ln(),
        )
    }

    /// Whether the polished design meets both margins to numerical precision,
    /// as opposed to being the closest compromise available.
    pub fn is_exact(&self) -> bool {
        self.objective <= ORACLE_EXACT_OBJECTIVE
    }

    /// Whether `other` lies within one initial-grid cell of the minimiser.
    pub fn within_one_cell(&self, other: &FoFilter) -> bool {
        let (b, l) = self.cell_offset(other);
        b <= 1.0 && l <= 1.0
    }
}

pub const ORACLE_OBJECTIVE_LIMIT: f64 = 0.05;
pub const ORACLE_MIN_GRID: usize = 200;
/// Polished objective treated as an exact design: both relative margin errors
/// below about `1e-6`.
pub const ORACLE_EXACT_OBJECTIVE: f64 = 1e-12;
/// Polishing scans this many `β` cells either side of the best node, plus as
/// many points again across its interval, and searches `λ` within this many
/// cells.
const PROFILE_SCAN: i64 = 20;
const PROFILE_HALF_WIDTH: f64 = 10.0;
const GOLDEN_STEPS: usize = 60;

/// Golden-section minimum of `f` on `[lo, hi]`. Points where `f` is undefined
/// count as worse than any defined value. Returns the best point seen.
fn golden_min<T, F>(f: &mut F, lo: f64, hi: f64) -> Option<(f64, (f64, T))>
where
    T: Clone,
    F: FnMut(f64) -> Option<(f64, T)>,
{
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut best: Option<(f64, (f64, T))> = None;
    let mut eval = |x: f64, best: &mut Option<(f64, (f64, T))>| -> f64 {
        match f(x) {
            Some(v) => {
                let y = v.0;
                if best.as_ref().is_none_or(|b| y < b.1 .0) {
                    *best = Some((x, v));
                }
                y
            }
            None => f64::INFINITY,
        }
    };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c, &mut best);
    let mut fd = eval(d, &mut best);
    for _ in 0..GOLDEN_STEPS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, &mut best);
        }
    }
    best
}

struct Scorer<'a> {
    spec: &'a RobustnessSpec,
    theta: f64,
    sweep: FrequencySweep,
}

impl Scorer<'_> {
    fn score(&self, table: &LoopTable, lambda: f64) -> Option<(f64, MarginReport)> {
        let m = table.measure(lambda).ok()?;
        if m.omega_g >= m.omega_p {
            return None;
        }
        let objective = (m.gain_margin / self.spec.gain_margin - 1.0).powi(2)
            + ((m.phase_margin - self.spec.phase_margin) / self.spec.phase_margin).powi(2);
        Some((objective, m))
    }

    fn table(&self, beta: f64) -> LoopTable {
        LoopTable::new(beta, self.theta, &self.sweep)
    }
}

/// Brute-force search over a `β × λ` grid, scoring each candidate by
/// `(A_meas/A_m - 1)² + ((φ_meas - φ_m)/φ_m)²` from [`measure_margins`].
/// Candidates whose measured gain crossover does not precede their phase
/// crossover are skipped.
///
/// `β` covers the feasible set (points split across intervals by width) and
/// `λ` is log-spaced over `[1e-3 θ^β̄, 1e3 θ^β̄]` with `β̄` the centre of the
/// feasible hull. The objective valley is narrow and oblique to the grid, so
/// the best node alone can sit several cells from the minimiser; it is then
/// polished by golden-section searches along `λ` and `β`.
pub fn brute_force_tune(
    model: &ProcessModel,
    spec: &RobustnessSpec,
    beta_grid: usize,
    lambda_grid: usize,
) -> Result<OracleResult> {
    model.validate()?;
    spec.validate()?;
    if beta_grid < ORACLE_MIN_GRID || lambda_grid < ORACLE_MIN_GRID {
        return Err(Error::Domain(format!(
            "oracle grids must be at least {ORACLE_MIN_GRID} x {ORACLE_MIN_GRID}, got {beta_grid} x {lambda_grid}"
        )));
    }
    let theta = model.theta;
    let set = feasible_beta_set(spec.phase_margin)?;

    let total = set.total_width();
    let mut betas = Vec::with_capacity(beta_grid);
    let mut beta_step = 0.0_f64;
    let mut remaining = beta_grid;
    for (i, iv) in set.intervals.iter().enumerate() {
        let n = if i + 1 == set.intervals.len() {
            remaining
        } else {
            ((beta_grid as f64 * iv.width() / total).round() as usize).clamp(1, remaining - 1)
        };
        remaining -= n;
        beta_step = beta_step.max(iv.width() / (n + 1) as f64);
        betas.extend(iv.interior_grid(n).into_iter().map(|b| (b, i)));
    }

    let hull = set.hull();
    let centre = theta.powf(0.5 * (hull.lo + hull.hi));
    let lambdas = crate::model::log_space(1e-3 * centre, 1e3 * centre, lambda_grid);
    let lambda_ratio = lambdas[1] / lambdas[0];

    let scorer = Scorer { spec, theta, sweep: FrequencySweep::for_delay(theta) };
    let mut best: Option<(f64, FoFilter, MarginReport, usize)> = None;
    for &(beta, interval) in &betas {
        let table = scorer.table(beta);
        for &lambda in &lambdas {
            let Some((objective, m)) = scorer.score(&table, lambda) else { continue };
            if best.as_ref().is_none_or(|b| objective < b.0) {
                best = Some((objective, FoFilter { lambda, beta }, m, interval));
            }
        }
    }
    let Some((grid_objective, grid_params, grid_margins, interval)) = best else {
        return Err(Error::OracleFailure { objective: f64::INFINITY, threshold: ORACLE_OBJECTIVE_LIMIT });
    };
    if grid_objective > ORACLE_OBJECTIVE_LIMIT {
        return Err(Error::OracleFailure { objective: grid_objective, threshold: ORACLE_OBJECTIVE_LIMIT });
    }

    // Polish along the valley: profile the objective over λ at each β, scan
    // the profile near the best node and across its interval, then narrow it
    // by golden section.
    let iv = set.intervals[interval];
    let log_span = PROFILE_HALF_WIDTH * lambda_ratio.ln();
    let centre_log = grid_params.lambda.ln();
    let mut evaluations = 0;
    let mut profile = |beta: f64| -> Option<(f64, FoFilter, MarginReport)> {
        if !(beta > iv.lo && beta < iv.hi) {
            return None;
        }
        let table = scorer.table(beta);
        let mut f = |log_lambda: f64| {
            evaluations += 1;
            scorer.score(&table, log_lambda.exp())
        };
        let (log_lambda, (obj, m)) = golden_min(&mut f, centre_log - log_span, centre_log + log_span)?;
        Some((obj, FoFilter { lambda: log_lambda.exp(), beta }, m))
    };

    let mut scan: Vec<f64> = (-PROFILE_SCAN..=PROFILE_SCAN)
        .map(|k| grid_params.beta + k as f64 * beta_step)
        .chain(iv.interior_grid(2 * PROFILE_SCAN as usize + 1))
        .filter(|b| *b > iv.lo && *b < iv.hi)
        .collect();
    scan.sort_by(f64::total_cmp);
    scan.dedup();
    let mut polished = (grid_objective, grid_params, grid_margins);
    let mut best_i = None;
    for (i, &beta) in scan.iter().enumerate() {
        if let Some(p) = profile(beta) {
            if p.0 < polished.0 {
                polished = p;
                best_i = Some(i);
            }
        }
    }
    if let Some(i) = best_i {
        let lo = if i > 0 { scan[i - 1] } else { iv.lo };
        let hi = scan.get(i + 1).copied().unwrap_or(iv.hi);
        let mut by_beta = |beta: f64| profile(beta).map(|p| (p.0, p));
        if let Some((_, (_, p))) = golden_min(&mut by_beta, lo, hi) {
            if p.0 < polished.0 {
                polished = p;
            }
        }
    }
    let (objective, params, margins) = polished;

    Ok(OracleResult {
        params,
        objective,
        margins,
        grid_params,
        grid_objective,
        beta_step,
        lambda_ratio,
        evaluations,
    })
}

/// Outcome of the low-frequency sensitivity probe.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceCheck {
    /// `(ω, |ε(jω)|)` at decreasing frequencies.
    pub probes: Vec<(f64, f64)>,
    pub passed: bool,
}

/// Probe `|ε(jω)|` at `ω ∈ {1e-4, 1e-5, 1e-6}/θ`; passes when the magnitude
/// strictly decreases and ends below `1e-3`.
pub fn check_disturbance_rejection(params: &FoFilter, theta: f64) -> Result<DisturbanceCheck> {
    params.validate()?;
    let probes = [1e-4, 1e-5, 1e-6]
        .iter()
        .map(|f| {
            let omega = f / theta;
            Ok((omega, eval_sensitivity(params, theta, omega)?.norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = probes.windows(2).all(|p| p[1].1 < p[0].1);
    let passed = decreasing && probes[probes.len() - 1].1 < 1e-3;
    Ok(DisturbanceCheck { probes, passed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepResponse {
    /// Largest `|y(t)|` for `t < θ`.
    pub fn max_before(&self, theta: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t < theta)
            .map(|(_, y)| y.abs())
            .fold(0.0, f64::max)
    }

    pub fn final_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Frequency grid and convergence settings for step-response synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Lower and upper integration limits, in units of `1/θ`.
    pub omega_min_factor: f64,
    pub omega_max_factor: f64,
    /// Initial relative spacing of the log grid.
    pub initial_ratio: f64,
    /// Largest absolute node spacing in units of `1/θ`, if capped.
    pub max_step_factor: Option<f64>,
    /// Accept once two successive grid halvings agree to this.
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            omega_min_factor: 1e-5,
            omega_max_factor: 1e4,
            initial_ratio: 1e-2,
            max_step_factor: None,
            tolerance: 1e-4,
            max_refinements: 5,
        }
    }
}

fn frequency_nodes(omega_min: f64, omega_max: f64, ratio: f64, max_step: Option<f64>) -> Vec<f64> {
    let mut nodes = vec![omega_min];
    let mut w = omega_min;
    while w < omega_max {
        let mut step = w * ratio;
        if let Some(cap) = max_step {
            step = step.min(cap);
        }
        w = (w + step).min(omega_max);
        nodes.push(w);
    }
    nodes
}

/// `∫₀¹ e^{zx} dx` and `∫₀¹ x e^{zx} dx`; `ez` is `e^z`.
fn filon_moments(z: Complex64, ez: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.5 {
        // Power series: Σ zⁿ/(n+1)! and Σ zⁿ/(n!(n+2)).
        let mut e0 = Complex64::new(0.0, 0.0);
        let mut e1 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0); // zⁿ/n!
        for n in 0..16 {
            e0 += term / (n as f64 + 1.0);
            e1 += term / (n as f64 + 2.0);
            term = term * z / (n as f64 + 1.0);
        }
        (e0, e1)
    } else {
        let e0 = (ez - 1.0) / z;
        let e1 = (ez * (z - 1.0) + 1.0) / (z * z);
        (e0, e1)
    }
}

/// `∫ F(ω) e^{jωs} dω` over the nodes with `F` linear between them.
fn filon_integral(nodes: &[f64], values: &[Complex64], s: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut phasor = Complex64::from_polar(1.0, nodes[0] * s);
    for k in 0..nodes.len() - 1 {
        let h = nodes[k + 1] - nodes[k];
        let next = Complex64::from_polar(1.0, nodes[k + 1] * s);
        let z = Complex64::new(0.0, s * h);
        let ez = next * phasor.conj();
        let (e0, e1) = filon_moments(z, ez);
        // ∫₀¹ ((1-x) F_k + x F_{k+1}) e^{zx} dx
        acc += phasor * h * (values[k] * (e0 - e1) + values[k + 1] * e1);
        phasor = next;
    }
    acc
}

/// Sine integral for small arguments.
fn sine_integral_small(x: f64) -> f64 {
    let x2 = x * x;
    x * (1.0 - x2 / 18.0 + x2 * x2 / 600.0 - x2 * x2 * x2 / 35280.0)
}

/// Unit-step response of `H(jω) = e^{-jθω} H̃(jω)` from the real-part
/// inversion `y(t) = (2/π) ∫₀^∞ Re H(jω) sin(ωt)/ω dω`.
///
/// Writing `Re H · sin ωt = ½ Im[H̃ e^{jω(t-θ)} + conj(H̃) e^{jω(t+θ)}]` leaves
/// only the smooth factor `H̃(jω)/ω` to interpolate, so each panel is
/// integrated exactly against its oscillator. The grid is halved until two
/// passes agree to `opts.tolerance`. Below the lowest node `Re H` is taken as
/// constant, which contributes `Re H(ω_min) Si(ω_min t)`.
pub fn step_response_with<F>(
    delay_free: F,
    theta: f64,
    times: &[f64],
    opts: &InversionOptions,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Complex64,
{
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let omega_min = (opts.omega_min_factor / theta).min(0.1 / t_max.max(f64::MIN_POSITIVE));
    let omega_max = opts.omega_max_factor / theta;
    let max_step = opts.max_step_factor.map(|f| f / theta);

    let h0 = delay_free(omega_min);
    let re_low = (Complex64::from_polar(1.0, -theta * omega_min) * h0).re;

    let pass = |ratio: f64| -> Vec<f64> {
        let nodes = frequency_nodes(omega_min, omega_max, ratio, max_step);
        let amp: Vec<Complex64> = nodes.iter().map(|&w| delay_free(w) / w).collect();
        let amp_conj: Vec<Complex64> = amp.iter().map(|a| a.conj()).collect();
        times
            .iter()
            .map(|&t| {
                let body = filon_integral(&nodes, &amp, t - theta) + filon_integral(&nodes, &amp_conj, t + theta);
                body.im / PI + 2.0 / PI * re_low * sine_integral_small(omega_min * t)
            })
            .collect()
    };

    let mut ratio = opts.initial_ratio;
    let mut current = pass(ratio);
    for _ in 0..opts.max_refinements {
        ratio *= 0.5;
        let finer = pass(ratio);
        let (worst, at) = current
            .iter()
            .zip(&finer)
            .zip(times)
            .map(|((a, b), t)| ((a - b).abs(), *t))
            .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
        current = finer;
        if worst <= opts.tolerance {
            return Ok(current);
        }
        if ratio * 0.5 < opts.initial_ratio / 2f64.powi(opts.max_refinements as i32) {
            let idx = times.iter().position(|t| *t == at).unwrap_or(0);
            return Err(Error::Integration { time: at, estimate: current[idx], change: worst });
        }
    }
    Err(Error::Integration { time: t_max, estimate: current[current.len() - 1], change: f64::NAN })
}

/// Unit-step response of the closed loop `η(s) = e^{-θs} / (λ s^β + 1)`.
pub fn step_response(params: &FoFilter, theta: f64, horizon: f64, samples: usize) -> Result<StepResponse> {
    params.validate()?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("dead time must be positive, got {theta}")));
    }
    let settle = params.lambda.powf(1.0 / params.beta);
    let min_horizon = 10.0 * theta.max(settle);
    if !(horizon >= min_horizon) {
        return Err(Error::Domain(format!("horizon must be at least {min_horizon}, got {horizon}")));
    }
    if samples < 500 {
        return Err(Error::Domain(format!("at least 500 samples are required, got {samples}")));
    }
    // Cross-check the delay-free factor against the closed-loop evaluator once.
    debug_assert!({
        let w = 1.0 / theta;
        let direct = eval_complementary(params, theta, w).unwrap();
        let split = Complex64::from_polar(1.0, -theta * w) * eval_filter(params, w).unwrap();
        (direct - split).norm() < 1e-12
    });
    let times: Vec<f64> = (0..samples).map(|i| horizon * i as f64 / (samples - 1) as f64).collect();
    let values = step_response_with(
        |w| eval_filter(params, w).unwrap_or(Complex64::new(0.0, 0.0)),
        theta,
        &times,
        &InversionOptions::default(),
    )?;
    Ok(StepResponse { times, values })
}

/// Classical parallel controller `C(s) = kp + ki/s + kd s`, used to compare
/// against baseline designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalController {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl ClassicalController {
    pub fn eval(&self, omega: f64) -> Complex64 {
        Complex64::new(self.kp, self.kd * omega - self.ki / omega)
    }

    /// `C G / (1 + C G)` for the FOPTD process.
    pub fn complementary(&self, model: &ProcessModel, omega: f64) -> Complex64 {
        let open = self.eval(omega) * process_response(model, omega);
        open / (open + 1.0)
    }
}

fn process_response(model: &ProcessModel, omega: f64) -> Complex64 {
    Complex64::from_polar(model.k, -model.theta * omega) / Complex64::new(1.0, model.tau * omega)
}

/// Step response of a classical loop through the same frequency-domain
/// inversion. The delay remains inside the closed-loop denominator, so the
/// grid spacing is capped to resolve its ripple.
pub fn classical_step_response(
    model: &ProcessModel,
    controller: &ClassicalController,
    horizon: f64,
    samples: usize,
) -> Result<StepResponse> {
    model.validate()?;
    if samples < 2 || !(horizon > 0.0) {
        return Err(Error::Domain("horizon must be positive and samples >= 2".into()));
    }
    let theta = model.theta;
    let times: Vec<f64> = (0..samples).map(|i| horizon * i as f64 / (samples - 1) as f64).collect();
    let opts = InversionOptions { max_step_factor: Some(0.1), omega_max_factor: 2e3, ..Default::default() };
    let values = step_response_with(
        |w| Complex64::from_polar(1.0, theta * w) * controller.complementary(model, w),
        theta,
        &times,
        &opts,
    )?;
    Ok(StepResponse { times, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_guards() {
        assert!(FrequencySweep::for_delay(40.0).validate().is_ok());
        let few = FrequencySweep { points: 100, ..FrequencySweep::for_delay(1.0) };
        assert!(few.validate().is_err());
        let bad = FrequencySweep { omega_min: 0.0, ..FrequencySweep::for_delay(1.0) };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn filon_moments_agree_across_switch() {
        for &y in &[0.49, 0.51, -0.49, -0.51, 0.2] {
            let z = Complex64::new(0.0, y);
            let ez = z.exp();
            let series = filon_moments(z, ez);
            let closed = ((ez - 1.0) / z, (ez * (z - 1.0) + 1.0) / (z * z));
            assert!((series.0 - closed.0).norm() < 1e-13);
            assert!((series.1 - closed.1).norm() < 1e-13);
        }
    }

    #[test]
    fn filon_integrates_linear_times_oscillator_exactly() {
        // ∫₀^2 (1 + ω) e^{3jω} dω, coarse nodes.
        let nodes = [0.0, 0.5, 1.3, 2.0];
        let values: Vec<Complex64> = nodes.iter().map(|w| Complex64::new(1.0 + w, 0.0)).collect();
        let got = filon_integral(&nodes, &values, 3.0);
        let j = Complex64::new(0.0, 1.0);
        let s = 3.0;
        let anti = |w: f64| {
            let e = (j * s * w).exp();
            e * (1.0 + w) / (j * s) + e / (s * s)
        };
        let want = anti(2.0) - anti(0.0);
        assert!((got - want).norm() < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn sine_integral_series() {
        // Si(0.1) = 0.0999444611...
        assert!((sine_integral_small(0.1) - 0.099944461108276).abs() < 1e-14);
    }

    #[test]
    fn disturbance_check_rejects_invalid_filter() {
        let f = FoFilter { lambda: 0.0, beta: 1.0 };
        assert!(matches!(check_disturbance_rejection(&f, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn step_response_preconditions() {
        let f = FoFilter::new(1.0, 1.0).unwrap();
        assert!(step_response(&f, 1.0, 5.0, 500).is_err());
        assert!(step_response(&f, 1.0, 10.0, 499).is_err());
    }

    /// Integer-order margins from complex arithmetic on a uniform grid.
    fn integer_order_margins(lambda: f64, theta: f64) -> (f64, f64) {
        let l = |w: f64| {
            let s = Complex64::new(0.0, w);
            let d = (-s * theta).exp();
            d / (s * lambda + 1.0 - d)
        };
        let root = |mut a: f64, mut b: f64, f: &dyn Fn(f64) -> f64| {
            let fa = f(a) > 0.0;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (f(m) > 0.0) == fa {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let h = 1e-4 / theta;
        let (mut w, mut unwrapped, mut prev) = (h, 0.0, l(h).arg());
        unwrapped += prev;
        let mut wg = None;
        let mut wp = None;
        while wg.is_none() || wp.is_none() {
            let next = w + h;
            let arg = l(next).arg();
            let mut step = arg - prev;
            if step > PI {
                step -= 2.0 * PI;
            } else if step < -PI {
                step += 2.0 * PI;
            }
            let base = unwrapped;
            if wg.is_none() && l(w).norm() > 1.0 && l(next).norm() <= 1.0 {
                wg = Some((root(w, next, &|x| l(x).norm() - 1.0), base));
            }
            if wp.is_none() && base > -PI && base + step <= -PI {
                // arg(-L) passes through zero where arg L crosses -π.
                wp = Some(root(w, next, &|x| (-l(x)).arg()));
            }
            unwrapped += step;
            prev = arg;
            w = next;
        }
        let (wg, base) = wg.unwrap();
        let arg_g = l(wg).arg();
        let arg_g = arg_g + 2.0 * PI * ((base - arg_g) / (2.0 * PI)).round();
        (1.0 / l(wp.unwrap()).norm(), PI + arg_g)
    }

    #[test]
    fn integer_order_margins_agree_with_independent_routine() {
        for (lambda, theta) in [(1.0, 1.0), (2.5, 0.7), (0.6, 3.0)] {
            let f = FoFilter::new(lambda, 1.0).unwrap();
            let m = measure_margins(&f, theta, &FrequencySweep::for_delay(theta)).unwrap();
            let (gm, pm) = integer_order_margins(lambda, theta);
            assert!((m.gain_margin - gm).abs() < 1e-6 * gm, "{} vs {gm}", m.gain_margin);
            assert!((m.phase_margin - pm).abs() < 1e-6, "{} vs {pm}", m.phase_margin);
        }
    }

    #[test]
    fn example_margins() {
        for (lambda, theta) in [(40.46, 40.0), (4.623, 5.0)] {
            let f = FoFilter::new(lambda, 1.043).unwrap();
            let m = measure_margins(&f, theta, &FrequencySweep::for_delay(theta)).unwrap();
            assert!((m.gain_margin - 3.0).abs() < 0.06, "{}", m.gain_margin);
            assert!((m.phase_margin - 1.1345).abs() < 0.01, "{}", m.phase_margin);
            assert!(m.residuals.gain_crossover < 1e-8 && m.residuals.phase_crossover < 1e-8);
        }
    }

    #[test]
    fn example_disturbance_checks_pass() {
        for (lambda, theta) in [(40.46, 40.0), (4.623, 5.0)] {
            let c = check_disturbance_rejection(&FoFilter::new(lambda, 1.043).unwrap(), theta).unwrap();
            assert!(c.passed, "{c:?}");
            assert!(c.probes[2].1 < 1e-3);
        }
    }

    #[test]
    fn integer_order_step_matches_closed_form() {
        let (l0, theta0) = (3.0, 2.0);
        let f = FoFilter::new(l0, 1.0).unwrap();
        let r = step_response(&f, theta0, 40.0, 801).unwrap();
        for (t, y) in r.times.iter().zip(&r.values) {
            let exact = if *t > theta0 { 1.0 - (-(t - theta0) / l0).exp() } else { 0.0 };
            assert!((y - exact).abs() < 1e-3, "t = {t}: {y} vs {exact}");
        }
    }

    #[test]
    fn oracle_grid_guard() {
        let m = ProcessModel::new(1.0, 1.0, 1.0).unwrap();
        let s = RobustnessSpec::new(3.0, 1.1345).unwrap();
        assert!(matches!(brute_force_tune(&m, &s, 100, 200), Err(Error::Domain(_))));
    }
}
