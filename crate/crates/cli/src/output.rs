use std::f64::consts::PI;
use std::fmt::Write as _;

use fo_imc::model::open_loop_response;
use fo_imc::solver::sample_curves;
use fo_imc::verification::{DisturbanceCheck, StepResponse};
use fo_imc::{FrequencySweep, ProcessModel, RobustnessSpec, TuningResult};

use crate::config::{Gain, Phase, RunConfig};

/// Round to four significant figures, the precision of the reported designs.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (3 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn echo_gain(g: Gain) -> String {
    let a = g.absolute();
    match g {
        Gain::Absolute(_) => format!("{a:?} abs ({:.4} dB)", 20.0 * a.log10()),
        Gain::Decibel(db) => format!("{db:?} dB (A_m = {a:?})"),
    }
}

fn echo_phase(p: Phase) -> String {
    let r = p.radians();
    match p {
        Phase::Degrees(d) => format!("{d:?} deg ({r:?} rad)"),
        Phase::Radians(_) => format!("{r:?} rad ({:.4} deg)", r * 180.0 / PI),
    }
}

pub fn report(
    config: &RunConfig,
    spec: &RobustnessSpec,
    result: &TuningResult,
    disturbance: &DisturbanceCheck,
    verbose: bool,
) -> String {
    let m = &config.model;
    let set = &result.feasible_set;
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "Fractional-order IMC tuning report").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "Process      k = {:?}, tau = {:?}, theta = {:?}", m.k, m.tau, m.theta).unwrap();
    writeln!(w, "Gain margin  {}", echo_gain(config.gain)).unwrap();
    writeln!(w, "Phase margin {}", echo_phase(config.phase)).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "Feasible beta set (case {})", set.case).unwrap();
    for iv in &set.intervals {
        writeln!(w, "  ({:.6}, {:.6})", iv.lo, iv.hi).unwrap();
    }
    for note in &set.notes {
        writeln!(w, "  note: {note}").unwrap();
    }
    writeln!(w).unwrap();
    let p = &result.params;
    writeln!(w, "Design ({} gain-crossover root)", result.root).unwrap();
    writeln!(w, "  beta*    = {}  ({:?})", sig4(p.beta), p.beta).unwrap();
    writeln!(w, "  lambda*  = {}  ({:?})", sig4(p.lambda), p.lambda).unwrap();
    writeln!(w, "  omega_g* = {}  ({:?})", sig4(result.omega_g), result.omega_g).unwrap();
    writeln!(w, "  omega_p* = {}  ({:?})", sig4(result.omega_p), result.omega_p).unwrap();
    writeln!(w).unwrap();
    let mm = &result.margins;
    writeln!(w, "Measured margins").unwrap();
    writeln!(
        w,
        "  A_m   = {:.6} (requested {:.6}) at omega = {:.6}",
        mm.gain_margin, spec.gain_margin, mm.omega_p
    )
    .unwrap();
    writeln!(
        w,
        "  phi_m = {:.6} rad (requested {:.6}) at omega = {:.6}",
        mm.phase_margin, spec.phase_margin, mm.omega_g
    )
    .unwrap();
    match result.margin_mismatch(spec) {
        Some(msg) => writeln!(w, "  MISMATCH: {msg}").unwrap(),
        None => writeln!(w, "  within tolerance").unwrap(),
    }
    writeln!(w).unwrap();
    writeln!(w, "Disturbance rejection: {}", if disturbance.passed { "pass" } else { "FAIL" }).unwrap();
    for (omega, mag) in &disturbance.probes {
        writeln!(w, "  |eps(j{omega:.3e})| = {mag:.3e}").unwrap();
    }
    writeln!(w).unwrap();
    writeln!(w, "IMC controller").unwrap();
    writeln!(w, "  {}", result.imc_controller(m)).unwrap();
    if verbose && !result.diagnostics.is_empty() {
        writeln!(w).unwrap();
        writeln!(w, "Diagnostics").unwrap();
        for d in &result.diagnostics {
            writeln!(w, "  {d}").unwrap();
        }
    }
    out
}

pub fn curves_csv(spec: &RobustnessSpec, model: &ProcessModel, result: &TuningResult, points: usize) -> String {
    let mut out = String::from("beta,omega_g,omega_p,lambda_a,lambda_b\n");
    for s in sample_curves(spec, model.theta, &result.feasible_set, points) {
        writeln!(out, "{:?},{:?},{:?},{:?},{:?}", s.beta, s.omega_g, s.omega_p, s.lambda_a, s.lambda_b).unwrap();
    }
    out
}

pub fn bode_csv(model: &ProcessModel, result: &TuningResult) -> fo_imc::Result<String> {
    let omegas = FrequencySweep::for_delay(model.theta).omegas();
    let response = open_loop_response(&result.params, model.theta, &omegas)?;
    let mut out = String::from("omega,mag_db,phase_deg\n");
    let mut previous: Option<f64> = None;
    for r in response {
        let mut phase = r.value.arg();
        if let Some(prev) = previous {
            phase -= 2.0 * PI * ((phase - prev) / (2.0 * PI)).round();
        }
        previous = Some(phase);
        writeln!(out, "{:?},{:?},{:?}", r.omega, 20.0 * r.value.norm().log10(), phase * 180.0 / PI).unwrap();
    }
    Ok(out)
}

pub fn step_csv(step: &StepResponse) -> String {
    let mut out = String::from("t,y\n");
    for (t, y) in step.times.iter().zip(&step.values) {
        writeln!(out, "{t:?},{y:?}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::sig4;

    #[test]
    fn four_significant_figures() {
        assert_eq!(sig4(1.043102), "1.043");
        assert_eq!(sig4(40.4496), "40.45");
        assert_eq!(sig4(0.013911), "0.01391");
        assert_eq!(sig4(4622.7), "4623");
    }
}
