//! Boundary functions of the fractional order and the set of orders for which
//! the closed-form gain crossover is real and positive.
//!
//! Every boundary is a function of the phase margin alone. The resulting set
//! takes one of four shapes depending on where `φ_m` falls:
//!
//! | case | `φ_m`                  | intervals                                   |
//! |------|------------------------|---------------------------------------------|
//! | A    | `(0, 0.9273]`          | `(β_ωgℜ2, β_y2)`                            |
//! | B    | `(0.9273, π/3)`        | `(β_x1, β_ωgℜ1) ∪ (β_ωgℜ2, β_y2)`           |
//! | C    | `[π/3, π/2]`           | `(β_x1, β_y2)`                              |
//! | D    | `(π/2, π)`             | `(β_x1, β_y1)`                              |

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::validate_phase_margin;

/// Phase margin separating cases A and B.
pub const CASE_AB_BOUNDARY: f64 = 0.9273;

/// Guard band applied to open interval membership.
pub const MEMBERSHIP_GUARD: f64 = 1e-12;

fn check_phi(phi_m: f64) -> Result<()> {
    validate_phase_margin(phi_m)
}

/// `(π - φ_m) / π`, the lower edge of the positive gain-crossover region.
pub fn beta_x1(phi_m: f64) -> Result<f64> {
    check_phi(phi_m)?;
    Ok((PI - phi_m) / PI)
}

/// `(2π - φ_m) / π`.
pub fn beta_x2(phi_m: f64) -> Result<f64> {
    check_phi(phi_m)?;
    Ok((2.0 * PI - phi_m) / PI)
}

/// `atan(-sin φ_m / (1 - 2 sin²(φ_m/2)))`, shared by `β_y1` and `β_y2`.
fn y_angle(phi_m: f64) -> Result<f64> {
    check_phi(phi_m)?;
    if phi_m == FRAC_PI_2 {
        return Err(Error::Branch(
            "phi_m = pi/2 makes 1 - 2 sin^2(phi_m/2) vanish; use the feasible set, which takes the \
             continuous limit of the upper bound"
                .into(),
        ));
    }
    let half = (0.5 * phi_m).sin();
    Ok((-phi_m.sin() / (1.0 - 2.0 * half * half)).atan())
}

/// Upper bound of the feasible set for `φ_m ∈ (π/2, π)`.
pub fn beta_y1(phi_m: f64) -> Result<f64> {
    Ok(2.0 / PI * y_angle(phi_m)?)
}

/// Upper bound of the feasible set for `φ_m ∈ (0, π/2)`.
pub fn beta_y2(phi_m: f64) -> Result<f64> {
    Ok(2.0 / PI * (PI + y_angle(phi_m)?))
}

/// `π/2 - asin(2 sin(φ_m/2))`, evaluated without cancellation near
/// `φ_m = π/3` where the arcsine argument reaches 1.
fn realness_offset(phi_m: f64) -> Result<f64> {
    check_phi(phi_m)?;
    if phi_m > FRAC_PI_3 {
        return Err(Error::NotApplicable(format!(
            "phi_m = {phi_m} >= pi/3: the gain crossover is real for every beta in (0, 2)"
        )));
    }
    // 1 - 2 sin(φ/2) = 2 (sin(π/6) - sin(φ/2)) as a product.
    let half = 0.5 * phi_m;
    let gap = 4.0 * (0.5 * (FRAC_PI_6 + half)).cos() * (0.5 * (FRAC_PI_6 - half)).sin();
    Ok(2.0 * (0.5 * gap.max(0.0)).sqrt().asin())
}

/// `(2/π) asin(2 sin(φ_m/2))`: below it the gain crossover is real. Only
/// defined for `φ_m ≤ π/3`.
pub fn beta_wg_re1(phi_m: f64) -> Result<f64> {
    Ok(1.0 - 2.0 / PI * realness_offset(phi_m)?)
}

/// `(2/π)(π - asin(2 sin(φ_m/2)))`: above it the gain crossover is real.
pub fn beta_wg_re2(phi_m: f64) -> Result<f64> {
    Ok(1.0 + 2.0 / PI * realness_offset(phi_m)?)
}

/// Shape of the feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibleCase {
    A,
    B,
    C,
    D,
}

impl fmt::Display for FeasibleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeasibleCase::A => "A",
            FeasibleCase::B => "B",
            FeasibleCase::C => "C",
            FeasibleCase::D => "D",
        };
        f.write_str(s)
    }
}

/// Open interval `(lo, hi)` of fractional orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl BetaInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, beta: f64) -> bool {
        beta > self.lo + MEMBERSHIP_GUARD && beta < self.hi - MEMBERSHIP_GUARD
    }

    /// `n` equally spaced interior points; the open endpoints are excluded.
    pub fn interior_grid(&self, n: usize) -> Vec<f64> {
        let step = self.width() / (n + 1) as f64;
        (1..=n).map(|i| self.lo + step * i as f64).collect()
    }
}

impl fmt::Display for BetaInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.lo, self.hi)
    }
}

/// Orders `β` for which the gain crossover is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFeasibleSet {
    pub phi_m: f64,
    /// Sorted, disjoint, at most two.
    pub intervals: Vec<BetaInterval>,
    pub case: FeasibleCase,
    pub notes: Vec<String>,
}

impl BetaFeasibleSet {
    pub fn contains(&self, beta: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(beta))
    }

    /// Smallest interval covering every feasible order.
    pub fn hull(&self) -> BetaInterval {
        BetaInterval { lo: self.intervals[0].lo, hi: self.intervals[self.intervals.len() - 1].hi }
    }

    pub fn total_width(&self) -> f64 {
        self.intervals.iter().map(BetaInterval::width).sum()
    }
}

impl fmt::Display for BetaFeasibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.intervals.iter().map(ToString::to_string).collect();
        write!(f, "case {}: {}", self.case, parts.join(" U "))
    }
}

/// Assemble the feasible order set for a phase margin.
pub fn feasible_beta_set(phi_m: f64) -> Result<BetaFeasibleSet> {
    check_phi(phi_m).map_err(|_| {
        Error::InfeasibleSpec(format!(
            "phase margin must lie in (0, pi) rad for a feasible filter order, got {phi_m}"
        ))
    })?;
    let x1 = beta_x1(phi_m)?;
    let mut notes = Vec::new();

    let (case, raw) = if phi_m <= CASE_AB_BOUNDARY {
        (FeasibleCase::A, vec![(beta_wg_re2(phi_m)?, beta_y2(phi_m)?)])
    } else if phi_m < FRAC_PI_3 {
        (
            FeasibleCase::B,
            vec![(x1, beta_wg_re1(phi_m)?), (beta_wg_re2(phi_m)?, beta_y2(phi_m)?)],
        )
    } else if phi_m < FRAC_PI_2 {
        (FeasibleCase::C, vec![(x1, beta_y2(phi_m)?)])
    } else if phi_m == FRAC_PI_2 {
        notes.push(
            "phi_m = pi/2: beta_y2 is singular here, its continuous limit 1 is used as the upper bound"
                .to_string(),
        );
        (FeasibleCase::C, vec![(x1, 1.0)])
    } else {
        (FeasibleCase::D, vec![(x1, beta_y1(phi_m)?)])
    };

    let mut intervals = Vec::with_capacity(raw.len());
    for (lo, hi) in raw {
        let (lo, hi) = (lo.max(0.0), hi.min(2.0));
        if hi - lo > 2.0 * MEMBERSHIP_GUARD {
            intervals.push(BetaInterval { lo, hi });
        } else {
            notes.push(format!("degenerate interval ({lo}, {hi}) dropped"));
        }
    }
    if intervals.is_empty() {
        return Err(Error::EmptyFeasibleSet { phi_m });
    }
    Ok(BetaFeasibleSet { phi_m, intervals, case, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI_EX: f64 = 1.1345;

    #[test]
    fn x1_values() {
        assert!((beta_x1(PHI_EX).unwrap() - 0.6389).abs() < 1e-4);
        assert_eq!(beta_x1(FRAC_PI_2).unwrap(), 0.5);
        assert!(beta_x1(PI - 1e-12).unwrap() < 1e-12);
        assert!(beta_x1(0.0).is_err());
        assert!(beta_x1(PI).is_err());
    }

    #[test]
    fn x2_values() {
        assert_eq!(beta_x2(FRAC_PI_2).unwrap(), 1.5);
        assert!((beta_x2(PHI_EX).unwrap() - (2.0 * PI - PHI_EX) / PI).abs() < 1e-15);
        assert!((beta_x2(PHI_EX).unwrap() - 1.6389).abs() < 1e-4);
        assert!((beta_x2(PI - 1e-12).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn y1_values() {
        assert!((beta_y1(PI / 3.0).unwrap() + 2.0 / 3.0).abs() < 1e-12);
        assert!((beta_y1(2.0 * PI / 3.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(beta_y1(1e-9).unwrap().abs() < 1e-8);
        assert!(matches!(beta_y1(FRAC_PI_2), Err(Error::Branch(_))));
    }

    #[test]
    fn y2_values() {
        assert!((beta_y2(PHI_EX).unwrap() - 1.2778).abs() < 1e-4);
        assert!((beta_y2(PI / 3.0).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((beta_y2(1e-9).unwrap() - 2.0).abs() < 1e-8);
        assert!(matches!(beta_y2(FRAC_PI_2), Err(Error::Branch(_))));
    }

    #[test]
    fn realness_bounds() {
        assert!((beta_wg_re1(FRAC_PI_3).unwrap() - 1.0).abs() < 1e-9);
        assert!((beta_wg_re2(FRAC_PI_3).unwrap() - 1.0).abs() < 1e-9);
        assert!(beta_wg_re1(1e-9).unwrap() < 1e-8);
        assert!((beta_wg_re2(1e-9).unwrap() - 2.0).abs() < 1e-8);
        assert!(matches!(beta_wg_re1(1.2), Err(Error::NotApplicable(_))));
        assert!(matches!(beta_wg_re2(2.0), Err(Error::NotApplicable(_))));
    }

    /// Solve `sin(βπ/2) = target` for `β ∈ (0, 1]` by bisection.
    fn bisect_realness(target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (mid * FRAC_PI_2).sin() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn realness_bound_matches_bisection() {
        let oracle = bisect_realness(2.0 * 0.25_f64.sin());
        assert!((oracle - 0.32952).abs() < 1e-5);
        assert!((beta_wg_re1(0.5).unwrap() - oracle).abs() < 1e-12);
        assert!((beta_wg_re2(0.5).unwrap() - (2.0 - oracle)).abs() < 1e-12);
        assert!((beta_wg_re2(0.5).unwrap() - 1.67048).abs() < 1e-5);
    }

    #[test]
    fn case_boundary_constant_rederived() {
        // β_x1 = β_ωgℜ1 where (π - φ)/π = (2/π) asin(2 sin(φ/2)).
        let f = |phi: f64| (2.0 / PI) * (2.0 * (0.5 * phi).sin()).asin() - (PI - phi) / PI;
        let (mut lo, mut hi) = (0.5_f64, 1.0_f64);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - CASE_AB_BOUNDARY).abs() < 5e-5, "root {root}");
        // cos(φ/2) = 2 sin(φ/2) gives the same root in closed form.
        assert!((root - 2.0 * 0.5_f64.atan()).abs() < 1e-12);
    }

    #[test]
    fn example_phase_margin_is_case_c() {
        let set = feasible_beta_set(PHI_EX).unwrap();
        assert_eq!(set.case, FeasibleCase::C);
        assert_eq!(set.intervals.len(), 1);
        assert!((set.intervals[0].lo - 0.6389).abs() < 1e-4);
        assert!((set.intervals[0].hi - 1.2778).abs() < 1e-4);
    }

    #[test]
    fn small_phase_margin_is_case_a() {
        let set = feasible_beta_set(0.5).unwrap();
        assert_eq!(set.case, FeasibleCase::A);
        assert_eq!(set.intervals.len(), 1);
        let iv = set.intervals[0];
        assert!((iv.lo - 1.67048).abs() < 1e-5);
        assert!((iv.hi - (2.0 - 1.0 / PI)).abs() < 1e-12);
        assert!((iv.hi - 1.68169).abs() < 1e-5);
        assert!(iv.width() > 0.0);
    }

    #[test]
    fn case_b_has_two_intervals() {
        let set = feasible_beta_set(1.0).unwrap();
        assert_eq!(set.case, FeasibleCase::B);
        assert_eq!(set.intervals.len(), 2);
        let (a, b) = (set.intervals[0], set.intervals[1]);
        assert!(a.lo < a.hi && a.hi < b.lo && b.lo < b.hi);
        assert!((a.lo - beta_x1(1.0).unwrap()).abs() < 1e-15);
        assert!((a.hi - beta_wg_re1(1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn large_phase_margin_is_case_d() {
        let set = feasible_beta_set(2.0).unwrap();
        assert_eq!(set.case, FeasibleCase::D);
        let iv = set.intervals[0];
        assert!((iv.lo - (PI - 2.0) / PI).abs() < 1e-12);
        assert!((iv.hi - 2.0 / PI * (PI - 2.0)).abs() < 1e-12);
        assert!((iv.lo - 0.36338).abs() < 1e-5);
        assert!((iv.hi - 0.72676).abs() < 1e-5);
    }

    #[test]
    fn right_angle_uses_continuous_limit() {
        let set = feasible_beta_set(FRAC_PI_2).unwrap();
        assert_eq!(set.case, FeasibleCase::C);
        assert_eq!(set.intervals, vec![BetaInterval { lo: 0.5, hi: 1.0 }]);
        assert!(!set.notes.is_empty());
        // Neighbours on either side approach the same bounds.
        let below = feasible_beta_set(FRAC_PI_2 - 1e-9).unwrap();
        let above = feasible_beta_set(FRAC_PI_2 + 1e-9).unwrap();
        assert!((below.intervals[0].hi - 1.0).abs() < 1e-8);
        assert!((above.intervals[0].hi - 1.0).abs() < 1e-8);
    }

    #[test]
    fn out_of_range_phase_margin() {
        for phi in [0.0, -0.1, PI, 4.0, f64::NAN] {
            match feasible_beta_set(phi) {
                Err(Error::InfeasibleSpec(msg)) => assert!(msg.contains("(0, pi)")),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn interior_grid_excludes_endpoints() {
        let iv = BetaInterval { lo: 0.5, hi: 1.0 };
        let g = iv.interior_grid(4);
        assert_eq!(g.len(), 4);
        for (got, want) in g.iter().zip([0.6, 0.7, 0.8, 0.9]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(g.iter().all(|&b| iv.contains(b)));
        assert!(!iv.contains(0.5) && !iv.contains(1.0));
    }
}
