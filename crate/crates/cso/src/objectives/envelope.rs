//! Numerical certification of the two-sided envelope shape constraint
//! `M~ |x*-x|^beta <= |y(x*) - y(x)| <= M |x*-x|^alpha`.

use crate::error::{Error, Result};
use crate::geometry::max_norm_dist_slice;
use crate::objectives::{pow_shape, EnvelopeParams, Objective};

/// How to sample the domain: a Halton low-discrepancy sweep plus points on
/// every branch-boundary shell of the objective.
#[derive(Debug, Clone, Copy)]
pub struct SamplePlan {
    pub points: usize,
    pub include_shells: bool,
    /// Absolute tolerance on both envelope inequalities.
    pub tolerance: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan { points: 100_000, include_shells: true, tolerance: 1e-9 }
    }
}

/// One point where an envelope inequality failed beyond tolerance.
#[derive(Debug, Clone)]
pub struct EnvelopeViolation {
    pub x: Vec<f64>,
    pub dist: f64,
    pub gap: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Outcome of an envelope sweep. An empty violation list is a pass.
#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub checked: usize,
    pub violation_count: usize,
    /// At most the first 32 violations, for diagnosis.
    pub violations: Vec<EnvelopeViolation>,
    /// Smallest slack of `gap <= M dist^alpha + tol` over all points.
    pub min_upper_margin: f64,
    /// Smallest slack of `gap >= M~ dist^beta - tol` over all points.
    pub min_lower_margin: f64,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

const FIRST_PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical-inverse of `i` in the given base.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The first `count` points of the d-dimensional Halton sequence
/// (prime bases, index starting at 1).
pub fn halton_points(d: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(d <= FIRST_PRIMES.len(), "halton supports up to {} dimensions", FIRST_PRIMES.len());
    (1..=count as u64)
        .map(|i| (0..d).map(|l| radical_inverse(i, FIRST_PRIMES[l])).collect())
        .collect()
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Points straddling every branch-boundary shell: for each (center, radius)
/// pair, axis-aligned and diagonal offsets at radius +- {0, 1e-12, 1e-6}.
fn shell_points(obj: &Objective) -> Vec<Vec<f64>> {
    let d = obj.dim();
    let mut out = Vec::new();
    for (center, radius) in obj.critical_shells() {
        for delta in [-1e-6, -1e-12, 0.0, 1e-12, 1e-6] {
            let r = radius + delta;
            if r <= 0.0 {
                continue;
            }
            for axis in 0..d {
                for sign in [-1.0, 1.0] {
                    let mut x = center.clone();
                    x[axis] = clamp01(x[axis] + sign * r);
                    out.push(x);
                }
            }
            // the max-norm "corner" direction
            for sign in [-1.0, 1.0] {
                let x: Vec<f64> = center.iter().map(|&c| clamp01(c + sign * r)).collect();
                out.push(x);
            }
        }
    }
    out
}

/// Sweeps the domain and tests the envelope sandwich at every sampled
/// point. Requires the objective's known maximizer; an empty report means
/// the certificate holds at the plan's tolerance.
pub fn envelope_check(
    obj: &Objective,
    env: &EnvelopeParams,
    plan: &SamplePlan,
) -> Result<EnvelopeReport> {
    if obj.dim() > FIRST_PRIMES.len() {
        return Err(Error::InvalidParameter(format!(
            "envelope_check supports up to {} dimensions",
            FIRST_PRIMES.len()
        )));
    }
    let x_star = obj.x_star().coords();
    let y_star = obj.y_star();
    let tol = plan.tolerance;

    let mut report = EnvelopeReport {
        checked: 0,
        violation_count: 0,
        violations: Vec::new(),
        min_upper_margin: f64::INFINITY,
        min_lower_margin: f64::INFINITY,
    };

    let mut check_point = |x: &[f64]| {
        let dist = max_norm_dist_slice(x_star, x);
        let gap = (y_star - obj.eval_slice(x)).abs();
        let upper = env.m * pow_shape(dist, env.alpha);
        let lower = env.m_tilde * pow_shape(dist, env.beta);
        let upper_margin = upper + tol - gap;
        let lower_margin = gap - (lower - tol);
        report.checked += 1;
        if upper_margin < report.min_upper_margin {
            report.min_upper_margin = upper_margin;
        }
        if lower_margin < report.min_lower_margin {
            report.min_lower_margin = lower_margin;
        }
        if upper_margin < 0.0 || lower_margin < 0.0 {
            report.violation_count += 1;
            if report.violations.len() < 32 {
                report.violations.push(EnvelopeViolation {
                    x: x.to_vec(),
                    dist,
                    gap,
                    lower,
                    upper,
                });
            }
        }
    };

    for x in halton_points(obj.dim(), plan.points) {
        check_point(&x);
    }
    if plan.include_shells {
        for x in shell_points(obj) {
            check_point(&x);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellIndex, HierarchyParams, Point};
    use crate::objectives::{make_test1, make_yc, make_yg, Shape};

    fn plan(points: usize) -> SamplePlan {
        SamplePlan { points, ..SamplePlan::default() }
    }

    #[test]
    fn halton_is_low_discrepancy_deterministic() {
        let a = halton_points(2, 8);
        let b = halton_points(2, 8);
        assert_eq!(a, b);
        assert_eq!(a[0], vec![0.5, 1.0 / 3.0]);
        for p in &a {
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn yg_instance_passes_envelope() {
        let env = super::super::tests::fig3_env();
        let c = Point::new(vec![0.45]).unwrap();
        let c0 = Point::new(vec![0.5]).unwrap();
        let y = make_yg(&c, &c0, 0.01, &env).unwrap();
        let report = envelope_check(&y, &env, &plan(100_000)).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations.first());
    }

    #[test]
    fn yc_instance_passes_envelope() {
        let env = super::super::tests::yc_env();
        let params = HierarchyParams::new(1, 2).unwrap();
        let y = make_yc(&CellIndex::new(vec![7], 2), &params, &env).unwrap();
        let report = envelope_check(&y, &env, &plan(100_000)).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations.first());
    }

    #[test]
    fn test1_passes_envelope_with_dimension_scaled_m() {
        for d in 1..=3usize {
            let y = make_test1(d, None).unwrap();
            let env = *y.envelope().unwrap();
            let report = envelope_check(&y, &env, &plan(20_000)).unwrap();
            assert!(report.passed(), "d={d}: {:?}", report.violations.first());
        }
    }

    #[test]
    fn constant_function_fails_lower_envelope_everywhere() {
        // a plateau around a claimed unique optimum violates the lower
        // envelope at every sampled point away from it
        let env = super::super::tests::fig3_env();
        let c0 = Point::new(vec![0.5]).unwrap();
        let fake = {
            let mut b = crate::objectives::make_yb(&c0, 0.01, &env).unwrap();
            // pretend the plateau center were a unique optimum
            b = b.with_label("negative_control");
            b
        };
        // restrict the claim to a tight neighborhood where y is constant 0
        let claimed = EnvelopeParams::new(1.0, 2.0, 1.0, 1.0 / 512.0).unwrap();
        let report = envelope_check(&fake, &claimed, &plan(2_000)).unwrap();
        assert!(!report.passed());
        // every sampled point with positive distance inside the plateau
        // violates; the count must be substantial
        assert!(report.violation_count > 100);
    }

    #[test]
    fn shell_points_cover_branch_boundaries() {
        let env = super::super::tests::fig3_env();
        let c = Point::new(vec![0.45]).unwrap();
        let c0 = Point::new(vec![0.5]).unwrap();
        let y = make_yg(&c, &c0, 0.01, &env).unwrap();
        let pts = shell_points(&y);
        assert!(!pts.is_empty());
        match &y.shape {
            Shape::PeakedGrid { zeta, .. } => {
                // some point sits exactly on the cusp shell
                assert!(pts
                    .iter()
                    .any(|p| (max_norm_dist_slice(p, c.coords()) - zeta).abs() < 1e-15));
            }
            _ => unreachable!(),
        }
    }
}
