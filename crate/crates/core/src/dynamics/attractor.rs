//! Fixed points of the second-order membrane equation.
//!
//! With `U` and the post-sigmoid current `I` frozen, `dV/dt = V^2 - V - U + I`
//! has roots `1/2 +- sqrt(eps)` where `eps = U - I + 1/4`. The lower root
//! attracts, the upper one repels. For `eps < 0` there is no real root and
//! `V` escapes to `+inf`.

use super::{LifParams, SecondOrderParams};

/// `|eps|` below this is treated as the tangent (single root) case.
pub const EPSILON_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    VirtualInfinity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub value: f64,
    pub stability: Stability,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorReport {
    pub epsilon: f64,
    pub fixed_points: Vec<FixedPoint>,
    /// Fixed point of the recovery equation evaluated at the attracting
    /// membrane potential. `None` when `theta_a == 0` (frozen recovery) or
    /// when `V` has no real attractor.
    pub u_fixed_point: Option<FixedPoint>,
}

impl AttractorReport {
    /// The attracting membrane potential, if one exists.
    pub fn attractor(&self) -> Option<f64> {
        self.fixed_points
            .iter()
            .find(|p| p.stability == Stability::Stable)
            .map(|p| p.value)
    }

    pub fn is_virtual(&self) -> bool {
        self.fixed_points
            .iter()
            .any(|p| p.stability == Stability::VirtualInfinity)
    }
}

pub fn analyze_attractors(params: &SecondOrderParams, u: f64, i: f64) -> AttractorReport {
    let epsilon = u - i + 0.25;
    let fixed_points = if epsilon.abs() <= EPSILON_TOLERANCE {
        vec![FixedPoint {
            value: 0.5,
            stability: Stability::Stable,
        }]
    } else if epsilon > 0.0 {
        let r = epsilon.sqrt();
        vec![
            FixedPoint {
                value: 0.5 - r,
                stability: Stability::Stable,
            },
            FixedPoint {
                value: 0.5 + r,
                stability: Stability::Unstable,
            },
        ]
    } else {
        vec![FixedPoint {
            value: f64::INFINITY,
            stability: Stability::VirtualInfinity,
        }]
    };

    // dU/dt = theta_a (theta_b V - U): the linearisation has slope -theta_a,
    // so the nullcline attracts for theta_a > 0 and repels for theta_a < 0.
    let v_star = fixed_points
        .iter()
        .find(|p| p.stability == Stability::Stable)
        .map(|p| p.value);
    let u_fixed_point = match v_star {
        Some(v) if params.theta_a != 0.0 => Some(FixedPoint {
            value: params.theta_b * v,
            stability: if params.theta_a > 0.0 {
                Stability::Stable
            } else {
                Stability::Unstable
            },
        }),
        _ => None,
    };

    AttractorReport {
        epsilon,
        fixed_points,
        u_fixed_point,
    }
}

/// Resting point `I / g` of a LIF neuron under constant current.
pub fn lif_attractor(params: &LifParams, i: f64) -> f64 {
    i / params.g
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::dynamics::DynamicParams;

    fn frozen(theta_b: f64) -> SecondOrderParams {
        SecondOrderParams::new(0.0, theta_b, -0.05, 0.05)
    }

    #[test]
    fn tangent_case_has_single_point() {
        let r = analyze_attractors(&frozen(0.2), 0.25, 0.5);
        assert_eq!(r.epsilon, 0.0);
        assert_eq!(r.fixed_points.len(), 1);
        assert_eq!(r.attractor(), Some(0.5));
        assert!(r.u_fixed_point.is_none());
    }

    #[test]
    fn negative_discriminant_is_virtual() {
        let r = analyze_attractors(&frozen(0.2), 0.0, 1.0);
        assert_abs_diff_eq!(r.epsilon, -0.75, epsilon = 1e-15);
        assert_eq!(r.fixed_points.len(), 1);
        assert!(r.is_virtual());
        assert!(r.attractor().is_none());
    }

    #[test]
    fn two_roots_and_simulated_convergence() {
        let r = analyze_attractors(&frozen(0.2), 0.75, 0.5);
        assert_abs_diff_eq!(r.epsilon, 0.5, epsilon = 1e-15);
        let lo = 0.5 - 0.5f64.sqrt();
        let hi = 0.5 + 0.5f64.sqrt();
        assert_eq!(r.fixed_points[0].stability, Stability::Stable);
        assert_abs_diff_eq!(r.fixed_points[0].value, lo, epsilon = 1e-15);
        assert_eq!(r.fixed_points[1].stability, Stability::Unstable);
        assert_abs_diff_eq!(r.fixed_points[1].value, hi, epsilon = 1e-15);

        // simulate with frozen U from either side of the stable root
        let p = DynamicParams::SecondOrder(SecondOrderParams {
            v_th: 10.0,
            ..frozen(0.2)
        });
        for v0 in [lo - 0.3, lo + 0.3, hi - 0.01] {
            let (mut v, mut u) = (v0, 0.75);
            for _ in 0..20_000 {
                (v, u) = p.integrate(v, u, 0.5, 0.01);
            }
            assert_abs_diff_eq!(v, lo, epsilon = 1e-9);
        }
        // just above the repeller escapes upward
        let (mut v, mut u) = (hi + 0.01, 0.75);
        // the quadratic term blows up in finite time, so stop early
        for _ in 0..300 {
            (v, u) = p.integrate(v, u, 0.5, 0.01);
        }
        assert!(v > hi + 0.1, "{v}");
    }

    #[test]
    fn recovery_fixed_point_follows_linear_analysis() {
        let r = analyze_attractors(&SecondOrderParams::FS, 0.75, 0.5);
        let u = r.u_fixed_point.unwrap();
        assert_eq!(u.stability, Stability::Stable);
        assert_abs_diff_eq!(u.value, 0.219 * r.attractor().unwrap(), epsilon = 1e-15);

        let r = analyze_attractors(&SecondOrderParams::SDS, 0.75, 0.5);
        assert_eq!(r.u_fixed_point.unwrap().stability, Stability::Unstable);
    }
}
