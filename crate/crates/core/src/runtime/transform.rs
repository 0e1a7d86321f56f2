//! Bijections from constrained parameter space to the real line, with
//! log-Jacobian corrections.

use crate::ast::TypeDecl;
use crate::runtime::scalar::Scalar;

/// Per-component unconstraining transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    Identity,
    /// `theta = exp(u) + lower`, log-Jacobian `u`.
    LowerBound(f64),
    /// `theta = lower + (upper - lower) * sigmoid(u)`,
    /// log-Jacobian `ln(upper - lower) + ln sigmoid(u) + ln sigmoid(-u)`.
    Interval(f64, f64),
}

impl Constraint {
    pub fn from_type(ty: &TypeDecl) -> Option<Constraint> {
        match (ty.lower, ty.upper) {
            (None, None) => Some(Constraint::Identity),
            (Some(lo), None) => Some(Constraint::LowerBound(lo)),
            (Some(lo), Some(hi)) => Some(Constraint::Interval(lo, hi)),
            // upper-only bounds are not supported for sampled parameters
            (None, Some(_)) => None,
        }
    }

    /// Maps an unconstrained value to the constrained scale and returns
    /// the log-Jacobian of the map.
    pub fn to_constrained<T: Scalar>(&self, u: &T) -> (T, T) {
        match self {
            Constraint::Identity => (u.clone(), T::from_f64(0.0)),
            Constraint::LowerBound(lo) => {
                let theta = u.exp().add(&T::from_f64(*lo));
                (theta, u.clone())
            }
            Constraint::Interval(lo, hi) => {
                let width = hi - lo;
                // sigmoid(u) = 1 / (1 + exp(-u))
                let one = T::from_f64(1.0);
                let sig = one.div(&one.add(&u.neg().exp()));
                let theta = T::from_f64(*lo).add(&T::from_f64(width).mul(&sig));
                let log_jac = T::from_f64(width.ln())
                    .add(&sig.ln())
                    .add(&one.sub(&sig).ln());
                (theta, log_jac)
            }
        }
    }

    /// Maps a constrained value back to the real line.
    pub fn to_unconstrained(&self, theta: f64) -> f64 {
        match self {
            Constraint::Identity => theta,
            Constraint::LowerBound(lo) => (theta - lo).ln(),
            Constraint::Interval(lo, hi) => {
                let p = (theta - lo) / (hi - lo);
                (p / (1.0 - p)).ln()
            }
        }
    }
}

/// The transforms for a flattened parameter vector, one tag per scalar
/// component.
#[derive(Debug, Clone, Default)]
pub struct UnconstrainingMap {
    pub components: Vec<Constraint>,
}

impl UnconstrainingMap {
    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn transforms_round_trip() {
        for (c, theta) in [
            (Constraint::Identity, -1.3),
            (Constraint::LowerBound(0.5), 2.25),
            (Constraint::Interval(-1.0, 4.0), 0.75),
        ] {
            let u = c.to_unconstrained(theta);
            let (back, _) = c.to_constrained(&u);
            assert_relative_eq!(back, theta, epsilon = 1e-12);
        }
    }

    #[test]
    fn lower_bound_jacobian_at_zero() {
        let (theta, lj) = Constraint::LowerBound(0.0).to_constrained(&0.0);
        assert_relative_eq!(theta, 1.0, epsilon = 1e-15);
        assert_relative_eq!(lj, 0.0, epsilon = 1e-15);
    }

    /// Change of variables: if u ~ N(0,1) and theta = exp(u), the density
    /// of theta is exp(normal_lpdf(u(theta)) - logJ(u(theta))). Integrating
    /// that over a theta grid must give one.
    #[test]
    fn exp_transform_preserves_total_mass() {
        let c = Constraint::LowerBound(0.0);
        // geometric grid: the pushforward is peaked near 0 with a long
        // right tail
        let n = 10_000usize;
        let (a, b) = (1e-5f64, 2.0e4f64);
        let ratio = (b / a).powf(1.0 / n as f64);
        let density = |theta: f64| {
            let u = c.to_unconstrained(theta);
            let (_, lj) = c.to_constrained(&u);
            let lp = crate::runtime::dist::lpdf_real(crate::ast::DistName::Normal, &u, &[0.0, 1.0])
                .unwrap();
            (lp - lj).exp()
        };
        let mut total = 0.0;
        let mut x = a;
        let mut fx = density(x);
        for _ in 0..n {
            let x1 = x * ratio;
            let f1 = density(x1);
            total += 0.5 * (fx + f1) * (x1 - x);
            x = x1;
            fx = f1;
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-6);
    }

    /// Same check for the interval transform: u ~ N(0,1) pushed through
    /// the logistic map onto (lo, hi) integrates to one.
    #[test]
    fn interval_transform_preserves_total_mass() {
        let c = Constraint::Interval(-2.0, 5.0);
        let n = 10_000;
        let (a, b) = (-2.0 + 1e-9, 5.0 - 1e-9);
        let h = (b - a) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let theta = a + i as f64 * h;
            let u = c.to_unconstrained(theta);
            let (_, lj) = c.to_constrained(&u);
            let lp = crate::runtime::dist::lpdf_real(crate::ast::DistName::Normal, &u, &[0.0, 1.0])
                .unwrap();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * (lp - lj).exp();
        }
        assert_relative_eq!(total * h, 1.0, epsilon = 1e-6);
    }
}
