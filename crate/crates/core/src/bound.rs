//! Upper bound on the excess target error of the alpha-error minimizer:
//!
//! `g(alpha) = 2B sqrt(alpha^2 / beta + (1 - alpha)^2 / (1 - beta)) + 2 (1 - alpha) A`
//!
//! `A` measures source/target divergence and `B` classifier complexity. Both
//! are user inputs; nothing here estimates them from data.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::reweight::check_alpha;
use crate::search::{maximize, FnObjective};

/// Second differences above this floor count as convex.
pub const CONVEXITY_FLOOR: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

impl BoundParams {
    pub fn new(beta: f64, a: f64, b: f64) -> Result<Self> {
        let p = Self { beta, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return validation(format!("beta {} not in (0,1)", self.beta));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) || !(self.b >= 0.0 && self.b.is_finite()) {
            return validation("A and B must be finite and non-negative");
        }
        Ok(())
    }

    fn eval(&self, alpha: f64) -> f64 {
        let radical = (alpha * alpha / self.beta + (1.0 - alpha) * (1.0 - alpha) / (1.0 - self.beta)).sqrt();
        2.0 * self.b * radical + 2.0 * (1.0 - alpha) * self.a
    }
}

pub fn g_alpha(alpha: f64, p: &BoundParams) -> Result<f64> {
    p.validate()?;
    check_alpha(alpha)?;
    Ok(p.eval(alpha))
}

/// Minimizer of `g` over `[0, 1]` within `tol`, by the same bracket +
/// golden-section search used for alpha (run on `-g`).
pub fn minimize_g(p: &BoundParams, tol: f64) -> Result<f64> {
    p.validate()?;
    if !(tol > 0.0) {
        return validation("tol must be positive");
    }
    let params = *p;
    let mut obj = FnObjective::new(move |a| -params.eval(a)).with_tie_eps(0.0);
    Ok(maximize(&mut obj, tol.min(0.5))?.alpha)
}

/// True iff `g(a - h) - 2 g(a) + g(a + h) >= -1e-9` at every interior grid
/// point `a = i h`.
pub fn convexity_check(p: &BoundParams, grid_step: f64) -> Result<bool> {
    p.validate()?;
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return validation(format!("grid step {grid_step} not in (0, 0.1]"));
    }
    let n = (1.0 / grid_step + 1e-9).floor() as usize;
    Ok((1..n).all(|i| {
        let a = i as f64 * grid_step;
        p.eval(a - grid_step) - 2.0 * p.eval(a) + p.eval(a + grid_step) >= CONVEXITY_FLOOR
    }))
}

/// `(alpha, g(alpha))` on `points + 1` evenly spaced alphas.
pub fn g_table(p: &BoundParams, points: usize) -> Result<Vec<(f64, f64)>> {
    p.validate()?;
    if points < 1 {
        return validation("need at least one interval");
    }
    Ok((0..=points)
        .map(|i| {
            let a = i as f64 / points as f64;
            (a, p.eval(a))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_points() {
        let p = BoundParams::new(0.5, 0.1, 1.0).unwrap();
        assert_relative_eq!(g_alpha(0.5, &p).unwrap(), 2.1, max_relative = 1e-15);
        let p = BoundParams::new(0.25, 7.0, 1.0).unwrap();
        assert_eq!(g_alpha(1.0, &p).unwrap(), 4.0);
        let p = BoundParams::new(0.5, 0.5, 1.0).unwrap();
        assert_relative_eq!(g_alpha(0.0, &p).unwrap(), 3.8284271247461903, max_relative = 1e-15);
    }

    #[test]
    fn rejects_bad_beta() {
        assert!(BoundParams::new(0.0, 1.0, 1.0).is_err());
        assert!(BoundParams::new(1.0, 1.0, 1.0).is_err());
        let p = BoundParams { beta: 1.5, a: 0.0, b: 1.0 };
        assert!(g_alpha(0.5, &p).is_err());
    }

    #[test]
    fn minimizer_cases() {
        let p = BoundParams::new(0.3, 0.0, 1.0).unwrap();
        assert!((minimize_g(&p, 1e-6).unwrap() - 0.3).abs() <= 1e-6);
        let p = BoundParams::new(0.3, 1000.0, 1.0).unwrap();
        assert_eq!(minimize_g(&p, 1e-6).unwrap(), 1.0);
        // brute-force 1e-5 grid: argmin 0.78868 = (3 + sqrt 3) / 6
        let p = BoundParams::new(0.5, 1.0, 1.0).unwrap();
        assert!((minimize_g(&p, 1e-5).unwrap() - 0.78868).abs() <= 1e-4);
    }

    #[test]
    fn convexity_cases() {
        let linear = BoundParams::new(0.4, 2.0, 0.0).unwrap();
        assert!(convexity_check(&linear, 0.01).unwrap());
        let sym = BoundParams::new(0.5, 0.0, 1.0).unwrap();
        assert!(convexity_check(&sym, 0.01).unwrap());
        assert!((minimize_g(&sym, 1e-6).unwrap() - 0.5).abs() <= 1e-6);
        assert!(convexity_check(&sym, 0.2).is_err());
    }

    #[test]
    fn g_at_one_ignores_a() {
        for a in [0.0, 0.3, 17.0] {
            let p = BoundParams::new(0.16, a, 3.0).unwrap();
            assert_relative_eq!(g_alpha(1.0, &p).unwrap(), 2.0 * 3.0 / 0.16f64.sqrt(), max_relative = 1e-15);
        }
    }
}
