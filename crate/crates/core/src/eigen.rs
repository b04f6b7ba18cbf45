//! Smallest eigenvalue `λ_A` of the absorbed Shiryaev–Roberts generator.
//!
//! `λ_A` is the smallest positive root of `W_{1, ξ(λ)/2}(2/A) = 0` with
//! `ξ(λ) = sqrt(1 - 8λ)`. For `λ > 1/8` the index is purely imaginary,
//! `ξ = iα` with `α = sqrt(8λ - 1)`; the two branches meet at `b = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::brent;
use crate::specfun::{whittaker_w1, Order};

/// `λ` at which `ξ(λ)` changes from real to imaginary.
pub const LAMBDA_CRITICAL: f64 = 0.125;
/// Smallest boundary accepted by [`solve_lambda`].
pub const MIN_A: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    RealXi,
    ImaginaryXi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    #[serde(rename = "A")]
    pub a: f64,
    pub lambda: f64,
    /// `ξ(λ_A)` in the real regime, otherwise `α` with `ξ = iα`.
    pub xi: f64,
    /// `1 - ξ(λ_A)` computed as `8λ/(1 + ξ)`; `1` in the imaginary regime
    /// (where `Re ξ = 0`).
    pub one_minus_xi: f64,
    pub regime: Regime,
    /// `W_{1,b}(2/A)` at the returned `λ`.
    pub residual: f64,
}

impl EigenSolution {
    /// Assemble a solution record from a boundary and an eigenvalue.
    pub fn from_lambda(a: f64, lambda: f64, residual: f64) -> Self {
        let (regime, xi, one_minus_xi) = xi_of_lambda(lambda);
        Self { a, lambda, xi, one_minus_xi, regime, residual }
    }

    /// Bessel/Whittaker index `b = ξ(λ_A)/2`.
    pub fn order(&self) -> Order {
        match self.regime {
            Regime::RealXi => Order::real(0.5 * self.xi),
            Regime::ImaginaryXi => Order::imaginary(0.5 * self.xi),
        }
    }

    /// `|Re ξ(λ_A)|`.
    pub fn re_xi(&self) -> f64 {
        match self.regime {
            Regime::RealXi => self.xi,
            Regime::ImaginaryXi => 0.0,
        }
    }

    pub fn is_real(&self) -> bool {
        self.regime == Regime::RealXi
    }
}

/// `(regime, ξ or α, 1 - Re ξ)` for a given `λ`.
fn xi_of_lambda(lambda: f64) -> (Regime, f64, f64) {
    let disc = 1.0 - 8.0 * lambda;
    if disc >= 0.0 {
        let xi = disc.sqrt();
        (Regime::RealXi, xi, 8.0 * lambda / (1.0 + xi))
    } else {
        (Regime::ImaginaryXi, (-disc).sqrt(), 1.0)
    }
}

/// Whittaker index for a given `λ`, continuous across `λ = 1/8`.
pub fn order_of_lambda(lambda: f64) -> Order {
    if lambda == LAMBDA_CRITICAL {
        return Order::real(0.0);
    }
    match xi_of_lambda(lambda) {
        (Regime::RealXi, xi, _) => Order::real(0.5 * xi),
        (Regime::ImaginaryXi, alpha, _) => Order::imaginary(0.5 * alpha),
    }
}

/// Strict bracket `1/A + 1/(A(1+A)) < λ_A < 1/A + (1 + sqrt(4A+1))/(2A²)`.
pub fn lambda_bracket(a: f64) -> (f64, f64) {
    let lo = 1.0 / a + 1.0 / (a * (1.0 + a));
    let hi = 1.0 / a + (1.0 + (4.0 * a + 1.0).sqrt()) / (2.0 * a * a);
    (lo, hi)
}

/// `W_{1, ξ(λ)/2}(2/A)`.
pub fn eigenfunction(lambda: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain("eigenfunction", format!("A must be positive, got {a}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("eigenfunction", format!("lambda must be positive, got {lambda}")));
    }
    whittaker_w1(order_of_lambda(lambda), 2.0 / a)
}

/// Smallest eigenvalue `λ_A`, located by Brent's method on the strict
/// bracket and refined until the bracket is narrower than `tol·λ`.
pub fn solve_lambda(a: f64, tol: f64) -> Result<EigenSolution> {
    if !(a >= MIN_A && a.is_finite()) {
        return Err(Error::domain("solve_lambda", format!("A must be finite and >= {MIN_A}, got {a}")));
    }
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(Error::domain("solve_lambda", format!("tol must lie in [1e-14, 1e-6], got {tol}")));
    }
    let (lo, hi) = lambda_bracket(a);
    let root = brent(|l| eigenfunction(l, a), lo, hi, 0.0, tol, 200)?;
    let mut sol = EigenSolution::from_lambda(a, root.x, root.fx);
    if sol.regime == Regime::ImaginaryXi && (sol.lambda - LAMBDA_CRITICAL).abs() <= tol * sol.lambda {
        sol = EigenSolution { regime: Regime::RealXi, xi: 0.0, one_minus_xi: 1.0, ..sol };
    }
    Ok(sol)
}

/// Critical boundary `Ã` solving `W_{1,0}(2/Ã) = 0`, where `λ_Ã = 1/8`.
pub fn critical_a(tol: f64) -> Result<f64> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::domain("critical_a", format!("tol must lie in [1e-12, 1e-4], got {tol}")));
    }
    let root = brent(|a| whittaker_w1(Order::real(0.0), 2.0 / a), 5.0, 20.0, tol, 0.0, 200)?;
    Ok(root.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_endpoints_at_100() {
        let (lo, hi) = lambda_bracket(100.0);
        assert!((lo - (0.01 + 1.0 / 10100.0)).abs() < 1e-15);
        assert!((hi - (0.01 + (1.0 + 401f64.sqrt()) / 20000.0)).abs() < 1e-15);
        assert!((lo - 0.010_099_0).abs() < 1e-7);
        assert!((hi - 0.011_051_2).abs() < 1e-7);
    }

    #[test]
    fn eigenfunction_continuous_at_one_eighth() {
        let a = 10.240465;
        let below = eigenfunction(LAMBDA_CRITICAL * (1.0 - 1e-12), a).unwrap();
        let above = eigenfunction(LAMBDA_CRITICAL * (1.0 + 1e-12), a).unwrap();
        let at = eigenfunction(LAMBDA_CRITICAL, a).unwrap();
        assert!((below - above).abs() < 1e-9);
        assert!((below - at).abs() < 1e-9);
    }

    #[test]
    fn eigenfunction_positive_below_root() {
        // For λ → 0 the index tends to 1/2 where W_{1,1/2}(z) = z e^{-z/2} > 0.
        let v = eigenfunction(1e-6, 100.0).unwrap();
        let z: f64 = 0.02;
        assert!(v > 0.0);
        assert!((v - z * (-z / 2.0).exp()).abs() < 1e-3 * z);
    }

    #[test]
    fn eigenfunction_sign_scan_has_single_crossing_in_bracket() {
        let a = 100.0;
        let (lo, hi) = lambda_bracket(a);
        let mut changes = 0;
        let mut prev = eigenfunction(lo, a).unwrap();
        for i in 1..=64 {
            let l = lo + (hi - lo) * i as f64 / 64.0;
            let v = eigenfunction(l, a).unwrap();
            if v.signum() != prev.signum() {
                changes += 1;
            }
            prev = v;
        }
        assert_eq!(changes, 1);
    }

    #[test]
    fn input_validation() {
        assert!(eigenfunction(0.0, 10.0).is_err());
        assert!(eigenfunction(0.1, -1.0).is_err());
        assert!(solve_lambda(0.5, 1e-12).is_err());
        assert!(solve_lambda(50.0, 1e-3).is_err());
        assert!(critical_a(1e-2).is_err());
    }

    #[test]
    fn regime_assignment() {
        let s = EigenSolution::from_lambda(50.0, 0.02, 0.0);
        assert_eq!(s.regime, Regime::RealXi);
        assert!((s.xi - (1.0f64 - 0.16).sqrt()).abs() < 1e-15);
        assert!((s.one_minus_xi - (1.0 - s.xi)).abs() < 1e-15);
        let s = EigenSolution::from_lambda(5.0, 0.25, 0.0);
        assert_eq!(s.regime, Regime::ImaginaryXi);
        assert!((s.xi - 1.0).abs() < 1e-15);
        assert_eq!(s.re_xi(), 0.0);
    }
}
