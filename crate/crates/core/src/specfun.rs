//! Special-function kernel.
//!
//! All Bessel evaluations go through the exponentially scaled integral
//!
//! ```text
//! e^u K_ν(u)   = ∫_0^∞ e^{-u(cosh t - 1)} cosh(ν t) dt      (real ν)
//! e^u K_{iα}(u) = ∫_0^∞ e^{-u(cosh t - 1)} cos(α t)  dt      (imaginary order)
//! ```
//!
//! so that `e^{-1/x} K_b(1/x)` stays representable for `x` close to zero. The
//! Whittaker functions `W_{0,b}` and `W_{1,b}` are reduced to `K_b` and its
//! argument derivative.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Relative tolerance handed to the quadrature for every Bessel integral.
const K_RTOL: f64 = 1e-14;
/// Integrand is truncated once it drops this many e-folds below its peak.
const TAIL_EFOLDS: f64 = 42.0;
/// Largest real order accepted by the kernel.
pub const MAX_REAL_ORDER: f64 = 3.0;

/// Order of a modified Bessel function, either real `ν` or purely imaginary
/// `iα`. Both are normalised to a non-negative value because `K` is even in
/// its order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Order {
    Real(f64),
    Imaginary(f64),
}

impl Order {
    pub fn real(nu: f64) -> Self {
        Order::Real(nu.abs())
    }

    pub fn imaginary(alpha: f64) -> Self {
        Order::Imaginary(alpha.abs())
    }

    pub fn value(&self) -> f64 {
        match *self {
            Order::Real(v) | Order::Imaginary(v) => v,
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Order::Real(_))
    }

    fn validate(&self, func: &'static str) -> Result<()> {
        let v = self.value();
        if !v.is_finite() {
            return Err(Error::domain(func, format!("order must be finite, got {v}")));
        }
        if let Order::Real(nu) = *self {
            if nu.abs() > MAX_REAL_ORDER {
                return Err(Error::domain(
                    func,
                    format!("|order| must not exceed {MAX_REAL_ORDER}, got {nu}"),
                ));
            }
        }
        Ok(())
    }
}

fn check_arg(func: &'static str, u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(func, format!("argument must be positive and finite, got {u}")))
    }
}

// ---------------------------------------------------------------------------
// Exponential integral

/// `E1(x) = ∫_x^∞ e^{-y}/y dy` for `x > 0`.
pub fn e1(x: f64) -> Result<f64> {
    check_arg("e1", x)?;
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok(e1_scaled_cf(x) * (-x).exp())
    }
}

/// `e^x E1(x)`, which stays finite for large `x`.
pub fn e1_scaled(x: f64) -> Result<f64> {
    check_arg("e1_scaled", x)?;
    if x <= 1.0 {
        Ok(e1_series(x) * x.exp())
    } else {
        Ok(e1_scaled_cf(x))
    }
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -x / kf;
        let add = term / kf;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

fn e1_scaled_cf(x: f64) -> f64 {
    // Modified Lentz evaluation of e^x E1(x) = 1/(x+1- 1²/(x+3- 2²/(x+5- ...)))
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Modified Bessel K

/// Scaled Bessel kernel at one point: `e^u K_b(u)` and `e^u K_b'(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecEval {
    pub scaled_k: f64,
    pub scaled_k_du: f64,
    pub u: f64,
    pub order: Order,
}

impl SpecEval {
    pub fn new(order: Order, u: f64) -> Result<Self> {
        Ok(Self {
            scaled_k: bessel_k_scaled(order, u)?,
            scaled_k_du: bessel_k_du_scaled(order, u)?,
            u,
            order,
        })
    }

    /// `e^u [(u - 1/2) K_b(u) - u K_b'(u)]`, the bracket in `W_{1,b}(2u)`.
    pub fn w1_bracket(&self) -> f64 {
        (self.u - 0.5) * self.scaled_k - self.u * self.scaled_k_du
    }
}

#[derive(Clone, Copy)]
enum Weight {
    /// `cosh(νt)` or `cos(αt)`
    Plain,
    /// `-cosh(t)·(...)`: argument derivative
    ArgDerivative,
    /// `t sinh(νt)`: order derivative (real order only)
    OrderDerivative,
}

/// `u (cosh t - 1)` without cancellation at small `t`.
#[inline]
fn damping(u: f64, t: f64) -> f64 {
    let s = (0.5 * t).sinh();
    2.0 * u * s * s
}

/// Upper end of the integration range: where the log-envelope
/// `growth·t - u(cosh t - 1)` has fallen `TAIL_EFOLDS` below its maximum.
fn truncation_point(u: f64, growth: f64) -> f64 {
    let env = |t: f64| growth * t - damping(u, t);
    let t_peak = if growth > 0.0 { (growth / u).asinh() } else { 0.0 };
    let target = env(t_peak) - TAIL_EFOLDS;
    let mut lo = t_peak;
    let mut hi = t_peak.max(1.0);
    while env(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if env(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-3 {
            break;
        }
    }
    hi
}

fn scaled_integral(func: &'static str, order: Order, u: f64, weight: Weight) -> Result<f64> {
    check_arg(func, u)?;
    order.validate(func)?;
    let v = order.value();
    let growth = match (order, weight) {
        (Order::Real(_), Weight::Plain) => v,
        (Order::Real(_), _) => v + 1.0,
        (Order::Imaginary(_), Weight::Plain) => 0.0,
        (Order::Imaginary(_), _) => 1.0,
    };
    let t_max = truncation_point(u, growth);
    let value = match (order, weight) {
        (Order::Real(_), Weight::Plain) => {
            quad::integrate(|t| (-damping(u, t)).exp() * (v * t).cosh(), 0.0, t_max, K_RTOL)?.value
        }
        (Order::Real(_), Weight::ArgDerivative) => {
            -quad::integrate(|t| (-damping(u, t)).exp() * (v * t).cosh() * t.cosh(), 0.0, t_max, K_RTOL)?
                .value
        }
        (Order::Real(_), Weight::OrderDerivative) => {
            if v == 0.0 {
                return Ok(0.0);
            }
            quad::integrate(|t| (-damping(u, t)).exp() * t * (v * t).sinh(), 0.0, t_max, K_RTOL)?.value
        }
        (Order::Imaginary(_), Weight::Plain) => {
            quad::integrate_with_panels(
                |t| (-damping(u, t)).exp() * (v * t).cos(),
                0.0,
                t_max,
                K_RTOL,
                panels_for(v, t_max),
            )?
            .value
        }
        (Order::Imaginary(_), Weight::ArgDerivative) => {
            -quad::integrate_with_panels(
                |t| (-damping(u, t)).exp() * (v * t).cos() * t.cosh(),
                0.0,
                t_max,
                K_RTOL,
                panels_for(v, t_max),
            )?
            .value
        }
        (Order::Imaginary(_), Weight::OrderDerivative) => {
            return Err(Error::domain(func, "order derivative is only defined for real order"));
        }
    };
    Ok(value)
}

/// Enough initial panels that each covers at most about one oscillation.
fn panels_for(alpha: f64, t_max: f64) -> usize {
    let periods = alpha * t_max / (2.0 * PI);
    16usize.max(periods.ceil() as usize * 2)
}

/// `e^u K_b(u)`.
pub fn bessel_k_scaled(order: Order, u: f64) -> Result<f64> {
    scaled_integral("bessel_k_scaled", order, u, Weight::Plain)
}

/// `e^u K_b'(u)`, the argument derivative; negative for all `u > 0` and real order.
pub fn bessel_k_du_scaled(order: Order, u: f64) -> Result<f64> {
    scaled_integral("bessel_k_du_scaled", order, u, Weight::ArgDerivative)
}

/// `e^u ∂K_ν(u)/∂ν` for real order.
pub fn bessel_k_dnu_scaled(order: Order, u: f64) -> Result<f64> {
    scaled_integral("bessel_k_dnu_scaled", order, u, Weight::OrderDerivative)
}

/// Unscaled `K_b(u)`, restricted to `u <= 100`.
pub fn bessel_k(order: Order, u: f64) -> Result<f64> {
    if u > 100.0 {
        return Err(Error::domain(
            "bessel_k",
            "unscaled K is only exposed for u <= 100; use bessel_k_scaled",
        ));
    }
    Ok(bessel_k_scaled(order, u)? * (-u).exp())
}

// ---------------------------------------------------------------------------
// Whittaker W

/// `e^{z/2} W_{0,b}(z) = sqrt(z/π) e^{u} K_b(u)` with `u = z/2`.
pub fn whittaker_w0_scaled(b: Order, z: f64) -> Result<f64> {
    check_arg("whittaker_w0", z)?;
    let u = 0.5 * z;
    Ok((z / PI).sqrt() * bessel_k_scaled(b, u)?)
}

/// `W_{0,b}(z) = sqrt(z/π) K_b(z/2)`.
pub fn whittaker_w0(b: Order, z: f64) -> Result<f64> {
    Ok(whittaker_w0_scaled(b, z)? * (-0.5 * z).exp())
}

/// `e^{z/2} W_{1,b}(z)`.
pub fn whittaker_w1_scaled(b: Order, z: f64) -> Result<f64> {
    check_arg("whittaker_w1", z)?;
    let u = 0.5 * z;
    let eval = SpecEval::new(b, u)?;
    Ok((2.0 * u / PI).sqrt() * eval.w1_bracket())
}

/// `W_{1,b}(z) = sqrt(2u/π) [(u - 1/2) K_b(u) - u K_b'(u)]` with `u = z/2`.
pub fn whittaker_w1(b: Order, z: f64) -> Result<f64> {
    Ok(whittaker_w1_scaled(b, z)? * (-0.5 * z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn e1_reference_values() {
        // E1(1) and E1(2) to 16 digits.
        assert!(rel(e1(1.0).unwrap(), 0.219_383_934_395_520_5) < 1e-14);
        assert!(rel(e1(2.0).unwrap(), 0.048_900_510_708_061_12) < 1e-14);
        assert!(rel(e1(0.1).unwrap(), 1.822_923_958_419_390_7) < 1e-14);
        assert!(rel(e1(10.0).unwrap(), 4.156_968_929_685_324e-6) < 1e-13);
    }

    #[test]
    fn e1_continuous_across_branch_switch() {
        let below = e1_scaled(1.0).unwrap();
        let above = e1_scaled(1.0 + 1e-12).unwrap();
        assert!(rel(below, above) < 1e-11);
    }

    #[test]
    fn e1_rejects_non_positive() {
        assert!(matches!(e1(0.0), Err(Error::Domain { .. })));
        assert!(matches!(e1(-1.0), Err(Error::Domain { .. })));
        assert!(e1_scaled(f64::NAN).is_err());
    }

    #[test]
    fn k_half_closed_form() {
        // e^u K_{1/2}(u) = sqrt(π/(2u))
        for &u in &[1e-4, 0.01, 0.5, 1.0, 7.0, 300.0, 1e4] {
            let got = bessel_k_scaled(Order::real(0.5), u).unwrap();
            let want = (PI / (2.0 * u)).sqrt();
            assert!(rel(got, want) < 1e-12, "u={u}: {got} vs {want}");
        }
    }

    #[test]
    fn k0_and_k1_reference_values() {
        let k0 = bessel_k(Order::real(0.0), 1.0).unwrap();
        assert!(rel(k0, 0.421_024_438_240_708_3) < 1e-13);
        let k1 = bessel_k(Order::real(1.0), 1.0).unwrap();
        assert!(rel(k1, 0.601_907_230_197_234_6) < 1e-13);
        let k0_small = bessel_k(Order::real(0.0), 1e-6).unwrap();
        assert!(rel(k0_small, 13.931_442_073_626_42) < 1e-12, "{k0_small}");
    }

    #[test]
    fn k_du_matches_recurrence() {
        // K_ν'(u) = -(K_{ν-1}(u) + K_{ν+1}(u)) / 2
        for &(nu, u) in &[(0.3, 0.7), (0.5, 2.0), (0.0, 0.05)] {
            let lhs = bessel_k_du_scaled(Order::real(nu), u).unwrap();
            let rhs = -0.5
                * (bessel_k_scaled(Order::real(nu - 1.0), u).unwrap()
                    + bessel_k_scaled(Order::real(nu + 1.0), u).unwrap());
            assert!(rel(lhs, rhs) < 1e-12, "nu={nu} u={u}");
        }
    }

    #[test]
    fn imaginary_order_at_zero_matches_real() {
        let a = bessel_k_scaled(Order::imaginary(0.0), 1.0).unwrap();
        let b = bessel_k_scaled(Order::real(0.0), 1.0).unwrap();
        assert!(rel(a, b) < 1e-14);
        assert!(rel(a, std::f64::consts::E * 0.421_024_438_240_708_3) < 1e-13);
    }

    #[test]
    fn dnu_vanishes_at_zero_order() {
        assert_eq!(bessel_k_dnu_scaled(Order::real(0.0), 0.3).unwrap(), 0.0);
    }

    #[test]
    fn dnu_rejects_imaginary_order() {
        assert!(bessel_k_dnu_scaled(Order::imaginary(0.2), 1.0).is_err());
    }

    #[test]
    fn order_and_argument_validation() {
        assert!(bessel_k_scaled(Order::real(3.5), 1.0).is_err());
        assert!(bessel_k_scaled(Order::real(0.2), 0.0).is_err());
        assert!(bessel_k_scaled(Order::real(f64::NAN), 1.0).is_err());
        assert!(bessel_k(Order::real(0.2), 150.0).is_err());
        assert!(whittaker_w0(Order::real(0.2), -1.0).is_err());
        assert!(whittaker_w1(Order::real(0.2), 0.0).is_err());
    }

    #[test]
    fn w0_half_is_exponential() {
        let got = whittaker_w0(Order::real(0.5), 3.0).unwrap();
        assert!(rel(got, (-1.5f64).exp()) < 1e-13);
    }

    #[test]
    fn w0_at_zero_order() {
        let got = whittaker_w0(Order::real(0.0), 2.0).unwrap();
        let want = (2.0 / PI).sqrt() * 0.421_024_438_240_708_3;
        assert!(rel(got, want) < 1e-13);
    }

    #[test]
    fn spec_eval_signs() {
        for &u in &[1e-3, 0.1, 1.0, 50.0] {
            let e = SpecEval::new(Order::real(0.37), u).unwrap();
            assert!(e.scaled_k > 0.0);
            assert!(e.scaled_k_du < 0.0);
        }
    }
}
