//! Adaptive interval-halving Gauss–Legendre quadrature.
//!
//! Each panel is integrated with a fixed 15-point Gauss–Legendre rule. A panel
//! is accepted when its value agrees with the sum of its two halves to within
//! the panel's share of the absolute tolerance; otherwise both halves are
//! pushed back onto the work stack.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const GL_POINTS: usize = 15;

/// Hard cap on panel evaluations before reporting non-convergence.
const MAX_PANELS: usize = 200_000;
/// Panels narrower than this fraction of the whole interval are not split.
const MIN_WIDTH_FRACTION: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on `[-1, 1]`, found by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fixed-rule approximation of `∫_a^b f`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    fn integrate_abs<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x).abs();
        }
        sum * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn gl15() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(GL_POINTS))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    /// Sum of the accepted panels' refinement differences.
    pub error: f64,
    /// `∫|f|` estimate used as the tolerance scale.
    pub scale: f64,
    pub panels: usize,
}

/// Integrates `f` over `[a, b]` to relative tolerance `rtol`, measured against
/// `∫_a^b |f|` so that oscillatory integrands with cancellation still
/// terminate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> Result<Integral> {
    integrate_with_panels(f, a, b, rtol, 16)
}

pub fn integrate_with_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rtol: f64,
    initial_panels: usize,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate", "interval endpoints must be finite"));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, scale: 0.0, panels: 0 });
    }
    let rule = gl15();
    let width = b - a;
    let n0 = initial_panels.max(1);
    let step = width / n0 as f64;

    let mut stack = Vec::with_capacity(64);
    let mut scale = 0.0;
    for i in 0..n0 {
        let lo = a + step * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + step };
        let v = rule.integrate(&f, lo, hi);
        scale += rule.integrate_abs(&f, lo, hi);
        stack.push((lo, hi, v));
    }
    let abs_tol = rtol * scale.max(f64::MIN_POSITIVE);
    let min_width = width.abs() * MIN_WIDTH_FRACTION;

    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = n0;
    while let Some((lo, hi, whole)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(&f, lo, mid);
        let right = rule.integrate(&f, mid, hi);
        panels += 2;
        let diff = (left + right - whole).abs();
        let share = abs_tol * ((hi - lo) / width).abs();
        if diff <= share.max(f64::EPSILON * (left.abs() + right.abs())) || (hi - lo).abs() < min_width {
            value += left + right;
            error += diff;
        } else {
            if panels > MAX_PANELS {
                return Err(Error::Convergence { a, b, evals: panels });
            }
            stack.push((lo, mid, left));
            stack.push((mid, hi, right));
        }
    }
    Ok(Integral { value, error, scale, panels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        let rule = GaussLegendre::new(15);
        let s: f64 = rule.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        assert!(rule.nodes()[7].abs() < 1e-15);
        for i in 0..15 {
            assert!((rule.nodes()[i] + rule.nodes()[14 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_rule_is_exact_for_degree_29() {
        let rule = GaussLegendre::new(15);
        let v = rule.integrate(&|x: f64| x.powi(28), -1.0, 1.0);
        assert!((v - 2.0 / 29.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // ∫_0^1 1/(1e-4 + (x-0.3)^2) dx = 100 [atan(70) + atan(30)]
        let exact = 100.0 * (70.0f64.atan() + 30.0f64.atan());
        let r = integrate(|x| 1.0 / (1e-4 + (x - 0.3) * (x - 0.3)), 0.0, 1.0, 1e-13).unwrap();
        assert!((r.value - exact).abs() / exact < 1e-12, "{} vs {}", r.value, exact);
    }

    #[test]
    fn oscillatory_with_cancellation() {
        // ∫_0^{20} cos(5t) e^{-t/4} dt has a closed form.
        let exact = {
            let (a, w, t) = (0.25f64, 5.0f64, 20.0f64);
            (a - (-a * t).exp() * (a * (w * t).cos() - w * (w * t).sin())) / (a * a + w * w)
        };
        let r = integrate(|t| (5.0 * t).cos() * (-t / 4.0).exp(), 0.0, 20.0, 1e-13).unwrap();
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, 1e-12).unwrap().value, 0.0);
    }
}
