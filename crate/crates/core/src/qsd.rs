//! Quasi-stationary and stationary laws, the bounds sandwiching `Q_A`, and
//! convergence-rate diagnostics.
//!
//! With `u = 1/x`, `v = 1/A`, `b = ξ(λ_A)/2` and `K̂_b(u) = e^u K_b(u)`:
//!
//! ```text
//! log Q_A(x) = ½ log(u/v) - 2u + 2v + log K̂_b(u) - log K̂_b(v)
//! q_A(x)     = u sqrt(u/v) e^{-2u+2v} [(u - ½) K̂_b(u) - u K̂_b'(u)] / K̂_b(v)
//! ```
//!
//! Everything is evaluated in log space so that `x → 0` never underflows
//! an intermediate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{solve_lambda, EigenSolution, Regime};
use crate::error::{Error, Result};
use crate::quad::integrate_with_panels;
use crate::roots::golden_max;
use crate::specfun::{bessel_k_scaled, e1_scaled, Order, SpecEval};

/// `H(x) = e^{-2/x}`.
pub fn stationary_cdf(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("stationary_cdf", format!("x must be non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 / x).exp())
}

/// `h(x) = (2/x²) e^{-2/x}`.
pub fn stationary_pdf(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("stationary_pdf", format!("x must be non-negative, got {x}")));
    }
    if x == 0.0 || x.is_infinite() {
        return Ok(0.0);
    }
    let u = 1.0 / x;
    Ok((2.0 * u.ln() + std::f64::consts::LN_2 - 2.0 * u).exp())
}

fn check_x(func: &'static str, x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(func, format!("x must be non-negative, got {x}")))
    }
}

/// Closed-form quasi-stationary law for one boundary `A`, with the
/// boundary-side Bessel value cached.
#[derive(Debug, Clone, Copy)]
pub struct QsdLaw {
    a: f64,
    order: Order,
    /// `K̂_b(1/A)`
    denom: f64,
}

impl QsdLaw {
    pub fn new(sol: &EigenSolution) -> Result<Self> {
        Self::with_order(sol.a, sol.order())
    }

    /// Law for an explicit Whittaker index; the sign of a real index is
    /// irrelevant.
    pub fn with_order(a: f64, order: Order) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain("qsd", format!("A must be positive and finite, got {a}")));
        }
        let denom = bessel_k_scaled(order, 1.0 / a)?;
        Ok(Self { a, order, denom })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn order(&self) -> Order {
        self.order
    }

    /// `log Q_A(x)`; `-∞` at `x = 0` and `0` for `x >= A`.
    pub fn ln_cdf(&self, x: f64) -> Result<f64> {
        check_x("qsd_cdf", x)?;
        if x == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if x >= self.a {
            return Ok(0.0);
        }
        let u = 1.0 / x;
        let v = 1.0 / self.a;
        let k = bessel_k_scaled(self.order, u)?;
        Ok(0.5 * (u / v).ln() - 2.0 * u + 2.0 * v + (k / self.denom).ln())
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_cdf(x)?.exp())
    }

    /// `q_A(x)`, clamped at zero; near `x = A` the literal value can dip
    /// below zero by the eigenvalue residual.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.pdf_raw(x)?.max(0.0))
    }

    /// `q_A(x)` from the Whittaker `W_{1,b}` reduction, evaluated literally up
    /// to and including `x = A`; zero beyond.
    pub fn pdf_raw(&self, x: f64) -> Result<f64> {
        check_x("qsd_pdf", x)?;
        if x == 0.0 || x > self.a {
            return Ok(0.0);
        }
        let u = 1.0 / x;
        let v = 1.0 / self.a;
        let eval = SpecEval::new(self.order, u)?;
        let log_scale = u.ln() + 0.5 * (u / v).ln() - 2.0 * u + 2.0 * v;
        Ok(log_scale.exp() * eval.w1_bracket() / self.denom)
    }
}

pub fn qsd_cdf(sol: &EigenSolution, x: f64) -> Result<f64> {
    QsdLaw::new(sol)?.cdf(x)
}

pub fn qsd_pdf(sol: &EigenSolution, x: f64) -> Result<f64> {
    QsdLaw::new(sol)?.pdf(x)
}

// ---------------------------------------------------------------------------
// Bounds

/// `min{1, e^{2/A} H(x)}`.
pub fn lower_bound(a: f64, x: f64) -> Result<f64> {
    check_x("lower_bound", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 / a - 2.0 / x).exp().min(1.0))
}

/// `min{1, e^{2/A} H(x) (A/x)^{(1 - |Re ξ|)/2}}`. Below `Ã` (`Re ξ = 0`) this is
/// the numerically conjectured envelope rather than a proven bound.
pub fn upper_bound_simple(sol: &EigenSolution, x: f64) -> Result<f64> {
    check_x("upper_bound_simple", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x >= sol.a {
        return Ok(1.0);
    }
    // 1 - |Re ξ| is 1 in the imaginary regime
    let delta = 0.5 * sol.one_minus_xi;
    Ok((2.0 / sol.a - 2.0 / x + delta * (sol.a / x).ln()).exp().min(1.0))
}

/// `D(x, A) = e^{2/A} E1(2/A) - e^{2/x} E1(2/x)`, positive for `0 < x < A`.
pub fn e1_gap(a: f64, x: f64) -> Result<f64> {
    Ok(e1_scaled(2.0 / a)? - e1_scaled(2.0 / x)?)
}

fn require_real(sol: &EigenSolution) -> Result<()> {
    match sol.regime {
        Regime::RealXi => Ok(()),
        Regime::ImaginaryXi => Err(Error::Regime(sol.a)),
    }
}

/// First-order Taylor bound:
/// `min{1, e^{2/A} H(x) [1 + (A/x)^δ D δ]}` with `δ = (1 - ξ)/2`.
pub fn upper_bound_taylor1(sol: &EigenSolution, x: f64) -> Result<f64> {
    require_real(sol)?;
    check_x("upper_bound_taylor1", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x >= sol.a {
        return Ok(1.0);
    }
    let delta = 0.5 * sol.one_minus_xi;
    let d = e1_gap(sol.a, x)?;
    let base = (2.0 / sol.a - 2.0 / x).exp();
    let ratio_pow = (delta * (sol.a / x).ln()).exp();
    Ok((base * (1.0 + ratio_pow * d * delta)).min(1.0))
}

/// Second-order Taylor bound:
/// `min{1, e^{2/A} H(x) [1 + D δ + ½ (A/x)^δ D² δ²]}`.
pub fn upper_bound_taylor2(sol: &EigenSolution, x: f64) -> Result<f64> {
    require_real(sol)?;
    check_x("upper_bound_taylor2", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x >= sol.a {
        return Ok(1.0);
    }
    let delta = 0.5 * sol.one_minus_xi;
    let d = e1_gap(sol.a, x)?;
    let base = (2.0 / sol.a - 2.0 / x).exp();
    let ratio_pow = (delta * (sol.a / x).ln()).exp();
    let bracket = 1.0 + d * delta + 0.5 * ratio_pow * (d * delta).powi(2);
    Ok((base * bracket).min(1.0))
}

// ---------------------------------------------------------------------------
// Grids

/// Fraction of grid points placed log-uniformly near the origin.
const LOG_FRACTION: f64 = 0.25;
const LOG_GRID_START: f64 = 1e-6;
const LOG_GRID_END: f64 = 0.1;

/// Mixed grid on `[0, A]`: `0`, then a log-spaced block in
/// `[1e-6·A, 0.1·A)`, then a linear block on `[0.1·A, A]`.
pub fn mixed_grid(a: f64, n_points: usize) -> Vec<f64> {
    let n_log = ((n_points as f64 * LOG_FRACTION) as usize).saturating_sub(1).max(1);
    let n_lin = n_points - 1 - n_log;
    let mut xs = Vec::with_capacity(n_points);
    xs.push(0.0);
    let (l0, l1) = ((LOG_GRID_START * a).ln(), (LOG_GRID_END * a).ln());
    for i in 0..n_log {
        xs.push((l0 + (l1 - l0) * i as f64 / n_log as f64).exp());
    }
    let lo = LOG_GRID_END * a;
    for i in 0..n_lin {
        xs.push(if i + 1 == n_lin { a } else { lo + (a - lo) * i as f64 / (n_lin - 1) as f64 });
    }
    xs
}

/// Every curve of the bound figures on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistGrid {
    #[serde(rename = "A")]
    pub a: f64,
    pub lambda: f64,
    pub regime: Regime,
    /// The upper envelope is the numerically conjectured form (`A < Ã`).
    pub conjectural_upper: bool,
    pub x: Vec<f64>,
    pub q_cdf: Vec<f64>,
    pub q_pdf: Vec<f64>,
    pub h_cdf: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub_simple: Vec<f64>,
    /// `None` below `Ã`, where the Taylor bounds are not established.
    pub ub_taylor1: Vec<Option<f64>>,
    pub ub_taylor2: Vec<Option<f64>>,
    /// `Q - lb`
    pub lb_err: Vec<f64>,
    /// `ub_simple - Q`
    pub ub_err: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x: f64,
    pub q_cdf: f64,
    pub q_pdf: f64,
    pub h_cdf: f64,
    pub lb: f64,
    pub ub_simple: f64,
    pub ub_taylor1: Option<f64>,
    pub ub_taylor2: Option<f64>,
    pub lb_err: f64,
    pub ub_err: f64,
}

impl DistGrid {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn row(&self, i: usize) -> GridRow {
        GridRow {
            x: self.x[i],
            q_cdf: self.q_cdf[i],
            q_pdf: self.q_pdf[i],
            h_cdf: self.h_cdf[i],
            lb: self.lb[i],
            ub_simple: self.ub_simple[i],
            ub_taylor1: self.ub_taylor1[i],
            ub_taylor2: self.ub_taylor2[i],
            lb_err: self.lb_err[i],
            ub_err: self.ub_err[i],
        }
    }

    pub fn rows(&self) -> Vec<GridRow> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    pub fn max_lb_err(&self) -> f64 {
        self.lb_err.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_ub_err(&self) -> f64 {
        self.ub_err.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Point of largest `ub_err`, with the relative deviation `ub_err/Q` there.
    pub fn ub_err_peak(&self) -> (f64, f64, f64) {
        let i = (0..self.len()).max_by(|&i, &j| self.ub_err[i].total_cmp(&self.ub_err[j])).unwrap_or(0);
        (self.x[i], self.ub_err[i], self.ub_err[i] / self.q_cdf[i])
    }

    /// Largest `(ub_simple - Q)/Q` over grid points with `Q > 0`.
    pub fn max_relative_ub_err(&self) -> f64 {
        self.ub_err
            .iter()
            .zip(&self.q_cdf)
            .filter(|(_, &q)| q > 0.0)
            .map(|(e, q)| e / q)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub const MIN_GRID_POINTS: usize = 16;

/// Evaluates every curve for the given solution on an explicit set of points.
pub fn grid_on(sol: &EigenSolution, xs: &[f64]) -> Result<DistGrid> {
    let law = QsdLaw::new(sol)?;
    let real = sol.is_real();
    let rows: Vec<GridRow> = xs
        .par_iter()
        .map(|&x| -> Result<GridRow> {
            let q_cdf = law.cdf(x)?;
            let lb = lower_bound(sol.a, x)?;
            let ub_simple = upper_bound_simple(sol, x)?;
            let (t1, t2) = if real {
                (Some(upper_bound_taylor1(sol, x)?), Some(upper_bound_taylor2(sol, x)?))
            } else {
                (None, None)
            };
            Ok(GridRow {
                x,
                q_cdf,
                q_pdf: law.pdf(x)?,
                h_cdf: stationary_cdf(x)?,
                lb,
                ub_simple,
                ub_taylor1: t1,
                ub_taylor2: t2,
                lb_err: q_cdf - lb,
                ub_err: ub_simple - q_cdf,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DistGrid {
        a: sol.a,
        lambda: sol.lambda,
        regime: sol.regime,
        conjectural_upper: !real,
        x: rows.iter().map(|r| r.x).collect(),
        q_cdf: rows.iter().map(|r| r.q_cdf).collect(),
        q_pdf: rows.iter().map(|r| r.q_pdf).collect(),
        h_cdf: rows.iter().map(|r| r.h_cdf).collect(),
        lb: rows.iter().map(|r| r.lb).collect(),
        ub_simple: rows.iter().map(|r| r.ub_simple).collect(),
        ub_taylor1: rows.iter().map(|r| r.ub_taylor1).collect(),
        ub_taylor2: rows.iter().map(|r| r.ub_taylor2).collect(),
        lb_err: rows.iter().map(|r| r.lb_err).collect(),
        ub_err: rows.iter().map(|r| r.ub_err).collect(),
    })
}

/// Solves for `λ_A` and evaluates every curve on the mixed grid.
pub fn build_grid(a: f64, n_points: usize, tol: f64) -> Result<DistGrid> {
    if n_points < MIN_GRID_POINTS {
        return Err(Error::domain(
            "build_grid",
            format!("need at least {MIN_GRID_POINTS} grid points, got {n_points}"),
        ));
    }
    let sol = solve_lambda(a, tol)?;
    grid_on(&sol, &mixed_grid(a, n_points))
}

/// `∫_0^A q_A(x) dx`, which should equal one.
pub fn pdf_mass(sol: &EigenSolution) -> Result<f64> {
    let law = QsdLaw::new(sol)?;
    let failed = std::cell::Cell::new(None);
    let f = |x: f64| {
        law.pdf(x).unwrap_or_else(|e| {
            failed.set(Some(e));
            0.0
        })
    };
    let v = integrate_with_panels(f, 0.0, sol.a, 1e-12, 64)?.value;
    match failed.take() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

// ---------------------------------------------------------------------------
// Rate diagnostics

pub const SUP_GAP_GRID: usize = 2048;
const SUP_GAP_XTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupGap {
    /// Maximiser of `Q_A(x) - H(x)`.
    pub x: f64,
    pub gap: f64,
}

/// `sup_x [Q_A(x) - H(x)]`: best point of a 2048-point mixed grid, refined by
/// golden section between its neighbours.
pub fn sup_gap(sol: &EigenSolution) -> Result<SupGap> {
    let law = QsdLaw::new(sol)?;
    let gap = |x: f64| -> Result<f64> { Ok(law.cdf(x)? - stationary_cdf(x)?) };
    let xs = mixed_grid(sol.a, SUP_GAP_GRID);
    let values: Vec<f64> = xs.par_iter().map(|&x| gap(x)).collect::<Result<_>>()?;
    let (best, _) =
        values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let lo = xs[best.saturating_sub(1)];
    let hi = xs[(best + 1).min(xs.len() - 1)];
    let (x, g) = golden_max(gap, lo, hi, SUP_GAP_XTOL * xs[best].max(1.0))?;
    if g >= values[best] {
        Ok(SupGap { x, gap: g })
    } else {
        Ok(SupGap { x: xs[best], gap: values[best] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    #[serde(rename = "A")]
    pub a: f64,
    pub sup_gap: f64,
    /// `sup_gap · A / log A`
    pub ratio: f64,
    pub lambda: f64,
    pub one_minus_xi: f64,
}

impl RateRow {
    pub fn from_solution(sol: &EigenSolution) -> Result<Self> {
        require_real(sol)?;
        let g = sup_gap(sol)?.gap;
        Ok(Self {
            a: sol.a,
            sup_gap: g,
            ratio: g * sol.a / sol.a.ln(),
            lambda: sol.lambda,
            one_minus_xi: sol.one_minus_xi,
        })
    }
}

pub fn rate_table(a_list: &[f64], tol: f64) -> Result<Vec<RateRow>> {
    a_list.iter().map(|&a| RateRow::from_solution(&solve_lambda(a, tol)?)).collect()
}

// ---------------------------------------------------------------------------
// Monotonicity in A

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub x: f64,
    pub q_a1: f64,
    pub q_a2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    #[serde(rename = "A")]
    pub a: f64,
    pub x: f64,
    /// Central difference of `Q_A(x)` in `A`.
    pub dq_da: f64,
    /// `Q_A(x) D(x, A) d/dA[-ξ(λ_A)/2]`
    pub lower: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub a1: f64,
    pub a2: f64,
    pub tol: f64,
    pub points: usize,
    /// `max_x [Q_{A2}(x) - Q_{A1}(x)]`; non-positive when monotone.
    pub max_increase: f64,
    pub violations: Vec<MonotonicityViolation>,
    pub derivative_checks: usize,
    pub derivative_violations: Vec<DerivativeCheck>,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.derivative_violations.is_empty()
    }
}

/// Step used for finite differences in `A`.
pub fn a_step(a: f64) -> f64 {
    (1e-5 * a).max(1e-3)
}

/// Finite-difference `∂Q_A(x)/∂A` and `d/dA[-ξ/2]`, shared by the pointwise
/// check and the grid report.
struct ADerivative {
    law: QsdLaw,
    plus: QsdLaw,
    minus: QsdLaw,
    a: f64,
    h: f64,
    dneg_half_xi: f64,
}

impl ADerivative {
    fn new(a: f64, tol: f64) -> Result<Self> {
        let h = a_step(a);
        let sol = solve_lambda(a, tol)?;
        require_real(&sol)?;
        let sp = solve_lambda(a + h, tol)?;
        let sm = solve_lambda(a - h, tol)?;
        require_real(&sm)?;
        // ξ(A+h) - ξ(A-h) = (1-ξ)(A-h) - (1-ξ)(A+h)
        let dxi = (sm.one_minus_xi - sp.one_minus_xi) / (2.0 * h);
        Ok(Self {
            law: QsdLaw::new(&sol)?,
            plus: QsdLaw::new(&sp)?,
            minus: QsdLaw::new(&sm)?,
            a,
            h,
            dneg_half_xi: -0.5 * dxi,
        })
    }

    fn check(&self, x: f64, tol: f64) -> Result<DerivativeCheck> {
        let dq_da = (self.plus.cdf(x)? - self.minus.cdf(x)?) / (2.0 * self.h);
        let lower = self.law.cdf(x)? * e1_gap(self.a, x)? * self.dneg_half_xi;
        let ok = dq_da <= tol && dq_da >= lower - tol;
        Ok(DerivativeCheck { a: self.a, x, dq_da, lower, ok })
    }
}

/// Checks `lower ≤ ∂Q_A(x)/∂A ≤ 0` at one interior point.
pub fn derivative_sandwich(a: f64, x: f64, tol: f64) -> Result<DerivativeCheck> {
    let h = a_step(a);
    if !(x > 0.0 && x < a - h) {
        return Err(Error::domain("derivative_sandwich", format!("x must lie in (0, A - h), got {x}")));
    }
    ADerivative::new(a, 1e-14)?.check(x, tol)
}

/// Verifies `Q_{A1}(x) ≥ Q_{A2}(x) - tol` on `grid` and the derivative
/// sandwich at `A1` on the grid points inside `(0, A1)`. Violations are
/// reported, never raised.
pub fn monotonicity_check(a1: f64, a2: f64, grid: &[f64], tol: f64) -> Result<MonotonicityReport> {
    if !(a1 <= a2) {
        return Err(Error::domain("monotonicity_check", format!("need A1 <= A2, got {a1} > {a2}")));
    }
    let s1 = solve_lambda(a1, 1e-14)?;
    let s2 = solve_lambda(a2, 1e-14)?;
    require_real(&s1)?;
    let (l1, l2) = (QsdLaw::new(&s1)?, QsdLaw::new(&s2)?);
    let pairs: Vec<(f64, f64, f64)> =
        grid.par_iter().map(|&x| Ok((x, l1.cdf(x)?, l2.cdf(x)?))).collect::<Result<_>>()?;
    let max_increase = pairs.iter().map(|&(_, q1, q2)| q2 - q1).fold(f64::NEG_INFINITY, f64::max);
    let violations = pairs
        .iter()
        .filter(|&&(_, q1, q2)| q1 < q2 - tol)
        .map(|&(x, q_a1, q_a2)| MonotonicityViolation { x, q_a1, q_a2 })
        .collect();

    let deriv = ADerivative::new(a1, 1e-14)?;
    let interior: Vec<f64> = grid.iter().cloned().filter(|&x| x > 0.0 && x < a1 - deriv.h).collect();
    let checks: Vec<DerivativeCheck> =
        interior.par_iter().map(|&x| deriv.check(x, tol)).collect::<Result<_>>()?;
    Ok(MonotonicityReport {
        a1,
        a2,
        tol,
        points: grid.len(),
        max_increase,
        violations,
        derivative_checks: checks.len(),
        derivative_violations: checks.into_iter().filter(|c| !c.ok).collect(),
    })
}
