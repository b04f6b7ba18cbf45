//! Bracketing root finder (Brent's method: inverse quadratic / secant steps
//! safeguarded by bisection).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    /// Width of the final bracket.
    pub width: f64,
}

/// Finds a root of `f` in `[lo, hi]`. Terminates when the bracket is narrower
/// than `xtol + rtol·|x|` or `f(x) == 0`.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64, rtol: f64, max_iter: usize) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0, width: 0.0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0, width: 0.0 });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket { lo, hi, f_lo: fa, f_hi: fb });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for it in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (xtol + rtol * b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Root { x: b, fx: fb, iterations: it, width: (c - b).abs() });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::RootIterations(max_iter))
}

/// Golden-section maximisation of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while (hi - lo).abs() > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = brent(|x| Ok(x * x * x - 2.0 * x - 5.0), 2.0, 3.0, 1e-15, 0.0, 100).unwrap();
        assert!((r.x - 2.094_551_481_542_326_5).abs() < 1e-14);
    }

    #[test]
    fn transcendental_root() {
        // cos x = x
        let r = brent(|x: f64| Ok(x.cos() - x), 0.0, 1.0, 0.0, 1e-15, 100).unwrap();
        assert!((r.x - 0.739_085_133_215_160_6).abs() < 1e-15);
    }

    #[test]
    fn rejects_missing_sign_change() {
        let err = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 0.0, 50).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, fx) = golden_max(|x: f64| Ok(-(x - 0.3).powi(2) + 1.0), 0.0, 1.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }
}
