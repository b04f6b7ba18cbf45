//! Text emitters: `%.12g` number formatting and CSV / aligned-table output.

use crate::mc::EmpiricalCdf;
use crate::qsd::{DistGrid, RateRow};

pub const SIG_DIGITS: usize = 12;

pub const GRID_HEADER: [&str; 10] =
    ["x", "q_cdf", "q_pdf", "h_cdf", "lb", "ub_simple", "ub_taylor1", "ub_taylor2", "lb_err", "ub_err"];
pub const RATE_HEADER: [&str; 5] = ["A", "sup_gap", "ratio", "lambda", "one_minus_xi"];
pub const ECDF_HEADER: [&str; 2] = ["value", "ecdf"];

/// Formats like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    fmt_g_prec(x, SIG_DIGITS)
}

pub fn fmt_g_prec(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let prec = prec.max(1);
    let sci = format!("{:.*e}", prec - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= prec as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (prec as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), fmt_g)
}

/// Header plus pre-formatted rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Right-aligned columns separated by two spaces.
    pub fn to_text(&self) -> String {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

pub fn grid_table(grid: &DistGrid) -> Table {
    let mut t = Table::new(&GRID_HEADER);
    for r in grid.rows() {
        t.push(vec![
            fmt_g(r.x),
            fmt_g(r.q_cdf),
            fmt_g(r.q_pdf),
            fmt_g(r.h_cdf),
            fmt_g(r.lb),
            fmt_g(r.ub_simple),
            fmt_opt(r.ub_taylor1),
            fmt_opt(r.ub_taylor2),
            fmt_g(r.lb_err),
            fmt_g(r.ub_err),
        ]);
    }
    t
}

pub fn rate_table(rows: &[RateRow]) -> Table {
    let mut t = Table::new(&RATE_HEADER);
    for r in rows {
        t.push(vec![fmt_g(r.a), fmt_g(r.sup_gap), fmt_g(r.ratio), fmt_g(r.lambda), fmt_g(r.one_minus_xi)]);
    }
    t
}

pub fn ecdf_table(ecdf: &EmpiricalCdf) -> Table {
    let mut t = Table::new(&ECDF_HEADER);
    for (v, p) in ecdf.steps() {
        t.push(vec![fmt_g(v), fmt_g(p)]);
    }
    t
}

/// Two-column `key, value` table for scalar records.
pub fn key_value_table(pairs: &[(&str, String)]) -> Table {
    let mut t = Table::new(&["key", "value"]);
    for (k, v) in pairs {
        t.push(vec![k.to_string(), v.clone()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        // Reference strings from printf("%.12g").
        let cases = [
            (1.0, "1"),
            (0.1, "0.1"),
            (10.240465439105, "10.2404654391"),
            (1e-5, "1e-05"),
            (1.5e-4, "0.00015"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (-2.5, "-2.5"),
            (std::f64::consts::PI, "3.14159265359"),
            (1e100, "1e+100"),
            (0.0, "0"),
            (9.9999999999999e-5, "0.0001"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
        assert_eq!(fmt_g(f64::NAN), "nan");
    }

    #[test]
    fn csv_and_text_layout() {
        let mut t = Table::new(&["a", "bb"]);
        t.push(vec!["1".into(), "2.5".into()]);
        assert_eq!(t.to_csv(), "a,bb\n1,2.5\n");
        assert_eq!(t.to_text(), "a   bb\n1  2.5\n");
    }
}
