use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use qsd_sr::eigen::{critical_a, lambda_bracket, solve_lambda, EigenSolution, LAMBDA_CRITICAL};
use qsd_sr::mc::{simulate, HittingTimeSummary, McConfig, McResult};
use qsd_sr::qsd::{
    build_grid, lower_bound, mixed_grid, monotonicity_check, pdf_mass, qsd_cdf, rate_table, sup_gap,
    upper_bound_simple, upper_bound_taylor1, DistGrid, RateRow,
};
use qsd_sr::report::{self, fmt_g, Table};
use qsd_sr::specfun::{bessel_k_dnu_scaled, e1, e1_scaled, whittaker_w1, Order};

const TILDE_A_REFERENCE: f64 = 10.240465;
const DEFAULT_A_LIST: &str = "100,1000,10000,100000";

#[derive(Parser, Debug)]
#[command(
    name = "qsd-sr",
    version,
    about = "Quasi-stationary distribution of the Shiryaev-Roberts diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Absorbing boundary (>= 1; `inf` for `simulate` without absorption)
    #[arg(long = "A", global = true, value_parser = parse_a)]
    a: Option<f64>,

    /// Comma-separated boundaries
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_a)]
    a_list: Vec<f64>,

    #[arg(long, global = true, default_value_t = 512)]
    n_points: usize,

    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    #[arg(long, global = true, default_value_t = 100_000)]
    paths: usize,

    #[arg(long, global = true)]
    horizon: Option<f64>,

    #[arg(long, global = true, default_value_t = 1e-3)]
    dt: f64,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Smallest eigenvalue for --A
    Lambda,
    /// Critical boundary where lambda = 1/8
    TildeA,
    /// Cdf, pdf, bounds and errors on a grid over [0, A]
    Grid,
    /// Summary of bound quality for --A or --a-list
    Bounds,
    /// sup_x [Q_A(x) - H(x)] for --A
    Gap,
    /// Rate diagnostic rows for --a-list
    RateTable,
    /// Monte Carlo run of the absorbed diffusion
    Simulate,
    /// Run the invariant suite; exit 3 on any violation
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
    Table,
}

fn parse_a(s: &str) -> Result<f64, String> {
    let a: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if a.is_nan() || a < 1.0 {
        return Err(format!("A must be >= 1, got {s}"));
    }
    Ok(a)
}

type AnyResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

enum Outcome {
    Emit(String),
    SelftestFailed(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("qsd-sr: {e}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(Outcome::Emit(text)) => match emit(&cli, &text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("qsd-sr: {e}");
                ExitCode::from(1)
            }
        },
        Ok(Outcome::SelftestFailed(text)) => {
            let _ = emit(&cli, &text);
            eprintln!("qsd-sr: selftest found violations");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("qsd-sr: {e}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> AnyResult<()> {
    let Ok(v) = std::env::var("QSD_SR_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("QSD_SR_THREADS must be an integer, got {v:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn run(cli: &Cli) -> AnyResult<Outcome> {
    let text = match cli.command {
        Command::Lambda => cmd_lambda(cli)?,
        Command::TildeA => cmd_tilde_a(cli)?,
        Command::Grid => cmd_grid(cli)?,
        Command::Bounds => cmd_bounds(cli)?,
        Command::Gap => cmd_gap(cli)?,
        Command::RateTable => cmd_rate_table(cli)?,
        Command::Simulate => cmd_simulate(cli)?,
        Command::Selftest => {
            let (text, ok) = selftest(cli)?;
            return Ok(if ok { Outcome::Emit(text) } else { Outcome::SelftestFailed(text) });
        }
    };
    Ok(Outcome::Emit(text))
}

fn require_a(cli: &Cli) -> AnyResult<f64> {
    match cli.a {
        Some(a) if a.is_finite() => Ok(a),
        Some(_) => Err("--A must be finite for this command".into()),
        None => Err("--A is required for this command".into()),
    }
}

fn a_values(cli: &Cli) -> AnyResult<Vec<f64>> {
    if !cli.a_list.is_empty() {
        if cli.a_list.iter().any(|a| !a.is_finite()) {
            return Err("--a-list entries must be finite".into());
        }
        return Ok(cli.a_list.clone());
    }
    Ok(vec![require_a(cli)?])
}

/// JSON with every float rounded to 12 significant digits.
fn to_json<T: Serialize>(value: &T) -> AnyResult<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let r: f64 = fmt_g(x).parse().unwrap_or(x);
            if let Some(m) = serde_json::Number::from_f64(r) {
                *n = m;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

fn render(cli: &Cli, table: &Table, json: impl FnOnce() -> AnyResult<String>) -> AnyResult<String> {
    Ok(match cli.format {
        Format::Csv => table.to_csv(),
        Format::Table => table.to_text(),
        Format::Json => json()?,
    })
}

fn regime_name(sol: &EigenSolution) -> &'static str {
    if sol.is_real() {
        "RealXi"
    } else {
        "ImaginaryXi"
    }
}

fn cmd_lambda(cli: &Cli) -> AnyResult<String> {
    #[derive(Serialize)]
    struct LambdaOut {
        #[serde(flatten)]
        sol: EigenSolution,
        bracket_lo: f64,
        bracket_hi: f64,
    }
    let mut rows = Vec::new();
    for a in a_values(cli)? {
        let sol = solve_lambda(a, cli.tol)?;
        let (lo, hi) = lambda_bracket(a);
        rows.push(LambdaOut { sol, bracket_lo: lo, bracket_hi: hi });
    }
    let mut t =
        Table::new(&["A", "lambda", "xi", "one_minus_xi", "regime", "residual", "bracket_lo", "bracket_hi"]);
    for r in &rows {
        let s = &r.sol;
        t.push(vec![
            fmt_g(s.a),
            fmt_g(s.lambda),
            fmt_g(s.xi),
            fmt_g(s.one_minus_xi),
            regime_name(s).into(),
            fmt_g(s.residual),
            fmt_g(r.bracket_lo),
            fmt_g(r.bracket_hi),
        ]);
    }
    render(cli, &t, || if rows.len() == 1 { to_json(&rows[0]) } else { to_json(&rows) })
}

fn cmd_tilde_a(cli: &Cli) -> AnyResult<String> {
    let tol = cli.tol.clamp(1e-12, 1e-4);
    let a = critical_a(tol)?;
    let mut t = Table::new(&["tilde_a"]);
    t.push(vec![fmt_g(a)]);
    render(cli, &t, || to_json(&serde_json::json!({ "tilde_a": a, "lambda": LAMBDA_CRITICAL })))
}

fn cmd_grid(cli: &Cli) -> AnyResult<String> {
    let grid = build_grid(require_a(cli)?, cli.n_points, cli.tol)?;
    render(cli, &report::grid_table(&grid), || to_json(&grid))
}

#[derive(Serialize)]
struct BoundsSummary {
    #[serde(rename = "A")]
    a: f64,
    lambda: f64,
    regime: &'static str,
    conjectural_upper: bool,
    max_lb_err: f64,
    max_ub_err: f64,
    peak_ub_err_x: f64,
    peak_relative_ub_err: f64,
    max_ub_taylor1_err: Option<f64>,
    max_ub_taylor2_err: Option<f64>,
    /// Fraction of points below 1 where taylor1 is at most ub_simple.
    taylor1_tighter_fraction: Option<f64>,
    min_lb_err: f64,
    min_ub_err: f64,
}

fn summarize_bounds(grid: &DistGrid) -> BoundsSummary {
    let taylor_err = |col: &[Option<f64>]| -> Option<f64> {
        col.iter()
            .zip(&grid.q_cdf)
            .map(|(u, q)| u.map(|u| u - q))
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
    };
    let tighter = grid.ub_taylor1.iter().all(Option::is_some).then(|| {
        let pairs: Vec<(f64, f64)> = grid
            .ub_taylor1
            .iter()
            .zip(&grid.ub_simple)
            .filter_map(|(t, &s)| t.map(|t| (t, s)))
            .filter(|&(t, s)| t < 1.0 && s < 1.0)
            .collect();
        pairs.iter().filter(|(t, s)| t <= s).count() as f64 / pairs.len().max(1) as f64
    });
    let (px, _, prel) = grid.ub_err_peak();
    BoundsSummary {
        a: grid.a,
        lambda: grid.lambda,
        regime: if grid.regime == qsd_sr::Regime::RealXi { "RealXi" } else { "ImaginaryXi" },
        conjectural_upper: grid.conjectural_upper,
        max_lb_err: grid.max_lb_err(),
        max_ub_err: grid.max_ub_err(),
        peak_ub_err_x: px,
        peak_relative_ub_err: prel,
        max_ub_taylor1_err: taylor_err(&grid.ub_taylor1),
        max_ub_taylor2_err: taylor_err(&grid.ub_taylor2),
        taylor1_tighter_fraction: tighter,
        min_lb_err: grid.lb_err.iter().cloned().fold(f64::INFINITY, f64::min),
        min_ub_err: grid.ub_err.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

fn cmd_bounds(cli: &Cli) -> AnyResult<String> {
    let rows: Vec<BoundsSummary> = a_values(cli)?
        .into_iter()
        .map(|a| Ok(summarize_bounds(&build_grid(a, cli.n_points, cli.tol)?)))
        .collect::<AnyResult<_>>()?;
    let opt = |x: Option<f64>| x.map_or("nan".to_string(), fmt_g);
    let mut t = Table::new(&[
        "A",
        "lambda",
        "regime",
        "max_lb_err",
        "max_ub_err",
        "peak_ub_err_x",
        "peak_relative_ub_err",
        "max_ub_taylor1_err",
        "max_ub_taylor2_err",
        "taylor1_tighter_fraction",
    ]);
    for r in &rows {
        t.push(vec![
            fmt_g(r.a),
            fmt_g(r.lambda),
            r.regime.into(),
            fmt_g(r.max_lb_err),
            fmt_g(r.max_ub_err),
            fmt_g(r.peak_ub_err_x),
            fmt_g(r.peak_relative_ub_err),
            opt(r.max_ub_taylor1_err),
            opt(r.max_ub_taylor2_err),
            opt(r.taylor1_tighter_fraction),
        ]);
    }
    render(cli, &t, || to_json(&rows))
}

fn cmd_gap(cli: &Cli) -> AnyResult<String> {
    #[derive(Serialize)]
    struct GapOut {
        #[serde(rename = "A")]
        a: f64,
        x: f64,
        sup_gap: f64,
        ratio: f64,
    }
    let mut rows = Vec::new();
    for a in a_values(cli)? {
        let g = sup_gap(&solve_lambda(a, cli.tol)?)?;
        rows.push(GapOut { a, x: g.x, sup_gap: g.gap, ratio: g.gap * a / a.ln() });
    }
    let mut t = Table::new(&["A", "x", "sup_gap", "ratio"]);
    for r in &rows {
        t.push(vec![fmt_g(r.a), fmt_g(r.x), fmt_g(r.sup_gap), fmt_g(r.ratio)]);
    }
    render(cli, &t, || if rows.len() == 1 { to_json(&rows[0]) } else { to_json(&rows) })
}

fn cmd_rate_table(cli: &Cli) -> AnyResult<String> {
    let list = if cli.a_list.is_empty() {
        match cli.a {
            Some(a) => vec![a],
            None => DEFAULT_A_LIST.split(',').map(|s| s.parse().expect("default list")).collect(),
        }
    } else {
        cli.a_list.clone()
    };
    let rows: Vec<RateRow> = rate_table(&list, cli.tol)?;
    render(cli, &report::rate_table(&rows), || to_json(&rows))
}

fn cmd_simulate(cli: &Cli) -> AnyResult<String> {
    let a = cli.a.ok_or("--A is required for simulate (use --A inf for no absorption)")?;
    let horizon = cli.horizon.unwrap_or(if a.is_finite() { 60.0 } else { 30.0 });
    let cfg = McConfig::new(a, horizon, cli.paths, cli.seed).with_dt(cli.dt);
    let res: McResult = simulate(&cfg)?;
    let hits = HittingTimeSummary::from_result(&res);
    Ok(match cli.format {
        Format::Csv => report::ecdf_table(&res.empirical_cdf).to_csv(),
        Format::Json => to_json(&serde_json::json!({ "result": res, "hitting_times": hits }))?,
        Format::Table => {
            let opt = |x: Option<f64>| x.map_or("nan".to_string(), fmt_g);
            report::key_value_table(&[
                ("A", fmt_g(a)),
                ("horizon", fmt_g(horizon)),
                ("dt", fmt_g(cli.dt)),
                ("n_paths", cli.paths.to_string()),
                ("seed", cli.seed.to_string()),
                ("survivors", res.survivors.to_string()),
                ("absorbed", res.absorbed.to_string()),
                ("survival_fraction", fmt_g(res.survival_fraction)),
                ("ks_distance", fmt_g(res.ks_distance)),
                ("mean_hitting_time", opt(res.mean_hitting_time)),
                ("median_hitting_time", opt(hits.median)),
                ("fitted_decay_rate", opt(hits.fitted_decay_rate)),
                ("lambda", opt(res.lambda)),
            ])
            .to_text()
        }
    })
}

#[derive(Serialize)]
struct Check {
    name: String,
    ok: bool,
    detail: String,
    seconds: f64,
}

fn selftest(cli: &Cli) -> AnyResult<(String, bool)> {
    let mut checks: Vec<Check> = Vec::new();
    let mut run_check = |name: &str, f: &dyn Fn() -> AnyResult<(bool, String)>| {
        let t = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        checks.push(Check { name: name.into(), ok, detail, seconds: t.elapsed().as_secs_f64() });
    };

    run_check("critical_a", &|| {
        let a = critical_a(1e-10)?;
        Ok(((a - TILDE_A_REFERENCE).abs() <= 1e-5, format!("tilde_a={}", fmt_g(a))))
    });
    run_check("lambda_bracket_and_order", &|| {
        let grid = [12.0, 15.0, 20.0, 50.0, 100.0, 1e3, 1e4, 1e5];
        let mut prev = f64::INFINITY;
        let mut ok = true;
        for a in grid {
            let l = solve_lambda(a, 1e-12)?.lambda;
            let (lo, hi) = lambda_bracket(a);
            ok &= lo < l && l < hi && l < prev;
            if a >= 100.0 {
                ok &= (l * a - 1.0).abs() <= 3.0 / a.sqrt();
            }
            prev = l;
        }
        Ok((ok, format!("{} boundaries", grid.len())))
    });
    run_check("w1_half_order_identity", &|| {
        let worst = (0..=40)
            .map(|i| 0.01 * 2000f64.powf(i as f64 / 40.0))
            .map(|z| Ok((whittaker_w1(Order::real(0.5), z)? - z * (-z / 2.0).exp()).abs()))
            .collect::<AnyResult<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((worst <= 1e-10, format!("max abs err {}", fmt_g(worst))))
    });
    run_check("dk_dnu_identities", &|| {
        let zero = bessel_k_dnu_scaled(Order::real(0.0), 1.3)?;
        let z = 0.8;
        let want = (std::f64::consts::PI / (2.0 * z)).sqrt() * z.exp() * e1(2.0 * z)? * z.exp();
        let got = bessel_k_dnu_scaled(Order::real(0.5), z)?;
        let err = (got - want).abs() / want;
        Ok((zero == 0.0 && err <= 1e-9, format!("rel err at 1/2: {}", fmt_g(err))))
    });
    run_check("e1_sandwich", &|| {
        let ok = (0..=60).map(|i| 1e-3 * 1e6f64.powf(i as f64 / 60.0)).all(|x| {
            let v = e1_scaled(x).unwrap_or(f64::NAN);
            0.5 * (1.0 + 2.0 / x).ln() <= v && v <= (1.0 + 1.0 / x).ln()
        });
        Ok((ok, "61 points on [1e-3, 1e3]".into()))
    });
    run_check("bound_sandwich", &|| {
        let mut worst: f64 = 0.0;
        for a in [15.0, 50.0, 100.0] {
            let sol = solve_lambda(a, 1e-12)?;
            for x in mixed_grid(a, 128) {
                let q = qsd_cdf(&sol, x)?;
                let lb = lower_bound(a, x)?;
                let ub = upper_bound_simple(&sol, x)?;
                let t1 = upper_bound_taylor1(&sol, x)?;
                worst = worst.max(lb - q).max(q - ub).max(q - t1);
            }
        }
        Ok((worst <= 1e-9, format!("worst violation {}", fmt_g(worst))))
    });
    run_check("normalization", &|| {
        let m = pdf_mass(&solve_lambda(50.0, 1e-12)?)?;
        Ok(((m - 1.0).abs() <= 1e-6, format!("mass {}", fmt_g(m))))
    });
    run_check("monotone_in_A", &|| {
        let r = monotonicity_check(12.0, 50.0, &mixed_grid(12.0, 128), 1e-9)?;
        Ok((r.is_clean(), format!("max increase {}", fmt_g(r.max_increase))))
    });
    run_check("gap_shrinks", &|| {
        let g: Vec<f64> = [100.0, 1000.0]
            .iter()
            .map(|&a| Ok(sup_gap(&solve_lambda(a, 1e-12)?)?.gap))
            .collect::<AnyResult<_>>()?;
        Ok((g[0] > g[1], format!("{} > {}", fmt_g(g[0]), fmt_g(g[1]))))
    });

    let ok = checks.iter().all(|c| c.ok);
    let mut t = Table::new(&["check", "status", "detail"]);
    for c in &checks {
        t.push(vec![c.name.clone(), if c.ok { "ok" } else { "FAIL" }.into(), c.detail.clone()]);
    }
    let text = match cli.format {
        Format::Json => to_json(&serde_json::json!({ "ok": ok, "checks": checks }))?,
        Format::Csv => t.to_csv(),
        Format::Table => t.to_text(),
    };
    Ok((text, ok))
}
