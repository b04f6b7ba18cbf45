//! Monte Carlo oracle for the absorbed diffusion `dR = dt + R dB`.
//!
//! Paths are advanced with Euler–Maruyama, `R ← R + dt + R·√dt·Z`, and a
//! path is absorbed the first time `R ≥ A` after a step. Each path draws from
//! its own ChaCha8 stream selected by `(seed, path index)`, so results do not
//! depend on how paths are split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{solve_lambda, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::qsd::{stationary_cdf, QsdLaw};

pub const MIN_PATHS: usize = 10_000;
/// Largest admissible `horizon · λ_A`; keeps roughly `e^{-6}` of paths alive.
pub const MAX_DECAY_EXPONENT: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Absorbing boundary; `f64::INFINITY` disables absorption.
    #[serde(rename = "A")]
    pub a: f64,
    /// Headstart `R_0`.
    pub r: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl McConfig {
    pub fn new(a: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self { a, r: 0.0, dt: 1e-3, horizon, n_paths, seed, scheme: Scheme::EulerMaruyama }
    }

    pub fn with_headstart(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn is_absorbing(&self) -> bool {
        self.a.is_finite()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    /// Checks the configuration invariants. For a finite boundary this
    /// solves for `λ_A` and returns it.
    pub fn validate(&self) -> Result<Option<f64>> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.a > 0.0) || self.a.is_nan() {
            return bad(format!("A must be positive, got {}", self.a));
        }
        if !(self.r >= 0.0 && self.r < self.a) {
            return bad(format!("headstart must lie in [0, A), got {}", self.r));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        let max_dt = 1e-3 * self.a.min(1.0);
        if !(self.dt > 0.0 && self.dt <= max_dt * (1.0 + 1e-12)) {
            return bad(format!("dt must lie in (0, {max_dt}], got {}", self.dt));
        }
        if self.n_paths < MIN_PATHS {
            return bad(format!("need at least {MIN_PATHS} paths, got {}", self.n_paths));
        }
        if !self.is_absorbing() {
            return Ok(None);
        }
        let lambda = solve_lambda(self.a, DEFAULT_TOL)?.lambda;
        if self.horizon * lambda > MAX_DECAY_EXPONENT {
            return bad(format!(
                "horizon * lambda_A = {:.3} exceeds {MAX_DECAY_EXPONENT}; too few paths would survive",
                self.horizon * lambda
            ));
        }
        Ok(Some(lambda))
    }
}

/// Right-continuous empirical cdf of a sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.sort_by(f64::total_cmp);
        Self { sorted: sample }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// `(value, ecdf)` at every distinct sample value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(self.sorted.len());
        for (i, &v) in self.sorted.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = (i + 1) as f64 / n,
                _ => out.push((v, (i + 1) as f64 / n)),
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Linear-interpolated sample quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        if n == 0 {
            return f64::NAN;
        }
        let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < n {
            self.sorted[i] * (1.0 - frac) + self.sorted[i + 1] * frac
        } else {
            self.sorted[n - 1]
        }
    }
}

/// Kolmogorov–Smirnov distance `sup_x |F_n(x) - F(x)|` against a continuous
/// reference, checked on both sides of every jump.
pub fn ks_distance<F: Fn(f64) -> f64>(empirical: &EmpiricalCdf, reference_cdf: F) -> f64 {
    let n = empirical.len() as f64;
    let mut d: f64 = 0.0;
    let mut below = 0.0;
    for (v, above) in empirical.steps() {
        let f = reference_cdf(v);
        d = d.max((above - f).abs()).max((f - below).abs());
        below = above;
    }
    if n == 0.0 {
        return f64::NAN;
    }
    d
}

/// Distance between two empirical cdfs on the pooled sample points.
pub fn ks_distance_ecdf(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    a.values().iter().chain(b.values()).map(|&x| (a.eval(x) - b.eval(x)).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
enum PathOutcome {
    Survived(f64),
    Absorbed(f64),
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn run_path(cfg: &McConfig, path: usize) -> PathOutcome {
    let mut rng = path_rng(cfg.seed, path);
    let steps = cfg.steps();
    let dt = cfg.horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut r = cfg.r;
    for k in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        r += dt + r * sqrt_dt * z;
        if r >= cfg.a {
            return PathOutcome::Absorbed((k + 1) as f64 * dt);
        }
    }
    PathOutcome::Survived(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub config: McConfig,
    pub survivors: usize,
    pub absorbed: usize,
    pub survival_fraction: f64,
    /// KS distance of the survivors' law to `Q_A` (finite `A`) or to `H`.
    pub ks_distance: f64,
    /// Mean absorption time among absorbed paths; `None` if none were absorbed.
    pub mean_hitting_time: Option<f64>,
    /// `λ_A` for a finite boundary.
    pub lambda: Option<f64>,
    #[serde(skip)]
    pub empirical_cdf: EmpiricalCdf,
    #[serde(skip)]
    pub hitting_times: EmpiricalCdf,
}

/// Simulates `n_paths` paths to the horizon and summarises the survivors.
pub fn simulate(config: &McConfig) -> Result<McResult> {
    let lambda = config.validate()?;
    let outcomes: Vec<PathOutcome> =
        (0..config.n_paths).into_par_iter().map(|i| run_path(config, i)).collect();
    summarize(config, lambda, outcomes)
}

fn summarize(config: &McConfig, lambda: Option<f64>, outcomes: Vec<PathOutcome>) -> Result<McResult> {
    let mut terminal = Vec::with_capacity(outcomes.len());
    let mut hits = Vec::new();
    for o in outcomes {
        match o {
            PathOutcome::Survived(r) => terminal.push(r),
            PathOutcome::Absorbed(t) => hits.push(t),
        }
    }
    if terminal.is_empty() {
        return Err(Error::NoSurvivors(config.n_paths));
    }
    let empirical_cdf = EmpiricalCdf::new(terminal);
    let hitting_times = EmpiricalCdf::new(hits);
    let ks = match lambda {
        Some(_) => {
            let law = QsdLaw::new(&solve_lambda(config.a, DEFAULT_TOL)?)?;
            ks_distance(&empirical_cdf, |x| law.cdf(x).unwrap_or(f64::NAN))
        }
        None => ks_distance(&empirical_cdf, |x| stationary_cdf(x).unwrap_or(f64::NAN)),
    };
    let survivors = empirical_cdf.len();
    Ok(McResult {
        config: *config,
        survivors,
        absorbed: hitting_times.len(),
        survival_fraction: survivors as f64 / config.n_paths as f64,
        ks_distance: ks,
        mean_hitting_time: (!hitting_times.is_empty()).then(|| hitting_times.mean()),
        lambda,
        empirical_cdf,
        hitting_times,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeSummary {
    pub n_paths: usize,
    pub absorbed: usize,
    pub survivors: usize,
    pub fraction_absorbed: f64,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q10: Option<f64>,
    pub q90: Option<f64>,
    /// Slope of `-log S(t)` over the last two thirds of the horizon.
    pub fitted_decay_rate: Option<f64>,
    pub lambda: Option<f64>,
}

impl HittingTimeSummary {
    pub fn from_result(res: &McResult) -> Self {
        let h = &res.hitting_times;
        let some = |v: f64| (!h.is_empty()).then_some(v);
        Self {
            n_paths: res.config.n_paths,
            absorbed: res.absorbed,
            survivors: res.survivors,
            fraction_absorbed: res.absorbed as f64 / res.config.n_paths as f64,
            mean: res.mean_hitting_time,
            median: some(h.quantile(0.5)),
            q10: some(h.quantile(0.1)),
            q90: some(h.quantile(0.9)),
            fitted_decay_rate: fit_decay_rate(res),
            lambda: res.lambda,
        }
    }
}

/// Least-squares slope of `log S(t)` on 50 equispaced times in
/// `[T/3, T]`, where `S(t)` is the empirical survival fraction.
fn fit_decay_rate(res: &McResult) -> Option<f64> {
    let t_end = res.config.horizon;
    let n = res.config.n_paths as f64;
    let pts: Vec<(f64, f64)> = (0..50)
        .map(|i| t_end / 3.0 + (t_end * 2.0 / 3.0) * i as f64 / 49.0)
        .filter_map(|t| {
            let surv = 1.0 - res.hitting_times.eval(t) * res.absorbed as f64 / n;
            (surv > 0.0).then(|| (t, surv.ln()))
        })
        .collect();
    if pts.len() < 2 || res.absorbed == 0 {
        return None;
    }
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y));
    let (mt, my) = (st / m, sy / m);
    let (sxy, sxx) =
        pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
    Some(-sxy / sxx)
}

pub fn hitting_time_stats(config: &McConfig) -> Result<HittingTimeSummary> {
    Ok(HittingTimeSummary::from_result(&simulate(config)?))
}

/// Sample mean of `R_T - T - r` with its standard error, for an
/// unabsorbed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub mean: f64,
    pub std_err: f64,
    /// `mean / std_err`
    pub z: f64,
}

pub fn martingale_drift(config: &McConfig) -> Result<DriftCheck> {
    if config.is_absorbing() {
        return Err(Error::Config("martingale check needs A = infinity".into()));
    }
    let res = simulate(config)?;
    let shift = res.config.horizon + res.config.r;
    let xs = res.empirical_cdf.values();
    let n = xs.len() as f64;
    let mean = xs.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - shift - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_err = (var / n).sqrt();
    Ok(DriftCheck { mean, std_err, z: mean / std_err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_steps_and_eval() {
        let e = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.eval(10.0), 1.0);
        assert_eq!(e.steps(), vec![(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
        assert_eq!(e.quantile(0.5), 2.0);
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = EmpiricalCdf::new(vec![0.3, 1.2, 5.0, 0.7]);
        assert_eq!(ks_distance_ecdf(&a, &a.clone()), 0.0);
    }

    #[test]
    fn ks_single_sample() {
        let h = |x: f64| stationary_cdf(x).unwrap();
        let e = EmpiricalCdf::new(vec![2.0]);
        let d = ks_distance(&e, h);
        assert!((d - h(2.0).max(1.0 - h(2.0))).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = McConfig::new(30.0, 60.0, 10_000, 1);
        assert!(ok.validate().unwrap().is_some());
        assert!(McConfig::new(30.0, 60.0, 100, 1).validate().is_err());
        assert!(McConfig::new(30.0, 60.0, 10_000, 1).with_dt(1e-2).validate().is_err());
        assert!(McConfig::new(30.0, 60.0, 10_000, 1).with_headstart(30.0).validate().is_err());
        assert!(McConfig::new(30.0, 400.0, 10_000, 1).validate().is_err());
        assert!(McConfig::new(f64::INFINITY, 5.0, 10_000, 1).validate().unwrap().is_none());
        assert!(martingale_drift(&ok).is_err());
    }

    #[test]
    fn all_absorbed_is_an_error() {
        let cfg = McConfig::new(30.0, 1.0, 3, 1);
        let out = vec![PathOutcome::Absorbed(0.5); 3];
        assert_eq!(summarize(&cfg, Some(0.04), out).unwrap_err(), Error::NoSurvivors(3));
    }

    #[test]
    fn path_streams_are_independent_of_order() {
        let cfg = McConfig::new(30.0, 1.0, 10_000, 9);
        let a: Vec<_> = (0..8).map(|i| format!("{:?}", run_path(&cfg, i))).collect();
        let b: Vec<_> = (0..8).rev().map(|i| format!("{:?}", run_path(&cfg, i))).collect();
        let b: Vec<_> = b.into_iter().rev().collect();
        assert_eq!(a, b);
    }
}
