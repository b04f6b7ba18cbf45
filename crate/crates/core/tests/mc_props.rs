use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsd_sr::mc::{
    hitting_time_stats, ks_distance, ks_distance_ecdf, martingale_drift, simulate, EmpiricalCdf, McConfig,
};
use qsd_sr::qsd::stationary_cdf;

fn h(x: f64) -> f64 {
    stationary_cdf(x).unwrap()
}

#[test]
fn ks_of_exact_draws_from_stationary_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let draws: Vec<f64> = (0..100_000).map(|_| -2.0 / rng.gen::<f64>().ln()).collect();
    let d = ks_distance(&EmpiricalCdf::new(draws), h);
    assert!(d <= 0.006, "{d}");
}

#[test]
fn deterministic_for_fixed_seed() {
    let cfg = McConfig::new(30.0, 3.0, 10_000, 42);
    assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    let other = simulate(&McConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(simulate(&cfg).unwrap().empirical_cdf, other.empirical_cdf);
}

#[test]
fn independent_of_thread_count() {
    let cfg = McConfig::new(30.0, 3.0, 10_000, 5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn accounting_and_ecdf_shape() {
    let res = simulate(&McConfig::new(15.0, 20.0, 10_000, 3)).unwrap();
    assert_eq!(res.survivors + res.absorbed, 10_000);
    assert!(res.absorbed > 0 && res.survivors > 0);
    let steps = res.empirical_cdf.steps();
    assert!(steps.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
    assert_eq!(steps.last().unwrap().1, 1.0);
    assert_eq!(res.empirical_cdf.eval(-1.0), 0.0);
    assert!(res.empirical_cdf.values().iter().all(|&v| v < 15.0));
    assert!(res.hitting_times.values().iter().all(|&t| t > 0.0 && t <= 20.0 + 1e-9));
}

#[test]
fn larger_headstart_hits_sooner() {
    let base = McConfig::new(30.0, 20.0, 10_000, 17);
    let near = simulate(&base.with_headstart(20.0)).unwrap();
    let far = simulate(&base).unwrap();
    assert!(near.survivors <= far.survivors);
    assert!(near.mean_hitting_time.unwrap() < far.mean_hitting_time.unwrap());
}

#[test]
fn survival_decays_at_lambda() {
    let s = hitting_time_stats(&McConfig::new(30.0, 60.0, 20_000, 8)).unwrap();
    let lambda = s.lambda.unwrap();
    let fit = s.fitted_decay_rate.unwrap();
    assert!((fit - lambda).abs() <= 0.15 * lambda, "fit {fit} vs {lambda}");
    assert_eq!(s.absorbed + s.survivors, s.n_paths);
    assert!(s.q10.unwrap() <= s.median.unwrap() && s.median.unwrap() <= s.q90.unwrap());
}

#[test]
fn unabsorbed_process_is_martingale() {
    let cfg = McConfig::new(f64::INFINITY, 2.0, 100_000, 99).with_headstart(1.0);
    let d = martingale_drift(&cfg).unwrap();
    assert!(d.z.abs() <= 3.0, "{d:?}");
}

#[test]
fn conditional_law_approaches_qsd() {
    // Paired seeds: each longer horizon extends the same paths. The law
    // settles within a few time units, after which the KS distance is at the
    // sampling-noise level of the shrinking survivor pool.
    let ks: Vec<(f64, f64, usize)> = [1.0, 3.0, 10.0, 60.0]
        .iter()
        .map(|&t| {
            let r = simulate(&McConfig::new(30.0, t, 20_000, 21)).unwrap();
            (t, r.ks_distance, r.survivors)
        })
        .collect();
    assert!(ks[0].1 > ks[1].1 && ks[1].1 > ks[2].1, "{ks:?}");
    for &(t, d, n) in &ks[2..] {
        // 99% quantile of the one-sample KS statistic.
        assert!(d <= 1.63 / (n as f64).sqrt(), "T={t}: {d} with {n} survivors");
    }
}

#[test]
fn limit_does_not_depend_on_headstart() {
    let base = McConfig::new(30.0, 40.0, 50_000, 77);
    let a = simulate(&base).unwrap();
    let b = simulate(&McConfig { seed: 78, ..base.with_headstart(15.0) }).unwrap();
    let d = ks_distance_ecdf(&a.empirical_cdf, &b.empirical_cdf);
    assert!(d <= 0.03, "{d}");
}
