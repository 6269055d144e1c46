use hybridjump::boltzmann::{sample_theta, theta_mass};
use hybridjump::measure::{MarkMeasure, Region};
use hybridjump::simulate::{self, par_map_streams, Representation, SimConfig};
use hybridjump::suite;
use hybridjump::weakerr::{self, chi_square, chi_square_poisson, fit_rate, ks_one_sample, ks_two_sample};
use hybridjump::RngStream;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

const REPEATS: u64 = 100;

fn draws(m: &MarkMeasure<f64>, g: &Region<f64>, n: usize, seed: u64) -> Vec<f64> {
    let s = m.sampler(g).unwrap();
    let mut rng = RngStream::new(seed, 0);
    (0..n).map(|_| s.sample(&mut rng)).collect()
}

#[test]
fn power_law_marks_follow_their_cdf() {
    let cases: [(f64, f64, f64, f64, f64); 3] = [
        (0.1, 2.0, -0.5, 0.3, 1.5),
        (0.0, 1.0, -1.0, 1e-3, 1.0),
        (0.01, 0.03, -2.0, 0.01, 0.03),
    ];
    for (k, &(lo, hi, e, a, b)) in cases.iter().enumerate() {
        let m = MarkMeasure::power_law(lo, hi, 2.0, e).unwrap();
        let x = draws(&m, &Region::interval(a, b), 20_000, 40 + k as u64);
        assert!(x.iter().all(|&z| z > a && z <= b));
        let anti = |z: f64| if e == -1.0 { z.ln() } else { z.powf(e + 1.0) };
        let cdf = |z: f64| (anti(z.clamp(a, b)) - anti(a)) / (anti(b) - anti(a));
        let r = ks_one_sample(&x, cdf).unwrap();
        assert!(r.p_value > 0.01, "case {k}: {r:?}");
    }
}

#[test]
fn angles_match_their_density() {
    let (nu, lo, hi) = (0.5, 0.1, std::f64::consts::FRAC_PI_2);
    let n = 100_000;
    let mut rng = RngStream::new(2024, 0);
    let bins = 20;
    let edges: Vec<f64> = (0..=bins).map(|i| lo * (hi / lo).powf(i as f64 / bins as f64)).collect();
    let mut observed = vec![0.0; 2 * bins];
    for _ in 0..n {
        let th: f64 = sample_theta(nu, lo, hi, &mut rng);
        let i = edges.partition_point(|&e| e < th.abs()).clamp(1, bins) - 1;
        observed[if th < 0.0 { bins + i } else { i }] += 1.0;
    }
    let total = theta_mass(nu, lo, hi);
    let mut expected: Vec<f64> = edges.windows(2).map(|w| 0.5 * n as f64 * theta_mass(nu, w[0], w[1]) / total).collect();
    expected.extend_from_within(..);
    let r = chi_square(&observed, &expected, 0).unwrap();
    assert!(r.p_value > 0.01, "{r:?}");

    let mut rng = RngStream::new(1, 0);
    for _ in 0..100 {
        let th: f64 = sample_theta(nu, 0.3, 0.3, &mut rng);
        assert_eq!(th.abs(), 0.3);
    }
}

#[test]
fn same_law_weak_error_covers_zero() {
    let normal = Normal::new(0.3, 1.7).unwrap();
    let mut covered = 0;
    for seed in 0..REPEATS {
        let mut rng = RngStream::new(seed, 0);
        let a: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let e = weakerr::weak_error(&a, &b).unwrap();
        assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high);
        if e.ci_low == 0.0 {
            covered += 1;
        }
    }
    assert!(covered >= 95, "{covered}/{REPEATS}");
}

#[test]
fn noisy_power_law_slope() {
    let params: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];
    let mut inside = 0;
    for seed in 0..REPEATS {
        let mut rng = RngStream::new(seed, 1);
        let errs: Vec<f64> = params.iter().map(|p| 0.7 * p.sqrt() * rng.random_range(0.95..1.05)).collect();
        let fit = fit_rate(&params, &errs).unwrap();
        if (0.45..=0.55).contains(&fit.slope) {
            inside += 1;
        }
    }
    assert!(inside >= 95, "{inside}/{REPEATS}");
}

fn poisson_counts(lambda: f64, seed: u64) -> Vec<u64> {
    let d = Poisson::new(lambda).unwrap();
    let mut rng = RngStream::new(seed, 2);
    (0..10_000).map(|_| d.sample(&mut rng) as u64).collect()
}

#[test]
fn poisson_chi_square_size_and_power() {
    let mut accepted = 0;
    let mut rejected = 0;
    for seed in 0..REPEATS {
        let c = poisson_counts(18.0, seed);
        if chi_square_poisson(&c, 18.0).unwrap().p_value > 0.01 {
            accepted += 1;
        }
        if chi_square_poisson(&c, 25.0).unwrap().p_value < 0.01 {
            rejected += 1;
        }
    }
    assert!(accepted >= 95, "{accepted}/{REPEATS}");
    assert!(rejected >= 99, "{rejected}/{REPEATS}");
}

#[test]
fn ks_detects_a_shift() {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut rng = RngStream::new(5, 0);
    let a: Vec<f64> = (0..5_000).map(|_| n.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..5_000).map(|_| n.sample(&mut rng) + 0.2).collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-6);
    let same = ks_two_sample(&a, &a).unwrap();
    assert_eq!(same.statistic, 0.0);
    assert_eq!(same.p_value, 1.0);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let model = suite::discrete_toy();
    let cfg = SimConfig::new(1.0, 1e-2, 77, 500, Representation::Fictive);
    let run = |w| simulate::terminal_samples(&model, &Region::all(), &[0.5], |x| x[0], &cfg, w).unwrap();
    let one = run(1);
    for w in [2, 3, 8, 0] {
        let other = run(w);
        assert!(one.iter().zip(&other).all(|(a, b)| a.to_bits() == b.to_bits()), "workers = {w}");
    }
    let again = par_map_streams(9, 64, 5, |rng, i| Ok((i, rng.random::<u64>()))).unwrap();
    let serial = par_map_streams(9, 64, 1, |rng, i| Ok((i, rng.random::<u64>()))).unwrap();
    assert_eq!(again, serial);
}
