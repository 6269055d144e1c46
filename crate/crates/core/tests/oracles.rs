//! Closed forms and independent quadrature checked against the library.

use hybridjump::boltzmann::{self, BoltzmannParams, SmallJumps};
use hybridjump::generator::{self, GeneratorOptions, TestFunction};
use hybridjump::regimes::{self, ThreeRegimeExample};
use hybridjump::suite;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `Si(c) = int_0^c sin(u)/u du`.
fn si(c: f64) -> f64 {
    (0..30).map(|k| (-1f64).powi(k as i32) * c.powi(2 * k as i32 + 1) / ((2 * k + 1) as f64 * factorial(2 * k + 1))).sum()
}

/// `Cin(c) = int_0^c (1 - cos u)/u du`.
fn cin(c: f64) -> f64 {
    (1..30).map(|k| (-1f64).powi(k as i32 + 1) * c.powi(2 * k as i32) / (2.0 * k as f64 * factorial(2 * k))).sum()
}

#[test]
fn limit_generator_on_sine() {
    let ex = ThreeRegimeExample::<f64>::standard(0.01);
    let model = ex.limit_model().unwrap();
    let f = TestFunction::sine();
    let opts = GeneratorOptions::default();
    let (b1, b2) = (regimes::beta1(), regimes::beta2());
    for &x in &[-2.5f64, -1.0, -0.3, 0.0, 0.4, 1.0, 2.0, 3.7] {
        let c = 1.0 / (1.0 + x * x);
        let g = 1.0 + 0.5 * (-x * x).exp();
        // jumps c sqrt(z) against dz/z on (0, 1]: substitute u = c sqrt(z)
        let jump = 2.0 * g * (-x.sin() * cin(c) + x.cos() * si(c));
        let drift = b2 * c * g * x.cos();
        let diffusion = -0.5 * b1 * b1 * c * c * g * x.sin();
        let t = generator::generator_terms(&model, &f, 0.0, &[x], &opts).unwrap();
        assert!((t.jump - jump).abs() < 1e-8, "x = {x}: {} vs {jump}", t.jump);
        assert!((t.drift - drift).abs() < 1e-12, "x = {x}");
        assert!((t.diffusion - diffusion).abs() < 1e-12, "x = {x}");
    }
}

#[test]
fn discrete_toy_generator_is_a_finite_sum() {
    let model = suite::discrete_toy();
    let f = TestFunction::<f64>::new(1, |x| (x[0] * x[0] + 1.0).ln()).with_gradient(|x, g| g[0] = 2.0 * x[0] / (x[0] * x[0] + 1.0));
    let ff = |x: f64| (x * x + 1.0).ln();
    for &x in &[-1.5, 0.0, 0.5, 2.0] {
        let mut expected = -0.5 * x * 2.0 * x / (x * x + 1.0);
        for (z, w) in [(0.0, 0.5), (1.0, 1.0), (2.0, 0.5)] {
            let c = 0.6 * (z - 1.0) + 0.3 - 0.2 * x;
            expected += w * (ff(x + c) - ff(x)) * (1.0 + 0.8 * (x + z).sin());
        }
        let got = generator::apply_generator(&model, &f, 0.0, &[x], &GeneratorOptions::default()).unwrap();
        assert!((got - expected).abs() < 1e-13, "x = {x}: {got} vs {expected}");
    }
}

/// `2 sum_k coef_k delta^(2k - nu) / ((2k)! (2k - nu))` for even power series `sum coef_k theta^2k`.
fn even_series(nu: f64, delta: f64, coef: impl Fn(u32) -> f64) -> f64 {
    (1..25).map(|k| 2.0 * coef(k) * delta.powf(2.0 * k as f64 - nu) / (factorial(2 * k) * (2.0 * k as f64 - nu))).sum()
}

#[test]
fn theta_moments_match_series() {
    for &(nu, delta) in &[(0.5, 0.1), (0.3, 0.4), (0.9, 1.0), (0.1, std::f64::consts::FRAC_PI_2)] {
        let m = boltzmann::theta_moments(nu, delta).unwrap();
        let sgn = |k: u32| if k % 2 == 0 { 1.0 } else { -1.0 };
        // cos - 1, (cos - 1)^2 = (3 - 4 cos + cos 2t)/2, sin^2 = (1 - cos 2t)/2
        let i1 = even_series(nu, delta, sgn);
        let i2 = even_series(nu, delta, |k| 0.5 * sgn(k) * (4f64.powi(k as i32) - 4.0));
        let i3 = even_series(nu, delta, |k| -0.5 * sgn(k) * 4f64.powi(k as i32));
        for (got, want) in [(m.i1, i1), (m.i2, i2), (m.i3, i3)] {
            assert!((got - want).abs() <= 1e-11 * want.abs().max(1e-3), "nu {nu} delta {delta}: {got} vs {want}");
        }
        assert!(m.i2 > 0.0 && m.i2 <= m.i3 && m.i1 < 0.0);
    }
    // leading term -delta^(2-nu)/(2-nu) = -0.0210819, next correction is O(delta^2) relative
    let m = boltzmann::theta_moments(0.5, 0.1).unwrap();
    let lead = -(0.1f64.powf(1.5)) / 1.5;
    assert!((m.i1 - lead).abs() <= 1e-3 * lead.abs(), "{} vs {lead}", m.i1);
    assert!((m.i1 + 0.021074).abs() < 1e-6, "{}", m.i1);
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// `int clamp(x - eps s, 2eps, gamma) chi(s) ds` with the kinks as panel edges.
fn phi_by_convolution(eps: f64, gamma: f64, x: f64) -> f64 {
    let mut cuts = vec![-1.0, 1.0, (x - 2.0 * eps) / eps, (x - gamma) / eps];
    cuts.retain(|s| (-1.0..=1.0).contains(s));
    cuts.sort_by(f64::total_cmp);
    let clamp = |y: f64| y.max(2.0 * eps).min(gamma);
    let norm = simpson(bump, -1.0, 1.0, 4000);
    cuts.windows(2).map(|w| simpson(|s| clamp(x - eps * s) * bump(s), w[0], w[1], 4000)).sum::<f64>() / norm
}

#[test]
fn cutoff_phi_matches_direct_convolution() {
    for &(eps, gamma) in &[(0.1, 3.0), (0.05, 0.4), (0.2, 1.0)] {
        for i in 0..=120 {
            let x = i as f64 * (gamma + 2.0 * eps) / 120.0;
            let got = boltzmann::cutoff_phi(eps, gamma, x);
            let want = phi_by_convolution(eps, gamma, x);
            assert!((got - want).abs() < 1e-8, "eps {eps} gamma {gamma} x {x}: {got} vs {want}");
        }
    }
}

#[test]
fn small_jump_coefficients() {
    let params = BoltzmannParams::first_order(0.3, 0.1, 0.2);
    let sj = SmallJumps::new(params).unwrap();
    let v: [f64; 2] = [0.4, -1.1];
    assert_eq!(sj.drift(v, &[v]), [0.0, 0.0]);
    assert_eq!(sj.covariance(v, &[v]), [0.0; 4]);

    let ens: [[f64; 2]; 4] = [[1.0, 0.5], [-0.3, 2.0], [0.0, -1.2], [2.2, 0.1]];
    let a = sj.covariance(v, &ens);
    let weighted: f64 = ens
        .iter()
        .map(|u| {
            let q = (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2);
            q * sj.rate(q.sqrt())
        })
        .sum::<f64>()
        / ens.len() as f64;
    let tr = 0.25 * (sj.moments.i2 + sj.moments.i3) * weighted;
    assert!((a[0] + a[3] - tr).abs() <= 1e-14 * tr);
    assert_eq!(a[1], a[2]);
    assert!(a[0] * a[3] - a[1] * a[2] >= 0.0 && a[0] >= 0.0);

    // a pair symmetric about v gives no drift
    let d = sj.drift(v, &[[v[0] + 0.7, v[1] - 0.2], [v[0] - 0.7, v[1] + 0.2]]);
    assert!(d[0].abs() < 1e-15 && d[1].abs() < 1e-15);
}

#[test]
fn collision_matrix_is_half_rotation_minus_identity() {
    for i in 0..50 {
        let th = -3.0 + 6.0 * i as f64 / 49.0;
        let a = boltzmann::collision_matrix(th);
        let r = [2.0 * a[0] + 1.0, 2.0 * a[1], 2.0 * a[2], 2.0 * a[3] + 1.0];
        assert!((r[0] * r[3] - r[1] * r[2] - 1.0).abs() < 1e-14);
        assert!((r[0] * r[0] + r[2] * r[2] - 1.0).abs() < 1e-14);
        assert!((r[0] * r[1] + r[2] * r[3]).abs() < 1e-14);
    }
    assert_eq!(boltzmann::collision_jump(0.0, [1.0, 2.0], [3.0, -1.0]), [0.0, 0.0]);
    let j = boltzmann::collision_jump(std::f64::consts::FRAC_PI_2, [2.0, 0.0], [0.0, 0.0]);
    assert!((j[0] + 1.0).abs() < 1e-15 && (j[1] - 1.0).abs() < 1e-15);
}
