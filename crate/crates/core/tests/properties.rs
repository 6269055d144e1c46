use hybridjump::boltzmann::{self, collision_jump, cutoff_phi, sample_theta};
use hybridjump::measure::{MarkMeasure, Region};
use hybridjump::weakerr::{self, fit_rate};
use hybridjump::RngStream;
use proptest::prelude::*;

fn interval_list() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0).prop_map(|(a, w)| (a, a + w)), 0..5)
}

fn region() -> impl Strategy<Value = Region<f64>> {
    interval_list().prop_map(Region::from_intervals)
}

fn length(r: &Region<f64>) -> f64 {
    r.pieces().iter().map(|(a, b)| (b.min(1e6) - a.max(-1e6)).max(0.0)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn region_pieces_are_sorted_and_disjoint(r in region()) {
        for w in r.pieces().windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
        for (a, b) in r.pieces() {
            prop_assert!(a < b);
        }
    }

    #[test]
    fn region_algebra(a in region(), b in region(), z in -6.0f64..6.0) {
        let u = a.union(&b);
        let i = a.intersect(&b);
        let d = a.difference(&b);
        prop_assert_eq!(u.contains(z), a.contains(z) || b.contains(z));
        prop_assert_eq!(i.contains(z), a.contains(z) && b.contains(z));
        prop_assert_eq!(d.contains(z), a.contains(z) && !b.contains(z));
        prop_assert_eq!(a.complement().contains(z), !a.contains(z));
        prop_assert!(i.is_subset_of(&a) && i.is_subset_of(&u));
        prop_assert!((length(&u) + length(&i) - length(&a) - length(&b)).abs() < 1e-9);
    }

    #[test]
    fn mass_is_additive(
        lo in 0.0f64..1.0,
        w in 0.5f64..4.0,
        coef in 0.1f64..3.0,
        exponent in -0.9f64..1.5,
        cuts in prop::collection::vec(0.0f64..1.0, 1..4),
    ) {
        let hi = lo + w;
        let m = MarkMeasure::power_law(lo, hi, coef, exponent).unwrap();
        let total = m.total_mass().unwrap();
        let mut pts: Vec<f64> = cuts.iter().map(|c| lo + c * w).collect();
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        let parts: f64 = pts.windows(2).map(|p| m.mass(&Region::interval(p[0], p[1])).unwrap()).sum();
        prop_assert!((parts - total).abs() <= 1e-12 * total.max(1.0));
        // closed form of int_lo^hi coef z^exponent dz
        let e1 = exponent + 1.0;
        let exact = coef * (hi.powf(e1) - lo.powf(e1)) / e1;
        prop_assert!((total - exact).abs() <= 1e-12 * exact.max(1.0));
    }

    #[test]
    fn weak_error_is_symmetric(a in prop::collection::vec(-10.0f64..10.0, 2..60), b in prop::collection::vec(-10.0f64..10.0, 2..60)) {
        let x = weakerr::weak_error(&a, &b).unwrap();
        let y = weakerr::weak_error(&b, &a).unwrap();
        prop_assert_eq!(x.estimate, y.estimate);
        prop_assert!((x.difference + y.difference).abs() <= 1e-12 * (1.0 + x.difference.abs()));
        prop_assert!((x.std_error - y.std_error).abs() <= 1e-12 * (1.0 + x.std_error));
        prop_assert!(x.ci_low <= x.estimate.max(0.0) + 1e-12);
    }

    #[test]
    fn rate_fit_is_scale_invariant(
        slope in -2.0f64..2.0,
        c in 0.01f64..100.0,
        s in 0.01f64..100.0,
        noise in prop::collection::vec(-0.1f64..0.1, 5),
    ) {
        let params: [f64; 5] = [0.04, 0.02, 0.01, 0.005, 0.0025];
        let errs: Vec<f64> = params.iter().zip(&noise).map(|(p, n)| c * p.powf(slope) * n.exp()).collect();
        let f = fit_rate(&params, &errs).unwrap();
        let scaled: Vec<f64> = errs.iter().map(|e| e * s).collect();
        let g = fit_rate(&params, &scaled).unwrap();
        prop_assert!((f.slope - g.slope).abs() < 1e-9);
        prop_assert!((g.intercept - f.intercept - s.ln()).abs() < 1e-9);
        let sp: Vec<f64> = params.iter().map(|p| p * s).collect();
        let h = fit_rate(&sp, &errs).unwrap();
        prop_assert!((f.slope - h.slope).abs() < 1e-9);
    }

    #[test]
    fn sampled_angles_stay_in_range(nu in 0.05f64..0.95, lo in 1e-4f64..0.5, w in 0.0f64..1.0, seed in any::<u64>()) {
        let hi = (lo + w).min(std::f64::consts::FRAC_PI_2);
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..50 {
            let th: f64 = sample_theta(nu, lo, hi, &mut rng);
            prop_assert!(th.abs() >= lo * (1.0 - 1e-12) && th.abs() <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn post_collision_point_is_on_the_circle(
        th in -3.2f64..3.2,
        v in prop::array::uniform2(-5.0f64..5.0),
        w in prop::array::uniform2(-5.0f64..5.0),
    ) {
        let j = collision_jump(th, v, w);
        let post = [v[0] + j[0], v[1] + j[1]];
        let mid = [(v[0] + w[0]) / 2.0, (v[1] + w[1]) / 2.0];
        let r = ((v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2)).sqrt() / 2.0;
        let d = ((post[0] - mid[0]).powi(2) + (post[1] - mid[1]).powi(2)).sqrt();
        prop_assert!((d - r).abs() <= 1e-12 * (1.0 + r));
        let jw = collision_jump(th, w, v);
        prop_assert!((j[0] + jw[0]).abs() < 1e-12 && (j[1] + jw[1]).abs() < 1e-12);
    }

    #[test]
    fn cutoff_phi_is_even_and_bounded(eps in 1e-3f64..0.3, gamma in 0.5f64..5.0, x in -10.0f64..10.0) {
        let p = cutoff_phi(eps, gamma, x);
        prop_assert_eq!(p, cutoff_phi(eps, gamma, -x));
        let lo = (2.0 * eps).min(gamma);
        prop_assert!(p >= lo - 1e-12 && p <= gamma + 1e-12, "phi = {}", p);
    }

    #[test]
    fn theta_mass_is_additive(nu in 0.05f64..0.95, a in 1e-3f64..0.5, b in 0.0f64..0.5, c in 0.0f64..0.5) {
        let (m1, m2) = (a + b, a + b + c);
        let whole = boltzmann::theta_mass(nu, a, m2);
        let split = boltzmann::theta_mass(nu, a, m1) + boltzmann::theta_mass(nu, m1, m2);
        prop_assert!((whole - split).abs() <= 1e-10 * whole.max(1.0));
    }
}
