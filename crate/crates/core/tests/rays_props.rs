use expmap_core::config::RayConfig;
use expmap_core::dynamics::Complex;
use expmap_core::rays::{dynamic_ray_point, lexicographic_order, trace_parameter_ray, vertical_order};
use expmap_core::symbolic::ExternalAddress;
use proptest::prelude::*;

fn address() -> impl Strategy<Value = ExternalAddress> {
    (
        prop::collection::vec(-2i64..=2, 0..3),
        prop::collection::vec(-2i64..=2, 1..4),
    )
        .prop_map(|(pre, per)| ExternalAddress::new(pre, per).unwrap())
}

fn cfg() -> RayConfig {
    RayConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ray_samples_are_fixed_points(s in address()) {
        let ray = trace_parameter_ray(&s, 20.0, 2.0, &cfg()).unwrap();
        for p in &ray.samples {
            let image = dynamic_ray_point(p.kappa, &s, p.t, p.depth).unwrap();
            prop_assert!((image - p.kappa).norm() < 1e-9, "t = {}", p.t);
            prop_assert!(p.t > 0.0);
        }
        for w in ray.samples.windows(2) {
            prop_assert!(w[1].t < w[0].t);
        }
    }

    #[test]
    fn ray_is_injective_with_monotone_real_part(s in address()) {
        let ray = trace_parameter_ray(&s, 20.0, 5.0, &cfg()).unwrap();
        for w in ray.samples.windows(2) {
            prop_assert!(w[1].kappa.re < w[0].kappa.re);
        }
        for (i, a) in ray.samples.iter().enumerate() {
            for b in &ray.samples[i + 1..] {
                prop_assert!((a.kappa - b.kappa).norm() > 0.0);
            }
        }
    }

    #[test]
    fn distinct_rays_are_disjoint(a in address(), b in address()) {
        prop_assume!(a != b);
        let ra = trace_parameter_ray(&a, 20.0, 3.0, &cfg()).unwrap();
        let rb = trace_parameter_ray(&b, 20.0, 3.0, &cfg()).unwrap();
        for p in &ra.samples {
            if let Some(q) = rb.sample_at(p.t) {
                prop_assert!((p.kappa - q.kappa).norm() > p.residual + q.residual);
            }
        }
    }

    #[test]
    fn vertical_order_matches_lexicographic_when_resolved(v in prop::collection::vec(address(), 2..6)) {
        let mut v = v;
        v.sort();
        v.dedup();
        if let Ok(order) = vertical_order(&v, 20.0, &cfg()) {
            prop_assert_eq!(order, lexicographic_order(&v));
        }
    }
}

#[test]
fn ray_with_first_entry_one_sits_at_height_two_pi() {
    let s: ExternalAddress = "[;1,0]".parse().unwrap();
    let ray = trace_parameter_ray(&s, 20.0, 19.0, &cfg()).unwrap();
    let k = ray.samples[0].kappa;
    assert!((k.im - std::f64::consts::TAU).abs() < 1e-6);
}

#[test]
fn real_ray_decreases_toward_minus_one() {
    let ray = trace_parameter_ray(&"[;0]".parse().unwrap(), 20.0, 0.05, &cfg()).unwrap();
    assert!((ray.samples[0].kappa - Complex::new(20.0, 0.0)).norm() < 1e-6);
    for w in ray.samples.windows(2) {
        assert_eq!(w[1].kappa.im, 0.0);
        assert!(w[1].kappa.re < w[0].kappa.re);
    }
    assert!(ray.last().kappa.re > -1.0 && ray.last().kappa.re < -0.9);
}
