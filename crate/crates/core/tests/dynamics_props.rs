use expmap_core::config::DynamicsConfig;
use expmap_core::dynamics::{
    classify_singular_orbit, eval_map, f_iterate, find_periodic_orbit, orbit, Complex, OrbitClassification,
};
use proptest::prelude::*;

fn cfg() -> DynamicsConfig {
    DynamicsConfig::default()
}

proptest! {
    #[test]
    fn multiplier_is_product_of_differences(re in -4.0f64..1.0, im in -6.0f64..6.0) {
        let kappa = Complex::new(re, im);
        let pts = orbit(kappa, kappa, 12);
        for w in pts.windows(2) {
            // e^{z_j} = z_{j+1} - kappa as computed values
            let a = w[0].exp();
            let b = w[1] - kappa;
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn real_parameters_have_real_orbits(re in -5.0f64..3.0) {
        let kappa = Complex::new(re, 0.0);
        for z in orbit(kappa, kappa, 50) {
            prop_assert_eq!(z.im, 0.0);
        }
        if let OrbitClassification::Attracting { multiplier, orbit_point, .. } = classify_singular_orbit(kappa, &cfg()) {
            prop_assert!(multiplier.im.abs() < 1e-12);
            prop_assert!(orbit_point.im.abs() < 1e-12);
        }
    }

    #[test]
    fn f_iterate_dominates_identity(t in 0.0f64..3.0, n in 0usize..3) {
        let v = f_iterate(t, n).unwrap();
        prop_assert!(v >= t);
        if t > 0.0 && n > 0 {
            prop_assert!(v > t);
        }
        prop_assert!(f_iterate(t + 0.1, n).unwrap() >= v);
    }

    #[test]
    fn attracting_classifications_close_up(re in -4.0f64..0.5, im in -3.2f64..3.2) {
        let kappa = Complex::new(re, im);
        if let OrbitClassification::Attracting { period, multiplier, orbit_point } = classify_singular_orbit(kappa, &cfg()) {
            prop_assert!(multiplier.norm() < 1.0);
            let o = find_periodic_orbit(kappa, period, orbit_point, &cfg()).unwrap();
            prop_assert!(o.closure_defect(kappa) < 1e-9);
            let product = o.points.iter().fold(Complex::new(1.0, 0.0), |acc, z| acc * z.exp());
            prop_assert!((product - o.multiplier).norm() <= 1e-12 * (1.0 + product.norm()));
            let mut z = o.points[0];
            for j in 0..period {
                prop_assert!((z - o.points[j]).norm() < 1e-9);
                z = eval_map(kappa, z).unwrap();
            }
            prop_assert!((z - o.points[0]).norm() < 1e-9);
        }
    }
}
