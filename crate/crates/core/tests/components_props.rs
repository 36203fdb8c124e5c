use std::f64::consts::TAU;

use expmap_core::components::{
    boundary_trace, find_components, internal_ray_landing, uniform_angles, ComponentError, HyperbolicComponent,
    Window,
};
use expmap_core::config::{ComponentConfig, DynamicsConfig};
use expmap_core::dynamics::{find_periodic_orbit, Complex};
use expmap_core::verify::landing_test_components;
use expmap_core::Config;
use proptest::prelude::*;

fn cfgs() -> (ComponentConfig, DynamicsConfig) {
    (ComponentConfig::default(), DynamicsConfig::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn phi_inverse_has_the_prescribed_multiplier(t in -3.0f64..-0.05, theta in -3.1f64..3.1, which in 0usize..3) {
        let (c, _) = cfgs();
        let components = landing_test_components(&Config::default()).unwrap();
        let w = &components[which];
        let phi = Complex::new(t, theta);
        match w.phi_inverse_orbit(phi, &c) {
            Ok((kappa, z)) => {
                let o = expmap_core::components::orbit_at(kappa, z, w.period).unwrap();
                let mu = phi.exp();
                prop_assert!((o.multiplier - mu).norm() <= 1e-9 * mu.norm());
                prop_assert!(o.closure_defect(kappa) < 1e-9);
            }
            // continuation of higher-period components can fail far out in the tail
            Err(e) => prop_assert!(w.period > 1 && !matches!(e, ComponentError::DivergedToInfinity { .. }), "{e}"),
        }
    }
}

#[test]
fn landings_are_finite_for_the_test_set() {
    let cfg = Config::default();
    for w in landing_test_components(&cfg).unwrap() {
        for h in [0.0, 0.1, 0.25, 0.37, 0.5, 0.8] {
            let (_, l) = internal_ray_landing(&w, h, &cfg.components, &cfg.dynamics)
                .unwrap_or_else(|e| panic!("period {} h = {h}: {e}", w.period));
            assert!(l.kappa.re.is_finite() && l.kappa.im.is_finite());
        }
    }
}

#[test]
fn boundary_samples_are_indifferent_and_simple() {
    let cfg = Config::default();
    for w in landing_test_components(&cfg).unwrap() {
        let b = boundary_trace(&w, &uniform_angles(48), &cfg.components).unwrap();
        assert!(b.samples.len() >= 40, "period {}", w.period);
        for s in &b.samples {
            assert!((s.mu.norm() - 1.0).abs() <= 1e-9);
        }
        let steps: Vec<f64> = b.samples.windows(2).map(|p| (p[1].kappa - p[0].kappa).norm()).collect();
        let local = steps.iter().cloned().fold(f64::INFINITY, f64::min);
        for (i, a) in b.samples.iter().enumerate() {
            for q in &b.samples[i + 1..] {
                assert!((a.kappa - q.kappa).norm() > local / 10.0, "period {}", w.period);
            }
        }
    }
}

#[test]
fn census_seeds_are_attracting_cycles() {
    let (c, d) = cfgs();
    let window = Window::new(-1.0, 3.0, -3.0, 3.0);
    let comps = find_components(2, window, 0.1, &c, &d).unwrap();
    assert!(!comps.is_empty());
    for w in comps.iter().chain(&find_components(3, window, 0.1, &c, &d).unwrap()) {
        let o = find_periodic_orbit(w.seed.kappa, w.period, w.seed.z, &d).unwrap();
        assert!(o.closure_defect(w.seed.kappa) < 1e-9);
        assert!(o.multiplier.norm() < 1.0);
        assert_eq!(o.minimal_period(1e-8), w.period);
    }
}

#[test]
fn period_one_has_closed_form_tag_structure() {
    let (c, _) = cfgs();
    for k in -2..=2 {
        let w = HyperbolicComponent::period_one(k);
        let kappa = w.phi_inverse(Complex::new(-1.0, 0.5), &c).unwrap();
        let z = Complex::new(-1.0, 0.5 + TAU * k as f64);
        assert!((kappa - (z - z.exp())).norm() < 1e-9);
    }
}
