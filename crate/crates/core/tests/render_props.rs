use expmap_core::components::{internal_ray, HyperbolicComponent, Window};
use expmap_core::dynamics::Complex;
use expmap_core::rays::trace_parameter_ray;
use expmap_core::render::{
    classify_pixels, overlay_rays, render, write_ppm, PixelClass, RenderSpec, INTERNAL_RAY_COLOUR,
    PARAMETER_RAY_COLOUR,
};
use expmap_core::verify::period_one_agreement;
use expmap_core::Config;

fn spec(window: Window, w: usize, h: usize) -> RenderSpec {
    let cfg = Config::default();
    RenderSpec::new(window, w, h, &cfg.render, &cfg.dynamics)
}

#[test]
fn period_one_window_is_period_one() {
    let cfg = Config::default();
    let s = spec(Window::new(-2.5, -1.5, -0.2, 0.2), 40, 16);
    let classes = classify_pixels(&s, &cfg.dynamics, 0).unwrap();
    let share = classes.iter().filter(|&&c| c == PixelClass::Period(1)).count() as f64 / classes.len() as f64;
    assert!(share >= 0.99);
}

#[test]
fn escaping_near_the_real_axis() {
    let cfg = Config::default();
    let thin = spec(Window::new(3.0, 4.0, -0.01, 0.01), 40, 4);
    let classes = classify_pixels(&thin, &cfg.dynamics, 0).unwrap();
    assert!(classes.iter().all(|c| matches!(c, PixelClass::Escaping { .. })));

    // farther out E(kappa) winds around and half the window belongs to thin
    // period-3 tails, where the third iterate returns to within e^{-10^10}
    let wide = spec(Window::new(3.0, 4.0, -0.2, 0.2), 40, 16);
    let classes = classify_pixels(&wide, &cfg.dynamics, 0).unwrap();
    let escaping = classes.iter().filter(|c| matches!(c, PixelClass::Escaping { .. })).count();
    let period3 = classes.iter().filter(|&&c| c == PixelClass::Period(3)).count();
    assert_eq!(escaping + period3, classes.len());
    assert!(escaping > classes.len() / 3);
}

#[test]
fn rendering_is_deterministic_and_agrees_with_the_oracle() {
    let cfg = Config::default();
    let s = spec(Window::new(-3.0, 0.5, -2.5, 2.5), 70, 100);
    let bytes = |threads| {
        let mut buf = Vec::new();
        write_ppm(&render(&s, &cfg.dynamics, threads).unwrap(), &mut buf).unwrap();
        buf
    };
    let one = bytes(1);
    assert_eq!(one, bytes(4));
    assert_eq!(one, bytes(0));
    let classes = classify_pixels(&s, &cfg.dynamics, 2).unwrap();
    let (agreement, far) = period_one_agreement(&s, &classes);
    assert!(agreement >= 0.99, "{agreement}");
    assert!(far <= classes.len() / 100);
}

#[test]
fn overlays() {
    let cfg = Config::default();
    let s = spec(Window::new(-1.5, 2.5, -1.0, 1.0), 80, 40);
    let image = render(&s, &cfg.dynamics, 0).unwrap();
    assert_eq!(overlay_rays(&image, &s, &[], &[]), image);

    // the real ray is the horizontal line through the middle rows
    let ray = trace_parameter_ray(&"[;0]".parse().unwrap(), 20.0, 0.05, &cfg.rays).unwrap();
    let out = overlay_rays(&image, &s, &[ray], &[]);
    for y in 0..s.height {
        for x in 0..s.width {
            if out.get(x, y) == PARAMETER_RAY_COLOUR && out.get(x, y) != image.get(x, y) {
                assert!(y == 19 || y == 20, "pixel {x},{y}");
            }
        }
    }
    let marked = (0..s.width).filter(|&x| out.get(x, 20) == PARAMETER_RAY_COLOUR || out.get(x, 19) == PARAMETER_RAY_COLOUR);
    assert!(marked.count() >= 35);

    // internal ray at h = 0 of period 1 runs along the real axis to -1
    let s2 = spec(Window::new(-4.0, 0.0, -1.0, 1.0), 80, 40);
    let image2 = render(&s2, &cfg.dynamics, 0).unwrap();
    let w = HyperbolicComponent::period_one(0);
    let ir = internal_ray(&w, 0.0, -3.0, -1e-3, &cfg.components).unwrap();
    for p in &ir.samples {
        assert_eq!(p.kappa.im, 0.0);
        assert!(p.kappa.re < -1.0);
    }
    assert!((ir.samples.last().unwrap().kappa - Complex::new(-1.0, 0.0)).norm() < 1e-5);
    let out2 = overlay_rays(&image2, &s2, &[], &[ir]);
    let changed: Vec<(usize, usize)> = (0..s2.height)
        .flat_map(|y| (0..s2.width).map(move |x| (x, y)))
        .filter(|&(x, y)| out2.get(x, y) == INTERNAL_RAY_COLOUR)
        .collect();
    assert!(!changed.is_empty());
    assert!(changed.iter().all(|&(x, y)| (y == 19 || y == 20) && x <= 61));
}
