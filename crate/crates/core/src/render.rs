//! Period-coloured pictures of parameter space.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::components::{InternalRay, Window};
use crate::config::{DynamicsConfig, RenderConfig};
use crate::dynamics::{classify_singular_orbit, Complex, OrbitClassification};
use crate::rays::ParameterRay;

pub type Rgb = [u8; 3];

/// Colour reserved for parameter rays; no palette entry uses it.
pub const PARAMETER_RAY_COLOUR: Rgb = [255, 255, 255];
/// Colour reserved for internal rays.
pub const INTERNAL_RAY_COLOUR: Rgb = [255, 0, 255];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("image size must be at least 1x1, got {0}x{1}")]
    EmptyImage(usize, usize),
    #[error("degenerate window")]
    DegenerateWindow,
    #[error("palette has {found} period colours, need {expected}")]
    Palette { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    /// Colour of period `k` at index `k - 1`.
    pub periods: Vec<Rgb>,
    pub high_period: Rgb,
    /// Escaping pixels blend from `escaping[0]` (slow) to `escaping[1]` (fast).
    pub escaping: [Rgb; 2],
    pub undetermined: Rgb,
}

impl Palette {
    /// Evenly spaced hues for periods `1..=cap`.
    pub fn with_periods(cap: usize) -> Self {
        let periods = (0..cap)
            .map(|k| hsv(k as f64 / cap.max(1) as f64, 0.75, 0.95))
            .collect();
        Self {
            periods,
            high_period: [90, 90, 90],
            escaping: [[200, 200, 210], [10, 10, 40]],
            undetermined: [0, 0, 0],
        }
    }
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb {
    let h6 = (h.fract() * 6.0).max(0.0);
    let sector = h6.floor() as usize % 6;
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let byte = |x: f64| (x * 255.0).round().clamp(0.0, 254.0) as u8;
    [byte(r), byte(g), byte(b)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub window: Window,
    pub width: usize,
    pub height: usize,
    pub max_iter: usize,
    pub escape_radius: f64,
    pub period_cap: usize,
    pub palette: Palette,
}

impl RenderSpec {
    pub fn new(window: Window, width: usize, height: usize, render: &RenderConfig, dynamics: &DynamicsConfig) -> Self {
        Self {
            window,
            width,
            height,
            max_iter: render.max_iter,
            escape_radius: dynamics.escape_radius,
            period_cap: render.period_cap,
            palette: Palette::with_periods(render.period_cap),
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::EmptyImage(self.width, self.height));
        }
        if !self.window.is_valid() {
            return Err(RenderError::DegenerateWindow);
        }
        if self.palette.periods.len() < self.period_cap {
            return Err(RenderError::Palette {
                expected: self.period_cap,
                found: self.palette.periods.len(),
            });
        }
        Ok(())
    }

    /// Parameter at the centre of pixel `(x, y)`; row 0 is the top.
    pub fn pixel_centre(&self, x: usize, y: usize) -> Complex {
        let w = &self.window;
        Complex::new(
            w.re_min + (x as f64 + 0.5) * (w.re_max - w.re_min) / self.width as f64,
            w.im_max - (y as f64 + 0.5) * (w.im_max - w.im_min) / self.height as f64,
        )
    }

    /// Continuous pixel coordinates of a parameter.
    fn to_pixel(&self, k: Complex) -> (f64, f64) {
        let w = &self.window;
        (
            (k.re - w.re_min) / (w.re_max - w.re_min) * self.width as f64,
            (w.im_max - k.im) / (w.im_max - w.im_min) * self.height as f64,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelClass {
    Period(usize),
    HighPeriod,
    Escaping { steps: usize },
    Undetermined,
}

impl PixelClass {
    pub fn from_classification(c: &OrbitClassification, period_cap: usize) -> Self {
        match *c {
            OrbitClassification::Attracting { period, .. } if period <= period_cap => Self::Period(period),
            OrbitClassification::Attracting { .. } => Self::HighPeriod,
            OrbitClassification::Escaping { steps, .. } => Self::Escaping { steps },
            _ => Self::Undetermined,
        }
    }

    pub fn colour(self, palette: &Palette) -> Rgb {
        match self {
            Self::Period(k) => palette.periods[k - 1],
            Self::HighPeriod => palette.high_period,
            Self::Escaping { steps } => {
                let s = 1.0 - 1.0 / (1.0 + steps as f64 / 6.0);
                let [a, b] = palette.escaping;
                std::array::from_fn(|i| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * s).round() as u8)
            }
            Self::Undetermined => palette.undetermined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    fn put(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }
}

fn pixel_dynamics(spec: &RenderSpec, dynamics: &DynamicsConfig) -> DynamicsConfig {
    DynamicsConfig {
        max_iter: spec.max_iter,
        escape_radius: spec.escape_radius,
        ..*dynamics
    }
}

/// Per-pixel classification, row-major.
pub fn classify_pixels(spec: &RenderSpec, dynamics: &DynamicsConfig, threads: usize) -> Result<Vec<PixelClass>, RenderError> {
    spec.validate()?;
    let cfg = pixel_dynamics(spec, dynamics);
    let run = || {
        (0..spec.height)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..spec.width).map(move |x| {
                    let c = classify_singular_orbit(spec.pixel_centre(x, y), &cfg);
                    PixelClass::from_classification(&c, spec.period_cap)
                })
            })
            .collect()
    };
    if threads == 0 {
        return Ok(run());
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => Ok(pool.install(run)),
        Err(_) => Ok(run()),
    }
}

pub fn render(spec: &RenderSpec, dynamics: &DynamicsConfig, threads: usize) -> Result<Image, RenderError> {
    let classes = classify_pixels(spec, dynamics, threads)?;
    Ok(Image {
        width: spec.width,
        height: spec.height,
        pixels: classes.iter().map(|c| c.colour(&spec.palette)).collect(),
    })
}

/// Clips the segment `a`-`b` to `[0, w] x [0, h]` (Liang-Barsky).
fn clip(a: (f64, f64), b: (f64, f64), w: f64, h: f64) -> Option<((f64, f64), (f64, f64))> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [(-dx, a.0), (dx, w - a.0), (-dy, a.1), (dy, h - a.1)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then(|| ((a.0 + t0 * dx, a.1 + t0 * dy), (a.0 + t1 * dx, a.1 + t1 * dy)))
}

fn draw_polyline(image: &mut Image, spec: &RenderSpec, points: impl Iterator<Item = Complex>, colour: Rgb) {
    let (w, h) = (image.width as f64, image.height as f64);
    let pts: Vec<(f64, f64)> = points
        .filter(|k| k.re.is_finite() && k.im.is_finite())
        .map(|k| spec.to_pixel(k))
        .collect();
    let mut plot = |x: f64, y: f64| {
        let (px, py) = (x.floor(), y.floor());
        if px >= 0.0 && py >= 0.0 && px < w && py < h {
            image.put(px as usize, py as usize, colour);
        }
    };
    if let [only] = pts[..] {
        plot(only.0, only.1);
    }
    for seg in pts.windows(2) {
        let Some((a, b)) = clip(seg[0], seg[1], w, h) else {
            continue;
        };
        let n = ((b.0 - a.0).abs().max((b.1 - a.1).abs()) * 2.0).ceil() as usize;
        for i in 0..=n {
            let s = if n == 0 { 0.0 } else { i as f64 / n as f64 };
            plot(a.0 + (b.0 - a.0) * s, a.1 + (b.1 - a.1) * s);
        }
    }
}

/// Draws parameter and internal rays over a rendered image of the same
/// window. Samples outside the window are clipped.
pub fn overlay_rays(image: &Image, spec: &RenderSpec, rays: &[ParameterRay], internal: &[InternalRay]) -> Image {
    let mut out = image.clone();
    for ray in rays {
        draw_polyline(&mut out, spec, ray.samples.iter().map(|p| p.kappa), PARAMETER_RAY_COLOUR);
    }
    for ray in internal {
        let pts = ray.samples.iter().map(|s| s.kappa).chain(ray.landing);
        draw_polyline(&mut out, spec, pts, INTERNAL_RAY_COLOUR);
    }
    out
}

/// Binary PPM (P6).
pub fn write_ppm(image: &Image, mut out: impl Write) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", image.width, image.height)?;
    out.write_all(&image.bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(window: Window, w: usize, h: usize) -> RenderSpec {
        RenderSpec::new(window, w, h, &RenderConfig::default(), &DynamicsConfig::default())
    }

    #[test]
    fn single_pixel_at_minus_two() {
        let s = spec(Window::new(-2.5, -1.5, -0.5, 0.5), 1, 1);
        assert_eq!(s.pixel_centre(0, 0), Complex::new(-2.0, 0.0));
        let classes = classify_pixels(&s, &DynamicsConfig::default(), 0).unwrap();
        assert_eq!(classes, vec![PixelClass::Period(1)]);
    }

    #[test]
    fn reserved_colours_are_not_in_the_palette() {
        let p = Palette::with_periods(16);
        for c in p.periods.iter().chain([&p.high_period, &p.undetermined]) {
            assert_ne!(*c, PARAMETER_RAY_COLOUR);
            assert_ne!(*c, INTERNAL_RAY_COLOUR);
        }
        for steps in 0..200 {
            let c = PixelClass::Escaping { steps }.colour(&p);
            assert_ne!(c, PARAMETER_RAY_COLOUR);
            assert_ne!(c, INTERNAL_RAY_COLOUR);
        }
        let mut distinct = p.periods.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 16);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let w = Window::new(0.0, 1.0, 0.0, 1.0);
        assert_eq!(spec(w, 0, 3).validate(), Err(RenderError::EmptyImage(0, 3)));
        assert_eq!(
            spec(Window::new(1.0, 1.0, 0.0, 1.0), 2, 2).validate(),
            Err(RenderError::DegenerateWindow)
        );
    }

    #[test]
    fn clipping() {
        assert_eq!(clip((-1.0, 1.0), (3.0, 1.0), 2.0, 2.0), Some(((0.0, 1.0), (2.0, 1.0))));
        assert_eq!(clip((-1.0, 5.0), (3.0, 5.0), 2.0, 2.0), None);
    }

    #[test]
    fn ppm_header() {
        let img = Image {
            width: 2,
            height: 1,
            pixels: vec![[1, 2, 3], [4, 5, 6]],
        };
        let mut buf = Vec::new();
        write_ppm(&img, &mut buf).unwrap();
        assert_eq!(buf, b"P6\n2 1\n255\n\x01\x02\x03\x04\x05\x06");
    }
}
