//! Forward dynamics of `E_k(z) = e^z + k`.
//!
//! Everything here is a pure function of its arguments. Orbits never store
//! non-finite values: before exponentiating a point whose real part exceeds
//! [`EXP_CAP`] the iteration stops and reports an escape instead.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::DynamicsConfig;

pub type Complex = Complex64;

/// Largest real part that is still exponentiated.
pub const EXP_CAP: f64 = 700.0;

/// Derivatives of `E^n - id` smaller than this count as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DynamicsError {
    #[error("orbit escaped: Re(z) = {re:e} exceeds the exponent cap")]
    Escaped { re: f64 },
    #[error("F overflowed at step {step}")]
    Overflow { step: usize },
    #[error("Newton did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("degenerate derivative of E^n - id (|mu - 1| = {gap:e})")]
    DegenerateDerivative { gap: f64 },
    #[error("non-finite input")]
    NonFinite,
}

pub(crate) fn is_finite(z: Complex) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `e^z + kappa`.
pub fn eval_map(kappa: Complex, z: Complex) -> Result<Complex, DynamicsError> {
    if !is_finite(kappa) || !is_finite(z) {
        return Err(DynamicsError::NonFinite);
    }
    if z.re > EXP_CAP {
        return Err(DynamicsError::Escaped { re: z.re });
    }
    Ok(z.exp() + kappa)
}

/// `z0, E(z0), ..., E^nmax(z0)`, truncated at the first overflow.
pub fn orbit(kappa: Complex, z0: Complex, nmax: usize) -> Vec<Complex> {
    let mut points = Vec::with_capacity(nmax + 1);
    let mut z = z0;
    points.push(z);
    for _ in 0..nmax {
        match eval_map(kappa, z) {
            Ok(next) => {
                z = next;
                points.push(z);
            }
            Err(_) => break,
        }
    }
    points
}

/// Index of the horizontal strip `{(2k-1)pi < Im z <= (2k+1)pi}` containing `z`.
pub fn strip_index(z: Complex) -> i64 {
    (z.im / TAU).round() as i64
}

/// Distance of `Im(z)/2pi` from the nearest strip boundary, in units of `2pi`.
pub fn strip_margin(z: Complex) -> f64 {
    let x = z.im / TAU;
    0.5 - (x - x.round()).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitClassification {
    Escaping {
        steps: usize,
        /// Strip itinerary of the orbit, truncated where rounding error makes
        /// the strip of an iterate unknowable in double precision.
        address_prefix: Vec<i64>,
        /// Estimate of the potential `t` with `E^j(kappa) ~ F^j(t)`.
        potential: f64,
    },
    Attracting {
        period: usize,
        multiplier: Complex,
        orbit_point: Complex,
    },
    Indifferent {
        period: usize,
        multiplier: Complex,
    },
    Undetermined {
        steps: usize,
    },
}

impl OrbitClassification {
    pub fn is_escaping(&self) -> bool {
        matches!(self, Self::Escaping { .. })
    }

    pub fn attracting_period(&self) -> Option<usize> {
        match self {
            Self::Attracting { period, .. } => Some(*period),
            _ => None,
        }
    }
}

/// Tracks how far floating-point error in the computed orbit has grown.
struct ItineraryTracker {
    prefix: Vec<i64>,
    error: f64,
    reliable: bool,
}

impl ItineraryTracker {
    fn new(z0: Complex) -> Self {
        let mut tracker = Self {
            prefix: Vec::new(),
            error: f64::EPSILON * z0.norm(),
            reliable: true,
        };
        tracker.record(z0);
        tracker
    }

    fn record(&mut self, z: Complex) {
        if !self.reliable {
            return;
        }
        // an entry is trusted only if the uncertainty in Im(z) cannot move it
        // across a strip boundary
        let slack = strip_margin(z) * TAU - self.error;
        if self.error < 0.1 && slack > 1e-3 * TAU {
            self.prefix.push(strip_index(z));
        } else {
            self.reliable = false;
        }
    }

    fn step(&mut self, z: Complex, next: Complex) {
        let growth = z.re.exp();
        self.error = growth * (self.error + 4.0 * f64::EPSILON * (1.0 + z.norm()))
            + f64::EPSILON * next.norm();
        if !self.error.is_finite() {
            self.reliable = false;
        }
        self.record(next);
    }
}

/// Inverts `F` `steps` times on the real part of the last iterate.
fn potential_estimate(last: Complex, steps: usize) -> f64 {
    let mut t = last.re.max(0.0);
    for _ in 0..steps {
        t = t.ln_1p();
    }
    t
}

/// Classifies the orbit of the singular value `kappa`.
///
/// Escape is declared after `escape_steps` consecutive iterates beyond the
/// escape radius, or as soon as an iterate beyond the radius is followed by
/// one too large to exponentiate. Cycles are detected with Brent's method at
/// proximity `attract_tol` and then refined by Newton's method.
pub fn classify_singular_orbit(kappa: Complex, cfg: &DynamicsConfig) -> OrbitClassification {
    if !is_finite(kappa) {
        return OrbitClassification::Undetermined { steps: 0 };
    }
    let mut tracker = ItineraryTracker::new(kappa);
    let mut z = kappa;
    let mut above = usize::from(z.re > cfg.escape_radius);

    let mut tortoise = z;
    let mut power = 1usize;
    let mut lam = 0usize;
    let mut newton_attempts = 0;

    for step in 1..=cfg.max_iter {
        let next = match eval_map(kappa, z) {
            Ok(next) => next,
            Err(_) => {
                return OrbitClassification::Escaping {
                    steps: step - 1,
                    address_prefix: tracker.prefix,
                    potential: potential_estimate(z, step - 1),
                };
            }
        };
        tracker.step(z, next);
        if next.re > cfg.escape_radius && next.re > z.re {
            above += 1;
        } else {
            above = 0;
        }
        z = next;
        if above >= cfg.escape_steps || (above > 0 && z.re > EXP_CAP) {
            return OrbitClassification::Escaping {
                steps: step,
                address_prefix: tracker.prefix,
                potential: potential_estimate(z, step),
            };
        }

        lam += 1;
        if (z - tortoise).norm() < cfg.attract_tol && newton_attempts < 4 {
            newton_attempts += 1;
            if let Some(found) = refine_cycle(kappa, lam, z, cfg) {
                return found;
            }
            power = 1;
            lam = 0;
            tortoise = z;
            continue;
        }
        if lam == power {
            tortoise = z;
            power *= 2;
            lam = 0;
        }
    }
    OrbitClassification::Undetermined {
        steps: cfg.max_iter,
    }
}

fn refine_cycle(
    kappa: Complex,
    period: usize,
    seed: Complex,
    cfg: &DynamicsConfig,
) -> Option<OrbitClassification> {
    let orbit = match find_periodic_orbit(kappa, period, seed, cfg) {
        Ok(orbit) => orbit.reduce_period(kappa, cfg),
        Err(DynamicsError::DegenerateDerivative { .. }) => {
            let points = self::orbit(kappa, seed, period);
            let multiplier = multiplier_of(&points[..period]);
            return Some(OrbitClassification::Indifferent { period, multiplier });
        }
        Err(_) => return None,
    };
    let modulus = orbit.multiplier.norm();
    if modulus < 1.0 - cfg.indifferent_tol {
        Some(OrbitClassification::Attracting {
            period: orbit.period,
            multiplier: orbit.multiplier,
            orbit_point: orbit.points[0],
        })
    } else if (modulus - 1.0).abs() <= cfg.indifferent_tol {
        Some(OrbitClassification::Indifferent {
            period: orbit.period,
            multiplier: orbit.multiplier,
        })
    } else {
        None
    }
}

/// `prod e^{z_j}` over the given cycle points.
pub fn multiplier_of(points: &[Complex]) -> Complex {
    points.iter().map(|z| z.exp()).product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<Complex>,
    pub multiplier: Complex,
}

impl PeriodicOrbit {
    fn from_point(kappa: Complex, z: Complex, period: usize) -> Result<Self, DynamicsError> {
        let mut points = Vec::with_capacity(period);
        let mut w = z;
        for _ in 0..period {
            points.push(w);
            w = eval_map(kappa, w)?;
        }
        let multiplier = multiplier_of(&points);
        Ok(Self {
            period,
            points,
            multiplier,
        })
    }

    /// Replaces the orbit by its primitive cycle if the period is a multiple.
    pub fn reduce_period(self, kappa: Complex, cfg: &DynamicsConfig) -> Self {
        let z0 = self.points[0];
        for d in 1..self.period {
            if self.period % d != 0 {
                continue;
            }
            if (self.points[d] - z0).norm() <= 1e-8 * (1.0 + z0.norm()) {
                if let Ok(orbit) = find_periodic_orbit(kappa, d, z0, cfg) {
                    return orbit;
                }
            }
        }
        self
    }

    /// Largest `|E(z_j) - z_{j+1}|` around the cycle.
    pub fn closure_defect(&self, kappa: Complex) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|j| match eval_map(kappa, self.points[j]) {
                Ok(w) => (w - self.points[(j + 1) % n]).norm(),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Smallest `d` such that the cycle repeats after `d` steps.
    pub fn minimal_period(&self, tol: f64) -> usize {
        let n = self.points.len();
        (1..=n)
            .find(|&d| {
                n % d == 0 && (0..n).all(|j| (self.points[(j + d) % n] - self.points[j]).norm() <= tol)
            })
            .unwrap_or(n)
    }
}

/// Newton's method on `E^n(z) - z = 0`, derivative `prod e^{z_j} - 1`.
pub fn find_periodic_orbit(
    kappa: Complex,
    n: usize,
    seed: Complex,
    cfg: &DynamicsConfig,
) -> Result<PeriodicOrbit, DynamicsError> {
    assert!(n >= 1, "period must be positive");
    if !is_finite(kappa) || !is_finite(seed) {
        return Err(DynamicsError::NonFinite);
    }
    let mut z = seed;
    for _ in 0..cfg.newton_max_iter {
        let mut w = z;
        let mut derivative = Complex::new(1.0, 0.0);
        for _ in 0..n {
            let e = w.exp();
            if w.re > EXP_CAP {
                return Err(DynamicsError::Escaped { re: w.re });
            }
            derivative *= e;
            w = e + kappa;
        }
        let slope = derivative - 1.0;
        if slope.norm() < DEGENERATE_TOL {
            return Err(DynamicsError::DegenerateDerivative { gap: slope.norm() });
        }
        let step = (w - z) / slope;
        if !is_finite(step) {
            return Err(DynamicsError::NoConvergence {
                iterations: cfg.newton_max_iter,
            });
        }
        z -= step;
        if step.norm() < cfg.newton_tol * (1.0 + z.norm()) {
            return PeriodicOrbit::from_point(kappa, z, n);
        }
    }
    Err(DynamicsError::NoConvergence {
        iterations: cfg.newton_max_iter,
    })
}

/// `F^n(t)` for `F(t) = e^t - 1`.
pub fn f_iterate(t: f64, n: usize) -> Result<f64, DynamicsError> {
    assert!(t >= 0.0, "F is iterated on [0, inf)");
    let mut x = t;
    for step in 1..=n {
        x = x.exp_m1();
        if !x.is_finite() {
            return Err(DynamicsError::Overflow { step });
        }
    }
    Ok(x)
}

/// The point `2 pi i h` on the unit circle of multipliers.
pub fn unit_multiplier(h: f64) -> Complex {
    Complex::from_polar(1.0, TAU * h)
}

/// `arg(mu)` reduced to `(-pi, pi]`.
pub fn principal_arg(mu: Complex) -> f64 {
    let a = mu.arg();
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn eval_map_examples() {
        assert_eq!(eval_map(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(eval_map(c(-1.0, 0.0), c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let w = eval_map(c(0.0, 1.0), c(0.0, PI)).unwrap();
        assert!((w - c(-1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_map_reports_escape_instead_of_overflowing() {
        assert!(matches!(
            eval_map(c(0.0, 0.0), c(701.0, 0.0)),
            Err(DynamicsError::Escaped { .. })
        ));
        assert!(matches!(
            eval_map(c(f64::NAN, 0.0), c(0.0, 0.0)),
            Err(DynamicsError::NonFinite)
        ));
    }

    #[test]
    fn orbit_of_fixed_point_and_real_orbit() {
        let o = orbit(c(-1.0, 0.0), c(0.0, 0.0), 5);
        assert_eq!(o, vec![c(0.0, 0.0); 6]);

        // real evaluation of e^x - 1 from -1
        let o = orbit(c(-1.0, 0.0), c(-1.0, 0.0), 3);
        assert_eq!(o.len(), 4);
        assert!((o[1].re - (-0.632_120_558_828_557_7)).abs() < 1e-12);
        assert!((o[2].re - ((-0.632_120_558_828_557_7f64).exp() - 1.0)).abs() < 1e-12);
        assert!((o[2].re - (-0.468_536)).abs() < 1e-5);
    }

    #[test]
    fn orbit_truncates_at_overflow() {
        let o = orbit(c(1.0, 0.0), c(1.0, 0.0), 50);
        assert!(o.len() < 51);
        assert!(o.windows(2).all(|w| w[1].re > w[0].re));
        assert!(o.iter().all(|z| is_finite(*z)));
    }

    #[test]
    fn classify_kappa_minus_two_is_attracting_fixed_point() {
        let cls = classify_singular_orbit(c(-2.0, 0.0), &DynamicsConfig::default());
        match cls {
            OrbitClassification::Attracting {
                period,
                multiplier,
                orbit_point,
            } => {
                assert_eq!(period, 1);
                assert!((orbit_point.re - (-1.841_405_660_436_96)).abs() < 1e-9);
                assert!((multiplier.re - 0.158_594_339_563_04).abs() < 1e-9);
                assert_eq!(multiplier.im, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classify_kappa_one_escapes_along_real_axis() {
        match classify_singular_orbit(c(1.0, 0.0), &DynamicsConfig::default()) {
            OrbitClassification::Escaping { address_prefix, .. } => {
                assert!(!address_prefix.is_empty());
                assert!(address_prefix.iter().all(|&s| s == 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classify_parabolic_is_undetermined_or_indifferent() {
        match classify_singular_orbit(c(-1.0, 0.0), &DynamicsConfig::default()) {
            OrbitClassification::Undetermined { .. } => {}
            OrbitClassification::Indifferent { period, multiplier } => {
                assert_eq!(period, 1);
                assert!((multiplier - 1.0).norm() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn escaping_potential_estimate_recovers_model_potential() {
        // for kappa = F(t)-orbit start the potential is close to kappa itself
        match classify_singular_orbit(c(3.0, 0.0), &DynamicsConfig::default()) {
            OrbitClassification::Escaping { potential, .. } => {
                assert!((potential - 3.0).abs() < 0.2, "{potential}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn find_periodic_orbit_closed_form_fixed_point() {
        let mu = (-1.0f64).exp();
        let kappa = c(-1.0 - mu, 0.0);
        let orbit = find_periodic_orbit(kappa, 1, c(-1.0, 0.0), &DynamicsConfig::default()).unwrap();
        assert!((orbit.points[0] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((orbit.multiplier - mu).norm() < 1e-12);
    }

    #[test]
    fn find_periodic_orbit_solves_exp_z_equals_z() {
        let orbit =
            find_periodic_orbit(c(0.0, 0.0), 1, c(0.3, 1.3), &DynamicsConfig::default()).unwrap();
        let z = orbit.points[0];
        assert!((z - c(0.318_131_505_204_764, 1.337_235_701_430_689)).norm() < 1e-12);
        assert!((orbit.multiplier - z).norm() < 1e-12);
    }

    #[test]
    fn find_periodic_orbit_flags_parabolic() {
        assert!(matches!(
            find_periodic_orbit(c(-1.0, 0.0), 1, c(0.0, 0.0), &DynamicsConfig::default()),
            Err(DynamicsError::DegenerateDerivative { .. })
        ));
    }

    #[test]
    fn f_iterate_examples() {
        assert_eq!(f_iterate(0.0, 17).unwrap(), 0.0);
        assert!((f_iterate(1.0, 1).unwrap() - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!((f_iterate(1.0, 2).unwrap() - 4.574_941_524_760_88).abs() < 1e-12);
        assert!(matches!(
            f_iterate(1.0, 10),
            Err(DynamicsError::Overflow { step: 5 })
        ));
    }

    #[test]
    fn strips_are_labelled_by_nearest_multiple_of_two_pi() {
        assert_eq!(strip_index(c(3.0, 0.0)), 0);
        assert_eq!(strip_index(c(3.0, TAU + 0.5)), 1);
        assert_eq!(strip_index(c(3.0, -TAU)), -1);
        assert!(strip_margin(c(0.0, PI)).abs() < 1e-15);
    }
}
