//! Hyperbolic components: numerical `Phi_W^{-1}`, internal rays, boundaries,
//! census and bifurcation children.
//!
//! A component of period `n` is parametrized through the attracting orbit
//! `z_0, ..., z_{n-1}`. The orbit sum `S = z_0 + ... + z_{n-1}` is a
//! holomorphic logarithm of the multiplier, so `Phi_W = S - 2 pi i tag` with
//! an integer `tag` fixed per component. Points of `W` are computed by
//! Newton's method on the pair `(z_0, kappa)`:
//!
//! ```text
//! F1 = E^n(z_0) - z_0 = 0,    F2 = S - (w + 2 pi i tag) = 0
//! ```
//!
//! with the Jacobian assembled from `d z_j / d z_0` and `d z_j / d kappa`.

use std::f64::consts::TAU;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ComponentConfig, DynamicsConfig};
use crate::dynamics::{
    classify_singular_orbit, find_periodic_orbit, is_finite, strip_index, strip_margin, unit_multiplier,
    Complex, OrbitClassification, PeriodicOrbit, EXP_CAP,
};
use crate::numerics::{polyfit_at_zero, spread};
use crate::symbolic::gcd;
use crate::symbolic::IntermediateAddress;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComponentError {
    #[error("Newton did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("singular Jacobian (|det| = {det:e})")]
    SingularJacobian { det: f64 },
    #[error("continuation broke down after reaching w = {last_good}: {reason}")]
    ContinuationBreakdown { last_good: Complex, reason: String },
    #[error("internal ray diverged to infinity: |kappa| = {modulus:e} at t = {t}")]
    DivergedToInfinity { t: f64, modulus: f64 },
    #[error("landing point is not indifferent: {0}")]
    NotIndifferent(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seed {
    pub kappa: Complex,
    pub z: Complex,
    pub mu: Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicComponent {
    pub period: usize,
    pub seed: Seed,
    pub branch_tag: i64,
    pub intermediate_address: Option<IntermediateAddress>,
}

/// `kappa = w + 2 pi i k - e^w`, the period-1 component in closed form.
pub fn period_one_parameter(w: Complex, k: i64) -> Complex {
    w + Complex::new(0.0, TAU * k as f64) - w.exp()
}

/// Orbit `z_0, ..., z_{n-1}` together with `z_n`, `dz_j/dz_0`, `dz_j/dkappa`.
struct Jet {
    points: Vec<Complex>,
    end: Complex,
    /// `d z_n / d z_0`, `d z_n / d kappa`.
    dn: (Complex, Complex),
    /// `d S / d z_0`, `d S / d kappa`.
    ds: (Complex, Complex),
}

fn jet(kappa: Complex, z0: Complex, n: usize) -> Option<Jet> {
    let mut points = Vec::with_capacity(n);
    let mut z = z0;
    let (mut a, mut b) = (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
    let (mut sa, mut sb) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    for _ in 0..n {
        if !is_finite(z) || z.re > EXP_CAP {
            return None;
        }
        points.push(z);
        sa += a;
        sb += b;
        let e = z.exp();
        a *= e;
        b = b * e + 1.0;
        z = e + kappa;
    }
    is_finite(z).then_some(Jet {
        points,
        end: z,
        dn: (a, b),
        ds: (sa, sb),
    })
}

fn orbit_sum(points: &[Complex]) -> Complex {
    points.iter().sum()
}

/// The second equation of the system.
#[derive(Debug, Clone, Copy)]
enum Target {
    /// `S = value`.
    LogMultiplier(Complex),
    /// `prod e^{z_j} = value`.
    Multiplier(Complex),
}

fn newton_system(
    n: usize,
    target: Target,
    seed: (Complex, Complex),
    cfg: &ComponentConfig,
) -> Result<(Complex, Complex), ComponentError> {
    let (mut kappa, mut z) = seed;
    let residual = |j: &Jet| -> (Complex, Complex) {
        let f1 = j.end - j.points[0];
        let f2 = match target {
            Target::LogMultiplier(v) => orbit_sum(&j.points) - v,
            Target::Multiplier(v) => orbit_sum(&j.points).exp() - v,
        };
        (f1, f2)
    };
    let size = |f: (Complex, Complex)| f.0.norm() + f.1.norm();
    let no_conv = ComponentError::NoConvergence {
        iterations: cfg.newton_max_iter,
    };
    let mut current = jet(kappa, z, n).ok_or_else(|| no_conv.clone())?;
    let mut f = residual(&current);
    for _ in 0..cfg.newton_max_iter {
        let (mut g1, mut g2) = current.ds;
        if let Target::Multiplier(_) = target {
            let p = orbit_sum(&current.points).exp();
            g1 *= p;
            g2 *= p;
        }
        let (a11, a12) = (current.dn.0 - 1.0, current.dn.1);
        let det = a11 * g2 - a12 * g1;
        let scale = (a11.norm() + a12.norm()) * (g1.norm() + g2.norm());
        if !(det.norm() > 1e-12 * scale) {
            return Err(ComponentError::SingularJacobian { det: det.norm() });
        }
        let dz = (-f.0 * g2 + a12 * f.1) / det;
        let dk = (-a11 * f.1 + g1 * f.0) / det;
        let tiny = cfg.newton_tol * (1.0 + z.norm() + kappa.norm());
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let (zt, kt) = (z + dz * lambda, kappa + dk * lambda);
            if let Some(j) = jet(kt, zt, n) {
                let ft = residual(&j);
                if size(ft) < size(f) || (dz.norm() + dk.norm()) * lambda <= tiny {
                    accepted = Some((zt, kt, j, ft));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((zt, kt, j, ft)) = accepted else {
            // no decrease possible; accept if already at rounding level
            if size(f) <= 1e-11 * (1.0 + current.end.norm() + kappa.norm()) {
                return Ok((kappa, z));
            }
            return Err(no_conv);
        };
        z = zt;
        kappa = kt;
        current = j;
        f = ft;
        if (dz.norm() + dk.norm()) * lambda <= tiny {
            return Ok((kappa, z));
        }
    }
    if size(f) <= 1e-11 * (1.0 + current.end.norm() + kappa.norm()) {
        return Ok((kappa, z));
    }
    Err(no_conv)
}

/// Newton's method on `E^n(z) - z = 0`, `prod e^{z_j} - mu = 0` in `(kappa, z)`.
pub fn solve_for_multiplier(
    n: usize,
    mu: Complex,
    seed: (Complex, Complex),
    cfg: &ComponentConfig,
) -> Result<(Complex, Complex), ComponentError> {
    if n == 0 {
        return Err(ComponentError::InvalidInput("period must be positive".into()));
    }
    if !(mu.norm() > 0.0 && mu.norm() <= 1.0 + 1e-12) {
        return Err(ComponentError::InvalidInput(format!("need 0 < |mu| <= 1, got {mu}")));
    }
    newton_system(n, Target::Multiplier(mu), seed, cfg)
}

/// Orbit of period `n` through `z` at `kappa`.
pub fn orbit_at(kappa: Complex, z: Complex, n: usize) -> Option<PeriodicOrbit> {
    let j = jet(kappa, z, n)?;
    let multiplier = orbit_sum(&j.points).exp();
    Some(PeriodicOrbit {
        period: n,
        points: j.points,
        multiplier,
    })
}

fn branch_tag_of(sum: Complex) -> i64 {
    let k = (sum.im / TAU).round();
    if k.is_finite() && k.abs() < 1e15 {
        k as i64
    } else {
        0
    }
}

/// Census cells whose cycle reaches beyond this modulus are dropped: the
/// orbit sum, and with it `Phi`, is no longer resolved in double precision.
pub const CENSUS_ORBIT_BOUND: f64 = 1e6;

impl HyperbolicComponent {
    /// A component from an attracting orbit; `branch_tag` is chosen so that
    /// the seed lies in sector 0 up to rounding, i.e. `|Im Phi(seed)| <= pi`.
    pub fn from_orbit(kappa: Complex, orbit: &PeriodicOrbit) -> Self {
        let s = orbit_sum(&orbit.points);
        Self {
            period: orbit.period,
            seed: Seed {
                kappa,
                z: orbit.points[0],
                mu: orbit.multiplier,
            },
            branch_tag: branch_tag_of(s),
            intermediate_address: None,
        }
    }

    /// The period-1 component with `Phi = z - 2 pi i k`, seeded at `w = -1`.
    pub fn period_one(k: i64) -> Self {
        let w = Complex::new(-1.0, 0.0);
        let z = w + Complex::new(0.0, TAU * k as f64);
        Self {
            period: 1,
            seed: Seed {
                kappa: period_one_parameter(w, k),
                z,
                mu: w.exp(),
            },
            branch_tag: k,
            intermediate_address: None,
        }
    }

    fn tag_offset(&self) -> Complex {
        Complex::new(0.0, TAU * self.branch_tag as f64)
    }

    /// `Phi_W` at a parameter given by one point of its attracting orbit.
    pub fn phi(&self, kappa: Complex, z: Complex) -> Option<Complex> {
        let j = jet(kappa, z, self.period)?;
        Some(orbit_sum(&j.points) - self.tag_offset())
    }

    pub fn seed_phi(&self) -> Complex {
        self.phi(self.seed.kappa, self.seed.z)
            .expect("the seed orbit is finite")
    }

    /// Sector index `floor(Im Phi / 2 pi)` of the seed.
    pub fn seed_sector(&self) -> i64 {
        (self.seed_phi().im / TAU).floor() as i64
    }

    /// One Newton solve at `Phi = w` from the given seed.
    pub fn solve_at(&self, w: Complex, seed: (Complex, Complex), cfg: &ComponentConfig) -> Result<(Complex, Complex), ComponentError> {
        newton_system(self.period, Target::LogMultiplier(w + self.tag_offset()), seed, cfg)
    }

    /// Continues `(kappa, z)` from `Phi = from` to `Phi = to` along a straight
    /// segment, with steps of at most `cfg.max_step` halved on failure.
    pub fn continue_phi(
        &self,
        from: Complex,
        start: (Complex, Complex),
        to: Complex,
        cfg: &ComponentConfig,
    ) -> Result<(Complex, Complex), ComponentError> {
        let length = (to - from).norm();
        if length == 0.0 {
            return self.solve_at(to, start, cfg);
        }
        let mut s = 0.0;
        let mut ds = (cfg.max_step / length).min(1.0);
        let mut current = start;
        let mut previous: Option<(Complex, Complex)> = None;
        let mut steps = 0;
        while s < 1.0 {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(ComponentError::ContinuationBreakdown {
                    last_good: from + (to - from) * s,
                    reason: format!("more than {} steps", cfg.max_steps),
                });
            }
            let next_s = (s + ds).min(1.0);
            let w = from + (to - from) * next_s;
            // secant predictor from the last two accepted points
            let predicted = match previous {
                Some(p) if ds > 0.0 => {
                    let r = (next_s - s) / ds;
                    (current.0 + (current.0 - p.0) * r, current.1 + (current.1 - p.1) * r)
                }
                _ => current,
            };
            let attempt = self
                .solve_at(w, predicted, cfg)
                .or_else(|_| self.solve_at(w, current, cfg));
            match attempt {
                Ok(sol) if sol.0.norm() <= cfg.divergence_radius => {
                    previous = Some(current);
                    current = sol;
                    ds = next_s - s;
                    s = next_s;
                    ds = (ds * 1.5).min(cfg.max_step / length);
                }
                other => {
                    ds *= 0.5;
                    previous = None;
                    if ds * length < 1e-9 {
                        let reason = match other {
                            Err(e) => e.to_string(),
                            Ok(sol) => format!("|kappa| = {:e} beyond divergence radius", sol.0.norm()),
                        };
                        return Err(ComponentError::ContinuationBreakdown {
                            last_good: from + (to - from) * s,
                            reason,
                        });
                    }
                }
            }
        }
        Ok(current)
    }

    /// `Phi_W^{-1}(w)` by continuation from the seed; returns `(kappa, z)`.
    pub fn phi_inverse_orbit(&self, w: Complex, cfg: &ComponentConfig) -> Result<(Complex, Complex), ComponentError> {
        if !(w.re < 0.0) {
            return Err(ComponentError::InvalidInput(format!("Phi^-1 needs Re w < 0, got {w}")));
        }
        let start = self.seed_phi();
        let (kappa, z) = self.continue_phi(start, (self.seed.kappa, self.seed.z), w, cfg)?;
        let check = self.phi(kappa, z).ok_or_else(|| ComponentError::ContinuationBreakdown {
            last_good: w,
            reason: "orbit overflow at the endpoint".into(),
        })?;
        if (check - w).norm() > 1e-8 * (1.0 + w.norm()) {
            return Err(ComponentError::ContinuationBreakdown {
                last_good: w,
                reason: format!("endpoint has Phi = {check}"),
            });
        }
        Ok((kappa, z))
    }

    pub fn phi_inverse(&self, w: Complex, cfg: &ComponentConfig) -> Result<Complex, ComponentError> {
        self.phi_inverse_orbit(w, cfg).map(|(k, _)| k)
    }

    pub fn period_one_tag(&self) -> Option<i64> {
        (self.period == 1).then_some(self.branch_tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InternalRaySample {
    pub t: f64,
    pub kappa: Complex,
    pub z: Complex,
    pub mu: Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalRay {
    pub period: usize,
    pub branch_tag: i64,
    pub height: f64,
    /// Strictly increasing in `t`.
    pub samples: Vec<InternalRaySample>,
    pub landing: Option<Complex>,
}

/// The grid `t_start, ...` approaching `t_end` with steps
/// `min(max_step, |t| / 4)`, ending exactly at `t_end`.
pub fn internal_ray_grid(t_start: f64, t_end: f64, max_step: f64) -> Vec<f64> {
    let mut ts = vec![t_start];
    let mut t = t_start;
    while t < t_end {
        let step = max_step.min(0.25 * t.abs());
        t = (t + step).min(t_end);
        // avoid a sliver at the end
        if t_end - t < 0.25 * step {
            t = t_end;
        }
        ts.push(t);
    }
    ts
}

/// `Gamma_{W,h}(t) = Phi_W^{-1}(t + 2 pi i h)` sampled for `t` from
/// `t_start` up to `t_end`.
pub fn internal_ray(
    w: &HyperbolicComponent,
    h: f64,
    t_start: f64,
    t_end: f64,
    cfg: &ComponentConfig,
) -> Result<InternalRay, ComponentError> {
    if !(t_start < t_end && t_end < 0.0) {
        return Err(ComponentError::InvalidInput(format!(
            "need t_start < t_end < 0, got {t_start} and {t_end}"
        )));
    }
    let height = Complex::new(0.0, TAU * h);
    let grid = internal_ray_grid(t_start, t_end, cfg.max_step);
    let mut samples = Vec::with_capacity(grid.len());
    let mut state = w.phi_inverse_orbit(height + t_start, cfg)?;
    let mut prev_t = t_start;
    for &t in &grid {
        if t != t_start {
            state = w.continue_phi(height + prev_t, state, height + t, cfg)?;
        }
        if state.0.norm() > cfg.divergence_radius {
            return Err(ComponentError::DivergedToInfinity {
                t,
                modulus: state.0.norm(),
            });
        }
        let orbit = orbit_at(state.0, state.1, w.period).ok_or_else(|| ComponentError::ContinuationBreakdown {
            last_good: height + prev_t,
            reason: "orbit overflow".into(),
        })?;
        samples.push(InternalRaySample {
            t,
            kappa: state.0,
            z: state.1,
            mu: orbit.multiplier,
        });
        prev_t = t;
    }
    Ok(InternalRay {
        period: w.period,
        branch_tag: w.branch_tag,
        height: h,
        samples,
        landing: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InternalLanding {
    pub kappa: Complex,
    /// Extrapolation from the ray samples alone.
    pub extrapolated: Complex,
    pub extrapolation_spread: f64,
    /// Multiplier of the indifferent orbit found at the landing point.
    pub multiplier: Complex,
    /// Period of that orbit; a proper divisor of the component period at a
    /// satellite root.
    pub orbit_period: usize,
    /// Whether the landing point was refined by a direct solve at `t = 0`.
    pub refined: bool,
}

/// Landing point of the internal ray at height `h`.
///
/// The ray is traced to `t = -parabolic_stop` and extrapolated; the result is
/// then refined by solving at `t = 0` directly. At a satellite root, where
/// the orbit of the component degenerates into one of lower period and the
/// Jacobian is singular, the extrapolation is kept and the lower-period
/// orbit is checked instead.
pub fn internal_ray_landing(
    w: &HyperbolicComponent,
    h: f64,
    cfg: &ComponentConfig,
    dynamics: &DynamicsConfig,
) -> Result<(InternalRay, InternalLanding), ComponentError> {
    let mut ray = internal_ray(w, h, -1.0, -cfg.parabolic_stop, cfg)?;
    let m = cfg.landing_samples.max(4);
    let tail = &ray.samples[ray.samples.len().saturating_sub(m + 2)..];
    let fit = |window: &[InternalRaySample]| {
        let ts: Vec<f64> = window.iter().map(|s| s.t).collect();
        let ks: Vec<Complex> = window.iter().map(|s| s.kappa).collect();
        polyfit_at_zero(&ts, &ks, 2)
    };
    let estimates: Vec<Complex> = (0..3)
        .filter_map(|shift| {
            let end = tail.len().checked_sub(shift)?;
            fit(&tail[end.saturating_sub(m)..end])
        })
        .collect();
    if estimates.is_empty() {
        return Err(ComponentError::NoConvergence { iterations: 0 });
    }
    let extrapolated = estimates[0];
    let extrapolation_spread = spread(&estimates);
    if !is_finite(extrapolated) || extrapolated.norm() > cfg.divergence_radius {
        return Err(ComponentError::DivergedToInfinity {
            t: 0.0,
            modulus: extrapolated.norm(),
        });
    }
    let last = ray.samples.last().expect("grid is nonempty");
    let boundary = Complex::new(0.0, TAU * h);
    let target_mu = unit_multiplier(h);
    let tolerance = 1e-4f64.max(10.0 * extrapolation_spread);

    let solved = w
        .solve_at(boundary, (extrapolated, last.z), cfg)
        .ok()
        .filter(|(k, _)| (k - extrapolated).norm() <= tolerance);
    let landing = match solved {
        Some((kappa, z)) => {
            let orbit = orbit_at(kappa, z, w.period).expect("solution orbit is finite");
            InternalLanding {
                kappa,
                extrapolated,
                extrapolation_spread,
                multiplier: orbit.multiplier,
                orbit_period: w.period,
                refined: true,
            }
        }
        None => {
            let (orbit_period, multiplier) = degenerate_orbit(extrapolated, last.z, w.period, target_mu, dynamics)
                .ok_or_else(|| {
                    ComponentError::NotIndifferent(format!(
                        "no orbit with multiplier {target_mu} at {extrapolated}"
                    ))
                })?;
            InternalLanding {
                kappa: extrapolated,
                extrapolated,
                extrapolation_spread,
                multiplier,
                orbit_period,
                refined: false,
            }
        }
    };
    ray.landing = Some(landing.kappa);
    Ok((ray, landing))
}

/// At a satellite root the period-`n` orbit collapses onto an orbit of
/// period `d | n` whose multiplier is a `n/d`-th root of `mu`. Returns the
/// period and the corresponding multiplier `mu_d^{n/d}`.
fn degenerate_orbit(
    kappa: Complex,
    near: Complex,
    n: usize,
    mu: Complex,
    dynamics: &DynamicsConfig,
) -> Option<(usize, Complex)> {
    (1..=n)
        .filter(|d| n % d == 0)
        .filter_map(|d| {
            let orbit = find_periodic_orbit(kappa, d, near, dynamics).ok()?;
            let power = orbit.multiplier.powu((n / d) as u32);
            ((power - mu).norm() < 1e-3).then_some((d, power))
        })
        .next()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundarySample {
    pub theta: f64,
    pub kappa: Complex,
    pub z: Complex,
    pub mu: Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBoundary {
    pub period: usize,
    pub branch_tag: i64,
    pub samples: Vec<BoundarySample>,
    /// Angles at which no indifferent orbit could be computed.
    pub gaps: Vec<f64>,
    pub closed: bool,
}

/// Depth inside the component from which boundary points are approached.
pub const BOUNDARY_OFFSET: f64 = 1e-3;

/// Points `Phi_W^{-1}(i theta)` for the given angles. Each point is obtained
/// from the previous one; on failure it is re-seeded from the interior
/// point `Phi_W^{-1}(-delta + i theta)`.
pub fn boundary_trace(
    w: &HyperbolicComponent,
    thetas: &[f64],
    cfg: &ComponentConfig,
) -> Result<ComponentBoundary, ComponentError> {
    if thetas.is_empty() {
        return Err(ComponentError::InvalidInput("empty angle grid".into()));
    }
    let mut samples: Vec<BoundarySample> = Vec::with_capacity(thetas.len());
    let mut gaps = Vec::new();
    let mut prev: Option<(f64, (Complex, Complex))> = None;
    for &theta in thetas {
        let target = Complex::new(0.0, theta);
        let from_previous = prev.and_then(|(pt, state)| {
            // slide along the imaginary axis just inside the component
            let a = Complex::new(-BOUNDARY_OFFSET, pt);
            let b = Complex::new(-BOUNDARY_OFFSET, theta);
            let inner = w.solve_at(a, state, cfg).ok()?;
            let inner = w.continue_phi(a, inner, b, cfg).ok()?;
            w.solve_at(target, inner, cfg).ok().map(|s| (s, inner))
        });
        let result = from_previous.or_else(|| {
            let b = Complex::new(-BOUNDARY_OFFSET, theta);
            let inner = w.phi_inverse_orbit(b, cfg).ok()?;
            w.solve_at(target, inner, cfg).ok().map(|s| (s, inner))
        });
        match result {
            Some(((kappa, z), inner)) => {
                let orbit = orbit_at(kappa, z, w.period).expect("solution orbit is finite");
                samples.push(BoundarySample {
                    theta,
                    kappa,
                    z,
                    mu: orbit.multiplier,
                });
                prev = Some((theta, inner));
            }
            None => {
                gaps.push(theta);
                prev = None;
            }
        }
    }
    let closed = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) if samples.len() > 2 => {
            let max_gap = samples
                .windows(2)
                .map(|p| (p[1].kappa - p[0].kappa).norm())
                .fold(0.0, f64::max);
            (b.kappa - a.kappa).norm() <= 2.0 * max_gap
        }
        _ => false,
    };
    Ok(ComponentBoundary {
        period: w.period,
        branch_tag: w.branch_tag,
        samples,
        gaps,
        closed,
    })
}

/// `n` equally spaced angles in `[0, 2 pi)`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// Follows the attracting period-`n` orbit along the segment from `a` to
/// `b`, requiring `|mu| < 1` and minimal period `n` throughout. Returns the
/// orbit at `b`.
pub fn continue_orbit_segment(
    n: usize,
    a: Complex,
    za: Complex,
    b: Complex,
    steps: usize,
    dynamics: &DynamicsConfig,
) -> Option<PeriodicOrbit> {
    let mut z = za;
    let mut orbit = None;
    for k in 1..=steps {
        let kappa = a + (b - a) * (k as f64 / steps as f64);
        let o = find_periodic_orbit(kappa, n, z, dynamics).ok()?;
        if !(o.multiplier.norm() < 1.0) || o.minimal_period(1e-8) != n {
            return None;
        }
        z = o.points[0];
        orbit = Some(o);
    }
    orbit
}

fn segment_steps(a: Complex, b: Complex) -> usize {
    ((a - b).norm() / 2e-3).ceil().clamp(8.0, 1000.0) as usize
}

/// Whether two orbits are the same cycle up to cyclic relabelling.
pub fn same_cycle(a: &[Complex], b: &[Complex], tol: f64) -> bool {
    let n = a.len();
    n == b.len()
        && (0..n).any(|shift| (0..n).all(|j| (a[j] - b[(j + shift) % n]).norm() < tol))
}

/// Identity test: continuation from one seed to the other keeps an attracting
/// orbit of the common period, along the straight segment or one of the two
/// axis-parallel detours, and arrives at the other seed's cycle.
pub fn same_component(
    a: &HyperbolicComponent,
    b: &HyperbolicComponent,
    cfg: &ComponentConfig,
    dynamics: &DynamicsConfig,
) -> bool {
    if a.period != b.period {
        return false;
    }
    let n = a.period;
    let Some(target) = orbit_at(b.seed.kappa, b.seed.z, n) else {
        return false;
    };
    let (ka, kb) = (a.seed.kappa, b.seed.kappa);
    let corners = [
        None,
        Some(Complex::new(kb.re, ka.im)),
        Some(Complex::new(ka.re, kb.im)),
    ];
    corners.iter().any(|corner| {
        let path: Vec<Complex> = match corner {
            None => vec![ka, kb],
            Some(c) => vec![ka, *c, kb],
        };
        let mut z = a.seed.z;
        let mut last = None;
        for leg in path.windows(2) {
            match continue_orbit_segment(n, leg[0], z, leg[1], segment_steps(leg[0], leg[1]), dynamics) {
                Some(o) => {
                    z = o.points[0];
                    last = Some(o);
                }
                None => return false,
            }
        }
        last.is_some_and(|o| same_cycle(&o.points, &target.points, cfg.dedup_tol.max(1e-9)))
    })
}

/// Axis-parallel rectangle `[re_min, re_max] x [im_min, im_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.re_min < self.re_max && self.im_min < self.im_max
    }

    pub fn contains(&self, k: Complex) -> bool {
        (self.re_min..=self.re_max).contains(&k.re) && (self.im_min..=self.im_max).contains(&k.im)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn classes(&mut self) -> Vec<Vec<usize>> {
        let n = self.0.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let r = self.find(i);
            by_root[r].push(i);
        }
        by_root.into_iter().filter(|c| !c.is_empty()).collect()
    }
}

/// Census of period-`n` components meeting the window.
///
/// Cell centres are classified in parallel. Adjacent attracting cells are
/// joined when the orbit can be continued between them; the resulting
/// groups are merged further by [`same_component`] between their seeds.
pub fn find_components(
    n: usize,
    window: Window,
    grid_step: f64,
    cfg: &ComponentConfig,
    dynamics: &DynamicsConfig,
) -> Result<Vec<HyperbolicComponent>, ComponentError> {
    if !(grid_step > 0.0) || !window.is_valid() || n == 0 {
        return Err(ComponentError::InvalidInput("bad window, grid step or period".into()));
    }
    let nx = ((window.re_max - window.re_min) / grid_step).floor().max(1.0) as usize;
    let ny = ((window.im_max - window.im_min) / grid_step).floor().max(1.0) as usize;
    let centre = |i: usize, j: usize| {
        Complex::new(
            window.re_min + (i as f64 + 0.5) * (window.re_max - window.re_min) / nx as f64,
            window.im_min + (j as f64 + 0.5) * (window.im_max - window.im_min) / ny as f64,
        )
    };
    let cells: Vec<Option<PeriodicOrbit>> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let kappa = centre(idx % nx, idx / nx);
            match classify_singular_orbit(kappa, dynamics) {
                OrbitClassification::Attracting {
                    period, orbit_point, ..
                } if period == n => find_periodic_orbit(kappa, n, orbit_point, dynamics)
                    .ok()
                    .filter(|o| o.points.iter().all(|z| z.norm() < CENSUS_ORBIT_BOUND)),
                _ => None,
            }
        })
        .collect();

    let hits: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].is_some()).collect();
    let mut uf = UnionFind::new(cells.len());
    let edges: Vec<(usize, usize)> = hits
        .iter()
        .flat_map(|&idx| {
            let (i, j) = (idx % nx, idx / nx);
            let mut e = Vec::new();
            if i + 1 < nx && cells[idx + 1].is_some() {
                e.push((idx, idx + 1));
            }
            if j + 1 < ny && cells[idx + nx].is_some() {
                e.push((idx, idx + nx));
            }
            e
        })
        .collect();
    let joined: Vec<(usize, usize)> = edges
        .par_iter()
        .filter(|&&(a, b)| {
            let oa = cells[a].as_ref().expect("hit");
            let ob = cells[b].as_ref().expect("hit");
            let (ka, kb) = (centre(a % nx, a / nx), centre(b % nx, b / nx));
            continue_orbit_segment(n, ka, oa.points[0], kb, 16, dynamics)
                .is_some_and(|o| same_cycle(&o.points, &ob.points, 1e-6))
        })
        .copied()
        .collect();
    for (a, b) in joined {
        uf.union(a, b);
    }

    // one seed per group: the cell whose cycle stays smallest
    let size = |o: &PeriodicOrbit| o.points.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut groups: Vec<HyperbolicComponent> = uf
        .classes()
        .into_iter()
        .filter(|c| cells[c[0]].is_some())
        .map(|class| {
            let best = *class
                .iter()
                .min_by(|&&a, &&b| {
                    let sa = size(cells[a].as_ref().expect("hit"));
                    let sb = size(cells[b].as_ref().expect("hit"));
                    sa.total_cmp(&sb)
                })
                .expect("class is nonempty");
            let orbit = cells[best].as_ref().expect("hit");
            HyperbolicComponent::from_orbit(centre(best % nx, best / nx), orbit)
        })
        .collect();
    groups.sort_by(|a, b| {
        (a.seed.kappa.im, a.seed.kappa.re)
            .partial_cmp(&(b.seed.kappa.im, b.seed.kappa.re))
            .expect("finite seeds")
    });

    let g = groups.len();
    let pairs: Vec<(usize, usize)> = (0..g).flat_map(|a| (a + 1..g).map(move |b| (a, b))).collect();
    let same: Vec<(usize, usize)> = pairs
        .par_iter()
        .filter(|&&(a, b)| same_component(&groups[a], &groups[b], cfg, dynamics))
        .copied()
        .collect();
    let orbit_size = |w: &HyperbolicComponent| orbit_at(w.seed.kappa, w.seed.z, n).map_or(f64::INFINITY, |o| size(&o));
    let mut uf = UnionFind::new(g);
    for (a, b) in same {
        uf.union(a, b);
    }
    let mut components: Vec<HyperbolicComponent> = uf
        .classes()
        .into_iter()
        .map(|class| {
            let best = class
                .into_iter()
                .min_by(|&a, &b| orbit_size(&groups[a]).total_cmp(&orbit_size(&groups[b])))
                .expect("class is nonempty");
            groups[best].clone()
        })
        .collect();
    for c in &mut components {
        if c.period >= 2 {
            c.intermediate_address = intermediate_address(c, cfg);
        }
    }
    Ok(components)
}

/// Reads off the intermediate address of a period-`n` component from deep in
/// its tail (`Re Phi` very negative).
///
/// There the orbit point `z_{n-1}` preceding the singular value has very
/// negative real part, so `z_{n-2}` lies near a line `Im = (2m+1) pi`; the
/// strips of `z_0 = kappa, ..., z_{n-3}` and the half-integer `m + 1/2`
/// form the address. This is an empirical assignment.
pub fn intermediate_address(w: &HyperbolicComponent, cfg: &ComponentConfig) -> Option<IntermediateAddress> {
    let n = w.period;
    if n < 2 {
        return None;
    }
    let start = w.seed_phi();
    let mut state = (w.seed.kappa, w.seed.z);
    let mut phi = start;
    for depth in [5.0, 10.0, 20.0, 30.0] {
        let target = Complex::new(-depth, start.im);
        state = w.continue_phi(phi, state, target, cfg).ok()?;
        phi = target;
        let kappa = state.0;
        // singular orbit of the parameter, which is attracted to the cycle
        let mut singular = Vec::with_capacity(n);
        let mut z = kappa;
        for _ in 0..n - 1 {
            singular.push(z);
            if z.re > EXP_CAP {
                break;
            }
            z = z.exp() + kappa;
        }
        if singular.len() < n - 1 {
            continue;
        }
        let half = singular[n - 2];
        let x = half.im / TAU;
        let offset = (x - x.floor() - 0.5).abs();
        let integers_ok = singular[..n - 2].iter().all(|&p| strip_margin(p) > 0.05);
        if offset < 0.05 && integers_ok {
            let ints: Vec<i64> = singular[..n - 2].iter().map(|&p| strip_index(p)).collect();
            return Some(IntermediateAddress::new(ints, x.floor() as i64));
        }
    }
    None
}

/// The `p/q` bifurcation child of `W`: the component of period `q n`
/// touching `W` at `Phi_W^{-1}(2 pi i p / q)`.
pub fn bifurcation_child(
    w: &HyperbolicComponent,
    p: i64,
    q: i64,
    cfg: &ComponentConfig,
    dynamics: &DynamicsConfig,
) -> Result<HyperbolicComponent, ComponentError> {
    if q < 2 || gcd(p.unsigned_abs() as usize, q as usize) != 1 {
        return Err(ComponentError::InvalidInput(format!("{p}/{q} must be reduced with q >= 2")));
    }
    let (root, _, inward) = bifurcation_point(w, p, q, cfg)?;
    let direction = (root - inward) / (root - inward).norm();
    let child_period = q as usize * w.period;
    for eps in [1e-2, 2e-2, 5e-3, 4e-2, 2e-3, 8e-2] {
        let kappa = root + direction * eps;
        let class = classify_singular_orbit(kappa, dynamics);
        let OrbitClassification::Attracting {
            period, orbit_point, ..
        } = class
        else {
            continue;
        };
        if period != child_period {
            continue;
        }
        let Ok(orbit) = find_periodic_orbit(kappa, child_period, orbit_point, dynamics) else {
            continue;
        };
        if orbit.minimal_period(1e-8) != child_period {
            continue;
        }
        // move the seed well inside
        let refined = solve_for_multiplier(child_period, Complex::new(0.5, 0.0), (kappa, orbit.points[0]), cfg)
            .ok()
            .and_then(|(k, z)| {
                let o = orbit_at(k, z, child_period)?;
                (find_periodic_orbit(k, child_period, z, dynamics).is_ok()
                    && o.minimal_period(1e-8) == child_period
                    && (k - root).norm() < 1.0)
                    .then_some((k, o))
            });
        let (seed_kappa, seed_orbit) = refined.unwrap_or((kappa, orbit));
        return Ok(HyperbolicComponent::from_orbit(seed_kappa, &seed_orbit));
    }
    Err(ComponentError::NoConvergence { iterations: 6 })
}

/// Boundary point of `W` with multiplier `e^{2 pi i p/q}` in sector 0,
/// together with its orbit point and a nearby interior point.
pub fn bifurcation_point(
    w: &HyperbolicComponent,
    p: i64,
    q: i64,
    cfg: &ComponentConfig,
) -> Result<(Complex, Complex, Complex), ComponentError> {
    let theta = TAU * (p.rem_euclid(q) as f64) / q as f64;
    let inner_w = Complex::new(-BOUNDARY_OFFSET, theta);
    let inner = w.phi_inverse_orbit(inner_w, cfg)?;
    let (root, root_z) = w.solve_at(Complex::new(0.0, theta), inner, cfg)?;
    Ok((root, root_z, inner.0))
}

/// Partition of `components` into classes joined by chains of bifurcations
/// of denominator at most `max_depth`.
///
/// Every `p/q` child of every component is computed and identified with a
/// listed component when [`same_component`] says so; children that match no
/// listed component still join the parent's class with any other component
/// sharing that child. Children that cannot be computed are missing edges.
pub fn chain_connectivity(
    components: &[HyperbolicComponent],
    max_depth: i64,
    cfg: &ComponentConfig,
    dynamics: &DynamicsConfig,
) -> Vec<Vec<usize>> {
    let tasks: Vec<(usize, i64, i64)> = (0..components.len())
        .flat_map(|i| {
            (2..=max_depth).flat_map(move |q| {
                (1..q)
                    .filter(move |&p| gcd(p as usize, q as usize) == 1)
                    .map(move |p| (i, p, q))
            })
        })
        .collect();
    let children: Vec<(usize, HyperbolicComponent)> = tasks
        .par_iter()
        .filter_map(|&(i, p, q)| {
            bifurcation_child(&components[i], p, q, cfg, dynamics)
                .ok()
                .map(|c| (i, c))
        })
        .collect();
    let mut nodes: Vec<HyperbolicComponent> = components.to_vec();
    let mut uf_edges = Vec::new();
    for (parent, child) in children {
        let matched = (0..nodes.len()).find(|&j| same_component(&child, &nodes[j], cfg, dynamics));
        let idx = matched.unwrap_or_else(|| {
            nodes.push(child);
            nodes.len() - 1
        });
        uf_edges.push((parent, idx));
    }
    let mut uf = UnionFind::new(nodes.len());
    for (a, b) in uf_edges {
        uf.union(a, b);
    }
    let mut classes: Vec<Vec<usize>> = uf
        .classes()
        .into_iter()
        .map(|c| c.into_iter().filter(|&i| i < components.len()).collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect();
    classes.sort();
    classes
}

#[derive(Debug, Clone, Serialize)]
pub struct ChildRecord {
    pub p: i64,
    pub q: i64,
    pub period: usize,
    pub seed: Seed,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentRecord {
    pub period: usize,
    pub seed: Seed,
    pub branch_tag: i64,
    pub intermediate_address: Option<String>,
    pub intermediate_address_empirical: bool,
    pub boundary: Vec<Complex>,
    pub boundary_closed: bool,
    pub children: Vec<ChildRecord>,
}

impl ComponentRecord {
    pub fn new(w: &HyperbolicComponent, boundary: Option<&ComponentBoundary>, children: Vec<ChildRecord>) -> Self {
        Self {
            period: w.period,
            seed: w.seed,
            branch_tag: w.branch_tag,
            intermediate_address: w.intermediate_address.as_ref().map(ToString::to_string),
            intermediate_address_empirical: w.intermediate_address.is_some(),
            boundary: boundary
                .map(|b| b.samples.iter().map(|s| s.kappa).collect())
                .unwrap_or_default(),
            boundary_closed: boundary.is_some_and(|b| b.closed),
            children,
        }
    }
}

/// CSV with columns `t,re_kappa,im_kappa,re_mu,im_mu`.
pub fn write_internal_ray_csv(ray: &InternalRay, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "t,re_kappa,im_kappa,re_mu,im_mu")?;
    for s in &ray.samples {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            s.t, s.kappa.re, s.kappa.im, s.mu.re, s.mu.im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfgs() -> (ComponentConfig, DynamicsConfig) {
        (ComponentConfig::default(), DynamicsConfig::default())
    }

    #[test]
    fn solve_period_one_closed_form() {
        let (cfg, _) = cfgs();
        let mu = Complex::new((-1.0f64).exp(), 0.0);
        let (k, z) = solve_for_multiplier(1, mu, (Complex::new(-1.3, 0.05), Complex::new(-0.9, 0.05)), &cfg).unwrap();
        assert!((k - Complex::new(-1.0 - (-1.0f64).exp(), 0.0)).norm() < 1e-12);
        assert!((z - Complex::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn solve_rejects_bad_multiplier() {
        let (cfg, _) = cfgs();
        let seed = (Complex::new(-2.0, 0.0), Complex::new(-1.8, 0.0));
        assert!(solve_for_multiplier(1, Complex::new(0.0, 0.0), seed, &cfg).is_err());
        assert!(solve_for_multiplier(1, Complex::new(1.5, 0.0), seed, &cfg).is_err());
    }

    #[test]
    fn period_doubling_seed_gives_period_two() {
        let (cfg, dynamics) = cfgs();
        // a little past the period-1 parabolic with mu = -1 at kappa = 1 + pi i
        let kappa = Complex::new(1.0, PI) + Complex::new(0.01, 0.0);
        let z = Complex::new(0.0, PI) + Complex::new(0.05, 0.05);
        let (k, z) = solve_for_multiplier(2, Complex::new(0.5, 0.0), (kappa, z), &cfg).unwrap();
        let orbit = orbit_at(k, z, 2).unwrap();
        assert!((orbit.multiplier - 0.5).norm() < 1e-10);
        assert!((orbit.points[0] - orbit.points[1]).norm() > 1e-3);
        assert!(find_periodic_orbit(k, 2, z, &dynamics).unwrap().closure_defect(k) < 1e-10);
    }

    #[test]
    fn phi_inverse_period_one() {
        let (cfg, _) = cfgs();
        let w0 = HyperbolicComponent::period_one(0);
        for t in [-0.5, -2.0, -3.5] {
            let w = Complex::new(t, 0.0);
            let k = w0.phi_inverse(w, &cfg).unwrap();
            assert!((k - period_one_parameter(w, 0)).norm() < 1e-9);
            assert!(k.im.abs() < 1e-12);
        }
        let w1 = HyperbolicComponent::period_one(1);
        let k = w1.phi_inverse(Complex::new(-1.0, 0.0), &cfg).unwrap();
        assert!((k - Complex::new(-1.0 - (-1.0f64).exp(), TAU)).norm() < 1e-12);
        let own = w1.seed_phi();
        assert!((w1.phi_inverse(own, &cfg).unwrap() - w1.seed.kappa).norm() < 1e-12);
    }

    #[test]
    fn internal_ray_period_one() {
        let (cfg, _) = cfgs();
        let w0 = HyperbolicComponent::period_one(0);
        let ray = internal_ray(&w0, 0.5, -1.0, -0.01, &cfg).unwrap();
        let first = ray.samples[0];
        assert!((first.kappa - Complex::new(-1.0 + (-1.0f64).exp(), PI)).norm() < 1e-9);
        for s in &ray.samples {
            let exact = period_one_parameter(Complex::new(s.t, PI), 0);
            assert!((s.kappa - exact).norm() < 1e-9);
            assert!((s.mu - Complex::new(s.t, PI).exp()).norm() < 1e-9 * s.mu.norm());
        }
        assert!(ray.samples.windows(2).all(|p| p[0].t < p[1].t));
    }

    #[test]
    fn internal_ray_landing_period_one() {
        let (cfg, dynamics) = cfgs();
        let w0 = HyperbolicComponent::period_one(0);
        let (_, l) = internal_ray_landing(&w0, 0.0, &cfg, &dynamics).unwrap();
        assert!((l.kappa - Complex::new(-1.0, 0.0)).norm() < 1e-9);
        let (_, l) = internal_ray_landing(&w0, 0.5, &cfg, &dynamics).unwrap();
        assert!((l.kappa - Complex::new(1.0, PI)).norm() < 1e-9);
        assert!((l.multiplier + 1.0).norm() < 1e-9);
    }

    #[test]
    fn boundary_period_one() {
        let (cfg, _) = cfgs();
        let w0 = HyperbolicComponent::period_one(0);
        let b = boundary_trace(&w0, &uniform_angles(72), &cfg).unwrap();
        assert!(b.gaps.is_empty());
        assert_eq!(b.samples.len(), 72);
        for s in &b.samples {
            let exact = Complex::new(0.0, s.theta) - Complex::new(0.0, s.theta).exp();
            assert!((s.kappa - exact).norm() < 1e-9);
            assert!((s.mu.norm() - 1.0).abs() < 1e-9);
        }
        assert!((b.samples[0].kappa + 1.0).norm() < 1e-9);
        assert!(!b.closed);
    }

    #[test]
    fn census_period_one_windows() {
        let (cfg, dynamics) = cfgs();
        let found = find_components(1, Window::new(-3.0, 0.0, -1.0, 1.0), 0.1, &cfg, &dynamics).unwrap();
        assert_eq!(found.len(), 1);
        let none = find_components(1, Window::new(5.0, 6.0, 0.0, 1.0), 0.1, &cfg, &dynamics).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn half_child_of_period_one() {
        let (cfg, dynamics) = cfgs();
        let w0 = HyperbolicComponent::period_one(0);
        let (root, _, _) = bifurcation_point(&w0, 1, 2, &cfg).unwrap();
        assert!((root - Complex::new(1.0, PI)).norm() < 1e-9);
        let child = bifurcation_child(&w0, 1, 2, &cfg, &dynamics).unwrap();
        assert_eq!(child.period, 2);
        assert!(child.seed.mu.norm() < 1.0);
        assert!(matches!(
            bifurcation_child(&w0, 1, 1, &cfg, &dynamics),
            Err(ComponentError::InvalidInput(_))
        ));
        assert!(matches!(
            bifurcation_child(&w0, 2, 4, &cfg, &dynamics),
            Err(ComponentError::InvalidInput(_))
        ));
    }

    #[test]
    fn same_cycle_up_to_rotation() {
        let a = [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)];
        let b = [a[2], a[0], a[1]];
        assert!(same_cycle(&a, &b, 1e-9));
        assert!(!same_cycle(&a, &[a[0], a[2], a[1]], 1e-9));
    }

    #[test]
    fn internal_ray_grid_refines_toward_zero() {
        let g = internal_ray_grid(-1.0, -1e-4, 0.05);
        assert_eq!(g[0], -1.0);
        assert_eq!(*g.last().unwrap(), -1e-4);
        assert!(g.windows(2).all(|p| p[0] < p[1]));
        let n = g.len();
        assert!(g[n - 2] - g[n - 3] < 1e-3);
    }
}
