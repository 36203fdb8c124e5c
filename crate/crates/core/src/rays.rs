//! Parameter rays `G_s(t)` for eventually periodic addresses.
//!
//! A point `kappa` lies on `G_s` at potential `t` when the singular orbit
//! shadows the model orbit `F^j(t) + 2 pi i s_{j+1}`. Numerically this is a
//! fixed point problem: start deep in the orbit at `F^N(t) + 2 pi i s_{N+1}`,
//! pull back `N` times along the branches of `log(w - kappa)` selected by
//! `s`, and require the result to equal `kappa` itself.
//!
//! The fixed point is found by Newton's method in `kappa`; the derivative of
//! the pullback is a by-product of the recursion. Rays are traced from large
//! `t` downwards on a geometric grid with a polynomial predictor.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{DynamicsConfig, RayConfig};
use crate::dynamics::{classify_singular_orbit, is_finite, Complex, OrbitClassification};
use crate::numerics::{polyfit_at_zero, spread};
use crate::symbolic::{lex_compare, ExternalAddress};

/// Distance from the negative real axis below which a pullback is ambiguous.
pub const BRANCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RayError {
    #[error("pullback {index} at t = {t} lies on the branch cut of log")]
    BranchCollision { t: f64, index: usize },
    #[error("F^N({t}) does not exceed the depth radius within {max_depth} steps")]
    DepthOverflow { t: f64, max_depth: usize },
    #[error("continuation broke down at t = {t}: {reason}")]
    ContinuationBreakdown { t: f64, reason: String },
    #[error("landing extrapolation did not converge (spread {spread:e})")]
    NoConvergence { spread: f64 },
    #[error("rays {first} and {second} are not separated at t = {t}")]
    Unresolved { first: String, second: String, t: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayPoint {
    pub t: f64,
    pub kappa: Complex,
    /// `|kappa - G(kappa)|` for the principal-branch pullback `G`.
    pub residual: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandingEstimate {
    pub kappa: Complex,
    pub error_bar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterRay {
    pub address: ExternalAddress,
    /// Strictly decreasing in `t`.
    pub samples: Vec<RayPoint>,
    pub landing: Option<LandingEstimate>,
}

impl ParameterRay {
    pub fn sample_at(&self, t: f64) -> Option<&RayPoint> {
        self.samples
            .iter()
            .find(|p| (p.t - t).abs() <= 1e-12 * t.max(1.0))
    }

    pub fn last(&self) -> &RayPoint {
        self.samples.last().expect("rays have at least one sample")
    }
}

/// Smallest `N` with `F^N(t) > depth_radius`.
pub fn ray_depth(t: f64, cfg: &RayConfig) -> Result<usize, RayError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(RayError::InvalidInput(format!("potential must be positive, got {t}")));
    }
    let mut x = t;
    for n in 0..=cfg.max_depth {
        if x > cfg.depth_radius {
            return Ok(n);
        }
        x = x.exp_m1();
    }
    Err(RayError::DepthOverflow {
        t,
        max_depth: cfg.max_depth,
    })
}

/// Result of one pullback sweep.
struct Pullback {
    /// `w_0, ..., w_N`.
    orbit: Vec<Complex>,
    /// `d w_0 / d kappa`.
    derivative: Complex,
    /// Number of branch choices that differ from the principal convention.
    off_principal: usize,
    /// Index of the first pullback taken within [`BRANCH_TOL`] of the cut.
    near_cut: Option<usize>,
}

fn principal_log(u: Complex) -> Complex {
    let l = u.ln();
    if l.im <= -PI {
        Complex::new(l.re, l.im + TAU)
    } else {
        l
    }
}

/// Pulls the model point `F^N(t) + 2 pi i s_{N+1}` back to `w_0`.
///
/// With a `reference` orbit each logarithm takes the branch closest to the
/// reference point of the same index, otherwise the branch prescribed by
/// `s`. Following a nearby orbit keeps the map analytic in `kappa` while
/// Newton iterates wander across the cut.
fn pull_back(
    kappa: Complex,
    s: &ExternalAddress,
    t: f64,
    n: usize,
    reference: Option<&[Complex]>,
) -> Result<Pullback, RayError> {
    let top = crate::dynamics::f_iterate(t, n).map_err(|_| RayError::DepthOverflow { t, max_depth: n })?;
    let mut orbit = vec![Complex::new(0.0, 0.0); n + 1];
    let mut w = Complex::new(top, TAU * s.entry(n + 1) as f64);
    orbit[n] = w;
    let mut derivative = Complex::new(0.0, 0.0);
    let mut off_principal = 0;
    let mut near_cut = None;
    for j in (1..=n).rev() {
        let u = w - kappa;
        if u.re < 0.0 && u.im.abs() < BRANCH_TOL && near_cut.is_none() {
            near_cut = Some(j);
        }
        derivative = (derivative - 1.0) / u;
        let l = principal_log(u);
        let prescribed = s.entry(j);
        let branch = match reference {
            Some(r) if j - 1 < r.len() => ((r[j - 1].im - l.im) / TAU).round() as i64,
            _ => prescribed,
        };
        if branch != prescribed {
            off_principal += 1;
        }
        w = l + Complex::new(0.0, TAU * branch as f64);
        if !is_finite(w) {
            return Err(RayError::ContinuationBreakdown {
                t,
                reason: format!("non-finite pullback at index {j}"),
            });
        }
        orbit[j - 1] = w;
    }
    Ok(Pullback {
        orbit,
        derivative,
        off_principal,
        near_cut,
    })
}

/// `w_0` obtained from `F^N(t) + 2 pi i s_{N+1}` by `N` principal-branch
/// pullbacks `w_{j-1} = log(w_j - kappa) + 2 pi i s_j`.
pub fn dynamic_ray_point(kappa: Complex, s: &ExternalAddress, t: f64, n: usize) -> Result<Complex, RayError> {
    ray_orbit(kappa, s, t, n).map(|o| o[0])
}

/// The whole pulled-back orbit `w_0, ..., w_N`. At a ray parameter this is
/// the singular orbit as it would be computed in exact arithmetic.
pub fn ray_orbit(kappa: Complex, s: &ExternalAddress, t: f64, n: usize) -> Result<Vec<Complex>, RayError> {
    if !(t > 0.0) {
        return Err(RayError::InvalidInput(format!("potential must be positive, got {t}")));
    }
    let pb = pull_back(kappa, s, t, n, None)?;
    if let Some(index) = pb.near_cut {
        return Err(RayError::BranchCollision { t, index });
    }
    Ok(pb.orbit)
}

/// Solves `kappa = G(kappa)` at potential `t` starting from `seed`.
///
/// Returns the sample and the converged orbit, which serves as the branch
/// reference for the next potential.
pub fn solve_ray_point(
    s: &ExternalAddress,
    t: f64,
    seed: Complex,
    reference: Option<&[Complex]>,
    cfg: &RayConfig,
) -> Result<(RayPoint, Vec<Complex>), RayError> {
    let n = ray_depth(t, cfg)?;
    let breakdown = |reason: String| RayError::ContinuationBreakdown { t, reason };
    let mut kappa = seed;
    let mut pb = pull_back(kappa, s, t, n, reference)?;
    let mut defect = (pb.orbit[0] - kappa).norm();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let slope = pb.derivative - 1.0;
        if slope.norm() < 1e-300 {
            return Err(breakdown("vanishing derivative".into()));
        }
        let mut step = (pb.orbit[0] - kappa) / slope;
        // halve the Newton step until the defect decreases
        let mut accepted = None;
        for _ in 0..30 {
            let trial = kappa - step;
            if let Ok(next) = pull_back(trial, s, t, n, reference) {
                let d = (next.orbit[0] - trial).norm();
                if d.is_finite() && (d < defect || step.norm() <= 1e-13 * (1.0 + kappa.norm())) {
                    accepted = Some((trial, next, d));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, next, d)) = accepted else {
            break;
        };
        kappa = trial;
        pb = next;
        defect = d;
        if step.norm() <= 1e-13 * (1.0 + kappa.norm()) {
            converged = true;
            break;
        }
    }
    if !converged && defect > cfg.residual_tol {
        return Err(breakdown(format!("Newton stalled with defect {defect:e}")));
    }
    if pb.off_principal > 0 {
        return Err(breakdown(format!(
            "{} pullbacks left the principal branch",
            pb.off_principal
        )));
    }
    if let Some(index) = pb.near_cut {
        return Err(RayError::BranchCollision { t, index });
    }
    let principal = pull_back(kappa, s, t, n, None)?;
    let residual = (principal.orbit[0] - kappa).norm();
    if residual > cfg.residual_tol {
        return Err(breakdown(format!("residual {residual:e} above tolerance")));
    }
    Ok((
        RayPoint {
            t,
            kappa,
            residual,
            depth: n,
        },
        principal.orbit,
    ))
}

/// Lagrange extrapolation of the last (up to three) samples to `t`.
fn predict(samples: &[RayPoint], t: f64) -> Complex {
    let tail = &samples[samples.len().saturating_sub(3)..];
    let mut value = Complex::new(0.0, 0.0);
    for (i, pi) in tail.iter().enumerate() {
        let mut weight = 1.0;
        for (j, pj) in tail.iter().enumerate() {
            if i != j {
                weight *= (t - pj.t) / (pi.t - pj.t);
            }
        }
        value += pi.kappa * weight;
    }
    value
}

/// Traces `G_s` on the grid `t_max, t_max / f, t_max / f^2, ...` down to
/// `t_min`, where `f = cfg.grid_factor`. The grid is refined (`f -> sqrt f`)
/// whenever a step fails.
pub fn trace_parameter_ray(
    s: &ExternalAddress,
    t_max: f64,
    t_min: f64,
    cfg: &RayConfig,
) -> Result<ParameterRay, RayError> {
    if !(t_max > t_min && t_min > 0.0) {
        return Err(RayError::InvalidInput(format!(
            "need t_max > t_min > 0, got t_max = {t_max}, t_min = {t_min}"
        )));
    }
    if !(cfg.grid_factor > 1.0) {
        return Err(RayError::InvalidInput("grid factor must exceed 1".into()));
    }
    let mut factor = cfg.grid_factor;
    let mut refinements = 0;
    let mut samples: Vec<RayPoint> = Vec::new();
    let mut reference: Option<Vec<Complex>> = None;
    let mut t = t_max;
    loop {
        let seed = if samples.is_empty() {
            Complex::new(t, TAU * s.entry(1) as f64)
        } else {
            predict(&samples, t)
        };
        let attempt = solve_ray_point(s, t, seed, reference.as_deref(), cfg).and_then(|(point, orbit)| {
            if let Some(prev) = samples.last() {
                let jump = (point.kappa - prev.kappa).norm();
                let spacing = prev.t - t;
                if jump > 10.0 * spacing.max(1e-300) {
                    return Err(RayError::ContinuationBreakdown {
                        t,
                        reason: format!("step {jump:e} exceeds ten grid spacings"),
                    });
                }
            }
            Ok((point, orbit))
        });
        match attempt {
            Ok((point, orbit)) => {
                samples.push(point);
                reference = Some(orbit);
                if t <= t_min {
                    break;
                }
                t = (t / factor).max(t_min);
            }
            Err(err @ (RayError::DepthOverflow { .. } | RayError::InvalidInput(_))) => return Err(err),
            Err(err) => {
                let Some(prev) = samples.last() else {
                    return Err(err);
                };
                refinements += 1;
                if refinements > cfg.max_refinements {
                    return Err(err);
                }
                factor = factor.sqrt();
                t = (prev.t / factor).max(t_min);
            }
        }
    }
    Ok(ParameterRay {
        address: s.clone(),
        samples,
        landing: None,
    })
}

/// Traces a ray and, if it reaches `t_min <= 0.05`, attaches the landing
/// estimate when the extrapolation converges.
pub fn trace_with_landing(
    s: &ExternalAddress,
    t_max: f64,
    t_min: f64,
    cfg: &RayConfig,
) -> Result<ParameterRay, RayError> {
    let mut ray = trace_parameter_ray(s, t_max, t_min, cfg)?;
    ray.landing = estimate_landing(&ray, cfg).ok();
    Ok(ray)
}

/// `|G_s(t) - t - 2 pi i s_1|` at a traced sample.
pub fn ray_asymptotic_error(ray: &ParameterRay, t: f64) -> Option<f64> {
    let p = ray.sample_at(t)?;
    Some((p.kappa - Complex::new(t, TAU * ray.address.entry(1) as f64)).norm())
}

/// Two-term expansion `t + 2 pi i s_1 - e^{-t} (1 + t + 2 pi i (s_1 - s_2))`.
pub fn asymptotic_ray_point(s: &ExternalAddress, t: f64) -> Complex {
    let s1 = s.entry(1) as f64;
    let s2 = s.entry(2) as f64;
    Complex::new(t, TAU * s1) - (-t).exp() * Complex::new(1.0 + t, TAU * (s1 - s2))
}

fn extrapolate_to_zero(points: &[RayPoint], degree: usize) -> Option<Complex> {
    let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    let ks: Vec<Complex> = points.iter().map(|p| p.kappa).collect();
    polyfit_at_zero(&ts, &ks, degree)
}

/// Extrapolates `kappa(t)` to `t = 0` from the last samples.
///
/// Three fits are made over windows of `landing_samples` samples ending at
/// the last, second to last and third to last sample; the estimate is the
/// first and the error bar the largest distance between any two.
pub fn estimate_landing(ray: &ParameterRay, cfg: &RayConfig) -> Result<LandingEstimate, RayError> {
    let last_t = ray.last().t;
    if last_t > 0.05 {
        return Err(RayError::NoConvergence { spread: f64::INFINITY });
    }
    let w = cfg.landing_samples;
    let n = ray.samples.len();
    if n < w + 2 {
        return Err(RayError::NoConvergence { spread: f64::INFINITY });
    }
    let estimates: Vec<Complex> = (0..3)
        .map(|shift| extrapolate_to_zero(&ray.samples[n - w - shift..n - shift], cfg.landing_degree))
        .collect::<Option<_>>()
        .ok_or(RayError::NoConvergence { spread: f64::INFINITY })?;
    let spread = spread(&estimates);
    if !(spread <= cfg.landing_tol) {
        return Err(RayError::NoConvergence { spread });
    }
    Ok(LandingEstimate {
        kappa: estimates[0],
        error_bar: spread,
    })
}

/// Whether two rays have landing estimates that agree within their error
/// bars. This is empirical evidence of co-landing, not a proof.
pub fn co_land(a: &ParameterRay, b: &ParameterRay) -> bool {
    match (a.landing, b.landing) {
        (Some(x), Some(y)) => (x.kappa - y.kappa).norm() <= x.error_bar + y.error_bar,
        _ => false,
    }
}

/// Traces several rays concurrently down to `t_min`.
pub fn trace_rays(
    addresses: &[ExternalAddress],
    t_max: f64,
    t_min: f64,
    cfg: &RayConfig,
) -> Result<Vec<ParameterRay>, RayError> {
    addresses
        .par_iter()
        .map(|s| trace_parameter_ray(s, t_max, t_min, cfg))
        .collect()
}

/// Sorts addresses by `Im G_s(t)` and returns the permutation (indices into
/// `addresses`, bottom to top).
pub fn vertical_order(addresses: &[ExternalAddress], t: f64, cfg: &RayConfig) -> Result<Vec<usize>, RayError> {
    if addresses.len() <= 1 {
        return Ok((0..addresses.len()).collect());
    }
    let t_max = t.max(20.0);
    let points: Vec<RayPoint> = addresses
        .par_iter()
        .map(|s| {
            if t_max > t {
                trace_parameter_ray(s, t_max, t, cfg).map(|r| *r.last())
            } else {
                let seed = Complex::new(t, TAU * s.entry(1) as f64);
                solve_ray_point(s, t, seed, None, cfg).map(|(p, _)| p)
            }
        })
        .collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..addresses.len()).collect();
    order.sort_by(|&a, &b| points[a].kappa.im.total_cmp(&points[b].kappa.im));
    // a sample is only known up to its residual and rounding in kappa
    let uncertainty = |p: &RayPoint| 10.0 * (p.residual + 4.0 * f64::EPSILON * p.kappa.norm());
    for pair in order.windows(2) {
        let (a, b) = (&points[pair[0]], &points[pair[1]]);
        if b.kappa.im - a.kappa.im <= uncertainty(a) + uncertainty(b) {
            return Err(RayError::Unresolved {
                first: addresses[pair[0]].to_string(),
                second: addresses[pair[1]].to_string(),
                t,
            });
        }
    }
    Ok(order)
}

/// Permutation sorting `addresses` lexicographically.
pub fn lexicographic_order(addresses: &[ExternalAddress]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..addresses.len()).collect();
    order.sort_by(|&a, &b| lex_compare(&addresses[a], &addresses[b]));
    order
}

/// CSV with columns `t,re,im,residual,depth`.
pub fn write_ray_csv(ray: &ParameterRay, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "t,re_kappa,im_kappa,residual,depth")?;
    for p in &ray.samples {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.3e},{}",
            p.t, p.kappa.re, p.kappa.im, p.residual, p.depth
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RaySummary {
    pub address: String,
    pub samples: usize,
    pub t_min: f64,
    pub landing: Option<Complex>,
    pub error_bar: Option<f64>,
    pub landing_classification: Option<OrbitClassification>,
}

pub fn ray_summary(ray: &ParameterRay, dynamics: &DynamicsConfig) -> RaySummary {
    RaySummary {
        address: ray.address.to_string(),
        samples: ray.samples.len(),
        t_min: ray.last().t,
        landing: ray.landing.map(|l| l.kappa),
        error_bar: ray.landing.map(|l| l.error_bar),
        landing_classification: ray.landing.map(|l| classify_singular_orbit(l.kappa, dynamics)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ext(text: &str) -> ExternalAddress {
        text.parse().unwrap()
    }

    #[test]
    fn depth_rule() {
        let cfg = RayConfig::default();
        assert_eq!(ray_depth(60.0, &cfg).unwrap(), 0);
        assert_eq!(ray_depth(20.0, &cfg).unwrap(), 1);
        assert_eq!(ray_depth(1.0, &cfg).unwrap(), 3);
        assert!(matches!(ray_depth(1e-3, &cfg), Err(RayError::DepthOverflow { .. })));
    }

    #[test]
    fn zero_depth_returns_model_point() {
        let s = ext("[;3,1]");
        let w = dynamic_ray_point(Complex::new(0.3, 0.1), &s, 7.0, 0).unwrap();
        assert_eq!(w, Complex::new(7.0, TAU * 3.0));
    }

    #[test]
    fn real_data_gives_real_pullback() {
        let w = dynamic_ray_point(Complex::new(0.5, 0.0), &ext("[;0]"), 2.0, 2).unwrap();
        assert_eq!(w.im, 0.0);
    }

    #[test]
    fn branch_collision_is_detected() {
        // w_1 - kappa = F(t) - kappa is negative real
        let s = ext("[;0]");
        let t: f64 = 1.0;
        let kappa = Complex::new(t.exp_m1() + 1.0, 0.0);
        assert!(matches!(
            dynamic_ray_point(kappa, &s, t, 1),
            Err(RayError::BranchCollision { index: 1, .. })
        ));
    }

    #[test]
    fn real_ray_at_large_potential() {
        let cfg = RayConfig::default();
        let (p, _) = solve_ray_point(&ext("[;0]"), 20.0, Complex::new(20.0, 0.0), None, &cfg).unwrap();
        assert!((p.kappa - 20.0).norm() < 1e-6);
        assert_eq!(p.kappa.im, 0.0);
        let w = dynamic_ray_point(p.kappa, &ext("[;0]"), 20.0, p.depth).unwrap();
        assert!((w - p.kappa).norm() < 1e-9);
    }

    #[test]
    fn ray_two_term_asymptotics() {
        let cfg = RayConfig::default();
        let s = ext("[;1,-1]");
        let ray = trace_parameter_ray(&s, 20.0, 8.0, &cfg).unwrap();
        for p in &ray.samples {
            let err = (p.kappa - asymptotic_ray_point(&s, p.t)).norm();
            let scale = (1.0 + p.t).powi(2) * 40.0 * (-2.0 * p.t).exp();
            assert!(err < scale, "t = {}: {err:e} vs {scale:e}", p.t);
        }
        assert!((ray.samples[0].kappa.im - TAU).abs() < 1e-6);
    }

    #[test]
    fn truncated_ray_has_no_landing() {
        let cfg = RayConfig::default();
        let ray = trace_parameter_ray(&ext("[;0]"), 20.0, 1.0, &cfg).unwrap();
        assert!(matches!(estimate_landing(&ray, &cfg), Err(RayError::NoConvergence { .. })));
    }

    #[test]
    fn vertical_order_small_cases() {
        let cfg = RayConfig::default();
        let a = [ext("[;1]"), ext("[;0]"), ext("[;-1]")];
        assert_eq!(vertical_order(&a, 20.0, &cfg).unwrap(), vec![2, 1, 0]);
        let b = [ext("[;0,2]"), ext("[;0,1]")];
        assert_eq!(vertical_order(&b, 20.0, &cfg).unwrap(), vec![1, 0]);
        assert_eq!(vertical_order(&b[..1], 20.0, &cfg).unwrap(), vec![0]);
    }

    #[test]
    fn vertical_order_reports_unresolvable_pairs() {
        // same first two entries: separated only at order e^{-2t}
        let cfg = RayConfig::default();
        let a = [ext("[;0,1,0]"), ext("[;0,1,1]")];
        assert!(matches!(vertical_order(&a, 20.0, &cfg), Err(RayError::Unresolved { .. })));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cfg = RayConfig::default();
        let ray = trace_parameter_ray(&ext("[;0]"), 20.0, 10.0, &cfg).unwrap();
        let mut buf = Vec::new();
        write_ray_csv(&ray, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,re_kappa,im_kappa,residual,depth\n"));
        assert_eq!(text.lines().count(), ray.samples.len() + 1);
    }
}
