//! The boundary curve `v_k` and the boundary map `P_k`.
//!
//! For every real `x` the function `y -> F_k(x + iy)` decreases strictly from
//! `+inf` to `0`, so `F_k(x + i v_k(x)) = 1` has a unique solution. Along the
//! curve `H_k` is real and `P_k(x) = H_k(x + i v_k(x))` is an increasing
//! homeomorphism of the real line.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::transforms::TransformContext;

/// Default bound on `|F_k(x + iv) - 1|`.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;

/// Largest `|Im H_k|` tolerated on the curve.
pub const CURVE_IMAG_TOL: f64 = 1e-8;

const LN_Y_MIN: f64 = -690.0;
const LN_Y_MAX: f64 = 690.0;

/// A point `x + i v_k(x)` of the curve and its image `xi = P_k(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub v: f64,
    pub xi: f64,
    pub f_residual: f64,
}

impl CurvePoint {
    /// Density of `nu_k` at `xi`: `v / (pi (x^2 + v^2))`.
    pub fn density(&self) -> f64 {
        self.v / (PI * (self.x * self.x + self.v * self.v))
    }
}

/// Solves `F_k(x + iv) = 1` for `v > 0`.
///
/// Works in `u = ln y`, where `F` is smooth and monotone: a bracket is grown
/// from `y = 1`, then safeguarded Newton steps (falling back to bisection)
/// shrink it until `|F - 1| <= tol`.
pub fn solve_v(ctx: &TransformContext, x: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("x must be finite, got {x}")));
    }
    let g = |u: f64| -> Result<f64> { Ok(ctx.f_transform(x, u.exp())? - 1.0) };

    let mut u = 0.0;
    let mut gu = g(u)?;
    if gu.abs() <= tol {
        return Ok(1.0);
    }
    // g decreases in u; find lo with g > 0 and hi with g < 0.
    let (mut lo, mut hi) = (u, u);
    let mut step = 1.0;
    if gu > 0.0 {
        loop {
            hi = (lo + step).min(LN_Y_MAX);
            let gh = g(hi)?;
            if gh <= 0.0 {
                u = hi;
                gu = gh;
                break;
            }
            if hi >= LN_Y_MAX {
                return Err(Error::BracketNotFound {
                    x,
                    y: hi.exp(),
                    side: "above",
                });
            }
            lo = hi;
            step *= 2.0;
        }
    } else {
        loop {
            lo = (hi - step).max(LN_Y_MIN);
            let gl = g(lo)?;
            if gl >= 0.0 {
                u = lo;
                gu = gl;
                break;
            }
            if lo <= LN_Y_MIN {
                return Err(Error::BracketNotFound {
                    x,
                    y: lo.exp(),
                    side: "below",
                });
            }
            hi = lo;
            step *= 2.0;
        }
    }
    if gu.abs() <= tol {
        return Ok(u.exp());
    }

    for _ in 0..200 {
        let y = u.exp();
        // F overflows for y far below the curve; bisect until it is finite.
        let slope = match ctx.f_dy(x, y) {
            Ok(d) => y * d,
            Err(e) if e.is_numerical() => f64::NAN,
            Err(e) => return Err(e),
        };
        let newton = u - gu / slope;
        let next = if slope < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        u = next;
        gu = g(u)?;
        if gu.abs() <= tol {
            return Ok(u.exp());
        }
        if gu > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        if hi - lo <= 1e-14 * u.abs().max(1.0) {
            break;
        }
    }
    Err(Error::SolverStalled { x, residual: gu.abs() })
}

/// Full curve data at `x`.
pub fn curve_point(ctx: &TransformContext, x: f64, tol: f64) -> Result<CurvePoint> {
    let v = solve_v(ctx, x, tol)?;
    let h = ctx.h_transform(Complex64::new(x, v))?;
    if h.im.abs() > CURVE_IMAG_TOL * v.max(1.0) {
        return Err(Error::InconsistentCurve { x, imag: h.im });
    }
    let f_residual = (ctx.f_transform(x, v)? - 1.0).abs();
    Ok(CurvePoint {
        x,
        v,
        xi: h.re,
        f_residual,
    })
}

/// `P_k(x) = Re H_k(x + i v_k(x))`.
pub fn p_map(ctx: &TransformContext, x: f64) -> Result<f64> {
    Ok(curve_point(ctx, x, DEFAULT_SOLVE_TOL)?.xi)
}

/// Limits for grid refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineRule {
    /// Largest allowed ratio between neighbouring `xi` gaps.
    pub gap_ratio: f64,
    /// If set, largest allowed change of the density between neighbours as a
    /// fraction of its maximum.
    pub max_density_step: Option<f64>,
    pub max_rounds: usize,
    pub max_points: usize,
}

impl Default for RefineRule {
    fn default() -> Self {
        Self {
            gap_ratio: 4.0,
            max_density_step: None,
            max_rounds: 24,
            max_points: 20_000,
        }
    }
}

fn solve_all(ctx: &TransformContext, xs: &[f64], tol: f64) -> Result<Vec<CurvePoint>> {
    xs.par_iter().map(|&x| curve_point(ctx, x, tol)).collect()
}

/// `n_points` uniformly spaced curve points on `[x_min, x_max]`, optionally
/// refined so that neighbouring `xi` gaps differ by less than a factor 4.
pub fn curve_grid(
    ctx: &TransformContext,
    x_min: f64,
    x_max: f64,
    n_points: usize,
    refine: bool,
) -> Result<Vec<CurvePoint>> {
    let rule = refine.then(RefineRule::default);
    curve_grid_with(ctx, x_min, x_max, n_points, rule.as_ref(), DEFAULT_SOLVE_TOL)
}

pub fn curve_grid_with(
    ctx: &TransformContext,
    x_min: f64,
    x_max: f64,
    n_points: usize,
    rule: Option<&RefineRule>,
    tol: f64,
) -> Result<Vec<CurvePoint>> {
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "grid needs finite x_min < x_max, got [{x_min}, {x_max}]"
        )));
    }
    if n_points < 16 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 16 points, got {n_points}"
        )));
    }
    let xs: Vec<f64> = (0..n_points)
        .map(|i| x_min + (x_max - x_min) * i as f64 / (n_points - 1) as f64)
        .collect();
    let mut points = solve_all(ctx, &xs, tol)?;
    let Some(rule) = rule else {
        return Ok(points);
    };
    let min_dx = 1e-10 * x_min.abs().max(x_max.abs()).max(1.0);
    for _ in 0..rule.max_rounds {
        let split = intervals_to_split(&points, rule, min_dx);
        if split.is_empty() || points.len() + split.len() > rule.max_points {
            break;
        }
        let mids: Vec<f64> = split
            .iter()
            .map(|&i| 0.5 * (points[i].x + points[i + 1].x))
            .collect();
        let fresh = solve_all(ctx, &mids, tol)?;
        let mut merged = Vec::with_capacity(points.len() + fresh.len());
        let mut fresh_iter = split.iter().zip(fresh).peekable();
        for (i, p) in points.iter().enumerate() {
            merged.push(*p);
            if let Some((_, q)) = fresh_iter.next_if(|(&j, _)| j == i) {
                merged.push(q);
            }
        }
        points = merged;
    }
    Ok(points)
}

/// Indices `i` of intervals `[p_i, p_{i+1}]` that need a midpoint.
fn intervals_to_split(points: &[CurvePoint], rule: &RefineRule, min_dx: f64) -> Vec<usize> {
    let gaps: Vec<f64> = points.windows(2).map(|w| w[1].xi - w[0].xi).collect();
    let f_max = points.iter().map(CurvePoint::density).fold(0.0, f64::max);
    let mut out = Vec::new();
    for i in 0..gaps.len() {
        if points[i + 1].x - points[i].x <= 2.0 * min_dx {
            continue;
        }
        let g = gaps[i].abs();
        let wide_left = i > 0 && g > rule.gap_ratio * gaps[i - 1].abs();
        let wide_right = i + 1 < gaps.len() && g > rule.gap_ratio * gaps[i + 1].abs();
        let steep = rule.max_density_step.is_some_and(|frac| {
            (points[i + 1].density() - points[i].density()).abs() > frac * f_max
        });
        if wide_left || wide_right || steep {
            out.push(i);
        }
    }
    out
}

/// The `x` range where `v_k` exceeds `edge_ratio` times its value at the
/// centre. Points where the solver cannot bracket count as outside.
pub fn auto_domain(ctx: &TransformContext, edge_ratio: f64) -> Result<(f64, f64)> {
    if !(edge_ratio > 0.0 && edge_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "edge ratio must lie in (0, 1), got {edge_ratio}"
        )));
    }
    let center = 0.0;
    let v_ref = solve_v(ctx, center, DEFAULT_SOLVE_TOL)?;
    let threshold = edge_ratio * v_ref;
    let inside = |x: f64| -> Result<bool> {
        match solve_v(ctx, x, DEFAULT_SOLVE_TOL) {
            Ok(v) => Ok(v > threshold),
            Err(Error::BracketNotFound { .. } | Error::SolverStalled { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let mut edges = [0.0; 2];
    for (slot, dir) in [(0, -1.0), (1, 1.0)] {
        let mut near = 0.0;
        let mut far = v_ref.max(1e-3);
        loop {
            if !inside(center + dir * far)? {
                break;
            }
            near = far;
            far *= 2.0;
            if far > 1e8 {
                return Err(Error::InvalidArgument(
                    "could not find where the curve decays; use a fixed domain".into(),
                ));
            }
        }
        for _ in 0..40 {
            let mid = 0.5 * (near + far);
            if inside(center + dir * mid)? {
                near = mid;
            } else {
                far = mid;
            }
            if far - near <= 1e-6 * far {
                break;
            }
        }
        edges[slot] = center + dir * near;
    }
    Ok((edges[0], edges[1]))
}

/// `F_k(r sin(theta) e^{i theta})` for each `theta`: the profile of `F_k`
/// along the circle through `0` and `ir`.
pub fn angular_profile(ctx: &TransformContext, r: f64, thetas: &[f64]) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if let Some(t) = thetas.iter().find(|t| !(**t > 0.0 && **t < PI)) {
        return Err(Error::InvalidArgument(format!("theta {t} is outside (0, pi)")));
    }
    thetas
        .par_iter()
        .map(|&theta| {
            let s = theta.sin();
            ctx.f_transform(r * s * theta.cos(), r * s * s)
        })
        .collect()
}

/// `theta_j = pi j / (n + 1)` for `j = 1..=n`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| PI * j as f64 / (n + 1) as f64).collect()
}

/// Number of local minima of a sampled function; runs of values within
/// `flat_tol` of each other count as one plateau. End points count when the
/// profile rises away from them.
pub fn count_local_minima(values: &[f64], flat_tol: f64) -> usize {
    let signs: Vec<i8> = values
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            if d.abs() <= flat_tol {
                None
            } else {
                Some(if d > 0.0 { 1 } else { -1 })
            }
        })
        .collect();
    let Some(&first) = signs.first() else {
        return 1;
    };
    let mut count = usize::from(first > 0);
    count += signs.windows(2).filter(|w| w[0] < 0 && w[1] > 0).count();
    if *signs.last().unwrap() < 0 {
        count += 1;
    }
    count
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularMinimum {
    pub r: f64,
    pub theta: f64,
    pub cos_theta: f64,
    pub local_minima: usize,
    pub profile: Vec<f64>,
}

/// Samples the angular profile on the default 101-point grid, counts its
/// local minima and refines the minimizer by golden-section search.
pub fn angular_minimum(ctx: &TransformContext, r: f64) -> Result<AngularMinimum> {
    let thetas = theta_grid(101);
    let profile = angular_profile(ctx, r, &thetas)?;
    let f_scale = profile.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let local_minima = count_local_minima(&profile, 1e-12 * f_scale.max(1.0));
    let j = profile
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let lo = if j == 0 { 1e-9 } else { thetas[j - 1] };
    let hi = if j + 1 == thetas.len() { PI - 1e-9 } else { thetas[j + 1] };
    let f = |theta: f64| {
        let s = theta.sin();
        ctx.f_transform(r * s * theta.cos(), r * s * s)
    };
    let theta = golden_section(f, lo, hi, 1e-10)?;
    Ok(AngularMinimum {
        r,
        theta,
        cos_theta: theta.cos(),
        local_minima,
        profile,
    })
}

/// Minimizer of a unimodal function on `[a, b]`.
pub(crate) fn golden_section(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
