//! The density of `nu_k`, parametrized by the curve:
//! `f(P_k(x)) = v_k(x) / (pi (x^2 + v_k(x)^2))`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::report::ValidationReport;
use crate::transforms::TransformContext;
use crate::vcurve::{self, CurvePoint, RefineRule, DEFAULT_SOLVE_TOL};

/// Default largest deviation of the trapezoid mass from 1.
pub const DEFAULT_MASS_TOL: f64 = 1e-2;

/// Density levels, as fractions of the maximum, whose crossings are counted.
pub const DEFAULT_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Extend each side until `v_k` drops below `edge_ratio * v_k(0)`.
    Auto { edge_ratio: f64 },
    Fixed { x_min: f64, x_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub domain: Domain,
    pub n_points: usize,
    pub refine: bool,
    pub solve_tol: f64,
    pub mass_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            domain: Domain::Auto { edge_ratio: 1e-3 },
            n_points: 512,
            refine: true,
            solve_tol: DEFAULT_SOLVE_TOL,
            mass_tol: DEFAULT_MASS_TOL,
        }
    }
}

impl GridSpec {
    pub fn fixed(x_min: f64, x_max: f64, n_points: usize) -> Self {
        Self {
            domain: Domain::Fixed { x_min, x_max },
            n_points,
            ..Self::default()
        }
    }

    pub fn auto(edge_ratio: f64) -> Self {
        Self {
            domain: Domain::Auto { edge_ratio },
            ..Self::default()
        }
    }
}

/// One sample of the parametric density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub x: f64,
    pub v: f64,
    pub xi: f64,
    pub f: f64,
}

impl From<CurvePoint> for DensityPoint {
    fn from(p: CurvePoint) -> Self {
        Self {
            x: p.x,
            v: p.v,
            xi: p.xi,
            f: p.density(),
        }
    }
}

/// Numerical settings a curve was built with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveTolerances {
    pub solve_v: f64,
    pub quad_abs: f64,
    pub quad_rel: f64,
    pub mass: f64,
    /// Largest `|F_k(x + iv) - 1|` over the samples.
    pub max_f_residual: f64,
}

/// Samples of the density of `nu_k`, ordered by `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub points: Vec<DensityPoint>,
    /// Trapezoid integral of `f` over `xi`.
    pub mass: f64,
    pub mode_index: usize,
    pub tolerances: CurveTolerances,
}

/// `(P_k(x), f(P_k(x)))`.
pub fn density_at(ctx: &TransformContext, x: f64) -> Result<(f64, f64)> {
    let p = vcurve::curve_point(ctx, x, DEFAULT_SOLVE_TOL)?;
    Ok((p.xi, p.density()))
}

fn trapezoid(points: &[DensityPoint], g: impl Fn(&DensityPoint) -> f64) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (g(&w[0]) + g(&w[1])) * (w[1].xi - w[0].xi))
        .sum()
}

fn from_points(points: Vec<CurvePoint>, ctx: &TransformContext, grid: &GridSpec) -> Result<DensityCurve> {
    for w in points.windows(2) {
        if !(w[1].xi > w[0].xi) {
            return Err(Error::NonMonotoneBoundary {
                x0: w[0].x,
                x1: w[1].x,
            });
        }
    }
    let max_f_residual = points.iter().map(|p| p.f_residual).fold(0.0, f64::max);
    let points: Vec<DensityPoint> = points.into_iter().map(DensityPoint::from).collect();
    let mass = trapezoid(&points, |p| p.f);
    let mode_index = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.f.total_cmp(&b.1.f))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(DensityCurve {
        points,
        mass,
        mode_index,
        tolerances: CurveTolerances {
            solve_v: grid.solve_tol,
            quad_abs: ctx.quad().abs_tol,
            quad_rel: ctx.quad().rel_tol,
            mass: grid.mass_tol,
            max_f_residual,
        },
    })
}

fn build_on(ctx: &TransformContext, x_min: f64, x_max: f64, grid: &GridSpec) -> Result<DensityCurve> {
    let rule = RefineRule {
        max_density_step: Some(1.0 / 64.0),
        ..RefineRule::default()
    };
    let points = vcurve::curve_grid_with(
        ctx,
        x_min,
        x_max,
        grid.n_points,
        grid.refine.then_some(&rule),
        grid.solve_tol,
    )?;
    from_points(points, ctx, grid)
}

/// Samples the density on the grid and checks that it is a probability density.
///
/// On an automatic domain a mass deficit triggers one retry on a domain four
/// times as wide.
pub fn build_density(ctx: &TransformContext, grid: &GridSpec) -> Result<DensityCurve> {
    if !(grid.mass_tol > 0.0) || !(grid.solve_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let (x_min, x_max) = match grid.domain {
        Domain::Auto { edge_ratio } => vcurve::auto_domain(ctx, edge_ratio)?,
        Domain::Fixed { x_min, x_max } => (x_min, x_max),
    };
    let mut curve = build_on(ctx, x_min, x_max, grid)?;
    if curve.mass < 1.0 - grid.mass_tol && matches!(grid.domain, Domain::Auto { .. }) {
        let mid = 0.5 * (x_min + x_max);
        let half = 2.0 * (x_max - x_min);
        curve = build_on(ctx, mid - half, mid + half, grid)?;
    }
    if (curve.mass - 1.0).abs() > grid.mass_tol {
        return Err(Error::MassDeficit {
            mass: curve.mass,
            tolerance: grid.mass_tol,
        });
    }
    Ok(curve)
}

impl DensityCurve {
    pub fn f_max(&self) -> f64 {
        self.points[self.mode_index].f
    }

    /// The law translated by `delta` (free convolution with a point mass).
    pub fn shifted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.points {
            p.xi += delta;
        }
        out
    }

    /// Linear interpolation of `f` at `xi`; zero outside the sampled range.
    pub fn interpolate(&self, xi: f64) -> f64 {
        let pts = &self.points;
        let i = pts.partition_point(|p| p.xi <= xi);
        if i == 0 || i == pts.len() {
            if i > 0 && pts[i - 1].xi == xi {
                return pts[i - 1].f;
            }
            return 0.0;
        }
        let (a, b) = (&pts[i - 1], &pts[i]);
        a.f + (b.f - a.f) * (xi - a.xi) / (b.xi - a.xi)
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (self.points[0].xi, self.points[self.points.len() - 1].xi)
    }

    /// Point where the cumulative trapezoid mass reaches half the total.
    pub fn median(&self) -> f64 {
        let table = cdf(self);
        let half = 0.5 * self.mass;
        let i = table.partition_point(|&(_, c)| c < half).max(1);
        let ((x0, c0), (x1, c1)) = (table[i - 1], table[i]);
        if c1 == c0 {
            x0
        } else {
            x0 + (x1 - x0) * (half - c0) / (c1 - c0)
        }
    }

    /// CSV with header `x,v,xi,f` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,v,xi,f")?;
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.v, p.xi, p.f)?;
        }
        Ok(())
    }
}

/// Location `omega` and height of the maximum of the density, refined by
/// golden-section search in `x` around the best sample.
pub fn mode(ctx: &TransformContext, curve: &DensityCurve) -> Result<(f64, f64)> {
    let pts = &curve.points;
    let j = curve.mode_index;
    let lo = pts[j.saturating_sub(1)].x;
    let hi = pts[(j + 1).min(pts.len() - 1)].x;
    if lo == hi {
        return Ok((pts[j].xi, pts[j].f));
    }
    let x = vcurve::golden_section(|x| Ok(-density_at(ctx, x)?.1), lo, hi, 1e-10)?;
    let (xi, f) = density_at(ctx, x)?;
    if f >= pts[j].f {
        Ok((xi, f))
    } else {
        Ok((pts[j].xi, pts[j].f))
    }
}

/// Signs of consecutive differences, with steps of size at most `flat_tol`
/// dropped.
fn step_signs(values: impl Iterator<Item = f64>, flat_tol: f64) -> Vec<i8> {
    let values: Vec<f64> = values.collect();
    values
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            (d.abs() > flat_tol).then_some(if d > 0.0 { 1 } else { -1 })
        })
        .collect()
}

/// Number of solutions of `f = level` seen along the samples.
pub fn level_crossings(curve: &DensityCurve, level: f64) -> usize {
    let mut count = 0;
    let mut prev: Option<bool> = None;
    for p in &curve.points {
        if p.f == level {
            continue;
        }
        let above = p.f > level;
        if prev.is_some_and(|q| q != above) {
            count += 1;
        }
        prev = Some(above);
    }
    count
}

/// Unimodality: the density rises then falls (plateaus within `flat_tol`
/// ignored), and every level strictly between 0 and the maximum is met
/// exactly twice.
pub fn check_unimodal(curve: &DensityCurve, flat_tol: f64) -> ValidationReport {
    check_unimodal_levels(curve, flat_tol, &DEFAULT_LEVELS)
}

pub fn check_unimodal_levels(curve: &DensityCurve, flat_tol: f64, levels: &[f64]) -> ValidationReport {
    let mut report = ValidationReport::new();
    let signs = step_signs(curve.points.iter().map(|p| p.f), flat_tol);
    let peaks = signs.windows(2).filter(|w| w[0] > 0 && w[1] < 0).count();
    let valleys = signs.windows(2).filter(|w| w[0] < 0 && w[1] > 0).count();
    let pass = peaks == 1 && valleys == 0;
    report.push_detail(
        "unimodal",
        pass,
        (peaks as f64 - 1.0).abs() + valleys as f64,
        format!("rise_to_fall={peaks} fall_to_rise={valleys}"),
    );

    let f_max = curve.points.iter().map(|p| p.f).fold(0.0, f64::max);
    for &frac in levels {
        let n = level_crossings(curve, frac * f_max);
        report.push_detail(
            format!("level_crossings_{frac}"),
            n == 2,
            (n as f64 - 2.0).abs(),
            format!("crossings={n}"),
        );
    }
    report
}

/// Default flatness band for [`check_unimodal`].
pub fn default_flat_tol(curve: &DensityCurve) -> f64 {
    1e-12 * curve.f_max()
}

/// Cumulative trapezoid integral `(xi, int_{xi_0}^{xi} f)`; the last entry
/// equals the curve mass.
pub fn cdf(curve: &DensityCurve) -> Vec<(f64, f64)> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(curve.points.len());
    out.push((curve.points[0].xi, 0.0));
    for w in curve.points.windows(2) {
        acc += 0.5 * (w[0].f + w[1].f) * (w[1].xi - w[0].xi);
        out.push((w[1].xi, acc));
    }
    out
}

/// Convexity of the distribution function left of the mode and concavity to
/// the right, via the slopes of the cumulative table.
pub fn check_cdf_shape(curve: &DensityCurve, flat_tol: f64) -> ValidationReport {
    let table = cdf(curve);
    let slopes: Vec<f64> = table
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let signs = step_signs(slopes.into_iter(), flat_tol);
    let turns = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let convex_then_concave = turns == 1 && signs.first() == Some(&1);
    let mut report = ValidationReport::new();
    report.push_detail(
        "cdf_convex_concave",
        convex_then_concave,
        (turns as f64 - 1.0).abs(),
        format!("slope_turns={turns}"),
    );
    report
}

/// Raw moments `int xi^j f(xi) dxi` for `j = 1..=order`.
pub fn moments_from_density(curve: &DensityCurve, order: usize) -> Result<Vec<f64>> {
    if order > 8 {
        return Err(Error::InvalidArgument(format!(
            "density moments are limited to order 8, got {order}"
        )));
    }
    Ok((1..=order)
        .map(|j| trapezoid(&curve.points, |p| p.xi.powi(j as i32) * p.f))
        .collect())
}

/// `-Im G(xi + iy) / pi`, extrapolated to `y = 0` from the two smallest
/// probe heights (or the plain value for a single probe).
fn stieltjes_estimate(ctx: &TransformContext, xi: f64, probes: &[f64]) -> Result<f64> {
    let values = probes
        .iter()
        .map(|&y| Ok(-ctx.cauchy_oracle(Complex64::new(xi, y))?.im / std::f64::consts::PI))
        .collect::<Result<Vec<f64>>>()?;
    Ok(match values.as_slice() {
        [g] => *g,
        [g1, g2, ..] => {
            let (y1, y2) = (probes[0], probes[1]);
            (y1 * g2 - y2 * g1) / (y1 - y2)
        }
        [] => unreachable!(),
    })
}

/// Default agreement tolerance between the two density evaluations.
pub const CROSSVALIDATE_TOL: f64 = 1e-3;

/// Compares the parametric density with Stieltjes inversion of the Cauchy
/// transform computed by the oracle, at every sample.
pub fn crossvalidate(ctx: &TransformContext, curve: &DensityCurve, y_probe: &[f64]) -> Result<ValidationReport> {
    crossvalidate_with(ctx, curve, y_probe, CROSSVALIDATE_TOL)
}

pub fn crossvalidate_with(
    ctx: &TransformContext,
    curve: &DensityCurve,
    y_probe: &[f64],
    tol: f64,
) -> Result<ValidationReport> {
    if y_probe.is_empty() || y_probe.iter().any(|y| !(*y > 0.0 && *y <= 1e-2)) {
        return Err(Error::InvalidArgument(
            "probe heights must lie in (0, 0.01]".into(),
        ));
    }
    let mut probes = y_probe.to_vec();
    probes.sort_by(f64::total_cmp);
    probes.dedup();
    let outcomes: Vec<Result<f64>> = curve
        .points
        .par_iter()
        .map(|p| Ok((stieltjes_estimate(ctx, p.xi, &probes)? - p.f).abs()))
        .collect();
    let mut worst: f64 = 0.0;
    let mut worst_xi = curve.points[0].xi;
    let mut failures = 0;
    for (p, outcome) in curve.points.iter().zip(outcomes) {
        match outcome {
            Ok(d) => {
                if d > worst {
                    worst = d;
                    worst_xi = p.xi;
                }
            }
            Err(e) if e.is_numerical() => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let mut report = ValidationReport::new();
    report.push_detail(
        "crossvalidate",
        worst <= tol && failures < curve.points.len(),
        worst,
        format!("worst_xi={worst_xi:e} oracle_failures={failures}"),
    );
    Ok(report)
}

/// Largest `|f_a(xi) - f_b(xi + shift)|` over the samples of `a` inside the
/// range covered by `b`.
pub fn sup_distance(a: &DensityCurve, b: &DensityCurve, shift: f64) -> f64 {
    let (lo, hi) = b.xi_range();
    a.points
        .iter()
        .filter(|p| p.xi + shift >= lo && p.xi + shift <= hi)
        .map(|p| (p.f - b.interpolate(p.xi + shift)).abs())
        .fold(0.0, f64::max)
}
