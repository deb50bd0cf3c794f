//! Adaptive Gauss-Kronrod quadrature for the two integrand families used by
//! the transforms: the Poisson-type kernel `|t| k(t) / ((x - t)^2 + y^2)` and
//! the Cauchy-type kernel `|t| k(t) / (z - t)`.
//!
//! Both kernels have a single movable near-singularity at `t = x` of width
//! `y`. They are integrated in the offset variable `s = t - x`, folded so
//! that `t = x + s` and `t = x - s` share one panel. Near the peak the
//! offset is resolved far below the floating point spacing of `x` itself,
//! which is what makes heights `y` of order `1e-20` tractable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy::LevyDensity;

/// Tolerances and mandatory split points for the adaptive integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any panel.
    pub max_depth: u32,
    /// Maximum number of live panels, counting the initial split.
    pub max_panels: usize,
    /// Extra split points in the integration variable `t`. The kernels always
    /// split at `t = 0` and `t = Re z`.
    pub split_points: Vec<f64>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-9,
            max_depth: 40,
            max_panels: 20_000,
            split_points: Vec::new(),
        }
    }
}

impl QuadSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_depth: u32) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_depth,
            max_panels: 20_000,
            split_points: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "abs_tol".into(),
                value: self.abs_tol,
                reason: "must be positive",
            });
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rel_tol".into(),
                value: self.rel_tol,
                reason: "must be positive",
            });
        }
        if self.max_depth < 10 {
            return Err(Error::InvalidParameter {
                name: "max_depth".into(),
                value: self.max_depth as f64,
                reason: "must be at least 10",
            });
        }
        Ok(())
    }
}

/// Values the integrator can accumulate: real or complex.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

// Kronrod abscissae and weights (15 points) with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];


fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = fc.magnitude() * WGK[7];
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..3 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        resg = resg + (f1 + f2) * WG[j];
        resk = resk + (f1 + f2) * WGK[jtw];
        resabs += WGK[jtw] * (f1.magnitude() + f2.magnitude());
    }
    for j in 0..4 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        resk = resk + (f1 + f2) * WGK[jtwm1];
        resabs += WGK[jtwm1] * (f1.magnitude() + f2.magnitude());
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).magnitude();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).magnitude() + (fv2[j] - reskh).magnitude());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).magnitude();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    depth: u32,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[breaks[0], breaks[last]]`,
/// with every interior break treated as a mandatory panel boundary.
pub(crate) fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    breaks: &[f64],
    spec: &QuadSpec,
) -> Result<T> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Ok(T::zero());
    }

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel<T>> = Vec::new();
    let mut total = T::zero();
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        let (value, error) = gk15(f, w[0], w[1]);
        total = total + value;
        total_err += error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
            depth: 0,
        });
    }

    let mut panels = heap.len();
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.magnitude());
        if total_err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::QuadNonConvergence {
                estimate: total_err,
                tolerance: tol,
            });
        };
        let width = worst.b - worst.a;
        let scale = worst.a.abs().max(worst.b.abs());
        if worst.depth >= spec.max_depth || width <= 64.0 * f64::EPSILON * scale {
            frozen.push(worst);
            continue;
        }
        if panels >= spec.max_panels {
            return Err(Error::QuadNonConvergence {
                estimate: total_err,
                tolerance: tol,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err += e1 + e2 - worst.error;
        panels += 1;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            depth: worst.depth + 1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            depth: worst.depth + 1,
        });
    }

    // Re-sum in a fixed order so the result does not carry update drift.
    let mut all: Vec<Panel<T>> = heap.into_vec();
    all.extend(frozen);
    all.sort_by(|p, q| p.a.total_cmp(&q.a));
    Ok(all.iter().fold(T::zero(), |acc, p| acc + p.value))
}

/// Smallest cutoff `T >= 2|x| + 1` (doubling) such that the part of
/// `int w(t) kernel(t - x) dt` over `|t| > T` is below `tol / 10`, given a
/// bound `kernel_sup(d)` on the kernel at distance at least `d` from `x`.
pub(crate) fn tail_cutoff(
    k: &LevyDensity,
    x: f64,
    kernel_sup: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<f64> {
    let mut cutoff = 2.0 * x.abs() + 1.0;
    while cutoff < 1e12 {
        let bound = k.tail_bound(cutoff, 1) * kernel_sup(cutoff - x.abs());
        if bound <= 0.1 * tol {
            return Ok(cutoff);
        }
        cutoff *= 2.0;
    }
    Err(Error::NonIntegrable)
}

/// Integrates `|t| k(t) kernel(t - x)` over the real line, where the kernel
/// peaks at offset zero with width `y`.
fn peak_integral<T: QuadValue>(
    k: &LevyDensity,
    x: f64,
    y: f64,
    spec: &QuadSpec,
    kernel: impl Fn(f64) -> T + Sync,
    kernel_sup: impl Fn(f64) -> f64,
) -> Result<T> {
    let cutoff = tail_cutoff(k, x, kernel_sup, spec.abs_tol)?;
    let fold_end = cutoff - x.abs();
    let far_end = cutoff + x.abs();
    // The longer half-line continues on the side opposite to the sign of x.
    let far_dir = if x >= 0.0 { -1.0 } else { 1.0 };

    let mut breaks = vec![0.0, fold_end, far_end];
    let mut add = |s: f64| {
        if s > 0.0 && s < far_end {
            breaks.push(s);
        }
    };
    add(x.abs());
    for b in k.breakpoints().iter().chain(spec.split_points.iter()) {
        add((b - x).abs());
    }
    if y < 1.0 {
        let mut s = y;
        while s < fold_end.min(1.0) {
            add(s);
            s *= 4.0;
        }
    }

    // Zero weights are skipped so that an overflowing kernel cannot produce 0 * inf.
    let term = |d: f64| {
        let w = k.weighted(x + d);
        if w == 0.0 {
            T::zero()
        } else {
            kernel(d) * w
        }
    };
    let integrand = |s: f64| {
        if s <= fold_end {
            term(s) + term(-s)
        } else {
            term(far_dir * s)
        }
    };
    integrate(&integrand, &breaks, spec)
}

fn check_height(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "height y must be positive and finite, got {y}"
        )))
    }
}

/// `F(x + iy) = int |t| k(t) / ((x - t)^2 + y^2) dt` for `y > 0`.
pub fn poisson_integral(k: &LevyDensity, x: f64, y: f64, spec: &QuadSpec) -> Result<f64> {
    check_height(y)?;
    let y2 = y * y;
    peak_integral(
        k,
        x,
        y,
        spec,
        move |d: f64| 1.0 / (d * d + y2),
        move |d| 1.0 / (d * d + y2),
    )
}

/// `dF/dy = -2y int |t| k(t) / ((x - t)^2 + y^2)^2 dt`.
pub fn poisson_dy(k: &LevyDensity, x: f64, y: f64, spec: &QuadSpec) -> Result<f64> {
    check_height(y)?;
    let y2 = y * y;
    // Scale the kernel so the integral is O(F / y) and the tolerance stays meaningful.
    let inner = peak_integral(
        k,
        x,
        y,
        spec,
        move |d: f64| {
            let r = d * d + y2;
            y2 / (r * r)
        },
        move |d| y2 / (d * d + y2).powi(2),
    )?;
    Ok(-2.0 * inner / y)
}

/// `int |t| k(t) / (z - t) dt` for `Im z > 0`.
pub fn cauchy_integral(k: &LevyDensity, z: Complex64, spec: &QuadSpec) -> Result<Complex64> {
    check_height(z.im)?;
    let y = z.im;
    peak_integral(
        k,
        z.re,
        y,
        spec,
        move |d: f64| Complex64::new(-d, y).inv(),
        move |d| 1.0 / (d * d + y * y).sqrt(),
    )
}

/// `int |t| k(t) / (z - t)^2 dt`, the derivative kernel of the Cauchy integral
/// (with a sign flip).
pub fn cauchy_derivative(k: &LevyDensity, z: Complex64, spec: &QuadSpec) -> Result<Complex64> {
    check_height(z.im)?;
    let y = z.im;
    peak_integral(
        k,
        z.re,
        y,
        spec,
        move |d: f64| {
            let q = Complex64::new(-d, y);
            (q * q).inv()
        },
        move |d| 1.0 / (d * d + y * y),
    )
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The 32-node Gauss-Legendre rule, computed once.
pub(crate) fn gauss_legendre_32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_integrate_constants() {
        let sum: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((sum - 2.0).abs() < 1e-15);
        let gsum: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((gsum - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_integrates_smooth_and_kinked() {
        let spec = QuadSpec::default();
        let v: f64 = integrate(&|t: f64| t.sin(), &[0.0, std::f64::consts::PI], &spec).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v: f64 = integrate(&|t: f64| t.abs(), &[-1.0, 0.3, 2.0], &spec).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
        // sqrt endpoint singularity needs refinement
        let v: f64 = integrate(&|t: f64| t.sqrt(), &[0.0, 1.0], &spec).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn narrow_lorentzian_is_resolved() {
        let spec = QuadSpec::default();
        let y = 1e-9;
        let v: f64 = integrate(&|s: f64| y / (s * s + y * y), &[-1.0, 0.0, 1.0], &spec).unwrap();
        let exact = 2.0 * (1.0 / y).atan();
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let spec = QuadSpec {
            max_depth: 10,
            ..QuadSpec::default()
        };
        let err = integrate(&|t: f64| 1.0 / t.abs().sqrt(), &[-1.0, 0.0, 1.0], &spec).unwrap_err();
        assert!(matches!(err, Error::QuadNonConvergence { .. }));
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(32);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        let m62: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(62)).sum();
        assert!((m62 - 2.0 / 63.0).abs() < 1e-14);
        for pair in x.windows(2) {
            assert!(pair[0] < pair[1]);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(QuadSpec::new(1e-11, 1e-9, 40).is_ok());
        assert!(QuadSpec::new(0.0, 1e-9, 40).is_err());
        assert!(QuadSpec::new(1e-11, 1e-9, 5).is_err());
    }
}
