//! The transforms built from `k`:
//!
//! ```text
//! G~_k(z) = int sign(t) k(t) / (z - t) dt
//! H_k(z)  = z + z G~_k(z) = z + gamma_k + int |t| k(t) / (z - t) dt
//! F_k(z)  = int |t| k(t) / |z - t|^2 dt,     Im H_k(z) = Im z (1 - F_k(z))
//! ```
//!
//! `H_k` inverts the Cauchy transform of `nu_k`: `G_{nu_k}(H_k(z)) = 1/z` on
//! the region above the curve `v_k`. [`TransformContext::cauchy_oracle`] uses
//! this to evaluate `G_{nu_k}` independently of the parametric density.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy::{self, FreeTriplet, LevyDensity};
use crate::quad::{self, QuadSpec};

const NEWTON_STEPS: usize = 200;

/// A density together with its cached drift `gamma_k` and quadrature settings.
#[derive(Debug, Clone)]
pub struct TransformContext {
    k: LevyDensity,
    gamma_k: f64,
    quad: QuadSpec,
}

impl TransformContext {
    pub fn new(k: LevyDensity, quad: QuadSpec) -> Result<Self> {
        quad.validate()?;
        let gamma_k = levy::gamma_k(&k)?;
        Ok(Self { k, gamma_k, quad })
    }

    pub fn with_defaults(k: LevyDensity) -> Result<Self> {
        Self::new(k, QuadSpec::default())
    }

    pub fn k(&self) -> &LevyDensity {
        &self.k
    }

    pub fn gamma_k(&self) -> f64 {
        self.gamma_k
    }

    pub fn quad(&self) -> &QuadSpec {
        &self.quad
    }

    /// `H_k(z)` for `Im z > 0`.
    pub fn h_transform(&self, z: Complex64) -> Result<Complex64> {
        let integral = quad::cauchy_integral(&self.k, z, &self.quad)?;
        Ok(z + self.gamma_k + integral)
    }

    /// `H_k'(z) = 1 - int |t| k(t) / (z - t)^2 dt`.
    pub fn h_derivative(&self, z: Complex64) -> Result<Complex64> {
        Ok(1.0 - quad::cauchy_derivative(&self.k, z, &self.quad)?)
    }

    /// `G~_k(z) = (H_k(z) - z) / z`.
    pub fn g_tilde(&self, z: Complex64) -> Result<Complex64> {
        Ok((self.h_transform(z)? - z) / z)
    }

    /// `F_k(x + iy)`.
    pub fn f_transform(&self, x: f64, y: f64) -> Result<f64> {
        quad::poisson_integral(&self.k, x, y, &self.quad)
    }

    /// `dF_k(x + iy) / dy`.
    pub fn f_dy(&self, x: f64, y: f64) -> Result<f64> {
        quad::poisson_dy(&self.k, x, y, &self.quad)
    }

    /// True if `z` lies above the curve, i.e. `Im H_k(z) > 0`.
    pub fn in_upper_domain(&self, z: Complex64) -> Result<bool> {
        Ok(self.f_transform(z.re, z.im)? < 1.0)
    }

    /// `G_{nu_k}(zeta)` for `Im zeta > 0`, computed as `1/z` where
    /// `H_k(z) = zeta`.
    pub fn cauchy_oracle(&self, zeta: Complex64) -> Result<Complex64> {
        Ok(self.invert_h(zeta)?.inv())
    }

    /// Solves `H_k(z) = zeta`. Since `Im H_k > 0` exactly above the curve,
    /// any root in the upper half-plane is the one on that region.
    pub fn invert_h(&self, zeta: Complex64) -> Result<Complex64> {
        if !(zeta.im > 0.0) || !zeta.re.is_finite() || !zeta.im.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Cauchy transform needs Im zeta > 0, got {zeta}"
            )));
        }
        let accept = 1e-9 * zeta.norm().max(1.0);
        let start = zeta - self.gamma_k;
        let (z, residual) = self.newton(zeta, start)?;
        if residual <= accept {
            return Ok(z);
        }
        // Continuation from high above the real axis, where H_k(z) ~ z + gamma_k.
        let mut lift = 4.0 * (1.0 + zeta.norm());
        let mut z = start + Complex64::new(0.0, lift);
        let mut residual = f64::INFINITY;
        while lift > 0.0 {
            lift = if lift < 1e-3 * zeta.im { 0.0 } else { 0.5 * lift };
            let target = zeta + Complex64::new(0.0, lift);
            (z, residual) = self.newton(target, z)?;
        }
        if residual <= accept {
            Ok(z)
        } else {
            Err(Error::OracleNonConvergence {
                re: zeta.re,
                im: zeta.im,
                residual,
            })
        }
    }

    /// `H_k'(z)` to the accuracy a Newton direction needs. Near the axis the
    /// derivative integral cancels heavily, so full accuracy is out of reach.
    fn newton_slope(&self, z: Complex64) -> Result<Complex64> {
        let spec = QuadSpec {
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            ..self.quad.clone()
        };
        Ok(1.0 - quad::cauchy_derivative(&self.k, z, &spec)?)
    }

    /// Damped Newton iteration for `H_k(z) = target`; returns the best
    /// iterate and its residual. A step may lower `Im z` by at most a factor
    /// 10, which keeps the iterates off the real axis where the integrals
    /// degenerate. Quadrature failures end the iteration early.
    fn newton(&self, target: Complex64, start: Complex64) -> Result<(Complex64, f64)> {
        let polish = 1e-13 * target.norm().max(1.0);
        let mut z = start;
        if z.im <= 0.0 {
            z.im = target.im;
        }
        let mut residual = match self.h_transform(z) {
            Ok(h) => (h - target).norm(),
            Err(e) if e.is_numerical() => return Ok((z, f64::INFINITY)),
            Err(e) => return Err(e),
        };
        for _ in 0..NEWTON_STEPS {
            if residual <= polish {
                break;
            }
            let slope = match self.newton_slope(z) {
                Ok(d) => d,
                Err(e) if e.is_numerical() => break,
                Err(e) => return Err(e),
            };
            let f = self.h_transform(z)? - target;
            let step = f / slope;
            let mut scale = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand = z - step * scale;
                if cand.im > 0.1 * z.im {
                    let r = match self.h_transform(cand) {
                        Ok(h) => (h - target).norm(),
                        Err(e) if e.is_numerical() => f64::INFINITY,
                        Err(e) => return Err(e),
                    };
                    if r < residual {
                        z = cand;
                        residual = r;
                        improved = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Ok((z, residual))
    }
}

fn cumulant_spec(w: Complex64) -> QuadSpec {
    QuadSpec {
        abs_tol: 1e-13 * w.norm().min(1.0),
        rel_tol: 1e-11,
        ..QuadSpec::default()
    }
}

/// Free cumulant transform
/// `C(w) = eta w + a w^2 + int (1/(1 - tw) - 1 - tw 1_{[-1,1]}(t)) k(t)/|t| dt`
/// for `Im w < 0`.
///
/// The integral term equals `w (gamma_k + int |t| k(t) / (1/w - t) dt) - eta_0 w`
/// with `eta_0 = int_{-1}^{1} sign(t) k(t) dt`, so for the triplet
/// `(0, k, eta_0)` the transform is `w int sign(t) k(t) / (1 - wt) dt`.
pub fn free_cumulant_transform(triplet: &FreeTriplet, w: Complex64) -> Result<Complex64> {
    if !(w.im < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "free cumulant transform needs Im w < 0, got {w}"
        )));
    }
    let k = &triplet.k;
    let gamma = levy::gamma_k(k)?;
    let eta0 = levy::lemma_eta(k)?;
    let integral = quad::cauchy_integral(k, w.inv(), &cumulant_spec(w))?;
    Ok((triplet.eta - eta0) * w + triplet.a * w * w + w * (gamma + integral))
}

/// Voiculescu transform `phi(z) = z C(1/z)` for `Im z > 0`.
pub fn voiculescu_transform(triplet: &FreeTriplet, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Voiculescu transform needs Im z > 0, got {z}"
        )));
    }
    Ok(z * free_cumulant_transform(triplet, z.inv())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(k: LevyDensity) -> TransformContext {
        TransformContext::with_defaults(k).unwrap()
    }

    fn symexp() -> LevyDensity {
        LevyDensity::symexp(1.0).unwrap()
    }

    #[test]
    fn imaginary_part_identity() {
        let c = ctx(LevyDensity::half_exp(1.0, 1e-8).unwrap());
        for &(x, y) in &[(0.0, 1.0), (1.3, 0.2), (-2.0, 0.05), (0.4, 7.0)] {
            let z = Complex64::new(x, y);
            let h = c.h_transform(z).unwrap();
            let f = c.f_transform(x, y).unwrap();
            assert!((h.im - y * (1.0 - f)).abs() < 1e-9, "{z}");
        }
    }

    #[test]
    fn far_field_and_poisson_value() {
        let c = ctx(symexp());
        // frozen from an independent high-precision quadrature
        let f = c.f_transform(0.0, 10.0).unwrap();
        assert!((f - 0.018_977_078_032_709_6).abs() < 1e-12, "{f}");
        let h = c.h_transform(Complex64::new(0.0, 10.0)).unwrap();
        assert!((h.im - 10.0 * (1.0 - 0.018_977_078_032_709_6)).abs() < 1e-9);
        let z = Complex64::new(0.0, 1e4);
        let h = c.h_transform(z).unwrap();
        assert!((h - z - c.gamma_k()).norm() < 1e-3);
    }

    #[test]
    fn even_density_symmetry() {
        let c = ctx(symexp());
        for &(x, y) in &[(0.3, 0.5), (2.0, 0.01), (7.0, 3.0)] {
            let a = c.f_transform(x, y).unwrap();
            let b = c.f_transform(-x, y).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        assert!(c.f_transform(0.0, 1e-3).unwrap() > 1.0);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let c = ctx(LevyDensity::gauss_scaled(1.0, 4.0).unwrap());
        let z = Complex64::new(0.3, 0.8);
        let h = 1e-5;
        let fd = (c.h_transform(z + h).unwrap() - c.h_transform(z - h).unwrap()) / (2.0 * h);
        assert!((fd - c.h_derivative(z).unwrap()).norm() < 1e-7);
        let fd_y = (c.f_transform(0.3, 0.8 + h).unwrap() - c.f_transform(0.3, 0.8 - h).unwrap()) / (2.0 * h);
        assert!((fd_y - c.f_dy(0.3, 0.8).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn oracle_inverts_h() {
        let c = ctx(symexp());
        let z = Complex64::new(0.0, 5.0);
        let g = c.cauchy_oracle(c.h_transform(z).unwrap()).unwrap();
        assert!((g - Complex64::new(0.0, -0.2)).norm() < 1e-9);
        let zeta = Complex64::new(0.0, 1e6);
        let g = c.cauchy_oracle(zeta).unwrap();
        assert!((g * zeta - 1.0).norm() < 1e-6);
        assert!(c.cauchy_oracle(Complex64::new(1.0, 0.0)).is_err());
        // close to the boundary: z just above the curve
        let z = Complex64::new(0.7, 0.9);
        assert!(c.in_upper_domain(z).unwrap());
        let g = c.cauchy_oracle(c.h_transform(z).unwrap()).unwrap();
        assert!((z * g - 1.0).norm() < 1e-8);
        assert!(g.im < 0.0);
    }

    #[test]
    fn cumulant_transform_small_w() {
        let t = FreeTriplet::lemma(symexp()).unwrap();
        let w = Complex64::new(0.0, -1e-3);
        let c = free_cumulant_transform(&t, w).unwrap();
        // C(w) = kappa_2 w^2 + kappa_4 w^4 + ... with kappa_2 = 2, kappa_4 = 12
        let series = 2.0 * w * w + 12.0 * w.powi(4);
        assert!((c - series).norm() < 1e-14, "{c} vs {series}");
    }

    #[test]
    fn semicircle_cumulant_transform() {
        let t = FreeTriplet::new(1.0, LevyDensity::Zero, 0.0).unwrap();
        let w = Complex64::new(0.3, -0.4);
        let c = free_cumulant_transform(&t, w).unwrap();
        assert!((c - w * w).norm() < 1e-15);
    }

    #[test]
    fn cumulant_transform_is_linear_in_k() {
        let k1 = symexp();
        let k2 = LevyDensity::half_exp(1.0, 1e-8).unwrap();
        let sum = LevyDensity::sum(vec![(1.0, k1.clone()), (1.0, k2.clone())]).unwrap();
        let w = Complex64::new(-0.1, -0.2);
        let c = |k: LevyDensity| free_cumulant_transform(&FreeTriplet::lemma(k).unwrap(), w).unwrap();
        assert!((c(sum) - c(k1) - c(k2)).norm() < 1e-9);
    }

    #[test]
    fn voiculescu_is_h_minus_z() {
        let k = LevyDensity::half_exp(1.0, 1e-8).unwrap();
        let c = ctx(k.clone());
        let t = FreeTriplet::lemma(k).unwrap();
        for z in [Complex64::new(0.5, 0.5), Complex64::new(-3.0, 2.0)] {
            let phi = voiculescu_transform(&t, z).unwrap();
            let h = c.h_transform(z).unwrap();
            assert!((phi - (h - z)).norm() < 1e-9);
            assert!(phi.im <= 0.0);
        }
    }
}
