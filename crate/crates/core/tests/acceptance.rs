//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any of them fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use freesd::cumulants::{cumulants_from_k, moments_from_cumulants};
use freesd::density::{self, DensityCurve, GridSpec};
use freesd::levy::{FreeTriplet, LevyDensity};
use freesd::mollify::{self, sigma_distance, DEFAULT_TEST_FREQUENCIES};
use freesd::vcurve::{self, DEFAULT_SOLVE_TOL};
use freesd::{Result, TransformContext};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GH_TOL: f64 = 1e-8;
const GH_SAMPLES: usize = 200;
const TWO_PATH_TOL: f64 = 1e-3;
const P_AT_50_MIN: f64 = 40.0;
const SEMICIRCLE_TOL: f64 = 2e-2;
const CAUCHY_TOL: f64 = 5e-2;
const M2_TOL: f64 = 1e-2;
const M4_TOL: f64 = 1e-1;
const DILATION_TOL: f64 = 1e-9;
const MASS_BAND: (f64, f64) = (0.99, 1.01);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn ctx(k: LevyDensity) -> Result<TransformContext> {
    TransformContext::with_defaults(k)
}

fn symexp() -> LevyDensity {
    LevyDensity::symexp(1.0).unwrap()
}

fn half_exp() -> LevyDensity {
    LevyDensity::half_exp(1.0, 1e-8).unwrap()
}

fn gauss_scaled() -> LevyDensity {
    LevyDensity::gauss_scaled(1.0, 1.0).unwrap()
}

fn builtins() -> Vec<(&'static str, LevyDensity)> {
    vec![
        ("symexp", symexp()),
        ("half-exp", half_exp()),
        ("gauss-scaled", gauss_scaled()),
    ]
}

fn mollified_cauchy(n: u32) -> LevyDensity {
    let base = LevyDensity::cauchy(1.0).unwrap();
    mollify::mollify_k(&base, 0.0, n, mollify::default_floor(0.0)).unwrap()
}

fn gh_identity() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (name, k) in [("symexp", symexp()), ("half-exp", half_exp())] {
        let c = ctx(k)?;
        let mut family_worst: f64 = 0.0;
        for _ in 0..GH_SAMPLES {
            let x: f64 = rng.gen_range(-4.0..4.0);
            let lift = 10f64.powf(rng.gen_range(-3.0..1.0));
            let v = vcurve::solve_v(&c, x, DEFAULT_SOLVE_TOL)?;
            let z = Complex64::new(x, v + lift);
            let g = c.cauchy_oracle(c.h_transform(z)?)?;
            family_worst = family_worst.max((z * g - 1.0).norm());
        }
        detail.push(format!("{name}={family_worst:.2e}"));
        worst = worst.max(family_worst);
    }
    Ok(Outcome::new(
        worst <= GH_TOL,
        format!("max |zG(H(z))-1| {} (tol {GH_TOL:e})", detail.join(" ")),
    ))
}

fn two_path(masses: &mut Vec<(String, f64)>) -> Result<Outcome> {
    let c = ctx(symexp())?;
    let curve = density::build_density(&c, &GridSpec::default())?;
    masses.push(("symexp".into(), curve.mass));
    let report = density::crossvalidate_with(&c, &curve, &[1e-3, 1e-4], TWO_PATH_TOL)?;
    let entry = report.get("crossvalidate").expect("crossvalidate entry");
    let no_failures = entry
        .detail
        .as_deref()
        .is_some_and(|d| d.ends_with("oracle_failures=0"));
    Ok(Outcome::new(
        entry.pass && no_failures,
        format!(
            "sup deviation {:.2e} over {} points (tol {TWO_PATH_TOL:e}), {}",
            entry.residual,
            curve.points.len(),
            entry.detail.clone().unwrap_or_default()
        ),
    ))
}

fn homeomorphism() -> Result<Outcome> {
    let mut families = builtins();
    families.push(("mollified-symexp-n16", mollify::mollify_k(&symexp(), 0.0, 16, 1e-8)?));
    families.push(("mollified-cauchy-n32", mollified_cauchy(32)));
    families.push(("semicircle-n16", mollify::mollify_k(&LevyDensity::Zero, 1.0, 16, 0.0)?));
    let mut pass = true;
    let mut bad = Vec::new();
    for (name, k) in families {
        let c = ctx(k)?;
        let (lo, hi) = vcurve::auto_domain(&c, 1e-3)?;
        let pts = vcurve::curve_grid(&c, lo, hi, 512, false)?;
        let increasing = pts.len() == 512 && pts.windows(2).all(|w| w[1].xi > w[0].xi);
        if !increasing {
            pass = false;
            bad.push(name);
        }
    }
    let c = ctx(symexp())?;
    let p_lo = vcurve::p_map(&c, -50.0)?;
    let p_hi = vcurve::p_map(&c, 50.0)?;
    pass &= p_lo <= -P_AT_50_MIN && p_hi >= P_AT_50_MIN;
    Ok(Outcome::new(
        pass,
        format!("non-increasing families {bad:?}; symexp P(-50)={p_lo:.4} P(50)={p_hi:.4}"),
    ))
}

fn unimodality(masses: &mut Vec<(String, f64)>) -> Result<Outcome> {
    let mut families = builtins();
    for (name, n) in [("mollified-cauchy-n32", 32), ("mollified-cauchy-n64", 64), ("mollified-cauchy-n128", 128)] {
        families.push((name, mollified_cauchy(n)));
    }
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, k) in families {
        let c = ctx(k)?;
        let curve = density::build_density(&c, &GridSpec::default())?;
        masses.push((name.into(), curve.mass));
        let report = density::check_unimodal(&curve, density::default_flat_tol(&curve));
        if !report.all_pass() {
            pass = false;
            detail.push(format!("{name}: {}", report.failures().count()));
        }
    }
    Ok(Outcome::new(
        pass,
        if detail.is_empty() {
            "rise/fall and 5 level crossings pass for all 6 families".to_string()
        } else {
            format!("failing checks {}", detail.join(", "))
        },
    ))
}

fn angular() -> Result<Outcome> {
    let mut pass = true;
    let mut worst_cos: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, k) in builtins() {
        let c = ctx(k)?;
        for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let m = vcurve::angular_minimum(&c, r)?;
            worst_cos = worst_cos.max(m.cos_theta.abs());
            if m.local_minima != 1 || m.cos_theta.abs() >= FRAC_1_SQRT_2 {
                pass = false;
                bad.push(format!("{name}@r={r}: minima={} cos={:.4}", m.local_minima, m.cos_theta));
            }
        }
    }
    Ok(Outcome::new(
        pass,
        format!("max |cos theta_r| {worst_cos:.4} (bound {FRAC_1_SQRT_2:.4}); failures {bad:?}"),
    ))
}

fn semicircle(masses: &mut Vec<(String, f64)>) -> Result<Outcome> {
    let k = mollify::mollify_k(&LevyDensity::Zero, 1.0, 64, mollify::default_floor(1.0))?;
    let c = ctx(k)?;
    let curve = density::build_density(&c, &GridSpec::default())?;
    masses.push(("semicircle-n64".into(), curve.mass));
    let (_, f0) = density::density_at(&c, 0.0)?;
    let target = |xi: f64| (4.0 - xi * xi).max(0.0).sqrt() / (2.0 * PI);
    let sup = sup_error(&curve, 1.8, 0.0, target);
    let at_zero = (f0 - 1.0 / PI).abs();
    Ok(Outcome::new(
        at_zero <= SEMICIRCLE_TOL && sup <= SEMICIRCLE_TOL,
        format!("|f(0)-1/pi|={at_zero:.2e} sup|f-semicircle| on |xi|<=1.8 {sup:.2e} (tol {SEMICIRCLE_TOL:e})"),
    ))
}

fn sup_error(curve: &DensityCurve, half_width: f64, shift: f64, target: impl Fn(f64) -> f64) -> f64 {
    curve
        .points
        .iter()
        .map(|p| (p.xi - shift, p.f))
        .filter(|(xi, _)| xi.abs() <= half_width)
        .map(|(xi, f)| (f - target(xi)).abs())
        .fold(0.0, f64::max)
}

fn cauchy(masses: &mut Vec<(String, f64)>) -> Result<Outcome> {
    let c = ctx(mollified_cauchy(128))?;
    let curve = density::build_density(&c, &GridSpec::default())?;
    masses.push(("mollified-cauchy-n128".into(), curve.mass));
    let median = curve.median();
    let sup = sup_error(&curve, 3.0, median, |xi| 1.0 / (PI * (1.0 + xi * xi)));
    Ok(Outcome::new(
        sup <= CAUCHY_TOL,
        format!("median {median:.3e}; sup|f-Cauchy| on |xi|<=3 {sup:.2e} (tol {CAUCHY_TOL:e})"),
    ))
}

fn moments(masses: &mut Vec<(String, f64)>) -> Result<Outcome> {
    let c = ctx(symexp())?;
    let curve = density::build_density(&c, &GridSpec::auto(1e-8))?;
    masses.push(("symexp-wide".into(), curve.mass));
    let from_density = density::moments_from_density(&curve, 4)?;
    let kappa = cumulants_from_k(&FreeTriplet::lemma(symexp())?, 4)?.kappa;
    let from_recursion = moments_from_cumulants(&kappa);
    let ok = |m: &[f64]| (m[1] - 2.0).abs() <= M2_TOL && (m[3] - 20.0).abs() <= M4_TOL;
    Ok(Outcome::new(
        ok(&from_density) && ok(&from_recursion),
        format!(
            "density m2={:.5} m4={:.5}; recursion m2={:.5} m4={:.5} (tol {M2_TOL:e}, {M4_TOL:e})",
            from_density[1], from_density[3], from_recursion[1], from_recursion[3]
        ),
    ))
}

fn dilation() -> Result<Outcome> {
    let mut worst_v: f64 = 0.0;
    let mut worst_kappa: f64 = 0.0;
    for (_, k) in builtins() {
        let base = ctx(k.clone())?;
        let kappa = cumulants_from_k(&FreeTriplet::lemma(k.clone())?, 6)?.kappa;
        for c in [0.25, 0.5, 0.9] {
            let kc = k.dilate(c)?;
            let dilated = ctx(kc.clone())?;
            for x in [-2.0, -0.5, 0.0, 1.0, 3.0] {
                let v = vcurve::solve_v(&base, x, 1e-14)?;
                let vc = vcurve::solve_v(&dilated, c * x, 1e-14)?;
                worst_v = worst_v.max((vc - c * v).abs());
            }
            let kappa_c = cumulants_from_k(&FreeTriplet::lemma(kc)?, 6)?.kappa;
            for (n, (kn, kcn)) in kappa.iter().zip(&kappa_c).enumerate() {
                let expected = c.powi(n as i32 + 1) * kn;
                worst_kappa = worst_kappa.max((kcn - expected).abs() / expected.abs().max(1.0));
            }
        }
    }
    Ok(Outcome::new(
        worst_v <= DILATION_TOL && worst_kappa <= DILATION_TOL,
        format!("max |v_c(cx)-c v(x)| {worst_v:.2e}; max kappa scaling error {worst_kappa:.2e} (tol {DILATION_TOL:e})"),
    ))
}

fn weak_convergence(masses: &mut Vec<(String, f64)>) -> Result<Outcome> {
    let base = symexp();
    let mut distances = Vec::new();
    for n in [8u32, 16, 32, 64] {
        let k = mollify::mollify_k(&base, 0.0, n, 1e-8)?;
        distances.push(sigma_distance(&k, &base, 0.0, &DEFAULT_TEST_FREQUENCIES)?);
        let curve = density::build_density(&ctx(k)?, &GridSpec::default())?;
        masses.push((format!("mollified-symexp-n{n}"), curve.mass));
    }
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let in_band = masses.iter().all(|(_, m)| (MASS_BAND.0..=MASS_BAND.1).contains(m));
    let (lo, hi) = masses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, m)| (lo.min(*m), hi.max(*m)));
    Ok(Outcome::new(
        decreasing && in_band,
        format!(
            "sigma distances {:?}; {} densities with mass in [{lo:.5}, {hi:.5}]",
            distances.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            masses.len()
        ),
    ))
}

fn main() -> ExitCode {
    let mut masses = Vec::new();
    let mut failed = 0;
    let mut run = |n: usize, name: &str, outcome: &mut dyn FnMut() -> Result<Outcome>| {
        let start = Instant::now();
        let outcome = outcome().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {name}: {verdict} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    };
    run(1, "G-H identity", &mut gh_identity);
    run(2, "two-path density", &mut || two_path(&mut masses));
    run(3, "boundary homeomorphism", &mut homeomorphism);
    run(4, "unimodality", &mut || unimodality(&mut masses));
    run(5, "angular profile", &mut angular);
    run(6, "semicircle limit", &mut || semicircle(&mut masses));
    run(7, "Cauchy fixed point", &mut || cauchy(&mut masses));
    run(8, "cumulant/moment consistency", &mut || moments(&mut masses));
    run(9, "dilation covariance", &mut dilation);
    run(10, "weak convergence", &mut || weak_convergence(&mut masses));
    if failed == 0 {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}
