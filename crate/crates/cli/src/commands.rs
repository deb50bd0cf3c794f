use std::f64::consts::FRAC_1_SQRT_2;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use freesd::cumulants::{cumulants_from_k, moments_from_cumulants};
use freesd::density::{self, DensityCurve};
use freesd::levy::{validate_conditions, SampleGrid};
use freesd::mollify::{sigma_distance, DEFAULT_TEST_FREQUENCIES};
use freesd::vcurve;
use freesd::{TransformContext, ValidationReport};
use num_complex::Complex64;

use crate::config::{self, Problem, RunConfig};
use crate::{CliError, Cli, Command};

const GH_TOL: f64 = 1e-8;
const PROBE_HEIGHTS: [f64; 2] = [1e-3, 1e-4];
const DEFAULT_N_LIST: [u32; 4] = [8, 16, 32, 64];

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Density { config, out } => cmd_density(&config::load(config)?, out, stdout),
        Command::Verify { config, out } => cmd_verify(&config::load(config)?, out.as_deref(), stdout),
        Command::Cumulants { config, order, out } => {
            cmd_cumulants(&config::load(config)?, *order, out.as_deref(), stdout)
        }
        Command::Mollify { config, n_list, out } => cmd_mollify(&config::load(config)?, n_list, out, stdout),
    }
}

fn write_csv(curve: &DensityCurve, path: &Path) -> Result<(), CliError> {
    let mut file = BufWriter::new(File::create(path)?);
    curve.write_csv(&mut file)?;
    file.flush()?;
    Ok(())
}

fn build(problem: &Problem) -> Result<(TransformContext, DensityCurve), CliError> {
    let ctx = problem.context()?;
    let curve = density::build_density(&ctx, &problem.grid)?;
    Ok((ctx, curve))
}

pub fn cmd_density(cfg: &RunConfig, out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let problem = cfg.curve_problem(None)?;
    let (ctx, curve) = build(&problem)?;
    let (mode, f_max) = density::mode(&ctx, &curve)?;
    write_csv(&curve.shifted(problem.shift), out)?;
    writeln!(stdout, "mass={} mode={} fmax={}", curve.mass, mode + problem.shift, f_max)?;
    Ok(())
}

/// Largest `|z G(H(z)) - 1|` over a fixed lattice of points above the curve.
fn gh_residual(ctx: &TransformContext, curve: &DensityCurve) -> Result<f64, CliError> {
    let (x_lo, x_hi) = (curve.points[0].x, curve.points[curve.points.len() - 1].x);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let x = x_lo + (x_hi - x_lo) * (i as f64 + 0.5) / 20.0;
        let v = vcurve::solve_v(ctx, x, curve.tolerances.solve_v)?;
        for j in 0..10 {
            let lift = 10f64.powf(-3.0 + 4.0 * j as f64 / 9.0);
            let z = Complex64::new(x, v + lift);
            let g = ctx.cauchy_oracle(ctx.h_transform(z)?)?;
            worst = worst.max((z * g - 1.0).norm());
        }
    }
    Ok(worst)
}

pub fn cmd_verify(cfg: &RunConfig, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let problem = cfg.curve_problem(None)?;
    let conditions = validate_conditions(&problem.k, &SampleGrid::default());
    write!(stdout, "{conditions}")?;
    if !conditions.all_pass() {
        let failed: Vec<&str> = conditions.failures().map(|e| e.check.as_str()).collect();
        return Err(CliError::Validation(format!(
            "Levy density violates {}",
            failed.join(", ")
        )));
    }

    let (ctx, curve) = build(&problem)?;
    let mut report = ValidationReport::new();
    report.push_detail(
        "mass",
        (curve.mass - 1.0).abs() <= curve.tolerances.mass,
        (curve.mass - 1.0).abs(),
        format!("mass={}", curve.mass),
    );
    let gh = gh_residual(&ctx, &curve)?;
    report.push("gh_identity", gh <= GH_TOL, gh);
    report.extend(density::crossvalidate(&ctx, &curve, &PROBE_HEIGHTS)?);
    let flat = density::default_flat_tol(&curve);
    report.extend(density::check_unimodal(&curve, flat));
    report.extend(density::check_cdf_shape(&curve, flat));
    let angular = vcurve::angular_minimum(&ctx, 1.0)?;
    report.push_detail(
        "angular_r1",
        angular.local_minima == 1 && angular.cos_theta.abs() < FRAC_1_SQRT_2,
        angular.cos_theta.abs(),
        format!(
            "theta_r={} cos_theta_r={} local_minima={}",
            angular.theta, angular.cos_theta, angular.local_minima
        ),
    );

    write!(stdout, "{report}")?;
    if let Some(path) = out {
        fs::write(path, format!("{conditions}{report}"))?;
    }
    let failed: Vec<&str> = report.failures().map(|e| e.check.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}

pub fn cmd_cumulants(
    cfg: &RunConfig,
    order: usize,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let problem = cfg.problem(None)?;
    let list = cumulants_from_k(&problem.triplet, order)?;
    let moments = moments_from_cumulants(&list.kappa);
    writeln!(stdout, "{:>3}  {:>24}  {:>24}", "n", "kappa_n", "m_n")?;
    for (n, (kappa, m)) in list.kappa.iter().zip(&moments).enumerate() {
        writeln!(stdout, "{:>3}  {:>24.15e}  {:>24.15e}", n + 1, kappa, m)?;
    }
    if let Some(path) = out {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "n,kappa,moment")?;
        for (n, (kappa, m)) in list.kappa.iter().zip(&moments).enumerate() {
            writeln!(file, "{},{:.16e},{:.16e}", n + 1, kappa, m)?;
        }
        file.flush()?;
    }
    Ok(())
}

pub fn cmd_mollify(cfg: &RunConfig, n_list: &[u32], out_dir: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let levels: Vec<u32> = if !n_list.is_empty() {
        n_list.to_vec()
    } else if let Some(n) = cfg.mollify.as_ref().and_then(|m| m.n) {
        vec![n]
    } else {
        DEFAULT_N_LIST.to_vec()
    };
    let base = cfg.base_density()?;
    fs::create_dir_all(out_dir)?;
    let mut lines = Vec::new();
    let mut previous: Option<DensityCurve> = None;
    for n in levels {
        let problem = cfg.curve_problem(Some(n))?;
        let (_, curve) = build(&problem)?;
        let curve = curve.shifted(problem.shift);
        write_csv(&curve, &out_dir.join(format!("density_n{n}.csv")))?;
        let sigma = sigma_distance(&problem.k, &base, cfg.a, &DEFAULT_TEST_FREQUENCIES)?;
        let sup = match &previous {
            Some(prev) => format!("{}", density::sup_distance(&curve, prev, 0.0)),
            None => "nan".into(),
        };
        let line = format!("n={n} sigma_distance={sigma} sup_distance_prev={sup} mass={}", curve.mass);
        writeln!(stdout, "{line}")?;
        lines.push(line);
        previous = Some(curve);
    }
    let mut report = lines.join("\n");
    report.push('\n');
    fs::write(out_dir.join("convergence.txt"), report)?;
    Ok(())
}
