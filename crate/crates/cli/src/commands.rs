//! Subcommand implementations. Each returns a short summary for stdout.

use std::fmt;
use std::path::{Path, PathBuf};

use chainbath::{
    build_gle, chain_modes_free, chain_spectrum, exact_from_chain, free_term, gle_residual,
    integrate_io, kernel_quadrature, map_state, solve_iep, solve_volterra,
    transform_from_polynomials, ChainBath, ChainPhase, ChainTransform, DynamicsError, IepError,
    IntegratorConfig, IntegratorMethod, Kernel, KernelEngine, KernelSeries, Quadrature, TimeGrid,
    Trajectory,
};
use serde::Serialize;

use crate::config::{Resolved, Solver};
use crate::error::CliError;
use crate::output::{ensure_dir, file_names, write_csv, write_text, write_toml, ChainFile, Meta};

/// The bath either maps to a chain or does not couple to the tracer at all.
enum Model {
    Chain {
        chain: ChainBath,
        transform: ChainTransform,
        phase: ChainPhase,
    },
    Decoupled,
}

fn build_model(r: &Resolved) -> Result<Model, CliError> {
    match solve_iep(&r.bath) {
        Ok((chain, transform)) => {
            let modes = map_state(&transform, &r.phase)?;
            Ok(Model::Chain {
                chain,
                transform,
                phase: ChainPhase {
                    x0: r.phase.x0,
                    v0: r.phase.v0,
                    modes,
                },
            })
        }
        Err(IepError::ZeroCoupling) => Ok(Model::Decoupled),
        Err(e) => Err(e.into()),
    }
}

fn method_name(m: IntegratorMethod) -> &'static str {
    match m {
        IntegratorMethod::Rk4 => "rk4",
        IntegratorMethod::VelocityVerlet => "velocity-verlet",
    }
}

fn quadrature_name(q: Quadrature) -> &'static str {
    match q {
        Quadrature::Trapezoid => "trapezoid",
        Quadrature::EndCorrected => "end-corrected",
    }
}

fn write_meta(
    dir: &Path,
    r: &Resolved,
    command: &str,
    solver: Option<Solver>,
    files: &[PathBuf],
) -> Result<(), CliError> {
    let meta = Meta {
        command: command.to_string(),
        solver: solver.map(|s| s.name().to_string()),
        seed: r.seed,
        n_modes: r.bath.len(),
        dt: r.integrator.dt,
        t_end: r.integrator.t_end,
        method: method_name(r.integrator.method).to_string(),
        quadrature: quadrature_name(r.quadrature).to_string(),
        files: file_names(files),
    };
    write_toml(&dir.join("meta.toml"), &meta)
}

pub fn transform(r: &Resolved, dir: &Path) -> Result<String, CliError> {
    let (chain, transform) = solve_iep(&r.bath)?;
    ensure_dir(dir)?;
    let path = dir.join("chain.toml");
    write_toml(&path, &ChainFile::new(&chain, &transform))?;
    write_meta(dir, r, "transform", None, std::slice::from_ref(&path))?;
    Ok(format!(
        "chain of length {} written to {} (D = {:e}, orthogonality defect {:.1e})",
        chain.len(),
        path.display(),
        chain.system_coupling,
        transform.orthogonality_defect()
    ))
}

pub fn simulate(r: &Resolved, dir: &Path) -> Result<String, CliError> {
    let grid = r.integrator.grid()?;
    let (x, forcing) = match build_model(r)? {
        Model::Decoupled => {
            let f0 = grid.sample(|t| free_term(r.sys.omega, r.phase.x0, r.phase.v0, t));
            let x = match r.solver {
                Solver::OdeIo => integrate_io(&r.bath, &r.sys, &r.phase, &r.integrator)?.x,
                _ => f0.clone(),
            };
            (x, f0)
        }
        Model::Chain { chain, phase, .. } => {
            let exact = exact_from_chain(&r.sys, &chain, &phase, &r.integrator, r.quadrature)?;
            let x = match r.solver {
                Solver::Exact => match (&exact.params, exact.x) {
                    (Ok(_), Some(x)) => x,
                    (Err(e), _) => return Err(e.clone().into()),
                    (Ok(_), None) => unreachable!("resolvent parameters without a solution"),
                },
                Solver::Volterra => solve_volterra(&exact.forcing, &r.sys, &chain, r.quadrature)?,
                Solver::OdeIo => integrate_io(&r.bath, &r.sys, &r.phase, &r.integrator)?.x,
                Solver::OdeChain => exact.ode.x,
            };
            (x, exact.forcing)
        }
    };
    ensure_dir(dir)?;
    let x_path = dir.join("x.csv");
    let f_path = dir.join("forcing.csv");
    write_csv(&x_path, &grid, &[("x", &x.values)])?;
    write_csv(&f_path, &grid, &[("F_N", &forcing.values)])?;
    write_meta(
        dir,
        r,
        "simulate",
        Some(r.solver),
        &[x_path.clone(), f_path],
    )?;
    Ok(format!(
        "{} solver: {} samples written to {}",
        r.solver.name(),
        x.len(),
        x_path.display()
    ))
}

#[derive(Debug, Serialize)]
struct KernelLevel {
    level: usize,
    frequency: f64,
    closed_form: bool,
    /// `[amplitude, frequency]` pairs of the sine sum, when closed form.
    terms: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
struct KernelFile {
    levels: Vec<KernelLevel>,
}

pub fn kernels(r: &Resolved, dir: &Path) -> Result<String, CliError> {
    let grid = r.integrator.grid()?;
    let chain = match build_model(r)? {
        Model::Chain { chain, .. } => chain,
        Model::Decoupled => ChainBath {
            omega_sq: Vec::new(),
            couplings: Vec::new(),
            system_coupling: 0.0,
        },
    };
    let engine = KernelEngine::new(&r.sys, &chain, grid, r.quadrature)?;
    let names: Vec<String> = (0..=engine.ladder.depth())
        .map(|i| format!("K{i}"))
        .collect();
    let columns: Vec<(&str, &[f64])> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), engine.ladder.samples(i).values.as_slice()))
        .collect();
    let levels = engine
        .ladder
        .kernels
        .iter()
        .enumerate()
        .map(|(i, k)| KernelLevel {
            level: i,
            frequency: engine.coefficients.frequencies[i],
            closed_form: k.is_closed_form(),
            terms: match k {
                Kernel::Series(s) => s.terms.iter().map(|t| [t.amplitude, t.frequency]).collect(),
                Kernel::Sampled { .. } => Vec::new(),
            },
        })
        .collect::<Vec<_>>();
    let closed = levels.iter().filter(|l| l.closed_form).count();
    ensure_dir(dir)?;
    let csv_path = dir.join("kernels.csv");
    let toml_path = dir.join("kernels.toml");
    write_csv(&csv_path, &grid, &columns)?;
    write_toml(&toml_path, &KernelFile { levels })?;
    write_meta(dir, r, "kernels", None, &[csv_path.clone(), toml_path])?;
    Ok(format!(
        "{} kernels ({} in closed form) written to {}",
        names.len(),
        closed,
        csv_path.display()
    ))
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn relative_residual(x: &Trajectory, residual: &Trajectory) -> f64 {
    let scale = max_abs(&chainbath::quadrature::second_derivative(&x.values, x.dt));
    residual.max_abs() / scale.max(f64::MIN_POSITIVE)
}

pub fn gle_check(r: &Resolved, dir: &Path) -> Result<String, CliError> {
    let io = integrate_io(&r.bath, &r.sys, &r.phase, &r.integrator)?;
    let grid = io.x.grid();
    let gle = build_gle(&r.bath, &r.sys, &r.phase, &grid)?;
    let r_io = gle_residual(&io.x, &gle).map_err(chainbath::KernelError::from)?;
    let mut summary = format!(
        "io: max|r|/max|ẍ| = {:.2e}",
        relative_residual(&io.x, &r_io)
    );
    let r_exact = match build_model(r)? {
        Model::Chain { chain, phase, .. } => {
            let exact = exact_from_chain(&r.sys, &chain, &phase, &r.integrator, r.quadrature)?;
            match exact.x {
                Some(x) => {
                    let res = gle_residual(&x, &gle).map_err(chainbath::KernelError::from)?;
                    summary.push_str(&format!(
                        ", exact: max|r|/max|ẍ| = {:.2e}",
                        relative_residual(&x, &res)
                    ));
                    Some(res)
                }
                None => {
                    summary.push_str(", exact solution unavailable (non-real resolvent)");
                    None
                }
            }
        }
        Model::Decoupled => None,
    };
    ensure_dir(dir)?;
    let path = dir.join("gle_residual.csv");
    let mut columns: Vec<(&str, &[f64])> = vec![("r_io", &r_io.values)];
    if let Some(res) = &r_exact {
        columns.push(("r_exact", &res.values));
    }
    write_csv(&path, &grid, &columns)?;
    write_meta(dir, r, "gle-check", None, &[path])?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn judged(name: &'static str, ok: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn skipped(name: &'static str, reason: impl Into<String>) -> CheckResult {
    CheckResult {
        name,
        status: Status::Skip,
        detail: reason.into(),
    }
}

fn failed(name: &'static str, err: impl fmt::Display) -> CheckResult {
    CheckResult {
        name,
        status: Status::Fail,
        detail: err.to_string(),
    }
}

/// Reference step of the GLE tolerance; the residual scales with `dt²`.
const GLE_REFERENCE_DT: f64 = 1e-4;

fn kernel_check(r: &Resolved, chain: &ChainBath) -> CheckResult {
    const NAME: &str = "kernel-closed-form";
    let grid = match TimeGrid::covering(1e-3, 10.0) {
        Ok(g) => g,
        Err(e) => return failed(NAME, e),
    };
    let mut freqs = vec![r.sys.omega];
    freqs.extend(chain.omega());
    let mut current = KernelSeries::base(r.sys.omega);
    let mut worst = 0.0_f64;
    let mut checked = 0;
    let mut stopped = String::new();
    for (i, w) in freqs.iter().enumerate().skip(1).take(4) {
        match chainbath::next_kernel(&current, *w) {
            Ok(next) => {
                let sampled = kernel_quadrature(&current.sample(&grid), *w, r.quadrature);
                worst = worst.max(sampled.max_abs_diff(&next.sample(&grid)));
                current = next;
                checked = i;
            }
            Err(e) if checked == 0 => return skipped(NAME, format!("no closed form: {e}")),
            Err(e) => {
                stopped = format!("; level {i} has no closed form ({e})");
                break;
            }
        }
    }
    if checked == 0 {
        return skipped(NAME, "system frequency must be positive for kernels");
    }
    judged(
        NAME,
        worst <= 1e-5,
        format!("levels 1..={checked}: max |closed - quadrature| {worst:.2e} (tol 1e-5){stopped}"),
    )
}

fn chain_checks(
    r: &Resolved,
    chain: &ChainBath,
    transform: &ChainTransform,
    phase: &ChainPhase,
    oracle: &IntegratorConfig,
) -> Vec<CheckResult> {
    let mut out = Vec::new();

    let mut spectrum = chain_spectrum(chain);
    spectrum.sort_by(|a, b| a.total_cmp(b));
    let eig = spectrum
        .iter()
        .zip(r.bath.omega_sq())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs() / b));
    let ortho = transform.orthogonality_defect();
    out.push(judged(
        "iep-roundtrip",
        eig <= 1e-10 && ortho <= 1e-10,
        format!("eigenvalue rel err {eig:.2e}, |OOᵀ-I| {ortho:.2e} (tol 1e-10)"),
    ));

    out.push(match transform_from_polynomials(&r.bath, chain) {
        Ok(poly) => {
            let n = chain.len();
            let mut worst = 0.0_f64;
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| poly.o[(j, k)] * transform.o[(j, k)]).sum();
                for k in 0..n {
                    worst = worst.max((transform.o[(j, k)] - dot.signum() * poly.o[(j, k)]).abs());
                }
            }
            judged(
                "polynomial-oracle",
                worst <= 1e-8,
                format!("max entry diff {worst:.2e} (tol 1e-8)"),
            )
        }
        Err(IepError::Dimension { expected, got }) => skipped(
            "polynomial-oracle",
            format!("chain length {got} exceeds the oracle limit {expected}"),
        ),
        Err(e) => failed("polynomial-oracle", e),
    });

    out.push(kernel_check(r, chain));

    let exact = match exact_from_chain(&r.sys, chain, phase, oracle, r.quadrature) {
        Ok(e) => e,
        Err(e) => {
            for name in ["exact-vs-ode", "volterra", "model-equivalence"] {
                out.push(failed(name, &e));
            }
            return out;
        }
    };
    match (&exact.params, &exact.x) {
        (Ok(_), Some(x)) => {
            let err = x.max_abs_diff(&exact.ode.x);
            out.push(judged(
                "exact-vs-ode",
                err <= 1e-6,
                format!("max |x_exact - x_chain| {err:.2e} (tol 1e-6)"),
            ));
        }
        (Err(e), _) => out.push(skipped(
            "exact-vs-ode",
            format!("exact solution unavailable: {e}"),
        )),
        (Ok(_), None) => out.push(failed("exact-vs-ode", "resolvent solution missing")),
    }
    match solve_volterra(&exact.forcing, &r.sys, chain, r.quadrature) {
        Ok(marched) => out.push(match &exact.x {
            Some(x) => {
                let err = marched.max_abs_diff(x);
                judged(
                    "volterra",
                    err <= 1e-8,
                    format!("max |x_volterra - x_exact| {err:.2e} (tol 1e-8)"),
                )
            }
            None => {
                let err = marched.max_abs_diff(&exact.ode.x);
                judged(
                    "volterra",
                    err <= 1e-6,
                    format!("max |x_volterra - x_chain| {err:.2e} (tol 1e-6)"),
                )
            }
        }),
        Err(e) => out.push(failed("volterra", e)),
    }
    out.push(match integrate_io(&r.bath, &r.sys, &r.phase, oracle) {
        Ok(io) => {
            let err = io.x.max_abs_diff(&exact.ode.x);
            judged(
                "model-equivalence",
                err <= 1e-8,
                format!("max |x_io - x_chain| {err:.2e} (tol 1e-8)"),
            )
        }
        Err(e) => failed("model-equivalence", e),
    });
    out
}

fn gle_check_result(
    r: &Resolved,
    oracle: &IntegratorConfig,
    exact_x: Option<&Trajectory>,
) -> CheckResult {
    const NAME: &str = "gle-residual";
    let io = match integrate_io(&r.bath, &r.sys, &r.phase, oracle) {
        Ok(io) => io,
        Err(e) => return failed(NAME, e),
    };
    let gle = match build_gle(&r.bath, &r.sys, &r.phase, &io.x.grid()) {
        Ok(g) => g,
        Err(e) => return failed(NAME, e),
    };
    let tol = 1e-5 * (oracle.dt / GLE_REFERENCE_DT).powi(2).max(1.0);
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for (label, x) in std::iter::once(("io", &io.x)).chain(exact_x.map(|x| ("exact", x))) {
        match gle_residual(x, &gle) {
            Ok(res) => {
                let rel = relative_residual(x, &res);
                worst = worst.max(rel);
                parts.push(format!("{label} {rel:.2e}"));
            }
            Err(e) => return failed(NAME, e),
        }
    }
    judged(
        NAME,
        worst <= tol,
        format!("max|r|/max|ẍ|: {} (tol {tol:.1e})", parts.join(", ")),
    )
}

fn free_evolution_check(r: &Resolved, oracle: &IntegratorConfig) -> CheckResult {
    const NAME: &str = "free-evolution-diagnostic";
    let mut discrepancies = Vec::new();
    for lambda in [1.0, 0.5, 0.25, 0.125] {
        let bath = r.bath.with_scaled_couplings(lambda);
        let result = (|| -> Result<f64, CliError> {
            let (chain, transform) = solve_iep(&bath)?;
            let modes = map_state(&transform, &r.phase)?;
            let phase = ChainPhase {
                x0: r.phase.x0,
                v0: r.phase.v0,
                modes,
            };
            let exact = exact_from_chain(&r.sys, &chain, &phase, oracle, r.quadrature)?;
            let grid = exact.forcing.grid();
            let free = chain_modes_free(&transform, &bath, &r.phase, &grid)?;
            let engine = KernelEngine::new(&r.sys, &chain, grid, r.quadrature)?;
            let approx = engine.forcing(&exact.free_forcing, &free)?;
            Ok(approx.max_abs_diff(&exact.forcing))
        })();
        match result {
            Ok(d) => discrepancies.push(d),
            Err(e) => return failed(NAME, format!("λ = {lambda}: {e}")),
        }
    }
    let monotone = discrepancies.windows(2).all(|w| w[1] < w[0]);
    let listed: Vec<String> = discrepancies.iter().map(|d| format!("{d:.2e}")).collect();
    judged(
        NAME,
        monotone,
        format!(
            "|F_N(free) - F_N| for λ = 1, 1/2, 1/4, 1/8: {} (must decrease)",
            listed.join(", ")
        ),
    )
}

pub fn verify_checks(r: &Resolved) -> Vec<CheckResult> {
    let oracle = IntegratorConfig {
        method: IntegratorMethod::Rk4,
        ..r.integrator
    };
    let mut checks = Vec::new();
    let chain_names = [
        "iep-roundtrip",
        "polynomial-oracle",
        "kernel-closed-form",
        "exact-vs-ode",
        "volterra",
        "model-equivalence",
    ];
    let mut exact_x = None;
    let model = build_model(r);
    match &model {
        Ok(Model::Chain {
            chain,
            transform,
            phase,
        }) => {
            checks.extend(chain_checks(r, chain, transform, phase, &oracle));
            exact_x = exact_from_chain(&r.sys, chain, phase, &oracle, r.quadrature)
                .ok()
                .and_then(|e| e.x);
        }
        Ok(Model::Decoupled) => {
            for name in chain_names {
                checks.push(skipped(name, "all couplings vanish; there is no chain"));
            }
        }
        Err(CliError::Iep(IepError::InvalidBath(report))) => {
            let reason = if report.has_duplicates() {
                format!("precondition violated, duplicate frequencies: {report}")
            } else {
                format!("precondition violated: {report}")
            };
            for name in chain_names {
                checks.push(skipped(name, reason.clone()));
            }
        }
        Err(e) => {
            for name in chain_names {
                checks.push(skipped(name, e.to_string()));
            }
        }
    }
    checks.push(gle_check_result(r, &oracle, exact_x.as_ref()));
    checks.push(match &model {
        Ok(Model::Chain { .. }) => free_evolution_check(r, &oracle),
        _ => skipped("free-evolution-diagnostic", "requires a chain"),
    });
    checks
}

pub fn verify(r: &Resolved, dir: &Path) -> Result<String, CliError> {
    let checks = verify_checks(r);
    let mut report = String::new();
    for c in &checks {
        report.push_str(&c.to_string());
        report.push('\n');
    }
    let failures = checks.iter().filter(|c| c.status == Status::Fail).count();
    report.push_str(&format!(
        "summary: {} passed, {} failed, {} skipped\n",
        checks.iter().filter(|c| c.status == Status::Pass).count(),
        failures,
        checks.iter().filter(|c| c.status == Status::Skip).count()
    ));
    ensure_dir(dir)?;
    let path = dir.join("verify_report.txt");
    write_text(&path, &report)?;
    write_meta(dir, r, "verify", None, &[path])?;
    if failures > 0 {
        print!("{report}");
        return Err(CliError::VerifyFailed(failures));
    }
    Ok(report.trim_end().to_string())
}

/// Suggestion printed after errors that have an obvious remedy.
pub fn error_hint(err: &CliError) -> Option<String> {
    match err {
        CliError::Iep(IepError::Breakdown { effective_len, .. }) => Some(format!(
            "the couplings only reach a chain of length {effective_len}; drop modes with c_k = 0"
        )),
        CliError::Dynamics(DynamicsError::MultiValued { .. }) => Some(
            "the exact solver needs D² < Ω²·Ω_1²; use --solver volterra or an ODE solver"
                .to_string(),
        ),
        _ => None,
    }
}
