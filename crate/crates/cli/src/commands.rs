//! `run`, `validate` and `sweep`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nhstab_core::analysis::{tail_radius, SweepParams, SweepTable};
use nhstab_core::simulator::monitor_bounds;
use nhstab_core::{
    certify_exponential, certify_practical, sweep_summary, DriftModel, RunResult, Scenario, StabilityReport,
};
use rayon::prelude::*;

use crate::config::{Certification, Real, Resolved, RunConfig};
use crate::error::CliError;
use crate::plot::render_svg;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub output_dir: PathBuf,
    pub require_stable: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: RunResult,
    pub report: Option<StabilityReport>,
    pub stable: bool,
    pub files: Vec<PathBuf>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(CliError::io(path))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Certifies a trajectory; `None` when it is too short to judge.
pub fn certify(run: &RunResult, method: Certification, rho: Option<f64>) -> Option<StabilityReport> {
    let traj = &run.trajectory;
    match method {
        Certification::Practical => certify_practical(traj, rho.unwrap_or_else(|| tail_radius(traj))).ok(),
        Certification::Exponential => certify_exponential(traj).ok(),
    }
}

fn is_stable(run: &RunResult, report: Option<&StabilityReport>, method: Certification) -> bool {
    run.is_complete()
        && report.is_some_and(|r| match method {
            Certification::Practical => r.envelope_ok,
            Certification::Exponential => r.exponential_ok == Some(true),
        })
}

fn simulate(resolved: &Resolved) -> Result<RunResult, CliError> {
    Ok(resolved.scenario.run(resolved.substeps)?)
}

pub fn cmd_run(config: &RunConfig, opts: &Options, out: &mut dyn Write) -> Result<RunOutcome, CliError> {
    let resolved = config.resolve()?;
    let s = &resolved.scenario;
    let run = simulate(&resolved)?;
    let report = certify(&run, resolved.certify, resolved.rho);
    let stable = is_stable(&run, report.as_ref(), resolved.certify);

    prepare_dir(&opts.output_dir)?;
    let mut files = Vec::new();
    let traj_path = opts.output_dir.join(&config.output.trajectory);
    let mut csv = Vec::new();
    run.trajectory.write_csv(&mut csv).map_err(CliError::io(&traj_path))?;
    write_file(&traj_path, &csv)?;
    files.push(traj_path);

    let report_path = opts.output_dir.join(&config.output.report);
    let table = sweep_summary(vec![(SweepParams { epsilon: s.epsilon, gamma: s.gamma }, report.clone())]);
    write_table(&report_path, &table)?;
    files.push(report_path);

    if !config.output.svg.is_empty() {
        let svg_path = opts.output_dir.join(&config.output.svg);
        write_file(&svg_path, render_svg(&run.trajectory, &s.name).as_bytes())?;
        files.push(svg_path);
    }

    let traj = &run.trajectory;
    let _ = writeln!(
        out,
        "{}: eps={} gamma={} horizon={} recorded {} points up to t={}",
        s.name,
        s.epsilon,
        s.gamma,
        s.horizon,
        traj.times.len(),
        traj.horizon()
    );
    if let Ok(m) = monitor_bounds(&s.system.drift, &s.system.fields, traj) {
        if !s.system.drift.is_none() {
            let _ = writeln!(
                out,
                "drift: max |g| = {:.4e}, declared bound {}, within = {}",
                m.max_norm,
                m.declared_bound.map_or("none".to_string(), |b| format!("{b:.4e}")),
                m.within_declared
            );
        }
    }
    match &report {
        Some(r) => {
            let _ = writeln!(
                out,
                "certificate ({:?}): lambda_fit={:.4e} r_squared={:.4} rho_est={:.4e} t1_est={} envelope_ok={} stable={}",
                resolved.certify,
                r.lambda_fit,
                r.r_squared,
                r.rho_est,
                r.t1_est.map_or("none".to_string(), |t| format!("{t:.4}")),
                r.envelope_ok,
                stable
            );
        }
        None => {
            let _ = writeln!(out, "certificate: not enough samples");
        }
    }
    for f in &files {
        let _ = writeln!(out, "wrote {}", f.display());
    }

    if let Some(failure) = &run.failure {
        return Err(CliError::Runtime(failure.to_string()));
    }
    if opts.require_stable && !stable {
        return Err(CliError::Certification(format!("{} did not certify as {:?}", s.name, resolved.certify)));
    }
    Ok(RunOutcome { run, report, stable, files })
}

#[derive(Debug, Clone)]
pub struct Validation {
    pub rank_ok: bool,
    pub kappa_ok: bool,
    pub warnings: Vec<String>,
}

/// Pre-flight check of the rank condition, the multipliers and the drift
/// declarations. Acknowledged resonances are reported as warnings.
pub fn cmd_validate(config: &RunConfig, out: &mut dyn Write) -> Result<Validation, CliError> {
    let s = config.resolve()?.scenario;
    let mut warnings = Vec::new();

    let rank = s.check_rank()?;
    let min_det = rank.points.iter().map(|p| p.abs_det).fold(f64::INFINITY, f64::min);
    let max_cond = rank.points.iter().map(|p| p.cond).fold(0.0, f64::max);
    let _ = writeln!(
        out,
        "rank: {} at {} points (min |det F| = {:.4e}, max cond = {:.4e}, max |F^-1| = {:.4e})",
        if rank.pass { "pass" } else { "FAIL" },
        rank.points.len(),
        min_det,
        max_cond,
        rank.max_inverse_norm
    );
    for p in rank.failures().take(5) {
        let _ =
            writeln!(out, "  rank fails at {:?}: |det| = {:.3e} {}", p.x, p.abs_det, p.error.as_deref().unwrap_or(""));
    }

    let diag = s.kappa_diagnostics()?;
    let _ = writeln!(out, "kappa: second order {:?}, third order {:?}", s.kappa2, s.kappa3);
    if !diag.duplicates.is_empty() {
        let _ = writeln!(out, "  duplicate multipliers: {:?}", diag.duplicates);
    }
    for (triple, extra) in s.sets.s3.iter().zip(&diag.extra_rank) {
        let certs: Vec<&Vec<i64>> =
            diag.violations.iter().filter(|v| v.triple == *triple).map(|v| &v.certificate.coefficients).collect();
        if certs.is_empty() {
            continue;
        }
        let msg = format!(
            "third-order resonance in tuple {triple:?}: {} certificate(s) {certs:?}, {extra} independent beyond the imposed relations",
            certs.len()
        );
        let _ = writeln!(out, "  {}: {msg}", if s.acknowledge_resonance { "warning" } else { "error" });
        if s.acknowledge_resonance {
            warnings.push(msg);
        }
    }
    for c in &diag.cross_tuple {
        let _ = writeln!(out, "  note: cross-tuple relation {:?}", c.coefficients);
    }
    let kappa_ok = diag.duplicates.is_empty() && (diag.pass || s.acknowledge_resonance);
    let _ = writeln!(
        out,
        "kappa: {}",
        match (diag.pass, kappa_ok) {
            (true, _) => "pass",
            (false, true) => "pass with acknowledged warning",
            (false, false) => "FAIL",
        }
    );

    s.system.drift.check_dims(s.system.n, s.system.m)?;
    let _ = writeln!(out, "drift: {}", describe_drift(&s.system.drift));

    let ok = rank.pass && kappa_ok;
    if !ok {
        return Err(CliError::Certification(format!("{} failed validation", s.name)));
    }
    Ok(Validation { rank_ok: rank.pass, kappa_ok, warnings })
}

fn describe_drift(d: &DriftModel) -> String {
    let bound = d.declared_bound().map_or("undeclared".to_string(), |b| format!("{b:.4e}"));
    match d {
        DriftModel::None => "none".into(),
        DriftModel::TimeSignal { components, .. } => {
            format!("time signal with {} components, |g| <= {bound}", components.len())
        }
        DriftModel::StateCubic { terms, lipschitz, .. } => {
            format!("cubic in the state with {} terms, |g| <= {bound} |x|^3, Lipschitz {lipschitz:.4e}", terms.len())
        }
        DriftModel::ActuatorNoise { signals, .. } => {
            format!("actuator noise on {} inputs, |g| <= {bound}", signals.len())
        }
    }
}

/// Runs every `(epsilon, gamma)` pair of the grid in parallel and writes
/// one report table.
pub fn cmd_sweep(
    config: &RunConfig,
    epsilons: &[f64],
    gammas: &[f64],
    opts: &Options,
    out: &mut dyn Write,
) -> Result<SweepTable, CliError> {
    let resolved = config.resolve()?;
    let grid_axis = |given: &[f64], from_config: Option<&Vec<Real>>, base: f64| -> Vec<f64> {
        if !given.is_empty() {
            given.to_vec()
        } else if let Some(v) = from_config.filter(|v| !v.is_empty()) {
            v.iter().map(|r| r.0).collect()
        } else {
            vec![base]
        }
    };
    let sweep = config.sweep.as_ref();
    let eps_axis = grid_axis(epsilons, sweep.map(|s| &s.epsilon), resolved.scenario.epsilon);
    let gamma_axis = grid_axis(gammas, sweep.map(|s| &s.gamma), resolved.scenario.gamma);
    for (key, axis) in [("epsilon", &eps_axis), ("gamma", &gamma_axis)] {
        if let Some(bad) = axis.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(CliError::Config(format!("sweep {key} values must be positive, got {bad}")));
        }
    }

    let grid: Vec<(f64, f64)> = eps_axis.iter().flat_map(|&e| gamma_axis.iter().map(move |&g| (e, g))).collect();
    let results: Vec<Result<(SweepParams, Option<StabilityReport>), CliError>> = grid
        .par_iter()
        .map(|&(epsilon, gamma)| {
            let point =
                Resolved { scenario: Scenario { epsilon, gamma, ..resolved.scenario.clone() }, ..resolved.clone() };
            let run = simulate(&point)?;
            Ok((SweepParams { epsilon, gamma }, certify(&run, point.certify, point.rho)))
        })
        .collect();
    let table = sweep_summary(results.into_iter().collect::<Result<_, _>>()?);

    prepare_dir(&opts.output_dir)?;
    let report_path = opts.output_dir.join(&config.output.report);
    write_table(&report_path, &table)?;
    let certified = |r: &StabilityReport| match resolved.certify {
        Certification::Practical => r.envelope_ok,
        Certification::Exponential => r.exponential_ok == Some(true),
    };
    let stable = table.rows.iter().filter(|row| row.report.as_ref().is_some_and(certified)).count();
    let _ = writeln!(out, "{} runs, {stable} certified; wrote {}", table.len(), report_path.display());
    if opts.require_stable && stable < table.len() {
        return Err(CliError::Certification(format!(
            "{} of {} runs did not certify",
            table.len() - stable,
            table.len()
        )));
    }
    Ok(table)
}

fn write_table(path: &Path, table: &SweepTable) -> Result<(), CliError> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(CliError::io(path))?;
    write_file(path, &buf)
}
