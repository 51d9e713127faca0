//! Command implementations behind the `rofphi` binary.

pub mod config;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use rofphi_core::certificate::Tolerances;
use rofphi_core::io::{self, metrics};
use rofphi_core::phi::{
    check_a0, check_almost_monotone, check_double_phase_holder, check_log_holder,
    check_strong_holder_a, check_strong_holder_p, ConditionConfig, ConditionReport, Direction,
};
use rofphi_core::{
    add_noise, certify, run_flow, solve_rof, Error, ExtReal, Grid, PhiFamily, PhiField, Result,
    ScalarImage,
};

pub use config::{Command, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CERTIFICATE_FAIL: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

/// Exit status for a failed run.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Machine-readable description of `err`.
pub fn error_json(err: &Error) -> serde_json::Value {
    let kind = match err {
        Error::OutOfGrid { .. } => "out_of_grid",
        Error::Shape(_) => "shape",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::NonFinite { .. } => "non_finite",
        Error::Parse { .. } => "parse",
        Error::Config { .. } => "config",
        Error::Io { .. } => "io",
    };
    let mut body = json!({
        "kind": kind,
        "message": err.to_string(),
        "exit_code": exit_code_for(err),
    });
    match err {
        Error::Parse { offset, .. } => body["offset"] = json!(offset),
        Error::Config { line, .. } if *line > 0 => body["line"] = json!(line),
        Error::Io { path, .. } => body["path"] = json!(path.display().to_string()),
        _ => {}
    }
    json!({ "error": body })
}

/// Result of a successful dispatch: what to print and how to exit.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: u8,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Denoise => denoise(cfg),
        Command::Certify => certify_cmd(cfg),
        Command::Flow => flow(cfg),
        Command::CheckConditions => check_conditions(cfg),
        Command::ConjugateTable => conjugate_table(cfg),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable")
}

fn load_input(cfg: &RunConfig) -> Result<ScalarImage> {
    let path = cfg.input_path.as_ref().expect("validated");
    let img = io::load_image(path)?;
    add_noise(&img, cfg.noise_sigma, cfg.seed)
}

fn tolerances(gap_tol: f64) -> Tolerances {
    Tolerances {
        gap_rel: gap_tol,
        ..Tolerances::default()
    }
}

fn verdict_code(passed: bool) -> u8 {
    if passed {
        EXIT_OK
    } else {
        EXIT_CERTIFICATE_FAIL
    }
}

fn denoise(cfg: &RunConfig) -> Result<Outcome> {
    let f = load_input(cfg)?;
    let grid = f.grid();
    let field = cfg.phi.build(grid, &cfg.base_dir)?;
    let solver = cfg.solver_config(grid)?;
    let res = solve_rof(&f, &field, &solver)?;
    let report = certify(
        &res.u,
        &res.xi,
        &f,
        &field,
        solver.lambda,
        tolerances(solver.gap_tol),
    )?;

    let out = cfg.output_path.as_ref().expect("validated");
    create_dir(out)?;
    io::save_grid(&f, out.join("f.grid"))?;
    io::save_grid(&res.u, out.join("u.grid"))?;
    io::save_pgm(&res.u, out.join("u.pgm"))?;
    io::save_field(&res.xi, out, "xi")?;
    write_text(&out.join("certificate.json"), &report.to_json())?;
    if let Some(map) = report.young_residual_map.to_image() {
        io::save_grid(&map, out.join("young_residual.grid"))?;
    }
    let metrics_path = cfg
        .metrics_path
        .clone()
        .unwrap_or_else(|| out.join("metrics.csv"));
    metrics::write_metrics_csv(&res.history, &metrics_path)?;

    let summary = json!({
        "command": "denoise",
        "phi": field.family().name(),
        "height": grid.height,
        "width": grid.width,
        "lambda": solver.lambda,
        "iterations": res.iterations,
        "converged": res.converged,
        "gap_rel": res.gap_rel,
        "verdict": report.verdict,
        "output": out.display().to_string(),
    });
    Ok(Outcome {
        stdout: to_json(&summary),
        exit_code: verdict_code(report.passed()),
    })
}

fn split_stem(path: &Path) -> Result<(PathBuf, String)> {
    let stem = path.file_name().and_then(|s| s.to_str()).ok_or_else(|| {
        Error::InvalidParameter(format!("invalid field prefix {}", path.display()))
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((dir, stem.to_string()))
}

fn certify_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let f = load_input(cfg)?;
    let u = io::load_image(cfg.extra_path("u").expect("validated"))?;
    let (dir, stem) = split_stem(&cfg.extra_path("xi").expect("validated"))?;
    let xi = io::load_field(dir, &stem)?;
    let grid = u.grid();
    if (f.grid().height, f.grid().width) != (grid.height, grid.width) {
        return Err(Error::Shape(format!(
            "datum is {}x{}, u is {}x{}",
            f.grid().height,
            f.grid().width,
            grid.height,
            grid.width
        )));
    }
    let f = ScalarImage::from_vec(grid, f.into_vec())?;
    let field = cfg.phi.build(grid, &cfg.base_dir)?;
    let solver = cfg.solver_config(grid)?;
    let report = certify(
        &u,
        &xi,
        &f,
        &field,
        solver.lambda,
        tolerances(solver.gap_tol),
    )?;
    let text = report.to_json();
    if let Some(out) = &cfg.output_path {
        write_text(out, &text)?;
    }
    Ok(Outcome {
        stdout: text,
        exit_code: verdict_code(report.passed()),
    })
}

fn flow(cfg: &RunConfig) -> Result<Outcome> {
    let u0 = load_input(cfg)?;
    let grid = u0.grid();
    let field = cfg.phi.build(grid, &cfg.base_dir)?;
    let solver = cfg.solver_config(grid)?;
    let steps: usize = cfg.extra.required("steps")?;
    let every: usize = cfg.extra.parsed("snapshot_every")?.unwrap_or(0);
    let traj = run_flow(&u0, solver.lambda, steps, &field, &solver)?;

    let out = cfg.output_path.as_ref().expect("validated");
    create_dir(out)?;
    let metrics_path = cfg
        .metrics_path
        .clone()
        .unwrap_or_else(|| out.join("flow.csv"));
    metrics::write_flow_csv(&traj, &metrics_path)?;
    if every > 0 {
        for (k, state) in traj.states.iter().enumerate().step_by(every) {
            io::save_grid(state, out.join(format!("state_{k:04}.grid")))?;
            io::save_pgm(state, out.join(format!("state_{k:04}.pgm")))?;
        }
    }
    let last = traj.states.last().expect("nonempty trajectory");
    io::save_grid(last, out.join("u_final.grid"))?;
    io::save_pgm(last, out.join("u_final.pgm"))?;
    write_text(&out.join("certificates.json"), &to_json(&traj.certificates))?;

    let failed = traj.certificates.iter().filter(|c| !c.passed()).count();
    let summary = json!({
        "command": "flow",
        "phi": field.family().name(),
        "dt": solver.lambda,
        "steps": steps,
        "final_energy": traj.energies.last(),
        "failed_certificates": failed,
        "output": out.display().to_string(),
    });
    Ok(Outcome {
        stdout: to_json(&summary),
        exit_code: verdict_code(failed == 0),
    })
}

fn target_grid(cfg: &RunConfig) -> Result<Grid> {
    match &cfg.input_path {
        Some(path) => Ok(io::load_image(path)?.grid()),
        None => Grid::new(cfg.extra.required("height")?, cfg.extra.required("width")?),
    }
}

/// The checks that apply to `field`.
pub fn condition_reports(field: &PhiField, cc: &ConditionConfig) -> Vec<ConditionReport> {
    let mut reports = vec![check_a0(field)];
    match field.family() {
        PhiFamily::ClassicalTv | PhiFamily::PowerWeighted => {
            reports.push(check_almost_monotone(field, 1.0, Direction::Increasing, cc));
            reports.push(check_almost_monotone(field, 1.0, Direction::Decreasing, cc));
        }
        PhiFamily::VariableExponent => {
            let p = field.p_field().expect("variable exponent");
            let lo = p.data().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = p.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            reports.push(check_almost_monotone(field, lo, Direction::Increasing, cc));
            reports.push(check_almost_monotone(field, hi, Direction::Decreasing, cc));
            reports.push(check_log_holder(p, cc));
            reports.push(check_strong_holder_p(p, cc));
        }
        PhiFamily::DoublePhase => {
            let a = field.a_field().expect("double phase");
            let q = field.q().expect("double phase");
            reports.push(check_almost_monotone(field, 1.0, Direction::Increasing, cc));
            reports.push(check_almost_monotone(field, q, Direction::Decreasing, cc));
            reports.push(check_double_phase_holder(a, q, 2, cc));
            reports.push(check_strong_holder_a(a, q, 2, cc));
        }
    }
    reports
}

fn emit(cfg: &RunConfig, text: String) -> Result<Outcome> {
    if let Some(out) = &cfg.output_path {
        write_text(out, &text)?;
    }
    Ok(Outcome {
        stdout: text,
        exit_code: EXIT_OK,
    })
}

fn check_conditions(cfg: &RunConfig) -> Result<Outcome> {
    let field = cfg.phi.build(target_grid(cfg)?, &cfg.base_dir)?;
    let reports = condition_reports(&field, &ConditionConfig::default());
    emit(cfg, to_json(&reports))
}

fn conjugate_table(cfg: &RunConfig) -> Result<Outcome> {
    let field = cfg.phi.build(target_grid(cfg)?, &cfg.base_dir)?;
    let row: usize = cfg.extra.parsed("row")?.unwrap_or(0);
    let col: usize = cfg.extra.parsed("col")?.unwrap_or(0);
    let local = field.local_at(row, col)?;
    let s_max = match cfg.extra.parsed::<f64>("s_max")? {
        Some(v) => v,
        None => local
            .conjugate_domain_radius()
            .map_or_else(|| local.derivative(10.0), |r| 2.0 * r),
    };
    if !(s_max >= 0.0 && s_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "s_max must be >= 0, got {s_max}"
        )));
    }
    let samples: usize = cfg.extra.parsed("samples")?.unwrap_or(101);
    if samples < 2 {
        return Err(Error::InvalidParameter("samples must be at least 2".into()));
    }
    let t_max: f64 = cfg.extra.parsed("t_max")?.unwrap_or(1e3);
    let n: usize = cfg.extra.parsed("oracle_samples")?.unwrap_or(1_000_000);
    let oracle = rofphi_core::phi::LegendreOracle::new(local, t_max, n)?;
    let fmt = |v: ExtReal| match v {
        ExtReal::Finite(x) => format!("{x:e}"),
        ExtReal::Infinite => "inf".to_string(),
    };
    let mut text = String::from("s,conjugate,numeric\n");
    for k in 0..samples {
        let s = s_max * k as f64 / (samples - 1) as f64;
        text.push_str(&format!(
            "{s:e},{},{}\n",
            fmt(local.conjugate(s)),
            fmt(oracle.conjugate(s))
        ));
    }
    emit(cfg, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(
            exit_code_for(&Error::Config {
                line: 1,
                message: "x".into()
            }),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code_for(&Error::InvalidParameter("x".into())),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code_for(&Error::Parse {
                offset: 3,
                message: "x".into()
            }),
            EXIT_DATA
        );
        assert_eq!(exit_code_for(&Error::Shape("x".into())), EXIT_DATA);
    }

    #[test]
    fn error_json_names_offset() {
        let v = error_json(&Error::Parse {
            offset: 17,
            message: "truncated".into(),
        });
        assert_eq!(v["error"]["kind"], "parse");
        assert_eq!(v["error"]["offset"], 17);
        assert_eq!(v["error"]["exit_code"], 65);
    }

    #[test]
    fn reports_per_family() {
        let g = Grid::new(6, 6).unwrap();
        let cc = ConditionConfig::default();
        assert_eq!(condition_reports(&PhiField::classical_tv(g), &cc).len(), 3);
        let dp = PhiField::double_phase(ScalarImage::constant(g, 0.5), 2.0).unwrap();
        assert_eq!(condition_reports(&dp, &cc).len(), 5);
    }
}
