//! Minimizing-movement approximation of the L^2 gradient flow of `E_phi`.
//!
//! Each implicit Euler step `u_next = argmin E_phi(v) + |v - u_prev|^2 / (2 dt)`
//! is a denoising solve with datum `u_prev` and weight `dt`, and comes with
//! its own certificate. The certified pair satisfies
//! `(u_next - u_prev) / dt = div xi_bar` with `xi_bar = -xi`.

use crate::calculus::{gradient, ScalarImage};
use crate::certificate::{certify, CertificateReport, Tolerances};
use crate::error::{Error, Result};
use crate::phi::PhiField;
use crate::solver::{solve_rof, SolveResult, SolverConfig};

/// States, energies and per-step gaps of a discrete trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ScalarImage>,
    /// `E_phi` of each state.
    pub energies: Vec<f64>,
    /// Certified duality gap of each step; one fewer entry than `states`.
    pub step_gaps: Vec<f64>,
    pub certificates: Vec<CertificateReport>,
}

/// One certified step together with the underlying solve.
#[derive(Clone, Debug)]
pub struct FlowStep {
    pub solve: SolveResult,
    pub certificate: CertificateReport,
}

impl FlowStep {
    pub fn state(&self) -> &ScalarImage {
        &self.solve.u
    }
}

fn step_config(dt: f64, cfg: &SolverConfig) -> Result<SolverConfig> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut step = cfg.clone();
    step.lambda = dt;
    Ok(step)
}

/// One implicit Euler step of size `dt` from `u_prev`.
pub fn flow_step(
    u_prev: &ScalarImage,
    dt: f64,
    field: &PhiField,
    cfg: &SolverConfig,
) -> Result<FlowStep> {
    let step = step_config(dt, cfg)?;
    let solve = solve_rof(u_prev, field, &step)?;
    let tolerances = Tolerances {
        gap_rel: cfg.gap_tol,
        ..Tolerances::default()
    };
    let certificate = certify(&solve.u, &solve.xi, u_prev, field, dt, tolerances)?;
    Ok(FlowStep { solve, certificate })
}

/// `n_steps` implicit Euler steps of size `dt` starting at `u0`.
pub fn run_flow(
    u0: &ScalarImage,
    dt: f64,
    n_steps: usize,
    field: &PhiField,
    cfg: &SolverConfig,
) -> Result<FlowTrajectory> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    step_config(dt, cfg)?;
    let mut traj = FlowTrajectory {
        times: vec![0.0],
        energies: vec![field.phi_total(&gradient(u0))?],
        states: vec![u0.clone()],
        step_gaps: Vec::with_capacity(n_steps),
        certificates: Vec::with_capacity(n_steps),
    };
    for k in 1..=n_steps {
        let prev = traj.states.last().expect("trajectory is nonempty");
        let step = flow_step(prev, dt, field, cfg)?;
        traj.energies
            .push(field.phi_total(&gradient(step.state()))?);
        traj.step_gaps.push(step.solve.gap);
        traj.times.push(k as f64 * dt);
        traj.states.push(step.solve.u);
        traj.certificates.push(step.certificate);
    }
    Ok(traj)
}
