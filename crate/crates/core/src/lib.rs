//! Denoising with variable-growth total variation energies.
//!
//! The problem is
//!
//! ```text
//! min_u  E_phi(u) + |u - f|^2 / (2 lambda),   E_phi(u) = sum_x h^2 phi(x, |grad u(x)|)
//! ```
//!
//! on a uniform pixel grid, for integrands `phi(x, t)` that are classical
//! total variation, variable exponent `t^p(x) / p(x)`, double phase
//! `t + a(x) t^q / q`, or a weighted linear growth. [`solve_rof`] runs a
//! primal-dual iteration and returns a pair `(u, xi)` that [`certify`]
//! checks against the optimality conditions: zero normal trace, prescribed
//! divergence, and pointwise Young equality.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod calculus;
pub mod certificate;
pub mod flow;
pub mod io;
pub mod noise;
pub mod phi;
pub mod prox;
pub mod solver;
pub mod synthetic;

#[cfg(test)]
mod testutil;

pub use calculus::{divergence, gradient, Grid, ScalarImage, VectorField};
pub use certificate::{
    certify, duality_gap, primal_energy, CertificateReport, Tolerances, Verdict,
};
pub use error::{Error, Result};
pub use flow::{flow_step, run_flow, FlowStep, FlowTrajectory};
pub use noise::add_noise;
pub use phi::{ExtReal, LocalPhi, PhiFamily, PhiField};
pub use solver::{solve_rof, solve_rof_observed, IterRecord, SolveResult, SolverConfig};
