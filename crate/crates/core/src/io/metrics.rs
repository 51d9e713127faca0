//! CSV emission for solver logs and flow trajectories.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::solver::IterRecord;

pub const METRICS_HEADER: &str = "iter,primal,dual,gap";
pub const FLOW_HEADER: &str = "step,time,energy,gap";

pub fn metrics_csv(history: &[IterRecord]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in history {
        let _ = writeln!(out, "{},{:e},{:e},{:e}", r.iter, r.primal, r.dual, r.gap);
    }
    out
}

pub fn write_metrics_csv(history: &[IterRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, metrics_csv(history)).map_err(|e| Error::io(path, e))
}

/// One row per state. Step 0 is the initial datum and has an empty gap.
pub fn flow_csv(traj: &FlowTrajectory) -> String {
    let mut out = format!("{FLOW_HEADER}\n");
    for (k, (t, e)) in traj.times.iter().zip(&traj.energies).enumerate() {
        let gap = match k {
            0 => String::new(),
            _ => format!("{:e}", traj.step_gaps[k - 1]),
        };
        let _ = writeln!(out, "{k},{t:e},{e:e},{gap}");
    }
    out
}

pub fn write_flow_csv(traj: &FlowTrajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, flow_csv(traj)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_fixed() {
        let rows = [
            IterRecord {
                iter: 0,
                primal: 1.5,
                dual: 0.5,
                gap: 1.0,
            },
            IterRecord {
                iter: 10,
                primal: 1.0,
                dual: 0.75,
                gap: 0.25,
            },
        ];
        let csv = metrics_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("iter,primal,dual,gap"));
        assert_eq!(lines.next(), Some("0,1.5e0,5e-1,1e0"));
        assert_eq!(lines.next(), Some("10,1e0,7.5e-1,2.5e-1"));
        assert_eq!(lines.next(), None);
        assert_eq!(metrics_csv(&[]), "iter,primal,dual,gap\n");
    }
}
