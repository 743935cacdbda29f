//! Grasp-depth sweeps.

use serde::{Deserialize, Serialize};

use crate::runner::{run_trial, RunError};
use crate::schema::{Method, Scenario, SchemaError, Suite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth_mm: f64,
    pub success: bool,
    pub sr_w_pct: f64,
    pub cycles: usize,
    pub exec_steps: usize,
    pub recover_steps: usize,
    /// Commanded increments of both stages, the execution-time proxy.
    pub total_steps: usize,
}

/// Runs the tactile controller on `scenario` once per grasp depth (mm), using the defaults
/// of `suite`.
pub fn sweep_grasp_force(suite: &Suite, scenario: &Scenario, depths_mm: &[f64]) -> Result<Vec<SweepRow>, RunError> {
    depths_mm
        .iter()
        .map(|&depth| {
            let mut sc = scenario.clone();
            sc.grasp.depth_m = Some(depth / 1000.0);
            let resolved = suite.resolve(&sc)?;
            if !(depth > 0.0 && depth < resolved.controller.e_n) {
                return Err(SchemaError::Invalid {
                    scenario_id: sc.id.clone(),
                    field: "grasp.depth_m".into(),
                    message: format!("depth {depth} mm must lie in (0, {}) mm", resolved.controller.e_n),
                }
                .into());
            }
            let t = run_trial(&resolved, Method::Tacman)?;
            Ok(SweepRow {
                depth_mm: depth,
                success: t.result.success,
                sr_w_pct: t.result.sr_w,
                cycles: t.result.cycles,
                exec_steps: t.result.exec_steps,
                recover_steps: t.result.recover_steps,
                total_steps: t.result.exec_steps + t.result.recover_steps,
            })
        })
        .collect()
}

pub fn write_sweep<W: std::io::Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep<R: std::io::Read>(input: R) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
