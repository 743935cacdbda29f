//! Tabular inputs for plots.

use std::io::{Read, Write};

use serde::Serialize;

use crate::results::{read_results, read_trace, summarize};
use crate::sweep::read_sweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Per-class mean and std of SR_W from a results file.
    Bars,
    /// Per-depth cycle and step counts from a sweep file.
    Sweep,
    /// Per-iteration contact metrics from a trace file.
    Timeline,
}

#[derive(Debug, Serialize)]
struct Bar {
    class: String,
    method: String,
    mean: f64,
    std: f64,
    n: usize,
}

#[derive(Debug, Serialize)]
struct SweepPoint {
    depth_mm: f64,
    cycles: usize,
    exec_time_proxy: usize,
    success: bool,
}

#[derive(Debug, Serialize)]
struct TimelinePoint {
    iteration: usize,
    recovering: u8,
    s: f64,
    f_d_mm: f64,
    normal_mm: f64,
    shear_mm: f64,
    slip_ratio: f64,
}

/// Converts `input` to plot rows of `kind`; returns the row count.
pub fn emit_plotdata<R: Read, W: Write>(input: R, kind: PlotKind, out: W) -> csv::Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    let n = match kind {
        PlotKind::Bars => {
            let summary = summarize(&read_results(input)?);
            for s in &summary {
                w.serialize(Bar {
                    class: s.class.clone(),
                    method: s.method.clone(),
                    mean: s.mean_sr_w_pct,
                    std: s.std_sr_w_pct,
                    n: s.n,
                })?;
            }
            summary.len()
        }
        PlotKind::Sweep => {
            let rows = read_sweep(input)?;
            for r in &rows {
                w.serialize(SweepPoint {
                    depth_mm: r.depth_mm,
                    cycles: r.cycles,
                    exec_time_proxy: r.total_steps,
                    success: r.success,
                })?;
            }
            rows.len()
        }
        PlotKind::Timeline => {
            let rows = read_trace(input)?;
            for r in &rows {
                w.serialize(TimelinePoint {
                    iteration: r.iteration,
                    recovering: u8::from(r.phase == "recovering"),
                    s: r.s,
                    f_d_mm: r.f_d_mm,
                    normal_mm: r.max_normal_mm,
                    shear_mm: r.max_shear_mm,
                    slip_ratio: r.max_slip_ratio,
                })?;
            }
            rows.len()
        }
    };
    w.flush()?;
    Ok(n)
}
