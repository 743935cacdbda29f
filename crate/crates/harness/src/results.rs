//! Result rows, per-class summaries and trace files.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use tacman_core::controller::{Event, IterationRecord, Metric, Phase};

/// Column order of the results file.
pub const RESULT_COLUMNS: [&str; 11] = [
    "scenario_id",
    "method",
    "success",
    "d_E_mm",
    "d_A_mm",
    "sr_w_pct",
    "cycles",
    "exec_steps",
    "recover_steps",
    "failure_reason",
    "wall_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub method: String,
    pub success: bool,
    #[serde(rename = "d_E_mm")]
    pub d_e_mm: f64,
    #[serde(rename = "d_A_mm")]
    pub d_a_mm: f64,
    pub sr_w_pct: f64,
    pub cycles: usize,
    pub exec_steps: usize,
    pub recover_steps: usize,
    pub failure_reason: String,
    pub wall_time_s: f64,
}

/// Scenario class: the id without a trailing `-<digits>` suffix.
pub fn class_of(id: &str) -> &str {
    match id.rsplit_once('-') {
        Some((head, tail)) if !head.is_empty() && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) => head,
        _ => id,
    }
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub class: String,
    pub method: String,
    pub n: usize,
    pub successes: usize,
    pub mean_sr_w_pct: f64,
    /// Population standard deviation.
    pub std_sr_w_pct: f64,
}

/// Mean and population standard deviation of SR_W per (class, method).
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, &str), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((class_of(&row.scenario_id), row.method.as_str())).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((class, method), members)| {
            let n = members.len();
            let mean = members.iter().map(|r| r.sr_w_pct).sum::<f64>() / n as f64;
            let var = members.iter().map(|r| (r.sr_w_pct - mean).powi(2)).sum::<f64>() / n as f64;
            SummaryRow {
                class: class.to_string(),
                method: method.to_string(),
                n,
                successes: members.iter().filter(|r| r.success).count(),
                mean_sr_w_pct: mean,
                std_sr_w_pct: var.sqrt(),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["class", "method", "n", "successes", "mean_sr_w_pct", "std_sr_w_pct"])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a per-trial trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub phase: String,
    pub s: f64,
    pub max_normal_mm: f64,
    pub max_shear_mm: f64,
    pub max_slip_ratio: f64,
    pub f_d_mm: f64,
    pub event: String,
}

fn phase_name(p: &Phase) -> String {
    match p {
        Phase::Executing => "executing".into(),
        Phase::Recovering => "recovering".into(),
        Phase::Done => "done".into(),
        Phase::Failed(r) => format!("failed:{r}"),
    }
}

fn metric_name(m: &Metric) -> &'static str {
    match m {
        Metric::Normal => "normal",
        Metric::Shear => "shear",
        Metric::Slip => "slip",
        Metric::Deviation => "deviation",
    }
}

impl From<&IterationRecord> for TraceRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iteration: r.iteration,
            phase: phase_name(&r.phase),
            s: r.s,
            max_normal_mm: r.summary.max_normal,
            max_shear_mm: r.summary.max_shear,
            max_slip_ratio: r.summary.max_slip_ratio,
            f_d_mm: r.summary.mean_pair_distance,
            event: match &r.event {
                None => String::new(),
                Some(Event::Boundary(m)) => format!("boundary:{}", metric_name(m)),
                Some(Event::RecoveryExit) => "recovery_exit".into(),
            },
        }
    }
}

pub fn write_trace<W: Write>(out: W, log: &[IterationRecord]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["iteration", "phase", "s", "max_normal_mm", "max_shear_mm", "max_slip_ratio", "f_d_mm", "event"])?;
    for r in log {
        w.serialize(TraceRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> csv::Result<Vec<TraceRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, method: &str, sr: f64) -> ResultRow {
        ResultRow {
            scenario_id: id.into(),
            method: method.into(),
            success: sr == 100.0,
            d_e_mm: 250.0,
            d_a_mm: 2.5 * sr,
            sr_w_pct: sr,
            cycles: 0,
            exec_steps: 1,
            recover_steps: 0,
            failure_reason: String::new(),
            wall_time_s: 0.5,
        }
    }

    #[test]
    fn classes() {
        assert_eq!(class_of("prismatic-07"), "prismatic");
        assert_eq!(class_of("playboard-o3-12"), "playboard-o3");
        assert_eq!(class_of("quartet-left-hinge"), "quartet-left-hinge");
        assert_eq!(class_of("door"), "door");
        assert_eq!(class_of("-3"), "-3");
    }

    #[test]
    fn summary_groups_by_class_and_method() {
        let rows = [row("a-1", "tacman", 100.0), row("a-2", "tacman", 50.0), row("a-1", "compliant", 20.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        let t = s.iter().find(|r| r.method == "tacman").unwrap();
        assert_eq!((t.n, t.successes), (2, 1));
        assert_eq!(t.mean_sr_w_pct, 75.0);
        assert_eq!(t.std_sr_w_pct, 25.0);
    }

    #[test]
    fn results_round_trip_with_fixed_header() {
        let rows = vec![row("a-1", "tacman", 100.0)];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&RESULT_COLUMNS.join(",")));
        assert_eq!(read_results(buf.as_slice()).unwrap(), rows);

        let mut empty = Vec::new();
        write_results(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), RESULT_COLUMNS.join(","));
    }
}
