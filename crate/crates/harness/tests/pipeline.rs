use std::fs;

use tacman_harness::plotdata::{emit_plotdata, PlotKind};
use tacman_harness::results::{class_of, read_trace};
use tacman_harness::runner::{run_suite, RunOptions, PARTIAL_FILE, RESULTS_FILE, SUMMARY_CSV, SUMMARY_JSON, TRACE_DIR};
use tacman_harness::scenarios::{default_suite, playboards, quartet_suite};
use tacman_harness::schema::{GraspSpec, Method, PoseSpec, SimSettings, Suite};

fn small_suite() -> Suite {
    let mut suite = quartet_suite(11);
    suite.scenarios.retain(|s| s.id == "quartet-drawer" || s.id == "quartet-left-hinge");
    for s in &mut suite.scenarios {
        s.methods = Method::ALL.to_vec();
    }
    suite.scenarios.extend(playboards(2, 2, 5, &[Method::Tacman, Method::Compliant]).unwrap());
    suite
}

fn opts(jobs: usize, dir: &std::path::Path) -> RunOptions {
    RunOptions {
        jobs,
        out_dir: Some(dir.to_path_buf()),
        write_traces: true,
    }
}

fn without_wall_time(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n")
}

#[test]
fn results_are_reproducible_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let suite = small_suite();
    run_suite(&suite, &opts(1, a.path())).unwrap();
    run_suite(&suite, &opts(4, b.path())).unwrap();
    let read = |d: &tempfile::TempDir| fs::read_to_string(d.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(without_wall_time(&read(&a)), without_wall_time(&read(&b)));
    assert_eq!(
        fs::read(a.path().join(SUMMARY_CSV)).unwrap(),
        fs::read(b.path().join(SUMMARY_CSV)).unwrap()
    );
    assert!(!a.path().join(PARTIAL_FILE).exists());
    assert!(a.path().join(TRACE_DIR).join("quartet-drawer__tacman.csv").exists());
}

#[test]
fn rows_are_sorted_by_scenario_then_method() {
    let out = run_suite(&small_suite(), &RunOptions::default()).unwrap();
    let keys: Vec<_> = out.trials.iter().map(|t| (t.row.scenario_id.clone(), Method::parse(&t.row.method).unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), 3 + 3 + 2 + 2);
}

#[test]
fn unreachable_grasp_is_recorded_without_disturbing_others() {
    let baseline = small_suite();
    let mut faulty = baseline.clone();
    let mut bad = faulty.scenarios[0].clone();
    bad.id = "unreachable-grasp".into();
    bad.grasp = GraspSpec {
        depth_m: None,
        offset: PoseSpec {
            translation_m: [0.0, 0.1, 0.0],
            ..PoseSpec::default()
        },
    };
    faulty.scenarios.push(bad);

    let clean = run_suite(&baseline, &RunOptions::default()).unwrap();
    let with_fault = run_suite(&faulty, &RunOptions::default()).unwrap();
    assert!(with_fault.all_completed());
    let failed: Vec<_> = with_fault.trials.iter().filter(|t| t.row.scenario_id == "unreachable-grasp").collect();
    assert_eq!(failed.len(), 3);
    for t in &failed {
        assert_eq!(t.row.failure_reason, "GraspFailed");
        assert_eq!((t.row.sr_w_pct, t.row.d_a_mm, t.row.success), (0.0, 0.0, false));
    }
    let strip = |o: &tacman_harness::SuiteOutcome| -> Vec<_> {
        o.trials
            .iter()
            .filter(|t| t.row.scenario_id != "unreachable-grasp")
            .map(|t| {
                let mut r = t.row.clone();
                r.wall_time_s = 0.0;
                r
            })
            .collect()
    };
    assert_eq!(strip(&clean), strip(&with_fault));
}

#[test]
fn summary_matches_an_independent_pass_over_raw_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_suite(&small_suite(), &opts(2, dir.path())).unwrap();
    let raw = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    let mut groups: std::collections::HashMap<(String, String), Vec<f64>> = Default::default();
    for line in raw.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let key = (class_of(cols[0]).to_string(), cols[1].to_string());
        groups.entry(key).or_default().push(cols[5].parse().unwrap());
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap()).unwrap();
    let summary = summary.as_array().unwrap();
    assert_eq!(summary.len(), groups.len());
    for entry in summary {
        let key = (entry["class"].as_str().unwrap().to_string(), entry["method"].as_str().unwrap().to_string());
        let xs = &groups[&key];
        let n = xs.len() as f64;
        // Welford's update, a different route to the same moments.
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, x) in xs.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (x - mean);
        }
        let std = (m2 / n).sqrt();
        assert!((entry["mean_sr_w_pct"].as_f64().unwrap() - mean).abs() <= 1e-12, "{key:?}");
        assert!((entry["std_sr_w_pct"].as_f64().unwrap() - std).abs() <= 1e-12, "{key:?}");
        assert_eq!(entry["n"].as_u64().unwrap() as usize, xs.len());
    }
}

#[test]
fn empty_suite_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite(&Suite::empty(0), &opts(1, dir.path())).unwrap();
    assert!(out.trials.is_empty() && out.all_completed());
    let text = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap().trim(), "[]");
}

#[test]
fn suite_files_round_trip() {
    for suite in [default_suite(3), small_suite(), Suite::empty(1)] {
        let text = suite.to_json();
        let parsed = Suite::from_json(&text).unwrap();
        assert_eq!(parsed, suite);
        assert_eq!(parsed.to_json(), text);
    }
}

#[test]
fn noise_free_drawer_timeline_stays_at_zero_deviation() {
    let mut suite = quartet_suite(0);
    suite.scenarios.retain(|s| s.id == "quartet-drawer");
    suite.sim = SimSettings {
        zeta_m: Some(0.0),
        ..SimSettings::default()
    };
    let dir = tempfile::tempdir().unwrap();
    run_suite(&suite, &opts(1, dir.path())).unwrap();
    let trace = dir.path().join(TRACE_DIR).join("quartet-drawer__tacman.csv");
    let mut plot = Vec::new();
    let n = emit_plotdata(fs::File::open(&trace).unwrap(), PlotKind::Timeline, &mut plot).unwrap();
    let rows = read_trace(fs::File::open(&trace).unwrap()).unwrap();
    assert_eq!(n, rows.len());
    assert!(n > 100);
    assert!(rows.iter().all(|r| r.phase == "executing" && r.event.is_empty()));
    assert!(rows.iter().all(|r| r.f_d_mm < 1e-4), "max f_d {}", rows.iter().map(|r| r.f_d_mm).fold(0.0, f64::max));
}

#[test]
fn bars_over_one_class_is_one_row() {
    let mut suite = quartet_suite(0);
    suite.scenarios.retain(|s| s.id == "quartet-drawer");
    let dir = tempfile::tempdir().unwrap();
    run_suite(&suite, &opts(1, dir.path())).unwrap();
    let mut plot = Vec::new();
    let n = emit_plotdata(fs::File::open(dir.path().join(RESULTS_FILE)).unwrap(), PlotKind::Bars, &mut plot).unwrap();
    assert_eq!(n, 1);
    let text = String::from_utf8(plot).unwrap();
    assert_eq!(text.lines().next().unwrap(), "class,method,mean,std,n");
    assert_eq!(text.lines().nth(1).unwrap(), "quartet-drawer,tacman,100.0,0.0,1");
}
