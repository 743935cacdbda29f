//! Trial execution and suite runs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tacman_core::baselines::{apply_perturbation, perturb_model, run_compliant, run_preplanned, BaselineError, BaselineNoise, Perturbation};
use tacman_core::controller::{default_preliminary_direction, run, ControllerError, ControllerState, FailureReason, TrialResult};
use tacman_core::sim::{grasp, WorldState};

use crate::results::{self, ResultRow, SummaryRow};
use crate::schema::{Method, ResolvedScenario, SchemaError, Suite};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("scenario {id} ({method}): {source}")]
    Controller {
        id: String,
        method: Method,
        source: ControllerError,
    },
    #[error("scenario {id} ({method}): {source}")]
    Baseline {
        id: String,
        method: Method,
        source: BaselineError,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Stable per-trial seed: the first eight bytes of
/// `SHA-256("<master>|<scenario id>|<method>")`, little endian.
pub fn trial_seed(master: u64, scenario_id: &str, method: Method) -> u64 {
    let digest = Sha256::digest(format!("{master}|{scenario_id}|{method}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// A finished trial with its full log.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub row: ResultRow,
    pub result: TrialResult,
}

pub fn run_trial(sc: &ResolvedScenario, method: Method) -> Result<TrialOutcome, RunError> {
    let started = Instant::now();
    let seed = trial_seed(sc.seed_base, &sc.id, method);
    let traj = &sc.trajectory;
    let initial = WorldState::new(traj.clone(), seed);
    let grasp_pose = traj.handle_rest_pose().compose(&sc.grasp_offset);
    let result = match grasp(&initial, &sc.sim, &grasp_pose) {
        Err(_) => TrialResult::not_started(traj, &sc.criterion, FailureReason::GraspFailed),
        Ok((mut world, reference)) => {
            let nominal = default_preliminary_direction(traj, &world.gripper_pose);
            let direction = sc.direction.resolve(nominal);
            let ctrl_err = |source| RunError::Controller {
                id: sc.id.clone(),
                method,
                source,
            };
            let base_err = |source| RunError::Baseline {
                id: sc.id.clone(),
                method,
                source,
            };
            match method {
                Method::Tacman => {
                    let mut state = ControllerState::new(reference, direction, &sc.controller).map_err(ctrl_err)?;
                    run(&mut world, &sc.sim, &sc.controller, &mut state, &sc.criterion).map_err(ctrl_err)?
                }
                Method::Preplanned => {
                    let assumed = match sc.radius_offset_m {
                        Some(dr) => apply_perturbation(traj, &Perturbation::Radius(dr)),
                        None => perturb_model(traj, &BaselineNoise { xi_std: sc.xi_std, seed }).map(|(t, _)| t),
                    }
                    .map_err(base_err)?;
                    run_preplanned(&mut world, &sc.sim, &sc.preplanned, &assumed, &reference, &sc.criterion).map_err(base_err)?
                }
                Method::Compliant => {
                    let world_dir = world.gripper_pose.rotation() * direction;
                    run_compliant(&mut world, &sc.sim, &world_dir, &sc.compliance, &sc.criterion).map_err(base_err)?
                }
            }
        }
    };
    let row = ResultRow {
        scenario_id: sc.id.clone(),
        method: method.to_string(),
        success: result.success,
        d_e_mm: result.d_expected,
        d_a_mm: result.d_actual,
        sr_w_pct: result.sr_w,
        cycles: result.cycles,
        exec_steps: result.exec_steps,
        recover_steps: result.recover_steps,
        failure_reason: result.failure.map(|f| f.to_string()).unwrap_or_default(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(TrialOutcome { row, result })
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    /// Output directory; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    pub write_traces: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 0,
            out_dir: None,
            write_traces: true,
        }
    }
}

#[derive(Debug)]
pub struct SuiteOutcome {
    /// Sorted by scenario id, then method.
    pub trials: Vec<TrialOutcome>,
    pub summary: Vec<SummaryRow>,
    /// Trials that stopped on an unexpected error.
    pub errors: Vec<RunError>,
}

impl SuiteOutcome {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.trials.iter().map(|t| t.row.clone()).collect()
    }

    pub fn all_completed(&self) -> bool {
        self.errors.is_empty()
    }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const PARTIAL_FILE: &str = "results.partial.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TRACE_DIR: &str = "traces";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Streams rows to disk as trials finish so an interrupted run keeps them.
struct PartialWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl PartialWriter {
    fn create(path: PathBuf) -> Result<Self, RunError> {
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        writer.write_record(results::RESULT_COLUMNS).map_err(csv_err(&path))?;
        writer.flush().map_err(io_err(&path))?;
        Ok(Self { path, writer })
    }

    fn push(&mut self, row: &ResultRow) -> Result<(), RunError> {
        self.writer.serialize(row).map_err(csv_err(&self.path))?;
        self.writer.flush().map_err(io_err(&self.path))
    }
}

/// Runs every scenario × method of `suite`.
pub fn run_suite(suite: &Suite, opts: &RunOptions) -> Result<SuiteOutcome, RunError> {
    suite.validate()?;
    let jobs: Vec<ResolvedScenario> = suite.scenarios.iter().map(|s| suite.resolve(s)).collect::<Result<_, _>>()?;
    let work: Vec<(&ResolvedScenario, Method)> = jobs.iter().flat_map(|sc| sc.methods.iter().map(move |m| (sc, *m))).collect();

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        if opts.write_traces {
            let traces = dir.join(TRACE_DIR);
            fs::create_dir_all(&traces).map_err(io_err(&traces))?;
        }
    }
    let partial = match &opts.out_dir {
        Some(dir) => Some(Mutex::new(PartialWriter::create(dir.join(PARTIAL_FILE))?)),
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build()?;
    let finished: Vec<Result<TrialOutcome, RunError>> = pool.install(|| {
        work.par_iter()
            .map(|(sc, method)| {
                let outcome = run_trial(sc, *method)?;
                if let Some(p) = &partial {
                    p.lock().expect("partial writer poisoned").push(&outcome.row)?;
                }
                Ok(outcome)
            })
            .collect()
    });

    let mut trials = Vec::with_capacity(finished.len());
    let mut errors = Vec::new();
    for r in finished {
        match r {
            Ok(t) => trials.push(t),
            Err(e) => errors.push(e),
        }
    }
    trials.sort_by(|a, b| (&a.row.scenario_id, Method::parse(&a.row.method)).cmp(&(&b.row.scenario_id, Method::parse(&b.row.method))));
    let rows: Vec<ResultRow> = trials.iter().map(|t| t.row.clone()).collect();
    let summary = results::summarize(&rows);

    if let Some(dir) = &opts.out_dir {
        write_outputs(dir, &trials, &rows, &summary, opts.write_traces)?;
        if errors.is_empty() {
            let p = dir.join(PARTIAL_FILE);
            drop(partial);
            fs::remove_file(&p).map_err(io_err(&p))?;
        }
    }
    Ok(SuiteOutcome { trials, summary, errors })
}

fn write_outputs(dir: &Path, trials: &[TrialOutcome], rows: &[ResultRow], summary: &[SummaryRow], traces: bool) -> Result<(), RunError> {
    let path = dir.join(RESULTS_FILE);
    let file = File::create(&path).map_err(io_err(&path))?;
    results::write_results(BufWriter::new(file), rows).map_err(csv_err(&path))?;

    let path = dir.join(SUMMARY_CSV);
    let file = File::create(&path).map_err(io_err(&path))?;
    results::write_summary_csv(BufWriter::new(file), summary).map_err(csv_err(&path))?;

    let path = dir.join(SUMMARY_JSON);
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;

    if traces {
        for t in trials {
            let path = dir.join(TRACE_DIR).join(format!("{}__{}.csv", t.row.scenario_id, t.row.method));
            let file = File::create(&path).map_err(io_err(&path))?;
            results::write_trace(BufWriter::new(file), &t.result.iteration_log).map_err(csv_err(&path))?;
        }
    }
    Ok(())
}
