use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tacman_harness::plotdata::{emit_plotdata, PlotKind};
use tacman_harness::runner::{run_suite, RunOptions, RESULTS_FILE};
use tacman_harness::scenarios;
use tacman_harness::schema::{Method, Scenario, Suite};
use tacman_harness::sweep::{sweep_grasp_force, write_sweep};

#[derive(Parser)]
#[command(name = "tacman", version, about = "Tactile manipulation benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario and method of a suite file.
    Run {
        suite: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Master seed, overriding the suite file.
        #[arg(long, env = "TACMAN_SEED")]
        seed: Option<u64>,
        /// Skip per-trial trace files.
        #[arg(long)]
        no_traces: bool,
    },
    /// Run one scenario with the tactile controller at several grasp depths.
    Sweep {
        scenario: PathBuf,
        /// Grasp depths in millimeters.
        #[arg(long, value_delimiter = ',', required = true)]
        depths: Vec<f64>,
        #[arg(long, env = "TACMAN_SEED", default_value_t = 0)]
        seed: u64,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a results, sweep or trace file into plot-ready rows.
    Plotdata {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a suite of random playboards of one Bézier order.
    GenPlayboards {
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "tacman,preplanned,compliant")]
        methods: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one of the built-in suites.
    GenSuite {
        #[arg(long, value_enum, default_value = "default")]
        kind: SuiteKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteKind {
    Default,
    Quartet,
    RadiusError,
    Misaligned,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_suite(suite: &Suite, out: &Option<PathBuf>) -> Result<()> {
    let mut w = output(out)?;
    writeln!(w, "{}", suite.to_json())?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            suite,
            out,
            jobs,
            seed,
            no_traces,
        } => {
            let mut suite = Suite::load(&suite)?;
            if let Some(seed) = seed {
                suite.master_seed = seed;
            }
            let opts = RunOptions {
                jobs,
                out_dir: Some(out.clone()),
                write_traces: !no_traces,
            };
            let outcome = run_suite(&suite, &opts)?;
            println!("{:<24} {:<11} {:>4} {:>9} {:>9}", "class", "method", "n", "mean", "std");
            for s in &outcome.summary {
                println!("{:<24} {:<11} {:>4} {:>9.3} {:>9.3}", s.class, s.method, s.n, s.mean_sr_w_pct, s.std_sr_w_pct);
            }
            println!("{} trials written to {}", outcome.trials.len(), out.join(RESULTS_FILE).display());
            for e in &outcome.errors {
                eprintln!("error: {e}");
            }
            if !outcome.all_completed() {
                bail!("{} trials did not complete", outcome.errors.len());
            }
        }
        Command::Sweep { scenario, depths, seed, out } => {
            let text = fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let scenario = Scenario::from_json(&text)?;
            let rows = sweep_grasp_force(&Suite::empty(seed), &scenario, &depths)?;
            write_sweep(output(&out)?, &rows)?;
        }
        Command::Plotdata { input, kind, out } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            emit_plotdata(file, kind, output(&out)?)?;
        }
        Command::GenPlayboards {
            order,
            count,
            seed,
            methods,
            out,
        } => {
            let methods: Vec<Method> = methods
                .iter()
                .map(|m| Method::parse(m).with_context(|| format!("unknown method {m}")))
                .collect::<Result<_>>()?;
            let mut suite = Suite::empty(seed);
            suite.scenarios = scenarios::playboards(order, count, seed, &methods).map_err(anyhow::Error::msg)?;
            write_suite(&suite, &out)?;
        }
        Command::GenSuite { kind, seed, out } => {
            let suite = match kind {
                SuiteKind::Default => scenarios::default_suite(seed),
                SuiteKind::Quartet => scenarios::quartet_suite(seed),
                SuiteKind::RadiusError => scenarios::radius_error_suite(seed),
                SuiteKind::Misaligned => scenarios::misaligned_drawer_suite(seed, 20.0),
            };
            write_suite(&suite, &out)?;
        }
    }
    Ok(())
}
