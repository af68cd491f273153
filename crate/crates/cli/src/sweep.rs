//! The delay sweep: seeded trial batches per condition, artifacts on disk.
//!
//! Layout under the output directory, stable and documented:
//!
//! ```text
//! sweep.csv                 one row per delay condition
//! raster_legend.csv         outcome-code to color mapping
//! raster_d<label>.csv       per-condition raster, trials as rows
//! trials/<label>/<index>.trace         per-trial tick table
//! trials/<label>/<index>.changes.json  per-trial strategy-change log
//! ```
//!
//! `<label>` is the delay in seconds, `a-b` when asymmetric. Trials run
//! concurrently up to the worker count; every trial's seed is derived from
//! its (condition, index) position, never from scheduling order, so reruns
//! are byte-identical and reordering the delay list only permutes rows.

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use cpd_core::engine::{TrialError, TrialResult};
use cpd_core::metrics::{self, MetricsError, SweepRow};
use cpd_core::Scalar;

use crate::config::{BuildAgentError, ExperimentSpec, SpecError};

/// What a finished sweep hands back for display.
pub struct SweepOutcome<S> {
    pub rows: Vec<SweepRow<S>>,
    pub out_dir: PathBuf,
}

/// A sweep that could not start or finish.
#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("building the worker pool: {0}")]
    Workers(#[from] rayon::ThreadPoolBuildError),
    #[error("seat {seat} of condition {label}, trial {trial_index}: {source}")]
    Seat { seat: &'static str, label: String, trial_index: u64, source: BuildAgentError },
    #[error("condition {label}, trial {trial_index}: {source}")]
    Trial { label: String, trial_index: u64, source: TrialError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io { path: path.to_owned(), source }
}

/// Path-safe form of a delay condition: the single number when symmetric,
/// `a-b` otherwise.
pub fn condition_label<S: Scalar>(delay_a: S, delay_b: S) -> String {
    if delay_a == delay_b {
        format!("{delay_a}")
    } else {
        format!("{delay_a}-{delay_b}")
    }
}

/// Runs every condition of the experiment and writes all artifacts.
pub fn run_sweep<S: Scalar>(
    spec: &ExperimentSpec<S>,
    workers: Option<usize>,
) -> Result<SweepOutcome<S>, SweepError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build()?;

    std::fs::create_dir_all(&spec.out_dir).map_err(io_at(&spec.out_dir))?;
    let legend_path = spec.out_dir.join("raster_legend.csv");
    write_file(&legend_path, |w| metrics::write_raster_legend(w))?;

    let mut rows = Vec::with_capacity(spec.delays.len());
    for delay_index in 0..spec.delays.len() {
        let (delay_a, delay_b) = spec.delays[delay_index].pair();
        let label = condition_label(delay_a, delay_b);
        let trial_dir = spec.out_dir.join("trials").join(&label);
        std::fs::create_dir_all(&trial_dir).map_err(io_at(&trial_dir))?;

        let results: Vec<TrialResult<S>> = pool.install(|| {
            (0..spec.trials_per_delay)
                .into_par_iter()
                .map(|trial_index| run_one(spec, delay_index, trial_index, &label, &trial_dir))
                .collect::<Result<_, _>>()
        })?;

        let proportions = results
            .iter()
            .map(metrics::analysis_proportions)
            .collect::<Result<Vec<_>, _>>()?;
        let stats = metrics::aggregate(&proportions)?;
        rows.push(SweepRow { delay_a, delay_b, stats });

        let grid = metrics::raster(&results)?;
        let raster_path = spec.out_dir.join(format!("raster_d{label}.csv"));
        write_file(&raster_path, |w| grid.write_csv(w))?;
    }

    let sweep_path = spec.out_dir.join("sweep.csv");
    write_file(&sweep_path, |w| metrics::write_sweep_csv(w, &rows))?;
    Ok(SweepOutcome { rows, out_dir: spec.out_dir.clone() })
}

/// One seeded trial: build the seats, run, write the per-trial artifacts.
fn run_one<S: Scalar>(
    spec: &ExperimentSpec<S>,
    delay_index: usize,
    trial_index: u64,
    label: &str,
    trial_dir: &Path,
) -> Result<TrialResult<S>, SweepError> {
    let config = spec.trial_config(delay_index, trial_index);
    let seat = |seat, source| SweepError::Seat { seat, label: label.to_owned(), trial_index, source };
    let agent_a = spec.agent_a.build(&config).map_err(|e| seat("A", e))?;
    let agent_b = spec.agent_b.build(&config).map_err(|e| seat("B", e))?;
    let result = cpd_core::engine::run_trial(&config, agent_a.as_ref(), agent_b.as_ref())
        .map_err(|source| SweepError::Trial { label: label.to_owned(), trial_index, source })?;

    let trace_path = trial_dir.join(format!("{trial_index:04}.trace"));
    write_file(&trace_path, |w| result.write_trace(w))?;
    let changes_path = trial_dir.join(format!("{trial_index:04}.changes.json"));
    write_file(&changes_path, |w| result.write_change_log(w))?;
    Ok(result)
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), SweepError> {
    let file = File::create(path).map_err(io_at(path))?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|()| io::Write::flush(&mut out)).map_err(io_at(path))
}

/// The summary table printed after a sweep, mirroring the sweep CSV.
pub fn summary_table<S: Scalar>(rows: &[SweepRow<S>]) -> String {
    let mut table = format!(
        "{:>8}  {:>8}  {:>8}  {:>8}  {:>8}\n",
        "delay", "cc_mean", "dd_mean", "exploit", "trials",
    );
    for row in rows {
        let s = &row.stats;
        table.push_str(&format!(
            "{:>8}  {:>8.3}  {:>8.3}  {:>8.3}  {:>8}\n",
            row.delay_label(),
            s.cc_mean.as_f64(),
            s.dd_mean.as_f64(),
            s.exploit_mean.as_f64(),
            s.n_trials,
        ));
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment(json: &str) -> ExperimentSpec<f64> {
        serde_json::from_str(json).expect("experiment json")
    }

    fn cooperators(out_dir: &Path) -> ExperimentSpec<f64> {
        let mut spec = experiment(
            r#"{
                "delays": [0],
                "agent_a": {"kind": "always", "strategy": "C"},
                "agent_b": {"kind": "always", "strategy": "C"},
                "trials_per_delay": 1
            }"#,
        );
        spec.out_dir = out_dir.to_owned();
        spec
    }

    #[test]
    fn labels_collapse_symmetric_pairs() {
        assert_eq!(condition_label(5.0, 5.0), "5");
        assert_eq!(condition_label(0.0, 10.0), "0-10");
    }

    #[test]
    fn a_lone_cooperative_condition_sweeps_to_full_cooperation() {
        let dir = tempfile::tempdir().expect("tempdir");
        let spec = cooperators(dir.path());
        let outcome = run_sweep(&spec, Some(2)).expect("sweep");
        assert_eq!(outcome.rows.len(), 1);
        assert_eq!(outcome.rows[0].stats.cc_mean, 1.0);
        assert_eq!(outcome.rows[0].stats.n_trials, 1);
        for artifact in
            ["sweep.csv", "raster_legend.csv", "raster_d0.csv", "trials/0/0000.trace"]
        {
            assert!(dir.path().join(artifact).is_file(), "missing {artifact}");
        }
    }

    #[test]
    fn reruns_are_byte_identical_across_worker_counts() {
        let dir_a = tempfile::tempdir().expect("tempdir");
        let dir_b = tempfile::tempdir().expect("tempdir");
        let base = r#"{
            "delays": [0, 10],
            "agent_a": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1},
            "agent_b": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1},
            "trials_per_delay": 4,
            "base_seed": 7
        }"#;
        let mut first = experiment(base);
        first.out_dir = dir_a.path().to_owned();
        let mut again = experiment(base);
        again.out_dir = dir_b.path().to_owned();

        run_sweep(&first, Some(4)).expect("sweep");
        run_sweep(&again, Some(1)).expect("sweep");
        for artifact in ["sweep.csv", "raster_d0.csv", "raster_d10.csv", "trials/10/0003.trace"] {
            let bytes_a = std::fs::read(dir_a.path().join(artifact)).expect(artifact);
            let bytes_b = std::fs::read(dir_b.path().join(artifact)).expect(artifact);
            assert_eq!(bytes_a, bytes_b, "worker count changed the bytes of {artifact}");
        }
    }

    #[test]
    fn reordering_the_delay_list_permutes_rows_without_changing_values() {
        let dir_a = tempfile::tempdir().expect("tempdir");
        let dir_b = tempfile::tempdir().expect("tempdir");
        let base = r#"{
            "delays": [0, 10],
            "agent_a": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1},
            "agent_b": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1},
            "trials_per_delay": 4,
            "base_seed": 7
        }"#;
        let mut forward = experiment(base);
        forward.out_dir = dir_a.path().to_owned();
        let mut backward = experiment(base);
        backward.delays.reverse();
        backward.out_dir = dir_b.path().to_owned();

        let rows_forward = run_sweep(&forward, Some(2)).expect("sweep").rows;
        let rows_backward = run_sweep(&backward, Some(2)).expect("sweep").rows;
        assert_eq!(rows_forward[0], rows_backward[1]);
        assert_eq!(rows_forward[1], rows_backward[0]);
        // Per-condition artifacts are byte-identical wherever the condition sits.
        for artifact in ["raster_d10.csv", "trials/10/0000.trace"] {
            let bytes_a = std::fs::read(dir_a.path().join(artifact)).expect(artifact);
            let bytes_b = std::fs::read(dir_b.path().join(artifact)).expect(artifact);
            assert_eq!(bytes_a, bytes_b, "reordering changed the bytes of {artifact}");
        }
    }

    #[test]
    fn zero_trials_is_a_spec_error() {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut spec = cooperators(dir.path());
        spec.trials_per_delay = 0;
        assert!(matches!(run_sweep(&spec, None), Err(SweepError::Spec(SpecError::NoTrials))));
    }
}
