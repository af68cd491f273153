//! One trial with full artifacts: trace, change log, window proportions.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use cpd_core::engine::{run_trial, TrialError, TrialResult};
use cpd_core::metrics::{analysis_proportions, MetricsError, WindowProportions};
use cpd_core::Scalar;

use crate::config::{BuildAgentError, ExperimentSpec, SpecError};

/// What one finished trial hands back for display.
#[derive(Debug)]
pub struct SingleOutcome<S: Scalar> {
    pub result: TrialResult<S>,
    pub proportions: WindowProportions<S>,
    pub out_dir: PathBuf,
}

/// A single trial that could not start or finish.
#[derive(Debug, Error)]
pub enum SingleError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("delay index {index} out of range, experiment has {len} conditions")]
    DelayIndex { index: usize, len: usize },
    #[error("seat {seat}: {source}")]
    Seat { seat: &'static str, source: BuildAgentError },
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Runs the trial at `(delay_index, trial_index)` of the experiment and
/// writes `trial.trace`, `trial.changes.json`, and `trial.proportions.json`
/// into `out_dir`.
pub fn run_single<S: Scalar>(
    spec: &ExperimentSpec<S>,
    delay_index: usize,
    trial_index: u64,
    out_dir: &Path,
) -> Result<SingleOutcome<S>, SingleError> {
    spec.validate()?;
    if delay_index >= spec.delays.len() {
        return Err(SingleError::DelayIndex { index: delay_index, len: spec.delays.len() });
    }
    let config = spec.trial_config(delay_index, trial_index);
    let agent_a =
        spec.agent_a.build(&config).map_err(|source| SingleError::Seat { seat: "A", source })?;
    let agent_b =
        spec.agent_b.build(&config).map_err(|source| SingleError::Seat { seat: "B", source })?;
    let result = run_trial(&config, agent_a.as_ref(), agent_b.as_ref())?;
    let proportions = analysis_proportions(&result)?;
    write_artifacts(&result, &proportions, out_dir)?;
    Ok(SingleOutcome { result, proportions, out_dir: out_dir.to_owned() })
}

/// Writes the standard per-trial artifact set for an already-run trial.
pub fn write_artifacts<S: Scalar>(
    result: &TrialResult<S>,
    proportions: &WindowProportions<S>,
    out_dir: &Path,
) -> Result<(), SingleError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| SingleError::Io { path: out_dir.to_owned(), source })?;
    write_file(&out_dir.join("trial.trace"), |w| result.write_trace(w))?;
    write_file(&out_dir.join("trial.changes.json"), |w| result.write_change_log(w))?;
    write_file(&out_dir.join("trial.proportions.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, proportions)?;
        writeln!(w)
    })?;
    Ok(())
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), SingleError> {
    let io_at = |source| SingleError::Io { path: path.to_owned(), source };
    let file = File::create(path).map_err(io_at)?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|()| out.flush()).map_err(io_at)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment(json: &str) -> ExperimentSpec<f64> {
        serde_json::from_str(json).expect("experiment json")
    }

    #[test]
    fn a_delayed_exploitation_trial_writes_its_oracle_artifacts() {
        let dir = tempfile::tempdir().expect("tempdir");
        let spec = experiment(
            r#"{
                "delays": [5],
                "agent_a": {"kind": "always", "strategy": "D"},
                "agent_b": {"kind": "always", "strategy": "C"}
            }"#,
        );
        let outcome = run_single(&spec, 0, 0, dir.path()).expect("trial");
        assert_eq!(outcome.result.final_rewards, (290.0, 15.0));

        let trace = std::fs::read_to_string(dir.path().join("trial.trace")).expect("trace");
        assert!(trace.ends_with("# final_rewards,290,15\n"));
        let proportions: WindowProportions<f64> = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("trial.proportions.json")).expect("file"),
        )
        .expect("proportions json");
        assert_eq!(proportions, outcome.proportions);
        assert_eq!(proportions.exploit, 1.0, "tail of the trial is all DC");
    }

    #[test]
    fn rerunning_the_same_position_is_byte_identical() {
        let dir_a = tempfile::tempdir().expect("tempdir");
        let dir_b = tempfile::tempdir().expect("tempdir");
        let spec = experiment(
            r#"{
                "delays": [10],
                "agent_a": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1},
                "agent_b": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1},
                "base_seed": 11
            }"#,
        );
        run_single(&spec, 0, 2, dir_a.path()).expect("trial");
        run_single(&spec, 0, 2, dir_b.path()).expect("trial");
        for artifact in ["trial.trace", "trial.changes.json", "trial.proportions.json"] {
            let bytes_a = std::fs::read(dir_a.path().join(artifact)).expect(artifact);
            let bytes_b = std::fs::read(dir_b.path().join(artifact)).expect(artifact);
            assert_eq!(bytes_a, bytes_b, "{artifact} differs across reruns");
        }
    }

    #[test]
    fn a_delay_index_past_the_list_is_reported() {
        let dir = tempfile::tempdir().expect("tempdir");
        let spec = experiment(
            r#"{
                "delays": [0],
                "agent_a": {"kind": "tit_for_tat"},
                "agent_b": {"kind": "tit_for_tat"}
            }"#,
        );
        let error = run_single(&spec, 3, 0, dir.path()).expect_err("out of range");
        assert!(matches!(error, SingleError::DelayIndex { index: 3, len: 1 }));
    }
}
