//! Outcome metrics: tail-window proportions per trial, their aggregation
//! across trials, and the CSV exports the sweep writes.
//!
//! Proportions are measured over the final `window` seconds of a trial, on
//! the grounds that the tail reflects where the interaction settled rather
//! than the opening transient. Cross-trial spread is reported as the
//! population standard deviation (divisor `n`, not `n - 1`); every CSV that
//! carries a `_std` column says so in a leading comment line.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::TrialResult;
use crate::model::{tick_multiple, OutcomeCode};
use crate::scalar::{from_f64, Scalar};

/// Shares of the tail window spent in mutual cooperation, mutual defection,
/// and one-sided exploitation (`DC` and `CD` pooled). The three always sum
/// to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowProportions<S> {
    pub cc: S,
    pub dd: S,
    pub exploit: S,
}

/// A metrics request that does not fit the trial it was made against.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("window must be a positive multiple of dt")]
    WindowNotMultiple,
    #[error("window of {window_ticks} ticks exceeds the {trial_ticks}-tick trial")]
    WindowExceedsTrial { window_ticks: u64, trial_ticks: u64 },
    #[error("cannot aggregate zero trials")]
    EmptyAggregate,
    #[error("cannot raster zero trials")]
    EmptyRaster,
    #[error("raster trials must share one configuration (seeds aside)")]
    MixedConfigs,
}

/// Outcome proportions over the final `window` seconds of a trial.
pub fn window_proportions<S: Scalar>(
    trial: &TrialResult<S>,
    window: S,
) -> Result<WindowProportions<S>, MetricsError> {
    let window_ticks = match tick_multiple(window, trial.config.dt) {
        Some(k) if k >= 1 => k,
        _ => return Err(MetricsError::WindowNotMultiple),
    };
    let trial_ticks = trial.outcomes.len() as u64;
    if window_ticks > trial_ticks {
        return Err(MetricsError::WindowExceedsTrial { window_ticks, trial_ticks });
    }
    let tail = &trial.outcomes[(trial_ticks - window_ticks) as usize..];
    let mut counts = [0u64; 3];
    for outcome in tail {
        let slot = match outcome {
            OutcomeCode::Cc => 0,
            OutcomeCode::Dd => 1,
            OutcomeCode::Dc | OutcomeCode::Cd => 2,
        };
        counts[slot] += 1;
    }
    let denom = from_f64::<S>(window_ticks as f64);
    let share = |count: u64| from_f64::<S>(count as f64) / denom;
    Ok(WindowProportions { cc: share(counts[0]), dd: share(counts[1]), exploit: share(counts[2]) })
}

/// Proportions over the window the trial was configured with.
pub fn analysis_proportions<S: Scalar>(
    trial: &TrialResult<S>,
) -> Result<WindowProportions<S>, MetricsError> {
    window_proportions(trial, trial.config.analysis_window)
}

/// Mean and population standard deviation of each proportion over a batch
/// of trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionStats<S> {
    pub cc_mean: S,
    pub cc_std: S,
    pub dd_mean: S,
    pub dd_std: S,
    pub exploit_mean: S,
    pub exploit_std: S,
    pub n_trials: usize,
}

// Two-pass population variance: the one-pass E[x^2] - E[x]^2 form loses
// all significance when the values barely vary, e.g. identical trials.
fn mean_and_pop_std<S: Scalar>(values: impl Iterator<Item = S> + Clone, n: usize) -> (S, S) {
    let denom = from_f64::<S>(n as f64);
    let mean = values.clone().fold(S::zero(), |acc, v| acc + v) / denom;
    let variance =
        values.fold(S::zero(), |acc, v| acc + (v - mean) * (v - mean)) / denom;
    (mean, variance.sqrt())
}

/// Aggregates per-trial proportions. Errors on an empty batch.
pub fn aggregate<S: Scalar>(
    proportions: &[WindowProportions<S>],
) -> Result<ProportionStats<S>, MetricsError> {
    if proportions.is_empty() {
        return Err(MetricsError::EmptyAggregate);
    }
    let n = proportions.len();
    let (cc_mean, cc_std) = mean_and_pop_std(proportions.iter().map(|p| p.cc), n);
    let (dd_mean, dd_std) = mean_and_pop_std(proportions.iter().map(|p| p.dd), n);
    let (exploit_mean, exploit_std) = mean_and_pop_std(proportions.iter().map(|p| p.exploit), n);
    Ok(ProportionStats { cc_mean, cc_std, dd_mean, dd_std, exploit_mean, exploit_std, n_trials: n })
}

/// Outcome raster of a batch: one row per trial, one column per tick.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterGrid {
    pub ticks: usize,
    pub rows: Vec<Vec<OutcomeCode>>,
}

/// Builds the raster for a batch of trials sharing one configuration
/// (seeds excepted, since batch trials differ exactly in their seeds).
pub fn raster<S: Scalar>(trials: &[TrialResult<S>]) -> Result<RasterGrid, MetricsError> {
    let first = trials.first().ok_or(MetricsError::EmptyRaster)?;
    let reference = { let mut c = first.config; c.seed = 0; c };
    let ticks = first.outcomes.len();
    let mut rows = Vec::with_capacity(trials.len());
    for trial in trials {
        let shape = { let mut c = trial.config; c.seed = 0; c };
        if shape != reference || trial.outcomes.len() != ticks {
            return Err(MetricsError::MixedConfigs);
        }
        rows.push(trial.outcomes.clone());
    }
    Ok(RasterGrid { ticks, rows })
}

impl RasterGrid {
    /// Writes the raster as CSV: a `trial` index column then one outcome
    /// code per tick. Pair with [`write_raster_legend`] for the color key.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "trial")?;
        for tick in 0..self.ticks {
            write!(w, ",t{tick}")?;
        }
        writeln!(w)?;
        for (index, row) in self.rows.iter().enumerate() {
            write!(w, "{index}")?;
            for outcome in row {
                write!(w, ",{outcome}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Color key for raster plots: cooperation in green, defection in red, and
/// the two one-sided outcomes in warning hues keyed to who defected.
pub fn write_raster_legend<W: Write>(mut w: W) -> io::Result<()> {
    writeln!(w, "code,color")?;
    for (code, color) in
        [(OutcomeCode::Cc, "green"), (OutcomeCode::Dd, "red"), (OutcomeCode::Dc, "orange"), (OutcomeCode::Cd, "yellow")]
    {
        writeln!(w, "{code},{color}")?;
    }
    Ok(())
}

/// One sweep point: the delay pair and the aggregated proportions there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<S> {
    pub delay_a: S,
    pub delay_b: S,
    pub stats: ProportionStats<S>,
}

impl<S: Scalar> SweepRow<S> {
    /// Display label for the delay pair: the single number when symmetric,
    /// `a/b` otherwise.
    pub fn delay_label(&self) -> String {
        if self.delay_a == self.delay_b {
            format!("{}", self.delay_a)
        } else {
            format!("{}/{}", self.delay_a, self.delay_b)
        }
    }
}

/// Writes the sweep summary CSV, one row per delay point.
pub fn write_sweep_csv<S: Scalar, W: Write>(mut w: W, rows: &[SweepRow<S>]) -> io::Result<()> {
    writeln!(w, "# std columns: population standard deviation (divisor n)")?;
    writeln!(w, "delay,cc_mean,cc_std,dd_mean,dd_std,exploit_mean,exploit_std,n_trials")?;
    for row in rows {
        let s = &row.stats;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.delay_label(),
            s.cc_mean,
            s.cc_std,
            s.dd_mean,
            s.dd_std,
            s.exploit_mean,
            s.exploit_std,
            s.n_trials
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::TrialConfig;

    fn trial_with(outcomes: Vec<OutcomeCode>) -> TrialResult<f64> {
        let config = TrialConfig::<f64>::default();
        let mut a = 0.0;
        let mut b = 0.0;
        for o in &outcomes {
            let (pa, pb) = config.payoffs.payoffs(*o);
            a += pa;
            b += pb;
        }
        TrialResult { config, outcomes, final_rewards: (a, b), change_log: vec![] }
    }

    fn blocks(spec: &[(OutcomeCode, usize)]) -> Vec<OutcomeCode> {
        spec.iter().flat_map(|&(code, n)| vec![code; n]).collect()
    }

    #[test]
    fn proportions_count_only_the_tail_window() {
        use OutcomeCode::*;
        // 40 ticks of DD noise, then a tail of 8 CC, 6 DD, 4 DC, 2 CD.
        let trial =
            trial_with(blocks(&[(Dd, 40), (Cc, 8), (Dd, 6), (Dc, 4), (Cd, 2)]));
        let p = window_proportions(&trial, 20.0).unwrap();
        assert_eq!(p.cc, 8.0 / 20.0);
        assert_eq!(p.dd, 6.0 / 20.0);
        assert_eq!(p.exploit, 6.0 / 20.0);

        let full = window_proportions(&trial, 60.0).unwrap();
        assert_eq!(full.cc, 8.0 / 60.0);
        assert_eq!(full.dd, 46.0 / 60.0);
        assert_eq!(full.exploit, 6.0 / 60.0);

        let configured = analysis_proportions(&trial).unwrap();
        assert_eq!(configured, p);
    }

    #[test]
    fn window_requests_are_checked() {
        let trial = trial_with(blocks(&[(OutcomeCode::Cc, 60)]));
        assert_eq!(window_proportions(&trial, 0.0).unwrap_err(), MetricsError::WindowNotMultiple);
        assert_eq!(window_proportions(&trial, 7.5).unwrap_err(), MetricsError::WindowNotMultiple);
        assert_eq!(
            window_proportions(&trial, 61.0).unwrap_err(),
            MetricsError::WindowExceedsTrial { window_ticks: 61, trial_ticks: 60 }
        );
    }

    #[test]
    fn aggregate_means_and_population_std_by_hand() {
        let items: Vec<WindowProportions<f64>> = vec![
            WindowProportions { cc: 0.2, dd: 0.5, exploit: 0.3 },
            WindowProportions { cc: 0.4, dd: 0.5, exploit: 0.1 },
        ];
        let stats = aggregate(&items).unwrap();
        assert_eq!(stats.n_trials, 2);
        assert!((stats.cc_mean - 0.3).abs() < 1e-12);
        // Population std of {0.2, 0.4} is 0.1 (the sample std would be
        // ~0.1414).
        assert!((stats.cc_std - 0.1).abs() < 1e-12);
        assert!((stats.dd_mean - 0.5).abs() < 1e-12);
        assert!(stats.dd_std.abs() < 1e-12);
        assert!((stats.exploit_mean - 0.2).abs() < 1e-12);
        assert!((stats.exploit_std - 0.1).abs() < 1e-12);

        assert_eq!(aggregate::<f64>(&[]).unwrap_err(), MetricsError::EmptyAggregate);
    }

    #[test]
    fn raster_rows_mirror_trial_outcomes() {
        use OutcomeCode::*;
        let config = TrialConfig { trial_duration: 3.0, analysis_window: 2.0, ..TrialConfig::<f64>::default() };
        let mk = |outcomes: Vec<OutcomeCode>, seed: u64| TrialResult {
            config: TrialConfig { seed, ..config },
            outcomes,
            final_rewards: (0.0, 0.0),
            change_log: vec![],
        };
        let trials = vec![mk(vec![Cc, Dc, Dd], 1), mk(vec![Cd, Cc, Cc], 2)];
        let grid = raster(&trials).unwrap();
        assert_eq!(grid.ticks, 3);
        assert_eq!(grid.rows.len(), 2);

        let mut csv = Vec::new();
        grid.write_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "trial,t0,t1,t2\n0,CC,DC,DD\n1,CD,CC,CC\n"
        );

        let mut legend = Vec::new();
        write_raster_legend(&mut legend).unwrap();
        assert_eq!(
            String::from_utf8(legend).unwrap(),
            "code,color\nCC,green\nDD,red\nDC,orange\nCD,yellow\n"
        );

        assert_eq!(raster::<f64>(&[]).unwrap_err(), MetricsError::EmptyRaster);
        let mismatched = vec![
            mk(vec![Cc, Dc, Dd], 1),
            TrialResult {
                config: TrialConfig { dt: 0.5, seed: 2, ..config },
                outcomes: vec![Cc, Cc, Cc],
                final_rewards: (0.0, 0.0),
                change_log: vec![],
            },
        ];
        assert_eq!(raster(&mismatched).unwrap_err(), MetricsError::MixedConfigs);
    }

    #[test]
    fn sweep_csv_labels_delays_and_declares_the_estimator() {
        let stats = ProportionStats {
            cc_mean: 0.5,
            cc_std: 0.25,
            dd_mean: 0.25,
            dd_std: 0.0,
            exploit_mean: 0.25,
            exploit_std: 0.25,
            n_trials: 4,
        };
        let rows = vec![
            SweepRow { delay_a: 5.0, delay_b: 5.0, stats },
            SweepRow { delay_a: 0.0, delay_b: 10.0, stats },
        ];
        let mut csv = Vec::new();
        write_sweep_csv(&mut csv, &rows).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('#') && lines[0].contains("population"));
        assert_eq!(lines[1], "delay,cc_mean,cc_std,dd_mean,dd_std,exploit_mean,exploit_std,n_trials");
        assert_eq!(lines[2], "5,0.5,0.25,0.25,0,0.25,0.25,4");
        assert_eq!(lines[3], "0/10,0.5,0.25,0.25,0,0.25,0.25,4");
    }

    proptest! {
        /// The three proportions are each in [0, 1] and sum to 1 for any
        /// outcome tail and any valid window.
        #[test]
        fn proportions_partition_the_window(
            outcomes in proptest::collection::vec(
                prop_oneof![
                    Just(OutcomeCode::Cc),
                    Just(OutcomeCode::Dd),
                    Just(OutcomeCode::Dc),
                    Just(OutcomeCode::Cd)
                ],
                1..=120
            ),
            window_fraction in 0.01f64..=1.0
        ) {
            let n = outcomes.len();
            let config = TrialConfig::<f64> {
                trial_duration: n as f64,
                analysis_window: n as f64,
                memory_horizon: 15.0,
                ..TrialConfig::default()
            };
            let trial = TrialResult {
                config,
                outcomes,
                final_rewards: (0.0, 0.0),
                change_log: vec![],
            };
            let window = (window_fraction * n as f64).ceil().max(1.0);
            let p = window_proportions(&trial, window).unwrap();
            prop_assert!(p.cc >= 0.0 && p.cc <= 1.0);
            prop_assert!(p.dd >= 0.0 && p.dd <= 1.0);
            prop_assert!(p.exploit >= 0.0 && p.exploit <= 1.0);
            prop_assert!((p.cc + p.dd + p.exploit - 1.0).abs() < 1e-12);
        }

        /// Aggregated means stay inside the per-trial min/max envelope and
        /// stds are non-negative.
        #[test]
        fn aggregate_stays_in_envelope(
            raw in proptest::collection::vec((0u8..=20, 0u8..=20, 0u8..=20), 1..40)
        ) {
            let items: Vec<WindowProportions<f64>> = raw
                .iter()
                .map(|&(a, b, c)| {
                    let total = (a as f64 + b as f64 + c as f64).max(1.0);
                    WindowProportions {
                        cc: a as f64 / total,
                        dd: b as f64 / total,
                        exploit: c as f64 / total,
                    }
                })
                .collect();
            let stats = aggregate(&items).unwrap();
            let min = items.iter().map(|p| p.cc).fold(f64::INFINITY, f64::min);
            let max = items.iter().map(|p| p.cc).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(stats.cc_mean >= min - 1e-12 && stats.cc_mean <= max + 1e-12);
            prop_assert!(stats.cc_std >= 0.0);
            prop_assert!(stats.dd_std >= 0.0);
            prop_assert!(stats.exploit_std >= 0.0);
            prop_assert_eq!(stats.n_trials, items.len());
        }
    }
}
