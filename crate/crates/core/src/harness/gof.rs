//! The two-sample test: mix pairs, fit the shared kernel once, then
//! compute `K` statistics on reshuffled pairings.

use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{em_fit_null_with, EmReport};
use crate::error::{Error, Result};
use crate::gs::{gs_statistic_with, GSResult};
use crate::harness::config::TestConfig;
use crate::rng::{self, Domain};
use crate::sequence::{merge_sequences, EventSequence, LabeledSequence};
use crate::theta::ThetaNull;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    /// Indices into `D2` (and the shuffled `D1`) used by this trial.
    pub sample: Vec<usize>,
    pub result: Option<GSResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TestConfig,
    pub null_fit: EmReport<ThetaNull>,
    pub trials: Vec<TrialResult>,
    pub wall_time_secs: f64,
}

impl RunReport {
    /// Statistics of the successful trials in trial order.
    pub fn statistics(&self) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.result.as_ref().map(|r| r.statistic)).collect()
    }

    pub fn rejection_rate(&self) -> f64 {
        let ok: Vec<_> = self.trials.iter().filter_map(|t| t.result.as_ref()).collect();
        ok.iter().filter(|r| r.reject).count() as f64 / ok.len().max(1) as f64
    }
}

/// Pairs `D1[i]` with `D2[i]` and merges them.
pub fn mix_pairs(d1: &[EventSequence], d2: &[EventSequence]) -> Result<Vec<LabeledSequence>> {
    if d1.len() != d2.len() {
        return Err(Error::DimensionMismatch { expected: d1.len(), got: d2.len() });
    }
    d1.par_iter().zip(d2).map(|(a, b)| merge_sequences(a, b)).collect()
}

/// One trial: a seeded Fisher-Yates shuffle of `D1`'s order, re-merge, and
/// `N` pairs drawn without replacement.
pub fn trial_sample(d1: &[EventSequence], d2: &[EventSequence], n: usize, seed: u64, trial: usize) -> Result<(Vec<usize>, Vec<LabeledSequence>)> {
    let mut rng = rng::stream(seed, Domain::Shuffle, trial as u64);
    let mut order: Vec<usize> = (0..d1.len()).collect();
    order.shuffle(&mut rng);
    let picked = index::sample(&mut rng, d2.len(), n).into_vec();
    let merged = picked.iter().map(|&j| merge_sequences(&d1[order[j]], &d2[j])).collect::<Result<Vec<_>>>()?;
    Ok((picked, merged))
}

/// Runs `cfg.k` trials against an already fitted null. Trials run in
/// parallel; each owns the stream `(cfg.seed, Shuffle, trial)`.
pub fn run_trials(d1: &[EventSequence], d2: &[EventSequence], cfg: &TestConfig, theta: &ThetaNull) -> Result<Vec<TrialResult>> {
    if d1.len() < cfg.n || d2.len() < cfg.n {
        return Err(Error::InsufficientSequences { needed: cfg.n, have: d1.len().min(d2.len()) });
    }
    (0..cfg.k)
        .into_par_iter()
        .map(|k| {
            let (sample, seqs) = trial_sample(d1, d2, cfg.n, cfg.seed, k)?;
            Ok(match gs_statistic_with(theta, &seqs, cfg.level, &cfg.gs) {
                Ok(r) => TrialResult { trial: k, sample, result: Some(r), error: None },
                Err(e) => TrialResult { trial: k, sample, result: None, error: Some(e.to_string()) },
            })
        })
        .collect()
}

/// Mixes all pairs, fits the null once on them, then runs the trials.
pub fn run_gof(d1: &[EventSequence], d2: &[EventSequence], cfg: &TestConfig) -> Result<RunReport> {
    let start = Instant::now();
    cfg.validate()?;
    let grid = cfg.grid()?;
    if d1.len() < cfg.n || d2.len() < cfg.n {
        return Err(Error::InsufficientSequences { needed: cfg.n, have: d1.len().min(d2.len()) });
    }
    let merged = mix_pairs(d1, d2)?;
    let null_fit = em_fit_null_with(&merged, &grid, &cfg.em)?;
    drop(merged);
    let trials = run_trials(d1, d2, cfg, &null_fit.theta)?;
    Ok(RunReport { config: cfg.clone(), null_fit, trials, wall_time_secs: start.elapsed().as_secs_f64() })
}
