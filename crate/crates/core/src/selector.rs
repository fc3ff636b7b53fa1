//! Iterative three-stage greedy selection.
//!
//! Every iteration narrows the remaining pool in three steps:
//!
//! 1. **global**: take the `k1` samples with the lowest redundancy score π;
//! 2. **coarse**: rescore those against the already selected buffer, write the
//!    new scores back into π and keep the `k2` lowest;
//! 3. **fine**: grow a local block greedily, each time adding the candidate
//!    whose concatenation with the block compresses worst, up to `k3` picks or
//!    until the budget is met.
//!
//! Scores of samples that are not rescored keep their last value. All ties
//! break on `source_index`, and parallel scoring is reduced in a fixed order,
//! so the output does not depend on the worker count.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compressor::{self, CodecConfig, CodecError, PrimedContext, RatioScore, SEPARATOR};
use crate::corpus::{budget_weight, BudgetSpec, BudgetUnit, Pool, Sample};

pub const DEFAULT_K1: usize = 10_000;
pub const DEFAULT_K2: usize = 200;
pub const DEFAULT_K3: usize = 100;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("pool is empty")]
    EmptyPool,
    #[error("sample {id:?} has an empty payload")]
    EmptyPayload { id: String },
    #[error("pool exhausted")]
    PoolExhausted,
    #[error("invalid selector config: {0}")]
    Config(String),
    #[error("internal invariant breach: {0}")]
    Invariant(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub budget: BudgetSpec,
    pub codec: CodecConfig,
    pub threads: usize,
    /// Prepend the selected buffer to the local block during the fine stage.
    #[serde(default)]
    pub fine_with_selected: bool,
}

impl SelectorConfig {
    pub fn new(budget: BudgetSpec) -> Self {
        Self {
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            k3: DEFAULT_K3,
            budget,
            codec: CodecConfig::default(),
            threads: 1,
            fine_with_selected: false,
        }
    }

    pub fn with_ks(mut self, k1: usize, k2: usize, k3: usize) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        if self.k1 == 0 || self.k2 == 0 || self.k3 == 0 {
            return Err(SelectError::Config("k1, k2 and k3 must be >= 1".into()));
        }
        if !(self.k3 <= self.k2 && self.k2 <= self.k1) {
            return Err(SelectError::Config(format!(
                "expected k3 <= k2 <= k1, got k1={} k2={} k3={}",
                self.k1, self.k2, self.k3
            )));
        }
        if self.threads == 0 {
            return Err(SelectError::Config("threads must be >= 1".into()));
        }
        if self.budget.amount == 0 {
            return Err(SelectError::Config("budget amount must be >= 1".into()));
        }
        self.codec.validate()?;
        Ok(())
    }
}

/// Budget consumed so far, tracked in every unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spent {
    pub samples: u64,
    pub bytes: u64,
    pub tokens: u64,
}

impl Spent {
    pub fn get(&self, unit: BudgetUnit) -> u64 {
        match unit {
            BudgetUnit::Samples => self.samples,
            BudgetUnit::Bytes => self.bytes,
            BudgetUnit::Tokens => self.tokens,
        }
    }

    fn add(&mut self, sample: &Sample) {
        self.samples += budget_weight(sample, BudgetUnit::Samples);
        self.bytes += budget_weight(sample, BudgetUnit::Bytes);
        self.tokens += budget_weight(sample, BudgetUnit::Tokens);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub selected: usize,
    pub set_ratio: f64,
    pub wall_time_secs: f64,
}

/// Ordered result of a selection run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub ids: Vec<String>,
    pub indices: Vec<usize>,
    pub buffer: Vec<u8>,
    pub spent: Spent,
    pub trajectory: Vec<IterationRecord>,
    pub final_ratio: Option<RatioScore>,
    /// The pool ran out before the budget was met.
    pub exhausted: bool,
}

impl Selection {
    pub fn push(&mut self, sample: &Sample) {
        if !self.buffer.is_empty() {
            self.buffer.push(SEPARATOR);
        }
        self.buffer.extend_from_slice(&sample.payload);
        self.ids.push(sample.id.clone());
        self.indices.push(sample.source_index);
        self.spent.add(sample);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Rebuilds a selection from pool indices (e.g. when reading a manifest).
    pub fn from_indices(pool: &Pool, indices: &[usize]) -> Self {
        let mut sel = Selection::default();
        for &i in indices {
            sel.push(pool.get(i));
        }
        sel
    }

    pub fn finalize(&mut self, codec: &CodecConfig) -> Result<(), CodecError> {
        self.final_ratio = if self.buffer.is_empty() {
            None
        } else {
            Some(compressor::ratio_of(&self.buffer, codec)?)
        };
        Ok(())
    }
}

fn by_score_then_index(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` entries with the lowest (score, index), in that order.
pub(crate) fn lowest_k(mut scored: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| by_score_then_index(*a, *b);
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored.into_iter().map(|(_, i)| i).collect()
}

fn build_workers(threads: usize) -> Result<rayon::ThreadPool, SelectError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SelectError::Config(format!("cannot build worker pool: {e}")))
}

/// Redundancy state π plus the selection in progress.
pub struct RedundancyState<'p> {
    pool: &'p Pool,
    config: SelectorConfig,
    scores: Vec<f64>,
    in_remaining: Vec<bool>,
    remaining: usize,
    selection: Selection,
    workers: rayon::ThreadPool,
}

/// Scores every sample by its standalone compression ratio.
pub fn init_state<'p>(
    pool: &'p Pool,
    config: SelectorConfig,
) -> Result<RedundancyState<'p>, SelectError> {
    config.validate()?;
    if pool.is_empty() {
        return Err(SelectError::EmptyPool);
    }
    if let Some(s) = pool.samples().iter().find(|s| s.payload.is_empty()) {
        return Err(SelectError::EmptyPayload { id: s.id.clone() });
    }
    let workers = build_workers(config.threads)?;
    let codec = config.codec;
    let scores = workers.install(|| {
        pool.samples()
            .par_iter()
            .map(|s| compressor::ratio_of(&s.payload, &codec).map(|r| r.ratio))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(RedundancyState::assemble(pool, config, scores, workers))
}

impl<'p> RedundancyState<'p> {
    /// State with caller supplied scores (indexed by `source_index`).
    pub fn from_scores(
        pool: &'p Pool,
        config: SelectorConfig,
        scores: Vec<f64>,
    ) -> Result<Self, SelectError> {
        config.validate()?;
        if pool.is_empty() {
            return Err(SelectError::EmptyPool);
        }
        if scores.len() != pool.len() {
            return Err(SelectError::Config(format!(
                "{} scores for a pool of {}",
                scores.len(),
                pool.len()
            )));
        }
        let workers = build_workers(config.threads)?;
        Ok(Self::assemble(pool, config, scores, workers))
    }

    fn assemble(
        pool: &'p Pool,
        config: SelectorConfig,
        scores: Vec<f64>,
        workers: rayon::ThreadPool,
    ) -> Self {
        Self {
            pool,
            config,
            scores,
            in_remaining: vec![true; pool.len()],
            remaining: pool.len(),
            selection: Selection::default(),
            workers,
        }
    }

    pub fn config(&self) -> &SelectorConfig {
        &self.config
    }

    pub fn pool(&self) -> &'p Pool {
        self.pool
    }

    pub fn score_at(&self, index: usize) -> f64 {
        self.scores[index]
    }

    pub fn score(&self, id: &str) -> Option<f64> {
        self.pool.index_of(id).map(|i| self.scores[i])
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn is_remaining(&self, index: usize) -> bool {
        self.in_remaining[index]
    }

    pub fn remaining_len(&self) -> usize {
        self.remaining
    }

    pub fn selection(&self) -> &Selection {
        &self.selection
    }

    pub fn into_selection(self) -> Selection {
        self.selection
    }

    pub fn budget_met(&self) -> bool {
        self.selection.spent.get(self.config.budget.unit) >= self.config.budget.amount
    }

    /// Ratio of each candidate appended to `context`, in candidate order.
    fn score_against(&self, context: &[u8], candidates: &[usize]) -> Result<Vec<f64>, CodecError> {
        let primed = PrimedContext::new(context, &self.config.codec);
        let pool = self.pool;
        self.workers.install(|| {
            candidates
                .par_iter()
                .map(|&i| primed.joint_ratio(&pool.get(i).payload).map(|r| r.ratio))
                .collect()
        })
    }

    fn take(&mut self, index: usize) {
        debug_assert!(self.in_remaining[index]);
        self.in_remaining[index] = false;
        self.remaining -= 1;
        self.selection.push(self.pool.get(index));
    }

    /// Global stage: the `k1` remaining samples with the lowest π.
    pub fn global_stage(&self, k1: usize) -> Result<Vec<usize>, SelectError> {
        if self.remaining == 0 {
            return Err(SelectError::PoolExhausted);
        }
        let scored: Vec<(f64, usize)> = (0..self.pool.len())
            .filter(|&i| self.in_remaining[i])
            .map(|i| (self.scores[i], i))
            .collect();
        Ok(lowest_k(scored, k1))
    }

    /// Coarse stage: rescore candidates against the selected buffer, update π
    /// and keep the `k2` lowest.
    pub fn coarse_stage(
        &mut self,
        candidates: &[usize],
        k2: usize,
    ) -> Result<Vec<usize>, SelectError> {
        if candidates.is_empty() {
            return Err(SelectError::Invariant("coarse stage without candidates".into()));
        }
        if let Some(&i) = candidates.iter().find(|&&i| !self.in_remaining[i]) {
            return Err(SelectError::Invariant(format!(
                "candidate {:?} is already selected",
                self.pool.get(i).id
            )));
        }
        let fresh = self.score_against(&self.selection.buffer, candidates)?;
        let mut scored = Vec::with_capacity(candidates.len());
        for (&i, g) in candidates.iter().zip(fresh) {
            self.scores[i] = g;
            scored.push((g, i));
        }
        Ok(lowest_k(scored, k2))
    }

    /// Fine stage: grow a block greedily from `candidates`, committing each
    /// pick to the selection. Stops after `k3` picks, when candidates run out,
    /// or right after the pick that meets the budget.
    pub fn fine_stage(
        &mut self,
        candidates: &[usize],
        k3: usize,
    ) -> Result<Vec<usize>, SelectError> {
        if let Some(&i) = candidates.iter().find(|&&i| !self.in_remaining[i]) {
            return Err(SelectError::Invariant(format!(
                "candidate {:?} is already selected",
                self.pool.get(i).id
            )));
        }
        let mut open: Vec<usize> = candidates.to_vec();
        let mut block = Vec::new();
        let mut local: Vec<u8> = if self.config.fine_with_selected {
            self.selection.buffer.clone()
        } else {
            Vec::new()
        };
        while block.len() < k3 && !open.is_empty() && !self.budget_met() {
            let ratios = self.score_against(&local, &open)?;
            let (pos, _) = ratios
                .iter()
                .zip(&open)
                .enumerate()
                .min_by(|(_, a), (_, b)| by_score_then_index((*a.0, *a.1), (*b.0, *b.1)))
                .expect("open candidates are non-empty");
            let pick = open.remove(pos);
            if !local.is_empty() {
                local.push(SEPARATOR);
            }
            local.extend_from_slice(&self.pool.get(pick).payload);
            self.take(pick);
            block.push(pick);
        }
        Ok(block)
    }
}

/// Runs the full selection loop until the budget is met or the pool is used up.
pub fn zip_select(pool: &Pool, config: SelectorConfig) -> Result<Selection, SelectError> {
    let started = Instant::now();
    let mut state = init_state(pool, config)?;
    let mut iteration = 0;
    while !state.budget_met() && state.remaining_len() > 0 {
        let global = state.global_stage(config.k1)?;
        let coarse = state.coarse_stage(&global, config.k2)?;
        let block = state.fine_stage(&coarse, config.k3)?;
        if block.is_empty() {
            return Err(SelectError::Invariant(
                "fine stage made no progress".into(),
            ));
        }
        iteration += 1;
        let set_ratio = compressor::ratio_of(&state.selection.buffer, &config.codec)?.ratio;
        let selected = state.selection.len();
        log::debug!("iteration {iteration}: {selected} selected, set ratio {set_ratio:.4}");
        state.selection.trajectory.push(IterationRecord {
            iteration,
            selected,
            set_ratio,
            wall_time_secs: started.elapsed().as_secs_f64(),
        });
    }
    let exhausted = !state.budget_met();
    let mut selection = state.into_selection();
    selection.exhausted = exhausted;
    selection.finalize(&config.codec)?;
    Ok(selection)
}
