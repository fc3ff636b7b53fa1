//! Reference machinery used to check the selector: brute-force subset
//! search, a one-step greedy argmin, a seeded random baseline and a synthetic
//! pool generator with known redundancy structure.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compressor::{self, CodecConfig, CodecError, SEPARATOR};
use crate::corpus::{BudgetSpec, CorpusError, Mode, Pool, Sample};
use crate::selector::{IterationRecord, Selection};

/// Largest pool the exhaustive search accepts.
pub const EXHAUSTIVE_MAX_POOL: usize = 18;
/// Largest number of subsets the exhaustive search will evaluate.
pub const EXHAUSTIVE_MAX_SUBSETS: u64 = 1 << 20;

/// Share of tokens resampled when deriving a near-duplicate.
pub const NEAR_DUP_RESAMPLE: f64 = 0.10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "exhaustive search limited to pools of <= {EXHAUSTIVE_MAX_POOL} samples and <= {EXHAUSTIVE_MAX_SUBSETS} subsets (got n={n}, k={k}, {subsets} subsets)"
    )]
    TooLarge { n: usize, k: usize, subsets: u64 },
    #[error("k must be between 1 and the pool size (got k={k}, n={n})")]
    BadK { n: usize, k: usize },
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub indices: Vec<usize>,
    pub ids: Vec<String>,
    pub ratio: f64,
}

/// Enumerates every `k`-subset and returns the one whose pool-order
/// concatenation has the lowest compression ratio. Ties go to the
/// lexicographically smallest index tuple.
pub fn exhaustive_best_subset(
    pool: &Pool,
    k: usize,
    codec: &CodecConfig,
) -> Result<SubsetResult, OracleError> {
    let n = pool.len();
    if k == 0 || k > n {
        return Err(OracleError::BadK { n, k });
    }
    let subsets = binomial(n, k);
    if n > EXHAUSTIVE_MAX_POOL || subsets > EXHAUSTIVE_MAX_SUBSETS {
        return Err(OracleError::TooLarge { n, k, subsets });
    }

    let mut combo: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        for (j, &i) in combo.iter().enumerate() {
            if j > 0 {
                buf.push(SEPARATOR);
            }
            buf.extend_from_slice(&pool.get(i).payload);
        }
        let ratio = compressor::ratio_of(&buf, codec)?.ratio;
        // Combinations come out in lexicographic order, so strict < keeps the first tie.
        if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
            best = Some((ratio, combo.clone()));
        }

        // next combination in lexicographic order
        let mut j = k;
        while j > 0 && combo[j - 1] == n - k + j - 1 {
            j -= 1;
        }
        if j == 0 {
            break;
        }
        combo[j - 1] += 1;
        for t in j..k {
            combo[t] = combo[t - 1] + 1;
        }
    }
    let (ratio, indices) = best.expect("at least one subset");
    Ok(SubsetResult {
        ids: indices.iter().map(|&i| pool.get(i).id.clone()).collect(),
        indices,
        ratio,
    })
}

/// Brute-force argmin of `ratio(local ∥ SEP ∥ candidate)` over `candidates`,
/// ties to the smaller `source_index`.
pub fn greedy_step_oracle(
    local_buffer: &[u8],
    candidates: &[&Sample],
    codec: &CodecConfig,
) -> Result<String, OracleError> {
    let mut best: Option<(f64, usize, &str)> = None;
    for cand in candidates {
        let mut merged = local_buffer.to_vec();
        if !merged.is_empty() {
            merged.push(SEPARATOR);
        }
        merged.extend_from_slice(&cand.payload);
        let ratio = compressor::ratio_of(&merged, codec)?.ratio;
        let better = match best {
            None => true,
            Some((r, idx, _)) => ratio < r || (ratio == r && cand.source_index < idx),
        };
        if better {
            best = Some((ratio, cand.source_index, &cand.id));
        }
    }
    best.map(|(_, _, id)| id.to_string())
        .ok_or_else(|| OracleError::BadSpec("greedy step needs at least one candidate".into()))
}

/// Seeded uniform shuffle, taking a prefix until the budget is crossed.
pub fn random_select(
    pool: &Pool,
    budget: BudgetSpec,
    seed: u64,
    codec: &CodecConfig,
) -> Result<Selection, OracleError> {
    let started = Instant::now();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut sel = Selection::default();
    for i in order {
        if sel.spent.get(budget.unit) >= budget.amount {
            break;
        }
        sel.push(pool.get(i));
    }
    sel.exhausted = sel.spent.get(budget.unit) < budget.amount;
    sel.finalize(codec)?;
    sel.trajectory.push(IterationRecord {
        iteration: 1,
        selected: sel.len(),
        set_ratio: sel.final_ratio.map_or(0.0, |r| r.ratio),
        wall_time_secs: started.elapsed().as_secs_f64(),
    });
    Ok(sel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_base: usize,
    pub dup_fraction: f64,
    pub near_dup_fraction: f64,
    pub doc_bytes: usize,
    pub vocab: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if self.n_base == 0 || self.doc_bytes == 0 || self.vocab == 0 {
            return Err(OracleError::BadSpec(
                "n_base, doc_bytes and vocab must be >= 1".into(),
            ));
        }
        if !frac_ok(self.dup_fraction) || !frac_ok(self.near_dup_fraction) {
            return Err(OracleError::BadSpec("fractions must lie in [0, 1]".into()));
        }
        if self.dup_fraction + self.near_dup_fraction > 1.0 + 1e-12 {
            return Err(OracleError::BadSpec(
                "dup_fraction + near_dup_fraction must be <= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "origin", content = "base", rename_all = "snake_case")]
pub enum Origin {
    Base,
    Dup(usize),
    NearDup(usize),
}

impl Origin {
    /// Index of the base document this sample was derived from.
    pub fn base_index(&self, own_index: usize) -> usize {
        match *self {
            Origin::Base => own_index,
            Origin::Dup(b) | Origin::NearDup(b) => b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPool {
    pub pool: Pool,
    pub origins: Vec<Origin>,
    /// Content text of each document, before rendering.
    pub texts: Vec<String>,
}

impl SyntheticPool {
    /// Number of (base, exact duplicate) pairs that are both in `indices`.
    pub fn dup_collisions(&self, indices: &[usize]) -> usize {
        let chosen: std::collections::HashSet<usize> = indices.iter().copied().collect();
        self.origins
            .iter()
            .enumerate()
            .filter(|(i, o)| match o {
                Origin::Dup(b) => chosen.contains(i) && chosen.contains(b),
                _ => false,
            })
            .count()
    }

    /// Single-mode JSONL with provenance labels in extra keys.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in self.pool.records() {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

fn make_lexicon(rng: &mut ChaCha8Rng, vocab: usize) -> Vec<String> {
    const LETTERS: &[u8] = b"etaoinshrdlcumwfgypbvkjxqz";
    (0..vocab)
        .map(|_| {
            let len = rng.gen_range(2..=9);
            (0..len)
                .map(|_| {
                    // skew toward common letters
                    let r: f64 = rng.gen();
                    LETTERS[((r * r) * LETTERS.len() as f64) as usize] as char
                })
                .collect()
        })
        .collect()
}

/// Zipf-like word index: squaring a uniform draw favours low ranks.
fn draw_word(rng: &mut ChaCha8Rng, vocab: usize) -> usize {
    let u: f64 = rng.gen();
    ((u * u * u) * vocab as f64) as usize % vocab
}

fn words_to_doc(words: &[usize], lexicon: &[String], doc_bytes: usize) -> String {
    let mut doc = String::with_capacity(doc_bytes + 16);
    for &w in words {
        if !doc.is_empty() {
            doc.push(' ');
        }
        doc.push_str(&lexicon[w]);
        if doc.len() >= doc_bytes {
            break;
        }
    }
    doc.truncate(doc_bytes);
    doc
}

fn draw_words(rng: &mut ChaCha8Rng, vocab: usize, doc_bytes: usize, lexicon: &[String]) -> Vec<usize> {
    let mut words = Vec::new();
    let mut len = 0usize;
    while len < doc_bytes {
        let w = draw_word(rng, vocab);
        len += lexicon[w].len() + 1;
        words.push(w);
    }
    words
}

/// Generates `n_base` pseudo-text documents and appends exact and near
/// duplicates of randomly chosen bases. Deterministic per seed.
pub fn gen_synthetic_pool(spec: &SynthSpec) -> Result<SyntheticPool, OracleError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lexicon = make_lexicon(&mut rng, spec.vocab);

    let base_words: Vec<Vec<usize>> = (0..spec.n_base)
        .map(|_| draw_words(&mut rng, spec.vocab, spec.doc_bytes, &lexicon))
        .collect();
    let mut texts: Vec<String> = base_words
        .iter()
        .map(|w| words_to_doc(w, &lexicon, spec.doc_bytes))
        .collect();
    let mut origins = vec![Origin::Base; spec.n_base];

    let n_dup = (spec.dup_fraction * spec.n_base as f64).round() as usize;
    let n_near = ((spec.near_dup_fraction * spec.n_base as f64).round() as usize)
        .min(spec.n_base - n_dup);
    let mut order: Vec<usize> = (0..spec.n_base).collect();
    order.shuffle(&mut rng);

    for &b in &order[..n_dup] {
        texts.push(texts[b].clone());
        origins.push(Origin::Dup(b));
    }
    for &b in &order[n_dup..n_dup + n_near] {
        let mut words = base_words[b].clone();
        let n_resample = ((words.len() as f64) * NEAR_DUP_RESAMPLE).round().max(1.0) as usize;
        let mut positions: Vec<usize> = (0..words.len()).collect();
        positions.shuffle(&mut rng);
        for &p in &positions[..n_resample.min(words.len())] {
            words[p] = draw_word(&mut rng, spec.vocab);
        }
        // top up if resampling shortened the text
        let mut text_len: usize = words.iter().map(|&w| lexicon[w].len() + 1).sum();
        while text_len < spec.doc_bytes + 1 {
            let w = draw_word(&mut rng, spec.vocab);
            text_len += lexicon[w].len() + 1;
            words.push(w);
        }
        texts.push(words_to_doc(&words, &lexicon, spec.doc_bytes));
        origins.push(Origin::NearDup(b));
    }

    let ids: Vec<String> = origins
        .iter()
        .enumerate()
        .map(|(i, o)| match o {
            Origin::Base => format!("b{i}"),
            Origin::Dup(b) => format!("d{b}"),
            Origin::NearDup(b) => format!("n{b}"),
        })
        .collect();
    let records: Vec<String> = texts
        .iter()
        .zip(&ids)
        .zip(&origins)
        .enumerate()
        .map(|(i, ((t, id), origin))| {
            let (label, base) = match origin {
                Origin::Base => ("base", i),
                Origin::Dup(b) => ("dup", *b),
                Origin::NearDup(b) => ("near_dup", *b),
            };
            serde_json::json!({
                "id": id,
                "messages": [{"role": "user", "content": t}],
                "origin": label,
                "base": base,
            })
            .to_string()
        })
        .collect();
    let samples = texts
        .iter()
        .zip(&ids)
        .enumerate()
        .map(|(i, (t, id))| {
            let payload = format!("user: {t}\n").into_bytes();
            Sample {
                id: id.clone(),
                token_len: crate::corpus::whitespace_tokens(&payload),
                payload,
                source_index: i,
                kind: Mode::Single,
            }
        })
        .collect();
    let pool = Pool::from_samples(samples, records, Mode::Single)?;
    Ok(SyntheticPool {
        pool,
        origins,
        texts,
    })
}
