#![allow(dead_code)]

use zipsel::compressor::SEPARATOR;
use zipsel::oracle::{self, SynthSpec, SyntheticPool};
use zipsel::selector::{init_state, SelectorConfig};
use zipsel::{CodecConfig, Pool};

pub fn synth(n_base: usize, dup: f64, near: f64, doc_bytes: usize, seed: u64) -> SyntheticPool {
    oracle::gen_synthetic_pool(&SynthSpec {
        n_base,
        dup_fraction: dup,
        near_dup_fraction: near,
        doc_bytes,
        vocab: 300,
        seed,
    })
    .unwrap()
}

/// Separator-joined payloads of `indices`, in the given order.
pub fn joined(pool: &Pool, indices: &[usize]) -> Vec<u8> {
    let mut out = Vec::new();
    for (j, &i) in indices.iter().enumerate() {
        if j > 0 {
            out.push(SEPARATOR);
        }
        out.extend_from_slice(&pool.get(i).payload);
    }
    out
}

/// Runs the selection loop stage by stage and checks every fine-stage pick
/// against the brute-force one-step oracle. Returns the number of picks
/// checked and any mismatches as (iteration, step).
pub fn check_fine_picks(pool: &Pool, config: SelectorConfig) -> (usize, Vec<(usize, usize)>) {
    let codec: CodecConfig = config.codec;
    let mut state = init_state(pool, config).unwrap();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    let mut iteration = 0;
    while !state.budget_met() && state.remaining_len() > 0 {
        let global = state.global_stage(config.k1).unwrap();
        let coarse = state.coarse_stage(&global, config.k2).unwrap();
        let block = state.fine_stage(&coarse, config.k3).unwrap();
        for (step, &pick) in block.iter().enumerate() {
            let local = joined(pool, &block[..step]);
            let open: Vec<_> = coarse
                .iter()
                .filter(|i| !block[..step].contains(i))
                .map(|&i| pool.get(i))
                .collect();
            let expected = oracle::greedy_step_oracle(&local, &open, &codec).unwrap();
            if expected != pool.get(pick).id {
                mismatches.push((iteration, step));
            }
            checked += 1;
        }
        iteration += 1;
    }
    (checked, mismatches)
}
