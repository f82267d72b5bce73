//! Shared fixtures for integration tests.
#![allow(dead_code)]

pub mod http;

use lfrerank::data::{Candidate, CandidateSet};
use lfrerank::util::{derive_seed, seeded_rng};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A candidate set whose gold quality is a fixed linear function of word
/// counts plus Gaussian noise, with generator log-probs and sample counts
/// loosely tied to that quality.
pub struct SyntheticSet {
    pub set: CandidateSet,
    pub quality: Vec<f64>,
    /// Noise-free part of the quality.
    pub clean: Vec<f64>,
}

pub struct SyntheticCorpus {
    pub vocab: Vec<String>,
    pub word_values: Vec<f64>,
    pub sets: Vec<SyntheticSet>,
}

pub fn synthetic_corpus(n_sets: usize, per_set: usize, noise: f64, seed: u64) -> SyntheticCorpus {
    let mut rng = seeded_rng(derive_seed(seed, "vocab", 0));
    let vocab: Vec<String> = (0..80).map(|i| format!("w{i:02}")).collect();
    let word_values: Vec<f64> = vocab.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lf_words = ["river", "state", "city", "capital", "population", "area", "border", "lake"];
    let normal = Normal::new(0.0, noise).unwrap();
    let mut sets = Vec::with_capacity(n_sets);
    for s in 0..n_sets {
        let mut rng = seeded_rng(derive_seed(seed, "set", s as u64));
        let a = lf_words.choose(&mut rng).unwrap();
        let b = lf_words.choose(&mut rng).unwrap();
        let lf = format!("answer ( {a} ( {b} ( m{} ) ) )", s % 7);
        let mut texts: Vec<String> = Vec::new();
        let mut clean = Vec::new();
        while texts.len() < per_set {
            let len = rng.gen_range(4..=8);
            let idx: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab.len())).collect();
            let text = idx.iter().map(|&i| vocab[i].as_str()).collect::<Vec<_>>().join(" ");
            if texts.contains(&text) {
                continue;
            }
            clean.push(idx.iter().map(|&i| word_values[i]).sum::<f64>());
            texts.push(text);
        }
        let quality: Vec<f64> = clean.iter().map(|q| q + normal.sample(&mut rng)).collect();
        let candidates = texts
            .iter()
            .zip(&quality)
            .map(|(t, q)| {
                let count = 1 + (2.0 * (q + 3.0).max(0.0) * rng.gen_range(0.5..1.5)) as u32;
                let logprob = -1.5 + 0.1 * q + rng.gen_range(-0.5..0.5);
                Candidate::new(t.clone(), count, Some(logprob)).unwrap()
            })
            .collect();
        let set = CandidateSet::new(format!("syn{s:05}"), lf, None, candidates).unwrap();
        sets.push(SyntheticSet { set, quality, clean });
    }
    SyntheticCorpus { vocab, word_values, sets }
}
