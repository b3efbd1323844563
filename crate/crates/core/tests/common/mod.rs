#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teasergen_core::store::{EmbeddingSequence, FrameBank, SentenceSpan};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f32>() > 1e-3 {
            return v;
        }
    }
}

pub fn random_bank(rng: &mut impl Rng, n: usize, dim: usize) -> FrameBank {
    let data: Vec<f32> = (0..n).flat_map(|_| random_vec(rng, dim)).collect();
    FrameBank::new(dim, data, None, "random").unwrap()
}

/// Random partition of `n_t` slots into at most `max_sentences` sentences.
pub fn random_spans(rng: &mut impl Rng, n_t: usize, max_sentences: usize) -> Vec<SentenceSpan> {
    let m = rng.gen_range(1..=max_sentences.min(n_t));
    let mut cuts: Vec<usize> = (1..n_t).collect();
    for i in (1..cuts.len()).rev() {
        cuts.swap(i, rng.gen_range(0..=i));
    }
    let mut cuts: Vec<usize> = cuts.into_iter().take(m - 1).collect();
    cuts.sort();
    let mut spans = Vec::new();
    let mut start = 0;
    for (s, end) in cuts.into_iter().chain(std::iter::once(n_t)).enumerate() {
        spans.push(SentenceSpan {
            start,
            end,
            sentence: s,
        });
        start = end;
    }
    spans
}

/// Generated embeddings that loosely follow bank rows, so nearest neighbours
/// collide across sentences the way real decoder output does.
pub fn random_sequence(
    rng: &mut impl Rng,
    bank: &FrameBank,
    n_t: usize,
    max_sentences: usize,
) -> EmbeddingSequence {
    let rows = (0..n_t)
        .map(|_| {
            let base = bank.row(rng.gen_range(0..bank.n()));
            let noise = random_vec(rng, bank.dim());
            base.iter().zip(&noise).map(|(b, e)| b + 0.6 * e).collect()
        })
        .collect();
    EmbeddingSequence::new(rows, random_spans(rng, n_t, max_sentences)).unwrap()
}

/// Direct double-loop evaluation of the decoding objective.
pub fn oracle_phi(gen: &EmbeddingSequence, decoded: &[usize], bank: &FrameBank, lambda: f64) -> f64 {
    let dot = |a: &[f32], b: &[f32]| -> f64 { a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum() };
    let mut fidelity = 0.0;
    for (t, &f) in decoded.iter().enumerate() {
        fidelity += dot(gen.row(t), bank.row(f));
    }
    let mut penalty = 0.0;
    for t in 0..decoded.len() {
        for u in t + 1..decoded.len() {
            if gen.sentence_of(t) != gen.sentence_of(u) {
                penalty += dot(bank.row(decoded[t]), bank.row(decoded[u]));
            }
        }
    }
    fidelity - lambda * penalty
}

/// Full scan of the bank sorted by similarity, ties by index.
pub fn oracle_candidates(query: &[f32], bank: &FrameBank, k: usize) -> Vec<usize> {
    let mut all: Vec<(usize, f64)> = (0..bank.n())
        .map(|i| {
            let s = query
                .iter()
                .zip(bank.row(i))
                .map(|(&x, &y)| x as f64 * y as f64)
                .sum::<f64>();
            (i, s)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|(i, _)| i).collect()
}

/// Every path through the per-slot candidate lattice.
pub fn lattice_paths(cands: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut paths = vec![Vec::new()];
    for slot in cands {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                slot.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    paths
}
