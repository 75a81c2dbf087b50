use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::EvalTuple;
use crate::corpus::{Corpus, InvertedIndex};
use crate::math::log_sum_exp;

/// Mean number of documents containing every word of a tuple.
pub fn consistency(tuples: &[EvalTuple], index: &InvertedIndex) -> f64 {
    if tuples.is_empty() {
        return 0.0;
    }
    let total: usize = tuples.iter().map(|t| index.docs_with_all(&t.words).len()).sum();
    total as f64 / tuples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityCurve {
    /// Mean number of distinct documents retrieved by the first `i + 1` tuples.
    pub curve: Vec<f64>,
    /// `curve[i] - curve[i - 1]`, with `curve[-1] = 0`.
    pub gradient: Vec<f64>,
}

/// Cumulative distinct documents retrieved as tuples are taken in random
/// order, averaged over `n_repeats` shuffles.
pub fn diversity_curve<R: Rng + ?Sized>(
    tuples: &[EvalTuple],
    index: &InvertedIndex,
    n_repeats: usize,
    rng: &mut R,
) -> DiversityCurve {
    let retrieved: Vec<Vec<usize>> = tuples.iter().map(|t| index.docs_with_all(&t.words)).collect();
    let repeats = n_repeats.max(1);
    let mut curve = vec![0.0; tuples.len()];
    let mut order: Vec<usize> = (0..tuples.len()).collect();
    for _ in 0..repeats {
        order.shuffle(rng);
        let mut seen = HashSet::new();
        for (pos, &t) in order.iter().enumerate() {
            seen.extend(retrieved[t].iter().copied());
            curve[pos] += seen.len() as f64;
        }
    }
    curve.iter_mut().for_each(|v| *v /= repeats as f64);
    let gradient = curve
        .iter()
        .scan(0.0, |prev, &v| {
            let d = v - *prev;
            *prev = v;
            Some(d)
        })
        .collect();
    DiversityCurve { curve, gradient }
}

/// Smoothed per-document unigrams and the corpus language model used by
/// query clarity.
///
/// `P(w|D) = (c(w, D) + eps) / (N_D + eps * Z')` over the `Z'` words that
/// occur in the corpus, and `P(w) = sum_D (N_D / N) P(w|D)`.
#[derive(Debug, Clone)]
pub struct ClarityModel {
    active: Vec<usize>,
    /// `doc_models[d][j]` is `P(active[j] | d)`.
    doc_models: Vec<Vec<f64>>,
    background: Vec<f64>,
    /// Position of every word in `active`.
    slot: Vec<Option<usize>>,
    postings: InvertedIndex,
}

impl ClarityModel {
    /// Smoothing `eps = 1 / (10 * Z')`.
    pub fn new(corpus: &Corpus) -> Self {
        let z_active = corpus.word_totals().iter().filter(|c| **c > 0.0).count().max(1);
        Self::with_epsilon(corpus, 1.0 / (10.0 * z_active as f64))
    }

    /// Explicit additive smoothing; `0` gives raw unigrams.
    pub fn with_epsilon(corpus: &Corpus, eps: f64) -> Self {
        let totals = corpus.word_totals();
        let active: Vec<usize> = (0..totals.len()).filter(|w| totals[*w] > 0.0).collect();
        let mut slot = vec![None; totals.len()];
        for (j, w) in active.iter().enumerate() {
            slot[*w] = Some(j);
        }
        let za = active.len() as f64;
        let doc_models: Vec<Vec<f64>> = corpus
            .docs
            .iter()
            .map(|d| {
                let denom = d.total_tokens() + eps * za;
                let mut m = vec![eps / denom; active.len()];
                for (w, c) in d.entries() {
                    if let Some(j) = slot[*w] {
                        m[j] = (c + eps) / denom;
                    }
                }
                m
            })
            .collect();
        let n_total: f64 = corpus.total_tokens();
        let mut background = vec![0.0; active.len()];
        for (d, m) in corpus.docs.iter().zip(&doc_models) {
            let weight = d.total_tokens() / n_total;
            for (b, p) in background.iter_mut().zip(m) {
                *b += weight * p;
            }
        }
        ClarityModel {
            active,
            doc_models,
            background,
            slot,
            postings: corpus.inverted_index(),
        }
    }

    pub fn active_words(&self) -> &[usize] {
        &self.active
    }

    /// `P(w)` for every active word.
    pub fn background(&self) -> &[f64] {
        &self.background
    }

    /// `P(D|T)` as `(doc, probability)` pairs over documents containing at
    /// least one tuple word; `None` when there are none or all vanish.
    pub fn doc_posterior(&self, tuple: &[usize]) -> Option<Vec<(usize, f64)>> {
        let candidates = self.postings.docs_with_any(tuple);
        if candidates.is_empty() {
            return None;
        }
        let slots: Vec<usize> = tuple.iter().filter_map(|w| self.slot.get(*w).copied().flatten()).collect();
        let logs: Vec<f64> = candidates
            .iter()
            .map(|&d| slots.iter().map(|&j| self.doc_models[d][j].ln()).sum())
            .collect();
        let lse = log_sum_exp(&logs);
        if !lse.is_finite() {
            return None;
        }
        Some(candidates.into_iter().zip(logs).map(|(d, l)| (d, (l - lse).exp())).collect())
    }

    /// `P(w|T) = sum_D P(w|D) P(D|T)` over active words.
    pub fn tuple_model(&self, tuple: &[usize]) -> Option<Vec<f64>> {
        let post = self.doc_posterior(tuple)?;
        let mut out = vec![0.0; self.active.len()];
        for (d, p) in post {
            for (o, q) in out.iter_mut().zip(&self.doc_models[d]) {
                *o += p * q;
            }
        }
        Some(out)
    }

    /// Clarity in bits by exact summation over the active vocabulary.
    pub fn clarity_exact(&self, tuple: &[usize]) -> Option<f64> {
        let ptw = self.tuple_model(tuple)?;
        Some(kl_bits(ptw.iter().copied().enumerate(), &self.background))
    }

    /// Monte Carlo clarity: documents from `P(D|T)`, then a word from each
    /// document's unigram; the KL divergence is taken over the sampled words.
    pub fn clarity_monte_carlo<R: Rng + ?Sized>(&self, tuple: &[usize], n_samples: usize, rng: &mut R) -> Option<f64> {
        let post = self.doc_posterior(tuple)?;
        let doc_pick = WeightedIndex::new(post.iter().map(|(_, p)| *p)).ok()?;
        let mut word_picks: Vec<Option<WeightedIndex<f64>>> = vec![None; post.len()];
        let mut counts = vec![0usize; self.active.len()];
        for _ in 0..n_samples {
            let k = doc_pick.sample(rng);
            let dist = word_picks[k]
                .get_or_insert_with(|| WeightedIndex::new(&self.doc_models[post[k].0]).expect("document model has mass"));
            counts[dist.sample(rng)] += 1;
        }
        let n = n_samples as f64;
        Some(kl_bits(
            counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(j, c)| (j, *c as f64 / n)),
            &self.background,
        ))
    }

    /// Mean Monte Carlo clarity over tuples, skipping undefined ones.
    /// Returns the mean and the number of tuples it covers.
    pub fn mean_clarity<R: Rng + ?Sized>(&self, tuples: &[EvalTuple], n_samples: usize, rng: &mut R) -> (f64, usize) {
        let vals: Vec<f64> = tuples
            .iter()
            .filter_map(|t| self.clarity_monte_carlo(&t.words, n_samples, rng))
            .collect();
        if vals.is_empty() {
            (f64::NAN, 0)
        } else {
            (vals.iter().sum::<f64>() / vals.len() as f64, vals.len())
        }
    }
}

fn kl_bits(p: impl Iterator<Item = (usize, f64)>, q: &[f64]) -> f64 {
    p.filter(|(_, v)| *v > 0.0).map(|(j, v)| v * (v / q[j]).log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BagOfWords;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tuple(words: &[usize]) -> EvalTuple {
        EvalTuple {
            words: words.to_vec(),
            source_location: 0,
        }
    }

    #[test]
    fn consistency_edge_cases() {
        let c = Corpus::with_anonymous_vocab(4, vec![BagOfWords::from_tokens([0, 1, 2])]).unwrap();
        let idx = c.inverted_index();
        assert_eq!(consistency(&[tuple(&[0, 1, 2])], &idx), 1.0);
        assert_eq!(consistency(&[tuple(&[3])], &idx), 0.0);
    }

    #[test]
    fn diversity_identity_and_flat_curves() {
        let docs = (0..5).map(|w| BagOfWords::from_tokens([w])).collect();
        let c = Corpus::with_anonymous_vocab(5, docs).unwrap();
        let idx = c.inverted_index();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let disjoint: Vec<EvalTuple> = (0..5).map(|w| tuple(&[w])).collect();
        let d = diversity_curve(&disjoint, &idx, 5, &mut rng);
        assert_eq!(d.curve, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(d.gradient, vec![1.0; 5]);
        let same = vec![tuple(&[2]); 4];
        let d = diversity_curve(&same, &idx, 3, &mut rng);
        assert_eq!(d.curve, vec![1.0; 4]);
        assert_eq!(d.gradient, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn clarity_of_single_document_is_zero() {
        let c = Corpus::with_anonymous_vocab(6, vec![BagOfWords::from_tokens([0, 0, 1, 2, 5])]).unwrap();
        let m = ClarityModel::new(&c);
        assert_eq!(m.clarity_exact(&[0, 1]), Some(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mc = m.clarity_monte_carlo(&[0, 1], 100_000, &mut rng).unwrap();
        assert!(mc.abs() < 0.01);
        assert_eq!(m.clarity_exact(&[3]), None);
    }

    #[test]
    fn disjoint_halves_give_one_bit() {
        let c = Corpus::with_anonymous_vocab(
            4,
            vec![BagOfWords::from_tokens([0, 0, 1, 1]), BagOfWords::from_tokens([2, 3, 3, 2])],
        )
        .unwrap();
        let m = ClarityModel::with_epsilon(&c, 0.0);
        assert!((m.clarity_exact(&[0]).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((m.clarity_monte_carlo(&[1], 50_000, &mut rng).unwrap() - 1.0).abs() < 1e-3);
    }
}
