use super::MASS_THRESHOLD;
use crate::corpus::InvertedIndex;
use crate::grid::CountingGrid;

/// Co-occurrence coherence of the `k` most probable words of every cell:
/// `sum_{i<j} ln((D(w_i, w_j) + 1) / D(w_j))` with words ranked by
/// decreasing probability and `D` the document frequency. Pairs whose
/// `D(w_j)` is zero are skipped. With `use_h` the window distributions are
/// scored instead of the microtopics.
pub fn coherence_topk(grid: &CountingGrid, index: &InvertedIndex, k: usize, use_h: bool) -> Vec<f64> {
    (0..grid.cells())
        .map(|i| {
            let dist = if use_h { grid.h_at(i) } else { grid.pi_at(i) };
            let top = top_words(&dist, k);
            let mut score = 0.0;
            for (a, &wi) in top.iter().enumerate() {
                for &wj in &top[a + 1..] {
                    let dj = index.doc_freq(wj);
                    if dj > 0 {
                        score += ((index.co_doc_freq(wi, wj) + 1) as f64 / dj as f64).ln();
                    }
                }
            }
            score
        })
        .collect()
}

/// Up to `k` words above [`MASS_THRESHOLD`], most probable first, ties by id.
pub(crate) fn top_words(dist: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).filter(|w| dist[*w] > MASS_THRESHOLD).collect();
    idx.sort_by(|a, b| dist[*b].total_cmp(&dist[*a]).then(a.cmp(b)));
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BagOfWords, Corpus};
    use crate::grid::GridGeometry;

    fn one_cell(dist: Vec<f64>) -> CountingGrid {
        CountingGrid::from_cell_distributions(GridGeometry::square(1, 1).unwrap(), &[dist]).unwrap()
    }

    #[test]
    fn co_occurring_pair_is_positive() {
        let c = Corpus::with_anonymous_vocab(3, vec![BagOfWords::from_tokens([0, 1]), BagOfWords::from_tokens([0, 1, 2])]).unwrap();
        let s = coherence_topk(&one_cell(vec![0.6, 0.4, 0.0]), &c.inverted_index(), 2, false);
        assert!((s[0] - (3.0f64 / 2.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn never_co_occurring_pair_is_negative() {
        let c = Corpus::with_anonymous_vocab(
            2,
            vec![BagOfWords::from_tokens([0]), BagOfWords::from_tokens([1]), BagOfWords::from_tokens([1])],
        )
        .unwrap();
        let s = coherence_topk(&one_cell(vec![0.7, 0.3]), &c.inverted_index(), 2, false);
        assert!((s[0] - (0.5f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn cells_with_few_words_use_what_they_have() {
        let c = Corpus::with_anonymous_vocab(3, vec![BagOfWords::from_tokens([0, 1, 2])]).unwrap();
        let s = coherence_topk(&one_cell(vec![1.0, 0.0, 0.0]), &c.inverted_index(), 10, false);
        assert_eq!(s, vec![0.0]);
        assert_eq!(top_words(&[0.2, 0.5, 0.3], 2), vec![1, 2]);
    }
}
