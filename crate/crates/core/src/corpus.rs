//! Bags of words and corpora.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sparse word counts of one document, sorted by word id.
///
/// Counts are real-valued: text corpora carry integer counts, while the
/// location posteriors fed between stacked layers are fractional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BagOfWords {
    entries: Vec<(usize, f64)>,
    total: f64,
}

impl BagOfWords {
    /// Builds a bag from `(word, count)` pairs; repeated words are merged and
    /// non-positive counts dropped.
    pub fn from_counts<I: IntoIterator<Item = (usize, f64)>>(counts: I) -> Self {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (w, c) in counts {
            if c > 0.0 {
                *map.entry(w).or_default() += c;
            }
        }
        let entries: Vec<(usize, f64)> = map.into_iter().collect();
        let total = entries.iter().map(|(_, c)| c).sum();
        BagOfWords { entries, total }
    }

    /// Counts a sequence of tokens.
    pub fn from_tokens<I: IntoIterator<Item = usize>>(tokens: I) -> Self {
        Self::from_counts(tokens.into_iter().map(|w| (w, 1.0)))
    }

    /// Builds a bag from a dense count vector (index = word id).
    pub fn from_dense(counts: &[f64]) -> Self {
        Self::from_counts(counts.iter().copied().enumerate())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn total_tokens(&self) -> f64 {
        self.total
    }

    pub fn distinct_words(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, word: usize) -> f64 {
        self.entries
            .binary_search_by_key(&word, |(w, _)| *w)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn contains(&self, word: usize) -> bool {
        self.entries.binary_search_by_key(&word, |(w, _)| *w).is_ok()
    }

    pub fn words(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(w, _)| *w)
    }

    pub fn max_word(&self) -> Option<usize> {
        self.entries.last().map(|(w, _)| *w)
    }

    pub fn to_dense(&self, vocab_size: usize) -> Vec<f64> {
        let mut v = vec![0.0; vocab_size];
        for (w, c) in &self.entries {
            v[*w] = *c;
        }
        v
    }

    /// Checks that every word id is below `vocab_size`.
    pub fn check_vocab(&self, vocab_size: usize) -> Result<()> {
        match self.max_word() {
            Some(w) if w >= vocab_size => Err(Error::WordOutOfRange {
                word: w,
                vocab: vocab_size,
            }),
            _ => Ok(()),
        }
    }
}

/// A vocabulary, its documents and optional class labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub vocab: Vec<String>,
    pub docs: Vec<BagOfWords>,
    pub doc_ids: Vec<String>,
    /// Class id per document, indexing into `label_names`.
    pub labels: Option<Vec<usize>>,
    pub label_names: Vec<String>,
    /// `(width, height, channels)` when the vocabulary is a pixel grid.
    pub image_shape: Option<(usize, usize, usize)>,
}

impl Corpus {
    /// Builds an unlabeled corpus, naming documents by position.
    pub fn new(vocab: Vec<String>, docs: Vec<BagOfWords>) -> Result<Self> {
        let doc_ids = (0..docs.len()).map(|i| format!("d{i}")).collect();
        let c = Corpus {
            vocab,
            docs,
            doc_ids,
            labels: None,
            label_names: Vec::new(),
            image_shape: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Unlabeled corpus with synthetic word names `w0, w1, ...`.
    pub fn with_anonymous_vocab(vocab_size: usize, docs: Vec<BagOfWords>) -> Result<Self> {
        Self::new((0..vocab_size).map(|i| format!("w{i}")).collect(), docs)
    }

    /// Attaches class ids; names default to the id itself.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.docs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.docs.len(),
                actual: labels.len(),
            });
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        if self.label_names.len() < n_classes {
            self.label_names = (0..n_classes).map(|c| c.to_string()).collect();
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.docs {
            d.check_vocab(self.vocab.len())?;
        }
        if self.doc_ids.len() != self.docs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.docs.len(),
                actual: self.doc_ids.len(),
            });
        }
        if let Some(l) = &self.labels {
            if l.len() != self.docs.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.docs.len(),
                    actual: l.len(),
                });
            }
            if let Some(bad) = l.iter().find(|c| **c >= self.label_names.len()) {
                return Err(Error::Classification(format!("label {bad} has no name")));
            }
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn total_tokens(&self) -> f64 {
        self.docs.iter().map(BagOfWords::total_tokens).sum()
    }

    /// Summed counts of every word over the corpus.
    pub fn word_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.vocab_size()];
        for d in &self.docs {
            for (w, c) in d.entries() {
                totals[*w] += c;
            }
        }
        totals
    }

    /// Normalized corpus-wide word distribution.
    pub fn unigram(&self) -> Vec<f64> {
        let mut t = self.word_totals();
        let s: f64 = t.iter().sum();
        if s > 0.0 {
            t.iter_mut().for_each(|v| *v /= s);
        }
        t
    }

    /// Subset of documents, keeping vocabulary and label names.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            vocab: self.vocab.clone(),
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
            doc_ids: indices.iter().map(|&i| self.doc_ids[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            label_names: self.label_names.clone(),
            image_shape: self.image_shape,
        }
    }

    /// Stable 64-bit digest of the vocabulary.
    pub fn vocab_hash(&self) -> u64 {
        vocab_hash(&self.vocab)
    }

    /// Word id by string.
    pub fn word_index(&self) -> std::collections::HashMap<&str, usize> {
        self.vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect()
    }

    /// For every word, the sorted ids of the documents containing it.
    pub fn inverted_index(&self) -> InvertedIndex {
        let mut postings = vec![Vec::new(); self.vocab_size()];
        for (d, bag) in self.docs.iter().enumerate() {
            for w in bag.words() {
                postings[w].push(d);
            }
        }
        InvertedIndex {
            postings,
            n_docs: self.len(),
        }
    }
}

/// SHA-256 of the newline-joined vocabulary, truncated to 64 bits.
pub fn vocab_hash(vocab: &[String]) -> u64 {
    let mut hasher = Sha256::new();
    for w in vocab {
        hasher.update(w.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Word to document postings.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: Vec<Vec<usize>>,
    n_docs: usize,
}

impl InvertedIndex {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn postings(&self, word: usize) -> &[usize] {
        self.postings.get(word).map_or(&[], Vec::as_slice)
    }

    /// Number of documents containing `word`.
    pub fn doc_freq(&self, word: usize) -> usize {
        self.postings(word).len()
    }

    /// Documents containing every word of `words` (sorted).
    pub fn docs_with_all(&self, words: &[usize]) -> Vec<usize> {
        let mut lists: Vec<&[usize]> = words.iter().map(|w| self.postings(*w)).collect();
        if lists.is_empty() {
            return Vec::new();
        }
        lists.sort_by_key(|l| l.len());
        let mut acc: Vec<usize> = lists[0].to_vec();
        for l in &lists[1..] {
            acc = intersect_sorted(&acc, l);
            if acc.is_empty() {
                break;
            }
        }
        acc
    }

    /// Documents containing at least one word of `words` (sorted).
    pub fn docs_with_any(&self, words: &[usize]) -> Vec<usize> {
        let mut all: Vec<usize> = words
            .iter()
            .flat_map(|w| self.postings(*w).iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Number of documents containing both words.
    pub fn co_doc_freq(&self, a: usize, b: usize) -> usize {
        intersect_sorted(self.postings(a), self.postings(b)).len()
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// For every word, the `(doc, count)` pairs in document order. Used by the
/// M-steps, which accumulate per word so the reduction order is fixed.
pub(crate) fn word_postings(docs: &[BagOfWords], vocab_size: usize) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); vocab_size];
    for (d, bag) in docs.iter().enumerate() {
        for (w, c) in bag.entries() {
            out[*w].push((d, *c));
        }
    }
    out
}
