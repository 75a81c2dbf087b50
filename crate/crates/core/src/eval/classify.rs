use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ccg::{CcgConfig, CcgModel};
use crate::cg::CgModel;
use crate::corpus::{BagOfWords, Corpus};
use crate::error::{Error, Result};
use crate::grid::GridGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cg,
    Ccg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    /// EM settings; `em` is also used for CG models.
    pub ccg: CcgConfig,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            ccg: CcgConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub predictions: Vec<usize>,
    /// `logliks[t][c]`: log-likelihood of test document `t` under class `c`.
    pub logliks: Vec<Vec<f64>>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossValidation {
    pub fold_accuracies: Vec<f64>,
    /// Fraction of all documents classified correctly.
    pub accuracy: f64,
    /// Held-out prediction for every document, in corpus order.
    pub predictions: Vec<usize>,
}

enum Trained {
    Cg(CgModel),
    Ccg(CcgModel),
}

impl Trained {
    fn loglik(&self, bag: &BagOfWords, fold_in: usize) -> Result<f64> {
        match self {
            Trained::Cg(m) => m.log_likelihood(bag),
            Trained::Ccg(m) => Ok(m.fold_in(bag, fold_in)?.loglik),
        }
    }
}

/// Trains one model per class on `train` and labels each test bag with the
/// class of highest log-likelihood; ties go to the lower class id.
pub fn classify_max_likelihood(
    train: &Corpus,
    test: &[BagOfWords],
    test_labels: Option<&[usize]>,
    kind: ModelKind,
    geometry: GridGeometry,
    config: &ClassifierConfig,
) -> Result<Classification> {
    let labels = train
        .labels
        .as_ref()
        .ok_or_else(|| Error::Classification("training corpus has no labels".into()))?;
    let n_classes = train.n_classes();
    if n_classes < 2 {
        return Err(Error::Classification(format!("need at least two classes, got {n_classes}")));
    }
    let mut models = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let docs: Vec<BagOfWords> = train
            .docs
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == c)
            .map(|(d, _)| d.clone())
            .collect();
        if docs.is_empty() {
            return Err(Error::Classification(format!("class {c} has no training documents")));
        }
        let seed = config.seed.wrapping_add(c as u64);
        let z = train.vocab_size();
        models.push(match kind {
            ModelKind::Cg => Trained::Cg(CgModel::init(geometry, z, &docs, seed)?.fit(&docs, &config.ccg.em)?.model),
            ModelKind::Ccg => Trained::Ccg(CcgModel::init(geometry, z, &docs, seed)?.fit(&docs, &config.ccg)?.model),
        });
    }
    let mut predictions = Vec::with_capacity(test.len());
    let mut logliks = Vec::with_capacity(test.len());
    for bag in test {
        let ll: Vec<f64> = models
            .iter()
            .map(|m| m.loglik(bag, config.ccg.fold_in_iters))
            .collect::<Result<_>>()?;
        let mut best = 0;
        for (c, v) in ll.iter().enumerate() {
            if *v > ll[best] {
                best = c;
            }
        }
        predictions.push(best);
        logliks.push(ll);
    }
    let accuracy = match test_labels {
        Some(truth) => {
            if truth.len() != predictions.len() {
                return Err(Error::DimensionMismatch {
                    expected: predictions.len(),
                    actual: truth.len(),
                });
            }
            let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
            Some(hits as f64 / predictions.len().max(1) as f64)
        }
        None => None,
    };
    Ok(Classification {
        predictions,
        logliks,
        accuracy,
    })
}

/// `folds`-fold cross-validation over a seeded shuffle of the documents.
pub fn cross_validate(
    corpus: &Corpus,
    kind: ModelKind,
    geometry: GridGeometry,
    folds: usize,
    config: &ClassifierConfig,
) -> Result<CrossValidation> {
    let labels = corpus
        .labels
        .as_ref()
        .ok_or_else(|| Error::Classification("corpus has no labels".into()))?;
    if folds < 2 || folds > corpus.len() {
        return Err(Error::Classification(format!("cannot split {} documents into {folds} folds", corpus.len())));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let mut predictions = vec![0; corpus.len()];
    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut hits = 0;
    for f in 0..folds {
        let test_idx: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % folds == f).map(|(_, d)| *d).collect();
        let train_idx: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % folds != f).map(|(_, d)| *d).collect();
        let train = corpus.subset(&train_idx);
        let test: Vec<BagOfWords> = test_idx.iter().map(|&d| corpus.docs[d].clone()).collect();
        let truth: Vec<usize> = test_idx.iter().map(|&d| labels[d]).collect();
        let result = classify_max_likelihood(&train, &test, Some(&truth), kind, geometry, config)?;
        for (d, p) in test_idx.iter().zip(&result.predictions) {
            predictions[*d] = *p;
        }
        hits += result.predictions.iter().zip(&truth).filter(|(p, t)| p == t).count();
        fold_accuracies.push(result.accuracy.unwrap_or(0.0));
        log::info!("fold {}/{folds}: accuracy {:.4}", f + 1, fold_accuracies[f]);
    }
    Ok(CrossValidation {
        fold_accuracies,
        accuracy: hits as f64 / corpus.len() as f64,
        predictions,
    })
}
