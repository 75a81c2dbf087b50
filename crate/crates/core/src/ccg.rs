//! Componential counting grid: every word picks its own window under a
//! per-document mixing distribution `theta`.
//!
//! The within-document posterior over (window, cell) pairs is kept joint.
//! For a word `z`
//!
//! ```text
//! q(l, k | z) ∝ theta_l * U_l(k) * pi_k(z)
//! q(l | z)    = theta_l * h_l(z) / p(z)
//! q(k | z)    = pi_k(z) * spread_k / p(z),   spread_k = (1/|W|) sum_{l : k in W_l} theta_l
//! p(z)        = sum_l theta_l h_l(z) = sum_k pi_k(z) spread_k
//! ```
//!
//! so one covering sum of `theta` per document serves every word.

use rayon::prelude::*;

use crate::cg::{init_grid, renormalize_cells, EmConfig};
use crate::corpus::{BagOfWords, Corpus};
use crate::error::{Error, Result};
use crate::grid::{covering_sums, CountingGrid, GridGeometry};
use crate::math::entropy;

/// Inner-loop settings of the CCG E-step and fold-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcgConfig {
    pub em: EmConfig,
    /// `theta` updates per outer EM iteration.
    pub inner_iters: usize,
    /// `theta` updates used when folding in unseen documents.
    pub fold_in_iters: usize,
}

impl Default for CcgConfig {
    fn default() -> Self {
        CcgConfig {
            em: EmConfig::default(),
            inner_iters: 10,
            fold_in_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcgModel {
    pub grid: CountingGrid,
}

/// Posterior statistics of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct CcgPosterior {
    /// Mixing distribution over window locations.
    pub theta: Vec<f64>,
    /// `L(l) = sum_n q(l_n = l)`; sums to the token count.
    pub location_counts: Vec<f64>,
    /// `sum_n q(k_n = i)`; sums to the token count.
    pub cell_usage: Vec<f64>,
    pub loglik: f64,
    /// `(1/|W|) sum_{l : i in W_l} theta_l` per cell.
    pub(crate) spread: Vec<f64>,
    /// `p(z)` for each entry of the bag, in bag order.
    pub(crate) evidence: Vec<f64>,
}

impl CcgPosterior {
    pub fn theta_entropy(&self) -> f64 {
        entropy(&self.theta)
    }

    /// Exact joint `q(l, k | z)` for one word of the bag, as a dense
    /// `cells x cells` table indexed `[l * cells + k]`. Meant for checks on
    /// small grids.
    pub fn joint(&self, grid: &CountingGrid, word: usize) -> Vec<f64> {
        let g = grid.geometry();
        let n = g.cells();
        let area = g.window_area() as f64;
        let mut out = vec![0.0; n * n];
        let mut total = 0.0;
        for l in 0..n {
            for c in g.window_cells_unchecked(g.cell(l)) {
                let k = g.index(c);
                let v = self.theta[l] / area * grid.pi(k, word);
                out[l * n + k] = v;
                total += v;
            }
        }
        if total > 0.0 {
            out.iter_mut().for_each(|v| *v /= total);
        }
        out
    }

    /// `q(l | z)` for one word.
    pub fn location_posterior(&self, grid: &CountingGrid, word: usize) -> Vec<f64> {
        let p: f64 = self.theta.iter().zip(grid.h_field(word)).map(|(t, h)| t * h).sum();
        self.theta
            .iter()
            .zip(grid.h_field(word))
            .map(|(t, h)| t * h / p)
            .collect()
    }

    /// `q(k | z)` for one word.
    pub fn cell_posterior(&self, grid: &CountingGrid, word: usize) -> Vec<f64> {
        let v: Vec<f64> = self
            .spread
            .iter()
            .zip(grid.pi_field(word))
            .map(|(s, p)| s * p)
            .collect();
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| x / t).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CcgFit {
    pub model: CcgModel,
    /// Final posteriors; `posteriors[t].theta` is document `t`'s mixing distribution.
    pub posteriors: Vec<CcgPosterior>,
    pub trace: Vec<f64>,
}

impl CcgFit {
    pub fn thetas(&self) -> Vec<&[f64]> {
        self.posteriors.iter().map(|p| p.theta.as_slice()).collect()
    }
}

/// One `theta` update: returns the new `theta` (`L / N`).
fn theta_update(h: &CountingGrid, bag: &BagOfWords, theta: &[f64], counts: &mut [f64]) {
    counts.iter_mut().for_each(|v| *v = 0.0);
    for (w, c) in bag.entries() {
        let hf = h.h_field(*w);
        let p: f64 = theta.iter().zip(hf).map(|(t, h)| t * h).sum();
        if p > 0.0 {
            let scale = c / p;
            for ((acc, t), h) in counts.iter_mut().zip(theta).zip(hf) {
                *acc += scale * t * h;
            }
        }
    }
}

impl CcgModel {
    pub fn new(grid: CountingGrid) -> Self {
        CcgModel { grid }
    }

    pub fn init(geometry: GridGeometry, vocab_size: usize, docs: &[BagOfWords], seed: u64) -> Result<Self> {
        Ok(Self::new(init_grid(geometry, vocab_size, docs, seed)?))
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.grid.geometry()
    }

    pub fn vocab_size(&self) -> usize {
        self.grid.vocab_size()
    }

    pub fn uniform_theta(&self) -> Vec<f64> {
        let n = self.grid.cells();
        vec![1.0 / n as f64; n]
    }

    /// Posterior statistics for a fixed `theta`, without updating it.
    pub fn posterior_given_theta(&self, bag: &BagOfWords, theta: &[f64]) -> CcgPosterior {
        let n = self.grid.cells();
        let area = self.geometry().window_area() as f64;
        let mut spread = covering_sums(theta, self.geometry()).expect("theta matches geometry");
        spread.iter_mut().for_each(|s| *s /= area);
        let mut location_counts = vec![0.0; n];
        let mut cell_usage = vec![0.0; n];
        let mut evidence = Vec::with_capacity(bag.distinct_words());
        let mut loglik = 0.0;
        for (w, c) in bag.entries() {
            let hf = self.grid.h_field(*w);
            let p: f64 = theta.iter().zip(hf).map(|(t, h)| t * h).sum();
            evidence.push(p);
            loglik += c * p.ln();
            if p > 0.0 {
                let scale = c / p;
                for ((acc, t), h) in location_counts.iter_mut().zip(theta).zip(hf) {
                    *acc += scale * t * h;
                }
                for (acc, pi) in cell_usage.iter_mut().zip(self.grid.pi_field(*w)) {
                    *acc += scale * pi;
                }
            }
        }
        for (u, s) in cell_usage.iter_mut().zip(&spread) {
            *u *= s;
        }
        CcgPosterior {
            theta: theta.to_vec(),
            location_counts,
            cell_usage,
            loglik,
            spread,
            evidence,
        }
    }

    /// Runs `inner_iters` updates of `theta` from `theta_in`, then returns the
    /// posterior at the final `theta`. A bag without tokens leaves `theta` as is.
    pub fn e_step(&self, bag: &BagOfWords, theta_in: &[f64], inner_iters: usize) -> Result<CcgPosterior> {
        bag.check_vocab(self.vocab_size())?;
        if theta_in.len() != self.grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.cells(),
                actual: theta_in.len(),
            });
        }
        Ok(self.e_step_unchecked(bag, theta_in, inner_iters))
    }

    fn e_step_unchecked(&self, bag: &BagOfWords, theta_in: &[f64], inner_iters: usize) -> CcgPosterior {
        let n_tokens = bag.total_tokens();
        let mut theta = theta_in.to_vec();
        if n_tokens > 0.0 {
            let mut counts = vec![0.0; theta.len()];
            for _ in 0..inner_iters {
                theta_update(&self.grid, bag, &theta, &mut counts);
                for (t, c) in theta.iter_mut().zip(&counts) {
                    *t = c / n_tokens;
                }
            }
        }
        self.posterior_given_theta(bag, &theta)
    }

    /// Test-time inference of `theta` with the grid frozen, from uniform.
    pub fn fold_in(&self, bag: &BagOfWords, n_iters: usize) -> Result<CcgPosterior> {
        self.e_step(bag, &self.uniform_theta(), n_iters)
    }

    /// `sum_z c(z) log sum_l theta_l h_l(z)`.
    pub fn log_likelihood(&self, bag: &BagOfWords, theta: &[f64]) -> Result<f64> {
        bag.check_vocab(self.vocab_size())?;
        Ok(bag
            .entries()
            .iter()
            .map(|(w, c)| {
                let p: f64 = theta.iter().zip(self.grid.h_field(*w)).map(|(t, h)| t * h).sum();
                c * p.ln()
            })
            .sum())
    }

    /// `pi_i(z) ∝ sum_t c_t(z) q_t(k = i | z)`, floored per cell.
    pub fn m_step(&self, docs: &[BagOfWords], posteriors: &[CcgPosterior]) -> Result<CcgModel> {
        if docs.len() != posteriors.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                actual: posteriors.len(),
            });
        }
        let z_count = self.vocab_size();
        let n = self.grid.cells();
        for (d, p) in docs.iter().zip(posteriors) {
            d.check_vocab(z_count)?;
            if p.evidence.len() != d.distinct_words() || p.spread.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: d.distinct_words(),
                    actual: p.evidence.len(),
                });
            }
        }
        // (doc, slot in the doc's bag) for every word
        let mut postings: Vec<Vec<(usize, usize)>> = vec![Vec::new(); z_count];
        for (d, bag) in docs.iter().enumerate() {
            for (slot, (w, _)) in bag.entries().iter().enumerate() {
                postings[*w].push((d, slot));
            }
        }
        let fields: Vec<Vec<f64>> = (0..z_count)
            .into_par_iter()
            .map(|w| {
                let mut acc = vec![0.0; n];
                for (d, slot) in &postings[w] {
                    let c = docs[*d].entries()[*slot].1;
                    let post = &posteriors[*d];
                    let p = post.evidence[*slot];
                    if p > 0.0 {
                        let scale = c / p;
                        for (a, s) in acc.iter_mut().zip(&post.spread) {
                            *a += scale * s;
                        }
                    }
                }
                for (a, pi) in acc.iter_mut().zip(self.grid.pi_field(w)) {
                    *a *= pi;
                }
                acc
            })
            .collect();
        let pi = renormalize_cells(&fields, self.grid.pi_table(), n);
        Ok(CcgModel {
            grid: CountingGrid::from_pi(*self.geometry(), z_count, pi)?,
        })
    }

    /// With the exact within-document posterior the bound is tight, so the
    /// free energy is the summed log-likelihood at each document's `theta`.
    pub fn free_energy(&self, docs: &[BagOfWords], posteriors: &[CcgPosterior]) -> Result<f64> {
        if docs.len() != posteriors.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                actual: posteriors.len(),
            });
        }
        let v: Vec<f64> = docs
            .par_iter()
            .zip(posteriors.par_iter())
            .map(|(d, p)| self.log_likelihood(d, &p.theta))
            .collect::<Result<_>>()?;
        Ok(v.iter().sum())
    }

    /// EM from this model; `theta` starts uniform and is carried across
    /// iterations.
    pub fn fit(self, docs: &[BagOfWords], config: &CcgConfig) -> Result<CcgFit> {
        for d in docs {
            d.check_vocab(self.vocab_size())?;
        }
        let mut model = self;
        let uniform = model.uniform_theta();
        let mut posteriors: Vec<CcgPosterior> = docs
            .par_iter()
            .map(|d| model.e_step_unchecked(d, &uniform, config.inner_iters))
            .collect();
        let mut trace = vec![posteriors.iter().map(|p| p.loglik).sum::<f64>()];
        for it in 0..config.em.max_iters {
            model = model.m_step(docs, &posteriors)?;
            posteriors = docs
                .par_iter()
                .zip(posteriors.par_iter())
                .map(|(d, p)| model.e_step_unchecked(d, &p.theta, config.inner_iters))
                .collect();
            let f: f64 = posteriors.iter().map(|p| p.loglik).sum();
            let prev = *trace.last().expect("trace is never empty");
            trace.push(f);
            log::debug!("ccg iteration {}: F = {:.6}", it + 1, f);
            if config.em.converged(prev, f) {
                break;
            }
        }
        Ok(CcgFit {
            model,
            posteriors,
            trace,
        })
    }
}

/// Initializes and trains a componential counting grid on `corpus`.
pub fn ccg_train(corpus: &Corpus, geometry: GridGeometry, seed: u64, config: &CcgConfig) -> Result<CcgFit> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    CcgModel::init(geometry, corpus.vocab_size(), &corpus.docs, seed)?.fit(&corpus.docs, config)
}
