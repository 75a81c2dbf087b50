//! The basic counting grid: one window generates the whole bag.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{word_postings, BagOfWords, Corpus};
use crate::error::{Error, Result};
use crate::grid::{covering_sums, project_floored, CountingGrid, GridGeometry, PI_FLOOR};
use crate::math::{entropy, log_sum_exp};

/// Stopping rule shared by all EM loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `|F_new - F_old| / |F_old|` drops below this.
    pub rel_tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 200,
            rel_tol: 1e-6,
        }
    }
}

impl EmConfig {
    pub fn new(max_iters: usize, rel_tol: f64) -> Self {
        EmConfig { max_iters, rel_tol }
    }

    pub(crate) fn converged(&self, prev: f64, next: f64) -> bool {
        let denom = prev.abs().max(f64::MIN_POSITIVE);
        ((next - prev) / denom).abs() < self.rel_tol
    }
}

/// Random initial microtopics: `pi_i(z) ∝ m(z) * (1 + u_i(z))` with `m` the
/// mean word distribution of `docs` and `u ~ U(0, 1)`.
///
/// When the window covers the whole grid there is a single effective window,
/// so one noise draw is shared by every cell.
pub fn init_grid(
    geometry: GridGeometry,
    vocab_size: usize,
    docs: &[BagOfWords],
    seed: u64,
) -> Result<CountingGrid> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut mean = vec![0.0; vocab_size];
    for d in docs {
        d.check_vocab(vocab_size)?;
        let n = d.total_tokens();
        if n > 0.0 {
            for (w, c) in d.entries() {
                mean[*w] += c / n;
            }
        }
    }
    if mean.iter().all(|m| *m == 0.0) {
        return Err(Error::EmptyCorpus);
    }
    let cells = geometry.cells();
    let shared = geometry.window() == geometry.extents();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared_noise: Vec<f64> = if shared {
        (0..vocab_size).map(|_| rng.gen::<f64>()).collect()
    } else {
        Vec::new()
    };
    let mut pi = vec![0.0; cells * vocab_size];
    let mut column = vec![0.0; vocab_size];
    for i in 0..cells {
        for (z, v) in column.iter_mut().enumerate() {
            let u = if shared { shared_noise[z] } else { rng.gen::<f64>() };
            *v = mean[z] * (1.0 + u);
        }
        project_floored(&mut column, PI_FLOOR);
        for (z, v) in column.iter().enumerate() {
            pi[z * cells + i] = *v;
        }
    }
    CountingGrid::from_pi(geometry, vocab_size, pi)
}

/// Counting-grid mixture model.
#[derive(Debug, Clone, PartialEq)]
pub struct CgModel {
    pub grid: CountingGrid,
    log_prior: Vec<f64>,
}

/// Location posterior of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct CgPosterior {
    /// `q(l)` over all window locations.
    pub q: Vec<f64>,
    pub loglik: f64,
}

impl CgPosterior {
    pub fn entropy(&self) -> f64 {
        entropy(&self.q)
    }
}

/// A trained model, the final posteriors and the free-energy trace.
#[derive(Debug, Clone)]
pub struct CgFit {
    pub model: CgModel,
    pub posteriors: Vec<CgPosterior>,
    /// Free energy after the initial E-step and after every EM iteration.
    pub trace: Vec<f64>,
}

impl CgModel {
    /// Wraps a grid with the uniform location prior.
    pub fn new(grid: CountingGrid) -> Self {
        let n = grid.cells();
        CgModel {
            grid,
            log_prior: vec![-(n as f64).ln(); n],
        }
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

    pub fn location_prior(&self) -> Vec<f64> {
        self.log_prior.iter().map(|l| l.exp()).collect()
    }

    /// `log prior(l) + sum_z c(z) log h_l(z)` for every location.
    fn scores(&self, bag: &BagOfWords) -> Vec<f64> {
        let mut s = self.log_prior.clone();
        for (w, c) in bag.entries() {
            for (acc, lh) in s.iter_mut().zip(self.grid.log_h_field(*w)) {
                *acc += c * lh;
            }
        }
        s
    }

    pub(crate) fn posterior(&self, bag: &BagOfWords) -> CgPosterior {
        let s = self.scores(bag);
        let loglik = log_sum_exp(&s);
        let q = if loglik.is_finite() {
            s.iter().map(|v| (v - loglik).exp()).collect()
        } else {
            self.location_prior()
        };
        CgPosterior { q, loglik }
    }

    /// Exact location posterior `q(l) ∝ prior(l) * prod_n h_l(w_n)`.
    pub fn e_step(&self, bag: &BagOfWords) -> Result<CgPosterior> {
        bag.check_vocab(self.vocab_size())?;
        Ok(self.posterior(bag))
    }

    pub fn e_step_all(&self, docs: &[BagOfWords]) -> Result<Vec<CgPosterior>> {
        for d in docs {
            d.check_vocab(self.vocab_size())?;
        }
        Ok(docs.par_iter().map(|d| self.posterior(d)).collect())
    }

    /// `log sum_l prior(l) prod_n h_l(w_n)`.
    pub fn log_likelihood(&self, bag: &BagOfWords) -> Result<f64> {
        bag.check_vocab(self.vocab_size())?;
        Ok(log_sum_exp(&self.scores(bag)))
    }

    /// Ratio-form update
    /// `pi_i(z) ∝ pi_i(z) * sum_t c_t(z) * sum_{l : i in W_l} q_t(l) / h_l(z)`,
    /// followed by the floored renormalization of every cell.
    pub fn m_step(&self, docs: &[BagOfWords], posteriors: &[CgPosterior]) -> Result<CgModel> {
        if docs.len() != posteriors.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                actual: posteriors.len(),
            });
        }
        let z_count = self.vocab_size();
        let geometry = *self.geometry();
        let n = geometry.cells();
        for d in docs {
            d.check_vocab(z_count)?;
        }
        if let Some(p) = posteriors.iter().find(|p| p.q.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: p.q.len(),
            });
        }
        let postings = word_postings(docs, z_count);
        let fields: Vec<Vec<f64>> = (0..z_count)
            .into_par_iter()
            .map(|w| {
                let list = &postings[w];
                if list.is_empty() {
                    return vec![0.0; n];
                }
                let mut acc = vec![0.0; n];
                for (d, c) in list {
                    for (a, q) in acc.iter_mut().zip(&posteriors[*d].q) {
                        *a += c * q;
                    }
                }
                for (a, h) in acc.iter_mut().zip(self.grid.h_field(w)) {
                    *a /= h.max(PI_FLOOR);
                }
                let cov = covering_sums(&acc, &geometry).expect("field matches geometry");
                cov.iter()
                    .zip(self.grid.pi_field(w))
                    .map(|(r, p)| r * p)
                    .collect()
            })
            .collect();
        let pi = renormalize_cells(&fields, self.grid.pi_table(), n);
        Ok(CgModel {
            grid: CountingGrid::from_pi(geometry, z_count, pi)?,
            log_prior: self.log_prior.clone(),
        })
    }

    /// `F = sum_t [ sum_l q_t(l) (sum_z c_t(z) log h_l(z) + log prior(l)) + H(q_t) ]`.
    pub fn free_energy(&self, docs: &[BagOfWords], posteriors: &[CgPosterior]) -> Result<f64> {
        if docs.len() != posteriors.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                actual: posteriors.len(),
            });
        }
        let per_doc: Vec<f64> = docs
            .par_iter()
            .zip(posteriors.par_iter())
            .map(|(bag, post)| {
                let s = self.scores(bag);
                let expected: f64 = s
                    .iter()
                    .zip(&post.q)
                    .filter(|(_, q)| **q > 0.0)
                    .map(|(s, q)| q * s)
                    .sum();
                expected + entropy(&post.q)
            })
            .collect();
        Ok(per_doc.iter().sum())
    }

    /// Runs EM from this model until the relative change of the free energy
    /// falls under `config.rel_tol` or `config.max_iters` updates were made.
    pub fn fit(self, docs: &[BagOfWords], config: &EmConfig) -> Result<CgFit> {
        let mut model = self;
        let mut posteriors = model.e_step_all(docs)?;
        let mut trace = vec![total_loglik(&posteriors)];
        for it in 0..config.max_iters {
            model = model.m_step(docs, &posteriors)?;
            posteriors = model.e_step_all(docs)?;
            let f = total_loglik(&posteriors);
            let prev = *trace.last().expect("trace is never empty");
            trace.push(f);
            log::debug!("cg iteration {}: F = {:.6}", it + 1, f);
            if config.converged(prev, f) {
                break;
            }
        }
        Ok(CgFit {
            model,
            posteriors,
            trace,
        })
    }
}

fn total_loglik(posteriors: &[CgPosterior]) -> f64 {
    posteriors.iter().map(|p| p.loglik).sum()
}

/// Turns word-major unnormalized fields into floored per-cell distributions.
/// Cells that received no mass keep their previous distribution.
pub(crate) fn renormalize_cells(fields: &[Vec<f64>], previous: &[f64], cells: usize) -> Vec<f64> {
    let z_count = fields.len();
    let mut pi = vec![0.0; cells * z_count];
    let mut column = vec![0.0; z_count];
    for i in 0..cells {
        for (z, v) in column.iter_mut().enumerate() {
            *v = fields[z][i];
        }
        if !project_floored(&mut column, PI_FLOOR) {
            for (z, v) in column.iter_mut().enumerate() {
                *v = previous[z * cells + i];
            }
        }
        for (z, v) in column.iter().enumerate() {
            pi[z * cells + i] = *v;
        }
    }
    pi
}

/// Initializes and trains a counting grid on `corpus`.
pub fn cg_train(corpus: &Corpus, geometry: GridGeometry, seed: u64, config: &EmConfig) -> Result<CgFit> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    CgModel::init(geometry, corpus.vocab_size(), &corpus.docs, seed)?.fit(&corpus.docs, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;

    fn toy_grid() -> CountingGrid {
        // 4x4 grid over 3 words, hand-built and unequal everywhere
        let g = GridGeometry::square(4, 2).unwrap();
        let cells: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                let a = 1.0 + (i % 5) as f64;
                let b = 1.0 + ((i * 7) % 3) as f64;
                let c = 0.5 + (i / 4) as f64;
                let s = a + b + c;
                vec![a / s, b / s, c / s]
            })
            .collect();
        CountingGrid::from_cell_distributions(g, &cells).unwrap()
    }

    #[test]
    fn uniform_model_posterior_and_likelihood() {
        let g = GridGeometry::square(5, 2).unwrap();
        let m = CgModel::new(CountingGrid::uniform(g, 8).unwrap());
        let bag = BagOfWords::from_tokens([1, 1, 3, 7, 0]);
        let p = m.e_step(&bag).unwrap();
        assert!(p.q.iter().all(|q| (q - 1.0 / 25.0).abs() < 1e-15));
        assert!((p.loglik + 5.0 * 8f64.ln()).abs() < 1e-12);
        assert!((m.log_likelihood(&bag).unwrap() - p.loglik).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_enumeration() {
        let m = CgModel::new(toy_grid());
        let g = *m.geometry();
        let bag = BagOfWords::from_counts([(0, 2.0)]);
        let p = m.e_step(&bag).unwrap();
        // enumerate windows directly from pi
        let joint: Vec<f64> = (0..16)
            .map(|l| {
                let cells = g.window_cells(g.cell(l)).unwrap();
                let h: f64 = cells.iter().map(|c| m.grid.pi(g.index(*c), 0)).sum::<f64>() / 4.0;
                h * h / 16.0
            })
            .collect();
        let total: f64 = joint.iter().sum();
        for l in 0..16 {
            assert!((p.q[l] - joint[l] / total).abs() < 1e-12);
        }
        assert!((p.loglik - total.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_bag_keeps_prior() {
        let m = CgModel::new(toy_grid());
        let p = m.e_step(&BagOfWords::default()).unwrap();
        assert_eq!(p.loglik, 0.0);
        assert!(p.q.iter().all(|q| (q - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn free_energy_is_tight_after_e_step() {
        let m = CgModel::new(toy_grid());
        let docs = vec![
            BagOfWords::from_counts([(0, 3.0), (2, 1.0)]),
            BagOfWords::from_counts([(1, 5.0)]),
        ];
        let posts = m.e_step_all(&docs).unwrap();
        let f = m.free_energy(&docs, &posts).unwrap();
        let ll: f64 = posts.iter().map(|p| p.loglik).sum();
        assert!((f - ll).abs() < 1e-9);
        // any other q gives a lower bound
        let flat = vec![
            CgPosterior {
                q: vec![1.0 / 16.0; 16],
                loglik: 0.0
            };
            2
        ];
        assert!(m.free_energy(&docs, &flat).unwrap() <= f);
    }

    #[test]
    fn delta_posteriors_only_move_their_window() {
        let g = GridGeometry::square(3, 2).unwrap();
        let grid = CountingGrid::uniform(g, 3).unwrap();
        let m = CgModel::new(grid);
        let star = Cell::new(1, 1);
        let docs = vec![BagOfWords::from_counts([(0, 4.0), (1, 1.0)])];
        let mut q = vec![0.0; 9];
        q[g.index(star)] = 1.0;
        let posts = vec![CgPosterior { q, loglik: 0.0 }];
        let next = m.m_step(&docs, &posts).unwrap();
        for i in 0..9 {
            let inside = g.window_contains(star, g.cell(i));
            let pi = next.grid.pi_at(i);
            if inside {
                assert!((pi[0] - 0.8).abs() < 1e-9);
                assert!((pi[1] - 0.2).abs() < 1e-9);
            } else {
                assert!(pi.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn mismatched_posteriors_are_rejected() {
        let m = CgModel::new(toy_grid());
        let docs = vec![BagOfWords::from_tokens([0])];
        assert!(m.m_step(&docs, &[]).is_err());
    }

    #[test]
    fn init_is_deterministic_and_seed_dependent() {
        let g = GridGeometry::square(4, 2).unwrap();
        let docs = vec![BagOfWords::from_tokens([0, 1, 1, 2]), BagOfWords::from_tokens([3])];
        let a = init_grid(g, 4, &docs, 9).unwrap();
        let b = init_grid(g, 4, &docs, 9).unwrap();
        let c = init_grid(g, 4, &docs, 10).unwrap();
        assert_eq!(a.pi_table(), b.pi_table());
        let diff = a
            .pi_table()
            .iter()
            .zip(c.pi_table())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff > 0.0);
        assert!(a.min_pi() >= PI_FLOOR);
    }

    #[test]
    fn single_word_corpus_dominates_every_cell() {
        let g = GridGeometry::square(3, 2).unwrap();
        let docs = vec![BagOfWords::from_tokens([2, 2, 2])];
        let grid = init_grid(g, 5, &docs, 1).unwrap();
        for i in 0..9 {
            assert!(grid.pi(i, 2) > 1.0 - 1e-8);
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let g = GridGeometry::square(3, 2).unwrap();
        assert!(matches!(init_grid(g, 5, &[], 1), Err(Error::EmptyCorpus)));
    }
}
