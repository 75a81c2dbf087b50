//! Planted generators: grids with known parameters and corpora sampled
//! from them.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{BagOfWords, Corpus};
use crate::error::{Error, Result};
use crate::grid::{CountingGrid, GridGeometry};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn categorical(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::Sampling(e.to_string()))
}

/// A smooth grid: every word gets a random home cell and a toroidal Gaussian
/// bump of width `sigma` around it, plus a small `background` mass.
pub fn planted_grid(geometry: GridGeometry, vocab_size: usize, sigma: f64, background: f64, seed: u64) -> Result<CountingGrid> {
    let mut r = rng(seed);
    let n = geometry.cells();
    let homes: Vec<usize> = (0..vocab_size).map(|_| r.gen_range(0..n)).collect();
    let cells: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let ci = geometry.cell(i);
            let mut v: Vec<f64> = homes
                .iter()
                .map(|&h| {
                    let d = geometry.toroidal_distance(ci, geometry.cell(h));
                    (-d * d / (2.0 * sigma * sigma)).exp() + background
                })
                .collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        })
        .collect();
    CountingGrid::from_cell_distributions(geometry, &cells)
}

fn draw_words(grid: &CountingGrid, location_of_token: impl FnMut(&mut ChaCha8Rng) -> usize, tokens: usize, r: &mut ChaCha8Rng) -> Result<BagOfWords> {
    let g = *grid.geometry();
    let mut pick_location = location_of_token;
    let cell_dists: Vec<WeightedIndex<f64>> = (0..g.cells()).map(|i| categorical(&grid.pi_at(i))).collect::<Result<_>>()?;
    let (wx, wy) = g.window();
    let mut words = Vec::with_capacity(tokens);
    for _ in 0..tokens {
        let l = g.cell(pick_location(r));
        let k = g.wrap((l.x + r.gen_range(0..wx)) as isize, (l.y + r.gen_range(0..wy)) as isize);
        words.push(cell_dists[g.index(k)].sample(r));
    }
    Ok(BagOfWords::from_tokens(words))
}

/// CG documents: one uniform window per document. Returns the corpus and the
/// window of every document.
pub fn sample_cg_corpus(grid: &CountingGrid, n_docs: usize, tokens: usize, seed: u64) -> Result<(Corpus, Vec<usize>)> {
    let mut r = rng(seed);
    let n = grid.cells();
    let mut docs = Vec::with_capacity(n_docs);
    let mut locations = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let l = r.gen_range(0..n);
        locations.push(l);
        docs.push(draw_words(grid, |_| l, tokens, &mut r)?);
    }
    Ok((Corpus::with_anonymous_vocab(grid.vocab_size(), docs)?, locations))
}

/// CCG documents: `theta` puts random weights on `components` random windows
/// and every token picks its own window from it. Returns the thetas too.
pub fn sample_ccg_corpus(
    grid: &CountingGrid,
    n_docs: usize,
    tokens: usize,
    components: usize,
    seed: u64,
) -> Result<(Corpus, Vec<Vec<f64>>)> {
    let mut r = rng(seed);
    let n = grid.cells();
    let mut docs = Vec::with_capacity(n_docs);
    let mut thetas = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let mut theta = vec![0.0; n];
        for _ in 0..components.max(1) {
            theta[r.gen_range(0..n)] += 0.1 + r.gen::<f64>();
        }
        let s: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= s);
        let dist = categorical(&theta)?;
        docs.push(draw_words(grid, |rr| dist.sample(rr), tokens, &mut r)?);
        thetas.push(theta);
    }
    Ok((Corpus::with_anonymous_vocab(grid.vocab_size(), docs)?, thetas))
}

/// Two-layer documents: one top window `m` per document; every token draws a
/// bottom window from `h_top,m`, a cell inside it and a word from that cell.
pub fn sample_hcg_corpus(
    bottom: &CountingGrid,
    top: &CountingGrid,
    n_docs: usize,
    tokens: usize,
    seed: u64,
) -> Result<(Corpus, Vec<usize>)> {
    if top.vocab_size() != bottom.cells() {
        return Err(Error::InvalidStack(format!(
            "top vocabulary {} does not match {} bottom cells",
            top.vocab_size(),
            bottom.cells()
        )));
    }
    let mut r = rng(seed);
    let nt = top.cells();
    let window_dists: Vec<WeightedIndex<f64>> = (0..nt).map(|m| categorical(&top.h_at(m))).collect::<Result<_>>()?;
    let mut docs = Vec::with_capacity(n_docs);
    let mut locations = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let m = r.gen_range(0..nt);
        locations.push(m);
        let dist = &window_dists[m];
        docs.push(draw_words(bottom, |rr| dist.sample(rr), tokens, &mut r)?);
    }
    Ok((Corpus::with_anonymous_vocab(bottom.vocab_size(), docs)?, locations))
}

/// Labeled CG corpus where class `c` only uses windows whose anchor lies in
/// the `c`-th vertical band of the grid.
pub fn sample_banded_classes(
    grid: &CountingGrid,
    n_classes: usize,
    docs_per_class: usize,
    tokens: usize,
    seed: u64,
) -> Result<Corpus> {
    let g = *grid.geometry();
    let (ex, ey) = g.extents();
    if n_classes < 2 || n_classes > ex {
        return Err(Error::Classification(format!("cannot band {ex} columns into {n_classes} classes")));
    }
    let mut r = rng(seed);
    let mut docs = Vec::new();
    let mut labels = Vec::new();
    for c in 0..n_classes {
        let lo = c * ex / n_classes;
        let hi = (c + 1) * ex / n_classes;
        for _ in 0..docs_per_class {
            let l = g.index(crate::grid::Cell::new(r.gen_range(lo..hi), r.gen_range(0..ey)));
            docs.push(draw_words(grid, |_| l, tokens, &mut r)?);
            labels.push(c);
        }
    }
    Corpus::with_anonymous_vocab(grid.vocab_size(), docs)?.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let g = GridGeometry::square(6, 2).unwrap();
        let grid = planted_grid(g, 20, 1.0, 1e-3, 4).unwrap();
        assert!(grid.max_normalization_error() < 1e-12);
        let (a, la) = sample_cg_corpus(&grid, 5, 30, 9).unwrap();
        let (b, lb) = sample_cg_corpus(&grid, 5, 30, 9).unwrap();
        assert_eq!(a.docs, b.docs);
        assert_eq!(la, lb);
        assert!(a.docs.iter().all(|d| d.total_tokens() == 30.0));
    }

    #[test]
    fn hcg_sampler_checks_chaining() {
        let g = GridGeometry::square(4, 2).unwrap();
        let bottom = planted_grid(g, 10, 1.0, 1e-3, 0).unwrap();
        let top = planted_grid(g, 16, 1.0, 1e-3, 1).unwrap();
        assert!(sample_hcg_corpus(&bottom, &top, 3, 10, 2).is_ok());
        let wrong = planted_grid(g, 15, 1.0, 1e-3, 1).unwrap();
        assert!(sample_hcg_corpus(&bottom, &wrong, 3, 10, 2).is_err());
    }

    #[test]
    fn banded_classes_are_labeled() {
        let g = GridGeometry::square(6, 2).unwrap();
        let grid = planted_grid(g, 20, 1.0, 1e-3, 4).unwrap();
        let c = sample_banded_classes(&grid, 3, 4, 10, 1).unwrap();
        assert_eq!(c.labels.as_deref(), Some(&[0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2][..]));
    }
}
