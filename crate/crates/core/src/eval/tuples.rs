use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CountingGrid, PI_FLOOR};

/// Entries at or below this are floor mass and count as absent words.
pub const MASS_THRESHOLD: f64 = 10.0 * PI_FLOOR;

const LOCATION_RETRIES: usize = 1000;

/// `n` distinct words sampled from one cell's microtopic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalTuple {
    pub words: Vec<usize>,
    pub source_location: usize,
}

/// Draws `n` distinct words from `dist` one after another, each draw
/// conditioned on excluding the words already taken. Words with mass at or
/// below [`MASS_THRESHOLD`] are never drawn; `None` when fewer than `n` remain.
pub fn sample_distinct_words<R: Rng + ?Sized>(dist: &[f64], n: usize, rng: &mut R) -> Option<Vec<usize>> {
    let mut support: Vec<(usize, f64)> = dist
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, p)| *p > MASS_THRESHOLD)
        .collect();
    if support.len() < n {
        return None;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut pick = support.len() - 1;
        for (k, (_, p)) in support.iter().enumerate() {
            if u < *p {
                pick = k;
                break;
            }
            u -= p;
        }
        out.push(support.swap_remove(pick).0);
    }
    Some(out)
}

/// One tuple from the microtopic of `location`.
pub fn sample_tuple_at<R: Rng + ?Sized>(grid: &CountingGrid, location: usize, n: usize, rng: &mut R) -> Option<EvalTuple> {
    sample_distinct_words(&grid.pi_at(location), n, rng).map(|words| EvalTuple {
        words,
        source_location: location,
    })
}

/// `count` tuples, distinct as word sets: a uniform cell, then `n` distinct
/// words from its microtopic.
pub fn sample_tuples<R: Rng + ?Sized>(grid: &CountingGrid, n: usize, count: usize, rng: &mut R) -> Result<Vec<EvalTuple>> {
    if !(2..=5).contains(&n) {
        return Err(Error::Sampling(format!("tuple size {n} is outside 2..=5")));
    }
    let cells = grid.cells();
    let cell_dists: Vec<Vec<f64>> = (0..cells).map(|i| grid.pi_at(i)).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(200).max(10_000);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Sampling(format!(
                "found only {} distinct {n}-tuples after {max_attempts} draws",
                out.len()
            )));
        }
        let mut words = None;
        let mut location = 0;
        for _ in 0..LOCATION_RETRIES {
            location = rng.gen_range(0..cells);
            words = sample_distinct_words(&cell_dists[location], n, rng);
            if words.is_some() {
                break;
            }
        }
        let words = words.ok_or_else(|| {
            Error::Sampling(format!("no cell with {n} words of nonzero mass after {LOCATION_RETRIES} tries"))
        })?;
        let mut key = words.clone();
        key.sort_unstable();
        if seen.insert(key) {
            out.push(EvalTuple {
                words,
                source_location: location,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_word_microtopic_gives_the_only_pair() {
        let g = GridGeometry::square(2, 1).unwrap();
        let cells = vec![vec![0.5, 0.5, 0.0, 0.0]; 4];
        let grid = CountingGrid::from_cell_distributions(g, &cells).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = sample_tuples(&grid, 2, 1, &mut rng).unwrap();
        let mut w = t[0].words.clone();
        w.sort_unstable();
        assert_eq!(w, vec![0, 1]);
        assert!(sample_tuples(&grid, 2, 2, &mut rng).is_err());
        assert!(sample_tuples(&grid, 3, 1, &mut rng).is_err());
    }

    #[test]
    fn sequential_draws_follow_conditional_probabilities() {
        // P(first = 0) = 0.6, P(second = 1 | first = 0) = 0.3 / 0.4
        let dist = [0.6, 0.3, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut hits = 0;
        for _ in 0..n {
            let w = sample_distinct_words(&dist, 2, &mut rng).unwrap();
            if w == [0, 1] {
                hits += 1;
            }
        }
        let expected = 0.6 * 0.75;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(((hits as f64 / n as f64) - expected).abs() < 5.0 * se);
    }
}
