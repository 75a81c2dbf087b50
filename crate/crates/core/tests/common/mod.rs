#![allow(dead_code)]

use std::collections::HashSet;

use microgrid::corpus::{BagOfWords, Corpus};
use microgrid::eval::EvalTuple;
use microgrid::grid::{Cell, CountingGrid, GridGeometry};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_corpus() -> Corpus {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny.corpus");
    microgrid::io::read_corpus(path).expect("fixture parses")
}

/// Every geometry with extents up to `max_e` and windows up to `max_w`.
pub fn small_geometries(max_e: usize, max_w: usize) -> Vec<GridGeometry> {
    let mut out = Vec::new();
    for ex in 1..=max_e {
        for ey in 1..=max_e {
            for wx in 1..=max_w.min(ex) {
                for wy in 1..=max_w.min(ey) {
                    out.push(GridGeometry::new((ex, ey), (wx, wy)).unwrap());
                }
            }
        }
    }
    out
}

pub fn random_grid<R: Rng>(g: GridGeometry, z: usize, rng: &mut R) -> CountingGrid {
    let cells: Vec<Vec<f64>> = (0..g.cells())
        .map(|_| {
            let v: Vec<f64> = (0..z).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect();
    CountingGrid::from_cell_distributions(g, &cells).unwrap()
}

pub fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Cells of the window anchored at `l`, by direct wrap-around indexing.
pub fn window_of(g: &GridGeometry, l: usize) -> Vec<usize> {
    let (ex, ey) = g.extents();
    let (wx, wy) = g.window();
    let Cell { x, y } = g.cell(l);
    let mut out = Vec::new();
    for dx in 0..wx {
        for dy in 0..wy {
            out.push(((x + dx) % ex) * ey + (y + dy) % ey);
        }
    }
    out
}

pub fn naive_window_sums(field: &[f64], g: &GridGeometry) -> Vec<f64> {
    (0..g.cells()).map(|l| window_of(g, l).iter().map(|k| field[*k]).sum()).collect()
}

pub fn naive_covering_sums(field: &[f64], g: &GridGeometry) -> Vec<f64> {
    let mut out = vec![0.0; g.cells()];
    for l in 0..g.cells() {
        for k in window_of(g, l) {
            out[k] += field[l];
        }
    }
    out
}

pub fn tokens_of(bag: &BagOfWords) -> Vec<usize> {
    bag.entries()
        .iter()
        .flat_map(|(w, c)| std::iter::repeat(*w).take(*c as usize))
        .collect()
}

/// CG by summing over every window and every cell assignment of every
/// token. Returns `(log p(tokens), q(window))`.
pub fn enumerate_cg(grid: &CountingGrid, prior: &[f64], tokens: &[usize]) -> (f64, Vec<f64>) {
    let g = grid.geometry();
    let area = g.window_area() as f64;
    let mut joint = vec![0.0; g.cells()];
    for l in 0..g.cells() {
        let cells = window_of(g, l);
        let mut choice = vec![0usize; tokens.len()];
        loop {
            let mut p = prior[l];
            for (n, w) in tokens.iter().enumerate() {
                p *= grid.pi(cells[choice[n]], *w) / area;
            }
            joint[l] += p;
            let mut n = 0;
            while n < choice.len() {
                choice[n] += 1;
                if choice[n] < cells.len() {
                    break;
                }
                choice[n] = 0;
                n += 1;
            }
            if n == choice.len() {
                break;
            }
        }
    }
    let total: f64 = joint.iter().sum();
    (total.ln(), joint.into_iter().map(|v| v / total).collect())
}

pub struct CcgEnumeration {
    pub loglik: f64,
    /// `marginals[n][l * cells + k]`: posterior of token `n` choosing window `l` and cell `k`.
    pub marginals: Vec<Vec<f64>>,
}

/// CCG with a fixed `theta`, by summing over every (window, cell) choice of
/// every token jointly.
pub fn enumerate_ccg(grid: &CountingGrid, theta: &[f64], tokens: &[usize]) -> CcgEnumeration {
    let g = grid.geometry();
    let n_cells = g.cells();
    let area = g.window_area() as f64;
    let pairs: Vec<(usize, usize)> = (0..n_cells)
        .flat_map(|l| window_of(g, l).into_iter().map(move |k| (l, k)))
        .collect();
    let mut marginals = vec![vec![0.0; n_cells * n_cells]; tokens.len()];
    let mut total = 0.0;
    let mut choice = vec![0usize; tokens.len()];
    loop {
        let mut p = 1.0;
        for (n, w) in tokens.iter().enumerate() {
            let (l, k) = pairs[choice[n]];
            p *= theta[l] * grid.pi(k, *w) / area;
        }
        total += p;
        for (n, c) in choice.iter().enumerate() {
            let (l, k) = pairs[*c];
            marginals[n][l * n_cells + k] += p;
        }
        let mut n = 0;
        while n < choice.len() {
            choice[n] += 1;
            if choice[n] < pairs.len() {
                break;
            }
            choice[n] = 0;
            n += 1;
        }
        if n == choice.len() {
            break;
        }
    }
    for m in &mut marginals {
        m.iter_mut().for_each(|v| *v /= total);
    }
    CcgEnumeration {
        loglik: total.ln(),
        marginals,
    }
}

/// Documents containing every tuple word, by scanning the raw bags.
pub fn scan_docs_with_all(corpus: &Corpus, words: &[usize]) -> Vec<usize> {
    (0..corpus.len())
        .filter(|d| words.iter().all(|w| corpus.docs[*d].count(*w) > 0.0))
        .collect()
}

pub fn brute_consistency(corpus: &Corpus, tuples: &[EvalTuple]) -> f64 {
    let total: usize = tuples.iter().map(|t| scan_docs_with_all(corpus, &t.words).len()).sum();
    total as f64 / tuples.len() as f64
}

/// Replays the same shuffles as the library with a cloned generator and
/// counts distinct documents by scanning.
pub fn brute_diversity<R: Rng>(corpus: &Corpus, tuples: &[EvalTuple], repeats: usize, rng: &mut R) -> Vec<f64> {
    let mut order: Vec<usize> = (0..tuples.len()).collect();
    let mut curve = vec![0.0; tuples.len()];
    for _ in 0..repeats {
        order.shuffle(rng);
        let mut seen = HashSet::new();
        for (pos, t) in order.iter().enumerate() {
            for d in scan_docs_with_all(corpus, &tuples[*t].words) {
                seen.insert(d);
            }
            curve[pos] += seen.len() as f64;
        }
    }
    curve.into_iter().map(|v| v / repeats as f64).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Largest deviations from enumeration over all small geometries.
#[derive(Debug, Default)]
pub struct OracleErrors {
    pub cases: usize,
    pub h: f64,
    pub cg_loglik: f64,
    pub cg_posterior: f64,
    pub ccg_loglik: f64,
    pub ccg_joint: f64,
    pub ccg_location_counts: f64,
    pub ccg_cell_usage: f64,
    pub ccg_theta_step: f64,
}

impl OracleErrors {
    pub fn max(&self) -> f64 {
        [
            self.h,
            self.cg_loglik,
            self.cg_posterior,
            self.ccg_loglik,
            self.ccg_joint,
            self.ccg_location_counts,
            self.ccg_cell_usage,
            self.ccg_theta_step,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// CG and CCG inference against enumeration on every geometry up to 4x4
/// with windows up to 2x2, a few random grids and bags each.
pub fn oracle_errors(seed: u64) -> OracleErrors {
    use microgrid::ccg::CcgModel;
    use microgrid::cg::CgModel;
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut e = OracleErrors::default();
    let z = 4;
    for g in small_geometries(4, 2) {
        for _ in 0..2 {
            let grid = random_grid(g, z, &mut rng);
            let naive_h: Vec<f64> = (0..z)
                .flat_map(|w| {
                    let field: Vec<f64> = (0..g.cells()).map(|k| grid.pi(k, w)).collect();
                    naive_window_sums(&field, &g).into_iter().map(|s| s / g.window_area() as f64)
                })
                .collect();
            e.h = e.h.max(max_abs_diff(&naive_h, grid.h_table()));
            let n_tokens = rng.gen_range(1..=3);
            let bag = BagOfWords::from_tokens((0..n_tokens).map(|_| rng.gen_range(0..z)));
            let tokens = tokens_of(&bag);

            let cg = CgModel::new(grid.clone());
            let (ll, q) = enumerate_cg(&grid, &cg.location_prior(), &tokens);
            let post = cg.e_step(&bag).unwrap();
            e.cg_loglik = e.cg_loglik.max((ll - cg.log_likelihood(&bag).unwrap()).abs());
            e.cg_loglik = e.cg_loglik.max((ll - post.loglik).abs());
            e.cg_posterior = e.cg_posterior.max(max_abs_diff(&q, &post.q));

            let ccg = CcgModel::new(grid.clone());
            let theta = random_simplex(g.cells(), &mut rng);
            let en = enumerate_ccg(&grid, &theta, &tokens);
            let post = ccg.posterior_given_theta(&bag, &theta);
            e.ccg_loglik = e.ccg_loglik.max((en.loglik - post.loglik).abs());
            e.ccg_loglik = e.ccg_loglik.max((en.loglik - ccg.log_likelihood(&bag, &theta).unwrap()).abs());
            let n = g.cells();
            let mut loc = vec![0.0; n];
            let mut usage = vec![0.0; n];
            for (t, w) in tokens.iter().enumerate() {
                e.ccg_joint = e.ccg_joint.max(max_abs_diff(&en.marginals[t], &post.joint(&grid, *w)));
                let l_marg: Vec<f64> = (0..n).map(|l| en.marginals[t][l * n..(l + 1) * n].iter().sum()).collect();
                let k_marg: Vec<f64> = (0..n).map(|k| (0..n).map(|l| en.marginals[t][l * n + k]).sum()).collect();
                e.ccg_joint = e.ccg_joint.max(max_abs_diff(&l_marg, &post.location_posterior(&grid, *w)));
                e.ccg_joint = e.ccg_joint.max(max_abs_diff(&k_marg, &post.cell_posterior(&grid, *w)));
                loc.iter_mut().zip(&l_marg).for_each(|(a, b)| *a += b);
                usage.iter_mut().zip(&k_marg).for_each(|(a, b)| *a += b);
            }
            e.ccg_location_counts = e.ccg_location_counts.max(max_abs_diff(&loc, &post.location_counts));
            e.ccg_cell_usage = e.ccg_cell_usage.max(max_abs_diff(&usage, &post.cell_usage));
            let stepped = ccg.e_step(&bag, &theta, 1).unwrap();
            let expected: Vec<f64> = loc.iter().map(|v| v / tokens.len() as f64).collect();
            e.ccg_theta_step = e.ccg_theta_step.max(max_abs_diff(&expected, &stepped.theta));
            e.cases += 1;
        }
    }
    e
}

/// Worst SAT deviation over every (extents, window) pair up to `max_e`:
/// exact mismatches on integer fields and relative error on real fields.
pub fn sat_errors(max_e: usize, seed: u64) -> (usize, usize, f64) {
    use microgrid::grid::{build_sat, covering_sums, window_sums};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = 0;
    let mut integer_mismatches = 0;
    let mut real_rel = 0.0f64;
    for ex in 1..=max_e {
        for ey in 1..=max_e {
            let ints: Vec<f64> = (0..ex * ey).map(|_| rng.gen_range(0..1000) as f64).collect();
            let reals: Vec<f64> = (0..ex * ey).map(|_| rng.gen_range(0.0..1.0)).collect();
            for wx in 1..=ex {
                for wy in 1..=ey {
                    let g = GridGeometry::new((ex, ey), (wx, wy)).unwrap();
                    pairs += 1;
                    let sat = build_sat(&ints, &g).unwrap();
                    let fast = window_sums(&ints, &g).unwrap();
                    let naive = naive_window_sums(&ints, &g);
                    for l in 0..g.cells() {
                        let via_table = sat.window_sum(g.cell(l)).unwrap();
                        if fast[l] != naive[l] || via_table != naive[l] {
                            integer_mismatches += 1;
                        }
                    }
                    let cov = covering_sums(&ints, &g).unwrap();
                    integer_mismatches += cov.iter().zip(naive_covering_sums(&ints, &g)).filter(|(a, b)| **a != *b).count();
                    let rel = |a: &[f64], b: &[f64]| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
                            .fold(0.0, f64::max)
                    };
                    real_rel = real_rel.max(rel(&window_sums(&reals, &g).unwrap(), &naive_window_sums(&reals, &g)));
                    real_rel = real_rel.max(rel(&covering_sums(&reals, &g).unwrap(), &naive_covering_sums(&reals, &g)));
                }
            }
        }
    }
    (pairs, integer_mismatches, real_rel)
}
