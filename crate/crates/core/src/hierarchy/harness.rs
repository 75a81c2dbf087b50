//! Flat CG against collapsed two-layer HCG over several seeds at a matched
//! compute budget.
//!
//! Budget accounting is in units of one flat EM iteration: a CG or CCG layer
//! iteration costs 1 unit, a joint HCG iteration (both layers) costs 2. The
//! hierarchical run spends a quarter of the budget on each pretraining stage
//! and the remaining half on joint refinement. Measured wall-clock is
//! reported next to the unit counts.

use std::time::Instant;

use serde::Serialize;

use super::{collapse, hcg_joint_em, pretrain_docs, JointConfig, LayerKind, LayerSpec};
use crate::ccg::CcgConfig;
use crate::cg::{CgModel, EmConfig};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::math::{mean, median, normal_upper_tail, std_dev};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessConfig {
    pub n_seeds: usize,
    /// Budget in flat-EM-iteration units.
    pub budget: usize,
    pub base_seed: u64,
    pub rel_tol: f64,
    pub ccg_inner_iters: usize,
    pub alternations: usize,
    /// Geometry of the top layer; defaults to the flat geometry.
    pub top_geometry: Option<GridGeometry>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            n_seeds: 10,
            budget: 1000,
            base_seed: 0,
            rel_tol: 1e-6,
            ccg_inner_iters: 10,
            alternations: 5,
            top_geometry: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Training log-likelihood (collapsed model for the hierarchical runs).
    pub loglik: f64,
    /// Iterations per stage; one entry for flat runs, three for hierarchical.
    pub iterations: Vec<usize>,
    pub units: usize,
    pub seconds: f64,
    /// `seconds` divided by the mean flat seconds per iteration.
    pub flat_equivalent_iterations: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedReport {
    pub budget: usize,
    pub flat: Vec<SeedRun>,
    pub hierarchical: Vec<SeedRun>,
    pub flat_mean: f64,
    pub flat_std: f64,
    pub flat_median: f64,
    pub flat_max: f64,
    pub hierarchical_mean: f64,
    pub hierarchical_std: f64,
    pub hierarchical_median: f64,
    pub hierarchical_min: f64,
    /// Mann-Whitney U counting (hierarchical, flat) pairs the hierarchical run wins.
    pub mann_whitney_u: f64,
    /// One-sided normal-approximation p-value for "hierarchical is larger".
    pub p_value: f64,
    /// `(min hierarchical - max flat) / flat_std`.
    pub margin_in_flat_std: f64,
}

fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mu = n1 * n2 / 2.0;
    let sigma = (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
    let z = if sigma > 0.0 { (u - mu) / sigma } else { 0.0 };
    (u, normal_upper_tail(z))
}

/// Trains `n_seeds` flat CGs and `n_seeds` pretrained-and-refined HCGs on
/// `corpus` and compares their training log-likelihoods.
pub fn seed_comparison_harness(corpus: &Corpus, geometry: GridGeometry, config: &HarnessConfig) -> Result<SeedReport> {
    if config.n_seeds < 2 {
        return Err(Error::InvalidStack("the seed comparison needs at least two seeds".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let docs = &corpus.docs;
    let z = corpus.vocab_size();
    let stage = (config.budget / 4).max(1);
    let top_geometry = config.top_geometry.unwrap_or(geometry);
    let specs = [
        LayerSpec::new(geometry, LayerKind::Ccg),
        LayerSpec::new(top_geometry, LayerKind::Cg),
    ];
    let layer_config = CcgConfig {
        em: EmConfig::new(stage, config.rel_tol),
        inner_iters: config.ccg_inner_iters,
        ..CcgConfig::default()
    };
    let joint = JointConfig {
        em: EmConfig::new(stage, config.rel_tol),
        alternations: config.alternations,
        init_fold_in_iters: config.ccg_inner_iters,
    };

    let mut flat = Vec::with_capacity(config.n_seeds);
    let mut hierarchical = Vec::with_capacity(config.n_seeds);
    for s in 0..config.n_seeds {
        let seed = config.base_seed.wrapping_add(s as u64);

        let start = Instant::now();
        let fit = CgModel::init(geometry, z, docs, seed)?.fit(docs, &EmConfig::new(config.budget, config.rel_tol))?;
        let loglik = docs.iter().map(|d| fit.model.log_likelihood(d)).sum::<Result<f64>>()?;
        let iters = fit.trace.len() - 1;
        flat.push(SeedRun {
            seed,
            loglik,
            iterations: vec![iters],
            units: iters,
            seconds: start.elapsed().as_secs_f64(),
            flat_equivalent_iterations: 0.0,
        });
        log::info!("seed {seed}: flat CG loglik {loglik:.3} after {iters} iterations");

        let start = Instant::now();
        let pre = pretrain_docs(docs, z, &specs, seed, &[layer_config, layer_config])?;
        let refined = hcg_joint_em(&pre.stack, docs, &joint)?;
        let collapsed = collapse(&refined.stack)?;
        let loglik = docs.iter().map(|d| collapsed.log_likelihood(d, 0)).sum::<Result<f64>>()?;
        let iterations = vec![pre.traces[0].len() - 1, pre.traces[1].len() - 1, refined.trace.len() - 1];
        hierarchical.push(SeedRun {
            seed,
            loglik,
            units: iterations[0] + iterations[1] + 2 * iterations[2],
            iterations,
            seconds: start.elapsed().as_secs_f64(),
            flat_equivalent_iterations: 0.0,
        });
        log::info!("seed {seed}: collapsed HCG loglik {loglik:.3}");
    }

    let flat_rate = {
        let secs: f64 = flat.iter().map(|r| r.seconds).sum();
        let iters: usize = flat.iter().map(|r| r.units).sum();
        if iters > 0 {
            secs / iters as f64
        } else {
            f64::NAN
        }
    };
    for r in flat.iter_mut().chain(hierarchical.iter_mut()) {
        r.flat_equivalent_iterations = r.seconds / flat_rate;
    }
    let f: Vec<f64> = flat.iter().map(|r| r.loglik).collect();
    let h: Vec<f64> = hierarchical.iter().map(|r| r.loglik).collect();
    let (u, p) = mann_whitney(&h, &f);
    let flat_max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hier_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let flat_std = std_dev(&f);
    Ok(SeedReport {
        budget: config.budget,
        flat_mean: mean(&f),
        flat_std,
        flat_median: median(&f),
        flat_max,
        hierarchical_mean: mean(&h),
        hierarchical_std: std_dev(&h),
        hierarchical_median: median(&h),
        hierarchical_min: hier_min,
        mann_whitney_u: u,
        p_value: p,
        margin_in_flat_std: (hier_min - flat_max) / flat_std,
        flat,
        hierarchical,
    })
}

impl std::fmt::Display for SeedReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "budget: {} flat-iteration units", self.budget)?;
        writeln!(f, "{:>6} {:>16} {:>8} {:>9} {:>16} {:>14} {:>9}", "seed", "flat", "iters", "secs", "hcg", "iters", "secs")?;
        for (a, b) in self.flat.iter().zip(&self.hierarchical) {
            let stages = b.iterations.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("/");
            writeln!(
                f,
                "{:>6} {:>16.4} {:>8} {:>9.2} {:>16.4} {:>14} {:>9.2}",
                a.seed, a.loglik, a.units, a.seconds, b.loglik, stages, b.seconds
            )?;
        }
        writeln!(
            f,
            "flat:         mean {:.4}  sd {:.4}  median {:.4}  max {:.4}",
            self.flat_mean, self.flat_std, self.flat_median, self.flat_max
        )?;
        writeln!(
            f,
            "hierarchical: mean {:.4}  sd {:.4}  median {:.4}  min {:.4}",
            self.hierarchical_mean, self.hierarchical_std, self.hierarchical_median, self.hierarchical_min
        )?;
        write!(
            f,
            "Mann-Whitney U = {:.1}, one-sided p = {:.4}, margin = {:.2} flat sd",
            self.mann_whitney_u, self.p_value, self.margin_in_flat_std
        )
    }
}
