//! Stacks of grids where the location counts of one layer are the
//! observations of the next, plus collapse of a stack into one grid.

mod harness;
mod joint;

pub use harness::{seed_comparison_harness, HarnessConfig, SeedReport, SeedRun};
pub use joint::{hcg_joint_em, JointConfig, JointFit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccg::{CcgConfig, CcgModel};
use crate::cg::CgModel;
use crate::corpus::{BagOfWords, Corpus};
use crate::error::{Error, Result};
use crate::grid::{gaussian_smooth, CountingGrid, GridGeometry};
use crate::math::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Ccg,
    Cg,
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LayerKind::Ccg => "ccg",
            LayerKind::Cg => "cg",
        })
    }
}

/// Configuration of one layer. `smoothing` is a `(kernel_size, sigma)`
/// Gaussian applied to the location counts this layer receives from below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub geometry: GridGeometry,
    pub kind: LayerKind,
    pub smoothing: Option<(usize, f64)>,
}

impl LayerSpec {
    pub fn new(geometry: GridGeometry, kind: LayerKind) -> Self {
        LayerSpec {
            geometry,
            kind,
            smoothing: None,
        }
    }

    pub fn smoothed(mut self, kernel_size: usize, sigma: f64) -> Self {
        self.smoothing = Some((kernel_size, sigma));
        self
    }

    /// Parses `EXxEY:WXxWY:kind[:size/sigma]`, e.g. `32x32:5x5:ccg:5/0.75`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() < 3 || parts.len() > 4 {
            return Err(Error::InvalidStack(format!("bad layer spec {s:?}")));
        }
        let extents = crate::grid::parse_pair(parts[0])?;
        let window = crate::grid::parse_pair(parts[1])?;
        let kind = match parts[2].to_ascii_lowercase().as_str() {
            "ccg" => LayerKind::Ccg,
            "cg" => LayerKind::Cg,
            other => return Err(Error::InvalidStack(format!("unknown layer kind {other:?}"))),
        };
        let mut spec = LayerSpec::new(GridGeometry::new(extents, window)?, kind);
        if let Some(sm) = parts.get(3) {
            let (k, s) = sm
                .split_once('/')
                .ok_or_else(|| Error::InvalidStack(format!("bad smoothing {sm:?}")))?;
            let k: usize = k.parse().map_err(|_| Error::InvalidStack(format!("bad kernel size {k:?}")))?;
            let s: f64 = s.parse().map_err(|_| Error::InvalidStack(format!("bad sigma {s:?}")))?;
            spec = spec.smoothed(k, s);
        }
        Ok(spec)
    }

    /// Parses a comma-separated list of layer specs, bottom first.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(Self::parse).collect()
    }
}

impl std::fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (ex, ey) = self.geometry.extents();
        let (wx, wy) = self.geometry.window();
        write!(f, "{ex}x{ey}:{wx}x{wy}:{}", self.kind)?;
        if let Some((k, s)) = self.smoothing {
            write!(f, ":{k}/{s}")?;
        }
        Ok(())
    }
}

/// A trained layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Ccg(CcgModel),
    Cg(CgModel),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Ccg(_) => LayerKind::Ccg,
            Layer::Cg(_) => LayerKind::Cg,
        }
    }

    pub fn grid(&self) -> &CountingGrid {
        match self {
            Layer::Ccg(m) => &m.grid,
            Layer::Cg(m) => &m.grid,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.grid().geometry()
    }

    pub fn vocab_size(&self) -> usize {
        self.grid().vocab_size()
    }

    /// Log-likelihood of a bag; CCG layers fold in `theta` from uniform.
    pub fn log_likelihood(&self, bag: &BagOfWords, fold_in_iters: usize) -> Result<f64> {
        match self {
            Layer::Cg(m) => m.log_likelihood(bag),
            Layer::Ccg(m) => Ok(m.fold_in(bag, fold_in_iters)?.loglik),
        }
    }

    fn from_grid(kind: LayerKind, grid: CountingGrid) -> Self {
        match kind {
            LayerKind::Ccg => Layer::Ccg(CcgModel::new(grid)),
            LayerKind::Cg => Layer::Cg(CgModel::new(grid)),
        }
    }
}

/// Trained layers, bottom first. Layer `r + 1` has the cells of layer `r`
/// as its vocabulary; only the top layer may be a CG.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
    smoothing: Vec<Option<(usize, f64)>>,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let n = layers.len();
        Self::with_smoothing(layers, vec![None; n])
    }

    pub fn with_smoothing(layers: Vec<Layer>, smoothing: Vec<Option<(usize, f64)>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidStack("a stack needs at least one layer".into()));
        }
        if smoothing.len() != layers.len() {
            return Err(Error::DimensionMismatch {
                expected: layers.len(),
                actual: smoothing.len(),
            });
        }
        if smoothing[0].is_some() {
            return Err(Error::InvalidStack("the bottom layer has no location counts to smooth".into()));
        }
        for (r, layer) in layers.iter().enumerate() {
            if layer.kind() == LayerKind::Cg && r + 1 != layers.len() {
                return Err(Error::InvalidStack(format!("CG layer {r} is below another layer")));
            }
            if r > 0 && layer.vocab_size() != layers[r - 1].geometry().cells() {
                return Err(Error::InvalidStack(format!(
                    "layer {r} has {} words but layer {} has {} cells",
                    layer.vocab_size(),
                    r - 1,
                    layers[r - 1].geometry().cells()
                )));
            }
        }
        Ok(LayerStack { layers, smoothing })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn bottom(&self) -> &Layer {
        &self.layers[0]
    }

    pub fn top(&self) -> &Layer {
        self.layers.last().expect("stack is never empty")
    }

    /// Raw vocabulary size (that of the bottom layer).
    pub fn vocab_size(&self) -> usize {
        self.bottom().vocab_size()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .zip(&self.smoothing)
            .map(|(l, s)| LayerSpec {
                geometry: *l.geometry(),
                kind: l.kind(),
                smoothing: *s,
            })
            .collect()
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }
}

/// A stage-wise trained stack and the free-energy trace of every layer.
#[derive(Debug, Clone)]
pub struct StackFit {
    pub stack: LayerStack,
    pub traces: Vec<Vec<f64>>,
    /// Per-document location counts of the bottom layer at the end of its training.
    pub bottom_location_counts: Vec<Vec<f64>>,
}

fn layer_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Location counts of each document, optionally smoothed, as bags over the
/// cells of `geometry`.
fn lift(counts: &[Vec<f64>], geometry: &GridGeometry, smoothing: Option<(usize, f64)>) -> Result<Vec<BagOfWords>> {
    counts
        .par_iter()
        .map(|l| match smoothing {
            Some((k, s)) => Ok(BagOfWords::from_dense(&gaussian_smooth(l, geometry.extents(), k, s)?)),
            None => Ok(BagOfWords::from_dense(l)),
        })
        .collect()
}

/// Trains the layers one after another, feeding each CCG layer's location
/// counts (real-valued) to the layer above.
pub fn pretrain_stack(corpus: &Corpus, specs: &[LayerSpec], seed: u64, config: &CcgConfig) -> Result<StackFit> {
    pretrain_docs(&corpus.docs, corpus.vocab_size(), specs, seed, &vec![*config; specs.len()])
}

/// [`pretrain_stack`] on raw bags with a separate configuration per layer.
pub fn pretrain_docs(
    docs: &[BagOfWords],
    vocab_size: usize,
    specs: &[LayerSpec],
    seed: u64,
    configs: &[CcgConfig],
) -> Result<StackFit> {
    if specs.len() < 2 {
        return Err(Error::InvalidStack("pretraining needs at least two layers".into()));
    }
    if configs.len() != specs.len() {
        return Err(Error::DimensionMismatch {
            expected: specs.len(),
            actual: configs.len(),
        });
    }
    if specs[0].kind != LayerKind::Ccg {
        return Err(Error::InvalidStack("the bottom layer must be a CCG".into()));
    }
    if specs[0].smoothing.is_some() {
        return Err(Error::InvalidStack("the bottom layer has no location counts to smooth".into()));
    }
    if let Some(r) = specs[..specs.len() - 1].iter().position(|s| s.kind == LayerKind::Cg) {
        return Err(Error::InvalidStack(format!("CG layer {r} is below another layer")));
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut layers = Vec::with_capacity(specs.len());
    let mut traces = Vec::with_capacity(specs.len());
    let mut bottom_location_counts = Vec::new();
    let mut input: Vec<BagOfWords> = docs.to_vec();
    let mut vocab = vocab_size;
    for (r, spec) in specs.iter().enumerate() {
        let s = layer_seed(seed, r);
        let config = &configs[r];
        log::info!("pretraining layer {r} ({spec}) on {} documents", input.len());
        match spec.kind {
            LayerKind::Ccg => {
                let fit = CcgModel::init(spec.geometry, vocab, &input, s)?.fit(&input, config)?;
                let counts: Vec<Vec<f64>> = fit.posteriors.iter().map(|p| p.location_counts.clone()).collect();
                if r + 1 < specs.len() {
                    input = lift(&counts, &spec.geometry, specs[r + 1].smoothing)?;
                }
                if r == 0 {
                    bottom_location_counts = counts;
                }
                traces.push(fit.trace);
                layers.push(Layer::Ccg(fit.model));
            }
            LayerKind::Cg => {
                let fit = CgModel::init(spec.geometry, vocab, &input, s)?.fit(&input, &config.em)?;
                traces.push(fit.trace);
                layers.push(Layer::Cg(fit.model));
            }
        }
        vocab = spec.geometry.cells();
    }
    let smoothing = specs.iter().map(|s| s.smoothing).collect();
    Ok(StackFit {
        stack: LayerStack::with_smoothing(layers, smoothing)?,
        traces,
        bottom_location_counts,
    })
}

/// Marginalizes the intermediate layers: working down from the top,
/// `pi'_l(w) = sum_i pi_top,l(i) h_below,i(w)`. The result lives on the top
/// geometry, over the raw vocabulary, and has the top layer's kind.
pub fn collapse(stack: &LayerStack) -> Result<Layer> {
    let top = stack.top();
    let geometry = *top.geometry();
    let nt = geometry.cells();
    let mut pi = top.grid().pi_table().to_vec();
    for lower in stack.layers()[..stack.len() - 1].iter().rev() {
        let g = lower.grid();
        let v_count = g.cells();
        let z_count = g.vocab_size();
        let next: Vec<Vec<f64>> = (0..z_count)
            .into_par_iter()
            .map(|w| {
                let hw = g.h_field(w);
                let mut acc = vec![0.0; nt];
                for (v, h) in hw.iter().enumerate().take(v_count) {
                    let row = &pi[v * nt..(v + 1) * nt];
                    for (a, p) in acc.iter_mut().zip(row) {
                        *a += p * h;
                    }
                }
                acc
            })
            .collect();
        pi = next.concat();
    }
    let z_count = stack.vocab_size();
    for i in 0..nt {
        let s: f64 = (0..z_count).map(|w| pi[w * nt + i]).sum();
        for w in 0..z_count {
            pi[w * nt + i] /= s;
        }
    }
    Ok(Layer::from_grid(top.kind(), CountingGrid::from_pi(geometry, z_count, pi)?))
}

/// Effective emission of every top location for the given raw words:
/// `E[j][m] = (h_top · H_{r-1} · ... · H_1)[m][words[j]]`.
fn effective_emissions(stack: &LayerStack, words: &[usize]) -> Vec<Vec<f64>> {
    let top = stack.top().grid();
    let nt = top.cells();
    // rows[m] is a distribution over the vocabulary of the current layer
    let mut rows: Vec<Vec<f64>> = (0..nt).map(|m| top.h_at(m)).collect();
    let lower = &stack.layers()[..stack.len() - 1];
    for (idx, layer) in lower.iter().enumerate().rev() {
        let g = layer.grid();
        let targets: Vec<usize> = if idx == 0 { words.to_vec() } else { (0..g.vocab_size()).collect() };
        rows = rows
            .par_iter()
            .map(|row| {
                targets
                    .iter()
                    .map(|&w| row.iter().zip(g.h_field(w)).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
    }
    (0..words.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

/// Exact log-likelihood of a bag under the full stack, computed by pushing
/// the top windows' distributions through every layer below. A CG top mixes
/// over its locations with a uniform prior; a CCG top folds in `theta`.
pub fn stack_log_likelihood(stack: &LayerStack, bag: &BagOfWords, fold_in_iters: usize) -> Result<f64> {
    bag.check_vocab(stack.vocab_size())?;
    if bag.is_empty() {
        return Ok(0.0);
    }
    let words: Vec<usize> = bag.words().collect();
    let counts: Vec<f64> = bag.entries().iter().map(|(_, c)| *c).collect();
    let emissions = effective_emissions(stack, &words);
    let nt = stack.top().geometry().cells();
    match stack.top().kind() {
        LayerKind::Cg => {
            let prior = -(nt as f64).ln();
            let scores: Vec<f64> = (0..nt)
                .map(|m| {
                    prior
                        + emissions
                            .iter()
                            .zip(&counts)
                            .map(|(e, c)| c * e[m].ln())
                            .sum::<f64>()
                })
                .collect();
            Ok(log_sum_exp(&scores))
        }
        LayerKind::Ccg => Ok(fold_in_rows(&emissions, &counts, nt, fold_in_iters)),
    }
}

/// Per-document [`stack_log_likelihood`] over a set of bags.
pub fn stack_log_likelihoods(stack: &LayerStack, docs: &[BagOfWords], fold_in_iters: usize) -> Result<Vec<f64>> {
    docs.iter().map(|d| stack_log_likelihood(stack, d, fold_in_iters)).collect()
}

/// `theta` fold-in against explicit per-word emission fields.
fn fold_in_rows(emissions: &[Vec<f64>], counts: &[f64], n: usize, iters: usize) -> f64 {
    let total: f64 = counts.iter().sum();
    let mut theta = vec![1.0 / n as f64; n];
    let mut acc = vec![0.0; n];
    for _ in 0..iters {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (e, c) in emissions.iter().zip(counts) {
            let p: f64 = theta.iter().zip(e).map(|(t, h)| t * h).sum();
            if p > 0.0 {
                for ((a, t), h) in acc.iter_mut().zip(&theta).zip(e) {
                    *a += c / p * t * h;
                }
            }
        }
        for (t, a) in theta.iter_mut().zip(&acc) {
            *t = a / total;
        }
    }
    emissions
        .iter()
        .zip(counts)
        .map(|(e, c)| c * theta.iter().zip(e).map(|(t, h)| t * h).sum::<f64>().ln())
        .sum()
}
