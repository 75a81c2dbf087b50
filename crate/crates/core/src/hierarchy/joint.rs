//! Joint variational EM for a CCG layer under a CG layer.
//!
//! Per document the bound is maximized by coordinate ascent between the
//! top posterior `q(m)` and the exact joint bottom posterior over
//! (window, cell), which is the CCG posterior with `theta` replaced by the
//! top-down prior `rho(l) ∝ exp(sum_m q(m) log h_top,m(l))`. After a top
//! step the bound has the closed form
//!
//! ```text
//! F = sum_z c(z) log p_rho(z) - sum_l L(l) log rho(l) + log sum_m prior(m) exp(sum_l L(l) log h_top,m(l))
//! ```

use rayon::prelude::*;

use super::{Layer, LayerKind, LayerStack};
use crate::ccg::{CcgModel, CcgPosterior};
use crate::cg::{CgModel, CgPosterior, EmConfig};
use crate::corpus::BagOfWords;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig {
    pub em: EmConfig,
    /// Bottom/top alternations inside one E-step.
    pub alternations: usize,
    /// `theta` iterations of the bottom fold-in that seeds `q(m)`.
    pub init_fold_in_iters: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            em: EmConfig::default(),
            alternations: 5,
            init_fold_in_iters: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointFit {
    pub stack: LayerStack,
    /// Bound after the first E-step (the pretrained model) and after every iteration.
    pub trace: Vec<f64>,
    pub top_posteriors: Vec<CgPosterior>,
    pub bottom_posteriors: Vec<CcgPosterior>,
}

struct DocState {
    top: CgPosterior,
    bottom: CcgPosterior,
    lifted: BagOfWords,
    bound: f64,
}

/// Normalized `rho` and its log for the current top posterior.
fn top_down_prior(top: &CgModel, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let support: Vec<(usize, f64)> = q.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect();
    let v_count = top.vocab_size();
    let mut log_rho: Vec<f64> = (0..v_count)
        .map(|l| {
            let lh = top.grid.log_h_field(l);
            support.iter().map(|(m, w)| w * lh[*m]).sum()
        })
        .collect();
    let lse = crate::math::log_sum_exp(&log_rho);
    log_rho.iter_mut().for_each(|v| *v -= lse);
    let rho = log_rho.iter().map(|v| v.exp()).collect();
    (rho, log_rho)
}

fn e_step_doc(
    bottom: &CcgModel,
    top: &CgModel,
    bag: &BagOfWords,
    previous: Option<&[f64]>,
    config: &JointConfig,
) -> DocState {
    let mut q = match previous {
        Some(q) => q.to_vec(),
        None => {
            let seed = bottom.fold_in(bag, config.init_fold_in_iters).expect("bag checked against vocabulary");
            top.posterior(&BagOfWords::from_dense(&seed.location_counts)).q
        }
    };
    let rounds = config.alternations.max(1);
    let mut state = None;
    for _ in 0..rounds {
        let (rho, log_rho) = top_down_prior(top, &q);
        let b = bottom.posterior_given_theta(bag, &rho);
        let lifted = BagOfWords::from_dense(&b.location_counts);
        let t = top.posterior(&lifted);
        let cross: f64 = b.location_counts.iter().zip(&log_rho).map(|(l, r)| l * r).sum();
        let bound = b.loglik - cross + t.loglik;
        q.clone_from(&t.q);
        state = Some(DocState {
            top: t,
            bottom: b,
            lifted,
            bound,
        });
    }
    state.expect("at least one alternation")
}

fn e_step_all(
    bottom: &CcgModel,
    top: &CgModel,
    docs: &[BagOfWords],
    previous: Option<&[DocState]>,
    config: &JointConfig,
) -> Vec<DocState> {
    docs.par_iter()
        .enumerate()
        .map(|(t, d)| e_step_doc(bottom, top, d, previous.map(|p| p[t].top.q.as_slice()), config))
        .collect()
}

/// Refines a pretrained two-layer stack (CCG bottom, CG top) by joint EM.
pub fn hcg_joint_em(stack: &LayerStack, docs: &[BagOfWords], config: &JointConfig) -> Result<JointFit> {
    let (mut bottom, mut top) = match stack.layers() {
        [Layer::Ccg(b), Layer::Cg(t)] => (b.clone(), t.clone()),
        _ => {
            return Err(Error::InvalidStack(format!(
                "joint refinement needs exactly a CCG layer under a CG layer, got [{}]",
                stack.specs().iter().map(|s| s.kind.to_string()).collect::<Vec<_>>().join(", ")
            )))
        }
    };
    for d in docs {
        d.check_vocab(bottom.vocab_size())?;
    }
    let smoothing = stack.specs().iter().map(|s| s.smoothing).collect::<Vec<_>>();
    let mut states = e_step_all(&bottom, &top, docs, None, config);
    let mut trace = vec![states.iter().map(|s| s.bound).sum::<f64>()];
    for it in 0..config.em.max_iters {
        let bottom_posts: Vec<CcgPosterior> = states.iter().map(|s| s.bottom.clone()).collect();
        let top_posts: Vec<CgPosterior> = states.iter().map(|s| s.top.clone()).collect();
        let lifted: Vec<BagOfWords> = states.iter().map(|s| s.lifted.clone()).collect();
        bottom = bottom.m_step(docs, &bottom_posts)?;
        top = top.m_step(&lifted, &top_posts)?;
        states = e_step_all(&bottom, &top, docs, Some(&states), config);
        let f: f64 = states.iter().map(|s| s.bound).sum();
        let prev = *trace.last().expect("trace is never empty");
        trace.push(f);
        log::debug!("hcg iteration {}: F = {:.6}", it + 1, f);
        if config.em.converged(prev, f) {
            break;
        }
    }
    let (top_posteriors, bottom_posteriors) = states.into_iter().map(|s| (s.top, s.bottom)).unzip();
    Ok(JointFit {
        stack: LayerStack::with_smoothing(vec![Layer::Ccg(bottom), Layer::Cg(top)], smoothing)?,
        trace,
        top_posteriors,
        bottom_posteriors,
    })
}

impl LayerStack {
    /// True for a CCG layer directly under a CG top.
    pub fn is_two_layer_hcg(&self) -> bool {
        self.len() == 2 && self.bottom().kind() == LayerKind::Ccg && self.top().kind() == LayerKind::Cg
    }
}
