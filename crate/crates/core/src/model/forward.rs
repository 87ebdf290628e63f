use super::config::{ModelConfig, TOKENS};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::tensor::{GradGraph, NodeId, Scalar, Tensor};

/// Parameter nodes of one model registered in a [`GradGraph`], in the
/// same fixed order as [`ModelParams::tensors`].
#[derive(Clone, Debug)]
pub struct ModelNodes {
    pub all: Vec<NodeId>,
    sed: Vec<(NodeId, NodeId)>,
    global_token: NodeId,
    heads: Vec<[NodeId; 3]>,
    feature: (NodeId, NodeId),
    classifier: (NodeId, NodeId),
}

impl ModelNodes {
    /// Register every tensor; those with `trainable[i]` false become constants.
    pub fn register<S: Scalar>(g: &mut GradGraph<S>, params: &ModelParams<S>, trainable: &[bool]) -> Self {
        let all: Vec<NodeId> = params
            .tensors()
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                if trainable.get(i).copied().unwrap_or(true) {
                    g.param(t)
                } else {
                    g.input(t.clone())
                }
            })
            .collect();
        Self::from_ids(all, params.sed.len(), params.heads.len())
    }

    /// Register every tensor as a constant.
    pub fn constants<S: Scalar>(g: &mut GradGraph<S>, params: &ModelParams<S>) -> Self {
        let all = params.tensors().into_iter().map(|t| g.input(t.clone())).collect();
        Self::from_ids(all, params.sed.len(), params.heads.len())
    }

    /// Wrap nodes already recorded in the fixed parameter order.
    pub fn from_nodes(all: Vec<NodeId>, cfg: &ModelConfig) -> Self {
        Self::from_ids(all, if cfg.use_sed { 3 } else { 1 }, cfg.heads)
    }

    fn from_ids(all: Vec<NodeId>, layers: usize, heads: usize) -> Self {
        let sed = (0..layers).map(|l| (all[2 * l], all[2 * l + 1])).collect();
        let g = 2 * layers;
        let h0 = g + 1;
        let heads = (0..heads)
            .map(|h| [all[h0 + 3 * h], all[h0 + 3 * h + 1], all[h0 + 3 * h + 2]])
            .collect::<Vec<_>>();
        let f = h0 + 3 * heads.len();
        Self {
            sed,
            global_token: all[g],
            heads,
            feature: (all[f], all[f + 1]),
            classifier: (all[f + 2], all[f + 3]),
            all,
        }
    }
}

/// Intermediate nodes of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardNodes {
    /// Output of each SED layer (after relu).
    pub sed: Vec<NodeId>,
    /// `4×K3` pooled quadrant tokens.
    pub tokens: NodeId,
    /// `5×K3` token set with the global token in row 0.
    pub token_set: NodeId,
    /// `5×d_attn` output of each head.
    pub heads: Vec<NodeId>,
    /// Softmax attention matrix of each head.
    pub attention: Vec<NodeId>,
    /// `5×K3` attention output plus residual.
    pub ta: NodeId,
    /// `1×j`
    pub fea: NodeId,
    /// `1×K`
    pub logits: NodeId,
}

fn check_patch(cfg: &ModelConfig, shape: &[usize]) -> Result<()> {
    let want = [cfg.patch_size, cfg.patch_size, cfg.in_channels()];
    if shape != want {
        return Err(Error::dim(format!("patch shape {shape:?}, model expects {want:?}")));
    }
    Ok(())
}

fn graph_sed<S: Scalar>(g: &mut GradGraph<S>, nodes: &ModelNodes, x: NodeId) -> Result<Vec<NodeId>> {
    let mut outs = Vec::with_capacity(nodes.sed.len());
    let mut h = x;
    for (i, &(k, b)) in nodes.sed.iter().enumerate() {
        let pre = if i == 0 && nodes.sed.len() == 3 {
            g.conv3d(h, k, b)?
        } else {
            g.conv2d(h, k, b)?
        };
        h = g.relu(pre);
        outs.push(h);
    }
    Ok(outs)
}

fn graph_head<S: Scalar>(g: &mut GradGraph<S>, t: NodeId, w: [NodeId; 3]) -> Result<(NodeId, NodeId)> {
    let q = g.matmul(t, w[0])?;
    let k = g.matmul(t, w[1])?;
    let v = g.matmul(t, w[2])?;
    let d = g.value(w[0]).shape()[1];
    let logits = g.matmul_nt(q, k)?;
    let scaled = g.scale(logits, S::of(1.0 / (d as f64).sqrt()));
    let attn = g.softmax_rows(scaled)?;
    Ok((g.matmul(attn, v)?, attn))
}

fn graph_tail<S: Scalar>(
    g: &mut GradGraph<S>,
    nodes: &ModelNodes,
    token_set: NodeId,
) -> Result<(Vec<NodeId>, Vec<NodeId>, NodeId, NodeId, NodeId)> {
    let mut heads = Vec::with_capacity(nodes.heads.len());
    let mut attention = Vec::with_capacity(nodes.heads.len());
    for &w in &nodes.heads {
        let (out, attn) = graph_head(g, token_set, w)?;
        heads.push(out);
        attention.push(attn);
    }
    let a = g.concat_cols(&heads)?;
    let ta = g.add(a, token_set)?;
    let flat_len = g.value(ta).len();
    let flat = g.reshape(ta, &[1, flat_len])?;
    let fea = g.affine(flat, nodes.feature.0, nodes.feature.1)?;
    let logits = g.affine(fea, nodes.classifier.0, nodes.classifier.1)?;
    Ok((heads, attention, ta, fea, logits))
}

/// Record the full network on `g` for the patch node `x` (`P×P×C`).
pub fn forward_graph<S: Scalar>(
    g: &mut GradGraph<S>,
    nodes: &ModelNodes,
    cfg: &ModelConfig,
    x: NodeId,
) -> Result<ForwardNodes> {
    check_patch(cfg, g.value(x).shape())?;
    let sed = graph_sed(g, nodes, x)?;
    let tokens = g.quadrant_pool(*sed.last().unwrap())?;
    let global = if cfg.use_global_token {
        nodes.global_token
    } else {
        g.input(Tensor::zeros(&[cfg.k3]))
    };
    let token_set = g.concat_rows(&[global, tokens])?;
    let (heads, attention, ta, fea, logits) = graph_tail(g, nodes, token_set)?;
    Ok(ForwardNodes {
        sed,
        tokens,
        token_set,
        heads,
        attention,
        ta,
        fea,
        logits,
    })
}

/// Spectral encoder-decoder: `P×P×C` patch to `P×P×K3` features.
pub fn sed_forward<S: Scalar>(patch: &Tensor<S>, params: &ModelParams<S>, cfg: &ModelConfig) -> Result<Tensor<S>> {
    check_patch(cfg, patch.shape())?;
    let mut g = GradGraph::new();
    let nodes = ModelNodes::constants(&mut g, params);
    let x = g.input(patch.clone());
    let outs = graph_sed(&mut g, &nodes, x)?;
    Ok(g.value(*outs.last().unwrap()).clone())
}

/// Four quadrant-average tokens (`4×K3`) from a `P×P×K3` feature map.
pub fn tokenize<S: Scalar>(feature: &Tensor<S>) -> Result<Tensor<S>> {
    crate::tensor::ops::quadrant_pool(feature)
}

/// Prepend the global token (or a zero row) to four `K3`-wide tokens.
pub fn assemble_tokens<S: Scalar>(
    tokens: &Tensor<S>,
    params: &ModelParams<S>,
    use_global_token: bool,
) -> Result<Tensor<S>> {
    let k3 = params.global_token.len();
    if tokens.shape() != [TOKENS - 1, k3] {
        return Err(Error::dim(format!("tokens {:?}, expected [4, {k3}]", tokens.shape())));
    }
    let mut data = Vec::with_capacity(TOKENS * k3);
    if use_global_token {
        data.extend_from_slice(params.global_token.data());
    } else {
        data.resize(k3, S::zero());
    }
    data.extend_from_slice(tokens.data());
    Tensor::new(&[TOKENS, k3], data)
}

/// Scaled dot-product attention of one head over a token matrix.
pub fn attention_head<S: Scalar>(
    tokens: &Tensor<S>,
    w_q: &Tensor<S>,
    w_k: &Tensor<S>,
    w_v: &Tensor<S>,
) -> Result<Tensor<S>> {
    if w_q.shape() != w_k.shape() || w_q.shape() != w_v.shape() {
        return Err(Error::dim(format!(
            "projection shapes {:?}, {:?}, {:?} differ",
            w_q.shape(),
            w_k.shape(),
            w_v.shape()
        )));
    }
    let mut g = GradGraph::new();
    let t = g.input(tokens.clone());
    let w = [g.input(w_q.clone()), g.input(w_k.clone()), g.input(w_v.clone())];
    let (out, _) = graph_head(&mut g, t, w)?;
    Ok(g.value(out).clone())
}

/// All heads concatenated plus the residual: `TA = A + Tokens`.
pub fn multi_head<S: Scalar>(tokens: &Tensor<S>, params: &ModelParams<S>) -> Result<Tensor<S>> {
    let k3 = params.global_token.len();
    let dh: usize = params.heads.iter().map(|h| h.query.shape()[1]).sum();
    if dh != k3 {
        return Err(Error::config(format!("heads span {dh} columns, token width is {k3}")));
    }
    let mut g = GradGraph::new();
    let nodes = ModelNodes::constants(&mut g, params);
    let t = g.input(tokens.clone());
    let (_, _, ta, _, _) = graph_tail(&mut g, &nodes, t)?;
    Ok(g.value(ta).clone())
}

/// Feature head then classifier on a `5×K3` matrix. Returns `(logits, fea)`.
pub fn feature_and_classify<S: Scalar>(ta: &Tensor<S>, params: &ModelParams<S>) -> Result<(Vec<S>, Vec<S>)> {
    let flat = ta.reshape(&[1, ta.len()])?;
    let fea = crate::tensor::ops::affine(&flat, &params.feature.weight, &params.feature.bias)?;
    let logits = crate::tensor::ops::affine(&fea, &params.classifier.weight, &params.classifier.bias)?;
    Ok((logits.into_data(), fea.into_data()))
}

/// Class logits for one `P×P×C` patch.
pub fn forward<S: Scalar>(patch: &Tensor<S>, params: &ModelParams<S>, cfg: &ModelConfig) -> Result<Vec<S>> {
    let mut g = GradGraph::new();
    let nodes = ModelNodes::constants(&mut g, params);
    let x = g.input(patch.clone());
    let out = forward_graph(&mut g, &nodes, cfg, x)?;
    Ok(g.value(out.logits).data().to_vec())
}

/// 1-based class id of the largest logit; ties go to the lowest index.
pub fn predict<S: Scalar>(logits: &[S]) -> u16 {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best as u16 + 1
}
