//! Conditional message passing over a foundation graph.
//!
//! States start from an indicator labeling (all-ones rows for the query's
//! nodes, zeros elsewhere). Each layer sends `state[src] ⊙ embed(type)` along
//! every edge, sums messages per destination and updates every node with
//! `relu(W · [state ; aggregate] + b)`. Only per-type and per-layer
//! parameters exist, never per-node ones.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::graph::{FoundationGraph, RelationalEdge};
use crate::interaction::{EntInteraction, Interaction, InteractionSet};
use crate::{Error, Real, Result};

/// Shape and options shared by both encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub layers: usize,
    pub width: usize,
    /// Add the previous state after the update.
    pub residual: bool,
    /// Layer-normalise the updated state.
    pub layer_norm: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 4,
            width: 32,
            residual: false,
            layer_norm: false,
        }
    }
}

/// Edge arrays ready for gather/scatter, with types resolved to parameter rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeIndex {
    pub node_count: usize,
    pub src: Vec<u32>,
    pub dst: Vec<u32>,
    pub type_slot: Vec<u32>,
    /// Relation attached to each edge (ULTRA-style wiring only).
    pub relation: Option<Vec<u32>>,
}

impl EdgeIndex {
    /// Resolve edge types against the encoder alphabet; a type without an
    /// embedding is a configuration error.
    pub fn from_graph<I: Interaction>(g: &FoundationGraph<I>, alphabet: InteractionSet<I>) -> Result<Self> {
        let mut idx = EdgeIndex {
            node_count: g.node_count(),
            src: Vec::with_capacity(g.len()),
            dst: Vec::with_capacity(g.len()),
            type_slot: Vec::with_capacity(g.len()),
            relation: None,
        };
        for e in g.edges() {
            let slot = alphabet.slot(e.kind).ok_or_else(|| {
                Error::Config(format!("edge type {} has no embedding", e.kind.name()))
            })?;
            idx.src.push(e.src);
            idx.dst.push(e.dst);
            idx.type_slot.push(slot as u32);
        }
        Ok(idx)
    }

    pub fn from_relational_edges(
        node_count: usize,
        edges: &[RelationalEdge],
        alphabet: InteractionSet<EntInteraction>,
    ) -> Result<Self> {
        let mut idx = EdgeIndex {
            node_count,
            src: Vec::with_capacity(edges.len()),
            dst: Vec::with_capacity(edges.len()),
            type_slot: Vec::with_capacity(edges.len()),
            relation: Some(Vec::with_capacity(edges.len())),
        };
        for e in edges {
            let slot = alphabet.slot(e.kind).ok_or_else(|| {
                Error::Config(format!("edge type {} has no embedding", e.kind.name()))
            })?;
            idx.src.push(e.src);
            idx.dst.push(e.dst);
            idx.type_slot.push(slot as u32);
            if let Some(r) = idx.relation.as_mut() {
                r.push(e.relation);
            }
        }
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub type_embed: ParamId,
    pub weight: ParamId,
    pub bias: ParamId,
    pub relation_proj: Option<ParamId>,
    pub norm: Option<(ParamId, ParamId)>,
}

/// Parameters of one conditional encoder: one embedding per active
/// interaction type per layer, plus a `2d → d` update per layer.
#[derive(Debug, Clone)]
pub struct GraphEncoder {
    cfg: EncoderConfig,
    type_count: usize,
    layers: Vec<EncoderLayer>,
}

pub(crate) fn uniform<T: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize, limit: f64) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| T::from_f64(rng.gen_range(-limit..=limit)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

pub(crate) fn xavier<T: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix<T> {
    let limit = num_traits::Float::sqrt(6.0 / (rows + cols) as f64);
    uniform(rng, rows, cols, limit)
}

impl GraphEncoder {
    /// Register parameters under `prefix`. `relation_conditioned` adds the
    /// per-layer relation projection used by the ULTRA-style wiring.
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        prefix: &str,
        type_count: usize,
        cfg: EncoderConfig,
        relation_conditioned: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.width == 0 {
            return Err(Error::Config("encoder width must be positive".into()));
        }
        let d = cfg.width;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let type_embed = store.insert(&format!("{prefix}.layer{l}.type_embed"), uniform(rng, type_count, d, 1.0))?;
            let weight = store.insert(&format!("{prefix}.layer{l}.weight"), xavier(rng, 2 * d, d))?;
            let bias = store.insert(&format!("{prefix}.layer{l}.bias"), uniform(rng, 1, d, 0.1))?;
            let relation_proj = if relation_conditioned {
                Some(store.insert(&format!("{prefix}.layer{l}.relation_proj"), xavier(rng, d, d))?)
            } else {
                None
            };
            let norm = if cfg.layer_norm {
                Some((
                    store.insert(&format!("{prefix}.layer{l}.norm_gain"), Matrix::filled(1, d, T::one()))?,
                    store.insert(&format!("{prefix}.layer{l}.norm_bias"), Matrix::zeros(1, d))?,
                ))
            } else {
                None
            };
            layers.push(EncoderLayer {
                type_embed,
                weight,
                bias,
                relation_proj,
                norm,
            });
        }
        Ok(GraphEncoder {
            cfg,
            type_count,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn layers(&self) -> &[EncoderLayer] {
        &self.layers
    }

    pub fn type_count(&self) -> usize {
        self.type_count
    }

    /// One round of message passing. `relation_context` carries relation
    /// states that modulate messages (ULTRA-style wiring).
    pub fn mp_layer<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        states: Var,
        edges: &EdgeIndex,
        layer: usize,
        relation_context: Option<Var>,
    ) -> Result<Var> {
        let n = edges.node_count;
        if tape.shape(states) != (n, self.cfg.width) {
            return Err(Error::Shape {
                op: "mp_layer states",
                lhs: tape.shape(states),
                rhs: (n, self.cfg.width),
            });
        }
        let p = &self.layers[layer];
        if let Some(&bad) = edges.type_slot.iter().find(|&&s| s as usize >= self.type_count) {
            return Err(Error::Config(format!("edge type slot {bad} has no embedding")));
        }
        let embed = tape.param(store, p.type_embed);
        let src_states = tape.gather(states, &edges.src)?;
        let mut type_vec = tape.gather(embed, &edges.type_slot)?;
        if let (Some(rel_states), Some(proj), Some(rels)) = (relation_context, p.relation_proj, edges.relation.as_ref()) {
            let r = tape.gather(rel_states, rels)?;
            let w = tape.param(store, proj);
            let rp = tape.matmul(r, w)?;
            type_vec = tape.add(type_vec, rp)?;
        }
        let msg = tape.mul(src_states, type_vec)?;
        let agg = tape.scatter_add(msg, &edges.dst, n)?;
        let cat = tape.concat_cols(&[states, agg])?;
        let w = tape.param(store, p.weight);
        let b = tape.param(store, p.bias);
        let lin = tape.matmul(cat, w)?;
        let lin = tape.add(lin, b)?;
        let mut out = tape.relu(lin);
        if self.cfg.residual {
            out = tape.add(out, states)?;
        }
        if let Some((gain, bias)) = p.norm {
            let normed = tape.layer_norm(out);
            let g = tape.param(store, gain);
            let bb = tape.param(store, bias);
            let scaled = tape.mul(normed, g)?;
            out = tape.add(scaled, bb)?;
        }
        Ok(out)
    }

    /// Indicator initialisation followed by every layer.
    pub fn encode<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        edges: &EdgeIndex,
        query_nodes: &[u32],
        relation_context: Option<Var>,
    ) -> Result<Var> {
        let init = indicator_init::<T>(edges.node_count, query_nodes, self.cfg.width)?;
        let mut h = tape.leaf(init);
        for l in 0..self.layers.len() {
            h = self.mp_layer(tape, store, h, edges, l, relation_context)?;
        }
        Ok(h)
    }
}

/// All-ones rows for `query_nodes`, zeros elsewhere.
pub fn indicator_init<T: Real>(node_count: usize, query_nodes: &[u32], width: usize) -> Result<Matrix<T>> {
    let mut m = Matrix::zeros(node_count, width);
    for &q in query_nodes {
        if q as usize >= node_count {
            return Err(Error::Index {
                what: "indicator node",
                index: q as usize,
                len: node_count,
            });
        }
        m.row_mut(q as usize).fill(T::one());
    }
    Ok(m)
}
