//! The full model: two conditional encoders feeding the attention decoder.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{decode_params, encode_params, ParamStore, Tape, Var};
use crate::decoder::{softmax_vec, Decoder, DecoderConfig, SequenceLayout};
use crate::encoder::{EdgeIndex, EncoderConfig, GraphEncoder};
use crate::graph::{build_entity_graph, build_relation_graph, build_relational_entity_edges, EntityGraph, RelationGraph};
use crate::interaction::{EncoderWiring, InteractionConfig};
use crate::kg::{Hkg, QueryFact};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub width: usize,
    pub encoder_layers: usize,
    pub encoder_residual: bool,
    pub encoder_layer_norm: bool,
    pub decoder: DecoderConfig,
    pub interactions: InteractionConfig,
    pub wiring: EncoderWiring,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            width: 32,
            encoder_layers: 4,
            encoder_residual: false,
            encoder_layer_norm: false,
            decoder: DecoderConfig::default(),
            interactions: InteractionConfig::default(),
            wiring: EncoderWiring::Parallel,
        }
    }
}

impl ModelConfig {
    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            layers: self.encoder_layers,
            width: self.width,
            residual: self.encoder_residual,
            layer_norm: self.encoder_layer_norm,
        }
    }
}

/// Both foundation graphs of one inference context, resolved for encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphContext {
    pub relations: EdgeIndex,
    pub entities: EdgeIndex,
}

impl GraphContext {
    pub fn from_graphs(cfg: &ModelConfig, rel: &RelationGraph, ent: &EntityGraph) -> Result<Self> {
        Ok(GraphContext {
            relations: EdgeIndex::from_graph(rel, cfg.interactions.relation)?,
            entities: EdgeIndex::from_graph(ent, cfg.interactions.entity)?,
        })
    }

    /// Build both graphs from `kg`, optionally leaving some facts out.
    pub fn build(kg: &Hkg, cfg: &ModelConfig, exclude: Option<&BTreeSet<usize>>) -> Result<Self> {
        let rel = build_relation_graph(kg, &cfg.interactions, exclude);
        let relations = EdgeIndex::from_graph(&rel, cfg.interactions.relation)?;
        let entities = match cfg.wiring {
            EncoderWiring::Parallel => {
                let ent = build_entity_graph(kg, &cfg.interactions, exclude);
                EdgeIndex::from_graph(&ent, cfg.interactions.entity)?
            }
            EncoderWiring::UltraAlike => {
                let edges = build_relational_entity_edges(kg, &cfg.interactions, exclude);
                EdgeIndex::from_relational_edges(kg.num_entities(), &edges, cfg.interactions.entity)?
            }
        };
        Ok(GraphContext { relations, entities })
    }

    pub fn num_entities(&self) -> usize {
        self.entities.node_count
    }

    pub fn num_relations(&self) -> usize {
        self.relations.node_count
    }
}

/// Model parameters and the modules that read them.
#[derive(Debug, Clone)]
pub struct Thor<T> {
    cfg: ModelConfig,
    store: ParamStore<T>,
    rel_encoder: GraphEncoder,
    ent_encoder: GraphEncoder,
    decoder: Decoder,
}

impl<T: Real> Thor<T> {
    /// Seeded initialisation; the same seed gives identical parameters.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        if cfg.width == 0 {
            return Err(Error::Config("width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let enc = cfg.encoder();
        let rel_encoder = GraphEncoder::new(&mut store, "rel_encoder", cfg.interactions.relation.len(), enc, false, &mut rng)?;
        let ultra = cfg.wiring == EncoderWiring::UltraAlike;
        let ent_encoder = GraphEncoder::new(&mut store, "ent_encoder", cfg.interactions.entity.len(), enc, ultra, &mut rng)?;
        let decoder = Decoder::new(&mut store, "decoder", cfg.width, cfg.decoder, &mut rng)?;
        Ok(Thor {
            cfg,
            store,
            rel_encoder,
            ent_encoder,
            decoder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn relation_encoder(&self) -> &GraphEncoder {
        &self.rel_encoder
    }

    pub fn entity_encoder(&self) -> &GraphEncoder {
        &self.ent_encoder
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    /// Same model with parameters converted to another float type.
    pub fn cast<U: Real>(&self) -> Thor<U> {
        Thor {
            cfg: self.cfg,
            store: self.store.cast(),
            rel_encoder: self.rel_encoder.clone(),
            ent_encoder: self.ent_encoder.clone(),
            decoder: self.decoder.clone(),
        }
    }

    /// Encode both graphs conditioned on `q`; returns (relation, entity) states.
    pub fn encode(&self, tape: &mut Tape<T>, ctx: &GraphContext, q: &QueryFact) -> Result<(Var, Var)> {
        q.check()?;
        let mut rel_nodes = Vec::with_capacity(1 + q.fact.arity());
        for r in q.fact.relations() {
            if r.index() >= ctx.num_relations() {
                return Err(Error::Vocabulary {
                    kind: "relation",
                    id: format!("{}", r.0),
                });
            }
            rel_nodes.push(r.0);
        }
        let mut ent_nodes = Vec::with_capacity(1 + q.fact.arity());
        for e in q.visible_entities() {
            if e.index() >= ctx.num_entities() {
                return Err(Error::Vocabulary {
                    kind: "entity",
                    id: format!("{}", e.0),
                });
            }
            ent_nodes.push(e.0);
        }
        let rel_states = self.rel_encoder.encode(tape, &self.store, &ctx.relations, &rel_nodes, None)?;
        let ent_states = match self.cfg.wiring {
            EncoderWiring::Parallel => self.ent_encoder.encode(tape, &self.store, &ctx.entities, &ent_nodes, None)?,
            EncoderWiring::UltraAlike => {
                if ctx.entities.relation.is_none() {
                    return Err(Error::Config("entity edges lack relation annotations".into()));
                }
                self.ent_encoder
                    .encode(tape, &self.store, &ctx.entities, &ent_nodes, Some(rel_states))?
            }
        };
        Ok((rel_states, ent_states))
    }

    /// Logits over every entity of the context (1×|E|).
    pub fn forward(&self, tape: &mut Tape<T>, ctx: &GraphContext, q: &QueryFact) -> Result<Var> {
        let (rel_states, ent_states) = self.encode(tape, ctx, q)?;
        let layout = SequenceLayout::for_query(q)?;
        let seq = self
            .decoder
            .assemble_sequence(tape, &self.store, q, &layout, rel_states, ent_states)?;
        let x_m = self.decoder.decode(tape, &self.store, seq, &layout)?;
        self.decoder.entity_logits(tape, &self.store, x_m, ent_states)
    }

    /// Cross-entropy of the answer against all entities of the context.
    pub fn loss(&self, tape: &mut Tape<T>, ctx: &GraphContext, q: &QueryFact) -> Result<Var> {
        let answer = q
            .answer
            .ok_or_else(|| Error::Data("query has no answer".into()))?;
        if answer.index() >= ctx.num_entities() {
            return Err(Error::Data(format!(
                "answer {} outside the {} training entities",
                answer.0,
                ctx.num_entities()
            )));
        }
        let logits = self.forward(tape, ctx, q)?;
        tape.cross_entropy(logits, answer.index())
    }

    /// Probability vector over every entity of the context.
    pub fn scores(&self, ctx: &GraphContext, q: &QueryFact) -> Result<Vec<T>> {
        let mut tape = Tape::new();
        let logits = self.forward(&mut tape, ctx, q)?;
        Ok(softmax_vec(tape.value(logits).data()))
    }
}

impl Thor<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        encode_params(&self.store)
    }

    /// Replace parameters with a checkpoint written by [`Thor::to_bytes`].
    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let (store, used) = decode_params(bytes)?;
        if used != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - used)));
        }
        self.store.load_from(&store)
    }
}
