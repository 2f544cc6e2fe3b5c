//! Edge-biased self-attention over the query fact and entity scoring.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::autodiff::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::encoder::{uniform, xavier};
use crate::kg::{MaskedPosition, PositionRole, QueryFact};
use crate::{Error, Real, Result};

/// Pairwise bias type between two sequence slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BiasType {
    HR,
    TR,
    RK,
    KV,
    Other,
}

impl BiasType {
    pub const ALL: [BiasType; 5] = [BiasType::HR, BiasType::TR, BiasType::RK, BiasType::KV, BiasType::Other];
    pub const COUNT: usize = 5;

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BiasType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BiasType::HR => "HR",
            BiasType::TR => "TR",
            BiasType::RK => "RK",
            BiasType::KV => "KV",
            BiasType::Other => "Other",
        };
        f.write_str(s)
    }
}

/// Bias type of the ordered pair `(i, j)`; symmetric by construction.
pub fn classify_bias(i: PositionRole, j: PositionRole) -> BiasType {
    use PositionRole::*;
    match (i, j) {
        (Head, PrimaryRelation) | (PrimaryRelation, Head) => BiasType::HR,
        (Tail, PrimaryRelation) | (PrimaryRelation, Tail) => BiasType::TR,
        (PrimaryRelation, Key(_)) | (Key(_), PrimaryRelation) => BiasType::RK,
        (Key(a), Value(b)) | (Value(b), Key(a)) if a == b => BiasType::KV,
        _ => BiasType::Other,
    }
}

/// Slot order `[Head, PrimaryRelation, Tail, Key(0), Value(0), ...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceLayout {
    roles: Vec<PositionRole>,
    mask_slot: usize,
}

impl SequenceLayout {
    pub fn new(arity: usize, masked: MaskedPosition) -> Result<Self> {
        let mut roles = Vec::with_capacity(3 + 2 * arity);
        roles.extend([PositionRole::Head, PositionRole::PrimaryRelation, PositionRole::Tail]);
        for i in 0..arity {
            roles.push(PositionRole::Key(i));
            roles.push(PositionRole::Value(i));
        }
        let mask_slot = match masked {
            MaskedPosition::Head => 0,
            MaskedPosition::Tail => 2,
            MaskedPosition::Value(i) if i < arity => 4 + 2 * i,
            MaskedPosition::Value(i) => {
                return Err(Error::Contract(format!("value {i} masked in a fact of arity {arity}")));
            }
        };
        Ok(SequenceLayout { roles, mask_slot })
    }

    pub fn for_query(q: &QueryFact) -> Result<Self> {
        Self::new(q.fact.arity(), q.masked)
    }

    pub fn roles(&self) -> &[PositionRole] {
        &self.roles
    }

    pub fn mask_slot(&self) -> usize {
        self.mask_slot
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    /// Row-major `len × len` table of bias ordinals.
    pub fn bias_table(&self) -> Vec<u32> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n);
        for &a in &self.roles {
            for &b in &self.roles {
                out.push(classify_bias(a, b).ordinal() as u32);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub ffn_multiplier: usize,
    /// Pin the `Other` bias to zero instead of learning it.
    pub zero_other: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            layers: 2,
            heads: 4,
            ffn_multiplier: 4,
            zero_other: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeadParams {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
    /// `BiasType::COUNT × d_head`, one row per bias type.
    pub key_bias: ParamId,
    pub value_bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub heads: Vec<HeadParams>,
    pub norm1: (ParamId, ParamId),
    pub ffn_in: (ParamId, ParamId),
    pub ffn_out: (ParamId, ParamId),
    pub norm2: (ParamId, ParamId),
}

#[derive(Debug, Clone)]
pub struct Decoder {
    cfg: DecoderConfig,
    width: usize,
    mask_token: ParamId,
    out_bias: ParamId,
    layers: Vec<DecoderLayer>,
}

/// Output of one attention layer plus each head's attention matrix.
pub struct AttentionOutput {
    pub out: Var,
    pub weights: Vec<Var>,
}

impl Decoder {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        prefix: &str,
        width: usize,
        cfg: DecoderConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.heads == 0 || !width.is_multiple_of(cfg.heads) {
            return Err(Error::Config(format!(
                "width {width} is not divisible by {} heads",
                cfg.heads
            )));
        }
        let dh = width / cfg.heads;
        let ff = width * cfg.ffn_multiplier.max(1);
        let mask_token = store.insert(&format!("{prefix}.mask_token"), uniform(rng, 1, width, 1.0))?;
        let out_bias = store.insert(&format!("{prefix}.out_bias"), Matrix::zeros(1, 1))?;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let p = format!("{prefix}.layer{l}");
            let mut heads = Vec::with_capacity(cfg.heads);
            for h in 0..cfg.heads {
                heads.push(HeadParams {
                    query: store.insert(&format!("{p}.head{h}.query"), xavier(rng, width, dh))?,
                    key: store.insert(&format!("{p}.head{h}.key"), xavier(rng, width, dh))?,
                    value: store.insert(&format!("{p}.head{h}.value"), xavier(rng, width, dh))?,
                    key_bias: store.insert(&format!("{p}.head{h}.key_bias"), uniform(rng, BiasType::COUNT, dh, 0.1))?,
                    value_bias: store.insert(&format!("{p}.head{h}.value_bias"), uniform(rng, BiasType::COUNT, dh, 0.1))?,
                });
            }
            let norm = |store: &mut ParamStore<T>, name: &str| -> Result<(ParamId, ParamId)> {
                Ok((
                    store.insert(&format!("{p}.{name}_gain"), Matrix::filled(1, width, T::one()))?,
                    store.insert(&format!("{p}.{name}_bias"), Matrix::zeros(1, width))?,
                ))
            };
            let norm1 = norm(store, "norm1")?;
            let ffn_in = (
                store.insert(&format!("{p}.ffn_in_weight"), xavier(rng, width, ff))?,
                store.insert(&format!("{p}.ffn_in_bias"), uniform(rng, 1, ff, 0.1))?,
            );
            let ffn_out = (
                store.insert(&format!("{p}.ffn_out_weight"), xavier(rng, ff, width))?,
                store.insert(&format!("{p}.ffn_out_bias"), Matrix::zeros(1, width))?,
            );
            let norm2 = norm(store, "norm2")?;
            layers.push(DecoderLayer {
                heads,
                norm1,
                ffn_in,
                ffn_out,
                norm2,
            });
        }
        Ok(Decoder {
            cfg,
            width,
            mask_token,
            out_bias,
            layers,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    pub fn layers(&self) -> &[DecoderLayer] {
        &self.layers
    }

    pub fn mask_token(&self) -> ParamId {
        self.mask_token
    }

    pub fn out_bias(&self) -> ParamId {
        self.out_bias
    }

    /// Element vectors in layout order; the masked slot gets the mask token.
    pub fn assemble_sequence<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        query: &QueryFact,
        layout: &SequenceLayout,
        rel_states: Var,
        ent_states: Var,
    ) -> Result<Var> {
        let (num_rel, _) = tape.shape(rel_states);
        let (num_ent, _) = tape.shape(ent_states);
        let f = &query.fact;
        let mut ent_ids = Vec::new();
        let mut rel_ids = Vec::new();
        // source row of each slot inside concat(ent_part, rel_part, mask)
        let mut slot_src = Vec::with_capacity(layout.len());
        for (slot, &role) in layout.roles().iter().enumerate() {
            if slot == layout.mask_slot() {
                slot_src.push(None);
                continue;
            }
            let (is_ent, id) = match role {
                PositionRole::Head => (true, f.head.0),
                PositionRole::Tail => (true, f.tail.0),
                PositionRole::Value(i) => (true, f.qualifiers[i].1 .0),
                PositionRole::PrimaryRelation => (false, f.relation.0),
                PositionRole::Key(i) => (false, f.qualifiers[i].0 .0),
            };
            if is_ent {
                if id as usize >= num_ent {
                    return Err(Error::Vocabulary { kind: "entity", id: format!("{id}") });
                }
                slot_src.push(Some((true, ent_ids.len())));
                ent_ids.push(id);
            } else {
                if id as usize >= num_rel {
                    return Err(Error::Vocabulary { kind: "relation", id: format!("{id}") });
                }
                slot_src.push(Some((false, rel_ids.len())));
                rel_ids.push(id);
            }
        }
        let ent_part = tape.gather(ent_states, &ent_ids)?;
        let rel_part = tape.gather(rel_states, &rel_ids)?;
        let mask = tape.param(store, self.mask_token);
        let pool = tape.concat_rows(&[ent_part, rel_part, mask])?;
        let (ne, nr) = (ent_ids.len() as u32, rel_ids.len() as u32);
        let order: Vec<u32> = slot_src
            .iter()
            .map(|s| match *s {
                Some((true, i)) => i as u32,
                Some((false, i)) => ne + i as u32,
                None => ne + nr,
            })
            .collect();
        tape.gather(pool, &order)
    }

    /// One edge-biased attention block with residual, normalisation and
    /// feed-forward sublayers.
    pub fn attention_layer<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        seq: Var,
        layout: &SequenceLayout,
        layer: usize,
    ) -> Result<AttentionOutput> {
        let n = layout.len();
        if n == 0 {
            return Err(Error::Contract("empty sequence".into()));
        }
        if tape.shape(seq) != (n, self.width) {
            return Err(Error::Shape {
                op: "attention_layer",
                lhs: tape.shape(seq),
                rhs: (n, self.width),
            });
        }
        let p = &self.layers[layer];
        let dh = self.width / self.cfg.heads;
        let inv_sqrt = T::from_f64(1.0 / num_traits::Float::sqrt(dh as f64));
        let table = layout.bias_table();
        let flat: Vec<u32> = table
            .iter()
            .enumerate()
            .map(|(ij, &t)| (ij / n) as u32 * BiasType::COUNT as u32 + t)
            .collect();
        let bias_mask = if self.cfg.zero_other {
            let mut m = Matrix::filled(BiasType::COUNT, dh, T::one());
            m.row_mut(BiasType::Other.ordinal()).fill(T::zero());
            Some(m)
        } else {
            None
        };
        let mut outs = Vec::with_capacity(p.heads.len());
        let mut weights = Vec::with_capacity(p.heads.len());
        for h in &p.heads {
            let (wq, wk, wv) = (tape.param(store, h.query), tape.param(store, h.key), tape.param(store, h.value));
            let mut ck = tape.param(store, h.key_bias);
            let mut cv = tape.param(store, h.value_bias);
            if let Some(m) = &bias_mask {
                let mv = tape.leaf(m.clone());
                ck = tape.mul(ck, mv)?;
                cv = tape.mul(cv, mv)?;
            }
            let q = tape.matmul(seq, wq)?;
            let k = tape.matmul(seq, wk)?;
            let v = tape.matmul(seq, wv)?;
            // q_i · k_j
            let kt = tape.transpose(k);
            let qk = tape.matmul(q, kt)?;
            // q_i · c^K_{type(i,j)}: all five per row, then pick
            let ckt = tape.transpose(ck);
            let qc = tape.matmul(q, ckt)?;
            let qc = tape.reshape(qc, n * BiasType::COUNT, 1)?;
            let picked = tape.gather(qc, &flat)?;
            let bias = tape.reshape(picked, n, n)?;
            let logits = tape.add(qk, bias)?;
            let logits = tape.scale(logits, inv_sqrt);
            let a = tape.softmax(logits);
            let av = tape.matmul(a, v)?;
            // Σ_j a_ij c^V_{type(i,j)} = (mass per type) · C^V
            let a_flat = tape.reshape(a, n * n, 1)?;
            let mass = tape.scatter_add(a_flat, &flat, n * BiasType::COUNT)?;
            let mass = tape.reshape(mass, n, BiasType::COUNT)?;
            let vb = tape.matmul(mass, cv)?;
            outs.push(tape.add(av, vb)?);
            weights.push(a);
        }
        let attn = tape.concat_cols(&outs)?;
        let x = tape.add(seq, attn)?;
        let x = self.norm(tape, store, x, p.norm1)?;
        let w1 = tape.param(store, p.ffn_in.0);
        let b1 = tape.param(store, p.ffn_in.1);
        let w2 = tape.param(store, p.ffn_out.0);
        let b2 = tape.param(store, p.ffn_out.1);
        let hdn = tape.matmul(x, w1)?;
        let hdn = tape.add(hdn, b1)?;
        let hdn = tape.relu(hdn);
        let ff = tape.matmul(hdn, w2)?;
        let ff = tape.add(ff, b2)?;
        let y = tape.add(x, ff)?;
        let out = self.norm(tape, store, y, p.norm2)?;
        Ok(AttentionOutput { out, weights })
    }

    fn norm<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var, (g, b): (ParamId, ParamId)) -> Result<Var> {
        let n = tape.layer_norm(x);
        let g = tape.param(store, g);
        let b = tape.param(store, b);
        let s = tape.mul(n, g)?;
        tape.add(s, b)
    }

    /// Run every layer and return the mask-slot output `x_m` (1×d).
    pub fn decode<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        seq: Var,
        layout: &SequenceLayout,
    ) -> Result<Var> {
        let mut x = seq;
        for l in 0..self.layers.len() {
            x = self.attention_layer(tape, store, x, layout, l)?.out;
        }
        tape.gather(x, &[layout.mask_slot() as u32])
    }

    /// Logits `U_0 · x_m + b_m` over every row of `ent_states` (1×|E|).
    pub fn entity_logits<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x_m: Var, ent_states: Var) -> Result<Var> {
        let b = tape.param(store, self.out_bias);
        entity_logits(tape, x_m, ent_states, b)
    }
}

pub fn entity_logits<T: Real>(tape: &mut Tape<T>, x_m: Var, ent_states: Var, b_m: Var) -> Result<Var> {
    let et = tape.transpose(ent_states);
    let logits = tape.matmul(x_m, et)?;
    tape.add(logits, b_m)
}

/// `softmax(U_0 · x_m + b_m)` evaluated directly.
pub fn score_entities<T: Real>(x_m: &[T], ent_states: &Matrix<T>, b_m: T) -> Result<Vec<T>> {
    if x_m.len() != ent_states.cols() {
        return Err(Error::Shape {
            op: "score_entities",
            lhs: (1, x_m.len()),
            rhs: ent_states.shape(),
        });
    }
    let logits: Vec<T> = (0..ent_states.rows())
        .map(|e| ent_states.row(e).iter().zip(x_m).map(|(&a, &b)| a * b).sum::<T>() + b_m)
        .collect();
    Ok(softmax_vec(&logits))
}

pub(crate) fn softmax_vec<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::softmax_rows;
    use crate::kg::Fact;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use PositionRole::*;

    #[test]
    fn bias_classification() {
        assert_eq!(classify_bias(Head, PrimaryRelation), BiasType::HR);
        assert_eq!(classify_bias(PrimaryRelation, Head), BiasType::HR);
        assert_eq!(classify_bias(PrimaryRelation, Tail), BiasType::TR);
        assert_eq!(classify_bias(Key(2), PrimaryRelation), BiasType::RK);
        assert_eq!(classify_bias(Key(1), Value(1)), BiasType::KV);
        assert_eq!(classify_bias(Key(0), Value(1)), BiasType::Other);
        assert_eq!(classify_bias(Value(0), Value(1)), BiasType::Other);
        assert_eq!(classify_bias(Head, Head), BiasType::Other);
        assert_eq!(classify_bias(Head, Tail), BiasType::Other);
    }

    #[test]
    fn layout_arithmetic() {
        let l = SequenceLayout::new(0, MaskedPosition::Tail).unwrap();
        assert_eq!((l.len(), l.mask_slot()), (3, 2));
        let l = SequenceLayout::new(2, MaskedPosition::Value(1)).unwrap();
        assert_eq!((l.len(), l.mask_slot()), (7, 6));
        assert!(SequenceLayout::new(1, MaskedPosition::Value(1)).is_err());
    }

    fn decoder(store: &mut ParamStore<f64>, width: usize, cfg: DecoderConfig) -> Decoder {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Decoder::new(store, "dec", width, cfg, &mut rng).unwrap()
    }

    #[test]
    fn sequence_takes_rows_from_encoders() {
        let mut store = ParamStore::new();
        let dec = decoder(&mut store, 4, DecoderConfig::default());
        let q = QueryFact::new(Fact::triple(1, 0, 2), MaskedPosition::Tail).unwrap();
        let layout = SequenceLayout::for_query(&q).unwrap();
        let mut tape = Tape::new();
        let rel = tape.leaf(Matrix::from_rows(&[&[7.0; 4]]));
        let ent = tape.leaf(Matrix::from_rows(&[&[0.0; 4], &[1.0; 4], &[2.0; 4]]));
        let seq = dec.assemble_sequence(&mut tape, &store, &q, &layout, rel, ent).unwrap();
        let v = tape.value(seq);
        assert_eq!(v.row(0), &[1.0; 4]);
        assert_eq!(v.row(1), &[7.0; 4]);
        assert_eq!(v.row(2), store.value(dec.mask_token()).row(0));

        let bad = QueryFact::new(Fact::triple(5, 0, 2), MaskedPosition::Tail).unwrap();
        assert!(matches!(
            dec.assemble_sequence(&mut tape, &store, &bad, &layout, rel, ent),
            Err(Error::Vocabulary { .. })
        ));
    }

    #[test]
    fn degenerate_attention_is_scaled_dot_product() {
        let cfg = DecoderConfig { layers: 1, heads: 1, ..DecoderConfig::default() };
        let mut store = ParamStore::new();
        let dec = decoder(&mut store, 3, cfg);
        let h = &dec.layers()[0].heads[0];
        *store.value_mut(h.query) = Matrix::identity(3);
        *store.value_mut(h.key) = Matrix::identity(3);
        store.value_mut(h.key_bias).fill(0.0);
        let layout = SequenceLayout::new(0, MaskedPosition::Head).unwrap();
        let x = Matrix::from_rows(&[&[0.1, 0.2, 0.3], &[-0.5, 0.4, 0.0], &[1.0, -1.0, 0.5]]);
        let mut tape = Tape::new();
        let seq = tape.leaf(x.clone());
        let out = dec.attention_layer(&mut tape, &store, seq, &layout, 0).unwrap();
        let want = softmax_rows(&x.matmul(&x.transpose()).unwrap().map(|v| v / 3f64.sqrt()));
        for (a, b) in tape.value(out.weights[0]).data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_matches_direct_computation() {
        let cfg = DecoderConfig { layers: 1, heads: 1, ..DecoderConfig::default() };
        let mut store = ParamStore::new();
        let dec = decoder(&mut store, 4, cfg);
        let h = dec.layers()[0].heads[0].clone();
        let layout = SequenceLayout::new(1, MaskedPosition::Value(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Matrix<f64> = uniform(&mut rng, 5, 4, 1.0);
        let mut tape = Tape::new();
        let seq = tape.leaf(x.clone());
        let got = dec.attention_layer(&mut tape, &store, seq, &layout, 0).unwrap();
        let (wq, wk, wv) = (store.value(h.query), store.value(h.key), store.value(h.value));
        let (ck, cv) = (store.value(h.key_bias), store.value(h.value_bias));
        let q = x.matmul(wq).unwrap();
        let k = x.matmul(wk).unwrap();
        let v = x.matmul(wv).unwrap();
        let roles = layout.roles();
        let mut beta = Matrix::zeros(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                let t = classify_bias(roles[i], roles[j]).ordinal();
                let s: f64 = (0..4).map(|c| q.get(i, c) * (k.get(j, c) + ck.get(t, c))).sum();
                beta.set(i, j, s / 2.0);
            }
        }
        let alpha = softmax_rows(&beta);
        for (a, b) in tape.value(got.weights[0]).data().iter().zip(alpha.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // the head output before the residual is not exposed; recompute z and
        // compare through the first sublayer
        let mut z = Matrix::zeros(5, 4);
        for i in 0..5 {
            for j in 0..5 {
                let t = classify_bias(roles[i], roles[j]).ordinal();
                for c in 0..4 {
                    let cur = z.get(i, c);
                    z.set(i, c, cur + alpha.get(i, j) * (v.get(j, c) + cv.get(t, c)));
                }
            }
        }
        let mut t2 = Tape::new();
        let zx = t2.leaf(z);
        let xs = t2.leaf(x);
        let sum = t2.add(xs, zx).unwrap();
        let want = dec.norm(&mut t2, &store, sum, dec.layers()[0].norm1).unwrap();
        // find the same node on the first tape: the norm1 output feeds ffn_in
        let p = &dec.layers()[0];
        let w1 = store.value(p.ffn_in.0);
        let b1 = store.value(p.ffn_in.1);
        let w2 = store.value(p.ffn_out.0);
        let b2 = store.value(p.ffn_out.1);
        let xn = t2.value(want).clone();
        let mut hid = xn.matmul(w1).unwrap();
        for r in 0..5 {
            for c in 0..hid.cols() {
                let val = (hid.get(r, c) + b1.get(0, c)).max(0.0);
                hid.set(r, c, val);
            }
        }
        let mut y = hid.matmul(w2).unwrap();
        for r in 0..5 {
            for c in 0..4 {
                let val = y.get(r, c) + b2.get(0, c) + xn.get(r, c);
                y.set(r, c, val);
            }
        }
        let yl = t2.leaf(y);
        let out = dec.norm(&mut t2, &store, yl, p.norm2).unwrap();
        for (a, b) in tape.value(got.out).data().iter().zip(t2.value(out).data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn singleton_attends_to_itself() {
        let mut store = ParamStore::new();
        let cfg = DecoderConfig { layers: 1, heads: 2, ..DecoderConfig::default() };
        let dec = decoder(&mut store, 4, cfg);
        let layout = SequenceLayout {
            roles: alloc::vec![Head],
            mask_slot: 0,
        };
        let mut tape = Tape::new();
        let seq = tape.leaf(Matrix::filled(1, 4, 0.3));
        let out = dec.attention_layer(&mut tape, &store, seq, &layout, 0).unwrap();
        for w in out.weights {
            assert_eq!(tape.value(w).data(), &[1.0]);
        }
    }

    #[test]
    fn zero_other_pins_bias() {
        let cfg = DecoderConfig { layers: 1, heads: 1, zero_other: true, ..DecoderConfig::default() };
        let mut store = ParamStore::new();
        let dec = decoder(&mut store, 2, cfg);
        let h = dec.layers()[0].heads[0].clone();
        let layout = SequenceLayout::new(0, MaskedPosition::Tail).unwrap();
        let run = |store: &ParamStore<f64>| {
            let mut tape = Tape::new();
            let seq = tape.leaf(Matrix::from_rows(&[&[0.1, 0.2], &[0.3, -0.4], &[0.5, 0.6]]));
            let out = dec.attention_layer(&mut tape, store, seq, &layout, 0).unwrap();
            tape.value(out.out).clone()
        };
        let before = run(&store);
        store.value_mut(h.key_bias).row_mut(BiasType::Other.ordinal()).fill(5.0);
        store.value_mut(h.value_bias).row_mut(BiasType::Other.ordinal()).fill(5.0);
        assert_eq!(before, run(&store));
    }

    #[test]
    fn scoring_edge_cases() {
        let p = score_entities(&[1.0, 2.0], &Matrix::zeros(4, 2), 0.7).unwrap();
        assert!(p.iter().all(|&x: &f64| (x - 0.25).abs() < 1e-15));
        assert_eq!(score_entities(&[1.0], &Matrix::filled(1, 1, 3.0), 0.0).unwrap(), alloc::vec![1.0]);
        let e = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let a: Vec<f64> = score_entities(&[0.3, -0.2], &e, 0.0).unwrap();
        let b = score_entities(&[0.3, -0.2], &e, 12.5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
