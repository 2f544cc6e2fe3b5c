//! Fundamental interaction alphabets and the ablation presets built from them.

use alloc::vec::Vec;
use core::fmt;
use core::marker::PhantomData;
use core::str::FromStr;

use crate::{Error, Result};

/// An edge type of a foundation graph.
pub trait Interaction: Copy + Ord + Eq + fmt::Debug + 'static {
    /// Every member of the alphabet, in canonical order.
    const ALL: &'static [Self];

    /// Type of the reverse edge.
    fn reciprocal(self) -> Self;

    /// Position of `self` in [`Interaction::ALL`].
    fn ordinal(self) -> usize;

    fn name(self) -> &'static str;

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.name() == name)
    }
}

/// Relation-graph interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelInteraction {
    H2H,
    H2T,
    T2H,
    T2T,
    R2K,
    K2R,
    K2K,
    H2V,
    V2H,
    T2V,
    V2T,
    V2V,
}

/// Entity-graph interactions (all intra-fact).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntInteraction {
    H2T,
    T2H,
    H2V,
    V2H,
    T2V,
    V2T,
    V2V,
}

impl Interaction for RelInteraction {
    const ALL: &'static [Self] = &[
        RelInteraction::H2H,
        RelInteraction::H2T,
        RelInteraction::T2H,
        RelInteraction::T2T,
        RelInteraction::R2K,
        RelInteraction::K2R,
        RelInteraction::K2K,
        RelInteraction::H2V,
        RelInteraction::V2H,
        RelInteraction::T2V,
        RelInteraction::V2T,
        RelInteraction::V2V,
    ];

    fn reciprocal(self) -> Self {
        use RelInteraction::*;
        match self {
            H2H => H2H,
            H2T => T2H,
            T2H => H2T,
            T2T => T2T,
            R2K => K2R,
            K2R => R2K,
            K2K => K2K,
            H2V => V2H,
            V2H => H2V,
            T2V => V2T,
            V2T => T2V,
            V2V => V2V,
        }
    }

    fn ordinal(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        use RelInteraction::*;
        match self {
            H2H => "h2h_r",
            H2T => "h2t_r",
            T2H => "t2h_r",
            T2T => "t2t_r",
            R2K => "r2k_r",
            K2R => "k2r_r",
            K2K => "k2k_r",
            H2V => "h2v_r",
            V2H => "v2h_r",
            T2V => "t2v_r",
            V2T => "v2t_r",
            V2V => "v2v_r",
        }
    }
}

impl Interaction for EntInteraction {
    const ALL: &'static [Self] = &[
        EntInteraction::H2T,
        EntInteraction::T2H,
        EntInteraction::H2V,
        EntInteraction::V2H,
        EntInteraction::T2V,
        EntInteraction::V2T,
        EntInteraction::V2V,
    ];

    fn reciprocal(self) -> Self {
        use EntInteraction::*;
        match self {
            H2T => T2H,
            T2H => H2T,
            H2V => V2H,
            V2H => H2V,
            T2V => V2T,
            V2T => T2V,
            V2V => V2V,
        }
    }

    fn ordinal(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        use EntInteraction::*;
        match self {
            H2T => "h2t_e",
            T2H => "t2h_e",
            H2V => "h2v_e",
            V2H => "v2h_e",
            T2V => "t2v_e",
            V2T => "v2t_e",
            V2V => "v2v_e",
        }
    }
}

/// A subset of an interaction alphabet.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct InteractionSet<I> {
    bits: u32,
    _kind: PhantomData<I>,
}

impl<I: Interaction> InteractionSet<I> {
    pub fn empty() -> Self {
        InteractionSet {
            bits: 0,
            _kind: PhantomData,
        }
    }

    pub fn all() -> Self {
        Self::from_iter_types(I::ALL.iter().copied())
    }

    pub fn from_iter_types(types: impl IntoIterator<Item = I>) -> Self {
        let mut s = Self::empty();
        for t in types {
            s.insert(t);
        }
        s
    }

    pub fn insert(&mut self, t: I) {
        self.bits |= 1 << t.ordinal();
    }

    pub fn remove(&mut self, t: I) {
        self.bits &= !(1 << t.ordinal());
    }

    pub fn contains(&self, t: I) -> bool {
        self.bits & (1 << t.ordinal()) != 0
    }

    pub fn union(self, other: Self) -> Self {
        InteractionSet {
            bits: self.bits | other.bits,
            _kind: PhantomData,
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.bits & !other.bits == 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    /// Members in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = I> + '_ {
        I::ALL.iter().copied().filter(move |t| self.contains(*t))
    }

    /// Dense slot of `t` among the members, used to index per-type parameters.
    pub fn slot(&self, t: I) -> Option<usize> {
        if !self.contains(t) {
            return None;
        }
        Some((self.bits & ((1 << t.ordinal()) - 1)).count_ones() as usize)
    }

    pub fn is_reciprocity_closed(&self) -> bool {
        self.iter().all(|t| self.contains(t.reciprocal()))
    }

    /// Parse a comma-separated list of interaction names.
    pub fn parse_list(s: &str) -> Result<Self> {
        let mut set = Self::empty();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let t = I::from_name(name)
                .ok_or_else(|| Error::Config(alloc::format!("unknown interaction `{name}`")))?;
            set.insert(t);
        }
        Ok(set)
    }
}

impl<I: Interaction> fmt::Debug for InteractionSet<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|t| t.name())).finish()
    }
}

impl<I: Interaction> fmt::Display for InteractionSet<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(|t| t.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Which interactions each foundation graph is built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InteractionConfig {
    pub relation: InteractionSet<RelInteraction>,
    pub entity: InteractionSet<EntInteraction>,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        use RelInteraction::*;
        InteractionConfig {
            relation: InteractionSet::from_iter_types([H2H, H2T, T2H, T2T, R2K, K2R]),
            entity: InteractionSet::all(),
        }
    }
}

impl InteractionConfig {
    /// Both sets must be closed under reciprocity.
    pub fn new(
        relation: InteractionSet<RelInteraction>,
        entity: InteractionSet<EntInteraction>,
    ) -> Result<Self> {
        if !relation.is_reciprocity_closed() {
            return Err(Error::Config(alloc::format!(
                "relation interactions {relation} are not closed under reciprocity"
            )));
        }
        if !entity.is_reciprocity_closed() {
            return Err(Error::Config(alloc::format!(
                "entity interactions {entity} are not closed under reciprocity"
            )));
        }
        Ok(InteractionConfig { relation, entity })
    }

    /// Parse comma-separated name lists for the two graphs.
    pub fn from_names(relation: &str, entity: &str) -> Result<Self> {
        Self::new(
            InteractionSet::parse_list(relation)?,
            InteractionSet::parse_list(entity)?,
        )
    }
}

/// How the two encoders are wired together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EncoderWiring {
    /// Relation and entity encoders run independently.
    #[default]
    Parallel,
    /// Relation encoder output modulates entity-graph messages.
    UltraAlike,
}

/// Named ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Ablation {
    #[default]
    Default,
    NoR2K,
    NoPrim,
    AddK2K,
    AddShareV,
    AddAllFI,
    NoV2V,
    NoP2V,
    NoV,
    UltraAlike,
}

impl Ablation {
    pub const ALL: &'static [Ablation] = &[
        Ablation::Default,
        Ablation::NoR2K,
        Ablation::NoPrim,
        Ablation::AddK2K,
        Ablation::AddShareV,
        Ablation::AddAllFI,
        Ablation::NoV2V,
        Ablation::NoP2V,
        Ablation::NoV,
        Ablation::UltraAlike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Default => "default",
            Ablation::NoR2K => "noR2K",
            Ablation::NoPrim => "noPrim",
            Ablation::AddK2K => "addK2K",
            Ablation::AddShareV => "addShareV",
            Ablation::AddAllFI => "addAllFI",
            Ablation::NoV2V => "noV2V",
            Ablation::NoP2V => "noP2V",
            Ablation::NoV => "noV",
            Ablation::UltraAlike => "ultra-alike",
        }
    }

    pub fn interactions(self) -> InteractionConfig {
        use EntInteraction as E;
        use RelInteraction as R;
        let mut cfg = InteractionConfig::default();
        let share_v = [R::H2V, R::V2H, R::T2V, R::V2T, R::V2V];
        match self {
            Ablation::Default | Ablation::UltraAlike => {}
            Ablation::NoR2K => {
                cfg.relation.remove(R::R2K);
                cfg.relation.remove(R::K2R);
            }
            Ablation::NoPrim => {
                for t in [R::H2H, R::H2T, R::T2H, R::T2T] {
                    cfg.relation.remove(t);
                }
            }
            Ablation::AddK2K => cfg.relation.insert(R::K2K),
            Ablation::AddShareV => share_v.into_iter().for_each(|t| cfg.relation.insert(t)),
            Ablation::AddAllFI => cfg.relation = InteractionSet::all(),
            Ablation::NoV2V => cfg.entity.remove(E::V2V),
            Ablation::NoP2V => {
                for t in [E::H2V, E::V2H, E::T2V, E::V2T] {
                    cfg.entity.remove(t);
                }
            }
            Ablation::NoV => {
                cfg.entity = InteractionSet::from_iter_types([E::H2T, E::T2H]);
            }
        }
        cfg
    }

    pub fn wiring(self) -> EncoderWiring {
        match self {
            Ablation::UltraAlike => EncoderWiring::UltraAlike,
            _ => EncoderWiring::Parallel,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .iter()
            .copied()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(alloc::format!("unknown ablation `{s}`")))
    }
}
