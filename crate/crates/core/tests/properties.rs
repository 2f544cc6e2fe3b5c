use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thor_core::eval::{rank_of, FilterIndex, Metrics};
use thor_core::graph::{build_entity_graph, build_relation_graph, supported_entity_graph, supported_relation_graph};
use thor_core::interaction::{Ablation, InteractionConfig};
use thor_core::kg::{generate_queries, Hkg, HyperFact};
use thor_core::split::{
    cluster_split, khop_split, louvain_communities, modularity, relation_disjoint_filter, split_inductive,
};

fn arb_hkg(max_facts: usize) -> impl Strategy<Value = Hkg> {
    (2u32..8, 1u32..5)
        .prop_flat_map(move |(ne, nr)| {
            prop::collection::vec(
                (0..ne, 0..nr, 0..ne, prop::collection::vec((0..nr, 0..ne), 0..=3)),
                1..=max_facts,
            )
        })
        .prop_map(|facts| {
            Hkg::from_hyper_facts(facts.iter().map(|(h, r, t, q)| {
                let mut f = HyperFact::new(&format!("e{h}"), &format!("r{r}"), &format!("e{t}"));
                for (k, v) in q {
                    f = f.with_qualifier(&format!("r{k}"), &format!("e{v}"));
                }
                f
            }))
        })
}

fn perm(n: usize, seed: u64) -> Vec<u32> {
    let mut p: Vec<u32> = (0..n as u32).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn names<'a>(v: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
    v.into_iter().cloned().collect()
}

proptest! {
    #[test]
    fn graphs_are_reciprocity_closed(kg in arb_hkg(8)) {
        for &ab in Ablation::ALL {
            let cfg = ab.interactions();
            prop_assert!(build_relation_graph(&kg, &cfg, None).is_reciprocity_closed());
            prop_assert!(build_entity_graph(&kg, &cfg, None).is_reciprocity_closed());
        }
    }

    #[test]
    fn larger_interaction_sets_never_remove_edges(kg in arb_hkg(8)) {
        for &a in Ablation::ALL {
            for &b in Ablation::ALL {
                let (ca, cb) = (a.interactions(), b.interactions());
                if ca.relation.is_subset(&cb.relation) {
                    let ea = build_relation_graph(&kg, &ca, None);
                    let eb = build_relation_graph(&kg, &cb, None);
                    prop_assert!(ea.edges().iter().all(|e| eb.contains(e)), "{a} vs {b}");
                }
                if ca.entity.is_subset(&cb.entity) {
                    let ea = build_entity_graph(&kg, &ca, None);
                    let eb = build_entity_graph(&kg, &cb, None);
                    prop_assert!(ea.edges().iter().all(|e| eb.contains(e)), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn support_view_equals_excluded_build(kg in arb_hkg(8), pick in any::<prop::sample::Index>()) {
        let f = pick.index(kg.num_facts());
        let ex: BTreeSet<usize> = [f].into();
        let cfg = Ablation::AddAllFI.interactions();
        prop_assert_eq!(supported_relation_graph(&kg, &cfg).without_fact(f), build_relation_graph(&kg, &cfg, Some(&ex)));
        prop_assert_eq!(supported_entity_graph(&kg, &cfg).without_fact(f), build_entity_graph(&kg, &cfg, Some(&ex)));
    }

    #[test]
    fn construction_commutes_with_relabeling(kg in arb_hkg(8), seed in any::<u64>()) {
        let pe = perm(kg.num_entities(), seed);
        let pr = perm(kg.num_relations(), seed ^ 1);
        let moved = kg.permuted(&pe, &pr).unwrap();
        let cfg = Ablation::AddAllFI.interactions();
        prop_assert_eq!(build_relation_graph(&moved, &cfg, None), build_relation_graph(&kg, &cfg, None).relabeled(&pr));
        prop_assert_eq!(build_entity_graph(&moved, &cfg, None), build_entity_graph(&kg, &cfg, None).relabeled(&pe));
    }

    #[test]
    fn filtering_never_lowers_reciprocal_rank(kg in arb_hkg(8), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = FilterIndex::from_facts(kg.facts());
        for q in generate_queries(&kg) {
            // coarse scores so that ties occur
            let scores: Vec<f64> = (0..kg.num_entities()).map(|_| rng.gen_range(0..4) as f64).collect();
            let a = q.answer.unwrap().index();
            let raw = rank_of(&scores, a, &BTreeSet::new()).unwrap();
            let filtered = rank_of(&scores, a, &idx.filter_for(&q)).unwrap();
            prop_assert!(1.0 / filtered >= 1.0 / raw);
            prop_assert!(filtered >= 1.0 && raw <= kg.num_entities() as f64);
        }
    }

    #[test]
    fn metrics_ignore_query_order(kg in arb_hkg(8), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qs = generate_queries(&kg);
        let ranks: Vec<f64> = qs.iter().map(|_| 1.0 + rng.gen_range(0..20) as f64 / 2.0).collect();
        let order = perm(qs.len(), seed);
        let qs2: Vec<_> = order.iter().map(|&i| qs[i as usize].clone()).collect();
        let r2: Vec<f64> = order.iter().map(|&i| ranks[i as usize]).collect();
        prop_assert_eq!(Metrics::from_ranks(&qs, &ranks).unwrap(), Metrics::from_ranks(&qs2, &r2).unwrap());
    }

    #[test]
    fn split_outputs_have_disjoint_vocabularies(kg in arb_hkg(24), seed in any::<u64>(), hops in 0usize..3) {
        if let Ok((pair, _)) = cluster_split(&kg) {
            prop_assert!(names(pair.train.entities().names()).is_disjoint(&names(pair.ind.entities().names())));
        }
        if let Ok(pair) = khop_split(&kg, 1, hops, seed) {
            prop_assert!(names(pair.train.entities().names()).is_disjoint(&names(pair.ind.entities().names())));
            if let Ok(ind) = relation_disjoint_filter(&pair.train, &pair.ind) {
                prop_assert!(names(pair.train.relations().names()).is_disjoint(&names(ind.relations().names())));
            }
        }
    }

    #[test]
    fn relation_filter_keeps_exactly_non_overlapping_facts(a in arb_hkg(8), b in arb_hkg(8)) {
        let train_rels = names(a.relations().names());
        let expect: Vec<HyperFact> = b
            .hyper_facts()
            .filter(|f| !train_rels.contains(&f.relation) && f.qualifiers.iter().all(|(k, _)| !train_rels.contains(k)))
            .collect();
        match relation_disjoint_filter(&a, &b) {
            Ok(kept) => prop_assert_eq!(kept.hyper_facts().collect::<Vec<_>>(), expect),
            Err(_) => prop_assert!(expect.is_empty()),
        }
    }

    #[test]
    fn valid_and_test_stay_inside_inference_vocabulary(kg in arb_hkg(24), seed in any::<u64>()) {
        let s = split_inductive(&kg, (0.5, 0.25, 0.25), seed).unwrap();
        let mut all: Vec<usize> = s.inference.iter().chain(&s.valid).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..kg.num_facts()).collect::<Vec<_>>());
        let inf = kg.subset(&s.inference);
        for &i in s.valid.iter().chain(&s.test) {
            prop_assert!(inf.resolve(&kg.to_hyper_fact(&kg.facts()[i])).is_ok());
        }
        prop_assert_eq!(split_inductive(&kg, (0.5, 0.25, 0.25), seed).unwrap(), s);
    }

    #[test]
    fn louvain_reports_its_own_modularity(n in 1usize..12, raw in prop::collection::vec((0u32..12, 0u32..12), 0..30)) {
        let edges: Vec<(u32, u32)> = raw.into_iter().filter(|&(a, b)| (a as usize) < n && (b as usize) < n).collect();
        let a = louvain_communities(n, &edges);
        prop_assert_eq!(a.community.len(), n);
        let simple = thor_core::split::simple_edges(edges.iter().copied());
        prop_assert!((a.modularity - modularity(n, &simple, &a.community)).abs() < 1e-12);
        // never worse than leaving every node alone
        let singletons: Vec<u32> = (0..n as u32).collect();
        prop_assert!(a.modularity >= modularity(n, &simple, &singletons) - 1e-12);
    }
}

#[test]
fn default_presets_match_the_documented_sets() {
    let d = InteractionConfig::default();
    assert_eq!(d.relation.to_string(), "h2h_r,h2t_r,t2h_r,t2t_r,r2k_r,k2r_r");
    assert_eq!(d.entity.len(), 7);
    assert_eq!(Ablation::NoV.interactions().entity.to_string(), "h2t_e,t2h_e");
}
