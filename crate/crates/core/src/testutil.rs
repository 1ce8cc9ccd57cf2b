//! Shared generators for property tests.

use proptest::prelude::*;

use crate::ontology::NodeSpec;

/// Random DAG on 1..=`max_nodes` nodes: node `i` draws parents from nodes
/// `0..i`, and ids are a shuffled labeling so index order differs from
/// topological order.
pub fn random_dag(max_nodes: usize) -> impl Strategy<Value = Vec<NodeSpec>> {
    (1usize..=max_nodes)
        .prop_flat_map(|n| {
            let labels = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
            (labels, prop::collection::vec((any::<u16>(), any::<u16>()), n))
        })
        .prop_map(|(labels, masks)| {
            let id = |i: usize| format!("N{:02}", labels[i]);
            (0..masks.len())
                .map(|i| {
                    let mask = masks[i].0 & masks[i].1 & ((1u32 << i) - 1) as u16;
                    let parents = (0..i).filter(|j| mask >> j & 1 == 1).map(id).collect();
                    NodeSpec { id: id(i), name: format!("node {i}"), parents, synonyms: vec![], line: i + 1 }
                })
                .collect()
        })
}
