use crate::error::Result;
use crate::gtr::{encode_nucleotide, GTRModel, NUCLEOTIDES};
use crate::tree::PhyloTree;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Evolve a root sequence down the tree: along every edge each site mutates
/// independently under P(branch_length). Returns leaf name -> sequence,
/// deterministic in the seed.
pub fn evolve(
    root_seq: &str,
    tree: &PhyloTree,
    model: &GTRModel,
    seed: u64,
) -> Result<BTreeMap<String, String>> {
    let root_states: Vec<usize> = root_seq
        .chars()
        .map(encode_nucleotide)
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<Option<Vec<usize>>> = vec![None; tree.nodes.len()];
    let mut leaves = BTreeMap::new();

    // preorder traversal; nodes are created parent-before-child so index
    // order is a valid preorder and keeps the RNG stream deterministic
    states[tree.root] = Some(root_states);
    for idx in 0..tree.nodes.len() {
        if idx != tree.root {
            let parent = tree.nodes[idx].parent.expect("non-root node has parent");
            let parent_states = states[parent].as_ref().expect("parent evolved first");
            let (p, _) = model.transition_matrix(tree.nodes[idx].branch_length)?;
            // per-row cumulative distributions
            let mut cum = [[0.0f64; 4]; 4];
            for i in 0..4 {
                let mut acc = 0.0;
                for j in 0..4 {
                    acc += p[(i, j)];
                    cum[i][j] = acc;
                }
            }
            let child_states: Vec<usize> = parent_states
                .iter()
                .map(|&s| {
                    let u: f64 = rng.gen();
                    cum[s].iter().position(|&c| u < c).unwrap_or(3)
                })
                .collect();
            states[idx] = Some(child_states);
        }
        if tree.nodes[idx].children.is_empty() {
            let seq: String = states[idx]
                .as_ref()
                .expect("leaf evolved")
                .iter()
                .map(|&s| NUCLEOTIDES[s])
                .collect();
            leaves.insert(tree.leaf_name(idx).to_string(), seq);
        }
    }
    Ok(leaves)
}

/// Uniform i.i.d. random DNA.
pub fn random_dna(len: usize, rng: &mut ChaCha8Rng) -> String {
    (0..len).map(|_| NUCLEOTIDES[rng.gen_range(0..4)]).collect()
}

/// Convenience wrapper seeding its own stream.
pub fn random_dna_seeded(len: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_dna(len, &mut rng)
}
