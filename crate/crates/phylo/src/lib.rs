//! Synthetic benchmark data generation: random phylogenies, GTR sequence
//! evolution along branches, scenario dataset builders with stratified splits
//! and label noise, and the homology-split construction.

mod dataset;
mod error;
mod evolve;
mod gtr;
mod tree;

pub use dataset::{
    build_homology_split, build_scenario, sample_background, PhyloDataset, Record, Scenario,
    ScenarioParams, Split,
};
pub use error::{PhyloError, Result};
pub use evolve::{evolve, random_dna, random_dna_seeded};
pub use gtr::{encode_nucleotide, gtr_rate_matrix, GTRModel, NUCLEOTIDES};
pub use tree::{random_tree, PhyloNode, PhyloTree};
