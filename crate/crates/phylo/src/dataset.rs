use crate::error::{PhyloError, Result};
use crate::evolve::{evolve, random_dna};
use crate::gtr::GTRModel;
use crate::tree::random_tree;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    A,
    B,
    C,
    Homology,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub sequence: String,
    pub label: usize,
    pub split: Split,
    /// Leaf id, or "background" for independent sequences.
    pub source: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub seq_len: usize,
    pub n_leaves: usize,
    pub label_noise: f64,
    /// Root sequence source: `None` for uniform random DNA, or a FASTA path.
    pub root_fasta: Option<String>,
    /// Background source for scenario C / homology: `None` for random DNA.
    pub background_fasta: Option<String>,
    /// Train/dev/test fractions; stratified by label.
    pub split_fractions: (f64, f64, f64),
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            seq_len: 200,
            n_leaves: 64,
            label_noise: 0.10,
            root_fasta: None,
            background_fasta: None,
            split_fractions: (0.70, 0.15, 0.15),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhyloDataset {
    pub scenario: Scenario,
    pub seed: u64,
    pub params: ScenarioParams,
    pub records: Vec<Record>,
    /// Newick serialization of every tree involved.
    pub trees: Vec<String>,
    /// Indices into `records` whose labels were noise-flipped.
    pub noise_mask: Vec<usize>,
}

// Seed streams: one logical RNG per independent sub-process so that adding a
// consumer never perturbs the others.
fn stream(seed: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(lane);
    rng
}

fn root_sequence(params: &ScenarioParams, seed: u64, lane: u64) -> Result<String> {
    match &params.root_fasta {
        None => Ok(random_dna(params.seq_len, &mut stream(seed, lane))),
        Some(path) => {
            let windows =
                sample_background(Path::new(path), params.seq_len, 1, seed ^ lane)?;
            Ok(windows.into_iter().next().expect("one window requested"))
        }
    }
}

fn background_sequences(
    params: &ScenarioParams,
    count: usize,
    seed: u64,
    lane: u64,
) -> Result<Vec<String>> {
    match &params.background_fasta {
        None => {
            let mut rng = stream(seed, lane);
            Ok((0..count).map(|_| random_dna(params.seq_len, &mut rng)).collect())
        }
        Some(path) => sample_background(Path::new(path), params.seq_len, count, seed ^ lane),
    }
}

/// Stratified 3-way split: within each label, shuffle and cut by fraction.
fn assign_splits(
    labels: &[usize],
    fractions: (f64, f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Split>> {
    let mut splits = vec![Split::Train; labels.len()];
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    for class in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 3 {
            return Err(PhyloError::CladeTooSmall { label: class, got: idx.len() });
        }
        idx.shuffle(rng);
        let n = idx.len();
        let n_dev = ((fractions.1 * n as f64).round() as usize).max(1);
        let n_test = ((fractions.2 * n as f64).round() as usize).max(1);
        let n_train = n.saturating_sub(n_dev + n_test).max(1);
        for (pos, &i) in idx.iter().enumerate() {
            splits[i] = if pos < n_train {
                Split::Train
            } else if pos < n_train + n_dev {
                Split::Dev
            } else {
                Split::Test
            };
        }
    }
    Ok(splits)
}

/// Flip round(label_noise * |train ∪ dev|) labels among train/dev records,
/// chosen uniformly without replacement. Test labels are never touched.
fn apply_label_noise(
    records: &mut [Record],
    noise: f64,
    n_classes: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let eligible: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].split != Split::Test)
        .collect();
    let n_flip = (noise * eligible.len() as f64).round() as usize;
    let mut mask: Vec<usize> = eligible
        .choose_multiple(rng, n_flip.min(eligible.len()))
        .copied()
        .collect();
    mask.sort_unstable();
    for &i in &mask {
        if n_classes == 2 {
            records[i].label = 1 - records[i].label;
        } else {
            let old = records[i].label;
            let mut new = rng.gen_range(0..n_classes - 1);
            if new >= old {
                new += 1;
            }
            records[i].label = new;
        }
    }
    mask
}

/// Scenario A: one tree, two classes given by the root's two child clades.
/// Scenario B: one independent tree per class.
/// Scenario C: tree leaves (label 1) against independent background (label 0).
pub fn build_scenario(kind: Scenario, params: &ScenarioParams, seed: u64) -> Result<PhyloDataset> {
    let model = GTRModel::default();
    let mut records = Vec::new();
    let mut trees = Vec::new();
    let n_classes;

    match kind {
        Scenario::A => {
            let tree = random_tree(params.n_leaves, seed)?;
            let root = root_sequence(params, seed, 1)?;
            let leaves = evolve(&root, &tree, &model, seed.wrapping_add(2))?;
            let clades: Vec<Vec<String>> = tree.nodes[tree.root]
                .children
                .iter()
                .map(|&c| {
                    tree.clade_leaves(c)
                        .into_iter()
                        .map(|l| tree.leaf_name(l).to_string())
                        .collect()
                })
                .collect();
            for (label, clade) in clades.iter().enumerate() {
                for leaf in clade {
                    records.push(Record {
                        sequence: leaves[leaf].clone(),
                        label,
                        split: Split::Train,
                        source: leaf.clone(),
                    });
                }
            }
            trees.push(tree.to_newick());
            n_classes = clades.len();
        }
        Scenario::B => {
            n_classes = 2;
            for label in 0..n_classes {
                let lane = label as u64;
                let tree = random_tree(params.n_leaves, seed.wrapping_add(100 + lane))?;
                let root = root_sequence(params, seed, 10 + lane)?;
                let leaves = evolve(&root, &tree, &model, seed.wrapping_add(200 + lane))?;
                for (leaf, seq) in leaves {
                    records.push(Record {
                        sequence: seq,
                        label,
                        split: Split::Train,
                        source: format!("t{label}:{leaf}"),
                    });
                }
                trees.push(tree.to_newick());
            }
        }
        Scenario::C => {
            n_classes = 2;
            let tree = random_tree(params.n_leaves, seed)?;
            let root = root_sequence(params, seed, 1)?;
            let leaves = evolve(&root, &tree, &model, seed.wrapping_add(2))?;
            for (leaf, seq) in leaves {
                records.push(Record {
                    sequence: seq,
                    label: 1,
                    split: Split::Train,
                    source: leaf,
                });
            }
            for seq in background_sequences(params, params.n_leaves, seed, 3)? {
                records.push(Record {
                    sequence: seq,
                    label: 0,
                    split: Split::Train,
                    source: "background".into(),
                });
            }
            trees.push(tree.to_newick());
        }
        Scenario::Homology => unreachable!("use build_homology_split"),
    }

    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let splits = assign_splits(&labels, params.split_fractions, &mut stream(seed, 20))?;
    for (r, s) in records.iter_mut().zip(splits) {
        r.split = s;
    }
    let noise_mask =
        apply_label_noise(&mut records, params.label_noise, n_classes, &mut stream(seed, 21));

    Ok(PhyloDataset {
        scenario: kind,
        seed,
        params: params.clone(),
        records,
        trees,
        noise_mask,
    })
}

/// Homology split: train/dev from tree-1 vs background, test entirely from a
/// freshly generated tree-2 (new root) vs fresh background.
pub fn build_homology_split(params: &ScenarioParams, seed: u64) -> Result<PhyloDataset> {
    let model = GTRModel::default();
    let mut records = Vec::new();
    let mut trees = Vec::new();

    // train/dev side
    let (f_train, f_dev, _) = params.split_fractions;
    let denom = f_train + f_dev;
    let tree1 = random_tree(params.n_leaves, seed)?;
    let root1 = root_sequence(params, seed, 1)?;
    let leaves1 = evolve(&root1, &tree1, &model, seed.wrapping_add(2))?;
    for (leaf, seq) in leaves1 {
        records.push(Record { sequence: seq, label: 1, split: Split::Train, source: leaf });
    }
    for seq in background_sequences(params, params.n_leaves, seed, 3)? {
        records.push(Record {
            sequence: seq,
            label: 0,
            split: Split::Train,
            source: "background".into(),
        });
    }
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let splits = assign_splits(
        &labels,
        (f_train / denom, f_dev / denom, 0.0),
        &mut stream(seed, 20),
    )?;
    for (r, s) in records.iter_mut().zip(splits) {
        // the zero test fraction still rounds a record into Test per class; keep
        // the train/dev side strictly test-free
        r.split = if s == Split::Test { Split::Dev } else { s };
    }
    let noise_mask =
        apply_label_noise(&mut records, params.label_noise, 2, &mut stream(seed, 21));
    trees.push(tree1.to_newick());

    // test side: fresh tree, fresh root, fresh background
    let tree2 = random_tree(params.n_leaves, seed.wrapping_add(1000))?;
    let root2 = root_sequence(params, seed.wrapping_add(1000), 1)?;
    let leaves2 = evolve(&root2, &tree2, &model, seed.wrapping_add(1002))?;
    for (leaf, seq) in leaves2 {
        records.push(Record {
            sequence: seq,
            label: 1,
            split: Split::Test,
            source: format!("t2:{leaf}"),
        });
    }
    for seq in background_sequences(params, params.n_leaves, seed.wrapping_add(1000), 3)? {
        records.push(Record {
            sequence: seq,
            label: 0,
            split: Split::Test,
            source: "background".into(),
        });
    }
    trees.push(tree2.to_newick());

    Ok(PhyloDataset {
        scenario: Scenario::Homology,
        seed,
        params: params.clone(),
        records,
        trees,
        noise_mask,
    })
}

/// Non-overlapping fixed-length windows sampled without replacement from a
/// FASTA file. Windows are drawn from a stride-`len` grid within each record,
/// which guarantees pairwise disjointness.
pub fn sample_background(path: &Path, len: usize, count: usize, seed: u64) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let mut sequences: Vec<String> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('>') {
            let _ = rest;
            sequences.push(String::new());
        } else if let Some(current) = sequences.last_mut() {
            current.push_str(line.trim());
        }
    }
    let mut windows: Vec<(usize, usize)> = Vec::new();
    for (si, s) in sequences.iter().enumerate() {
        let mut start = 0;
        while start + len <= s.len() {
            windows.push((si, start));
            start += len;
        }
    }
    if windows.len() < count {
        return Err(PhyloError::FastaTooShort { available: windows.len(), requested: count });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, windows.len(), count);
    Ok(picked
        .iter()
        .map(|w| {
            let (si, start) = windows[w];
            sequences[si][start..start + len].to_string()
        })
        .collect())
}

impl PhyloDataset {
    /// Write `train.csv`/`dev.csv`/`test.csv` (header `sequence,label`) and
    /// `meta.json` into `dir`. Byte-identical for identical (params, seed).
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, split) in [
            ("train.csv", Split::Train),
            ("dev.csv", Split::Dev),
            ("test.csv", Split::Test),
        ] {
            let mut out = String::from("sequence,label\n");
            for r in self.records.iter().filter(|r| r.split == split) {
                out.push_str(&format!("{},{}\n", r.sequence, r.label));
            }
            std::fs::write(dir.join(name), out)?;
        }
        let meta = serde_json::json!({
            "scenario": self.scenario,
            "seed": self.seed,
            "params": self.params,
            "trees": self.trees,
            "noise_mask": self.noise_mask,
            "n_records": self.records.len(),
        });
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn split_records(&self, split: Split) -> Vec<&Record> {
        self.records.iter().filter(|r| r.split == split).collect()
    }
}
