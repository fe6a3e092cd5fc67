use approx::assert_relative_eq;
use hge_phylo::*;
use std::collections::BTreeSet;
use std::io::Write;

fn hamming(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).filter(|(x, y)| x != y).count()
}

#[test]
fn random_tree_shape() {
    let t = random_tree(2, 0).unwrap();
    assert_eq!(t.n_leaves(), 2);
    // single cherry: root plus two leaf edges
    assert_eq!(t.nodes.len(), 3);
    assert_eq!(t.nodes[t.root].children.len(), 2);

    for seed in 0..10 {
        let n = 2 + (seed as usize * 7) % 60;
        let t = random_tree(n, seed).unwrap();
        assert_eq!(t.n_leaves(), n);
        for (i, node) in t.nodes.iter().enumerate() {
            if i != t.root {
                assert!((0.05..0.5).contains(&node.branch_length));
                assert!(node.children.is_empty() || node.children.len() == 2);
            }
        }
    }

    assert!(random_tree(1, 0).is_err());
}

#[test]
fn newick_round_trip_is_lossless() {
    for seed in 0..20 {
        let t = random_tree(3 + (seed as usize * 5) % 40, seed).unwrap();
        let newick = t.to_newick();
        let back = PhyloTree::from_newick(&newick).unwrap();
        assert_eq!(t, back, "round trip changed the tree for seed {seed}");
        assert_eq!(newick, back.to_newick());
    }
    // hand-written input with whitespace and inner labels
    let t = PhyloTree::from_newick("((A:0.1, B:0.2)ab:0.05, C:0.3);").unwrap();
    assert_eq!(t.n_leaves(), 3);
    assert!(PhyloTree::from_newick("((A:0.1,B:0.2").is_err());
}

#[test]
fn gtr_default_rate_matrix() {
    let m = GTRModel::default();
    for i in 0..4 {
        let mut row = 0.0;
        for j in 0..4 {
            if i == j {
                assert_relative_eq!(m.q[(i, j)], -1.0, epsilon = 1e-12);
            } else {
                assert_relative_eq!(m.q[(i, j)], 1.0 / 3.0, epsilon = 1e-12);
            }
            row += m.q[(i, j)];
            // detailed balance
            assert!((m.pi[i] * m.q[(i, j)] - m.pi[j] * m.q[(j, i)]).abs() < 1e-12);
        }
        assert!(row.abs() < 1e-12);
    }

    assert!(gtr_rate_matrix([0.5, 0.5, 0.1, 0.1], [1.0; 6]).is_err());
    assert!(gtr_rate_matrix([0.25; 4], [1.0, 1.0, -1.0, 1.0, 1.0, 1.0]).is_err());
}

fn skewed_model() -> GTRModel {
    gtr_rate_matrix([0.1, 0.2, 0.3, 0.4], [1.0, 2.0, 0.5, 1.5, 3.0, 0.7]).unwrap()
}

#[test]
fn transition_matrix_oracles() {
    let m = GTRModel::default();
    let (p0, fb) = m.transition_matrix(0.0).unwrap();
    assert!(!fb);
    for i in 0..4 {
        for j in 0..4 {
            assert_relative_eq!(p0[(i, j)], if i == j { 1.0 } else { 0.0 });
        }
    }

    // uniform defaults follow the one-parameter closed form
    for t in [0.01, 0.1, 0.5, 1.0, 3.0] {
        let (p, _) = m.transition_matrix(t).unwrap();
        let same = 0.25 + 0.75 * (-4.0 * t / 3.0).exp();
        let diff = 0.25 - 0.25 * (-4.0 * t / 3.0).exp();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { same } else { diff };
                assert_relative_eq!(p[(i, j)], expect, epsilon = 1e-10);
            }
        }
    }

    // semigroup, stationarity, reversibility for a skewed model
    let m = skewed_model();
    for (s, t) in [(0.1, 0.3), (0.5, 0.7), (1.0, 2.0)] {
        let (ps, _) = m.transition_matrix(s).unwrap();
        let (pt, _) = m.transition_matrix(t).unwrap();
        let (pst, _) = m.transition_matrix(s + t).unwrap();
        let prod = ps * pt;
        for i in 0..4 {
            let mut row = 0.0;
            for j in 0..4 {
                assert!((pst[(i, j)] - prod[(i, j)]).abs() < 1e-10);
                assert!((0.0..=1.0).contains(&pst[(i, j)]));
                row += pst[(i, j)];
            }
            assert!((row - 1.0).abs() < 1e-12);
        }
        // pi P(t) = pi
        for j in 0..4 {
            let v: f64 = (0..4).map(|i| m.pi[i] * pt[(i, j)]).sum();
            assert!((v - m.pi[j]).abs() < 1e-10);
        }
        // diag(pi) P(t) symmetric
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.pi[i] * pt[(i, j)] - m.pi[j] * pt[(j, i)]).abs() < 1e-10);
            }
        }
        assert!(m.transition_matrix(-1.0).is_err());
    }
}

#[test]
fn evolve_zero_branches_copies_root() {
    let tree = PhyloTree::from_newick("(L0:0,L1:0);").unwrap();
    let root = "ACGTACGTAC";
    let leaves = evolve(root, &tree, &GTRModel::default(), 7).unwrap();
    assert_eq!(leaves["L0"], root);
    assert_eq!(leaves["L1"], root);
    assert!(evolve("ACGX", &tree, &GTRModel::default(), 0).is_err());
}

#[test]
fn evolve_substitution_fraction_matches_model() {
    // single edge of length t, long sequence: observed substitution fraction
    // within 3 sigma of 1 - P_ii(t)
    let t = 0.3;
    let tree = PhyloTree::from_newick(&format!("(L0:{t},L1:0);")).unwrap();
    let n = 100_000;
    let root = random_dna_seeded(n, 1);
    let model = GTRModel::default();
    let leaves = evolve(&root, &tree, &model, 99).unwrap();
    let observed = hamming(&root, &leaves["L0"]) as f64 / n as f64;
    let expected = 1.0 - (0.25 + 0.75 * (-4.0 * t / 3.0f64).exp());
    let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
    assert!(
        (observed - expected).abs() < 3.0 * sigma,
        "observed {observed}, expected {expected} +- {sigma}"
    );
}

#[test]
fn sibling_leaves_are_closer_than_cross_clade() {
    let tree = random_tree(16, 5).unwrap();
    let root = random_dna_seeded(2000, 2);
    let leaves = evolve(&root, &tree, &GTRModel::default(), 3).unwrap();

    let mut sibling_pairs = Vec::new();
    for node in &tree.nodes {
        if node.children.len() == 2 {
            let (a, b) = (node.children[0], node.children[1]);
            if tree.nodes[a].children.is_empty() && tree.nodes[b].children.is_empty() {
                sibling_pairs.push((tree.leaf_name(a).to_string(), tree.leaf_name(b).to_string()));
            }
        }
    }
    assert!(!sibling_pairs.is_empty());
    let sib_avg: f64 = sibling_pairs
        .iter()
        .map(|(a, b)| hamming(&leaves[a], &leaves[b]) as f64)
        .sum::<f64>()
        / sibling_pairs.len() as f64;

    let names: Vec<&String> = leaves.keys().collect();
    let mut all = Vec::new();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            all.push(hamming(&leaves[names[i]], &leaves[names[j]]) as f64);
        }
    }
    let all_avg = all.iter().sum::<f64>() / all.len() as f64;
    assert!(
        sib_avg < all_avg,
        "sibling mean {sib_avg} not below overall mean {all_avg}"
    );
}

#[test]
fn scenario_c_labels_and_noise() {
    let mut params = ScenarioParams { n_leaves: 40, seq_len: 60, ..Default::default() };
    params.label_noise = 0.0;
    let ds = build_scenario(Scenario::C, &params, 11).unwrap();
    assert!(ds.noise_mask.is_empty());
    for r in &ds.records {
        if r.source == "background" {
            assert_eq!(r.label, 0);
        } else {
            assert_eq!(r.label, 1);
        }
        assert_eq!(r.sequence.len(), 60);
    }

    params.label_noise = 0.10;
    let ds = build_scenario(Scenario::C, &params, 11).unwrap();
    let trdev = ds
        .records
        .iter()
        .filter(|r| r.split != Split::Test)
        .count();
    assert_eq!(ds.noise_mask.len(), (0.10 * trdev as f64).round() as usize);
    for &i in &ds.noise_mask {
        assert_ne!(ds.records[i].split, Split::Test, "noise touched a test record");
    }
}

#[test]
fn scenario_a_uses_root_clades() {
    let params = ScenarioParams {
        n_leaves: 30,
        seq_len: 50,
        label_noise: 0.0,
        ..Default::default()
    };
    let ds = build_scenario(Scenario::A, &params, 3).unwrap();
    assert_eq!(ds.records.len(), 30);
    let classes: BTreeSet<usize> = ds.records.iter().map(|r| r.label).collect();
    assert_eq!(classes.len(), 2);
    // class sizes match the root split of the stored tree
    let tree = PhyloTree::from_newick(&ds.trees[0]).unwrap();
    let sizes: Vec<usize> = tree.nodes[tree.root]
        .children
        .iter()
        .map(|&c| tree.clade_leaves(c).len())
        .collect();
    let mut counts = [0usize; 2];
    for r in &ds.records {
        counts[r.label] += 1;
    }
    assert_eq!(counts.to_vec(), sizes);
}

#[test]
fn scenario_b_trees_are_disjoint() {
    let params = ScenarioParams {
        n_leaves: 20,
        seq_len: 50,
        label_noise: 0.0,
        ..Default::default()
    };
    let ds = build_scenario(Scenario::B, &params, 9).unwrap();
    assert_eq!(ds.trees.len(), 2);
    let by_label = |l: usize| -> BTreeSet<&String> {
        ds.records
            .iter()
            .filter(|r| r.label == l)
            .map(|r| &r.source)
            .collect()
    };
    assert!(by_label(0).is_disjoint(&by_label(1)));
}

#[test]
fn splits_are_stratified() {
    let params = ScenarioParams { n_leaves: 100, seq_len: 40, ..Default::default() };
    let ds = build_scenario(Scenario::C, &params, 1).unwrap();
    for split in [Split::Train, Split::Dev, Split::Test] {
        let recs = ds.split_records(split);
        let pos = recs.iter().filter(|r| r.source != "background").count();
        let frac = pos as f64 / recs.len() as f64;
        assert!(
            (frac - 0.5).abs() < 0.05,
            "{split:?} class balance {frac} drifted (pre-noise strata are 50/50)"
        );
    }
    let n = ds.records.len();
    let train = ds.split_records(Split::Train).len() as f64 / n as f64;
    assert!((train - 0.70).abs() < 0.05);
}

#[test]
fn homology_split_properties() {
    let params = ScenarioParams { n_leaves: 24, seq_len: 80, ..Default::default() };
    let ds = build_homology_split(&params, 4).unwrap();
    assert_eq!(ds.trees.len(), 2);

    let test_recs = ds.split_records(Split::Test);
    assert!(!test_recs.is_empty());
    // test side comes only from tree-2 and fresh background
    for r in &test_recs {
        assert!(r.source == "background" || r.source.starts_with("t2:"));
    }
    for r in ds.split_records(Split::Train).iter().chain(&ds.split_records(Split::Dev)) {
        assert!(!r.source.starts_with("t2:"));
    }
    // noise never reaches the test split
    for &i in &ds.noise_mask {
        assert_ne!(ds.records[i].split, Split::Test);
    }
    // the two trees generate disjoint leaf sequence sets
    let seqs = |pred: fn(&&Record) -> bool| -> BTreeSet<&String> {
        ds.records.iter().filter(pred).map(|r| &r.sequence).collect()
    };
    let tree1: BTreeSet<&String> = seqs(|r| r.label == 1 && !r.source.starts_with("t2:"));
    let tree2: BTreeSet<&String> = seqs(|r| r.source.starts_with("t2:"));
    assert!(tree1.is_disjoint(&tree2));
}

#[test]
fn random_dna_frequencies() {
    let seq = random_dna_seeded(1_000_000, 123);
    let n = seq.len() as f64;
    let sigma = (0.25 * 0.75 / n).sqrt();
    for c in NUCLEOTIDES {
        let freq = seq.chars().filter(|&x| x == c).count() as f64 / n;
        assert!(
            (freq - 0.25).abs() < 3.0 * sigma,
            "frequency of {c} is {freq}"
        );
    }
    assert_eq!(seq, random_dna_seeded(1_000_000, 123));
}

#[test]
fn background_windows_do_not_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bg.fa");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, ">chr1").unwrap();
    writeln!(f, "{}", random_dna_seeded(500, 1)).unwrap();
    writeln!(f, ">chr2").unwrap();
    writeln!(f, "{}", random_dna_seeded(350, 2)).unwrap();
    drop(f);

    // 500/100 + 350/100 = 8 grid windows available
    let windows = sample_background(&path, 100, 8, 0).unwrap();
    assert_eq!(windows.len(), 8);
    let unique: BTreeSet<&String> = windows.iter().collect();
    assert_eq!(unique.len(), 8, "windows repeat, so they overlap");
    assert!(sample_background(&path, 100, 9, 0).is_err());
    assert_eq!(windows, sample_background(&path, 100, 8, 0).unwrap());
}

#[test]
fn dataset_output_is_byte_identical() {
    let params = ScenarioParams { n_leaves: 24, seq_len: 60, ..Default::default() };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    build_scenario(Scenario::C, &params, 42).unwrap().write_to_dir(d1.path()).unwrap();
    build_scenario(Scenario::C, &params, 42).unwrap().write_to_dir(d2.path()).unwrap();
    for name in ["train.csv", "dev.csv", "test.csv", "meta.json"] {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let train = std::fs::read_to_string(d1.path().join("train.csv")).unwrap();
    assert!(train.starts_with("sequence,label\n"));
}
