use crate::error::{PhyloError, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A rooted binary phylogeny. `branch_length` is the length of the edge to the
/// parent (expected substitutions per site); the root carries length 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyloNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub branch_length: f64,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    pub nodes: Vec<PhyloNode>,
    pub root: usize,
}

impl PhyloTree {
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].children.is_empty())
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn leaf_name(&self, idx: usize) -> &str {
        self.nodes[idx].name.as_deref().unwrap_or("")
    }

    /// Leaf indices below `node`, in index order.
    pub fn clade_leaves(&self, node: usize) -> Vec<usize> {
        let mut stack = vec![node];
        let mut out = Vec::new();
        while let Some(i) = stack.pop() {
            if self.nodes[i].children.is_empty() {
                out.push(i);
            } else {
                stack.extend(self.nodes[i].children.iter().rev());
            }
        }
        out.sort_unstable();
        out
    }

    /// Serialize to Newick. Branch lengths use the shortest round-tripping
    /// decimal form, so parse(serialize(t)) == t exactly.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_node(self.root, &mut out);
        out.push(';');
        out
    }

    fn write_node(&self, idx: usize, out: &mut String) {
        let node = &self.nodes[idx];
        if !node.children.is_empty() {
            out.push('(');
            for (i, &c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.write_node(c, out);
            }
            out.push(')');
        }
        if let Some(name) = &node.name {
            out.push_str(name);
        }
        if node.parent.is_some() {
            out.push(':');
            out.push_str(&format!("{}", node.branch_length));
        }
    }

    pub fn from_newick(text: &str) -> Result<Self> {
        let bytes = text.trim().as_bytes();
        let mut parser = NewickParser { bytes, pos: 0 };
        let mut nodes = Vec::new();
        let root = parser.parse_node(&mut nodes, None)?;
        parser.expect(b';')?;
        parser.skip_ws();
        if parser.pos != bytes.len() {
            return Err(PhyloError::Newick {
                pos: parser.pos,
                msg: "trailing input after ';'".into(),
            });
        }
        Ok(PhyloTree { nodes, root })
    }
}

struct NewickParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl NewickParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(PhyloError::Newick {
                pos: self.pos,
                msg: format!("expected {:?}", b as char),
            })
        }
    }

    fn parse_node(&mut self, nodes: &mut Vec<PhyloNode>, parent: Option<usize>) -> Result<usize> {
        let idx = nodes.len();
        nodes.push(PhyloNode {
            parent,
            children: Vec::new(),
            branch_length: 0.0,
            name: None,
        });
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                let child = self.parse_node(nodes, Some(idx))?;
                nodes[idx].children.push(child);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => {
                        return Err(PhyloError::Newick {
                            pos: self.pos,
                            msg: "expected ',' or ')'".into(),
                        })
                    }
                }
            }
        }
        let name = self.parse_label();
        if !name.is_empty() {
            nodes[idx].name = Some(name);
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            nodes[idx].branch_length = self.parse_number()?;
        }
        Ok(idx)
    }

    fn parse_label(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !b"(),:;".contains(&self.bytes[self.pos])
            && !self.bytes[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    fn parse_number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit()
                || b".eE+-".contains(&self.bytes[self.pos]))
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PhyloError::Newick {
                pos: start,
                msg: "invalid branch length".into(),
            })
    }
}

/// Random binary topology by recursive uniform splits of the leaf set, with
/// branch lengths i.i.d. uniform on [0.05, 0.5]. Leaves are named L0..L{n-1}.
pub fn random_tree(n_leaves: usize, seed: u64) -> Result<PhyloTree> {
    if n_leaves < 2 {
        return Err(PhyloError::TooFewLeaves(n_leaves));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let labels: Vec<usize> = (0..n_leaves).collect();
    build_subtree(&labels, None, &mut nodes, &mut rng);
    Ok(PhyloTree { nodes, root: 0 })
}

fn build_subtree(
    labels: &[usize],
    parent: Option<usize>,
    nodes: &mut Vec<PhyloNode>,
    rng: &mut ChaCha8Rng,
) -> usize {
    let idx = nodes.len();
    let branch_length = if parent.is_some() {
        rng.gen_range(0.05..0.5)
    } else {
        0.0
    };
    nodes.push(PhyloNode {
        parent,
        children: Vec::new(),
        branch_length,
        name: None,
    });
    if labels.len() == 1 {
        nodes[idx].name = Some(format!("L{}", labels[0]));
    } else {
        let cut = rng.gen_range(1..labels.len());
        let left = build_subtree(&labels[..cut], Some(idx), nodes, rng);
        let right = build_subtree(&labels[cut..], Some(idx), nodes, rng);
        nodes[idx].children = vec![left, right];
    }
    idx
}
