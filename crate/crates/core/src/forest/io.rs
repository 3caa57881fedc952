//! Plain-text forest persistence.
//!
//! A saved classifier carries its stage tag, the exact feature manifest it
//! was trained against, the cost matrix, the training parameters, and
//! every tree node. Thresholds are written with Rust's shortest
//! round-trip float formatting, so a reloaded forest scores bit for bit
//! like the original.
//!
//! ```text
//! random-forest
//! version 1
//! stage rp_start
//! false_negative_cost 64
//! false_positive_cost 1
//! n_trees 20
//! max_depth 4
//! metacost_iterations 10
//! resample_fraction 0.25
//! seed 42
//! n_features 23
//! feature s_lex
//! ...
//! tree 0 nodes 5
//! split 3 0.5 1 2
//! leaf neg
//! ...
//! ```

use super::{CostMatrix, DecisionTree, Forest, ForestParams, Node};
use crate::error::{Error, Result};
use std::path::Path;

pub fn forest_to_string(forest: &Forest) -> String {
    let mut out = String::new();
    out.push_str("random-forest\n");
    out.push_str("version 1\n");
    out.push_str(&format!("stage {}\n", forest.stage));
    out.push_str(&format!("false_negative_cost {}\n", forest.cost.false_negative));
    out.push_str(&format!("false_positive_cost {}\n", forest.cost.false_positive));
    out.push_str(&format!("n_trees {}\n", forest.params.n_trees));
    out.push_str(&format!("max_depth {}\n", forest.params.max_depth));
    out.push_str(&format!(
        "metacost_iterations {}\n",
        forest.params.metacost_iterations
    ));
    out.push_str(&format!(
        "resample_fraction {}\n",
        forest.params.resample_fraction
    ));
    out.push_str(&format!("seed {}\n", forest.params.seed));
    out.push_str(&format!("n_features {}\n", forest.feature_names.len()));
    for name in &forest.feature_names {
        out.push_str(&format!("feature {name}\n"));
    }
    for (i, tree) in forest.trees.iter().enumerate() {
        out.push_str(&format!("tree {i} nodes {}\n", tree.nodes.len()));
        for node in &tree.nodes {
            match node {
                Node::Leaf { positive } => {
                    out.push_str(if *positive { "leaf pos\n" } else { "leaf neg\n" });
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push_str(&format!("split {feature} {threshold} {left} {right}\n"));
                }
            }
        }
    }
    out
}

pub fn forest_from_str(text: &str) -> Result<Forest> {
    let bad = |msg: String| Error::Format(format!("random forest: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some("random-forest") {
        return Err(bad("missing random-forest header".into()));
    }
    if lines.next() != Some("version 1") {
        return Err(bad("unsupported version".into()));
    }
    fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<String> {
        let bad = |msg: String| Error::Format(format!("random forest: {msg}"));
        let line = lines
            .next()
            .ok_or_else(|| bad("truncated header".into()))?;
        line.strip_prefix(name)
            .and_then(|r| r.strip_prefix(' '))
            .map(|s| s.to_string())
            .ok_or_else(|| bad(format!("expected `{name} <value>`, got `{line}`")))
    }
    let stage = field(&mut lines, "stage")?;
    let false_negative: f64 = field(&mut lines, "false_negative_cost")?
        .parse()
        .map_err(|_| bad("bad false_negative_cost".into()))?;
    let false_positive: f64 = field(&mut lines, "false_positive_cost")?
        .parse()
        .map_err(|_| bad("bad false_positive_cost".into()))?;
    let n_trees: usize = field(&mut lines, "n_trees")?
        .parse()
        .map_err(|_| bad("bad n_trees".into()))?;
    let max_depth: usize = field(&mut lines, "max_depth")?
        .parse()
        .map_err(|_| bad("bad max_depth".into()))?;
    let metacost_iterations: usize = field(&mut lines, "metacost_iterations")?
        .parse()
        .map_err(|_| bad("bad metacost_iterations".into()))?;
    let resample_fraction: f64 = field(&mut lines, "resample_fraction")?
        .parse()
        .map_err(|_| bad("bad resample_fraction".into()))?;
    let seed: u64 = field(&mut lines, "seed")?.parse().map_err(|_| bad("bad seed".into()))?;
    let n_features: usize = field(&mut lines, "n_features")?
        .parse()
        .map_err(|_| bad("bad n_features".into()))?;
    let mut feature_names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        feature_names.push(field(&mut lines, "feature")?);
    }

    let mut trees: Vec<DecisionTree> = Vec::with_capacity(n_trees);
    for expected in 0..n_trees {
        let header = field(&mut lines, "tree")?;
        let mut parts = header.split(' ');
        let index: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad tree index".into()))?;
        if index != expected {
            return Err(bad(format!("expected tree {expected}, got {index}")));
        }
        let n_nodes: usize = match (parts.next(), parts.next(), parts.next()) {
            (Some("nodes"), Some(v), None) => {
                v.parse().map_err(|_| bad("bad node count".into()))?
            }
            _ => return Err(bad(format!("malformed tree header `{header}`"))),
        };
        if n_nodes == 0 {
            return Err(bad("tree with no nodes".into()));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let line = lines.next().ok_or_else(|| bad("truncated tree".into()))?;
            let parts: Vec<&str> = line.split(' ').collect();
            let node = match parts.as_slice() {
                ["leaf", "pos"] => Node::Leaf { positive: true },
                ["leaf", "neg"] => Node::Leaf { positive: false },
                ["split", feature, threshold, left, right] => {
                    let feature: usize = feature
                        .parse()
                        .map_err(|_| bad(format!("bad feature in `{line}`")))?;
                    if feature >= n_features {
                        return Err(bad(format!("feature out of range in `{line}`")));
                    }
                    let threshold: f64 = threshold
                        .parse()
                        .map_err(|_| bad(format!("bad threshold in `{line}`")))?;
                    let left: u32 = left
                        .parse()
                        .map_err(|_| bad(format!("bad child in `{line}`")))?;
                    let right: u32 = right
                        .parse()
                        .map_err(|_| bad(format!("bad child in `{line}`")))?;
                    if left as usize >= n_nodes || right as usize >= n_nodes {
                        return Err(bad(format!("child out of range in `{line}`")));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                _ => return Err(bad(format!("unrecognized node `{line}`"))),
            };
            nodes.push(node);
        }
        trees.push(DecisionTree { nodes });
    }
    if lines.next().is_some() {
        return Err(bad("trailing content after last tree".into()));
    }
    Ok(Forest {
        stage,
        feature_names,
        cost: CostMatrix::new(false_negative, false_positive)?,
        params: ForestParams {
            n_trees,
            max_depth,
            metacost_iterations,
            resample_fraction,
            seed,
        },
        trees,
    })
}

pub fn write_forest(path: impl AsRef<Path>, forest: &Forest) -> Result<()> {
    std::fs::write(path, forest_to_string(forest))?;
    Ok(())
}

pub fn read_forest(path: impl AsRef<Path>) -> Result<Forest> {
    forest_from_str(&std::fs::read_to_string(path)?)
}
