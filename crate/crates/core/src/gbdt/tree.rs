use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tree node. Node 0 is the root; children always have larger indices
/// than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left; missing values follow
    /// `default_left`.
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
        /// Training hessian mass; equals the sum of the children's covers.
        cover: f64,
    },
    Leaf {
        /// Margin contribution, learning rate already applied.
        weight: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64, cover: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { weight, cover }],
        }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let x = row[feature];
                    let go_left = if x.is_nan() { default_left } else { x < threshold };
                    idx = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { weight, .. } => weight,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    /// Checks that the node array is a proper binary tree over `n_features`
    /// columns with non-negative covers, positive cover at every split, and
    /// split covers equal to the sum of their children's.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::ModelIntegrity("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            let cover = node.cover();
            if !(cover >= 0.0 && cover.is_finite()) {
                return Err(Error::ModelIntegrity(format!("node {i} has invalid cover {cover}")));
            }
            match *node {
                Node::Leaf { weight, .. } => {
                    if !weight.is_finite() {
                        return Err(Error::ModelIntegrity(format!("leaf {i} has non-finite weight")));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    cover,
                    ..
                } => {
                    if feature >= n_features {
                        return Err(Error::ModelIntegrity(format!(
                            "node {i} splits on feature {feature} of {n_features}"
                        )));
                    }
                    if threshold.is_nan() {
                        return Err(Error::ModelIntegrity(format!("node {i} has NaN threshold")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return Err(Error::ModelIntegrity(format!("node {i} has invalid child {child}")));
                        }
                        parents[child] += 1;
                    }
                    if cover <= 0.0 {
                        return Err(Error::ModelIntegrity(format!("split node {i} has zero cover")));
                    }
                    let sum = self.nodes[left].cover() + self.nodes[right].cover();
                    if (sum - cover).abs() > 1e-9 * cover.max(1.0) {
                        return Err(Error::ModelIntegrity(format!(
                            "split node {i} cover {cover} differs from children sum {sum}"
                        )));
                    }
                }
            }
        }
        if let Some(bad) = (1..self.nodes.len()).find(|&i| parents[i] != 1) {
            return Err(Error::ModelIntegrity(format!("node {bad} is not referenced exactly once")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    default_left: false,
                    left: 1,
                    right: 2,
                    cover: 3.0,
                },
                Node::Leaf { weight: -1.0, cover: 2.0 },
                Node::Leaf { weight: 2.0, cover: 1.0 },
            ],
        }
    }

    #[test]
    fn routing() {
        let t = stump();
        assert_eq!(t.predict(&[9.0, 0.1]), -1.0);
        assert_eq!(t.predict(&[9.0, 0.5]), 2.0);
        assert_eq!(t.predict(&[9.0, f64::NAN]), 2.0);
        assert_eq!(t.depth(), 1);
        t.validate(2).unwrap();
    }

    #[test]
    fn integrity_checks() {
        let mut t = stump();
        assert!(t.validate(1).is_err());
        if let Node::Split { cover, .. } = &mut t.nodes[0] {
            *cover = 4.0;
        }
        assert!(t.validate(2).is_err());

        let zero = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.0,
                    default_left: true,
                    left: 1,
                    right: 2,
                    cover: 0.0,
                },
                Node::Leaf { weight: 0.0, cover: 0.0 },
                Node::Leaf { weight: 0.0, cover: 0.0 },
            ],
        };
        assert!(matches!(zero.validate(1), Err(Error::ModelIntegrity(m)) if m.contains("zero cover")));

        let cyclic = Tree {
            nodes: vec![Node::Split {
                feature: 0,
                threshold: 0.0,
                default_left: true,
                left: 0,
                right: 0,
                cover: 1.0,
            }],
        };
        assert!(cyclic.validate(1).is_err());
    }
}
