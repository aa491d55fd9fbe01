//! Binary Space Partitioning tree over executed cuts.
//!
//! Internal nodes are cut planes, leaves are chunk meshes. The tree is a
//! persistent value: `insert_cut` returns a new tree sharing all untouched
//! subtrees with its parent, which is what lets the beam search extend one
//! tree into many candidates without deep copies.

use crate::error::{Error, Result};
use crate::mesh::{slice_mesh, ChunkId, CutPlane, Side, TriangleMesh, SNAP_TOLERANCE};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug)]
pub enum BspNode {
    Leaf(TriangleMesh),
    Cut {
        plane: CutPlane,
        negative: Arc<BspNode>,
        positive: Arc<BspNode>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutRecord {
    pub plane: CutPlane,
    pub target: ChunkId,
}

/// Fraction of the root volume below which a cut part counts as degenerate.
pub const MIN_PART_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct BspTree {
    root: Arc<BspNode>,
    /// Heuristic cost of this tree; maintained by the search layer.
    pub cost: f64,
    cut_log: Vec<CutRecord>,
    root_volume: f64,
    min_part_volume: f64,
}

impl BspTree {
    pub fn new(mesh: TriangleMesh) -> Self {
        let root_volume = mesh.volume();
        let mesh = mesh.with_id(ChunkId::root());
        BspTree {
            root: Arc::new(BspNode::Leaf(mesh)),
            cost: 0.0,
            cut_log: Vec::new(),
            root_volume,
            min_part_volume: MIN_PART_FRACTION * root_volume,
        }
    }

    pub fn root_volume(&self) -> f64 {
        self.root_volume
    }

    pub fn cut_log(&self) -> &[CutRecord] {
        &self.cut_log
    }

    pub fn cut_count(&self) -> usize {
        self.cut_log.len()
    }

    /// Execute a cut on the identified leaf; returns the extended tree and
    /// leaves `self` untouched.
    pub fn insert_cut(&self, plane: &CutPlane, target: &ChunkId) -> Result<BspTree> {
        let path: Vec<Side> = target.path().collect();
        let root = Self::rebuild(&self.root, &path, plane, self.min_part_volume, target)?;
        let mut log = self.cut_log.clone();
        log.push(CutRecord {
            plane: plane.clone(),
            target: target.clone(),
        });
        Ok(BspTree {
            root,
            cost: self.cost,
            cut_log: log,
            root_volume: self.root_volume,
            min_part_volume: self.min_part_volume,
        })
    }

    fn rebuild(
        node: &Arc<BspNode>,
        path: &[Side],
        plane: &CutPlane,
        min_part_volume: f64,
        target: &ChunkId,
    ) -> Result<Arc<BspNode>> {
        match (node.as_ref(), path.split_first()) {
            (BspNode::Leaf(mesh), None) => {
                let pair = slice_mesh(mesh, plane, min_part_volume)?;
                match (pair.negative, pair.positive) {
                    (Some(neg), Some(pos)) => Ok(Arc::new(BspNode::Cut {
                        plane: plane.clone(),
                        negative: Arc::new(BspNode::Leaf(neg)),
                        positive: Arc::new(BspNode::Leaf(pos)),
                    })),
                    (Some(_), None) => Err(Error::PlaneMiss { side: "negative" }),
                    (None, Some(_)) => Err(Error::PlaneMiss { side: "positive" }),
                    (None, None) => unreachable!("slice cannot drop both sides"),
                }
            }
            (
                BspNode::Cut {
                    plane: p,
                    negative,
                    positive,
                },
                Some((side, rest)),
            ) => {
                let (neg, pos) = match side {
                    Side::Negative => (
                        Self::rebuild(negative, rest, plane, min_part_volume, target)?,
                        positive.clone(),
                    ),
                    Side::Positive => (
                        negative.clone(),
                        Self::rebuild(positive, rest, plane, min_part_volume, target)?,
                    ),
                };
                Ok(Arc::new(BspNode::Cut {
                    plane: p.clone(),
                    negative: neg,
                    positive: pos,
                }))
            }
            _ => Err(Error::NoSuchLeaf(target.clone())),
        }
    }

    /// All leaves in in-order (negative subtree first).
    pub fn leaves(&self) -> Vec<&TriangleMesh> {
        let mut out = Vec::new();
        Self::collect_leaves(&self.root, &mut out);
        out
    }

    fn collect_leaves<'a>(node: &'a BspNode, out: &mut Vec<&'a TriangleMesh>) {
        match node {
            BspNode::Leaf(mesh) => out.push(mesh),
            BspNode::Cut {
                negative, positive, ..
            } => {
                Self::collect_leaves(negative, out);
                Self::collect_leaves(positive, out);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn leaf_volumes(&self) -> Vec<f64> {
        self.leaves().iter().map(|m| m.volume()).collect()
    }

    /// Print priority: in-order traversal of the leaves. For every cut node
    /// all negative-subtree leaves precede all positive-subtree leaves.
    pub fn inorder_priority(&self) -> Vec<ChunkId> {
        self.leaves().iter().map(|m| m.id().clone()).collect()
    }

    pub fn find_leaf(&self, id: &ChunkId) -> Option<&TriangleMesh> {
        self.leaves().into_iter().find(|m| m.id() == id)
    }

    pub fn root_node(&self) -> &BspNode {
        &self.root
    }

    /// Check the structural invariants: leaf/cut count, volume partition and
    /// half-space containment of every subtree.
    pub fn validate(&self) -> Result<()> {
        let leaves = self.leaves();
        if leaves.len() != self.cut_log.len() + 1 {
            return Err(Error::InvariantViolation(format!(
                "leaf count {} != cut count {} + 1",
                leaves.len(),
                self.cut_log.len()
            )));
        }
        let total: f64 = leaves.iter().map(|m| m.volume()).sum();
        if (total - self.root_volume).abs() > 1e-6 * self.root_volume {
            return Err(Error::InvariantViolation(format!(
                "leaf volume sum {total} deviates from root volume {}",
                self.root_volume
            )));
        }
        Self::validate_node(&self.root)
    }

    fn validate_node(node: &BspNode) -> Result<()> {
        if let BspNode::Cut {
            plane,
            negative,
            positive,
        } = node
        {
            let mut neg_leaves = Vec::new();
            let mut pos_leaves = Vec::new();
            Self::collect_leaves(negative, &mut neg_leaves);
            Self::collect_leaves(positive, &mut pos_leaves);
            for mesh in &neg_leaves {
                for v in mesh.vertices() {
                    if plane.signed_distance(v) > SNAP_TOLERANCE * 10.0 {
                        return Err(Error::InvariantViolation(format!(
                            "negative leaf {} crosses its cut plane",
                            mesh.id()
                        )));
                    }
                }
            }
            for mesh in &pos_leaves {
                for v in mesh.vertices() {
                    if plane.signed_distance(v) < -SNAP_TOLERANCE * 10.0 {
                        return Err(Error::InvariantViolation(format!(
                            "positive leaf {} crosses its cut plane",
                            mesh.id()
                        )));
                    }
                }
            }
            Self::validate_node(negative)?;
            Self::validate_node(positive)?;
        }
        Ok(())
    }

    pub fn to_doc(&self) -> BspTreeDoc {
        BspTreeDoc {
            cost: self.cost,
            root_volume_l: self.root_volume * 1000.0,
            cut_log: self.cut_log.clone(),
            root: Self::node_doc(&self.root),
        }
    }

    fn node_doc(node: &BspNode) -> BspNodeDoc {
        match node {
            BspNode::Leaf(mesh) => BspNodeDoc::Leaf {
                id: mesh.id().clone(),
                volume_l: mesh.volume_liters(),
            },
            BspNode::Cut {
                plane,
                negative,
                positive,
            } => BspNodeDoc::Cut {
                plane: plane.clone(),
                negative: Box::new(Self::node_doc(negative)),
                positive: Box::new(Self::node_doc(positive)),
            },
        }
    }
}

/// Serializable view of a tree: nested nodes with planes, leaf ids and leaf
/// volumes in liters. Consumed by the scheduler export and `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BspTreeDoc {
    pub cost: f64,
    pub root_volume_l: f64,
    pub cut_log: Vec<CutRecord>,
    pub root: BspNodeDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum BspNodeDoc {
    Leaf {
        id: ChunkId,
        volume_l: f64,
    },
    Cut {
        plane: CutPlane,
        negative: Box<BspNodeDoc>,
        positive: Box<BspNodeDoc>,
    },
}

impl BspNodeDoc {
    pub fn leaves(&self) -> Vec<(&ChunkId, f64)> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<(&'a ChunkId, f64)>) {
        match self {
            BspNodeDoc::Leaf { id, volume_l } => out.push((id, *volume_l)),
            BspNodeDoc::Cut {
                negative, positive, ..
            } => {
                negative.collect(out);
                positive.collect(out);
            }
        }
    }
}
