//! Fleet feasibility and chunk-to-UAV scheduling.
//!
//! Capacities are in liters. Two feasibility readings are supported: a strict
//! one-chunk-per-UAV pairing, and capacity reuse where one UAV may print
//! several chunks as long as its total assigned volume fits. Capacity reuse is
//! the default; a nine-chunk decomposition on an eight-UAV fleet is only
//! printable that way.

use crate::bsp::{BspNode, BspTree};
use crate::error::{Error, Result};
use crate::mesh::ChunkId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibilityMode {
    /// Every chunk pairs with a distinct UAV of sufficient capacity.
    PerUav,
    /// A UAV may print multiple chunks within its total capacity.
    #[default]
    CapacityReuse,
}

/// Extruder arm geometry shared by the fleet, meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtruderDims {
    /// Nozzle height above the head's lower face.
    pub nozzle_height: f64,
    /// Nozzle-to-head outer face length.
    pub nozzle_to_head: f64,
    /// Body origin to arm joint.
    pub arm_length: f64,
    /// Joint to nozzle tip.
    pub joint_to_nozzle: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleetConfig {
    uav_ids: Vec<String>,
    /// Liters, sorted non-increasing, parallel to `uav_ids`.
    capacities_l: Vec<f64>,
    pub extruder: ExtruderDims,
}

impl FleetConfig {
    /// Build a fleet; UAVs are re-sorted by descending capacity.
    pub fn new(
        uav_ids: Vec<String>,
        capacities_l: Vec<f64>,
        extruder: ExtruderDims,
    ) -> Result<Self> {
        if uav_ids.len() != capacities_l.len() || uav_ids.is_empty() {
            return Err(Error::Config(format!(
                "fleet has {} ids for {} capacities",
                uav_ids.len(),
                capacities_l.len()
            )));
        }
        if capacities_l.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Config("all capacities must be positive".into()));
        }
        let mut order: Vec<usize> = (0..uav_ids.len()).collect();
        order.sort_by(|&a, &b| {
            capacities_l[b]
                .total_cmp(&capacities_l[a])
                .then(uav_ids[a].cmp(&uav_ids[b]))
        });
        Ok(FleetConfig {
            uav_ids: order.iter().map(|&i| uav_ids[i].clone()).collect(),
            capacities_l: order.iter().map(|&i| capacities_l[i]).collect(),
            extruder,
        })
    }

    pub fn uniform(count: usize, capacity_l: f64, extruder: ExtruderDims) -> Result<Self> {
        let ids = (0..count).map(|i| format!("uav{i}")).collect();
        Self::new(ids, vec![capacity_l; count], extruder)
    }

    pub fn uav_ids(&self) -> &[String] {
        &self.uav_ids
    }

    pub fn capacities_l(&self) -> &[f64] {
        &self.capacities_l
    }

    pub fn total_capacity_l(&self) -> f64 {
        self.capacities_l.iter().sum()
    }

    pub fn max_capacity_l(&self) -> f64 {
        self.capacities_l[0]
    }
}

/// Primal feasibility: the fleet carries at least the mesh volume.
pub fn check_primal_feasibility(total_volume_l: f64, fleet: &FleetConfig) -> bool {
    total_volume_l <= fleet.total_capacity_l()
}

/// Can this set of chunk volumes be printed by the fleet?
pub fn tree_feasible(chunk_volumes_l: &[f64], fleet: &FleetConfig, mode: FeasibilityMode) -> bool {
    let mut vols: Vec<f64> = chunk_volumes_l.to_vec();
    vols.sort_by(|a, b| b.total_cmp(a));
    match mode {
        FeasibilityMode::PerUav => {
            vols.len() <= fleet.capacities_l.len()
                && vols
                    .iter()
                    .zip(&fleet.capacities_l)
                    .all(|(c, d)| d >= c)
        }
        FeasibilityMode::CapacityReuse => {
            // best-fit decreasing packing
            let mut remaining = fleet.capacities_l.clone();
            'chunks: for v in vols {
                let mut best: Option<usize> = None;
                for (i, r) in remaining.iter().enumerate() {
                    if *r >= v && best.is_none_or(|b| *r < remaining[b]) {
                        best = Some(i);
                    }
                }
                if let Some(i) = best {
                    remaining[i] -= v;
                    continue 'chunks;
                }
                return false;
            }
            true
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub chunk: ChunkId,
    pub uav: String,
    pub volume_l: f64,
}

/// Priority-ordered chunk-to-UAV assignment with dependency edges
/// `(a, b)` meaning chunk `a` must finish before chunk `b` starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    pub dependencies: Vec<(ChunkId, ChunkId)>,
    /// Per-UAV totals after assignment, parallel to the fleet order.
    pub consumed_l: Vec<(String, f64)>,
}

impl Schedule {
    pub fn uav_for(&self, chunk: &ChunkId) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| &e.chunk == chunk)
            .map(|e| e.uav.as_str())
    }

    /// Check that the entry order is a linear extension of the dependencies.
    pub fn order_respects_dependencies(&self) -> bool {
        let pos = |id: &ChunkId| self.entries.iter().position(|e| &e.chunk == id);
        self.dependencies.iter().all(|(a, b)| {
            matches!((pos(a), pos(b)), (Some(pa), Some(pb)) if pa < pb)
        })
    }
}

/// Assign every leaf chunk to a UAV in in-order priority, best-fit on
/// remaining capacity, decrementing capacities as the print progresses.
pub fn assign_chunks(
    tree: &BspTree,
    fleet: &FleetConfig,
    mode: FeasibilityMode,
) -> Result<Schedule> {
    let mut remaining = fleet.capacities_l.clone();
    let mut used = vec![false; remaining.len()];
    let mut entries = Vec::new();
    for mesh in tree.leaves() {
        let vol_l = mesh.volume_liters();
        let mut best: Option<usize> = None;
        for (i, r) in remaining.iter().enumerate() {
            if mode == FeasibilityMode::PerUav && used[i] {
                continue;
            }
            if *r >= vol_l && best.is_none_or(|b| *r < remaining[b]) {
                best = Some(i);
            }
        }
        let Some(i) = best else {
            return Err(Error::AssignmentFailed {
                chunk: mesh.id().clone(),
                volume_l: vol_l,
            });
        };
        remaining[i] -= vol_l;
        used[i] = true;
        entries.push(ScheduleEntry {
            chunk: mesh.id().clone(),
            uav: fleet.uav_ids[i].clone(),
            volume_l: vol_l,
        });
    }
    let consumed_l = fleet
        .uav_ids
        .iter()
        .zip(fleet.capacities_l.iter().zip(&remaining))
        .map(|(id, (cap, rem))| (id.clone(), cap - rem))
        .collect();
    Ok(Schedule {
        entries,
        dependencies: dependency_edges(tree),
        consumed_l,
    })
}

/// Conservative dependency relation: every positive-subtree leaf of a cut
/// depends on every negative-subtree leaf of the same cut.
pub fn dependency_edges(tree: &BspTree) -> Vec<(ChunkId, ChunkId)> {
    let mut edges = Vec::new();
    collect_edges(tree.root_node(), &mut edges);
    edges
}

fn collect_edges(node: &BspNode, edges: &mut Vec<(ChunkId, ChunkId)>) {
    if let BspNode::Cut {
        negative, positive, ..
    } = node
    {
        let mut neg = Vec::new();
        let mut pos = Vec::new();
        leaf_ids(negative, &mut neg);
        leaf_ids(positive, &mut pos);
        for a in &neg {
            for b in &pos {
                edges.push((a.clone(), b.clone()));
            }
        }
        collect_edges(negative, edges);
        collect_edges(positive, edges);
    }
}

fn leaf_ids(node: &BspNode, out: &mut Vec<ChunkId>) {
    match node {
        BspNode::Leaf(mesh) => out.push(mesh.id().clone()),
        BspNode::Cut {
            negative, positive, ..
        } => {
            leaf_ids(negative, out);
            leaf_ids(positive, out);
        }
    }
}
