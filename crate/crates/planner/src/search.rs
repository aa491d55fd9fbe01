//! Beam search over BSP-tree extensions.
//!
//! Every round, each infeasible tree in the pool is replaced by its best
//! `w_inner` single-cut extensions; the merged candidates are truncated to the
//! best `w_outer` by the volume-dispersion heuristic and appended back to the
//! pool. The search terminates once every pooled tree is fleet-feasible and
//! returns the cheapest one. Ties are broken by (cost, normal index, offset
//! index, target leaf id), so the result is fully deterministic.

use crate::bsp::BspTree;
use crate::error::{Error, Result};
use crate::mesh::{ChunkId, CutPlane, TriangleMesh};
use crate::sampler::{self, SamplerParams};
use crate::scheduler::{self, FeasibilityMode, FleetConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchParams {
    pub w_inner: usize,
    pub w_outer: usize,
    pub sampler: SamplerParams,
    pub max_iterations: usize,
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.w_inner == 0 || self.w_outer == 0 || self.max_iterations == 0 {
            return Err(Error::Config(
                "w_inner, w_outer and max_iterations must be >= 1".into(),
            ));
        }
        self.sampler.validate()
    }
}

/// Coefficient of variation of the chunk volumes: population standard
/// deviation over mean. Zero dispersion (or a single chunk) costs zero.
pub fn heuristic_cv(volumes: &[f64]) -> f64 {
    assert!(!volumes.is_empty(), "heuristic over empty volume set");
    let n = volumes.len() as f64;
    let mean = volumes.iter().sum::<f64>() / n;
    let var = volumes.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Deterministic tie-break key for a candidate extension.
#[derive(Debug, Clone, PartialEq)]
struct CandidateKey {
    cost: f64,
    normal_idx: usize,
    offset_idx: usize,
    target: ChunkId,
}

impl CandidateKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.normal_idx.cmp(&other.normal_idx))
            .then_with(|| self.offset_idx.cmp(&other.offset_idx))
            .then_with(|| self.target.cmp(&other.target))
    }
}

struct Candidate {
    tree: BspTree,
    key: CandidateKey,
}

fn candidates_for(tree: &BspTree, target: &ChunkId, params: &SearchParams) -> Vec<Candidate> {
    let Some(leaf) = tree.find_leaf(target) else {
        return Vec::new();
    };
    let normals = sampler::sample_normals(&params.sampler);
    let mut out = Vec::new();
    for (ni, normal) in normals.iter().enumerate() {
        let family = sampler::plane_family(leaf, normal, params.sampler.offsets_per_normal);
        for (oi, plane) in family.iter().enumerate() {
            let Ok(mut extended) = tree.insert_cut(plane, target) else {
                // degenerate or missing cut: not a candidate
                continue;
            };
            extended.cost = heuristic_cv(&extended.leaf_volumes());
            out.push(Candidate {
                key: CandidateKey {
                    cost: extended.cost,
                    normal_idx: ni,
                    offset_idx: oi,
                    target: target.clone(),
                },
                tree: extended,
            });
        }
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

/// All valid single-cut extensions of `tree` on the target leaf, best
/// `w_inner` first. Empty when every sampled plane misses or degenerates.
pub fn evaluate_extensions(
    tree: &BspTree,
    target: &ChunkId,
    params: &SearchParams,
) -> Vec<BspTree> {
    let mut cands = candidates_for(tree, target, params);
    cands.truncate(params.w_inner);
    cands.into_iter().map(|c| c.tree).collect()
}

/// Pick the leaf to extend: the largest leaf exceeding the largest UAV
/// capacity, falling back to the largest leaf overall.
pub fn select_target(tree: &BspTree, fleet: &FleetConfig) -> ChunkId {
    let leaves = tree.leaves();
    let oversized = leaves
        .iter()
        .filter(|m| m.volume_liters() > fleet.max_capacity_l())
        .max_by(|a, b| a.volume().total_cmp(&b.volume()));
    let target: &TriangleMesh = oversized.unwrap_or_else(|| {
        leaves
            .iter()
            .max_by(|a, b| a.volume().total_cmp(&b.volume()))
            .expect("tree has at least one leaf")
    });
    target.id().clone()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    /// Costs of every tree in the pool entering the round.
    pub pool_costs: Vec<f64>,
    /// Cuts kept after outer truncation this round.
    pub kept: Vec<KeptCandidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeptCandidate {
    pub cost: f64,
    pub target: ChunkId,
    pub plane: CutPlane,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchTrace {
    pub rounds: Vec<RoundTrace>,
    pub final_cost: f64,
    pub final_leaf_volumes_l: Vec<f64>,
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub tree: BspTree,
    pub trace: SearchTrace,
}

fn is_feasible(tree: &BspTree, fleet: &FleetConfig, mode: FeasibilityMode) -> bool {
    let vols_l: Vec<f64> = tree.leaf_volumes().iter().map(|v| v * 1000.0).collect();
    scheduler::tree_feasible(&vols_l, fleet, mode)
}

/// Beam search for a feasible minimum-dispersion decomposition.
pub fn plane_cut_search(
    mesh: TriangleMesh,
    fleet: &FleetConfig,
    params: &SearchParams,
    mode: FeasibilityMode,
) -> Result<SearchOutcome> {
    params.validate()?;
    let initial = BspTree::new(mesh);
    let mut trace = SearchTrace::default();
    let mut pool: Vec<BspTree> = vec![initial];
    for round in 0..params.max_iterations {
        if pool.iter().all(|t| is_feasible(t, fleet, mode)) {
            break;
        }
        let pool_costs: Vec<f64> = pool.iter().map(|t| t.cost).collect();
        let (feasible, infeasible): (Vec<BspTree>, Vec<BspTree>) = pool
            .drain(..)
            .partition(|t| is_feasible(t, fleet, mode));
        let mut new_cands: Vec<Candidate> = Vec::new();
        for tree in &infeasible {
            let target = select_target(tree, fleet);
            let mut cands = candidates_for(tree, &target, params);
            cands.truncate(params.w_inner);
            new_cands.extend(cands);
        }
        new_cands.sort_by(|a, b| a.key.cmp(&b.key));
        new_cands.truncate(params.w_outer);
        if new_cands.is_empty() && feasible.is_empty() {
            let best = infeasible
                .into_iter()
                .min_by(|a, b| a.cost.total_cmp(&b.cost))
                .expect("pool was non-empty");
            return Err(Error::SearchExhausted {
                iterations: round,
                best_cost: best.cost,
                best_leaf_volumes_l: best.leaf_volumes().iter().map(|v| v * 1000.0).collect(),
            });
        }
        trace.rounds.push(RoundTrace {
            round,
            pool_costs,
            kept: new_cands
                .iter()
                .map(|c| KeptCandidate {
                    cost: c.key.cost,
                    target: c.key.target.clone(),
                    plane: c.tree.cut_log().last().expect("candidate has a cut").plane.clone(),
                })
                .collect(),
        });
        pool = feasible;
        pool.extend(new_cands.into_iter().map(|c| c.tree));
    }
    let best = pool
        .iter()
        .filter(|t| is_feasible(t, fleet, mode))
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .cloned();
    match best {
        Some(tree) => {
            trace.final_cost = tree.cost;
            trace.final_leaf_volumes_l = tree.leaf_volumes().iter().map(|v| v * 1000.0).collect();
            Ok(SearchOutcome { tree, trace })
        }
        None => {
            let best = pool
                .into_iter()
                .min_by(|a, b| a.cost.total_cmp(&b.cost))
                .expect("pool is non-empty");
            Err(Error::SearchExhausted {
                iterations: params.max_iterations,
                best_cost: best.cost,
                best_leaf_volumes_l: best.leaf_volumes().iter().map(|v| v * 1000.0).collect(),
            })
        }
    }
}
