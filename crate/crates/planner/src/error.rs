use crate::mesh::ChunkId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {format} input: {reason}")]
    Parse { format: String, reason: String },

    #[error("mesh is not watertight: {} boundary edge(s), first few: {:?}", .boundary_edges.len(), .boundary_edges.iter().take(8).collect::<Vec<_>>())]
    NotWatertight { boundary_edges: Vec<(u32, u32)> },

    #[error("mesh has non-positive signed volume {volume}; faces are not oriented counter-clockwise outward")]
    NonPositiveVolume { volume: f64 },

    #[error("face {face} references out-of-range vertex index {index} (vertex count {count})")]
    FaceIndexOutOfRange { face: usize, index: u32, count: usize },

    #[error("invalid cut plane: {0}")]
    InvalidPlane(String),

    #[error("degenerate cut: resulting part volume {part_volume} below minimum {min_volume}")]
    DegenerateCut { part_volume: f64, min_volume: f64 },

    #[error("cut plane does not intersect the mesh (whole mesh on {side} side)")]
    PlaneMiss { side: &'static str },

    #[error("no leaf with id {0} in tree")]
    NoSuchLeaf(ChunkId),

    #[error("invalid extruder geometry: {0}")]
    InvalidGeometry(String),

    #[error("primal infeasibility: mesh volume {volume_l} L exceeds total fleet capacity {capacity_l} L")]
    PrimalInfeasible { volume_l: f64, capacity_l: f64 },

    #[error("search exhausted after {iterations} iterations without a feasible tree (best cost {best_cost})")]
    SearchExhausted {
        iterations: usize,
        best_cost: f64,
        best_leaf_volumes_l: Vec<f64>,
    },

    #[error("no UAV has capacity for chunk {chunk} ({volume_l} L)")]
    AssignmentFailed { chunk: ChunkId, volume_l: f64 },

    #[error("empty toolpath: {0}")]
    EmptyToolpath(String),

    #[error("simulation error: {0}")]
    Sim(String),

    #[error("UAV {uav} exhausted its material while printing chunk {chunk}")]
    MaterialExhausted { uav: String, chunk: ChunkId },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
