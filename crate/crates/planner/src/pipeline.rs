//! End-to-end drivers behind the CLI subcommands: decompose a mesh into
//! scheduled chunks, turn chunks into toolpaths/trajectories and simulate the
//! print, and re-verify written artifacts.
//!
//! Every artifact is a plain file under the output directory; re-running with
//! the same config produces byte-identical content.

use crate::bsp::{BspNodeDoc, BspTreeDoc};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::mesh::{io as mesh_io, ChunkId, CutPlane, TriangleMesh};
use crate::scheduler::{assign_chunks, check_primal_feasibility, Schedule};
use crate::search::plane_cut_search;
use crate::sim::{material_report, simulate, tracking_error_report, TrackingReport};
use crate::toolpath::{
    body_frame_transform, slice_chunk, toolpath_to_trajectory, Trajectory,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Artifact layout under one output directory.
pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Artifacts { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn bsp_json(&self) -> PathBuf {
        self.dir.join("bsp.json")
    }

    pub fn schedule_json(&self) -> PathBuf {
        self.dir.join("schedule.json")
    }

    pub fn search_trace_json(&self) -> PathBuf {
        self.dir.join("search_trace.json")
    }

    pub fn chunk_stl(&self, id: &ChunkId) -> PathBuf {
        self.dir.join(format!("chunk_{id}.stl"))
    }

    pub fn toolpath_txt(&self, id: &ChunkId) -> PathBuf {
        self.dir.join(format!("toolpath_{id}.txt"))
    }

    pub fn trajectory_csv(&self, id: &ChunkId) -> PathBuf {
        self.dir.join(format!("trajectory_{id}.csv"))
    }

    pub fn sim_trace_json(&self) -> PathBuf {
        self.dir.join("sim_trace.json")
    }

    pub fn print_report_json(&self) -> PathBuf {
        self.dir.join("print_report.json")
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeSummary {
    pub input_volume_l: f64,
    pub chunk_volumes_l: Vec<(ChunkId, f64)>,
    pub cost: f64,
    pub cut_count: usize,
    /// Per-UAV material committed by the schedule, liters.
    pub consumed_l: Vec<(String, f64)>,
}

/// Load (or generate) the mesh, search for a feasible decomposition, assign
/// chunks to UAVs, and write chunk STLs plus the tree/schedule/trace JSON.
pub fn run_decompose(
    cfg: &PipelineConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<DecomposeSummary> {
    let mesh = cfg.load_mesh(config_dir)?;
    let fleet = cfg.fleet()?;
    if !check_primal_feasibility(mesh.volume_liters(), &fleet) {
        return Err(Error::PrimalInfeasible {
            volume_l: mesh.volume_liters(),
            capacity_l: fleet.total_capacity_l(),
        });
    }
    let input_volume_l = mesh.volume_liters();
    let outcome = plane_cut_search(mesh, &fleet, &cfg.search_params()?, cfg.fleet.feasibility)?;
    outcome.tree.validate()?;
    let schedule = assign_chunks(&outcome.tree, &fleet, cfg.fleet.feasibility)?;

    std::fs::create_dir_all(out_dir)?;
    let art = Artifacts::new(out_dir);
    for leaf in outcome.tree.leaves() {
        std::fs::write(art.chunk_stl(leaf.id()), mesh_io::write_stl_binary(leaf))?;
    }
    write_json(&art.bsp_json(), &outcome.tree.to_doc())?;
    write_json(&art.schedule_json(), &schedule)?;
    write_json(&art.search_trace_json(), &outcome.trace)?;

    Ok(DecomposeSummary {
        input_volume_l,
        chunk_volumes_l: outcome
            .tree
            .leaves()
            .iter()
            .map(|m| (m.id().clone(), m.volume_liters()))
            .collect(),
        cost: outcome.tree.cost,
        cut_count: outcome.tree.cut_log().len(),
        consumed_l: schedule.consumed_l.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkPrintReport {
    pub chunk: ChunkId,
    pub uav: String,
    pub volume_l: f64,
    pub path_length_m: f64,
    pub extruded_length_m: f64,
    pub duration_s: f64,
    pub deposited_l: f64,
    /// `|deposited - volume| / volume`.
    pub material_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrintSummary {
    pub chunks: Vec<ChunkPrintReport>,
    pub makespan_s: f64,
    pub tracking: TrackingReport,
    pub remaining_l: Vec<(String, f64)>,
}

/// Slice every scheduled chunk, write toolpaths and body-frame trajectories,
/// then run the tracking simulation over the whole schedule.
pub fn run_print(cfg: &PipelineConfig, out_dir: &Path) -> Result<PrintSummary> {
    let art = Artifacts::new(out_dir);
    let schedule: Schedule = read_json(&art.schedule_json())?;
    let fleet = cfg.fleet()?;
    let geom = cfg.extruder_geometry();
    let print_params = cfg.print_params();

    let mut trajectories: BTreeMap<ChunkId, Trajectory> = BTreeMap::new();
    let mut lengths: BTreeMap<ChunkId, (f64, f64)> = BTreeMap::new();
    let mut volumes: BTreeMap<ChunkId, f64> = BTreeMap::new();
    for entry in &schedule.entries {
        let chunk = mesh_io::load_mesh_path(&art.chunk_stl(&entry.chunk))?;
        let chunk = chunk.with_id(entry.chunk.clone());
        let path = slice_chunk(&chunk, &print_params)?;
        std::fs::write(art.toolpath_txt(&entry.chunk), path.to_text())?;
        let traj = toolpath_to_trajectory(&path, &print_params)?;
        let body = body_frame_transform(&traj, &geom)?;
        std::fs::write(art.trajectory_csv(&entry.chunk), body.to_csv())?;
        lengths.insert(
            entry.chunk.clone(),
            (path.total_length(), path.extruded_length()),
        );
        volumes.insert(entry.chunk.clone(), chunk.volume_liters());
        trajectories.insert(entry.chunk.clone(), body);
    }

    let trace = simulate(&schedule, &trajectories, &fleet, &geom, &cfg.sim_params())?;
    write_json(&art.sim_trace_json(), &trace)?;

    let targets: Vec<(ChunkId, f64)> = schedule
        .entries
        .iter()
        .map(|e| (e.chunk.clone(), volumes[&e.chunk]))
        .collect();
    let materials = material_report(&trace, &targets);
    let chunks = schedule
        .entries
        .iter()
        .zip(&materials)
        .map(|(entry, mat)| {
            let (total, extruded) = lengths[&entry.chunk];
            ChunkPrintReport {
                chunk: entry.chunk.clone(),
                uav: entry.uav.clone(),
                volume_l: mat.target_l,
                path_length_m: total,
                extruded_length_m: extruded,
                duration_s: trajectories[&entry.chunk].duration(),
                deposited_l: mat.deposited_l,
                material_gap: mat.relative_gap,
            }
        })
        .collect();
    let summary = PrintSummary {
        chunks,
        makespan_s: trace.makespan(),
        tracking: tracking_error_report(&trace),
        remaining_l: trace.remaining_l.clone(),
    };
    write_json(&art.print_report_json(), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    }
}

/// STL stores 32-bit floats, so re-read volumes carry relative error well
/// above the exact in-memory tolerance.
const STL_REL_TOL: f64 = 1e-4;

/// Re-check decomposition invariants from the written artifacts alone:
/// volume conservation, per-chunk volume agreement, cut-angle bounds,
/// half-space containment, priority order and capacity safety.
pub fn run_verify(cfg: &PipelineConfig, out_dir: &Path) -> Result<VerifyReport> {
    let art = Artifacts::new(out_dir);
    let doc: BspTreeDoc = read_json(&art.bsp_json())?;
    let schedule: Schedule = read_json(&art.schedule_json())?;
    let mut report = VerifyReport { checks: Vec::new() };

    let mut meshes: BTreeMap<ChunkId, TriangleMesh> = BTreeMap::new();
    let mut load_failures = Vec::new();
    for (id, _) in doc.root.leaves() {
        match mesh_io::load_mesh_path(&art.chunk_stl(id)) {
            Ok(mesh) => {
                meshes.insert(id.clone(), mesh);
            }
            Err(e) => load_failures.push(format!("{id}: {e}")),
        }
    }
    report.push(
        "chunk-meshes-watertight",
        load_failures.is_empty(),
        if load_failures.is_empty() {
            format!("{} chunk meshes loaded", meshes.len())
        } else {
            load_failures.join("; ")
        },
    );

    let total: f64 = meshes.values().map(TriangleMesh::volume_liters).sum();
    let conserved = load_failures.is_empty()
        && (total - doc.root_volume_l).abs() <= STL_REL_TOL * doc.root_volume_l;
    report.push(
        "volume-conservation",
        conserved,
        format!("chunks sum to {total:.6} L, tree root {:.6} L", doc.root_volume_l),
    );

    let mut volume_mismatches = Vec::new();
    for (id, volume_l) in doc.root.leaves() {
        if let Some(mesh) = meshes.get(id) {
            let got = mesh.volume_liters();
            if (got - volume_l).abs() > STL_REL_TOL * volume_l.max(1e-9) {
                volume_mismatches.push(format!("{id}: stl {got:.6} L vs tree {volume_l:.6} L"));
            }
        }
    }
    report.push(
        "chunk-volumes-match-tree",
        volume_mismatches.is_empty(),
        volume_mismatches.join("; "),
    );

    let phi_max = cfg.phi_max()?;
    let steep: Vec<String> = doc
        .cut_log
        .iter()
        .filter(|c| c.plane.tilt_from_z() > phi_max + 1e-9)
        .map(|c| format!("{}: tilt {:.4} rad", c.target, c.plane.tilt_from_z()))
        .collect();
    report.push(
        "cut-angles-within-bound",
        steep.is_empty(),
        format!("bound {phi_max:.4} rad; {}", if steep.is_empty() {
            format!("{} cuts checked", doc.cut_log.len())
        } else {
            steep.join("; ")
        }),
    );

    let mut containment_failures = Vec::new();
    check_containment(&doc.root, &mut Vec::new(), &meshes, &mut containment_failures);
    report.push(
        "halfspace-containment",
        containment_failures.is_empty(),
        containment_failures.join("; "),
    );

    // print order must put every supporting chunk before what rests on it
    let deps = doc_dependencies(&doc.root);
    let order: Vec<&ChunkId> = schedule.entries.iter().map(|e| &e.chunk).collect();
    let mut priority_violations = Vec::new();
    for (below, above) in &deps {
        let pa = order.iter().position(|id| *id == below);
        let pb = order.iter().position(|id| *id == above);
        match (pa, pb) {
            (Some(a), Some(b)) if a < b => {}
            _ => priority_violations.push(format!("{below} must precede {above}")),
        }
    }
    let covers_all = order.len() == doc.root.leaves().len();
    report.push(
        "priority-order",
        priority_violations.is_empty() && covers_all,
        if covers_all {
            format!("{} dependency edges respected", deps.len())
        } else {
            format!(
                "schedule covers {} of {} chunks; {}",
                order.len(),
                doc.root.leaves().len(),
                priority_violations.join("; ")
            )
        },
    );

    let fleet = cfg.fleet()?;
    let mut used: BTreeMap<&str, f64> = BTreeMap::new();
    for entry in &schedule.entries {
        *used.entry(entry.uav.as_str()).or_default() += entry.volume_l;
    }
    let mut over = Vec::new();
    for (id, cap) in fleet.uav_ids().iter().zip(fleet.capacities_l()) {
        let consumed = used.get(id.as_str()).copied().unwrap_or(0.0);
        if consumed > cap * (1.0 + 1e-9) {
            over.push(format!("{id}: {consumed:.4} L over {cap:.4} L"));
        }
    }
    let known: Vec<String> = used
        .keys()
        .filter(|u| !fleet.uav_ids().iter().any(|id| id == *u))
        .map(|u| format!("unknown UAV {u}"))
        .collect();
    report.push(
        "capacity-safety",
        over.is_empty() && known.is_empty(),
        [over, known].concat().join("; "),
    );

    Ok(report)
}

/// All (negative-subtree leaf, positive-subtree leaf) pairs per cut node.
fn doc_dependencies(node: &BspNodeDoc) -> Vec<(ChunkId, ChunkId)> {
    let mut out = Vec::new();
    if let BspNodeDoc::Cut {
        negative, positive, ..
    } = node
    {
        for (below, _) in negative.leaves() {
            for (above, _) in positive.leaves() {
                out.push((below.clone(), above.clone()));
            }
        }
        out.extend(doc_dependencies(negative));
        out.extend(doc_dependencies(positive));
    }
    out
}

fn check_containment(
    node: &BspNodeDoc,
    planes: &mut Vec<(CutPlane, f64)>,
    meshes: &BTreeMap<ChunkId, TriangleMesh>,
    failures: &mut Vec<String>,
) {
    match node {
        BspNodeDoc::Leaf { id, .. } => {
            let Some(mesh) = meshes.get(id) else { return };
            for (plane, sign) in planes.iter() {
                let worst = mesh
                    .vertices()
                    .iter()
                    .map(|v| sign * plane.signed_distance(v))
                    .fold(f64::INFINITY, f64::min);
                // f32 STL round-trip plus cut snapping tolerance
                if worst < -1e-4 {
                    failures.push(format!("{id} leaks {:.2e} m past a cut plane", -worst));
                }
            }
        }
        BspNodeDoc::Cut {
            plane,
            negative,
            positive,
        } => {
            planes.push((plane.clone(), -1.0));
            check_containment(negative, planes, meshes, failures);
            planes.pop();
            planes.push((plane.clone(), 1.0));
            check_containment(positive, planes, meshes, failures);
            planes.pop();
        }
    }
}
