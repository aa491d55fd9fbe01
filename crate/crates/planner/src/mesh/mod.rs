//! Geometric kernel: triangle meshes, cut planes and plane/mesh splitting.
//!
//! All geometry is in meters. Meshes are watertight triangle soups with
//! counter-clockwise outward winding; signed volume via the divergence
//! theorem is therefore strictly positive.

mod slice;

pub mod io;
pub mod primitives;

pub use slice::{slice_mesh, SlicedPair};

use crate::error::{Error, Result};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Vertices closer than this are considered coincident; vertices within this
/// distance of a cut plane are snapped onto it.
pub const SNAP_TOLERANCE: f64 = 1e-7;

/// Unit-length check tolerance for plane normals.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Identifier of a chunk: the path from the BSP root encoded as a bit string,
/// `0` = negative (left) child, `1` = positive (right) child.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Negative,
    Positive,
}

impl ChunkId {
    pub fn root() -> Self {
        ChunkId("r".to_string())
    }

    pub fn child(&self, side: Side) -> Self {
        let bit = match side {
            Side::Negative => '0',
            Side::Positive => '1',
        };
        let mut s = self.0.clone();
        s.push(bit);
        ChunkId(s)
    }

    /// Path below the root, `Side` per level.
    pub fn path(&self) -> impl Iterator<Item = Side> + '_ {
        self.0.chars().skip(1).map(|c| {
            if c == '0' {
                Side::Negative
            } else {
                Side::Positive
            }
        })
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for ChunkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if !s.starts_with('r') || !s[1..].chars().all(|c| c == '0' || c == '1') {
            return Err(Error::Config(format!("malformed chunk id {s:?}")));
        }
        Ok(ChunkId(s.to_string()))
    }
}

/// Oriented cutting plane `Π(n, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPlane {
    pub normal: Vector,
    pub point: Point,
}

impl CutPlane {
    pub fn new(normal: Vector, point: Point) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidPlane(format!(
                "normal {normal:?} is not unit length"
            )));
        }
        Ok(CutPlane { normal, point })
    }

    /// Signed distance of `p` from the plane; positive along the normal.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        self.normal.dot(&(p - self.point))
    }

    /// Angle between the plane normal and +z, in radians.
    pub fn tilt_from_z(&self) -> f64 {
        self.normal.z.clamp(-1.0, 1.0).acos()
    }
}

/// Watertight triangle mesh with CCW outward winding.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    id: ChunkId,
    vertices: Arc<Vec<Point>>,
    faces: Arc<Vec<[u32; 3]>>,
    volume: f64,
}

impl TriangleMesh {
    /// Build a mesh from raw tables, validating every invariant.
    pub fn from_parts(id: ChunkId, vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> Result<Self> {
        for (fi, face) in faces.iter().enumerate() {
            for &idx in face {
                if idx as usize >= vertices.len() {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index: idx,
                        count: vertices.len(),
                    });
                }
            }
        }
        let boundary = boundary_edges(&faces);
        if !boundary.is_empty() {
            return Err(Error::NotWatertight {
                boundary_edges: boundary,
            });
        }
        let volume = signed_volume(&vertices, &faces);
        if volume <= 0.0 {
            return Err(Error::NonPositiveVolume { volume });
        }
        Ok(TriangleMesh {
            id,
            vertices: Arc::new(vertices),
            faces: Arc::new(faces),
            volume,
        })
    }

    pub fn id(&self) -> &ChunkId {
        &self.id
    }

    pub fn with_id(&self, id: ChunkId) -> Self {
        let mut m = self.clone();
        m.id = id;
        m
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    /// Divergence-theorem signed volume, cubic meters. Cached at construction.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn volume_liters(&self) -> f64 {
        self.volume * 1000.0
    }

    /// Min/max of vertex projections onto a unit normal.
    pub fn project_interval(&self, normal: &Vector) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.vertices.iter() {
            let d = normal.dot(&v.coords);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Axis-aligned bounds.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in self.vertices.iter() {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Whether any vertex lies within `tol` of the plane.
    pub fn touches_plane(&self, plane: &CutPlane, tol: f64) -> bool {
        self.vertices
            .iter()
            .any(|v| plane.signed_distance(v).abs() <= tol)
    }

    pub fn face_normal(&self, face: usize) -> Vector {
        let [a, b, c] = self.faces[face];
        let (va, vb, vc) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        (vb - va).cross(&(vc - va))
    }
}

/// Directed edges whose reverse is missing: empty iff the mesh is closed.
pub fn boundary_edges(faces: &[[u32; 3]]) -> Vec<(u32, u32)> {
    let mut count: HashMap<(u32, u32), i32> = HashMap::new();
    for face in faces {
        for k in 0..3 {
            let e = (face[k], face[(k + 1) % 3]);
            *count.entry(e).or_insert(0) += 1;
        }
    }
    let mut boundary: Vec<(u32, u32)> = Vec::new();
    for (&(a, b), &n) in &count {
        let rev = count.get(&(b, a)).copied().unwrap_or(0);
        if n != 1 || rev != 1 {
            boundary.push((a, b));
        }
    }
    boundary.sort_unstable();
    boundary
}

/// Divergence-theorem signed volume of a triangle soup.
pub fn signed_volume(vertices: &[Point], faces: &[[u32; 3]]) -> f64 {
    let mut six_v = 0.0;
    for face in faces {
        let a = vertices[face[0] as usize].coords;
        let b = vertices[face[1] as usize].coords;
        let c = vertices[face[2] as usize].coords;
        six_v += a.dot(&b.cross(&c));
    }
    six_v / 6.0
}

/// Merge vertices closer than `tol` and drop faces that collapse.
///
/// Returns the deduplicated tables; face winding is preserved.
pub fn dedup_vertices(
    vertices: &[Point],
    faces: &[[u32; 3]],
    tol: f64,
) -> (Vec<Point>, Vec<[u32; 3]>) {
    let inv = 1.0 / tol;
    let key = |p: &Point, dx: i64, dy: i64, dz: i64| {
        (
            (p.x * inv).round() as i64 + dx,
            (p.y * inv).round() as i64 + dy,
            (p.z * inv).round() as i64 + dz,
        )
    };
    let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let mut out: Vec<Point> = Vec::new();
    let mut remap: Vec<u32> = Vec::with_capacity(vertices.len());
    for v in vertices {
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(cands) = cells.get(&key(v, dx, dy, dz)) {
                        for &ci in cands {
                            if (out[ci as usize] - v).norm() <= tol {
                                found = Some(ci);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let idx = match found {
            Some(ci) => ci,
            None => {
                let ci = out.len() as u32;
                out.push(*v);
                cells.entry(key(v, 0, 0, 0)).or_default().push(ci);
                ci
            }
        };
        remap.push(idx);
    }
    let new_faces: Vec<[u32; 3]> = faces
        .iter()
        .map(|f| [remap[f[0] as usize], remap[f[1] as usize], remap[f[2] as usize]])
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .collect();
    (out, new_faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use approx::assert_relative_eq;

    #[test]
    fn cube_volume_is_one() {
        let cube = primitives::unit_cube();
        assert_relative_eq!(cube.volume(), 1.0, max_relative = 1e-12);
        assert_eq!(cube.vertices().len(), 8);
        assert_eq!(cube.faces().len(), 12);
    }

    #[test]
    fn hemisphere_volume_converges_to_analytic() {
        // 2*pi/3 for a unit-radius hemisphere; error shrinks with refinement.
        let analytic = 2.0 * std::f64::consts::PI / 3.0;
        let coarse = primitives::hemisphere(1.0, 24, 6);
        let fine = primitives::hemisphere(1.0, 96, 24);
        let err_coarse = (coarse.volume() - analytic).abs() / analytic;
        let err_fine = (fine.volume() - analytic).abs() / analytic;
        assert!(err_coarse < 0.05, "coarse error {err_coarse}");
        assert!(err_fine < 0.005, "fine error {err_fine}");
        assert!(err_fine < err_coarse);
    }

    #[test]
    fn project_interval_unit_cube() {
        let cube = primitives::unit_cube();
        let (lo, hi) = cube.project_interval(&Vector::new(0.0, 0.0, 1.0));
        assert_relative_eq!(lo, 0.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-12);

        let diag = Vector::new(1.0, 1.0, 1.0).normalize();
        let (lo, hi) = cube.project_interval(&diag);
        // hand dot-products over the 8 corners: min at origin, max at (1,1,1)
        assert_relative_eq!(lo, 0.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 3.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn non_watertight_reports_boundary_edges() {
        // Cube with one face removed.
        let cube = primitives::unit_cube();
        let faces: Vec<[u32; 3]> = cube.faces()[1..].to_vec();
        let err = TriangleMesh::from_parts(ChunkId::root(), cube.vertices().to_vec(), faces)
            .unwrap_err();
        match err {
            Error::NotWatertight { boundary_edges } => {
                assert_eq!(boundary_edges.len(), 3)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inverted_mesh_rejected() {
        let cube = primitives::unit_cube();
        let flipped: Vec<[u32; 3]> = cube.faces().iter().map(|f| [f[0], f[2], f[1]]).collect();
        let err =
            TriangleMesh::from_parts(ChunkId::root(), cube.vertices().to_vec(), flipped)
                .unwrap_err();
        assert!(matches!(err, Error::NonPositiveVolume { .. }));
    }

    #[test]
    fn chunk_id_paths() {
        let root = ChunkId::root();
        let neg = root.child(Side::Negative);
        let pos_neg = root.child(Side::Positive).child(Side::Negative);
        assert_eq!(neg.as_str(), "r0");
        assert_eq!(pos_neg.as_str(), "r10");
        let path: Vec<Side> = pos_neg.path().collect();
        assert_eq!(path, vec![Side::Positive, Side::Negative]);
    }

    #[test]
    fn dedup_merges_close_vertices() {
        let mut verts = primitives::unit_cube().vertices().to_vec();
        let faces = primitives::unit_cube().faces().to_vec();
        // duplicate every vertex with a sub-tolerance offset and remap faces
        let n = verts.len() as u32;
        let dup: Vec<Point> = verts.iter().map(|v| v + Vector::new(1e-9, 0.0, 0.0)).collect();
        verts.extend(dup);
        let shifted: Vec<[u32; 3]> = faces.iter().map(|f| [f[0] + n, f[1] + n, f[2] + n]).collect();
        let (v2, f2) = dedup_vertices(&verts, &shifted, SNAP_TOLERANCE);
        assert_eq!(v2.len(), 8);
        assert_eq!(f2.len(), 12);
    }
}
