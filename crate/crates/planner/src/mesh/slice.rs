//! Planar mesh splitting with watertight cap triangulation.
//!
//! A cut produces a negative part (against the plane normal) and a positive
//! part (along it). Cross-section boundary loops are triangulated by ear
//! clipping after projection onto the cut plane; where a loop is shared by
//! both parts the same triangulation is reused with flipped winding, so the
//! interface contributions cancel exactly in the volume sum.

use super::{ChunkId, CutPlane, Point, Side, TriangleMesh, Vector, SNAP_TOLERANCE};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Result of slicing: either side may be absent when the plane misses.
#[derive(Debug, Clone)]
pub struct SlicedPair {
    pub negative: Option<TriangleMesh>,
    pub positive: Option<TriangleMesh>,
}

/// Split `mesh` by `plane`. Parts with volume below `min_part_volume` make the
/// cut degenerate. The parts get `mesh.id().child(..)` identifiers.
pub fn slice_mesh(
    mesh: &TriangleMesh,
    plane: &CutPlane,
    min_part_volume: f64,
) -> Result<SlicedPair> {
    let verts = mesh.vertices();
    let mut dist: Vec<f64> = verts.iter().map(|v| plane.signed_distance(v)).collect();
    for d in &mut dist {
        if d.abs() <= SNAP_TOLERANCE {
            *d = 0.0;
        }
    }

    // Combined vertex table: originals plus intersection points.
    let mut all: Vec<Point> = verts.to_vec();
    let mut edge_cut: HashMap<(u32, u32), u32> = HashMap::new();
    let mut cut_point = |a: u32, b: u32, all: &mut Vec<Point>| -> u32 {
        let key = (a.min(b), a.max(b));
        *edge_cut.entry(key).or_insert_with(|| {
            let (lo, hi) = (key.0 as usize, key.1 as usize);
            let (dl, dh) = (dist[lo], dist[hi]);
            let t = dl / (dl - dh);
            let p = verts[lo] + (verts[hi] - verts[lo]) * t;
            all.push(p);
            all.len() as u32 - 1
        })
    };

    let mut neg_faces: Vec<[u32; 3]> = Vec::new();
    let mut pos_faces: Vec<[u32; 3]> = Vec::new();
    for (fi, face) in mesh.faces().iter().enumerate() {
        let ds = [
            dist[face[0] as usize],
            dist[face[1] as usize],
            dist[face[2] as usize],
        ];
        if ds.iter().all(|&d| d == 0.0) {
            // Coplanar face: it caps whichever side it faces away from.
            if mesh.face_normal(fi).dot(&plane.normal) > 0.0 {
                neg_faces.push(*face);
            } else {
                pos_faces.push(*face);
            }
        } else if ds.iter().all(|&d| d <= 0.0) {
            neg_faces.push(*face);
        } else if ds.iter().all(|&d| d >= 0.0) {
            pos_faces.push(*face);
        } else {
            // Spanning triangle: clip into per-side polygons, fan-triangulate.
            let mut neg_poly: Vec<u32> = Vec::with_capacity(4);
            let mut pos_poly: Vec<u32> = Vec::with_capacity(4);
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                let da = dist[a as usize];
                let db = dist[b as usize];
                if da <= 0.0 {
                    neg_poly.push(a);
                }
                if da >= 0.0 {
                    pos_poly.push(a);
                }
                if da * db < 0.0 {
                    let c = cut_point(a, b, &mut all);
                    neg_poly.push(c);
                    pos_poly.push(c);
                }
            }
            fan(&neg_poly, &mut neg_faces);
            fan(&pos_poly, &mut pos_faces);
        }
    }

    // A side with no face area did not actually receive any geometry (at most
    // degenerate slivers lying in the plane): the plane misses the mesh.
    let side_area = |faces: &[[u32; 3]]| -> f64 {
        faces
            .iter()
            .map(|f| {
                let a = all[f[0] as usize];
                let b = all[f[1] as usize];
                let c = all[f[2] as usize];
                (b - a).cross(&(c - a)).norm() / 2.0
            })
            .sum()
    };
    let total_area = side_area(mesh.faces());
    let area_eps = 1e-12 * total_area;
    if side_area(&neg_faces) <= area_eps || side_area(&pos_faces) <= area_eps {
        let neg_empty = side_area(&neg_faces) <= area_eps;
        return Ok(SlicedPair {
            negative: if neg_empty { None } else { Some(mesh.clone()) },
            positive: if neg_empty { Some(mesh.clone()) } else { None },
        });
    }

    // Cap both sides; shared loops reuse one triangulation with flipped winding.
    let basis = plane_basis(&plane.normal);
    let mut cache: HashMap<Vec<u32>, Vec<[u32; 3]>> = HashMap::new();
    for loop_ in boundary_loops(&neg_faces) {
        let mut rev = loop_.clone();
        rev.reverse();
        let tris = triangulate_loop(&rev, &all, &basis);
        let flipped: Vec<[u32; 3]> = tris.iter().map(|t| [t[0], t[2], t[1]]).collect();
        cache.insert(canonical_cycle(&rev), flipped);
        neg_faces.extend(tris);
    }
    for loop_ in boundary_loops(&pos_faces) {
        if let Some(tris) = cache.get(&canonical_cycle(&loop_)) {
            pos_faces.extend(tris.iter().copied());
        } else {
            let mut rev = loop_.clone();
            rev.reverse();
            pos_faces.extend(triangulate_loop(&rev, &all, &basis));
        }
    }

    let negative = compact(mesh.id().child(Side::Negative), &all, &neg_faces)?;
    let positive = compact(mesh.id().child(Side::Positive), &all, &pos_faces)?;
    let min_vol = negative.volume().min(positive.volume());
    if min_vol < min_part_volume {
        return Err(Error::DegenerateCut {
            part_volume: min_vol,
            min_volume: min_part_volume,
        });
    }
    Ok(SlicedPair {
        negative: Some(negative),
        positive: Some(positive),
    })
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn compact(id: ChunkId, all: &[Point], faces: &[[u32; 3]]) -> Result<TriangleMesh> {
    let mut remap: HashMap<u32, u32> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut new_faces: Vec<[u32; 3]> = Vec::with_capacity(faces.len());
    for face in faces {
        let mut nf = [0u32; 3];
        for (k, &idx) in face.iter().enumerate() {
            nf[k] = *remap.entry(idx).or_insert_with(|| {
                vertices.push(all[idx as usize]);
                vertices.len() as u32 - 1
            });
        }
        if nf[0] != nf[1] && nf[1] != nf[2] && nf[0] != nf[2] {
            new_faces.push(nf);
        }
    }
    TriangleMesh::from_parts(id, vertices, new_faces)
}

/// Closed boundary loops of an open triangle set, in boundary-edge direction.
fn boundary_loops(faces: &[[u32; 3]]) -> Vec<Vec<u32>> {
    let mut count: HashMap<(u32, u32), i32> = HashMap::new();
    for face in faces {
        for k in 0..3 {
            *count.entry((face[k], face[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    let mut next: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut n_edges = 0;
    for (&(a, b), &n) in &count {
        let rev = count.get(&(b, a)).copied().unwrap_or(0);
        if n == 1 && rev == 0 {
            next.entry(a).or_default().push(b);
            n_edges += 1;
        }
    }
    // deterministic traversal regardless of hash order
    let mut starts: Vec<u32> = next.keys().copied().collect();
    starts.sort_unstable();
    for v in next.values_mut() {
        v.sort_unstable();
    }
    let mut loops = Vec::new();
    for start in starts {
        while next.get(&start).is_some_and(|v| !v.is_empty()) {
            let mut loop_ = vec![start];
            let mut cur = next.get_mut(&start).unwrap().pop().unwrap();
            let mut guard = 0;
            while cur != start && guard <= n_edges {
                loop_.push(cur);
                let Some(outs) = next.get_mut(&cur) else { break };
                let Some(nxt) = outs.pop() else { break };
                cur = nxt;
                guard += 1;
            }
            if cur == start && loop_.len() >= 3 {
                loops.push(loop_);
            }
        }
    }
    loops
}

/// Rotation-invariant key for a directed cyclic vertex sequence.
fn canonical_cycle(cycle: &[u32]) -> Vec<u32> {
    let pivot = cycle
        .iter()
        .enumerate()
        .min_by_key(|&(_, v)| *v)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut out = Vec::with_capacity(cycle.len());
    out.extend_from_slice(&cycle[pivot..]);
    out.extend_from_slice(&cycle[..pivot]);
    out
}

/// Orthonormal in-plane basis (u, v) with u × v = normal.
fn plane_basis(normal: &Vector) -> (Vector, Vector) {
    let pick = if normal.x.abs() < 0.9 {
        Vector::x()
    } else {
        Vector::y()
    };
    let u = (pick - normal * pick.dot(normal)).normalize();
    let v = normal.cross(&u);
    (u, v)
}

/// Ear-clip a (near-)planar polygon given as vertex indices into `all`.
/// Triangles preserve the input winding.
fn triangulate_loop(loop_: &[u32], all: &[Point], basis: &(Vector, Vector)) -> Vec<[u32; 3]> {
    let mut idx: Vec<u32> = loop_.to_vec();
    idx.dedup();
    if idx.len() > 1 && idx[0] == idx[idx.len() - 1] {
        idx.pop();
    }
    if idx.len() < 3 {
        return Vec::new();
    }
    let pts: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let p = all[i as usize].coords;
            (basis.0.dot(&p), basis.1.dot(&p))
        })
        .collect();
    let area2: f64 = (0..pts.len())
        .map(|i| {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % pts.len()];
            x0 * y1 - x1 * y0
        })
        .sum();
    let flip = area2 < 0.0;
    let (mut work_pts, mut work_idx): (Vec<(f64, f64)>, Vec<u32>) = if flip {
        (
            pts.iter().rev().copied().collect(),
            idx.iter().rev().copied().collect(),
        )
    } else {
        (pts, idx)
    };

    let mut out: Vec<[u32; 3]> = Vec::with_capacity(work_idx.len().saturating_sub(2));
    let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let emit = |t: [u32; 3], out: &mut Vec<[u32; 3]>| {
        if flip {
            out.push([t[0], t[2], t[1]]);
        } else {
            out.push(t);
        }
    };
    let scale: f64 = work_pts
        .iter()
        .map(|p| p.0.abs().max(p.1.abs()))
        .fold(1e-12, f64::max);
    let area_eps = 1e-12 * scale * scale;
    while work_idx.len() > 3 {
        let n = work_idx.len();
        let mut clipped = false;
        // prefer strictly convex ears so collinear runs are absorbed into
        // real triangles instead of producing zero-area slivers
        'passes: for min_conv in [area_eps, 0.0] {
            for i in 0..n {
                let (pi, ci, ni) = ((i + n - 1) % n, i, (i + 1) % n);
                let (a, b, c) = (work_pts[pi], work_pts[ci], work_pts[ni]);
                let conv = cross(a, b, c);
                if conv < min_conv {
                    continue;
                }
                let mut contains = false;
                for j in 0..n {
                    if j == pi || j == ci || j == ni {
                        continue;
                    }
                    let p = work_pts[j];
                    if cross(a, b, p) > area_eps
                        && cross(b, c, p) > area_eps
                        && cross(c, a, p) > area_eps
                    {
                        contains = true;
                        break;
                    }
                }
                if contains {
                    continue;
                }
                emit([work_idx[pi], work_idx[ci], work_idx[ni]], &mut out);
                work_pts.remove(ci);
                work_idx.remove(ci);
                clipped = true;
                break 'passes;
            }
        }
        if !clipped {
            // Numerically stuck polygon: fall back to a fan so the cap stays
            // combinatorially closed.
            for k in 1..work_idx.len() - 1 {
                emit([work_idx[0], work_idx[k], work_idx[k + 1]], &mut out);
            }
            return out;
        }
    }
    emit([work_idx[0], work_idx[1], work_idx[2]], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use approx::assert_relative_eq;

    fn zplane(z: f64) -> CutPlane {
        CutPlane::new(Vector::z(), Point::new(0.0, 0.0, z)).unwrap()
    }

    #[test]
    fn cube_halved_by_midplane() {
        let cube = primitives::unit_cube();
        let pair = slice_mesh(&cube, &zplane(0.5), 0.0).unwrap();
        let neg = pair.negative.unwrap();
        let pos = pair.positive.unwrap();
        assert_relative_eq!(neg.volume(), 0.5, max_relative = 1e-9);
        assert_relative_eq!(pos.volume(), 0.5, max_relative = 1e-9);
        assert_eq!(neg.id().as_str(), "r0");
        assert_eq!(pos.id().as_str(), "r1");
        // positive part lies along the normal
        for v in pos.vertices() {
            assert!(v.z >= 0.5 - 1e-7);
        }
    }

    #[test]
    fn plane_above_cube_misses() {
        let cube = primitives::unit_cube();
        let pair = slice_mesh(&cube, &zplane(2.0), 0.0).unwrap();
        assert!(pair.positive.is_none());
        let neg = pair.negative.unwrap();
        assert_relative_eq!(neg.volume(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn grazing_plane_is_a_miss() {
        let cube = primitives::unit_cube();
        let pair = slice_mesh(&cube, &zplane(0.0), 0.0).unwrap();
        assert!(pair.negative.is_none());
        assert!(pair.positive.is_some());
    }

    #[test]
    fn degenerate_cut_reported() {
        let cube = primitives::unit_cube();
        let err = slice_mesh(&cube, &zplane(1e-4), 1e-3).unwrap_err();
        assert!(matches!(err, Error::DegenerateCut { .. }));
    }

    #[test]
    fn tetrahedron_quarter_cut_matches_exact_volumes() {
        // Independent closed form for this instance: the part above z = 1/4 is
        // the tetra scaled by 3/4, so V_pos = (3/4)^3 / 6 = 27/384 and
        // V_neg = 1/6 - 27/384 = 37/384. The rational-arithmetic oracle in
        // tests/clip_oracle.rs reproduces the same two values.
        let tetra = primitives::unit_tetrahedron();
        let pair = slice_mesh(&tetra, &zplane(0.25), 0.0).unwrap();
        let neg = pair.negative.unwrap();
        let pos = pair.positive.unwrap();
        assert_relative_eq!(neg.volume(), 37.0 / 384.0, max_relative = 1e-12);
        assert_relative_eq!(pos.volume(), 27.0 / 384.0, max_relative = 1e-12);
    }

    #[test]
    fn tilted_cut_conserves_volume_on_sphere() {
        let sphere = primitives::icosphere(0.5, 2);
        let n = Vector::new(0.3, -0.2, 1.0).normalize();
        let plane = CutPlane::new(n, Point::new(0.05, 0.02, 0.1)).unwrap();
        let pair = slice_mesh(&sphere, &plane, 0.0).unwrap();
        let neg = pair.negative.unwrap();
        let pos = pair.positive.unwrap();
        assert_relative_eq!(
            neg.volume() + pos.volume(),
            sphere.volume(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn horizontal_torus_cut_handles_annular_sections() {
        let t = primitives::torus(1.0, 0.3, 32, 16);
        let pair = slice_mesh(&t, &zplane(0.05), 0.0).unwrap();
        let neg = pair.negative.unwrap();
        let pos = pair.positive.unwrap();
        assert_relative_eq!(neg.volume() + pos.volume(), t.volume(), max_relative = 1e-9);
    }

    #[test]
    fn parts_stay_within_parent_projection_interval() {
        let cube = primitives::unit_cube();
        let n = Vector::new(0.5, 0.1, 1.0).normalize();
        let plane = CutPlane::new(n, Point::new(0.5, 0.5, 0.5)).unwrap();
        let (plo, phi) = cube.project_interval(&n);
        let pair = slice_mesh(&cube, &plane, 0.0).unwrap();
        for part in [pair.negative.unwrap(), pair.positive.unwrap()] {
            let (lo, hi) = part.project_interval(&n);
            assert!(lo >= plo - 1e-9 && hi <= phi + 1e-9);
        }
    }
}
