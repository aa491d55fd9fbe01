//! Procedural test meshes. All generators return watertight, outward-oriented
//! meshes rooted at `ChunkId::root()`.

use super::{ChunkId, Point, TriangleMesh, Vector};
use std::collections::HashMap;

/// Axis-aligned box from `lo` to `hi`.
pub fn aabb(lo: Point, hi: Point) -> TriangleMesh {
    let v = |x: f64, y: f64, z: f64| Point::new(x, y, z);
    let vertices = vec![
        v(lo.x, lo.y, lo.z),
        v(hi.x, lo.y, lo.z),
        v(hi.x, hi.y, lo.z),
        v(lo.x, hi.y, lo.z),
        v(lo.x, lo.y, hi.z),
        v(hi.x, lo.y, hi.z),
        v(hi.x, hi.y, hi.z),
        v(lo.x, hi.y, hi.z),
    ];
    let faces = vec![
        [0, 3, 2],
        [0, 2, 1],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [0, 4, 7],
        [0, 7, 3],
        [1, 2, 6],
        [1, 6, 5],
    ];
    TriangleMesh::from_parts(ChunkId::root(), vertices, faces).expect("box is watertight")
}

/// The canonical unit cube `[0,1]^3` (8 vertices, 12 faces).
pub fn unit_cube() -> TriangleMesh {
    aabb(Point::new(0.0, 0.0, 0.0), Point::new(1.0, 1.0, 1.0))
}

/// Tetrahedron with corners at the origin and the three unit axis points.
pub fn unit_tetrahedron() -> TriangleMesh {
    let vertices = vec![
        Point::new(0.0, 0.0, 0.0),
        Point::new(1.0, 0.0, 0.0),
        Point::new(0.0, 1.0, 0.0),
        Point::new(0.0, 0.0, 1.0),
    ];
    let faces = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    TriangleMesh::from_parts(ChunkId::root(), vertices, faces).expect("tetra is watertight")
}

/// Hemispherical dome sitting on the plane z = 0, flat base included.
///
/// `segments` points per latitude ring, `rings` latitude bands.
pub fn hemisphere(radius: f64, segments: usize, rings: usize) -> TriangleMesh {
    assert!(segments >= 3 && rings >= 2);
    let mut vertices: Vec<Point> = Vec::new();
    for i in 0..rings {
        let phi = std::f64::consts::FRAC_PI_2 * i as f64 / rings as f64;
        let (z, rho) = (radius * phi.sin(), radius * phi.cos());
        for j in 0..segments {
            let theta = std::f64::consts::TAU * j as f64 / segments as f64;
            vertices.push(Point::new(rho * theta.cos(), rho * theta.sin(), z));
        }
    }
    let pole = vertices.len() as u32;
    vertices.push(Point::new(0.0, 0.0, radius));
    let center = vertices.len() as u32;
    vertices.push(Point::new(0.0, 0.0, 0.0));

    let idx = |i: usize, j: usize| (i * segments + j % segments) as u32;
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for i in 0..rings - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for j in 0..segments {
        faces.push([idx(rings - 1, j), idx(rings - 1, j + 1), pole]);
        faces.push([center, idx(0, j + 1), idx(0, j)]);
    }
    TriangleMesh::from_parts(ChunkId::root(), vertices, faces).expect("hemisphere is watertight")
}

/// Hemispherical dome scaled so the mesh volume equals `volume_m3` exactly.
pub fn dome_with_volume(volume_m3: f64, segments: usize, rings: usize) -> TriangleMesh {
    let unit = hemisphere(1.0, segments, rings);
    let scale = (volume_m3 / unit.volume()).cbrt();
    let vertices: Vec<Point> = unit.vertices().iter().map(|v| Point::from(v.coords * scale)).collect();
    TriangleMesh::from_parts(ChunkId::root(), vertices, unit.faces().to_vec())
        .expect("scaled dome is watertight")
}

/// Torus centered at the origin, tube axis +z.
pub fn torus(major: f64, minor: f64, seg_u: usize, seg_v: usize) -> TriangleMesh {
    assert!(seg_u >= 3 && seg_v >= 3);
    let mut vertices: Vec<Point> = Vec::new();
    for i in 0..seg_u {
        let u = std::f64::consts::TAU * i as f64 / seg_u as f64;
        for j in 0..seg_v {
            let v = std::f64::consts::TAU * j as f64 / seg_v as f64;
            let rho = major + minor * v.cos();
            vertices.push(Point::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % seg_u) * seg_v + j % seg_v) as u32;
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for i in 0..seg_u {
        for j in 0..seg_v {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::from_parts(ChunkId::root(), vertices, faces).expect("torus is watertight")
}

/// Icosphere: subdivided icosahedron projected to the sphere.
/// Face count is `20 * 4^subdivisions`.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let mut vertices: Vec<Point> = raw
        .iter()
        .map(|&(x, y, z)| {
            let v = Vector::new(x, y, z).normalize() * radius;
            Point::from(v)
        })
        .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Point>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (vertices[a as usize].coords + vertices[b as usize].coords) / 2.0;
                let p = Point::from(m.normalize() * radius);
                vertices.push(p);
                vertices.len() as u32 - 1
            })
        };
        let mut next: Vec<[u32; 3]> = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriangleMesh::from_parts(ChunkId::root(), vertices, faces).expect("icosphere is watertight")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_face_count_and_volume() {
        let s = icosphere(1.0, 3);
        assert_eq!(s.faces().len(), 1280);
        let analytic = 4.0 * std::f64::consts::PI / 3.0;
        assert!((s.volume() - analytic).abs() / analytic < 0.02);
    }

    #[test]
    fn torus_volume_near_analytic() {
        let m = torus(1.0, 0.3, 48, 24);
        let analytic = 2.0 * std::f64::consts::PI.powi(2) * 1.0 * 0.3 * 0.3;
        assert!((m.volume() - analytic).abs() / analytic < 0.02);
    }

    #[test]
    fn dome_scaled_volume_exact() {
        let dome = dome_with_volume(0.02524, 48, 12);
        assert!((dome.volume() - 0.02524).abs() < 1e-12);
    }

    #[test]
    fn tetra_volume() {
        assert!((unit_tetrahedron().volume() - 1.0 / 6.0).abs() < 1e-15);
    }
}
