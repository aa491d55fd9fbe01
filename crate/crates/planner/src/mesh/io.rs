//! STL (binary + ASCII) and Wavefront OBJ ingestion, binary STL export.
//!
//! Loaders deduplicate vertices within `SNAP_TOLERANCE` and validate the
//! watertightness and orientation invariants on construction.

use super::{dedup_vertices, ChunkId, Point, TriangleMesh, SNAP_TOLERANCE};
use crate::error::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::Cursor;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlBinary,
    StlAscii,
    Obj,
}

impl MeshFormat {
    /// Guess the format from a file name and the first bytes.
    pub fn detect(path: &Path, bytes: &[u8]) -> Option<MeshFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("obj") => Some(MeshFormat::Obj),
            Some("stl") | Some("STL") => {
                let head = String::from_utf8_lossy(&bytes[..bytes.len().min(512)]).to_lowercase();
                if head.trim_start().starts_with("solid") && head.contains("facet") {
                    Some(MeshFormat::StlAscii)
                } else {
                    Some(MeshFormat::StlBinary)
                }
            }
            _ => None,
        }
    }
}

fn parse_err(format: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        format: format.to_string(),
        reason: reason.into(),
    }
}

/// Parse raw bytes in the declared format into a validated mesh.
pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh> {
    let (vertices, faces) = match format {
        MeshFormat::StlBinary => parse_stl_binary(bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(bytes)?,
        MeshFormat::Obj => parse_obj(bytes)?,
    };
    let (vertices, faces) = dedup_vertices(&vertices, &faces, SNAP_TOLERANCE);
    TriangleMesh::from_parts(ChunkId::root(), vertices, faces)
}

/// Load from disk, detecting the format from the extension and contents.
pub fn load_mesh_path(path: &Path) -> Result<TriangleMesh> {
    let bytes = std::fs::read(path)?;
    let format = MeshFormat::detect(path, &bytes)
        .ok_or_else(|| parse_err("auto", format!("cannot detect mesh format of {path:?}")))?;
    load_mesh(&bytes, format)
}

fn parse_stl_binary(bytes: &[u8]) -> Result<(Vec<Point>, Vec<[u32; 3]>)> {
    if bytes.len() < 84 {
        return Err(parse_err("stl-binary", "file shorter than 84-byte prelude"));
    }
    let mut cur = Cursor::new(&bytes[80..]);
    let count = cur
        .read_u32::<LittleEndian>()
        .map_err(|e| parse_err("stl-binary", e.to_string()))? as usize;
    if bytes.len() < 84 + count * 50 {
        return Err(parse_err(
            "stl-binary",
            format!("expected {count} 50-byte records, file truncated"),
        ));
    }
    let mut vertices = Vec::with_capacity(count * 3);
    let mut faces = Vec::with_capacity(count);
    for _ in 0..count {
        // skip the stored normal, it is recomputed from winding
        for _ in 0..3 {
            cur.read_f32::<LittleEndian>()
                .map_err(|e| parse_err("stl-binary", e.to_string()))?;
        }
        let base = vertices.len() as u32;
        for _ in 0..3 {
            let mut c = [0.0f64; 3];
            for slot in &mut c {
                *slot = cur
                    .read_f32::<LittleEndian>()
                    .map_err(|e| parse_err("stl-binary", e.to_string()))?
                    as f64;
            }
            vertices.push(Point::new(c[0], c[1], c[2]));
        }
        cur.read_u16::<LittleEndian>()
            .map_err(|e| parse_err("stl-binary", e.to_string()))?;
        faces.push([base, base + 1, base + 2]);
    }
    Ok((vertices, faces))
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<(Vec<Point>, Vec<[u32; 3]>)> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| parse_err("stl-ascii", "not valid UTF-8"))?;
    let mut vertices: Vec<Point> = Vec::new();
    for line in text.lines() {
        let mut tok = line.split_whitespace();
        if tok.next() == Some("vertex") {
            let mut c = [0.0f64; 3];
            for slot in &mut c {
                *slot = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err("stl-ascii", format!("bad vertex line {line:?}")))?;
            }
            vertices.push(Point::new(c[0], c[1], c[2]));
        }
    }
    if vertices.is_empty() || vertices.len() % 3 != 0 {
        return Err(parse_err(
            "stl-ascii",
            format!("vertex count {} is not a positive multiple of 3", vertices.len()),
        ));
    }
    let faces = (0..vertices.len() as u32 / 3)
        .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
        .collect();
    Ok((vertices, faces))
}

fn parse_obj(bytes: &[u8]) -> Result<(Vec<Point>, Vec<[u32; 3]>)> {
    let text = std::str::from_utf8(bytes).map_err(|_| parse_err("obj", "not valid UTF-8"))?;
    let mut vertices: Vec<Point> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    *slot = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| {
                        parse_err("obj", format!("bad v record on line {}", ln + 1))
                    })?;
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        first
                            .parse::<i64>()
                            .ok()
                            .filter(|&i| i > 0 && (i as usize) <= vertices.len())
                            .map(|i| i as u32 - 1)
                            .ok_or_else(|| {
                                parse_err("obj", format!("bad f index {t:?} on line {}", ln + 1))
                            })
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(
                        "obj",
                        format!("face with fewer than 3 vertices on line {}", ln + 1),
                    ));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// Serialize as little-endian binary STL (50-byte records). Deterministic.
pub fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::with_capacity(84 + mesh.faces().len() * 50);
    let mut header = [0u8; 80];
    let tag = b"aeroprint chunk export";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.write_u32::<LittleEndian>(mesh.faces().len() as u32)
        .unwrap();
    for (fi, face) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normal(fi);
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for c in [n.x, n.y, n.z] {
            out.write_f32::<LittleEndian>(c as f32).unwrap();
        }
        for &vi in face {
            let v = mesh.vertices()[vi as usize];
            for c in [v.x, v.y, v.z] {
                out.write_f32::<LittleEndian>(c as f32).unwrap();
            }
        }
        out.write_u16::<LittleEndian>(0).unwrap();
    }
    out
}

/// ASCII STL serialization, mainly for fixtures and debugging.
pub fn write_stl_ascii(mesh: &TriangleMesh, name: &str) -> String {
    let mut s = format!("solid {name}\n");
    for (fi, face) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normal(fi);
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        s.push_str(&format!("  facet normal {} {} {}\n", n.x, n.y, n.z));
        s.push_str("    outer loop\n");
        for &vi in face {
            let v = mesh.vertices()[vi as usize];
            s.push_str(&format!("      vertex {} {} {}\n", v.x, v.y, v.z));
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    s.push_str(&format!("endsolid {name}\n"));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn ascii_cube_roundtrip() {
        let cube = primitives::unit_cube();
        let text = write_stl_ascii(&cube, "cube");
        let mesh = load_mesh(text.as_bytes(), MeshFormat::StlAscii).unwrap();
        assert_eq!(mesh.vertices().len(), 8);
        assert_eq!(mesh.faces().len(), 12);
        assert!((mesh.volume() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn obj_with_dangling_edge_reports_boundary() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\n";
        // missing face (2,3,4): three boundary edges remain
        let err = load_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap_err();
        match err {
            Error::NotWatertight { boundary_edges } => {
                assert_eq!(boundary_edges.len(), 3);
                assert!(boundary_edges.contains(&(1, 3)));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn binary_icosphere_roundtrip_volume() {
        let sphere = primitives::icosphere(1.0, 3);
        let bytes = write_stl_binary(&sphere);
        let mesh = load_mesh(&bytes, MeshFormat::StlBinary).unwrap();
        assert_eq!(mesh.faces().len(), 1280);
        let analytic = 4.0 * std::f64::consts::PI / 3.0;
        assert!((mesh.volume() - analytic).abs() / analytic < 0.02);
    }

    #[test]
    fn truncated_binary_rejected() {
        let sphere = primitives::icosphere(1.0, 1);
        let bytes = write_stl_binary(&sphere);
        let err = load_mesh(&bytes[..100], MeshFormat::StlBinary).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }
}
