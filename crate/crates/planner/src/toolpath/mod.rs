//! Chunk slicing into layered extrusion toolpaths.
//!
//! Each layer gets one perimeter loop per cross-section contour (inset by half
//! the line width) plus a rectilinear infill raster at the requested fraction,
//! alternating 0/90 degrees between layers. Segments within and across layers
//! are connected by explicit travel moves.

mod trajectory;

pub use trajectory::{
    body_frame_transform, end_effector_frame, nozzle_position, toolpath_to_trajectory,
    ExtruderGeometry, Frame, Trajectory, TrajectorySample,
};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrintParams {
    /// Layer height, meters.
    pub layer_height: f64,
    /// Extrusion line width, meters.
    pub line_width: f64,
    /// Infill density in [0, 1]; 0 is perimeter-only.
    pub infill_fraction: f64,
    /// Average end-effector speed, m/s.
    pub avg_speed: f64,
    /// Extrusion rate while depositing, liters per second.
    pub deposition_rate: f64,
}

impl PrintParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.layer_height > 0.0 && self.line_width > 0.0 && self.avg_speed > 0.0) {
            return Err(Error::Config(
                "layer_height, line_width and avg_speed must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.infill_fraction) {
            return Err(Error::Config("infill_fraction outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
    pub extruding: bool,
    /// Liters per second while this segment runs; zero for travel.
    pub extrusion_rate: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Toolpath {
    pub segments: Vec<Segment>,
}

impl Toolpath {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn extruded_length(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.extruding)
            .map(Segment::length)
            .sum()
    }

    /// Line-oriented export: `x0 y0 z0 x1 y1 z1 extruding rate` per segment.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for seg in &self.segments {
            s.push_str(&format!(
                "{} {} {} {} {} {} {} {}\n",
                seg.start.x,
                seg.start.y,
                seg.start.z,
                seg.end.x,
                seg.end.y,
                seg.end.z,
                u8::from(seg.extruding),
                seg.extrusion_rate
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Toolpath> {
        let mut segments = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let f: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    format: "toolpath".into(),
                    reason: format!("line {}: {e}", ln + 1),
                })?;
            if f.len() != 8 {
                return Err(Error::Parse {
                    format: "toolpath".into(),
                    reason: format!("line {}: expected 8 fields, got {}", ln + 1, f.len()),
                });
            }
            segments.push(Segment {
                start: Point::new(f[0], f[1], f[2]),
                end: Point::new(f[3], f[4], f[5]),
                extruding: f[6] != 0.0,
                extrusion_rate: f[7],
            });
        }
        Ok(Toolpath { segments })
    }
}

type Loop2 = Vec<(f64, f64)>;

/// Slice a watertight chunk into a toolpath, layers bottom-up.
pub fn slice_chunk(chunk: &TriangleMesh, params: &PrintParams) -> Result<Toolpath> {
    params.validate()?;
    if chunk.faces().is_empty() {
        return Err(Error::EmptyToolpath("chunk has no faces".into()));
    }
    let (lo, hi) = chunk.bounds();
    let mut segments: Vec<Segment> = Vec::new();
    let mut cursor: Option<Point> = None;
    let mut layer = 0usize;
    let mut emitted_layers = 0usize;
    loop {
        let z = lo.z + (layer as f64 + 0.5) * params.layer_height;
        if z >= hi.z {
            break;
        }
        let contours = cross_section(chunk, z);
        if !contours.is_empty() {
            build_layer(&contours, z, layer, params, &mut segments, &mut cursor);
            emitted_layers += 1;
        }
        layer += 1;
    }
    if emitted_layers == 0 {
        // thinner than one layer: print a single layer at mid-height
        let z = (lo.z + hi.z) / 2.0;
        let contours = cross_section(chunk, z);
        if contours.is_empty() {
            return Err(Error::EmptyToolpath(format!(
                "no printable cross-section in chunk {}",
                chunk.id()
            )));
        }
        build_layer(&contours, z, 0, params, &mut segments, &mut cursor);
    }
    Ok(Toolpath { segments })
}

fn build_layer(
    contours: &[Loop2],
    z: f64,
    layer: usize,
    params: &PrintParams,
    segments: &mut Vec<Segment>,
    cursor: &mut Option<Point>,
) {
    let w = params.line_width;
    let mut moves: Vec<(Point, Point)> = Vec::new(); // extruding polylines as segment list
    for contour in contours {
        if let Some(peri) = offset_loop(contour, w / 2.0) {
            for k in 0..peri.len() {
                let a = peri[k];
                let b = peri[(k + 1) % peri.len()];
                moves.push((Point::new(a.0, a.1, z), Point::new(b.0, b.1, z)));
            }
        }
    }
    if params.infill_fraction > 0.0 {
        let region: Vec<Loop2> = contours
            .iter()
            .filter_map(|c| offset_loop(c, w))
            .collect();
        let spacing = w / params.infill_fraction;
        let along_x = layer % 2 == 0;
        for (a, b) in raster_region(&region, spacing, along_x) {
            moves.push((Point::new(a.0, a.1, z), Point::new(b.0, b.1, z)));
        }
    }
    for (a, b) in moves {
        match cursor {
            Some(pos) if (*pos - a).norm() > 1e-9 => {
                segments.push(Segment {
                    start: *pos,
                    end: a,
                    extruding: false,
                    extrusion_rate: 0.0,
                });
            }
            None => {}
            _ => {}
        }
        segments.push(Segment {
            start: a,
            end: b,
            extruding: true,
            extrusion_rate: params.deposition_rate,
        });
        *cursor = Some(b);
    }
}

/// Planar cross-section contours at height `z`, oriented so that material
/// lies to the left of the travel direction (outer loops CCW, holes CW).
pub fn cross_section(mesh: &TriangleMesh, z: f64) -> Vec<Loop2> {
    let verts = mesh.vertices();
    let dist = |vi: u32| {
        let d = verts[vi as usize].z - z;
        if d == 0.0 {
            1e-12
        } else {
            d
        }
    };
    let mut raw: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for (fi, face) in mesh.faces().iter().enumerate() {
        let ds = [dist(face[0]), dist(face[1]), dist(face[2])];
        if ds.iter().all(|&d| d > 0.0) || ds.iter().all(|&d| d < 0.0) {
            continue;
        }
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (face[k], face[(k + 1) % 3]);
            let (da, db) = (dist(a), dist(b));
            if da * db < 0.0 {
                let t = da / (da - db);
                let pa = verts[a as usize];
                let pb = verts[b as usize];
                let p = pa + (pb - pa) * t;
                pts.push((p.x, p.y));
            }
        }
        if pts.len() != 2 {
            continue;
        }
        let n = mesh.face_normal(fi);
        // left-of-travel material: direction = z-hat cross face normal
        let dir = (-n.y, n.x);
        let seg_dir = (pts[1].0 - pts[0].0, pts[1].1 - pts[0].1);
        let (a, b) = if seg_dir.0 * dir.0 + seg_dir.1 * dir.1 >= 0.0 {
            (pts[0], pts[1])
        } else {
            (pts[1], pts[0])
        };
        if (b.0 - a.0).abs() > 1e-12 || (b.1 - a.1).abs() > 1e-12 {
            raw.push((a, b));
        }
    }
    chain_loops(raw)
}

fn quant(p: (f64, f64)) -> (i64, i64) {
    ((p.0 * 1e8).round() as i64, (p.1 * 1e8).round() as i64)
}

fn chain_loops(raw: Vec<((f64, f64), (f64, f64))>) -> Vec<Loop2> {
    let mut by_start: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, seg) in raw.iter().enumerate() {
        by_start.entry(quant(seg.0)).or_default().push(i);
    }
    for v in by_start.values_mut() {
        v.sort_unstable();
    }
    let mut used = vec![false; raw.len()];
    let mut loops: Vec<Loop2> = Vec::new();
    for i in 0..raw.len() {
        if used[i] {
            continue;
        }
        let mut loop_: Loop2 = vec![raw[i].0];
        let start_key = quant(raw[i].0);
        let mut cur = i;
        used[i] = true;
        loop {
            let endpoint = raw[cur].1;
            let key = quant(endpoint);
            if key == start_key {
                if loop_.len() >= 3 {
                    loops.push(loop_);
                }
                break;
            }
            let Some(cands) = by_start.get(&key) else {
                break; // open chain, drop
            };
            let Some(&next) = cands.iter().find(|&&c| !used[c]) else {
                break;
            };
            loop_.push(endpoint);
            used[next] = true;
            cur = next;
        }
    }
    loops
}

fn loop_area(l: &Loop2) -> f64 {
    let mut a = 0.0;
    for i in 0..l.len() {
        let p = l[i];
        let q = l[(i + 1) % l.len()];
        a += p.0 * q.1 - q.0 * p.1;
    }
    a / 2.0
}

/// Shift every edge of the loop to its left by `t` (into the material for
/// correctly oriented contours) and re-intersect adjacent edges. Returns None
/// when the loop collapses.
fn offset_loop(l: &Loop2, t: f64) -> Option<Loop2> {
    let n = l.len();
    if n < 3 {
        return None;
    }
    // drop near-duplicate consecutive points
    let mut pts: Loop2 = Vec::with_capacity(n);
    for &p in l {
        if pts
            .last()
            .is_none_or(|q: &(f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() > 1e-9)
        {
            pts.push(p);
        }
    }
    while pts.len() > 1 && quant(pts[0]) == quant(*pts.last().unwrap()) {
        pts.pop();
    }
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let edge = |i: usize| {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let d = (b.0 - a.0, b.1 - a.1);
        let len = (d.0 * d.0 + d.1 * d.1).sqrt();
        (a, (d.0 / len, d.1 / len))
    };
    let mut out: Loop2 = Vec::with_capacity(n);
    for i in 0..n {
        let (pa, da) = edge((i + n - 1) % n);
        let (pb, db) = edge(i);
        // lines shifted left by t
        let na = (-da.1, da.0);
        let nb = (-db.1, db.0);
        let oa = (pa.0 + t * na.0, pa.1 + t * na.1);
        let ob = (pb.0 + t * nb.0, pb.1 + t * nb.1);
        let cross = da.0 * db.1 - da.1 * db.0;
        let p = if cross.abs() < 1e-9 {
            (pb.0 + t * nb.0, pb.1 + t * nb.1)
        } else {
            // intersect oa + s*da with ob + u*db
            let s = ((ob.0 - oa.0) * db.1 - (ob.1 - oa.1) * db.0) / cross;
            (oa.0 + s * da.0, oa.1 + s * da.1)
        };
        out.push(p);
    }
    let a_old = loop_area(&pts);
    let a_new = loop_area(&out);
    if a_new.signum() != a_old.signum() || a_new.abs() < t * t {
        return None;
    }
    Some(out)
}

/// Even-odd rectilinear raster of a multi-loop region. Returns extrusion
/// segments serpentine-ordered. `along_x` rasters lines parallel to x.
fn raster_region(region: &[Loop2], spacing: f64, along_x: bool) -> Vec<((f64, f64), (f64, f64))> {
    if region.is_empty() {
        return Vec::new();
    }
    // work in (u, v) with raster lines parallel to u
    let map = |p: (f64, f64)| if along_x { p } else { (p.1, p.0) };
    let unmap = |p: (f64, f64)| if along_x { p } else { (p.1, p.0) };
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for l in region {
        for &p in l {
            let (_, v) = map(p);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
    }
    let mut out = Vec::new();
    let mut row = 0usize;
    let mut v = vmin + spacing / 2.0;
    while v < vmax {
        let mut xs: Vec<f64> = Vec::new();
        for l in region {
            for i in 0..l.len() {
                let (u1, v1) = map(l[i]);
                let (u2, v2) = map(l[(i + 1) % l.len()]);
                let (v1, v2) = (v1 - v, v2 - v);
                if v1 * v2 < 0.0 {
                    xs.push(u1 + v1 / (v1 - v2) * (u2 - u1));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        let mut spans: Vec<(f64, f64)> = xs.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        if row % 2 == 1 {
            spans.reverse();
        }
        for (u0, u1) in spans {
            if u1 - u0 < 1e-9 {
                continue;
            }
            let (a, b) = if row % 2 == 0 {
                ((u0, v), (u1, v))
            } else {
                ((u1, v), (u0, v))
            };
            out.push((unmap(a), unmap(b)));
        }
        row += 1;
        v += spacing;
    }
    out
}
