//! Candidate cut-plane sampling on the constrained spherical cap.
//!
//! Normals are sampled on a fixed-step (theta, phi) grid with polar angle at
//! most `phi_max` from +z, so every candidate cut satisfies the connectivity
//! and extruder-head constraints by construction. Each normal then gets a
//! family of offset planes spaced uniformly inside the mesh's projection
//! interval.

use crate::error::{Error, Result};
use crate::mesh::{CutPlane, Point, TriangleMesh, Vector, SNAP_TOLERANCE};
use serde::{Deserialize, Serialize};

/// How the connectivity and extruder angle limits are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AngleMode {
    /// max(phi_conn, phi_extr): the literal published rule.
    PaperMax,
    /// min(phi_conn, phi_extr): never violates the stricter constraint.
    #[default]
    SafeMin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Target number of sampled normals (the grid never exceeds it).
    pub normal_samples: usize,
    pub offsets_per_normal: usize,
    /// Maximum tilt of a cut normal from +z, radians.
    pub phi_max: f64,
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.normal_samples == 0 || self.offsets_per_normal == 0 {
            return Err(Error::Config(
                "normal_samples and offsets_per_normal must be >= 1".into(),
            ));
        }
        if !(self.phi_max >= 0.0 && self.phi_max <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "phi_max {} outside [0, pi/2]",
                self.phi_max
            )));
        }
        Ok(())
    }
}

/// Extruder-head clearance limit: arctan(h / l).
pub fn extruder_phi_max(nozzle_height: f64, nozzle_to_head: f64) -> Result<f64> {
    if nozzle_to_head <= 0.0 || nozzle_height < 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "extruder geometry h={nozzle_height}, l={nozzle_to_head}"
        )));
    }
    Ok((nozzle_height / nozzle_to_head).atan())
}

/// Combine the connectivity and extruder limits into the overall cap angle.
pub fn combine_phi_max(phi_conn: f64, phi_extr: f64, mode: AngleMode) -> f64 {
    match mode {
        AngleMode::PaperMax => phi_conn.max(phi_extr),
        AngleMode::SafeMin => phi_conn.min(phi_extr),
    }
}

/// Fixed-step grid of unit normals with polar angle <= phi_max from +z.
///
/// Azimuth is sampled about twice as densely as elevation: theta steps =
/// ceil(sqrt(2 M)) clamped to M, phi steps = floor(M / theta steps), both at
/// least 1. Order is theta-major, then phi, and fully deterministic.
pub fn sample_normals(params: &SamplerParams) -> Vec<Vector> {
    let m = params.normal_samples;
    if params.phi_max <= 0.0 || m == 1 {
        return vec![Vector::z()];
    }
    let theta_steps = ((2.0 * m as f64).sqrt().ceil() as usize).clamp(1, m);
    let phi_steps = (m / theta_steps).max(1);
    let phi_cap = params.phi_max.min(std::f64::consts::FRAC_PI_2 - 1e-9);
    let mut out = Vec::with_capacity(theta_steps * phi_steps);
    for ti in 0..theta_steps {
        let theta = std::f64::consts::TAU * ti as f64 / theta_steps as f64;
        for pi in 0..phi_steps {
            let phi = phi_cap * (pi + 1) as f64 / phi_steps as f64;
            out.push(Vector::new(
                phi.sin() * theta.cos(),
                phi.sin() * theta.sin(),
                phi.cos(),
            ));
        }
    }
    out
}

/// Family of offset planes for one normal: `count` offsets uniformly spaced
/// strictly inside the mesh's projection interval (endpoint planes would
/// graze the mesh and cut nothing).
pub fn plane_family(mesh: &TriangleMesh, normal: &Vector, count: usize) -> Vec<CutPlane> {
    let (j_min, j_max) = mesh.project_interval(normal);
    if j_max - j_min < 2.0 * SNAP_TOLERANCE {
        return Vec::new();
    }
    (1..=count)
        .map(|k| {
            let offset = j_min + (j_max - j_min) * k as f64 / (count + 1) as f64;
            CutPlane {
                normal: *normal,
                point: Point::from(*normal * offset),
            }
        })
        .collect()
}
