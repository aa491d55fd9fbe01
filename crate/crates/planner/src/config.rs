//! TOML run configuration and its mapping onto the module parameter structs.
//!
//! One document drives a whole run: mesh source, fleet, extruder geometry,
//! plane sampling, search widths, print parameters, simulation parameters and
//! output location. Every section maps onto the corresponding module's params
//! with validation at load time.

use crate::error::{Error, Result};
use crate::mesh::{primitives, TriangleMesh};
use crate::sampler::{combine_phi_max, extruder_phi_max, AngleMode, SamplerParams};
use crate::scheduler::{ExtruderDims, FeasibilityMode, FleetConfig};
use crate::search::SearchParams;
use crate::sim::SimParams;
use crate::toolpath::{ExtruderGeometry, PrintParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub mesh: MeshSection,
    pub fleet: FleetSection,
    pub extruder: ExtruderSection,
    pub sampler: SamplerSection,
    pub search: SearchSection,
    #[serde(default)]
    pub print: PrintSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either a mesh file on disk or a generated primitive, not both.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub path: Option<PathBuf>,
    pub generate: Option<GenerateMesh>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GenerateMesh {
    Cube {
        size: f64,
    },
    /// Hemisphere scaled so the enclosed volume matches `volume_l` exactly.
    Dome {
        volume_l: f64,
        #[serde(default = "default_segments")]
        segments: usize,
        #[serde(default = "default_rings")]
        rings: usize,
    },
    Hemisphere {
        radius: f64,
        #[serde(default = "default_segments")]
        segments: usize,
        #[serde(default = "default_rings")]
        rings: usize,
    },
    Torus {
        major_radius: f64,
        minor_radius: f64,
        #[serde(default = "default_segments")]
        segments_major: usize,
        #[serde(default = "default_rings")]
        segments_minor: usize,
    },
}

fn default_segments() -> usize {
    48
}

fn default_rings() -> usize {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSection {
    /// Tank capacities in liters, one per UAV.
    pub capacities_l: Vec<f64>,
    /// Defaults to uav0, uav1, ... when omitted.
    pub uav_ids: Option<Vec<String>>,
    #[serde(default)]
    pub feasibility: FeasibilityMode,
}

/// Extruder geometry, meters and degrees. `nozzle_height` / `nozzle_to_head`
/// bound the cut slope; `arm_length` / `joint_to_nozzle` / `joint_angle_deg`
/// define the body-to-nozzle transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtruderSection {
    pub nozzle_height: f64,
    pub nozzle_to_head: f64,
    pub arm_length: f64,
    pub joint_to_nozzle: f64,
    #[serde(default)]
    pub joint_angle_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub normal_samples: usize,
    pub offsets_per_normal: usize,
    /// Connectivity bound on cut tilt, degrees.
    #[serde(default = "default_phi_conn_deg")]
    pub phi_conn_max_deg: f64,
    #[serde(default)]
    pub angle_mode: AngleMode,
}

fn default_phi_conn_deg() -> f64 {
    45.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub w_inner: usize,
    pub w_outer: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrintSection {
    pub layer_height: f64,
    pub line_width: f64,
    pub infill_fraction: f64,
    pub avg_speed: f64,
    pub deposition_rate: f64,
}

impl Default for PrintSection {
    fn default() -> Self {
        PrintSection {
            layer_height: 0.01,
            line_width: 0.01,
            infill_fraction: 1.0,
            avg_speed: 0.5,
            deposition_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub tracking_time_constant: f64,
    /// Defaults to a radius making sphere volume per diameter of travel match
    /// the printed bead cross-section `line_width * layer_height`.
    pub deposition_sphere_radius: Option<f64>,
    pub disturbance_std: f64,
    pub rng_seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: 0.02,
            tracking_time_constant: 0.3,
            deposition_sphere_radius: None,
            disturbance_std: 0.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.mesh.path, &self.mesh.generate) {
            (None, None) => {
                return Err(Error::Config(
                    "mesh section needs either `path` or a `generate` table".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "mesh section has both `path` and `generate`; pick one".into(),
                ))
            }
            _ => {}
        }
        if let Some(ids) = &self.fleet.uav_ids {
            if ids.len() != self.fleet.capacities_l.len() {
                return Err(Error::Config(format!(
                    "{} uav_ids for {} capacities",
                    ids.len(),
                    self.fleet.capacities_l.len()
                )));
            }
        }
        if !(0.0..90.0).contains(&self.sampler.phi_conn_max_deg) {
            return Err(Error::Config(format!(
                "phi_conn_max_deg must be in [0, 90), got {}",
                self.sampler.phi_conn_max_deg
            )));
        }
        self.fleet()?;
        self.sampler_params()?.validate()?;
        self.search_params()?.validate()?;
        self.print_params().validate()?;
        self.sim_params().validate()?;
        self.extruder_geometry().validate()?;
        Ok(())
    }

    /// Load or generate the input mesh.
    pub fn load_mesh(&self, config_dir: &Path) -> Result<TriangleMesh> {
        if let Some(path) = &self.mesh.path {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                config_dir.join(path)
            };
            return crate::mesh::io::load_mesh_path(&full);
        }
        match self.mesh.generate.as_ref().unwrap() {
            GenerateMesh::Cube { size } => {
                if !(*size > 0.0) {
                    return Err(Error::Config("cube size must be positive".into()));
                }
                Ok(primitives::aabb(
                    crate::mesh::Point::origin(),
                    crate::mesh::Point::new(*size, *size, *size),
                ))
            }
            GenerateMesh::Dome {
                volume_l,
                segments,
                rings,
            } => Ok(primitives::dome_with_volume(
                volume_l * 1e-3,
                *segments,
                *rings,
            )),
            GenerateMesh::Hemisphere {
                radius,
                segments,
                rings,
            } => Ok(primitives::hemisphere(*radius, *segments, *rings)),
            GenerateMesh::Torus {
                major_radius,
                minor_radius,
                segments_major,
                segments_minor,
            } => Ok(primitives::torus(
                *major_radius,
                *minor_radius,
                *segments_major,
                *segments_minor,
            )),
        }
    }

    pub fn fleet(&self) -> Result<FleetConfig> {
        let n = self.fleet.capacities_l.len();
        let ids = self
            .fleet
            .uav_ids
            .clone()
            .unwrap_or_else(|| (0..n).map(|i| format!("uav{i}")).collect());
        FleetConfig::new(ids, self.fleet.capacities_l.clone(), self.extruder_dims())
    }

    fn extruder_dims(&self) -> ExtruderDims {
        ExtruderDims {
            nozzle_height: self.extruder.nozzle_height,
            nozzle_to_head: self.extruder.nozzle_to_head,
            arm_length: self.extruder.arm_length,
            joint_to_nozzle: self.extruder.joint_to_nozzle,
        }
    }

    pub fn extruder_geometry(&self) -> ExtruderGeometry {
        ExtruderGeometry {
            arm_length: self.extruder.arm_length,
            joint_to_nozzle: self.extruder.joint_to_nozzle,
            joint_angle: self.extruder.joint_angle_deg.to_radians(),
        }
    }

    /// Cut-tilt bound: connectivity limit combined with the extruder-collision
    /// limit arctan(h/l) under the configured mode.
    pub fn phi_max(&self) -> Result<f64> {
        let phi_extr = extruder_phi_max(self.extruder.nozzle_height, self.extruder.nozzle_to_head)?;
        Ok(combine_phi_max(
            self.sampler.phi_conn_max_deg.to_radians(),
            phi_extr,
            self.sampler.angle_mode,
        ))
    }

    pub fn sampler_params(&self) -> Result<SamplerParams> {
        Ok(SamplerParams {
            normal_samples: self.sampler.normal_samples,
            offsets_per_normal: self.sampler.offsets_per_normal,
            phi_max: self.phi_max()?,
        })
    }

    pub fn search_params(&self) -> Result<SearchParams> {
        Ok(SearchParams {
            w_inner: self.search.w_inner,
            w_outer: self.search.w_outer,
            sampler: self.sampler_params()?,
            max_iterations: self.search.max_iterations,
        })
    }

    pub fn print_params(&self) -> PrintParams {
        PrintParams {
            layer_height: self.print.layer_height,
            line_width: self.print.line_width,
            infill_fraction: self.print.infill_fraction,
            avg_speed: self.print.avg_speed,
            deposition_rate: self.print.deposition_rate,
        }
    }

    pub fn sim_params(&self) -> SimParams {
        // Sphere volume per diameter of travel equals bead cross-section area
        // times the diameter: 4/3 pi r^3 = w*h*2r => r = sqrt(3*w*h/(2*pi)).
        let radius = self.sim.deposition_sphere_radius.unwrap_or_else(|| {
            (3.0 * self.print.line_width * self.print.layer_height
                / (2.0 * std::f64::consts::PI))
                .sqrt()
        });
        SimParams {
            dt: self.sim.dt,
            tracking_time_constant: self.sim.tracking_time_constant,
            deposition_sphere_radius: radius,
            disturbance_std: self.sim.disturbance_std,
            rng_seed: self.sim.rng_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MINIMAL: &str = r#"
        [mesh.generate]
        shape = "cube"
        size = 0.1

        [fleet]
        capacities_l = [4.0, 4.0]

        [extruder]
        nozzle_height = 0.05
        nozzle_to_head = 0.1
        arm_length = 0.3
        joint_to_nozzle = 0.2

        [sampler]
        normal_samples = 8
        offsets_per_normal = 3

        [search]
        w_inner = 2
        w_outer = 4
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.search.max_iterations, 64);
        assert_relative_eq!(cfg.print.layer_height, 0.01);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
        let fleet = cfg.fleet().unwrap();
        assert_eq!(fleet.uav_ids(), ["uav0".to_string(), "uav1".to_string()]);
        let mesh = cfg.load_mesh(Path::new(".")).unwrap();
        assert_relative_eq!(mesh.volume(), 0.001, epsilon = 1e-12);
    }

    #[test]
    fn safe_min_takes_the_tighter_angle() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        // arctan(0.05/0.1) ~ 26.57 deg < 45 deg connectivity bound
        let phi = cfg.phi_max().unwrap();
        assert_relative_eq!(phi, (0.5f64).atan(), epsilon = 1e-12);
    }

    #[test]
    fn paper_max_takes_the_looser_angle() {
        let text = MINIMAL.replace(
            "offsets_per_normal = 3",
            "offsets_per_normal = 3\nangle_mode = \"paper-max\"",
        );
        let cfg = PipelineConfig::from_toml(&text).unwrap();
        assert_relative_eq!(
            cfg.phi_max().unwrap(),
            45f64.to_radians(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn default_sphere_radius_matches_bead_section() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        let p = cfg.sim_params();
        let r = p.deposition_sphere_radius;
        // sphere volume per diameter travelled == bead cross-section * diameter
        assert_relative_eq!(
            4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
            0.01 * 0.01 * 2.0 * r,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_mesh_without_source() {
        let text = MINIMAL.replace("[mesh.generate]\n        shape = \"cube\"\n        size = 0.1", "[mesh]");
        let err = PipelineConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{MINIMAL}\n[search2]\nx = 1\n");
        assert!(PipelineConfig::from_toml(&text).is_err());
    }

    #[test]
    fn rejects_mismatched_uav_ids() {
        let text = MINIMAL.replace(
            "capacities_l = [4.0, 4.0]",
            "capacities_l = [4.0, 4.0]\nuav_ids = [\"a\"]",
        );
        assert!(PipelineConfig::from_toml(&text).is_err());
    }

    #[test]
    fn dome_generation_hits_requested_volume() {
        let text = MINIMAL.replace(
            "shape = \"cube\"\n        size = 0.1",
            "shape = \"dome\"\n        volume_l = 25.24",
        );
        let cfg = PipelineConfig::from_toml(&text).unwrap();
        let mesh = cfg.load_mesh(Path::new(".")).unwrap();
        assert_relative_eq!(mesh.volume_liters(), 25.24, epsilon = 1e-9);
    }
}
