//! Toolpath-to-trajectory conversion and the extruder-arm frame transform.
//!
//! Segment endpoints become timed waypoints at constant average speed. The
//! body-frame transform places the UAV origin so that the nozzle of the
//! hanging arm (length `l_ex` to the joint, `l_g` joint to nozzle, joint
//! angle theta about the body y-axis) tracks the end-effector trajectory.

use super::{PrintParams, Toolpath};
use crate::error::{Error, Result};
use crate::mesh::{Point, Vector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    EndEffector,
    Body,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: Point,
    pub yaw: f64,
    pub extruding: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub frame: Frame,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    /// Linear interpolation at time `t`, clamped to the trajectory span.
    pub fn sample_at(&self, t: f64) -> TrajectorySample {
        let samples = &self.samples;
        if t <= samples[0].time {
            return samples[0];
        }
        if t >= samples[samples.len() - 1].time {
            let mut s = samples[samples.len() - 1];
            s.extruding = false;
            return s;
        }
        let i = samples.partition_point(|s| s.time <= t);
        let (a, b) = (&samples[i - 1], &samples[i]);
        let alpha = (t - a.time) / (b.time - a.time);
        TrajectorySample {
            time: t,
            position: a.position + (b.position - a.position) * alpha,
            yaw: a.yaw + (b.yaw - a.yaw) * alpha,
            extruding: a.extruding,
        }
    }

    /// CSV export with header `time,x,y,z,yaw,extruding`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,x,y,z,yaw,extruding\n");
        for p in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.time,
                p.position.x,
                p.position.y,
                p.position.z,
                p.yaw,
                u8::from(p.extruding)
            ));
        }
        s
    }
}

/// Hanging-arm geometry, meters and radians.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExtruderGeometry {
    /// Body origin to joint, along body -z.
    pub arm_length: f64,
    /// Joint to nozzle tip.
    pub joint_to_nozzle: f64,
    /// Joint angle about the body y-axis; 0 points the nozzle straight down.
    pub joint_angle: f64,
}

impl ExtruderGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.arm_length < 0.0 || self.joint_to_nozzle < 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "negative arm lengths: l_ex={}, l_g={}",
                self.arm_length, self.joint_to_nozzle
            )));
        }
        Ok(())
    }

    /// Nozzle position relative to the body origin, before yaw.
    fn nozzle_offset(&self) -> Vector {
        let (s, c) = self.joint_angle.sin_cos();
        Vector::new(
            self.joint_to_nozzle * s,
            0.0,
            -self.arm_length - self.joint_to_nozzle * c,
        )
    }
}

fn yaw_rotate(v: &Vector, yaw: f64) -> Vector {
    let (s, c) = yaw.sin_cos();
    Vector::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Time-parameterize a toolpath at constant average speed. Zero-length
/// segments are dropped; timestamps are cumulative from zero.
pub fn toolpath_to_trajectory(path: &Toolpath, params: &PrintParams) -> Result<Trajectory> {
    params.validate()?;
    let mut samples: Vec<TrajectorySample> = Vec::new();
    let mut t = 0.0;
    for seg in &path.segments {
        let len = seg.length();
        if len < 1e-12 {
            continue;
        }
        if samples.is_empty() {
            samples.push(TrajectorySample {
                time: 0.0,
                position: seg.start,
                yaw: 0.0,
                extruding: seg.extruding,
            });
        } else if let Some(last) = samples.last_mut() {
            // waypoint carries the flag of the segment it starts
            last.extruding = seg.extruding;
        }
        t += len / params.avg_speed;
        samples.push(TrajectorySample {
            time: t,
            position: seg.end,
            yaw: 0.0,
            extruding: false,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyToolpath(
            "toolpath has no finite-length segments".into(),
        ));
    }
    Ok(Trajectory {
        frame: Frame::EndEffector,
        samples,
    })
}

/// Map an end-effector trajectory to the UAV body frame: for every sample the
/// body origin is the unique point placing the nozzle at the sample position
/// with the given joint angle and yaw. With theta = 0 the body sits directly
/// above the nozzle by `l_ex + l_g`.
pub fn body_frame_transform(traj: &Trajectory, geom: &ExtruderGeometry) -> Result<Trajectory> {
    geom.validate()?;
    if traj.frame != Frame::EndEffector {
        return Err(Error::Config("expected an end-effector trajectory".into()));
    }
    let offset = geom.nozzle_offset();
    let samples = traj
        .samples
        .iter()
        .map(|s| TrajectorySample {
            position: s.position - yaw_rotate(&offset, s.yaw),
            ..*s
        })
        .collect();
    Ok(Trajectory {
        frame: Frame::Body,
        samples,
    })
}

/// Inverse of [`body_frame_transform`].
pub fn end_effector_frame(traj: &Trajectory, geom: &ExtruderGeometry) -> Result<Trajectory> {
    geom.validate()?;
    if traj.frame != Frame::Body {
        return Err(Error::Config("expected a body-frame trajectory".into()));
    }
    let offset = geom.nozzle_offset();
    let samples = traj
        .samples
        .iter()
        .map(|s| TrajectorySample {
            position: s.position + yaw_rotate(&offset, s.yaw),
            ..*s
        })
        .collect();
    Ok(Trajectory {
        frame: Frame::EndEffector,
        samples,
    })
}

/// Nozzle position for a body pose, used by the simulator.
pub fn nozzle_position(body: &Point, yaw: f64, geom: &ExtruderGeometry) -> Point {
    body + yaw_rotate(&geom.nozzle_offset(), yaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolpath::Segment;
    use approx::assert_relative_eq;

    fn params(speed: f64) -> PrintParams {
        PrintParams {
            layer_height: 0.01,
            line_width: 0.01,
            infill_fraction: 1.0,
            avg_speed: speed,
            deposition_rate: 0.01,
        }
    }

    fn seg(a: [f64; 3], b: [f64; 3], extruding: bool) -> Segment {
        Segment {
            start: Point::new(a[0], a[1], a[2]),
            end: Point::new(b[0], b[1], b[2]),
            extruding,
            extrusion_rate: if extruding { 0.01 } else { 0.0 },
        }
    }

    #[test]
    fn one_segment_duration() {
        let path = Toolpath {
            segments: vec![seg([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], true)],
        };
        let traj = toolpath_to_trajectory(&path, &params(0.5)).unwrap();
        assert_relative_eq!(traj.duration(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn two_segments_sample_times() {
        let path = Toolpath {
            segments: vec![
                seg([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], true),
                seg([1.0, 0.0, 0.0], [1.0, 1.0, 0.0], false),
            ],
        };
        let traj = toolpath_to_trajectory(&path, &params(1.0)).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0]);
        assert!(traj.samples[0].extruding);
        assert!(!traj.samples[1].extruding);
    }

    #[test]
    fn zero_length_segments_dropped() {
        let path = Toolpath {
            segments: vec![
                seg([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], true),
                seg([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], true),
            ],
        };
        let traj = toolpath_to_trajectory(&path, &params(1.0)).unwrap();
        assert_eq!(traj.samples.len(), 2);
    }

    #[test]
    fn vertical_offset_at_zero_joint_angle() {
        let geom = ExtruderGeometry {
            arm_length: 0.3,
            joint_to_nozzle: 0.2,
            joint_angle: 0.0,
        };
        let traj = Trajectory {
            frame: Frame::EndEffector,
            samples: vec![TrajectorySample {
                time: 0.0,
                position: Point::new(1.0, 1.0, 0.0),
                yaw: 0.0,
                extruding: true,
            }],
        };
        let body = body_frame_transform(&traj, &geom).unwrap();
        let p = body.samples[0].position;
        assert_relative_eq!(p.x, 1.0);
        assert_relative_eq!(p.y, 1.0);
        assert_relative_eq!(p.z, 0.5);
    }

    #[test]
    fn zero_lengths_are_identity() {
        let geom = ExtruderGeometry {
            arm_length: 0.0,
            joint_to_nozzle: 0.0,
            joint_angle: 0.7,
        };
        let traj = Trajectory {
            frame: Frame::EndEffector,
            samples: vec![TrajectorySample {
                time: 0.0,
                position: Point::new(0.3, -0.2, 0.9),
                yaw: 1.1,
                extruding: false,
            }],
        };
        let body = body_frame_transform(&traj, &geom).unwrap();
        assert_relative_eq!(
            (body.samples[0].position - traj.samples[0].position).norm(),
            0.0
        );
    }

    #[test]
    fn rotated_joint_displaces_nozzle() {
        // theta = 90 deg, yaw 0, nozzle at origin: body at (-l_g, 0, l_ex)
        let geom = ExtruderGeometry {
            arm_length: 0.3,
            joint_to_nozzle: 0.2,
            joint_angle: std::f64::consts::FRAC_PI_2,
        };
        let traj = Trajectory {
            frame: Frame::EndEffector,
            samples: vec![TrajectorySample {
                time: 0.0,
                position: Point::new(0.0, 0.0, 0.0),
                yaw: 0.0,
                extruding: false,
            }],
        };
        let body = body_frame_transform(&traj, &geom).unwrap();
        let p = body.samples[0].position;
        assert_relative_eq!(p.x, -0.2, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.z, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn frame_round_trip() {
        let geom = ExtruderGeometry {
            arm_length: 0.31,
            joint_to_nozzle: 0.17,
            joint_angle: 0.4,
        };
        let traj = Trajectory {
            frame: Frame::EndEffector,
            samples: vec![TrajectorySample {
                time: 0.0,
                position: Point::new(0.2, -0.4, 0.7),
                yaw: 2.3,
                extruding: true,
            }],
        };
        let there = body_frame_transform(&traj, &geom).unwrap();
        let back = end_effector_frame(&there, &geom).unwrap();
        assert!((back.samples[0].position - traj.samples[0].position).norm() < 1e-12);
    }
}
