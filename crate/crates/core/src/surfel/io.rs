//! Text serialization of a keyframe's surfels.
//!
//! ```text
//! tx ty tz qx qy qz qw fx fy cx cy width height radius_px
//! id ray_x ray_y inv_depth n_x n_y n_z radius_px last_residual last_seen
//! ...
//! ```
//!
//! The header carries `world_from_keyframe` and the intrinsics; `ray_z` is
//! implicitly 1. Floats use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use nalgebra::Vector3;

use super::Surfel;
use crate::geometry::{CameraIntrinsics, Pose};

#[derive(Debug, Clone, PartialEq)]
pub struct SurfelMapHeader {
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub radius_px: f64,
}

pub fn write_surfel_map<W: Write>(mut out: W, header: &SurfelMapHeader, surfels: &[Surfel]) -> io::Result<()> {
    let t = header.pose.translation;
    let q = header.pose.quaternion();
    let k = &header.intrinsics;
    writeln!(
        out,
        "{} {} {} {} {} {} {} {} {} {} {} {} {} {}",
        t.x, t.y, t.z, q[0], q[1], q[2], q[3], k.fx, k.fy, k.cx, k.cy, k.width, k.height, header.radius_px
    )?;
    let mut line = String::new();
    for s in surfels {
        line.clear();
        let _ = write!(
            line,
            "{} {} {} {} {} {} {} {} {} {}",
            s.id,
            s.ray.x,
            s.ray.y,
            s.inv_depth,
            s.normal.x,
            s.normal.y,
            s.normal.z,
            s.radius_px,
            s.last_residual,
            s.last_seen
        );
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn invalid(line: usize, msg: impl Into<String>) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("surfel map line {line}: {}", msg.into()),
    )
}

fn fields<T: std::str::FromStr>(line_no: usize, line: &str, n: usize) -> io::Result<Vec<T>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != n {
        return Err(invalid(line_no, format!("expected {n} fields, found {}", parts.len())));
    }
    parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.parse::<T>()
                .map_err(|_| invalid(line_no, format!("field {} ({p:?}) is not a number", i + 1)))
        })
        .collect()
}

pub fn read_surfel_map<R: BufRead>(input: R) -> io::Result<(SurfelMapHeader, Vec<Surfel>)> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| invalid(1, "missing header"))?;
    let h: Vec<f64> = fields(1, &first?, 14)?;
    let intrinsics = CameraIntrinsics::new(h[7], h[8], h[9], h[10], h[11] as usize, h[12] as usize)
        .map_err(|e| invalid(1, e.to_string()))?;
    let header = SurfelMapHeader {
        pose: Pose::from_quaternion([h[0], h[1], h[2]], [h[3], h[4], h[5], h[6]]),
        intrinsics,
        radius_px: h[13],
    };
    let mut surfels = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 10 {
            return Err(invalid(i + 1, format!("expected 10 fields, found {}", parts.len())));
        }
        let id: u64 = parts[0].parse().map_err(|_| invalid(i + 1, "bad id"))?;
        let last_seen: u64 = parts[9].parse().map_err(|_| invalid(i + 1, "bad last_seen"))?;
        let v: Vec<f64> = fields(i + 1, &parts[1..9].join(" "), 8)?;
        surfels.push(Surfel {
            id,
            ray: Vector3::new(v[0], v[1], 1.0),
            inv_depth: v[2],
            normal: Vector3::new(v[3], v[4], v[5]),
            radius_px: v[6],
            last_residual: v[7],
            last_seen,
        });
    }
    Ok((header, surfels))
}
