use std::fmt::Write as _;
use std::path::Path;

use super::{content_lines, read_text, write_bytes, DatasetError};
use crate::geometry::Pose;
use crate::synthetic::Trajectory;

const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

/// Reads a TUM trajectory: `timestamp tx ty tz qx qy qz qw` per line, giving
/// `world_from_camera` poses.
pub fn load_trajectory(path: &Path) -> Result<Trajectory, DatasetError> {
    parse_trajectory(&read_text(path)?, path)
}

/// Parses TUM trajectory text; `path` only labels errors.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory, DatasetError> {
    let mut entries: Vec<(f64, Pose)> = Vec::new();
    let mut last_line = 0;
    for (line, content) in content_lines(text) {
        let v: Vec<f64> = content
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| DatasetError::parse(path, line, "non-numeric field"))?;
        if v.len() != 8 {
            return Err(DatasetError::parse(
                path,
                line,
                format!("expected 8 fields (timestamp tx ty tz qx qy qz qw), found {}", v.len()),
            ));
        }
        let q = [v[4], v[5], v[6], v[7]];
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(DatasetError::parse(
                path,
                line,
                format!("quaternion norm {norm} deviates from 1 by more than {QUATERNION_NORM_TOLERANCE}"),
            ));
        }
        if let Some((t_prev, _)) = entries.last() {
            if !(v[0] > *t_prev) {
                return Err(DatasetError::parse(
                    path,
                    line,
                    format!(
                        "timestamp {} does not increase (previous {} on line {last_line})",
                        v[0], t_prev
                    ),
                ));
            }
        }
        let q = q.map(|c| c / norm);
        entries.push((v[0], Pose::from_quaternion([v[1], v[2], v[3]], q)));
        last_line = line;
    }
    Trajectory::new(entries).map_err(|e| DatasetError::Invalid(format!("{}: {e}", path.display())))
}

/// TUM text for `trajectory`; `timestamps` optionally overrides how each
/// timestamp is printed, so that file names and trajectory lines match.
pub fn format_trajectory(trajectory: &Trajectory, timestamps: Option<&[String]>) -> String {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (i, (t, p)) in trajectory.iter().enumerate() {
        let q = p.quaternion();
        let tp = p.translation;
        match timestamps {
            Some(ts) => out.push_str(&ts[i]),
            None => write!(out, "{t}").unwrap(),
        }
        writeln!(out, " {} {} {} {} {} {} {}", tp.x, tp.y, tp.z, q[0], q[1], q[2], q[3]).unwrap();
    }
    out
}

pub fn write_trajectory(path: &Path, trajectory: &Trajectory) -> Result<(), DatasetError> {
    write_bytes(path, format_trajectory(trajectory, None).as_bytes())
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;

    fn parse(text: &str) -> Result<Trajectory, DatasetError> {
        parse_trajectory(text, Path::new("traj.txt"))
    }

    #[test]
    fn identity_line() {
        let t = parse("0.0 0 0 0 0 0 0 1\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.entries()[0].0, 0.0);
        assert!(t.entries()[0].1.approx_eq(&Pose::identity(), 0.0));
    }

    #[test]
    fn slightly_off_quaternion_is_renormalized() {
        let t = parse("# comment\n\n1.5 1 2 3 0 0 0 1.0005\n").unwrap();
        let (ts, p) = t.entries()[0];
        assert_eq!(ts, 1.5);
        assert!(p.approx_eq(&Pose::from_translation(Vector3::new(1.0, 2.0, 3.0)), 1e-15));
        let e = parse("0 0 0 0 0 0 0 1.002").unwrap_err().to_string();
        assert!(e.contains("quaternion norm"), "{e}");
    }

    #[test]
    fn shuffled_timestamps_name_the_line() {
        let e = parse("0 0 0 0 0 0 0 1\n2 0 0 0 0 0 0 1\n# x\n1 0 0 0 0 0 0 1\n")
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("traj.txt:4:"), "{e}");
        assert!(e.contains("does not increase"), "{e}");
        assert!(parse("0 0 0 0 0 0 1")
            .unwrap_err()
            .to_string()
            .contains("expected 8 fields"));
        assert!(parse("0 0 0 0 0 0 x 1").is_err());
    }

    #[test]
    fn round_trip() {
        let poses: Vec<(f64, Pose)> = (0..5)
            .map(|i| {
                let a = i as f64 * 0.3;
                (
                    i as f64 / 30.0,
                    Pose::from_axis_angle(Vector3::new(a, -0.5 * a, 0.2), Vector3::new(a, 1.0, -a)),
                )
            })
            .collect();
        let traj = Trajectory::new(poses).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.txt");
        write_trajectory(&path, &traj).unwrap();
        let back = load_trajectory(&path).unwrap();
        for ((t0, p0), (t1, p1)) in traj.iter().zip(back.iter()) {
            assert_eq!(t0, t1);
            assert!(p0.approx_eq(p1, 1e-12));
        }
    }
}
