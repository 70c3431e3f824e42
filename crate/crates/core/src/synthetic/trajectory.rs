use thiserror::Error;

use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("timestamp {t} at index {index} does not increase")]
    NonMonotonic { index: usize, t: f64 },
    #[error("non-finite pose at index {0}")]
    NonFinite(usize),
}

/// Time-ordered `world_from_camera` poses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    entries: Vec<(f64, Pose)>,
}

impl Trajectory {
    pub fn new(entries: Vec<(f64, Pose)>) -> Result<Self, TrajectoryError> {
        for (i, (t, p)) in entries.iter().enumerate() {
            if !t.is_finite() || !p.is_finite() {
                return Err(TrajectoryError::NonFinite(i));
            }
            if i > 0 && !(*t > entries[i - 1].0) {
                return Err(TrajectoryError::NonMonotonic { index: i, t: *t });
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(f64, Pose)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &(f64, Pose)> {
        self.entries.iter()
    }
}
