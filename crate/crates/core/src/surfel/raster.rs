use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::{Keyframe, Surfel};
use crate::geometry::CameraIntrinsics;

/// Sentinel for pixels covered by no surfel.
pub const EMPTY: u32 = u32::MAX;

/// Inverse depths closer than this are a tie; the lower surfel id wins.
pub const DEPTH_TIE_EPS: f64 = 1e-12;

/// Per-pixel inverse depth and generating surfel, as produced by the depth
/// test. `surfel_index` refers to positions in the rasterized surfel slice.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterBuffers {
    pub width: usize,
    pub height: usize,
    pub inv_depth: Vec<f64>,
    pub surfel_index: Vec<u32>,
}

impl RasterBuffers {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            inv_depth: vec![0.0; width * height],
            surfel_index: vec![EMPTY; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<(f64, usize)> {
        let i = y * self.width + x;
        match self.surfel_index[i] {
            EMPTY => None,
            s => Some((self.inv_depth[i], s as usize)),
        }
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.surfel_index[i] != EMPTY
    }

    pub fn valid_count(&self) -> usize {
        self.surfel_index.iter().filter(|&&s| s != EMPTY).count()
    }

    /// Per-pixel normal of the generating surfel.
    pub fn normals(&self, surfels: &[Surfel]) -> Vec<Option<Vector3<f64>>> {
        self.surfel_index
            .iter()
            .map(|&s| (s != EMPTY).then(|| surfels[s as usize].normal))
            .collect()
    }
}

/// Depth-test rule: nearer (larger inverse depth) wins; near-ties go to the
/// lower surfel id.
#[inline]
fn beats(cand: f64, cand_id: u64, cur: f64, cur_id: u64) -> bool {
    if cand > cur + DEPTH_TIE_EPS {
        true
    } else if (cand - cur).abs() <= DEPTH_TIE_EPS {
        cand_id < cur_id
    } else {
        false
    }
}

pub fn rasterize(kf: &Keyframe) -> RasterBuffers {
    rasterize_surfels(&kf.surfels, &kf.intrinsics)
}

/// Splats every surfel over the pixels within its screen radius, keeping the
/// nearest plane per pixel. Rows are processed independently, and within a
/// row candidates are visited in slice order, so the result does not depend
/// on the thread count.
pub fn rasterize_surfels(surfels: &[Surfel], k: &CameraIntrinsics) -> RasterBuffers {
    let (w, h) = (k.width, k.height);
    let mut out = RasterBuffers::empty(w, h);

    let centers: Vec<Vector2<f64>> = surfels.iter().map(|s| s.center_pixel(k)).collect();
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); h];
    for (i, (s, c)) in surfels.iter().zip(&centers).enumerate() {
        let r = s.radius_px;
        if !(c.x.is_finite() && c.y.is_finite()) {
            continue;
        }
        let y0 = (c.y - r).ceil().max(0.0);
        let y1 = (c.y + r).floor().min(h as f64 - 1.0);
        if y1 < y0 {
            continue;
        }
        for row in rows.iter_mut().take(y1 as usize + 1).skip(y0 as usize) {
            row.push(i as u32);
        }
    }

    out.inv_depth
        .par_chunks_mut(w)
        .zip(out.surfel_index.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (depth_row, index_row))| {
            let yf = y as f64;
            for &i in &rows[y] {
                let s = &surfels[i as usize];
                let c = centers[i as usize];
                let r = s.radius_px;
                let x0 = (c.x - r).ceil().max(0.0);
                let x1 = (c.x + r).floor().min(w as f64 - 1.0);
                if x1 < x0 {
                    continue;
                }
                for x in x0 as usize..=x1 as usize {
                    let u = Vector2::new(x as f64, yf);
                    if (c - u).norm() >= r {
                        continue;
                    }
                    let Ok(id) = s.inverse_depth_along(&k.backproject_ray(&u)) else {
                        continue;
                    };
                    let cur = index_row[x];
                    if cur == EMPTY || beats(id, s.id, depth_row[x], surfels[cur as usize].id) {
                        depth_row[x] = id;
                        index_row[x] = i;
                    }
                }
            }
        });
    out
}

/// Linear pixel indices won by each surfel, in row-major order.
pub fn footprints(buffers: &RasterBuffers, surfel_count: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); surfel_count];
    for (i, &s) in buffers.surfel_index.iter().enumerate() {
        if s != EMPTY {
            out[s as usize].push(i as u32);
        }
    }
    out
}
