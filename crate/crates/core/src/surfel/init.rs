use nalgebra::{Vector2, Vector3};

use super::{Keyframe, RasterBuffers, Surfel, EMPTY, INV_DEPTH_MAX, INV_DEPTH_MIN};

/// Parameters of neighbour-based surfel creation. Distances are in units of
/// the keyframe's surfel radius.
#[derive(Debug, Clone, PartialEq)]
pub struct InitParams {
    /// A new surfel needs every covered pixel to be farther than `alpha · r`.
    pub alpha: f64,
    /// Surfels with a covered pixel closer than `beta · r` are neighbours.
    pub beta: f64,
    /// Used when a site has no neighbour at all.
    pub bootstrap_inv_depth: f64,
    pub bootstrap_normal: Vector3<f64>,
    /// Cap on the total surfel count of a keyframe.
    pub max_surfels: usize,
}

impl Default for InitParams {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta: 2.5,
            bootstrap_inv_depth: 1.0,
            bootstrap_normal: Vector3::new(0.0, 0.0, -1.0),
            max_surfels: 16384,
        }
    }
}

/// Places new surfels on empty regions of `buffers` (which must come from
/// rasterizing `kf`). Each one takes the mean plane-induced inverse depth and
/// the mean normal of its neighbours.
///
/// Candidate sites are scanned row-major with a stride of `⌈alpha · r⌉`, and
/// every accepted surfel is splatted into a working copy of the buffers, so
/// it masks later sites and serves as a neighbour for them.
pub fn initialize_surfels(kf: &Keyframe, buffers: &RasterBuffers, params: &InitParams) -> Vec<Surfel> {
    let k = &kf.intrinsics;
    let (w, h) = (buffers.width, buffers.height);
    let r = kf.radius_px;
    let isolation = params.alpha * r;
    let reach = params.beta * r;
    let stride = (isolation.ceil() as usize).max(1);
    let start = stride / 2;

    let mut index = buffers.surfel_index.clone();
    let old = kf.surfels.len();
    let mut created: Vec<Surfel> = Vec::new();
    let mut next_id = kf.next_surfel_id();
    let lookup = |i: u32, created: &[Surfel]| -> Surfel {
        let i = i as usize;
        if i < old {
            kf.surfels[i].clone()
        } else {
            created[i - old].clone()
        }
    };

    let iso_r = isolation.floor() as isize;
    let reach_r = reach.ceil() as isize;
    let mut neighbours: Vec<u32> = Vec::new();

    for y in (start..h).step_by(stride) {
        for x in (start..w).step_by(stride) {
            if old + created.len() >= params.max_surfels {
                return created;
            }
            if index[y * w + x] != EMPTY {
                continue;
            }
            if has_covered_pixel_within(&index, w, h, x, y, iso_r, isolation) {
                continue;
            }

            neighbours.clear();
            for dy in -reach_r..=reach_r {
                for dx in -reach_r..=reach_r {
                    let (px, py) = (x as isize + dx, y as isize + dy);
                    if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                        continue;
                    }
                    if ((dx * dx + dy * dy) as f64).sqrt() >= reach {
                        continue;
                    }
                    let s = index[py as usize * w + px as usize];
                    if s != EMPTY {
                        neighbours.push(s);
                    }
                }
            }
            neighbours.sort_unstable();
            neighbours.dedup();

            let u = Vector2::new(x as f64, y as f64);
            let ray = k.backproject_ray(&u);
            let (inv_depth, normal) = if neighbours.is_empty() {
                (params.bootstrap_inv_depth, params.bootstrap_normal)
            } else {
                let mut id_sum = 0.0;
                let mut id_n = 0usize;
                let mut n_sum = Vector3::zeros();
                for &nb in &neighbours {
                    let s = lookup(nb, &created);
                    if let Ok(id) = s.inverse_depth_along(&ray) {
                        id_sum += id;
                        id_n += 1;
                    }
                    n_sum += s.normal;
                }
                let id = if id_n > 0 {
                    id_sum / id_n as f64
                } else {
                    params.bootstrap_inv_depth
                };
                (id, mean_normal(n_sum, params.bootstrap_normal))
            };
            let surfel = Surfel::new(
                next_id,
                ray,
                inv_depth.clamp(INV_DEPTH_MIN, INV_DEPTH_MAX),
                normal,
                r,
                kf.frame_count,
            );
            next_id += 1;

            stamp(&mut index, k, &surfel, (old + created.len()) as u32);
            created.push(surfel);
        }
    }
    created
}

/// Direction of a sum of unit normals, or `fallback` when they cancel out.
fn mean_normal(sum: Vector3<f64>, fallback: Vector3<f64>) -> Vector3<f64> {
    if sum.norm() < 1e-6 {
        fallback
    } else {
        sum.normalize()
    }
}

fn has_covered_pixel_within(index: &[u32], w: usize, h: usize, x: usize, y: usize, radius: isize, dist: f64) -> bool {
    for dy in -radius..=radius {
        let py = y as isize + dy;
        if py < 0 || py >= h as isize {
            continue;
        }
        for dx in -radius..=radius {
            let px = x as isize + dx;
            if px < 0 || px >= w as isize {
                continue;
            }
            if ((dx * dx + dy * dy) as f64).sqrt() > dist {
                continue;
            }
            if index[py as usize * w + px as usize] != EMPTY {
                return true;
            }
        }
    }
    false
}

/// Marks the empty pixels of a new surfel's footprint.
fn stamp(index: &mut [u32], k: &crate::geometry::CameraIntrinsics, s: &Surfel, slot: u32) {
    let c = s.center_pixel(k);
    let r = s.radius_px;
    let (w, h) = (k.width, k.height);
    let y0 = (c.y - r).ceil().max(0.0) as usize;
    let y1 = (c.y + r).floor().min(h as f64 - 1.0) as usize;
    let x0 = (c.x - r).ceil().max(0.0) as usize;
    let x1 = (c.x + r).floor().min(w as f64 - 1.0) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let u = Vector2::new(x as f64, y as f64);
            if (c - u).norm() >= r || index[y * w + x] != EMPTY {
                continue;
            }
            if s.inverse_depth_along(&k.backproject_ray(&u)).is_ok() {
                index[y * w + x] = slot;
            }
        }
    }
}
