use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One sinusoidal component `amplitude · sin(frequency · x + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wave {
    pub frequency: Vector2<f64>,
    pub phase: f64,
    pub amplitude: f64,
}

/// Smooth procedural texture: `0.5 + Σ waves`. The amplitudes sum to at most
/// 0.45, so values stay in `[0.05, 0.95]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub waves: Vec<Wave>,
}

impl Texture {
    /// Random wave mix with wavelengths (scene units) in
    /// `[min_wavelength, max_wavelength]`.
    pub fn random(seed: u64, waves: usize, min_wavelength: f64, max_wavelength: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitude = 0.45 / waves.max(1) as f64;
        let waves = (0..waves)
            .map(|_| {
                let wavelength = rng.random_range(min_wavelength..=max_wavelength);
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                let k = 2.0 * std::f64::consts::PI / wavelength;
                Wave {
                    frequency: Vector2::new(k * angle.cos(), k * angle.sin()),
                    phase: rng.random_range(0.0..2.0 * std::f64::consts::PI),
                    amplitude,
                }
            })
            .collect();
        Self { waves }
    }

    /// Value and analytic gradient at plane coordinates `p`.
    #[inline]
    pub fn eval(&self, p: &Vector2<f64>) -> (f64, Vector2<f64>) {
        let mut v = 0.5;
        let mut g = Vector2::zeros();
        for w in &self.waves {
            let arg = w.frequency.dot(p) + w.phase;
            let (s, c) = arg.sin_cos();
            v += w.amplitude * s;
            g += w.frequency * (w.amplitude * c);
        }
        (v, g)
    }
}

/// A planar polygon with an orthonormal in-plane basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePatch {
    pub origin: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub basis_u: Vector3<f64>,
    pub basis_v: Vector3<f64>,
    /// Polygon vertices in `(basis_u, basis_v)` coordinates.
    pub polygon: Vec<Vector2<f64>>,
    /// Offset added to plane coordinates before texturing, so patches do not
    /// share texture phase.
    pub texture_offset: Vector2<f64>,
}

impl PlanePatch {
    pub fn new(origin: Vector3<f64>, normal: Vector3<f64>, polygon: Vec<Vector2<f64>>) -> Self {
        let normal = normal.normalize();
        let helper = if normal.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let basis_u = normal.cross(&helper).normalize();
        let basis_v = normal.cross(&basis_u);
        Self {
            origin,
            normal,
            basis_u,
            basis_v,
            polygon,
            texture_offset: Vector2::zeros(),
        }
    }

    /// Axis-aligned rectangle `[-half_u, half_u] × [-half_v, half_v]` in the
    /// patch basis, centered on `origin`.
    pub fn rectangle(origin: Vector3<f64>, normal: Vector3<f64>, half_u: f64, half_v: f64) -> Self {
        Self::new(
            origin,
            normal,
            vec![
                Vector2::new(-half_u, -half_v),
                Vector2::new(half_u, -half_v),
                Vector2::new(half_u, half_v),
                Vector2::new(-half_u, half_v),
            ],
        )
    }

    /// Unbounded plane (a huge rectangle).
    pub fn infinite(origin: Vector3<f64>, normal: Vector3<f64>) -> Self {
        Self::rectangle(origin, normal, 1e6, 1e6)
    }

    pub fn plane_coords(&self, x: &Vector3<f64>) -> Vector2<f64> {
        let d = x - self.origin;
        Vector2::new(self.basis_u.dot(&d), self.basis_v.dot(&d))
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        // even-odd rule
        let n = self.polygon.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.polygon[i], self.polygon[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Ray parameter; the camera z-depth when `dir` has unit z in the
    /// camera frame.
    pub depth: f64,
    pub patch: usize,
    /// Patch normal, oriented toward the ray origin.
    pub normal: Vector3<f64>,
    pub plane_coords: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneScene {
    pub patches: Vec<PlanePatch>,
    pub texture: Texture,
    /// Intensity where no patch is hit.
    pub background: f64,
}

impl PlaneScene {
    pub fn new(patches: Vec<PlanePatch>, texture: Texture) -> Self {
        let mut patches = patches;
        for (i, p) in patches.iter_mut().enumerate() {
            p.texture_offset = Vector2::new(3.7 * i as f64, 11.3 * i as f64);
        }
        Self {
            patches,
            texture,
            background: 0.5,
        }
    }

    /// Nearest positive intersection of `origin + t·dir` with a patch.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, p) in self.patches.iter().enumerate() {
            let den = p.normal.dot(dir);
            if den.abs() < 1e-12 {
                continue;
            }
            let t = p.normal.dot(&(p.origin - origin)) / den;
            if !(t > 1e-9) || best.is_some_and(|b| b.depth <= t) {
                continue;
            }
            let x = origin + dir * t;
            let uv = p.plane_coords(&x);
            if !p.contains(&uv) {
                continue;
            }
            let normal = if den > 0.0 { -p.normal } else { p.normal };
            best = Some(Hit {
                depth: t,
                patch: i,
                normal,
                plane_coords: uv,
            });
        }
        best
    }

    pub fn texture_at(&self, hit: &Hit) -> (f64, Vector2<f64>) {
        self.texture
            .eval(&(hit.plane_coords + self.patches[hit.patch].texture_offset))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fronto_parallel_hit() {
        let scene = PlaneScene::new(
            vec![PlanePatch::infinite(
                Vector3::new(0.0, 0.0, 2.0),
                Vector3::new(0.0, 0.0, -1.0),
            )],
            Texture::random(1, 3, 0.1, 0.3),
        );
        let hit = scene
            .intersect(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert!((hit.depth - 2.0).abs() < 1e-15);
        assert_eq!(hit.normal, Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn parallel_ray_misses() {
        let scene = PlaneScene::new(
            vec![PlanePatch::infinite(
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            )],
            Texture::random(1, 3, 0.1, 0.3),
        );
        assert!(scene
            .intersect(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0))
            .is_none());
    }

    #[test]
    fn nearer_patch_wins_and_bounds_apply() {
        let n = Vector3::new(0.0, 0.0, -1.0);
        let scene = PlaneScene::new(
            vec![
                PlanePatch::rectangle(Vector3::new(0.0, 0.0, 3.0), n, 1.0, 1.0),
                PlanePatch::rectangle(Vector3::new(0.0, 0.0, 1.5), n, 0.2, 0.2),
            ],
            Texture::random(1, 3, 0.1, 0.3),
        );
        let hit = scene
            .intersect(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert_eq!(hit.patch, 1);
        assert!((hit.depth - 1.5).abs() < 1e-15);
        // outside the small patch, the far one is seen
        let hit = scene
            .intersect(&Vector3::zeros(), &Vector3::new(0.2, 0.0, 1.0))
            .unwrap();
        assert_eq!(hit.patch, 0);
        // outside both
        assert!(scene
            .intersect(&Vector3::zeros(), &Vector3::new(0.5, 0.0, 1.0))
            .is_none());
    }

    #[test]
    fn texture_gradient_matches_finite_differences() {
        let tex = Texture::random(7, 5, 0.05, 0.4);
        let h = 1e-6;
        for p in [
            Vector2::new(0.1, 0.2),
            Vector2::new(-1.3, 2.7),
            Vector2::new(5.0, -0.01),
        ] {
            let (v, g) = tex.eval(&p);
            assert!((0.0..=1.0).contains(&v));
            let fx = (tex.eval(&(p + Vector2::new(h, 0.0))).0 - tex.eval(&(p - Vector2::new(h, 0.0))).0) / (2.0 * h);
            let fy = (tex.eval(&(p + Vector2::new(0.0, h))).0 - tex.eval(&(p - Vector2::new(0.0, h))).0) / (2.0 * h);
            let scale = g.norm().max(1.0);
            assert!((fx - g.x).abs() < 1e-6 * scale);
            assert!((fy - g.y).abs() < 1e-6 * scale);
        }
    }
}
