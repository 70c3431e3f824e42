use std::fmt::Write as _;
use std::path::Path;

use image::{GrayImage as Luma8Image, RgbImage};
use nalgebra::{Vector2, Vector3};

use super::{read_text, write_bytes, DatasetError};
use crate::surfel::{Keyframe, RasterBuffers};

/// Writes a grayscale PFM (`Pf`, negative scale = little endian, rows
/// stored bottom to top).
pub fn write_pfm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<(), DatasetError> {
    assert_eq!(values.len(), width * height, "PFM data size");
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(values.len() * 4);
    for y in (0..height).rev() {
        for v in &values[y * width..(y + 1) * width] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    write_bytes(path, &out)
}

/// Reads a grayscale PFM into top-to-bottom row order.
pub fn read_pfm(path: &Path) -> Result<(usize, usize, Vec<f64>), DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    let bad = |line: usize, m: &str| DatasetError::parse(path, line, m);
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Option<String> {
        let start = *pos;
        let end = bytes[start..].iter().position(|&b| b == b'\n')? + start;
        *pos = end + 1;
        Some(String::from_utf8_lossy(&bytes[start..end]).trim().to_owned())
    };
    let magic = next_line(&mut pos).ok_or_else(|| bad(1, "truncated header"))?;
    if magic != "Pf" {
        return Err(bad(1, "not a grayscale PFM (expected `Pf`)"));
    }
    let dims = next_line(&mut pos).ok_or_else(|| bad(2, "truncated header"))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().ok())
        .collect::<Option<_>>()
        .filter(|d: &Vec<usize>| d.len() == 2)
        .ok_or_else(|| bad(2, "expected `width height`"))?;
    let scale: f64 = next_line(&mut pos)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(3, "expected scale"))?;
    let (w, h) = (dims[0], dims[1]);
    let body = &bytes[pos..];
    if body.len() != w * h * 4 {
        return Err(bad(3, "pixel data size does not match dimensions"));
    }
    let mut values = vec![0.0; w * h];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, col) = (i / w, i % w);
        values[(h - 1 - row) * w + col] = f64::from(v);
    }
    Ok((w, h, values))
}

/// Raw inverse depth; uncovered pixels hold 0.
pub fn write_depth_pfm(path: &Path, buffers: &RasterBuffers) -> Result<(), DatasetError> {
    let values: Vec<f64> = (0..buffers.inv_depth.len())
        .map(|i| if buffers.is_valid(i) { buffers.inv_depth[i] } else { 0.0 })
        .collect();
    write_pfm(path, buffers.width, buffers.height, &values)
}

/// 8-bit inverse depth, white = near. Covered pixels map linearly onto
/// `1..=255` between the image's minimum and maximum inverse depth, which
/// are written to a `.txt` sidecar next to `path`; uncovered pixels are 0.
pub fn write_depth_png(path: &Path, buffers: &RasterBuffers) -> Result<(), DatasetError> {
    let valid = || {
        (0..buffers.inv_depth.len())
            .filter(|&i| buffers.is_valid(i))
            .map(|i| buffers.inv_depth[i])
    };
    let lo = valid().fold(f64::INFINITY, f64::min);
    let hi = valid().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let raw: Vec<u8> = (0..buffers.inv_depth.len())
        .map(|i| {
            if !buffers.is_valid(i) {
                0
            } else if span > 0.0 {
                (1.0 + 254.0 * (buffers.inv_depth[i] - lo) / span).round() as u8
            } else {
                255
            }
        })
        .collect();
    let img = Luma8Image::from_raw(buffers.width as u32, buffers.height as u32, raw).expect("sized buffer");
    save(path, |p| img.save(p))?;
    let sidecar = if lo.is_finite() {
        format!("min_inv_depth {lo}\nmax_inv_depth {hi}\n")
    } else {
        "min_inv_depth none\nmax_inv_depth none\n".to_owned()
    };
    write_bytes(&path.with_extension("txt"), sidecar.as_bytes())
}

/// Normal map with `RGB = round(255 · (n + 1) / 2)` per axis; uncovered
/// pixels are black.
pub fn write_normal_png(
    path: &Path,
    buffers: &RasterBuffers,
    normals: &[Option<Vector3<f64>>],
) -> Result<(), DatasetError> {
    let mut raw = Vec::with_capacity(normals.len() * 3);
    for n in normals {
        match n {
            Some(n) => raw.extend(
                n.iter()
                    .map(|c| (255.0 * (c + 1.0) / 2.0).round().clamp(0.0, 255.0) as u8),
            ),
            None => raw.extend([0, 0, 0]),
        }
    }
    let img = RgbImage::from_raw(buffers.width as u32, buffers.height as u32, raw).expect("sized buffer");
    save(path, |p| img.save(p))
}

fn save(path: &Path, f: impl FnOnce(&Path) -> image::ImageResult<()>) -> Result<(), DatasetError> {
    f(path).map_err(|e| match e {
        image::ImageError::IoError(io) => DatasetError::io(path, io),
        other => DatasetError::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// A point of an exported cloud, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlyVertex {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub gray: u8,
}

/// ASCII PLY with one vertex per covered pixel: the pixel's ray scaled to
/// its rasterized depth and moved to world coordinates, the generating
/// surfel's normal, and the keyframe intensity.
pub fn write_ply(path: &Path, kf: &Keyframe, buffers: &RasterBuffers) -> Result<(), DatasetError> {
    let mut body = String::new();
    let mut count = 0usize;
    let luma = kf.image.to_luma8();
    for y in 0..buffers.height {
        for x in 0..buffers.width {
            let Some((id, s)) = buffers.get(x, y) else {
                continue;
            };
            let ray = kf.intrinsics.backproject_ray(&Vector2::new(x as f64, y as f64));
            let p = kf.pose.transform_point(&(ray / id));
            let n = kf.pose.rotate(&kf.surfels[s].normal);
            let g = luma[y * buffers.width + x];
            writeln!(body, "{} {} {} {} {} {} {g}", p.x, p.y, p.z, n.x, n.y, n.z).unwrap();
            count += 1;
        }
    }
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {count}\n\
         property double x\nproperty double y\nproperty double z\n\
         property double nx\nproperty double ny\nproperty double nz\n\
         property uchar gray\nend_header\n"
    );
    out.push_str(&body);
    write_bytes(path, out.as_bytes())
}

/// Reads back the vertices of a file written by [`write_ply`].
pub fn read_ply(path: &Path) -> Result<Vec<PlyVertex>, DatasetError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let mut count = None;
    for (i, line) in lines.by_ref() {
        if let Some(n) = line.strip_prefix("element vertex ") {
            count = Some(
                n.trim()
                    .parse::<usize>()
                    .map_err(|_| DatasetError::parse(path, i + 1, "bad vertex count"))?,
            );
        }
        if line == "end_header" {
            break;
        }
    }
    let count = count.ok_or_else(|| DatasetError::parse(path, 1, "missing vertex element"))?;
    let mut out = Vec::with_capacity(count);
    for (i, line) in lines.take(count) {
        let t: Vec<&str> = line.split_whitespace().collect();
        let f = |k: usize| -> Result<f64, DatasetError> {
            t.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| DatasetError::parse(path, i + 1, "malformed vertex"))
        };
        out.push(PlyVertex {
            position: Vector3::new(f(0)?, f(1)?, f(2)?),
            normal: Vector3::new(f(3)?, f(4)?, f(5)?),
            gray: t
                .get(6)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| DatasetError::parse(path, i + 1, "malformed vertex"))?,
        });
    }
    if out.len() != count {
        return Err(DatasetError::parse(
            path,
            text.lines().count(),
            "fewer vertices than declared",
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, GrayImage, Pose};
    use crate::surfel::{rasterize, Surfel, EMPTY};

    fn buffers(values: &[(f64, bool)], w: usize) -> RasterBuffers {
        let mut b = RasterBuffers::empty(w, values.len() / w);
        for (i, &(v, ok)) in values.iter().enumerate() {
            if ok {
                b.inv_depth[i] = v;
                b.surfel_index[i] = 0;
            }
        }
        b
    }

    #[test]
    fn pfm_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let values: Vec<f64> = (0..12).map(|i| f64::from(i as f32 * 0.37 - 1.0)).collect();
        write_pfm(&path, 4, 3, &values).unwrap();
        assert_eq!(read_pfm(&path).unwrap(), (4, 3, values));
        let b = buffers(&[(0.5, true); 6], 3);
        write_depth_pfm(&path, &b).unwrap();
        assert_eq!(read_pfm(&path).unwrap().2, vec![0.5; 6]);
    }

    #[test]
    fn pfm_layout_is_bottom_up_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        write_pfm(&path, 1, 2, &[1.0, 2.0]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut expect = b"Pf\n1 2\n-1.0\n".to_vec();
        expect.extend(2.0f32.to_le_bytes());
        expect.extend(1.0f32.to_le_bytes());
        assert_eq!(bytes, expect);
    }

    #[test]
    fn invalid_buffers_export_as_zero_and_black() {
        let dir = tempfile::tempdir().unwrap();
        let b = RasterBuffers::empty(3, 2);
        write_depth_pfm(&dir.path().join("d.pfm"), &b).unwrap();
        assert_eq!(read_pfm(&dir.path().join("d.pfm")).unwrap().2, vec![0.0; 6]);
        write_depth_png(&dir.path().join("d.png"), &b).unwrap();
        let img = image::open(dir.path().join("d.png")).unwrap().into_luma8();
        assert!(img.into_raw().iter().all(|&v| v == 0));
        write_normal_png(&dir.path().join("n.png"), &b, &b.normals(&[])).unwrap();
        let img = image::open(dir.path().join("n.png")).unwrap().into_rgb8();
        assert!(img.into_raw().iter().all(|&v| v == 0));
    }

    #[test]
    fn depth_png_is_white_near_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let b = buffers(&[(0.25, true), (0.5, true), (0.75, true), (0.0, false)], 4);
        write_depth_png(&path, &b).unwrap();
        let raw = image::open(&path).unwrap().into_luma8().into_raw();
        assert_eq!(raw, vec![1, 128, 255, 0]);
        let side = std::fs::read_to_string(dir.path().join("d.txt")).unwrap();
        assert_eq!(side, "min_inv_depth 0.25\nmax_inv_depth 0.75\n");
    }

    #[test]
    fn fronto_normals_are_uniform_128_128_0() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.png");
        let b = buffers(&[(1.0, true); 4], 2);
        write_normal_png(&path, &b, &[Some(Vector3::new(0.0, 0.0, -1.0)); 4]).unwrap();
        let raw = image::open(&path).unwrap().into_rgb8().into_raw();
        assert!(raw.chunks(3).all(|c| c == [128, 128, 0]));
    }

    #[test]
    fn ply_single_vertex_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let k = CameraIntrinsics::new(100.0, 100.0, 2.0, 2.0, 5, 5).unwrap();
        let mut kf = Keyframe::new(GrayImage::filled(5, 5, 1.0), Pose::identity(), k, 0.0, 1.0, 2);
        let b = rasterize(&kf);
        write_ply(&path, &kf, &b).unwrap();
        assert!(read_ply(&path).unwrap().is_empty());
        assert!(std::fs::read_to_string(&path).unwrap().contains("element vertex 0\n"));

        kf.append_surfels(vec![Surfel::new(
            0,
            Vector3::new(0.0, 0.0, 1.0),
            0.5,
            Vector3::new(0.0, 0.0, -1.0),
            0.5,
            0,
        )]);
        let b = rasterize(&kf);
        assert_eq!(b.surfel_index.iter().filter(|&&s| s != EMPTY).count(), 1);
        write_ply(&path, &kf, &b).unwrap();
        let v = read_ply(&path).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].position, Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(v[0].normal, Vector3::new(0.0, 0.0, -1.0));
        assert_eq!(v[0].gray, 255);
    }
}
