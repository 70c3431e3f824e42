use std::path::Path;

use super::{content_lines, read_text, write_bytes, DatasetError};
use crate::geometry::CameraIntrinsics;

const FIELDS: [&str; 6] = ["fx", "fy", "cx", "cy", "width", "height"];

/// Reads a pinhole calibration `fx fy cx cy width height`.
pub fn load_calibration(path: &Path) -> Result<CameraIntrinsics, DatasetError> {
    parse_calibration(&read_text(path)?, path)
}

/// Parses calibration text; `path` only labels errors.
pub fn parse_calibration(text: &str, path: &Path) -> Result<CameraIntrinsics, DatasetError> {
    let mut lines = content_lines(text);
    let Some((line, content)) = lines.next() else {
        return Err(DatasetError::parse(path, 1, "empty calibration file"));
    };
    if let Some((extra, _)) = lines.next() {
        return Err(DatasetError::parse(
            path,
            extra,
            "unexpected second line (distortion coefficients are not supported; rectify the images first)",
        ));
    }
    let tokens: Vec<&str> = content.split_whitespace().collect();
    if tokens.len() > 6 {
        return Err(DatasetError::parse(
            path,
            line,
            format!(
                "expected 6 fields, found {} (distortion coefficients are not supported; rectify the images first)",
                tokens.len()
            ),
        ));
    }
    if tokens.len() < 6 {
        return Err(DatasetError::parse(
            path,
            line,
            format!("expected 6 fields (fx fy cx cy width height), found {}", tokens.len()),
        ));
    }
    let mut v = [0.0; 6];
    for (i, tok) in tokens.iter().enumerate() {
        v[i] =
            tok.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                DatasetError::parse(path, line, format!("field {} ({tok:?}) is not a number", FIELDS[i]))
            })?;
    }
    for i in [0, 1] {
        if v[i] <= 0.0 {
            return Err(DatasetError::parse(
                path,
                line,
                format!("field {} must be positive", FIELDS[i]),
            ));
        }
    }
    for i in [4, 5] {
        if v[i] < 1.0 || v[i].fract() != 0.0 {
            return Err(DatasetError::parse(
                path,
                line,
                format!("field {} must be a positive integer", FIELDS[i]),
            ));
        }
    }
    CameraIntrinsics::new(v[0], v[1], v[2], v[3], v[4] as usize, v[5] as usize)
        .map_err(|e| DatasetError::parse(path, line, e.to_string()))
}

pub fn write_calibration(path: &Path, k: &CameraIntrinsics) -> Result<(), DatasetError> {
    let text = format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height);
    write_bytes(path, text.as_bytes())
}
