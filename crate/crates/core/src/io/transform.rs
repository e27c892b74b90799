//! Text format for rigid transforms: four lines of four numbers, the row-major
//! 4×4 homogeneous matrix. Values are printed with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::geom::{RigidTransform, ROTATION_CHECK_TOL};

pub fn format_transform(t: &RigidTransform) -> String {
    let h = t.to_homogeneous();
    let mut out = String::new();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| format!("{:.16e}", h[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Matrix4<f64>> {
    let mut values = Vec::with_capacity(16);
    let mut last_line = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        last_line = i + 1;
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| Error::MalformedBody {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("'{tok}' is not a number"),
            })?);
        }
    }
    if values.len() != 16 {
        return Err(Error::MalformedBody {
            path: path.to_path_buf(),
            line: last_line,
            message: format!("expected 16 matrix entries, found {}", values.len()),
        });
    }
    Ok(Matrix4::from_row_slice(&values))
}

pub fn parse_transform(text: &str, path: &Path) -> Result<RigidTransform> {
    RigidTransform::from_homogeneous(&parse_matrix(text, path)?, ROTATION_CHECK_TOL)
}

pub fn write_transform(t: &RigidTransform, path: &Path) -> Result<()> {
    std::fs::write(path, format_transform(t)).map_err(|e| Error::io(path, e))
}

pub fn read_transform(path: &Path) -> Result<RigidTransform> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_transform(&text, path)
}
