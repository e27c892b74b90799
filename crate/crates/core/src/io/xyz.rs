//! Whitespace-separated `x y z` text, one point per line.
//!
//! Blank lines and lines starting with `#` are skipped. Columns after the
//! third are ignored; commas are accepted as separators.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text, path)
}

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut values = [0.0; 3];
        let mut tokens = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty());
        for v in &mut values {
            let tok = tokens.next().ok_or_else(|| Error::MalformedBody {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected three coordinates".into(),
            })?;
            *v = tok.parse().map_err(|_| Error::MalformedBody {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("'{tok}' is not a number"),
            })?;
        }
        points.push(Point3::new(values[0], values[1], values[2]));
    }
    PointCloud::new(points)
}

pub fn encode_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 72);
    for p in cloud.iter() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    out
}

pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    std::fs::write(path, encode_xyz(cloud)).map_err(|e| Error::io(path, e))
}
