//! Point cloud files, transform files and CSV exports.

mod ply;
mod transform;
mod xyz;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use ply::{encode_ply, parse_ply, read_ply, write_ply, PlyData, PlyEncoding};
pub use transform::{format_transform, parse_matrix, parse_transform, read_transform, write_transform};
pub use xyz::{encode_xyz, parse_xyz, read_xyz, write_xyz};

use crate::error::{Error, Result};
use crate::features::{DescriptorSet, KeypointSet, NormalSet};
use crate::geom::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    XyzText,
}

impl CloudFormat {
    /// Format implied by a file extension, for writing.
    pub fn from_extension(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ply" => Some(CloudFormat::PlyBinaryLe),
            "xyz" | "txt" | "pts" => Some(CloudFormat::XyzText),
            _ => None,
        }
    }
}

/// A cloud together with where it came from.
#[derive(Debug, Clone)]
pub struct CloudFile {
    pub path: PathBuf,
    pub format: CloudFormat,
    pub cloud: PointCloud,
}

impl CloudFile {
    pub fn point_count(&self) -> usize {
        self.cloud.len()
    }
}

/// Reads a PLY or xyz file. PLY is recognized by its magic line regardless of
/// extension; anything else must carry an xyz-like extension.
pub fn read_cloud_file(path: &Path) -> Result<CloudFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
        let data = parse_ply(&bytes, path)?;
        let format = match data.encoding {
            PlyEncoding::Ascii => CloudFormat::PlyAscii,
            PlyEncoding::BinaryLittleEndian => CloudFormat::PlyBinaryLe,
        };
        return Ok(CloudFile { path: path.to_path_buf(), format, cloud: data.cloud });
    }
    match CloudFormat::from_extension(path) {
        Some(CloudFormat::XyzText) => {
            let text = String::from_utf8(bytes).map_err(|_| Error::UnknownFormat {
                path: path.to_path_buf(),
                reason: "xyz file is not valid UTF-8".into(),
            })?;
            Ok(CloudFile { path: path.to_path_buf(), format: CloudFormat::XyzText, cloud: parse_xyz(&text, path)? })
        }
        Some(_) => Err(Error::UnknownFormat {
            path: path.to_path_buf(),
            reason: "file has a .ply extension but no 'ply' magic line".into(),
        }),
        None => Err(Error::UnknownFormat {
            path: path.to_path_buf(),
            reason: "expected a PLY file or a .xyz/.txt/.pts text file".into(),
        }),
    }
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    read_cloud_file(path).map(|f| f.cloud)
}

pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    match format {
        CloudFormat::PlyAscii => write_ply(cloud, path, PlyEncoding::Ascii),
        CloudFormat::PlyBinaryLe => write_ply(cloud, path, PlyEncoding::BinaryLittleEndian),
        CloudFormat::XyzText => write_xyz(cloud, path),
    }
}

/// `index,nx,ny,nz,variation,valid` per point.
pub fn normals_csv(normals: &NormalSet) -> String {
    let mut out = String::from("index,nx,ny,nz,variation,valid\n");
    for (i, n) in normals.normals.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{},{}", n.x, n.y, n.z, normals.variation[i], normals.valid[i] as u8);
    }
    out
}

/// `index,f0..f32` per point.
pub fn fpfh_csv(descriptors: &DescriptorSet) -> String {
    let mut out = String::from("index");
    for j in 0..crate::features::DESCRIPTOR_DIM {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (i, d) in descriptors.descriptors.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in d.as_slice() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// `index,x,y,z` per keypoint.
pub fn keypoints_csv(cloud: &PointCloud, keypoints: &KeypointSet) -> String {
    let mut out = String::from("index,x,y,z\n");
    for &i in &keypoints.indices {
        let p = cloud[i];
        let _ = writeln!(out, "{i},{},{},{}", p.x, p.y, p.z);
    }
    out
}

/// Writes `text` to `path`, mapping failures to [`Error::Io`].
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
