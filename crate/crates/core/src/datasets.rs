//! Named evaluation datasets.
//!
//! `bunny` is a 10 000-point sample of the Stanford bunny compiled into the
//! library. `dragon` and `armadillo` are looked up as `<name>.ply` in the
//! directory named by `CFREG_DATA_DIR`. Anything else is treated as a path.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::io::{parse_ply, read_cloud};

pub const DATA_DIR_VAR: &str = "CFREG_DATA_DIR";

const BUNNY_PLY: &[u8] = include_bytes!("../data/bunny.ply");
const STANFORD_URL: &str = "https://graphics.stanford.edu/data/3Dscanrep/";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dataset {
    Bunny,
    Dragon,
    Armadillo,
    File(PathBuf),
}

impl Dataset {
    pub fn parse(id: &str) -> Self {
        match id {
            "bunny" => Dataset::Bunny,
            "dragon" => Dataset::Dragon,
            "armadillo" => Dataset::Armadillo,
            other => Dataset::File(PathBuf::from(other)),
        }
    }

    /// Short name used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Dataset::Bunny => "bunny".into(),
            Dataset::Dragon => "dragon".into(),
            Dataset::Armadillo => "armadillo".into(),
            Dataset::File(p) => {
                p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
            }
        }
    }

    pub fn load(&self) -> Result<PointCloud> {
        match self {
            Dataset::Bunny => bunny(),
            Dataset::Dragon | Dataset::Armadillo => {
                let name = self.label();
                let dir = std::env::var_os(DATA_DIR_VAR).map(PathBuf::from);
                let path = dir.unwrap_or_else(|| PathBuf::from(".")).join(format!("{name}.ply"));
                if !path.is_file() {
                    return Err(Error::DatasetMissing {
                        name: name.clone(),
                        hint: format!(
                            "download the {name} scan from {STANFORD_URL}, convert one range scan to \
                             {name}.ply and set {DATA_DIR_VAR} to its directory"
                        ),
                        path,
                    });
                }
                read_cloud(&path)
            }
            Dataset::File(p) => read_cloud(p),
        }
    }
}

pub fn bunny() -> Result<PointCloud> {
    Ok(parse_ply(BUNNY_PLY, Path::new("<embedded bunny.ply>"))?.cloud)
}
