use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::compose::{AssetPool, AssetRecord, SceneAnnotation};
use crate::error::{Error, Result};
use crate::mesh::save_obj;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub assets: Vec<AssetRecord>,
    pub scenes: Vec<SceneAnnotation>,
}

impl Manifest {
    pub fn new(seed: u64, assets: Vec<AssetRecord>, scenes: Vec<SceneAnnotation>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            seed,
            assets,
            scenes,
        }
    }

    pub fn scene(&self, id: &str) -> Result<&SceneAnnotation> {
        self.scenes
            .iter()
            .find(|s| s.scene_id == id)
            .ok_or_else(|| Error::UnknownScene(id.to_string()))
    }
}

/// Writes pretty JSON to a sibling temporary file and renames it into place,
/// so readers never observe a partial manifest.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("json.tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        serde_json::to_writer_pretty(&mut w, manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let m: Manifest = serde_json::from_reader(BufReader::new(fs::File::open(path)?))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::InvalidArgument(format!(
            "manifest version {} is not supported (expected {MANIFEST_VERSION})",
            m.version
        )));
    }
    Ok(m)
}

/// Saves every asset mesh under `root` at its `mesh_path`.
pub fn export_assets(pool: &AssetPool, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    for a in pool.all() {
        let p = root.join(&a.mesh_path);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        save_obj(&a.mesh, p)?;
    }
    Ok(())
}
