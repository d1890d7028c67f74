//! Output writer that can undo everything it created.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use or_graph_kit::geometry::PointCloud;
use or_graph_kit::io::docs::{to_json, Document};
use or_graph_kit::io::write_ply;

use crate::Internal;

pub struct OutputSink {
    root: PathBuf,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl OutputSink {
    pub fn new(root: &Path) -> Self {
        OutputSink { root: root.to_path_buf(), files: Vec::new(), dirs: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn create_dirs(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        for d in missing.into_iter().rev() {
            fs::create_dir(&d).map_err(|e| Internal(format!("cannot create {}: {e}", d.display())))?;
            self.dirs.push(d);
        }
        Ok(())
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            self.create_dirs(parent)?;
        }
        self.files.push(path.clone());
        fs::write(&path, bytes).map_err(|e| Internal(format!("cannot write {}: {e}", path.display())))?;
        log::debug!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_doc<T: Document>(&mut self, rel: &str, doc: &T) -> Result<()> {
        self.write_bytes(rel, to_json(doc).as_bytes())
    }

    pub fn write_ply(&mut self, rel: &str, cloud: &PointCloud) -> Result<()> {
        let mut bytes = Vec::new();
        write_ply(&mut bytes, cloud).context("encoding point cloud")?;
        self.write_bytes(rel, &bytes)
    }

    /// Removes every file and directory this sink created.
    pub fn rollback(self) {
        for f in self.files.iter().rev() {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}
