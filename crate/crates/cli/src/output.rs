//! Result directories: `summary.json`, `data.csv`, `mesh.json`, `extremal.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use tracehole::Mesh;

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path, run_id: &str) -> Result<RunDir> {
        let path = root.join(run_id);
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(RunDir { path })
    }

    pub fn summary<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.path.join("summary.json"), text + "\n")?;
        Ok(())
    }

    pub fn data<R: Serialize>(&self, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path.join("data.csv"))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn mesh(&self, mesh: &Mesh) -> Result<()> {
        fs::write(
            self.path.join("mesh.json"),
            serde_json::to_string(&mesh.export())? + "\n",
        )?;
        Ok(())
    }

    /// One row per vertex: `x, y, u`.
    pub fn extremal(&self, points: &[[f64; 2]], u: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path.join("extremal.csv"))?;
        w.write_record(["x", "y", "u"])?;
        for (p, v) in points.iter().zip(u) {
            w.write_record([p[0].to_string(), p[1].to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deterministic short id from the command and resolved spec.
pub fn run_id(command: &str, spec_json: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in command.bytes().chain(spec_json.bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{command}-{h:016x}")
}
