//! Output files: refuse to overwrite without `--force`, and stamp every file
//! with the tool version and the resolved config.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct OutputDir {
    dir: PathBuf,
    header: Value,
}

impl OutputDir {
    /// Checks that none of `names` exists in `dir` (unless `force`) and creates `dir`.
    pub fn prepare(dir: &Path, names: &[&str], force: bool, header: Value) -> Result<Self, String> {
        if !force {
            for n in names {
                let p = dir.join(n);
                if p.exists() {
                    return Err(format!("{} exists; pass --force to overwrite", p.display()));
                }
            }
        }
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            header,
        })
    }

    /// Writes `{"specdom_version", "config", …body}`.
    pub fn json(&self, name: &str, body: Value) -> std::io::Result<PathBuf> {
        let mut doc = json!({ "specdom_version": VERSION, "config": self.header });
        if let (Some(d), Value::Object(b)) = (doc.as_object_mut(), body) {
            d.extend(b);
        }
        self.write(name, serde_json::to_string_pretty(&doc).expect("json serializes") + "\n")
    }

    /// Writes a CSV preceded by `#` lines carrying the version and config.
    pub fn csv(&self, name: &str, body: &str) -> std::io::Result<PathBuf> {
        let head = format!(
            "# specdom {VERSION}\n# config {}\n",
            serde_json::to_string(&self.header).expect("json serializes")
        );
        self.write(name, head + body)
    }

    fn write(&self, name: &str, content: String) -> std::io::Result<PathBuf> {
        let p = self.dir.join(name);
        fs::write(&p, content)?;
        log::info!("wrote {}", p.display());
        Ok(p)
    }
}
