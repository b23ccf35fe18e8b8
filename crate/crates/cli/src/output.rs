//! Output helpers: every CSV starts with the config-hash comment and floats
//! go out with exact-round-trip precision.

use cavchem::table_io::format_f64;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct OutputDir {
    dir: PathBuf,
    hash: String,
}

impl OutputDir {
    pub fn new(dir: &Path, resolved_config: &str, hash: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("resolved_config.json"), resolved_config)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_csv(
        &self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<f64>],
        footer_json: Option<&serde_json::Value>,
    ) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(out, "# config_hash: {}", self.hash)?;
        writeln!(out, "{}", columns.join(","))?;
        for row in rows {
            let fields: Vec<String> = row.iter().map(|&x| format_f64(x)).collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        if let Some(v) = footer_json {
            writeln!(out, "# fit_json: {}", serde_json::to_string(v).unwrap())?;
        }
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut wrapped = value.clone();
        if let Some(obj) = wrapped.as_object_mut() {
            obj.insert(
                "config_hash".to_string(),
                serde_json::Value::String(self.hash.clone()),
            );
        }
        std::fs::write(&path, serde_json::to_string_pretty(&wrapped).unwrap())?;
        Ok(path)
    }
}
