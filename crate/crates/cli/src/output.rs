use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use floydnet::{Error, Result};

/// The `--out` directory of one run.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    /// Records the subcommand, seed and resolved settings next to the
    /// artifacts as `<command>.manifest.json`.
    pub fn manifest(
        &self,
        command: &str,
        seed: u64,
        threads: Option<usize>,
        settings: Value,
    ) -> Result<()> {
        let doc = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "threads": threads,
            "settings": settings,
        });
        let mut w = self.file(&format!("{command}.manifest.json"))?;
        serde_json::to_writer_pretty(&mut w, &doc).map_err(json_err)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn json_err(e: serde_json::Error) -> Error {
    Error::InvalidArgument(format!("json: {e}"))
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(w: &mut W, rows: &[T]) -> Result<()> {
    for r in rows {
        writeln!(w, "{}", serde_json::to_string(r).map_err(json_err)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV header followed by pre-formatted rows.
pub fn write_csv<W: Write>(
    w: &mut W,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<()> {
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}
