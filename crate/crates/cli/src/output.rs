//! Output directory with atomic (temp file + rename) writes.

use std::path::{Path, PathBuf};

use crate::CliError;

pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let fail =
            |e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", target.display()));
        std::fs::write(&tmp, bytes).map_err(fail)?;
        std::fs::rename(&tmp, &target).map_err(fail)?;
        self.written.push(target.clone());
        Ok(target)
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let ser = |e: csv::Error| CliError::Data(format!("cannot encode {name}: {e}"));
        w.write_record(header).map_err(ser)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len(), "{name}: row width");
            w.write_record(row).map_err(ser)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Data(format!("cannot encode {name}: {e}")))?;
        self.write(name, &bytes)
    }

    /// Notes a file or directory produced by other means.
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}

/// Angles: three decimals.
pub fn deg(v: f64) -> String {
    format!("{v:.3}")
}

/// Distances: one decimal.
pub fn mm(v: f64) -> String {
    format!("{v:.1}")
}

/// Dimensionless values such as RMS differences and scores.
pub fn num(v: f64) -> String {
    format!("{v:.6}")
}
