use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

/// What a command produced: a JSON summary and any number of files.
#[derive(Debug, Default)]
pub struct Report {
    pub summary: serde_json::Value,
    pub files: Vec<OutputFile>,
    /// Set when the outputs are written but the run still counts as failed.
    pub failure: Option<CliError>,
}

#[derive(Debug)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl Report {
    pub fn new(summary: impl Serialize) -> Result<Self, CliError> {
        let summary = serde_json::to_value(summary).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { summary, files: Vec::new(), failure: None })
    }

    /// Attach a CSV table. A comment line with the creation time is prepended,
    /// so two runs differ only in that first line.
    pub fn csv(mut self, name: &str, table: String) -> Self {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let contents = format!("# diffgeo {} generated at unix time {stamp}\n{table}", env!("CARGO_PKG_VERSION"));
        self.files.push(OutputFile { name: name.to_string(), contents });
        self
    }

    pub fn failing(mut self, e: CliError) -> Self {
        self.failure = Some(e);
        self
    }

    /// Write the files and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let mut written = Vec::new();
        let json = serde_json::to_string_pretty(&self.summary).expect("JSON values always serialize") + "\n";
        written.push(write_atomic(dir, &format!("{stem}.json"), &json)?);
        for f in &self.files {
            written.push(write_atomic(dir, &f.name, &f.contents)?);
        }
        Ok(written)
    }
}

/// Write to a temporary file in `dir`, then rename it into place.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(format!("creating a file in {}", dir.display()), e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(format!("writing {}", target.display()), e))?;
    // temporary files are private by default; results are ordinary files
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| CliError::io(format!("setting permissions on {}", target.display()), e))?;
    }
    tmp.persist(&target).map_err(|e| CliError::io(format!("renaming into {}", target.display()), e.error))?;
    Ok(target)
}

/// Rows of a matrix as nested vectors.
pub fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", "one").unwrap();
        write_atomic(dir.path(), "a.txt", "two").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("a.txt")).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_gets_a_comment_header() {
        let r = Report::new(serde_json::json!({})).unwrap().csv("x.csv", "a,b\n1,2\n".into());
        let text = &r.files[0].contents;
        assert!(text.starts_with("# diffgeo "));
        assert!(text.ends_with("a,b\n1,2\n"));
    }
}
