//! Staged outputs: commands assemble every file in memory and only write
//! once all computation has succeeded, so a failing run never leaves partial
//! results behind.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    /// Adds a CSV file with a header row.
    pub fn add_csv<I>(&mut self, path: impl Into<PathBuf>, header: &[&str], records: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in records {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::config(format!("csv buffer: {e}")))?;
        self.add(path, bytes);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, path: &Path) -> Option<&[u8]> {
        self.files.iter().find(|(p, _)| p == path).map(|(_, b)| b.as_slice())
    }

    /// Writes every staged file, creating parent directories.
    pub fn commit(&self) -> Result<()> {
        for (path, bytes) in &self.files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        }
        Ok(())
    }
}

/// Writes a matrix as CSV with header `c0,c1,…`.
pub fn matrix_csv(m: &lstmcs::DenseMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..m.cols()).map(|j| format!("c{j}")))?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|x| x.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::config(format!("csv buffer: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_plain_and_staged() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new();
        out.add_csv(dir.path().join("sub/a.csv"), &["x", "y"], vec![vec!["0.5".into(), "1e-7".into()]]).unwrap();
        assert!(!dir.path().join("sub").exists());
        out.commit().unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("sub/a.csv")).unwrap(), "x,y\n0.5,1e-7\n");
    }

    #[test]
    fn matrix_csv_layout() {
        let m = lstmcs::DenseMatrix::new(2, 2, vec![1.0, -0.25, 0.0, 3.0]).unwrap();
        assert_eq!(String::from_utf8(matrix_csv(&m).unwrap()).unwrap(), "c0,c1\n1,-0.25\n0,3\n");
    }
}
