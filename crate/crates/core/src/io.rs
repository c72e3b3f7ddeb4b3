//! Output files.
//!
//! CSV artifacts start with a `# config_hash: <hex>` comment line followed by
//! a header row. Readers that understand `#` comments (pandas `comment="#"`,
//! the `csv` crate with `comment(Some(b'#'))`) see a plain table.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

pub const HASH_PREFIX: &str = "# config_hash: ";

/// An in-memory CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name inside the output directory.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Missing values are empty cells.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_table(dir: &Path, table: &Table, config_hash: &str) -> Result<PathBuf> {
    let path = dir.join(&table.name);
    let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    writeln!(file, "{HASH_PREFIX}{config_hash}").map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Read a table written by [`write_table`]. Returns the config hash and the
/// table (named after the file).
pub fn read_table(path: &Path) -> Result<(String, Table)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(&file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let hash = first
        .trim_end()
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| Error::Config(format!("{} has no config hash line", path.display())))?
        .to_string();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((hash, Table { name, header, rows }))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("x.csv", &["a", "b"]);
        t.push(vec![num(0.1), opt(None)]);
        t.push(vec![num(-2e-9), opt(Some(3.0))]);
        let path = write_table(dir.path(), &t, "abc").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config_hash: abc\na,b\n"));
        let (hash, back) = read_table(&path).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(back, t);
    }
}
