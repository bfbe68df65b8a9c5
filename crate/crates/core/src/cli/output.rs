use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Result, RuinError};

pub const MANIFEST: &str = "manifest.toml";

/// One file of a bundle, rendered in memory so emission is ordered and
/// checksums are known before anything touches the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FileOut {
    pub name: String,
    pub contents: String,
    /// Data rows (CSV) or lines (text).
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub files: Vec<FileOut>,
}

impl Bundle {
    /// Add a CSV file; floats use the shortest decimal that round-trips.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I)
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[Cell]>,
    {
        let mut s = header.join(",");
        s.push('\n');
        let mut n = 0;
        for row in rows {
            let cells: Vec<String> = row.as_ref().iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
            n += 1;
        }
        self.push(name, s, n);
    }

    pub fn text(&mut self, name: &str, contents: String) {
        let n = contents.lines().count();
        self.push(name, contents, n);
    }

    fn push(&mut self, name: &str, contents: String, rows: usize) {
        debug_assert!(self.files.iter().all(|f| f.name != name), "duplicate {name}");
        self.files.push(FileOut {
            name: name.to_string(),
            contents,
            rows,
        });
    }

    pub fn get(&self, name: &str) -> Option<&FileOut> {
        self.files.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    F(f64),
    U(usize),
    S(&'static str),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:?}"),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.to_string(),
        }
    }
}

/// Write every file of `bundle` under `dir`, then a manifest with one
/// `[[artifact]]` record (name, rows, sha256) per file.
pub fn emit_outputs(bundle: &Bundle, dir: &Path) -> Result<Vec<Artifact>> {
    fs::create_dir_all(dir).map_err(|e| RuinError::io(dir, e))?;
    let mut manifest = String::new();
    let mut out = Vec::with_capacity(bundle.files.len());
    for f in &bundle.files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.contents).map_err(|e| RuinError::io(&path, e))?;
        let sha256 = hex(&Sha256::digest(f.contents.as_bytes()));
        let _ = writeln!(
            manifest,
            "[[artifact]]\nname = \"{}\"\nrows = {}\nsha256 = \"{sha256}\"\n",
            f.name, f.rows
        );
        out.push(Artifact {
            name: f.name.clone(),
            rows: f.rows,
            sha256,
        });
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| RuinError::io(&path, e))?;
    Ok(out)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
