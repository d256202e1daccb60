//! Dense row-major binary matrices with id sidecars.
//!
//! Layout: a 7-byte ASCII magic, `u64` row count, `u64` column count (both
//! little-endian), then `rows * cols` little-endian `f32` values. Row and
//! column ids live next to the matrix in `<path>.rows.txt` and
//! `<path>.cols.txt`, one id per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const SIMILARITY_MAGIC: &str = "SEMSIM1";
pub const RUN_MAGIC: &str = "RETRUN1";

pub fn sidecar(path: &Path, which: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(format!(".{which}.txt"));
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub values: Vec<f32>,
}

pub fn write(path: &Path, magic: &'static str, m: &DenseMatrix) -> Result<()> {
    debug_assert_eq!(magic.len(), 7);
    if m.values.len() != m.row_ids.len() * m.col_ids.len() {
        return Err(Error::InvalidInput("dense matrix shape mismatch".into()));
    }
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(magic.as_bytes()).map_err(io)?;
    out.write_all(&(m.row_ids.len() as u64).to_le_bytes())
        .map_err(io)?;
    out.write_all(&(m.col_ids.len() as u64).to_le_bytes())
        .map_err(io)?;
    for v in &m.values {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)?;
    write_ids(&sidecar(path, "rows"), &m.row_ids)?;
    write_ids(&sidecar(path, "cols"), &m.col_ids)
}

pub fn read(path: &Path, magic: &'static str) -> Result<DenseMatrix> {
    let io = |e| Error::io(path, e);
    let mut input = BufReader::new(File::open(path).map_err(io)?);
    let mut head = [0u8; 7];
    input.read_exact(&mut head).map_err(io)?;
    if head != magic.as_bytes() {
        return Err(Error::BadMagic { expected: magic });
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word).map_err(io)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word).map_err(io)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut values = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 4];
    for _ in 0..rows * cols {
        input.read_exact(&mut buf).map_err(io)?;
        values.push(f32::from_le_bytes(buf));
    }
    let row_ids = read_ids(&sidecar(path, "rows"))?;
    let col_ids = read_ids(&sidecar(path, "cols"))?;
    if row_ids.len() != rows || col_ids.len() != cols {
        return Err(Error::InvalidInput(format!(
            "{}: sidecar ids do not match a {rows}x{cols} matrix",
            path.display()
        )));
    }
    Ok(DenseMatrix {
        row_ids,
        col_ids,
        values,
    })
}

fn write_ids(path: &Path, ids: &[String]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for id in ids {
        writeln!(out, "{id}").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
        .collect()
}
