//! Operator serialization: the `PFOK` binary container and CSV with a JSON sidecar.
//!
//! Container layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `PFOK` |
//! | 4 | version `u32` (currently 1) |
//! | 4 | header length `u32` |
//! | n | UTF-8 JSON [`ContainerHeader`] |
//! | 16·rows·cols | entries row-major, each `re` then `im` as `f64` |
//!
//! Both formats round-trip bit-exactly: the container stores raw IEEE bits and
//! the CSV writes 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{Layout, TruncationSpec};
use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;

pub const CONTAINER_MAGIC: &[u8; 4] = b"PFOK";
pub const CONTAINER_VERSION: u32 = 1;
/// Element encoding recorded in every header.
pub const ELEMENT_ENCODING: &str = "f64-le-pair";
/// Header line of the operator CSV.
pub const CSV_HEADER: &str = "row,col,re,im";
/// Upper bound on the JSON header, against corrupt length fields.
const MAX_HEADER_BYTES: u32 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub rows: Layout,
    pub cols: Layout,
    pub label: String,
    /// Truncation the operator was built on, when known.
    pub spec: Option<TruncationSpec>,
    pub element: String,
}

impl ContainerHeader {
    pub fn for_operator(t: &OperatorMatrix, spec: Option<&TruncationSpec>) -> Self {
        Self { rows: t.rows, cols: t.cols, label: t.label.clone(), spec: spec.copied(), element: ELEMENT_ENCODING.into() }
    }

    fn validate(&self) -> Result<()> {
        if self.element != ELEMENT_ENCODING {
            return Err(Error::Format(format!("unsupported element encoding '{}'", self.element)));
        }
        for l in [self.rows, self.cols] {
            if l.first_level == 0 || l.levels == 0 || l.degrees == 0 {
                return Err(Error::Format(format!("invalid layout {l:?} in header")));
            }
        }
        Ok(())
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_container<W: Write>(mut w: W, t: &OperatorMatrix, spec: Option<&TruncationSpec>) -> Result<()> {
    let header = serde_json::to_vec(&ContainerHeader::for_operator(t, spec))?;
    let len = u32::try_from(header.len()).map_err(|_| Error::Format("container header too long".into()))?;
    w.write_all(CONTAINER_MAGIC)?;
    w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&header)?;
    for r in 0..t.entries.nrows() {
        for c in 0..t.entries.ncols() {
            let v = t.entries[(r, c)];
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_container<R: Read>(mut r: R) -> Result<(OperatorMatrix, ContainerHeader)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    if &magic != CONTAINER_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected PFOK")));
    }
    let version = read_u32(&mut r)?;
    if version != CONTAINER_VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let len = read_u32(&mut r)?;
    if len > MAX_HEADER_BYTES {
        return Err(Error::Format(format!("header length {len} is implausible")));
    }
    let mut hbytes = vec![0u8; len as usize];
    r.read_exact(&mut hbytes).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    let header: ContainerHeader = serde_json::from_slice(&hbytes)?;
    header.validate()?;
    let (nr, nc) = (header.rows.dim(), header.cols.dim());
    let mut data = vec![Complex64::new(0.0, 0.0); nr * nc];
    let mut b = [0u8; 16];
    for v in data.iter_mut() {
        r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
        let re = f64::from_le_bytes(b[..8].try_into().unwrap());
        let im = f64::from_le_bytes(b[8..].try_into().unwrap());
        *v = Complex64::new(re, im);
    }
    if r.read(&mut b)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let t = OperatorMatrix::new(header.rows, header.cols, DMatrix::from_row_slice(nr, nc, &data), header.label.clone())?;
    Ok((t, header))
}

pub fn save_container(path: &Path, t: &OperatorMatrix, spec: Option<&TruncationSpec>) -> Result<()> {
    write_container(BufWriter::new(File::create(path)?), t, spec)
}

pub fn load_container(path: &Path) -> Result<(OperatorMatrix, ContainerHeader)> {
    read_container(BufReader::new(File::open(path)?))
}

/// Rows `row,col,re,im`, 0-based flat indices, row-major.
pub fn write_csv<W: Write>(mut w: W, t: &OperatorMatrix) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in 0..t.entries.nrows() {
        for c in 0..t.entries.ncols() {
            let v = t.entries[(r, c)];
            writeln!(w, "{r},{c},{},{}", fmt_f64(v.re), fmt_f64(v.im))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV written by [`write_csv`] for the layouts in `header`.
/// Every entry must appear exactly once.
pub fn read_csv<R: BufRead>(r: R, header: &ContainerHeader) -> Result<OperatorMatrix> {
    header.validate()?;
    let (nr, nc) = (header.rows.dim(), header.cols.dim());
    let mut entries = DMatrix::from_element(nr, nc, Complex64::new(0.0, 0.0));
    let mut seen = vec![false; nr * nc];
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Format(format!("operator CSV must start with '{CSV_HEADER}'"))),
    }
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("malformed CSV line {}: '{line}'", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let row: usize = f[0].trim().parse().map_err(|_| bad())?;
        let col: usize = f[1].trim().parse().map_err(|_| bad())?;
        let re: f64 = f[2].trim().parse().map_err(|_| bad())?;
        let im: f64 = f[3].trim().parse().map_err(|_| bad())?;
        if row >= nr || col >= nc || std::mem::replace(&mut seen[row * nc + col], true) {
            return Err(bad());
        }
        entries[(row, col)] = Complex64::new(re, im);
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Format("operator CSV is missing entries".into()));
    }
    OperatorMatrix::new(header.rows, header.cols, entries, header.label.clone())
}

/// Sidecar path holding the JSON header of a CSV file: `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_csv(path: &Path, t: &OperatorMatrix, spec: Option<&TruncationSpec>) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), t)?;
    let header = serde_json::to_vec_pretty(&ContainerHeader::for_operator(t, spec))?;
    std::fs::write(sidecar_path(path), header)?;
    Ok(())
}

pub fn load_csv(path: &Path) -> Result<(OperatorMatrix, ContainerHeader)> {
    let header: ContainerHeader = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let t = read_csv(BufReader::new(File::open(path)?), &header)?;
    Ok((t, header))
}
