//! File output. Tables are CSV with a header row; floats use Rust's
//! round-trip exponent format. Large fields may instead be written as raw
//! little-endian `f64` (`<stem>.bin`) with a JSON sidecar (`<stem>.json`):
//!
//! ```json
//! {"dtype":"float64","endianness":"little","order":"row-major","shape":[64,64],"time":0.01}
//! ```
//!
//! The last lattice coordinate varies fastest, so `shape = [N; d]` in
//! row-major order matches the site index.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::lattice::ScalarField;

#[derive(Debug, Serialize, PartialEq)]
pub struct RawHeader {
    pub dtype: &'static str,
    pub endianness: &'static str,
    pub order: &'static str,
    pub shape: Vec<usize>,
    pub time: f64,
}

pub fn create(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes a CSV file from a header and rows of already formatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// Float cell.
pub fn f(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_raw_field(dir: &Path, stem: &str, field: &ScalarField, time: f64) -> io::Result<(PathBuf, PathBuf)> {
    let lat = field.lattice();
    let bin = dir.join(format!("{stem}.bin"));
    let json = dir.join(format!("{stem}.json"));
    let mut w = create(&bin)?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let header = RawHeader {
        dtype: "float64",
        endianness: "little",
        order: "row-major",
        shape: vec![lat.side(); lat.dim()],
        time,
    };
    let mut j = create(&json)?;
    serde_json::to_writer(&mut j, &header)?;
    writeln!(j)?;
    j.flush()?;
    Ok((bin, json))
}

pub fn read_raw_field(bin: &Path) -> io::Result<Vec<f64>> {
    let bytes = std::fs::read(bin)?;
    if bytes.len() % 8 != 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "length is not a multiple of 8",
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// `field_t<index>.csv` (`site_index,value`) or the raw pair.
pub fn write_field(dir: &Path, index: usize, field: &ScalarField, time: f64, raw: bool) -> io::Result<()> {
    let stem = format!("field_t{index:04}");
    if raw {
        write_raw_field(dir, &stem, field, time).map(|_| ())
    } else {
        let mut w = create(&dir.join(format!("{stem}.csv")))?;
        field.write_csv(&mut w)?;
        w.flush()
    }
}
