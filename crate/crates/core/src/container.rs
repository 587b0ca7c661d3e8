//! Column files: a small binary container and plain CSV.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   "RBESCOL1"
//! n_columns  u32
//! n_rows     u64
//! per column: name_len u16, name (UTF-8, name_len bytes)
//! data       n_columns * n_rows f64, column-major
//! ```
//!
//! CSV files are UTF-8, comma separated, with a header row; numbers are
//! written with 17 significant digits so they read back bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RBESCOL1";

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Columns {
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Columns {
    pub fn new() -> Self {
        Columns::default()
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if let Some(first) = self.data.first() {
            if first.len() != values.len() {
                return Err(Error::Input(format!(
                    "column {name} has {} rows, expected {}",
                    values.len(),
                    first.len()
                )));
            }
        }
        if name.len() > u16::MAX as usize || name.contains([',', '\n', '"']) {
            return Err(Error::Input(format!("unusable column name {name:?}")));
        }
        self.names.push(name);
        self.data.push(values);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push(name, values)?;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.data[i].as_slice())
    }
}

pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_binary(path: &Path, cols: &Columns) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_binary(&mut w, cols).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn encode_binary<W: Write>(w: &mut W, cols: &Columns) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(cols.names.len() as u32).to_le_bytes())?;
    w.write_all(&(cols.n_rows() as u64).to_le_bytes())?;
    for name in &cols.names {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    for col in &cols.data {
        for x in col {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<Columns> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    decode_binary(&mut r).map_err(|e| match e {
        DecodeError::Io(e) => Error::io(path, e),
        DecodeError::Format(m) => Error::Format(format!("{}: {m}", path.display())),
    })
}

enum DecodeError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for DecodeError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DecodeError::Format("truncated file".into())
        } else {
            DecodeError::Io(e)
        }
    }
}

fn decode_binary<R: Read>(r: &mut R) -> std::result::Result<Columns, DecodeError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DecodeError::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b4)?;
    let n_cols = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let n_rows = u64::from_le_bytes(b8) as usize;
    let mut names = Vec::with_capacity(n_cols.min(1024));
    for _ in 0..n_cols {
        r.read_exact(&mut b2)?;
        let mut buf = vec![0u8; u16::from_le_bytes(b2) as usize];
        r.read_exact(&mut buf)?;
        names.push(
            String::from_utf8(buf)
                .map_err(|_| DecodeError::Format("column name is not UTF-8".into()))?,
        );
    }
    let mut data = Vec::with_capacity(n_cols.min(1024));
    for _ in 0..n_cols {
        let mut col = Vec::with_capacity(n_rows.min(1 << 24));
        for _ in 0..n_rows {
            r.read_exact(&mut b8)?;
            col.push(f64::from_le_bytes(b8));
        }
        data.push(col);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(DecodeError::Format("trailing bytes".into()));
    }
    Ok(Columns { names, data })
}

pub fn write_csv(path: &Path, cols: &Columns) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_csv(&mut w, cols).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn encode_csv<W: Write>(w: &mut W, cols: &Columns) -> std::io::Result<()> {
    writeln!(w, "{}", cols.names.join(","))?;
    let mut line = String::new();
    for i in 0..cols.n_rows() {
        line.clear();
        for (j, col) in cols.data.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_f64(col[i]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Columns> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Format(format!("{}: empty file", path.display()))),
    };
    let names: Vec<String> = header.split(',').map(str::to_owned).collect();
    let mut data = vec![Vec::new(); names.len()];
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::Format(format!(
                "{}: line {} has {} fields, expected {}",
                path.display(),
                i + 2,
                fields.len(),
                names.len()
            )));
        }
        for (col, f) in data.iter_mut().zip(fields) {
            col.push(f.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "{}: line {}: bad number {f:?}",
                    path.display(),
                    i + 2
                ))
            })?);
        }
    }
    Ok(Columns { names, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_layout_is_little_endian() {
        let cols = Columns::new().with("t", vec![0.0, 1.5]).unwrap();
        let mut buf = Vec::new();
        encode_binary(&mut buf, &cols).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..20], &2u64.to_le_bytes());
        assert_eq!(&buf[20..22], &1u16.to_le_bytes());
        assert_eq!(buf[22], b't');
        assert_eq!(&buf[31..39], &1.5f64.to_le_bytes());
        let back = decode_binary(&mut buf.as_slice()).ok().unwrap();
        assert_eq!(back, cols);
    }

    #[test]
    fn truncated_container_is_rejected() {
        let cols = Columns::new().with("v", vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        encode_binary(&mut buf, &cols).unwrap();
        buf.pop();
        assert!(matches!(
            decode_binary(&mut buf.as_slice()),
            Err(DecodeError::Format(_))
        ));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let mut cols = Columns::new().with("a", vec![1.0]).unwrap();
        assert!(cols.push("b", vec![1.0, 2.0]).is_err());
        assert!(cols.push("c,d", vec![1.0]).is_err());
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, f64::MIN_POSITIVE] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
