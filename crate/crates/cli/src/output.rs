//! Output directory, JSON and CSV writers, and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty printing with every float at 17 significant digits.
struct Full<'a>(PrettyFormatter<'a>);

impl Formatter for Full<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt17(v).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// JSON in field order, floats at full precision, trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Full(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("value serializes");
    buf.push(b'\n');
    String::from_utf8(buf).expect("json is utf-8")
}

/// A numeric table written as CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&x| fmt17(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub step: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    /// Written next to the outputs; `--config` on it reruns the same experiment.
    pub resolved_config: String,
    pub output_dir: String,
    pub master_seed: u64,
    pub threads: usize,
    pub pass: bool,
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<Timing>,
}

pub const MANIFEST: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, thiserror::Error)]
#[error("{}: {source}", path.display())]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError {
        path: path.to_path_buf(),
        source,
    }
}

/// Collects files under one directory and hashes each as it is written.
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    /// Creates the directory and removes a stale manifest, so a manifest
    /// only ever describes a completed run.
    pub fn create(root: &Path) -> Result<Self, IoError> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        let m = root.join(MANIFEST);
        match fs::remove_file(&m) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(&m)(e)),
        }
        Ok(OutputDir {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, IoError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(Artifact {
            path: name.into(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, IoError> {
        self.write(name, &to_json(value))
    }

    pub fn write_csv(&mut self, name: &str, table: &Table) -> Result<PathBuf, IoError> {
        self.write(name, &table.to_csv())
    }

    /// Writes the manifest through a temporary file and a rename.
    pub fn finish(self, manifest: &RunManifest) -> Result<PathBuf, IoError> {
        let path = self.root.join(MANIFEST);
        let tmp = self.root.join(format!("{MANIFEST}.tmp"));
        fs::write(&tmp, to_json(manifest)).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_at_17_digits() {
        for &x in &[0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, f64::MIN_POSITIVE] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt17(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn json_keeps_field_order_and_precision() {
        #[derive(Serialize)]
        struct S {
            b: f64,
            a: u64,
            c: Vec<f64>,
            d: f64,
        }
        let j = to_json(&S {
            b: 0.1,
            a: 7,
            c: vec![1.0],
            d: f64::NAN,
        });
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["b"].as_f64(), Some(0.1));
        assert_eq!(v["a"].as_u64(), Some(7));
        assert!(v["d"].is_null());
        assert!(j.find("\"b\"").unwrap() < j.find("\"a\"").unwrap());
        assert!(j.contains("1.0000000000000001e-1"), "{j}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new(["x", "y"]);
        t.push(vec![1.0, 2.0]);
        assert_eq!(
            t.to_csv(),
            "x,y\n1.0000000000000000e0,2.0000000000000000e0\n"
        );
    }

    #[test]
    fn manifest_is_written_last_and_lists_hashes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(MANIFEST), "stale").unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        assert!(!dir.path().join(MANIFEST).exists());
        out.write("a.txt", "hello").unwrap();
        assert_eq!(
            out.artifacts()[0].sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        let m = RunManifest {
            subcommand: "verify".into(),
            config_path: None,
            resolved_config: "config.ini".into(),
            output_dir: dir.path().display().to_string(),
            master_seed: 1,
            threads: 1,
            pass: true,
            artifacts: out.artifacts().to_vec(),
            timings: vec![],
        };
        out.finish(&m).unwrap();
        let text = std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert!(text.contains("a.txt"));
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let e = out.write("missing/x.csv", "1").unwrap_err();
        assert!(e.to_string().contains("missing"), "{e}");
    }
}
