//! Sweep records on disk and the content-addressed cache.
//!
//! File layout:
//!
//! ```text
//! #qrm-sweep v1 {"hash":…,"key":{…},"columns":[…],"summary":{…}}
//! status,<column 1>,<column 2>,…
//! ok,<value>,<value>,…
//! ```
//!
//! Values are written with 17 significant digits; an empty field is a
//! missing value (failed point). Everything except the data rows is in the
//! JSON header; the hash covers the key only.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{QrmError, Result};
use crate::qfi::QfiOptions;

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
const MAGIC: &str = "#qrm-sweep v";
const EXTENSION: &str = "qrm.csv";
const LOCK_FILE: &str = ".qrm.lock";

/// Linear `ḡ` grid with `steps` points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gbar_min: f64,
    pub gbar_max: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(gbar_min: f64, gbar_max: f64, steps: usize) -> Result<Self> {
        if !(gbar_min >= 0.0 && gbar_max >= gbar_min && gbar_max.is_finite()) {
            return Err(QrmError::domain("need 0 ≤ ḡ_min ≤ ḡ_max < ∞"));
        }
        if steps == 0 || (steps == 1 && gbar_max != gbar_min) {
            return Err(QrmError::domain("grid needs at least two points unless ḡ_min = ḡ_max"));
        }
        Ok(GridSpec { gbar_min, gbar_max, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.gbar_min];
        }
        let d = (self.gbar_max - self.gbar_min) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.gbar_min + d * k as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub energy_tol: f64,
    pub cutoff_limit: usize,
    pub step_gbar: f64,
    pub refine_tol: f64,
}

impl From<&QfiOptions> for Tolerances {
    fn from(o: &QfiOptions) -> Self {
        Tolerances {
            energy_tol: o.ed.energy_tol,
            cutoff_limit: o.ed.cutoff_limit,
            step_gbar: o.step_gbar,
            refine_tol: o.refine_tol,
        }
    }
}

/// Everything that determines a record's content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordKey {
    pub schema: u32,
    /// Producing command, e.g. `qfi-sweep`.
    pub kind: String,
    pub method: String,
    pub omega: f64,
    pub splitting: f64,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    /// Command-specific settings that change the payload.
    pub options: BTreeMap<String, String>,
    pub code_version: String,
}

impl RecordKey {
    pub fn new(kind: &str, method: &str, omega: f64, splitting: f64, grid: GridSpec, tolerances: Tolerances) -> Self {
        RecordKey {
            schema: SCHEMA_VERSION,
            kind: kind.to_string(),
            method: method.to_string(),
            omega,
            splitting,
            grid,
            tolerances,
            options: BTreeMap::new(),
            code_version: CODE_VERSION.to_string(),
        }
    }

    pub fn with_option(mut self, name: &str, value: impl ToString) -> Self {
        self.options.insert(name.to_string(), value.to_string());
        self
    }

    /// Hex SHA-256 of the key's JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("key serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `ok`, or a short failure description.
    pub status: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    hash: String,
    key: RecordKey,
    columns: Vec<String>,
    summary: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub key: RecordKey,
    pub hash: String,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Per-record scalars such as a located peak.
    pub summary: BTreeMap<String, f64>,
}

impl SweepRecord {
    pub fn new(key: RecordKey, columns: &[&str]) -> Self {
        SweepRecord {
            hash: key.hash(),
            key,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn push_ok(&mut self, values: Vec<f64>) {
        self.rows.push(SweepRow {
            status: "ok".into(),
            values: values.into_iter().map(Some).collect(),
        });
    }

    pub fn push_row(&mut self, status: impl Into<String>, values: Vec<Option<f64>>) {
        self.rows.push(SweepRow {
            status: status.into(),
            values,
        });
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.status != "ok").count()
    }

    fn validate(&self) -> Result<()> {
        if self.hash != self.key.hash() {
            return Err(QrmError::domain("record hash does not match its key"));
        }
        for (name, v) in &self.summary {
            if !v.is_finite() {
                return Err(QrmError::NonFinite(name.clone()));
            }
        }
        for row in &self.rows {
            if row.values.len() != self.columns.len() {
                return Err(QrmError::domain("row width differs from column count"));
            }
            if row.status.is_empty() || row.status.contains([',', '\n', '\r', '"']) {
                return Err(QrmError::domain("status must be non-empty and free of CSV delimiters"));
            }
            for (c, v) in self.columns.iter().zip(&row.values) {
                if matches!(v, Some(x) if !x.is_finite()) {
                    return Err(QrmError::NonFinite(c.clone()));
                }
            }
        }
        Ok(())
    }

    /// Serialized file contents.
    pub fn to_text(&self) -> Result<String> {
        self.validate()?;
        let header = Header {
            hash: self.hash.clone(),
            key: self.key.clone(),
            columns: self.columns.clone(),
            summary: self.summary.clone(),
        };
        let mut out = format!("{MAGIC}{SCHEMA_VERSION} {}\n", serde_json::to_string(&header).expect("header serializes"));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut head = vec!["status".to_string()];
        head.extend(self.columns.iter().cloned());
        w.write_record(&head).map_err(csv_io)?;
        for row in &self.rows {
            let mut f = vec![row.status.clone()];
            f.extend(row.values.iter().map(|v| v.map(|x| format!("{x:.16e}")).unwrap_or_default()));
            w.write_record(&f).map_err(csv_io)?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner().map_err(|e| csv_io(e.into_error().into()))?).expect("ascii"));
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse = |offset: usize, msg: &str| QrmError::Parse {
            offset,
            msg: msg.to_string(),
        };
        let (first, body) = text.split_once('\n').ok_or_else(|| parse(0, "missing header line"))?;
        let rest = first.strip_prefix(MAGIC).ok_or_else(|| parse(0, "missing `#qrm-sweep v` magic"))?;
        let (ver, json) = rest.split_once(' ').ok_or_else(|| parse(MAGIC.len(), "missing header JSON"))?;
        let found: u32 = ver.parse().map_err(|_| parse(MAGIC.len(), "schema version is not an integer"))?;
        if found != SCHEMA_VERSION {
            return Err(QrmError::SchemaMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let json_at = MAGIC.len() + ver.len() + 1;
        let header: Header = serde_json::from_str(json).map_err(|e| {
            // serde_json positions are 1-based columns on a single line
            parse(json_at + e.column().saturating_sub(1), &e.to_string())
        })?;
        if header.key.schema != SCHEMA_VERSION {
            return Err(QrmError::SchemaMismatch {
                found: header.key.schema,
                expected: SCHEMA_VERSION,
            });
        }
        if header.hash != header.key.hash() {
            return Err(parse(json_at, "content hash does not match the stored key"));
        }
        let base = first.len() + 1;
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
        let mut records = rdr.records();
        let csv_err = |e: csv::Error| {
            let at = e.position().map(|p| p.byte() as usize).unwrap_or(0);
            parse(base + at, &e.to_string())
        };
        let head = records
            .next()
            .ok_or_else(|| parse(base, "missing column line"))?
            .map_err(csv_err)?;
        let expected: Vec<&str> = std::iter::once("status").chain(header.columns.iter().map(String::as_str)).collect();
        if head.iter().collect::<Vec<_>>() != expected {
            return Err(parse(base, "column line does not match the header"));
        }
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec.map_err(csv_err)?;
            let start = base + rec.position().map(|p| p.byte() as usize).unwrap_or(0);
            if rec.len() != expected.len() {
                return Err(parse(start, "wrong number of fields"));
            }
            let mut values = Vec::with_capacity(header.columns.len());
            for i in 1..rec.len() {
                let field = &rec[i];
                if field.is_empty() {
                    values.push(None);
                    continue;
                }
                let at = start + rec.iter().take(i).map(|f| f.len() + 1).sum::<usize>();
                let v: f64 = field.parse().map_err(|_| parse(at, "invalid number"))?;
                if !v.is_finite() {
                    return Err(parse(at, "non-finite value"));
                }
                values.push(Some(v));
            }
            rows.push(SweepRow {
                status: rec[0].to_string(),
                values,
            });
        }
        Ok(SweepRecord {
            key: header.key,
            hash: header.hash,
            columns: header.columns,
            rows,
            summary: header.summary,
        })
    }
}

fn csv_io(e: csv::Error) -> QrmError {
    QrmError::Io(std::io::Error::other(e))
}

/// Writes `record` to `path` via a temporary file and a rename, so readers
/// never see a partial file.
pub fn save(record: &SweepRecord, path: &Path) -> Result<()> {
    let text = record.to_text()?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SweepRecord> {
    SweepRecord::from_text(&fs::read_to_string(path)?)
}

/// Cache file for a hash.
pub fn cache_path(cache_dir: &Path, hash: &str) -> PathBuf {
    cache_dir.join(format!("{hash}.{EXTENSION}"))
}

fn lock_dir(cache_dir: &Path, exclusive: bool) -> Result<File> {
    fs::create_dir_all(cache_dir)?;
    let f = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(cache_dir.join(LOCK_FILE))?;
    if exclusive {
        f.lock()?;
    } else {
        f.lock_shared()?;
    }
    Ok(f)
}

/// Record stored under exactly `hash`, if any.
pub fn lookup(cache_dir: &Path, hash: &str) -> Result<Option<SweepRecord>> {
    let path = cache_path(cache_dir, hash);
    if !path.exists() {
        return Ok(None);
    }
    let _guard = lock_dir(cache_dir, false)?;
    let rec = load(&path)?;
    Ok((rec.hash == hash).then_some(rec))
}

/// Saves `record` into the cache under its hash.
pub fn store(cache_dir: &Path, record: &SweepRecord) -> Result<PathBuf> {
    let _guard = lock_dir(cache_dir, true)?;
    let path = cache_path(cache_dir, &record.hash);
    save(record, &path)?;
    Ok(path)
}

/// All readable records in the cache, sorted by hash. Unreadable files are
/// skipped with a warning.
pub fn cached_records(cache_dir: &Path) -> Result<Vec<SweepRecord>> {
    if !cache_dir.exists() {
        return Ok(Vec::new());
    }
    let _guard = lock_dir(cache_dir, false)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(cache_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(EXTENSION))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        match load(&p) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("skipping {}: {e}", p.display()),
        }
    }
    Ok(out)
}
