//! Metadata CSV: one row per radiograph.
//!
//! Columns, in order:
//! `set_id,file,raw_view,label,has_marker,redacted,quarter_turns,mirror,split`.
//! `file` is relative to the directory holding the CSV, `label` is the
//! canonical view string, flags are `0`/`1` and `split` may be empty.

use std::fs;
use std::path::{Path, PathBuf};

use radview_core::dataset::{RadiographRecord, Split};
use radview_core::taxonomy::parse_label;
use radview_core::Orientation;
use thiserror::Error;

pub const HEADER: [&str; 9] = [
    "set_id",
    "file",
    "raw_view",
    "label",
    "has_marker",
    "redacted",
    "quarter_turns",
    "mirror",
    "split",
];

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("metadata header must be {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: {reason}")]
    BadRow { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" | "" => Some(false),
        _ => None,
    }
}

pub fn parse_records(text: &str) -> Result<Vec<RadiographRecord>, RecordsError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(RecordsError::BadHeader {
            expected: HEADER.join(","),
            found: header.join(","),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |reason: String| RecordsError::BadRow { line, reason };
        let label = parse_label(&row[3]).map_err(|e| bad(e.to_string()))?;
        let has_marker = flag(&row[4]).ok_or_else(|| bad(format!("has_marker {:?}", &row[4])))?;
        let redacted = flag(&row[5]).ok_or_else(|| bad(format!("redacted {:?}", &row[5])))?;
        let quarter_turns: u8 = row[6]
            .trim()
            .parse()
            .ok()
            .filter(|q| *q < 4)
            .ok_or_else(|| bad(format!("quarter_turns {:?}", &row[6])))?;
        let mirror = flag(&row[7]).ok_or_else(|| bad(format!("mirror {:?}", &row[7])))?;
        let split = match row[8].trim() {
            "" => None,
            s => Some(s.parse::<Split>().map_err(|e| bad(e.to_string()))?),
        };
        out.push(RadiographRecord {
            set_id: row[0].to_string(),
            file: row[1].to_string(),
            raw_view: row[2].to_string(),
            label,
            has_marker,
            redacted,
            orientation: Orientation { quarter_turns, mirror },
            split,
        });
    }
    Ok(out)
}

pub fn format_records(records: &[RadiographRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    let b = |v: bool| if v { "1" } else { "0" };
    for r in records {
        let turns = r.orientation.quarter_turns.to_string();
        let label = r.label.canonical();
        w.write_record([
            r.set_id.as_str(),
            r.file.as_str(),
            r.raw_view.as_str(),
            label.as_str(),
            b(r.has_marker),
            b(r.redacted),
            turns.as_str(),
            b(r.orientation.mirror),
            r.split.map_or("", |s| s.as_str()),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

/// Metadata loaded from disk together with the directory its paths are
/// relative to.
#[derive(Debug, Clone)]
pub struct Metadata {
    pub root: PathBuf,
    pub records: Vec<RadiographRecord>,
}

impl Metadata {
    pub fn load(path: &Path) -> Result<Self, RecordsError> {
        let text = fs::read_to_string(path)?;
        Ok(Metadata {
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            records: parse_records(&text)?,
        })
    }

    pub fn image_path(&self, record: &RadiographRecord) -> PathBuf {
        self.root.join(&record.file)
    }
}

pub fn save_records(path: &Path, records: &[RadiographRecord]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, format_records(records))
}
