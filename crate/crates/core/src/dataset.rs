//! Curation of examination sets: view-name standardization, completeness
//! audits, set-level splits and marker/redaction statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::imaging::Orientation;
use crate::rng::rng_from_seed;
use crate::taxonomy::{normalize_text, parse_label, TaxonomyError, ViewLabel, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("split counts sum to {requested} but there are {available} sets")]
    CountMismatch { requested: usize, available: usize },
    #[error("duplicate set id {0:?}")]
    DuplicateSetId(String),
    #[error("unknown split {0:?}")]
    UnknownSplit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(DatasetError::UnknownSplit(s.into())),
        }
    }
}

/// One radiograph of an examination set.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadiographRecord {
    pub set_id: String,
    pub file: String,
    pub raw_view: String,
    pub label: ViewLabel,
    pub has_marker: bool,
    pub redacted: bool,
    pub orientation: Orientation,
    pub split: Option<Split>,
}

/// Word-level aliases applied before parsing.
const ALIASES: &[(&str, &str)] = &[
    ("LEFT", "L"),
    ("RIGHT", "R"),
    ("LT", "L"),
    ("RT", "R"),
    ("FRONT", "FORE"),
    ("FORELIMB", "FORE"),
    ("HINDLIMB", "HIND"),
    ("HOOF", "FOOT"),
    ("HOCK", "TARSUS"),
];

/// Maps a free-text view name onto one of the 48 labels.
///
/// Case, surrounding and repeated whitespace are ignored and common word
/// aliases (`LEFT`, `RIGHT`, `FRONT`, `HOOF`, `HOCK`) are replaced first.
pub fn standardize_view_name(raw: &str) -> Result<ViewLabel, TaxonomyError> {
    let normalized = normalize_text(raw);
    let words: Vec<&str> = normalized
        .split(' ')
        .map(|w| ALIASES.iter().find(|(from, _)| *from == w).map_or(w, |(_, to)| to))
        .collect();
    parse_label(&words.join(" ")).map_err(|_| TaxonomyError::UnknownLabel(raw.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AuditStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SetAudit {
    pub set_id: String,
    pub status: AuditStatus,
    pub missing: Vec<ViewLabel>,
    pub duplicated: Vec<ViewLabel>,
}

impl SetAudit {
    pub fn is_complete(&self) -> bool {
        self.status == AuditStatus::Complete
    }
}

/// A set is complete when each of the 48 views occurs exactly once.
pub fn audit_set<'a>(set_id: &str, labels: impl IntoIterator<Item = &'a ViewLabel>) -> SetAudit {
    let mut counts = [0usize; NUM_CLASSES];
    for label in labels {
        counts[label.class_index()] += 1;
    }
    let pick = |pred: fn(usize) -> bool| -> Vec<ViewLabel> {
        ViewLabel::all().filter(|l| pred(counts[l.class_index()])).collect()
    };
    let missing = pick(|n| n == 0);
    let duplicated = pick(|n| n > 1);
    let status = if missing.is_empty() && duplicated.is_empty() {
        AuditStatus::Complete
    } else {
        AuditStatus::Incomplete
    };
    SetAudit {
        set_id: set_id.into(),
        status,
        missing,
        duplicated,
    }
}

/// Audits every set present in `records`, ordered by set id.
pub fn audit_sets(records: &[RadiographRecord]) -> Vec<SetAudit> {
    let mut by_set: BTreeMap<&str, Vec<&ViewLabel>> = BTreeMap::new();
    for r in records {
        by_set.entry(&r.set_id).or_default().push(&r.label);
    }
    by_set
        .into_iter()
        .map(|(id, labels)| audit_set(id, labels))
        .collect()
}

pub type SplitAssignment = BTreeMap<String, Split>;

/// Sorts the ids, shuffles them with a seeded Fisher–Yates pass and assigns
/// the first `train`, next `val` and last `test` ids.
pub fn split_sets(set_ids: &[String], counts: (usize, usize, usize), seed: u64) -> Result<SplitAssignment, DatasetError> {
    let (n_train, n_val, n_test) = counts;
    let requested = n_train + n_val + n_test;
    if requested != set_ids.len() {
        return Err(DatasetError::CountMismatch {
            requested,
            available: set_ids.len(),
        });
    }
    let mut ids: Vec<&String> = set_ids.iter().collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(DatasetError::DuplicateSetId(w[0].clone()));
    }
    ids.shuffle(&mut rng_from_seed(seed));
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (id.clone(), split)
        })
        .collect())
}

/// Counts behind a marker / redaction frequency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlagCounts {
    pub count: usize,
    pub with_marker: usize,
    pub redacted: usize,
}

impl FlagCounts {
    fn add(&mut self, r: &RadiographRecord) {
        self.count += 1;
        self.with_marker += r.has_marker as usize;
        self.redacted += r.redacted as usize;
    }

    pub fn marker_fraction(&self) -> f64 {
        frac(self.with_marker, self.count)
    }

    pub fn redaction_fraction(&self) -> f64 {
        frac(self.redacted, self.count)
    }
}

fn frac(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetStats {
    /// Keyed by (label, split); records without a split are skipped here.
    pub per_label: BTreeMap<(ViewLabel, Split), FlagCounts>,
    pub per_split: BTreeMap<Split, FlagCounts>,
    pub overall: FlagCounts,
}

/// Marker and redaction frequencies per label and split. A record's split is
/// taken from `split` when given, else from the record itself.
pub fn dataset_stats(records: &[RadiographRecord], split: Option<&SplitAssignment>) -> DatasetStats {
    let mut stats = DatasetStats {
        per_label: BTreeMap::new(),
        per_split: BTreeMap::new(),
        overall: FlagCounts::default(),
    };
    for r in records {
        stats.overall.add(r);
        let s = match split {
            Some(assign) => assign.get(&r.set_id).copied(),
            None => r.split,
        };
        if let Some(s) = s {
            stats.per_label.entry((r.label, s)).or_default().add(r);
            stats.per_split.entry(s).or_default().add(r);
        }
    }
    stats
}
