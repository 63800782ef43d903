//! The 48-view radiographic examination taxonomy.
//!
//! A [`ViewLabel`] is laterality × limb × region × projection. Only the 24
//! (limb, region, projection) rows of the examination protocol are valid, each
//! available for the left and the right limb.
//!
//! Class indices are frozen to the lexicographic order of the canonical
//! renderings (`"L FORE CARPUS DLPMO"` is class 0). Because every `L ...`
//! string sorts before every `R ...` string, the class index of a label is
//! `24 * laterality + neutral_index`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Number of full (lateralized) view classes.
pub const NUM_CLASSES: usize = 48;
/// Number of laterality-neutral views.
pub const NUM_NEUTRAL: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("unknown view label: {0:?}")]
    UnknownLabel(String),
    #[error("no {limb} {region} {projection} view in the examination protocol")]
    UnknownPair {
        limb: Limb,
        region: Region,
        projection: Projection,
    },
    #[error("class index {0} out of range")]
    BadIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Laterality {
    L,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Limb {
    Fore,
    Hind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Region {
    Carpus,
    Fetlock,
    Tarsus,
    Stifle,
    Foot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Projection {
    Dp,
    Lm,
    Dlpmo,
    Dmplo,
    FlexedLm,
    FlexedDp,
    CdCr,
    CdlCrmo,
}

impl Laterality {
    pub fn token(self) -> &'static str {
        match self {
            Laterality::L => "L",
            Laterality::R => "R",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Laterality::L => Laterality::R,
            Laterality::R => Laterality::L,
        }
    }
}

impl Limb {
    pub fn token(self) -> &'static str {
        match self {
            Limb::Fore => "FORE",
            Limb::Hind => "HIND",
        }
    }
}

impl Region {
    pub fn token(self) -> &'static str {
        match self {
            Region::Carpus => "CARPUS",
            Region::Fetlock => "FETLOCK",
            Region::Tarsus => "TARSUS",
            Region::Stifle => "STIFLE",
            Region::Foot => "FOOT",
        }
    }
}

impl Projection {
    pub fn token(self) -> &'static str {
        match self {
            Projection::Dp => "DP",
            Projection::Lm => "LM",
            Projection::Dlpmo => "DLPMO",
            Projection::Dmplo => "DMPLO",
            Projection::FlexedLm => "FLEXED LM",
            Projection::FlexedDp => "FLEXED DP",
            Projection::CdCr => "CD CR",
            Projection::CdlCrmo => "CDL CRMO",
        }
    }
}

macro_rules! display_token {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    )*};
}
display_token!(Laterality, Limb, Region, Projection);

struct Row {
    limb: Limb,
    region: Region,
    projection: Projection,
    long_name: &'static str,
}

const fn row(limb: Limb, region: Region, projection: Projection, long_name: &'static str) -> Row {
    Row {
        limb,
        region,
        projection,
        long_name,
    }
}

use Limb::{Fore, Hind};
use Projection::*;
use Region::*;

/// The examination protocol, sorted by canonical neutral rendering.
static ROWS: [Row; NUM_NEUTRAL] = [
    row(Fore, Carpus, Dlpmo, "dorsal 55° lateral to palmaromedial oblique"),
    row(Fore, Carpus, Dmplo, "dorsal 75° medial to palmarolateral oblique"),
    row(Fore, Carpus, Dp, "dorsopalmar"),
    row(Fore, Carpus, FlexedDp, "flexed dorsal 60° proximal dorsodistal oblique"),
    row(Fore, Carpus, FlexedLm, "flexed lateromedial"),
    row(Fore, Fetlock, Dlpmo, "dorsal 45° lateral to palmaromedial oblique"),
    row(Fore, Fetlock, Dmplo, "dorsal 45° medial to palmarolateral oblique"),
    row(Fore, Fetlock, Dp, "dorsopalmar"),
    row(Fore, Fetlock, FlexedDp, "flexed dorsal 125° distal to palmaroproximal oblique"),
    row(Fore, Fetlock, FlexedLm, "flexed lateromedial"),
    row(Fore, Fetlock, Lm, "lateromedial"),
    row(Fore, Foot, Dp, "dorsal 60° proximal to palmarodistal oblique"),
    row(Fore, Foot, Lm, "lateromedial"),
    row(Hind, Fetlock, Dlpmo, "dorsal 45° lateral to pantaromedial oblique"),
    row(Hind, Fetlock, Dmplo, "dorsal 45° medial to pantarolateral oblique"),
    row(Hind, Fetlock, Dp, "dorsoplantar"),
    row(Hind, Fetlock, Lm, "lateromedial"),
    row(Hind, Stifle, CdCr, "caudocranial"),
    row(Hind, Stifle, CdlCrmo, "caudolateral to craniomedial oblique"),
    row(Hind, Stifle, Lm, "lateromedial"),
    row(Hind, Tarsus, Dlpmo, "dorsal 10° lateral to pantaromedial oblique"),
    row(Hind, Tarsus, Dmplo, "dorsal 65° medial to pantarolateral oblique"),
    row(Hind, Tarsus, Dp, "dorsoplantar"),
    row(Hind, Tarsus, Lm, "lateromedial"),
];

fn row_index(limb: Limb, region: Region, projection: Projection) -> Option<usize> {
    ROWS.iter()
        .position(|r| r.limb == limb && r.region == region && r.projection == projection)
}

/// A view with the left/right designation removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeutralViewLabel {
    index: u8,
}

impl NeutralViewLabel {
    pub fn new(limb: Limb, region: Region, projection: Projection) -> Result<Self, TaxonomyError> {
        row_index(limb, region, projection)
            .map(|i| NeutralViewLabel { index: i as u8 })
            .ok_or(TaxonomyError::UnknownPair {
                limb,
                region,
                projection,
            })
    }

    pub fn from_index(index: usize) -> Result<Self, TaxonomyError> {
        if index < NUM_NEUTRAL {
            Ok(NeutralViewLabel { index: index as u8 })
        } else {
            Err(TaxonomyError::BadIndex(index))
        }
    }

    /// Position in the frozen lexicographic order, in `0..24`.
    pub fn index(self) -> usize {
        self.index as usize
    }

    fn row(self) -> &'static Row {
        &ROWS[self.index as usize]
    }

    pub fn limb(self) -> Limb {
        self.row().limb
    }

    pub fn region(self) -> Region {
        self.row().region
    }

    pub fn projection(self) -> Projection {
        self.row().projection
    }

    pub fn long_name(self) -> &'static str {
        self.row().long_name
    }

    pub fn with_laterality(self, laterality: Laterality) -> ViewLabel {
        ViewLabel {
            laterality,
            view: self,
        }
    }

    pub fn all() -> impl Iterator<Item = NeutralViewLabel> {
        (0..NUM_NEUTRAL).map(|i| NeutralViewLabel { index: i as u8 })
    }
}

impl fmt::Display for NeutralViewLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.limb(), self.region(), self.projection())
    }
}

/// One of the 48 canonical radiographic views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewLabel {
    laterality: Laterality,
    view: NeutralViewLabel,
}

impl ViewLabel {
    pub fn new(
        laterality: Laterality,
        limb: Limb,
        region: Region,
        projection: Projection,
    ) -> Result<Self, TaxonomyError> {
        Ok(NeutralViewLabel::new(limb, region, projection)?.with_laterality(laterality))
    }

    pub fn from_class_index(index: usize) -> Result<Self, TaxonomyError> {
        if index >= NUM_CLASSES {
            return Err(TaxonomyError::BadIndex(index));
        }
        let laterality = if index < NUM_NEUTRAL {
            Laterality::L
        } else {
            Laterality::R
        };
        Ok(ViewLabel {
            laterality,
            view: NeutralViewLabel {
                index: (index % NUM_NEUTRAL) as u8,
            },
        })
    }

    /// Stable class index in `0..48`, lexicographic over canonical strings.
    pub fn class_index(self) -> usize {
        let side = match self.laterality {
            Laterality::L => 0,
            Laterality::R => NUM_NEUTRAL,
        };
        side + self.view.index()
    }

    pub fn laterality(self) -> Laterality {
        self.laterality
    }

    pub fn limb(self) -> Limb {
        self.view.limb()
    }

    pub fn region(self) -> Region {
        self.view.region()
    }

    pub fn projection(self) -> Projection {
        self.view.projection()
    }

    /// Drops laterality; left and right views of the same row collapse together.
    pub fn collapse(self) -> NeutralViewLabel {
        self.view
    }

    pub fn mirror(self) -> ViewLabel {
        ViewLabel {
            laterality: self.laterality.opposite(),
            view: self.view,
        }
    }

    /// All 48 labels in class-index order.
    pub fn all() -> impl Iterator<Item = ViewLabel> {
        (0..NUM_CLASSES).map(|i| ViewLabel::from_class_index(i).unwrap())
    }

    pub fn canonical(self) -> String {
        alloc::format!("{self}")
    }
}

impl fmt::Display for ViewLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.laterality, self.view)
    }
}

impl core::str::FromStr for ViewLabel {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ViewLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ViewLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        parse_label(&text).map_err(serde::de::Error::custom)
    }
}

pub fn collapse_laterality(label: ViewLabel) -> NeutralViewLabel {
    label.collapse()
}

pub fn class_index(label: ViewLabel) -> usize {
    label.class_index()
}

/// Neutral view of a class index; panics on indices outside `0..48`.
pub fn neutral_of_class(index: usize) -> usize {
    assert!(index < NUM_CLASSES, "class index {index} out of range");
    index % NUM_NEUTRAL
}

pub fn expand_abbreviation(
    limb: Limb,
    region: Region,
    projection: Projection,
) -> Result<&'static str, TaxonomyError> {
    NeutralViewLabel::new(limb, region, projection).map(|v| v.long_name())
}

/// Uppercases and collapses runs of whitespace to single spaces.
pub(crate) fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_uppercase());
        }
    }
    out
}

/// Parses a label such as `"L FORE CARPUS DLPMO"`.
///
/// Matching is case-insensitive and ignores repeated whitespace. `HOOF` is
/// accepted for `FOOT`.
pub fn parse_label(text: &str) -> Result<ViewLabel, TaxonomyError> {
    let normalized = normalize_text(text);
    let words: Vec<&str> = normalized
        .split(' ')
        .map(|w| if w == "HOOF" { "FOOT" } else { w })
        .collect();
    let unknown = || TaxonomyError::UnknownLabel(String::from(text));
    if words.len() < 4 {
        return Err(unknown());
    }
    let laterality = match words[0] {
        "L" => Laterality::L,
        "R" => Laterality::R,
        _ => return Err(unknown()),
    };
    let limb = match words[1] {
        "FORE" => Limb::Fore,
        "HIND" => Limb::Hind,
        _ => return Err(unknown()),
    };
    let region = match words[2] {
        "CARPUS" => Region::Carpus,
        "FETLOCK" => Region::Fetlock,
        "TARSUS" => Region::Tarsus,
        "STIFLE" => Region::Stifle,
        "FOOT" => Region::Foot,
        _ => return Err(unknown()),
    };
    let projection = match &words[3..] {
        ["DP"] => Projection::Dp,
        ["LM"] => Projection::Lm,
        ["DLPMO"] => Projection::Dlpmo,
        ["DMPLO"] => Projection::Dmplo,
        ["FLEXED", "LM"] => Projection::FlexedLm,
        ["FLEXED", "DP"] => Projection::FlexedDp,
        ["CD", "CR"] => Projection::CdCr,
        ["CDL", "CRMO"] => Projection::CdlCrmo,
        _ => return Err(unknown()),
    };
    ViewLabel::new(laterality, limb, region, projection).map_err(|_| unknown())
}
