//! Minimal DICOM Part-10 reader: explicit VR little endian, uncompressed,
//! single-frame 16-bit monochrome.

use std::collections::BTreeMap;
use std::fmt;

use radview_core::Image16;
use thiserror::Error;

pub const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u16, pub u16);

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.0, self.1)
    }
}

pub const TRANSFER_SYNTAX: Tag = Tag(0x0002, 0x0010);
pub const MODALITY: Tag = Tag(0x0008, 0x0060);
pub const SERIES_DESCRIPTION: Tag = Tag(0x0008, 0x103E);
pub const BODY_PART_EXAMINED: Tag = Tag(0x0018, 0x0015);
pub const IMAGE_LATERALITY: Tag = Tag(0x0020, 0x0062);
pub const PHOTOMETRIC: Tag = Tag(0x0028, 0x0004);
pub const ROWS: Tag = Tag(0x0028, 0x0010);
pub const COLUMNS: Tag = Tag(0x0028, 0x0011);
pub const BITS_ALLOCATED: Tag = Tag(0x0028, 0x0100);
pub const BITS_STORED: Tag = Tag(0x0028, 0x0101);
pub const PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

const ITEM: Tag = Tag(0xFFFE, 0xE000);
const ITEM_END: Tag = Tag(0xFFFE, 0xE00D);
const SEQUENCE_END: Tag = Tag(0xFFFE, 0xE0DD);
const UNDEFINED: u32 = 0xFFFF_FFFF;

const REQUIRED: [Tag; 7] = [
    MODALITY,
    PHOTOMETRIC,
    ROWS,
    COLUMNS,
    BITS_ALLOCATED,
    BITS_STORED,
    PIXEL_DATA,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DicomError {
    #[error("missing DICM magic at offset 128")]
    BadMagic,
    #[error("unsupported transfer syntax {0:?}")]
    UnsupportedTransferSyntax(String),
    #[error("element truncated at byte {offset}")]
    TruncatedElement { offset: usize },
    #[error("missing required tag {0}")]
    MissingRequiredTag(Tag),
    #[error("tag {found} follows {previous}; tags must increase")]
    TagOrder { previous: Tag, found: Tag },
    #[error("undefined length on non-sequence element {0}")]
    UndefinedLength(Tag),
    #[error("tag {0} has a malformed value")]
    BadValue(Tag),
    #[error("unsupported modality {0:?}")]
    UnsupportedModality(String),
    #[error("neither SeriesDescription nor BodyPartExamined present")]
    NoViewText,
    #[error("pixel data is {found} bytes, expected {expected}")]
    PixelLengthMismatch { expected: usize, found: usize },
    #[error("unsupported photometric interpretation {0:?}")]
    UnsupportedPhotometric(String),
    #[error("unsupported pixel layout: {bits_allocated} bits allocated, {bits_stored} stored")]
    UnsupportedBits { bits_allocated: u16, bits_stored: u16 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub vr: [u8; 2],
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicomObject {
    pub transfer_syntax: String,
    /// Top-level dataset elements; sequence contents are skipped.
    pub elements: BTreeMap<Tag, Element>,
    pub rows: u16,
    pub columns: u16,
    pub bits_allocated: u16,
    pub bits_stored: u16,
    pub photometric: String,
}

impl DicomObject {
    pub fn get(&self, tag: Tag) -> Option<&Element> {
        self.elements.get(&tag)
    }

    /// Text value with trailing padding removed.
    pub fn string(&self, tag: Tag) -> Option<String> {
        self.get(tag).map(|e| text(&e.value))
    }

    pub fn pixel_data(&self) -> &[u8] {
        self.get(PIXEL_DATA).map_or(&[], |e| &e.value)
    }
}

fn text(v: &[u8]) -> String {
    String::from_utf8_lossy(v)
        .trim_end_matches(['\0', ' '])
        .trim_start()
        .to_string()
}

fn long_length(vr: &[u8; 2]) -> bool {
    matches!(
        vr,
        b"OB" | b"OD" | b"OF" | b"OL" | b"OV" | b"OW" | b"SQ" | b"SV" | b"UC" | b"UN" | b"UR" | b"UT" | b"UV"
    )
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

struct Header {
    tag: Tag,
    vr: [u8; 2],
    length: u32,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DicomError> {
        let truncated = DicomError::TruncatedElement { offset: self.pos };
        let end = self.pos.checked_add(n).ok_or(truncated.clone())?;
        let s = self.bytes.get(self.pos..end).ok_or(truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, DicomError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, DicomError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek_group(&self) -> Option<u16> {
        self.bytes
            .get(self.pos..self.pos + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn tag(&mut self) -> Result<Tag, DicomError> {
        Ok(Tag(self.u16()?, self.u16()?))
    }

    /// Reads an explicit-VR element header. Item and delimiter tags carry no VR.
    fn header(&mut self) -> Result<Header, DicomError> {
        let tag = self.tag()?;
        if tag.0 == 0xFFFE {
            return Ok(Header {
                tag,
                vr: [0, 0],
                length: self.u32()?,
            });
        }
        let vr: [u8; 2] = self.take(2)?.try_into().unwrap();
        let length = if long_length(&vr) {
            self.take(2)?;
            self.u32()?
        } else {
            self.u16()? as u32
        };
        Ok(Header { tag, vr, length })
    }

    /// Skips the items of a sequence whose header has just been read.
    fn skip_sequence(&mut self, length: u32) -> Result<(), DicomError> {
        if length != UNDEFINED {
            self.take(length as usize)?;
            return Ok(());
        }
        loop {
            let h = self.header()?;
            match h.tag {
                SEQUENCE_END => return Ok(()),
                ITEM if h.length != UNDEFINED => {
                    self.take(h.length as usize)?;
                }
                ITEM => self.skip_item()?,
                _ => return Err(DicomError::BadValue(h.tag)),
            }
        }
    }

    /// Skips the elements of an undefined-length item up to its delimiter.
    fn skip_item(&mut self) -> Result<(), DicomError> {
        loop {
            let h = self.header()?;
            if h.tag == ITEM_END {
                return Ok(());
            }
            self.skip_value(&h)?;
        }
    }

    fn skip_value(&mut self, h: &Header) -> Result<(), DicomError> {
        if &h.vr == b"SQ" {
            self.skip_sequence(h.length)
        } else if h.length == UNDEFINED {
            Err(DicomError::UndefinedLength(h.tag))
        } else {
            self.take(h.length as usize).map(|_| ())
        }
    }
}

fn us(elements: &BTreeMap<Tag, Element>, tag: Tag) -> Result<u16, DicomError> {
    let e = elements.get(&tag).ok_or(DicomError::MissingRequiredTag(tag))?;
    match e.value.as_slice() {
        [a, b, ..] => Ok(u16::from_le_bytes([*a, *b])),
        _ => Err(DicomError::BadValue(tag)),
    }
}

/// Reads ordered elements until the end of input or, when `meta` is set,
/// the first element outside group 0002.
fn read_elements(c: &mut Cursor<'_>, meta: bool) -> Result<BTreeMap<Tag, Element>, DicomError> {
    let mut elements = BTreeMap::new();
    let mut previous: Option<Tag> = None;
    while !c.at_end() {
        if meta && c.peek_group() != Some(0x0002) {
            break;
        }
        let h = c.header()?;
        if let Some(p) = previous {
            if h.tag <= p {
                return Err(DicomError::TagOrder { previous: p, found: h.tag });
            }
        }
        previous = Some(h.tag);
        if &h.vr == b"SQ" {
            c.skip_sequence(h.length)?;
            continue;
        }
        if h.length == UNDEFINED {
            return Err(DicomError::UndefinedLength(h.tag));
        }
        let value = c.take(h.length as usize)?.to_vec();
        elements.insert(h.tag, Element { vr: h.vr, value });
    }
    Ok(elements)
}

pub fn parse_dicom(bytes: &[u8]) -> Result<DicomObject, DicomError> {
    if bytes.get(128..132) != Some(b"DICM") {
        return Err(DicomError::BadMagic);
    }
    let mut c = Cursor { bytes, pos: 132 };
    let meta = read_elements(&mut c, true)?;
    let transfer_syntax = meta
        .get(&TRANSFER_SYNTAX)
        .map(|e| text(&e.value))
        .ok_or(DicomError::MissingRequiredTag(TRANSFER_SYNTAX))?;
    if transfer_syntax != EXPLICIT_VR_LE {
        return Err(DicomError::UnsupportedTransferSyntax(transfer_syntax));
    }
    let elements = read_elements(&mut c, false)?;
    for tag in REQUIRED {
        if !elements.contains_key(&tag) {
            return Err(DicomError::MissingRequiredTag(tag));
        }
    }
    Ok(DicomObject {
        transfer_syntax,
        rows: us(&elements, ROWS)?,
        columns: us(&elements, COLUMNS)?,
        bits_allocated: us(&elements, BITS_ALLOCATED)?,
        bits_stored: us(&elements, BITS_STORED)?,
        photometric: text(&elements[&PHOTOMETRIC].value),
        elements,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photometric {
    Monochrome1,
    Monochrome2,
}

impl Photometric {
    pub fn parse(s: &str) -> Result<Self, DicomError> {
        match s {
            "MONOCHROME1" => Ok(Photometric::Monochrome1),
            "MONOCHROME2" => Ok(Photometric::Monochrome2),
            other => Err(DicomError::UnsupportedPhotometric(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiographMeta {
    pub modality: String,
    pub raw_view: String,
    pub laterality: Option<String>,
    pub photometric: Photometric,
}

/// View text comes from SeriesDescription, falling back to BodyPartExamined.
pub fn extract_meta(obj: &DicomObject) -> Result<RadiographMeta, DicomError> {
    let modality = obj.string(MODALITY).unwrap_or_default();
    if modality != "CR" && modality != "DX" {
        return Err(DicomError::UnsupportedModality(modality));
    }
    let nonempty = |t| obj.string(t).filter(|s| !s.is_empty());
    let raw_view = nonempty(SERIES_DESCRIPTION)
        .or_else(|| nonempty(BODY_PART_EXAMINED))
        .ok_or(DicomError::NoViewText)?;
    Ok(RadiographMeta {
        modality,
        raw_view,
        laterality: nonempty(IMAGE_LATERALITY),
        photometric: Photometric::parse(&obj.photometric)?,
    })
}

/// Row-major pixels with MONOCHROME1 inverted so that 0 is darkest.
pub fn extract_pixels(obj: &DicomObject) -> Result<Image16, DicomError> {
    let photometric = Photometric::parse(&obj.photometric)?;
    if obj.bits_allocated != 16 || !(1..=16).contains(&obj.bits_stored) {
        return Err(DicomError::UnsupportedBits {
            bits_allocated: obj.bits_allocated,
            bits_stored: obj.bits_stored,
        });
    }
    let (w, h) = (obj.columns as usize, obj.rows as usize);
    let raw = obj.pixel_data();
    let expected = w * h * 2;
    if raw.len() != expected || w == 0 || h == 0 {
        return Err(DicomError::PixelLengthMismatch {
            expected,
            found: raw.len(),
        });
    }
    let maxval = ((1u32 << obj.bits_stored) - 1) as u16;
    let data = raw
        .chunks_exact(2)
        .map(|c| {
            let v = u16::from_le_bytes([c[0], c[1]]) & maxval;
            match photometric {
                Photometric::Monochrome1 => maxval - v,
                Photometric::Monochrome2 => v,
            }
        })
        .collect();
    Ok(Image16::new(w, h, data).expect("dimensions checked"))
}
