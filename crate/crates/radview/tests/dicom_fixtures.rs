use std::fs;
use std::path::PathBuf;

use radview::dicom::{extract_meta, extract_pixels, parse_dicom, DicomError, Photometric, Tag};
use serde_json::Value;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dicom")
}

fn variant(e: &DicomError) -> &'static str {
    match e {
        DicomError::BadMagic => "BadMagic",
        DicomError::UnsupportedTransferSyntax(_) => "UnsupportedTransferSyntax",
        DicomError::TruncatedElement { .. } => "TruncatedElement",
        DicomError::MissingRequiredTag(_) => "MissingRequiredTag",
        DicomError::TagOrder { .. } => "TagOrder",
        DicomError::UndefinedLength(_) => "UndefinedLength",
        DicomError::BadValue(_) => "BadValue",
        DicomError::UnsupportedModality(_) => "UnsupportedModality",
        DicomError::NoViewText => "NoViewText",
        DicomError::PixelLengthMismatch { .. } => "PixelLengthMismatch",
        DicomError::UnsupportedPhotometric(_) => "UnsupportedPhotometric",
        DicomError::UnsupportedBits { .. } => "UnsupportedBits",
    }
}

#[test]
fn fixture_corpus_matches_writer_expectations() {
    let dir = fixture_dir();
    let expected: serde_json::Map<String, Value> =
        serde_json::from_str(&fs::read_to_string(dir.join("expected.json")).unwrap()).unwrap();
    assert!(expected.len() >= 15);
    for (name, want) in &expected {
        let bytes = fs::read(dir.join(name)).unwrap();
        let parsed = parse_dicom(&bytes);
        let obj = match (&parsed, want["parse"].as_str().unwrap()) {
            (Ok(obj), "ok") => obj,
            (Err(e), kind) => {
                assert_eq!(variant(e), kind, "{name}: {e}");
                if let (DicomError::MissingRequiredTag(tag), Some(t)) = (e, want.get("tag")) {
                    let t: Vec<u16> = t.as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as u16).collect();
                    assert_eq!(*tag, Tag(t[0], t[1]), "{name}");
                }
                continue;
            }
            (Ok(_), kind) => panic!("{name}: parsed but expected {kind}"),
        };
        assert_eq!(obj.rows as u64, want["rows"].as_u64().unwrap(), "{name}");
        assert_eq!(obj.columns as u64, want["cols"].as_u64().unwrap(), "{name}");
        assert_eq!(obj.transfer_syntax, "1.2.840.10008.1.2.1");
        assert_eq!(obj.string(radview::dicom::MODALITY).unwrap(), want["modality"].as_str().unwrap());
        let meta = match (extract_meta(obj), want["meta"].as_str().unwrap()) {
            (Ok(m), "ok") => m,
            (Err(e), kind) => {
                assert_eq!(variant(&e), kind, "{name}: {e}");
                continue;
            }
            (Ok(_), kind) => panic!("{name}: meta ok but expected {kind}"),
        };
        assert_eq!(meta.raw_view, want["raw_view"].as_str().unwrap(), "{name}");
        assert_eq!(meta.laterality.as_deref(), want["laterality"].as_str(), "{name}");
        let photometric = match want["photometric"].as_str().unwrap() {
            "MONOCHROME1" => Photometric::Monochrome1,
            _ => Photometric::Monochrome2,
        };
        assert_eq!(meta.photometric, photometric, "{name}");
        match (&want["pixels"], extract_pixels(obj)) {
            (Value::Array(px), Ok(img)) => {
                let px: Vec<u16> = px.iter().map(|v| v.as_u64().unwrap() as u16).collect();
                assert_eq!(img.data(), px.as_slice(), "{name}");
                assert_eq!((img.height(), img.width()), (obj.rows as usize, obj.columns as usize));
            }
            (Value::String(kind), Err(e)) => assert_eq!(variant(&e), kind, "{name}"),
            (w, got) => panic!("{name}: expected {w}, got {got:?}"),
        }
    }
}

#[test]
fn every_truncation_of_a_valid_file_is_a_typed_error() {
    let bytes = fs::read(fixture_dir().join("sequences.dcm")).unwrap();
    assert!(parse_dicom(&bytes).is_ok());
    for cut in 0..bytes.len() {
        let err = parse_dicom(&bytes[..cut]).unwrap_err();
        assert!(
            matches!(
                err,
                DicomError::BadMagic | DicomError::TruncatedElement { .. } | DicomError::MissingRequiredTag(_)
            ),
            "cut {cut}: {err:?}"
        );
    }
}

#[test]
fn monochrome2_pixels_round_trip_the_writer() {
    let bytes = fs::read(fixture_dir().join("cr_carpus.dcm")).unwrap();
    let obj = parse_dicom(&bytes).unwrap();
    let img = extract_pixels(&obj).unwrap();
    let raw: Vec<u16> = obj
        .pixel_data()
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    assert_eq!(img.data(), raw.as_slice());
}
