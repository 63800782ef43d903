use radview::checkpoint::{self, decode, encode, CheckpointError, NamedTensor, TensorValues};
use radview::pgm::{read_pgm16, write_pgm16, PgmError};
use radview::records::{format_records, parse_records};
use radview_core::archzoo::{build_mini_resnet, MiniResNetConfig};
use radview_core::synthgen::{generate_corpus, PhantomConfig};
use radview_core::Image16;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn pgm16_round_trips_100_random_images() {
    let mut rng = StdRng::seed_from_u64(11);
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let data: Vec<u16> = (0..w * h).map(|_| rng.random()).collect();
        let img = Image16::new(w, h, data).unwrap();
        let bytes = write_pgm16(&img);
        assert_eq!(read_pgm16(&bytes).unwrap(), img, "case {i}");
        assert_eq!(write_pgm16(&read_pgm16(&bytes).unwrap()), bytes);
    }
}

#[test]
fn pgm_reader_accepts_comments_and_8_bit() {
    let bytes = b"P5\n# comment\n2 1\n255\n\x05\xff";
    assert_eq!(read_pgm16(bytes).unwrap().data(), &[5, 255]);
    assert!(matches!(read_pgm16(b"P5\n2 2\n65535\n\0\0"), Err(PgmError::TruncatedPixels { .. })));
    assert!(matches!(read_pgm16(b"P2\n1 1\n255\n0"), Err(PgmError::BadHeader(_))));
}

fn random_tensor(rng: &mut StdRng, k: usize) -> NamedTensor {
    let rank = rng.random_range(0..=4);
    let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=5)).collect();
    let n: usize = shape.iter().product();
    let values = if rng.random_bool(0.5) {
        TensorValues::F32((0..n).map(|_| f32::from_bits(rng.random())).collect())
    } else {
        TensorValues::F64((0..n).map(|_| f64::from_bits(rng.random())).collect())
    };
    NamedTensor {
        name: format!("layer{k}.w\u{e9}ight"),
        shape,
        values,
    }
}

#[test]
fn checkpoint_round_trips_100_random_instances() {
    let mut rng = StdRng::seed_from_u64(12);
    for i in 0..100 {
        let tensors: Vec<NamedTensor> = (0..rng.random_range(0..6)).map(|k| random_tensor(&mut rng, k)).collect();
        let bytes = encode(&tensors);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.len(), tensors.len());
        for (a, b) in tensors.iter().zip(&back) {
            assert_eq!((&a.name, &a.shape), (&b.name, &b.shape), "case {i}");
            assert!(a.values.bits_eq(&b.values), "case {i}");
        }
        assert_eq!(encode(&back), bytes);
    }
}

#[test]
fn checkpoint_errors_are_typed() {
    let t = vec![NamedTensor {
        name: "a".into(),
        shape: vec![2],
        values: TensorValues::F32(vec![1.0, 2.0]),
    }];
    let bytes = encode(&t);
    assert!(matches!(decode(b"NOPE1"), Err(CheckpointError::BadMagic)));
    assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated)));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode(&extra), Err(CheckpointError::TrailingBytes(1))));
    let mut v2 = bytes.clone();
    v2[5] = 2;
    assert!(matches!(decode(&v2), Err(CheckpointError::UnsupportedVersion(2))));
}

#[test]
fn model_checkpoint_round_trip() {
    let cfg = MiniResNetConfig {
        stage_blocks: vec![1, 1],
        base_channels: 4,
        input_side: 16,
        input_channels: 1,
        num_classes: 48,
    };
    let a = build_mini_resnet::<f32>(&cfg, 1).unwrap();
    let mut b = build_mini_resnet::<f32>(&cfg, 2).unwrap();
    assert_ne!(checkpoint::model_tensors(&a), checkpoint::model_tensors(&b));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ervc");
    checkpoint::save(&path, &checkpoint::model_tensors(&a)).unwrap();
    checkpoint::load_into(&mut b, &checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(checkpoint::model_tensors(&a), checkpoint::model_tensors(&b));
    let mut other = build_mini_resnet::<f32>(&MiniResNetConfig { base_channels: 5, ..cfg }, 0).unwrap();
    assert!(checkpoint::load_into(&mut other, &checkpoint::load(&path).unwrap()).is_err());
}

#[test]
fn metadata_csv_round_trip() {
    let cfg = PhantomConfig { side: 16, ..PhantomConfig::default() };
    let records: Vec<_> = generate_corpus(2, &cfg).into_iter().map(|(r, _)| r).collect();
    let text = format_records(&records);
    assert!(text.starts_with("set_id,file,raw_view,label,has_marker,redacted,quarter_turns,mirror,split\n"));
    assert_eq!(parse_records(&text).unwrap(), records);
    assert!(parse_records("set_id,file\n").is_err());
}
