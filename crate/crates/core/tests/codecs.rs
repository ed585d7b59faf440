mod common;

use cstream::bitio::Frame;
use cstream::codecs::{decode, encode, CodecId, CodecParams, CodecSpec, Fidelity};
use cstream::workload::{gen_micro, MicroSpec};
use proptest::prelude::*;

const LOSSLESS: [CodecId; 5] = [CodecId::Leb128, CodecId::DeltaLeb128, CodecId::Tcomp32, CodecId::Tdic32, CodecId::Rle];

fn roundtrip(id: CodecId, values: &[u32]) {
    let spec = CodecSpec::new(id);
    let frame = encode(values, &spec).unwrap();
    let wire = Frame::from_bytes(&frame.to_bytes()).unwrap();
    assert_eq!(wire, frame);
    assert_eq!(decode(&wire, &spec).unwrap(), values, "{id}");
}

#[test]
fn golden_frames_are_bit_exact() {
    let cases: [(&str, CodecId, Vec<u32>); 5] = [
        ("leb128_624485", CodecId::Leb128, vec![624485]),
        ("tcomp32_worked", CodecId::Tcomp32, vec![0, 1, 3, 4, u32::MAX]),
        ("tdic32_repeat_1000", CodecId::Tdic32, vec![42; 1000]),
        ("rle_runs", CodecId::Rle, [vec![7, 7, 7, 1, 2, 2], vec![5; 300]].concat()),
        ("rle_no_runs", CodecId::Rle, vec![1, 2, 3, 4]),
    ];
    for (name, id, values) in cases {
        let want = common::golden(name);
        let spec = CodecSpec::new(id);
        assert_eq!(encode(&values, &spec).unwrap(), want, "{name}");
        assert_eq!(decode(&want, &spec).unwrap(), values, "{name}");
    }
}

#[test]
fn worked_examples_by_hand() {
    let spec = |id| CodecSpec::new(id);
    let leb = encode(&[624485], &spec(CodecId::Leb128)).unwrap();
    assert_eq!(leb.payload, [0xE5, 0x8E, 0x26]);
    let t = encode(&[0, 1, 3, 4, u32::MAX], &spec(CodecId::Tcomp32)).unwrap();
    assert_eq!(t.bit_len, 64);
    assert_eq!(t.payload, [0x00, 0x10, 0xE2, 0x9F, 0xFF, 0xFF, 0xFF, 0xFF]);
    // one miss (33 bits) then 999 hits (1 + 12 bits)
    let d = encode(&[42; 1000], &spec(CodecId::Tdic32)).unwrap();
    assert_eq!(d.bit_len, 33 + 999 * 13);
}

#[test]
fn lossless_boundaries() {
    let edges = [0, 1, 127, 128, 255, 256, 16383, 16384, 1 << 21, (1 << 28) - 1, 1 << 31, u32::MAX - 1, u32::MAX];
    let mut values = edges.to_vec();
    values.extend(edges.iter().rev());
    values.extend([u32::MAX, 0, u32::MAX, 0]);
    for id in LOSSLESS {
        roundtrip(id, &values);
        roundtrip(id, &[]);
        roundtrip(id, &[u32::MAX]);
    }
}

#[test]
fn lossless_on_duplicated_micro() {
    let values = gen_micro(&MicroSpec { dup: 0.9, n: 100_000, seed: 3, ..Default::default() }).unwrap();
    for id in LOSSLESS {
        roundtrip(id, &values);
    }
}

#[test]
fn truncated_frames_error_without_panicking() {
    let values = gen_micro(&MicroSpec { range: 1000, dup: 0.5, n: 300, seed: 1 }).unwrap();
    for id in CodecId::ALL {
        let spec = CodecSpec::new(id);
        let frame = encode(&values, &spec).unwrap();
        for cut in [1, 7, 8, 33, frame.bit_len / 2] {
            if cut >= frame.bit_len {
                continue;
            }
            let mut short = frame.clone();
            short.bit_len -= cut;
            short.payload.truncate(short.bit_len.div_ceil(8) as usize);
            // a shorter stream may still parse for byte-oriented codecs; it must not panic
            let _ = decode(&short, &spec);
        }
        let bytes = frame.to_bytes();
        for n in 0..cstream::bitio::FRAME_HEADER_LEN {
            assert!(Frame::from_bytes(&bytes[..n]).is_err());
        }
    }
}

#[test]
fn wrong_codec_is_rejected() {
    let frame = encode(&[1, 2, 3], &CodecSpec::new(CodecId::Tcomp32)).unwrap();
    assert!(decode(&frame, &CodecSpec::new(CodecId::Leb128)).is_err());
}

#[test]
fn lossy_codecs_keep_tuple_count() {
    let values: Vec<u32> = (0..5000).map(|i| 30000 + ((i as f64 / 50.0).sin() * 20000.0) as u32).collect();
    for id in CodecId::ALL.into_iter().filter(|c| c.fidelity() == Fidelity::Lossy) {
        let spec = CodecSpec::new(id);
        let back = decode(&encode(&values, &spec).unwrap(), &spec).unwrap();
        assert_eq!(back.len(), values.len(), "{id}");
    }
}

#[test]
fn pla_respects_epsilon_on_random_signals() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let eps = rng.random_range(0.0..50.0f64).floor();
        let n = rng.random_range(1..2000);
        let mut x = rng.random_range(0.0..1e6f64);
        let values: Vec<u32> = (0..n)
            .map(|_| {
                x = (x + rng.random_range(-200.0..200.0)).clamp(0.0, u32::MAX as f64);
                x as u32
            })
            .collect();
        let spec = CodecSpec::with_params(CodecId::Pla, CodecParams { epsilon: eps, ..Default::default() });
        let back = decode(&encode(&values, &spec).unwrap(), &spec).unwrap();
        let worst = values.iter().zip(&back).map(|(a, b)| a.abs_diff(*b)).max().unwrap();
        assert!(f64::from(worst) <= eps, "eps {eps}, error {worst}");
    }
}

proptest! {
    #[test]
    fn lossless_roundtrip(values in prop::collection::vec(any::<u32>(), 0..400), small in prop::collection::vec(0u32..8, 0..400)) {
        for id in LOSSLESS {
            roundtrip(id, &values);
            roundtrip(id, &small);
        }
    }

    #[test]
    fn random_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64), wire in 1u8..=10) {
        let mut framed = b"CSTR".to_vec();
        framed.push(wire);
        framed.extend((bytes.len() as u64 * 8).to_le_bytes());
        framed.extend(&bytes);
        if let Ok(frame) = Frame::from_bytes(&framed) {
            let _ = decode(&frame, &CodecSpec::new(frame.codec));
        }
    }
}

#[test]
fn format_doc_matches_golden_frames() {
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/formats.md")).unwrap();
    let compact: String = doc.chars().filter(|c| !c.is_whitespace()).collect();
    for name in ["leb128_624485", "tcomp32_worked", "tdic32_repeat_1000", "rle_runs", "rle_no_runs"] {
        let path = format!("{}/tests/golden/{name}.hex", env!("CARGO_MANIFEST_DIR"));
        let hex = std::fs::read_to_string(path).unwrap();
        let hex = hex.trim();
        let shown = &hex[..hex.len().min(40)];
        assert!(compact.contains(shown), "docs/formats.md is missing {name}");
    }
    let pla = encode(&[5, 7, 9], &CodecSpec::with_params(CodecId::Pla, CodecParams { epsilon: 0.0, ..Default::default() })).unwrap();
    let hex: String = pla.payload.iter().map(|b| format!("{b:02x}")).collect();
    assert!(compact.contains(&hex), "PLA example {hex}");
}
