use super::*;
use crate::test_support::toy_model;

#[test]
fn round_trip_is_bit_exact() {
    let m = toy_model();
    let bytes = m.to_bytes();
    let back = DsmModel::from_bytes(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.to_bytes(), bytes);
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dsm");
    let m = toy_model();
    save_model(&m, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), m);
    assert!(matches!(load_model(dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn bad_magic_and_version() {
    let mut bytes = toy_model().to_bytes();
    bytes[..4].copy_from_slice(b"XXXX");
    assert!(matches!(DsmModel::from_bytes(&bytes), Err(Error::BadMagic(m)) if &m == b"XXXX"));
    let mut bytes = toy_model().to_bytes();
    bytes[4..6].copy_from_slice(&7u16.to_le_bytes());
    assert!(matches!(
        DsmModel::from_bytes(&bytes),
        Err(Error::UnsupportedVersion { found: 7, expected: VERSION })
    ));
}

#[test]
fn truncation_names_the_block() {
    let m = toy_model();
    let bytes = m.to_bytes();
    // block boundaries from the length prefixes
    let mut bounds = Vec::new();
    let mut at = 10;
    for _ in 0..4 {
        let len = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        bounds.push((at, at + 8 + len));
        at += 8 + len;
    }
    assert_eq!(at, bytes.len());
    let names = ["normalization", "eigenbasis", "noise-model", "envelope-config"];
    for cut in 0..bytes.len() {
        let err = DsmModel::from_bytes(&bytes[..cut]).unwrap_err();
        let expected = if cut < 10 {
            "header"
        } else {
            names[bounds.iter().position(|&(a, b)| (a..b).contains(&cut)).unwrap()]
        };
        match err {
            Error::Truncated { block } => assert_eq!(block, expected, "cut at {cut}"),
            other => panic!("cut at {cut}: {other}"),
        }
    }
}

#[test]
fn trailing_bytes_are_rejected() {
    let mut bytes = toy_model().to_bytes();
    bytes.push(0);
    assert!(matches!(DsmModel::from_bytes(&bytes), Err(Error::Corrupt { block: "trailer", .. })));
}

#[test]
fn footprint_is_small() {
    assert!(toy_model().to_bytes().len() <= 256 * 1024);
}
