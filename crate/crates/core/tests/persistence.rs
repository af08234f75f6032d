mod common;

use common::{c, random_matrix, rng};
use proptest::prelude::*;
use sclrom::datagen::gen_periodic_history;
use sclrom::io::{
    decode_model, decode_snapshots, encode_matrix, encode_model, read_model, read_snapshots, write_model,
    write_snapshots, SnapshotFormat,
};
use sclrom::ohf::SnapshotHistory;
use sclrom::{fit, predict, CMat, Error, FitOptions, SclRomModel};

fn bits(x: &CMat) -> Vec<(u64, u64)> {
    x.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
}

fn desk_model() -> (SnapshotHistory, SclRomModel) {
    let h = gen_periodic_history(64, 8, 1).unwrap();
    let (model, _) = fit(&h, &FitOptions::default()).unwrap();
    (h, model)
}

#[test]
fn csv_examples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let one = SnapshotHistory::new(CMat::from_element(1, 1, c(2.0, 0.0))).unwrap();
    write_snapshots(&one, &path, SnapshotFormat::Csv).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "1,1\n2\n");

    let two = SnapshotHistory::new(CMat::from_column_slice(2, 1, &[c(1.0, 2.0), c(-3.0, 0.0)])).unwrap();
    write_snapshots(&two, &path, SnapshotFormat::Csv).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "2,1\n1+2i\n-3\n");
    assert_eq!(read_snapshots(&path).unwrap(), two);

    std::fs::write(&path, "1,1\n1+2j\n").unwrap();
    assert!(matches!(read_snapshots(&path), Err(Error::Parse { line: 2, column: 1, .. })));
}

#[test]
fn binary_roundtrip_of_seeded_history() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.bin");
    let h = gen_periodic_history(64, 8, 3).unwrap();
    write_snapshots(&h, &path, SnapshotFormat::Binary).unwrap();
    let back = read_snapshots(&path).unwrap();
    assert_eq!(bits(back.data()), bits(h.data()));
}

#[test]
fn truncated_binary_names_byte_counts() {
    let h = SnapshotHistory::new(random_matrix(&mut rng(1), 3, 2)).unwrap();
    let bytes = encode_matrix(h.data());
    match decode_snapshots(&bytes[..bytes.len() - 10]) {
        Err(Error::DimensionMismatch(msg)) => assert!(msg.contains("96") && msg.contains("86"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_carries_path() {
    let err = read_snapshots("/definitely/not/here.bin").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/definitely/not/here.bin"));
}

#[test]
fn model_roundtrip_preserves_predictions_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let (_, model) = desk_model();
    write_model(&model, &path).unwrap();
    let back = read_model(&path).unwrap();
    assert_eq!(back.epsilon_achieved().to_bits(), model.epsilon_achieved().to_bits());
    assert_eq!(back.epsilon_target().to_bits(), model.epsilon_target().to_bits());
    for t in 0..2 * model.period() {
        let (a, b) = (predict(&model, t), predict(&back, t));
        assert_eq!(bits(&CMat::from_columns(&[a])), bits(&CMat::from_columns(&[b])), "t = {t}");
    }
}

fn replace_line(bytes: &[u8], from: &str, to: &str) -> Vec<u8> {
    let pos = bytes
        .windows(from.len())
        .position(|w| w == from.as_bytes())
        .expect("line present");
    let mut out = bytes[..pos].to_vec();
    out.extend_from_slice(to.as_bytes());
    out.extend_from_slice(&bytes[pos + from.len()..]);
    out
}

#[test]
fn corrupted_manifests_are_rejected() {
    let (_, model) = desk_model();
    let bytes = encode_model(&model);

    let wrong_m = replace_line(&bytes, "\nm: 8\n", "\nm: 7\n");
    assert!(matches!(decode_model(&wrong_m), Err(Error::InvariantViolation(_))));

    let wrong_period = replace_line(&bytes, "\nperiod: 8\n", "\nperiod: 9\n");
    assert!(matches!(decode_model(&wrong_period), Err(Error::InvariantViolation(_))));

    let version = replace_line(&bytes, "version: 1\n", "version: 99\n");
    assert!(matches!(decode_model(&version), Err(Error::VersionUnsupported(v)) if v == "99"));

    let eps = format!("epsilon_achieved: {:e}\n", model.epsilon_achieved());
    let wrong_eps = replace_line(&bytes, &eps, "epsilon_achieved: 1e-3\n");
    assert!(matches!(decode_model(&wrong_eps), Err(Error::InvariantViolation(_))));

    let rho = format!("rho: {:e} 0e0\n", model.ohf().rho().re);
    let wrong_rho = replace_line(&bytes, &rho, "rho: 1e0 0e0\n");
    assert!(matches!(decode_model(&wrong_rho), Err(Error::InvariantViolation(_))));

    let mut trailing = bytes.clone();
    trailing.push(7);
    assert!(matches!(decode_model(&trailing), Err(Error::InvariantViolation(_))));

    assert!(matches!(decode_model(b"garbage"), Err(Error::BadMagic)));
}

#[test]
fn corrupted_vhat_payload_is_rejected() {
    let (_, model) = desk_model();
    let mut bytes = encode_model(&model);
    // flip a byte in the middle of the second block (Vhat)
    let manifest_end = bytes.windows(5).position(|w| w == b"\nend\n").unwrap() + 5;
    let block = 32 + 64 * 8 * 16;
    let target = manifest_end + block + 32 + 100;
    bytes[target] ^= 0x40;
    assert!(matches!(decode_model(&bytes), Err(Error::InvariantViolation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn snapshot_roundtrips_are_bitwise(seed in any::<u64>(), n in 1usize..10, m in 1usize..6, real in any::<bool>(), csv in any::<bool>()) {
        let mut x = random_matrix(&mut rng(seed), n, m);
        if real {
            x.iter_mut().for_each(|z| z.im = 0.0);
        }
        // extreme magnitudes exercise the exponent branch of the CSV writer
        x[(0, 0)].re *= 1e-300;
        let h = SnapshotHistory::new(x).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h");
        let format = if csv { SnapshotFormat::Csv } else { SnapshotFormat::Binary };
        write_snapshots(&h, &path, format).unwrap();
        let back = read_snapshots(&path).unwrap();
        prop_assert_eq!(bits(back.data()), bits(h.data()));
    }
}
