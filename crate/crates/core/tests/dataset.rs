use std::io::Cursor;

use proptest::prelude::*;
use qecw::dataset::{
    ingest_raw, load_dataset, parse_raw_text, read_dataset, read_raw, save_dataset, serialize_raw, subwindow,
    subwindow_records, write_dataset, write_raw, DatasetHeader, LabelBasis, NoiseDescriptor, RawRecord, RawSchema,
};
use qecw::sim::{build_memory_circuit, propagate, sample_batch, sample_records, Fault, Instruction, NoiseParams};
use qecw::{Basis, CodeKind, CodeLayout, DataPoint, DetectorEvent, Error, FeatureMode, Labels, PauliType};

fn header(kind: CodeKind, d: u16, rounds: u16, mode: FeatureMode) -> DatasetHeader {
    DatasetHeader {
        kind,
        distance: d,
        rounds,
        basis: LabelBasis::Z,
        mode,
        noise: NoiseDescriptor::Circuit(vec![1e-3, 5e-3]),
        count: 0,
    }
}

#[test]
fn large_dataset_round_trips_through_a_file() {
    let layout = CodeLayout::rotated_surface(5).unwrap();
    let c = build_memory_circuit(&layout, 5, Basis::Z, &NoiseParams::uniform(5e-3).unwrap()).unwrap();
    let points = sample_batch(&c, 17, 100_000);
    let h = header(CodeKind::RotatedSurface, 5, 5, FeatureMode::Circuit);
    let dir = std::env::temp_dir().join(format!("qecw-dataset-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("shots.qgd");
    save_dataset(&path, &h, &points).unwrap();
    let (h2, back) = load_dataset(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(h2.count, 100_000);
    assert_eq!(DatasetHeader { count: 0, ..h2 }, h);
    assert_eq!(back, points);
}

#[test]
fn corrupted_files_are_rejected() {
    let h = header(CodeKind::Repetition, 3, 2, FeatureMode::Repetition);
    let p = DataPoint {
        detectors: vec![DetectorEvent { kind: PauliType::Z, x2: 1, y2: 0, t: 1 }],
        labels: Labels::z(true),
    };
    let mut buf = Vec::new();
    write_dataset(&mut buf, &h, &[p.clone(), p]).unwrap();
    assert!(matches!(read_dataset(&mut Cursor::new(&buf[..buf.len() - 3])), Err(Error::Format(_))));
    let mut wrong = buf.clone();
    wrong[3] = b'7';
    assert!(matches!(read_dataset(&mut Cursor::new(&wrong)), Err(Error::Version { .. })));
    let mut extra = buf.clone();
    extra.push(0);
    assert!(matches!(read_dataset(&mut Cursor::new(&extra)), Err(Error::Format(_))));
}

fn schema(kind: CodeKind, distance: usize, rounds: usize, basis: Basis) -> RawSchema {
    RawSchema { kind, distance, rounds, basis }
}

#[test]
fn ingest_reproduces_simulator_detectors() {
    let cases = [
        schema(CodeKind::Repetition, 5, 4, Basis::Z),
        schema(CodeKind::RotatedSurface, 3, 3, Basis::Z),
        schema(CodeKind::RotatedSurface, 5, 2, Basis::X),
    ];
    for s in cases {
        let c = build_memory_circuit(&s.layout().unwrap(), s.rounds, s.basis, &NoiseParams::uniform(0.02).unwrap())
            .unwrap();
        let recs = sample_records(&c, 9, 3000);
        let raw = serialize_raw(&c, &recs);
        let mut bytes = Vec::new();
        write_raw(&mut bytes, &s, &raw).unwrap();
        assert_eq!(bytes.len(), 3000 * s.row_bytes().unwrap());
        let back = read_raw(&mut Cursor::new(bytes), &s).unwrap();
        assert_eq!(back, raw);
        let mut ingested = ingest_raw(&s, &back).unwrap();
        let mut direct = sample_batch(&c, 9, 3000);
        for p in ingested.iter_mut().chain(direct.iter_mut()) {
            p.detectors.sort();
        }
        assert_eq!(ingested, direct, "{s:?}");
    }
}

#[test]
fn sidecar_round_trips_and_text_rows_parse() {
    let s = schema(CodeKind::Repetition, 25, 3, Basis::Z);
    assert_eq!(RawSchema::from_sidecar(&s.to_sidecar().unwrap()).unwrap(), s);
    let small = schema(CodeKind::Repetition, 3, 1, Basis::Z);
    let recs = parse_raw_text(Cursor::new("000 01 010\n"), &small);
    assert!(recs.is_err());
    let recs = parse_raw_text(Cursor::new("00001010\n"), &small).unwrap();
    assert_eq!(recs[0].ancilla, vec![vec![false, true]]);
    assert_eq!(recs[0].final_data, vec![false, true, false]);
    let p = &ingest_raw(&small, &recs).unwrap()[0];
    let got: Vec<(i32, u32)> = p.detectors.iter().map(|d| (d.x2, d.t)).collect();
    assert_eq!(got, vec![(3, 1), (1, 2)]);
    assert_eq!(p.labels, Labels::z(false));
}

#[test]
fn windows_of_a_long_chain() {
    let s = schema(CodeKind::Repetition, 25, 3, Basis::Z);
    let c = build_memory_circuit(&s.layout().unwrap(), 3, Basis::Z, &NoiseParams::uniform(0.01).unwrap()).unwrap();
    let raw = serialize_raw(&c, &sample_records(&c, 1, 200));
    let windows = subwindow(&s, &raw, 3).unwrap();
    assert_eq!(windows.len(), 23);
    assert!(windows.iter().all(|w| w.len() == 200));
    assert!(subwindow(&s, &raw, 26).is_err());
    assert!(subwindow(&schema(CodeKind::RotatedSurface, 5, 3, Basis::Z), &[], 3).is_err());
}

fn bit_flip_site(c: &qecw::sim::Circuit, qubit: u32, round: usize) -> usize {
    c.instructions
        .iter()
        .enumerate()
        .filter(|(_, ins)| matches!(ins, Instruction::BitFlip { qubit: q, .. } if *q == qubit))
        .nth(round)
        .unwrap()
        .0
}

#[test]
fn windows_match_direct_small_circuits() {
    let (big, small, rounds) = (7usize, 3usize, 3usize);
    let noise = NoiseParams::data_bit_flip(0.1).unwrap();
    let cb = build_memory_circuit(&CodeLayout::repetition(big).unwrap(), rounds, Basis::Z, &noise).unwrap();
    let cs = build_memory_circuit(&CodeLayout::repetition(small).unwrap(), rounds, Basis::Z, &noise).unwrap();
    let s = schema(CodeKind::Repetition, big, rounds, Basis::Z);
    for q in 0..big {
        for r in 0..rounds {
            let rec = propagate(&cb, &[Fault::single(bit_flip_site(&cb, q as u32, r), 1)]);
            let (wschema, per_offset) = subwindow_records(&s, &serialize_raw(&cb, &[rec]), small).unwrap();
            for (o, recs) in per_offset.iter().enumerate() {
                let got = &ingest_raw(&wschema, recs).unwrap()[0];
                let faults: Vec<Fault> = (o..o + small)
                    .filter(|&k| k == q)
                    .map(|k| Fault::single(bit_flip_site(&cs, (k - o) as u32, r), 1))
                    .collect();
                let want = cs.data_point(&propagate(&cs, &faults));
                assert_eq!(got, &want, "qubit {q} round {r} offset {o}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn datasets_round_trip(
        shots in prop::collection::vec(
            (prop::collection::btree_set((0i32..4, 0i32..4, 1u32..5), 0..12), prop::option::of(any::<bool>()), prop::option::of(any::<bool>())),
            0..40,
        )
    ) {
        let points: Vec<DataPoint> = shots
            .into_iter()
            .map(|(dets, z, x)| DataPoint {
                detectors: dets
                    .into_iter()
                    .map(|(i, j, t)| DetectorEvent {
                        kind: if (i + j) % 2 == 1 { PauliType::Z } else { PauliType::X },
                        x2: 2 * i - 1,
                        y2: 2 * j - 1,
                        t,
                    })
                    .collect(),
                labels: Labels { z, x },
            })
            .collect();
        let h = DatasetHeader { basis: LabelBasis::Both, ..header(CodeKind::RotatedSurface, 5, 3, FeatureMode::Circuit) };
        let mut buf = Vec::new();
        write_dataset(&mut buf, &h, &points).unwrap();
        let (h2, back) = read_dataset(&mut Cursor::new(buf)).unwrap();
        prop_assert_eq!(h2.count as usize, points.len());
        prop_assert_eq!(back, points);
    }

    #[test]
    fn raw_rows_round_trip(bits in prop::collection::vec(any::<bool>(), 2 * 9 + 8 * 2)) {
        let s = schema(CodeKind::RotatedSurface, 3, 2, Basis::Z);
        let text: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let recs: Vec<RawRecord> = parse_raw_text(Cursor::new(text), &s).unwrap();
        let mut bytes = Vec::new();
        write_raw(&mut bytes, &s, &recs).unwrap();
        prop_assert_eq!(read_raw(&mut Cursor::new(bytes), &s).unwrap(), recs);
    }
}
