use std::io::Cursor;

use qecw::dataset::{
    ingest_raw, load_dataset, save_dataset, serialize_raw, subwindow, write_raw, DatasetHeader, LabelBasis,
    NoiseDescriptor, RawSchema,
};
use qecw::sim::{build_memory_circuit, sample_batch, sample_records, NoiseParams};
use qecw::{Basis, CodeKind, FeatureMode};

fn main() -> qecw::Result<()> {
    let schema = RawSchema { kind: CodeKind::Repetition, distance: 25, rounds: 5, basis: Basis::Z };
    let circuit = build_memory_circuit(&schema.layout()?, 5, Basis::Z, &NoiseParams::uniform(0.01)?)?;

    let points = sample_batch(&circuit, 4, 1_000);
    let header = DatasetHeader {
        kind: CodeKind::Repetition,
        distance: 25,
        rounds: 5,
        basis: LabelBasis::Z,
        mode: FeatureMode::Repetition,
        noise: NoiseDescriptor::Circuit(vec![0.01]),
        count: 0,
    };
    let path = std::env::temp_dir().join("rep25.qgd");
    save_dataset(&path, &header, &points)?;
    let (read_header, back) = load_dataset(&path)?;
    println!("{} records, identical: {}", read_header.count, back == points);

    let raw = serialize_raw(&circuit, &sample_records(&circuit, 4, 1_000));
    let mut bytes = Vec::new();
    write_raw(&mut bytes, &schema, &raw)?;
    println!("raw: {} bytes, {} per row\n{}", bytes.len(), schema.row_bytes()?, schema.to_sidecar()?);
    let ingested = ingest_raw(&schema, &qecw::dataset::read_raw(&mut Cursor::new(bytes), &schema)?)?;
    println!("ingested {} shots", ingested.len());

    let windows = subwindow(&schema, &raw, 3)?;
    println!("{} windows of distance 3", windows.len());
    Ok(())
}
