use qecw::sim::{build_memory_circuit, sample_batch, NoiseParams};
use qecw::{Basis, CodeLayout};

fn main() -> qecw::Result<()> {
    let layout = CodeLayout::rotated_surface(3)?;
    let circuit = build_memory_circuit(&layout, 3, Basis::Z, &NoiseParams::uniform(5e-3)?)?;
    println!(
        "{} qubits, {} instructions, {} detectors",
        circuit.num_qubits,
        circuit.instructions.len(),
        circuit.detectors.len()
    );

    let shots = sample_batch(&circuit, 7, 10_000);
    let flips = shots.iter().filter(|p| p.labels.z == Some(true)).count();
    let mean = shots.iter().map(|p| p.detectors.len()).sum::<usize>() as f64 / shots.len() as f64;
    println!("mean detectors per shot {mean:.3}, raw label flips {flips}");
    for p in shots.iter().filter(|p| !p.detectors.is_empty()).take(3) {
        println!("{:?} -> {:?}", p.detectors, p.labels);
    }
    Ok(())
}
