use qecw::sim::{build_memory_circuit, DetectorErrorModel, NoiseParams};
use qecw::{Basis, CodeLayout};

fn main() -> qecw::Result<()> {
    let layout = CodeLayout::repetition(3)?;
    let circuit = build_memory_circuit(&layout, 2, Basis::Z, &NoiseParams::uniform(1e-3)?)?;
    let dem = DetectorErrorModel::from_circuit(&circuit);
    print!("{}", dem.to_text());
    for (d, q) in circuit.detector_events().iter().zip(dem.detector_marginals()) {
        println!("# {d:?} fires with probability {q:.2e}");
    }
    Ok(())
}
