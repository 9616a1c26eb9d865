use qecw::{CodeLayout, PauliType};

fn main() -> qecw::Result<()> {
    let code = CodeLayout::rotated_surface(5)?;
    println!("d={} data={} stabilizers={}", code.distance, code.num_data(), code.num_stabilizers());
    for (k, s) in code.stabilizers.iter().enumerate() {
        println!("{k:2} {} at ({}, {}) on {:?}", s.pauli_type, s.ancilla.x(), s.ancilla.y(), s.support);
    }
    println!("Z_L = {:?}", code.logical(PauliType::Z));
    println!("X_L = {:?}", code.logical(PauliType::X));
    assert!(code.validate().is_empty());

    let rep = CodeLayout::repetition(7)?;
    println!("repetition d=7: {} checks", rep.num_stabilizers());
    Ok(())
}
