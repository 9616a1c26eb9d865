use qecw::ml::{ml_decode, CosetTable};
use qecw::CodeLayout;

fn main() -> qecw::Result<()> {
    let layout = CodeLayout::rotated_surface(3)?;
    for p in [0.01, 0.05, 0.1, 0.15] {
        let table = CosetTable::new(&layout, p)?;
        println!("p={p:<5} optimal failure {:.5}", table.ml_failure_rate());
    }

    let mut syndrome = vec![false; layout.num_stabilizers()];
    syndrome[0] = true;
    syndrome[3] = true;
    println!("syndrome {syndrome:?} -> {}", ml_decode(&layout, &syndrome, 0.1)?);
    Ok(())
}
