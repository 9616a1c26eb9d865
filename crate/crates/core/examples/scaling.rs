use qecw::eval::{bench_gnn, BenchPoint, NoiseModel, Scenario, ScalingFit};
use qecw::gnn::{Model, ModelConfig};
use qecw::{Basis, CodeKind, FeatureMode};

fn main() -> qecw::Result<()> {
    let model = Model::<f32>::init(ModelConfig::small(FeatureMode::Perfect), 0)?;
    let mut samples = Vec::new();
    println!("{}", BenchPoint::HEADER);
    for d in [5, 9, 13, 17, 21] {
        let s = Scenario { kind: CodeKind::RotatedSurface, distance: d, rounds: 1, basis: Basis::Z, noise: NoiseModel::Perfect, p: 0.05 };
        let b = bench_gnn(&model, &s.sample(500, d as u64)?, &s.info(), 100)?;
        println!("{}", b.to_line());
        samples.push((d, 1, b.decode_s));
    }
    print!("{}", ScalingFit::fit(&samples, None)?.to_lines());
    Ok(())
}
