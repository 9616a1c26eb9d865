//! Streams perfect-stabilizer samples into the narrow network for a few
//! epochs and prints the per-epoch report.

use qecw::gnn::ModelConfig;
use qecw::sim::sample_perfect_batch;
use qecw::train::{epoch_lines, train_streaming_with, MixGenerator, NoiseSource, TrainConfig};
use qecw::{CodeLayout, FeatureMode};

fn main() {
    let layout = CodeLayout::rotated_surface(3).unwrap();
    let mut config = TrainConfig::new(ModelConfig::small(FeatureMode::Perfect));
    config.pool = 20_000;
    config.epochs = 5;
    config.lr_initial = 1e-3;

    let mut gen = MixGenerator::new(NoiseSource::Perfect(layout.clone()), vec![0.01, 0.05, 0.1, 0.15], 1).unwrap();
    let test = sample_perfect_batch(&layout, 0.1, 2, 5_000).unwrap();
    let outcome = train_streaming_with(&config, &mut gen, &test, None, &mut |e| print!("{}", epoch_lines(e)));
    match outcome {
        Ok(run) => println!("drew {} samples", run.report.samples_drawn),
        Err(stop) => eprintln!("{stop}"),
    }
}
