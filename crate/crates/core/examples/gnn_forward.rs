use qecw::gnn::{Model, ModelConfig};
use qecw::graph::build_graph;
use qecw::sim::sample_perfect_batch;
use qecw::{CodeLayout, FeatureMode};

fn main() -> qecw::Result<()> {
    let model = Model::<f32>::init(ModelConfig::full(FeatureMode::Perfect), 1)?;
    println!("{} parameters, {} heads", model.num_params(), model.num_heads());

    let layout = CodeLayout::rotated_surface(5)?;
    let shots = sample_perfect_batch(&layout, 0.05, 2, 8)?;
    let graphs: Vec<_> = shots.iter().map(|p| build_graph(p, FeatureMode::Perfect)).collect();
    for (g, probs) in graphs.iter().zip(model.predict_many(&graphs, 4)?) {
        println!("{:2} nodes -> P(flip) = {probs:.3?}", g.num_nodes());
    }
    Ok(())
}
