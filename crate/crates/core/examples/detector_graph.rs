use qecw::graph::build_graph;
use qecw::sim::sample_perfect_batch;
use qecw::{CodeLayout, FeatureMode};

fn main() -> qecw::Result<()> {
    let layout = CodeLayout::rotated_surface(7)?;
    let shots = sample_perfect_batch(&layout, 0.08, 3, 100)?;
    let busiest = shots.iter().max_by_key(|p| p.detectors.len()).unwrap();
    let g = build_graph(busiest, FeatureMode::Perfect);
    println!("{} nodes, {} edges, max degree {}", g.num_nodes(), g.edges.len(), g.degrees().iter().max().unwrap_or(&0));
    for (node, x) in g.nodes.iter().zip(g.features()) {
        println!("{node:?} {x:?}");
    }
    for e in g.edges.iter().take(10) {
        println!("{} - {} weight {:.4}", e.a, e.b, e.weight);
    }
    Ok(())
}
