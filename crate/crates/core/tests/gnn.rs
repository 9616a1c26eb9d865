use ndarray::Array2;
use qecw::gnn::{AdamState, Aggregation, GraphBatch, Model, ModelConfig};
use qecw::graph::{build_graph, DetectorGraph, FeatureMode};
use qecw::{DataPoint, DetectorEvent, Labels, PauliType};

fn ev(kind: PauliType, x2: i32, y2: i32, t: u32) -> DetectorEvent {
    DetectorEvent { kind, x2, y2, t }
}

fn tiny(mode: FeatureMode, aggregation: Aggregation) -> ModelConfig {
    ModelConfig {
        mode,
        conv_widths: vec![4, 6, 5],
        head_widths: vec![5, 3, 1],
        heads: ModelConfig::default_heads(mode),
        aggregation,
    }
}

fn sample_points() -> Vec<DataPoint> {
    vec![
        DataPoint {
            detectors: vec![
                ev(PauliType::Z, 1, 1, 1),
                ev(PauliType::X, 3, 1, 2),
                ev(PauliType::Z, 3, 5, 2),
                ev(PauliType::X, 5, 3, 3),
            ],
            labels: Labels::z(true),
        },
        DataPoint { detectors: vec![ev(PauliType::X, 1, 3, 2), ev(PauliType::X, 3, 3, 3)], labels: Labels::x(false) },
        DataPoint { detectors: vec![ev(PauliType::Z, -1, 3, 1)], labels: Labels::both(false, true) },
    ]
}

fn loss_of(model: &Model<f64>, batch: &GraphBatch<f64>) -> f64 {
    model.loss_and_grads(batch).unwrap().loss
}

fn gradient_check(aggregation: Aggregation) {
    let mode = FeatureMode::Circuit;
    let graphs: Vec<_> = sample_points().iter().map(|p| build_graph(p, mode)).collect();
    let refs: Vec<_> = graphs.iter().collect();
    let batch = GraphBatch::<f64>::new(&refs).unwrap();
    let mut model = Model::<f64>::init(tiny(mode, aggregation), 11).unwrap();
    // Shift biases off zero so no ReLU sits exactly at its kink.
    for (k, t) in model.tensors_mut().into_iter().enumerate() {
        for (i, v) in t.iter_mut().enumerate() {
            *v += 0.01 * ((k * 31 + i * 7) % 13) as f64 / 13.0;
        }
    }
    let analytic = model.loss_and_grads(&batch).unwrap().grads;
    let grads: Vec<Vec<f64>> = analytic.tensors().into_iter().map(|(_, t)| t.to_vec()).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..grads.len() {
        for i in 0..grads[k].len() {
            let orig = model.tensors()[k].1[i];
            model.tensors_mut()[k][i] = orig + h;
            let up = loss_of(&model, &batch);
            model.tensors_mut()[k][i] = orig - h;
            let down = loss_of(&model, &batch);
            model.tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = grads[k][i];
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            let rel = (a - numeric).abs() / scale;
            worst = worst.max(rel);
            assert!(rel < 1e-4, "tensor {k} index {i}: analytic {a} numeric {numeric}");
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn finite_difference_neighbor_aggregation() {
    gradient_check(Aggregation::Neighbor);
}

#[test]
fn finite_difference_self_aggregation() {
    gradient_check(Aggregation::SelfFeature);
}

#[test]
fn conv_three_node_path_by_hand() {
    // Path 0 - 1 - 2 in repetition mode: features (x, t).
    let p = DataPoint {
        detectors: vec![ev(PauliType::Z, 1, 0, 1), ev(PauliType::Z, 3, 0, 1), ev(PauliType::Z, 5, 0, 1)],
        labels: Labels::z(false),
    };
    let mut g = build_graph(&p, FeatureMode::Repetition);
    g.edges.retain(|e| e.b - e.a == 1);
    g.edges[0].weight = 0.5;
    g.edges[1].weight = 0.25;
    let batch = GraphBatch::<f64>::new(&[&g]).unwrap();
    let mut model = Model::<f64>::init(
        ModelConfig {
            mode: FeatureMode::Repetition,
            conv_widths: vec![2],
            head_widths: vec![1],
            heads: 1,
            aggregation: Aggregation::Neighbor,
        },
        0,
    )
    .unwrap();
    let w1 = [[1.0, -0.5], [0.25, 2.0]];
    let w2 = [[0.5, 1.0], [-1.0, 0.5]];
    let b = [0.1, -0.2];
    model.convs[0].w1 = Array2::from_shape_fn((2, 2), |(i, j)| w1[i][j]);
    model.convs[0].w2 = Array2::from_shape_fn((2, 2), |(i, j)| w2[i][j]);
    model.convs[0].bias = ndarray::arr1(&b);
    model.heads[0][0].w = Array2::from_shape_vec((1, 2), vec![1.0, 1.0]).unwrap();

    let x = [[0.5, 1.0], [1.5, 1.0], [2.5, 1.0]];
    let nbr: [Vec<(usize, f64)>; 3] = [vec![(1, 0.5)], vec![(0, 0.5), (2, 0.25)], vec![(1, 0.25)]];
    let mut pooled = [0.0; 2];
    for i in 0..3 {
        for o in 0..2 {
            let mut s = b[o] + w1[o][0] * x[i][0] + w1[o][1] * x[i][1];
            for &(j, e) in &nbr[i] {
                s += e * (w2[o][0] * x[j][0] + w2[o][1] * x[j][1]);
            }
            pooled[o] += s.max(0.0) / 3.0;
        }
    }
    let z: f64 = pooled[0] + pooled[1];
    let expected = 1.0 / (1.0 + (-z).exp());
    let got = model.forward(&batch).unwrap()[[0, 0]];
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn single_node_ignores_w2() {
    let p = DataPoint { detectors: vec![ev(PauliType::Z, 1, 1, 1)], labels: Labels::z(false) };
    let g = build_graph(&p, FeatureMode::Perfect);
    let batch = GraphBatch::<f64>::new(&[&g]).unwrap();
    let cfg = tiny(FeatureMode::Perfect, Aggregation::Neighbor);
    let a = Model::<f64>::init(cfg.clone(), 5).unwrap();
    let mut b = a.clone();
    b.convs[0].w2.fill(123.0);
    assert_eq!(a.forward(&batch).unwrap(), b.forward(&batch).unwrap());
}

#[test]
fn permutation_invariance_is_exact() {
    let p = &sample_points()[0];
    let g = build_graph(p, FeatureMode::Circuit);
    let model = Model::<f32>::init(ModelConfig::small(FeatureMode::Circuit), 2).unwrap();
    let base = model.predict(&g).unwrap();
    for perm in [[1, 0, 3, 2], [3, 2, 1, 0], [2, 3, 0, 1]] {
        let q = model.predict(&g.permuted(&perm)).unwrap();
        assert_eq!(base, q);
    }
    assert!(base.iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn identical_nodes_pool_to_single_output() {
    let a = DataPoint { detectors: vec![ev(PauliType::Z, 1, 1, 1)], labels: Labels::z(false) };
    let b = DataPoint {
        detectors: vec![ev(PauliType::Z, 1, 1, 1), ev(PauliType::Z, 1, 1, 2), ev(PauliType::Z, 1, 1, 3)],
        labels: Labels::z(false),
    };
    // Perfect mode ignores t, so these nodes share features; no edges.
    let gb = DetectorGraph { mode: FeatureMode::Perfect, nodes: b.detectors, edges: vec![], labels: b.labels };
    let ga = build_graph(&a, FeatureMode::Perfect);
    let model = Model::<f64>::init(ModelConfig::small(FeatureMode::Perfect), 4).unwrap();
    let pa = model.predict(&ga).unwrap();
    let pb = model.predict(&gb).unwrap();
    for (x, y) in pa.iter().zip(&pb) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn init_variance_matches_he_scaling() {
    let model = Model::<f32>::init(ModelConfig::full(FeatureMode::Circuit), 9).unwrap();
    for conv in model.convs.iter().filter(|c| c.d_in() >= 128) {
        for w in [&conv.w1, &conv.w2] {
            let n = w.len() as f64;
            let mean = w.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
            let var = w.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
            let target = 2.0 / conv.d_in() as f64;
            assert!((var / target - 1.0).abs() < 0.1, "var {var} target {target}");
        }
    }
}

#[test]
fn adam_quadratic_matches_scalar_reference() {
    // Minimise 0.5 (b - 3)^2 through one bias entry and compare with a
    // direct scalar Adam written here.
    let mut model = Model::<f64>::init(tiny(FeatureMode::Perfect, Aggregation::Neighbor), 1).unwrap();
    let mut adam = AdamState::new(&model, 0.02);
    let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
    let mut losses = Vec::new();
    for t in 1..=100 {
        let b = model.heads[0][2].bias[0];
        let mut g = model.zeros_like();
        g.heads[0][2].bias[0] = b - 3.0;
        adam.step(&mut model, &g).unwrap();

        let gx = x - 3.0;
        m = 0.9 * m + 0.1 * gx;
        v = 0.999 * v + 0.001 * gx * gx;
        let mh = m / (1.0 - 0.9f64.powi(t));
        let vh = v / (1.0 - 0.999f64.powi(t));
        x -= 0.02 * mh / (vh.sqrt() + 1e-8);
        assert!((model.heads[0][2].bias[0] - x).abs() < 1e-5, "step {t}");
        losses.push(0.5 * (x - 3.0f64).powi(2));
    }
    assert!(losses[99] < losses[0]);
    assert!(losses[5..].windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    use qecw::gnn::{read_checkpoint, write_checkpoint};
    let mut model = Model::<f32>::init(ModelConfig::small(FeatureMode::Circuit), 3).unwrap();
    let mut adam = AdamState::new(&model, 1e-4);
    let mut g = model.zeros_like();
    g.convs[2].w1.fill(0.5);
    adam.step(&mut model, &g).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &model, Some(&adam)).unwrap();
    let ck = read_checkpoint(&mut buf.as_slice()).unwrap();
    assert_eq!(ck.model, model);
    assert_eq!(ck.adam.as_ref(), Some(&adam));
    let mut again = Vec::new();
    write_checkpoint(&mut again, &ck.model, ck.adam.as_ref()).unwrap();
    assert_eq!(buf, again);

    buf[4] = 9;
    assert!(matches!(read_checkpoint(&mut buf.as_slice()), Err(qecw::Error::Version { found: 9, .. })));
}
