//! Training loops for the graph decoder.
//!
//! Two regimes are supported. Streaming training keeps a pool of samples in
//! memory, makes one pass over it per epoch and then swaps the oldest
//! fraction for fresh samples. Fixed training splits a finite dataset once
//! and runs a fixed number of epochs without early stopping.
//!
//! Progress is reported as tab-separated lines `epoch split metric value`,
//! for example `12\ttest\taccuracy\t0.9137`.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::geometry::{CodeKind, CodeLayout};
use crate::gnn::{save_checkpoint, AdamState, Checkpoint, GraphBatch, Model, ModelConfig};
use crate::graph::{build_graph, DetectorGraph, FeatureMode};
use crate::rng;
use crate::sim::{build_memory_circuit, sample_batch, sample_perfect_batch, Basis, Circuit, DataPoint, NoiseParams};

pub const DEFAULT_BATCH: usize = 1000;
pub const LR_INITIAL: f64 = 1e-4;
pub const LR_DECAYED: f64 = 1e-5;

/// Lowers the learning rate once when the monitored accuracy stalls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauRule {
    /// Epochs looked back over.
    pub window: usize,
    /// Smallest accuracy gain (as a fraction, 0.0005 = 0.05 points) that
    /// still counts as progress.
    pub min_gain: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        Self { window: 20, min_gain: 0.0005 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch: usize,
    /// Graphs per forward/backward pass; gradients of a batch are summed
    /// over its micro-batches before the optimizer step.
    pub micro_batch: usize,
    pub lr_initial: f64,
    pub lr_decayed: f64,
    pub plateau: PlateauRule,
    pub epochs: usize,
    /// Streaming pool size.
    pub pool: usize,
    pub replace_frac: f64,
    /// Fraction of a fixed dataset used for training.
    pub split: f64,
    /// Training accuracy is measured on at most this many pool samples.
    pub train_eval: usize,
    pub seed: u64,
    pub checkpoint: Option<PathBuf>,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            batch: DEFAULT_BATCH,
            micro_batch: DEFAULT_BATCH,
            lr_initial: LR_INITIAL,
            lr_decayed: LR_DECAYED,
            plateau: PlateauRule::default(),
            epochs: 20,
            pool: 100_000,
            replace_frac: 0.25,
            split: 0.99,
            train_eval: 10_000,
            seed: 0,
            checkpoint: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch == 0 || self.micro_batch == 0 {
            return Err(Error::Validation("batch sizes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.replace_frac) {
            return Err(Error::Validation(format!("replacement fraction must lie in [0, 1], got {}", self.replace_frac)));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Validation(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if !(self.lr_initial > 0.0 && self.lr_decayed > 0.0) {
            return Err(Error::Validation("learning rates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Mean loss over the epoch's optimizer steps.
    pub loss: f64,
    pub lr: f64,
    pub wall_s: f64,
    /// Fresh samples drawn during this epoch (streaming only).
    pub fresh: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub checkpoint: Option<PathBuf>,
    /// Samples drawn from the generator, including the initial pool.
    pub samples_drawn: usize,
}

impl TrainReport {
    pub fn test_accuracies(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.test_accuracy).collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for e in &self.epochs {
            s.push_str(&epoch_lines(e));
        }
        s
    }

    pub fn parse_lines(text: &str) -> Result<Self> {
        let mut by_epoch: HashMap<usize, EpochRecord> = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#') && !l.starts_with("epoch\t")) {
            let f: Vec<&str> = line.split('\t').collect();
            let [epoch, split, metric, value] = f[..] else {
                return Err(Error::Format(format!("expected four tab-separated fields: {line}")));
            };
            let epoch: usize = epoch.parse().map_err(|_| Error::Format(format!("bad epoch in: {line}")))?;
            let value: f64 = value.parse().map_err(|_| Error::Format(format!("bad value in: {line}")))?;
            let e = by_epoch.entry(epoch).or_insert_with(|| EpochRecord {
                epoch,
                train_accuracy: f64::NAN,
                test_accuracy: f64::NAN,
                loss: f64::NAN,
                lr: f64::NAN,
                wall_s: f64::NAN,
                fresh: 0,
            });
            match (split, metric) {
                ("train", "accuracy") => e.train_accuracy = value,
                ("test", "accuracy") => e.test_accuracy = value,
                ("train", "loss") => e.loss = value,
                ("train", "lr") => e.lr = value,
                ("train", "wall_s") => e.wall_s = value,
                ("train", "fresh") => e.fresh = value as usize,
                _ => return Err(Error::Format(format!("unknown metric: {line}"))),
            }
        }
        let mut epochs: Vec<_> = by_epoch.into_values().collect();
        epochs.sort_by_key(|e| e.epoch);
        Ok(Self { epochs, ..Self::default() })
    }
}

/// The report lines for one epoch.
pub fn epoch_lines(e: &EpochRecord) -> String {
    let mut s = String::new();
    let n = e.epoch;
    let _ = writeln!(s, "{n}\ttrain\taccuracy\t{}", e.train_accuracy);
    let _ = writeln!(s, "{n}\ttest\taccuracy\t{}", e.test_accuracy);
    let _ = writeln!(s, "{n}\ttrain\tloss\t{}", e.loss);
    let _ = writeln!(s, "{n}\ttrain\tlr\t{}", e.lr);
    let _ = writeln!(s, "{n}\ttrain\twall_s\t{:.3}", e.wall_s);
    let _ = writeln!(s, "{n}\ttrain\tfresh\t{}", e.fresh);
    s
}

/// Learning rate for the next epoch given the monitored accuracies so far.
///
/// Starts at `lr_initial`. Once at least `window` epochs are recorded and
/// the best of the last `window` accuracies beats the first of them by less
/// than `min_gain`, the rate drops to `lr_decayed` for good.
pub fn lr_schedule(history: &[f64], current: f64, config: &TrainConfig) -> f64 {
    if current != config.lr_initial {
        return current;
    }
    let w = config.plateau.window.max(1);
    if history.len() < w {
        return current;
    }
    let recent = &history[history.len() - w..];
    let best = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best - recent[0] < config.plateau.min_gain {
        config.lr_decayed
    } else {
        current
    }
}

/// Source of fresh labelled samples.
pub trait Generator {
    fn generate(&mut self, n: usize) -> Result<Vec<DataPoint>>;
}

impl<F: FnMut(usize) -> Result<Vec<DataPoint>>> Generator for F {
    fn generate(&mut self, n: usize) -> Result<Vec<DataPoint>> {
        self(n)
    }
}

/// Noise process a [`MixGenerator`] samples from.
#[derive(Clone, Debug)]
pub enum NoiseSource {
    /// One depolarizing layer, perfect readout; both labels present.
    Perfect(CodeLayout),
    /// Uniform circuit-level noise; each basis contributes its own label.
    Circuit { layout: CodeLayout, rounds: usize, bases: Vec<Basis> },
    /// Bit flips on the data qubits only, perfect gates and readout.
    BitFlip { layout: CodeLayout, rounds: usize },
}

impl NoiseSource {
    pub fn feature_mode(&self) -> FeatureMode {
        match self {
            NoiseSource::Perfect(_) => FeatureMode::Perfect,
            NoiseSource::Circuit { layout, .. } | NoiseSource::BitFlip { layout, .. } => match layout.kind {
                CodeKind::Repetition => FeatureMode::Repetition,
                CodeKind::RotatedSurface => FeatureMode::Circuit,
            },
        }
    }
}

/// Even mix over a list of error rates (and bases, for circuit noise).
#[derive(Clone, Debug)]
pub struct MixGenerator {
    pub source: NoiseSource,
    pub ps: Vec<f64>,
    seed: u64,
    calls: u64,
    circuits: HashMap<(u64, Basis), Circuit>,
}

impl MixGenerator {
    pub fn new(source: NoiseSource, ps: Vec<f64>, seed: u64) -> Result<Self> {
        if ps.is_empty() {
            return Err(Error::Validation("at least one error rate is required".into()));
        }
        if let NoiseSource::Circuit { bases, .. } = &source {
            if bases.is_empty() {
                return Err(Error::Validation("at least one basis is required".into()));
            }
        }
        Ok(Self { source, ps, seed, calls: 0, circuits: HashMap::new() })
    }

    fn circuit(&mut self, p: f64, basis: Basis) -> Result<&Circuit> {
        let key = (p.to_bits(), basis);
        if !self.circuits.contains_key(&key) {
            let c = match &self.source {
                NoiseSource::Circuit { layout, rounds, .. } => {
                    build_memory_circuit(layout, *rounds, basis, &NoiseParams::uniform(p)?)?
                }
                NoiseSource::BitFlip { layout, rounds } => {
                    build_memory_circuit(layout, *rounds, basis, &NoiseParams::data_bit_flip(p)?)?
                }
                NoiseSource::Perfect(_) => unreachable!(),
            };
            self.circuits.insert(key, c);
        }
        Ok(&self.circuits[&key])
    }
}

impl Generator for MixGenerator {
    fn generate(&mut self, n: usize) -> Result<Vec<DataPoint>> {
        let call_seed = rng::derive(self.seed, self.calls);
        self.calls += 1;
        let bases = match &self.source {
            NoiseSource::Circuit { bases, .. } => bases.clone(),
            _ => vec![Basis::Z],
        };
        let parts: Vec<(f64, Basis)> =
            self.ps.iter().flat_map(|&p| bases.iter().map(move |&b| (p, b))).collect();
        let mut out = Vec::with_capacity(n);
        for (k, &(p, basis)) in parts.iter().enumerate() {
            let count = n / parts.len() + usize::from(k < n % parts.len());
            let seed = rng::derive(call_seed, k as u64);
            let pts = match &self.source {
                NoiseSource::Perfect(layout) => sample_perfect_batch(layout, p, seed, count)?,
                _ => sample_batch(self.circuit(p, basis)?, seed, count),
            };
            out.extend(pts);
        }
        Ok(out)
    }
}

/// Model, optimizer state and report of a finished run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub adam: AdamState,
    pub report: TrainReport,
}

/// A run that stopped early; `report` holds the completed epochs.
#[derive(Debug, thiserror::Error)]
#[error("training stopped after {} epochs: {error}", report.epochs.len())]
pub struct Interrupted {
    pub report: TrainReport,
    pub error: Error,
}

/// Fraction of labelled heads whose thresholded prediction matches.
pub fn accuracy(model: &Model<f32>, graphs: &[DetectorGraph], batch: usize) -> Result<f64> {
    let preds = model.predict_many(graphs, batch)?;
    let (mut right, mut total) = (0usize, 0usize);
    for (g, p) in graphs.iter().zip(&preds) {
        for (h, &prob) in p.iter().enumerate() {
            if let Some(y) = g.labels.head(h) {
                total += 1;
                right += usize::from((prob > 0.5) == y);
            }
        }
    }
    if total == 0 {
        return Err(Error::NoLabels);
    }
    Ok(right as f64 / total as f64)
}

struct Session {
    config: TrainConfig,
    model: Model<f32>,
    adam: AdamState,
    report: TrainReport,
}

impl Session {
    fn new(config: &TrainConfig, resume: Option<Checkpoint>) -> Result<Self> {
        config.validate()?;
        let (model, adam) = match resume {
            Some(ck) => {
                if ck.model.config != config.model {
                    return Err(Error::Validation("checkpoint architecture differs from the configuration".into()));
                }
                let adam = ck.adam.unwrap_or_else(|| AdamState::new(&ck.model, config.lr_initial));
                (ck.model, adam)
            }
            None => {
                let m = Model::<f32>::init(config.model.clone(), config.seed)?;
                let a = AdamState::new(&m, config.lr_initial);
                (m, a)
            }
        };
        Ok(Self { config: config.clone(), model, adam, report: TrainReport::default() })
    }

    /// One pass over `pool` in shuffled batches; returns the mean loss.
    fn epoch(&mut self, pool: &[DetectorGraph], epoch: usize) -> Result<f64> {
        let mut order: Vec<usize> = (0..pool.len()).filter(|&i| !pool[i].is_empty()).collect();
        let mut rng = rng::stream(rng::derive(self.config.seed, 0x7368_7566), epoch as u64);
        order.shuffle(&mut rng);
        let heads = self.model.num_heads();
        let (mut loss_sum, mut steps) = (0.0, 0usize);
        for batch in order.chunks(self.config.batch) {
            let count: usize = batch
                .iter()
                .map(|&i| (0..heads).filter(|&h| pool[i].labels.head(h).is_some()).count())
                .sum();
            if count == 0 {
                continue;
            }
            let mut grads = self.model.zeros_like();
            let mut batch_loss = 0.0;
            for micro in batch.chunks(self.config.micro_batch) {
                let refs: Vec<&DetectorGraph> = micro.iter().map(|&i| &pool[i]).collect();
                let gb = GraphBatch::<f32>::new(&refs)?;
                let (l, _, _) = self.model.accumulate_grads(&gb, count, &mut grads)?;
                batch_loss += l;
            }
            self.adam.step(&mut self.model, &grads)?;
            loss_sum += batch_loss / count as f64;
            steps += 1;
        }
        Ok(if steps == 0 { f64::NAN } else { loss_sum / steps as f64 })
    }

    fn train_accuracy(&self, pool: &[DetectorGraph], epoch: usize) -> Result<f64> {
        if pool.len() <= self.config.train_eval {
            return accuracy(&self.model, pool, self.config.batch);
        }
        let mut rng = rng::stream(rng::derive(self.config.seed, 0x6576_616c), epoch as u64);
        let picked: Vec<DetectorGraph> =
            rand::seq::index::sample(&mut rng, pool.len(), self.config.train_eval).iter().map(|i| pool[i].clone()).collect();
        accuracy(&self.model, &picked, self.config.batch)
    }

    fn finish_epoch(
        &mut self,
        epoch: usize,
        loss: f64,
        train_accuracy: f64,
        test: &[DetectorGraph],
        started: Instant,
        fresh: usize,
        observer: &mut dyn FnMut(&EpochRecord),
    ) -> Result<()> {
        let test_accuracy = accuracy(&self.model, test, self.config.batch)?;
        let record = EpochRecord {
            epoch,
            train_accuracy,
            test_accuracy,
            loss,
            lr: self.adam.lr,
            wall_s: started.elapsed().as_secs_f64(),
            fresh,
        };
        observer(&record);
        self.report.epochs.push(record);
        self.adam.lr = lr_schedule(&self.report.test_accuracies(), self.adam.lr, &self.config);
        if let Some(path) = &self.config.checkpoint {
            save_checkpoint(path, &self.model, Some(&self.adam))?;
        }
        Ok(())
    }

    fn done(mut self) -> Result<TrainOutcome> {
        if let Some(path) = &self.config.checkpoint {
            save_checkpoint(path, &self.model, Some(&self.adam))?;
            self.report.checkpoint = Some(path.clone());
        }
        Ok(TrainOutcome { model: self.model, adam: self.adam, report: self.report })
    }
}

fn graphs_of(points: &[DataPoint], mode: FeatureMode) -> Vec<DetectorGraph> {
    points.iter().map(|p| build_graph(p, mode)).collect()
}

fn interrupted(session: Session, error: Error) -> Box<Interrupted> {
    Box::new(Interrupted { report: session.report, error })
}

/// Streaming training with FIFO replacement of the pool.
pub fn train_streaming(
    config: &TrainConfig,
    generator: &mut dyn Generator,
    test_set: &[DataPoint],
) -> Result<TrainOutcome, Box<Interrupted>> {
    train_streaming_with(config, generator, test_set, None, &mut |_| {})
}

/// [`train_streaming`] with an optional starting checkpoint and a callback
/// invoked after every epoch.
pub fn train_streaming_with(
    config: &TrainConfig,
    generator: &mut dyn Generator,
    test_set: &[DataPoint],
    resume: Option<Checkpoint>,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, Box<Interrupted>> {
    let early = |error| Box::new(Interrupted { report: TrainReport::default(), error });
    let mut session = Session::new(config, resume).map_err(early)?;
    let mode = config.model.mode;
    let test = graphs_of(test_set, mode);
    if config.pool == 0 {
        return Err(early(Error::Validation("pool must hold at least one sample".into())));
    }
    let initial = match generator.generate(config.pool) {
        Ok(p) if p.len() == config.pool => p,
        Ok(p) => return Err(early(Error::Generator(format!("asked for {} samples, got {}", config.pool, p.len())))),
        Err(e) => return Err(early(Error::Generator(e.to_string()))),
    };
    session.report.samples_drawn = initial.len();
    let mut pool: VecDeque<DetectorGraph> = graphs_of(&initial, mode).into();
    let replace = (config.replace_frac * config.pool as f64).ceil() as usize;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let slice = pool.make_contiguous();
        let loss = match session.epoch(slice, epoch) {
            Ok(l) => l,
            Err(e) => return Err(interrupted(session, e)),
        };
        let train_acc = match session.train_accuracy(pool.make_contiguous(), epoch) {
            Ok(a) => a,
            Err(e) => return Err(interrupted(session, e)),
        };
        let fresh = match generator.generate(replace) {
            Ok(p) if p.len() == replace => p,
            Ok(p) => {
                let e = Error::Generator(format!("asked for {replace} samples, got {}", p.len()));
                return Err(interrupted(session, e));
            }
            Err(e) => return Err(interrupted(session, Error::Generator(e.to_string()))),
        };
        pool.drain(..replace);
        pool.extend(graphs_of(&fresh, mode));
        session.report.samples_drawn += replace;
        if let Err(e) = session.finish_epoch(epoch, loss, train_acc, &test, started, replace, observer) {
            return Err(interrupted(session, e));
        }
    }
    let report = session.report.clone();
    session.done().map_err(|error| Box::new(Interrupted { report, error }))
}

fn content_hash(index: usize, p: &DataPoint) -> u64 {
    let mut h = DefaultHasher::new();
    index.hash(&mut h);
    p.hash(&mut h);
    h.finish()
}

/// Seeded split of a dataset into training and test indices.
///
/// Fails when either side would be empty, or when the hashed
/// `(index, record)` sets of the two sides intersect.
pub fn split_indices(n: usize, split: f64, seed: u64, points: &[DataPoint]) -> Result<(Vec<usize>, Vec<usize>)> {
    let test_len = (n as f64 * (1.0 - split)).round() as usize;
    if test_len == 0 || test_len >= n {
        return Err(Error::Validation(format!("a dataset of {n} records leaves an empty split at {split}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(rng::derive(seed, 0x7370_6c69), 0));
    let test = idx.split_off(n - test_len);
    let train_hashes: HashSet<u64> = idx.iter().map(|&i| content_hash(i, &points[i])).collect();
    if test.iter().any(|&i| train_hashes.contains(&content_hash(i, &points[i]))) {
        return Err(Error::Validation("training and test splits overlap".into()));
    }
    Ok((idx, test))
}

/// Trains on a fixed dataset for `config.epochs` epochs (no early stopping).
/// `split_seed` selects the train/test partition.
pub fn train_fixed(
    config: &TrainConfig,
    dataset: &[DataPoint],
    split_seed: u64,
) -> Result<TrainOutcome, Box<Interrupted>> {
    train_fixed_with(config, dataset, split_seed, None, &mut |_| {})
}

pub fn train_fixed_with(
    config: &TrainConfig,
    dataset: &[DataPoint],
    split_seed: u64,
    resume: Option<Checkpoint>,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, Box<Interrupted>> {
    let early = |error| Box::new(Interrupted { report: TrainReport::default(), error });
    if dataset.iter().all(|p| p.labels.count() == 0) {
        return Err(early(Error::NoLabels));
    }
    let mut session = Session::new(config, resume).map_err(early)?;
    let (train_idx, test_idx) = split_indices(dataset.len(), config.split, split_seed, dataset).map_err(early)?;
    let mode = config.model.mode;
    let train: Vec<DetectorGraph> = train_idx.iter().map(|&i| build_graph(&dataset[i], mode)).collect();
    let test: Vec<DetectorGraph> = test_idx.iter().map(|&i| build_graph(&dataset[i], mode)).collect();
    session.report.samples_drawn = dataset.len();
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let step = session
            .epoch(&train, epoch)
            .and_then(|loss| Ok((loss, session.train_accuracy(&train, epoch)?)));
        let (loss, train_acc) = match step {
            Ok(v) => v,
            Err(e) => return Err(interrupted(session, e)),
        };
        if let Err(e) = session.finish_epoch(epoch, loss, train_acc, &test, started, 0, observer) {
            return Err(interrupted(session, e));
        }
    }
    let report = session.report.clone();
    session.done().map_err(|error| Box::new(Interrupted { report, error }))
}
