//! Decoder evaluation, paired comparison and timing.
//!
//! Results are written as tab-separated lines with the columns of
//! [`EvalResult::HEADER`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CodeKind, CodeLayout, PauliType};
use crate::gnn::{GraphBatch, Model};
use crate::graph::{build_graph, DetectorGraph, FeatureMode};
use crate::matching::MwpmDecoder;
use crate::ml::CosetTable;
use crate::sim::{
    build_memory_circuit, sample_batch, sample_perfect_batch, Basis, Circuit, DataPoint, DetectorErrorModel, DetectorEvent,
    NoiseParams,
};

/// Decoder names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Gnn,
    Mwpm,
    MwpmUninformed,
    Mlo,
    Majority,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 5] =
        [DecoderKind::Gnn, DecoderKind::Mwpm, DecoderKind::MwpmUninformed, DecoderKind::Mlo, DecoderKind::Majority];

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Gnn => "gnn",
            DecoderKind::Mwpm => "mwpm",
            DecoderKind::MwpmUninformed => "mwpm-uninformed",
            DecoderKind::Mlo => "mlo",
            DecoderKind::Majority => "majority",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown decoder '{s}'")))
    }
}

/// Predicts `(λ_Z, λ_X)` for data points.
pub trait Decoder: Sync {
    fn kind(&self) -> DecoderKind;

    fn decode(&self, point: &DataPoint) -> Result<(bool, bool)>;

    fn decode_all(&self, points: &[DataPoint]) -> Result<Vec<(bool, bool)>> {
        let (unique, index) = dedup(points);
        let preds = unique.par_iter().map(|p| self.decode(p)).collect::<Result<Vec<_>>>()?;
        Ok(index.into_iter().map(|i| preds[i]).collect())
    }
}

/// Points with distinct detector sets, and each input's position among them.
fn dedup(points: &[DataPoint]) -> (Vec<&DataPoint>, Vec<usize>) {
    let mut slot: HashMap<&[DetectorEvent], usize> = HashMap::new();
    let mut unique = Vec::new();
    let index = points
        .iter()
        .map(|p| {
            *slot.entry(&p.detectors).or_insert_with(|| {
                unique.push(p);
                unique.len() - 1
            })
        })
        .collect();
    (unique, index)
}

/// Graph-network decoder; heads are thresholded at 1/2.
#[derive(Clone, Debug)]
pub struct GnnDecoder {
    pub model: Model<f32>,
    pub batch: usize,
}

impl GnnDecoder {
    pub fn new(model: Model<f32>) -> Self {
        Self { model, batch: 1000 }
    }

    pub fn mode(&self) -> FeatureMode {
        self.model.config.mode
    }

    fn flips(probs: &[f64]) -> (bool, bool) {
        let z = probs.first().is_some_and(|&p| p > 0.5);
        let x = probs.get(1).is_some_and(|&p| p > 0.5);
        (z, x)
    }
}

impl Decoder for GnnDecoder {
    fn kind(&self) -> DecoderKind {
        DecoderKind::Gnn
    }

    fn decode(&self, point: &DataPoint) -> Result<(bool, bool)> {
        Ok(Self::flips(&self.model.predict(&build_graph(point, self.mode()))?))
    }

    /// Identical detector sets are evaluated once.
    fn decode_all(&self, points: &[DataPoint]) -> Result<Vec<(bool, bool)>> {
        let (unique, index) = dedup(points);
        let chunk = self.batch.max(1);
        let parts: Vec<Vec<(bool, bool)>> = unique
            .par_chunks(chunk)
            .map(|c| {
                let graphs: Vec<DetectorGraph> = c.iter().map(|p| build_graph(p, self.mode())).collect();
                Ok(self.model.predict_many(&graphs, chunk)?.iter().map(|p| Self::flips(p)).collect())
            })
            .collect::<Result<_>>()?;
        let preds = parts.concat();
        Ok(index.into_iter().map(|i| preds[i]).collect())
    }
}

#[derive(Clone, Debug)]
pub struct MatchingDecoder {
    pub inner: MwpmDecoder,
}

impl MatchingDecoder {
    pub fn informed(dem: &DetectorErrorModel, kind: CodeKind) -> Result<Self> {
        Ok(Self { inner: MwpmDecoder::informed(dem, kind)? })
    }

    pub fn uninformed(layout: CodeLayout) -> Self {
        Self { inner: MwpmDecoder::uninformed(layout) }
    }
}

impl Decoder for MatchingDecoder {
    fn kind(&self) -> DecoderKind {
        match self.inner {
            MwpmDecoder::Informed { .. } => DecoderKind::Mwpm,
            MwpmDecoder::Uninformed { .. } => DecoderKind::MwpmUninformed,
        }
    }

    fn decode(&self, point: &DataPoint) -> Result<(bool, bool)> {
        self.inner.decode(point)
    }
}

/// Exact maximum-likelihood decoder for perfect-stabilizer surface data.
#[derive(Clone, Debug)]
pub struct MlDecoder {
    pub layout: CodeLayout,
    pub table: CosetTable,
}

impl MlDecoder {
    pub fn new(layout: CodeLayout, p: f64) -> Result<Self> {
        let table = CosetTable::new(&layout, p)?;
        Ok(Self { layout, table })
    }
}

impl Decoder for MlDecoder {
    fn kind(&self) -> DecoderKind {
        DecoderKind::Mlo
    }

    fn decode(&self, point: &DataPoint) -> Result<(bool, bool)> {
        if point.detectors.iter().any(|d| d.t != 1) {
            return Err(Error::Validation("maximum-likelihood decoding needs perfect-stabilizer data".into()));
        }
        Ok(self.table.decode(self.table.syndrome_of(&self.layout, point)?).flips())
    }
}

/// Majority vote.
///
/// For the repetition code the detector history is folded into the final
/// syndrome, the two data-error patterns consistent with it are
/// reconstructed and the lighter one is assumed; this is the majority vote
/// over the final data readout. For the surface code it is the trivial
/// decoder that always predicts the most likely outcome, no flip.
#[derive(Clone, Debug)]
pub struct MajorityDecoder {
    pub layout: CodeLayout,
}

impl Decoder for MajorityDecoder {
    fn kind(&self) -> DecoderKind {
        DecoderKind::Majority
    }

    fn decode(&self, point: &DataPoint) -> Result<(bool, bool)> {
        if self.layout.kind == CodeKind::RotatedSurface {
            return Ok((false, false));
        }
        let mut syndrome = vec![false; self.layout.num_stabilizers()];
        for d in point.detectors.iter().filter(|d| d.kind == PauliType::Z) {
            let k = self
                .layout
                .stabilizer_at(d.coord())
                .ok_or_else(|| Error::Validation(format!("no stabilizer at {:?}", d.coord())))?;
            syndrome[k] ^= true;
        }
        // Stabilizer k compares data qubits k and k + 1.
        let mut e = false;
        let mut weight = 0;
        for &s in &syndrome {
            e ^= s;
            weight += usize::from(e);
        }
        let n = self.layout.num_data();
        let first_flipped = weight * 2 > n;
        Ok((first_flipped, false))
    }
}

/// Noise model of a [`Scenario`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseModel {
    /// Uniform circuit-level noise.
    Circuit,
    /// One depolarizing layer, perfect stabilizer readout.
    Perfect,
    /// Data-qubit bit flips each round, perfect gates and readout.
    BitFlip,
}

impl NoiseModel {
    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::Circuit => "circuit",
            NoiseModel::Perfect => "perfect",
            NoiseModel::BitFlip => "bitflip",
        }
    }
}

/// One shot stream: code, size, basis, noise model and strength.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub kind: CodeKind,
    pub distance: usize,
    pub rounds: usize,
    pub basis: Basis,
    pub noise: NoiseModel,
    pub p: f64,
}

impl Scenario {
    pub fn layout(&self) -> Result<CodeLayout> {
        match self.kind {
            CodeKind::Repetition => CodeLayout::repetition(self.distance),
            CodeKind::RotatedSurface => CodeLayout::rotated_surface(self.distance),
        }
    }

    pub fn feature_mode(&self) -> FeatureMode {
        match (self.noise, self.kind) {
            (NoiseModel::Perfect, _) => FeatureMode::Perfect,
            (_, CodeKind::Repetition) => FeatureMode::Repetition,
            (_, CodeKind::RotatedSurface) => FeatureMode::Circuit,
        }
    }

    pub fn info(&self) -> StreamInfo {
        let rounds = if self.noise == NoiseModel::Perfect { 1 } else { self.rounds };
        StreamInfo { kind: self.kind, distance: self.distance, rounds, p: self.p }
    }

    pub fn circuit(&self) -> Result<Circuit> {
        let noise = match self.noise {
            NoiseModel::Circuit => NoiseParams::uniform(self.p)?,
            NoiseModel::BitFlip => NoiseParams::data_bit_flip(self.p)?,
            NoiseModel::Perfect => {
                return Err(Error::Validation("perfect-stabilizer streams have no circuit".into()))
            }
        };
        build_memory_circuit(&self.layout()?, self.rounds, self.basis, &noise)
    }

    pub fn sample(&self, shots: usize, seed: u64) -> Result<Vec<DataPoint>> {
        match self.noise {
            NoiseModel::Perfect => sample_perfect_batch(&self.layout()?, self.p, seed, shots),
            _ => Ok(sample_batch(&self.circuit()?, seed, shots)),
        }
    }

    pub fn dem(&self) -> Result<DetectorErrorModel> {
        match self.noise {
            NoiseModel::Perfect => Ok(DetectorErrorModel::perfect(&self.layout()?, self.p)),
            _ => Ok(DetectorErrorModel::from_circuit(&self.circuit()?)),
        }
    }

    /// Builds a decoder for this stream; `model` is required for `gnn`.
    pub fn decoder(&self, kind: DecoderKind, model: Option<&Model<f32>>) -> Result<Box<dyn Decoder>> {
        Ok(match kind {
            DecoderKind::Gnn => {
                let model = model.ok_or_else(|| Error::Validation("the gnn decoder needs a checkpoint".into()))?;
                if model.config.mode != self.feature_mode() {
                    return Err(Error::Validation(format!(
                        "checkpoint was trained for {:?} features, this stream uses {:?}",
                        model.config.mode,
                        self.feature_mode()
                    )));
                }
                Box::new(GnnDecoder::new(model.clone()))
            }
            DecoderKind::Mwpm => Box::new(MatchingDecoder::informed(&self.dem()?, self.kind)?),
            DecoderKind::MwpmUninformed => Box::new(MatchingDecoder::uninformed(self.layout()?)),
            DecoderKind::Mlo => {
                if self.noise != NoiseModel::Perfect {
                    return Err(Error::Validation("the mlo decoder needs perfect-stabilizer data".into()));
                }
                Box::new(MlDecoder::new(self.layout()?, self.p)?)
            }
            DecoderKind::Majority => Box::new(MajorityDecoder { layout: self.layout()? }),
        })
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Per-round error rate `½(1 − (1 − 2P)^{1/d_t})` for a total failure rate `P`.
pub fn per_round_rate(total: f64, rounds: usize) -> f64 {
    let base = 1.0 - 2.0 * total;
    if base <= 0.0 {
        return 0.5;
    }
    0.5 * (1.0 - base.powf(1.0 / rounds.max(1) as f64))
}

/// Describes the shot stream a result was computed on.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamInfo {
    pub kind: CodeKind,
    pub distance: usize,
    pub rounds: usize,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub decoder: DecoderKind,
    pub kind: CodeKind,
    pub distance: usize,
    pub rounds: usize,
    pub p: f64,
    pub shots: u64,
    pub failures: u64,
    pub rate: f64,
    pub interval: (f64, f64),
    pub per_round: Option<f64>,
    pub seconds_per_shot: f64,
}

impl EvalResult {
    pub const HEADER: &'static str =
        "decoder\tcode\td\tdt\tp\tshots\tfailures\trate\tlo95\thi95\tper_round\tus_per_shot";

    pub fn new(decoder: DecoderKind, info: &StreamInfo, shots: u64, failures: u64, seconds: f64) -> Self {
        let rate = if shots == 0 { 0.0 } else { failures as f64 / shots as f64 };
        let per_round = (info.rounds > 1).then(|| per_round_rate(rate, info.rounds));
        Self {
            decoder,
            kind: info.kind,
            distance: info.distance,
            rounds: info.rounds,
            p: info.p,
            shots,
            failures,
            rate,
            interval: wilson_interval(failures, shots, 1.96),
            per_round,
            seconds_per_shot: if shots == 0 { 0.0 } else { seconds / shots as f64 },
        }
    }

    pub fn to_line(&self) -> String {
        let pr = self.per_round.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}\t{}\t{:.3}",
            self.decoder,
            self.kind,
            self.distance,
            self.rounds,
            self.p,
            self.shots,
            self.failures,
            self.rate,
            self.interval.0,
            self.interval.1,
            pr,
            self.seconds_per_shot * 1e6
        )
    }
}

/// A shot fails when any labelled head is predicted wrongly.
pub fn is_failure(point: &DataPoint, prediction: (bool, bool)) -> bool {
    point.labels.z.is_some_and(|z| z != prediction.0) || point.labels.x.is_some_and(|x| x != prediction.1)
}

/// Per-shot failure flags and elapsed decode time.
pub fn failures_of(decoder: &dyn Decoder, points: &[DataPoint]) -> Result<(Vec<bool>, f64)> {
    let started = Instant::now();
    let preds = decoder.decode_all(points)?;
    let secs = started.elapsed().as_secs_f64();
    Ok((points.iter().zip(preds).map(|(p, q)| is_failure(p, q)).collect(), secs))
}

pub fn evaluate(decoder: &dyn Decoder, points: &[DataPoint], info: &StreamInfo) -> Result<EvalResult> {
    let (fails, secs) = failures_of(decoder, points)?;
    let failures = fails.iter().filter(|&&f| f).count() as u64;
    Ok(EvalResult::new(decoder.kind(), info, points.len() as u64, failures, secs))
}

/// Disagreement counts between two decoders on the same shots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Paired {
    pub both: u64,
    pub only_first: u64,
    pub only_second: u64,
}

impl Paired {
    /// McNemar statistic with continuity correction.
    pub fn mcnemar(&self) -> f64 {
        let (b, c) = (self.only_first as f64, self.only_second as f64);
        if b + c == 0.0 {
            return 0.0;
        }
        ((b - c).abs() - 1.0).max(0.0).powi(2) / (b + c)
    }
}

/// Results of several decoders on one shot stream.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub results: Vec<EvalResult>,
    pub failures: Vec<Vec<bool>>,
}

impl Comparison {
    pub fn paired(&self, a: usize, b: usize) -> Paired {
        let mut out = Paired { both: 0, only_first: 0, only_second: 0 };
        for (&fa, &fb) in self.failures[a].iter().zip(&self.failures[b]) {
            match (fa, fb) {
                (true, true) => out.both += 1,
                (true, false) => out.only_first += 1,
                (false, true) => out.only_second += 1,
                _ => {}
            }
        }
        out
    }

    pub fn get(&self, kind: DecoderKind) -> Option<&EvalResult> {
        self.results.iter().find(|r| r.decoder == kind)
    }

    /// Aligned summary table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<16} {:>9} {:>9} {:>11} {:>23}\n", "decoder", "shots", "failures", "rate", "95% interval");
        for r in &self.results {
            s.push_str(&format!(
                "{:<16} {:>9} {:>9} {:>11.5} {:>11.5}..{:<11.5}\n",
                r.decoder.name(),
                r.shots,
                r.failures,
                r.rate,
                r.interval.0,
                r.interval.1
            ));
        }
        s
    }
}

/// Runs every decoder on the same points.
pub fn compare(decoders: &[&dyn Decoder], points: &[DataPoint], info: &StreamInfo) -> Result<Comparison> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for d in decoders {
        let (f, secs) = failures_of(*d, points)?;
        let count = f.iter().filter(|&&x| x).count() as u64;
        results.push(EvalResult::new(d.kind(), info, points.len() as u64, count, secs));
        failures.push(f);
    }
    Ok(Comparison { results, failures })
}

/// Mean timings of the graph decoder on one shot stream.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchPoint {
    pub distance: usize,
    pub rounds: usize,
    pub shots: usize,
    pub mean_nodes: f64,
    /// Seconds per shot spent building detector graphs.
    pub graph_s: f64,
    /// Seconds per shot spent in the network forward pass.
    pub decode_s: f64,
}

impl BenchPoint {
    pub const HEADER: &'static str = "d\tdt\tshots\tmean_nodes\tgraph_us\tdecode_us";

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.2}\t{:.3}\t{:.3}",
            self.distance,
            self.rounds,
            self.shots,
            self.mean_nodes,
            self.graph_s * 1e6,
            self.decode_s * 1e6
        )
    }
}

/// Times graph construction and inference separately. Batches are
/// assembled before the clock starts.
pub fn bench_gnn(model: &Model<f32>, points: &[DataPoint], info: &StreamInfo, batch: usize) -> Result<BenchPoint> {
    if points.is_empty() {
        return Err(Error::Validation("nothing to benchmark".into()));
    }
    let mode = model.config.mode;
    let started = Instant::now();
    let graphs: Vec<DetectorGraph> = points.iter().map(|p| build_graph(p, mode)).collect();
    let graph_s = started.elapsed().as_secs_f64();

    let nonempty: Vec<&DetectorGraph> = graphs.iter().filter(|g| !g.is_empty()).collect();
    let batches: Vec<GraphBatch<f32>> =
        nonempty.chunks(batch.max(1)).map(GraphBatch::new).collect::<Result<_>>()?;
    let started = Instant::now();
    for b in &batches {
        std::hint::black_box(model.forward(b)?);
    }
    let decode_s = started.elapsed().as_secs_f64();
    let n = points.len() as f64;
    Ok(BenchPoint {
        distance: info.distance,
        rounds: info.rounds,
        shots: points.len(),
        mean_nodes: graphs.iter().map(|g| g.num_nodes()).sum::<usize>() as f64 / n,
        graph_s: graph_s / n,
        decode_s: decode_s / n,
    })
}

/// Least-squares fit of `T = C · (d²·d_t)^α` in log-log space.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    /// `(d, d_t, T)` samples.
    pub points: Vec<(usize, usize, f64)>,
    /// Which samples entered the fit.
    pub used: Vec<bool>,
    pub c: f64,
    pub alpha: f64,
    /// `ln T − ln(C (d² d_t)^α)` for every sample.
    pub residuals: Vec<f64>,
}

impl ScalingFit {
    /// Fits all samples whose `d` lies in `range` (all when `None`).
    pub fn fit(points: &[(usize, usize, f64)], range: Option<(usize, usize)>) -> Result<Self> {
        let used: Vec<bool> =
            points.iter().map(|&(d, _, _)| range.is_none_or(|(lo, hi)| (lo..=hi).contains(&d))).collect();
        let sel: Vec<(f64, f64)> = points
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|(&(d, dt, t), _)| (((d * d * dt) as f64).ln(), t.ln()))
            .collect();
        if sel.len() < 4 {
            return Err(Error::Validation(format!("a scaling fit needs at least 4 points, got {}", sel.len())));
        }
        if sel.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite("scaling fit input"));
        }
        let n = sel.len() as f64;
        let mx = sel.iter().map(|p| p.0).sum::<f64>() / n;
        let my = sel.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = sel.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = sel.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx == 0.0 {
            return Err(Error::Validation("scaling fit needs distinct sizes".into()));
        }
        let alpha = sxy / sxx;
        let ln_c = my - alpha * mx;
        let residuals = points
            .iter()
            .map(|&(d, dt, t)| t.ln() - (ln_c + alpha * ((d * d * dt) as f64).ln()))
            .collect();
        Ok(Self { points: points.to_vec(), used, c: ln_c.exp(), alpha, residuals })
    }

    pub fn to_lines(&self) -> String {
        let mut s = format!("# T = C * (d^2 * dt)^alpha, C = {:.6e}, alpha = {:.4}\n", self.c, self.alpha);
        s.push_str("d\tdt\tT\tused\tresidual\n");
        for (((d, dt, t), u), r) in self.points.iter().zip(&self.used).zip(&self.residuals) {
            s.push_str(&format!("{d}\t{dt}\t{t:.6e}\t{}\t{r:+.4}\n", u8::from(*u)));
        }
        s
    }
}
