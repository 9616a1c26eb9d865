use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qecw::dataset::{
    ingest_raw, load_dataset, parse_raw_text, read_raw, save_dataset, serialize_raw, subwindow, write_raw,
    DatasetHeader, LabelBasis, NoiseDescriptor, RawSchema,
};
use qecw::eval::{bench_gnn, compare, DecoderKind, NoiseModel, Scenario, ScalingFit, StreamInfo};
use qecw::gnn::{load_checkpoint, Model, ModelConfig};
use qecw::train::{
    epoch_lines, train_fixed_with, train_streaming_with, EpochRecord, Generator, MixGenerator, NoiseSource, TrainConfig,
};
use qecw::{rng, sim, Basis, CodeKind, CodeLayout, DataPoint, Error, FeatureMode, Result};

#[derive(Parser)]
#[command(name = "qecw", version, about = "Decoder workbench for repetition and rotated surface codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample shots and write a dataset file.
    Gen(GenArgs),
    /// Train the graph decoder.
    Train(TrainArgs),
    /// Failure rate of one decoder.
    Eval(EvalArgs),
    /// Paired failure rates of several decoders on the same shots.
    Compare(EvalArgs),
    /// Inference timing of the graph decoder and a power-law fit.
    Bench(BenchArgs),
    /// Print the detector error model.
    Dem(Common),
    /// Turn raw measurement rows into a dataset file.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Code {
    Rep,
    Surface,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Z,
    X,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Circuit,
    Perfect,
    Bitflip,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Gnn,
    Mwpm,
    MwpmUninformed,
    Mlo,
    Majority,
}

impl From<DecoderArg> for DecoderKind {
    fn from(d: DecoderArg) -> Self {
        match d {
            DecoderArg::Gnn => DecoderKind::Gnn,
            DecoderArg::Mwpm => DecoderKind::Mwpm,
            DecoderArg::MwpmUninformed => DecoderKind::MwpmUninformed,
            DecoderArg::Mlo => DecoderKind::Mlo,
            DecoderArg::Majority => DecoderKind::Majority,
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, value_enum, default_value = "surface")]
    code: Code,
    /// Code distance; repeat for sweeps where supported.
    #[arg(long = "d", default_value = "3")]
    d: Vec<usize>,
    /// Stabilizer rounds.
    #[arg(long, default_value_t = 3)]
    dt: usize,
    /// Error rate; repeat for mixes or sweeps.
    #[arg(long = "p")]
    p: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "z")]
    basis: BasisArg,
    #[arg(long, value_enum, default_value = "circuit")]
    mode: Mode,
    #[arg(long, env = "QECW_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn kind(&self) -> CodeKind {
        match self.code {
            Code::Rep => CodeKind::Repetition,
            Code::Surface => CodeKind::RotatedSurface,
        }
    }

    fn basis(&self) -> Basis {
        match self.basis {
            BasisArg::Z => Basis::Z,
            BasisArg::X => Basis::X,
        }
    }

    fn noise(&self) -> NoiseModel {
        match self.mode {
            Mode::Circuit => NoiseModel::Circuit,
            Mode::Perfect => NoiseModel::Perfect,
            Mode::Bitflip => NoiseModel::BitFlip,
        }
    }

    fn single_d(&self) -> Result<usize> {
        match self.d[..] {
            [d] => Ok(d),
            _ => Err(Error::Validation("this command takes exactly one --d".into())),
        }
    }

    fn ps_or(&self, default: &[f64]) -> Vec<f64> {
        if self.p.is_empty() {
            default.to_vec()
        } else {
            self.p.clone()
        }
    }

    fn scenario(&self, d: usize, p: f64) -> Scenario {
        Scenario { kind: self.kind(), distance: d, rounds: self.dt, basis: self.basis(), noise: self.noise(), p }
    }

    fn layout(&self, d: usize) -> Result<CodeLayout> {
        self.scenario(d, 0.0).layout()
    }

    fn descriptor(&self, ps: &[f64]) -> NoiseDescriptor {
        match self.mode {
            Mode::Circuit => NoiseDescriptor::Circuit(ps.to_vec()),
            Mode::Perfect => NoiseDescriptor::CodeCapacity(ps.to_vec()),
            Mode::Bitflip => NoiseDescriptor::BitFlip(ps.to_vec()),
        }
    }

    fn feature_mode(&self) -> FeatureMode {
        self.scenario(3, 0.0).feature_mode()
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Also write raw measurement rows (and a `.schema` sidecar) here.
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Split repetition-code shots into windows of this distance.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Train on a fixed dataset instead of streaming fresh samples.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Where the final checkpoint is written.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from the checkpoint if it exists.
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 100_000)]
    pool: usize,
    #[arg(long, default_value_t = 1000)]
    batch: usize,
    #[arg(long = "replace-frac", default_value_t = 0.25)]
    replace_frac: f64,
    /// Training fraction of a fixed dataset.
    #[arg(long, default_value_t = 0.99)]
    split: f64,
    /// Test shots for streaming training.
    #[arg(long = "test-shots", default_value_t = 10_000)]
    test_shots: usize,
    #[arg(long, value_enum, default_value = "full")]
    model: ModelSize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelSize {
    Full,
    Small,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Repeat to select several decoders (compare defaults to all that apply).
    #[arg(long, value_enum)]
    decoder: Vec<DecoderArg>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Evaluate on a dataset file instead of fresh samples.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Trained weights; an untrained full-size network is used otherwise.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    batch: usize,
}

#[derive(Args)]
struct IngestArgs {
    /// Raw rows, bit-packed or as `0`/`1` text with `--text`.
    #[arg(long)]
    raw: PathBuf,
    /// Sidecar describing the rows (defaults to `<raw>.schema`).
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    text: bool,
    /// Split repetition-code shots into windows of this distance.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Identifier stored in the dataset header.
    #[arg(long, default_value = "external")]
    source: String,
}

/// Writes to stdout and, when given, to a file.
struct Sink {
    file: Option<File>,
}

impl Sink {
    fn new(path: Option<&Path>) -> Result<Self> {
        Ok(Self { file: path.map(File::create).transpose()? })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        let s = s.strip_suffix('\n').unwrap_or(s);
        println!("{s}");
        if let Some(f) = &mut self.file {
            writeln!(f, "{s}")?;
            f.flush()?;
        }
        Ok(())
    }
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn label_basis(c: &Common) -> LabelBasis {
    match c.mode {
        Mode::Perfect => LabelBasis::Both,
        _ => c.basis().into(),
    }
}

fn header_for(c: &Common, d: usize, ps: &[f64]) -> DatasetHeader {
    DatasetHeader {
        kind: c.kind(),
        distance: d as u16,
        rounds: if c.mode == Mode::Perfect { 1 } else { c.dt as u16 },
        basis: label_basis(c),
        mode: c.feature_mode(),
        noise: c.descriptor(ps),
        count: 0,
    }
}

fn windowed_path(out: &Path, offset: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("qgd");
    out.with_file_name(format!("{stem}.w{offset}.{ext}"))
}

/// Writes one dataset per window offset plus the merged dataset at `out`.
fn write_windows(out: &Path, header: &DatasetHeader, windows: Vec<Vec<DataPoint>>) -> Result<usize> {
    let n = windows.len();
    let mut merged = Vec::new();
    for (o, pts) in windows.into_iter().enumerate() {
        save_dataset(windowed_path(out, o), header, &pts)?;
        merged.extend(pts);
    }
    save_dataset(out, header, &merged)?;
    Ok(n)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let c = &a.common;
    let out = c.out.as_ref().ok_or_else(|| Error::Validation("gen needs --out".into()))?;
    let d = c.single_d()?;
    let ps = c.ps_or(&[0.001]);
    if (a.raw.is_some() || a.window.is_some()) && c.mode == Mode::Perfect {
        return Err(Error::Validation("raw rows need a circuit (circuit or bitflip mode)".into()));
    }
    let mut points = Vec::new();
    let mut raw_rows = Vec::new();
    for (k, &p) in ps.iter().enumerate() {
        let s = c.scenario(d, p);
        let seed = rng::derive(c.seed, k as u64);
        if a.raw.is_some() || a.window.is_some() {
            let circuit = s.circuit()?;
            let records = sim::sample_records(&circuit, seed, c.shots);
            raw_rows.extend(serialize_raw(&circuit, &records));
            points.extend(records.iter().map(|r| circuit.data_point(r)));
        } else {
            points.extend(s.sample(c.shots, seed)?);
        }
    }
    let schema = RawSchema { kind: c.kind(), distance: d, rounds: c.dt, basis: c.basis() };
    if let Some(raw) = &a.raw {
        let mut f = io::BufWriter::new(File::create(raw)?);
        write_raw(&mut f, &schema, &raw_rows)?;
        f.flush()?;
        std::fs::write(sidecar_path(raw), schema.to_sidecar()?)?;
    }
    match a.window {
        Some(w) => {
            let header = header_for(c, w, &ps);
            let n = write_windows(out, &header, subwindow(&schema, &raw_rows, w)?)?;
            eprintln!("wrote {n} windows of {} shots", raw_rows.len());
        }
        None => {
            save_dataset(out, &header_for(c, d, &ps), &points)?;
            eprintln!("wrote {} shots to {}", points.len(), out.display());
        }
    }
    Ok(())
}

fn sidecar_path(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".schema");
    PathBuf::from(s)
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let schema_path = a.schema.clone().unwrap_or_else(|| sidecar_path(&a.raw));
    let schema = RawSchema::from_sidecar(&std::fs::read_to_string(schema_path)?)?;
    let rows = if a.text {
        parse_raw_text(BufReader::new(File::open(&a.raw)?), &schema)?
    } else {
        read_raw(&mut BufReader::new(File::open(&a.raw)?), &schema)?
    };
    let header = |d: usize| DatasetHeader {
        kind: schema.kind,
        distance: d as u16,
        rounds: schema.rounds as u16,
        basis: schema.basis.into(),
        mode: match schema.kind {
            CodeKind::Repetition => FeatureMode::Repetition,
            CodeKind::RotatedSurface => FeatureMode::Circuit,
        },
        noise: NoiseDescriptor::External(a.source.clone()),
        count: 0,
    };
    match a.window {
        Some(w) => {
            let n = write_windows(&a.out, &header(w), subwindow(&schema, &rows, w)?)?;
            eprintln!("wrote {n} windows of {} shots", rows.len());
        }
        None => {
            let pts = ingest_raw(&schema, &rows)?;
            save_dataset(&a.out, &header(schema.distance), &pts)?;
            eprintln!("wrote {} shots to {}", pts.len(), a.out.display());
        }
    }
    Ok(())
}

fn model_config(size: ModelSize, mode: FeatureMode) -> ModelConfig {
    match size {
        ModelSize::Full => ModelConfig::full(mode),
        ModelSize::Small => ModelConfig::small(mode),
    }
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let c = &a.common;
    let mut sink = Sink::new(c.out.as_deref())?;
    let d = c.single_d()?;
    let resume = match (&a.checkpoint, a.resume) {
        (Some(p), true) if p.exists() => Some(load_checkpoint(p)?),
        _ => None,
    };

    let (mode, fixed) = match &a.dataset {
        Some(path) => {
            let (h, pts) = load_dataset(path)?;
            (h.mode, Some(pts))
        }
        None => (c.feature_mode(), None),
    };
    let mut cfg = TrainConfig::new(model_config(a.model, mode));
    cfg.epochs = a.epochs;
    cfg.pool = a.pool;
    cfg.batch = a.batch;
    cfg.micro_batch = a.batch;
    cfg.replace_frac = a.replace_frac;
    cfg.split = a.split;
    cfg.seed = c.seed;
    cfg.checkpoint = a.checkpoint.clone();

    sink.line("epoch\tsplit\tmetric\tvalue")?;
    let mut observer = |e: &EpochRecord| {
        let text = epoch_lines(e);
        if let Err(err) = text.lines().try_for_each(|l| sink.line(l)) {
            eprintln!("warning: could not write report: {err}");
        }
    };

    let result = match fixed {
        Some(pts) => train_fixed_with(&cfg, &pts, c.seed, resume, &mut observer),
        None => {
            let layout = c.layout(d)?;
            let default_mix: &[f64] = match c.mode {
                Mode::Perfect => &[0.01, 0.05, 0.1, 0.15],
                _ => &[0.001, 0.002, 0.003, 0.004, 0.005],
            };
            let ps = c.ps_or(default_mix);
            let source = match c.mode {
                Mode::Perfect => NoiseSource::Perfect(layout),
                Mode::Circuit => NoiseSource::Circuit {
                    bases: match c.kind() {
                        CodeKind::Repetition => vec![Basis::Z],
                        CodeKind::RotatedSurface => vec![Basis::Z, Basis::X],
                    },
                    layout,
                    rounds: c.dt,
                },
                Mode::Bitflip => NoiseSource::BitFlip { layout, rounds: c.dt },
            };
            let mut gen = MixGenerator::new(source.clone(), ps.clone(), rng::derive(c.seed, 1))?;
            let mut test_gen = MixGenerator::new(source, ps, rng::derive(c.seed, 2))?;
            let test = test_gen.generate(a.test_shots)?;
            train_streaming_with(&cfg, &mut gen, &test, resume, &mut observer)
        }
    };
    match result {
        Ok(outcome) => {
            if let Some(p) = outcome.report.checkpoint {
                eprintln!("checkpoint written to {}", p.display());
            }
            Ok(())
        }
        Err(stop) => Err(stop.error),
    }
}

fn load_model(path: Option<&Path>) -> Result<Option<Model<f32>>> {
    match path {
        Some(p) => {
            if !p.exists() {
                return Err(Error::Validation(format!("checkpoint {} does not exist", p.display())));
            }
            Ok(Some(load_checkpoint(p)?.model))
        }
        None => Ok(None),
    }
}

/// Shot streams to evaluate: one per `(d, p)` pair, or the dataset.
fn streams(c: &Common, dataset: Option<&Path>) -> Result<Vec<(Scenario, Vec<DataPoint>)>> {
    if let Some(path) = dataset {
        let (h, pts) = load_dataset(path)?;
        let p = match (&h.noise, c.p.as_slice()) {
            (_, [p]) => *p,
            (
                NoiseDescriptor::Circuit(v) | NoiseDescriptor::CodeCapacity(v) | NoiseDescriptor::BitFlip(v),
                [],
            ) if v.len() == 1 => v[0],
            _ => 0.0,
        };
        let noise = match h.noise {
            NoiseDescriptor::CodeCapacity(_) => NoiseModel::Perfect,
            NoiseDescriptor::BitFlip(_) => NoiseModel::BitFlip,
            _ => NoiseModel::Circuit,
        };
        let basis = match h.basis {
            LabelBasis::X => Basis::X,
            _ => Basis::Z,
        };
        let s = Scenario { kind: h.kind, distance: h.distance as usize, rounds: h.rounds as usize, basis, noise, p };
        return Ok(vec![(s, pts)]);
    }
    let ps = c.ps_or(&[0.001]);
    let mut out = Vec::new();
    for (i, &d) in c.d.iter().enumerate() {
        for (j, &p) in ps.iter().enumerate() {
            let s = c.scenario(d, p);
            let seed = rng::derive(c.seed, (i * ps.len() + j) as u64);
            let pts = s.sample(c.shots, seed)?;
            out.push((s, pts));
        }
    }
    Ok(out)
}

fn applicable(s: &Scenario, model: bool) -> Vec<DecoderKind> {
    DecoderKind::ALL
        .into_iter()
        .filter(|k| match k {
            DecoderKind::Gnn => model,
            DecoderKind::Mlo => s.noise == NoiseModel::Perfect && s.distance <= qecw::ml::MAX_DISTANCE,
            _ => true,
        })
        .collect()
}

fn cmd_eval(a: &EvalArgs, paired: bool) -> Result<()> {
    let c = &a.common;
    let mut sink = Sink::new(c.out.as_deref())?;
    let model = load_model(a.checkpoint.as_deref())?;
    if !paired && a.decoder.len() != 1 {
        return Err(Error::Validation("eval takes exactly one --decoder (use compare for several)".into()));
    }
    sink.line(qecw::eval::EvalResult::HEADER)?;
    let mut tables = String::new();
    for (s, pts) in streams(c, a.dataset.as_deref())? {
        let kinds: Vec<DecoderKind> = if a.decoder.is_empty() {
            applicable(&s, model.is_some())
        } else {
            a.decoder.iter().map(|&d| d.into()).collect()
        };
        if kinds.iter().any(|&k| k != DecoderKind::Gnn && k != DecoderKind::Majority && k != DecoderKind::MwpmUninformed)
            && s.p == 0.0
            && a.dataset.is_some()
        {
            return Err(Error::Validation("pass --p to evaluate a dataset with a model-based decoder".into()));
        }
        let decoders = kinds.iter().map(|&k| s.decoder(k, model.as_ref())).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&dyn qecw::eval::Decoder> = decoders.iter().map(|d| d.as_ref()).collect();
        let info: StreamInfo = s.info();
        let cmp = compare(&refs, &pts, &info)?;
        for r in &cmp.results {
            sink.line(&r.to_line())?;
        }
        if paired {
            tables.push_str(&format!("\n# {} d={} dt={} p={} shots={}\n", s.kind, s.distance, info.rounds, s.p, pts.len()));
            tables.push_str(&cmp.table());
            for i in 0..kinds.len() {
                for j in i + 1..kinds.len() {
                    let pr = cmp.paired(i, j);
                    tables.push_str(&format!(
                        "paired {} vs {}: only first fails {}, only second fails {}, McNemar {:.2}\n",
                        kinds[i],
                        kinds[j],
                        pr.only_first,
                        pr.only_second,
                        pr.mcnemar()
                    ));
                }
            }
        }
    }
    if paired {
        eprint!("{tables}");
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let c = &a.common;
    let mut sink = Sink::new(c.out.as_deref())?;
    let mode = c.feature_mode();
    let model = match load_model(a.checkpoint.as_deref())? {
        Some(m) => m,
        None => Model::<f32>::init(ModelConfig::full(mode), c.seed)?,
    };
    let p = *c.ps_or(&[0.05]).first().unwrap_or(&0.05);
    sink.line(qecw::eval::BenchPoint::HEADER)?;
    let mut samples = Vec::new();
    for (i, &d) in c.d.iter().enumerate() {
        let s = c.scenario(d, p);
        let pts = s.sample(c.shots, rng::derive(c.seed, i as u64))?;
        let b = bench_gnn(&model, &pts, &s.info(), a.batch)?;
        sink.line(&b.to_line())?;
        samples.push((d, s.info().rounds, b.decode_s));
    }
    if samples.len() >= 4 {
        let fit = ScalingFit::fit(&samples, None)?;
        for l in fit.to_lines().lines() {
            sink.line(l)?;
        }
    } else {
        eprintln!("fewer than 4 sizes, skipping the scaling fit");
    }
    Ok(())
}

fn cmd_dem(c: &Common) -> Result<()> {
    let mut sink = Sink::new(c.out.as_deref())?;
    let p = *c.ps_or(&[0.001]).first().unwrap_or(&0.001);
    let dem = c.scenario(c.single_d()?, p).dem()?;
    sink.line(&dem.to_text())
}

fn run(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Gen(a) => a.common.threads,
        Command::Train(a) => a.common.threads,
        Command::Eval(a) | Command::Compare(a) => a.common.threads,
        Command::Bench(a) => a.common.threads,
        Command::Dem(c) => c.threads,
        Command::Ingest(_) => None,
    };
    init_threads(threads)?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a, false),
        Command::Compare(a) => cmd_eval(a, true),
        Command::Bench(a) => cmd_bench(a),
        Command::Dem(c) => cmd_dem(c),
        Command::Ingest(a) => cmd_ingest(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
