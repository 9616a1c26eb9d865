//! Dataset files and raw measurement records.
//!
//! # Dataset file
//!
//! Little-endian throughout.
//!
//! ```text
//! header:  "QGD1" kind:u8 d:u16 rounds:u16 basis:u8 mode:u8 noise count:u64
//! noise:   tag:u8 (0 circuit, 1 code capacity, 2 bit flip) n:u16 p:f64 * n
//!        | tag:u8 (3 external) len:u16 utf8 * len
//! record:  n:u16 (type:u8 x2:i16 y2:i16 t:u16) * n  label:u8
//! ```
//!
//! `basis` is 0 for Z, 1 for X, 2 when both labels are present. In the label
//! byte, bit 0 is the label value, bit 1 the head it belongs to (0 = Z,
//! 1 = X) and bit 2 whether it is present; bits 3 and 4 carry the value and
//! presence of the other head.
//!
//! # Raw records
//!
//! One row per shot: initial data bits, then the ancilla bits round by round
//! (stabilizer order within a round), then the final data bits. Rows are
//! packed least-significant bit first and padded to whole bytes. A small
//! `key=value` text sidecar describes the layout.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::geometry::{CodeKind, CodeLayout, PauliType};
use crate::graph::FeatureMode;
use crate::sim::{Basis, Circuit, DataPoint, DetectorEvent, Labels, MeasurementRecord};

pub const MAGIC: &[u8; 4] = b"QGD1";
const VERSION_DIGIT: u8 = b'1';

/// Which labels the records of a dataset carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelBasis {
    Z,
    X,
    Both,
}

impl LabelBasis {
    fn to_u8(self) -> u8 {
        match self {
            LabelBasis::Z => 0,
            LabelBasis::X => 1,
            LabelBasis::Both => 2,
        }
    }

    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(LabelBasis::Z),
            1 => Some(LabelBasis::X),
            2 => Some(LabelBasis::Both),
            _ => None,
        }
    }
}

impl From<Basis> for LabelBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Z => LabelBasis::Z,
            Basis::X => LabelBasis::X,
        }
    }
}

/// Where the records came from.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseDescriptor {
    /// Uniform circuit-level noise at each listed strength.
    Circuit(Vec<f64>),
    /// One depolarizing layer with perfect stabilizer readout.
    CodeCapacity(Vec<f64>),
    /// Data-qubit bit flips only.
    BitFlip(Vec<f64>),
    /// Measured outside this crate; free-form identifier.
    External(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub kind: CodeKind,
    pub distance: u16,
    pub rounds: u16,
    pub basis: LabelBasis,
    pub mode: FeatureMode,
    pub noise: NoiseDescriptor,
    pub count: u64,
}

impl DatasetHeader {
    pub fn layout(&self) -> Result<CodeLayout> {
        match self.kind {
            CodeKind::Repetition => CodeLayout::repetition(self.distance as usize),
            CodeKind::RotatedSurface => CodeLayout::rotated_surface(self.distance as usize),
        }
    }
}

fn write_header<W: Write>(w: &mut W, h: &DatasetHeader) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u8(h.kind.to_u8())?;
    w.write_u16::<LE>(h.distance)?;
    w.write_u16::<LE>(h.rounds)?;
    w.write_u8(h.basis.to_u8())?;
    w.write_u8(h.mode.to_u8())?;
    let (tag, ps) = match &h.noise {
        NoiseDescriptor::Circuit(ps) => (0, ps),
        NoiseDescriptor::CodeCapacity(ps) => (1, ps),
        NoiseDescriptor::BitFlip(ps) => (2, ps),
        NoiseDescriptor::External(id) => {
            w.write_u8(3)?;
            let bytes = id.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| Error::Validation("noise id too long".into()))?;
            w.write_u16::<LE>(len)?;
            w.write_all(bytes)?;
            w.write_u64::<LE>(h.count)?;
            return Ok(());
        }
    };
    w.write_u8(tag)?;
    let n = u16::try_from(ps.len()).map_err(|_| Error::Validation("too many noise strengths".into()))?;
    w.write_u16::<LE>(n)?;
    for &p in ps {
        w.write_f64::<LE>(p)?;
    }
    w.write_u64::<LE>(h.count)?;
    Ok(())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn read_header<R: Read>(r: &mut R) -> Result<DatasetHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic[..3] == MAGIC[..3] && magic[3] != VERSION_DIGIT && magic[3].is_ascii_digit() {
        return Err(Error::Version { found: magic[3] - b'0', expected: VERSION_DIGIT - b'0' });
    }
    if &magic != MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let bad = |what: &str| Error::Format(format!("bad {what} field"));
    let kind = CodeKind::from_u8(r.read_u8()?).ok_or_else(|| bad("code kind"))?;
    let distance = r.read_u16::<LE>()?;
    let rounds = r.read_u16::<LE>()?;
    let basis = LabelBasis::from_u8(r.read_u8()?).ok_or_else(|| bad("basis"))?;
    let mode = FeatureMode::from_u8(r.read_u8()?).ok_or_else(|| bad("feature mode"))?;
    let tag = r.read_u8()?;
    let noise = if tag == 3 {
        let len = r.read_u16::<LE>()? as usize;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes)?;
        NoiseDescriptor::External(String::from_utf8(bytes).map_err(|_| bad("noise id"))?)
    } else {
        let n = r.read_u16::<LE>()? as usize;
        let ps = (0..n).map(|_| r.read_f64::<LE>()).collect::<std::io::Result<Vec<_>>>()?;
        match tag {
            0 => NoiseDescriptor::Circuit(ps),
            1 => NoiseDescriptor::CodeCapacity(ps),
            2 => NoiseDescriptor::BitFlip(ps),
            _ => return Err(bad("noise tag")),
        }
    };
    let count = r.read_u64::<LE>()?;
    Ok(DatasetHeader { kind, distance, rounds, basis, mode, noise, count })
}

fn label_byte(l: &Labels) -> u8 {
    let (primary, other) = match (l.z, l.x) {
        (None, Some(x)) => ((Some(x), 1u8), None),
        (z, x) => ((z, 0u8), x),
    };
    let mut b = primary.1 << 1;
    if let Some(v) = primary.0 {
        b |= 0b100 | u8::from(v);
    }
    if let Some(v) = other {
        b |= 0b10000 | u8::from(v) << 3;
    }
    b
}

fn labels_from_byte(b: u8) -> Result<Labels> {
    if b >> 5 != 0 {
        return Err(Error::Format(format!("bad label byte {b:#04x}")));
    }
    let value = b & 1 != 0;
    let present = b & 0b100 != 0;
    let head_x = b & 0b10 != 0;
    let other = (b & 0b10000 != 0).then_some(b & 0b1000 != 0);
    let primary = present.then_some(value);
    Ok(if head_x { Labels { z: other, x: primary } } else { Labels { z: primary, x: other } })
}

struct Bounds {
    min: (i32, i32),
    max: (i32, i32),
    max_t: u32,
}

impl Bounds {
    fn of(h: &DatasetHeader) -> Result<Self> {
        let (lo, hi) = h.layout()?.footprint();
        let max_t = u32::from(h.rounds).max(1) + 1;
        Ok(Self { min: (lo.x2, lo.y2), max: (hi.x2, hi.y2), max_t })
    }

    fn check(&self, d: &DetectorEvent) -> Result<()> {
        let ok = (self.min.0..=self.max.0).contains(&d.x2)
            && (self.min.1..=self.max.1).contains(&d.y2)
            && d.t <= self.max_t;
        if ok {
            Ok(())
        } else {
            Err(Error::Format(format!("detector {d:?} lies outside the layout")))
        }
    }
}

/// Writes a complete dataset; `header.count` is replaced by `points.len()`.
pub fn write_dataset<W: Write>(w: &mut W, header: &DatasetHeader, points: &[DataPoint]) -> Result<()> {
    let header = DatasetHeader { count: points.len() as u64, ..header.clone() };
    let bounds = Bounds::of(&header)?;
    write_header(w, &header)?;
    for p in points {
        let n = u16::try_from(p.detectors.len())
            .map_err(|_| Error::Validation("more than 65535 detectors in one shot".into()))?;
        w.write_u16::<LE>(n)?;
        for d in &p.detectors {
            bounds.check(d)?;
            w.write_u8(d.kind.to_u8())?;
            w.write_i16::<LE>(d.x2 as i16)?;
            w.write_i16::<LE>(d.y2 as i16)?;
            w.write_u16::<LE>(u16::try_from(d.t).map_err(|_| Error::Validation("round index too large".into()))?)?;
        }
        w.write_u8(label_byte(&p.labels))?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<(DatasetHeader, Vec<DataPoint>)> {
    let header = read_header(r).map_err(|e| match e {
        Error::Io(io) => truncated(io),
        e => e,
    })?;
    let bounds = Bounds::of(&header)?;
    let mut points = Vec::with_capacity(header.count.min(1 << 24) as usize);
    for _ in 0..header.count {
        let n = r.read_u16::<LE>().map_err(truncated)?;
        let mut detectors = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let kind = PauliType::from_u8(r.read_u8().map_err(truncated)?)
                .ok_or_else(|| Error::Format("bad detector type".into()))?;
            let x2 = i32::from(r.read_i16::<LE>().map_err(truncated)?);
            let y2 = i32::from(r.read_i16::<LE>().map_err(truncated)?);
            let t = u32::from(r.read_u16::<LE>().map_err(truncated)?);
            let d = DetectorEvent { kind, x2, y2, t };
            bounds.check(&d)?;
            detectors.push(d);
        }
        let labels = labels_from_byte(r.read_u8().map_err(truncated)?)?;
        points.push(DataPoint { detectors, labels });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last record".into()));
    }
    Ok((header, points))
}

pub fn save_dataset(path: impl AsRef<Path>, header: &DatasetHeader, points: &[DataPoint]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, header, points)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<DataPoint>)> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

/// Describes the rows of a raw-record file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSchema {
    pub kind: CodeKind,
    pub distance: usize,
    pub rounds: usize,
    pub basis: Basis,
}

impl RawSchema {
    pub fn layout(&self) -> Result<CodeLayout> {
        match self.kind {
            CodeKind::Repetition => CodeLayout::repetition(self.distance),
            CodeKind::RotatedSurface => CodeLayout::rotated_surface(self.distance),
        }
    }

    fn counts(&self) -> Result<(usize, usize)> {
        let l = self.layout()?;
        Ok((l.num_data(), l.num_stabilizers()))
    }

    pub fn row_bits(&self) -> Result<usize> {
        let (n, s) = self.counts()?;
        Ok(2 * n + s * self.rounds)
    }

    pub fn row_bytes(&self) -> Result<usize> {
        Ok(self.row_bits()?.div_ceil(8))
    }

    pub fn to_sidecar(&self) -> Result<String> {
        Ok(format!(
            "code={}\nd={}\ndt={}\nbasis={}\nrow_bits={}\nrow_bytes={}\nbit_order=lsb0\nfields=initial,ancilla_by_round,final\n",
            self.kind,
            self.distance,
            self.rounds,
            self.basis,
            self.row_bits()?,
            self.row_bytes()?
        ))
    }

    pub fn from_sidecar(text: &str) -> Result<Self> {
        let mut kv = HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("sidecar line without '=': {line}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Format(format!("sidecar is missing '{k}'")));
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Format(format!("sidecar field '{k}' is not a number")))
        };
        let kind = match get("code")?.as_str() {
            "rep" => CodeKind::Repetition,
            "surface" => CodeKind::RotatedSurface,
            other => return Err(Error::Format(format!("unknown code '{other}'"))),
        };
        let basis = match get("basis")?.as_str() {
            "z" => Basis::Z,
            "x" => Basis::X,
            other => return Err(Error::Format(format!("unknown basis '{other}'"))),
        };
        let schema = Self { kind, distance: num("d")?, rounds: num("dt")?, basis };
        if let Some(order) = kv.get("bit_order") {
            if order != "lsb0" {
                return Err(Error::Format(format!("unsupported bit order '{order}'")));
            }
        }
        if kv.contains_key("row_bits") && num("row_bits")? != schema.row_bits()? {
            return Err(Error::Format("sidecar row_bits does not match d and dt".into()));
        }
        Ok(schema)
    }
}

/// Measured bits of one shot.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RawRecord {
    /// Prepared data-qubit values (in the memory basis).
    pub initial: Vec<bool>,
    /// `ancilla[r][s]`: outcome of stabilizer `s` in round `r + 1`.
    pub ancilla: Vec<Vec<bool>>,
    /// Final data-qubit readout.
    pub final_data: Vec<bool>,
}

impl RawRecord {
    fn check(&self, schema: &RawSchema) -> Result<()> {
        let (n, s) = schema.counts()?;
        if self.initial.len() != n
            || self.final_data.len() != n
            || self.ancilla.len() != schema.rounds
            || self.ancilla.iter().any(|r| r.len() != s)
        {
            return Err(Error::Shape(format!(
                "raw record does not match d={} dt={}",
                schema.distance, schema.rounds
            )));
        }
        Ok(())
    }

    fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.initial.iter().chain(self.ancilla.iter().flatten()).chain(&self.final_data).copied()
    }

    fn from_bits(schema: &RawSchema, bits: &[bool]) -> Result<Self> {
        let (n, s) = schema.counts()?;
        if bits.len() != 2 * n + s * schema.rounds {
            return Err(Error::Shape(format!("row has {} bits, schema needs {}", bits.len(), schema.row_bits()?)));
        }
        let initial = bits[..n].to_vec();
        let ancilla = (0..schema.rounds).map(|r| bits[n + r * s..n + (r + 1) * s].to_vec()).collect();
        let final_data = bits[n + s * schema.rounds..].to_vec();
        Ok(Self { initial, ancilla, final_data })
    }
}

/// Raw rows a device would report for sampled shots of `circuit`.
///
/// The simulator tracks flips relative to a noiseless run in which every
/// outcome is zero, so the measured bits equal the recorded flips and the
/// data qubits start in the all-zero state.
pub fn serialize_raw(circuit: &Circuit, records: &[MeasurementRecord]) -> Vec<RawRecord> {
    let n = circuit.data_measurements.len();
    records
        .iter()
        .map(|rec| RawRecord {
            initial: vec![false; n],
            ancilla: circuit
                .ancilla_measurements
                .iter()
                .map(|round| round.iter().map(|&m| rec.get(m as usize)).collect())
                .collect(),
            final_data: circuit.data_measurements.iter().map(|&m| rec.get(m as usize)).collect(),
        })
        .collect()
}

pub fn write_raw<W: Write>(w: &mut W, schema: &RawSchema, records: &[RawRecord]) -> Result<()> {
    let mut row = vec![0u8; schema.row_bytes()?];
    for rec in records {
        rec.check(schema)?;
        row.fill(0);
        for (i, b) in rec.bits().enumerate() {
            row[i / 8] |= u8::from(b) << (i % 8);
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn read_raw<R: Read>(r: &mut R, schema: &RawSchema) -> Result<Vec<RawRecord>> {
    let bits = schema.row_bits()?;
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let stride = schema.row_bytes()?;
    if data.len() % stride != 0 {
        return Err(Error::Format(format!("raw file length {} is not a multiple of {stride}", data.len())));
    }
    data.chunks(stride)
        .map(|row| {
            let v: Vec<bool> = (0..bits).map(|i| (row[i / 8] >> (i % 8)) & 1 == 1).collect();
            RawRecord::from_bits(schema, &v)
        })
        .collect()
}

/// Parses rows written as text, one shot per line of `0`/`1` characters.
pub fn parse_raw_text<R: BufRead>(r: R, schema: &RawSchema) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bits = line
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!("non-binary character {other:?} on line {}", n + 1))),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(RawRecord::from_bits(schema, &bits)?);
    }
    Ok(out)
}

fn parity(bits: &[bool], support: &[usize]) -> bool {
    support.iter().fold(false, |a, &q| a ^ bits[q])
}

/// Recomputes detectors and labels from measured bits.
///
/// Detectors compare each stabilizer outcome with the previous round. In
/// the first round, stabilizers of the memory basis are compared with the
/// parity implied by the prepared data values; the final comparison uses
/// the parity of the data readout. The label is the change of the logical
/// parity between preparation and readout.
pub fn ingest_raw(schema: &RawSchema, records: &[RawRecord]) -> Result<Vec<DataPoint>> {
    let layout = schema.layout()?;
    if schema.rounds < 1 {
        return Err(Error::Validation("raw records need at least one round".into()));
    }
    if layout.kind == CodeKind::Repetition && schema.basis == Basis::X {
        return Err(Error::Validation("memory-X is undefined for the repetition code".into()));
    }
    let aligned = schema.basis.aligned();
    let last = schema.rounds - 1;
    records
        .iter()
        .map(|rec| {
            rec.check(schema)?;
            let mut detectors = Vec::new();
            for r in 0..schema.rounds {
                for (s, stab) in layout.stabilizers.iter().enumerate() {
                    let fired = match (r, stab.pauli_type == aligned) {
                        (0, true) => rec.ancilla[0][s] ^ parity(&rec.initial, &stab.support),
                        (0, false) => continue,
                        _ => rec.ancilla[r][s] ^ rec.ancilla[r - 1][s],
                    };
                    if fired {
                        detectors.push(DetectorEvent::new(stab.pauli_type, stab.ancilla, r as u32 + 1));
                    }
                }
            }
            for (s, stab) in layout.stabilizers.iter().enumerate() {
                if stab.pauli_type == aligned && rec.ancilla[last][s] ^ parity(&rec.final_data, &stab.support) {
                    detectors.push(DetectorEvent::new(stab.pauli_type, stab.ancilla, schema.rounds as u32 + 1));
                }
            }
            let logical = layout.logical(aligned);
            let flip = parity(&rec.final_data, logical) ^ parity(&rec.initial, logical);
            let labels = match aligned {
                PauliType::Z => Labels::z(flip),
                PauliType::X => Labels::x(flip),
            };
            Ok(DataPoint { detectors, labels })
        })
        .collect()
}

/// Restricts repetition-code records of distance `D` to every window of
/// `d` consecutive data qubits and the `d - 1` checks between them.
/// Returns the window schema and one record list per offset (`D - d + 1`).
pub fn subwindow_records(
    schema: &RawSchema,
    records: &[RawRecord],
    d: usize,
) -> Result<(RawSchema, Vec<Vec<RawRecord>>)> {
    if schema.kind != CodeKind::Repetition {
        return Err(Error::Validation("sub-windowing is defined for the repetition code".into()));
    }
    let big = schema.distance;
    if d < 2 || d > big {
        return Err(Error::Validation(format!("window distance must lie in 2..={big}, got {d}")));
    }
    let window = RawSchema { distance: d, ..schema.clone() };
    let mut out = Vec::with_capacity(big - d + 1);
    for o in 0..=big - d {
        let recs = records
            .iter()
            .map(|rec| {
                rec.check(schema)?;
                Ok(RawRecord {
                    initial: rec.initial[o..o + d].to_vec(),
                    ancilla: rec.ancilla.iter().map(|r| r[o..o + d - 1].to_vec()).collect(),
                    final_data: rec.final_data[o..o + d].to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(recs);
    }
    Ok((window, out))
}

/// Data points of every window; labels come from each window's own data bits.
pub fn subwindow(schema: &RawSchema, records: &[RawRecord], d: usize) -> Result<Vec<Vec<DataPoint>>> {
    let (window, per_offset) = subwindow_records(schema, records, d)?;
    per_offset.iter().map(|recs| ingest_raw(&window, recs)).collect()
}
