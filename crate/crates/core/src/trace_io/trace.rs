//! Binary probe trace, one checkpoint per file.
//!
//! Layout, all little-endian:
//!
//! | field    | type          |
//! |----------|---------------|
//! | magic    | `b"HGP1"`     |
//! | version  | u16 (= 1)     |
//! | mode     | u8 (0 = classification, 1 = regression) |
//! | dtype    | u8 (0 = f32)  |
//! | C, d, B  | u32 each      |
//! | step     | u64           |
//! | metric   | f64, NaN = absent |
//! | aux_loss | f64, NaN = absent |
//! | W        | C·d f32, row-major |
//! | Z        | d·B f32, row-major |
//! | targets  | B u32 labels, or C·B f32 row-major |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result, TraceError};
use crate::matrix::Matrix;
use crate::probe::{Mode, ProbeBatch, Targets};

pub const MAGIC: [u8; 4] = *b"HGP1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 4 + 4 + 4 + 8 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub enum TraceTargets {
    Labels(Vec<u32>),
    Regression(Vec<f32>),
}

/// In-memory form of one trace file; tensors stay f32 so re-serialization is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTraceFile {
    pub step: u64,
    pub metric: Option<f64>,
    pub aux_loss: Option<f64>,
    pub classes: u32,
    pub dim: u32,
    pub batch: u32,
    /// C × d, row-major.
    pub head: Vec<f32>,
    /// d × B, row-major.
    pub features: Vec<f32>,
    pub targets: TraceTargets,
}

impl ProbeTraceFile {
    pub fn mode(&self) -> Mode {
        match self.targets {
            TraceTargets::Labels(_) => Mode::Classification,
            TraceTargets::Regression(_) => Mode::Regression,
        }
    }

    /// Narrows a batch to f32 storage.
    pub fn from_batch(batch: &ProbeBatch, step: u64, metric: Option<f64>, aux_loss: Option<f64>) -> Self {
        let to_f32 = |m: &Matrix| m.as_slice().iter().map(|&v| v as f32).collect::<Vec<f32>>();
        let targets = match batch.targets() {
            Targets::Labels(l) => TraceTargets::Labels(l.iter().map(|&v| v as u32).collect()),
            Targets::Regression(y) => TraceTargets::Regression(to_f32(y)),
        };
        Self {
            step,
            metric,
            aux_loss,
            classes: batch.classes() as u32,
            dim: batch.dim() as u32,
            batch: batch.batch_size() as u32,
            head: to_f32(batch.head()),
            features: to_f32(batch.features()),
            targets,
        }
    }

    /// Widens the stored tensors to f64 for probing.
    pub fn to_batch(&self) -> Result<ProbeBatch> {
        let (c, d, b) = (self.classes as usize, self.dim as usize, self.batch as usize);
        let widen = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let head = Matrix::from_vec(c, d, widen(&self.head))?;
        let features = Matrix::from_vec(d, b, widen(&self.features))?;
        let targets = match &self.targets {
            TraceTargets::Labels(l) => Targets::Labels(l.iter().map(|&v| v as usize).collect()),
            TraceTargets::Regression(y) => Targets::Regression(Matrix::from_vec(c, b, widen(y))?),
        };
        ProbeBatch::new(features, head, targets)
    }

    pub fn encoded_len(&self) -> usize {
        let (c, d, b) = (self.classes as usize, self.dim as usize, self.batch as usize);
        let targets = match self.targets {
            TraceTargets::Labels(_) => b,
            TraceTargets::Regression(_) => c * b,
        };
        HEADER_LEN + 4 * (c * d + d * b + targets)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.mode() {
            Mode::Classification => 0,
            Mode::Regression => 1,
        });
        out.push(0);
        for v in [self.classes, self.dim, self.batch] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.metric.unwrap_or(f64::NAN).to_le_bytes());
        out.extend_from_slice(&self.aux_loss.unwrap_or(f64::NAN).to_le_bytes());
        for v in self.head.iter().chain(&self.features) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &self.targets {
            TraceTargets::Labels(l) => l.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            TraceTargets::Regression(y) => y.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TraceError> {
        if bytes.len() < 4 {
            return Err(TraceError::Truncated { expected: HEADER_LEN, found: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(TraceError::BadMagic { found: magic });
        }
        if bytes.len() < HEADER_LEN {
            return Err(TraceError::Truncated { expected: HEADER_LEN, found: bytes.len() });
        }
        let mut cur = Cursor { bytes, pos: 4 };
        let version = u16::from_le_bytes(cur.take());
        if version != VERSION {
            return Err(TraceError::BadVersion(version));
        }
        let [mode] = cur.take::<1>();
        let [dtype] = cur.take::<1>();
        if dtype != 0 {
            return Err(TraceError::BadDtype(dtype));
        }
        let mode = match mode {
            0 => Mode::Classification,
            1 => Mode::Regression,
            m => return Err(TraceError::BadMode(m)),
        };
        let classes = u32::from_le_bytes(cur.take());
        let dim = u32::from_le_bytes(cur.take());
        let batch = u32::from_le_bytes(cur.take());
        let step = u64::from_le_bytes(cur.take());
        let metric = f64::from_le_bytes(cur.take());
        let aux_loss = f64::from_le_bytes(cur.take());

        let (c, d, b) = (classes as usize, dim as usize, batch as usize);
        let n_targets = match mode {
            Mode::Classification => b,
            Mode::Regression => c * b,
        };
        let expected = HEADER_LEN + 4 * (c * d + d * b + n_targets);
        if bytes.len() < expected {
            return Err(TraceError::Truncated { expected, found: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(TraceError::TrailingBytes { expected, found: bytes.len() });
        }
        let head = cur.f32s(c * d);
        let features = cur.f32s(d * b);
        let targets = match mode {
            Mode::Classification => {
                let labels: Vec<u32> = (0..b).map(|_| u32::from_le_bytes(cur.take())).collect();
                if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
                    return Err(TraceError::LabelOutOfRange { index, label, classes });
                }
                TraceTargets::Labels(labels)
            }
            Mode::Regression => TraceTargets::Regression(cur.f32s(c * b)),
        };
        let opt = |v: f64| if v.is_nan() { None } else { Some(v) };
        Ok(Self {
            step,
            metric: opt(metric),
            aux_loss: opt(aux_loss),
            classes,
            dim,
            batch,
            head,
            features,
            targets,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }

    fn f32s(&mut self, n: usize) -> Vec<f32> {
        (0..n).map(|_| f32::from_le_bytes(self.take())).collect()
    }
}

/// Writes a new trace file. Refuses to overwrite an existing one.
pub fn write_trace(path: impl AsRef<Path>, trace: &ProbeTraceFile) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(&trace.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<ProbeTraceFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ProbeTraceFile::from_bytes(&bytes).map_err(|source| Error::Trace { path: path.to_path_buf(), source })
}
