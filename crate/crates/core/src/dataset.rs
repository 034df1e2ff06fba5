//! Labelled decision samples stored compactly as 8-bit levels.
//!
//! On disk a dataset is a binary tensor file plus an optional text record
//! stream (`DATASET 1` header, then `<world> <x> <y> walk <bin>` or
//! `<world> <x> <y> stop -` per record).

use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::decision::{DecisionInput, DecisionLabel, CHANNELS};
use crate::error::{check_dim, Error, Result};
use crate::graph::Point;
use crate::pretrain::SampleSource;

const MAGIC: &[u8; 8] = b"RTDSET01";

/// Where a sample came from: world index and window centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordMeta {
    pub world: usize,
    pub center: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    window: usize,
    angle_bins: usize,
    levels: Vec<u8>,
    labels: Vec<DecisionLabel>,
    records: Vec<RecordMeta>,
}

impl Dataset {
    pub fn new(window: usize, angle_bins: usize) -> Self {
        Self {
            window,
            angle_bins,
            levels: Vec::new(),
            labels: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn angle_bins(&self) -> usize {
        self.angle_bins
    }

    pub fn input_len(&self) -> usize {
        self.window * self.window * CHANNELS
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[DecisionLabel] {
        &self.labels
    }

    pub fn records(&self) -> &[RecordMeta] {
        &self.records
    }

    pub fn push(&mut self, input: &DecisionInput, label: DecisionLabel, meta: RecordMeta) -> Result<()> {
        check_dim("dataset window", self.window, input.window())?;
        if let DecisionLabel::Walk { bin } = label {
            if bin >= self.angle_bins {
                return Err(Error::argument(format!("angle bin {bin} out of range")));
            }
        }
        self.levels.extend_from_slice(input.levels());
        self.labels.push(label);
        self.records.push(meta);
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        check_dim("dataset window", self.window, other.window)?;
        check_dim("dataset angle bins", self.angle_bins, other.angle_bins)?;
        self.levels.extend_from_slice(&other.levels);
        self.labels.extend_from_slice(&other.labels);
        self.records.extend_from_slice(&other.records);
        Ok(())
    }

    pub fn input(&self, i: usize) -> DecisionInput {
        let n = self.input_len();
        DecisionInput::from_levels(self.window, self.levels[i * n..(i + 1) * n].to_vec())
            .expect("consistent length")
    }

    /// Keeps the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let n = self.input_len();
        let mut out = Self::new(self.window, self.angle_bins);
        for &i in indices {
            out.levels.extend_from_slice(&self.levels[i * n..(i + 1) * n]);
            out.labels.push(self.labels[i]);
            out.records.push(self.records[i]);
        }
        out
    }

    /// Rows `indices` as values in `[0,1]`.
    pub fn batch(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.input_len()));
        self.gather(indices, &mut out);
        out
    }

    /// `(walk, stop)` label counts.
    pub fn label_counts(&self) -> (usize, usize) {
        let walk = self.labels.iter().filter(|l| l.is_walk()).count();
        (walk, self.labels.len() - walk)
    }

    /// Hash of every input level, label and record.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.window.hash(&mut h);
        self.angle_bins.hash(&mut h);
        self.levels.hash(&mut h);
        self.labels.hash(&mut h);
        for r in &self.records {
            r.world.hash(&mut h);
            r.center.x.to_bits().hash(&mut h);
            r.center.y.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn records_text(&self) -> String {
        let mut s = format!("DATASET 1 window={} bins={}\n", self.window, self.angle_bins);
        for (meta, label) in self.records.iter().zip(&self.labels) {
            let tail = match label {
                DecisionLabel::Walk { bin } => format!("walk {bin}"),
                DecisionLabel::Stop => "stop -".to_string(),
            };
            writeln!(s, "{} {} {} {tail}", meta.world, meta.center.x, meta.center.y)
                .expect("write to string");
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(MAGIC)?;
        for v in [self.window, self.angle_bins, self.len()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        let n = self.input_len();
        for i in 0..self.len() {
            let meta = self.records[i];
            w.write_all(&(meta.world as u64).to_le_bytes())?;
            w.write_all(&meta.center.x.to_le_bytes())?;
            w.write_all(&meta.center.y.to_le_bytes())?;
            let (kind, bin) = match self.labels[i] {
                DecisionLabel::Walk { bin } => (1u8, bin as u64),
                DecisionLabel::Stop => (0u8, 0),
            };
            w.write_all(&[kind])?;
            w.write_all(&bin.to_le_bytes())?;
            w.write_all(&self.levels[i * n..(i + 1) * n])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::parse(1, "not a dataset file"));
        }
        let window = read_u64(&mut r)? as usize;
        let angle_bins = read_u64(&mut r)? as usize;
        let len = read_u64(&mut r)? as usize;
        let mut out = Self::new(window, angle_bins);
        let n = out.input_len();
        let mut levels = vec![0u8; n];
        for i in 0..len {
            let world = read_u64(&mut r)? as usize;
            let x = f64::from_le_bytes(read_array(&mut r)?);
            let y = f64::from_le_bytes(read_array(&mut r)?);
            let [kind] = read_array::<1>(&mut r)?;
            let bin = read_u64(&mut r)? as usize;
            r.read_exact(&mut levels)?;
            let label = match kind {
                1 => DecisionLabel::Walk { bin },
                0 => DecisionLabel::Stop,
                _ => return Err(Error::parse(i + 1, "bad label kind")),
            };
            let input = DecisionInput::from_levels(window, levels.clone())?;
            out.push(&input, label, RecordMeta { world, center: Point::new(x, y) })
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(out)
    }
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

impl SampleSource for Dataset {
    fn n_samples(&self) -> usize {
        self.len()
    }

    fn dim(&self) -> usize {
        self.input_len()
    }

    fn gather(&self, indices: &[usize], out: &mut Array2<f64>) {
        let n = self.input_len();
        let lut: Vec<f64> = (0..256).map(|l| l as f64 / 255.0).collect();
        for (row, &i) in indices.iter().enumerate() {
            let src = &self.levels[i * n..(i + 1) * n];
            for (dst, &l) in out.row_mut(row).iter_mut().zip(src) {
                *dst = lut[l as usize];
            }
        }
    }
}
