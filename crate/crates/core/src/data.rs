//! Input–output series: CSV I/O, z-score scaling, chronological splits and a
//! synthetic two-tank benchmark.
//!
//! CSV layout: a header `y1,…,ym,u1,…,ur` followed by comma-separated
//! decimal rows. LF and CRLF line endings are accepted on input; output uses
//! LF and the shortest decimal form that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    /// `K × m` measured outputs.
    pub outputs: Mat,
    /// `K × r` applied inputs.
    pub inputs: Mat,
    /// Seconds between samples.
    pub sample_time: f64,
    pub output_names: Vec<String>,
    pub input_names: Vec<String>,
}

impl RawSeries {
    pub fn new(outputs: Mat, inputs: Mat, sample_time: f64) -> Result<Self> {
        if outputs.rows() != inputs.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} output rows but {} input rows",
                outputs.rows(),
                inputs.rows()
            )));
        }
        if !outputs.is_finite() || !inputs.is_finite() {
            return Err(Error::NonFinite("series"));
        }
        let output_names = (1..=outputs.cols()).map(|i| format!("y{i}")).collect();
        let input_names = (1..=inputs.cols()).map(|i| format!("u{i}")).collect();
        Ok(RawSeries {
            outputs,
            inputs,
            sample_time,
            output_names,
            input_names,
        })
    }

    /// Number of samples `K`.
    pub fn len(&self) -> usize {
        self.outputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Contiguous rows `range` as a new series.
    pub fn slice(&self, range: Range<usize>) -> RawSeries {
        let h = range.len();
        RawSeries {
            outputs: self.outputs.block(range.start, 0, h, self.output_dim()),
            inputs: self.inputs.block(range.start, 0, h, self.input_dim()),
            sample_time: self.sample_time,
            output_names: self.output_names.clone(),
            input_names: self.input_names.clone(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<RawSeries> {
    read_csv(BufReader::new(File::open(path)?))
}

pub fn read_csv(reader: impl Read) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(Error::BadHeader {
                line: 1,
                reason: "empty file".into(),
            })
        }
    };
    let header_line = header.position().map_or(1, |p| p.line());
    let (m, r) = parse_header(&header, header_line)?;
    let width = m + r;

    let mut outputs = Vec::new();
    let mut inputs = Vec::new();
    let mut rows = 0;
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    line,
                    column: col + 1,
                    cell: cell.to_string(),
                })?;
            if col < m {
                outputs.push(v);
            } else {
                inputs.push(v);
            }
        }
        rows += 1;
    }
    RawSeries::new(Mat::from_raw(rows, m, outputs), Mat::from_raw(rows, r, inputs), 1.0)
}

fn parse_header(header: &csv::StringRecord, line: u64) -> Result<(usize, usize)> {
    let bad = |reason: String| Error::BadHeader { line, reason };
    let mut m = 0;
    let mut r = 0;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim_start_matches('\u{feff}');
        let (prefix, idx) = name.split_at(name.len().min(1));
        let idx: usize = idx
            .parse()
            .map_err(|_| bad(format!("column {} is {name:?}; expected y<i> or u<i>", i + 1)))?;
        match prefix {
            "y" if r == 0 && idx == m + 1 => m += 1,
            "u" if m > 0 && idx == r + 1 => r += 1,
            _ => {
                return Err(bad(format!(
                    "column {} is {name:?}; expected y1..ym followed by u1..ur in order",
                    i + 1
                )))
            }
        }
    }
    if m == 0 || r == 0 {
        return Err(bad("need at least one output (y1) and one input (u1) column".into()));
    }
    Ok((m, r))
}

pub fn save_csv(series: &RawSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(series, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv(series: &RawSeries, mut w: impl Write) -> Result<()> {
    let header: Vec<String> = (1..=series.output_dim())
        .map(|i| format!("y{i}"))
        .chain((1..=series.input_dim()).map(|i| format!("u{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for k in 0..series.len() {
        let cells: Vec<String> = series
            .outputs
            .row(k)
            .iter()
            .chain(series.inputs.row(k))
            .map(|v| format_f64(*v))
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Shortest decimal representation that round-trips exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Per-channel z-score statistics, outputs first then inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub output_dim: usize,
}

impl Normalizer {
    /// Fits mean and sample standard deviation (divide by count − 1) on
    /// rows `range`. Channels with zero spread get `σ = 1`.
    pub fn fit(series: &RawSeries, range: Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > series.len() {
            return Err(Error::InvalidConfig(format!(
                "normalisation range {range:?} is empty or exceeds {} rows",
                series.len()
            )));
        }
        let count = range.len() as f64;
        let mut mean = Vec::new();
        let mut std = Vec::new();
        let channels = (0..series.output_dim())
            .map(|j| (&series.outputs, j, &series.output_names[j]))
            .chain((0..series.input_dim()).map(|j| (&series.inputs, j, &series.input_names[j])));
        for (mat, j, name) in channels {
            let mu = range.clone().map(|k| mat[(k, j)]).sum::<f64>() / count;
            let var = if range.len() > 1 {
                range.clone().map(|k| (mat[(k, j)] - mu).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            let mut sigma = var.sqrt();
            if sigma == 0.0 || !sigma.is_finite() {
                warn!("channel {name} has zero spread; using unit scale");
                sigma = 1.0;
            }
            mean.push(mu);
            std.push(sigma);
        }
        Ok(Normalizer {
            mean,
            std,
            output_dim: series.output_dim(),
        })
    }

    fn check(&self, series: &RawSeries) -> Result<()> {
        if series.output_dim() != self.output_dim || series.output_dim() + series.input_dim() != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "normaliser covers {} outputs / {} channels, series has {} outputs / {} channels",
                self.output_dim,
                self.mean.len(),
                series.output_dim(),
                series.output_dim() + series.input_dim()
            )));
        }
        Ok(())
    }

    /// `x ↦ (x − μ) / σ` per channel.
    pub fn apply(&self, series: &RawSeries) -> Result<RawSeries> {
        self.check(series)?;
        let mut out = series.clone();
        self.map(&mut out.outputs, 0, |x, mu, s| (x - mu) / s);
        self.map(&mut out.inputs, self.output_dim, |x, mu, s| (x - mu) / s);
        Ok(out)
    }

    /// `z ↦ z·σ + μ` per channel.
    pub fn invert(&self, series: &RawSeries) -> Result<RawSeries> {
        self.check(series)?;
        let mut out = series.clone();
        self.map(&mut out.outputs, 0, |z, mu, s| z * s + mu);
        self.map(&mut out.inputs, self.output_dim, |z, mu, s| z * s + mu);
        Ok(out)
    }

    /// Denormalises a `K × m` matrix of outputs.
    pub fn invert_outputs(&self, outputs: &Mat) -> Result<Mat> {
        if outputs.cols() != self.output_dim {
            return Err(Error::ShapeMismatch(format!(
                "{} output columns, normaliser has {}",
                outputs.cols(),
                self.output_dim
            )));
        }
        let mut out = outputs.clone();
        self.map(&mut out, 0, |z, mu, s| z * s + mu);
        Ok(out)
    }

    fn map(&self, mat: &mut Mat, offset: usize, f: impl Fn(f64, f64, f64) -> f64) {
        for k in 0..mat.rows() {
            for (j, v) in mat.row_mut(k).iter_mut().enumerate() {
                *v = f(*v, self.mean[offset + j], self.std[offset + j]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: RawSeries,
    pub val: RawSeries,
    pub test: RawSeries,
}

/// Contiguous train → val → test segments.
///
/// Train and validation lengths are `⌊K·f⌋`; the test segment takes the
/// remainder. Every segment must hold at least `min_len` rows.
pub fn chrono_split(series: &RawSeries, fractions: [f64; 3], min_len: usize) -> Result<Split> {
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let k = series.len();
    let n_train = ((k as f64) * fractions[0] + 1e-9).floor() as usize;
    let n_val = ((k as f64) * fractions[1] + 1e-9).floor() as usize;
    let n_val = n_val.min(k - n_train);
    let n_test = k - n_train - n_val;
    for (segment, len) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        if len < min_len.max(1) {
            return Err(Error::SegmentTooShort {
                segment,
                len,
                min: min_len.max(1),
            });
        }
    }
    Ok(Split {
        train: series.slice(0..n_train),
        val: series.slice(n_train..n_train + n_val),
        test: series.slice(n_train + n_val..k),
    })
}

/// Fits a [`Normalizer`] on the training segment only, then splits the
/// normalised series. Validation and test statistics never leak into the
/// scaling.
pub fn normalized_split(series: &RawSeries, fractions: [f64; 3], min_len: usize) -> Result<(Normalizer, Split)> {
    let raw = chrono_split(series, fractions, min_len)?;
    let norm = Normalizer::fit(series, 0..raw.train.len())?;
    let split = chrono_split(&norm.apply(series)?, fractions, min_len)?;
    Ok((norm, split))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    Constant {
        level: f64,
    },
    /// Levels drawn uniformly from `[low, high]`, each held for a uniformly
    /// drawn number of samples in `[min_hold, max_hold]`.
    RandomLevels {
        low: f64,
        high: f64,
        min_hold: usize,
        max_hold: usize,
    },
    /// `offset + amplitude · mean_i sin(2π t / period_i + φ_i)` with seeded phases.
    Multisine {
        offset: f64,
        amplitude: f64,
        periods: Vec<f64>,
    },
}

impl Default for InputSignal {
    fn default() -> Self {
        InputSignal::RandomLevels {
            low: 0.1,
            high: 1.0,
            min_hold: 20,
            max_hold: 120,
        }
    }
}

/// Two cascaded tanks with square-root outflow, Euler-discretised:
///
/// ```text
/// h1⁺ = max(0, h1 + Ts·(−a1·√h1 + b·u))
/// h2⁺ = max(0, h2 + Ts·( a1·√h1 − a2·√h2))
/// y   = h2 + N(0, noise_std²)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTankConfig {
    pub steps: usize,
    pub input: InputSignal,
    pub noise_std: f64,
    pub seed: u64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub sample_time: f64,
    pub initial_levels: [f64; 2],
}

impl Default for TwoTankConfig {
    fn default() -> Self {
        TwoTankConfig {
            steps: 4000,
            input: InputSignal::default(),
            noise_std: 0.01,
            seed: 0,
            a1: 0.5,
            a2: 0.4,
            b: 1.0,
            sample_time: 0.2,
            initial_levels: [0.0, 0.0],
        }
    }
}

/// Simulated tank levels alongside the noisy measurement.
#[derive(Debug, Clone)]
pub struct TwoTankRun {
    pub series: RawSeries,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
}

pub fn synth_two_tank(cfg: &TwoTankConfig) -> Result<RawSeries> {
    Ok(simulate_two_tank(cfg)?.series)
}

pub fn simulate_two_tank(cfg: &TwoTankConfig) -> Result<TwoTankRun> {
    if cfg.steps == 0 || !(cfg.sample_time > 0.0) || !(cfg.a1 > 0.0) || !(cfg.a2 > 0.0) || !(cfg.b > 0.0) {
        return Err(Error::InvalidConfig(
            "two-tank steps, sample time and coefficients must be positive".into(),
        ));
    }
    if !(cfg.noise_std >= 0.0) || cfg.initial_levels.iter().any(|&h| !(h >= 0.0)) {
        return Err(Error::InvalidConfig("noise std and initial levels must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = input_sequence(&cfg.input, cfg.steps, cfg.sample_time, &mut rng)?;
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let ts = cfg.sample_time;
    let [mut h1, mut h2] = cfg.initial_levels;
    let mut y = Vec::with_capacity(cfg.steps);
    let mut l1 = Vec::with_capacity(cfg.steps);
    let mut l2 = Vec::with_capacity(cfg.steps);
    for &uk in &u {
        l1.push(h1);
        l2.push(h2);
        let e = if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        y.push(h2 + e);
        let q1 = cfg.a1 * h1.sqrt();
        let q2 = cfg.a2 * h2.sqrt();
        h1 = (h1 + ts * (-q1 + cfg.b * uk)).max(0.0);
        h2 = (h2 + ts * (q1 - q2)).max(0.0);
    }
    let mut series = RawSeries::new(
        Mat::from_vec(cfg.steps, 1, y)?,
        Mat::from_vec(cfg.steps, 1, u)?,
        cfg.sample_time,
    )?;
    series.sample_time = ts;
    Ok(TwoTankRun { series, h1: l1, h2: l2 })
}

fn input_sequence(signal: &InputSignal, steps: usize, ts: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    match signal {
        InputSignal::Constant { level } => Ok(vec![*level; steps]),
        InputSignal::RandomLevels {
            low,
            high,
            min_hold,
            max_hold,
        } => {
            if !(low <= high) || *min_hold == 0 || min_hold > max_hold {
                return Err(Error::InvalidConfig(format!(
                    "random levels need low ≤ high and 1 ≤ min_hold ≤ max_hold, got {signal:?}"
                )));
            }
            let mut u = Vec::with_capacity(steps);
            while u.len() < steps {
                let level = if low == high { *low } else { rng.random_range(*low..=*high) };
                let hold = rng.random_range(*min_hold..=*max_hold);
                u.extend(std::iter::repeat_n(level, hold.min(steps - u.len())));
            }
            Ok(u)
        }
        InputSignal::Multisine {
            offset,
            amplitude,
            periods,
        } => {
            if periods.is_empty() || periods.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::InvalidConfig("multisine periods must be positive".into()));
            }
            let phases: Vec<f64> = periods
                .iter()
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let count = periods.len() as f64;
            Ok((0..steps)
                .map(|k| {
                    let t = k as f64 * ts;
                    let s: f64 = periods
                        .iter()
                        .zip(&phases)
                        .map(|(p, ph)| (std::f64::consts::TAU * t / p + ph).sin())
                        .sum();
                    offset + amplitude * s / count
                })
                .collect())
        }
    }
}
