//! RMSE metrics, simulation-mode evaluation, order/seed sweeps and result export.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{format_f64, Normalizer, RawSeries, Split};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{LpvModel, MatrixSource, NnssModel};
use crate::train::{fit, make_windows, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    pub per_channel: Vec<f64>,
    /// Arithmetic mean of `per_channel`.
    pub mean: f64,
}

/// Per-channel `√(mean_k (y − ŷ)²)` and their average.
pub fn rmse(measured: &Mat, predicted: &Mat) -> Result<Rmse> {
    if measured.rows() != predicted.rows() || measured.cols() != predicted.cols() {
        return Err(Error::ShapeMismatch(format!(
            "measured {}x{} vs predicted {}x{}",
            measured.rows(),
            measured.cols(),
            predicted.rows(),
            predicted.cols()
        )));
    }
    if measured.rows() == 0 || measured.cols() == 0 {
        return Err(Error::ShapeMismatch("rmse of an empty matrix".into()));
    }
    let k = measured.rows();
    let m = measured.cols();
    let mut acc = vec![0.0; m];
    for i in 0..k {
        for ((a, y), p) in acc.iter_mut().zip(measured.row(i)).zip(predicted.row(i)) {
            *a += (y - p) * (y - p);
        }
    }
    let per_channel: Vec<f64> = acc.into_iter().map(|s| (s / k as f64).sqrt()).collect();
    let mean = per_channel.iter().sum::<f64>() / m as f64;
    Ok(Rmse { per_channel, mean })
}

/// Channel-averaged simulation-mode RMSE: encode `y(0)` once, then roll
/// forward on the inputs alone.
pub fn simulation_rmse<G: MatrixSource>(model: &LpvModel<G>, series: &RawSeries) -> Result<f64> {
    let trace = model.infer(&series.inputs, series.outputs.row(0), false)?;
    Ok(rmse(&series.outputs, &trace.outputs_mat())?.mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub split: String,
    pub rmse: Rmse,
    pub spectral_radius_min: f64,
    pub spectral_radius_max: f64,
}

/// Measured and simulated outputs, row `k` = sample `k` of the split.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub measured: Mat,
    pub predicted: Mat,
}

impl PredictionTable {
    /// `k,y1,…,ym,yhat1,…,yhatm`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let m = self.measured.cols();
        let header: Vec<String> = std::iter::once("k".to_string())
            .chain((1..=m).map(|i| format!("y{i}")))
            .chain((1..=m).map(|i| format!("yhat{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.measured.rows() {
            let mut line = k.to_string();
            for v in self.measured.row(k).iter().chain(self.predicted.row(k)) {
                line.push(',');
                line.push_str(&format_f64(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Static line chart of measured vs. simulated output, one panel per channel.
    pub fn to_svg(&self, title: &str) -> String {
        const WIDTH: f64 = 900.0;
        const PANEL: f64 = 220.0;
        const PAD: f64 = 40.0;
        let m = self.measured.cols();
        let k = self.measured.rows();
        let height = PAD + m as f64 * (PANEL + PAD);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{PAD}" y="24" font-size="14">{}</text>"#, escape(title));
        for ch in 0..m {
            let top = PAD + ch as f64 * (PANEL + PAD);
            let ys = self.measured.column(ch);
            let ps = self.predicted.column(ch);
            let lo = ys.iter().chain(&ps).copied().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().chain(&ps).copied().fold(f64::NEG_INFINITY, f64::max);
            let span = if hi > lo { hi - lo } else { 1.0 };
            let sx = (WIDTH - 2.0 * PAD) / (k.max(2) - 1) as f64;
            let points = |vals: &[f64]| {
                vals.iter()
                    .enumerate()
                    .map(|(i, v)| format!("{:.2},{:.2}", PAD + i as f64 * sx, top + PANEL - (v - lo) / span * PANEL))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let _ = writeln!(
                svg,
                r##"<rect x="{PAD}" y="{top}" width="{}" height="{PANEL}" fill="none" stroke="#999"/>"##,
                WIDTH - 2.0 * PAD
            );
            let _ = writeln!(
                svg,
                r##"<text x="{PAD}" y="{}">y{} (range {} … {})</text>"##,
                top - 6.0,
                ch + 1,
                format_f64(lo),
                format_f64(hi)
            );
            let _ = writeln!(svg, r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1" points="{}"/>"##, points(&ys));
            let _ = writeln!(svg, r##"<polyline fill="none" stroke="#d62728" stroke-width="1" points="{}"/>"##, points(&ps));
        }
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="24" fill="#1f77b4">measured</text><text x="{}" y="24" fill="#d62728">simulated</text>"##,
            WIDTH - 200.0,
            WIDTH - 110.0
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Simulation-mode evaluation of one split.
///
/// RMSE is in the series' own (normalised) units unless `denormalize`
/// is given, in which case both tables are mapped back to physical units
/// first.
pub fn simulate_and_report<G: MatrixSource>(
    model: &LpvModel<G>,
    series: &RawSeries,
    split: &str,
    denormalize: Option<&Normalizer>,
) -> Result<(SplitMetrics, PredictionTable)> {
    if series.len() < 2 {
        return Err(Error::SegmentTooShort {
            segment: "evaluation",
            len: series.len(),
            min: 2,
        });
    }
    let trace = model.infer(&series.inputs, series.outputs.row(0), true)?;
    let mut measured = series.outputs.clone();
    let mut predicted = trace.outputs_mat();
    if let Some(norm) = denormalize {
        measured = norm.invert_outputs(&measured)?;
        predicted = norm.invert_outputs(&predicted)?;
    }
    let metrics = SplitMetrics {
        split: split.to_string(),
        rmse: rmse(&measured, &predicted)?,
        spectral_radius_min: trace.spectral_radii.iter().copied().fold(f64::INFINITY, f64::min),
        spectral_radius_max: trace.spectral_radii.iter().copied().fold(0.0, f64::max),
    };
    Ok((metrics, PredictionTable { measured, predicted }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub order: usize,
    pub seed: u64,
    /// Train, validation and test, in that order.
    pub splits: Vec<SplitMetrics>,
}

impl EvalReport {
    pub fn split(&self, name: &str) -> Option<&SplitMetrics> {
        self.splits.iter().find(|s| s.split == name)
    }

    pub fn spectral_radius_max(&self) -> f64 {
        self.splits.iter().map(|s| s.spectral_radius_max).fold(0.0, f64::max)
    }

    pub fn spectral_radius_min(&self) -> f64 {
        self.splits.iter().map(|s| s.spectral_radius_min).fold(f64::INFINITY, f64::min)
    }

    fn write_rows(&self, out: &mut String) {
        for s in &self.splits {
            for (i, v) in s.rmse.per_channel.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},y{},{}", self.order, self.seed, s.split, i + 1, format_f64(*v));
            }
            let _ = writeln!(out, "{},{},{},mean,{}", self.order, self.seed, s.split, format_f64(s.rmse.mean));
        }
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// Evaluates a model on all three splits.
pub fn evaluate_split<G: MatrixSource>(
    model: &LpvModel<G>,
    split: &Split,
    seed: u64,
    denormalize: Option<&Normalizer>,
) -> Result<(EvalReport, Vec<PredictionTable>)> {
    let mut splits = Vec::with_capacity(3);
    let mut tables = Vec::with_capacity(3);
    for (name, series) in SPLIT_NAMES.iter().zip([&split.train, &split.val, &split.test]) {
        let (metrics, table) = simulate_and_report(model, series, name, denormalize)?;
        splits.push(metrics);
        tables.push(table);
    }
    Ok((
        EvalReport {
            order: model.dims().0,
            seed,
            splits,
        },
        tables,
    ))
}

/// Fits a fresh NN-SS model on `split.train` with early stopping on
/// `split.val`, then evaluates all splits.
pub fn train_and_evaluate(split: &Split, config: &TrainConfig) -> Result<(NnssModel, TrainReport, EvalReport)> {
    config.validate_for_len(split.train.len())?;
    let mut model = config.init_model(split.train.output_dim(), split.train.input_dim())?;
    let windows = make_windows(&split.train, config.window_len, config.stride)?;
    let report = fit(&mut model, &windows, &split.val, config)?;
    let (eval, _) = evaluate_split(&model, split, config.seed, None)?;
    Ok((model, report, eval))
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub order: usize,
    pub seed: u64,
    /// The report, or the error message of a failed run.
    pub outcome: std::result::Result<EvalReport, String>,
}

/// Runs `cell(order, seed)` over the full grid, in parallel. Failures are
/// recorded per cell; the result is sorted by `(order, seed)`.
pub fn sweep_with<F>(orders: &[usize], seeds: &[u64], cell: F) -> Vec<SweepCell>
where
    F: Fn(usize, u64) -> Result<EvalReport> + Sync,
{
    let grid: Vec<(usize, u64)> = orders.iter().flat_map(|&o| seeds.iter().map(move |&s| (o, s))).collect();
    let mut cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(order, seed)| SweepCell {
            order,
            seed,
            outcome: cell(order, seed).map_err(|e| e.to_string()),
        })
        .collect();
    cells.sort_by_key(|c| (c.order, c.seed));
    cells
}

/// NN-SS sweep: one fit per `(order, seed)` using `config` otherwise.
pub fn sweep(orders: &[usize], seeds: &[u64], split: &Split, config: &TrainConfig) -> Vec<SweepCell> {
    sweep_with(orders, seeds, |order, seed| {
        let cfg = TrainConfig {
            order,
            seed,
            ..config.clone()
        };
        train_and_evaluate(split, &cfg).map(|(_, _, eval)| eval)
    })
}

/// Results CSV `order,seed,split,channel,rmse`: per cell, one row per
/// split and channel plus a `mean` row. Failed cells get a single row with
/// split `error` and an empty RMSE.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("order,seed,split,channel,rmse\n");
    for c in cells {
        match &c.outcome {
            Ok(report) => report.write_rows(&mut out),
            Err(msg) => {
                let _ = writeln!(out, "{},{},error,{},", c.order, c.seed, msg.replace([',', '\n'], ";"));
            }
        }
    }
    out
}

/// `order,seed,split,channel,rmse` rows for a single report.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("order,seed,split,channel,rmse\n");
    report.write_rows(&mut out);
    out
}
