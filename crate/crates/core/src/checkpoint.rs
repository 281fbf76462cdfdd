//! Versioned JSON checkpoints.
//!
//! A checkpoint holds the model (layer shapes, activations and every
//! parameter, in the flat order used for training), `ε̃`, `γ`, the
//! normaliser the model was trained under, and the training config. Floats
//! are written with round-trip precision, so `load(save(x)) == x` bitwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::ConstantSsModel;
use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::model::{LpvModel, MatrixSource, NnssModel};
use crate::net::GeneratorNet;
use crate::train::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum CheckpointModel {
    Nnss(NnssModel),
    Baseline(ConstantSsModel),
}

impl CheckpointModel {
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            CheckpointModel::Nnss(m) => m.dims(),
            CheckpointModel::Baseline(m) => m.dims(),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            CheckpointModel::Nnss(m) => m.gamma,
            CheckpointModel::Baseline(m) => m.gamma,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CheckpointModel::Nnss(_) => "nnss",
            CheckpointModel::Baseline(_) => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub dims: Dims,
    pub param_count: usize,
    #[serde(flatten)]
    pub model: CheckpointModel,
    pub normalizer: Option<Normalizer>,
    pub seed: u64,
    pub config: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn new(model: CheckpointModel, normalizer: Option<Normalizer>, seed: u64, config: Option<TrainConfig>) -> Self {
        let (n, m, r) = model.dims();
        let param_count = match &model {
            CheckpointModel::Nnss(x) => x.param_count(),
            CheckpointModel::Baseline(x) => x.param_count(),
        };
        Checkpoint {
            format_version: FORMAT_VERSION,
            dims: Dims { n, m, r },
            param_count,
            model,
            normalizer,
            seed,
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        ckpt.check()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        ckpt.check()?;
        Ok(ckpt)
    }

    /// Rejects version mismatches and internally inconsistent shapes.
    fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let Dims { n, m, r } = self.dims;
        if self.model.dims() != (n, m, r) {
            return Err(Error::Checkpoint(format!(
                "header dims {:?} disagree with model dims {:?}",
                (n, m, r),
                self.model.dims()
            )));
        }
        let wrap = |e: Error| Error::Checkpoint(e.to_string());
        match &self.model {
            CheckpointModel::Nnss(model) => {
                GeneratorNet::from_mlp(model.generator.mlp().clone(), n, m, r).map_err(wrap)?;
                check_common(model, self.param_count)?;
            }
            CheckpointModel::Baseline(model) => {
                let g = &model.generator;
                let shapes = [
                    (g.w.rows(), g.w.cols(), 2 * n, 2 * n),
                    (g.v.rows(), g.v.cols(), n, n),
                    (g.b.rows(), g.b.cols(), n, r),
                    (g.c.rows(), g.c.cols(), m, n),
                ];
                if shapes.iter().any(|&(a, b, c, d)| (a, b) != (c, d)) {
                    return Err(Error::Checkpoint("baseline matrix shapes disagree with dims".into()));
                }
                check_common(model, self.param_count)?;
            }
        }
        if let Some(norm) = &self.normalizer {
            if norm.output_dim != m || norm.mean.len() != m + r || norm.std.len() != m + r {
                return Err(Error::Checkpoint("normaliser channel count disagrees with dims".into()));
            }
        }
        Ok(())
    }
}

fn check_common<G: MatrixSource>(model: &LpvModel<G>, param_count: usize) -> Result<()> {
    let (n, m, r) = model.dims();
    LpvModel::from_parts(model.encoder.clone(), model.generator.clone(), n, m, r, model.gamma)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if model.param_count() != param_count {
        return Err(Error::Checkpoint(format!(
            "parameter count {} disagrees with header {param_count}",
            model.param_count()
        )));
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::net::Activation;

    fn sample() -> Checkpoint {
        let mut model = NnssModel::init(2, 1, 1, &[4, 4], &[8], Activation::Sigmoid, 0.97, 5).unwrap();
        model.eps_tilde = -0.123456789012345678;
        let norm = Normalizer {
            mean: vec![0.1, 1.0 / 3.0],
            std: vec![std::f64::consts::PI, 1e-7],
            output_dim: 1,
        };
        Checkpoint::new(CheckpointModel::Nnss(model), Some(norm), 5, Some(TrainConfig::default()))
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let ckpt = sample();
        let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        assert_eq!(back, ckpt);
        let (CheckpointModel::Nnss(a), CheckpointModel::Nnss(b)) = (&ckpt.model, &back.model) else {
            panic!("kind changed");
        };
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(a.params()), bits(b.params()));
    }

    #[test]
    fn file_round_trip_and_identical_simulation() {
        let ckpt = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let (CheckpointModel::Nnss(a), CheckpointModel::Nnss(b)) = (&ckpt.model, &back.model) else {
            panic!("kind changed");
        };
        let u = Mat::from_rows(&[&[0.1], &[0.4], &[-0.2], &[1.0]]);
        assert_eq!(a.infer(&u, &[0.3], false).unwrap(), b.infer(&u, &[0.3], false).unwrap());
    }

    #[test]
    fn baseline_round_trip() {
        let model = ConstantSsModel::init_baseline(3, 2, 1, &[], 0.9, 1, None).unwrap();
        let ckpt = Checkpoint::new(CheckpointModel::Baseline(model), None, 1, None);
        assert_eq!(Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap(), ckpt);
    }

    #[test]
    fn rejects_version_and_tampering() {
        let mut ckpt = sample();
        ckpt.format_version = 99;
        assert!(matches!(Checkpoint::from_json(&ckpt.to_json().unwrap()), Err(Error::Checkpoint(_))));
        let mut ckpt = sample();
        ckpt.dims.n = 3;
        assert!(matches!(Checkpoint::from_json(&ckpt.to_json().unwrap()), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::from_json("{}").is_err());
    }
}
