//! Constant-matrix Schur-stable state-space baseline.
//!
//! Same encoder, losses, recursion and training loop as NN-SS; only the
//! matrix source differs: `(W, V, B, C)` are plain trainable parameters
//! that do not depend on the scheduling variable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{RawSeries, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate_split, EvalReport};
use crate::linalg::Mat;
use crate::model::{ConstantMatrices, LpvModel, RolloutTrace};
use crate::net::{xavier_bound, EncoderNet};
use crate::schur::{build_transition, fit_to_target, random_factors, SchurFactors};
use crate::train::{fit, make_windows, TrainConfig, TrainReport, TrajectoryWindow};

pub type ConstantSsModel = LpvModel<ConstantMatrices>;

impl ConstantSsModel {
    /// Seeded baseline. With `init_a`, `(W, V, ε̃)` come from a Frobenius
    /// fit to that matrix; otherwise they are drawn at random.
    #[allow(clippy::too_many_arguments)]
    pub fn init_baseline(
        n: usize,
        m: usize,
        r: usize,
        encoder_hidden: &[usize],
        gamma: f64,
        seed: u64,
        init_a: Option<&Mat>,
    ) -> Result<Self> {
        if n == 0 || m == 0 || r == 0 {
            return Err(Error::InvalidConfig(format!("dimensions must be positive: n={n}, m={m}, r={r}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderNet::init(m, encoder_hidden, n, &mut rng)?;
        let factors = match init_a {
            Some(a) => {
                if a.rows() != n || a.cols() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "initial A is {}x{}, model order is {n}",
                        a.rows(),
                        a.cols()
                    )));
                }
                fit_to_target(a, gamma, seed)?.factors
            }
            None => random_factors(n, gamma, 0.5, &mut rng),
        };
        let mut uniform = |rows: usize, cols: usize| {
            let bound = xavier_bound(cols, rows);
            let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
            Mat::from_vec(rows, cols, data)
        };
        let b = uniform(n, r)?;
        let c = uniform(m, n)?;
        let source = ConstantMatrices {
            w: factors.w,
            v: factors.v,
            b,
            c,
        };
        let mut model = LpvModel::from_parts(encoder, source, n, m, r, gamma)?;
        model.eps_tilde = factors.eps_tilde;
        Ok(model)
    }

    pub fn factors(&self) -> SchurFactors {
        SchurFactors {
            w: self.generator.w.clone(),
            v: self.generator.v.clone(),
            eps_tilde: self.eps_tilde,
            gamma: self.gamma,
        }
    }

    /// The frozen transition matrix `A`.
    pub fn transition(&self) -> Result<Mat> {
        build_transition(&self.factors())
    }
}

/// Free-running rollout with the frozen `(A, B, C)`.
pub fn baseline_infer(model: &ConstantSsModel, u: &Mat, y0: &[f64], audit: bool) -> Result<RolloutTrace> {
    model.infer(u, y0, audit)
}

/// Builds a baseline of order `config.order` and trains it exactly like NN-SS.
pub fn baseline_fit(
    windows: &[TrajectoryWindow],
    val: &RawSeries,
    config: &TrainConfig,
    init_a: Option<&Mat>,
) -> Result<(ConstantSsModel, TrainReport)> {
    let first = windows
        .first()
        .ok_or_else(|| Error::InvalidConfig("no training windows".into()))?;
    let mut model = ConstantSsModel::init_baseline(
        config.order,
        first.outputs.cols(),
        first.inputs.cols(),
        &config.encoder_hidden,
        config.gamma,
        config.seed,
        init_a,
    )?;
    let report = fit(&mut model, windows, val, config)?;
    Ok((model, report))
}

/// Baseline counterpart of [`crate::eval::train_and_evaluate`].
pub fn baseline_train_and_evaluate(
    split: &Split,
    config: &TrainConfig,
    init_a: Option<&Mat>,
) -> Result<(ConstantSsModel, TrainReport, EvalReport)> {
    config.validate_for_len(split.train.len())?;
    let windows = make_windows(&split.train, config.window_len, config.stride)?;
    let (model, report) = baseline_fit(&windows, &split.val, config, init_a)?;
    let (eval, _) = evaluate_split(&model, split, config.seed, None)?;
    Ok((model, report, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{chrono_split, Normalizer};
    use crate::linalg::spectral_radius;
    use crate::model::NnssModel;
    use crate::net::{Activation, DenseLayer, GeneratedMatrices, GeneratorNet, Mlp};
    use rand_distr::{Distribution, StandardNormal};

    fn rigged_twin(base: &ConstantSsModel) -> NnssModel {
        let (n, m, r) = base.dims();
        let flat = GeneratedMatrices {
            w: base.generator.w.clone(),
            v: base.generator.v.clone(),
            b: base.generator.b.clone(),
            c: base.generator.c.clone(),
        }
        .flatten();
        let mlp = Mlp::from_layers(vec![
            DenseLayer {
                weight: Mat::zeros(3, n),
                bias: vec![0.0; 3],
                activation: Activation::Sigmoid,
            },
            DenseLayer {
                weight: Mat::zeros(flat.len(), 3),
                bias: flat,
                activation: Activation::Identity,
            },
        ])
        .unwrap();
        let mut twin = NnssModel::from_parts(
            base.encoder.clone(),
            GeneratorNet::from_mlp(mlp, n, m, r).unwrap(),
            n,
            m,
            r,
            base.gamma,
        )
        .unwrap();
        twin.eps_tilde = base.eps_tilde;
        twin
    }

    #[test]
    fn agrees_with_rigged_nnss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..5 {
            let base = ConstantSsModel::init_baseline(3, 2, 2, &[4], 0.95, seed, None).unwrap();
            let twin = rigged_twin(&base);
            let u = Mat::from_vec(60, 2, (0..120).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let a = baseline_infer(&base, &u, &[0.3, -0.2], true).unwrap();
            let b = twin.infer(&u, &[0.3, -0.2], true).unwrap();
            for (x, y) in a.outputs.iter().flatten().zip(b.outputs.iter().flatten()) {
                assert!((x - y).abs() < 1e-12);
            }
            assert_eq!(a.spectral_radii, b.spectral_radii);
        }
    }

    #[test]
    fn hand_recursion() {
        let mut base = ConstantSsModel::init_baseline(1, 1, 1, &[], 1.0, 0, None).unwrap();
        base.encoder.mlp_mut().read_params(&[1.0, 0.0]);
        base.generator = ConstantMatrices {
            w: Mat::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]),
            v: Mat::zeros(1, 1),
            b: Mat::from_rows(&[&[1.0]]),
            c: Mat::from_rows(&[&[1.0]]),
        };
        base.eps_tilde = 0.0;
        assert_eq!(base.transition().unwrap()[(0, 0)], 0.5);
        let trace = baseline_infer(&base, &Mat::from_rows(&[&[1.0], &[0.0], &[0.0]]), &[1.0], false).unwrap();
        assert_eq!(trace.outputs, vec![vec![1.0], vec![1.5], vec![0.75]]);
    }

    #[test]
    fn zero_input_decays_geometrically() {
        let base = ConstantSsModel::init_baseline(4, 1, 1, &[], 0.9, 11, None).unwrap();
        let rho = spectral_radius(&base.transition().unwrap()).unwrap().spectral_radius;
        assert!(rho < 0.9);
        let trace = baseline_infer(&base, &Mat::zeros(200, 1), &[2.0], false).unwrap();
        let norm = |x: &Vec<f64>| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x0 = norm(&trace.states[0]).max(1e-300);
        // ‖x(k)‖ ≤ c·(ρ + δ)^k with a modest transient constant c.
        let rate = rho + 0.02;
        let c = (0..=200).map(|k| norm(&trace.states[k]) / (x0 * rate.powi(k as i32))).fold(0.0, f64::max);
        assert!(c < 1e3, "transient constant {c}");
        assert!(norm(&trace.states[200]) < 1e-6 * x0.max(1.0));
    }

    #[test]
    fn init_from_zero_target() {
        let base = ConstantSsModel::init_baseline(2, 1, 1, &[], 0.99, 4, Some(&Mat::zeros(2, 2))).unwrap();
        assert!(base.transition().unwrap().max_abs() < 1e-4);
        // x̂(1) = A x̂(0) + B u(0) with A ≈ 0 and u = 0: the state has decayed.
        let trace = baseline_infer(&base, &Mat::zeros(3, 1), &[1.0], false).unwrap();
        let x1: f64 = trace.states[1].iter().map(|v| v.abs()).sum();
        assert!(x1 < 1e-3);
        assert!(ConstantSsModel::init_baseline(2, 1, 1, &[], 0.99, 4, Some(&Mat::zeros(3, 3))).is_err());
    }

    fn linear_series(k: usize, seed: u64) -> RawSeries {
        let a = Mat::from_rows(&[&[0.9, 0.2], &[-0.2, 0.7]]);
        let b = [1.0, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0, 0.0];
        let mut ys = Vec::with_capacity(k);
        let mut us = Vec::with_capacity(k);
        let mut u = 0.0;
        for i in 0..k {
            if i % 5 == 0 {
                u = StandardNormal.sample(&mut rng);
            }
            ys.push(x[0]);
            us.push(u);
            let ax = a.matvec(&x);
            x = vec![ax[0] + b[0] * u, ax[1] + b[1] * u];
        }
        RawSeries::new(Mat::from_vec(k, 1, ys).unwrap(), Mat::from_vec(k, 1, us).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn identifies_a_linear_system() {
        let raw = linear_series(1000, 3);
        let norm = Normalizer::fit(&raw, 0..600).unwrap();
        let split = chrono_split(&norm.apply(&raw).unwrap(), [0.6, 0.2, 0.2], 20).unwrap();
        let config = TrainConfig {
            window_len: 20,
            stride: 2,
            batch_size: 16,
            learning_rate: 5e-3,
            epochs: 200,
            lambda: 0.01,
            seed: 1,
            order: 2,
            encoder_hidden: vec![],
            ..TrainConfig::default()
        };
        let (model, report, eval) = baseline_train_and_evaluate(&split, &config, None).unwrap();
        let test = eval.split("test").unwrap().rmse.mean;
        assert!(test < 0.05, "test rmse {test}, report {:?}", report.best_val_rmse);
        assert!(report.max_spectral_radius.iter().all(|&r| r < config.gamma));
        assert_eq!(report.stability_violations, 0);
        assert!(spectral_radius(&model.transition().unwrap()).unwrap().spectral_radius < config.gamma);
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let raw = linear_series(300, 9);
        let split = chrono_split(&raw, [0.6, 0.2, 0.2], 10).unwrap();
        let config = TrainConfig {
            window_len: 10,
            stride: 3,
            batch_size: 8,
            epochs: 5,
            learning_rate: 1e-2,
            encoder_hidden: vec![],
            ..TrainConfig::default()
        };
        let a = baseline_train_and_evaluate(&split, &config, None).unwrap();
        let b = baseline_train_and_evaluate(&split, &config, None).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }
}
