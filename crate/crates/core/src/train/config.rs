use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NnssModel;
use crate::net::Activation;
use crate::schur::{validate_gamma, DEFAULT_GAMMA};

use super::loss::LossNormalization;

/// Training hyperparameters. Defaults mirror the two-tank reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Window length `L` in rows.
    #[serde(alias = "L")]
    pub window_len: usize,
    #[serde(alias = "s")]
    pub stride: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
    pub gamma: f64,
    pub patience: usize,
    /// Model order `n`.
    #[serde(alias = "order_n")]
    pub order: usize,
    pub encoder_hidden: Vec<usize>,
    pub generator_hidden: Vec<usize>,
    pub activation: Activation,
    pub loss_normalization: LossNormalization,
    pub train_eps_tilde: bool,
    /// Training windows whose rollouts are spectrally audited per epoch.
    pub audit_windows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window_len: 80,
            stride: 2,
            batch_size: 64,
            learning_rate: 1e-3,
            epochs: 200,
            lambda: 0.01,
            seed: 0,
            gamma: DEFAULT_GAMMA,
            patience: 20,
            order: 2,
            encoder_hidden: vec![16, 16],
            generator_hidden: vec![32, 32],
            activation: Activation::Sigmoid,
            loss_normalization: LossNormalization::AsPrinted,
            train_eps_tilde: true,
            audit_windows: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let min_len = self.loss_normalization.min_window_len();
        if self.window_len < min_len {
            return bad(format!(
                "window_len {} too short: the state loss needs at least {min_len} rows with {:?} normalization",
                self.window_len, self.loss_normalization
            ));
        }
        if self.stride == 0 || self.batch_size == 0 || self.order == 0 {
            return bad("stride, batch_size and order must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.encoder_hidden.contains(&0) || self.generator_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        validate_gamma(self.gamma)
    }

    /// Fresh NN-SS model for `m` outputs and `r` inputs, seeded by `seed`.
    pub fn init_model(&self, m: usize, r: usize) -> Result<NnssModel> {
        NnssModel::init(
            self.order,
            m,
            r,
            &self.encoder_hidden,
            &self.generator_hidden,
            self.activation,
            self.gamma,
            self.seed,
        )
    }

    /// [`TrainConfig::validate`] plus `L ≤ K` for a training series of `k` rows.
    pub fn validate_for_len(&self, k: usize) -> Result<()> {
        self.validate()?;
        if self.window_len > k {
            return Err(Error::WindowTooLong {
                window: self.window_len,
                len: k,
            });
        }
        Ok(())
    }
}
