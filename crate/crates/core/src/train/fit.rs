use std::io::Write;

use log::{debug, error, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{format_f64, RawSeries};
use crate::error::{Error, Result};
use crate::model::{LpvModel, MatrixSource};

use super::adam::AdamState;
use super::config::TrainConfig;
use super::loss::window_objective;
use super::window::TrajectoryWindow;

/// RNG stream for epoch shuffles, kept apart from the initialisation stream.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    /// Mean total loss over the epoch's windows.
    pub train_loss: Vec<f64>,
    pub val_rmse: Vec<f64>,
    /// Largest audited spectral radius per epoch.
    pub max_spectral_radius: Vec<f64>,
    /// 1-based epoch of the restored snapshot; `None` if no epoch ran.
    pub best_epoch: Option<usize>,
    pub best_val_rmse: Option<f64>,
    pub stopped_early: bool,
    /// Audited steps whose spectral radius was not below γ.
    pub stability_violations: usize,
}

impl TrainReport {
    fn new(seed: u64) -> Self {
        TrainReport {
            seed,
            train_loss: Vec::new(),
            val_rmse: Vec::new(),
            max_spectral_radius: Vec::new(),
            best_epoch: None,
            best_val_rmse: None,
            stopped_early: false,
            stability_violations: 0,
        }
    }

    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }

    /// `epoch,train_loss,val_rmse,max_spectral_radius`, one row per epoch.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "epoch,train_loss,val_rmse,max_spectral_radius")?;
        for (i, ((l, v), r)) in self
            .train_loss
            .iter()
            .zip(&self.val_rmse)
            .zip(&self.max_spectral_radius)
            .enumerate()
        {
            writeln!(w, "{},{},{},{}", i + 1, format_f64(*l), format_f64(*v), format_f64(*r))?;
        }
        Ok(())
    }
}

/// Trains with early stopping on full-series simulation RMSE over `val`.
pub fn fit<G: MatrixSource>(
    model: &mut LpvModel<G>,
    windows: &[TrajectoryWindow],
    val: &RawSeries,
    config: &TrainConfig,
) -> Result<TrainReport> {
    fit_with(model, windows, config, |m, _| crate::eval::simulation_rmse(m, val))
}

/// Training loop with a caller-supplied validation metric
/// `validate(model, epoch) → RMSE` (lower is better).
///
/// Each epoch shuffles the windows, walks mini-batches of `batch_size`
/// (the last one may be smaller) and takes one Adam step per batch. The
/// parameters with the best validation score are restored at the end;
/// training stops once `patience` epochs pass without improvement.
pub fn fit_with<G, F>(
    model: &mut LpvModel<G>,
    windows: &[TrajectoryWindow],
    config: &TrainConfig,
    mut validate: F,
) -> Result<TrainReport>
where
    G: MatrixSource,
    F: FnMut(&LpvModel<G>, usize) -> Result<f64>,
{
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::InvalidConfig("no training windows".into()));
    }
    let mut report = TrainReport::new(config.seed);
    if config.epochs == 0 {
        return Ok(report);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut params = model.params();
    let eps_index = model.eps_tilde_index();
    let mut adam = AdamState::new(params.len());
    let mut best_params = params.clone();
    let mut best_rmse = f64::INFINITY;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            let (loss, mut grad) = batch_gradient(model, windows, &batch, config)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                error!("non-finite loss at epoch {epoch}, batch {}; consider a lower learning rate", b + 1);
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            if !config.train_eps_tilde {
                grad[eps_index] = 0.0;
            }
            adam.step(&mut params, &grad, config.learning_rate);
            model.set_params(&params);
            epoch_loss += loss * batch.len() as f64;
        }
        epoch_loss /= windows.len() as f64;

        let (max_radius, violations) = audit(model, windows, &order[..config.audit_windows.min(order.len())])?;
        let mut rmse = validate(model, epoch)?;
        if !rmse.is_finite() {
            rmse = f64::INFINITY;
        }
        report.train_loss.push(epoch_loss);
        report.val_rmse.push(rmse);
        report.max_spectral_radius.push(max_radius);
        report.stability_violations += violations;
        debug!("epoch {epoch}: loss {epoch_loss:.6e}, val rmse {rmse:.6e}, max radius {max_radius:.6}");

        if rmse < best_rmse {
            best_rmse = rmse;
            best_params.copy_from_slice(&params);
            report.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                report.stopped_early = epoch < config.epochs;
                info!("early stop at epoch {epoch}; best epoch {:?}", report.best_epoch);
                break;
            }
        }
    }
    if report.best_epoch.is_some() {
        model.set_params(&best_params);
        report.best_val_rmse = Some(best_rmse);
    }
    Ok(report)
}

/// Mean total loss and gradient over `batch`, reduced in ascending window order.
fn batch_gradient<G: MatrixSource>(
    model: &LpvModel<G>,
    windows: &[TrajectoryWindow],
    batch: &[usize],
    config: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    let per_window: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_iter()
        .map(|&i| {
            let obj = window_objective(model, &windows[i], config.lambda, config.loss_normalization, true)?;
            Ok((obj.total(config.lambda), obj.grad.expect("gradient requested")))
        })
        .collect();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for item in per_window {
        let (l, g) = item?;
        loss += l * scale;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b * scale;
        }
    }
    Ok((loss, grad))
}

/// Spectral radii of every `A` generated along the sampled windows.
fn audit<G: MatrixSource>(model: &LpvModel<G>, windows: &[TrajectoryWindow], sample: &[usize]) -> Result<(f64, usize)> {
    let mut max_radius: f64 = 0.0;
    let mut violations = 0;
    for &i in sample {
        let w = &windows[i];
        let trace = model.infer(&w.inputs, w.outputs.row(0), true)?;
        for &rho in &trace.spectral_radii {
            max_radius = max_radius.max(rho);
            if rho >= model.gamma {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        error!("{violations} audited steps reached spectral radius ≥ γ = {}", model.gamma);
    }
    Ok((max_radius, violations))
}
