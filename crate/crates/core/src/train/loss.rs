//! Multi-step response loss, state-consistency loss and their sum.
//!
//! For one trajectory with horizon `L` (outputs `k = 0..=L`, propagated
//! states `k = 1..=L`):
//!
//! ```text
//! L_response = 1/(L·m)     · Σ_{k=0..L} ‖y(k) − ŷ(k)‖²
//! L_state    = 1/((L−1)·n) · Σ_{k=1..L} ‖x̂(k) − g(y(k))‖²
//! L_total    = L_response + λ·L_state
//! ```
//!
//! Batch losses average these over trajectories. [`LossNormalization::Mean`]
//! divides by the actual term counts, `(L+1)·m` and `L·n`, instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{LpvModel, MatrixSource};

use super::window::TrajectoryWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNormalization {
    /// Denominators `L·m` and `(L−1)·n`.
    #[default]
    AsPrinted,
    /// Denominators equal to the number of summed terms.
    Mean,
}

impl std::str::FromStr for LossNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" | "as-printed" => Ok(LossNormalization::AsPrinted),
            "mean" => Ok(LossNormalization::Mean),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss normalization {other:?} (expected as_printed or mean)"
            ))),
        }
    }
}

impl LossNormalization {
    /// Denominator of the response loss for horizon `horizon` and `m` outputs.
    pub fn response_denominator(self, horizon: usize, m: usize) -> Result<f64> {
        let terms = match self {
            LossNormalization::AsPrinted => horizon,
            LossNormalization::Mean => horizon + 1,
        };
        if terms == 0 || m == 0 {
            return Err(Error::DegenerateWindow(horizon));
        }
        Ok((terms * m) as f64)
    }

    /// Denominator of the state loss for horizon `horizon` and order `n`.
    pub fn state_denominator(self, horizon: usize, n: usize) -> Result<f64> {
        let terms = match self {
            LossNormalization::AsPrinted => horizon.saturating_sub(1),
            LossNormalization::Mean => horizon,
        };
        if terms == 0 || n == 0 {
            return Err(Error::DegenerateWindow(horizon));
        }
        Ok((terms * n) as f64)
    }

    /// Smallest window (rows) for which both losses are defined.
    pub fn min_window_len(self) -> usize {
        match self {
            LossNormalization::AsPrinted => 3,
            LossNormalization::Mean => 2,
        }
    }
}

fn check_batch(a: &[Mat], b: &[Mat], what: &str) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: batch sizes {} and {} (must be equal and non-zero)",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter().zip(b) {
        if x.rows() != y.rows() || x.cols() != y.cols() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols()
            )));
        }
    }
    Ok(())
}

fn squared_gap(a: &Mat, b: &Mat) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Batch response loss; each trajectory has `L+1` rows (`k = 0..=L`).
pub fn response_loss(predicted: &[Mat], measured: &[Mat], norm: LossNormalization) -> Result<f64> {
    check_batch(predicted, measured, "response loss")?;
    let mut total = 0.0;
    for (p, y) in predicted.iter().zip(measured) {
        if p.rows() < 2 {
            return Err(Error::DegenerateWindow(p.rows().saturating_sub(1)));
        }
        total += squared_gap(p, y) / norm.response_denominator(p.rows() - 1, p.cols())?;
    }
    Ok(total / predicted.len() as f64)
}

/// Batch state loss; each trajectory has `L` rows (`k = 1..=L`).
pub fn state_loss(propagated: &[Mat], encoded: &[Mat], norm: LossNormalization) -> Result<f64> {
    check_batch(propagated, encoded, "state loss")?;
    let mut total = 0.0;
    for (p, e) in propagated.iter().zip(encoded) {
        total += squared_gap(p, e) / norm.state_denominator(p.rows(), p.cols())?;
    }
    Ok(total / propagated.len() as f64)
}

pub fn total_loss(response: f64, state: f64, lambda: f64) -> f64 {
    response + lambda * state
}

/// Losses of one window and, optionally, the gradient of
/// `response + λ·state` in the model's flat parameter order.
#[derive(Debug, Clone)]
pub struct WindowObjective {
    pub response: f64,
    pub state: f64,
    pub grad: Option<Vec<f64>>,
}

impl WindowObjective {
    pub fn total(&self, lambda: f64) -> f64 {
        total_loss(self.response, self.state, lambda)
    }
}

/// Rolls the model over a window of `L+1` rows from `x̂(0) = g(y(0))` and
/// scores it against the measured outputs and the encoder's states.
///
/// The encoder targets `g(y(k))` depend on the parameters too; their
/// contribution is included in the gradient.
pub fn window_objective<G: MatrixSource>(
    model: &LpvModel<G>,
    window: &TrajectoryWindow,
    lambda: f64,
    norm: LossNormalization,
    want_grad: bool,
) -> Result<WindowObjective> {
    let (n, m, _) = model.dims();
    let rows = window.len();
    if rows < 2 {
        return Err(Error::DegenerateWindow(rows.saturating_sub(1)));
    }
    let horizon = rows - 1;
    let dr = norm.response_denominator(horizon, m)?;
    let ds = norm.state_denominator(horizon, n)?;

    let rollout = model.forward(&window.inputs, window.outputs.row(0))?;
    let trace = &rollout.trace;

    let mut response = 0.0;
    let mut d_outputs = want_grad.then(|| Vec::with_capacity(rows));
    for (k, y_hat) in trace.outputs.iter().enumerate() {
        let y = window.outputs.row(k);
        let mut dy = Vec::with_capacity(m);
        for (p, t) in y_hat.iter().zip(y) {
            let e = p - t;
            response += e * e;
            dy.push(2.0 * e / dr);
        }
        if let Some(d) = d_outputs.as_mut() {
            d.push(dy);
        }
    }
    response /= dr;

    let mut state = 0.0;
    let mut gaps = Vec::with_capacity(horizon);
    let mut enc_caches = Vec::with_capacity(if want_grad { horizon } else { 0 });
    for k in 1..=horizon {
        let y = window.outputs.row(k);
        let enc = if want_grad && lambda != 0.0 {
            let (enc, cache) = model.encoder.mlp().forward_cached(y);
            enc_caches.push(cache);
            enc
        } else {
            model.encode(y)
        };
        let gap: Vec<f64> = trace.states[k].iter().zip(&enc).map(|(x, e)| x - e).collect();
        state += gap.iter().map(|g| g * g).sum::<f64>();
        gaps.push(gap);
    }
    state /= ds;

    let grad = match d_outputs {
        Some(d_outputs) => {
            let mut grad = vec![0.0; model.param_count()];
            let d_states = if lambda != 0.0 {
                let c = 2.0 * lambda / ds;
                let mut d = vec![vec![0.0; n]; rows + 1];
                let ne = model.encoder.mlp().param_count();
                for (k, (gap, cache)) in gaps.iter().zip(&enc_caches).enumerate() {
                    d[k + 1] = gap.iter().map(|g| c * g).collect();
                    let d_enc: Vec<f64> = gap.iter().map(|g| -c * g).collect();
                    model.encoder.mlp().backward(cache, &d_enc, &mut grad[..ne]);
                }
                d
            } else {
                Vec::new()
            };
            model.backward(&rollout, &d_outputs, &d_states, &mut grad);
            Some(grad)
        }
        None => None,
    };
    Ok(WindowObjective { response, state, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> Mat {
        Mat::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_fit_is_zero() {
        let y = col(&[1.0, 2.0, 3.0]);
        assert_eq!(response_loss(&[y.clone()], &[y.clone()], LossNormalization::AsPrinted).unwrap(), 0.0);
        assert_eq!(state_loss(&[y.clone()], &[y], LossNormalization::AsPrinted).unwrap(), 0.0);
    }

    #[test]
    fn hand_values() {
        // L = 2: three unit errors over k = 0..2, divided by L·m = 2.
        let r = response_loss(&[col(&[1.0, 1.0, 1.0])], &[col(&[0.0; 3])], LossNormalization::AsPrinted).unwrap();
        assert_eq!(r, 1.5);
        // L = 2: gaps² (4, 1) at k = 1, 2, divided by (L−1)·n = 1.
        let s = state_loss(&[col(&[2.0, 1.0])], &[col(&[0.0, 0.0])], LossNormalization::AsPrinted).unwrap();
        assert_eq!(s, 5.0);
        assert!((total_loss(r, s, 0.01) - 1.55).abs() < 1e-15);
        assert_eq!(total_loss(2.0, 3.0, 1.0), 5.0);
        assert_eq!(total_loss(2.0, 3.0, 0.0), 2.0);
    }

    #[test]
    fn mean_normalisation() {
        let r = response_loss(&[col(&[1.0, 1.0, 1.0])], &[col(&[0.0; 3])], LossNormalization::Mean).unwrap();
        assert_eq!(r, 1.0);
        let s = state_loss(&[col(&[2.0, 1.0])], &[col(&[0.0, 0.0])], LossNormalization::Mean).unwrap();
        assert_eq!(s, 2.5);
    }

    #[test]
    fn duplicated_batch_is_invariant() {
        let p = col(&[0.3, -1.0, 2.0, 0.5]);
        let y = col(&[0.0, 0.1, 1.0, 0.4]);
        let one = response_loss(&[p.clone()], &[y.clone()], LossNormalization::AsPrinted).unwrap();
        let two = response_loss(&[p.clone(), p], &[y.clone(), y], LossNormalization::AsPrinted).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn degenerate_state_window() {
        assert!(matches!(
            state_loss(&[col(&[1.0])], &[col(&[0.0])], LossNormalization::AsPrinted),
            Err(Error::DegenerateWindow(1))
        ));
        assert!(state_loss(&[col(&[1.0])], &[col(&[0.0])], LossNormalization::Mean).is_ok());
    }

    #[test]
    fn shape_mismatch() {
        assert!(response_loss(&[col(&[1.0, 2.0])], &[col(&[1.0, 2.0, 3.0])], LossNormalization::Mean).is_err());
        assert!(response_loss(&[], &[], LossNormalization::Mean).is_err());
    }

    fn naive_response(p: &[Mat], y: &[Mat]) -> f64 {
        let mut acc = 0.0;
        for t in 0..p.len() {
            let (rows, m) = (p[t].rows(), p[t].cols());
            let l = rows - 1;
            let mut s = 0.0;
            for k in 0..=l {
                for i in 0..m {
                    s += (y[t][(k, i)] - p[t][(k, i)]).powi(2);
                }
            }
            acc += s / (l * m) as f64;
        }
        acc / p.len() as f64
    }

    fn naive_state(x: &[Mat], e: &[Mat]) -> f64 {
        let mut acc = 0.0;
        for t in 0..x.len() {
            let (l, n) = (x[t].rows(), x[t].cols());
            let mut s = 0.0;
            for k in 0..l {
                for j in 0..n {
                    s += (x[t][(k, j)] - e[t][(k, j)]).powi(2);
                }
            }
            acc += s / ((l - 1) * n) as f64;
        }
        acc / x.len() as f64
    }

    #[test]
    fn matches_naive_triple_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rand_mat = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
            Mat::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
        };
        for _ in 0..1000 {
            let batch = rng.random_range(1..5);
            let l = rng.random_range(2..12);
            let m = rng.random_range(1..4);
            let n = rng.random_range(1..4);
            let p: Vec<Mat> = (0..batch).map(|_| rand_mat(&mut rng, l + 1, m)).collect();
            let y: Vec<Mat> = (0..batch).map(|_| rand_mat(&mut rng, l + 1, m)).collect();
            let x: Vec<Mat> = (0..batch).map(|_| rand_mat(&mut rng, l, n)).collect();
            let e: Vec<Mat> = (0..batch).map(|_| rand_mat(&mut rng, l, n)).collect();
            let r = response_loss(&p, &y, LossNormalization::AsPrinted).unwrap();
            let s = state_loss(&x, &e, LossNormalization::AsPrinted).unwrap();
            assert!((r - naive_response(&p, &y)).abs() <= 1e-12 * r.max(1.0));
            assert!((s - naive_state(&x, &e)).abs() <= 1e-12 * s.max(1.0));
        }
    }
}
