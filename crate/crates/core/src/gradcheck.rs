//! Central finite differences and the end-to-end gradient check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::RawSeries;
use crate::error::Result;
use crate::linalg::Mat;
use crate::model::NnssModel;
use crate::net::Activation;
use crate::train::{make_windows, window_objective, LossNormalization};

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, zero when both vectors vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub order: usize,
    pub outputs: usize,
    pub inputs: usize,
    pub window_len: usize,
    pub batch: usize,
    pub relative_error: f64,
}

/// Compares the analytic batch total-loss gradient of random small models
/// against central differences. One entry per configuration.
pub fn run_suite(cases: usize, seed: u64) -> Result<Vec<GradCheckCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acts = [Activation::Sigmoid, Activation::Tanh];
    let mut out = Vec::with_capacity(cases);
    for case in 0..cases {
        let n = 1 + case % 3;
        let m = 1 + (case / 3) % 2;
        let r = 1 + (case / 2) % 2;
        let window_len = rng.random_range(3..=10);
        let batch = rng.random_range(1..=2);
        let lambda = if case % 4 == 0 { 0.0 } else { rng.random_range(0.01..1.0) };
        let norm = if case % 2 == 0 {
            LossNormalization::AsPrinted
        } else {
            LossNormalization::Mean
        };
        let model = NnssModel::init(
            n,
            m,
            r,
            &[3],
            &[6, 5],
            acts[case % 2],
            0.9,
            rng.random(),
        )?;
        let mut model = model;
        model.eps_tilde = rng.random_range(-1.0..0.5);

        let rows = window_len + batch;
        let series = RawSeries::new(
            random_mat(&mut rng, rows, m),
            random_mat(&mut rng, rows, r),
            1.0,
        )?;
        let windows = make_windows(&series, window_len, 1)?;
        let batch_windows: Vec<_> = windows.iter().take(batch).collect();

        let loss = |mdl: &NnssModel| -> f64 {
            batch_windows
                .iter()
                .map(|w| window_objective(mdl, w, lambda, norm, false).unwrap().total(lambda))
                .sum::<f64>()
                / batch_windows.len() as f64
        };
        let mut analytic = vec![0.0; model.param_count()];
        for w in &batch_windows {
            let obj = window_objective(&model, w, lambda, norm, true)?;
            for (a, g) in analytic.iter_mut().zip(obj.grad.unwrap()) {
                *a += g / batch_windows.len() as f64;
            }
        }
        let params = model.params();
        let numeric = central_difference(&params, 1e-6, |p| {
            let mut probe = model.clone();
            probe.set_params(p);
            loss(&probe)
        });
        out.push(GradCheckCase {
            order: n,
            outputs: m,
            inputs: r,
            window_len,
            batch,
            relative_error: relative_error(&analytic, &numeric),
        });
    }
    Ok(out)
}

fn random_mat(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Mat::from_raw(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((relative_error(&[1.0, 0.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn central_difference_of_quadratic() {
        let g = central_difference(&[1.0, -2.0], 1e-4, |x| x[0] * x[0] + 3.0 * x[1]);
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn small_suite_passes() {
        for case in run_suite(4, 77).unwrap() {
            assert!(case.relative_error < 1e-5, "{case:?}");
        }
    }
}
