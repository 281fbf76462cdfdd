use serde::{Deserialize, Serialize};

use crate::data::RawSeries;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// `L` consecutive rows of a series; the unit of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryWindow {
    /// `L × m`.
    pub outputs: Mat,
    /// `L × r`.
    pub inputs: Mat,
    /// 0-based row of the source series where the window starts.
    pub origin: usize,
}

impl TrajectoryWindow {
    pub fn len(&self) -> usize {
        self.outputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of windows of length `len` at stride `stride` in `k` rows.
pub fn window_count(k: usize, len: usize, stride: usize) -> usize {
    if len == 0 || stride == 0 || len > k {
        0
    } else {
        (k - len) / stride + 1
    }
}

/// Sliding windows starting at rows `0, s, 2s, …, ⌊(K−L)/s⌋·s`.
pub fn make_windows(series: &RawSeries, len: usize, stride: usize) -> Result<Vec<TrajectoryWindow>> {
    if len == 0 || stride == 0 {
        return Err(Error::InvalidConfig(format!(
            "window length and stride must be positive (L={len}, s={stride})"
        )));
    }
    let k = series.len();
    if len > k {
        return Err(Error::WindowTooLong { window: len, len: k });
    }
    Ok((0..window_count(k, len, stride))
        .map(|i| {
            let origin = i * stride;
            TrajectoryWindow {
                outputs: series.outputs.block(origin, 0, len, series.output_dim()),
                inputs: series.inputs.block(origin, 0, len, series.input_dim()),
                origin,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(k: usize) -> RawSeries {
        let y = (0..k).map(|i| i as f64).collect();
        let u = (0..k).map(|i| -(i as f64)).collect();
        RawSeries::new(Mat::from_vec(k, 1, y).unwrap(), Mat::from_vec(k, 1, u).unwrap(), 1.0).unwrap()
    }

    fn one_based_starts(w: &[TrajectoryWindow]) -> Vec<usize> {
        w.iter().map(|w| w.origin + 1).collect()
    }

    #[test]
    fn hand_enumerations() {
        assert_eq!(one_based_starts(&make_windows(&ramp(10), 4, 2).unwrap()), vec![1, 3, 5, 7]);
        assert_eq!(one_based_starts(&make_windows(&ramp(5), 2, 1).unwrap()), vec![1, 2, 3, 4]);
        assert_eq!(make_windows(&ramp(6), 6, 3).unwrap().len(), 1);
    }

    #[test]
    fn window_contents() {
        let w = make_windows(&ramp(10), 4, 2).unwrap();
        assert_eq!(w[1].outputs.column(0), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w[1].inputs.column(0), vec![-2.0, -3.0, -4.0, -5.0]);
    }

    #[test]
    fn too_long() {
        assert!(matches!(
            make_windows(&ramp(3), 4, 1),
            Err(Error::WindowTooLong { window: 4, len: 3 })
        ));
        assert!(make_windows(&ramp(3), 2, 0).is_err());
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let k = rng.random_range(1..60);
            let len = rng.random_range(1..=k);
            let s = rng.random_range(1..12);
            let series = ramp(k);
            let got = make_windows(&series, len, s).unwrap();
            let expected: Vec<usize> = (0..k).filter(|&i| i % s == 0 && i + len <= k).collect();
            assert_eq!(got.iter().map(|w| w.origin).collect::<Vec<_>>(), expected);
            assert_eq!(got.len(), (k - len) / s + 1);
            for w in &got {
                assert_eq!(w.outputs.column(0), series.outputs.column(0)[w.origin..w.origin + len].to_vec());
            }
        }
    }
}
