//! Dense networks: the affine encoder and the matrix generator MLP.
//!
//! Gradients are propagated with explicit per-layer caches. Parameters are
//! laid out flat, layer by layer, each layer as its weight matrix
//! (row-major, `out × in`) followed by its bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Activation::Identity),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn in_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_width(&self) -> usize {
        self.weight.rows()
    }

    fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let in_w = self.in_width();
        self.weight
            .as_slice()
            .chunks_exact(in_w)
            .zip(&self.bias)
            .map(|(row, b)| self.activation.apply(dot(row, x) + b))
            .collect()
    }
}

/// Xavier-uniform bound `√(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Multilayer perceptron shared by the encoder and generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Per-layer inputs and outputs recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_width() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: bias length {} for output width {}",
                    l.bias.len(),
                    l.out_width()
                )));
            }
            if i > 0 && layers[i - 1].out_width() != l.in_width() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: input width {} does not match previous output {}",
                    l.in_width(),
                    layers[i - 1].out_width()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// Xavier-uniform weights and zero biases drawn from `rng`.
    ///
    /// `widths` lists every layer boundary, input first: `[in, h1, …, out]`.
    pub fn init(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidConfig(format!("layer widths must be positive, got {widths:?}")));
        }
        let count = widths.len() - 1;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = xavier_bound(fan_in, fan_out);
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                DenseLayer {
                    weight: Mat::from_raw(fan_out, fan_in, data),
                    bias: vec![0.0; fan_out],
                    activation: if i + 1 == count { output } else { hidden },
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn out_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_width());
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(&h);
        }
        h
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        debug_assert_eq!(x.len(), self.in_width());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap());
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        (out, MlpCache { activations })
    }

    /// Accumulates parameter gradients into `grad` (flat layout, length
    /// [`Mlp::param_count`]) and returns the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.param_count());
        let mut end = grad.len();
        let mut delta = d_out.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[idx];
            let output = &cache.activations[idx + 1];
            for (d, &y) in delta.iter_mut().zip(output) {
                *d *= layer.activation.derivative_from_output(y);
            }
            let (in_w, out_w) = (layer.in_width(), layer.out_width());
            let start = end - layer.param_count();
            let (g_w, g_b) = grad[start..end].split_at_mut(in_w * out_w);
            end = start;
            for ((&d, gb), gw_row) in delta.iter().zip(g_b.iter_mut()).zip(g_w.chunks_exact_mut(in_w)) {
                for (gw, &x) in gw_row.iter_mut().zip(input) {
                    *gw += d * x;
                }
                *gb += d;
            }
            delta = layer.weight.t_matvec(&delta);
        }
        delta
    }

    pub fn write_params(&self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.param_count());
        let mut off = 0;
        for l in &self.layers {
            let wl = l.weight.as_slice().len();
            out[off..off + wl].copy_from_slice(l.weight.as_slice());
            off += wl;
            out[off..off + l.bias.len()].copy_from_slice(&l.bias);
            off += l.bias.len();
        }
    }

    pub fn read_params(&mut self, src: &[f64]) {
        debug_assert_eq!(src.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let wl = l.weight.as_slice().len();
            l.weight.as_mut_slice().copy_from_slice(&src[off..off + wl]);
            off += wl;
            let bl = l.bias.len();
            l.bias.copy_from_slice(&src[off..off + bl]);
            off += bl;
        }
    }
}

/// Affine map `ℝ^m → ℝ^n` from a measured output to a latent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderNet(Mlp);

impl EncoderNet {
    /// `hidden` lists intermediate widths; every layer is identity-activated.
    pub fn new(m: usize, hidden: &[usize], n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init(m, hidden, n, &mut rng)
    }

    pub fn init(m: usize, hidden: &[usize], n: usize, rng: &mut impl Rng) -> Result<Self> {
        let widths = widths(m, hidden, n);
        Ok(EncoderNet(Mlp::init(&widths, Activation::Identity, Activation::Identity, rng)?))
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        if mlp.layers().iter().any(|l| l.activation != Activation::Identity) {
            return Err(Error::InvalidConfig("encoder layers must be identity-activated".into()));
        }
        Ok(EncoderNet(mlp))
    }

    pub fn mlp(&self) -> &Mlp {
        &self.0
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.0
    }

    pub fn forward(&self, y: &[f64]) -> Vec<f64> {
        self.0.forward(y)
    }
}

/// Width of the generator output for state, output and input dimensions.
pub fn generator_output_width(n: usize, m: usize, r: usize) -> usize {
    5 * n * n + n * r + m * n
}

/// MLP from the scheduling variable to the flat `(W, V, B, C)` vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet {
    mlp: Mlp,
    n: usize,
    m: usize,
    r: usize,
}

impl GeneratorNet {
    pub fn new(n: usize, m: usize, r: usize, hidden: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init(n, m, r, hidden, activation, &mut rng)
    }

    pub fn init(
        n: usize,
        m: usize,
        r: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let widths = widths(n, hidden, generator_output_width(n, m, r));
        let mlp = Mlp::init(&widths, activation, Activation::Identity, rng)?;
        Ok(GeneratorNet { mlp, n, m, r })
    }

    pub fn from_mlp(mlp: Mlp, n: usize, m: usize, r: usize) -> Result<Self> {
        let expected = generator_output_width(n, m, r);
        if mlp.out_width() != expected {
            return Err(Error::ShapeMismatch(format!(
                "generator output width {} but 5n²+nr+mn = {expected}",
                mlp.out_width()
            )));
        }
        if mlp.in_width() != n {
            return Err(Error::ShapeMismatch(format!(
                "generator input width {} must equal the state dimension {n}",
                mlp.in_width()
            )));
        }
        if mlp.layers().last().unwrap().activation != Activation::Identity {
            return Err(Error::InvalidConfig("generator output layer must be identity-activated".into()));
        }
        Ok(GeneratorNet { mlp, n, m, r })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.r)
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn forward(&self, rho: &[f64]) -> Result<GeneratedMatrices> {
        if rho.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "scheduling vector has length {}, expected {}",
                rho.len(),
                self.n
            )));
        }
        GeneratedMatrices::partition(&self.mlp.forward(rho), self.n, self.m, self.r)
    }
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// The generator output split into its matrix blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMatrices {
    pub w: Mat,
    pub v: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl GeneratedMatrices {
    pub fn zeros(n: usize, m: usize, r: usize) -> Self {
        GeneratedMatrices {
            w: Mat::zeros(2 * n, 2 * n),
            v: Mat::zeros(n, n),
            b: Mat::zeros(n, r),
            c: Mat::zeros(m, n),
        }
    }

    /// Splits `[W (4n², 2n×2n) | V (n², n×n) | B (nr, n×r) | C (mn, m×n)]`,
    /// each block reshaped row-major.
    pub fn partition(out: &[f64], n: usize, m: usize, r: usize) -> Result<Self> {
        let expected = generator_output_width(n, m, r);
        if out.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "generator output has {} entries, expected {expected}",
                out.len()
            )));
        }
        let (w, rest) = out.split_at(4 * n * n);
        let (v, rest) = rest.split_at(n * n);
        let (b, c) = rest.split_at(n * r);
        Ok(GeneratedMatrices {
            w: Mat::from_raw(2 * n, 2 * n, w.to_vec()),
            v: Mat::from_raw(n, n, v.to_vec()),
            b: Mat::from_raw(n, r, b.to_vec()),
            c: Mat::from_raw(m, n, c.to_vec()),
        })
    }

    /// Inverse of [`GeneratedMatrices::partition`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.w.as_slice().len() + self.v.as_slice().len() + self.b.as_slice().len() + self.c.as_slice().len(),
        );
        out.extend_from_slice(self.w.as_slice());
        out.extend_from_slice(self.v.as_slice());
        out.extend_from_slice(self.b.as_slice());
        out.extend_from_slice(self.c.as_slice());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, relative_error};
    use proptest::prelude::*;
    use rand::Rng;

    fn layer(weight: Mat, bias: Vec<f64>, activation: Activation) -> DenseLayer {
        DenseLayer {
            weight,
            bias,
            activation,
        }
    }

    #[test]
    fn identity_encoder() {
        let enc = EncoderNet::from_mlp(
            Mlp::from_layers(vec![layer(Mat::identity(2), vec![0.0; 2], Activation::Identity)]).unwrap(),
        )
        .unwrap();
        assert_eq!(enc.forward(&[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn constant_encoder() {
        let enc = EncoderNet::from_mlp(
            Mlp::from_layers(vec![
                layer(Mat::zeros(3, 2), vec![0.0; 3], Activation::Identity),
                layer(Mat::zeros(1, 3), vec![0.5], Activation::Identity),
            ])
            .unwrap(),
        )
        .unwrap();
        assert_eq!(enc.forward(&[7.0, -3.0]), vec![0.5]);
        assert_eq!(enc.forward(&[0.0, 0.0]), vec![0.5]);
    }

    #[test]
    fn encoder_rejects_nonlinear_layers() {
        let mlp = Mlp::from_layers(vec![layer(Mat::identity(1), vec![0.0], Activation::Tanh)]).unwrap();
        assert!(EncoderNet::from_mlp(mlp).is_err());
    }

    #[test]
    fn two_layer_encoder_matches_direct_affine_composition() {
        let enc = EncoderNet::new(3, &[5], 2, 17).unwrap();
        let l = enc.mlp().layers();
        let y = [0.3, -1.2, 2.0];
        let h1: Vec<f64> = l[0].weight.matvec(&y).iter().zip(&l[0].bias).map(|(a, b)| a + b).collect();
        let x: Vec<f64> = l[1].weight.matvec(&h1).iter().zip(&l[1].bias).map(|(a, b)| a + b).collect();
        for (a, b) in enc.forward(&y).iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_output_width_for_small_model() {
        assert_eq!(generator_output_width(2, 1, 1), 24);
        let g = GeneratorNet::new(2, 1, 1, &[32, 32], Activation::Sigmoid, 0).unwrap();
        assert_eq!(g.mlp().out_width(), 24);
    }

    #[test]
    fn ramp_bias_pins_the_partition() {
        let (n, m, r) = (2, 1, 1);
        let width = generator_output_width(n, m, r);
        let ramp: Vec<f64> = (0..width).map(|i| i as f64).collect();
        let mlp = Mlp::from_layers(vec![layer(Mat::zeros(width, n), ramp.clone(), Activation::Identity)]).unwrap();
        let g = GeneratorNet::from_mlp(mlp, n, m, r).unwrap();
        let out = g.forward(&[0.4, -0.1]).unwrap();
        assert_eq!(
            out.w,
            Mat::from_rows(&[
                &[0.0, 1.0, 2.0, 3.0],
                &[4.0, 5.0, 6.0, 7.0],
                &[8.0, 9.0, 10.0, 11.0],
                &[12.0, 13.0, 14.0, 15.0],
            ])
        );
        assert_eq!(out.v, Mat::from_rows(&[&[16.0, 17.0], &[18.0, 19.0]]));
        assert_eq!(out.b, Mat::from_rows(&[&[20.0], &[21.0]]));
        assert_eq!(out.c, Mat::from_rows(&[&[22.0, 23.0]]));
        assert_eq!(out.flatten(), ramp);
    }

    #[test]
    fn miswired_generator_is_rejected() {
        let mlp = Mlp::from_layers(vec![layer(Mat::zeros(23, 2), vec![0.0; 23], Activation::Identity)]).unwrap();
        assert!(matches!(GeneratorNet::from_mlp(mlp, 2, 1, 1), Err(Error::ShapeMismatch(_))));
        assert!(matches!(GeneratedMatrices::partition(&[0.0; 5], 1, 1, 1), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn sigmoid_saturates() {
        let mlp = Mlp::from_layers(vec![layer(Mat::from_rows(&[&[1.0], &[2.0]]), vec![0.0, 20.0], Activation::Sigmoid)])
            .unwrap();
        for y in mlp.forward(&[40.0]) {
            assert!((y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let g = GeneratorNet::new(2, 1, 1, &[8, 8], Activation::Sigmoid, 3).unwrap();
        let (_, cache) = g.mlp().forward_cached(&[0.2, 0.7]);
        let mut grad = vec![0.0; g.mlp().param_count()];
        let d_in = g.mlp().backward(&cache, &vec![0.0; 24], &mut grad);
        assert!(grad.iter().all(|&v| v == 0.0));
        assert!(d_in.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_sigmoid_chain_rule() {
        let (w, b, x) = (0.7, -0.2, 1.3);
        let mlp = Mlp::from_layers(vec![layer(Mat::from_rows(&[&[w]]), vec![b], Activation::Sigmoid)]).unwrap();
        let (out, cache) = mlp.forward_cached(&[x]);
        let s = out[0];
        let mut grad = vec![0.0; 2];
        let d_in = mlp.backward(&cache, &[1.0], &mut grad);
        let ds = s * (1.0 - s);
        assert!((d_in[0] - ds * w).abs() < 1e-15);
        assert!((grad[0] - ds * x).abs() < 1e-15);
        assert!((grad[1] - ds).abs() < 1e-15);
    }

    #[test]
    fn generator_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let acts = [Activation::Sigmoid, Activation::Tanh, Activation::Sigmoid, Activation::Identity];
        for case in 0..100 {
            let act = acts[case % acts.len()];
            let n = 1 + case % 3;
            let mut g = GeneratorNet::init(n, 2, 1, &[6, 5], act, &mut rng).unwrap();
            for l in g.mlp_mut().layers_mut() {
                for b in &mut l.bias {
                    *b = rng.random_range(-0.5..0.5);
                }
            }
            let rho: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let width = g.mlp().out_width();
            let upstream: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, cache) = g.mlp().forward_cached(&rho);
            let mut grad = vec![0.0; g.mlp().param_count()];
            let d_rho = g.mlp().backward(&cache, &upstream, &mut grad);

            let mut params = vec![0.0; g.mlp().param_count()];
            g.mlp().write_params(&mut params);
            let numeric = central_difference(&params, 1e-6, |p| {
                let mut probe = g.mlp().clone();
                probe.read_params(p);
                dot(&probe.forward(&rho), &upstream)
            });
            assert!(relative_error(&grad, &numeric) < 1e-5, "case {case}");
            let numeric_rho = central_difference(&rho, 1e-6, |x| dot(&g.mlp().forward(x), &upstream));
            assert!(relative_error(&d_rho, &numeric_rho) < 1e-5, "case {case} (input)");
        }
    }

    #[test]
    fn relu_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp = Mlp::init(&[3, 7, 2], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let x = [0.4, -0.9, 0.3];
        let up = [1.0, -0.5];
        let (_, cache) = mlp.forward_cached(&x);
        let mut grad = vec![0.0; mlp.param_count()];
        mlp.backward(&cache, &up, &mut grad);
        let mut params = vec![0.0; mlp.param_count()];
        mlp.write_params(&mut params);
        let numeric = central_difference(&params, 1e-7, |p| {
            let mut probe = mlp.clone();
            probe.read_params(p);
            dot(&probe.forward(&x), &up)
        });
        assert!(relative_error(&grad, &numeric) < 1e-5);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = GeneratorNet::new(2, 1, 1, &[32, 32], Activation::Sigmoid, 5).unwrap();
        let b = GeneratorNet::new(2, 1, 1, &[32, 32], Activation::Sigmoid, 5).unwrap();
        let c = GeneratorNet::new(2, 1, 1, &[32, 32], Activation::Sigmoid, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for l in a.mlp().layers() {
            assert!(l.bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn xavier_bound_for_equal_fans() {
        let bound = xavier_bound(6, 6);
        assert!((bound - 0.5_f64.sqrt()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::init(&[6, 6], Activation::Identity, Activation::Identity, &mut rng).unwrap();
        assert!(mlp.layers()[0].weight.max_abs() <= bound);
    }

    proptest! {
        #[test]
        fn encoder_is_affine(
            seed in 0u64..1000,
            y1 in proptest::collection::vec(-5.0f64..5.0, 3),
            y2 in proptest::collection::vec(-5.0f64..5.0, 3),
            a in -2.0f64..2.0,
        ) {
            let enc = EncoderNet::new(3, &[4], 2, seed).unwrap();
            let mix: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + (1.0 - a) * q).collect();
            let lhs = enc.forward(&mix);
            let g1 = enc.forward(&y1);
            let g2 = enc.forward(&y2);
            for i in 0..2 {
                prop_assert!((lhs[i] - (a * g1[i] + (1.0 - a) * g2[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn partition_round_trip(n in 1usize..4, m in 1usize..4, r in 1usize..4, seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..generator_output_width(n, m, r)).map(|_| rng.random_range(-1.0..1.0)).collect();
            prop_assert_eq!(GeneratedMatrices::partition(&v, n, m, r).unwrap().flatten(), v);
        }
    }
}
