//! Free parameterisation of Schur-stable transition matrices.
//!
//! Given `W ∈ ℝ^{2n×2n}`, `V ∈ ℝ^{n×n}`, a log-scale `ε̃` and a radius
//! `0 < γ ≤ 1`, build
//!
//! ```text
//! S = WᵀW + exp(ε̃)·I₂ₙ = [ S11  S12 ]
//!                        [ S21  S22 ]
//! X = ½·(S11 + S22/γ²) + V − Vᵀ
//! A = S12 · X⁻¹
//! ```
//!
//! where the blocks are `S11 = S[0..n, 0..n]`, `S12 = S[0..n, n..2n]` and
//! `S22 = S[n..2n, n..2n]`. Because `S ≻ 0`, the symmetric part of `X` is
//! positive definite (so `X` is always invertible) and every eigenvalue of
//! `A` lies strictly inside the disk of radius `γ`. Conversely every matrix
//! with spectral radius below `γ` is reachable.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{invert, spectral_radius, Mat};
use crate::train::AdamState;

/// `ε̃` is clamped to this range before exponentiation.
pub const EPS_TILDE_CLAMP: f64 = 30.0;

pub const DEFAULT_GAMMA: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchurFactors {
    pub w: Mat,
    pub v: Mat,
    pub eps_tilde: f64,
    pub gamma: f64,
}

impl SchurFactors {
    pub fn new(w: Mat, v: Mat, eps_tilde: f64, gamma: f64) -> Result<Self> {
        let f = SchurFactors {
            w,
            v,
            eps_tilde,
            gamma,
        };
        f.validate()?;
        Ok(f)
    }

    /// State dimension `n`.
    pub fn order(&self) -> usize {
        self.v.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.v.rows();
        if n == 0 || !self.v.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "V must be a non-empty square matrix, got {}x{}",
                self.v.rows(),
                self.v.cols()
            )));
        }
        if self.w.rows() != 2 * n || self.w.cols() != 2 * n {
            return Err(Error::ShapeMismatch(format!(
                "W must be {0}x{0} for n = {n}, got {1}x{2}",
                2 * n,
                self.w.rows(),
                self.w.cols()
            )));
        }
        validate_gamma(self.gamma)?;
        if !self.eps_tilde.is_finite() || !self.w.is_finite() || !self.v.is_finite() {
            return Err(Error::NonFinite("Schur factors"));
        }
        Ok(())
    }
}

pub fn validate_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {gamma}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurGradients {
    pub d_w: Mat,
    pub d_v: Mat,
    pub d_eps_tilde: f64,
}

#[derive(Debug, Clone)]
pub struct AssembledS {
    pub s: Mat,
    /// Set when `ε̃` fell outside `[-30, 30]` and was clamped.
    pub clamped: bool,
}

/// `S = WᵀW + exp(ε̃)·I`.
pub fn assemble_s(w: &Mat, eps_tilde: f64) -> AssembledS {
    assert!(w.is_square(), "W must be square");
    let clamped_value = eps_tilde.clamp(-EPS_TILDE_CLAMP, EPS_TILDE_CLAMP);
    let eps = clamped_value.exp();
    let mut s = w.t_matmul(w);
    for i in 0..s.rows() {
        s[(i, i)] += eps;
    }
    AssembledS {
        s,
        clamped: clamped_value != eps_tilde,
    }
}

/// Intermediates of one transition build, kept for the reverse pass.
#[derive(Debug, Clone)]
pub(crate) struct TransitionTape {
    pub a: Mat,
    s12: Mat,
    x_inv: Mat,
    eps: f64,
    clamped: bool,
}

pub(crate) fn transition_forward(w: &Mat, v: &Mat, eps_tilde: f64, gamma: f64) -> Result<TransitionTape> {
    let n = v.rows();
    let AssembledS { s, clamped } = assemble_s(w, eps_tilde);
    let inv_g2 = 1.0 / (gamma * gamma);
    let mut x = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] = 0.5 * (s[(i, j)] + inv_g2 * s[(n + i, n + j)]) + v[(i, j)] - v[(j, i)];
        }
    }
    let x_inv = invert(&x)?;
    let s12 = s.block(0, n, n, n);
    let a = s12.matmul(&x_inv);
    Ok(TransitionTape {
        a,
        s12,
        x_inv,
        eps: eps_tilde.clamp(-EPS_TILDE_CLAMP, EPS_TILDE_CLAMP).exp(),
        clamped,
    })
}

/// Reverse pass: accumulates `∂L/∂W`, `∂L/∂V` into the given matrices and
/// returns `∂L/∂ε̃`.
pub(crate) fn transition_backward(
    tape: &TransitionTape,
    w: &Mat,
    gamma: f64,
    d_a: &Mat,
    d_w: &mut Mat,
    d_v: &mut Mat,
) -> f64 {
    let n = tape.a.rows();
    // A = S12 X⁻¹  ⇒  dS12 = dA X⁻ᵀ,  dX = −X⁻ᵀ S12ᵀ dA X⁻ᵀ
    let d_s12 = d_a.matmul_t(&tape.x_inv);
    let d_x = tape.x_inv.t_matmul(&tape.s12.t_matmul(d_a)).matmul_t(&tape.x_inv).scale(-1.0);

    let inv_g2 = 1.0 / (gamma * gamma);
    let mut d_s = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let g = d_x[(i, j)];
            d_s[(i, j)] = 0.5 * g;
            d_s[(n + i, n + j)] = 0.5 * inv_g2 * g;
            d_s[(i, n + j)] = d_s12[(i, j)];
            d_v[(i, j)] += g - d_x[(j, i)];
        }
    }
    // S = WᵀW + εI  ⇒  dW = W (dS + dSᵀ)
    let sym = d_s.add(&d_s.transpose());
    d_w.add_assign(&w.matmul(&sym));
    if tape.clamped {
        0.0
    } else {
        tape.eps * d_s.trace()
    }
}

/// Builds the transition matrix; its spectral radius is strictly below `γ`.
pub fn build_transition(f: &SchurFactors) -> Result<Mat> {
    f.validate()?;
    Ok(transition_forward(&f.w, &f.v, f.eps_tilde, f.gamma)?.a)
}

/// Gradients of a scalar loss with respect to `W`, `V` and `ε̃` given `∂L/∂A`.
pub fn build_transition_backward(f: &SchurFactors, d_a: &Mat) -> Result<SchurGradients> {
    f.validate()?;
    let n = f.order();
    if d_a.rows() != n || d_a.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient must be {n}x{n}, got {}x{}",
            d_a.rows(),
            d_a.cols()
        )));
    }
    let tape = transition_forward(&f.w, &f.v, f.eps_tilde, f.gamma)?;
    let mut d_w = Mat::zeros(2 * n, 2 * n);
    let mut d_v = Mat::zeros(n, n);
    let d_eps_tilde = transition_backward(&tape, &f.w, f.gamma, d_a, &mut d_w, &mut d_v);
    Ok(SchurGradients {
        d_w,
        d_v,
        d_eps_tilde,
    })
}

/// Draws factors with entries uniform in `[-scale, scale]` and `ε̃ = 0`.
pub fn random_factors(n: usize, gamma: f64, scale: f64, rng: &mut impl Rng) -> SchurFactors {
    let mut draw = |rows: usize, cols: usize| {
        let data = (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect();
        Mat::from_raw(rows, cols, data)
    };
    let w = draw(2 * n, 2 * n);
    let v = draw(n, n);
    SchurFactors {
        w,
        v,
        eps_tilde: 0.0,
        gamma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            learning_rate: 1e-2,
            max_iterations: 5000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub factors: SchurFactors,
    /// `‖build_transition(factors) − A_target‖_F` of the returned factors.
    pub residual: f64,
    pub iterations: usize,
}

/// Fits Schur factors whose transition matrix is closest (Frobenius) to `target`.
pub fn fit_to_target(target: &Mat, gamma: f64, seed: u64) -> Result<FitResult> {
    fit_to_target_with(target, gamma, seed, FitOptions::default())
}

pub fn fit_to_target_with(target: &Mat, gamma: f64, seed: u64, opts: FitOptions) -> Result<FitResult> {
    if !target.is_square() || target.rows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "target must be a non-empty square matrix, got {}x{}",
            target.rows(),
            target.cols()
        )));
    }
    if !target.is_finite() {
        return Err(Error::NonFinite("fit target"));
    }
    validate_gamma(gamma)?;
    let n = target.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = random_factors(n, gamma, 0.5, &mut rng);

    let n_w = 4 * n * n;
    let n_v = n * n;
    let mut params = Vec::with_capacity(n_w + n_v + 1);
    params.extend_from_slice(factors.w.as_slice());
    params.extend_from_slice(factors.v.as_slice());
    params.push(factors.eps_tilde);
    let mut adam = AdamState::new(params.len());
    let mut grad = vec![0.0; params.len()];

    let mut best = (f64::INFINITY, factors.clone());
    let mut iterations = 0;
    for it in 0..=opts.max_iterations {
        factors.w.as_mut_slice().copy_from_slice(&params[..n_w]);
        factors.v.as_mut_slice().copy_from_slice(&params[n_w..n_w + n_v]);
        factors.eps_tilde = params[n_w + n_v];

        let tape = transition_forward(&factors.w, &factors.v, factors.eps_tilde, gamma)?;
        let diff = tape.a.sub(target);
        let residual = diff.frobenius_norm();
        if residual < best.0 {
            best = (residual, factors.clone());
        }
        iterations = it;
        if residual < opts.tolerance || it == opts.max_iterations {
            break;
        }
        // loss = ½‖A − T‖²  ⇒  ∂loss/∂A = A − T
        let mut d_w = Mat::zeros(2 * n, 2 * n);
        let mut d_v = Mat::zeros(n, n);
        let d_eps = transition_backward(&tape, &factors.w, gamma, &diff, &mut d_w, &mut d_v);
        grad[..n_w].copy_from_slice(d_w.as_slice());
        grad[n_w..n_w + n_v].copy_from_slice(d_v.as_slice());
        grad[n_w + n_v] = d_eps;
        adam.step(&mut params, &grad, opts.learning_rate);
    }

    let (residual, factors) = best;
    if residual > 1e-3 * target.frobenius_norm().max(1e-12) {
        if let Ok(report) = spectral_radius(target) {
            if report.spectral_radius >= gamma {
                warn!(
                    "target spectral radius {:.4} is not below gamma {gamma}; residual floor {residual:.4e}",
                    report.spectral_radius
                );
            }
        }
    }
    Ok(FitResult {
        factors,
        residual,
        iterations,
    })
}
