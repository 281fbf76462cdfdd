//! Eigenvalue moduli of small dense real matrices.
//!
//! Balancing, reduction to upper Hessenberg form by stabilised elimination,
//! then Francis double-shift QR iteration on the Hessenberg matrix. Only the
//! eigenvalues are computed; complex pairs are reported through their modulus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Largest dimension accepted by [`spectral_radius`].
pub const MAX_DIM: usize = 64;

/// Sweep budget per unit of matrix dimension.
pub const SWEEPS_PER_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// One modulus per eigenvalue, counted with multiplicity (unordered).
    pub eigenvalue_moduli: Vec<f64>,
    pub spectral_radius: f64,
    pub iterations_used: usize,
}

/// Computes all eigenvalue moduli and the spectral radius of a square matrix.
pub fn spectral_radius(m: &Mat) -> Result<SpectralReport> {
    let eig = eigenvalues(m)?;
    let moduli: Vec<f64> = eig.values.iter().map(|&(re, im)| re.hypot(im)).collect();
    let radius = moduli.iter().fold(0.0_f64, |a, &b| a.max(b));
    Ok(SpectralReport {
        eigenvalue_moduli: moduli,
        spectral_radius: radius,
        iterations_used: eig.iterations,
    })
}

pub(crate) struct Eigenvalues {
    /// (real, imaginary) pairs.
    pub values: Vec<(f64, f64)>,
    pub iterations: usize,
}

pub(crate) fn eigenvalues(m: &Mat) -> Result<Eigenvalues> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n > MAX_DIM {
        return Err(Error::ShapeMismatch(format!(
            "dimension {n} exceeds the supported maximum {MAX_DIM}"
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    if n == 0 {
        return Ok(Eigenvalues {
            values: Vec::new(),
            iterations: 0,
        });
    }
    let mut a = m.as_slice().to_vec();
    balance(&mut a, n);
    reduce_to_hessenberg(&mut a, n);
    hessenberg_qr(&mut a, n)
}

// 1-based accessor over row-major storage, keeps the classic EISPACK indexing readable.
macro_rules! at {
    ($a:ident, $n:ident, $i:expr, $j:expr) => {
        $a[($i - 1) * $n + ($j - 1)]
    };
}

fn balance(a: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += at!(a, n, j, i).abs();
                    r += at!(a, n, i, j).abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        at!(a, n, i, j) *= g;
                    }
                    for j in 1..=n {
                        at!(a, n, j, i) *= f;
                    }
                }
            }
        }
    }
}

fn reduce_to_hessenberg(a: &mut [f64], n: usize) {
    for m in 2..n {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..=n {
            if at!(a, n, j, m - 1).abs() > x.abs() {
                x = at!(a, n, j, m - 1);
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                a.swap((i - 1) * n + (j - 1), (m - 1) * n + (j - 1));
            }
            for j in 1..=n {
                a.swap((j - 1) * n + (i - 1), (j - 1) * n + (m - 1));
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = at!(a, n, i, m - 1);
                if y != 0.0 {
                    y /= x;
                    at!(a, n, i, m - 1) = y;
                    for j in m..=n {
                        at!(a, n, i, j) -= y * at!(a, n, m, j);
                    }
                    for j in 1..=n {
                        at!(a, n, j, m) += y * at!(a, n, j, i);
                    }
                }
            }
        }
    }
    // Clear the elimination multipliers left below the subdiagonal.
    for i in 3..=n {
        for j in 1..=(i - 2) {
            at!(a, n, i, j) = 0.0;
        }
    }
}

fn hessenberg_qr(a: &mut [f64], n: usize) -> Result<Eigenvalues> {
    let cap = SWEEPS_PER_DIM * n;
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut found = vec![false; n + 1];
    let mut total_its = 0usize;

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += at!(a, n, i, j).abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0usize;
        let mut l;
        loop {
            l = nn;
            while l >= 2 {
                let mut s = at!(a, n, l - 1, l - 1).abs() + at!(a, n, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at!(a, n, l, l - 1).abs() + s == s {
                    at!(a, n, l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at!(a, n, nn, nn);
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                found[nn] = true;
                nn -= 1;
            } else {
                let mut y = at!(a, n, nn - 1, nn - 1);
                let mut w = at!(a, n, nn, nn - 1) * at!(a, n, nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    found[nn] = true;
                    found[nn - 1] = true;
                    nn -= 2;
                } else {
                    if total_its >= cap {
                        let partial = (1..=n)
                            .filter(|&i| found[i])
                            .map(|i| wr[i].hypot(wi[i]))
                            .collect();
                        return Err(Error::NoConvergence {
                            iterations: total_its,
                            dim: n,
                            partial_moduli: partial,
                        });
                    }
                    if its == 10 || its == 20 {
                        // Exceptional shift.
                        t += x;
                        for i in 1..=nn {
                            at!(a, n, i, i) -= x;
                        }
                        let s = at!(a, n, nn, nn - 1).abs() + at!(a, n, nn - 1, nn - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    total_its += 1;

                    let (mut p, mut q, mut r, mut z);
                    let mut m = nn - 2;
                    loop {
                        z = at!(a, n, m, m);
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / at!(a, n, m + 1, m) + at!(a, n, m, m + 1);
                        q = at!(a, n, m + 1, m + 1) - z - r - s0;
                        r = at!(a, n, m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = at!(a, n, m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (at!(a, n, m - 1, m - 1).abs() + z.abs() + at!(a, n, m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        at!(a, n, i, i - 2) = 0.0;
                        if i != m + 2 {
                            at!(a, n, i, i - 3) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nn {
                        if k != m {
                            p = at!(a, n, k, k - 1);
                            q = at!(a, n, k + 1, k - 1);
                            r = 0.0;
                            if k != nn - 1 {
                                r = at!(a, n, k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    at!(a, n, k, k - 1) = -at!(a, n, k, k - 1);
                                }
                            } else {
                                at!(a, n, k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = at!(a, n, k, j) + q * at!(a, n, k + 1, j);
                                if k != nn - 1 {
                                    pp += r * at!(a, n, k + 2, j);
                                    at!(a, n, k + 2, j) -= pp * z;
                                }
                                at!(a, n, k + 1, j) -= pp * y;
                                at!(a, n, k, j) -= pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * at!(a, n, i, k) + y * at!(a, n, i, k + 1);
                                if k != nn - 1 {
                                    pp += z * at!(a, n, i, k + 2);
                                    at!(a, n, i, k + 2) -= pp * r;
                                }
                                at!(a, n, i, k + 1) -= pp * q;
                                at!(a, n, i, k) -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    let values = (1..=n).map(|i| (wr[i], wi[i])).collect();
    Ok(Eigenvalues {
        values,
        iterations: total_its,
    })
}
