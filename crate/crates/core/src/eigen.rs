//! Dense real nonsymmetric eigenvalues.
//!
//! Balancing, Householder reduction to upper Hessenberg form, then the
//! Francis double-shift QR iteration (EISPACK `hqr2` lineage, Schur part
//! only). Schur vectors are accumulated so the backward error
//! `||A Q - Q T||_F / ||A||_F` can be measured rather than assumed.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// All eigenvalues with multiplicity, in deflation order.
    pub eigenvalues: Vec<Complex64>,
    /// `||B Q - Q T||_F / ||B||_F` for the balanced matrix `B`.
    pub backward_error: f64,
    pub iterations: usize,
}

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument("eigenvalues of a non-square matrix".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            backward_error: 0.0,
            iterations: 0,
        });
    }
    let balanced = balance(a.clone());
    let (mut h, mut q) = hessenberg(balanced.clone());
    let (eigenvalues, blocks, iterations) = francis_qr(&mut h, &mut q)?;

    // Clean the quasi-triangular form before measuring the residual.
    let mut t = h;
    for j in 0..n {
        for i in j + 1..n {
            let inside_block = i == j + 1 && blocks.contains(&j);
            if !inside_block {
                t[(i, j)] = 0.0;
            }
        }
    }
    let norm = balanced.norm();
    let backward_error = if norm == 0.0 {
        0.0
    } else {
        (&balanced * &q - &q * &t).norm() / norm
    };
    Ok(EigenDecomposition {
        eigenvalues,
        backward_error,
        iterations,
    })
}

/// Diagonal similarity by powers of two equalising row and column norms.
fn balance(mut a: DMatrix<f64>) -> DMatrix<f64> {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c >= g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    a
}

/// `A = Q H Q^T` with `H` upper Hessenberg.
fn hessenberg(mut a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut q = DMatrix::<f64>::identity(n, n);
    if n < 3 {
        return (a, q);
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let scale: f64 = (k + 1..n).map(|i| a[(i, k)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut sigma = 0.0;
        for i in k + 1..n {
            v[i] = a[(i, k)] / scale;
            sigma += v[i] * v[i];
        }
        let alpha = if v[k + 1] > 0.0 { -sigma.sqrt() } else { sigma.sqrt() };
        // v <- x - alpha e1, reflector I - 2 v v^T / (v^T v)
        let vtv = sigma - v[k + 1] * alpha;
        v[k + 1] -= alpha;
        let beta = 1.0 / vtv;

        for j in k..n {
            let dot: f64 = (k + 1..n).map(|i| v[i] * a[(i, j)]).sum::<f64>() * beta;
            for i in k + 1..n {
                a[(i, j)] -= dot * v[i];
            }
        }
        for i in 0..n {
            let dot: f64 = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum::<f64>() * beta;
            for j in k + 1..n {
                a[(i, j)] -= dot * v[j];
            }
        }
        for i in 0..n {
            let dot: f64 = (k + 1..n).map(|j| q[(i, j)] * v[j]).sum::<f64>() * beta;
            for j in k + 1..n {
                q[(i, j)] -= dot * v[j];
            }
        }
        a[(k + 1, k)] = alpha * scale;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
    (a, q)
}

/// Reduces `h` to real Schur form in place, accumulating into `q`.
/// Returns eigenvalues, the top-left indices of 2x2 complex blocks, and the
/// total sweep count.
fn francis_qr(
    h: &mut DMatrix<f64>,
    q: &mut DMatrix<f64>,
) -> Result<(Vec<Complex64>, Vec<usize>, usize)> {
    let nn = h.nrows();
    let mut eig = vec![Complex64::new(0.0, 0.0); nn];
    let mut blocks = Vec::new();
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut qq, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = nn as isize - 1;
    let mut iter = 0;
    let mut total = 0;
    while n >= 0 {
        let nu = n as usize;
        // small subdiagonal element
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            h[(nu, nu)] += exshift;
            eig[nu] = Complex64::new(h[(nu, nu)], 0.0);
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            let m1 = nu - 1;
            w = h[(nu, m1)] * h[(m1, nu)];
            p = (h[(m1, m1)] - h[(nu, nu)]) / 2.0;
            qq = p * p + w;
            z = qq.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(m1, m1)] += exshift;
            x = h[(nu, nu)];
            if qq >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                let mut lo = x + z;
                let hi = lo;
                if z != 0.0 {
                    lo = x - w / z;
                }
                eig[m1] = Complex64::new(hi, 0.0);
                eig[nu] = Complex64::new(lo, 0.0);
                x = h[(nu, m1)];
                s = x.abs() + z.abs();
                p = x / s;
                qq = z / s;
                r = (p * p + qq * qq).sqrt();
                p /= r;
                qq /= r;
                for j in m1..nn {
                    z = h[(m1, j)];
                    h[(m1, j)] = qq * z + p * h[(nu, j)];
                    h[(nu, j)] = qq * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, m1)];
                    h[(i, m1)] = qq * z + p * h[(i, nu)];
                    h[(i, nu)] = qq * h[(i, nu)] - p * z;
                }
                for i in 0..nn {
                    z = q[(i, m1)];
                    q[(i, m1)] = qq * z + p * q[(i, nu)];
                    q[(i, nu)] = qq * q[(i, nu)] - p * z;
                }
            } else {
                eig[m1] = Complex64::new(x + p, z);
                eig[nu] = Complex64::new(x + p, -z);
                blocks.push(m1);
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }
            // exceptional shifts
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total += 1;
            if iter > MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::EigNonConvergence { iterations: total });
            }

            // two consecutive small subdiagonal elements
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                qq = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + qq.abs() + r.abs();
                p /= s;
                qq /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[(m, m - 1)].abs() * (qq.abs() + r.abs());
                let rhs = eps
                    * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n, columns m..=n
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                x = 0.0;
                let mut skip = false;
                if k != m {
                    p = h[(k, k - 1)];
                    qq = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + qq.abs() + r.abs();
                    if x == 0.0 {
                        skip = true;
                    } else {
                        p /= x;
                        qq /= x;
                        r /= x;
                    }
                }
                if !skip {
                    s = (p * p + qq * qq + r * r).sqrt();
                    if p < 0.0 {
                        s = -s;
                    }
                    if s != 0.0 {
                        if k != m {
                            h[(k, k - 1)] = -s * x;
                        } else if l != m {
                            h[(k, k - 1)] = -h[(k, k - 1)];
                        }
                        p += s;
                        x = p / s;
                        y = qq / s;
                        z = r / s;
                        qq /= p;
                        r /= p;

                        for j in k..nn {
                            p = h[(k, j)] + qq * h[(k + 1, j)];
                            if notlast {
                                p += r * h[(k + 2, j)];
                                h[(k + 2, j)] -= p * z;
                            }
                            h[(k, j)] -= p * x;
                            h[(k + 1, j)] -= p * y;
                        }
                        for i in 0..=nu.min(k + 3) {
                            p = x * h[(i, k)] + y * h[(i, k + 1)];
                            if notlast {
                                p += z * h[(i, k + 2)];
                                h[(i, k + 2)] -= p * r;
                            }
                            h[(i, k)] -= p;
                            h[(i, k + 1)] -= p * qq;
                        }
                        for i in 0..nn {
                            p = x * q[(i, k)] + y * q[(i, k + 1)];
                            if notlast {
                                p += z * q[(i, k + 2)];
                                q[(i, k + 2)] -= p * r;
                            }
                            q[(i, k)] -= p;
                            q[(i, k + 1)] -= p * qq;
                        }
                    }
                }
                k += 1;
            }
        }
    }
    Ok((eig, blocks, total))
}
