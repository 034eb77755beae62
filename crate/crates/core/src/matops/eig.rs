use super::{MatOpsError, Matrix};
use crate::scalar::{cast, Scalar};

/// Reduces `a` to upper Hessenberg form by Householder reflections.
/// Eigenvalues are preserved; the transforms are not accumulated.
fn hessenberg<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    let n = a.rows();
    let mut h = a.clone();
    if n < 3 {
        return h;
    }
    let mut v = vec![T::zero(); n];
    for k in 0..n - 2 {
        let mut norm_sq = T::zero();
        for i in (k + 1)..n {
            norm_sq += h[(i, k)] * h[(i, k)];
        }
        let norm = norm_sq.sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if h[(k + 1, k)] > T::zero() { -norm } else { norm };
        for entry in v.iter_mut() {
            *entry = T::zero();
        }
        for i in (k + 1)..n {
            v[i] = h[(i, k)];
        }
        v[k + 1] -= alpha;
        let vtv = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if vtv <= T::epsilon() * norm_sq {
            continue;
        }
        let beta = (T::one() + T::one()) / vtv;
        // Left multiply by (I - beta v v^T).
        for j in 0..n {
            let mut s = T::zero();
            for i in (k + 1)..n {
                s += v[i] * h[(i, j)];
            }
            let bs = beta * s;
            for i in (k + 1)..n {
                let delta = bs * v[i];
                h[(i, j)] -= delta;
            }
        }
        // Right multiply by the same reflector.
        for i in 0..n {
            let mut s = T::zero();
            for j in (k + 1)..n {
                s += h[(i, j)] * v[j];
            }
            let bs = beta * s;
            for j in (k + 1)..n {
                let delta = bs * v[j];
                h[(i, j)] -= delta;
            }
        }
        h[(k + 1, k)] = alpha;
        for i in (k + 2)..n {
            h[(i, k)] = T::zero();
        }
    }
    h
}

fn sign_of<T: Scalar>(magnitude: T, sign_source: T) -> T {
    if sign_source >= T::zero() {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

/// Eigenvalues of a square real matrix as `(re, im)` pairs, in no particular
/// order. Complex eigenvalues come in conjugate pairs.
///
/// QR iteration with Francis double shifts on the Hessenberg form. Intended
/// for the small matrices this crate works with (n <= 16 network Laplacians,
/// stacked closed loops up to 64); errors if the iteration stalls.
pub fn eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<(T, T)>, MatOpsError> {
    if !a.is_square() {
        return Err(MatOpsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = hessenberg(a);
    let idx = |i: isize, j: isize| (i as usize, j as usize);

    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == T::zero() {
        return Ok(vec![(T::zero(), T::zero()); n]);
    }

    let eps = T::epsilon();
    let mut eigs: Vec<(T, T)> = Vec::with_capacity(n);
    let mut nn: isize = n as isize - 1;
    let mut t_shift = T::zero();
    let mut total_steps = 0usize;
    let max_steps = 60 * n;

    while nn >= 0 {
        let mut its = 0usize;
        loop {
            // Look for a negligible subdiagonal entry splitting the active block.
            let mut l: isize = 0;
            let mut ll = nn;
            while ll >= 1 {
                let mut s = h[idx(ll - 1, ll - 1)].abs() + h[idx(ll, ll)].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if h[idx(ll, ll - 1)].abs() <= eps * s {
                    h[idx(ll, ll - 1)] = T::zero();
                    l = ll;
                    break;
                }
                ll -= 1;
            }

            let x = h[idx(nn, nn)];
            if l == nn {
                eigs.push((x + t_shift, T::zero()));
                nn -= 1;
                break;
            }
            let y = h[idx(nn - 1, nn - 1)];
            let w = h[idx(nn, nn - 1)] * h[idx(nn - 1, nn)];
            if l == nn - 1 {
                let half = cast::<T>(0.5);
                let p = half * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x_sh = x + t_shift;
                if q >= T::zero() {
                    let z = p + sign_of(z, p);
                    let first = x_sh + z;
                    let second = if z != T::zero() { x_sh - w / z } else { first };
                    eigs.push((first, T::zero()));
                    eigs.push((second, T::zero()));
                } else {
                    eigs.push((x_sh + p, z));
                    eigs.push((x_sh + p, -z));
                }
                nn -= 2;
                break;
            }

            // Double-shift QR step on rows l..=nn.
            if its == 30 || total_steps > max_steps {
                return Err(MatOpsError::NoConvergence {
                    what: "QR eigenvalue iteration",
                    iterations: total_steps,
                    residual: h[idx(nn, nn - 1)].abs().to_f64().unwrap_or(f64::NAN),
                });
            }
            total_steps += 1;
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // Exceptional shift to break symmetric cycling.
                t_shift += x;
                for i in 0..=nn {
                    h[idx(i, i)] -= x;
                }
                let s = h[idx(nn, nn - 1)].abs() + h[idx(nn - 1, nn - 2)].abs();
                x = cast::<T>(0.75) * s;
                y = x;
                w = cast::<T>(-0.4375) * s * s;
            }
            its += 1;

            // Find two consecutive small subdiagonals starting the bulge.
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[idx(m + 1, m)] + h[idx(m, m + 1)];
                q = h[idx(m + 1, m + 1)] - z - rr - ss;
                r = h[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (h[idx(m - 1, m - 1)].abs() + z.abs() + h[idx(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            let mut i = m + 2;
            while i <= nn {
                h[idx(i, i - 2)] = T::zero();
                if i != m + 2 {
                    h[idx(i, i - 3)] = T::zero();
                }
                i += 1;
            }

            // Chase the bulge down the band.
            let mut k = m;
            while k <= nn - 1 {
                if k != m {
                    p = h[idx(k, k - 1)];
                    q = h[idx(k + 1, k - 1)];
                    r = if k != nn - 1 {
                        h[idx(k + 2, k - 1)]
                    } else {
                        T::zero()
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign_of((p * p + q * q + r * r).sqrt(), p);
                if s != T::zero() {
                    if k == m {
                        if l != m {
                            h[idx(k, k - 1)] = -h[idx(k, k - 1)];
                        }
                    } else {
                        h[idx(k, k - 1)] = -s * x;
                    }
                    p += s;
                    let xr = p / s;
                    let yr = q / s;
                    let zr = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = h[idx(k, j)] + q * h[idx(k + 1, j)];
                        if k != nn - 1 {
                            pp += r * h[idx(k + 2, j)];
                            let delta = pp * zr;
                            h[idx(k + 2, j)] -= delta;
                        }
                        let d1 = pp * yr;
                        h[idx(k + 1, j)] -= d1;
                        let d0 = pp * xr;
                        h[idx(k, j)] -= d0;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = xr * h[idx(i, k)] + yr * h[idx(i, k + 1)];
                        if k != nn - 1 {
                            pp += zr * h[idx(i, k + 2)];
                            let delta = pp * r;
                            h[idx(i, k + 2)] -= delta;
                        }
                        let d1 = pp * q;
                        h[idx(i, k + 1)] -= d1;
                        h[idx(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    debug_assert_eq!(eigs.len(), n);
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_real(mut eigs: Vec<(f64, f64)>) -> Vec<f64> {
        for (_, im) in &eigs {
            assert!(im.abs() < 1e-10, "expected a real spectrum");
        }
        let mut re: Vec<f64> = eigs.drain(..).map(|(r, _)| r).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        re
    }

    /// Cyclic Jacobi iteration, the independent oracle for symmetric spectra.
    fn jacobi_eigenvalues(a: &Matrix<f64>) -> Vec<f64> {
        let n = a.rows();
        let mut m = a.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if m[(p, q)].abs() < 1e-15 {
                        continue;
                    }
                    let theta = 0.5 * (m[(q, q)] - m[(p, p)]) / m[(p, q)];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d
    }

    #[test]
    fn triangular_spectrum_is_the_diagonal() {
        let a = Matrix::from_rows(&[
            vec![3.0, 1.0, -2.0],
            vec![0.0, -1.0, 0.5],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap();
        let eigs = sorted_real(eigenvalues(&a).unwrap());
        assert!((eigs[0] + 1.0).abs() < 1e-12);
        assert!((eigs[1] - 2.0).abs() < 1e-12);
        assert!((eigs[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_generator_has_pure_imaginary_pair() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let mut eigs = eigenvalues(&a).unwrap();
        eigs.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
        assert!(eigs[0].0.abs() < 1e-12 && (eigs[0].1 + 1.0).abs() < 1e-12);
        assert!(eigs[1].0.abs() < 1e-12 && (eigs[1].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn companion_matrix_mixed_spectrum() {
        // Companion of (x^2 + 1)(x - 2): eigenvalues 2, i, -i.
        let a = Matrix::<f64>::from_rows(&[
            vec![0.0, 0.0, 2.0],
            vec![1.0, 0.0, -1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let mut eigs = eigenvalues(&a).unwrap();
        eigs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        assert!((eigs[0].0).abs() < 1e-10 && (eigs[0].1.abs() - 1.0).abs() < 1e-10);
        assert!((eigs[1].0).abs() < 1e-10 && (eigs[1].1.abs() - 1.0).abs() < 1e-10);
        assert!((eigs[2].0 - 2.0).abs() < 1e-10 && eigs[2].1.abs() < 1e-10);
        assert!((eigs[0].1 + eigs[1].1).abs() < 1e-12, "conjugate pair");
    }

    #[test]
    fn repeated_eigenvalue_defective_matrix() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let eigs = sorted_real(eigenvalues(&a).unwrap());
        assert!((eigs[0] - 1.0).abs() < 1e-7);
        assert!((eigs[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn path_graph_laplacian_spectrum() {
        // Path on 4 nodes: eigenvalues 0, 2 - sqrt(2), 2, 2 + sqrt(2).
        let l = Matrix::from_rows(&[
            vec![1.0, -1.0, 0.0, 0.0],
            vec![-1.0, 2.0, -1.0, 0.0],
            vec![0.0, -1.0, 2.0, -1.0],
            vec![0.0, 0.0, -1.0, 1.0],
        ])
        .unwrap();
        let eigs = sorted_real(eigenvalues(&l).unwrap());
        let expected = [0.0, 2.0 - 2.0_f64.sqrt(), 2.0, 2.0 + 2.0_f64.sqrt()];
        for (got, want) in eigs.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
        }
    }

    #[test]
    fn agrees_with_jacobi_on_symmetric_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in [2usize, 3, 5, 8] {
            let mut a = Matrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.random_range(-2.0..2.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            let got = sorted_real(eigenvalues(&a).unwrap());
            let want = jacobi_eigenvalues(&a);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "n={n}: got {g}, want {w}");
            }
        }
    }

    #[test]
    fn zero_matrix_spectrum() {
        let eigs = eigenvalues(&Matrix::<f64>::zeros(4, 4)).unwrap();
        assert_eq!(eigs.len(), 4);
        assert!(eigs.iter().all(|&(re, im)| re == 0.0 && im == 0.0));
    }
}
