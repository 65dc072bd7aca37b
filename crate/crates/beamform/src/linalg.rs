//! Small dense complex linear algebra on row-major `P × P` matrices.

use num_complex::Complex64;

pub fn matvec(a: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n).map(|r| (0..n).map(|c| a[r * n + c] * x[c]).sum()).collect()
}

/// `x^H y`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `x^H A x` (real for Hermitian `A`).
pub fn quadratic_form(a: &[Complex64], x: &[Complex64]) -> f64 {
    inner(x, &matvec(a, x)).re
}

pub fn trace(a: &[Complex64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i].re).sum()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot vanishes.
pub fn solve(a: &[Complex64], b: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].norm().total_cmp(&m[j * n + col].norm()))?;
        if m[pivot * n + col].norm() <= scale * 1e-300 || m[pivot * n + col].norm() == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let inv = m[col * n + col].inv();
        for r in col + 1..n {
            let factor = m[r * n + col] * inv;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = m[col * n + k];
                m[r * n + k] -= factor * v;
            }
            let v = x[col];
            x[r] -= factor * v;
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for k in r + 1..n {
            acc -= m[r * n + k] * x[k];
        }
        x[r] = acc / m[r * n + r];
    }
    Some(x)
}

pub const POWER_ITERATIONS: usize = 200;
pub const POWER_TOLERANCE: f64 = 1e-10;

/// Rotates `v` so that component `reference` is real and non-negative.
pub fn rotate_phase(v: &mut [Complex64], reference: usize) {
    let r = v[reference];
    if r.norm() > 0.0 {
        let phase = r.conj() / r.norm();
        v.iter_mut().for_each(|x| *x *= phase);
        v[reference] = Complex64::new(r.norm(), 0.0);
    }
}

/// Principal eigenvector of a Hermitian PSD matrix by power iteration,
/// unit norm, phase-rotated so component 0 is real non-negative. Starts
/// from the column with the largest diagonal entry (lowest index on ties),
/// so `A = I` yields `e₀`. Returns `None` for the zero matrix.
pub fn principal_eigenvector(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let start = (0..n).fold(0, |best, i| if a[i * n + i].re > a[best * n + best].re { i } else { best });
    let mut v: Vec<Complex64> = (0..n).map(|r| a[r * n + start]).collect();
    let nv = norm(&v);
    if !(nv > 0.0) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    rotate_phase(&mut v, 0);
    for _ in 0..POWER_ITERATIONS {
        let mut next = matvec(a, &v);
        let nn = norm(&next);
        if !(nn > 0.0) {
            return None;
        }
        next.iter_mut().for_each(|x| *x /= nn);
        rotate_phase(&mut next, 0);
        let delta = next.iter().zip(&v).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        v = next;
        if delta < POWER_TOLERANCE {
            break;
        }
    }
    Some(v)
}

/// Lower-triangular `L` with `A = L L^H` for Hermitian positive definite
/// `A`. `None` if a pivot is not positive.
pub fn cholesky(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut acc = a[i * n + j];
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = acc / ljj;
        }
    }
    Some(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitute(l: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = b.len();
    let mut y = b.to_vec();
    for r in 0..n {
        let mut acc = y[r];
        for k in 0..r {
            acc -= l[r * n + k] * y[k];
        }
        y[r] = acc / l[r * n + r];
    }
    y
}

/// Principal generalised eigenvector direction of `(A, B)` mapped back to
/// the signal space: with `B = L L^H`, the principal eigenvector `v` of
/// `L⁻¹ A L⁻ᴴ` is returned as `L v`, phase-rotated so component 0 is real
/// non-negative. Components of `A` proportional to `B` do not change the
/// result. `None` if `B` is not positive definite or `A` whitens to zero.
pub fn whitened_principal_vector(a: &[Complex64], b: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let l = cholesky(b, n)?;
    let column = |m: &[Complex64], c: usize| (0..n).map(|r| m[r * n + c]).collect::<Vec<_>>();
    // Y = L⁻¹ A, then W = L⁻¹ Y^H = L⁻¹ A L⁻ᴴ.
    let mut y = vec![Complex64::new(0.0, 0.0); n * n];
    for c in 0..n {
        for (r, v) in forward_substitute(&l, &column(a, c)).into_iter().enumerate() {
            y[r * n + c] = v;
        }
    }
    let mut w = vec![Complex64::new(0.0, 0.0); n * n];
    for c in 0..n {
        let yh: Vec<Complex64> = (0..n).map(|k| y[c * n + k].conj()).collect();
        for (r, v) in forward_substitute(&l, &yh).into_iter().enumerate() {
            w[r * n + c] = v;
        }
    }
    for r in 0..n {
        for c in r..n {
            let avg = (w[r * n + c] + w[c * n + r].conj()) * 0.5;
            w[r * n + c] = avg;
            w[c * n + r] = avg.conj();
        }
    }
    let v = principal_eigenvector(&w, n)?;
    let mut out = matvec(&l, &v);
    if !(norm(&out) > 0.0) {
        return None;
    }
    rotate_phase(&mut out, 0);
    Some(out)
}
