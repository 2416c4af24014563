//! Small dense linear algebra on row-major `Vec<f64>` matrices.

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`
/// if a non-positive pivot appears.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            for k in 0..j {
                sum -= ri[k] * rj[k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with diagonal jitter escalation: none, then `1e-10`, growing ×10
/// up to `1e-4`. Returns the factor and the jitter that was needed.
pub fn cholesky_with_jitter(a: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    if let Some(l) = cholesky(a, n) {
        return Some((l, 0.0));
    }
    let mut jitter = 1e-10;
    let mut work = a.to_vec();
    while jitter <= 1e-4 * (1.0 + 1e-9) {
        for i in 0..n {
            work[i * n + i] = a[i * n + i] + jitter;
        }
        if let Some(l) = cholesky(&work, n) {
            return Some((l, jitter));
        }
        jitter *= 10.0;
    }
    None
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let mut sum = b[i];
        for (k, lik) in row.iter().enumerate() {
            sum -= lik * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
}

/// Solves `(L Lᵀ) x = b` in place.
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    forward_solve(l, n, b);
    backward_solve(l, n, b);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        let mut x = [1.0, 2.0, 3.0];
        cholesky_solve(&l, 3, &mut x);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((ax - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&a, 2).is_none());
        let (_, jitter) = cholesky_with_jitter(&a, 2).unwrap();
        assert!(jitter >= 1e-10 && jitter <= 1e-4);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_with_jitter(&a, 2).is_none());
    }
}
