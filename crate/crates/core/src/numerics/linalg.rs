//! Hermitian Cholesky factorization and eigendecomposition.

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;

use crate::error::{domain, Error, Result};

pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Upper-triangular K with H = K†K.
pub fn cholesky_hermitian<T: RealField + Copy>(h: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = h.nrows();
    if h.ncols() != n {
        return domain("matrix must be square");
    }
    let mut k = CMatrix::<T>::zeros(n, n);
    for i in 0..n {
        let mut diag = h[(i, i)].re;
        for p in 0..i {
            diag -= k[(p, i)].norm_sqr();
        }
        if !(diag > T::zero()) {
            return Err(Error::Factorization {
                pivot: i,
                value: nalgebra::try_convert::<T, f64>(diag).unwrap_or(f64::NAN),
            });
        }
        let kii = diag.sqrt();
        k[(i, i)] = Complex::new(kii, T::zero());
        for j in i + 1..n {
            let mut s = h[(i, j)];
            for p in 0..i {
                s -= k[(p, i)].conj() * k[(p, j)];
            }
            k[(i, j)] = s / kii;
        }
    }
    Ok(k)
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
pub fn eigh<T: RealField + Copy>(h: &CMatrix<T>) -> Result<(DVector<T>, CMatrix<T>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return domain("matrix must be square");
    }
    // Symmetrize to remove round-off asymmetry before the solver.
    let half = T::one() / (T::one() + T::one());
    let hs = (h + h.adjoint()).map(|z| z * Complex::new(half, T::zero()));
    let eig = hs.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMatrix::<T>::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// Frobenius norm.
pub fn fro<T: RealField + Copy>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    }

    fn random_hermitian(n: usize, seed: u64, shift: f64) -> CMatrix<f64> {
        let mut s = seed;
        let a = CMatrix::<f64>::from_fn(n, n, |_, _| Complex::new(lcg(&mut s), lcg(&mut s)));
        let mut h = &a * a.adjoint();
        for i in 0..n {
            h[(i, i)] += Complex::new(shift, 0.0);
        }
        h
    }

    #[test]
    fn cholesky_trivial_cases() {
        let id = CMatrix::<f64>::identity(3, 3);
        assert_eq!(cholesky_hermitian(&id).unwrap(), id);
        let d = CMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![Complex::new(4.0, 0.0), Complex::new(9.0, 0.0)]));
        let k = cholesky_hermitian(&d).unwrap();
        assert!((k[(0, 0)].re - 2.0).abs() < 1e-15 && (k[(1, 1)].re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn cholesky_reconstruction() {
        let h = random_hermitian(8, 7, 0.1);
        let k = cholesky_hermitian(&h).unwrap();
        let r = fro(&(k.adjoint() * &k - &h));
        assert!(r < 1e-10 * fro(&h));
        for i in 0..8 {
            for j in 0..i {
                assert_eq!(k[(i, j)], Complex::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn cholesky_reports_pivot() {
        let mut h = CMatrix::<f64>::identity(3, 3);
        h[(2, 2)] = Complex::new(-1.0, 0.0);
        assert!(matches!(cholesky_hermitian(&h), Err(Error::Factorization { pivot: 2, .. })));
    }

    #[test]
    fn eigh_residuals() {
        let h = random_hermitian(16, 3, -1.0);
        let (vals, u) = eigh(&h).unwrap();
        for i in 1..16 {
            assert!(vals[i] >= vals[i - 1]);
        }
        let lam = CMatrix::<f64>::from_diagonal(&vals.map(|v| Complex::new(v, 0.0)));
        let norm = fro(&h);
        assert!(fro(&(&h * &u - &u * lam)) < 1e-10 * norm);
        assert!(fro(&(u.adjoint() * &u - CMatrix::<f64>::identity(16, 16))) < 1e-10);
    }

    #[test]
    fn eigh_sorts_diagonal() {
        let d = CMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![
            Complex::new(3.0, 0.0),
            Complex::new(1.0, 0.0),
            Complex::new(2.0, 0.0),
        ]));
        let (vals, _) = eigh(&d).unwrap();
        assert_eq!(vals.as_slice(), &[1.0, 2.0, 3.0]);
        let (vals, _) = eigh(&CMatrix::<f64>::identity(4, 4)).unwrap();
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }
}
