//! Bosonic Bogoliubov transformations: closed-form 2×2, Colpa's
//! Cholesky-based paraunitary diagonalization, and first-order perturbation.
//!
//! Convention: α = T β with [α; α*] = T [β; β*] and
//! T = [[T^pp, (T^np)*], [T^np, (T^pp)*]].

use nalgebra::RealField;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky_hermitian, eigh, fro, CMatrix};

fn re<T: RealField + Copy>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

fn tf<T: RealField + Copy>(x: f64) -> T {
    nalgebra::convert(x)
}

fn to_f64<T: RealField + Copy>(x: T) -> f64 {
    nalgebra::try_convert(x).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovFactors<T> {
    pub omega: T,
    pub lambda: T,
    pub mu: Complex<T>,
}

/// Closed-form diagonalization of a·α†α + (b/2)α†α† + (b*/2)αα.
pub fn bogoliubov_2x2<T: RealField + Copy>(a: T, b: Complex<T>) -> Result<BogoliubovFactors<T>> {
    let bn = b.norm_sqr().sqrt();
    if !(a > bn) {
        return Err(Error::Instability(format!("a = {} ≤ |b| = {}", to_f64(a), to_f64(bn))));
    }
    let omega = ((a - bn) * (a + bn)).sqrt();
    let two = tf::<T>(2.0);
    let lambda = ((a + omega) / (two * omega)).sqrt();
    let mag = ((a - omega) / (two * omega)).sqrt();
    let mu = if bn == T::zero() { Complex::new(T::zero(), T::zero()) } else { b.unscale(bn).scale(mag) };
    Ok(BogoliubovFactors { omega, lambda, mu })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBosonForm<T: RealField + Copy> {
    pub a: CMatrix<T>,
    pub b: CMatrix<T>,
    pub labels: Vec<String>,
}

impl<T: RealField + Copy> QuadraticBosonForm<T> {
    pub fn new(a: CMatrix<T>, b: CMatrix<T>, labels: Vec<String>) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m || b.nrows() != m || b.ncols() != m || labels.len() != m {
            return Err(Error::Domain("inconsistent block shapes".into()));
        }
        let tol = tf::<T>(1e-12);
        let scale = fro(&a).max(fro(&b)).max(T::min_value().unwrap_or(T::zero()));
        if fro(&(&a - a.adjoint())) > tol * scale {
            return Err(Error::Domain("A block is not Hermitian".into()));
        }
        if fro(&(&b - b.transpose())) > tol * scale {
            return Err(Error::Domain("B block is not symmetric".into()));
        }
        Ok(Self { a, b, labels })
    }

    pub fn modes(&self) -> usize {
        self.a.nrows()
    }

    /// The 2M×2M matrix [[A, B], [B*, A*]].
    pub fn full(&self) -> CMatrix<T> {
        let m = self.modes();
        let mut h = CMatrix::<T>::zeros(2 * m, 2 * m);
        h.view_mut((0, 0), (m, m)).copy_from(&self.a);
        h.view_mut((0, m), (m, m)).copy_from(&self.b);
        h.view_mut((m, 0), (m, m)).copy_from(&self.b.map(|z| z.conj()));
        h.view_mut((m, m), (m, m)).copy_from(&self.a.map(|z| z.conj()));
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParaunitaryDecomposition<T: RealField + Copy> {
    pub t: CMatrix<T>,
    /// Normal-mode energies, ascending.
    pub energies: Vec<T>,
    /// Basis index carrying the largest weight in each normal mode.
    pub dominant: Vec<usize>,
    pub degenerate: bool,
    pub residual: T,
}

impl<T: RealField + Copy> ParaunitaryDecomposition<T> {
    pub fn modes(&self) -> usize {
        self.energies.len()
    }
    /// T^pp_{qβ}.
    pub fn tpp(&self, q: usize, beta: usize) -> Complex<T> {
        self.t[(q, beta)]
    }
    /// T^np_{qβ}.
    pub fn tnp(&self, q: usize, beta: usize) -> Complex<T> {
        self.t[(q + self.modes(), beta)]
    }
    /// Normal mode whose dominant basis index is `label`.
    pub fn mode_for_label(&self, label: usize) -> Option<usize> {
        self.dominant.iter().position(|&d| d == label)
    }
}

pub fn sigma3<T: RealField + Copy>(m: usize) -> CMatrix<T> {
    CMatrix::<T>::from_fn(2 * m, 2 * m, |i, j| {
        if i != j {
            re(T::zero())
        } else if i < m {
            re(T::one())
        } else {
            re(-T::one())
        }
    })
}

/// Colpa's algorithm: Ĥ = K†K, W = Kσ₃K†, U†WU = diag(E, −E),
/// T = K⁻¹U·diag(√E, √E), then symmetrized from its first M columns.
pub fn colpa_diagonalize<T: RealField + Copy>(form: &QuadraticBosonForm<T>) -> Result<ParaunitaryDecomposition<T>> {
    let m = form.modes();
    let h = form.full();
    let hnorm = fro(&h);
    let (hvals, _) = eigh(&h)?;
    if hvals[0] < tf::<T>(1e-10) * hnorm {
        return Err(Error::Instability(format!(
            "smallest eigenvalue {:e} of the quadratic form is below the definiteness margin",
            to_f64(hvals[0])
        )));
    }
    let k = cholesky_hermitian(&h).map_err(|e| Error::Instability(e.to_string()))?;
    let s3 = sigma3::<T>(m);
    let w = &k * &s3 * k.adjoint();
    let (wvals, u) = eigh(&w)?;
    // Positive eigenvalues occupy the upper half of the ascending list.
    let energies: Vec<T> = (0..m).map(|i| wvals[m + i]).collect();
    if energies.iter().any(|e| !(*e > T::zero())) || (0..m).any(|i| !(wvals[i] < T::zero())) {
        return Err(Error::Instability("W spectrum does not split into ±E pairs".into()));
    }
    let kinv = k
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Instability("Cholesky factor not invertible".into()))?;
    let mut first = CMatrix::<T>::zeros(2 * m, m);
    for j in 0..m {
        let col = &kinv * u.column(m + j) * re(energies[j].sqrt());
        first.set_column(j, &col);
    }
    // Phase convention: largest-magnitude entry of each column real positive.
    for j in 0..m {
        let mut best = 0;
        let mut bmag = T::zero();
        for i in 0..2 * m {
            let v = first[(i, j)].norm_sqr().sqrt();
            if v > bmag * (T::one() + tf::<T>(1e-12)) {
                bmag = v;
                best = i;
            }
        }
        if bmag > T::zero() {
            let ph = first[(best, j)].conj().unscale(bmag);
            for i in 0..2 * m {
                first[(i, j)] *= ph;
            }
        }
    }
    let mut t = CMatrix::<T>::zeros(2 * m, 2 * m);
    for j in 0..m {
        for q in 0..m {
            let pp = first[(q, j)];
            let np = first[(q + m, j)];
            t[(q, j)] = pp;
            t[(q + m, j)] = np;
            t[(q, j + m)] = np.conj();
            t[(q + m, j + m)] = pp.conj();
        }
    }
    let dominant = (0..m)
        .map(|j| {
            let mut best = 0;
            let mut bw = -T::one();
            for q in 0..m {
                let wgt = t[(q, j)].norm_sqr() + t[(q + m, j)].norm_sqr();
                if wgt > bw {
                    bw = wgt;
                    best = q;
                }
            }
            best
        })
        .collect();
    let mean = energies.iter().fold(T::zero(), |s, e| s + *e) / tf::<T>(m as f64);
    let degenerate = energies.windows(2).any(|w| (w[1] - w[0]).abs() < tf::<T>(1e-9) * mean);
    let mut lam = CMatrix::<T>::zeros(2 * m, 2 * m);
    for i in 0..m {
        lam[(i, i)] = re(energies[i]);
        lam[(i + m, i + m)] = re(energies[i]);
    }
    let r1 = fro(&(t.adjoint() * &s3 * &t - &s3));
    let r2 = fro(&(t.adjoint() * &h * &t - lam)) / hnorm;
    Ok(ParaunitaryDecomposition { t, energies, dominant, degenerate, residual: r1.max(r2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LMatrixMode {
    Exact,
    /// Drop the particle–hole (off-block-diagonal) sector of L.
    BlockDiagonal,
}

/// First-order update of a paraunitary decomposition under Ĥ → Ĥ + V.
///
/// Returns Λ₁ = diag(T₀†VT₀) over all 2M entries and the first-order
/// correction T₁ = T₀L.
pub fn perturb_paraunitary<T: RealField + Copy>(
    t0: &ParaunitaryDecomposition<T>,
    v: &CMatrix<T>,
    mode: LMatrixMode,
) -> Result<(Vec<T>, CMatrix<T>)> {
    let m = t0.modes();
    if v.nrows() != 2 * m || v.ncols() != 2 * m {
        return Err(Error::Domain("perturbation has wrong shape".into()));
    }
    let mean = t0.energies.iter().fold(T::zero(), |s, e| s + *e) / tf::<T>(m as f64);
    if t0.energies.windows(2).any(|w| (w[1] - w[0]).abs() < tf::<T>(1e-6) * mean) {
        return Err(Error::Degenerate(
            "unperturbed energies are degenerate; degenerate perturbation theory is not supported".into(),
        ));
    }
    let vp = t0.t.adjoint() * v * &t0.t;
    let lambda1: Vec<T> = (0..2 * m).map(|i| vp[(i, i)].re).collect();
    let sl = |i: usize| if i < m { t0.energies[i] } else { -t0.energies[i - m] };
    let sign = |i: usize| if i < m { T::one() } else { -T::one() };
    let mut l = CMatrix::<T>::zeros(2 * m, 2 * m);
    for i in 0..2 * m {
        for j in 0..2 * m {
            if i == j || (mode == LMatrixMode::BlockDiagonal && (i < m) != (j < m)) {
                continue;
            }
            l[(i, j)] = -vp[(i, j)] * re(sign(i) / (sl(i) - sl(j)));
        }
    }
    Ok((lambda1, &t0.t * l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type F = QuadraticBosonForm<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    }

    fn random_form(m: usize, seed: u64) -> F {
        let mut s = seed;
        let mut a = CMatrix::<f64>::from_fn(m, m, |_, _| c(lcg(&mut s), lcg(&mut s)));
        a = (&a + a.adjoint()) * c(0.5, 0.0);
        for i in 0..m {
            a[(i, i)] += c(4.0 + i as f64, 0.0);
        }
        let mut b = CMatrix::<f64>::from_fn(m, m, |_, _| c(lcg(&mut s), lcg(&mut s)));
        b = (&b + b.transpose()) * c(0.5, 0.0);
        F::new(a, b, (0..m).map(|i| i.to_string()).collect()).unwrap()
    }

    /// Direct 2×2 oracle: eigenvalues of σ₃H are ±ω.
    fn symplectic_eigs(a: f64, b: f64) -> f64 {
        // σ₃H = [[a, b], [−b, −a]]: eigenvalues ±√(a² − b²).
        let tr = 0.0;
        let det = -a * a + b * b;
        ((tr * tr / 4.0) - det).sqrt()
    }

    #[test]
    fn bogoliubov_cases() {
        let f = bogoliubov_2x2(1.0, c(0.0, 0.0)).unwrap();
        assert_eq!((f.omega, f.lambda, f.mu), (1.0, 1.0, c(0.0, 0.0)));
        let f = bogoliubov_2x2(2.0, c(1.0, 0.0)).unwrap();
        assert!((f.omega - symplectic_eigs(2.0, 1.0)).abs() < 1e-12);
        assert!((f.lambda.powi(2) - f.mu.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((f.lambda.powi(2) + f.mu.norm_sqr() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(matches!(bogoliubov_2x2(1.0, c(1.0, 0.0)), Err(Error::Instability(_))));
    }

    #[test]
    fn colpa_diagonal_form_is_identity() {
        let a = CMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)]));
        let f = F::new(a, CMatrix::zeros(2, 2), vec!["a".into(), "b".into()]).unwrap();
        let d = colpa_diagonalize(&f).unwrap();
        assert!((d.energies[0] - 1.0).abs() < 1e-12 && (d.energies[1] - 3.0).abs() < 1e-12);
        assert_eq!(d.dominant, vec![1, 0]);
        assert!((d.tpp(1, 0).re - 1.0).abs() < 1e-12 && d.tnp(1, 0).norm() < 1e-12);
    }

    #[test]
    fn colpa_matches_two_by_two() {
        let b = c(0.6, 0.8);
        let f = F::new(
            CMatrix::from_element(1, 1, c(2.0, 0.0)),
            CMatrix::from_element(1, 1, b),
            vec!["0".into()],
        )
        .unwrap();
        let d = colpa_diagonalize(&f).unwrap();
        let g = bogoliubov_2x2(2.0, b).unwrap();
        assert!((d.energies[0] - g.omega).abs() < 1e-10);
        assert!((d.tpp(0, 0).norm() - g.lambda).abs() < 1e-10);
        assert!((d.tnp(0, 0).norm() - g.mu.norm()).abs() < 1e-10);
        // With T^pp real positive, T^np = −μ*.
        assert!((d.tnp(0, 0) + g.mu.conj()).norm() < 1e-10);
    }

    #[test]
    fn colpa_random_residuals() {
        let d = colpa_diagonalize(&random_form(6, 11)).unwrap();
        assert!(d.residual < 1e-8);
        assert!(d.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn colpa_rejects_indefinite() {
        let f = F::new(
            CMatrix::from_element(1, 1, c(1.0, 0.0)),
            CMatrix::from_element(1, 1, c(1.5, 0.0)),
            vec!["0".into()],
        )
        .unwrap();
        assert!(matches!(colpa_diagonalize(&f), Err(Error::Instability(_))));
    }

    #[test]
    fn perturbation_zero_and_scaling() {
        let f = random_form(4, 5);
        let d0 = colpa_diagonalize(&f).unwrap();
        let (l1, t1) = perturb_paraunitary(&d0, &CMatrix::zeros(8, 8), LMatrixMode::Exact).unwrap();
        assert!(l1.iter().all(|v| v.abs() < 1e-15) && fro(&t1) < 1e-15);

        let mut s = 99;
        let mut va = CMatrix::<f64>::from_fn(4, 4, |_, _| c(lcg(&mut s), lcg(&mut s)));
        va = (&va + va.adjoint()) * c(0.5, 0.0);
        let mut vb = CMatrix::<f64>::from_fn(4, 4, |_, _| c(lcg(&mut s), lcg(&mut s)));
        vb = (&vb + vb.transpose()) * c(0.5, 0.0);
        let vf = F::new(va.clone(), vb.clone(), f.labels.clone()).unwrap();
        let (l1, _) = perturb_paraunitary(&d0, &vf.full(), LMatrixMode::Exact).unwrap();
        let err = |eps: f64| {
            let pf = F::new(&f.a + &va * c(eps, 0.0), &f.b + &vb * c(eps, 0.0), f.labels.clone()).unwrap();
            let d = colpa_diagonalize(&pf).unwrap();
            (0..4).map(|i| (d.energies[i] - d0.energies[i] - eps * l1[i]).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn perturbation_identity_shift_matches_finite_difference() {
        let f = random_form(3, 21);
        let d0 = colpa_diagonalize(&f).unwrap();
        let eps = 1e-6 * fro(&f.a);
        let id = CMatrix::<f64>::identity(3, 3);
        let vf = F::new(id.clone(), CMatrix::zeros(3, 3), f.labels.clone()).unwrap();
        let (l1, _) = perturb_paraunitary(&d0, &vf.full(), LMatrixMode::Exact).unwrap();
        let pf = F::new(&f.a + id * c(eps, 0.0), f.b.clone(), f.labels.clone()).unwrap();
        let d1 = colpa_diagonalize(&pf).unwrap();
        for i in 0..3 {
            let fd = (d1.energies[i] - d0.energies[i]) / eps;
            assert!((fd - l1[i]).abs() < 1e-4, "{fd} vs {}", l1[i]);
        }
    }

    #[test]
    fn first_order_eigenvector_update_keeps_paraunitarity() {
        let f = random_form(3, 8);
        let d0 = colpa_diagonalize(&f).unwrap();
        let mut s = 4;
        let mut va = CMatrix::<f64>::from_fn(3, 3, |_, _| c(lcg(&mut s), 0.0));
        va = (&va + va.transpose()) * c(0.5, 0.0);
        let vf = F::new(va, CMatrix::zeros(3, 3), f.labels.clone()).unwrap();
        for mode in [LMatrixMode::Exact, LMatrixMode::BlockDiagonal] {
            let (_, t1) = perturb_paraunitary(&d0, &vf.full(), mode).unwrap();
            let eps = 1e-4;
            let t = &d0.t + &t1 * c(eps, 0.0);
            let s3 = sigma3::<f64>(3);
            assert!(fro(&(t.adjoint() * &s3 * &t - &s3)) < 1e-6);
        }
    }

    #[test]
    fn degenerate_perturbation_rejected() {
        let a = CMatrix::<f64>::identity(2, 2);
        let f = F::new(a, CMatrix::zeros(2, 2), vec!["a".into(), "b".into()]).unwrap();
        let d = colpa_diagonalize(&f).unwrap();
        assert!(d.degenerate);
        assert!(matches!(
            perturb_paraunitary(&d, &CMatrix::zeros(4, 4), LMatrixMode::Exact),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn single_precision_bogoliubov() {
        let f = bogoliubov_2x2(2.0f32, Complex::new(1.0f32, 0.0)).unwrap();
        assert!((f.omega - 3f32.sqrt()).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn paraunitary_identities(seed in 0u64..10_000, m in 1usize..6) {
            let d = colpa_diagonalize(&random_form(m, seed)).unwrap();
            prop_assert!(d.residual < 1e-8);
            prop_assert!(d.energies.iter().all(|e| *e > 0.0));
        }

        #[test]
        fn two_by_two_agreement(a in 1.0f64..10.0, frac in 0.0f64..0.95, ph in 0.0f64..std::f64::consts::TAU) {
            let b = Complex::from_polar(frac * a, ph);
            let f = F::new(CMatrix::from_element(1, 1, c(a, 0.0)), CMatrix::from_element(1, 1, b), vec!["0".into()]).unwrap();
            let d = colpa_diagonalize(&f).unwrap();
            let g = bogoliubov_2x2(a, b).unwrap();
            prop_assert!((d.energies[0] - g.omega).abs() < 1e-10 * a);
            prop_assert!((d.tpp(0, 0).norm() - g.lambda).abs() < 1e-10 * g.lambda.max(1.0) * 10.0);
            prop_assert!((d.tnp(0, 0).norm() - g.mu.norm()).abs() < 1e-9);
        }

        #[test]
        fn spectrum_invariant_under_unitary_relabeling(seed in 0u64..10_000) {
            let f = random_form(4, seed);
            let mut s = seed ^ 0xdead_beef;
            let g = CMatrix::<f64>::from_fn(4, 4, |_, _| c(lcg(&mut s), lcg(&mut s)));
            let u = g.qr().q();
            let a2 = u.adjoint() * &f.a * &u;
            let b2 = u.adjoint() * &f.b * u.map(|z| z.conj());
            let f2 = F::new((&a2 + a2.adjoint()) * c(0.5, 0.0), (&b2 + b2.transpose()) * c(0.5, 0.0), f.labels.clone()).unwrap();
            let (d1, d2) = (colpa_diagonalize(&f).unwrap(), colpa_diagonalize(&f2).unwrap());
            for i in 0..4 {
                prop_assert!((d1.energies[i] - d2.energies[i]).abs() < 1e-9 * d1.energies[i]);
            }
        }
    }
}
