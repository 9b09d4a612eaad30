//! Two-qubit entanglement measures. Basis index is 2·q1 + q2.

use nalgebra::Matrix3;

use super::CMat;
use crate::numerics::linalg::eigh;
use crate::C64;

fn pauli() -> [[[C64; 2]; 2]; 3] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [[[z, o], [o, z]], [[z, -i], [i, z]], [[o, z], [z, -o]]]
}

/// Sum of |negative eigenvalues| of the partial transpose over qubit 2.
pub fn negativity(rho4: &CMat) -> f64 {
    let pt = CMat::from_fn(4, 4, |r, c| {
        let (a, b) = (r / 2, r % 2);
        let (cc, d) = (c / 2, c % 2);
        rho4[(2 * a + d, 2 * cc + b)]
    });
    match eigh(&pt) {
        Ok((vals, _)) => vals.iter().filter(|&&v| v < 0.0).map(|v| -v).sum(),
        Err(_) => f64::NAN,
    }
}

/// Negativity over the Bell-state value 1/2.
pub fn negativity_normalized(rho4: &CMat) -> f64 {
    2.0 * negativity(rho4)
}

/// max[0, M − 1] with M the sum of the two largest eigenvalues of TᵀT.
pub fn chsh_violation(rho4: &CMat) -> f64 {
    let s = pauli();
    let t = Matrix3::from_fn(|i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..4 {
            for c in 0..4 {
                let op = s[i][r / 2][c / 2] * s[j][r % 2][c % 2];
                acc += rho4[(c, r)] * op;
            }
        }
        acc.re
    });
    let u = t.transpose() * t;
    let mut h: Vec<f64> = u.symmetric_eigen().eigenvalues.iter().copied().collect();
    h.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    (h[0] + h[1] - 1.0).max(0.0)
}

/// ⟨ψ|ρ|ψ⟩.
pub fn fidelity_to_target(rho4: &CMat, psi: &[C64; 4]) -> f64 {
    let mut f = C64::new(0.0, 0.0);
    for r in 0..4 {
        for c in 0..4 {
            f += psi[r].conj() * rho4[(r, c)] * psi[c];
        }
    }
    f.re
}

/// max over φ of the overlap with (|a⟩ + e^{iφ}|b⟩)/√2.
pub fn phase_max_fidelity(rho4: &CMat, a: usize, b: usize) -> f64 {
    0.5 * (rho4[(a, a)].re + rho4[(b, b)].re) + rho4[(a, b)].norm()
}
