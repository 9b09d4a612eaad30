//! Modified Bessel functions of the second kind, orders 0 and 1.
//!
//! Power series for x ≤ 2, Steed/Temme continued fraction above.

use super::Real;
use crate::error::{domain, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn bessel_k0<T: Real>(x: T) -> Result<T> {
    Ok(k0_k1(x)?.0)
}

pub fn bessel_k1<T: Real>(x: T) -> Result<T> {
    Ok(k0_k1(x)?.1)
}

/// Both K0(x) and K1(x).
pub fn k0_k1<T: Real>(x: T) -> Result<(T, T)> {
    if !(x > T::zero()) {
        return domain("modified Bessel K requires x > 0");
    }
    if x <= T::c(2.0) {
        Ok(series(x))
    } else {
        Ok(continued_fraction(x))
    }
}

fn series<T: Real>(x: T) -> (T, T) {
    let eps = T::epsilon();
    let half = T::c(0.5);
    let q = x * x * T::c(0.25);
    let lg = (x * half).ln();
    let g = T::c(EULER_GAMMA);

    // term_k = q^k/(k!)^2, harmonic H_k
    let mut term = T::one();
    let mut harmonic = T::zero();
    let mut i0 = T::one();
    let mut k0_tail = T::zero();
    // K1 pieces: I1 = (x/2) Σ q^k/(k!(k+1)!), Σ (ψ(k+1)+ψ(k+2)) q^k/(k!(k+1)!)
    let mut t1 = T::one();
    let mut i1s = T::one();
    let mut psi_sum = -g - g + T::one();
    let mut k1_tail = psi_sum;
    for k in 1..200 {
        let kf = T::from_usize(k).unwrap();
        term = term * q / (kf * kf);
        harmonic = harmonic + T::one() / kf;
        i0 = i0 + term;
        k0_tail = k0_tail + term * harmonic;

        t1 = t1 * q / (kf * (kf + T::one()));
        i1s = i1s + t1;
        // ψ(k+1) + ψ(k+2) = −2γ + 2H_k + 1/(k+1)
        psi_sum = -g - g + harmonic + harmonic + T::one() / (kf + T::one());
        k1_tail = k1_tail + psi_sum * t1;
        if term < eps * i0 && t1 < eps * i1s {
            break;
        }
    }
    let k0 = -(lg + g) * i0 + k0_tail;
    let i1 = x * half * i1s;
    let k1 = T::one() / x + lg * i1 - x * T::c(0.25) * k1_tail;
    (k0, k1)
}

fn continued_fraction<T: Real>(x: T) -> (T, T) {
    let one = T::one();
    let two = T::c(2.0);
    let eps = T::epsilon();
    let mut b = two * (one + x);
    let mut d = one / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = one;
    let a1 = T::c(0.25);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 1..10_000 {
        let fi = T::from_usize(i).unwrap();
        a = a - two * fi;
        c = -a * c / (fi + one);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q = q + c * qnew;
        b = b + two;
        d = one / (b + a * d);
        delh = (b * d - one) * delh;
        h = h + delh;
        let dels = q * delh;
        s = s + dels;
        if (dels / s).abs() < eps {
            break;
        }
    }
    let k0 = (T::PI() / (two * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + T::c(0.5) - a1 * h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt by a fine trapezoid rule,
    /// which converges geometrically for this analytic integrand.
    fn oracle(nu: f64, x: f64) -> f64 {
        let h = 1e-3;
        let mut s = 0.5 * (-x).exp();
        let mut t: f64 = h;
        loop {
            let v = (-x * t.cosh()).exp() * (nu * t).cosh();
            s += v;
            if v < 1e-300 || t > 40.0 {
                break;
            }
            t += h;
        }
        s * h
    }

    #[test]
    fn values_at_one() {
        let (k0, k1) = k0_k1(1.0f64).unwrap();
        assert!((k0 - 0.421_024_438_240_708_3).abs() < 1e-14);
        assert!((k1 - 0.601_907_230_197_234_6).abs() < 1e-14);
    }

    #[test]
    fn against_integral_oracle() {
        for &x in &[1e-3, 0.05, 0.5, 1.0, 1.9, 2.0, 2.1, 3.0, 7.5, 20.0, 60.0] {
            let (k0, k1) = k0_k1(x).unwrap();
            let (o0, o1) = (oracle(0.0, x), oracle(1.0, x));
            assert!((k0 - o0).abs() < 1e-11 * o0, "K0({x}) {k0} vs {o0}");
            assert!((k1 - o1).abs() < 1e-11 * o1, "K1({x}) {k1} vs {o1}");
        }
    }

    #[test]
    fn limits_and_monotonicity() {
        let x: f64 = 1e-6;
        let (k0, k1) = k0_k1(x).unwrap();
        assert!((k0 + (x / 2.0).ln() + EULER_GAMMA).abs() < 1e-9);
        assert!((x * k1 - 1.0).abs() < 1e-9);
        assert!(bessel_k0(0.01).unwrap() > bessel_k0(0.02).unwrap());
        assert!(bessel_k0(700.0f64).unwrap() < 1e-300);
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
    }

    #[test]
    fn derivative_identity() {
        for &x in &[0.5f64, 1.0, 2.0] {
            let h = 1e-5;
            let d = (bessel_k0(x + h).unwrap() - bessel_k0(x - h).unwrap()) / (2.0 * h);
            assert!((d + bessel_k1(x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn wronskian_consistency() {
        // K0 K1' − K0' K1 with K0' = −K1 and K1' = −K0 − K1/x equals −K0² − K0K1/x + K1².
        // Check the identity against central differences of both functions.
        let mut x: f64 = 0.1;
        while x <= 10.0 {
            let h = 1e-5 * x;
            let (k0, k1) = k0_k1(x).unwrap();
            let (a0, a1) = k0_k1(x + h).unwrap();
            let (b0, b1) = k0_k1(x - h).unwrap();
            let d0 = (a0 - b0) / (2.0 * h);
            let d1 = (a1 - b1) / (2.0 * h);
            let numeric = k0 * d1 - d0 * k1;
            let analytic = k0 * (-k0 - k1 / x) + k1 * k1;
            assert!((numeric - analytic).abs() < 1e-8 * (1.0 + analytic.abs()), "x={x}");
            x *= 1.3;
        }
    }

    #[test]
    fn single_precision() {
        let (k0, k1) = k0_k1(1.0f32).unwrap();
        assert!((k0 - 0.421_024_44).abs() < 1e-6);
        assert!((k1 - 0.601_907_2).abs() < 1e-6);
        let (k0, _) = k0_k1(5.0f32).unwrap();
        assert!((k0 as f64 - oracle(0.0, 5.0)).abs() < 1e-6 * oracle(0.0, 5.0) * 10.0);
    }
}
