//! Geometric blocks of the truncated (00p) bar Hamiltonian, in units of ω_M.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::demag::section_averaged_demag;
use crate::numerics::quad::gauss_legendre;

/// Field-independent parts of A and B: H^XX, H^YY and the demag matrix N.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBlocks {
    pub hxx: DMatrix<f64>,
    pub hyy: DMatrix<f64>,
    pub demag: DMatrix<f64>,
}

impl GeometryBlocks {
    pub fn h00(&self) -> DMatrix<f64> {
        (&self.hxx + &self.hyy) * 0.5
    }
    pub fn h01(&self) -> DMatrix<f64> {
        (&self.hxx - &self.hyy) * 0.5
    }
}

/// Nodes and weights on [a, b], graded geometrically away from `a` and
/// capped at `cap` per panel.
pub(crate) fn graded_nodes(a: f64, b: f64, first: f64, cap: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre::<f64>(order);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    let span = b - a;
    if span <= 0.0 {
        return (xs, ws);
    }
    let mut lo = 0.0;
    while lo < span {
        let h = (0.3 * lo).max(first).min(cap).min(span - lo);
        let (c, half) = (lo + 0.5 * h, 0.5 * h);
        for (x, wt) in rule.0.iter().zip(&rule.1) {
            xs.push(a + c + half * x);
            ws.push(half * wt);
        }
        lo += h;
        if span - lo < 1e-9 * h {
            break;
        }
    }
    (xs, ws)
}

/// Mirror-graded nodes on [0, l], refined at both ends.
pub(crate) fn two_sided_nodes(l: f64, first: f64, cap: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = graded_nodes(0.0, 0.5 * l, first, cap, order);
    let mut xs = x.clone();
    let mut ws = w.clone();
    for (xi, wi) in x.iter().zip(&w).rev() {
        xs.push(l - xi);
        ws.push(*wi);
    }
    (xs, ws)
}

/// ψ_p(z) = √(2/((1+δ_p0) l)) cos(pπz/l).
pub fn basis(p: usize, l: f64, z: f64) -> f64 {
    let norm = if p == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
    norm * (p as f64 * PI * z / l).cos()
}

/// 2∫₀^L (L−u)/(4π√(c²+u²)) du.
fn transverse_kernel(len: f64, c: f64) -> f64 {
    let x = len / c;
    let core = if x < 0.05 {
        len * len / (2.0 * c) * (1.0 - x * x / 12.0 + x.powi(4) / 40.0)
    } else {
        len * x.asinh() - (c * c + len * len).sqrt() + c
    };
    2.0 * core / (4.0 * PI)
}

/// ∫₀^{l−v} ψ_p(z+v)ψ_q(z) dz.
fn shifted_overlap(p: usize, q: usize, l: f64, v: f64) -> f64 {
    let np = if p == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
    let nq = if q == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
    let a = p as f64 * PI / l;
    let len = l - v;
    let phase = a * v;
    let term = |m: i64| -> f64 {
        if m == 0 {
            len * phase.cos()
        } else {
            let c = m as f64 * PI / l;
            ((c * len + phase).sin() - phase.sin()) / c
        }
    };
    0.5 * np * nq * (term(p as i64 + q as i64) + term(p as i64 - q as i64))
}

/// Dimensionless geometry blocks for p, q = 0..=n.
pub fn assemble_geometry(d: f64, w: f64, l: f64, n: usize) -> GeometryBlocks {
    let kappa_max = (n.max(1) as f64) * PI / l;
    let cap = w.min(PI / kappa_max) / 4.0;
    let first = 1e-6 * d.min(w);
    let (v, wv) = graded_nodes(0.0, l, first, cap, 8);
    let kern = |len: f64, s: f64| -> Vec<f64> { v.iter().map(|&vi| transverse_kernel(len, s.hypot(vi))).collect() };
    // HXX pairs the x-faces (transverse extent w, separation d); HYY the y-faces.
    let kx: Vec<f64> = kern(w, 0.0).iter().zip(kern(w, d)).map(|(a, b)| a - b).collect();
    let ky: Vec<f64> = kern(d, 0.0).iter().zip(kern(d, w)).map(|(a, b)| a - b).collect();
    let (zd, wd) = two_sided_nodes(l, first, cap, 8);
    let hbar: Vec<f64> = zd.iter().map(|&z| section_averaged_demag(d, w, l, z)).collect();
    let m = n + 1;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|p| (p..m).map(move |q| (p, q))).collect();
    let vals: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(p, q)| {
            if (p + q) % 2 == 1 {
                return (0.0, 0.0, 0.0);
            }
            let (mut ix, mut iy) = (0.0, 0.0);
            for i in 0..v.len() {
                let s = shifted_overlap(p, q, l, v[i]) + shifted_overlap(q, p, l, v[i]);
                ix += wv[i] * kx[i] * s;
                iy += wv[i] * ky[i] * s;
            }
            let mut nd = 0.0;
            for i in 0..zd.len() {
                nd -= wd[i] * hbar[i] * basis(p, l, zd[i]) * basis(q, l, zd[i]);
            }
            (2.0 * ix / (d * w), 2.0 * iy / (d * w), nd)
        })
        .collect();
    let mut hxx = DMatrix::zeros(m, m);
    let mut hyy = DMatrix::zeros(m, m);
    let mut demag = DMatrix::zeros(m, m);
    for (&(p, q), &(x, y, nd)) in pairs.iter().zip(&vals) {
        hxx[(p, q)] = x;
        hxx[(q, p)] = x;
        hyy[(p, q)] = y;
        hyy[(q, p)] = y;
        demag[(p, q)] = nd;
        demag[(q, p)] = nd;
    }
    GeometryBlocks { hxx, hyy, demag }
}

/// Parity-blind single element, used to confirm the selection rule.
pub fn hxx_element(d: f64, w: f64, l: f64, p: usize, q: usize, cap: f64) -> f64 {
    let (v, wv) = graded_nodes(0.0, l, 1e-6 * d.min(w), cap, 8);
    let mut s = 0.0;
    for i in 0..v.len() {
        let k = transverse_kernel(w, v[i]) - transverse_kernel(w, d.hypot(v[i]));
        s += wv[i] * k * (shifted_overlap(p, q, l, v[i]) + shifted_overlap(q, p, l, v[i]));
    }
    2.0 * s / (d * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::{integrate, QuadratureSpec};

    #[test]
    fn transverse_kernel_branches_agree() {
        for c in [0.049f64, 0.051, 0.2] {
            let len = 0.01f64;
            let direct = 2.0 * (len * (len / c).asinh() - (c * c + len * len).sqrt() + c) / (4.0 * PI);
            assert!((transverse_kernel(len, c) / direct - 1.0).abs() < 1e-9);
        }
        let s = QuadratureSpec::new(1e-12, 1e-300, 1000);
        let num = 2.0 * integrate(|u: f64| (1.0 - u) / (4.0 * PI * (0.09 + u * u).sqrt()), 0.0, 1.0, &s).unwrap().value;
        assert!((transverse_kernel(1.0, 0.3) - num).abs() < 1e-12);
    }

    #[test]
    fn shifted_overlap_matches_quadrature() {
        let s = QuadratureSpec::new(1e-12, 1e-300, 1000);
        let l = 2.0;
        for (p, q, v) in [(0, 0, 0.3), (3, 5, 0.7), (4, 4, 1.1), (0, 2, 0.2)] {
            let num = integrate(|z: f64| basis(p, l, z + v) * basis(q, l, z), 0.0, l - v, &s).unwrap().value;
            assert!((shifted_overlap(p, q, l, v) - num).abs() < 1e-12);
        }
    }

    #[test]
    fn blocks_symmetric_and_parity_selected() {
        let g = assemble_geometry(5e-9, 30e-9, 600e-9, 10);
        for m in [&g.hxx, &g.hyy, &g.demag] {
            assert!((m - m.transpose()).amax() < 1e-14);
        }
        let direct = hxx_element(5e-9, 30e-9, 600e-9, 2, 5, 5e-9);
        assert!(direct.abs() < 1e-8 * g.hxx[(2, 2)], "{direct}");
    }

    #[test]
    fn grid_refinement_is_stable() {
        let (d, w, l) = (5e-9, 30e-9, 600e-9);
        let coarse = hxx_element(d, w, l, 4, 4, 7.5e-9);
        let fine = hxx_element(d, w, l, 4, 4, 3.75e-9);
        assert!((coarse / fine - 1.0).abs() < 1e-8);
    }

    #[test]
    fn long_bar_approaches_waveguide() {
        use crate::constants::{MaterialParams, PhysicalConstants};
        use crate::waveguide::WaveguideModel;
        let (d, w, l) = (5e-9, 30e-9, 3e-6);
        let g = assemble_geometry(d, w, l, 30);
        let c = PhysicalConstants::default();
        let wg = WaveguideModel::new(d, w, MaterialParams::yig(&c), c, 0.0).unwrap();
        for p in [20, 30] {
            let e = wg.dipolar(p as f64 * PI / l).unwrap();
            assert!((g.hxx[(p, p)] / e.hxx - 1.0).abs() < 0.05, "p={p}: {} vs {}", g.hxx[(p, p)], e.hxx);
            assert!((g.hyy[(p, p)] / e.hyy - 1.0).abs() < 0.05);
        }
    }
}
