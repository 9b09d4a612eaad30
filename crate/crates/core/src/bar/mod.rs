//! Finite rectangular bar [0,d]×[0,w]×[0,l] magnetized along z, with
//! transversely uniform standing-wave modes cos(pπz/l), p = 0..=N.

pub mod assembly;
pub mod decoherence;
pub mod demag;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;

use crate::constants::{frequency_scales, MaterialParams, PhysicalConstants};
use crate::error::{domain, Error, Result};
use crate::numerics::linalg::CMatrix;
use crate::paraunitary::{colpa_diagonalize, ParaunitaryDecomposition, QuadraticBosonForm};
use assembly::{assemble_geometry, graded_nodes, GeometryBlocks};

pub use decoherence::{dephasing_higher_order, dephasing_stark, t1_decay_rates, DecoherenceEstimates, Transition};
pub use demag::{demag_field_z, section_averaged_demag};

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarModel {
    pub d: f64,
    pub w: f64,
    pub l: f64,
    pub material: MaterialParams,
    pub constants: PhysicalConstants,
    pub h_ext: f64,
    pub n_trunc: usize,
}

impl BarModel {
    pub fn new(d: f64, w: f64, l: f64, material: MaterialParams, constants: PhysicalConstants, n_trunc: usize) -> Result<Self> {
        if !(d > 0.0 && w > 0.0 && l > 0.0) {
            return domain("bar dimensions must be positive");
        }
        if n_trunc < 10 {
            return domain("mode truncation must be at least 10");
        }
        material.validate(&constants)?;
        Ok(Self { d, w, l, material, constants, h_ext: 0.0, n_trunc })
    }

    /// True when the bar is too short for the thin-bar picture (l < 5·max(d,w)).
    pub fn aspect_warning(&self) -> bool {
        self.l < 5.0 * self.d.max(self.w)
    }

    pub fn omega_m(&self) -> f64 {
        self.material.omega_m(&self.constants)
    }

    pub fn omega_dwl(&self) -> f64 {
        frequency_scales(&self.constants, &self.material, self.d, self.w, Some(self.l), None)
            .ok()
            .and_then(|s| s.omega_dwl)
            .unwrap_or(0.0)
    }

    pub fn kappa(&self, p: usize) -> f64 {
        p as f64 * PI / self.l
    }

    pub fn contains(&self, r: [f64; 3]) -> bool {
        (0.0..=self.d).contains(&r[0]) && (0.0..=self.w).contains(&r[1]) && (0.0..=self.l).contains(&r[2])
    }
}

#[derive(Debug, Clone)]
pub struct BarSpectrum {
    /// Normal-mode frequencies, ascending (rad/s).
    pub frequencies: Vec<f64>,
    /// Dominant basis index p of each normal mode.
    pub labels: Vec<usize>,
    pub decomposition: ParaunitaryDecomposition<f64>,
    pub field: f64,
}

impl BarSpectrum {
    pub fn mode(&self, p: usize) -> Option<usize> {
        self.labels.iter().position(|&q| q == p)
    }

    pub fn omega(&self, p: usize) -> Result<f64> {
        self.mode(p)
            .map(|j| self.frequencies[j])
            .ok_or_else(|| Error::Domain(format!("no normal mode labeled p = {p}")))
    }
}

#[derive(Debug, Clone)]
pub struct BarCouplingSet {
    pub position: [f64; 3],
    pub labels: Vec<usize>,
    /// |0⟩↔|−1⟩ couplings per normal mode (rad/s).
    pub g_lower: Vec<C64>,
    /// |0⟩↔|+1⟩ couplings per normal mode (rad/s).
    pub g_upper: Vec<C64>,
}

impl BarCouplingSet {
    pub fn lower(&self, p: usize) -> Result<C64> {
        self.labels
            .iter()
            .position(|&q| q == p)
            .map(|j| self.g_lower[j])
            .ok_or_else(|| Error::Domain(format!("no normal mode labeled p = {p}")))
    }
}

/// A bar together with its field-independent geometry blocks.
#[derive(Debug, Clone)]
pub struct BarSystem {
    pub model: BarModel,
    pub blocks: GeometryBlocks,
}

impl BarSystem {
    pub fn new(model: BarModel) -> Self {
        let blocks = assemble_geometry(model.d, model.w, model.l, model.n_trunc);
        Self { model, blocks }
    }

    /// A and B in rad/s at field `h`.
    pub fn boson_form(&self, h: f64) -> Result<QuadraticBosonForm<f64>> {
        let m = &self.model;
        let om = m.omega_m();
        let n = m.n_trunc + 1;
        let mut a = (self.blocks.h00() - &self.blocks.demag) * om;
        for p in 0..n {
            a[(p, p)] += m.constants.gamma * h + m.material.d_ex * m.kappa(p).powi(2);
        }
        let b = self.blocks.h01() * om;
        let cplx = |x: &DMatrix<f64>| -> CMatrix<f64> { x.map(|v| Complex::new(v, 0.0)) };
        QuadraticBosonForm::new(cplx(&a), cplx(&b), (0..n).map(|p| format!("(00{p})")).collect())
    }

    pub fn spectrum(&self, h: f64) -> Result<BarSpectrum> {
        let dec = colpa_diagonalize(&self.boson_form(h)?)?;
        Ok(BarSpectrum { frequencies: dec.energies.clone(), labels: dec.dominant.clone(), decomposition: dec, field: h })
    }

    /// Field where the mode labeled `p` meets the lower NV transition,
    /// bisected to |ω_p − ω_NV| < 2π×10 kHz.
    pub fn find_resonant_field(&self, p: usize) -> Result<f64> {
        self.find_detuned_field(p, 0.0)
    }

    /// Field where ω_p − ω_NV equals `delta_omega`.
    pub fn find_detuned_field(&self, p: usize, delta_omega: f64) -> Result<f64> {
        if p > self.model.n_trunc {
            return domain(format!("mode p = {p} exceeds truncation {}", self.model.n_trunc));
        }
        let c = &self.model.constants;
        let f = |h: f64| -> Result<f64> { Ok(self.spectrum(h)?.omega(p)? - c.omega_nv(h) - delta_omega) };
        let (mut lo, mut hi) = (0.0, 0.999 * c.d_nv / c.gamma);
        if f(lo)? > 0.0 || f(hi)? < 0.0 {
            return Err(Error::NoBracket(format!(
                "mode p = {p} does not reach detuning {delta_omega:e} rad/s from the NV transition"
            )));
        }
        let tol = 2.0 * PI * 1e4;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = f(mid)?;
            if v.abs() < tol {
                return Ok(mid);
            }
            if v < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Γ^{XX}, Γ^{XY}, Γ^{YX}, Γ^{YY} for every basis index q at `r`.
    pub fn gamma_kernels(&self, r: [f64; 3]) -> Result<Vec<[f64; 4]>> {
        let m = &self.model;
        if m.contains(r) {
            return domain("NV position lies inside or on the bar");
        }
        let (d, w, l) = (m.d, m.w, m.l);
        let n = m.n_trunc + 1;
        let dx = (r[0] - r[0].clamp(0.0, d)).abs();
        let dy = (r[1] - r[1].clamp(0.0, w)).abs();
        let zc = r[2].clamp(0.0, l);
        let scale = dx.hypot(dy).hypot(r[2] - zc).max(1e-3 * d.min(w));
        let cap = w.min(PI / m.kappa(m.n_trunc)).min(8.0 * scale) / 4.0;
        let first = 0.02 * scale;
        let (mut zs, mut ws) = graded_nodes(zc, l, first, cap, 8);
        let (zl, wl) = graded_nodes(0.0, zc, first, cap, 8);
        for (z, wt) in zl.iter().zip(&wl) {
            zs.push(zc - (z - 0.0));
            ws.push(*wt);
        }
        // Face integrals along the transverse coordinate, in closed form.
        let face = |pn: f64, tc: f64, t1: f64, zz: f64| -> (f64, f64) {
            let r0 = (pn * pn + zz * zz + tc * tc).sqrt();
            let r1 = (pn * pn + zz * zz + (t1 - tc).powi(2)).sqrt();
            let normal = if pn == 0.0 { 0.0 } else { pn / (pn * pn + zz * zz) * ((t1 - tc) / r1 + tc / r0) };
            (normal, 1.0 / r1 - 1.0 / r0)
        };
        let per_node: Vec<[f64; 4]> = zs
            .par_iter()
            .map(|&zp| {
                let zz = r[2] - zp;
                let mut g = [0.0; 4];
                for (xa, s) in [(0.0, 1.0), (d, -1.0)] {
                    let (nrm, inp) = face(r[0] - xa, r[1], w, zz);
                    g[0] -= s * nrm;
                    g[2] -= s * inp;
                }
                for (yb, s) in [(0.0, 1.0), (w, -1.0)] {
                    let (nrm, inp) = face(r[1] - yb, r[0], d, zz);
                    g[3] -= s * nrm;
                    g[1] -= s * inp;
                }
                g
            })
            .collect();
        let mut out = vec![[0.0; 4]; n];
        for (i, &zp) in zs.iter().enumerate() {
            for (q, o) in out.iter_mut().enumerate() {
                let chi = if q == 0 { 1.0 } else { 2f64.sqrt() * (m.kappa(q) * zp).cos() };
                let f = ws[i] * chi / (4.0 * PI);
                for c in 0..4 {
                    o[c] += f * per_node[i][c];
                }
            }
        }
        Ok(out)
    }

    /// Couplings of the NV at `r` to every normal mode, both transitions.
    pub fn coupling(&self, spec: &BarSpectrum, r: [f64; 3]) -> Result<BarCouplingSet> {
        let gam = self.gamma_kernels(r)?;
        let pref = (self.model.omega_m() * self.model.omega_dwl()).sqrt();
        let i = Complex::i();
        let combos: Vec<[C64; 4]> = gam
            .iter()
            .map(|&[xx, xy, yx, yy]| {
                [
                    xx - yy + i * (xy + yx), // ++
                    xx + yy - i * (xy - yx), // +-
                    xx + yy + i * (xy - yx), // -+
                    xx - yy - i * (xy + yx), // --
                ]
            })
            .collect();
        let dec = &spec.decomposition;
        let nm = dec.modes();
        let (mut gl, mut gu) = (Vec::with_capacity(nm), Vec::with_capacity(nm));
        for j in 0..nm {
            let (mut lo, mut up) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for (q, c) in combos.iter().enumerate() {
                let (tpp, tnp) = (dec.tpp(q, j), dec.tnp(q, j));
                lo += c[0] * 0.5 * tpp + c[1] * 0.5 * tnp;
                up += c[2] * 0.5 * tpp + c[3] * 0.5 * tnp;
            }
            gl.push(lo * pref);
            gu.push(up * pref);
        }
        Ok(BarCouplingSet { position: r, labels: spec.labels.clone(), g_lower: gl, g_upper: gu })
    }

    /// Lower-transition coupling to mode `p` over many positions.
    pub fn coupling_map(&self, spec: &BarSpectrum, p: usize, points: &[[f64; 3]]) -> Result<Vec<C64>> {
        points.par_iter().map(|&r| self.coupling(spec, r)?.lower(p)).collect()
    }
}

/// Maps each mode of `prev` to the mode of `next` with the largest
/// σ₃-overlap of paraunitary columns.
pub fn track_modes(prev: &BarSpectrum, next: &BarSpectrum) -> Vec<usize> {
    let (a, b) = (&prev.decomposition, &next.decomposition);
    let m = a.modes();
    (0..m)
        .map(|i| {
            let mut best = (0, -1.0);
            for j in 0..b.modes() {
                let mut s = C64::new(0.0, 0.0);
                for q in 0..m {
                    s += a.tpp(q, i).conj() * b.tpp(q, j) - a.tnp(q, i).conj() * b.tnp(q, j);
                }
                if s.norm() > best.1 {
                    best = (j, s.norm());
                }
            }
            best.0
        })
        .collect()
}

/// C = |g|²/(αω/T₂*).
pub fn cooperativity(g: f64, omega: f64, alpha: f64, t2_star: f64) -> f64 {
    g * g / (alpha * omega / t2_star)
}

/// g_eff = g₁g₂*/Δω, with a flag when |g₁g₂|/Δω² exceeds 0.1.
pub fn bar_geff(g1: C64, g2: C64, delta_omega: f64) -> Result<(C64, bool)> {
    if delta_omega == 0.0 {
        return domain("dispersive coupling needs a nonzero detuning");
    }
    let warn = (g1 * g2).norm() / (delta_omega * delta_omega) > 0.1;
    Ok((g1 * g2.conj() / delta_omega, warn))
}

/// Magnitude of the section-averaged static field profile is exposed for
/// reporting alongside the couplings.
pub fn static_demag_at(model: &BarModel, r: [f64; 3]) -> f64 {
    demag_field_z(model.d, model.w, model.l, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::{integrate, QuadratureSpec};

    fn small() -> BarSystem {
        let c = PhysicalConstants::default();
        BarSystem::new(BarModel::new(5e-9, 30e-9, 600e-9, MaterialParams::yig(&c), c, 12).unwrap())
    }

    #[test]
    fn gamma_matches_potential_gradient() {
        let sys = small();
        let (d, w, l) = (5e-9, 30e-9, 600e-9);
        let q = 3usize;
        let r = [d + 8e-9, 20e-9, 170e-9];
        let s = QuadratureSpec::new(1e-10, 1e-30, 20_000);
        let chi = |z: f64| 2f64.sqrt() * (q as f64 * PI * z / l).cos();
        // Φ_b(r) = Σ s ∫∫ χ(z')/(4π|r−r'|) over the faces hit by ∂_b.
        let phi = |r: [f64; 3], b: usize| -> f64 {
            let mut v = 0.0;
            let faces: [(f64, f64); 2] = if b == 0 { [(0.0, 1.0), (d, -1.0)] } else { [(0.0, 1.0), (w, -1.0)] };
            let span = if b == 0 { w } else { d };
            for (f0, sg) in faces {
                let inner = |zp: f64| {
                    integrate(
                        |t: f64| {
                            let (x, y) = if b == 0 { (f0, t) } else { (t, f0) };
                            let rr = ((r[0] - x).powi(2) + (r[1] - y).powi(2) + (r[2] - zp).powi(2)).sqrt();
                            1.0 / (4.0 * PI * rr)
                        },
                        0.0,
                        span,
                        &s,
                    )
                    .unwrap()
                    .value
                        * chi(zp)
                };
                let pts = [0.0, r[2], l];
                v += sg * crate::numerics::quad::integrate_breaks(inner, &pts, &s).unwrap().value;
            }
            v
        };
        let g = sys.gamma_kernels(r).unwrap()[q];
        let h = 1e-11;
        let grad = |a: usize, b: usize| {
            let mut rp = r;
            let mut rm = r;
            rp[a] += h;
            rm[a] -= h;
            (phi(rp, b) - phi(rm, b)) / (2.0 * h)
        };
        // Γ^{ab} = ∂_a Φ_b
        let want = [grad(0, 0), grad(0, 1), grad(1, 0), grad(1, 1)];
        for c in 0..4 {
            assert!((g[c] - want[c]).abs() < 2e-5 * want.iter().map(|v| v.abs()).fold(0.0, f64::max), "{c}: {} vs {}", g[c], want[c]);
        }
    }

    #[test]
    fn inside_position_rejected() {
        assert!(small().gamma_kernels([1e-9, 1e-9, 1e-7]).is_err());
    }

    #[test]
    fn mirror_symmetry_of_coupling_magnitudes() {
        let sys = small();
        let spec = sys.spectrum(0.004).unwrap();
        let a = sys.coupling(&spec, [10e-9, 30e-9, 150e-9]).unwrap();
        let b = sys.coupling(&spec, [10e-9, 30e-9, 450e-9]).unwrap();
        for j in 0..a.g_lower.len() {
            let (x, y) = (a.g_lower[j].norm(), b.g_lower[j].norm());
            assert!((x - y).abs() < 1e-6 * x.max(y).max(1.0), "mode {j}: {x} vs {y}");
        }
        assert!(a.g_lower.iter().zip(&a.g_upper).any(|(l, u)| (l.norm() - u.norm()).abs() > 1e-3 * l.norm()));
    }

    #[test]
    fn coupling_decays_with_height() {
        let sys = small();
        let spec = sys.spectrum(0.004).unwrap();
        let near = sys.coupling(&spec, [10e-9, 30e-9, 150e-9]).unwrap().lower(3).unwrap().norm();
        let far = sys.coupling(&spec, [30e-9, 30e-9, 150e-9]).unwrap().lower(3).unwrap().norm();
        assert!(far < near);
    }

    #[test]
    fn resonant_field_reproduces_residual() {
        let sys = small();
        let h = sys.find_resonant_field(2).unwrap();
        let spec = sys.spectrum(h).unwrap();
        assert!((spec.omega(2).unwrap() - sys.model.constants.omega_nv(h)).abs() < 2.0 * PI * 1e4);
        assert!(sys.find_resonant_field(40).is_err());
    }

    #[test]
    fn field_slope_matches_mode_weight() {
        let sys = small();
        let a = sys.spectrum(0.004).unwrap();
        let b = sys.spectrum(0.004 + 1e-6).unwrap();
        let g = sys.model.constants.gamma;
        let dec = &a.decomposition;
        for j in 0..4 {
            let fd = (b.frequencies[j] - a.frequencies[j]) / (g * 1e-6);
            let wt: f64 = (0..dec.modes()).map(|q| dec.tpp(q, j).norm_sqr() + dec.tnp(q, j).norm_sqr()).sum();
            assert!((fd - wt).abs() < 1e-4, "mode {j}: {fd} vs {wt}");
            assert!(wt > 1.0);
        }
    }

    #[test]
    fn tracking_is_identity_for_small_steps() {
        let sys = small();
        let a = sys.spectrum(0.004).unwrap();
        let b = sys.spectrum(0.00401).unwrap();
        let map = track_modes(&a, &b);
        assert_eq!(map, (0..a.frequencies.len()).collect::<Vec<_>>());
    }

    #[test]
    fn cooperativity_and_geff_formulas() {
        let g = 2.0 * PI * 517e3;
        let c = cooperativity(g, 2.0 * PI * 2.78e9, 1e-5, 1e-3);
        assert!((cooperativity(2.0 * g, 2.0 * PI * 2.78e9, 1e-5, 1e-3) / c - 4.0).abs() < 1e-12);
        let (a, _) = bar_geff(C64::new(g, 0.0), C64::new(g, 0.0), 2.0 * PI * 3e6).unwrap();
        let (b, _) = bar_geff(C64::new(g, 0.0), C64::new(g, 0.0), 4.0 * PI * 3e6).unwrap();
        assert!((a.re / b.re - 2.0).abs() < 1e-12);
        assert_eq!(bar_geff(C64::new(g, 0.0), C64::new(0.0, 0.0), 1.0).unwrap().0, C64::new(0.0, 0.0));
    }
}
