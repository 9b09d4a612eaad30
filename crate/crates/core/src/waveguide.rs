//! Infinitely long rectangular waveguide, uniform (0,0) band.
//!
//! Cross-section x ∈ [0, d], y ∈ [0, w]; the magnetization and the
//! waveguide axis are along z. For the transversely uniform mode the
//! derivatives of the indicator functions reduce every cross-section
//! integral to integrals along the rectangle's edges.

use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;

use crate::constants::{frequency_scales, MaterialParams, PhysicalConstants};
use crate::error::{domain, Error, Result};
use crate::numerics::bessel::{bessel_k0, bessel_k1};
use crate::numerics::quad::{gauss_legendre, integrate_breaks, QuadratureSpec};
use crate::paraunitary::{bogoliubov_2x2, BogoliubovFactors};

/// Wavenumbers below this are clamped (rad/m).
pub const K_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideModel {
    pub d: f64,
    pub w: f64,
    pub material: MaterialParams,
    pub constants: PhysicalConstants,
    pub h_ext: f64,
    pub quad: QuadratureSpec<f64>,
}

/// Edge-integral dipolar tensor of the uniform mode at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolarElements {
    pub hxx: f64,
    pub hyy: f64,
}

impl DipolarElements {
    pub fn h00(&self) -> f64 {
        0.5 * (self.hxx + self.hyy)
    }
    pub fn h01(&self) -> f64 {
        0.5 * (self.hxx - self.hyy)
    }
}

fn k0(x: f64) -> f64 {
    bessel_k0(x).unwrap_or(0.0)
}

fn k1(x: f64) -> f64 {
    bessel_k1(x).unwrap_or(0.0)
}

/// (2/(π·d·w)) ∫₀^L (L−u)[K0(|k|u) − K0(|k|√(s²+u²))] du.
fn edge_pair(k: f64, len: f64, sep: f64, d: f64, w: f64, q: &QuadratureSpec<f64>) -> Result<f64> {
    let k = k.abs().max(K_FLOOR);
    let f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        (len - u) * (k0(k * u) - k0(k * u.hypot(sep)))
    };
    let mut pts = vec![0.0];
    let mut p = sep.min(len) * 1e-3;
    while p < len {
        pts.push(p);
        p *= 10.0;
    }
    if sep < len {
        pts.push(sep);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    pts.push(len);
    pts.dedup();
    let r = integrate_breaks(f, &pts, &q.with_abs_tol(1e-14 * len * len))?;
    Ok(2.0 / (PI * d * w) * r.value)
}

impl WaveguideModel {
    pub fn new(d: f64, w: f64, material: MaterialParams, constants: PhysicalConstants, h_ext: f64) -> Result<Self> {
        if !(d > 0.0 && w > 0.0 && d <= w) {
            return domain("waveguide requires 0 < d ≤ w");
        }
        Ok(Self { d, w, material, constants, h_ext, quad: QuadratureSpec::hamiltonian() })
    }

    pub fn with_field(&self, h_ext: f64) -> Self {
        Self { h_ext, ..*self }
    }

    pub fn omega_m(&self) -> f64 {
        self.material.omega_m(&self.constants)
    }

    pub fn omega_h(&self) -> f64 {
        self.constants.gamma * self.h_ext
    }

    pub fn omega_nv(&self) -> f64 {
        self.constants.omega_nv(self.h_ext)
    }

    pub fn dipolar(&self, k: f64) -> Result<DipolarElements> {
        let (d, w) = (self.d, self.w);
        Ok(DipolarElements {
            hxx: edge_pair(k, w, d, d, w, &self.quad)?,
            hyy: edge_pair(k, d, w, d, w, &self.quad)?,
        })
    }

    /// Off-diagonal tensor components (H^XY, H^YX) by direct double
    /// integration over perpendicular edge pairs.
    pub fn cross_terms(&self, k: f64) -> Result<(f64, f64)> {
        let k = k.abs().max(K_FLOOR);
        let (d, w) = (self.d, self.w);
        let q = self.quad.with_abs_tol(1e-14 * d * w);
        // ∂x φ lives on x ∈ {0, d} (signs +, −) along y; ∂y φ on y ∈ {0, w} along x.
        let xy = |x_edge: f64, sx: f64, y_edge: f64, sy: f64| -> Result<f64> {
            let inner = |y: f64| {
                let g = |x: f64| {
                    let r = (x - x_edge).hypot(y - y_edge);
                    if r > 0.0 { k0(k * r) } else { 0.0 }
                };
                let mut pts = vec![0.0, d];
                if x_edge > 0.0 && x_edge < d {
                    pts.insert(1, x_edge);
                }
                integrate_breaks(g, &pts, &q).map(|r| r.value).unwrap_or(f64::NAN)
            };
            let r = integrate_breaks(inner, &[0.0, y_edge.clamp(0.0, w), w], &q)?;
            Ok(sx * sy * r.value)
        };
        let mut hxy = 0.0;
        for (xe, sx) in [(0.0, 1.0), (d, -1.0)] {
            for (ye, sy) in [(0.0, 1.0), (w, -1.0)] {
                hxy += xy(xe, sx, ye, sy)?;
            }
        }
        hxy /= 2.0 * PI * d * w;
        // H^YX pairs the same edges with roles exchanged; the kernel is
        // symmetric so the integral coincides after relabeling variables.
        let mut hyx = 0.0;
        for (ye, sy) in [(0.0, 1.0), (w, -1.0)] {
            for (xe, sx) in [(0.0, 1.0), (d, -1.0)] {
                let inner = |x: f64| {
                    let g = |y: f64| {
                        let r = (x - xe).hypot(y - ye);
                        if r > 0.0 { k0(k * r) } else { 0.0 }
                    };
                    integrate_breaks(g, &[0.0, w], &q).map(|r| r.value).unwrap_or(f64::NAN)
                };
                hyx += sx * sy * integrate_breaks(inner, &[0.0, d], &q)?.value;
            }
        }
        hyx /= 2.0 * PI * d * w;
        Ok((hxy, hyx))
    }

    /// A_k = ω_H + D_ex k² + ω_M H^00, B_k = ω_M H^01 (rad/s).
    pub fn matrix_elements_00(&self, k: f64) -> Result<(f64, f64)> {
        let e = self.dipolar(k)?;
        Ok(self.elements_from(k, &e))
    }

    fn elements_from(&self, k: f64, e: &DipolarElements) -> (f64, f64) {
        let om = self.omega_m();
        (self.omega_h() + self.material.d_ex * k * k + om * e.h00(), om * e.h01())
    }

    fn omega_from(&self, k: f64, e: &DipolarElements) -> Result<BogoliubovFactors<f64>> {
        let (a, b) = self.elements_from(k, e);
        bogoliubov_2x2(a, Complex::new(b, 0.0)).map_err(|err| match err {
            Error::Instability(m) => Error::Instability(format!("k = {k:e} rad/m: {m}")),
            other => other,
        })
    }

    pub fn omega(&self, k: f64) -> Result<f64> {
        Ok(self.omega_from(k, &self.dipolar(k)?)?.omega)
    }

    /// Γ^{XX}, Γ^{XY}, Γ^{YX}, Γ^{YY} at transverse position ρ.
    pub fn gamma_kernels(&self, rho: (f64, f64), k: f64) -> Result<[f64; 4]> {
        let (x0, y0) = rho;
        let (d, w) = (self.d, self.w);
        if x0 >= 0.0 && x0 <= d && y0 >= 0.0 && y0 <= w {
            return domain("NV position lies inside the magnet cross-section");
        }
        let k = k.abs().max(K_FLOOR);
        let q = self.quad.with_rel_tol(self.quad.rel_tol.max(1e-7)).with_abs_tol(1e-13);
        let line = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, c: f64| -> Result<f64> {
            let mut pts = vec![a, b];
            if c > a && c < b {
                pts.insert(1, c);
            }
            Ok(integrate_breaks(f, &pts, &q)?.value)
        };
        let kern = |dx: f64, dy: f64| {
            let r = dx.hypot(dy);
            k * k1(k * r) / (2.0 * PI * r)
        };
        let (mut gxx, mut gxy, mut gyx, mut gyy) = (0.0, 0.0, 0.0, 0.0);
        for (xe, s) in [(0.0, 1.0), (d, -1.0)] {
            let dx = x0 - xe;
            gxx -= s * line(&|y| dx * kern(dx, y0 - y), 0.0, w, y0)?;
            gyx -= s * line(&|y| (y0 - y) * kern(dx, y0 - y), 0.0, w, y0)?;
        }
        for (ye, s) in [(0.0, 1.0), (w, -1.0)] {
            let dy = y0 - ye;
            gxy -= s * line(&|x| (x0 - x) * kern(x0 - x, dy), 0.0, d, x0)?;
            gyy -= s * line(&|x| dy * kern(x0 - x, dy), 0.0, d, x0)?;
        }
        Ok([gxx, gxy, gyx, gyy])
    }

    /// Dimensionless coupling g(ρ,k) = (Γ^{+,+}/2)λ − (Γ^{+,−}/2)μ*.
    pub fn coupling_g(&self, rho: (f64, f64), k: f64) -> Result<Complex<f64>> {
        let f = self.omega_from(k, &self.dipolar(k)?)?;
        self.coupling_with(rho, k, &f)
    }

    fn coupling_with(&self, rho: (f64, f64), k: f64, f: &BogoliubovFactors<f64>) -> Result<Complex<f64>> {
        let [gxx, gxy, gyx, gyy] = self.gamma_kernels(rho, k)?;
        let i = Complex::i();
        let gpp = gxx - gyy + i * (gxy + gyx);
        let gpm = gxx + gyy - i * (gxy - gyx);
        Ok(gpp * 0.5 * f.lambda - gpm * 0.5 * f.mu.conj())
    }

    /// √(ω_M ω_d)/√(w/d²), rad/s·m^{1/2}.
    pub fn coupling_prefactor(&self) -> Result<f64> {
        let s = frequency_scales(&self.constants, &self.material, self.d, self.w, None, None)?;
        Ok((s.omega_m * s.omega_d).sqrt() / (self.w / (self.d * self.d)).sqrt())
    }

    /// Minimum of the band over k > 0, refined by successive 3-point parabolas.
    pub fn band_minimum(&self) -> Result<(f64, f64)> {
        let ex = self.material.exchange_length_sq(&self.constants).sqrt();
        let (lo, hi) = (1e-3 / self.w, 10.0 / ex);
        let n = 60;
        let grid: Vec<f64> = (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect();
        let vals: Vec<f64> = grid.par_iter().map(|&k| self.omega(k)).collect::<Result<_>>()?;
        let mut imin = 0;
        for i in 1..vals.len() {
            if vals[i] < vals[imin] {
                imin = i;
            }
        }
        if imin == 0 {
            return Ok((self.omega(K_FLOOR)?.min(vals[0]), grid[0]));
        }
        let i = imin.min(n - 1);
        let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
        // Golden-section search on the bracketing interval, finished with a parabola.
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut e = a + g * (b - a);
        let (mut fc, mut fe) = (self.omega(c)?, self.omega(e)?);
        while (b - a) > 1e-7 * b {
            if fc < fe {
                b = e;
                e = c;
                fe = fc;
                c = b - g * (b - a);
                fc = self.omega(c)?;
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + g * (b - a);
                fe = self.omega(e)?;
            }
        }
        let (k1_, k2_, k3_) = (a, 0.5 * (a + b), b);
        let (f1, f2, f3) = (self.omega(k1_)?, self.omega(k2_)?, self.omega(k3_)?);
        let den = (k2_ - k1_) * (f2 - f3) - (k2_ - k3_) * (f2 - f1);
        let kmin = if den.abs() > 0.0 {
            let num = (k2_ - k1_).powi(2) * (f2 - f3) - (k2_ - k3_).powi(2) * (f2 - f1);
            (k2_ - 0.5 * num / den).clamp(a, b)
        } else {
            k2_
        };
        let wmin = self.omega(kmin)?.min(f2);
        Ok((wmin, kmin))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionCurve {
    pub k: Vec<f64>,
    pub omega: Vec<f64>,
    pub a_k: Vec<f64>,
    pub b_k: Vec<f64>,
    pub factors: Vec<BogoliubovFactors<f64>>,
    pub omega_min: f64,
    pub k_min: f64,
}

/// Symmetric wavenumber grid: log-spaced magnitudes in [k_lo, k_hi], mirrored.
pub fn symmetric_log_grid(k_lo: f64, k_hi: f64, n_half: usize) -> Vec<f64> {
    let pos: Vec<f64> = (0..n_half)
        .map(|i| k_lo * (k_hi / k_lo).powf(i as f64 / (n_half.max(2) - 1) as f64))
        .collect();
    let mut g: Vec<f64> = pos.iter().rev().map(|k| -k).collect();
    g.extend(pos);
    g
}

pub fn dispersion(model: &WaveguideModel, k_grid: &[f64]) -> Result<DispersionCurve> {
    if k_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return domain("k grid must be strictly increasing");
    }
    let rows: Vec<(f64, f64, BogoliubovFactors<f64>)> = k_grid
        .par_iter()
        .map(|&k| {
            let e = model.dipolar(k)?;
            let (a, b) = model.elements_from(k, &e);
            let f = model.omega_from(k, &e)?;
            Ok((a, b, f))
        })
        .collect::<Result<_>>()?;
    let (omega_min, k_min) = model.band_minimum()?;
    Ok(DispersionCurve {
        k: k_grid.to_vec(),
        omega: rows.iter().map(|r| r.2.omega).collect(),
        a_k: rows.iter().map(|r| r.0).collect(),
        b_k: rows.iter().map(|r| r.1).collect(),
        factors: rows.iter().map(|r| r.2).collect(),
        omega_min,
        k_min,
    })
}

/// Field μ0H at which ω_min − ω_NV equals `target` (bisection to 2π×1 kHz).
pub fn find_field_for_detuning(model: &WaveguideModel, target: f64) -> Result<f64> {
    let c = &model.constants;
    let f = |h: f64| -> Result<f64> {
        let m = model.with_field(h);
        Ok(m.band_minimum()?.0 - m.omega_nv() - target)
    };
    let (mut lo, mut hi) = (0.0, 0.999 * c.d_nv / c.gamma);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::NoBracket(format!(
            "detuning target {target:e} rad/s not bracketed on [0, {hi:e}] T"
        )));
    }
    let tol = 2.0 * PI * 1e3;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() < tol * 0.5 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Magnitude-resolved k-space kernel of one NV position, ready for the
/// virtual-magnon integrals.
#[derive(Debug, Clone)]
pub struct CouplingKernel {
    pub k: Vec<f64>,
    pub weight: Vec<f64>,
    pub g_abs2: Vec<f64>,
    pub omega_k: Vec<f64>,
    pub omega_nv: f64,
    pub omega_min: f64,
    pub k_min: f64,
    pub g_kmin: Complex<f64>,
    /// ω_M ω_d d²/w, rad²·s⁻²·m.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGridSpec {
    /// Largest separation to be resolved, m.
    pub dz_max: f64,
    /// Points per Lorentzian width or oscillation period.
    pub points_per_scale: f64,
}

impl Default for KGridSpec {
    fn default() -> Self {
        Self { dz_max: 3e-6, points_per_scale: 20.0 }
    }
}

impl CouplingKernel {
    pub fn build(model: &WaveguideModel, rho: (f64, f64), grid: KGridSpec) -> Result<Self> {
        let (omega_min, k_min) = model.band_minimum()?;
        let omega_nv = model.omega_nv();
        let dw = omega_min - omega_nv;
        if !(dw > 0.0) {
            return domain("band minimum must lie above the NV transition");
        }
        let xi0 = (model.material.d_ex / dw).sqrt();
        let k_max = 3.0 * k_min + 20.0 / xi0;
        let period = 2.0 * PI / grid.dz_max;
        let nodes_per_panel = 8usize;
        let fine = (1.0 / xi0).min(period) * nodes_per_panel as f64 / grid.points_per_scale;
        let coarse = period * nodes_per_panel as f64 / grid.points_per_scale;
        let (w_lo, w_hi) = ((k_min - 12.0 / xi0).max(0.0), (k_min + 12.0 / xi0).min(k_max));
        let mut edges = vec![0.0];
        let mut push_span = |a: f64, b: f64, h: f64| {
            if b <= a {
                return;
            }
            let n = ((b - a) / h).ceil().max(1.0) as usize;
            for i in 1..=n {
                edges.push(a + (b - a) * i as f64 / n as f64);
            }
        };
        push_span(0.0, w_lo, coarse.min(k_min.max(1.0)));
        push_span(w_lo, w_hi, fine);
        push_span(w_hi, k_max, coarse);
        let rule = gauss_legendre::<f64>(nodes_per_panel);
        let mut ks = Vec::new();
        let mut ws = Vec::new();
        for e in edges.windows(2) {
            let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            for (x, wt) in rule.0.iter().zip(&rule.1) {
                ks.push(c + h * x);
                ws.push(h * wt);
            }
        }
        let rows: Vec<(f64, f64)> = ks
            .par_iter()
            .map(|&k| {
                let f = model.omega_from(k, &model.dipolar(k)?)?;
                let g = model.coupling_with(rho, k, &f)?;
                Ok((g.norm_sqr(), f.omega))
            })
            .collect::<Result<_>>()?;
        let s = frequency_scales(&model.constants, &model.material, model.d, model.w, None, None)?;
        Ok(Self {
            k: ks,
            weight: ws,
            g_abs2: rows.iter().map(|r| r.0).collect(),
            omega_k: rows.iter().map(|r| r.1).collect(),
            omega_nv,
            omega_min,
            k_min,
            g_kmin: model.coupling_g(rho, k_min)?,
            scale: s.omega_m * s.omega_d * model.d * model.d / model.w,
        })
    }

    pub fn detuning(&self) -> f64 {
        self.omega_min - self.omega_nv
    }

    /// (ω_Mω_d d²/w) ∫dk/2π |g|² e^{ikδz}/(ω_k − ω_NV), using the even
    /// symmetry of the integrand in k.
    pub fn g_eff(&self, dz: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.k.len() {
            s += self.weight[i] * self.g_abs2[i] * (self.k[i] * dz).cos() / (self.omega_k[i] - self.omega_nv);
        }
        self.scale * s / PI
    }

    /// ‖n⁽¹⁾‖² = (ω_Mω_d d²/w) ∫dk/2π |g|²/(ω_k − ω_NV)².
    pub fn validity(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.k.len() {
            s += self.weight[i] * self.g_abs2[i] / (self.omega_k[i] - self.omega_nv).powi(2);
        }
        self.scale * s / PI
    }
}

/// (ω_M ω_d̄/Δω)|g(k_min)|² cos(k_min δz) e^{−δz/ξ₀}.
pub fn analytic_geff(
    model: &WaveguideModel,
    g_kmin: f64,
    k_min: f64,
    dz: f64,
    delta_omega: f64,
) -> Result<f64> {
    let xi0 = (model.material.d_ex / delta_omega).sqrt();
    let s = frequency_scales(&model.constants, &model.material, model.d, model.w, None, Some(xi0))?;
    let dbar = s.omega_dbar.expect("requested");
    Ok(s.omega_m * dbar / delta_omega * g_kmin * g_kmin * (k_min * dz).cos() * (-dz.abs() / xi0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoupling {
    pub g_eff: f64,
    pub validity: f64,
    pub validity_warning: bool,
    pub h_ext: f64,
}

/// Calibrates the field to the requested detuning and evaluates the
/// numeric virtual-magnon coupling between NVs at the same ρ separated by δz.
pub fn effective_coupling(model: &WaveguideModel, rho: (f64, f64), dz: f64, delta_omega: f64) -> Result<EffectiveCoupling> {
    if !(delta_omega > 0.0) {
        return domain("detuning must be positive");
    }
    let h = find_field_for_detuning(model, delta_omega)?;
    let m = model.with_field(h);
    let kern = CouplingKernel::build(&m, rho, KGridSpec { dz_max: dz.abs().max(1e-6), ..Default::default() })?;
    let validity = kern.validity();
    Ok(EffectiveCoupling { g_eff: kern.g_eff(dz), validity, validity_warning: validity > 0.1, h_ext: h })
}

/// ḡ = √(ω_Mω_d/(lw/d²))·|g(k_min)| and C_eq = ḡ²/(αω_min/T₂*).
pub fn equivalent_cooperativity(
    model: &WaveguideModel,
    g_kmin: f64,
    omega_min: f64,
    l: f64,
    alpha: f64,
    t2_star: f64,
) -> Result<(f64, f64)> {
    let s = frequency_scales(&model.constants, &model.material, model.d, model.w, Some(l), None)?;
    let gbar = (s.omega_m * s.omega_d / (l * model.w / (model.d * model.d))).sqrt() * g_kmin.abs();
    Ok((gbar, gbar * gbar / (alpha * omega_min / t2_star)))
}

/// Entangling rate ER = 4g_eff/π and gate-to-decoherence ratio 4g_eff T₂*/π.
pub fn er_gdr(g_eff: f64, t2_star: f64) -> (f64, f64) {
    let er = 4.0 * g_eff.abs() / PI;
    (er, er * t2_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::integrate;

    fn model(d: f64, w: f64) -> WaveguideModel {
        let c = PhysicalConstants::default();
        WaveguideModel::new(d, w, MaterialParams::yig(&c), c, 0.01).unwrap()
    }

    /// Static 2D demagnetizing factor of an infinite prism from the
    /// logarithmic kernel by plain adaptive quadrature of a separate form.
    fn demag_2d(a: f64, b: f64) -> f64 {
        // N_x = (2/(π a b)) ∫₀^b (b−u) ln(√(a²+u²)/u) du
        let s = QuadratureSpec::new(1e-12, 1e-300, 10_000);
        let v = integrate(|u: f64| if u > 0.0 { (b - u) * (a.hypot(u) / u).ln() } else { 0.0 }, 0.0, b, &s).unwrap();
        2.0 / (PI * a * b) * v.value
    }

    #[test]
    fn long_wavelength_limit_is_static_demag() {
        let m = model(20e-9, 120e-9);
        let e = m.dipolar(10.0).unwrap();
        let nx = demag_2d(20e-9, 120e-9);
        let ny = demag_2d(120e-9, 20e-9);
        assert!((nx + ny - 1.0).abs() < 1e-9);
        assert!((e.hxx - nx).abs() < 1e-5, "{} vs {nx}", e.hxx);
        assert!((e.hyy - ny).abs() < 1e-5);
        let sq = model(50e-9, 50e-9).dipolar(10.0).unwrap();
        assert!((sq.hxx - 0.5).abs() < 1e-5 && (sq.hyy - 0.5).abs() < 1e-5);
    }

    #[test]
    fn exchange_dominates_at_large_k() {
        let m = model(20e-9, 120e-9);
        let k = 5e9;
        let (a, b) = m.matrix_elements_00(k).unwrap();
        let ex = m.material.d_ex * k * k;
        assert!((a / ex - 1.0).abs() < 0.02);
        assert!(b.abs() / a < 1e-3);
    }

    #[test]
    fn cross_terms_cancel() {
        let m = model(20e-9, 120e-9);
        let (hxy, hyx) = m.cross_terms(2e7).unwrap();
        let e = m.dipolar(2e7).unwrap();
        assert!(hxy.abs() < 1e-6 * e.hxx && hyx.abs() < 1e-6 * e.hxx);
        assert!((hxy + hyx).abs() < 1e-6 && (hxy - hyx).abs() < 1e-6);
    }

    #[test]
    fn parity_of_band() {
        let m = model(20e-9, 120e-9);
        let c = dispersion(&m, &symmetric_log_grid(1e5, 1e8, 12)).unwrap();
        let n = c.k.len();
        for i in 0..n / 2 {
            assert!((c.omega[i] - c.omega[n - 1 - i]).abs() < 1e-8 * c.omega[i]);
        }
    }

    #[test]
    fn band_minimum_rises_with_field() {
        let m = model(20e-9, 120e-9);
        let w: Vec<f64> = [0.005, 0.01, 0.02].iter().map(|&h| m.with_field(h).band_minimum().unwrap().0).collect();
        assert!(w[0] < w[1] && w[1] < w[2]);
    }

    #[test]
    fn coupling_decays_with_height() {
        let m = model(20e-9, 120e-9);
        let k = 1e7;
        let g: Vec<f64> = [10e-9, 25e-9, 60e-9]
            .iter()
            .map(|&h| m.coupling_g((20e-9 + h, 120e-9), k).unwrap().norm())
            .collect();
        assert!(g[0] > g[1] && g[1] > g[2]);
        let far1 = m.coupling_g((20e-9 + 1e-6, 60e-9), k).unwrap().norm();
        let far2 = m.coupling_g((20e-9 + 2e-6, 60e-9), k).unwrap().norm();
        assert!(far2 < far1);
        assert!(m.coupling_g((10e-9, 60e-9), k).is_err());
    }

    #[test]
    fn analytic_geff_nodes_and_envelope() {
        let m = model(20e-9, 120e-9);
        let dw = 2.0 * PI * 3e6;
        let km = 1e7;
        let env = analytic_geff(&m, 0.2, km, 0.0, dw).unwrap();
        let xi0 = (m.material.d_ex / dw).sqrt();
        let s = frequency_scales(&m.constants, &m.material, m.d, m.w, None, Some(xi0)).unwrap();
        assert!((env - s.omega_m * s.omega_dbar.unwrap() / dw * 0.04).abs() < 1e-9 * env);
        let node = analytic_geff(&m, 0.2, km, PI / 2.0 / km, dw).unwrap();
        assert!(node.abs() < 1e-12 * env);
    }

    #[test]
    fn er_gdr_arithmetic() {
        let (_, gdr) = er_gdr(2.0 * PI * 90e3, 1e-3);
        assert!((gdr - 720.0).abs() < 1e-9);
        assert_eq!(er_gdr(0.0, 1e-3), (0.0, 0.0));
        let (_, g2) = er_gdr(1.0, 2e-3);
        let (_, g1) = er_gdr(1.0, 1e-3);
        assert!((g2 - 2.0 * g1).abs() < 1e-15);
    }
}
