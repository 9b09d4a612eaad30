//! Magnon-induced dephasing and T1 estimates for an NV above the bar.

use std::f64::consts::PI;

use super::{BarCouplingSet, BarModel, BarSpectrum};
use crate::error::{domain, Result};
use crate::numerics::panel::rectangle_solid_angle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceEstimates {
    /// Gaussian dephasing time τ₂, s.
    pub tau2_gaussian: f64,
    /// Lorentzian dephasing time T₂*, s.
    pub t2_lorentzian: f64,
    pub temperature: f64,
    /// Number of modes in the sum.
    pub modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Lower,
    Upper,
}

/// Θ_pp from the end-face steps of F(r)·ψ_p²: (2/(1+δ_p0))(Ω₀ − Ω_l)/4π.
pub fn theta_diagonal(model: &BarModel, r: [f64; 3], p: usize) -> f64 {
    let o0 = rectangle_solid_angle(r, (0.0, model.d), (0.0, model.w), 0.0);
    let ol = rectangle_solid_angle(r, (0.0, model.d), (0.0, model.w), model.l);
    let f = if p == 0 { 1.0 } else { 2.0 };
    f * (o0 - ol) / (4.0 * PI)
}

fn rates_to_times(inv_tau2_sq: f64, inv_t2: f64) -> (f64, f64) {
    let tau2 = if inv_tau2_sq > 0.0 { 1.0 / inv_tau2_sq.sqrt() } else { f64::INFINITY };
    let t2 = if inv_t2 > 0.0 { 1.0 / inv_t2 } else { f64::INFINITY };
    (tau2, t2)
}

/// Dephasing from thermal number fluctuations through the second-order
/// field h₂, with ω_p = ω_min + D_ex κ_p² summed up to 10k_BT/ħ.
pub fn dephasing_higher_order(model: &BarModel, omega_min: f64, r: [f64; 3], t: f64, alpha: f64) -> Result<DecoherenceEstimates> {
    if !(alpha > 0.0) {
        return domain("Lorentzian dephasing needs alpha > 0");
    }
    let c = &model.constants;
    let cutoff = 10.0 * c.boltzmann_over_hbar * t;
    let wdwl = model.omega_dwl();
    let (mut s2, mut sl, mut n) = (0.0, 0.0, 0);
    let mut p = 0;
    loop {
        let om = omega_min + model.material.d_ex * model.kappa(p).powi(2);
        if om > cutoff || t <= 0.0 {
            break;
        }
        let nb = c.thermal_occupation(om, t);
        let th = theta_diagonal(model, r, p);
        let var = nb * (nb + 1.0);
        s2 += th * th * var;
        sl += th * th * var / (2.0 * alpha * om);
        n += 1;
        p += 1;
    }
    let (tau2, t2) = rates_to_times(wdwl * wdwl * s2, wdwl * wdwl * sl);
    Ok(DecoherenceEstimates { tau2_gaussian: tau2, t2_lorentzian: t2, temperature: t, modes: n })
}

/// Dephasing from dispersive (Stark) shifts 2|g_μ|²/(ω_NV − ω_μ) of the
/// non-resonant modes; `exclude` removes the resonant label.
pub fn dephasing_stark(
    coupling: &BarCouplingSet,
    spectrum: &BarSpectrum,
    omega_nv: f64,
    boltzmann_over_hbar: f64,
    t: f64,
    alpha: f64,
    exclude: Option<usize>,
) -> Result<DecoherenceEstimates> {
    if !(alpha > 0.0) {
        return domain("Lorentzian dephasing needs alpha > 0");
    }
    let (mut s2, mut sl, mut n) = (0.0, 0.0, 0);
    for (j, &om) in spectrum.frequencies.iter().enumerate() {
        if Some(spectrum.labels[j]) == exclude {
            continue;
        }
        let chi = 2.0 * coupling.g_lower[j].norm_sqr() / (omega_nv - om);
        let nb = if t > 0.0 { 1.0 / (om / (boltzmann_over_hbar * t)).exp_m1() } else { 0.0 };
        let var = nb * (nb + 1.0);
        s2 += chi * chi * var;
        sl += chi * chi * var / (2.0 * alpha * om);
        n += 1;
    }
    let (tau2, t2) = rates_to_times(s2, sl);
    Ok(DecoherenceEstimates { tau2_gaussian: tau2, t2_lorentzian: t2, temperature: t, modes: n })
}

/// (γ¹₋, γ¹₊) = Σ|g_p|²(n̄+1, n̄)·2κ/((Ω−ω_p)²+κ²), κ = αω_p.
pub fn t1_decay_rates(
    coupling: &BarCouplingSet,
    spectrum: &BarSpectrum,
    transition: Transition,
    model: &BarModel,
    t: f64,
    alpha: f64,
    exclude: Option<usize>,
) -> Result<(f64, f64)> {
    let c = &model.constants;
    let (lo, hi) = c.nv_transition_frequencies(spectrum.field)?;
    let (big_omega, g) = match transition {
        Transition::Lower => (lo, &coupling.g_lower),
        Transition::Upper => (hi, &coupling.g_upper),
    };
    let (mut gm, mut gp) = (0.0, 0.0);
    for (j, &om) in spectrum.frequencies.iter().enumerate() {
        if transition == Transition::Lower && Some(spectrum.labels[j]) == exclude {
            continue;
        }
        let kappa = alpha * om;
        let nb = c.thermal_occupation(om, t);
        let lor = 2.0 * kappa / ((big_omega - om).powi(2) + kappa * kappa);
        gm += g[j].norm_sqr() * (nb + 1.0) * lor;
        gp += g[j].norm_sqr() * nb * lor;
    }
    Ok((gm, gp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bar::BarSystem;
    use crate::constants::{MaterialParams, PhysicalConstants};

    fn setup() -> (BarSystem, BarSpectrum, BarCouplingSet) {
        let c = PhysicalConstants::default();
        let sys = BarSystem::new(BarModel::new(5e-9, 30e-9, 600e-9, MaterialParams::yig(&c), c, 12).unwrap());
        let spec = sys.spectrum(0.004).unwrap();
        let cs = sys.coupling(&spec, [10e-9, 30e-9, 100e-9]).unwrap();
        (sys, spec, cs)
    }

    #[test]
    fn theta_is_flat_in_p() {
        let (sys, _, _) = setup();
        let r = [10e-9, 30e-9, 100e-9];
        let t0 = theta_diagonal(&sys.model, r, 0);
        assert!((theta_diagonal(&sys.model, r, 7) - 2.0 * t0).abs() < 1e-15);
    }

    #[test]
    fn zero_temperature_limits() {
        let (sys, spec, cs) = setup();
        let r = [10e-9, 30e-9, 100e-9];
        let ho = dephasing_higher_order(&sys.model, spec.frequencies[0], r, 0.0, 1e-5).unwrap();
        assert!(ho.tau2_gaussian.is_infinite() && ho.t2_lorentzian.is_infinite());
        let st = dephasing_stark(&cs, &spec, 2.0 * PI * 2.8e9, sys.model.constants.boltzmann_over_hbar, 0.0, 1e-5, Some(3)).unwrap();
        assert!(st.t2_lorentzian.is_infinite());
        let (_, gp) = t1_decay_rates(&cs, &spec, Transition::Lower, &sys.model, 0.0, 1e-5, Some(3)).unwrap();
        assert_eq!(gp, 0.0);
    }

    #[test]
    fn rates_scale_with_temperature_and_damping() {
        let (sys, spec, cs) = setup();
        let r = [10e-9, 30e-9, 100e-9];
        let a = dephasing_higher_order(&sys.model, spec.frequencies[0], r, 0.07, 1e-5).unwrap();
        let b = dephasing_higher_order(&sys.model, spec.frequencies[0], r, 0.15, 1e-5).unwrap();
        assert!(b.t2_lorentzian < a.t2_lorentzian && b.tau2_gaussian < a.tau2_gaussian);
        let a10 = dephasing_higher_order(&sys.model, spec.frequencies[0], r, 0.07, 1e-4).unwrap();
        assert!((a10.t2_lorentzian / a.t2_lorentzian - 10.0).abs() < 1e-9);
        let (m1, _) = t1_decay_rates(&cs, &spec, Transition::Upper, &sys.model, 0.07, 1e-6, None).unwrap();
        let (m2, _) = t1_decay_rates(&cs, &spec, Transition::Upper, &sys.model, 0.07, 1e-5, None).unwrap();
        assert!((m2 / m1 - 10.0).abs() < 1e-3);
    }

    #[test]
    fn stark_pole_exclusion_matters() {
        let (sys, spec, cs) = setup();
        let h = sys.find_resonant_field(2).unwrap();
        let spec2 = sys.spectrum(h).unwrap();
        let cs2 = sys.coupling(&spec2, cs.position).unwrap();
        let wnv = sys.model.constants.omega_nv(h);
        let kb = sys.model.constants.boltzmann_over_hbar;
        let ex = dephasing_stark(&cs2, &spec2, wnv, kb, 0.07, 1e-5, Some(2)).unwrap();
        let inc = dephasing_stark(&cs2, &spec2, wnv, kb, 0.07, 1e-5, None).unwrap();
        assert!(inc.t2_lorentzian < ex.t2_lorentzian);
        let _ = spec;
    }
}
