//! Physical constants, material parameters and derived frequency scales.
//!
//! All frequencies are angular. The exchange stiffness is quoted in the
//! literature in the composite unit "γ·mT·μm²": multiply by γ (rad s⁻¹ T⁻¹),
//! by 1e-3 T and by 1e-12 m² to obtain rad·m²·s⁻¹.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Unit conversions between the I/O conventions and SI angular units.
pub mod units {
    use std::f64::consts::TAU;

    pub fn hz_to_rad(f: f64) -> f64 {
        TAU * f
    }
    pub fn rad_to_hz(w: f64) -> f64 {
        w / TAU
    }
    pub fn mhz_to_rad(f: f64) -> f64 {
        TAU * f * 1e6
    }
    pub fn rad_to_mhz(w: f64) -> f64 {
        w / TAU * 1e-6
    }
    pub fn ghz_to_rad(f: f64) -> f64 {
        TAU * f * 1e9
    }
    pub fn rad_to_ghz(w: f64) -> f64 {
        w / TAU * 1e-9
    }
    pub fn khz_to_rad(f: f64) -> f64 {
        TAU * f * 1e3
    }
    pub fn rad_to_khz(w: f64) -> f64 {
        w / TAU * 1e-3
    }
    pub fn mt_to_t(b: f64) -> f64 {
        b * 1e-3
    }
    pub fn t_to_mt(b: f64) -> f64 {
        b * 1e3
    }
    pub fn nm_to_m(x: f64) -> f64 {
        x * 1e-9
    }
    pub fn m_to_nm(x: f64) -> f64 {
        x * 1e9
    }
    pub fn um_to_m(x: f64) -> f64 {
        x * 1e-6
    }
    pub fn m_to_um(x: f64) -> f64 {
        x * 1e6
    }
    pub fn mk_to_k(t: f64) -> f64 {
        t * 1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// |γ| of the electron, rad s⁻¹ T⁻¹.
    pub gamma: f64,
    /// k_B/ħ, rad s⁻¹ K⁻¹.
    pub boltzmann_over_hbar: f64,
    /// NV zero-field splitting, rad/s.
    pub d_nv: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            gamma: 2.0 * PI * 28e9,
            boltzmann_over_hbar: K_B / HBAR,
            d_nv: 2.0 * PI * 2.877e9,
        }
    }
}

impl PhysicalConstants {
    /// Lower (|0⟩↔|−1⟩) and upper (|0⟩↔|+1⟩) NV transition frequencies.
    pub fn nv_transition_frequencies(&self, h_ext: f64) -> Result<(f64, f64)> {
        let zeeman = self.gamma * h_ext;
        if !(zeeman < self.d_nv) || h_ext < 0.0 {
            return domain(format!("field {h_ext} T outside the lower-transition regime"));
        }
        Ok((self.d_nv - zeeman, self.d_nv + zeeman))
    }

    /// Lower transition frequency only.
    pub fn omega_nv(&self, h_ext: f64) -> f64 {
        self.d_nv - self.gamma * h_ext
    }

    /// Bose-Einstein occupation at angular frequency `omega` and temperature `t`.
    pub fn thermal_occupation(&self, omega: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        1.0 / (omega / (self.boltzmann_over_hbar * t)).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// μ0·M_s, tesla.
    pub mu0_ms: f64,
    /// Exchange stiffness D_ex, rad·m²·s⁻¹.
    pub d_ex: f64,
    /// Gilbert damping.
    pub alpha: f64,
}

impl MaterialParams {
    /// YIG defaults: μ0M_s = 245.8 mT, D_ex = 5.39e-2 γ·mT·μm², α = 1e-5.
    pub fn yig(c: &PhysicalConstants) -> Self {
        Self {
            mu0_ms: 0.2458,
            d_ex: 5.39e-2 * c.gamma * 1e-3 * 1e-12,
            alpha: 1e-5,
        }
    }

    pub fn validate(&self, c: &PhysicalConstants) -> Result<()> {
        if !(self.mu0_ms > 0.0 && self.d_ex > 0.0) {
            return domain("mu0_ms and d_ex must be positive");
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return domain("alpha must lie in [0, 1)");
        }
        if !(self.exchange_length_sq(c) > 0.0) {
            return domain("exchange length must be positive");
        }
        Ok(())
    }

    /// α_ex = D_ex/(γ μ0 M_s), m².
    pub fn exchange_length_sq(&self, c: &PhysicalConstants) -> f64 {
        self.d_ex / (c.gamma * self.mu0_ms)
    }

    /// ω_M = γ μ0 M_s.
    pub fn omega_m(&self, c: &PhysicalConstants) -> f64 {
        c.gamma * self.mu0_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyScales {
    pub omega_m: f64,
    pub omega_d: f64,
    pub omega_dbar: Option<f64>,
    pub omega_dwl: Option<f64>,
}

/// μ0 ħ γ², m³/s: the numerator shared by every dipolar scale.
pub fn dipolar_numerator(c: &PhysicalConstants) -> f64 {
    MU0 * HBAR * c.gamma * c.gamma
}

pub fn frequency_scales(
    c: &PhysicalConstants,
    material: &MaterialParams,
    d: f64,
    w: f64,
    l: Option<f64>,
    xi0: Option<f64>,
) -> Result<FrequencyScales> {
    if !(d > 0.0 && w > 0.0) {
        return domain("thickness and width must be positive");
    }
    if l.is_some_and(|l| !(l > 0.0)) || xi0.is_some_and(|x| !(x > 0.0)) {
        return domain("length and correlation length must be positive");
    }
    let num = dipolar_numerator(c);
    Ok(FrequencyScales {
        omega_m: material.omega_m(c),
        omega_d: num / (d * d * d),
        omega_dbar: xi0.map(|x| num / (x * w * d)),
        omega_dwl: l.map(|l| num / (d * w * l)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_m_for_yig() {
        let c = PhysicalConstants::default();
        let m = MaterialParams::yig(&c);
        let oracle = 2.0 * PI * 28e6 * 245.8;
        assert!((m.omega_m(&c) - oracle).abs() < 1e-6 * oracle);
        assert!((units::rad_to_ghz(m.omega_m(&c)) - 6.8824).abs() < 1e-4);
    }

    #[test]
    fn omega_d_at_20nm() {
        let c = PhysicalConstants::default();
        let m = MaterialParams::yig(&c);
        let s = frequency_scales(&c, &m, 20e-9, 120e-9, None, None).unwrap();
        let g = 2.0 * PI * 28e9;
        let oracle = 4.0 * PI * 1e-7 * 1.000_000_000_55 * 1.054_571_817e-34 * g * g / 8e-24;
        assert!((s.omega_d - oracle).abs() < 1e-9 * oracle);
        assert!(frequency_scales(&c, &m, 0.0, 1.0, None, None).is_err());
    }

    #[test]
    fn nv_lines() {
        let c = PhysicalConstants::default();
        let (lo, hi) = c.nv_transition_frequencies(0.0).unwrap();
        assert_eq!(lo, hi);
        let h = 0.1e9 / 28e9;
        let (lo, _) = c.nv_transition_frequencies(h).unwrap();
        assert!((units::rad_to_ghz(lo) - 2.777).abs() < 1e-9);
        assert!(c.nv_transition_frequencies(1.0).is_err());
    }

    #[test]
    fn exchange_unit_conversion() {
        let c = PhysicalConstants::default();
        let m = MaterialParams::yig(&c);
        // 5.39e-2 mT·μm² / 245.8 mT in μm², expressed in m².
        let oracle = 5.39e-2 / 245.8 * 1e-12;
        assert!((m.exchange_length_sq(&c) - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn occupation_ln2_identity() {
        let c = PhysicalConstants::default();
        let t = 0.05;
        let omega = c.boltzmann_over_hbar * t * 2f64.ln();
        assert!((c.thermal_occupation(omega, t) - 1.0).abs() < 1e-12);
        assert_eq!(c.thermal_occupation(omega, 0.0), 0.0);
    }
}
