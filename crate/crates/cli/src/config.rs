//! Scenario configuration (TOML). All I/O quantities use ordinary
//! frequency (MHz/GHz), fields in mT, lengths in nm or μm.

use std::f64::consts::PI;

use nvmagnon::constants::{MaterialParams, PhysicalConstants, HBAR, K_B};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub output_dir: String,
    pub constants: ConstantsBlock,
    pub material: MaterialBlock,
    pub geometry: Geometry,
    pub field: FieldSpec,
    pub nv: NvBlock,
    pub protocol: ProtocolBlock,
    #[serde(default)]
    pub sweeps: Sweeps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsBlock {
    pub gamma_ghz_per_t: f64,
    pub zero_field_splitting_ghz: f64,
    /// k_B/h.
    pub boltzmann_ghz_per_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialBlock {
    pub mu0_ms_mt: f64,
    /// D_ex in units of γ·mT·μm².
    pub exchange_mt_um2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Waveguide,
    Bar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub kind: GeometryKind,
    pub d_nm: f64,
    pub w_nm: f64,
    /// Bar length; for a waveguide, the length used for the equivalent cooperativity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_nm: Option<f64>,
    /// Bar mode index p of the (00p) mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_p: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_mt: Option<f64>,
    /// Mode (bar) or band minimum (waveguide) above the NV transition by this much.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance_p: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NvBlock {
    pub positions_nm: Vec<[f64; 3]>,
    pub t2_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Transduction,
    Virtual,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub kind: ProtocolKind,
    /// Δf of the off-resonant protocol.
    pub delta_f_mhz: f64,
    /// Idle detuning of the transduction protocol; 0 switches the coupling off instead.
    pub idle_mhz: f64,
    pub temperatures_mk: Vec<f64>,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_khz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_ghz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Span {
    pub fn linear(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let n = (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + (self.stop - self.start) * i as f64 / n).collect()
    }

    pub fn geometric(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let n = (self.points - 1) as f64;
        (0..self.points).map(|i| self.start * (self.stop / self.start).powf(i as f64 / n)).collect()
    }

    fn check(&self, name: &str, positive: bool) -> Result<(), String> {
        if !(self.start.is_finite() && self.stop.is_finite()) || self.points == 0 {
            return Err(format!("sweeps.{name}: bounds must be finite and points ≥ 1"));
        }
        if positive && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(format!("sweeps.{name}: logarithmic span needs positive bounds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweeps {
    /// |k| range (log-spaced, mirrored to negative k).
    pub k_per_um: Span,
    pub field_mt: Span,
    pub map_x_nm: Span,
    pub map_y_nm: Span,
    pub map_z_nm: Span,
    pub dz_um: Span,
    pub trace_points: usize,
    /// Length of the virtual-exchange trace; 0 selects twice the dispersive √iSWAP time.
    pub t_max_us: f64,
    pub alpha: Span,
    pub gamma2_per_s: Span,
    pub boundary_gamma2_over_g_max: f64,
    pub boundary_points: usize,
}

impl Default for Sweeps {
    fn default() -> Self {
        Self {
            k_per_um: Span { start: 1e-3, stop: 1e3, points: 200 },
            field_mt: Span { start: 0.0, stop: 10.0, points: 41 },
            map_x_nm: Span { start: 7.0, stop: 47.0, points: 9 },
            map_y_nm: Span { start: -20.0, stop: 140.0, points: 17 },
            map_z_nm: Span { start: 0.0, stop: 3000.0, points: 31 },
            dz_um: Span { start: 0.1, stop: 3.0, points: 30 },
            trace_points: 200,
            t_max_us: 0.0,
            alpha: Span { start: 1e-8, stop: 1e-5, points: 7 },
            gamma2_per_s: Span { start: 1e2, stop: 1e4, points: 5 },
            boundary_gamma2_over_g_max: 2e-3,
            boundary_points: 5,
        }
    }
}

impl ScenarioConfig {
    /// Bar 5×30×3000 nm, NVs 5 nm above the top edge at z = 0.4 and 2.6 μm.
    pub fn default_bar() -> Self {
        let c = PhysicalConstants::default();
        Self {
            output_dir: "out".into(),
            constants: ConstantsBlock {
                gamma_ghz_per_t: c.gamma / (2.0 * PI) / 1e9,
                zero_field_splitting_ghz: c.d_nv / (2.0 * PI) / 1e9,
                boltzmann_ghz_per_k: K_B / (2.0 * PI * HBAR) / 1e9,
            },
            material: MaterialBlock { mu0_ms_mt: 245.8, exchange_mt_um2: 5.39e-2 },
            geometry: Geometry {
                kind: GeometryKind::Bar,
                d_nm: 5.0,
                w_nm: 30.0,
                l_nm: Some(3000.0),
                mode_p: Some(5),
            },
            field: FieldSpec { resonance_p: Some(5), ..Default::default() },
            nv: NvBlock {
                positions_nm: vec![[10.0, 30.0, 400.0], [10.0, 30.0, 2600.0]],
                t2_ms: 1.0,
            },
            protocol: ProtocolBlock {
                kind: ProtocolKind::Both,
                delta_f_mhz: 3.0,
                idle_mhz: 5.0,
                temperatures_mk: vec![30.0, 70.0, 150.0],
                alpha: 1e-5,
                coupling_khz: None,
                mode_ghz: None,
            },
            sweeps: Sweeps::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn physical_constants(&self) -> PhysicalConstants {
        let k = &self.constants;
        PhysicalConstants {
            gamma: 2.0 * PI * k.gamma_ghz_per_t * 1e9,
            boltzmann_over_hbar: 2.0 * PI * k.boltzmann_ghz_per_k * 1e9,
            d_nv: 2.0 * PI * k.zero_field_splitting_ghz * 1e9,
        }
    }

    pub fn material_params(&self) -> MaterialParams {
        let c = self.physical_constants();
        MaterialParams {
            mu0_ms: self.material.mu0_ms_mt * 1e-3,
            d_ex: self.material.exchange_mt_um2 * c.gamma * 1e-3 * 1e-12,
            alpha: self.protocol.alpha,
        }
    }

    pub fn mode_p(&self) -> usize {
        self.geometry.mode_p.or(self.field.resonance_p).unwrap_or(5)
    }

    /// Whether `r` (nm) lies inside the magnet.
    pub fn inside_magnet(&self, r: [f64; 3]) -> bool {
        let g = &self.geometry;
        let cross = (0.0..=g.d_nm).contains(&r[0]) && (0.0..=g.w_nm).contains(&r[1]);
        match g.kind {
            GeometryKind::Waveguide => cross,
            GeometryKind::Bar => cross && (0.0..=g.l_nm.unwrap_or(0.0)).contains(&r[2]),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let k = &self.constants;
        for (name, v) in [
            ("constants.gamma_ghz_per_t", k.gamma_ghz_per_t),
            ("constants.zero_field_splitting_ghz", k.zero_field_splitting_ghz),
            ("constants.boltzmann_ghz_per_k", k.boltzmann_ghz_per_k),
            ("material.mu0_ms_mt", self.material.mu0_ms_mt),
            ("material.exchange_mt_um2", self.material.exchange_mt_um2),
            ("geometry.d_nm", self.geometry.d_nm),
            ("geometry.w_nm", self.geometry.w_nm),
            ("protocol.delta_f_mhz", self.protocol.delta_f_mhz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be finite and positive, got {v}"));
            }
        }
        let g = &self.geometry;
        match g.kind {
            GeometryKind::Bar => match g.l_nm {
                Some(l) if l.is_finite() && l > 0.0 => {}
                _ => return Err("geometry.l_nm is required for a bar and must be positive".into()),
            },
            GeometryKind::Waveguide => {
                if g.d_nm > g.w_nm {
                    return Err("geometry: a waveguide needs d_nm ≤ w_nm".into());
                }
                if g.mode_p.is_some() {
                    return Err("geometry.mode_p applies to bars only".into());
                }
            }
        }
        let f = &self.field;
        let n = [f.fixed_mt.is_some(), f.detuning_mhz.is_some(), f.resonance_p.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if n != 1 {
            return Err("field: exactly one of fixed_mt, detuning_mhz, resonance_p must be set".into());
        }
        if let Some(h) = f.fixed_mt {
            if !(h.is_finite() && h >= 0.0) {
                return Err(format!("field.fixed_mt must be finite and non-negative, got {h}"));
            }
        }
        if let Some(d) = f.detuning_mhz {
            if !d.is_finite() {
                return Err("field.detuning_mhz must be finite".into());
            }
        }
        if f.resonance_p.is_some() && g.kind == GeometryKind::Waveguide {
            return Err("field.resonance_p needs discrete modes; use a bar geometry".into());
        }
        if self.nv.positions_nm.is_empty() {
            return Err("nv.positions_nm must list at least one position".into());
        }
        for (i, r) in self.nv.positions_nm.iter().enumerate() {
            if r.iter().any(|x| !x.is_finite()) {
                return Err(format!("nv.positions_nm[{i}] must be finite"));
            }
            if self.inside_magnet(*r) {
                return Err(format!("nv.positions_nm[{i}] = {r:?} lies inside the magnet"));
            }
        }
        if !(self.nv.t2_ms > 0.0) {
            return Err("nv.t2_ms must be positive (inf disables dephasing)".into());
        }
        let p = &self.protocol;
        if p.temperatures_mk.is_empty() {
            return Err("protocol.temperatures_mk must not be empty".into());
        }
        if p.temperatures_mk.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err("protocol.temperatures_mk entries must be finite and non-negative".into());
        }
        if !(p.idle_mhz.is_finite() && p.idle_mhz >= 0.0) {
            return Err("protocol.idle_mhz must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&p.alpha) {
            return Err(format!("protocol.alpha must lie in [0, 1), got {}", p.alpha));
        }
        for (name, v) in [("protocol.coupling_khz", p.coupling_khz), ("protocol.mode_ghz", p.mode_ghz)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(format!("{name} must be finite and positive"));
                }
            }
        }
        let s = &self.sweeps;
        s.k_per_um.check("k_per_um", true)?;
        s.field_mt.check("field_mt", false)?;
        s.map_x_nm.check("map_x_nm", false)?;
        s.map_y_nm.check("map_y_nm", false)?;
        s.map_z_nm.check("map_z_nm", false)?;
        s.dz_um.check("dz_um", false)?;
        s.alpha.check("alpha", true)?;
        s.gamma2_per_s.check("gamma2_per_s", true)?;
        if s.trace_points < 2 {
            return Err("sweeps.trace_points must be at least 2".into());
        }
        if !(s.t_max_us.is_finite() && s.t_max_us >= 0.0) {
            return Err("sweeps.t_max_us must be finite and non-negative".into());
        }
        if !(s.boundary_gamma2_over_g_max.is_finite() && s.boundary_gamma2_over_g_max > 0.0) {
            return Err("sweeps.boundary_gamma2_over_g_max must be finite and positive".into());
        }
        if s.field_mt.start < 0.0 || s.field_mt.stop < 0.0 {
            return Err("sweeps.field_mt must be non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips() {
        let c = ScenarioConfig::default_bar();
        let back = ScenarioConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        let (a, b) = (c.physical_constants(), PhysicalConstants::default());
        for (x, y) in [(a.gamma, b.gamma), (a.d_nv, b.d_nv), (a.boltzmann_over_hbar, b.boltzmann_over_hbar)] {
            assert!((x / y - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_two_field_specs() {
        let mut c = ScenarioConfig::default_bar();
        c.field.fixed_mt = Some(3.0);
        assert!(c.validate().unwrap_err().contains("exactly one"));
    }

    #[test]
    fn rejects_nv_inside() {
        let mut c = ScenarioConfig::default_bar();
        c.nv.positions_nm[0] = [2.0, 10.0, 100.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn spans() {
        let s = Span { start: 1.0, stop: 100.0, points: 3 };
        assert_eq!(s.linear(), vec![1.0, 50.5, 100.0]);
        let g = s.geometric();
        assert!((g[1] - 10.0).abs() < 1e-12);
    }
}
