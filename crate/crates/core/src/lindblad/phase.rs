//! Zero-temperature protocol comparison and small-rate closed forms.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{virtual_exchange_peak, IdleMode, OpenSystemModel};
use crate::error::{domain, Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnalyticLimit {
    OnResonance,
    /// Node index n ≥ 1 of the off-resonant protocol.
    Node(u32),
}

/// Detuning Δω/g of node n.
pub fn node_detuning(n: u32) -> f64 {
    let n = n as f64;
    2.0 * 2f64.sqrt() * (2.0 * n - 1.0) / (4.0 * n - 1.0).sqrt()
}

/// First-order fidelity in αω/g and γ₂/g.
pub fn analytic_fidelity_limits(alpha: f64, omega: f64, g: f64, gamma2: f64, limit: AnalyticLimit) -> f64 {
    let a = alpha * omega / g;
    let b = gamma2 / g;
    match limit {
        AnalyticLimit::OnResonance => 1.0 - (PI - 1.0) / 2.0 * a - 15.0 * PI / 32.0 * b,
        AnalyticLimit::Node(n) => {
            let n = n as f64;
            let s = 4.0 * n - 1.0;
            let ca = s.powf(1.5) * PI / (16.0 * 2f64.sqrt() * n * n);
            let poly = -3.0 + 24.0 * n - 80.0 * n * n + 128.0 * n.powi(3) + 256.0 * n.powi(4);
            let cb = s.sqrt() * poly * PI / (1024.0 * 2f64.sqrt() * n.powi(4));
            1.0 - ca * a - cb * b
        }
    }
}

/// α below which transduction wins: (Δω/g)/(4(1 − 1/π)) · 1/(ωT₂*).
pub fn crossover_alpha(delta_over_g: f64, omega: f64, t2_star: f64) -> f64 {
    delta_over_g / (4.0 * (1.0 - 1.0 / PI)) / (omega * t2_star)
}

/// Large-detuning boundary slope π/(4(π − 1))·(Δω/g).
pub fn asymptotic_slope(delta_over_g: f64) -> f64 {
    PI / (4.0 * (PI - 1.0)) * delta_over_g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub alpha: f64,
    pub gamma2: f64,
    pub fid_onres: f64,
    pub fid_offres: f64,
    /// True when transduction gives the higher fidelity.
    pub onres_wins: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub cells: Vec<PhaseCell>,
    /// (γ₂, α) along the boundary.
    pub boundary: Vec<(f64, f64)>,
    /// αω/g = slope·(γ₂/g) + offset.
    pub slope: f64,
    pub offset: f64,
}

/// Zero-temperature comparison with the coupling switched on and off.
#[derive(Debug, Clone, Copy)]
pub struct Comparison {
    pub g: f64,
    pub omega: f64,
    pub delta_omega: f64,
}

impl Comparison {
    fn model(&self, alpha: f64, gamma2: f64) -> Result<OpenSystemModel> {
        let t2 = if gamma2 > 0.0 { 1.0 / gamma2 } else { f64::INFINITY };
        OpenSystemModel::new(C64::new(self.g, 0.0), C64::new(-self.g, 0.0), self.omega, alpha, t2, 0.0)
    }

    pub fn onres(&self, alpha: f64, gamma2: f64) -> Result<f64> {
        let m = self.model(alpha, gamma2)?;
        let tau = PI / (2.0 * self.g);
        let tr = super::run_transduction(&m, IdleMode::Decoupled, &[tau / 2.0])?;
        Ok(tr.fidelity[0])
    }

    pub fn offres(&self, alpha: f64, gamma2: f64) -> Result<f64> {
        Ok(virtual_exchange_peak(&self.model(alpha, gamma2)?, self.delta_omega, None)?.fidelity)
    }

    /// F_on − F_off.
    pub fn margin(&self, alpha: f64, gamma2: f64) -> Result<f64> {
        Ok(self.onres(alpha, gamma2)? - self.offres(alpha, gamma2)?)
    }

    /// α where both fidelities agree, by bisection in log α.
    pub fn boundary_alpha(&self, gamma2: f64, lo: f64, hi: f64) -> Result<f64> {
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let fa = self.margin(a.exp(), gamma2)?;
        let fb = self.margin(b.exp(), gamma2)?;
        if fa.signum() == fb.signum() {
            return Err(Error::NoBracket(format!("no protocol crossover for alpha in [{lo:e}, {hi:e}]")));
        }
        for _ in 0..40 {
            let mid = 0.5 * (a + b);
            let fm = self.margin(mid.exp(), gamma2)?;
            if fm.signum() == fa.signum() {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-4 {
                break;
            }
        }
        Ok((0.5 * (a + b)).exp())
    }
}

/// Least-squares line y = slope·x + offset.
pub fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 2 {
        return domain("need at least two points for a fit");
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx).powi(2), b + (x - mx) * (y - my)));
    if sxx == 0.0 {
        return domain("degenerate abscissae in fit");
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Winner map on the grid plus the boundary fitted over `boundary_gamma2`.
pub fn protocol_phase_diagram(
    alpha_grid: &[f64],
    gamma2_grid: &[f64],
    boundary_gamma2: &[f64],
    delta_omega: f64,
    g: f64,
    omega: f64,
) -> Result<PhaseDiagram> {
    let cmp = Comparison { g, omega, delta_omega };
    let pairs: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| gamma2_grid.iter().map(move |&b| (a, b)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(alpha, gamma2)| {
            let on = cmp.onres(alpha, gamma2)?;
            let off = cmp.offres(alpha, gamma2)?;
            Ok(PhaseCell {
                alpha,
                gamma2,
                fid_onres: on,
                fid_offres: off,
                onres_wins: on > off,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let boundary = boundary_gamma2
        .par_iter()
        .map(|&gm| Ok((gm, cmp.boundary_alpha(gm, 1e-11, 1e-4)?)))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = boundary.iter().map(|&(gm, a)| (gm / g, a * omega / g)).collect();
    let (slope, offset) = if pts.len() >= 2 { linear_fit(&pts)? } else { (f64::NAN, f64::NAN) };
    Ok(PhaseDiagram {
        cells,
        boundary,
        slope,
        offset,
    })
}

/// Boundary fit for a detuning Δω/g over γ₂/g in (0, x_max].
pub fn boundary_fit(delta_over_g: f64, g: f64, omega: f64, x_max: f64, points: usize) -> Result<(f64, f64)> {
    let gam: Vec<f64> = (1..=points).map(|k| x_max * g * k as f64 / points as f64).collect();
    let d = protocol_phase_diagram(&[], &[], &gam, delta_over_g * g, g, omega)?;
    Ok((d.slope, d.offset))
}
