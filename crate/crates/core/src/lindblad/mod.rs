//! Two NV qubits coupled to one damped bosonic mode.
//!
//! Hilbert-space index: `(2·q1 + q2)·(n_max+1) + n`, with `q = 1` the
//! excited NV level. The Liouvillian conserves the difference of total
//! excitation numbers between ket and bra, so it is stored and exponentiated
//! block by block.

pub mod generator;
pub mod measures;
pub mod phase;
pub mod protocols;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{domain, Error, Result};
use crate::numerics::linalg::eigh;
use crate::C64;

pub use generator::{Generator, Propagator, Space};
pub use measures::{chsh_violation, fidelity_to_target, negativity, negativity_normalized, phase_max_fidelity};
pub use phase::{analytic_fidelity_limits, crossover_alpha, protocol_phase_diagram, AnalyticLimit, PhaseDiagram, PhaseCell};
pub use protocols::{
    average_gate_fidelity, run_transduction, run_virtual_exchange, transduction_peak, virtual_exchange_peak, GateFidelity,
    IdleMode, ProtocolPeak,
};

pub type CMat = DMatrix<C64>;

pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_FLOOR: f64 = -1e-8;
pub const TAIL_BOUND: f64 = 1e-6;

/// Bose-Einstein occupation.
pub fn thermal_occupation(c: &PhysicalConstants, omega: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return domain("temperature must be non-negative");
    }
    Ok(c.thermal_occupation(omega, t))
}

/// Smallest Fock cutoff whose thermal tail stays below the bound.
pub fn auto_cutoff(n_th: f64) -> usize {
    let r = n_th / (1.0 + n_th);
    let mut n = 1;
    while r.powi(n as i32 + 1) >= TAIL_BOUND {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenSystemModel {
    pub g1: C64,
    pub g2: C64,
    pub omega_m: f64,
    pub kappa: f64,
    pub n_th: f64,
    pub gamma2: f64,
    pub n_max: usize,
    pub extra_dephasing: f64,
}

impl OpenSystemModel {
    /// κ = αω_m, γ₂ = 1/T₂*, cutoff chosen from the tail bound.
    pub fn new(g1: C64, g2: C64, omega_m: f64, alpha: f64, t2_star: f64, n_th: f64) -> Result<Self> {
        let gamma2 = if t2_star.is_infinite() { 0.0 } else { 1.0 / t2_star };
        let m = Self {
            g1,
            g2,
            omega_m,
            kappa: alpha * omega_m,
            n_th,
            gamma2,
            n_max: auto_cutoff(n_th),
            extra_dephasing: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    /// Coupling g on NV₁ and −g on NV₂ at temperature `t`.
    pub fn mirrored(c: &PhysicalConstants, g: f64, omega_m: f64, alpha: f64, t2_star: f64, t: f64) -> Result<Self> {
        let n_th = thermal_occupation(c, omega_m, t)?;
        Self::new(C64::new(g, 0.0), C64::new(-g, 0.0), omega_m, alpha, t2_star, n_th)
    }

    pub fn with_cutoff(mut self, n_max: usize) -> Result<Self> {
        self.n_max = n_max;
        self.validate()?;
        Ok(self)
    }

    pub fn with_extra_dephasing(mut self, rate: f64) -> Result<Self> {
        self.extra_dephasing = rate;
        self.validate()?;
        Ok(self)
    }

    pub fn closed(mut self) -> Self {
        self.kappa = 0.0;
        self.gamma2 = 0.0;
        self.extra_dephasing = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.n_th >= 0.0 && self.gamma2 >= 0.0 && self.extra_dephasing >= 0.0) {
            return domain("kappa, n_th and dephasing rates must be non-negative");
        }
        if self.n_max < 1 {
            return domain("Fock cutoff must be at least 1");
        }
        let r = self.n_th / (1.0 + self.n_th);
        let tail = r.powi(self.n_max as i32 + 1);
        if tail >= TAIL_BOUND {
            return domain(format!(
                "Fock cutoff {} inadequate for n_th = {:.4}: tail {tail:.2e}",
                self.n_max, self.n_th
            ));
        }
        Ok(())
    }

    pub fn dephasing_rate(&self) -> f64 {
        self.gamma2 + self.extra_dephasing
    }

    /// |g₁|, used as the protocol time unit.
    pub fn g(&self) -> f64 {
        self.g1.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Rotating at the magnon frequency.
    Magnon,
    /// Rotating at the NV frequency.
    Nv,
}

/// Piecewise-constant segment; all frequencies are relative to the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub nv_detuning: [f64; 2],
    pub mode_detuning: f64,
    pub coupling_on: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub segments: Vec<Segment>,
    pub frame: Frame,
}

impl ProtocolSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.segments.iter().any(|s| !(s.duration >= 0.0) || !s.duration.is_finite()) {
            return domain("segment durations must be finite and non-negative");
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub p1e: Vec<f64>,
    pub p2e: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub negativity_norm: Vec<f64>,
    pub chsh: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub fidelity_phase_max: Vec<f64>,
    pub frame: Option<Frame>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn peak_fidelity(&self) -> Option<(f64, f64)> {
        self.fidelity
            .iter()
            .zip(&self.times)
            .fold(None, |best: Option<(f64, f64)>, (&f, &t)| match best {
                Some((_, bf)) if bf >= f => best,
                _ => Some((t, f)),
            })
    }

    fn push(&mut self, t: f64, obs: &Observables) {
        self.times.push(t);
        self.p1e.push(obs.p1e);
        self.p2e.push(obs.p2e);
        self.n_mean.push(obs.n_mean);
        self.negativity_norm.push(obs.negativity_norm);
        self.chsh.push(obs.chsh);
        self.fidelity.push(obs.fidelity);
        self.fidelity_phase_max.push(obs.fidelity_phase_max);
    }
}

/// Two-qubit target (|ge⟩ + e^{iφ}|eg⟩)/√2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellTarget {
    pub phase: f64,
}

impl BellTarget {
    pub fn state(&self) -> [C64; 4] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // index 2·q1 + q2: |ge⟩ = 1, |eg⟩ = 2
        [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::from_polar(s, self.phase), C64::new(0.0, 0.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub p1e: f64,
    pub p2e: f64,
    pub n_mean: f64,
    pub negativity_norm: f64,
    pub chsh: f64,
    pub fidelity: f64,
    pub fidelity_phase_max: f64,
}

pub fn observe(space: &Space, rho: &CMat, target: BellTarget) -> Observables {
    let r4 = space.reduce(rho);
    let m = space.levels();
    let mut n_mean = 0.0;
    for s in 0..4 {
        for n in 0..m {
            n_mean += n as f64 * rho[(s * m + n, s * m + n)].re;
        }
    }
    Observables {
        p1e: r4[(2, 2)].re + r4[(3, 3)].re,
        p2e: r4[(1, 1)].re + r4[(3, 3)].re,
        n_mean,
        negativity_norm: negativity_normalized(&r4),
        chsh: chsh_violation(&r4),
        fidelity: fidelity_to_target(&r4, &target.state()),
        fidelity_phase_max: phase_max_fidelity(&r4, 1, 2),
    }
}

/// Checks unit trace, Hermiticity and the eigenvalue floor.
pub fn check_state(rho: &CMat) -> Result<()> {
    let tr: C64 = rho.diagonal().iter().sum();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return domain(format!("trace drifted to {tr}"));
    }
    let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if herm > TRACE_TOL {
        return domain(format!("state lost Hermiticity ({herm:.2e})"));
    }
    let (vals, _) = eigh(rho)?;
    if vals[0] < POSITIVITY_FLOOR {
        return Err(Error::Positivity(vals[0]));
    }
    Ok(())
}

/// |q1 q2⟩ ⊗ thermal mode.
pub fn product_thermal(space: &Space, q1: usize, q2: usize, n_th: f64) -> CMat {
    let mut rho = CMat::zeros(space.dim(), space.dim());
    let m = space.levels();
    let s = 2 * q1 + q2;
    let r = n_th / (1.0 + n_th);
    let mut p = 1.0 / (1.0 + n_th);
    let mut norm = 0.0;
    for n in 0..m {
        rho[(s * m + n, s * m + n)] = C64::new(p, 0.0);
        norm += p;
        p *= r;
    }
    rho / C64::new(norm, 0.0)
}

/// |q1 q2⟩ ⊗ |n⟩.
pub fn product_fock(space: &Space, q1: usize, q2: usize, n: usize) -> Result<CMat> {
    if n >= space.levels() {
        return domain("Fock state above cutoff");
    }
    let mut rho = CMat::zeros(space.dim(), space.dim());
    let i = (2 * q1 + q2) * space.levels() + n;
    rho[(i, i)] = C64::new(1.0, 0.0);
    Ok(rho)
}

/// Propagates `rho0` through the schedule and samples at `sample_times`.
pub fn evolve(
    model: &OpenSystemModel,
    rho0: &CMat,
    schedule: &ProtocolSchedule,
    sample_times: &[f64],
    target: BellTarget,
) -> Result<SimulationTrace> {
    model.validate()?;
    schedule.validate()?;
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return domain("sample times must be sorted");
    }
    let space = Space::new(model.n_max);
    if rho0.nrows() != space.dim() {
        return domain("initial state dimension does not match the cutoff");
    }
    check_state(rho0)?;
    let mut trace = SimulationTrace {
        frame: Some(schedule.frame),
        ..Default::default()
    };
    let mut rho = space.to_blocks(rho0);
    let mut now = 0.0;
    let mut next = 0;
    let mut seg_start = 0.0;
    for seg in &schedule.segments {
        let seg_end = seg_start + seg.duration;
        let gen = Generator::build(&space, model, seg)?;
        let mut cache: Option<(f64, Propagator)> = None;
        while next < sample_times.len() && sample_times[next] <= seg_end {
            let dt = sample_times[next] - now;
            if dt > 0.0 {
                let reuse = matches!(&cache, Some((c, _)) if ((c - dt) / dt).abs() < 1e-12);
                if !reuse {
                    cache = Some((dt, gen.propagator(dt, &space.active(&rho))?));
                }
                rho = cache.as_ref().unwrap().1.apply(&rho)?;
                now = sample_times[next];
            }
            let full = space.from_blocks(&rho);
            check_state(&full)?;
            trace.push(now, &observe(&space, &full, target));
            next += 1;
        }
        if seg_end > now {
            let p = gen.propagator(seg_end - now, &space.active(&rho))?;
            rho = p.apply(&rho)?;
            now = seg_end;
        }
        seg_start = seg_end;
    }
    while next < sample_times.len() {
        if sample_times[next] > now + 1e-15 {
            return domain("sample time beyond the schedule");
        }
        let full = space.from_blocks(&rho);
        check_state(&full)?;
        trace.push(now, &observe(&space, &full, target));
        next += 1;
    }
    Ok(trace)
}

/// Final state after the schedule.
pub fn final_state(model: &OpenSystemModel, rho0: &CMat, schedule: &ProtocolSchedule) -> Result<CMat> {
    let space = Space::new(model.n_max);
    let mut rho = space.to_blocks(rho0);
    for seg in &schedule.segments {
        if seg.duration > 0.0 {
            let gen = Generator::build(&space, model, seg)?;
            rho = gen.propagator(seg.duration, &space.active(&rho))?.apply(&rho)?;
        }
    }
    Ok(space.from_blocks(&rho))
}

/// Golden-section maximization on [a, b].
pub fn golden_max<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn closed(g: f64) -> OpenSystemModel {
        OpenSystemModel::new(C64::new(g, 0.0), C64::new(-g, 0.0), 1e10, 0.0, f64::INFINITY, 0.0).unwrap()
    }

    #[test]
    fn occupation_values() {
        let c = PhysicalConstants::default();
        assert_eq!(thermal_occupation(&c, 1e10, 0.0).unwrap(), 0.0);
        let n = thermal_occupation(&c, 2.0 * PI * 2.78e9, 0.07).unwrap();
        let x = crate::constants::HBAR * 2.0 * PI * 2.78e9 / (crate::constants::K_B * 0.07);
        assert!((n - 1.0 / (x.exp() - 1.0)).abs() < 1e-12);
        assert!((n - 0.175).abs() < 2e-3);
        assert!(thermal_occupation(&c, 1.0, -1.0).is_err());
    }

    #[test]
    fn cutoff_adequacy() {
        let m = closed(1.0);
        assert_eq!(m.n_max, 1);
        let hot = OpenSystemModel::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0), 1.0, 0.0, 1.0, 0.7).unwrap();
        assert!(hot.with_cutoff(5).is_err());
        assert!(hot.with_cutoff(hot.n_max + 4).is_ok());
    }

    #[test]
    fn zero_duration_schedule_keeps_state() {
        let m = closed(1.0).with_cutoff(3).unwrap();
        let space = Space::new(m.n_max);
        let rho0 = product_fock(&space, 0, 1, 1).unwrap();
        let sched = ProtocolSchedule { segments: vec![], frame: Frame::Nv };
        let tr = evolve(&m, &rho0, &sched, &[0.0], BellTarget { phase: 0.0 }).unwrap();
        assert_eq!(tr.p2e[0], 1.0);
        assert_eq!(tr.n_mean[0], 1.0);
    }

    #[test]
    fn vacuum_rabi_swap() {
        let g = 2.0 * PI * 1e5;
        let m = OpenSystemModel::new(C64::new(g, 0.0), C64::new(0.0, 0.0), 1e10, 0.0, f64::INFINITY, 0.0).unwrap();
        let space = Space::new(m.n_max);
        let rho0 = product_fock(&space, 1, 0, 0).unwrap();
        let period = 2.0 * PI / (2.0 * g);
        let seg = Segment {
            duration: period,
            nv_detuning: [0.0; 2],
            mode_detuning: 0.0,
            coupling_on: [true, true],
        };
        let sched = ProtocolSchedule { segments: vec![seg], frame: Frame::Magnon };
        let times: Vec<f64> = (0..=40).map(|k| period * k as f64 / 40.0).collect();
        let tr = evolve(&m, &rho0, &sched, &times, BellTarget { phase: 0.0 }).unwrap();
        for (t, p) in tr.times.iter().zip(&tr.p1e) {
            assert!((p - (g * t).cos().powi(2)).abs() < 1e-9);
        }
        assert!(tr.p1e[20] < 1e-9);
        assert!((tr.n_mean[20] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, f) = golden_max(|x| Ok(1.0 - (x - 0.3).powi(2)), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unsorted_samples_rejected() {
        let m = closed(1.0);
        let space = Space::new(m.n_max);
        let rho0 = product_fock(&space, 0, 1, 0).unwrap();
        let sched = ProtocolSchedule { segments: vec![], frame: Frame::Nv };
        assert!(evolve(&m, &rho0, &sched, &[1.0, 0.0], BellTarget { phase: 0.0 }).is_err());
    }
}
