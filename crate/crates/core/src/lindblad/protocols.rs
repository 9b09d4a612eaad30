//! Transduction and virtual-exchange protocols and the √iSWAP gate fidelity.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    evolve, observe, product_thermal, BellTarget, CMat, Frame, Generator, OpenSystemModel, ProtocolSchedule,
    Segment, SimulationTrace, Space,
};
use crate::error::{domain, Result};
use crate::C64;

/// How the NV that is not swapping is kept out of resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IdleMode {
    /// Detuned from the mode by the given angular frequency.
    Detuned(f64),
    /// Coupling switched off.
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPeak {
    pub time: f64,
    pub fidelity: f64,
    pub fidelity_phase_max: f64,
    pub negativity_norm: f64,
    pub chsh: f64,
}

fn transduction_segments(model: &OpenSystemModel, idle: IdleMode, tau_var: f64) -> (Segment, Segment) {
    let tau_swap = PI / (2.0 * model.g());
    let (d, on) = match idle {
        IdleMode::Detuned(d) => (d, [true, true]),
        IdleMode::Decoupled => (0.0, [false, false]),
    };
    let first = Segment {
        duration: tau_var,
        nv_detuning: [d, 0.0],
        mode_detuning: 0.0,
        coupling_on: [on[0], true],
    };
    let second = Segment {
        duration: tau_swap,
        nv_detuning: [0.0, -d],
        mode_detuning: 0.0,
        coupling_on: [true, on[1]],
    };
    (first, second)
}

/// Target (|ge⟩ + e^{−iδτ_iSWAP}|eg⟩)/√2.
pub fn transduction_target(model: &OpenSystemModel, idle: IdleMode) -> BellTarget {
    let tau_swap = PI / (2.0 * model.g());
    match idle {
        IdleMode::Detuned(d) => BellTarget { phase: -d * tau_swap },
        IdleMode::Decoupled => BellTarget { phase: 0.0 },
    }
}

/// Final-state observables versus τ_var; `times` holds τ_var + τ_SWAP.
pub fn run_transduction(model: &OpenSystemModel, idle: IdleMode, tau_vars: &[f64]) -> Result<SimulationTrace> {
    if tau_vars.iter().any(|&t| !(t >= 0.0)) || tau_vars.windows(2).any(|w| w[1] < w[0]) {
        return domain("tau_var values must be non-negative and sorted");
    }
    let space = Space::new(model.n_max);
    let target = transduction_target(model, idle);
    let (s1, s2) = transduction_segments(model, idle, 0.0);
    let g1 = Generator::build(&space, model, &s1)?;
    let g2 = Generator::build(&space, model, &s2)?;
    let mut rho = space.to_blocks(&product_thermal(&space, 0, 1, model.n_th));
    let act = space.active(&rho);
    let swap = g2.propagator(s2.duration, &act)?;
    let mut trace = SimulationTrace {
        frame: Some(Frame::Magnon),
        ..Default::default()
    };
    let mut now = 0.0;
    let mut step: Option<(f64, super::Propagator)> = None;
    for &tv in tau_vars {
        let dt = tv - now;
        if dt > 0.0 {
            if !matches!(&step, Some((c, _)) if ((c - dt) / dt).abs() < 1e-12) {
                step = Some((dt, g1.propagator(dt, &act)?));
            }
            rho = step.as_ref().unwrap().1.apply(&rho)?;
            now = tv;
        }
        let out = space.from_blocks(&swap.apply(&rho)?);
        super::check_state(&out)?;
        trace.push(tv + s2.duration, &observe(&space, &out, target));
    }
    Ok(trace)
}

type Blocks = Vec<DVector<C64>>;

/// Fine steps per coarse interval in the local re-scan.
const SUB: usize = 24;

/// Coarse scan of `n` steps, then a re-scan at dt/SUB over the two intervals
/// around the best coarse point. Returns the coarse values and the best
/// (time, value, state).
fn scan_peak<S: Clone, O: Copy>(
    start: &S,
    n: usize,
    dt: f64,
    coarse: impl Fn(&S) -> Result<S>,
    fine: impl Fn(&S) -> Result<S>,
    score: impl Fn(&S) -> Result<O>,
    key: impl Fn(&O) -> f64,
) -> Result<(Vec<O>, f64, O, S)> {
    let mut s = start.clone();
    let mut vals = vec![score(&s)?];
    for _ in 0..n {
        s = coarse(&s)?;
        vals.push(score(&s)?);
    }
    let k = (0..vals.len()).fold(0, |b, i| if key(&vals[i]) > key(&vals[b]) { i } else { b });
    let k0 = k.saturating_sub(1);
    let k1 = (k + 1).min(n);
    let mut s = start.clone();
    for _ in 0..k0 {
        s = coarse(&s)?;
    }
    let mut best = (k0 as f64 * dt, score(&s)?, s.clone());
    let h = dt / SUB as f64;
    for j in 1..=(k1 - k0) * SUB {
        s = fine(&s)?;
        let o = score(&s)?;
        if key(&o) > key(&best.1) {
            best = (k0 as f64 * dt + j as f64 * h, o, s.clone());
        }
    }
    Ok((vals, best.0, best.1, best.2))
}

fn to_peak(time: f64, obs: super::Observables, coarse: &[super::Observables]) -> ProtocolPeak {
    let pm = coarse.iter().map(|o| o.fidelity_phase_max).fold(obs.fidelity_phase_max, f64::max);
    ProtocolPeak {
        time,
        fidelity: obs.fidelity,
        fidelity_phase_max: pm,
        negativity_norm: obs.negativity_norm,
        chsh: obs.chsh,
    }
}

/// Highest transduction fidelity for τ_var in [0, τ_iSWAP]; `time` is the
/// total interaction time τ_var + τ_SWAP.
pub fn transduction_peak(model: &OpenSystemModel, idle: IdleMode, n_grid: usize) -> Result<ProtocolPeak> {
    let tau = PI / (2.0 * model.g());
    let n = n_grid.max(8);
    let dt = tau / n as f64;
    let space = Space::new(model.n_max);
    let target = transduction_target(model, idle);
    let (s1, s2) = transduction_segments(model, idle, 0.0);
    let rho0 = space.to_blocks(&product_thermal(&space, 0, 1, model.n_th));
    let act = space.active(&rho0);
    let g1 = Generator::build(&space, model, &s1)?;
    let swap = Generator::build(&space, model, &s2)?.propagator(s2.duration, &act)?;
    let pc = g1.propagator(dt, &act)?;
    let pf = g1.propagator(dt / SUB as f64, &act)?;
    let (vals, tv, obs, state) = scan_peak(
        &rho0,
        n,
        dt,
        |v: &Blocks| pc.apply(v),
        |v: &Blocks| pf.apply(v),
        |v: &Blocks| Ok(observe(&space, &space.from_blocks(&swap.apply(v)?), target)),
        |o: &super::Observables| o.fidelity,
    )?;
    super::check_state(&space.from_blocks(&swap.apply(&state)?))?;
    Ok(to_peak(tv + s2.duration, obs, &vals))
}

/// Target (|ge⟩ − i|eg⟩)/√2.
pub fn virtual_target() -> BellTarget {
    BellTarget { phase: -FRAC_PI_2 }
}

fn virtual_schedule(delta_omega: f64, duration: f64) -> ProtocolSchedule {
    ProtocolSchedule {
        segments: vec![Segment {
            duration,
            nv_detuning: [0.0, 0.0],
            mode_detuning: delta_omega,
            coupling_on: [true, true],
        }],
        frame: Frame::Nv,
    }
}

/// Both NVs a detuning Δω below the mode, from |ge⟩ ⊗ thermal.
pub fn run_virtual_exchange(model: &OpenSystemModel, delta_omega: f64, times: &[f64]) -> Result<SimulationTrace> {
    if delta_omega == 0.0 {
        return domain("virtual exchange needs a nonzero detuning");
    }
    let space = Space::new(model.n_max);
    let rho0 = product_thermal(&space, 0, 1, model.n_th);
    let t_end = times.last().copied().unwrap_or(0.0);
    evolve(model, &rho0, &virtual_schedule(delta_omega, t_end), times, virtual_target())
}

/// |g₁g₂|/Δω.
pub fn dispersive_rate(model: &OpenSystemModel, delta_omega: f64) -> f64 {
    (model.g1 * model.g2).norm() / delta_omega.abs()
}

/// Sampling step resolving the fast bright-state oscillation.
fn virtual_step(model: &OpenSystemModel, delta_omega: f64) -> f64 {
    let g2 = model.g1.norm_sqr() + model.g2.norm_sqr();
    let omega = (delta_omega * delta_omega + 4.0 * g2).sqrt();
    2.0 * PI / omega / 24.0
}

/// Highest virtual-exchange fidelity within `t_max`
/// (default: twice the dispersive √iSWAP time).
pub fn virtual_exchange_peak(model: &OpenSystemModel, delta_omega: f64, t_max: Option<f64>) -> Result<ProtocolPeak> {
    if delta_omega == 0.0 {
        return domain("virtual exchange needs a nonzero detuning");
    }
    let t_max = t_max.unwrap_or(2.0 * PI / (4.0 * dispersive_rate(model, delta_omega)));
    let n = ((t_max / virtual_step(model, delta_omega)).ceil() as usize).max(16);
    let dt = t_max / n as f64;
    let space = Space::new(model.n_max);
    let rho0 = space.to_blocks(&product_thermal(&space, 0, 1, model.n_th));
    let act = space.active(&rho0);
    let gen = Generator::build(&space, model, &virtual_schedule(delta_omega, 0.0).segments[0])?;
    let pc = gen.propagator(dt, &act)?;
    let pf = gen.propagator(dt / SUB as f64, &act)?;
    let (vals, t, obs, state) = scan_peak(
        &rho0,
        n,
        dt,
        |v: &Blocks| pc.apply(v),
        |v: &Blocks| pf.apply(v),
        |v: &Blocks| Ok(observe(&space, &space.from_blocks(v), virtual_target())),
        |o: &super::Observables| o.fidelity,
    )?;
    super::check_state(&space.from_blocks(&state))?;
    Ok(to_peak(t, obs, &vals))
}

/// exp(−i[|g_eff|(σ₁⁺σ₂⁻ + h.c.) − |g_eff|(n₁ + n₂)]t) at t = π/(4|g_eff|).
pub fn sqrt_iswap() -> CMat {
    let mut h = CMat::zeros(4, 4);
    h[(1, 2)] = C64::new(1.0, 0.0);
    h[(2, 1)] = C64::new(1.0, 0.0);
    for (i, n) in [(1, 1.0), (2, 1.0), (3, 2.0)] {
        h[(i, i)] = C64::new(-n, 0.0);
    }
    (h * C64::new(0.0, -PI / 4.0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateFidelity {
    /// π/(4|g_eff|).
    pub tau: f64,
    pub at_tau: f64,
    pub peak: f64,
    pub peak_time: f64,
}

/// Entanglement fidelity with auxiliaries idle:
/// F_e = (1/16) Σ_ij ⟨i|U† E(|i⟩⟨j|) U|j⟩, F̄ = (4F_e + 1)/5.
struct GateChannel<'a> {
    model: &'a OpenSystemModel,
    space: Space,
    gen: Generator,
    inputs: Vec<Vec<DVector<C64>>>,
    active: Vec<bool>,
    u: CMat,
}

impl<'a> GateChannel<'a> {
    fn new(model: &'a OpenSystemModel, delta_omega: f64) -> Result<Self> {
        let space = Space::new(model.n_max);
        let seg = virtual_schedule(delta_omega, 0.0).segments[0];
        let gen = Generator::build(&space, model, &seg)?;
        let m = space.levels();
        let th = product_thermal(&space, 0, 0, model.n_th);
        let mut inputs = Vec::with_capacity(16);
        let mut active = vec![false; space.blocks().len()];
        for i in 0..4 {
            for j in 0..4 {
                let mut x = CMat::zeros(space.dim(), space.dim());
                for n in 0..m {
                    x[(i * m + n, j * m + n)] = th[(n, n)];
                }
                let v = space.to_blocks(&x);
                for (a, b) in active.iter_mut().zip(space.active(&v)) {
                    *a |= b;
                }
                inputs.push(v);
            }
        }
        Ok(Self {
            model,
            space,
            gen,
            inputs,
            active,
            u: sqrt_iswap(),
        })
    }

    fn score(&self, outputs: &[Vec<DVector<C64>>]) -> f64 {
        let ud = self.u.adjoint();
        let mut fe = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let y = self.space.reduce(&self.space.from_blocks(&outputs[4 * i + j]));
                fe += (&ud * y * &self.u)[(i, j)];
            }
        }
        (4.0 * fe.re / 16.0 + 1.0) / 5.0
    }

    fn at(&self, t: f64) -> Result<f64> {
        let p = self.gen.propagator(t, &self.active)?;
        let out: Result<Vec<_>> = self.inputs.iter().map(|v| p.apply(v)).collect();
        Ok(self.score(&out?))
    }
}

/// Average √iSWAP fidelity of the virtual-exchange evolution; the peak is
/// searched on (0, 2τ].
pub fn average_gate_fidelity(model: &OpenSystemModel, delta_omega: f64) -> Result<GateFidelity> {
    if delta_omega == 0.0 {
        return domain("gate needs a nonzero detuning");
    }
    let ch = GateChannel::new(model, delta_omega)?;
    let tau = PI / (4.0 * dispersive_rate(ch.model, delta_omega));
    let t_max = 2.0 * tau;
    let n = ((t_max / virtual_step(model, delta_omega)).ceil() as usize).max(16);
    let dt = t_max / n as f64;
    let pc = ch.gen.propagator(dt, &ch.active)?;
    let pf = ch.gen.propagator(dt / SUB as f64, &ch.active)?;
    let step = |p: &super::Propagator, s: &Vec<Blocks>| s.iter().map(|v| p.apply(v)).collect::<Result<Vec<_>>>();
    let (_, peak_time, peak, _) = scan_peak(
        &ch.inputs,
        n,
        dt,
        |s: &Vec<Blocks>| step(&pc, s),
        |s: &Vec<Blocks>| step(&pf, s),
        |s: &Vec<Blocks>| Ok(ch.score(s)),
        |f: &f64| *f,
    )?;
    Ok(GateFidelity {
        tau,
        at_tau: ch.at(tau)?,
        peak,
        peak_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{golden_max, product_fock};

    fn closed(g: f64) -> OpenSystemModel {
        OpenSystemModel::new(C64::new(g, 0.0), C64::new(-g, 0.0), 2.0 * PI * 2.78e9, 0.0, f64::INFINITY, 0.0).unwrap()
    }

    #[test]
    fn gate_matrix_entries() {
        let u = sqrt_iswap();
        let h = C64::new(0.5, 0.5);
        let l = C64::new(0.5, -0.5);
        let want = [(3, 3, C64::new(0.0, 1.0)), (2, 2, h), (2, 1, l), (1, 2, l), (1, 1, h), (0, 0, C64::new(1.0, 0.0))];
        for (r, c, z) in want {
            assert!((u[(r, c)] - z).norm() < 1e-12, "({r},{c})");
        }
    }

    #[test]
    fn ideal_transduction_hits_target() {
        let g = 2.0 * PI * 517e3;
        let m = closed(g);
        let tau = PI / (2.0 * g);
        let tr = run_transduction(&m, IdleMode::Decoupled, &[0.0, tau / 2.0]).unwrap();
        assert!((tr.fidelity[1] - 1.0).abs() < 1e-6);
        // with τ_var = 0 NV₂ stays excited through the second segment
        assert!((tr.p2e[0] - 1.0).abs() < 1e-12);
        let idle = IdleMode::Detuned(2.0 * PI * 5e6);
        let tr = run_transduction(&m, idle, &[0.0]).unwrap();
        assert!(tr.p2e[0] > 0.9);
    }

    #[test]
    fn node_detuning_gives_unit_fidelity() {
        let g = 2.0 * PI * 517e3;
        let m = closed(g);
        let dw = 2.0 * 2f64.sqrt() / 3f64.sqrt() * g;
        let omega = (dw * dw + 8.0 * g * g).sqrt();
        let p = virtual_exchange_peak(&m, dw, Some(1.5 * 2.0 * PI / omega)).unwrap();
        assert!((p.fidelity - 1.0).abs() < 1e-6);
        assert!((p.time - 2.0 * PI / omega).abs() < 1e-3 * p.time);
    }

    #[test]
    fn dispersive_suppression_and_rate() {
        let g = 2.0 * PI * 517e3;
        let m = closed(g);
        let dw = 20.0 * g;
        let geff = dispersive_rate(&m, dw);
        let t_end = PI / (2.0 * geff);
        let times: Vec<f64> = (0..=400).map(|k| t_end * k as f64 / 400.0).collect();
        let tr = run_virtual_exchange(&m, dw, &times).unwrap();
        let nmax = tr.n_mean.iter().copied().fold(0.0, f64::max);
        assert!(nmax < 4.0 * (g / dw).powi(2));
        // p₁ reaches its first maximum at π/(2|g_eff|)
        let k = tr.p1e.iter().enumerate().fold(0, |b, (i, &v)| if v > tr.p1e[b] { i } else { b });
        let freq = PI / (2.0 * tr.times[k]);
        assert!((freq - geff).abs() < 0.05 * geff);
        for (n, c) in tr.negativity_norm.iter().zip(&tr.chsh) {
            assert!(*c == 0.0 || *n > 0.0);
        }
    }

    #[test]
    fn fock_insensitivity() {
        let g = 2.0 * PI * 517e3;
        let m = closed(g).with_cutoff(4).unwrap();
        let dw = 20.0 * g;
        let geff = dispersive_rate(&m, dw);
        let space = Space::new(m.n_max);
        let t_end = PI / geff;
        let times: Vec<f64> = (0..=2000).map(|k| t_end * k as f64 / 2000.0).collect();
        let mut rates = Vec::new();
        for n in 0..3 {
            let rho0 = product_fock(&space, 0, 1, n).unwrap();
            let tr = evolve(&m, &rho0, &virtual_schedule(dw, t_end), &times, virtual_target()).unwrap();
            // least squares p₁ ≈ A sin²(wt); the fast ripple averages out
            let resid = |w: f64| -> Result<f64> {
                let s: Vec<f64> = times.iter().map(|t| (w * t).sin().powi(2)).collect();
                let a = s.iter().zip(&tr.p1e).map(|(x, y)| x * y).sum::<f64>() / s.iter().map(|x| x * x).sum::<f64>();
                Ok(-s.iter().zip(&tr.p1e).map(|(x, y)| (y - a * x).powi(2)).sum::<f64>())
            };
            let (w, _) = golden_max(resid, 0.8 * geff, 1.2 * geff, 1e-8 * geff).unwrap();
            rates.push(w);
        }
        // fourth order: bright-state shift ∝ 1 + 2(2n+1)(g/Δω)²
        let eps = (g / dw).powi(2);
        for (n, r) in rates.iter().enumerate().skip(1) {
            let rel = (r - rates[0]) / rates[0];
            let want = 4.0 * n as f64 * eps;
            assert!(rel.abs() < 5.0 * n as f64 * eps, "{rates:?}");
            assert!((rel.abs() / want - 1.0).abs() < 0.25, "{rel} vs {want}");
        }
    }

    #[test]
    fn ideal_gate_in_dispersive_limit() {
        let g = 2.0 * PI * 517e3;
        let m = closed(g);
        let f = average_gate_fidelity(&m, 40.0 * g).unwrap();
        assert!(f.peak > 0.999, "{f:?}");
        assert!(f.peak >= f.at_tau);
    }
}
