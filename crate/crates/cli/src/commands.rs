//! Subcommand implementations.

use std::f64::consts::PI;
use std::fmt;
use std::io;

use nvmagnon::bar::{self, BarModel, BarSpectrum, BarSystem, Transition};
use nvmagnon::constants::{MaterialParams, PhysicalConstants};
use nvmagnon::lindblad::phase::{asymptotic_slope, crossover_alpha, linear_fit, Comparison};
use nvmagnon::lindblad::{
    average_gate_fidelity, run_transduction, run_virtual_exchange, thermal_occupation, transduction_peak,
    virtual_exchange_peak, IdleMode, OpenSystemModel, ProtocolPeak, SimulationTrace,
};
use nvmagnon::waveguide::{self, CouplingKernel, KGridSpec, WaveguideModel};
use nvmagnon::C64;
use rayon::prelude::*;

use crate::config::{GeometryKind, ProtocolKind, ScenarioConfig};
use crate::output::Outputs;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Physics { point: String, source: nvmagnon::Error },
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Physics { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Physics { point, source } => write!(f, "physics error at {point}: {source}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

trait At<T> {
    fn at(self, point: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> At<T> for nvmagnon::Result<T> {
    fn at(self, point: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Physics { point: point(), source })
    }
}

fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}
fn to_ghz(w: f64) -> f64 {
    w / (2.0 * PI * 1e9)
}
fn to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e6)
}
fn to_khz(w: f64) -> f64 {
    w / (2.0 * PI * 1e3)
}
fn nm(r: [f64; 3]) -> [f64; 3] {
    r.map(|x| x * 1e-9)
}

/// Resolved configuration plus command-line overrides.
pub struct Ctx {
    pub cfg: ScenarioConfig,
    pub constants: PhysicalConstants,
    pub material: MaterialParams,
    pub n_trunc: usize,
    pub quad_rtol: Option<f64>,
    pub fock_cutoff: Option<usize>,
}

impl Ctx {
    pub fn new(cfg: ScenarioConfig, n_trunc: usize, quad_rtol: Option<f64>, fock_cutoff: Option<usize>) -> Self {
        Self {
            constants: cfg.physical_constants(),
            material: cfg.material_params(),
            cfg,
            n_trunc,
            quad_rtol,
            fock_cutoff,
        }
    }

    fn t2_star(&self) -> f64 {
        self.cfg.nv.t2_ms * 1e-3
    }

    fn require(&self, kind: GeometryKind, cmd: &str) -> CliResult<()> {
        if self.cfg.geometry.kind != kind {
            return Err(CliError::Config(format!("{cmd} needs geometry.kind = {kind:?}").to_lowercase()));
        }
        Ok(())
    }

    fn nv(&self, i: usize) -> CliResult<[f64; 3]> {
        self.cfg
            .nv
            .positions_nm
            .get(i)
            .map(|&r| nm(r))
            .ok_or_else(|| CliError::Config(format!("nv.positions_nm needs at least {} entries", i + 1)))
    }

    fn waveguide(&self, out: &mut Outputs) -> CliResult<WaveguideModel> {
        let g = &self.cfg.geometry;
        let mut m = WaveguideModel::new(g.d_nm * 1e-9, g.w_nm * 1e-9, self.material, self.constants, 0.0)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(r) = self.quad_rtol {
            m.quad = m.quad.with_rel_tol(r);
        }
        let f = &self.cfg.field;
        let h = match (f.fixed_mt, f.detuning_mhz) {
            (Some(h), _) => h * 1e-3,
            (None, Some(d)) => {
                waveguide::find_field_for_detuning(&m, mhz(d)).at(|| format!("field calibration to detuning {d} MHz"))?
            }
            _ => unreachable!("validated field spec"),
        };
        out.result("field_mt", h * 1e3);
        Ok(m.with_field(h))
    }

    fn bar(&self, out: &mut Outputs) -> CliResult<(BarSystem, BarSpectrum)> {
        let g = &self.cfg.geometry;
        let l = g.l_nm.expect("validated bar length");
        let model = BarModel::new(g.d_nm * 1e-9, g.w_nm * 1e-9, l * 1e-9, self.material, self.constants, self.n_trunc)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if model.aspect_warning() {
            out.warn("bar shorter than 5·max(d, w): thin-bar picture is marginal");
        }
        let sys = BarSystem::new(model);
        let f = &self.cfg.field;
        let p = self.cfg.mode_p();
        let h = if let Some(h) = f.fixed_mt {
            h * 1e-3
        } else if let Some(d) = f.detuning_mhz {
            sys.find_detuned_field(p, mhz(d)).at(|| format!("field calibration of mode p = {p} to detuning {d} MHz"))?
        } else {
            let q = f.resonance_p.expect("validated field spec");
            sys.find_resonant_field(q).at(|| format!("resonance calibration of mode p = {q}"))?
        };
        let spec = sys.spectrum(h).at(|| format!("bar spectrum at {} mT", h * 1e3))?;
        out.result("field_mt", h * 1e3);
        Ok((sys, spec))
    }

    /// Couplings of both NVs and the mode frequency for the dynamics.
    fn protocol_inputs(&self, out: &mut Outputs) -> CliResult<(C64, C64, f64)> {
        let p = &self.cfg.protocol;
        let (g1, g2, omega) = match (p.coupling_khz, self.cfg.geometry.kind) {
            (Some(g), GeometryKind::Waveguide) => {
                let w = p.mode_ghz.ok_or_else(|| {
                    CliError::Config("protocol.mode_ghz is required with a waveguide geometry".into())
                })?;
                let g = 2.0 * PI * g * 1e3;
                (C64::new(g, 0.0), C64::new(-g, 0.0), 2.0 * PI * w * 1e9)
            }
            (None, GeometryKind::Waveguide) => {
                return Err(CliError::Config(
                    "protocol subcommands on a waveguide need protocol.coupling_khz and protocol.mode_ghz".into(),
                ))
            }
            (over, GeometryKind::Bar) => {
                let (sys, spec) = self.bar(out)?;
                let q = self.cfg.mode_p();
                let w = match p.mode_ghz {
                    Some(f) => 2.0 * PI * f * 1e9,
                    None => spec.omega(q).at(|| format!("mode p = {q}"))?,
                };
                if let Some(g) = over {
                    let g = 2.0 * PI * g * 1e3;
                    (C64::new(g, 0.0), C64::new(-g, 0.0), w)
                } else {
                    let (r1, r2) = (self.nv(0)?, self.nv(1)?);
                    let gs = sys
                        .coupling_map(&spec, q, &[r1, r2])
                        .at(|| format!("coupling of mode p = {q} at the NV positions"))?;
                    // mode phase chosen so that g1 is real
                    let ph = gs[0].conj() / gs[0].norm();
                    (gs[0] * ph, gs[1] * ph, w)
                }
            }
        };
        out.result("g1_khz", to_khz(g1.norm()));
        out.result("g2_khz", to_khz(g2.norm()));
        out.result("g2_phase_rad", g2.arg());
        out.result("mode_ghz", to_ghz(omega));
        Ok((g1, g2, omega))
    }

    fn open_model(&self, inp: (C64, C64, f64), t_mk: f64) -> CliResult<OpenSystemModel> {
        let (g1, g2, omega) = inp;
        let point = || format!("temperature {t_mk} mK");
        let n_th = thermal_occupation(&self.constants, omega, t_mk * 1e-3).at(point)?;
        let m = OpenSystemModel::new(g1, g2, omega, self.cfg.protocol.alpha, self.t2_star(), n_th).at(point)?;
        match self.fock_cutoff {
            Some(n) => m.with_cutoff(n).at(point),
            None => Ok(m),
        }
    }
}

fn outside(ctx: &Ctx, r: [f64; 3]) -> bool {
    !ctx.cfg.inside_magnet(r)
}

pub fn dispersion(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    ctx.require(GeometryKind::Waveguide, "dispersion")?;
    let m = ctx.waveguide(out)?;
    let s = &ctx.cfg.sweeps.k_per_um;
    let grid = waveguide::symmetric_log_grid(s.start * 1e6, s.stop * 1e6, s.points);
    let dc = waveguide::dispersion(&m, &grid).at(|| "dispersion grid".into())?;
    let r = ctx.nv(0)?;
    let g = dc
        .k
        .par_iter()
        .map(|&k| m.coupling_g((r[0], r[1]), k).map(|z| z.norm()).at(|| format!("coupling at k = {k:e} 1/m")))
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = (0..dc.k.len())
        .map(|i| vec![dc.k[i] * 1e-6, to_ghz(dc.omega[i]), to_ghz(dc.a_k[i]), to_ghz(dc.b_k[i]), g[i]])
        .collect();
    out.csv(
        "dispersion.csv",
        &["k_per_um", "freq_ghz", "a_ghz", "b_ghz", "g_nv1_dimless"],
        &rows,
    )?;
    out.result("k_min_per_um", dc.k_min * 1e-6);
    out.result("f_min_ghz", to_ghz(dc.omega_min));
    out.result("detuning_mhz", to_mhz(dc.omega_min - m.omega_nv()));
    Ok(())
}

pub fn coupling_map(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    let s = &ctx.cfg.sweeps;
    match ctx.cfg.geometry.kind {
        GeometryKind::Bar => {
            let (sys, spec) = ctx.bar(out)?;
            let p = ctx.cfg.mode_p();
            let w = spec.omega(p).at(|| format!("mode p = {p}"))?;
            let y = ctx.cfg.nv.positions_nm[0][1];
            let pts: Vec<[f64; 3]> = s
                .map_x_nm
                .linear()
                .into_iter()
                .flat_map(|x| s.map_z_nm.linear().into_iter().map(move |z| [x, y, z]))
                .filter(|&r| outside(ctx, r))
                .collect();
            let si: Vec<[f64; 3]> = pts.iter().map(|&r| nm(r)).collect();
            let g = sys.coupling_map(&spec, p, &si).at(|| format!("coupling map of mode p = {p}"))?;
            let (alpha, t2) = (ctx.cfg.protocol.alpha, ctx.t2_star());
            let rows: Vec<Vec<f64>> = pts
                .iter()
                .zip(&g)
                .map(|(r, g)| vec![r[0], r[1], r[2], to_khz(g.norm()), bar::cooperativity(g.norm(), w, alpha, t2)])
                .collect();
            let best = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
            out.csv(
                "coupling_map.csv",
                &["x_nm", "y_nm", "z_nm", "g_khz", "cooperativity_dimless"],
                &rows,
            )?;
            out.result("max_cooperativity", best);
        }
        GeometryKind::Waveguide => {
            let m = ctx.waveguide(out)?;
            let (_, k_min) = m.band_minimum().at(|| "band minimum".into())?;
            let pts: Vec<[f64; 3]> = s
                .map_x_nm
                .linear()
                .into_iter()
                .flat_map(|x| s.map_y_nm.linear().into_iter().map(move |y| [x, y, 0.0]))
                .filter(|&r| outside(ctx, r))
                .collect();
            let g = pts
                .par_iter()
                .map(|r| {
                    m.coupling_g((r[0] * 1e-9, r[1] * 1e-9), k_min)
                        .map(|z| z.norm())
                        .at(|| format!("coupling at x = {} nm, y = {} nm", r[0], r[1]))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let rows: Vec<Vec<f64>> = pts.iter().zip(&g).map(|(r, g)| vec![r[0], r[1], *g]).collect();
            out.csv("coupling_map.csv", &["x_nm", "y_nm", "g_kmin_dimless"], &rows)?;
            out.result("k_min_per_um", k_min * 1e-6);
        }
    }
    Ok(())
}

pub fn geff_sweep(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    let dz = ctx.cfg.sweeps.dz_um.linear();
    let t2 = ctx.t2_star();
    match ctx.cfg.geometry.kind {
        GeometryKind::Waveguide => {
            let m = ctx.waveguide(out)?;
            let r = ctx.nv(0)?;
            let dz_max = dz.iter().fold(0.0f64, |a, &b| a.max(b.abs())) * 1e-6;
            let spec = KGridSpec { dz_max: dz_max.max(1e-7), ..Default::default() };
            let kern = CouplingKernel::build(&m, (r[0], r[1]), spec).at(|| "coupling kernel".into())?;
            let det = kern.detuning();
            let gk = kern.g_kmin.norm();
            let mut rows = Vec::with_capacity(dz.len());
            for &z in &dz {
                let num = kern.g_eff(z * 1e-6);
                let ana = waveguide::analytic_geff(&m, gk, kern.k_min, z * 1e-6, det)
                    .at(|| format!("analytic coupling at dz = {z} um"))?;
                rows.push(vec![z, to_khz(num), to_khz(ana), waveguide::er_gdr(num, t2).1]);
            }
            out.csv(
                "geff_sweep.csv",
                &["dz_um", "geff_numeric_khz", "geff_analytic_khz", "gdr_dimless"],
                &rows,
            )?;
            let v = kern.validity();
            out.result("detuning_mhz", to_mhz(det));
            out.result("g_kmin", gk);
            out.result("validity", v);
            if v > 0.1 {
                out.warn(format!("perturbative validity parameter {v:.3e} exceeds 0.1"));
            }
            if let Some(l) = ctx.cfg.geometry.l_nm {
                let (gbar, ceq) = waveguide::equivalent_cooperativity(
                    &m,
                    gk,
                    kern.omega_min,
                    l * 1e-9,
                    ctx.cfg.protocol.alpha,
                    t2,
                )
                .at(|| format!("equivalent cooperativity at l = {l} nm"))?;
                out.result("gbar_khz", to_khz(gbar));
                out.result("equivalent_cooperativity", ceq);
            }
        }
        GeometryKind::Bar => {
            let (sys, spec) = ctx.bar(out)?;
            let p = ctx.cfg.mode_p();
            let r1 = ctx.nv(0)?;
            let pts: Vec<[f64; 3]> = dz.iter().map(|&z| [r1[0], r1[1], r1[2] + z * 1e-6]).collect();
            let mut all = vec![r1];
            all.extend(&pts);
            let g = sys.coupling_map(&spec, p, &all).at(|| format!("coupling of mode p = {p}"))?;
            let dw = mhz(ctx.cfg.protocol.delta_f_mhz);
            let mut rows = Vec::with_capacity(dz.len());
            let mut warned = false;
            for (i, &z) in dz.iter().enumerate() {
                let (ge, warn) = bar::bar_geff(g[0], g[i + 1], dw).at(|| format!("dispersive coupling at dz = {z} um"))?;
                warned |= warn;
                let gdr = 4.0 * ge.norm() * t2 / PI;
                rows.push(vec![z, pts[i][2] * 1e9, to_khz(g[i + 1].norm()), to_khz(ge.norm()), gdr]);
            }
            if warned {
                out.warn("dispersive condition |g| ≪ Δω is marginal for some points");
            }
            out.csv("geff_sweep.csv", &["dz_um", "z2_nm", "g2_khz", "geff_khz", "gdr_dimless"], &rows)?;
            out.result("g1_khz", to_khz(g[0].norm()));
        }
    }
    Ok(())
}

pub fn bar_modes(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    ctx.require(GeometryKind::Bar, "bar-modes")?;
    let (sys, spec) = ctx.bar(out)?;
    let fields = ctx.cfg.sweeps.field_mt.linear();
    let spectra = fields
        .par_iter()
        .map(|&h| sys.spectrum(h * 1e-3).at(|| format!("bar spectrum at {h} mT")))
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    let mut err = None;
    for (h, s) in fields.iter().zip(spectra) {
        match s {
            Ok(s) => {
                for (j, (&w, &p)) in s.frequencies.iter().zip(&s.labels).enumerate() {
                    rows.push(vec![*h, j as f64, p as f64, to_ghz(w)]);
                }
            }
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    out.csv(
        "bar_modes_sweep.csv",
        &["field_mt", "mode_index_dimless", "label_p_dimless", "freq_ghz"],
        &rows,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let r = ctx.nv(0)?;
    let cs = sys.coupling(&spec, r).at(|| format!("coupling at {r:?} m"))?;
    let (alpha, t2) = (ctx.cfg.protocol.alpha, ctx.t2_star());
    let rows: Vec<Vec<f64>> = (0..spec.frequencies.len())
        .map(|j| {
            let w = spec.frequencies[j];
            let gl = cs.g_lower[j].norm();
            vec![
                spec.labels[j] as f64,
                to_ghz(w),
                to_khz(gl),
                to_khz(cs.g_upper[j].norm()),
                bar::cooperativity(gl, w, alpha, t2),
            ]
        })
        .collect();
    out.csv(
        "bar_modes.csv",
        &["label_p_dimless", "freq_ghz", "g_lower_khz", "g_upper_khz", "cooperativity_dimless"],
        &rows,
    )?;
    let p = ctx.cfg.mode_p();
    let w = spec.omega(p).at(|| format!("mode p = {p}"))?;
    out.result("mode_p", p);
    out.result("mode_ghz", to_ghz(w));
    out.result("nv_ghz", to_ghz(ctx.constants.omega_nv(spec.field)));
    if let Some(j) = spec.mode(p) {
        if j > 0 {
            out.result("spacing_below_mhz", to_mhz(w - spec.frequencies[j - 1]));
        }
        if j + 1 < spec.frequencies.len() {
            out.result("spacing_above_mhz", to_mhz(spec.frequencies[j + 1] - w));
        }
    }
    Ok(())
}

fn idle_mode(ctx: &Ctx) -> IdleMode {
    match ctx.cfg.protocol.idle_mhz {
        x if x == 0.0 => IdleMode::Decoupled,
        x => IdleMode::Detuned(mhz(x)),
    }
}

fn trace_rows(tr: &SimulationTrace) -> Vec<Vec<f64>> {
    (0..tr.len())
        .map(|i| {
            vec![
                tr.times[i] * 1e6,
                tr.p1e[i],
                tr.p2e[i],
                tr.n_mean[i],
                tr.negativity_norm[i],
                tr.chsh[i],
                tr.fidelity[i],
                tr.fidelity_phase_max[i],
            ]
        })
        .collect()
}

const TRACE_COLUMNS: [&str; 8] = [
    "t_us",
    "p1e_dimless",
    "p2e_dimless",
    "n_mean_dimless",
    "negativity_norm_dimless",
    "chsh_dimless",
    "fidelity_dimless",
    "fidelity_phase_max_dimless",
];

struct TempRun {
    n_th: f64,
    n_max: usize,
    transduction: Option<(SimulationTrace, ProtocolPeak)>,
    virtual_: Option<(SimulationTrace, ProtocolPeak)>,
}

fn temp_tag(t: f64) -> String {
    format!("T{t}mK")
}

/// Keeps completed points, then reports the first failure.
fn split<T>(temps: &[f64], res: Vec<CliResult<T>>) -> (Vec<(f64, T)>, Option<CliError>) {
    let mut ok = Vec::new();
    let mut err = None;
    for (&t, r) in temps.iter().zip(res) {
        match r {
            Ok(v) => ok.push((t, v)),
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    (ok, err)
}

pub fn simulate(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    let inp = ctx.protocol_inputs(out)?;
    let p = &ctx.cfg.protocol;
    let s = &ctx.cfg.sweeps;
    let dw = mhz(p.delta_f_mhz);
    let idle = idle_mode(ctx);
    let n = s.trace_points;
    let temps = p.temperatures_mk.clone();
    let res: Vec<CliResult<TempRun>> = temps
        .par_iter()
        .map(|&t| {
            let m = ctx.open_model(inp, t)?;
            let point = || format!("temperature {t} mK");
            let transduction = if p.kind != ProtocolKind::Virtual {
                let tau = PI / (2.0 * m.g());
                let grid: Vec<f64> = (0..n).map(|i| tau * i as f64 / (n - 1) as f64).collect();
                let tr = run_transduction(&m, idle, &grid).at(point)?;
                let pk = transduction_peak(&m, idle, n).at(point)?;
                Some((tr, pk))
            } else {
                None
            };
            let virtual_ = if p.kind != ProtocolKind::Transduction {
                let geff = (m.g1 * m.g2).norm() / dw;
                let t_max = if s.t_max_us > 0.0 { s.t_max_us * 1e-6 } else { 2.0 * PI / (4.0 * geff) };
                let grid: Vec<f64> = (1..=n).map(|i| t_max * i as f64 / n as f64).collect();
                let tr = run_virtual_exchange(&m, dw, &grid).at(point)?;
                let pk = virtual_exchange_peak(&m, dw, Some(t_max)).at(point)?;
                Some((tr, pk))
            } else {
                None
            };
            Ok(TempRun { n_th: m.n_th, n_max: m.n_max, transduction, virtual_ })
        })
        .collect();
    let (ok, err) = split(&temps, res);
    let mut summary = Vec::new();
    for (t, run) in &ok {
        let mut row = vec![*t, run.n_th, run.n_max as f64];
        for (name, part) in [("transduction", &run.transduction), ("virtual", &run.virtual_)] {
            match part {
                Some((tr, pk)) => {
                    out.csv(&format!("simulate_{name}_{}.csv", temp_tag(*t)), &TRACE_COLUMNS, &trace_rows(tr))?;
                    row.extend([pk.fidelity, pk.time * 1e6, pk.negativity_norm]);
                }
                None => row.extend([f64::NAN; 3]),
            }
        }
        summary.push(row);
    }
    out.csv(
        "simulate_summary.csv",
        &[
            "temperature_mk",
            "n_thermal_dimless",
            "fock_cutoff_dimless",
            "transduction_peak_fidelity_dimless",
            "transduction_peak_time_us",
            "transduction_peak_negativity_dimless",
            "virtual_peak_fidelity_dimless",
            "virtual_peak_time_us",
            "virtual_peak_negativity_dimless",
        ],
        &summary,
    )?;
    err.map_or(Ok(()), Err)
}

pub fn gate_fidelity(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    let inp = ctx.protocol_inputs(out)?;
    let dw = mhz(ctx.cfg.protocol.delta_f_mhz);
    let temps = ctx.cfg.protocol.temperatures_mk.clone();
    let res: Vec<CliResult<_>> = temps
        .par_iter()
        .map(|&t| {
            let m = ctx.open_model(inp, t)?;
            let g = average_gate_fidelity(&m, dw).at(|| format!("temperature {t} mK"))?;
            Ok((m.n_th, m.n_max, g))
        })
        .collect();
    let (ok, err) = split(&temps, res);
    let rows: Vec<Vec<f64>> = ok
        .iter()
        .map(|(t, (n_th, n_max, g))| vec![*t, *n_th, *n_max as f64, g.tau * 1e6, g.at_tau, g.peak, g.peak_time * 1e6])
        .collect();
    out.csv(
        "gate_fidelity.csv",
        &[
            "temperature_mk",
            "n_thermal_dimless",
            "fock_cutoff_dimless",
            "gate_time_us",
            "fidelity_at_gate_time_dimless",
            "fidelity_peak_dimless",
            "peak_time_us",
        ],
        &rows,
    )?;
    err.map_or(Ok(()), Err)
}

pub fn phase_diagram(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    let (g1, _, omega) = ctx.protocol_inputs(out)?;
    let g = g1.norm();
    let dw = mhz(ctx.cfg.protocol.delta_f_mhz);
    let s = &ctx.cfg.sweeps;
    let cmp = Comparison { g, omega, delta_omega: dw };
    let cells: Vec<(f64, f64)> = s
        .alpha
        .geometric()
        .into_iter()
        .flat_map(|a| s.gamma2_per_s.geometric().into_iter().map(move |b| (a, b)))
        .collect();
    let res: Vec<CliResult<Vec<f64>>> = cells
        .par_iter()
        .map(|&(a, b)| {
            let point = || format!("alpha = {a:e}, gamma2 = {b:e} 1/s");
            let on = cmp.onres(a, b).at(point)?;
            let off = cmp.offres(a, b).at(point)?;
            Ok(vec![a, b, on, off, if on > off { 1.0 } else { 0.0 }])
        })
        .collect();
    let mut rows = Vec::new();
    let mut err = None;
    for r in res {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    out.csv(
        "phase_diagram.csv",
        &["alpha_dimless", "gamma2_per_s", "fid_onres_dimless", "fid_offres_dimless", "onres_wins_dimless"],
        &rows,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let k = s.boundary_points;
    let gam: Vec<f64> = (1..=k).map(|i| s.boundary_gamma2_over_g_max * g * i as f64 / k as f64).collect();
    let boundary = gam
        .par_iter()
        .map(|&b| Ok((b, cmp.boundary_alpha(b, 1e-11, 1e-4).at(|| format!("boundary at gamma2 = {b:e} 1/s"))?)))
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = boundary
        .iter()
        .map(|&(b, a)| vec![b, a, b / g, a * omega / g])
        .collect();
    out.csv(
        "phase_boundary.csv",
        &["gamma2_per_s", "alpha_dimless", "gamma2_over_g_dimless", "alpha_omega_over_g_dimless"],
        &rows,
    )?;
    if rows.len() >= 2 {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[2], r[3])).collect();
        let (slope, offset) = linear_fit(&pts).at(|| "boundary fit".into())?;
        out.result("boundary_slope", slope);
        out.result("boundary_offset", offset);
    }
    out.result("delta_over_g", dw / g);
    out.result("asymptotic_slope", asymptotic_slope(dw / g));
    out.result("crossover_alpha_estimate", crossover_alpha(dw / g, omega, ctx.t2_star()));
    Ok(())
}

pub fn decoherence(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    ctx.require(GeometryKind::Bar, "decoherence")?;
    let (sys, spec) = ctx.bar(out)?;
    let p = ctx.cfg.mode_p();
    let r = ctx.nv(0)?;
    let cs = sys.coupling(&spec, r).at(|| format!("coupling at {r:?} m"))?;
    let alpha = ctx.cfg.protocol.alpha;
    let c = &ctx.constants;
    let omega_nv = c.omega_nv(spec.field);
    let omega_min = spec.frequencies[0];
    let temps = ctx.cfg.protocol.temperatures_mk.clone();
    let res: Vec<CliResult<Vec<f64>>> = temps
        .par_iter()
        .map(|&t_mk| {
            let t = t_mk * 1e-3;
            let point = || format!("temperature {t_mk} mK");
            let ho = bar::dephasing_higher_order(&sys.model, omega_min, r, t, alpha).at(point)?;
            let st = bar::dephasing_stark(&cs, &spec, omega_nv, c.boltzmann_over_hbar, t, alpha, Some(p)).at(point)?;
            let lo = bar::t1_decay_rates(&cs, &spec, Transition::Lower, &sys.model, t, alpha, Some(p)).at(point)?;
            let up = bar::t1_decay_rates(&cs, &spec, Transition::Upper, &sys.model, t, alpha, None).at(point)?;
            let tau2 = 1.0 / (ho.tau2_gaussian.powi(-2) + st.tau2_gaussian.powi(-2)).sqrt();
            let t2 = 1.0 / (1.0 / ho.t2_lorentzian + 1.0 / st.t2_lorentzian);
            Ok(vec![
                t_mk,
                ho.tau2_gaussian * 1e6,
                ho.t2_lorentzian * 1e6,
                st.tau2_gaussian * 1e6,
                st.t2_lorentzian * 1e6,
                tau2 * 1e6,
                t2 * 1e6,
                1e6 / (lo.0 + lo.1),
                1e6 / (up.0 + up.1),
            ])
        })
        .collect();
    let (ok, err) = split(&temps, res);
    let rows: Vec<Vec<f64>> = ok.into_iter().map(|(_, r)| r).collect();
    out.csv(
        "decoherence.csv",
        &[
            "temperature_mk",
            "tau2_higher_order_us",
            "t2_higher_order_us",
            "tau2_stark_us",
            "t2_stark_us",
            "tau2_combined_us",
            "t2_combined_us",
            "t1_lower_us",
            "t1_upper_us",
        ],
        &rows,
    )?;
    err.map_or(Ok(()), Err)
}
