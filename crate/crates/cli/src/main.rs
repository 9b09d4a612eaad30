//! `nvmagnon`: configuration-driven scenario runner.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use nvmagnon::lindblad::{POSITIVITY_FLOOR, TAIL_BOUND, TRACE_TOL};
use nvmagnon::Quadrature;
use serde_json::json;

use commands::{CliError, CliResult, Ctx};
use config::ScenarioConfig;
use output::{sha256_hex, Outputs};

const DEFAULT_N_TRUNC: usize = 40;

#[derive(Parser, Debug)]
#[command(name = "nvmagnon", version, about = "Magnon spectra, NV couplings and two-qubit protocol dynamics")]
struct Cli {
    /// Scenario file (TOML). Defaults to the built-in bar scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parameter sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Relative tolerance of the adaptive waveguide quadrature.
    #[arg(long, global = true)]
    quad_rtol: Option<f64>,
    /// Bar mode truncation N (modes p = 0..=N).
    #[arg(long, global = true)]
    n_trunc: Option<usize>,
    /// Fixed Fock cutoff for the magnon mode instead of the automatic one.
    #[arg(long, global = true)]
    fock_cutoff: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write the default scenario to --config (or stdout).
    ConfigInit,
    /// Waveguide dispersion with the NV coupling overlay.
    Dispersion,
    /// Spatial map of the NV coupling.
    CouplingMap,
    /// Effective NV-NV coupling against separation.
    GeffSweep,
    /// Bar normal modes against field and at the working point.
    BarModes,
    /// Protocol traces at each temperature.
    Simulate,
    /// Average √iSWAP gate fidelity at each temperature.
    GateFidelity,
    /// Protocol winner map and boundary fit.
    PhaseDiagram,
    /// Magnon-induced dephasing and relaxation estimates.
    Decoherence,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ConfigInit => "config-init",
            Command::Dispersion => "dispersion",
            Command::CouplingMap => "coupling-map",
            Command::GeffSweep => "geff-sweep",
            Command::BarModes => "bar-modes",
            Command::Simulate => "simulate",
            Command::GateFidelity => "gate-fidelity",
            Command::PhaseDiagram => "phase-diagram",
            Command::Decoherence => "decoherence",
        }
    }
}

fn config_init(cli: &Cli) -> CliResult<()> {
    let text = ScenarioConfig::default_bar().to_toml();
    match &cli.config {
        Some(p) if p.exists() => Err(CliError::Config(format!("{} already exists", p.display()))),
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(cli: &Cli) -> CliResult<ScenarioConfig> {
    let cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            ScenarioConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => ScenarioConfig::default_bar(),
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
    }
    if let Some(r) = cli.quad_rtol {
        if !(r.is_finite() && r > 0.0 && r < 1.0) {
            return Err(CliError::Config("--quad-rtol must lie in (0, 1)".into()));
        }
    }
    if let Some(n) = cli.n_trunc {
        if n < 10 {
            return Err(CliError::Config("--n-trunc must be at least 10".into()));
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli, ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    match cli.command {
        Command::ConfigInit => unreachable!(),
        Command::Dispersion => commands::dispersion(ctx, out),
        Command::CouplingMap => commands::coupling_map(ctx, out),
        Command::GeffSweep => commands::geff_sweep(ctx, out),
        Command::BarModes => commands::bar_modes(ctx, out),
        Command::Simulate => commands::simulate(ctx, out),
        Command::GateFidelity => commands::gate_fidelity(ctx, out),
        Command::PhaseDiagram => commands::phase_diagram(ctx, out),
        Command::Decoherence => commands::decoherence(ctx, out),
    }
}

fn manifest(cli: &Cli, ctx: &Ctx, out: &Outputs, status: &CliResult<()>) -> serde_json::Value {
    let overrides = json!({
        "jobs": cli.jobs,
        "quad_rtol": cli.quad_rtol,
        "n_trunc": cli.n_trunc,
        "fock_cutoff": cli.fock_cutoff,
    });
    let canonical = format!("{}\n{}", ctx.cfg.to_toml(), overrides);
    let quad = Quadrature::hamiltonian();
    let status = match status {
        Ok(()) => json!({ "ok": true }),
        Err(CliError::Physics { point, source }) => {
            json!({ "ok": false, "kind": "physics", "point": point, "message": source.to_string() })
        }
        Err(e) => json!({ "ok": false, "kind": "other", "message": e.to_string() }),
    };
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({
        "tool": "nvmagnon",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "overrides": overrides,
        "constants": {
            "config": ctx.cfg.constants,
            "material": ctx.cfg.material,
            "gamma_rad_per_s_t": ctx.constants.gamma,
            "boltzmann_over_hbar_rad_per_s_k": ctx.constants.boltzmann_over_hbar,
            "d_nv_rad_per_s": ctx.constants.d_nv,
            "mu0_ms_t": ctx.material.mu0_ms,
            "d_ex_rad_m2_per_s": ctx.material.d_ex,
            "alpha": ctx.material.alpha,
        },
        "tolerances": {
            "quad_rel_tol": ctx.quad_rtol.unwrap_or(quad.rel_tol),
            "quad_abs_tol": quad.abs_tol,
            "quad_max_subdivisions": quad.max_subdivisions,
            "trace_tol": TRACE_TOL,
            "positivity_floor": POSITIVITY_FLOOR,
            "fock_tail_bound": TAIL_BOUND,
        },
        "truncation": {
            "bar_n_trunc": ctx.n_trunc,
            "fock_cutoff": ctx.fock_cutoff.map_or(json!("auto"), |n| json!(n)),
        },
        "timestamp_unix_s": stamp,
        "outputs": out.files,
        "results": out.results,
        "warnings": out.warnings,
        "status": status,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::ConfigInit = cli.command {
        return match config_init(&cli) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("could not size the worker pool: {e}");
        }
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let ctx = Ctx::new(cfg, cli.n_trunc.unwrap_or(DEFAULT_N_TRUNC), cli.quad_rtol, cli.fock_cutoff);
    let mut out = match Outputs::new(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    };
    let status = run(&cli, &ctx, &mut out);
    let name = format!("{}_manifest.json", cli.command.name().replace('-', "_"));
    let text = serde_json::to_string_pretty(&manifest(&cli, &ctx, &out, &status)).expect("manifest serializes");
    if let Err(e) = fs::write(dir.join(&name), text) {
        eprintln!("cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match status {
        Ok(()) => {
            println!("{}: wrote {} file(s) and {name} to {}", cli.command.name(), out.files.len(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
