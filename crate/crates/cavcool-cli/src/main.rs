//! `cavcool` — cavity-mediated laser cooling from the command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure,
//! 3 validity violation under `--strict`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cavcool::lindblad::{self, EvolveOptions, FockConfig};
use cavcool::scan::{self, Grid, LawBackend, SweepAxis, SweepSpec};
use cavcool::{
    cooling_law_closed, rateeq, resonance_catalogue, validate, CoolingLaw, CoolingStatus,
    Error as CoreError, SystemParams,
};

const EXIT_INVALID: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VALIDITY: u8 = 3;

/// Rabi frequencies below this (in units of Gamma) are degenerate: the
/// stationary state exists formally but is reached only after ~1/Omega^2.
const NO_DRIVE_EPS: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "cavcool",
    version,
    about = "Stationary phonon number and cooling rate of cavity-mediated laser cooling",
    after_help = "All rates and frequencies are in units of the atomic decay rate Gamma."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ParamArgs {
    /// JSON parameter file with keys {nu, delta, omega, kappa, gamma_atom, eta, g}
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Trap (phonon) frequency
    #[arg(long)]
    nu: Option<f64>,
    /// Atom-cavity detuning
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Laser Rabi frequency
    #[arg(long)]
    omega: Option<f64>,
    /// Cavity decay rate
    #[arg(long)]
    kappa: Option<f64>,
    /// Lamb-Dicke parameter
    #[arg(long)]
    eta: Option<f64>,
    /// Atom-cavity coupling
    #[arg(long)]
    g: Option<f64>,
    /// Exit 3 when eta*g is not small against max(|delta|, kappa, nu)
    #[arg(long)]
    strict: bool,
}

impl ParamArgs {
    fn resolve(&self) -> Result<SystemParams, CliError> {
        let mut p = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Invalid(format!("cannot read {}: {e}", path.display()))
                })?;
                SystemParams::from_json(&text)?
            }
            None => SystemParams::default(),
        };
        if let Some(v) = self.nu {
            p.nu = v;
        }
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if let Some(v) = self.omega {
            p.omega = v;
        }
        if let Some(v) = self.kappa {
            p.kappa = v;
        }
        if let Some(v) = self.eta {
            p.eta = v;
        }
        if let Some(v) = self.g {
            p.g = v;
        }
        p.check()?;
        if let Some(warning) = p.lamb_dicke_warning() {
            eprintln!("warning: {warning}");
        }
        if self.strict {
            let report = validate(&p);
            if !report.ok {
                return Err(CliError::Validity(format!(
                    "eta*g / max(|delta|, kappa, nu) = {:.4} >= {}",
                    report.ratio, report.threshold
                )));
            }
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Delta,
    Omega,
    Nu,
    Kappa,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Delta => SweepAxis::Delta,
            AxisArg::Omega => SweepAxis::Omega,
            AxisArg::Nu => SweepAxis::Nu,
            AxisArg::Kappa => SweepAxis::Kappa,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LawArg {
    Closed,
    Eliminated,
}

impl From<LawArg> for LawBackend {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Closed => LawBackend::Closed,
            LawArg::Eliminated => LawBackend::Eliminated,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the three cooling and three heating detunings
    Resonances {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Stationary phonon number from the effective cooling law
    Mss {
        #[command(flatten)]
        params: ParamArgs,
        /// Use numerical adiabatic elimination instead of the closed form
        #[arg(long)]
        eliminate: bool,
    },
    /// Effective cooling rate and source constant
    Coolrate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        eliminate: bool,
    },
    /// Sweep m_ss and gamma_c along one parameter axis (CSV)
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Grid as start:stop:step
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum, default_value = "closed")]
        law: LawArg,
        /// Also write the CSV to a file (identical to stdout)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Lindblad master-equation trajectory or steady state
    Oracle {
        #[command(flatten)]
        params: ParamArgs,
        /// Phonon truncation dimension
        #[arg(long, default_value_t = 6)]
        nb: usize,
        /// Cavity truncation dimension
        #[arg(long, default_value_t = 6)]
        nc: usize,
        /// Integration step (default 0.01 / omega_max)
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        tfinal: f64,
        /// Solve for the stationary state instead of integrating
        #[arg(long)]
        steady: bool,
        /// Start with this phonon Fock state (atom ground, cavity vacuum)
        #[arg(long, value_name = "N", conflicts_with = "init_thermal")]
        init_fock: Option<usize>,
        /// Start with a thermal phonon state of this mean occupation
        #[arg(long, value_name = "MEAN")]
        init_thermal: Option<f64>,
        /// Record every n-th step
        #[arg(long, default_value_t = 100)]
        sample: usize,
        /// Include the sixteen x_ijk coherence columns
        #[arg(long)]
        x_ops: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare the three cooling resonances delta_0, delta_-, delta_+
    Compare {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Check that eta*g is small against max(|delta|, kappa, nu)
    Validate {
        #[command(flatten)]
        params: ParamArgs,
    },
}

enum CliError {
    Invalid(String),
    Numerical(String),
    Validity(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Validity(_) => EXIT_VALIDITY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) | CliError::Validity(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParams(_)
            | CoreError::UndefinedStationaryState
            | CoreError::DivergentSidebandFormula
            | CoreError::StepTooLarge { .. }
            | CoreError::DimensionCap { .. } => CliError::Invalid(e.to_string()),
            CoreError::ResonancePole { .. }
            | CoreError::NoUniqueSteadyState
            | CoreError::EliminationSingular
            | CoreError::IntegrationUnstable { .. }
            | CoreError::SteadyStateNotFound(_)
            | CoreError::DegenerateSteadyState(_)
            | CoreError::Linalg(_) => CliError::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn cooling_law(p: &SystemParams, eliminate: bool) -> Result<CoolingLaw, CliError> {
    if p.omega < NO_DRIVE_EPS {
        return Err(CliError::Invalid(format!(
            "no drive: omega = {} is below {NO_DRIVE_EPS}; the cooling rate vanishes as omega^2 \
             and no stationary state is reached on any useful time scale",
            p.omega
        )));
    }
    let law = if eliminate {
        rateeq::eliminate(p)?
    } else {
        cooling_law_closed(p)
    };
    if law.status == CoolingStatus::NoDrive {
        return Err(CliError::Invalid("no drive: omega = 0".into()));
    }
    Ok(law)
}

fn print_law(law: &CoolingLaw) {
    println!("status  = {}", law.status);
    println!("gamma_c = {:e}", law.gamma_c);
    println!("c       = {:e}", law.c_source);
    match law.m_ss {
        Some(m) => println!("m_ss    = {m:e}"),
        None => println!("m_ss    = n/a (no cooling)"),
    }
}

/// Write the same bytes to stdout and, when requested, to a file.
fn emit(buffer: &[u8], out: Option<&PathBuf>) -> Result<(), CliError> {
    std::io::stdout()
        .write_all(buffer)
        .map_err(|e| CliError::Invalid(format!("stdout: {e}")))?;
    if let Some(path) = out {
        fs::write(path, buffer)
            .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<Grid, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Invalid(format!(
            "grid must be start:stop:step, got '{text}'"
        )));
    }
    let mut vals = [0.0; 3];
    for (v, part) in vals.iter_mut().zip(&parts) {
        *v = part
            .parse()
            .map_err(|e| CliError::Invalid(format!("grid component '{part}': {e}")))?;
    }
    Ok(Grid::Range { start: vals[0], stop: vals[1], step: vals[2] })
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Resonances { params } => {
            let p = params.resolve()?;
            let r = resonance_catalogue(p.nu, p.omega);
            println!(
                "cooling: delta_0 = {}, delta_- = {}, delta_+ = {}",
                r.cooling.center, r.cooling.minus, r.cooling.plus
            );
            println!(
                "heating: mu_0 = {}, mu_- = {}, mu_+ = {}",
                r.heating.center, r.heating.minus, r.heating.plus
            );
            Ok(())
        }
        Command::Mss { params, eliminate } | Command::Coolrate { params, eliminate } => {
            let p = params.resolve()?;
            let law = cooling_law(&p, eliminate)?;
            print_law(&law);
            Ok(())
        }
        Command::Sweep { params, axis, grid, law, out } => {
            let base = params.resolve()?;
            let spec = SweepSpec {
                axis: axis.into(),
                grid: parse_grid(&grid)?,
                base,
                law: law.into(),
            };
            let result = scan::sweep(&spec)?;
            let mut buffer = Vec::new();
            scan::write_csv(&spec, &result, &mut buffer)
                .map_err(|e| CliError::Invalid(format!("csv: {e}")))?;
            emit(&buffer, out.as_ref())?;
            for m in &result.minima {
                eprintln!("minimum: {} = {:.6}, m_ss = {:.6e}", spec.axis.name(), m.location, m.value);
            }
            Ok(())
        }
        Command::Oracle {
            params,
            nb,
            nc,
            dt,
            tfinal,
            steady,
            init_fock,
            init_thermal,
            sample,
            x_ops,
            out,
        } => {
            let p = params.resolve()?;
            let cfg = FockConfig::new(nb, nc);
            let model = lindblad::build_model(&p, &cfg)?;
            if steady {
                let rho = lindblad::steady_state(&model)?;
                let report = lindblad::truncation_check(&model, &rho);
                println!("m       = {:e}", lindblad::expectation(&model.num_phonon, &rho));
                println!("pop_e   = {:e}", lindblad::expectation(&model.pop_excited, &rho));
                println!("n_cav   = {:e}", lindblad::expectation(&model.num_cavity, &rho));
                println!(
                    "truncation: top_phonon = {:e}, top_cavity = {:e} -> {}",
                    report.top_phonon,
                    report.top_cavity,
                    if report.ok { "ok" } else { "FLAGGED (untrusted)" }
                );
                if !report.ok {
                    eprintln!("warning: truncation flagged; increase --nb/--nc");
                }
                return Ok(());
            }
            let rho0 = match init_thermal {
                Some(mean) => lindblad::thermal_phonon_state(&cfg, mean)?,
                None => lindblad::fock_state(&cfg, false, init_fock.unwrap_or(0), 0)?,
            };
            let dt = dt.unwrap_or(0.01 / p.omega_max());
            let records = lindblad::evolve(
                &model,
                &rho0,
                tfinal,
                dt,
                EvolveOptions { sample_stride: sample, record_coherences: x_ops },
            )?;
            let mut buffer = Vec::new();
            lindblad::write_trajectory_csv(&mut buffer, &records)
                .map_err(|e| CliError::Invalid(format!("csv: {e}")))?;
            emit(&buffer, out.as_ref())
        }
        Command::Compare { params } => {
            let p = params.resolve()?;
            if p.omega < NO_DRIVE_EPS {
                return Err(CliError::Invalid(
                    "no drive: the three resonances collapse and nothing cools".into(),
                ));
            }
            let cmp = scan::compare_resonances(&p)?;
            println!("{:<8} {:>12} {:>14} {:>14}  status", "", "delta", "m_ss", "gamma_c");
            for (label, delta, law) in &cmp.rows {
                let m = law
                    .m_ss
                    .map(|m| format!("{m:.6e}"))
                    .unwrap_or_else(|| "n/a".into());
                println!(
                    "{label:<8} {delta:>12.4} {m:>14} {:>14.6e}  {}",
                    law.gamma_c, law.status
                );
            }
            match cmp.best() {
                Some(best) => println!("best: {best}"),
                None => println!("best: none (all resonances heat)"),
            }
            Ok(())
        }
        Command::Validate { params } => {
            let strict = params.strict;
            // defer the strict check so the report prints first
            let p = ParamArgs { strict: false, ..params }.resolve()?;
            let report = validate(&p);
            println!("ratio     = {:e}", report.ratio);
            println!("threshold = {}", report.threshold);
            println!("ok        = {}", report.ok);
            if strict && !report.ok {
                return Err(CliError::Validity(format!(
                    "eta*g / max(|delta|, kappa, nu) = {:.4} >= {}",
                    report.ratio, report.threshold
                )));
            }
            Ok(())
        }
    }
}
