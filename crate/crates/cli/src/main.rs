//! Command line front end for the constrained-dynamics engine: parse a
//! Lagrangian, run the constraint analysis, and emit analysis reports,
//! numeric cross-checks, or time evolutions with conservation monitors.

use std::fs;
use std::io::IsTerminal;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dba_core::corpus;
use dba_core::dba::{
    analyze, report_json, report_latex, report_plain, Analysis, AnalysisOptions, DbaError,
};
use dba_core::numerics::{
    check_eom_equivalence, sech_bump, sech_squared_bump, EvolutionSystem, EvolveOptions, Grid,
    NumericsError,
};
use dba_core::parser::parse;

/// Exit status: success and verified closure.
const EXIT_OK: u8 = 0;
/// Parse failures and general runtime errors.
const EXIT_ERROR: u8 = 1;
/// The consistency sweep budget ran out before the algorithm closed.
const EXIT_NO_CLOSURE: u8 = 2;
/// A consistency condition demands a nonzero quantity vanish.
const EXIT_INCONSISTENT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dba",
    version,
    about = "Constraint analysis of field Lagrangians linear in velocities",
    after_help = "Inputs are built-in names (see `dba examples`) or paths to .lag files.\n\
                  Set DBA_COLOR=0 to disable colored output."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the constraint analysis and print a report
    Analyze(AnalyzeArgs),
    /// Cross-check the Hamilton equations against the Lagrangian numerically
    Verify(VerifyArgs),
    /// Integrate the closed equations and emit conservation monitors as CSV
    Evolve(EvolveArgs),
    /// Print the built-in example Lagrangians
    Examples,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Plain,
    Latex,
    Json,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Built-in name or path to a Lagrangian file
    input: String,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    format: Format,
    /// Budget of consistency sweeps before giving up
    #[arg(long, default_value_t = 10)]
    max_iterations: u32,
}

#[derive(Args)]
struct VerifyArgs {
    /// Built-in name or path to a Lagrangian file
    input: String,
    /// Grid size (a power of two, at least 16)
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Seed for the random field configurations
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Pass threshold on the worst relative residual
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Budget of consistency sweeps before giving up
    #[arg(long, default_value_t = 10)]
    max_iterations: u32,
}

#[derive(Args)]
struct EvolveArgs {
    /// Built-in name or path to a Lagrangian file
    input: String,
    /// Grid size (a power of two, at least 16)
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Time step
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Integration horizon
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Seed echoed in the output header (the run itself is deterministic)
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Budget of consistency sweeps before giving up
    #[arg(long, default_value_t = 10)]
    max_iterations: u32,
}

/// ANSI styling, enabled only on a terminal and unless DBA_COLOR=0.
#[derive(Clone, Copy)]
struct Style {
    on: bool,
}

impl Style {
    fn detect() -> Style {
        let disabled = std::env::var("DBA_COLOR").is_ok_and(|v| v == "0");
        Style { on: std::io::stdout().is_terminal() && !disabled }
    }

    fn paint(&self, code: &str, text: &str) -> String {
        if self.on {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    fn head(&self, text: &str) -> String {
        self.paint("36", text)
    }

    fn pass(&self) -> String {
        self.paint("32;1", "PASS")
    }

    fn fail(&self) -> String {
        self.paint("31;1", "FAIL")
    }
}

fn fail(msg: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn exit_code_for(e: &DbaError) -> u8 {
    match e {
        DbaError::NoClosure { .. } => EXIT_NO_CLOSURE,
        DbaError::InconsistentDynamics { .. } => EXIT_INCONSISTENT,
        _ => EXIT_ERROR,
    }
}

/// Resolve a built-in name or read a file; returns a display name and the
/// source text.
fn load(input: &str) -> Result<(String, String), String> {
    if let Some(src) = corpus::builtin(input) {
        return Ok((input.to_string(), src.to_string()));
    }
    match fs::read_to_string(input) {
        Ok(src) => Ok((input.to_string(), src)),
        Err(e) => Err(format!(
            "cannot read `{input}`: {e} (built-in systems: {})",
            corpus::BUILTINS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        )),
    }
}

fn run_analysis(source: &str, max_iterations: u32) -> Result<Analysis, (String, u8)> {
    let spec = parse(source).map_err(|e| (e.to_string(), EXIT_ERROR))?;
    analyze(&spec, &AnalysisOptions { max_iterations })
        .map_err(|e| (e.to_string(), exit_code_for(&e)))
}

fn cmd_analyze(args: &AnalyzeArgs) -> ExitCode {
    let (_, source) = match load(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_ERROR),
    };
    let analysis = match run_analysis(&source, args.max_iterations) {
        Ok(a) => a,
        Err((msg, code)) => return fail(msg, code),
    };
    let rendered = match args.format {
        Format::Plain => report_plain(&analysis),
        Format::Latex => report_latex(&analysis),
        Format::Json => {
            report_json(&analysis).map(|v| serde_json::to_string_pretty(&v).expect("valid JSON"))
        }
    };
    match rendered {
        Ok(text) => {
            println!("{text}");
            ExitCode::from(EXIT_OK)
        }
        Err(e) => fail(e, EXIT_ERROR),
    }
}

fn cmd_verify(args: &VerifyArgs) -> ExitCode {
    let style = Style::detect();
    let (name, source) = match load(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_ERROR),
    };
    let analysis = match run_analysis(&source, args.max_iterations) {
        Ok(a) => a,
        Err((msg, code)) => return fail(msg, code),
    };
    let grid = match Grid::new(args.grid, 40.0) {
        Ok(g) => g,
        Err(e) => return fail(e, EXIT_ERROR),
    };
    println!("{}", style.head(&format!("# verify {name}")));
    println!("# grid = {} points, domain length 40", args.grid);
    println!("# seed = {}", args.seed);
    let report = match check_eom_equivalence(&analysis, &grid, 20, args.seed) {
        Ok(r) => r,
        Err(e) => return fail(e, EXIT_ERROR),
    };
    for note in &report.notes {
        println!("# note: {note}");
    }
    for (eq, err) in &report.per_equation {
        println!("{eq}: max relative error {err:.3e}");
    }
    println!(
        "max relative error = {:.3e} (tolerance {:.1e}) over {} samples",
        report.max_rel_error, args.tol, report.samples
    );
    if report.max_rel_error < args.tol {
        println!("{}", style.pass());
        ExitCode::from(EXIT_OK)
    } else {
        println!("{}", style.fail());
        ExitCode::from(EXIT_ERROR)
    }
}

/// Initial profiles for the built-in systems; anything else gets a generic
/// localized bump, lifted onto a positive background when the field must
/// stay away from zero.
fn initial_data(
    name: &str,
    analysis: &Analysis,
    sys: &EvolutionSystem,
    grid: &Grid,
) -> Vec<(String, Vec<f64>)> {
    let center = grid.length() / 2.0;
    match name {
        "cubic-nls" => vec![
            ("phi".to_string(), sech_bump(grid, 1.0, 1.0, center)),
            ("theta".to_string(), vec![0.0; grid.n()]),
        ],
        "log-nls" => {
            let phi =
                sech_bump(grid, 0.5, 1.0, center).into_iter().map(|v| 1.0 + v).collect();
            vec![("phi".to_string(), phi), ("theta".to_string(), vec![0.0; grid.n()])]
        }
        "kdv" => {
            vec![("phi_x".to_string(), sech_squared_bump(grid, 2.0, 1.0, 12.5))]
        }
        _ => sys
            .variables()
            .into_iter()
            .map(|(var, field, _)| {
                let positive = analysis.assumptions.iter().any(|a| *a == field);
                let bump = sech_bump(grid, if positive { 0.5 } else { 1.0 }, 1.0, center);
                let arr = if positive {
                    bump.into_iter().map(|v| 1.0 + v).collect()
                } else {
                    bump
                };
                (var, arr)
            })
            .collect(),
    }
}

fn cmd_evolve(args: &EvolveArgs) -> ExitCode {
    let style = Style::detect();
    let (name, source) = match load(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_ERROR),
    };
    let analysis = match run_analysis(&source, args.max_iterations) {
        Ok(a) => a,
        Err((msg, code)) => return fail(msg, code),
    };
    let grid = match Grid::new(args.grid, 40.0) {
        Ok(g) => g,
        Err(e) => return fail(e, EXIT_ERROR),
    };
    let sys = match EvolutionSystem::build(&analysis, grid.clone()) {
        Ok(s) => s,
        Err(e) => return fail(e, EXIT_ERROR),
    };
    if args.dt <= 0.0 || args.t_end <= 0.0 || !args.dt.is_finite() || !args.t_end.is_finite() {
        return fail("dt and t-end must be positive", EXIT_ERROR);
    }
    let initial = initial_data(&name, &analysis, &sys, &grid);
    let opts = EvolveOptions { dt: args.dt, t_end: args.t_end, monitor_stride: 1 };

    println!("{}", style.head(&format!("# evolve {name}")));
    println!(
        "# grid = {} points, domain length 40, dt = {}, t_end = {}",
        args.grid, args.dt, args.t_end
    );
    println!("# seed = {}", args.seed);
    println!("# variables: {}", sys.var_names().join(", "));
    match sys.run(&initial, &opts) {
        Ok(traj) => {
            println!("t,mass,hamiltonian");
            for i in 0..traj.times.len() {
                println!(
                    "{:.9},{:.12e},{:.12e}",
                    traj.times[i], traj.mass[i], traj.hamiltonian[i]
                );
            }
            println!("# max_rel_mass_drift = {:.6e}", traj.max_rel_mass_drift());
            println!(
                "# max_rel_hamiltonian_drift = {:.6e}",
                traj.max_rel_hamiltonian_drift()
            );
            for (var, arr) in &traj.final_state {
                let peak =
                    arr.iter().enumerate().max_by(|a, b| {
                        a.1.abs().partial_cmp(&b.1.abs()).expect("finite state")
                    });
                if let Some((i, _)) = peak {
                    println!("# final peak of {var} at x = {:.4}", i as f64 * grid.dx());
                }
            }
            ExitCode::from(EXIT_OK)
        }
        Err(NumericsError::Instability { time, detail }) => {
            let step = (time / args.dt).round() as u64;
            fail(
                format!("instability abort at step {step} (t = {time}): {detail}"),
                EXIT_ERROR,
            )
        }
        Err(e) => fail(e, EXIT_ERROR),
    }
}

fn cmd_examples() -> ExitCode {
    let style = Style::detect();
    for (name, source) in corpus::BUILTINS {
        println!("{}", style.head(&format!("## {name}")));
        print!("{source}");
        println!();
    }
    ExitCode::from(EXIT_OK)
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with the other parse errors; clap's
    // default of 2 would collide with the no-closure code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(EXIT_ERROR);
        }
        Err(e) => {
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
    };
    match &cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Examples => cmd_examples(),
    }
}
