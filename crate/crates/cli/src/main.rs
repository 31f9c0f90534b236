use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phasemix_core::config::{parse_config, ProblemConfig};
use phasemix_core::driver::{run_optimization, RunOptions};
use phasemix_core::io::export_history;
use phasemix_core::phasefield::{critical_temperature, landau_a};
use phasemix_core::sensitivity::SensitivityVariant;
use phasemix_core::verify::{
    convergence_study, gradient_check, landau_transition_check, GradientCheckOptions, ManufacturedCase,
    LANDAU_REFERENCE,
};
use phasemix_core::{catalog, Error};

/// Phase-field topology optimization of microfluidic channels and mixers.
#[derive(Parser)]
#[command(name = "phasemix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimization loop for a config file or built-in example.
    Run(RunArgs),
    /// Inspect the built-in examples.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Independent verification checks.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Config path or built-in example name.
    config: String,
    /// Output directory (defaults to the config's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot every K iterations.
    #[arg(long, value_name = "K")]
    stride: Option<usize>,
    /// Fail when the Allen-Cahn clamp correction exceeds 1e-3.
    #[arg(long)]
    strict: bool,
    /// Override the mesh resolution.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    mesh: Option<Vec<usize>>,
    /// Override the number of outer iterations.
    #[arg(long, value_name = "N")]
    iterations: Option<usize>,
    /// Record wall-clock seconds in the history (otherwise zero, which
    /// keeps the file reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// Print the example names.
    List,
    /// Print an example's config document.
    Show { name: String },
    /// Write an example's config document to a file.
    Write { name: String, path: PathBuf },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Finite-difference check of the adjoint gradient.
    Gradient {
        config: String,
        #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
        mesh: Option<Vec<usize>>,
        #[arg(long, value_name = "K", default_value_t = 5)]
        dirs: usize,
        /// Print the FD value for every step size.
        #[arg(long)]
        eps_sweep: bool,
    },
    /// Single/double-well transition of the Landau density.
    Landau {
        #[arg(long = "T-over-Tc", value_name = "RATIO", num_args = 1.., default_values_t = [0.8, 1.2])]
        t_over_tc: Vec<f64>,
    },
    /// Manufactured-solution convergence study.
    Convergence {
        /// poisson_dirichlet, debye_huckel_strip, poiseuille_channel or plug_flow_transport
        case: String,
        #[arg(long, num_args = 1.., default_values_t = [8, 16, 32, 64])]
        sizes: Vec<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver(_) | Error::Singular { .. } | Error::NonConvergence { .. } => 2,
        _ => 1,
    }
}

fn load_config(arg: &str) -> Result<ProblemConfig, Error> {
    if let Some(doc) = catalog::document(arg) {
        return parse_config(doc);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| Error::Config(format!("cannot read config `{arg}`: {e}")))?;
    parse_config(&text)
}

fn apply_mesh(cfg: ProblemConfig, mesh: &Option<Vec<usize>>) -> ProblemConfig {
    match mesh.as_deref() {
        Some([nx, ny]) => cfg.with_mesh(*nx, *ny),
        _ => cfg,
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut cfg = apply_mesh(load_config(&args.config)?, &args.mesh);
    if let Some(n) = args.iterations {
        cfg.optim.iterations = n;
    }
    if args.strict {
        cfg.strict_clamp = true;
    }
    if let Some(k) = args.stride {
        cfg.snapshot_stride = k;
    }
    cfg.validate()?;
    let out = args.out.unwrap_or_else(|| cfg.output_dir.clone());
    let (problem, phi0) = cfg.build()?;
    log::info!(
        "{} nodes, {} triangles, {} iterations",
        problem.mesh.num_nodes(),
        problem.mesh.num_triangles(),
        cfg.optim.iterations
    );
    let opts = RunOptions { output: Some(out.clone()), snapshot_stride: cfg.snapshot_stride };
    let result = run_optimization(&problem, &phi0, &opts)?;
    let history = if args.timing { result.history.clone() } else { result.history.without_timing() };
    export_history(&history, &out.join("history.csv"))?;
    let volume = phasemix_core::sensitivity::solid_volume(&problem.mesh, &result.phi);
    println!(
        "finished {} iterations; final V = {:.6} (V0 = {}, |V - V0| = {:.3e}); output in {}",
        result.history.records.len(),
        volume,
        cfg.optim.v0,
        (volume - cfg.optim.v0).abs(),
        out.display()
    );
    Ok(())
}

fn catalog_cmd(cmd: CatalogCommand) -> Result<(), Error> {
    let doc = |name: &str| {
        catalog::document(name).ok_or_else(|| Error::Config(format!("unknown example `{name}`")))
    };
    match cmd {
        CatalogCommand::List => catalog::names().for_each(|n| println!("{n}")),
        CatalogCommand::Show { name } => print!("{}", doc(&name)?),
        CatalogCommand::Write { name, path } => std::fs::write(&path, doc(&name)?)?,
    }
    Ok(())
}

fn verify_cmd(cmd: VerifyCommand) -> Result<bool, Error> {
    match cmd {
        VerifyCommand::Gradient { config, mesh, dirs, eps_sweep } => {
            let cfg = apply_mesh(load_config(&config)?, &mesh);
            let (problem, phi) = cfg.build()?;
            let opts = GradientCheckOptions { directions: dirs, ..GradientCheckOptions::default() };
            let report = gradient_check(&problem, &phi, &opts)?;
            print!("{}", report.table());
            if eps_sweep {
                for d in &report.directions {
                    let cols: Vec<String> = d.sweep.iter().map(|(e, fd)| format!("{e:.0e}: {fd:.10e}")).collect();
                    println!("sweep {:>3}  {}", d.index, cols.join("  "));
                }
            }
            let name = |v: &SensitivityVariant| match v {
                SensitivityVariant::Consistent => "consistent",
                SensitivityVariant::AsPrinted => "as_printed",
            };
            let passing: Vec<&str> = report.passing.iter().map(name).collect();
            println!(
                "max relative error: consistent {:.2e}, as_printed {:.2e}; passing: {}",
                report.max_rel_consistent,
                report.max_rel_as_printed,
                if passing.is_empty() { "none".to_string() } else { passing.join(", ") }
            );
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
            Ok(report.pass)
        }
        VerifyCommand::Landau { t_over_tc } => {
            let m = LANDAU_REFERENCE;
            let tc = critical_temperature(m.z, m.j, m.kb);
            println!("Tc = {tc}, A(Tc) = {}", landau_a(tc, &m));
            let mut ok = landau_a(tc, &m) == 0.0;
            for row in landau_transition_check(&t_over_tc, &m) {
                let locs: Vec<String> = row.minima.iter().map(|p| format!("{p:+.8}")).collect();
                println!("T/Tc = {:<6} minima: {:<2} at {}", row.t_over_tc, row.minima.len(), locs.join(", "));
                let expected = if row.t_over_tc > 1.0 { 1 } else { 2 };
                ok &= row.t_over_tc == 1.0 || row.minima.len() == expected;
            }
            Ok(ok)
        }
        VerifyCommand::Convergence { case, sizes } => {
            let c = ManufacturedCase::from_name(&case)
                .ok_or_else(|| Error::Config(format!("unknown convergence case `{case}`")))?;
            println!("{:>10} {:>14} {:>8}", "h", "L2 error", "rate");
            for r in convergence_study(c, &sizes)? {
                let rate = r.rate.map_or("-".to_string(), |v| format!("{v:.3}"));
                println!("{:>10.5} {:>14.6e} {:>8}", r.h, r.error, rate);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Catalog(cmd) => catalog_cmd(cmd).map(|_| true),
        Command::Verify(cmd) => verify_cmd(cmd),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
