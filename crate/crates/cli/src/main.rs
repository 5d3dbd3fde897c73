//! `mfbounds`: model-free bounds, oracle verification and quote synthesis.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mfbounds_core::config::{RunConfig, Sides};
use mfbounds_core::oracle::measure::check_measure_on;
use mfbounds_core::pipeline::{
    brute_force_check, envelope_check, run_side, verify_instance, Instance, OracleCheck, SideOutcome,
};
use mfbounds_core::report::{emit_report, render, BoundReport, ReportFormat};
use mfbounds_core::{Error, Side};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CERTIFICATE: u8 = 4;
const EXIT_ORACLE: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "mfbounds", version, about = "Model-free no-arbitrage bounds and semi-static hedges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute bounds, hedges and worst-case dynamics.
    Bound(Common),
    /// Cross-check the LP against the envelope and brute-force oracles.
    Verify(Common),
    /// Write the synthetic quote CSV described by the config.
    QuotesSynth(Common),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SideArg {
    Upper,
    Lower,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Json,
    Csv,
    Table,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Toggle {
    On,
    Off,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.sides`.
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Refines (> 1) or coarsens (< 1) a parametric mesh.
    #[arg(long, default_value_t = 1.0)]
    mesh_scale: f64,
    /// Overrides `output.oracle.enabled`.
    #[arg(long, value_enum)]
    oracle: Option<Toggle>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying its exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(_) | Error::StatusNotOptimal(_) => EXIT_SOLVER,
            Error::DegenerateDuals(_) | Error::TooManyPaths { .. } | Error::Io(_) => 1,
            _ => EXIT_CONFIG,
        };
        Fail(code, e.to_string())
    }
}

struct Loaded {
    cfg: RunConfig,
    common_out: Option<PathBuf>,
}

fn load(args: &Common) -> Result<Loaded, Fail> {
    let mut cfg = RunConfig::load(&args.config).map_err(|e| Fail(EXIT_CONFIG, e.to_string()))?;
    if let Some(s) = args.side {
        cfg.output.sides = match s {
            SideArg::Upper => Sides::Upper,
            SideArg::Lower => Sides::Lower,
            SideArg::Both => Sides::Both,
        };
    }
    if let Some(f) = args.format {
        cfg.output.format = match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Table => ReportFormat::Table,
        };
    }
    if let Some(o) = args.oracle {
        cfg.output.oracle.enabled = o == Toggle::On;
    }
    let common_out = args.out.clone().or_else(|| cfg.output.dir.clone());
    Ok(Loaded { cfg, common_out })
}

fn instance_name(cfg: &RunConfig, path: &Path) -> String {
    cfg.spec.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    })
}

fn print_checks(checks: &[OracleCheck]) {
    for c in checks {
        let res = c.residual.map_or("-".to_string(), |r| format!("{r:.2e}"));
        println!(
            "{:<4} {:<48} residual {:>9}  {}",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            res,
            c.detail
        );
    }
}

fn cmd_bound(args: &Common) -> Result<(), Fail> {
    let Loaded { cfg, common_out } = load(args)?;
    let quotes = cfg.quote_set()?;
    let name = instance_name(&cfg, &args.config);
    if let Some(dir) = &common_out {
        std::fs::create_dir_all(dir).map_err(|e| Fail(EXIT_CONFIG, format!("{}: {e}", dir.display())))?;
    }
    let format = cfg.output.format;
    let oracle = &cfg.output.oracle;
    let mut reports: Vec<BoundReport> = Vec::new();
    let mut worst: Option<Fail> = None;
    let mut oracle_failed = false;
    for side in cfg.output.sides.list() {
        let inst = Instance::from_config(&cfg, &quotes, side, args.mesh_scale)?;
        let report = match run_side(&inst, &cfg.solver, cfg.output.measure_cap)? {
            SideOutcome::NotOptimal(status, why) => {
                eprintln!("{side:?} bound: solver status {status}: {why}");
                return Err(Fail(EXIT_SOLVER, format!("{side:?} side not optimal")));
            }
            SideOutcome::Solved(report, solved) => {
                log::info!("{side:?} side solved in {:.2}s with {:?}", solved.seconds, solved.backend);
                *report
            }
        };
        let label = format!("{side:?}").to_lowercase();
        // stdout carries the rendered report itself; tables have a headline
        if common_out.is_some() && format != ReportFormat::Table {
            match report.annualized_vol {
                Some(v) => println!("{label} bound: {:.6} (annualized vol {:.2}%)", report.bound_value, 100.0 * v),
                None => println!("{label} bound: {:.6}", report.bound_value),
            }
        }
        let cert = &report.diagnostics.certificate;
        if !cert.passed() {
            eprintln!("{label} certificate failed: {:?}", cert.failures());
            worst.get_or_insert(Fail(EXIT_CERTIFICATE, format!("{label} certificate failed")));
        }
        if oracle.enabled {
            let mut checks = Vec::new();
            match &report.worst_case {
                Some(m) => {
                    let rep = check_measure_on(m, &inst.spec, Some(&inst.mesh));
                    let spot = inst.spec.history().spot();
                    let gap = (rep.objective - report.bound_value).abs() / report.bound_value.abs().max(1.0);
                    checks.push(OracleCheck {
                        name: format!("{label} worst-case measure"),
                        residual: Some(gap.max(rep.martingale_residual / spot.abs().max(1.0))),
                        tol: oracle.tol,
                        pass: rep.is_feasible(oracle.tol, spot) && gap <= oracle.tol,
                        detail: format!("E[f] = {:.10}, martingale residual {:.2e}", rep.objective, rep.martingale_residual),
                    });
                }
                None => println!("note: {}", report.diagnostics.notes.join("; ")),
            }
            let (brute, _) = brute_force_check(&inst, &cfg.solver, oracle.path_cap, oracle.tol)?;
            checks.push(brute);
            if inst.spec.constraint_dimension() == 0 {
                checks.push(envelope_check(&inst, &cfg.solver)?);
            }
            print_checks(&checks);
            oracle_failed |= checks.iter().any(|c| !c.pass);
        }
        let rendered = render(&report, format)?;
        match &common_out {
            Some(dir) => {
                let path = dir.join(format!("{name}_{label}.{}", format.extension()));
                emit_report(&report, format, &path)?;
                if format == ReportFormat::Table {
                    print!("{rendered}");
                }
            }
            None => print!("{rendered}"),
        }
        reports.push(report);
    }
    if let [lo, hi] = &reports[..] {
        if lo.bound_value > hi.bound_value + 1e-8 * hi.bound_value.abs().max(1.0) {
            eprintln!("lower bound {} exceeds upper bound {}", lo.bound_value, hi.bound_value);
            oracle_failed = true;
        }
    }
    if let Some(f) = worst {
        return Err(f);
    }
    if oracle_failed {
        return Err(Fail(EXIT_ORACLE, "oracle disagreement".into()));
    }
    Ok(())
}

fn cmd_verify(args: &Common) -> Result<(), Fail> {
    let Loaded { cfg, .. } = load(args)?;
    let quotes = cfg.quote_set()?;
    let mesh = match &cfg.output.oracle.verify_mesh {
        Some(m) => m.build(args.mesh_scale)?,
        None => cfg.mesh.build(args.mesh_scale)?,
    };
    let inst = Instance::new(cfg.problem(&quotes, Side::Upper)?, mesh)?;
    println!(
        "verifying on a {}-node mesh, n = {}, d = {}, p = {}",
        inst.mesh.len(),
        inst.spec.horizon(),
        inst.spec.memory(),
        inst.spec.constraint_dimension()
    );
    let checks = verify_instance(&inst, &cfg.solver, cfg.output.oracle.path_cap, cfg.output.oracle.tol)?;
    print_checks(&checks);
    if checks.iter().any(|c| c.name.ends_with(" LP") && !c.pass) {
        return Err(Fail(EXIT_SOLVER, "LP not optimal".into()));
    }
    if checks.iter().any(|c| !c.pass) {
        return Err(Fail(EXIT_ORACLE, "oracle disagreement".into()));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn cmd_quotes_synth(args: &Common) -> Result<(), Fail> {
    let Loaded { cfg, common_out } = load(args)?;
    if !matches!(cfg.quotes, mfbounds_core::config::QuoteSource::Synth(_)) {
        return Err(Fail(EXIT_CONFIG, "config has no `quotes.synth` section".into()));
    }
    let quotes = cfg.quote_set()?;
    match common_out {
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|e| Fail(EXIT_CONFIG, format!("{}: {e}", dir.display())))?;
            let path = dir.join(&cfg.output.quotes_csv);
            quotes.write_csv(&path)?;
            println!("wrote {} quotes to {}", quotes.len(), path.display());
        }
        None => {
            quotes.write_csv_to(std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Verify(a) => cmd_verify(a),
        Command::QuotesSynth(a) => cmd_quotes_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
