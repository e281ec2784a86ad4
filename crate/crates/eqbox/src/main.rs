use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use eqbox::experiment::{run_lens_experiment, run_properness_probe, run_quotient_convergence, ExperimentError, SequenceConfig};
use eqbox::gen::{GenError, LensConfig};
use eqbox::io::{load_action, read_json, space_file, IoError};
use eqbox::report::{emit_report, Format};
use eqbox::verify::{run_criterion, VerifyReport, CRITERIA};
use eqbox_core::boxdist::{box_oracle, box_pi_with, box_upper, d_pi_with, default_oracle_grid, BoxError, DPiOptions, MapPair};
use eqbox_core::group::{enumerate_aut, quotient, thick_part, GroupError, ThickPartParams};
use eqbox_core::mwis::MwisError;
use eqbox_core::obsdist::{dconc_oracle, dconc_pi, dconc_upper_seeded, default_value_grid, DconcMode, ObsError, ProbeConfig};
use eqbox_core::search::SearchConfig;
use eqbox_core::{Action, Plan, SpaceError};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "eqbox", version, about = "Equivariant box and observable distances between finite mm-spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a space or action file.
    Validate { file: PathBuf },
    /// List the isometry group of a space.
    Aut { file: PathBuf },
    /// Quotient of an action.
    Quotient { action: PathBuf },
    /// Thick part `{x : μ(B(x, r)) > v}` of a space.
    Thick {
        file: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        v: f64,
    },
    /// Box distance.
    Box(DistArgs),
    /// Observable distance.
    Dconc(DistArgs),
    /// Run an experiment and write CSV, JSON and SVG reports.
    Experiment {
        kind: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification suite and print its JSON report.
    Verify {
        /// `all` or a comma-separated list of criterion numbers.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct DistArgs {
    a: PathBuf,
    b: PathBuf,
    /// Use the group actions; otherwise both groups are trivial.
    #[arg(long)]
    eq: bool,
    /// Brute force over grid couplings instead of searching.
    #[arg(long)]
    oracle: bool,
    /// Coupling grid for the oracle.
    #[arg(long)]
    grid: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random candidates in the coupling search.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Lens,
    Quotient,
    Properness,
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("EQBOX_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring EQBOX_THREADS={n}"),
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for rejected inputs, 3 for exhausted budgets, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<IoError>() {
            if err.is_validation() {
                return 2;
            }
            if matches!(err, IoError::Gen(GenError::BudgetExceeded { .. })) {
                return 3;
            }
        }
        if cause.is::<SpaceError>() || cause.is::<eqbox_core::CouplingError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<GroupError>() {
            return if matches!(err, GroupError::GroupTooLarge(_) | GroupError::TooLarge(_)) { 3 } else { 2 };
        }
        if let Some(err) = cause.downcast_ref::<BoxError>() {
            return match err {
                BoxError::TooLarge(_) | BoxError::OracleTooLarge(_) => 3,
                _ => 2,
            };
        }
        if let Some(err) = cause.downcast_ref::<ObsError>() {
            return match err {
                ObsError::TooLarge(_) | ObsError::GridTooFine(..) => 3,
                ObsError::Box(BoxError::TooLarge(_) | BoxError::OracleTooLarge(_)) => 3,
                _ => 2,
            };
        }
        if cause.is::<MwisError>() || matches!(cause.downcast_ref::<GenError>(), Some(GenError::BudgetExceeded { .. })) {
            return 3;
        }
        if let Some(err) = cause.downcast_ref::<ExperimentError>() {
            return match err {
                ExperimentError::Box(BoxError::TooLarge(_) | BoxError::OracleTooLarge(_)) | ExperimentError::Gen(GenError::BudgetExceeded { .. }) => 3,
                ExperimentError::Obs(ObsError::TooLarge(_) | ObsError::GridTooFine(..)) => 3,
                ExperimentError::Io(e) if e.is_validation() => 2,
                ExperimentError::Io(IoError::Gen(GenError::BudgetExceeded { .. })) => 3,
                ExperimentError::Io(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file } => {
            let a = load_action(&file)?;
            print(&json!({ "valid": true, "points": a.space().len(), "group_order": a.order() }));
        }
        Command::Aut { file } => {
            let aut = enumerate_aut(load_action(&file)?.space())?;
            let els: Vec<&[usize]> = aut.elements().iter().map(|p| p.as_slice()).collect();
            print(&json!({ "order": aut.order(), "elements": els }));
        }
        Command::Quotient { action } => {
            let a = load_action(&action)?;
            let q = quotient(&a)?;
            print(&json!({ "space": space_file(&q.space), "orbits": q.orbits }));
        }
        Command::Thick { file, r, v } => {
            let part = thick_part(load_action(&file)?.space(), ThickPartParams::new(r, v)?);
            print(&json!({ "points": part }));
        }
        Command::Box(args) => print(&box_cmd(&args)?),
        Command::Dconc(args) => print(&dconc_cmd(&args)?),
        Command::Experiment { kind, config, out } => experiment_cmd(kind, &config, &out)?,
        Command::Verify { suite, seed } => {
            let ids: Vec<u8> = if suite == "all" {
                CRITERIA.to_vec()
            } else {
                suite.split(',').map(|s| s.trim().parse::<u8>()).collect::<Result<_, _>>().context("--suite takes `all` or criterion numbers")?
            };
            let criteria: Vec<_> = ids.iter().map(|&id| run_criterion(id, seed)).collect();
            for c in &criteria {
                eprintln!("{}", c.summary_line());
            }
            let report = VerifyReport { seed, criteria };
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_pair(args: &DistArgs) -> Result<(Action, Action)> {
    let (a, b) = (load_action(&args.a)?, load_action(&args.b)?);
    if args.eq {
        Ok((a, b))
    } else {
        Ok((Action::trivial(a.space().clone()), Action::trivial(b.space().clone())))
    }
}

fn search_config(args: &DistArgs) -> SearchConfig {
    let mut cfg = SearchConfig { seed: args.seed, ..SearchConfig::default() };
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    cfg
}

fn coupling_json(pi: &Plan) -> Value {
    json!({ "plan": pi.plan_rows(), "muX": pi.mu_x(), "muY": pi.mu_y() })
}

fn box_cmd(args: &DistArgs) -> Result<Value> {
    let (a, b) = load_pair(args)?;
    let (value, kind, err, pi) = if args.oracle {
        let grid = args.grid.unwrap_or_else(|| default_oracle_grid(a.space().len(), b.space().len()));
        let o = box_oracle(&a, &b, grid)?;
        (o.value, "ORACLE", o.err, o.coupling)
    } else {
        let u = box_upper(&a, &b, &search_config(args))?;
        (u.value, "UPPER", 0.0, u.coupling)
    };
    let opts = DPiOptions::permissive();
    let bp = box_pi_with(&a, &b, &pi, opts)?;
    let (g, h) = bp.critical_pair();
    let cert = d_pi_with(
        &MapPair::on_x(a.elements()[g].clone()),
        &MapPair::on_y(b.elements()[h].clone()),
        &pi,
        a.space(),
        b.space(),
        opts,
    )?;
    Ok(json!({
        "value": value,
        "kind": kind,
        "err": err,
        "witness_coupling": coupling_json(&pi),
        "certificates": {
            "d_pi": bp.matrix,
            "critical_pair": [a.elements()[g].as_slice(), b.elements()[h].as_slice()],
            "subset": cert.subset.pairs(),
            "subset_value": cert.value,
            "threshold": cert.threshold,
            "exact": bp.exact,
        },
    }))
}

fn dconc_cmd(args: &DistArgs) -> Result<Value> {
    let (a, b) = load_pair(args)?;
    let vgrid = default_value_grid(a.space(), b.space());
    let (value, kind, err, pi, mode) = if args.oracle {
        let grid = args.grid.unwrap_or_else(|| default_oracle_grid(a.space().len(), b.space().len()));
        let o = dconc_oracle(&a, &b, grid, vgrid)?;
        (o.value, "ORACLE", o.err, o.coupling, DconcMode::Oracle { grid: vgrid })
    } else {
        let cfg = search_config(args);
        let probes = ProbeConfig { seed: args.seed, ..ProbeConfig::default() };
        let u = dconc_upper_seeded(&a, &b, &cfg, &probes, &[])?;
        (u.value, "UPPER", 0.0, u.coupling, DconcMode::Upper(probes))
    };
    let d = dconc_pi(&a, &b, &pi, mode)?;
    let (g, h) = d.critical_pair;
    Ok(json!({
        "value": value,
        "kind": kind,
        "err": err,
        "witness_coupling": coupling_json(&pi),
        "certificates": {
            "rho": d.matrix,
            "critical_pair": [a.elements()[g].as_slice(), b.elements()[h].as_slice()],
            "slack": d.slack,
        },
    }))
}

fn experiment_cmd(kind: ExperimentKind, config: &Path, out: &Path) -> Result<()> {
    let base = config.parent().unwrap_or(Path::new("."));
    let formats = [Format::Csv, Format::Json, Format::Svg];
    let (report, stem) = match kind {
        ExperimentKind::Lens => {
            let cfg: LensConfig = read_json(config)?;
            (run_lens_experiment(&cfg)?, "lens")
        }
        ExperimentKind::Quotient => {
            let cfg: SequenceConfig = read_json(config)?;
            let (seq, target) = cfg.build(base)?;
            (run_quotient_convergence(&seq, &target, &cfg.options)?, "quotient")
        }
        ExperimentKind::Properness => {
            let cfg: SequenceConfig = read_json(config)?;
            let (seq, target) = cfg.build(base)?;
            if target.action.space().len() > eqbox_core::group::AUT_MAX_POINTS {
                bail!(GroupError::TooLarge(target.action.space().len()));
            }
            (run_properness_probe(&seq, target.action.space(), &cfg.options.search)?.report, "properness")
        }
    };
    for path in emit_report(&report, &formats, out, stem)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
