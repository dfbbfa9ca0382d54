//! Command-line frontend: model loading (built-in or JSON file), trajectory
//! generation, method comparison, pendulum reductions, distance queries, and
//! steering.
//!
//! Exit codes: 0 success, 1 domain/convergence failure, 2 input/parse
//! failure. Data goes to stdout (or --output); diagnostics go to stderr.
//! Outputs are byte-deterministic for fixed flags unless --stamp is passed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, FileError};
use crate::files;
use crate::files::format_g17;
use crate::geodesics::{
    compare_methods, conservation_report, integrate_costate, integrate_field, IntegratorConfig,
    LieModel, Method, Trajectory, UnnormalizedPolicy,
};
use crate::models;
use crate::reachability::{self, SteerOptions};

#[derive(Debug, Parser)]
#[command(
    name = "liegeo",
    version,
    about = "Geodesics of left-invariant (sub-)Riemannian metrics on matrix Lie groups"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check algebra identities and representation consistency of a model
    Validate(ValidateArgs),
    /// Integrate a geodesic and write the trajectory (CSV or JSON)
    Geodesic(GeodesicArgs),
    /// Run both geodesic methods and print their maximum deviation
    Compare(CompareArgs),
    /// Reduce a trajectory to its pendulum angle and report residuals
    Reduce(ReduceArgs),
    /// Distance between two points (y_1..y_{n-1}, x) of the hyperbolic model
    Distance(DistanceArgs),
    /// Build a bang-control schedule steering the identity to a target
    Steer(SteerArgs),
    /// List built-in models
    ListModels,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Built-in model name (heisenberg, hyperbolic, so3, sh2, se2) or a path
    /// to a model JSON file
    pub model: String,
    /// Metric parameter a for so3 (0 < a <= b)
    #[arg(long)]
    pub a: Option<f64>,
    /// Metric parameter b for so3
    #[arg(long)]
    pub b: Option<f64>,
    /// Dimension n for hyperbolic (2..=6, default 3)
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CovectorArgs {
    /// Initial covector ψ0, comma separated, length n
    #[arg(long, value_name = "C1,..,CN")]
    pub psi0: Option<String>,
    /// Unit vector φ for the hyperbolic model (alias for --psi0)
    #[arg(long, value_name = "P1,..,PN")]
    pub phi: Option<String>,
    /// Angle ξ for heisenberg: ψ0 = (cos ξ, sin ξ, β)
    #[arg(long)]
    pub xi: Option<f64>,
    /// Angle α for rank-2 models: ψ0 = (cos α, sin α, β)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Component β of ψ0 along e_3 (default 0)
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Costate,
    Field,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub covector: CovectorArgs,
    /// Horizon T in arclength units
    #[arg(long = "T", default_value_t = 10.0)]
    pub horizon: f64,
    /// Integration step h
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Costate)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Output path (stdout when omitted; with --method both the method name
    /// is inserted before the extension)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Keep every N-th row in the output (diagnostics use the full grid)
    #[arg(long)]
    pub decimate: Option<usize>,
    /// Accept an unnormalized ψ0 and record its constant speed
    #[arg(long)]
    pub allow_speed: bool,
    /// Include a wall-clock stamp in the header (off: outputs are
    /// byte-deterministic)
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub covector: CovectorArgs,
    #[arg(long = "T", default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Fail (exit 1) when the deviation exceeds this bound
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub allow_speed: bool,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Angle α of ψ0 = (cos α, sin α, β)
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    /// Component β of ψ0
    #[arg(long, default_value_t = 0.7)]
    pub beta: f64,
    #[arg(long = "T", default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Reduce a previously written trajectory file instead of integrating
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output path for the (t, angle, rate) CSV (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// First point, comma separated (y_1..y_{n-1}, x)
    #[arg(long, value_name = "Y..,X")]
    pub p: String,
    /// Second point, comma separated (y_1..y_{n-1}, x)
    #[arg(long, value_name = "Y..,X")]
    pub q: String,
}

#[derive(Debug, Args)]
pub struct SteerArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Target as second-kind coordinates s_1..s_n (Φ(s) is the target)
    #[arg(long, value_name = "S1,..,SN")]
    pub target_s: Option<String>,
    /// Target as a JSON file holding the d x d matrix row-major
    #[arg(long)]
    pub target_matrix: Option<PathBuf>,
    /// Acceptable endpoint error
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Conjugation duration t_k for bracket-word schedules
    #[arg(long, default_value_t = 0.1)]
    pub t_param: f64,
    /// Output path for the schedule JSON (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Failure classes mapped to process exit codes.
pub enum CliError {
    /// Exit 1: domain or convergence failure.
    Domain(String),
    /// Exit 2: unreadable or malformed input.
    Input(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Geodesic(args) => cmd_geodesic(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Reduce(args) => cmd_reduce(&args),
        Command::Distance(args) => cmd_distance(&args),
        Command::Steer(args) => cmd_steer(&args),
        Command::ListModels => cmd_list_models(),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn is_builtin(name: &str) -> bool {
    models::BUILTIN_NAMES.contains(&name)
}

fn resolve_model(args: &ModelArgs) -> Result<LieModel, CliError> {
    if is_builtin(&args.model) {
        return Ok(models::builtin_by_name(&args.model, args.a, args.b, args.n)?);
    }
    let path = Path::new(&args.model);
    if !path.exists() {
        return Err(CliError::Input(format!(
            "'{}' is neither a built-in model ({}) nor a readable file",
            args.model,
            models::BUILTIN_NAMES.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(FileError::Io)?;
    let mf = files::model_from_json(&text)?;
    Ok(files::load_model(&mf)?)
}

fn parse_list(raw: &str, what: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad {what} component '{x}'")))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(CliError::Input(format!("non-finite {what} component '{x}'")))
                    }
                })
        })
        .collect()
}

fn resolve_psi0(args: &CovectorArgs, model: &LieModel) -> Result<DVector<f64>, CliError> {
    let n = model.dim();
    let from_list = |raw: &str, what: &str| -> Result<DVector<f64>, CliError> {
        let v = parse_list(raw, what)?;
        if v.len() != n {
            return Err(CliError::Input(format!(
                "{what} needs {n} components for model '{}', got {}",
                model.name,
                v.len()
            )));
        }
        Ok(DVector::from_vec(v))
    };
    if let Some(raw) = &args.psi0 {
        return from_list(raw, "--psi0");
    }
    if let Some(raw) = &args.phi {
        return from_list(raw, "--phi");
    }
    let angle = args.xi.or(args.alpha);
    if let Some(theta) = angle {
        if n != 3 {
            return Err(CliError::Input(format!(
                "--xi/--alpha parametrize 3-dimensional models; '{}' has n = {n}",
                model.name
            )));
        }
        let beta = args.beta.unwrap_or(0.0);
        return Ok(DVector::from_vec(vec![theta.cos(), theta.sin(), beta]));
    }
    Err(CliError::Input(
        "provide an initial covector: --psi0, --phi, or --xi/--alpha [--beta]".into(),
    ))
}

fn write_or_print(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents).map_err(|e| CliError::Input(e.to_string())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn with_method_suffix(path: &Path, method: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let ext = path.extension().and_then(|s| s.to_str());
    let name = match ext {
        Some(ext) => format!("{stem}.{method}.{ext}"),
        None => format!("{stem}.{method}"),
    };
    path.with_file_name(name)
}

fn stamp_now() -> String {
    match std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        Ok(d) => format!("unix:{}", d.as_secs()),
        Err(_) => "unix:0".to_string(),
    }
}

fn check_not_aborted(traj: &Trajectory) -> Result<(), CliError> {
    if let Some(t) = traj.aborted_at {
        return Err(CliError::Domain(format!(
            "integration aborted at t = {t}: state is not finite"
        )));
    }
    Ok(())
}

fn print_diagnostics(label: &str, traj: &Trajectory) {
    eprintln!(
        "{label}: speed={} max_speed_drift={} max_hamiltonian_drift={} span_residual={}",
        format_g17(traj.speed),
        format_g17(traj.diagnostics.max_speed_drift),
        format_g17(traj.diagnostics.max_hamiltonian_drift),
        format_g17(traj.max_span_residual),
    );
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let (sc, rep, rank, label) = if is_builtin(&args.model.model) {
        let model = models::builtin_by_name(&args.model.model, args.model.a, args.model.b, args.model.n)?;
        (model.sc.clone(), model.rep.clone(), model.rank, model.name.clone())
    } else {
        let path = Path::new(&args.model.model);
        let text = std::fs::read_to_string(path).map_err(FileError::Io)?;
        let mf = files::model_from_json(&text)?;
        let sc = files::model_file_tensor(&mf)?;
        let rep = files::model_file_representation(&mf)?;
        (sc, rep, mf.r, mf.name.clone())
    };

    let report = sc.validate();
    let mut failed = false;
    if report.is_valid() {
        println!("structure constants: ok (antisymmetry and Jacobi at 1e-12)");
    } else {
        failed = true;
        print!("structure constants: {report}");
    }
    match rep.check_consistency(&sc) {
        Ok(()) => println!("representation: ok (commutators match structure constants)"),
        Err(e) => {
            failed = true;
            println!("representation: {e}");
        }
    }
    match sc.generation_filtration(rank) {
        Ok(f) => println!(
            "distribution: ok (ranks {:?}, generation degree {})",
            f.ranks, f.degree
        ),
        Err(e) => {
            failed = true;
            println!("distribution: {e}");
        }
    }
    if failed {
        Err(CliError::Domain(format!("model '{label}' failed validation")))
    } else {
        println!("model '{label}': all checks passed");
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

fn integrate_one(
    model: &LieModel,
    psi0: &DVector<f64>,
    cfg: &IntegratorConfig,
    method: Method,
) -> Result<Trajectory, CliError> {
    let traj = match method {
        Method::Costate => integrate_costate(model, psi0, cfg)?,
        Method::Field => integrate_field(model, psi0, &model.rep.identity(), cfg)?,
    };
    check_not_aborted(&traj)?;
    Ok(traj)
}

fn cmd_geodesic(args: &GeodesicArgs) -> Result<(), CliError> {
    let model = resolve_model(&args.model)?;
    let psi0 = resolve_psi0(&args.covector, &model)?;
    let cfg = IntegratorConfig {
        step: args.step,
        horizon: args.horizon,
        unnormalized: if args.allow_speed {
            UnnormalizedPolicy::AcceptReportSpeed
        } else {
            UnnormalizedPolicy::Reject
        },
    };
    let decimate = args.decimate.unwrap_or(1);
    let stamp = args.stamp.then(stamp_now);
    let render = |traj: &Trajectory| -> Result<String, CliError> {
        let tf = files::trajectory_file(&model, &psi0, traj, &cfg, decimate, stamp.clone())?;
        Ok(match args.format {
            FormatArg::Csv => files::trajectory_to_csv(&tf),
            FormatArg::Json => files::trajectory_to_json(&tf),
        })
    };

    match args.method {
        MethodArg::Costate | MethodArg::Field => {
            let method = if args.method == MethodArg::Costate {
                Method::Costate
            } else {
                Method::Field
            };
            let traj = integrate_one(&model, &psi0, &cfg, method)?;
            print_diagnostics(method.as_str(), &traj);
            write_or_print(args.output.as_deref(), &render(&traj)?)
        }
        MethodArg::Both => {
            let output = args.output.as_deref().ok_or_else(|| {
                CliError::Input("--method both needs --output to write two files".into())
            })?;
            let costate = integrate_one(&model, &psi0, &cfg, Method::Costate)?;
            let field = integrate_one(&model, &psi0, &cfg, Method::Field)?;
            print_diagnostics("costate", &costate);
            print_diagnostics("field", &field);
            let deviation = compare_methods(&costate, &field)?;
            write_or_print(Some(&with_method_suffix(output, "costate")), &render(&costate)?)?;
            write_or_print(Some(&with_method_suffix(output, "field")), &render(&field)?)?;
            println!("max_deviation: {}", format_g17(deviation));
            Ok(())
        }
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let model = resolve_model(&args.model)?;
    let psi0 = resolve_psi0(&args.covector, &model)?;
    let cfg = IntegratorConfig {
        step: args.step,
        horizon: args.horizon,
        unnormalized: if args.allow_speed {
            UnnormalizedPolicy::AcceptReportSpeed
        } else {
            UnnormalizedPolicy::Reject
        },
    };
    let costate = integrate_one(&model, &psi0, &cfg, Method::Costate)?;
    let field = integrate_one(&model, &psi0, &cfg, Method::Field)?;
    print_diagnostics("costate", &costate);
    print_diagnostics("field", &field);
    let deviation = compare_methods(&costate, &field)?;
    println!("max_deviation: {}", format_g17(deviation));
    if let Some(tol) = args.tol {
        if deviation > tol {
            return Err(CliError::Domain(format!(
                "method deviation {} exceeds tolerance {tol:e}",
                format_g17(deviation)
            )));
        }
    }
    Ok(())
}

fn trajectory_from_path(path: &Path) -> Result<files::TrajectoryFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(FileError::Io)?;
    let tf = if text.trim_start().starts_with('{') {
        files::trajectory_from_json(&text)?
    } else {
        files::trajectory_from_csv(&text)?
    };
    Ok(tf)
}

fn cmd_reduce(args: &ReduceArgs) -> Result<(), CliError> {
    let name = args.model.model.as_str();
    if !["so3", "sh2", "se2"].contains(&name) {
        return Err(CliError::Domain(format!(
            "model '{name}' has no pendulum reduction (use so3, sh2, or se2)"
        )));
    }

    let (traj, alpha, beta, a, b) = match &args.input {
        Some(path) => {
            let tf = trajectory_from_path(path)?;
            if tf.model != name {
                return Err(CliError::Input(format!(
                    "trajectory was written for model '{}', not '{name}'",
                    tf.model
                )));
            }
            let alpha = tf.psi0[1].atan2(tf.psi0[0]);
            let beta = tf.psi0[2];
            let a = args.model.a.or_else(|| tf.params.get("a").copied());
            let b = args.model.b.or_else(|| tf.params.get("b").copied());
            let samples = files::rows_to_samples(&tf);
            let mut traj = Trajectory {
                method: if tf.method == "field" {
                    Method::Field
                } else {
                    Method::Costate
                },
                speed: tf.speed,
                samples,
                diagnostics: Default::default(),
                max_span_residual: 0.0,
                aborted_at: None,
            };
            traj.diagnostics = conservation_report(&traj);
            (traj, alpha, beta, a, b)
        }
        None => {
            let model = resolve_model(&args.model)?;
            let psi0 =
                DVector::from_vec(vec![args.alpha.cos(), args.alpha.sin(), args.beta]);
            let cfg = IntegratorConfig::new(args.step, args.horizon);
            let traj = integrate_costate(&model, &psi0, &cfg)?;
            check_not_aborted(&traj)?;
            (traj, args.alpha, args.beta, args.model.a, args.model.b)
        }
    };

    let (samples, summary) = match name {
        "so3" => {
            let (a, b) = (a.unwrap_or(1.0), b.unwrap_or(1.0));
            let red = models::so3_pendulum_residual(&traj, a, b)?;
            let summary = format!(
                "max_pendulum_residual: {}\nmax_psi3_err: {}\n",
                format_g17(red.max_pendulum_residual),
                format_g17(red.max_psi3_err)
            );
            (red.samples, summary)
        }
        "sh2" | "se2" => {
            let red = if name == "sh2" {
                models::sh2_reduction(&traj, alpha, beta)?
            } else {
                models::se2_reduction(&traj, alpha, beta)?
            };
            let summary = format!(
                "max_pendulum_residual: {}\ninitial_angle_err: {}\ninitial_rate_err: {}\nmax_system_residual: {}\n",
                format_g17(red.max_pendulum_residual),
                format_g17(red.initial_angle_err),
                format_g17(red.initial_rate_err),
                format_g17(red.max_system_residual)
            );
            (red.samples, summary)
        }
        _ => unreachable!(),
    };

    let mut csv = String::from("t,angle,rate\n");
    for s in &samples {
        csv.push_str(&format!(
            "{},{},{}\n",
            format_g17(s.t),
            format_g17(s.angle),
            format_g17(s.rate)
        ));
    }
    write_or_print(args.output.as_deref(), &csv)?;
    eprint!("{summary}");
    Ok(())
}

fn cmd_distance(args: &DistanceArgs) -> Result<(), CliError> {
    let p = parse_list(&args.p, "--p")?;
    let q = parse_list(&args.q, "--q")?;
    let d = models::hyperbolic_distance(&p, &q)?;
    println!("{d:.11e}");
    Ok(())
}

fn cmd_steer(args: &SteerArgs) -> Result<(), CliError> {
    let model = resolve_model(&args.model)?;
    let target = match (&args.target_s, &args.target_matrix) {
        (Some(raw), None) => {
            let s = parse_list(raw, "--target-s")?;
            if s.len() != model.dim() {
                return Err(CliError::Input(format!(
                    "--target-s needs {} components, got {}",
                    model.dim(),
                    s.len()
                )));
            }
            reachability::phi(&DVector::from_vec(s), &model)?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(FileError::Io)?;
            let entries: Vec<f64> =
                serde_json::from_str(&text).map_err(FileError::Json)?;
            let d = model.rep_dim();
            if entries.len() != d * d {
                return Err(CliError::Input(format!(
                    "target matrix needs {} entries (row-major {d}x{d}), got {}",
                    d * d,
                    entries.len()
                )));
            }
            if entries.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Input("non-finite target matrix entry".into()));
            }
            DMatrix::from_row_slice(d, d, &entries)
        }
        _ => {
            return Err(CliError::Input(
                "provide exactly one of --target-s or --target-matrix".into(),
            ))
        }
    };
    let opts = SteerOptions {
        tol: args.tol,
        t_param: args.t_param,
        ..SteerOptions::default()
    };
    let result = reachability::steer(&target, &model, &opts)?;
    eprintln!(
        "achieved_error: {} total_duration: {} segments: {}",
        format_g17(result.achieved_error),
        format_g17(result.total_duration),
        result.schedule.segments.len()
    );
    write_or_print(args.output.as_deref(), &files::schedule_to_json(&result.schedule))
}

fn cmd_list_models() -> Result<(), CliError> {
    println!("heisenberg              n=3 r=2  nilpotent upper-triangular group");
    println!("hyperbolic [--n 2..6]   n=N r=N  homotheties+translations, curvature -1");
    println!("so3 [--a A --b B]       n=3 r=2  rotation group, metric 0 < a <= b");
    println!("sh2                     n=3 r=2  hyperbolic motions of the plane");
    println!("se2                     n=3 r=2  Euclidean motions of the plane");
    Ok(())
}

/// Builds parameter maps for reporting (used by tests).
pub fn so3_params(a: f64, b: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([("a".into(), a), ("b".into(), b)])
}
