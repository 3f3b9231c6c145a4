mod ranges;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dodlab::analysis::{optimized_lambda, CflSearch, LambdaChoice, MeshLayout, OptimizerGrid, SweepSpec};
use dodlab::experiments::{convergence_study, work_precision_study, StepRule, StudyResult, StudySpec};
use dodlab::io::{write_csv, Manifest, VERSION};
use dodlab::{
    opnorm_sweep, optimize_lambda, sharp_cfl_search, AdvectionConfig, Error, GlobalOperator, NodeKind, NormOptions,
    QuadratureRule, RKMethod,
};

#[derive(Parser, Serialize)]
#[command(name = "dodlab", version, about = "Operator norms, lambda_c optimization and CFL studies for DoD-stabilized cut-cell DG")]
struct Cli {
    /// Directory for CSV tables and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (defaults to the number of logical cores).
    #[arg(long, global = true, env = "DODLAB_JOBS")]
    jobs: Option<usize>,
    /// Seed for the Krylov start vectors.
    #[arg(long, global = true, default_value_t = 24301)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Global operator norms over an (p, lambda_c, alpha) grid.
    OpnormSweep(SweepArgs),
    /// Min-max optimal lambda_c per degree and node family.
    OptimizeLambda(OptimizeArgs),
    /// Sharp long-time CFL numbers by bisection.
    CflSearch(CflArgs),
    /// Errors at the final time over a sequence of resolutions.
    Converge(StudyArgs),
    /// Error against number of time steps.
    WorkPrecision(StudyArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum KindArg {
    Gl,
    Gll,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<NodeKind> {
        match self {
            KindArg::Gl => vec![NodeKind::GaussLegendre],
            KindArg::Gll => vec![NodeKind::GaussLobattoLegendre],
            KindArg::Both => vec![NodeKind::GaussLegendre, NodeKind::GaussLobattoLegendre],
        }
    }
}

#[derive(Args, Serialize)]
struct MeshArgs {
    /// Background cell size; overrides --cells.
    #[arg(long)]
    dx: Option<f64>,
    /// Background cells.
    #[arg(long, default_value_t = 50)]
    cells: usize,
    /// Background cell (1-based) that is split.
    #[arg(long, default_value_t = 25)]
    cut_cell: usize,
    /// Advection speed.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

impl MeshArgs {
    fn layout(&self) -> Result<MeshLayout, Failure> {
        let n_background = match self.dx {
            Some(dx) => {
                let n = (1.0 / dx).round();
                if !(dx > 0.0) || (n * dx - 1.0).abs() > 1e-9 {
                    return Err(Failure::Usage(format!("--dx {dx} must divide the unit interval")));
                }
                n as usize
            }
            None => self.cells,
        };
        Ok(MeshLayout {
            n_background,
            cut_cell: self.cut_cell,
            speed: self.speed,
        })
    }
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "gll")]
    kind: KindArg,
    /// Degrees, e.g. 2,3,4 or 0:1:5.
    #[arg(long, default_value = "1", value_parser = ranges::parse_usize_list)]
    p: ::std::vec::Vec<usize>,
    /// Cut-cell factors, e.g. 0.01:0.01:0.49.
    #[arg(long, value_parser = ranges::parse_f64_list)]
    alphas: ::std::vec::Vec<f64>,
    /// lambda_c values, or `optimized` for the shipped table.
    #[arg(long, default_value = "1.0")]
    lambda: String,
    #[command(flatten)]
    mesh: MeshArgs,
    /// Also write each assembled operator as sparse triplets.
    #[arg(long)]
    dump_operator: bool,
}

#[derive(Args, Serialize)]
struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    #[arg(long, default_value = "0:1:5", value_parser = ranges::parse_usize_list)]
    p: ::std::vec::Vec<usize>,
    #[arg(long, default_value_t = 51)]
    n_lambda: usize,
    #[arg(long, default_value_t = 51)]
    n_alpha: usize,
    #[arg(long, default_value_t = 1e-4)]
    bracket_tol: f64,
    #[command(flatten)]
    mesh: MeshArgs,
}

#[derive(Args, Serialize)]
struct CflArgs {
    /// euler, ssprk22, ssprk33 or ssprk104.
    #[arg(long, default_value = "euler", value_parser = parse_method)]
    method: RKMethod,
    #[arg(long, value_enum, default_value = "gl")]
    kind: KindArg,
    #[arg(long, default_value = "0", value_parser = ranges::parse_usize_list)]
    p: ::std::vec::Vec<usize>,
    #[arg(long, value_parser = ranges::parse_f64_list)]
    alphas: ::std::vec::Vec<f64>,
    /// Comma-separated lambda_c modes: a value, `optimized` or `off`.
    #[arg(long, default_value = "1.0")]
    lambda: String,
    /// Final time in domain-crossing periods.
    #[arg(long, default_value_t = 100.0)]
    t_final: f64,
    /// Courant numbers `lo,hi` expected stable and unstable.
    #[arg(long, default_value = "0.01,2.0", value_parser = ranges::parse_f64_list)]
    bracket: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    rel_tol: f64,
    /// Allowed relative energy excess over the initial energy.
    #[arg(long, default_value_t = 1e-10)]
    energy_tol: f64,
    /// Trailing fraction of the run in which the energy is checked (1 checks every step).
    #[arg(long, default_value_t = 0.25)]
    window: f64,
    #[command(flatten)]
    mesh: MeshArgs,
}

#[derive(Args, Serialize)]
struct StudyArgs {
    #[arg(long, default_value = "ssprk33", value_parser = parse_method)]
    method: RKMethod,
    #[arg(long, value_enum, default_value = "gl")]
    kind: KindArg,
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Background cell counts.
    #[arg(long, default_value = "10,20,40,80", value_parser = ranges::parse_usize_list)]
    cells: ::std::vec::Vec<usize>,
    /// Cut-cell factors; `uncut` adds the mesh without a cut.
    #[arg(long, default_value = "uncut,0.001,0.1,0.25,0.49", value_parser = ranges::parse_alpha_list)]
    alphas: ::std::vec::Vec<Option<f64>>,
    #[arg(long, default_value = "optimized")]
    lambda: String,
    /// Sharp Courant number; without it the step is `C/‖L‖_M` with C from --norm-constant.
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    norm_constant: f64,
    /// Safety factor on the step (0.95 for converge, 0.99 for work-precision by default).
    #[arg(long)]
    safety: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

fn parse_method(s: &str) -> Result<RKMethod, String> {
    s.parse::<RKMethod>().map_err(|e| e.to_string())
}

fn parse_lambdas(s: &str) -> Result<Vec<LambdaChoice>, Failure> {
    let out: Result<Vec<_>, _> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<LambdaChoice>())
        .collect();
    match out {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err(Failure::Usage("empty lambda list".into())),
        Err(e) => Err(Failure::Usage(e.to_string())),
    }
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::InvalidMesh(_) | Error::InvalidRule(_) => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(outputs) => {
            let (name, flags) = subcommand_json(&cli);
            let manifest = Manifest {
                command: name,
                version: VERSION.to_string(),
                flags,
                seed: cli.seed,
                wall_time_s: start.elapsed().as_secs_f64(),
                outputs,
            };
            let path = cli.out_dir.join("manifest.json");
            if let Err(e) = manifest.write(&path) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn subcommand_json(cli: &Cli) -> (String, serde_json::Value) {
    let value = serde_json::to_value(cli).unwrap_or(serde_json::Value::Null);
    let name = match &cli.command {
        Command::OpnormSweep(_) => "opnorm-sweep",
        Command::OptimizeLambda(_) => "optimize-lambda",
        Command::CflSearch(_) => "cfl-search",
        Command::Converge(_) => "converge",
        Command::WorkPrecision(_) => "work-precision",
    };
    (name.to_string(), value)
}

fn norm_options(cli: &Cli) -> NormOptions {
    NormOptions {
        seed: cli.seed,
        ..NormOptions::default()
    }
}

fn run(cli: &Cli) -> Result<Vec<String>, Failure> {
    fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::OpnormSweep(a) => cmd_opnorm_sweep(cli, a),
        Command::OptimizeLambda(a) => cmd_optimize(cli, a),
        Command::CflSearch(a) => cmd_cfl_search(cli, a),
        Command::Converge(a) => cmd_study(cli, a, false),
        Command::WorkPrecision(a) => cmd_study(cli, a, true),
    }
}

fn out(cli: &Cli, name: &str) -> PathBuf {
    cli.out_dir.join(name)
}

fn cmd_opnorm_sweep(cli: &Cli, a: &SweepArgs) -> Result<Vec<String>, Failure> {
    let layout = a.mesh.layout()?;
    let choices = parse_lambdas(&a.lambda)?;
    let mut rows = Vec::new();
    for kind in a.kind.kinds() {
        for &p in &a.p {
            let lambdas = choices
                .iter()
                .map(|c| match c {
                    LambdaChoice::Fixed(l) => Ok(*l),
                    LambdaChoice::Optimized => optimized_lambda(kind, p)
                        .ok_or_else(|| Failure::Usage(format!("no optimized lambda_c for {kind} p={p}"))),
                    LambdaChoice::Off => Err(Failure::Usage("the sweep always reports the unstabilized norm; use a value".into())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let spec = SweepSpec {
                kind,
                degrees: vec![p],
                alphas: a.alphas.clone(),
                lambdas,
                layout,
                norm: norm_options(cli),
            };
            rows.extend(opnorm_sweep(&spec)?);
        }
    }
    let mut failed = 0;
    let table: Vec<_> = rows
        .iter()
        .map(|r| {
            if let Some(e) = &r.error {
                failed += 1;
                eprintln!("warning: {} p={} lambda_c={} alpha={}: {e}", r.kind, r.p, r.lambda_c, r.alpha);
            }
            (r.kind.tag(), r.p, r.lambda_c, r.alpha, r.norm_dod, r.norm_background, r.quotient)
        })
        .collect();
    let header = ["kind", "p", "lambda_c", "alpha", "norm_dod", "norm_background", "quotient"];
    write_csv(&out(cli, "opnorm_sweep.csv"), &header, &table)?;
    let mut outputs = vec!["opnorm_sweep.csv".to_string()];
    if a.dump_operator {
        outputs.extend(dump_operators(cli, &layout, &rows)?);
    }
    if failed > 0 {
        return Err(Failure::Compute(format!("{failed} grid points failed")));
    }
    Ok(outputs)
}

fn dump_operators(cli: &Cli, layout: &MeshLayout, rows: &[dodlab::SweepRow]) -> Result<Vec<String>, Failure> {
    let mut names = Vec::new();
    for r in rows {
        let rule = QuadratureRule::for_scheme(r.kind, r.p)?;
        let mesh = layout.mesh(r.alpha)?;
        let op = GlobalOperator::assemble(
            &mesh,
            &rule,
            AdvectionConfig::new(layout.speed)?,
            dodlab::PenaltyConfig::new(r.lambda_c)?,
        )?;
        let name = format!("operator_{}_p{}_lambda{}_alpha{}.txt", r.kind.tag(), r.p, r.lambda_c, r.alpha);
        let file = fs::File::create(out(cli, &name))?;
        op.write_triplets(std::io::BufWriter::new(file))?;
        names.push(name);
    }
    Ok(names)
}

fn cmd_optimize(cli: &Cli, a: &OptimizeArgs) -> Result<Vec<String>, Failure> {
    let grid = OptimizerGrid {
        n_lambda: a.n_lambda,
        n_alpha: a.n_alpha,
        bracket_tol: a.bracket_tol,
        layout: a.mesh.layout()?,
        norm: norm_options(cli),
        ..OptimizerGrid::default()
    };
    let mut table = Vec::new();
    for kind in a.kind.kinds() {
        for &p in &a.p {
            let r = optimize_lambda(kind, p, &grid)?;
            eprintln!(
                "{} p={}: lambda*={:.5} worst alpha={:.4} minmax norm={:.6e}",
                kind, p, r.lambda_star, r.worst_alpha, r.minmax_norm
            );
            table.push((kind.tag(), p, r.lambda_star, r.worst_alpha, r.minmax_norm));
        }
    }
    let header = ["kind", "p", "lambda_star", "worst_alpha", "minmax_norm"];
    write_csv(&out(cli, "lambda_opt.csv"), &header, &table)?;
    Ok(vec!["lambda_opt.csv".into()])
}

fn cmd_cfl_search(cli: &Cli, a: &CflArgs) -> Result<Vec<String>, Failure> {
    let layout = a.mesh.layout()?;
    let choices = parse_lambdas(&a.lambda)?;
    let bracket = match a.bracket.as_slice() {
        [lo, hi] => (*lo, *hi),
        _ => return Err(Failure::Usage("--bracket takes exactly two values lo,hi".into())),
    };
    let mut searches = Vec::new();
    for kind in a.kind.kinds() {
        for &p in &a.p {
            for &l in &choices {
                for &alpha in &a.alphas {
                    let mut s = CflSearch::new(a.method.clone(), kind, p, alpha, l);
                    s.t_final = a.t_final;
                    s.bracket = bracket;
                    s.rel_tol = a.rel_tol;
                    s.energy_tol = a.energy_tol;
                    s.window = a.window;
                    s.layout = layout;
                    searches.push(s);
                }
            }
        }
    }
    use rayon::prelude::*;
    let results: Vec<_> = searches.par_iter().map(sharp_cfl_search).collect();
    let mut table = Vec::new();
    let mut first_error = None;
    for (s, r) in searches.iter().zip(results) {
        match r {
            Ok(r) => table.push((r.method, r.kind.tag(), r.p, r.alpha, r.lambda_mode, r.sharp_cfl, r.unstable_cfl)),
            Err(e) => {
                eprintln!("error: {} {} p={} alpha={} lambda={}: {e}", s.method, s.kind, s.p, s.alpha, s.lambda);
                first_error.get_or_insert(e);
            }
        }
    }
    let header = ["method", "kind", "p", "alpha", "lambda_mode", "sharp_cfl", "unstable_cfl"];
    write_csv(&out(cli, "cfl.csv"), &header, &table)?;
    match first_error {
        Some(Error::InvalidArgument(m)) => Err(Failure::Usage(m)),
        Some(e) => Err(Failure::Compute(e.to_string())),
        None => Ok(vec!["cfl.csv".into()]),
    }
}

fn cmd_study(cli: &Cli, a: &StudyArgs, work_precision: bool) -> Result<Vec<String>, Failure> {
    let kind = match a.kind {
        KindArg::Both => return Err(Failure::Usage("studies take a single node kind".into())),
        k => k.kinds()[0],
    };
    let lambda = match parse_lambdas(&a.lambda)?.as_slice() {
        [l] => *l,
        _ => return Err(Failure::Usage("studies take a single lambda_c mode".into())),
    };
    let mut spec = StudySpec::new(kind, a.p, a.method.clone());
    spec.resolutions = a.cells.clone();
    spec.alphas = a.alphas.clone();
    spec.lambda = lambda;
    spec.step_rule = match a.cfl {
        Some(nu) => StepRule::Courant(nu),
        None => StepRule::NormBound(a.norm_constant),
    };
    spec.safety = a.safety.unwrap_or(if work_precision { 0.99 } else { 0.95 });
    spec.t_final = a.t_final;
    spec.speed = a.speed;
    spec.norm = norm_options(cli);
    let (res, stem) = if work_precision {
        (work_precision_study(&spec)?, "work_precision")
    } else {
        (convergence_study(&spec)?, "converge")
    };
    write_study(cli, &res, stem)
}

fn write_study(cli: &Cli, res: &StudyResult, stem: &str) -> Result<Vec<String>, Failure> {
    let alpha = |a: Option<f64>| a.map_or("uncut".to_string(), |v| v.to_string());
    let rows: Vec<_> = res
        .rows
        .iter()
        .map(|r| (&r.series, alpha(r.alpha), r.n_background, r.dofs, r.dt, r.steps, r.error))
        .collect();
    let header = ["series", "alpha", "cells", "dofs", "dt", "steps", "error"];
    let main = format!("{stem}.csv");
    write_csv(&out(cli, &main), &header, &rows)?;
    let orders: Vec<_> = res.orders.iter().map(|o| (&o.series, alpha(o.alpha), o.order)).collect();
    let orders_name = format!("{stem}_orders.csv");
    write_csv(&out(cli, &orders_name), &["series", "alpha", "order"], &orders)?;
    for o in &res.orders {
        eprintln!("{} alpha={}: fitted order {:.3}", o.series, alpha(o.alpha), o.order);
    }
    Ok(vec![main, orders_name])
}

