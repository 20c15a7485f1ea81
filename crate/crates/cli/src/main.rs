//! `opfrelax`: solve, compare and inspect OPF relaxations from the command line.
//!
//! Exit codes: 0 success, 2 usage error or missing input, 3 solver failure,
//! 4 infeasible model.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use opfrelax::projection::{gnuplot_script, write_csv};
use opfrelax::recovery::recover;
use opfrelax::{
    build, chordal_extend, BuiltProgram, compare_relaxations, load_case, project_convex, project_edge_rank1, project_nonconvex,
    raster_components, raster_resolution, CaseError, ExactnessTolerances, OpfModel, Pin, Plane, ProjectionSpec,
    RecoveryReport, Relaxation,
};
use opfrelax_conic::{solve, ConicProgram, ConicSolution, SolveStatus, SolverSettings};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "opfrelax", version, about = "Convex relaxations of AC optimal power flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Solver feasibility and gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol_gap: self.tol,
            tol_feas: self.tol,
            max_iters: self.max_iters,
            ..SolverSettings::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one relaxation and print a JSON report.
    Solve {
        /// Bundled case name (table1, case9, case14, case30) or file path.
        #[arg(long)]
        case: String,
        #[arg(long, default_value = "r1")]
        relaxation: Relaxation,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also save the primal solution for `recover`.
        #[arg(long)]
        save_solution: Option<PathBuf>,
    },
    /// Solve several relaxations and print a CSV table.
    Compare {
        #[arg(long)]
        case: String,
        /// Comma-separated list; defaults to all.
        #[arg(long, value_delimiter = ',')]
        relaxation: Vec<Relaxation>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chordal extension statistics as JSON.
    ChordalInfo {
        #[arg(long)]
        case: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Projections of feasible sets onto the (p1, p2) or (q1, q2) plane.
    Project {
        #[arg(long, default_value = "table1")]
        case: String,
        #[arg(long, value_enum, default_value_t = PlaneArg::P)]
        plane: PlaneArg,
        /// JSON list of pins; defaults to |V| = 1 everywhere and p3 = -0.95 for table1.
        #[arg(long)]
        pins: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        directions: usize,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output directory for the CSV files and plot script.
        #[arg(long, default_value = "projection")]
        out: PathBuf,
    },
    /// Voltage profile JSON from a solution saved by `solve --save-solution`.
    Recover {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the conic program of one relaxation as JSON.
    Export {
        #[arg(long)]
        case: String,
        #[arg(long, default_value = "r1")]
        relaxation: Relaxation,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a conic program JSON file and print the solution as JSON.
    SolveProgram {
        #[arg(long)]
        program: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlaneArg {
    P,
    Q,
}

/// Error carrying the process exit code.
#[derive(Debug)]
struct Exit {
    code: u8,
    msg: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Exit {}

fn exit(code: u8, msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Exit { code, msg: msg.into() })
}

fn check_status(status: SolveStatus) -> Result<()> {
    match status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::PrimalInfeasible => Err(exit(4, "model is infeasible")),
        s => Err(exit(3, format!("solver failed: {s}"))),
    }
}

fn load(case: &str) -> Result<(opfrelax::Network, opfrelax::CostSpec)> {
    load_case(case).map_err(|e| match e {
        CaseError::Unknown(_) | CaseError::Io { .. } => exit(2, e.to_string()),
        other => anyhow!(other),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Serialize, Deserialize)]
struct SavedSolution {
    case: String,
    relaxation: Relaxation,
    x: Vec<f64>,
}

#[derive(Serialize)]
struct SolveReport {
    case: String,
    relaxation: Relaxation,
    status: String,
    objective: f64,
    iterations: usize,
    seconds: f64,
    recovery: RecoveryReport,
}

fn recovery_for(model: &OpfModel, built: &BuiltProgram, x: &[f64], objective: f64) -> Result<RecoveryReport> {
    if x.len() != built.program.num_vars {
        bail!("solution has {} entries, program has {}", x.len(), built.program.num_vars);
    }
    let rep = recover(
        &built.extract(x),
        built.relaxation,
        &built.blocks,
        &model.network,
        &ExactnessTolerances::default(),
    )?;
    Ok(rep.attach(&model.network, &model.cost, Some(objective)))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            case,
            relaxation,
            solver,
            out,
            save_solution,
        } => {
            let (net, cost) = load(&case)?;
            let model = OpfModel::new(net, cost);
            let start = Instant::now();
            let built = build(&model, relaxation)?;
            let sol = solve(&built.program, &solver.settings())?;
            let seconds = start.elapsed().as_secs_f64();
            check_status(sol.status)?;
            let recovery = recovery_for(&model, &built, &sol.x, sol.objective)?;
            let report = SolveReport {
                case: case.clone(),
                relaxation,
                status: sol.status.to_string(),
                objective: sol.objective,
                iterations: sol.iterations,
                seconds,
                recovery,
            };
            if let Some(p) = save_solution {
                let saved = SavedSolution {
                    case,
                    relaxation,
                    x: sol.x,
                };
                fs::write(&p, to_json(&saved)?).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(out.as_deref(), &to_json(&report)?)
        }
        Command::Compare {
            case,
            relaxation,
            solver,
            out,
        } => {
            let (net, cost) = load(&case)?;
            let which = if relaxation.is_empty() {
                Relaxation::ALL.to_vec()
            } else {
                relaxation
            };
            let rows = compare_relaxations(
                &OpfModel::new(net, cost),
                &which,
                &solver.settings(),
                &ExactnessTolerances::default(),
            )?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            emit(out.as_deref(), std::str::from_utf8(&buf)?)?;
            if let Some(bad) = rows.iter().find(|r| r.status != SolveStatus::Optimal.to_string()) {
                let code = if bad.status == SolveStatus::PrimalInfeasible.to_string() { 4 } else { 3 };
                return Err(exit(code, format!("{}: {}", bad.relaxation, bad.status)));
            }
            Ok(())
        }
        Command::ChordalInfo { case, out } => {
            let (net, _) = load(&case)?;
            let g = net.graph();
            let ext = chordal_extend(&g);
            let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
            for c in &ext.maximal_cliques {
                *hist.entry(c.len()).or_default() += 1;
            }
            let info = serde_json::json!({
                "case": case,
                "buses": net.n(),
                "edges": g.m(),
                "fill_edges": ext.fill_edges.len(),
                "cliques": ext.maximal_cliques.len(),
                "max_clique": ext.maximal_cliques.iter().map(Vec::len).max().unwrap_or(0),
                "clique_sizes": hist,
            });
            emit(out.as_deref(), &to_json(&info)?)
        }
        Command::Project {
            case,
            plane,
            pins,
            directions,
            grid,
            solver,
            out,
        } => {
            let (net, _) = load(&case)?;
            let plane = match plane {
                PlaneArg::P => Plane::P1P2,
                PlaneArg::Q => Plane::Q1Q2,
            };
            let mut spec = ProjectionSpec::table1(plane);
            spec.directions = directions;
            spec.grid = grid;
            match pins {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| exit(2, format!("{}: {e}", p.display())))?;
                    spec.pins = serde_json::from_str::<Vec<Pin>>(&text).map_err(|e| exit(2, format!("pins: {e}")))?;
                }
                None if case != opfrelax::cases::TABLE1 => {
                    return Err(exit(2, "--pins is required for cases other than table1"));
                }
                None => {}
            }
            spec.validate().map_err(|e| exit(2, e.to_string()))?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let tol = ExactnessTolerances::default();
            let settings = solver.settings();
            let mut files = Vec::new();
            for (name, r) in [("r1", Relaxation::R1), ("r2", Relaxation::R2)] {
                let pts = project_convex(&net, &spec, r, &settings, &tol).map_err(|e| match e {
                    opfrelax::ProjectionError::Infeasible(_) => exit(4, e.to_string()),
                    opfrelax::ProjectionError::SolverFailed { .. } => exit(3, e.to_string()),
                    other => anyhow!(other),
                })?;
                let file = format!("{name}.csv");
                write_csv(&pts, fs::File::create(out.join(&file))?)?;
                files.push((file, format!("{name} support points")));
            }
            let nonconvex = project_nonconvex(&net, &spec)?;
            let edge = project_edge_rank1(&net, &spec)?;
            let res = raster_resolution(grid);
            for (name, pts) in [("nonconvex", &nonconvex), ("edge_rank1", &edge)] {
                let file = format!("{name}.csv");
                write_csv(pts, fs::File::create(out.join(&file))?)?;
                files.push((file, name.to_string()));
                let c = raster_components(pts, res);
                println!(
                    "{name}: {} points, {} occupied and {} empty components at {res}x{res}",
                    pts.len(),
                    c.occupied,
                    c.complement
                );
            }
            let refs: Vec<(&str, &str)> = files.iter().map(|(f, t)| (f.as_str(), t.as_str())).collect();
            fs::write(out.join("plot.gp"), gnuplot_script(plane, &refs))?;
            Ok(())
        }
        Command::Recover { solution, out } => {
            let text =
                fs::read_to_string(&solution).map_err(|e| exit(2, format!("{}: {e}", solution.display())))?;
            let saved: SavedSolution = serde_json::from_str(&text).context("parsing solution file")?;
            let (net, cost) = load(&saved.case)?;
            let model = OpfModel::new(net, cost);
            let built = build(&model, saved.relaxation)?;
            let objective = built.program.objective_offset
                + built.program.objective.iter().zip(&saved.x).map(|(c, x)| c * x).sum::<f64>();
            let rep = recovery_for(&model, &built, &saved.x, objective)?;
            let Some(profile) = rep.voltage.clone() else {
                return Err(exit(3, "relaxation is not exact; no voltage profile"));
            };
            let body = serde_json::json!({
                "exact": rep.exact,
                "eig_ratio": rep.eig_ratio,
                "cycle_residual": rep.cycle_residual,
                "objective_gap": rep.objective_gap,
                "voltage": profile,
            });
            emit(out.as_deref(), &to_json(&body)?)
        }
        Command::Export { case, relaxation, out } => {
            let (net, cost) = load(&case)?;
            let built = build(&OpfModel::new(net, cost), relaxation)?;
            emit(out.as_deref(), &(built.program.to_json() + "\n"))
        }
        Command::SolveProgram { program, solver, out } => {
            let text = fs::read_to_string(&program).map_err(|e| exit(2, format!("{}: {e}", program.display())))?;
            let prog = ConicProgram::from_json(&text).map_err(|e| exit(2, e.to_string()))?;
            let sol: ConicSolution = solve(&prog, &solver.settings())?;
            emit(out.as_deref(), &(sol.to_json() + "\n"))?;
            check_status(sol.status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Exit>().map_or(1, |x| x.code);
            ExitCode::from(code)
        }
    }
}
