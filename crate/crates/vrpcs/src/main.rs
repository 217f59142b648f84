//! Command-line front end: generate grids, solve instances, export MILP
//! models, validate solutions, run grids and aggregate results.
//!
//! Exit codes: 0 success, 2 infeasible, 3 bad input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use vrpcs::eligibility::GeoScene;
use vrpcs::exact::{solve_exact, ExactConfig};
use vrpcs::generator::{
    generate_grid, manifest_to_csv, materialize_cell, parse_manifest_csv, CellSpec, GridSpec,
};
use vrpcs::harness::{
    aggregate, aggregates_to_csv, parse_results_csv, plots_to_csv, results_to_csv, route_geojson,
    run_grid, timings_to_csv, GridRunConfig, SolverChoice,
};
use vrpcs::heuristic::{solve_heuristic, HeuristicConfig};
use vrpcs::milp::{build_model, export_text};
use vrpcs::model::{validate, Instance, Solution};
use vrpcs::SolveError;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BAD_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "vrpcs", about = "Vehicle routing with crowd-shippers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exact,
    Heuristic,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a grid of instances: manifest, scenes and instance files.
    Generate {
        /// Grid spec JSON; defaults apply for missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's master seed.
        #[arg(long)]
        master_seed: Option<u64>,
        /// Write only gridspec.json and manifest.csv.
        #[arg(long)]
        manifest_only: bool,
    },
    /// Solve one instance file.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        solver: SolverArg,
        /// Wall-clock budget in seconds (heuristic only).
        #[arg(long, default_value_t = 600.0)]
        budget_s: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the solution JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the exact solver's search certificate JSON here.
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Write a JSON-lines trace of accepted heuristic moves here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Solve every cell of a grid manifest.
    Grid {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        solver: SolverArg,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Per-cell wall-clock budget in seconds (heuristic only).
        #[arg(long, default_value_t = 600.0)]
        budget_s: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fleet size when no gridspec.json sits next to the manifest.
        #[arg(long)]
        fleet_size: Option<i64>,
        /// Output directory (results.csv, timings.csv, solutions/).
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a results CSV into per-reward saving rows.
    Aggregate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        baseline_p: f64,
        /// Write the aggregate CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the MILP of an instance as free-format MPS plus sidecar.
    ExportMilp {
        #[arg(long)]
        instance: PathBuf,
        /// Output .mps path; the sidecar lands next to it as .meta.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a solution file against an instance file.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Export plot-ready CSV and per-cell route GeoJSON from grid outputs.
    ExportPlots {
        #[arg(long)]
        results: PathBuf,
        /// Manifest used to rebuild scenes for GeoJSON export.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding per-cell solution JSONs (grid --out layout).
        #[arg(long)]
        solutions: Option<PathBuf>,
        /// Comma-separated cell ids to render as GeoJSON.
        #[arg(long)]
        cells: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Infeasible(String),
    BadInput(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::BadInput(e)
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            SolveError::TooLarge { .. } => CliError::BadInput(anyhow!(e)),
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::BadInput)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing instance {}", path.display()))
        .map_err(CliError::BadInput)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(CliError::BadInput)?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::BadInput)
}

fn pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            spec,
            out,
            master_seed,
            manifest_only,
        } => {
            let mut grid_spec: GridSpec = match spec {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))
                        .map_err(CliError::BadInput)?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing grid spec {}", path.display()))
                        .map_err(CliError::BadInput)?
                }
                None => GridSpec::default(),
            };
            if let Some(seed) = master_seed {
                grid_spec.master_seed = seed;
            }
            let cells = generate_grid(&grid_spec)
                .map_err(|e| CliError::BadInput(anyhow!(e)))?;
            write_text(&out.join("gridspec.json"), &pretty_json(&grid_spec))?;
            write_text(&out.join("manifest.csv"), &manifest_to_csv(&cells))?;
            if !manifest_only {
                for cell in &cells {
                    let (scene, instance) = materialize_cell(cell, grid_spec.fleet_size)
                        .map_err(|e| CliError::BadInput(anyhow!(e)))?;
                    write_text(
                        &out.join("scenes").join(format!("{}.scene.json", cell.cell_id)),
                        &pretty_json(&scene),
                    )?;
                    write_text(
                        &out.join("instances").join(format!("{}.json", cell.cell_id)),
                        &pretty_json(&instance),
                    )?;
                }
            }
            eprintln!(
                "generated {} cells under {}",
                cells.len(),
                out.display()
            );
            Ok(())
        }
        Command::Solve {
            instance,
            solver,
            budget_s,
            seed,
            out,
            certificate,
            trace_out,
        } => {
            let inst = read_instance(&instance)?;
            let solution: Solution = match solver {
                SolverArg::Exact => {
                    let (solution, stats) = solve_exact(&inst, &ExactConfig::default())?;
                    if let Some(path) = certificate {
                        write_text(&path, &pretty_json(&stats))?;
                    }
                    solution
                }
                SolverArg::Heuristic => {
                    let cfg = HeuristicConfig {
                        seed,
                        budget: Some(Duration::from_secs_f64(budget_s)),
                        trace: trace_out.is_some(),
                        ..Default::default()
                    };
                    let (solution, report) = solve_heuristic(&inst, &cfg)?;
                    if let Some(path) = trace_out {
                        let mut lines = String::new();
                        for event in &report.trace {
                            lines.push_str(&serde_json::to_string(event).expect("serializable"));
                            lines.push('\n');
                        }
                        write_text(&path, &lines)?;
                    }
                    solution
                }
            };
            let report = validate(&inst, &solution)
                .map_err(|e| CliError::BadInput(anyhow!(e)))?;
            if !report.feasible {
                return Err(CliError::Infeasible(format!(
                    "solver emitted an infeasible solution: {:?}",
                    report.violations
                )));
            }
            let text = pretty_json(&solution);
            match out {
                Some(path) => write_text(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Grid {
            manifest,
            solver,
            jobs,
            budget_s,
            seed,
            fleet_size,
            out,
        } => {
            let text = fs::read_to_string(&manifest)
                .with_context(|| format!("reading {}", manifest.display()))
                .map_err(CliError::BadInput)?;
            let cells = parse_manifest_csv(&text)
                .map_err(|e| CliError::BadInput(anyhow!(e)))?;
            let fleet = match fleet_size {
                Some(m) => m,
                None => sibling_gridspec(&manifest)
                    .map(|s| s.fleet_size)
                    .unwrap_or(10),
            };
            let config = GridRunConfig {
                solver: match solver {
                    SolverArg::Exact => SolverChoice::Exact,
                    SolverArg::Heuristic => SolverChoice::Heuristic,
                },
                jobs,
                budget: Some(Duration::from_secs_f64(budget_s)),
                seed,
                fleet_size: fleet,
            };
            let outcomes = run_grid(&cells, &config);
            let rows: Vec<_> = outcomes.iter().map(|o| o.result.clone()).collect();
            write_text(&out.join("results.csv"), &results_to_csv(&rows))?;
            write_text(&out.join("timings.csv"), &timings_to_csv(&rows))?;
            for outcome in &outcomes {
                if let Some(solution) = &outcome.solution {
                    write_text(
                        &out.join("solutions")
                            .join(format!("{}.json", outcome.result.cell_id)),
                        &pretty_json(solution),
                    )?;
                }
            }
            let failed: Vec<&str> = rows
                .iter()
                .filter(|r| !r.feasible)
                .map(|r| r.cell_id.as_str())
                .collect();
            if failed.is_empty() {
                eprintln!("{} cells solved", rows.len());
                Ok(())
            } else {
                Err(CliError::Infeasible(format!(
                    "{} of {} cells failed: {}",
                    failed.len(),
                    rows.len(),
                    failed.join(", ")
                )))
            }
        }
        Command::Aggregate {
            results,
            baseline_p,
            out,
        } => {
            let text = fs::read_to_string(&results)
                .with_context(|| format!("reading {}", results.display()))
                .map_err(CliError::BadInput)?;
            let rows = parse_results_csv(&text)
                .map_err(|e| CliError::BadInput(anyhow!(e)))?;
            let agg = aggregate(&rows, baseline_p)
                .map_err(|e| CliError::BadInput(anyhow!(e)))?;
            let csv = aggregates_to_csv(&agg);
            match out {
                Some(path) => write_text(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::ExportMilp { instance, out } => {
            let inst = read_instance(&instance)?;
            let model = build_model(&inst);
            write_text(&out, &export_text(&model))?;
            let sidecar_path = out.with_extension("meta.json");
            write_text(&sidecar_path, &pretty_json(&model.sidecar()))?;
            Ok(())
        }
        Command::Validate { instance, solution } => {
            let inst = read_instance(&instance)?;
            let text = fs::read_to_string(&solution)
                .with_context(|| format!("reading {}", solution.display()))
                .map_err(CliError::BadInput)?;
            let sol: Solution = serde_json::from_str(&text)
                .with_context(|| format!("parsing solution {}", solution.display()))
                .map_err(CliError::BadInput)?;
            let report = validate(&inst, &sol)
                .map_err(|e| CliError::BadInput(anyhow!(e)))?;
            print!("{}", pretty_json(&report));
            if report.feasible {
                Ok(())
            } else {
                Err(CliError::Infeasible(format!(
                    "{} violation(s)",
                    report.violations.len()
                )))
            }
        }
        Command::ExportPlots {
            results,
            manifest,
            solutions,
            cells,
            out,
        } => {
            let text = fs::read_to_string(&results)
                .with_context(|| format!("reading {}", results.display()))
                .map_err(CliError::BadInput)?;
            let rows = parse_results_csv(&text)
                .map_err(|e| CliError::BadInput(anyhow!(e)))?;
            write_text(
                &out.join("plots.csv"),
                &plots_to_csv(&rows).map_err(|e| CliError::BadInput(anyhow!(e)))?,
            )?;

            if let Some(list) = cells {
                let manifest_text = fs::read_to_string(&manifest)
                    .with_context(|| format!("reading {}", manifest.display()))
                    .map_err(CliError::BadInput)?;
                let manifest_cells = parse_manifest_csv(&manifest_text)
                    .map_err(|e| CliError::BadInput(anyhow!(e)))?;
                let fleet = sibling_gridspec(&manifest)
                    .map(|s| s.fleet_size)
                    .unwrap_or(10);
                let solutions_dir = solutions
                    .ok_or_else(|| CliError::BadInput(anyhow!("--solutions required with --cells")))?;
                for id in list.split(',').filter(|s| !s.is_empty()) {
                    let cell: &CellSpec = manifest_cells
                        .iter()
                        .find(|c| c.cell_id == id)
                        .ok_or_else(|| {
                            CliError::BadInput(anyhow!("cell `{id}` not in manifest"))
                        })?;
                    let (scene, instance): (GeoScene, Instance) =
                        materialize_cell(cell, fleet)
                            .map_err(|e| CliError::BadInput(anyhow!(e)))?;
                    let sol_path = solutions_dir.join(format!("{id}.json"));
                    let sol_text = fs::read_to_string(&sol_path)
                        .with_context(|| format!("reading {}", sol_path.display()))
                        .map_err(CliError::BadInput)?;
                    let solution: Solution = serde_json::from_str(&sol_text)
                        .with_context(|| format!("parsing {}", sol_path.display()))
                        .map_err(CliError::BadInput)?;
                    let geo = route_geojson(&scene, &instance, &solution);
                    write_text(
                        &out.join(format!("{id}.geojson")),
                        &format!("{}\n", serde_json::to_string_pretty(&geo).expect("geojson")),
                    )?;
                }
            }
            Ok(())
        }
    }
}

fn sibling_gridspec(manifest: &Path) -> Option<GridSpec> {
    let dir = manifest.parent()?;
    let text = fs::read_to_string(dir.join("gridspec.json")).ok()?;
    serde_json::from_str(&text).ok()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(CliError::BadInput(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
