//! Command-line surface: solve / filter / eval / gen / oracle.
//!
//! Exit codes: 0 success (scene accepted for `solve`/`filter`), 1 I/O or
//! internal error, 2 validation or parse error, 3 scene rejected by the
//! residual filter, 4 infeasible corrected depth.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::depthfit::{DEFAULT_ALPHA1, DEFAULT_ALPHA2};
use crate::io::{
    evaluate, load_prior_table, load_scene, write_canonical_json, AnnotationsFile, EvalOptions,
    PcdrAggregation, PersonAnnotation, PersonPrediction, PredictionsFile, SceneAnnotations,
    SceneFile, ScenePredictions, SolutionFile,
};
use crate::metrics::DEFAULT_PCDR_EQUAL_THRESHOLD_M;
use crate::priors::PriorTable;
use crate::scenegen::{generate, oracle_solve, GenConfig, GridSpec};
use crate::solver::{
    filter_scene, solve_scene, DtoSolution, PipelineError, SolveError, SolveOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "dto",
    version,
    about = "Depth-conditioned translation optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one scene (or a directory of scenes) for the affine depth
    /// transform and corrected placements.
    Solve(SolveArgs),
    /// Re-apply the residual filter to an existing solution.
    Filter(FilterArgs),
    /// Score predictions against annotations (PCDR, height error).
    Eval(EvalArgs),
    /// Generate synthetic scenes with ground truth.
    Gen(GenArgs),
    /// Run the brute-force grid oracle next to the analytic solver.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct CommonSolveArgs {
    /// Residual filter threshold.
    #[arg(long, default_value_t = crate::solver::DEFAULT_FILTER_THRESHOLD)]
    threshold: f64,
    /// Lower scale-bound multiplier (non-quasi-planar scenes).
    #[arg(long, default_value_t = DEFAULT_ALPHA1)]
    alpha1: f64,
    /// Upper scale-bound multiplier (non-quasi-planar scenes).
    #[arg(long, default_value_t = DEFAULT_ALPHA2)]
    alpha2: f64,
    /// JSON table of demographic mixture components per group.
    #[arg(long)]
    prior_table: Option<PathBuf>,
}

impl CommonSolveArgs {
    fn priors(&self) -> anyhow::Result<PriorTable> {
        match &self.prior_table {
            Some(path) => Ok(load_prior_table(path)?),
            None => Ok(PriorTable::default()),
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Input scene JSON.
    #[arg(long = "in", value_name = "SCENE", conflicts_with = "batch")]
    input: Option<PathBuf>,
    /// Output solution JSON (single-scene mode).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory of scene JSON files to process.
    #[arg(long)]
    batch: Option<PathBuf>,
    /// Directory for per-scene solutions (batch mode).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Merged batch report (predictions schema, sorted by filename).
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: CommonSolveArgs,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = crate::solver::DEFAULT_FILTER_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregationArg {
    Images,
    Pairs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PCDR_EQUAL_THRESHOLD_M)]
    pcdr_threshold: f64,
    #[arg(long, value_enum, default_value = "images")]
    pcdr_aggregation: AggregationArg,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Generator configuration JSON (GenConfig schema).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes; scene i uses seed config.seed + i.
    #[arg(long)]
    count: usize,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long = "in", value_name = "SCENE")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 2000)]
    grid: usize,
    /// Relative margin of the search box around the analytic solution.
    #[arg(long, default_value_t = 0.25)]
    margin: f64,
    #[command(flatten)]
    common: CommonSolveArgs,
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify_error(&e)
        }
    }
}

fn classify_error(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(io_err) = cause.downcast_ref::<crate::io::IoError>() {
            return match io_err {
                crate::io::IoError::Parse { .. }
                | crate::io::IoError::Validation { .. }
                | crate::io::IoError::Raster { .. } => EXIT_VALIDATION,
                crate::io::IoError::Io { .. } => EXIT_ERROR,
            };
        }
        if cause.downcast_ref::<PipelineError>().is_some()
            || cause.downcast_ref::<SolveError>().is_some()
            || cause.downcast_ref::<crate::scenegen::GenError>().is_some()
        {
            return EXIT_VALIDATION;
        }
    }
    EXIT_ERROR
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Filter(args) => run_filter(args),
        Command::Eval(args) => run_eval(args),
        Command::Gen(args) => run_gen(args),
        Command::Oracle(args) => run_oracle(args),
    }
}

fn solve_options(common: &CommonSolveArgs, scale_estimate: Option<f64>) -> SolveOptions {
    SolveOptions {
        filter_threshold: common.threshold,
        alpha1: common.alpha1,
        alpha2: common.alpha2,
        scale_estimate_override: scale_estimate,
    }
}

fn solution_exit_code(solution: &DtoSolution) -> i32 {
    if solution.infeasible_depth {
        EXIT_INFEASIBLE
    } else if !solution.accepted {
        EXIT_REJECTED
    } else {
        EXIT_OK
    }
}

fn run_solve(args: SolveArgs) -> anyhow::Result<i32> {
    let priors = args.common.priors()?;
    match (&args.input, &args.batch) {
        (Some(input), None) => {
            let scene = load_scene(input, &priors)?;
            let options = solve_options(&args.common, scene.scale_estimate);
            let solution = solve_scene(&scene.persons, &options)?;
            if let Some(out) = &args.out {
                SolutionFile::new(solution.clone()).save(out)?;
            }
            let code = solution_exit_code(&solution);
            eprintln!(
                "{}: kkt_case={:?} scale={:.6} shift={:.6} mean_residual={:.4} accepted={}",
                input.display(),
                solution.kkt_case,
                solution.transform.scale,
                solution.transform.shift,
                solution.mean_residual,
                solution.accepted,
            );
            Ok(code)
        }
        (None, Some(dir)) => run_solve_batch(dir, &args, &priors),
        _ => anyhow::bail!("exactly one of --in / --batch is required"),
    }
}

fn run_solve_batch(dir: &Path, args: &SolveArgs, priors: &PriorTable) -> anyhow::Result<i32> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name()
                    .is_some_and(|n| n.to_string_lossy().starts_with("scene"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        anyhow::bail!("no scene*.json files in {}", dir.display());
    }
    if let Some(out_dir) = &args.out_dir {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating {}", out_dir.display()))?;
    }

    // per-file isolation: a failing scene becomes an error entry in the
    // report instead of aborting the batch
    let results: Vec<(String, Result<DtoSolution, String>)> = std::thread::scope(|scope| {
        let priors = &priors;
        let common = &args.common;
        let handles: Vec<_> = files
            .iter()
            .map(|path| {
                scope.spawn(move || {
                    let stem = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| path.display().to_string());
                    let outcome = (|| -> anyhow::Result<DtoSolution> {
                        let scene = load_scene(path, priors)?;
                        let options = solve_options(common, scene.scale_estimate);
                        Ok(solve_scene(&scene.persons, &options)?)
                    })()
                    .map_err(|e| format!("{e:#}"));
                    (stem, outcome)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("batch worker panicked"))
            .collect()
    });

    let mut any_failed = false;
    let mut report_scenes = Vec::with_capacity(results.len());
    for (stem, outcome) in &results {
        match outcome {
            Ok(solution) => {
                if let Some(out_dir) = &args.out_dir {
                    SolutionFile::new(solution.clone())
                        .save(&out_dir.join(format!("{stem}.solution.json")))?;
                }
                report_scenes.push(ScenePredictions {
                    scene_id: stem.clone(),
                    accepted: Some(solution.accepted),
                    kkt_case: Some(solution.kkt_case),
                    error: None,
                    persons: solution
                        .persons
                        .iter()
                        .map(|p| PersonPrediction {
                            id: p.id.clone(),
                            depth: p.corrected_depth,
                            height: p.corrected_height,
                        })
                        .collect(),
                });
            }
            Err(message) => {
                any_failed = true;
                eprintln!("{stem}: {message}");
                report_scenes.push(ScenePredictions {
                    scene_id: stem.clone(),
                    accepted: None,
                    kkt_case: None,
                    error: Some(message.clone()),
                    persons: vec![],
                });
            }
        }
    }
    if let Some(report) = &args.report {
        PredictionsFile::new(report_scenes).save(report)?;
    }
    let accepted = results
        .iter()
        .filter(|(_, r)| r.as_ref().is_ok_and(|s| s.accepted))
        .count();
    eprintln!("batch: {} scenes, {} accepted", results.len(), accepted);
    Ok(if any_failed { EXIT_VALIDATION } else { EXIT_OK })
}

fn run_filter(args: FilterArgs) -> anyhow::Result<i32> {
    let file = SolutionFile::load(&args.solution)?;
    if file.solution.infeasible_depth {
        eprintln!("{}: infeasible depth", args.solution.display());
        return Ok(EXIT_INFEASIBLE);
    }
    let keep = filter_scene(&file.solution, args.threshold);
    eprintln!(
        "{}: mean_residual={:.4} threshold={} -> {}",
        args.solution.display(),
        file.solution.mean_residual,
        args.threshold,
        if keep { "accept" } else { "reject" },
    );
    Ok(if keep { EXIT_OK } else { EXIT_REJECTED })
}

fn run_eval(args: EvalArgs) -> anyhow::Result<i32> {
    let pred = PredictionsFile::load(&args.pred)?;
    let gt = AnnotationsFile::load(&args.gt)?;
    let options = EvalOptions {
        equal_threshold: args.pcdr_threshold,
        aggregation: match args.pcdr_aggregation {
            AggregationArg::Images => PcdrAggregation::Images,
            AggregationArg::Pairs => PcdrAggregation::Pairs,
        },
    };
    let report = evaluate(&pred, &gt, &options)?;
    report.save(&args.out)?;
    eprintln!(
        "eval: pcdr={:?} height_error_mm={:?} n_scenes={} n_pairs={}",
        report.pcdr, report.height_error_mm, report.n_scenes, report.n_pairs
    );
    Ok(EXIT_OK)
}

fn run_gen(args: GenArgs) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let base: GenConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if args.count == 0 {
        anyhow::bail!("--count must be at least 1");
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let mut manifest_scenes = Vec::with_capacity(args.count);
    let mut annotation_scenes = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let config = GenConfig {
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        };
        let scene = generate(&config)?;
        let scene_id = format!("scene_{i:04}");
        SceneFile::from_ground_truth(&scene).save(&args.out.join(format!("{scene_id}.json")))?;

        let layers = scene.depth_layers();
        annotation_scenes.push(SceneAnnotations {
            scene_id: scene_id.clone(),
            persons: scene
                .truths
                .iter()
                .zip(&layers)
                .zip(&scene.persons)
                .map(|((t, &layer), p)| PersonAnnotation {
                    id: t.id.clone(),
                    depth_layer: Some(layer),
                    gt_depth: Some(t.true_depth),
                    gt_height: Some(t.true_height),
                    age_group: Some(p.age_group),
                })
                .collect(),
        });
        manifest_scenes.push(serde_json::json!({
            "scene_id": scene_id,
            "transform": scene.transform,
            "persons": scene.truths,
        }));
    }
    let manifest = serde_json::json!({
        "schema_version": "dto-manifest-v1",
        "config": base,
        "count": args.count,
        "scenes": manifest_scenes,
    });
    write_canonical_json(&args.out.join("manifest.json"), &manifest)?;
    AnnotationsFile::new(annotation_scenes).save(&args.out.join("annotations.json"))?;
    eprintln!("gen: wrote {} scenes to {}", args.count, args.out.display());
    Ok(EXIT_OK)
}

fn run_oracle(args: OracleArgs) -> anyhow::Result<i32> {
    let priors = args.common.priors()?;
    let scene = load_scene(&args.input, &priors)?;
    let options = solve_options(&args.common, scene.scale_estimate);
    let solution = solve_scene(&scene.persons, &options)?;
    let grid = GridSpec::around(
        solution.transform.scale,
        solution.transform.shift,
        args.margin,
        0.5,
        args.grid,
    );
    let oracle = oracle_solve(&scene.persons, &solution.scale_bounds, &grid);
    let out = serde_json::json!({
        "schema_version": "dto-oracle-v1",
        "analytic": {
            "scale": solution.transform.scale,
            "shift": solution.transform.shift,
            "objective_value": solution.objective_value,
            "kkt_case": solution.kkt_case,
        },
        "oracle": {
            "scale": oracle.scale,
            "shift": oracle.shift,
            "objective": oracle.objective,
            "s_cell": oracle.s_cell,
            "t_cell": oracle.t_cell,
        },
        "grid_cells": args.grid,
        "margin": args.margin,
    });
    write_canonical_json(&args.out, &out)?;
    eprintln!(
        "oracle: analytic ({:.6}, {:.6}) grid ({:.6}, {:.6}) cells ({:.3e}, {:.3e})",
        solution.transform.scale,
        solution.transform.shift,
        oracle.scale,
        oracle.shift,
        oracle.s_cell,
        oracle.t_cell,
    );
    Ok(EXIT_OK)
}
