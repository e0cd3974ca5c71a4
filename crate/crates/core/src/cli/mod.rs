//! `tworiem` command line: scenario verification and one-shot diagnostics.
//!
//! Exit codes: 0 all checks pass, 1 a check failed or errored, 2 input
//! error, 64 usage error.

pub mod report;
pub mod runner;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::catalog;
use crate::curvature::{never_vanish_search, Named};
use crate::fields::{sup_norm, BoxDomain, ScalarField, VectorField};
use crate::flatness::{classify_conformal_3d, flatten_2d, flatten_residual, DEFAULT_QUAD_TOL};
use crate::metric::TwoMetric;
use crate::stationary::{div_residual, stationarity_residual, STATIONARY_TOL};
use scenario::{resolve_seed, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "tworiem", version, about = "Numerical verification of 2-Riemannian geometry")]
struct Cli {
    /// Write the JSON output here instead of standard output.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Seed for random points and witnesses (overrides scenario and TWORIEM_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Absolute tolerance for checks that do not set their own.
    #[arg(long = "tol-abs", global = true)]
    tol_abs: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every check of a scenario file.
    Verify { scenario: PathBuf },
    /// Flatten g(e1,e1/e2) = G on a planar box.
    Flatten2d {
        /// Expression for G in x, y; must be positive on the box.
        #[arg(long = "g-expr")]
        g_expr: String,
        /// `lo,hi` for every axis or `lo1,hi1,lo2,hi2`.
        #[arg(long = "box", default_value = "-1,1", allow_hyphen_values = true, value_parser = parse_box_arg)]
        domain: BoxArg,
        /// Quadrature tolerance.
        #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
        tol: f64,
    },
    /// Classify lambda·g^st on a box in R^3 (coordinates x1, x2, x3).
    Conformal3d {
        /// Conformal factor in x1, x2, x3.
        #[arg(long)]
        lambda: String,
        #[arg(long = "box", default_value = "-1,1", allow_hyphen_values = true, value_parser = parse_box_arg)]
        domain: BoxArg,
        /// Random sample points for the fit.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Acceptance threshold for the inversion fit.
        #[arg(long = "fit-tol", default_value_t = 1e-6)]
        fit_tol: f64,
    },
    /// Stationarity of a planar field for lambda·g^st (coordinates x, y).
    Stationary {
        /// Conformal factor in x, y.
        #[arg(long, default_value = "1")]
        lambda: String,
        /// Components as "<fx>,<fy>".
        #[arg(long)]
        field: String,
        #[arg(long = "box", default_value = "-1,1", allow_hyphen_values = true, value_parser = parse_box_arg)]
        domain: BoxArg,
    },
    /// Search for a non-vanishing curvature component of a scenario's metric.
    CurvatureWitness {
        scenario: PathBuf,
        /// Field tuples to try before giving up.
        #[arg(long = "max-tuples", default_value_t = 64)]
        max_tuples: usize,
        /// Stop once the normalized value exceeds this.
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
    },
}

/// `--box` value: flattened `lo,hi` pairs.
#[derive(Clone, Debug)]
struct BoxArg(Vec<f64>);

fn parse_box_arg(s: &str) -> Result<BoxArg, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect::<Result<_, _>>()?;
    if v.is_empty() || v.len() % 2 != 0 || v.len() > 6 {
        return Err("expected lo,hi pairs".into());
    }
    Ok(BoxArg(v))
}

fn make_box(v: &[f64], dim: usize) -> Result<BoxDomain, ScenarioError> {
    let pairs: Vec<(f64, f64)> = v.chunks(2).map(|c| (c[0], c[1])).collect();
    let pairs = match pairs.len() {
        1 => vec![pairs[0]; dim],
        n if n == dim => pairs,
        n => return Err(ScenarioError::Invalid(format!("box has {n} intervals for dimension {dim}"))),
    };
    BoxDomain::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
        .map_err(|e| ScenarioError::Invalid(e.to_string()))
}

fn input<E: std::fmt::Display>(e: E) -> ScenarioError {
    ScenarioError::Invalid(e.to_string())
}

/// JSON output plus exit code.
struct Output {
    json: String,
    code: i32,
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

fn verify(cli: &Cli, path: &PathBuf) -> Result<Output, ScenarioError> {
    let loaded = scenario::load(path)?;
    let seed = resolve_seed(cli.seed, loaded.scenario.seed)?;
    let ctx = scenario::compile(&loaded.scenario, seed)?;
    let rep = runner::run(&ctx, loaded.hash, &runner::RunOptions { tol_abs: cli.tol_abs });
    Ok(Output { json: rep.to_json(), code: if rep.all_passed() { EXIT_OK } else { EXIT_FAIL } })
}

fn flatten2d(g_expr: &str, domain: &[f64], tol: f64) -> Result<Output, ScenarioError> {
    let b = make_box(domain, 2)?;
    let g = ScalarField::parse(g_expr, &["x", "y"]).map_err(input)?;
    let grid = b.grid(5);
    let map = flatten_2d(&g, &b, &grid, tol).map_err(input)?;
    let residual = flatten_residual(&map, &g, &grid).map_err(input)?;
    let mut off_identity = 0.0f64;
    for p in &grid {
        let [u, v] = map.map(p).map_err(input)?;
        off_identity = off_identity.max((u - p[0]).abs()).max((v - p[1]).abs());
    }
    let limit = 100.0 * tol;
    let pass = residual.value < limit;
    let v = json!({
        "command": "flatten2d",
        "G": g_expr,
        "box": b.lo.iter().zip(&b.hi).map(|(a, c)| [*a, *c]).collect::<Vec<_>>(),
        "map": { "u": "x", "v": format!("integral of sqrt(G(x,t)) dt from {} to y", map.anchor) },
        "anchor": map.anchor,
        "quad_tol": tol,
        "identity": off_identity < limit,
        "max_distance_from_identity": off_identity,
        "residual": residual,
        "tolerance": limit,
        "status": if pass { "pass" } else { "fail" },
    });
    Ok(Output { json: pretty(&v), code: if pass { EXIT_OK } else { EXIT_FAIL } })
}

fn conformal3d(lambda: &str, domain: &[f64], samples: usize, fit_tol: f64, seed: u64) -> Result<Output, ScenarioError> {
    let b = make_box(domain, 3)?;
    let l = ScalarField::parse(lambda, &["x1", "x2", "x3"]).map_err(input)?;
    let c = classify_conformal_3d(&l, &b, samples, seed, fit_tol).map_err(input)?;
    let mut v = serde_json::to_value(&c).expect("classification serializes");
    v["command"] = json!("conformal3d");
    v["lambda"] = json!(lambda);
    v["fit_tol"] = json!(fit_tol);
    Ok(Output { json: pretty(&v), code: EXIT_OK })
}

fn stationary(lambda: &str, field: &str, domain: &[f64], seed: u64) -> Result<Output, ScenarioError> {
    let b = make_box(domain, 2)?;
    let xy = ["x", "y"];
    let l = ScalarField::parse(lambda, &xy).map_err(input)?;
    let comps: Vec<&str> = field.split(',').collect();
    if comps.len() != 2 {
        return Err(ScenarioError::Invalid(format!("field needs two components, got {}", comps.len())));
    }
    let x = Named::new(field, VectorField::parse(&comps, &xy).map_err(input)?);
    let mut points = b.grid(5);
    points.extend(b.random_points(20, seed));
    for p in &points {
        let v = l.value(p).map_err(input)?;
        if !(v > 0.0) {
            return Err(ScenarioError::Invalid(format!("lambda = {v} at {p:?} is not positive")));
        }
    }
    let g = TwoMetric::conformal(l.clone(), TwoMetric::standard(2));
    let r = stationarity_residual(&g, &x, &catalog::stationarity_witnesses(seed), &points).map_err(input)?;
    let d = sup_norm(&div_residual(&x.field, &l), &points).map_err(input)?;
    let mut v = serde_json::to_value(&r).expect("report serializes");
    v["command"] = json!("stationary");
    v["lambda"] = json!(lambda);
    v["seed"] = json!(seed);
    v["div_residual"] = json!(d.value);
    v["solves_div_equation"] = json!(d.value < STATIONARY_TOL);
    v["criteria_agree"] = json!(r.is_stationary() == (d.value < STATIONARY_TOL));
    Ok(Output { json: pretty(&v), code: EXIT_OK })
}

fn curvature_witness(cli: &Cli, path: &PathBuf, max_tuples: usize, threshold: f64) -> Result<Output, ScenarioError> {
    let loaded = scenario::load(path)?;
    let seed = resolve_seed(cli.seed, loaded.scenario.seed)?;
    let ctx = scenario::compile(&loaded.scenario, seed)?;
    let cat = if ctx.fields.len() >= 2 { ctx.fields.clone() } else { catalog::fields(ctx.dim) };
    let grid = catalog::witness_grid(&ctx.domain);
    let w = never_vanish_search(&ctx.metric, &cat, &grid, max_tuples, threshold).map_err(input)?;
    let found = w.witness.value > threshold;
    let v = json!({
        "command": "curvature-witness",
        "scenario": ctx.name,
        "scenario_hash": loaded.hash,
        "threshold": threshold,
        "grid_points": grid.len(),
        "found": found,
        "witness": w.witness,
        "raw": w.raw,
        "tuples_tried": w.tuples_tried,
    });
    Ok(Output { json: pretty(&v), code: if found { EXIT_OK } else { EXIT_FAIL } })
}

fn execute(cli: &Cli) -> Result<Output, ScenarioError> {
    match &cli.command {
        Command::Verify { scenario } => verify(cli, scenario),
        Command::Flatten2d { g_expr, domain, tol } => flatten2d(g_expr, &domain.0, *tol),
        Command::Conformal3d { lambda, domain, samples, fit_tol } => {
            conformal3d(lambda, &domain.0, *samples, *fit_tol, resolve_seed(cli.seed, None)?)
        }
        Command::Stationary { lambda, field, domain } => stationary(lambda, field, &domain.0, resolve_seed(cli.seed, None)?),
        Command::CurvatureWitness { scenario, max_tuples, threshold } => {
            curvature_witness(cli, scenario, *max_tuples, *threshold)
        }
    }
}

/// Parse arguments, run, write output; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let run = || execute(&cli);
    let result = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("tworiem: cannot start {n} threads: {e}");
                return EXIT_USAGE;
            }
        },
        None => run(),
    };
    match result {
        Ok(out) => {
            if let Some(path) = &cli.report {
                if let Err(e) = std::fs::write(path, &out.json) {
                    eprintln!("tworiem: cannot write {}: {e}", path.display());
                    return EXIT_INPUT;
                }
            } else {
                print!("{}", out.json);
            }
            out.code
        }
        Err(e) => {
            eprintln!("tworiem: {e}");
            EXIT_INPUT
        }
    }
}
