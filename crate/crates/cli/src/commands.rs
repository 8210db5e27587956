use std::error::Error;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use psodrift::boundary::{trace_boundary, trelea_bound, variance_bound};
use psodrift::omega::{omega_with_cdf, OmegaMethod};
use psodrift::{classify, omega, simulate_drift, AngleCdf, OmegaConfig, SwarmParams, Verdict, VerdictKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Cli, Command, NumericArgs, ParamArgs, SimArgs};

type CmdResult = Result<Status, Box<dyn Error>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Decided,
    Indeterminate,
    NumericalFailure,
    Usage,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Decided => ExitCode::SUCCESS,
            Status::Indeterminate => ExitCode::from(2),
            Status::NumericalFailure => ExitCode::from(3),
            Status::Usage => ExitCode::from(crate::EXIT_USAGE),
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> CmdResult {
    eprintln!("error: {msg}");
    Ok(Status::Usage)
}

/// Standard parameter sets with their reference drift.
const STANDARD_SETS: [(f64, f64, f64, f64); 9] = [
    (0.72984, 1.496172, 1.496172, -0.194063),
    (0.72984, 2.04355, 0.94879, -0.177108),
    (0.6, 1.7, 1.7, -0.327742),
    (0.9, 0.1, 0.1, -0.100728),
    (0.7, 0.3, 0.3, -0.338770),
    (0.9, 3.0, 3.0, 0.380623),
    (0.1, 0.1, 0.1, -0.241938),
    (0.1, 2.1, 2.1, -0.485162),
    (-0.7, 0.5, 0.5, -0.133533),
];

pub fn run(cli: &Cli) -> CmdResult {
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Omega {
            params,
            numerics,
            dump_cdf,
        } => cmd_omega(params, numerics, dump_cdf.as_deref(), out),
        Command::Table1 { numerics } => cmd_table1(numerics, out),
        Command::Boundary {
            chi_min,
            chi_max,
            steps,
            tol,
            c_hi,
            numerics,
        } => cmd_boundary(*chi_min, *chi_max, *steps, *tol, *c_hi, numerics, out),
        Command::Grid {
            chi_min,
            chi_max,
            chi_count,
            c_min,
            c_max,
            c_count,
            numerics,
        } => cmd_grid((*chi_min, *chi_max, *chi_count), (*c_min, *c_max, *c_count), numerics, out),
        Command::Simulate {
            params,
            sim,
            histogram,
            compare,
            numerics,
        } => cmd_simulate(params, sim, histogram.as_deref(), *compare, numerics, out),
    }
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Box<dyn Error>> {
    let mut w = open_output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<(), Box<dyn Error>> {
    let mut w = csv::Writer::from_writer(open_output(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn swarm_params(p: &ParamArgs) -> Option<SwarmParams> {
    SwarmParams::new(p.chi, p.c_l, p.c_g).ok()
}

fn checked_config(numerics: &NumericArgs) -> Result<OmegaConfig, String> {
    let cfg = numerics.config();
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn verdict_status(v: &Verdict) -> Status {
    if v.is_failure() {
        Status::NumericalFailure
    } else if v.kind == VerdictKind::Indeterminate {
        Status::Indeterminate
    } else {
        Status::Decided
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
        .collect()
}

#[derive(Serialize)]
struct OmegaRecord {
    chi: f64,
    c_l: f64,
    c_g: f64,
    omega: Option<f64>,
    error: Option<f64>,
    iterations: Option<usize>,
    method: Option<OmegaMethod>,
    verdict: VerdictKind,
    diagnostic: Option<String>,
}

impl OmegaRecord {
    fn new(p: &SwarmParams, v: Verdict) -> Self {
        Self {
            chi: p.chi,
            c_l: p.c_l,
            c_g: p.c_g,
            omega: v.omega.map(|r| r.omega),
            error: v.omega.map(|r| r.abs_error_estimate),
            iterations: v.omega.map(|r| r.fixed_point_iterations),
            method: v.omega.map(|r| r.method),
            verdict: v.kind,
            diagnostic: v.diagnostic,
        }
    }
}

#[derive(Serialize)]
struct CdfRow {
    beta: f64,
    cdf: f64,
    density: f64,
}

fn dump_cdf(cdf: &AngleCdf, path: &Path) -> Result<(), Box<dyn Error>> {
    let rows: Vec<CdfRow> = cdf
        .knots()
        .as_slice()
        .iter()
        .map(|&beta| CdfRow {
            beta,
            cdf: cdf.cdf(beta),
            density: cdf.density(beta),
        })
        .collect();
    write_csv(&rows, Some(path))
}

fn cmd_omega(p: &ParamArgs, numerics: &NumericArgs, cdf_path: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let Some(params) = swarm_params(p) else {
        return usage("parameters must be finite");
    };
    let cfg = match checked_config(numerics) {
        Ok(cfg) => cfg,
        Err(msg) => return usage(msg),
    };
    let verdict = match cdf_path {
        Some(path) if !params.is_deterministic() => match omega_with_cdf(&params, &cfg) {
            Ok((result, fixed)) => {
                dump_cdf(&fixed.cdf, path)?;
                if params.chi == 0.0 {
                    // The closed form is exact; the dump is only a by-product.
                    classify(&params, &cfg)
                } else {
                    Verdict::from_outcome(Ok(result))
                }
            }
            Err(e) => Verdict::from_outcome(Err(e)),
        },
        _ => classify(&params, &cfg),
    };
    let status = verdict_status(&verdict);
    if let Some(msg) = &verdict.diagnostic {
        eprintln!("error: {msg}");
    }
    write_json(&OmegaRecord::new(&params, verdict), out)?;
    Ok(status)
}

#[derive(Serialize)]
struct Table1Row {
    source_chi: f64,
    source_cl: f64,
    source_cg: f64,
    paper_omega: f64,
    computed_omega: Option<f64>,
    abs_dev: Option<f64>,
    error_estimate: Option<f64>,
    status: String,
}

fn cmd_table1(numerics: &NumericArgs, out: Option<&Path>) -> CmdResult {
    let cfg = match checked_config(numerics) {
        Ok(cfg) => cfg,
        Err(msg) => return usage(msg),
    };
    let rows: Vec<Table1Row> = STANDARD_SETS
        .par_iter()
        .map(|&(chi, c_l, c_g, reference)| {
            let outcome = SwarmParams::new(chi, c_l, c_g).and_then(|p| omega(&p, &cfg));
            let (computed, est, status) = match outcome {
                Ok(r) => (Some(r.omega), Some(r.abs_error_estimate), "ok".to_string()),
                Err(e) => (None, None, e.to_string()),
            };
            Table1Row {
                source_chi: chi,
                source_cl: c_l,
                source_cg: c_g,
                paper_omega: reference,
                computed_omega: computed,
                abs_dev: computed.map(|w| (w - reference).abs()),
                error_estimate: est,
                status,
            }
        })
        .collect();
    let failed = rows.iter().any(|r| r.computed_omega.is_none());
    write_csv(&rows, out)?;
    Ok(if failed { Status::NumericalFailure } else { Status::Decided })
}

#[derive(Serialize)]
struct BoundaryRow {
    chi: f64,
    c_star: Option<f64>,
    bracket_width: Option<f64>,
    trelea: f64,
    variance_bound: f64,
    status: String,
}

fn cmd_boundary(
    chi_min: f64,
    chi_max: f64,
    steps: usize,
    tol: f64,
    c_hi: f64,
    numerics: &NumericArgs,
    out: Option<&Path>,
) -> CmdResult {
    if !(-1.0 < chi_min && chi_min <= chi_max && chi_max < 1.0) {
        return usage("need -1 < chi-min <= chi-max < 1");
    }
    if steps == 0 && chi_min != chi_max {
        return usage("steps must be at least 1");
    }
    if tol.is_nan() || tol <= 0.0 {
        return usage("tol must be positive");
    }
    let cfg = match checked_config(numerics) {
        Ok(cfg) => cfg,
        Err(msg) => return usage(msg),
    };
    let count = if chi_min == chi_max { 1 } else { steps + 1 };
    let chis = linspace(chi_min, chi_max, count);
    let rows: Vec<BoundaryRow> = chis
        .par_iter()
        .map(|&chi| {
            let traced = trace_boundary(chi, c_hi, tol, &cfg);
            BoundaryRow {
                chi,
                c_star: traced.as_ref().ok().map(|p| p.c_star),
                bracket_width: traced.as_ref().ok().map(|p| p.bracket_width),
                trelea: trelea_bound(chi),
                variance_bound: variance_bound(chi),
                status: traced.map_or_else(|e| e.to_string(), |_| "ok".to_string()),
            }
        })
        .collect();
    let failed = rows.iter().any(|r| r.c_star.is_none());
    write_csv(&rows, out)?;
    Ok(if failed { Status::NumericalFailure } else { Status::Decided })
}

#[derive(Serialize)]
struct GridRow {
    chi: f64,
    c: f64,
    omega: Option<f64>,
    error: Option<f64>,
    verdict: VerdictKind,
    diagnostic: Option<String>,
}

fn cmd_grid(chi: (f64, f64, usize), c: (f64, f64, usize), numerics: &NumericArgs, out: Option<&Path>) -> CmdResult {
    if chi.2 == 0 || c.2 == 0 {
        return usage("grid counts must be positive");
    }
    if !(chi.0.is_finite() && chi.1.is_finite() && c.0.is_finite() && c.1.is_finite()) {
        return usage("grid ranges must be finite");
    }
    let cfg = match checked_config(numerics) {
        Ok(cfg) => cfg,
        Err(msg) => return usage(msg),
    };
    let cells: Vec<(f64, f64)> = linspace(chi.0, chi.1, chi.2)
        .into_iter()
        .flat_map(|x| linspace(c.0, c.1, c.2).into_iter().map(move |y| (x, y)))
        .collect();
    let rows: Vec<GridRow> = cells
        .par_iter()
        .map(|&(chi, c)| {
            let v = classify(&SwarmParams { chi, c_l: c, c_g: c }, &cfg);
            GridRow {
                chi,
                c,
                omega: v.omega.map(|r| r.omega),
                error: v.omega.map(|r| r.abs_error_estimate),
                verdict: v.kind,
                diagnostic: v.diagnostic,
            }
        })
        .collect();
    let failed = rows.iter().any(|r| r.diagnostic.is_some());
    write_csv(&rows, out)?;
    Ok(if failed { Status::NumericalFailure } else { Status::Decided })
}

#[derive(Serialize)]
struct SimRecord {
    chi: f64,
    c_l: f64,
    c_g: f64,
    seed: u64,
    iterations: usize,
    iterations_used: usize,
    mean_drift: f64,
    stderr: f64,
    singular_redraws: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_score: Option<f64>,
}

#[derive(Serialize)]
struct HistogramRow {
    bin_midpoint: f64,
    density: f64,
}

fn cmd_simulate(
    p: &ParamArgs,
    sim: &SimArgs,
    histogram: Option<&Path>,
    compare: bool,
    numerics: &NumericArgs,
    out: Option<&Path>,
) -> CmdResult {
    let Some(params) = swarm_params(p) else {
        return usage("parameters must be finite");
    };
    let cfg = sim.config();
    let stats = match simulate_drift(&params, &cfg) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let mut status = Status::Decided;
    let mut reference = None;
    if compare {
        let omega_cfg = match checked_config(numerics) {
            Ok(c) => c,
            Err(msg) => return usage(msg),
        };
        match omega(&params, &omega_cfg) {
            Ok(r) => reference = Some(r.omega),
            Err(e) => {
                eprintln!("error: {e}");
                status = Status::NumericalFailure;
            }
        }
    }
    if let Some(path) = histogram {
        let rows: Vec<HistogramRow> = stats
            .bin_midpoints()
            .into_iter()
            .zip(&stats.histogram)
            .map(|(bin_midpoint, &density)| HistogramRow { bin_midpoint, density })
            .collect();
        write_csv(&rows, Some(path))?;
    }
    let record = SimRecord {
        chi: params.chi,
        c_l: params.c_l,
        c_g: params.c_g,
        seed: cfg.seed,
        iterations: cfg.iterations,
        iterations_used: stats.iterations_used,
        mean_drift: stats.mean_drift,
        stderr: stats.stderr,
        singular_redraws: stats.singular_redraws,
        omega: reference,
        z_score: reference.map(|w| (stats.mean_drift - w) / stats.stderr),
    };
    write_json(&record, out)?;
    Ok(status)
}
