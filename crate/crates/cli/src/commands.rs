//! Subcommand implementations. Each returns the process exit code.

use std::path::Path;

use ddi_core::ddi::{ddi_on_ball, CloudJson, DdiOptions, DdiResult, ProbabilityCloud};
use ddi_core::designs::{is_two_design, regular_simplex, WeightedStateSetJson};
use ddi_core::geometry::{DensityJson, EmbeddingMap, GeomVector};
use ddi_core::measurements::{random_ic_quasi_measurement, QuasiMeasurement};
use ddi_core::Error;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::output::{self, num, Csv, FORMAT_VERSION, VERSION};
use crate::{Format, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_CERTIFIED: u8 = 1;
pub const EXIT_NO_CONVERGENCE: u8 = 2;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: message.into() }
    }

    fn io(err: anyhow::Error) -> Self {
        Self { code: EXIT_IO, message: format!("{err:#}") }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::invalid(e.to_string())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn options(cfg: &RunConfig) -> DdiOptions {
    DdiOptions { eps: cfg.eps, max_iter: cfg.max_iter, tol: cfg.tol }
}

/// Write `text`, sending unconverged runs to the `.partial` sibling so an
/// earlier complete result is never replaced.
fn write(text: String, cfg: &RunConfig, converged: bool) -> Result<(), Failure> {
    match (&cfg.output, converged) {
        (Some(path), false) => {
            let partial = output::partial_path(path);
            log::warn!("no convergence; partial result written to {}", partial.display());
            output::emit(&text, Some(&partial)).map_err(Failure::io)
        }
        (path, _) => output::emit(&text, path.as_deref()).map_err(Failure::io),
    }
}

#[derive(Serialize)]
struct Header {
    version: &'static str,
    format_version: u32,
    command: &'static str,
}

impl Header {
    fn new(command: &'static str) -> Self {
        Self { version: VERSION, format_version: FORMAT_VERSION, command }
    }
}

#[derive(Serialize)]
struct InferReport<'a> {
    #[serde(flatten)]
    header: Header,
    converged: bool,
    #[serde(flatten)]
    result: &'a DdiResult,
}

fn infer_csv(r: &DdiResult, converged: bool) -> String {
    let mut csv = Csv::new(&["field", "i", "j", "value"]);
    let scalar = |csv: &mut Csv, name: &str, value: String| csv.row(vec![name.into(), String::new(), String::new(), value]);
    scalar(&mut csv, "converged", converged.to_string());
    scalar(&mut csv, "volume_sq", num(r.volume_sq));
    scalar(&mut csv, "optimality_gap", num(r.optimality_gap));
    scalar(&mut csv, "iterations", r.iterations.to_string());
    scalar(&mut csv, "is_design", r.design_certificate.is_design.to_string());
    scalar(&mut csv, "frame_deviation", num(r.design_certificate.frame_deviation));
    scalar(&mut csv, "tol", num(r.design_certificate.tol_used));
    let m = r.measurement.matrix();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            csv.row(vec!["measurement".into(), i.to_string(), j.to_string(), num(m[(i, j)])]);
        }
    }
    for (i, p) in r.counter_image.points().iter().enumerate() {
        for (j, x) in p.entries().iter().enumerate() {
            csv.row(vec!["counter_image".into(), i.to_string(), j.to_string(), num(*x)]);
        }
    }
    for (i, w) in r.design_weights.iter().enumerate() {
        csv.row(vec!["design_weight".into(), i.to_string(), String::new(), num(*w)]);
    }
    csv.finish()
}

pub fn infer(input: &Path, cfg: &RunConfig) -> Result<u8, Failure> {
    let raw: CloudJson = read_json(input)?;
    let cloud = ProbabilityCloud::from_json(&raw, cfg.tol)?;
    log::info!("cloud: n = {}, {} points, span {}", cloud.n(), cloud.len(), cloud.span_dim());
    let (result, converged) = match ddi_on_ball(&cloud, &options(cfg)) {
        Ok(r) => (r, true),
        Err(Error::DdiNoConvergence(partial)) => (*partial, false),
        Err(e) => return Err(e.into()),
    };
    log::info!("{} iterations, gap {:e}", result.iterations, result.optimality_gap);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => output::json(&InferReport { header: Header::new("infer"), converged, result: &result }).map_err(Failure::io)?,
        Format::Csv => infer_csv(&result, converged),
    };
    write(text, cfg, converged)?;
    if converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("ddi: no convergence after {} iterations (gap {:e})", result.iterations, result.optimality_gap);
        Ok(EXIT_NO_CONVERGENCE)
    }
}

#[derive(Serialize)]
struct DesignReport {
    #[serde(flatten)]
    header: Header,
    l: usize,
    points: usize,
    is_design: bool,
    frame_deviation: f64,
    tol: f64,
}

pub fn verify_design(input: &Path, cfg: &RunConfig) -> Result<u8, Failure> {
    let raw: WeightedStateSetJson = read_json(input)?;
    let set = raw.validate(cfg.tol)?;
    let cert = match is_two_design(&set, cfg.tol) {
        Ok(c) => c,
        Err(Error::NotPureState { deviation }) => {
            return Err(Failure::invalid(format!("point off the unit sphere: | |s|^2 - 1 | = {deviation:e}")))
        }
        Err(e) => return Err(e.into()),
    };
    let report = DesignReport {
        header: Header::new("verify-design"),
        l: set.l(),
        points: set.len(),
        is_design: cert.is_design,
        frame_deviation: cert.frame_deviation,
        tol: cert.tol_used,
    };
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => output::json(&report).map_err(Failure::io)?,
        Format::Csv => {
            let mut csv = Csv::new(&["l", "points", "is_design", "frame_deviation", "tol"]);
            csv.row(vec![
                report.l.to_string(),
                report.points.to_string(),
                report.is_design.to_string(),
                num(report.frame_deviation),
                num(report.tol),
            ]);
            csv.finish()
        }
    };
    write(text, cfg, true)?;
    Ok(if cert.is_design { EXIT_OK } else { EXIT_NOT_CERTIFIED })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DensityInput {
    Many(Vec<DensityJson>),
    One(DensityJson),
}

#[derive(Serialize)]
struct EmbeddedState {
    index: usize,
    vector: GeomVector,
    purity: f64,
    norm_sq: f64,
}

#[derive(Serialize)]
struct EmbedReport {
    #[serde(flatten)]
    header: Header,
    d: usize,
    l: usize,
    states: Vec<EmbeddedState>,
}

pub fn embed(input: &Path, d: usize, cfg: &RunConfig) -> Result<u8, Failure> {
    let raw = match read_json::<DensityInput>(input)? {
        DensityInput::Many(v) => v,
        DensityInput::One(x) => vec![x],
    };
    let map = EmbeddingMap::new(d)?;
    let mut states = Vec::with_capacity(raw.len());
    for (index, dj) in raw.iter().enumerate() {
        if dj.d != d {
            return Err(Failure::invalid(format!("state {index} has d = {}, expected {d}", dj.d)));
        }
        let op = dj.to_operator(cfg.tol).map_err(|e| Failure::invalid(format!("state {index}: {e}")))?;
        let vector = map.embed_density_tol(&op, cfg.tol).map_err(|e| Failure::invalid(format!("state {index}: {e}")))?;
        let norm_sq = vector.norm_squared();
        states.push(EmbeddedState { index, purity: op.purity(), norm_sq, vector });
    }
    let report = EmbedReport { header: Header::new("embed"), d, l: map.l(), states };
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => output::json(&report).map_err(Failure::io)?,
        Format::Csv => {
            let coords: Vec<String> = (0..report.l).map(|j| format!("s{j}")).collect();
            let mut header = vec!["index", "purity", "norm_sq"];
            header.extend(coords.iter().map(String::as_str));
            let mut csv = Csv::new(&header);
            for s in &report.states {
                let mut row = vec![s.index.to_string(), num(s.purity), num(s.norm_sq)];
                row.extend(s.vector.entries().iter().map(|x| num(*x)));
                csv.row(row);
            }
            csv.finish()
        }
    };
    write(text, cfg, true)?;
    Ok(EXIT_OK)
}

#[derive(Serialize, Clone, Debug)]
struct TrialRow {
    trial: usize,
    seed: u64,
    det_m0: f64,
    volume_sq: f64,
    relative_gap: f64,
    design_deviation: f64,
    is_design: bool,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct Summary {
    trials: usize,
    max_relative_gap: f64,
    max_design_deviation: f64,
    all_design: bool,
    max_iterations: usize,
    all_converged: bool,
}

#[derive(Serialize)]
struct SimulateReport {
    #[serde(flatten)]
    header: Header,
    n: usize,
    l: usize,
    base_seed: u64,
    rows: Vec<TrialRow>,
    summary: Summary,
}

/// Trial seed 0 gives `M₀ = [𝟙_ℓ; 0]`; any other seed a random IC `M₀`.
fn trial_measurement(n: usize, l: usize, seed: u64) -> Result<QuasiMeasurement, Failure> {
    if seed == 0 {
        let m = DMatrix::from_fn(n, l, |i, j| if i == j { 1.0 } else { 0.0 });
        return Ok(QuasiMeasurement::validate(m, 1e-12)?);
    }
    Ok(random_ic_quasi_measurement(n, l, seed)?)
}

fn run_trial(trial: usize, n: usize, l: usize, seed: u64, cfg: &RunConfig) -> Result<TrialRow, Failure> {
    let m0 = trial_measurement(n, l, seed)?;
    let cloud = ProbabilityCloud::from_measurement(&m0, &regular_simplex(l)?, cfg.tol)?;
    let det_m0 = m0.range_volume_sq()?;
    let (r, converged) = match ddi_on_ball(&cloud, &options(cfg)) {
        Ok(r) => (r, true),
        Err(Error::DdiNoConvergence(partial)) => (*partial, false),
        Err(e) => return Err(e.into()),
    };
    log::debug!("trial {trial}: seed {seed}, {} iterations", r.iterations);
    Ok(TrialRow {
        trial,
        seed,
        det_m0,
        volume_sq: r.volume_sq,
        relative_gap: (r.volume_sq - det_m0).abs() / det_m0,
        design_deviation: r.design_certificate.frame_deviation,
        is_design: r.design_certificate.is_design,
        iterations: r.iterations,
        converged,
    })
}

pub fn simulate(n: usize, l: usize, trials: usize, cfg: &RunConfig) -> Result<u8, Failure> {
    if l < 2 || n < l {
        return Err(Failure::invalid(format!("need n >= l >= 2, got n = {n}, l = {l}")));
    }
    if trials == 0 {
        return Err(Failure::invalid("--trials must be at least 1"));
    }
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(i, n, l, cfg.seed.wrapping_add(i as u64), cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = Summary {
        trials,
        max_relative_gap: rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max),
        max_design_deviation: rows.iter().map(|r| r.design_deviation).fold(0.0, f64::max),
        all_design: rows.iter().all(|r| r.is_design),
        max_iterations: rows.iter().map(|r| r.iterations).max().unwrap_or(0),
        all_converged: rows.iter().all(|r| r.converged),
    };
    log::info!("{trials} trials, max relative gap {:e}", summary.max_relative_gap);
    let converged = summary.all_converged;
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let report = SimulateReport { header: Header::new("simulate"), n, l, base_seed: cfg.seed, rows, summary };
            output::json(&report).map_err(Failure::io)?
        }
        Format::Csv => {
            let mut csv = Csv::new(&[
                "kind",
                "trial",
                "seed",
                "det_m0",
                "volume_sq",
                "relative_gap",
                "design_deviation",
                "is_design",
                "iterations",
                "converged",
            ]);
            for r in &rows {
                csv.row(vec![
                    "trial".into(),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    num(r.det_m0),
                    num(r.volume_sq),
                    num(r.relative_gap),
                    num(r.design_deviation),
                    r.is_design.to_string(),
                    r.iterations.to_string(),
                    r.converged.to_string(),
                ]);
            }
            csv.row(vec![
                "summary".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                num(summary.max_relative_gap),
                num(summary.max_design_deviation),
                summary.all_design.to_string(),
                summary.max_iterations.to_string(),
                summary.all_converged.to_string(),
            ]);
            csv.finish()
        }
    };
    write(text, cfg, converged)?;
    Ok(if converged { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}
