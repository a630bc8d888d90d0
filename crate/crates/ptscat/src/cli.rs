//! Command-line front end.
//!
//! Every subcommand reads one JSON config, validates it against what that
//! subcommand needs, computes everything in memory and only then writes its
//! outputs. A failure at any point leaves the output directory untouched.

use crate::asymptotics::{
    fitted_log_slope, match_branches, predict_log_branch, predict_vertical_branch, predicted_log_slope,
    real_part_spacing, BranchPrediction, MatchReport, VerticalHypothesis,
};
use crate::hadamard::{
    fit_s, fit_w, truncate_zeros, HadamardModel, SData, SupportHint, DEFAULT_PROBE_TS,
};
use crate::kernel::{solve_kernel, KernelGrid, PerturbationSpec, Side, DEFAULT_GRID_N, DEFAULT_TOL};
use crate::perturbed::PerturbedSystem;
use crate::pt_exact::{
    gamma_product, resonances_closed_form, s0_normalized, scattering0, w0_normalized, wronskian,
    PTParams, ScatteringData,
};
use crate::resonances::{classify, find_zeros_with_budget, Rect, SearchRegion, ZeroRecord, DEFAULT_BUDGET};
use crate::specfun::gamma;
use crate::{Complex, Error, Result};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const CSV_HELP: &str = "\
CSV columns (floats in scientific notation with 17 significant digits):
  resonances   zeros.csv         re,im,multiplicity,kind,residual
  scattering   scattering.csv    re,im,w_re,w_im,s_plus_re,s_plus_im,s_minus_re,s_minus_im,
                                 t_re,t_im,r_plus_re,r_plus_im,r_minus_re,r_minus_im,unitarity_residual
  branches     branches.csv      series,j,re,im,radius
  reconstruct  reconstruct.csv   target,probe_re,probe_im,model_re,model_im,reference_re,reference_im,rel_error
  verify       verify.csv        check,passed,value,threshold
W and S± are normalized by Γ(1−iz); T and R± are the normalized coefficients.
The unitarity residual |T|²+|R⁻|²−1 is meaningful on the real axis only.

Exit codes: 0 ok, 1 compute failure (or a failed verify check), 2 config error.";

#[derive(Parser, Debug)]
#[command(name = "ptscat", version, about = "Resonances and scattering data for λ/cosh²x + q(x)", after_help = CSV_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Directory for cached kernel grids.
    #[arg(long, global = true, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    /// Seed for random probe points and probe jitter.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Locate zeros of W in the configured rectangle.
    Resonances,
    /// Scattering data on a real line and/or a complex mesh.
    Scattering,
    /// Asymptotic branch predictions matched against found zeros.
    Branches,
    /// Hadamard reconstruction of W and S± from their zeros.
    Reconstruct,
    /// Run the invariant checks and report pass/fail.
    Verify,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QConfig {
    pub breakpoints: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: f64,
    pub to: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub rect: RectConfig,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    pub real: Option<LineConfig>,
    pub mesh: Option<MeshConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Zeros of W used by the fit; closed-form zeros when `q` is absent.
    #[serde(default = "default_n_zeros")]
    pub n_zeros: usize,
    pub probe_ts: Option<Vec<f64>>,
    /// Comparison points as `[re, im]`.
    pub probes: Option<Vec<[f64; 2]>>,
    /// Rectangle searched for zeros of S⁺; defaults to `rect`.
    pub s_rect: Option<RectConfig>,
    /// Sign datum for S± when the origin is a half-bound state.
    pub p_sign: Option<f64>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig { n_zeros: default_n_zeros(), probe_ts: None, probes: None, s_rect: None, p_sign: None }
    }
}

fn default_n_zeros() -> usize {
    400
}
fn default_grid_n() -> usize {
    DEFAULT_GRID_N
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_newton_tol() -> f64 {
    1e-10
}
fn default_delta() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.3
}
fn default_j_range() -> [u32; 2] {
    [1, 12]
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}

/// One JSON document drives every subcommand.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lambda: f64,
    pub q: Option<QConfig>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub rect: Option<RectConfig>,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_j_range")]
    pub j_range: [u32; 2],
    #[serde(default)]
    pub scattering: ScatteringConfig,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Compute(m) => write!(f, "compute failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn field_err(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("field `{field}`: {msg}"))
}

fn to_rect(field: &str, r: &RectConfig) -> CliResult<Rect> {
    Rect::new(r.re_min, r.re_max, r.im_min, r.im_max).map_err(|e| field_err(field, e))
}

/// A config after validation for one subcommand.
#[derive(Clone, Debug)]
pub struct Validated {
    pub raw: RunConfig,
    pub q: Option<PerturbationSpec>,
    pub rect: Option<Rect>,
}

impl Validated {
    fn rect(&self) -> Rect {
        self.rect.expect("validated")
    }

    fn region(&self, rect: Rect) -> SearchRegion {
        let mut reg = SearchRegion::new(rect);
        reg.newton_tol = self.raw.newton_tol;
        reg.delta = self.raw.delta;
        reg.eta = self.raw.eta;
        reg
    }

    fn j_range(&self) -> (u32, u32) {
        (self.raw.j_range[0], self.raw.j_range[1])
    }
}

pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Checks everything the subcommand will touch before any compute.
pub fn validate(cfg: RunConfig, cmd: Command) -> CliResult<Validated> {
    if cfg.lambda == 0.0 || !cfg.lambda.is_finite() {
        return Err(field_err("lambda", format!("must be a nonzero finite real, got {}", cfg.lambda)));
    }
    if cfg.grid_n < 8 {
        return Err(field_err("grid_n", format!("must be at least 8, got {}", cfg.grid_n)));
    }
    if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
        return Err(field_err("tol", format!("must lie in (0, 1), got {}", cfg.tol)));
    }
    if !(cfg.newton_tol > 0.0) {
        return Err(field_err("newton_tol", "must be positive"));
    }
    if !(cfg.delta > 0.0) || !(cfg.eta > 0.0 && cfg.eta < 0.5) {
        return Err(field_err("delta/eta", "need δ > 0 and 0 < η < ½"));
    }
    if cfg.budget == 0 {
        return Err(field_err("budget", "must be positive"));
    }
    if cfg.j_range[0] == 0 || cfg.j_range[0] > cfg.j_range[1] {
        return Err(field_err("j_range", format!("need 1 ≤ lo ≤ hi, got {:?}", cfg.j_range)));
    }
    let q = match &cfg.q {
        Some(q) => Some(PerturbationSpec::new(&q.breakpoints, &q.coefficients).map_err(|e| field_err("q", e))?),
        None => None,
    };
    let rect = cfg.rect.as_ref().map(|r| to_rect("rect", r)).transpose()?;
    let needs_rect = match cmd {
        Command::Resonances | Command::Branches => true,
        Command::Reconstruct => q.is_some(),
        _ => false,
    };
    if needs_rect && rect.is_none() {
        return Err(field_err("rect", "required by this subcommand"));
    }
    match cmd {
        Command::Scattering => {
            let s = &cfg.scattering;
            if s.real.is_none() && s.mesh.is_none() {
                return Err(field_err("scattering", "give `real`, `mesh` or both"));
            }
            if let Some(l) = &s.real {
                if l.n < 1 || !(l.from.is_finite() && l.to.is_finite()) {
                    return Err(field_err("scattering.real", "need finite ends and n ≥ 1"));
                }
            }
            if let Some(m) = &s.mesh {
                to_rect("scattering.mesh.rect", &m.rect)?;
                if m.nx < 2 || m.ny < 2 {
                    return Err(field_err("scattering.mesh", "need nx, ny ≥ 2"));
                }
            }
        }
        Command::Reconstruct => {
            let r = &cfg.reconstruct;
            if r.n_zeros < crate::hadamard::MIN_ZEROS {
                return Err(field_err("reconstruct.n_zeros", format!("need at least {}", crate::hadamard::MIN_ZEROS)));
            }
            if let Some(ts) = &r.probe_ts {
                if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0)) {
                    return Err(field_err("reconstruct.probe_ts", "need positive heights"));
                }
            }
            if let Some(p) = r.p_sign {
                if p != 1.0 && p != -1.0 {
                    return Err(field_err("reconstruct.p_sign", "must be 1 or -1"));
                }
            }
            if let Some(s) = &r.s_rect {
                to_rect("reconstruct.s_rect", s)?;
            }
        }
        _ => {}
    }
    Ok(Validated { raw: cfg, q, rect })
}

/// Cache key material; the file name is its SHA-256.
pub fn cache_key(q: &PerturbationSpec, lambda: f64, grid_n: usize, tol: f64) -> String {
    format!("q={};lambda={:e};grid_n={};tol={:e}", q.canonical_string(), lambda, grid_n, tol)
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    plus: KernelGrid,
    minus: KernelGrid,
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    let digest = Sha256::digest(key.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("kernel-{hex}.json"))
}

/// Loads both kernels from the cache when the stored key matches exactly,
/// otherwise solves them and refreshes the cache.
fn load_system(v: &Validated, q: &PerturbationSpec, cache: Option<&Path>) -> CliResult<PerturbedSystem> {
    let (lambda, n, tol) = (v.raw.lambda, v.raw.grid_n, v.raw.tol);
    let key = cache_key(q, lambda, n, tol);
    if let Some(dir) = cache {
        let path = cache_path(dir, &key);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
                if entry.key == key {
                    if let Ok(sys) = PerturbedSystem::from_kernels(q, lambda, entry.plus, entry.minus) {
                        return Ok(sys);
                    }
                }
            }
        }
    }
    let (kp, km) = rayon::join(
        || solve_kernel(q, lambda, Side::Plus, n, tol),
        || solve_kernel(q, lambda, Side::Minus, n, tol),
    );
    let (kp, km) = (kp?, km?);
    if let Some(dir) = cache {
        let entry = CacheEntry { key: key.clone(), plus: kp.clone(), minus: km.clone() };
        let text = serde_json::to_string(&entry).map_err(|e| CliError::Compute(e.to_string()))?;
        std::fs::create_dir_all(dir).map_err(|e| CliError::Compute(format!("cache dir: {e}")))?;
        // Write then rename so a concurrent reader never sees half a file.
        let path = cache_path(dir, &key);
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| CliError::Compute(format!("cache write: {e}")))?;
    }
    Ok(PerturbedSystem::from_kernels(q, lambda, kp, km)?)
}

/// Either the closed-form background or a solved perturbation.
enum Model {
    Exact(PTParams),
    Perturbed(Box<PerturbedSystem>),
}

impl Model {
    fn build(v: &Validated, cache: Option<&Path>) -> CliResult<Model> {
        match &v.q {
            Some(q) if !q.is_zero() => Ok(Model::Perturbed(Box::new(load_system(v, q, cache)?))),
            _ => Ok(Model::Exact(PTParams::new(v.raw.lambda))),
        }
    }

    fn w(&self, z: Complex) -> Result<Complex> {
        match self {
            Model::Exact(p) => Ok(w0_normalized(p, z)),
            Model::Perturbed(s) => s.w_normalized(z),
        }
    }

    fn s_plus(&self, z: Complex) -> Result<Complex> {
        match self {
            Model::Exact(p) => Ok(s0_normalized(p)),
            Model::Perturbed(s) => {
                let x0 = s.x0();
                Ok(wronskian(s.plus(x0, -z)?, s.minus(x0, z)?))
            }
        }
    }

    fn scattering(&self, z: Complex) -> Result<ScatteringData> {
        match self {
            Model::Exact(p) => scattering0(p, z),
            Model::Perturbed(s) => s.scattering(z),
        }
    }
}

/// Outputs held in memory until the command succeeds.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Compute(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Compute(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Compute(e.to_string()))?;
        self.files.push((name.into(), bytes));
        Ok(())
    }

    /// Writes every file; on any error removes the ones already written.
    fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Compute(format!("output dir: {e}")))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(&path);
                return Err(CliError::Compute(format!("writing {}: {e}", path.display())));
            }
            written.push(path);
        }
        Ok(written)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cnum(z: Complex) -> [String; 2] {
    [num(z.re), num(z.im)]
}

fn zero_rows(zs: &[ZeroRecord]) -> Vec<Vec<String>> {
    zs.iter()
        .map(|r| {
            let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            vec![num(r.location.re), num(r.location.im), r.multiplicity.to_string(), kind, num(r.residual)]
        })
        .collect()
}

/// Context shared by the subcommands.
pub struct Ctx<'a> {
    pub cache: Option<&'a Path>,
    pub seed: Option<u64>,
}

fn find_w_zeros(v: &Validated, model: &Model, rect: Rect) -> CliResult<Vec<ZeroRecord>> {
    let f = |z: Complex| model.w(z);
    Ok(classify(find_zeros_with_budget(&f, &v.region(rect), v.raw.budget)?, v.raw.newton_tol))
}

fn cmd_resonances(v: &Validated, ctx: &Ctx<'_>, out: &mut Outputs) -> CliResult<bool> {
    let model = Model::build(v, ctx.cache)?;
    let zeros = find_w_zeros(v, &model, v.rect())?;
    out.json("zeros.json", &zeros)?;
    out.csv("zeros.csv", &["re", "im", "multiplicity", "kind", "residual"], zero_rows(&zeros))?;
    Ok(true)
}

fn scattering_grid(cfg: &ScatteringConfig) -> Vec<Complex> {
    let mut zs = Vec::new();
    if let Some(l) = &cfg.real {
        let step = if l.n > 1 { (l.to - l.from) / (l.n - 1) as f64 } else { 0.0 };
        zs.extend((0..l.n).map(|k| Complex::new(l.from + step * k as f64, 0.0)));
    }
    if let Some(m) = &cfg.mesh {
        let r = &m.rect;
        let (dx, dy) = ((r.re_max - r.re_min) / (m.nx - 1) as f64, (r.im_max - r.im_min) / (m.ny - 1) as f64);
        for j in 0..m.ny {
            for i in 0..m.nx {
                zs.push(Complex::new(r.re_min + dx * i as f64, r.im_min + dy * j as f64));
            }
        }
    }
    zs
}

fn cmd_scattering(v: &Validated, ctx: &Ctx<'_>, out: &mut Outputs) -> CliResult<bool> {
    let model = Model::build(v, ctx.cache)?;
    let zs = scattering_grid(&v.raw.scattering);
    let data: Vec<ScatteringData> = zs
        .par_iter()
        .map(|&z| model.scattering(z).map_err(|e| CliError::Compute(format!("at z = {z}: {e}"))))
        .collect::<CliResult<_>>()?;
    let rows = data
        .iter()
        .map(|d| {
            let mut r = Vec::with_capacity(15);
            for c in [d.z, d.norm_w, d.norm_s_plus, d.norm_s_minus, d.t, d.r_plus, d.r_minus] {
                r.extend(cnum(c));
            }
            r.push(num(d.unitarity_residual()));
            r
        })
        .collect();
    let header = [
        "re", "im", "w_re", "w_im", "s_plus_re", "s_plus_im", "s_minus_re", "s_minus_im", "t_re", "t_im",
        "r_plus_re", "r_plus_im", "r_minus_re", "r_minus_im", "unitarity_residual",
    ];
    out.csv("scattering.csv", &header, rows)?;
    Ok(true)
}

#[derive(Serialize)]
struct Attempt<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

impl<T> Attempt<T> {
    fn of(r: Result<T>) -> Self {
        match r {
            Ok(t) => Attempt { result: Some(t), note: None },
            Err(e) => Attempt { result: None, note: Some(e.to_string()) },
        }
    }
}

#[derive(Serialize)]
struct BranchMatch {
    prediction: BranchPrediction,
    report: Attempt<MatchReport>,
}

#[derive(Serialize)]
struct BranchesReport {
    lambda: f64,
    zeros: Vec<ZeroRecord>,
    log_branch: Attempt<BranchMatch>,
    predicted_log_slope: Option<f64>,
    fitted_log_slope: Option<f64>,
    real_part_spacing: Option<f64>,
    vertical: Vec<BranchMatch>,
    delta: f64,
    eta: f64,
}

fn branch_rows(series: &str, p: &BranchPrediction, rows: &mut Vec<Vec<String>>) {
    for b in &p.points {
        rows.push(vec![series.into(), b.j.to_string(), num(b.z.re), num(b.z.im), String::new()]);
    }
}

fn cmd_branches(v: &Validated, ctx: &Ctx<'_>, out: &mut Outputs) -> CliResult<bool> {
    let model = Model::build(v, ctx.cache)?;
    let rect = v.rect();
    let zeros = find_w_zeros(v, &model, rect)?;
    let jr = v.j_range();
    let log = match &v.q {
        Some(q) => predict_log_branch(q, jr).map(|prediction| {
            let report = Attempt::of(match_branches(&zeros, &prediction));
            BranchMatch { prediction, report }
        }),
        None => Err(Error::ZeroJump("no perturbation, so no logarithmic branch".into())),
    };
    let log_ok = log.is_ok();
    let mut vertical = Vec::new();
    for h in [VerticalHypothesis::DoubleSpacing, VerticalHypothesis::UnitSpacing] {
        let prediction = predict_vertical_branch(v.raw.lambda, jr, h)?;
        let report = Attempt::of(match_branches(&zeros, &prediction));
        vertical.push(BranchMatch { prediction, report });
    }
    let re_min = 0.25 * rect.re_max.max(0.0);
    let report = BranchesReport {
        lambda: v.raw.lambda,
        zeros: zeros.clone(),
        log_branch: Attempt::of(log),
        predicted_log_slope: v.q.as_ref().filter(|_| log_ok).map(predicted_log_slope),
        fitted_log_slope: fitted_log_slope(&zeros, re_min),
        real_part_spacing: real_part_spacing(&zeros, re_min),
        vertical,
        delta: v.raw.delta,
        eta: v.raw.eta,
    };

    let mut rows = Vec::new();
    for z in &zeros {
        for _ in 0..z.multiplicity {
            rows.push(vec!["found".into(), String::new(), num(z.location.re), num(z.location.im), String::new()]);
        }
    }
    if let Some(b) = &report.log_branch.result {
        branch_rows("log_prediction", &b.prediction, &mut rows);
    }
    for b in &report.vertical {
        let name = match b.prediction.hypothesis {
            Some(VerticalHypothesis::DoubleSpacing) => "vertical_double_spacing",
            _ => "vertical_unit_spacing",
        };
        branch_rows(name, &b.prediction, &mut rows);
    }
    // Sector boundary Im z = −|Re z|/δ, from the origin to the bottom of the rectangle.
    if rect.im_min < 0.0 {
        let reach = -rect.im_min * v.raw.delta;
        for (series, s) in [("s1_boundary_left", -1.0), ("s1_boundary_right", 1.0)] {
            for (re, im) in [(0.0, 0.0), (s * reach, rect.im_min)] {
                rows.push(vec![series.into(), String::new(), num(re), num(im), String::new()]);
            }
        }
    }
    let mut n = 1.0;
    while -n >= rect.im_min - v.raw.eta {
        if -n <= rect.im_max + v.raw.eta {
            rows.push(vec!["b_disk".into(), String::new(), num(0.0), num(-n), num(v.raw.eta)]);
        }
        n += 1.0;
    }
    out.json("branches.json", &report)?;
    out.csv("branches.csv", &["series", "j", "re", "im", "radius"], rows)?;
    Ok(true)
}

fn default_probes() -> Vec<Complex> {
    (0..10).map(|k| Complex::from_polar(0.5 + 0.25 * (k % 3) as f64, 0.3 + 0.6 * k as f64)).collect()
}

fn jitter(probes: Vec<Complex>, seed: Option<u64>) -> Vec<Complex> {
    match seed {
        None => probes,
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            probes
                .into_iter()
                .map(|z| z * Complex::from_polar(1.0 + rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)))
                .collect()
        }
    }
}

fn support_hint(q: &PerturbationSpec) -> SupportHint {
    if q.beta <= 0.0 {
        SupportHint::RMinus
    } else if q.alpha >= 0.0 {
        SupportHint::RPlus
    } else {
        SupportHint::OriginInside
    }
}

/// Snaps coordinates that are zero up to the polish tolerance, so the
/// symmetry `z → −z̄` of the zero set holds exactly.
fn clean_zeros(zs: &[ZeroRecord]) -> Vec<(Complex, usize)> {
    zs.iter()
        .map(|r| {
            let mut z = r.location;
            if z.re.abs() < 1e-7 {
                z.re = 0.0;
            }
            if z.im.abs() < 1e-7 {
                z.im = 0.0;
            }
            (z, r.multiplicity)
        })
        .collect()
}

#[derive(Serialize)]
struct ReconstructReport {
    probes: Vec<Complex>,
    w: HadamardModel,
    w_max_rel_error: f64,
    s_plus: Attempt<HadamardModel>,
    s_minus: Attempt<HadamardModel>,
    s_max_rel_error: Option<f64>,
}

fn cmd_reconstruct(v: &Validated, ctx: &Ctx<'_>, out: &mut Outputs) -> CliResult<bool> {
    let model = Model::build(v, ctx.cache)?;
    let rc = &v.raw.reconstruct;
    let probe_ts = rc.probe_ts.clone().unwrap_or_else(|| DEFAULT_PROBE_TS.to_vec());
    let probes = jitter(
        rc.probes.as_ref().map(|p| p.iter().map(|&[a, b]| Complex::new(a, b)).collect()).unwrap_or_else(default_probes),
        ctx.seed,
    );
    let (w_zeros, s_zeros) = match (&model, &v.q) {
        (Model::Perturbed(_), Some(q)) => {
            let w = clean_zeros(&find_w_zeros(v, &model, v.rect())?);
            let s_rect = match &rc.s_rect {
                Some(r) => to_rect("reconstruct.s_rect", r)?,
                None => v.rect(),
            };
            let f = |z: Complex| model.s_plus(z);
            let s = find_zeros_with_budget(&f, &v.region(s_rect), v.raw.budget)?;
            (w, Some((clean_zeros(&s), support_hint(q))))
        }
        _ => {
            let all: Vec<(Complex, usize)> = resonances_closed_form(&PTParams::new(v.raw.lambda), rc.n_zeros)
                .iter()
                .map(|r| (r.location, r.multiplicity))
                .collect();
            (truncate_zeros(&all, rc.n_zeros), None)
        }
    };
    let w_model = fit_w(&w_zeros, &probe_ts)?;

    let mut rows = Vec::new();
    let mut push = |target: &str, z: Complex, m: Complex, r: Complex| -> f64 {
        let e = (m / r - 1.0).norm();
        let mut row = vec![target.to_string()];
        row.extend(cnum(z));
        row.extend(cnum(m));
        row.extend(cnum(r));
        row.push(num(e));
        rows.push(row);
        e
    };
    let mut w_err = 0.0f64;
    for &z in &probes {
        w_err = w_err.max(push("w", z, w_model.eval(z), model.w(z)?));
    }

    let (mut s_plus, mut s_minus) = (
        Attempt { result: None, note: Some("S± is constant without a perturbation".into()) },
        Attempt { result: None, note: Some("S± is constant without a perturbation".into()) },
    );
    let mut s_err = None;
    if let Some((zs, hint)) = s_zeros {
        let wf = |z: Complex| model.w(z);
        let data = SData { lambda: v.raw.lambda, w: &wf, p_sign: rc.p_sign };
        let minus_zeros: Vec<(Complex, usize)> = zs.iter().map(|&(z, m)| (-z, m)).collect();
        s_plus = Attempt::of(fit_s(&zs, Side::Plus, hint, &data));
        s_minus = Attempt::of(fit_s(&minus_zeros, Side::Minus, hint, &data));
        let mut e = None::<f64>;
        if let Some(m) = &s_plus.result {
            for &z in &probes {
                let x = push("s_plus", z, m.eval(z), model.s_plus(z)?);
                e = Some(e.unwrap_or(0.0).max(x));
            }
        }
        if let Some(m) = &s_minus.result {
            for &z in &probes {
                let x = push("s_minus", z, m.eval(z), model.s_plus(-z)?);
                e = Some(e.unwrap_or(0.0).max(x));
            }
        }
        s_err = e;
    }
    let report =
        ReconstructReport { probes, w: w_model, w_max_rel_error: w_err, s_plus, s_minus, s_max_rel_error: s_err };
    out.json("reconstruct.json", &report)?;
    out.csv(
        "reconstruct.csv",
        &["target", "probe_re", "probe_im", "model_re", "model_im", "reference_re", "reference_im", "rel_error"],
        rows,
    )?;
    Ok(true)
}

/// One line of the verify report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Check {
        Check { check: name.into(), passed: value <= threshold, value, threshold, note: None }
    }

    fn failed(name: &str, threshold: f64, e: impl fmt::Display) -> Check {
        Check { check: name.into(), passed: false, value: f64::NAN, threshold, note: Some(e.to_string()) }
    }
}

fn rel(a: Complex, b: Complex) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn max_of(it: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    it.into_iter().try_fold(0.0f64, |m, x| Ok(m.max(x?)))
}

fn run_check(name: &str, threshold: f64, r: Result<f64>) -> Check {
    match r {
        Ok(v) if v.is_finite() => Check::below(name, v, threshold),
        Ok(v) => Check::failed(name, threshold, format!("non-finite value {v}")),
        Err(e) => Check::failed(name, threshold, e),
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Complex> {
    let mut zs = Vec::with_capacity(n);
    while zs.len() < n {
        let z = Complex::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius));
        // Stay off iℤ, where the unnormalized quantities have poles.
        if z.norm() <= radius && z.re.abs() > 1e-3 {
            zs.push(z);
        }
    }
    zs
}

fn verify_checks(v: &Validated, ctx: &Ctx<'_>) -> CliResult<Vec<Check>> {
    let model = Model::build(v, ctx.cache)?;
    let lambda = v.raw.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.unwrap_or(0));
    let zs = random_points(&mut rng, 24, 5.0);
    let ks: Vec<f64> = (0..12).map(|_| rng.gen_range(0.05..8.0)).collect();
    let mut out = Vec::new();

    out.push(run_check(
        "conjugation_symmetry",
        1e-7,
        max_of(zs.par_iter().map(|&z| -> Result<f64> {
            let (a, b) = (model.scattering(z)?, model.scattering(-z.conj())?);
            Ok(rel(a.norm_w.conj(), b.norm_w).max(rel(a.norm_s_plus.conj(), b.norm_s_plus)))
        }).collect::<Vec<_>>()),
    ));
    out.push(run_check(
        "s_minus_is_reflected_s_plus",
        1e-7,
        max_of(zs.par_iter().map(|&z| -> Result<f64> {
            Ok(rel(model.scattering(z)?.norm_s_minus, model.scattering(-z)?.norm_s_plus))
        }).collect::<Vec<_>>()),
    ));
    out.push(run_check(
        "real_axis_unitarity",
        1e-7,
        max_of(ks.par_iter().map(|&k| Ok(model.scattering(Complex::new(k, 0.0))?.unitarity_residual().abs())).collect::<Vec<_>>()),
    ));
    out.push(run_check(
        "product_identity",
        1e-7,
        max_of(zs.par_iter().map(|&z| -> Result<f64> {
            let (a, b) = (model.scattering(z)?, model.scattering(-z)?);
            let g = gamma_product(z);
            let ww = a.norm_w * b.norm_w;
            let free = 4.0 * z * z / (g * g);
            let ss = a.norm_s_plus * a.norm_s_minus;
            let scale = ww.norm().max(free.norm()).max(ss.norm());
            Ok((ww - free - ss).norm() / scale)
        }).collect::<Vec<_>>()),
    ));
    out.push(run_check("w_at_origin_is_minus_s", 1e-7, (|| {
        let z = Complex::new(0.0, 0.0);
        let (w, s) = (model.w(z)?, model.s_plus(z)?);
        Ok((w + s).norm() / w.norm().max(s.norm()).max(1.0))
    })()));

    let equiv = [20.0, 40.0, 80.0]
        .iter()
        .map(|&t| -> Result<f64> {
            let z = Complex::new(0.0, t);
            let g = gamma(Complex::new(1.0 + t, 0.0))?;
            Ok((model.w(z)? * g * g / (2.0 * Complex::i() * z) - 1.0).norm())
        })
        .collect::<Result<Vec<f64>>>();
    out.push(match equiv {
        Ok(e) if e[0] > e[1] && e[1] > e[2] => Check::below("normalization_asymptotic", e[2], 0.05),
        Ok(e) => Check::failed("normalization_asymptotic", 0.05, format!("not decreasing: {e:?}")),
        Err(e) => Check::failed("normalization_asymptotic", 0.05, e),
    });

    match &model {
        Model::Perturbed(sys) => {
            let q = &sys.q;
            let xs: Vec<f64> = (0..=8).map(|k| q.alpha + (q.beta - q.alpha) * k as f64 / 8.0).collect();
            let diag = xs.iter().fold(0.0f64, |m, &x| {
                m.max((sys.kplus.value(x, x) - 0.5 * q.integral(x, q.beta)).abs())
                    .max((sys.kminus.value(x, x) - 0.5 * q.integral(q.alpha, x)).abs())
            });
            out.push(Check::below("kernel_diagonal", diag, 1e-8));
            let outer = xs.iter().fold(0.0f64, |m, &x| {
                m.max(sys.kplus.value(x, 2.0 * q.beta - x).abs()).max(sys.kminus.value(x, 2.0 * q.alpha - x).abs())
            });
            out.push(Check::below("kernel_outer_characteristic", outer, 1e-10));
            let bound = crate::kernel::a_priori_bound(q, lambda);
            let sup = sys.kplus.sup_norm().max(sys.kminus.sup_norm());
            out.push(Check {
                check: "kernel_a_priori_bound".into(),
                passed: sup <= bound,
                value: sup,
                threshold: bound,
                note: None,
            });
        }
        Model::Exact(p) => {
            // Closed-form resonances against the zero finder.
            let reg = {
                let mut r = SearchRegion::new(Rect::new(-2.0, 2.0, -5.0, 0.0)?);
                r.newton_tol = 1e-12;
                r
            };
            let r = (|| -> Result<f64> {
                let f = |z: Complex| Ok(w0_normalized(p, z));
                let found = find_zeros_with_budget(&f, &reg, DEFAULT_BUDGET)?;
                let exact: Vec<ZeroRecord> =
                    resonances_closed_form(p, 8).into_iter().filter(|r| reg.rect.contains(r.location)).collect();
                let count = |v: &[ZeroRecord]| v.iter().map(|r| r.multiplicity).sum::<usize>();
                if count(&found) != count(&exact) {
                    return Err(Error::Inconsistent(format!(
                        "found {} zeros, closed form has {}",
                        count(&found),
                        count(&exact)
                    )));
                }
                Ok(exact.iter().fold(0.0f64, |m, e| {
                    m.max(found.iter().map(|f| (f.location - e.location).norm()).fold(f64::INFINITY, f64::min))
                }))
            })();
            out.push(run_check("closed_form_resonances", 1e-8, r));
        }
    }

    // Reconstructed W keeps the symmetry W(−z̄) = conj W(z).
    let r = (|| -> Result<f64> {
        let all: Vec<(Complex, usize)> =
            resonances_closed_form(&PTParams::new(lambda), 100).iter().map(|r| (r.location, r.multiplicity)).collect();
        let m = fit_w(&truncate_zeros(&all, 100), &DEFAULT_PROBE_TS)?;
        Ok(default_probes().iter().fold(0.0f64, |acc, &z| acc.max(rel(m.eval(z).conj(), m.eval(-z.conj())))))
    })();
    out.push(run_check("hadamard_w_symmetry", 1e-10, r));
    Ok(out)
}

fn cmd_verify(v: &Validated, ctx: &Ctx<'_>, out: &mut Outputs) -> CliResult<bool> {
    let checks = verify_checks(v, ctx)?;
    let ok = checks.iter().all(|c| c.passed);
    let rows = checks
        .iter()
        .map(|c| vec![c.check.clone(), c.passed.to_string(), num(c.value), num(c.threshold)])
        .collect();
    out.json("verify.json", &checks)?;
    out.csv("verify.csv", &["check", "passed", "value", "threshold"], rows)?;
    Ok(ok)
}

/// Runs one subcommand on an already parsed config. Returns the exit code
/// and writes outputs into `out_dir` only on success (verify also writes its
/// report when a check fails).
pub fn execute(cmd: Command, cfg: RunConfig, out_dir: &Path, ctx: &Ctx<'_>) -> CliResult<i32> {
    let v = validate(cfg, cmd)?;
    let mut out = Outputs::default();
    let ok = match cmd {
        Command::Resonances => cmd_resonances(&v, ctx, &mut out)?,
        Command::Scattering => cmd_scattering(&v, ctx, &mut out)?,
        Command::Branches => cmd_branches(&v, ctx, &mut out)?,
        Command::Reconstruct => cmd_reconstruct(&v, ctx, &mut out)?,
        Command::Verify => cmd_verify(&v, ctx, &mut out)?,
    };
    out.commit(out_dir)?;
    Ok(if ok { EXIT_OK } else { EXIT_COMPUTE })
}

/// Full entry point: argument parsing, thread pool, config loading.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = (|| -> CliResult<i32> {
        let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg = parse_config(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be positive".into()));
            }
            pool = pool.num_threads(n);
        }
        let pool = pool.build().map_err(|e| CliError::Compute(e.to_string()))?;
        let ctx = Ctx { cache: cli.cache.as_deref(), seed: cli.seed };
        pool.install(|| execute(cli.command, cfg, &cli.out, &ctx))
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ptscat: {e}");
            e.exit_code()
        }
    }
}
