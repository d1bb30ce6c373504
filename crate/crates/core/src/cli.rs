//! Config parsing, artifact writing and re-verification for the binary.

use crate::domain::BoundarySpec;
use crate::error::{Error, Result};
use crate::limits::{
    compatibility_check, dissipative_verdict, lemma_equivalence_check, lemma_slices, run_sweep, sweep_grid, test_bank,
    Axis, CompatibilityThresholds, CompatibilityVerdict, DissipativeVerdict, LemmaTolerances, LemmaVerdict, SweepReport,
    VerdictOptions,
};
use crate::potential::PotentialSpec;
use crate::run::{simulate_with, Frame, InitialSpec, RunOutput, RunParams, Setup};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Output directory override, the only setting read from the environment.
pub const OUT_ENV: &str = "CONGESTA_OUT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub dim: usize,
    pub resolution: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryBlock {
    AtRest { rho_b: f64 },
    Uniform { velocity: [f64; 2], rho_b: f64 },
    /// 1D trace from its end values.
    Ends { left: f64, right: f64, rho_b: f64 },
    Affine { offset: [f64; 2], gradient: [[f64; 2]; 2], rho_b: f64 },
}

impl BoundaryBlock {
    pub fn spec(&self) -> BoundarySpec<f64> {
        match *self {
            BoundaryBlock::AtRest { rho_b } => BoundarySpec::at_rest(rho_b),
            BoundaryBlock::Uniform { velocity, rho_b } => BoundarySpec::uniform(velocity, rho_b),
            BoundaryBlock::Ends { left, right, rho_b } => BoundarySpec::from_ends(left, right, rho_b),
            BoundaryBlock::Affine { offset, gradient, rho_b } => BoundarySpec { offset, gradient, rho_b },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub mu0: f64,
    #[serde(default)]
    pub mu1: f64,
    pub eta0: f64,
    #[serde(default)]
    pub eta1: f64,
    pub q: f64,
    #[serde(default)]
    pub delta: f64,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    50
}
fn default_tau_c() -> f64 {
    crate::congestion::DEFAULT_TAU_C
}
fn default_energy_tol() -> f64 {
    1e-5
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeBlock {
    pub modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub eps: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tau_c")]
    pub tau_c: f64,
    #[serde(default)]
    pub frozen_density: bool,
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionBlock {
    pub alpha: f64,
    #[serde(default = "one")]
    pub rho_star: f64,
    /// Shorthand for an alpha axis in the sweep block.
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default = "one_usize")]
    pub workers: usize,
    pub alpha: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub modes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictBlock {
    pub blocks: usize,
    pub d_lower: f64,
    pub d_upper: f64,
    pub residual_tol: f64,
    pub boundary_layer: usize,
    /// Defaults to `alpha^{-1/2}`.
    pub overshoot_tol: Option<f64>,
}

impl Default for VerdictBlock {
    fn default() -> Self {
        let d = VerdictOptions::for_alpha(1.0);
        Self {
            blocks: d.blocks,
            d_lower: d.d_lower,
            d_upper: d.d_upper,
            residual_tol: d.residual_tol,
            boundary_layer: d.boundary_layer,
            overshoot_tol: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Every `frame_stride`-th frame is stored; the last one always is.
    #[serde(default = "one_usize")]
    pub frame_stride: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), frame_stride: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub domain: DomainBlock,
    pub boundary: BoundaryBlock,
    pub initial: InitialSpec,
    pub potential: PotentialBlock,
    pub scheme: SchemeBlock,
    pub congestion: CongestionBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub verdict: VerdictBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn params(&self) -> RunParams {
        let p = &self.potential;
        RunParams {
            dim: self.domain.dim,
            resolution: self.domain.resolution,
            boundary: self.boundary.spec(),
            initial: self.initial.clone(),
            potential: PotentialSpec { mu0: p.mu0, mu1: p.mu1, eta0: p.eta0, eta1: p.eta1, q: p.q },
            delta: p.delta,
            eps: self.scheme.eps,
            alpha: self.congestion.alpha,
            rho_star: self.congestion.rho_star,
            modes: self.scheme.modes,
            dt: self.scheme.dt,
            t_end: self.scheme.t_end,
            tol: self.scheme.tol,
            max_iter: self.scheme.max_iter,
            tau_c: self.scheme.tau_c,
            frozen_density: self.scheme.frozen_density,
            energy_tol: self.scheme.energy_tol,
        }
    }

    pub fn verdict_options(&self) -> VerdictOptions {
        let v = &self.verdict;
        let base = VerdictOptions::for_alpha(self.congestion.alpha);
        VerdictOptions {
            blocks: v.blocks,
            d_lower: v.d_lower,
            d_upper: v.d_upper,
            tau_c: self.scheme.tau_c,
            residual_tol: v.residual_tol,
            energy_tol: self.scheme.energy_tol,
            overshoot_tol: v.overshoot_tol.unwrap_or(base.overshoot_tol),
            boundary_layer: v.boundary_layer,
        }
    }

    pub fn sweep_axes(&self) -> Vec<(Axis, Vec<f64>)> {
        let s = self.sweep.clone().unwrap_or_default();
        let alpha = s.alpha.or_else(|| self.congestion.ladder.clone());
        [(Axis::Alpha, alpha), (Axis::Delta, s.delta), (Axis::Eps, s.eps), (Axis::Modes, s.modes)]
            .into_iter()
            .filter_map(|(a, v)| v.map(|v| (a, v)))
            .collect()
    }
}

/// Parsed config together with the hex SHA-256 of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
    pub text: String,
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if config.output.frame_stride == 0 {
        return Err(Error::Config("output.frame_stride must be positive".into()));
    }
    let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(LoadedConfig { config, hash, text: text.to_string() })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_hard_assertion() {
        return 3;
    }
    match e {
        Error::LinearSolveFailure(_)
        | Error::SingularMassMatrix
        | Error::NewtonDivergence
        | Error::FixedPointStall { .. }
        | Error::NonSmoothPoint(_)
        | Error::ConjugateOverflow(_) => 4,
        _ => 2,
    }
}

/// Full precision, fixed layout: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Stamp<'a> {
    hash: &'a str,
    seed: u64,
}

impl Stamp<'_> {
    fn header(&self, cols: &[&str]) -> Vec<String> {
        cols.iter().map(|s| s.to_string()).chain(["config_hash", "version", "seed"].map(String::from)).collect()
    }

    fn row(&self, mut vals: Vec<String>) -> Vec<String> {
        vals.extend([self.hash.to_string(), VERSION.to_string(), self.seed.to_string()]);
        vals
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Artifact(e.to_string())
}

/// Stored frames: the initial one, every `stride`-th and the last, with `dt`
/// rebuilt from the stored times.
pub fn select_frames(frames: &[Frame], stride: usize) -> Vec<Frame> {
    let last = frames.len().saturating_sub(1);
    let mut out: Vec<Frame> =
        frames.iter().enumerate().filter(|(i, _)| i % stride.max(1) == 0 || *i == last).map(|(_, f)| f.clone()).collect();
    for i in 1..out.len() {
        out[i].dt = out[i].t - out[i - 1].t;
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MaxPrincipleSummary {
    pub sup_rho: f64,
    /// `max{|rho_0|, |rho_B|, |u_B|} exp(T |div u|_inf)` at the end of the run.
    pub bound: f64,
    pub pass: bool,
    /// Largest `max rho(t) / bound(t)` over the steps, reported only.
    pub max_running_ratio: f64,
    pub discrete_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnergySummary {
    pub e0: f64,
    pub steps_passed: usize,
    pub steps: usize,
    pub min_margin: f64,
    pub max_residual_dual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub steps: usize,
    pub extra_substeps: usize,
    pub frames: usize,
    pub t_end: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_cumulative_residual: f64,
    pub mass_max_step_residual: f64,
    pub max_principle: MaxPrincipleSummary,
    pub energy: EnergySummary,
    pub verdicts: VerdictReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictReport {
    pub dissipative: serde_json::Value,
    pub compatibility: serde_json::Value,
    pub lemma: serde_json::Value,
}

fn verdicts(cfg: &RunConfig, setup: &Setup, frames: &[Frame]) -> Result<VerdictReport> {
    let opts = cfg.verdict_options();
    let d: DissipativeVerdict = dissipative_verdict(setup, frames, &test_bank(cfg.domain.dim), &opts)?;
    let c: CompatibilityVerdict =
        compatibility_check(setup, frames, opts.blocks, opts.tau_c, &CompatibilityThresholds::default())?;
    let l: LemmaVerdict = lemma_equivalence_check(
        setup.mesh.cell_volume(),
        &frames[0].rho,
        &lemma_slices(setup, frames),
        opts.tau_c,
        &LemmaTolerances { divergence: 1e-6, overshoot: opts.overshoot_tol },
    );
    let v = |x: serde_json::Result<serde_json::Value>| x.map_err(|e| Error::Artifact(e.to_string()));
    Ok(VerdictReport { dissipative: v(serde_json::to_value(d))?, compatibility: v(serde_json::to_value(c))?, lemma: v(serde_json::to_value(l))? })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Artifact(e.to_string()))?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

const STEP_COLUMNS: [&str; 22] = [
    "step",
    "t",
    "dt",
    "mass",
    "min_rho",
    "max_rho",
    "max_principle_bound",
    "discrete_bound",
    "renorm_residual",
    "v_norm",
    "picard_iters",
    "viscous_dissipation",
    "kinetic_energy",
    "overshoot_l1",
    "overshoot_l2",
    "overshoot_l4",
    "complementarity",
    "congested_divergence",
    "pressure_mass",
    "energy_pass",
    "energy_margin",
    "energy_threshold",
];

fn write_run_csvs(dir: &Path, st: &Stamp, out: &RunOutput) -> Result<()> {
    let mut w = csv_writer(&dir.join("steps.csv"))?;
    w.write_record(st.header(&STEP_COLUMNS)).map_err(csv_err)?;
    for (i, (s, v)) in out.steps.iter().zip(&out.energy_verdicts).enumerate() {
        let c = &s.congestion;
        let mut row = vec![(i + 1).to_string()];
        row.extend([s.t, s.dt, s.mass, s.min_rho, s.max_rho, s.max_principle_bound, s.discrete_bound, s.renorm_residual, s.v_norm].map(fmt_f64));
        row.push(s.picard_iters.to_string());
        row.extend(
            [s.viscous_dissipation, s.kinetic_energy, c.overshoot_norms[0], c.overshoot_norms[1], c.overshoot_norms[2]]
                .map(fmt_f64),
        );
        row.extend([c.complementarity, c.congested_divergence, c.pressure_mass].map(fmt_f64));
        row.push(v.pass.to_string());
        row.extend([v.margin, v.threshold].map(fmt_f64));
        w.write_record(st.row(row)).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("energy.csv"))?;
    let cols: Vec<&str> = std::iter::once("step").chain(crate::energy::EnergyLedger::<f64>::COLUMNS).collect();
    w.write_record(st.header(&cols)).map_err(csv_err)?;
    for (i, l) in out.ledgers.iter().enumerate() {
        let row = std::iter::once((i + 1).to_string()).chain(l.values().into_iter().map(fmt_f64)).collect();
        w.write_record(st.row(row)).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("mass.csv"))?;
    let cols =
        ["step", "t", "interior_mass", "inflow_cumulative", "outflow_cumulative", "diffusive_boundary_cumulative", "step_residual"];
    w.write_record(st.header(&cols)).map_err(csv_err)?;
    for (i, e) in out.mass.entries.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(
            [e.t, e.interior_mass, e.inflow_cumulative, e.outflow_cumulative, e.diffusive_boundary_cumulative, e.step_residual]
                .map(fmt_f64),
        );
        w.write_record(st.row(row)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_fields(dir: &Path, st: &Stamp, setup: &Setup, frames: &[Frame]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv_writer(&dir.join("fields.csv"))?;
    let cols = ["step", "t", "dt", "cell", "x", "y", "rho", "s_xx", "s_xy", "s_yy"];
    w.write_record(st.header(&cols)).map_err(csv_err)?;
    for f in frames {
        for (k, (r, s)) in f.rho.iter().zip(&f.stress).enumerate() {
            let x = setup.mesh.cell_center(k);
            let mut row = vec![f.step.to_string()];
            row.extend([f.t, f.dt].map(fmt_f64));
            row.push(k.to_string());
            row.extend([x[0], x[1], *r, s[0], s[1], s[2]].map(fmt_f64));
            w.write_record(st.row(row)).map_err(csv_err)?;
        }
    }
    w.flush()?;
    let mut w = csv_writer(&dir.join("coeffs.csv"))?;
    let n = setup.basis.n();
    let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let cols: Vec<&str> = ["step", "t", "dt"].into_iter().chain(names.iter().map(|s| s.as_str())).collect();
    w.write_record(st.header(&cols)).map_err(csv_err)?;
    for f in frames {
        let mut row = vec![f.step.to_string()];
        row.extend([f.t, f.dt].map(fmt_f64));
        row.extend(f.v.iter().map(|&c| fmt_f64(c)));
        w.write_record(st.row(row)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Single run: simulation, verdicts and every artifact under `dir`.
pub fn execute_run(lc: &LoadedConfig, dir: &Path) -> Result<RunSummary> {
    let cfg = &lc.config;
    let p = cfg.params();
    let setup = Setup::new(&p)?;
    let out = simulate_with(&setup, &p)?;
    std::fs::create_dir_all(dir)?;
    let st = Stamp { hash: &lc.hash, seed: cfg.seed };
    write_run_csvs(dir, &st, &out)?;
    let frames = select_frames(&out.frames, cfg.output.frame_stride);
    write_fields(&dir.join("fields"), &st, &setup, &frames)?;
    std::fs::write(dir.join("config.toml"), &lc.text)?;

    let sup_rho = out.frames.iter().flat_map(|f| f.rho.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    let bound = out.max_principle.bound();
    let summary = RunSummary {
        config_hash: lc.hash.clone(),
        version: VERSION.into(),
        seed: cfg.seed,
        steps: out.steps.len(),
        extra_substeps: out.extra_substeps,
        frames: frames.len(),
        t_end: out.steps.last().map_or(0.0, |s| s.t),
        mass_initial: out.mass.initial_mass,
        mass_final: out.steps.last().map_or(out.mass.initial_mass, |s| s.mass),
        mass_cumulative_residual: out.mass.cumulative_residual(),
        mass_max_step_residual: out.mass.max_step_residual(),
        max_principle: MaxPrincipleSummary {
            sup_rho,
            bound,
            pass: sup_rho <= bound * (1.0 + 1e-10),
            max_running_ratio: out.steps.iter().map(|s| s.max_rho / s.max_principle_bound).fold(0.0, f64::max),
            discrete_bound: out.max_principle.discrete_bound(),
        },
        energy: EnergySummary {
            e0: out.e0,
            steps_passed: out.energy_verdicts.iter().filter(|v| v.pass).count(),
            steps: out.energy_verdicts.len(),
            min_margin: out.energy_verdicts.iter().map(|v| v.margin).fold(f64::INFINITY, f64::min),
            max_residual_dual: out.ledgers.iter().map(|l| l.residual_dual).fold(f64::NEG_INFINITY, f64::max),
        },
        verdicts: verdicts(cfg, &setup, &frames)?,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn read_csv(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(csv_err)?.clone();
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

fn field(row: &csv::StringRecord, i: usize, path: &Path) -> Result<f64> {
    row.get(i)
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Artifact(format!("{}: bad value in column {i} of row {:?}", path.display(), row.position().map(|p| p.line()))))
}

/// Frames back from `fields/`; checks shapes and the config stamp.
pub fn load_frames(dir: &Path, setup: &Setup, hash: &str) -> Result<Vec<Frame>> {
    let n_cells = setup.mesh.n_cells();
    let n = setup.basis.n();
    let fpath = dir.join("fields").join("fields.csv");
    let (_, rows) = read_csv(&fpath)?;
    let cpath = dir.join("fields").join("coeffs.csv");
    let (_, crow) = read_csv(&cpath)?;
    if rows.len() != crow.len() * n_cells {
        return Err(Error::Artifact(format!("{} has {} rows, expected {}", fpath.display(), rows.len(), crow.len() * n_cells)));
    }
    let mut frames = Vec::with_capacity(crow.len());
    for (i, c) in crow.iter().enumerate() {
        if c.len() != 3 + n + 3 || c.get(3 + n) != Some(hash) {
            return Err(Error::Artifact(format!("{}: row {} has the wrong shape or config stamp", cpath.display(), i + 1)));
        }
        let step: usize = c[0].parse().map_err(|_| Error::Artifact(format!("{}: bad step", cpath.display())))?;
        let v = (0..n).map(|m| field(c, 3 + m, &cpath)).collect::<Result<Vec<_>>>()?;
        let (mut rho, mut stress) = (Vec::with_capacity(n_cells), Vec::with_capacity(n_cells));
        for (k, r) in rows[i * n_cells..(i + 1) * n_cells].iter().enumerate() {
            if r.len() != 13 || r.get(0) != c.get(0) || r.get(3) != Some(&k.to_string()) || r.get(10) != Some(hash) {
                return Err(Error::Artifact(format!("{}: frame {step} cell {k} out of order", fpath.display())));
            }
            rho.push(field(r, 6, &fpath)?);
            stress.push([field(r, 7, &fpath)?, field(r, 8, &fpath)?, field(r, 9, &fpath)?]);
        }
        frames.push(Frame { step, t: field(c, 1, &cpath)?, dt: field(c, 2, &cpath)?, rho, v, stress });
    }
    if frames.len() < 2 {
        return Err(Error::Artifact("fewer than two stored frames".into()));
    }
    Ok(frames)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub frames: usize,
    pub verdicts: VerdictReport,
    /// Verdicts recomputed from the stored fields agree with the run summary.
    pub matches_run_summary: bool,
}

/// Recomputes every verdict from the stored fields, without simulating.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let lc = parse_config(
        &std::fs::read_to_string(dir.join("config.toml")).map_err(|e| Error::Artifact(format!("config.toml: {e}")))?,
    )?;
    let summary: RunSummary = serde_json::from_str(
        &std::fs::read_to_string(dir.join("summary.json")).map_err(|e| Error::Artifact(format!("summary.json: {e}")))?,
    )
    .map_err(|e| Error::Artifact(format!("summary.json: {e}")))?;
    if summary.config_hash != lc.hash {
        return Err(Error::Artifact("config.toml does not match the summary hash".into()));
    }
    let setup = Setup::new(&lc.config.params())?;
    let frames = load_frames(dir, &setup, &lc.hash)?;
    if frames.len() != summary.frames {
        return Err(Error::Artifact(format!("{} stored frames, summary lists {}", frames.len(), summary.frames)));
    }
    let verdicts = verdicts(&lc.config, &setup, &frames)?;
    let matches_run_summary = serde_json::to_value(&verdicts).ok() == serde_json::to_value(&summary.verdicts).ok();
    Ok(VerifyReport { config_hash: lc.hash, version: VERSION.into(), seed: lc.config.seed, frames: frames.len(), verdicts, matches_run_summary })
}

pub fn write_verify(dir: &Path, report: &VerifyReport) -> Result<PathBuf> {
    let path = dir.join("verify.json");
    write_json(&path, report)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub report: SweepReport,
}

/// Sweep over the configured axes; per-point failures are recorded.
pub fn execute_sweep(lc: &LoadedConfig, dir: &Path, workers: Option<usize>) -> Result<SweepOutput> {
    let cfg = &lc.config;
    let axes = cfg.sweep_axes();
    if axes.is_empty() {
        return Err(Error::Config("sweep needs at least one axis in [sweep] or congestion.ladder".into()));
    }
    let points = sweep_grid(&cfg.params(), &axes)?;
    let workers = workers.or(cfg.sweep.as_ref().map(|s| s.workers)).unwrap_or(1).max(1);
    let report = run_sweep(&points, workers)?;
    std::fs::create_dir_all(dir)?;
    let st = Stamp { hash: &lc.hash, seed: cfg.seed };

    let mut w = csv_writer(&dir.join("sweep_matrix.csv"))?;
    let cols = [
        "axis", "value", "delta", "eps", "alpha", "n", "resolution", "dt", "status", "terminal_v_norm", "terminal_kinetic",
        "max_overshoot_l2", "mean_complementarity", "mean_congested_divergence", "min_energy_margin",
        "mass_cumulative_residual", "min_rho", "max_rho", "continuity_residual", "momentum_residual", "energy_margin_clause",
        "verdict",
    ];
    w.write_record(st.header(&cols)).map_err(csv_err)?;
    for p in &report.points {
        let mut row = vec![p.axis.name().to_string(), fmt_f64(p.value)];
        row.extend([p.delta, p.eps, p.alpha].map(fmt_f64));
        row.extend([p.n.to_string(), p.resolution.to_string(), fmt_f64(p.dt)]);
        match &p.summary {
            Some(s) => {
                row.push("ok".into());
                row.extend(
                    [
                        s.terminal_v_norm,
                        s.terminal_kinetic,
                        s.max_overshoot_l2,
                        s.mean_complementarity,
                        s.mean_congested_divergence,
                        s.min_energy_margin,
                        s.mass_cumulative_residual,
                        s.min_rho,
                        s.max_rho,
                        s.verdict.continuity_residual,
                        s.verdict.momentum_residual,
                        s.verdict.energy_margin,
                    ]
                    .map(fmt_f64),
                );
                row.push(s.verdict.label.clone());
            }
            None => {
                row.push(format!("error: {}", p.error.as_deref().unwrap_or("unknown")));
                row.extend(std::iter::repeat(String::new()).take(13));
            }
        }
        w.write_record(st.row(row)).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("congestion.csv"))?;
    let cols =
        ["alpha", "t", "overshoot_l1", "overshoot_l2", "overshoot_l4", "complementarity", "congested_divergence", "pressure_mass"];
    w.write_record(st.header(&cols)).map_err(csv_err)?;
    for p in report.points.iter().filter(|p| p.axis == Axis::Alpha) {
        for s in &p.steps {
            let c = &s.congestion;
            let row = [p.alpha, s.t, c.overshoot_norms[0], c.overshoot_norms[1], c.overshoot_norms[2], c.complementarity, c.congested_divergence, c.pressure_mass]
                .map(fmt_f64)
                .to_vec();
            w.write_record(st.row(row)).map_err(csv_err)?;
        }
    }
    w.flush()?;
    std::fs::write(dir.join("config.toml"), &lc.text)?;
    let out = SweepOutput { config_hash: lc.hash.clone(), version: VERSION.into(), seed: cfg.seed, workers, report };
    write_json(&dir.join("sweep_report.json"), &out)?;
    Ok(out)
}

/// Exit code of a finished sweep: hard assertion failures first, then
/// solver failures.
pub fn sweep_exit_code(out: &SweepOutput) -> i32 {
    let pts = &out.report.points;
    if pts.iter().any(|p| p.hard_failure) {
        3
    } else if pts.iter().any(|p| p.error.is_some()) {
        4
    } else {
        0
    }
}
