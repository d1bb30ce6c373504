//! Limit passages: parameter sweeps, the Reynolds defect estimator and the
//! discrete verdicts for generalized dissipative solutions.

use crate::congestion::CongestionReport;
use crate::continuity::FaceVelocity;
use crate::domain::{Grad2, Side, Vec2};
use crate::error::{Error, Result};
use crate::momentum::{mode_eval, mode_list, Mode};
use crate::run::{Frame, RunOutput, RunParams, Setup};
use crate::tensors::SymTensor;
use rayon::prelude::*;
use serde::Serialize;

/// Weighted sample of density and velocity for block averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectSample {
    pub x: Vec2<f64>,
    pub w: f64,
    pub rho: f64,
    pub u: Vec2<f64>,
}

/// Samples at the Galerkin quadrature points of one frame.
pub fn frame_samples(setup: &Setup, rho: &[f64], v: &[f64]) -> Vec<DefectSample> {
    let b = &setup.basis;
    (0..b.n_points())
        .map(|p| DefectSample { x: b.point(p), w: b.weight(p), rho: rho[b.cell_of(p)], u: b.u_at(v, &setup.bd, p) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectEstimate {
    pub blocks: usize,
    /// Per block, `avg(rho u (x) u) - avg(rho u) (x) avg(rho u) / avg(rho)` as `[xx, xy, yy]`.
    pub reynolds: Vec<[f64; 3]>,
    pub reynolds_trace: Vec<f64>,
    pub kinetic_defect: Vec<f64>,
    /// Volume integrals over the domain.
    pub total_trace: f64,
    pub total_kinetic: f64,
    /// `(4 V(H) - V(2H)) / 3`, removing the `H^2` resolution bias of a
    /// smooth field; equals `total_trace` when the block count is odd.
    pub richardson_trace: f64,
    pub ratio_bounds_ok: bool,
    pub d_lower: f64,
    pub d_upper: f64,
}

/// Negative block traces above this are rounding and clamped to zero.
pub const DEFECT_FLOOR: f64 = 1e-8;

fn block_tensors(samples: &[DefectSample], dim: usize, blocks: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let nb = if dim == 1 { blocks } else { blocks * blocks };
    let mut acc = vec![[0.0f64; 7]; nb];
    let idx = |x: f64| ((x * blocks as f64).floor().max(0.0) as usize).min(blocks - 1);
    for s in samples {
        let b = if dim == 1 { idx(s.x[0]) } else { idx(s.x[0]) + blocks * idx(s.x[1]) };
        let a = &mut acc[b];
        let m = s.w * s.rho;
        a[0] += s.w;
        a[1] += m;
        a[2] += m * s.u[0];
        a[3] += m * s.u[1];
        a[4] += m * s.u[0] * s.u[0];
        a[5] += m * s.u[0] * s.u[1];
        a[6] += m * s.u[1] * s.u[1];
    }
    let mut out = Vec::with_capacity(nb);
    let mut vols = Vec::with_capacity(nb);
    for (b, a) in acc.iter().enumerate() {
        vols.push(a[0]);
        if a[0] <= 0.0 || a[1] <= 1e-300 {
            out.push([0.0; 3]);
            continue;
        }
        let r = [a[4] / a[0] - a[2] * a[2] / (a[1] * a[0]), a[5] / a[0] - a[2] * a[3] / (a[1] * a[0]), a[6] / a[0] - a[3] * a[3] / (a[1] * a[0])];
        let mut r = r;
        let tr = r[0] + r[2];
        if tr < -DEFECT_FLOOR {
            return Err(Error::NegativeDefect(tr, b));
        }
        if tr < 0.0 {
            r = [0.0; 3];
        }
        out.push(r);
    }
    Ok((out, vols))
}

/// Block-averaged Reynolds defect of one time slice on the unit box.
pub fn estimate_defect(samples: &[DefectSample], dim: usize, blocks: usize, d_lower: f64, d_upper: f64) -> Result<DefectEstimate> {
    if blocks == 0 {
        return Err(Error::Config("defect estimator needs at least one block".into()));
    }
    let (reynolds, vols) = block_tensors(samples, dim, blocks)?;
    let reynolds_trace: Vec<f64> = reynolds.iter().map(|r| r[0] + r[2]).collect();
    let kinetic_defect: Vec<f64> = reynolds_trace.iter().map(|t| 0.5 * t).collect();
    let total_trace: f64 = reynolds_trace.iter().zip(&vols).map(|(t, v)| t * v).sum();
    let total_kinetic = 0.5 * total_trace;
    let richardson_trace = if blocks % 2 == 0 {
        let (coarse, cv) = block_tensors(samples, dim, blocks / 2)?;
        let coarse_total: f64 = coarse.iter().zip(&cv).map(|(r, v)| (r[0] + r[2]) * v).sum();
        ((4.0 * total_trace - coarse_total) / 3.0).max(0.0)
    } else {
        total_trace
    };
    let ratio_bounds_ok = reynolds_trace.iter().zip(&kinetic_defect).all(|(&t, &e)| {
        e <= 1e-10 || (t >= d_lower * e * (1.0 - 1e-12) && t <= d_upper * e * (1.0 + 1e-12))
    });
    Ok(DefectEstimate {
        blocks,
        reynolds,
        reynolds_trace,
        kinetic_defect,
        total_trace,
        total_kinetic,
        richardson_trace,
        ratio_bounds_ok,
        d_lower,
        d_upper,
    })
}

/// Scalar factor of a test function: value, derivative and second factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SpaceFn {
    One,
    X,
    Y,
    XX,
    XY,
    CosX(u32),
    SinX(u32),
    CosY(u32),
    SinY(u32),
    CosXCosY,
}

impl SpaceFn {
    fn eval(self, x: Vec2<f64>) -> (f64, Vec2<f64>) {
        let pi = std::f64::consts::PI;
        match self {
            SpaceFn::One => (1.0, [0.0, 0.0]),
            SpaceFn::X => (x[0], [1.0, 0.0]),
            SpaceFn::Y => (x[1], [0.0, 1.0]),
            SpaceFn::XX => (x[0] * x[0], [2.0 * x[0], 0.0]),
            SpaceFn::XY => (x[0] * x[1], [x[1], x[0]]),
            SpaceFn::CosX(k) => {
                let a = k as f64 * pi;
                ((a * x[0]).cos(), [-a * (a * x[0]).sin(), 0.0])
            }
            SpaceFn::SinX(k) => {
                let a = k as f64 * pi;
                ((a * x[0]).sin(), [a * (a * x[0]).cos(), 0.0])
            }
            SpaceFn::CosY(k) => {
                let a = k as f64 * pi;
                ((a * x[1]).cos(), [0.0, -a * (a * x[1]).sin()])
            }
            SpaceFn::SinY(k) => {
                let a = k as f64 * pi;
                ((a * x[1]).sin(), [0.0, a * (a * x[1]).cos()])
            }
            SpaceFn::CosXCosY => {
                let (cx, sx, cy, sy) = ((pi * x[0]).cos(), (pi * x[0]).sin(), (pi * x[1]).cos(), (pi * x[1]).sin());
                (cx * cy, [-pi * sx * cy, -pi * cx * sy])
            }
        }
    }
}

/// `phi(t, x) = s^p f(x)` with `s = t / T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarTest {
    pub power: i32,
    pub space: SpaceFn,
}

impl ScalarTest {
    /// Value and spatial gradient at `(s, x)`.
    pub fn eval(&self, s: f64, x: Vec2<f64>) -> (f64, Vec2<f64>) {
        let g = s.powi(self.power);
        let (f, df) = self.space.eval(x);
        (g * f, [g * df[0], g * df[1]])
    }
}

/// `phi(t, x) = sin(pi s) s^p w(x)` for a sine mode `w`, compactly supported in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorTest {
    pub power: i32,
    pub mode: Mode,
}

impl VectorTest {
    pub fn eval(&self, dim: usize, s: f64, x: Vec2<f64>) -> (Vec2<f64>, Grad2<f64>) {
        let g = (std::f64::consts::PI * s).sin() * s.powi(self.power);
        let (w, dw) = mode_eval::<f64>(dim, self.mode, x);
        ([g * w[0], g * w[1]], [[g * dw[0][0], g * dw[0][1]], [g * dw[1][0], g * dw[1][1]]])
    }
}

/// Fixed family of test functions; changing it changes every residual.
#[derive(Debug, Clone)]
pub struct TestBank {
    pub scalar: Vec<ScalarTest>,
    pub vector: Vec<VectorTest>,
}

pub const TEST_BANK_VERSION: u32 = 1;

pub fn test_bank(dim: usize) -> TestBank {
    let space: Vec<SpaceFn> = if dim == 1 {
        vec![SpaceFn::One, SpaceFn::X, SpaceFn::XX, SpaceFn::CosX(1), SpaceFn::SinX(1), SpaceFn::CosX(2), SpaceFn::SinX(2)]
    } else {
        vec![SpaceFn::One, SpaceFn::X, SpaceFn::Y, SpaceFn::XY, SpaceFn::CosXCosY, SpaceFn::SinX(1), SpaceFn::SinY(1)]
    };
    let scalar = (0..3).flat_map(|p| space.iter().map(move |&f| ScalarTest { power: p, space: f })).collect();
    let modes = mode_list(dim, 7);
    let vector = (0..3).flat_map(|p| modes.iter().map(move |&m| VectorTest { power: p, mode: m })).collect();
    TestBank { scalar, vector }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictOptions {
    /// Coarse blocks per axis for the defect estimate.
    pub blocks: usize,
    pub d_lower: f64,
    pub d_upper: f64,
    pub tau_c: f64,
    pub residual_tol: f64,
    pub energy_tol: f64,
    /// Allowed `max rho - 1`; the rate scale `alpha^{-1/2}` by default.
    pub overshoot_tol: f64,
    /// Cell layers next to the wall left out of the momentum clause.
    pub boundary_layer: usize,
}

impl VerdictOptions {
    pub fn for_alpha(alpha: f64) -> Self {
        Self {
            blocks: 8,
            d_lower: 1.0,
            d_upper: 2.0,
            tau_c: crate::congestion::DEFAULT_TAU_C,
            residual_tol: 1e-4,
            energy_tol: 1e-5,
            overshoot_tol: alpha.powf(-0.5),
            boundary_layer: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipativeVerdict {
    pub continuity_residual: f64,
    pub momentum_residual: f64,
    pub energy_margin: f64,
    pub complementarity: f64,
    pub congested_divergence: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_defect: f64,
    pub min_block_trace: f64,
    pub sandwich_ok: bool,
    pub continuity_pass: bool,
    pub momentum_pass: bool,
    pub energy_pass: bool,
    pub bounds_ok: bool,
    pub test_bank_version: u32,
    pub label: String,
}

/// Per-frame point data shared by every test function.
struct FrameCache {
    /// Fine velocity at the quadrature points.
    u: Vec<Vec2<f64>>,
    strain: Vec<SymTensor<f64>>,
    faces: FaceVelocity<f64>,
    /// Block of each quadrature point.
    block: Vec<usize>,
    /// Block averages of `rho` and `rho u`.
    rho_bar: Vec<f64>,
    m_bar: Vec<Vec2<f64>>,
    defect: DefectEstimate,
}

fn block_of(dim: usize, blocks: usize, x: Vec2<f64>) -> usize {
    let idx = |x: f64| ((x * blocks as f64).floor().max(0.0) as usize).min(blocks - 1);
    if dim == 1 {
        idx(x[0])
    } else {
        idx(x[0]) + blocks * idx(x[1])
    }
}

fn frame_cache(setup: &Setup, f: &Frame, opts: &VerdictOptions) -> Result<FrameCache> {
    let (b, dim) = (&setup.basis, setup.mesh.dim());
    let samples = frame_samples(setup, &f.rho, &f.v);
    let defect = estimate_defect(&samples, dim, opts.blocks, opts.d_lower, opts.d_upper)?;
    let nb = defect.reynolds.len();
    let (mut vol, mut rho_bar, mut m_bar) = (vec![0.0; nb], vec![0.0; nb], vec![[0.0; 2]; nb]);
    let block: Vec<usize> = samples.iter().map(|s| block_of(dim, opts.blocks, s.x)).collect();
    for (s, &k) in samples.iter().zip(&block) {
        vol[k] += s.w;
        rho_bar[k] += s.w * s.rho;
        m_bar[k][0] += s.w * s.rho * s.u[0];
        m_bar[k][1] += s.w * s.rho * s.u[1];
    }
    for k in 0..nb {
        if vol[k] > 0.0 {
            rho_bar[k] /= vol[k];
            m_bar[k] = [m_bar[k][0] / vol[k], m_bar[k][1] / vol[k]];
        }
    }
    Ok(FrameCache {
        u: samples.iter().map(|s| s.u).collect(),
        strain: (0..b.n_points()).map(|p| b.strain_at(&f.v, &setup.bd, p)).collect(),
        faces: b.face_velocity(&setup.mesh, &setup.bd, &f.v),
        block,
        rho_bar,
        m_bar,
        defect,
    })
}

impl FrameCache {
    /// `rho_bar u_bar (x) u_bar + R` on the block of point `p`, as `[xx, xy, yy]`.
    fn convective(&self, p: usize) -> [f64; 3] {
        let k = self.block[p];
        let (r, m, re) = (self.rho_bar[k], self.m_bar[k], self.defect.reynolds[k]);
        if r <= 1e-300 {
            return re;
        }
        [m[0] * m[0] / r + re[0], m[0] * m[1] / r + re[1], m[1] * m[1] / r + re[2]]
    }
}

fn stress_tensor(dim: usize, s: &[f64; 3]) -> SymTensor<f64> {
    if dim == 1 {
        SymTensor::from_upper(1, &s[..1])
    } else {
        SymTensor::from_upper(2, s)
    }
}

fn sym_pair(a: &[f64; 3], g: &Grad2<f64>) -> f64 {
    a[0] * g[0][0] + a[1] * (g[0][1] + g[1][0]) + a[2] * g[1][1]
}

fn in_boundary_layer(setup: &Setup, k: usize, layers: usize) -> bool {
    let (nx, ny) = setup.mesh.shape();
    let (i, j) = setup.mesh.cell_ij(k);
    let near = |i: usize, n: usize| i < layers || i + layers >= n;
    near(i, nx) || (setup.mesh.dim() == 2 && near(j, ny))
}

fn continuity_residual(setup: &Setup, frames: &[Frame], caches: &[FrameCache], test: &ScalarTest, t_end: f64) -> f64 {
    let mesh = &setup.mesh;
    let (vol, area, h) = (mesh.cell_volume(), mesh.face_area(), mesh.h());
    let rho_b = setup.bd.rho_b();
    let mut r = 0.0;
    for n in 1..frames.len() {
        let (f, c, prev) = (&frames[n], &caches[n], &frames[n - 1]);
        let s = f.t / t_end;
        let phi_c: Vec<f64> = (0..mesh.n_cells()).map(|k| test.eval(s, mesh.cell_center(k)).0).collect();
        let change: f64 = (0..mesh.n_cells()).map(|k| vol * (f.rho[k] - prev.rho[k]) * phi_c[k]).sum();
        // centered face pairing of rho u with grad phi on the dual mesh
        let mut transport = 0.0;
        for (face, &a) in mesh.interior.iter().zip(&c.faces.interior) {
            let rho_f = 0.5 * (f.rho[face.left] + f.rho[face.right]);
            transport += rho_f * a * area * h * (phi_c[face.right] - phi_c[face.left]) / h;
        }
        let mut boundary = 0.0;
        for face in &mesh.boundary {
            let a = face.normal_velocity;
            let phi = test.eval(s, face.center).0;
            // half cell between the center and the wall
            transport += f.rho[face.cell] * a * area * (phi - phi_c[face.cell]);
            boundary += match face.side {
                Side::Out => phi * f.rho[face.cell] * a * area,
                Side::In => phi * rho_b * a * area,
            };
        }
        r += change - f.dt * (transport - boundary);
    }
    r.abs()
}

fn momentum_residual(setup: &Setup, frames: &[Frame], caches: &[FrameCache], test: &VectorTest, t_end: f64, layers: usize) -> f64 {
    let (b, dim) = (&setup.basis, setup.mesh.dim());
    let mut r = 0.0;
    for n in 1..frames.len() {
        let (f, c, prev, cp) = (&frames[n], &caches[n], &frames[n - 1], &caches[n - 1]);
        let s = f.t / t_end;
        let (mut change, mut flux) = (0.0, 0.0);
        for p in 0..b.n_points() {
            let k = b.cell_of(p);
            if in_boundary_layer(setup, k, layers) {
                continue;
            }
            let w = b.weight(p);
            let (phi, g) = test.eval(dim, s, b.point(p));
            let (m_new, m_old) = (f.rho[k], prev.rho[k]);
            change += w
                * ((m_new * c.u[p][0] - m_old * cp.u[p][0]) * phi[0] + (m_new * c.u[p][1] - m_old * cp.u[p][1]) * phi[1]);
            let sig = &f.stress[k];
            let stress = if dim == 1 { [sig[0], 0.0, 0.0] } else { *sig };
            let div = g[0][0] + g[1][1];
            let pi = setup.pressure.pressure(f.rho[k], k);
            flux += w * (sym_pair(&c.convective(p), &g) - sym_pair(&stress, &g) + pi * div);
        }
        r += change - f.dt * flux;
    }
    r.abs()
}

struct EnergyClause {
    margin: f64,
    scale: f64,
}

fn energy_clause(setup: &Setup, frames: &[Frame], caches: &[FrameCache], d_upper: f64) -> Result<EnergyClause> {
    let (b, dim, bd) = (&setup.basis, setup.mesh.dim(), &setup.bd);
    let gb = bd.gradient();
    let div_b = gb[0][0] + if dim == 2 { gb[1][1] } else { 0.0 };
    let kin = |i: usize| {
        let (f, c) = (&frames[i], &caches[i]);
        b.kinetic_energy(&f.rho, &f.v) - 0.5 * c.defect.total_trace + c.defect.total_trace / d_upper
    };
    let (e0, e_end) = (b.kinetic_energy(&frames[0].rho, &frames[0].v), kin(frames.len() - 1));
    let mut lhs = e_end - (e0 - 0.0);
    let mut rhs = 0.0;
    for n in 1..frames.len() {
        let (f, c) = (&frames[n], &caches[n]);
        let (mut diss, mut work) = (0.0, 0.0);
        for p in 0..b.n_points() {
            let k = b.cell_of(p);
            let w = b.weight(p);
            let s = stress_tensor(dim, &f.stress[k]);
            diss += w * (setup.potential.eval_f(&c.strain[p]) + setup.potential.conjugate(&s)?);
            let u = c.u[p];
            let ub = bd.value(b.point(p));
            let conv = c.convective(p);
            let sig = if dim == 1 { [f.stress[k][0], 0.0, 0.0] } else { f.stress[k] };
            let rho = f.rho[k];
            // u . u_B . grad u_B = u_i (u_B)_j d_j (u_B)_i
            let mut trip = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    trip += u[i] * ub[j] * gb[i][j];
                }
            }
            work += w * (-sym_pair(&conv, &gb) + rho * trip + sym_pair(&sig, &gb));
            diss += w * setup.pressure.pressure(rho, k) * div_b;
        }
        lhs += f.dt * diss;
        rhs += f.dt * work;
    }
    Ok(EnergyClause { margin: rhs - lhs, scale: 1.0 + e0 })
}

/// Weak residuals of the dissipative formulation over a stored run.
pub fn dissipative_verdict(setup: &Setup, frames: &[Frame], bank: &TestBank, opts: &VerdictOptions) -> Result<DissipativeVerdict> {
    if frames.len() < 2 {
        return Err(Error::Artifact("verdict needs at least two frames".into()));
    }
    let mesh = &setup.mesh;
    let t_end = frames.last().map_or(1.0, |f| f.t);
    let caches = frames.iter().map(|f| frame_cache(setup, f, opts)).collect::<Result<Vec<_>>>()?;
    let continuity_residual =
        bank.scalar.par_iter().map(|t| continuity_residual(setup, frames, &caches, t, t_end)).reduce(|| 0.0, f64::max);
    let momentum_residual =
        bank.vector.par_iter().map(|t| momentum_residual(setup, frames, &caches, t, t_end, opts.boundary_layer)).reduce(|| 0.0, f64::max);
    let ec = energy_clause(setup, frames, &caches, opts.d_upper)?;
    let vol = mesh.cell_volume();
    let (mut complementarity, mut congested) = (0.0, 0.0);
    for (f, c) in frames.iter().zip(&caches).skip(1) {
        let div = c.faces.divergence(mesh);
        for k in 0..mesh.n_cells() {
            let rs = setup.pressure.rho_star.at(k);
            complementarity += f.dt * vol * (setup.pressure.pressure(f.rho[k], k) * (f.rho[k] - rs)).abs();
            if f.rho[k] > rs * (1.0 - opts.tau_c) {
                congested += f.dt * vol * div[k] * div[k];
            }
        }
    }
    let span = (t_end - frames[0].t).max(f64::MIN_POSITIVE);
    let min_rho = frames.iter().flat_map(|f| f.rho.iter().copied()).fold(f64::INFINITY, f64::min);
    let max_rho = frames.iter().flat_map(|f| f.rho.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    let max_defect = caches.iter().map(|c| c.defect.richardson_trace).fold(0.0, f64::max);
    let min_block_trace =
        caches.iter().flat_map(|c| c.defect.reynolds_trace.iter().copied()).fold(f64::INFINITY, f64::min);
    let sandwich_ok = caches.iter().all(|c| c.defect.ratio_bounds_ok);
    let continuity_pass = continuity_residual <= opts.residual_tol;
    let momentum_pass = momentum_residual <= opts.residual_tol;
    let energy_pass = ec.margin >= -opts.energy_tol * ec.scale;
    let bounds_ok = min_rho >= 0.0 && max_rho <= 1.0 + opts.overshoot_tol;
    let all = continuity_pass && momentum_pass && energy_pass && bounds_ok;
    let label = match (all, max_defect <= 1e-5) {
        (true, true) => "classical-compatible",
        (true, false) => "dissipative",
        _ => "fail",
    };
    Ok(DissipativeVerdict {
        continuity_residual,
        momentum_residual,
        energy_margin: ec.margin,
        complementarity: complementarity / span,
        congested_divergence: (congested / span).sqrt(),
        min_rho,
        max_rho,
        max_defect,
        min_block_trace,
        sandwich_ok,
        continuity_pass,
        momentum_pass,
        energy_pass,
        bounds_ok,
        test_bank_version: TEST_BANK_VERSION,
        label: label.into(),
    })
}

/// One time slice of a run, reduced to what the congestion equivalence check needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSlice {
    pub dt: f64,
    pub rho: Vec<f64>,
    pub div: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaTolerances {
    pub divergence: f64,
    pub overshoot: f64,
}

impl Default for LemmaTolerances {
    fn default() -> Self {
        Self { divergence: 1e-6, overshoot: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaVerdict {
    pub congested_divergence: f64,
    pub min_rho0: f64,
    pub max_rho0: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    /// Divergence free on the congested set with admissible initial data.
    pub divergence_free: bool,
    /// `0 < rho <= 1` over the run.
    pub bounded: bool,
    pub forward: bool,
    pub backward: bool,
    pub consistent: bool,
}

/// Both directions of the congestion equivalence, evaluated discretely.
pub fn lemma_equivalence_check(cell_volume: f64, rho0: &[f64], slices: &[LemmaSlice], tau_c: f64, tol: &LemmaTolerances) -> LemmaVerdict {
    let fold = |v: &mut (f64, f64), x: f64| *v = (v.0.min(x), v.1.max(x));
    let mut r0 = (f64::INFINITY, f64::NEG_INFINITY);
    rho0.iter().for_each(|&x| fold(&mut r0, x));
    let mut r = r0;
    let mut congested = 0.0;
    for s in slices {
        for (&rho, &d) in s.rho.iter().zip(&s.div) {
            fold(&mut r, rho);
            if rho >= 1.0 - tau_c {
                congested += s.dt * cell_volume * d * d;
            }
        }
    }
    let congested_divergence = congested.sqrt();
    let divergence_free = congested_divergence <= tol.divergence && r0.0 > 0.0 && r0.1 <= 1.0 + tol.overshoot;
    let bounded = r.0 > 0.0 && r.1 <= 1.0 + tol.overshoot;
    LemmaVerdict {
        congested_divergence,
        min_rho0: r0.0,
        max_rho0: r0.1,
        min_rho: r.0,
        max_rho: r.1,
        divergence_free,
        bounded,
        forward: !divergence_free || bounded,
        backward: !bounded || divergence_free,
        consistent: divergence_free == bounded,
    }
}

/// Slices of a stored run, with the divergence of the face velocity.
pub fn lemma_slices(setup: &Setup, frames: &[Frame]) -> Vec<LemmaSlice> {
    frames
        .iter()
        .skip(1)
        .map(|f| LemmaSlice {
            dt: f.dt,
            rho: f.rho.clone(),
            div: setup.basis.face_velocity(&setup.mesh, &setup.bd, &f.v).divergence(&setup.mesh),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatibilityThresholds {
    pub defect: f64,
    pub gap: f64,
    pub pairing: f64,
    pub overshoot: f64,
}

impl Default for CompatibilityThresholds {
    fn default() -> Self {
        Self { defect: 1e-5, gap: 1e-5, pairing: 1e-6, overshoot: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityVerdict {
    pub in_regime: bool,
    pub defect: f64,
    pub max_gap: f64,
    pub congested_pairing: f64,
    pub max_rho: f64,
    pub pass: bool,
    pub label: String,
}

/// Strong-solution check: no defect, stress on the subdifferential, no
/// pressure work on the congested set.
pub fn compatibility_check(setup: &Setup, frames: &[Frame], blocks: usize, tau_c: f64, th: &CompatibilityThresholds) -> Result<CompatibilityVerdict> {
    let (mesh, b, dim) = (&setup.mesh, &setup.basis, setup.mesh.dim());
    let (vol, pc) = (mesh.cell_volume(), b.points_per_cell());
    let (mut defect, mut max_gap, mut pairing) = (0.0f64, 0.0f64, 0.0);
    let mut max_rho = f64::NEG_INFINITY;
    for (i, f) in frames.iter().enumerate() {
        max_rho = frames[i].rho.iter().copied().fold(max_rho, f64::max);
        let samples = frame_samples(setup, &f.rho, &f.v);
        defect = defect.max(estimate_defect(&samples, dim, blocks, 1.0, 2.0)?.richardson_trace);
        for k in 0..mesh.n_cells() {
            let mut d = SymTensor::zeros(dim);
            for p in k * pc..(k + 1) * pc {
                d = d.add(&b.strain_at(&f.v, &setup.bd, p).scale(b.weight(p) / vol));
            }
            let s = stress_tensor(dim, &f.stress[k]);
            let gap = setup.potential.eval_f(&d) + setup.potential.conjugate(&s)? - s.dot(&d);
            max_gap = max_gap.max(gap.abs());
        }
        if i > 0 {
            let div = b.face_velocity(mesh, &setup.bd, &f.v).divergence(mesh);
            for k in 0..mesh.n_cells() {
                if f.rho[k] >= 1.0 - tau_c {
                    pairing += f.dt * vol * setup.pressure.pressure(f.rho[k], k) * div[k];
                }
            }
        }
    }
    let in_regime = max_rho <= 1.0 + th.overshoot && defect <= th.defect;
    let pass = in_regime && max_gap <= th.gap && pairing.abs() <= th.pairing;
    let label = if !in_regime {
        "not in compatibility regime"
    } else if pass {
        "classical-compatible"
    } else {
        "incompatible"
    };
    Ok(CompatibilityVerdict { in_regime, defect, max_gap, congested_pairing: pairing.abs(), max_rho, pass, label: label.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Delta,
    Eps,
    Alpha,
    Modes,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Delta => "delta",
            Axis::Eps => "eps",
            Axis::Alpha => "alpha",
            Axis::Modes => "modes",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub axis: Axis,
    pub value: f64,
    pub params: RunParams,
}

/// One point per ladder value, every other parameter taken from `base`.
pub fn sweep_grid(base: &RunParams, axes: &[(Axis, Vec<f64>)]) -> Result<Vec<SweepPoint>> {
    let mut out = vec![];
    for (axis, values) in axes {
        if values.len() < 2 {
            return Err(Error::Config(format!("sweep axis {} needs at least two values", axis.name())));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) || values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config(format!("sweep axis {} must be positive and ascending", axis.name())));
        }
        for &value in values {
            let mut params = base.clone();
            match axis {
                Axis::Delta => params.delta = value,
                Axis::Eps => params.eps = value,
                Axis::Alpha => params.alpha = value,
                Axis::Modes => params.modes = value as usize,
            }
            params.validate()?;
            out.push(SweepPoint { axis: *axis, value, params });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub terminal_v_norm: f64,
    pub terminal_kinetic: f64,
    pub max_overshoot_l2: f64,
    pub mean_complementarity: f64,
    pub mean_congested_divergence: f64,
    pub final_congestion: CongestionReport<f64>,
    pub min_energy_margin: f64,
    pub mass_cumulative_residual: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub extra_substeps: usize,
    pub verdict: DissipativeVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    pub axis: Axis,
    pub value: f64,
    pub delta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub n: usize,
    pub resolution: usize,
    pub dt: f64,
    pub summary: Option<PointSummary>,
    pub error: Option<String>,
    #[serde(skip)]
    pub steps: Vec<crate::run::StepRecord>,
    #[serde(skip)]
    pub terminal: Option<(Vec<f64>, Vec<f64>)>,
    #[serde(skip)]
    pub hard_failure: bool,
    #[serde(skip)]
    pub cell_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub axis: Axis,
    pub quantity: String,
    pub points: Vec<(f64, f64)>,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub points: Vec<PointResult>,
    pub fits: Vec<RateFit>,
    pub test_bank_version: u32,
}

fn time_mean(steps: &[crate::run::StepRecord], f: impl Fn(&crate::run::StepRecord) -> f64) -> f64 {
    let t: f64 = steps.iter().map(|s| s.dt).sum();
    if t > 0.0 {
        steps.iter().map(|s| s.dt * f(s)).sum::<f64>() / t
    } else {
        0.0
    }
}

fn summarize(setup: &Setup, p: &RunParams, out: &RunOutput) -> Result<PointSummary> {
    let last = out.steps.last().ok_or_else(|| Error::Config("run has no steps".into()))?;
    let opts = VerdictOptions { tau_c: p.tau_c, ..VerdictOptions::for_alpha(p.alpha) };
    let verdict = dissipative_verdict(setup, &out.frames, &test_bank(p.dim), &opts)?;
    Ok(PointSummary {
        terminal_v_norm: last.v_norm,
        terminal_kinetic: last.kinetic_energy,
        max_overshoot_l2: out.steps.iter().map(|s| s.congestion.overshoot_norms[1]).fold(0.0, f64::max),
        mean_complementarity: time_mean(&out.steps, |s| s.congestion.complementarity),
        mean_congested_divergence: time_mean(&out.steps, |s| s.congestion.congested_divergence),
        final_congestion: last.congestion,
        min_energy_margin: out.energy_verdicts.iter().map(|v| v.margin).fold(f64::INFINITY, f64::min),
        mass_cumulative_residual: out.mass.cumulative_residual(),
        min_rho: out.steps.iter().map(|s| s.min_rho).fold(f64::INFINITY, f64::min),
        max_rho: out.steps.iter().map(|s| s.max_rho).fold(f64::NEG_INFINITY, f64::max),
        extra_substeps: out.extra_substeps,
        verdict,
    })
}

fn run_point(pt: &SweepPoint) -> PointResult {
    let p = &pt.params;
    let mut res = PointResult {
        axis: pt.axis,
        value: pt.value,
        delta: p.delta,
        eps: p.eps,
        alpha: p.alpha,
        n: p.modes,
        resolution: p.resolution,
        dt: p.dt,
        summary: None,
        error: None,
        steps: vec![],
        terminal: None,
        hard_failure: false,
        cell_volume: (p.resolution as f64).powi(-(p.dim as i32)),
    };
    let outcome = Setup::new(p).and_then(|setup| {
        let out = crate::run::simulate_with(&setup, p)?;
        let summary = summarize(&setup, p, &out)?;
        Ok((out, summary))
    });
    match outcome {
        Ok((out, summary)) => {
            let last = out.frames.last().map(|f| (f.rho.clone(), f.v.clone()));
            res.summary = Some(summary);
            res.steps = out.steps;
            res.terminal = last;
        }
        Err(e) => {
            res.hard_failure = e.is_hard_assertion();
            res.error = Some(e.to_string());
        }
    }
    res
}

/// Least-squares slope of `ln y` against `ln x` over the positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// `L^2` distance of two terminal states; coefficient vectors of different
/// length are padded, which is exact for an orthonormal basis.
fn state_distance(cell_volume: f64, a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    let dr: f64 = a.0.iter().zip(&b.0).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * cell_volume;
    let n = a.1.len().max(b.1.len());
    let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
    let dv: f64 = (0..n).map(|i| (get(&a.1, i) - get(&b.1, i)).powi(2)).sum();
    (dr + dv).sqrt()
}

fn axis_fits(points: &[PointResult]) -> Vec<RateFit> {
    let mut fits = vec![];
    for axis in [Axis::Alpha, Axis::Delta, Axis::Eps, Axis::Modes] {
        let group: Vec<&PointResult> = points.iter().filter(|p| p.axis == axis && p.summary.is_some()).collect();
        if group.len() < 2 {
            continue;
        }
        let s = |p: &PointResult| p.summary.clone().expect("filtered on summary");
        let distances: Vec<(f64, f64)> = group
            .windows(2)
            .filter_map(|w| match (&w[0].terminal, &w[1].terminal) {
                (Some(a), Some(b)) if a.0.len() == b.0.len() => Some((w[0].value, state_distance(w[0].cell_volume, a, b))),
                _ => None,
            })
            .collect();
        let (quantity, pts): (&str, Vec<(f64, f64)>) = match axis {
            Axis::Alpha => ("max_overshoot_l2", group.iter().map(|p| (p.value, s(p).max_overshoot_l2)).collect()),
            Axis::Delta => ("min_energy_margin_abs", group.iter().map(|p| (p.value, s(p).min_energy_margin.abs())).collect()),
            Axis::Eps => ("terminal_drift", distances.clone()),
            Axis::Modes => {
                let top = s(group[group.len() - 1]).terminal_kinetic;
                ("kinetic_gap", group[..group.len() - 1].iter().map(|p| (p.value, (top - s(p).terminal_kinetic).abs())).collect())
            }
        };
        fits.push(RateFit { axis, quantity: quantity.into(), slope: loglog_slope(&pts), points: pts });
        if axis != Axis::Eps {
            fits.push(RateFit { axis, quantity: "terminal_drift".into(), slope: loglog_slope(&distances), points: distances });
        }
    }
    fits
}

/// Runs every point on a pool of `workers` threads. Results keep the input
/// order, so the report does not depend on scheduling.
pub fn run_sweep(points: &[SweepPoint], workers: usize) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<PointResult> = pool.install(|| points.par_iter().map(run_point).collect());
    let fits = axis_fits(&results);
    Ok(SweepReport { points: results, fits, test_bank_version: TEST_BANK_VERSION })
}
