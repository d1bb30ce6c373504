//! Single-run driver: builds the discretization from parameters, advances
//! the coupled system and collects every per-step audit.

use crate::congestion::{congestion_diagnostics, CongestionPressure, CongestionReport, Threshold};
use crate::continuity::{
    max_principle_data, renormalized_balance, DensityField, Entropy, MassLedger, MaxPrincipleTracker,
};
use crate::domain::{build_mesh, extend_boundary, validate_initial, BoundaryData, BoundarySpec, InitialData, Mesh};
use crate::energy::{assemble_ledger, assert_energy_inequality, total_energy, EnergyLedger, EnergyVerdict, LedgerContext};
use crate::error::{Error, Result};
use crate::momentum::{GalerkinBasis, MomentumProblem, VelocityState, MAX_RETRIES};
use crate::potential::{MollifiedPotential, PotentialSpec};
use crate::tensors::SymTensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityProfile {
    Uniform { value: f64 },
    /// Linear in `x` between the two walls.
    Linear { left: f64, right: f64 },
    /// `base + amplitude cos(wavenumber pi x)`.
    Cosine { base: f64, amplitude: f64, wavenumber: f64 },
    /// `base + amplitude exp(-|x - center|^2 / width^2)`.
    Bump { base: f64, amplitude: f64, center: [f64; 2], width: f64 },
    Step { left: f64, right: f64, at: f64 },
}

impl DensityProfile {
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            DensityProfile::Uniform { value } => value,
            DensityProfile::Linear { left, right } => left + (right - left) * x[0],
            DensityProfile::Cosine { base, amplitude, wavenumber } => {
                base + amplitude * (wavenumber * std::f64::consts::PI * x[0]).cos()
            }
            DensityProfile::Bump { base, amplitude, center, width } => {
                let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                base + amplitude * (-r2 / (width * width)).exp()
            }
            DensityProfile::Step { left, right, at } => {
                if x[0] < at {
                    left
                } else {
                    right
                }
            }
        }
    }
}

/// Initial velocity `u_B + velocity + sum_i modes[i] w_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub density: DensityProfile,
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub modes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub dim: usize,
    pub resolution: usize,
    pub boundary: BoundarySpec<f64>,
    pub initial: InitialSpec,
    pub potential: PotentialSpec<f64>,
    pub delta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub rho_star: f64,
    pub modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub tau_c: f64,
    pub frozen_density: bool,
    pub energy_tol: f64,
}

impl RunParams {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.tol > 0.0) {
            return bad("dt, T and tol must be positive");
        }
        if !(self.eps >= 0.0 && self.delta >= 0.0) {
            return bad("eps and delta must be nonnegative");
        }
        if self.max_iter == 0 || self.modes == 0 {
            return bad("max_iter and modes must be positive");
        }
        if !(self.tau_c > 0.0 && self.tau_c < 1.0) {
            return bad("tau_c must lie in (0, 1)");
        }
        self.potential.validate(self.dim)
    }
}

/// Discretization built from the parameters.
pub struct Setup {
    pub mesh: Mesh<f64>,
    pub bd: BoundaryData<f64>,
    pub basis: GalerkinBasis<f64>,
    pub potential: MollifiedPotential<f64>,
    pub pressure: CongestionPressure<f64>,
}

impl Setup {
    pub fn new(p: &RunParams) -> Result<Self> {
        p.validate()?;
        let mesh = build_mesh(p.dim, p.resolution, &p.boundary)?;
        let bd = extend_boundary(&mesh, &p.boundary)?;
        let basis = GalerkinBasis::new(&mesh, p.modes)?;
        let potential = MollifiedPotential::new(p.potential, p.delta)?;
        let pressure = CongestionPressure { alpha: p.alpha, rho_star: Threshold::Uniform(p.rho_star) };
        pressure.validate()?;
        Ok(Self { mesh, bd, basis, potential, pressure })
    }

    pub fn ledger_context(&self) -> LedgerContext<'_, f64> {
        LedgerContext {
            mesh: &self.mesh,
            bd: &self.bd,
            basis: &self.basis,
            potential: &self.potential,
            pressure: &self.pressure,
        }
    }

    pub fn problem(&self, frozen: bool) -> MomentumProblem<'_, f64> {
        MomentumProblem {
            mesh: &self.mesh,
            bd: &self.bd,
            basis: &self.basis,
            potential: &self.potential,
            pressure: &self.pressure,
            frozen_density: frozen,
        }
    }

    /// Validated initial density and Galerkin coefficients.
    pub fn initial_state(&self, init: &InitialSpec) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.basis.n();
        if init.modes.len() > n {
            return Err(Error::Config(format!("{} initial mode amplitudes for {n} modes", init.modes.len())));
        }
        let mode_part = |x: [f64; 2]| -> [f64; 2] {
            let mut acc = [init.velocity[0], init.velocity[1]];
            if init.modes.is_empty() {
                return acc;
            }
            let mut c = vec![0.0; n];
            c[..init.modes.len()].copy_from_slice(&init.modes);
            let w = crate::momentum::mode_values(self.mesh.dim(), self.basis.modes(), &c, x);
            acc[0] += w[0];
            acc[1] += w[1];
            acc
        };
        let rho0: Vec<f64> = (0..self.mesh.n_cells()).map(|k| init.density.value(self.mesh.cell_center(k))).collect();
        let m0 = (0..self.mesh.n_cells())
            .map(|k| {
                let x = self.mesh.cell_center(k);
                let (ub, v) = (self.bd.value(x), mode_part(x));
                [rho0[k] * (ub[0] + v[0]), rho0[k] * (ub[1] + v[1])]
            })
            .collect();
        let valid = validate_initial(InitialData { rho0, m0 })?;
        Ok((valid.rho0, self.basis.project(mode_part)))
    }

    /// Cell averages of a pointwise tensor field, upper entries `[xx, xy, yy]`.
    pub fn cell_average(&self, field: &[SymTensor<f64>]) -> Vec<[f64; 3]> {
        let pc = self.basis.points_per_cell();
        let vol = self.mesh.cell_volume();
        (0..self.mesh.n_cells())
            .map(|c| {
                let mut acc = [0.0; 3];
                for p in c * pc..(c + 1) * pc {
                    let w = self.basis.weight(p) / vol;
                    let s = &field[p];
                    acc[0] += w * s.get(0, 0);
                    if self.mesh.dim() == 2 {
                        acc[1] += w * s.get(0, 1);
                        acc[2] += w * s.get(1, 1);
                    }
                }
                acc
            })
            .collect()
    }

    /// Stress `dF_delta(D u)` at every quadrature point.
    pub fn constitutive_stress(&self, v: &[f64]) -> Result<Vec<SymTensor<f64>>> {
        (0..self.basis.n_points()).map(|p| self.potential.subgradient(&self.basis.strain_at(v, &self.bd, p))).collect()
    }
}

/// Stored state after a step: the fields the verdicts are recomputed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    /// Cell averages of the stress used by the step.
    pub stress: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_principle_bound: f64,
    pub discrete_bound: f64,
    /// Renormalized residual for `z log z`.
    pub renorm_residual: f64,
    pub v_norm: f64,
    pub picard_iters: usize,
    pub viscous_dissipation: f64,
    pub kinetic_energy: f64,
    pub congestion: CongestionReport<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<Frame>,
    pub steps: Vec<StepRecord>,
    pub ledgers: Vec<EnergyLedger<f64>>,
    pub energy_verdicts: Vec<EnergyVerdict>,
    pub e0: f64,
    pub mass: MassLedger<f64>,
    pub max_principle: MaxPrincipleTracker<f64>,
    /// Accepted steps beyond the nominal count, from step halving.
    pub extra_substeps: usize,
}

/// Floor of the Fenchel-Young gap accepted as rounding.
pub const FY_FLOOR: f64 = 1e-8;
/// Per-step mass ledger closure, relative to the mass scale.
pub const MASS_STEP_TOL: f64 = 1e-10;

pub fn simulate(p: &RunParams) -> Result<RunOutput> {
    let setup = Setup::new(p)?;
    simulate_with(&setup, p)
}

pub fn simulate_with(setup: &Setup, p: &RunParams) -> Result<RunOutput> {
    let (rho0, v0) = setup.initial_state(&p.initial)?;
    let mesh = &setup.mesh;
    let ctx = setup.ledger_context();
    let pb = setup.problem(p.frozen_density);
    let mut rho = DensityField::new(rho0, p.eps);
    let mut vel = VelocityState::new(v0);
    let e0 = total_energy(&ctx, &rho, &vel);
    let mut mass = MassLedger::new(rho.mass(mesh));
    let mut mp = MaxPrincipleTracker::new(max_principle_data(mesh, &setup.bd, &rho.rho), &rho.rho);
    let s0 = setup.constitutive_stress(&vel.v)?;
    let mut frames = vec![Frame { step: 0, t: 0.0, dt: 0.0, rho: rho.rho.clone(), v: vel.v.clone(), stress: setup.cell_average(&s0) }];
    let (mut steps, mut ledgers, mut verdicts) = (vec![], vec![], vec![]);
    let n_steps = p.steps();
    for _ in 0..n_steps {
        let dt = p.dt.min(p.t_end - rho.t).max(p.dt * 1e-9);
        for st in pb.advance(&rho, &vel, dt, p.tol, p.max_iter, MAX_RETRIES)? {
            let led = assemble_ledger(&ctx, &rho, &vel, &st)?;
            let scale = 1.0 + led.dissipation_primal.abs() + led.dissipation_dual.abs();
            if led.fy_min_gap < -FY_FLOOR * scale {
                return Err(Error::FenchelYoungViolated(led.fy_min_gap));
            }
            mass.record(st.rho.t, st.rho.mass(mesh), &st.fluxes, st.dt);
            let closure = mass.entries.last().map_or(0.0, |e| e.step_residual.abs());
            if closure > MASS_STEP_TOL * mass.scale() {
                return Err(Error::MassLedgerOpen(closure));
            }
            let div = st.faces.divergence(mesh);
            mp.step(st.dt, &div, &st.rho.rho)?;
            let renorm = renormalized_balance(mesh, &setup.bd, &st.faces, &rho, &st.rho, st.dt, &Entropy);
            let cong_div = setup.basis.face_velocity(mesh, &setup.bd, &st.vel.v).divergence(mesh);
            steps.push(StepRecord {
                t: st.rho.t,
                dt: st.dt,
                mass: st.rho.mass(mesh),
                min_rho: st.rho.min(),
                max_rho: st.rho.max(),
                max_principle_bound: mp.bound(),
                discrete_bound: mp.discrete_bound(),
                renorm_residual: renorm.residual,
                v_norm: st.vel.norm(),
                picard_iters: st.iterations,
                viscous_dissipation: led.dissipation_pairing,
                kinetic_energy: led.kinetic,
                congestion: congestion_diagnostics(mesh, &st.rho.rho, &cong_div, &setup.pressure, p.tau_c),
            });
            verdicts.push(assert_energy_inequality(&led, e0, p.energy_tol));
            ledgers.push(led);
            frames.push(Frame {
                step: frames.len(),
                t: st.rho.t,
                dt: st.dt,
                rho: st.rho.rho.clone(),
                v: st.vel.v.clone(),
                stress: setup.cell_average(&st.stress),
            });
            rho = st.rho;
            vel = st.vel;
        }
    }
    let extra_substeps = steps.len().saturating_sub(n_steps);
    Ok(RunOutput { frames, steps, ledgers, energy_verdicts: verdicts, e0, mass, max_principle: mp, extra_substeps })
}
