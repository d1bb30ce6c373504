//! Parabolic continuity equation `rho_t + div(rho u) = eps lap rho` with the
//! Robin inflow condition, discretized by implicit upwind finite volumes.
//!
//! The boundary flux through a face with `a = u_B . n` is `rho_cell a` on
//! the outflow part and `rho_B a` on the inflow part: the convective trace
//! `rho_cell a` plus the Robin correction `(rho_B - rho_cell) a`.

use crate::domain::{BoundaryData, Mesh, Side, Vec2};
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::quadrature::gauss_legendre;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct DensityField<T> {
    pub rho: Vec<T>,
    pub t: T,
    pub eps: T,
}

impl<T: Real> DensityField<T> {
    pub fn new(rho: Vec<T>, eps: T) -> Self {
        Self { rho, t: T::zero(), eps }
    }

    pub fn mass(&self, mesh: &Mesh<T>) -> T {
        self.rho.iter().fold(T::zero(), |a, &r| a + r) * mesh.cell_volume()
    }

    pub fn min(&self) -> T {
        self.rho.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.rho.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// Face-averaged normal velocities. Interior normals point from `left` to
/// `right`; boundary normals point outward.
#[derive(Debug, Clone)]
pub struct FaceVelocity<T> {
    pub interior: Vec<T>,
    pub boundary: Vec<T>,
}

impl<T: Real> FaceVelocity<T> {
    /// Averages `u . n` over each face with a Gauss rule; boundary faces
    /// take the prescribed `u_B . n`.
    pub fn from_field(mesh: &Mesh<T>, points: usize, u: impl Fn(Vec2<T>) -> Vec2<T>) -> Self {
        let (gx, gw) = gauss_legendre(points);
        let h = mesh.h();
        let interior = mesh
            .interior
            .iter()
            .map(|f| {
                let c = mesh.interior_face_center(f);
                if mesh.dim() == 1 {
                    return u(c)[0];
                }
                let tangent = 1 - f.axis;
                gx.iter().zip(&gw).fold(T::zero(), |acc, (&x, &w)| {
                    let mut p = c;
                    p[tangent] += T::half() * h * T::lit(x);
                    acc + T::half() * T::lit(w) * u(p)[f.axis]
                })
            })
            .collect();
        let boundary = mesh.boundary.iter().map(|f| f.normal_velocity).collect();
        Self { interior, boundary }
    }

    /// Cellwise divergence `sum_faces (u . n) |face| / |cell|`.
    pub fn divergence(&self, mesh: &Mesh<T>) -> Vec<T> {
        let scale = mesh.face_area() / mesh.cell_volume();
        let mut div = vec![T::zero(); mesh.n_cells()];
        for (f, &a) in mesh.interior.iter().zip(&self.interior) {
            div[f.left] += a * scale;
            div[f.right] -= a * scale;
        }
        for (f, &a) in mesh.boundary.iter().zip(&self.boundary) {
            div[f.cell] += a * scale;
        }
        div
    }
}

/// Boundary transport over one step, as rates.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundaryFluxes<T> {
    /// `sum_out rho a |f|`.
    pub outflow: T,
    /// `sum_in rho_cell |a| |f|`, the convective part of the inflow.
    pub inflow_convective: T,
    /// `sum_in (rho_B - rho_cell) |a| |f|`, the Robin correction.
    pub inflow_diffusive: T,
}

fn boundary_fluxes<T: Real>(mesh: &Mesh<T>, bd: &BoundaryData<T>, rho: &[T]) -> BoundaryFluxes<T> {
    let area = mesh.face_area();
    let mut out = BoundaryFluxes::default();
    for f in &mesh.boundary {
        let a = f.normal_velocity;
        let r = rho[f.cell];
        match f.side {
            Side::Out => out.outflow += r * a * area,
            Side::In => {
                out.inflow_convective += r * (-a) * area;
                out.inflow_diffusive += (bd.rho_b() - r) * (-a) * area;
            }
        }
    }
    out
}

/// One backward Euler step. The assembled operator is checked for the
/// M-matrix sign pattern before solving.
pub fn continuity_step<T: Real>(
    mesh: &Mesh<T>,
    bd: &BoundaryData<T>,
    state: &DensityField<T>,
    faces: &FaceVelocity<T>,
    dt: T,
) -> Result<(DensityField<T>, BoundaryFluxes<T>)> {
    if !(dt > T::zero()) {
        return Err(Error::LinearSolveFailure(format!("time step {dt} must be positive")));
    }
    let n = mesh.n_cells();
    let (nx, _) = mesh.shape();
    let bw = if mesh.dim() == 1 { 1 } else { nx };
    let mut a = BandMatrix::new(n, bw);
    let vol = mesh.cell_volume();
    let area = mesh.face_area();
    let diff = state.eps * area / mesh.h();
    let mut rhs: Vec<T> = state.rho.iter().map(|&r| r * vol / dt).collect();
    for k in 0..n {
        a.add(k, k, vol / dt);
    }
    for (f, &u) in mesh.interior.iter().zip(&faces.interior) {
        let (up, down) = (u.pos() * area, u.neg_part() * area);
        a.add(f.left, f.left, up + diff);
        a.add(f.left, f.right, -down - diff);
        a.add(f.right, f.right, down + diff);
        a.add(f.right, f.left, -up - diff);
    }
    for f in &mesh.boundary {
        let un = f.normal_velocity;
        match f.side {
            Side::Out => a.add(f.cell, f.cell, un * area),
            Side::In => rhs[f.cell] += -un * area * bd.rho_b(),
        }
    }
    for k in 0..n {
        if !(a.get(k, k) > T::zero()) || a.row_offdiag(k).any(|(_, v)| v > T::zero()) {
            return Err(Error::NonMonotoneScheme(k));
        }
    }
    let rho = a.solve(&rhs)?;
    let fluxes = boundary_fluxes(mesh, bd, &rho);
    Ok((DensityField { rho, t: state.t + dt, eps: state.eps }, fluxes))
}

#[derive(Debug, Clone, Copy)]
pub struct MassLedgerEntry<T> {
    pub t: T,
    pub interior_mass: T,
    pub inflow_cumulative: T,
    pub outflow_cumulative: T,
    pub diffusive_boundary_cumulative: T,
    /// Closure error of this step alone.
    pub step_residual: T,
}

/// Running balance `mass(t) + outflow - inflow - diffusive = mass(0)`.
#[derive(Debug, Clone)]
pub struct MassLedger<T> {
    pub initial_mass: T,
    pub entries: Vec<MassLedgerEntry<T>>,
}

impl<T: Real> MassLedger<T> {
    pub fn new(initial_mass: T) -> Self {
        Self { initial_mass, entries: vec![] }
    }

    pub fn record(&mut self, t: T, mass: T, fluxes: &BoundaryFluxes<T>, dt: T) {
        let prev = self.entries.last().copied();
        let (m0, inc, outc, difc) = prev
            .map(|e| (e.interior_mass, e.inflow_cumulative, e.outflow_cumulative, e.diffusive_boundary_cumulative))
            .unwrap_or((self.initial_mass, T::zero(), T::zero(), T::zero()));
        let step_in = fluxes.inflow_convective * dt;
        let step_out = fluxes.outflow * dt;
        let step_dif = fluxes.inflow_diffusive * dt;
        self.entries.push(MassLedgerEntry {
            t,
            interior_mass: mass,
            inflow_cumulative: inc + step_in,
            outflow_cumulative: outc + step_out,
            diffusive_boundary_cumulative: difc + step_dif,
            step_residual: mass - m0 + step_out - step_in - step_dif,
        });
    }

    /// Cumulative closure error at the last recorded step.
    pub fn cumulative_residual(&self) -> T {
        self.entries.last().map_or(T::zero(), |e| {
            e.interior_mass + e.outflow_cumulative - e.inflow_cumulative - e.diffusive_boundary_cumulative
                - self.initial_mass
        })
    }

    pub fn max_step_residual(&self) -> T {
        self.entries.iter().map(|e| e.step_residual.abs()).fold(T::zero(), T::max)
    }

    /// Mass scale used to normalize closure errors.
    pub fn scale(&self) -> T {
        self.entries
            .iter()
            .map(|e| e.interior_mass.abs())
            .fold(self.initial_mass.abs(), T::max)
            .max(T::lit(1e-300))
    }
}

/// Convex function used to renormalize the continuity equation.
pub trait Renormalization<T: Real> {
    fn value(&self, z: T) -> T;
    fn d1(&self, z: T) -> T;
}

/// `B(z) = z`.
pub struct Identity;
/// `B(z) = z^2`.
pub struct Square;
/// `B(z) = z log z`, with the logarithm guarded at vacuum.
pub struct Entropy;
/// `B(z) = z^alpha / (alpha - 1)`, the pressure potential.
pub struct PowerRenorm<T>(pub T);

/// Floor under the logarithm of the entropy at vacuum cells.
pub const LOG_FLOOR: f64 = 1e-300;

impl<T: Real> Renormalization<T> for Identity {
    fn value(&self, z: T) -> T {
        z
    }
    fn d1(&self, _z: T) -> T {
        T::one()
    }
}

impl<T: Real> Renormalization<T> for Square {
    fn value(&self, z: T) -> T {
        z * z
    }
    fn d1(&self, z: T) -> T {
        T::two() * z
    }
}

impl<T: Real> Renormalization<T> for Entropy {
    fn value(&self, z: T) -> T {
        z * z.max(T::lit(LOG_FLOOR)).ln()
    }
    fn d1(&self, z: T) -> T {
        z.max(T::lit(LOG_FLOOR)).ln() + T::one()
    }
}

impl<T: Real> Renormalization<T> for PowerRenorm<T> {
    fn value(&self, z: T) -> T {
        z.max(T::zero()).powf(self.0) / (self.0 - T::one())
    }
    fn d1(&self, z: T) -> T {
        self.0 / (self.0 - T::one()) * z.max(T::zero()).powf(self.0 - T::one())
    }
}

/// Terms of the discrete renormalized balance over one step, as rates.
///
/// `residual = time + transport + diffusion - boundary`; it splits into
/// `chain_defect`, the backward Euler convexity gap (nonpositive for convex
/// `B`, first order in `dt`), and an algebraic remainder at rounding level.
#[derive(Debug, Clone, Copy)]
pub struct RenormalizedTerms<T> {
    pub time: T,
    pub transport: T,
    pub diffusion: T,
    pub boundary: T,
    pub residual: T,
    pub chain_defect: T,
}

pub fn renormalized_balance<T: Real, B: Renormalization<T> + ?Sized>(
    mesh: &Mesh<T>,
    bd: &BoundaryData<T>,
    faces: &FaceVelocity<T>,
    old: &DensityField<T>,
    new: &DensityField<T>,
    dt: T,
    b: &B,
) -> RenormalizedTerms<T> {
    let vol = mesh.cell_volume();
    let area = mesh.face_area();
    let (r0, r1) = (&old.rho, &new.rho);
    let mut time = T::zero();
    let mut chain = T::zero();
    for (&a, &c) in r0.iter().zip(r1) {
        let db = b.value(c) - b.value(a);
        time += vol * db / dt;
        chain += vol * (db - b.d1(c) * (c - a)) / dt;
    }
    let mut transport = T::zero();
    let mut diffusion = T::zero();
    let diff = new.eps * area / mesh.h();
    for (f, &u) in mesh.interior.iter().zip(&faces.interior) {
        let (l, r) = (r1[f.left], r1[f.right]);
        let flux = (u.pos() * l - u.neg_part() * r) * area;
        transport += flux * (b.d1(l) - b.d1(r));
        diffusion += diff * (l - r) * (b.d1(l) - b.d1(r));
    }
    let mut boundary = T::zero();
    for f in &mesh.boundary {
        let a = f.normal_velocity;
        let r = r1[f.cell];
        transport += b.d1(r) * r * a * area;
        if f.side == Side::In {
            boundary += b.d1(r) * (r - bd.rho_b()) * a.min(T::zero()) * area;
        }
    }
    let residual = time + transport + diffusion - boundary;
    RenormalizedTerms { time, transport, diffusion, boundary, residual, chain_defect: chain }
}

/// Data part `max{sup rho0, sup_in rho_B, sup |u_B|}` of the maximum principle bound.
pub fn max_principle_data<T: Real>(mesh: &Mesh<T>, bd: &BoundaryData<T>, rho0: &[T]) -> T {
    let rho_sup = rho0.iter().copied().fold(T::zero(), T::max);
    let inflow = if mesh.inflow_faces().next().is_some() { bd.rho_b() } else { T::zero() };
    rho_sup.max(inflow).max(bd.sup_norm(mesh.dim()))
}

/// Tracks `sup rho` against the maximum principle bound along a run.
#[derive(Debug, Clone)]
pub struct MaxPrincipleTracker<T> {
    pub data: T,
    pub elapsed: T,
    pub max_div: T,
    /// `sum_n -log(1 - dt_n |div u|_inf)`, the backward Euler growth exponent.
    pub discrete_exponent: T,
    pub sup_rho: T,
}

impl<T: Real> MaxPrincipleTracker<T> {
    pub fn new(data: T, rho0: &[T]) -> Self {
        let sup_rho = rho0.iter().copied().fold(T::zero(), T::max);
        Self { data, elapsed: T::zero(), max_div: T::zero(), discrete_exponent: T::zero(), sup_rho }
    }

    /// `data * exp(tau |div u|_inf)`.
    pub fn bound(&self) -> T {
        self.data * (self.elapsed * self.max_div).exp()
    }

    pub fn discrete_bound(&self) -> T {
        self.data * self.discrete_exponent.exp()
    }

    /// Records a step and checks the bound.
    pub fn step(&mut self, dt: T, divergence: &[T], rho: &[T]) -> Result<T> {
        let d = divergence.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        self.max_div = self.max_div.max(d);
        self.elapsed += dt;
        let x = dt * d;
        self.discrete_exponent += if x < T::one() { -(T::one() - x).ln() } else { T::infinity() };
        self.sup_rho = rho.iter().copied().fold(self.sup_rho, T::max);
        self.check()
    }

    pub fn check(&self) -> Result<T> {
        let bound = self.bound().max(self.discrete_bound());
        if self.sup_rho > bound * (T::one() + T::lit(1e-10)) {
            return Err(Error::MaxPrincipleViolated { sup: self.sup_rho.as_f64(), bound: bound.as_f64() });
        }
        Ok(self.bound())
    }
}
