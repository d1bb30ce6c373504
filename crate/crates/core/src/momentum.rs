//! Galerkin approximation of the momentum balance on sine modes, coupled to
//! the continuity solver by a Picard iteration per time step.

use crate::congestion::CongestionPressure;
use crate::continuity::{continuity_step, BoundaryFluxes, DensityField, FaceVelocity};
use crate::domain::{BoundaryData, Grad2, Mesh, Vec2};
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::potential::MollifiedPotential;
use crate::quadrature::gauss_legendre;
use crate::scalar::Real;
use crate::tensors::SymTensor;
use rayon::prelude::*;

/// Sine mode `sqrt(2) sin(k pi x)` in 1D, `2 sin(k pi x) sin(l pi y) e_comp` in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub k: usize,
    pub l: usize,
    pub comp: usize,
}

pub(crate) fn mode_list(dim: usize, n: usize) -> Vec<Mode> {
    if dim == 1 {
        return (1..=n).map(|k| Mode { k, l: 0, comp: 0 }).collect();
    }
    let side = n + 1;
    let mut pairs: Vec<(usize, usize)> = (1..=side).flat_map(|k| (1..=side).map(move |l| (k, l))).collect();
    pairs.sort_by_key(|&(k, l)| (k * k + l * l, k, l));
    pairs
        .into_iter()
        .flat_map(|(k, l)| (0..2).map(move |comp| Mode { k, l, comp }))
        .take(n)
        .collect()
}

pub(crate) fn mode_eval<T: Real>(dim: usize, m: Mode, x: Vec2<T>) -> (Vec2<T>, Grad2<T>) {
    let pi = T::PI();
    let z = T::zero();
    let kx = T::from_usize_lossy(m.k) * pi;
    if dim == 1 {
        let c = T::two().sqrt();
        return ([c * (kx * x[0]).sin(), z], [[c * kx * (kx * x[0]).cos(), z], [z, z]]);
    }
    let ly = T::from_usize_lossy(m.l) * pi;
    let (sx, cx) = ((kx * x[0]).sin(), (kx * x[0]).cos());
    let (sy, cy) = ((ly * x[1]).sin(), (ly * x[1]).cos());
    let mut val = [z, z];
    let mut grad = [[z, z], [z, z]];
    val[m.comp] = T::two() * sx * sy;
    grad[m.comp] = [T::two() * kx * cx * sy, T::two() * ly * sx * cy];
    (val, grad)
}

/// `sum_i c_i w_i(x)` evaluated directly.
pub fn mode_values<T: Real>(dim: usize, modes: &[Mode], c: &[T], x: Vec2<T>) -> Vec2<T> {
    let mut out = [T::zero(); 2];
    for (m, ci) in modes.iter().zip(c) {
        let (w, _) = mode_eval(dim, *m, x);
        out[0] += *ci * w[0];
        out[1] += *ci * w[1];
    }
    out
}

/// Symmetric gradient in the mesh dimension.
pub fn strain<T: Real>(dim: usize, g: &Grad2<T>) -> SymTensor<T> {
    if dim == 1 {
        SymTensor::sym_part(1, &[g[0][0]])
    } else {
        SymTensor::sym_part(2, &[g[0][0], g[0][1], g[1][0], g[1][1]])
    }
}

/// `(a . grad) u` for `g[i][j] = d_j u_i`.
#[inline]
fn advect<T: Real>(g: &Grad2<T>, a: Vec2<T>) -> Vec2<T> {
    [g[0][0] * a[0] + g[0][1] * a[1], g[1][0] * a[0] + g[1][1] * a[1]]
}

#[inline]
fn dot2<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

const GRAM_TOL: f64 = 1e-12;
const MAX_POINTS: usize = 12;

/// Mode tables at the cell and face quadrature points.
#[derive(Debug, Clone)]
pub struct GalerkinBasis<T> {
    dim: usize,
    modes: Vec<Mode>,
    per_cell: usize,
    points: Vec<Vec2<T>>,
    weights: Vec<T>,
    val: Vec<Vec2<T>>,
    grad: Vec<Grad2<T>>,
    face_per: usize,
    face_points: Vec<Vec2<T>>,
    face_weights: Vec<T>,
    face_val: Vec<Vec2<T>>,
    /// Derivative of each mode along the face normal.
    face_dn: Vec<Vec2<T>>,
}

impl<T: Real> GalerkinBasis<T> {
    /// Builds `n` modes with the smallest Gauss rule whose Gram matrix is
    /// the identity within `1e-12`.
    pub fn new(mesh: &Mesh<T>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("mode count must be positive".into()));
        }
        let mut last = None;
        for nq in 3..=MAX_POINTS {
            let b = Self::with_points(mesh, n, nq);
            let err = b.gram_error();
            if err <= T::lit(GRAM_TOL) {
                return Ok(b);
            }
            last = Some(err);
        }
        Err(Error::Config(format!("mesh too coarse for {n} modes: Gram error {:e}", last.unwrap())))
    }

    fn with_points(mesh: &Mesh<T>, n: usize, nq: usize) -> Self {
        let dim = mesh.dim();
        let modes = mode_list(dim, n);
        let (gx, gw) = gauss_legendre(nq);
        let h = mesh.h();
        let half = T::half() * h;
        let rule: Vec<(T, T)> = gx.iter().zip(&gw).map(|(&x, &w)| (half * (T::lit(x) + T::one()), half * T::lit(w))).collect();
        let per_cell = if dim == 1 { nq } else { nq * nq };
        let mut points = Vec::with_capacity(mesh.n_cells() * per_cell);
        let mut weights = Vec::with_capacity(points.capacity());
        for c in 0..mesh.n_cells() {
            let o = mesh.cell_origin(c);
            if dim == 1 {
                for &(x, w) in &rule {
                    points.push([o[0] + x, T::zero()]);
                    weights.push(w);
                }
            } else {
                for &(y, wy) in &rule {
                    for &(x, wx) in &rule {
                        points.push([o[0] + x, o[1] + y]);
                        weights.push(wx * wy);
                    }
                }
            }
        }
        let (val, grad) = tabulate(dim, &modes, &points);
        let face_per = if dim == 1 { 1 } else { nq };
        let mut face_points = vec![];
        let mut face_weights = vec![];
        for f in &mesh.interior {
            let c = mesh.interior_face_center(f);
            if dim == 1 {
                face_points.push(c);
                face_weights.push(T::one());
                continue;
            }
            let t = 1 - f.axis;
            for &(s, w) in &rule {
                let mut p = c;
                p[t] = p[t] - half + s;
                face_points.push(p);
                face_weights.push(w);
            }
        }
        let (face_val, face_grad) = tabulate(dim, &modes, &face_points);
        let nm = modes.len();
        let face_dn = face_grad
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let axis = mesh.interior[i / nm / face_per].axis;
                [g[0][axis], g[1][axis]]
            })
            .collect();
        Self { dim, modes, per_cell, points, weights, val, grad, face_per, face_points, face_weights, face_val, face_dn }
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn points_per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn point(&self, p: usize) -> Vec2<T> {
        self.points[p]
    }

    pub fn weight(&self, p: usize) -> T {
        self.weights[p]
    }

    pub fn cell_of(&self, p: usize) -> usize {
        p / self.per_cell
    }

    pub fn gram(&self) -> Vec<T> {
        let n = self.n();
        let mut g = vec![T::zero(); n * n];
        for p in 0..self.n_points() {
            let v = &self.val[p * n..(p + 1) * n];
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] += self.weights[p] * dot2(v[i], v[j]);
                }
            }
        }
        g
    }

    pub fn gram_error(&self) -> T {
        let n = self.n();
        self.gram()
            .iter()
            .enumerate()
            .map(|(i, &g)| (g - if i / n == i % n { T::one() } else { T::zero() }).abs())
            .fold(T::zero(), T::max)
    }

    /// `v` part of the velocity at quadrature point `p`.
    pub fn v_at(&self, v: &[T], p: usize) -> Vec2<T> {
        let n = self.n();
        let mut out = [T::zero(); 2];
        for (c, w) in v.iter().zip(&self.val[p * n..(p + 1) * n]) {
            out[0] += *c * w[0];
            out[1] += *c * w[1];
        }
        out
    }

    pub fn v_grad_at(&self, v: &[T], p: usize) -> Grad2<T> {
        let n = self.n();
        let mut out = [[T::zero(); 2]; 2];
        for (c, g) in v.iter().zip(&self.grad[p * n..(p + 1) * n]) {
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += *c * g[i][j];
                }
            }
        }
        out
    }

    /// Full velocity `v + u_B` at point `p`.
    pub fn u_at(&self, v: &[T], bd: &BoundaryData<T>, p: usize) -> Vec2<T> {
        let a = self.v_at(v, p);
        let b = bd.value(self.points[p]);
        [a[0] + b[0], a[1] + b[1]]
    }

    pub fn u_grad_at(&self, v: &[T], bd: &BoundaryData<T>, p: usize) -> Grad2<T> {
        let mut g = self.v_grad_at(v, p);
        let gb = bd.gradient();
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += gb[i][j];
            }
        }
        g
    }

    pub fn strain_at(&self, v: &[T], bd: &BoundaryData<T>, p: usize) -> SymTensor<T> {
        strain(self.dim, &self.u_grad_at(v, bd, p))
    }

    /// L2 inner products against the modes.
    pub fn project(&self, field: impl Fn(Vec2<T>) -> Vec2<T>) -> Vec<T> {
        let n = self.n();
        let mut c = vec![T::zero(); n];
        for p in 0..self.n_points() {
            let f = field(self.points[p]);
            for (m, ci) in c.iter_mut().enumerate() {
                *ci += self.weights[p] * dot2(f, self.val[p * n + m]);
            }
        }
        c
    }

    /// Projection of a cellwise constant field.
    pub fn project_cellwise(&self, field: &[Vec2<T>]) -> Vec<T> {
        let n = self.n();
        let mut c = vec![T::zero(); n];
        for p in 0..self.n_points() {
            let f = field[self.cell_of(p)];
            for (m, ci) in c.iter_mut().enumerate() {
                *ci += self.weights[p] * dot2(f, self.val[p * n + m]);
            }
        }
        c
    }

    /// `int 1/2 rho |v|^2`.
    pub fn kinetic_energy(&self, rho: &[T], v: &[T]) -> T {
        (0..self.n_points()).fold(T::zero(), |acc, p| {
            let w = self.v_at(v, p);
            acc + T::half() * self.weights[p] * rho[self.cell_of(p)] * dot2(w, w)
        })
    }

    /// Face averages of `u . n`, the transport field of the continuity step.
    pub fn face_velocity(&self, mesh: &Mesh<T>, bd: &BoundaryData<T>, v: &[T]) -> FaceVelocity<T> {
        let n = self.n();
        let area = mesh.face_area();
        let interior = mesh
            .interior
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                let mut s = T::zero();
                for q in fi * self.face_per..(fi + 1) * self.face_per {
                    let mut u = bd.value(self.face_points[q])[f.axis];
                    for (m, c) in v.iter().enumerate() {
                        u += *c * self.face_val[q * n + m][f.axis];
                    }
                    s += self.face_weights[q] * u;
                }
                s / area
            })
            .collect();
        let boundary = mesh.boundary.iter().map(|f| f.normal_velocity).collect();
        FaceVelocity { interior, boundary }
    }

    /// `sum_f [rho]_f int_f u_B . d_n v`, the pairing `int grad rho . grad v u_B`
    /// for a cellwise constant density.
    pub fn jump_pairing(&self, mesh: &Mesh<T>, bd: &BoundaryData<T>, rho: &[T], v: &[T]) -> T {
        let n = self.n();
        let mut total = T::zero();
        for (fi, f) in mesh.interior.iter().enumerate() {
            let jump = rho[f.right] - rho[f.left];
            if jump == T::zero() {
                continue;
            }
            for q in fi * self.face_per..(fi + 1) * self.face_per {
                let ub = bd.value(self.face_points[q]);
                let mut dv = [T::zero(); 2];
                for (m, c) in v.iter().enumerate() {
                    dv[0] += *c * self.face_dn[q * n + m][0];
                    dv[1] += *c * self.face_dn[q * n + m][1];
                }
                total += jump * self.face_weights[q] * dot2(ub, dv);
            }
        }
        total
    }

    /// Largest `|u - u_B|` over sample points on the boundary.
    pub fn trace_error(&self, v: &[T]) -> T {
        let samples = 17;
        let mut worst = T::zero();
        for s in 0..=samples {
            let t = T::from_usize_lossy(s) / T::from_usize_lossy(samples);
            let pts: Vec<Vec2<T>> = if self.dim == 1 {
                vec![[T::zero(), T::zero()], [T::one(), T::zero()]]
            } else {
                vec![[t, T::zero()], [t, T::one()], [T::zero(), t], [T::one(), t]]
            };
            for x in pts {
                let mut u = [T::zero(); 2];
                for (m, c) in self.modes.iter().zip(v) {
                    let (w, _) = mode_eval(self.dim, *m, x);
                    u[0] += *c * w[0];
                    u[1] += *c * w[1];
                }
                worst = worst.max(u[0].abs()).max(u[1].abs());
            }
        }
        worst
    }
}

fn tabulate<T: Real>(dim: usize, modes: &[Mode], points: &[Vec2<T>]) -> (Vec<Vec2<T>>, Vec<Grad2<T>>) {
    let mut val = Vec::with_capacity(points.len() * modes.len());
    let mut grad = Vec::with_capacity(val.capacity());
    for &x in points {
        for &m in modes {
            let (v, g) = mode_eval(dim, m, x);
            val.push(v);
            grad.push(g);
        }
    }
    (val, grad)
}

/// Galerkin coefficients of `v = u - u_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState<T> {
    pub v: Vec<T>,
    pub t: T,
}

impl<T: Real> VelocityState<T> {
    pub fn new(v: Vec<T>) -> Self {
        Self { v, t: T::zero() }
    }

    pub fn norm(&self) -> T {
        self.v.iter().fold(T::zero(), |a, &c| a + c * c).sqrt()
    }
}

/// `P_n` applied to a velocity field.
pub fn project_pn<T: Real>(basis: &GalerkinBasis<T>, field: impl Fn(Vec2<T>) -> Vec2<T>) -> Vec<T> {
    basis.project(field)
}

/// Everything a momentum step reads besides the evolving state.
#[derive(Clone, Copy)]
pub struct MomentumProblem<'a, T> {
    pub mesh: &'a Mesh<T>,
    pub bd: &'a BoundaryData<T>,
    pub basis: &'a GalerkinBasis<T>,
    pub potential: &'a MollifiedPotential<T>,
    pub pressure: &'a CongestionPressure<T>,
    /// Skip the continuity solve and keep the density fixed.
    pub frozen_density: bool,
}

#[derive(Debug, Clone)]
pub struct MomentumStep<T> {
    pub vel: VelocityState<T>,
    /// Linearized stress used by the step, at every quadrature point.
    pub stress: Vec<SymTensor<T>>,
}

#[derive(Debug, Clone)]
pub struct CoupledStep<T> {
    pub rho: DensityField<T>,
    pub vel: VelocityState<T>,
    pub stress: Vec<SymTensor<T>>,
    /// Transport field used by the accepted continuity solve.
    pub faces: FaceVelocity<T>,
    pub fluxes: BoundaryFluxes<T>,
    pub iterations: usize,
    pub dt: T,
}

const CHUNK_CELLS: usize = 64;

impl<'a, T: Real> MomentumProblem<'a, T> {
    /// Assembles and solves the linearized Galerkin system for `v'`.
    ///
    /// Time derivative in the form `rho^n (v' - v)/dt + (rho' - rho^n) v'/(2 dt)`,
    /// skew-symmetric convection by `u*`, the parabolic terms folded into
    /// `eps div(u (x) grad rho)`, pressure `pi(rho')` and one Newton step on
    /// the stress around `u*`.
    pub fn momentum_step(
        &self,
        rho_old: &DensityField<T>,
        rho_new: &DensityField<T>,
        vel_old: &VelocityState<T>,
        guess: &VelocityState<T>,
        dt: T,
    ) -> Result<MomentumStep<T>> {
        let basis = self.basis;
        let n = basis.n();
        let pc = basis.per_cell;
        let n_cells = self.mesh.n_cells();
        let chunks: Vec<Result<(Vec<T>, Vec<T>)>> = (0..n_cells.div_ceil(CHUNK_CELLS))
            .into_par_iter()
            .map(|ch| {
                let lo = ch * CHUNK_CELLS * pc;
                let hi = ((ch + 1) * CHUNK_CELLS).min(n_cells) * pc;
                self.assemble_cells(lo..hi, rho_old, rho_new, vel_old, guess, dt)
            })
            .collect();
        let mut a = vec![T::zero(); n * n];
        let mut b = vec![T::zero(); n];
        for c in chunks {
            let (ca, cb) = c?;
            a.iter_mut().zip(ca).for_each(|(x, y)| *x += y);
            b.iter_mut().zip(cb).for_each(|(x, y)| *x += y);
        }
        self.assemble_faces(rho_new, &mut a, &mut b);
        let v = solve_dense(a, b).map_err(|_| Error::SingularMassMatrix)?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NewtonDivergence);
        }
        let stress = self.linearized_stress(&guess.v, &v)?;
        Ok(MomentumStep { vel: VelocityState { v, t: vel_old.t + dt }, stress })
    }

    fn assemble_cells(
        &self,
        range: std::ops::Range<usize>,
        rho_old: &DensityField<T>,
        rho_new: &DensityField<T>,
        vel_old: &VelocityState<T>,
        guess: &VelocityState<T>,
        dt: T,
    ) -> Result<(Vec<T>, Vec<T>)> {
        let basis = self.basis;
        let (n, dim) = (basis.n(), basis.dim);
        let gb = self.bd.gradient();
        let db = strain(dim, &gb);
        let mut a = vec![T::zero(); n * n];
        let mut b = vec![T::zero(); n];
        let mut dw = Vec::with_capacity(n);
        let mut tw = Vec::with_capacity(n);
        let mut conv = Vec::with_capacity(n);
        let mut lift = Vec::with_capacity(n);
        for p in range {
            let c = basis.cell_of(p);
            let w = basis.weights[p];
            let (r0, r1) = (rho_old.rho[c], rho_new.rho[c]);
            let vals = &basis.val[p * n..(p + 1) * n];
            let grads = &basis.grad[p * n..(p + 1) * n];
            let ustar = basis.u_at(&guess.v, self.bd, p);
            let dstar = strain(dim, &basis.u_grad_at(&guess.v, self.bd, p));
            let sstar = self.potential.subgradient(&dstar).map_err(|_| Error::NewtonDivergence)?;
            let ub = self.bd.value(basis.points[p]);
            let vold = basis.v_at(&vel_old.v, p);
            dw.clear();
            tw.clear();
            conv.clear();
            lift.clear();
            for g in grads {
                let d = strain(dim, g);
                tw.push(self.potential.tangent(&dstar, &d));
                dw.push(d);
                conv.push(advect(g, ustar));
            }
            for val in vals {
                lift.push(advect(&gb, *val));
            }
            let s_rhs = sstar.add(&self.potential.tangent(&dstar, &db.sub(&dstar)));
            let mass = w * (r0 + r1) / (T::two() * dt);
            let f_b = advect(&gb, ub);
            for j in 0..n {
                let row = &mut a[j * n..(j + 1) * n];
                for m in 0..n {
                    row[m] += mass * dot2(vals[j], vals[m])
                        + T::half() * w * r1 * (dot2(conv[m], vals[j]) - dot2(conv[j], vals[m]))
                        + w * r1 * dot2(lift[m], vals[j])
                        + w * tw[m].dot(&dw[j]);
                }
                b[j] += w * r0 / dt * dot2(vold, vals[j]) - w * r1 * dot2(f_b, vals[j]) - w * s_rhs.dot(&dw[j]);
            }
        }
        Ok((a, b))
    }

    fn assemble_faces(&self, rho_new: &DensityField<T>, a: &mut [T], b: &mut [T]) {
        let basis = self.basis;
        let n = basis.n();
        let eps = rho_new.eps;
        for (fi, f) in self.mesh.interior.iter().enumerate() {
            let (rl, rr) = (rho_new.rho[f.left], rho_new.rho[f.right]);
            let dp = self.pressure.pressure(rl, f.left) - self.pressure.pressure(rr, f.right);
            let jump = eps * (rr - rl);
            for q in fi * basis.face_per..(fi + 1) * basis.face_per {
                let w = basis.face_weights[q];
                let vals = &basis.face_val[q * n..(q + 1) * n];
                let dn = &basis.face_dn[q * n..(q + 1) * n];
                let ub = self.bd.value(basis.face_points[q]);
                for j in 0..n {
                    b[j] += w * dp * vals[j][f.axis];
                    if jump != T::zero() {
                        b[j] += w * jump * dot2(ub, dn[j]);
                        for m in 0..n {
                            a[j * n + m] += T::half() * w * jump * (dot2(dn[m], vals[j]) - dot2(vals[m], dn[j]));
                        }
                    }
                }
            }
        }
    }

    /// `S(D u*) + T(D u*)[D u' - D u*]` at every quadrature point.
    pub fn linearized_stress(&self, guess: &[T], v: &[T]) -> Result<Vec<SymTensor<T>>> {
        let basis = self.basis;
        let parts: Vec<Result<Vec<SymTensor<T>>>> = (0..basis.n_points().div_ceil(CHUNK_CELLS * basis.per_cell))
            .into_par_iter()
            .map(|ch| {
                let lo = ch * CHUNK_CELLS * basis.per_cell;
                let hi = (lo + CHUNK_CELLS * basis.per_cell).min(basis.n_points());
                (lo..hi)
                    .map(|p| {
                        let ds = basis.strain_at(guess, self.bd, p);
                        let d1 = basis.strain_at(v, self.bd, p);
                        let s = self.potential.subgradient(&ds).map_err(|_| Error::NewtonDivergence)?;
                        Ok(s.add(&self.potential.tangent(&ds, &d1.sub(&ds))))
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(basis.n_points());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Picard iteration between the continuity and momentum solves.
    pub fn fixed_point_coupler(
        &self,
        rho_prev: &DensityField<T>,
        vel_prev: &VelocityState<T>,
        dt: T,
        tol: T,
        max_iter: usize,
    ) -> Result<CoupledStep<T>> {
        if !(tol > T::zero()) {
            return Err(Error::Config("fixed point tolerance must be positive".into()));
        }
        let mut guess = vel_prev.clone();
        let mut increment = T::infinity();
        for it in 1..=max_iter {
            let faces = self.basis.face_velocity(self.mesh, self.bd, &guess.v);
            let (rho, fluxes) = if self.frozen_density {
                let mut r = rho_prev.clone();
                r.t += dt;
                (r, BoundaryFluxes::default())
            } else {
                continuity_step(self.mesh, self.bd, rho_prev, &faces, dt)?
            };
            let step = self.momentum_step(rho_prev, &rho, vel_prev, &guess, dt)?;
            increment = step.vel.v.iter().zip(&guess.v).fold(T::zero(), |a, (x, y)| a + (*x - *y) * (*x - *y)).sqrt();
            if !increment.is_finite() {
                return Err(Error::NewtonDivergence);
            }
            if increment <= tol * (T::one() + guess.norm()) {
                return Ok(CoupledStep { rho, vel: step.vel, stress: step.stress, faces, fluxes, iterations: it, dt });
            }
            guess = step.vel;
        }
        Err(Error::FixedPointStall { iters: max_iter, increment: increment.as_f64() })
    }

    /// Advances by `dt`, halving the step after a stall or a diverged
    /// linearization, up to `retries` times.
    pub fn advance(
        &self,
        rho: &DensityField<T>,
        vel: &VelocityState<T>,
        dt: T,
        tol: T,
        max_iter: usize,
        retries: usize,
    ) -> Result<Vec<CoupledStep<T>>> {
        match self.fixed_point_coupler(rho, vel, dt, tol, max_iter) {
            Ok(s) => Ok(vec![s]),
            Err(Error::FixedPointStall { .. } | Error::NewtonDivergence) if retries > 0 => {
                let half = dt * T::half();
                let mut first = self.advance(rho, vel, half, tol, max_iter, retries - 1)?;
                let last = first.last().expect("nonempty").clone();
                first.extend(self.advance(&last.rho, &last.vel, half, tol, max_iter, retries - 1)?);
                Ok(first)
            }
            Err(e) => Err(e),
        }
    }
}

/// Default number of step halvings after a stall.
pub const MAX_RETRIES: usize = 5;
