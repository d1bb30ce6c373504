//! Term-by-term ledger of the approximate energy inequality for one
//! accepted step, in the pairing form and in the primal plus dual form.
//!
//! Flux-type terms are rates; the ledger integrates them over the step with
//! the backward Euler rule of the steppers, so the per-step `residual`
//! telescopes over a run.

use crate::congestion::CongestionPressure;
use crate::continuity::DensityField;
use crate::domain::{BoundaryData, Mesh, Side};
use crate::error::Result;
use crate::momentum::{CoupledStep, GalerkinBasis, VelocityState};
use crate::potential::MollifiedPotential;
use crate::scalar::Real;
use serde::Serialize;

/// Read-only context shared by all ledger evaluations of a run.
#[derive(Clone, Copy)]
pub struct LedgerContext<'a, T> {
    pub mesh: &'a Mesh<T>,
    pub bd: &'a BoundaryData<T>,
    pub basis: &'a GalerkinBasis<T>,
    pub potential: &'a MollifiedPotential<T>,
    pub pressure: &'a CongestionPressure<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyLedger<T> {
    pub t: T,
    pub dt: T,
    /// `int 1/2 rho |u - u_B|^2` at the end of the step.
    pub kinetic: T,
    pub pressure_potential: T,
    pub dissipation_primal: T,
    pub dissipation_dual: T,
    pub dissipation_pairing: T,
    /// `int_out Pi(rho) u_B . n`.
    pub boundary_out: T,
    /// `-int_in [Pi(rho_B) - Pi'(rho)(rho_B - rho) - Pi(rho)] u_B . n`.
    pub boundary_in_bregman: T,
    /// `eps sum_f |f|/h [rho]_f [Pi'(rho)]_f`, the discrete `eps int Pi'' |grad rho|^2`.
    pub eps_entropy: T,
    /// Bregman dissipation of the upwind fluxes.
    pub upwind_dissipation: T,
    /// Convective, pressure, stress and inflow right-hand sides.
    pub rhs_terms: [T; 4],
    /// `eps int grad rho . grad(u - u_B) u_B`, left over by the parabolic terms.
    pub eps_coupling: T,
    /// Backward Euler dissipation `1/2 int rho^n |v' - v^n|^2 / dt` plus the
    /// convexity gap of `Pi`; reported only.
    pub time_dissipation: T,
    /// Energy change plus `dt` times (dissipation + boundary + eps terms - rhs).
    pub residual: T,
    /// `residual` with the pairing replaced by `F + F*`.
    pub residual_dual: T,
    pub fy_min_gap: T,
    pub fy_max_gap: T,
}

impl<T: Real> EnergyLedger<T> {
    pub fn energy(&self) -> T {
        self.kinetic + self.pressure_potential
    }

    pub const COLUMNS: [&'static str; 22] = [
        "t",
        "dt",
        "kinetic",
        "pressure_potential",
        "dissipation_primal",
        "dissipation_dual",
        "dissipation_pairing",
        "boundary_out",
        "boundary_in_bregman",
        "eps_entropy",
        "upwind_dissipation",
        "rhs_convective",
        "rhs_pressure",
        "rhs_stress",
        "rhs_inflow",
        "eps_coupling",
        "time_dissipation",
        "residual",
        "residual_dual",
        "fy_min_gap",
        "fy_max_gap",
        "energy",
    ];

    pub fn values(&self) -> Vec<T> {
        let r = self.rhs_terms;
        vec![
            self.t,
            self.dt,
            self.kinetic,
            self.pressure_potential,
            self.dissipation_primal,
            self.dissipation_dual,
            self.dissipation_pairing,
            self.boundary_out,
            self.boundary_in_bregman,
            self.eps_entropy,
            self.upwind_dissipation,
            r[0],
            r[1],
            r[2],
            r[3],
            self.eps_coupling,
            self.time_dissipation,
            self.residual,
            self.residual_dual,
            self.fy_min_gap,
            self.fy_max_gap,
            self.energy(),
        ]
    }
}

/// `Pi(rho_B) - Pi'(rho)(rho_B - rho) - Pi(rho)`.
pub fn bregman_bracket<T: Real>(cp: &CongestionPressure<T>, rho: T, rho_b: T, k: usize) -> T {
    cp.potential(rho_b, k) - cp.potential_d1(rho, k) * (rho_b - rho) - cp.potential(rho, k)
}

/// `int 1/2 rho |v|^2 + int Pi(rho)`.
pub fn total_energy<T: Real>(ctx: &LedgerContext<'_, T>, rho: &DensityField<T>, vel: &VelocityState<T>) -> T {
    let vol = ctx.mesh.cell_volume();
    let pot = rho.rho.iter().enumerate().fold(T::zero(), |a, (k, &r)| a + ctx.pressure.potential(r, k) * vol);
    ctx.basis.kinetic_energy(&rho.rho, &vel.v) + pot
}

pub fn assemble_ledger<T: Real>(
    ctx: &LedgerContext<'_, T>,
    rho_prev: &DensityField<T>,
    vel_prev: &VelocityState<T>,
    step: &CoupledStep<T>,
) -> Result<EnergyLedger<T>> {
    let (mesh, bd, basis, cp) = (ctx.mesh, ctx.bd, ctx.basis, ctx.pressure);
    let dt = step.dt;
    let vol = mesh.cell_volume();
    let area = mesh.face_area();
    let (r0, r1) = (&rho_prev.rho, &step.rho.rho);
    let v = &step.vel.v;
    let gb = bd.gradient();
    let db = crate::momentum::strain(mesh.dim(), &gb);

    let mut led = EnergyLedger { t: step.rho.t, dt, ..Default::default() };
    led.fy_min_gap = T::infinity();
    led.fy_max_gap = T::neg_infinity();
    let mut kin_num = T::zero();
    let mut convective = T::zero();
    for p in 0..basis.n_points() {
        let w = basis.weight(p);
        let c = basis.cell_of(p);
        let d = basis.strain_at(v, bd, p);
        let s = &step.stress[p];
        let pair = ctx.potential.fenchel_gap(&d, s)?;
        led.dissipation_primal += w * pair.f_value;
        led.dissipation_dual += w * pair.fstar_value;
        led.dissipation_pairing += w * s.dot(&d);
        led.fy_min_gap = led.fy_min_gap.min(pair.gap);
        led.fy_max_gap = led.fy_max_gap.max(pair.gap);
        led.rhs_terms[2] += w * s.dot(&db);
        let vp = basis.v_at(v, p);
        let u = basis.u_at(v, bd, p);
        let lift = [gb[0][0] * u[0] + gb[0][1] * u[1], gb[1][0] * u[0] + gb[1][1] * u[1]];
        convective += w * r1[c] * (lift[0] * vp[0] + lift[1] * vp[1]);
        led.kinetic += T::half() * w * r1[c] * (vp[0] * vp[0] + vp[1] * vp[1]);
        let v0 = basis.v_at(&vel_prev.v, p);
        let dv = [vp[0] - v0[0], vp[1] - v0[1]];
        kin_num += T::half() * w * r0[c] * (dv[0] * dv[0] + dv[1] * dv[1]) / dt;
    }
    if basis.n_points() == 0 {
        led.fy_min_gap = T::zero();
        led.fy_max_gap = T::zero();
    }
    led.rhs_terms[0] = -convective;

    let div_b = bd.divergence(mesh.dim());
    let mut chain = T::zero();
    for (k, (&a, &b)) in r0.iter().zip(r1).enumerate() {
        led.pressure_potential += cp.potential(b, k) * vol;
        led.rhs_terms[1] -= cp.pressure(b, k) * div_b * vol;
        chain += vol * (cp.potential(b, k) - cp.potential(a, k) - cp.potential_d1(b, k) * (b - a)) / dt;
    }

    let diff = step.rho.eps * area / mesh.h();
    for (f, &a) in mesh.interior.iter().zip(&step.faces.interior) {
        let (l, r) = (r1[f.left], r1[f.right]);
        let (dl, dr) = (cp.potential_d1(l, f.left), cp.potential_d1(r, f.right));
        led.eps_entropy += diff * (l - r) * (dl - dr);
        let flux = (a.pos() * l - a.neg_part() * r) * area;
        led.upwind_dissipation += flux * (dl - dr) - a * area * (cp.pressure(l, f.left) - cp.pressure(r, f.right));
    }
    for f in &mesh.boundary {
        let a = f.normal_velocity * area;
        let r = r1[f.cell];
        match f.side {
            Side::Out => led.boundary_out += cp.potential(r, f.cell) * a,
            Side::In => {
                led.boundary_in_bregman -= bregman_bracket(cp, r, bd.rho_b(), f.cell) * a;
                led.rhs_terms[3] -= cp.potential(bd.rho_b(), f.cell) * a;
            }
        }
    }
    led.eps_coupling = step.rho.eps * basis.jump_pairing(mesh, bd, r1, v);
    led.time_dissipation = kin_num - chain;

    let e_prev = total_energy(ctx, rho_prev, vel_prev);
    let lhs_rates = led.dissipation_pairing
        + led.boundary_out
        + led.boundary_in_bregman
        + led.eps_entropy
        + led.upwind_dissipation;
    let rhs_rates = led.rhs_terms.iter().fold(T::zero(), |a, &b| a + b) + led.eps_coupling;
    led.residual = led.energy() - e_prev + dt * (lhs_rates - rhs_rates);
    led.residual_dual =
        led.residual + dt * (led.dissipation_primal + led.dissipation_dual - led.dissipation_pairing);
    Ok(led)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyVerdict {
    pub pass: bool,
    /// `-residual_dual`; nonnegative when the inequality holds exactly.
    pub margin: f64,
    pub threshold: f64,
}

/// Checks the primal plus dual form: `residual_dual <= tol (1 + E(0))`.
pub fn assert_energy_inequality<T: Real>(ledger: &EnergyLedger<T>, e0: T, tol: T) -> EnergyVerdict {
    let threshold = tol * (T::one() + e0.abs());
    EnergyVerdict {
        pass: ledger.residual_dual <= threshold,
        margin: -ledger.residual_dual.as_f64(),
        threshold: threshold.as_f64(),
    }
}
