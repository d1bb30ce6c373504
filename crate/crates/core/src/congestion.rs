//! Stiff isentropic pressure `(rho / rho*)^alpha`, its potential and the
//! congestion diagnostics.

use crate::domain::Mesh;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Densities below this are treated as vacuum by the power evaluation.
pub const VACUUM_CUTOFF: f64 = 1e-12;

/// Congestion threshold `rho*`, uniform or cellwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Threshold<T> {
    Uniform(T),
    Field(Vec<T>),
}

impl<T: Real> Threshold<T> {
    pub fn at(&self, k: usize) -> T {
        match self {
            Threshold::Uniform(v) => *v,
            Threshold::Field(f) => f[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionPressure<T> {
    pub alpha: T,
    pub rho_star: Threshold<T>,
}

/// `x^alpha` through `exp(alpha ln x)`, zero at vacuum.
pub fn stiff_power<T: Real>(x: T, alpha: T) -> T {
    if x < T::lit(VACUUM_CUTOFF) {
        T::zero()
    } else {
        (alpha * x.ln()).exp()
    }
}

impl<T: Real> CongestionPressure<T> {
    pub fn new(alpha: T) -> Self {
        Self { alpha, rho_star: Threshold::Uniform(T::one()) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::one()) || !self.alpha.is_finite() {
            return Err(Error::AlphaTooSmall(self.alpha.as_f64()));
        }
        let bad = match &self.rho_star {
            Threshold::Uniform(v) => !(*v > T::zero() && v.is_finite()),
            Threshold::Field(f) => f.iter().any(|v| !(*v > T::zero() && v.is_finite())),
        };
        if bad {
            return Err(Error::Config("congestion threshold must be positive and finite".into()));
        }
        Ok(())
    }

    /// Pressure in cell `k`.
    pub fn pressure(&self, rho: T, k: usize) -> T {
        stiff_power(rho / self.rho_star.at(k), self.alpha)
    }

    /// `Pi = rho int_0^rho pi(z)/z^2 dz = (rho/rho*)^alpha / (alpha - 1)`.
    pub fn potential(&self, rho: T, k: usize) -> T {
        self.pressure(rho, k) / (self.alpha - T::one())
    }

    pub fn potential_d1(&self, rho: T, k: usize) -> T {
        let rs = self.rho_star.at(k);
        self.alpha / (self.alpha - T::one()) * stiff_power(rho / rs, self.alpha - T::one()) / rs
    }

    pub fn potential_d2(&self, rho: T, k: usize) -> T {
        let rs = self.rho_star.at(k);
        self.alpha * stiff_power(rho / rs, self.alpha - T::two()) / (rs * rs)
    }
}

pub fn pressure_eval<T: Real>(cp: &CongestionPressure<T>, rho: &[T]) -> Vec<T> {
    rho.iter().enumerate().map(|(k, &r)| cp.pressure(r, k)).collect()
}

pub fn pressure_potential<T: Real>(cp: &CongestionPressure<T>, rho: &[T]) -> Result<Vec<T>> {
    if !(cp.alpha > T::one()) {
        return Err(Error::AlphaTooSmall(cp.alpha.as_f64()));
    }
    Ok(rho.iter().enumerate().map(|(k, &r)| cp.potential(r, k)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CongestionReport<T> {
    /// `|(rho - 1)_+|` in L1, L2 and L4.
    pub overshoot_norms: [T; 3],
    /// `int pi |1 - rho/rho*|`.
    pub complementarity: T,
    /// L2 norm of `div u` over `{rho > 1 - tau_c}`.
    pub congested_divergence: T,
    pub pressure_mass: T,
    pub tau_c: T,
}

pub const DEFAULT_TAU_C: f64 = 0.01;

/// Congestion indicators of one time slice. `divergence` holds the cell
/// averages of `div u`.
pub fn congestion_diagnostics<T: Real>(
    mesh: &Mesh<T>,
    rho: &[T],
    divergence: &[T],
    cp: &CongestionPressure<T>,
    tau_c: T,
) -> CongestionReport<T> {
    let vol = mesh.cell_volume();
    let mut sums = [T::zero(); 3];
    let (mut comp, mut div2, mut pmass) = (T::zero(), T::zero(), T::zero());
    for (k, (&r, &d)) in rho.iter().zip(divergence).enumerate() {
        let over = (r - T::one()).pos();
        let o2 = over * over;
        sums[0] += over * vol;
        sums[1] += o2 * vol;
        sums[2] += o2 * o2 * vol;
        let p = cp.pressure(r, k);
        comp += p * (T::one() - r / cp.rho_star.at(k)).abs() * vol;
        pmass += p * vol;
        if r > T::one() - tau_c {
            div2 += d * d * vol;
        }
    }
    CongestionReport {
        overshoot_norms: [sums[0], sums[1].sqrt(), sums[2].sqrt().sqrt()],
        complementarity: comp,
        congested_divergence: div2.sqrt(),
        pressure_mass: pmass,
        tau_c,
    }
}
