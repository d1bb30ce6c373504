//! Convex viscosity potential, its mollification and its convex conjugate.
//!
//! The potential splits across the orthogonal deviatoric/trace
//! decomposition, `F(D) = phi(|D0|) + psi(tr D)`, so every operation
//! reduces to scalar profiles. Mollification and conjugation are done on
//! those profiles, never on the full tensor space.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::Real;
use crate::tensors::SymTensor;

/// Coefficients of
/// `F(D) = mu0/q (mu1 + |D0|^2)^(q/2) + eta0 (eta1 + |tr D|^2)^(q/2)`,
/// shifted so that `F(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PotentialSpec<T> {
    pub mu0: T,
    pub mu1: T,
    pub eta0: T,
    pub eta1: T,
    pub q: T,
}

impl<T: Real> PotentialSpec<T> {
    /// `F = |D0|^2 / 2 + eta0 |tr D|^2`.
    pub fn quadratic(eta0: T) -> Self {
        Self { mu0: T::one(), mu1: T::zero(), eta0, eta1: T::zero(), q: T::two() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPotential(m.to_string()));
        if !(self.q > T::one()) {
            return bad("q must exceed 1");
        }
        if !(self.mu0 > T::zero()) {
            return bad("mu0 must be positive");
        }
        if self.mu1 < T::zero() || self.eta0 < T::zero() || self.eta1 < T::zero() {
            return bad("mu1, eta0, eta1 must be nonnegative");
        }
        if dim == 1 && !(self.eta0 > T::zero()) {
            return bad("one-dimensional runs need eta0 > 0 (the deviatoric part vanishes)");
        }
        Ok(())
    }

    /// Constant of the growth floor `F(D) >= mu |D0|^q` for `|D| > 1`,
    /// taken as `mu0 / (q 2^(q/2))`.
    pub fn growth_mu(&self) -> T {
        self.mu0 / (self.q * T::two().powf(self.q * T::half()))
    }
}

/// `a ((b + t^2)^(q/2) - b^(q/2))`, extended evenly to negative `t`.
#[derive(Debug, Clone, Copy)]
pub struct PowerProfile<T> {
    pub coef: T,
    pub shift: T,
    pub q: T,
}

impl<T: Real> PowerProfile<T> {
    fn value(&self, t: T) -> T {
        let e = self.q * T::half();
        self.coef * ((self.shift + t * t).powf(e) - self.shift.powf(e))
    }

    /// Odd derivative.
    fn d1(&self, t: T) -> T {
        if t == T::zero() {
            return T::zero();
        }
        let base = self.shift + t * t;
        self.coef * self.q * t * base.powf(self.q * T::half() - T::one())
    }

    fn d2(&self, t: T) -> T {
        let base = self.shift + t * t;
        if base == T::zero() {
            return if self.q > T::two() {
                T::zero()
            } else if self.q == T::two() {
                self.coef * T::two()
            } else {
                T::infinity()
            };
        }
        let e = self.q * T::half();
        self.coef
            * self.q
            * (base.powf(e - T::one()) + (self.q - T::two()) * t * t * base.powf(e - T::two()))
    }
}

/// Normalized bump `exp(-1 / (1 - (z/delta)^2))` on `(-delta, delta)`.
#[derive(Debug, Clone, Copy)]
struct Bump<T> {
    delta: T,
    norm: T,
}

impl<T: Real> Bump<T> {
    fn new(delta: T) -> Self {
        let raw = Self { delta, norm: T::one() };
        let (x, w) = gauss_legendre(96);
        let total = x.iter().zip(&w).fold(T::zero(), |acc, (&xi, &wi)| {
            acc + T::lit(wi) * delta * raw.eval(delta * T::lit(xi))
        });
        Self { delta, norm: T::one() / total }
    }

    fn eval(&self, z: T) -> T {
        let r = z / self.delta;
        let s = T::one() - r * r;
        if s <= T::zero() {
            T::zero()
        } else {
            self.norm * (-T::one() / s).exp()
        }
    }
}

/// Mollified profile: derivative tabulated on `[0, end]` and interpolated
/// linearly, values integrated exactly from it, shifted power law beyond.
#[derive(Debug, Clone)]
pub struct MollifiedTable<T> {
    base: PowerProfile<T>,
    step: T,
    end: T,
    slope: Vec<T>,
    value: Vec<T>,
    tail_shift: T,
}

const TABLE_NODES: usize = 3000;
const TABLE_EXTENT: f64 = 6.0;

impl<T: Real> MollifiedTable<T> {
    fn build(base: PowerProfile<T>, delta: T) -> Self {
        let bump = Bump::new(delta);
        let end = T::lit(TABLE_EXTENT) * delta;
        let step = end / T::from_usize_lossy(TABLE_NODES);
        let (gx, gw) = gauss_legendre(48);
        // integral of f over [a, b] with nodes clustered at `a`
        let clustered = |a: T, b: T, f: &dyn Fn(T) -> T| -> T {
            let mut acc = T::zero();
            for (&x, &w) in gx.iter().zip(&gw) {
                let u = T::half() * (T::lit(x) + T::one());
                let wu = T::half() * T::lit(w);
                let z = a + (b - a) * u * u;
                acc += wu * T::two() * u * (b - a) * f(z);
            }
            acc
        };
        let conv = |t: T| -> T {
            let f = |z: T| base.d1(t - z) * bump.eval(z);
            // split at z = t where the derivative has its kink, if inside the support
            let split = if t < delta { t } else { T::zero() };
            clustered(split, delta, &f) - clustered(split, -delta, &f)
        };
        let mut slope = Vec::with_capacity(TABLE_NODES + 1);
        for k in 0..=TABLE_NODES {
            let t = step * T::from_usize_lossy(k);
            slope.push(if k == 0 { T::zero() } else { conv(t) });
        }
        // monotone repair against quadrature noise near the origin
        for k in 1..slope.len() {
            if slope[k] < slope[k - 1] {
                slope[k] = slope[k - 1];
            }
        }
        let mut value = Vec::with_capacity(slope.len());
        value.push(T::zero());
        for k in 1..slope.len() {
            let v = value[k - 1] + step * T::half() * (slope[k - 1] + slope[k]);
            value.push(v);
        }
        let tail_shift = slope[TABLE_NODES] - base.d1(end);
        Self { base, step, end, slope, value, tail_shift }
    }

    fn locate(&self, t: T) -> (usize, T) {
        let k = (t / self.step).floor().to_usize().unwrap_or(0).min(TABLE_NODES - 1);
        (k, t - self.step * T::from_usize_lossy(k))
    }

    fn value(&self, t: T) -> T {
        let t = t.abs();
        if t >= self.end {
            return self.value[TABLE_NODES] + self.base.value(t) - self.base.value(self.end)
                + self.tail_shift * (t - self.end);
        }
        let (k, s) = self.locate(t);
        let curv = (self.slope[k + 1] - self.slope[k]) / self.step;
        self.value[k] + self.slope[k] * s + T::half() * curv * s * s
    }

    fn d1(&self, t: T) -> T {
        let a = t.abs();
        let g = if a >= self.end {
            self.base.d1(a) + self.tail_shift
        } else {
            let (k, s) = self.locate(a);
            self.slope[k] + (self.slope[k + 1] - self.slope[k]) * s / self.step
        };
        if t < T::zero() {
            -g
        } else {
            g
        }
    }

    fn d2(&self, t: T) -> T {
        let a = t.abs();
        if a >= self.end {
            self.base.d2(a)
        } else {
            let (k, _) = self.locate(a);
            (self.slope[k + 1] - self.slope[k]) / self.step
        }
    }
}

/// Even convex scalar profile with value zero at the origin.
#[derive(Debug, Clone)]
pub enum ScalarProfile<T> {
    Zero,
    Power(PowerProfile<T>),
    Mollified(Box<MollifiedTable<T>>),
}

impl<T: Real> ScalarProfile<T> {
    fn new(coef: T, shift: T, q: T, delta: T) -> Self {
        if coef == T::zero() {
            return Self::Zero;
        }
        let base = PowerProfile { coef, shift, q };
        if delta > T::zero() {
            Self::Mollified(Box::new(MollifiedTable::build(base, delta)))
        } else {
            Self::Power(base)
        }
    }

    pub fn value(&self, t: T) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Power(p) => p.value(t.abs()),
            Self::Mollified(m) => m.value(t),
        }
    }

    /// Derivative, odd in `t`.
    pub fn d1(&self, t: T) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Power(p) => p.d1(t),
            Self::Mollified(m) => m.d1(t),
        }
    }

    /// Second derivative; may be infinite at the origin when `q < 2`.
    pub fn d2(&self, t: T) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Power(p) => p.d2(t.abs()),
            Self::Mollified(m) => m.d2(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// `t >= 0` with `d1(t) = s`, for `s >= 0`.
    fn invert_slope(&self, s: T) -> Result<T> {
        if s <= T::zero() {
            return Ok(T::zero());
        }
        let mut hi = T::one();
        while self.d1(hi) < s {
            hi = hi * T::two();
            if hi > T::lit(1e150) {
                return Err(Error::ConjugateOverflow(s.as_f64()));
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = T::half() * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.d1(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(T::half() * (lo + hi))
    }
}

/// Conjugate of a scalar profile, tabulated on a log-spaced grid and
/// interpolated by cubic Hermite with exact slopes; power-law tails.
#[derive(Debug, Clone)]
pub struct ConjugateTable<T> {
    indicator: bool,
    log_min: T,
    log_step: T,
    s: Vec<T>,
    vals: Vec<T>,
    slopes: Vec<T>,
    p_lo: T,
    p_hi: T,
}

const CONJ_LOG_MIN: f64 = -6.0;
const CONJ_LOG_MAX: f64 = 6.0;
const CONJ_PER_DECADE: usize = 200;
/// Arguments beyond this are far outside any physical stress regime.
pub const CONJ_ARG_LIMIT: f64 = 1e12;

impl<T: Real> ConjugateTable<T> {
    fn build(profile: &ScalarProfile<T>) -> Result<Self> {
        let count = ((CONJ_LOG_MAX - CONJ_LOG_MIN) as usize) * CONJ_PER_DECADE + 1;
        let log_step = T::lit((CONJ_LOG_MAX - CONJ_LOG_MIN) / (count - 1) as f64);
        let log_min = T::lit(CONJ_LOG_MIN);
        if profile.is_zero() {
            return Ok(Self {
                indicator: true,
                log_min,
                log_step,
                s: vec![],
                vals: vec![],
                slopes: vec![],
                p_lo: T::zero(),
                p_hi: T::zero(),
            });
        }
        let ten = T::lit(10.0);
        let mut s = Vec::with_capacity(count);
        let mut vals = Vec::with_capacity(count);
        let mut slopes = Vec::with_capacity(count);
        for k in 0..count {
            let sk = ten.powf(log_min + log_step * T::from_usize_lossy(k));
            let t = profile.invert_slope(sk)?;
            s.push(sk);
            vals.push(sk * t - profile.value(t));
            slopes.push(t);
        }
        let exponent = |k: usize| {
            if vals[k] > T::zero() {
                s[k] * slopes[k] / vals[k]
            } else {
                T::two()
            }
        };
        let (p_lo, p_hi) = (exponent(0), exponent(count - 1));
        Ok(Self { indicator: false, log_min, log_step, s, vals, slopes, p_lo, p_hi })
    }

    /// `sup_t (s t - phi(t))`, even in `s`.
    pub fn eval(&self, s: T) -> Result<T> {
        let s = s.abs();
        if self.indicator {
            return Ok(if s <= T::lit(1e-12) { T::zero() } else { T::infinity() });
        }
        if s == T::zero() {
            return Ok(T::zero());
        }
        if s > T::lit(CONJ_ARG_LIMIT) || !s.is_finite() {
            return Err(Error::ConjugateOverflow(s.as_f64()));
        }
        let n = self.s.len();
        if s <= self.s[0] {
            return Ok(self.vals[0] * (s / self.s[0]).powf(self.p_lo));
        }
        if s >= self.s[n - 1] {
            return Ok(self.vals[n - 1] * (s / self.s[n - 1]).powf(self.p_hi));
        }
        let pos = (s.log10() - self.log_min) / self.log_step;
        let mut k = pos.floor().to_usize().unwrap_or(0).min(n - 2);
        while k > 0 && self.s[k] > s {
            k -= 1;
        }
        while k + 2 < n && self.s[k + 1] < s {
            k += 1;
        }
        let h = self.s[k + 1] - self.s[k];
        let x = (s - self.s[k]) / h;
        let (x2, x3) = (x * x, x * x * x);
        let three = T::lit(3.0);
        let h00 = T::two() * x3 - three * x2 + T::one();
        let h10 = x3 - T::two() * x2 + x;
        let h01 = -T::two() * x3 + three * x2;
        let h11 = x3 - x2;
        Ok(h00 * self.vals[k]
            + h10 * h * self.slopes[k]
            + h01 * self.vals[k + 1]
            + h11 * h * self.slopes[k + 1])
    }
}

/// Value of `F(D) + F*(S) - S:D` together with its parts.
#[derive(Debug, Clone, Copy)]
pub struct DualPair<T> {
    pub f_value: T,
    pub fstar_value: T,
    pub stress: SymTensor<T>,
    pub gap: T,
}

/// The potential `F_delta` with its profiles and conjugate tables.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct MollifiedPotential<T> {
    spec: PotentialSpec<T>,
    delta: T,
    dev: ScalarProfile<T>,
    tr: ScalarProfile<T>,
    dev_conj: ConjugateTable<T>,
    tr_conj: ConjugateTable<T>,
}

/// Radius below which the deviatoric direction is treated as undefined.
const RADIUS_FLOOR: f64 = 1e-14;
/// Curvature used in place of an infinite one by the Newton tangent.
const CURVATURE_PROBE: f64 = 1e-8;

impl<T: Real> MollifiedPotential<T> {
    pub fn new(spec: PotentialSpec<T>, delta: T) -> Result<Self> {
        if spec.q <= T::one() || spec.mu0 <= T::zero() {
            return Err(Error::InvalidPotential("need q > 1 and mu0 > 0".into()));
        }
        if delta < T::zero() || !delta.is_finite() {
            return Err(Error::InvalidPotential("delta must be a finite nonnegative number".into()));
        }
        let dev = ScalarProfile::new(spec.mu0 / spec.q, spec.mu1, spec.q, delta);
        let tr = ScalarProfile::new(spec.eta0, spec.eta1, spec.q, delta);
        let dev_conj = ConjugateTable::build(&dev)?;
        let tr_conj = ConjugateTable::build(&tr)?;
        Ok(Self { spec, delta, dev, tr, dev_conj, tr_conj })
    }

    pub fn spec(&self) -> &PotentialSpec<T> {
        &self.spec
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn dev_profile(&self) -> &ScalarProfile<T> {
        &self.dev
    }

    pub fn trace_profile(&self) -> &ScalarProfile<T> {
        &self.tr
    }

    pub fn dev_conjugate(&self) -> &ConjugateTable<T> {
        &self.dev_conj
    }

    pub fn trace_conjugate(&self) -> &ConjugateTable<T> {
        &self.tr_conj
    }

    pub fn eval_f(&self, d: &SymTensor<T>) -> T {
        let (dev, tr) = d.deviatoric_split();
        self.dev.value(dev.norm()) + self.tr.value(tr)
    }

    /// Minimal-norm element of the subdifferential. The deviatoric part is
    /// zero when `D0 = 0`.
    pub fn subgradient(&self, d: &SymTensor<T>) -> Result<SymTensor<T>> {
        let dim = d.dim();
        let (dev, tr) = d.deviatoric_split();
        let r = dev.norm();
        let mut s = SymTensor::scalar(dim, self.tr.d1(tr));
        if r > T::lit(RADIUS_FLOOR) {
            let g = self.dev.d1(r);
            if !g.is_finite() {
                return Err(Error::NonSmoothPoint(r.as_f64()));
            }
            s = s.add(&dev.scale(g / r));
        }
        if !s.get(0, 0).is_finite() {
            return Err(Error::NonSmoothPoint(tr.as_f64()));
        }
        Ok(s)
    }

    /// Directional derivative of the subgradient map at `d` along `dd`.
    /// Infinite curvatures at the origin are replaced by a secant slope.
    pub fn tangent(&self, d: &SymTensor<T>, dd: &SymTensor<T>) -> SymTensor<T> {
        let dim = d.dim();
        let (dev, tr) = d.deviatoric_split();
        let (ddev, dtr) = dd.deviatoric_split();
        let probe = T::lit(CURVATURE_PROBE);
        let finite_curv = |p: &ScalarProfile<T>, t: T| {
            let c = p.d2(t);
            if c.is_finite() {
                c
            } else {
                p.d1(probe) / probe
            }
        };
        let mut out = SymTensor::scalar(dim, finite_curv(&self.tr, tr) * dtr);
        let r = dev.norm();
        if r > probe {
            let n = dev.scale(T::one() / r);
            let along = n.dot(&ddev);
            let normal = n.scale(finite_curv(&self.dev, r) * along);
            let secant = ddev.sub(&n.scale(along)).scale(self.dev.d1(r) / r);
            out = out.add(&normal).add(&secant);
        } else {
            out = out.add(&ddev.scale(finite_curv(&self.dev, r)));
        }
        out
    }

    /// `F*(S) = phi*(|S0|) + psi*(tr S / d)`.
    pub fn conjugate(&self, s: &SymTensor<T>) -> Result<T> {
        let (dev, tr) = s.deviatoric_split();
        let d = T::from_usize_lossy(s.dim());
        Ok(self.dev_conj.eval(dev.norm())? + self.tr_conj.eval(tr / d)?)
    }

    pub fn fenchel_gap(&self, d: &SymTensor<T>, s: &SymTensor<T>) -> Result<DualPair<T>> {
        let f_value = self.eval_f(d);
        let fstar_value = self.conjugate(s)?;
        let gap = f_value + fstar_value - s.dot(d);
        Ok(DualPair { f_value, fstar_value, stress: *s, gap })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pot(spec: PotentialSpec<f64>, delta: f64) -> MollifiedPotential<f64> {
        MollifiedPotential::new(spec, delta).unwrap()
    }

    fn quad() -> MollifiedPotential<f64> {
        pot(PotentialSpec::quadratic(0.0), 0.0)
    }

    fn trace_power() -> MollifiedPotential<f64> {
        let spec = PotentialSpec { mu0: 1.0, mu1: 0.0, eta0: 1.0, eta1: 0.0, q: 1.5 };
        pot(spec, 0.0)
    }

    #[test]
    fn eval_examples() {
        let d = SymTensor::diag(&[1.0, -1.0]);
        assert!((quad().eval_f(&d) - 1.0).abs() < 1e-15);
        assert_eq!(quad().eval_f(&SymTensor::zeros(2)), 0.0);
        assert!((trace_power().eval_f(&SymTensor::diag(&[4.0])) - 8.0).abs() < 1e-12);
        let shifted = PotentialSpec { mu0: 2.0, mu1: 0.3, eta0: 0.5, eta1: 0.2, q: 1.5 };
        assert_eq!(pot(shifted, 0.0).eval_f(&SymTensor::zeros(3)), 0.0);
        assert!(pot(shifted, 0.05).eval_f(&SymTensor::zeros(3)).abs() < 1e-15);
    }

    #[test]
    fn subgradient_examples() {
        let d = SymTensor::diag(&[1.0, -1.0]);
        let s = quad().subgradient(&d).unwrap();
        assert!(s.sub(&d).norm() < 1e-14);
        assert_eq!(quad().subgradient(&SymTensor::zeros(2)).unwrap().norm(), 0.0);

        let p = trace_power();
        let d = SymTensor::diag(&[4.0]);
        let s = p.subgradient(&d).unwrap();
        assert!((s.get(0, 0) - 3.0).abs() < 1e-12);
        let h = 1e-6;
        let fd = (p.eval_f(&SymTensor::diag(&[4.0 + h])) - p.eval_f(&SymTensor::diag(&[4.0 - h])))
            / (2.0 * h);
        assert!((fd - 3.0).abs() < 1e-5);
    }

    #[test]
    fn conjugate_examples() {
        let q = quad();
        assert!((q.conjugate(&SymTensor::diag(&[1.0, -1.0])).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(q.conjugate(&SymTensor::zeros(2)).unwrap(), 0.0);
        // deviatoric profile (1/q) t^q with q = 3/2 has conjugate s^3 / 3
        let spec = PotentialSpec { mu0: 1.0, mu1: 0.0, eta0: 0.0, eta1: 0.0, q: 1.5 };
        let p = pot(spec, 0.0);
        assert!((p.dev_conjugate().eval(3.0).unwrap() - 9.0).abs() < 1e-6);
    }

    #[test]
    fn conjugate_of_missing_trace_term_is_an_indicator() {
        let q = quad();
        assert_eq!(q.conjugate(&SymTensor::identity(2)).unwrap(), f64::INFINITY);
        assert!(matches!(
            trace_power().conjugate(&SymTensor::diag(&[1e13])),
            Err(Error::ConjugateOverflow(_))
        ));
    }

    #[test]
    fn gap_examples() {
        let q = quad();
        let d = SymTensor::diag(&[1.0, -1.0]);
        let s = q.subgradient(&d).unwrap();
        assert!(q.fenchel_gap(&d, &s).unwrap().gap.abs() < 1e-9);
        let pair = q.fenchel_gap(&d, &SymTensor::zeros(2)).unwrap();
        assert!((pair.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut spec = PotentialSpec::quadratic(0.0);
        assert!(spec.validate(2).is_ok());
        assert!(spec.validate(1).is_err());
        spec.q = 1.0;
        assert!(spec.validate(2).is_err());
        assert!(MollifiedPotential::new(PotentialSpec::quadratic(1.0), -1.0).is_err());
    }

    #[test]
    fn mollified_profile_is_convex_and_c1() {
        let spec = PotentialSpec { mu0: 1.0, mu1: 0.0, eta0: 1.0, eta1: 0.0, q: 1.5 };
        let p = pot(spec, 0.1);
        let prof = p.dev_profile();
        let mut prev = -1.0;
        for k in 0..2000 {
            let t = k as f64 * 1e-3;
            let g = prof.d1(t);
            assert!(g >= prev - 1e-14, "slope decreased at {t}");
            prev = g;
        }
        // continuity of the slope across the end of the table
        let end = 0.6;
        assert!((prof.d1(end - 1e-9) - prof.d1(end + 1e-9)).abs() < 1e-6);
        // close to the raw profile away from the origin
        let raw = PowerProfile { coef: 1.0 / 1.5, shift: 0.0, q: 1.5 };
        assert!((prof.d1(2.0) - raw.d1(2.0)).abs() < 1e-2);
    }

    #[test]
    fn mollified_matches_direct_convolution_at_one_point() {
        // brute-force midpoint convolution of the even profile, minus its value at 0
        let delta = 0.2;
        let raw = PowerProfile { coef: 1.0, shift: 0.0, q: 1.5 };
        let bump = |z: f64| {
            let r = z / delta;
            if r.abs() < 1.0 { (-1.0 / (1.0 - r * r)).exp() } else { 0.0 }
        };
        let n = 200_000;
        let h = 2.0 * delta / n as f64;
        let (mut norm, mut at_t, mut at_0) = (0.0, 0.0, 0.0);
        let t = 0.15;
        for k in 0..n {
            let z = -delta + (k as f64 + 0.5) * h;
            norm += bump(z) * h;
            at_t += raw.value((t - z).abs()) * bump(z) * h;
            at_0 += raw.value(z.abs()) * bump(z) * h;
        }
        let oracle = (at_t - at_0) / norm;
        let spec = PotentialSpec { mu0: 1.0, mu1: 0.0, eta0: 1.0, eta1: 0.0, q: 1.5 };
        let p = pot(spec, delta);
        let got = p.eval_f(&SymTensor::diag(&[t]));
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }
}
