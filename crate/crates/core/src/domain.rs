//! Uniform box meshes, the inflow/outflow partition of the boundary, the
//! boundary velocity with its interior extension, and initial data.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Vec2<T> = [T; 2];
/// `g[i][j] = d u_i / d x_j`.
pub type Grad2<T> = [[T; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    In,
    Out,
}

#[derive(Debug, Clone, Copy)]
pub struct InteriorFace {
    /// Cell on the negative side along `axis`.
    pub left: usize,
    pub right: usize,
    pub axis: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace<T> {
    pub cell: usize,
    pub axis: usize,
    /// Sign of the outward normal along `axis`.
    pub sign: T,
    pub center: Vec2<T>,
    /// `u_B . n` at the face, exact for affine boundary fields.
    pub normal_velocity: T,
    pub side: Side,
}

/// Uniform grid on the unit interval or square.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    dim: usize,
    nx: usize,
    ny: usize,
    h: T,
    pub interior: Vec<InteriorFace>,
    pub boundary: Vec<BoundaryFace<T>>,
}

/// Affine boundary velocity `u_B(x) = offset + gradient x` with the inflow
/// density. In 1D only the first components are used.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundarySpec<T> {
    pub offset: Vec2<T>,
    pub gradient: Grad2<T>,
    pub rho_b: T,
}

impl<T: Real> BoundarySpec<T> {
    /// 1D trace from its two end values, extended linearly.
    pub fn from_ends(left: T, right: T, rho_b: T) -> Self {
        let z = T::zero();
        Self { offset: [left, z], gradient: [[right - left, z], [z, z]], rho_b }
    }

    pub fn uniform(velocity: Vec2<T>, rho_b: T) -> Self {
        let z = T::zero();
        Self { offset: velocity, gradient: [[z, z], [z, z]], rho_b }
    }

    pub fn at_rest(rho_b: T) -> Self {
        Self::uniform([T::zero(), T::zero()], rho_b)
    }

    pub fn value(&self, x: Vec2<T>) -> Vec2<T> {
        let g = &self.gradient;
        [
            self.offset[0] + g[0][0] * x[0] + g[0][1] * x[1],
            self.offset[1] + g[1][0] * x[0] + g[1][1] * x[1],
        ]
    }
}

impl<T: Real> Mesh<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self) -> T {
        self.h.powi(self.dim as i32)
    }

    pub fn face_area(&self) -> T {
        self.h.powi(self.dim as i32 - 1)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn cell_ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn cell_center(&self, k: usize) -> Vec2<T> {
        let (i, j) = self.cell_ij(k);
        let x = (T::from_usize_lossy(i) + T::half()) * self.h;
        let y = if self.dim == 2 { (T::from_usize_lossy(j) + T::half()) * self.h } else { T::zero() };
        [x, y]
    }

    /// Lower corner of cell `k`.
    pub fn cell_origin(&self, k: usize) -> Vec2<T> {
        let (i, j) = self.cell_ij(k);
        let y = if self.dim == 2 { T::from_usize_lossy(j) * self.h } else { T::zero() };
        [T::from_usize_lossy(i) * self.h, y]
    }

    /// Center of the face between `left` and `right` of an interior face.
    pub fn interior_face_center(&self, f: &InteriorFace) -> Vec2<T> {
        let mut c = self.cell_center(f.left);
        c[f.axis] += T::half() * self.h;
        c
    }

    pub fn inflow_faces(&self) -> impl Iterator<Item = &BoundaryFace<T>> {
        self.boundary.iter().filter(|f| f.side == Side::In)
    }

    pub fn outflow_faces(&self) -> impl Iterator<Item = &BoundaryFace<T>> {
        self.boundary.iter().filter(|f| f.side == Side::Out)
    }
}

/// Builds the grid and assigns every boundary face to the inflow part
/// (`u_B . n < 0`) or the outflow part (`u_B . n >= 0`).
pub fn build_mesh<T: Real>(dim: usize, resolution: usize, spec: &BoundarySpec<T>) -> Result<Mesh<T>> {
    if !(1..=2).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if resolution < 4 {
        return Err(Error::InvalidBoundarySpec(format!("resolution {resolution} below 4")));
    }
    let all_finite = spec.offset.iter().chain(spec.gradient.iter().flatten()).all(|v| v.is_finite());
    if !all_finite || !spec.rho_b.is_finite() {
        return Err(Error::InvalidBoundarySpec("non-finite boundary data".into()));
    }
    let nx = resolution;
    let ny = if dim == 2 { resolution } else { 1 };
    let h = T::one() / T::from_usize_lossy(resolution);
    let mut mesh = Mesh { dim, nx, ny, h, interior: vec![], boundary: vec![] };

    for j in 0..ny {
        for i in 0..nx {
            let k = mesh.cell_index(i, j);
            if i + 1 < nx {
                mesh.interior.push(InteriorFace { left: k, right: mesh.cell_index(i + 1, j), axis: 0 });
            }
            if dim == 2 && j + 1 < ny {
                mesh.interior.push(InteriorFace { left: k, right: mesh.cell_index(i, j + 1), axis: 1 });
            }
        }
    }

    let mut push = |cell: usize, axis: usize, sign: T, center: Vec2<T>| {
        let un = spec.value(center)[axis] * sign;
        let side = if un < T::zero() { Side::In } else { Side::Out };
        mesh.boundary.push(BoundaryFace { cell, axis, sign, center, normal_velocity: un, side });
    };
    let one = T::one();
    for j in 0..ny {
        let y = if dim == 2 { (T::from_usize_lossy(j) + T::half()) * h } else { T::zero() };
        push(i_j(nx, 0, j), 0, -one, [T::zero(), y]);
        push(i_j(nx, nx - 1, j), 0, one, [one, y]);
    }
    if dim == 2 {
        for i in 0..nx {
            let x = (T::from_usize_lossy(i) + T::half()) * h;
            push(i_j(nx, i, 0), 1, -one, [x, T::zero()]);
            push(i_j(nx, i, ny - 1), 1, one, [x, one]);
        }
    }
    Ok(mesh)
}

fn i_j(nx: usize, i: usize, j: usize) -> usize {
    i + nx * j
}

/// Boundary velocity with its interior extension and the inflow density.
///
/// For an affine trace the extension is the affine field itself, the
/// gradient of `c.x + x.Sym(G).x / 2` plus the rotation `Skew(G) x`.
/// Its divergence is the constant `tr G = flux / |Omega|`.
#[derive(Debug, Clone)]
pub struct BoundaryData<T> {
    pub spec: BoundarySpec<T>,
    pub flux: T,
    /// Discrete divergence of the extension in every cell.
    pub cell_divergence: Vec<T>,
}

impl<T: Real> BoundaryData<T> {
    pub fn value(&self, x: Vec2<T>) -> Vec2<T> {
        self.spec.value(x)
    }

    pub fn gradient(&self) -> Grad2<T> {
        self.spec.gradient
    }

    pub fn rho_b(&self) -> T {
        self.spec.rho_b
    }

    /// Sup of `|u_B|` over the closed domain (attained at a corner).
    pub fn sup_norm(&self, dim: usize) -> T {
        let corners: &[[f64; 2]] = if dim == 1 {
            &[[0.0, 0.0], [1.0, 0.0]]
        } else {
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
        };
        corners
            .iter()
            .map(|c| {
                let v = self.value([T::lit(c[0]), T::lit(c[1])]);
                (v[0] * v[0] + v[1] * v[1]).sqrt()
            })
            .fold(T::zero(), T::max)
    }

    pub fn divergence(&self, dim: usize) -> T {
        let g = self.spec.gradient;
        if dim == 1 {
            g[0][0]
        } else {
            g[0][0] + g[1][1]
        }
    }
}

/// Checks the flux sign and the inflow density, then builds the extension.
pub fn extend_boundary<T: Real>(mesh: &Mesh<T>, spec: &BoundarySpec<T>) -> Result<BoundaryData<T>> {
    let area = mesh.face_area();
    let flux = mesh.boundary.iter().fold(T::zero(), |acc, f| acc + f.normal_velocity * area);
    let scale = T::one() + spec.offset[0].abs() + spec.offset[1].abs();
    if flux < -T::lit(1e-13) * scale {
        return Err(Error::NegativeFlux(flux.as_f64()));
    }
    if mesh.inflow_faces().next().is_some() && !(spec.rho_b > T::zero() && spec.rho_b <= T::one()) {
        return Err(Error::InvalidBoundarySpec(format!(
            "inflow density {} outside (0, 1]",
            spec.rho_b
        )));
    }
    let mut cell_divergence = vec![T::zero(); mesh.n_cells()];
    let vol = mesh.cell_volume();
    for f in &mesh.interior {
        let un = spec.value(mesh.interior_face_center(f))[f.axis] * area;
        cell_divergence[f.left] += un / vol;
        cell_divergence[f.right] -= un / vol;
    }
    for f in &mesh.boundary {
        cell_divergence[f.cell] += f.normal_velocity * area / vol;
    }
    if let Some((k, d)) = cell_divergence
        .iter()
        .enumerate()
        .find(|(_, d)| **d < -T::lit(1e-12) * scale)
    {
        return Err(Error::InvalidBoundarySpec(format!("extension divergence {d} < 0 in cell {k}")));
    }
    Ok(BoundaryData { spec: *spec, flux, cell_divergence })
}

/// Cellwise initial density and momentum.
#[derive(Debug, Clone)]
pub struct InitialData<T> {
    pub rho0: Vec<T>,
    pub m0: Vec<Vec2<T>>,
}

#[derive(Debug, Clone)]
pub struct ValidatedInitial<T> {
    pub rho0: Vec<T>,
    pub m0: Vec<Vec2<T>>,
    pub u0: Vec<Vec2<T>>,
    pub mean: T,
}

pub fn validate_initial<T: Real>(data: InitialData<T>) -> Result<ValidatedInitial<T>> {
    let n = data.rho0.len();
    if n == 0 || data.m0.len() != n {
        return Err(Error::InvalidInitialData("density and momentum lengths differ".into()));
    }
    if let Some(k) = data.rho0.iter().position(|r| !(*r >= T::zero() && *r <= T::one())) {
        return Err(Error::InvalidInitialData(format!("density {} outside [0, 1] in cell {k}", data.rho0[k])));
    }
    let mean = data.rho0.iter().fold(T::zero(), |a, &r| a + r) / T::from_usize_lossy(n);
    if mean >= T::one() {
        return Err(Error::MassExceedsOne(mean.as_f64()));
    }
    if mean == T::zero() {
        return Err(Error::InvalidInitialData("density vanishes identically".into()));
    }
    let mut u0 = Vec::with_capacity(n);
    for (k, (&r, m)) in data.rho0.iter().zip(&data.m0).enumerate() {
        if r == T::zero() {
            if m[0] != T::zero() || m[1] != T::zero() {
                return Err(Error::MomentumOnVacuum(k));
            }
            u0.push([T::zero(); 2]);
        } else {
            u0.push([m[0] / r, m[1] / r]);
        }
    }
    Ok(ValidatedInitial { rho0: data.rho0, m0: data.m0, u0, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sides(mesh: &Mesh<f64>) -> Vec<(usize, f64, Side)> {
        mesh.boundary.iter().map(|f| (f.axis, f.sign, f.side)).collect()
    }

    #[test]
    fn one_d_partition() {
        let m = build_mesh(1, 64, &BoundarySpec::<f64>::from_ends(1.0, 1.0, 0.5)).unwrap();
        assert_eq!(sides(&m), vec![(0, -1.0, Side::In), (0, 1.0, Side::Out)]);
        let m = build_mesh(1, 64, &BoundarySpec::<f64>::from_ends(0.0, 0.0, 0.5)).unwrap();
        assert!(m.boundary.iter().all(|f| f.side == Side::Out));
        let vol: f64 = (0..m.n_cells()).map(|_| m.cell_volume()).sum();
        assert_eq!(vol, 1.0);
    }

    #[test]
    fn channel_partition() {
        let m = build_mesh(2, 8, &BoundarySpec::<f64>::uniform([1.0, 0.0], 0.5)).unwrap();
        for f in &m.boundary {
            let left_edge = f.axis == 0 && f.sign < 0.0;
            assert_eq!(f.side == Side::In, left_edge);
        }
        assert_eq!(m.boundary.len(), 32);
        assert_eq!(m.interior.len(), 2 * 8 * 7);
    }

    #[test]
    fn partition_is_refinement_invariant() {
        let spec: BoundarySpec<f64> = BoundarySpec { offset: [0.3, -0.2], gradient: [[0.5, 0.1], [0.0, 0.2]], rho_b: 0.7 };
        let coarse = build_mesh(2, 4, &spec).unwrap();
        let fine = build_mesh(2, 16, &spec).unwrap();
        // a fine face inherits the side of the coarse face containing it
        for f in &fine.boundary {
            let c = coarse
                .boundary
                .iter()
                .filter(|g| g.axis == f.axis && g.sign == f.sign)
                .min_by(|a, b| {
                    let da = (a.center[0] - f.center[0]).abs() + (a.center[1] - f.center[1]).abs();
                    let db = (b.center[0] - f.center[0]).abs() + (b.center[1] - f.center[1]).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            if (f.normal_velocity < 0.0) == (c.normal_velocity < 0.0) {
                assert_eq!(f.side, c.side);
            }
        }
    }

    #[test]
    fn extension_examples() {
        let spec = BoundarySpec::<f64>::from_ends(1.0, 1.0, 0.5);
        let m = build_mesh(1, 32, &spec).unwrap();
        let bd = extend_boundary(&m, &spec).unwrap();
        assert_eq!(bd.value([0.37, 0.0])[0], 1.0);
        assert!(bd.cell_divergence.iter().all(|d| d.abs() < 1e-12));

        let spec = BoundarySpec::<f64>::from_ends(1.0, 2.0, 0.5);
        let m = build_mesh(1, 32, &spec).unwrap();
        let bd = extend_boundary(&m, &spec).unwrap();
        assert!((bd.value([0.25, 0.0])[0] - 1.25).abs() < 1e-15);
        assert!(bd.cell_divergence.iter().all(|d| (d - 1.0).abs() < 1e-12));
        assert_eq!(bd.divergence(1), 1.0);

        let spec = BoundarySpec::<f64>::from_ends(2.0, 1.0, 0.5);
        let m = build_mesh(1, 32, &spec).unwrap();
        assert!(matches!(extend_boundary(&m, &spec), Err(Error::NegativeFlux(f)) if (f + 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_d_extension_has_nonnegative_divergence() {
        let spec: BoundarySpec<f64> = BoundarySpec { offset: [0.3, -0.2], gradient: [[0.5, 0.4], [-0.4, -0.3]], rho_b: 0.7 };
        let m = build_mesh(2, 16, &spec).unwrap();
        let bd = extend_boundary(&m, &spec).unwrap();
        assert!((bd.flux - 0.2).abs() < 1e-12);
        assert!(bd.cell_divergence.iter().all(|d| (d - 0.2).abs() < 1e-12));
    }

    #[test]
    fn inflow_density_must_be_admissible() {
        let spec = BoundarySpec::<f64>::from_ends(1.0, 1.0, 1.5);
        let m = build_mesh(1, 8, &spec).unwrap();
        assert!(matches!(extend_boundary(&m, &spec), Err(Error::InvalidBoundarySpec(_))));
        // without inflow the value is never used
        let spec = BoundarySpec::<f64>::from_ends(0.0, 0.0, 1.5);
        let m = build_mesh(1, 8, &spec).unwrap();
        assert!(extend_boundary(&m, &spec).is_ok());
    }

    #[test]
    fn initial_examples() {
        let n = 16;
        let ok = validate_initial(InitialData::<f64> { rho0: vec![0.5; n], m0: vec![[0.0; 2]; n] }).unwrap();
        assert_eq!(ok.mean, 0.5);
        assert!(ok.u0.iter().all(|u| u[0] == 0.0));

        let full = validate_initial(InitialData::<f64> { rho0: vec![1.0; n], m0: vec![[0.0; 2]; n] });
        assert!(matches!(full, Err(Error::MassExceedsOne(_))));

        let rho0: Vec<f64> = (0..n).map(|k| if k < n / 2 { 0.0 } else { 0.8 }).collect();
        let vac = validate_initial(InitialData::<f64> { rho0, m0: vec![[0.1, 0.0]; n] });
        assert!(matches!(vac, Err(Error::MomentumOnVacuum(0))));
    }

    #[test]
    fn mesh_rejects_coarse_grids() {
        assert!(build_mesh(1, 3, &BoundarySpec::<f64>::at_rest(0.5)).is_err());
        assert!(matches!(build_mesh(3, 8, &BoundarySpec::<f64>::at_rest(0.5)), Err(Error::UnsupportedDimension(3))));
    }
}
