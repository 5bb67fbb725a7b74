//! Full-order temperature model.
//!
//! Steady advection-diffusion along the extrusion axis with axial conduction
//! dropped (the Péclet number is of order 10³), so the 3D problem becomes a
//! march of 2D cross-section solves:
//!
//! ```text
//! ρ·c_p·u·(T_new − T_old)/dz = k·Δ₂T_new            on interior cells
//! −k·∂T/∂n = htc·(T − T_amb)                         on every boundary face
//! T = T_in                                           at z = 0
//! ```
//!
//! Integrated over a cell of area dx² (per unit axial length), each interior
//! neighbour couples with conductance `k` and each boundary face removes
//! `htc·dx·(T_cell − T_amb)`. The resulting operator is a symmetric M-matrix.

mod cg;
mod store;

pub use cg::{conjugate_gradient, CgOutcome};
pub use store::{generate_store, SnapshotStore, StoreMeta, STORE_FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::geometry::{rasterize, ProfileGeometry, VoxelGrid};
use crate::hash::Fingerprint;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Density (kg/m³).
    pub rho: f64,
    /// Specific heat (J/(kg·K)).
    pub cp: f64,
    /// Thermal conductivity (W/(m·K)).
    pub k: f64,
    /// Axial advection velocity (m/s).
    pub u: f64,
}

impl Default for MaterialParams {
    /// Polyolefin-like melt at the reference line speed.
    fn default() -> Self {
        MaterialParams {
            rho: 900.0,
            cp: 2000.0,
            k: 0.2,
            u: 0.00011,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.rho, self.cp, self.k, self.u]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "material parameters rho, cp, k, u must be positive".into(),
            ))
        }
    }

    /// Volumetric heat capacity ρ·c_p.
    pub fn heat_capacity(&self) -> f64 {
        self.rho * self.cp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    /// Ambient temperature (K).
    pub t_ambient: f64,
    /// Heat-transfer coefficient magnitude (W/(m²·K)); cooling for T > T_amb.
    pub htc: f64,
    /// Inlet temperature (K).
    pub t_inlet: f64,
}

impl ProcessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_ambient.is_finite() && self.htc.is_finite() && self.t_inlet.is_finite()) {
            return Err(Error::Config("process parameters must be finite".into()));
        }
        if self.htc < 0.0 {
            return Err(Error::Config(format!(
                "heat-transfer coefficient is a magnitude and must be >= 0, got {}",
                self.htc
            )));
        }
        Ok(())
    }

    /// Non-fatal oddities worth reporting to a user.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.t_inlet < self.t_ambient {
            w.push(format!(
                "inlet temperature {} K is below ambient {} K: the profile heats up",
                self.t_inlet, self.t_ambient
            ));
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Cross-section grid spacing (m).
    pub dx: f64,
    /// Axial stations including the inlet.
    pub nz: usize,
    /// Every `z_stride`-th station is stored in a snapshot.
    pub z_stride: usize,
    /// Relative residual tolerance of the station solves.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            dx: 0.25e-3,
            nz: 101,
            z_stride: 5,
            cg_tol: 1e-10,
            cg_max_iter: 5000,
        }
    }
}

impl Discretization {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Config("dx must be positive".into()));
        }
        if self.nz < 2 || self.z_stride < 1 {
            return Err(Error::Config("need nz >= 2 and z_stride >= 1".into()));
        }
        if !(self.nz - 1).is_multiple_of(self.z_stride) {
            return Err(Error::Config(format!(
                "nz - 1 = {} is not divisible by z_stride = {}",
                self.nz - 1,
                self.z_stride
            )));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol <= 1e-4) {
            return Err(Error::Config(format!(
                "cg_tol must lie in (0, 1e-4], got {}",
                self.cg_tol
            )));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::Config("cg_max_iter must be >= 1".into()));
        }
        Ok(())
    }

    pub fn stored_stations(&self) -> usize {
        (self.nz - 1) / self.z_stride + 1
    }

    pub fn fingerprint(&self) -> String {
        let mut f = Fingerprint::new("calibrom/discretization/v1");
        f.f64(self.dx)
            .u64(self.nz as u64)
            .u64(self.z_stride as u64)
            .f64(self.cg_tol)
            .u64(self.cg_max_iter as u64);
        f.finish()
    }
}

/// Dimensionless groups describing the cooling regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// htc·r1/k
    pub biot: f64,
    /// k·l/(ρ·c_p·u·r1²), the Fourier number at the outlet.
    pub fourier_outlet: f64,
    /// u·l·ρ·c_p/k
    pub peclet: f64,
}

pub fn biot_fourier_report(
    material: &MaterialParams,
    process: &ProcessParams,
    geometry: &ProfileGeometry,
) -> RegimeReport {
    let rc = material.heat_capacity();
    RegimeReport {
        biot: process.htc * geometry.r1 / material.k,
        fourier_outlet: material.k * geometry.l / (rc * material.u * geometry.r1 * geometry.r1),
        peclet: material.u * geometry.l * rc / material.k,
    }
}

/// Implicit station operator `A = C·I + k·L + R` in compressed-row form, where
/// `C = ρ·c_p·u·dx²/dz`, `L` the graph Laplacian over interior neighbours and
/// `R` the diagonal Robin term `htc·dx·(boundary faces)`.
#[derive(Debug, Clone)]
pub struct StationSystem {
    capacity: f64,
    conductance: f64,
    diag: Vec<f64>,
    robin_source: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl StationSystem {
    pub fn assemble(
        grid: &VoxelGrid,
        material: &MaterialParams,
        process: &ProcessParams,
        dz: f64,
    ) -> Result<Self> {
        if !(dz > 0.0 && dz.is_finite()) {
            return Err(Error::Config(format!("dz must be positive, got {dz}")));
        }
        material.validate()?;
        process.validate()?;
        let dx = grid.dx;
        let capacity = material.heat_capacity() * material.u * dx * dx / dz;
        let n = grid.n_interior();
        let mut diag = Vec::with_capacity(n);
        let mut robin_source = Vec::with_capacity(n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(4 * n);
        row_ptr.push(0);
        for c in 0..n {
            let before = cols.len();
            cols.extend(grid.neighbors(c));
            let links = (cols.len() - before) as f64;
            let robin = process.htc * dx * grid.face_count(c) as f64;
            diag.push(capacity + material.k * links + robin);
            robin_source.push(robin * process.t_ambient);
            row_ptr.push(cols.len());
        }
        Ok(StationSystem {
            capacity,
            conductance: material.k,
            diag,
            robin_source,
            row_ptr,
            cols,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// The axial capacity coefficient `ρ·c_p·u·dx²/dz`.
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `y = A·x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut off = 0.0;
            for &c in &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]] {
                off += x[c];
            }
            *yr = self.diag[r] * x[r] - self.conductance * off;
        }
    }

    /// Right-hand side for a step from `t_old`.
    pub fn rhs(&self, t_old: &[f64]) -> Vec<f64> {
        t_old
            .iter()
            .zip(&self.robin_source)
            .map(|(t, s)| self.capacity * t + s)
            .collect()
    }
}

/// One implicit step, warm-started from `t_old`.
pub fn solve_station(
    system: &StationSystem,
    t_old: &[f64],
    cg_tol: f64,
    cg_max_iter: usize,
) -> Result<Vec<f64>> {
    if t_old.len() != system.dim() {
        return Err(Error::dim("solve_station", system.dim(), t_old.len()));
    }
    let b = system.rhs(t_old);
    let mut x = t_old.to_vec();
    conjugate_gradient(|v, out| system.apply(v, out), &b, &mut x, cg_tol, cg_max_iter)?;
    Ok(x)
}

/// Marches from the inlet and returns the stored stations, station-major.
pub fn solve_fom(
    grid: &VoxelGrid,
    geometry: &ProfileGeometry,
    material: &MaterialParams,
    process: &ProcessParams,
    disc: &Discretization,
) -> Result<Vec<f64>> {
    disc.validate()?;
    let n = grid.n_interior();
    let dz = geometry.l / (disc.nz - 1) as f64;
    let system = StationSystem::assemble(grid, material, process, dz)?;
    let mut values = Vec::with_capacity(n * disc.stored_stations());
    let mut t = vec![process.t_inlet; n];
    values.extend_from_slice(&t);
    for station in 1..disc.nz {
        t = solve_station(&system, &t, disc.cg_tol, disc.cg_max_iter)?;
        if station % disc.z_stride == 0 {
            values.extend_from_slice(&t);
        }
    }
    Ok(values)
}

/// A solved temperature field for one parameter setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Temperatures (K), station-major then compact cell index.
    pub values: Vec<f64>,
    pub param: ProcessParams,
    pub geometry_hash: String,
    pub discretization_hash: String,
}

impl Snapshot {
    pub fn station(&self, n_interior: usize, s: usize) -> &[f64] {
        &self.values[s * n_interior..(s + 1) * n_interior]
    }

    /// Largest violation of the bounds `[min(T_amb, T_in), max(T_amb, T_in)]`.
    pub fn max_principle_violation(&self) -> f64 {
        let lo = self.param.t_ambient.min(self.param.t_inlet);
        let hi = self.param.t_ambient.max(self.param.t_inlet);
        self.values
            .iter()
            .map(|&v| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Geometry, grid, material and discretization bundled for repeated solves.
#[derive(Debug, Clone)]
pub struct FullOrderModel {
    pub geometry: ProfileGeometry,
    pub grid: VoxelGrid,
    pub material: MaterialParams,
    pub disc: Discretization,
}

impl FullOrderModel {
    pub fn new(geometry: ProfileGeometry, material: MaterialParams, disc: Discretization) -> Result<Self> {
        disc.validate()?;
        material.validate()?;
        let grid = rasterize(&geometry, disc.dx)?;
        Ok(FullOrderModel {
            geometry,
            grid,
            material,
            disc,
        })
    }

    pub fn field_len(&self) -> usize {
        self.grid.n_interior() * self.disc.stored_stations()
    }

    /// Axial positions (m) of the stored stations.
    pub fn station_positions(&self) -> Vec<f64> {
        let dz = self.geometry.l / (self.disc.nz - 1) as f64;
        (0..self.disc.stored_stations())
            .map(|s| (s * self.disc.z_stride) as f64 * dz)
            .collect()
    }

    pub fn solve(&self, process: &ProcessParams) -> Result<Snapshot> {
        let values = solve_fom(&self.grid, &self.geometry, &self.material, process, &self.disc)?;
        Ok(Snapshot {
            values,
            param: *process,
            geometry_hash: self.geometry.fingerprint(),
            discretization_hash: self.disc.fingerprint(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::rng::Rng;

    fn coarse_model() -> FullOrderModel {
        FullOrderModel::new(
            ProfileGeometry::dumbbell(),
            MaterialParams {
                u: 0.01,
                ..Default::default()
            },
            Discretization {
                dx: 0.5e-3,
                nz: 21,
                z_stride: 4,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn process(t_ambient: f64, htc: f64) -> ProcessParams {
        ProcessParams {
            t_ambient,
            htc,
            t_inlet: 473.0,
        }
    }

    #[test]
    fn constant_field_is_fixed_point_without_cooling() {
        let m = coarse_model();
        let sys = StationSystem::assemble(&m.grid, &m.material, &process(293.0, 0.0), 0.01).unwrap();
        let t = vec![400.0; sys.dim()];
        let mut at = vec![0.0; sys.dim()];
        sys.apply(&t, &mut at);
        let b = sys.rhs(&t);
        for (a, b) in at.iter().zip(&b) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        let next = solve_station(&sys, &t, 1e-10, 100).unwrap();
        assert!(next.iter().all(|&v| (v - 400.0).abs() < 1e-9));
    }

    #[test]
    fn operator_is_symmetric() {
        let m = coarse_model();
        let sys = StationSystem::assemble(&m.grid, &m.material, &process(290.0, 250.0), 0.01).unwrap();
        let n = sys.dim();
        let mut rng = Rng::new(11);
        let v: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let (mut av, mut aw) = (vec![0.0; n], vec![0.0; n]);
        sys.apply(&v, &mut av);
        sys.apply(&w, &mut aw);
        let lhs = dot(&av, &w);
        let rhs = dot(&v, &aw);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn single_cell_matches_lumped_implicit_update() {
        // A square of side dx centred on a cell: one interior cell with four faces.
        let dx = 1e-3;
        let mut mask = vec![false; 9];
        mask[4] = true;
        let grid = VoxelGrid::from_mask(dx, 3, 3, 0.0, &mask).unwrap();
        assert_eq!(grid.n_interior(), 1);
        assert_eq!(grid.face_count(0), 4);
        let material = MaterialParams::default();
        let p = process(293.0, 300.0);
        let dz = 0.05;
        let sys = StationSystem::assemble(&grid, &material, &p, dz).unwrap();
        let t_old = 450.0;
        let next = solve_station(&sys, &[t_old], 1e-12, 10).unwrap()[0];
        // (c + 4·h·dx)·T = c·T_old + 4·h·dx·T_amb with c = ρ·c_p·u·dx²/dz.
        let c = material.rho * material.cp * material.u * dx * dx / dz;
        let g = 4.0 * p.htc * dx;
        let expected = (c * t_old + g * p.t_ambient) / (c + g);
        assert!((next - expected).abs() < 1e-12 * expected, "{next} vs {expected}");
    }

    #[test]
    fn tiny_step_returns_previous_field() {
        let m = coarse_model();
        let sys = StationSystem::assemble(&m.grid, &m.material, &process(293.0, 300.0), 1e-12).unwrap();
        let mut rng = Rng::new(5);
        let t: Vec<f64> = (0..sys.dim()).map(|_| rng.uniform_in(300.0, 400.0)).collect();
        let next = solve_station(&sys, &t, 1e-12, 100).unwrap();
        for (a, b) in next.iter().zip(&t) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_htc_keeps_inlet_temperature() {
        let m = coarse_model();
        let s = m.solve(&process(293.0, 0.0)).unwrap();
        assert_eq!(s.values.len(), m.field_len());
        assert!(s.values.iter().all(|&v| (v - 473.0).abs() <= 1e-8));
    }

    #[test]
    fn ambient_inlet_stays_ambient() {
        let m = coarse_model();
        let p = ProcessParams {
            t_ambient: 293.0,
            htc: 300.0,
            t_inlet: 293.0,
        };
        let s = m.solve(&p).unwrap();
        assert!(s.values.iter().all(|&v| (v - 293.0).abs() <= 1e-8));
    }

    #[test]
    fn cooling_obeys_maximum_principle_and_symmetry() {
        let m = coarse_model();
        let s = m.solve(&process(290.0, 300.0)).unwrap();
        assert!(s.max_principle_violation() <= 1e-6);
        let n = m.grid.n_interior();
        for st in 0..m.disc.stored_stations() {
            let slice = s.station(n, st);
            for c in 0..n {
                let mc = m.grid.mirror(c).unwrap();
                // CG stops at a relative residual, so the mirror images agree
                // to solver accuracy rather than bitwise.
                assert!(
                    (slice[c] - slice[mc]).abs() <= 1e-6,
                    "{}",
                    (slice[c] - slice[mc]).abs()
                );
            }
        }
    }

    #[test]
    fn regime_numbers() {
        let material = MaterialParams::default();
        let g = ProfileGeometry::dumbbell();
        let r = biot_fourier_report(&material, &process(293.0, 269.0), &g);
        // u·l·ρ·c_p/k = 0.00011·1·900·2000/0.2
        assert!((r.peclet - 990.0).abs() < 1e-9);
        assert!((r.biot - 269.0 * 0.006 / 0.2).abs() < 1e-12);
        let none = biot_fourier_report(&material, &process(293.0, 0.0), &g);
        assert_eq!(none.biot, 0.0);
        let fast = MaterialParams {
            u: 2.0 * material.u,
            ..material
        };
        let r2 = biot_fourier_report(&fast, &process(293.0, 269.0), &g);
        assert_eq!(r2.fourier_outlet * 2.0, r.fourier_outlet);
    }

    #[test]
    fn discretization_validation() {
        let bad = Discretization {
            nz: 100,
            z_stride: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let loose = Discretization {
            cg_tol: 1e-3,
            ..Default::default()
        };
        assert!(loose.validate().is_err());
        assert_eq!(Discretization::default().stored_stations(), 21);
    }

    #[test]
    fn negative_htc_is_rejected() {
        assert!(process(293.0, -250.0).validate().is_err());
        assert_eq!(process(500.0, 1.0).warnings().len(), 1);
    }
}
