//! Proper orthogonal decomposition by the method of snapshots.
//!
//! With `S ∈ R^{N×Ns}` the centred snapshot matrix, the POD is the SVD
//! `S/√Ns = U·Σ·Vᵀ`. Because `Ns ≪ N` the right singular vectors come from
//! the small Gram matrix `G = SᵀS/Ns = V·Σ²·Vᵀ`, and the basis follows as
//! `U = S·V·Σ⁻¹/√Ns`. Snapshots are zero-centred before the decomposition,
//! parameters are min-max scaled to `[-1, 1]` and coefficients are divided by
//! their singular values.

mod jacobi;

pub use jacobi::{eigendecompose_spsd, SymmetricEigen};

use serde::{Deserialize, Serialize};

use crate::fom::SnapshotStore;
use crate::linalg::{axpy, dot, norm, ColMatrix};
use crate::{Error, Result};

/// Default relative eigenvalue floor below which modes are dropped.
pub const DEFAULT_TOL_RANK: f64 = 1e-12;

/// Snapshots as columns, with the parameter vector of each column.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub columns: ColMatrix,
    pub params: Vec<Vec<f64>>,
}

impl SnapshotMatrix {
    pub fn new(columns: ColMatrix, params: Vec<Vec<f64>>) -> Result<Self> {
        if columns.cols() < 2 {
            return Err(Error::Config(format!(
                "need at least two snapshots, got {}",
                columns.cols()
            )));
        }
        if params.len() != columns.cols() {
            return Err(Error::dim("snapshot parameters", columns.cols(), params.len()));
        }
        Ok(SnapshotMatrix { columns, params })
    }

    /// Parameters are `(t_ambient, htc)` per column.
    pub fn from_store(store: &SnapshotStore) -> Result<Self> {
        let params = store.params().iter().map(|p| vec![p.t_ambient, p.htc]).collect();
        Self::new(store.matrix.clone(), params)
    }

    pub fn n(&self) -> usize {
        self.columns.rows()
    }

    pub fn ns(&self) -> usize {
        self.columns.cols()
    }
}

/// Column mean and the centred copy of the matrix.
pub fn center(s: &ColMatrix) -> (Vec<f64>, ColMatrix) {
    let (n, ns) = (s.rows(), s.cols());
    let mut mean = vec![0.0; n];
    for c in s.columns() {
        axpy(1.0, c, &mut mean);
    }
    let inv = 1.0 / ns as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    let mut centered = s.clone();
    for j in 0..ns {
        axpy(-1.0, &mean, centered.col_mut(j));
    }
    (mean, centered)
}

/// `G = SᵀS / Ns`.
pub fn gram(centered: &ColMatrix) -> ColMatrix {
    let ns = centered.cols();
    let mut g = ColMatrix::zeros(ns, ns);
    let inv = 1.0 / ns as f64;
    for j in 0..ns {
        for i in 0..=j {
            let v = dot(centered.col(i), centered.col(j)) * inv;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Requested modes exceeded the numerical rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub requested: usize,
    pub retained: usize,
}

/// Left singular vectors and singular values from the Gram eigenpairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PodModes {
    pub modes: ColMatrix,
    pub singular_values: Vec<f64>,
    pub truncation: Option<Truncation>,
}

/// Keeps eigenpairs with `λ_l > tol_rank·λ_1`, at most `requested` of them,
/// and lifts them to `u_l = S·v_l / (σ_l·√Ns)` with `σ_l = √λ_l`.
///
/// Lifted modes lose orthogonality in proportion to `σ_1/σ_l`; two
/// Gram-Schmidt passes restore it to machine precision without moving the
/// spanned subspace. A mode that loses more than half its length in that
/// step is rounding noise; the basis stops before it and the shortfall is
/// reported as a [`Truncation`]. Each mode's largest-magnitude entry is made
/// positive.
pub fn compute_basis(
    centered: &ColMatrix,
    eig: &SymmetricEigen,
    requested: usize,
    tol_rank: f64,
) -> Result<PodModes> {
    let (n, ns) = (centered.rows(), centered.cols());
    if eig.values.len() != ns {
        return Err(Error::dim("compute_basis eigenpairs", ns, eig.values.len()));
    }
    let lead = eig.values.first().copied().unwrap_or(0.0);
    let rank = eig
        .values
        .iter()
        .take_while(|&&l| lead > 0.0 && l > tol_rank * lead)
        .count();
    let retained = requested.min(rank);

    let sqrt_ns = (ns as f64).sqrt();
    let mut modes = ColMatrix::zeros(n, retained);
    let mut singular_values = Vec::with_capacity(retained);
    for l in 0..retained {
        let sigma = eig.values[l].sqrt();
        let u = centered.mul_vec(eig.vectors.col(l));
        let scale = 1.0 / (sigma * sqrt_ns);
        let col = modes.col_mut(l);
        for (dst, src) in col.iter_mut().zip(&u) {
            *dst = src * scale;
        }
        singular_values.push(sigma);
    }
    let mut kept = retained;
    for l in 0..retained {
        for _pass in 0..2 {
            for k in 0..l {
                let proj = dot(modes.col(k), modes.col(l));
                let (prev, cur) = modes.col_pair_mut(k, l);
                axpy(-proj, prev, cur);
            }
        }
        let col = modes.col_mut(l);
        let len = norm(col);
        if !(len > 0.5) {
            // Mostly inside the span of the earlier modes: the eigenpair is
            // rounding noise, so the rank ends here.
            kept = l;
            break;
        }
        col.iter_mut().for_each(|v| *v /= len);
        jacobi::canonicalize_sign(col);
    }
    if kept < retained {
        modes.truncate_cols(kept);
        singular_values.truncate(kept);
    }
    let truncation = (kept < requested).then_some(Truncation {
        requested,
        retained: kept,
    });
    Ok(PodModes {
        modes,
        singular_values,
        truncation,
    })
}

/// Affine map of each parameter from `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ParamScaler {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::dim("parameter scaler bounds", min.len(), max.len()));
        }
        for (k, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !(hi > lo) {
                return Err(Error::Config(format!(
                    "parameter {k} has a degenerate range [{lo}, {hi}]"
                )));
            }
        }
        Ok(ParamScaler { min, max })
    }

    /// Bounds from the componentwise extremes of the samples.
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        let p = samples
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Config("cannot fit a scaler to zero samples".into()))?;
        let mut min = vec![f64::INFINITY; p];
        let mut max = vec![f64::NEG_INFINITY; p];
        for s in samples {
            if s.len() != p {
                return Err(Error::dim("parameter sample", p, s.len()));
            }
            for k in 0..p {
                min[k] = min[k].min(s[k]);
                max[k] = max[k].max(s[k]);
            }
        }
        Self::new(min, max)
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn scale(&self, mu: &[f64]) -> Result<Vec<f64>> {
        if mu.len() != self.dim() {
            return Err(Error::dim("scale_params", self.dim(), mu.len()));
        }
        Ok(mu
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(m, (lo, hi))| 2.0 * (m - lo) / (hi - lo) - 1.0)
            .collect())
    }

    pub fn unscale(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::dim("unscale_params", self.dim(), z.len()));
        }
        Ok(z.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(v, (lo, hi))| lo + (v + 1.0) * 0.5 * (hi - lo))
            .collect())
    }
}

/// Reduced coordinates of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCoefficients {
    /// `modesᵀ·(x − mean)`.
    pub raw: Vec<f64>,
    /// `raw_l / σ_l`.
    pub standardized: Vec<f64>,
}

/// The offline reduction product.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    pub mean_field: Vec<f64>,
    /// N × L orthonormal modes.
    pub modes: ColMatrix,
    /// σ_1 ≥ … ≥ σ_L > 0.
    pub singular_values: Vec<f64>,
    pub param_scaler: ParamScaler,
    /// Every eigenvalue of the Gram matrix, descending.
    pub energy_spectrum: Vec<f64>,
    /// `trace(G)`, the exact sum of the spectrum. Tails are taken against
    /// it so rounding in the small eigenvalues does not pile up.
    pub total_energy: f64,
    pub truncation: Option<Truncation>,
}

impl ReducedBasis {
    /// center → gram → eigendecompose → compute_basis, plus a parameter
    /// scaler fitted to the snapshot parameters.
    pub fn build(snapshots: &SnapshotMatrix, requested: usize, tol_rank: f64) -> Result<Self> {
        let (mean_field, centered) = center(&snapshots.columns);
        let g = gram(&centered);
        let total_energy = (0..g.cols()).map(|i| g[(i, i)]).sum();
        let eig = eigendecompose_spsd(&g)?;
        let pod = compute_basis(&centered, &eig, requested, tol_rank)?;
        Ok(ReducedBasis {
            mean_field,
            modes: pod.modes,
            singular_values: pod.singular_values,
            param_scaler: ParamScaler::fit(&snapshots.params)?,
            energy_spectrum: eig.values,
            total_energy,
            truncation: pod.truncation,
        })
    }

    /// Field length N.
    pub fn n(&self) -> usize {
        self.mean_field.len()
    }

    /// Retained modes L.
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    pub fn project(&self, x: &[f64]) -> Result<ReducedCoefficients> {
        if x.len() != self.n() {
            return Err(Error::dim("project", self.n(), x.len()));
        }
        let d: Vec<f64> = x.iter().zip(&self.mean_field).map(|(a, m)| a - m).collect();
        let raw = self.modes.tr_mul_vec(&d);
        let standardized = raw
            .iter()
            .zip(&self.singular_values)
            .map(|(c, s)| c / s)
            .collect();
        Ok(ReducedCoefficients { raw, standardized })
    }

    /// `mean + modes·raw`.
    pub fn reconstruct(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.len() {
            return Err(Error::dim("reconstruct", self.len(), raw.len()));
        }
        // Row blocks keep the partial sums in cache across modes.
        const BLOCK: usize = 2048;
        let mut x = self.mean_field.clone();
        for (b, chunk) in x.chunks_mut(BLOCK).enumerate() {
            let start = b * BLOCK;
            for (l, &c) in raw.iter().enumerate() {
                axpy(c, &self.modes.col(l)[start..start + chunk.len()], chunk);
            }
        }
        Ok(x)
    }

    /// Standardised coefficients back to raw ones.
    pub fn destandardize(&self, standardized: &[f64]) -> Vec<f64> {
        standardized
            .iter()
            .zip(&self.singular_values)
            .map(|(z, s)| z * s)
            .collect()
    }

    /// Largest entry of `|modesᵀ·modes − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let l = self.len();
        let mut worst: f64 = 0.0;
        for j in 0..l {
            for i in 0..=j {
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(self.modes.col(i), self.modes.col(j)) - id).abs());
            }
        }
        worst
    }

    /// Energy spectrum as CSV: `l,eigenvalue,cumulative_energy_fraction`.
    pub fn energy_csv(&self) -> String {
        let total = self.total_energy;
        let mut out = String::from("l,eigenvalue,cumulative_energy_fraction\n");
        let mut acc = 0.0;
        for (i, &lam) in self.energy_spectrum.iter().enumerate() {
            acc += lam;
            let frac = if total > 0.0 { (acc / total).min(1.0) } else { 1.0 };
            out.push_str(&format!("{},{:e},{:.17}\n", i + 1, lam, frac));
        }
        out
    }

    /// `sqrt(Σ_{l>L} λ_l / Σ λ_l)`, the predicted relative projection error
    /// at L modes, evaluated as `1 − Σ_{l≤L} λ_l / trace(G)`.
    pub fn tail_energy(&self, l: usize) -> f64 {
        let total = self.total_energy;
        if !(total > 0.0) {
            return 0.0;
        }
        let head: f64 = self.energy_spectrum.iter().take(l).sum();
        ((total - head).max(0.0) / total).sqrt()
    }
}

/// Relative projection error `sqrt(Σ_j ‖d_j − P_L d_j‖² / Σ_j ‖d_j‖²)` with
/// `d_j = x_j − mean`, for `L = 1..=l_max` (clamped to the basis size).
///
/// On the training snapshots this equals [`ReducedBasis::tail_energy`]; on
/// other data it measures how well the basis generalises. Returns zeros when
/// every column equals the mean.
pub fn projection_error_spectrum(basis: &ReducedBasis, s: &ColMatrix, l_max: usize) -> Result<Vec<f64>> {
    if s.rows() != basis.n() {
        return Err(Error::dim("projection_error_spectrum", basis.n(), s.rows()));
    }
    let l_max = l_max.min(basis.len());
    let mut residual = vec![0.0; l_max];
    let mut total = 0.0;
    for x in s.columns() {
        let mut r: Vec<f64> = x.iter().zip(&basis.mean_field).map(|(a, m)| a - m).collect();
        total += dot(&r, &r);
        for (l, acc) in residual.iter_mut().enumerate() {
            let u = basis.modes.col(l);
            let c = dot(u, &r);
            axpy(-c, u, &mut r);
            *acc += dot(&r, &r);
        }
    }
    if total == 0.0 {
        return Ok(vec![0.0; l_max]);
    }
    Ok(residual.into_iter().map(|v| (v / total).sqrt()).collect())
}
