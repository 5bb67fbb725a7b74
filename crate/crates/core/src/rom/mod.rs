//! Offline assembly of a [`RomBundle`] and the online prediction path.
//!
//! A prediction maps `(t_ambient, htc)` through the parameter scaler and the
//! network to standardised coefficients, multiplies them by the singular
//! values and reconstructs `mean + modes·coefficients`. Nothing online
//! touches the full-order solver.

mod evaluate;
mod format;
mod sampling;

pub use evaluate::{evaluate, ErrorReport, FomOracle, QualitativeChecks, SampleError};
pub use format::BUNDLE_FORMAT_VERSION;
pub use sampling::{process_params, sample_params, SamplingLaw, SamplingPlan, Split, SplitSeeds};

use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RomConfig;
use crate::fom::{Discretization, FullOrderModel, MaterialParams, SnapshotStore};
use crate::geometry::{rasterize, region_masks, GridSummary, ProfileGeometry, RegionMasks, VoxelGrid};
use crate::neural::{self, Dataset, Mlp, MlpLayout, TrainReport};
use crate::reduction::{ReducedBasis, SnapshotMatrix, Truncation};
use crate::{Error, Result};

/// Provenance and everything needed to rebuild the grid of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: u32,
    pub geometry: ProfileGeometry,
    pub material: MaterialParams,
    pub discretization: Discretization,
    pub t_inlet: f64,
    pub geometry_hash: String,
    pub discretization_hash: String,
    pub grid_hash: String,
    pub grid: GridSummary,
    pub stations: usize,
    pub plan: SamplingPlan,
    pub truncation: Option<Truncation>,
    pub training: Option<TrainingSummary>,
    pub warnings: Vec<String>,
    pub created_unix: u64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub layout: MlpLayout,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub initial_val_mse: f64,
    pub best_val_mse: f64,
    pub fallback_used: bool,
    pub parameter_id: String,
}

/// The offline product: reduced basis, network and provenance.
///
/// Immutable once built; `predict` takes `&self` and may be called from many
/// threads at once.
#[derive(Debug, Clone)]
pub struct RomBundle {
    pub meta: BundleMeta,
    pub basis: ReducedBasis,
    /// `None` when the training snapshots have rank 0 after centring; the
    /// bundle then predicts the mean field.
    pub network: Option<Mlp>,
    grid: VoxelGrid,
    regions: RegionMasks,
}

/// Whole-field statistics plus the outlet quantities behind the qualitative
/// checks. All values are recomputable from the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub outlet_min: f64,
    pub outlet_max: f64,
    pub outlet_large_core_mean: f64,
    pub outlet_small_core_mean: f64,
    pub outlet_surface_mean: f64,
    /// Population standard deviation over the outlet surface cells.
    pub outlet_surface_std: f64,
    /// `outlet_surface_std / (outlet_max − t_ambient)`, 0 when the outlet is
    /// at ambient.
    pub spread_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionResult {
    pub t_ambient: f64,
    pub htc: f64,
    /// Station-major: `field[s·n_interior + c]`.
    pub field: Vec<f64>,
    pub summary: FieldSummary,
    /// The parameter lies outside the sampling box of the training data.
    pub extrapolation: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// One axial station laid out on the full `nx × ny` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub station: usize,
    pub z: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    /// Interior-cell temperatures in compact (row-major interior) order.
    pub values: Vec<f64>,
    /// `nx·ny` row-major flags marking interior cells; the k-th `true`
    /// entry owns `values[k]`.
    pub mask: Vec<bool>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// What `build_rom` produced besides the bundle.
#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub bundle: RomBundle,
    pub train_report: Option<TrainReport>,
}

impl RomBundle {
    /// Validates the parts against each other and rebuilds the grid from the
    /// stored geometry.
    pub fn assemble(meta: BundleMeta, basis: ReducedBasis, network: Option<Mlp>) -> Result<Self> {
        let found = meta.geometry.fingerprint();
        if found != meta.geometry_hash {
            return Err(Error::HashMismatch {
                what: "bundle geometry",
                expected: meta.geometry_hash.clone(),
                found,
            });
        }
        let found = meta.discretization.fingerprint();
        if found != meta.discretization_hash {
            return Err(Error::HashMismatch {
                what: "bundle discretization",
                expected: meta.discretization_hash.clone(),
                found,
            });
        }
        let grid = rasterize(&meta.geometry, meta.discretization.dx)?;
        let found = grid.fingerprint();
        if found != meta.grid_hash {
            return Err(Error::HashMismatch {
                what: "bundle grid",
                expected: meta.grid_hash.clone(),
                found,
            });
        }
        if grid.summary() != meta.grid || meta.stations != meta.discretization.stored_stations() {
            return Err(Error::Format(
                "bundle grid summary does not match its geometry".into(),
            ));
        }
        let n = grid.n_interior() * meta.stations;
        if basis.n() != n || basis.modes.rows() != n || basis.modes.cols() != basis.len() {
            return Err(Error::dim("bundle basis length", n, basis.n()));
        }
        if basis.param_scaler.dim() != 2 {
            return Err(Error::dim(
                "bundle parameter dimension",
                2,
                basis.param_scaler.dim(),
            ));
        }
        match (&network, basis.len()) {
            (None, 0) => {}
            (None, l) => return Err(Error::Format(format!("bundle has {l} modes but no network"))),
            (Some(net), l) => {
                let layout = net.layout();
                if layout.input_dim != 2 || layout.output_dim != l {
                    return Err(Error::dim("bundle network output", l, layout.output_dim));
                }
            }
        }
        let regions = region_masks(&grid, &meta.geometry)?;
        Ok(RomBundle {
            meta,
            basis,
            network,
            grid,
            regions,
        })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn regions(&self) -> &RegionMasks {
        &self.regions
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    pub fn field_len(&self) -> usize {
        self.basis.n()
    }

    pub fn stations(&self) -> usize {
        self.meta.stations
    }

    pub fn station_positions(&self) -> Vec<f64> {
        let d = &self.meta.discretization;
        let dz = self.meta.geometry.l / (d.nz - 1) as f64;
        (0..self.meta.stations)
            .map(|s| (s * d.z_stride) as f64 * dz)
            .collect()
    }

    /// Reduced coefficients (raw, not standardised) for a parameter.
    pub fn coefficients(&self, t_ambient: f64, htc: f64) -> Result<Vec<f64>> {
        if !(t_ambient.is_finite() && htc.is_finite()) {
            return Err(Error::Config("parameters must be finite".into()));
        }
        if htc < 0.0 {
            return Err(Error::Config(format!("htc must be non-negative, got {htc}")));
        }
        match &self.network {
            None => Ok(Vec::new()),
            Some(net) => {
                let z = self.basis.param_scaler.scale(&[t_ambient, htc])?;
                let standardized = net.forward(&z)?;
                Ok(self.basis.destandardize(&standardized))
            }
        }
    }

    pub fn predict(&self, t_ambient: f64, htc: f64) -> Result<PredictionResult> {
        let start = Instant::now();
        let coeffs = self.coefficients(t_ambient, htc)?;
        let field = self.basis.reconstruct(&coeffs)?;
        let summary = self.summarize(&field, t_ambient);
        Ok(PredictionResult {
            t_ambient,
            htc,
            field,
            summary,
            extrapolation: !self.meta.plan.contains(t_ambient, htc),
            elapsed: start.elapsed(),
        })
    }

    pub fn station<'a>(&self, field: &'a [f64], s: usize) -> &'a [f64] {
        let n = self.grid.n_interior();
        &field[s * n..(s + 1) * n]
    }

    pub fn summarize(&self, field: &[f64], t_ambient: f64) -> FieldSummary {
        let (min, max, mean) = slice_stats(field);
        let outlet = self.station(field, self.meta.stations - 1);
        let (outlet_min, outlet_max, _) = slice_stats(outlet);
        let region_mean = |cells: &[usize]| min_max_mean(cells.iter().map(|&c| outlet[c])).2;
        let surface = &self.regions.surface_ring;
        let surface_mean = region_mean(surface);
        let var = surface
            .iter()
            .map(|&c| (outlet[c] - surface_mean).powi(2))
            .sum::<f64>()
            / surface.len() as f64;
        let std = var.sqrt();
        let excess = outlet_max - t_ambient;
        FieldSummary {
            min,
            max,
            mean,
            outlet_min,
            outlet_max,
            outlet_large_core_mean: region_mean(&self.regions.large_cylinder_core),
            outlet_small_core_mean: region_mean(&self.regions.small_cylinder_core),
            outlet_surface_mean: surface_mean,
            outlet_surface_std: std,
            spread_ratio: if excess > 0.0 { std / excess } else { 0.0 },
        }
    }

    /// Mean surface-cell temperature at every stored station.
    pub fn surface_means(&self, field: &[f64]) -> Vec<f64> {
        (0..self.meta.stations)
            .map(|s| {
                let st = self.station(field, s);
                min_max_mean(self.regions.surface_ring.iter().map(|&c| st[c])).2
            })
            .collect()
    }

    pub fn slice(&self, field: &[f64], s: usize) -> Result<Slice> {
        if s >= self.meta.stations {
            return Err(Error::Config(format!(
                "station {s} out of range (0..{})",
                self.meta.stations
            )));
        }
        let values = self.station(field, s).to_vec();
        let (min, max, mean) = slice_stats(&values);
        Ok(Slice {
            station: s,
            z: self.station_positions()[s],
            nx: self.grid.nx,
            ny: self.grid.ny,
            dx: self.grid.dx,
            values,
            mask: self.grid.mask(),
            min,
            max,
            mean,
        })
    }
}

/// `(min, max, mean)`; NaN for an empty iterator.
pub fn min_max_mean(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        n += 1;
    }
    if n == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (lo, hi, sum / n as f64)
    }
}

/// [`min_max_mean`] over a slice, in eight independent lanes.
fn slice_stats(values: &[f64]) -> (f64, f64, f64) {
    const W: usize = 8;
    let (mut lo, mut hi, mut sum) = ([f64::INFINITY; W], [f64::NEG_INFINITY; W], [0.0; W]);
    let chunks = values.chunks_exact(W);
    let rest = chunks.remainder();
    for c in chunks {
        for i in 0..W {
            lo[i] = if c[i] < lo[i] { c[i] } else { lo[i] };
            hi[i] = if c[i] > hi[i] { c[i] } else { hi[i] };
            sum[i] += c[i];
        }
    }
    let (rlo, rhi, _) = min_max_mean(rest.iter().copied());
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let lo = lo.iter().copied().fold(rlo, f64::min);
    let hi = hi.iter().copied().fold(rhi, f64::max);
    let total = sum.iter().sum::<f64>() + rest.iter().sum::<f64>();
    (lo, hi, total / values.len() as f64)
}

/// Solves the full-order model at every parameter of one split.
pub fn generate_split(fom: &FullOrderModel, config: &RomConfig, split: Split) -> Result<SnapshotStore> {
    let points = sample_params(&config.sampling, split);
    let params = process_params(&points, config.process.t_inlet);
    crate::fom::generate_store(fom, split.name(), &params)
}

fn check_store(config: &RomConfig, store: &SnapshotStore, what: &'static str) -> Result<()> {
    let expected = config.profile().fingerprint();
    if store.meta.geometry_hash != expected {
        return Err(Error::HashMismatch {
            what,
            expected,
            found: store.meta.geometry_hash.clone(),
        });
    }
    let expected = config.discretization().fingerprint();
    if store.meta.discretization_hash != expected {
        return Err(Error::HashMismatch {
            what,
            expected,
            found: store.meta.discretization_hash.clone(),
        });
    }
    Ok(())
}

fn dataset(basis: &ReducedBasis, store: &SnapshotStore) -> Result<Dataset> {
    let mut inputs = Vec::with_capacity(store.len());
    let mut targets = Vec::with_capacity(store.len());
    for (j, p) in store.params().iter().enumerate() {
        inputs.push(basis.param_scaler.scale(&[p.t_ambient, p.htc])?);
        targets.push(basis.project(store.matrix.col(j))?.standardized);
    }
    Dataset::new(inputs, targets)
}

/// center → gram → eigendecompose → basis → project → standardise → train.
pub fn build_rom(
    config: &RomConfig,
    train: &SnapshotStore,
    validation: &SnapshotStore,
) -> Result<BuildOutcome> {
    config.validate()?;
    check_store(config, train, "training store")?;
    check_store(config, validation, "validation store")?;
    let geometry = config.profile();
    let disc = config.discretization();
    let grid = rasterize(&geometry, disc.dx)?;
    if train.meta.n != grid.n_interior() * disc.stored_stations() || validation.meta.n != train.meta.n {
        return Err(Error::dim("snapshot length", train.meta.n, validation.meta.n));
    }

    let basis = ReducedBasis::build(
        &SnapshotMatrix::from_store(train)?,
        config.rom.modes,
        config.rom.tol_rank,
    )?;
    let mut warnings = Vec::new();
    if let Some(t) = basis.truncation {
        warnings.push(format!(
            "requested {} modes but the training snapshots have numerical rank {}",
            t.requested, t.retained
        ));
    }

    let mut train_report = None;
    let mut training = None;
    let network = if basis.is_empty() {
        warnings.push("snapshots are identical after centring; the bundle predicts the mean field".into());
        None
    } else {
        let train_set = dataset(&basis, train)?;
        let val_set = dataset(&basis, validation)?;
        let layout = config.network.layout(2, basis.len());
        let init = Mlp::init(layout, config.network.seed)?;
        let (mut net, mut report) = neural::train(&init, &train_set, &val_set, &config.training)?;
        let mut fallback_used = false;
        let stalled = report.best_val_mse * 10.0 > report.initial_val_mse;
        if stalled && config.network.fallback_on_stall && layout.hidden_layers > 4 {
            let shallow = MlpLayout::fallback(2, basis.len());
            let init = Mlp::init(shallow, config.network.seed)?;
            let (net2, report2) = neural::train(&init, &train_set, &val_set, &config.training)?;
            warnings.push(format!(
                "{}-layer network stalled (validation MSE {:.3e} from {:.3e}); retrained with {} layers (validation MSE {:.3e})",
                layout.hidden_layers, report.best_val_mse, report.initial_val_mse, shallow.hidden_layers, report2.best_val_mse
            ));
            if report2.best_val_mse < report.best_val_mse {
                net = net2;
                report = report2;
                fallback_used = true;
            }
        }
        training = Some(TrainingSummary {
            layout: net.layout(),
            epochs_run: report.epochs_run(),
            best_epoch: report.best_epoch,
            initial_val_mse: report.initial_val_mse,
            best_val_mse: report.best_val_mse,
            fallback_used,
            parameter_id: report.parameter_id.clone(),
        });
        train_report = Some(report);
        Some(net)
    };

    let meta = BundleMeta {
        format_version: BUNDLE_FORMAT_VERSION,
        geometry,
        material: config.material,
        discretization: disc,
        t_inlet: config.process.t_inlet,
        geometry_hash: geometry.fingerprint(),
        discretization_hash: disc.fingerprint(),
        grid_hash: grid.fingerprint(),
        grid: grid.summary(),
        stations: disc.stored_stations(),
        plan: config.sampling,
        truncation: basis.truncation,
        training,
        warnings,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        generator: concat!("calibrom ", env!("CARGO_PKG_VERSION")).to_string(),
    };
    let bundle = RomBundle::assemble(meta, basis, network)?;
    Ok(BuildOutcome { bundle, train_report })
}
