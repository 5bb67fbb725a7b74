//! JSON run configuration shared by the CLI, the examples and the tests.
//!
//! Every section is optional and falls back to the library defaults
//! (reference dumbbell, reference material). Units are SI throughout.
//!
//! ```json
//! {
//!   "geometry":       { "r1": 0.006, "r2": 0.0033, "h": 0.01, "w": 0.003, "l": 1.0, "dx": 0.00025 },
//!   "material":       { "rho": 900.0, "cp": 2000.0, "k": 0.2, "u": 0.01 },
//!   "process":        { "t_inlet": 473.0 },
//!   "discretization": { "nz": 101, "z_stride": 5, "cg_tol": 1e-10, "cg_max_iter": 5000 },
//!   "sampling":       { "t_ambient": [288, 298], "htc": [218, 320], "train": 100, ... },
//!   "rom":            { "modes": 30, "tol_rank": 1e-12 },
//!   "network":        { "hidden_layers": 10, "hidden_width": 40, "seed": 7, "fallback_on_stall": true },
//!   "training":       { "max_epochs": 20000, "learning_rate": 0.001, "patience": 2000, ... }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fom::{Discretization, FullOrderModel, MaterialParams};
use crate::geometry::ProfileGeometry;
use crate::neural::{MlpLayout, TrainConfig};
use crate::rom::SamplingPlan;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub r1: f64,
    pub r2: f64,
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub dx: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = ProfileGeometry::dumbbell();
        GeometryConfig {
            r1: g.r1,
            r2: g.r2,
            h: g.h,
            w: g.w,
            l: g.l,
            dx: Discretization::default().dx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InletConfig {
    pub t_inlet: f64,
}

impl Default for InletConfig {
    fn default() -> Self {
        InletConfig { t_inlet: 473.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarchConfig {
    pub nz: usize,
    pub z_stride: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for MarchConfig {
    fn default() -> Self {
        let d = Discretization::default();
        MarchConfig {
            nz: d.nz,
            z_stride: d.z_stride,
            cg_tol: d.cg_tol,
            cg_max_iter: d.cg_max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReductionConfig {
    /// Requested number of modes L.
    pub modes: usize,
    /// Modes with `λ_l ≤ tol_rank·λ_1` are dropped.
    pub tol_rank: f64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            modes: 30,
            tol_rank: crate::reduction::DEFAULT_TOL_RANK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Weight initialisation seed.
    pub seed: u64,
    /// Retrain with the 4-layer preset when validation MSE does not drop
    /// at least tenfold below its initial value.
    pub fallback_on_stall: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_layers: 10,
            hidden_width: 40,
            seed: 7,
            fallback_on_stall: true,
        }
    }
}

impl NetworkConfig {
    pub fn layout(&self, input_dim: usize, output_dim: usize) -> MlpLayout {
        MlpLayout {
            input_dim,
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            output_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RomConfig {
    pub geometry: GeometryConfig,
    pub material: MaterialParams,
    pub process: InletConfig,
    pub discretization: MarchConfig,
    pub sampling: SamplingPlan,
    pub rom: ReductionConfig,
    pub network: NetworkConfig,
    pub training: TrainConfig,
}

const DESK: &str = include_str!("../configs/desk.json");
const PAPER: &str = include_str!("../configs/paper.json");
const SMOKE: &str = include_str!("../configs/smoke.json");

impl RomConfig {
    pub const PRESETS: [&'static str; 3] = ["desk", "paper", "smoke"];

    /// Named presets shipped with the crate:
    ///
    /// * `desk`: reference dumbbell, extrusion speed raised so the outlet
    ///   Fourier number is about 0.31 and outlet fields still depend on the
    ///   parameters.
    /// * `paper`: the slow reference extrusion speed, which cools the
    ///   profile to ambient long before the outlet.
    /// * `smoke`: coarse grid and tiny network for quick checks.
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "desk" => DESK,
            "paper" => PAPER,
            "smoke" => SMOKE,
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (expected one of {:?})",
                    Self::PRESETS
                )))
            }
        };
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RomConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON file, or a preset when `path` is `preset:<name>`.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("preset:")) {
            return Self::preset(name);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.profile().validate()?;
        self.profile().check_resolution(self.geometry.dx)?;
        self.material.validate()?;
        self.discretization().validate()?;
        self.sampling.validate()?;
        self.training.validate()?;
        if !self.process.t_inlet.is_finite() {
            return Err(Error::Config("t_inlet must be finite".into()));
        }
        if self.rom.modes == 0 {
            return Err(Error::Config("rom.modes must be >= 1".into()));
        }
        if !(self.rom.tol_rank >= 0.0 && self.rom.tol_rank < 1.0) {
            return Err(Error::Config("rom.tol_rank must lie in [0, 1)".into()));
        }
        self.network.layout(2, self.rom.modes).validate()
    }

    pub fn profile(&self) -> ProfileGeometry {
        let g = &self.geometry;
        ProfileGeometry {
            r1: g.r1,
            r2: g.r2,
            h: g.h,
            w: g.w,
            l: g.l,
        }
    }

    pub fn discretization(&self) -> Discretization {
        let d = &self.discretization;
        Discretization {
            dx: self.geometry.dx,
            nz: d.nz,
            z_stride: d.z_stride,
            cg_tol: d.cg_tol,
            cg_max_iter: d.cg_max_iter,
        }
    }

    pub fn full_order_model(&self) -> Result<FullOrderModel> {
        FullOrderModel::new(self.profile(), self.material, self.discretization())
    }
}
