//! Non-intrusive reduced-order modelling of the temperature field in a
//! cooling extruded plastic profile.
//!
//! The offline stage generates full-order snapshots ([`fom`]), compresses
//! them with a proper orthogonal decomposition computed by the method of
//! snapshots ([`reduction`]) and fits a tanh feedforward network from process
//! parameters to reduced coefficients ([`neural`]). Everything needed online
//! is packed into a [`rom::RomBundle`], which predicts full temperature fields
//! for unseen `(ambient temperature, heat-transfer coefficient)` pairs in well
//! under a millisecond. [`interface`] wraps both stages in a CLI and an HTTP
//! service.
//!
//! ```text
//! geometry ──► fom ──► SnapshotStore ──► reduction ──► neural ──► RomBundle ──► predict / serve
//! ```

pub mod config;
pub mod error;
pub mod fom;
pub mod geometry;
pub mod hash;
pub mod interface;
pub mod linalg;
pub mod neural;
pub mod reduction;
pub mod rng;
pub mod rom;

pub use config::RomConfig;
pub use error::{Error, Result};
pub use fom::{Discretization, MaterialParams, ProcessParams, Snapshot};
pub use geometry::{ProfileGeometry, RegionMasks, VoxelGrid};
pub use neural::{Mlp, MlpLayout, TrainConfig};
pub use reduction::{ReducedBasis, ReducedCoefficients, SnapshotMatrix};
pub use rom::{PredictionResult, RomBundle};
