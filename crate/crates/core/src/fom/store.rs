//! Binary snapshot store with a JSON sidecar.
//!
//! Layout of the binary file, all integers and floats little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "SNAP"
//! 4       4           format version (u32)
//! 8       8           N, values per snapshot (u64)
//! 16      8           Ns, number of snapshots (u64)
//! 24      8·N·Ns      Ns column vectors of IEEE-754 f64
//! ```
//!
//! The sidecar `<file>.json` lists per-column process parameters and the
//! provenance hashes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Discretization, FullOrderModel, MaterialParams, ProcessParams};
use crate::geometry::ProfileGeometry;
use crate::linalg::ColMatrix;
use crate::{Error, Result};

pub const STORE_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SNAP";
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub format_version: u32,
    pub label: String,
    pub n: usize,
    pub ns: usize,
    pub geometry_hash: String,
    pub discretization_hash: String,
    pub grid_hash: String,
    pub geometry: ProfileGeometry,
    pub material: MaterialParams,
    pub discretization: Discretization,
    pub created_unix: u64,
    pub generator: String,
    pub columns: Vec<ProcessParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotStore {
    pub meta: StoreMeta,
    /// N × Ns, one snapshot per column.
    pub matrix: ColMatrix,
}

/// Solves the full-order model for every parameter set. Solves fan out over
/// the rayon pool; columns keep the order of `params`.
pub fn generate_store(fom: &FullOrderModel, label: &str, params: &[ProcessParams]) -> Result<SnapshotStore> {
    let fields: Vec<Vec<f64>> = params
        .par_iter()
        .map(|p| fom.solve(p).map(|s| s.values))
        .collect::<Result<_>>()?;
    let n = fom.field_len();
    Ok(SnapshotStore {
        meta: StoreMeta {
            format_version: STORE_FORMAT_VERSION,
            label: label.to_string(),
            n,
            ns: params.len(),
            geometry_hash: fom.geometry.fingerprint(),
            discretization_hash: fom.disc.fingerprint(),
            grid_hash: fom.grid.fingerprint(),
            geometry: fom.geometry,
            material: fom.material,
            discretization: fom.disc,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            generator: concat!("calibrom ", env!("CARGO_PKG_VERSION")).to_string(),
            columns: params.to_vec(),
        },
        matrix: ColMatrix::from_columns(n, &fields),
    })
}

impl SnapshotStore {
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    pub fn params(&self) -> &[ProcessParams] {
        &self.meta.columns
    }

    pub fn len(&self) -> usize {
        self.meta.ns
    }

    pub fn is_empty(&self) -> bool {
        self.meta.ns == 0
    }

    /// Fails unless the store was produced by `fom`'s geometry, grid and discretization.
    pub fn check_provenance(&self, fom: &FullOrderModel) -> Result<()> {
        let pairs = [
            ("geometry", &self.meta.geometry_hash, fom.geometry.fingerprint()),
            (
                "discretization",
                &self.meta.discretization_hash,
                fom.disc.fingerprint(),
            ),
            ("grid", &self.meta.grid_hash, fom.grid.fingerprint()),
        ];
        for (what, found, expected) in pairs {
            if *found != expected {
                return Err(Error::HashMismatch {
                    what,
                    expected,
                    found: found.clone(),
                });
            }
        }
        if self.meta.material != fom.material {
            return Err(Error::Config(format!(
                "snapshot store '{}' was generated with different material parameters",
                self.meta.label
            )));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let (n, ns) = (self.matrix.rows(), self.matrix.cols());
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * ns);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&STORE_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&(ns as u64).to_le_bytes());
        for v in self.matrix.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the binary payload; the returned matrix is `N × Ns`.
    pub fn decode_matrix(bytes: &[u8]) -> Result<ColMatrix> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format("snapshot store is truncated".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("not a snapshot store (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != STORE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported snapshot store version {version}"
            )));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let ns = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let expected = n
            .checked_mul(ns)
            .and_then(|c| c.checked_mul(8))
            .and_then(|c| c.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format("snapshot store header overflows".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "snapshot store has {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ColMatrix::from_col_major(n, ns, data))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.encode()).map_err(|e| Error::io(path, e))?;
        let side = Self::sidecar_path(path);
        let json = serde_json::to_vec_pretty(&self.meta)?;
        fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let matrix = Self::decode_matrix(&bytes)?;
        let side = Self::sidecar_path(path);
        let meta: StoreMeta = serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
        if meta.n != matrix.rows() || meta.ns != matrix.cols() || meta.columns.len() != meta.ns {
            return Err(Error::Format(format!(
                "sidecar {} disagrees with the binary store dimensions",
                side.display()
            )));
        }
        Ok(SnapshotStore { meta, matrix })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_model() -> FullOrderModel {
        FullOrderModel::new(
            ProfileGeometry::dumbbell(),
            MaterialParams {
                u: 0.01,
                ..Default::default()
            },
            Discretization {
                dx: 1e-3,
                nz: 5,
                z_stride: 2,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn params() -> Vec<ProcessParams> {
        (0..3)
            .map(|i| ProcessParams {
                t_ambient: 288.0 + i as f64,
                htc: 220.0 + 30.0 * i as f64,
                t_inlet: 473.0,
            })
            .collect()
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let fom = tiny_model();
        let store = generate_store(&fom, "train", &params()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.snap");
        store.write(&path).unwrap();
        let back = SnapshotStore::read(&path).unwrap();
        assert_eq!(back.meta, store.meta);
        let bits = |m: &ColMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.matrix), bits(&store.matrix));
        back.check_provenance(&fom).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SNAP");
        assert_eq!(bytes.len(), 24 + 8 * store.meta.n * store.meta.ns);
    }

    #[test]
    fn columns_follow_parameter_order() {
        let fom = tiny_model();
        let ps = params();
        let store = generate_store(&fom, "x", &ps).unwrap();
        for (j, p) in ps.iter().enumerate() {
            assert_eq!(store.matrix.col(j), fom.solve(p).unwrap().values.as_slice());
        }
    }

    #[test]
    fn provenance_mismatch_is_detected() {
        let fom = tiny_model();
        let store = generate_store(&fom, "x", &params()[..1]).unwrap();
        let mut other = fom.clone();
        other.disc.cg_tol = 1e-9;
        assert!(matches!(
            store.check_provenance(&other),
            Err(Error::HashMismatch {
                what: "discretization",
                ..
            })
        ));
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let m = ColMatrix::from_col_major(2, 1, vec![1.0, 2.0]);
        let store_bytes = {
            let mut b = b"SNAP".to_vec();
            b.extend_from_slice(&1u32.to_le_bytes());
            b.extend_from_slice(&2u64.to_le_bytes());
            b.extend_from_slice(&1u64.to_le_bytes());
            b.extend_from_slice(&1.0f64.to_le_bytes());
            b.extend_from_slice(&2.0f64.to_le_bytes());
            b
        };
        assert_eq!(SnapshotStore::decode_matrix(&store_bytes).unwrap(), m);
        let mut bad = store_bytes.clone();
        bad[0] = b'X';
        assert!(SnapshotStore::decode_matrix(&bad).is_err());
        assert!(SnapshotStore::decode_matrix(&store_bytes[..30]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_preserves_bits(
            n in 1usize..6,
            ns in 1usize..5,
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::Rng::new(seed);
            let data: Vec<f64> = (0..n * ns)
                .map(|_| f64::from_bits(rng.next_u64()))
                .map(|v| if v.is_nan() { 0.5 } else { v })
                .collect();
            let store = SnapshotStore {
                meta: StoreMeta {
                    format_version: STORE_FORMAT_VERSION,
                    label: String::new(),
                    n,
                    ns,
                    geometry_hash: String::new(),
                    discretization_hash: String::new(),
                    grid_hash: String::new(),
                    geometry: ProfileGeometry::dumbbell(),
                    material: MaterialParams::default(),
                    discretization: Discretization::default(),
                    created_unix: 0,
                    generator: String::new(),
                    columns: vec![],
                },
                matrix: ColMatrix::from_col_major(n, ns, data),
            };
            let back = SnapshotStore::decode_matrix(&store.encode()).unwrap();
            let a: Vec<u64> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = store.matrix.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
