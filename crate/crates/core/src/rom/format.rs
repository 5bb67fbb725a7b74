//! Bundle file layout. All integers and floats are little-endian.
//!
//! ```text
//! "ROMB"  u32 version  u32 section count
//! per section: 4-byte tag, u64 payload length, payload
//!   META  UTF-8 JSON of BundleMeta plus the payload hash
//!   BASE  u64 N, u64 L, u64 M; mean[N], modes[N·L] column-major,
//!         singular values[L], energy spectrum[M], f64 trace
//!   SCAL  u64 d; min[d], max[d]
//!   NETW  u64 layers, u64 dims[layers + 1], u64 seed, then per layer the
//!         row-major out × in weights followed by the out biases
//! ```
//!
//! NETW is absent for a mean-only bundle. META carries a fingerprint of the
//! binary sections, checked on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BundleMeta, RomBundle};
use crate::hash::Fingerprint;
use crate::linalg::ColMatrix;
use crate::neural::{Mlp, MlpLayout};
use crate::reduction::{ParamScaler, ReducedBasis};
use crate::{Error, Result};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"ROMB";

#[derive(Serialize, Deserialize)]
struct MetaSection {
    #[serde(flatten)]
    meta: BundleMeta,
    payload_hash: String,
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Decoder<'a> {
    bytes: &'a [u8],
    what: &'static str,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format(format!("{} section is truncated", self.what)));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        // Any honest length fits in the remaining bytes; this also rejects
        // absurd values before they reach an allocation.
        if v > self.bytes.len() as u64 * 8 + 8 {
            return Err(Error::Format(format!(
                "{} section declares an impossible length {v}",
                self.what
            )));
        }
        Ok(v as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("length overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} section has trailing bytes", self.what)))
        }
    }
}

fn encode_basis(b: &ReducedBasis) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    e.u64(b.n() as u64);
    e.u64(b.len() as u64);
    e.u64(b.energy_spectrum.len() as u64);
    e.f64s(&b.mean_field);
    e.f64s(b.modes.as_slice());
    e.f64s(&b.singular_values);
    e.f64s(&b.energy_spectrum);
    e.f64s(&[b.total_energy]);
    e.0
}

fn encode_scaler(s: &ParamScaler) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    e.u64(s.dim() as u64);
    e.f64s(&s.min);
    e.f64s(&s.max);
    e.0
}

fn encode_network(net: &Mlp) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    let dims = net.layout().dims();
    e.u64(net.n_layers() as u64);
    for d in &dims {
        e.u64(*d as u64);
    }
    e.u64(net.seed);
    e.f64s(net.params());
    e.0
}

fn payload_hash(sections: &[(&[u8; 4], Vec<u8>)]) -> String {
    let mut f = Fingerprint::new("calibrom/bundle-payload/v1");
    for (tag, body) in sections {
        f.bytes(&tag[..]);
        f.u64(body.len() as u64);
        f.bytes(body);
    }
    f.finish()
}

impl RomBundle {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut binary: Vec<(&[u8; 4], Vec<u8>)> = vec![
            (b"BASE", encode_basis(&self.basis)),
            (b"SCAL", encode_scaler(&self.basis.param_scaler)),
        ];
        if let Some(net) = &self.network {
            binary.push((b"NETW", encode_network(net)));
        }
        let meta = MetaSection {
            meta: self.meta.clone(),
            payload_hash: payload_hash(&binary),
        };
        let meta_json = serde_json::to_vec(&meta).expect("bundle metadata serialises");

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&BUNDLE_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(binary.len() as u32 + 1).to_le_bytes());
        for (tag, body) in std::iter::once((b"META", meta_json)).chain(binary) {
            out.extend_from_slice(tag);
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a bundle file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "bundle format version {version} is not supported (expected {BUNDLE_FORMAT_VERSION})"
            )));
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        let mut d = Decoder {
            bytes: &bytes[12..],
            what: "bundle",
        };
        let mut meta = None;
        let mut binary: Vec<(&[u8; 4], Vec<u8>)> = Vec::new();
        for _ in 0..count {
            let tag: [u8; 4] = d.take(4)?.try_into().expect("4 bytes");
            let len = d.u64()?;
            let body =
                d.take(usize::try_from(len).map_err(|_| Error::Format("section too large".into()))?)?;
            match &tag {
                b"META" => {
                    meta = Some(
                        serde_json::from_slice::<MetaSection>(body)
                            .map_err(|e| Error::Format(format!("bundle metadata: {e}")))?,
                    )
                }
                b"BASE" => binary.push((b"BASE", body.to_vec())),
                b"SCAL" => binary.push((b"SCAL", body.to_vec())),
                b"NETW" => binary.push((b"NETW", body.to_vec())),
                other => {
                    return Err(Error::Format(format!(
                        "unknown bundle section {:?}",
                        String::from_utf8_lossy(other)
                    )))
                }
            }
        }
        d.finish()?;
        let meta = meta.ok_or_else(|| Error::Format("bundle has no META section".into()))?;
        let found = payload_hash(&binary);
        if found != meta.payload_hash {
            return Err(Error::HashMismatch {
                what: "bundle payload",
                expected: meta.payload_hash,
                found,
            });
        }
        let section = |tag: &[u8; 4]| binary.iter().find(|(t, _)| *t == tag).map(|(_, b)| b.as_slice());

        let mut d = Decoder {
            bytes: section(b"BASE").ok_or_else(|| Error::Format("bundle has no BASE section".into()))?,
            what: "BASE",
        };
        let (n, l, m) = (d.len()?, d.len()?, d.len()?);
        let mean_field = d.f64s(n)?;
        let modes = ColMatrix::from_col_major(
            n,
            l,
            d.f64s(
                n.checked_mul(l)
                    .ok_or_else(|| Error::Format("length overflow".into()))?,
            )?,
        );
        let singular_values = d.f64s(l)?;
        let energy_spectrum = d.f64s(m)?;
        let total_energy = d.f64s(1)?[0];
        d.finish()?;

        let mut d = Decoder {
            bytes: section(b"SCAL").ok_or_else(|| Error::Format("bundle has no SCAL section".into()))?,
            what: "SCAL",
        };
        let dim = d.len()?;
        let param_scaler = ParamScaler::new(d.f64s(dim)?, d.f64s(dim)?)?;
        d.finish()?;

        let network = match section(b"NETW") {
            None => None,
            Some(body) => {
                let mut d = Decoder {
                    bytes: body,
                    what: "NETW",
                };
                let layers = d.len()?;
                let dims = (0..=layers).map(|_| d.len()).collect::<Result<Vec<_>>>()?;
                let seed = d.u64()?;
                if layers == 0 || dims[1..layers].iter().any(|&w| w != dims[1]) {
                    return Err(Error::Format("network layers must share one hidden width".into()));
                }
                let layout = MlpLayout {
                    input_dim: dims[0],
                    hidden_layers: layers - 1,
                    hidden_width: if layers > 1 { dims[1] } else { 0 },
                    output_dim: dims[layers],
                };
                let params = d.f64s(layout.param_count())?;
                d.finish()?;
                Some(Mlp::from_params(layout, params, seed)?)
            }
        };

        let basis = ReducedBasis {
            mean_field,
            modes,
            singular_values,
            param_scaler,
            energy_spectrum,
            total_energy,
            truncation: meta.meta.truncation,
        };
        RomBundle::assemble(meta.meta, basis, network)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
