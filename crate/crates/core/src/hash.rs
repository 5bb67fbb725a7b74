//! Provenance hashes tying snapshot stores and bundles to the configuration
//! that produced them.

use sha2::{Digest, Sha256};

/// Accumulates little-endian bytes of scalars and hashes them with SHA-256.
#[derive(Default)]
pub struct Fingerprint(Sha256);

impl Fingerprint {
    pub fn new(domain: &str) -> Self {
        let mut f = Fingerprint(Sha256::new());
        f.bytes(domain.as_bytes());
        f
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.u64(b.len() as u64);
        self.0.update(b);
        self
    }

    /// First 16 bytes of the digest as lowercase hex.
    pub fn finish(self) -> String {
        let digest = self.0.finalize();
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}
