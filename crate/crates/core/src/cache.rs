//! Content-addressed artifact cache. Keys are SHA-256 digests of the canonical JSON of
//! whatever determines the artifact (grid, phase, potential, τ, ...).

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
}

pub fn content_key(kind: &str, inputs: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update([0u8]);
    h.update(serde_json::to_vec(inputs).expect("cache inputs serialize"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Cache {
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir) })
    }

    fn path(&self, kind: &str, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{kind}-{key}.json")))
    }

    pub fn get<T: DeserializeOwned>(&self, kind: &str, inputs: &impl Serialize) -> Option<T> {
        let p = self.path(kind, &content_key(kind, inputs))?;
        let text = std::fs::read_to_string(p).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put<T: Serialize>(&self, kind: &str, inputs: &impl Serialize, value: &T) -> Result<()> {
        if let Some(p) = self.path(kind, &content_key(kind, inputs)) {
            let tmp = p.with_extension("tmp");
            std::fs::write(&tmp, serde_json::to_vec(value)?)?;
            std::fs::rename(tmp, p)?;
        }
        Ok(())
    }

    /// Cached value, or `make()` stored under the key.
    pub fn get_or<T: Serialize + DeserializeOwned>(
        &self,
        kind: &str,
        inputs: &impl Serialize,
        make: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        if let Some(v) = self.get(kind, inputs) {
            return Ok(v);
        }
        let v = make()?;
        self.put(kind, inputs, &v)?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::at(dir.path()).unwrap();
        let v = vec![0.1f64, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300];
        let mut calls = 0;
        let a: Vec<f64> = c.get_or("x", &("k", 1), || { calls += 1; Ok(v.clone()) }).unwrap();
        let b: Vec<f64> = c.get_or("x", &("k", 1), || { calls += 1; Ok(vec![]) }).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(a, b);
        assert!(a.iter().zip(&v).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(content_key("x", &1), content_key("x", &2));
    }
}
