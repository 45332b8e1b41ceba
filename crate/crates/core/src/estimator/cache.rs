//! Frozen-point target cache with the cross-epoch running average.
//!
//! Binary layout: one ASCII header line `WOSNO-CACHE 1 <provenance>\n`, then
//! little-endian records. Each record stores the exact-sum partials so that
//! reloading and continuing reproduces the one-pass mean bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use super::{ExactSum, PointEstimate};
use crate::error::{Error, Result};

/// `(instance id, point index)`
pub type CacheKey = (u32, u32);

const MAGIC: &str = "WOSNO-CACHE";
const FORMAT_VERSION: u32 = 1;

/// `Ŷ_k = ((k−1)/k)·Ŷ_{k−1} + (1/k)·Y_fresh`.
///
/// Equal-weight running mean over epochs; [`EstimateCache`] keeps exact sums
/// instead and agrees with this up to round-off.
pub fn running_average(prev: f64, fresh: f64, k: u64) -> f64 {
    assert!(k >= 1, "epoch counter starts at 1");
    let k = k as f64;
    (k - 1.0) / k * prev + fresh / k
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateCache {
    entries: BTreeMap<CacheKey, PointEstimate>,
    epoch: u64,
}

impl EstimateCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cache with empty estimates for the given keys.
    pub fn with_keys<I: IntoIterator<Item = CacheKey>>(keys: I) -> Self {
        let mut c = Self::new();
        c.register(keys);
        c
    }

    /// Adds keys that are not yet present.
    pub fn register<I: IntoIterator<Item = CacheKey>>(&mut self, keys: I) {
        for k in keys {
            self.entries.entry(k).or_default();
        }
    }

    /// Folds one epoch of fresh estimates into the cache.
    ///
    /// Every fresh key must already be registered; on mismatch nothing is
    /// modified.
    pub fn update(&mut self, fresh: &[(CacheKey, PointEstimate)]) -> Result<()> {
        if let Some((k, _)) = fresh.iter().find(|(k, _)| !self.entries.contains_key(k)) {
            return Err(Error::CacheShapeMismatch(format!(
                "key (instance {}, point {}) is not in the cache",
                k.0, k.1
            )));
        }
        for (k, e) in fresh {
            self.entries.get_mut(k).expect("checked above").merge(e);
        }
        self.epoch += 1;
        Ok(())
    }

    pub fn get(&self, key: CacheKey) -> Option<&PointEstimate> {
        self.entries.get(&key)
    }

    /// Current regression target for `key`.
    pub fn target(&self, key: CacheKey) -> Option<f64> {
        self.get(key).map(PointEstimate::mean)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CacheKey, &PointEstimate)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of updates applied so far.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn write_to<W: Write>(&self, mut w: W, provenance: &str) -> Result<()> {
        if provenance.contains('\n') {
            return Err(Error::Format("provenance must be a single line".into()));
        }
        writeln!(w, "{MAGIC} {FORMAT_VERSION} {provenance}")?;
        w.write_all(&self.epoch.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for (&(inst, pt), e) in &self.entries {
            w.write_all(&inst.to_le_bytes())?;
            w.write_all(&pt.to_le_bytes())?;
            w.write_all(&e.n_samples().to_le_bytes())?;
            w.write_all(&e.truncated().to_le_bytes())?;
            w.write_all(&e.running_mean().to_le_bytes())?;
            w.write_all(&e.m2().to_le_bytes())?;
            let partials = e.exact_sum().partials();
            w.write_all(&(partials.len() as u32).to_le_bytes())?;
            for p in partials {
                w.write_all(&p.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a cache; returns it with the provenance text of the header.
    pub fn read_from<R: BufRead>(mut r: R) -> Result<(Self, String)> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let line = line.trim_end_matches('\n');
        let mut parts = line.splitn(3, ' ');
        if parts.next() != Some(MAGIC) {
            return Err(Error::Format("not a cache file".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format("missing cache version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported cache version {version}"
            )));
        }
        let provenance = parts.next().unwrap_or("").to_string();
        let epoch = read_u64(&mut r)?;
        let count = read_u64(&mut r)?;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let inst = read_u32(&mut r)?;
            let pt = read_u32(&mut r)?;
            let n = read_u64(&mut r)?;
            let truncated = read_u64(&mut r)?;
            let running_mean = f64::from_bits(read_u64(&mut r)?);
            let m2 = f64::from_bits(read_u64(&mut r)?);
            let np = read_u32(&mut r)? as usize;
            let partials = (0..np)
                .map(|_| read_u64(&mut r).map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            let e = PointEstimate::from_parts(
                ExactSum::from_partials(partials),
                running_mean,
                m2,
                n,
                truncated,
            );
            if entries.insert((inst, pt), e).is_some() {
                return Err(Error::Format(format!("duplicate cache key ({inst}, {pt})")));
            }
        }
        Ok((Self { entries, epoch }, provenance))
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
