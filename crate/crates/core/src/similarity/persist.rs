//! Versioned little-endian index file.
//!
//! ```text
//! magic "TLNKIDX\0" | version u32 | representation u8 | scheme u8 | measure u8
//! fingerprint [32] | vocabulary digest [32]
//! n_articles u32 | n_features u32 | n_postings u64
//! n_articles × (pmid u64, squared norm f64, features present u32)
//! (n_features + 1) × offset u64
//! n_postings × (slot u32, weight f64)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{InvertedIndex, Measure, MethodConfig};
use crate::error::{Error, Result};
use crate::features::Representation;
use crate::ingest::Pmid;
use crate::weighting::Scheme;

const MAGIC: &[u8; 8] = b"TLNKIDX\0";
pub const INDEX_FORMAT_VERSION: u32 = 1;

fn config_tags(c: MethodConfig) -> [u8; 3] {
    let r = match c.representation {
        Representation::Term => 0,
        Representation::Concept => 1,
    };
    let s = match c.scheme {
        Scheme::Binary => 0,
        Scheme::Tfidf => 1,
    };
    let m = match c.measure {
        Measure::EuclideanNormalized => 0,
        Measure::Jaccard => 1,
        Measure::Cosine => 2,
    };
    [r, s, m]
}

fn config_from_tags(tags: [u8; 3]) -> Result<MethodConfig> {
    let bad = || Error::IndexFormat(format!("unknown config tags {tags:?}"));
    let representation = match tags[0] {
        0 => Representation::Term,
        1 => Representation::Concept,
        _ => return Err(bad()),
    };
    let scheme = match tags[1] {
        0 => Scheme::Binary,
        1 => Scheme::Tfidf,
        _ => return Err(bad()),
    };
    let measure = match tags[2] {
        0 => Measure::EuclideanNormalized,
        1 => Measure::Jaccard,
        2 => Measure::Cosine,
        _ => return Err(bad()),
    };
    MethodConfig::new(representation, scheme, measure)
}

/// Identifies the config together with the vocabulary the weights came from.
pub fn fingerprint(config: MethodConfig, vocab_digest: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"trialink-index");
    h.update(INDEX_FORMAT_VERSION.to_le_bytes());
    h.update(config_tags(config));
    h.update(vocab_digest);
    h.finalize().into()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::IndexFormat("truncated file".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

impl InvertedIndex {
    pub fn fingerprint(&self) -> [u8; 32] {
        fingerprint(self.config, &self.vocab_digest)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::with_capacity(
            64 + self.pmids.len() * 20 + self.post_slots.len() * 12 + self.offsets.len() * 8,
        );
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&INDEX_FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&config_tags(self.config));
        buf.extend_from_slice(&self.fingerprint());
        buf.extend_from_slice(&self.vocab_digest);
        buf.extend_from_slice(&(self.pmids.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.n_features() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.post_slots.len() as u64).to_le_bytes());
        for i in 0..self.pmids.len() {
            buf.extend_from_slice(&self.pmids[i].0.to_le_bytes());
            buf.extend_from_slice(&self.sq_norms[i].to_le_bytes());
            buf.extend_from_slice(&self.n_present[i].to_le_bytes());
        }
        for o in &self.offsets {
            buf.extend_from_slice(&o.to_le_bytes());
        }
        for (s, w) in self.post_slots.iter().zip(&self.post_weights) {
            buf.extend_from_slice(&s.to_le_bytes());
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    /// Reads an index and checks it was built for `expected` over a
    /// vocabulary with digest `vocab_digest` (when given).
    pub fn read_from<R: Read>(
        mut input: R,
        expected: MethodConfig,
        vocab_digest: Option<&[u8; 32]>,
    ) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut c = Cursor {
            buf: &bytes,
            pos: 0,
        };
        if c.take(8)? != MAGIC {
            return Err(Error::IndexFormat("not an index file".into()));
        }
        let version = c.u32()?;
        if version != INDEX_FORMAT_VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let config = config_from_tags([c.u8()?, c.u8()?, c.u8()?])?;
        if config != expected {
            return Err(Error::SpaceMismatch(format!(
                "index was built for {config}, expected {expected}"
            )));
        }
        let stored_fingerprint: [u8; 32] = c.array()?;
        let digest: [u8; 32] = c.array()?;
        if stored_fingerprint != fingerprint(config, &digest) {
            return Err(Error::IndexFormat(
                "fingerprint does not match header".into(),
            ));
        }
        if let Some(want) = vocab_digest {
            if want != &digest {
                return Err(Error::SpaceMismatch(format!(
                    "index for {config} was built over a different vocabulary"
                )));
            }
        }
        let n_articles = c.u32()? as usize;
        let n_features = c.u32()? as usize;
        let n_postings = c.u64()? as usize;
        if bytes.len() - c.pos != n_articles * 20 + (n_features + 1) * 8 + n_postings * 12 {
            return Err(Error::IndexFormat(
                "body length does not match header counts".into(),
            ));
        }
        let mut pmids = Vec::with_capacity(n_articles);
        let mut sq_norms = Vec::with_capacity(n_articles);
        let mut n_present = Vec::with_capacity(n_articles);
        for _ in 0..n_articles {
            pmids.push(Pmid(c.u64()?));
            sq_norms.push(c.f64()?);
            n_present.push(c.u32()?);
        }
        let offsets = (0..=n_features)
            .map(|_| c.u64())
            .collect::<Result<Vec<_>>>()?;
        if offsets.windows(2).any(|w| w[0] > w[1])
            || offsets.last() != Some(&(n_postings as u64))
            || offsets[0] != 0
        {
            return Err(Error::IndexFormat("corrupt posting offsets".into()));
        }
        let mut post_slots = Vec::with_capacity(n_postings);
        let mut post_weights = Vec::with_capacity(n_postings);
        for _ in 0..n_postings {
            let slot = c.u32()?;
            if slot as usize >= n_articles {
                return Err(Error::IndexFormat(format!(
                    "posting slot {slot} out of range"
                )));
            }
            post_slots.push(slot);
            post_weights.push(c.f64()?);
        }
        if pmids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::IndexFormat("article slots not in pmid order".into()));
        }
        Ok(InvertedIndex {
            config,
            vocab_digest: digest,
            pmids,
            sq_norms,
            n_present,
            offsets,
            post_slots,
            post_weights,
        })
    }

    pub fn load(
        path: impl AsRef<Path>,
        expected: MethodConfig,
        vocab_digest: Option<&[u8; 32]>,
    ) -> Result<Self> {
        let file = fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), expected, vocab_digest)
    }
}
