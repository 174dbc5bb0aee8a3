//! On-disk oracle bundles.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "FTORACLE"  format u32
//! section*: tag [u8; 4]  version u32  len u64  payload
//! ```
//!
//! Sections are `HEAD` (parameters and graph digest) and `ORCL` (the oracle).
//! Unknown sections are skipped, so new sections do not break old readers.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{OracleError, Result};
use crate::general::GeneralOracle;
use crate::graph::{write_graph, GeoGraph};
use crate::kernel::KernelConfig;

const MAGIC: &[u8; 8] = b"FTORACLE";
pub const FORMAT_VERSION: u32 = 1;
const HEAD: [u8; 4] = *b"HEAD";
const HEAD_VERSION: u32 = 1;
const ORCL: [u8; 4] = *b"ORCL";
const ORCL_VERSION: u32 = 1;

/// SHA-256 of the canonical text rendering of `g`, hex encoded.
pub fn graph_digest(g: &GeoGraph) -> String {
    hex::encode(Sha256::digest(write_graph(g).as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub digest: String,
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub f: usize,
    pub eps_user: f64,
    pub eps_int: f64,
    pub config: KernelConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleBundle {
    pub header: BundleHeader,
    pub oracle: GeneralOracle,
}

fn bad(msg: impl Into<String>) -> OracleError {
    OracleError::Bundle(msg.into())
}

fn write_section(out: &mut Vec<u8>, tag: [u8; 4], version: u32, payload: &[u8]) {
    out.extend_from_slice(&tag);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn take<'a>(bytes: &mut &'a [u8], k: usize) -> Result<&'a [u8]> {
    if bytes.len() < k {
        return Err(bad("truncated bundle"));
    }
    let (head, rest) = bytes.split_at(k);
    *bytes = rest;
    Ok(head)
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

impl OracleBundle {
    pub fn build(g: &GeoGraph, eps_user: f64, config: KernelConfig) -> Result<Self> {
        let oracle = GeneralOracle::build(g, eps_user, config)?;
        let header = BundleHeader {
            digest: graph_digest(g),
            n: g.n(),
            m: g.m(),
            t: g.params.t,
            f: g.params.f,
            eps_user,
            eps_int: oracle.eps_int,
            config,
        };
        Ok(Self { header, oracle })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let enc = |e: bincode::Error| bad(format!("encode: {e}"));
        let head = bincode::serialize(&self.header).map_err(enc)?;
        let body = bincode::serialize(&self.oracle).map_err(enc)?;
        let mut out = Vec::with_capacity(body.len() + head.len() + 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        write_section(&mut out, HEAD, HEAD_VERSION, &head);
        write_section(&mut out, ORCL, ORCL_VERSION, &body);
        Ok(out)
    }

    /// Decodes a bundle and checks that its embedded graph matches its digest.
    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        if take(&mut bytes, 8)? != MAGIC {
            return Err(bad("not an oracle bundle"));
        }
        let format = le_u32(take(&mut bytes, 4)?);
        if format != FORMAT_VERSION {
            return Err(bad(format!("format version {format}, expected {FORMAT_VERSION}")));
        }
        let (mut header, mut oracle) = (None, None);
        while !bytes.is_empty() {
            let tag: [u8; 4] = take(&mut bytes, 4)?.try_into().expect("4 bytes");
            let version = le_u32(take(&mut bytes, 4)?);
            let len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes"));
            let payload = take(&mut bytes, usize::try_from(len).map_err(|_| bad("section too large"))?)?;
            let dec = |e: bincode::Error| bad(format!("section {}: {e}", String::from_utf8_lossy(&tag)));
            let want = |expected: u32| {
                if version == expected {
                    Ok(())
                } else {
                    Err(bad(format!(
                        "section {} version {version}, expected {expected}",
                        String::from_utf8_lossy(&tag)
                    )))
                }
            };
            match tag {
                HEAD => {
                    want(HEAD_VERSION)?;
                    header = Some(bincode::deserialize::<BundleHeader>(payload).map_err(dec)?);
                }
                ORCL => {
                    want(ORCL_VERSION)?;
                    oracle = Some(bincode::deserialize::<GeneralOracle>(payload).map_err(dec)?);
                }
                _ => {}
            }
        }
        let header = header.ok_or_else(|| bad("missing HEAD section"))?;
        let oracle = oracle.ok_or_else(|| bad("missing ORCL section"))?;
        if graph_digest(&oracle.graph) != header.digest {
            return Err(bad("embedded graph does not match the bundle digest"));
        }
        Ok(Self { header, oracle })
    }

    /// Refuses a bundle built for a different graph.
    pub fn check_graph(&self, g: &GeoGraph) -> Result<()> {
        let d = graph_digest(g);
        if d != self.header.digest {
            return Err(bad(format!("graph digest {d} does not match bundle digest {}", self.header.digest)));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}
