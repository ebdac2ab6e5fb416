//! Tab-separated manifest text format:
//!
//! ```text
//! DVLT-MANIFEST  1  <image_name>  <width>  <height>  <plaintext_sha256>
//! replica  <cloud_id>  <object_id>  <key_id>  <pattern>  <container_sha256>
//! absent   <cloud_id>  <reason>
//! ```
//!
//! Digests are lowercase hex. Replica lines keep upload order, which is
//! also the retrieval order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scramble::PatternId;

pub const MANIFEST_MAGIC: &str = "DVLT-MANIFEST";
const MANIFEST_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replica {
    pub cloud_id: String,
    pub object_id: String,
    pub key_id: u16,
    pub pattern: PatternId,
    pub container_sha256: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbsentReplica {
    pub cloud_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreManifest {
    pub image_name: String,
    pub width: usize,
    pub height: usize,
    pub plaintext_sha256: [u8; 32],
    pub replicas: Vec<Replica>,
    pub absent: Vec<AbsentReplica>,
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn digest(field: &str) -> Result<[u8; 32]> {
    let mut out = [0u8; 32];
    hex::decode_to_slice(field, &mut out)
        .map_err(|_| Error::Config(format!("manifest: bad sha256 {field:?}")))?;
    Ok(out)
}

impl StoreManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MANIFEST_MAGIC}\t{MANIFEST_VERSION}\t{}\t{}\t{}\t{}\n",
            clean(&self.image_name),
            self.width,
            self.height,
            hex::encode(self.plaintext_sha256)
        );
        for r in &self.replicas {
            out.push_str(&format!(
                "replica\t{}\t{}\t{}\t{}\t{}\n",
                clean(&r.cloud_id),
                r.object_id,
                r.key_id,
                r.pattern.id(),
                hex::encode(r.container_sha256)
            ));
        }
        for a in &self.absent {
            out.push_str(&format!("absent\t{}\t{}\n", clean(&a.cloud_id), clean(&a.reason)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<StoreManifest> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |m: String| Error::Config(format!("manifest: {m}"));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty".into()))?
            .split('\t')
            .collect();
        if header.len() != 6 || header[0] != MANIFEST_MAGIC {
            return Err(bad("missing header line".into()));
        }
        if header[1] != MANIFEST_VERSION {
            return Err(bad(format!("unsupported version {}", header[1])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number {s:?}")));
        let mut m = StoreManifest {
            image_name: header[2].to_string(),
            width: num(header[3])?,
            height: num(header[4])?,
            plaintext_sha256: digest(header[5])?,
            replicas: Vec::new(),
            absent: Vec::new(),
        };
        for line in lines {
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["replica", cloud, object, key, pattern, sha] => {
                    let key_id = key.parse().map_err(|_| bad(format!("bad key id {key:?}")))?;
                    let pattern = pattern
                        .parse::<u8>()
                        .map_err(|_| bad(format!("bad pattern {pattern:?}")))
                        .and_then(PatternId::new)?;
                    m.replicas.push(Replica {
                        cloud_id: cloud.to_string(),
                        object_id: object.to_string(),
                        key_id,
                        pattern,
                        container_sha256: digest(sha)?,
                    });
                }
                ["absent", cloud, reason] => m.absent.push(AbsentReplica {
                    cloud_id: cloud.to_string(),
                    reason: reason.to_string(),
                }),
                _ => return Err(bad(format!("unrecognized line {line:?}"))),
            }
        }
        if m.replicas.is_empty() {
            return Err(bad("no replicas".into()));
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<StoreManifest> {
        StoreManifest::parse(&fs::read_to_string(path).map_err(Error::at(path))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(Error::at(path))
    }
}
