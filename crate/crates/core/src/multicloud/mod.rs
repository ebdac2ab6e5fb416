//! Independently encrypted replicas across several storage providers.
//!
//! Every cloud gets its own randomly drawn key, pattern and cell seed, so the
//! stored containers differ while decrypting to the same image. A client-side
//! [`StoreManifest`] records where each replica lives; retrieval walks the
//! replicas in order and returns the first one that verifies.

mod backend;
mod manifest;

pub use backend::{
    parse_cloud_config, BackendDescriptor, BackendKind, HttpStore, LocalDirStore, ObjectStore,
    HTTP_TIMEOUT,
};
pub use manifest::{AbsentReplica, Replica, StoreManifest, MANIFEST_MAGIC};

use std::sync::Arc;
use std::thread;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::cipher::{self, CellSeed, CipherContainer, EncryptOptions};
use crate::error::{Error, Result};
use crate::keystore::{KeyIndex, KeyProvider};
use crate::scramble::{PatternId, PATTERN_COUNT};

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

struct Plan {
    index: Arc<KeyIndex>,
    pattern: PatternId,
    seed: CellSeed,
}

/// Encrypts `pixels` once per cloud with an independent (key, pattern, seed)
/// draw and uploads each container under its content hash. Clouds that fail
/// are listed as absent in the manifest; `opts.seed` is ignored since every
/// replica needs its own randomness.
#[allow(clippy::too_many_arguments)]
pub fn store_replicated<R: Rng + ?Sized>(
    pixels: &[u8],
    width: usize,
    height: usize,
    image_name: &str,
    clouds: &[BackendDescriptor],
    keys: &dyn KeyProvider,
    rng: &mut R,
    opts: &EncryptOptions,
) -> Result<StoreManifest> {
    if clouds.is_empty() {
        return Err(Error::Config("no clouds configured".into()));
    }
    let candidates = complete_keys(keys)?;
    let plans: Vec<Plan> = clouds
        .iter()
        .map(|_| {
            let mut seed = [0u8; 32];
            rng.fill(&mut seed);
            Plan {
                index: Arc::clone(&candidates[rng.random_range(0..candidates.len())]),
                pattern: PatternId::new(rng.random_range(0..PATTERN_COUNT)).expect("in range"),
                seed,
            }
        })
        .collect();

    let opts = EncryptOptions { seed: None, ..*opts };
    let results: Vec<Result<Replica>> = thread::scope(|s| {
        let handles: Vec<_> = clouds
            .iter()
            .zip(&plans)
            .map(|(cloud, plan)| s.spawn(move || upload_one(pixels, width, height, cloud, plan, &opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Unavailable("upload worker panicked".into()))))
            .collect()
    });

    let mut replicas = Vec::new();
    let mut absent = Vec::new();
    for (cloud, result) in clouds.iter().zip(results) {
        match result {
            Ok(r) => replicas.push(r),
            Err(e) => absent.push(AbsentReplica {
                cloud_id: cloud.cloud_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if replicas.is_empty() {
        let reasons: Vec<String> = absent.iter().map(|a| format!("{}: {}", a.cloud_id, a.reason)).collect();
        return Err(Error::AllBackendsFailed(reasons.join("; ")));
    }
    Ok(StoreManifest {
        image_name: image_name.to_string(),
        width,
        height,
        plaintext_sha256: sha256(pixels),
        replicas,
        absent,
    })
}

fn complete_keys(keys: &dyn KeyProvider) -> Result<Vec<Arc<KeyIndex>>> {
    let mut out = Vec::new();
    for id in keys.key_ids() {
        let idx = keys.key_index(id)?;
        if idx.is_complete() {
            out.push(idx);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no complete key available (every key lacks some quadruple)".into()));
    }
    Ok(out)
}

fn upload_one(
    pixels: &[u8],
    width: usize,
    height: usize,
    cloud: &BackendDescriptor,
    plan: &Plan,
    opts: &EncryptOptions,
) -> Result<Replica> {
    let container = cipher::encrypt_with_seed(pixels, width, height, &plan.index, plan.pattern, &plan.seed, opts)?;
    let bytes = container.serialize()?;
    let digest = sha256(&bytes);
    let object_id = hex::encode(digest);
    cloud.open()?.put(&object_id, &bytes)?;
    Ok(Replica {
        cloud_id: cloud.cloud_id.clone(),
        object_id,
        key_id: plan.index.key_id(),
        pattern: plan.pattern,
        container_sha256: digest,
    })
}

/// A successfully verified replica.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retrieved {
    pub pixels: Vec<u8>,
    pub cloud_id: String,
    pub container: CipherContainer,
}

/// Tries replicas in manifest order; the first that downloads, matches its
/// container hash, decrypts, and matches the plaintext hash wins.
pub fn retrieve(
    manifest: &StoreManifest,
    clouds: &[BackendDescriptor],
    keys: &dyn KeyProvider,
) -> Result<Retrieved> {
    if clouds.is_empty() {
        return Err(Error::Config("no clouds configured".into()));
    }
    let mut unavailable = Vec::new();
    let mut corrupt = Vec::new();
    for replica in &manifest.replicas {
        let Some(cloud) = clouds.iter().find(|c| c.cloud_id == replica.cloud_id) else {
            unavailable.push(format!("{}: not in cloud config", replica.cloud_id));
            continue;
        };
        let bytes = match cloud.open().and_then(|store| store.get(&replica.object_id)) {
            Ok(b) => b,
            Err(e) => {
                unavailable.push(format!("{}: {e}", replica.cloud_id));
                continue;
            }
        };
        match verify(manifest, replica, &bytes, keys) {
            Ok((pixels, container)) => {
                return Ok(Retrieved {
                    pixels,
                    cloud_id: replica.cloud_id.clone(),
                    container,
                })
            }
            Err(e) => corrupt.push(format!("{}: {e}", replica.cloud_id)),
        }
    }
    if corrupt.is_empty() {
        Err(Error::AllReplicasUnavailable(unavailable.join("; ")))
    } else {
        corrupt.extend(unavailable);
        Err(Error::IntegrityFailure(corrupt.join("; ")))
    }
}

fn verify(
    manifest: &StoreManifest,
    replica: &Replica,
    bytes: &[u8],
    keys: &dyn KeyProvider,
) -> Result<(Vec<u8>, CipherContainer)> {
    if sha256(bytes) != replica.container_sha256 {
        return Err(Error::MalformedContainer("container hash does not match manifest".into()));
    }
    let container = CipherContainer::deserialize(bytes)?;
    if (container.width as usize, container.height as usize) != (manifest.width, manifest.height) {
        return Err(Error::MalformedContainer("dimensions differ from manifest".into()));
    }
    let pixels = cipher::decrypt(&container, keys)?;
    if sha256(&pixels) != manifest.plaintext_sha256 {
        return Err(Error::MalformedContainer("plaintext hash does not match manifest".into()));
    }
    Ok((pixels, container))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keystore::{random_key, KeyRing};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring(n: u16) -> KeyRing {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        (0..n)
            .map(|id| KeyIndex::build(random_key(id, 20_000, &mut rng).unwrap()))
            .collect()
    }

    fn clouds(root: &std::path::Path, n: usize) -> Vec<BackendDescriptor> {
        (0..n)
            .map(|i| {
                let dir = root.join(format!("cloud{i}"));
                std::fs::create_dir_all(&dir).unwrap();
                BackendDescriptor::local(format!("c{i}"), dir)
            })
            .collect()
    }

    #[test]
    fn single_cloud() {
        let tmp = tempfile::tempdir().unwrap();
        let keys = ring(1);
        let cl = clouds(tmp.path(), 1);
        let pixels: Vec<u8> = (0..64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = store_replicated(&pixels, 8, 8, "img", &cl, &keys, &mut rng, &EncryptOptions::default()).unwrap();
        assert_eq!(m.replicas.len(), 1);
        assert_eq!(m.replicas[0].object_id, hex::encode(m.replicas[0].container_sha256));
        let got = retrieve(&m, &cl, &keys).unwrap();
        assert_eq!(got.pixels, pixels);
        assert_eq!(got.cloud_id, "c0");
    }

    #[test]
    fn partial_and_total_failure() {
        let tmp = tempfile::tempdir().unwrap();
        let keys = ring(2);
        let mut cl = clouds(tmp.path(), 2);
        cl.push(BackendDescriptor::local("down", tmp.path().join("missing")));
        let pixels = vec![9u8; 100];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let opts = EncryptOptions::default();
        let m = store_replicated(&pixels, 10, 10, "img", &cl, &keys, &mut rng, &opts).unwrap();
        assert_eq!(m.replicas.len(), 2);
        assert_eq!(m.absent.len(), 1);
        assert_eq!(m.absent[0].cloud_id, "down");

        let all_down = vec![BackendDescriptor::local("x", tmp.path().join("nope"))];
        assert!(matches!(
            store_replicated(&pixels, 10, 10, "img", &all_down, &keys, &mut rng, &opts),
            Err(Error::AllBackendsFailed(_))
        ));
        assert!(matches!(
            retrieve(&m, &all_down, &keys),
            Err(Error::AllReplicasUnavailable(_))
        ));
        assert!(matches!(retrieve(&m, &[], &keys), Err(Error::Config(_))));
    }

    #[test]
    fn needs_a_complete_key() {
        let tmp = tempfile::tempdir().unwrap();
        let keys: KeyRing = [KeyIndex::build(crate::keystore::ingest_fasta("ACGTACGT").unwrap())]
            .into_iter()
            .collect();
        let cl = clouds(tmp.path(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(store_replicated(&[1; 4], 2, 2, "i", &cl, &keys, &mut rng, &EncryptOptions::default()).is_err());
    }
}
