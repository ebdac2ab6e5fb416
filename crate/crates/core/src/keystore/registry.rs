use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::{ingest_fasta, KeyIndex, KeySequence, MAX_KEY_ID};
use crate::error::{Error, Result};

/// Manifest file inside a registry directory.
pub const REGISTRY_MANIFEST: &str = "keys.manifest";

/// Source of key indices addressed by key id.
pub trait KeyProvider {
    /// Registered key ids, ascending.
    fn key_ids(&self) -> Vec<u16>;

    fn key_index(&self, key_id: u16) -> Result<Arc<KeyIndex>>;
}

/// In-memory key set, mostly for tests and embedding.
#[derive(Debug, Default, Clone)]
pub struct KeyRing {
    keys: BTreeMap<u16, Arc<KeyIndex>>,
}

impl KeyRing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: KeyIndex) -> Result<Arc<KeyIndex>> {
        let id = index.key_id();
        if self.keys.contains_key(&id) {
            return Err(Error::DuplicateKeyId(id));
        }
        let index = Arc::new(index);
        self.keys.insert(id, Arc::clone(&index));
        Ok(index)
    }

    pub fn remove(&mut self, key_id: u16) -> Option<Arc<KeyIndex>> {
        self.keys.remove(&key_id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

impl FromIterator<KeyIndex> for KeyRing {
    fn from_iter<I: IntoIterator<Item = KeyIndex>>(iter: I) -> Self {
        KeyRing {
            keys: iter
                .into_iter()
                .map(|k| (k.key_id(), Arc::new(k)))
                .collect(),
        }
    }
}

impl KeyProvider for KeyRing {
    fn key_ids(&self) -> Vec<u16> {
        self.keys.keys().copied().collect()
    }

    fn key_index(&self, key_id: u16) -> Result<Arc<KeyIndex>> {
        self.keys
            .get(&key_id)
            .cloned()
            .ok_or(Error::UnknownKey(key_id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub key_id: u16,
    pub filename: String,
    pub sha256: String,
}

/// A directory of FASTA key files plus a manifest with one line per key:
/// `<key_id> <filename> <sha256-of-bases>`.
#[derive(Debug)]
pub struct KeyRegistry {
    dir: PathBuf,
    entries: Vec<RegistryEntry>,
    cache: Mutex<HashMap<u16, Arc<KeyIndex>>>,
}

impl KeyRegistry {
    /// Opens a registry, creating the directory and an empty manifest if
    /// needed.
    pub fn open(dir: impl AsRef<Path>) -> Result<KeyRegistry> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(Error::at(&dir))?;
        let manifest = dir.join(REGISTRY_MANIFEST);
        let entries = if manifest.exists() {
            let text = fs::read_to_string(&manifest).map_err(Error::at(&manifest))?;
            parse_manifest(&text)?
        } else {
            Vec::new()
        };
        Ok(KeyRegistry {
            dir,
            entries,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Opens an existing registry; fails if there is no manifest.
    pub fn open_existing(dir: impl AsRef<Path>) -> Result<KeyRegistry> {
        let manifest = dir.as_ref().join(REGISTRY_MANIFEST);
        if !manifest.is_file() {
            return Err(Error::Config(format!(
                "{} is not a key registry (missing {REGISTRY_MANIFEST})",
                dir.as_ref().display()
            )));
        }
        Self::open(dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    /// Copies a FASTA file into the registry. Without an explicit id the
    /// next free id above the current maximum is used.
    pub fn add(&mut self, fasta: &Path, key_id: Option<u16>) -> Result<RegistryEntry> {
        let text = fs::read_to_string(fasta).map_err(Error::at(fasta))?;
        let key = ingest_fasta(&text)?;
        let key_id = match key_id {
            Some(id) if id > MAX_KEY_ID => return Err(Error::InvalidKeyId(id as u32)),
            Some(id) if self.entries.iter().any(|e| e.key_id == id) => {
                return Err(Error::DuplicateKeyId(id))
            }
            Some(id) => id,
            None => self.next_id()?,
        };
        let stem = fasta
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("key.fa")
            .replace(char::is_whitespace, "_");
        let filename = format!("{key_id:04}-{stem}");
        let dest = self.dir.join(&filename);
        fs::write(&dest, text).map_err(Error::at(&dest))?;

        let entry = RegistryEntry {
            key_id,
            filename,
            sha256: key.digest_hex(),
        };
        self.entries.push(entry.clone());
        self.entries.sort_by_key(|e| e.key_id);
        self.save()?;
        Ok(entry)
    }

    /// Loads and checks a key without consulting the cache.
    pub fn load_sequence(&self, key_id: u16) -> Result<KeySequence> {
        let entry = self
            .entries
            .iter()
            .find(|e| e.key_id == key_id)
            .ok_or(Error::UnknownKey(key_id))?;
        let path = self.dir.join(&entry.filename);
        let text = fs::read_to_string(&path).map_err(Error::at(&path))?;
        let key = ingest_fasta(&text)?
            .with_id(key_id)?
            .with_source(entry.filename.clone());
        if key.digest_hex() != entry.sha256 {
            return Err(Error::KeyDigestMismatch(key_id));
        }
        Ok(key)
    }

    fn next_id(&self) -> Result<u16> {
        match self.entries.iter().map(|e| e.key_id).max() {
            None => Ok(0),
            Some(MAX_KEY_ID) => (0..=MAX_KEY_ID)
                .find(|id| !self.entries.iter().any(|e| e.key_id == *id))
                .ok_or(Error::InvalidKeyId(MAX_KEY_ID as u32 + 1)),
            Some(max) => Ok(max + 1),
        }
    }

    fn save(&self) -> Result<()> {
        let mut text = String::new();
        for e in &self.entries {
            text.push_str(&format!("{} {} {}\n", e.key_id, e.filename, e.sha256));
        }
        let path = self.dir.join(REGISTRY_MANIFEST);
        let tmp = self.dir.join(format!("{REGISTRY_MANIFEST}.tmp"));
        fs::write(&tmp, text).map_err(Error::at(&tmp))?;
        fs::rename(&tmp, &path).map_err(Error::at(&path))
    }
}

impl KeyProvider for KeyRegistry {
    fn key_ids(&self) -> Vec<u16> {
        self.entries.iter().map(|e| e.key_id).collect()
    }

    fn key_index(&self, key_id: u16) -> Result<Arc<KeyIndex>> {
        if let Some(idx) = self.cache.lock().unwrap().get(&key_id) {
            return Ok(Arc::clone(idx));
        }
        let idx = Arc::new(KeyIndex::build(self.load_sequence(key_id)?));
        self.cache
            .lock()
            .unwrap()
            .insert(key_id, Arc::clone(&idx));
        Ok(idx)
    }
}

fn parse_manifest(text: &str) -> Result<Vec<RegistryEntry>> {
    let mut entries: Vec<RegistryEntry> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Config(format!("{REGISTRY_MANIFEST} line {}: {line:?}", lineno + 1));
        let mut fields = line.split_whitespace();
        let (Some(id), Some(filename), Some(sha256), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad());
        };
        let key_id: u16 = id.parse().map_err(|_| bad())?;
        if key_id > MAX_KEY_ID {
            return Err(Error::InvalidKeyId(key_id as u32));
        }
        if entries.iter().any(|e| e.key_id == key_id) {
            return Err(Error::DuplicateKeyId(key_id));
        }
        entries.push(RegistryEntry {
            key_id,
            filename: filename.to_string(),
            sha256: sha256.to_string(),
        });
    }
    entries.sort_by_key(|e| e.key_id);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_list_load() {
        let tmp = tempfile::tempdir().unwrap();
        let fa = tmp.path().join("k one.fa");
        fs::write(&fa, ">k\nACGTACGTAA\n").unwrap();
        let reg_dir = tmp.path().join("reg");
        let mut reg = KeyRegistry::open(&reg_dir).unwrap();
        assert_eq!(reg.add(&fa, None).unwrap().key_id, 0);
        assert_eq!(reg.add(&fa, None).unwrap().key_id, 1);
        assert!(matches!(reg.add(&fa, Some(1)), Err(Error::DuplicateKeyId(1))));

        let reg = KeyRegistry::open_existing(&reg_dir).unwrap();
        assert_eq!(reg.key_ids(), vec![0, 1]);
        let idx = reg.key_index(1).unwrap();
        assert_eq!(idx.key().len(), 10);
        assert_eq!(idx.key_id(), 1);
        assert!(matches!(reg.key_index(7), Err(Error::UnknownKey(7))));
    }

    #[test]
    fn tampered_key_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let fa = tmp.path().join("k.fa");
        fs::write(&fa, "ACGTACGT").unwrap();
        let mut reg = KeyRegistry::open(tmp.path().join("reg")).unwrap();
        let entry = reg.add(&fa, Some(9)).unwrap();
        fs::write(reg.dir().join(&entry.filename), "ACGTACGA").unwrap();
        assert!(matches!(reg.key_index(9), Err(Error::KeyDigestMismatch(9))));
    }

    #[test]
    fn empty_key_is_not_registered() {
        let tmp = tempfile::tempdir().unwrap();
        let fa = tmp.path().join("k.fa");
        fs::write(&fa, ">h\nNN\n").unwrap();
        let mut reg = KeyRegistry::open(tmp.path().join("reg")).unwrap();
        assert!(matches!(reg.add(&fa, None), Err(Error::EmptyKey(0))));
        assert!(reg.entries().is_empty());
    }

    #[test]
    fn malformed_manifest() {
        assert!(parse_manifest("0 a.fa\n").is_err());
        assert!(parse_manifest("x a.fa abc\n").is_err());
        assert!(matches!(
            parse_manifest("1 a.fa h\n1 b.fa h\n"),
            Err(Error::DuplicateKeyId(1))
        ));
        assert_eq!(parse_manifest("# c\n\n2 a.fa h\n").unwrap().len(), 1);
    }
}
