//! Key DNA sequences and the one-to-many quadruple → position map.
//!
//! A [`KeyIndex`] lists, for each of the 256 quadruples, every offset at which
//! that quadruple starts in the key (overlapping windows, stride 1). Encryption
//! replaces a pixel's quadruple with one of those offsets drawn at random.

mod registry;

pub use registry::{KeyProvider, KeyRegistry, KeyRing, RegistryEntry, REGISTRY_MANIFEST};

use std::fmt;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::codec::{Nucleotide, Quadruple};
use crate::error::{Error, Result};

pub const MAX_KEY_ID: u16 = 4095;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySequence {
    key_id: u16,
    bases: Vec<Nucleotide>,
    source_name: String,
}

impl KeySequence {
    pub fn new(key_id: u16, bases: Vec<Nucleotide>, source_name: impl Into<String>) -> Result<Self> {
        if key_id > MAX_KEY_ID {
            return Err(Error::InvalidKeyId(key_id as u32));
        }
        if bases.len() < 4 {
            return Err(Error::EmptyKey(bases.len()));
        }
        if bases.len() > u32::MAX as usize {
            return Err(Error::KeyTooLong(bases.len()));
        }
        Ok(KeySequence {
            key_id,
            bases,
            source_name: source_name.into(),
        })
    }

    pub fn with_id(mut self, key_id: u16) -> Result<Self> {
        if key_id > MAX_KEY_ID {
            return Err(Error::InvalidKeyId(key_id as u32));
        }
        self.key_id = key_id;
        Ok(self)
    }

    pub fn with_source(mut self, source_name: impl Into<String>) -> Self {
        self.source_name = source_name.into();
        self
    }

    pub fn key_id(&self) -> u16 {
        self.key_id
    }

    pub fn bases(&self) -> &[Nucleotide] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    /// The quadruple starting at `offset`, if the window fits.
    pub fn quad_at(&self, offset: usize) -> Option<Quadruple> {
        let w = self.bases.get(offset..offset.checked_add(4)?)?;
        Some(Quadruple::from_bases([w[0], w[1], w[2], w[3]]))
    }

    /// SHA-256 over the bases as uppercase ASCII, lowercase hex.
    pub fn digest_hex(&self) -> String {
        let mut hasher = Sha256::new();
        for chunk in self.bases.chunks(4096) {
            let ascii: Vec<u8> = chunk.iter().map(|n| n.to_ascii()).collect();
            hasher.update(&ascii);
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_fasta(&self) -> String {
        let mut out = format!(">{}\n", self.source_name);
        for line in self.bases.chunks(70) {
            out.extend(line.iter().map(|n| n.to_ascii() as char));
            out.push('\n');
        }
        out
    }
}

/// Parses FASTA text: header (`>`) and comment (`;`) lines are removed, and
/// any character outside `ACGT` (after uppercasing) is dropped.
pub fn ingest_fasta(text: &str) -> Result<KeySequence> {
    let bases: Vec<Nucleotide> = text
        .lines()
        .filter(|line| !line.starts_with('>') && !line.starts_with(';'))
        .flat_map(|line| line.bytes())
        .filter_map(Nucleotide::from_ascii)
        .collect();
    KeySequence::new(0, bases, "")
}

/// Offset of a quadruple window inside a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pointer(u32);

impl Pointer {
    pub const fn new(offset: u32) -> Pointer {
        Pointer(offset)
    }

    pub const fn offset(self) -> u32 {
        self.0
    }

    /// Low four bits, the carrier for corner metadata.
    pub const fn nibble(self) -> u8 {
        (self.0 & 0xF) as u8
    }

    /// Whether the offset is representable in `width` big-endian bytes.
    pub fn fits(self, width: u8) -> bool {
        width >= 4 || (self.0 as u64) < (1u64 << (8 * width as u32))
    }
}

impl fmt::Display for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct KeyIndex {
    key: KeySequence,
    positions: Vec<Vec<u32>>,
    min_multiplicity: usize,
}

impl KeyIndex {
    pub fn build(key: KeySequence) -> KeyIndex {
        let mut positions = vec![Vec::new(); 256];
        let bases = key.bases();
        let mut code: u8 = 0;
        for (i, n) in bases.iter().enumerate() {
            code = (code << 2) | n.bits();
            if i >= 3 {
                positions[code as usize].push((i - 3) as u32);
            }
        }
        let min_multiplicity = positions.iter().map(Vec::len).min().unwrap_or(0);
        KeyIndex {
            key,
            positions,
            min_multiplicity,
        }
    }

    pub fn key(&self) -> &KeySequence {
        &self.key
    }

    /// The same index registered under another key id.
    pub fn with_key_id(mut self, key_id: u16) -> Result<KeyIndex> {
        self.key = self.key.with_id(key_id)?;
        Ok(self)
    }

    pub fn key_id(&self) -> u16 {
        self.key.key_id
    }

    /// Ascending start offsets of `quad`.
    pub fn positions(&self, quad: Quadruple) -> &[u32] {
        &self.positions[quad.index()]
    }

    pub fn multiplicity(&self, quad: Quadruple) -> usize {
        self.positions[quad.index()].len()
    }

    pub fn min_multiplicity(&self) -> usize {
        self.min_multiplicity
    }

    pub fn is_complete(&self) -> bool {
        self.min_multiplicity > 0
    }

    /// Largest valid pointer offset (`len - 4`).
    pub fn max_offset(&self) -> usize {
        self.key.len() - 4
    }

    /// Quadruple a pointer refers to, or `None` if it lies outside the key.
    pub fn dereference(&self, pointer: Pointer) -> Option<Quadruple> {
        self.key.quad_at(pointer.offset() as usize)
    }

    /// Whether `quad` occurs at some offset `>= start`.
    pub fn detect(&self, quad: Quadruple, start: usize) -> bool {
        let list = self.positions(quad);
        list.partition_point(|&p| (p as usize) < start) < list.len()
    }

    /// Draws one of the positions of `quad` uniformly at random.
    pub fn crypt_select<R: Rng + ?Sized>(&self, quad: Quadruple, rng: &mut R) -> Result<Pointer> {
        let list = self.positions(quad);
        if list.is_empty() {
            return Err(self.absent(quad));
        }
        Ok(Pointer(list[rng.random_range(0..list.len())]))
    }

    /// Like [`crypt_select`](Self::crypt_select), restricted to offsets with
    /// `offset % 16 == nibble`.
    pub fn crypt_select_constrained<R: Rng + ?Sized>(
        &self,
        quad: Quadruple,
        rng: &mut R,
        nibble: u8,
    ) -> Result<Pointer> {
        let nibble = nibble & 0xF;
        let list = self.positions(quad);
        if list.is_empty() {
            return Err(self.absent(quad));
        }
        let matching = list.iter().filter(|&&p| p & 0xF == nibble as u32).count();
        if matching == 0 {
            return Err(Error::NoConstrainedPosition {
                quad: quad.to_string(),
                nibble,
            });
        }
        let k = rng.random_range(0..matching);
        let offset = list
            .iter()
            .copied()
            .filter(|&p| p & 0xF == nibble as u32)
            .nth(k)
            .expect("k < matching");
        Ok(Pointer(offset))
    }

    pub fn report(&self) -> KeyReport {
        let mut multiplicities = [0usize; 256];
        for (m, list) in multiplicities.iter_mut().zip(&self.positions) {
            *m = list.len();
        }
        let absent = multiplicities.iter().filter(|&&m| m == 0).count();
        KeyReport {
            key_id: self.key_id(),
            length: self.key.len(),
            multiplicities,
            min_multiplicity: self.min_multiplicity,
            max_multiplicity: multiplicities.iter().copied().max().unwrap_or(0),
            absent,
        }
    }

    fn absent(&self, quad: Quadruple) -> Error {
        Error::QuadrupleAbsent(quad.to_string(), self.key_id())
    }
}

/// Quadruple coverage summary of one key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyReport {
    pub key_id: u16,
    pub length: usize,
    pub multiplicities: [usize; 256],
    pub min_multiplicity: usize,
    pub max_multiplicity: usize,
    pub absent: usize,
}

impl KeyReport {
    pub fn is_complete(&self) -> bool {
        self.absent == 0
    }
}

impl fmt::Display for KeyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_complete() {
            write!(
                f,
                "key {}: complete, length={}, min_multiplicity={}, max_multiplicity={}",
                self.key_id, self.length, self.min_multiplicity, self.max_multiplicity
            )
        } else {
            write!(
                f,
                "key {}: incomplete, length={}, absent_quadruples={}, max_multiplicity={}",
                self.key_id, self.length, self.absent, self.max_multiplicity
            )
        }
    }
}

/// Validates the quadruple coverage of a key.
pub fn validate_key(index: &KeyIndex) -> KeyReport {
    index.report()
}

/// A uniformly random key of `len` bases.
pub fn random_key<R: Rng + ?Sized>(key_id: u16, len: usize, rng: &mut R) -> Result<KeySequence> {
    let bases = (0..len)
        .map(|_| Nucleotide::from_bits(rng.random::<u8>()))
        .collect();
    KeySequence::new(key_id, bases, format!("random-{len}"))
}
