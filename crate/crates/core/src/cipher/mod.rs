//! Encryption and decryption pipelines.
//!
//! Encryption: pixels → DNA quadruples → pairwise translation → one random
//! key position per quadruple → blockwise scrambling → optional corner
//! metadata. Decryption runs the same steps backwards and checks the
//! plaintext CRC32.

mod container;

pub use container::{
    CipherContainer, HEADER_LEN, KEY_ID_SENTINEL, MAGIC, PATTERN_SENTINEL, VERSION,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::codec::{self, Quadruple};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::keystore::{KeyIndex, KeyProvider, Pointer, MAX_KEY_ID};
use crate::scramble::{descramble_cells, scramble_cells, PatternId};

/// Master seed from which every cell's random stream is derived.
pub type CellSeed = [u8; 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncryptOptions {
    pub pointer_width: u8,
    pub corner_embed: bool,
    /// Derive the cell streams from this seed instead of drawing one from
    /// the caller's rng.
    pub seed: Option<u64>,
    pub rgb_planes: bool,
}

impl Default for EncryptOptions {
    fn default() -> Self {
        EncryptOptions {
            pointer_width: 4,
            corner_embed: true,
            seed: None,
            rgb_planes: false,
        }
    }
}

/// Expands a `u64` seed into a master cell seed.
pub fn cell_seed_from_u64(seed: u64) -> CellSeed {
    let mut s = [0u8; 32];
    ChaCha20Rng::seed_from_u64(seed).fill(&mut s);
    s
}

/// Independent stream for one substitution slot. Slots `0..cells` are the
/// pixels, `cells..cells + 4` the corner re-selections; a change in one cell
/// never shifts the randomness of another.
fn slot_rng(seed: &CellSeed, slot: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    rng.set_stream(slot as u64);
    rng
}

/// Raster positions of the four corners: TL, TR, BL, BR.
pub fn corner_cells(width: usize, height: usize) -> [usize; 4] {
    [0, width - 1, (height - 1) * width, height * width - 1]
}

/// Nibbles carried by the corners: pattern id, then key id bits 11-8, 7-4, 3-0.
pub fn corner_nibbles(pattern: PatternId, key_id: u16) -> [u8; 4] {
    [
        pattern.id(),
        ((key_id >> 8) & 0xF) as u8,
        ((key_id >> 4) & 0xF) as u8,
        (key_id & 0xF) as u8,
    ]
}

fn nibbles_to_metadata(nibbles: [u8; 4]) -> (PatternId, u16) {
    let pattern = PatternId::new(nibbles[0] & 0xF).expect("nibble < 16");
    let key_id = ((nibbles[1] as u16 & 0xF) << 8) | ((nibbles[2] as u16 & 0xF) << 4) | (nibbles[3] as u16 & 0xF);
    (pattern, key_id)
}

/// Encrypts with the cell streams derived from `opts.seed` when set,
/// otherwise from 32 bytes drawn from `rng`.
pub fn encrypt<R: Rng + ?Sized>(
    pixels: &[u8],
    width: usize,
    height: usize,
    index: &KeyIndex,
    pattern: PatternId,
    rng: &mut R,
    opts: &EncryptOptions,
) -> Result<CipherContainer> {
    let seed = match opts.seed {
        Some(s) => cell_seed_from_u64(s),
        None => {
            let mut s = [0u8; 32];
            rng.fill(&mut s);
            s
        }
    };
    encrypt_with_seed(pixels, width, height, index, pattern, &seed, opts)
}

pub fn encrypt_with_seed(
    pixels: &[u8],
    width: usize,
    height: usize,
    index: &KeyIndex,
    pattern: PatternId,
    seed: &CellSeed,
    opts: &EncryptOptions,
) -> Result<CipherContainer> {
    let pw = opts.pointer_width;
    if !(1..=4).contains(&pw) {
        return Err(Error::InvalidPointerWidth(pw));
    }
    let max_offset = index.max_offset();
    if !Pointer::new(u32::try_from(max_offset).unwrap_or(u32::MAX)).fits(pw) {
        return Err(Error::PointerOverflow {
            key_len: index.key().len(),
            max_offset,
            pointer_width: pw,
        });
    }
    let (w32, h32) = match (u32::try_from(width), u32::try_from(height)) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(Error::InvalidDimensions { width, height }),
    };
    let key_id = index.key_id();
    debug_assert!(key_id <= MAX_KEY_ID);

    let mut quads = codec::synthesize(pixels, width, height)?.into_quads();
    codec::translate_in_place(&mut quads);

    let pointers = quads
        .iter()
        .enumerate()
        .map(|(i, &q)| index.crypt_select(q, &mut slot_rng(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut payload = scramble_cells(&pointers, width, height, pattern)?;

    let corner_embedded = opts.corner_embed
        && width >= 2
        && height >= 2
        && embed_corners(&mut payload, width, height, index, pattern, seed);

    Ok(CipherContainer {
        width: w32,
        height: h32,
        pointer_width: pw,
        pattern: (!corner_embedded).then_some(pattern),
        key_id: (!corner_embedded).then_some(key_id),
        corner_embedded,
        rgb_planes: opts.rgb_planes,
        plaintext_crc32: crc32fast::hash(pixels),
        payload,
    })
}

/// Re-draws the four corner pointers among positions of the same quadruple
/// whose low nibble carries the metadata. Leaves `payload` untouched and
/// returns false if some corner quadruple has no suitable position.
fn embed_corners(
    payload: &mut [Pointer],
    width: usize,
    height: usize,
    index: &KeyIndex,
    pattern: PatternId,
    seed: &CellSeed,
) -> bool {
    let cells = width * height;
    let nibbles = corner_nibbles(pattern, index.key_id());
    let mut chosen = [Pointer::new(0); 4];
    for (k, (&pos, &nibble)) in corner_cells(width, height).iter().zip(&nibbles).enumerate() {
        let quad = index
            .dereference(payload[pos])
            .expect("selected pointers lie inside the key");
        match index.crypt_select_constrained(quad, &mut slot_rng(seed, cells + k), nibble) {
            Ok(p) => chosen[k] = p,
            Err(_) => return false,
        }
    }
    for (&pos, p) in corner_cells(width, height).iter().zip(chosen) {
        payload[pos] = p;
    }
    true
}

/// Reads `(pattern, key_id)` back from the corner pointers.
pub fn extract_corner_metadata(container: &CipherContainer) -> Result<(PatternId, u16)> {
    if !container.corner_embedded {
        return Err(Error::NotEmbedded);
    }
    let (w, h) = (container.width as usize, container.height as usize);
    if w < 2 || h < 2 || container.payload.len() != w * h {
        return Err(Error::MalformedContainer("corner metadata needs at least 2x2 cells".into()));
    }
    let corners = corner_cells(w, h).map(|pos| container.payload[pos].nibble());
    Ok(nibbles_to_metadata(corners))
}

/// Pattern and key id of a container, from the header when present and from
/// the corners otherwise.
pub fn resolve_metadata(container: &CipherContainer) -> Result<(PatternId, u16)> {
    match (container.pattern, container.key_id) {
        (Some(p), Some(k)) => Ok((p, k)),
        (p, k) => {
            let (cp, ck) = extract_corner_metadata(container).map_err(|e| match e {
                Error::NotEmbedded => {
                    Error::MalformedContainer("metadata neither in header nor in corners".into())
                }
                e => e,
            })?;
            Ok((p.unwrap_or(cp), k.unwrap_or(ck)))
        }
    }
}

pub fn decrypt(container: &CipherContainer, keys: &dyn KeyProvider) -> Result<Vec<u8>> {
    container.validate()?;
    let (pattern, key_id) = resolve_metadata(container)?;
    let index = keys.key_index(key_id)?;
    decrypt_with(container, &index, pattern)
}

/// Decrypts with an explicit key and pattern, ignoring container metadata.
pub fn decrypt_with(container: &CipherContainer, index: &KeyIndex, pattern: PatternId) -> Result<Vec<u8>> {
    let (w, h) = (container.width as usize, container.height as usize);
    let pointers = descramble_cells(&container.payload, w, h, pattern)?;
    let mut out_of_range = false;
    let mut quads: Vec<Quadruple> = pointers
        .iter()
        .map(|&p| {
            index.dereference(p).unwrap_or_else(|| {
                out_of_range = true;
                Quadruple::default()
            })
        })
        .collect();
    codec::translate_in_place(&mut quads);
    let pixels: Vec<u8> = quads.into_iter().map(Quadruple::to_byte).collect();
    let actual = crc32fast::hash(&pixels);
    if out_of_range || actual != container.plaintext_crc32 {
        return Err(Error::ChecksumMismatch {
            expected: container.plaintext_crc32,
            actual,
        });
    }
    Ok(pixels)
}

/// Payload pointers as big-endian bytes, one image row per container row
/// (`height × width·pointer_width`).
pub fn render_cipher_image(container: &CipherContainer) -> GrayImage {
    let pw = container.pointer_width as usize;
    let skip = 4 - pw;
    let pixels = container
        .payload
        .iter()
        .flat_map(|p| p.offset().to_be_bytes().into_iter().skip(skip))
        .collect();
    GrayImage {
        width: container.width as usize * pw,
        height: container.height as usize,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keystore::{ingest_fasta, random_key, KeyRing};
    use rand_chacha::ChaCha8Rng;

    fn rich_index(key_id: u16, len: usize, seed: u64) -> KeyIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        KeyIndex::build(random_key(key_id, len, &mut rng).unwrap())
    }

    fn random_pixels(n: usize, rng: &mut impl Rng) -> Vec<u8> {
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn single_pixel() {
        let idx = KeyIndex::build(ingest_fasta("ACGTACGT").unwrap());
        let pixel = "ACGT".parse::<Quadruple>().unwrap().to_byte();
        let opts = EncryptOptions {
            corner_embed: false,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let c = encrypt(&[pixel], 1, 1, &idx, PatternId::new(0).unwrap(), &mut rng, &opts).unwrap();
            assert!([0, 4].contains(&c.payload[0].offset()));
            assert!(!c.corner_embedded);
            let ring: KeyRing = [idx.clone()].into_iter().collect();
            assert_eq!(decrypt(&c, &ring).unwrap(), vec![pixel]);
        }
    }

    #[test]
    fn corner_embed_falls_back_when_unavailable() {
        // a 1x1 image cannot carry corners, nor can a key whose quadruples have
        // no offset in the right residue class
        let idx = KeyIndex::build(ingest_fasta("ACGTACGT").unwrap());
        let pixel = "ACGT".parse::<Quadruple>().unwrap().to_byte();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PatternId::new(3).unwrap();
        let c = encrypt(&[pixel], 1, 1, &idx, p, &mut rng, &EncryptOptions::default()).unwrap();
        assert!(!c.corner_embedded);
        assert_eq!((c.pattern, c.key_id), (Some(p), Some(0)));

        let c = encrypt(&[pixel; 4], 2, 2, &idx, p, &mut rng, &EncryptOptions::default()).unwrap();
        assert!(!c.corner_embedded);
        let ring: KeyRing = [idx].into_iter().collect();
        assert_eq!(decrypt(&c, &ring).unwrap(), vec![pixel; 4]);
    }

    #[test]
    fn round_trip_all_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // large enough that every quadruple has offsets in all 16 residue classes
        let idx = rich_index(0x2A5, 200_000, 9);
        let ring: KeyRing = [idx.clone()].into_iter().collect();
        for pattern in PatternId::all() {
            for embed in [false, true] {
                for (w, h) in [(8, 8), (17, 9), (2, 2), (1, 5)] {
                    let pixels = random_pixels(w * h, &mut rng);
                    let opts = EncryptOptions {
                        corner_embed: embed,
                        ..Default::default()
                    };
                    let c = encrypt(&pixels, w, h, &idx, pattern, &mut rng, &opts).unwrap();
                    assert_eq!(c.corner_embedded, embed && w >= 2 && h >= 2);
                    let back = CipherContainer::deserialize(&c.serialize().unwrap()).unwrap();
                    assert_eq!(decrypt(&back, &ring).unwrap(), pixels);
                    if c.corner_embedded {
                        assert_eq!(extract_corner_metadata(&c).unwrap(), (pattern, 0x2A5));
                        assert_eq!(c.pattern, None);
                        assert_eq!(c.key_id, None);
                    }
                }
            }
        }
    }

    #[test]
    fn corner_layout() {
        let mut c = CipherContainer {
            width: 3,
            height: 2,
            pointer_width: 4,
            pattern: None,
            key_id: None,
            corner_embedded: true,
            rgb_planes: false,
            plaintext_crc32: 0,
            payload: [16 + 3, 99, 32, 48 + 1, 7, 64 + 2].map(Pointer::new).to_vec(),
        };
        assert_eq!(extract_corner_metadata(&c).unwrap(), (PatternId::new(3).unwrap(), 0x012));
        c.corner_embedded = false;
        assert!(matches!(extract_corner_metadata(&c), Err(Error::NotEmbedded)));
        assert_eq!(corner_nibbles(PatternId::new(15).unwrap(), 4095), [15; 4]);
    }

    #[test]
    fn errors() {
        let idx = KeyIndex::build(ingest_fasta("AAAAAAA").unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = PatternId::new(0).unwrap();
        let opts = EncryptOptions::default();
        assert!(matches!(
            encrypt(&[1], 1, 1, &idx, p, &mut rng, &opts),
            Err(Error::QuadrupleAbsent(..))
        ));
        assert!(matches!(
            encrypt(&[1, 2], 1, 1, &idx, p, &mut rng, &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        let long = rich_index(0, 300, 1);
        let narrow = EncryptOptions {
            pointer_width: 1,
            ..Default::default()
        };
        assert!(matches!(
            encrypt(&[1], 1, 1, &long, p, &mut rng, &narrow),
            Err(Error::PointerOverflow { pointer_width: 1, .. })
        ));
        let fits = rich_index(0, 259, 1);
        assert!(fits.max_offset() == 255);
        let bad_width = EncryptOptions {
            pointer_width: 5,
            ..Default::default()
        };
        assert!(matches!(
            encrypt(&[1], 1, 1, &fits, p, &mut rng, &bad_width),
            Err(Error::InvalidPointerWidth(5))
        ));
    }

    #[test]
    fn decrypt_failures() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let idx = rich_index(4, 10_000, 2);
        let ring: KeyRing = [idx.clone()].into_iter().collect();
        let pixels = random_pixels(64, &mut rng);
        let opts = EncryptOptions {
            corner_embed: false,
            ..Default::default()
        };
        let c = encrypt(&pixels, 8, 8, &idx, PatternId::new(12).unwrap(), &mut rng, &opts).unwrap();

        let mut bytes = c.serialize().unwrap();
        bytes[HEADER_LEN + 4 * 10 + 3] ^= 0x01;
        let flipped = CipherContainer::deserialize(&bytes).unwrap();
        assert!(matches!(decrypt(&flipped, &ring), Err(Error::ChecksumMismatch { .. })));

        let mut bytes = c.serialize().unwrap();
        bytes[HEADER_LEN + 4 * 10] ^= 0x80;
        let out_of_range = CipherContainer::deserialize(&bytes).unwrap();
        assert!(matches!(decrypt(&out_of_range, &ring), Err(Error::ChecksumMismatch { .. })));

        let mut other = c.clone();
        other.key_id = Some(5);
        assert!(matches!(decrypt(&other, &ring), Err(Error::UnknownKey(5))));

        let wrong: KeyRing = [rich_index(4, 10_000, 3)].into_iter().collect();
        assert!(matches!(decrypt(&c, &wrong), Err(Error::ChecksumMismatch { .. })));
    }

    #[test]
    fn seeded_encryption_is_deterministic() {
        let idx = rich_index(1, 30_000, 4);
        let pixels: Vec<u8> = (0..16 * 16).map(|i| (i * 7) as u8).collect();
        let opts = EncryptOptions {
            seed: Some(42),
            ..Default::default()
        };
        let p = PatternId::new(10).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let a = encrypt(&pixels, 16, 16, &idx, p, &mut r1, &opts).unwrap();
        let b = encrypt(&pixels, 16, 16, &idx, p, &mut r2, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn render() {
        let c = CipherContainer {
            width: 2,
            height: 2,
            pointer_width: 4,
            pattern: Some(PatternId::new(0).unwrap()),
            key_id: Some(0),
            corner_embedded: false,
            rgb_planes: false,
            plaintext_crc32: 0,
            payload: [1, 0x0102, 0x030405, 0x06070809].map(Pointer::new).to_vec(),
        };
        let img = render_cipher_image(&c);
        assert_eq!((img.width, img.height), (8, 2));
        assert_eq!(img.pixels.len(), 16);
        assert_eq!(img.pixels, c.serialize().unwrap()[HEADER_LEN..]);
        let mut narrow = c.clone();
        narrow.pointer_width = 1;
        narrow.payload = [1, 2, 3, 4].map(Pointer::new).to_vec();
        assert_eq!(render_cipher_image(&narrow).pixels, vec![1, 2, 3, 4]);
    }
}
