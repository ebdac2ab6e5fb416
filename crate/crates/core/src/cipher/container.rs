//! Byte layout of a ciphertext container (all integers big-endian):
//!
//! ```text
//! 0..4    magic "DVLT"
//! 4       version = 1
//! 5       flags: bit0 corner_embedded, bit1 rgb_planes
//! 6..8    reserved = 0
//! 8..12   width
//! 12..16  height
//! 16      pointer_width (1..=4)
//! 17      pattern id, 0xFF = read from corners
//! 18..20  key id, 0xFFFF = read from corners
//! 20..24  CRC32 of the plaintext pixels
//! 24..    width*height pointers, row-major in stored order
//! ```

use crate::error::{Error, Result};
use crate::keystore::{Pointer, MAX_KEY_ID};
use crate::scramble::PatternId;

pub const MAGIC: &[u8; 4] = b"DVLT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 24;
pub const PATTERN_SENTINEL: u8 = 0xFF;
pub const KEY_ID_SENTINEL: u16 = 0xFFFF;

const FLAG_CORNER_EMBEDDED: u8 = 0b01;
const FLAG_RGB_PLANES: u8 = 0b10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherContainer {
    pub width: u32,
    pub height: u32,
    pub pointer_width: u8,
    /// `None` when the pattern is carried by the corner pointers only.
    pub pattern: Option<PatternId>,
    /// `None` when the key id is carried by the corner pointers only.
    pub key_id: Option<u16>,
    pub corner_embedded: bool,
    /// The pixels are R, G and B planes stacked vertically.
    pub rgb_planes: bool,
    pub plaintext_crc32: u32,
    pub payload: Vec<Pointer>,
}

impl CipherContainer {
    pub fn cell_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN + self.cell_count() * self.pointer_width as usize
    }

    /// Checks every structural invariant that does not need the key.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedContainer(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("empty image {}x{}", self.width, self.height));
        }
        if !(1..=4).contains(&self.pointer_width) {
            return bad(format!("pointer width {}", self.pointer_width));
        }
        if self.payload.len() != self.cell_count() {
            return bad(format!(
                "payload has {} pointers, expected {}",
                self.payload.len(),
                self.cell_count()
            ));
        }
        if let Some(p) = self.payload.iter().find(|p| !p.fits(self.pointer_width)) {
            return bad(format!("pointer {p} exceeds {} bytes", self.pointer_width));
        }
        if let Some(k) = self.key_id.filter(|&k| k > MAX_KEY_ID) {
            return bad(format!("key id {k} out of range"));
        }
        if self.corner_embedded {
            if self.width < 2 || self.height < 2 {
                return bad("corner metadata needs at least 2x2 cells".into());
            }
        } else if self.pattern.is_none() || self.key_id.is_none() {
            return bad("metadata neither in header nor in corners".into());
        }
        Ok(())
    }

    pub fn serialize(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        let mut flags = 0;
        if self.corner_embedded {
            flags |= FLAG_CORNER_EMBEDDED;
        }
        if self.rgb_planes {
            flags |= FLAG_RGB_PLANES;
        }
        out.push(flags);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&self.height.to_be_bytes());
        out.push(self.pointer_width);
        out.push(self.pattern.map_or(PATTERN_SENTINEL, |p| p.id()));
        out.extend_from_slice(&self.key_id.unwrap_or(KEY_ID_SENTINEL).to_be_bytes());
        out.extend_from_slice(&self.plaintext_crc32.to_be_bytes());
        let skip = 4 - self.pointer_width as usize;
        for p in &self.payload {
            out.extend_from_slice(&p.offset().to_be_bytes()[skip..]);
        }
        Ok(out)
    }

    pub fn deserialize(bytes: &[u8]) -> Result<CipherContainer> {
        let bad = |m: &str| Error::MalformedContainer(m.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(Error::MalformedContainer(format!("unsupported version {}", bytes[4])));
        }
        let flags = bytes[5];
        if flags & !(FLAG_CORNER_EMBEDDED | FLAG_RGB_PLANES) != 0 || bytes[6..8] != [0, 0] {
            return Err(bad("reserved bits set"));
        }
        let be32 = |at: usize| u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap());
        let width = be32(8);
        let height = be32(12);
        let pointer_width = bytes[16];
        if !(1..=4).contains(&pointer_width) {
            return Err(Error::MalformedContainer(format!("pointer width {pointer_width}")));
        }
        let pattern = match bytes[17] {
            PATTERN_SENTINEL => None,
            id => Some(PatternId::new(id).map_err(|_| bad("pattern id out of range"))?),
        };
        let key_id = match u16::from_be_bytes([bytes[18], bytes[19]]) {
            KEY_ID_SENTINEL => None,
            id => Some(id),
        };
        let plaintext_crc32 = be32(20);

        let pw = pointer_width as usize;
        let cells = (width as u64) * (height as u64);
        let expected = cells
            .checked_mul(pw as u64)
            .and_then(|n| n.checked_add(HEADER_LEN as u64));
        if expected != Some(bytes.len() as u64) {
            return Err(Error::MalformedContainer(format!(
                "payload length {} does not match {width}x{height}x{pw}",
                bytes.len() - HEADER_LEN
            )));
        }
        let payload = bytes[HEADER_LEN..]
            .chunks_exact(pw)
            .map(|c| Pointer::new(c.iter().fold(0u32, |acc, &b| (acc << 8) | b as u32)))
            .collect();
        let container = CipherContainer {
            width,
            height,
            pointer_width,
            pattern,
            key_id,
            corner_embedded: flags & FLAG_CORNER_EMBEDDED != 0,
            rgb_planes: flags & FLAG_RGB_PLANES != 0,
            plaintext_crc32,
            payload,
        };
        container.validate()?;
        Ok(container)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> CipherContainer {
        CipherContainer {
            width: 2,
            height: 2,
            pointer_width: 4,
            pattern: Some(PatternId::new(9).unwrap()),
            key_id: Some(0x123),
            corner_embedded: false,
            rgb_planes: false,
            plaintext_crc32: 0xDEADBEEF,
            payload: [1, 2, 0x01020304, 0xFFFFFFFF].map(Pointer::new).to_vec(),
        }
    }

    #[test]
    fn golden_header() {
        let bytes = sample().serialize().unwrap();
        assert_eq!(bytes.len(), 24 + 16);
        assert_eq!(
            &bytes[..24],
            &[
                b'D', b'V', b'L', b'T', 1, 0, 0, 0, // magic, version, flags, reserved
                0, 0, 0, 2, 0, 0, 0, 2, // width, height
                4, 9, 0x01, 0x23, // pointer width, pattern, key id
                0xDE, 0xAD, 0xBE, 0xEF, // crc
            ]
        );
        assert_eq!(&bytes[24..32], &[0, 0, 0, 1, 0, 0, 0, 2]);
        assert_eq!(&bytes[32..], &[1, 2, 3, 4, 255, 255, 255, 255]);
    }

    #[test]
    fn sentinels() {
        let mut c = sample();
        c.pattern = None;
        c.key_id = None;
        c.corner_embedded = true;
        let bytes = c.serialize().unwrap();
        assert_eq!(bytes[5], 1);
        assert_eq!(&bytes[17..20], &[0xFF, 0xFF, 0xFF]);
        assert_eq!(CipherContainer::deserialize(&bytes).unwrap(), c);
    }

    #[test]
    fn rejects_malformed() {
        let good = sample().serialize().unwrap();
        assert!(CipherContainer::deserialize(&good[..23]).is_err());
        assert!(CipherContainer::deserialize(&good[..good.len() - 1]).is_err());
        let mut b = good.clone();
        b[0] = b'X';
        assert!(CipherContainer::deserialize(&b).is_err());
        let mut b = good.clone();
        b[16] = 5;
        assert!(CipherContainer::deserialize(&b).is_err());
        let mut b = good.clone();
        b[17] = 16;
        assert!(CipherContainer::deserialize(&b).is_err());
        let mut b = good.clone();
        b[6] = 1;
        assert!(CipherContainer::deserialize(&b).is_err());
        // metadata nowhere
        let mut b = good.clone();
        b[17] = 0xFF;
        assert!(CipherContainer::deserialize(&b).is_err());

        let mut c = sample();
        c.pointer_width = 1;
        assert!(matches!(c.serialize(), Err(Error::MalformedContainer(_))));
    }

    fn arb_container() -> impl Strategy<Value = CipherContainer> {
        (1u32..12, 1u32..12, 1u8..=4, any::<bool>(), any::<bool>(), any::<u32>())
            .prop_flat_map(|(w, h, pw, embed, rgb, crc)| {
                let max = if pw == 4 { u32::MAX } else { (1u32 << (8 * pw as u32)) - 1 };
                let embed = embed && w >= 2 && h >= 2;
                (
                    proptest::collection::vec(0..=max, (w * h) as usize),
                    proptest::option::of(0u8..16),
                    proptest::option::of(0u16..=4095),
                )
                    .prop_map(move |(payload, pattern, key_id)| {
                        let (pattern, key_id) = if embed {
                            (pattern, key_id)
                        } else {
                            (Some(pattern.unwrap_or(0)), Some(key_id.unwrap_or(0)))
                        };
                        CipherContainer {
                            width: w,
                            height: h,
                            pointer_width: pw,
                            pattern: pattern.map(|p| PatternId::new(p).unwrap()),
                            key_id,
                            corner_embedded: embed,
                            rgb_planes: rgb,
                            plaintext_crc32: crc,
                            payload: payload.into_iter().map(Pointer::new).collect(),
                        }
                    })
            })
    }

    proptest! {
        #[test]
        fn round_trip(c in arb_container()) {
            let bytes = c.serialize().unwrap();
            prop_assert_eq!(bytes.len(), c.serialized_len());
            prop_assert_eq!(&bytes[..4], MAGIC);
            prop_assert_eq!(CipherContainer::deserialize(&bytes).unwrap(), c);
        }
    }
}
