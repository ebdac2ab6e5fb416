//! DNA digital coding of pixel bytes.
//!
//! Each base carries two bits (`C=00`, `T=01`, `A=10`, `G=11`), so one 8-bit
//! pixel becomes a [`Quadruple`] of four bases, most-significant bit pair
//! first.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Nucleotide {
    C = 0b00,
    T = 0b01,
    A = 0b10,
    G = 0b11,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::C, Nucleotide::T, Nucleotide::A, Nucleotide::G];

    #[inline]
    pub fn from_bits(bits: u8) -> Nucleotide {
        Self::ALL[(bits & 0b11) as usize]
    }

    #[inline]
    pub fn bits(self) -> u8 {
        self as u8
    }

    /// Parses an uppercase or lowercase base letter.
    pub fn from_ascii(c: u8) -> Option<Nucleotide> {
        match c {
            b'C' | b'c' => Some(Nucleotide::C),
            b'T' | b't' => Some(Nucleotide::T),
            b'A' | b'a' => Some(Nucleotide::A),
            b'G' | b'g' => Some(Nucleotide::G),
            _ => None,
        }
    }

    pub fn to_ascii(self) -> u8 {
        match self {
            Nucleotide::C => b'C',
            Nucleotide::T => b'T',
            Nucleotide::A => b'A',
            Nucleotide::G => b'G',
        }
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_ascii() as char)
    }
}

/// Four bases encoding exactly one byte.
///
/// Stored packed as the byte it encodes; `bases()[0]` holds bits 7-6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Quadruple(u8);

impl Quadruple {
    #[inline]
    pub const fn from_byte(b: u8) -> Quadruple {
        Quadruple(b)
    }

    #[inline]
    pub const fn to_byte(self) -> u8 {
        self.0
    }

    pub fn from_bases(bases: [Nucleotide; 4]) -> Quadruple {
        Quadruple(bases.iter().fold(0u8, |acc, n| (acc << 2) | n.bits()))
    }

    pub fn bases(self) -> [Nucleotide; 4] {
        [
            Nucleotide::from_bits(self.0 >> 6),
            Nucleotide::from_bits(self.0 >> 4),
            Nucleotide::from_bits(self.0 >> 2),
            Nucleotide::from_bits(self.0),
        ]
    }

    /// Index into 256-entry per-quadruple tables.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = Quadruple> {
        (0..=255u8).map(Quadruple)
    }
}

impl fmt::Display for Quadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bases() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Quadruple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        if bytes.len() != 4 {
            return Err(Error::Config(format!("quadruple {s:?} must have 4 bases")));
        }
        let mut bases = [Nucleotide::C; 4];
        for (slot, &c) in bases.iter_mut().zip(bytes) {
            *slot = Nucleotide::from_ascii(c)
                .ok_or_else(|| Error::Config(format!("invalid base {:?} in {s:?}", c as char)))?;
        }
        Ok(Quadruple::from_bases(bases))
    }
}

/// A grayscale image in DNA form, one quadruple per pixel in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnaImage {
    width: usize,
    height: usize,
    quads: Vec<Quadruple>,
}

impl DnaImage {
    pub fn new(width: usize, height: usize, quads: Vec<Quadruple>) -> Result<DnaImage> {
        check_dims(width, height, quads.len())?;
        Ok(DnaImage {
            width,
            height,
            quads,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn quads(&self) -> &[Quadruple] {
        &self.quads
    }

    pub fn into_quads(self) -> Vec<Quadruple> {
        self.quads
    }

    pub fn nucleotides(&self) -> impl Iterator<Item = Nucleotide> + '_ {
        self.quads.iter().flat_map(|q| q.bases())
    }
}

pub(crate) fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    let expected = width
        .checked_mul(height)
        .ok_or(Error::InvalidDimensions { width, height })?;
    if expected != len {
        return Err(Error::DimensionMismatch {
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// Converts pixel bytes to their DNA image.
pub fn synthesize(pixels: &[u8], width: usize, height: usize) -> Result<DnaImage> {
    check_dims(width, height, pixels.len())?;
    Ok(DnaImage {
        width,
        height,
        quads: pixels.iter().copied().map(Quadruple::from_byte).collect(),
    })
}

/// Inverse of [`synthesize`].
pub fn rev_synthesize(dna: &DnaImage) -> Vec<u8> {
    dna.quads.iter().map(|q| q.to_byte()).collect()
}

/// Swaps adjacent quadruples pairwise; an odd trailing quadruple stays put.
/// Applying it twice is the identity.
pub fn translate(quads: &[Quadruple]) -> Vec<Quadruple> {
    let mut out = quads.to_vec();
    translate_in_place(&mut out);
    out
}

pub fn translate_in_place<T>(cells: &mut [T]) {
    for pair in cells.chunks_exact_mut(2) {
        pair.swap(0, 1);
    }
}
