//! Statistical checks on plaintext and ciphertext images: adjacent-pixel
//! correlation, histograms, avalanche behaviour and keyspace accounting.

use std::fmt;
use std::fmt::Write as _;

use crate::cipher::{encrypt_with_seed, cell_seed_from_u64, EncryptOptions};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::keystore::{KeyIndex, KeyProvider};
use crate::num::Real;
use crate::scramble::{PatternId, PATTERN_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// (i, j) – (i, j+1)
    Horizontal,
    /// (i, j) – (i+1, j)
    Vertical,
    /// (i, j) – (i+1, j+1)
    Diagonal,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Horizontal, Direction::Vertical, Direction::Diagonal];

    fn step(self) -> (usize, usize) {
        match self {
            Direction::Horizontal => (0, 1),
            Direction::Vertical => (1, 0),
            Direction::Diagonal => (1, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Horizontal => "horizontal",
            Direction::Vertical => "vertical",
            Direction::Diagonal => "diagonal",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every adjacent pixel pair of `img` in `direction`, row-major.
pub fn adjacent_pairs(img: &GrayImage, direction: Direction) -> impl Iterator<Item = (u8, u8)> + '_ {
    let (dr, dc) = direction.step();
    let rows = img.height.saturating_sub(dr);
    let cols = img.width.saturating_sub(dc);
    (0..rows).flat_map(move |r| (0..cols).map(move |c| (img.get(r, c), img.get(r + dr, c + dc))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport<T> {
    pub direction: Direction,
    pub r: T,
    pub n: usize,
}

/// Pearson correlation of adjacent pixels,
/// `r = (nΣxy − ΣxΣy) / (√(nΣx² − (Σx)²) · √(nΣy² − (Σy)²))`,
/// over all pairs. The sums are accumulated exactly; only the final
/// quotient is rounded.
pub fn correlation<T: Real>(img: &GrayImage, direction: Direction) -> Result<CorrelationReport<T>> {
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    for (x, y) in adjacent_pairs(img, direction) {
        let (x, y) = (x as u64, y as u64);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    if n < 2 {
        return Err(Error::TooFewPairs(n as usize));
    }
    let (n_, sx, sy) = (n as i128, sx as i128, sy as i128);
    let num = n_ * sxy as i128 - sx * sy;
    let vx = n_ * sxx as i128 - sx * sx;
    let vy = n_ * syy as i128 - sy * sy;
    if vx == 0 || vy == 0 {
        return Err(Error::DegenerateVariance);
    }
    let f = |v: i128| T::of(v as f64);
    let r = f(num) / (f(vx).sqrt() * f(vy).sqrt());
    Ok(CorrelationReport {
        direction,
        r,
        n: n as usize,
    })
}

pub type Histogram = [u64; 256];

pub fn histogram(bytes: &[u8]) -> Histogram {
    let mut h = [0u64; 256];
    for &b in bytes {
        h[b as usize] += 1;
    }
    h
}

/// Total variation distance between normalized histograms, in `[0, 1]`.
pub fn histogram_distance<T: Real>(a: &Histogram, b: &Histogram) -> Result<T> {
    let ta: u64 = a.iter().sum();
    let tb: u64 = b.iter().sum();
    if ta == 0 || tb == 0 {
        return Err(Error::EmptyHistogram);
    }
    let (ta, tb) = (T::of(ta as f64), T::of(tb as f64));
    let sum: T = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (T::of(x as f64) / ta - T::of(y as f64) / tb).abs())
        .sum();
    Ok(sum / T::of(2.0))
}

/// Bar chart of a histogram as a `256 × height` image, bars white on black.
pub fn render_histogram(hist: &Histogram, height: usize) -> GrayImage {
    let peak = hist.iter().copied().max().unwrap_or(0).max(1);
    GrayImage::from_fn(256, height, |r, c| {
        let bar = (hist[c] as u128 * height as u128).div_ceil(peak as u128) as usize;
        if height - r <= bar {
            255
        } else {
            0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvalancheReport<T> {
    pub flipped_bit: usize,
    /// Fraction of payload cells whose pointer changed.
    pub cell_change_ratio: T,
    /// Fraction of payload bits that differ.
    pub bit_change_ratio: T,
}

/// Encrypts `pixels` under `seed_a` and a copy with bit `bit_index` flipped
/// under `seed_b`, and compares the payloads. Bit `i` is bit `i % 8`
/// (LSB = 0) of pixel `i / 8`.
#[allow(clippy::too_many_arguments)]
pub fn avalanche<T: Real>(
    pixels: &[u8],
    width: usize,
    height: usize,
    bit_index: usize,
    index: &KeyIndex,
    pattern: PatternId,
    seed_a: u64,
    seed_b: u64,
    opts: &EncryptOptions,
) -> Result<AvalancheReport<T>> {
    let bits = pixels.len() * 8;
    if bit_index >= bits {
        return Err(Error::BitIndexOutOfRange { bit: bit_index, bits });
    }
    if index.min_multiplicity() < 2 {
        return Err(Error::InsufficientMultiplicity(index.min_multiplicity()));
    }
    let mut flipped = pixels.to_vec();
    flipped[bit_index / 8] ^= 1 << (bit_index % 8);

    let a = encrypt_with_seed(pixels, width, height, index, pattern, &cell_seed_from_u64(seed_a), opts)?;
    let b = encrypt_with_seed(&flipped, width, height, index, pattern, &cell_seed_from_u64(seed_b), opts)?;
    let cells = a.payload.len();
    let (changed_cells, changed_bits) = a
        .payload
        .iter()
        .zip(&b.payload)
        .fold((0usize, 0u64), |(c, bits), (x, y)| {
            let diff = x.offset() ^ y.offset();
            (c + (diff != 0) as usize, bits + diff.count_ones() as u64)
        });
    let total_bits = cells as f64 * 8.0 * opts.pointer_width as f64;
    Ok(AvalancheReport {
        flipped_bit: bit_index,
        cell_change_ratio: T::of(changed_cells as f64) / T::of(cells as f64),
        bit_change_ratio: T::of(changed_bits as f64) / T::of(total_bits),
    })
}

/// Position-multiplicity statistics of one key.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyStats<T> {
    pub key_id: u16,
    pub length: usize,
    pub absent: usize,
    pub min_multiplicity: usize,
    pub max_multiplicity: usize,
    /// Mean multiplicity over the quadruples that occur.
    pub mean_multiplicity: T,
    /// Mean of log2(multiplicity) over the quadruples that occur: the bits of
    /// choice the substitution has per cell.
    pub mean_log2_multiplicity: T,
}

impl<T: Real> KeyStats<T> {
    pub fn of(index: &KeyIndex) -> KeyStats<T> {
        let report = index.report();
        let present: Vec<usize> = report.multiplicities.iter().copied().filter(|&m| m > 0).collect();
        let count = T::of(present.len().max(1) as f64);
        let mean = present.iter().map(|&m| T::of(m as f64)).sum::<T>() / count;
        let mean_log2 = present.iter().map(|&m| T::of(m as f64).log2()).sum::<T>() / count;
        KeyStats {
            key_id: report.key_id,
            length: report.length,
            absent: report.absent,
            min_multiplicity: report.min_multiplicity,
            max_multiplicity: report.max_multiplicity,
            mean_multiplicity: mean,
            mean_log2_multiplicity: mean_log2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyspaceReport<T> {
    pub key_count: usize,
    pub pattern_count: usize,
    pub keys: Vec<KeyStats<T>>,
    /// log2(key_count · pattern_count): bits needed to name the metadata.
    pub log2_metadata_choices: T,
    /// Mean over keys of the per-cell substitution uncertainty in bits.
    pub mean_log2_pointer_choices: T,
}

pub fn keyspace_report<T: Real>(keys: &dyn KeyProvider) -> Result<KeyspaceReport<T>> {
    let ids = keys.key_ids();
    if ids.is_empty() {
        return Err(Error::Config("keyspace report needs at least one key".into()));
    }
    let stats = ids
        .iter()
        .map(|&id| keys.key_index(id).map(|idx| KeyStats::of(&idx)))
        .collect::<Result<Vec<KeyStats<T>>>>()?;
    let key_count = stats.len();
    let pattern_count = PATTERN_COUNT as usize;
    let mean_log2 = stats.iter().map(|s| s.mean_log2_multiplicity).sum::<T>() / T::of(key_count as f64);
    Ok(KeyspaceReport {
        key_count,
        pattern_count,
        keys: stats,
        log2_metadata_choices: T::of((key_count * pattern_count) as f64).log2(),
        mean_log2_pointer_choices: mean_log2,
    })
}

/// One CSV row of an analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisRow<T> {
    pub image: String,
    pub direction: Direction,
    pub r_plain: Result<T, String>,
    pub r_cipher: Result<T, String>,
    pub hist_distance: Option<T>,
    pub avalanche: Option<AvalancheReport<T>>,
}

pub const CSV_HEADER: &str =
    "image,direction,r_plain,r_cipher,hist_distance,avalanche_cell_ratio,avalanche_bit_ratio";

/// Correlation-based rows for one plaintext/ciphertext image pair, one per
/// direction. Degenerate cases are recorded in the row, not raised.
pub fn analysis_rows<T: Real>(
    name: &str,
    plain: &GrayImage,
    cipher: &GrayImage,
    avalanche: Option<AvalancheReport<T>>,
) -> Vec<AnalysisRow<T>> {
    let hist_distance = histogram_distance(&histogram(&plain.pixels), &histogram(&cipher.pixels)).ok();
    let label = |e: Error| match e {
        Error::DegenerateVariance => "degenerate".to_string(),
        Error::TooFewPairs(_) => "too_few_pairs".to_string(),
        e => e.to_string(),
    };
    Direction::ALL
        .into_iter()
        .map(|direction| AnalysisRow {
            image: name.to_string(),
            direction,
            r_plain: correlation(plain, direction).map(|c| c.r).map_err(label),
            r_cipher: correlation(cipher, direction).map(|c| c.r).map_err(label),
            hist_distance,
            avalanche,
        })
        .collect()
}

pub fn rows_to_csv<T: Real>(rows: &[AnalysisRow<T>]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let value = |v: &Result<T, String>| match v {
        Ok(x) => format!("{:.6}", x.to_f64_lossy()),
        Err(e) => e.clone(),
    };
    let opt = |v: Option<T>| v.map_or(String::new(), |x| format!("{:.6}", x.to_f64_lossy()));
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.image.replace(',', "_"),
            row.direction,
            value(&row.r_plain),
            value(&row.r_cipher),
            opt(row.hist_distance),
            opt(row.avalanche.map(|a| a.cell_change_ratio)),
            opt(row.avalanche.map(|a| a.bit_change_ratio)),
        );
    }
    out
}
