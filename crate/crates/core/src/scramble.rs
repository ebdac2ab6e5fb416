//! Block scrambling patterns.
//!
//! Sixteen patterns act on aligned 8×8 blocks: ids 0-7 are the dihedral
//! variants of a doubly-even magic square, ids 8-15 are zigzag traversals
//! from each corner with either first step. A pattern is applied as a gather:
//! output cell `i` of a block takes input cell `perm[i]`.

use std::fmt;
use std::sync::OnceLock;

use crate::codec::check_dims;
use crate::error::{Error, Result};

pub const BLOCK: usize = 8;
pub const PATTERN_COUNT: u8 = 16;

/// Order-`n` magic square stored in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MagicGrid {
    n: usize,
    cells: Vec<u32>,
}

impl MagicGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn at(&self, row: usize, col: usize) -> u32 {
        self.cells[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.cells[row * self.n..(row + 1) * self.n]
    }

    pub fn magic_constant(&self) -> u64 {
        let n = self.n as u64;
        n * (n * n + 1) / 2
    }

    /// Checks the permutation and all row, column and diagonal sums.
    pub fn is_magic(&self) -> bool {
        let n = self.n;
        let target = self.magic_constant();
        let mut seen = vec![false; n * n];
        for &v in &self.cells {
            let v = v as usize;
            if v == 0 || v > n * n || std::mem::replace(&mut seen[v - 1], true) {
                return false;
            }
        }
        let sum = |f: &dyn Fn(usize) -> u32| (0..n).map(|k| f(k) as u64).sum::<u64>();
        (0..n).all(|r| sum(&|c| self.at(r, c)) == target)
            && (0..n).all(|c| sum(&|r| self.at(r, c)) == target)
            && sum(&|k| self.at(k, k)) == target
            && sum(&|k| self.at(k, n - 1 - k)) == target
    }
}

/// Doubly-even magic square: count 1..n² in raster order, keep values on
/// either diagonal of each 4×4 sub-block and complement the rest to
/// `n² + 1 - v`.
pub fn magic_square(n: usize) -> Result<MagicGrid> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::OrderNotDoublyEven(n));
    }
    let nn = (n * n) as u32;
    let cells = (0..n * n)
        .map(|i| {
            let (r, c) = ((i / n) % 4, (i % n) % 4);
            let v = i as u32 + 1;
            if r == c || r + c == 3 {
                v
            } else {
                nn + 1 - v
            }
        })
        .collect();
    Ok(MagicGrid { n, cells })
}

/// Element `k` (0-7) of the dihedral group applied to `base`: `k & 3`
/// clockwise quarter turns, preceded by a transpose when `k >= 4`.
pub fn magic_variant(base: &MagicGrid, k: u8) -> MagicGrid {
    let n = base.n;
    let mut cells = base.cells.clone();
    if k & 4 != 0 {
        cells = (0..n * n).map(|i| cells[(i % n) * n + i / n]).collect();
    }
    for _ in 0..(k & 3) {
        // rotate clockwise: out[r][c] = in[n-1-c][r]
        cells = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                cells[(n - 1 - c) * n + r]
            })
            .collect();
    }
    MagicGrid { n, cells }
}

/// Visiting order of an `n×n` zigzag traversal, as raster indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZigzagOrder {
    n: usize,
    visit: Vec<usize>,
}

impl ZigzagOrder {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn visit(&self) -> &[usize] {
        &self.visit
    }
}

/// Zigzag variant `v` (0-7): start corner `v >> 1` in TL, TR, BL, BR order;
/// `v & 1 == 0` moves along the row first, otherwise down the column.
/// Variant 0 is the JPEG scan order.
pub fn zigzag_order(n: usize, variant: u8) -> ZigzagOrder {
    let mut coords = Vec::with_capacity(n * n);
    for s in 0..(2 * n).saturating_sub(1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 0 {
            coords.extend((lo..=hi).rev().map(|r| (r, s - r)));
        } else {
            coords.extend((lo..=hi).map(|r| (r, s - r)));
        }
    }
    let column_first = variant & 1 != 0;
    let corner = (variant >> 1) & 3;
    let visit = coords
        .into_iter()
        .map(|(r, c)| {
            let (mut r, mut c) = if column_first { (c, r) } else { (r, c) };
            if corner & 1 != 0 {
                c = n - 1 - c;
            }
            if corner & 2 != 0 {
                r = n - 1 - r;
            }
            r * n + c
        })
        .collect();
    ZigzagOrder { n, visit }
}

/// Scrambling pattern selector: 0-7 magic variants, 8-15 zigzag variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternId(u8);

impl PatternId {
    pub fn new(id: u8) -> Result<PatternId> {
        if id < PATTERN_COUNT {
            Ok(PatternId(id))
        } else {
            Err(Error::InvalidPattern(id as u32))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn is_magic(self) -> bool {
        self.0 < 8
    }

    pub fn all() -> impl Iterator<Item = PatternId> {
        (0..PATTERN_COUNT).map(PatternId)
    }
}

impl TryFrom<u32> for PatternId {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        u8::try_from(v)
            .map_err(|_| Error::InvalidPattern(v))
            .and_then(PatternId::new)
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_magic() {
            write!(f, "{} (magic square, variant {})", self.0, self.0)
        } else {
            write!(f, "{} (zigzag, variant {})", self.0, self.0 - 8)
        }
    }
}

/// A bijection on the `n²` cells of a block, with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPermutation {
    n: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl BlockPermutation {
    /// Fails unless `perm` is a permutation of `0..n²`.
    pub fn new(n: usize, perm: Vec<usize>) -> Result<BlockPermutation> {
        let len = n * n;
        if perm.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: perm.len(),
            });
        }
        let mut inv = vec![usize::MAX; len];
        for (i, &p) in perm.iter().enumerate() {
            if p >= len || inv[p] != usize::MAX {
                return Err(Error::Config(format!("not a permutation: {p} at {i}")));
            }
            inv[p] = i;
        }
        Ok(BlockPermutation { n, perm, inv })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inv(&self) -> &[usize] {
        &self.inv
    }
}

/// The permutation of an `n×n` block selected by `pattern`.
pub fn pattern_permutation(pattern: PatternId, n: usize) -> Result<BlockPermutation> {
    let perm = if pattern.is_magic() {
        let grid = magic_variant(&magic_square(n)?, pattern.0);
        grid.cells.iter().map(|&v| v as usize - 1).collect()
    } else {
        zigzag_order(n, pattern.0 - 8).visit
    };
    BlockPermutation::new(n, perm)
}

/// The sixteen 8×8 permutations, built once.
pub fn block_permutation(pattern: PatternId) -> &'static BlockPermutation {
    static TABLE: OnceLock<Vec<BlockPermutation>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        PatternId::all()
            .map(|p| pattern_permutation(p, BLOCK).expect("8 is doubly even"))
            .collect()
    });
    &table[pattern.0 as usize]
}

/// Permutes every full, aligned 8×8 block of a `width×height` raster;
/// cells of partial edge blocks are untouched.
pub fn scramble_cells<T: Copy>(
    cells: &[T],
    width: usize,
    height: usize,
    pattern: PatternId,
) -> Result<Vec<T>> {
    apply_blockwise(cells, width, height, block_permutation(pattern).perm())
}

/// Inverse of [`scramble_cells`].
pub fn descramble_cells<T: Copy>(
    cells: &[T],
    width: usize,
    height: usize,
    pattern: PatternId,
) -> Result<Vec<T>> {
    apply_blockwise(cells, width, height, block_permutation(pattern).inv())
}

fn apply_blockwise<T: Copy>(cells: &[T], width: usize, height: usize, gather: &[usize]) -> Result<Vec<T>> {
    check_dims(width, height, cells.len())?;
    let mut out = cells.to_vec();
    for by in 0..height / BLOCK {
        for bx in 0..width / BLOCK {
            let origin = by * BLOCK * width + bx * BLOCK;
            let at = |k: usize| origin + (k / BLOCK) * width + k % BLOCK;
            for (i, &src) in gather.iter().enumerate() {
                out[at(i)] = cells[at(src)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn order_8_base_row() {
        let g = magic_square(8).unwrap();
        assert_eq!(g.row(0), &[1, 63, 62, 4, 5, 59, 58, 8]);
        assert_eq!(g.magic_constant(), 260);
        assert!(g.is_magic());
    }

    #[test]
    fn order_8_base_grid_matches_published_grid() {
        let published: [[u32; 8]; 8] = [
            [1, 63, 62, 4, 5, 59, 58, 8],
            [56, 10, 11, 53, 52, 14, 15, 49],
            [48, 18, 19, 45, 44, 22, 23, 41],
            [25, 39, 38, 28, 29, 35, 34, 32],
            [33, 31, 30, 36, 37, 27, 26, 40],
            [24, 42, 43, 21, 20, 46, 47, 17],
            [16, 50, 51, 13, 12, 54, 55, 9],
            [57, 7, 6, 60, 61, 3, 2, 64],
        ];
        let g = magic_square(8).unwrap();
        for (r, row) in published.iter().enumerate() {
            assert_eq!(g.row(r), row);
        }
    }

    #[test]
    fn order_4() {
        let g = magic_square(4).unwrap();
        assert_eq!(g.cells(), &[1, 15, 14, 4, 12, 6, 7, 9, 8, 10, 11, 5, 13, 3, 2, 16]);
        assert_eq!(g.magic_constant(), 34);
        assert!(g.is_magic());
    }

    #[test]
    fn non_doubly_even_orders() {
        for n in [0, 1, 2, 3, 5, 6, 10] {
            assert!(matches!(magic_square(n), Err(Error::OrderNotDoublyEven(_))));
        }
        assert!(magic_square(12).unwrap().is_magic());
        assert!(magic_square(16).unwrap().is_magic());
    }

    #[test]
    fn variants() {
        let base = magic_square(8).unwrap();
        assert_eq!(magic_variant(&base, 0), base);
        let t = magic_variant(&base, 4);
        for i in 0..8 {
            assert_eq!(t.at(i, 0), base.at(0, i));
        }
        let mut distinct = Vec::new();
        for k in 0..8 {
            let v = magic_variant(&base, k);
            assert!(v.is_magic(), "variant {k}");
            assert!(!distinct.contains(&v));
            distinct.push(v);
        }
        // four quarter turns are the identity
        let once = magic_variant(&base, 1);
        let mut g = once.clone();
        for _ in 0..3 {
            g = magic_variant(&g, 1);
        }
        assert_eq!(g, base);
    }

    #[test]
    fn zigzag_jpeg_order() {
        assert_eq!(
            zigzag_order(4, 0).visit(),
            &[0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15]
        );
        for v in 0..8 {
            assert_eq!(zigzag_order(1, v).visit(), &[0]);
        }
    }

    #[test]
    fn zigzag_variants_are_distinct_diagonal_walks() {
        for n in [2usize, 3, 4, 8] {
            let mut seen = Vec::new();
            for v in 0..8 {
                let z = zigzag_order(n, v);
                let mut sorted = z.visit().to_vec();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..n * n).collect::<Vec<_>>());
                for w in z.visit().windows(2) {
                    let (r0, c0) = ((w[0] / n) as isize, (w[0] % n) as isize);
                    let (r1, c1) = ((w[1] / n) as isize, (w[1] % n) as isize);
                    assert!((r0 - r1).abs() <= 1 && (c0 - c1).abs() <= 1);
                }
                if n > 1 {
                    assert!(!seen.contains(&z));
                }
                seen.push(z);
            }
        }
        // corner and first-step semantics
        let n = 4;
        let start = |v| zigzag_order(n, v).visit()[..2].to_vec();
        assert_eq!(start(1), vec![0, 4]);
        assert_eq!(start(2), vec![3, 2]);
        assert_eq!(start(3), vec![3, 7]);
        assert_eq!(start(4), vec![12, 13]);
        assert_eq!(start(7), vec![15, 11]);
    }

    #[test]
    fn pattern_permutations() {
        let p = pattern_permutation(PatternId::new(0).unwrap(), 8).unwrap();
        assert_eq!(p.perm()[0], 0);
        assert_eq!(p.perm()[1], 62);
        let z = pattern_permutation(PatternId::new(8).unwrap(), 4).unwrap();
        assert_eq!(z.perm()[2], 4);
        for pattern in PatternId::all() {
            let p = block_permutation(pattern);
            for i in 0..64 {
                assert_eq!(p.inv()[p.perm()[i]], i);
            }
        }
        assert!(PatternId::new(16).is_err());
        assert!(PatternId::try_from(300u32).is_err());
    }

    #[test]
    fn scramble_examples() {
        let input: Vec<u32> = (0..64).collect();
        let p0 = PatternId::new(0).unwrap();
        let out = scramble_cells(&input, 8, 8, p0).unwrap();
        assert_eq!(out[1], input[62]);
        let back = descramble_cells(&input, 8, 8, p0).unwrap();
        assert_eq!(back[62], input[1]);

        let small: Vec<u8> = (0..16).collect();
        assert_eq!(scramble_cells(&small, 4, 4, p0).unwrap(), small);
        let seven: Vec<u8> = (0..49).collect();
        for p in PatternId::all() {
            assert_eq!(descramble_cells(&seven, 7, 7, p).unwrap(), seven);
        }
        assert!(matches!(
            scramble_cells(&small, 4, 5, p0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_edge_blocks_stay_in_place() {
        let (w, h) = (13, 10);
        let input: Vec<u32> = (0..(w * h) as u32).collect();
        let out = scramble_cells(&input, w, h, PatternId::new(9).unwrap()).unwrap();
        for r in 0..h {
            for c in 0..w {
                if r >= 8 || c >= 8 {
                    assert_eq!(out[r * w + c], input[r * w + c]);
                }
            }
        }
        assert_ne!(out, input);
    }

    proptest! {
        #[test]
        fn scramble_round_trip(
            w in 1usize..40,
            h in 1usize..40,
            pattern in 0u8..16,
            seed in any::<u64>(),
        ) {
            let cells: Vec<u64> = (0..(w * h) as u64).map(|i| i.wrapping_mul(seed | 1)).collect();
            let p = PatternId::new(pattern).unwrap();
            let s = scramble_cells(&cells, w, h, p).unwrap();
            let mut a = s.clone();
            let mut b = cells.clone();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            prop_assert_eq!(descramble_cells(&s, w, h, p).unwrap(), cells);
        }
    }
}
