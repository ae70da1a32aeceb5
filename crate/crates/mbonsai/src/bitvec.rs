//! Packed bit strings with rank, select and flip, plus packed fixed-width
//! integer arrays.
//!
//! Bits are stored in 64-bit words, least significant bit first. Positions
//! are 0-indexed; the rank argument of select is 1-indexed (the k-th set
//! bit). [`SelectIndex`] is a build-once directory of per-word cumulative
//! popcounts; it answers `select1` without scanning the whole string and is
//! tied to the bit string contents at build time through a version counter
//! that every `flip`/`set_bit` bumps.

const WORD: usize = 64;

/// A mutable bit string of fixed length.
#[derive(Clone, Debug)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
    ones: usize,
    version: u64,
}

impl BitString {
    /// New string of `len` bits, all set to `fill`.
    pub fn new(len: usize, fill: bool) -> Self {
        let n_words = len.div_ceil(WORD);
        let mut words = vec![if fill { !0u64 } else { 0 }; n_words];
        if fill && !len.is_multiple_of(WORD) {
            // mask tail bits beyond len
            *words.last_mut().unwrap() = (1u64 << (len % WORD)) - 1;
        }
        let ones = if fill { len } else { 0 };
        BitString {
            words,
            len,
            ones,
            version: 0,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut b = BitString::new(bits.len(), false);
        for (i, &v) in bits.iter().enumerate() {
            if v {
                b.set_bit(i, true);
            }
        }
        b.version = 0;
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of set bits.
    pub fn popcount(&self) -> usize {
        self.ones
    }

    /// Bumped by every mutation; select indexes check it.
    pub fn version(&self) -> u64 {
        self.version
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let w = &mut self.words[i / WORD];
        let mask = 1u64 << (i % WORD);
        let was = *w & mask != 0;
        if was != v {
            *w ^= mask;
            if v {
                self.ones += 1;
            } else {
                self.ones -= 1;
            }
            self.version += 1;
        }
    }

    /// Toggle bit `i`.
    pub fn flip(&mut self, i: usize) {
        let cur = self.get(i);
        self.set_bit(i, !cur);
    }

    /// Number of 1s in positions `0..=i`.
    pub fn rank1(&self, i: usize) -> usize {
        assert!(i < self.len, "rank1 index {i} out of range {}", self.len);
        let w = i / WORD;
        let mut r = 0usize;
        for j in 0..w {
            r += self.words[j].count_ones() as usize;
        }
        let tail_bits = i % WORD + 1;
        let mask = if tail_bits == WORD {
            !0u64
        } else {
            (1u64 << tail_bits) - 1
        };
        r + (self.words[w] & mask).count_ones() as usize
    }

    /// 0-indexed position of the k-th set bit (k is 1-indexed), by scan.
    pub fn select1(&self, k: usize) -> Option<usize> {
        if k == 0 || k > self.ones {
            return None;
        }
        let mut remaining = k;
        for (w, &word) in self.words.iter().enumerate() {
            let c = word.count_ones() as usize;
            if remaining <= c {
                return Some(w * WORD + select_in_word(word, remaining));
            }
            remaining -= c;
        }
        None
    }
}

/// Position of the k-th set bit inside `word` (k 1-indexed, must exist).
fn select_in_word(mut word: u64, mut k: usize) -> usize {
    debug_assert!(k >= 1 && (word.count_ones() as usize) >= k);
    loop {
        let t = word.trailing_zeros() as usize;
        if k == 1 {
            return t;
        }
        word &= word - 1;
        k -= 1;
    }
}

/// Build-once select directory over a [`BitString`] snapshot.
///
/// Stores the cumulative popcount before each word; `select1` binary-searches
/// it and finishes inside one word. Any mutation of the underlying string
/// after `build` invalidates the index, which is enforced by the version
/// counter (stale use panics).
#[derive(Clone, Debug)]
pub struct SelectIndex {
    cum: Vec<u64>,
    ones: usize,
    version: u64,
}

impl SelectIndex {
    pub fn build(b: &BitString) -> Self {
        let mut cum = Vec::with_capacity(b.words.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for &w in &b.words {
            acc += w.count_ones() as u64;
            cum.push(acc);
        }
        SelectIndex {
            cum,
            ones: b.ones,
            version: b.version,
        }
    }

    /// 0-indexed position of the k-th set bit (k 1-indexed).
    pub fn select1(&self, b: &BitString, k: usize) -> Option<usize> {
        assert_eq!(
            self.version, b.version,
            "stale SelectIndex: bit string was mutated after build"
        );
        if k == 0 || k > self.ones {
            return None;
        }
        // first word whose cumulative count reaches k
        let w = self.cum.partition_point(|&c| c < k as u64) - 1;
        let before = self.cum[w] as usize;
        Some(w * WORD + select_in_word(b.words[w], k - before))
    }
}

/// Packed array of `len` unsigned integers of `width` bits each (width 0..=64).
///
/// Width 0 is a valid degenerate case: every entry reads as 0 and only 0 may
/// be stored (used e.g. for zero-bit satellites and single-symbol alphabets).
#[derive(Clone, Debug)]
pub struct PackedIntVec {
    words: Vec<u64>,
    len: usize,
    width: usize,
}

impl PackedIntVec {
    pub fn new(len: usize, width: usize) -> Self {
        assert!(width <= 64, "width {width} exceeds 64");
        let total_bits = len.checked_mul(width).expect("packed array size overflows");
        PackedIntVec {
            words: vec![0u64; total_bits.div_ceil(WORD)],
            len,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Logical size: `len * width` bits.
    pub fn bits(&self) -> u64 {
        self.len as u64 * self.width as u64
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        if self.width == 0 {
            return 0;
        }
        let bit = i * self.width;
        let (w, off) = (bit / WORD, bit % WORD);
        let mask = if self.width == 64 {
            !0u64
        } else {
            (1u64 << self.width) - 1
        };
        let lo = self.words[w] >> off;
        let v = if off + self.width <= WORD {
            lo
        } else {
            lo | (self.words[w + 1] << (WORD - off))
        };
        v & mask
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: u64) {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        if self.width == 0 {
            assert_eq!(v, 0, "value {v} does not fit width 0");
            return;
        }
        let mask = if self.width == 64 {
            !0u64
        } else {
            (1u64 << self.width) - 1
        };
        assert!(v <= mask, "value {v} does not fit width {}", self.width);
        let bit = i * self.width;
        let (w, off) = (bit / WORD, bit % WORD);
        self.words[w] = (self.words[w] & !(mask << off)) | (v << off);
        if off + self.width > WORD {
            let spill = WORD - off;
            self.words[w + 1] = (self.words[w + 1] & !(mask >> spill)) | (v >> spill);
        }
    }
}

/// Bits needed to store every value in `0..=max_value`.
pub(crate) fn bits_for(max_value: u64) -> usize {
    (64 - max_value.leading_zeros()) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> BitString {
        BitString::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn new_fill() {
        let b = BitString::new(0, false);
        assert_eq!(b.len(), 0);
        assert_eq!(b.popcount(), 0);
        let b = BitString::new(5, false);
        assert_eq!((b.len(), b.popcount()), (5, 0));
        let b = BitString::new(3, true);
        assert_eq!((b.len(), b.popcount()), (3, 3));
        assert!(b.get(0) && b.get(1) && b.get(2));
    }

    #[test]
    fn rank_examples() {
        let b = bits("10110");
        assert_eq!(b.rank1(0), 1);
        assert_eq!(b.rank1(2), 2);
        assert_eq!(bits("00000").rank1(4), 0);
    }

    #[test]
    fn select_examples() {
        let b = bits("10110");
        assert_eq!(b.select1(2), Some(2));
        assert_eq!(b.select1(3), Some(3));
        assert_eq!(b.select1(4), None);
        assert_eq!(bits("1").select1(1), Some(0));
    }

    #[test]
    fn flip_examples() {
        let mut b = bits("000");
        b.flip(1);
        assert!(b.get(1) && !b.get(0) && !b.get(2));
        b.flip(1);
        assert_eq!(b.popcount(), 0);

        let mut b = bits("10110");
        b.flip(0);
        assert!(!b.get(0));
        assert_eq!(b.rank1(4), 2);
    }

    #[test]
    fn select_index_examples() {
        let b = bits("10110");
        let idx = SelectIndex::build(&b);
        assert_eq!(idx.select1(&b, 1), Some(0));
        assert_eq!(idx.select1(&b, 2), Some(2));
        assert_eq!(idx.select1(&b, 3), Some(3));

        let b = bits("111");
        let idx = SelectIndex::build(&b);
        for k in 1..=3 {
            assert_eq!(idx.select1(&b, k), Some(k - 1));
        }

        // 64 zeros then a single one
        let mut b = BitString::new(65, false);
        b.set_bit(64, true);
        let idx = SelectIndex::build(&b);
        assert_eq!(idx.select1(&b, 1), Some(64));
    }

    #[test]
    #[should_panic(expected = "stale SelectIndex")]
    fn select_index_invalidated_by_flip() {
        let mut b = bits("10110");
        let idx = SelectIndex::build(&b);
        b.flip(0);
        let _ = idx.select1(&b, 1);
    }

    #[test]
    fn select_index_matches_scan_on_random_strings() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e1ec7);
        for _ in 0..1000 {
            let len = rng.gen_range(1..=10_000);
            let density = rng.gen_range(0.0..=1.0);
            let mut b = BitString::new(len, false);
            for i in 0..len {
                if rng.gen_bool(density) {
                    b.set_bit(i, true);
                }
            }
            let idx = SelectIndex::build(&b);
            // collect scan answers in one pass
            let mut pos = Vec::with_capacity(b.popcount());
            for i in 0..len {
                if b.get(i) {
                    pos.push(i);
                }
            }
            for (k, &p) in pos.iter().enumerate() {
                assert_eq!(idx.select1(&b, k + 1), Some(p));
            }
            assert_eq!(idx.select1(&b, pos.len() + 1), None);
        }
    }

    proptest! {
        #[test]
        fn rank_increments_match_bits(bits in proptest::collection::vec(any::<bool>(), 1..300)) {
            let b = BitString::from_bits(&bits);
            let mut prev = 0usize;
            for i in 0..b.len() {
                let r = b.rank1(i);
                prop_assert_eq!(r - prev, b.get(i) as usize);
                prev = r;
            }
        }

        #[test]
        fn rank_of_select_is_identity(bits in proptest::collection::vec(any::<bool>(), 1..300)) {
            let b = BitString::from_bits(&bits);
            for k in 1..=b.popcount() {
                let p = b.select1(k).unwrap();
                prop_assert!(b.get(p));
                prop_assert_eq!(b.rank1(p), k);
            }
        }

        #[test]
        fn double_flip_restores(bits in proptest::collection::vec(any::<bool>(), 1..300), i in 0usize..300) {
            let mut b = BitString::from_bits(&bits);
            let i = i % b.len();
            let before: Vec<bool> = (0..b.len()).map(|j| b.get(j)).collect();
            b.flip(i);
            b.flip(i);
            let after: Vec<bool> = (0..b.len()).map(|j| b.get(j)).collect();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn packed_vec_roundtrip(width in 0usize..=17, vals in proptest::collection::vec(any::<u64>(), 1..200)) {
            let mask = if width == 0 { 0 } else { (1u64 << width) - 1 };
            let mut pv = PackedIntVec::new(vals.len(), width);
            for (i, &v) in vals.iter().enumerate() {
                pv.set(i, v & mask);
            }
            for (i, &v) in vals.iter().enumerate() {
                prop_assert_eq!(pv.get(i), v & mask);
            }
        }
    }

    #[test]
    fn packed_vec_wide_entries() {
        let mut pv = PackedIntVec::new(7, 61);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<u64> = (0..7).map(|_| rng.gen_range(0..1u64 << 61)).collect();
        for (i, &v) in vals.iter().enumerate() {
            pv.set(i, v);
        }
        for (i, &v) in vals.iter().enumerate() {
            assert_eq!(pv.get(i), v);
        }
    }

    #[test]
    fn bits_for_bounds() {
        assert_eq!(bits_for(0), 0);
        assert_eq!(bits_for(1), 1);
        assert_eq!(bits_for(6), 3);
        assert_eq!(bits_for(7), 3);
        assert_eq!(bits_for(8), 4);
        assert_eq!(bits_for(u64::MAX), 64);
    }
}
