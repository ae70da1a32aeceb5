//! Cleary-style compact hash table: open addressing with linear probing and
//! quotienting.
//!
//! A cell stores only the quotient of its key (value 0 marks an empty cell,
//! quotient `q` is stored as `q + 1`). Two bookkeeping bit strings recover
//! which initial address each stored quotient belongs to:
//!
//! * `virgin[i]` is set iff some stored key has initial address `i`;
//! * `change[j]` is set iff slot `j` holds the last entry of its group.
//!
//! All keys sharing an initial address form one contiguous *group*, and the
//! groups inside a maximal occupied run appear in increasing order of initial
//! address, each placed as far left as those constraints allow. Under that
//! canonical arrangement the group for address `i` is the g-th group of the
//! run containing `i`, where `g` is the number of virgin bits in
//! `[run start, i]` - so membership, insertion and deletion all work with
//! scans bounded by the run length. Keys inside this table may be moved to
//! keep runs canonical (unlike trie slots, whose positions are identities).
//!
//! The sum of displacements over all keys is arrangement-independent, so the
//! classic linear-probing probe-count analysis applies unchanged.

use crate::bitvec::{bits_for, BitString, PackedIntVec};
use crate::hash::QuotientHash;
use crate::{Error, Result};

/// Deterministically derive a child seed (used when tables rebuild).
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One group of a run: all entries share the initial address
/// `run_start + home_rel` (mod capacity).
struct Group {
    home_rel: u64,
    /// (stored quotient, satellite) pairs
    entries: Vec<(u64, u64)>,
}

/// Compact hash table mapping keys from `0..u` to `sat_width`-bit satellites.
#[derive(Clone, Debug)]
pub struct CompactHashTable {
    hash: QuotientHash,
    cap: u64,
    sat_width: usize,
    quot: PackedIntVec,
    virgin: BitString,
    change: BitString,
    sats: PackedIntVec,
    len: u64,
    seed: u64,
    /// Run start valid while the table is 100% full (runs have no empty
    /// sentinel then); the first key of that run has displacement 0.
    full_anchor: Option<u64>,
}

impl CompactHashTable {
    /// Empty table of `cap` cells for keys `0..universe` with `sat_width`-bit
    /// satellite values.
    pub fn new(cap: u64, universe: u64, sat_width: usize, seed: u64) -> Result<Self> {
        assert!(cap >= 1, "capacity must be at least 1");
        assert!(universe >= cap, "universe smaller than capacity");
        let hash = QuotientHash::new(universe, cap, seed)?;
        let quot_width = bits_for(hash.max_quotient() + 1);
        let cap_us = usize::try_from(cap).map_err(|_| Error::capacity("capacity exceeds usize"))?;
        Ok(CompactHashTable {
            hash,
            cap,
            sat_width,
            quot: PackedIntVec::new(cap_us, quot_width),
            virgin: BitString::new(cap_us, false),
            change: BitString::new(cap_us, false),
            sats: PackedIntVec::new(cap_us, sat_width),
            len: 0,
            seed,
            full_anchor: None,
        })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> u64 {
        self.cap
    }

    pub fn universe(&self) -> u64 {
        self.hash.universe()
    }

    pub fn satellite_width(&self) -> usize {
        self.sat_width
    }

    /// Closed-form space: `cap * (quotient_width + sat_width + 2)` bits.
    pub fn bits_used(&self) -> u64 {
        self.cap * (self.quot.width() as u64 + self.sat_width as u64 + 2)
    }

    #[inline]
    fn occupied(&self, j: u64) -> bool {
        self.quot.get(j as usize) != 0
    }

    #[inline]
    fn next(&self, j: u64) -> u64 {
        if j + 1 == self.cap {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    fn prev(&self, j: u64) -> u64 {
        if j == 0 {
            self.cap - 1
        } else {
            j - 1
        }
    }

    /// Start of the maximal occupied run containing the occupied slot `from`.
    fn run_start(&self, from: u64) -> u64 {
        if self.len == self.cap {
            return self.full_anchor.expect("full table keeps an anchor");
        }
        let mut s = from;
        while self.occupied(self.prev(s)) {
            s = self.prev(s);
        }
        s
    }

    /// Slot currently holding key `x`, if present.
    pub fn lookup_slot(&self, x: u64) -> Option<u64> {
        if self.len == 0 {
            return None;
        }
        let (h, q) = self.hash.split(x);
        if !self.virgin.get(h as usize) {
            return None;
        }
        debug_assert!(self.occupied(h));
        let start = self.run_start(h);
        // groups strictly before ours in this run
        let mut groups_before = 0u64;
        let mut t = start;
        while t != h {
            if self.virgin.get(t as usize) {
                groups_before += 1;
            }
            t = self.next(t);
        }
        let stored = q + 1;
        let mut ends_seen = 0u64;
        let mut j = start;
        loop {
            debug_assert!(self.occupied(j));
            if ends_seen == groups_before && self.quot.get(j as usize) == stored {
                return Some(j);
            }
            if self.change.get(j as usize) {
                ends_seen += 1;
                if ends_seen > groups_before {
                    return None;
                }
            }
            j = self.next(j);
        }
    }

    /// Satellite stored for key `x`, if present. Expected cost is
    /// proportional to the run length at `h(x)`.
    pub fn lookup(&self, x: u64) -> Option<u64> {
        self.lookup_slot(x).map(|j| self.sats.get(j as usize))
    }

    /// Current displacement of key `x`: slot minus initial address, mod cap.
    /// The probe count of a successful search is this plus one.
    pub fn displacement_of(&self, x: u64) -> Option<u64> {
        let j = self.lookup_slot(x)?;
        let h = self.hash.initial_address(x);
        Some((j + self.cap - h) % self.cap)
    }

    /// Insert `x -> v`. Re-inserting an existing key overwrites its
    /// satellite; inserting a new key into a full table is a capacity error.
    pub fn insert(&mut self, x: u64, v: u64) -> Result<()> {
        if let Some(j) = self.lookup_slot(x) {
            self.sats.set(j as usize, v);
            return Ok(());
        }
        if self.len == self.cap {
            return Err(Error::capacity(format!(
                "hash table full ({} keys)",
                self.cap
            )));
        }
        let (h, q) = self.hash.split(x);
        if !self.occupied(h) {
            debug_assert!(!self.virgin.get(h as usize));
            self.quot.set(h as usize, q + 1);
            self.sats.set(h as usize, v);
            self.virgin.set_bit(h as usize, true);
            self.change.set_bit(h as usize, true);
            self.len += 1;
            if self.len == self.cap {
                self.full_anchor = Some(h);
            }
            return Ok(());
        }
        let start = self.run_start(h);
        let (mut groups, span) = self.collect_run(start);
        let h_rel = (h + self.cap - start) % self.cap;
        match groups.binary_search_by_key(&h_rel, |g| g.home_rel) {
            Ok(i) => groups[i].entries.push((q + 1, v)),
            Err(i) => groups.insert(
                i,
                Group {
                    home_rel: h_rel,
                    entries: vec![(q + 1, v)],
                },
            ),
        }
        self.clear_span(start, span);
        self.place_run(start, &groups);
        self.len += 1;
        if self.len == self.cap {
            self.full_anchor = Some(start);
        }
        Ok(())
    }

    /// Remove key `x`; the remaining keys of its run are re-placed
    /// canonically (they may move).
    pub fn delete(&mut self, x: u64) -> Result<()> {
        let j = self
            .lookup_slot(x)
            .ok_or_else(|| Error::not_found(format!("key {x}")))?;
        let h = self.hash.initial_address(x);
        let start = self.run_start(h);
        let (mut groups, span) = self.collect_run(start);
        let j_rel = (j + self.cap - start) % self.cap;
        // replay the canonical placement to find which entry sits at j
        let mut cur = 0u64;
        let mut found = None;
        'outer: for (gi, g) in groups.iter().enumerate() {
            cur = cur.max(g.home_rel);
            for ei in 0..g.entries.len() {
                if cur == j_rel {
                    found = Some((gi, ei));
                    break 'outer;
                }
                cur += 1;
            }
        }
        let (gi, ei) = found.expect("located slot lies inside its run");
        groups[gi].entries.remove(ei);
        if groups[gi].entries.is_empty() {
            groups.remove(gi);
        }
        self.clear_span(start, span);
        self.place_run(start, &groups);
        self.len -= 1;
        self.full_anchor = None;
        Ok(())
    }

    /// All (key, satellite) pairs, keys reconstructed from their group's
    /// initial address and the stored quotient. Each present key appears
    /// exactly once.
    pub fn entries(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::with_capacity(self.len as usize);
        if self.len == 0 {
            return out;
        }
        let starts: Vec<u64> = if self.len == self.cap {
            vec![self.full_anchor.expect("full table keeps an anchor")]
        } else {
            let first_empty = (0..self.cap)
                .find(|&j| !self.occupied(j))
                .expect("table not full");
            let mut starts = Vec::new();
            let mut prev_occ = false;
            let mut j = self.next(first_empty);
            while j != first_empty {
                let occ = self.occupied(j);
                if occ && !prev_occ {
                    starts.push(j);
                }
                prev_occ = occ;
                j = self.next(j);
            }
            starts
        };
        for start in starts {
            let (groups, _) = self.collect_run(start);
            for g in &groups {
                let home = (start + g.home_rel) % self.cap;
                for &(stored, sat) in &g.entries {
                    out.push((self.hash.reconstruct(home, stored - 1), sat));
                }
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> {
        self.entries().into_iter()
    }

    /// Rebuild into a table of `new_cap` cells over the same universe, with a
    /// freshly derived hash function.
    pub fn grow(&self, new_cap: u64) -> Result<CompactHashTable> {
        if new_cap < self.len {
            return Err(Error::capacity(format!(
                "cannot rebuild {} keys into {new_cap} cells",
                self.len
            )));
        }
        let mut t = CompactHashTable::new(
            new_cap,
            self.hash.universe(),
            self.sat_width,
            mix_seed(self.seed, 0x6772_6f77),
        )?;
        for (k, v) in self.entries() {
            t.insert(k, v).expect("rebuilt table has room");
        }
        Ok(t)
    }

    /// Decode the run starting at `start` into its groups. Returns the groups
    /// (in increasing home order) and the run length in slots.
    fn collect_run(&self, start: u64) -> (Vec<Group>, u64) {
        let mut groups: Vec<Group> = Vec::new();
        let mut homes: Vec<u64> = Vec::new();
        let mut cur: Vec<(u64, u64)> = Vec::new();
        let mut rel = 0u64;
        let mut j = start;
        while self.occupied(j) {
            if self.virgin.get(j as usize) {
                homes.push(rel);
            }
            cur.push((self.quot.get(j as usize), self.sats.get(j as usize)));
            if self.change.get(j as usize) {
                let home_rel = homes[groups.len()];
                groups.push(Group {
                    home_rel,
                    entries: std::mem::take(&mut cur),
                });
            }
            rel += 1;
            j = self.next(j);
            if rel == self.cap {
                break;
            }
        }
        debug_assert!(cur.is_empty(), "run must end on a group boundary");
        debug_assert_eq!(groups.len(), homes.len());
        debug_assert_eq!(groups.first().map(|g| g.home_rel), Some(0));
        (groups, rel)
    }

    fn clear_span(&mut self, start: u64, span: u64) {
        for rel in 0..span {
            let j = ((start + rel) % self.cap) as usize;
            self.quot.set(j, 0);
            self.virgin.set_bit(j, false);
            self.change.set_bit(j, false);
        }
    }

    /// Canonical placement: groups in home order, each as far left as the
    /// previous group and its own home allow.
    fn place_run(&mut self, start: u64, groups: &[Group]) {
        let mut cur = 0u64;
        for g in groups {
            debug_assert!(!g.entries.is_empty());
            cur = cur.max(g.home_rel);
            self.virgin
                .set_bit(((start + g.home_rel) % self.cap) as usize, true);
            for (k, &(stored, sat)) in g.entries.iter().enumerate() {
                let j = ((start + cur) % self.cap) as usize;
                self.quot.set(j, stored);
                self.sats.set(j, sat);
                self.change.set_bit(j, k + 1 == g.entries.len());
                cur += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn empty_table() {
        let t = CompactHashTable::new(8, 64, 4, 1).unwrap();
        assert_eq!(t.len(), 0);
        for x in 0..64 {
            assert_eq!(t.lookup(x), None);
        }
    }

    #[test]
    fn degenerate_one_cell() {
        let mut t = CompactHashTable::new(1, 1, 0, 1).unwrap();
        t.insert(0, 0).unwrap();
        assert_eq!(t.lookup(0), Some(0));
        assert_eq!(t.len(), 1);
        // same key again is an upsert, not a capacity error
        t.insert(0, 0).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn bits_formula() {
        let t = CompactHashTable::new(1024, 1 << 20, 7, 3).unwrap();
        let p = t.hash.prime();
        let qw = bits_for((p - 1) / 1024 + 1) as u64;
        assert_eq!(t.bits_used(), 1024 * (qw + 7 + 2));
        // matches the actual backing stores up to word rounding
        let actual = t.quot.bits() + t.sats.bits() + 2 * 1024;
        assert_eq!(t.bits_used(), actual);
    }

    #[test]
    fn insert_lookup_roundtrip() {
        let mut t = CompactHashTable::new(8, 64, 4, 7).unwrap();
        t.insert(5, 3).unwrap();
        assert_eq!(t.lookup(5), Some(3));
        t.insert(5, 6).unwrap();
        assert_eq!(t.lookup(5), Some(6));
        assert_eq!(t.len(), 1);
        t.insert(7, 1).unwrap();
        assert_eq!(t.lookup(7), Some(1));
        assert_eq!(t.lookup(8), None);
    }

    #[test]
    fn shadow_map_at_load_08() {
        let mut t = CompactHashTable::new(1024, 1 << 20, 7, 42).unwrap();
        let mut shadow = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        while shadow.len() < 819 {
            let x = rng.gen_range(0..1u64 << 20);
            let v = rng.gen_range(0..128);
            t.insert(x, v).unwrap();
            shadow.insert(x, v);
        }
        for (&k, &v) in &shadow {
            assert_eq!(t.lookup(k), Some(v));
        }
        for _ in 0..2000 {
            let x = rng.gen_range(0..1u64 << 20);
            assert_eq!(t.lookup(x), shadow.get(&x).copied());
        }
    }

    #[test]
    fn delete_roundtrip() {
        let mut t = CompactHashTable::new(8, 64, 4, 7).unwrap();
        t.insert(5, 3).unwrap();
        t.delete(5).unwrap();
        assert_eq!(t.lookup(5), None);
        assert_eq!(t.len(), 0);
        assert!(matches!(t.delete(5), Err(Error::NotFound(_))));
    }

    #[test]
    fn delete_half() {
        let mut t = CompactHashTable::new(256, 1 << 16, 8, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut keys = Vec::new();
        while keys.len() < 100 {
            let x = rng.gen_range(0..1u64 << 16);
            if !keys.contains(&x) {
                keys.push(x);
                t.insert(x, x % 256).unwrap();
            }
        }
        let mut gone = keys.clone();
        gone.shuffle(&mut rng);
        let gone: Vec<u64> = gone.into_iter().take(50).collect();
        for &x in &gone {
            t.delete(x).unwrap();
        }
        for &x in &keys {
            let expect = if gone.contains(&x) {
                None
            } else {
                Some(x % 256)
            };
            assert_eq!(t.lookup(x), expect, "key {x}");
        }
    }

    #[test]
    fn iterate_matches_shadow() {
        let t = CompactHashTable::new(8, 64, 4, 7).unwrap();
        assert!(t.entries().is_empty());

        let mut t = CompactHashTable::new(8, 64, 4, 7).unwrap();
        t.insert(5, 3).unwrap();
        t.insert(9, 1).unwrap();
        let mut got = t.entries();
        got.sort_unstable();
        assert_eq!(got, vec![(5, 3), (9, 1)]);

        let mut t = CompactHashTable::new(2048, 1 << 24, 10, 5).unwrap();
        let mut shadow = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        while shadow.len() < 1000 {
            let x = rng.gen_range(0..1u64 << 24);
            let v = rng.gen_range(0..1024);
            t.insert(x, v).unwrap();
            shadow.insert(x, v);
        }
        let got: HashMap<u64, u64> = t.entries().into_iter().collect();
        assert_eq!(got, shadow);
    }

    #[test]
    fn grow_preserves_contents() {
        let t = CompactHashTable::new(8, 64, 4, 7).unwrap();
        let g = t.grow(16).unwrap();
        assert_eq!(g.capacity(), 16);
        assert_eq!(g.len(), 0);

        let mut t = CompactHashTable::new(16, 256, 6, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut shadow = HashMap::new();
        while shadow.len() < 10 {
            let x = rng.gen_range(0..256);
            let v = rng.gen_range(0..64);
            t.insert(x, v).unwrap();
            shadow.insert(x, v);
        }
        let g = t.grow(64).unwrap();
        for (&k, &v) in &shadow {
            assert_eq!(g.lookup(k), Some(v));
        }
    }

    #[test]
    fn grow_to_exact_len_fills_table() {
        let mut t = CompactHashTable::new(16, 256, 6, 11).unwrap();
        for x in [3u64, 50, 99, 180] {
            t.insert(x, x % 64).unwrap();
        }
        let mut g = t.grow(4).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.capacity(), 4);
        for x in [3u64, 50, 99, 180] {
            assert_eq!(g.lookup(x), Some(x % 64));
        }
        // absent keys on a 100% full table must terminate and miss
        assert_eq!(g.lookup(7), None);
        assert!(matches!(g.insert(7, 0), Err(Error::Capacity(_))));
        // upsert still works at full
        g.insert(3, 9).unwrap();
        assert_eq!(g.lookup(3), Some(9));
    }

    #[test]
    fn full_table_then_delete() {
        let mut t = CompactHashTable::new(8, 64, 6, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut shadow = HashMap::new();
        while shadow.len() < 8 {
            let x = rng.gen_range(0..64);
            t.insert(x, x % 64).unwrap();
            shadow.insert(x, x % 64);
        }
        assert_eq!(t.len(), 8);
        for x in 0..64 {
            assert_eq!(t.lookup(x), shadow.get(&x).copied(), "full, key {x}");
        }
        let victim = *shadow.keys().next().unwrap();
        t.delete(victim).unwrap();
        shadow.remove(&victim);
        for x in 0..64 {
            assert_eq!(
                t.lookup(x),
                shadow.get(&x).copied(),
                "after delete, key {x}"
            );
        }
    }

    #[test]
    fn displacement_sum_matches_plain_linear_probing() {
        // grouped rearrangement must preserve the displacement total
        let mut t = CompactHashTable::new(64, 1 << 12, 4, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut keys = Vec::new();
        while keys.len() < 48 {
            let x = rng.gen_range(0..1u64 << 12);
            if !keys.contains(&x) {
                keys.push(x);
                t.insert(x, 0).unwrap();
            }
        }
        // plain FCFS simulation over the same hash
        let mut slots = [false; 64];
        let mut fcfs_sum = 0u64;
        for &x in &keys {
            let h = t.hash.initial_address(x);
            let mut j = h;
            while slots[j as usize] {
                j = (j + 1) % 64;
            }
            slots[j as usize] = true;
            fcfs_sum += (j + 64 - h) % 64;
        }
        let grouped_sum: u64 = keys.iter().map(|&x| t.displacement_of(x).unwrap()).sum();
        assert_eq!(grouped_sum, fcfs_sum);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_ops_match_hashmap(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cap = rng.gen_range(1..40u64);
            let universe = cap * rng.gen_range(1..50u64);
            let mut t = CompactHashTable::new(cap, universe, 8, seed).unwrap();
            let mut shadow: HashMap<u64, u64> = HashMap::new();
            for _ in 0..300 {
                let x = rng.gen_range(0..universe);
                match rng.gen_range(0..3) {
                    0 => {
                        let v = rng.gen_range(0..256);
                        match t.insert(x, v) {
                            Ok(()) => { shadow.insert(x, v); }
                            Err(_) => {
                                prop_assert_eq!(shadow.len() as u64, cap);
                                prop_assert!(!shadow.contains_key(&x));
                            }
                        }
                    }
                    1 => {
                        let deleted = t.delete(x).is_ok();
                        prop_assert_eq!(deleted, shadow.remove(&x).is_some());
                    }
                    _ => {
                        prop_assert_eq!(t.lookup(x), shadow.get(&x).copied());
                    }
                }
            }
            let mut got = t.entries();
            got.sort_unstable();
            let mut want: Vec<(u64, u64)> = shadow.into_iter().collect();
            want.sort_unstable();
            prop_assert_eq!(got, want);
        }
    }
}
