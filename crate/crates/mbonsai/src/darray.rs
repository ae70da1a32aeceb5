//! The displacement array: a compact rewriteable array of non-negative
//! integers (create / get / set, zero-initialized) in two representations.
//!
//! * [`GammaBlockArray`] - values are stored as gamma codes of `v + 1`,
//!   concatenated per block of 256 entries. A get decodes its block up to the
//!   requested position; a set decodes and re-encodes the whole block.
//! * [`LayeredArray`] - a three-layer structure: a packed array of 3-bit
//!   cells holds values up to 6 directly and the escape value 7 otherwise;
//!   escaped values up to 134 live in a compact hash table keyed by position
//!   with 7-bit satellites (`value - 7`); anything larger goes to an ordinary
//!   ordered map.
//!
//! Both representations expose the same accounting record used for the
//! bits-per-entry space measurements.

use std::collections::BTreeMap;

use crate::bitvec::PackedIntVec;
use crate::cht::{mix_seed, CompactHashTable};
use crate::{Error, Result};

/// Entries per gamma block.
pub const GAMMA_BLOCK: usize = 256;

/// Append-oriented bit buffer backing the gamma code streams. Bit `i` of the
/// stream is bit `i % 64` of word `i / 64`.
#[derive(Clone, Debug, Default)]
pub struct BitBuf {
    words: Vec<u64>,
    len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        BitBuf::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn clear(&mut self) {
        self.words.clear();
        self.len = 0;
    }

    #[inline]
    pub fn push_bit(&mut self, bit: bool) {
        let (w, off) = (self.len / 64, self.len % 64);
        if w == self.words.len() {
            self.words.push(0);
        }
        if bit {
            self.words[w] |= 1u64 << off;
        }
        self.len += 1;
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }
}

/// Length in bits of the gamma code of `v` (`v >= 1`).
pub fn gamma_len(v: u64) -> u64 {
    assert!(v >= 1, "gamma codes are defined for values >= 1");
    2 * v.ilog2() as u64 + 1
}

/// Append the gamma code of `v` (`v >= 1`): `floor(log2 v)` zeros, then the
/// binary representation of `v` starting with its leading 1.
pub fn encode_gamma(buf: &mut BitBuf, v: u64) {
    assert!(v >= 1, "gamma codes are defined for values >= 1");
    let k = v.ilog2();
    for _ in 0..k {
        buf.push_bit(false);
    }
    for bit in (0..=k).rev() {
        buf.push_bit(v >> bit & 1 == 1);
    }
}

/// Decode one gamma code starting at `offset`; returns the value and the
/// offset just past the code.
pub fn decode_gamma(buf: &BitBuf, offset: usize) -> Result<(u64, usize)> {
    let mut pos = offset;
    while pos < buf.len() && !buf.get(pos) {
        pos += 1;
    }
    if pos >= buf.len() {
        return Err(Error::Format(format!(
            "truncated gamma code at bit {offset}"
        )));
    }
    let zeros = pos - offset;
    if pos + zeros >= buf.len() {
        return Err(Error::Format(format!(
            "truncated gamma code at bit {offset}"
        )));
    }
    let mut v = 1u64;
    for i in 1..=zeros {
        v = v << 1 | buf.get(pos + i) as u64;
    }
    Ok((v, pos + zeros + 1))
}

/// Gamma-coded block representation of the displacement array.
#[derive(Clone, Debug)]
pub struct GammaBlockArray {
    len: usize,
    blocks: Vec<BitBuf>,
    payload_bits: u64,
    reencodes: u64,
}

impl GammaBlockArray {
    /// All entries read as 0 (each block starts as a run of 1-bit codes).
    pub fn new(len: usize) -> Self {
        let n_blocks = len.div_ceil(GAMMA_BLOCK);
        let mut blocks = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            let entries = (len - b * GAMMA_BLOCK).min(GAMMA_BLOCK);
            let mut buf = BitBuf::new();
            for _ in 0..entries {
                buf.push_bit(true); // gamma(0 + 1)
            }
            blocks.push(buf);
        }
        GammaBlockArray {
            len,
            blocks,
            payload_bits: len as u64,
            reencodes: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Total code length: the sum of `|gamma(D[i] + 1)|` over all entries.
    pub fn payload_bits(&self) -> u64 {
        self.payload_bits
    }

    /// Number of set operations, each of which re-encoded one block.
    pub fn reencodes(&self) -> u64 {
        self.reencodes
    }

    fn block_entries(&self, b: usize) -> usize {
        (self.len - b * GAMMA_BLOCK).min(GAMMA_BLOCK)
    }

    pub fn get(&self, i: usize) -> u64 {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        let buf = &self.blocks[i / GAMMA_BLOCK];
        let mut off = 0;
        let mut v = 0;
        for _ in 0..=(i % GAMMA_BLOCK) {
            let (val, next) = decode_gamma(buf, off).expect("block streams are well-formed");
            v = val;
            off = next;
        }
        v - 1
    }

    pub fn set(&mut self, i: usize, v: u64) {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        let b = i / GAMMA_BLOCK;
        let entries = self.block_entries(b);
        let buf = &mut self.blocks[b];
        let mut vals = Vec::with_capacity(entries);
        let mut off = 0;
        for _ in 0..entries {
            let (val, next) = decode_gamma(buf, off).expect("block streams are well-formed");
            vals.push(val - 1);
            off = next;
        }
        vals[i % GAMMA_BLOCK] = v;
        self.payload_bits -= buf.len() as u64;
        buf.clear();
        for &val in &vals {
            encode_gamma(buf, val + 1);
        }
        self.payload_bits += buf.len() as u64;
        self.reencodes += 1;
    }

    /// Decode every entry in order.
    pub fn for_each(&self, mut f: impl FnMut(u64)) {
        for b in 0..self.blocks.len() {
            let buf = &self.blocks[b];
            let mut off = 0;
            for _ in 0..self.block_entries(b) {
                let (val, next) = decode_gamma(buf, off).expect("block streams are well-formed");
                f(val - 1);
                off = next;
            }
        }
    }
}

/// First-layer width of the layered representation.
pub const DELTA0: usize = 3;
/// Satellite width of the second layer.
pub const DELTA1: usize = 7;
/// Largest value stored directly in the first layer: `2^DELTA0 - 2`.
pub const DIRECT_MAX: u64 = (1 << DELTA0) - 2;
/// First-layer escape marker: `2^DELTA0 - 1`.
const ESCAPE: u64 = (1 << DELTA0) - 1;
/// Largest value held by the second layer: `2^DELTA0 + 2^DELTA1 - 2`.
pub const LAYER2_MAX: u64 = (1 << DELTA0) + (1 << DELTA1) - 2;
/// Bits charged per third-layer entry in the accounting. The third layer is
/// an ordinary ordered map; this is the documented flat cost per entry
/// (three words of key/value/linkage on a 64-bit machine).
pub const LAYER3_BITS_PER_ENTRY: u64 = 384;

/// Which layer currently holds an entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Direct,
    Second,
    Third,
}

/// Three-layer representation of the displacement array.
#[derive(Clone, Debug)]
pub struct LayeredArray {
    d0: PackedIntVec,
    len: usize,
    l2: Option<CompactHashTable>,
    l3: BTreeMap<u64, u64>,
    seed: u64,
    l2_touches: u64,
    l3_touches: u64,
    transitions: u64,
}

impl LayeredArray {
    pub fn new(len: usize, seed: u64) -> Self {
        LayeredArray {
            d0: PackedIntVec::new(len, DELTA0),
            len,
            l2: None,
            l3: BTreeMap::new(),
            seed,
            l2_touches: 0,
            l3_touches: 0,
            transitions: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn layer_of(&self, i: usize) -> Layer {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        if self.d0.get(i) < ESCAPE {
            Layer::Direct
        } else if self
            .l2
            .as_ref()
            .is_some_and(|t| t.lookup(i as u64).is_some())
        {
            Layer::Second
        } else {
            Layer::Third
        }
    }

    pub fn get(&self, i: usize) -> u64 {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        let d = self.d0.get(i);
        if d < ESCAPE {
            return d;
        }
        if let Some(sat) = self.l2.as_ref().and_then(|t| t.lookup(i as u64)) {
            return sat + ESCAPE;
        }
        *self
            .l3
            .get(&(i as u64))
            .expect("escaped entry present in exactly one upper layer")
    }

    pub fn set(&mut self, i: usize, v: u64) {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        let old = self.layer_of(i);
        if old != Layer::Direct {
            self.l2_touches += (old == Layer::Second) as u64;
            self.l3_touches += (old == Layer::Third) as u64;
        }
        let new = if v <= DIRECT_MAX {
            Layer::Direct
        } else if v <= LAYER2_MAX {
            Layer::Second
        } else {
            Layer::Third
        };
        match new {
            Layer::Direct => self.d0.set(i, v),
            Layer::Second => {
                self.d0.set(i, ESCAPE);
                self.l2_upsert(i as u64, v - ESCAPE);
            }
            Layer::Third => {
                self.d0.set(i, ESCAPE);
                self.l3.insert(i as u64, v);
                self.l3_touches += 1;
            }
        }
        // erase the stale entry when the value moved across layers
        match (old, new) {
            (Layer::Second, Layer::Direct) | (Layer::Second, Layer::Third) => {
                self.l2
                    .as_mut()
                    .expect("old layer-2 entry exists")
                    .delete(i as u64)
                    .expect("old layer-2 entry exists");
                self.l2_touches += 1;
            }
            (Layer::Third, Layer::Direct) | (Layer::Third, Layer::Second) => {
                self.l3.remove(&(i as u64));
                self.l3_touches += 1;
            }
            _ => {}
        }
        if old != new {
            self.transitions += 1;
        }
    }

    fn l2_upsert(&mut self, key: u64, sat: u64) {
        if self.l2.is_none() {
            let cap = (self.len as u64 / 8).max(64).min(self.len as u64).max(1);
            self.l2 = Some(
                CompactHashTable::new(cap, self.len as u64, DELTA1, mix_seed(self.seed, 0x6c32))
                    .expect("layer-2 table parameters are valid"),
            );
        }
        let t = self.l2.as_mut().unwrap();
        // forced rebuild if full with a genuinely new key
        if t.len() == t.capacity() && t.lookup(key).is_none() {
            let new_cap = (t.capacity() * 2).min(self.len as u64);
            *t = t.grow(new_cap).expect("layer-2 rebuild");
        }
        t.insert(key, sat).expect("layer-2 has room");
        self.l2_touches += 1;
        // grow-by-doubling once load exceeds 0.8
        if t.len() * 5 > t.capacity() * 4 && t.capacity() < self.len as u64 {
            let new_cap = (t.capacity() * 2).min(self.len as u64);
            *t = t.grow(new_cap).expect("layer-2 rebuild");
        }
    }

    /// Space of this representation:
    /// `len * DELTA0 + layer2 bits + layer3 entries * LAYER3_BITS_PER_ENTRY`.
    pub fn bits_used(&self) -> u64 {
        self.len as u64 * DELTA0 as u64
            + self.l2.as_ref().map_or(0, |t| t.bits_used())
            + self.l3.len() as u64 * LAYER3_BITS_PER_ENTRY
    }

    pub fn for_each(&self, mut f: impl FnMut(u64)) {
        for i in 0..self.len {
            f(self.get(i));
        }
    }

    /// Counts entries violating layer exclusivity (must be 0).
    pub fn audit_layers(&self) -> usize {
        let mut violations = 0;
        for i in 0..self.len as u64 {
            let direct = self.d0.get(i as usize) < ESCAPE;
            let in_l2 = self.l2.as_ref().is_some_and(|t| t.lookup(i).is_some());
            let in_l3 = self.l3.contains_key(&i);
            let ok = if direct {
                !in_l2 && !in_l3
            } else {
                in_l2 != in_l3
            };
            if !ok {
                violations += 1;
            }
        }
        violations
    }

    /// (layer-2 touches, layer-3 touches, cross-layer transitions)
    pub fn counters(&self) -> (u64, u64, u64) {
        (self.l2_touches, self.l3_touches, self.transitions)
    }
}

/// Which displacement representation a trie uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Repr {
    /// Gamma-coded blocks ("m-Bonsai (gamma)").
    Gamma,
    /// Three-layer structure ("m-Bonsai (recursive)").
    Recursive,
}

impl Repr {
    pub fn name(self) -> &'static str {
        match self {
            Repr::Gamma => "gamma",
            Repr::Recursive => "recursive",
        }
    }
}

impl std::str::FromStr for Repr {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gamma" => Ok(Repr::Gamma),
            "recursive" => Ok(Repr::Recursive),
            other => Err(format!("unknown variant {other:?} (gamma|recursive)")),
        }
    }
}

/// Space accounting for a displacement array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct DispAccounting {
    pub entries: u64,
    /// `entries + sum(D[i])`: cost of a unary encoding.
    pub unary_bits: u64,
    /// `sum |gamma(D[i] + 1)|`.
    pub gamma_bits: u64,
    /// Space of the layered representation; `None` for gamma arrays.
    pub layered_bits: Option<u64>,
}

impl DispAccounting {
    /// Bits actually used by the active representation.
    pub fn active_bits(&self) -> u64 {
        self.layered_bits.unwrap_or(self.gamma_bits)
    }
}

/// A displacement array in one of the two concrete representations.
#[derive(Clone, Debug)]
pub enum DisplacementArray {
    Gamma(GammaBlockArray),
    Recursive(LayeredArray),
}

impl DisplacementArray {
    /// Zero-initialized array of `len` entries.
    pub fn new(repr: Repr, len: usize, seed: u64) -> Self {
        match repr {
            Repr::Gamma => DisplacementArray::Gamma(GammaBlockArray::new(len)),
            Repr::Recursive => DisplacementArray::Recursive(LayeredArray::new(len, seed)),
        }
    }

    pub fn repr(&self) -> Repr {
        match self {
            DisplacementArray::Gamma(_) => Repr::Gamma,
            DisplacementArray::Recursive(_) => Repr::Recursive,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DisplacementArray::Gamma(a) => a.len(),
            DisplacementArray::Recursive(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> u64 {
        match self {
            DisplacementArray::Gamma(a) => a.get(i),
            DisplacementArray::Recursive(a) => a.get(i),
        }
    }

    pub fn set(&mut self, i: usize, v: u64) {
        match self {
            DisplacementArray::Gamma(a) => a.set(i, v),
            DisplacementArray::Recursive(a) => a.set(i, v),
        }
    }

    pub fn for_each(&self, f: impl FnMut(u64)) {
        match self {
            DisplacementArray::Gamma(a) => a.for_each(f),
            DisplacementArray::Recursive(a) => a.for_each(f),
        }
    }

    pub fn accounting(&self) -> DispAccounting {
        let mut sum = 0u64;
        let mut gamma_bits = 0u64;
        self.for_each(|v| {
            sum += v;
            gamma_bits += gamma_len(v + 1);
        });
        if let DisplacementArray::Gamma(a) = self {
            debug_assert_eq!(gamma_bits, a.payload_bits());
        }
        DispAccounting {
            entries: self.len() as u64,
            unary_bits: self.len() as u64 + sum,
            gamma_bits,
            layered_bits: match self {
                DisplacementArray::Gamma(_) => None,
                DisplacementArray::Recursive(a) => Some(a.bits_used()),
            },
        }
    }

    /// (gamma block re-encodes, layer transitions) since creation.
    pub fn op_counters(&self) -> (u64, u64) {
        match self {
            DisplacementArray::Gamma(a) => (a.reencodes(), 0),
            DisplacementArray::Recursive(a) => (0, a.counters().2),
        }
    }
}
