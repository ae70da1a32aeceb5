//! Traversal of an m-Bonsai trie in time linear in the table size.
//!
//! The trie only supports leaf-to-root walks natively, so enumeration builds
//! three small support structures first:
//!
//! * `A` - one cell per slot, holding the node's degree during construction
//!   and reused as the per-node child cursor during the walk;
//! * `B` - the unary degree sequence `1 0^deg(0) 1 0^deg(1) ...` over all
//!   slots, with a select directory (`start(v)`, the total degree of slots
//!   below `v`, is one select away);
//! * `C` - all child labels, grouped by parent slot in `start` order.
//!
//! With those, a depth-first walk needs no stack: descend through the next
//! unvisited child label, ascend through `parent`. Labels inside a node's
//! group come out in scan order for [`TraversalIndex::build`] and in
//! lexicographic order for [`TraversalIndex::build_sorted`] (which buckets
//! slots per symbol, differentially gamma-coded, instead of rescanning).
//!
//! [`naive_dfs`] is the baseline that probes all `sigma` child slots of every
//! node; it visits the same node set in O(n sigma) probes.

use std::collections::BTreeMap;

use crate::bitvec::{bits_for, BitString, PackedIntVec, SelectIndex};
use crate::darray::{decode_gamma, encode_gamma, BitBuf};
use crate::trie::{MBonsaiTrie, NodeId, Symbol};

/// Support structures for one depth-first walk of one trie version.
pub struct TraversalIndex {
    a: PackedIntVec,
    b: BitString,
    bsel: SelectIndex,
    c: PackedIntVec,
    children: u64,
    slots: u64,
    version: u64,
}

impl TraversalIndex {
    /// Build by two scans of the cell array; child labels within a node are
    /// in slot-scan order.
    pub fn build(trie: &MBonsaiTrie) -> Self {
        let mut idx = Self::degrees_and_unary(trie);
        // second scan: place each node's label into its parent's group,
        // consuming the counts in A back down to zero
        let m = trie.capacity();
        for j in 0..m {
            let node = NodeId::from_index(j);
            if j == trie.root().index() || !trie.is_live_slot(j) {
                continue;
            }
            let p = trie
                .parent(node)
                .expect("live non-root has a parent")
                .index();
            let label = trie.label(node).expect("live non-root has a label");
            idx.place_label(p, label);
        }
        debug_assert!((0..m as usize).all(|v| idx.a.get(v) == 0));
        idx
    }

    /// Build with each node's child labels sorted: bucket the slots per
    /// symbol during the first scan (positions are strictly increasing, so
    /// each bucket is stored as differential gamma codes), then fill `C`
    /// symbol by symbol.
    pub fn build_sorted(trie: &MBonsaiTrie) -> Self {
        let mut idx = Self::degrees_and_unary(trie);
        let m = trie.capacity();
        let mut buckets: BTreeMap<Symbol, (BitBuf, u64)> = BTreeMap::new();
        for j in 0..m {
            let node = NodeId::from_index(j);
            if j == trie.root().index() || !trie.is_live_slot(j) {
                continue;
            }
            let label = trie.label(node).expect("live non-root has a label");
            let (buf, last) = buckets.entry(label).or_insert_with(|| (BitBuf::new(), 0));
            // first entry stores j + 1, later ones the gap to the previous
            let delta = if buf.is_empty() { j + 1 } else { j - *last };
            encode_gamma(buf, delta);
            *last = j;
        }
        for (label, (buf, _)) in &buckets {
            let mut off = 0;
            let mut j = 0u64;
            let mut first = true;
            while off < buf.len() {
                let (delta, next) = decode_gamma(buf, off).expect("bucket streams are well-formed");
                j = if first { delta - 1 } else { j + delta };
                first = false;
                off = next;
                let p = trie
                    .parent(NodeId::from_index(j))
                    .expect("live non-root has a parent")
                    .index();
                idx.place_label(p, *label);
            }
        }
        debug_assert!((0..m as usize).all(|v| idx.a.get(v) == 0));
        idx
    }

    /// First scan: degree counts in `A`, then `B` and its select directory.
    fn degrees_and_unary(trie: &MBonsaiTrie) -> Self {
        let m = trie.capacity();
        let sigma = trie.sigma() as u64;
        let mut a = PackedIntVec::new(m as usize, bits_for(sigma));
        for j in 0..m {
            let node = NodeId::from_index(j);
            if j == trie.root().index() || !trie.is_live_slot(j) {
                continue;
            }
            let p = trie
                .parent(node)
                .expect("live non-root has a parent")
                .index() as usize;
            a.set(p, a.get(p) + 1);
        }
        let children = trie.len() - 1;
        let mut b = BitString::new((m + children) as usize, false);
        let mut pos = 0usize;
        for v in 0..m as usize {
            b.set_bit(pos, true);
            pos += 1 + a.get(v) as usize;
        }
        debug_assert_eq!(pos, b.len());
        let bsel = SelectIndex::build(&b);
        let c = PackedIntVec::new(children as usize, bits_for(sigma - 1));
        TraversalIndex {
            a,
            b,
            bsel,
            c,
            children,
            slots: m,
            version: trie.version(),
        }
    }

    /// Write `label` into the next free cell of `p`'s group, counting down
    /// `A[p]`.
    fn place_label(&mut self, p: u64, label: Symbol) {
        let remaining = self.a.get(p as usize);
        debug_assert!(remaining >= 1);
        let off = self.degree(p) - remaining;
        self.c.set((self.start(p) + off) as usize, label as u64);
        self.a.set(p as usize, remaining - 1);
    }

    /// Total degree of slots below `v`.
    fn start(&self, v: u64) -> u64 {
        if v == self.slots {
            return self.children;
        }
        self.bsel
            .select1(&self.b, v as usize + 1)
            .expect("every slot has a marker bit") as u64
            - v
    }

    /// Number of children of the node at slot `v`.
    pub fn degree(&self, v: u64) -> u64 {
        self.start(v + 1) - self.start(v)
    }

    /// Label of the `k`-th child in this index's group order.
    pub fn child_label(&self, v: u64, k: u64) -> Symbol {
        debug_assert!(k < self.degree(v));
        self.c.get((self.start(v) + k) as usize) as Symbol
    }

    /// Advance `v`'s cursor and return the next child label, if any.
    pub fn next_child(&mut self, v: NodeId) -> Option<Symbol> {
        let cur = self.a.get(v.index() as usize);
        if cur < self.degree(v.index()) {
            self.a.set(v.index() as usize, cur + 1);
            Some(self.child_label(v.index(), cur))
        } else {
            None
        }
    }

    /// Rewind all cursors so the index can drive another walk.
    pub fn reset_cursors(&mut self) {
        for v in 0..self.slots as usize {
            self.a.set(v, 0);
        }
    }

    pub(crate) fn version(&self) -> u64 {
        self.version
    }

    /// Index memory: `A` + `B` (with its directory) + `C`, in bits.
    pub fn bits(&self) -> u64 {
        self.a.bits() + self.b.len() as u64 + (self.b.len() as u64 / 64 + 2) * 64 + self.c.bits()
    }
}

/// Depth-first pre-order walk over all live nodes. The visitor receives the
/// node, its depth, and its edge label (`None` for the root). Uses the index
/// cursors plus parent pointers; no stack.
///
/// The index must have been built for this trie and the trie must be
/// unmodified since (enforced by version).
pub fn dfs(
    trie: &MBonsaiTrie,
    idx: &mut TraversalIndex,
    mut visit: impl FnMut(NodeId, u64, Option<Symbol>),
) {
    assert_eq!(
        idx.version(),
        trie.version(),
        "traversal index is stale: trie was modified after build"
    );
    let mut v = trie.root();
    let mut depth = 0u64;
    visit(v, 0, None);
    loop {
        if let Some(c) = idx.next_child(v) {
            let w = trie.child(v, c).expect("traversal index is consistent");
            depth += 1;
            visit(w, depth, Some(c));
            v = w;
        } else if v == trie.root() {
            break;
        } else {
            v = trie.parent(v).expect("non-root node has a parent");
            depth -= 1;
        }
    }
}

/// Emit every node's full label path in strictly lexicographic order (the
/// root's empty path first).
pub fn sorted_strings(trie: &MBonsaiTrie, mut visit: impl FnMut(&[Symbol])) {
    let mut idx = TraversalIndex::build_sorted(trie);
    let mut path: Vec<Symbol> = Vec::new();
    visit(&path);
    let mut v = trie.root();
    loop {
        if let Some(c) = idx.next_child(v) {
            let w = trie.child(v, c).expect("traversal index is consistent");
            path.push(c);
            visit(&path);
            v = w;
        } else if v == trie.root() {
            break;
        } else {
            v = trie.parent(v).expect("non-root node has a parent");
            path.pop();
        }
    }
}

/// Baseline traversal probing all `sigma` potential children of every node;
/// pre-order, children in label order. Uses an explicit worklist, so deep
/// chains cannot overflow the call stack.
pub fn naive_dfs(trie: &MBonsaiTrie, mut visit: impl FnMut(NodeId, u64)) {
    let mut stack = vec![(trie.root(), 0u64)];
    while let Some((v, depth)) = stack.pop() {
        visit(v, depth);
        for c in (0..trie.sigma()).rev() {
            if let Some(w) = trie.child(v, c) {
                stack.push((w, depth + 1));
            }
        }
    }
}
