//! The m-Bonsai dynamic trie.
//!
//! A node is identified by the slot of its quotient in the cell array `Q`;
//! the child of node `v` under symbol `c` is keyed as `v * sigma + c` and
//! hashed into the table with linear probing. A cell stores `EMPTY`,
//! `DELETED`, or `quotient + 2`; the companion displacement array `D`
//! records, for every occupied slot, how far the key landed from its initial
//! address, which makes every stored key reconstructible:
//! `initial address = (slot - D[slot]) mod M`, and
//! `key = reconstruct(initial address, Q[slot] - 2)`.
//!
//! The root occupies the initial address of key 0 and carries no key; probe
//! matching skips the root slot, so no dedicated cell code (and no extra cell
//! width) is spent on it.
//!
//! Slots never move: a node keeps its `NodeId` until the table is resized.
//! Deleted leaves become tombstones that probes skip, inserts reuse, and
//! resizes clear. With `beta > 0` the trie resizes itself to keep the load
//! factor inside `[1/(1+beta), 1/(1+beta/2)]`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::bitvec::{bits_for, PackedIntVec};
use crate::cht::mix_seed;
use crate::darray::{DispAccounting, DisplacementArray, Repr};
use crate::hash::{QuotientHash, MAX_UNIVERSE};
use crate::traverse::TraversalIndex;
use crate::{Error, Result};

/// An edge symbol in `0..sigma`.
pub type Symbol = u32;

/// Handle of a live trie node: the slot index of its cell. Stable across
/// inserts and deletes, invalidated by a resize.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(u64);

impl NodeId {
    /// The underlying slot index.
    pub fn index(self) -> u64 {
        self.0
    }

    pub(crate) fn from_index(j: u64) -> Self {
        NodeId(j)
    }
}

const EMPTY: u64 = 0;
const DELETED: u64 = 1;
/// Quotient `q` is stored as `q + Q_OFFSET`.
const Q_OFFSET: u64 = 2;

/// Logical space breakdown of a trie, in bits.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct SpaceReport {
    /// Cell array: `capacity * cell_width`.
    pub q_bits: u64,
    /// Displacement array, active representation.
    pub d_bits: u64,
    /// Fixed header (root id, counts, hash parameters).
    pub aux_bits: u64,
    pub total_bits: u64,
    pub bits_per_node: f64,
}

/// Operation counters, cumulative across resizes.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct TrieCounters {
    /// Slots inspected during child searches.
    pub probes: u64,
    /// Gamma block re-encodes in the displacement array.
    pub block_reencodes: u64,
    /// Cross-layer moves in the layered displacement array.
    pub layer_transitions: u64,
    pub grows: u64,
    pub shrinks: u64,
    /// `add_leaf` insertions since the last resize.
    pub inserts_since_resize: u64,
    pub tombstones: u64,
}

pub struct MBonsaiTrie {
    sigma: u64,
    cap: u64,
    hash: QuotientHash,
    cells: PackedIntVec,
    disp: DisplacementArray,
    root: u64,
    live: u64,
    tombstones: u64,
    beta: f64,
    seed: u64,
    epoch: u64,
    version: u64,
    inserts_since_resize: u64,
    grows: u64,
    shrinks: u64,
    probes: AtomicU64,
}

impl MBonsaiTrie {
    /// Empty trie over `0..sigma` with `capacity` slots.
    ///
    /// `beta > 0` enables auto-resizing (the capacity then tracks the node
    /// count; node ids change whenever that happens); `beta == 0` keeps the
    /// capacity fixed and makes inserts fail once the table is full.
    pub fn new(sigma: Symbol, capacity: u64, repr: Repr, beta: f64, seed: u64) -> Result<Self> {
        assert!(sigma >= 1, "alphabet must have at least one symbol");
        assert!(capacity >= 2, "capacity must be at least 2");
        assert!(beta >= 0.0, "beta must be non-negative");
        let universe = capacity
            .checked_mul(sigma as u64)
            .filter(|&u| u <= MAX_UNIVERSE)
            .ok_or_else(|| {
                Error::capacity(format!(
                    "capacity {capacity} x sigma {sigma} exceeds the supported width"
                ))
            })?;
        let hash = QuotientHash::new(universe, capacity, mix_seed(seed, 0x6861_7368))?;
        let cell_width = bits_for(hash.max_quotient() + Q_OFFSET);
        let mut cells = PackedIntVec::new(capacity as usize, cell_width);
        let disp = DisplacementArray::new(repr, capacity as usize, mix_seed(seed, 0x6469_7370));
        let root = hash.initial_address(0);
        // any occupied-looking value will do; the root is recognised by its
        // stored index, never by cell content
        cells.set(root as usize, Q_OFFSET);
        Ok(MBonsaiTrie {
            sigma: sigma as u64,
            cap: capacity,
            hash,
            cells,
            disp,
            root,
            live: 1,
            tombstones: 0,
            beta,
            seed,
            epoch: 0,
            version: 0,
            inserts_since_resize: 0,
            grows: 0,
            shrinks: 0,
            probes: AtomicU64::new(0),
        })
    }

    pub fn sigma(&self) -> Symbol {
        self.sigma as Symbol
    }

    pub fn capacity(&self) -> u64 {
        self.cap
    }

    /// Live nodes, including the root.
    pub fn len(&self) -> u64 {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 1
    }

    pub fn root(&self) -> NodeId {
        NodeId(self.root)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn repr(&self) -> Repr {
        self.disp.repr()
    }

    /// Resize generation; bumped each time the table is rebuilt.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Mutation counter; traversal indexes are tied to one value of it.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn load_factor(&self) -> f64 {
        self.live as f64 / self.cap as f64
    }

    /// Slots inspected by child searches so far.
    pub fn probe_count(&self) -> u64 {
        self.probes.load(Ordering::Relaxed)
    }

    pub fn counters(&self) -> TrieCounters {
        let (block_reencodes, layer_transitions) = self.disp.op_counters();
        TrieCounters {
            probes: self.probe_count(),
            block_reencodes,
            layer_transitions,
            grows: self.grows,
            shrinks: self.shrinks,
            inserts_since_resize: self.inserts_since_resize,
            tombstones: self.tombstones,
        }
    }

    #[inline]
    pub(crate) fn is_live_slot(&self, j: u64) -> bool {
        self.cells.get(j as usize) >= Q_OFFSET
    }

    pub fn is_live(&self, v: NodeId) -> bool {
        v.0 < self.cap && self.is_live_slot(v.0)
    }

    #[inline]
    fn key_of(&self, v: u64, c: Symbol) -> u64 {
        v * self.sigma + c as u64
    }

    #[inline]
    fn fwd(&self, j: u64) -> u64 {
        if j + 1 == self.cap {
            0
        } else {
            j + 1
        }
    }

    /// The child of `v` under symbol `c`, if present. Expected probe count
    /// O(1/epsilon).
    pub fn child(&self, v: NodeId, c: Symbol) -> Option<NodeId> {
        assert!((c as u64) < self.sigma, "symbol {c} outside alphabet");
        debug_assert!(self.is_live(v), "child() on a dead node");
        let (start, q) = self.hash.split(self.key_of(v.0, c));
        let stored = q + Q_OFFSET;
        let mut j = start;
        let mut probed = 0u64;
        let found = loop {
            probed += 1;
            let cell = self.cells.get(j as usize);
            if cell == EMPTY {
                break None;
            }
            // cheap quotient check first; the displacement read may decode
            if cell == stored
                && j != self.root
                && self.disp.get(j as usize) == (j + self.cap - start) % self.cap
            {
                break Some(NodeId(j));
            }
            j = self.fwd(j);
            if j == start {
                break None; // no empty slot anywhere
            }
        };
        self.probes.fetch_add(probed, Ordering::Relaxed);
        found
    }

    /// Walk `path` from the root.
    pub fn walk(&self, path: &[Symbol]) -> Option<NodeId> {
        let mut v = self.root();
        for &c in path {
            v = self.child(v, c)?;
        }
        Some(v)
    }

    /// The parent of `v`, or `None` for the root. O(1).
    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent_key(v).map(|x| NodeId(x / self.sigma))
    }

    /// The edge symbol of `v`, or `None` for the root. O(1).
    pub fn label(&self, v: NodeId) -> Option<Symbol> {
        self.parent_key(v).map(|x| (x % self.sigma) as Symbol)
    }

    fn parent_key(&self, v: NodeId) -> Option<u64> {
        debug_assert!(self.is_live(v), "navigation from a dead node");
        if v.0 == self.root {
            return None;
        }
        let d = self.disp.get(v.0 as usize);
        debug_assert!(d < self.cap);
        let addr = (v.0 + self.cap - d) % self.cap;
        let q = self.cells.get(v.0 as usize) - Q_OFFSET;
        Some(self.hash.reconstruct(addr, q))
    }

    /// Add a child of `v` under symbol `c`, returning its id. If the child
    /// already exists it is returned unchanged. May trigger an auto-resize,
    /// in which case the returned id belongs to the rebuilt table.
    pub fn add_leaf(&mut self, v: NodeId, c: Symbol) -> Result<NodeId> {
        assert!((c as u64) < self.sigma, "symbol {c} outside alphabet");
        debug_assert!(self.is_live(v), "add_leaf on a dead node");
        let (start, q) = self.hash.split(self.key_of(v.0, c));
        let stored = q + Q_OFFSET;
        let mut first_vacant: Option<u64> = None;
        let mut j = start;
        let mut probed = 0u64;
        let found = loop {
            probed += 1;
            let cell = self.cells.get(j as usize);
            if cell == EMPTY {
                if first_vacant.is_none() {
                    first_vacant = Some(j);
                }
                break None;
            }
            if cell == DELETED {
                if first_vacant.is_none() {
                    first_vacant = Some(j);
                }
            } else if cell == stored
                && j != self.root
                && self.disp.get(j as usize) == (j + self.cap - start) % self.cap
            {
                break Some(j);
            }
            j = self.fwd(j);
            if j == start {
                break None;
            }
        };
        self.probes.fetch_add(probed, Ordering::Relaxed);
        if let Some(w) = found {
            return Ok(NodeId(w));
        }
        let Some(slot) = first_vacant else {
            return Err(Error::capacity(format!(
                "trie full: {} nodes in {} slots",
                self.live, self.cap
            )));
        };
        if self.cells.get(slot as usize) == DELETED {
            self.tombstones -= 1;
        }
        self.cells.set(slot as usize, stored);
        self.disp
            .set(slot as usize, (slot + self.cap - start) % self.cap);
        self.live += 1;
        self.version += 1;
        self.inserts_since_resize += 1;

        if self.beta > 0.0 && self.live as f64 > self.cap as f64 / (1.0 + self.beta / 2.0) {
            let target = (1.0 + 0.75 * self.beta) / (1.0 + 0.5 * self.beta) * self.cap as f64;
            let m_new = (target.ceil() as u64).max(self.cap + 1).max(self.live + 1);
            let (mut new, tracked) = self.rebuilt(m_new, Some(slot))?;
            new.grows = self.grows + 1;
            new.shrinks = self.shrinks;
            *self = new;
            return Ok(NodeId(tracked.expect("inserted node was copied")));
        }
        Ok(NodeId(slot))
    }

    /// Delete the child of `v` under `c`. The child must be a leaf: that is
    /// the caller's obligation (checked in debug builds by probing all of its
    /// potential children). May trigger an auto-resize.
    pub fn del_leaf(&mut self, v: NodeId, c: Symbol) -> Result<()> {
        let w = self
            .child(v, c)
            .ok_or_else(|| Error::not_found(format!("no child {c} at slot {}", v.0)))?;
        debug_assert!(
            (0..self.sigma()).all(|s| self.child(w, s).is_none()),
            "del_leaf on an internal node"
        );
        self.cells.set(w.0 as usize, DELETED);
        self.disp.set(w.0 as usize, 0);
        self.live -= 1;
        self.tombstones += 1;
        self.version += 1;

        if self.beta > 0.0 && (self.live as f64) < self.cap as f64 / (1.0 + self.beta) {
            let target = (1.0 + 0.75 * self.beta) * self.live as f64;
            let m_new = (target.ceil() as u64).max(self.live + 1).max(2);
            if m_new < self.cap {
                let (mut new, _) = self.rebuilt(m_new, None)?;
                new.grows = self.grows;
                new.shrinks = self.shrinks + 1;
                *self = new;
            }
        }
        Ok(())
    }

    /// Rebuild into a table of `m_new` slots. The tree shape and labels are
    /// preserved; node ids are not. Tombstones do not survive.
    pub fn resized(&self, m_new: u64) -> Result<MBonsaiTrie> {
        self.rebuilt(m_new, None).map(|(t, _)| t)
    }

    /// Coupled depth-first copy: descend the old trie with a traversal index,
    /// mirror each descent with an insertion into the new trie, and ascend
    /// both through their parent pointers. Besides the index this keeps O(1)
    /// state; `track` maps one old slot to its new id.
    fn rebuilt(&self, m_new: u64, track: Option<u64>) -> Result<(MBonsaiTrie, Option<u64>)> {
        if m_new <= self.live {
            return Err(Error::capacity(format!(
                "cannot rebuild {} nodes into {m_new} slots",
                self.live
            )));
        }
        let child_seed = mix_seed(self.seed, 0x7265_7a00 + self.epoch + 1);
        let mut new = MBonsaiTrie::new(self.sigma(), m_new, self.repr(), self.beta, child_seed)?;
        new.epoch = self.epoch + 1;
        new.version = self.version + 1;
        let mut tracked = (track == Some(self.root)).then_some(new.root);
        let mut idx = TraversalIndex::build(self);
        let mut ov = self.root();
        let mut nv = new.root();
        loop {
            if let Some(c) = idx.next_child(ov) {
                let oc = self.child(ov, c).expect("traversal index is consistent");
                let nc = new
                    .insert_new_child(nv, c)
                    .expect("target table has room for the copy");
                if track == Some(oc.0) {
                    tracked = Some(nc.0);
                }
                ov = oc;
                nv = nc;
            } else if ov == self.root() {
                break;
            } else {
                ov = self.parent(ov).expect("non-root node has a parent");
                nv = new.parent(nv).expect("non-root node has a parent");
            }
        }
        debug_assert_eq!(new.live, self.live);
        new.probes.fetch_add(self.probe_count(), Ordering::Relaxed);
        Ok((new, tracked))
    }

    /// Insertion without the auto-resize hook (used while copying).
    fn insert_new_child(&mut self, v: NodeId, c: Symbol) -> Result<NodeId> {
        let (start, q) = self.hash.split(self.key_of(v.0, c));
        let mut j = start;
        loop {
            let cell = self.cells.get(j as usize);
            if cell == EMPTY {
                self.cells.set(j as usize, q + Q_OFFSET);
                self.disp.set(j as usize, (j + self.cap - start) % self.cap);
                self.live += 1;
                return Ok(NodeId(j));
            }
            j = self.fwd(j);
            if j == start {
                return Err(Error::capacity("copy target full".to_string()));
            }
        }
    }

    /// Displacement-array accounting for the active representation.
    pub fn disp_accounting(&self) -> DispAccounting {
        self.disp.accounting()
    }

    /// Logical space report.
    pub fn space(&self) -> SpaceReport {
        let q_bits = self.cap * self.cells.width() as u64;
        let d_bits = self.disp.accounting().active_bits();
        // root id, live/tombstone counts, beta, seed, and the hash (a, p)
        let aux_bits = 7 * 64;
        let total_bits = q_bits + d_bits + aux_bits;
        SpaceReport {
            q_bits,
            d_bits,
            aux_bits,
            total_bits,
            bits_per_node: total_bits as f64 / self.live as f64,
        }
    }

    /// Verify that every live non-root slot encodes a reconstructible key
    /// with a live parent, and that the live count matches. Returns the
    /// number of live slots checked.
    pub fn audit_keys(&self) -> std::result::Result<u64, String> {
        let mut checked = 0u64;
        for j in 0..self.cap {
            if !self.is_live_slot(j) || j == self.root {
                continue;
            }
            let d = self.disp.get(j as usize);
            if d >= self.cap {
                return Err(format!("slot {j}: displacement {d} out of range"));
            }
            let addr = (j + self.cap - d) % self.cap;
            let q = self.cells.get(j as usize) - Q_OFFSET;
            let x = self.hash.reconstruct(addr, q);
            if self.hash.split(x) != (addr, q) {
                return Err(format!("slot {j}: key {x} does not split back"));
            }
            let parent = x / self.sigma;
            if !self.is_live_slot(parent) {
                return Err(format!("slot {j}: parent slot {parent} is not live"));
            }
            checked += 1;
        }
        if checked + 1 != self.live {
            return Err(format!(
                "live count {} but {} live slots",
                self.live,
                checked + 1
            ));
        }
        Ok(checked)
    }
}
