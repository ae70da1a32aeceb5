//! Reference structures for differential testing.
//!
//! [`OracleTrie`] is a plain pointer-style trie (one record per node with an
//! ordered child map) exposing the same operations as [`MBonsaiTrie`]. The
//! [`Differential`] harness drives both structures with the same operations
//! and checks every answer through the oracle-id to node-id bijection,
//! re-deriving the bijection whenever the compact trie resizes.
//!
//! Operation scripts have a one-op-per-line text form (`A v c`, `D v c`,
//! `C v c`, `P v`, `L v`, with `v` an oracle node id), so a failing random
//! run can be shrunk with [`minimize_script`] and replayed from a file.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trie::{MBonsaiTrie, NodeId, Symbol};
use crate::{Error, Result};

/// Handle of an oracle node: its record index, stable forever.
pub type OracleId = u32;

#[derive(Clone, Debug)]
struct Record {
    parent: OracleId,
    label: Symbol,
    children: BTreeMap<Symbol, OracleId>,
    alive: bool,
}

/// Pointer-based trie with ordered child maps.
#[derive(Clone, Debug)]
pub struct OracleTrie {
    nodes: Vec<Record>,
    live: u64,
}

impl Default for OracleTrie {
    fn default() -> Self {
        Self::new()
    }
}

impl OracleTrie {
    pub fn new() -> Self {
        OracleTrie {
            nodes: vec![Record {
                parent: 0,
                label: 0,
                children: BTreeMap::new(),
                alive: true,
            }],
            live: 1,
        }
    }

    pub fn root(&self) -> OracleId {
        0
    }

    /// Live nodes, including the root.
    pub fn len(&self) -> u64 {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 1
    }

    pub fn is_alive(&self, v: OracleId) -> bool {
        (v as usize) < self.nodes.len() && self.nodes[v as usize].alive
    }

    pub fn child(&self, v: OracleId, c: Symbol) -> Option<OracleId> {
        self.nodes[v as usize].children.get(&c).copied()
    }

    pub fn parent(&self, v: OracleId) -> Option<OracleId> {
        (v != 0).then(|| self.nodes[v as usize].parent)
    }

    pub fn label(&self, v: OracleId) -> Option<Symbol> {
        (v != 0).then(|| self.nodes[v as usize].label)
    }

    pub fn is_leaf(&self, v: OracleId) -> bool {
        self.nodes[v as usize].children.is_empty()
    }

    pub fn children(&self, v: OracleId) -> impl Iterator<Item = (Symbol, OracleId)> + '_ {
        self.nodes[v as usize]
            .children
            .iter()
            .map(|(&c, &w)| (c, w))
    }

    pub fn add_leaf(&mut self, v: OracleId, c: Symbol) -> OracleId {
        debug_assert!(self.is_alive(v));
        if let Some(w) = self.child(v, c) {
            return w;
        }
        let id = self.nodes.len() as OracleId;
        self.nodes.push(Record {
            parent: v,
            label: c,
            children: BTreeMap::new(),
            alive: true,
        });
        self.nodes[v as usize].children.insert(c, id);
        self.live += 1;
        id
    }

    pub fn del_leaf(&mut self, v: OracleId, c: Symbol) -> Result<()> {
        let w = self
            .child(v, c)
            .ok_or_else(|| Error::not_found(format!("no child {c} of oracle node {v}")))?;
        debug_assert!(self.is_leaf(w), "del_leaf on an internal node");
        self.nodes[v as usize].children.remove(&c);
        self.nodes[w as usize].alive = false;
        self.live -= 1;
        Ok(())
    }

    /// All root-to-node label paths in lexicographic order, starting with
    /// the root's empty path.
    pub fn strings(&self) -> Vec<Vec<Symbol>> {
        let mut out = Vec::with_capacity(self.live as usize);
        let mut path = Vec::new();
        self.collect(0, &mut path, &mut out);
        out
    }

    fn collect(&self, v: OracleId, path: &mut Vec<Symbol>, out: &mut Vec<Vec<Symbol>>) {
        out.push(path.clone());
        for (&c, &w) in &self.nodes[v as usize].children {
            path.push(c);
            self.collect(w, path, out);
            path.pop();
        }
    }

    /// Ids of all live nodes in creation order.
    pub fn live_ids(&self) -> Vec<OracleId> {
        (0..self.nodes.len() as OracleId)
            .filter(|&v| self.nodes[v as usize].alive)
            .collect()
    }
}

/// One scripted trie operation; `v` is an oracle node id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrieOp {
    AddLeaf { v: OracleId, c: Symbol },
    DelLeaf { v: OracleId, c: Symbol },
    Child { v: OracleId, c: Symbol },
    Parent { v: OracleId },
    Label { v: OracleId },
}

impl fmt::Display for TrieOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TrieOp::AddLeaf { v, c } => write!(f, "A {v} {c}"),
            TrieOp::DelLeaf { v, c } => write!(f, "D {v} {c}"),
            TrieOp::Child { v, c } => write!(f, "C {v} {c}"),
            TrieOp::Parent { v } => write!(f, "P {v}"),
            TrieOp::Label { v } => write!(f, "L {v}"),
        }
    }
}

/// Parse a script, one op per line; blank lines and `#` comments are skipped.
pub fn parse_script(reader: impl BufRead) -> Result<Vec<TrieOp>> {
    let mut ops = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno as u64 + 1;
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        if kind.starts_with('#') {
            continue;
        }
        let mut arg = |name: &str| -> Result<u64> {
            tok.next()
                .ok_or_else(|| Error::parse(lineno, format!("missing {name}")))?
                .parse::<u64>()
                .map_err(|e| Error::parse(lineno, format!("bad {name}: {e}")))
        };
        let op = match kind {
            "A" => TrieOp::AddLeaf {
                v: arg("node")? as OracleId,
                c: arg("symbol")? as Symbol,
            },
            "D" => TrieOp::DelLeaf {
                v: arg("node")? as OracleId,
                c: arg("symbol")? as Symbol,
            },
            "C" => TrieOp::Child {
                v: arg("node")? as OracleId,
                c: arg("symbol")? as Symbol,
            },
            "P" => TrieOp::Parent {
                v: arg("node")? as OracleId,
            },
            "L" => TrieOp::Label {
                v: arg("node")? as OracleId,
            },
            other => return Err(Error::parse(lineno, format!("unknown op {other:?}"))),
        };
        ops.push(op);
    }
    Ok(ops)
}

pub fn write_script(ops: &[TrieOp], mut w: impl Write) -> std::io::Result<()> {
    for op in ops {
        writeln!(w, "{op}")?;
    }
    Ok(())
}

/// A detected disagreement between the compact trie and the oracle.
#[derive(Debug)]
pub struct Divergence {
    pub at_op: usize,
    pub detail: String,
    pub script: Vec<TrieOp>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "divergence at op {}: {}", self.at_op, self.detail)
    }
}

/// Runs the same operations against an [`MBonsaiTrie`] and an [`OracleTrie`],
/// comparing every result.
pub struct Differential {
    pub trie: MBonsaiTrie,
    pub oracle: OracleTrie,
    map: HashMap<OracleId, NodeId>,
    epoch: u64,
}

impl Differential {
    pub fn new(trie: MBonsaiTrie) -> Self {
        let oracle = OracleTrie::new();
        let mut map = HashMap::new();
        map.insert(0, trie.root());
        let epoch = trie.epoch();
        Differential {
            trie,
            oracle,
            map,
            epoch,
        }
    }

    /// Oracle node ids currently alive (for workload generation).
    pub fn live_ids(&self) -> Vec<OracleId> {
        self.oracle.live_ids()
    }

    /// Whether applying `op` respects the operations' preconditions
    /// (referenced node alive, deletions target leaves or missing children).
    pub fn op_is_valid(oracle: &OracleTrie, op: &TrieOp) -> bool {
        let v = match *op {
            TrieOp::AddLeaf { v, .. }
            | TrieOp::DelLeaf { v, .. }
            | TrieOp::Child { v, .. }
            | TrieOp::Parent { v }
            | TrieOp::Label { v } => v,
        };
        if !oracle.is_alive(v) {
            return false;
        }
        if let TrieOp::DelLeaf { v, c } = *op {
            if let Some(w) = oracle.child(v, c) {
                return oracle.is_leaf(w);
            }
        }
        true
    }

    /// Apply one operation to both sides. `Err` carries a description of the
    /// first disagreement. Ops violating preconditions are skipped.
    pub fn apply(&mut self, op: &TrieOp) -> std::result::Result<(), String> {
        if !Self::op_is_valid(&self.oracle, op) {
            return Ok(());
        }
        match *op {
            TrieOp::AddLeaf { v, c } => {
                let node = self.map[&v];
                let oid = self.oracle.add_leaf(v, c);
                let nid = self
                    .trie
                    .add_leaf(node, c)
                    .map_err(|e| format!("add_leaf({v},{c}) failed: {e}"))?;
                self.refresh_if_resized();
                match self.map.get(&oid) {
                    Some(&mapped) if mapped == nid => Ok(()),
                    Some(&mapped) => Err(format!(
                        "add_leaf({v},{c}) returned {nid:?} but bijection says {mapped:?}"
                    )),
                    None => {
                        self.map.insert(oid, nid);
                        Ok(())
                    }
                }
            }
            TrieOp::DelLeaf { v, c } => {
                let node = self.map[&v];
                if let Some(w) = self.oracle.child(v, c) {
                    self.oracle.del_leaf(v, c).expect("oracle child exists");
                    self.map.remove(&w);
                    self.trie
                        .del_leaf(node, c)
                        .map_err(|e| format!("del_leaf({v},{c}) unexpectedly failed: {e}"))?;
                    self.refresh_if_resized();
                    Ok(())
                } else {
                    match self.trie.del_leaf(node, c) {
                        Err(Error::NotFound(_)) => Ok(()),
                        Err(e) => Err(format!("del_leaf({v},{c}): wrong error {e}")),
                        Ok(()) => Err(format!(
                            "del_leaf({v},{c}) succeeded but oracle has no such child"
                        )),
                    }
                }
            }
            TrieOp::Child { v, c } => {
                let got = self.trie.child(self.map[&v], c);
                let want = self.oracle.child(v, c).map(|w| self.map[&w]);
                (got == want)
                    .then_some(())
                    .ok_or_else(|| format!("child({v},{c}): got {got:?}, oracle says {want:?}"))
            }
            TrieOp::Parent { v } => {
                let got = self.trie.parent(self.map[&v]);
                let want = self.oracle.parent(v).map(|w| self.map[&w]);
                (got == want)
                    .then_some(())
                    .ok_or_else(|| format!("parent({v}): got {got:?}, oracle says {want:?}"))
            }
            TrieOp::Label { v } => {
                let got = self.trie.label(self.map[&v]);
                let want = self.oracle.label(v);
                (got == want)
                    .then_some(())
                    .ok_or_else(|| format!("label({v}): got {got:?}, oracle says {want:?}"))
            }
        }
    }

    /// After a resize every node id changed; re-derive the bijection by
    /// walking the oracle and following child edges in the compact trie.
    fn refresh_if_resized(&mut self) {
        if self.trie.epoch() == self.epoch {
            return;
        }
        self.epoch = self.trie.epoch();
        self.map.clear();
        self.map.insert(0, self.trie.root());
        let mut stack = vec![self.oracle.root()];
        while let Some(v) = stack.pop() {
            let mapped = self.map[&v];
            for (c, w) in self.oracle.children(v) {
                let node = self
                    .trie
                    .child(mapped, c)
                    .expect("resized trie preserves the tree");
                self.map.insert(w, node);
                stack.push(w);
            }
        }
    }
}

/// Statistics of a completed differential run.
#[derive(Debug, Default, Clone, Copy)]
pub struct DiffStats {
    pub ops: usize,
    pub grows: u64,
    pub shrinks: u64,
    pub max_nodes: u64,
}

/// Construction parameters of the compact trie under test; kept so a failing
/// script can be replayed and shrunk against a bit-identical fresh trie.
#[derive(Debug, Clone, Copy)]
pub struct DiffConfig {
    pub sigma: Symbol,
    pub capacity: u64,
    pub repr: crate::darray::Repr,
    pub beta: f64,
    pub trie_seed: u64,
}

impl DiffConfig {
    pub fn build(&self) -> Result<MBonsaiTrie> {
        MBonsaiTrie::new(
            self.sigma,
            self.capacity,
            self.repr,
            self.beta,
            self.trie_seed,
        )
    }
}

/// Generate and apply `n_ops` random operations: an insert-heavy phase
/// followed by a delete-heavy phase (so both resize directions fire when
/// auto-resizing is on). On divergence the failing script is minimized.
pub fn differential_run(
    cfg: &DiffConfig,
    n_ops: usize,
    op_seed: u64,
) -> std::result::Result<DiffStats, Divergence> {
    let sigma = cfg.sigma;
    let mut diff = Differential::new(cfg.build().expect("valid configuration"));
    let mut rng = ChaCha8Rng::seed_from_u64(op_seed);
    let mut script: Vec<TrieOp> = Vec::with_capacity(n_ops);
    let mut stats = DiffStats::default();
    // alive oracle ids with O(1) insert/remove for workload sampling
    let mut alive: Vec<OracleId> = vec![0];
    let mut alive_pos: HashMap<OracleId, usize> = HashMap::from([(0, 0)]);

    for k in 0..n_ops {
        let shrink_phase = k >= n_ops * 7 / 10;
        let v = alive[rng.gen_range(0..alive.len())];
        let c: Symbol = rng.gen_range(0..sigma);
        let roll: f64 = rng.gen();
        let op = if shrink_phase {
            if roll < 0.70 {
                // delete a leaf child of v if it has one
                let leaf = diff
                    .oracle
                    .children(v)
                    .find(|&(_, w)| diff.oracle.is_leaf(w))
                    .map(|(c, _)| c);
                match leaf {
                    Some(c) => TrieOp::DelLeaf { v, c },
                    None => TrieOp::Child { v, c },
                }
            } else if roll < 0.80 {
                TrieOp::AddLeaf { v, c }
            } else if roll < 0.90 {
                TrieOp::Child { v, c }
            } else if roll < 0.95 {
                TrieOp::Parent { v }
            } else {
                TrieOp::Label { v }
            }
        } else if roll < 0.60 {
            TrieOp::AddLeaf { v, c }
        } else if roll < 0.70 {
            // deletion attempt; often NotFound, sometimes a real leaf
            TrieOp::DelLeaf { v, c }
        } else if roll < 0.85 {
            TrieOp::Child { v, c }
        } else if roll < 0.95 {
            TrieOp::Parent { v }
        } else {
            TrieOp::Label { v }
        };

        if !Differential::op_is_valid(&diff.oracle, &op) {
            continue;
        }
        let victim = match op {
            TrieOp::DelLeaf { v, c } => diff.oracle.child(v, c),
            _ => None,
        };
        script.push(op);
        if let Err(detail) = diff.apply(&op) {
            let script = minimize_script(&script, |ops| replay_diverges(cfg, ops));
            return Err(Divergence {
                at_op: k,
                detail,
                script,
            });
        }
        match op {
            TrieOp::AddLeaf { v, c } => {
                let id = diff.oracle.child(v, c).expect("just inserted");
                alive_pos.entry(id).or_insert_with(|| {
                    alive.push(id);
                    alive.len() - 1
                });
            }
            TrieOp::DelLeaf { .. } => {
                if let Some(w) = victim {
                    let i = alive_pos.remove(&w).expect("victim was alive");
                    alive.swap_remove(i);
                    if i < alive.len() {
                        alive_pos.insert(alive[i], i);
                    }
                }
            }
            _ => {}
        }
        stats.ops += 1;
        stats.max_nodes = stats.max_nodes.max(diff.oracle.len());

        // load-factor window: once auto-resizing has engaged, every
        // operation leaves n/M within [1/(1+beta), 1/(1+beta/2)] up to the
        // single op that crossed a threshold
        let t = &diff.trie;
        if t.beta() > 0.0 && t.epoch() > 0 && t.capacity() > 64 {
            let slack = 2.0 / t.capacity() as f64;
            let load = t.load_factor();
            let lo = 1.0 / (1.0 + t.beta()) - slack;
            let hi = 1.0 / (1.0 + t.beta() / 2.0) + slack;
            if load < lo || load > hi {
                return Err(Divergence {
                    at_op: k,
                    detail: format!(
                        "load factor {load:.4} left the window [{lo:.4}, {hi:.4}] (n={}, M={})",
                        t.len(),
                        t.capacity()
                    ),
                    script,
                });
            }
        }
    }
    stats.grows = diff.trie.counters().grows;
    stats.shrinks = diff.trie.counters().shrinks;
    Ok(stats)
}

/// Replay a script on fresh structures; true if some op diverges.
pub fn replay_diverges(cfg: &DiffConfig, ops: &[TrieOp]) -> bool {
    let Ok(trie) = cfg.build() else {
        return false;
    };
    let mut diff = Differential::new(trie);
    for op in ops {
        if !Differential::op_is_valid(&diff.oracle, op) {
            continue;
        }
        if diff.apply(op).is_err() {
            return true;
        }
    }
    false
}

/// Greedy 1-minimal shrink: find the shortest failing prefix, then try
/// removing each remaining op while `fails` still holds (ops that would
/// break preconditions are skipped during replay, so any sub-script is
/// admissible).
pub fn minimize_script(ops: &[TrieOp], fails: impl Fn(&[TrieOp]) -> bool) -> Vec<TrieOp> {
    let mut cur: Vec<TrieOp> = ops.to_vec();
    if !fails(&cur) {
        return cur;
    }
    let mut lo = 1;
    let mut hi = cur.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        if fails(&cur[..mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cur.truncate(lo);
    let mut i = 0;
    while i < cur.len() {
        let mut candidate = cur.clone();
        candidate.remove(i);
        if fails(&candidate) {
            cur = candidate;
        } else {
            i += 1;
        }
    }
    cur
}

/// Write a failing script under `dir` (created if needed); returns the path.
pub fn persist_regression(dir: &Path, name: &str, ops: &[TrieOp]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.ops"));
    let mut f = std::fs::File::create(&path)?;
    write_script(ops, &mut f)?;
    Ok(path)
}
