//! m-Bonsai: a compact dynamic trie.
//!
//! An n-node trie over an alphabet of size `sigma` is stored in roughly
//! `n (log sigma + O(1))` bits: node quotients live in a packed hash-table
//! array and collision offsets live in a separate displacement array with a
//! choice of two compressed representations (gamma-coded blocks or a
//! three-layer recursive structure). Navigation and leaf updates run in
//! constant expected time, the whole trie can be enumerated (plain or in
//! lexicographic order) in time linear in the capacity, and tables can be
//! resized to track the live node count.
//!
//! ```
//! use mbonsai::{MBonsaiTrie, Repr};
//!
//! let mut t = MBonsaiTrie::new(5, 64, Repr::Recursive, 0.25, 42)?;
//! let a = t.add_leaf(t.root(), 0)?;
//! let ab = t.add_leaf(a, 1)?;
//! assert_eq!(t.child(a, 1), Some(ab));
//! assert_eq!(t.parent(ab), Some(a));
//! assert_eq!(t.label(ab), Some(1));
//!
//! let mut paths = Vec::new();
//! mbonsai::traverse::sorted_strings(&t, |p| paths.push(p.to_vec()));
//! assert_eq!(paths, vec![vec![], vec![0], vec![0, 1]]);
//! # Ok::<(), mbonsai::Error>(())
//! ```
//!
//! The crate is organised around the data structure's parts:
//!
//! * [`bitvec`] - packed bit strings with rank/select/flip and packed
//!   fixed-width integer arrays.
//! * [`hash`] - the multiplicative quotienting hash family and prime search.
//! * [`cht`] - a Cleary-style compact hash table with quotient storage.
//! * [`darray`] - the displacement array: gamma codec, gamma-block and
//!   layered representations, and space accounting.
//! * [`trie`] - the m-Bonsai trie itself.
//! * [`traverse`] - index-assisted linear-time traversal, sorted traversal,
//!   and the naive probing traversal.
//! * [`oracle`] - pointer-based reference structures for differential tests.
//! * [`ingest`] - FIMI / FASTQ / plain-text dataset readers.
//! * [`bench`] - benchmark workflows and machine-readable run reports backing
//!   the `mbonsai` CLI.

pub mod bench;
pub mod bitvec;
pub mod cht;
pub mod darray;
mod error;
pub mod hash;
pub mod ingest;
pub mod oracle;
pub mod traverse;
pub mod trie;

pub use darray::Repr;
pub use error::{Error, Result};
pub use trie::{MBonsaiTrie, NodeId, Symbol};
