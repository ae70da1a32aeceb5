//! Benchmark workflows behind the `mbonsai` CLI: dataset builds with the
//! three capacity policies, search and traversal timing, the bare-table
//! displacement statistics run, and the versioned [`RunReport`].

use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cht::mix_seed;
use crate::darray::{gamma_len, Repr};
use crate::hash::QuotientHash;
use crate::ingest::Dataset;
use crate::traverse::{dfs, naive_dfs, sorted_strings, TraversalIndex};
use crate::trie::{MBonsaiTrie, SpaceReport, Symbol, TrieCounters};
use crate::{Error, Result};

/// Version of the report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// How to choose the table capacity for a dataset build.
#[derive(Clone, Copy, Debug)]
pub enum CapacitySpec {
    /// Use exactly this many slots, no auto-resizing.
    Fixed(u64),
    /// Count the nodes first, then size for this load factor (no resizing).
    Alpha(f64),
    /// Start small and let the trie resize itself with this slack.
    Beta(f64),
}

pub struct BuildResult {
    pub trie: MBonsaiTrie,
    pub strings: u64,
    pub build_seconds: f64,
}

/// Insert every string of the dataset, path by path.
pub fn insert_all(trie: &mut MBonsaiTrie, ds: &Dataset) -> Result<u64> {
    let mut count = 0u64;
    for rec in ds.stream()? {
        let s = rec?;
        let mut v = trie.root();
        for &c in &s {
            v = trie.add_leaf(v, c)?;
        }
        count += 1;
    }
    Ok(count)
}

/// Counting pass: number of distinct prefixes (trie nodes) in the dataset,
/// via a flat edge map.
pub fn count_nodes(ds: &Dataset) -> Result<u64> {
    let mut edges: std::collections::HashMap<(u64, Symbol), u64> = std::collections::HashMap::new();
    let mut next_id = 1u64; // 0 is the root
    for rec in ds.stream()? {
        let s = rec?;
        let mut v = 0u64;
        for &c in &s {
            v = *edges.entry((v, c)).or_insert_with(|| {
                let id = next_id;
                next_id += 1;
                id
            });
        }
    }
    Ok(next_id)
}

fn dataset_sigma(ds: &Dataset) -> Result<Symbol> {
    u32::try_from(ds.sigma().max(1))
        .map_err(|_| Error::capacity(format!("alphabet size {} too large", ds.sigma())))
}

/// Build a trie from a dataset under the given capacity policy.
pub fn build_trie(
    ds: &Dataset,
    repr: Repr,
    policy: CapacitySpec,
    seed: u64,
) -> Result<BuildResult> {
    let sigma = dataset_sigma(ds)?;
    let started = Instant::now();
    let mut trie = match policy {
        CapacitySpec::Fixed(m) => MBonsaiTrie::new(sigma, m.max(2), repr, 0.0, seed)?,
        CapacitySpec::Alpha(alpha) => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::capacity(format!("alpha {alpha} outside (0, 1)")));
            }
            let nodes = count_nodes(ds)?;
            let m = ((nodes as f64 / alpha).ceil() as u64).max(nodes + 1).max(2);
            MBonsaiTrie::new(sigma, m, repr, 0.0, seed)?
        }
        CapacitySpec::Beta(beta) => {
            if beta <= 0.0 {
                return Err(Error::capacity(format!("beta {beta} must be positive")));
            }
            MBonsaiTrie::new(sigma, 64, repr, beta, seed)?
        }
    };
    let strings = insert_all(&mut trie, ds)?;
    Ok(BuildResult {
        trie,
        strings,
        build_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize, Clone, Copy, Debug)]
pub struct SearchStats {
    pub queries: u64,
    pub hits: u64,
    pub misses: u64,
    #[serde(skip)]
    pub seconds: f64,
    pub ns_per_op: f64,
}

/// Walk each query from the root; a hit is a fully present path. Timing is
/// batch time divided by the query count.
pub fn run_search(trie: &MBonsaiTrie, queries: &[Vec<Symbol>]) -> SearchStats {
    let started = Instant::now();
    let mut hits = 0u64;
    for q in queries {
        let in_alphabet = q.iter().all(|&c| (c as u64) < trie.sigma() as u64);
        if in_alphabet && trie.walk(q).is_some() {
            hits += 1;
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    let queries_n = queries.len() as u64;
    SearchStats {
        queries: queries_n,
        hits,
        misses: queries_n - hits,
        seconds,
        ns_per_op: if queries_n == 0 {
            0.0
        } else {
            seconds * 1e9 / queries_n as f64
        },
    }
}

/// Deterministically sample roughly `fraction` of the dataset's strings.
pub fn sample_queries(ds: &Dataset, fraction: f64, seed: u64) -> Result<Vec<Vec<Symbol>>> {
    let threshold = (fraction.clamp(0.0, 1.0) * (1u64 << 32) as f64) as u64;
    let mut out = Vec::new();
    for (i, rec) in ds.stream()?.enumerate() {
        let s = rec?;
        if mix_seed(seed, i as u64) & 0xffff_ffff < threshold {
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraverseMethod {
    Simple,
    Naive,
    Sorted,
}

impl TraverseMethod {
    pub fn name(self) -> &'static str {
        match self {
            TraverseMethod::Simple => "simple",
            TraverseMethod::Naive => "naive",
            TraverseMethod::Sorted => "sorted",
        }
    }
}

impl std::str::FromStr for TraverseMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simple" => Ok(TraverseMethod::Simple),
            "naive" => Ok(TraverseMethod::Naive),
            "sorted" => Ok(TraverseMethod::Sorted),
            other => Err(format!("unknown method {other:?} (simple|naive|sorted)")),
        }
    }
}

#[derive(Serialize, Clone, Debug)]
pub struct TraverseStats {
    pub method: String,
    pub visits: u64,
    /// Online lexicographic check (sorted method only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lex_ok: Option<bool>,
    /// Hash-table slots probed by the traversal.
    pub probes: u64,
    #[serde(skip)]
    pub seconds: f64,
}

pub fn run_traverse(trie: &MBonsaiTrie, method: TraverseMethod) -> Result<TraverseStats> {
    let probes_before = trie.probe_count();
    let started = Instant::now();
    let mut visits = 0u64;
    let mut lex_ok = None;
    match method {
        TraverseMethod::Simple => {
            let mut idx = TraversalIndex::build(trie);
            dfs(trie, &mut idx, |_, _, _| visits += 1);
        }
        TraverseMethod::Naive => {
            naive_dfs(trie, |_, _| visits += 1);
        }
        TraverseMethod::Sorted => {
            let mut prev: Option<Vec<Symbol>> = None;
            let mut ordered = true;
            sorted_strings(trie, |path| {
                visits += 1;
                if let Some(p) = &prev {
                    ordered &= p.as_slice() < path;
                }
                prev = Some(path.to_vec());
            });
            lex_ok = Some(ordered);
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    if visits != trie.len() {
        return Err(Error::Format(format!(
            "traversal visited {visits} of {} nodes",
            trie.len()
        )));
    }
    Ok(TraverseStats {
        method: method.name().to_string(),
        visits,
        lex_ok,
        probes: trie.probe_count() - probes_before,
        seconds,
    })
}

#[derive(Serialize, Clone, Copy, Debug)]
pub struct DispTrial {
    /// Mean displacement per inserted key.
    pub displacement_mean: f64,
    /// `(capacity + sum D) / capacity`.
    pub unary_bits_per_entry: f64,
    /// `sum |gamma(D[i] + 1)| / capacity`.
    pub gamma_bits_per_entry: f64,
}

#[derive(Serialize, Clone, Debug)]
pub struct DisptestStats {
    pub capacity: u64,
    pub alpha: f64,
    pub keys_per_trial: u64,
    pub trials: Vec<DispTrial>,
    pub mean_displacement: f64,
    pub unary_bits_per_entry: f64,
    pub unary_stderr: f64,
    pub gamma_bits_per_entry: f64,
    pub gamma_stderr: f64,
}

/// Insert `alpha * capacity` distinct uniform random keys into a bare
/// quotienting table (linear probing, first-come first-served) and measure
/// the displacement distribution, per trial.
pub fn disptest(capacity: u64, alpha: f64, trials: u32, seed: u64) -> Result<DisptestStats> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::capacity(format!("alpha {alpha} outside (0, 1)")));
    }
    let keys = (alpha * capacity as f64).round() as u64;
    let mut out = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        out.push(displacement_trial(
            capacity,
            keys,
            mix_seed(seed, t as u64 + 1),
        )?);
    }
    let mean = |f: fn(&DispTrial) -> f64| -> f64 {
        out.iter().map(f).sum::<f64>() / out.len().max(1) as f64
    };
    let stderr = |f: fn(&DispTrial) -> f64, m: f64| -> f64 {
        if out.len() < 2 {
            return 0.0;
        }
        let var = out.iter().map(|t| (f(t) - m).powi(2)).sum::<f64>() / (out.len() - 1) as f64;
        (var / out.len() as f64).sqrt()
    };
    let unary = mean(|t| t.unary_bits_per_entry);
    let gamma = mean(|t| t.gamma_bits_per_entry);
    Ok(DisptestStats {
        capacity,
        alpha,
        keys_per_trial: keys,
        mean_displacement: mean(|t| t.displacement_mean),
        unary_bits_per_entry: unary,
        unary_stderr: stderr(|t| t.unary_bits_per_entry, unary),
        gamma_bits_per_entry: gamma,
        gamma_stderr: stderr(|t| t.gamma_bits_per_entry, gamma),
        trials: out,
    })
}

fn displacement_trial(capacity: u64, keys: u64, seed: u64) -> Result<DispTrial> {
    assert!(keys < capacity);
    let universe = capacity
        .checked_mul(256)
        .ok_or_else(|| Error::capacity("capacity too large"))?;
    let hash = QuotientHash::new(universe, capacity, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xd15b));
    let mut seen: HashSet<u64> = HashSet::with_capacity(keys as usize * 2);
    let mut occupied = vec![false; capacity as usize];
    let mut disp_sum = 0u64;
    let mut gamma_bits = 0u64;
    let mut inserted = 0u64;
    while inserted < keys {
        let x = rng.gen_range(0..universe);
        if !seen.insert(x) {
            continue;
        }
        let h = hash.initial_address(x);
        let mut j = h;
        while occupied[j as usize] {
            j = if j + 1 == capacity { 0 } else { j + 1 };
        }
        occupied[j as usize] = true;
        let d = (j + capacity - h) % capacity;
        disp_sum += d;
        gamma_bits += gamma_len(d + 1);
        inserted += 1;
    }
    gamma_bits += capacity - keys; // empty entries encode as gamma(1)
    Ok(DispTrial {
        displacement_mean: disp_sum as f64 / keys as f64,
        unary_bits_per_entry: (capacity + disp_sum) as f64 / capacity as f64,
        gamma_bits_per_entry: gamma_bits as f64 / capacity as f64,
    })
}

/// Resident set size from /proc, if the platform provides it.
pub fn resident_set_bytes() -> Option<u64> {
    let statm = std::fs::read_to_string("/proc/self/statm").ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages * 4096)
}

#[derive(Serialize, Clone, Debug, Default)]
pub struct Timings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub build_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traverse_seconds: Option<f64>,
}

/// One run's machine-readable report. Every field except the wall times is
/// bit-identical across runs with the same seed.
#[derive(Serialize, Clone, Debug)]
pub struct RunReport {
    pub schema: u32,
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strings: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counters: Option<TrieCounters>,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traverse: Option<TraverseStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disptest: Option<DisptestStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rss_bytes: Option<u64>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64) -> Self {
        RunReport {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            seed,
            dataset: None,
            format: None,
            sigma: None,
            strings: None,
            n_nodes: None,
            capacity: None,
            load_factor: None,
            variant: None,
            space: None,
            counters: None,
            timings: Timings::default(),
            search: None,
            traverse: None,
            disptest: None,
            rss_bytes: None,
        }
    }

    /// Fill the trie-derived fields.
    pub fn with_trie(mut self, trie: &MBonsaiTrie) -> Self {
        self.sigma = Some(trie.sigma() as u64);
        self.n_nodes = Some(trie.len());
        self.capacity = Some(trie.capacity());
        self.load_factor = Some(trie.load_factor());
        self.variant = Some(trie.repr().name().to_string());
        self.space = Some(trie.space());
        self.counters = Some(trie.counters());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two-line CSV: a flattened (dot-separated) header row and a value row.
    pub fn to_csv(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut cols: Vec<(String, String)> = Vec::new();
        flatten_value("", &value, &mut cols);
        let header: Vec<&str> = cols.iter().map(|(k, _)| k.as_str()).collect();
        let row: Vec<String> = cols
            .iter()
            .map(|(_, v)| {
                if v.contains(',') || v.contains('"') {
                    format!("\"{}\"", v.replace('"', "\"\""))
                } else {
                    v.clone()
                }
            })
            .collect();
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}

fn flatten_value(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    use serde_json::Value::*;
    match v {
        Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_value(&key, x, out);
            }
        }
        Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten_value(&format!("{prefix}.{i}"), x, out);
            }
        }
        Null => out.push((prefix.to_string(), std::string::String::new())),
        Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Number(n) => out.push((prefix.to_string(), n.to_string())),
        String(s) => out.push((prefix.to_string(), s.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleTrie;

    fn toy_dataset() -> Dataset {
        // {ab, ac, b} over sigma 3
        Dataset::memory(vec![vec![0, 1], vec![0, 2], vec![1]], 3)
    }

    #[test]
    fn complete_depth2_trie_has_13_nodes() {
        let mut strings = Vec::new();
        for a in 0..3u32 {
            strings.push(vec![a]);
            for b in 0..3u32 {
                strings.push(vec![a, b]);
            }
        }
        let ds = Dataset::memory(strings, 3);
        assert_eq!(count_nodes(&ds).unwrap(), 13);
    }

    #[test]
    fn alpha_build_sizes_capacity() {
        let ds = toy_dataset();
        let built = build_trie(&ds, Repr::Recursive, CapacitySpec::Alpha(0.8), 5).unwrap();
        assert_eq!(built.trie.len(), 5);
        assert_eq!(built.trie.capacity(), 7); // ceil(5 / 0.8) rounded up
        assert_eq!(built.strings, 3);
    }

    #[test]
    fn search_hits_and_misses() {
        let ds = toy_dataset();
        let built = build_trie(&ds, Repr::Recursive, CapacitySpec::Fixed(32), 5).unwrap();
        let queries: Vec<Vec<Symbol>> = vec![vec![0, 1], vec![0, 2], vec![1]];
        let stats = run_search(&built.trie, &queries);
        assert_eq!((stats.hits, stats.misses), (3, 0));

        // appending a symbol to every string makes them all misses
        let missing: Vec<Vec<Symbol>> = queries
            .iter()
            .map(|q| {
                let mut q = q.clone();
                q.push(0);
                q
            })
            .collect();
        let stats = run_search(&built.trie, &missing);
        assert_eq!((stats.hits, stats.misses), (0, 3));
    }

    #[test]
    fn sample_is_deterministic() {
        let ds = toy_dataset();
        let a = sample_queries(&ds, 0.5, 9).unwrap();
        let b = sample_queries(&ds, 0.5, 9).unwrap();
        assert_eq!(a, b);
        let all = sample_queries(&ds, 1.0, 9).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn traverse_methods_agree() {
        let ds = toy_dataset();
        let built = build_trie(&ds, Repr::Gamma, CapacitySpec::Fixed(32), 5).unwrap();
        let n = built.trie.len();
        for m in [
            TraverseMethod::Simple,
            TraverseMethod::Naive,
            TraverseMethod::Sorted,
        ] {
            let stats = run_traverse(&built.trie, m).unwrap();
            assert_eq!(stats.visits, n, "{}", m.name());
            if m == TraverseMethod::Sorted {
                assert_eq!(stats.lex_ok, Some(true));
            }
        }
    }

    #[test]
    fn dataset_prefixes_equal_sorted_output() {
        let ds = toy_dataset();
        let built = build_trie(&ds, Repr::Recursive, CapacitySpec::Fixed(32), 5).unwrap();
        let mut got = Vec::new();
        crate::traverse::sorted_strings(&built.trie, |p| got.push(p.to_vec()));
        let mut oracle = OracleTrie::new();
        for s in [vec![0, 1], vec![0, 2], vec![1]] {
            let mut v = oracle.root();
            for c in s {
                v = oracle.add_leaf(v, c);
            }
        }
        assert_eq!(got, oracle.strings());
    }

    #[test]
    fn disptest_small_sanity() {
        let stats = disptest(1 << 12, 0.5, 3, 7).unwrap();
        assert_eq!(stats.trials.len(), 3);
        // at load 0.5 the unary prediction is 1 + 0.25 / 1.0 = 1.25
        assert!(
            (stats.unary_bits_per_entry - 1.25).abs() < 0.08,
            "{stats:?}"
        );
    }

    #[test]
    fn report_serialization() {
        let mut r = RunReport::new("build", 42);
        r.dataset = Some("toy".into());
        let json = r.to_json();
        assert!(json.contains("\"schema\": 1"));
        let csv = r.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        let row = lines.next().unwrap();
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert!(header.contains("command"));
    }
}
