//! Label-mode reduction, canonical forms, and isomorphism for rooted trees.
//!
//! Equivalence of two trees is decided by comparing canonical fingerprints:
//! a bottom-up encoding in which each leaf encodes as its node label and each
//! internal node encodes as its node label plus the lexicographically sorted
//! list of (edge label, child encoding) pairs. Fingerprint equality coincides
//! with rooted labeled-tree isomorphism; [`brute_force_isomorphic`] provides
//! the independent factorial-search oracle used to validate that claim.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{DepEdge, DepTree};

/// Which labels survive the graph reduction.
///
/// `Nodes` (UPOS only) is an optional extra granularity; default reports use
/// the other three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Strip node and edge labels (pure shape).
    None,
    /// Keep edge labels (deprels), strip node labels.
    Edges,
    /// Keep both node labels (UPOS) and edge labels (deprels).
    NodesEdges,
    /// Keep node labels (UPOS), strip edge labels.
    Nodes,
}

impl LabelMode {
    pub const ALL: [LabelMode; 4] = [
        LabelMode::None,
        LabelMode::Edges,
        LabelMode::NodesEdges,
        LabelMode::Nodes,
    ];

    /// The three granularities reported by default (excludes `Nodes`).
    pub const DEFAULT_REPORT: [LabelMode; 3] =
        [LabelMode::None, LabelMode::Edges, LabelMode::NodesEdges];

    pub fn keeps_node_labels(self) -> bool {
        matches!(self, LabelMode::NodesEdges | LabelMode::Nodes)
    }

    pub fn keeps_edge_labels(self) -> bool {
        matches!(self, LabelMode::Edges | LabelMode::NodesEdges)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelMode::None => "none",
            LabelMode::Edges => "edges",
            LabelMode::NodesEdges => "nodes_edges",
            LabelMode::Nodes => "nodes",
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown label mode {0:?} (expected none, edges, nodes_edges, or nodes)")]
pub struct ParseLabelModeError(pub String);

impl FromStr for LabelMode {
    type Err = ParseLabelModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(LabelMode::None),
            "edges" => Ok(LabelMode::Edges),
            "nodes_edges" | "nodes+edges" => Ok(LabelMode::NodesEdges),
            "nodes" => Ok(LabelMode::Nodes),
            _ => Err(ParseLabelModeError(s.to_string())),
        }
    }
}

/// A rooted labeled tree after (possibly trivial) label reduction.
///
/// Same shape as [`DepTree`]: node 0 is the root, every other node has
/// exactly one incoming edge. Stripped labels are the empty string. The
/// fields are public for direct construction (subtree units, test fixtures);
/// constructing a non-tree and feeding it to [`canonical_form`] is a caller
/// bug, caught by a debug assertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedTree {
    pub node_labels: Vec<String>,
    pub edges: Vec<DepEdge>,
}

impl ReducedTree {
    /// Identity conversion: keep every label of `t`.
    pub fn from_dep_tree(t: &DepTree) -> Self {
        ReducedTree {
            node_labels: t.node_labels.clone(),
            edges: t.edges.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    /// Apply `mode` to this tree's labels. Idempotent: re-reducing an
    /// already-reduced tree under the same mode is a no-op.
    pub fn reduce(&self, mode: LabelMode) -> ReducedTree {
        let node_labels = if mode.keeps_node_labels() {
            self.node_labels.clone()
        } else {
            vec![String::new(); self.node_labels.len()]
        };
        let edges = self
            .edges
            .iter()
            .map(|e| DepEdge {
                head: e.head,
                dep: e.dep,
                label: if mode.keeps_edge_labels() {
                    e.label.clone()
                } else {
                    String::new()
                },
            })
            .collect();
        ReducedTree { node_labels, edges }
    }

    /// True iff the edges form a tree rooted at node 0 covering all nodes.
    pub fn is_wellformed(&self) -> bool {
        let n = self.node_labels.len();
        if n == 0 || self.edges.len() != n - 1 {
            return false;
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            if e.head >= n || e.dep >= n || e.dep == 0 {
                return false;
            }
            indegree[e.dep] += 1;
            children[e.head].push(e.dep);
        }
        if indegree[1..].iter().any(|&d| d != 1) {
            return false;
        }
        // All nodes reachable from the root (rules out cycles off to the side).
        let mut seen = 1usize;
        let mut queue = vec![0usize];
        while let Some(u) = queue.pop() {
            for &c in &children[u] {
                seen += 1;
                queue.push(c);
            }
        }
        seen == n
    }
}

/// Reduce a dependency tree under `mode` (structure untouched, labels
/// blanked per mode; `NodesEdges` is the identity reduction).
pub fn reduce(t: &DepTree, mode: LabelMode) -> ReducedTree {
    ReducedTree::from_dep_tree(t).reduce(mode)
}

/// Order-independent fingerprint of a reduced tree. Two trees have equal
/// fingerprints iff they are isomorphic as rooted labeled directed trees.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm(Vec<u8>);

impl CanonicalForm {
    /// The full self-delimiting encoding (equality-bearing).
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// 128-bit hex digest for compact storage and display. Equality checks
    /// throughout the crate use the full encoding, never the digest.
    pub fn digest128(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(&self.0);
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // The raw encoding is binary; show the digest instead.
        write!(f, "CanonicalForm({})", self.digest128())
    }
}

fn push_len(buf: &mut Vec<u8>, len: usize) {
    let len = u32::try_from(len).expect("encoded length exceeds u32::MAX");
    buf.extend_from_slice(&len.to_le_bytes());
}

/// Canonical fingerprint of a reduced tree.
///
/// Bottom-up: each node's encoding is its label followed by the
/// lexicographically sorted (edge label, child encoding) pairs, every field
/// length-prefixed so the encoding is self-delimiting. The fingerprint is
/// invariant under sibling reordering and node renumbering.
pub fn canonical_form(t: &ReducedTree) -> CanonicalForm {
    debug_assert!(
        t.is_wellformed(),
        "canonical_form requires a wellformed tree"
    );
    let n = t.node_count();
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, e) in t.edges.iter().enumerate() {
        children[e.head].push((i, e.dep));
    }

    // Reverse BFS order guarantees children are encoded before their parent
    // without recursing (deep path trees would overflow the stack).
    let mut order = Vec::with_capacity(n);
    order.push(0usize);
    let mut qi = 0;
    while qi < order.len() {
        let u = order[qi];
        qi += 1;
        for &(_, c) in &children[u] {
            order.push(c);
        }
    }

    let mut encodings: Vec<Vec<u8>> = vec![Vec::new(); n];
    for &u in order.iter().rev() {
        let mut entries: Vec<(&[u8], &[u8])> = children[u]
            .iter()
            .map(|&(ei, c)| (t.edges[ei].label.as_bytes(), encodings[c].as_slice()))
            .collect();
        entries.sort_unstable();

        let label = t.node_labels[u].as_bytes();
        let mut buf = Vec::with_capacity(12 + label.len());
        push_len(&mut buf, label.len());
        buf.extend_from_slice(label);
        push_len(&mut buf, entries.len());
        for (edge_label, child_enc) in entries {
            push_len(&mut buf, edge_label.len());
            buf.extend_from_slice(edge_label);
            push_len(&mut buf, child_enc.len());
            buf.extend_from_slice(child_enc);
        }
        encodings[u] = buf;
    }
    CanonicalForm(std::mem::take(&mut encodings[0]))
}

/// Fingerprint of a dependency tree under `mode`.
pub fn canonical_form_of(t: &DepTree, mode: LabelMode) -> CanonicalForm {
    canonical_form(&reduce(t, mode))
}

/// Fingerprints of many trees, computed in parallel, in input order.
pub fn canonical_forms(trees: &[DepTree], mode: LabelMode) -> Vec<CanonicalForm> {
    trees
        .par_iter()
        .map(|t| canonical_form_of(t, mode))
        .collect()
}

/// One isomorphism equivalence class: its fingerprint and the indices of
/// the member trees, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub form: CanonicalForm,
    pub members: Vec<usize>,
}

/// Partition `trees` into isomorphism classes under `mode`. Classes appear
/// in order of their first member, so the result is deterministic.
pub fn equivalence_classes(trees: &[DepTree], mode: LabelMode) -> Vec<EquivalenceClass> {
    let forms = canonical_forms(trees, mode);
    let mut classes: Vec<EquivalenceClass> = Vec::new();
    let mut by_form: HashMap<CanonicalForm, usize> = HashMap::new();
    for (i, form) in forms.into_iter().enumerate() {
        match by_form.entry(form) {
            Entry::Occupied(e) => classes[*e.get()].members.push(i),
            Entry::Vacant(e) => {
                let class = EquivalenceClass {
                    form: e.key().clone(),
                    members: vec![i],
                };
                e.insert(classes.len());
                classes.push(class);
            }
        }
    }
    classes
}

/// Per-tree node budget of the brute-force oracle (factorial search).
pub const BRUTE_FORCE_NODE_LIMIT: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
#[error(
    "brute-force isomorphism is limited to {BRUTE_FORCE_NODE_LIMIT} nodes per tree, got {found}"
)]
pub struct SizeLimitError {
    pub found: usize,
}

/// Decide isomorphism by trying every root-fixing node bijection.
///
/// The oracle against which [`canonical_form`] is validated. `mode` is
/// re-applied to both inputs first (a no-op on already-reduced trees). Any
/// edge-preserving bijection must fix the root (the only in-degree-0 node),
/// so only the `(n-1)!` non-root assignments are enumerated.
pub fn brute_force_isomorphic(
    a: &ReducedTree,
    b: &ReducedTree,
    mode: LabelMode,
) -> Result<bool, SizeLimitError> {
    for t in [a, b] {
        if t.node_count() > BRUTE_FORCE_NODE_LIMIT {
            return Err(SizeLimitError {
                found: t.node_count(),
            });
        }
    }
    let a = a.reduce(mode);
    let b = b.reduce(mode);
    let n = a.node_count();
    if n != b.node_count() {
        return Ok(false);
    }

    // Intern labels so the permutation inner loop compares bytes.
    fn id_of<'a>(pool: &mut Vec<&'a str>, s: &'a str) -> u8 {
        match pool.iter().position(|&p| p == s) {
            Some(i) => i as u8,
            None => {
                pool.push(s);
                (pool.len() - 1) as u8
            }
        }
    }
    let mut pool: Vec<&str> = Vec::new();
    let na: Vec<u8> = a.node_labels.iter().map(|l| id_of(&mut pool, l)).collect();
    let nb: Vec<u8> = b.node_labels.iter().map(|l| id_of(&mut pool, l)).collect();
    let mut edge_pool: Vec<&str> = Vec::new();
    let ea: Vec<(usize, usize, u8)> = a
        .edges
        .iter()
        .map(|e| (e.head, e.dep, id_of(&mut edge_pool, &e.label)))
        .collect();
    let eb: Vec<(usize, usize, u8)> = b
        .edges
        .iter()
        .map(|e| (e.head, e.dep, id_of(&mut edge_pool, &e.label)))
        .collect();

    // Cheap rejections: root labels, node-label and edge-label multisets.
    if na[0] != nb[0] {
        return Ok(false);
    }
    let multiset = |v: &[u8]| {
        let mut m = v.to_vec();
        m.sort_unstable();
        m
    };
    if multiset(&na) != multiset(&nb) {
        return Ok(false);
    }
    let edge_multiset = |es: &[(usize, usize, u8)]| {
        let mut m: Vec<u8> = es.iter().map(|&(_, _, l)| l).collect();
        m.sort_unstable();
        m
    };
    if edge_multiset(&ea) != edge_multiset(&eb) {
        return Ok(false);
    }
    if n == 1 {
        return Ok(true);
    }

    const NONE: u8 = u8::MAX;
    let mut adj_b = [[NONE; BRUTE_FORCE_NODE_LIMIT]; BRUTE_FORCE_NODE_LIMIT];
    for &(h, d, l) in &eb {
        adj_b[h][d] = l;
    }

    // sigma maps a-node i to b-node sigma[i]; the root is pinned.
    let mut perm: Vec<usize> = (1..n).collect();
    let found = for_each_permutation(&mut perm, |p| {
        let sigma = |i: usize| if i == 0 { 0 } else { p[i - 1] };
        for i in 1..n {
            if na[i] != nb[sigma(i)] {
                return false;
            }
        }
        for &(h, d, l) in &ea {
            if adj_b[sigma(h)][sigma(d)] != l {
                return false;
            }
        }
        true
    });
    Ok(found)
}

/// Heap's algorithm: visit every permutation of `items` in place, stopping
/// early (and returning true) if `visit` accepts one.
fn for_each_permutation<T, F>(items: &mut [T], mut visit: F) -> bool
where
    F: FnMut(&[T]) -> bool,
{
    let n = items.len();
    if visit(items) {
        return true;
    }
    let mut counters = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(counters[i], i);
            }
            if visit(items) {
                return true;
            }
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    false
}
