//! Leakage-aware experimental splits and treebank statistics.
//!
//! Implements the sampling strategies used to probe what leakage does to a
//! parser: partition train/test by whether each tree's canonical form
//! occurs on the other side, then draw size-controlled leaky / non-leaky /
//! random / diverse training samples, and summarize any treebank's
//! diversity, length, depth, and dependency-length profile.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{to_dep_tree, DepTree, InvalidSentence, Treebank};
use crate::graphcore::{canonical_forms, equivalence_classes, CanonicalForm, LabelMode};
use crate::rng::{rng_from_seed, sample_indices, uniform_below};

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("{origin} sentence {index}: {source}")]
    InvalidSentence {
        origin: &'static str,
        index: usize,
        source: InvalidSentence,
    },
    #[error("cannot sample {requested} sentences; only {available} available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error(
        "requested {requested} diverse sentences but only {available} equivalence classes exist"
    )]
    TooFewClasses { requested: usize, available: usize },
    #[error("treebank {0:?} is empty")]
    EmptyTreebank(String),
    #[error("sample size must be at least 1 (or auto)")]
    ZeroSampleSize,
    #[error("the {strategy} strategy has no sentences to draw from (feasible maximum is 0)")]
    EmptyStrategy { strategy: &'static str },
}

/// Requested sample size: a fixed count or the largest size feasible for
/// every strategy at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    Auto,
    Fixed(usize),
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Auto => f.write_str("auto"),
            SampleSize::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid sample size {0:?} (expected a positive integer or \"auto\")")]
pub struct ParseSampleSizeError(pub String);

impl FromStr for SampleSize {
    type Err = ParseSampleSizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SampleSize::Auto);
        }
        s.parse::<usize>()
            .map(SampleSize::Fixed)
            .map_err(|_| ParseSampleSizeError(s.to_string()))
    }
}

/// Configuration for [`build_samples`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    /// Label mode for leakage and equivalence classes. Defaults to
    /// [`LabelMode::None`] — the unlabeled full-tree setting.
    pub mode: LabelMode,
    pub sample_size: SampleSize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            mode: LabelMode::None,
            sample_size: SampleSize::Auto,
            seed: 0,
        }
    }
}

/// The four disjoint parts of a train/test pair under one label mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageSplit {
    /// Train sentences whose tree form also occurs in test.
    pub train_leaky: Treebank,
    pub train_nonleaky: Treebank,
    /// Test sentences whose tree form also occurs in train.
    pub test_leaky: Treebank,
    pub test_nonleaky: Treebank,
}

/// The size-controlled training samples of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// Common size of the four samples.
    pub size: usize,
    pub leaky: Treebank,
    pub nonleaky: Treebank,
    pub random: Treebank,
    pub diverse: Treebank,
}

/// Summary statistics of a treebank under one label mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreebankStats {
    pub sentence_count: usize,
    /// Unique equivalence classes divided by sentence count; 1 means every
    /// tree is structurally distinct.
    pub diversity: f64,
    /// Mean tokens per sentence.
    pub avg_length: f64,
    /// Mean tree depth, where depth counts token levels: a single-token
    /// sentence has depth 1, a root token with only leaf dependents depth 2.
    pub avg_depth: f64,
    /// Mean |head position − dependent position| over all tokens with a
    /// non-root head, pooled across sentences.
    pub avg_dep_length: f64,
    /// Set when no token has a non-root head (avg_dep_length is then 0/0,
    /// reported as 0).
    pub dep_length_undefined: bool,
}

fn dep_trees_of(tb: &Treebank, origin: &'static str) -> Result<Vec<DepTree>, SamplingError> {
    tb.sentences
        .iter()
        .enumerate()
        .map(|(index, s)| {
            to_dep_tree(s).map_err(|source| SamplingError::InvalidSentence {
                origin,
                index,
                source,
            })
        })
        .collect()
}

fn select_sentences(tb: &Treebank, indices: &[usize], suffix: &str) -> Treebank {
    Treebank {
        sentences: indices.iter().map(|&i| tb.sentences[i].clone()).collect(),
        source_id: if tb.source_id.is_empty() {
            suffix.trim_start_matches('.').to_string()
        } else {
            format!("{}{suffix}", tb.source_id)
        },
    }
}

/// Partition both treebanks by whether each tree's canonical form occurs on
/// the other side. The leaky and non-leaky parts are disjoint and recombine
/// to their source.
pub fn split_by_leakage(
    train: &Treebank,
    test: &Treebank,
    mode: LabelMode,
) -> Result<LeakageSplit, SamplingError> {
    let train_trees = dep_trees_of(train, "train")?;
    let test_trees = dep_trees_of(test, "test")?;
    let train_forms = canonical_forms(&train_trees, mode);
    let test_forms = canonical_forms(&test_trees, mode);
    let train_set: HashSet<&CanonicalForm> = train_forms.iter().collect();
    let test_set: HashSet<&CanonicalForm> = test_forms.iter().collect();

    let partition = |forms: &[CanonicalForm], other: &HashSet<&CanonicalForm>| {
        let mut leaky = Vec::new();
        let mut nonleaky = Vec::new();
        for (i, form) in forms.iter().enumerate() {
            if other.contains(form) {
                leaky.push(i);
            } else {
                nonleaky.push(i);
            }
        }
        (leaky, nonleaky)
    };
    let (train_leaky, train_nonleaky) = partition(&train_forms, &test_set);
    let (test_leaky, test_nonleaky) = partition(&test_forms, &train_set);

    Ok(LeakageSplit {
        train_leaky: select_sentences(train, &train_leaky, ".leaky"),
        train_nonleaky: select_sentences(train, &train_nonleaky, ".nonleaky"),
        test_leaky: select_sentences(test, &test_leaky, ".leaky"),
        test_nonleaky: select_sentences(test, &test_nonleaky, ".nonleaky"),
    })
}

/// Uniform sample of `n` sentences without replacement, in corpus order.
/// Deterministic under (tb, n, seed); `n` = 0 yields an empty treebank
/// (callers decide whether that is allowed).
pub fn sample_random(tb: &Treebank, n: usize, seed: u64) -> Result<Treebank, SamplingError> {
    if n > tb.len() {
        return Err(SamplingError::SampleTooLarge {
            requested: n,
            available: tb.len(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let picked = sample_indices(&mut rng, tb.len(), n);
    Ok(select_sentences(tb, &picked, ".random"))
}

/// One representative per isomorphism equivalence class — a sample in which
/// no two trees are isomorphic under `mode`. When the treebank has more
/// than `n` classes, a uniform subset of `n` classes is kept (seeded); the
/// representative within each class is also drawn seeded-uniformly rather
/// than by corpus position, to avoid corpus-order bias.
pub fn sample_diverse(
    tb: &Treebank,
    n: usize,
    mode: LabelMode,
    seed: u64,
) -> Result<Treebank, SamplingError> {
    let trees = dep_trees_of(tb, "input")?;
    let classes = equivalence_classes(&trees, mode);
    if n > classes.len() {
        return Err(SamplingError::TooFewClasses {
            requested: n,
            available: classes.len(),
        });
    }
    // Seed order: first the class subset, then one member per kept class.
    let mut rng = rng_from_seed(seed);
    let kept = sample_indices(&mut rng, classes.len(), n);
    let mut picked: Vec<usize> = kept
        .iter()
        .map(|&c| {
            let members = &classes[c].members;
            members[uniform_below(&mut rng, members.len())]
        })
        .collect();
    picked.sort_unstable();
    Ok(select_sentences(tb, &picked, ".diverse"))
}

/// Truncate every treebank to the size of the smallest, by seeded uniform
/// subsampling, so downstream comparisons are size-controlled. Treebank `i`
/// is subsampled with `seed + i`.
pub fn size_control(samples: &[Treebank], seed: u64) -> Vec<Treebank> {
    let Some(min) = samples.iter().map(Treebank::len).min() else {
        return Vec::new();
    };
    samples
        .iter()
        .enumerate()
        .map(|(i, tb)| {
            if tb.len() == min {
                tb.clone()
            } else {
                sample_random(tb, min, seed.wrapping_add(i as u64))
                    .expect("minimum size is feasible for every input")
            }
        })
        .collect()
}

fn sentence_depth(tree: &DepTree) -> usize {
    let n = tree.node_count();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &tree.edges {
        children[e.head].push(e.dep);
    }
    // Levels below the artificial root: the root token is level 1.
    let mut depth = 0usize;
    let mut frontier = vec![(0usize, 0usize)];
    while let Some((node, level)) = frontier.pop() {
        depth = depth.max(level);
        for &c in &children[node] {
            frontier.push((c, level + 1));
        }
    }
    depth
}

/// Summary statistics of `tb` under `mode` (diversity needs the mode; the
/// other fields do not depend on it).
pub fn treebank_stats(tb: &Treebank, mode: LabelMode) -> Result<TreebankStats, SamplingError> {
    if tb.is_empty() {
        return Err(SamplingError::EmptyTreebank(tb.source_id.clone()));
    }
    let trees = dep_trees_of(tb, "input")?;
    let class_count = equivalence_classes(&trees, mode).len();
    let n = tb.len() as f64;

    // (tokens, depth, dependency-length sum, dependency count) per sentence,
    // computed in parallel, reduced in corpus order for bit-stable sums.
    let per_sentence: Vec<(usize, usize, u64, usize)> = tb
        .sentences
        .par_iter()
        .zip(trees.par_iter())
        .map(|(s, tree)| {
            let mut dep_sum = 0u64;
            let mut dep_count = 0usize;
            for token in &s.tokens {
                if token.head != 0 {
                    dep_sum += token.head.abs_diff(token.id) as u64;
                    dep_count += 1;
                }
            }
            (s.len(), sentence_depth(tree), dep_sum, dep_count)
        })
        .collect();

    let token_total: usize = per_sentence.iter().map(|x| x.0).sum();
    let depth_total: usize = per_sentence.iter().map(|x| x.1).sum();
    let dep_sum: u64 = per_sentence.iter().map(|x| x.2).sum();
    let dep_count: usize = per_sentence.iter().map(|x| x.3).sum();
    let dep_length_undefined = dep_count == 0;

    Ok(TreebankStats {
        sentence_count: tb.len(),
        diversity: class_count as f64 / n,
        avg_length: token_total as f64 / n,
        avg_depth: depth_total as f64 / n,
        avg_dep_length: if dep_length_undefined {
            0.0
        } else {
            dep_sum as f64 / dep_count as f64
        },
        dep_length_undefined,
    })
}

/// Build the four size-controlled training samples: the leaky and
/// non-leaky parts of `train` (relative to `test`), a random control, and
/// a diverse sample. With [`SampleSize::Auto`] the common size is the
/// largest feasible for all strategies: min(|leaky|, |nonleaky|, classes).
pub fn build_samples(
    train: &Treebank,
    test: &Treebank,
    spec: &SplitSpec,
) -> Result<SampleSet, SamplingError> {
    let split = split_by_leakage(train, test, spec.mode)?;
    let class_count = {
        let trees = dep_trees_of(train, "train")?;
        equivalence_classes(&trees, spec.mode).len()
    };

    let feasible = split
        .train_leaky
        .len()
        .min(split.train_nonleaky.len())
        .min(class_count);
    let n = match spec.sample_size {
        SampleSize::Auto => {
            if feasible == 0 {
                let strategy = if split.train_leaky.is_empty() {
                    "leaky"
                } else {
                    "nonleaky"
                };
                return Err(SamplingError::EmptyStrategy { strategy });
            }
            feasible
        }
        SampleSize::Fixed(0) => return Err(SamplingError::ZeroSampleSize),
        SampleSize::Fixed(n) => n,
    };

    // Each strategy draws from its own seed stream so samples are
    // independent but the whole set is reproducible from one seed.
    let leaky = sample_random(&split.train_leaky, n, spec.seed)?;
    let nonleaky = sample_random(&split.train_nonleaky, n, spec.seed.wrapping_add(1))?;
    let random = sample_random(train, n, spec.seed.wrapping_add(2))?;
    let diverse = sample_diverse(train, n, spec.mode, spec.seed.wrapping_add(3))?;

    Ok(SampleSet {
        size: n,
        leaky,
        nonleaky,
        random,
        diverse,
    })
}
