//! Whole-tree and subtree leakage between training and test tree sets.
//!
//! A test item "leaks" when its canonical form under the chosen label mode
//! also occurs in the training set. At the tree level the items are whole
//! dependency trees; at the subtree level every token contributes one unit
//! consisting of its parent, itself, and all its direct children.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{DepEdge, DepTree};
use crate::graphcore::{canonical_form, canonical_forms, CanonicalForm, LabelMode, ReducedTree};

/// Granularity of the leaked items: whole trees or per-token subtree units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Tree,
    Subtree,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Tree => "tree",
            Level::Subtree => "subtree",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown level {0:?} (expected tree or subtree)")]
pub struct ParseLevelError(pub String);

impl FromStr for Level {
    type Err = ParseLevelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tree" => Ok(Level::Tree),
            "subtree" => Ok(Level::Subtree),
            _ => Err(ParseLevelError(s.to_string())),
        }
    }
}

/// How subtree units are counted: every occurrence (`Instance`) or each
/// distinct form once (`Type`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Instance,
    Type,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Instance => "instance",
            Weighting::Type => "type",
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown weighting {0:?} (expected instance or type)")]
pub struct ParseWeightingError(pub String);

impl FromStr for Weighting {
    type Err = ParseWeightingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "instance" => Ok(Weighting::Instance),
            "type" => Ok(Weighting::Type),
            _ => Err(ParseWeightingError(s.to_string())),
        }
    }
}

/// Shape of the unit for the token that hangs off the artificial root.
///
/// `Text` (the default) gives every token the same parent-plus-children
/// unit. `Figure` is a compatibility variant that reduces the root-attached
/// token's unit to the bare parent edge, dropping its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtreeStyle {
    Text,
    Figure,
}

impl SubtreeStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            SubtreeStyle::Text => "text",
            SubtreeStyle::Figure => "figure",
        }
    }
}

impl fmt::Display for SubtreeStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown subtree style {0:?} (expected text or figure)")]
pub struct ParseSubtreeStyleError(pub String);

impl FromStr for SubtreeStyle {
    type Err = ParseSubtreeStyleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(SubtreeStyle::Text),
            "figure" => Ok(SubtreeStyle::Figure),
            _ => Err(ParseSubtreeStyleError(s.to_string())),
        }
    }
}

/// The per-token fragment: parent (node 0), focus token (node 1), and the
/// focus's children (nodes 2..), with the connecting edges and full labels.
/// Label modes are applied later via [`ReducedTree::reduce`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeUnit {
    /// 1-based id of the focus token in the source sentence.
    pub focus_token: usize,
    pub tree: ReducedTree,
}

impl SubtreeUnit {
    /// Fingerprint of the unit under `mode`.
    pub fn canonical_form(&self, mode: LabelMode) -> CanonicalForm {
        canonical_form(&self.tree.reduce(mode))
    }
}

/// Fraction of test items whose canonical form occurs in the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub level: Level,
    pub mode: LabelMode,
    pub weighting: Weighting,
    pub leaked_count: usize,
    pub total_count: usize,
    /// `leaked_count / total_count`; 0 when `total_count` is 0.
    pub leaked_fraction: f64,
    /// Set when `total_count` is 0, making the fraction 0/0. Reported as
    /// 0.0 rather than an error so batch runs survive empty treebanks.
    pub undefined: bool,
}

impl LeakageReport {
    fn new(
        level: Level,
        mode: LabelMode,
        weighting: Weighting,
        leaked_count: usize,
        total_count: usize,
    ) -> Self {
        let undefined = total_count == 0;
        let leaked_fraction = if undefined {
            0.0
        } else {
            leaked_count as f64 / total_count as f64
        };
        LeakageReport {
            level,
            mode,
            weighting,
            leaked_count,
            total_count,
            leaked_fraction,
            undefined,
        }
    }
}

/// Decompose under the default [`SubtreeStyle::Text`]: one unit per token.
pub fn decompose_subtrees(t: &DepTree) -> Vec<SubtreeUnit> {
    decompose_subtrees_styled(t, SubtreeStyle::Text)
}

/// Decompose a tree into per-token units. A token with parent `p` and
/// children `c1..ck` yields the fragment with nodes `{p, token, c1..ck}`
/// and edges `{p -> token}` plus `{token -> ci}`; under
/// [`SubtreeStyle::Figure`] the root-attached token keeps only `p -> token`.
pub fn decompose_subtrees_styled(t: &DepTree, style: SubtreeStyle) -> Vec<SubtreeUnit> {
    let n = t.node_count();
    // incoming[d] = (head, deprel) for node d; robust to edge ordering.
    let mut incoming: Vec<Option<(usize, &str)>> = vec![None; n];
    let mut children: Vec<Vec<(usize, &str)>> = vec![Vec::new(); n];
    for e in &t.edges {
        incoming[e.dep] = Some((e.head, e.label.as_str()));
        children[e.head].push((e.dep, e.label.as_str()));
    }

    (1..n)
        .map(|focus| {
            let (parent, parent_label) =
                incoming[focus].expect("valid DepTree: every token has a head edge");
            let mut node_labels = vec![t.node_labels[parent].clone(), t.node_labels[focus].clone()];
            let mut edges = vec![DepEdge {
                head: 0,
                dep: 1,
                label: parent_label.to_string(),
            }];
            let keep_children = !(style == SubtreeStyle::Figure && parent == 0);
            if keep_children {
                for &(child, child_label) in &children[focus] {
                    let idx = node_labels.len();
                    node_labels.push(t.node_labels[child].clone());
                    edges.push(DepEdge {
                        head: 1,
                        dep: idx,
                        label: child_label.to_string(),
                    });
                }
            }
            SubtreeUnit {
                focus_token: focus,
                tree: ReducedTree { node_labels, edges },
            }
        })
        .collect()
}

fn train_form_set(train: &[DepTree], mode: LabelMode) -> HashSet<CanonicalForm> {
    canonical_forms(train, mode).into_iter().collect()
}

/// Portion of test trees with an isomorphic counterpart in the train set.
pub fn tree_leakage(train: &[DepTree], test: &[DepTree], mode: LabelMode) -> LeakageReport {
    let train_forms = train_form_set(train, mode);
    let leaked = canonical_forms(test, mode)
        .iter()
        .filter(|f| train_forms.contains(f))
        .count();
    LeakageReport::new(Level::Tree, mode, Weighting::Instance, leaked, test.len())
}

fn subtree_forms(trees: &[DepTree], mode: LabelMode, style: SubtreeStyle) -> Vec<CanonicalForm> {
    trees
        .par_iter()
        .map(|t| {
            decompose_subtrees_styled(t, style)
                .iter()
                .map(|u| u.canonical_form(mode))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

/// Subtree-level leakage under the default [`SubtreeStyle::Text`].
pub fn subtree_leakage(
    train: &[DepTree],
    test: &[DepTree],
    mode: LabelMode,
    weighting: Weighting,
) -> LeakageReport {
    subtree_leakage_styled(train, test, mode, weighting, SubtreeStyle::Text)
}

/// Subtree-level leakage: decompose both sides into units; a test unit
/// leaks when its form occurs among the train units. `Instance` counts
/// every test unit, `Type` counts each distinct test form once.
pub fn subtree_leakage_styled(
    train: &[DepTree],
    test: &[DepTree],
    mode: LabelMode,
    weighting: Weighting,
    style: SubtreeStyle,
) -> LeakageReport {
    let train_forms: HashSet<CanonicalForm> =
        subtree_forms(train, mode, style).into_iter().collect();
    let test_forms = subtree_forms(test, mode, style);
    let (leaked, total) = match weighting {
        Weighting::Instance => (
            test_forms
                .iter()
                .filter(|f| train_forms.contains(f))
                .count(),
            test_forms.len(),
        ),
        Weighting::Type => {
            let distinct: HashSet<&CanonicalForm> = test_forms.iter().collect();
            (
                distinct
                    .iter()
                    .filter(|f| train_forms.contains(**f))
                    .count(),
                distinct.len(),
            )
        }
    };
    LeakageReport::new(Level::Subtree, mode, weighting, leaked, total)
}

/// Leakage of `test` against the union of several training sets; identical
/// to computing leakage against their concatenation. `weighting` only
/// matters at [`Level::Subtree`] (tree-level reports are per instance).
pub fn multi_train_leakage(
    train_sets: &[&[DepTree]],
    test: &[DepTree],
    level: Level,
    mode: LabelMode,
    weighting: Weighting,
) -> LeakageReport {
    match level {
        Level::Tree => {
            let mut train_forms = HashSet::new();
            for set in train_sets {
                train_forms.extend(canonical_forms(set, mode));
            }
            let leaked = canonical_forms(test, mode)
                .iter()
                .filter(|f| train_forms.contains(f))
                .count();
            LeakageReport::new(Level::Tree, mode, Weighting::Instance, leaked, test.len())
        }
        Level::Subtree => {
            let mut train_forms = HashSet::new();
            for set in train_sets {
                train_forms.extend(subtree_forms(set, mode, SubtreeStyle::Text));
            }
            let test_forms = subtree_forms(test, mode, SubtreeStyle::Text);
            let (leaked, total) = match weighting {
                Weighting::Instance => (
                    test_forms
                        .iter()
                        .filter(|f| train_forms.contains(f))
                        .count(),
                    test_forms.len(),
                ),
                Weighting::Type => {
                    let distinct: HashSet<&CanonicalForm> = test_forms.iter().collect();
                    (
                        distinct
                            .iter()
                            .filter(|f| train_forms.contains(**f))
                            .count(),
                        distinct.len(),
                    )
                }
            };
            LeakageReport::new(Level::Subtree, mode, weighting, leaked, total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{parse_conllu, to_dep_tree};

    fn trees_of(conllu: &str) -> Vec<DepTree> {
        parse_conllu(conllu)
            .unwrap()
            .sentences
            .iter()
            .map(|s| to_dep_tree(s).unwrap())
            .collect()
    }

    /// "She saw it" — verb with two pronoun dependents.
    fn clause_tree() -> DepTree {
        trees_of(
            "1\tShe\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n\
             2\tsaw\t_\tVERB\t_\t_\t0\troot\t_\t_\n\
             3\tit\t_\tPRON\t_\t_\t2\tdobj\t_\t_\n",
        )
        .remove(0)
    }

    /// "The big boat" — noun with determiner and adjective.
    fn phrase_tree() -> DepTree {
        trees_of(
            "1\tThe\t_\tDET\t_\t_\t3\tdet\t_\t_\n\
             2\tbig\t_\tADJ\t_\t_\t3\tamod\t_\t_\n\
             3\tboat\t_\tNOUN\t_\t_\t0\troot\t_\t_\n",
        )
        .remove(0)
    }

    /// "I prefer a morning flight".
    fn flight_tree() -> DepTree {
        trees_of(
            "1\tI\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n\
             2\tprefer\t_\tVERB\t_\t_\t0\troot\t_\t_\n\
             3\ta\t_\tDET\t_\t_\t5\tdet\t_\t_\n\
             4\tmorning\t_\tNOUN\t_\t_\t5\tnmod\t_\t_\n\
             5\tflight\t_\tNOUN\t_\t_\t2\tdobj\t_\t_\n",
        )
        .remove(0)
    }

    /// "I prefer a flight" — same structure minus the nmod token.
    fn short_flight_tree() -> DepTree {
        trees_of(
            "1\tI\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n\
             2\tprefer\t_\tVERB\t_\t_\t0\troot\t_\t_\n\
             3\ta\t_\tDET\t_\t_\t4\tdet\t_\t_\n\
             4\tflight\t_\tNOUN\t_\t_\t2\tdobj\t_\t_\n",
        )
        .remove(0)
    }

    #[test]
    fn identical_sets_leak_fully() {
        let set = vec![clause_tree(), phrase_tree()];
        for mode in LabelMode::ALL {
            let report = tree_leakage(&set, &set, mode);
            assert_eq!(report.leaked_fraction, 1.0, "mode {mode}");
            assert!(!report.undefined);
            for weighting in [Weighting::Instance, Weighting::Type] {
                let report = subtree_leakage(&set, &set, mode, weighting);
                assert_eq!(report.leaked_fraction, 1.0, "mode {mode} {weighting}");
            }
        }
    }

    #[test]
    fn shape_twins_leak_only_unlabeled() {
        let train = vec![clause_tree()];
        let test = vec![phrase_tree()];
        assert_eq!(
            tree_leakage(&train, &test, LabelMode::None).leaked_fraction,
            1.0
        );
        assert_eq!(
            tree_leakage(&train, &test, LabelMode::Edges).leaked_fraction,
            0.0
        );
        assert_eq!(
            tree_leakage(&train, &test, LabelMode::NodesEdges).leaked_fraction,
            0.0
        );
    }

    #[test]
    fn three_of_four_shapes_leak() {
        // Three distinct shapes in train; test adds a fourth (3-token chain).
        let single = trees_of("1\tHi\t_\tINTJ\t_\t_\t0\troot\t_\t_\n").remove(0);
        let chain2 = trees_of(
            "1\tbirds\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
             2\tfly\t_\tVERB\t_\t_\t0\troot\t_\t_\n",
        )
        .remove(0);
        let star3 = clause_tree();
        let chain3 = trees_of(
            "1\tvery\t_\tADV\t_\t_\t2\tadvmod\t_\t_\n\
             2\told\t_\tADJ\t_\t_\t3\tamod\t_\t_\n\
             3\tships\t_\tNOUN\t_\t_\t0\troot\t_\t_\n",
        )
        .remove(0);
        let train = vec![single.clone(), chain2.clone(), star3.clone()];
        let test = vec![single, chain2, star3, chain3];
        let report = tree_leakage(&train, &test, LabelMode::None);
        assert_eq!(report.leaked_count, 3);
        assert_eq!(report.total_count, 4);
        assert_eq!(report.leaked_fraction, 0.75);
    }

    #[test]
    fn decomposition_yields_one_unit_per_token() {
        let units = decompose_subtrees(&flight_tree());
        assert_eq!(units.len(), 5);
        let focus_ids: Vec<usize> = units.iter().map(|u| u.focus_token).collect();
        assert_eq!(focus_ids, [1, 2, 3, 4, 5]);
    }

    #[test]
    fn object_noun_unit_has_three_edges() {
        let units = decompose_subtrees(&flight_tree());
        let flight = &units[4].tree;
        assert_eq!(flight.node_count(), 4);
        assert_eq!(flight.node_labels, ["VERB", "NOUN", "DET", "NOUN"]);
        let mut labels: Vec<&str> = flight.edges.iter().map(|e| e.label.as_str()).collect();
        labels.sort_unstable();
        assert_eq!(labels, ["det", "dobj", "nmod"]);
    }

    #[test]
    fn root_attached_unit_keeps_children_in_text_style() {
        let units = decompose_subtrees(&flight_tree());
        let prefer = &units[1].tree;
        assert_eq!(prefer.node_labels, ["rt", "VERB", "PRON", "NOUN"]);
        let mut labels: Vec<&str> = prefer.edges.iter().map(|e| e.label.as_str()).collect();
        labels.sort_unstable();
        assert_eq!(labels, ["dobj", "nsubj", "root"]);
    }

    #[test]
    fn figure_style_trims_only_the_root_attached_unit() {
        let text = decompose_subtrees_styled(&flight_tree(), SubtreeStyle::Text);
        let figure = decompose_subtrees_styled(&flight_tree(), SubtreeStyle::Figure);
        assert_eq!(figure.len(), 5);
        assert_eq!(figure[1].tree.node_labels, ["rt", "VERB"]);
        assert_eq!(figure[1].tree.edges.len(), 1);
        assert_eq!(figure[1].tree.edges[0].label, "root");
        for i in [0, 2, 3, 4] {
            assert_eq!(figure[i], text[i], "unit {i}");
        }
    }

    #[test]
    fn single_token_unit_is_the_root_edge() {
        let single = trees_of("1\tHi\t_\tINTJ\t_\t_\t0\troot\t_\t_\n").remove(0);
        let units = decompose_subtrees(&single);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].tree.node_labels, ["rt", "INTJ"]);
        assert_eq!(units[0].tree.edges.len(), 1);
    }

    #[test]
    fn shorter_variant_leaks_three_of_four_units() {
        // Focus-token units of "I prefer a flight" against the morning
        // variant: "I", "prefer", and "a" match train units exactly; the
        // "flight" unit differs because its child set lost the nmod noun.
        let train = vec![flight_tree()];
        let test = vec![short_flight_tree()];
        let report = subtree_leakage(&train, &test, LabelMode::NodesEdges, Weighting::Instance);
        assert_eq!(report.total_count, 4);
        assert_eq!(report.leaked_count, 3);
        assert_eq!(report.leaked_fraction, 0.75);
    }

    #[test]
    fn instance_weighting_counts_duplicates() {
        // Two copies of the clause in test: each token's unit counts twice
        // under INSTANCE, once under TYPE.
        let train = vec![clause_tree()];
        let test = vec![clause_tree(), clause_tree()];
        let instance = subtree_leakage(&train, &test, LabelMode::NodesEdges, Weighting::Instance);
        assert_eq!(instance.total_count, 6);
        assert_eq!(instance.leaked_count, 6);
        let by_type = subtree_leakage(&train, &test, LabelMode::NodesEdges, Weighting::Type);
        // "She"(nsubj) and "it"(dobj) units differ; "saw" adds a third form.
        assert_eq!(by_type.total_count, 3);
        assert_eq!(by_type.leaked_count, 3);
    }

    #[test]
    fn empty_test_set_is_flagged_not_fatal() {
        let train = vec![clause_tree()];
        let report = tree_leakage(&train, &[], LabelMode::None);
        assert_eq!(report.leaked_fraction, 0.0);
        assert_eq!(report.total_count, 0);
        assert!(report.undefined);
        let report = subtree_leakage(&train, &[], LabelMode::None, Weighting::Instance);
        assert!(report.undefined);
    }

    #[test]
    fn empty_train_set_means_zero_leakage() {
        let test = vec![clause_tree()];
        let report = tree_leakage(&[], &test, LabelMode::None);
        assert_eq!(report.leaked_fraction, 0.0);
        assert!(!report.undefined);
    }

    #[test]
    fn subtree_total_is_token_count() {
        let test = vec![clause_tree(), flight_tree(), phrase_tree()];
        let report = subtree_leakage(&[], &test, LabelMode::None, Weighting::Instance);
        assert_eq!(report.total_count, 3 + 5 + 3);
    }

    #[test]
    fn single_train_set_matches_direct_call() {
        let train = vec![clause_tree(), phrase_tree()];
        let test = vec![clause_tree(), flight_tree()];
        for mode in LabelMode::DEFAULT_REPORT {
            let direct = tree_leakage(&train, &test, mode);
            let multi = multi_train_leakage(
                &[train.as_slice()],
                &test,
                Level::Tree,
                mode,
                Weighting::Instance,
            );
            assert_eq!(multi, direct, "mode {mode}");
            let direct = subtree_leakage(&train, &test, mode, Weighting::Type);
            let multi = multi_train_leakage(
                &[train.as_slice()],
                &test,
                Level::Subtree,
                mode,
                Weighting::Type,
            );
            assert_eq!(multi, direct, "mode {mode}");
        }
    }

    #[test]
    fn form_in_any_training_set_counts() {
        let set_a = vec![phrase_tree()];
        let set_b = vec![clause_tree()]; // the test tree hides here
        let set_c = vec![flight_tree()];
        let test = vec![clause_tree()];
        let report = multi_train_leakage(
            &[set_a.as_slice(), set_b.as_slice(), set_c.as_slice()],
            &test,
            Level::Tree,
            LabelMode::NodesEdges,
            Weighting::Instance,
        );
        assert_eq!(report.leaked_fraction, 1.0);
    }

    #[test]
    fn disjoint_sets_cover_the_test_jointly() {
        let single = trees_of("1\tHi\t_\tINTJ\t_\t_\t0\troot\t_\t_\n").remove(0);
        let pair = trees_of(
            "1\tbirds\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
             2\tfly\t_\tVERB\t_\t_\t0\troot\t_\t_\n",
        )
        .remove(0);
        let sets = [
            vec![single.clone(), pair.clone()],
            vec![clause_tree(), phrase_tree()],
            vec![flight_tree(), short_flight_tree()],
        ];
        let test = vec![
            single,
            pair,
            clause_tree(),
            phrase_tree(),
            flight_tree(),
            short_flight_tree(),
        ];
        let slices: Vec<&[DepTree]> = sets.iter().map(Vec::as_slice).collect();
        let report = multi_train_leakage(
            &slices,
            &test,
            Level::Tree,
            LabelMode::NodesEdges,
            Weighting::Instance,
        );
        assert_eq!(report.leaked_count, 6);
        assert_eq!(report.leaked_fraction, 1.0);
    }

    #[test]
    fn mode_monotonicity_on_mixed_sets() {
        let train = vec![clause_tree(), phrase_tree()];
        let test = vec![clause_tree(), flight_tree(), short_flight_tree()];
        let by_mode = |mode| tree_leakage(&train, &test, mode).leaked_fraction;
        assert!(by_mode(LabelMode::None) >= by_mode(LabelMode::Edges));
        assert!(by_mode(LabelMode::Edges) >= by_mode(LabelMode::NodesEdges));
    }
}
