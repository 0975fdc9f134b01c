//! Counterfactual treebank editing: delete modifier subtrees from tokens
//! whose head bears a chosen relation, and count such constructions.
//!
//! The motivating edit removes adjectival modifiers (`amod`) from subject
//! or object nouns (`nsubj`, `obj`/`dobj`), producing training data that
//! provably does not contain the construction; counting the construction in
//! parser output then measures whether a parser reproduces what it never
//! saw. Deletion takes the modifier and its entire subtree — the words are
//! absent from the result, not re-attached.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::conllu::{validate_tree, InvalidSentence, MultiwordRange, Sentence, Treebank};

/// What happens to a matched modifier. Only subtree deletion exists; the
/// enum records the choice in specs and reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalPolicy {
    #[default]
    Subtree,
}

#[derive(Debug, Error, PartialEq)]
pub enum SurgeryError {
    #[error("target and modifier relations must differ, both are {0:?}")]
    IdenticalRelations(String),
    #[error("sentence {index}: {source}")]
    InvalidSentence {
        index: usize,
        source: InvalidSentence,
    },
}

/// Which (head relation, modifier relation) pairs to edit or count.
///
/// A token matches when its deprel matches `modifier_rel` and its head's
/// deprel matches `target_rel`. Matching is exact by default;
/// `match_prefix` additionally accepts subtyped relations (`nsubj:pass`
/// for `nsubj`), and `obj_dobj_synonyms` makes the relations `obj` and
/// `dobj` interchangeable — distinct treebank generations spell the object
/// relation differently, and the merge is never silent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurgerySpec {
    target_rel: String,
    modifier_rel: String,
    pub removal: RemovalPolicy,
    pub match_prefix: bool,
    pub obj_dobj_synonyms: bool,
}

impl SurgerySpec {
    pub fn new(
        target_rel: impl Into<String>,
        modifier_rel: impl Into<String>,
    ) -> Result<Self, SurgeryError> {
        let target_rel = target_rel.into();
        let modifier_rel = modifier_rel.into();
        if target_rel == modifier_rel {
            return Err(SurgeryError::IdenticalRelations(target_rel));
        }
        Ok(SurgerySpec {
            target_rel,
            modifier_rel,
            removal: RemovalPolicy::Subtree,
            match_prefix: false,
            obj_dobj_synonyms: false,
        })
    }

    pub fn with_match_prefix(mut self, on: bool) -> Self {
        self.match_prefix = on;
        self
    }

    pub fn with_obj_dobj_synonyms(mut self, on: bool) -> Self {
        self.obj_dobj_synonyms = on;
        self
    }

    pub fn target_rel(&self) -> &str {
        &self.target_rel
    }

    pub fn modifier_rel(&self) -> &str {
        &self.modifier_rel
    }

    fn rel_matches(&self, token_rel: &str, spec_rel: &str) -> bool {
        let one = |wanted: &str| {
            token_rel == wanted
                || (self.match_prefix
                    && token_rel.len() > wanted.len()
                    && token_rel.starts_with(wanted)
                    && token_rel.as_bytes()[wanted.len()] == b':')
        };
        if one(spec_rel) {
            return true;
        }
        if self.obj_dobj_synonyms {
            match spec_rel {
                "obj" => one("dobj"),
                "dobj" => one("obj"),
                _ => false,
            }
        } else {
            false
        }
    }

    fn matches_target(&self, deprel: &str) -> bool {
        self.rel_matches(deprel, &self.target_rel)
    }

    fn matches_modifier(&self, deprel: &str) -> bool {
        self.rel_matches(deprel, &self.modifier_rel)
    }
}

/// Tallies of one [`remove_modifiers`] run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SurgeryReport {
    /// Matched modifier tokens — the constructions that were removed.
    pub removal_count: usize,
    /// All deleted tokens, descendants included.
    pub removed_token_count: usize,
    /// Sentences dropped because no token survived.
    pub dropped_sentence_count: usize,
    /// Deprel of every deleted token (verbatim), tallied.
    pub removed_deprel_histogram: BTreeMap<String, usize>,
}

/// Marker comment appended to sentences whose token set was edited; the
/// original `# text = ...` comment is preserved verbatim.
pub const TEXT_EDITED_COMMENT: &str = "# text_edited = true";

fn matched_modifiers(s: &Sentence, spec: &SurgerySpec) -> Vec<usize> {
    s.tokens
        .iter()
        .filter(|t| {
            t.head != 0
                && spec.matches_modifier(&t.deprel)
                && spec.matches_target(&s.tokens[t.head - 1].deprel)
        })
        .map(|t| t.id)
        .collect()
}

/// Count tokens whose deprel matches the modifier relation and whose head's
/// deprel matches the target relation.
pub fn count_constructions(tb: &Treebank, spec: &SurgerySpec) -> Result<usize, SurgeryError> {
    let mut total = 0;
    for (index, s) in tb.sentences.iter().enumerate() {
        let report = validate_tree(s);
        if !report.is_valid() {
            return Err(SurgeryError::InvalidSentence {
                index,
                source: InvalidSentence { report },
            });
        }
        total += matched_modifiers(s, spec).len();
    }
    Ok(total)
}

/// Delete every matched modifier together with its subtree, renumbering the
/// surviving tokens. Comments are preserved; edited sentences additionally
/// carry a [`TEXT_EDITED_COMMENT`] marker, and multiword ranges touching a
/// deleted token are dropped. Applying the same spec again is a no-op.
pub fn remove_modifiers(
    tb: &Treebank,
    spec: &SurgerySpec,
) -> Result<(Treebank, SurgeryReport), SurgeryError> {
    let mut report = SurgeryReport::default();
    let mut sentences = Vec::with_capacity(tb.sentences.len());

    for (index, s) in tb.sentences.iter().enumerate() {
        let validation = validate_tree(s);
        if !validation.is_valid() {
            return Err(SurgeryError::InvalidSentence {
                index,
                source: InvalidSentence { report: validation },
            });
        }

        let roots = matched_modifiers(s, spec);
        if roots.is_empty() {
            sentences.push(s.clone());
            continue;
        }
        report.removal_count += roots.len();

        // Expand removal roots to whole subtrees.
        let n = s.tokens.len();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for t in &s.tokens {
            children[t.head].push(t.id);
        }
        let mut removed = vec![false; n + 1];
        let mut stack = roots;
        while let Some(id) = stack.pop() {
            if removed[id] {
                continue;
            }
            removed[id] = true;
            stack.extend(&children[id]);
        }

        // Renumber survivors; heads of survivors always survive (a token
        // whose head was deleted sits inside the deleted subtree).
        let mut new_id = vec![0usize; n + 1];
        let mut next = 0usize;
        for id in 1..=n {
            if !removed[id] {
                next += 1;
                new_id[id] = next;
            }
        }
        for t in &s.tokens {
            if removed[t.id] {
                report.removed_token_count += 1;
                *report
                    .removed_deprel_histogram
                    .entry(t.deprel.clone())
                    .or_insert(0) += 1;
            }
        }
        if next == 0 {
            report.dropped_sentence_count += 1;
            continue;
        }

        let tokens = s
            .tokens
            .iter()
            .filter(|t| !removed[t.id])
            .map(|t| {
                let mut t = t.clone();
                t.id = new_id[t.id];
                t.head = if t.head == 0 { 0 } else { new_id[t.head] };
                t
            })
            .collect();
        let multiword_ranges = s
            .multiword_ranges
            .iter()
            .filter(|r| r.start >= 1 && r.end <= n && (r.start..=r.end).all(|id| !removed[id]))
            .map(|r| MultiwordRange {
                start: new_id[r.start],
                end: new_id[r.end],
                form: r.form.clone(),
                misc: r.misc.clone(),
            })
            .collect();
        let mut comments = s.comments.clone();
        if !comments.iter().any(|c| c == TEXT_EDITED_COMMENT) {
            comments.push(TEXT_EDITED_COMMENT.to_string());
        }

        sentences.push(Sentence {
            tokens,
            comments,
            multiword_ranges,
            dropped_empty_nodes: s.dropped_empty_nodes,
        });
    }

    let edited = Treebank {
        sentences,
        source_id: tb.source_id.clone(),
    };
    Ok((edited, report))
}
