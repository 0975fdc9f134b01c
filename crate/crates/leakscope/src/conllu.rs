//! CoNLL-U parsing, validation, and serialization.
//!
//! Token lines carry ten tab-separated columns. Columns are stored verbatim,
//! so `parse` followed by [`serialize_conllu`] reproduces token lines
//! byte-for-byte. Multiword-token ranges (ids like `3-4`) are preserved as
//! annotations; empty-node lines (ids like `3.1`) are dropped and the owning
//! sentence is flagged.

use std::fmt;

use thiserror::Error;

/// One CoNLL-U token row, columns stored verbatim (`_` included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based surface position.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    /// Universal POS tag.
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Head token id; 0 marks the syntactic root.
    pub head: usize,
    /// Dependency relation to the head.
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

/// A multiword-token range line (`start-end`), kept as an annotation.
///
/// Per the format, every column of a range line other than FORM and MISC is
/// `_`; those two are preserved and the rest re-emitted as `_`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiwordRange {
    pub start: usize,
    pub end: usize,
    pub form: String,
    pub misc: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// Comment lines (`# ...`), verbatim, emitted before the token block.
    pub comments: Vec<String>,
    pub multiword_ranges: Vec<MultiwordRange>,
    /// Set when empty-node lines were dropped during parsing.
    pub dropped_empty_nodes: bool,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Treebank {
    pub sentences: Vec<Sentence>,
    /// Identifier carried through reports; not part of the wire format.
    pub source_id: String,
}

impl Treebank {
    pub fn new(sentences: Vec<Sentence>, source_id: impl Into<String>) -> Self {
        Treebank {
            sentences,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Truncate every deprel at the first `:`, dropping subtype suffixes
    /// (`nsubj:pass` becomes `nsubj`).
    pub fn strip_deprel_subtypes(&mut self) {
        for sentence in &mut self.sentences {
            for token in &mut sentence.tokens {
                if let Some(idx) = token.deprel.find(':') {
                    token.deprel.truncate(idx);
                }
            }
        }
    }
}

/// Rooted directed dependency tree with an artificial root node at index 0.
///
/// Node `0` carries the reserved label `"rt"`; node `i` (for `i >= 1`)
/// carries the UPOS of token `i`. Each edge runs from head to dependent and
/// is labeled with the dependent's deprel, kept verbatim (including the
/// head-0 token's own deprel on the edge out of the artificial root).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTree {
    /// Node label per index; `node_labels[0] == "rt"`.
    pub node_labels: Vec<String>,
    /// One edge per token, in token order.
    pub edges: Vec<DepEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepEdge {
    pub head: usize,
    pub dep: usize,
    pub label: String,
}

impl DepTree {
    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Reserved label of the artificial root node.
pub const ROOT_NODE_LABEL: &str = "rt";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected 10 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid token id {value:?}")]
    InvalidId { line: usize, value: String },
    #[error("line {line}: invalid head {value:?}")]
    InvalidHead { line: usize, value: String },
    #[error("line {line}: invalid multiword range {value:?}")]
    InvalidRange { line: usize, value: String },
    #[error("line {line}: empty {column} column")]
    EmptyColumn { line: usize, column: &'static str },
}

/// A structural problem found by [`validate_tree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// No token has head 0.
    NoRoot,
    /// More than one token has head 0.
    MultipleRoots { ids: Vec<usize> },
    /// A head points outside 0..=n.
    HeadOutOfRange { id: usize, head: usize },
    /// Following head links from `id` never reaches the root.
    Cycle { id: usize },
    /// Token ids are not exactly 1..=n in order.
    NonContiguousIds { position: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoRoot => write!(f, "no token with head 0"),
            Violation::MultipleRoots { ids } => {
                write!(f, "multiple tokens with head 0: {ids:?}")
            }
            Violation::HeadOutOfRange { id, head } => {
                write!(f, "token {id} has out-of-range head {head}")
            }
            Violation::Cycle { id } => write!(f, "token {id} is part of a head cycle"),
            Violation::NonContiguousIds { position, found } => {
                write!(f, "expected token id {position}, found {found}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid sentence: {report}")]
pub struct InvalidSentence {
    pub report: ValidationReport,
}

/// Parse a CoNLL-U document. Sentences are separated by blank lines;
/// comment lines and multiword ranges are preserved, empty nodes dropped.
pub fn parse_conllu(text: &str) -> Result<Treebank, ParseError> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut has_content = false;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            if has_content {
                sentences.push(std::mem::take(&mut current));
                has_content = false;
            }
            continue;
        }
        if line.starts_with('#') {
            current.comments.push(line.to_string());
            has_content = true;
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(ParseError::FieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        has_content = true;

        let id_field = fields[0];
        if let Some((start, end)) = id_field.split_once('-') {
            let parse_part = |s: &str| {
                s.parse::<usize>().ok().filter(|&v| v >= 1).ok_or_else(|| {
                    ParseError::InvalidRange {
                        line: line_no,
                        value: id_field.to_string(),
                    }
                })
            };
            let (start, end) = (parse_part(start)?, parse_part(end)?);
            if end < start {
                return Err(ParseError::InvalidRange {
                    line: line_no,
                    value: id_field.to_string(),
                });
            }
            current.multiword_ranges.push(MultiwordRange {
                start,
                end,
                form: fields[1].to_string(),
                misc: fields[9].to_string(),
            });
            continue;
        }
        if id_field.contains('.') {
            // Empty node (enhanced UD); basic trees only.
            current.dropped_empty_nodes = true;
            continue;
        }

        let id = id_field
            .parse::<usize>()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| ParseError::InvalidId {
                line: line_no,
                value: id_field.to_string(),
            })?;
        let head = fields[6]
            .parse::<usize>()
            .map_err(|_| ParseError::InvalidHead {
                line: line_no,
                value: fields[6].to_string(),
            })?;
        if fields[3].is_empty() {
            return Err(ParseError::EmptyColumn {
                line: line_no,
                column: "upos",
            });
        }
        if fields[7].is_empty() {
            return Err(ParseError::EmptyColumn {
                line: line_no,
                column: "deprel",
            });
        }

        current.tokens.push(Token {
            id,
            form: fields[1].to_string(),
            lemma: fields[2].to_string(),
            upos: fields[3].to_string(),
            xpos: fields[4].to_string(),
            feats: fields[5].to_string(),
            head,
            deprel: fields[7].to_string(),
            deps: fields[8].to_string(),
            misc: fields[9].to_string(),
        });
    }
    if has_content {
        sentences.push(current);
    }

    Ok(Treebank {
        sentences,
        source_id: String::new(),
    })
}

/// Serialize back to CoNLL-U text. Inverse of [`parse_conllu`] on documents
/// without empty nodes; callers are expected to serialize only sentences
/// that pass [`validate_tree`] (nothing is checked here).
pub fn serialize_conllu(tb: &Treebank) -> String {
    let mut out = String::new();
    for sentence in &tb.sentences {
        for comment in &sentence.comments {
            out.push_str(comment);
            out.push('\n');
        }
        let mut ranges = sentence.multiword_ranges.iter().peekable();
        for token in &sentence.tokens {
            while ranges.peek().is_some_and(|r| r.start <= token.id) {
                let r = ranges.next().unwrap();
                out.push_str(&format!(
                    "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}\n",
                    r.start, r.end, r.form, r.misc
                ));
            }
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                token.id,
                token.form,
                token.lemma,
                token.upos,
                token.xpos,
                token.feats,
                token.head,
                token.deprel,
                token.deps,
                token.misc
            ));
        }
        for r in ranges {
            out.push_str(&format!(
                "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}\n",
                r.start, r.end, r.form, r.misc
            ));
        }
        out.push('\n');
    }
    out
}

/// Check the tree-structural invariants: contiguous ids, exactly one root,
/// heads in range, no head cycles.
pub fn validate_tree(s: &Sentence) -> ValidationReport {
    let mut violations = Vec::new();
    let n = s.tokens.len();

    for (i, token) in s.tokens.iter().enumerate() {
        if token.id != i + 1 {
            violations.push(Violation::NonContiguousIds {
                position: i + 1,
                found: token.id,
            });
        }
    }

    let root_ids: Vec<usize> = s
        .tokens
        .iter()
        .filter(|t| t.head == 0)
        .map(|t| t.id)
        .collect();
    match root_ids.len() {
        0 if n > 0 => violations.push(Violation::NoRoot),
        0 | 1 => {}
        _ => violations.push(Violation::MultipleRoots { ids: root_ids }),
    }

    for token in &s.tokens {
        if token.head > n {
            violations.push(Violation::HeadOutOfRange {
                id: token.id,
                head: token.head,
            });
        }
    }

    // Head-chain walk; only meaningful over positionally indexed tokens.
    let contiguous = s.tokens.iter().enumerate().all(|(i, t)| t.id == i + 1);
    if contiguous {
        // state: 0 unknown, 1 on current path, 2 reaches root
        let mut state = vec![0u8; n + 1];
        state[0] = 2;
        for start in 1..=n {
            if state[start] != 0 {
                continue;
            }
            let mut path = Vec::new();
            let mut cur = start;
            loop {
                if cur == 0 || state[cur] == 2 {
                    for &p in &path {
                        state[p] = 2;
                    }
                    break;
                }
                if state[cur] == 1 {
                    // Re-entered the current path: everything on it cycles.
                    for &p in &path {
                        state[p] = 2;
                        if !violations
                            .iter()
                            .any(|v| matches!(v, Violation::Cycle { id } if *id == p))
                        {
                            violations.push(Violation::Cycle { id: p });
                        }
                    }
                    break;
                }
                state[cur] = 1;
                path.push(cur);
                let head = s.tokens[cur - 1].head;
                if head > n {
                    for &p in &path {
                        state[p] = 2;
                    }
                    break;
                }
                cur = head;
            }
        }
    }

    ValidationReport { violations }
}

/// Convert a valid sentence into its [`DepTree`], materializing the
/// artificial root as node 0.
pub fn to_dep_tree(s: &Sentence) -> Result<DepTree, InvalidSentence> {
    let report = validate_tree(s);
    if !report.is_valid() {
        return Err(InvalidSentence { report });
    }

    let mut node_labels = Vec::with_capacity(s.tokens.len() + 1);
    node_labels.push(ROOT_NODE_LABEL.to_string());
    let mut edges = Vec::with_capacity(s.tokens.len());
    for token in &s.tokens {
        node_labels.push(token.upos.clone());
        edges.push(DepEdge {
            head: token.head,
            dep: token.id,
            label: token.deprel.clone(),
        });
    }
    Ok(DepTree { node_labels, edges })
}

/// Dependency trees of every sentence; fails on the first invalid sentence,
/// reporting its 0-based index.
pub fn treebank_to_dep_trees(tb: &Treebank) -> Result<Vec<DepTree>, (usize, InvalidSentence)> {
    tb.sentences
        .iter()
        .enumerate()
        .map(|(i, s)| to_dep_tree(s).map_err(|e| (i, e)))
        .collect()
}
