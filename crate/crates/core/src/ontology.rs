//! Class ontology: a rooted DAG of annotation classes.
//!
//! Every loaded ontology gets a virtual root (`ROOT`) as the parent of all
//! top-level classes. The root is not a class: it has no [`ClassIdx`], is
//! never returned from [`Ontology::ancestors`] or [`Ontology::expand`], and
//! cannot be referenced from input files.
//!
//! Two input formats are supported:
//!
//! * TSV, one class per line: `id<TAB>name<TAB>parent1|parent2|...`, with an
//!   optional fourth column `synonym1|synonym2|...`.
//! * A subset of OBO: `[Term]` stanzas with `id`, `name`, `is_a`, `synonym`
//!   and `is_obsolete` tags. Every other tag and stanza type is skipped.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of the virtual root.
pub const ROOT_ID: &str = "ROOT";

/// Opaque class identifier such as `BTO:0000123`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(String);

impl ClassId {
    pub fn new(id: impl Into<String>) -> Self {
        ClassId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        ClassId(s.to_string())
    }
}

/// Dense position of a class in `[0, |C|)`.
///
/// Indices follow the lexicographic order of the class ids, so comparing two
/// indices of the same ontology gives the same answer as comparing the ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassIdx(pub u32);

impl ClassIdx {
    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }
}

/// Outcome of comparing two classes by their place in the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Specificity {
    Equal,
    FirstMoreSpecific,
    SecondMoreSpecific,
    Unrelated,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OntologyError {
    #[error("line {line}: duplicate class id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown parent id {id:?}")]
    UnknownParent { line: usize, id: String },
    #[error("line {line}: cycle detected through class {id:?}")]
    Cycle { line: usize, id: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown class id {0:?}")]
    UnknownClass(String),
}

/// A class as it appears in an input file, before validation.
#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub id: String,
    pub name: String,
    pub parents: Vec<String>,
    pub synonyms: Vec<String>,
    /// 1-based source line used in diagnostics.
    pub line: usize,
}

/// Immutable, validated class DAG.
#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    ids: Vec<ClassId>,
    lookup: HashMap<ClassId, ClassIdx>,
    names: Vec<String>,
    synonyms: Vec<Vec<String>>,
    // Sorted. Empty means the class hangs directly off the virtual root.
    parents: Vec<Vec<ClassIdx>>,
    children: Vec<Vec<ClassIdx>>,
    // Strict ancestors without the root, sorted; memoized at build time.
    ancestors: Vec<Vec<ClassIdx>>,
    obsolete_dropped: usize,
}

impl Ontology {
    /// Validates the nodes and builds the ontology.
    ///
    /// Checks, in order: reserved/empty ids and duplicates, unknown parents,
    /// then cycles. Errors carry the source line of the offending node.
    pub fn from_nodes(nodes: Vec<NodeSpec>) -> Result<Self, OntologyError> {
        let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(nodes.len());
        for (pos, node) in nodes.iter().enumerate() {
            if node.id.is_empty() {
                return Err(OntologyError::Malformed { line: node.line, message: "empty class id".into() });
            }
            if node.id == ROOT_ID {
                return Err(OntologyError::Malformed {
                    line: node.line,
                    message: format!("class id {ROOT_ID:?} is reserved for the virtual root"),
                });
            }
            if by_id.insert(node.id.as_str(), pos).is_some() {
                return Err(OntologyError::DuplicateId { line: node.line, id: node.id.clone() });
            }
        }
        for node in &nodes {
            for parent in &node.parents {
                if !by_id.contains_key(parent.as_str()) {
                    return Err(OntologyError::UnknownParent { line: node.line, id: parent.clone() });
                }
            }
        }
        if let Some(pos) = find_cycle(&nodes, &by_id) {
            return Err(OntologyError::Cycle { line: nodes[pos].line, id: nodes[pos].id.clone() });
        }

        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| nodes[a].id.cmp(&nodes[b].id));
        let mut rank = vec![0u32; nodes.len()];
        for (i, &pos) in order.iter().enumerate() {
            rank[pos] = i as u32;
        }

        let n = nodes.len();
        let mut ids = Vec::with_capacity(n);
        let mut names = Vec::with_capacity(n);
        let mut synonyms = Vec::with_capacity(n);
        let mut parents = Vec::with_capacity(n);
        for &pos in &order {
            let node = &nodes[pos];
            ids.push(ClassId::new(node.id.clone()));
            names.push(node.name.clone());
            synonyms.push(node.synonyms.clone());
            let mut ps: Vec<ClassIdx> = node.parents.iter().map(|p| ClassIdx(rank[by_id[p.as_str()]])).collect();
            ps.sort_unstable();
            ps.dedup();
            parents.push(ps);
        }
        let mut children = vec![Vec::new(); n];
        for (c, ps) in parents.iter().enumerate() {
            for p in ps {
                children[p.get()].push(ClassIdx(c as u32));
            }
        }
        let lookup = ids.iter().enumerate().map(|(i, id)| (id.clone(), ClassIdx(i as u32))).collect();
        let ancestors = ancestor_closure(&parents);

        Ok(Ontology { ids, lookup, names, synonyms, parents, children, ancestors, obsolete_dropped: 0 })
    }

    /// Parses the TSV format. Blank lines are skipped; CRLF is accepted.
    pub fn parse_tsv(text: &str) -> Result<Self, OntologyError> {
        let mut nodes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() < 2 || fields.len() > 4 {
                return Err(OntologyError::Malformed {
                    line,
                    message: format!("expected 2 to 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let split_list = |s: &str| -> Vec<String> {
                s.split('|').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect()
            };
            nodes.push(NodeSpec {
                id: fields[0].trim().to_string(),
                name: fields[1].to_string(),
                parents: fields.get(2).map(|s| split_list(s)).unwrap_or_default(),
                synonyms: fields.get(3).map(|s| split_list(s)).unwrap_or_default(),
                line,
            });
        }
        Self::from_nodes(nodes)
    }

    /// Parses the supported OBO subset. Obsolete terms are dropped and counted.
    pub fn parse_obo(text: &str) -> Result<Self, OntologyError> {
        #[derive(Default)]
        struct Stanza {
            line: usize,
            is_term: bool,
            id: Option<String>,
            name: Option<String>,
            is_a: Vec<(String, usize)>,
            synonyms: Vec<String>,
            obsolete: bool,
        }

        let mut stanzas: Vec<Stanza> = Vec::new();
        let mut current: Option<Stanza> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.strip_suffix('\r').unwrap_or(raw).trim();
            if raw.is_empty() || raw.starts_with('!') {
                continue;
            }
            if raw.starts_with('[') && raw.ends_with(']') {
                if let Some(done) = current.take() {
                    stanzas.push(done);
                }
                current = Some(Stanza { line, is_term: raw == "[Term]", ..Default::default() });
                continue;
            }
            // Header lines and non-Term stanzas carry nothing we use.
            let Some(stanza) = current.as_mut().filter(|s| s.is_term) else { continue };
            let Some((key, value)) = raw.split_once(':') else {
                return Err(OntologyError::Malformed { line, message: format!("expected `tag: value`, got {raw:?}") });
            };
            let value = value.trim();
            match key.trim() {
                "id" => stanza.id = Some(value.to_string()),
                "name" => stanza.name = Some(value.to_string()),
                "is_a" => {
                    let target = value.split(['!', '{']).next().unwrap_or("").trim();
                    let target = target.split_whitespace().next().unwrap_or("");
                    if target.is_empty() {
                        return Err(OntologyError::Malformed { line, message: "is_a without a target id".into() });
                    }
                    stanza.is_a.push((target.to_string(), line));
                }
                "synonym" => stanza.synonyms.push(parse_quoted(value).ok_or_else(|| OntologyError::Malformed {
                    line,
                    message: format!("synonym value is not a quoted string: {value:?}"),
                })?),
                "is_obsolete" => stanza.obsolete = value.eq_ignore_ascii_case("true"),
                _ => {}
            }
        }
        if let Some(done) = current.take() {
            stanzas.push(done);
        }

        let mut obsolete_dropped = 0;
        let mut nodes = Vec::new();
        let mut is_a_lines: HashMap<String, Vec<(String, usize)>> = HashMap::new();
        for stanza in stanzas.into_iter().filter(|s| s.is_term) {
            let id =
                stanza.id.ok_or(OntologyError::Malformed { line: stanza.line, message: "term without id".into() })?;
            let name = stanza.name.ok_or_else(|| OntologyError::Malformed {
                line: stanza.line,
                message: format!("term {id:?} without name"),
            })?;
            if stanza.obsolete {
                obsolete_dropped += 1;
                continue;
            }
            is_a_lines.insert(id.clone(), stanza.is_a.clone());
            nodes.push(NodeSpec {
                id,
                name,
                parents: stanza.is_a.into_iter().map(|(p, _)| p).collect(),
                synonyms: stanza.synonyms,
                line: stanza.line,
            });
        }
        if obsolete_dropped > 0 {
            log::warn!("dropped {obsolete_dropped} obsolete term(s)");
        }

        // Point unknown-parent errors at the is_a line rather than the stanza.
        let known: BTreeSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();
        for node in &nodes {
            for (parent, line) in &is_a_lines[&node.id] {
                if !known.contains(parent.as_str()) {
                    return Err(OntologyError::UnknownParent { line: *line, id: parent.clone() });
                }
            }
        }
        let mut onto = Self::from_nodes(nodes)?;
        onto.obsolete_dropped = obsolete_dropped;
        Ok(onto)
    }

    /// Serializes to the TSV format, one class per line in index order.
    /// The synonym column is written only for classes that have synonyms.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let parents: Vec<&str> = self.parents[i].iter().map(|p| self.ids[p.get()].as_str()).collect();
            out.push_str(self.ids[i].as_str());
            out.push('\t');
            out.push_str(&self.names[i]);
            out.push('\t');
            out.push_str(&parents.join("|"));
            if !self.synonyms[i].is_empty() {
                out.push('\t');
                out.push_str(&self.synonyms[i].join("|"));
            }
            out.push('\n');
        }
        out
    }

    /// Number of classes, not counting the virtual root.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn root_id(&self) -> ClassId {
        ClassId::new(ROOT_ID)
    }

    pub fn obsolete_dropped(&self) -> usize {
        self.obsolete_dropped
    }

    /// Class ids in index order.
    pub fn class_ids(&self) -> &[ClassId] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Result<ClassIdx, OntologyError> {
        self.lookup.get(&ClassId::new(id)).copied().ok_or_else(|| OntologyError::UnknownClass(id.to_string()))
    }

    pub fn id(&self, idx: ClassIdx) -> &ClassId {
        &self.ids[idx.get()]
    }

    pub fn name(&self, idx: ClassIdx) -> &str {
        &self.names[idx.get()]
    }

    pub fn synonyms(&self, idx: ClassIdx) -> &[String] {
        &self.synonyms[idx.get()]
    }

    /// Direct parents; empty for classes attached to the virtual root.
    pub fn parent_indices(&self, idx: ClassIdx) -> &[ClassIdx] {
        &self.parents[idx.get()]
    }

    pub fn children(&self, idx: ClassIdx) -> &[ClassIdx] {
        &self.children[idx.get()]
    }

    pub fn is_leaf(&self, idx: ClassIdx) -> bool {
        self.children[idx.get()].is_empty()
    }

    /// Direct parents by id, with the virtual root reported for top-level classes.
    pub fn parents(&self, id: &str) -> Result<BTreeSet<ClassId>, OntologyError> {
        let idx = self.index_of(id)?;
        let ps = &self.parents[idx.get()];
        if ps.is_empty() {
            return Ok(BTreeSet::from([self.root_id()]));
        }
        Ok(ps.iter().map(|p| self.ids[p.get()].clone()).collect())
    }

    /// Strict ancestors of a class, root excluded, sorted by index.
    #[inline]
    pub fn ancestor_indices(&self, idx: ClassIdx) -> &[ClassIdx] {
        &self.ancestors[idx.get()]
    }

    pub fn ancestors(&self, id: &str) -> Result<BTreeSet<ClassId>, OntologyError> {
        let idx = self.index_of(id)?;
        Ok(self.ancestors[idx.get()].iter().map(|a| self.ids[a.get()].clone()).collect())
    }

    /// `true` if `ancestor` is a strict ancestor of `idx`.
    #[inline]
    pub fn is_ancestor(&self, ancestor: ClassIdx, idx: ClassIdx) -> bool {
        self.ancestors[idx.get()].binary_search(&ancestor).is_ok()
    }

    /// The labels together with all of their ancestors, root excluded.
    pub fn expand_indices<I>(&self, labels: I) -> BTreeSet<ClassIdx>
    where
        I: IntoIterator<Item = ClassIdx>,
    {
        let mut out = BTreeSet::new();
        for c in labels {
            out.insert(c);
            out.extend(self.ancestors[c.get()].iter().copied());
        }
        out
    }

    pub fn expand<'a, I>(&self, labels: I) -> Result<BTreeSet<ClassId>, OntologyError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let idxs = labels.into_iter().map(|l| self.index_of(l)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.expand_indices(idxs).into_iter().map(|c| self.ids[c.get()].clone()).collect())
    }

    pub fn relation_indices(&self, first: ClassIdx, second: ClassIdx) -> Specificity {
        if first == second {
            Specificity::Equal
        } else if self.is_ancestor(second, first) {
            Specificity::FirstMoreSpecific
        } else if self.is_ancestor(first, second) {
            Specificity::SecondMoreSpecific
        } else {
            Specificity::Unrelated
        }
    }

    pub fn specificity_relation(&self, first: &str, second: &str) -> Result<Specificity, OntologyError> {
        Ok(self.relation_indices(self.index_of(first)?, self.index_of(second)?))
    }

    /// Number of edges on the longest path from the virtual root, so
    /// top-level classes have depth 1.
    pub fn depth(&self, idx: ClassIdx) -> usize {
        self.parents[idx.get()].iter().map(|p| self.depth(*p)).max().unwrap_or(0) + 1
    }
}

/// Three-colour DFS over parent edges. Returns the position of a node whose
/// parent edge closes a cycle, visiting start nodes in input order.
fn find_cycle(nodes: &[NodeSpec], by_id: &HashMap<&str, usize>) -> Option<usize> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; nodes.len()];
    for start in 0..nodes.len() {
        if mark[start] != Mark::New {
            continue;
        }
        // Stack of (node, next parent slot).
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Open;
        while let Some(&mut (node, ref mut slot)) = stack.last_mut() {
            if let Some(parent) = nodes[node].parents.get(*slot) {
                *slot += 1;
                let p = by_id[parent.as_str()];
                match mark[p] {
                    Mark::Open => return Some(node),
                    Mark::New => {
                        mark[p] = Mark::Open;
                        stack.push((p, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

fn ancestor_closure(parents: &[Vec<ClassIdx>]) -> Vec<Vec<ClassIdx>> {
    let n = parents.len();
    let mut memo: Vec<Option<Vec<ClassIdx>>> = vec![None; n];
    for start in 0..n {
        let mut stack = vec![start];
        while let Some(&node) = stack.last() {
            if memo[node].is_some() {
                stack.pop();
                continue;
            }
            let pending: Vec<usize> = parents[node].iter().map(|p| p.get()).filter(|&p| memo[p].is_none()).collect();
            if pending.is_empty() {
                let mut acc: Vec<ClassIdx> = Vec::new();
                for p in &parents[node] {
                    acc.push(*p);
                    acc.extend_from_slice(memo[p.get()].as_ref().unwrap());
                }
                acc.sort_unstable();
                acc.dedup();
                memo[node] = Some(acc);
                stack.pop();
            } else {
                stack.extend(pending);
            }
        }
    }
    memo.into_iter().map(Option::unwrap).collect()
}

/// Reads the leading `"..."` of an OBO synonym value, honouring `\"` escapes.
fn parse_quoted(value: &str) -> Option<String> {
    let rest = value.strip_prefix('"')?;
    let mut out = String::new();
    let mut chars = rest.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => out.push(chars.next()?),
            '"' => return Some(out),
            _ => out.push(ch),
        }
    }
    None
}
