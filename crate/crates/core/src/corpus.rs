//! Comment-tree corpus: parsing, tree structure, timelines, removal joins.
//!
//! A corpus is built from two JSONL streams (comments, removal log) and is
//! immutable afterwards. All derived state — depths, per-author timelines,
//! removal ordinals — is computed during construction, so readers can share
//! the corpus freely across threads.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use thiserror::Error;

/// Author placeholder used by dumps when an account was deleted. Identity is
/// gone, so no per-user state is built for it.
pub const DELETED_AUTHOR: &str = "[deleted]";

/// One node of a discussion tree. `parent_id` absent ⇔ root post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub tree_id: String,
    pub parent_id: Option<String>,
    pub author: String,
    pub created_utc: i64,
    pub body: String,
    pub score: i64,
    pub delta_from_op: bool,
}

impl Comment {
    pub fn is_root(&self) -> bool {
        self.parent_id.is_none()
    }
}

/// One moderator action from the removal log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalRecord {
    pub comment_id: String,
    pub removed_utc: i64,
    pub moderator: String,
    pub rule: String,
    pub description: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file} line {line}: {source}")]
    Parse {
        file: &'static str,
        line: usize,
        source: serde_json::Error,
    },
    #[error("failed to read {file}: {source}")]
    Io {
        file: &'static str,
        source: std::io::Error,
    },
    #[error("duplicate comment id {id:?}")]
    DuplicateCommentId { id: String },
    #[error("cycle in parent links involving comment {id:?}")]
    ParentCycle { id: String },
    #[error("comment {id:?} references missing parent {parent_id:?}")]
    MissingParent { id: String, parent_id: String },
    #[error("comment {id:?} references parent {parent_id:?} outside its tree")]
    CrossTreeParent { id: String, parent_id: String },
    #[error("comment {id:?} is older than its parent")]
    CreatedBeforeParent { id: String },
    #[error("root {id:?} has delta_from_op set")]
    DeltaOnRoot { id: String },
    #[error("tree {tree_id:?} has {n_roots} roots; expected exactly 1")]
    RootCount { tree_id: String, n_roots: usize },
    #[error("duplicate removal record for comment {comment_id:?}")]
    DuplicateRemoval { comment_id: String },
    #[error("removal of {comment_id:?} precedes its creation (negative delay)")]
    NegativeDelay { comment_id: String },
    #[error("unknown comment id {id:?}")]
    UnknownComment { id: String },
}

/// One discussion tree: root index, its author (the OP), and all node
/// indices in canonical (created_utc, id) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeInfo {
    pub root: usize,
    pub op_author: String,
    pub comments: Vec<usize>,
}

/// Scope filter for [`Corpus::user_timeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimelineScope<'a> {
    All,
    WithinTree(&'a str),
    ExcludingTree(&'a str),
}

/// Immutable parsed corpus with all derived lookups precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    comments: Vec<Comment>,
    index: HashMap<String, usize>,
    depths: Vec<u32>,
    trees: BTreeMap<String, TreeInfo>,
    removals: Vec<RemovalRecord>,
    removal_of: Vec<Option<usize>>,
    /// Per removal: 1-based rank among the author's removals of non-root
    /// comments, ordered by (removed_utc, comment_id). `None` for removals
    /// of roots or of `[deleted]` authors.
    ordinals: Vec<Option<u32>>,
    moderators: BTreeSet<String>,
    /// All node indices (roots included) per author, canonical order.
    authors: BTreeMap<String, Vec<usize>>,
    /// Removal indices per author in ordinal order.
    author_removals: BTreeMap<String, Vec<usize>>,
    orphan_removals: Vec<RemovalRecord>,
}

/// Highest removal ordinal that counts as "affected" in all analyses.
pub const AFFECTED_MAX_ORDINAL: u32 = 2;

fn read_jsonl<T: for<'de> Deserialize<'de>>(
    reader: impl BufRead,
    file: &'static str,
) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { file, source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
            file,
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Parse the two JSONL streams into a validated corpus.
///
/// Orphan removals (comment_id not present in the comment stream) are kept
/// as diagnostics rather than rejected; every structural invariant violation
/// is an error.
pub fn parse_corpus(
    comments_stream: impl BufRead,
    removals_stream: impl BufRead,
) -> Result<Corpus, CorpusError> {
    let comments: Vec<Comment> = read_jsonl(comments_stream, "comments")?;
    let removals: Vec<RemovalRecord> = read_jsonl(removals_stream, "removals")?;
    Corpus::build(comments, removals)
}

/// Parse a corpus from files on disk.
pub fn parse_corpus_from_paths(
    comments_path: &std::path::Path,
    removals_path: &std::path::Path,
) -> Result<Corpus, CorpusError> {
    let c = std::fs::File::open(comments_path).map_err(|source| CorpusError::Io {
        file: "comments",
        source,
    })?;
    let r = std::fs::File::open(removals_path).map_err(|source| CorpusError::Io {
        file: "removals",
        source,
    })?;
    parse_corpus(std::io::BufReader::new(c), std::io::BufReader::new(r))
}

impl Corpus {
    /// Assemble and validate a corpus from already-deserialized records.
    /// Input order is irrelevant: everything is put in canonical order.
    pub fn build(
        mut comments: Vec<Comment>,
        removal_records: Vec<RemovalRecord>,
    ) -> Result<Self, CorpusError> {
        comments.sort_by(|a, b| (a.created_utc, &a.id).cmp(&(b.created_utc, &b.id)));

        let mut index = HashMap::with_capacity(comments.len());
        for (i, c) in comments.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateCommentId { id: c.id.clone() });
            }
        }

        // Per-tree root discovery and structural checks.
        let mut root_of_tree: HashMap<&str, usize> = HashMap::new();
        let mut root_counts: HashMap<&str, usize> = HashMap::new();
        for (i, c) in comments.iter().enumerate() {
            if c.is_root() {
                *root_counts.entry(&c.tree_id).or_insert(0) += 1;
                root_of_tree.entry(&c.tree_id).or_insert(i);
                if c.delta_from_op {
                    return Err(CorpusError::DeltaOnRoot { id: c.id.clone() });
                }
            }
        }
        for c in &comments {
            let n_roots = root_counts.get(c.tree_id.as_str()).copied().unwrap_or(0);
            if n_roots != 1 {
                return Err(CorpusError::RootCount {
                    tree_id: c.tree_id.clone(),
                    n_roots,
                });
            }
        }

        // Parent resolution.
        let mut parent_idx: Vec<Option<usize>> = Vec::with_capacity(comments.len());
        for c in &comments {
            match &c.parent_id {
                None => parent_idx.push(None),
                Some(pid) => {
                    let &p = index.get(pid).ok_or_else(|| CorpusError::MissingParent {
                        id: c.id.clone(),
                        parent_id: pid.clone(),
                    })?;
                    if comments[p].tree_id != c.tree_id {
                        return Err(CorpusError::CrossTreeParent {
                            id: c.id.clone(),
                            parent_id: pid.clone(),
                        });
                    }
                    if c.created_utc < comments[p].created_utc {
                        return Err(CorpusError::CreatedBeforeParent { id: c.id.clone() });
                    }
                    parent_idx.push(Some(p));
                }
            }
        }

        // Depths with cycle detection: 0 = unvisited, 1 = on current path,
        // 2 = done.
        let mut depths = vec![0u32; comments.len()];
        let mut state = vec![0u8; comments.len()];
        let mut stack = Vec::new();
        for start in 0..comments.len() {
            if state[start] == 2 {
                continue;
            }
            stack.clear();
            let mut cur = start;
            let base = loop {
                match parent_idx[cur] {
                    None => {
                        state[cur] = 2;
                        break 0u32;
                    }
                    Some(p) => {
                        if state[cur] == 1 {
                            return Err(CorpusError::ParentCycle {
                                id: comments[cur].id.clone(),
                            });
                        }
                        if state[cur] == 2 {
                            break depths[cur];
                        }
                        state[cur] = 1;
                        stack.push(cur);
                        cur = p;
                    }
                }
            };
            let mut d = base;
            while let Some(node) = stack.pop() {
                d += 1;
                depths[node] = d;
                state[node] = 2;
            }
        }

        let mut trees: BTreeMap<String, TreeInfo> = BTreeMap::new();
        for (i, c) in comments.iter().enumerate() {
            let entry = trees.entry(c.tree_id.clone()).or_insert_with(|| {
                let root = root_of_tree[c.tree_id.as_str()];
                TreeInfo {
                    root,
                    op_author: comments[root].author.clone(),
                    comments: Vec::new(),
                }
            });
            entry.comments.push(i);
        }

        // Join removals to comments; unknown targets become diagnostics.
        let mut seen_removal: HashMap<&str, ()> = HashMap::new();
        for r in &removal_records {
            if seen_removal.insert(&r.comment_id, ()).is_some() {
                return Err(CorpusError::DuplicateRemoval {
                    comment_id: r.comment_id.clone(),
                });
            }
        }
        let mut joined = Vec::new();
        let mut orphans = Vec::new();
        for r in removal_records {
            match index.get(&r.comment_id) {
                Some(&ci) => {
                    if r.removed_utc < comments[ci].created_utc {
                        return Err(CorpusError::NegativeDelay {
                            comment_id: r.comment_id,
                        });
                    }
                    joined.push(r);
                }
                None => orphans.push(r),
            }
        }
        let canon_removal =
            |a: &RemovalRecord, b: &RemovalRecord| (a.removed_utc, &a.comment_id).cmp(&(b.removed_utc, &b.comment_id));
        joined.sort_by(canon_removal);
        orphans.sort_by(canon_removal);

        let mut removal_of = vec![None; comments.len()];
        for (ri, r) in joined.iter().enumerate() {
            removal_of[index[&r.comment_id]] = Some(ri);
        }

        let mut moderators = BTreeSet::new();
        for r in joined.iter().chain(&orphans) {
            moderators.insert(r.moderator.clone());
        }

        let mut authors: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, c) in comments.iter().enumerate() {
            if c.author != DELETED_AUTHOR {
                authors.entry(c.author.clone()).or_default().push(i);
            }
        }

        // Removal ordinals: rank each author's removals of non-root comments
        // by (removed_utc, comment_id).
        let mut ordinals = vec![None; joined.len()];
        let mut author_removals: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut per_author: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (ri, r) in joined.iter().enumerate() {
            let c = &comments[index[&r.comment_id]];
            if !c.is_root() && c.author != DELETED_AUTHOR {
                per_author.entry(&c.author).or_default().push(ri);
            }
        }
        for (author, ris) in per_author {
            // `joined` is already in (removed_utc, comment_id) order, so the
            // collected indices are too.
            for (rank, &ri) in ris.iter().enumerate() {
                ordinals[ri] = Some(rank as u32 + 1);
            }
            author_removals.insert(author.to_string(), ris);
        }

        Ok(Corpus {
            comments,
            index,
            depths,
            trees,
            removals: joined,
            removal_of,
            ordinals,
            moderators,
            authors,
            author_removals,
            orphan_removals: orphans,
        })
    }

    /// All comments in canonical (created_utc, id) order, roots included.
    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn comment(&self, idx: usize) -> &Comment {
        &self.comments[idx]
    }

    pub fn comment_idx(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Joined removals in canonical (removed_utc, comment_id) order.
    pub fn removals(&self) -> &[RemovalRecord] {
        &self.removals
    }

    pub fn removal(&self, ri: usize) -> &RemovalRecord {
        &self.removals[ri]
    }

    /// Removal joined to a comment, if any.
    pub fn removal_of(&self, comment_idx: usize) -> Option<usize> {
        self.removal_of[comment_idx]
    }

    /// 1-based rank of this removal among the author's removals; `None` for
    /// roots and `[deleted]` authors.
    pub fn ordinal(&self, removal_idx: usize) -> Option<u32> {
        self.ordinals[removal_idx]
    }

    /// Removal delay in seconds: removed_utc − created_utc.
    pub fn delay(&self, removal_idx: usize) -> i64 {
        let r = &self.removals[removal_idx];
        r.removed_utc - self.comments[self.index[&r.comment_id]].created_utc
    }

    pub fn moderators(&self) -> &BTreeSet<String> {
        &self.moderators
    }

    pub fn trees(&self) -> &BTreeMap<String, TreeInfo> {
        &self.trees
    }

    pub fn orphan_removals(&self) -> &[RemovalRecord] {
        &self.orphan_removals
    }

    /// All node indices authored by `author` (roots included), canonical
    /// order. Empty for unknown or deleted authors.
    pub fn author_nodes(&self, author: &str) -> &[usize] {
        self.authors.get(author).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Authors with at least one node, in lexicographic order.
    pub fn authors(&self) -> impl Iterator<Item = &str> {
        self.authors.keys().map(String::as_str)
    }

    /// Removal indices for `author` in ordinal order.
    pub fn author_removal_indices(&self, author: &str) -> &[usize] {
        self.author_removals
            .get(author)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Depth of the node: root → 0, otherwise 1 + depth(parent).
    pub fn depth_of(&self, idx: usize) -> u32 {
        self.depths[idx]
    }

    /// Depth by comment id; unknown ids are a lookup error.
    pub fn depth(&self, id: &str) -> Result<u32, CorpusError> {
        self.index
            .get(id)
            .map(|&i| self.depths[i])
            .ok_or_else(|| CorpusError::UnknownComment { id: id.to_string() })
    }

    /// The author's comments in scope, sorted by (created_utc, id). Root
    /// posts are excluded; see [`Corpus::user_timeline_opts`] to include
    /// them.
    pub fn user_timeline(&self, author: &str, scope: TimelineScope<'_>) -> Vec<&Comment> {
        self.user_timeline_opts(author, scope, false)
    }

    pub fn user_timeline_opts(
        &self,
        author: &str,
        scope: TimelineScope<'_>,
        include_roots: bool,
    ) -> Vec<&Comment> {
        self.author_nodes(author)
            .iter()
            .map(|&i| &self.comments[i])
            .filter(|c| include_roots || !c.is_root())
            .filter(|c| match scope {
                TimelineScope::All => true,
                TimelineScope::WithinTree(t) => c.tree_id == t,
                TimelineScope::ExcludingTree(t) => c.tree_id != t,
            })
            .collect()
    }

    /// Table-style corpus summary used by ingest checks and logging.
    pub fn summary(&self) -> CorpusSummary {
        let n_comments = self.comments.iter().filter(|c| !c.is_root()).count();
        let mut affected_users = BTreeSet::new();
        let mut affected_trees = BTreeSet::new();
        for (ri, r) in self.removals.iter().enumerate() {
            if matches!(self.ordinals[ri], Some(o) if o <= AFFECTED_MAX_ORDINAL) {
                let c = &self.comments[self.index[&r.comment_id]];
                affected_users.insert(c.author.as_str());
                affected_trees.insert(c.tree_id.as_str());
            }
        }
        CorpusSummary {
            n_trees: self.trees.len(),
            n_comments,
            n_removals: self.removals.len(),
            n_orphan_removals: self.orphan_removals.len(),
            n_moderators: self.moderators.len(),
            n_affected_users: affected_users.len(),
            n_affected_trees: affected_trees.len(),
        }
    }

    /// After each comment, where (if anywhere) does its author post next?
    /// Cohorts: comments that were the author's 1st/2nd removal vs all other
    /// comments. Root posts and deleted authors are excluded.
    pub fn return_profile(&self) -> ReturnProfile {
        let mut affected = DestinationCounts::default();
        let mut other = DestinationCounts::default();
        for nodes in self.authors.values() {
            // Walk each author's nodes backwards, tracking how many comments
            // come later overall and later within each tree.
            let mut later_total = 0usize;
            let mut later_by_tree: HashMap<&str, usize> = HashMap::new();
            for &i in nodes.iter().rev() {
                let c = &self.comments[i];
                if c.is_root() {
                    continue;
                }
                let later_same = later_by_tree.get(c.tree_id.as_str()).copied().unwrap_or(0);
                let cohort_affected = self
                    .removal_of[i]
                    .and_then(|ri| self.ordinals[ri])
                    .is_some_and(|o| o <= AFFECTED_MAX_ORDINAL);
                let bucket = if cohort_affected { &mut affected } else { &mut other };
                bucket.n += 1;
                if later_same > 0 {
                    bucket.same_tree += 1;
                }
                if later_total - later_same > 0 {
                    bucket.different_tree += 1;
                }
                if later_total > 0 {
                    bucket.community += 1;
                } else {
                    bucket.nowhere += 1;
                }
                later_total += 1;
                *later_by_tree.entry(c.tree_id.as_str()).or_insert(0) += 1;
            }
        }
        ReturnProfile {
            affected: affected.into_row(),
            other: other.into_row(),
        }
    }

    /// Comments in canonical order as JSONL.
    pub fn write_comments_jsonl(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        for c in &self.comments {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Joined removals in canonical order, then orphans, as JSONL.
    pub fn write_removals_jsonl(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        for r in self.removals.iter().chain(&self.orphan_removals) {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Headline dataset counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub n_trees: usize,
    /// Non-root nodes only.
    pub n_comments: usize,
    pub n_removals: usize,
    pub n_orphan_removals: usize,
    pub n_moderators: usize,
    /// Authors with at least one removal of ordinal ≤ 2.
    pub n_affected_users: usize,
    /// Trees containing at least one removal of ordinal ≤ 2.
    pub n_affected_trees: usize,
}

#[derive(Default)]
struct DestinationCounts {
    n: usize,
    same_tree: usize,
    different_tree: usize,
    community: usize,
    nowhere: usize,
}

impl DestinationCounts {
    fn into_row(self) -> ReturnRow {
        let cell = |k: usize| {
            let n = self.n;
            if n == 0 {
                return ReturnCell {
                    fraction: 0.0,
                    se: 0.0,
                    n,
                };
            }
            let p = k as f64 / n as f64;
            ReturnCell {
                fraction: p,
                se: (p * (1.0 - p) / n as f64).sqrt(),
                n,
            }
        };
        ReturnRow {
            same_tree: cell(self.same_tree),
            different_tree: cell(self.different_tree),
            community: cell(self.community),
            nowhere: cell(self.nowhere),
        }
    }
}

/// Fraction of a cohort reaching one destination, with its binomial SE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnCell {
    pub fraction: f64,
    pub se: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnRow {
    pub same_tree: ReturnCell,
    pub different_tree: ReturnCell,
    pub community: ReturnCell,
    pub nowhere: ReturnCell,
}

/// Post-comment destination fractions split by cohort.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnProfile {
    pub affected: ReturnRow,
    pub other: ReturnRow,
}
