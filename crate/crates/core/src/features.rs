//! Comment-level behavioral features.
//!
//! Eight features are computable for any comment in corpus context:
//! noncompliance, swear ratio, hate ratio, delta won, score, inter-comment
//! time, word count, and depth. Lexical features take pluggable lexicons; a
//! small permissive swear list and English stopword list ship as defaults,
//! while a hate lexicon must be supplied by the user.

use crate::corpus::Corpus;
use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown comment id {id:?}")]
    UnknownComment { id: String },
    #[error("feature {kind} requires a {lexicon} lexicon, none configured")]
    MissingLexicon { kind: FeatureKind, lexicon: &'static str },
    #[error("lexicon {name:?}: invalid term {term:?} (must be non-empty lowercase without whitespace)")]
    InvalidTerm { name: String, term: String },
    #[error("failed to read lexicon {name:?}: {source}")]
    Io { name: String, source: std::io::Error },
}

/// Named set of lowercase single-word terms.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub name: String,
    terms: HashSet<String>,
}

impl Lexicon {
    /// Build a lexicon, validating every term: non-empty, lowercase, no
    /// internal whitespace.
    pub fn new(
        name: impl Into<String>,
        terms: impl IntoIterator<Item = String>,
    ) -> Result<Self, FeatureError> {
        let name = name.into();
        let mut set = HashSet::new();
        for term in terms {
            let ok = !term.is_empty()
                && !term.chars().any(char::is_whitespace)
                && term == term.to_lowercase();
            if !ok {
                return Err(FeatureError::InvalidTerm { name, term });
            }
            set.insert(term);
        }
        Ok(Lexicon { name, terms: set })
    }

    /// Read a lexicon file: one term per line, UTF-8; surrounding whitespace
    /// is trimmed and blank lines are skipped.
    pub fn from_reader(name: impl Into<String>, reader: impl BufRead) -> Result<Self, FeatureError> {
        let name = name.into();
        let mut terms = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|source| FeatureError::Io {
                name: name.clone(),
                source,
            })?;
            let term = line.trim();
            if !term.is_empty() {
                terms.push(term.to_string());
            }
        }
        Lexicon::new(name, terms)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, FeatureError> {
        let name = path.display().to_string();
        let f = std::fs::File::open(path).map_err(|source| FeatureError::Io {
            name: name.clone(),
            source,
        })?;
        Lexicon::from_reader(name, std::io::BufReader::new(f))
    }

    /// Built-in permissive profanity list. Replace with a licensed lexicon
    /// for research-grade results.
    pub fn default_swears() -> Lexicon {
        Lexicon::from_reader("builtin-swears", include_str!("../data/swears.txt").as_bytes())
            .expect("builtin swear list is valid")
    }

    /// Built-in common English stopword list.
    pub fn default_stopwords() -> Lexicon {
        Lexicon::from_reader(
            "builtin-stopwords",
            include_str!("../data/stopwords.txt").as_bytes(),
        )
        .expect("builtin stopword list is valid")
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// The eight comment-level features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Noncompliance,
    SwearRatio,
    HateRatio,
    DeltaWon,
    Score,
    InterCommentTime,
    WordCount,
    Depth,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 8] = [
        FeatureKind::Noncompliance,
        FeatureKind::SwearRatio,
        FeatureKind::HateRatio,
        FeatureKind::DeltaWon,
        FeatureKind::Score,
        FeatureKind::InterCommentTime,
        FeatureKind::WordCount,
        FeatureKind::Depth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Noncompliance => "noncompliance",
            FeatureKind::SwearRatio => "swear_ratio",
            FeatureKind::HateRatio => "hate_ratio",
            FeatureKind::DeltaWon => "delta_won",
            FeatureKind::Score => "score",
            FeatureKind::InterCommentTime => "inter_comment_time",
            FeatureKind::WordCount => "word_count",
            FeatureKind::Depth => "depth",
        }
    }

    /// Inter-comment time needs a "next comment" and therefore only makes
    /// sense for the time-series design, not the matched single-slot one.
    pub fn its_only(self) -> bool {
        matches!(self, FeatureKind::InterCommentTime)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error for an unrecognized feature name.
#[derive(Debug, Error)]
#[error("unknown feature {0:?} (expected one of: noncompliance, swear_ratio, hate_ratio, delta_won, score, inter_comment_time, word_count, depth)")]
pub struct UnknownFeature(pub String);

impl FromStr for FeatureKind {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownFeature(s.to_string()))
    }
}

/// A feature observation; `defined = false` marks values that do not exist
/// for this comment (e.g. inter-comment time of an author's last comment).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureValue {
    pub value: f64,
    pub defined: bool,
}

impl FeatureValue {
    pub fn defined(value: f64) -> Self {
        FeatureValue { value, defined: true }
    }

    pub fn undefined() -> Self {
        FeatureValue { value: 0.0, defined: false }
    }
}

/// Lexicon configuration for feature extraction. Missing entries make the
/// corresponding lexical feature a configuration error.
#[derive(Debug, Clone)]
pub struct FeatureConfig {
    pub swear: Option<Lexicon>,
    pub hate: Option<Lexicon>,
    pub stopwords: Option<Lexicon>,
}

impl Default for FeatureConfig {
    /// Built-in swear and stopword lists; no hate lexicon.
    fn default() -> Self {
        FeatureConfig {
            swear: Some(Lexicon::default_swears()),
            hate: None,
            stopwords: Some(Lexicon::default_stopwords()),
        }
    }
}

/// Unicode-lowercased maximal runs of alphanumerics; apostrophes (ASCII or
/// typographic) are kept only between alphanumerics.
pub fn tokenize(body: &str) -> Vec<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (i, &ch) in chars.iter().enumerate() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                cur.push(lc);
            }
        } else if (ch == '\'' || ch == '\u{2019}')
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|c| c.is_alphanumeric())
        {
            cur.push('\'');
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Extract one feature for a comment identified by id.
pub fn extract(
    corpus: &Corpus,
    comment_id: &str,
    kind: FeatureKind,
    config: &FeatureConfig,
) -> Result<FeatureValue, FeatureError> {
    let idx = corpus
        .comment_idx(comment_id)
        .ok_or_else(|| FeatureError::UnknownComment {
            id: comment_id.to_string(),
        })?;
    extract_idx(corpus, idx, kind, config)
}

/// Extract one feature for a comment identified by corpus index.
pub fn extract_idx(
    corpus: &Corpus,
    idx: usize,
    kind: FeatureKind,
    config: &FeatureConfig,
) -> Result<FeatureValue, FeatureError> {
    fn lexicon<'a>(
        lex: &'a Option<Lexicon>,
        kind: FeatureKind,
        which: &'static str,
    ) -> Result<&'a Lexicon, FeatureError> {
        lex.as_ref()
            .ok_or(FeatureError::MissingLexicon { kind, lexicon: which })
    }
    let c = corpus.comment(idx);
    Ok(match kind {
        FeatureKind::Noncompliance => {
            FeatureValue::defined(corpus.removal_of(idx).is_some() as u8 as f64)
        }
        FeatureKind::SwearRatio => token_ratio(&c.body, lexicon(&config.swear, kind, "swear")?),
        FeatureKind::HateRatio => token_ratio(&c.body, lexicon(&config.hate, kind, "hate")?),
        FeatureKind::DeltaWon => FeatureValue::defined(c.delta_from_op as u8 as f64),
        FeatureKind::Score => FeatureValue::defined(c.score as f64),
        FeatureKind::InterCommentTime => {
            match next_comment_gap(corpus, idx) {
                Some(gap) => FeatureValue::defined(gap as f64),
                None => FeatureValue::undefined(),
            }
        }
        FeatureKind::WordCount => {
            let stop = lexicon(&config.stopwords, kind, "stopword")?;
            let n = tokenize(&c.body)
                .iter()
                .filter(|t| !stop.contains(t))
                .count();
            FeatureValue::defined(n as f64)
        }
        FeatureKind::Depth => FeatureValue::defined(corpus.depth_of(idx) as f64),
    })
}

fn token_ratio(body: &str, lexicon: &Lexicon) -> FeatureValue {
    let tokens = tokenize(body);
    if tokens.is_empty() {
        return FeatureValue::undefined();
    }
    let hits = tokens.iter().filter(|t| lexicon.contains(t)).count();
    FeatureValue::defined(hits as f64 / tokens.len() as f64)
}

/// Seconds until the author's next comment anywhere in the community; `None`
/// for the author's last comment (or deleted authors).
fn next_comment_gap(corpus: &Corpus, idx: usize) -> Option<i64> {
    let c = corpus.comment(idx);
    let nodes = corpus.author_nodes(&c.author);
    let pos = nodes.binary_search(&idx).ok()?;
    nodes[pos + 1..]
        .iter()
        .map(|&j| corpus.comment(j))
        .find(|d| !d.is_root())
        .map(|d| d.created_utc - c.created_utc)
}

/// Aggregate statistics of one series index.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IndexStat {
    pub index: i64,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Per-index mean, standard error (sample sd / √n, 0 when n = 1), and count
/// over the defined values; indices with no defined values are omitted.
/// Output is sorted by index.
pub fn index_series(values: &[(i64, FeatureValue)]) -> Vec<IndexStat> {
    let mut grouped: std::collections::BTreeMap<i64, Vec<f64>> = std::collections::BTreeMap::new();
    for (i, v) in values {
        if v.defined {
            grouped.entry(*i).or_default().push(v.value);
        }
    }
    grouped
        .into_iter()
        .map(|(index, vals)| {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let se = if n > 1 {
                let var =
                    vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            IndexStat { index, mean, se, n }
        })
        .collect()
}
