//! Interrupted time-series design: sample selection and segmented regression.
//!
//! For each qualifying removal, the affected user's surrounding activity in
//! *other* trees is laid out on indices −k..−1 (last k comments before the
//! problematic comment) and 1..k (first k comments after the removal). A
//! pooled segmented regression y(i) = β0 + β1·i + β2·x(i) + β3·i·x(i), with
//! x(i) = 1 for post-removal indices, estimates the level (β2) and slope
//! (β3) changes at the removal.

use crate::corpus::{Corpus, AFFECTED_MAX_ORDINAL};
use crate::features::{extract_idx, index_series, FeatureConfig, FeatureError, FeatureKind, IndexStat};
use crate::round::sig10;
use crate::stats::{ols, OlsFit, StatsError};
use serde::Serialize;
use thiserror::Error;

/// Default window half-width: comments per side of the removal.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum ItsError {
    #[error("no instances to fit")]
    NoInstances,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One qualifying removal with its surrounding comment windows.
///
/// `pre` and `post` each hold exactly k comment indices in chronological
/// order; `pre[0]` is series index −k, `pre[k-1]` is −1, `post[0]` is +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItsInstance {
    pub user: String,
    pub removal_idx: usize,
    pub ordinal: u32,
    pub pre: Vec<usize>,
    pub post: Vec<usize>,
}

impl ItsInstance {
    /// (series index, comment index) pairs across both windows.
    pub fn indexed_comments(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        let k = self.pre.len() as i64;
        self.pre
            .iter()
            .enumerate()
            .map(move |(s, &c)| (s as i64 - k, c))
            .chain(
                self.post
                    .iter()
                    .enumerate()
                    .map(|(s, &c)| (s as i64 + 1, c)),
            )
    }
}

/// Select every removal instance that qualifies for the time-series design.
///
/// A removal of ordinal ≤ 2 qualifies when the author (who must be neither
/// the affected tree's OP nor a moderator) has k comments in non-affected
/// trees strictly before the problematic comment, k strictly after the
/// removal, and no comment anywhere in the window (problematic creation,
/// removal] — a comment exactly at the removal instant disqualifies.
/// Instances come back ordered by (removed_utc, comment_id).
pub fn select_its_instances(corpus: &Corpus, k: usize) -> Vec<ItsInstance> {
    assert!(k > 0, "window size must be positive");
    let mut out = Vec::new();
    for ri in 0..corpus.removals().len() {
        if let Some(inst) = qualify(corpus, ri, k) {
            out.push(inst);
        }
    }
    out
}

fn qualify(corpus: &Corpus, ri: usize, k: usize) -> Option<ItsInstance> {
    let ordinal = corpus.ordinal(ri)?;
    if ordinal > AFFECTED_MAX_ORDINAL {
        return None;
    }
    let removal = corpus.removal(ri);
    let prob_idx = corpus.comment_idx(&removal.comment_id)?;
    let prob = corpus.comment(prob_idx);
    let user = &prob.author;
    let tree = corpus.trees().get(&prob.tree_id)?;
    if tree.op_author == *user || corpus.moderators().contains(user) {
        return None;
    }

    let nodes = corpus.author_nodes(user);
    // Any comment in (problematic creation, removed_utc], in any tree,
    // disqualifies.
    let in_window = nodes.iter().any(|&i| {
        let c = corpus.comment(i);
        !c.is_root() && c.created_utc > prob.created_utc && c.created_utc <= removal.removed_utc
    });
    if in_window {
        return None;
    }

    let eligible = |i: usize| {
        let c = corpus.comment(i);
        !c.is_root() && c.tree_id != prob.tree_id
    };
    let pre: Vec<usize> = {
        let mut v: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&i| eligible(i) && corpus.comment(i).created_utc < prob.created_utc)
            .collect();
        if v.len() < k {
            return None;
        }
        v.split_off(v.len() - k)
    };
    let post: Vec<usize> = nodes
        .iter()
        .copied()
        .filter(|&i| eligible(i) && corpus.comment(i).created_utc > removal.removed_utc)
        .take(k)
        .collect();
    if post.len() < k {
        return None;
    }

    Some(ItsInstance {
        user: user.clone(),
        removal_idx: ri,
        ordinal,
        pre,
        post,
    })
}

/// Fitted time-series report for one feature.
#[derive(Debug, Clone)]
pub struct ItsReport {
    pub feature: FeatureKind,
    pub n_instances: usize,
    pub fit: OlsFit,
    pub series: Vec<IndexStat>,
}

/// Pool all instance windows into one segmented regression.
///
/// Each comment with a defined feature value contributes one row; undefined
/// values (e.g. inter-comment time of a user's last comment) are dropped
/// row-wise.
pub fn fit_its(
    corpus: &Corpus,
    instances: &[ItsInstance],
    feature: FeatureKind,
    config: &FeatureConfig,
) -> Result<ItsReport, ItsError> {
    if instances.is_empty() {
        return Err(ItsError::NoInstances);
    }
    let mut design = Vec::new();
    let mut y = Vec::new();
    let mut series_values = Vec::new();
    for inst in instances {
        for (i, ci) in inst.indexed_comments() {
            let v = extract_idx(corpus, ci, feature, config)?;
            series_values.push((i, v));
            if v.defined {
                let x = if i > 0 { 1.0 } else { 0.0 };
                design.push([1.0, i as f64, x, i as f64 * x]);
                y.push(v.value);
            }
        }
    }
    let fit = ols(&design, &y)?;
    Ok(ItsReport {
        feature,
        n_instances: instances.len(),
        fit,
        series: index_series(&series_values),
    })
}

/// JSON mirror of [`ItsReport`] with values rounded for byte-stable output.
#[derive(Debug, Serialize)]
struct ItsReportJson<'a> {
    feature: &'a str,
    n_instances: usize,
    beta: [f64; 4],
    se: [f64; 4],
    t: [f64; 4],
    p: [f64; 4],
    series: Vec<IndexStatJson>,
}

#[derive(Debug, Serialize)]
struct IndexStatJson {
    index: i64,
    mean: f64,
    se: f64,
    n: usize,
}

fn round4(a: &[f64; 4]) -> [f64; 4] {
    [sig10(a[0]), sig10(a[1]), sig10(a[2]), sig10(a[3])]
}

fn series_json(series: &[IndexStat]) -> Vec<IndexStatJson> {
    series
        .iter()
        .map(|s| IndexStatJson {
            index: s.index,
            mean: sig10(s.mean),
            se: sig10(s.se),
            n: s.n,
        })
        .collect()
}

impl ItsReport {
    pub fn to_json(&self) -> String {
        let mirror = ItsReportJson {
            feature: self.feature.as_str(),
            n_instances: self.n_instances,
            beta: round4(&self.fit.beta),
            se: round4(&self.fit.se),
            t: round4(&self.fit.t),
            p: round4(&self.fit.p),
            series: series_json(&self.series),
        };
        serde_json::to_string_pretty(&mirror).expect("report serializes")
    }

    pub fn write_series_csv(&self, w: impl std::io::Write) -> std::io::Result<()> {
        write_series_csv(&self.series, w)
    }
}

/// Series table as CSV with header `index,mean,se,n`.
pub fn write_series_csv(series: &[IndexStat], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "index,mean,se,n")?;
    for s in series {
        writeln!(w, "{},{},{},{}", s.index, sig10(s.mean), sig10(s.se), s.n)?;
    }
    Ok(())
}
