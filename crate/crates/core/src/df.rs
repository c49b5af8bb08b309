//! Delayed-feedback matched design.
//!
//! Slow moderation creates a window between a problematic comment and its
//! removal during which the author is still unaware of the coming sanction.
//! Each treatment instance (a removal whose author commented during that
//! window and again within a week after removal) is matched to a control: a
//! removal with the smallest strictly larger delay, evaluated at the
//! *pseudo-removal* time — the control's problematic comment plus the
//! treatment's delay. At that instant the control author is comparably
//! "guilty but untreated", so slot differences identify the causal effect
//! of experiencing the removal.
//!
//! Slots: the treatment's last pre-removal-window comment (`c₋₁`) and first
//! post-removal comment (`c₊₁`); the control's analogues (`c'₋₁`, `c'₊₁`)
//! around the pseudo-removal, with `c'₊₁` strictly before the control's real
//! removal. All slot windows are open intervals: a comment exactly at a
//! boundary instant fills no slot.

use crate::corpus::{Corpus, AFFECTED_MAX_ORDINAL};
use crate::features::{extract_idx, FeatureConfig, FeatureError, FeatureKind};
use crate::round::sig10;
use crate::stats::{t_test_one_sample, t_test_paired, t_test_welch, StatsError};
use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// One week in seconds: the treatment post-removal slot horizon.
pub const WEEK_SECONDS: i64 = 604_800;

/// Tree scope of an analysis: activity outside the affected tree or inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    NonAffected,
    Affected,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::NonAffected => "non_affected",
            Scenario::Affected => "affected",
        }
    }

    fn admits(self, tree_id: &str, affected_tree: &str) -> bool {
        match self {
            Scenario::NonAffected => tree_id != affected_tree,
            Scenario::Affected => tree_id == affected_tree,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown scenario {0:?} (expected non_affected or affected)")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non_affected" => Ok(Scenario::NonAffected),
            "affected" => Ok(Scenario::Affected),
            other => Err(UnknownScenario(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum DfError {
    #[error("feature {0} is not supported by the matched design")]
    UnsupportedFeature(FeatureKind),
    #[error("need at least 2 usable pairs, got {0}")]
    TooFewPairs(usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// A treatment instance: a qualifying removal with its two slot comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfInstance {
    pub user: String,
    pub removal_idx: usize,
    pub ordinal: u32,
    /// Removal delay in seconds: removed_utc − problematic created_utc.
    pub t_d: i64,
    /// Last scope-qualifying comment strictly inside (problematic creation,
    /// removal).
    pub c_minus1: usize,
    /// First scope-qualifying comment strictly after removal, at most one
    /// week later (boundary included).
    pub c_plus1: usize,
    pub scenario: Scenario,
}

/// A matched treatment/control pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedPair {
    pub treatment: DfInstance,
    pub control_removal_idx: usize,
    pub control_user: String,
    /// The control's real delay t'_D (strictly greater than treatment t_D).
    pub control_t_d: i64,
    /// Control problematic created_utc + treatment t_D.
    pub pseudo_removal_utc: i64,
    pub control_c_minus1: usize,
    pub control_c_plus1: usize,
}

impl MatchedPair {
    pub fn delay_gap(&self) -> i64 {
        self.control_t_d - self.treatment.t_d
    }
}

/// Matching output: emitted pairs plus the count of treatments no control
/// could be found for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub scenario: Scenario,
    pub pairs: Vec<MatchedPair>,
    pub n_discarded_unmatched: usize,
}

/// Matching variants; the default mirrors the primary design.
#[derive(Debug, Clone, Copy, Default)]
pub struct MatchConfig {
    /// Remove every treatment-listed removal from the control pool, so no
    /// removal plays both roles across the output.
    pub disjoint_roles: bool,
    /// Accept any scope-qualifying control comment before the pseudo-removal
    /// as c'₋₁, instead of requiring it inside the control's own
    /// pre-removal window.
    pub loose_control_pre: bool,
}

/// Last scope-qualifying comment by `author` with created_utc in the open
/// interval (lo, hi); `lo = None` drops the lower bound.
fn last_in_window(
    corpus: &Corpus,
    author: &str,
    lo: Option<i64>,
    hi: i64,
    scenario: Scenario,
    affected_tree: &str,
) -> Option<usize> {
    let nodes = corpus.author_nodes(author);
    let end = nodes.partition_point(|&i| corpus.comment(i).created_utc < hi);
    for &i in nodes[..end].iter().rev() {
        let c = corpus.comment(i);
        if let Some(lo) = lo {
            if c.created_utc <= lo {
                break;
            }
        }
        if !c.is_root() && scenario.admits(&c.tree_id, affected_tree) {
            return Some(i);
        }
    }
    None
}

/// First scope-qualifying comment by `author` with created_utc strictly
/// after `lo` and below the bound (inclusive when `hi_closed`).
fn first_in_window(
    corpus: &Corpus,
    author: &str,
    lo: i64,
    hi: i64,
    hi_closed: bool,
    scenario: Scenario,
    affected_tree: &str,
) -> Option<usize> {
    let nodes = corpus.author_nodes(author);
    let start = nodes.partition_point(|&i| corpus.comment(i).created_utc <= lo);
    for &i in &nodes[start..] {
        let c = corpus.comment(i);
        let in_bound = if hi_closed {
            c.created_utc <= hi
        } else {
            c.created_utc < hi
        };
        if !in_bound {
            break;
        }
        if !c.is_root() && scenario.admits(&c.tree_id, affected_tree) {
            return Some(i);
        }
    }
    None
}

/// All removals of ordinal ≤ 2 whose author commented both during the
/// pre-removal window and within one week after removal, in the scenario's
/// tree scope. Ordered by (removed_utc, comment_id).
pub fn select_treatments(corpus: &Corpus, scenario: Scenario) -> Vec<DfInstance> {
    let mut out = Vec::new();
    for ri in 0..corpus.removals().len() {
        let Some(ordinal) = corpus.ordinal(ri) else { continue };
        if ordinal > AFFECTED_MAX_ORDINAL {
            continue;
        }
        let removal = corpus.removal(ri);
        let prob_idx = corpus.comment_idx(&removal.comment_id).expect("joined removal");
        let prob = corpus.comment(prob_idx);
        let Some(c_minus1) = last_in_window(
            corpus,
            &prob.author,
            Some(prob.created_utc),
            removal.removed_utc,
            scenario,
            &prob.tree_id,
        ) else {
            continue;
        };
        let Some(c_plus1) = first_in_window(
            corpus,
            &prob.author,
            removal.removed_utc,
            removal.removed_utc + WEEK_SECONDS,
            true,
            scenario,
            &prob.tree_id,
        ) else {
            continue;
        };
        out.push(DfInstance {
            user: prob.author.clone(),
            removal_idx: ri,
            ordinal,
            t_d: removal.removed_utc - prob.created_utc,
            c_minus1,
            c_plus1,
            scenario,
        });
    }
    out
}

/// Control slot lookup for candidate removal `ri` under a treatment delay.
fn control_windows(
    corpus: &Corpus,
    ri: usize,
    treatment_t_d: i64,
    scenario: Scenario,
    config: &MatchConfig,
) -> Option<(i64, usize, usize)> {
    let removal = corpus.removal(ri);
    let prob_idx = corpus.comment_idx(&removal.comment_id)?;
    let prob = corpus.comment(prob_idx);
    let pseudo = prob.created_utc + treatment_t_d;
    let lo = if config.loose_control_pre {
        None
    } else {
        Some(prob.created_utc)
    };
    let c_minus1 = last_in_window(corpus, &prob.author, lo, pseudo, scenario, &prob.tree_id)?;
    let c_plus1 = first_in_window(
        corpus,
        &prob.author,
        pseudo,
        removal.removed_utc,
        false,
        scenario,
        &prob.tree_id,
    )?;
    Some((pseudo, c_minus1, c_plus1))
}

/// Match treatments to controls drawn from all ordinal ≤ 2 removals.
///
/// Greedy pass in ascending (t_D, removal comment id): each treatment takes
/// the unused candidate with the smallest delay strictly greater than its
/// own whose pseudo-removal windows are non-empty. Every removal is used as
/// a control at most once and never matched with itself; treatments with no
/// feasible control are discarded and counted.
pub fn match_controls(
    corpus: &Corpus,
    treatments: &[DfInstance],
    scenario: Scenario,
    config: &MatchConfig,
) -> MatchResult {
    // Candidate pool in ascending (t'_D, comment_id).
    let mut pool: Vec<(i64, usize)> = (0..corpus.removals().len())
        .filter(|&ri| matches!(corpus.ordinal(ri), Some(o) if o <= AFFECTED_MAX_ORDINAL))
        .map(|ri| (corpus.delay(ri), ri))
        .collect();
    pool.sort_by(|a, b| {
        (a.0, &corpus.removal(a.1).comment_id).cmp(&(b.0, &corpus.removal(b.1).comment_id))
    });

    let mut excluded = vec![false; corpus.removals().len()];
    if config.disjoint_roles {
        for t in treatments {
            excluded[t.removal_idx] = true;
        }
    }

    let mut order: Vec<&DfInstance> = treatments.iter().collect();
    order.sort_by(|a, b| {
        (a.t_d, &corpus.removal(a.removal_idx).comment_id)
            .cmp(&(b.t_d, &corpus.removal(b.removal_idx).comment_id))
    });

    let mut used = vec![false; corpus.removals().len()];
    let mut pairs = Vec::new();
    let mut n_discarded = 0usize;
    for t in order {
        let start = pool.partition_point(|&(d, _)| d <= t.t_d);
        let found = pool[start..].iter().find_map(|&(t_d_ctrl, ri)| {
            if used[ri] || excluded[ri] || ri == t.removal_idx {
                return None;
            }
            control_windows(corpus, ri, t.t_d, scenario, config)
                .map(|(pseudo, cm1, cp1)| (t_d_ctrl, ri, pseudo, cm1, cp1))
        });
        match found {
            Some((control_t_d, ri, pseudo_removal_utc, cm1, cp1)) => {
                used[ri] = true;
                pairs.push(MatchedPair {
                    treatment: t.clone(),
                    control_removal_idx: ri,
                    control_user: corpus
                        .comment(corpus.comment_idx(&corpus.removal(ri).comment_id).unwrap())
                        .author
                        .clone(),
                    control_t_d,
                    pseudo_removal_utc,
                    control_c_minus1: cm1,
                    control_c_plus1: cp1,
                });
            }
            None => n_discarded += 1,
        }
    }
    // Emit pairs in treatment removal order for stable downstream output.
    pairs.sort_by(|a, b| a.treatment.removal_idx.cmp(&b.treatment.removal_idx));
    MatchResult {
        scenario,
        pairs,
        n_discarded_unmatched: n_discarded,
    }
}

/// An estimate with its two-sided p-value; `p = None` marks the degenerate
/// zero-variance case ("no effect, zero variance").
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectTest {
    pub est: f64,
    pub p: Option<f64>,
}

/// Mean/SE/count of one slot across usable pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotStat {
    pub slot: &'static str,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Full matched-design test battery for one feature.
#[derive(Debug, Clone)]
pub struct DfResult {
    pub feature: FeatureKind,
    pub scenario: Scenario,
    /// Pairs with all four slot values defined (the tested sample).
    pub n_pairs: usize,
    pub n_discarded_unmatched: usize,
    /// Matched pairs dropped because a slot value was undefined.
    pub n_dropped_undefined: usize,
    /// Mean within-treatment change c₁ − c₋₁ with paired-t p.
    pub treatment_change: EffectTest,
    /// Mean within-control change c'₁ − c'₋₁ with paired-t p.
    pub control_change: EffectTest,
    /// Welch test p for c₋₁ vs c'₋₁ (pre-treatment balance).
    pub balance_p: Option<f64>,
    /// Difference in differences: mean (c₁−c₋₁) − (c'₁−c'₋₁), one-sample t.
    pub did: EffectTest,
    pub slots: [SlotStat; 4],
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn slot_stat(slot: &'static str, xs: &[f64]) -> SlotStat {
    let n = xs.len();
    let m = mean(xs);
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    SlotStat { slot, mean: m, se, n }
}

/// Map a degenerate zero-variance test to `p = None`, everything else to its
/// p-value; other statistical errors are unreachable for n ≥ 2 inputs.
fn effect(est: f64, test: Result<crate::stats::TTestResult, StatsError>) -> EffectTest {
    match test {
        Ok(t) => EffectTest { est, p: Some(t.p_two_sided) },
        Err(StatsError::ZeroVariance) => EffectTest { est, p: None },
        Err(e) => unreachable!("unexpected test failure: {e}"),
    }
}

/// Run the change, balance, and difference-in-differences tests over matched
/// pairs. Pairs with any undefined slot value are dropped (and counted);
/// inter-comment time has no single-slot analogue and is rejected.
pub fn df_test(
    corpus: &Corpus,
    matches: &MatchResult,
    feature: FeatureKind,
    config: &FeatureConfig,
) -> Result<DfResult, DfError> {
    if feature.its_only() {
        return Err(DfError::UnsupportedFeature(feature));
    }
    let mut cm1 = Vec::new();
    let mut cp1 = Vec::new();
    let mut ctrl_m1 = Vec::new();
    let mut ctrl_p1 = Vec::new();
    let mut n_dropped = 0usize;
    for pair in &matches.pairs {
        let slots = [
            pair.treatment.c_minus1,
            pair.treatment.c_plus1,
            pair.control_c_minus1,
            pair.control_c_plus1,
        ];
        let mut values = [0.0f64; 4];
        let mut all_defined = true;
        for (v, &ci) in values.iter_mut().zip(&slots) {
            let fv = extract_idx(corpus, ci, feature, config)?;
            if !fv.defined {
                all_defined = false;
                break;
            }
            *v = fv.value;
        }
        if !all_defined {
            n_dropped += 1;
            continue;
        }
        cm1.push(values[0]);
        cp1.push(values[1]);
        ctrl_m1.push(values[2]);
        ctrl_p1.push(values[3]);
    }

    let n = cm1.len();
    if n < 2 {
        return Err(DfError::TooFewPairs(n));
    }

    let t_change: Vec<f64> = cp1.iter().zip(&cm1).map(|(a, b)| a - b).collect();
    let c_change: Vec<f64> = ctrl_p1.iter().zip(&ctrl_m1).map(|(a, b)| a - b).collect();
    let did_diffs: Vec<f64> = t_change.iter().zip(&c_change).map(|(a, b)| a - b).collect();

    let balance_p = match t_test_welch(&cm1, &ctrl_m1) {
        Ok(t) => Some(t.p_two_sided),
        Err(StatsError::ZeroVariance) => None,
        Err(e) => unreachable!("unexpected balance failure: {e}"),
    };

    Ok(DfResult {
        feature,
        scenario: matches.scenario,
        n_pairs: n,
        n_discarded_unmatched: matches.n_discarded_unmatched,
        n_dropped_undefined: n_dropped,
        treatment_change: effect(mean(&t_change), t_test_paired(&cp1, &cm1)),
        control_change: effect(mean(&c_change), t_test_paired(&ctrl_p1, &ctrl_m1)),
        balance_p,
        did: effect(mean(&did_diffs), t_test_one_sample(&did_diffs, 0.0)),
        slots: [
            slot_stat("c-1", &cm1),
            slot_stat("c+1", &cp1),
            slot_stat("c'-1", &ctrl_m1),
            slot_stat("c'+1", &ctrl_p1),
        ],
    })
}

#[derive(Debug, Serialize)]
struct EffectJson {
    est: f64,
    p: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DfResultJson<'a> {
    feature: &'a str,
    scenario: &'a str,
    n_pairs: usize,
    n_discarded_unmatched: usize,
    treatment_change: EffectJson,
    control_change: EffectJson,
    balance_p: Option<f64>,
    did: EffectJson,
}

fn effect_json(e: EffectTest) -> EffectJson {
    EffectJson {
        est: sig10(e.est),
        p: e.p.map(sig10),
    }
}

impl DfResult {
    pub fn to_json(&self) -> String {
        let mirror = DfResultJson {
            feature: self.feature.as_str(),
            scenario: self.scenario.as_str(),
            n_pairs: self.n_pairs,
            n_discarded_unmatched: self.n_discarded_unmatched,
            treatment_change: effect_json(self.treatment_change),
            control_change: effect_json(self.control_change),
            balance_p: self.balance_p.map(sig10),
            did: effect_json(self.did),
        };
        serde_json::to_string_pretty(&mirror).expect("result serializes")
    }

    /// Slot means table as CSV with header `slot,mean,se,n`.
    pub fn write_slots_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "slot,mean,se,n")?;
        for s in &self.slots {
            writeln!(w, "{},{},{},{}", s.slot, sig10(s.mean), sig10(s.se), s.n)?;
        }
        Ok(())
    }
}
