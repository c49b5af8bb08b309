//! Seeded synthetic-corpus generator with known injected effects.
//!
//! Every random draw comes from a per-user ChaCha stream keyed by
//! (seed, purpose, user index) via a splitmix64 chain, so adding users or
//! resizing unrelated parts of the corpus never perturbs an existing user's
//! draws. Per user: comment times follow a Poisson process (exponential
//! inter-arrivals); each comment is problematic with the user's current
//! noncompliance probability; every problematic comment is removed after a
//! log-normal delay. Experiencing the first removal multiplies the user's
//! noncompliance probability by (1 − δ) from that removal's removed_utc on;
//! the third removal silences problematic posting entirely (a ban stand-in);
//! each removal can also trigger permanent churn with a configurable hazard.
//! Feature emissions (word count, swear/hate ratios, score, delta awards)
//! have independently configurable levels and linear temporal drifts, and
//! bodies are token sequences realized to hit the drawn lexical ratios.

use crate::corpus::{Comment, Corpus, CorpusError, RemovalRecord};
use crate::df::{df_test, match_controls, select_treatments, DfError, MatchConfig, Scenario};
use crate::features::FeatureConfig;
use crate::features::FeatureKind;
use crate::its::{fit_its, select_its_instances, ItsError};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECS_PER_DAY: f64 = 86_400.0;

/// Standard normal quantile at 0.60; fixes the default delay scale so that
/// P(delay > 7200 s) = 0.40 under the default sigma.
const Z_060: f64 = 0.2533471031357997;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Its(#[from] ItsError),
    #[error(transparent)]
    Df(#[from] DfError),
}

/// Log-normal removal-delay parameters (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub mu_ln: f64,
    pub sigma_ln: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        // Median exp(mu) ~ 5449 s, calibrated so 40% of delays exceed 2 h.
        DelayConfig {
            mu_ln: (7200.0f64).ln() - 1.1 * Z_060,
            sigma_ln: 1.1,
        }
    }
}

/// Per-day linear drifts applied to emission parameters (probabilities are
/// clamped to [0, 1] after shifting).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    /// Additive drift of the base noncompliance probability.
    pub noncompliance_per_day: f64,
    /// Additive drift of the per-comment swear propensity.
    pub swear_per_day: f64,
    /// Additive drift of the per-token hate probability.
    pub hate_per_day: f64,
    /// Additive drift of the mean score.
    pub score_per_day: f64,
    /// Additive drift of the word-count log-scale location.
    pub word_count_ln_per_day: f64,
    /// Additive drift of the delta-award probability.
    pub delta_won_per_day: f64,
}

/// Comment-level emission parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmissionConfig {
    /// Word count ~ round(LogNormal(mu, sigma)), floored at 1.
    pub word_count_ln_mu: f64,
    pub word_count_ln_sigma: f64,
    /// Per-comment swear propensity ~ Beta(alpha, beta); tokens realize it.
    pub swear_alpha: f64,
    pub swear_beta: f64,
    /// Per-token hate probability (0 disables hate emission).
    pub hate_word_p: f64,
    /// Score ~ round(Normal(mean, sd)).
    pub score_mean: f64,
    pub score_sd: f64,
    /// Delta award ~ Bernoulli(p).
    pub delta_won_p: f64,
}

impl Default for EmissionConfig {
    fn default() -> Self {
        EmissionConfig {
            word_count_ln_mu: (12.0f64).ln(),
            word_count_ln_sigma: 0.6,
            swear_alpha: 2.0,
            swear_beta: 38.0,
            hate_word_p: 0.0,
            score_mean: 2.0,
            score_sd: 5.0,
            delta_won_p: 0.03,
        }
    }
}

/// Full generator configuration. JSON-serializable; unknown fields are
/// rejected so typos surface instead of silently using defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_users: usize,
    pub n_trees: usize,
    /// Per-user comment rate, events per day.
    pub rate_per_day: f64,
    pub horizon_days: f64,
    /// Base noncompliance probability.
    pub p0: f64,
    /// Multiplicative noncompliance reduction once the first removal lands.
    pub delta: f64,
    /// Probability that experiencing a removal makes the user leave forever.
    pub churn_per_removal: f64,
    pub n_moderators: usize,
    /// Epoch offset of the simulated window.
    pub base_utc: i64,
    pub drift: DriftConfig,
    pub delay: DelayConfig,
    pub emission: EmissionConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_users: 200,
            n_trees: 60,
            rate_per_day: 12.0,
            horizon_days: 5.0,
            p0: 0.12,
            delta: 0.5,
            churn_per_removal: 0.0,
            n_moderators: 4,
            base_utc: 1_600_000_000,
            drift: DriftConfig::default(),
            delay: DelayConfig::default(),
            emission: EmissionConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_users == 0 || self.n_trees == 0 || self.n_moderators == 0 {
            return err("n_users, n_trees, n_moderators must be positive");
        }
        if !(self.rate_per_day > 0.0) {
            return err("rate_per_day must be positive");
        }
        if !(self.horizon_days > 0.0) {
            return err("horizon_days must be positive");
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return err("p0 must lie in [0, 1]");
        }
        if !(-1.0..=1.0).contains(&self.delta) {
            return err("delta must lie in [-1, 1]");
        }
        if !(0.0..=1.0).contains(&self.churn_per_removal) {
            return err("churn_per_removal must lie in [0, 1]");
        }
        if !(self.delay.sigma_ln > 0.0) || !self.delay.mu_ln.is_finite() {
            return err("delay sigma must be positive and mu finite");
        }
        let e = &self.emission;
        if !(e.word_count_ln_sigma > 0.0) {
            return err("word_count_ln_sigma must be positive");
        }
        if !(e.swear_alpha > 0.0) || !(e.swear_beta > 0.0) {
            return err("swear beta parameters must be positive");
        }
        if !(0.0..=1.0).contains(&e.hate_word_p) {
            return err("hate_word_p must lie in [0, 1]");
        }
        if !(e.score_sd >= 0.0) {
            return err("score_sd must be nonnegative");
        }
        if !(0.0..=1.0).contains(&e.delta_won_p) {
            return err("delta_won_p must lie in [0, 1]");
        }
        Ok(())
    }
}

/// One injected-truth record per comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentTruth {
    pub id: String,
    pub user: String,
    pub problematic: bool,
    /// Removals of this user that had landed (removed_utc strictly earlier)
    /// when the comment was posted: 0 = untreated, 1-2 = reduced, ≥3 =
    /// silenced.
    pub removals_before: u32,
    /// The exact noncompliance probability used for the draw.
    pub p_noncompliance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub user: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalTruth {
    pub comment_id: String,
    pub created_utc: i64,
    pub removed_utc: i64,
    pub delay: i64,
}

/// Everything the generator knows that an estimator must rediscover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub users: Vec<UserTruth>,
    pub comments: Vec<CommentTruth>,
    pub removals: Vec<RemovalTruth>,
}

const SWEAR_POOL: [&str; 5] = ["damn", "hell", "crap", "shit", "bloody"];
const HATE_POOL: [&str; 1] = ["slurword"];
const NEUTRAL_POOL: [&str; 24] = [
    "time", "year", "people", "way", "day", "thing", "world", "life", "hand", "part", "child",
    "eye", "woman", "place", "work", "week", "case", "point", "company", "number", "group",
    "problem", "fact", "idea",
];

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a 64-bit stream id from (seed, purpose, index).
fn stream_id(seed: u64, purpose: &str, index: u64) -> u64 {
    let mut z = splitmix64(seed);
    for chunk in purpose.as_bytes().chunks(8) {
        let mut w = [0u8; 8];
        w[..chunk.len()].copy_from_slice(chunk);
        z = splitmix64(z ^ u64::from_le_bytes(w));
    }
    splitmix64(z ^ index)
}

/// Dedicated ChaCha stream for one (purpose, user).
fn user_stream(seed: u64, purpose: &str, user: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    let mut z = stream_id(seed, purpose, user);
    for chunk in key.chunks_mut(8) {
        z = splitmix64(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

struct RawComment {
    user: u32,
    seq: u32,
    created_utc: i64,
    tree: u32,
    body: String,
    score: i64,
    delta_won: bool,
    problematic: bool,
    removals_before: u32,
    p_noncompliance: f64,
    removed_utc: Option<i64>,
}

fn build_body(rng: &mut ChaCha12Rng, n_words: usize, q_swear: f64, q_hate: f64) -> String {
    let mut body = String::new();
    for i in 0..n_words {
        if i > 0 {
            body.push(' ');
        }
        let u: f64 = rng.random();
        let word = if u < q_hate {
            HATE_POOL[rng.random_range(0..HATE_POOL.len())]
        } else if u < q_hate + q_swear {
            SWEAR_POOL[rng.random_range(0..SWEAR_POOL.len())]
        } else {
            NEUTRAL_POOL[rng.random_range(0..NEUTRAL_POOL.len())]
        };
        body.push_str(word);
    }
    body
}

/// Maximum own-branch depth before the parent chain restarts at the root.
const MAX_CHAIN_DEPTH: u32 = 12;

/// Generate a corpus and its ground truth. Deterministic given the config.
pub fn generate(config: &SynthConfig) -> Result<(Corpus, GroundTruth), SynthError> {
    config.validate()?;
    let horizon_s = config.horizon_days * SECS_PER_DAY;
    let rate_per_sec = config.rate_per_day / SECS_PER_DAY;
    let inter_arrival = Exp::new(rate_per_sec).expect("validated rate");
    let delay_dist =
        LogNormal::new(config.delay.mu_ln, config.delay.sigma_ln).expect("validated delay");
    let swear_dist =
        Beta::new(config.emission.swear_alpha, config.emission.swear_beta).expect("validated beta");

    let mut raws: Vec<RawComment> = Vec::new();
    for u in 0..config.n_users as u64 {
        let mut rng = user_stream(config.seed, "emit", u);
        let mut delay_rng = user_stream(config.seed, "delay", u);

        let mut times = Vec::new();
        let mut t = 0.0f64;
        loop {
            t += inter_arrival.sample(&mut rng);
            if t > horizon_s {
                break;
            }
            times.push(config.base_utc + t.round() as i64);
        }

        let mut landed_removals: Vec<i64> = Vec::new();
        let mut leave_at: Option<i64> = None;
        for (seq, &created_utc) in times.iter().enumerate() {
            if leave_at.is_some_and(|l| created_utc > l) {
                break;
            }
            let tree = rng.random_range(0..config.n_trees as u32);
            let days = (created_utc - config.base_utc) as f64 / SECS_PER_DAY;

            let removals_before =
                landed_removals.iter().filter(|&&r| r < created_utc).count() as u32;
            let base_p =
                (config.p0 + config.drift.noncompliance_per_day * days).clamp(0.0, 1.0);
            let p_noncompliance = if removals_before >= 3 {
                0.0
            } else if removals_before >= 1 {
                (base_p * (1.0 - config.delta)).clamp(0.0, 1.0)
            } else {
                base_p
            };
            let problematic = rng.random_bool(p_noncompliance);
            let mut removed_utc = None;
            if problematic {
                let delay = delay_dist.sample(&mut delay_rng).round().max(1.0) as i64;
                let r = created_utc + delay;
                removed_utc = Some(r);
                landed_removals.push(r);
                if config.churn_per_removal > 0.0 && rng.random_bool(config.churn_per_removal) {
                    leave_at = Some(leave_at.map_or(r, |l| l.min(r)));
                }
            }

            let wc_mu = config.emission.word_count_ln_mu
                + config.drift.word_count_ln_per_day * days;
            let n_words = LogNormal::new(wc_mu, config.emission.word_count_ln_sigma)
                .expect("validated word count")
                .sample(&mut rng)
                .round()
                .max(1.0) as usize;
            let q_hate =
                (config.emission.hate_word_p + config.drift.hate_per_day * days).clamp(0.0, 1.0);
            let q_swear = (swear_dist.sample(&mut rng) + config.drift.swear_per_day * days)
                .clamp(0.0, 1.0)
                .min(1.0 - q_hate);
            let body = build_body(&mut rng, n_words, q_swear, q_hate);
            let score_mean = config.emission.score_mean + config.drift.score_per_day * days;
            let score = Normal::new(score_mean, config.emission.score_sd)
                .expect("validated score")
                .sample(&mut rng)
                .round() as i64;
            let delta_won = rng.random_bool(
                (config.emission.delta_won_p + config.drift.delta_won_per_day * days)
                    .clamp(0.0, 1.0),
            );

            raws.push(RawComment {
                user: u as u32,
                seq: seq as u32,
                created_utc,
                tree,
                body,
                score,
                delta_won,
                problematic,
                removals_before,
                p_noncompliance,
                removed_utc,
            });
        }
    }

    // Canonical generation order; ids assigned in this order so the
    // (created_utc, id) sort matches it.
    raws.sort_by_key(|r| (r.created_utc, r.user, r.seq));

    let mut comments = Vec::with_capacity(raws.len() + config.n_trees);
    for tree in 0..config.n_trees {
        comments.push(Comment {
            id: format!("r{tree:05}"),
            tree_id: format!("t{tree:05}"),
            parent_id: None,
            author: format!("op{tree:05}"),
            created_utc: config.base_utc,
            body: "root".to_string(),
            score: 0,
            delta_from_op: false,
        });
    }

    // Parent rule: continue the tree's newest branch while it is shallower
    // than MAX_CHAIN_DEPTH, otherwise restart from the root.
    let mut last_in_tree: Vec<Option<(String, u32)>> = vec![None; config.n_trees];
    let mut removals = Vec::new();
    let mut truth_comments = Vec::with_capacity(raws.len());
    let mut truth_removals = Vec::new();
    for (i, raw) in raws.iter().enumerate() {
        let id = format!("c{i:08}");
        let tree = raw.tree as usize;
        let (parent_id, depth) = match &last_in_tree[tree] {
            Some((last_id, last_depth)) if *last_depth < MAX_CHAIN_DEPTH => {
                (last_id.clone(), last_depth + 1)
            }
            _ => (format!("r{tree:05}"), 1),
        };
        last_in_tree[tree] = Some((id.clone(), depth));
        comments.push(Comment {
            id: id.clone(),
            tree_id: format!("t{tree:05}"),
            parent_id: Some(parent_id),
            author: format!("user{:05}", raw.user),
            created_utc: raw.created_utc,
            body: raw.body.clone(),
            score: raw.score,
            delta_from_op: raw.delta_won,
        });
        truth_comments.push(CommentTruth {
            id: id.clone(),
            user: format!("user{:05}", raw.user),
            problematic: raw.problematic,
            removals_before: raw.removals_before,
            p_noncompliance: raw.p_noncompliance,
        });
        if let Some(removed_utc) = raw.removed_utc {
            let moderator = stream_id(config.seed, "moderator", ((raw.user as u64) << 32) | raw.seq as u64)
                % config.n_moderators as u64;
            removals.push(RemovalRecord {
                comment_id: id.clone(),
                removed_utc,
                moderator: format!("mod{moderator:02}"),
                rule: format!("{}", 1 + (stream_id(config.seed, "rule", i as u64) % 5)),
                description: "rule violation".to_string(),
            });
            truth_removals.push(RemovalTruth {
                comment_id: id,
                created_utc: raw.created_utc,
                removed_utc,
                delay: removed_utc - raw.created_utc,
            });
        }
    }
    truth_removals.sort_by(|a, b| (a.removed_utc, &a.comment_id).cmp(&(b.removed_utc, &b.comment_id)));

    let users = (0..config.n_users)
        .map(|u| UserTruth {
            user: format!("user{u:05}"),
            delta: config.delta,
        })
        .collect();

    let corpus = Corpus::build(comments, removals)?;
    let truth = GroundTruth {
        config: config.clone(),
        users,
        comments: truth_comments,
        removals: truth_removals,
    };
    Ok((corpus, truth))
}

/// Write comments.jsonl, removals.jsonl, and ground_truth.json into `dir`.
pub fn write_outputs(
    corpus: &Corpus,
    truth: &GroundTruth,
    dir: &std::path::Path,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("comments.jsonl"))?);
    corpus.write_comments_jsonl(&mut f)?;
    f.flush()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("removals.jsonl"))?);
    corpus.write_removals_jsonl(&mut f)?;
    f.flush()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("ground_truth.json"))?);
    serde_json::to_writer_pretty(&mut f, truth)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Read a ground-truth file back.
pub fn read_ground_truth(path: &std::path::Path) -> std::io::Result<GroundTruth> {
    let f = std::fs::File::open(path)?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// Estimates vs injected truth for one synthetic corpus (noncompliance,
/// non-affected scenario).
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorEvaluation {
    /// Ideal no-drift level change at removal: −p0·δ.
    pub true_effect: f64,
    pub n_its_instances: usize,
    pub its_beta2: f64,
    pub its_p2: f64,
    pub its_bias: f64,
    pub n_df_pairs: usize,
    pub df_did: f64,
    pub df_did_p: Option<f64>,
    pub df_balance_p: Option<f64>,
    pub df_bias: f64,
}

/// Run both pipelines on a generated corpus and compare against the truth.
pub fn evaluate_estimators(
    corpus: &Corpus,
    truth: &GroundTruth,
    k: usize,
) -> Result<EstimatorEvaluation, EvalError> {
    let features = FeatureConfig::default();
    let true_effect = -truth.config.p0 * truth.config.delta;

    let instances = select_its_instances(corpus, k);
    let its = fit_its(corpus, &instances, FeatureKind::Noncompliance, &features)?;

    let treatments = select_treatments(corpus, Scenario::NonAffected);
    let matched = match_controls(corpus, &treatments, Scenario::NonAffected, &MatchConfig::default());
    let df = df_test(corpus, &matched, FeatureKind::Noncompliance, &features)?;

    Ok(EstimatorEvaluation {
        true_effect,
        n_its_instances: its.n_instances,
        its_beta2: its.fit.beta[2],
        its_p2: its.fit.p[2],
        its_bias: its.fit.beta[2] - true_effect,
        n_df_pairs: df.n_pairs,
        df_did: df.did.est,
        df_did_p: df.did.p,
        df_balance_p: df.balance_p,
        df_bias: df.did.est - true_effect,
    })
}

/// Rejection behavior of the matched design under the generator's null
/// model, across reseeded corpora.
#[derive(Debug, Clone, Serialize)]
pub struct NullCalibration {
    pub n_seeds: usize,
    pub alpha: f64,
    pub n_rejections: usize,
    pub rejection_rate: f64,
    pub n_balance_nonsignificant: usize,
    pub balance_nonsignificant_rate: f64,
}

/// Re-generate `n_seeds` corpora from `base` with δ = 0 and no drift, and
/// count DiD rejections at `alpha` plus non-significant balance tests.
pub fn null_calibration(
    base: &SynthConfig,
    n_seeds: u64,
    alpha: f64,
) -> Result<NullCalibration, EvalError> {
    let mut config = base.clone();
    config.delta = 0.0;
    config.drift = DriftConfig::default();
    let features = FeatureConfig::default();
    let mut n_rejections = 0usize;
    let mut n_balance_nonsig = 0usize;
    for i in 0..n_seeds {
        config.seed = base.seed.wrapping_add(i);
        let (corpus, _) = generate(&config)?;
        let treatments = select_treatments(&corpus, Scenario::NonAffected);
        let matched =
            match_controls(&corpus, &treatments, Scenario::NonAffected, &MatchConfig::default());
        let df = df_test(&corpus, &matched, FeatureKind::Noncompliance, &features)?;
        if df.did.p.is_some_and(|p| p < alpha) {
            n_rejections += 1;
        }
        if df.balance_p.map_or(true, |p| p >= alpha) {
            n_balance_nonsig += 1;
        }
    }
    Ok(NullCalibration {
        n_seeds: n_seeds as usize,
        alpha,
        n_rejections,
        rejection_rate: n_rejections as f64 / n_seeds as f64,
        n_balance_nonsignificant: n_balance_nonsig,
        balance_nonsignificant_rate: n_balance_nonsig as f64 / n_seeds as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use std::collections::BTreeSet;
    use std::io::Cursor;

    fn small_config() -> SynthConfig {
        SynthConfig {
            seed: 7,
            n_users: 25,
            n_trees: 12,
            rate_per_day: 10.0,
            horizon_days: 3.0,
            p0: 0.2,
            delta: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let config = small_config();
        let (c1, t1) = generate(&config).unwrap();
        let (c2, t2) = generate(&config).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(t1, t2);
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        c1.write_comments_jsonl(&mut b1).unwrap();
        c2.write_comments_jsonl(&mut b2).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(
            serde_json::to_string(&t1).unwrap(),
            serde_json::to_string(&t2).unwrap()
        );
    }

    #[test]
    fn adding_users_preserves_existing_streams() {
        let config = small_config();
        let mut bigger = config.clone();
        bigger.n_users = config.n_users + 5;
        let (_, t1) = generate(&config).unwrap();
        let (_, t2) = generate(&bigger).unwrap();
        // Per-user truth sequences are unchanged for the original users.
        for u in 0..config.n_users {
            let name = format!("user{u:05}");
            let a: Vec<&CommentTruth> =
                t1.comments.iter().filter(|c| c.user == name).collect();
            let b: Vec<&CommentTruth> =
                t2.comments.iter().filter(|c| c.user == name).collect();
            assert_eq!(a.len(), b.len(), "user {name}");
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.problematic, y.problematic);
                assert_eq!(x.removals_before, y.removals_before);
                assert_eq!(x.p_noncompliance, y.p_noncompliance);
            }
        }
    }

    #[test]
    fn outputs_reparse_with_zero_diagnostics() {
        let (corpus, _) = generate(&small_config()).unwrap();
        let mut cb = Vec::new();
        let mut rb = Vec::new();
        corpus.write_comments_jsonl(&mut cb).unwrap();
        corpus.write_removals_jsonl(&mut rb).unwrap();
        let reparsed = parse_corpus(Cursor::new(cb), Cursor::new(rb)).unwrap();
        assert!(reparsed.orphan_removals().is_empty());
        assert_eq!(corpus, reparsed);
    }

    #[test]
    fn truth_labels_equal_removal_set() {
        let (corpus, truth) = generate(&small_config()).unwrap();
        let labeled: BTreeSet<&str> = truth
            .comments
            .iter()
            .filter(|c| c.problematic)
            .map(|c| c.id.as_str())
            .collect();
        let removed: BTreeSet<&str> = corpus
            .removals()
            .iter()
            .map(|r| r.comment_id.as_str())
            .collect();
        assert_eq!(labeled, removed);
        assert_eq!(truth.removals.len(), corpus.removals().len());
        for rt in &truth.removals {
            assert!(rt.delay >= 1);
            assert_eq!(rt.delay, rt.removed_utc - rt.created_utc);
        }
    }

    #[test]
    fn removals_before_matches_brute_force() {
        let (corpus, truth) = generate(&small_config()).unwrap();
        for ct in &truth.comments {
            let idx = corpus.comment_idx(&ct.id).unwrap();
            let created = corpus.comment(idx).created_utc;
            let expected = truth
                .removals
                .iter()
                .filter(|rt| {
                    rt.removed_utc < created
                        && truth
                            .comments
                            .iter()
                            .find(|c| c.id == rt.comment_id)
                            .unwrap()
                            .user
                            == ct.user
                })
                .count() as u32;
            assert_eq!(ct.removals_before, expected, "comment {}", ct.id);
        }
    }

    #[test]
    fn effect_state_machine() {
        // delta = 1 kills noncompliance after the first landed removal.
        let mut config = small_config();
        config.p0 = 1.0;
        config.delta = 1.0;
        config.n_users = 10;
        let (_, truth) = generate(&config).unwrap();
        for ct in &truth.comments {
            match ct.removals_before {
                0 => {
                    assert_eq!(ct.p_noncompliance, 1.0);
                    assert!(ct.problematic);
                }
                _ => {
                    assert_eq!(ct.p_noncompliance, 0.0);
                    assert!(!ct.problematic);
                }
            }
        }

        // delta = 0: full probability until the third removal lands.
        config.delta = 0.0;
        let (_, truth) = generate(&config).unwrap();
        let mut saw_silenced = false;
        for ct in &truth.comments {
            if ct.removals_before >= 3 {
                saw_silenced = true;
                assert_eq!(ct.p_noncompliance, 0.0);
                assert!(!ct.problematic);
            } else {
                assert_eq!(ct.p_noncompliance, 1.0);
            }
        }
        assert!(saw_silenced, "expected at least one silenced comment");
    }

    #[test]
    fn churn_truncates_users() {
        let mut config = small_config();
        config.churn_per_removal = 1.0;
        config.p0 = 0.5;
        let (corpus, truth) = generate(&config).unwrap();
        // No user comments strictly after their first landed removal.
        for rt in &truth.removals {
            let user = &truth
                .comments
                .iter()
                .find(|c| c.id == rt.comment_id)
                .unwrap()
                .user;
            let first_removed = truth
                .removals
                .iter()
                .filter(|r| {
                    truth
                        .comments
                        .iter()
                        .find(|c| c.id == r.comment_id)
                        .unwrap()
                        .user
                        == *user
                })
                .map(|r| r.removed_utc)
                .min()
                .unwrap();
            for node in corpus.author_nodes(user) {
                assert!(corpus.comment(*node).created_utc <= first_removed);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = small_config();
        c.p0 = 1.5;
        assert!(matches!(generate(&c), Err(SynthError::InvalidConfig(_))));
        let mut c = small_config();
        c.horizon_days = 0.0;
        assert!(matches!(generate(&c), Err(SynthError::InvalidConfig(_))));
        let mut c = small_config();
        c.delay.sigma_ln = -1.0;
        assert!(matches!(generate(&c), Err(SynthError::InvalidConfig(_))));
        let mut c = small_config();
        c.delta = 2.0;
        assert!(matches!(generate(&c), Err(SynthError::InvalidConfig(_))));
    }

    #[test]
    fn config_json_round_trip_rejects_unknown_fields() {
        let config = small_config();
        let json = serde_json::to_string(&config).unwrap();
        let back: SynthConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
        // Partial configs fill from defaults.
        let partial: SynthConfig = serde_json::from_str(r#"{"seed": 9}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.n_users, SynthConfig::default().n_users);
        // Typos are errors, not silent defaults.
        assert!(serde_json::from_str::<SynthConfig>(r#"{"sedd": 9}"#).is_err());
    }

    #[test]
    fn bodies_realize_lexical_ratios() {
        let mut config = small_config();
        config.emission.hate_word_p = 0.1;
        let (corpus, _) = generate(&config).unwrap();
        let swears: BTreeSet<&str> = SWEAR_POOL.into_iter().collect();
        let mut total = 0usize;
        let mut swear_tokens = 0usize;
        let mut hate_tokens = 0usize;
        for c in corpus.comments().iter().filter(|c| !c.is_root()) {
            for token in c.body.split(' ') {
                total += 1;
                if swears.contains(token) {
                    swear_tokens += 1;
                } else if token == "slurword" {
                    hate_tokens += 1;
                }
            }
        }
        let swear_rate = swear_tokens as f64 / total as f64;
        let hate_rate = hate_tokens as f64 / total as f64;
        // Beta(2, 38) mean = 0.05; hate_word_p = 0.1.
        assert!((swear_rate - 0.05).abs() < 0.02, "swear rate {swear_rate}");
        assert!((hate_rate - 0.10).abs() < 0.02, "hate rate {hate_rate}");
    }
}
