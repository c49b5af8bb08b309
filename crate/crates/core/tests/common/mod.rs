//! Shared brute-force oracles for the integration tests.
//!
//! Everything here recomputes library results by naive full scans or via
//! independent third-party implementations (nalgebra, statrs) so the test
//! targets can demand exact agreement with the optimized code paths.

#![allow(dead_code)]

use modcausal::corpus::{Comment, Corpus, RemovalRecord};
use modcausal::df::{match_controls, select_treatments, DfInstance, MatchConfig, Scenario, WEEK_SECONDS};
use modcausal::its::ItsInstance;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Small random corpus with adversarial tie structure for selection oracles.
pub fn random_corpus(seed: u64) -> Corpus {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_trees = 40;
    let n_users = 30;
    let mut comments = Vec::new();
    for t in 0..n_trees {
        comments.push(Comment {
            id: format!("root{t:03}"),
            tree_id: format!("tree{t:03}"),
            parent_id: None,
            author: format!("op{:02}", rng.random_range(0..10)),
            created_utc: 0,
            body: "root".into(),
            score: 0,
            delta_from_op: false,
        });
    }
    let mut k = 0usize;
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    for u in 0..n_users {
        let m = rng.random_range(5..40);
        for _ in 0..m {
            let t = rng.random_range(0..n_trees);
            by_user[u].push(comments.len());
            comments.push(Comment {
                id: format!("c{k:05}"),
                tree_id: format!("tree{t:03}"),
                parent_id: Some(format!("root{t:03}")),
                author: format!("user{u:02}"),
                created_utc: rng.random_range(1..1_000_000),
                body: "body words".into(),
                score: rng.random_range(-2..30),
                delta_from_op: false,
            });
            k += 1;
        }
    }
    let mut removals = Vec::new();
    for u in 0..n_users {
        if !rng.random_bool(0.6) {
            continue;
        }
        let n_rem = rng.random_range(1..=3.min(by_user[u].len()));
        let mut targets = by_user[u].clone();
        targets.shuffle(&mut rng);
        for &ci in targets.iter().take(n_rem) {
            removals.push(RemovalRecord {
                comment_id: comments[ci].id.clone(),
                removed_utc: comments[ci].created_utc + rng.random_range(10..50_000),
                moderator: "themod".into(),
                rule: "2".into(),
                description: String::new(),
            });
        }
    }
    Corpus::build(comments, removals).unwrap()
}

/// Independent removal-ordinal computation by naive scan.
pub fn naive_ordinal(corpus: &Corpus, ri: usize) -> Option<u32> {
    let r = corpus.removal(ri);
    let ci = corpus.comment_idx(&r.comment_id)?;
    let c = corpus.comment(ci);
    if c.is_root() || c.author == "[deleted]" {
        return None;
    }
    let mut all: Vec<(i64, &str)> = (0..corpus.removals().len())
        .filter(|&rj| {
            let rr = corpus.removal(rj);
            corpus
                .comment_idx(&rr.comment_id)
                .map(|cj| {
                    let cc = corpus.comment(cj);
                    !cc.is_root() && cc.author == c.author
                })
                .unwrap_or(false)
        })
        .map(|rj| {
            let rr = corpus.removal(rj);
            (rr.removed_utc, rr.comment_id.as_str())
        })
        .collect();
    all.sort();
    let pos = all
        .iter()
        .position(|&(t, id)| t == r.removed_utc && id == r.comment_id)
        .unwrap();
    Some(pos as u32 + 1)
}

/// Brute-force re-derivation of the time-series selection.
pub fn naive_its_selection(corpus: &Corpus, k: usize) -> Vec<ItsInstance> {
    let mut out = Vec::new();
    for ri in 0..corpus.removals().len() {
        let Some(ordinal) = naive_ordinal(corpus, ri) else { continue };
        if ordinal > 2 {
            continue;
        }
        let r = corpus.removal(ri);
        let pi = corpus.comment_idx(&r.comment_id).unwrap();
        let prob = corpus.comment(pi);
        let user = &prob.author;
        if corpus.trees()[&prob.tree_id].op_author == *user
            || corpus.moderators().contains(user)
        {
            continue;
        }
        let mut mine: Vec<usize> = (0..corpus.comments().len())
            .filter(|&i| {
                let c = corpus.comment(i);
                !c.is_root() && c.author == *user
            })
            .collect();
        mine.sort_by(|&a, &b| {
            let (ca, cb) = (corpus.comment(a), corpus.comment(b));
            (ca.created_utc, &ca.id).cmp(&(cb.created_utc, &cb.id))
        });
        if mine.iter().any(|&i| {
            let c = corpus.comment(i);
            c.created_utc > prob.created_utc && c.created_utc <= r.removed_utc
        }) {
            continue;
        }
        let pre: Vec<usize> = mine
            .iter()
            .copied()
            .filter(|&i| {
                let c = corpus.comment(i);
                c.tree_id != prob.tree_id && c.created_utc < prob.created_utc
            })
            .collect();
        let post: Vec<usize> = mine
            .iter()
            .copied()
            .filter(|&i| {
                let c = corpus.comment(i);
                c.tree_id != prob.tree_id && c.created_utc > r.removed_utc
            })
            .collect();
        if pre.len() < k || post.len() < k {
            continue;
        }
        out.push(ItsInstance {
            user: user.clone(),
            removal_idx: ri,
            ordinal,
            pre: pre[pre.len() - k..].to_vec(),
            post: post[..k].to_vec(),
        });
    }
    out
}

/// Brute-force re-derivation of the matched-design treatment selection.
pub fn naive_treatments(corpus: &Corpus, scenario: Scenario) -> Vec<DfInstance> {
    let scope = |tree: &str, affected: &str| match scenario {
        Scenario::NonAffected => tree != affected,
        Scenario::Affected => tree == affected,
    };
    let mut out = Vec::new();
    for ri in 0..corpus.removals().len() {
        let Some(ordinal) = naive_ordinal(corpus, ri) else { continue };
        if ordinal > 2 {
            continue;
        }
        let r = corpus.removal(ri);
        let pi = corpus.comment_idx(&r.comment_id).unwrap();
        let prob = corpus.comment(pi);
        let mut mine: Vec<&Comment> = corpus
            .comments()
            .iter()
            .filter(|c| !c.is_root() && c.author == prob.author)
            .collect();
        mine.sort_by_key(|c| (c.created_utc, c.id.clone()));
        let c_minus1 = mine
            .iter()
            .filter(|c| {
                c.created_utc > prob.created_utc
                    && c.created_utc < r.removed_utc
                    && scope(&c.tree_id, &prob.tree_id)
            })
            .next_back();
        let c_plus1 = mine.iter().find(|c| {
            c.created_utc > r.removed_utc
                && c.created_utc <= r.removed_utc + WEEK_SECONDS
                && scope(&c.tree_id, &prob.tree_id)
        });
        if let (Some(m1), Some(p1)) = (c_minus1, c_plus1) {
            out.push(DfInstance {
                user: prob.author.clone(),
                removal_idx: ri,
                ordinal,
                t_d: r.removed_utc - prob.created_utc,
                c_minus1: corpus.comment_idx(&m1.id).unwrap(),
                c_plus1: corpus.comment_idx(&p1.id).unwrap(),
                scenario,
            });
        }
    }
    out
}

/// Brute-force feasibility of (treatment, candidate control) under the
/// pseudo-removal construction.
pub fn naive_control_windows(
    corpus: &Corpus,
    ri: usize,
    t_d: i64,
    scenario: Scenario,
) -> Option<(usize, usize)> {
    let scope = |tree: &str, affected: &str| match scenario {
        Scenario::NonAffected => tree != affected,
        Scenario::Affected => tree == affected,
    };
    let r = corpus.removal(ri);
    let prob = corpus.comment(corpus.comment_idx(&r.comment_id)?);
    let pseudo = prob.created_utc + t_d;
    let mut mine: Vec<&Comment> = corpus
        .comments()
        .iter()
        .filter(|c| !c.is_root() && c.author == prob.author)
        .collect();
    mine.sort_by_key(|c| (c.created_utc, c.id.clone()));
    let m1 = mine
        .iter()
        .filter(|c| {
            c.created_utc > prob.created_utc
                && c.created_utc < pseudo
                && scope(&c.tree_id, &prob.tree_id)
        })
        .next_back()?;
    let p1 = mine.iter().find(|c| {
        c.created_utc > pseudo
            && c.created_utc < r.removed_utc
            && scope(&c.tree_id, &prob.tree_id)
    })?;
    Some((
        corpus.comment_idx(&m1.id).unwrap(),
        corpus.comment_idx(&p1.id).unwrap(),
    ))
}

/// Run the matcher, verify every pair invariant exhaustively, and replay the
/// greedy assignment to confirm each control is the minimal feasible one.
/// Returns the number of matched pairs.
pub fn check_matching(corpus: &Corpus, scenario: Scenario, label: &str) -> usize {
    let treatments = select_treatments(corpus, scenario);
    let result = match_controls(corpus, &treatments, scenario, &MatchConfig::default());
    assert_eq!(
        result.pairs.len() + result.n_discarded_unmatched,
        treatments.len()
    );

    // Exhaustive per-pair invariant check.
    let mut seen_controls = std::collections::HashSet::new();
    for p in &result.pairs {
        assert!(p.control_t_d > p.treatment.t_d, "{label}: gap must be positive");
        assert_ne!(p.control_removal_idx, p.treatment.removal_idx, "{label}: self-match");
        assert!(
            seen_controls.insert(p.control_removal_idx),
            "{label}: control reused"
        );
        assert!(corpus.ordinal(p.control_removal_idx).unwrap() <= 2);
        let ctrl_removal = corpus.removal(p.control_removal_idx);
        let ctrl_prob = corpus.comment(corpus.comment_idx(&ctrl_removal.comment_id).unwrap());
        assert_eq!(
            p.pseudo_removal_utc,
            ctrl_prob.created_utc + p.treatment.t_d
        );
        let m1 = corpus.comment(p.control_c_minus1);
        let p1 = corpus.comment(p.control_c_plus1);
        assert!(ctrl_prob.created_utc < m1.created_utc);
        assert!(m1.created_utc < p.pseudo_removal_utc);
        assert!(p.pseudo_removal_utc < p1.created_utc);
        assert!(
            p1.created_utc < ctrl_removal.removed_utc,
            "{label}: c'+1 after real removal"
        );
        // Scope discipline for all four slots.
        let t_prob = corpus.comment(
            corpus
                .comment_idx(&corpus.removal(p.treatment.removal_idx).comment_id)
                .unwrap(),
        );
        for (ci, affected) in [
            (p.treatment.c_minus1, &t_prob.tree_id),
            (p.treatment.c_plus1, &t_prob.tree_id),
            (p.control_c_minus1, &ctrl_prob.tree_id),
            (p.control_c_plus1, &ctrl_prob.tree_id),
        ] {
            let c = corpus.comment(ci);
            match scenario {
                Scenario::NonAffected => assert_ne!(&c.tree_id, affected),
                Scenario::Affected => assert_eq!(&c.tree_id, affected),
            }
        }
    }

    // Greedy minimality: replay the assignment order and confirm each chosen
    // control is the feasible candidate with the smallest (delay, id) among
    // those still unused.
    let mut order: Vec<&DfInstance> = treatments.iter().collect();
    order.sort_by(|a, b| {
        (a.t_d, &corpus.removal(a.removal_idx).comment_id)
            .cmp(&(b.t_d, &corpus.removal(b.removal_idx).comment_id))
    });
    let by_treatment: std::collections::HashMap<usize, &modcausal::df::MatchedPair> = result
        .pairs
        .iter()
        .map(|p| (p.treatment.removal_idx, p))
        .collect();
    let mut used = std::collections::HashSet::new();
    for t in order {
        let mut feasible: Vec<(i64, &str, usize)> = (0..corpus.removals().len())
            .filter(|&ri| {
                matches!(corpus.ordinal(ri), Some(o) if o <= 2)
                    && ri != t.removal_idx
                    && !used.contains(&ri)
                    && corpus.delay(ri) > t.t_d
                    && naive_control_windows(corpus, ri, t.t_d, scenario).is_some()
            })
            .map(|ri| (corpus.delay(ri), corpus.removal(ri).comment_id.as_str(), ri))
            .collect();
        feasible.sort();
        match by_treatment.get(&t.removal_idx) {
            Some(pair) => {
                assert!(!feasible.is_empty());
                assert_eq!(
                    pair.control_removal_idx, feasible[0].2,
                    "{label}: non-minimal control"
                );
                used.insert(pair.control_removal_idx);
            }
            None => assert!(
                feasible.is_empty(),
                "{label}: treatment discarded despite feasible control"
            ),
        }
    }
    result.pairs.len()
}

/// Two-sided Student-t tail probability from the reference distribution.
pub fn reference_two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * dist.cdf(-t.abs())
}

/// Reference OLS by normal equations: beta = (X'X)^-1 X'y, classical SEs.
pub fn reference_ols(design: &[[f64; 4]], y: &[f64]) -> ([f64; 4], [f64; 4], [f64; 4], [f64; 4]) {
    let n = design.len();
    let x = DMatrix::from_fn(n, 4, |i, j| design[i][j]);
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let xtx_inv = xtx.try_inverse().expect("oracle design should be invertible");
    let beta = &xtx_inv * xty;
    let resid = &yv - &x * &beta;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let df = (n - 4) as f64;
    let sigma2 = rss / df;
    let mut b = [0.0; 4];
    let mut se = [0.0; 4];
    let mut t = [0.0; 4];
    let mut p = [0.0; 4];
    for j in 0..4 {
        b[j] = beta[j];
        se[j] = (sigma2 * xtx_inv[(j, j)]).sqrt();
        t[j] = b[j] / se[j];
        p[j] = reference_two_sided_p(t[j], df);
    }
    (b, se, t, p)
}

/// Random pooled segmented-regression fixture: several instances, each
/// contributing indices in {-k..-1, 1..k}.
pub fn random_its_design(rng: &mut ChaCha12Rng) -> (Vec<[f64; 4]>, Vec<f64>) {
    let k = rng.random_range(3..=10);
    let n_instances = rng.random_range(2..=8);
    let b: [f64; 4] = [
        rng.random_range(-2.0..2.0),
        rng.random_range(-0.5..0.5),
        rng.random_range(-2.0..2.0),
        rng.random_range(-0.5..0.5),
    ];
    let mut design = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n_instances {
        for i in (-k..=k).filter(|&i| i != 0) {
            let x = if i > 0 { 1.0 } else { 0.0 };
            let row = [1.0, i as f64, x, i as f64 * x];
            let noise: f64 = rng.random_range(-0.5..0.5);
            let mean: f64 = (0..4).map(|j| row[j] * b[j]).sum();
            design.push(row);
            y.push(mean + noise);
        }
    }
    (design, y)
}
