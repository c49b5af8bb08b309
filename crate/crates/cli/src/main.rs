//! Command-line front end for the moderation-effect estimators.
//!
//! Subcommands: `ingest-check` (parse + headline counts), `its`
//! (interrupted time-series regression), `df` (delayed-feedback matched
//! design), `synth` (seeded corpus generator), `validate` (estimates vs
//! injected ground truth), and `report` (per-index and per-slot series for
//! every feature). Exit codes: 0 success, 1 usage error, 2 data error.
//! `MODCAUSAL_THREADS` caps the worker pool used for parallel feature
//! extraction; all file outputs are byte-deterministic for identical
//! inputs.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use modcausal::corpus::{parse_corpus_from_paths, Corpus};
use modcausal::df::{
    df_test, match_controls, select_treatments, DfResult, MatchConfig, Scenario,
};
use modcausal::features::{FeatureConfig, FeatureKind, Lexicon};
use modcausal::its::{fit_its, select_its_instances, DEFAULT_K};
use modcausal::round::sig10;
use modcausal::synth::{
    evaluate_estimators, generate, null_calibration, read_ground_truth, write_outputs,
    SynthConfig,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "modcausal", version, about = "Causal estimates of comment-removal effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Path to comments JSONL.
    #[arg(long)]
    comments: PathBuf,
    /// Path to removal-log JSONL.
    #[arg(long)]
    removals: PathBuf,
}

#[derive(Args)]
struct LexiconArgs {
    /// Replace the built-in swear lexicon (one lowercase term per line).
    #[arg(long)]
    swear_lexicon: Option<PathBuf>,
    /// Supply a hate lexicon; required for the hate_ratio feature.
    #[arg(long)]
    hate_lexicon: Option<PathBuf>,
    /// Replace the built-in stopword list used by word_count.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for emitted JSON/CSV files.
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus and print its headline counts as JSON.
    IngestCheck {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Fit the interrupted time-series regression for one feature.
    Its {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        lexicons: LexiconArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Feature to analyze.
        #[arg(long)]
        feature: String,
        /// Window half-width: comments per side.
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Run the delayed-feedback matched design for one feature.
    Df {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        lexicons: LexiconArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Feature to analyze.
        #[arg(long)]
        feature: String,
        /// Restrict to one scenario (default: run both).
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Generate a synthetic corpus with known injected effects.
    Synth {
        /// Generator config JSON (missing fields take defaults).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare estimates on a synthetic corpus against its ground truth.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        /// ground_truth.json emitted by synth.
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        /// Window half-width for the time-series arm.
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Reseeded null corpora for the rejection-rate estimate (0 skips).
        #[arg(long, default_value_t = 25)]
        null_seeds: u64,
    },
    /// Emit per-index and per-slot series for every applicable feature.
    Report {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        lexicons: LexiconArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Window half-width: comments per side.
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Honor MODCAUSAL_THREADS as a cap on the worker pool.
fn configure_threads() -> Result<(), String> {
    if let Ok(raw) = std::env::var("MODCAUSAL_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| format!("MODCAUSAL_THREADS must be a positive integer, got {raw:?}"))?;
        if n == 0 {
            return Err("MODCAUSAL_THREADS must be a positive integer".to_string());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::IngestCheck { input } => ingest_check(&input),
        Command::Its {
            input,
            lexicons,
            output,
            feature,
            k,
        } => its(&input, &lexicons, &output, &feature, k),
        Command::Df {
            input,
            lexicons,
            output,
            feature,
            scenario,
        } => df(&input, &lexicons, &output, &feature, scenario.as_deref()),
        Command::Synth {
            config,
            seed,
            output,
        } => synth(&config, seed, &output),
        Command::Validate {
            input,
            truth,
            output,
            k,
            null_seeds,
        } => validate(&input, &truth, &output, k, null_seeds),
        Command::Report {
            input,
            lexicons,
            output,
            k,
        } => report(&input, &lexicons, &output, k),
    }
}

fn load_corpus(input: &InputArgs) -> Result<Corpus, CliError> {
    let corpus = parse_corpus_from_paths(&input.comments, &input.removals).map_err(CliError::data)?;
    let s = corpus.summary();
    log::info!(
        "corpus: {} trees, {} comments, {} removals ({} orphaned), {} moderators, {} affected users, {} affected trees",
        s.n_trees,
        s.n_comments,
        s.n_removals,
        s.n_orphan_removals,
        s.n_moderators,
        s.n_affected_users,
        s.n_affected_trees
    );
    Ok(corpus)
}

fn parse_feature(name: &str) -> Result<FeatureKind, CliError> {
    FeatureKind::from_str(name).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_scenario(name: &str) -> Result<Scenario, CliError> {
    Scenario::from_str(name).map_err(|e| CliError::Usage(e.to_string()))
}

/// Resolve lexicon flags into a feature config; file problems are data
/// errors.
fn feature_config(lexicons: &LexiconArgs) -> Result<FeatureConfig, CliError> {
    let mut config = FeatureConfig::default();
    if let Some(path) = &lexicons.swear_lexicon {
        config.swear = Some(load_lexicon(path)?);
    }
    if let Some(path) = &lexicons.hate_lexicon {
        config.hate = Some(load_lexicon(path)?);
    }
    if let Some(path) = &lexicons.stopwords {
        config.stopwords = Some(load_lexicon(path)?);
    }
    Ok(config)
}

fn load_lexicon(path: &Path) -> Result<Lexicon, CliError> {
    Lexicon::from_path(path).map_err(CliError::data)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn ingest_check(input: &InputArgs) -> Result<(), CliError> {
    let corpus = load_corpus(input)?;
    let json = serde_json::to_string_pretty(&corpus.summary()).expect("summary serializes");
    println!("{json}");
    Ok(())
}

fn its(
    input: &InputArgs,
    lexicons: &LexiconArgs,
    output: &OutputArgs,
    feature: &str,
    k: usize,
) -> Result<(), CliError> {
    let kind = parse_feature(feature)?;
    if k == 0 {
        return Err(CliError::Usage("--k must be at least 1".to_string()));
    }
    let features = feature_config(lexicons)?;
    let corpus = load_corpus(input)?;
    let instances = select_its_instances(&corpus, k);
    log::info!("selected {} instances at k = {k}", instances.len());
    let report = fit_its(&corpus, &instances, kind, &features).map_err(CliError::data)?;
    let json = report.to_json();
    write_file(&output.output_dir, &format!("its_{}.json", kind.as_str()), json.as_bytes())?;
    let mut csv = Vec::new();
    report.write_series_csv(&mut csv)?;
    write_file(
        &output.output_dir,
        &format!("its_{}_series.csv", kind.as_str()),
        &csv,
    )?;
    println!("{json}");
    Ok(())
}

fn df(
    input: &InputArgs,
    lexicons: &LexiconArgs,
    output: &OutputArgs,
    feature: &str,
    scenario: Option<&str>,
) -> Result<(), CliError> {
    let kind = parse_feature(feature)?;
    if kind.its_only() {
        return Err(CliError::Usage(format!(
            "feature '{}' cannot be used with the matched design: control users are only \
             observed until their own removal, which is too short a window to measure \
             posting rate",
            kind.as_str()
        )));
    }
    let scenarios = match scenario {
        Some(name) => vec![parse_scenario(name)?],
        None => vec![Scenario::NonAffected, Scenario::Affected],
    };
    let features = feature_config(lexicons)?;
    let corpus = load_corpus(input)?;
    for scenario in scenarios {
        let result = run_df(&corpus, kind, scenario, &features)?;
        let json = result.to_json();
        let stem = format!("df_{}_{}", kind.as_str(), scenario.as_str());
        write_file(&output.output_dir, &format!("{stem}.json"), json.as_bytes())?;
        let mut csv = Vec::new();
        result.write_slots_csv(&mut csv)?;
        write_file(&output.output_dir, &format!("{stem}_slots.csv"), &csv)?;
        println!("{json}");
    }
    Ok(())
}

fn run_df(
    corpus: &Corpus,
    kind: FeatureKind,
    scenario: Scenario,
    features: &FeatureConfig,
) -> Result<DfResult, CliError> {
    let treatments = select_treatments(corpus, scenario);
    let matched = match_controls(corpus, &treatments, scenario, &MatchConfig::default());
    log::info!(
        "{}: {} treatments, {} matched pairs, {} unmatched",
        scenario.as_str(),
        treatments.len(),
        matched.pairs.len(),
        matched.n_discarded_unmatched
    );
    df_test(corpus, &matched, kind, features).map_err(CliError::data)
}

fn synth(config_path: &Path, seed: Option<u64>, output: &OutputArgs) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(config_path)?;
    let mut config: SynthConfig =
        serde_json::from_str(&raw).map_err(|e| CliError::Data(format!("bad config: {e}")))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    log::info!(
        "generating: seed {}, {} users, {} trees, {:.1} comments/user/day over {:.1} days",
        config.seed,
        config.n_users,
        config.n_trees,
        config.rate_per_day,
        config.horizon_days
    );
    let (corpus, truth) = generate(&config).map_err(CliError::data)?;
    let s = corpus.summary();
    log::info!(
        "generated: {} trees, {} comments, {} removals, {} moderators, {} affected users, {} affected trees",
        s.n_trees,
        s.n_comments,
        s.n_removals,
        s.n_moderators,
        s.n_affected_users,
        s.n_affected_trees
    );
    std::fs::create_dir_all(&output.output_dir)?;
    write_outputs(&corpus, &truth, &output.output_dir)?;
    for name in ["comments.jsonl", "removals.jsonl", "ground_truth.json"] {
        log::info!("wrote {}", output.output_dir.join(name).display());
    }
    Ok(())
}

/// Summary shape for `validate`.
#[derive(Serialize)]
struct ValidateSummary {
    its_bias: f64,
    df_bias: f64,
    df_null_rejection_rate: Option<f64>,
}

fn validate(
    input: &InputArgs,
    truth_path: &Path,
    output: &OutputArgs,
    k: usize,
    null_seeds: u64,
) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Usage("--k must be at least 1".to_string()));
    }
    let corpus = load_corpus(input)?;
    let truth = read_ground_truth(truth_path)?;
    let ev = evaluate_estimators(&corpus, &truth, k).map_err(CliError::data)?;
    log::info!(
        "true effect {:.4}: time-series {} instances beta2 {:.4}; matched {} pairs DiD {:.4}",
        ev.true_effect,
        ev.n_its_instances,
        ev.its_beta2,
        ev.n_df_pairs,
        ev.df_did
    );
    let rejection_rate = if null_seeds > 0 {
        let cal = null_calibration(&truth.config, null_seeds, 0.05).map_err(CliError::data)?;
        log::info!(
            "null calibration: {}/{} rejections at alpha 0.05, {}/{} balance non-significant",
            cal.n_rejections,
            cal.n_seeds,
            cal.n_balance_nonsignificant,
            cal.n_seeds
        );
        Some(sig10(cal.rejection_rate))
    } else {
        None
    };
    let summary = ValidateSummary {
        its_bias: sig10(ev.its_bias),
        df_bias: sig10(ev.df_bias),
        df_null_rejection_rate: rejection_rate,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&output.output_dir, "validate.json", json.as_bytes())?;
    println!("{json}");
    Ok(())
}

fn report(
    input: &InputArgs,
    lexicons: &LexiconArgs,
    output: &OutputArgs,
    k: usize,
) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Usage("--k must be at least 1".to_string()));
    }
    let features = feature_config(lexicons)?;
    let corpus = load_corpus(input)?;
    let instances = select_its_instances(&corpus, k);
    log::info!("selected {} instances at k = {k}", instances.len());
    let kinds: Vec<FeatureKind> = FeatureKind::ALL
        .iter()
        .copied()
        .filter(|kind| {
            if *kind == FeatureKind::HateRatio && features.hate.is_none() {
                log::warn!("skipping hate_ratio: no hate lexicon supplied");
                return false;
            }
            true
        })
        .collect();

    // One independent task per feature; results land in a fixed order so
    // output bytes do not depend on scheduling.
    use rayon::prelude::*;
    let results: Vec<Result<Vec<(String, Vec<u8>)>, CliError>> = kinds
        .par_iter()
        .map(|&kind| {
            let mut files = Vec::new();
            // A feature that cannot be analyzed on this corpus (degenerate
            // fit, too few pairs) is reported as a warning, not a failure;
            // the explicit its/df subcommands still error out for it.
            match fit_its(&corpus, &instances, kind, &features) {
                Ok(its_report) => {
                    files.push((
                        format!("its_{}.json", kind.as_str()),
                        its_report.to_json().into_bytes(),
                    ));
                    let mut csv = Vec::new();
                    its_report.write_series_csv(&mut csv)?;
                    files.push((format!("its_{}_series.csv", kind.as_str()), csv));
                }
                Err(e) => log::warn!("skipping time-series fit for {}: {e}", kind.as_str()),
            }
            if !kind.its_only() {
                for scenario in [Scenario::NonAffected, Scenario::Affected] {
                    match run_df(&corpus, kind, scenario, &features) {
                        Ok(result) => {
                            let stem = format!("df_{}_{}", kind.as_str(), scenario.as_str());
                            files.push((format!("{stem}.json"), result.to_json().into_bytes()));
                            let mut csv = Vec::new();
                            result.write_slots_csv(&mut csv)?;
                            files.push((format!("{stem}_slots.csv"), csv));
                        }
                        Err(CliError::Data(msg)) => log::warn!(
                            "skipping matched design for {} ({}): {msg}",
                            kind.as_str(),
                            scenario.as_str()
                        ),
                        Err(e) => return Err(e),
                    }
                }
            }
            Ok(files)
        })
        .collect();
    for result in results {
        for (name, bytes) in result? {
            write_file(&output.output_dir, &name, &bytes)?;
        }
    }
    Ok(())
}
