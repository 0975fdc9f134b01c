//! Subcommand implementations. Each loads its inputs, captures the run
//! configuration (see [`crate::config`]), delegates the real work to the
//! `leakscope` library, and renders one TSV or JSON report to stdout.

use std::path::{Path, PathBuf};

use serde::Serialize;

use leakscope::conllu::{parse_conllu, serialize_conllu, treebank_to_dep_trees};
use leakscope::graphcore::equivalence_classes;
use leakscope::leakage::{subtree_leakage_styled, tree_leakage};
use leakscope::sampling::{sample_diverse, sample_random, split_by_leakage, treebank_stats};
use leakscope::stats::{analyze_with, parse_manifest, OlsOptions};
use leakscope::surgery::{count_constructions, remove_modifiers, SurgeryError};
use leakscope::{
    DepTree, LeakageReport, Level, RegressionResult, SampleSize, SurgeryReport, SurgerySpec,
    Treebank, TreebankStats,
};

use crate::config::{print_json, print_tsv, read_input, RunConfig};
use crate::{
    data_err, AnalyzeArgs, CountArgs, Failure, Format, LeakageArgs, SampleArgs, StatsArgs,
    Strategy, SurgeryArgs,
};

/// Parse one CoNLL-U input; the digest is of the file as read, before any
/// deprel-subtype stripping.
fn load_treebank(path: &Path, strip_subtypes: bool) -> Result<(Treebank, String), Failure> {
    let (text, digest) = read_input(path)?;
    let mut tb =
        parse_conllu(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    tb.source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if strip_subtypes {
        tb.strip_deprel_subtypes();
    }
    Ok((tb, digest))
}

fn trees_of(tb: &Treebank, path: &Path) -> Result<Vec<DepTree>, Failure> {
    treebank_to_dep_trees(tb)
        .map_err(|(index, e)| Failure::Data(format!("{}: sentence {index}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// leakage
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LeakageOutput<'a> {
    config: &'a RunConfig,
    report: &'a LeakageReport,
}

pub fn leakage(args: &LeakageArgs) -> Result<(), Failure> {
    let mut config = RunConfig::new("leakage")
        .flag("level", args.level)
        .flag("mode", args.mode)
        .flag("strip-deprel-subtypes", args.strip_deprel_subtypes)
        .flag("subtree-style", args.subtree_style)
        .flag("weighting", args.weighting);

    // Leakage against several training files equals leakage against their
    // concatenation (membership in a union of form sets), so that is
    // literally how multiple --train flags are computed.
    let mut train_trees: Vec<DepTree> = Vec::new();
    for path in &args.train {
        let (tb, digest) = load_treebank(path, args.strip_deprel_subtypes)?;
        config = config.input(path, digest);
        train_trees.extend(trees_of(&tb, path)?);
    }
    let (test_tb, digest) = load_treebank(&args.test, args.strip_deprel_subtypes)?;
    config = config.input(&args.test, digest).seal();
    let test_trees = trees_of(&test_tb, &args.test)?;

    let report = match args.level {
        Level::Tree => tree_leakage(&train_trees, &test_trees, args.mode),
        Level::Subtree => subtree_leakage_styled(
            &train_trees,
            &test_trees,
            args.mode,
            args.weighting,
            args.subtree_style,
        ),
    };

    match args.format {
        Format::Tsv => print_tsv(
            &config,
            &[
                "level",
                "mode",
                "weighting",
                "leaked_count",
                "total_count",
                "leaked_fraction",
                "undefined",
            ],
            &[vec![
                report.level.to_string(),
                report.mode.to_string(),
                report.weighting.to_string(),
                report.leaked_count.to_string(),
                report.total_count.to_string(),
                report.leaked_fraction.to_string(),
                report.undefined.to_string(),
            ]],
        ),
        Format::Json => print_json(&LeakageOutput {
            config: &config,
            report: &report,
        })?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct AnalyzeRow {
    leakage_column: String,
    n_entries: usize,
    #[serde(flatten)]
    result: RegressionResult,
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    config: &'a RunConfig,
    results: &'a [AnalyzeRow],
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let (text, digest) = read_input(&args.manifest)?;
    let config = RunConfig::new("analyze")
        .flag("k", args.k)
        .flag("seed", args.seed)
        .flag("standardize", args.standardize)
        .input(&args.manifest, digest)
        .seal();

    let series_list = parse_manifest(&text)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.manifest.display())))?;
    let options = OlsOptions {
        standardize: args.standardize,
    };
    let mut rows = Vec::with_capacity(series_list.len());
    for series in &series_list {
        let result = analyze_with(&series.entries, args.k, args.seed, options).map_err(|e| {
            Failure::Data(format!(
                "{}: column {:?}: {e}",
                args.manifest.display(),
                series.leakage_column
            ))
        })?;
        rows.push(AnalyzeRow {
            leakage_column: series.leakage_column.clone(),
            n_entries: series.entries.len(),
            result,
        });
    }

    match args.format {
        Format::Tsv => print_tsv(
            &config,
            &[
                "leakage_column",
                "n_entries",
                "alpha",
                "beta",
                "gamma",
                "regression_score",
                "explained_variance_cv",
                "mae_cv",
                "spearman_rho",
            ],
            &rows
                .iter()
                .map(|row| {
                    vec![
                        row.leakage_column.clone(),
                        row.n_entries.to_string(),
                        row.result.alpha.to_string(),
                        row.result.beta.to_string(),
                        row.result.gamma.to_string(),
                        row.result.regression_score.to_string(),
                        row.result.explained_variance_cv.to_string(),
                        row.result.mae_cv.to_string(),
                        row.result.spearman_rho.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Json => print_json(&AnalyzeOutput {
            config: &config,
            results: &rows,
        })?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SampleFile {
    strategy: &'static str,
    path: String,
    sentences: usize,
    /// `None` for an empty sample, where the statistics are undefined.
    stats: Option<TreebankStats>,
}

#[derive(Serialize)]
struct SampleOutput<'a> {
    config: &'a RunConfig,
    resolved_size: usize,
    feasible_max: usize,
    samples: &'a [SampleFile],
}

pub fn sample(args: &SampleArgs) -> Result<(), Failure> {
    let strategy_name = match args.strategy {
        Strategy::Leaky => "leaky",
        Strategy::Nonleaky => "nonleaky",
        Strategy::Random => "random",
        Strategy::Diverse => "diverse",
        Strategy::All => "all",
    };
    let (train_tb, train_digest) = load_treebank(&args.train, args.strip_deprel_subtypes)?;
    let (test_tb, test_digest) = load_treebank(&args.test, args.strip_deprel_subtypes)?;
    let config = RunConfig::new("sample")
        .flag("allow-empty", args.allow_empty)
        .flag("mode", args.mode)
        .flag("seed", args.seed)
        .flag("size", args.size)
        .flag("strategy", strategy_name)
        .flag("strip-deprel-subtypes", args.strip_deprel_subtypes)
        .input(&args.train, train_digest)
        .input(&args.test, test_digest)
        .seal();

    let split = split_by_leakage(&train_tb, &test_tb, args.mode).map_err(data_err)?;
    let class_count = {
        let trees = trees_of(&train_tb, &args.train)?;
        equivalence_classes(&trees, args.mode).len()
    };

    // Each strategy is drawn from its own seed stream, fixed independently
    // of which strategies were requested, so a single-strategy run emits
    // byte-identical files to the corresponding part of an `all` run.
    let per_strategy: [(Strategy, &'static str, &Treebank, usize, u64); 4] = [
        (
            Strategy::Leaky,
            "leaky",
            &split.train_leaky,
            split.train_leaky.len(),
            args.seed,
        ),
        (
            Strategy::Nonleaky,
            "nonleaky",
            &split.train_nonleaky,
            split.train_nonleaky.len(),
            args.seed.wrapping_add(1),
        ),
        (
            Strategy::Random,
            "random",
            &train_tb,
            train_tb.len(),
            args.seed.wrapping_add(2),
        ),
        (
            Strategy::Diverse,
            "diverse",
            &train_tb,
            class_count,
            args.seed.wrapping_add(3),
        ),
    ];
    let selected: Vec<_> = per_strategy
        .iter()
        .filter(|(s, ..)| args.strategy == Strategy::All || args.strategy == *s)
        .collect();

    let feasible_max = selected.iter().map(|(.., max, _)| *max).min().unwrap_or(0);
    let auto_size = split
        .train_leaky
        .len()
        .min(split.train_nonleaky.len())
        .min(class_count);
    let n = match args.size {
        // Auto resolves from all strategies even when only one is written,
        // so every strategy of one experiment shares a sample size.
        SampleSize::Auto => auto_size,
        SampleSize::Fixed(n) => n,
    };
    if n > feasible_max {
        return Err(Failure::Data(format!(
            "sample size {n} is infeasible for strategy {strategy_name}; the feasible maximum is {feasible_max}"
        )));
    }
    if n == 0 && !args.allow_empty {
        return Err(Failure::Data(format!(
            "sample size resolved to 0 for strategy {strategy_name}; pass --allow-empty to write empty samples"
        )));
    }

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let stem = args
        .train
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "train".to_string());

    let mut written: Vec<SampleFile> = Vec::with_capacity(selected.len());
    for &&(strategy, suffix, source, _, seed) in &selected {
        let sample = if strategy == Strategy::Diverse {
            sample_diverse(source, n, args.mode, seed).map_err(data_err)?
        } else {
            sample_random(source, n, seed).map_err(data_err)?
        };
        let path: PathBuf = args.out_dir.join(format!("{stem}.{suffix}.conllu"));
        write_file(&path, &serialize_conllu(&sample))?;
        let stats = if sample.is_empty() {
            None
        } else {
            Some(treebank_stats(&sample, args.mode).map_err(data_err)?)
        };
        written.push(SampleFile {
            strategy: suffix,
            path: path.display().to_string(),
            sentences: sample.len(),
            stats,
        });
    }

    match args.format {
        Format::Tsv => print_tsv(
            &config,
            &[
                "strategy",
                "path",
                "sentences",
                "diversity",
                "avg_length",
                "avg_depth",
                "avg_dep_length",
            ],
            &written
                .iter()
                .map(|f| {
                    let mut row = vec![
                        f.strategy.to_string(),
                        f.path.clone(),
                        f.sentences.to_string(),
                    ];
                    match &f.stats {
                        Some(s) => row.extend([
                            s.diversity.to_string(),
                            s.avg_length.to_string(),
                            s.avg_depth.to_string(),
                            s.avg_dep_length.to_string(),
                        ]),
                        None => {
                            row.extend(["NA".to_string(), "NA".into(), "NA".into(), "NA".into()])
                        }
                    }
                    row
                })
                .collect::<Vec<_>>(),
        ),
        Format::Json => print_json(&SampleOutput {
            config: &config,
            resolved_size: n,
            feasible_max,
            samples: &written,
        })?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// surgery and count
// ---------------------------------------------------------------------------

fn build_spec(
    target_rel: &str,
    modifier_rel: &str,
    match_prefix: bool,
    obj_dobj_synonyms: bool,
) -> Result<SurgerySpec, Failure> {
    // Asking to edit (rel, rel) pairs is a malformed request, not bad data.
    let spec =
        SurgerySpec::new(target_rel, modifier_rel).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(spec
        .with_match_prefix(match_prefix)
        .with_obj_dobj_synonyms(obj_dobj_synonyms))
}

fn surgery_failure(path: &Path, err: SurgeryError) -> Failure {
    Failure::Data(format!("{}: {err}", path.display()))
}

#[derive(Serialize)]
struct SurgeryOutput<'a> {
    config: &'a RunConfig,
    output: String,
    report: &'a SurgeryReport,
}

pub fn surgery(args: &SurgeryArgs) -> Result<(), Failure> {
    let spec = build_spec(
        &args.target_rel,
        &args.modifier_rel,
        args.match_prefix,
        args.obj_dobj_synonyms,
    )?;
    let (tb, digest) = load_treebank(&args.input, false)?;
    let config = RunConfig::new("surgery")
        .flag("match-prefix", args.match_prefix)
        .flag("modifier-rel", &args.modifier_rel)
        .flag("obj-dobj-synonyms", args.obj_dobj_synonyms)
        .flag("target-rel", &args.target_rel)
        .input(&args.input, digest)
        .seal();

    let (edited, report) =
        remove_modifiers(&tb, &spec).map_err(|e| surgery_failure(&args.input, e))?;
    write_file(&args.output, &serialize_conllu(&edited))?;
    if report.dropped_sentence_count > 0 {
        eprintln!(
            "warning: removal left {} sentence(s) empty; they were dropped",
            report.dropped_sentence_count
        );
    }

    match args.format {
        Format::Tsv => {
            let mut rows = vec![
                vec![
                    "removal_count".to_string(),
                    report.removal_count.to_string(),
                ],
                vec![
                    "removed_token_count".to_string(),
                    report.removed_token_count.to_string(),
                ],
                vec![
                    "dropped_sentence_count".to_string(),
                    report.dropped_sentence_count.to_string(),
                ],
            ];
            for (rel, count) in &report.removed_deprel_histogram {
                rows.push(vec![format!("removed_deprel:{rel}"), count.to_string()]);
            }
            print_tsv(&config, &["metric", "value"], &rows);
        }
        Format::Json => print_json(&SurgeryOutput {
            config: &config,
            output: args.output.display().to_string(),
            report: &report,
        })?,
    }
    Ok(())
}

#[derive(Serialize)]
struct CountOutput<'a> {
    config: &'a RunConfig,
    target_rel: &'a str,
    modifier_rel: &'a str,
    count: usize,
}

pub fn count(args: &CountArgs) -> Result<(), Failure> {
    let spec = build_spec(
        &args.target_rel,
        &args.modifier_rel,
        args.match_prefix,
        args.obj_dobj_synonyms,
    )?;
    let (tb, digest) = load_treebank(&args.input, false)?;
    let config = RunConfig::new("count")
        .flag("match-prefix", args.match_prefix)
        .flag("modifier-rel", &args.modifier_rel)
        .flag("obj-dobj-synonyms", args.obj_dobj_synonyms)
        .flag("target-rel", &args.target_rel)
        .input(&args.input, digest)
        .seal();

    let found = count_constructions(&tb, &spec).map_err(|e| surgery_failure(&args.input, e))?;

    match args.format {
        Format::Tsv => print_tsv(
            &config,
            &["target_rel", "modifier_rel", "count"],
            &[vec![
                args.target_rel.clone(),
                args.modifier_rel.clone(),
                found.to_string(),
            ]],
        ),
        Format::Json => print_json(&CountOutput {
            config: &config,
            target_rel: &args.target_rel,
            modifier_rel: &args.modifier_rel,
            count: found,
        })?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct StatsOutput<'a> {
    config: &'a RunConfig,
    stats: &'a TreebankStats,
}

pub fn stats(args: &StatsArgs) -> Result<(), Failure> {
    let (tb, digest) = load_treebank(&args.input, args.strip_deprel_subtypes)?;
    let config = RunConfig::new("stats")
        .flag("mode", args.mode)
        .flag("strip-deprel-subtypes", args.strip_deprel_subtypes)
        .input(&args.input, digest)
        .seal();

    let stats = treebank_stats(&tb, args.mode)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.input.display())))?;

    match args.format {
        Format::Tsv => print_tsv(
            &config,
            &[
                "sentence_count",
                "diversity",
                "avg_length",
                "avg_depth",
                "avg_dep_length",
                "dep_length_undefined",
            ],
            &[vec![
                stats.sentence_count.to_string(),
                stats.diversity.to_string(),
                stats.avg_length.to_string(),
                stats.avg_depth.to_string(),
                stats.avg_dep_length.to_string(),
                stats.dep_length_undefined.to_string(),
            ]],
        ),
        Format::Json => print_json(&StatsOutput {
            config: &config,
            stats: &stats,
        })?,
    }
    Ok(())
}
