//! Subcommand implementations. Commands compose through files only;
//! each writes its artifacts and a reproducibility manifest into the
//! output directory.

use crate::records::*;
use crate::{
    Command, EvaluateArgs, ImportTimemlArgs, LearnerArg, NormalizeArgs, PredictEmArgs,
    RepairArg, RepairArgs2, RerunArgs, RunBcdcArgs, SignificanceArgs, SynthArgs, TrainBcdcArgs,
    TrainEmArgs,
};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use temprel_core::bcdc;
use temprel_core::classifier::TrainConfig;
use temprel_core::consistency::{greedy_repair, ilp_repair, WeightedGraph};
use temprel_core::corpus::{
    convert_corpus, import_timeml_subset, linked_pairs, Corpus, PairKey, RelationLabel, Scheme,
};
use temprel_core::emtrl::{
    self, map_clusters_to_labels, EmConfig, EmOptions, RuleBase,
};
use temprel_core::eval::{
    self, accuracy, confusion_matrix, cross_validate, majority_baseline, stratified_shuffling,
};
use temprel_core::features::FeatureSet;
use temprel_core::synth::{describe_planted, generate, SynthConfig};

pub fn dispatch(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args, argv),
        Command::ImportTimeml(args) => cmd_import(args, argv),
        Command::Normalize(args) => cmd_normalize(args, argv),
        Command::TrainEm(args) => cmd_train_em(args, argv),
        Command::PredictEm(args) => cmd_predict_em(args, argv),
        Command::TrainBcdc(args) => cmd_train_bcdc(args, argv),
        Command::RunBcdc(args) => cmd_run_bcdc(args, argv),
        Command::Repair(args) => cmd_repair(args, argv),
        Command::Evaluate(args) => cmd_evaluate(args, argv),
        Command::Significance(args) => cmd_significance(args, argv),
        Command::Rerun(args) => cmd_rerun(args),
    }
}

fn cmd_synth(args: SynthArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let config = SynthConfig {
        seed: args.seed,
        documents: args.docs,
        topics: args.topics,
        events_per_doc: (args.events_min, args.events_max),
        pair_link_density: args.density,
        scheme: args.scheme.into(),
        feature_informativeness: args.informativeness,
        annotation_noise_rate: args.noise,
        intra_sentence_fraction: args.intra_fraction,
    };
    let (corpus, planted) = generate(&config)?;
    save_corpus(&corpus, &out.join("corpus.jsonl"))?;
    write_text(&out.join("planted.txt"), &describe_planted(&planted))?;
    write_manifest(&out, argv, serde_json::to_value(&config)?)?;
    Ok(())
}

fn cmd_import(args: ImportTimemlArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let mut documents = Vec::new();
    let mut report = String::new();
    let mut skipped_time = 0usize;
    let mut skipped_dup = 0usize;
    for path in &args.input {
        let text =
            fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
        let doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "document".to_string());
        let import = import_timeml_subset(&text, &doc_id)?;
        writeln!(
            report,
            "{doc_id}: {} events, {} tlinks, {} time links skipped, {} duplicates skipped",
            import.document.events.len(),
            import.document.tlinks.len(),
            import.skipped_time_links,
            import.skipped_duplicate_links
        )?;
        skipped_time += import.skipped_time_links;
        skipped_dup += import.skipped_duplicate_links;
        documents.push(import.document);
    }
    writeln!(report, "total: {} documents, {skipped_time} time links skipped, {skipped_dup} duplicates skipped", documents.len())?;
    save_corpus(&Corpus::new(documents), &out.join("corpus.jsonl"))?;
    write_text(&out.join("report.txt"), &report)?;
    let inputs: Vec<String> = args.input.iter().map(|p| p.display().to_string()).collect();
    write_manifest(&out, argv, json!({ "input": inputs }))?;
    Ok(())
}

fn cmd_normalize(args: NormalizeArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let corpus = load_corpus(&args.input)?;
    let converted = convert_corpus(&corpus, args.to.into())?;
    save_corpus(&converted, &out.join("corpus.jsonl"))?;
    write_manifest(
        &out,
        argv,
        json!({ "input": args.input.display().to_string(), "to": Scheme::from(args.to) }),
    )?;
    Ok(())
}

fn load_rulebase(args: &TrainEmArgs) -> Result<RuleBase> {
    let mut base = RuleBase::default();
    if let Some(path) = &args.rules_file {
        let file = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
        base.attribute_rules = emtrl::parse_attr_rules(std::io::BufReader::new(file))?;
    }
    if let Some(path) = &args.lexical_rules {
        let file = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
        base.lexical_rules = emtrl::parse_lexical_rules(std::io::BufReader::new(file))?;
    }
    if let Some(path) = &args.signal_rules {
        let file = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
        base.signal_rules = emtrl::parse_attr_rules(std::io::BufReader::new(file))?;
    }
    Ok(base)
}

fn assignment_records(
    assignment: &temprel_core::emtrl::Assignment,
    scheme: Scheme,
) -> Vec<PredictionRecord> {
    assignment
        .states
        .iter()
        .map(|(key, state)| PredictionRecord {
            doc_id: key.doc_id.clone(),
            source: key.source.clone(),
            target: key.target.clone(),
            scheme,
            label: state
                .label
                .map(|l| l.name().to_string())
                .unwrap_or_else(|| scheme.labels()[0].name().to_string()),
            confidence: Some(
                state.posterior.probs.iter().cloned().fold(f64::MIN, f64::max),
            ),
            posterior: Some(posterior_map(&state.posterior)),
        })
        .collect()
}

fn cmd_train_em(args: TrainEmArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let scheme: Scheme = args.scheme.into();
    let corpus = convert_corpus(&load_corpus(&args.input)?, scheme)?;

    let init = match args.init {
        crate::InitArg::Random => emtrl::init_random(&corpus, scheme, args.seed),
        crate::InitArg::Supervised => emtrl::init_supervised(&corpus, args.fraction, args.seed)?,
        crate::InitArg::Rules => {
            let base = load_rulebase(&args)?;
            emtrl::init_rules(&corpus, &base, scheme)?
        }
    };
    let config = EmConfig {
        max_iters: args.max_iters,
        param_tol: args.param_tol,
        repair: args.repair.into(),
        options: EmOptions { soft: args.soft, smoothing: true },
    };
    let run = emtrl::run_em(&corpus, init, scheme, &config)?;

    write_text(&out.join("em-model.json"), &run.model.to_dump_string())?;
    write_predictions(&assignment_records(&run.assignment, scheme), &out.join("predictions.jsonl"))?;
    write_text(&out.join("trace.json"), &serde_json::to_string_pretty(&run.trace)?)?;

    // accuracy against the corpus gold labels, with the cluster-to-label
    // mapping when the initialization carried no label information
    let gold = gold_in_scheme(&corpus, scheme)?;
    let predicted: BTreeMap<PairKey, RelationLabel> = run.assignment.labels();
    let mut report = String::new();
    writeln!(report, "pairs: {}", predicted.len())?;
    writeln!(report, "iterations: {}", run.trace.len())?;
    if let Some(last) = run.trace.last() {
        writeln!(report, "final label flips: {}", last.label_flips)?;
        writeln!(report, "final max param delta: {}", last.max_param_delta)?;
        writeln!(report, "final log likelihood: {}", last.complete_data_log_likelihood)?;
    }
    if !gold.is_empty() && gold.len() == predicted.len() {
        let acc = accuracy(&predicted, &gold)?;
        writeln!(report, "accuracy: {acc}")?;
        if args.init == crate::InitArg::Random {
            let mapping = map_clusters_to_labels(&predicted, &gold, scheme)?;
            writeln!(report, "mapped accuracy: {}", mapping.mapped_accuracy)?;
            writeln!(report, "label permutation: {:?}", mapping.permutation)?;
        }
        if let Ok((label, fraction)) = majority_baseline(&corpus, scheme) {
            writeln!(report, "majority baseline: {label} {fraction}")?;
        }
    }
    write_text(&out.join("report.txt"), &report)?;
    write_manifest(
        &out,
        argv,
        json!({
            "input": args.input.display().to_string(),
            "scheme": scheme,
            "init": format!("{:?}", args.init).to_lowercase(),
            "fraction": args.fraction,
            "em": config,
            "seed": args.seed,
        }),
    )?;
    Ok(())
}

fn cmd_predict_em(args: PredictEmArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let dump = fs::read_to_string(&args.model)
        .with_context(|| format!("read {}", args.model.display()))?;
    let model = temprel_core::emtrl::EmModel::from_dump_string(&dump)?;
    let corpus = load_corpus(&args.input)?;
    let pairs = linked_pairs(&corpus);
    let predictions = emtrl::predict(&model, &corpus, &pairs)?;
    let records: Vec<PredictionRecord> = predictions
        .iter()
        .map(|(key, (label, posterior))| PredictionRecord {
            doc_id: key.doc_id.clone(),
            source: key.source.clone(),
            target: key.target.clone(),
            scheme: model.scheme,
            label: label.name().to_string(),
            confidence: Some(posterior.prob(*label)),
            posterior: Some(posterior_map(posterior)),
        })
        .collect();
    write_predictions(&records, &out.join("predictions.jsonl"))?;
    write_manifest(
        &out,
        argv,
        json!({
            "model": args.model.display().to_string(),
            "input": args.input.display().to_string(),
        }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct BcdcModelBundle {
    version: u32,
    scheme: Scheme,
    feature_set: String,
    train_config: TrainConfig,
    model: serde_json::Value,
    feature_index: String,
}

fn feature_set_name(set: FeatureSet) -> &'static str {
    match set {
        FeatureSet::BcdcBasic => "basic",
        FeatureSet::BcdcExtra => "extra",
        FeatureSet::Emtrl => "emtrl",
    }
}

fn cmd_train_bcdc(args: TrainBcdcArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let scheme: Scheme = args.scheme.into();
    let feature_set: FeatureSet = args.features.into();
    let corpus = convert_corpus(&load_corpus(&args.train)?, scheme)?;
    let train_config = TrainConfig { epochs: args.epochs, lambda: args.lambda, seed: args.seed };
    let general = bcdc::train_general(&corpus, scheme, feature_set, &train_config)?;
    let mut index_text = Vec::new();
    general.index.save(&mut index_text)?;
    let bundle = BcdcModelBundle {
        version: 1,
        scheme,
        feature_set: feature_set_name(feature_set).to_string(),
        train_config: train_config.clone(),
        model: serde_json::from_str(&general.model.to_model_string())?,
        feature_index: String::from_utf8(index_text)?,
    };
    write_text(&out.join("bcdc-model.json"), &serde_json::to_string_pretty(&bundle)?)?;
    write_manifest(
        &out,
        argv,
        json!({
            "train": args.train.display().to_string(),
            "scheme": scheme,
            "features": feature_set_name(feature_set),
            "train_config": train_config,
        }),
    )?;
    Ok(())
}

fn predictions_to_records(
    predictions: &BTreeMap<PairKey, (RelationLabel, f64)>,
    scheme: Scheme,
) -> Vec<PredictionRecord> {
    predictions
        .iter()
        .map(|(key, (label, phi))| PredictionRecord {
            doc_id: key.doc_id.clone(),
            source: key.source.clone(),
            target: key.target.clone(),
            scheme,
            label: label.name().to_string(),
            confidence: Some(*phi),
            posterior: None,
        })
        .collect()
}

fn cmd_run_bcdc(args: RunBcdcArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let scheme: Scheme = args.scheme.into();
    let feature_set: FeatureSet = args.features.into();
    let train = convert_corpus(&load_corpus(&args.train)?, scheme)?;
    let tests = convert_corpus(&load_corpus(&args.tests)?, scheme)?;
    let pool = convert_corpus(&load_corpus(&args.pool)?, scheme)?;
    let train_config = TrainConfig { epochs: args.epochs, lambda: args.lambda, seed: args.seed };
    let cfg = bcdc::BcdcConfig {
        related_docs: args.related_docs,
        confident_per_round: args.confident_per_round,
        max_rounds: args.max_rounds,
        reuse_models_for_related_tests: !args.no_reuse,
        ..Default::default()
    };
    let run = bcdc::run_bcdc(&train, &tests, &pool, scheme, feature_set, &train_config, &cfg)?;

    write_predictions(&predictions_to_records(&run.predictions, scheme), &out.join("predictions.jsonl"))?;
    write_predictions(
        &predictions_to_records(&run.general_predictions, scheme),
        &out.join("general-predictions.jsonl"),
    )?;

    let gold = gold_in_scheme(&tests, scheme)?;
    let to_labels = |m: &BTreeMap<PairKey, (RelationLabel, f64)>| -> BTreeMap<PairKey, RelationLabel> {
        m.iter().map(|(k, (l, _))| (k.clone(), *l)).collect()
    };
    let specialized_acc = accuracy(&to_labels(&run.predictions), &gold).ok();
    let general_acc = accuracy(&to_labels(&run.general_predictions), &gold).ok();

    let report = json!({
        "documents": run.per_doc,
        "specialized_accuracy": specialized_acc,
        "general_accuracy": general_acc,
        "config": cfg,
    });
    write_text(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    let mut text = String::new();
    writeln!(text, "test documents: {}", run.per_doc.len())?;
    if let (Some(s), Some(g)) = (specialized_acc, general_acc) {
        writeln!(text, "specialized accuracy: {s}")?;
        writeln!(text, "general accuracy: {g}")?;
    }
    for doc in &run.per_doc {
        let injected: usize = doc.bootstrap.rounds.iter().map(|r| r.injected).sum();
        writeln!(
            text,
            "{}: rounds={} injected={} reused_from={} accuracy={}",
            doc.doc_id,
            doc.bootstrap.rounds.len(),
            injected,
            doc.reused_from.as_deref().unwrap_or("-"),
            doc.accuracy.map(|a| a.to_string()).unwrap_or_else(|| "-".to_string()),
        )?;
    }
    write_text(&out.join("report.txt"), &text)?;
    write_manifest(
        &out,
        argv,
        json!({
            "train": args.train.display().to_string(),
            "tests": args.tests.display().to_string(),
            "pool": args.pool.display().to_string(),
            "scheme": scheme,
            "features": feature_set_name(feature_set),
            "config": cfg,
            "train_config": train_config,
        }),
    )?;
    Ok(())
}

fn cmd_repair(args: RepairArgs2, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let records = read_predictions(&args.input)?;
    let scheme = records_scheme(&records)?;

    let mut per_doc: BTreeMap<String, Vec<&PredictionRecord>> = BTreeMap::new();
    for record in &records {
        per_doc.entry(record.doc_id.clone()).or_default().push(record);
    }
    let mut repaired: Vec<PredictionRecord> = Vec::new();
    let mut flagged_total = 0usize;
    for (doc_id, doc_records) in &per_doc {
        let mut graph = WeightedGraph::new(scheme);
        for record in doc_records {
            let posterior = record
                .parsed_posterior()?
                .ok_or_else(|| anyhow::anyhow!("{doc_id}: record without posterior"))?;
            graph.add_edge(&record.source, &record.target, posterior)?;
        }
        let outcome = match args.repair {
            RepairArg::Greedy => greedy_repair(&graph)?,
            RepairArg::Ilp => ilp_repair(&graph)?,
            RepairArg::None => {
                let (graph, objective) = temprel_core::consistency::argmax_labeling(&graph)?;
                temprel_core::consistency::RepairOutcome { graph, objective, flagged: vec![] }
            }
        };
        flagged_total += outcome.flagged.len();
        for record in doc_records {
            let edge = outcome
                .graph
                .edge(&record.source, &record.target)
                .expect("repair preserves edges");
            let label = match edge.value {
                temprel_core::algebra::EdgeValue::Crisp(l) => l,
                _ => unreachable!("repair output is crisp"),
            };
            repaired.push(PredictionRecord {
                doc_id: record.doc_id.clone(),
                source: record.source.clone(),
                target: record.target.clone(),
                scheme,
                label: label.name().to_string(),
                confidence: record.posterior.as_ref().and_then(|p| p.get(label.name()).copied()),
                posterior: record.posterior.clone(),
            });
        }
    }
    repaired.sort_by(|a, b| a.key().cmp(&b.key()));
    write_predictions(&repaired, &out.join("predictions.jsonl"))?;
    write_text(
        &out.join("report.txt"),
        &format!("documents: {}\nflagged edges: {flagged_total}\n", per_doc.len()),
    )?;
    write_manifest(
        &out,
        argv,
        json!({
            "input": args.input.display().to_string(),
            "repair": format!("{:?}", args.repair).to_lowercase(),
        }),
    )?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    if args.cv {
        let input = args.input.as_ref().expect("clap enforces --input with --cv");
        let scheme: Scheme = args.scheme.into();
        let corpus = convert_corpus(&load_corpus(input)?, scheme)?;
        let learner: Box<dyn eval::PairLearner> = match args.learner {
            LearnerArg::Nb => Box::new(eval::NaiveCountLearner { scheme }),
            LearnerArg::Ovo => Box::new(bcdc::OvoLearner {
                scheme,
                feature_set: FeatureSet::BcdcExtra,
                train_config: TrainConfig { seed: args.seed, ..Default::default() },
            }),
        };
        let cv = cross_validate(&corpus, learner.as_ref(), args.folds, args.seed, &args.holdout)?;
        let baseline = majority_baseline(&corpus, scheme)?;
        let report = json!({
            "mode": "cross_validation",
            "folds": cv,
            "majority_label": baseline.0.name(),
            "majority_fraction": baseline.1,
        });
        write_text(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
        let mut text = String::new();
        writeln!(text, "cross-validation over {} folds", args.folds)?;
        for (i, acc) in cv.fold_accuracies.iter().enumerate() {
            writeln!(text, "fold {i}: {acc}")?;
        }
        writeln!(text, "mean accuracy: {}", cv.mean_accuracy)?;
        writeln!(text, "majority baseline: {} {}", baseline.0, baseline.1)?;
        write_text(&out.join("report.txt"), &text)?;
    } else {
        let pred_path = args.pred.as_ref().expect("clap enforces --pred");
        let gold_path = args.gold.as_ref().expect("clap enforces --gold");
        let records = read_predictions(pred_path)?;
        let scheme = records_scheme(&records)?;
        let pred = records_to_labels(&records)?;
        let corpus = load_corpus(gold_path)?;
        let gold = gold_in_scheme(&corpus, scheme)?;
        let acc = accuracy(&pred, &gold)?;
        let confusion = confusion_matrix(&pred, &gold)?;
        let baseline = majority_baseline(&corpus, scheme)?;
        let confusion_rows: Vec<serde_json::Value> = confusion
            .iter()
            .map(|((g, p), count)| json!({ "gold": g.name(), "predicted": p.name(), "count": count }))
            .collect();
        let report = json!({
            "mode": "files",
            "pairs": pred.len(),
            "accuracy": acc,
            "majority_label": baseline.0.name(),
            "majority_fraction": baseline.1,
            "confusion": confusion_rows,
        });
        write_text(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
        let mut text = String::new();
        writeln!(text, "pairs: {}", pred.len())?;
        writeln!(text, "accuracy: {acc}")?;
        writeln!(text, "majority baseline: {} {}", baseline.0, baseline.1)?;
        writeln!(text, "confusion (gold -> predicted):")?;
        for ((g, p), count) in &confusion {
            writeln!(text, "  {g} -> {p}: {count}")?;
        }
        write_text(&out.join("report.txt"), &text)?;
    }
    write_manifest(
        &out,
        argv,
        json!({
            "cv": args.cv,
            "folds": args.folds,
            "holdout": args.holdout,
            "seed": args.seed,
        }),
    )?;
    Ok(())
}

fn cmd_significance(args: SignificanceArgs, argv: &[String]) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let records_a = read_predictions(&args.pred_a)?;
    let records_b = read_predictions(&args.pred_b)?;
    let scheme = records_scheme(&records_a)?;
    if records_scheme(&records_b)? != scheme {
        bail!("prediction files use different schemes");
    }
    let pred_a = records_to_labels(&records_a)?;
    let pred_b = records_to_labels(&records_b)?;
    let corpus = load_corpus(&args.gold)?;
    let gold = gold_in_scheme(&corpus, scheme)?;
    let result = stratified_shuffling(&pred_a, &pred_b, &gold, args.shuffles, args.seed)?;
    write_text(&out.join("result.json"), &serde_json::to_string_pretty(&result)?)?;
    write_text(
        &out.join("result.txt"),
        &format!(
            "observed difference: {}\nnc: {}\nnt: {}\np-value: {}\n",
            result.observed_diff, result.nc, result.nt, result.p_value
        ),
    )?;
    write_manifest(
        &out,
        argv,
        json!({
            "pred_a": args.pred_a.display().to_string(),
            "pred_b": args.pred_b.display().to_string(),
            "gold": args.gold.display().to_string(),
            "shuffles": args.shuffles,
            "seed": args.seed,
        }),
    )?;
    Ok(())
}

fn cmd_rerun(args: RerunArgs) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let mut argv = vec!["temprel".to_string()];
    argv.extend(manifest.argv.iter().cloned());
    let cli = <crate::Cli as clap::Parser>::try_parse_from(&argv)
        .map_err(|e| anyhow::anyhow!("manifest argv does not parse: {e}"))?;
    if matches!(cli.command, Command::Rerun(_)) {
        bail!("manifest re-executes a rerun");
    }
    dispatch(cli.command, &manifest.argv)
}
