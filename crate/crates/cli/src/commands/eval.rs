//! Evaluation commands: match, sweep, roc.

use std::path::PathBuf;

use clap::Args;

use phenolink::classifier::predict_profiles;
use phenolink::dataset;
use phenolink::error::{Error, Result};
use phenolink::matcher::{
    roc_threshold, roc_topk, score_matrix, sweep_matrix, topk_success_matrix, EvalConfig,
    RankingMode, ScoreOptions, SweepRow,
};
use phenolink::profile::PhenotypeProfile;
use phenolink::report::{roc_csv, sweep_csv, svg_line_chart, Series};

use super::data::dataset_inputs;
use super::{
    effective, features_for, load_classifiers, load_config, load_panel, probes_for_mode,
    write_text,
};
use crate::manifest::ManifestBuilder;
use crate::Cli;

/// Inputs shared by the evaluation commands.
#[derive(Args)]
pub struct EvalInputs {
    /// Paired dataset directory to evaluate on.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Fitted conditional model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of trained classifiers (needed for predicted probes).
    #[arg(long)]
    pub classifiers: Option<PathBuf>,
    /// Feature CSV overriding the dataset's features (e.g. perturbed).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Renormalize per-genome variant scores before taking logs.
    #[arg(long)]
    pub normalize_variants: bool,
}

pub(crate) struct EvalContext {
    pub ds: phenolink::synth::PairedDataset,
    pub model: phenolink::ConditionalModel,
    pub truth: Vec<PhenotypeProfile>,
    pub predicted: Option<Vec<PhenotypeProfile>>,
    pub opts: ScoreOptions,
}

pub(crate) fn eval_context(
    cli: &Cli,
    inputs: &EvalInputs,
    manifest: &mut ManifestBuilder,
) -> Result<EvalContext> {
    let panel = load_panel(cli)?;
    dataset_inputs(manifest, &inputs.dataset)?;
    manifest.input(&inputs.model)?;
    if let Some(path) = &inputs.features {
        manifest.input(path)?;
    }
    let ds = dataset::load_dataset(&inputs.dataset, &panel)?;
    let model =
        phenolink::ConditionalModel::from_json(&std::fs::read_to_string(&inputs.model)?)?;
    let truth = ds.profiles();
    let predicted = match &inputs.classifiers {
        Some(dir) => {
            let classifiers = load_classifiers(dir)?;
            let ids: Vec<String> = ds.individuals.iter().map(|i| i.id.clone()).collect();
            let features = features_for(&ds, inputs.features.as_deref())?;
            Some(predict_profiles(&classifiers, &ids, &features, &panel))
        }
        None => None,
    };
    Ok(EvalContext {
        ds,
        model,
        truth,
        predicted,
        opts: ScoreOptions {
            normalize_variants: inputs.normalize_variants,
        },
    })
}

#[derive(Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub inputs: EvalInputs,
    /// Probe source: predicted, oracle-all/true, or oracle:<p1,p2>.
    #[arg(long, default_value = "predicted")]
    pub probes: String,
    /// Score threshold for binary match decisions.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Top-k cutoffs summarized against the identity pairing.
    #[arg(long, value_delimiter = ',')]
    pub ks: Vec<usize>,
}

pub fn match_cmd(cli: &Cli, args: &MatchArgs) -> Result<()> {
    let config = load_config(cli)?;
    let panel = load_panel(cli)?;
    let mut manifest = ManifestBuilder::new(
        "match",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "dataset": args.inputs.dataset.display().to_string(),
            "model": args.inputs.model.display().to_string(),
            "probes": args.probes,
            "theta": args.theta,
            "normalize_variants": args.inputs.normalize_variants,
        }),
    );
    let ctx = eval_context(cli, &args.inputs, &mut manifest)?;
    let probes = probes_for_mode(&args.probes, &ctx.truth, ctx.predicted.as_deref())?;
    let matrix = score_matrix(&probes, &ctx.ds.genotypes(), &ctx.model, ctx.opts);
    let run_id = manifest.run_id();

    let theta = match args.theta {
        Some(t) => Some(t),
        None => effective(None, &config, "theta", None)?,
    };
    let mut csv = String::from(if theta.is_some() {
        "run_id,probe_id,genome_id,score,predicted_match\n"
    } else {
        "run_id,probe_id,genome_id,score\n"
    });
    for (i, probe_id) in matrix.probe_ids.iter().enumerate() {
        for (j, genome_id) in matrix.genome_ids.iter().enumerate() {
            let score = matrix.scores[i][j];
            match theta {
                Some(t) => csv.push_str(&format!(
                    "{run_id},{probe_id},{genome_id},{score},{}\n",
                    (score >= t) as u8
                )),
                None => csv.push_str(&format!("{run_id},{probe_id},{genome_id},{score}\n")),
            }
        }
    }
    write_text(&cli.out_dir.join("scores.csv"), &csv)?;

    let ks = if args.ks.is_empty() {
        vec![1, 5]
    } else {
        args.ks.clone()
    };
    let pairing = ctx.ds.identity_pairing();
    let mut summary = serde_json::Map::new();
    summary.insert("run_id".to_string(), serde_json::json!(run_id));
    for k in ks {
        let success = topk_success_matrix(&matrix, &pairing, k)?;
        summary.insert(format!("top{k}_success"), serde_json::json!(success));
    }
    write_text(
        &cli.out_dir.join("match_summary.json"),
        &serde_json::to_string_pretty(&serde_json::Value::Object(summary))?,
    )?;
    manifest.write(&cli.out_dir)?;
    println!("scored {} probes -> {}", matrix.probe_ids.len(), cli.out_dir.display());
    Ok(())
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: EvalInputs,
    /// Comma-separated modes: predicted, oracle-all, oracle:<list>, random.
    #[arg(long, value_delimiter = ',', default_value = "predicted")]
    pub modes: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Emit a best-effort SVG plot next to the CSV.
    #[arg(long)]
    pub svg: bool,
}

pub fn sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let config = load_config(cli)?;
    let panel = load_panel(cli)?;
    let ks = if args.ks.is_empty() {
        effective(None, &config, "ks", vec![1, 5])?
    } else {
        args.ks.clone()
    };
    let sizes = if args.sizes.is_empty() {
        effective(None, &config, "sizes", vec![10, 20, 50, 100])?
    } else {
        args.sizes.clone()
    };
    let trials = effective(args.trials, &config, "trials", 100)?;
    let mut manifest = ManifestBuilder::new(
        "sweep",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "dataset": args.inputs.dataset.display().to_string(),
            "model": args.inputs.model.display().to_string(),
            "modes": args.modes,
            "ks": ks,
            "sizes": sizes,
            "trials": trials,
            "normalize_variants": args.inputs.normalize_variants,
        }),
    );
    let ctx = eval_context(cli, &args.inputs, &mut manifest)?;
    let eval_config = EvalConfig {
        ks,
        theta: None,
        population_sizes: sizes,
        trials,
        seed: cli.seed,
        oracle_phenotypes: vec![],
    };
    let genotypes = ctx.ds.genotypes();
    let pairing = ctx.ds.identity_pairing();

    let mut blocks: Vec<(String, Vec<SweepRow>)> = Vec::new();
    for mode in &args.modes {
        let probes = probes_for_mode(mode, &ctx.truth, ctx.predicted.as_deref())?;
        let matrix = score_matrix(&probes, &genotypes, &ctx.model, ctx.opts);
        let ranking = if mode == "random" {
            RankingMode::Random
        } else {
            RankingMode::Scores
        };
        let rows = sweep_matrix(&matrix, &pairing, &eval_config, ranking)?;
        blocks.push((mode.clone(), rows));
    }
    let run_id = manifest.run_id();
    write_text(&cli.out_dir.join("sweep.csv"), &sweep_csv(&run_id, &blocks))?;
    if args.svg {
        let series: Vec<Series> = blocks
            .iter()
            .flat_map(|(mode, rows)| {
                eval_config.ks.iter().map(move |&k| Series {
                    label: format!("{mode} k={k}"),
                    points: rows
                        .iter()
                        .filter(|r| r.k == k)
                        .map(|r| (r.population_size as f64, r.mean))
                        .collect(),
                })
            })
            .collect();
        write_text(
            &cli.out_dir.join("sweep.svg"),
            &svg_line_chart("top-k success vs population size", "population size", "success", &series),
        )?;
    }
    manifest.write(&cli.out_dir)?;
    println!("sweep over {} modes -> {}", blocks.len(), cli.out_dir.display());
    Ok(())
}

#[derive(Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub inputs: EvalInputs,
    /// Probe source, as in `match`.
    #[arg(long, default_value = "predicted")]
    pub probes: String,
    /// Decision schemes: topk, threshold.
    #[arg(long, value_delimiter = ',', default_value = "topk,threshold")]
    pub schemes: Vec<String>,
    #[arg(long)]
    pub svg: bool,
}

pub fn roc(cli: &Cli, args: &RocArgs) -> Result<()> {
    let panel = load_panel(cli)?;
    let mut manifest = ManifestBuilder::new(
        "roc",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "dataset": args.inputs.dataset.display().to_string(),
            "model": args.inputs.model.display().to_string(),
            "probes": args.probes,
            "schemes": args.schemes,
            "normalize_variants": args.inputs.normalize_variants,
        }),
    );
    let ctx = eval_context(cli, &args.inputs, &mut manifest)?;
    let probes = probes_for_mode(&args.probes, &ctx.truth, ctx.predicted.as_deref())?;
    let matrix = score_matrix(&probes, &ctx.ds.genotypes(), &ctx.model, ctx.opts);
    let pairing = ctx.ds.identity_pairing();

    let mut blocks = Vec::new();
    let mut aucs = serde_json::Map::new();
    for scheme in &args.schemes {
        let curve = match scheme.as_str() {
            "topk" => roc_topk(&matrix, &pairing)?,
            "threshold" => roc_threshold(&matrix, &pairing)?,
            other => {
                return Err(Error::InvalidConfig {
                    field: "schemes".to_string(),
                    msg: format!("unknown scheme {other:?}"),
                })
            }
        };
        aucs.insert(format!("{scheme}_auc"), serde_json::json!(curve.auc));
        blocks.push((scheme.clone(), curve.points));
    }
    let run_id = manifest.run_id();
    aucs.insert("run_id".to_string(), serde_json::json!(run_id));
    write_text(&cli.out_dir.join("roc.csv"), &roc_csv(&run_id, &blocks))?;
    write_text(
        &cli.out_dir.join("auc.json"),
        &serde_json::to_string_pretty(&serde_json::Value::Object(aucs))?,
    )?;
    if args.svg {
        let series: Vec<Series> = blocks
            .iter()
            .map(|(scheme, points)| Series {
                label: scheme.clone(),
                points: points.iter().map(|p| (p.fpr, p.tpr)).collect(),
            })
            .collect();
        write_text(
            &cli.out_dir.join("roc.svg"),
            &svg_line_chart("ROC", "false positive rate", "true positive rate", &series),
        )?;
    }
    manifest.write(&cli.out_dir)?;
    println!("roc over {} schemes -> {}", blocks.len(), cli.out_dir.display());
    Ok(())
}
