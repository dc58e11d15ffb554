//! The attack command: universal noise or single-phenotype PGD over a
//! dataset's features.

use std::path::PathBuf;

use clap::Args;

use phenolink::adversary::{
    perturb_features_pgd, perturb_features_universal, AttackConfig, Optimizer, UniversalKind,
};
use phenolink::dataset::{self, write_features_csv};
use phenolink::error::{Error, Result};
use phenolink::matcher::ScoreOptions;
use phenolink::panel::Phenotype;
use phenolink::rng::derive_seed;

use super::data::dataset_inputs;
use super::{effective, load_classifiers, load_config, load_panel, write_text};
use crate::manifest::ManifestBuilder;
use crate::Cli;

#[derive(Args)]
pub struct AttackArgs {
    /// Paired dataset whose features are perturbed.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Fitted conditional model JSON (weights of the universal objective).
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of trained classifiers.
    #[arg(long)]
    pub classifiers: PathBuf,
    /// `universal` or `pgd:<phenotype>`.
    #[arg(long)]
    pub mode: String,
    /// L-infinity budget in feature units.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Sign-gradient step size (PGD modes).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Adam learning rate (universal mode).
    #[arg(long)]
    pub adam_lr: Option<f64>,
    /// Start PGD from a random point in the budget box.
    #[arg(long)]
    pub random_start: bool,
    /// Universal objective: `log` (score surrogate) or `prob` (sensitivity).
    #[arg(long, default_value = "log")]
    pub objective: String,
    #[arg(long)]
    pub normalize_variants: bool,
}

pub fn attack(cli: &Cli, args: &AttackArgs) -> Result<()> {
    let panel = load_panel(cli)?;
    let config = load_config(cli)?;
    let epsilon = effective(args.epsilon, &config, "epsilon", 0.3)?;
    let kind = match args.objective.as_str() {
        "log" => UniversalKind::LogWeighted,
        "prob" => UniversalKind::ProbWeighted,
        other => {
            return Err(Error::InvalidConfig {
                field: "objective".to_string(),
                msg: format!("expected log or prob, got {other:?}"),
            })
        }
    };
    let mut manifest = ManifestBuilder::new(
        "attack",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "dataset": args.dataset.display().to_string(),
            "model": args.model.display().to_string(),
            "classifiers": args.classifiers.display().to_string(),
            "mode": args.mode,
            "epsilon": epsilon,
            "alpha": args.alpha,
            "iterations": args.iterations,
            "adam_lr": args.adam_lr,
            "random_start": args.random_start,
            "objective": args.objective,
            "normalize_variants": args.normalize_variants,
        }),
    );
    dataset_inputs(&mut manifest, &args.dataset)?;
    manifest.input(&args.model)?;

    let ds = dataset::load_dataset(&args.dataset, &panel)?;
    let model = phenolink::ConditionalModel::from_json(&std::fs::read_to_string(&args.model)?)?;
    let classifiers = load_classifiers(&args.classifiers)?;
    let ids: Vec<String> = ds.individuals.iter().map(|i| i.id.clone()).collect();
    let features: Vec<_> = ds.individuals.iter().map(|i| i.features.clone()).collect();
    let opts = ScoreOptions {
        normalize_variants: args.normalize_variants,
    };
    let run_id = manifest.run_id();

    let perturbed = if args.mode == "universal" {
        let mut cfg = AttackConfig::adam(epsilon);
        if let Some(iters) = args.iterations {
            cfg.iterations = iters;
        }
        if let Some(lr) = args.adam_lr {
            if let Optimizer::Adam { lr: ref mut l, .. } = cfg.optimizer {
                *l = lr;
            }
        }
        cfg.validate()?;
        let genotypes = ds.genotypes();
        let results = perturb_features_universal(
            &classifiers,
            &features,
            &genotypes,
            &model,
            &cfg,
            kind,
            opts,
        )?;
        let traces: Vec<serde_json::Value> = ids
            .iter()
            .zip(&results)
            .map(|(id, (_, trace))| {
                serde_json::json!({
                    "id": id,
                    "trace": trace,
                })
            })
            .collect();
        write_text(
            &cli.out_dir.join("traces.json"),
            &serde_json::to_string_pretty(&serde_json::json!({
                "run_id": run_id,
                "traces": traces,
            }))?,
        )?;
        results.into_iter().map(|(f, _)| f).collect::<Vec<_>>()
    } else if let Some(name) = args.mode.strip_prefix("pgd:") {
        let phenotype = Phenotype::from_name(name).ok_or_else(|| Error::InvalidConfig {
            field: "mode".to_string(),
            msg: format!("unknown phenotype {name:?}"),
        })?;
        let mut cfg = AttackConfig::pgd(epsilon);
        if let Some(alpha) = args.alpha {
            cfg.alpha = alpha;
        }
        if let Some(iters) = args.iterations {
            cfg.iterations = iters;
        }
        cfg.random_start = args.random_start;
        cfg.seed = derive_seed(cli.seed, &[0x7067, phenotype.index() as u64]);
        cfg.validate()?;
        let labels: Vec<usize> = ds
            .individuals
            .iter()
            .map(|i| {
                panel
                    .variant_index(phenotype, i.profile.variant(phenotype))
                    .expect("profile variants are panel-valid")
            })
            .collect();
        perturb_features_pgd(&classifiers[&phenotype], &features, &labels, &ids, &cfg)?
    } else {
        return Err(Error::InvalidConfig {
            field: "mode".to_string(),
            msg: format!("expected universal or pgd:<phenotype>, got {:?}", args.mode),
        });
    };

    write_text(
        &cli.out_dir.join("features_adv.csv"),
        &write_features_csv(&ids, &perturbed),
    )?;
    manifest.write(&cli.out_dir)?;
    println!(
        "perturbed {} feature vectors ({}) -> {}",
        perturbed.len(),
        args.mode,
        cli.out_dir.display()
    );
    Ok(())
}
