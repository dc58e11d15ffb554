//! Model-training commands: train, advtrain.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use phenolink::adversary::{adversarial_train, adversarial_train_config, AttackConfig};
use phenolink::classifier::{
    accuracy, labeled_features, train as train_classifier, train_test_split, Architecture,
    TrainConfig,
};
use phenolink::dataset;
use phenolink::error::{Error, Result};
use phenolink::panel::Phenotype;
use phenolink::rng::derive_seed;

use super::data::dataset_inputs;
use super::{effective, load_classifiers, load_config, load_panel, save_classifiers, write_text};
use crate::manifest::ManifestBuilder;
use crate::Cli;

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory providing features.csv and phenotypes.csv.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Fraction of individuals used for training; the rest report test accuracy.
    #[arg(long)]
    pub train_frac: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Hidden width of the one-hidden-layer architecture.
    #[arg(long, conflicts_with = "linear")]
    pub hidden: Option<usize>,
    /// Use the linear-softmax architecture.
    #[arg(long)]
    pub linear: bool,
    /// Subsample every class to the smallest class before training.
    #[arg(long)]
    pub balance: bool,
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let panel = load_panel(cli)?;
    let config = load_config(cli)?;
    let train_frac = effective(args.train_frac, &config, "train_frac", 0.6)?;
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(Error::InvalidConfig {
            field: "train_frac".to_string(),
            msg: format!("must be in [0,1], got {train_frac}"),
        });
    }
    let architecture = if args.linear {
        Architecture::LinearSoftmax
    } else {
        Architecture::OneHidden {
            width: effective(args.hidden, &config, "hidden", 16)?,
        }
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: effective(args.learning_rate, &config, "learning_rate", defaults.learning_rate)?,
        epochs: effective(args.epochs, &config, "epochs", defaults.epochs)?,
        batch_size: effective(args.batch_size, &config, "batch_size", defaults.batch_size)?,
        seed: cli.seed,
        l2_penalty: effective(args.l2, &config, "l2", defaults.l2_penalty)?,
        architecture,
        balance_classes: args.balance,
    };

    let mut manifest = ManifestBuilder::new(
        "train",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "dataset": args.dataset.display().to_string(),
            "train_frac": train_frac,
            "train": serde_json::to_value(&cfg)?,
        }),
    );
    dataset_inputs(&mut manifest, &args.dataset)?;

    let ds = dataset::load_dataset(&args.dataset, &panel)?;
    let features: Vec<_> = ds.individuals.iter().map(|i| i.features.clone()).collect();
    let profiles = ds.profiles();
    let (train_idx, test_idx) = train_test_split(profiles.len(), train_frac, cli.seed);

    let mut classifiers = BTreeMap::new();
    let mut metrics = BTreeMap::new();
    for p in Phenotype::ALL {
        let (inputs, labels) = labeled_features(&features, &profiles, &panel, p);
        let tr_in: Vec<Vec<f64>> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
        let tr_la: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let model = train_classifier(p, panel.variants(p).to_vec(), &tr_in, &tr_la, &cfg)?;
        let train_acc = accuracy(&model, &tr_in, &tr_la);
        let test_acc = if test_idx.is_empty() {
            None
        } else {
            let te_in: Vec<Vec<f64>> = test_idx.iter().map(|&i| inputs[i].clone()).collect();
            let te_la: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
            Some(accuracy(&model, &te_in, &te_la))
        };
        metrics.insert(
            p.name().to_string(),
            serde_json::json!({
                "train_accuracy": train_acc,
                "test_accuracy": test_acc,
                "final_loss": model.train_loss,
            }),
        );
        classifiers.insert(p, model);
    }
    save_classifiers(&cli.out_dir, &classifiers)?;
    let run_id = manifest.run_id();
    write_text(
        &cli.out_dir.join("metrics.json"),
        &serde_json::to_string_pretty(&serde_json::json!({
            "run_id": run_id,
            "metrics": metrics,
        }))?,
    )?;
    manifest.write(&cli.out_dir)?;
    println!("trained 4 classifiers -> {}", cli.out_dir.display());
    Ok(())
}

#[derive(Args)]
pub struct AdvtrainArgs {
    /// Dataset directory providing the training features and labels.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory with the classifiers to harden.
    #[arg(long)]
    pub classifiers: PathBuf,
    /// Training perturbation budget.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Adversarial passes (paired generate-and-train rounds).
    #[arg(long)]
    pub passes: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Fraction of individuals used for training (matches `train`).
    #[arg(long)]
    pub train_frac: Option<f64>,
}

pub fn advtrain(cli: &Cli, args: &AdvtrainArgs) -> Result<()> {
    let panel = load_panel(cli)?;
    let config = load_config(cli)?;
    let epsilon = effective(args.epsilon, &config, "epsilon", 0.3)?;
    let passes = effective(args.passes, &config, "passes", 5)?;
    let train_frac = effective(args.train_frac, &config, "train_frac", 0.6)?;
    let defaults = adversarial_train_config(derive_seed(cli.seed, &[0x6164]));
    let tcfg = TrainConfig {
        epochs: effective(args.epochs, &config, "epochs", defaults.epochs)?,
        learning_rate: effective(args.learning_rate, &config, "learning_rate", defaults.learning_rate)?,
        batch_size: effective(args.batch_size, &config, "batch_size", defaults.batch_size)?,
        l2_penalty: effective(args.l2, &config, "l2", defaults.l2_penalty)?,
        ..defaults
    };

    let mut manifest = ManifestBuilder::new(
        "advtrain",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "dataset": args.dataset.display().to_string(),
            "classifiers": args.classifiers.display().to_string(),
            "epsilon": epsilon,
            "passes": passes,
            "train_frac": train_frac,
            "train": serde_json::to_value(&tcfg)?,
        }),
    );
    dataset_inputs(&mut manifest, &args.dataset)?;

    let ds = dataset::load_dataset(&args.dataset, &panel)?;
    let features: Vec<_> = ds.individuals.iter().map(|i| i.features.clone()).collect();
    let profiles = ds.profiles();
    let (train_idx, _) = train_test_split(profiles.len(), train_frac, cli.seed);
    let classifiers = load_classifiers(&args.classifiers)?;

    let mut robust = BTreeMap::new();
    for p in Phenotype::ALL {
        let (inputs, labels) = labeled_features(&features, &profiles, &panel, p);
        let tr_in: Vec<Vec<f64>> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
        let tr_la: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let attack = AttackConfig {
            seed: derive_seed(cli.seed, &[0x6174, p.index() as u64]),
            ..AttackConfig::pgd(epsilon)
        };
        robust.insert(
            p,
            adversarial_train(&classifiers[&p], &tr_in, &tr_la, &attack, passes, &tcfg)?,
        );
    }
    save_classifiers(&cli.out_dir, &robust)?;
    manifest.write(&cli.out_dir)?;
    println!(
        "adversarially trained 4 classifiers at eps={epsilon} ({passes} passes) -> {}",
        cli.out_dir.display()
    );
    Ok(())
}
