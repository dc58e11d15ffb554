//! Subcommand implementations.

mod attack;
mod data;
mod eval;
mod learn;
mod report;

pub use attack::{attack, AttackArgs};
pub use data::{fit, ingest, synth, FitArgs, IngestArgs, SynthArgs};
pub use eval::{match_cmd, roc, sweep, MatchArgs, RocArgs, SweepArgs};
pub use learn::{advtrain, train, AdvtrainArgs, TrainArgs};
pub use report::{report, ReportArgs};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use phenolink::classifier::PhenotypeClassifier;
use phenolink::dataset;
use phenolink::error::{Error, Result};
use phenolink::panel::{Phenotype, SnpPanel};
use phenolink::profile::PhenotypeProfile;
use phenolink::synth::FeatureVector;

use crate::Cli;

pub(crate) fn load_panel(cli: &Cli) -> Result<SnpPanel> {
    match &cli.panel {
        Some(path) => SnpPanel::from_json(&std::fs::read_to_string(path)?),
        None => Ok(SnpPanel::default()),
    }
}

/// The merged config object: the --config file's JSON or an empty object.
pub(crate) fn load_config(cli: &Cli) -> Result<serde_json::Value> {
    match &cli.config {
        Some(path) => {
            let value: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(path)?)?;
            if !value.is_object() {
                return Err(Error::InvalidConfig {
                    field: "config".to_string(),
                    msg: "config file must hold a JSON object".to_string(),
                });
            }
            Ok(value)
        }
        None => Ok(serde_json::json!({})),
    }
}

/// Read a config field, failing with the field's name on a type mismatch.
pub(crate) fn cfg_field<T: serde::de::DeserializeOwned>(
    config: &serde_json::Value,
    key: &str,
) -> Result<Option<T>> {
    match config.get(key) {
        None => Ok(None),
        Some(value) => serde_json::from_value(value.clone())
            .map(Some)
            .map_err(|e| Error::InvalidConfig {
                field: key.to_string(),
                msg: e.to_string(),
            }),
    }
}

/// Effective value: explicit flag beats config file beats default.
pub(crate) fn effective<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    config: &serde_json::Value,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(cfg_field(config, key)?.unwrap_or(default))
}

pub(crate) fn classifier_path(dir: &Path, p: Phenotype) -> PathBuf {
    dir.join(format!("classifier_{}.json", p.name()))
}

pub(crate) fn load_classifiers(dir: &Path) -> Result<BTreeMap<Phenotype, PhenotypeClassifier>> {
    let mut out = BTreeMap::new();
    for p in Phenotype::ALL {
        let path = classifier_path(dir, p);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::Data(format!("cannot read classifier {}: {e}", path.display()))
        })?;
        out.insert(p, PhenotypeClassifier::from_json(&text)?);
    }
    Ok(out)
}

pub(crate) fn save_classifiers(
    dir: &Path,
    classifiers: &BTreeMap<Phenotype, PhenotypeClassifier>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (p, model) in classifiers {
        std::fs::write(classifier_path(dir, *p), model.to_json())?;
    }
    Ok(())
}

/// Features for a dataset's individuals: the dataset's own features.csv or
/// an override file (e.g. perturbed features from an attack run), keyed and
/// ordered by individual id.
pub(crate) fn features_for(
    ds: &phenolink::synth::PairedDataset,
    override_path: Option<&Path>,
) -> Result<Vec<FeatureVector>> {
    match override_path {
        None => Ok(ds.individuals.iter().map(|i| i.features.clone()).collect()),
        Some(path) => {
            let rows = dataset::read_features_csv(&std::fs::read_to_string(path)?)?;
            let by_id: BTreeMap<&str, &FeatureVector> =
                rows.iter().map(|(id, f)| (id.as_str(), f)).collect();
            ds.individuals
                .iter()
                .map(|i| {
                    by_id
                        .get(i.id.as_str())
                        .map(|f| (*f).clone())
                        .ok_or_else(|| Error::Data(format!("no features for {}", i.id)))
                })
                .collect()
        }
    }
}

/// Parse a comma-separated phenotype list ("eye" or "eye,skin").
pub(crate) fn parse_phenotypes(list: &str) -> Result<Vec<Phenotype>> {
    list.split(',')
        .map(|name| {
            Phenotype::from_name(name.trim()).ok_or_else(|| Error::InvalidConfig {
                field: "phenotypes".to_string(),
                msg: format!("unknown phenotype {name:?}"),
            })
        })
        .collect()
}

/// Probe profiles for an evaluation mode.
pub(crate) fn probes_for_mode(
    mode: &str,
    truth: &[PhenotypeProfile],
    predicted: Option<&[PhenotypeProfile]>,
) -> Result<Vec<PhenotypeProfile>> {
    let need_predicted = || {
        predicted.map(<[PhenotypeProfile]>::to_vec).ok_or_else(|| Error::InvalidConfig {
            field: "mode".to_string(),
            msg: format!("mode {mode} needs classifiers (predicted probes)"),
        })
    };
    match mode {
        "predicted" | "random" => need_predicted(),
        "oracle-all" | "true" => Ok(truth.to_vec()),
        other => match other.strip_prefix("oracle:") {
            Some(list) => {
                let phenotypes = parse_phenotypes(list)?;
                let predicted = need_predicted()?;
                Ok(predicted
                    .iter()
                    .zip(truth)
                    .map(|(p, t)| phenolink::profile::oracle_substitute(p, t, &phenotypes))
                    .collect())
            }
            None => Err(Error::InvalidConfig {
                field: "mode".to_string(),
                msg: format!("unknown mode {other:?}"),
            }),
        },
    }
}

pub(crate) fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}
