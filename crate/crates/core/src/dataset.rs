//! Dataset directories: `genotypes.tsv` (raw genotype documents separated
//! by `# individual:` comments), `phenotypes.csv`, `features.csv` (absent
//! when a dataset has no feature vectors), and `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{
    parse_genotype_collection, serialize_genotype_collection, GenotypeRecord,
};
use crate::panel::{Phenotype, SnpPanel};
use crate::profile::{load_phenotype_labels, write_phenotype_labels, PhenotypeProfile};
use crate::synth::{
    FeatureLayout, FeatureVector, NoiseLevels, PairedDataset, PairedIndividual, PoolMember,
    Provenance,
};

pub const GENOTYPES_FILE: &str = "genotypes.tsv";
pub const PHENOTYPES_FILE: &str = "phenotypes.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Dataset manifest: generation parameters sufficient to regenerate the
/// directory contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub provenance: Provenance,
    pub seed: u64,
    pub count: usize,
    /// Feature block dimensions by phenotype name; absent for datasets
    /// without features.
    pub dims: Option<BTreeMap<String, usize>>,
    /// Feature noise levels by phenotype name.
    pub sigmas: Option<BTreeMap<String, f64>>,
}

fn by_name<V: Copy>(map: &BTreeMap<Phenotype, V>) -> BTreeMap<String, V> {
    map.iter().map(|(p, &v)| (p.name().to_string(), v)).collect()
}

fn from_names<V: Copy>(map: &BTreeMap<String, V>) -> Result<BTreeMap<Phenotype, V>> {
    map.iter()
        .map(|(name, &v)| {
            Phenotype::from_name(name)
                .map(|p| (p, v))
                .ok_or_else(|| Error::Data(format!("unknown phenotype {name} in manifest")))
        })
        .collect()
}

/// Serialize features as CSV: `id,f0,...,f{D-1}`.
pub fn write_features_csv(ids: &[String], features: &[FeatureVector]) -> String {
    let dim = features.first().map(|f| f.values.len()).unwrap_or(0);
    let mut out = String::from("id");
    for i in 0..dim {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for (id, f) in ids.iter().zip(features) {
        out.push_str(id);
        for v in &f.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_features_csv(text: &str) -> Result<Vec<(String, FeatureVector)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::Parse {
                line: i + 2,
                msg: "feature row needs id and at least one value".to_string(),
            });
        }
        let id = row[0].to_string();
        let values: Vec<f64> = row
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    msg: format!("bad feature value {v:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let f = FeatureVector { values };
        f.validate()?;
        out.push((id, f));
    }
    Ok(out)
}

/// Write a paired dataset as a directory.
pub fn write_dataset(dir: &Path, dataset: &PairedDataset, panel: &SnpPanel) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ids: Vec<String> = dataset.individuals.iter().map(|i| i.id.clone()).collect();
    let genotypes: Vec<GenotypeRecord> = dataset.genotypes();
    let profiles: Vec<PhenotypeProfile> = dataset.profiles();
    let features: Vec<FeatureVector> = dataset
        .individuals
        .iter()
        .map(|i| i.features.clone())
        .collect();
    fs::write(
        dir.join(GENOTYPES_FILE),
        serialize_genotype_collection(&genotypes, panel),
    )?;
    fs::write(dir.join(PHENOTYPES_FILE), write_phenotype_labels(&profiles))?;
    fs::write(dir.join(FEATURES_FILE), write_features_csv(&ids, &features))?;
    let manifest = DatasetManifest {
        provenance: dataset.provenance,
        seed: dataset.seed,
        count: dataset.individuals.len(),
        dims: Some(by_name(dataset.layout.dims())),
        sigmas: Some(by_name(&dataset.noise)),
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Load a paired dataset directory. The manifest's layout is used when
/// present; otherwise a uniform layout is inferred from the feature width.
pub fn load_dataset(dir: &Path, panel: &SnpPanel) -> Result<PairedDataset> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let genotypes =
        parse_genotype_collection(&fs::read_to_string(dir.join(GENOTYPES_FILE))?, panel)?;
    let profiles =
        load_phenotype_labels(&fs::read_to_string(dir.join(PHENOTYPES_FILE))?, panel)?;
    let features = read_features_csv(&fs::read_to_string(dir.join(FEATURES_FILE))?)?;

    let genotype_by_id: BTreeMap<&str, &GenotypeRecord> = genotypes
        .iter()
        .map(|g| (g.individual_id.as_str(), g))
        .collect();
    let feature_by_id: BTreeMap<&str, &FeatureVector> =
        features.iter().map(|(id, f)| (id.as_str(), f)).collect();

    let layout = match &manifest.dims {
        Some(dims) => FeatureLayout::new(from_names(dims)?)?,
        None => {
            return Err(Error::Data(
                "dataset manifest is missing feature dims".to_string(),
            ))
        }
    };
    let noise: NoiseLevels = match &manifest.sigmas {
        Some(sigmas) => from_names(sigmas)?,
        None => {
            return Err(Error::Data(
                "dataset manifest is missing feature sigmas".to_string(),
            ))
        }
    };

    let individuals = profiles
        .into_iter()
        .map(|profile| {
            let id = profile.individual_id.clone();
            let genotype = genotype_by_id
                .get(id.as_str())
                .ok_or_else(|| Error::LabelWithoutGenotype(id.clone()))?;
            let features = feature_by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("no features for {id}")))?;
            if features.values.len() != layout.total_dim() {
                return Err(Error::DimensionMismatch {
                    expected: layout.total_dim(),
                    got: features.values.len(),
                });
            }
            Ok(PairedIndividual {
                id,
                features: (*features).clone(),
                profile,
                genotype: (*genotype).clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PairedDataset {
        provenance: manifest.provenance,
        seed: manifest.seed,
        layout,
        noise,
        individuals,
    })
}

/// Write a genotype pool (genotypes + self-reported labels, no features).
pub fn write_pool(dir: &Path, pool: &[PoolMember], panel: &SnpPanel, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let genotypes: Vec<GenotypeRecord> = pool.iter().map(|m| m.genotype.clone()).collect();
    let profiles: Vec<PhenotypeProfile> = pool.iter().map(|m| m.profile.clone()).collect();
    fs::write(
        dir.join(GENOTYPES_FILE),
        serialize_genotype_collection(&genotypes, panel),
    )?;
    fs::write(dir.join(PHENOTYPES_FILE), write_phenotype_labels(&profiles))?;
    let manifest = DatasetManifest {
        provenance: Provenance::Ingested,
        seed,
        count: pool.len(),
        dims: None,
        sigmas: None,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Load genotype + phenotype pairs from a directory that may or may not
/// carry features (an ingested dataset or an emitted pool).
pub fn load_pool(dir: &Path, panel: &SnpPanel) -> Result<Vec<PoolMember>> {
    let genotypes =
        parse_genotype_collection(&fs::read_to_string(dir.join(GENOTYPES_FILE))?, panel)?;
    let profiles =
        load_phenotype_labels(&fs::read_to_string(dir.join(PHENOTYPES_FILE))?, panel)?;
    let genotype_by_id: BTreeMap<&str, &GenotypeRecord> = genotypes
        .iter()
        .map(|g| (g.individual_id.as_str(), g))
        .collect();
    profiles
        .into_iter()
        .map(|profile| {
            let genotype = genotype_by_id
                .get(profile.individual_id.as_str())
                .ok_or_else(|| Error::LabelWithoutGenotype(profile.individual_id.clone()))?;
            Ok(PoolMember {
                genotype: (*genotype).clone(),
                profile,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fit_conditional_tables, FitOptions};
    use crate::synth::{
        default_noise_levels, generate_pool, pair_realistic, sample_profiles, WorldConfig,
    };

    #[test]
    fn dataset_directory_roundtrips() {
        let panel = SnpPanel::default();
        let config = WorldConfig {
            pool_size: 50,
            ..WorldConfig::default()
        };
        let pool = generate_pool(&panel, &config, 1).unwrap();
        let profiles = sample_profiles(&pool, &panel, 12, 2, "d-");
        let pairs = pair_realistic(&profiles, &pool, &panel, 3).unwrap();
        let dataset = PairedDataset::build(
            pairs,
            &panel,
            FeatureLayout::uniform(8),
            default_noise_levels(),
            Provenance::Realistic,
            3,
        )
        .unwrap();

        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &dataset, &panel).unwrap();
        let back = load_dataset(dir.path(), &panel).unwrap();
        assert_eq!(dataset.provenance, back.provenance);
        assert_eq!(dataset.individuals.len(), back.individuals.len());
        for (a, b) in dataset.individuals.iter().zip(&back.individuals) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.profile, b.profile);
            assert_eq!(a.genotype, b.genotype);
            assert_eq!(a.features, b.features); // exact float round-trip
        }
    }

    #[test]
    fn pool_directory_roundtrips() {
        let panel = SnpPanel::default();
        let config = WorldConfig {
            pool_size: 30,
            ..WorldConfig::default()
        };
        let pool = generate_pool(&panel, &config, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_pool(dir.path(), &pool, &panel, 4).unwrap();
        let back = load_pool(dir.path(), &panel).unwrap();
        assert_eq!(pool, back);
        // a reloaded pool still fits a model
        let genotypes: Vec<GenotypeRecord> = back.iter().map(|m| m.genotype.clone()).collect();
        let profiles: Vec<PhenotypeProfile> = back.iter().map(|m| m.profile.clone()).collect();
        fit_conditional_tables(&genotypes, &profiles, &panel, FitOptions::default()).unwrap();
    }

    #[test]
    fn features_csv_roundtrips_exactly() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let features = vec![
            FeatureVector {
                values: vec![0.123456789012345, 1.0, 0.0],
            },
            FeatureVector {
                values: vec![0.9999999999, 0.5, 1e-12],
            },
        ];
        let csv = write_features_csv(&ids, &features);
        let back = read_features_csv(&csv).unwrap();
        assert_eq!(back.len(), 2);
        for ((id, f), (eid, ef)) in back.iter().zip(ids.iter().zip(&features)) {
            assert_eq!(id, eid);
            assert_eq!(f.values, ef.values);
        }
    }

    #[test]
    fn out_of_box_features_are_rejected() {
        let csv = "id,f0,f1\nx,0.5,1.5\n";
        assert!(read_features_csv(csv).is_err());
    }
}
