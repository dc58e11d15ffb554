//! Data commands: ingest, fit, synth.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;

use phenolink::dataset;
use phenolink::error::{Error, Result};
use phenolink::genotype::{parse_genotype_collection, GenotypeRecord};
use phenolink::model::{fit_conditional_tables, FitOptions};
use phenolink::panel::Phenotype;
use phenolink::profile::load_phenotype_labels;
use phenolink::synth::{
    default_noise_levels, generate_pool, pair_ideal, pair_realistic, sample_profiles,
    FeatureLayout, NoiseLevels, PairedDataset, PoolMember, Provenance, WorldConfig,
    DEFAULT_BLOCK_DIM,
};

use super::{cfg_field, effective, load_config, load_panel, write_text};
use crate::manifest::ManifestBuilder;
use crate::Cli;

#[derive(Args)]
pub struct IngestArgs {
    /// Raw genotype inputs: files or directories of per-individual exports,
    /// or consolidated `genotypes.tsv` collections.
    #[arg(long, required = true, num_args = 1..)]
    pub genotypes: Vec<PathBuf>,
    /// Phenotype labels CSV (`id,sex,hair,eye,skin`).
    #[arg(long)]
    pub phenotypes: PathBuf,
}

fn genotype_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

pub fn ingest(cli: &Cli, args: &IngestArgs) -> Result<()> {
    let panel = load_panel(cli)?;
    let mut manifest = ManifestBuilder::new(
        "ingest",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "genotypes": args.genotypes.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "phenotypes": args.phenotypes.display().to_string(),
        }),
    );

    let mut records: Vec<GenotypeRecord> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for file in genotype_files(&args.genotypes)? {
        manifest.input(&file)?;
        let text = std::fs::read_to_string(&file)?;
        let mut parsed = parse_genotype_collection(&text, &panel).inspect_err(|_| {
            eprintln!("while parsing {}", file.display());
        })?;
        if parsed.len() == 1 && parsed[0].individual_id.is_empty() {
            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            parsed[0].individual_id = stem;
        }
        for record in parsed {
            if record.individual_id.is_empty() {
                return Err(Error::Data(format!(
                    "{}: record without an individual id",
                    file.display()
                )));
            }
            if !seen.insert(record.individual_id.clone()) {
                return Err(Error::DuplicateId(record.individual_id));
            }
            records.push(record);
        }
    }

    manifest.input(&args.phenotypes)?;
    let labels = load_phenotype_labels(&std::fs::read_to_string(&args.phenotypes)?, &panel)?;

    // keep only labeled genotypes; every label must have its genotype
    let by_id: BTreeMap<&str, &GenotypeRecord> = records
        .iter()
        .map(|g| (g.individual_id.as_str(), g))
        .collect();
    let pool: Vec<PoolMember> = labels
        .into_iter()
        .map(|profile| {
            let genotype = by_id
                .get(profile.individual_id.as_str())
                .ok_or_else(|| Error::LabelWithoutGenotype(profile.individual_id.clone()))?;
            Ok(PoolMember {
                genotype: (*genotype).clone(),
                profile,
            })
        })
        .collect::<Result<_>>()?;
    if pool.is_empty() {
        return Err(Error::Data("no labeled individuals to ingest".to_string()));
    }

    dataset::write_pool(&cli.out_dir, &pool, &panel, cli.seed)?;
    manifest.write(&cli.out_dir)?;
    println!(
        "ingested {} labeled individuals into {}",
        pool.len(),
        cli.out_dir.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct FitArgs {
    /// Dataset directory (genotypes.tsv + phenotypes.csv).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Add-alpha pseudocount.
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Probability floor applied to every stored distribution.
    #[arg(long)]
    pub floor: Option<f64>,
    /// Output model path (default <out-dir>/model.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let panel = load_panel(cli)?;
    let config = load_config(cli)?;
    let opts = FitOptions {
        smoothing: effective(args.smoothing, &config, "smoothing", 1.0)?,
        probability_floor: effective(args.floor, &config, "floor", 1e-6)?,
    };
    let mut manifest = ManifestBuilder::new(
        "fit",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "dataset": args.dataset.display().to_string(),
            "smoothing": opts.smoothing,
            "floor": opts.probability_floor,
        }),
    );
    manifest.input(&args.dataset.join(dataset::GENOTYPES_FILE))?;
    manifest.input(&args.dataset.join(dataset::PHENOTYPES_FILE))?;

    let pool = dataset::load_pool(&args.dataset, &panel)?;
    let genotypes: Vec<GenotypeRecord> = pool.iter().map(|m| m.genotype.clone()).collect();
    let labels: Vec<_> = pool.iter().map(|m| m.profile.clone()).collect();
    let model = fit_conditional_tables(&genotypes, &labels, &panel, opts)?;

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.out_dir.join("model.json"));
    write_text(&out, &model.to_json())?;
    manifest.write(&cli.out_dir)?;
    println!("fitted model over {} individuals -> {}", pool.len(), out.display());
    Ok(())
}

#[derive(Args)]
pub struct SynthArgs {
    /// Pairing mode: ideal or realistic.
    #[arg(long)]
    pub mode: String,
    /// Number of paired individuals to synthesize (ignored with --profiles).
    #[arg(long)]
    pub count: Option<usize>,
    /// Profiles CSV to pair instead of sampling from the pool.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Existing pool directory; a fresh pool is generated when omitted.
    #[arg(long)]
    pub pool_dir: Option<PathBuf>,
    /// Size of the generated pool.
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Per-phenotype feature block dimension.
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub sigma_sex: Option<f64>,
    #[arg(long)]
    pub sigma_hair: Option<f64>,
    #[arg(long)]
    pub sigma_eye: Option<f64>,
    #[arg(long)]
    pub sigma_skin: Option<f64>,
}

fn noise_from(args: &SynthArgs, config: &serde_json::Value) -> Result<NoiseLevels> {
    let mut noise = default_noise_levels();
    if let Some(map) = cfg_field::<BTreeMap<String, f64>>(config, "sigmas")? {
        for (name, sigma) in map {
            let p = Phenotype::from_name(&name).ok_or_else(|| Error::InvalidConfig {
                field: "sigmas".to_string(),
                msg: format!("unknown phenotype {name:?}"),
            })?;
            noise.insert(p, sigma);
        }
    }
    for (p, flag) in [
        (Phenotype::Sex, args.sigma_sex),
        (Phenotype::Hair, args.sigma_hair),
        (Phenotype::Eye, args.sigma_eye),
        (Phenotype::Skin, args.sigma_skin),
    ] {
        if let Some(s) = flag {
            noise.insert(p, s);
        }
    }
    Ok(noise)
}

pub fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let panel = load_panel(cli)?;
    let config = load_config(cli)?;
    let provenance = match args.mode.as_str() {
        "ideal" => Provenance::Ideal,
        "realistic" => Provenance::Realistic,
        other => {
            return Err(Error::InvalidConfig {
                field: "mode".to_string(),
                msg: format!("expected ideal or realistic, got {other:?}"),
            })
        }
    };
    let count = effective(args.count, &config, "count", 456)?;
    let dims = effective(args.dims, &config, "dims", DEFAULT_BLOCK_DIM)?;
    let noise = noise_from(args, &config)?;
    let mut world: WorldConfig = cfg_field(&config, "world")?.unwrap_or_default();
    if let Some(size) = args.pool_size {
        world.pool_size = size;
    }

    let mut manifest = ManifestBuilder::new(
        "synth",
        cli.seed,
        &panel.to_json(),
        serde_json::json!({
            "mode": args.mode,
            "count": count,
            "profiles": args.profiles.as_ref().map(|p| p.display().to_string()),
            "dims": dims,
            "sigmas": noise.iter().map(|(p, s)| (p.name().to_string(), *s)).collect::<BTreeMap<_, _>>(),
            "world": serde_json::to_value(&world)?,
            "pool_dir": args.pool_dir.as_ref().map(|p| p.display().to_string()),
        }),
    );

    let pool: Vec<PoolMember> = match &args.pool_dir {
        Some(dir) => {
            manifest.input(&dir.join(dataset::GENOTYPES_FILE))?;
            manifest.input(&dir.join(dataset::PHENOTYPES_FILE))?;
            dataset::load_pool(dir, &panel)?
        }
        None => {
            let pool = generate_pool(&panel, &world, cli.seed)?;
            dataset::write_pool(&cli.out_dir.join("pool"), &pool, &panel, cli.seed)?;
            pool
        }
    };

    let profiles = match &args.profiles {
        Some(path) => {
            manifest.input(path)?;
            load_phenotype_labels(&std::fs::read_to_string(path)?, &panel)?
        }
        None => sample_profiles(&pool, &panel, count, cli.seed, "ind-"),
    };
    let pairs = match provenance {
        Provenance::Ideal => {
            let genotypes: Vec<GenotypeRecord> =
                pool.iter().map(|m| m.genotype.clone()).collect();
            let labels: Vec<_> = pool.iter().map(|m| m.profile.clone()).collect();
            let model =
                fit_conditional_tables(&genotypes, &labels, &panel, FitOptions::default())?;
            pair_ideal(&profiles, &pool, &model)?
        }
        Provenance::Realistic => pair_realistic(&profiles, &pool, &panel, cli.seed)?,
        Provenance::Ingested => unreachable!("mode is ideal or realistic"),
    };
    let ds = PairedDataset::build(
        pairs,
        &panel,
        FeatureLayout::uniform(dims),
        noise,
        provenance,
        cli.seed,
    )?;
    dataset::write_dataset(&cli.out_dir, &ds, &panel)?;
    manifest.write(&cli.out_dir)?;
    println!(
        "synthesized {} {} pairs into {}",
        ds.individuals.len(),
        provenance,
        cli.out_dir.display()
    );
    Ok(())
}

pub(crate) fn dataset_inputs(manifest: &mut ManifestBuilder, dir: &Path) -> Result<()> {
    for file in [
        dataset::GENOTYPES_FILE,
        dataset::PHENOTYPES_FILE,
        dataset::FEATURES_FILE,
    ] {
        let path = dir.join(file);
        if path.exists() {
            manifest.input(&path)?;
        }
    }
    Ok(())
}
