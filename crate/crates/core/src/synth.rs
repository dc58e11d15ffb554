//! Synthetic paired datasets: genotype pools with configurable
//! genotype-phenotype fidelity, profile sampling, phenotype-matched
//! genotype pairing (best-candidate and sampled), and surrogate feature
//! vectors whose per-phenotype signal strength is set by a noise level.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{Allele, AllelePair, GenotypeCall, GenotypeRecord};
use crate::model::ConditionalModel;
use crate::panel::{Phenotype, SnpPanel};
use crate::profile::PhenotypeProfile;
use crate::rng::{derive_rng, hash_str};

const WORLD_FREQ_STREAM: u64 = 0x4652_4551;
const WORLD_IND_STREAM: u64 = 0x504f_4f4c;
const PROFILE_STREAM: u64 = 0x5052_4f46;
const FEATURE_STREAM: u64 = 0x4645_4154;
const REALISTIC_STREAM: u64 = 0x5245_414c;

/// A fixed-length surrogate "image": per-phenotype blocks of values in
/// [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn validate(&self) -> Result<()> {
        if self
            .values
            .iter()
            .any(|&v| !(0.0..=1.0).contains(&v) || !v.is_finite())
        {
            return Err(Error::Data("feature value outside [0,1]".to_string()));
        }
        Ok(())
    }
}

/// Block layout of a feature vector: one contiguous block per phenotype,
/// in phenotype order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    dims: BTreeMap<Phenotype, usize>,
}

pub const DEFAULT_BLOCK_DIM: usize = 8;

impl FeatureLayout {
    pub fn new(dims: BTreeMap<Phenotype, usize>) -> Result<FeatureLayout> {
        for p in Phenotype::ALL {
            match dims.get(&p) {
                Some(&d) if d > 0 => {}
                _ => {
                    return Err(Error::InvalidConfig {
                        field: "dims".to_string(),
                        msg: format!("missing or zero dimension for {p}"),
                    })
                }
            }
        }
        Ok(FeatureLayout { dims })
    }

    pub fn uniform(d: usize) -> FeatureLayout {
        FeatureLayout {
            dims: Phenotype::ALL.into_iter().map(|p| (p, d)).collect(),
        }
    }

    pub fn dim(&self, p: Phenotype) -> usize {
        self.dims[&p]
    }

    pub fn dims(&self) -> &BTreeMap<Phenotype, usize> {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.values().sum()
    }

    /// Index range of `p`'s block.
    pub fn block(&self, p: Phenotype) -> std::ops::Range<usize> {
        let mut offset = 0;
        for q in Phenotype::ALL {
            if q == p {
                return offset..offset + self.dims[&q];
            }
            offset += self.dims[&q];
        }
        unreachable!()
    }
}

/// Per-phenotype Gaussian noise levels for feature generation.
pub type NoiseLevels = BTreeMap<Phenotype, f64>;

/// Defaults calibrated so that a default classifier reaches high accuracy
/// on sex (~94%), mid-high accuracy on hair and skin (~92%), and roughly
/// 59% held-out accuracy on eye color, the hardest phenotype.
pub fn default_noise_levels() -> NoiseLevels {
    [
        (Phenotype::Sex, 0.5),
        (Phenotype::Hair, 0.4),
        (Phenotype::Eye, 0.75),
        (Phenotype::Skin, 0.4),
    ]
    .into_iter()
    .collect()
}

/// Deterministic per-variant block center: one-hot-like corners scaled
/// into [0.1, 0.9]. Coordinate j is high iff j mod num_variants equals the
/// variant index.
pub fn variant_center(variant_idx: usize, num_variants: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            if j % num_variants == variant_idx {
                0.9
            } else {
                0.1
            }
        })
        .collect()
}

/// Noise multiplier applied on top of a block's sigma. The first
/// `num_variants` coordinates are low-noise anchors (one per variant); the
/// rest carry the same signal at triple the noise. Models fit on finite
/// data lean on the weak coordinates too, which is what the perturbation
/// attacks exploit and adversarial training unlearns.
pub fn coord_noise_scale(j: usize, num_variants: usize) -> f64 {
    if j < num_variants {
        1.0
    } else {
        3.0
    }
}

/// Generate one feature vector per profile: per-phenotype variant centers
/// plus clipped Gaussian noise, on streams derived per profile id.
pub fn generate_features(
    profiles: &[PhenotypeProfile],
    panel: &SnpPanel,
    layout: &FeatureLayout,
    noise: &NoiseLevels,
    seed: u64,
) -> Result<Vec<FeatureVector>> {
    for p in Phenotype::ALL {
        match noise.get(&p) {
            Some(&s) if s >= 0.0 => {}
            _ => {
                return Err(Error::InvalidConfig {
                    field: "noise".to_string(),
                    msg: format!("missing or negative sigma for {p}"),
                })
            }
        }
    }
    let mut out = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let mut rng = derive_rng(seed, &[FEATURE_STREAM, hash_str(&profile.individual_id)]);
        let mut values = Vec::with_capacity(layout.total_dim());
        for p in Phenotype::ALL {
            let variants = panel.variants(p);
            let idx = panel
                .variant_index(p, profile.variant(p))
                .expect("profile variants are panel-valid");
            let center = variant_center(idx, variants.len(), layout.dim(p));
            let sigma = noise[&p];
            if sigma == 0.0 {
                values.extend(center);
            } else {
                let unit = Normal::new(0.0, 1.0).expect("unit normal");
                values.extend(center.iter().enumerate().map(|(j, &c)| {
                    let scale = sigma * coord_noise_scale(j, variants.len());
                    (c + scale * unit.sample(&mut rng)).clamp(0.0, 1.0)
                }));
            }
        }
        out.push(FeatureVector { values });
    }
    Ok(out)
}

/// One genotype-pool member with its self-reported phenotypes.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolMember {
    pub genotype: GenotypeRecord,
    pub profile: PhenotypeProfile,
}

/// Generative parameters for a synthetic genotype pool. Per phenotype and
/// SNP, each variant gets an alternate-allele frequency spread across
/// `freq_range`, jittered per SNP; calls are two Bernoulli draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    pub pool_size: usize,
    /// Per-call missingness probability, by owning phenotype. Eye SNPs go
    /// missing far more often, mirroring the uneven coverage of the panel
    /// across chip versions.
    pub missing_rates: BTreeMap<Phenotype, f64>,
    /// Per phenotype, variant sampling weights in panel variant order.
    pub variant_weights: BTreeMap<Phenotype, Vec<f64>>,
    /// Per phenotype, (low, high) alternate-allele frequency span across
    /// its variants. Wider spans make SNPs more informative.
    pub freq_ranges: BTreeMap<Phenotype, (f64, f64)>,
    /// Per phenotype, each variant's rank along the frequency span, in
    /// panel variant order. Variants with adjacent ranks are genomically
    /// similar; the defaults put the intermediate shades between the
    /// extremes (eye: blue < intermediate < brown).
    pub freq_rank: BTreeMap<Phenotype, Vec<usize>>,
    /// Uniform jitter applied to each SNP's frequencies.
    pub freq_jitter: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let variant_weights: BTreeMap<Phenotype, Vec<f64>> = [
            (Phenotype::Sex, vec![0.5, 0.5]),
            (Phenotype::Hair, vec![0.25, 0.25, 0.5]),
            (Phenotype::Eye, vec![0.36, 0.45, 0.19]),
            (Phenotype::Skin, vec![0.35, 0.45, 0.2]),
        ]
        .into_iter()
        .collect();
        // eye gets the widest span (12 SNPs dominate matching); hair and
        // skin stay informative but secondary
        let freq_ranges = [
            (Phenotype::Sex, (0.5, 0.5)),
            (Phenotype::Hair, (0.25, 0.75)),
            (Phenotype::Eye, (0.18, 0.82)),
            (Phenotype::Skin, (0.25, 0.75)),
        ]
        .into_iter()
        .collect();
        let missing_rates = [
            (Phenotype::Sex, 0.0),
            (Phenotype::Hair, 0.03),
            (Phenotype::Eye, 0.25),
            (Phenotype::Skin, 0.03),
        ]
        .into_iter()
        .collect();
        let freq_rank = Phenotype::ALL
            .into_iter()
            .map(|p| (p, (0..variant_weights[&p].len()).collect()))
            .collect();
        WorldConfig {
            pool_size: 1200,
            missing_rates,
            variant_weights,
            freq_ranges,
            freq_rank,
            freq_jitter: 0.05,
        }
    }
}

impl WorldConfig {
    fn validate(&self, panel: &SnpPanel) -> Result<()> {
        if self.pool_size < 2 {
            return Err(Error::InvalidConfig {
                field: "pool_size".to_string(),
                msg: "must be >= 2".to_string(),
            });
        }
        for p in Phenotype::ALL {
            match self.missing_rates.get(&p) {
                Some(&r) if (0.0..1.0).contains(&r) => {}
                _ => {
                    return Err(Error::InvalidConfig {
                        field: "missing_rates".to_string(),
                        msg: format!("missing or out-of-range rate for {p}"),
                    })
                }
            }
        }
        for p in Phenotype::ALL {
            let weights = self.variant_weights.get(&p).ok_or_else(|| Error::InvalidConfig {
                field: "variant_weights".to_string(),
                msg: format!("missing weights for {p}"),
            })?;
            if weights.len() != panel.variants(p).len()
                || weights.iter().any(|&w| w < 0.0)
                || weights.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::InvalidConfig {
                    field: "variant_weights".to_string(),
                    msg: format!("bad weights for {p}"),
                });
            }
            if !self.freq_ranges.contains_key(&p) {
                return Err(Error::InvalidConfig {
                    field: "freq_ranges".to_string(),
                    msg: format!("missing range for {p}"),
                });
            }
            let m = panel.variants(p).len();
            match self.freq_rank.get(&p) {
                Some(ranks) if ranks.len() == m => {
                    let mut sorted: Vec<usize> = ranks.clone();
                    sorted.sort_unstable();
                    if sorted != (0..m).collect::<Vec<_>>() {
                        return Err(Error::InvalidConfig {
                            field: "freq_rank".to_string(),
                            msg: format!("ranks for {p} must be a permutation of 0..{m}"),
                        });
                    }
                }
                _ => {
                    return Err(Error::InvalidConfig {
                        field: "freq_rank".to_string(),
                        msg: format!("missing or mis-sized ranks for {p}"),
                    })
                }
            }
        }
        Ok(())
    }
}

/// Reference/alternate allele letters for a SNP, assigned stably by rsID.
fn allele_scheme(rsid: &str) -> (Allele, Allele) {
    const SCHEMES: [(Allele, Allele); 4] = [
        (Allele::A, Allele::G),
        (Allele::C, Allele::T),
        (Allele::A, Allele::C),
        (Allele::G, Allele::T),
    ];
    SCHEMES[(hash_str(rsid) % 4) as usize]
}

/// Alternate-allele frequency for (snp, variant) under a world seed.
fn alt_frequency(
    config: &WorldConfig,
    p: Phenotype,
    rsid: &str,
    variant_idx: usize,
    num_variants: usize,
    seed: u64,
) -> f64 {
    let (lo, hi) = config.freq_ranges[&p];
    let rank = config.freq_rank[&p][variant_idx];
    let base = if num_variants == 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * rank as f64 / (num_variants - 1) as f64
    };
    let mut rng = derive_rng(seed, &[WORLD_FREQ_STREAM, hash_str(rsid), variant_idx as u64]);
    let jitter = config.freq_jitter * (2.0 * rng.gen::<f64>() - 1.0);
    (base + jitter).clamp(0.02, 0.98)
}

fn weighted_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        draw -= w;
        if draw < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Generate a synthetic genotype pool with self-reported phenotypes.
pub fn generate_pool(
    panel: &SnpPanel,
    config: &WorldConfig,
    seed: u64,
) -> Result<Vec<PoolMember>> {
    config.validate(panel)?;
    let mut pool = Vec::with_capacity(config.pool_size);
    for i in 0..config.pool_size {
        let mut rng = derive_rng(seed, &[WORLD_IND_STREAM, i as u64]);
        let id = format!("pool-{i:05}");

        let mut variants: [String; 4] = Default::default();
        for p in Phenotype::ALL {
            let idx = weighted_index(&config.variant_weights[&p], &mut rng);
            variants[p.index()] = panel.variants(p)[idx].clone();
        }
        let profile = PhenotypeProfile::from_canonical(&id, variants);

        let mut calls = BTreeMap::new();
        for (p, rsid) in panel.all_snps() {
            let variant_idx = panel.variant_index(p, profile.variant(p)).unwrap();
            let q = alt_frequency(config, p, rsid, variant_idx, panel.variants(p).len(), seed);
            let call = if rng.gen::<f64>() < config.missing_rates[&p] {
                GenotypeCall::Missing
            } else {
                let (reference, alternate) = allele_scheme(rsid);
                let a = if rng.gen::<f64>() < q { alternate } else { reference };
                let b = if rng.gen::<f64>() < q { alternate } else { reference };
                GenotypeCall::Called(AllelePair::new(a, b))
            };
            calls.insert(rsid.to_string(), call);
        }
        let has_y_calls =
            profile.variant(Phenotype::Sex) == panel.sex_variant(true);
        pool.push(PoolMember {
            genotype: GenotypeRecord {
                individual_id: id,
                calls,
                has_y_calls,
            },
            profile,
        });
    }
    Ok(pool)
}

/// Sample probe profiles from the pool's empirical phenotype distribution,
/// guaranteeing every sampled (hair, eye, skin) combination has at least
/// one pool candidate.
pub fn sample_profiles(
    pool: &[PoolMember],
    panel: &SnpPanel,
    count: usize,
    seed: u64,
    id_prefix: &str,
) -> Vec<PhenotypeProfile> {
    let combos: Vec<&PoolMember> = pool.iter().collect();
    let male = panel.sex_variant(true).to_string();
    let female = panel.sex_variant(false).to_string();
    let male_fraction = pool
        .iter()
        .filter(|m| m.profile.variant(Phenotype::Sex) == male)
        .count() as f64
        / pool.len() as f64;
    (0..count)
        .map(|i| {
            let mut rng = derive_rng(seed, &[PROFILE_STREAM, i as u64]);
            let template = combos[rng.gen_range(0..combos.len())];
            let sex = if rng.gen::<f64>() < male_fraction {
                &male
            } else {
                &female
            };
            let mut variants: [String; 4] = Default::default();
            variants[Phenotype::Sex.index()] = sex.clone();
            for p in [Phenotype::Hair, Phenotype::Eye, Phenotype::Skin] {
                variants[p.index()] = template.profile.variant(p).to_string();
            }
            PhenotypeProfile::from_canonical(&format!("{id_prefix}{i:04}"), variants)
        })
        .collect()
}

/// A profile paired with its assigned genotype.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRecord {
    pub profile: PhenotypeProfile,
    pub genotype: GenotypeRecord,
}

/// Pool candidates with the profile's exact (hair, eye, skin) combination.
/// Sex is not required to match: facial phenotypes are treated as
/// independent of it, and paired records take their sex from the profile.
fn matching_candidates<'a>(
    profile: &PhenotypeProfile,
    pool: &'a [PoolMember],
) -> Vec<&'a PoolMember> {
    pool.iter()
        .filter(|m| m.profile.visible_combo() == profile.visible_combo())
        .collect()
}

/// Adopt a pool genotype for a profile: the paired record inherits the
/// profile's id, and its sex evidence is overridden so the profile's sex
/// is ground truth for the synthetic pair.
fn adopt(profile: &PhenotypeProfile, member: &PoolMember, panel: &SnpPanel) -> PairedRecord {
    let mut genotype = member.genotype.clone();
    genotype.individual_id = profile.individual_id.clone();
    genotype.has_y_calls = profile.variant(Phenotype::Sex) == panel.sex_variant(true);
    PairedRecord {
        profile: profile.clone(),
        genotype,
    }
}

/// Log product-likelihood of the profile's hair/eye/skin variants given a
/// candidate genotype. The sex factor is constant across candidates after
/// adoption, so it plays no part in candidate selection.
fn candidate_log_likelihood(
    profile: &PhenotypeProfile,
    member: &PoolMember,
    model: &ConditionalModel,
) -> f64 {
    [Phenotype::Hair, Phenotype::Eye, Phenotype::Skin]
        .into_iter()
        .map(|p| {
            let idx = model
                .panel()
                .variant_index(p, profile.variant(p))
                .expect("profile variants are panel-valid");
            model.log_variant_given_genome(p, idx, &member.genotype)
        })
        .sum()
}

/// Pair each profile with the phenotype-matching pool genotype that
/// maximizes the likelihood of the profile's variants. Ties keep the
/// earliest pool member.
pub fn pair_ideal(
    profiles: &[PhenotypeProfile],
    pool: &[PoolMember],
    model: &ConditionalModel,
) -> Result<Vec<PairedRecord>> {
    profiles
        .iter()
        .map(|profile| {
            let candidates = matching_candidates(profile, pool);
            if candidates.is_empty() {
                return Err(Error::NoMatchingCandidate(profile.individual_id.clone()));
            }
            let mut best = candidates[0];
            let mut best_ll = candidate_log_likelihood(profile, best, model);
            for &candidate in &candidates[1..] {
                let ll = candidate_log_likelihood(profile, candidate, model);
                if ll > best_ll {
                    best = candidate;
                    best_ll = ll;
                }
            }
            Ok(adopt(profile, best, model.panel()))
        })
        .collect()
}

/// Pair each profile with a uniformly sampled phenotype-matching pool
/// genotype, on a stream derived per profile id.
pub fn pair_realistic(
    profiles: &[PhenotypeProfile],
    pool: &[PoolMember],
    panel: &SnpPanel,
    seed: u64,
) -> Result<Vec<PairedRecord>> {
    profiles
        .iter()
        .map(|profile| {
            let candidates = matching_candidates(profile, pool);
            if candidates.is_empty() {
                return Err(Error::NoMatchingCandidate(profile.individual_id.clone()));
            }
            let mut rng =
                derive_rng(seed, &[REALISTIC_STREAM, hash_str(&profile.individual_id)]);
            let pick = candidates
                .choose(&mut rng)
                .expect("candidates is non-empty");
            Ok(adopt(profile, pick, panel))
        })
        .collect()
}

/// How a paired dataset was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ideal,
    Realistic,
    Ingested,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Ideal => f.write_str("ideal"),
            Provenance::Realistic => f.write_str("realistic"),
            Provenance::Ingested => f.write_str("ingested"),
        }
    }
}

/// One individual of a paired dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedIndividual {
    pub id: String,
    pub features: FeatureVector,
    pub profile: PhenotypeProfile,
    pub genotype: GenotypeRecord,
}

/// A fully assembled paired dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub provenance: Provenance,
    pub seed: u64,
    pub layout: FeatureLayout,
    pub noise: NoiseLevels,
    pub individuals: Vec<PairedIndividual>,
}

impl PairedDataset {
    /// Assemble pairs and features into a dataset, enforcing unique ids
    /// and feature-box validity.
    pub fn build(
        pairs: Vec<PairedRecord>,
        panel: &SnpPanel,
        layout: FeatureLayout,
        noise: NoiseLevels,
        provenance: Provenance,
        seed: u64,
    ) -> Result<PairedDataset> {
        let profiles: Vec<PhenotypeProfile> =
            pairs.iter().map(|p| p.profile.clone()).collect();
        let features = generate_features(&profiles, panel, &layout, &noise, seed)?;
        let mut ids = std::collections::BTreeSet::new();
        let individuals = pairs
            .into_iter()
            .zip(features)
            .map(|(pair, features)| {
                let id = pair.profile.individual_id.clone();
                if !ids.insert(id.clone()) {
                    return Err(Error::DuplicateId(id));
                }
                features.validate()?;
                Ok(PairedIndividual {
                    id,
                    features,
                    profile: pair.profile,
                    genotype: pair.genotype,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairedDataset {
            provenance,
            seed,
            layout,
            noise,
            individuals,
        })
    }

    pub fn profiles(&self) -> Vec<PhenotypeProfile> {
        self.individuals.iter().map(|i| i.profile.clone()).collect()
    }

    pub fn genotypes(&self) -> Vec<GenotypeRecord> {
        self.individuals.iter().map(|i| i.genotype.clone()).collect()
    }

    /// The identity true-pairing: each profile's genome carries its id.
    pub fn identity_pairing(&self) -> BTreeMap<String, String> {
        self.individuals
            .iter()
            .map(|i| (i.id.clone(), i.id.clone()))
            .collect()
    }
}
