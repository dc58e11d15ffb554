//! The empirical genotype-to-phenotype model: per-SNP conditional tables
//! P(variant | call) with variant priors used where calls are absent.
//!
//! Per-variant scores over a genome are raw products of per-SNP factors,
//! not renormalized across variants; ranking over genomes only needs the
//! factors to be comparable. An optional normalized view is provided for
//! sensitivity analysis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{AllelePair, GenotypeCall, GenotypeRecord};
use crate::panel::{Phenotype, SnpPanel};
use crate::profile::PhenotypeProfile;

pub const DEFAULT_SMOOTHING: f64 = 1.0;
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Add-alpha pseudocount applied to every (call, variant) cell.
    pub smoothing: f64,
    /// Lower bound applied to every stored probability; keeps all log
    /// terms finite.
    pub probability_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            smoothing: DEFAULT_SMOOTHING,
            probability_floor: DEFAULT_PROBABILITY_FLOOR,
        }
    }
}

/// Fitted conditional tables and priors over the panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalModel {
    panel: SnpPanel,
    smoothing: f64,
    probability_floor: f64,
    /// Per phenotype, a distribution over its variants (panel order).
    priors: BTreeMap<Phenotype, Vec<f64>>,
    /// Per panel rsID, per observed call, a distribution over the owning
    /// phenotype's variants.
    tables: BTreeMap<String, BTreeMap<AllelePair, Vec<f64>>>,
}

/// Clamp a raw distribution to `floor` and renormalize, repeating until both
/// the floor and the unit sum hold simultaneously.
fn floor_and_normalize(raw: &[f64], floor: f64) -> Vec<f64> {
    let m = raw.len();
    debug_assert!(floor * m as f64 <= 1.0);
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|&x| x / total).collect();
    let mut fixed = vec![false; m];
    loop {
        let fixed_count = fixed.iter().filter(|&&f| f).count();
        let free_sum: f64 = p
            .iter()
            .zip(&fixed)
            .filter(|(_, &f)| !f)
            .map(|(&x, _)| x)
            .sum();
        let target = 1.0 - floor * fixed_count as f64;
        let scale = target / free_sum;
        let mut changed = false;
        for i in 0..m {
            if !fixed[i] && p[i] * scale < floor {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            for i in 0..m {
                p[i] = if fixed[i] { floor } else { p[i] * scale };
            }
            return p;
        }
    }
}

fn validate_options(panel: &SnpPanel, opts: &FitOptions) -> Result<()> {
    if opts.smoothing.is_nan() || opts.smoothing < 0.0 {
        return Err(Error::InvalidConfig {
            field: "smoothing".to_string(),
            msg: format!("must be >= 0, got {}", opts.smoothing),
        });
    }
    if !(opts.probability_floor > 0.0 && opts.probability_floor < 1.0) {
        return Err(Error::InvalidConfig {
            field: "probability_floor".to_string(),
            msg: format!("must be in (0,1), got {}", opts.probability_floor),
        });
    }
    for p in Phenotype::ALL {
        let m = panel.variants(p).len() as f64;
        if opts.probability_floor * m > 1.0 {
            return Err(Error::InvalidConfig {
                field: "probability_floor".to_string(),
                msg: format!("floor * {m} variants exceeds 1 for {p}"),
            });
        }
    }
    Ok(())
}

/// Fit conditional tables and priors from paired genotype records and
/// phenotype labels.
pub fn fit_conditional_tables(
    genotypes: &[GenotypeRecord],
    labels: &[PhenotypeProfile],
    panel: &SnpPanel,
    opts: FitOptions,
) -> Result<ConditionalModel> {
    validate_options(panel, &opts)?;
    if labels.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 labeled individuals, got {}",
            labels.len()
        )));
    }
    let by_id: BTreeMap<&str, &GenotypeRecord> = genotypes
        .iter()
        .map(|g| (g.individual_id.as_str(), g))
        .collect();
    let mut paired: Vec<(&PhenotypeProfile, &GenotypeRecord)> = Vec::with_capacity(labels.len());
    for label in labels {
        let genotype = by_id
            .get(label.individual_id.as_str())
            .ok_or_else(|| Error::LabelWithoutGenotype(label.individual_id.clone()))?;
        paired.push((label, genotype));
    }

    let alpha = opts.smoothing;
    let floor = opts.probability_floor;
    let n = paired.len() as f64;

    let mut priors = BTreeMap::new();
    let mut tables: BTreeMap<String, BTreeMap<AllelePair, Vec<f64>>> = BTreeMap::new();

    for p in Phenotype::ALL {
        let variants = panel.variants(p);
        let m = variants.len();

        let mut variant_counts = vec![0usize; m];
        for (label, _) in &paired {
            let idx = panel
                .variant_index(p, label.variant(p))
                .expect("profile variants are panel-valid");
            variant_counts[idx] += 1;
        }
        let raw: Vec<f64> = variant_counts
            .iter()
            .map(|&c| (c as f64 + alpha) / (n + alpha * m as f64))
            .collect();
        priors.insert(p, floor_and_normalize(&raw, floor));

        for snp in panel.snps(p) {
            // counts per observed call, per variant
            let mut per_call: BTreeMap<AllelePair, Vec<usize>> = BTreeMap::new();
            for (label, genotype) in &paired {
                if let GenotypeCall::Called(pair) = genotype.call(snp) {
                    let idx = panel.variant_index(p, label.variant(p)).unwrap();
                    per_call.entry(pair).or_insert_with(|| vec![0; m])[idx] += 1;
                }
            }
            let mut call_tables = BTreeMap::new();
            for (pair, counts) in per_call {
                let total: usize = counts.iter().sum();
                let raw: Vec<f64> = counts
                    .iter()
                    .map(|&c| (c as f64 + alpha) / (total as f64 + alpha * m as f64))
                    .collect();
                call_tables.insert(pair, floor_and_normalize(&raw, floor));
            }
            tables.insert(snp.clone(), call_tables);
        }
    }

    Ok(ConditionalModel {
        panel: panel.clone(),
        smoothing: alpha,
        probability_floor: floor,
        priors,
        tables,
    })
}

impl ConditionalModel {
    pub fn panel(&self) -> &SnpPanel {
        &self.panel
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn probability_floor(&self) -> f64 {
        self.probability_floor
    }

    pub fn prior(&self, p: Phenotype) -> &[f64] {
        &self.priors[&p]
    }

    pub fn table(&self, rsid: &str, call: AllelePair) -> Option<&[f64]> {
        self.tables
            .get(rsid)
            .and_then(|t| t.get(&call))
            .map(|v| v.as_slice())
    }

    /// log P(variant | y) for one variant (by index) of `p`.
    ///
    /// For non-sex phenotypes this is the sum over the phenotype's panel
    /// SNPs of the log table entry when the call was seen at fit time, or
    /// the log prior when the SNP is missing or the call unseen. Sex is
    /// decided by the Y-presence rule at `1 - floor` vs `floor`.
    pub fn log_variant_given_genome(
        &self,
        p: Phenotype,
        variant_idx: usize,
        y: &GenotypeRecord,
    ) -> f64 {
        if p == Phenotype::Sex {
            let matches = self.panel.variants(p)[variant_idx] == self.panel.sex_variant(y.has_y_calls);
            return if matches {
                (1.0 - self.probability_floor).ln()
            } else {
                self.probability_floor.ln()
            };
        }
        let prior = self.priors[&p][variant_idx];
        let mut log_prob = 0.0;
        for snp in self.panel.snps(p) {
            let factor = match y.call(snp) {
                GenotypeCall::Called(pair) => self
                    .table(snp, pair)
                    .map(|dist| dist[variant_idx])
                    .unwrap_or(prior),
                GenotypeCall::Missing => prior,
            };
            log_prob += factor.ln();
        }
        log_prob
    }

    /// P(variant | y), by variant name.
    pub fn variant_given_genome(
        &self,
        p: Phenotype,
        variant: &str,
        y: &GenotypeRecord,
    ) -> Result<f64> {
        let idx = self
            .panel
            .variant_index(p, variant)
            .ok_or_else(|| Error::UnknownVariant {
                row: 0,
                phenotype: p.name().to_string(),
                value: variant.to_string(),
            })?;
        Ok(self.log_variant_given_genome(p, idx, y).exp())
    }

    /// log P(v | y) for every variant of `p`, in panel order. When
    /// `normalize` is set the vector is shifted to a proper log
    /// distribution over variants (log-sum-exp normalization).
    pub fn variant_log_scores(
        &self,
        p: Phenotype,
        y: &GenotypeRecord,
        normalize: bool,
    ) -> Vec<f64> {
        let m = self.panel.variants(p).len();
        let mut logs: Vec<f64> = (0..m)
            .map(|v| self.log_variant_given_genome(p, v, y))
            .collect();
        if normalize {
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logs.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
            for l in &mut logs {
                *l -= lse;
            }
        }
        logs
    }

    pub fn to_json(&self) -> String {
        let mirror = ModelFile::from_model(self);
        serde_json::to_string_pretty(&mirror).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<ConditionalModel> {
        let mirror: ModelFile = serde_json::from_str(text)?;
        mirror.into_model()
    }

    fn validate(&self) -> Result<()> {
        let floor = self.probability_floor;
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::InvalidModel(format!(
                "probability_floor {floor} out of range"
            )));
        }
        let check_dist = |what: &str, dist: &[f64], m: usize| -> Result<()> {
            if dist.len() != m {
                return Err(Error::InvalidModel(format!(
                    "{what}: expected {m} entries, found {}",
                    dist.len()
                )));
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("{what}: sums to {sum}")));
            }
            for &x in dist {
                if !(x >= floor * (1.0 - 1e-12) && x <= 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "{what}: probability {x} outside [{floor}, 1]"
                    )));
                }
            }
            Ok(())
        };
        for p in Phenotype::ALL {
            let m = self.panel.variants(p).len();
            let prior = self
                .priors
                .get(&p)
                .ok_or_else(|| Error::InvalidModel(format!("missing prior for {p}")))?;
            check_dist(&format!("prior[{p}]"), prior, m)?;
            for snp in self.panel.snps(p) {
                let table = self
                    .tables
                    .get(snp)
                    .ok_or_else(|| Error::InvalidModel(format!("missing table for {snp}")))?;
                for (pair, dist) in table {
                    check_dist(&format!("table[{snp},{pair}]"), dist, m)?;
                }
            }
        }
        for rsid in self.tables.keys() {
            if !self.panel.contains_snp(rsid) {
                return Err(Error::InvalidModel(format!(
                    "table for non-panel rsID {rsid}"
                )));
            }
        }
        Ok(())
    }
}

/// Serialized form: distributions keyed by variant name.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    panel: SnpPanel,
    smoothing: f64,
    probability_floor: f64,
    priors: BTreeMap<String, BTreeMap<String, f64>>,
    tables: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
}

impl ModelFile {
    fn from_model(model: &ConditionalModel) -> ModelFile {
        let named = |p: Phenotype, dist: &[f64]| -> BTreeMap<String, f64> {
            model
                .panel
                .variants(p)
                .iter()
                .cloned()
                .zip(dist.iter().copied())
                .collect()
        };
        let priors = model
            .priors
            .iter()
            .map(|(&p, dist)| (p.name().to_string(), named(p, dist)))
            .collect();
        let tables = model
            .tables
            .iter()
            .map(|(rsid, calls)| {
                let p = model.panel.owner_of(rsid).expect("table rsIDs are panel SNPs");
                let calls = calls
                    .iter()
                    .map(|(pair, dist)| (pair.to_string(), named(p, dist)))
                    .collect();
                (rsid.clone(), calls)
            })
            .collect();
        ModelFile {
            panel: model.panel.clone(),
            smoothing: model.smoothing,
            probability_floor: model.probability_floor,
            priors,
            tables,
        }
    }

    fn into_model(self) -> Result<ConditionalModel> {
        let panel = self.panel;
        let ordered = |p: Phenotype, named: &BTreeMap<String, f64>| -> Result<Vec<f64>> {
            panel
                .variants(p)
                .iter()
                .map(|v| {
                    named.get(v).copied().ok_or_else(|| {
                        Error::InvalidModel(format!("missing probability for {p} variant {v}"))
                    })
                })
                .collect()
        };
        let mut priors = BTreeMap::new();
        for (name, dist) in &self.priors {
            let p = Phenotype::from_name(name)
                .ok_or_else(|| Error::InvalidModel(format!("unknown phenotype {name}")))?;
            priors.insert(p, ordered(p, dist)?);
        }
        let mut tables = BTreeMap::new();
        for (rsid, calls) in &self.tables {
            let p = panel
                .owner_of(rsid)
                .ok_or_else(|| Error::InvalidModel(format!("table for non-panel rsID {rsid}")))?;
            let mut call_tables = BTreeMap::new();
            for (call, dist) in calls {
                let pair = AllelePair::parse(call)
                    .ok_or_else(|| Error::InvalidModel(format!("invalid call {call}")))?;
                call_tables.insert(pair, ordered(p, dist)?);
            }
            tables.insert(rsid.clone(), call_tables);
        }
        let model = ConditionalModel {
            panel,
            smoothing: self.smoothing,
            probability_floor: self.probability_floor,
            priors,
            tables,
        };
        model.validate()?;
        Ok(model)
    }
}
