//! Match scoring and the evaluation protocols built on it: per-probe
//! genome ranking, top-k success over subsampled populations, and ROC
//! curves under both the top-k and the score-threshold decision rules.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::GenotypeRecord;
use crate::model::ConditionalModel;
use crate::panel::Phenotype;
use crate::profile::PhenotypeProfile;
use crate::rng::{derive_rng, hash_str};

/// Scoring options shared by every evaluation entry point.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Renormalize per-genome variant scores into a distribution over
    /// variants before taking logs. Off by default; the raw product form
    /// is what the ranking protocol uses.
    pub normalize_variants: bool,
}

/// Log-likelihood match score for one (profile, genome) pair: the sum over
/// the four phenotypes of log P(z_p | y).
pub fn score_pair(
    z: &PhenotypeProfile,
    y: &GenotypeRecord,
    model: &ConditionalModel,
    opts: ScoreOptions,
) -> f64 {
    Phenotype::ALL
        .iter()
        .map(|&p| {
            let idx = model
                .panel()
                .variant_index(p, z.variant(p))
                .expect("profile variants are panel-valid");
            model.variant_log_scores(p, y, opts.normalize_variants)[idx]
        })
        .sum()
}

/// Dense probe-by-genome log-likelihood matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub probe_ids: Vec<String>,
    pub genome_ids: Vec<String>,
    /// Row-major: `scores[probe][genome]`.
    pub scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(
        probe_ids: Vec<String>,
        genome_ids: Vec<String>,
        scores: Vec<Vec<f64>>,
    ) -> Result<ScoreMatrix> {
        if scores.len() != probe_ids.len()
            || scores.iter().any(|row| row.len() != genome_ids.len())
        {
            return Err(Error::Data("score matrix shape mismatch".to_string()));
        }
        if scores.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::Data("non-finite score in matrix".to_string()));
        }
        Ok(ScoreMatrix {
            probe_ids,
            genome_ids,
            scores,
        })
    }

    pub fn genome_index(&self, id: &str) -> Option<usize> {
        self.genome_ids.iter().position(|g| g == id)
    }
}

/// Score every probe against every genome.
pub fn score_matrix(
    probes: &[PhenotypeProfile],
    genomes: &[GenotypeRecord],
    model: &ConditionalModel,
    opts: ScoreOptions,
) -> ScoreMatrix {
    let scores: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|z| {
            // Per-variant log scores depend on the genome only, so compute
            // them once per genome row; the probe picks its variant index.
            genomes
                .iter()
                .map(|y| score_pair(z, y, model, opts))
                .collect()
        })
        .collect();
    ScoreMatrix {
        probe_ids: probes.iter().map(|p| p.individual_id.clone()).collect(),
        genome_ids: genomes.iter().map(|g| g.individual_id.clone()).collect(),
        scores,
    }
}

/// Rank of `target` (1-based) within the candidate set: higher score wins,
/// ties broken by ascending genome id.
fn rank_among(
    target: usize,
    candidates: impl Iterator<Item = usize>,
    scores: &[f64],
    ids: &[String],
) -> usize {
    let st = scores[target];
    let tid = &ids[target];
    let better = candidates
        .filter(|&j| {
            j != target && (scores[j] > st || (scores[j] == st && ids[j] < *tid))
        })
        .count();
    better + 1
}

/// All genomes ranked for one probe: score descending, ties by ascending id.
pub fn rank_genomes(
    z: &PhenotypeProfile,
    population: &[GenotypeRecord],
    model: &ConditionalModel,
    opts: ScoreOptions,
) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = population
        .iter()
        .map(|y| (y.individual_id.clone(), score_pair(z, y, model, opts)))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked
}

fn true_index(
    matrix: &ScoreMatrix,
    pairing: &BTreeMap<String, String>,
    probe: usize,
) -> Result<usize> {
    let probe_id = &matrix.probe_ids[probe];
    let genome_id = pairing
        .get(probe_id)
        .ok_or_else(|| Error::Data(format!("probe {probe_id} has no true pairing")))?;
    matrix.genome_index(genome_id).ok_or_else(|| {
        Error::Data(format!(
            "true genome {genome_id} for probe {probe_id} is not in the population"
        ))
    })
}

/// Fraction of probes whose true genome ranks within the top k.
pub fn topk_success(
    probes: &[PhenotypeProfile],
    genomes: &[GenotypeRecord],
    true_pairing: &BTreeMap<String, String>,
    model: &ConditionalModel,
    k: usize,
    opts: ScoreOptions,
) -> Result<f64> {
    let matrix = score_matrix(probes, genomes, model, opts);
    topk_success_matrix(&matrix, true_pairing, k)
}

pub fn topk_success_matrix(
    matrix: &ScoreMatrix,
    true_pairing: &BTreeMap<String, String>,
    k: usize,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidConfig {
            field: "k".to_string(),
            msg: "must be >= 1".to_string(),
        });
    }
    let n_probes = matrix.probe_ids.len();
    let mut hits = 0usize;
    for i in 0..n_probes {
        let t = true_index(matrix, true_pairing, i)?;
        let rank = rank_among(
            t,
            0..matrix.genome_ids.len(),
            &matrix.scores[i],
            &matrix.genome_ids,
        );
        if rank <= k {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_probes as f64)
}

/// How subsampled populations are ranked in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    /// Rank by the score matrix (the linkage attack).
    Scores,
    /// Assign the true genome a uniformly random rank (the k/n baseline).
    Random,
}

/// Evaluation parameters for sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Top-k cutoffs to report. All cutoffs share the same sampled
    /// subpopulations.
    pub ks: Vec<usize>,
    /// Optional score threshold used when emitting binary match decisions.
    pub theta: Option<f64>,
    pub population_sizes: Vec<usize>,
    /// Seeded distractor redraws per (probe, population size).
    pub trials: usize,
    pub seed: u64,
    /// Phenotypes replaced by ground truth in oracle-substitution modes.
    pub oracle_phenotypes: Vec<Phenotype>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: vec![1, 5],
            theta: None,
            population_sizes: vec![10, 20, 50, 100],
            trials: 100,
            seed: 0,
            oracle_phenotypes: vec![],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.iter().any(|&k| k < 1) {
            return Err(Error::InvalidConfig {
                field: "ks".to_string(),
                msg: "need at least one k >= 1".to_string(),
            });
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig {
                field: "trials".to_string(),
                msg: "must be >= 1".to_string(),
            });
        }
        if self.population_sizes.iter().any(|&n| n < 2) {
            return Err(Error::InvalidConfig {
                field: "population_sizes".to_string(),
                msg: "population sizes must be >= 2".to_string(),
            });
        }
        Ok(())
    }
}

/// One sweep result cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub population_size: usize,
    pub k: usize,
    pub mean: f64,
    pub std: f64,
}

/// Top-k success as a function of population size.
///
/// For each population size n, probe, and trial, n-1 distractor genomes are
/// drawn without replacement (never the probe's true genome), the true
/// genome is added, and the probe's top-k hit is recorded. RNG streams are
/// derived per (size, trial, probe id), so results are bit-identical for a
/// fixed seed regardless of parallelism, and subsampled populations are
/// shared across modes and k values.
pub fn population_sweep(
    probes: &[PhenotypeProfile],
    genomes: &[GenotypeRecord],
    true_pairing: &BTreeMap<String, String>,
    model: &ConditionalModel,
    opts: ScoreOptions,
    config: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    let matrix = score_matrix(probes, genomes, model, opts);
    sweep_matrix(&matrix, true_pairing, config, RankingMode::Scores)
}

const SWEEP_STREAM: u64 = 0x5357_4545; // stream tag for sweep sampling

pub fn sweep_matrix(
    matrix: &ScoreMatrix,
    true_pairing: &BTreeMap<String, String>,
    config: &EvalConfig,
    mode: RankingMode,
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let n_genomes = matrix.genome_ids.len();
    let n_probes = matrix.probe_ids.len();
    if let Some(&n) = config.population_sizes.iter().find(|&&n| n > n_genomes) {
        return Err(Error::InvalidConfig {
            field: "population_sizes".to_string(),
            msg: format!("size {n} exceeds population of {n_genomes}"),
        });
    }
    let true_indices: Vec<usize> = (0..n_probes)
        .map(|i| true_index(matrix, true_pairing, i))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &n in &config.population_sizes {
        // hit_counts[k_idx] over probes x trials
        let hit_counts: Vec<u64> = (0..n_probes)
            .into_par_iter()
            .map(|i| {
                let t = true_indices[i];
                let candidates: Vec<usize> =
                    (0..n_genomes).filter(|&j| j != t).collect();
                let probe_tag = hash_str(&matrix.probe_ids[i]);
                let mut counts = vec![0u64; config.ks.len()];
                for trial in 0..config.trials {
                    let mut rng =
                        derive_rng(config.seed, &[SWEEP_STREAM, n as u64, trial as u64, probe_tag]);
                    let rank = match mode {
                        RankingMode::Random => {
                            use rand::Rng;
                            rng.gen_range(1..=n)
                        }
                        RankingMode::Scores => {
                            let drawn =
                                rand::seq::index::sample(&mut rng, candidates.len(), n - 1);
                            rank_among(
                                t,
                                drawn.iter().map(|d| candidates[d]).chain(std::iter::once(t)),
                                &matrix.scores[i],
                                &matrix.genome_ids,
                            )
                        }
                    };
                    for (ki, &k) in config.ks.iter().enumerate() {
                        if rank <= k {
                            counts[ki] += 1;
                        }
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; config.ks.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        let total = (n_probes * config.trials) as f64;
        for (ki, &k) in config.ks.iter().enumerate() {
            let mean = hit_counts[ki] as f64 / total;
            rows.push(SweepRow {
                population_size: n,
                k,
                mean,
                std: (mean * (1.0 - mean)).sqrt(),
            });
        }
    }
    Ok(rows)
}

/// A point on an ROC curve. For the top-k scheme `threshold` is k; for the
/// score-threshold scheme it is the score cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Trapezoidal area under points ordered by fpr, anchored at (0,0) and
/// terminated at (1,1).
fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    let mut xs = vec![(0.0, 0.0)];
    xs.extend(points.iter().map(|p| (p.fpr, p.tpr)));
    if xs.last() != Some(&(1.0, 1.0)) {
        xs.push((1.0, 1.0));
    }
    xs.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

fn require_square(matrix: &ScoreMatrix) -> Result<usize> {
    let n = matrix.probe_ids.len();
    if n < 2 {
        return Err(Error::Data("ROC needs at least 2 probes".to_string()));
    }
    if matrix.genome_ids.len() != n {
        return Err(Error::Data(format!(
            "ROC needs a square matrix, got {n} probes x {} genomes",
            matrix.genome_ids.len()
        )));
    }
    Ok(n)
}

/// ROC under the top-k decision rule: for each k, every probe claims its k
/// best-scoring genomes as matches.
pub fn roc_topk(
    matrix: &ScoreMatrix,
    true_pairing: &BTreeMap<String, String>,
) -> Result<RocCurve> {
    let n = require_square(matrix)?;
    let mut rank_hist = vec![0usize; n + 1];
    for i in 0..n {
        let t = true_index(matrix, true_pairing, i)?;
        let rank = rank_among(t, 0..n, &matrix.scores[i], &matrix.genome_ids);
        rank_hist[rank] += 1;
    }
    let negatives = (n * (n - 1)) as f64;
    let mut matches = 0usize;
    let mut points = Vec::with_capacity(n);
    for (k, &hits) in rank_hist.iter().enumerate().skip(1) {
        matches += hits;
        points.push(RocPoint {
            threshold: k as f64,
            tpr: matches as f64 / n as f64,
            fpr: (k * n - matches) as f64 / negatives,
        });
    }
    let auc = trapezoid_auc(&points);
    Ok(RocCurve { points, auc })
}

/// ROC under the independent-decision rule: a pair is claimed as a match
/// iff its score is at least theta, swept over all distinct scores.
pub fn roc_threshold(
    matrix: &ScoreMatrix,
    true_pairing: &BTreeMap<String, String>,
) -> Result<RocCurve> {
    let n = require_square(matrix)?;
    let mut labeled: Vec<(f64, bool)> = Vec::with_capacity(n * n);
    for i in 0..n {
        let t = true_index(matrix, true_pairing, i)?;
        for j in 0..n {
            labeled.push((matrix.scores[i][j], j == t));
        }
    }
    labeled.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));
    let positives = n as f64;
    let negatives = (n * n - n) as f64;

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < labeled.len() {
        let theta = labeled[i].0;
        while i < labeled.len() && labeled[i].0 == theta {
            if labeled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: theta,
            tpr: tp as f64 / positives,
            fpr: fp as f64 / negatives,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    let auc = trapezoid_auc(&points);
    Ok(RocCurve { points, auc })
}
