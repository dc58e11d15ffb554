//! Privacy defenses: per-phenotype PGD attacks on classifier predictions,
//! the universal noise that directly minimizes the correct pair's match
//! score across all four classifiers, and adversarial training against
//! those perturbations.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    continue_train, InputObjective, PhenotypeClassifier, TrainConfig,
};
use crate::error::{Error, Result};
use crate::genotype::GenotypeRecord;
use crate::matcher::ScoreOptions;
use crate::model::ConditionalModel;
use crate::panel::Phenotype;
use crate::rng::{derive_rng, derive_seed, hash_str};
use crate::synth::FeatureVector;

const PGD_INIT_STREAM: u64 = 0x5047_4449;
const ADV_SUBSET_STREAM: u64 = 0x4144_5653;
const ADV_EXAMPLE_STREAM: u64 = 0x4144_5645;
const ADV_PASS_TAG: u64 = 0x6100;

/// Gradient update rule for an attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Optimizer {
    SignGradient,
    Adam { lr: f64, beta1: f64, beta2: f64 },
}

/// Attack parameters. `epsilon` is the L-infinity budget in normalized
/// feature units; every iterate keeps both the budget and the [0,1] box
/// on the perturbed input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub epsilon: f64,
    /// Step size for the sign-gradient rule.
    pub alpha: f64,
    pub iterations: usize,
    pub random_start: bool,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl AttackConfig {
    /// Sign-gradient PGD defaults: 40 iterations at a tenth of the budget.
    pub fn pgd(epsilon: f64) -> AttackConfig {
        AttackConfig {
            epsilon,
            alpha: (epsilon / 10.0).max(1e-3),
            iterations: 40,
            random_start: false,
            optimizer: Optimizer::SignGradient,
            seed: 0,
        }
    }

    /// Adam defaults for the universal-noise solver: 100 steps at lr 0.01.
    pub fn adam(epsilon: f64) -> AttackConfig {
        AttackConfig {
            epsilon,
            alpha: (epsilon / 10.0).max(1e-3),
            iterations: 100,
            random_start: false,
            optimizer: Optimizer::Adam {
                lr: 0.01,
                beta1: 0.9,
                beta2: 0.999,
            },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig {
                field: "epsilon".to_string(),
                msg: format!("must be in [0,1], got {}", self.epsilon),
            });
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig {
                field: "alpha".to_string(),
                msg: "must be positive".to_string(),
            });
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig {
                field: "iterations".to_string(),
                msg: "must be >= 1".to_string(),
            });
        }
        if let Optimizer::Adam { lr, beta1, beta2 } = self.optimizer {
            if lr.is_nan() || lr <= 0.0 || !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                return Err(Error::InvalidConfig {
                    field: "optimizer".to_string(),
                    msg: "adam needs lr > 0 and betas in [0,1)".to_string(),
                });
            }
        }
        Ok(())
    }
}

/// An additive feature perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub delta: Vec<f64>,
}

impl Perturbation {
    pub fn linf(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, &d| m.max(d.abs()))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.delta).map(|(&x, &d)| x + d).collect()
    }

    pub fn validate(&self, x: &[f64], epsilon: f64) -> Result<()> {
        if self.delta.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: self.delta.len(),
            });
        }
        for (&xi, &di) in x.iter().zip(&self.delta) {
            if di.abs() > epsilon + 1e-12 || !(-1e-12..=1.0 + 1e-12).contains(&(xi + di)) {
                return Err(Error::Data(format!(
                    "perturbation violates constraints: x={xi}, delta={di}, eps={epsilon}"
                )));
            }
        }
        Ok(())
    }
}

/// Project onto the feasible set: clip delta to [-eps, eps], then pull
/// x + delta back into [0,1] by adjusting delta. Both constraints hold
/// after the second clip.
fn project(delta: &mut [f64], x: &[f64], epsilon: f64) {
    for (d, &xi) in delta.iter_mut().zip(x) {
        *d = d.clamp(-epsilon, epsilon);
        *d = d.clamp(-xi, 1.0 - xi);
    }
}

fn debug_check_box(delta: &[f64], x: &[f64], epsilon: f64) {
    debug_assert!(
        delta
            .iter()
            .zip(x)
            .all(|(&d, &xi)| d.abs() <= epsilon + 1e-12
                && (-1e-12..=1.0 + 1e-12).contains(&(xi + d))),
        "iterate left the feasible box"
    );
}

fn sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn initial_delta(cfg: &AttackConfig, x: &[f64]) -> Vec<f64> {
    let mut delta = vec![0.0; x.len()];
    if cfg.random_start && cfg.epsilon > 0.0 {
        let mut rng = derive_rng(cfg.seed, &[PGD_INIT_STREAM]);
        for d in &mut delta {
            *d = rng.gen_range(-cfg.epsilon..=cfg.epsilon);
        }
    }
    project(&mut delta, x, cfg.epsilon);
    delta
}

/// Sign-gradient PGD ascent on the classifier's cross-entropy against the
/// true variant.
pub fn pgd_single(
    model: &PhenotypeClassifier,
    x: &[f64],
    true_variant: usize,
    cfg: &AttackConfig,
) -> Result<Perturbation> {
    cfg.validate()?;
    if cfg.optimizer != Optimizer::SignGradient {
        return Err(Error::InvalidConfig {
            field: "optimizer".to_string(),
            msg: "pgd_single uses the sign-gradient rule".to_string(),
        });
    }
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    let objective = InputObjective::CrossEntropy {
        label: true_variant,
    };
    let mut delta = initial_delta(cfg, x);
    for _ in 0..cfg.iterations {
        let adv: Vec<f64> = x.iter().zip(&delta).map(|(&x, &d)| x + d).collect();
        let grad = model.input_gradient(&adv, &objective)?;
        for (d, g) in delta.iter_mut().zip(&grad) {
            *d += cfg.alpha * sign(*g);
        }
        project(&mut delta, x, cfg.epsilon);
        debug_check_box(&delta, x, cfg.epsilon);
    }
    Ok(Perturbation { delta })
}

/// Form of the universal objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniversalKind {
    /// sum_p sum_v log g_p(v, x+delta) * log P(v|y): the score surrogate
    /// minimized by the defense.
    LogWeighted,
    /// sum_p sum_v g_p(v, x+delta) * log P(v|y), kept for sensitivity
    /// analysis only.
    ProbWeighted,
}

/// One point of an attack's objective trace. The final entry always
/// describes the returned perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub linf: f64,
}

/// Minimize the correct pair's score surrogate over all four classifiers
/// by projected gradient descent with the Adam update, starting from
/// delta = 0 (or `warm_start`) and clipping after every step. Returns the
/// best feasible iterate and the objective trace.
#[allow(clippy::too_many_arguments)]
pub fn universal_noise(
    classifiers: &BTreeMap<Phenotype, PhenotypeClassifier>,
    x: &[f64],
    y_true: &GenotypeRecord,
    model: &ConditionalModel,
    cfg: &AttackConfig,
    kind: UniversalKind,
    score_opts: ScoreOptions,
    warm_start: Option<&Perturbation>,
) -> Result<(Perturbation, Vec<TracePoint>)> {
    cfg.validate()?;
    let (lr, beta1, beta2) = match cfg.optimizer {
        Optimizer::Adam { lr, beta1, beta2 } => (lr, beta1, beta2),
        Optimizer::SignGradient => {
            return Err(Error::InvalidConfig {
                field: "optimizer".to_string(),
                msg: "universal_noise uses the adam update".to_string(),
            })
        }
    };
    for p in Phenotype::ALL {
        let clf = classifiers.get(&p).ok_or_else(|| Error::Data(format!(
            "missing classifier for {p}"
        )))?;
        if clf.input_dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: clf.input_dim(),
                got: x.len(),
            });
        }
    }
    // floored, finite log P(v|y) weights per phenotype
    let objectives: Vec<(Phenotype, InputObjective)> = Phenotype::ALL
        .into_iter()
        .map(|p| {
            let weights = model.variant_log_scores(p, y_true, score_opts.normalize_variants);
            let objective = match kind {
                UniversalKind::LogWeighted => InputObjective::WeightedLogProbs { weights },
                UniversalKind::ProbWeighted => InputObjective::WeightedProbs { weights },
            };
            (p, objective)
        })
        .collect();

    let evaluate = |delta: &[f64]| -> Result<f64> {
        let adv: Vec<f64> = x.iter().zip(delta).map(|(&x, &d)| x + d).collect();
        let mut total = 0.0;
        for (p, obj) in &objectives {
            total += classifiers[p].objective_value(&adv, obj)?;
        }
        if !total.is_finite() {
            return Err(Error::Data("non-finite universal objective".to_string()));
        }
        Ok(total)
    };

    let mut delta = match warm_start {
        Some(w) => {
            let mut d = w.delta.clone();
            if d.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    got: d.len(),
                });
            }
            project(&mut d, x, cfg.epsilon);
            d
        }
        None => initial_delta(cfg, x),
    };

    let mut trace = Vec::with_capacity(cfg.iterations + 2);
    let mut best = Perturbation {
        delta: delta.clone(),
    };
    let mut best_objective = evaluate(&delta)?;
    trace.push(TracePoint {
        iteration: 0,
        objective: best_objective,
        linf: best.linf(),
    });

    let dim = x.len();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    for step in 1..=cfg.iterations {
        let adv: Vec<f64> = x.iter().zip(&delta).map(|(&x, &d)| x + d).collect();
        let mut grad = vec![0.0; dim];
        for (p, obj) in &objectives {
            let g = classifiers[p].input_gradient(&adv, obj)?;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        let bias1 = 1.0 - beta1.powi(step as i32);
        let bias2 = 1.0 - beta2.powi(step as i32);
        for i in 0..dim {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            delta[i] -= lr * m_hat / (v_hat.sqrt() + 1e-8);
        }
        project(&mut delta, x, cfg.epsilon);
        debug_check_box(&delta, x, cfg.epsilon);
        let objective = evaluate(&delta)?;
        let pert = Perturbation {
            delta: delta.clone(),
        };
        trace.push(TracePoint {
            iteration: step,
            objective,
            linf: pert.linf(),
        });
        if objective < best_objective {
            best_objective = objective;
            best = pert;
        }
    }
    trace.push(TracePoint {
        iteration: trace.len(),
        objective: best_objective,
        linf: best.linf(),
    });
    Ok((best, trace))
}

/// The seeded half of the data adversarially perturbed in a given pass.
pub fn adversarial_subset(n: usize, seed: u64, pass: usize) -> Vec<usize> {
    let take = (n / 2).max(1).min(n);
    let mut rng = derive_rng(seed, &[ADV_SUBSET_STREAM, pass as u64]);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, n, take).into_vec();
    picked.sort_unstable();
    picked
}

/// Adversarial example for one training item within a pass: PGD with a
/// random start on a per-item stream.
pub fn adversarial_example(
    model: &PhenotypeClassifier,
    x: &[f64],
    label: usize,
    attack: &AttackConfig,
    pass: usize,
    item: usize,
) -> Result<Vec<f64>> {
    let mut cfg = attack.clone();
    cfg.optimizer = Optimizer::SignGradient;
    cfg.random_start = true;
    cfg.seed = derive_seed(attack.seed, &[ADV_EXAMPLE_STREAM, pass as u64, item as u64]);
    let pert = pgd_single(model, x, label, &cfg)?;
    Ok(pert.apply(x))
}

/// Adversarial training: per pass, perturb a seeded half of the training
/// data against the current model, append the perturbed examples with
/// their clean labels to the (growing) training set, and continue
/// training. Examples accumulate across passes so earlier attack
/// directions stay represented.
pub fn adversarial_train(
    model: &PhenotypeClassifier,
    inputs: &[Vec<f64>],
    labels: &[usize],
    attack: &AttackConfig,
    passes: usize,
    train_cfg: &TrainConfig,
) -> Result<PhenotypeClassifier> {
    attack.validate()?;
    if passes < 1 {
        return Err(Error::InvalidConfig {
            field: "passes".to_string(),
            msg: "must be >= 1".to_string(),
        });
    }
    if inputs.len() != labels.len() || inputs.is_empty() {
        return Err(Error::Data("empty or mismatched training data".to_string()));
    }
    let mut current = model.clone();
    let mut aug_inputs: Vec<Vec<f64>> = inputs.to_vec();
    let mut aug_labels: Vec<usize> = labels.to_vec();
    for pass in 0..passes {
        let subset = adversarial_subset(inputs.len(), train_cfg.seed, pass);
        let adversarial: Vec<(Vec<f64>, usize)> = subset
            .par_iter()
            .map(|&i| {
                adversarial_example(&current, &inputs[i], labels[i], attack, pass, i)
                    .map(|x| (x, labels[i]))
            })
            .collect::<Result<_>>()?;
        for (x, l) in adversarial {
            aug_inputs.push(x);
            aug_labels.push(l);
        }
        current = continue_train(
            &current,
            &aug_inputs,
            &aug_labels,
            train_cfg,
            ADV_PASS_TAG + pass as u64,
        )?;
    }
    Ok(current)
}

/// Per-pass training defaults for adversarial training. Short passes,
/// large batches, and a strong weight penalty keep the continued training
/// from carving the boundary tightly around the appended examples, which
/// is what otherwise erases the robustness gain on this data scale.
pub fn adversarial_train_config(base_seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 40,
        learning_rate: 0.05,
        batch_size: 256,
        l2_penalty: 1e-2,
        seed: base_seed,
        ..TrainConfig::default()
    }
}

/// Universal-noise perturbation of every individual's features against its
/// own true genome. Deterministic; individuals run in parallel.
#[allow(clippy::too_many_arguments)]
pub fn perturb_features_universal(
    classifiers: &BTreeMap<Phenotype, PhenotypeClassifier>,
    features: &[FeatureVector],
    genomes: &[GenotypeRecord],
    model: &ConditionalModel,
    cfg: &AttackConfig,
    kind: UniversalKind,
    score_opts: ScoreOptions,
) -> Result<Vec<(FeatureVector, Vec<TracePoint>)>> {
    if features.len() != genomes.len() {
        return Err(Error::Data(format!(
            "{} feature vectors vs {} genomes",
            features.len(),
            genomes.len()
        )));
    }
    features
        .par_iter()
        .zip(genomes)
        .map(|(f, y)| {
            let (pert, trace) = universal_noise(
                classifiers,
                &f.values,
                y,
                model,
                cfg,
                kind,
                score_opts,
                None,
            )?;
            let out = FeatureVector {
                values: pert.apply(&f.values),
            };
            out.validate()?;
            Ok((out, trace))
        })
        .collect()
}

/// Single-phenotype PGD perturbation of every individual's features
/// against the owning classifier, using the individual's true variant.
pub fn perturb_features_pgd(
    classifier: &PhenotypeClassifier,
    features: &[FeatureVector],
    true_labels: &[usize],
    ids: &[String],
    cfg: &AttackConfig,
) -> Result<Vec<FeatureVector>> {
    if features.len() != true_labels.len() || features.len() != ids.len() {
        return Err(Error::Data("mismatched attack inputs".to_string()));
    }
    features
        .par_iter()
        .zip(true_labels)
        .zip(ids)
        .map(|((f, &label), id)| {
            let mut item_cfg = cfg.clone();
            item_cfg.seed = derive_seed(cfg.seed, &[hash_str(id)]);
            let pert = pgd_single(classifier, &f.values, label, &item_cfg)?;
            let out = FeatureVector {
                values: pert.apply(&f.values),
            };
            out.validate()?;
            Ok(out)
        })
        .collect()
}
