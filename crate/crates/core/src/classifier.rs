//! Per-phenotype differentiable classifiers over feature vectors: a
//! linear-softmax model and a one-hidden-layer tanh network, trained from
//! scratch with mini-batch gradient descent, with analytic gradients with
//! respect to the input (the surface the perturbation attacks drive).

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Phenotype, SnpPanel};
use crate::profile::PhenotypeProfile;
use crate::rng::derive_rng;
use crate::synth::FeatureVector;

const TRAIN_STREAM: u64 = 0x5452_4149;

/// Model architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Architecture {
    LinearSoftmax,
    OneHidden { width: usize },
}

/// Dense layer computing `W x + b`, row-major weights.
#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl DenseLayer {
    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseLayer {
        let scale = 1.0 / (cols as f64).sqrt();
        let w = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        DenseLayer {
            rows,
            cols,
            w,
            b: vec![0.0; rows],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let row = &self.w[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b[r]
            })
            .collect()
    }

    /// `W^T dy`: gradient with respect to the layer input.
    fn backward_input(&self, dy: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.cols];
        for (row, &d) in self.w.chunks_exact(self.cols).zip(dy) {
            for (acc, &w) in dx.iter_mut().zip(row) {
                *acc += w * d;
            }
        }
        dx
    }
}

/// A trained softmax classifier for one phenotype.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeClassifier {
    pub phenotype: Phenotype,
    pub variant_names: Vec<String>,
    architecture: Architecture,
    hidden: Option<DenseLayer>,
    output: DenseLayer,
    /// Mean cross-entropy over the final training epoch, when trained.
    pub train_loss: Option<f64>,
}

/// A scalar objective over the classifier's output distribution,
/// differentiable with respect to the input.
#[derive(Debug, Clone)]
pub enum InputObjective {
    /// `-log p[label]`.
    CrossEntropy { label: usize },
    /// `sum_v weights[v] * log p[v]`.
    WeightedLogProbs { weights: Vec<f64> },
    /// `sum_v weights[v] * p[v]`.
    WeightedProbs { weights: Vec<f64> },
}

impl PhenotypeClassifier {
    /// Freshly initialized model with seeded uniform weights.
    pub fn with_random_params(
        phenotype: Phenotype,
        variant_names: Vec<String>,
        input_dim: usize,
        architecture: Architecture,
        rng: &mut ChaCha8Rng,
    ) -> PhenotypeClassifier {
        let num_variants = variant_names.len();
        let (hidden, output) = match architecture {
            Architecture::LinearSoftmax => {
                (None, DenseLayer::random(num_variants, input_dim, rng))
            }
            Architecture::OneHidden { width } => (
                Some(DenseLayer::random(width, input_dim, rng)),
                DenseLayer::random(num_variants, width, rng),
            ),
        };
        PhenotypeClassifier {
            phenotype,
            variant_names,
            architecture,
            hidden,
            output,
            train_loss: None,
        }
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .as_ref()
            .map(|h| h.cols)
            .unwrap_or(self.output.cols)
    }

    pub fn num_variants(&self) -> usize {
        self.output.rows
    }

    /// Forward pass; returns the hidden activation (when present) and the
    /// logits.
    fn forward(&self, x: &[f64]) -> (Option<Vec<f64>>, Vec<f64>) {
        match &self.hidden {
            Some(hidden) => {
                let mut h = hidden.forward(x);
                for v in &mut h {
                    *v = v.tanh();
                }
                let logits = self.output.forward(&h);
                (Some(h), logits)
            }
            None => (None, self.output.forward(x)),
        }
    }

    /// Numerically stable log-softmax output.
    pub fn predict_log_proba(&self, x: &[f64]) -> Vec<f64> {
        let (_, logits) = self.forward(x);
        log_softmax(&logits)
    }

    /// Softmax output distribution over variants.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.predict_log_proba(x).iter().map(|&l| l.exp()).collect()
    }

    /// Most likely variant index; ties resolve to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.predict_log_proba(x);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        best
    }

    fn check_objective(&self, objective: &InputObjective) -> Result<()> {
        let c = self.num_variants();
        match objective {
            InputObjective::CrossEntropy { label } if *label >= c => {
                Err(Error::InvalidConfig {
                    field: "objective".to_string(),
                    msg: format!("label {label} out of range for {c} variants"),
                })
            }
            InputObjective::WeightedLogProbs { weights }
            | InputObjective::WeightedProbs { weights }
                if weights.len() != c =>
            {
                Err(Error::DimensionMismatch {
                    expected: c,
                    got: weights.len(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Value of the objective at `x`.
    pub fn objective_value(&self, x: &[f64], objective: &InputObjective) -> Result<f64> {
        self.check_objective(objective)?;
        let logp = self.predict_log_proba(x);
        Ok(match objective {
            InputObjective::CrossEntropy { label } => -logp[*label],
            InputObjective::WeightedLogProbs { weights } => {
                weights.iter().zip(&logp).map(|(w, l)| w * l).sum()
            }
            InputObjective::WeightedProbs { weights } => {
                weights.iter().zip(&logp).map(|(w, l)| w * l.exp()).sum()
            }
        })
    }

    /// Exact gradient of the objective with respect to the input.
    pub fn input_gradient(&self, x: &[f64], objective: &InputObjective) -> Result<Vec<f64>> {
        self.check_objective(objective)?;
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let (h, logits) = self.forward(x);
        let p: Vec<f64> = log_softmax(&logits).iter().map(|&l| l.exp()).collect();
        let du: Vec<f64> = match objective {
            InputObjective::CrossEntropy { label } => p
                .iter()
                .enumerate()
                .map(|(k, &pk)| pk - if k == *label { 1.0 } else { 0.0 })
                .collect(),
            InputObjective::WeightedLogProbs { weights } => {
                let wsum: f64 = weights.iter().sum();
                weights
                    .iter()
                    .zip(&p)
                    .map(|(&w, &pk)| w - wsum * pk)
                    .collect()
            }
            InputObjective::WeightedProbs { weights } => {
                let expect: f64 = weights.iter().zip(&p).map(|(w, pk)| w * pk).sum();
                weights
                    .iter()
                    .zip(&p)
                    .map(|(&w, &pk)| pk * (w - expect))
                    .collect()
            }
        };
        Ok(match (&self.hidden, h) {
            (Some(hidden), Some(h)) => {
                let dh = self.output.backward_input(&du);
                let dpre: Vec<f64> = dh
                    .iter()
                    .zip(&h)
                    .map(|(&g, &hv)| g * (1.0 - hv * hv))
                    .collect();
                hidden.backward_input(&dpre)
            }
            _ => self.output.backward_input(&du),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ClassifierFile::from_model(self))
            .expect("classifier serializes")
    }

    pub fn from_json(text: &str) -> Result<PhenotypeClassifier> {
        let file: ClassifierFile = serde_json::from_str(text)?;
        file.into_model()
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&u| (u - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&u| u - lse).collect()
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2_penalty: f64,
    pub architecture: Architecture,
    /// Subsample every class to the smallest class count before training.
    pub balance_classes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 300,
            batch_size: 32,
            seed: 0,
            l2_penalty: 1e-4,
            architecture: Architecture::OneHidden { width: 16 },
            balance_classes: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
        ];
        for (field, value) in positive {
            if value.is_nan() || value <= 0.0 {
                return Err(Error::InvalidConfig {
                    field: field.to_string(),
                    msg: "must be positive".to_string(),
                });
            }
        }
        if self.l2_penalty < 0.0 {
            return Err(Error::InvalidConfig {
                field: "l2_penalty".to_string(),
                msg: "must be >= 0".to_string(),
            });
        }
        if let Architecture::OneHidden { width: 0 } = self.architecture {
            return Err(Error::InvalidConfig {
                field: "architecture".to_string(),
                msg: "hidden width must be positive".to_string(),
            });
        }
        Ok(())
    }
}

fn check_training_data(inputs: &[Vec<f64>], labels: &[usize], num_variants: usize) -> Result<()> {
    if inputs.len() != labels.len() || inputs.is_empty() {
        return Err(Error::Data(format!(
            "training set mismatch: {} inputs, {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_variants) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {num_variants} variants"
        )));
    }
    let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Data(
            "training data contains a single class".to_string(),
        ));
    }
    Ok(())
}

/// Mean cross-entropy of the model over a labeled set.
pub fn mean_cross_entropy(
    model: &PhenotypeClassifier,
    inputs: &[Vec<f64>],
    labels: &[usize],
) -> f64 {
    inputs
        .iter()
        .zip(labels)
        .map(|(x, &l)| -model.predict_log_proba(x)[l])
        .sum::<f64>()
        / inputs.len() as f64
}

/// Fraction of inputs whose predicted variant matches the label.
pub fn accuracy(model: &PhenotypeClassifier, inputs: &[Vec<f64>], labels: &[usize]) -> f64 {
    inputs
        .iter()
        .zip(labels)
        .filter(|(x, &l)| model.predict(x) == l)
        .count() as f64
        / inputs.len() as f64
}

/// One gradient-descent pass over the data, mutating the model in place.
/// Returns the mean cross-entropy observed during the epoch.
fn run_epoch(
    model: &mut PhenotypeClassifier,
    inputs: &[Vec<f64>],
    labels: &[usize],
    order: &[usize],
    cfg: &TrainConfig,
) -> f64 {
    let mut epoch_loss = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let scale = 1.0 / batch.len() as f64;
        let mut g_out_w = vec![0.0; model.output.w.len()];
        let mut g_out_b = vec![0.0; model.output.b.len()];
        let (mut g_hid_w, mut g_hid_b) = match &model.hidden {
            Some(h) => (vec![0.0; h.w.len()], vec![0.0; h.b.len()]),
            None => (vec![], vec![]),
        };
        for &i in batch {
            let x = &inputs[i];
            let (h, logits) = model.forward(x);
            let logp = log_softmax(&logits);
            epoch_loss += -logp[labels[i]];
            let du: Vec<f64> = logp
                .iter()
                .enumerate()
                .map(|(k, &l)| l.exp() - if k == labels[i] { 1.0 } else { 0.0 })
                .collect();
            let out_in: &[f64] = match &h {
                Some(h) => h,
                None => x,
            };
            for (r, &d) in du.iter().enumerate() {
                g_out_b[r] += d;
                let row = &mut g_out_w[r * model.output.cols..(r + 1) * model.output.cols];
                for (c, g) in row.iter_mut().enumerate() {
                    *g += d * out_in[c];
                }
            }
            if let (Some(hidden), Some(h)) = (&model.hidden, &h) {
                let dh = model.output.backward_input(&du);
                let dpre: Vec<f64> = dh
                    .iter()
                    .zip(h)
                    .map(|(&g, &hv)| g * (1.0 - hv * hv))
                    .collect();
                for (r, &d) in dpre.iter().enumerate() {
                    g_hid_b[r] += d;
                    let row = &mut g_hid_w[r * hidden.cols..(r + 1) * hidden.cols];
                    for (c, g) in row.iter_mut().enumerate() {
                        *g += d * x[c];
                    }
                }
            }
        }
        let lr = cfg.learning_rate;
        for (w, g) in model.output.w.iter_mut().zip(&g_out_w) {
            *w -= lr * (g * scale + cfg.l2_penalty * *w);
        }
        for (b, g) in model.output.b.iter_mut().zip(&g_out_b) {
            *b -= lr * g * scale;
        }
        if let Some(hidden) = &mut model.hidden {
            for (w, g) in hidden.w.iter_mut().zip(&g_hid_w) {
                *w -= lr * (g * scale + cfg.l2_penalty * *w);
            }
            for (b, g) in hidden.b.iter_mut().zip(&g_hid_b) {
                *b -= lr * g * scale;
            }
        }
    }
    epoch_loss / order.len() as f64
}

fn fit(
    model: &mut PhenotypeClassifier,
    inputs: &[Vec<f64>],
    labels: &[usize],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut final_loss = 0.0;
    for _ in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(rng);
        final_loss = run_epoch(model, inputs, labels, &order, cfg);
    }
    final_loss
}

fn balanced_subset(labels: &[usize], num_variants: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_variants];
    for (i, &l) in labels.iter().enumerate() {
        per_class[l].push(i);
    }
    let min = per_class
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.len())
        .min()
        .unwrap_or(0);
    let mut keep = Vec::new();
    for class in &mut per_class {
        class.shuffle(rng);
        keep.extend(class.iter().take(min));
    }
    keep.sort_unstable();
    keep
}

/// Train a classifier from scratch. Deterministic for a fixed seed.
pub fn train(
    phenotype: Phenotype,
    variant_names: Vec<String>,
    inputs: &[Vec<f64>],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<PhenotypeClassifier> {
    cfg.validate()?;
    check_training_data(inputs, labels, variant_names.len())?;
    let input_dim = inputs[0].len();
    let mut rng = derive_rng(cfg.seed, &[TRAIN_STREAM, phenotype.index() as u64]);
    let mut model = PhenotypeClassifier::with_random_params(
        phenotype,
        variant_names,
        input_dim,
        cfg.architecture,
        &mut rng,
    );
    let (inputs_owned, labels_owned);
    let (inputs, labels): (&[Vec<f64>], &[usize]) = if cfg.balance_classes {
        let keep = balanced_subset(labels, model.num_variants(), &mut rng);
        inputs_owned = keep.iter().map(|&i| inputs[i].clone()).collect::<Vec<_>>();
        labels_owned = keep.iter().map(|&i| labels[i]).collect::<Vec<_>>();
        (&inputs_owned, &labels_owned)
    } else {
        (inputs, labels)
    };
    check_training_data(inputs, labels, model.num_variants())?;
    let loss = fit(&mut model, inputs, labels, cfg, &mut rng);
    model.train_loss = Some(loss);
    Ok(model)
}

/// Continue training an existing model on (possibly augmented) data.
/// `pass_tag` separates the shuffle streams of successive passes.
pub fn continue_train(
    model: &PhenotypeClassifier,
    inputs: &[Vec<f64>],
    labels: &[usize],
    cfg: &TrainConfig,
    pass_tag: u64,
) -> Result<PhenotypeClassifier> {
    cfg.validate()?;
    check_training_data(inputs, labels, model.num_variants())?;
    if inputs[0].len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: inputs[0].len(),
        });
    }
    let mut rng = derive_rng(
        cfg.seed,
        &[TRAIN_STREAM, model.phenotype.index() as u64, pass_tag],
    );
    let mut out = model.clone();
    let loss = fit(&mut out, inputs, labels, cfg, &mut rng);
    out.train_loss = Some(loss);
    Ok(out)
}

/// Deterministic train/test split of `n` items.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = derive_rng(seed, &[0x5350_4c49]);
    order.shuffle(&mut rng);
    let cut = ((n as f64) * train_fraction).round() as usize;
    let (train, test) = order.split_at(cut.min(n));
    (train.to_vec(), test.to_vec())
}

/// Labeled training data for one phenotype, extracted from features and
/// true profiles.
pub fn labeled_features(
    features: &[FeatureVector],
    profiles: &[PhenotypeProfile],
    panel: &SnpPanel,
    phenotype: Phenotype,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let inputs = features.iter().map(|f| f.values.clone()).collect();
    let labels = profiles
        .iter()
        .map(|p| {
            panel
                .variant_index(phenotype, p.variant(phenotype))
                .expect("profile variants are panel-valid")
        })
        .collect();
    (inputs, labels)
}

/// Predicted profiles: per individual, the argmax variant of each
/// phenotype's classifier.
pub fn predict_profiles(
    classifiers: &BTreeMap<Phenotype, PhenotypeClassifier>,
    ids: &[String],
    features: &[FeatureVector],
    panel: &SnpPanel,
) -> Vec<PhenotypeProfile> {
    ids.iter()
        .zip(features)
        .map(|(id, f)| {
            let mut variants: [String; 4] = Default::default();
            for p in Phenotype::ALL {
                let idx = classifiers[&p].predict(&f.values);
                variants[p.index()] = panel.variants(p)[idx].clone();
            }
            PhenotypeProfile::from_canonical(id, variants)
        })
        .collect()
}

/// Serialized form.
#[derive(Serialize, Deserialize)]
struct ClassifierFile {
    phenotype: Phenotype,
    architecture: Architecture,
    input_dim: usize,
    num_variants: usize,
    variant_names: Vec<String>,
    /// Row-major hidden weights, present for the one-hidden architecture.
    hidden_w: Option<Vec<f64>>,
    hidden_b: Option<Vec<f64>>,
    output_w: Vec<f64>,
    output_b: Vec<f64>,
    train_loss: Option<f64>,
}

impl ClassifierFile {
    fn from_model(m: &PhenotypeClassifier) -> ClassifierFile {
        ClassifierFile {
            phenotype: m.phenotype,
            architecture: m.architecture,
            input_dim: m.input_dim(),
            num_variants: m.num_variants(),
            variant_names: m.variant_names.clone(),
            hidden_w: m.hidden.as_ref().map(|h| h.w.clone()),
            hidden_b: m.hidden.as_ref().map(|h| h.b.clone()),
            output_w: m.output.w.clone(),
            output_b: m.output.b.clone(),
            train_loss: m.train_loss,
        }
    }

    fn into_model(self) -> Result<PhenotypeClassifier> {
        let bad = |msg: &str| Error::InvalidModel(format!("classifier: {msg}"));
        if self.variant_names.len() != self.num_variants {
            return Err(bad("variant_names length mismatch"));
        }
        let (hidden, out_cols) = match self.architecture {
            Architecture::LinearSoftmax => {
                if self.hidden_w.is_some() || self.hidden_b.is_some() {
                    return Err(bad("linear model carries hidden weights"));
                }
                (None, self.input_dim)
            }
            Architecture::OneHidden { width } => {
                let w = self.hidden_w.ok_or_else(|| bad("missing hidden weights"))?;
                let b = self.hidden_b.ok_or_else(|| bad("missing hidden biases"))?;
                if w.len() != width * self.input_dim || b.len() != width {
                    return Err(bad("hidden shape mismatch"));
                }
                (
                    Some(DenseLayer {
                        rows: width,
                        cols: self.input_dim,
                        w,
                        b,
                    }),
                    width,
                )
            }
        };
        if self.output_w.len() != self.num_variants * out_cols
            || self.output_b.len() != self.num_variants
        {
            return Err(bad("output shape mismatch"));
        }
        let all_params = self
            .output_w
            .iter()
            .chain(&self.output_b)
            .chain(hidden.iter().flat_map(|h| h.w.iter().chain(&h.b)));
        if all_params.clone().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(PhenotypeClassifier {
            phenotype: self.phenotype,
            variant_names: self.variant_names,
            architecture: self.architecture,
            hidden,
            output: DenseLayer {
                rows: self.num_variants,
                cols: out_cols,
                w: self.output_w,
                b: self.output_b,
            },
            train_loss: self.train_loss,
        })
    }
}
