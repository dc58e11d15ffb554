//! Phenotype-based genome linkage at desk scale: parse consumer-genomics
//! exports, fit empirical genotype-to-phenotype tables, score and rank
//! genome-image matches, build synthetic paired datasets with surrogate
//! feature vectors, train differentiable phenotype classifiers, and run
//! the adversarial-perturbation defenses and adversarial training that
//! counter (and harden against) the linkage attack.

pub mod adversary;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod genotype;
pub mod matcher;
pub mod model;
pub mod panel;
pub mod profile;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use genotype::{Allele, AllelePair, GenotypeCall, GenotypeRecord};
pub use model::{ConditionalModel, FitOptions};
pub use panel::{PanelEntry, Phenotype, SnpPanel};
pub use profile::PhenotypeProfile;
pub use synth::{FeatureLayout, FeatureVector, PairedDataset, PoolMember};
