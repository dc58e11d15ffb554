//! Phenotype profiles: one variant per phenotype for an individual, plus
//! the labeled-CSV reader and writer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Phenotype, SnpPanel};

/// The four observed (or predicted) variants for one individual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenotypeProfile {
    pub individual_id: String,
    /// Canonical variant names, indexed by [`Phenotype::index`].
    variants: [String; 4],
}

impl PhenotypeProfile {
    /// Build a profile, resolving variant names case-insensitively against
    /// the panel's vocabulary.
    pub fn new(
        individual_id: &str,
        panel: &SnpPanel,
        sex: &str,
        hair: &str,
        eye: &str,
        skin: &str,
    ) -> Result<PhenotypeProfile> {
        let mut variants: [String; 4] = Default::default();
        for (p, raw) in [
            (Phenotype::Sex, sex),
            (Phenotype::Hair, hair),
            (Phenotype::Eye, eye),
            (Phenotype::Skin, skin),
        ] {
            let idx = panel.variant_index(p, raw).ok_or_else(|| Error::UnknownVariant {
                row: 0,
                phenotype: p.name().to_string(),
                value: raw.to_string(),
            })?;
            variants[p.index()] = panel.variants(p)[idx].clone();
        }
        Ok(PhenotypeProfile {
            individual_id: individual_id.to_string(),
            variants,
        })
    }

    /// Build directly from canonical variant names indexed by phenotype.
    /// The caller guarantees panel validity.
    pub fn from_canonical(individual_id: &str, variants: [String; 4]) -> PhenotypeProfile {
        PhenotypeProfile {
            individual_id: individual_id.to_string(),
            variants,
        }
    }

    pub fn variant(&self, p: Phenotype) -> &str {
        &self.variants[p.index()]
    }

    /// A copy with `p` set to `variant` (already canonical).
    pub fn with_variant(&self, p: Phenotype, variant: &str) -> PhenotypeProfile {
        let mut out = self.clone();
        out.variants[p.index()] = variant.to_string();
        out
    }

    /// The (hair, eye, skin) combination, used when selecting matching
    /// genotypes; sex is deliberately excluded.
    pub fn visible_combo(&self) -> (&str, &str, &str) {
        (
            self.variant(Phenotype::Hair),
            self.variant(Phenotype::Eye),
            self.variant(Phenotype::Skin),
        )
    }
}

/// Replace the listed phenotypes of `predicted` with ground truth.
pub fn oracle_substitute(
    predicted: &PhenotypeProfile,
    truth: &PhenotypeProfile,
    phenotypes: &[Phenotype],
) -> PhenotypeProfile {
    let mut out = predicted.clone();
    for &p in phenotypes {
        out.variants[p.index()] = truth.variants[p.index()].clone();
    }
    out
}

const HEADER: [&str; 5] = ["id", "sex", "hair", "eye", "skin"];

/// Load `id,sex,hair,eye,skin` label rows. Variant names are matched
/// case-insensitively; rows with unknown variants or duplicate ids are
/// rejected.
pub fn load_phenotype_labels(text: &str, panel: &SnpPanel) -> Result<Vec<PhenotypeProfile>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers()?;
        let got: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
        if got != HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header id,sex,hair,eye,skin, found {}", got.join(",")),
            });
        }
    }
    let mut profiles = Vec::new();
    let mut ids = std::collections::BTreeSet::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2; // header is line 1
        if row.len() != 5 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 5 columns, found {}", row.len()),
            });
        }
        let id = row[0].to_string();
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let profile = PhenotypeProfile::new(&id, panel, &row[1], &row[2], &row[3], &row[4])
            .map_err(|e| match e {
                Error::UnknownVariant {
                    phenotype, value, ..
                } => Error::UnknownVariant {
                    row: line,
                    phenotype,
                    value,
                },
                other => other,
            })?;
        profiles.push(profile);
    }
    Ok(profiles)
}

/// Write profiles back out as labeled CSV.
pub fn write_phenotype_labels(profiles: &[PhenotypeProfile]) -> String {
    let mut out = String::from("id,sex,hair,eye,skin\n");
    for p in profiles {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.individual_id,
            p.variant(Phenotype::Sex),
            p.variant(Phenotype::Hair),
            p.variant(Phenotype::Eye),
            p.variant(Phenotype::Skin),
        ));
    }
    out
}
