//! The SNP panel: which phenotypes are matched, which SNPs inform each one,
//! and the variant vocabulary per phenotype.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four phenotypes visible in a face image.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Phenotype {
    Sex,
    Hair,
    Eye,
    Skin,
}

impl Phenotype {
    pub const ALL: [Phenotype; 4] = [
        Phenotype::Sex,
        Phenotype::Hair,
        Phenotype::Eye,
        Phenotype::Skin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Phenotype::Sex => "sex",
            Phenotype::Hair => "hair",
            Phenotype::Eye => "eye",
            Phenotype::Skin => "skin",
        }
    }

    pub fn from_name(name: &str) -> Option<Phenotype> {
        match name.to_ascii_lowercase().as_str() {
            "sex" => Some(Phenotype::Sex),
            "hair" => Some(Phenotype::Hair),
            "eye" => Some(Phenotype::Eye),
            "skin" => Some(Phenotype::Skin),
            _ => None,
        }
    }

    /// Stable index into per-phenotype arrays.
    pub fn index(&self) -> usize {
        match self {
            Phenotype::Sex => 0,
            Phenotype::Hair => 1,
            Phenotype::Eye => 2,
            Phenotype::Skin => 3,
        }
    }
}

impl fmt::Display for Phenotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// SNP list and variant vocabulary for one phenotype.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelEntry {
    /// rsIDs informing this phenotype, in scoring order. Empty for sex,
    /// which is read off the sex chromosome rather than specific SNPs.
    pub snps: Vec<String>,
    /// Variant names, in canonical order. For sex, index 0 is the variant
    /// assigned when no Y-chromosome calls are present and index 1 the
    /// variant assigned when they are.
    pub variants: Vec<String>,
}

/// The full panel: per-phenotype SNP lists and variant sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnpPanel {
    entries: BTreeMap<Phenotype, PanelEntry>,
}

impl SnpPanel {
    /// Build a panel from explicit entries, validating the invariants:
    /// all four phenotypes present, no rsID shared across phenotypes,
    /// variant names unique within a phenotype.
    pub fn new(entries: BTreeMap<Phenotype, PanelEntry>) -> Result<SnpPanel> {
        let panel = SnpPanel { entries };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        for p in Phenotype::ALL {
            let entry = self
                .entries
                .get(&p)
                .ok_or_else(|| Error::InvalidPanel(format!("missing phenotype {p}")))?;
            if entry.variants.is_empty() {
                return Err(Error::InvalidPanel(format!("{p} has no variants")));
            }
            let mut seen = std::collections::BTreeSet::new();
            for v in &entry.variants {
                if !seen.insert(v.to_ascii_lowercase()) {
                    return Err(Error::InvalidPanel(format!(
                        "duplicate variant {v} for {p}"
                    )));
                }
            }
            if p == Phenotype::Sex && entry.variants.len() != 2 {
                return Err(Error::InvalidPanel(
                    "sex must have exactly 2 variants (no-Y first, Y-present second)"
                        .to_string(),
                ));
            }
        }
        let mut owners: BTreeMap<&str, Phenotype> = BTreeMap::new();
        for (&p, entry) in &self.entries {
            let mut in_this = std::collections::BTreeSet::new();
            for snp in &entry.snps {
                if !in_this.insert(snp.as_str()) {
                    return Err(Error::InvalidPanel(format!(
                        "duplicate rsID {snp} under {p}"
                    )));
                }
                if let Some(prev) = owners.insert(snp.as_str(), p) {
                    return Err(Error::InvalidPanel(format!(
                        "rsID {snp} appears under both {prev} and {p}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, p: Phenotype) -> &PanelEntry {
        &self.entries[&p]
    }

    pub fn snps(&self, p: Phenotype) -> &[String] {
        &self.entries[&p].snps
    }

    pub fn variants(&self, p: Phenotype) -> &[String] {
        &self.entries[&p].variants
    }

    /// All panel rsIDs with their owning phenotype, in phenotype order.
    pub fn all_snps(&self) -> impl Iterator<Item = (Phenotype, &str)> {
        Phenotype::ALL.into_iter().flat_map(move |p| {
            self.entries[&p].snps.iter().map(move |s| (p, s.as_str()))
        })
    }

    pub fn contains_snp(&self, rsid: &str) -> bool {
        self.owner_of(rsid).is_some()
    }

    pub fn owner_of(&self, rsid: &str) -> Option<Phenotype> {
        Phenotype::ALL
            .into_iter()
            .find(|&p| self.entries[&p].snps.iter().any(|s| s == rsid))
    }

    /// Index of a variant within its phenotype's canonical list
    /// (case-insensitive).
    pub fn variant_index(&self, p: Phenotype, name: &str) -> Option<usize> {
        self.entries[&p]
            .variants
            .iter()
            .position(|v| v.eq_ignore_ascii_case(name))
    }

    /// Variant assigned to a record by the Y-presence rule.
    pub fn sex_variant(&self, has_y_calls: bool) -> &str {
        let variants = &self.entries[&Phenotype::Sex].variants;
        if has_y_calls {
            &variants[1]
        } else {
            &variants[0]
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("panel serializes")
    }

    pub fn from_json(text: &str) -> Result<SnpPanel> {
        let entries: BTreeMap<Phenotype, PanelEntry> = serde_json::from_str(text)?;
        SnpPanel::new(entries)
    }
}

impl Default for SnpPanel {
    /// The built-in panel: three skin SNPs, two hair SNPs, twelve eye SNPs,
    /// and the sex chromosome marker.
    fn default() -> SnpPanel {
        fn strs(v: &[&str]) -> Vec<String> {
            v.iter().map(|s| s.to_string()).collect()
        }
        let mut entries = BTreeMap::new();
        entries.insert(
            Phenotype::Sex,
            PanelEntry {
                snps: vec![],
                variants: strs(&["F", "M"]),
            },
        );
        entries.insert(
            Phenotype::Hair,
            PanelEntry {
                snps: strs(&["rs12821256", "rs35264875"]),
                variants: strs(&["black", "blonde", "brown"]),
            },
        );
        entries.insert(
            Phenotype::Eye,
            PanelEntry {
                snps: strs(&[
                    "rs916977",
                    "rs1129038",
                    "rs1800401",
                    "rs2238289",
                    "rs2240203",
                    "rs3935591",
                    "rs4778241",
                    "rs7183877",
                    "rs8028689",
                    "rs12593929",
                    "rs1800407",
                    "rs7495174",
                ]),
                variants: strs(&["blue", "brown", "intermediate"]),
            },
        );
        entries.insert(
            Phenotype::Skin,
            PanelEntry {
                snps: strs(&["rs26722", "rs1667394", "rs16891982"]),
                variants: strs(&["pale", "intermediate", "dark"]),
            },
        );
        SnpPanel { entries }
    }
}
