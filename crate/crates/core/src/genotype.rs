//! Parsing of consumer-genomics raw genotype exports.
//!
//! The accepted format is line-oriented UTF-8 (LF or CRLF), `#`-prefixed
//! comments, and TAB-separated data lines of
//! `rsid<TAB>chromosome<TAB>position<TAB>genotype`. Only panel rsIDs are
//! retained; every other data line is skipped after being checked for
//! Y-chromosome evidence.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Phenotype, SnpPanel};

/// One of the four nucleotides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Allele {
    A,
    C,
    G,
    T,
}

impl Allele {
    fn from_char(c: char) -> Option<Allele> {
        match c.to_ascii_uppercase() {
            'A' => Some(Allele::A),
            'C' => Some(Allele::C),
            'G' => Some(Allele::G),
            'T' => Some(Allele::T),
            _ => None,
        }
    }

    pub fn as_char(&self) -> char {
        match self {
            Allele::A => 'A',
            Allele::C => 'C',
            Allele::G => 'G',
            Allele::T => 'T',
        }
    }
}

/// An unordered diploid call, stored sorted so `AG == GA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AllelePair(Allele, Allele);

impl AllelePair {
    pub fn new(a: Allele, b: Allele) -> AllelePair {
        if a <= b {
            AllelePair(a, b)
        } else {
            AllelePair(b, a)
        }
    }

    pub fn alleles(&self) -> (Allele, Allele) {
        (self.0, self.1)
    }

    pub fn parse(s: &str) -> Option<AllelePair> {
        let mut chars = s.chars();
        let a = Allele::from_char(chars.next()?)?;
        let b = Allele::from_char(chars.next()?)?;
        if chars.next().is_some() {
            return None;
        }
        Some(AllelePair::new(a, b))
    }
}

impl fmt::Display for AllelePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0.as_char(), self.1.as_char())
    }
}

impl Serialize for AllelePair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AllelePair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AllelePair::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid allele pair {s:?}")))
    }
}

/// A panel SNP's call in one record: either a diploid call or missing.
/// Explicit "--" markers, indel calls, and rsIDs absent from the source
/// file all land on `Missing`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenotypeCall {
    Called(AllelePair),
    Missing,
}

impl GenotypeCall {
    pub fn as_pair(&self) -> Option<AllelePair> {
        match self {
            GenotypeCall::Called(p) => Some(*p),
            GenotypeCall::Missing => None,
        }
    }
}

/// One individual's calls over the panel SNPs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenotypeRecord {
    pub individual_id: String,
    /// Total over the panel: one entry per panel rsID.
    pub calls: BTreeMap<String, GenotypeCall>,
    /// Whether the source file carried any non-missing Y-chromosome call.
    pub has_y_calls: bool,
}

impl GenotypeRecord {
    pub fn call(&self, rsid: &str) -> GenotypeCall {
        self.calls
            .get(rsid)
            .copied()
            .unwrap_or(GenotypeCall::Missing)
    }

    pub fn with_id(mut self, id: &str) -> GenotypeRecord {
        self.individual_id = id.to_string();
        self
    }
}

/// Classification of a raw genotype token.
enum RawCall {
    /// Two ACGT alleles: a usable diploid call.
    Diploid(AllelePair),
    /// Present but not a diploid substitution call (hemizygous single
    /// allele, indel I/D calls). Counts as Y evidence, not as a panel call.
    OtherPresent,
    /// "--" or "-": an explicit no-call.
    Missing,
}

fn classify_genotype(token: &str, line: usize) -> Result<RawCall> {
    if token == "--" || token == "-" {
        return Ok(RawCall::Missing);
    }
    if token.is_empty() || token.len() > 2 {
        return Err(Error::Parse {
            line,
            msg: format!("invalid genotype {token:?}"),
        });
    }
    let mut indel = false;
    for c in token.chars() {
        match c.to_ascii_uppercase() {
            'A' | 'C' | 'G' | 'T' => {}
            'I' | 'D' => indel = true,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("invalid allele character {other:?} in {token:?}"),
                })
            }
        }
    }
    if indel {
        // Panel SNPs are biallelic substitutions; indel calls carry no
        // usable allele information here.
        return Ok(RawCall::OtherPresent);
    }
    match AllelePair::parse(token) {
        Some(pair) => Ok(RawCall::Diploid(pair)),
        None => Ok(RawCall::OtherPresent), // single ACGT allele
    }
}

const ID_COMMENT_PREFIX: &str = "# individual:";

/// Parse one raw genotype document against `panel`.
///
/// The record id is taken from a `# individual: <id>` comment when present
/// (as written by [`serialize_raw_genotype`]) and is empty otherwise;
/// callers ingesting per-individual files set it from the file name.
pub fn parse_raw_genotype(text: &str, panel: &SnpPanel) -> Result<GenotypeRecord> {
    let mut individual_id = String::new();
    let mut seen: BTreeMap<String, (AllelePair, usize)> = BTreeMap::new();
    let mut has_y_calls = false;
    let mut data_lines = 0usize;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(ID_COMMENT_PREFIX) {
            individual_id = rest.trim().to_string();
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 TAB-separated columns, found {}", fields.len()),
            });
        }
        data_lines += 1;
        let (rsid, chromosome, _position, genotype) =
            (fields[0], fields[1], fields[2], fields[3]);
        let call = classify_genotype(genotype, line_no)?;
        if chromosome.eq_ignore_ascii_case("Y") && !matches!(call, RawCall::Missing) {
            has_y_calls = true;
        }
        if !panel.contains_snp(rsid) {
            continue;
        }
        let pair = match call {
            RawCall::Diploid(p) => p,
            _ => continue, // treated as missing for the panel
        };
        if let Some((prev, prev_line)) = seen.get(rsid) {
            if *prev != pair {
                return Err(Error::ConflictingCall {
                    rsid: rsid.to_string(),
                    line: line_no,
                    first: format!("{prev} (line {prev_line})"),
                    second: pair.to_string(),
                });
            }
        } else {
            seen.insert(rsid.to_string(), (pair, line_no));
        }
    }

    if data_lines == 0 {
        return Err(Error::EmptyDocument);
    }

    let mut calls = BTreeMap::new();
    for (_, rsid) in panel.all_snps() {
        let call = seen
            .get(rsid)
            .map(|(p, _)| GenotypeCall::Called(*p))
            .unwrap_or(GenotypeCall::Missing);
        calls.insert(rsid.to_string(), call);
    }

    Ok(GenotypeRecord {
        individual_id,
        calls,
        has_y_calls,
    })
}

/// Chromosome labels for the built-in panel SNPs, for serialized output.
/// Positions are not retained by parsing and are written as 0.
fn chromosome_of(rsid: &str, panel: &SnpPanel) -> &'static str {
    match panel.owner_of(rsid) {
        Some(Phenotype::Eye) => "15",
        Some(Phenotype::Hair) => match rsid {
            "rs12821256" => "12",
            "rs35264875" => "11",
            _ => "0",
        },
        Some(Phenotype::Skin) => match rsid {
            "rs26722" | "rs16891982" => "5",
            "rs1667394" => "15",
            _ => "0",
        },
        _ => "0",
    }
}

/// Marker rsid written on serialization when the record has Y evidence.
const Y_MARKER_RSID: &str = "i4000095";

/// Serialize a record back into the raw genotype format. Panel SNPs are
/// written in panel order; missing calls as `--`; Y evidence as a single
/// marker line. `parse_raw_genotype` of the output reproduces the record.
pub fn serialize_raw_genotype(record: &GenotypeRecord, panel: &SnpPanel) -> String {
    let mut out = String::new();
    out.push_str(ID_COMMENT_PREFIX);
    out.push(' ');
    out.push_str(&record.individual_id);
    out.push('\n');
    for (_, rsid) in panel.all_snps() {
        let genotype = match record.call(rsid) {
            GenotypeCall::Called(pair) => pair.to_string(),
            GenotypeCall::Missing => "--".to_string(),
        };
        out.push_str(&format!(
            "{rsid}\t{}\t0\t{genotype}\n",
            chromosome_of(rsid, panel)
        ));
    }
    if record.has_y_calls {
        out.push_str(&format!("{Y_MARKER_RSID}\tY\t0\tA\n"));
    }
    out
}

/// Parse a multi-individual collection: concatenated raw genotype documents
/// separated by `# individual: <id>` comments.
pub fn parse_genotype_collection(text: &str, panel: &SnpPanel) -> Result<Vec<GenotypeRecord>> {
    let mut sections: Vec<(usize, String)> = Vec::new();
    let mut current = String::new();
    let mut start_line = 1usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim_end_matches('\r').starts_with(ID_COMMENT_PREFIX) && !current.trim().is_empty()
        {
            sections.push((start_line, std::mem::take(&mut current)));
            start_line = idx + 1;
        }
        current.push_str(line);
        current.push('\n');
    }
    if !current.trim().is_empty() {
        sections.push((start_line, current));
    }
    let mut records = Vec::new();
    let mut ids = std::collections::BTreeSet::new();
    for (offset, section) in sections {
        let record = parse_raw_genotype(&section, panel).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line: line + offset - 1,
                msg,
            },
            other => other,
        })?;
        if !ids.insert(record.individual_id.clone()) {
            return Err(Error::DuplicateId(record.individual_id));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(records)
}

/// Serialize a collection of records into one document.
pub fn serialize_genotype_collection(records: &[GenotypeRecord], panel: &SnpPanel) -> String {
    records
        .iter()
        .map(|r| serialize_raw_genotype(r, panel))
        .collect()
}
