//! Phone inventories and their binary feature encoding.
//!
//! A phone is presented to the network as its feature vector; the word
//! boundary is the all-zero pattern and is deliberately not an inventory
//! member.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FEATURE_NAMES: [&str; 12] = [
    "syllabic",
    "sonorant",
    "voiced",
    "nasal",
    "continuant",
    "lateral",
    "labial",
    "coronal",
    "dorsal",
    "high",
    "low",
    "back",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

const SYLLABIC: usize = 0;
const NASAL: usize = 3;

const BASE_TABLE: &str = include_str!("../data/phones19.tsv");
const NASAL_TABLE: &str = include_str!("../data/phones24.tsv");

/// Index of a phone within its [`Inventory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhoneId(pub u16);

impl PhoneId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Either a real phone or the word boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Boundary,
    Phone(PhoneId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phone {
    pub symbol: String,
    pub features: [u8; FEATURE_COUNT],
}

impl Phone {
    pub fn is_vowel(&self) -> bool {
        self.features[SYLLABIC] == 1
    }

    pub fn is_nasal(&self) -> bool {
        self.features[NASAL] == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    phones: Vec<Phone>,
    consonants: Vec<PhoneId>,
    vowels: Vec<PhoneId>,
    /// Nasalized vowels, paired with the oral vowel they derive from.
    nasalized: Vec<(PhoneId, PhoneId)>,
}

impl Inventory {
    /// The 19-phone inventory used by every rule except mutation.
    pub fn base() -> Self {
        Self::parse(BASE_TABLE).expect("embedded 19-phone table is valid")
    }

    /// The 24-phone inventory: [`Inventory::base`] followed by five
    /// nasalized vowels. Ids of the shared phones coincide.
    pub fn with_nasals() -> Self {
        Self::parse(NASAL_TABLE).expect("embedded 24-phone table is valid")
    }

    pub fn base_table() -> &'static str {
        BASE_TABLE
    }

    pub fn nasal_table() -> &'static str {
        NASAL_TABLE
    }

    /// Parse a `symbol f1 .. f12` table. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut phones = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fmt_err = |reason: String| Error::InventoryFormat {
                line: lineno + 1,
                reason,
            };
            let mut fields = line.split_whitespace();
            let symbol = fields.next().expect("nonempty line").to_string();
            let values: Vec<&str> = fields.collect();
            if values.len() != FEATURE_COUNT {
                return Err(fmt_err(format!(
                    "expected {FEATURE_COUNT} features for `{symbol}`, found {}",
                    values.len()
                )));
            }
            let mut features = [0u8; FEATURE_COUNT];
            for (slot, v) in features.iter_mut().zip(values) {
                *slot = match v {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(fmt_err(format!("feature value `{other}` is not 0/1"))),
                };
            }
            phones.push(Phone { symbol, features });
        }
        Self::from_phones(phones)
    }

    pub fn from_phones(phones: Vec<Phone>) -> Result<Self> {
        if phones.len() > u16::MAX as usize {
            return Err(Error::InvalidInventory("too many phones".into()));
        }
        let mut seen_sym = HashSet::new();
        let mut seen_code = HashSet::new();
        for p in &phones {
            if !seen_sym.insert(p.symbol.as_str()) {
                return Err(Error::InvalidInventory(format!("duplicate symbol `{}`", p.symbol)));
            }
            if p.features.iter().all(|&f| f == 0) {
                return Err(Error::InvalidInventory(format!(
                    "`{}` encodes as all zeros, which is reserved for the boundary",
                    p.symbol
                )));
            }
            if !seen_code.insert(p.features) {
                return Err(Error::InvalidInventory(format!(
                    "`{}` duplicates another phone's encoding",
                    p.symbol
                )));
            }
        }

        let mut consonants = Vec::new();
        let mut vowels = Vec::new();
        let mut nasalized = Vec::new();
        for (i, p) in phones.iter().enumerate() {
            let id = PhoneId(i as u16);
            if !p.is_vowel() {
                consonants.push(id);
                continue;
            }
            if p.is_nasal() {
                let mut oral = p.features;
                oral[NASAL] = 0;
                let base = phones.iter().position(|q| q.features == oral).ok_or_else(|| {
                    Error::InvalidInventory(format!("nasal vowel `{}` has no oral counterpart", p.symbol))
                })?;
                nasalized.push((id, PhoneId(base as u16)));
            } else {
                vowels.push(id);
            }
        }
        Ok(Inventory {
            phones,
            consonants,
            vowels,
            nasalized,
        })
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        FEATURE_COUNT
    }

    pub fn phone(&self, id: PhoneId) -> &Phone {
        &self.phones[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = PhoneId> + '_ {
        (0..self.phones.len()).map(|i| PhoneId(i as u16))
    }

    pub fn consonants(&self) -> &[PhoneId] {
        &self.consonants
    }

    /// Oral vowels only.
    pub fn vowels(&self) -> &[PhoneId] {
        &self.vowels
    }

    pub fn nasalized_vowels(&self) -> impl Iterator<Item = PhoneId> + '_ {
        self.nasalized.iter().map(|&(n, _)| n)
    }

    pub fn is_vowel(&self, id: PhoneId) -> bool {
        self.phone(id).is_vowel()
    }

    pub fn lookup(&self, symbol: &str) -> Result<PhoneId> {
        self.phones
            .iter()
            .position(|p| p.symbol == symbol)
            .map(|i| PhoneId(i as u16))
            .ok_or_else(|| Error::UnknownPhone(symbol.to_string()))
    }

    /// Nasalized counterpart of an oral vowel, if the inventory has one.
    pub fn nasalize(&self, oral: PhoneId) -> Option<PhoneId> {
        self.nasalized.iter().find(|&&(_, base)| base == oral).map(|&(n, _)| n)
    }

    pub fn encode(&self, segment: Segment) -> Result<Vec<f64>> {
        let mut out = vec![0.0; FEATURE_COUNT];
        self.encode_into(segment, &mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, segment: Segment, out: &mut [f64]) -> Result<()> {
        if out.len() != FEATURE_COUNT {
            return Err(Error::dim("encoding buffer", FEATURE_COUNT, out.len()));
        }
        match segment {
            Segment::Boundary => out.fill(0.0),
            Segment::Phone(id) => {
                let phone = self
                    .phones
                    .get(id.index())
                    .ok_or_else(|| Error::UnknownPhone(format!("#{}", id.0)))?;
                for (o, &f) in out.iter_mut().zip(&phone.features) {
                    *o = f as f64;
                }
            }
        }
        Ok(())
    }

    pub fn encode_symbol(&self, symbol: &str) -> Result<Vec<f64>> {
        self.encode(Segment::Phone(self.lookup(symbol)?))
    }

    /// Inventory phone (or the boundary, if `include_boundary`) closest in
    /// Euclidean distance to `activations`. Ties go to the boundary, then
    /// to the earliest phone.
    pub fn nearest_phone(&self, activations: &[f64], include_boundary: bool) -> Result<Segment> {
        if activations.len() != FEATURE_COUNT {
            return Err(Error::dim("activation vector", FEATURE_COUNT, activations.len()));
        }
        let mut best = None;
        let mut best_d = f64::INFINITY;
        if include_boundary {
            best = Some(Segment::Boundary);
            best_d = activations.iter().map(|a| a * a).sum();
        }
        for (i, p) in self.phones.iter().enumerate() {
            let d: f64 = activations
                .iter()
                .zip(&p.features)
                .map(|(a, &f)| (a - f as f64).powi(2))
                .sum();
            if d < best_d {
                best_d = d;
                best = Some(Segment::Phone(PhoneId(i as u16)));
            }
        }
        best.ok_or_else(|| Error::InvalidInventory("empty inventory".into()))
    }

    /// Canonical text form; round-trips through [`Inventory::parse`].
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# symbol {}", FEATURE_NAMES.join(" "));
        for p in &self.phones {
            s.push_str(&p.symbol);
            for f in p.features {
                let _ = write!(s, " {f}");
            }
            s.push('\n');
        }
        s
    }

    /// Short content hash of the canonical table.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_table().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn spell(&self, phones: &[PhoneId]) -> String {
        phones.iter().map(|&p| self.phone(p).symbol.as_str()).collect()
    }

    /// Parse a word written as concatenated single-symbol phones, e.g.
    /// `vibũn`. Greedy longest match so multi-character symbols work.
    pub fn parse_word(&self, text: &str) -> Result<Vec<PhoneId>> {
        let mut out = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let (id, len) = self
                .phones
                .iter()
                .enumerate()
                .filter(|(_, p)| rest.starts_with(p.symbol.as_str()))
                .max_by_key(|(_, p)| p.symbol.len())
                .map(|(i, p)| (PhoneId(i as u16), p.symbol.len()))
                .ok_or_else(|| Error::UnknownPhone(rest.chars().next().unwrap().to_string()))?;
            out.push(id);
            rest = &rest[len..];
        }
        Ok(out)
    }
}
