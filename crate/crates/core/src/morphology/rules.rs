use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phonology::{Inventory, PhoneId};

use super::Root;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RuleKind {
    Suffix,
    Prefix,
    Infix,
    Circumfix,
    Mutation,
    Deletion,
    Template,
    TwoSuffix,
    TwoPrefix,
    PrefixSuffix,
}

impl RuleKind {
    pub const SINGLE: [RuleKind; 7] = [
        RuleKind::Suffix,
        RuleKind::Prefix,
        RuleKind::Infix,
        RuleKind::Circumfix,
        RuleKind::Mutation,
        RuleKind::Deletion,
        RuleKind::Template,
    ];

    pub const TWO_AFFIX: [RuleKind; 3] = [RuleKind::TwoSuffix, RuleKind::TwoPrefix, RuleKind::PrefixSuffix];

    pub const ALL: [RuleKind; 10] = [
        RuleKind::Suffix,
        RuleKind::Prefix,
        RuleKind::Infix,
        RuleKind::Circumfix,
        RuleKind::Mutation,
        RuleKind::Deletion,
        RuleKind::Template,
        RuleKind::TwoSuffix,
        RuleKind::TwoPrefix,
        RuleKind::PrefixSuffix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Suffix => "suffix",
            RuleKind::Prefix => "prefix",
            RuleKind::Infix => "infix",
            RuleKind::Circumfix => "circumfix",
            RuleKind::Mutation => "mutation",
            RuleKind::Deletion => "deletion",
            RuleKind::Template => "template",
            RuleKind::TwoSuffix => "twoSuffix",
            RuleKind::TwoPrefix => "twoPrefix",
            RuleKind::PrefixSuffix => "prefixSuffix",
        }
    }

    pub fn is_two_affix(self) -> bool {
        matches!(self, RuleKind::TwoSuffix | RuleKind::TwoPrefix | RuleKind::PrefixSuffix)
    }

    pub fn slot_count(self) -> usize {
        if self.is_two_affix() {
            2
        } else {
            1
        }
    }

    /// Mutation needs the nasalized vowels; every other rule uses the base
    /// inventory.
    pub fn inventory(self) -> Inventory {
        match self {
            RuleKind::Mutation => Inventory::with_nasals(),
            _ => Inventory::base(),
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::Config(format!("unknown rule kind `{s}`")))
    }
}

/// How one inflection value is realized on the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exponent {
    /// Affix phones; where they attach is determined by the rule kind.
    Affix(Vec<&'static str>),
    Circumfix(&'static str, &'static str),
    Identity,
    NasalizeFinalVowel,
    DeleteFinal,
    TemplatePresent,
    TemplatePast,
}

impl Exponent {
    pub fn label(&self) -> String {
        match self {
            Exponent::Affix(p) => p.concat(),
            Exponent::Circumfix(a, b) => format!("{a}…{b}"),
            Exponent::Identity => "bare".into(),
            Exponent::NasalizeFinalVowel => "nasalize".into(),
            Exponent::DeleteFinal => "delete".into(),
            Exponent::TemplatePresent => "CaCaC".into(),
            Exponent::TemplatePast => "CCaaC".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: &'static str,
    pub values: Vec<Exponent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSpec {
    pub kind: RuleKind,
    pub slots: Vec<Slot>,
}

fn affix(s: &'static str) -> Exponent {
    Exponent::Affix(vec![s])
}

fn tense(values: Vec<Exponent>) -> Vec<Slot> {
    vec![Slot { name: "tense", values }]
}

impl RuleSpec {
    /// The standard exponents for each rule kind. Single-affix values are
    /// ordered (present, past).
    pub fn standard(kind: RuleKind) -> Self {
        use Exponent::*;
        let slots = match kind {
            RuleKind::Suffix | RuleKind::Prefix => tense(vec![affix("i"), affix("a")]),
            RuleKind::Infix => tense(vec![affix("k"), affix("n")]),
            RuleKind::Circumfix => tense(vec![Circumfix("i", "i"), Circumfix("a", "a")]),
            RuleKind::Mutation => tense(vec![Identity, NasalizeFinalVowel]),
            RuleKind::Deletion => tense(vec![Identity, DeleteFinal]),
            RuleKind::Template => tense(vec![TemplatePresent, TemplatePast]),
            RuleKind::TwoSuffix => vec![
                Slot {
                    name: "suffix1",
                    values: vec![affix("a"), affix("i")],
                },
                Slot {
                    name: "suffix2",
                    values: vec![affix("s"), affix("k")],
                },
            ],
            RuleKind::TwoPrefix => vec![
                Slot {
                    name: "prefix1",
                    values: vec![affix("s"), affix("k")],
                },
                Slot {
                    name: "prefix2",
                    values: vec![affix("a"), affix("i")],
                },
            ],
            RuleKind::PrefixSuffix => vec![
                Slot {
                    name: "prefix",
                    values: vec![affix("u"), affix("e")],
                },
                Slot {
                    name: "suffix",
                    values: vec![affix("a"), affix("i")],
                },
            ],
        };
        RuleSpec { kind, slots }
    }

    pub fn slot_sizes(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.values.len()).collect()
    }

    /// Every combination of slot values, in lexicographic order.
    pub fn value_combinations(&self) -> Vec<Vec<usize>> {
        let mut combos = vec![Vec::new()];
        for slot in &self.slots {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    (0..slot.values.len()).map(move |v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        combos
    }

    /// Surface form of `root` under the given per-slot value indices.
    pub fn apply(&self, inventory: &Inventory, root: &Root, values: &[usize]) -> Result<Vec<PhoneId>> {
        if values.len() != self.slots.len() {
            return Err(Error::dim("inflection values", self.slots.len(), values.len()));
        }
        let mut exps = Vec::with_capacity(values.len());
        for (slot, &v) in self.slots.iter().zip(values) {
            let e = slot
                .values
                .get(v)
                .ok_or_else(|| Error::Config(format!("value {v} out of range for slot `{}`", slot.name)))?;
            exps.push(e);
        }
        let stem = &root.phones;
        let phones = |e: &Exponent| -> Result<Vec<PhoneId>> {
            match e {
                Exponent::Affix(p) => p.iter().map(|s| inventory.lookup(s)).collect(),
                other => Err(Error::Config(format!("exponent `{}` is not an affix", other.label()))),
            }
        };

        let out = match self.kind {
            RuleKind::Suffix => [stem.clone(), phones(exps[0])?].concat(),
            RuleKind::Prefix => [phones(exps[0])?, stem.clone()].concat(),
            RuleKind::Infix => {
                let pos = stem
                    .iter()
                    .position(|&p| inventory.is_vowel(p))
                    .ok_or_else(|| Error::Degenerate("infixation needs a vowel in the root".into()))?;
                let mut w = stem[..=pos].to_vec();
                w.extend(phones(exps[0])?);
                w.extend_from_slice(&stem[pos + 1..]);
                w
            }
            RuleKind::Circumfix => match exps[0] {
                Exponent::Circumfix(a, b) => {
                    let mut w = vec![inventory.lookup(a)?];
                    w.extend_from_slice(stem);
                    w.push(inventory.lookup(b)?);
                    w
                }
                other => return Err(Error::Config(format!("bad circumfix exponent {other:?}"))),
            },
            RuleKind::Mutation | RuleKind::Deletion | RuleKind::Template => modify(inventory, stem, exps[0])?,
            RuleKind::TwoSuffix => [stem.clone(), phones(exps[0])?, phones(exps[1])?].concat(),
            RuleKind::TwoPrefix => [phones(exps[0])?, phones(exps[1])?, stem.clone()].concat(),
            RuleKind::PrefixSuffix => [phones(exps[0])?, stem.clone(), phones(exps[1])?].concat(),
        };
        Ok(out)
    }
}

fn modify(inventory: &Inventory, stem: &[PhoneId], exp: &Exponent) -> Result<Vec<PhoneId>> {
    match exp {
        Exponent::Identity => Ok(stem.to_vec()),
        Exponent::NasalizeFinalVowel => {
            let pos = stem
                .iter()
                .rposition(|&p| inventory.is_vowel(p))
                .ok_or_else(|| Error::Degenerate("mutation needs a vowel in the root".into()))?;
            let nasal = inventory
                .nasalize(stem[pos])
                .ok_or_else(|| Error::UnknownPhone(format!("nasalized {}", inventory.phone(stem[pos]).symbol)))?;
            let mut w = stem.to_vec();
            w[pos] = nasal;
            Ok(w)
        }
        Exponent::DeleteFinal => {
            if stem.len() < 2 {
                return Err(Error::Degenerate(format!(
                    "deletion needs a root of at least 2 phones, got {}",
                    stem.len()
                )));
            }
            Ok(stem[..stem.len() - 1].to_vec())
        }
        Exponent::TemplatePresent | Exponent::TemplatePast => {
            let skeleton: Vec<PhoneId> = stem.iter().copied().filter(|&p| !inventory.is_vowel(p)).collect();
            if skeleton.len() < 2 {
                return Err(Error::Degenerate(
                    "template morphology needs at least two root consonants".into(),
                ));
            }
            let a = inventory.lookup("a")?;
            let mut w = Vec::with_capacity(skeleton.len() * 2);
            if *exp == Exponent::TemplatePresent {
                for (i, &c) in skeleton.iter().enumerate() {
                    if i > 0 {
                        w.push(a);
                    }
                    w.push(c);
                }
            } else {
                w.extend_from_slice(&skeleton[..2]);
                w.push(a);
                w.push(a);
                w.extend_from_slice(&skeleton[2..]);
            }
            Ok(w)
        }
        Exponent::Affix(_) | Exponent::Circumfix(..) => Err(Error::Config(format!(
            "exponent `{}` is not a root modification",
            exp.label()
        ))),
    }
}
