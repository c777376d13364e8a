//! Artificial-language generation: roots, inflection rules, and the
//! train/test word sets built from them.

mod dataset;
mod rules;

use std::collections::{HashMap, HashSet};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

pub use dataset::{make_dataset, train_size_for, DatasetSplit, WordSample};
pub use rules::{Exponent, RuleKind, RuleSpec, Slot};

use crate::error::{Error, Result};
use crate::phonology::{Inventory, PhoneId};
use crate::rng::{stream_rng, Stream};

pub const ROOTS_PER_PATTERN: usize = 15;
pub const ROOT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootPattern {
    Cvc,
    Cvcvc,
}

impl RootPattern {
    fn shape(self) -> &'static [bool] {
        // true = vowel position
        match self {
            RootPattern::Cvc => &[false, true, false],
            RootPattern::Cvcvc => &[false, true, false, true, false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Root {
    pub index: usize,
    pub phones: Vec<PhoneId>,
    pub pattern: RootPattern,
}

impl Root {
    /// Build a root from its spelling, inferring the pattern.
    pub fn from_spelling(index: usize, spelling: &str, inventory: &Inventory) -> Result<Self> {
        let phones = inventory.parse_word(spelling)?;
        let shape: Vec<bool> = phones.iter().map(|&p| inventory.is_vowel(p)).collect();
        let pattern = [RootPattern::Cvc, RootPattern::Cvcvc]
            .into_iter()
            .find(|p| p.shape() == shape.as_slice())
            .ok_or_else(|| Error::Degenerate(format!("`{spelling}` is neither CVC nor CVCVC")))?;
        Ok(Root { index, phones, pattern })
    }
}

/// Generate 30 distinct roots (15 CVC then 15 CVCVC) that every rule the
/// inventory supports realizes unambiguously. A set with a collision is
/// discarded and redrawn from the next derived stream.
pub fn generate_roots(seed: u64, inventory: &Inventory) -> Result<Vec<Root>> {
    if inventory.consonants().is_empty() || inventory.vowels().is_empty() {
        return Err(Error::InvalidInventory(
            "root generation needs consonants and oral vowels".into(),
        ));
    }
    let has_nasals = inventory.nasalized_vowels().next().is_some();
    let rules: Vec<RuleSpec> = RuleKind::ALL
        .into_iter()
        .filter(|&k| k != RuleKind::Mutation || has_nasals)
        .map(RuleSpec::standard)
        .collect();

    for attempt in 0..ROOT_ATTEMPTS {
        let mut rng = stream_rng(seed, Stream::Roots, attempt as u64);
        let mut roots = Vec::with_capacity(2 * ROOTS_PER_PATTERN);
        let mut seen = HashSet::new();
        for pattern in [RootPattern::Cvc, RootPattern::Cvcvc] {
            let mut made = 0;
            while made < ROOTS_PER_PATTERN {
                let phones: Vec<PhoneId> = pattern
                    .shape()
                    .iter()
                    .map(|&vowel| {
                        let pool = if vowel {
                            inventory.vowels()
                        } else {
                            inventory.consonants()
                        };
                        *pool.choose(&mut rng).expect("nonempty pool")
                    })
                    .collect();
                if seen.insert(phones.clone()) {
                    roots.push(Root {
                        index: roots.len(),
                        phones,
                        pattern,
                    });
                    made += 1;
                }
            }
        }
        let mut ok = true;
        for rule in &rules {
            if find_ambiguity(rule, inventory, &roots)?.is_some() {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(roots);
        }
    }
    Err(Error::RootGeneration {
        attempts: ROOT_ATTEMPTS,
    })
}

/// First surface form that two distinct (root, values) pairs share, if any.
pub fn find_ambiguity(rule: &RuleSpec, inventory: &Inventory, roots: &[Root]) -> Result<Option<Vec<PhoneId>>> {
    let mut seen: HashMap<Vec<PhoneId>, (usize, Vec<usize>)> = HashMap::new();
    for root in roots {
        for values in rule.value_combinations() {
            let surface = rule.apply(inventory, root, &values)?;
            if seen.insert(surface.clone(), (root.index, values)).is_some() {
                return Ok(Some(surface));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spell(rule: RuleKind, root: &str, values: &[usize]) -> String {
        let inv = Inventory::with_nasals();
        let r = Root::from_spelling(0, root, &inv).unwrap();
        let w = RuleSpec::standard(rule).apply(&inv, &r, values).unwrap();
        inv.spell(&w)
    }

    #[test]
    fn attested_forms() {
        use RuleKind::*;
        assert_eq!(spell(Suffix, "vibun", &[0]), "vibuni");
        assert_eq!(spell(Suffix, "vibun", &[1]), "vibuna");
        assert_eq!(spell(Prefix, "vibun", &[0]), "ivibun");
        assert_eq!(spell(Prefix, "vibun", &[1]), "avibun");
        assert_eq!(spell(Infix, "vibun", &[0]), "vikbun");
        assert_eq!(spell(Infix, "vibun", &[1]), "vinbun");
        assert_eq!(spell(Circumfix, "vibun", &[0]), "ivibuni");
        assert_eq!(spell(Circumfix, "vibun", &[1]), "avibuna");
        assert_eq!(spell(Mutation, "vibun", &[0]), "vibun");
        assert_eq!(spell(Mutation, "vibun", &[1]), "vibũn");
        assert_eq!(spell(Deletion, "vibun", &[0]), "vibun");
        assert_eq!(spell(Deletion, "vibun", &[1]), "vibu");
        assert_eq!(spell(Template, "vibun", &[0]), "vaban");
        assert_eq!(spell(Template, "vibun", &[1]), "vbaan");
        assert_eq!(spell(TwoSuffix, "migon", &[1, 1]), "migonik");
        assert_eq!(spell(TwoSuffix, "migon", &[1, 0]), "migonis");
        assert_eq!(spell(TwoSuffix, "migon", &[0, 1]), "migonak");
        assert_eq!(spell(TwoSuffix, "migon", &[0, 0]), "migonas");
    }

    #[test]
    fn cvc_forms() {
        use RuleKind::*;
        // first vowel of `mig` is position 1, so the infix lands after it
        assert_eq!(spell(Infix, "mig", &[0]), "mikg");
        assert_eq!(spell(Template, "mig", &[0]), "mag");
        assert_eq!(spell(Template, "mig", &[1]), "mgaa");
        assert_eq!(spell(Deletion, "mig", &[1]), "mi");
        assert_eq!(spell(Mutation, "mig", &[1]), "mĩg");
        assert_eq!(spell(TwoPrefix, "mig", &[0, 1]), "simig");
        assert_eq!(spell(PrefixSuffix, "mig", &[1, 0]), "emiga");
    }

    #[test]
    fn mutation_requires_nasals() {
        let inv = Inventory::base();
        let r = Root::from_spelling(0, "vibun", &inv).unwrap();
        let err = RuleSpec::standard(RuleKind::Mutation).apply(&inv, &r, &[1]);
        assert!(matches!(err, Err(Error::UnknownPhone(_))));
    }

    #[test]
    fn deletion_rejects_short_roots() {
        let inv = Inventory::base();
        let r = Root {
            index: 0,
            phones: vec![inv.lookup("a").unwrap()],
            pattern: RootPattern::Cvc,
        };
        let err = RuleSpec::standard(RuleKind::Deletion).apply(&inv, &r, &[1]);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn out_of_range_values() {
        let inv = Inventory::base();
        let r = Root::from_spelling(0, "vibun", &inv).unwrap();
        let spec = RuleSpec::standard(RuleKind::Suffix);
        assert!(spec.apply(&inv, &r, &[2]).is_err());
        assert!(spec.apply(&inv, &r, &[0, 0]).is_err());
    }

    #[test]
    fn slot_shapes() {
        for k in RuleKind::SINGLE {
            assert_eq!(RuleSpec::standard(k).slot_sizes(), vec![2]);
        }
        for k in RuleKind::TWO_AFFIX {
            assert_eq!(RuleSpec::standard(k).slot_sizes(), vec![2, 2]);
            assert_eq!(RuleSpec::standard(k).value_combinations().len(), 4);
        }
    }

    #[test]
    fn generated_roots_are_well_formed() {
        let inv = Inventory::with_nasals();
        let roots = generate_roots(11, &inv).unwrap();
        assert_eq!(roots.len(), 30);
        let cvc = roots.iter().filter(|r| r.pattern == RootPattern::Cvc).count();
        assert_eq!(cvc, 15);
        let distinct: HashSet<_> = roots.iter().map(|r| r.phones.clone()).collect();
        assert_eq!(distinct.len(), 30);
        for (i, r) in roots.iter().enumerate() {
            assert_eq!(r.index, i);
            for (&p, &vowel) in r.phones.iter().zip(r.pattern.shape()) {
                assert_eq!(inv.is_vowel(p), vowel);
                assert!(!inv.nasalized_vowels().any(|n| n == p));
            }
        }
        assert_eq!(generate_roots(11, &inv).unwrap(), roots);
        assert_ne!(generate_roots(12, &inv).unwrap(), roots);
    }

    #[test]
    fn rule_kind_parsing() {
        assert_eq!("two-suffix".parse::<RuleKind>().unwrap(), RuleKind::TwoSuffix);
        assert_eq!("prefixSuffix".parse::<RuleKind>().unwrap(), RuleKind::PrefixSuffix);
        assert!("reduplication".parse::<RuleKind>().is_err());
    }
}
