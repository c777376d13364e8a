use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::phonology::{Inventory, PhoneId};
use crate::rng::{stream_rng, Stream};

use super::{Root, RuleKind, RuleSpec};

const SPLIT_ATTEMPTS: u64 = 100_000;
const FORMAT_TAG: &str = "morphnet-dataset v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSample {
    /// Surface phones; the boundary is prepended at presentation time.
    pub phones: Vec<PhoneId>,
    pub root: usize,
    pub inflections: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub rule: RuleKind,
    pub seed: u64,
    pub inventory_hash: String,
    pub n_roots: usize,
    pub slot_sizes: Vec<usize>,
    pub train: Vec<WordSample>,
    pub test: Vec<WordSample>,
}

/// Two thirds of the words go to training (40 of 60, 80 of 120).
pub fn train_size_for(total: usize) -> usize {
    total * 2 / 3
}

/// Cross every root with every value combination and split the words at
/// random, uniformly among the splits in which every root and every slot
/// value occurs in training at least once.
pub fn make_dataset(rule: &RuleSpec, inventory: &Inventory, roots: &[Root], seed: u64) -> Result<DatasetSplit> {
    let mut words = Vec::new();
    for root in roots {
        for values in rule.value_combinations() {
            words.push(WordSample {
                phones: rule.apply(inventory, root, &values)?,
                root: root.index,
                inflections: values,
            });
        }
    }
    let n_roots = roots.iter().map(|r| r.index + 1).max().unwrap_or(0);
    let slot_sizes = rule.slot_sizes();
    let n_train = train_size_for(words.len());

    let mut rng = stream_rng(seed, Stream::Split, 0);
    let mut order: Vec<usize> = (0..words.len()).collect();
    for _ in 0..SPLIT_ATTEMPTS {
        order.shuffle(&mut rng);
        let train_idx = &order[..n_train];
        if covers(train_idx.iter().map(|&i| &words[i]), roots, &slot_sizes) {
            let train = train_idx.iter().map(|&i| words[i].clone()).collect();
            let test = order[n_train..].iter().map(|&i| words[i].clone()).collect();
            return Ok(DatasetSplit {
                rule: rule.kind,
                seed,
                inventory_hash: inventory.hash(),
                n_roots,
                slot_sizes,
                train,
                test,
            });
        }
    }
    Err(Error::Degenerate(format!(
        "no covering train/test split found in {SPLIT_ATTEMPTS} draws"
    )))
}

fn covers<'a>(train: impl Iterator<Item = &'a WordSample>, roots: &[Root], slot_sizes: &[usize]) -> bool {
    let n_roots = roots.iter().map(|r| r.index + 1).max().unwrap_or(0);
    let mut root_seen = vec![false; n_roots];
    let mut value_seen: Vec<Vec<bool>> = slot_sizes.iter().map(|&n| vec![false; n]).collect();
    for w in train {
        root_seen[w.root] = true;
        for (slot, &v) in w.inflections.iter().enumerate() {
            value_seen[slot][v] = true;
        }
    }
    roots.iter().all(|r| root_seen[r.index]) && value_seen.iter().flatten().all(|&b| b)
}

impl DatasetSplit {
    pub fn all_words(&self) -> impl Iterator<Item = &WordSample> {
        self.train.iter().chain(&self.test)
    }

    pub fn is_disjoint(&self) -> bool {
        let key = |w: &WordSample| (w.root, w.inflections.clone());
        let train: std::collections::HashSet<_> = self.train.iter().map(key).collect();
        self.test.iter().all(|w| !train.contains(&key(w)))
    }

    /// Serialize as the line-oriented dataset format: a `#` header, then
    /// `phones<TAB>root<TAB>values` with train words first.
    pub fn to_text(&self, inventory: &Inventory) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {FORMAT_TAG}");
        let _ = writeln!(s, "# rule={}", self.rule);
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# inventory={}", self.inventory_hash);
        let _ = writeln!(s, "# roots={}", self.n_roots);
        let sizes: Vec<String> = self.slot_sizes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "# slots={}", sizes.join(","));
        let _ = writeln!(s, "# train={} test={}", self.train.len(), self.test.len());
        for w in self.all_words() {
            let phones: Vec<&str> = w.phones.iter().map(|&p| inventory.phone(p).symbol.as_str()).collect();
            let values: Vec<String> = w.inflections.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}\t{}\t{}", phones.join(" "), w.root, values.join(","));
        }
        s
    }

    pub fn parse(text: &str, inventory: &Inventory, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut header = std::collections::HashMap::new();
        let mut words = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        header.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(format!("line {}: expected 3 tab-separated columns", lineno + 1)));
            }
            let phones = cols[0]
                .split_whitespace()
                .map(|s| inventory.lookup(s))
                .collect::<Result<Vec<_>>>()?;
            let root = cols[1]
                .parse()
                .map_err(|_| bad(format!("line {}: bad root index", lineno + 1)))?;
            let inflections = cols[2]
                .split(',')
                .map(|v| v.parse())
                .collect::<std::result::Result<Vec<usize>, _>>()
                .map_err(|_| bad(format!("line {}: bad slot values", lineno + 1)))?;
            words.push(WordSample {
                phones,
                root,
                inflections,
            });
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| bad(format!("header is missing `{k}`")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| bad(format!("header `{k}` is not a number")))
        };
        let hash = get("inventory")?;
        if hash != inventory.hash() {
            return Err(bad(format!(
                "inventory hash {hash} does not match the active inventory {}",
                inventory.hash()
            )));
        }
        let n_train = num("train")? as usize;
        if n_train + num("test")? as usize != words.len() {
            return Err(bad("word count disagrees with header".into()));
        }
        let slot_sizes = get("slots")?
            .split(',')
            .map(|v| v.parse())
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| bad("bad slot sizes".into()))?;
        let n_roots = num("roots")? as usize;
        for w in &words {
            if w.root >= n_roots {
                return Err(Error::dim("root index bound", n_roots, w.root + 1));
            }
            if w.inflections.len() != slot_sizes.len() {
                return Err(Error::dim("inflection slots", slot_sizes.len(), w.inflections.len()));
            }
            for (&v, &n) in w.inflections.iter().zip(&slot_sizes) {
                if v >= n {
                    return Err(Error::dim("slot value bound", n, v + 1));
                }
            }
        }
        let test = words.split_off(n_train);
        Ok(DatasetSplit {
            rule: get("rule")?.parse()?,
            seed: num("seed")?,
            inventory_hash: hash,
            n_roots,
            slot_sizes,
            train: words,
            test,
        })
    }

    pub fn read(path: &Path, inventory: &Inventory) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, inventory, path)
    }

    /// Read a dataset file using the standard inventory of the rule named
    /// in its header.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rule: RuleKind = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .flat_map(str::split_whitespace)
            .find_map(|kv| kv.strip_prefix("rule="))
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                reason: "header is missing `rule`".into(),
            })?
            .parse()?;
        Self::parse(&text, &rule.inventory(), path)
    }
}
