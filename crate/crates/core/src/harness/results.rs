//! Result files.
//!
//! An experiment directory holds:
//!
//! - `raw.csv`: one row per (run, eval point, task, split)
//! - `assignments.csv`: final gate matrix and task-to-module map of each
//!   adaptive run
//! - `runs.csv`: completion status of every run, aborted ones included
//! - `config.toml`: the configuration, verbatim
//! - `summary.tsv`: per-cell mean/sd and assignment histograms, derived
//!   from the files above
//!
//! Every file starts with `#` provenance lines carrying the tool version
//! and config hash.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::architectures::{SharingConfig, Task};
use crate::error::{Error, Result};

use super::{ExperimentOutput, Stats};

pub const RAW_FILE: &str = "raw.csv";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.tsv";

const RAW_HEADER: &str = "experiment,rule,architecture,seed,epoch,task,split,accuracy";
const ASSIGN_HEADER: &str = "experiment,rule,architecture,seed,configuration,modules,gates,unresolved";
const RUNS_HEADER: &str = "experiment,rule,architecture,seed,status,detail";

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn provenance(kind: &str, hash: &str) -> String {
    format!(
        "# morphnet {kind}\n# tool-version={}\n# config-hash={hash}\n",
        crate::VERSION
    )
}

pub fn raw_csv(out: &ExperimentOutput) -> String {
    let mut s = provenance("raw results", &out.config_hash);
    s.push_str(RAW_HEADER);
    s.push('\n');
    for r in &out.results {
        for e in &r.evals {
            for (split, accs) in [("train", &e.train), ("test", &e.test)] {
                for (t, acc) in accs.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{}",
                        r.experiment,
                        r.rule,
                        r.architecture,
                        r.seed,
                        e.epoch,
                        Task::from_index(t),
                        split,
                        acc
                    );
                }
            }
        }
    }
    s
}

pub fn assignments_csv(out: &ExperimentOutput) -> String {
    let mut s = provenance("gate assignments", &out.config_hash);
    s.push_str(ASSIGN_HEADER);
    s.push('\n');
    for r in &out.results {
        let Some(a) = &r.assignment else { continue };
        let modules: Vec<String> = a.modules.iter().map(|m| m.to_string()).collect();
        let gates: Vec<String> = a.gates.iter().flatten().map(|g| g.to_string()).collect();
        let unresolved = a.unresolved.iter().any(|&u| u);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.rule,
            r.architecture,
            r.seed,
            a.config(),
            modules.join(";"),
            gates.join(";"),
            unresolved
        );
    }
    s
}

pub fn runs_csv(out: &ExperimentOutput) -> String {
    let mut s = provenance("run status", &out.config_hash);
    s.push_str(RUNS_HEADER);
    s.push('\n');
    for r in &out.results {
        let (status, detail) = match &r.aborted {
            None => ("completed", String::new()),
            Some(d) => ("aborted", d.replace(',', ";")),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{status},{detail}",
            r.experiment, r.rule, r.architecture, r.seed
        );
    }
    s
}

/// Write all result files for an experiment into `dir`; returns the paths
/// written.
pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    let files = [
        (RAW_FILE, raw_csv(out)),
        (ASSIGNMENTS_FILE, assignments_csv(out)),
        (RUNS_FILE, runs_csv(out)),
        (
            CONFIG_FILE,
            format!("{}{}", provenance("config", &out.config_hash), out.config.to_toml()),
        ),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    let summary = Summary::from_dir(dir, false)?;
    let p = dir.join(SUMMARY_FILE);
    write_atomic(&p, summary.render().as_bytes())?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub experiment: String,
    pub rule: String,
    pub architecture: String,
    pub seed: u64,
    pub epoch: usize,
    pub task: String,
    pub split: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRecord {
    pub experiment: String,
    pub rule: String,
    pub architecture: String,
    pub seed: u64,
    pub configuration: String,
    pub unresolved: bool,
}

struct CsvFile {
    hash: Option<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(path: &Path, header: &str) -> Result<CsvFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut hash = None;
    let mut rows = Vec::new();
    let mut saw_header = false;
    let width = header.split(',').count();
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some(h) = c.trim().strip_prefix("config-hash=") {
                hash = Some(h.to_string());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != header {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: format!("expected header `{header}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<String> = line.split(',').map(str::to_string).collect();
        if cols.len() != width {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("line {}: expected {width} columns", i + 1),
            });
        }
        rows.push(cols);
    }
    Ok(CsvFile { hash, rows })
}

fn num<T: std::str::FromStr>(path: &Path, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        reason: format!("`{v}` is not a number"),
    })
}

/// Every file with the given name below `root` (or `root` itself), in
/// sorted order.
fn find_files(root: &Path, name: &str) -> Result<Vec<PathBuf>> {
    if root.is_file() {
        return Ok(if root.file_name().is_some_and(|n| n == name) {
            vec![root.to_path_buf()]
        } else {
            Vec::new()
        });
    }
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == name) {
                found.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub hashes: BTreeSet<String>,
    pub raw: Vec<RawRecord>,
    pub assignments: Vec<AssignmentRecord>,
    pub aborted: Vec<(String, String, String, u64)>,
}

type CellKey = (String, String, String, String, String);

impl Summary {
    /// Load every result file under `root`. Files from different configs
    /// are refused unless `force`.
    pub fn from_dir(root: &Path, force: bool) -> Result<Self> {
        let raw_files = find_files(root, RAW_FILE)?;
        if raw_files.is_empty() {
            return Err(Error::io(
                root.join(RAW_FILE),
                std::io::Error::new(std::io::ErrorKind::NotFound, "no raw result files"),
            ));
        }
        let mut hashes = BTreeSet::new();
        let mut raw = Vec::new();
        for p in &raw_files {
            let f = read_csv(p, RAW_HEADER)?;
            hashes.insert(f.hash.unwrap_or_default());
            for c in f.rows {
                raw.push(RawRecord {
                    experiment: c[0].clone(),
                    rule: c[1].clone(),
                    architecture: c[2].clone(),
                    seed: num(p, &c[3])?,
                    epoch: num(p, &c[4])?,
                    task: c[5].clone(),
                    split: c[6].clone(),
                    accuracy: num(p, &c[7])?,
                });
            }
        }
        let mut assignments = Vec::new();
        for p in find_files(root, ASSIGNMENTS_FILE)? {
            let f = read_csv(&p, ASSIGN_HEADER)?;
            hashes.insert(f.hash.unwrap_or_default());
            for c in f.rows {
                assignments.push(AssignmentRecord {
                    experiment: c[0].clone(),
                    rule: c[1].clone(),
                    architecture: c[2].clone(),
                    seed: num(&p, &c[3])?,
                    configuration: c[4].clone(),
                    unresolved: c[7] == "true",
                });
            }
        }
        let mut aborted = Vec::new();
        for p in find_files(root, RUNS_FILE)? {
            let f = read_csv(&p, RUNS_HEADER)?;
            hashes.insert(f.hash.unwrap_or_default());
            for c in f.rows {
                if c[4] != "completed" {
                    aborted.push((c[0].clone(), c[1].clone(), c[2].clone(), num(&p, &c[3])?));
                }
            }
        }
        if hashes.len() > 1 && !force {
            return Err(Error::MixedHashes(hashes.len()));
        }
        Ok(Summary {
            hashes,
            raw,
            assignments,
            aborted,
        })
    }

    /// Per (experiment, rule, architecture, task, split): the accuracies of
    /// each run at its final eval point.
    pub fn final_cells(&self) -> BTreeMap<CellKey, Vec<f64>> {
        let mut last_epoch: BTreeMap<(String, String, String, u64), usize> = BTreeMap::new();
        for r in &self.raw {
            let k = (r.experiment.clone(), r.rule.clone(), r.architecture.clone(), r.seed);
            let e = last_epoch.entry(k).or_insert(0);
            *e = (*e).max(r.epoch);
        }
        let mut cells: BTreeMap<CellKey, Vec<(u64, f64)>> = BTreeMap::new();
        for r in &self.raw {
            let k = (r.experiment.clone(), r.rule.clone(), r.architecture.clone(), r.seed);
            if last_epoch[&k] != r.epoch {
                continue;
            }
            cells
                .entry((
                    r.experiment.clone(),
                    r.rule.clone(),
                    r.architecture.clone(),
                    r.task.clone(),
                    r.split.clone(),
                ))
                .or_default()
                .push((r.seed, r.accuracy));
        }
        cells
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_by_key(|&(s, _)| s);
                (k, v.into_iter().map(|(_, a)| a).collect())
            })
            .collect()
    }

    pub fn histograms(&self) -> BTreeMap<(String, String, String), BTreeMap<String, usize>> {
        let mut h: BTreeMap<(String, String, String), BTreeMap<String, usize>> = BTreeMap::new();
        for a in &self.assignments {
            *h.entry((a.experiment.clone(), a.rule.clone(), a.architecture.clone()))
                .or_default()
                .entry(a.configuration.clone())
                .or_insert(0) += 1;
        }
        h
    }

    /// Deterministic text rendering (tab-separated).
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# morphnet summary");
        let _ = writeln!(s, "# tool-version={}", crate::VERSION);
        let hashes: Vec<&str> = self.hashes.iter().map(String::as_str).collect();
        let _ = writeln!(s, "# config-hash={}", hashes.join(";"));
        let _ = writeln!(s, "experiment\trule\tarchitecture\ttask\tsplit\tn\tmean\tsd");
        for ((exp, rule, arch, task, split), vals) in self.final_cells() {
            let st = Stats::of(&vals);
            let _ = writeln!(
                s,
                "{exp}\t{rule}\t{arch}\t{task}\t{split}\t{}\t{:.4}\t{:.4}",
                st.n, st.mean, st.sd
            );
        }
        let hist = self.histograms();
        if !hist.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "# module assignments");
            let _ = writeln!(s, "experiment\trule\tarchitecture\tconfiguration\tcount\ttotal");
            for ((exp, rule, arch), counts) in hist {
                let total: usize = counts.values().sum();
                for config in SharingConfig::ALL {
                    let c = counts.get(config.name()).copied().unwrap_or(0);
                    if c > 0 || config.name() != "other" {
                        let _ = writeln!(s, "{exp}\t{rule}\t{arch}\t{}\t{c}\t{total}", config.name());
                    }
                }
            }
        }
        if !self.aborted.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "# aborted runs");
            for (exp, rule, arch, seed) in &self.aborted {
                let _ = writeln!(s, "{exp}\t{rule}\t{arch}\t{seed}");
            }
        }
        s
    }
}
