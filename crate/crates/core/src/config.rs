//! Experiment configuration: a TOML document of flat key-value sections.
//!
//! The config hash covers everything that can change a result (rules,
//! architectures, hyperparameters, regimen, seeds, data options) and
//! excludes the output directory, so two runs of the same experiment into
//! different directories carry the same hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::architectures::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::harness::Regimen;
use crate::morphology::RuleKind;
use crate::netcore::Hyperparams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    pub rules: Vec<RuleKind>,
    /// Seed for roots and train/test splits; one split per rule is shared
    /// by every network in the experiment.
    pub data_seed: u64,
    /// Restrict template-rule languages to CVCVC roots.
    #[serde(default)]
    pub template_cvcvc_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SeedSection {
    /// Network `i` uses seed `base + i`.
    pub base: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RegimenSection {
    pub epochs: usize,
    pub eval_every: usize,
    /// Leading epochs during which only root targets are shown.
    #[serde(default)]
    pub root_only_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ArchitectureSection {
    pub networks: Vec<ArchitectureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub architecture: ArchitectureSection,
    pub hyperparams: Hyperparams,
    pub regimen: RegimenSection,
    pub seeds: SeedSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Subset of the config that determines results.
#[derive(Serialize)]
struct Hashed<'a> {
    experiment: &'a ExperimentSection,
    architecture: &'a ArchitectureSection,
    hyperparams: &'a Hyperparams,
    regimen: &'a RegimenSection,
    seeds: &'a SeedSection,
}

impl ExperimentConfig {
    fn base(id: &str, rules: Vec<RuleKind>, networks: Vec<ArchitectureSpec>, epochs: usize, seeds: usize) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection {
                id: id.into(),
                rules,
                data_seed: 1,
                template_cvcvc_only: false,
            },
            architecture: ArchitectureSection { networks },
            hyperparams: Hyperparams::default(),
            regimen: RegimenSection {
                epochs,
                eval_every: 25,
                root_only_epochs: 0,
            },
            seeds: SeedSection { base: 1, count: seeds },
            output: OutputSection::default(),
        }
    }

    /// Version 1 vs version 2 on the seven single-affix rules.
    pub fn versions() -> Self {
        Self::base(
            "versions",
            RuleKind::SINGLE.to_vec(),
            vec![ArchitectureSpec::v1(), ArchitectureSpec::v2()],
            150,
            10,
        )
    }

    /// The three fixed ways of sharing two modules among three tasks.
    pub fn sharing() -> Self {
        Self::base(
            "sharing",
            RuleKind::TWO_AFFIX.to_vec(),
            ArchitectureSpec::shared_configurations()
                .into_iter()
                .map(ArchitectureSpec::shared)
                .collect(),
            150,
            10,
        )
    }

    /// Gated modules on the two-affix languages; `staged` shows root
    /// targets alone for the first 80 of 200 epochs, otherwise 120 epochs
    /// with every target.
    pub fn adaptive(staged: bool) -> Self {
        let mut c = Self::base(
            if staged { "adaptive-staged" } else { "adaptive" },
            RuleKind::TWO_AFFIX.to_vec(),
            vec![ArchitectureSpec::adaptive()],
            if staged { 200 } else { 120 },
            20,
        );
        if staged {
            c.regimen.root_only_epochs = 80;
        }
        c
    }

    /// A single network.
    pub fn single(rule: RuleKind, arch: ArchitectureSpec) -> Self {
        Self::base("train", vec![rule], vec![arch], 150, 1)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.regimen()?;
        if self.experiment.rules.is_empty() {
            return Err(Error::Config("no rules selected".into()));
        }
        if self.architecture.networks.is_empty() {
            return Err(Error::Config("no architectures selected".into()));
        }
        if self.seeds.count == 0 {
            return Err(Error::Config("seed count must be positive".into()));
        }
        if self.experiment.id.is_empty() || self.experiment.id.contains(['/', ',', '\n']) {
            return Err(Error::Config(format!("bad experiment id `{}`", self.experiment.id)));
        }
        Ok(())
    }

    pub fn regimen(&self) -> Result<Regimen> {
        Regimen::staged(
            self.regimen.epochs,
            self.regimen.eval_every,
            self.regimen.root_only_epochs,
        )
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds.count as u64).map(|i| self.seeds.base + i)
    }

    pub fn hash(&self) -> String {
        let hashed = Hashed {
            experiment: &self.experiment,
            architecture: &self.architecture,
            hyperparams: &self.hyperparams,
            regimen: &self.regimen,
            seeds: &self.seeds,
        };
        let text = toml::to_string(&hashed).expect("serializable");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        for c in [
            ExperimentConfig::versions(),
            ExperimentConfig::sharing(),
            ExperimentConfig::adaptive(true),
        ] {
            let text = c.to_toml();
            let back = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::versions();
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.hyperparams.learning_rate = 0.2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ExperimentConfig::versions();
        c.hyperparams.momentum = 1.0;
        assert!(ExperimentConfig::parse(&c.to_toml()).is_err());
        assert!(ExperimentConfig::parse("[experiment]\nid = 3").is_err());
        let mut c = ExperimentConfig::versions();
        c.regimen.root_only_epochs = 500;
        assert!(c.validate().is_err());
    }

    #[test]
    fn readable_sections() {
        let text = ExperimentConfig::adaptive(true).to_toml();
        assert!(text.contains("[hyperparams]"));
        assert!(text.contains("learning-rate = 0.1"));
        assert!(text.contains("root-only-epochs = 80"));
        assert!(text.contains("version = \"adaptive\""));
    }
}
