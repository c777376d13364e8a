//! Shared fixtures for the criterion benchmarks.

use morphnet_core::harness::{Language, Trainer};
use morphnet_core::{ArchitectureSpec, Hyperparams, RuleKind};

/// A freshly initialized trainer for `arch` on the standard `rule` language.
pub fn fixture(rule: RuleKind, arch: &ArchitectureSpec) -> (Language, Trainer) {
    let lang = Language::generate(rule, 1, false).expect("standard language");
    let trainer = Trainer::new(arch, &lang.layout(), Hyperparams::default(), 1).expect("valid architecture");
    (lang, trainer)
}
