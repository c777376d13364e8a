//! Training, evaluation, and the replication experiments.

mod regimen;
pub mod results;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use regimen::{ActiveTasks, Phase, Regimen};

use crate::architectures::{ArchitectureSpec, Assignment, Model, Targets, Task, TaskLayout};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::morphology::{
    generate_roots, make_dataset, DatasetSplit, Root, RootPattern, RuleKind, RuleSpec, WordSample,
};
use crate::netcore::Hyperparams;
use crate::phonology::{Inventory, Segment};
use crate::rng::{derive_seed, Rng, Stream};

/// A generated language: its inventory, roots and fixed train/test split.
#[derive(Debug, Clone)]
pub struct Language {
    pub rule: RuleKind,
    pub inventory: Inventory,
    pub roots: Vec<Root>,
    pub dataset: DatasetSplit,
    encodings: Vec<Vec<f64>>,
}

impl Language {
    /// Roots come from `data_seed` and are the same for every rule; the
    /// split is drawn from `data_seed` as well.
    pub fn generate(rule: RuleKind, data_seed: u64, cvcvc_only: bool) -> Result<Self> {
        let mut roots = generate_roots(data_seed, &Inventory::with_nasals())?;
        if cvcvc_only && rule == RuleKind::Template {
            roots.retain(|r| r.pattern == RootPattern::Cvcvc);
            for (i, r) in roots.iter_mut().enumerate() {
                r.index = i;
            }
        }
        let inventory = rule.inventory();
        let dataset = make_dataset(&RuleSpec::standard(rule), &inventory, &roots, data_seed)?;
        Ok(Self::from_parts(rule, inventory, roots, dataset))
    }

    /// A language read back from a dataset file; the root list is not
    /// stored there and is left empty.
    pub fn from_dataset(dataset: DatasetSplit) -> Self {
        let rule = dataset.rule;
        Self::from_parts(rule, rule.inventory(), Vec::new(), dataset)
    }

    pub fn from_parts(rule: RuleKind, inventory: Inventory, roots: Vec<Root>, dataset: DatasetSplit) -> Self {
        let encodings = inventory
            .ids()
            .map(|id| inventory.encode(Segment::Phone(id)).expect("inventory phone"))
            .collect();
        Language {
            rule,
            inventory,
            roots,
            dataset,
            encodings,
        }
    }

    pub fn layout(&self) -> TaskLayout {
        TaskLayout {
            features: self.inventory.feature_count(),
            roots: self.dataset.n_roots,
            slot_sizes: self.dataset.slot_sizes.clone(),
        }
    }

    fn encoding(&self, p: crate::phonology::PhoneId) -> &[f64] {
        &self.encodings[p.index()]
    }
}

fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn task_targets(layout: &TaskLayout, word: &WordSample) -> Vec<Vec<f64>> {
    let mut t = vec![one_hot(layout.roots, word.root)];
    for (s, &v) in word.inflections.iter().enumerate() {
        t.push(one_hot(layout.slot_sizes[s], v));
    }
    t
}

/// True when `output` is strictly closer (Euclidean) to the one-hot target
/// `correct` than to every other one-hot target of the same size.
pub fn nearest_target_correct(output: &[f64], correct: usize) -> bool {
    // |y - e_k|^2 = |y|^2 - 2 y_k + 1, so the nearest one-hot is the argmax
    let yc = output[correct];
    output.iter().enumerate().all(|(k, &y)| k == correct || y < yc)
}

/// Accuracy per task (root first, then each inflection slot).
pub type TaskAccuracy = Vec<f64>;

/// Present each word (boundary first, context reset between words) and
/// score the task outputs when the last phone has been read.
pub fn evaluate(model: &mut Model, lang: &Language, words: &[WordSample]) -> Result<TaskAccuracy> {
    evaluate_at(model, lang, words, 0)
}

/// As [`evaluate`], but scored `steps_before_end` phones before the end
/// of each word.
pub fn evaluate_at(
    model: &mut Model,
    lang: &Language,
    words: &[WordSample],
    steps_before_end: usize,
) -> Result<TaskAccuracy> {
    let layout = model.layout().clone();
    let boundary = vec![0.0; layout.features];
    let mut correct = vec![0usize; layout.task_count()];
    for w in words {
        if w.phones.len() < steps_before_end {
            return Err(Error::Degenerate("word shorter than the evaluation offset".into()));
        }
        model.reset();
        model.forward(&boundary)?;
        for &p in &w.phones[..w.phones.len() - steps_before_end] {
            model.forward(lang.encoding(p))?;
        }
        for task in layout.tasks() {
            let want = match task {
                Task::Root => w.root,
                Task::Inflection(s) => w.inflections[s],
            };
            if nearest_target_correct(&model.task_output(task), want) {
                correct[task.index()] += 1;
            }
        }
    }
    let n = words.len().max(1) as f64;
    Ok(correct.into_iter().map(|c| c as f64 / n).collect())
}

/// A model plus the state that drives its training: the shuffle stream
/// and the epoch counter.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub hyper: Hyperparams,
    pub seed: u64,
    pub epoch: usize,
    rng: Rng,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub tool_version: String,
    pub seed: u64,
    pub epoch: usize,
    pub hyperparams: Hyperparams,
    /// Position of the shuffle stream, in 32-bit words.
    pub rng_word_pos: String,
    pub model: Model,
}

const CHECKPOINT_FORMAT: u32 = 1;

impl Trainer {
    pub fn new(arch: &ArchitectureSpec, layout: &TaskLayout, hyper: Hyperparams, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let mut model = Model::build(arch, layout)?;
        model.init(seed, &hyper);
        Ok(Trainer {
            model,
            hyper,
            seed,
            epoch: 0,
            rng: Rng::seed_from_u64(derive_seed(seed, Stream::Shuffle, 0)),
        })
    }

    /// One pass over the training words in fresh random order, updating
    /// after every phone.
    pub fn train_epoch(&mut self, lang: &Language, active: &ActiveTasks) -> Result<()> {
        let layout = self.model.layout().clone();
        let flags = active.flags(layout.task_count());
        let train = &lang.dataset.train;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let boundary = vec![0.0; layout.features];
        for i in order {
            let word = &train[i];
            let tasks = task_targets(&layout, word);
            self.model.reset();
            self.model.forward(&boundary)?;
            for &p in &word.phones {
                let x = lang.encoding(p);
                let targets = Targets {
                    phone: x,
                    tasks: &tasks,
                };
                self.model.train_step(x, &targets, &flags, &self.hyper)?;
            }
        }
        self.epoch += 1;
        Ok(())
    }

    /// Snapshot for resuming. Activations are cleared: every word starts
    /// from a reset state, so they carry nothing forward.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut model = self.model.clone();
        model.reset();
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            tool_version: crate::VERSION.to_string(),
            seed: self.seed,
            epoch: self.epoch,
            hyperparams: self.hyper,
            rng_word_pos: self.rng.get_word_pos().to_string(),
            model,
        }
    }

    pub fn resume(cp: Checkpoint) -> Result<Self> {
        if cp.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format {}", cp.format)));
        }
        let pos: u128 = cp
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Config("bad RNG position in checkpoint".into()))?;
        let mut rng = Rng::seed_from_u64(derive_seed(cp.seed, Stream::Shuffle, 0));
        rng.set_word_pos(pos);
        let mut model = cp.model;
        model.reindex();
        Ok(Trainer {
            model,
            hyper: cp.hyperparams,
            seed: cp.seed,
            epoch: cp.epoch,
            rng,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string(&self.checkpoint()).expect("checkpoint serializes");
        results::write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::resume(cp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub epoch: usize,
    pub train: TaskAccuracy,
    pub test: TaskAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub experiment: String,
    pub rule: RuleKind,
    pub architecture: String,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub evals: Vec<EvalPoint>,
    pub assignment: Option<Assignment>,
    /// Set when training stopped on non-finite weights.
    pub aborted: Option<String>,
}

impl RunResult {
    pub fn final_eval(&self) -> Option<&EvalPoint> {
        self.evals.last()
    }

    pub fn final_test(&self, task: Task) -> Option<f64> {
        self.final_eval().map(|e| e.test[task.index()])
    }
}

/// One cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub experiment: String,
    pub rule: RuleKind,
    pub architecture: ArchitectureSpec,
    pub seed: u64,
    pub regimen: Regimen,
    pub hyper: Hyperparams,
}

/// Train one network under its regimen, evaluating at the configured
/// cadence. Divergence ends the run early and is reported in the result.
pub fn train_run(spec: &RunSpec, lang: &Language) -> Result<RunResult> {
    let trainer = Trainer::new(&spec.architecture, &lang.layout(), spec.hyper, spec.seed)?;
    train_run_from(spec, lang, trainer, |_| Ok(()))
}

/// Continue `trainer` to the end of the regimen. `after_eval` sees the
/// trainer at every evaluation point (checkpointing hook). Only eval points
/// past the trainer's current epoch are recorded, so a resumed run reports
/// just the remainder.
pub fn train_run_from(
    spec: &RunSpec,
    lang: &Language,
    mut trainer: Trainer,
    mut after_eval: impl FnMut(&Trainer) -> Result<()>,
) -> Result<RunResult> {
    if !lang.dataset.is_disjoint() {
        return Err(Error::Config("train and test words overlap".into()));
    }
    if trainer.epoch > spec.regimen.total_epochs {
        return Err(Error::Config(format!(
            "checkpoint is at epoch {} but the regimen ends at {}",
            trainer.epoch, spec.regimen.total_epochs
        )));
    }
    let eval_points = spec.regimen.eval_points();
    let mut evals = Vec::with_capacity(eval_points.len());
    let mut aborted = None;
    let mut snapshot = |trainer: &mut Trainer, evals: &mut Vec<EvalPoint>| -> Result<()> {
        let train = evaluate(&mut trainer.model, lang, &lang.dataset.train)?;
        let test = evaluate(&mut trainer.model, lang, &lang.dataset.test)?;
        evals.push(EvalPoint {
            epoch: trainer.epoch,
            train,
            test,
        });
        after_eval(trainer)
    };
    if trainer.epoch == 0 {
        snapshot(&mut trainer, &mut evals)?;
    }
    for epoch in trainer.epoch..spec.regimen.total_epochs {
        trainer.train_epoch(lang, spec.regimen.active_at(epoch))?;
        if !trainer.model.is_finite() {
            aborted = Some(
                Error::Divergence {
                    epoch: epoch + 1,
                    detail: "non-finite weight".into(),
                }
                .to_string(),
            );
            break;
        }
        if eval_points.contains(&trainer.epoch) {
            snapshot(&mut trainer, &mut evals)?;
        }
    }
    Ok(RunResult {
        experiment: spec.experiment.clone(),
        rule: spec.rule,
        architecture: spec.architecture.label(),
        seed: spec.seed,
        hyperparams: spec.hyper,
        evals,
        assignment: trainer.model.assignment(),
        aborted,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub results: Vec<RunResult>,
}

impl ExperimentOutput {
    /// Final test accuracies for one (rule, architecture, task) cell over
    /// completed runs.
    pub fn final_test(&self, rule: RuleKind, arch: &str, task: Task) -> Vec<f64> {
        self.results
            .iter()
            .filter(|r| r.rule == rule && r.architecture == arch && r.aborted.is_none())
            .filter_map(|r| r.final_test(task))
            .collect()
    }

    pub fn assignments(&self, rule: RuleKind, arch: &str) -> Vec<&Assignment> {
        self.results
            .iter()
            .filter(|r| r.rule == rule && r.architecture == arch && r.aborted.is_none())
            .filter_map(|r| r.assignment.as_ref())
            .collect()
    }
}

/// Expand a config into its cells: rules x architectures x seeds.
pub fn run_specs(config: &ExperimentConfig) -> Result<Vec<RunSpec>> {
    let regimen = config.regimen()?;
    let mut specs = Vec::new();
    for &rule in &config.experiment.rules {
        for arch in &config.architecture.networks {
            for seed in config.seeds() {
                specs.push(RunSpec {
                    experiment: config.experiment.id.clone(),
                    rule,
                    architecture: arch.clone(),
                    seed,
                    regimen: regimen.clone(),
                    hyper: config.hyperparams,
                });
            }
        }
    }
    Ok(specs)
}

/// Run every cell of an experiment. Runs are independent; `jobs` bounds
/// the worker count (None = all cores). Results come back in cell order
/// regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    run_experiment_with(config, jobs, |_| {})
}

/// As [`run_experiment`], calling `on_done` as each run finishes (in
/// completion order).
pub fn run_experiment_with(
    config: &ExperimentConfig,
    jobs: Option<usize>,
    on_done: impl Fn(&RunResult) + Sync,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut languages = Vec::new();
    for &rule in &config.experiment.rules {
        languages.push((
            rule,
            Language::generate(rule, config.experiment.data_seed, config.experiment.template_cvcvc_only)?,
        ));
    }
    let specs = run_specs(config)?;
    let run = || -> Result<Vec<RunResult>> {
        specs
            .par_iter()
            .map(|spec| {
                let lang = &languages.iter().find(|(r, _)| *r == spec.rule).expect("generated").1;
                let r = train_run(spec, lang)?;
                on_done(&r);
                Ok(r)
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    Ok(ExperimentOutput {
        config: config.clone(),
        config_hash: config.hash(),
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub sd: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Stats {
                n,
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats { n, mean, sd }
    }

    pub fn se(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }
}

/// Analytic chance rate for a task: one over the number of targets.
pub fn chance(layout: &TaskLayout, task: Task) -> f64 {
    1.0 / layout.task_size(task) as f64
}
