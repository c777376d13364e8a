use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use morphnet_core::architectures::Task;
use morphnet_core::harness::results::{self, Summary};
use morphnet_core::harness::{
    run_experiment_with, run_specs, train_run_from, ExperimentOutput, Language, RunResult, Trainer,
};
use morphnet_core::{ArchitectureSpec, DatasetSplit, Error, ExperimentConfig, Inventory, Result, RuleKind};

#[derive(Debug, Parser)]
#[command(
    name = "morphnet",
    version,
    about = "Modular recurrent networks for morphology acquisition"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a language and write its train/test split.
    GenData {
        #[arg(long)]
        rule: RuleKind,
        /// Seed for roots and the split.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Template rule only: use just the CVCVC roots.
        #[arg(long)]
        cvcvc_only: bool,
        /// Output file (stdout if omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print a phone feature table.
    EmitInventory {
        /// Include the nasalized vowels used by the mutation rule.
        #[arg(long)]
        nasals: bool,
    },
    /// Train a single network.
    Train(TrainArgs),
    /// Version 1 vs version 2 on the single-affix rules.
    ReplicateVersions(SuiteArgs),
    /// The three fixed module-sharing configurations on two-affix rules.
    ReplicateSharing(SuiteArgs),
    /// Gated modular networks on two-affix rules.
    ReplicateAdaptive {
        /// Show only root targets for the first epochs.
        #[arg(long)]
        staged: bool,
        #[command(flatten)]
        suite: SuiteArgs,
    },
    /// Run a replication suite at every point of a hyperparameter grid.
    Sweep {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2])]
        lr_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.9])]
        momentum_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 1.0])]
        init_range_grid: Vec<f64>,
        /// Only varied for the gated presets.
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.2, 1.0])]
        lambda_grid: Vec<f64>,
        #[command(flatten)]
        suite: SuiteArgs,
    },
    /// Summarize raw result files found under a directory.
    Report {
        #[arg(long)]
        raw: PathBuf,
        /// Aggregate files from different configs.
        #[arg(long)]
        force: bool,
        /// Also write the summary to this file.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Versions,
    Sharing,
    Adaptive,
    AdaptiveStaged,
}

impl Preset {
    fn config(self) -> ExperimentConfig {
        match self {
            Preset::Versions => ExperimentConfig::versions(),
            Preset::Sharing => ExperimentConfig::sharing(),
            Preset::Adaptive => ExperimentConfig::adaptive(false),
            Preset::AdaptiveStaged => ExperimentConfig::adaptive(true),
        }
    }
}

/// Flags shared by every training command; each overrides the config.
#[derive(Debug, Args)]
struct Overrides {
    /// Experiment config file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; results go to `<out>/<experiment id>/`.
    #[arg(long, env = "MORPHNET_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Experiment id; names the output subdirectory.
    #[arg(long)]
    id: Option<String>,
    /// Total training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs between evaluation points.
    #[arg(long)]
    eval_every: Option<usize>,
    /// Leading epochs trained on root targets only.
    #[arg(long)]
    root_only_epochs: Option<usize>,
    /// Seed for roots and the train/test split.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Momentum coefficient.
    #[arg(long)]
    momentum: Option<f64>,
    /// Initial weights are uniform in [-r, r].
    #[arg(long)]
    init_range: Option<f64>,
    /// Weight of the gate usage penalty.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// Comma-separated rule kinds, or `all` for the suite's default set.
    #[arg(long)]
    rules: Option<String>,
    /// Number of networks per cell.
    #[arg(long)]
    seeds: Option<usize>,
    /// First network seed.
    #[arg(long)]
    seed_base: Option<u64>,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value = "suffix")]
    rule: RuleKind,
    /// v1, v2, adaptive, or shared:<tasks>|<tasks> such as shared:root|inf1+inf2.
    #[arg(long, default_value = "v2")]
    arch: String,
    /// Network seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Train on a dataset file written by gen-data instead of generating one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Save a checkpoint here at every evaluation point.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue training from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    common: Overrides,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            rule,
            seed,
            cvcvc_only,
            out,
        } => gen_data(rule, seed, cvcvc_only, out.as_deref()),
        Command::EmitInventory { nasals } => {
            let inv = if nasals {
                Inventory::with_nasals()
            } else {
                Inventory::base()
            };
            print!("{}", inv.to_table());
            Ok(())
        }
        Command::Train(args) => train(args),
        Command::ReplicateVersions(suite) => replicate(ExperimentConfig::versions(), &RuleKind::SINGLE, suite),
        Command::ReplicateSharing(suite) => replicate(ExperimentConfig::sharing(), &RuleKind::TWO_AFFIX, suite),
        Command::ReplicateAdaptive { staged, suite } => {
            replicate(ExperimentConfig::adaptive(staged), &RuleKind::TWO_AFFIX, suite)
        }
        Command::Sweep {
            preset,
            lr_grid,
            momentum_grid,
            init_range_grid,
            lambda_grid,
            suite,
        } => sweep(preset, [lr_grid, momentum_grid, init_range_grid, lambda_grid], suite),
        Command::Report { raw, force, out } => {
            let text = Summary::from_dir(&raw, force)?.render();
            if let Some(path) = out {
                results::write_atomic(&path, text.as_bytes())?;
            }
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_data(rule: RuleKind, seed: u64, cvcvc_only: bool, out: Option<&Path>) -> Result<()> {
    let lang = Language::generate(rule, seed, cvcvc_only)?;
    let text = lang.dataset.to_text(&lang.inventory);
    match out {
        Some(path) => {
            results::write_atomic(path, text.as_bytes())?;
            eprintln!(
                "wrote {} ({} train, {} test words, seed {seed})",
                path.display(),
                lang.dataset.train.len(),
                lang.dataset.test.len()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_rules(list: &str, all: &[RuleKind]) -> Result<Vec<RuleKind>> {
    if list == "all" {
        return Ok(all.to_vec());
    }
    list.split(',').map(|r| r.trim().parse()).collect()
}

/// Base config: the file if given, else the preset; then flags.
fn resolve(preset: ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig> {
    let mut c = match &o.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => preset,
    };
    if let Some(id) = &o.id {
        c.experiment.id = id.clone();
    }
    if let Some(v) = o.epochs {
        c.regimen.epochs = v;
    }
    if let Some(v) = o.eval_every {
        c.regimen.eval_every = v;
    }
    if let Some(v) = o.root_only_epochs {
        c.regimen.root_only_epochs = v;
    }
    if let Some(v) = o.data_seed {
        c.experiment.data_seed = v;
    }
    if let Some(v) = o.lr {
        c.hyperparams.learning_rate = v;
    }
    if let Some(v) = o.momentum {
        c.hyperparams.momentum = v;
    }
    if let Some(v) = o.init_range {
        c.hyperparams.init_weight_range = v;
    }
    if let Some(v) = o.lambda {
        c.hyperparams.gate_penalty = v;
    }
    if let Some(dir) = &o.out {
        c.output.dir = Some(dir.clone());
    }
    Ok(c)
}

fn resolve_suite(preset: ExperimentConfig, all: &[RuleKind], s: &SuiteArgs) -> Result<ExperimentConfig> {
    let mut c = resolve(preset, &s.common)?;
    if let Some(list) = &s.rules {
        c.experiment.rules = parse_rules(list, all)?;
    }
    if let Some(n) = s.seeds {
        c.seeds.count = n;
    }
    if let Some(b) = s.seed_base {
        c.seeds.base = b;
    }
    c.validate()?;
    Ok(c)
}

fn output_dir(c: &ExperimentConfig) -> PathBuf {
    c.output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results"))
        .join(&c.experiment.id)
}

fn describe(r: &RunResult, hash: &str) -> String {
    let mut line = format!(
        "[{}] {} {} seed={} config-hash={hash}",
        r.experiment, r.rule, r.architecture, r.seed
    );
    match (&r.aborted, r.final_eval()) {
        (Some(why), _) => line += &format!(" ABORTED: {why}"),
        (None, Some(e)) => {
            line += " test:";
            for (t, acc) in e.test.iter().enumerate() {
                line += &format!(" {}={acc:.3}", Task::from_index(t));
            }
            if let Some(a) = &r.assignment {
                line += &format!(" modules={}", a.config());
            }
        }
        (None, None) => {}
    }
    line
}

/// Write an experiment's files, print its summary, and turn aborted runs
/// into a divergence error.
fn finish(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    results::write_experiment(dir, out)?;
    let summary = std::fs::read_to_string(dir.join(results::SUMMARY_FILE)).map_err(|e| Error::Io {
        path: dir.join(results::SUMMARY_FILE),
        source: e,
    })?;
    print!("{summary}");
    eprintln!("results in {}", dir.display());
    let aborted: Vec<&RunResult> = out.results.iter().filter(|r| r.aborted.is_some()).collect();
    if let Some(first) = aborted.first() {
        return Err(Error::Divergence {
            epoch: first.evals.last().map_or(0, |e| e.epoch),
            detail: format!(
                "{} of {} runs aborted (first: {} {} seed {})",
                aborted.len(),
                out.results.len(),
                first.rule,
                first.architecture,
                first.seed
            ),
        });
    }
    Ok(())
}

fn run_config(c: &ExperimentConfig, jobs: Option<usize>) -> Result<()> {
    let hash = c.hash();
    let dir = output_dir(c);
    eprintln!(
        "experiment {} config-hash={hash}: {} runs",
        c.experiment.id,
        run_specs(c)?.len()
    );
    let out = run_experiment_with(c, jobs, |r| eprintln!("{}", describe(r, &hash)))?;
    finish(&out, &dir)
}

fn replicate(preset: ExperimentConfig, all: &[RuleKind], suite: SuiteArgs) -> Result<()> {
    let c = resolve_suite(preset, all, &suite)?;
    run_config(&c, suite.common.jobs)
}

fn sweep(preset: Preset, grid: [Vec<f64>; 4], suite: SuiteArgs) -> Result<()> {
    let all: &[RuleKind] = match preset {
        Preset::Versions => &RuleKind::SINGLE,
        _ => &RuleKind::TWO_AFFIX,
    };
    let base = resolve_suite(preset.config(), all, &suite)?;
    let [lrs, moms, inits, mut lambdas] = grid;
    if matches!(preset, Preset::Versions | Preset::Sharing) {
        lambdas = vec![base.hyperparams.gate_penalty];
    }
    let root = output_dir(&base);
    for &lr in &lrs {
        for &mom in &moms {
            for &init in &inits {
                for &lambda in &lambdas {
                    let mut c = base.clone();
                    c.hyperparams.learning_rate = lr;
                    c.hyperparams.momentum = mom;
                    c.hyperparams.init_weight_range = init;
                    c.hyperparams.gate_penalty = lambda;
                    c.experiment.id = format!("{}-lr{lr}-m{mom}-i{init}-l{lambda}", base.experiment.id);
                    c.output.dir = Some(root.clone());
                    c.validate()?;
                    run_config(&c, suite.common.jobs)?;
                }
            }
        }
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let arch = ArchitectureSpec::from_label(&args.arch)?;
    let lang = match &args.data {
        Some(path) => Language::from_dataset(DatasetSplit::load(path)?),
        None => {
            let c = resolve(ExperimentConfig::single(args.rule, arch.clone()), &args.common)?;
            Language::generate(args.rule, c.experiment.data_seed, c.experiment.template_cvcvc_only)?
        }
    };
    let mut c = resolve(ExperimentConfig::single(lang.rule, arch), &args.common)?;
    c.experiment.rules = vec![lang.rule];
    if args.data.is_some() {
        c.experiment.data_seed = lang.dataset.seed;
    }
    if let Some(s) = args.seed {
        c.seeds.base = s;
    }
    c.seeds.count = 1;

    let trainer = match &args.resume {
        Some(path) => {
            let t = Trainer::load(path)?;
            if t.model.spec() != &c.architecture.networks[0] {
                return Err(Error::Config(format!(
                    "checkpoint holds a `{}` network, not `{}`",
                    t.model.spec().label(),
                    c.architecture.networks[0].label()
                )));
            }
            if t.model.layout() != &lang.layout() {
                return Err(Error::Dimension {
                    what: "checkpoint output units".into(),
                    expected: lang.layout().roots,
                    actual: t.model.layout().roots,
                });
            }
            c.seeds.base = t.seed;
            c.hyperparams = t.hyper;
            eprintln!("resuming {} at epoch {}", path.display(), t.epoch);
            t
        }
        None => Trainer::new(&c.architecture.networks[0], &lang.layout(), c.hyperparams, c.seeds.base)?,
    };
    c.validate()?;
    let hash = c.hash();
    let spec = run_specs(&c)?.remove(0);
    eprintln!(
        "training {} {} seed={} config-hash={hash}",
        spec.rule,
        spec.architecture.label(),
        spec.seed
    );
    let result = train_run_from(&spec, &lang, trainer, |t| match &args.checkpoint {
        Some(path) => t.save(path),
        None => Ok(()),
    })?;
    eprintln!("{}", describe(&result, &hash));
    let out = ExperimentOutput {
        config: c.clone(),
        config_hash: hash,
        results: vec![result],
    };
    finish(&out, &output_dir(&c))
}
