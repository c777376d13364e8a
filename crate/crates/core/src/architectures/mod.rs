//! The three network versions: a single recurrent hidden layer (v1),
//! hard-wired hidden modules (v2 and the fixed sharing configurations),
//! and gated modules that learn which task each module serves.
//!
//! All of them share one layout: an input group of phone features, one
//! hidden group partitioned into modules (recurrence stays within a
//! module), an ungated phone auto-association group fed by every module,
//! and one output group per identification task.

mod gating;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use gating::{module_assignment, Assignment, GateState, SharingConfig};

use crate::error::{Error, Result};
use crate::netcore::{
    apply_update, Gradients, GroupId, GroupRole, GroupTarget, Hyperparams, Matrix, Momentum, Network, NetworkBuilder,
    SrnState,
};

pub const V1_HIDDEN: usize = 30;
pub const V2_MODULES: [usize; 2] = [15, 15];
pub const ROOT_BUDGET: usize = 20;
pub const INFLECTION_BUDGET: usize = 3;

/// An identification task: the root, or one inflection slot (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Root,
    Inflection(usize),
}

impl Task {
    pub fn index(self) -> usize {
        match self {
            Task::Root => 0,
            Task::Inflection(s) => s + 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Task::Root
        } else {
            Task::Inflection(i - 1)
        }
    }

    pub fn name(self) -> String {
        match self {
            Task::Root => "root".into(),
            Task::Inflection(s) => format!("inflection-{}", s + 1),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "root" => Some(Task::Root),
            _ => s
                .strip_prefix("inflection-")
                .or_else(|| s.strip_prefix("inf"))
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .map(|n| Task::Inflection(n - 1)),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Output sizes of a language: one unit per root and per inflection value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLayout {
    pub features: usize,
    pub roots: usize,
    pub slot_sizes: Vec<usize>,
}

impl TaskLayout {
    pub fn task_count(&self) -> usize {
        1 + self.slot_sizes.len()
    }

    pub fn task_size(&self, task: Task) -> usize {
        match task {
            Task::Root => self.roots,
            Task::Inflection(s) => self.slot_sizes[s],
        }
    }

    pub fn tasks(&self) -> impl Iterator<Item = Task> {
        (0..self.task_count()).map(Task::from_index)
    }
}

/// Declarative architecture descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "version", rename_all = "kebab-case")]
pub enum ArchitectureSpec {
    /// One fully recurrent hidden layer feeding every output group.
    V1 { hidden: usize },
    /// Root on module 0, every inflection on module 1.
    V2 { modules: Vec<usize> },
    /// Two modules sized from per-task budgets (root 20, inflection 3);
    /// `assignment[task]` is that task's module.
    Shared { assignment: Vec<usize> },
    /// Every module feeds every gated task through its own weights; gates
    /// learn the mixture.
    Adaptive { modules: Vec<usize> },
}

impl ArchitectureSpec {
    pub fn v1() -> Self {
        ArchitectureSpec::V1 { hidden: V1_HIDDEN }
    }

    pub fn v2() -> Self {
        ArchitectureSpec::V2 {
            modules: V2_MODULES.to_vec(),
        }
    }

    pub fn adaptive() -> Self {
        ArchitectureSpec::Adaptive {
            modules: V2_MODULES.to_vec(),
        }
    }

    pub fn shared(assignment: Vec<usize>) -> Self {
        ArchitectureSpec::Shared { assignment }
    }

    /// The three ways to split root + two inflections over two modules,
    /// with the root always on module 0.
    pub fn shared_configurations() -> [Vec<usize>; 3] {
        [vec![0, 1, 1], vec![0, 0, 1], vec![0, 1, 0]]
    }

    /// Short label used in result files, e.g. `shared:root|inf1+inf2`.
    pub fn label(&self) -> String {
        match self {
            ArchitectureSpec::V1 { .. } => "v1".into(),
            ArchitectureSpec::V2 { .. } => "v2".into(),
            ArchitectureSpec::Adaptive { .. } => "adaptive".into(),
            ArchitectureSpec::Shared { assignment } => {
                let modules = assignment.iter().max().map_or(0, |m| m + 1);
                let parts: Vec<String> = (0..modules)
                    .map(|m| {
                        assignment
                            .iter()
                            .enumerate()
                            .filter(|(_, &a)| a == m)
                            .map(|(t, _)| match Task::from_index(t) {
                                Task::Root => "root".to_string(),
                                Task::Inflection(s) => format!("inf{}", s + 1),
                            })
                            .collect::<Vec<_>>()
                            .join("+")
                    })
                    .collect();
                format!("shared:{}", parts.join("|"))
            }
        }
    }

    /// Inverse of [`ArchitectureSpec::label`] for the default sizes.
    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "v1" => Ok(Self::v1()),
            "v2" => Ok(Self::v2()),
            "adaptive" => Ok(Self::adaptive()),
            _ => {
                let body = label
                    .strip_prefix("shared:")
                    .ok_or_else(|| Error::Config(format!("unknown architecture `{label}`")))?;
                let mut assignment: Vec<Option<usize>> = Vec::new();
                for (m, part) in body.split('|').enumerate() {
                    for name in part.split('+') {
                        let t = Task::parse(name)
                            .ok_or_else(|| Error::Config(format!("unknown task `{name}`")))?
                            .index();
                        if assignment.len() <= t {
                            assignment.resize(t + 1, None);
                        }
                        assignment[t] = Some(m);
                    }
                }
                let assignment = assignment
                    .into_iter()
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::Config(format!("`{label}` skips a task")))?;
                Ok(Self::shared(assignment))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum TaskOutput {
    Plain(GroupId),
    /// One expert output group per module.
    Gated(Vec<GroupId>),
}

/// A built network together with its optimizer and recurrent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    spec: ArchitectureSpec,
    layout: TaskLayout,
    net: Network,
    velocity: Momentum,
    state: SrnState,
    input: GroupId,
    hidden: GroupId,
    phone: GroupId,
    modules: Vec<Range<usize>>,
    outputs: Vec<TaskOutput>,
    gates: Option<GateState>,
    #[serde(skip)]
    scratch: Scratch,
}

/// Reusable gradient buffer; ignored by equality.
#[derive(Debug, Clone, Default)]
struct Scratch(Option<Gradients>);

impl PartialEq for Scratch {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Per-step training targets.
#[derive(Debug, Clone, Copy)]
pub struct Targets<'a> {
    pub phone: &'a [f64],
    /// Indexed by [`Task::index`].
    pub tasks: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub net: Gradients,
    /// Gradient for the gate biases, `modules x tasks`.
    pub gates: Option<Matrix>,
}

fn module_ranges(sizes: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect()
}

fn column_mask(rows: usize, cols: usize, keep: &[&Range<usize>]) -> Matrix {
    Matrix::from_fn(
        rows,
        cols,
        |_, c| {
            if keep.iter().any(|r| r.contains(&c)) {
                1.0
            } else {
                0.0
            }
        },
    )
}

impl Model {
    pub fn build(spec: &ArchitectureSpec, layout: &TaskLayout) -> Result<Self> {
        let n_tasks = layout.task_count();
        let (sizes, wiring): (Vec<usize>, Option<Vec<usize>>) = match spec {
            ArchitectureSpec::V1 { hidden } => (vec![*hidden], Some(vec![0; n_tasks])),
            ArchitectureSpec::V2 { modules } => {
                if modules.len() != 2 {
                    return Err(Error::Config(format!(
                        "v2 needs exactly 2 modules, got {}",
                        modules.len()
                    )));
                }
                let mut w = vec![1; n_tasks];
                w[0] = 0;
                (modules.clone(), Some(w))
            }
            ArchitectureSpec::Shared { assignment } => {
                if assignment.len() != n_tasks {
                    return Err(Error::dim("sharing assignment", n_tasks, assignment.len()));
                }
                if assignment.iter().any(|&m| m > 1) {
                    return Err(Error::Config("sharing uses exactly two modules (0 and 1)".into()));
                }
                let mut sizes = vec![0usize; 2];
                for (t, &m) in assignment.iter().enumerate() {
                    sizes[m] += if t == 0 { ROOT_BUDGET } else { INFLECTION_BUDGET };
                }
                if sizes.contains(&0) {
                    return Err(Error::Config(format!(
                        "assignment {assignment:?} leaves a module empty"
                    )));
                }
                (sizes, Some(assignment.clone()))
            }
            ArchitectureSpec::Adaptive { modules } => {
                if !(2..=3).contains(&n_tasks) {
                    return Err(Error::Config(format!(
                        "adaptive gating covers 2 or 3 tasks, language has {n_tasks}"
                    )));
                }
                (modules.clone(), None)
            }
        };
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("hidden modules must have positive size".into()));
        }
        let total: usize = sizes.iter().sum();
        let ranges = module_ranges(&sizes);

        let mut b = NetworkBuilder::new();
        let input = b.group("input", layout.features, GroupRole::Input);
        let hidden = b.group("hidden", total, GroupRole::Hidden);
        let phone = b.group("phone", layout.features, GroupRole::Output);
        let rec_mask = Matrix::from_fn(total, total, |r, c| {
            if ranges.iter().any(|m| m.contains(&r) && m.contains(&c)) {
                1.0
            } else {
                0.0
            }
        });
        b.connect(input, hidden)
            .connect_delayed(hidden, hidden, Some(rec_mask))
            .connect(hidden, phone);

        let mut outputs = Vec::with_capacity(n_tasks);
        for task in layout.tasks() {
            let size = layout.task_size(task);
            match &wiring {
                Some(w) => {
                    let g = b.group(task.name(), size, GroupRole::Output);
                    b.connect_masked(hidden, g, column_mask(size, total, &[&ranges[w[task.index()]]]));
                    outputs.push(TaskOutput::Plain(g));
                }
                None => {
                    let experts = ranges
                        .iter()
                        .enumerate()
                        .map(|(m, r)| {
                            let g = b.group(format!("{}@{}", task.name(), m), size, GroupRole::Output);
                            b.connect_masked(hidden, g, column_mask(size, total, &[r]));
                            g
                        })
                        .collect();
                    outputs.push(TaskOutput::Gated(experts));
                }
            }
        }
        let net = b.build()?;
        let gates = wiring.is_none().then(|| GateState::new(sizes.len(), n_tasks));
        Ok(Model {
            spec: spec.clone(),
            layout: layout.clone(),
            velocity: Momentum::new(&net),
            state: net.new_state(),
            net,
            input,
            hidden,
            phone,
            modules: ranges,
            outputs,
            gates,
            scratch: Scratch::default(),
        })
    }

    /// Randomize weights and clear optimizer state. Gate biases start equal.
    pub fn init(&mut self, seed: u64, hyper: &Hyperparams) {
        self.net.init_weights(seed, hyper.init_weight_range);
        // the experts of a gated task share one output bias vector
        for out in &self.outputs {
            if let TaskOutput::Gated(experts) = out {
                let shared = self.net.biases()[experts[0].0].clone();
                for g in &experts[1..] {
                    self.net.biases_mut()[g.0] = shared.clone();
                }
            }
        }
        self.velocity = Momentum::new(&self.net);
        if let Some(g) = &mut self.gates {
            *g = GateState::new(g.modules(), g.tasks());
        }
        self.state.reset();
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn layout(&self) -> &TaskLayout {
        &self.layout
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn module_ranges(&self) -> &[Range<usize>] {
        &self.modules
    }

    pub fn gates(&self) -> Option<&GateState> {
        self.gates.as_ref()
    }

    pub fn gates_mut(&mut self) -> Option<&mut GateState> {
        self.gates.as_mut()
    }

    pub fn hidden_group(&self) -> GroupId {
        self.hidden
    }

    pub fn phone_group(&self) -> GroupId {
        self.phone
    }

    /// Output groups that read the hidden layer directly for `task`.
    pub fn task_groups(&self, task: Task) -> Vec<GroupId> {
        match &self.outputs[task.index()] {
            TaskOutput::Plain(g) => vec![*g],
            TaskOutput::Gated(gs) => gs.clone(),
        }
    }

    /// Groups whose bias vectors are tied to `group`'s (itself included).
    pub fn bias_tie(&self, group: GroupId) -> Vec<GroupId> {
        self.outputs
            .iter()
            .find_map(|o| match o {
                TaskOutput::Gated(experts) if experts.contains(&group) => Some(experts.clone()),
                _ => None,
            })
            .unwrap_or_else(|| vec![group])
    }

    /// Restore lookup tables after deserializing.
    pub fn reindex(&mut self) {
        self.net.reindex();
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite()
            && self
                .gates
                .as_ref()
                .is_none_or(|g| g.bias.data().iter().all(|b| b.is_finite()))
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }

    pub fn forward(&mut self, input: &[f64]) -> Result<()> {
        self.net.forward_step(&mut self.state, input)
    }

    pub fn state(&self) -> &SrnState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SrnState {
        &mut self.state
    }

    pub fn hidden_activations(&self) -> &[f64] {
        self.state.activations(self.hidden)
    }

    pub fn phone_output(&self) -> &[f64] {
        self.state.activations(self.phone)
    }

    /// System output for a task; gated tasks blend module outputs by gate
    /// value.
    pub fn task_output(&self, task: Task) -> Vec<f64> {
        match &self.outputs[task.index()] {
            TaskOutput::Plain(g) => self.state.activations(*g).to_vec(),
            TaskOutput::Gated(experts) => {
                let values = self.gates.as_ref().expect("gated model has gates").values();
                let mut out = vec![0.0; self.layout.task_size(task)];
                for (m, &g) in experts.iter().enumerate() {
                    let w = values.get(m, task.index());
                    for (o, a) in out.iter_mut().zip(self.state.activations(g)) {
                        *o += w * a;
                    }
                }
                out
            }
        }
    }

    fn check_targets(&self, targets: &Targets<'_>, active: &[bool]) -> Result<()> {
        let n = self.layout.task_count();
        if targets.tasks.len() != n {
            return Err(Error::dim("task targets", n, targets.tasks.len()));
        }
        if active.len() != n {
            return Err(Error::dim("active flags", n, active.len()));
        }
        Ok(())
    }

    /// Per-module squared errors `0.5 * |d_t - y_mt|^2`, `modules x tasks`.
    fn expert_errors(&self, targets: &Targets<'_>) -> Matrix {
        let m = self.modules.len();
        let mut errs = Matrix::zeros(m, self.layout.task_count());
        for (t, out) in self.outputs.iter().enumerate() {
            if let TaskOutput::Gated(experts) = out {
                for (k, &g) in experts.iter().enumerate() {
                    let e: f64 = self
                        .state
                        .activations(g)
                        .iter()
                        .zip(&targets.tasks[t])
                        .map(|(y, d)| (d - y).powi(2))
                        .sum();
                    errs.set(k, t, 0.5 * e);
                }
            }
        }
        errs
    }

    fn group_targets<'a>(&self, targets: &Targets<'a>, active: &[bool]) -> Vec<GroupTarget<'a>> {
        let values = self.gates.as_ref().map(GateState::values);
        let mut out = vec![GroupTarget {
            group: self.phone,
            target: targets.phone,
            weight: 1.0,
        }];
        for (t, o) in self.outputs.iter().enumerate() {
            let on = if active[t] { 1.0 } else { 0.0 };
            match o {
                TaskOutput::Plain(g) => out.push(GroupTarget {
                    group: *g,
                    target: &targets.tasks[t],
                    weight: on,
                }),
                TaskOutput::Gated(experts) => {
                    let v = values.as_ref().expect("gated model has gates");
                    for (k, &g) in experts.iter().enumerate() {
                        out.push(GroupTarget {
                            group: g,
                            target: &targets.tasks[t],
                            weight: on * v.get(k, t),
                        });
                    }
                }
            }
        }
        out
    }

    /// Loss on the current step: phone and active-task squared error, with
    /// gated tasks contributing `sum_m g[m,t] * 0.5 * |d_t - y_mt|^2`, plus
    /// the gate-usage penalty for adaptive models.
    pub fn loss(&self, targets: &Targets<'_>, active: &[bool], hyper: &Hyperparams) -> Result<f64> {
        self.check_targets(targets, active)?;
        let gts = self.group_targets(targets, active);
        let mut loss = self.net.loss(&self.state, &gts);
        if let Some(g) = &self.gates {
            loss += GateState::usage_penalty(&g.values(), hyper.gate_penalty);
        }
        Ok(loss)
    }

    pub fn gradients(&self, targets: &Targets<'_>, active: &[bool], hyper: &Hyperparams) -> Result<ModelGradients> {
        let mut net = self.net.zero_gradients();
        let gates = self.gradients_into(targets, active, hyper, &mut net)?;
        Ok(ModelGradients { net, gates })
    }

    fn gradients_into(
        &self,
        targets: &Targets<'_>,
        active: &[bool],
        hyper: &Hyperparams,
        net_grads: &mut Gradients,
    ) -> Result<Option<Matrix>> {
        self.check_targets(targets, active)?;
        let gts = self.group_targets(targets, active);
        net_grads.fill_zero();
        self.net.accumulate_gradients(&self.state, &gts, net_grads)?;
        for out in &self.outputs {
            if let TaskOutput::Gated(experts) = out {
                let mut sum = net_grads.biases[experts[0].0].clone();
                for g in &experts[1..] {
                    for (s, d) in sum.iter_mut().zip(&net_grads.biases[g.0]) {
                        *s += d;
                    }
                }
                for g in experts {
                    net_grads.biases[g.0].copy_from_slice(&sum);
                }
            }
        }
        Ok(self.gates.as_ref().map(|g| {
            let values = g.values();
            let errs = self.expert_errors(targets);
            g.bias_gradient(&values, &errs, active, hyper.gate_penalty)
        }))
    }

    pub fn apply(&mut self, grads: &ModelGradients, hyper: &Hyperparams) {
        apply_update(&mut self.net, &grads.net, hyper, &mut self.velocity);
        if let (Some(g), Some(gg)) = (&mut self.gates, &grads.gates) {
            g.apply(gg, hyper.learning_rate, hyper.momentum);
        }
    }

    /// Forward, backward and update for one phone.
    pub fn train_step(
        &mut self,
        input: &[f64],
        targets: &Targets<'_>,
        active: &[bool],
        hyper: &Hyperparams,
    ) -> Result<()> {
        self.forward(input)?;
        let mut scratch = self.scratch.0.take().unwrap_or_else(|| self.net.zero_gradients());
        let gate_grads = self.gradients_into(targets, active, hyper, &mut scratch)?;
        apply_update(&mut self.net, &scratch, hyper, &mut self.velocity);
        if let (Some(g), Some(gg)) = (&mut self.gates, &gate_grads) {
            g.apply(gg, hyper.learning_rate, hyper.momentum);
        }
        self.scratch = Scratch(Some(scratch));
        Ok(())
    }

    /// Task-to-module assignment read off the gates (adaptive models).
    pub fn assignment(&self) -> Option<Assignment> {
        self.gates.as_ref().map(|g| module_assignment(&g.values()))
    }
}
