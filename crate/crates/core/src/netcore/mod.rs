//! Sigmoid network substrate: unit groups joined by masked dense
//! connections, Elman-style delayed (context) connections, and depth-1
//! truncated backpropagation of sum-squared error.
//!
//! Groups are evaluated in declaration order, so every undelayed
//! connection must run from an earlier group to a later one. A delayed
//! connection reads its source's activations from the previous step and
//! is treated as a constant input when computing gradients.

mod matrix;
mod optim;

use serde::{Deserialize, Serialize};

pub use matrix::Matrix;
pub use optim::{apply_update, Hyperparams, Momentum};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupRole {
    Input,
    Hidden,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub size: usize,
    pub role: GroupRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: GroupId,
    pub to: GroupId,
    /// `to.size x from.size`
    pub weights: Matrix,
    /// Same shape as `weights`, entries 0 or 1.
    pub mask: Matrix,
    pub delayed: bool,
}

impl Connection {
    pub fn live_count(&self) -> usize {
        self.mask.data().iter().filter(|&&m| m != 0.0).count()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    groups: Vec<Group>,
    connections: Vec<Connection>,
    /// Empty for input groups.
    biases: Vec<Vec<f64>>,
    #[serde(skip)]
    incoming: Vec<Vec<usize>>,
    #[serde(skip)]
    outgoing: Vec<Vec<usize>>,
}

#[derive(Debug, Default)]
pub struct NetworkBuilder {
    groups: Vec<Group>,
    connections: Vec<(GroupId, GroupId, Option<Matrix>, bool)>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn group(&mut self, name: impl Into<String>, size: usize, role: GroupRole) -> GroupId {
        self.groups.push(Group {
            name: name.into(),
            size,
            role,
        });
        GroupId(self.groups.len() - 1)
    }

    /// Fully connected.
    pub fn connect(&mut self, from: GroupId, to: GroupId) -> &mut Self {
        self.connections.push((from, to, None, false));
        self
    }

    pub fn connect_masked(&mut self, from: GroupId, to: GroupId, mask: Matrix) -> &mut Self {
        self.connections.push((from, to, Some(mask), false));
        self
    }

    /// Time-delay connection reading `from`'s previous-step activations.
    pub fn connect_delayed(&mut self, from: GroupId, to: GroupId, mask: Option<Matrix>) -> &mut Self {
        self.connections.push((from, to, mask, true));
        self
    }

    pub fn build(self) -> Result<Network> {
        let mut connections = Vec::with_capacity(self.connections.len());
        for (from, to, mask, delayed) in self.connections {
            let (Some(src), Some(dst)) = (self.groups.get(from.0), self.groups.get(to.0)) else {
                return Err(Error::Config("connection names a missing group".into()));
            };
            if dst.role == GroupRole::Input {
                return Err(Error::Config(format!(
                    "input group `{}` cannot receive connections",
                    dst.name
                )));
            }
            if !delayed && from.0 >= to.0 {
                return Err(Error::Config(format!(
                    "undelayed connection {} -> {} runs against evaluation order",
                    src.name, dst.name
                )));
            }
            let mask = match mask {
                Some(m) => {
                    if m.rows() != dst.size || m.cols() != src.size {
                        return Err(Error::dim(
                            format!("mask {} -> {}", src.name, dst.name),
                            dst.size * src.size,
                            m.rows() * m.cols(),
                        ));
                    }
                    if m.data().iter().any(|&v| v != 0.0 && v != 1.0) {
                        return Err(Error::Config("mask entries must be 0 or 1".into()));
                    }
                    m
                }
                None => Matrix::filled(dst.size, src.size, 1.0),
            };
            connections.push(Connection {
                from,
                to,
                weights: Matrix::zeros(dst.size, src.size),
                mask,
                delayed,
            });
        }
        let biases = self
            .groups
            .iter()
            .map(|g| match g.role {
                GroupRole::Input => Vec::new(),
                _ => vec![0.0; g.size],
            })
            .collect();
        let mut net = Network {
            groups: self.groups,
            connections,
            biases,
            incoming: Vec::new(),
            outgoing: Vec::new(),
        };
        net.index();
        Ok(net)
    }
}

impl Network {
    fn index(&mut self) {
        self.incoming = vec![Vec::new(); self.groups.len()];
        self.outgoing = vec![Vec::new(); self.groups.len()];
        for (i, c) in self.connections.iter().enumerate() {
            self.incoming[c.to.0].push(i);
            if !c.delayed {
                self.outgoing[c.from.0].push(i);
            }
        }
    }

    /// Rebuild lookup tables after deserialization.
    pub fn reindex(&mut self) {
        self.index();
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, id: GroupId) -> &Group {
        &self.groups[id.0]
    }

    pub fn find_group(&self, name: &str) -> Option<GroupId> {
        self.groups.iter().position(|g| g.name == name).map(GroupId)
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn connections_mut(&mut self) -> &mut [Connection] {
        &mut self.connections
    }

    pub fn connection(&self, from: GroupId, to: GroupId) -> Option<&Connection> {
        self.connections.iter().find(|c| c.from == from && c.to == to)
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn input_group(&self) -> Result<GroupId> {
        self.groups
            .iter()
            .position(|g| g.role == GroupRole::Input)
            .map(GroupId)
            .ok_or_else(|| Error::Config("network has no input group".into()))
    }

    /// Live (unmasked) weights summed over undelayed connections between
    /// distinct groups.
    pub fn cross_layer_weight_count(&self) -> usize {
        self.connections
            .iter()
            .filter(|c| c.from != c.to)
            .map(Connection::live_count)
            .sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.connections.iter().map(Connection::live_count).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Uniform draws from `[-range, range]` for every live weight and every
    /// bias; masked weights are set to zero.
    pub fn init_weights(&mut self, seed: u64, range: f64) {
        use rand::Rng;
        let mut rng = stream_rng(seed, Stream::Init, 0);
        for c in &mut self.connections {
            for (w, &m) in c.weights.data_mut().iter_mut().zip(c.mask.data()) {
                *w = if m != 0.0 {
                    rng.random_range(-range..=range)
                } else {
                    0.0
                };
            }
        }
        for b in self.biases.iter_mut().flatten() {
            *b = rng.random_range(-range..=range);
        }
    }

    pub fn new_state(&self) -> SrnState {
        let zeros: Vec<Vec<f64>> = self.groups.iter().map(|g| vec![0.0; g.size]).collect();
        SrnState {
            acts: zeros.clone(),
            context: zeros,
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self
                .connections
                .iter()
                .map(|c| Matrix::zeros(c.weights.rows(), c.weights.cols()))
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.connections
            .iter()
            .all(|c| c.weights.data().iter().all(|w| w.is_finite()))
            && self.biases.iter().flatten().all(|b| b.is_finite())
    }

    /// Sum of |w| over masked-out entries; zero for a healthy network.
    pub fn masked_magnitude(&self) -> f64 {
        self.connections
            .iter()
            .flat_map(|c| {
                c.weights
                    .data()
                    .iter()
                    .zip(c.mask.data())
                    .filter(|(_, &m)| m == 0.0)
                    .map(|(w, _)| w.abs())
            })
            .sum()
    }

    /// Advance one tick: the previous activations become the context, the
    /// input group is clamped to `input`, and every other group is
    /// recomputed as `sigmoid(bias + sum of incoming W x)`.
    pub fn forward_step(&self, state: &mut SrnState, input: &[f64]) -> Result<()> {
        let input_id = self.input_group()?;
        let expected = self.groups[input_id.0].size;
        if input.len() != expected {
            return Err(Error::dim("input pattern", expected, input.len()));
        }
        std::mem::swap(&mut state.acts, &mut state.context);
        state.acts[input_id.0].copy_from_slice(input);
        for g in 0..self.groups.len() {
            if self.groups[g].role == GroupRole::Input {
                if g != input_id.0 {
                    state.acts[g].fill(0.0);
                }
                continue;
            }
            let mut net = self.biases[g].clone();
            for &ci in &self.incoming[g] {
                let c = &self.connections[ci];
                let src = if c.delayed {
                    &state.context[c.from.0]
                } else {
                    &state.acts[c.from.0]
                };
                c.weights.mul_vec_add(src, &mut net);
            }
            for (a, n) in state.acts[g].iter_mut().zip(net) {
                *a = sigmoid(n);
            }
        }
        Ok(())
    }

    /// Gradients of `sum_t weight_t * 0.5 * |target_t - output_t|^2` for the
    /// most recent step, with the context held fixed.
    pub fn backward_step(&self, state: &SrnState, targets: &[GroupTarget<'_>]) -> Result<Gradients> {
        let mut grads = self.zero_gradients();
        self.accumulate_gradients(state, targets, &mut grads)?;
        Ok(grads)
    }

    pub fn accumulate_gradients(
        &self,
        state: &SrnState,
        targets: &[GroupTarget<'_>],
        grads: &mut Gradients,
    ) -> Result<()> {
        let mut err: Vec<Vec<f64>> = self.groups.iter().map(|g| vec![0.0; g.size]).collect();
        for t in targets {
            let size = self.groups[t.group.0].size;
            if t.target.len() != size {
                return Err(Error::dim(
                    format!("target for `{}`", self.groups[t.group.0].name),
                    size,
                    t.target.len(),
                ));
            }
            if t.weight == 0.0 {
                continue;
            }
            for ((e, &o), &d) in err[t.group.0].iter_mut().zip(&state.acts[t.group.0]).zip(t.target) {
                *e += t.weight * (o - d);
            }
        }
        let mut delta: Vec<Vec<f64>> = self.groups.iter().map(|g| vec![0.0; g.size]).collect();
        for g in (0..self.groups.len()).rev() {
            if self.groups[g].role == GroupRole::Input {
                continue;
            }
            let mut e = std::mem::take(&mut err[g]);
            for &ci in &self.outgoing[g] {
                let c = &self.connections[ci];
                c.weights.mul_t_vec_add(&delta[c.to.0], &mut e);
            }
            for ((d, e), &a) in delta[g].iter_mut().zip(e).zip(&state.acts[g]) {
                *d = e * a * (1.0 - a);
            }
        }
        for (ci, c) in self.connections.iter().enumerate() {
            let src = if c.delayed {
                &state.context[c.from.0]
            } else {
                &state.acts[c.from.0]
            };
            grads.weights[ci].add_outer_masked(&delta[c.to.0], src, &c.mask);
        }
        for (g, d) in delta.iter().enumerate() {
            if self.groups[g].role != GroupRole::Input {
                for (gb, &dv) in grads.biases[g].iter_mut().zip(d) {
                    *gb += dv;
                }
            }
        }
        Ok(())
    }

    /// The loss [`Network::backward_step`] differentiates, evaluated on the
    /// current activations.
    pub fn loss(&self, state: &SrnState, targets: &[GroupTarget<'_>]) -> f64 {
        targets
            .iter()
            .map(|t| {
                let sq: f64 = state.acts[t.group.0]
                    .iter()
                    .zip(t.target)
                    .map(|(o, d)| (d - o).powi(2))
                    .sum();
                0.5 * t.weight * sq
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrnState {
    acts: Vec<Vec<f64>>,
    context: Vec<Vec<f64>>,
}

impl SrnState {
    /// Word-start reset: context and activations all zero.
    pub fn reset(&mut self) {
        for v in self.acts.iter_mut().chain(self.context.iter_mut()) {
            v.fill(0.0);
        }
    }

    pub fn activations(&self, group: GroupId) -> &[f64] {
        &self.acts[group.0]
    }

    pub fn activations_mut(&mut self, group: GroupId) -> &mut [f64] {
        &mut self.acts[group.0]
    }

    pub fn context(&self, group: GroupId) -> &[f64] {
        &self.context[group.0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GroupTarget<'a> {
    pub group: GroupId,
    pub target: &'a [f64],
    /// Error weight; 0 switches the group off.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn fill_zero(&mut self) {
        for m in &mut self.weights {
            m.data_mut().fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|m| m.data().iter().all(|&v| v == 0.0))
            && self.biases.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|m| m.data().iter())
            .chain(self.biases.iter().flatten())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}
