use std::fmt;

use serde::{Deserialize, Serialize};

use crate::netcore::Matrix;

use super::Task;

/// Bias-only gating units, one per (module, gated task). Values are the
/// per-task exponential normalization of the biases over modules, so each
/// task column is a point on the simplex and does not depend on the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateState {
    /// `modules x tasks`
    pub bias: Matrix,
    pub velocity: Matrix,
}

impl GateState {
    pub fn new(modules: usize, tasks: usize) -> Self {
        GateState {
            bias: Matrix::zeros(modules, tasks),
            velocity: Matrix::zeros(modules, tasks),
        }
    }

    pub fn modules(&self) -> usize {
        self.bias.rows()
    }

    pub fn tasks(&self) -> usize {
        self.bias.cols()
    }

    /// Normalized gate values, `modules x tasks`.
    pub fn values(&self) -> Matrix {
        let (m, g) = (self.modules(), self.tasks());
        let mut out = Matrix::zeros(m, g);
        for t in 0..g {
            let max = (0..m).map(|k| self.bias.get(k, t)).fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = (0..m).map(|k| (self.bias.get(k, t) - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for (k, e) in exps.into_iter().enumerate() {
                out.set(k, t, e / z);
            }
        }
        out
    }

    /// Total gate value each module receives, summed over tasks.
    pub fn usage(values: &Matrix) -> Vec<f64> {
        (0..values.rows()).map(|k| values.row(k).iter().sum()).collect()
    }

    /// `weight * sum_m (S_m - G/2)^2`
    pub fn usage_penalty(values: &Matrix, weight: f64) -> f64 {
        let half = values.cols() as f64 / 2.0;
        weight * Self::usage(values).into_iter().map(|s| (s - half).powi(2)).sum::<f64>()
    }

    /// Gradient of the gated loss with respect to the gate biases.
    ///
    /// `errors[m][t]` is module `m`'s own squared error on task `t`
    /// (`0.5 * |d_t - y_mt|^2`). Tasks with `active[t] == false` contribute
    /// no error term and their biases are frozen (zero gradient), although
    /// their gate values still count toward module usage.
    pub fn bias_gradient(&self, values: &Matrix, errors: &Matrix, active: &[bool], penalty: f64) -> Matrix {
        let (m, g) = (self.modules(), self.tasks());
        let half = g as f64 / 2.0;
        let usage = Self::usage(values);
        let mut grad = Matrix::zeros(m, g);
        for (t, _) in active.iter().enumerate().take(g).filter(|(_, &a)| a) {
            // dE/dg[k,t]
            let de_dg: Vec<f64> = (0..m)
                .map(|k| errors.get(k, t) + 2.0 * penalty * (usage[k] - half))
                .collect();
            let mean: f64 = (0..m).map(|k| values.get(k, t) * de_dg[k]).sum();
            for (k, d) in de_dg.iter().enumerate() {
                grad.set(k, t, values.get(k, t) * (d - mean));
            }
        }
        grad
    }

    pub fn apply(&mut self, grad: &Matrix, learning_rate: f64, momentum: f64) {
        for ((b, v), &g) in self
            .bias
            .data_mut()
            .iter_mut()
            .zip(self.velocity.data_mut())
            .zip(grad.data())
        {
            *v = momentum * *v - learning_rate * g;
            *b += *v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Winning module per gated task.
    pub modules: Vec<usize>,
    /// Tasks whose top two gate values are indistinguishable.
    pub unresolved: Vec<bool>,
    /// `modules x tasks` gate values the assignment was read from.
    pub gates: Vec<Vec<f64>>,
}

const TIE_TOLERANCE: f64 = 1e-9;

/// Map each gated task to the module with the largest gate value. Ties
/// break toward the lowest module index and are flagged unresolved.
pub fn module_assignment(values: &Matrix) -> Assignment {
    let (m, g) = (values.rows(), values.cols());
    let mut modules = Vec::with_capacity(g);
    let mut unresolved = Vec::with_capacity(g);
    for t in 0..g {
        let mut best = 0;
        for k in 1..m {
            if values.get(k, t) > values.get(best, t) + TIE_TOLERANCE {
                best = k;
            }
        }
        let tied = (0..m).any(|k| k != best && (values.get(k, t) - values.get(best, t)).abs() <= TIE_TOLERANCE);
        modules.push(best);
        unresolved.push(tied);
    }
    Assignment {
        modules,
        unresolved,
        gates: (0..m).map(|k| values.row(k).to_vec()).collect(),
    }
}

/// How two modules are divided among the root and up to two inflection
/// tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SharingConfig {
    /// Root alone on one module, all inflections on the other.
    Separate,
    RootWithInflection1,
    RootWithInflection2,
    /// Everything on one module.
    AllShared,
    /// Only reachable with more than two modules.
    Other,
}

impl SharingConfig {
    pub fn classify(modules: &[usize]) -> Self {
        let root = modules[0];
        let infl = &modules[1..];
        if infl.iter().all(|&m| m == root) {
            return SharingConfig::AllShared;
        }
        match infl {
            [a] if *a != root => SharingConfig::Separate,
            [a, b] if a == b => SharingConfig::Separate,
            [a, b] if *a == root && *b != root => SharingConfig::RootWithInflection1,
            [a, b] if *b == root && *a != root => SharingConfig::RootWithInflection2,
            _ => SharingConfig::Other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SharingConfig::Separate => "root|inflections",
            SharingConfig::RootWithInflection1 => "root+inf1|inf2",
            SharingConfig::RootWithInflection2 => "root+inf2|inf1",
            SharingConfig::AllShared => "all-shared",
            SharingConfig::Other => "other",
        }
    }

    pub const ALL: [SharingConfig; 5] = [
        SharingConfig::Separate,
        SharingConfig::RootWithInflection1,
        SharingConfig::RootWithInflection2,
        SharingConfig::AllShared,
        SharingConfig::Other,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for SharingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Assignment {
    pub fn config(&self) -> SharingConfig {
        SharingConfig::classify(&self.modules)
    }

    pub fn task_module(&self, task: Task) -> usize {
        self.modules[task.index()]
    }
}
