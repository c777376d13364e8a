use serde::{Deserialize, Serialize};

use super::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub init_weight_range: f64,
    /// Weight of the gate-usage penalty (adaptive networks only).
    pub gate_penalty: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            momentum: 0.9,
            init_weight_range: 0.5,
            gate_penalty: 0.05,
        }
    }
}

impl Hyperparams {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.into()));
        if !(self.learning_rate > 0.0) {
            return bad("learning-rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.init_weight_range > 0.0) {
            return bad("init-weight-range must be > 0");
        }
        if !(self.gate_penalty >= 0.0) {
            return bad("gate-penalty must be >= 0");
        }
        Ok(())
    }
}

/// Previous weight changes, shaped like the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    pub delta: Gradients,
}

impl Momentum {
    pub fn new(net: &Network) -> Self {
        Momentum {
            delta: net.zero_gradients(),
        }
    }
}

/// `dw = momentum * dw_prev - lr * g; w += dw`, with masked weights pinned
/// at zero.
pub fn apply_update(net: &mut Network, grads: &Gradients, hyper: &Hyperparams, velocity: &mut Momentum) {
    let (lr, mom) = (hyper.learning_rate, hyper.momentum);
    for ((c, g), v) in net
        .connections_mut()
        .iter_mut()
        .zip(&grads.weights)
        .zip(&mut velocity.delta.weights)
    {
        let super::Connection { weights, mask, .. } = c;
        for (((w, &gv), dv), &m) in weights
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(v.data_mut())
            .zip(mask.data())
        {
            *dv = m * (mom * *dv - lr * gv);
            *w = m * (*w + *dv);
        }
    }
    for ((b, g), v) in net
        .biases_mut()
        .iter_mut()
        .zip(&grads.biases)
        .zip(&mut velocity.delta.biases)
    {
        for ((bv, &gv), dv) in b.iter_mut().zip(g).zip(v) {
            *dv = mom * *dv - lr * gv;
            *bv += *dv;
        }
    }
}
