use super::network::{soft_update, GraphNet};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moment estimates for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub first: GraphNet,
    pub second: GraphNet,
    pub step: u64,
}

impl Adam {
    pub fn new(like: &GraphNet) -> Self {
        Adam { first: like.zeros_like(), second: like.zeros_like(), step: 0 }
    }

    /// One bias-corrected Adam update of `params` along `-grads`.
    pub fn step(&mut self, params: &mut GraphNet, grads: &GraphNet, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let ps = params.tensors_mut();
        let ms = self.first.tensors_mut();
        let vs = self.second.tensors_mut();
        let gs = grads.tensors();
        for (((p, m), v), g) in ps.into_iter().zip(ms).zip(vs).zip(gs) {
            let p = p.data_mut();
            let m = m.data_mut();
            let v = v.data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Online network, its target copy and optimiser state.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub online: GraphNet,
    pub target: GraphNet,
    pub adam: Adam,
}

impl ParamSet {
    pub fn new(online: GraphNet) -> Self {
        let target = online.clone();
        let adam = Adam::new(&online);
        ParamSet { online, target, adam }
    }

    pub fn apply_gradients(&mut self, grads: &GraphNet, lr: f64) {
        self.adam.step(&mut self.online, grads, lr);
    }

    pub fn soft_update_target(&mut self, tau: f64) {
        soft_update(&mut self.target, &self.online, tau);
    }

    pub fn set_use_gat(&mut self, use_gat: bool) {
        self.online.use_gat = use_gat;
        self.target.use_gat = use_gat;
    }
}
