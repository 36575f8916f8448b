//! Heterogeneous graph-attention network shared by actors and critics.
//!
//! Every node is embedded by the encoder of its UAV kind. The ego node then
//! attends over its neighbours with a single-head GAT layer:
//!
//! ```text
//! e_v = LeakyReLU_0.2(aᵀ [W h_v ‖ W h_u]),  α = softmax_v(e),  g_u = Σ α_v W h_v
//! ```
//!
//! and a two-layer head maps `concat(h_u, g_u)` to the output (tanh for the
//! actor, linear for the critic).

use rand::Rng;

use super::layers::{leaky_relu, leaky_relu_grad, Activation, Mlp, MlpCache, ATTENTION_SLOPE};
use super::tensor::{axpy, dot, Tensor2};
use crate::env::Action;
use crate::error::{HgamError, Result};
use crate::hetgraph::HeteroGraph;
use crate::world::UavKind;

pub const EMBED_WIDTH: usize = 64;
pub const HEAD_HIDDEN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub input_width: usize,
    pub embed_width: usize,
    pub head_hidden: usize,
    pub output_width: usize,
    pub output: Activation,
}

impl NetShape {
    pub fn actor(input_width: usize) -> Self {
        NetShape { input_width, embed_width: EMBED_WIDTH, head_hidden: HEAD_HIDDEN, output_width: 2, output: Activation::Tanh }
    }

    pub fn critic(input_width: usize) -> Self {
        NetShape {
            input_width,
            embed_width: EMBED_WIDTH,
            head_hidden: HEAD_HIDDEN,
            output_width: 1,
            output: Activation::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNet {
    pub shape: NetShape,
    /// Indexed by [`UavKind::index`].
    pub encoders: [Mlp; 2],
    pub attn_w: Tensor2,
    /// Row vector of length `2·embed_width`: neighbour half first, ego half second.
    pub attn_a: Tensor2,
    pub head: Mlp,
    /// When false the aggregated neighbour message is forced to zero.
    pub use_gat: bool,
}

/// Intermediates of one forward pass over the ego's neighbourhood.
#[derive(Clone, Debug)]
pub struct GraphForward {
    /// Graph node indices in compute order: ego first, then neighbours.
    pub order: Vec<usize>,
    pub enc: Vec<MlpCache>,
    /// `W h` for every node in `order`.
    pub projected: Vec<Vec<f64>>,
    pub scores_pre: Vec<f64>,
    pub alpha: Vec<f64>,
    pub g: Vec<f64>,
    pub head: MlpCache,
}

impl GraphForward {
    pub fn output(&self) -> &[f64] {
        &self.head.out
    }

    /// Smallest distance of any piecewise-linear unit from its kink.
    pub fn min_abs_kink(&self, net: &GraphNet) -> f64 {
        let enc = self.enc.iter().map(|c| c.min_abs_kink(Activation::LeakyRelu)).fold(f64::INFINITY, f64::min);
        let scores = self.scores_pre.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        enc.min(scores).min(self.head.min_abs_kink(net.shape.output))
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl GraphNet {
    pub fn init<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        let e = shape.embed_width;
        let encoders = [
            Mlp::init(shape.input_width, e, e, Activation::LeakyRelu, rng),
            Mlp::init(shape.input_width, e, e, Activation::LeakyRelu, rng),
        ];
        let attn_w = Tensor2::uniform(e, e, 1.0 / (e as f64).sqrt(), rng);
        let attn_a = Tensor2::uniform(1, 2 * e, 1.0 / ((2 * e) as f64).sqrt(), rng);
        let head = Mlp::init(2 * e, shape.head_hidden, shape.output_width, shape.output, rng);
        GraphNet { shape, encoders, attn_w, attn_a, head, use_gat: true }
    }

    pub fn zeros(shape: NetShape) -> Self {
        let e = shape.embed_width;
        GraphNet {
            shape,
            encoders: [
                Mlp::zeros(shape.input_width, e, e, Activation::LeakyRelu),
                Mlp::zeros(shape.input_width, e, e, Activation::LeakyRelu),
            ],
            attn_w: Tensor2::zeros(e, e),
            attn_a: Tensor2::zeros(1, 2 * e),
            head: Mlp::zeros(2 * e, shape.head_hidden, shape.output_width, shape.output),
            use_gat: true,
        }
    }

    /// Same shapes, all entries zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = GraphNet::zeros(self.shape);
        z.use_gat = self.use_gat;
        z
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::with_capacity(14);
        for kind in [UavKind::Muav, UavKind::Cuav] {
            let enc = &self.encoders[kind.index()];
            let k = kind.as_str();
            out.push((format!("encoder.{k}.hidden.weight"), &enc.hidden.weight));
            out.push((format!("encoder.{k}.hidden.bias"), &enc.hidden.bias));
            out.push((format!("encoder.{k}.out.weight"), &enc.out.weight));
            out.push((format!("encoder.{k}.out.bias"), &enc.out.bias));
        }
        out.push(("attention.w".into(), &self.attn_w));
        out.push(("attention.a".into(), &self.attn_a));
        out.push(("head.hidden.weight".into(), &self.head.hidden.weight));
        out.push(("head.hidden.bias".into(), &self.head.hidden.bias));
        out.push(("head.out.weight".into(), &self.head.out.weight));
        out.push(("head.out.bias".into(), &self.head.out.bias));
        out
    }

    /// Mutable access in the same order as [`named_tensors`](Self::named_tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let [m, c] = &mut self.encoders;
        vec![
            &mut m.hidden.weight,
            &mut m.hidden.bias,
            &mut m.out.weight,
            &mut m.out.bias,
            &mut c.hidden.weight,
            &mut c.hidden.bias,
            &mut c.out.weight,
            &mut c.out.bias,
            &mut self.attn_w,
            &mut self.attn_a,
            &mut self.head.hidden.weight,
            &mut self.head.hidden.bias,
            &mut self.head.out.weight,
            &mut self.head.out.bias,
        ]
    }

    pub fn tensors(&self) -> Vec<&Tensor2> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    pub fn fill(&mut self, v: f64) {
        self.tensors_mut().into_iter().for_each(|t| t.fill(v));
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.shape.input_width {
            return Err(HgamError::Shape {
                expected: format!("feature width {}", self.shape.input_width),
                actual: format!("{width}"),
            });
        }
        Ok(())
    }

    /// Embeds one node feature vector with the encoder of `kind`.
    pub fn encode(&self, kind: UavKind, features: &[f64]) -> Result<Vec<f64>> {
        self.check_width(features.len())?;
        Ok(self.encoders[kind.index()].forward(features).out)
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        self.attn_w.matvec(h)
    }

    fn score_pre(&self, z_neighbor: &[f64], z_ego: &[f64]) -> f64 {
        let e = self.shape.embed_width;
        let a = self.attn_a.data();
        dot(&a[..e], z_neighbor) + dot(&a[e..], z_ego)
    }

    /// Softmax attention weights of the ego over `neighbors`. Empty input
    /// yields an empty vector.
    pub fn attention_coefficients(&self, h_ego: &[f64], neighbors: &[Vec<f64>]) -> Vec<f64> {
        let z_ego = self.project(h_ego);
        let logits: Vec<f64> = neighbors
            .iter()
            .map(|h| leaky_relu(self.score_pre(&self.project(h), &z_ego), ATTENTION_SLOPE))
            .collect();
        if logits.is_empty() {
            return logits;
        }
        softmax(&logits)
    }

    /// `g_u = Σ α_v W h_v`; zero when there are no neighbours.
    pub fn gat_aggregate(&self, h_ego: &[f64], neighbors: &[Vec<f64>]) -> Vec<f64> {
        let mut g = vec![0.0; self.shape.embed_width];
        let alpha = self.attention_coefficients(h_ego, neighbors);
        for (a, h) in alpha.iter().zip(neighbors) {
            axpy(*a, &self.project(h), &mut g);
        }
        g
    }

    pub fn forward(&self, graph: &HeteroGraph) -> Result<GraphForward> {
        self.check_width(graph.feature_width())?;
        let mut order = vec![graph.ego];
        if self.use_gat {
            order.extend(graph.ego_neighbors());
        }
        let enc: Vec<MlpCache> = order
            .iter()
            .map(|&i| {
                let node = &graph.nodes[i];
                self.encoders[node.kind.index()].forward(&node.features)
            })
            .collect();

        let e = self.shape.embed_width;
        let mut projected = Vec::new();
        let mut scores_pre = Vec::new();
        let mut alpha = Vec::new();
        let mut g = vec![0.0; e];
        if order.len() > 1 {
            projected = enc.iter().map(|c| self.project(&c.out)).collect();
            scores_pre = projected[1..].iter().map(|z| self.score_pre(z, &projected[0])).collect();
            let logits: Vec<f64> = scores_pre.iter().map(|&s| leaky_relu(s, ATTENTION_SLOPE)).collect();
            alpha = softmax(&logits);
            for (a, z) in alpha.iter().zip(&projected[1..]) {
                axpy(*a, z, &mut g);
            }
        }

        let mut head_in = Vec::with_capacity(2 * e);
        head_in.extend_from_slice(&enc[0].out);
        head_in.extend_from_slice(&g);
        let head = self.head.forward(&head_in);
        Ok(GraphForward { order, enc, projected, scores_pre, alpha, g, head })
    }

    /// Backpropagates `d_out` through a cached forward pass. Parameter
    /// gradients are accumulated into `grads` when given. Returns the gradient
    /// with respect to every node's feature vector (zeros for nodes that did
    /// not take part).
    pub fn backward(
        &self,
        graph: &HeteroGraph,
        fwd: &GraphForward,
        d_out: &[f64],
        mut grads: Option<&mut GraphNet>,
    ) -> Vec<Vec<f64>> {
        let e = self.shape.embed_width;
        let d_head_in = self
            .head
            .backward(&fwd.head, d_out, grads.as_deref_mut().map(|g| &mut g.head), true)
            .expect("head input gradient requested");
        let mut d_h: Vec<Vec<f64>> = vec![vec![0.0; e]; fwd.order.len()];
        d_h[0].copy_from_slice(&d_head_in[..e]);
        let dg = &d_head_in[e..];

        if fwd.order.len() > 1 {
            let n = fwd.order.len();
            let mut d_z: Vec<Vec<f64>> = vec![vec![0.0; e]; n];
            let d_alpha: Vec<f64> = fwd.projected[1..].iter().map(|z| dot(dg, z)).collect();
            for (j, &a) in fwd.alpha.iter().enumerate() {
                axpy(a, dg, &mut d_z[j + 1]);
            }
            let weighted: f64 = fwd.alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            let a_vec = self.attn_a.data();
            let (a_nbr, a_ego) = a_vec.split_at(e);
            let mut d_a = vec![0.0; 2 * e];
            for j in 0..n - 1 {
                let d_logit = fwd.alpha[j] * (d_alpha[j] - weighted);
                let d_pre = d_logit * leaky_relu_grad(fwd.scores_pre[j], ATTENTION_SLOPE);
                if d_pre == 0.0 {
                    continue;
                }
                let z_nbr = &fwd.projected[j + 1];
                let z_ego = &fwd.projected[0];
                axpy(d_pre, z_nbr, &mut d_a[..e]);
                axpy(d_pre, z_ego, &mut d_a[e..]);
                axpy(d_pre, a_nbr, &mut d_z[j + 1]);
                axpy(d_pre, a_ego, &mut d_z[0]);
            }
            if let Some(g) = grads.as_deref_mut() {
                axpy(1.0, &d_a, g.attn_a.data_mut());
                for (dz, cache) in d_z.iter().zip(&fwd.enc) {
                    g.attn_w.outer_acc(dz, &cache.out);
                }
            }
            for (dh, dz) in d_h.iter_mut().zip(&d_z) {
                self.attn_w.matvec_t_acc(dz, dh);
            }
        }

        let mut d_features = vec![vec![0.0; graph.feature_width()]; graph.nodes.len()];
        for ((&node_idx, cache), dh) in fwd.order.iter().zip(&fwd.enc).zip(&d_h) {
            let k = graph.nodes[node_idx].kind.index();
            let g_enc = grads.as_deref_mut().map(|g| &mut g.encoders[k]);
            let dx = self.encoders[k].backward(cache, dh, g_enc, true).expect("input gradient requested");
            axpy(1.0, &dx, &mut d_features[node_idx]);
        }
        d_features
    }

    /// Critic value of the ego view.
    pub fn critic_forward(&self, graph: &HeteroGraph) -> Result<f64> {
        Ok(self.forward(graph)?.output()[0])
    }

    /// Deterministic action of the ego of a local graph.
    pub fn actor_forward(&self, graph: &HeteroGraph) -> Result<Action> {
        let fwd = self.forward(graph)?;
        let out = fwd.output();
        Ok(Action { ax: out[0], ay: out[1] })
    }
}

/// Sets `target ← τ·source + (1-τ)·target` entrywise.
pub fn soft_update(target: &mut GraphNet, source: &GraphNet, tau: f64) {
    for (t, s) in target.tensors_mut().into_iter().zip(source.tensors()) {
        for (tv, &sv) in t.data_mut().iter_mut().zip(s.data()) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::GraphNode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_shape(output: Activation, out_w: usize) -> NetShape {
        NetShape { input_width: 5, embed_width: 4, head_hidden: 6, output_width: out_w, output }
    }

    fn graph(features: &[Vec<f64>], kinds: &[UavKind]) -> HeteroGraph {
        let nodes = features
            .iter()
            .zip(kinds)
            .enumerate()
            .map(|(i, (f, &k))| GraphNode { agent: i, kind: k, features: f.clone() })
            .collect::<Vec<_>>();
        let edges = (1..nodes.len()).map(|i| (i, 0)).collect();
        HeteroGraph { nodes, ego: 0, edges }
    }

    #[test]
    fn attention_singleton_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = GraphNet::init(small_shape(Activation::Identity, 1), &mut rng);
        let h = vec![0.3, -0.1, 0.7, 0.2];
        assert_eq!(net.attention_coefficients(&h, &[vec![1.0, 2.0, 3.0, 4.0]]), vec![1.0]);
        let nb = vec![0.5, 0.5, -0.5, 1.0];
        let alpha = net.attention_coefficients(&h, &[nb.clone(), nb]);
        assert_eq!(alpha, vec![0.5, 0.5]);
        assert!(net.attention_coefficients(&h, &[]).is_empty());
    }

    #[test]
    fn softmax_of_log_three() {
        let a = softmax(&[0.0, 3f64.ln()]);
        assert!((a[0] - 0.25).abs() < 1e-15 && (a[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn identity_projection_passes_neighbor_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = GraphNet::init(small_shape(Activation::Identity, 1), &mut rng);
        net.attn_w = Tensor2::from_vec(4, 4, (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect());
        let h = vec![0.1, 0.2, 0.3, 0.4];
        let hv = vec![-1.0, 0.5, 2.0, 0.0];
        assert_eq!(net.gat_aggregate(&h, &[hv.clone()]), hv);
        let twice = net.gat_aggregate(&h, &[hv.clone(), hv.clone()]);
        for (a, b) in twice.iter().zip(&hv) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(net.gat_aggregate(&h, &[]), vec![0.0; 4]);
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let actor = GraphNet::zeros(small_shape(Activation::Tanh, 2));
        let g = graph(&[vec![1.0; 5], vec![2.0; 5]], &[UavKind::Muav, UavKind::Cuav]);
        assert_eq!(actor.actor_forward(&g).unwrap(), Action { ax: 0.0, ay: 0.0 });
        let critic = GraphNet::zeros(small_shape(Activation::Identity, 1));
        assert_eq!(critic.critic_forward(&g).unwrap(), 0.0);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let net = GraphNet::zeros(small_shape(Activation::Identity, 1));
        assert!(net.encode(UavKind::Muav, &[1.0, 2.0]).is_err());
        let g = graph(&[vec![1.0; 3]], &[UavKind::Muav]);
        assert!(net.forward(&g).is_err());
    }

    #[test]
    fn single_node_graph_uses_zero_message() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = GraphNet::init(small_shape(Activation::Tanh, 2), &mut rng);
        let g = graph(&[vec![0.2, -0.4, 0.1, 0.9, -1.0]], &[UavKind::Muav]);
        let fwd = net.forward(&g).unwrap();
        assert_eq!(fwd.g, vec![0.0; 4]);
        let mut head_in = net.encode(UavKind::Muav, &g.nodes[0].features).unwrap();
        head_in.extend([0.0; 4]);
        assert_eq!(fwd.output(), net.head.forward(&head_in).out.as_slice());
    }

    #[test]
    fn neighbor_order_does_not_change_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = GraphNet::init(small_shape(Activation::Identity, 1), &mut rng);
        let f = [vec![0.1, 0.2, 0.3, 0.4, 0.5], vec![-0.5, 0.4, 0.0, 1.0, 0.3], vec![0.9, -0.9, 0.2, 0.1, 0.0]];
        let k = [UavKind::Muav, UavKind::Muav, UavKind::Cuav];
        let a = net.critic_forward(&graph(&f, &k)).unwrap();
        let b = net
            .critic_forward(&graph(&[f[0].clone(), f[2].clone(), f[1].clone()], &[k[0], k[2], k[1]]))
            .unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn duplicated_identical_neighbor_keeps_message() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = GraphNet::init(small_shape(Activation::Identity, 1), &mut rng);
        let ego = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let nb = vec![-0.5, 0.4, 0.0, 1.0, 0.3];
        let one = net.forward(&graph(&[ego.clone(), nb.clone()], &[UavKind::Muav; 2])).unwrap();
        let two = net.forward(&graph(&[ego, nb.clone(), nb], &[UavKind::Muav; 3])).unwrap();
        assert_eq!(one.alpha, vec![1.0]);
        assert_eq!(two.alpha, vec![0.5, 0.5]);
        for (a, b) in one.g.iter().zip(&two.g) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((one.output()[0] - two.output()[0]).abs() < 1e-14);
    }

    #[test]
    fn soft_update_blends() {
        let shape = small_shape(Activation::Identity, 1);
        let mut target = GraphNet::zeros(shape);
        let mut source = GraphNet::zeros(shape);
        source.fill(1.0);
        soft_update(&mut target, &source, 0.01);
        assert!(target.tensors().iter().all(|t| t.data().iter().all(|&v| (v - 0.01).abs() < 1e-15)));
        soft_update(&mut target, &source, 1.0);
        assert_eq!(target, source);
        let before = target.clone();
        soft_update(&mut target, &GraphNet::zeros(shape), 0.0);
        assert_eq!(target, before);
    }
}
