//! Actor and critic parameter sets for a fleet, and the gradient steps that
//! train them.

use std::path::Path;

use rand::Rng;

use super::replay::{NStepItem, ReplayBuffer};
use crate::env::Action;
use crate::error::{HgamError, Result};
use crate::hetgraph::{build_global_graph, build_local_graph, FeatureLayout, Fleet, HeteroGraph};
use crate::neural::checkpoint::{self, TensorStore};
use crate::neural::{GraphNet, NetShape, ParamSet, Tensor2};
use crate::world::{UavKind, Vec2, WorldConfig};

/// Mean ζ-weighted squared TD error of `net` over `(view, y, ζ)` terms, its
/// parameter gradient and the per-term errors `y − Q`.
pub fn critic_loss_grad(net: &GraphNet, terms: &[(&HeteroGraph, f64, f64)]) -> Result<(f64, GraphNet, Vec<f64>)> {
    let mut grads = net.zeros_like();
    let mut loss = 0.0;
    let mut deltas = Vec::with_capacity(terms.len());
    let scale = 1.0 / terms.len().max(1) as f64;
    for &(view, y, zeta) in terms {
        let fwd = net.forward(view)?;
        let delta = y - fwd.output()[0];
        loss += scale * zeta * delta * delta;
        net.backward(view, &fwd, &[-2.0 * scale * zeta * delta], Some(&mut grads));
        deltas.push(delta);
    }
    Ok((loss, grads, deltas))
}

/// Mean critic value after substituting the actor's output for the ego action
/// of each critic view, and the gradient of its negation with respect to the
/// actor parameters. Terms are `(local graph, critic view)`; the critic view's
/// ego must be the local graph's ego agent.
pub fn actor_objective_grad(
    actor: &GraphNet,
    critic: &GraphNet,
    layout: FeatureLayout,
    terms: &[(&HeteroGraph, &HeteroGraph)],
) -> Result<(f64, GraphNet)> {
    let mut grads = actor.zeros_like();
    let mut objective = 0.0;
    let scale = 1.0 / terms.len().max(1) as f64;
    let off = layout.action_offset();
    for &(local, view) in terms {
        let a_fwd = actor.forward(local)?;
        let action = a_fwd.output();
        let mut view = view.clone();
        view.nodes[view.ego].features[off..off + 2].copy_from_slice(action);
        let c_fwd = critic.forward(&view)?;
        objective += scale * c_fwd.output()[0];
        let d_features = critic.backward(&view, &c_fwd, &[1.0], None);
        let dq_da = &d_features[view.ego][off..off + 2];
        let d_out = [-scale * dq_da[0], -scale * dq_da[1]];
        actor.backward(local, &a_fwd, &d_out, Some(&mut grads));
    }
    Ok((objective, grads))
}

/// Learning rates and discounting used by one update step.
#[derive(Clone, Copy, Debug)]
pub struct UpdateParams {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateStats {
    /// Mean over critics of their batch loss.
    pub critic_loss: f64,
    /// Mean over actors of their objective before the step.
    pub actor_objective: f64,
    /// `[sample][agent]` TD errors after the critic step's forward pass.
    pub td_errors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Learner {
    pub layout: FeatureLayout,
    pub kinds: Vec<UavKind>,
    pub comm_radius: Option<f64>,
    pub actors: Vec<ParamSet>,
    /// Actor used by each agent.
    pub actor_of: Vec<usize>,
    /// One critic per UAV kind present in the fleet.
    pub critics: Vec<ParamSet>,
    pub critic_of: Vec<usize>,
    pub shared_actors: bool,
}

fn kind_slots(kinds: &[UavKind]) -> (usize, Vec<usize>) {
    let present: Vec<UavKind> =
        [UavKind::Muav, UavKind::Cuav].into_iter().filter(|k| kinds.contains(k)).collect();
    let of = kinds.iter().map(|k| present.iter().position(|p| p == k).unwrap()).collect();
    (present.len(), of)
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(world: &WorldConfig, shared_actors: bool, use_gat: bool, rng: &mut R) -> Self {
        let mut l = Self::build(world, shared_actors, |shape| GraphNet::init(shape, rng));
        l.set_use_gat(use_gat);
        l
    }

    fn build(world: &WorldConfig, shared_actors: bool, mut make: impl FnMut(NetShape) -> GraphNet) -> Self {
        let layout = FeatureLayout::for_config(world);
        let kinds: Vec<UavKind> = std::iter::repeat_n(UavKind::Muav, world.num_muavs)
            .chain(std::iter::repeat_n(UavKind::Cuav, world.num_cuavs))
            .collect();
        let (n_critics, critic_of) = kind_slots(&kinds);
        let (n_actors, actor_of) = if shared_actors { (n_critics, critic_of.clone()) } else { (kinds.len(), (0..kinds.len()).collect()) };
        let actors = (0..n_actors).map(|_| ParamSet::new(make(NetShape::actor(layout.local_width())))).collect();
        let critics = (0..n_critics).map(|_| ParamSet::new(make(NetShape::critic(layout.global_width())))).collect();
        Learner { layout, kinds, comm_radius: world.comm_radius, actors, actor_of, critics, critic_of, shared_actors }
    }

    pub fn set_use_gat(&mut self, use_gat: bool) {
        self.actors.iter_mut().chain(&mut self.critics).for_each(|p| p.set_use_gat(use_gat));
    }

    pub fn num_agents(&self) -> usize {
        self.kinds.len()
    }

    pub fn local_graphs(&self, positions: &[Vec2], obs: &[Vec<f64>]) -> Vec<HeteroGraph> {
        let fleet = Fleet::new(&self.kinds, positions, self.comm_radius);
        (0..self.kinds.len()).map(|u| build_local_graph(fleet, u, obs, self.layout)).collect()
    }

    fn policy(&self, positions: &[Vec2], obs: &[Vec<f64>], target: bool) -> Result<Vec<Action>> {
        self.local_graphs(positions, obs)
            .iter()
            .enumerate()
            .map(|(u, g)| {
                let set = &self.actors[self.actor_of[u]];
                let net = if target { &set.target } else { &set.online };
                net.actor_forward(g)
            })
            .collect()
    }

    /// Deterministic online actions for every agent.
    pub fn act(&self, positions: &[Vec2], obs: &[Vec<f64>]) -> Result<Vec<Action>> {
        self.policy(positions, obs, false)
    }

    pub fn target_act(&self, positions: &[Vec2], obs: &[Vec<f64>]) -> Result<Vec<Action>> {
        self.policy(positions, obs, true)
    }

    /// `y = λ + γⁿ Q'(o', μ'(o'))` per agent, or `λ` for terminal windows.
    pub fn critic_targets(&self, buffer: &ReplayBuffer, item: &NStepItem, gamma: f64) -> Result<Vec<f64>> {
        if item.done {
            return Ok(item.returns.clone());
        }
        let last = buffer.get(item.last);
        let next_actions = self.target_act(&last.next_positions, &last.next_obs)?;
        let views = build_global_graph(&self.kinds, &last.next_obs, &next_actions, self.layout);
        let discount = gamma.powi(item.horizon as i32);
        views
            .iter()
            .enumerate()
            .map(|(u, v)| Ok(item.returns[u] + discount * self.critics[self.critic_of[u]].target.critic_forward(v)?))
            .collect()
    }

    /// One actor step, then one critic step, on the windows in `items`.
    /// `weights[i][u]` is agent `u`'s ζ for sample `i`.
    pub fn update(
        &mut self,
        buffer: &ReplayBuffer,
        items: &[NStepItem],
        weights: &[Vec<f64>],
        params: UpdateParams,
    ) -> Result<UpdateStats> {
        let n = self.kinds.len();
        let targets: Vec<Vec<f64>> =
            items.iter().map(|it| self.critic_targets(buffer, it, params.gamma)).collect::<Result<_>>()?;
        let mut locals = Vec::with_capacity(items.len());
        let mut views = Vec::with_capacity(items.len());
        for it in items {
            let t = buffer.get(it.index);
            locals.push(self.local_graphs(&t.positions, &t.obs));
            views.push(build_global_graph(&self.kinds, &t.obs, &t.actions, self.layout));
        }

        let mut objective = 0.0;
        for a in 0..self.actors.len() {
            let mut terms = Vec::new();
            let mut critic = None;
            for u in (0..n).filter(|&u| self.actor_of[u] == a) {
                critic = Some(self.critic_of[u]);
                terms.extend(locals.iter().zip(&views).map(|(l, v)| (&l[u], &v[u])));
            }
            let Some(c) = critic else { continue };
            let (obj, grads) = actor_objective_grad(&self.actors[a].online, &self.critics[c].online, self.layout, &terms)?;
            self.actors[a].apply_gradients(&grads, params.lr_actor);
            objective += obj / self.actors.len() as f64;
        }

        let mut loss = 0.0;
        let mut td = vec![vec![0.0; n]; items.len()];
        for c in 0..self.critics.len() {
            let agents: Vec<usize> = (0..n).filter(|&u| self.critic_of[u] == c).collect();
            let mut terms = Vec::new();
            for (i, v) in views.iter().enumerate() {
                for &u in &agents {
                    terms.push((&v[u], targets[i][u], weights[i][u]));
                }
            }
            let (l, grads, deltas) = critic_loss_grad(&self.critics[c].online, &terms)?;
            self.critics[c].apply_gradients(&grads, params.lr_critic);
            loss += l / self.critics.len() as f64;
            for (k, d) in deltas.into_iter().enumerate() {
                td[k / agents.len()][agents[k % agents.len()]] = d;
            }
        }
        Ok(UpdateStats { critic_loss: loss, actor_objective: objective, td_errors: td })
    }

    pub fn soft_update_targets(&mut self, tau: f64) {
        self.actors.iter_mut().chain(&mut self.critics).for_each(|p| p.soft_update_target(tau));
    }

    fn meta(&self) -> Tensor2 {
        let muavs = self.kinds.iter().filter(|k| **k == UavKind::Muav).count();
        let cuavs = self.kinds.len() - muavs;
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let gat = self.actors.first().is_some_and(|a| a.online.use_gat);
        Tensor2::from_vec(
            1,
            5,
            vec![muavs as f64, cuavs as f64, self.layout.obs_width as f64, flag(self.shared_actors), flag(gat)],
        )
    }

    pub fn checkpoint_entries(&self) -> Vec<(String, Tensor2)> {
        let mut out = vec![("meta.fleet".to_string(), self.meta())];
        for (i, a) in self.actors.iter().enumerate() {
            out.extend(a.checkpoint_entries(&format!("actor.{i}")));
        }
        for (i, c) in self.critics.iter().enumerate() {
            out.extend(c.checkpoint_entries(&format!("critic.{i}")));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.checkpoint_entries())
    }

    /// Restores a learner for `world` from a checkpoint, checking that the
    /// fleet and feature widths match.
    pub fn load(path: &Path, world: &WorldConfig) -> Result<Self> {
        let err = |reason: String| HgamError::Checkpoint { path: path.to_path_buf(), reason };
        let mut store = TensorStore::new(checkpoint::load(path)?);
        let meta = store.take("meta.fleet", (1, 5)).map_err(err)?;
        let mut learner = Self::build(world, meta.get(0, 3) != 0.0, GraphNet::zeros);
        learner.set_use_gat(meta.get(0, 4) != 0.0);
        if meta != learner.meta() {
            return Err(HgamError::Shape {
                expected: format!("fleet/observation layout {:?}", learner.meta().data()),
                actual: format!("{:?}", meta.data()),
            });
        }
        for (i, a) in learner.actors.iter_mut().enumerate() {
            a.restore_entries(&format!("actor.{i}"), &mut store).map_err(err)?;
        }
        for (i, c) in learner.critics.iter_mut().enumerate() {
            c.restore_entries(&format!("critic.{i}"), &mut store).map_err(err)?;
        }
        let left = store.remaining();
        if !left.is_empty() {
            return Err(err(format!("unexpected tensors: {}", left.join(", "))));
        }
        Ok(learner)
    }
}
