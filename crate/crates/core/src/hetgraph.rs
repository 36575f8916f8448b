//! Heterogeneous UAV graphs for the actor (local) and critic (global) networks.
//!
//! Node features are laid out positionally: the observation zero-padded to the
//! widest observation in the fleet, then (global graphs only) the two action
//! components, then the two-entry type one-hot. Offsets never depend on which
//! kinds are present.

use crate::env::{max_observation_width, Action};
use crate::world::{UavKind, Vec2, WorldConfig, WorldState};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode {
    pub agent: usize,
    pub kind: UavKind,
    pub features: Vec<f64>,
}

/// Typed nodes plus directed edges `(source, destination)`; messages flow from
/// source to destination.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGraph {
    pub nodes: Vec<GraphNode>,
    pub ego: usize,
    pub edges: Vec<(usize, usize)>,
}

impl HeteroGraph {
    /// Node indices with an edge into the ego node, in edge order.
    pub fn ego_neighbors(&self) -> Vec<usize> {
        self.edges.iter().filter(|&&(s, d)| d == self.ego && s != self.ego).map(|&(s, _)| s).collect()
    }

    pub fn feature_width(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.features.len())
    }
}

/// Positions and kinds of the fleet, borrowed from a state or a stored transition.
#[derive(Clone, Copy, Debug)]
pub struct Fleet<'a> {
    pub kinds: &'a [UavKind],
    pub positions: &'a [Vec2],
    pub comm_radius: Option<f64>,
}

impl<'a> Fleet<'a> {
    pub fn new(kinds: &'a [UavKind], positions: &'a [Vec2], comm_radius: Option<f64>) -> Self {
        Fleet { kinds, positions, comm_radius }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Nearest other UAV of `kind` (ties to the lowest index), honouring the
    /// optional communication radius.
    pub fn nearest_of_kind(&self, u: usize, kind: UavKind) -> Option<usize> {
        let origin = self.positions[u];
        let mut best: Option<(usize, f64)> = None;
        for v in 0..self.len() {
            if v == u || self.kinds[v] != kind {
                continue;
            }
            let d = origin.dist(self.positions[v]);
            if self.comm_radius.is_some_and(|r| d > r) {
                continue;
            }
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((v, d));
            }
        }
        best.map(|(v, _)| v)
    }
}

/// Feature widths shared by every graph built for one world configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureLayout {
    pub obs_width: usize,
}

impl FeatureLayout {
    pub fn for_config(cfg: &WorldConfig) -> Self {
        FeatureLayout { obs_width: max_observation_width(cfg) }
    }

    pub fn local_width(&self) -> usize {
        self.obs_width + 2
    }

    pub fn global_width(&self) -> usize {
        self.obs_width + 4
    }

    /// Offset of the action slot inside a global-graph feature vector.
    pub fn action_offset(&self) -> usize {
        self.obs_width
    }

    fn local_features(&self, obs: &[f64], kind: UavKind) -> Vec<f64> {
        let mut f = vec![0.0; self.local_width()];
        f[..obs.len()].copy_from_slice(obs);
        f[self.obs_width..].copy_from_slice(&kind.one_hot());
        f
    }

    fn global_features(&self, obs: &[f64], action: Action, kind: UavKind) -> Vec<f64> {
        let mut f = vec![0.0; self.global_width()];
        f[..obs.len()].copy_from_slice(obs);
        f[self.obs_width] = action.ax;
        f[self.obs_width + 1] = action.ay;
        f[self.obs_width + 2..].copy_from_slice(&kind.one_hot());
        f
    }
}

/// Ego node plus the nearest MUAV and nearest CUAV other than the ego. The ego
/// is always node 0.
pub fn build_local_graph(fleet: Fleet<'_>, u: usize, observations: &[Vec<f64>], layout: FeatureLayout) -> HeteroGraph {
    let mut members = vec![u];
    for kind in [UavKind::Muav, UavKind::Cuav] {
        if let Some(v) = fleet.nearest_of_kind(u, kind) {
            members.push(v);
        }
    }
    let nodes = members
        .iter()
        .map(|&v| GraphNode {
            agent: v,
            kind: fleet.kinds[v],
            features: layout.local_features(&observations[v], fleet.kinds[v]),
        })
        .collect::<Vec<_>>();
    let edges = (1..nodes.len()).map(|i| (i, 0)).collect();
    HeteroGraph { nodes, ego: 0, edges }
}

/// Complete directed graph over all UAVs with observation-action features; one
/// view per ego, node `i` is agent `i`.
pub fn build_global_graph(
    kinds: &[UavKind],
    observations: &[Vec<f64>],
    actions: &[Action],
    layout: FeatureLayout,
) -> Vec<HeteroGraph> {
    let nodes: Vec<GraphNode> = kinds
        .iter()
        .enumerate()
        .map(|(v, &kind)| GraphNode { agent: v, kind, features: layout.global_features(&observations[v], actions[v], kind) })
        .collect();
    let n = nodes.len();
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|s| (0..n).filter(move |&d| d != s).map(move |d| (s, d))).collect();
    (0..n).map(|ego| HeteroGraph { nodes: nodes.clone(), ego, edges: edges.clone() }).collect()
}

/// Local graph of UAV `u` taken straight from a world state.
pub fn local_graph_from_state(state: &WorldState, u: usize, observations: &[Vec<f64>]) -> HeteroGraph {
    let kinds = state.kinds();
    let positions = state.positions();
    let fleet = Fleet::new(&kinds, &positions, state.config.comm_radius);
    build_local_graph(fleet, u, observations, FeatureLayout::for_config(&state.config))
}
