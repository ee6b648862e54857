//! Actor and critic networks: per-agent embedding, a bidirectional recurrent
//! communication channel over the agent axis with per-type parameter sharing,
//! per-agent output heads, and the alternative communication schemes used as
//! baselines.

mod model;
mod params;

pub use model::{
    actor_actions, actor_forward, comm_layer_forward, critic_forward, critic_values, BoundParams,
    ForwardOut, ObsBatch,
};
pub use params::{ParamSet, ParamsError};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{TapeError, Tensor};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("agent team must be non-empty")]
    EmptyTeam,
    #[error("shared obs has dim {got}, config says {expected}")]
    SharedObsDim { expected: usize, got: usize },
    #[error("agent {agent}: local obs has dim {got}, config says {expected}")]
    LocalObsDim {
        agent: usize,
        expected: usize,
        got: usize,
    },
    #[error("got {got} local obs vectors for {expected} agents")]
    AgentCount { expected: usize, got: usize },
    #[error("got {got} action tensors for {expected} agents")]
    ActionCount { expected: usize, got: usize },
    #[error("agent {agent}: action shape {got:?}, expected [{rows}, {cols}]")]
    ActionShape {
        agent: usize,
        rows: usize,
        cols: usize,
        got: Vec<usize>,
    },
    #[error("batch rows differ: shared has {shared}, agent {agent} has {got}")]
    BatchRows {
        shared: usize,
        agent: usize,
        got: usize,
    },
    #[error("fully-connected comm was built for {built} agents, called with {got}")]
    FcAgents { built: usize, got: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// How agents exchange information before acting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommMode {
    /// Bidirectional recurrent chain over the agent axis.
    Birnn,
    /// No communication; each agent acts from its own embedding.
    None,
    /// One shared linear message computed from all embeddings; ties the
    /// parameter count to the team size fixed at build time.
    FullyConnected,
    /// Each agent receives the mean of all embeddings.
    Mean,
    /// Each agent additionally sees the mean of the actions already chosen by
    /// agents earlier in the canonical order (actor side only).
    GreedyMdp,
}

impl CommMode {
    pub fn parse(s: &str) -> Option<CommMode> {
        match s {
            "birnn" => Some(CommMode::Birnn),
            "none" => Some(CommMode::None),
            "fully-connected" | "fc" => Some(CommMode::FullyConnected),
            "mean" | "commnet" => Some(CommMode::Mean),
            "greedy-mdp" | "gmezo" => Some(CommMode::GreedyMdp),
            _ => None,
        }
    }
}

/// Bounded squashing applied to one action component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActionSquash {
    /// `lo + (hi - lo) * sigmoid(x)`.
    Sigmoid { lo: f64, hi: f64 },
    /// `scale * tanh(x)`.
    Tanh { scale: f64 },
}

impl ActionSquash {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ActionSquash::Sigmoid { lo, hi } => (lo, hi),
            ActionSquash::Tanh { scale } => (-scale, scale),
        }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        x.clamp(lo, hi)
    }
}

/// Architecture description shared by the actor and critic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetConfig {
    pub shared_obs_dim: usize,
    pub local_obs_dim: usize,
    /// One squash per action component; its length is the action dimension.
    pub action_squash: Vec<ActionSquash>,
    pub embed_hidden: Vec<usize>,
    pub rnn_hidden: usize,
    pub head_hidden: Vec<usize>,
    pub comm_mode: CommMode,
    /// Unit-type id per agent slot, in canonical agent order. Parameters are
    /// shared within a type; its length is the team size.
    pub type_groups: Vec<usize>,
}

impl NetConfig {
    pub fn action_dim(&self) -> usize {
        self.action_squash.len()
    }

    pub fn num_agents(&self) -> usize {
        self.type_groups.len()
    }

    /// Distinct unit-type ids, ascending.
    pub fn type_ids(&self) -> Vec<usize> {
        let mut ids = self.type_groups.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Embedding output dimension (input dim when no hidden layers).
    pub fn embed_out_dim(&self, role: Role) -> usize {
        self.embed_hidden
            .last()
            .copied()
            .unwrap_or_else(|| self.embed_in_dim(role))
    }

    pub fn embed_in_dim(&self, role: Role) -> usize {
        let base = self.shared_obs_dim + self.local_obs_dim;
        match role {
            Role::Actor => base,
            Role::Critic => base + self.action_dim(),
        }
    }

    /// Head input dimension for the given role and comm mode.
    pub fn head_in_dim(&self, role: Role) -> usize {
        let e = self.embed_out_dim(role);
        match (self.comm_mode, role) {
            (CommMode::Birnn, _) => e + 2 * self.rnn_hidden,
            (CommMode::None, _) => e,
            (CommMode::Mean, _) => 2 * e,
            (CommMode::FullyConnected, _) => 2 * e,
            (CommMode::GreedyMdp, Role::Actor) => e + self.action_dim(),
            // The zero-order baseline conditions actions, not values.
            (CommMode::GreedyMdp, Role::Critic) => e,
        }
    }

    pub fn head_out_dim(&self, role: Role) -> usize {
        match role {
            Role::Actor => self.action_dim(),
            Role::Critic => 1,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.type_groups.is_empty() {
            return Err(NetError::EmptyTeam);
        }
        if self.action_squash.is_empty() {
            return Err(NetError::BadConfig("action dim must be positive".into()));
        }
        if self.rnn_hidden == 0 {
            return Err(NetError::BadConfig("rnn hidden size must be positive".into()));
        }
        if self.embed_hidden.iter().chain(&self.head_hidden).any(|&d| d == 0) {
            return Err(NetError::BadConfig("hidden sizes must be positive".into()));
        }
        Ok(())
    }

    /// Expected `(name, shape)` layout of one parameter set.
    pub fn param_template(&self, role: Role) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let e = self.embed_out_dim(role);
        for ty in self.type_ids() {
            let mut d = self.embed_in_dim(role);
            for (li, &h) in self.embed_hidden.iter().enumerate() {
                out.push((format!("t{ty}.embed{li}.w"), vec![d, h]));
                out.push((format!("t{ty}.embed{li}.b"), vec![1, h]));
                d = h;
            }
            if self.comm_mode == CommMode::Birnn {
                for dir in ["fwd", "bwd"] {
                    out.push((format!("t{ty}.{dir}.wh"), vec![self.rnn_hidden, self.rnn_hidden]));
                    out.push((format!("t{ty}.{dir}.wx"), vec![e, self.rnn_hidden]));
                    out.push((format!("t{ty}.{dir}.b"), vec![1, self.rnn_hidden]));
                }
            }
            let mut d = self.head_in_dim(role);
            for (li, &h) in self.head_hidden.iter().enumerate() {
                out.push((format!("t{ty}.head{li}.w"), vec![d, h]));
                out.push((format!("t{ty}.head{li}.b"), vec![1, h]));
                d = h;
            }
            out.push((format!("t{ty}.out.w"), vec![d, self.head_out_dim(role)]));
            out.push((format!("t{ty}.out.b"), vec![1, self.head_out_dim(role)]));
        }
        if self.comm_mode == CommMode::FullyConnected {
            out.push((
                "comm.fc.w".to_string(),
                vec![self.num_agents() * e, e],
            ));
            out.push(("comm.fc.b".to_string(), vec![1, e]));
        }
        out
    }
}

/// Which side of the actor-critic pair a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Actor,
    Critic,
}

/// Online parameters plus their slowly tracking target copy.
#[derive(Debug, Clone)]
pub struct NetParams {
    pub online: ParamSet,
    pub target: ParamSet,
}

impl NetParams {
    /// Random init; the target starts as an exact copy of the online set.
    pub fn init(cfg: &NetConfig, role: Role, rng: &mut impl Rng) -> Result<NetParams, NetError> {
        cfg.validate()?;
        let mut online = ParamSet::new();
        for (name, shape) in cfg.param_template(role) {
            let t = if name.ends_with(".b") {
                Tensor::zeros(&shape)
            } else {
                let fan_in = shape[0];
                let bound = 1.0 / (fan_in as f64).sqrt();
                let n: usize = shape.iter().product();
                let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
                Tensor::new(shape, data).expect("init shape")
            };
            online.insert(name, t)?;
        }
        let target = online.clone();
        Ok(NetParams { online, target })
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<(), ParamsError> {
        self.target.soft_update_from(&self.online, tau)
    }
}

/// Deserialize a parameter image and check it against the layout the config
/// implies, naming the first differing entry.
pub fn deserialize_params(
    bytes: &[u8],
    cfg: &NetConfig,
    role: Role,
) -> Result<ParamSet, NetError> {
    let set = ParamSet::deserialize(bytes)?;
    set.validate_template(&cfg.param_template(role))?;
    Ok(set)
}
