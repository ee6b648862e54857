//! Tape-recorded forward passes for the actor and critic networks.
//!
//! Both nets share one topology: per-agent embedding MLP, a communication
//! stage selected by [`CommMode`], and a per-agent head MLP. Parameters are
//! keyed by unit type and reused for every agent of that type, so the model
//! size does not depend on the team size (except in fully-connected mode).

use crate::autodiff::{Gradients, Tape, Tensor, Var};

use super::{ActionSquash, CommMode, NetConfig, NetError, ParamSet, Role};

/// A minibatch of observations: `shared` is `[M, S]` (absent when the
/// environment has no shared view), `locals[i]` is `[M, L]` for agent `i`.
#[derive(Debug, Clone)]
pub struct ObsBatch {
    pub shared: Option<Tensor>,
    pub locals: Vec<Tensor>,
}

impl ObsBatch {
    /// Single-row batch from plain vectors.
    pub fn single(shared: &[f64], locals: &[Vec<f64>]) -> ObsBatch {
        let shared_t = if shared.is_empty() {
            None
        } else {
            Some(Tensor::new(vec![1, shared.len()], shared.to_vec()).expect("shared row"))
        };
        let locals_t = locals
            .iter()
            .map(|l| Tensor::new(vec![1, l.len()], l.clone()).expect("local row"))
            .collect();
        ObsBatch {
            shared: shared_t,
            locals: locals_t,
        }
    }

    /// Stack per-sample observations into one batch. All samples must agree
    /// on agent count and dims.
    pub fn stack(samples: &[(&[f64], &[Vec<f64>])]) -> ObsBatch {
        assert!(!samples.is_empty());
        let m = samples.len();
        let s_dim = samples[0].0.len();
        let n = samples[0].1.len();
        let shared = if s_dim == 0 {
            None
        } else {
            let mut data = Vec::with_capacity(m * s_dim);
            for (s, _) in samples {
                data.extend_from_slice(s);
            }
            Some(Tensor::new(vec![m, s_dim], data).expect("shared stack"))
        };
        let mut locals = Vec::with_capacity(n);
        for i in 0..n {
            let l_dim = samples[0].1[i].len();
            let mut data = Vec::with_capacity(m * l_dim);
            for (_, ls) in samples {
                data.extend_from_slice(&ls[i]);
            }
            locals.push(Tensor::new(vec![m, l_dim], data).expect("local stack"));
        }
        ObsBatch { shared, locals }
    }

    pub fn rows(&self) -> usize {
        self.locals.first().map_or(0, |t| t.shape()[0])
    }

    pub fn num_agents(&self) -> usize {
        self.locals.len()
    }
}

/// Tape vars for one bound parameter set, parallel to the set's order.
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    fn bind(tape: &mut Tape, set: &ParamSet, trainable: bool) -> Result<BoundParams, NetError> {
        let mut vars = Vec::with_capacity(set.len());
        for (_, t) in set.iter() {
            let v = if trainable {
                tape.param(t.clone())?
            } else {
                tape.input(t.clone())?
            };
            vars.push(v);
        }
        Ok(BoundParams { vars })
    }

    fn var(&self, set: &ParamSet, name: &str) -> Result<Var, NetError> {
        set.names()
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| NetError::BadConfig(format!("parameter {name} not found")))
    }

    /// Gradients in set order, exact zeros for entries off the backward path.
    pub fn grads(&self, set: &ParamSet, grads: &Gradients) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(set.tensors())
            .map(|(v, t)| {
                grads
                    .wrt(*v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(t.shape()))
            })
            .collect()
    }
}

/// Result of one forward pass. `outputs[i]` is the squashed action `[M, A]`
/// for the actor, or the scalar value `[M, 1]` for the critic.
pub struct ForwardOut {
    pub outputs: Vec<Var>,
    /// Per-agent forward-direction hidden state `[M, H]` (birnn mode only).
    pub hidden_fwd: Vec<Var>,
    /// Per-agent backward-direction hidden state `[M, H]` (birnn mode only).
    pub hidden_bwd: Vec<Var>,
    pub bound: BoundParams,
}

impl ForwardOut {
    pub fn output_tensors(&self, tape: &Tape) -> Vec<Tensor> {
        self.outputs.iter().map(|&v| tape.value(v).clone()).collect()
    }
}

struct Ctx<'a> {
    tape: &'a mut Tape,
    set: &'a ParamSet,
    bound: &'a BoundParams,
}

impl Ctx<'_> {
    fn affine(&mut self, x: Var, w: &str, b: &str) -> Result<Var, NetError> {
        let wv = self.bound.var(self.set, w)?;
        let bv = self.bound.var(self.set, b)?;
        let prod = self.tape.matmul(x, wv)?;
        Ok(self.tape.add(prod, bv)?)
    }

    fn mlp(&mut self, prefix: &str, layers: usize, mut x: Var) -> Result<Var, NetError> {
        for li in 0..layers {
            x = self.affine(x, &format!("{prefix}{li}.w"), &format!("{prefix}{li}.b"))?;
            x = self.tape.relu(x)?;
        }
        Ok(x)
    }

    fn rnn_cell(&mut self, ty: usize, dir: &str, h: Var, x: Var) -> Result<Var, NetError> {
        let hh = self.bound.var(self.set, &format!("t{ty}.{dir}.wh"))?;
        let hx = self.bound.var(self.set, &format!("t{ty}.{dir}.wx"))?;
        let b = self.bound.var(self.set, &format!("t{ty}.{dir}.b"))?;
        let ph = self.tape.matmul(h, hh)?;
        let px = self.tape.matmul(x, hx)?;
        let s = self.tape.add(ph, px)?;
        let s = self.tape.add(s, b)?;
        Ok(self.tape.tanh(s)?)
    }
}

fn check_obs(cfg: &NetConfig, obs: &ObsBatch) -> Result<usize, NetError> {
    let n = cfg.num_agents();
    if n == 0 {
        return Err(NetError::EmptyTeam);
    }
    if obs.locals.len() != n {
        return Err(NetError::AgentCount {
            expected: n,
            got: obs.locals.len(),
        });
    }
    let m = obs.rows();
    match (&obs.shared, cfg.shared_obs_dim) {
        (None, 0) => {}
        (Some(s), d) if s.shape() == [m, d] => {}
        (s, d) => {
            return Err(NetError::SharedObsDim {
                expected: d,
                got: s.as_ref().map_or(0, |t| t.shape()[1]),
            })
        }
    }
    for (i, l) in obs.locals.iter().enumerate() {
        if l.shape()[1] != cfg.local_obs_dim {
            return Err(NetError::LocalObsDim {
                agent: i,
                expected: cfg.local_obs_dim,
                got: l.shape()[1],
            });
        }
        if l.shape()[0] != m {
            return Err(NetError::BatchRows {
                shared: m,
                agent: i,
                got: l.shape()[0],
            });
        }
    }
    Ok(m)
}

/// Per-agent embeddings: `MLP(shared ++ local_i [++ action_i])`.
fn embeddings(
    ctx: &mut Ctx,
    cfg: &NetConfig,
    obs: &ObsBatch,
    actions: Option<&[Var]>,
) -> Result<Vec<Var>, NetError> {
    let shared_var = match &obs.shared {
        Some(s) => Some(ctx.tape.input(s.clone())?),
        None => None,
    };
    let mut embeds = Vec::with_capacity(cfg.num_agents());
    for (i, local) in obs.locals.iter().enumerate() {
        let local_var = ctx.tape.input(local.clone())?;
        let mut parts = Vec::with_capacity(3);
        if let Some(sv) = shared_var {
            parts.push(sv);
        }
        parts.push(local_var);
        if let Some(acts) = actions {
            parts.push(acts[i]);
        }
        let joined = if parts.len() == 1 {
            parts[0]
        } else {
            ctx.tape.concat(1, &parts)?
        };
        let ty = cfg.type_groups[i];
        embeds.push(ctx.mlp(&format!("t{ty}.embed"), cfg.embed_hidden.len(), joined)?);
    }
    Ok(embeds)
}

/// The non-recurrent communication stage, one output per agent.
///
/// `none` is the identity; `mean` appends the average embedding; and
/// `fully-connected` appends one shared linear message computed from the
/// concatenation of all embeddings (`fc` supplies its weight and bias vars).
/// The `birnn` and `greedy-mdp` modes are realized inside
/// [`actor_forward`]/[`critic_forward`] because they need the recurrent chain
/// or the earlier agents' actions.
pub fn comm_layer_forward(
    tape: &mut Tape,
    mode: CommMode,
    embeds: &[Var],
    fc: Option<(Var, Var)>,
) -> Result<Vec<Var>, NetError> {
    if embeds.is_empty() {
        return Err(NetError::EmptyTeam);
    }
    match mode {
        CommMode::None => Ok(embeds.to_vec()),
        CommMode::Mean => {
            let mut acc = embeds[0];
            for &e in &embeds[1..] {
                acc = tape.add(acc, e)?;
            }
            let msg = tape.scale(acc, 1.0 / embeds.len() as f64)?;
            embeds
                .iter()
                .map(|&e| Ok(tape.concat(1, &[e, msg])?))
                .collect()
        }
        CommMode::FullyConnected => {
            let (w, b) = fc.ok_or_else(|| {
                NetError::BadConfig("fully-connected comm requires its weights".into())
            })?;
            let all = tape.concat(1, embeds)?;
            let e_dim = tape.value(embeds[0]).shape()[1];
            let built = tape.value(w).shape()[0] / e_dim;
            if built != embeds.len() {
                return Err(NetError::FcAgents {
                    built,
                    got: embeds.len(),
                });
            }
            let prod = tape.matmul(all, w)?;
            let msg = tape.add(prod, b)?;
            embeds
                .iter()
                .map(|&e| Ok(tape.concat(1, &[e, msg])?))
                .collect()
        }
        CommMode::Birnn | CommMode::GreedyMdp => Err(NetError::BadConfig(format!(
            "{mode:?} communication is realized inside the actor/critic forward pass"
        ))),
    }
}

fn birnn_chains(
    ctx: &mut Ctx,
    cfg: &NetConfig,
    embeds: &[Var],
    m: usize,
) -> Result<(Vec<Var>, Vec<Var>), NetError> {
    let n = embeds.len();
    let zero = ctx.tape.input(Tensor::zeros(&[m, cfg.rnn_hidden]))?;
    let mut fwd = Vec::with_capacity(n);
    let mut h = zero;
    for (i, &e) in embeds.iter().enumerate() {
        h = ctx.rnn_cell(cfg.type_groups[i], "fwd", h, e)?;
        fwd.push(h);
    }
    let mut bwd = vec![zero; n];
    let mut h = zero;
    for i in (0..n).rev() {
        h = ctx.rnn_cell(cfg.type_groups[i], "bwd", h, embeds[i])?;
        bwd[i] = h;
    }
    Ok((fwd, bwd))
}

fn head(ctx: &mut Ctx, cfg: &NetConfig, ty: usize, x: Var, role: Role) -> Result<Var, NetError> {
    let hidden = ctx.mlp(&format!("t{ty}.head"), cfg.head_hidden.len(), x)?;
    let raw = ctx.affine(hidden, &format!("t{ty}.out.w"), &format!("t{ty}.out.b"))?;
    match role {
        Role::Critic => Ok(raw),
        Role::Actor => squash(ctx.tape, &cfg.action_squash, raw),
    }
}

fn squash(tape: &mut Tape, squashes: &[ActionSquash], raw: Var) -> Result<Var, NetError> {
    let mut cols = Vec::with_capacity(squashes.len());
    for (c, sq) in squashes.iter().enumerate() {
        let col = tape.slice(raw, 1, c, 1)?;
        let v = match *sq {
            ActionSquash::Sigmoid { lo, hi } => {
                let s = tape.sigmoid(col)?;
                let scaled = tape.scale(s, hi - lo)?;
                if lo == 0.0 {
                    scaled
                } else {
                    let shift = tape.constant_row(&[lo])?;
                    tape.add(scaled, shift)?
                }
            }
            ActionSquash::Tanh { scale } => {
                let t = tape.tanh(col)?;
                tape.scale(t, scale)?
            }
        };
        cols.push(v);
    }
    if cols.len() == 1 {
        Ok(cols[0])
    } else {
        Ok(tape.concat(1, &cols)?)
    }
}

/// Policy network: observations in, one bounded action `[M, A]` per agent.
pub fn actor_forward(
    tape: &mut Tape,
    params: &ParamSet,
    cfg: &NetConfig,
    obs: &ObsBatch,
    trainable: bool,
) -> Result<ForwardOut, NetError> {
    cfg.validate()?;
    let m = check_obs(cfg, obs)?;
    let bound = BoundParams::bind(tape, params, trainable)?;
    let mut ctx = Ctx {
        tape,
        set: params,
        bound: &bound,
    };
    let embeds = embeddings(&mut ctx, cfg, obs, None)?;
    let n = embeds.len();

    let mut hidden_fwd = Vec::new();
    let mut hidden_bwd = Vec::new();
    let outputs = match cfg.comm_mode {
        CommMode::Birnn => {
            let (fwd, bwd) = birnn_chains(&mut ctx, cfg, &embeds, m)?;
            let mut outs = Vec::with_capacity(n);
            for i in 0..n {
                let joined = ctx.tape.concat(1, &[embeds[i], fwd[i], bwd[i]])?;
                outs.push(head(&mut ctx, cfg, cfg.type_groups[i], joined, Role::Actor)?);
            }
            hidden_fwd = fwd;
            hidden_bwd = bwd;
            outs
        }
        CommMode::GreedyMdp => {
            // Sequential conditioning: agent i sees the mean action of agents
            // 0..i, which keeps the parameter count independent of N.
            let a_dim = cfg.action_dim();
            let zero = ctx.tape.input(Tensor::zeros(&[m, a_dim]))?;
            let mut outs: Vec<Var> = Vec::with_capacity(n);
            for (i, &e) in embeds.iter().enumerate() {
                let prev = if outs.is_empty() {
                    zero
                } else {
                    let mut acc = outs[0];
                    for &a in &outs[1..] {
                        acc = ctx.tape.add(acc, a)?;
                    }
                    ctx.tape.scale(acc, 1.0 / outs.len() as f64)?
                };
                let joined = ctx.tape.concat(1, &[e, prev])?;
                outs.push(head(&mut ctx, cfg, cfg.type_groups[i], joined, Role::Actor)?);
            }
            outs
        }
        mode => {
            let fc = fc_vars(&mut ctx, cfg)?;
            let comms = comm_layer_forward(ctx.tape, mode, &embeds, fc)?;
            let mut outs = Vec::with_capacity(n);
            for (i, &c) in comms.iter().enumerate() {
                outs.push(head(&mut ctx, cfg, cfg.type_groups[i], c, Role::Actor)?);
            }
            outs
        }
    };

    Ok(ForwardOut {
        outputs,
        hidden_fwd,
        hidden_bwd,
        bound,
    })
}

/// Value network: observations and per-agent actions in, one `Q_i` `[M, 1]`
/// per agent. Differentiable in both the parameters and the action inputs.
pub fn critic_forward(
    tape: &mut Tape,
    params: &ParamSet,
    cfg: &NetConfig,
    obs: &ObsBatch,
    actions: &[Var],
    trainable: bool,
) -> Result<ForwardOut, NetError> {
    cfg.validate()?;
    let m = check_obs(cfg, obs)?;
    let n = cfg.num_agents();
    if actions.len() != n {
        return Err(NetError::ActionCount {
            expected: n,
            got: actions.len(),
        });
    }
    for (i, &a) in actions.iter().enumerate() {
        let shape = tape.value(a).shape().to_vec();
        if shape != [m, cfg.action_dim()] {
            return Err(NetError::ActionShape {
                agent: i,
                rows: m,
                cols: cfg.action_dim(),
                got: shape,
            });
        }
    }

    let bound = BoundParams::bind(tape, params, trainable)?;
    let mut ctx = Ctx {
        tape,
        set: params,
        bound: &bound,
    };
    let embeds = embeddings(&mut ctx, cfg, obs, Some(actions))?;

    let mut hidden_fwd = Vec::new();
    let mut hidden_bwd = Vec::new();
    let outputs = match cfg.comm_mode {
        CommMode::Birnn => {
            let (fwd, bwd) = birnn_chains(&mut ctx, cfg, &embeds, m)?;
            let mut outs = Vec::with_capacity(n);
            for i in 0..n {
                let joined = ctx.tape.concat(1, &[embeds[i], fwd[i], bwd[i]])?;
                outs.push(head(&mut ctx, cfg, cfg.type_groups[i], joined, Role::Critic)?);
            }
            hidden_fwd = fwd;
            hidden_bwd = bwd;
            outs
        }
        // The zero-order baseline conditions only actions; its value side is
        // per-agent independent.
        CommMode::GreedyMdp => {
            let mut outs = Vec::with_capacity(n);
            for (i, &e) in embeds.iter().enumerate() {
                outs.push(head(&mut ctx, cfg, cfg.type_groups[i], e, Role::Critic)?);
            }
            outs
        }
        mode => {
            let fc = fc_vars(&mut ctx, cfg)?;
            let comms = comm_layer_forward(ctx.tape, mode, &embeds, fc)?;
            let mut outs = Vec::with_capacity(n);
            for (i, &c) in comms.iter().enumerate() {
                outs.push(head(&mut ctx, cfg, cfg.type_groups[i], c, Role::Critic)?);
            }
            outs
        }
    };

    Ok(ForwardOut {
        outputs,
        hidden_fwd,
        hidden_bwd,
        bound,
    })
}

fn fc_vars(ctx: &mut Ctx, cfg: &NetConfig) -> Result<Option<(Var, Var)>, NetError> {
    if cfg.comm_mode == CommMode::FullyConnected {
        let w = ctx.bound.var(ctx.set, "comm.fc.w")?;
        let b = ctx.bound.var(ctx.set, "comm.fc.b")?;
        Ok(Some((w, b)))
    } else {
        Ok(None)
    }
}

/// Plain (untaped caller view) actor evaluation: squashed actions per agent,
/// plus hidden states when the comm mode records them.
pub fn actor_actions(
    params: &ParamSet,
    cfg: &NetConfig,
    obs: &ObsBatch,
) -> Result<(Vec<Tensor>, Vec<Tensor>, Vec<Tensor>), NetError> {
    let mut tape = Tape::new();
    let out = actor_forward(&mut tape, params, cfg, obs, false)?;
    let actions = out.output_tensors(&tape);
    let hf = out.hidden_fwd.iter().map(|&v| tape.value(v).clone()).collect();
    let hb = out.hidden_bwd.iter().map(|&v| tape.value(v).clone()).collect();
    Ok((actions, hf, hb))
}

/// Plain critic evaluation at concrete action values.
pub fn critic_values(
    params: &ParamSet,
    cfg: &NetConfig,
    obs: &ObsBatch,
    actions: &[Tensor],
) -> Result<Vec<Tensor>, NetError> {
    let mut tape = Tape::new();
    let action_vars: Vec<Var> = actions
        .iter()
        .map(|t| tape.input(t.clone()))
        .collect::<Result<_, _>>()?;
    let out = critic_forward(&mut tape, params, cfg, obs, &action_vars, false)?;
    Ok(out.output_tensors(&tape))
}
