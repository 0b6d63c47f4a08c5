//! Soft decomposed-critic Q-learning: a per-dimension discrete Q-network
//! distilled from a continuous critic, with a Boltzmann exploration policy
//! and an adaptive inverse temperature.

use std::io::Read;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Policy;
use crate::nn::{Adam, DenseNet, Gradients, NetError};
use crate::{Error, Result};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("bin {bin} out of range for {bins} bins")]
    BinOutOfRange { bin: usize, bins: usize },
    #[error("replay buffer holds {have} transitions, need {need}")]
    BufferTooSmall { have: usize, need: usize },
    #[error("observation width {got}, expected {expected}")]
    ObservationWidth { expected: usize, got: usize },
    #[error("bad agent checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid agent configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdcqConfig {
    /// Discretization per action dimension.
    pub bins: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lr: f64,
    /// Polyak rate of the target critic.
    pub target_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Observations per batch used for the discrete loss, which evaluates
    /// the critic `3 × bins` times per observation.
    pub discrete_subbatch: usize,
    pub initial_kappa: f64,
    pub kappa_lr: f64,
    pub target_entropy: f64,
    pub kappa_bounds: [f64; 2],
    pub learn_kappa: bool,
}

impl Default for SdcqConfig {
    fn default() -> Self {
        SdcqConfig {
            bins: 60,
            hidden: vec![256, 256],
            gamma: 0.98,
            lr: 1e-3,
            target_rate: 0.005,
            batch_size: 128,
            buffer_capacity: 200_000,
            discrete_subbatch: 8,
            // The entropy bonus κ·H starts near 3·ln(bins) per step; at κ = 1
            // it outweighs progress and success rewards.
            initial_kappa: 0.05,
            kappa_lr: 3e-5,
            target_entropy: 0.0,
            kappa_bounds: [1e-3, 1e3],
            learn_kappa: true,
        }
    }
}

impl SdcqConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::BadConfig(m.to_string()));
        if self.bins < 2 {
            return bad("bins must be >= 2");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.discrete_subbatch == 0 {
            return bad("batch sizes must be positive");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer capacity below batch size");
        }
        let [lo, hi] = self.kappa_bounds;
        if !(lo > 0.0 && hi >= lo && self.initial_kappa >= lo && self.initial_kappa <= hi) {
            return bad("kappa bounds must be positive and contain the initial kappa");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// Continuous value of bin `k` out of `bins`: `(2k + 1) / bins - 1`.
pub fn discrete_to_continuous(k: usize, bins: usize) -> Result<f64, AgentError> {
    if k >= bins {
        return Err(AgentError::BinOutOfRange { bin: k, bins });
    }
    Ok(bin_value(k, bins))
}

// Integer numerator keeps bins `k` and `bins - 1 - k` exact negatives.
fn bin_value(k: usize, bins: usize) -> f64 {
    (2 * k as i64 + 1 - bins as i64) as f64 / bins as f64
}

pub fn indices_to_action(idx: [usize; 3], bins: usize) -> [f64; 3] {
    idx.map(|k| bin_value(k, bins))
}

/// Per-dimension argmax, lowest index on ties.
pub fn greedy_indices(q: &[f64], bins: usize) -> [usize; 3] {
    let mut out = [0usize; 3];
    for (d, slot) in out.iter_mut().enumerate() {
        let row = &q[d * bins..(d + 1) * bins];
        let mut best = 0;
        for k in 1..bins {
            if row[k] > row[best] {
                best = k;
            }
        }
        *slot = best;
    }
    out
}

/// Softmax of `kappa * q` into `out`; returns its Shannon entropy.
pub fn softmax_into(q: &[f64], kappa: f64, out: &mut [f64]) -> f64 {
    let mx = q.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(q) {
        *o = (kappa * (v - mx)).exp();
        sum += *o;
    }
    let log_sum = sum.ln();
    let mut h = 0.0;
    for (o, &v) in out.iter_mut().zip(q) {
        *o /= sum;
        if *o > 0.0 {
            h -= *o * (kappa * (v - mx) - log_sum);
        }
    }
    h
}

/// Per-dimension Boltzmann distributions over `3 × bins` Q-values.
pub fn boltzmann(q: &[f64], kappa: f64, bins: usize) -> [Vec<f64>; 3] {
    std::array::from_fn(|d| {
        let mut p = vec![0.0; bins];
        softmax_into(&q[d * bins..(d + 1) * bins], kappa, &mut p);
        p
    })
}

/// Joint entropy of the factored policy.
pub fn entropy(probs: &[Vec<f64>; 3]) -> f64 {
    probs
        .iter()
        .flat_map(|p| p.iter())
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return k;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1)
}

pub fn sample_indices<R: Rng + ?Sized>(probs: &[Vec<f64>; 3], rng: &mut R) -> [usize; 3] {
    std::array::from_fn(|d| sample_categorical(&probs[d], rng))
}

/// Samples one index triple per row of `q`; returns the triples and the
/// per-row joint entropies.
fn sample_rows<R: Rng + ?Sized>(q: &Array2<f64>, kappa: f64, bins: usize, rng: &mut R) -> (Vec<[usize; 3]>, Vec<f64>) {
    let mut p = vec![0.0; bins];
    let mut idx = Vec::with_capacity(q.nrows());
    let mut ent = Vec::with_capacity(q.nrows());
    for row in q.rows() {
        let row = row.as_slice().expect("standard layout");
        let mut h = 0.0;
        let mut triple = [0usize; 3];
        for d in 0..3 {
            h += softmax_into(&row[d * bins..(d + 1) * bins], kappa, &mut p);
            triple[d] = sample_categorical(&p, rng);
        }
        idx.push(triple);
        ent.push(h);
    }
    (idx, ent)
}

fn row_entropies(q: &Array2<f64>, kappa: f64, bins: usize) -> Vec<f64> {
    let mut p = vec![0.0; bins];
    q.rows()
        .into_iter()
        .map(|row| {
            let row = row.as_slice().expect("standard layout");
            (0..3)
                .map(|d| softmax_into(&row[d * bins..(d + 1) * bins], kappa, &mut p))
                .sum()
        })
        .collect()
}

/// `log κ ← log κ − lr · κ · (target − H̄)`, clamped to `bounds`.
pub fn temperature_update(kappa: f64, mean_entropy: f64, target: f64, lr: f64, bounds: [f64; 2]) -> f64 {
    let log_k = kappa.ln() - lr * kappa * (target - mean_entropy);
    log_k.exp().clamp(bounds[0], bounds[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentNetworks {
    pub discrete: DenseNet,
    pub critic: DenseNet,
    pub target_critic: DenseNet,
    /// Inverse temperature of the Boltzmann policy, also the entropy-bonus
    /// weight in the critic target.
    pub kappa: f64,
    pub bins: usize,
    pub gamma: f64,
}

impl AgentNetworks {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, cfg: &SdcqConfig, rng: &mut R) -> Result<Self, AgentError> {
        cfg.validate()?;
        let widths = |i: usize, o: usize| {
            let mut w = vec![i];
            w.extend(&cfg.hidden);
            w.push(o);
            w
        };
        let net_err = |e: NetError| AgentError::BadConfig(e.to_string());
        let discrete = DenseNet::new(&widths(obs_dim, 3 * cfg.bins), rng).map_err(net_err)?;
        let critic = DenseNet::new(&widths(obs_dim + 3, 1), rng).map_err(net_err)?;
        Ok(AgentNetworks {
            target_critic: critic.clone(),
            discrete,
            critic,
            kappa: cfg.initial_kappa,
            bins: cfg.bins,
            gamma: cfg.gamma,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.discrete.input_dim()
    }

    fn check_obs(&self, width: usize) -> Result<(), AgentError> {
        if width != self.obs_dim() {
            return Err(AgentError::ObservationWidth {
                expected: self.obs_dim(),
                got: width,
            });
        }
        Ok(())
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_obs(obs.len())?;
        Ok(self.discrete.forward(obs).expect("width checked"))
    }

    pub fn greedy_action(&self, obs: &[f64]) -> Result<[f64; 3], AgentError> {
        let q = self.q_values(obs)?;
        Ok(indices_to_action(greedy_indices(&q, self.bins), self.bins))
    }

    pub fn greedy_actions(&self, obs: ArrayView2<f64>) -> Vec<[f64; 3]> {
        let q = self.discrete.forward_batch(obs);
        q.rows()
            .into_iter()
            .map(|r| indices_to_action(greedy_indices(r.as_slice().expect("layout"), self.bins), self.bins))
            .collect()
    }

    pub fn boltzmann_actions<R: Rng + ?Sized>(&self, obs: ArrayView2<f64>, rng: &mut R) -> Vec<[f64; 3]> {
        let q = self.discrete.forward_batch(obs);
        let (idx, _) = sample_rows(&q, self.kappa, self.bins, rng);
        idx.into_iter().map(|i| indices_to_action(i, self.bins)).collect()
    }

    pub fn critic_value(&self, obs: &[f64], action: [f64; 3]) -> Result<f64, AgentError> {
        self.check_obs(obs.len())?;
        let mut x = obs.to_vec();
        x.extend(action);
        Ok(self.critic.forward(&x).expect("width checked")[0])
    }

    pub fn to_bytes(&self, updates: u64) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"SDCQ");
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.bins as u32).to_le_bytes());
        out.extend_from_slice(&updates.to_le_bytes());
        out.extend_from_slice(&self.kappa.to_le_bytes());
        out.extend_from_slice(&self.gamma.to_le_bytes());
        for n in [&self.discrete, &self.critic, &self.target_critic] {
            out.extend(n.to_bytes());
        }
        out
    }

    /// Returns the networks and the stored update count.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, u64), AgentError> {
        let bad = |m: String| AgentError::Checkpoint(m);
        let mut r = bytes;
        let mut head = [0u8; 36];
        r.read_exact(&mut head).map_err(|_| bad("truncated header".into()))?;
        if &head[..4] != b"SDCQ" {
            return Err(bad("missing magic".into()));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != 1 {
            return Err(bad(format!("unsupported version {version}")));
        }
        let bins = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
        let updates = u64::from_le_bytes(head[12..20].try_into().expect("8 bytes"));
        let kappa = f64::from_le_bytes(head[20..28].try_into().expect("8 bytes"));
        let gamma = f64::from_le_bytes(head[28..36].try_into().expect("8 bytes"));
        let net = |r: &mut &[u8]| DenseNet::read_from(r).map_err(|e| bad(e.to_string()));
        let discrete = net(&mut r)?;
        let critic = net(&mut r)?;
        let target_critic = net(&mut r)?;
        if !r.is_empty() {
            return Err(bad("trailing bytes".into()));
        }
        if discrete.output_dim() != 3 * bins
            || critic.input_dim() != discrete.input_dim() + 3
            || target_critic.widths() != critic.widths()
            || critic.output_dim() != 1
        {
            return Err(bad("network shapes are inconsistent".into()));
        }
        let nets = AgentNetworks {
            discrete,
            critic,
            target_critic,
            kappa,
            bins,
            gamma,
        };
        Ok((nets, updates))
    }

    pub fn save(&self, path: &Path, updates: u64) -> Result<()> {
        std::fs::write(path, self.to_bytes(updates)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, u64)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Greedy execution policy over borrowed networks.
pub struct GreedyPolicy<'a>(pub &'a AgentNetworks);

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, obs: &[f64]) -> [f64; 3] {
        self.0.greedy_action(obs).expect("observation width matches the agent")
    }
}

/// Boltzmann exploration policy with its own RNG.
pub struct BoltzmannPolicy<'a, R: Rng> {
    pub nets: &'a AgentNetworks,
    pub rng: R,
}

impl<R: Rng> Policy for BoltzmannPolicy<'_, R> {
    fn act(&mut self, obs: &[f64]) -> [f64; 3] {
        let q = self.nets.q_values(obs).expect("observation width matches the agent");
        let p = boltzmann(&q, self.nets.kappa, self.nets.bins);
        indices_to_action(sample_indices(&p, &mut self.rng), self.nets.bins)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; 3],
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Minibatch in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Self {
        let d = ts[0].state.len();
        let n = ts.len();
        Batch {
            states: Array2::from_shape_fn((n, d), |(i, j)| ts[i].state[j]),
            actions: Array2::from_shape_fn((n, 3), |(i, j)| ts[i].action[j]),
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_states: Array2::from_shape_fn((n, d), |(i, j)| ts[i].next_state[j]),
            dones: ts.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    obs_dim: usize,
    capacity: usize,
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<[f64; 3]>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    len: usize,
    cursor: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(obs_dim: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ReplayBuffer {
            obs_dim,
            capacity,
            states: Vec::new(),
            next_states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            len: 0,
            cursor: 0,
            inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: &Transition) -> Result<(), AgentError> {
        for w in [t.state.len(), t.next_state.len()] {
            if w != self.obs_dim {
                return Err(AgentError::ObservationWidth {
                    expected: self.obs_dim,
                    got: w,
                });
            }
        }
        let d = self.obs_dim;
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.next_states.extend_from_slice(&t.next_state);
            self.actions.push(t.action);
            self.rewards.push(t.reward);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let i = self.cursor;
            self.states[i * d..(i + 1) * d].copy_from_slice(&t.state);
            self.next_states[i * d..(i + 1) * d].copy_from_slice(&t.next_state);
            self.actions[i] = t.action;
            self.rewards[i] = t.reward;
            self.dones[i] = t.done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.inserted += 1;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Transition {
        let d = self.obs_dim;
        Transition {
            state: self.states[i * d..(i + 1) * d].to_vec(),
            action: self.actions[i],
            reward: self.rewards[i],
            next_state: self.next_states[i * d..(i + 1) * d].to_vec(),
            done: self.dones[i],
        }
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>, AgentError> {
        if self.len < n || self.len == 0 {
            return Err(AgentError::BufferTooSmall { have: self.len, need: n });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let d = self.obs_dim;
        let n = idx.len();
        let mut states = Array2::zeros((n, d));
        let mut next_states = Array2::zeros((n, d));
        for (r, &i) in idx.iter().enumerate() {
            states
                .row_mut(r)
                .as_slice_mut()
                .expect("layout")
                .copy_from_slice(&self.states[i * d..(i + 1) * d]);
            next_states
                .row_mut(r)
                .as_slice_mut()
                .expect("layout")
                .copy_from_slice(&self.next_states[i * d..(i + 1) * d]);
        }
        Batch {
            states,
            actions: Array2::from_shape_fn((n, 3), |(r, j)| self.actions[idx[r]][j]),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_states,
            dones: idx.iter().map(|&i| if self.dones[i] { 1.0 } else { 0.0 }).collect(),
        }
    }
}

fn concat_actions<'a>(states: ArrayView2<'a, f64>, actions: ArrayView2<'a, f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[states, actions]).expect("same row count")
}

#[derive(Debug, Clone)]
pub struct CriticLoss {
    pub loss: f64,
    pub grads: Gradients,
    /// Mean Boltzmann entropy at the successor states.
    pub next_entropy: f64,
    pub mean_q: f64,
}

/// TD loss with explicit successor actions (bin triples).
pub fn critic_loss_with(nets: &AgentNetworks, batch: &Batch, next_idx: &[[usize; 3]], next_entropy: &[f64]) -> CriticLoss {
    let n = batch.len();
    let next_actions = Array2::from_shape_fn((n, 3), |(i, j)| bin_value(next_idx[i][j], nets.bins));
    let next_in = concat_actions(batch.next_states.view(), next_actions.view());
    let q_next = nets.target_critic.forward_batch(next_in.view());
    let input = concat_actions(batch.states.view(), batch.actions.view());
    let cache = nets.critic.forward_cached(input.view());
    let q = cache.output();
    let mut dq = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        let boot = q_next[[i, 0]] + nets.kappa * next_entropy[i];
        let y = batch.rewards[i] + nets.gamma * (1.0 - batch.dones[i]) * boot;
        let e = q[[i, 0]] - y;
        loss += e * e;
        dq[[i, 0]] = 2.0 * e / n as f64;
    }
    let (grads, _) = nets.critic.backward(&cache, dq.view()).expect("shapes match");
    CriticLoss {
        loss: loss / n as f64,
        grads,
        next_entropy: next_entropy.iter().sum::<f64>() / n as f64,
        mean_q: q.mean().unwrap_or(0.0),
    }
}

pub fn critic_loss<R: Rng + ?Sized>(nets: &AgentNetworks, batch: &Batch, rng: &mut R) -> CriticLoss {
    let qd = nets.discrete.forward_batch(batch.next_states.view());
    let (idx, ent) = sample_rows(&qd, nets.kappa, nets.bins, rng);
    critic_loss_with(nets, batch, &idx, &ent)
}

#[derive(Debug, Clone)]
pub struct DiscreteLoss {
    pub loss: f64,
    pub grads: Gradients,
    /// Mean Boltzmann entropy at the batch states.
    pub entropy: f64,
}

/// Critic values for every single-dimension substitution of `companions`:
/// row `i`, column `d * bins + k` holds `Q_c(s_i, c_i with dim d := bin k)`.
pub fn substituted_critic_values(nets: &AgentNetworks, states: ArrayView2<f64>, companions: &[[usize; 3]]) -> Array2<f64> {
    let m = nets.bins;
    let n = states.nrows();
    let obs = states.ncols();
    let first = &nets.critic.layers()[0];
    let w_s = first.weight.slice(s![..obs, ..]);
    let w_a = first.weight.slice(s![obs.., ..]);
    let mut base = states.dot(&w_s);
    base += &first.bias;
    let hidden = base.ncols();
    let mut z = Array2::zeros((n * 3 * m, hidden));
    for i in 0..n {
        let c = indices_to_action(companions[i], m);
        let mut zc = base.row(i).to_owned();
        for j in 0..3 {
            zc.scaled_add(c[j], &w_a.row(j));
        }
        for d in 0..3 {
            for k in 0..m {
                let mut row = z.row_mut((i * 3 + d) * m + k);
                row.assign(&zc);
                row.scaled_add(bin_value(k, m) - c[d], &w_a.row(d));
            }
        }
    }
    let q = nets.critic.forward_from_preactivation(0, z);
    q.into_shape_with_order((n, 3 * m)).expect("row-major")
}

/// Distillation loss with explicit companion samples.
pub fn discrete_loss_with(nets: &AgentNetworks, states: ArrayView2<f64>, companions: &[[usize; 3]]) -> DiscreteLoss {
    let n = states.nrows();
    let targets = substituted_critic_values(nets, states, companions);
    let cache = nets.discrete.forward_cached(states);
    let q = cache.output();
    let diff = q - &targets;
    let loss = diff.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let dq = diff.mapv(|e| 2.0 * e / n as f64);
    let entropy = row_entropies(q, nets.kappa, nets.bins).iter().sum::<f64>() / n as f64;
    let (grads, _) = nets.discrete.backward(&cache, dq.view()).expect("shapes match");
    DiscreteLoss { loss, grads, entropy }
}

pub fn discrete_loss<R: Rng + ?Sized>(nets: &AgentNetworks, states: ArrayView2<f64>, rng: &mut R) -> DiscreteLoss {
    let q = nets.discrete.forward_batch(states);
    let (idx, _) = sample_rows(&q, nets.kappa, nets.bins, rng);
    discrete_loss_with(nets, states, &idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainDiagnostics {
    pub critic_loss: f64,
    pub discrete_loss: f64,
    pub kappa: f64,
    pub entropy: f64,
    pub mean_q: f64,
}

/// Networks plus optimizer state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub nets: AgentNetworks,
    pub cfg: SdcqConfig,
    discrete_opt: Adam,
    critic_opt: Adam,
    pub updates: u64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, cfg: SdcqConfig, rng: &mut R) -> Result<Self, AgentError> {
        let nets = AgentNetworks::new(obs_dim, &cfg, rng)?;
        Ok(Self::from_networks(nets, cfg))
    }

    pub fn from_networks(nets: AgentNetworks, cfg: SdcqConfig) -> Self {
        Agent {
            discrete_opt: Adam::new(&nets.discrete, cfg.lr),
            critic_opt: Adam::new(&nets.critic, cfg.lr),
            nets,
            cfg,
            updates: 0,
        }
    }

    /// One update of both networks from an explicit batch.
    pub fn update_on<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> TrainDiagnostics {
        let c = critic_loss(&self.nets, batch, rng);
        let sub = self.cfg.discrete_subbatch.min(batch.len());
        let d = discrete_loss(&self.nets, batch.states.slice(s![..sub, ..]), rng);
        self.critic_opt
            .step(&mut self.nets.critic, &c.grads)
            .expect("gradient shapes match");
        self.discrete_opt
            .step(&mut self.nets.discrete, &d.grads)
            .expect("gradient shapes match");
        let (critic, target) = (&self.nets.critic, &mut self.nets.target_critic);
        target.polyak_from(critic, self.cfg.target_rate);
        if self.cfg.learn_kappa {
            self.nets.kappa = temperature_update(
                self.nets.kappa,
                c.next_entropy,
                self.cfg.target_entropy,
                self.cfg.kappa_lr,
                self.cfg.kappa_bounds,
            );
        }
        self.updates += 1;
        TrainDiagnostics {
            critic_loss: c.loss,
            discrete_loss: d.loss,
            kappa: self.nets.kappa,
            entropy: c.next_entropy,
            mean_q: c.mean_q,
        }
    }

    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<TrainDiagnostics, AgentError> {
        let idx = buffer.sample_indices(self.cfg.batch_size, rng)?;
        let batch = buffer.gather(&idx);
        Ok(self.update_on(&batch, rng))
    }
}
