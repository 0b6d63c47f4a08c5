//! Hand-rolled loss oracles and analytic fixed points for the learner.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfcrl::nn::DenseNet;
use sfcrl::sdcq::{boltzmann, entropy, indices_to_action, Agent, AgentNetworks, Batch, ReplayBuffer, SdcqConfig, Transition};

pub fn tiny_config(bins: usize) -> SdcqConfig {
    SdcqConfig {
        bins,
        hidden: vec![5, 4],
        batch_size: 4,
        buffer_capacity: 64,
        ..SdcqConfig::default()
    }
}

/// Tiny networks with every parameter jittered so no unit sits at a kink.
pub fn tiny_nets(seed: u64, obs: usize, bins: usize) -> AgentNetworks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nets = AgentNetworks::new(obs, &tiny_config(bins), &mut rng).unwrap();
    for net in [&mut nets.discrete, &mut nets.critic, &mut nets.target_critic] {
        for i in 0..net.param_count() {
            net.set_param(i, net.param(i) + rng.random_range(-0.2..0.2));
        }
    }
    nets.kappa = 0.8;
    nets
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, obs: usize) -> Batch {
    let ts: Vec<Transition> = (0..n)
        .map(|_| Transition {
            state: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            reward: rng.random_range(-2.0..2.0),
            next_state: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: rng.random_bool(0.3),
        })
        .collect();
    Batch::from_transitions(&ts)
}

pub fn random_triples(rng: &mut ChaCha8Rng, n: usize, bins: usize) -> Vec<[usize; 3]> {
    (0..n).map(|_| [rng.random_range(0..bins), rng.random_range(0..bins), rng.random_range(0..bins)]).collect()
}

pub fn critic_at(net: &DenseNet, s: &[f64], a: [f64; 3]) -> f64 {
    let mut x = s.to_vec();
    x.extend(a);
    net.forward(&x).unwrap()[0]
}

/// Direct evaluation of the distillation loss: every bin of every
/// dimension against the critic at the companion action with that
/// dimension replaced.
pub fn hand_discrete_loss(nets: &AgentNetworks, states: &Array2<f64>, comp: &[[usize; 3]]) -> f64 {
    let m = nets.bins;
    let mut total = 0.0;
    for (i, row) in states.rows().into_iter().enumerate() {
        let s = row.to_vec();
        let q = nets.discrete.forward(&s).unwrap();
        let base = indices_to_action(comp[i], m);
        for d in 0..3 {
            for k in 0..m {
                let mut a = base;
                a[d] = (2.0 * k as f64 + 1.0) / m as f64 - 1.0;
                let e = q[d * m + k] - critic_at(&nets.critic, &s, a);
                total += e * e;
            }
        }
    }
    total / states.nrows() as f64
}

pub fn hand_critic_loss(nets: &AgentNetworks, b: &Batch, next: &[[usize; 3]], ent: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..b.len() {
        let s = b.states.row(i).to_vec();
        let s2 = b.next_states.row(i).to_vec();
        let a = [b.actions[[i, 0]], b.actions[[i, 1]], b.actions[[i, 2]]];
        let a2 = indices_to_action(next[i], nets.bins);
        let boot = if b.dones[i] > 0.5 { 0.0 } else { critic_at(&nets.target_critic, &s2, a2) + nets.kappa * ent[i] };
        let e = critic_at(&nets.critic, &s, a) - (b.rewards[i] + nets.gamma * boot);
        total += e * e;
    }
    total / b.len() as f64
}

/// Worst relative error between analytic and central-difference
/// gradients over all parameters.
pub fn fd_worst(params: usize, analytic: impl Fn(usize) -> f64, loss_at: impl Fn(usize, f64) -> f64) -> f64 {
    let h = 1e-5;
    (0..params)
        .map(|i| {
            let fd = (loss_at(i, h) - loss_at(i, -h)) / (2.0 * h);
            let an = analytic(i);
            (fd - an).abs() / fd.abs().max(an.abs()).max(1e-5)
        })
        .fold(0.0, f64::max)
}

pub fn fixed_point_config() -> SdcqConfig {
    SdcqConfig {
        bins: 8,
        hidden: vec![32, 32],
        lr: 1e-3,
        batch_size: 64,
        buffer_capacity: 4096,
        discrete_subbatch: 16,
        target_rate: 0.02,
        ..SdcqConfig::default()
    }
}

/// A compact critic with a large batch and step: fits the constant bandit
/// value well inside 1e-2 within 5·10³ updates.
pub fn bandit_config() -> SdcqConfig {
    SdcqConfig {
        hidden: vec![16],
        lr: 3e-3,
        batch_size: 256,
        ..fixed_point_config()
    }
}

fn random_action(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
}

/// Trains on a one-state, one-step bandit with reward 0.7 and returns the
/// worst |Q − r| over every stored action and 20 fresh random ones.
pub fn bandit_error(cfg: SdcqConfig, steps: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let s = vec![0.3, -0.2, 0.5, 0.1];
    let r = 0.7;
    let mut buf = ReplayBuffer::new(4, 4096);
    for _ in 0..2048 {
        let t = Transition { state: s.clone(), action: random_action(&mut rng), reward: r, next_state: s.clone(), done: true };
        buf.push(&t).unwrap();
    }
    let mut agent = Agent::new(4, cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for _ in 0..steps {
        agent.train_step(&buf, &mut rng).unwrap();
    }
    let mut actions: Vec<[f64; 3]> = (0..buf.len()).map(|i| buf.get(i).action).collect();
    actions.extend((0..20).map(|_| random_action(&mut rng)));
    actions.iter().map(|&a| (agent.nets.critic_value(&s, a).unwrap() - r).abs()).fold(0.0, f64::max)
}

/// Worst errors of a trained two-step chain: Q(s1) against the terminal
/// reward 1, and Q(s0) against γ·(1 + κ·H(s1)) using the final κ.
pub fn chain_errors(steps: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let s0 = vec![1.0, 0.0, 0.0, 0.0];
    let s1 = vec![0.0, 1.0, 0.0, 0.0];
    let mut buf = ReplayBuffer::new(4, 4096);
    for i in 0..2048 {
        let action = random_action(&mut rng);
        let t = if i % 2 == 0 {
            Transition { state: s0.clone(), action, reward: 0.0, next_state: s1.clone(), done: false }
        } else {
            Transition { state: s1.clone(), action, reward: 1.0, next_state: s0.clone(), done: true }
        };
        buf.push(&t).unwrap();
    }
    let cfg = SdcqConfig {
        gamma: 0.5,
        initial_kappa: 0.2,
        ..fixed_point_config()
    };
    let mut agent = Agent::new(4, cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    for _ in 0..steps {
        agent.train_step(&buf, &mut rng).unwrap();
    }
    let nets = &agent.nets;
    let h1 = entropy(&boltzmann(&nets.q_values(&s1).unwrap(), nets.kappa, nets.bins));
    let want = 0.5 * (1.0 + nets.kappa * h1);
    let (mut e1, mut e0): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let a = random_action(&mut rng);
        e1 = e1.max((nets.critic_value(&s1, a).unwrap() - 1.0).abs());
        e0 = e0.max((nets.critic_value(&s0, a).unwrap() - want).abs());
    }
    (e1, e0)
}
