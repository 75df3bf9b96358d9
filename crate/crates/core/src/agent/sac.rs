use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};

use super::nets::{actor_forward, critic_forward, squash_sample, squashed_log_prob, ActorNet, CriticPair, ACTION_DIM};
use super::{AgentConfig, AgentError, VrcMode};
use crate::autodiff::checkpoint::{read_tensors, write_tensors};
use crate::autodiff::gradcheck::randn;
use crate::autodiff::{AdError, Adam, ParamStore, Tape, Tensor};
use crate::per::Batch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// Learned temperature α = exp(log α) with target entropy H₀.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTemp {
    pub log_alpha: ParamStore,
    pub target_entropy: f64,
}

impl EntropyTemp {
    pub fn new(init_alpha: f64, target_entropy: f64) -> Self {
        let mut log_alpha = ParamStore::new();
        log_alpha.add("log_alpha", Tensor::scalar(init_alpha.ln()));
        Self { log_alpha, target_entropy }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.value(0).item().exp()
    }

    /// dJ/d(log α) for `J = mean(−α·log π − α·H₀)`.
    pub fn gradient(&self, mean_log_prob: f64) -> Result<f64, AdError> {
        let mut tape = Tape::new();
        let la = tape.leaf(self.log_alpha.value(0).clone());
        let alpha = tape.exp(la);
        let c = tape.constant(-mean_log_prob - self.target_entropy);
        let j = tape.mul(alpha, c);
        let g = tape.backward(j)?;
        Ok(g.get_or_zeros(la, &[]).item())
    }

    /// One optimizer step on log α.
    pub fn update(&mut self, mean_log_prob: f64, lr: f64) -> Result<(), AdError> {
        let mut tape = Tape::new();
        let bound = self.log_alpha.bind(&mut tape);
        let alpha = tape.exp(bound[0]);
        let c = tape.constant(-mean_log_prob - self.target_entropy);
        let j = tape.mul(alpha, c);
        let g = tape.backward(j)?;
        self.log_alpha.zero_grad();
        self.log_alpha.accumulate(&g, &bound);
        self.log_alpha.adam_step(&Adam { lr, ..Adam::default() });
        Ok(())
    }
}

/// Average-reward estimate r̄ used to center rewards in the Q target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrcState {
    pub rbar: f64,
    pub eta: f64,
}

impl VrcState {
    pub fn new(eta: f64) -> Self {
        Self { rbar: 0.0, eta }
    }

    /// `r̄ ← r̄ + η·lr·mean(ρ·δ)` over signed TD errors.
    pub fn update_td(&mut self, weighted_td: &[f64], lr: f64) {
        if weighted_td.is_empty() {
            return;
        }
        let mean = weighted_td.iter().sum::<f64>() / weighted_td.len() as f64;
        self.rbar += self.eta * lr * mean;
    }

    /// `r̄ ← r̄ + η·(mean(r) − r̄)`.
    pub fn update_running(&mut self, rewards: &[f64]) {
        if rewards.is_empty() {
            return;
        }
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        self.rbar += self.eta * (mean - self.rbar);
    }
}

/// Standard-normal draws for one update: `next` reparameterizes a′ in the
/// critic target, `current` reparameterizes a in the actor loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    pub next: Tensor,
    pub current: Tensor,
}

impl Noise {
    pub fn sample<R: Rng>(batch: usize, rng: &mut R) -> Self {
        let next = randn(rng, &[batch, ACTION_DIM], 1.0);
        let current = randn(rng, &[batch, ACTION_DIM], 1.0);
        Self { next, current }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// α used during this update (before its own step).
    pub alpha: f64,
    /// r̄ used in this update's targets.
    pub rbar: f64,
    /// Per-transition priority signal min(|δ₁|, |δ₂|).
    pub td_abs: Vec<f64>,
    /// Per-transition signed `y − min(Q₁, Q₂)`.
    pub td_signed: Vec<f64>,
    pub targets: Vec<f64>,
    /// −mean log π of the actor-loss samples.
    pub entropy: f64,
}

/// Actor, twin critics with targets, temperature and reward-centering state.
#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent {
    pub cfg: AgentConfig,
    pub obs_dim: usize,
    pub actor: ActorNet,
    pub critics: CriticPair,
    pub temp: EntropyTemp,
    pub vrc: VrcState,
    updates: u64,
}

impl SacAgent {
    pub fn new<R: Rng>(obs_dim: usize, cfg: AgentConfig, rng: &mut R) -> Result<Self, AgentError> {
        cfg.validate()?;
        let attention = cfg.enhancements.pfam.then_some(cfg.pfam_omega);
        let actor = ActorNet::new(obs_dim, cfg.hidden, attention, rng);
        let critics = CriticPair::new(obs_dim, cfg.hidden, rng);
        let temp = EntropyTemp::new(cfg.init_alpha, cfg.target_entropy);
        let vrc = VrcState::new(cfg.vrc_eta);
        Ok(Self { cfg, obs_dim, actor, critics, temp, vrc, updates: 0 })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn alpha(&self) -> f64 {
        self.temp.alpha()
    }

    /// Policy `(μ, log σ)` for a state matrix, values only.
    pub fn policy_stats(&self, states: &Tensor) -> Result<(Tensor, Tensor), AdError> {
        let mut tape = Tape::new();
        let p = self.actor.params.bind(&mut tape);
        let s = tape.leaf(states.clone());
        let (mu, ls) = self.actor.forward(&mut tape, &p, s)?;
        tape.check()?;
        Ok((tape.value(mu).clone(), tape.value(ls).clone()))
    }

    /// Squashed action and its log-density for explicit noise `eps`
    /// (`[batch, 3]`).
    pub fn act_with_noise(&self, states: &Tensor, eps: &Tensor) -> Result<(Tensor, Tensor), AdError> {
        let mut tape = Tape::new();
        let p = self.actor.params.bind(&mut tape);
        let s = tape.leaf(states.clone());
        let (mu, ls) = self.actor.forward(&mut tape, &p, s)?;
        let (a, lp) = squash_sample(&mut tape, mu, ls, eps);
        tape.check()?;
        Ok((tape.value(a).clone(), tape.value(lp).clone()))
    }

    /// One action for one observation. Deterministic mode returns tanh(μ).
    pub fn select_action<R: Rng>(&self, obs: &[f64], mode: ActionMode, rng: &mut R) -> Result<(Vec<f64>, f64), AgentError> {
        if obs.len() != self.obs_dim {
            return Err(AgentError::Config(format!("observation has {} entries, expected {}", obs.len(), self.obs_dim)));
        }
        let eps = match mode {
            ActionMode::Stochastic => randn(rng, &[1, ACTION_DIM], 1.0),
            ActionMode::Deterministic => Tensor::zeros(&[1, ACTION_DIM]),
        };
        let states = Tensor::new(vec![1, self.obs_dim], obs.to_vec())?;
        let (a, lp) = self.act_with_noise(&states, &eps)?;
        Ok((a.into_data(), lp.item()))
    }

    /// Deterministic action tanh(μ) for one observation.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        let mut no_rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        Ok(self.select_action(obs, ActionMode::Deterministic, &mut no_rng)?.0)
    }

    /// Full update with freshly drawn noise.
    pub fn update<R: Rng>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats, AgentError> {
        let noise = Noise::sample(batch.len(), rng);
        self.update_with_noise(batch, &noise)
    }

    /// Critic step, actor step, temperature step, reward-centering step and
    /// soft target update, in that order, using the given noise.
    pub fn update_with_noise(&mut self, batch: &Batch, noise: &Noise) -> Result<UpdateStats, AgentError> {
        let step = self.updates;
        let numeric = |source: AdError| AgentError::Numeric { step, source };
        let alpha = self.temp.alpha();
        let rbar = self.vrc.rbar;

        let (critic_loss, td_abs, td_signed, targets) = self.critic_update(batch, &noise.next, alpha, rbar).map_err(numeric)?;
        let (actor_loss, log_probs, mu, log_std) = self.actor_update(batch, &noise.current, alpha).map_err(numeric)?;
        let mean_lp = log_probs.iter().sum::<f64>() / log_probs.len() as f64;
        self.temp.update(mean_lp, self.cfg.lr_alpha).map_err(numeric)?;

        if self.cfg.enhancements.vrc {
            match self.cfg.vrc_mode {
                VrcMode::TdError => {
                    let weighted: Vec<f64> = if self.cfg.vrc_importance_ratio {
                        (0..batch.len())
                            .map(|i| {
                                let cur = squashed_log_prob(mu.row(i), log_std.row(i), batch.actions.row(i));
                                let rho = (cur - batch.log_probs.data()[i]).exp().clamp(0.0, 2.0);
                                rho * td_signed[i]
                            })
                            .collect()
                    } else {
                        td_signed.clone()
                    };
                    self.vrc.update_td(&weighted, self.cfg.lr_critic);
                }
                VrcMode::RunningAverage => self.vrc.update_running(batch.rewards.data()),
            }
        }

        self.critics.soft_update(self.cfg.tau).map_err(numeric)?;
        for v in [critic_loss, actor_loss, self.vrc.rbar, self.temp.alpha()] {
            if !v.is_finite() {
                return Err(numeric(AdError::NonFinite { op: "update" }));
            }
        }
        self.updates += 1;
        Ok(UpdateStats { critic_loss, actor_loss, alpha, rbar, td_abs, td_signed, targets, entropy: -mean_lp })
    }

    /// Centered soft Bellman targets `(r − r̄) + γ(1 − d)(min Q′ − α log π′)`.
    pub fn targets(&self, batch: &Batch, eps_next: &Tensor, alpha: f64, rbar: f64) -> Result<Vec<f64>, AdError> {
        let (a_next, lp_next) = self.act_with_noise(&batch.next_states, eps_next)?;
        let [q1, q2] = self.critics.evaluate(true, &batch.next_states, &a_next)?;
        let g = self.cfg.gamma;
        Ok((0..batch.len())
            .map(|i| {
                let soft = q1[i].min(q2[i]) - alpha * lp_next.data()[i];
                (batch.rewards.data()[i] - rbar) + g * (1.0 - batch.dones.data()[i]) * soft
            })
            .collect())
    }

    /// Weighted half-squared Bellman error on both critics; one Adam step
    /// each. Returns the loss, min(|δ₁|,|δ₂|), signed `y − min Q` and y.
    fn critic_update(
        &mut self,
        batch: &Batch,
        eps_next: &Tensor,
        alpha: f64,
        rbar: f64,
    ) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>), AdError> {
        let y = self.targets(batch, eps_next, alpha, rbar)?;
        let n = batch.len();
        let y_t = Tensor::new(vec![n, 1], y.clone())?;

        let mut tape = Tape::new();
        let p1 = self.critics.online[0].params.bind(&mut tape);
        let p2 = self.critics.online[1].params.bind(&mut tape);
        let s = tape.leaf(batch.states.clone());
        let a = tape.leaf(batch.actions.clone());
        let yv = tape.leaf(y_t);
        let w = tape.leaf(batch.weights.clone());
        let mut losses = Vec::with_capacity(2);
        let mut qs = Vec::with_capacity(2);
        for p in [&p1, &p2] {
            let q = critic_forward(&mut tape, p, s, a);
            let d = tape.sub(q, yv);
            let sq = tape.square(d);
            let wsq = tape.mul(w, sq);
            let m = tape.mean(wsq);
            losses.push(tape.scale(m, 0.5));
            qs.push(q);
        }
        let loss = tape.add(losses[0], losses[1]);
        tape.check()?;
        let loss_value = tape.value(loss).item();
        let q1 = tape.value(qs[0]).data().to_vec();
        let q2 = tape.value(qs[1]).data().to_vec();
        let grads = tape.backward(loss)?;

        let opt = Adam { lr: self.cfg.lr_critic, ..Adam::default() };
        for (net, p) in self.critics.online.iter_mut().zip([&p1, &p2]) {
            net.params.zero_grad();
            net.params.accumulate(&grads, p);
            net.params.adam_step(&opt);
        }
        let td_abs = (0..n).map(|i| (y[i] - q1[i]).abs().min((y[i] - q2[i]).abs())).collect();
        let td_signed = (0..n).map(|i| y[i] - q1[i].min(q2[i])).collect();
        Ok((loss_value, td_abs, td_signed, y))
    }

    /// `mean(α·log π(a|s) − min Q(s, a))` with reparameterized a; one Adam
    /// step on the actor. Returns the loss, log π per row and the pre-step
    /// `(μ, log σ)`.
    fn actor_update(&mut self, batch: &Batch, eps: &Tensor, alpha: f64) -> Result<(f64, Vec<f64>, Tensor, Tensor), AdError> {
        let mut tape = Tape::new();
        let p = self.actor.params.bind(&mut tape);
        let c1 = self.critics.online[0].params.bind(&mut tape);
        let c2 = self.critics.online[1].params.bind(&mut tape);
        let s = tape.leaf(batch.states.clone());
        let (mu, ls) = actor_forward(&mut tape, &p, s, self.actor.attention)?;
        let (a, lp) = squash_sample(&mut tape, mu, ls, eps);
        let q1 = critic_forward(&mut tape, &c1, s, a);
        let q2 = critic_forward(&mut tape, &c2, s, a);
        let qmin = tape.minimum(q1, q2);
        let alpha_v = tape.constant(alpha);
        let ent = tape.mul(lp, alpha_v);
        let diff = tape.sub(ent, qmin);
        let loss = tape.mean(diff);
        tape.check()?;
        let loss_value = tape.value(loss).item();
        let log_probs = tape.value(lp).data().to_vec();
        let (mu_v, ls_v) = (tape.value(mu).clone(), tape.value(ls).clone());
        let grads = tape.backward(loss)?;
        self.actor.params.zero_grad();
        self.actor.params.accumulate(&grads, &p);
        self.actor.params.adam_step(&Adam { lr: self.cfg.lr_actor, ..Adam::default() });
        Ok((loss_value, log_probs, mu_v, ls_v))
    }

    /// Every learned tensor under a stable name.
    pub fn tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let mut push = |prefix: &str, store: &ParamStore| {
            out.extend(store.iter().map(|(n, t)| (format!("{prefix}{n}"), t.clone())));
        };
        push("actor.", &self.actor.params);
        push("critic1.", &self.critics.online[0].params);
        push("critic2.", &self.critics.online[1].params);
        push("target1.", &self.critics.target[0].params);
        push("target2.", &self.critics.target[1].params);
        push("temp.", &self.temp.log_alpha);
        out.push(("vrc.rbar".into(), Tensor::scalar(self.vrc.rbar)));
        out
    }

    /// Replaces every learned tensor; errors name the first missing or
    /// mismatched tensor.
    pub fn load_tensors(&mut self, tensors: &[(String, Tensor)]) -> Result<(), AdError> {
        self.actor.params.load_values("actor.", tensors)?;
        self.critics.online[0].params.load_values("critic1.", tensors)?;
        self.critics.online[1].params.load_values("critic2.", tensors)?;
        self.critics.target[0].params.load_values("target1.", tensors)?;
        self.critics.target[1].params.load_values("target2.", tensors)?;
        self.temp.log_alpha.load_values("temp.", tensors)?;
        let rbar = tensors
            .iter()
            .find(|(n, _)| n == "vrc.rbar")
            .ok_or_else(|| AdError::Checkpoint("missing tensor vrc.rbar".into()))?;
        self.vrc.rbar = rbar.1.item();
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), AdError> {
        write_tensors(BufWriter::new(File::create(path)?), &self.tensors())
    }

    /// Builds an agent for `cfg` and loads `path` into it.
    pub fn load<R: Rng>(path: &Path, obs_dim: usize, cfg: AgentConfig, rng: &mut R) -> Result<Self, AgentError> {
        let tensors = read_tensors(BufReader::new(File::open(path).map_err(AdError::from)?))?;
        let mut agent = Self::new(obs_dim, cfg, rng)?;
        agent.load_tensors(&tensors)?;
        Ok(agent)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::agent::Enhancements;
    use crate::per::Transition;

    fn cfg(enh: Enhancements) -> AgentConfig {
        AgentConfig { hidden: 8, batch_size: 4, enhancements: enh, ..AgentConfig::default() }
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize, obs: usize, done: bool) -> Batch {
        let items: Vec<Transition> = (0..n)
            .map(|_| Transition {
                state: (0..obs).map(|_| rng.random()).collect(),
                action: (0..3).map(|_| rng.random_range(-0.9..0.9)).collect(),
                reward: rng.random_range(-1.0..1.0),
                next_state: (0..obs).map(|_| rng.random()).collect(),
                done,
                log_prob: -1.0,
            })
            .collect();
        let refs: Vec<&Transition> = items.iter().collect();
        Batch::from_transitions((0..n).collect(), &refs, vec![1.0; n])
    }

    #[test]
    fn deterministic_action_is_tanh_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = SacAgent::new(4, cfg(Enhancements::ALL), &mut rng).unwrap();
        let obs = [0.1, 0.5, 0.9, 0.3];
        let (a, _) = agent.select_action(&obs, ActionMode::Deterministic, &mut rng).unwrap();
        let (mu, _) = agent.policy_stats(&Tensor::new(vec![1, 4], obs.to_vec()).unwrap()).unwrap();
        for (x, m) in a.iter().zip(mu.data()) {
            assert_eq!(*x, m.tanh());
        }
        for _ in 0..200 {
            let (a, lp) = agent.select_action(&obs, ActionMode::Stochastic, &mut rng).unwrap();
            assert!(a.iter().all(|x| x.abs() < 1.0) && lp.is_finite());
        }
        assert!(agent.select_action(&[0.0; 3], ActionMode::Deterministic, &mut rng).is_err());
    }

    #[test]
    fn terminal_target_ignores_next_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let agent = SacAgent::new(4, cfg(Enhancements::ALL), &mut rng).unwrap();
        let b = batch(&mut rng, 4, 4, true);
        let eps = randn(&mut rng, &[4, 3], 1.0);
        let y = agent.targets(&b, &eps, 0.3, 0.25).unwrap();
        for (yi, r) in y.iter().zip(b.rewards.data()) {
            assert_eq!(*yi, r - 0.25);
        }
    }

    #[test]
    fn vrc_disabled_keeps_raw_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agent = SacAgent::new(4, cfg(Enhancements::ablate(&["vrc"]).unwrap()), &mut rng).unwrap();
        let b = batch(&mut rng, 4, 4, false);
        for _ in 0..5 {
            let stats = agent.update(&b, &mut rng).unwrap();
            assert_eq!(stats.rbar, 0.0);
        }
        assert_eq!(agent.vrc.rbar, 0.0);
        let mut on = SacAgent::new(4, cfg(Enhancements::ALL), &mut rng).unwrap();
        on.update(&b, &mut rng).unwrap();
        assert_ne!(on.vrc.rbar, 0.0);
    }

    #[test]
    fn vrc_step_examples() {
        let mut v = VrcState::new(0.1);
        v.update_td(&[0.0, 0.0], 1.0);
        assert_eq!(v.rbar, 0.0);
        v.update_td(&[2.0], 1.0);
        assert!((v.rbar - 0.2).abs() < 1e-15);
        let mut r = VrcState::new(0.5);
        r.update_running(&[2.0, 4.0]);
        assert_eq!(r.rbar, 1.5);
    }

    #[test]
    fn temperature_gradient_signs() {
        let t = EntropyTemp::new(0.5, -3.0);
        assert!((t.gradient(-2.0).unwrap() - 0.5 * 5.0).abs() < 1e-12);
        assert_eq!(t.gradient(3.0).unwrap(), 0.0);
        let mut low = EntropyTemp::new(0.5, -3.0);
        // mean log π = 4: entropy −4 is below H₀ = −3.
        low.update(4.0, 1e-2).unwrap();
        assert!(low.alpha() > 0.5);
        let mut high = EntropyTemp::new(0.5, -3.0);
        high.update(-2.0, 1e-2).unwrap();
        assert!(high.alpha() < 0.5);
    }

    #[test]
    fn update_reports_priorities_and_moves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = SacAgent::new(4, cfg(Enhancements::ALL), &mut rng).unwrap();
        let before = agent.clone();
        let b = batch(&mut rng, 4, 4, false);
        let stats = agent.update(&b, &mut rng).unwrap();
        assert_eq!(stats.td_abs.len(), 4);
        assert!(stats.td_abs.iter().all(|d| *d >= 0.0));
        assert!(agent.actor.params.distance_sq(&before.actor.params) > 0.0);
        assert!(agent.critics.online[0].params.distance_sq(&before.critics.online[0].params) > 0.0);
        assert!(agent.critics.target[0].params.distance_sq(&before.critics.target[0].params) > 0.0);
        assert_eq!(agent.updates(), 1);
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = SacAgent::new(4, cfg(Enhancements::ALL), &mut rng).unwrap();
        agent.vrc.rbar = 0.125;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.lwpt");
        agent.save(&path).unwrap();
        let back = SacAgent::load(&path, 4, cfg(Enhancements::ALL), &mut rng).unwrap();
        assert_eq!(back.tensors(), agent.tensors());
        let err = SacAgent::load(&path, 5, cfg(Enhancements::ALL), &mut rng).unwrap_err();
        assert!(err.to_string().contains("actor.l1.weight"), "{err}");
    }
}
