//! Actor and critic networks as parameter stores plus tape forward passes.

use rand::Rng;

use super::pfam::pfam;
use crate::autodiff::{AdError, ParamStore, Tape, Tensor, Var};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside the squash-correction log.
pub const SQUASH_EPS: f64 = 1e-6;
pub const ACTION_DIM: usize = 3;
/// Init scale of the actor's output heads relative to the hidden layers.
const HEAD_SCALE: f64 = 1e-2;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Squashed-Gaussian policy. Layout: `l1`, `l2`, `mu`, `log_std`, each a
/// weight/bias pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorNet {
    pub params: ParamStore,
    pub obs_dim: usize,
    pub hidden: usize,
    /// PFAM regularizer, `None` when attention is ablated.
    pub attention: Option<f64>,
}

impl ActorNet {
    pub fn new<R: Rng>(obs_dim: usize, hidden: usize, attention: Option<f64>, rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        params.add_dense("l1", obs_dim, hidden, 1.0, rng);
        params.add_dense("l2", hidden, hidden, 1.0, rng);
        params.add_dense("mu", hidden, ACTION_DIM, HEAD_SCALE, rng);
        params.add_dense("log_std", hidden, ACTION_DIM, HEAD_SCALE, rng);
        Self { params, obs_dim, hidden, attention }
    }

    /// `(μ, log σ)` for a `[batch, obs_dim]` state matrix.
    pub fn forward(&self, tape: &mut Tape, p: &[Var], states: Var) -> Result<(Var, Var), AdError> {
        actor_forward(tape, p, states, self.attention)
    }
}

/// Actor body over bound parameters `p` in store order.
pub fn actor_forward(tape: &mut Tape, p: &[Var], states: Var, attention: Option<f64>) -> Result<(Var, Var), AdError> {
    let mut h = states;
    for l in 0..2 {
        let z = tape.affine(h, p[2 * l], p[2 * l + 1]);
        h = tape.relu(z);
        if let Some(omega) = attention {
            h = pfam(tape, h, omega)?;
        }
    }
    let mu = tape.affine(h, p[4], p[5]);
    let raw = tape.affine(h, p[6], p[7]);
    let log_std = tape.clamp(raw, LOG_STD_MIN, LOG_STD_MAX);
    Ok((mu, log_std))
}

/// Reparameterized squashed sample `a = tanh(μ + ε·σ)` and its log-density
/// `Σ [log N(u; μ, σ) − log(1 − a² + 1e-6)]` as a `[batch, 1]` column.
pub fn squash_sample(tape: &mut Tape, mu: Var, log_std: Var, eps: &Tensor) -> (Var, Var) {
    let noise = tape.leaf(eps.clone());
    let std = tape.exp(log_std);
    let jitter = tape.mul(noise, std);
    let u = tape.add(mu, jitter);
    let action = tape.tanh(u);
    let base = tape.leaf(eps.map(|e| -0.5 * e * e - 0.5 * LN_2PI));
    let neg_ls = tape.neg(log_std);
    let gauss = tape.add(base, neg_ls);
    let a2 = tape.square(action);
    let neg_a2 = tape.neg(a2);
    let slack = tape.add_scalar(neg_a2, 1.0 + SQUASH_EPS);
    let corr = tape.log(slack);
    let per_dim = tape.sub(gauss, corr);
    let log_prob = tape.sum_axis(per_dim, 1);
    (action, log_prob)
}

/// Log-density of already-squashed actions under `(μ, log σ)`, per row.
/// Actions are pulled just inside the box before inverting tanh.
pub fn squashed_log_prob(mu: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mu.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let a = a.clamp(-1.0 + 1e-9, 1.0 - 1e-9);
            let u = a.atanh();
            let z = (u - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI - (1.0 - a * a + SQUASH_EPS).ln()
        })
        .sum()
}

/// Q network over `state ‖ action`. Layout: `l1`, `l2`, `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    pub params: ParamStore,
}

impl CriticNet {
    pub fn new<R: Rng>(obs_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        params.add_dense("l1", obs_dim + ACTION_DIM, hidden, 1.0, rng);
        params.add_dense("l2", hidden, hidden, 1.0, rng);
        params.add_dense("out", hidden, 1, 1.0, rng);
        Self { params }
    }
}

/// Critic body over bound parameters; returns a `[batch, 1]` column.
pub fn critic_forward(tape: &mut Tape, p: &[Var], states: Var, actions: Var) -> Var {
    let mut h = tape.concat_cols(states, actions);
    for l in 0..2 {
        let z = tape.affine(h, p[2 * l], p[2 * l + 1]);
        h = tape.relu(z);
    }
    tape.affine(h, p[4], p[5])
}

/// Twin online critics and their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair {
    pub online: [CriticNet; 2],
    pub target: [CriticNet; 2],
}

impl CriticPair {
    pub fn new<R: Rng>(obs_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let online = [CriticNet::new(obs_dim, hidden, rng), CriticNet::new(obs_dim, hidden, rng)];
        let target = online.clone();
        Self { online, target }
    }

    /// Values of both critics (online or target) for fixed inputs.
    pub fn evaluate(&self, use_target: bool, states: &Tensor, actions: &Tensor) -> Result<[Vec<f64>; 2], AdError> {
        let nets = if use_target { &self.target } else { &self.online };
        let eval = |net: &CriticNet| -> Result<Vec<f64>, AdError> {
            let mut tape = Tape::new();
            let p = net.params.bind(&mut tape);
            let s = tape.leaf(states.clone());
            let a = tape.leaf(actions.clone());
            let q = critic_forward(&mut tape, &p, s, a);
            tape.check()?;
            Ok(tape.value(q).data().to_vec())
        };
        Ok([eval(&nets[0])?, eval(&nets[1])?])
    }

    /// `target ← τ·online + (1 − τ)·target` for both critics.
    pub fn soft_update(&mut self, tau: f64) -> Result<(), AdError> {
        for (t, o) in self.target.iter_mut().zip(&self.online) {
            t.params.soft_update_from(&o.params, tau)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::gradcheck::randn;

    #[test]
    fn squash_log_prob_matches_scalar_formula() {
        let mut tape = Tape::new();
        let mu = tape.leaf(Tensor::from_rows(&[&[0.0]]).unwrap());
        let ls = tape.leaf(Tensor::from_rows(&[&[0.0]]).unwrap());
        let eps = Tensor::from_rows(&[&[0.5]]).unwrap();
        let (a, lp) = squash_sample(&mut tape, mu, ls, &eps);
        let want_a = 0.5f64.tanh();
        let want_lp = -0.125 - 0.5 * LN_2PI - (1.0 - want_a * want_a + 1e-6).ln();
        assert_eq!(tape.value(a).item(), want_a);
        assert!((tape.value(lp).item() - want_lp).abs() < 1e-14);
        assert!((tape.value(lp).item() - (-0.8037)).abs() < 1e-4);
        assert!((squashed_log_prob(&[0.0], &[0.0], &[want_a]) - want_lp).abs() < 1e-9);
    }

    #[test]
    fn log_std_is_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut actor = ActorNet::new(4, 8, Some(1e-4), &mut rng);
        *actor.params.value_mut(7) = Tensor::vector(vec![50.0, -50.0, 0.0]);
        let mut tape = Tape::new();
        let p = actor.params.bind(&mut tape);
        let s = tape.leaf(randn(&mut rng, &[2, 4], 1.0));
        let (_, ls) = actor.forward(&mut tape, &p, s).unwrap();
        let v = tape.value(ls);
        assert!(v.data().iter().all(|x| (LOG_STD_MIN..=LOG_STD_MAX).contains(x)));
        assert_eq!(v.row(0)[0], LOG_STD_MAX);
        assert_eq!(v.row(0)[1], LOG_STD_MIN);
    }

    #[test]
    fn targets_start_equal_and_drift_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pair = CriticPair::new(4, 8, &mut rng);
        assert_eq!(pair.online, pair.target);
        for (i, net) in pair.online.iter_mut().enumerate() {
            for k in 0..net.params.len() {
                let v = net.params.value(k).map(|x| x + 1.0 + i as f64);
                *net.params.value_mut(k) = v;
            }
        }
        let d0 = pair.target[0].params.distance_sq(&pair.online[0].params).sqrt();
        let tau = 0.005;
        let k = 40;
        for _ in 0..k {
            pair.soft_update(tau).unwrap();
        }
        let dk = pair.target[0].params.distance_sq(&pair.online[0].params).sqrt();
        let want = d0 * (1.0 - tau).powi(k);
        assert!((dk - want).abs() < 1e-9 * d0, "{dk} vs {want}");
    }
}
