//! Prioritized experience replay backed by a sum tree.

use rand::Rng;
use thiserror::Error;

use crate::autodiff::Tensor;

/// Priority floor added to every |δ|.
pub const PRIORITY_EPS: f64 = 1e-6;
pub const DEFAULT_ALPHA: f64 = 0.6;
pub const BETA_START: f64 = 0.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerError {
    #[error("buffer holds {size} transitions, batch needs {batch}")]
    Underflow { size: usize, batch: usize },
    #[error("index {index} out of range for size {size}")]
    Index { index: usize, size: usize },
    #[error("transition shape: {0}")]
    Shape(String),
    #[error("non-finite TD error at index {0}")]
    NonFinite(usize),
}

/// Binary tree of partial sums over `capacity` leaves (a power of two).
///
/// Node `1` is the root; leaves live at `capacity..2*capacity`.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(min_capacity: usize) -> Self {
        let capacity = min_capacity.max(1).next_power_of_two();
        Self { capacity, nodes: vec![0.0; 2 * capacity] }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn leaf(&self, i: usize) -> f64 {
        self.nodes[self.capacity + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut n = self.capacity + i;
        self.nodes[n] = value;
        while n > 1 {
            n /= 2;
            self.nodes[n] = self.nodes[2 * n] + self.nodes[2 * n + 1];
        }
    }

    /// Leaf whose cumulative-sum interval contains `mass`. Never descends
    /// into an empty subtree, so zero leaves are unreachable.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut n = 1;
        while n < self.capacity {
            let (l, r) = (self.nodes[2 * n], self.nodes[2 * n + 1]);
            if r <= 0.0 || (mass < l && l > 0.0) {
                n *= 2;
            } else {
                mass -= l;
                n = 2 * n + 1;
            }
        }
        n - self.capacity
    }

    /// True when every internal node equals the sum of its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.capacity).all(|n| self.nodes[n] == self.nodes[2 * n] + self.nodes[2 * n + 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// Behavior-policy log-density of `action`, for off-policy corrections.
    pub log_prob: f64,
}

/// A sampled minibatch in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Tensor,
    pub next_states: Tensor,
    pub dones: Tensor,
    pub log_probs: Tensor,
    pub weights: Tensor,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Stacks transitions into `[n, dim]` tensors with column vectors for
    /// rewards, dones and weights.
    pub fn from_transitions(indices: Vec<usize>, items: &[&Transition], weights: Vec<f64>) -> Self {
        let n = items.len();
        let stack = |f: &dyn Fn(&Transition) -> &[f64]| {
            let dim = items.first().map_or(0, |t| f(t).len());
            let data = items.iter().flat_map(|t| f(t).iter().copied()).collect();
            Tensor::new(vec![n, dim], data).expect("uniform transition dims")
        };
        let column = |data: Vec<f64>| Tensor::new(vec![n, 1], data).expect("column");
        Self {
            states: stack(&|t| &t.state),
            actions: stack(&|t| &t.action),
            next_states: stack(&|t| &t.next_state),
            rewards: column(items.iter().map(|t| t.reward).collect()),
            dones: column(items.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect()),
            log_probs: column(items.iter().map(|t| t.log_prob).collect()),
            weights: column(weights),
            indices,
        }
    }
}

/// Ring buffer of transitions with optional proportional prioritization.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
    /// `None` for uniform replay.
    tree: Option<SumTree>,
    alpha: f64,
    priorities: Vec<f64>,
    max_priority: f64,
    dims: Option<(usize, usize)>,
}

impl ReplayBuffer {
    pub fn prioritized(capacity: usize, alpha: f64) -> Self {
        Self::build(capacity, Some(SumTree::new(capacity)), alpha)
    }

    pub fn uniform(capacity: usize) -> Self {
        Self::build(capacity, None, 0.0)
    }

    fn build(capacity: usize, tree: Option<SumTree>, alpha: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), cursor: 0, tree, alpha, priorities: Vec::new(), max_priority: 1.0, dims: None }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_prioritized(&self) -> bool {
        self.tree.is_some()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Raw priority `|δ| + ε` of slot `i` (1 in uniform mode).
    pub fn priority(&self, i: usize) -> f64 {
        self.priorities.get(i).copied().unwrap_or(1.0)
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    pub fn tree(&self) -> Option<&SumTree> {
        self.tree.as_ref()
    }

    /// Stores `tr` at max priority, overwriting the oldest item when full.
    pub fn push(&mut self, tr: Transition) -> Result<usize, PerError> {
        let dims = (tr.state.len(), tr.action.len());
        if tr.next_state.len() != dims.0 {
            return Err(PerError::Shape(format!("state {} vs next_state {}", dims.0, tr.next_state.len())));
        }
        match self.dims {
            Some(d) if d != dims => return Err(PerError::Shape(format!("expected (state, action) dims {d:?}, got {dims:?}"))),
            _ => self.dims = Some(dims),
        }
        let slot = self.cursor;
        if slot == self.items.len() {
            self.items.push(tr);
            self.priorities.push(self.max_priority);
        } else {
            self.items[slot] = tr;
            self.priorities[slot] = self.max_priority;
        }
        if let Some(tree) = &mut self.tree {
            tree.set(slot, self.max_priority.powf(self.alpha));
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(slot)
    }

    /// Selection probability of slot `i` under the current priorities.
    pub fn probability(&self, i: usize) -> f64 {
        match &self.tree {
            Some(tree) => tree.leaf(i) / tree.total(),
            None => 1.0 / self.len() as f64,
        }
    }

    /// Draws `batch` transitions. Prioritized mode uses one draw per
    /// equal-mass segment and IS weights `(N·P(i))^-β / max`; uniform mode
    /// samples with replacement and unit weights.
    pub fn sample<R: Rng>(&self, batch: usize, beta: f64, rng: &mut R) -> Result<Batch, PerError> {
        let size = self.len();
        if size < batch || batch == 0 {
            return Err(PerError::Underflow { size, batch });
        }
        let (indices, weights) = match &self.tree {
            None => ((0..batch).map(|_| rng.random_range(0..size)).collect::<Vec<_>>(), vec![1.0; batch]),
            Some(tree) => {
                let seg = tree.total() / batch as f64;
                let indices: Vec<usize> = (0..batch)
                    .map(|k| {
                        let u: f64 = rng.random();
                        tree.find((k as f64 + u) * seg).min(size - 1)
                    })
                    .collect();
                let raw: Vec<f64> = indices.iter().map(|&i| (size as f64 * self.probability(i)).powf(-beta)).collect();
                let max = raw.iter().cloned().fold(f64::MIN, f64::max);
                (indices, raw.iter().map(|w| w / max).collect())
            }
        };
        let items: Vec<&Transition> = indices.iter().map(|&i| &self.items[i]).collect();
        Ok(Batch::from_transitions(indices, &items, weights))
    }

    /// Sets each slot's priority to `|δ| + ε`. No-op in uniform mode.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<(), PerError> {
        if indices.len() != td_errors.len() {
            return Err(PerError::Shape(format!("{} indices vs {} errors", indices.len(), td_errors.len())));
        }
        let Some(tree) = &mut self.tree else { return Ok(()) };
        for (&i, &d) in indices.iter().zip(td_errors) {
            if i >= self.items.len() {
                return Err(PerError::Index { index: i, size: self.items.len() });
            }
            if !d.is_finite() {
                return Err(PerError::NonFinite(i));
            }
            let p = d.abs() + PRIORITY_EPS;
            self.priorities[i] = p;
            self.max_priority = self.max_priority.max(p);
            tree.set(i, p.powf(self.alpha));
        }
        Ok(())
    }
}

/// Linear β schedule from `BETA_START` to 1 over `total` steps.
pub fn beta_at(step: u64, total: u64) -> f64 {
    if total == 0 {
        return 1.0;
    }
    let frac = (step as f64 / total as f64).min(1.0);
    BETA_START + (1.0 - BETA_START) * frac
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn tr(tag: f64) -> Transition {
        Transition { state: vec![tag, 0.0], action: vec![0.0; 3], reward: tag, next_state: vec![tag, 1.0], done: false, log_prob: 0.0 }
    }

    fn filled(n: usize, alpha: f64) -> ReplayBuffer {
        let mut b = ReplayBuffer::prioritized(1 << 10, alpha);
        for i in 0..n {
            b.push(tr(i as f64)).unwrap();
        }
        b
    }

    #[test]
    fn push_uses_max_priority() {
        let mut b = filled(1, 0.6);
        assert_eq!(b.priority(0), 1.0);
        b.update_priorities(&[0], &[5.0 - PRIORITY_EPS]).unwrap();
        let i = b.push(tr(1.0)).unwrap();
        assert!((b.priority(i) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::uniform(4);
        for i in 0..5 {
            b.push(tr(i as f64)).unwrap();
        }
        assert_eq!(b.len(), 4);
        assert_eq!(b.get(0).unwrap().reward, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = b.sample(4, 1.0, &mut rng).unwrap();
        assert!(batch.rewards.data().iter().all(|&r| r >= 1.0));
    }

    #[test]
    fn zero_td_error_floors_priority() {
        let mut b = filled(2, 0.6);
        b.update_priorities(&[1], &[0.0]).unwrap();
        assert_eq!(b.priority(1), PRIORITY_EPS);
        assert!(b.tree().unwrap().leaf(1) > 0.0);
    }

    #[test]
    fn underflow_and_bad_index() {
        let b = filled(3, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(4, 0.4, &mut rng).unwrap_err(), PerError::Underflow { size: 3, batch: 4 });
        let mut b = b;
        assert!(b.update_priorities(&[7], &[1.0]).is_err());
        assert!(b.update_priorities(&[0], &[f64::NAN]).is_err());
    }

    #[test]
    fn mismatched_dims_rejected() {
        let mut b = filled(1, 0.6);
        let mut bad = tr(0.0);
        bad.state.push(1.0);
        bad.next_state.push(1.0);
        assert!(b.push(bad).is_err());
    }

    #[test]
    fn probabilities_match_definition() {
        let mut b = filled(2, 1.0);
        b.update_priorities(&[0, 1], &[2.0 - PRIORITY_EPS, 1.0 - PRIORITY_EPS]).unwrap();
        assert!((b.probability(0) - 2.0 / 3.0).abs() < 1e-12);
        let mut b = filled(2, 0.6);
        b.update_priorities(&[0, 1], &[2.0 - PRIORITY_EPS, 1.0 - PRIORITY_EPS]).unwrap();
        let want = 2f64.powf(0.6) / (2f64.powf(0.6) + 1.0);
        assert!((b.probability(0) - want).abs() < 1e-12);
        assert!((want - 0.6025).abs() < 1e-4);
    }

    #[test]
    fn empirical_frequency_two_items() {
        let mut b = filled(2, 0.6);
        b.update_priorities(&[0, 1], &[2.0 - PRIORITY_EPS, 1.0 - PRIORITY_EPS]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let hits = (0..n).filter(|_| b.sample(1, 0.4, &mut rng).unwrap().indices[0] == 0).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - b.probability(0)).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn weights_are_normalized() {
        let mut b = filled(8, 0.6);
        b.update_priorities(&[0, 1, 2, 3, 4, 5, 6, 7], &[0.1, 3.0, 0.5, 0.0, 2.0, 1.0, 0.7, 9.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = b.sample(6, 0.7, &mut rng).unwrap();
        let w = batch.weights.data();
        assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
        assert_eq!(w.iter().cloned().fold(0.0, f64::max), 1.0);
        let zero_beta = b.sample(6, 0.0, &mut rng).unwrap();
        assert!(zero_beta.weights.data().iter().all(|&x| x == 1.0));
        let uniform = filled(8, 0.6);
        let batch = uniform.sample(8, 0.9, &mut rng).unwrap();
        assert!(batch.weights.data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn batch_layout() {
        let b = filled(4, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = b.sample(3, 0.4, &mut rng).unwrap();
        assert_eq!(batch.states.shape(), &[3, 2]);
        assert_eq!(batch.actions.shape(), &[3, 3]);
        assert_eq!(batch.rewards.shape(), &[3, 1]);
        for (k, &i) in batch.indices.iter().enumerate() {
            assert_eq!(batch.states.row(k)[0], i as f64);
        }
    }

    #[test]
    fn beta_schedule() {
        assert_eq!(beta_at(0, 100), 0.4);
        assert!((beta_at(50, 100) - 0.7).abs() < 1e-12);
        assert_eq!(beta_at(500, 100), 1.0);
    }

    proptest! {
        #[test]
        fn tree_stays_consistent(ops in prop::collection::vec((0usize..40, 0.0f64..50.0, any::<bool>()), 1..200)) {
            let mut b = ReplayBuffer::prioritized(32, 0.6);
            for (i, d, is_push) in ops {
                if is_push || b.is_empty() {
                    b.push(tr(d)).unwrap();
                } else {
                    let idx = i % b.len();
                    b.update_priorities(&[idx], &[d]).unwrap();
                }
                let tree = b.tree().unwrap();
                prop_assert!(tree.is_consistent());
                let leaves: f64 = (0..tree.capacity()).map(|k| tree.leaf(k)).sum();
                prop_assert!((tree.total() - leaves).abs() <= 1e-9 * leaves.max(1e-300));
            }
        }
    }
}
