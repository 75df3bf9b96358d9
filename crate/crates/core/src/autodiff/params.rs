use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AdError, Gradients, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
struct Param {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Adaptive-moment optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Ordered, named parameter tensors with gradient and Adam moment slots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    steps: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor and returns its index.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        let zeros = Tensor::zeros(value.shape());
        self.params.push(Param {
            name: name.into(),
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
        });
        self.params.len() - 1
    }

    /// Dense layer weights `[fan_in, fan_out]` and bias, uniform in
    /// `±scale/√fan_in`. Returns (weight, bias) indices.
    pub fn add_dense<R: Rng>(&mut self, prefix: &str, fan_in: usize, fan_out: usize, scale: f64, rng: &mut R) -> (usize, usize) {
        let bound = scale / (fan_in as f64).sqrt();
        let mut sample = |n: usize| (0..n).map(|_| rng.random_range(-bound..bound)).collect::<Vec<_>>();
        let w = Tensor::new(vec![fan_in, fan_out], sample(fan_in * fan_out)).expect("dense shape");
        let b = Tensor::vector(sample(fan_out));
        (self.add(format!("{prefix}.weight"), w), self.add(format!("{prefix}.bias"), b))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, i: usize) -> &Tensor {
        &self.params[i].value
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].value
    }

    pub fn grad(&self, i: usize) -> &Tensor {
        &self.params[i].grad
    }

    pub fn name(&self, i: usize) -> &str {
        &self.params[i].name
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value))
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Optimizer steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Puts every parameter on `tape` as a leaf, in store order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.clone())).collect()
    }

    /// Adds the gradients of `bound` leaves into the gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients, bound: &[Var]) {
        for (p, v) in self.params.iter_mut().zip(bound) {
            if let Some(g) = grads.get(*v) {
                p.grad.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    /// Bias-corrected Adam update from the current gradients. Moments persist
    /// in the store; gradients are left in place.
    pub fn adam_step(&mut self, opt: &Adam) {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - opt.beta1.powi(t);
        let c2 = 1.0 - opt.beta2.powi(t);
        for p in &mut self.params {
            let n = p.value.len();
            let (val, grad, m, v) = (p.value.data_mut(), p.grad.data(), p.m.data_mut(), p.v.data_mut());
            for i in 0..n {
                let g = grad[i];
                m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
                v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                val[i] -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
            }
        }
    }

    /// `self ← τ·online + (1 − τ)·self`, elementwise.
    pub fn soft_update_from(&mut self, online: &ParamStore, tau: f64) -> Result<(), AdError> {
        self.check_same_layout(online)?;
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            t.value.data_mut().iter_mut().zip(o.value.data()).for_each(|(t, o)| *t = tau * o + (1.0 - tau) * *t);
        }
        Ok(())
    }

    /// Copies values (not moments) from a store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<(), AdError> {
        self.soft_update_from(other, 1.0)
    }

    fn check_same_layout(&self, other: &ParamStore) -> Result<(), AdError> {
        if self.params.len() != other.params.len() {
            return Err(AdError::Shape {
                op: "param_store",
                msg: format!("{} tensors vs {}", self.params.len(), other.params.len()),
            });
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.value.shape() != b.value.shape() {
                return Err(AdError::Shape {
                    op: "param_store",
                    msg: format!("{}: {:?} vs {:?}", a.name, a.value.shape(), b.value.shape()),
                });
            }
        }
        Ok(())
    }

    /// Replaces values by name from `(name, tensor)` pairs. Every parameter
    /// must be present with a matching shape.
    pub fn load_values(&mut self, prefix: &str, tensors: &[(String, Tensor)]) -> Result<(), AdError> {
        for p in &mut self.params {
            let key = format!("{prefix}{}", p.name);
            let (_, t) = tensors
                .iter()
                .find(|(n, _)| *n == key)
                .ok_or_else(|| AdError::Checkpoint(format!("missing tensor {key}")))?;
            if t.shape() != p.value.shape() {
                return Err(AdError::Checkpoint(format!(
                    "shape mismatch for tensor {key}: checkpoint {:?}, model {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(())
    }

    /// Squared Euclidean distance between the values of two stores.
    pub fn distance_sq(&self, other: &ParamStore) -> f64 {
        self.params
            .iter()
            .zip(&other.params)
            .flat_map(|(a, b)| a.value.data().iter().zip(b.value.data()))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}
