//! Python bindings: environment, agent, replay buffer and a few formulas.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skyharvest::agent::{self, ActionMode, AgentConfig, Enhancements, SacAgent};
use skyharvest::env::{self as sim, EnvConfig};
use skyharvest::experiment::{greedy_action, ExperimentError, RunConfig};
use skyharvest::models;
use skyharvest::per::{self, Transition};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn experiment_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::Io(m) => PyIOError::new_err(m),
        ExperimentError::Numeric(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn preset(name: &str) -> PyResult<RunConfig> {
    match name {
        "tiny" => Ok(RunConfig::tiny()),
        "paper" => Ok(RunConfig::paper()),
        other => Err(PyValueError::new_err(format!("unknown preset '{other}' (expected tiny or paper)"))),
    }
}

fn run_config(preset_name: &str, config_toml: Option<&str>) -> PyResult<RunConfig> {
    match config_toml {
        Some(text) => RunConfig::from_toml(text).map_err(experiment_err),
        None => preset(preset_name),
    }
}

/// Full TOML text of a preset config.
#[pyfunction]
#[pyo3(signature = (preset = "tiny"))]
fn config_toml(preset: &str) -> PyResult<String> {
    Ok(self::preset(preset)?.to_toml())
}

#[pyfunction]
fn jain_index(volumes: Vec<f64>) -> f64 {
    models::jain_index(&volumes)
}

#[pyfunction]
fn fair_data_term(volumes: Vec<f64>) -> f64 {
    models::fair_data_term(&volumes)
}

/// Parameter-free attention applied to one feature vector.
#[pyfunction]
#[pyo3(signature = (x, omega = agent::pfam::OMEGA))]
fn pfam(x: Vec<f64>, omega: f64) -> Vec<f64> {
    agent::pfam::pfam_reference(&x, omega)
}

/// Trains one seed and returns per-episode metric dicts.
#[pyfunction]
#[pyo3(signature = (seed, episodes = None, preset = "tiny", config_toml = None))]
fn train<'py>(
    py: Python<'py>,
    seed: u64,
    episodes: Option<usize>,
    preset: &str,
    config_toml: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = run_config(preset, config_toml)?;
    let episodes = episodes.unwrap_or(cfg.episodes);
    let out = py
        .detach(|| agent::train(&cfg.env, &cfg.effective_agent(), episodes, seed, &mut |_, _| Ok(())))
        .map_err(|e| experiment_err(e.into()))?;
    out.metrics
        .iter()
        .map(|m| {
            let d = PyDict::new(py);
            d.set_item("episode", m.episode)?;
            d.set_item("return", m.ret)?;
            d.set_item("fair_data_slot_bits", m.fair_data_slot_bits)?;
            d.set_item("fair_data_cum_bits", m.fair_data_cum_bits)?;
            d.set_item("energy_J", m.energy_j)?;
            d.set_item("jain_mean", m.jain_mean)?;
            d.set_item("violations", m.violations)?;
            Ok(d)
        })
        .collect()
}

/// The UAV data-collection environment.
#[pyclass(name = "Environment")]
struct PyEnvironment {
    inner: sim::Environment,
}

#[pymethods]
impl PyEnvironment {
    #[new]
    #[pyo3(signature = (seed = 0, layout_seed = None, preset = "tiny", config_toml = None))]
    fn new(seed: u64, layout_seed: Option<u64>, preset: &str, config_toml: Option<&str>) -> PyResult<Self> {
        let cfg = run_config(preset, config_toml)?.env;
        Ok(Self { inner: make_env(cfg, seed, layout_seed)? })
    }

    /// Restarts the episode and returns the first observation.
    #[pyo3(signature = (seed, layout_seed = None))]
    fn reset(&mut self, seed: u64, layout_seed: Option<u64>) -> PyResult<Vec<f64>> {
        self.inner = make_env(self.inner.config().clone(), seed, layout_seed)?;
        Ok(self.inner.observe())
    }

    /// Steps with a normalized action in [-1, 1]^3. Returns
    /// `(observation, reward, done, info)`.
    fn step<'py>(&mut self, py: Python<'py>, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
        let out = self.inner.step(&action).map_err(value_err)?;
        let info = PyDict::new(py);
        let i = &out.info;
        info.set_item("slot", i.slot)?;
        info.set_item("position", (i.position.x, i.position.y, i.position.z))?;
        info.set_item("p_tx", i.p_tx)?;
        info.set_item("volumes", i.volumes.clone())?;
        info.set_item("slot_bits", i.slot_bits)?;
        info.set_item("jain", i.jain)?;
        info.set_item("fair_data", i.fair_data)?;
        info.set_item("slot_energy", i.slot_energy)?;
        info.set_item("violation", i.violation)?;
        info.set_item("n_eligible", i.n_eligible)?;
        Ok((out.next_state, out.reward, out.done, info))
    }

    fn observe(&self) -> Vec<f64> {
        self.inner.observe()
    }

    /// Greedy baseline action for the current state, normalized.
    fn greedy_action(&self) -> Vec<f64> {
        greedy_action(self.inner.state(), self.inner.config()).to_normalized(self.inner.config()).to_vec()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.config().obs_dim()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn uav_position(&self) -> (f64, f64, f64) {
        let p = self.inner.state().uav_position;
        (p.x, p.y, p.z)
    }

    #[getter]
    fn sensor_positions(&self) -> Vec<(f64, f64)> {
        self.inner.state().sensors.iter().map(|s| (s.position.x, s.position.y)).collect()
    }

    /// Per-sensor `(generated, collected, pending)` bit counts.
    #[getter]
    fn sensor_bits(&self) -> Vec<(u64, u64, u64)> {
        self.inner.state().sensors.iter().map(|s| (s.generated_bits, s.cumulative_collected_bits, s.pending_bits)).collect()
    }

    #[getter]
    fn cum_energy(&self) -> f64 {
        self.inner.state().cum_energy
    }
}

fn make_env(cfg: EnvConfig, seed: u64, layout_seed: Option<u64>) -> PyResult<sim::Environment> {
    match layout_seed {
        Some(l) => sim::Environment::reset_with_layout(cfg, l, seed),
        None => sim::Environment::reset(cfg, seed),
    }
    .map_err(value_err)
}

/// A SAC-PPV agent with freshly initialized networks.
#[pyclass(name = "Agent")]
struct PyAgent {
    inner: SacAgent,
    rng: ChaCha8Rng,
}

fn agent_config(hidden: usize, ablate: Vec<String>) -> PyResult<AgentConfig> {
    let names: Vec<&str> = ablate.iter().map(String::as_str).collect();
    let enhancements = Enhancements::ablate(&names).map_err(value_err)?;
    Ok(AgentConfig { hidden, enhancements, ..AgentConfig::tiny() })
}

#[pymethods]
impl PyAgent {
    #[new]
    #[pyo3(signature = (obs_dim, hidden = 32, seed = 0, ablate = Vec::new()))]
    fn new(obs_dim: usize, hidden: usize, seed: u64, ablate: Vec<String>) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = SacAgent::new(obs_dim, agent_config(hidden, ablate)?, &mut rng).map_err(value_err)?;
        Ok(Self { inner, rng })
    }

    /// Loads a checkpoint written by `save` or by the CLI.
    #[staticmethod]
    #[pyo3(signature = (path, obs_dim, hidden = 32, ablate = Vec::new()))]
    fn load(path: PathBuf, obs_dim: usize, hidden: usize, ablate: Vec<String>) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inner = SacAgent::load(&path, obs_dim, agent_config(hidden, ablate)?, &mut rng).map_err(value_err)?;
        Ok(Self { inner, rng })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// Returns `(action, log_prob)`; deterministic mode uses tanh(μ).
    #[pyo3(signature = (obs, deterministic = true))]
    fn act(&mut self, obs: Vec<f64>, deterministic: bool) -> PyResult<(Vec<f64>, f64)> {
        let mode = if deterministic { ActionMode::Deterministic } else { ActionMode::Stochastic };
        self.inner.select_action(&obs, mode, &mut self.rng).map_err(value_err)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn updates(&self) -> u64 {
        self.inner.updates()
    }

    /// Names of every tensor stored in a checkpoint.
    fn tensor_names(&self) -> Vec<String> {
        self.inner.tensors().into_iter().map(|(n, _)| n).collect()
    }
}

/// Replay memory, prioritized or uniform.
#[pyclass(name = "ReplayBuffer")]
struct PyReplayBuffer {
    inner: per::ReplayBuffer,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyReplayBuffer {
    #[new]
    #[pyo3(signature = (capacity, prioritized = true, alpha = per::DEFAULT_ALPHA, seed = 0))]
    fn new(capacity: usize, prioritized: bool, alpha: f64, seed: u64) -> Self {
        let inner = if prioritized { per::ReplayBuffer::prioritized(capacity, alpha) } else { per::ReplayBuffer::uniform(capacity) };
        Self { inner, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    #[pyo3(signature = (state, action, reward, next_state, done, log_prob = 0.0))]
    fn push(&mut self, state: Vec<f64>, action: Vec<f64>, reward: f64, next_state: Vec<f64>, done: bool, log_prob: f64) -> PyResult<usize> {
        self.inner.push(Transition { state, action, reward, next_state, done, log_prob }).map_err(value_err)
    }

    /// Returns `(indices, importance_weights)`.
    fn sample(&mut self, batch: usize, beta: f64) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let b = self.inner.sample(batch, beta, &mut self.rng).map_err(value_err)?;
        Ok((b.indices, b.weights.data().to_vec()))
    }

    fn update_priorities(&mut self, indices: Vec<usize>, td_errors: Vec<f64>) -> PyResult<()> {
        self.inner.update_priorities(&indices, &td_errors).map_err(value_err)
    }

    fn probability(&self, index: usize) -> f64 {
        self.inner.probability(index)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pymodule]
fn skyharvest_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyAgent>()?;
    m.add_class::<PyReplayBuffer>()?;
    m.add_function(wrap_pyfunction!(config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(jain_index, m)?)?;
    m.add_function(wrap_pyfunction!(fair_data_term, m)?)?;
    m.add_function(wrap_pyfunction!(pfam, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
