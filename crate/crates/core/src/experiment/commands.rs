//! The four user-facing commands and the run-directory layout they share:
//!
//! ```text
//! <out>/config.toml      materialized config echo
//! <out>/manifest.json    hash, seeds, code version
//! <out>/summary.json     evaluation summary over all seeds
//! <out>/seed_<s>/        metrics.csv, timing.csv, eval.csv, trajectory.csv,
//!                        sensors.csv, final.ckpt, checkpoints/ep_<k>.ckpt
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{rollout, Policy, TrajRow};
use super::plot;
use super::records::*;
use super::{Algorithm, ExperimentError, RunConfig, CODE_VERSION};
use crate::agent::{episode_seeds, train, AgentError, EpisodeMetrics, SacAgent};
use crate::env::Environment;

pub const MANIFEST_SCHEMA: &str = "skyharvest.manifest/v1";
pub const SUMMARY_SCHEMA: &str = "skyharvest.summary/v1";

const TRAIN_POLICY_STREAM: u64 = 3;
const EVAL_POLICY_STREAM: u64 = 4;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Replace an existing run directory.
    pub force: bool,
    /// Print progress to stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub code_version: String,
    pub config_hash: String,
    pub label: String,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub eval_episodes: usize,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self, ExperimentError> {
        let path = run_dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(ExperimentError::Config(format!("{}: unsupported schema {}", path.display(), m.schema)));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub return_mean: f64,
    pub return_std: f64,
    pub fair_data_mean: f64,
    pub fair_data_std: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
}

/// Evaluation result across seeds. `fair_data` is the slot-scope metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub schema: String,
    pub label: String,
    pub config_hash: String,
    pub per_seed: Vec<SeedSummary>,
    pub return_mean: f64,
    pub return_std: f64,
    pub fair_data_mean: f64,
    pub fair_data_std: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
}

impl EvalSummary {
    fn from_records(label: String, config_hash: String, per_seed: Vec<SeedSummary>, all: &[EpisodeMetrics]) -> Self {
        let (return_mean, return_std) = mean_std(all.iter().map(|m| m.ret));
        let (fair_data_mean, fair_data_std) = mean_std(all.iter().map(|m| m.fair_data_slot_bits));
        let (energy_mean, energy_std) = mean_std(all.iter().map(|m| m.energy_j));
        Self {
            schema: SUMMARY_SCHEMA.into(),
            label,
            config_hash,
            per_seed,
            return_mean,
            return_std,
            fair_data_mean,
            fair_data_std,
            energy_mean,
            energy_std,
        }
    }

    /// One-line human summary.
    pub fn display(&self) -> String {
        format!(
            "{}: return {:.4} ± {:.4}, fair data {:.4e} ± {:.4e} bits, energy {:.2} ± {:.2} J",
            self.label, self.return_mean, self.return_std, self.fair_data_mean, self.fair_data_std, self.energy_mean, self.energy_std
        )
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
    }
}

/// Population mean and standard deviation.
fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_sensors: usize,
    pub seed: u64,
    pub algorithm: String,
    pub reward: f64,
    pub fair_data: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Mean fair data per sensor count, ascending in count.
    pub means: Vec<(usize, f64)>,
    /// Whether `means` is nondecreasing. Reported, never enforced.
    pub nondecreasing: bool,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Dynamics seeds for the evaluation episodes of `seed`.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = stream_rng(seed, 2);
    (0..episodes).map(|_| rand::Rng::random(&mut rng)).collect()
}

fn policy_for<'a>(algorithm: Algorithm, agent: Option<&'a SacAgent>, seed: u64, stream: u64) -> Result<Policy<'a>, ExperimentError> {
    Ok(match algorithm {
        Algorithm::Random => Policy::Random(stream_rng(seed, stream)),
        Algorithm::Greedy => Policy::Greedy,
        Algorithm::Sacppv | Algorithm::Sac => {
            Policy::Actor(agent.ok_or_else(|| ExperimentError::Usage("learned algorithm needs a trained agent".into()))?)
        }
    })
}

/// Deterministic evaluation of one seed: the layout comes from `seed`,
/// episode dynamics from [`eval_seeds`]. Returns the summary, per-episode
/// records and the trajectory of the first episode.
pub fn evaluate_seed(
    cfg: &RunConfig,
    seed: u64,
    agent: Option<&SacAgent>,
) -> Result<(SeedSummary, Vec<EpisodeMetrics>, Vec<TrajRow>), ExperimentError> {
    let mut policy = policy_for(cfg.algorithm, agent, seed, EVAL_POLICY_STREAM)?;
    let mut records = Vec::with_capacity(cfg.eval_episodes);
    let mut trajectory = Vec::new();
    for (i, ep_seed) in eval_seeds(seed, cfg.eval_episodes).into_iter().enumerate() {
        let env = Environment::reset_with_layout(cfg.env.clone(), seed, ep_seed)?;
        let (m, traj) = rollout(env, &mut policy, i, i == 0)?;
        if let Some(t) = traj {
            trajectory = t;
        }
        records.push(m);
    }
    let (return_mean, return_std) = mean_std(records.iter().map(|m| m.ret));
    let (fair_data_mean, fair_data_std) = mean_std(records.iter().map(|m| m.fair_data_slot_bits));
    let (energy_mean, energy_std) = mean_std(records.iter().map(|m| m.energy_j));
    let summary =
        SeedSummary { seed, episodes: records.len(), return_mean, return_std, fair_data_mean, fair_data_std, energy_mean, energy_std };
    Ok((summary, records, trajectory))
}

fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    write_text(path, &text)
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|e| ExperimentError::io(path, e))
}

fn prepare_run_dir(out: &Path, force: bool) -> Result<(), ExperimentError> {
    if out.exists() {
        let occupied = fs::read_dir(out).map_err(|e| ExperimentError::io(out, e))?.next().is_some();
        if occupied && !force {
            return Err(ExperimentError::Usage(format!("{} already exists; pass --force to overwrite it", out.display())));
        }
        fs::remove_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    }
    create_dir(out)
}

fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed_{seed}"))
}

fn metric_rows(records: &[EpisodeMetrics]) -> Vec<MetricsRow> {
    records.iter().map(MetricsRow::from).collect()
}

fn write_eval_outputs(dir: &Path, cfg: &RunConfig, seed: u64, records: &[EpisodeMetrics], traj: &[TrajRow]) -> Result<(), ExperimentError> {
    let rows: Vec<EvalRow> = records.iter().map(|m| EvalRow::new(seed, &m.into())).collect();
    write_csv(&dir.join("eval.csv"), EVAL_SCHEMA, EVAL_COLUMNS, &rows)?;
    write_csv(&dir.join("trajectory.csv"), TRAJECTORY_SCHEMA, TRAJECTORY_COLUMNS, traj)?;
    let env = Environment::reset_with_layout(cfg.env.clone(), seed, 0)?;
    let sensors: Vec<SensorRow> =
        env.state().sensors.iter().enumerate().map(|(id, s)| SensorRow { id, x_m: s.position.x, y_m: s.position.y }).collect();
    write_csv(&dir.join("sensors.csv"), SENSORS_SCHEMA, SENSORS_COLUMNS, &sensors)
}

/// Trains (or, for baselines, just plays) one seed and returns its agent
/// and per-episode records. Checkpoints go to `dir` when given.
fn run_seed(cfg: &RunConfig, seed: u64, dir: Option<&Path>, verbose: bool) -> Result<(Option<SacAgent>, Vec<EpisodeMetrics>), ExperimentError> {
    let label = cfg.label();
    let report = |m: &EpisodeMetrics| {
        if verbose && (m.episode + 1) % 25 == 0 {
            eprintln!("[{label} seed {seed}] episode {} return {:.4} violations {}", m.episode + 1, m.ret, m.violations);
        }
    };
    if !cfg.algorithm.is_learned() {
        let mut policy = policy_for(cfg.algorithm, None, seed, TRAIN_POLICY_STREAM)?;
        let mut records = Vec::with_capacity(cfg.episodes);
        for (i, ep_seed) in episode_seeds(seed, cfg.episodes).into_iter().enumerate() {
            let started = std::time::Instant::now();
            let env = Environment::reset_with_layout(cfg.env.clone(), seed, ep_seed)?;
            let (mut m, _) = rollout(env, &mut policy, i, false)?;
            m.wall_time_s = started.elapsed().as_secs_f64();
            report(&m);
            records.push(m);
        }
        return Ok((None, records));
    }
    let ckpt_dir = dir.map(|d| d.join("checkpoints"));
    if let Some(c) = &ckpt_dir {
        create_dir(c)?;
    }
    let every = cfg.checkpoint_every;
    let mut on_episode = |m: &EpisodeMetrics, agent: &SacAgent| -> Result<(), AgentError> {
        report(m);
        if let (Some(c), true) = (&ckpt_dir, every > 0 && (m.episode + 1) % every.max(1) == 0) {
            agent.save(&c.join(format!("ep_{:06}.ckpt", m.episode + 1)))?;
        }
        Ok(())
    };
    let out = train(&cfg.env, &cfg.effective_agent(), cfg.episodes, seed, &mut on_episode)?;
    if let Some(d) = dir {
        out.agent.save(&d.join("final.ckpt")).map_err(AgentError::from)?;
    }
    Ok((Some(out.agent), out.metrics))
}

/// Trains every seed of `cfg` into `cfg.out_dir` and evaluates the result.
pub fn cmd_train(cfg: &RunConfig, opts: &TrainOptions) -> Result<PathBuf, ExperimentError> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.out_dir);
    prepare_run_dir(&out, opts.force)?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        code_version: CODE_VERSION.into(),
        config_hash: cfg.hash(),
        label: cfg.label(),
        algorithm: cfg.algorithm,
        seeds: cfg.seeds.clone(),
        episodes: cfg.episodes,
        eval_episodes: cfg.eval_episodes,
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    let mut per_seed = Vec::new();
    let mut all = Vec::new();
    for &seed in &cfg.seeds {
        let dir = seed_dir(&out, seed);
        create_dir(&dir)?;
        let (agent, records) = run_seed(cfg, seed, Some(&dir), opts.verbose)?;
        write_csv(&dir.join("metrics.csv"), METRICS_SCHEMA, METRICS_COLUMNS, &metric_rows(&records))?;
        let timing: Vec<TimingRow> = records.iter().map(|m| TimingRow { episode: m.episode, wall_time_s: m.wall_time_s }).collect();
        write_csv(&dir.join("timing.csv"), TIMING_SCHEMA, TIMING_COLUMNS, &timing)?;
        let (summary, evals, traj) = evaluate_seed(cfg, seed, agent.as_ref())?;
        write_eval_outputs(&dir, cfg, seed, &evals, &traj)?;
        per_seed.push(summary);
        all.extend(evals);
    }
    let summary = EvalSummary::from_records(cfg.label(), manifest.config_hash, per_seed, &all);
    write_json(&out.join("summary.json"), &summary)?;
    if opts.verbose {
        eprintln!("{}", summary.display());
    }
    Ok(out)
}

/// What to evaluate.
#[derive(Debug, Clone)]
pub enum EvalSource {
    /// A run directory written by [`cmd_train`]; uses its config, seeds and
    /// final checkpoints.
    Run(PathBuf),
    /// One checkpoint (ignored for baselines) evaluated under `config`.
    Checkpoint { checkpoint: Option<PathBuf>, config: Box<RunConfig> },
}

/// Deterministic evaluation. `episodes` and `seeds` override the source's
/// values; per-episode CSVs and the summary are written to `out` if given.
pub fn cmd_eval(source: &EvalSource, episodes: Option<usize>, seeds: Option<Vec<u64>>, out: Option<&Path>) -> Result<EvalSummary, ExperimentError> {
    let (mut cfg, checkpoint_for): (RunConfig, Box<dyn Fn(u64) -> Option<PathBuf>>) = match source {
        EvalSource::Run(dir) => {
            let manifest = Manifest::load(dir)?;
            let mut cfg = RunConfig::load(&dir.join("config.toml"))?;
            if cfg.hash() != manifest.config_hash {
                return Err(ExperimentError::Config(format!("{}: config.toml does not match the manifest hash", dir.display())));
            }
            cfg.seeds = manifest.seeds;
            let dir = dir.clone();
            (cfg, Box::new(move |s| Some(seed_dir(&dir, s).join("final.ckpt"))))
        }
        EvalSource::Checkpoint { checkpoint, config } => {
            let c = checkpoint.clone();
            ((**config).clone(), Box::new(move |_| c.clone()))
        }
    };
    if let Some(n) = episodes {
        cfg.eval_episodes = n;
    }
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    cfg.validate()?;
    if let Some(o) = out {
        create_dir(o)?;
    }
    let mut per_seed = Vec::new();
    let mut all = Vec::new();
    for &seed in &cfg.seeds {
        let agent = if cfg.algorithm.is_learned() {
            let path = checkpoint_for(seed).ok_or_else(|| ExperimentError::Usage("a learned algorithm needs --checkpoint".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let agent = SacAgent::load(&path, cfg.env.obs_dim(), cfg.effective_agent(), &mut rng).map_err(|e| match e {
                AgentError::Ad(crate::autodiff::AdError::Io(m)) => ExperimentError::Io(format!("{}: {m}", path.display())),
                other => ExperimentError::from(other),
            })?;
            Some(agent)
        } else {
            None
        };
        let (summary, records, traj) = evaluate_seed(&cfg, seed, agent.as_ref())?;
        if let Some(o) = out {
            let dir = seed_dir(o, seed);
            create_dir(&dir)?;
            write_eval_outputs(&dir, &cfg, seed, &records, &traj)?;
        }
        per_seed.push(summary);
        all.extend(records);
    }
    let summary = EvalSummary::from_records(cfg.label(), cfg.hash(), per_seed, &all);
    if let Some(o) = out {
        write_json(&o.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

/// Trains and evaluates every `(count, seed)` cell in parallel, then writes
/// `sweep.csv` and `sweep.svg` into `out`.
pub fn cmd_sweep(cfg: &RunConfig, counts: &[usize], out: &Path, force: bool) -> Result<SweepReport, ExperimentError> {
    if counts.is_empty() {
        return Err(ExperimentError::Usage("sensor counts must not be empty".into()));
    }
    if let Some(bad) = counts.iter().find(|c| **c == 0) {
        return Err(ExperimentError::Usage(format!("sensor counts must be at least 1, got {bad}")));
    }
    cfg.validate()?;
    prepare_run_dir(out, force)?;
    let cells: Vec<(usize, u64)> = counts.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let label = cfg.label();
    let results: Vec<Result<SweepRow, ExperimentError>> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let mut cell = cfg.clone();
            cell.env.n_sensors = n;
            cell.validate()?;
            let (agent, _) = run_seed(&cell, seed, None, false)?;
            let (s, _, _) = evaluate_seed(&cell, seed, agent.as_ref())?;
            Ok(SweepRow { n_sensors: n, seed, algorithm: label.clone(), reward: s.return_mean, fair_data: s.fair_data_mean, energy: s.energy_mean })
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut sorted_counts: Vec<usize> = counts.to_vec();
    sorted_counts.sort_unstable();
    sorted_counts.dedup();
    let means: Vec<(usize, f64)> = sorted_counts
        .iter()
        .map(|&n| {
            let cell: Vec<f64> = rows.iter().filter(|r| r.n_sensors == n).map(|r| r.fair_data).collect();
            (n, cell.iter().sum::<f64>() / cell.len() as f64)
        })
        .collect();
    let nondecreasing = means.windows(2).all(|w| w[1].1 >= w[0].1);
    let csv = out.join("sweep.csv");
    write_csv(&csv, SWEEP_SCHEMA, SWEEP_COLUMNS, &rows)?;
    let svg = out.join("sweep.svg");
    write_text(&svg, &plot::sweep_svg(&[(label, means.clone())]))?;
    Ok(SweepReport { rows, means, nondecreasing, csv, svg })
}

/// Renders `learning_curve.svg`, `bars.svg` and `trajectory.svg` for the
/// given run directories into `out`. Curves average the seeds of each run;
/// the trajectory comes from the first seed of the first run.
pub fn cmd_plot(run_dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if run_dirs.is_empty() {
        return Err(ExperimentError::Usage("plot needs at least one run directory".into()));
    }
    create_dir(out)?;
    let mut curves = Vec::new();
    let mut bars = Vec::new();
    for dir in run_dirs {
        let manifest = Manifest::load(dir)?;
        let mut sum: Vec<f64> = Vec::new();
        for &seed in &manifest.seeds {
            let rows = read_metrics(&seed_dir(dir, seed).join("metrics.csv"))?;
            if sum.is_empty() {
                sum = vec![0.0; rows.len()];
            }
            for (acc, r) in sum.iter_mut().zip(&rows) {
                *acc += r.ret;
            }
        }
        let n = manifest.seeds.len() as f64;
        curves.push((manifest.label.clone(), sum.into_iter().map(|v| v / n).collect()));
        let summary = EvalSummary::load(&dir.join("summary.json"))?;
        bars.push((manifest.label, summary.fair_data_mean, summary.energy_mean));
    }
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: String| -> Result<(), ExperimentError> {
        let p = out.join(name);
        write_text(&p, &svg)?;
        written.push(p);
        Ok(())
    };
    emit("learning_curve.svg", plot::learning_curve_svg(&curves, plot::SMOOTH_WINDOW))?;
    emit("bars.svg", plot::bar_chart_svg(&bars))?;

    let first = &run_dirs[0];
    let manifest = Manifest::load(first)?;
    let cfg = RunConfig::load(&first.join("config.toml"))?;
    let sd = seed_dir(first, manifest.seeds[0]);
    let traj = read_trajectory(&sd.join("trajectory.csv"))?;
    let sensors: Vec<SensorRow> = read_csv(&sd.join("sensors.csv"), SENSORS_SCHEMA)?;
    let path: Vec<(f64, f64)> = traj.iter().map(|r| (r.x_m, r.y_m)).collect();
    let pts: Vec<(f64, f64)> = sensors.iter().map(|s| (s.x_m, s.y_m)).collect();
    emit("trajectory.svg", plot::trajectory_svg(&path, &pts, &cfg.env.area, &format!("UAV trajectory ({})", manifest.label)))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentConfig;
    use crate::env::EnvConfig;

    fn quick(algorithm: Algorithm, out: &Path) -> RunConfig {
        RunConfig {
            algorithm,
            seeds: vec![4, 9],
            episodes: 3,
            eval_episodes: 2,
            checkpoint_every: 2,
            out_dir: out.to_string_lossy().into_owned(),
            env: EnvConfig { slots: 12, ..EnvConfig::tiny() },
            agent: AgentConfig { hidden: 8, batch_size: 8, warmup_steps: 10, buffer_capacity: 500, ..AgentConfig::tiny() },
        }
    }

    #[test]
    fn random_run_emits_metrics_without_checkpoints() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick(Algorithm::Random, &tmp.path().join("r"));
        let dir = cmd_train(&cfg, &TrainOptions::default()).unwrap();
        let rows = read_metrics(&dir.join("seed_4/metrics.csv")).unwrap();
        assert_eq!(rows.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(!dir.join("seed_4/final.ckpt").exists());
        let m = Manifest::load(&dir).unwrap();
        assert_eq!((m.config_hash, m.seeds), (cfg.hash(), vec![4, 9]));
    }

    #[test]
    fn refuses_overwrite_without_force() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick(Algorithm::Greedy, &tmp.path().join("g"));
        cmd_train(&cfg, &TrainOptions::default()).unwrap();
        let err = cmd_train(&cfg, &TrainOptions::default()).unwrap_err();
        assert!(matches!(err, ExperimentError::Usage(_)));
        cmd_train(&cfg, &TrainOptions { force: true, verbose: false }).unwrap();
    }

    #[test]
    fn learned_run_is_reproducible_and_re_evaluates_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick(Algorithm::Sacppv, &tmp.path().join("a"));
        let dir = cmd_train(&cfg, &TrainOptions::default()).unwrap();
        let first = fs::read(dir.join("seed_9/metrics.csv")).unwrap();
        assert!(dir.join("seed_9/checkpoints/ep_000002.ckpt").exists());
        assert!(dir.join("seed_9/final.ckpt").exists());
        let stored = EvalSummary::load(&dir.join("summary.json")).unwrap();
        let again = cmd_eval(&EvalSource::Run(dir.clone()), None, None, None).unwrap();
        assert_eq!(again, stored);

        cmd_train(&cfg, &TrainOptions { force: true, verbose: false }).unwrap();
        assert_eq!(fs::read(dir.join("seed_9/metrics.csv")).unwrap(), first);

        let traj = read_trajectory(&dir.join("seed_4/trajectory.csv")).unwrap();
        assert_eq!(traj.len(), cfg.env.slots + 1);

        let one = cmd_eval(&EvalSource::Run(dir.clone()), Some(1), Some(vec![4]), None).unwrap();
        assert_eq!(one.per_seed.len(), 1);
        assert_eq!(one.per_seed[0].episodes, 1);

        let plots = tmp.path().join("plots");
        let files = cmd_plot(&[dir], &plots).unwrap();
        assert_eq!(files.len(), 3);
        let svg = fs::read_to_string(plots.join("trajectory.svg")).unwrap();
        assert_eq!(svg.matches("class=\"sensor\"").count(), cfg.env.n_sensors);
    }

    #[test]
    fn shape_mismatch_names_tensor() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick(Algorithm::Sacppv, &tmp.path().join("a"));
        let dir = cmd_train(&RunConfig { seeds: vec![4], ..cfg.clone() }, &TrainOptions::default()).unwrap();
        let mut wide = cfg.clone();
        wide.agent.hidden = 9;
        let src = EvalSource::Checkpoint { checkpoint: Some(dir.join("seed_4/final.ckpt")), config: Box::new(wide) };
        let err = cmd_eval(&src, Some(1), Some(vec![4]), None).unwrap_err();
        assert!(err.to_string().contains("actor.l1.weight"), "{err}");
    }

    #[test]
    fn sweep_rejects_empty_counts_and_writes_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick(Algorithm::Greedy, &tmp.path().join("unused"));
        let out = tmp.path().join("sweep");
        assert_eq!(cmd_sweep(&cfg, &[], &out, false).unwrap_err().exit_code(), 2);
        let report = cmd_sweep(&cfg, &[2, 3], &out, false).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.means.len(), 2);
        let text = fs::read_to_string(&report.csv).unwrap();
        assert!(text.starts_with("# schema: skyharvest.sweep/v1\nn_sensors,seed,algorithm,reward,fair_data,energy\n"));
        assert!(report.svg.exists());
    }

    #[test]
    fn eval_seed_streams_differ_from_training() {
        assert_ne!(eval_seeds(5, 3), episode_seeds(5, 3));
        assert_eq!(eval_seeds(5, 3), eval_seeds(5, 3));
    }
}
