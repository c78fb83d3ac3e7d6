//! Experiment runner: resolves a scenario from defaults, a JSON file and
//! command-line overrides, trains and evaluates, and writes metrics, traces
//! and a checksummed manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uav_noma::env::{Access, Env, EpisodeMetrics, Scenario, Scheme, TraceRecord};
use uav_noma::experiments::{evaluate, new_learner};
use uav_noma::learn::{load_checkpoint, save_checkpoint, ReplayBuffer};
use uav_noma::rng::{derive_seed, Stream};

pub const METRICS_HEADER: &str = "episode,scheme,access,seed,throughput_bits,mean_reward,violations,wall_ms";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 3,
        }
    }
}

/// Everything one invocation needs. `None` overrides leave the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub scheme: Option<Scheme>,
    pub access: Option<Access>,
    pub out: PathBuf,
    /// Skip training; evaluate the checkpoint in `out` if there is one.
    pub eval_only: bool,
    pub trace: bool,
    /// Record wall-clock time per episode. Off by default so that metrics
    /// files are reproducible byte for byte.
    pub timing: bool,
}

/// Built-in scenario used when no file is given.
pub fn default_scenario() -> Scenario {
    Scenario::new(2, 6)
}

/// Defaults, then the file, then command-line overrides; validated.
pub fn resolve_scenario(rc: &RunConfig) -> Result<Scenario, RunError> {
    let mut s = match &rc.config {
        None => default_scenario(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(seed) = rc.seed {
        s.seed = seed;
    }
    if let Some(episodes) = rc.episodes {
        s.episodes = episodes;
    }
    if let Some(scheme) = rc.scheme {
        s.scheme = scheme;
    }
    if let Some(access) = rc.access {
        s.access = access;
    }
    s.validate().map_err(|e| RunError::Config(e.to_string()))?;
    Ok(s)
}

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: u64,
    pub scheme: String,
    pub access: String,
    pub seed: u64,
    pub throughput_bits: f64,
    pub mean_reward: f64,
    pub violations: usize,
    pub wall_ms: u64,
}

impl MetricsRow {
    pub fn from_episode(s: &Scenario, m: &EpisodeMetrics, wall_ms: u64) -> Self {
        Self {
            episode: m.episode,
            scheme: s.scheme.as_str().to_string(),
            access: s.access.as_str().to_string(),
            seed: s.seed,
            throughput_bits: m.throughput_bits,
            mean_reward: m.mean_reward,
            violations: m.violations,
            wall_ms,
        }
    }
}

/// Writes `rows` as CSV. Floats use the shortest representation that parses
/// back to the same value.
pub fn emit_metrics<'a>(rows: impl IntoIterator<Item = &'a MetricsRow>, path: &Path) -> anyhow::Result<()> {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.episode, r.scheme, r.access, r.seed, r.throughput_bits, r.mean_reward, r.violations, r.wall_ms
        )
        .expect("writing to a string");
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_metrics(path: &Path) -> anyhow::Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    anyhow::ensure!(lines.next() == Some(METRICS_HEADER), "{}: unexpected header", path.display());
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            anyhow::ensure!(f.len() == 8, "{}:{}: expected 8 fields", path.display(), i + 2);
            Ok(MetricsRow {
                episode: f[0].parse()?,
                scheme: f[1].to_string(),
                access: f[2].to_string(),
                seed: f[3].parse()?,
                throughput_bits: f[4].parse()?,
                mean_reward: f[5].parse()?,
                violations: f[6].parse()?,
                wall_ms: f[7].parse()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub eval_only: bool,
    pub scenario: Scenario,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

fn sha256_file(path: &Path) -> anyhow::Result<(String, u64)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

fn write_manifest(dir: &Path, scenario: &Scenario, eval_only: bool, files: &[String]) -> anyhow::Result<()> {
    let files = files
        .iter()
        .map(|f| {
            let (sha256, bytes) = sha256_file(&dir.join(f))?;
            Ok(ManifestEntry {
                path: f.clone(),
                sha256,
                bytes,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let m = Manifest {
        seed: scenario.seed,
        eval_only,
        scenario: scenario.clone(),
        files,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Recomputes every checksum listed in `dir/manifest.json`.
pub fn verify_manifest(dir: &Path) -> anyhow::Result<Manifest> {
    let path = dir.join(MANIFEST);
    let m: Manifest = serde_json::from_str(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?;
    for f in &m.files {
        let (sha, bytes) = sha256_file(&dir.join(&f.path))?;
        anyhow::ensure!(sha == f.sha256 && bytes == f.bytes, "{} does not match the manifest", f.path);
    }
    Ok(m)
}

/// Summary of one completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub training: Vec<EpisodeMetrics>,
    pub evaluation: Vec<EpisodeMetrics>,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn eval_throughput_bits(&self) -> f64 {
        let n = self.evaluation.len().max(1) as f64;
        self.evaluation.iter().map(|m| m.throughput_bits).sum::<f64>() / n
    }
}

/// Runs `rc`: a single scenario, or every point of its sweep.
pub fn run_experiment(rc: &RunConfig) -> Result<Vec<RunSummary>, RunError> {
    let scenario = resolve_scenario(rc)?;
    fs::create_dir_all(&rc.out).with_context(|| format!("creating {}", rc.out.display()))?;
    let Some(sweep) = scenario.sweep.clone() else {
        return Ok(vec![run_scenario(&scenario, rc, &rc.out)?]);
    };
    let mut base = serde_json::to_value(&scenario).map_err(anyhow::Error::from)?;
    base["sweep"] = serde_json::Value::Null;
    let mut summaries = Vec::new();
    let mut table = format!("parameter,value,{METRICS_HEADER}\n");
    for (i, value) in sweep.values.iter().enumerate() {
        let mut v = base.clone();
        let slot = sweep
            .parameter
            .split('.')
            .try_fold(&mut v, |node, key| node.get_mut(key))
            .ok_or_else(|| RunError::Config(format!("sweep parameter `{}` is not a scenario field", sweep.parameter)))?;
        *slot = value.clone();
        let point: Scenario = serde_json::from_value(v)
            .map_err(|e| RunError::Config(format!("sweep value {value} for `{}`: {e}", sweep.parameter)))?;
        point.validate().map_err(|e| RunError::Config(e.to_string()))?;
        let dir = rc.out.join(format!("sweep_{i}"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let summary = run_scenario(&point, rc, &dir)?;
        let n = summary.evaluation.len().max(1) as f64;
        let violations: usize = summary.evaluation.iter().map(|m| m.violations).sum();
        let reward = summary.evaluation.iter().map(|m| m.mean_reward).sum::<f64>() / n;
        let value_text = value.to_string();
        let value_text = if value_text.contains(',') || value_text.contains('"') {
            format!("\"{}\"", value_text.replace('"', "\"\""))
        } else {
            value_text
        };
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{},0",
            sweep.parameter,
            value_text,
            i,
            point.scheme.as_str(),
            point.access.as_str(),
            point.seed,
            summary.eval_throughput_bits(),
            reward,
            violations
        )
        .expect("writing to a string");
        summaries.push(summary);
    }
    let path = rc.out.join("sweep.csv");
    fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?;
    let mut files = vec!["sweep.csv".to_string()];
    for (i, s) in summaries.iter().enumerate() {
        files.extend(s.files.iter().map(|f| format!("sweep_{i}/{f}")));
    }
    write_manifest(&rc.out, &scenario, rc.eval_only, &files)?;
    Ok(summaries)
}

fn elapsed_ms(start: Instant, timing: bool) -> u64 {
    if timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn run_scenario(scenario: &Scenario, rc: &RunConfig, dir: &Path) -> anyhow::Result<RunSummary> {
    let mut env = Env::new(scenario.clone())?;
    let checkpoint = dir.join("checkpoint.json");
    let mut learner = if rc.eval_only && checkpoint.exists() {
        let l = load_checkpoint(&checkpoint)?;
        anyhow::ensure!(
            l.agents.iter().map(|a| a.spec).eq(env.agent_specs()),
            "{} does not fit this scenario",
            checkpoint.display()
        );
        l
    } else {
        new_learner(&env)
    };
    let mut files = Vec::new();
    let mut training = Vec::new();
    if !rc.eval_only {
        let mut buffer = ReplayBuffer::new(
            scenario.learning.buffer_capacity,
            derive_seed(scenario.seed, Stream::Replay, 0),
        );
        let mut rows = Vec::with_capacity(scenario.episodes);
        for e in 0..scenario.episodes {
            let start = Instant::now();
            let opts = uav_noma::env::EpisodeOptions {
                episode: e as u64,
                train: true,
                trace: false,
            };
            let (m, _) = uav_noma::env::run_episode(&mut env, &mut learner, Some(&mut buffer), opts);
            log::info!(
                "episode {e}: {:.3} bits, reward {:.4}, {} violating slots",
                m.throughput_bits,
                m.mean_reward,
                m.violations
            );
            rows.push(MetricsRow::from_episode(scenario, &m, elapsed_ms(start, rc.timing)));
            training.push(m);
        }
        emit_metrics(&rows, &dir.join("metrics.csv"))?;
        save_checkpoint(&learner, &checkpoint)?;
        files.push("metrics.csv".to_string());
        files.push("checkpoint.json".to_string());
    }

    let mut rows = Vec::new();
    let mut start = Instant::now();
    let (evaluation, trace) = evaluate(&mut env, &mut learner, scenario.eval_episodes, |m| {
        log::info!("evaluation episode {}: {:.3} bits", m.episode, m.throughput_bits);
        rows.push(MetricsRow::from_episode(scenario, m, elapsed_ms(start, rc.timing)));
        start = Instant::now();
    });
    emit_metrics(&rows, &dir.join("eval.csv"))?;
    files.push("eval.csv".to_string());
    if rc.trace {
        write_trace(&trace, &dir.join("trace.jsonl"))?;
        files.push("trace.jsonl".to_string());
    }
    write_manifest(dir, scenario, rc.eval_only, &files)?;
    Ok(RunSummary {
        scenario: scenario.clone(),
        training,
        evaluation,
        files,
    })
}

pub fn write_trace(records: &[TraceRecord], path: &Path) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
