//! Orchestration of the Kerr-cat experiments: configuration, parallel
//! sweeps and deterministic file emission.

pub mod commands;
pub mod config;
pub mod output;

use config::{ConfigError, ExperimentConfig};
use output::{json_text, sha256_hex, Artifacts};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Failure classes with distinct process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] kerrcat_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum QptSpace {
    Fock,
    Cat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Levels,
    Ramp,
    Qpt(QptSpace),
    Nems,
    Calibrate,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Levels => "levels",
            Experiment::Ramp => "ramp",
            Experiment::Qpt(QptSpace::Fock) => "qpt-fock",
            Experiment::Qpt(QptSpace::Cat) => "qpt-cat",
            Experiment::Nems => "nems",
            Experiment::Calibrate => "calibrate",
        }
    }
}

/// Execution context shared by all tasks of an invocation.
#[derive(Debug, Clone, Copy)]
pub struct Runner {
    /// Worker threads; 1 runs serially, 0 uses all cores.
    pub jobs: usize,
    pub seed: u64,
}

impl Runner {
    pub fn serial(seed: u64) -> Self {
        Self { jobs: 1, seed }
    }

    /// Independent seed of task `index`, a pure function of the master seed.
    pub fn task_seed(&self, index: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng.next_u64()
    }

    /// Runs `f` over `tasks`, returning results in task order regardless of
    /// the number of workers.
    pub fn map<T, R, F>(&self, tasks: &[T], f: F) -> Result<Vec<R>, CliError>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> Result<R, CliError> + Sync + Send,
    {
        if self.jobs == 1 {
            return tasks.iter().enumerate().map(|(i, t)| f(i, t)).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        pool.install(|| tasks.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
    }
}

/// Output of one experiment before provenance is attached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Artifacts,
    pub results: serde_json::Value,
}

/// Validates `config` and runs `experiment`, returning every output file
/// (including `config.echo.json` and `summary.json`) in memory.
pub fn execute(
    experiment: Experiment,
    config: &ExperimentConfig,
    runner: &Runner,
) -> Result<Artifacts, CliError> {
    config.validate()?;
    let outcome = match experiment {
        Experiment::Levels => commands::levels::run(config, runner)?,
        Experiment::Ramp => commands::ramp::run(config, runner)?,
        Experiment::Qpt(space) => commands::qpt::run(config, space, runner)?,
        Experiment::Nems => commands::nems::run(config, runner)?,
        Experiment::Calibrate => commands::calibrate::run(config, runner)?,
    };
    let mut files = outcome.files;
    let echo = json_text(config);
    let timestamp = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<u64>().ok());
    let summary = json!({
        "experiment": experiment.name(),
        "provenance": {
            "config_sha256": sha256_hex(echo.as_bytes()),
            "code_version": env!("CARGO_PKG_VERSION"),
            "seed": runner.seed,
            "timestamp": timestamp,
        },
        "points": config.sweep(),
        "results": outcome.results,
        "files": files.digests(),
    });
    files.insert("config.echo.json", echo);
    files.insert("summary.json", json_text(&summary));
    Ok(files)
}

/// Loads, runs and writes one invocation; `out` and `seed` override the
/// configuration's `io` section. Returns the output directory.
pub fn run(
    experiment: Experiment,
    config_path: &Path,
    out: Option<PathBuf>,
    jobs: usize,
    seed: Option<u64>,
) -> Result<PathBuf, CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        config.io.seed = s;
    }
    let dir = out
        .or_else(|| config.io.output_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            ConfigError(vec![
                "no output directory: pass --out or set io.output_dir".into()
            ])
        })?;
    let runner = Runner {
        jobs,
        seed: config.io.seed,
    };
    let files = execute(experiment, &config, &runner)?;
    files.write_to(&dir)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results_for_any_worker_count() {
        let tasks: Vec<u64> = (0..64).collect();
        let f = |i: usize, t: &u64| -> Result<u64, CliError> { Ok(t * t + i as u64) };
        let serial = Runner::serial(1).map(&tasks, f).unwrap();
        let parallel = Runner { jobs: 4, seed: 1 }.map(&tasks, f).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn task_seeds_are_stable_and_distinct() {
        let r = Runner::serial(42);
        assert_eq!(r.task_seed(3), Runner { jobs: 8, seed: 42 }.task_seed(3));
        assert_ne!(r.task_seed(3), r.task_seed(4));
        assert_ne!(r.task_seed(3), Runner::serial(43).task_seed(3));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(ConfigError(vec![])).exit_code(), 2);
        assert_eq!(
            CliError::Numerical(kerrcat_core::Error::SingularMatrix).exit_code(),
            3
        );
    }
}
