//! Flags, config files and their resolution into a [`RunConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qbc_core::analysis::montecarlo::MIN_TRIALS;
use qbc_core::protocol::{AliceStrategySpec, BobStrategySpec, Knowledge, ProtocolConfig, RELABEL_MAX_N};
use qbc_core::states::Bit;

pub const SEED_ENV: &str = "QBC_SEED";
pub const DEFAULT_N: usize = 3;
pub const DEFAULT_M: usize = 3;
pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_K: usize = 2;
/// Tolerance of the exact checks.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Concealing,
    Prelim1,
    Prelim2,
    CheatGuess,
    CheatZ,
    CheatQuantum,
    BindingRelabel,
    BindingEprOracle,
    BindingEprBlind,
    UaDependence,
    Honest,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Concealing => "concealing",
            ExperimentId::Prelim1 => "prelim1",
            ExperimentId::Prelim2 => "prelim2",
            ExperimentId::CheatGuess => "cheat-guess",
            ExperimentId::CheatZ => "cheat-z",
            ExperimentId::CheatQuantum => "cheat-quantum",
            ExperimentId::BindingRelabel => "binding-relabel",
            ExperimentId::BindingEprOracle => "binding-epr-oracle",
            ExperimentId::BindingEprBlind => "binding-epr-blind",
            ExperimentId::UaDependence => "ua-dependence",
            ExperimentId::Honest => "honest",
        }
    }

    /// Largest `n` the experiment accepts.
    pub fn max_n(self) -> Option<usize> {
        match self {
            ExperimentId::Concealing | ExperimentId::Prelim2 => Some(qbc_core::analysis::concealing::EXACT_MAX_N),
            ExperimentId::Prelim1 => Some(qbc_core::analysis::prelim::PRELIM_MAX_N),
            ExperimentId::BindingRelabel => Some(RELABEL_MAX_N),
            ExperimentId::BindingEprOracle | ExperimentId::BindingEprBlind | ExperimentId::UaDependence => Some(4),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        <ExperimentId as ValueEnum>::from_str(s, false).map_err(|_| anyhow::anyhow!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BobKind {
    Honest,
    GuessTestSet,
    MeasureZ,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AliceKind {
    Honest,
    Relabel,
    Purification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KnowledgeMode {
    Oracle,
    Blind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "qbc", version, about = "Simulate and attack a Bell-pair bit commitment protocol")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more experiments and write their reports.
    Run(RunArgs),
    /// Run a single session and dump its full transcript as JSON.
    Audit(SessionArgs),
}

/// Settings shared by `run` and `audit`.
#[derive(Debug, Clone, Default, Args)]
pub struct SessionArgs {
    /// TOML file with default values; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pairs kept for the commitment.
    #[arg(long)]
    pub n: Option<usize>,
    /// Pairs sacrificed for testing.
    #[arg(long)]
    pub m: Option<usize>,
    /// Committed bit; drawn per trial when absent.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub b: Option<u8>,
    /// Master seed [env: QBC_SEED].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub bob: Option<BobKind>,
    #[arg(long, value_enum)]
    pub alice: Option<AliceKind>,
    /// Axis branches of the ancilla receiver.
    #[arg(long)]
    pub k: Option<usize>,
    /// Branch amplitudes, comma-separated, or `uniform`.
    #[arg(long)]
    pub p_profile: Option<String>,
    #[arg(long, value_enum)]
    pub knowledge: Option<KnowledgeMode>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Experiment ids, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub experiment: Vec<ExperimentId>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; reports do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, hide = true, allow_hyphen_values = true)]
    pub tolerance: Option<f64>,
    #[command(flatten)]
    pub session: SessionArgs,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub experiment: Option<Experiments>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub b: Option<u8>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub bob: Option<BobKind>,
    pub alice: Option<AliceKind>,
    pub k: Option<usize>,
    pub p_profile: Option<ProfileValue>,
    pub knowledge: Option<KnowledgeMode>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Experiments {
    One(ExperimentId),
    Many(Vec<ExperimentId>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProfileValue {
    Named(String),
    Amplitudes(Vec<f64>),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message()))
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiments: Vec<ExperimentId>,
    pub n: usize,
    pub m: usize,
    pub b: Option<u8>,
    pub trials: u64,
    pub seed: u64,
    pub bob: BobKind,
    pub alice: AliceKind,
    pub k: usize,
    pub p_profile: Vec<f64>,
    pub knowledge: KnowledgeMode,
    pub tolerance: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
    #[serde(skip)]
    pub jobs: usize,
}

fn parse_profile(s: &str) -> Result<Option<Vec<f64>>> {
    if s.trim() == "uniform" {
        return Ok(None);
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad amplitude `{p}` in p-profile")))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).with_context(|| format!("{SEED_ENV} is not a 64-bit unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

impl RunConfig {
    /// Merges flags over the config file over `QBC_SEED` over defaults,
    /// then validates. `need_experiment` is false for `audit`.
    pub fn resolve(args: &RunArgs, need_experiment: bool) -> Result<Self> {
        let s = &args.session;
        let file = match &s.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let experiments = if !args.experiment.is_empty() {
            args.experiment.clone()
        } else {
            match file.experiment {
                Some(Experiments::One(e)) => vec![e],
                Some(Experiments::Many(v)) => v,
                None => Vec::new(),
            }
        };
        let k = s.k.or(file.k).unwrap_or(DEFAULT_K);
        let profile = match (&s.p_profile, &file.p_profile) {
            (Some(flag), _) => parse_profile(flag)?,
            (None, Some(ProfileValue::Named(name))) => parse_profile(name)?,
            (None, Some(ProfileValue::Amplitudes(v))) => Some(v.clone()),
            (None, None) => None,
        };
        let seed = match s.seed.or(file.seed) {
            Some(v) => v,
            None => env_seed()?.unwrap_or(0),
        };
        let cfg = RunConfig {
            experiments,
            n: s.n.or(file.n).unwrap_or(DEFAULT_N),
            m: s.m.or(file.m).unwrap_or(DEFAULT_M),
            b: s.b.or(file.b),
            trials: args.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
            seed,
            bob: s.bob.or(file.bob).unwrap_or(BobKind::Honest),
            alice: s.alice.or(file.alice).unwrap_or(AliceKind::Honest),
            k,
            p_profile: profile.unwrap_or_else(|| vec![(1.0 / k.max(1) as f64).sqrt(); k]),
            knowledge: s.knowledge.or(file.knowledge).unwrap_or(KnowledgeMode::Oracle),
            tolerance: args.tolerance.unwrap_or(EXACT_TOL),
            out: s.out.clone().or(file.out),
            format: args.format.or(file.format).unwrap_or(Format::Json),
            jobs: args.jobs.or(file.jobs).unwrap_or_else(default_jobs),
        };
        cfg.validate(need_experiment)?;
        Ok(cfg)
    }

    pub fn validate(&self, need_experiment: bool) -> Result<()> {
        ensure!(!need_experiment || !self.experiments.is_empty(), "missing --experiment");
        ensure!(self.n >= 1, "n must be at least 1");
        ensure!(self.trials >= MIN_TRIALS, "trials must be at least {MIN_TRIALS}");
        ensure!(self.jobs >= 1, "jobs must be at least 1");
        ensure!(self.b.is_none_or(|b| b <= 1), "b must be 0 or 1");
        ensure!(self.tolerance.is_finite(), "tolerance must be finite");
        self.bob_spec().validate()?;
        if self.k < 2 {
            bail!("k must be at least 2");
        }
        for e in &self.experiments {
            if let Some(max) = e.max_n() {
                ensure!(self.n <= max, "{e} supports n <= {max}");
            }
        }
        if self.alice == AliceKind::Relabel {
            ensure!(self.n <= RELABEL_MAX_N, "relabel search supports n <= {RELABEL_MAX_N}");
        }
        Ok(())
    }

    pub fn bit(&self) -> Option<Bit> {
        self.b.map(|b| Bit::try_from(b).expect("validated"))
    }

    pub fn bob_spec(&self) -> BobStrategySpec {
        match self.bob {
            BobKind::Honest => BobStrategySpec::Honest,
            BobKind::GuessTestSet => BobStrategySpec::GuessTestSet,
            BobKind::MeasureZ => BobStrategySpec::MeasureZ,
            BobKind::Quantum => BobStrategySpec::QuantumAncilla { k: self.k, amplitudes: self.p_profile.clone() },
        }
    }

    pub fn knowledge(&self) -> Knowledge {
        match self.knowledge {
            KnowledgeMode::Oracle => Knowledge::Oracle,
            KnowledgeMode::Blind => Knowledge::Blind,
        }
    }

    /// A cheating committer aims for the opposite of `committed`.
    pub fn alice_spec(&self, committed: Bit) -> AliceStrategySpec {
        let target = committed.flip();
        match self.alice {
            AliceKind::Honest => AliceStrategySpec::Honest,
            AliceKind::Relabel => AliceStrategySpec::ClassicalRelabel { target },
            AliceKind::Purification => AliceStrategySpec::Purification { target, knowledge: self.knowledge() },
        }
    }

    /// Single-session config; the bit defaults to 0.
    pub fn protocol_config(&self) -> ProtocolConfig {
        let b = self.bit().unwrap_or(Bit::Zero);
        ProtocolConfig { n: self.n, m: self.m, b, seed: self.seed, alice: self.alice_spec(b), bob: self.bob_spec() }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
