//! Report records and their JSON-lines / CSV encodings.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use qbc_core::analysis::Estimate;

use crate::config::{AliceKind, BobKind, ExperimentId, KnowledgeMode, RunConfig};

pub const VERSION: &str = concat!("qbc ", env!("CARGO_PKG_VERSION"));

pub const CSV_HEADER: &str = "experiment,n,m,b,trials,seed,bob,alice,k,p_profile,knowledge,tolerance,\
value,ci_low,ci_high,exact_reference,pass,version,counterfactual";

/// Resolved settings behind one report. Output path, format and thread
/// count are left out since they do not affect the result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub experiment: ExperimentId,
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
}

impl Params {
    fn from_config(cfg: &RunConfig) -> Self {
        Params {
            experiment: cfg.experiments.first().copied().unwrap_or(ExperimentId::Honest),
            n: cfg.n,
            m: cfg.m,
            b: cfg.b,
            trials: cfg.trials,
            seed: cfg.seed,
            bob: cfg.bob,
            alice: cfg.alice,
            k: cfg.k,
            p_profile: cfg.p_profile.clone(),
            knowledge: cfg.knowledge,
            tolerance: cfg.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: ExperimentId,
    pub params: Params,
    /// Estimated rate or exact distance.
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub exact_reference: Option<f64>,
    pub pass: bool,
    pub seed: u64,
    pub version: String,
    /// Set when the committer was handed the receiver's private parameters.
    pub counterfactual: bool,
}

impl Report {
    pub fn exact(cfg: &RunConfig, value: f64, exact_reference: Option<f64>, pass: bool) -> Self {
        let params = Params::from_config(cfg);
        Report {
            experiment: params.experiment,
            params,
            value,
            ci_low: None,
            ci_high: None,
            exact_reference,
            pass,
            seed: cfg.seed,
            version: VERSION.to_string(),
            counterfactual: false,
        }
    }

    pub fn sampled(cfg: &RunConfig, e: &Estimate, pass: bool, counterfactual: bool) -> Self {
        Report {
            ci_low: Some(e.ci_low),
            ci_high: Some(e.ci_high),
            counterfactual,
            ..Report::exact(cfg, e.point, e.exact_reference, pass)
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn to_csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let p = &self.params;
        let profile: Vec<String> = p.p_profile.iter().map(f64::to_string).collect();
        [
            self.experiment.name().to_string(),
            p.n.to_string(),
            p.m.to_string(),
            p.b.map(|b| b.to_string()).unwrap_or_default(),
            p.trials.to_string(),
            p.seed.to_string(),
            kebab(&p.bob),
            kebab(&p.alice),
            p.k.to_string(),
            profile.join(";"),
            kebab(&p.knowledge),
            p.tolerance.to_string(),
            self.value.to_string(),
            opt(self.ci_low),
            opt(self.ci_high),
            opt(self.exact_reference),
            self.pass.to_string(),
            self.version.clone(),
            self.counterfactual.to_string(),
        ]
        .join(",")
    }
}

fn kebab<T: clap::ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

pub fn write_reports(reports: &[Report], format: crate::config::Format, out: &mut dyn Write) -> Result<()> {
    match format {
        crate::config::Format::Json => {
            for r in reports {
                writeln!(out, "{}", r.to_json_line()?)?;
            }
        }
        crate::config::Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in reports {
                writeln!(out, "{}", r.to_csv_row())?;
            }
        }
    }
    Ok(())
}
