use std::path::{Path, PathBuf};

use clap::Args;
use duplex_core::analysis::{Metric, SweepConfig};
use duplex_core::circuit::Basis;
use duplex_core::decoder::Ambiguity;
use duplex_core::flow::ObsLabel;
use duplex_core::protocol::{LsOrder, Protocol, ProtocolConfig, Schedule};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SEED_VAR: &str = "DUPLEX_SEED";

/// Every knob a run can take. Values come from `--config`, then from flags;
/// unset ones fall back to defaults in [`RunConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub postselect: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambiguity: Option<Ambiguity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ls_order: Option<LsOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Basis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cx_after_round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<usize>>,
    #[serde(rename = "T_list", skip_serializing_if = "Option::is_none")]
    pub rounds_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_shots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(f64, f64)>,
}

/// Flags shared by every subcommand that builds a circuit.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the run fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Option<Protocol>,
    /// Code distance.
    #[arg(long)]
    pub d: Option<usize>,
    /// Stabilizer rounds (default: d).
    #[arg(long = "T")]
    pub rounds: Option<usize>,
    /// Physical error rate.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub shots: Option<usize>,
    /// Default comes from the DUPLEX_SEED environment variable, else 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Discard shots with ambiguous matchings.
    #[arg(long)]
    pub postselect: bool,
    /// edge-count or weight.
    #[arg(long, value_parser = parse_kebab::<Ambiguity>)]
    pub ambiguity: Option<Ambiguity>,
    /// before-cx or after-cx.
    #[arg(long, value_parser = parse_kebab::<LsOrder>)]
    pub ls_order: Option<LsOrder>,
    /// interleaved or sequential.
    #[arg(long, value_parser = parse_kebab::<Schedule>)]
    pub schedule: Option<Schedule>,
    /// Memory or readout basis, X or Z.
    #[arg(long, value_parser = parse_kebab::<Basis>)]
    pub basis: Option<Basis>,
    /// Transversal CX after this many rounds (interleaved memory).
    #[arg(long)]
    pub cx_after_round: Option<usize>,
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse().map_err(|e: duplex_core::Error| e.to_string())
}

pub fn parse_kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// `infidelity` or an observable label such as `Z_L1`.
pub fn parse_metric(s: &str) -> Result<Metric, String> {
    if s == "infidelity" {
        return Ok(Metric::Infidelity);
    }
    s.parse::<ObsLabel>()
        .map(Metric::LogicalError)
        .map_err(|e| e.to_string())
}

fn read_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Fields of `other` that are set win.
    pub fn overlay(&mut self, other: RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            protocol, d, rounds, p, shots, seed, postselect, ambiguity, ls_order, schedule, basis, cx_after_round, runs,
            distances, rounds_list, p_values, max_shots, metric, fit_window
        );
    }

    /// File config under the flags.
    pub fn from_args(args: &RunArgs) -> Result<Self, Failure> {
        let mut cfg = match &args.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        cfg.overlay(RunConfig {
            protocol: args.protocol,
            d: args.d,
            rounds: args.rounds,
            p: args.p,
            shots: args.shots,
            seed: args.seed,
            postselect: args.postselect.then_some(true),
            ambiguity: args.ambiguity,
            ls_order: args.ls_order,
            schedule: args.schedule,
            basis: args.basis,
            cx_after_round: args.cx_after_round,
            ..RunConfig::default()
        });
        Ok(cfg)
    }

    /// Fills the defaults a single-point run needs so the embedded config is
    /// complete.
    pub fn resolve(mut self) -> Result<Self, Failure> {
        if self.protocol.is_none() {
            return Err(Failure::Usage("--protocol is required".into()));
        }
        let d = *self.d.get_or_insert(3);
        self.rounds.get_or_insert(d);
        self.p.get_or_insert(1e-3);
        self.shots.get_or_insert(10_000);
        if self.seed.is_none() {
            self.seed = Some(default_seed()?);
        }
        self.postselect.get_or_insert(false);
        self.ambiguity.get_or_insert(Ambiguity::default());
        self.ls_order.get_or_insert(LsOrder::default());
        self.schedule.get_or_insert(Schedule::default());
        self.basis.get_or_insert(Basis::Z);
        Ok(self)
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let protocol = self.protocol.expect("resolved");
        let d = self.d.expect("resolved");
        let mut c = ProtocolConfig::new(protocol, d, self.rounds.unwrap_or(d));
        c.basis = self.basis.unwrap_or(Basis::Z);
        c.ls_order = self.ls_order.unwrap_or_default();
        c.schedule = self.schedule.unwrap_or_default();
        c.cx_after_round = self.cx_after_round;
        c
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, Failure> {
        let protocol = self.protocol.ok_or_else(|| Failure::Usage("--protocol is required".into()))?;
        let distances = self.distances.clone().or(self.d.map(|d| vec![d]));
        let distances = distances.ok_or_else(|| Failure::Usage("--distances is required".into()))?;
        let p_values = self.p_values.clone().or(self.p.map(|p| vec![p]));
        let p_values = p_values.ok_or_else(|| Failure::Usage("--p-values is required".into()))?;
        let seed = match self.seed {
            Some(s) => s,
            None => default_seed()?,
        };
        let mut s = SweepConfig::new(protocol, distances, p_values, self.shots.unwrap_or(10_000), seed);
        s.rounds = self.rounds_list.clone().or(self.rounds.map(|t| vec![t])).unwrap_or_default();
        s.max_shots = self.max_shots;
        s.postselect = self.postselect.unwrap_or(false);
        s.ambiguity = self.ambiguity.unwrap_or_default();
        s.metric = self.metric;
        s.ls_order = self.ls_order.unwrap_or_default();
        s.schedule = self.schedule.unwrap_or_default();
        s.fit_window = self.fit_window;
        Ok(s)
    }

    /// Single-line JSON for output headers.
    pub fn header(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

pub fn default_seed() -> Result<u64, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_VAR}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}
