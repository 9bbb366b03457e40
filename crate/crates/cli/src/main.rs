//! `duplex`: command-line driver over duplex-core.

mod config;
mod repro;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use duplex_core::analysis::{bell_report, decode_table, sweep, Experiment, ShotRecord, SweepResult};
use duplex_core::codes::{bacon_shor_spec, threecx_spec, StabilizerSpec, Variant};
use duplex_core::decoder::Ambiguity;
use duplex_core::lattice::{Layout, SublatticeMap};
use duplex_core::sampler::ShotTable;
use serde_json::json;

use config::{parse_metric, RunArgs, RunConfig};

/// Why a command stopped: bad invocation (exit 2) or a domain error (exit 1).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl From<duplex_core::Error> for Failure {
    fn from(e: duplex_core::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "duplex", version, about = "3CX and Bacon-Shor codes on one heavy-hex lattice")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heavy-hex lattice and both sublattice placements as JSON.
    Lattice {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stabilizer generators of both 3CX variants and of Bacon-Shor.
    Codes {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Circuit of a protocol as text.
    Circuit {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detectors and observables as measurement-index sets.
    Detectors {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the noiseless circuit with random gauges and counts detector violations.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Detector error model at the configured p.
    Dem {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples shots into a packed file plus a JSON sidecar (`<out>.json`).
    Sample {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decodes a sampled shot file into a CSV of signed observable values.
    Decode {
        /// Shot file written by `sample`; its sidecar supplies the config.
        #[arg(long = "in")]
        input: PathBuf,
        /// Ambiguity criterion for the keep column.
        #[arg(long, value_parser = config::parse_kebab::<Ambiguity>)]
        ambiguity: Option<Ambiguity>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bell report (JSON) from a decoded CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Average over kept shots only.
        #[arg(long)]
        postselect: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold or scaling sweep as CSV.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated code distances.
        #[arg(long, value_delimiter = ',')]
        distances: Option<Vec<usize>>,
        /// Comma-separated round counts (default: T = d).
        #[arg(long = "T-list", value_delimiter = ',')]
        rounds_list: Option<Vec<usize>>,
        /// Comma-separated physical error rates.
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<f64>>,
        /// Shots at the smallest p; the budget grows as 1/p from --shots.
        #[arg(long)]
        max_shots: Option<usize>,
        /// `infidelity` or an observable such as Z_L1.
        #[arg(long, value_parser = parse_metric)]
        metric: Option<duplex_core::analysis::Metric>,
        /// Slope-fit window as lo,hi.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        fit_window: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pinned sweeps behind the figures.
    Repro {
        #[arg(value_enum)]
        target: repro::Target,
        /// Shots per point at the largest p.
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        max_shots: Option<usize>,
        /// Restrict to these distances.
        #[arg(long, value_delimiter = ',')]
        distances: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(())
}

fn experiment(cfg: &RunConfig) -> Result<Experiment, Failure> {
    let pc = cfg.protocol_config();
    pc.validate()?;
    Ok(Experiment::new(&pc, cfg.p.expect("resolved"))?)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Lattice { d, out } => {
            let layout = Layout::for_distance(d)?;
            let lattice: serde_json::Value =
                serde_json::from_str(&layout.lattice.to_json()).expect("lattice JSON parses");
            let doc = json!({
                "config": { "d": d },
                "lattice": lattice,
                "placement": layout.placement,
                "three_cx": sublattice_json(&layout.three_cx),
                "bacon_shor": sublattice_json(&layout.bacon_shor),
            });
            emit(out.as_deref(), &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))
        }
        Command::Codes { d, out } => {
            let mut s = format!("# {}\n", json!({ "d": d }));
            for v in [Variant::A, Variant::B] {
                write_spec(&mut s, &format!("3cx variant {v:?}"), &threecx_spec(d, v)?);
            }
            let (bs, gauges) = bacon_shor_spec(d)?;
            write_spec(&mut s, "bacon-shor", &bs);
            for (name, gs) in [("x gauges", &gauges.x_gauges), ("z gauges", &gauges.z_gauges)] {
                writeln!(s, "bacon-shor {name}:").unwrap();
                for g in gs {
                    writeln!(s, "  {g:?}").unwrap();
                }
            }
            emit(out.as_deref(), &s)
        }
        Command::Circuit { run, out } => {
            let cfg = RunConfig::from_args(&run)?.resolve()?;
            let circuit = circuit_only(&cfg)?;
            emit(out.as_deref(), &format!("# {}\n{}", cfg.header(), circuit.to_text()))
        }
        Command::Detectors { run, out } => {
            let cfg = RunConfig::from_args(&run)?.resolve()?;
            let circuit = circuit_only(&cfg)?;
            let dm = duplex_core::flow::derive_detectors(&circuit)?;
            emit(out.as_deref(), &format!("# {}\n{}", cfg.header(), dm.to_text()))
        }
        Command::Verify { run, runs } => {
            let mut cfg = RunConfig::from_args(&run)?;
            cfg.runs = Some(runs);
            let cfg = cfg.resolve()?;
            let circuit = circuit_only(&cfg)?;
            let dm = duplex_core::flow::derive_detectors(&circuit)?;
            let rep = duplex_core::flow::verify_determinism_seeded(&circuit, &dm, runs, cfg.seed.expect("resolved"));
            let mut s = format!("{} violations\n", rep.violations.len());
            for (det, first_run) in &rep.violations {
                writeln!(s, "D{det} first fired on run {first_run}").unwrap();
            }
            emit(None, &s)?;
            if rep.ok() {
                Ok(())
            } else {
                Err(Failure::Domain("noiseless run violated detectors".into()))
            }
        }
        Command::Dem { run, out } => {
            let cfg = RunConfig::from_args(&run)?.resolve()?;
            let exp = experiment(&cfg)?;
            let mut s = format!("# {}\n", cfg.header());
            writeln!(s, "# hyperedges {}", exp.dem.hyperedge_count()).unwrap();
            for w in &exp.graph.warnings {
                writeln!(s, "# warning {w}").unwrap();
            }
            s.push_str(&exp.dem.to_text());
            emit(out.as_deref(), &s)
        }
        Command::Sample { run, out } => {
            let cfg = RunConfig::from_args(&run)?.resolve()?;
            let exp = experiment(&cfg)?;
            let table = exp.sample(cfg.shots.expect("resolved"), cfg.seed.expect("resolved"));
            std::fs::write(&out, table.to_bytes())?;
            let sidecar = json!({
                "config": cfg,
                "shots": table.shots,
                "detectors": table.num_detectors,
                "observables": table.observables.iter().map(|l| l.name()).collect::<Vec<_>>(),
            });
            std::fs::write(sidecar_path(&out), serde_json::to_string_pretty(&sidecar).expect("serializes") + "\n")?;
            Ok(())
        }
        Command::Decode { input, ambiguity, out } => decode(&input, ambiguity, out.as_deref()),
        Command::Report { input, postselect, out } => report(&input, postselect, out.as_deref()),
        Command::Sweep {
            run,
            distances,
            rounds_list,
            p_values,
            max_shots,
            metric,
            fit_window,
            out,
        } => {
            let mut cfg = RunConfig::from_args(&run)?;
            cfg.overlay(RunConfig {
                distances,
                rounds_list,
                p_values,
                max_shots,
                metric,
                fit_window: fit_window.map(|w| (w[0], w[1])),
                ..RunConfig::default()
            });
            let sc = cfg.sweep_config()?;
            let res = sweep(&sc)?;
            emit(out.as_deref(), &sweep_text(&res, None))
        }
        Command::Repro {
            target,
            shots,
            max_shots,
            distances,
            seed,
            out,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => config::default_seed()?,
            };
            let mut s = String::new();
            for (panel, mut sc) in repro::panels(target, seed) {
                if let Some(n) = shots {
                    sc.shots = n;
                }
                if max_shots.is_some() {
                    sc.max_shots = max_shots;
                }
                if let Some(ds) = &distances {
                    sc.distances.retain(|d| ds.contains(d));
                    if sc.distances.is_empty() {
                        return Err(Failure::Usage(format!("panel {panel} has none of the requested distances")));
                    }
                }
                let res = sweep(&sc)?;
                s.push_str(&sweep_text(&res, Some(panel)));
            }
            emit(out.as_deref(), &s)
        }
    }
}

fn circuit_only(cfg: &RunConfig) -> Result<duplex_core::circuit::Circuit, Failure> {
    let pc = cfg.protocol_config();
    pc.validate()?;
    let layout = Layout::for_distance(pc.d)?;
    Ok(duplex_core::circuitgen::build_circuit(&pc, &layout)?)
}

fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn sublattice_json(m: &SublatticeMap) -> serde_json::Value {
    json!({
        "code": m.code.to_string(),
        "d": m.d,
        "data": m.data.iter().map(|(&(r, c), &n)| json!([r, c, n])).collect::<Vec<_>>(),
        "ancilla": m.ancilla.iter().map(|(l, &n)| json!([l.to_string(), n])).collect::<Vec<_>>(),
        "nnn_middles": m.nnn_middles.iter().map(|(&(a, b), &n)| json!([a, b, n])).collect::<Vec<_>>(),
    })
}

fn write_spec(s: &mut String, name: &str, spec: &StabilizerSpec) {
    writeln!(s, "{name} (qubit r*d+c):").unwrap();
    for g in spec.generators() {
        writeln!(s, "  {g:?}").unwrap();
    }
    writeln!(s, "  logical X {:?}", spec.logical_x).unwrap();
    writeln!(s, "  logical Z {:?}", spec.logical_z).unwrap();
}

fn decode(input: &Path, ambiguity: Option<Ambiguity>, out: Option<&Path>) -> Result<(), Failure> {
    let sidecar = sidecar_path(input);
    let text = std::fs::read_to_string(&sidecar)
        .map_err(|e| Failure::Usage(format!("{}: {e}", sidecar.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", sidecar.display())))?;
    let mut cfg: RunConfig = serde_json::from_value(doc["config"].clone())
        .map_err(|e| Failure::Usage(format!("{}: {e}", sidecar.display())))?;
    if ambiguity.is_some() {
        cfg.ambiguity = ambiguity;
    }
    let cfg = cfg.resolve()?;
    let exp = experiment(&cfg)?;
    let table = ShotTable::from_bytes(&std::fs::read(input)?)?;
    if table.num_detectors != exp.dm.detectors.len() || table.observables.len() != exp.dm.observables.len() {
        return Err(Failure::Domain("shot file does not match the circuit in its sidecar".into()));
    }
    let shots = decode_table(&exp.graph, &table, cfg.ambiguity)?;
    let mut s = format!("# {}\n", cfg.header());
    if exp.bell_labels().is_some() {
        s.push_str("shot,xx,zz,yy,keep\n");
        for (i, r) in exp.shot_records(&shots)?.iter().enumerate() {
            writeln!(s, "{i},{},{},{},{}", r.xx, r.zz, r.yy, r.keep as u8).unwrap();
        }
    } else {
        let labels: Vec<_> = exp.dm.observables.iter().map(|o| o.label).collect();
        let names: Vec<&str> = labels.iter().map(|l| l.name()).collect();
        writeln!(s, "shot,{},keep", names.join(",")).unwrap();
        for (i, shot) in shots.iter().enumerate() {
            write!(s, "{i}").unwrap();
            for &l in &labels {
                write!(s, ",{}", exp.value(shot, l)?).unwrap();
            }
            writeln!(s, ",{}", shot.keep as u8).unwrap();
        }
    }
    emit(out, &s)
}

#[derive(serde::Deserialize)]
struct DecodedRow {
    xx: i8,
    zz: i8,
    yy: i8,
    keep: u8,
}

fn report(input: &Path, postselect: bool, out: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
    let config: serde_json::Value = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .and_then(|l| serde_json::from_str(l).ok())
        .unwrap_or(serde_json::Value::Null);
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut records = Vec::new();
    for row in rdr.deserialize::<DecodedRow>() {
        let row = row.map_err(|e| Failure::Domain(format!("{}: {e}", input.display())))?;
        let rec = ShotRecord::new(row.xx, row.zz, row.keep != 0);
        if rec.yy != row.yy {
            return Err(Failure::Domain(format!("{}: yy column breaks yy = -xx*zz", input.display())));
        }
        records.push(rec);
    }
    let rep = bell_report(&records, postselect)?;
    let doc = json!({ "config": config, "report": rep });
    emit(out, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))
}

/// Config header, CSV table, then fits and crossings as `#` lines. With a
/// panel name every data row is prefixed by it.
fn sweep_text(res: &SweepResult, panel: Option<&str>) -> String {
    let mut s = format!("# {}\n", serde_json::to_string(&res.config).expect("config serializes"));
    writeln!(s, "# metric {}", serde_json::to_string(&res.metric).expect("metric serializes")).unwrap();
    for (i, line) in res.to_csv().lines().enumerate() {
        match panel {
            Some(_) if i == 0 => writeln!(s, "panel,{line}").unwrap(),
            Some(p) => writeln!(s, "{p},{line}").unwrap(),
            None => writeln!(s, "{line}").unwrap(),
        }
    }
    for f in &res.slopes {
        writeln!(
            s,
            "# slope d={} T={} postselect={} slope={:.4} stderr={:.4} points={}",
            f.d, f.rounds, f.postselect, f.slope, f.slope_stderr, f.points
        )
        .unwrap();
    }
    for f in &res.yield_slopes {
        writeln!(s, "# yield-slope d={} T={} slope={:.4} stderr={:.4}", f.d, f.rounds, f.slope, f.slope_stderr).unwrap();
    }
    for c in &res.crossings {
        writeln!(s, "# crossing d={}/{} postselect={} p={:e}", c.d1, c.d2, c.postselect, c.p).unwrap();
    }
    if let Some(m) = res.mean_crossing {
        writeln!(s, "# mean-crossing p={m:e}").unwrap();
    }
    s
}
