//! Figures of merit from decoded shots, and threshold / scaling sweeps.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Matrix3, Matrix4, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::circuitgen::build_circuit;
use crate::decoder::{build_matching_graph, Ambiguity, MatchingGraph};
use crate::dem::{attach_noise, extract_dem, DetectorErrorModel, NoiseModel, NoisyCircuit};
use crate::error::{Error, Result};
use crate::flow::{derive_detectors, observable_values, DetectorModel, ObsLabel};
use crate::lattice::Layout;
use crate::protocol::{LsOrder, Protocol, ProtocolConfig, Schedule};
use crate::sampler::{sample_from_block, ShotTable, BLOCK_SHOTS};
use crate::tableau::run_circuit;

/// Y⊗Y = −(X⊗X)(Z⊗Z), so a shot's YY follows from its XX and ZZ.
pub fn shot_yy(xx: i8, zz: i8) -> i8 {
    -xx * zz
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub xx: i8,
    pub zz: i8,
    pub yy: i8,
    pub keep: bool,
}

impl ShotRecord {
    pub fn new(xx: i8, zz: i8, keep: bool) -> Self {
        ShotRecord {
            xx,
            zz,
            yy: shot_yy(xx, zz),
            keep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
}

impl Expectations {
    pub fn fidelity(&self) -> f64 {
        (1.0 + self.xx - self.yy + self.zz) / 4.0
    }

    /// Correlation matrix with only the measured diagonal filled in.
    pub fn t_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&nalgebra::Vector3::new(self.xx, self.yy, self.zz))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellReport {
    pub postselected: bool,
    pub exps: Expectations,
    pub fidelity: f64,
    pub t_matrix: [[f64; 3]; 3],
    /// CHSH value from the diagonal of T only; a lower bound on the full value.
    pub chsh_lower_bound: f64,
    pub n_shots: usize,
    pub n_kept: usize,
    /// Kept shots whose (XX, ZZ) differs from (+1, +1).
    pub n_fail: usize,
    #[serde(rename = "yield")]
    pub yield_: f64,
    /// Binomial standard error of 1 - F.
    pub stderr: f64,
    /// 2/sqrt(N_fail), relative to 1 - F.
    pub rel_err: f64,
}

/// Expectations over the kept shots (all shots unless `postselected`).
pub fn bell_report(shots: &[ShotRecord], postselected: bool) -> Result<BellReport> {
    let kept: Vec<&ShotRecord> = shots.iter().filter(|s| s.keep || !postselected).collect();
    if kept.is_empty() {
        return Err(Error::Analysis("no kept shots to report on".into()));
    }
    let n = kept.len() as f64;
    let mean = |f: fn(&ShotRecord) -> i8| kept.iter().map(|s| f(s) as f64).sum::<f64>() / n;
    let exps = Expectations {
        xx: mean(|s| s.xx),
        yy: mean(|s| s.yy),
        zz: mean(|s| s.zz),
    };
    let fidelity = exps.fidelity();
    let n_fail = kept.iter().filter(|s| s.xx != 1 || s.zz != 1).count();
    let t = exps.t_matrix();
    Ok(BellReport {
        postselected,
        exps,
        fidelity,
        t_matrix: [[t[(0, 0)], 0.0, 0.0], [0.0, t[(1, 1)], 0.0], [0.0, 0.0, t[(2, 2)]]],
        chsh_lower_bound: chsh_bound(&t),
        n_shots: shots.len(),
        n_kept: kept.len(),
        n_fail,
        yield_: kept.len() as f64 / shots.len() as f64,
        stderr: binomial_stderr(n_fail, kept.len()),
        rel_err: relative_error(n_fail),
    })
}

pub fn binomial_stderr(fails: usize, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let f = fails as f64 / n as f64;
    (f * (1.0 - f) / n as f64).sqrt()
}

pub fn relative_error(fails: usize) -> f64 {
    if fails == 0 {
        f64::INFINITY
    } else {
        2.0 / (fails as f64).sqrt()
    }
}

/// 2 sqrt(m1 + m2) over the two largest eigenvalues of TᵀT.
pub fn chsh_bound(t: &Matrix3<f64>) -> f64 {
    let m = t.transpose() * t;
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    2.0 * (ev[0] + ev[1]).sqrt()
}

/// (I + ⟨XX⟩ XX + ⟨YY⟩ YY + ⟨ZZ⟩ ZZ) / 4 in the computational basis.
pub fn approximate_tomography(exps: &Expectations) -> Matrix4<f64> {
    #[rustfmt::skip]
    let xx = Matrix4::new(
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
    );
    #[rustfmt::skip]
    let yy = Matrix4::new(
        0.0, 0.0, 0.0, -1.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
    );
    let zz = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, -1.0, 1.0));
    (Matrix4::identity() + xx * exps.xx + yy * exps.yy + zz * exps.zz) / 4.0
}

/// Everything needed to sample and decode one (config, p) point.
pub struct Experiment {
    pub config: ProtocolConfig,
    pub p: f64,
    pub circuit: Circuit,
    pub dm: DetectorModel,
    pub noisy: NoisyCircuit,
    pub dem: DetectorErrorModel,
    pub graph: MatchingGraph,
    /// Noiseless observable values.
    pub reference: BTreeMap<ObsLabel, i8>,
}

impl Experiment {
    pub fn new(config: &ProtocolConfig, p: f64) -> Result<Self> {
        let layout = Layout::for_distance(config.d)?;
        let circuit = build_circuit(config, &layout)?;
        let dm = derive_detectors(&circuit)?;
        Self::from_parts(config.clone(), p, circuit, dm)
    }

    pub fn from_parts(config: ProtocolConfig, p: f64, circuit: Circuit, dm: DetectorModel) -> Result<Self> {
        let noisy = attach_noise(&circuit, &NoiseModel::new(p)?)?;
        let dem = extract_dem(&noisy, &dm)?;
        let graph = build_matching_graph(&dem)?;
        let reference = reference_values(&circuit, &dm)?;
        Ok(Experiment {
            config,
            p,
            circuit,
            dm,
            noisy,
            dem,
            graph,
            reference,
        })
    }

    /// Same circuit at another noise strength.
    pub fn at(&self, p: f64) -> Result<Self> {
        Self::from_parts(self.config.clone(), p, self.circuit.clone(), self.dm.clone())
    }

    pub fn sample(&self, shots: usize, seed: u64) -> ShotTable {
        sample_from_block(&self.noisy, &self.dm, shots, seed, 0)
    }

    /// Samples and decodes in chunks so memory stays bounded. Without an
    /// ambiguity criterion every shot is kept.
    pub fn run(&self, shots: usize, seed: u64, ambiguity: Option<Ambiguity>) -> Result<Vec<DecodedShot>> {
        const CHUNK_BLOCKS: usize = 256;
        let mut out = Vec::with_capacity(shots);
        let mut block = 0u64;
        while out.len() < shots {
            let n = (shots - out.len()).min(CHUNK_BLOCKS * BLOCK_SHOTS);
            let table = sample_from_block(&self.noisy, &self.dm, n, seed, block);
            out.extend(decode_table(&self.graph, &table, ambiguity)?);
            block += n.div_ceil(BLOCK_SHOTS) as u64;
        }
        Ok(out)
    }

    /// Signed value of `label` in a decoded shot.
    pub fn value(&self, shot: &DecodedShot, label: ObsLabel) -> Result<i8> {
        let j = self
            .dm
            .observables
            .iter()
            .position(|o| o.label == label)
            .ok_or_else(|| Error::Analysis(format!("circuit has no observable {}", label.name())))?;
        let ideal = self.reference[&label];
        Ok(if shot.residual >> j & 1 == 1 { -ideal } else { ideal })
    }

    /// The XX and ZZ observables a Bell report is built from, lattice-surgery
    /// ones when present.
    pub fn bell_labels(&self) -> Option<(ObsLabel, ObsLabel)> {
        let has = |l: ObsLabel| self.dm.observable(l).is_some();
        let xx = [ObsLabel::XxLs, ObsLabel::XxFinal].into_iter().find(|&l| has(l))?;
        let zz = [ObsLabel::ZzLs, ObsLabel::ZzFinal].into_iter().find(|&l| has(l))?;
        Some((xx, zz))
    }

    pub fn shot_records(&self, shots: &[DecodedShot]) -> Result<Vec<ShotRecord>> {
        let (xl, zl) = self
            .bell_labels()
            .ok_or_else(|| Error::Analysis(format!("{} has no XX/ZZ pair", self.config.protocol)))?;
        shots
            .iter()
            .map(|s| Ok(ShotRecord::new(self.value(s, xl)?, self.value(s, zl)?, s.keep)))
            .collect()
    }
}

/// Observable values of one noiseless tableau run.
pub fn reference_values(circuit: &Circuit, dm: &DetectorModel) -> Result<BTreeMap<ObsLabel, i8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let record = run_circuit(circuit, &mut rng, |_, _, _| {});
    observable_values(dm, &record)
}

/// One shot after decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedShot {
    /// Bit `j`: observable `j` of the detector model is wrong after correction.
    pub residual: u64,
    /// No basis was ambiguous.
    pub keep: bool,
    /// Bit `j`: the basis of observable `j` was not ambiguous.
    pub keep_mask: u64,
}

impl DecodedShot {
    pub fn failed(&self, j: usize) -> bool {
        self.residual >> j & 1 == 1
    }

    pub fn kept_for(&self, j: usize) -> bool {
        self.keep_mask >> j & 1 == 1
    }
}

/// Decodes every shot of `table`, with post-selection diagnostics when an
/// ambiguity criterion is given. Results come back in shot order regardless
/// of the thread count.
pub fn decode_table(graph: &MatchingGraph, table: &ShotTable, ambiguity: Option<Ambiguity>) -> Result<Vec<DecodedShot>> {
    if graph.num_detectors() != table.num_detectors {
        return Err(Error::Analysis(format!(
            "graph has {} detectors, shot table {}",
            graph.num_detectors(),
            table.num_detectors
        )));
    }
    // Graph observable i sits at table position perm[i].
    let perm: Vec<usize> = graph
        .observables
        .iter()
        .map(|l| {
            table
                .observables
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::Analysis(format!("shot table lacks observable {}", l.name())))
        })
        .collect::<Result<_>>()?;
    let labels = table.observables.clone();
    let chunk = 4096;
    let parts: Vec<Result<Vec<DecodedShot>>> = (0..table.shots.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            // Low-noise syndromes repeat a lot; cache per chunk.
            let mut cache: HashMap<Vec<usize>, (u64, u64, bool)> = HashMap::new();
            let mut out = Vec::with_capacity(chunk);
            for s in c * chunk..((c + 1) * chunk).min(table.shots) {
                let flagged = table.flagged(s);
                let (predicted, keep_mask, keep) = match cache.get(&flagged) {
                    Some(&v) => v,
                    None => {
                        let mut syndrome = vec![false; table.num_detectors];
                        for &d in &flagged {
                            syndrome[d] = true;
                        }
                        let r = match ambiguity {
                            Some(a) => graph.decode_with_postselection(&syndrome, a)?,
                            None => graph.decode(&syndrome)?,
                        };
                        let mut predicted = 0u64;
                        for (i, &j) in perm.iter().enumerate() {
                            predicted |= (r.predicted_mask >> i & 1) << j;
                        }
                        let mut keep_mask = 0u64;
                        for (j, &l) in labels.iter().enumerate() {
                            keep_mask |= (r.keep_for(l) as u64) << j;
                        }
                        let v = (predicted, keep_mask, r.keep);
                        cache.insert(flagged, v);
                        v
                    }
                };
                out.push(DecodedShot {
                    residual: table.observable_mask(s) ^ predicted,
                    keep,
                    keep_mask,
                });
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::with_capacity(table.shots);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// What a sweep point measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// 1 - F_Bell from shot-by-shot XX, YY, ZZ.
    Infidelity,
    /// Failure rate of one observable.
    LogicalError(ObsLabel),
}

impl Metric {
    pub fn default_for(exp: &Experiment) -> Metric {
        if exp.bell_labels().is_some() {
            Metric::Infidelity
        } else {
            Metric::LogicalError(exp.dm.observables[0].label)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub shots: usize,
    pub kept: usize,
    pub fails: usize,
    pub metric: f64,
    pub stderr: f64,
    pub rel_err: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

impl Estimate {
    fn new(shots: usize, kept: usize, fails: usize) -> Self {
        Estimate {
            shots,
            kept,
            fails,
            metric: if kept == 0 { f64::NAN } else { fails as f64 / kept as f64 },
            stderr: binomial_stderr(fails, kept),
            rel_err: relative_error(fails),
            yield_: if shots == 0 { f64::NAN } else { kept as f64 / shots as f64 },
        }
    }
}

/// Failure statistics of decoded shots. For `Infidelity`, a shot fails when
/// (XX, ZZ) is not (+1, +1), which makes fails / kept equal 1 - F exactly.
pub fn estimate(exp: &Experiment, shots: &[DecodedShot], metric: Metric, postselect: bool) -> Result<Estimate> {
    let pos = |l: ObsLabel| {
        exp.dm
            .observables
            .iter()
            .position(|o| o.label == l)
            .ok_or_else(|| Error::Analysis(format!("circuit has no observable {}", l.name())))
    };
    let (tracked, per_shot) = match metric {
        Metric::Infidelity => {
            let (x, z) = exp
                .bell_labels()
                .ok_or_else(|| Error::Analysis("infidelity needs an XX/ZZ pair".into()))?;
            (vec![pos(x)?, pos(z)?], true)
        }
        Metric::LogicalError(l) => (vec![pos(l)?], false),
    };
    let ideal_ok = tracked.iter().all(|&j| exp.reference[&exp.dm.observables[j].label] == 1);
    if metric == Metric::Infidelity && !ideal_ok {
        return Err(Error::Analysis("noiseless XX/ZZ are not both +1".into()));
    }
    let mut kept = 0;
    let mut fails = 0;
    for s in shots {
        let keep = if per_shot { s.keep } else { s.keep && tracked.iter().all(|&j| s.kept_for(j)) };
        if postselect && !keep {
            continue;
        }
        kept += 1;
        fails += tracked.iter().any(|&j| s.failed(j)) as usize;
    }
    Ok(Estimate::new(shots.len(), kept, fails))
}

/// Sweep grid and decoding options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub protocol: Protocol,
    pub distances: Vec<usize>,
    /// Round counts; empty means T = d.
    #[serde(default)]
    pub rounds: Vec<usize>,
    pub p_values: Vec<f64>,
    pub shots: usize,
    /// Shots at the smallest p when larger than `shots`; scaled as 1/p in between.
    #[serde(default)]
    pub max_shots: Option<usize>,
    pub seed: u64,
    pub postselect: bool,
    #[serde(default)]
    pub ambiguity: Ambiguity,
    #[serde(default)]
    pub metric: Option<Metric>,
    #[serde(default)]
    pub ls_order: LsOrder,
    #[serde(default)]
    pub schedule: Schedule,
    /// p window for the slope fits; the whole grid when absent.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
}

impl SweepConfig {
    pub fn new(protocol: Protocol, distances: Vec<usize>, p_values: Vec<f64>, shots: usize, seed: u64) -> Self {
        SweepConfig {
            protocol,
            distances,
            rounds: Vec::new(),
            p_values,
            shots,
            max_shots: None,
            seed,
            postselect: false,
            ambiguity: Ambiguity::default(),
            metric: None,
            ls_order: LsOrder::default(),
            schedule: Schedule::default(),
            fit_window: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.distances.iter().any(|&d| !(2..=5).contains(&d)) {
            return Err(Error::InvalidArgument("sweep distances must lie in 2..=5".into()));
        }
        if self.shots == 0 || self.shots.max(self.max_shots.unwrap_or(0)) > 10_000_000 {
            return Err(Error::InvalidArgument("shots must lie in 1..=10^7".into()));
        }
        if self.p_values.is_empty() || self.p_values.iter().any(|&p| !(p > 0.0 && p < 0.5)) {
            return Err(Error::InvalidArgument("p values must lie in (0, 0.5)".into()));
        }
        Ok(())
    }

    fn rounds_for(&self, d: usize) -> Vec<usize> {
        if self.rounds.is_empty() {
            vec![d]
        } else {
            self.rounds.clone()
        }
    }

    /// Shot budget at `p`: `shots` at the largest p, growing as 1/p up to `max_shots`.
    pub fn shots_at(&self, p: f64) -> usize {
        match self.max_shots {
            Some(m) if m > self.shots => {
                let pmax = self.p_values.iter().cloned().fold(f64::MIN, f64::max);
                ((self.shots as f64 * pmax / p).round() as usize).clamp(self.shots, m)
            }
            _ => self.shots,
        }
    }

    pub fn protocol_config(&self, d: usize, t: usize) -> ProtocolConfig {
        let mut c = ProtocolConfig::new(self.protocol, d, t);
        c.ls_order = self.ls_order;
        c.schedule = self.schedule;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub d: usize,
    #[serde(rename = "T")]
    pub rounds: usize,
    pub p: f64,
    pub metric: f64,
    pub stderr: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
    pub postselect: bool,
    pub shots: usize,
    pub kept: usize,
    pub fails: usize,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub d1: usize,
    pub d2: usize,
    #[serde(rename = "T1")]
    pub rounds1: usize,
    #[serde(rename = "T2")]
    pub rounds2: usize,
    pub postselect: bool,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub d: usize,
    #[serde(rename = "T")]
    pub rounds: usize,
    pub postselect: bool,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub metric: Metric,
    /// Without post-selection, then (if enabled) with it, from the same shots.
    pub rows: Vec<SweepRow>,
    pub crossings: Vec<Crossing>,
    /// Mean of the per-pair crossings without post-selection.
    pub mean_crossing: Option<f64>,
    pub slopes: Vec<SlopeFit>,
    /// Fits of log(1 - yield) against log p (post-selected sweeps only).
    pub yield_slopes: Vec<SlopeFit>,
}

/// Runs every (d, T, p) cell; cells run in parallel and rows come back in
/// grid order. Each cell's seed mixes the sweep seed with its indices.
/// Post-selected rows reuse the shots of the plain ones.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &d in &cfg.distances {
        for t in cfg.rounds_for(d) {
            cells.push((d, t));
        }
    }
    // Circuit, detectors and reference are shared across p.
    let bases: Vec<Experiment> = cells
        .par_iter()
        .map(|&(d, t)| Experiment::new(&cfg.protocol_config(d, t), cfg.p_values[0]))
        .collect::<Result<_>>()?;
    let metric = cfg.metric.unwrap_or_else(|| Metric::default_for(&bases[0]));
    let grid: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.p_values.len()).map(move |k| (c, k))).collect();
    let variants: &[bool] = if cfg.postselect { &[false, true] } else { &[false] };
    let per_cell: Vec<Vec<SweepRow>> = grid
        .par_iter()
        .map(|&(c, k)| {
            let (d, t) = cells[c];
            let p = cfg.p_values[k];
            let exp = bases[c].at(p)?;
            let seed = cell_seed(cfg.seed, d, t, k);
            let shots = exp.run(cfg.shots_at(p), seed, cfg.postselect.then_some(cfg.ambiguity))?;
            variants
                .iter()
                .map(|&ps| {
                    let e = estimate(&exp, &shots, metric, ps)?;
                    Ok(SweepRow {
                        protocol: cfg.protocol,
                        d,
                        rounds: t,
                        p,
                        metric: e.metric,
                        stderr: e.stderr,
                        yield_: e.yield_,
                        postselect: ps,
                        shots: e.shots,
                        kept: e.kept,
                        fails: e.fails,
                        rel_err: e.rel_err,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &ps in variants {
        rows.extend(per_cell.iter().flatten().filter(|r| r.postselect == ps).cloned());
    }

    let (lo, hi) = cfg.fit_window.unwrap_or((f64::MIN, f64::MAX));
    let mut crossings = Vec::new();
    let mut slopes = Vec::new();
    let mut yield_slopes = Vec::new();
    for &ps in variants {
        let curve = |d: usize, t: usize| -> Vec<&SweepRow> { rows.iter().filter(|r| r.d == d && r.rounds == t && r.postselect == ps).collect() };
        let points = |rs: &[&SweepRow]| -> Vec<(f64, f64)> { rs.iter().map(|r| (r.p, r.metric)).collect() };
        for w in cells.windows(2) {
            let ((d1, t1), (d2, t2)) = (w[0], w[1]);
            if d1 == d2 {
                continue;
            }
            if let Some(p) = crossing_point(&points(&curve(d1, t1)), &points(&curve(d2, t2))) {
                crossings.push(Crossing {
                    d1,
                    d2,
                    rounds1: t1,
                    rounds2: t2,
                    postselect: ps,
                    p,
                });
            }
        }
        for &(d, t) in &cells {
            let in_window: Vec<&SweepRow> = curve(d, t)
                .into_iter()
                .filter(|r| r.p >= lo * (1.0 - 1e-9) && r.p <= hi * (1.0 + 1e-9))
                .collect();
            if let Ok(f) = fit_power_law(&points(&in_window)) {
                slopes.push(SlopeFit { d, rounds: t, postselect: ps, ..f });
            }
            if ps {
                let pts: Vec<(f64, f64)> = in_window.iter().map(|r| (r.p, 1.0 - r.yield_)).collect();
                if let Ok(f) = fit_power_law(&pts) {
                    yield_slopes.push(SlopeFit { d, rounds: t, postselect: ps, ..f });
                }
            }
        }
    }
    let plain: Vec<f64> = crossings.iter().filter(|c| !c.postselect).map(|c| c.p).collect();
    let mean_crossing = (!plain.is_empty()).then(|| plain.iter().sum::<f64>() / plain.len() as f64);
    Ok(SweepResult {
        config: cfg.clone(),
        metric,
        rows,
        crossings,
        mean_crossing,
        slopes,
        yield_slopes,
    })
}

fn cell_seed(seed: u64, d: usize, t: usize, k: usize) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [d as u64, t as u64, k as u64] {
        h = (h ^ v).wrapping_mul(0x1000_0000_01B3).rotate_left(29);
    }
    h
}

/// Where two curves sampled on the same p grid cross, interpolating linearly
/// in log-log coordinates between the bracketing grid points. Returns the
/// lowest crossing. Points with a zero or undefined metric are skipped.
pub fn crossing_point(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = a
        .iter()
        .filter_map(|&(p, ya)| {
            let (_, yb) = b.iter().find(|(q, _)| (q - p).abs() <= 1e-12 * p)?;
            (ya > 0.0 && *yb > 0.0).then(|| (p.ln(), ya.ln() - yb.ln()))
        })
        .collect();
    let mut pts = pts;
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in pts.windows(2) {
        let ((x0, g0), (x1, g1)) = (w[0], w[1]);
        if g0 == 0.0 {
            return Some(x0.exp());
        }
        if g0.signum() != g1.signum() {
            return Some((x0 + (x1 - x0) * g0 / (g0 - g1)).exp());
        }
    }
    None
}

/// Least-squares fit of log y = slope * log p + intercept. Needs three
/// points with positive y.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, y)| *y > 0.0).map(|&(p, y)| (p.ln(), y.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::Analysis(format!("slope fit needs 3 points, window has {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Analysis("slope fit needs distinct p values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(SlopeFit {
        d: 0,
        rounds: 0,
        postselect: false,
        slope,
        slope_stderr,
        intercept,
        points: pts.len(),
    })
}

impl SweepResult {
    /// Table columns protocol,d,T,p,metric,stderr,yield first, then the
    /// post-selection flag, counts and the 2/sqrt(N_fail) error.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("protocol,d,T,p,metric,stderr,yield,postselect,shots,kept,fails,rel_err\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:e},{:e},{:e},{},{},{},{},{},{:e}\n",
                r.protocol, r.d, r.rounds, r.p, r.metric, r.stderr, r.yield_, r.postselect, r.shots, r.kept, r.fails, r.rel_err
            ));
        }
        s
    }

    pub fn slope_for(&self, d: usize, postselect: bool) -> Option<&SlopeFit> {
        self.slopes.iter().find(|f| f.d == d && f.postselect == postselect)
    }

    pub fn yield_slope_for(&self, d: usize) -> Option<&SlopeFit> {
        self.yield_slopes.iter().find(|f| f.d == d)
    }

    pub fn crossing_for(&self, d1: usize, d2: usize, postselect: bool) -> Option<f64> {
        self.crossings
            .iter()
            .find(|c| c.d1 == d1 && c.d2 == d2 && c.postselect == postselect)
            .map(|c| c.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yy_identity() {
        assert_eq!(shot_yy(1, 1), -1);
        assert_eq!(shot_yy(-1, 1), 1);
        assert_eq!(shot_yy(-1, -1), -1);
    }

    #[test]
    fn perfect_stream() {
        let shots = vec![ShotRecord::new(1, 1, true); 100];
        let r = bell_report(&shots, true).unwrap();
        assert_eq!(r.fidelity, 1.0);
        assert_eq!(r.yield_, 1.0);
        assert_eq!(r.n_fail, 0);
        assert!((r.chsh_lower_bound - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_kept_set_is_an_error() {
        let shots = vec![ShotRecord::new(1, 1, false); 3];
        assert!(bell_report(&shots, true).is_err());
        assert!(bell_report(&shots, false).is_ok());
        assert!(bell_report(&[], false).is_err());
    }

    #[test]
    fn chsh_examples() {
        let t = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, 1.0));
        assert!((chsh_bound(&t) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(chsh_bound(&Matrix3::zeros()), 0.0);
    }

    #[test]
    fn tomography_examples() {
        let bell = approximate_tomography(&Expectations { xx: 1.0, yy: -1.0, zz: 1.0 });
        let phi = nalgebra::Vector4::new(1.0, 0.0, 0.0, 1.0) / 2f64.sqrt();
        assert!((bell - phi * phi.transpose()).norm() < 1e-12);
        let mixed = approximate_tomography(&Expectations { xx: 0.0, yy: 0.0, zz: 0.0 });
        assert!((mixed - Matrix4::identity() / 4.0).norm() < 1e-15);
    }

    #[test]
    fn crossing_and_fit() {
        // y = (p/0.003)^2 crosses y = (p/0.003)^3 at p = 0.003.
        let ps = [1e-3, 2e-3, 4e-3, 8e-3];
        let a: Vec<(f64, f64)> = ps.iter().map(|&p| (p, (p / 3e-3f64).powi(2))).collect();
        let b: Vec<(f64, f64)> = ps.iter().map(|&p| (p, (p / 3e-3f64).powi(3))).collect();
        assert!((crossing_point(&a, &b).unwrap() - 3e-3).abs() < 1e-12);
        assert!((fit_power_law(&b).unwrap().slope - 3.0).abs() < 1e-12);
        assert!(fit_power_law(&b[..2]).is_err());
    }
}
