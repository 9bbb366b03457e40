//! Circuit-level depolarizing noise and the detector error model.
//!
//! Fault symptoms are found with one backwards sweep: for every qubit we keep
//! the set of detectors and observables an X (resp. Z) error at the current
//! time would flip, and update those sets through each instruction in reverse.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{Basis, Circuit, Op};
use crate::error::{Error, Result};
use crate::flow::{DetectorModel, ObsLabel};
use crate::gf2::BitVec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
}

impl NoiseModel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("physical error rate {p} outside [0, 1)")));
        }
        Ok(NoiseModel { p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    Depolarize1(usize),
    Depolarize2(usize, usize),
    /// Classical flip of the given measurement index.
    MeasurementFlip(usize),
}

impl ChannelKind {
    pub fn num_terms(self) -> usize {
        match self {
            ChannelKind::Depolarize1(_) => 3,
            ChannelKind::Depolarize2(..) => 15,
            ChannelKind::MeasurementFlip(_) => 1,
        }
    }

    pub fn term_probability(self, p: f64) -> f64 {
        p / self.num_terms() as f64
    }

    pub fn term_name(self, term: usize) -> String {
        const P: [char; 4] = ['I', 'X', 'Y', 'Z'];
        match self {
            ChannelKind::Depolarize1(_) => P[term + 1].to_string(),
            ChannelKind::Depolarize2(..) => {
                let (a, b) = two_qubit_term(term);
                format!("{}{}", P[a], P[b])
            }
            ChannelKind::MeasurementFlip(_) => "flip".to_string(),
        }
    }
}

/// Pauli indices (0=I, 1=X, 2=Y, 3=Z) of two-qubit term `t` in `0..15`.
pub fn two_qubit_term(t: usize) -> (usize, usize) {
    let k = t + 1;
    (k / 4, k % 4)
}

/// `(x, z)` components of Pauli index `i`.
pub fn pauli_bits(i: usize) -> (bool, bool) {
    (i == 1 || i == 2, i == 2 || i == 3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    /// The channel acts right after this instruction.
    pub after: usize,
    pub kind: ChannelKind,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct NoisyCircuit {
    pub circuit: Circuit,
    pub channels: Vec<Channel>,
}

impl NoisyCircuit {
    /// Wraps explicit channels; a location may carry at most one channel.
    pub fn with_channels(circuit: Circuit, mut channels: Vec<Channel>) -> Result<Self> {
        channels.sort_by_key(|c| c.after);
        for w in channels.windows(2) {
            if w[0].after == w[1].after {
                return Err(Error::Dem(format!("instruction {} is annotated twice", w[0].after)));
            }
        }
        for c in &channels {
            if c.after >= circuit.instructions.len() || !(0.0..=1.0).contains(&c.p) {
                return Err(Error::Dem(format!("bad channel {c:?}")));
            }
        }
        Ok(NoisyCircuit { circuit, channels })
    }

    /// Same locations with every strength replaced by `p`.
    pub fn reweighted(&self, p: f64) -> NoisyCircuit {
        let mut out = self.clone();
        for c in &mut out.channels {
            c.p = p;
        }
        out
    }
}

/// One channel per reset, single-qubit gate, CX and measurement. Idle
/// locations are noiseless.
pub fn attach_noise(circuit: &Circuit, nm: &NoiseModel) -> Result<NoisyCircuit> {
    let mut channels = Vec::new();
    for (k, ins) in circuit.instructions.iter().enumerate() {
        let kind = match ins.op {
            Op::ResetZ | Op::ResetX | Op::H => ChannelKind::Depolarize1(ins.q0()),
            Op::Cx => ChannelKind::Depolarize2(ins.q0(), ins.q1()),
            Op::MeasureZ | Op::MeasureX => ChannelKind::MeasurementFlip(ins.meas_index.expect("numbered")),
            Op::Tick => continue,
        };
        channels.push(Channel { after: k, kind, p: nm.p });
    }
    NoisyCircuit::with_channels(circuit.clone(), channels)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub instruction: usize,
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMechanism {
    pub probability: f64,
    pub detectors: Vec<usize>,
    pub observables: Vec<ObsLabel>,
    /// First fault found with this symptom.
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedEdge {
    pub probability: f64,
    pub basis: Basis,
    /// One or two detectors, all of `basis`.
    pub detectors: Vec<usize>,
    pub observables: Vec<ObsLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub mechanism: usize,
    pub basis: Basis,
    pub detectors: Vec<usize>,
    pub origin: Origin,
    /// Elementary symptoms whose union is the hyperedge, if one was found.
    pub parts: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorErrorModel {
    pub detector_basis: Vec<Basis>,
    pub observables: Vec<ObsLabel>,
    pub mechanisms: Vec<ErrorMechanism>,
    pub edges: Vec<DecomposedEdge>,
    pub hyperedges: Vec<Hyperedge>,
}

/// Combined probability that exactly one of two independent flips happens.
pub fn merge_probability(q1: f64, q2: f64) -> f64 {
    q1 * (1.0 - q2) + q2 * (1.0 - q1)
}

/// Symptom of every single fault: `(channel index, term, symptom bits)` where
/// bits `0..D` are detectors and `D..D+L` observables in model order.
pub fn fault_table(noisy: &NoisyCircuit, dm: &DetectorModel) -> Vec<(usize, usize, BitVec)> {
    let c = &noisy.circuit;
    let nd = dm.detectors.len();
    let width = nd + dm.observables.len();
    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); c.num_measurements];
    for (i, d) in dm.detectors.iter().enumerate() {
        for &m in &d.meas {
            targets[m].push(i);
        }
    }
    for (j, o) in dm.observables.iter().enumerate() {
        for &m in &o.meas {
            targets[m].push(nd + j);
        }
    }
    let meas_sym: Vec<BitVec> = targets.into_iter().map(|t| BitVec::from_indices(width, t)).collect();

    let mut by_after: Vec<Vec<usize>> = vec![Vec::new(); c.instructions.len()];
    for (i, ch) in noisy.channels.iter().enumerate() {
        by_after[ch.after].push(i);
    }
    let zero = BitVec::zeros(width);
    let mut sx = vec![zero.clone(); c.num_qubits];
    let mut sz = vec![zero.clone(); c.num_qubits];
    let mut per_channel: Vec<Vec<(usize, BitVec)>> = vec![Vec::new(); noisy.channels.len()];
    for k in (0..c.instructions.len()).rev() {
        for &ci in &by_after[k] {
            let ch = noisy.channels[ci];
            match ch.kind {
                ChannelKind::Depolarize1(q) => {
                    for term in 0..3 {
                        let (x, z) = pauli_bits(term + 1);
                        let mut s = zero.clone();
                        if x {
                            s.xor_assign(&sx[q]);
                        }
                        if z {
                            s.xor_assign(&sz[q]);
                        }
                        per_channel[ci].push((term, s));
                    }
                }
                ChannelKind::Depolarize2(a, b) => {
                    for term in 0..15 {
                        let (pa, pb) = two_qubit_term(term);
                        let mut s = zero.clone();
                        for (q, pi) in [(a, pa), (b, pb)] {
                            let (x, z) = pauli_bits(pi);
                            if x {
                                s.xor_assign(&sx[q]);
                            }
                            if z {
                                s.xor_assign(&sz[q]);
                            }
                        }
                        per_channel[ci].push((term, s));
                    }
                }
                ChannelKind::MeasurementFlip(m) => per_channel[ci].push((0, meas_sym[m].clone())),
            }
        }
        let ins = &c.instructions[k];
        match ins.op {
            Op::Tick => {}
            Op::Cx => {
                let (ctl, tgt) = (ins.q0(), ins.q1());
                let t = sx[tgt].clone();
                sx[ctl].xor_assign(&t);
                let cz = sz[ctl].clone();
                sz[tgt].xor_assign(&cz);
            }
            Op::H => std::mem::swap(&mut sx[ins.q0()], &mut sz[ins.q0()]),
            Op::ResetZ | Op::ResetX => {
                sx[ins.q0()] = zero.clone();
                sz[ins.q0()] = zero.clone();
            }
            Op::MeasureZ => sx[ins.q0()].xor_assign(&meas_sym[ins.meas_index.unwrap()]),
            Op::MeasureX => sz[ins.q0()].xor_assign(&meas_sym[ins.meas_index.unwrap()]),
        }
    }
    per_channel
        .into_iter()
        .enumerate()
        .flat_map(|(ci, terms)| terms.into_iter().map(move |(t, s)| (ci, t, s)))
        .collect()
}

/// Builds the model and insists that every hyperedge decomposes.
pub fn extract_dem(noisy: &NoisyCircuit, dm: &DetectorModel) -> Result<DetectorErrorModel> {
    extract(noisy, dm, true)
}

/// Builds the model, reporting undecomposable hyperedges instead of failing.
pub fn extract_dem_raw(noisy: &NoisyCircuit, dm: &DetectorModel) -> Result<DetectorErrorModel> {
    extract(noisy, dm, false)
}

fn extract(noisy: &NoisyCircuit, dm: &DetectorModel, strict: bool) -> Result<DetectorErrorModel> {
    let nd = dm.detectors.len();
    let obs: Vec<ObsLabel> = dm.observables.iter().map(|o| o.label).collect();
    let mut index: HashMap<BitVec, usize> = HashMap::new();
    let mut mechanisms: Vec<ErrorMechanism> = Vec::new();
    for (ci, term, sym) in fault_table(noisy, dm) {
        let ch = noisy.channels[ci];
        let q = ch.kind.term_probability(ch.p);
        if q <= 0.0 || sym.is_zero() {
            continue;
        }
        match index.get(&sym) {
            Some(&i) => {
                let m = &mut mechanisms[i];
                m.probability = merge_probability(m.probability, q);
            }
            None => {
                let detectors: Vec<usize> = sym.ones().filter(|&b| b < nd).collect();
                let observables: Vec<ObsLabel> = sym.ones().filter(|&b| b >= nd).map(|b| obs[b - nd]).collect();
                let origin = Origin {
                    instruction: ch.after,
                    term: ch.kind.term_name(term),
                };
                if detectors.is_empty() {
                    return Err(Error::Dem(format!(
                        "undetectable logical flip {observables:?} from {} after instruction {}",
                        origin.term, origin.instruction
                    )));
                }
                index.insert(sym, mechanisms.len());
                mechanisms.push(ErrorMechanism {
                    probability: q,
                    detectors,
                    observables,
                    origin,
                });
            }
        }
    }
    let basis: Vec<Basis> = dm.detectors.iter().map(|d| d.basis).collect();
    decompose(basis, obs, mechanisms, strict)
}

/// A single-basis piece of a mechanism.
#[derive(Debug, Clone)]
struct Component {
    basis: Basis,
    detectors: Vec<usize>,
    obs_mask: u64,
}

fn components(m: &ErrorMechanism, basis: &[Basis], obs: &[ObsLabel]) -> Result<Vec<Component>> {
    let mut out = Vec::new();
    for b in [Basis::X, Basis::Z] {
        let detectors: Vec<usize> = m.detectors.iter().copied().filter(|&d| basis[d] == b).collect();
        let mut obs_mask = 0u64;
        for l in m.observables.iter().filter(|l| l.basis() == b) {
            let j = obs.iter().position(|o| o == l).expect("label in model");
            obs_mask |= 1 << j;
        }
        if detectors.is_empty() {
            if obs_mask != 0 {
                return Err(Error::Dem(format!(
                    "{:?} part of {} after instruction {} flips a logical with no {:?} detector",
                    b, m.origin.term, m.origin.instruction, b
                )));
            }
            continue;
        }
        out.push(Component {
            basis: b,
            detectors,
            obs_mask,
        });
    }
    Ok(out)
}

/// Splits mechanisms per basis and factors symptoms with more than two
/// detectors into elementary ones.
pub fn decompose(
    detector_basis: Vec<Basis>,
    observables: Vec<ObsLabel>,
    mechanisms: Vec<ErrorMechanism>,
    strict: bool,
) -> Result<DetectorErrorModel> {
    if observables.len() > 64 {
        return Err(Error::Dem("at most 64 observables are supported".into()));
    }
    let comps: Vec<Vec<Component>> = mechanisms
        .iter()
        .map(|m| components(m, &detector_basis, &observables))
        .collect::<Result<_>>()?;

    // Elementary symptoms: detector set -> (observable mask, probability) variants.
    let mut elementary: HashMap<Vec<usize>, Vec<(u64, f64)>> = HashMap::new();
    for (m, cs) in mechanisms.iter().zip(&comps) {
        for c in cs.iter().filter(|c| c.detectors.len() <= 2) {
            let v = elementary.entry(c.detectors.clone()).or_default();
            match v.iter_mut().find(|(mask, _)| *mask == c.obs_mask) {
                Some(e) => e.1 = merge_probability(e.1, m.probability),
                None => v.push((c.obs_mask, m.probability)),
            }
        }
    }
    let mut by_detector: HashMap<usize, Vec<(Vec<usize>, u64, f64)>> = HashMap::new();
    for (dets, vars) in &elementary {
        for &(mask, p) in vars {
            for &d in dets {
                by_detector.entry(d).or_default().push((dets.clone(), mask, p));
            }
        }
    }
    for v in by_detector.values_mut() {
        // Higher probability first, then lexicographic for determinism.
        v.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    }

    let mut edges: Vec<DecomposedEdge> = Vec::new();
    let mut edge_index: HashMap<(Vec<usize>, u64), usize> = HashMap::new();
    let mut push_edge = |dets: Vec<usize>, basis: Basis, mask: u64, p: f64, edges: &mut Vec<DecomposedEdge>| {
        match edge_index.get(&(dets.clone(), mask)) {
            Some(&i) => edges[i].probability = merge_probability(edges[i].probability, p),
            None => {
                edge_index.insert((dets.clone(), mask), edges.len());
                edges.push(DecomposedEdge {
                    probability: p,
                    basis,
                    detectors: dets,
                    observables: mask_labels(mask, &observables),
                });
            }
        }
    };
    let mut hyperedges = Vec::new();
    for (mi, (m, cs)) in mechanisms.iter().zip(&comps).enumerate() {
        for c in cs {
            if c.detectors.len() <= 2 {
                push_edge(c.detectors.clone(), c.basis, c.obs_mask, m.probability, &mut edges);
                continue;
            }
            let parts = factor(&c.detectors, c.obs_mask, &by_detector);
            if parts.is_none() && strict {
                return Err(Error::Dem(format!(
                    "hyperedge {:?} from {} after instruction {} does not decompose",
                    c.detectors, m.origin.term, m.origin.instruction
                )));
            }
            if let Some(ps) = &parts {
                for (dets, mask) in ps {
                    push_edge(dets.clone(), c.basis, *mask, m.probability, &mut edges);
                }
            }
            hyperedges.push(Hyperedge {
                mechanism: mi,
                basis: c.basis,
                detectors: c.detectors.clone(),
                origin: m.origin.clone(),
                parts: parts.map(|ps| ps.into_iter().map(|(d, _)| d).collect()),
            });
        }
    }
    Ok(DetectorErrorModel {
        detector_basis,
        observables,
        mechanisms,
        edges,
        hyperedges,
    })
}

fn mask_labels(mask: u64, obs: &[ObsLabel]) -> Vec<ObsLabel> {
    obs.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &l)| l).collect()
}

type Parts = Vec<(Vec<usize>, u64)>;

/// Depth-first search for a partition of `dets` into elementary symptoms whose
/// observable flips combine to `mask`.
fn factor(dets: &[usize], mask: u64, by_detector: &HashMap<usize, Vec<(Vec<usize>, u64, f64)>>) -> Option<Parts> {
    let Some(&first) = dets.first() else {
        return (mask == 0).then(Vec::new);
    };
    for (piece, pm, _) in by_detector.get(&first).map(|v| v.as_slice()).unwrap_or_default() {
        if !piece.iter().all(|d| dets.contains(d)) {
            continue;
        }
        let rest: Vec<usize> = dets.iter().copied().filter(|d| !piece.contains(d)).collect();
        if let Some(mut tail) = factor(&rest, mask ^ pm, by_detector) {
            tail.insert(0, (piece.clone(), *pm));
            return Some(tail);
        }
    }
    None
}

impl DetectorErrorModel {
    pub fn num_detectors(&self) -> usize {
        self.detector_basis.len()
    }

    /// Number of mechanisms with more than two detectors of one basis.
    pub fn hyperedge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let bases: String = self.detector_basis.iter().map(|b| if *b == Basis::X { 'X' } else { 'Z' }).collect();
        writeln!(out, "# detectors {} {bases}", self.num_detectors()).unwrap();
        let labels: Vec<&str> = self.observables.iter().map(|l| l.name()).collect();
        writeln!(out, "# observables {}", labels.join(" ")).unwrap();
        for m in &self.mechanisms {
            write!(out, "error({})", format_probability(m.probability)).unwrap();
            for d in &m.detectors {
                write!(out, " D{d}").unwrap();
            }
            for l in &m.observables {
                write!(out, " L:{l}").unwrap();
            }
            writeln!(out, " # {} {}", m.origin.instruction, m.origin.term).unwrap();
        }
        out
    }

    /// Reads the text form back and redoes the decomposition.
    pub fn parse(text: &str, strict: bool) -> Result<Self> {
        let mut basis: Option<Vec<Basis>> = None;
        let mut observables: Vec<ObsLabel> = Vec::new();
        let mut mechanisms = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let perr = |msg: String| Error::Parse { line: n + 1, msg };
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix("# detectors ") {
                let mut it = rest.split_whitespace();
                let count: usize = it.next().and_then(|c| c.parse().ok()).ok_or_else(|| perr("detector count".into()))?;
                let letters = it.next().unwrap_or("");
                let b: Vec<Basis> = letters
                    .chars()
                    .map(|ch| match ch {
                        'X' => Ok(Basis::X),
                        'Z' => Ok(Basis::Z),
                        _ => Err(perr(format!("bad basis letter {ch}"))),
                    })
                    .collect::<Result<_>>()?;
                if b.len() != count {
                    return Err(perr("basis string length differs from detector count".into()));
                }
                basis = Some(b);
                continue;
            }
            if let Some(rest) = line.strip_prefix("# observables") {
                observables = rest.split_whitespace().map(|s| s.parse()).collect::<Result<_>>()?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (body, comment) = match line.split_once('#') {
                Some((b, c)) => (b.trim(), c.trim()),
                None => (line, ""),
            };
            let inner = body
                .strip_prefix("error(")
                .and_then(|r| r.split_once(')'))
                .ok_or_else(|| perr("expected error(p)".into()))?;
            let probability: f64 = inner.0.parse().map_err(|e| perr(format!("{e}")))?;
            let mut detectors = Vec::new();
            let mut obs = Vec::new();
            for tok in inner.1.split_whitespace() {
                if let Some(d) = tok.strip_prefix('D') {
                    detectors.push(d.parse().map_err(|e| perr(format!("{e}")))?);
                } else if let Some(l) = tok.strip_prefix("L:") {
                    obs.push(l.parse()?);
                } else {
                    return Err(perr(format!("unexpected token {tok}")));
                }
            }
            let mut ct = comment.split_whitespace();
            let origin = Origin {
                instruction: ct.next().and_then(|s| s.parse().ok()).unwrap_or(usize::MAX),
                term: ct.next().unwrap_or("?").to_string(),
            };
            mechanisms.push(ErrorMechanism {
                probability,
                detectors,
                observables: obs,
                origin,
            });
        }
        let basis = basis.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing '# detectors' header".into(),
        })?;
        for m in &mechanisms {
            if m.detectors.iter().any(|&d| d >= basis.len()) {
                return Err(Error::Dem("mechanism references an unknown detector".into()));
            }
        }
        decompose(basis, observables, mechanisms, strict)
    }
}

/// Six decimals when that is exact enough, otherwise the shortest exact form.
fn format_probability(p: f64) -> String {
    let short = format!("{p:.6}");
    match short.parse::<f64>() {
        Ok(v) if (v - p).abs() <= 1e-9 * p => short,
        _ => format!("{p}"),
    }
}
