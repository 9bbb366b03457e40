//! Pauli-frame Monte Carlo sampling, 64 shots per machine word.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Op;
use crate::dem::{pauli_bits, two_qubit_term, ChannelKind, NoisyCircuit};
use crate::error::{Error, Result};
use crate::flow::{DetectorModel, ObsLabel};
use crate::gf2::BitVec;

/// Shots per independently seeded block.
pub const BLOCK_SHOTS: usize = 1024;
const BLOCK_WORDS: usize = BLOCK_SHOTS / 64;

#[derive(Debug, Clone, Copy)]
enum Step {
    Cx(usize, usize),
    H(usize),
    Reset(usize),
    MeasZ(usize, usize),
    MeasX(usize, usize),
    Noise(usize),
}

/// The noisy circuit flattened into frame updates.
struct Program {
    steps: Vec<Step>,
    num_qubits: usize,
    num_measurements: usize,
    channels: Vec<(ChannelKind, f64)>,
}

impl Program {
    fn new(noisy: &NoisyCircuit) -> Self {
        let c = &noisy.circuit;
        let mut by_after: Vec<Vec<usize>> = vec![Vec::new(); c.instructions.len()];
        for (i, ch) in noisy.channels.iter().enumerate() {
            by_after[ch.after].push(i);
        }
        let mut steps = Vec::new();
        for (k, ins) in c.instructions.iter().enumerate() {
            match ins.op {
                Op::Tick => {}
                Op::Cx => steps.push(Step::Cx(ins.q0(), ins.q1())),
                Op::H => steps.push(Step::H(ins.q0())),
                Op::ResetZ | Op::ResetX => steps.push(Step::Reset(ins.q0())),
                Op::MeasureZ => steps.push(Step::MeasZ(ins.q0(), ins.meas_index.unwrap())),
                Op::MeasureX => steps.push(Step::MeasX(ins.q0(), ins.meas_index.unwrap())),
            }
            steps.extend(by_after[k].iter().map(|&i| Step::Noise(i)));
        }
        Program {
            steps,
            num_qubits: c.num_qubits,
            num_measurements: c.num_measurements,
            channels: noisy.channels.iter().map(|c| (c.kind, c.p)).collect(),
        }
    }
}

/// Frame state for `w` words of shots.
struct Frame {
    w: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    rec: Vec<u64>,
}

impl Frame {
    fn new(p: &Program, w: usize) -> Self {
        Frame {
            w,
            x: vec![0; p.num_qubits * w],
            z: vec![0; p.num_qubits * w],
            rec: vec![0; p.num_measurements * w],
        }
    }

    fn flip_pauli(&mut self, q: usize, pauli: usize, shot: usize) {
        let (x, z) = pauli_bits(pauli);
        let (k, bit) = (q * self.w + shot / 64, 1u64 << (shot % 64));
        if x {
            self.x[k] ^= bit;
        }
        if z {
            self.z[k] ^= bit;
        }
    }

    fn apply_term(&mut self, kind: ChannelKind, term: usize, shot: usize) {
        match kind {
            ChannelKind::Depolarize1(q) => self.flip_pauli(q, term + 1, shot),
            ChannelKind::Depolarize2(a, b) => {
                let (pa, pb) = two_qubit_term(term);
                self.flip_pauli(a, pa, shot);
                self.flip_pauli(b, pb, shot);
            }
            ChannelKind::MeasurementFlip(m) => self.rec[m * self.w + shot / 64] ^= 1u64 << (shot % 64),
        }
    }

    fn step(&mut self, s: Step) {
        let w = self.w;
        match s {
            Step::Cx(c, t) => {
                for i in 0..w {
                    self.x[t * w + i] ^= self.x[c * w + i];
                    self.z[c * w + i] ^= self.z[t * w + i];
                }
            }
            Step::H(q) => {
                for i in 0..w {
                    std::mem::swap(&mut self.x[q * w + i], &mut self.z[q * w + i]);
                }
            }
            Step::Reset(q) => {
                self.x[q * w..(q + 1) * w].fill(0);
                self.z[q * w..(q + 1) * w].fill(0);
            }
            Step::MeasZ(q, m) => {
                let (src, dst) = (&self.x[q * w..(q + 1) * w], m * w);
                self.rec[dst..dst + w].copy_from_slice(src);
            }
            Step::MeasX(q, m) => {
                let (src, dst) = (&self.z[q * w..(q + 1) * w], m * w);
                self.rec[dst..dst + w].copy_from_slice(src);
            }
            Step::Noise(_) => unreachable!("noise steps are applied by the caller"),
        }
    }
}

/// Index of the next firing event after skipping geometric gaps.
fn geometric_gap<R: Rng>(rng: &mut R, p: f64) -> usize {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = rng.gen::<f64>();
    // 1 - u lies in (0, 1], so the log is finite.
    ((1.0 - u).ln() / (1.0 - p).ln()).floor().min(usize::MAX as f64 / 2.0) as usize
}

fn run_block(prog: &Program, shots: usize, rng: &mut ChaCha8Rng) -> Frame {
    let mut f = Frame::new(prog, shots.div_ceil(64));
    for &s in &prog.steps {
        match s {
            Step::Noise(i) => {
                let (kind, p) = prog.channels[i];
                if p <= 0.0 {
                    continue;
                }
                let mut shot = geometric_gap(rng, p);
                while shot < shots {
                    let term = rng.gen_range(0..kind.num_terms());
                    f.apply_term(kind, term, shot);
                    shot += 1 + geometric_gap(rng, p);
                }
            }
            other => f.step(other),
        }
    }
    f
}

/// Symptom of one forced fault: channel `channel` fires term `term` and
/// nothing else does. Bits follow `fault_table` order (detectors, then
/// observables).
pub fn inject_fault(noisy: &NoisyCircuit, dm: &DetectorModel, channel: usize, term: usize) -> BitVec {
    let prog = Program::new(noisy);
    let mut f = Frame::new(&prog, 1);
    for &s in &prog.steps {
        match s {
            Step::Noise(i) if i == channel => f.apply_term(prog.channels[i].0, term, 0),
            Step::Noise(_) => {}
            other => f.step(other),
        }
    }
    let nd = dm.detectors.len();
    let width = nd + dm.observables.len();
    let sets = dm.detectors.iter().map(|d| &d.meas).chain(dm.observables.iter().map(|o| &o.meas));
    BitVec::from_indices(
        width,
        sets.enumerate()
            .filter(|(_, meas)| meas.iter().fold(0, |acc, &m| acc ^ f.rec[m]) & 1 == 1)
            .map(|(i, _)| i),
    )
}

/// Sampled detector and observable flips, one bit-packed row per shot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotTable {
    pub shots: usize,
    pub num_detectors: usize,
    pub observables: Vec<ObsLabel>,
    pub seed: u64,
    pub block_shots: usize,
    det_words: usize,
    det: Vec<u64>,
    obs: Vec<u64>,
}

impl ShotTable {
    pub fn detector(&self, shot: usize, d: usize) -> bool {
        self.det[shot * self.det_words + d / 64] >> (d % 64) & 1 == 1
    }

    pub fn flagged(&self, shot: usize) -> Vec<usize> {
        let row = &self.det[shot * self.det_words..(shot + 1) * self.det_words];
        let mut out = Vec::new();
        for (k, &w) in row.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                out.push(k * 64 + w.trailing_zeros() as usize);
                w &= w - 1;
            }
        }
        out
    }

    pub fn syndrome(&self, shot: usize) -> Vec<bool> {
        (0..self.num_detectors).map(|d| self.detector(shot, d)).collect()
    }

    /// Observable flips as a mask over `observables`.
    pub fn observable_mask(&self, shot: usize) -> u64 {
        self.obs[shot]
    }

    pub fn observable(&self, shot: usize, j: usize) -> bool {
        self.obs[shot] >> j & 1 == 1
    }

    /// JSON header line followed by rows of `ceil((D + L) / 8)` bytes; bit `i`
    /// of a row sits in byte `i / 8` at position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let cols = self.num_detectors + self.observables.len();
        let row_bytes = cols.div_ceil(8);
        let header = serde_json::json!({
            "shots": self.shots,
            "columns": (0..self.num_detectors).map(|d| format!("D{d}"))
                .chain(self.observables.iter().map(|l| format!("L:{l}")))
                .collect::<Vec<_>>(),
            "row_bytes": row_bytes,
            "seed": self.seed,
            "block_shots": self.block_shots,
        });
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for s in 0..self.shots {
            let mut row = vec![0u8; row_bytes];
            for d in 0..self.num_detectors {
                if self.detector(s, d) {
                    row[d / 8] |= 1 << (d % 8);
                }
            }
            for j in 0..self.observables.len() {
                if self.observable(s, j) {
                    let i = self.num_detectors + j;
                    row[i / 8] |= 1 << (i % 8);
                }
            }
            out.extend(row);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::InvalidArgument("shot file lacks a header line".into()))?;
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl])?;
        let bad = |m: &str| Error::InvalidArgument(format!("shot header: {m}"));
        let shots = header["shots"].as_u64().ok_or_else(|| bad("shots"))? as usize;
        let row_bytes = header["row_bytes"].as_u64().ok_or_else(|| bad("row_bytes"))? as usize;
        let columns: Vec<String> = serde_json::from_value(header["columns"].clone())?;
        let num_detectors = columns.iter().filter(|c| c.starts_with('D')).count();
        let observables = columns
            .iter()
            .filter_map(|c| c.strip_prefix("L:"))
            .map(|l| l.parse())
            .collect::<Result<Vec<ObsLabel>>>()?;
        let body = &bytes[nl + 1..];
        if body.len() != shots * row_bytes {
            return Err(bad("body length does not match shots x row_bytes"));
        }
        let det_words = num_detectors.div_ceil(64).max(1);
        let mut det = vec![0u64; shots * det_words];
        let mut obs = vec![0u64; shots];
        for s in 0..shots {
            let row = &body[s * row_bytes..(s + 1) * row_bytes];
            let bit = |i: usize| row[i / 8] >> (i % 8) & 1 == 1;
            for d in 0..num_detectors {
                if bit(d) {
                    det[s * det_words + d / 64] |= 1 << (d % 64);
                }
            }
            for j in 0..observables.len() {
                if bit(num_detectors + j) {
                    obs[s] |= 1 << j;
                }
            }
        }
        Ok(ShotTable {
            shots,
            num_detectors,
            observables,
            seed: header["seed"].as_u64().unwrap_or(0),
            block_shots: header["block_shots"].as_u64().unwrap_or(BLOCK_SHOTS as u64) as usize,
            det_words,
            det,
            obs,
        })
    }
}

/// Samples `shots` shots. Blocks of `BLOCK_SHOTS` are seeded from `(seed,
/// block index)`, so the result does not depend on the thread count.
pub fn sample(noisy: &NoisyCircuit, dm: &DetectorModel, shots: usize, seed: u64) -> ShotTable {
    sample_from_block(noisy, dm, shots, seed, 0)
}

/// As `sample`, starting at block `first_block`; consecutive calls with
/// advancing block offsets continue one reproducible stream.
pub fn sample_from_block(
    noisy: &NoisyCircuit,
    dm: &DetectorModel,
    shots: usize,
    seed: u64,
    first_block: u64,
) -> ShotTable {
    let prog = Program::new(noisy);
    let nd = dm.detectors.len();
    let det_words = nd.div_ceil(64).max(1);
    let nblocks = shots.div_ceil(BLOCK_SHOTS);
    let blocks: Vec<(Vec<u64>, Vec<u64>)> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK_SHOTS.min(shots - b * BLOCK_SHOTS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(first_block + b as u64);
            let f = run_block(&prog, n, &mut rng);
            let w = f.w;
            let parity_words = |meas: &[usize]| {
                let mut acc = vec![0u64; w];
                for &m in meas {
                    for i in 0..w {
                        acc[i] ^= f.rec[m * w + i];
                    }
                }
                acc
            };
            let mut det = vec![0u64; n * det_words];
            for (d, dd) in dm.detectors.iter().enumerate() {
                let words = parity_words(&dd.meas);
                for s in 0..n {
                    if words[s / 64] >> (s % 64) & 1 == 1 {
                        det[s * det_words + d / 64] |= 1 << (d % 64);
                    }
                }
            }
            let mut obs = vec![0u64; n];
            for (j, o) in dm.observables.iter().enumerate() {
                let words = parity_words(&o.meas);
                for (s, slot) in obs.iter_mut().enumerate() {
                    if words[s / 64] >> (s % 64) & 1 == 1 {
                        *slot |= 1 << j;
                    }
                }
            }
            debug_assert!(w <= BLOCK_WORDS);
            (det, obs)
        })
        .collect();
    let mut det = Vec::with_capacity(shots * det_words);
    let mut obs = Vec::with_capacity(shots);
    for (d, o) in blocks {
        det.extend(d);
        obs.extend(o);
    }
    ShotTable {
        shots,
        num_detectors: nd,
        observables: dm.observables.iter().map(|o| o.label).collect(),
        seed,
        block_shots: BLOCK_SHOTS,
        det_words,
        det,
        obs,
    }
}
