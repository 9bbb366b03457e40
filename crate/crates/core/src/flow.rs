//! Detector and observable derivation by stabilizer-flow rules.
//!
//! Each segment of a circuit is treated as a CSS map from the operators that
//! are known at its start (the tracked rows) to the operators that are known
//! at its end. Every measurement is pulled back to the segment start as a
//! binary column; reset and mid-segment measurement constraints appear as
//! extra residue bits that must cancel. A detector is a candidate operator
//! that is both a product of tracked rows and a product of measurement columns
//! in the same segment.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Basis, Circuit, Op, Segment, SegmentKind};
use crate::circuitgen::threecx_variant;
use crate::codes::{bacon_shor_spec, downgraded_stabilizers, threecx_spec, PauliString, StabilizerSpec};
use crate::error::{Error, Result};
use crate::gf2::{self, BitVec};
use crate::protocol::Protocol;
use crate::tableau::{run_circuit, QubitIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObsLabel {
    XL1,
    ZL1,
    XL2,
    ZL2,
    XxLs,
    ZzLs,
    XxFinal,
    ZzFinal,
}

impl ObsLabel {
    pub const ALL: [ObsLabel; 8] = [
        ObsLabel::XL1,
        ObsLabel::ZL1,
        ObsLabel::XL2,
        ObsLabel::ZL2,
        ObsLabel::XxLs,
        ObsLabel::ZzLs,
        ObsLabel::XxFinal,
        ObsLabel::ZzFinal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObsLabel::XL1 => "X_L1",
            ObsLabel::ZL1 => "Z_L1",
            ObsLabel::XL2 => "X_L2",
            ObsLabel::ZL2 => "Z_L2",
            ObsLabel::XxLs => "XX_LS",
            ObsLabel::ZzLs => "ZZ_LS",
            ObsLabel::XxFinal => "xx_final",
            ObsLabel::ZzFinal => "zz_final",
        }
    }

    /// Pauli type of the logical operator. Its flips are caught by detectors
    /// of the same type.
    pub fn basis(self) -> Basis {
        match self {
            ObsLabel::XL1 | ObsLabel::XL2 | ObsLabel::XxLs | ObsLabel::XxFinal => Basis::X,
            _ => Basis::Z,
        }
    }
}

impl fmt::Display for ObsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObsLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObsLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown observable {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detector {
    pub id: usize,
    /// Sorted measurement indices.
    pub meas: Vec<usize>,
    pub basis: Basis,
    /// 0 is preparation, `k + 1` the k-th stabilizer round, `T + 1` the final segment.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observable {
    pub label: ObsLabel,
    pub meas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub num_measurements: usize,
    pub detectors: Vec<Detector>,
    pub observables: Vec<Observable>,
}

fn parity(record: &[bool], set: &[usize]) -> bool {
    set.iter().fold(false, |acc, &m| acc ^ record[m])
}

impl DetectorModel {
    pub fn observable(&self, label: ObsLabel) -> Option<&Observable> {
        self.observables.iter().find(|o| o.label == label)
    }

    pub fn detector_bits(&self, record: &[bool]) -> Vec<bool> {
        self.detectors.iter().map(|d| parity(record, &d.meas)).collect()
    }

    pub fn observable_bits(&self, record: &[bool]) -> Vec<bool> {
        self.observables.iter().map(|o| parity(record, &o.meas)).collect()
    }

    pub fn count_of(&self, basis: Basis) -> usize {
        self.detectors.iter().filter(|d| d.basis == basis).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for d in &self.detectors {
            let b = if d.basis == Basis::X { "X" } else { "Z" };
            write!(out, "D{} basis={b} round={} M", d.id, d.round).unwrap();
            for m in &d.meas {
                write!(out, " {m}").unwrap();
            }
            out.push('\n');
        }
        for o in &self.observables {
            write!(out, "O {} M", o.label).unwrap();
            for m in &o.meas {
                write!(out, " {m}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Outcome of running the noiseless circuit several times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub runs: usize,
    /// Detector ids that fired on at least one run, with the first failing run.
    pub violations: Vec<(usize, usize)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs the noiseless circuit `runs` times on independent seeds derived from
/// `seed` and lists the detectors whose parity was ever 1.
pub fn verify_determinism_seeded(circuit: &Circuit, dm: &DetectorModel, runs: usize, seed: u64) -> VerifyReport {
    let mut first_fail: BTreeMap<usize, usize> = BTreeMap::new();
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let record = run_circuit(circuit, &mut rng, |_, _, _| {});
        for (d, bit) in dm.detectors.iter().zip(dm.detector_bits(&record)) {
            if bit {
                first_fail.entry(d.id).or_insert(run);
            }
        }
    }
    VerifyReport {
        runs,
        violations: first_fail.into_iter().collect(),
    }
}

pub fn verify_determinism(circuit: &Circuit, dm: &DetectorModel, runs: usize) -> VerifyReport {
    verify_determinism_seeded(circuit, dm, runs, 0x5EED)
}

/// Parity of every observable mapped to +1 / -1.
pub fn observable_values(dm: &DetectorModel, record: &[bool]) -> Result<BTreeMap<ObsLabel, i8>> {
    if record.len() != dm.num_measurements {
        return Err(Error::InvalidArgument(format!(
            "record has {} bits, circuit has {} measurements",
            record.len(),
            dm.num_measurements
        )));
    }
    Ok(dm
        .observables
        .iter()
        .map(|o| (o.label, if parity(record, &o.meas) { -1 } else { 1 }))
        .collect())
}

/// Derives detectors and observables, then checks them on a few noiseless runs.
pub fn derive_detectors(circuit: &Circuit) -> Result<DetectorModel> {
    let dm = derive_unchecked(circuit)?;
    let report = verify_determinism(circuit, &dm, 2);
    if let Some(&(id, _)) = report.violations.first() {
        return Err(Error::Detector {
            id,
            reason: "parity is not deterministic in the noiseless circuit".into(),
        });
    }
    Ok(dm)
}

/// The rule derivation without the tableau cross-check.
pub fn derive_unchecked(circuit: &Circuit) -> Result<DetectorModel> {
    Deriver::new(circuit)?.run()
}

/// A stabilizer known at a segment boundary: its Pauli type, support (dense
/// qubit indices) and the measurement set whose parity gives its value.
#[derive(Debug, Clone)]
struct Row {
    basis: Basis,
    op: BitVec,
    set: BitVec,
}

/// Code operators mapped to dense qubit indices.
#[derive(Debug, Clone, Default)]
struct CodeOps {
    x: Vec<BitVec>,
    z: Vec<BitVec>,
    logical_x: Option<BitVec>,
    logical_z: Option<BitVec>,
}

impl CodeOps {
    fn of(&self, b: Basis) -> &[BitVec] {
        match b {
            Basis::X => &self.x,
            Basis::Z => &self.z,
        }
    }
}

struct Deriver<'a> {
    circuit: &'a Circuit,
    idx: QubitIndex,
    n: usize,
    m: usize,
}

/// Per-segment linear system for one Pauli type.
struct System {
    /// Measurement index and its column (operator bits then residue bits).
    cols: Vec<(usize, BitVec)>,
    width: usize,
    slot: Vec<usize>,
}

impl<'a> Deriver<'a> {
    fn new(circuit: &'a Circuit) -> Result<Self> {
        if circuit.instructions.iter().any(|i| i.op == Op::H) {
            return Err(Error::Unsupported(
                "detector rules cover CSS circuits only (no single-qubit basis changes)".into(),
            ));
        }
        if circuit.meta.segments.is_empty() {
            return Err(Error::InvalidArgument("circuit carries no segment metadata".into()));
        }
        let idx = QubitIndex::for_circuit(circuit);
        let n = idx.len();
        Ok(Deriver {
            circuit,
            idx,
            n,
            m: circuit.num_measurements,
        })
    }

    fn dense(&self, node: usize) -> usize {
        self.idx.get(node).expect("data qubit is active")
    }

    fn map_op(&self, p: &PauliString, data: &[usize]) -> BitVec {
        BitVec::from_indices(self.n, p.support().map(|q| self.dense(data[q])))
    }

    fn code_ops(&self, spec: &StabilizerSpec, data: &[usize]) -> CodeOps {
        CodeOps {
            x: spec.x_gens.iter().map(|g| self.map_op(g, data)).collect(),
            z: spec.z_gens.iter().map(|g| self.map_op(g, data)).collect(),
            logical_x: Some(self.map_op(&spec.logical_x, data)),
            logical_z: Some(self.map_op(&spec.logical_z, data)),
        }
    }

    fn three_cx(&self, round: usize) -> Result<CodeOps> {
        let data = &self.circuit.meta.three_cx_data;
        if data.is_empty() {
            return Ok(CodeOps::default());
        }
        let spec = threecx_spec(self.circuit.meta.config.d, threecx_variant(round))?;
        Ok(self.code_ops(&spec, data))
    }

    fn bacon_shor(&self) -> Result<CodeOps> {
        let data = &self.circuit.meta.bs_data;
        if data.is_empty() {
            return Ok(CodeOps::default());
        }
        let (spec, _) = bacon_shor_spec(self.circuit.meta.config.d)?;
        Ok(self.code_ops(&spec, data))
    }

    /// Row stripes of the 3CX generators and their products with the
    /// matching BS stabilizers; these are the operators that survive a
    /// transversal CX.
    fn cross_candidates(&self, round: usize, b: Basis) -> Result<Vec<BitVec>> {
        let meta = &self.circuit.meta;
        if meta.three_cx_data.is_empty() || meta.bs_data.is_empty() {
            return Ok(Vec::new());
        }
        let d = meta.config.d;
        let spec = threecx_spec(d, threecx_variant(round))?;
        let stripes: Vec<BitVec> = downgraded_stabilizers(&spec)?
            .iter()
            .filter(|s| if b == Basis::X { s.is_x_type() } else { s.is_z_type() })
            .map(|s| self.map_op(s, &meta.three_cx_data))
            .collect();
        let bs = self.bacon_shor()?;
        let mut out = stripes.clone();
        out.extend(bs.of(b).iter().cloned());
        for (s, t) in stripes.iter().zip(bs.of(b)) {
            let mut p = s.clone();
            p.xor_assign(t);
            out.push(p);
        }
        Ok(out)
    }

    fn run(&self) -> Result<DetectorModel> {
        let meta = &self.circuit.meta;
        let cfg = &meta.config;
        let mut tracked: Vec<Row> = Vec::new();
        let mut detectors: Vec<Detector> = Vec::new();
        let mut independent = gf2::Basis::new(0);
        let mut observables = Vec::new();

        for (ordinal, seg) in meta.segments.iter().enumerate() {
            let start_round = match seg.kind {
                SegmentKind::Prep => 0,
                SegmentKind::Round(k) => k,
                SegmentKind::Final => cfg.rounds,
            };
            let systems = [self.system(seg, Basis::X)?, self.system(seg, Basis::Z)?];

            for (bi, b) in [Basis::X, Basis::Z].into_iter().enumerate() {
                let sys = &systems[bi];
                let rows: Vec<&Row> = tracked.iter().filter(|r| r.basis == b).collect();
                let mut meas_basis = gf2::Basis::new(sys.cols.len());
                for (_, col) in &sys.cols {
                    meas_basis.insert(col.clone());
                }
                let mut row_basis = gf2::Basis::new(rows.len());
                for r in &rows {
                    row_basis.insert(r.op.clone());
                }
                let mut candidates: Vec<BitVec> = rows.iter().map(|r| r.op.clone()).collect();
                if seg.kind != SegmentKind::Prep {
                    candidates.extend(self.cross_candidates(start_round, b)?);
                }
                for cand in candidates {
                    if cand.is_zero() {
                        continue;
                    }
                    let mut rem = cand.clone();
                    let row_combo = row_basis.reduce(&mut rem);
                    if !rem.is_zero() {
                        continue;
                    }
                    let Some(mut set) = self.solve_meas(&meas_basis, sys, &cand) else {
                        continue;
                    };
                    for k in row_combo.ones() {
                        set.xor_assign(&rows[k].set);
                    }
                    if set.is_zero() || !independent.insert(set.clone()) {
                        continue;
                    }
                    detectors.push(Detector {
                        id: detectors.len(),
                        meas: set.ones().collect(),
                        basis: b,
                        round: ordinal,
                    });
                }
            }

            match seg.kind {
                SegmentKind::Final => {
                    observables = self.observables(seg, &systems)?;
                    for (b, set) in self.surgery_detectors(&systems)? {
                        if independent.insert(set.clone()) {
                            detectors.push(Detector {
                                id: detectors.len(),
                                meas: set.ones().collect(),
                                basis: b,
                                round: ordinal,
                            });
                        }
                    }
                }
                _ => {
                    let end = self.end_rows(seg)?;
                    let mut next = Vec::with_capacity(end.len());
                    for (b, op) in end {
                        let sys = &systems[if b == Basis::X { 0 } else { 1 }];
                        let mut at_start = self.embed(&op, sys.width);
                        let instrs = &self.circuit.instructions[seg.start..seg.end];
                        self.pull_back(instrs, &sys.slot, b, instrs.len(), &mut at_start)?;
                        let set = self.solve_with_rows(sys, &tracked, b, at_start).ok_or_else(|| {
                            Error::Construction(format!(
                                "{b:?} stabilizer on {:?} is not determined at the end of {:?}",
                                op.ones().map(|q| self.idx.nodes[q]).collect::<Vec<_>>(),
                                seg.kind
                            ))
                        })?;
                        next.push(Row { basis: b, op, set });
                    }
                    tracked = next;
                }
            }
        }
        Ok(DetectorModel {
            num_measurements: self.m,
            detectors,
            observables,
        })
    }

    /// Operators expected to be stabilizers when the segment ends.
    fn end_rows(&self, seg: &Segment) -> Result<Vec<(Basis, BitVec)>> {
        let meta = &self.circuit.meta;
        let cfg = &meta.config;
        let mut out = Vec::new();
        match seg.kind {
            SegmentKind::Prep if seg.cx_perp => {
                for (&v, &b) in meta.three_cx_data.iter().zip(&meta.bs_data) {
                    let pair = BitVec::from_indices(self.n, [self.dense(v), self.dense(b)]);
                    out.push((Basis::X, pair.clone()));
                    out.push((Basis::Z, pair));
                }
            }
            SegmentKind::Prep => {
                let (b3, bb) = match cfg.protocol {
                    Protocol::BellMeas => (cfg.initial[0], cfg.initial[1]),
                    _ => (cfg.basis, cfg.basis),
                };
                for op in self.three_cx(0)?.of(b3) {
                    out.push((b3, op.clone()));
                }
                for op in self.bacon_shor()?.of(bb) {
                    out.push((bb, op.clone()));
                }
            }
            SegmentKind::Round(k) => {
                let three = self.three_cx(k + 1)?;
                let bs = self.bacon_shor()?;
                for b in [Basis::X, Basis::Z] {
                    for op in three.of(b).iter().chain(bs.of(b)) {
                        out.push((b, op.clone()));
                    }
                }
            }
            SegmentKind::Final => {}
        }
        Ok(out)
    }

    fn observables(&self, seg: &Segment, systems: &[System; 2]) -> Result<Vec<Observable>> {
        let meta = &self.circuit.meta;
        let cfg = &meta.config;
        let three = self.three_cx(cfg.rounds)?;
        let bs = self.bacon_shor()?;
        let logical = |ops: &CodeOps, b: Basis| -> BitVec {
            match b {
                Basis::X => ops.logical_x.clone(),
                Basis::Z => ops.logical_z.clone(),
            }
            .expect("code is in use")
        };
        let joint = |b: Basis| {
            let mut p = logical(&three, b);
            p.xor_assign(&logical(&bs, b));
            p
        };
        let mut wanted: Vec<(ObsLabel, BitVec)> = Vec::new();
        let l1 = |b: Basis| if b == Basis::X { ObsLabel::XL1 } else { ObsLabel::ZL1 };
        let l2 = |b: Basis| if b == Basis::X { ObsLabel::XL2 } else { ObsLabel::ZL2 };
        let pair = |b: Basis| if b == Basis::X { ObsLabel::XxFinal } else { ObsLabel::ZzFinal };
        match cfg.protocol {
            Protocol::Memory3cx => wanted.push((l1(cfg.basis), logical(&three, cfg.basis))),
            Protocol::MemoryBs => wanted.push((l2(cfg.basis), logical(&bs, cfg.basis))),
            Protocol::InterleavedMemory => {
                wanted.push((l1(cfg.basis), logical(&three, cfg.basis)));
                wanted.push((l2(cfg.basis), logical(&bs, cfg.basis)));
            }
            Protocol::BellPrep => wanted.push((pair(cfg.basis), joint(cfg.basis))),
            Protocol::BellMeas => wanted.push((pair(cfg.initial[0]), joint(cfg.initial[0]))),
            Protocol::BellPrepMeas | Protocol::BellPrepLsMeas => {
                wanted.push((ObsLabel::XxFinal, joint(Basis::X)));
                wanted.push((ObsLabel::ZzFinal, joint(Basis::Z)));
            }
        }
        let mut out = Vec::new();
        for (label, op) in wanted {
            let sys = &systems[if label.basis() == Basis::X { 0 } else { 1 }];
            let mut mb = gf2::Basis::new(sys.cols.len());
            for (_, c) in &sys.cols {
                mb.insert(c.clone());
            }
            let set = self.solve_meas(&mb, sys, &op).ok_or_else(|| {
                Error::Construction(format!("observable {label} is not read out by the final segment {:?}", seg.kind))
            })?;
            out.push(Observable {
                label,
                meas: set.ones().collect(),
            });
        }
        // Lattice-surgery parities are read directly off the seam ancillas.
        if !meta.seam.xx.is_empty() {
            out.push(Observable {
                label: ObsLabel::XxLs,
                meas: meta.seam.xx.clone(),
            });
        }
        if !meta.seam.zz.is_empty() {
            out.push(Observable {
                label: ObsLabel::ZzLs,
                meas: meta.seam.zz.clone(),
            });
        }
        Ok(out)
    }

    /// The cross-check between each seam product and the final data readout
    /// of the same logical representative. The seam columns coincide with
    /// data-readout columns only when the seam is measured before the
    /// transversal CX.
    fn surgery_detectors(&self, systems: &[System; 2]) -> Result<Vec<(Basis, BitVec)>> {
        let meta = &self.circuit.meta;
        let mut out = Vec::new();
        for (seam, b) in [(&meta.seam.xx, Basis::X), (&meta.seam.zz, Basis::Z)] {
            if seam.is_empty() {
                continue;
            }
            let sys = &systems[if b == Basis::X { 0 } else { 1 }];
            let mut pulled = BitVec::zeros(sys.width);
            let mut data_only = gf2::Basis::new(sys.cols.len());
            for (m, col) in &sys.cols {
                if seam.contains(m) {
                    pulled.xor_assign(col);
                    // Keep the column count aligned with `sys.cols`.
                    data_only.insert(BitVec::zeros(sys.width));
                } else {
                    data_only.insert(col.clone());
                }
            }
            let combo = data_only.reduce(&mut pulled);
            if !pulled.is_zero() {
                return Err(Error::Construction(format!(
                    "{b:?} seam parity is not reproduced by the final data readout"
                )));
            }
            let mut set = BitVec::from_indices(self.m, seam.iter().copied());
            for k in combo.ones() {
                set.flip(sys.cols[k].0);
            }
            out.push((b, set));
        }
        Ok(out)
    }

    /// Measurement set whose parity equals `op` at the segment start, if any.
    fn solve_meas(&self, mb: &gf2::Basis, sys: &System, op: &BitVec) -> Option<BitVec> {
        let mut v = self.embed(op, sys.width);
        let combo = mb.reduce(&mut v);
        if !v.is_zero() {
            return None;
        }
        Some(BitVec::from_indices(self.m, combo.ones().map(|k| sys.cols[k].0)))
    }

    /// Measurement set for a pulled-back column `v`, where tracked rows of the
    /// same type may contribute.
    fn solve_with_rows(&self, sys: &System, tracked: &[Row], b: Basis, mut v: BitVec) -> Option<BitVec> {
        let rows: Vec<&Row> = tracked.iter().filter(|r| r.basis == b).collect();
        let nc = sys.cols.len();
        let mut basis = gf2::Basis::new(nc + rows.len());
        for (_, col) in &sys.cols {
            basis.insert(col.clone());
        }
        for r in &rows {
            basis.insert(self.embed(&r.op, sys.width));
        }
        let combo = basis.reduce(&mut v);
        if !v.is_zero() {
            return None;
        }
        let mut set = BitVec::zeros(self.m);
        for k in combo.ones() {
            if k < nc {
                set.flip(sys.cols[k].0);
            } else {
                set.xor_assign(&rows[k - nc].set);
            }
        }
        Some(set)
    }

    fn embed(&self, op: &BitVec, width: usize) -> BitVec {
        BitVec::from_indices(width, op.ones())
    }

    /// Builds the measurement columns of one Pauli type for a segment.
    fn system(&self, seg: &Segment, b: Basis) -> Result<System> {
        let instrs = &self.circuit.instructions[seg.start..seg.end];
        // Constraint slots: resets and measurements in the other basis.
        let (other_reset, other_meas, own_meas) = match b {
            Basis::X => (Op::ResetZ, Op::MeasureZ, Op::MeasureX),
            Basis::Z => (Op::ResetX, Op::MeasureX, Op::MeasureZ),
        };
        let mut slot = vec![usize::MAX; instrs.len()];
        let mut nslots = 0;
        for (k, ins) in instrs.iter().enumerate() {
            if ins.op == other_reset || ins.op == other_meas {
                slot[k] = nslots;
                nslots += 1;
            }
        }
        let width = self.n + nslots;
        let mut cols = Vec::new();
        for (k, ins) in instrs.iter().enumerate() {
            if ins.op != own_meas {
                continue;
            }
            let mut v = BitVec::zeros(width);
            v.set(self.dense(ins.q0()), true);
            self.pull_back(instrs, &slot, b, k, &mut v)?;
            cols.push((ins.meas_index.expect("measurements are numbered"), v));
        }
        // Seam parities go last so that data readout columns become the pivots
        // and the seam only enters through its own cross-check.
        let seam = &self.circuit.meta.seam;
        cols.sort_by_key(|(m, _)| seam.xx.contains(m) || seam.zz.contains(m));
        Ok(System { cols, width, slot })
    }

    /// Propagates `v` backwards from just before instruction `upto` to the
    /// segment start.
    fn pull_back(&self, instrs: &[crate::circuit::Instruction], slot: &[usize], b: Basis, upto: usize, v: &mut BitVec) -> Result<()> {
        let n = self.n;
        for k in (0..upto).rev() {
            let ins = &instrs[k];
            match ins.op {
                Op::Tick => {}
                Op::H => return Err(Error::Unsupported("H inside a detector segment".into())),
                Op::Cx => {
                    let c = self.dense(ins.q0());
                    let t = self.dense(ins.q1());
                    match b {
                        Basis::X if v.get(c) => v.flip(t),
                        Basis::Z if v.get(t) => v.flip(c),
                        _ => {}
                    }
                }
                Op::ResetZ | Op::ResetX => {
                    let q = self.dense(ins.q0());
                    let same = (ins.op == Op::ResetZ) == (b == Basis::Z);
                    if v.get(q) {
                        if !same {
                            v.flip(n + slot[k]);
                        }
                        v.set(q, false);
                    }
                }
                Op::MeasureZ | Op::MeasureX => {
                    let q = self.dense(ins.q0());
                    let same = (ins.op == Op::MeasureZ) == (b == Basis::Z);
                    if !same && v.get(q) {
                        v.flip(n + slot[k]);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Deterministic measurement parities found from noiseless runs alone: the
/// null space of the outcome differences between runs. Used as an oracle.
pub fn deterministic_parity_space(circuit: &Circuit, runs: usize, seed: u64) -> Vec<BitVec> {
    let m = circuit.num_measurements;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<Vec<bool>> = (0..runs).map(|_| run_circuit(circuit, &mut rng, |_, _, _| {})).collect();
    // Rows: (run r) xor (run 0), plus the reference run itself so only
    // parity-0 subsets survive.
    let mut rows: Vec<BitVec> = Vec::new();
    rows.push(BitVec::from_indices(m, (0..m).filter(|&k| records[0][k])));
    for r in &records[1..] {
        rows.push(BitVec::from_indices(m, (0..m).filter(|&k| r[k] != records[0][k])));
    }
    null_space(&rows, m)
}

/// Basis of `{x : row . x = 0 for every row}`.
pub fn null_space(rows: &[BitVec], m: usize) -> Vec<BitVec> {
    // Row-reduce to reduced echelon form, then read off the free columns.
    let mut mat: Vec<BitVec> = rows.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..m {
        let Some(p) = (r..mat.len()).find(|&i| mat[i].get(col)) else { continue };
        mat.swap(r, p);
        let pivot_row = mat[r].clone();
        for (i, row) in mat.iter_mut().enumerate() {
            if i != r && row.get(col) {
                row.xor_assign(&pivot_row);
            }
        }
        pivots.push(col);
        r += 1;
        if r == mat.len() {
            break;
        }
    }
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; m];
        for &p in &pivots {
            v[p] = true;
        }
        v
    };
    let mut out = Vec::new();
    for free in (0..m).filter(|&c| !is_pivot[c]) {
        let mut x = BitVec::zeros(m);
        x.set(free, true);
        for (i, &p) in pivots.iter().enumerate() {
            if mat[i].get(free) {
                x.set(p, true);
            }
        }
        out.push(x);
    }
    out
}
