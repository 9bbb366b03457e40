//! Clifford instruction streams, their metadata and the text format.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    ResetZ,
    ResetX,
    H,
    Cx,
    MeasureZ,
    MeasureX,
    Tick,
}

impl Op {
    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::ResetZ => "RZ",
            Op::ResetX => "RX",
            Op::H => "H",
            Op::Cx => "CX",
            Op::MeasureZ => "MZ",
            Op::MeasureX => "MX",
            Op::Tick => "TICK",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Tick => 0,
            Op::Cx => 2,
            _ => 1,
        }
    }

    pub fn is_measurement(self) -> bool {
        matches!(self, Op::MeasureZ | Op::MeasureX)
    }

    pub fn is_reset(self) -> bool {
        matches!(self, Op::ResetZ | Op::ResetX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub op: Op,
    q: [usize; 2],
    pub meas_index: Option<usize>,
}

impl Instruction {
    pub fn new(op: Op, qubits: &[usize]) -> Self {
        assert_eq!(qubits.len(), op.arity(), "{op:?} takes {} qubits", op.arity());
        let mut q = [usize::MAX; 2];
        q[..qubits.len()].copy_from_slice(qubits);
        Instruction {
            op,
            q,
            meas_index: None,
        }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::new(Op::Cx, &[control, target])
    }

    pub fn tick() -> Self {
        Self::new(Op::Tick, &[])
    }

    pub fn qubits(&self) -> &[usize] {
        &self.q[..self.op.arity()]
    }

    pub fn q0(&self) -> usize {
        self.q[0]
    }

    pub fn q1(&self) -> usize {
        self.q[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn other(self) -> Basis {
        match self {
            Basis::X => Basis::Z,
            Basis::Z => Basis::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Data initialization, including the Bell-pair CX layer when present.
    Prep,
    /// Stabilizer round `k` (0-based).
    Round(usize),
    /// Everything after the last round: lattice surgery, CX layer, readout.
    Final,
}

/// Contiguous instruction range the detector rules treat as one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
    /// The segment contains a transversal CX layer (3CX control, BS target).
    pub cx_perp: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SeamRecord {
    pub xx: Vec<usize>,
    pub zz: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitMeta {
    pub config: crate::protocol::ProtocolConfig,
    /// Node ids of the 3CX data grid, row-major; empty if the code is unused.
    pub three_cx_data: Vec<usize>,
    pub bs_data: Vec<usize>,
    pub segments: Vec<Segment>,
    /// Measurement indices of the lattice-surgery parities.
    pub seam: SeamRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub num_qubits: usize,
    pub instructions: Vec<Instruction>,
    pub num_measurements: usize,
    pub meta: CircuitMeta,
}

impl Circuit {
    pub fn cx_count(&self) -> usize {
        self.instructions.iter().filter(|i| i.op == Op::Cx).count()
    }

    /// Number of gate layers (instruction groups between ticks that are nonempty).
    pub fn layer_count(&self) -> usize {
        let mut layers = 0;
        let mut open = false;
        for ins in &self.instructions {
            if ins.op == Op::Tick {
                open = false;
            } else if !open {
                open = true;
                layers += 1;
            }
        }
        layers
    }

    /// Qubits touched anywhere in the circuit, sorted.
    pub fn active_qubits(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_qubits];
        for ins in &self.instructions {
            for &q in ins.qubits() {
                seen[q] = true;
            }
        }
        (0..self.num_qubits).filter(|&q| seen[q]).collect()
    }

    /// Checks the per-layer exclusivity and dense measurement numbering.
    pub fn validate(&self) -> Result<()> {
        let mut in_layer = vec![false; self.num_qubits];
        let mut touched: Vec<usize> = Vec::new();
        let mut next_meas = 0;
        for (k, ins) in self.instructions.iter().enumerate() {
            if ins.op == Op::Tick {
                for q in touched.drain(..) {
                    in_layer[q] = false;
                }
                continue;
            }
            for &q in ins.qubits() {
                if q >= self.num_qubits {
                    return Err(Error::Scheduling(format!("instruction {k} uses qubit {q} out of range")));
                }
                if in_layer[q] {
                    return Err(Error::Scheduling(format!(
                        "qubit {q} used twice in one layer at instruction {k}"
                    )));
                }
                in_layer[q] = true;
                touched.push(q);
            }
            match (ins.op.is_measurement(), ins.meas_index) {
                (true, Some(m)) if m == next_meas => next_meas += 1,
                (true, _) => {
                    return Err(Error::Scheduling(format!(
                        "measurement at instruction {k} is not numbered {next_meas}"
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::Scheduling(format!("non-measurement {k} carries an index")))
                }
                (false, None) => {}
            }
        }
        if next_meas != self.num_measurements {
            return Err(Error::Scheduling("measurement count mismatch".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let cfg = serde_json::to_string(&self.meta.config).expect("config serializes");
        writeln!(out, "# config {cfg}").unwrap();
        let mut starts = self.meta.segments.iter().peekable();
        for (k, ins) in self.instructions.iter().enumerate() {
            while let Some(seg) = starts.next_if(|s| s.start == k) {
                match seg.kind {
                    SegmentKind::Prep => writeln!(out, "# prep").unwrap(),
                    SegmentKind::Round(r) => writeln!(out, "# round {r}").unwrap(),
                    SegmentKind::Final => writeln!(out, "# final").unwrap(),
                }
            }
            out.push_str(ins.op.mnemonic());
            for q in ins.qubits() {
                write!(out, " {q}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the text format back into bare instructions (comments ignored).
pub fn parse_instructions(text: &str) -> Result<Vec<Instruction>> {
    let mut out = Vec::new();
    let mut meas = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or_default();
        let op = match name {
            "RZ" => Op::ResetZ,
            "RX" => Op::ResetX,
            "H" => Op::H,
            "CX" => Op::Cx,
            "MZ" => Op::MeasureZ,
            "MX" => Op::MeasureX,
            "TICK" => Op::Tick,
            _ => {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("unknown instruction {name}"),
                })
            }
        };
        let qubits = parts
            .map(|p| {
                p.parse::<usize>().map_err(|e| Error::Parse {
                    line: n + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if qubits.len() != op.arity() {
            return Err(Error::Parse {
                line: n + 1,
                msg: format!("{name} takes {} qubits", op.arity()),
            });
        }
        let mut ins = Instruction::new(op, &qubits);
        if op.is_measurement() {
            ins.meas_index = Some(meas);
            meas += 1;
        }
        out.push(ins);
    }
    Ok(out)
}
