//! Circuit generation for every protocol: 3CX and Bacon-Shor rounds, their
//! interleaving, transversal Bell preparation/measurement and the
//! lattice-surgery parity layer. Every effective next-nearest-neighbour CX is
//! expanded into four native CX gates through the shared middle qubit.

use crate::circuit::{Basis, Circuit, CircuitMeta, Instruction, Op, SeamRecord, Segment, SegmentKind};
use crate::codes::Variant;
use crate::error::{Error, Result};
use crate::lattice::{active_cells, AncillaLabel, Corner, HeavyHexLattice, Layout};
use crate::protocol::{LsBasis, LsOrder, Protocol, ProtocolConfig, Schedule};

/// CX(control -> target) through `middle`: the middle qubit ends in its initial state.
pub fn decompose_nnn_cx(
    lat: &HeavyHexLattice,
    control: usize,
    middle: usize,
    target: usize,
) -> Result<[Instruction; 4]> {
    if !lat.adjacent(control, middle) || !lat.adjacent(middle, target) {
        return Err(Error::InvalidArgument(format!(
            "middle {middle} is not adjacent to both {control} and {target}"
        )));
    }
    Ok([
        Instruction::cx(control, middle),
        Instruction::cx(middle, target),
        Instruction::cx(control, middle),
        Instruction::cx(middle, target),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// CX(data -> measure).
    Read,
    /// CX(measure -> data).
    Write,
}

#[derive(Debug, Clone, Copy)]
struct CellPlan {
    reset: Basis,
    measure: Basis,
    steps: [Option<(Corner, Dir)>; 4],
}

/// Time-dynamic 3CX schedule for cell `(r, c)` in a round whose start code has
/// X plaquettes on cells of parity `p + 1`. The round ends in the other variant.
fn cell_plan(d: usize, r: i32, c: i32, p: i32) -> Option<CellPlan> {
    use Corner::*;
    use Dir::*;
    let n = d as i32;
    let inner = |x: i32| (0..n - 1).contains(&x);
    let par = (r + c).rem_euclid(2);
    if inner(r) && inner(c) {
        if par == p {
            Some(CellPlan {
                reset: Basis::Z,
                measure: Basis::X,
                steps: [
                    Some((BottomRight, Read)),
                    Some((BottomLeft, Read)),
                    Some((TopRight, Write)),
                    Some((BottomRight, Write)),
                ],
            })
        } else {
            Some(CellPlan {
                reset: Basis::X,
                measure: Basis::Z,
                steps: [
                    Some((BottomRight, Write)),
                    Some((TopRight, Write)),
                    Some((BottomLeft, Read)),
                    Some((BottomRight, Read)),
                ],
            })
        }
    } else if c == -1 && inner(r) {
        // Left boundary: X stabilizers, either retiring from the start code or
        // being prepared for the end code.
        let steps = if par == (p + 1).rem_euclid(2) {
            [Some((BottomRight, Write)), Some((TopRight, Write)), None, None]
        } else {
            [None, None, Some((TopRight, Write)), Some((BottomRight, Write))]
        };
        Some(CellPlan {
            reset: Basis::X,
            measure: Basis::X,
            steps,
        })
    } else if r == -1 && inner(c) {
        let steps = if par == p {
            [Some((BottomRight, Read)), Some((BottomLeft, Read)), None, None]
        } else {
            [None, None, Some((BottomLeft, Read)), Some((BottomRight, Read))]
        };
        Some(CellPlan {
            reset: Basis::Z,
            measure: Basis::Z,
            steps,
        })
    } else {
        None
    }
}

/// 3CX variant at the start of round `t` (0-based).
pub fn threecx_variant(t: usize) -> Variant {
    if t % 2 == 0 {
        Variant::A
    } else {
        Variant::B
    }
}

fn reset(b: Basis, q: usize) -> Instruction {
    Instruction::new(if b == Basis::Z { Op::ResetZ } else { Op::ResetX }, &[q])
}

fn measure(b: Basis, q: usize) -> Instruction {
    Instruction::new(if b == Basis::Z { Op::MeasureZ } else { Op::MeasureX }, &[q])
}

/// Instructions of one round, split at the points where the two codes may be
/// interleaved.
#[derive(Debug, Clone, Default)]
pub struct RoundParts {
    pub resets: Vec<Instruction>,
    pub layers: Vec<Vec<Instruction>>,
    pub measures: Vec<Instruction>,
}

pub fn threecx_round(layout: &Layout, t: usize) -> Result<RoundParts> {
    let d = layout.d;
    let map = &layout.three_cx;
    let p = (t % 2) as i32;
    let mut parts = RoundParts {
        layers: vec![Vec::new(); 4],
        ..Default::default()
    };
    for (r, c) in active_cells(d) {
        let plan = cell_plan(d, r, c, p).expect("active cells have a plan");
        let m = map.ancilla[&AncillaLabel::Cell(r, c)];
        parts.resets.push(reset(plan.reset, m));
        for (k, step) in plan.steps.iter().enumerate() {
            let Some((corner, dir)) = *step else { continue };
            let (rr, cc) = corner.data(r, c);
            let q = map.data_qubit(rr as usize, cc as usize);
            let mid = map.middle(m, q).ok_or_else(|| {
                Error::Placement(format!("no coupling recorded between m({r},{c}) and q({rr},{cc})"))
            })?;
            let (ctl, tgt) = match dir {
                Dir::Read => (q, m),
                Dir::Write => (m, q),
            };
            parts.layers[k].extend(decompose_nnn_cx(&layout.lattice, ctl, mid, tgt)?);
        }
        parts.measures.push(measure(plan.measure, m));
    }
    Ok(parts)
}

/// Bacon-Shor gauge round: `.0` are the Z gauges, `.1` the X gauges, each with
/// two CX layers.
pub fn bacon_shor_round(layout: &Layout) -> Result<(RoundParts, RoundParts)> {
    let d = layout.d;
    let map = &layout.bacon_shor;
    let lat = &layout.lattice;
    let mid = |a: usize, b: usize| {
        map.middle(a, b)
            .ok_or_else(|| Error::Placement(format!("no Bacon-Shor middle between {a} and {b}")))
    };
    let mut z = RoundParts {
        layers: vec![Vec::new(); 2],
        ..Default::default()
    };
    let mut x = RoundParts {
        layers: vec![Vec::new(); 2],
        ..Default::default()
    };
    for r in 0..d {
        for c in 0..d {
            if c + 1 < d {
                let a = map.ancilla[&AncillaLabel::ZGauge(r, c)];
                let (left, right) = (map.data_qubit(r, c), map.data_qubit(r, c + 1));
                z.resets.push(reset(Basis::Z, a));
                z.layers[0].extend(decompose_nnn_cx(lat, left, mid(a, left)?, a)?);
                z.layers[1].extend(decompose_nnn_cx(lat, right, mid(a, right)?, a)?);
                z.measures.push(measure(Basis::Z, a));
            }
            if r + 1 < d {
                let a = map.ancilla[&AncillaLabel::XGauge(r, c)];
                let (top, bottom) = (map.data_qubit(r, c), map.data_qubit(r + 1, c));
                x.resets.push(reset(Basis::X, a));
                x.layers[0].extend(decompose_nnn_cx(lat, a, mid(a, top)?, top)?);
                x.layers[1].extend(decompose_nnn_cx(lat, a, mid(a, bottom)?, bottom)?);
                x.measures.push(measure(Basis::X, a));
            }
        }
    }
    Ok((z, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeamPair {
    pub three_cx: usize,
    pub bacon_shor: usize,
    pub ancilla: usize,
    /// The natural ancilla position is off the lattice; the vertex on the far
    /// side of the Bacon-Shor qubit is used instead.
    pub relocated: bool,
}

/// Seam pairs for XX (row 0, ancillas on the left links of the 3CX data) and ZZ
/// (last column, ancillas on the right links).
pub fn seam_pairs(layout: &Layout) -> Result<(Vec<SeamPair>, Vec<SeamPair>)> {
    let d = layout.d;
    let lat = &layout.lattice;
    let coord = |id: usize| (lat.nodes[id].row, lat.nodes[id].col);
    let mut xx = Vec::new();
    for c in 0..d {
        let v = layout.three_cx.data_qubit(0, c);
        let b = layout.bacon_shor.data_qubit(0, c);
        let (row, col) = coord(v);
        let a = lat.node_at(row, col - 1).ok_or_else(|| {
            Error::Placement(format!("missing XX seam ancilla for pair q(0,{c})"))
        })?;
        xx.push(SeamPair {
            three_cx: v,
            bacon_shor: b,
            ancilla: a,
            relocated: false,
        });
    }
    let mut zz = Vec::new();
    for r in 0..d {
        let v = layout.three_cx.data_qubit(r, d - 1);
        let b = layout.bacon_shor.data_qubit(r, d - 1);
        let (row, col) = coord(v);
        let pair = match lat.node_at(row, col + 1) {
            Some(a) => SeamPair {
                three_cx: v,
                bacon_shor: b,
                ancilla: a,
                relocated: false,
            },
            None => {
                let u = lat.node_at(row + 2, col).ok_or_else(|| {
                    Error::Placement(format!("missing ZZ seam ancilla for pair q({r},{})", d - 1))
                })?;
                SeamPair {
                    three_cx: v,
                    bacon_shor: b,
                    ancilla: u,
                    relocated: true,
                }
            }
        };
        zz.push(pair);
    }
    Ok((xx, zz))
}

/// Gates of the lattice-surgery layer; the ancilla measurements come back
/// separately so the caller can place them in the final readout.
pub fn lattice_surgery_layer(
    layout: &Layout,
    bases: &[LsBasis],
) -> Result<(Vec<Instruction>, Vec<Instruction>)> {
    let lat = &layout.lattice;
    let (xx, zz) = seam_pairs(layout)?;
    let mut gates = Vec::new();
    let mut measures = Vec::new();
    if bases.contains(&LsBasis::XX) {
        for s in &xx {
            gates.push(reset(Basis::X, s.ancilla));
            gates.push(Instruction::cx(s.ancilla, s.three_cx));
            gates.extend(decompose_nnn_cx(lat, s.ancilla, s.three_cx, s.bacon_shor)?);
            measures.push(measure(Basis::X, s.ancilla));
        }
    }
    if bases.contains(&LsBasis::ZZ) {
        for s in &zz {
            gates.push(reset(Basis::Z, s.ancilla));
            if s.relocated {
                gates.push(Instruction::cx(s.bacon_shor, s.ancilla));
                gates.extend(decompose_nnn_cx(lat, s.three_cx, s.bacon_shor, s.ancilla)?);
            } else {
                gates.push(Instruction::cx(s.three_cx, s.ancilla));
                gates.extend(decompose_nnn_cx(lat, s.bacon_shor, s.three_cx, s.ancilla)?);
            }
            measures.push(measure(Basis::Z, s.ancilla));
        }
    }
    Ok((gates, measures))
}

/// As-soon-as-possible layering of a program-ordered instruction list.
pub fn pack_layers(ops: &[Instruction], num_qubits: usize) -> Vec<Vec<Instruction>> {
    let mut free_at = vec![0usize; num_qubits];
    let mut layers: Vec<Vec<Instruction>> = Vec::new();
    for ins in ops {
        let layer = ins.qubits().iter().map(|&q| free_at[q]).max().unwrap_or(0);
        if layers.len() <= layer {
            layers.resize_with(layer + 1, Vec::new);
        }
        layers[layer].push(*ins);
        for &q in ins.qubits() {
            free_at[q] = layer + 1;
        }
    }
    layers
}

struct Emitter {
    num_qubits: usize,
    instructions: Vec<Instruction>,
    num_measurements: usize,
    segments: Vec<Segment>,
}

impl Emitter {
    fn new(num_qubits: usize) -> Self {
        Emitter {
            num_qubits,
            instructions: Vec::new(),
            num_measurements: 0,
            segments: Vec::new(),
        }
    }

    /// Emits one segment made of sub-blocks, each packed on its own (a barrier
    /// separates consecutive sub-blocks).
    fn segment(&mut self, kind: SegmentKind, cx_perp: bool, blocks: &[Vec<Instruction>]) {
        let start = self.instructions.len();
        for block in blocks {
            for layer in pack_layers(block, self.num_qubits) {
                for mut ins in layer {
                    if ins.op.is_measurement() {
                        ins.meas_index = Some(self.num_measurements);
                        self.num_measurements += 1;
                    }
                    self.instructions.push(ins);
                }
                self.instructions.push(Instruction::tick());
            }
        }
        self.segments.push(Segment {
            kind,
            start,
            end: self.instructions.len(),
            cx_perp,
        });
    }

    fn meas_of(&self, seg: usize, q: usize) -> Option<usize> {
        let s = &self.segments[seg];
        self.instructions[s.start..s.end]
            .iter()
            .find(|i| i.op.is_measurement() && i.q0() == q)
            .and_then(|i| i.meas_index)
    }
}

fn transversal_cx(layout: &Layout) -> Vec<Instruction> {
    let d = layout.d;
    let mut out = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            out.push(Instruction::cx(
                layout.three_cx.data_qubit(r, c),
                layout.bacon_shor.data_qubit(r, c),
            ));
        }
    }
    out
}

fn round_program(layout: &Layout, cfg: &ProtocolConfig, t: usize) -> Result<Vec<Vec<Instruction>>> {
    let three = cfg.protocol.uses_three_cx();
    let bs = cfg.protocol.uses_bacon_shor();
    let cat = |parts: &[&[Instruction]]| parts.concat();
    let whole = |p: &RoundParts| -> Vec<Instruction> {
        let mut v = p.resets.clone();
        for l in &p.layers {
            v.extend_from_slice(l);
        }
        v.extend_from_slice(&p.measures);
        v
    };
    match (three, bs) {
        (true, false) => Ok(vec![whole(&threecx_round(layout, t)?)]),
        (false, true) => {
            let (z, x) = bacon_shor_round(layout)?;
            Ok(vec![cat(&[&whole(&z), &whole(&x)])])
        }
        (true, true) => {
            let a = threecx_round(layout, t)?;
            let (z, x) = bacon_shor_round(layout)?;
            match cfg.schedule {
                Schedule::Sequential => Ok(vec![whole(&a), cat(&[&whole(&z), &whole(&x)])]),
                Schedule::Interleaved => Ok(vec![cat(&[
                    &a.resets,
                    &a.layers[0],
                    &z.resets,
                    &z.layers[0],
                    &z.layers[1],
                    &z.measures,
                    &a.layers[1],
                    &a.layers[2],
                    &x.resets,
                    &x.layers[0],
                    &x.layers[1],
                    &x.measures,
                    &a.layers[3],
                    &a.measures,
                ])]),
            }
        }
        (false, false) => unreachable!("every protocol uses a code"),
    }
}

/// Builds the circuit for any protocol on `layout`.
pub fn build_circuit(cfg: &ProtocolConfig, layout: &Layout) -> Result<Circuit> {
    cfg.validate()?;
    if cfg.d != layout.d {
        return Err(Error::InvalidArgument(format!(
            "config distance {} does not match layout distance {}",
            cfg.d, layout.d
        )));
    }
    let p = cfg.protocol;
    let nq = layout.lattice.len();
    let three_data: Vec<usize> = if p.uses_three_cx() { layout.three_cx.data_nodes() } else { Vec::new() };
    let bs_data: Vec<usize> = if p.uses_bacon_shor() { layout.bacon_shor.data_nodes() } else { Vec::new() };

    let mut rounds = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        rounds.push(round_program(layout, cfg, t)?);
    }

    let (init3, init_bs) = match p {
        Protocol::BellPrep | Protocol::BellPrepMeas | Protocol::BellPrepLsMeas => (Basis::X, Basis::Z),
        Protocol::BellMeas => (cfg.initial[0], cfg.initial[1]),
        _ => (cfg.basis, cfg.basis),
    };
    let mut final_ops: Vec<Instruction> = Vec::new();
    let mut final_cx = false;
    let mut seam_meas: Vec<Instruction> = Vec::new();
    if p.measures_bell_pair() {
        final_cx = true;
        let (ls_gates, ls_meas) = if p == Protocol::BellPrepLsMeas {
            lattice_surgery_layer(layout, &cfg.ls_bases)?
        } else {
            (Vec::new(), Vec::new())
        };
        match cfg.ls_order {
            LsOrder::BeforeCx => {
                final_ops.extend(&ls_gates);
                final_ops.extend(transversal_cx(layout));
            }
            LsOrder::AfterCx => {
                final_ops.extend(transversal_cx(layout));
                final_ops.extend(&ls_gates);
            }
        }
        final_ops.extend(three_data.iter().map(|&q| measure(Basis::X, q)));
        final_ops.extend(bs_data.iter().map(|&q| measure(Basis::Z, q)));
        final_ops.extend(&ls_meas);
        seam_meas = ls_meas;
    } else {
        final_ops.extend(three_data.iter().map(|&q| measure(cfg.basis, q)));
        final_ops.extend(bs_data.iter().map(|&q| measure(cfg.basis, q)));
    }

    // Qubits that only ever serve as pass-through middles get one reset up front.
    let mut reset_first = vec![false; nq];
    let mut used = vec![false; nq];
    for ins in rounds.iter().flatten().flatten().chain(&final_ops) {
        for &q in ins.qubits() {
            if !used[q] {
                used[q] = true;
                reset_first[q] = ins.op.is_reset();
            }
        }
    }
    let mut prep: Vec<Instruction> = Vec::new();
    prep.extend(three_data.iter().map(|&q| reset(init3, q)));
    prep.extend(bs_data.iter().map(|&q| reset(init_bs, q)));
    let is_data = |q: usize| three_data.contains(&q) || bs_data.contains(&q);
    for q in 0..nq {
        if used[q] && !reset_first[q] && !is_data(q) {
            prep.push(reset(Basis::Z, q));
        }
    }
    let prep_cx = p.prepares_bell_pair();
    if prep_cx {
        prep.extend(transversal_cx(layout));
    }

    let mut em = Emitter::new(nq);
    em.segment(SegmentKind::Prep, prep_cx, &[prep]);
    for (t, mut blocks) in rounds.into_iter().enumerate() {
        let cx_here = cfg.cx_after_round == Some(t);
        if cx_here {
            blocks.insert(0, transversal_cx(layout));
        }
        em.segment(SegmentKind::Round(t), cx_here, &blocks);
    }
    em.segment(SegmentKind::Final, final_cx, &[final_ops]);

    let final_seg = em.segments.len() - 1;
    let mut seam = SeamRecord::default();
    if !seam_meas.is_empty() {
        let (xx, zz) = seam_pairs(layout)?;
        if cfg.ls_bases.contains(&LsBasis::XX) {
            seam.xx = xx.iter().filter_map(|s| em.meas_of(final_seg, s.ancilla)).collect();
        }
        if cfg.ls_bases.contains(&LsBasis::ZZ) {
            seam.zz = zz.iter().filter_map(|s| em.meas_of(final_seg, s.ancilla)).collect();
        }
        debug_assert_eq!(seam.xx.len() + seam.zz.len(), seam_meas.len());
    }

    let circuit = Circuit {
        num_qubits: nq,
        instructions: em.instructions,
        num_measurements: em.num_measurements,
        meta: CircuitMeta {
            config: cfg.clone(),
            three_cx_data: three_data,
            bs_data,
            segments: em.segments,
            seam,
        },
    };
    circuit.validate()?;
    for ins in circuit.instructions.iter().filter(|i| i.op == Op::Cx) {
        if !layout.lattice.adjacent(ins.q0(), ins.q1()) {
            return Err(Error::Scheduling(format!(
                "CX {} {} is not a lattice edge",
                ins.q0(),
                ins.q1()
            )));
        }
    }
    Ok(circuit)
}

pub fn memory_circuit(cfg: &ProtocolConfig, layout: &Layout) -> Result<Circuit> {
    if !matches!(cfg.protocol, Protocol::Memory3cx | Protocol::MemoryBs) {
        return Err(Error::InvalidArgument(format!("{} is not a single-code memory", cfg.protocol)));
    }
    build_circuit(cfg, layout)
}

pub fn interleaved_circuit(cfg: &ProtocolConfig, layout: &Layout) -> Result<Circuit> {
    if !(cfg.protocol == Protocol::InterleavedMemory || cfg.protocol.is_bell()) {
        return Err(Error::InvalidArgument(format!("{} does not run both codes", cfg.protocol)));
    }
    build_circuit(cfg, layout)
}

pub fn bell_protocol_circuit(cfg: &ProtocolConfig, layout: &Layout) -> Result<Circuit> {
    if !cfg.protocol.is_bell() {
        return Err(Error::InvalidArgument(format!("{} is not a Bell protocol", cfg.protocol)));
    }
    build_circuit(cfg, layout)
}

/// Layers of one dual-code round when the codes run back to back, and when
/// they are interleaved.
pub fn round_layer_counts(layout: &Layout) -> Result<(usize, usize)> {
    let nq = layout.lattice.len();
    let mut cfg = ProtocolConfig::new(Protocol::InterleavedMemory, layout.d, 1);
    cfg.schedule = Schedule::Sequential;
    let seq: usize = round_program(layout, &cfg, 0)?
        .iter()
        .map(|b| pack_layers(b, nq).len())
        .sum();
    cfg.schedule = Schedule::Interleaved;
    let inter: usize = round_program(layout, &cfg, 0)?
        .iter()
        .map(|b| pack_layers(b, nq).len())
        .sum();
    Ok((seq, inter))
}
