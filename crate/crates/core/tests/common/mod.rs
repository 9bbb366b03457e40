//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use duplex_core::circuit::{Basis, Circuit, Op};
use duplex_core::circuitgen::build_circuit;
use duplex_core::decoder::{build_matching_graph, BasisGraph, MatchingGraph, Node};
use duplex_core::dem::{attach_noise, extract_dem, ChannelKind, NoiseModel, NoisyCircuit};
use duplex_core::flow::{derive_detectors, DetectorModel};
use duplex_core::lattice::Layout;
use duplex_core::protocol::ProtocolConfig;
use duplex_core::sampler::inject_fault;

pub fn graph_for(cfg: &ProtocolConfig, p: f64) -> MatchingGraph {
    let layout = Layout::for_distance(cfg.d).unwrap();
    let c = build_circuit(cfg, &layout).unwrap();
    let dm = derive_detectors(&c).unwrap();
    let nc = attach_noise(&c, &NoiseModel::new(p).unwrap()).unwrap();
    build_matching_graph(&extract_dem(&nc, &dm).unwrap()).unwrap()
}

pub fn noisy(cfg: &ProtocolConfig, p: f64) -> (Circuit, DetectorModel, NoisyCircuit) {
    let layout = Layout::for_distance(cfg.d).unwrap();
    let c = build_circuit(cfg, &layout).unwrap();
    let dm = derive_detectors(&c).unwrap();
    let nc = attach_noise(&c, &NoiseModel::new(p).unwrap()).unwrap();
    (c, dm, nc)
}

/// Floyd-Warshall distances over the detector nodes of one basis graph, with
/// boundaries as sinks, then an exhaustive minimum over pairings.
pub struct Oracle {
    pub dets: Vec<usize>,
    dist: Vec<Vec<f64>>,
    logical: Vec<f64>,
    trivial: Vec<f64>,
}

impl Oracle {
    pub fn new(g: &BasisGraph) -> Self {
        let n = g.detectors.len();
        let idx = |node: Node| match node {
            Node::Detector(d) => Some(g.detectors.iter().position(|&x| x == d).unwrap()),
            _ => None,
        };
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        let mut logical = vec![f64::INFINITY; n];
        let mut trivial = vec![f64::INFINITY; n];
        for i in 0..n {
            dist[i][i] = 0.0;
        }
        for e in &g.edges {
            match (idx(e.u), idx(e.v)) {
                (Some(a), Some(b)) => {
                    dist[a][b] = dist[a][b].min(e.weight);
                    dist[b][a] = dist[a][b];
                }
                (Some(a), None) if e.v == Node::Logical => logical[a] = logical[a].min(e.weight),
                (Some(a), None) => trivial[a] = trivial[a].min(e.weight),
                _ => unreachable!(),
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = dist[i][k] + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                    }
                }
            }
        }
        let close = |b: &Vec<f64>| -> Vec<f64> { (0..n).map(|i| (0..n).map(|k| dist[i][k] + b[k]).fold(f64::INFINITY, f64::min)).collect() };
        let (logical, trivial) = (close(&logical), close(&trivial));
        Oracle {
            dets: g.detectors.clone(),
            dist,
            logical,
            trivial,
        }
    }

    /// Minimum total weight; `allow` picks the boundaries defects may use.
    pub fn min_weight(&self, flagged: &[usize], allow_logical: bool, allow_trivial: bool) -> f64 {
        let loc: Vec<usize> = flagged.iter().map(|d| self.dets.iter().position(|x| x == d).unwrap()).collect();
        let k = loc.len();
        assert!(k <= 16);
        let bnd: Vec<f64> = loc
            .iter()
            .map(|&i| {
                let l = if allow_logical { self.logical[i] } else { f64::INFINITY };
                let t = if allow_trivial { self.trivial[i] } else { f64::INFINITY };
                l.min(t)
            })
            .collect();
        let mut memo = vec![f64::NAN; 1 << k];
        memo[0] = 0.0;
        for mask in 1usize..1 << k {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << i);
            let mut best = bnd[i] + memo[rest];
            for j in (i + 1..k).filter(|j| rest >> j & 1 == 1) {
                best = best.min(self.dist[loc[i]][loc[j]] + memo[rest & !(1 << j)]);
            }
            memo[mask] = best;
        }
        memo[(1 << k) - 1]
    }
}

pub fn flagged_in(g: &BasisGraph, syndrome: &[bool]) -> Vec<usize> {
    g.detectors.iter().copied().filter(|&d| syndrome[d]).collect()
}

/// Largest number of same-basis detectors flipped by a single-qubit Pauli
/// on a data qubit at any segment boundary or right after a transversal CX.
pub fn worst_boundary_data_fault(c: &Circuit, dm: &DetectorModel) -> usize {
    let m = &c.meta;
    let mut points: Vec<usize> = m.segments.iter().map(|s| s.end - 1).collect();
    // The transversal layer is packed as one run of disjoint CX gates.
    let pair = |k: usize| {
        let i = &c.instructions[k];
        i.op == Op::Cx && (0..m.bs_data.len()).any(|g| i.q0() == m.three_cx_data[g] && i.q1() == m.bs_data[g])
    };
    let n = m.bs_data.len();
    points.extend((n - 1..c.instructions.len()).filter(|&k| (k + 1 - n..=k).all(pair)));
    let mut worst = 0;
    for at in points {
        for &q in c.meta.three_cx_data.iter().chain(&c.meta.bs_data) {
            let probe = NoisyCircuit::with_channels(
                c.clone(),
                vec![duplex_core::dem::Channel {
                    after: at,
                    kind: ChannelKind::Depolarize1(q),
                    p: 1.0,
                }],
            )
            .unwrap();
            for term in 0..3 {
                let sym = inject_fault(&probe, dm, 0, term);
                for b in [Basis::X, Basis::Z] {
                    let n = sym.ones().filter(|&i| i < dm.detectors.len() && dm.detectors[i].basis == b).count();
                    worst = worst.max(n);
                }
            }
        }
    }
    worst
}
